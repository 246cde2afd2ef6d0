//! Cross-module invariants checked exhaustively on small suites, plus
//! randomized relabeling and round-trip laws.

use std::collections::HashMap;

use gc_core::ef::{build_ef, check_coalgebra, Coalgebra, SequenceElement};
use gc_core::forest::ForestStructure;
use gc_core::games::{solve_ef_game, solve_modal_game, GameMode, Player};
use gc_core::homcount::bounded_td_profile;
use gc_core::logic::{rank_k_equiv, Fragment};
use gc_core::modal::unravelling_code;
use gc_core::params::{tree_depth, treewidth};
use gc_core::structure::{count_homomorphisms, search_homomorphisms, Structure};
use gc_core::suites::{
    all_graphs_upto, all_pointed_kripke_upto, all_structures_upto, clique, cycle_graph, edgeless,
    graph_vocab, path_graph,
};

fn two_element_suite() -> Vec<Structure> {
    all_structures_upto(&graph_vocab(), 2, true).unwrap()
}

#[test]
fn game_winners_are_monotone_in_rounds() {
    let suite = two_element_suite();
    for a in &suite {
        for b in &suite {
            for mode in [GameMode::Ep, GameMode::Full, GameMode::Count] {
                // a Duplicator win at k implies a win at every smaller k:
                // equivalently, once lost, lost for all larger k
                let mut lost = false;
                for k in 0..=3 {
                    let win = solve_ef_game(a, b, k, mode).unwrap().winner
                        == Player::Duplicator;
                    if lost {
                        assert!(!win, "win at {k} rounds after a loss ({mode:?})");
                    }
                    lost |= !win;
                }
            }
        }
    }
}

#[test]
fn mode_hierarchy_on_small_suite() {
    let suite = all_structures_upto(&graph_vocab(), 3, true).unwrap();
    for k in [1usize, 2] {
        for a in &suite {
            for b in &suite {
                let count = solve_ef_game(a, b, k, GameMode::Count).unwrap().winner
                    == Player::Duplicator;
                if !count {
                    continue;
                }
                let full =
                    solve_ef_game(a, b, k, GameMode::Full).unwrap().winner == Player::Duplicator;
                assert!(full, "count-win without full-win at k={k}");
                let ep_there =
                    solve_ef_game(a, b, k, GameMode::Ep).unwrap().winner == Player::Duplicator;
                let ep_back =
                    solve_ef_game(b, a, k, GameMode::Ep).unwrap().winner == Player::Duplicator;
                assert!(ep_there && ep_back, "full-win without ep-wins at k={k}");
            }
        }
    }
}

#[test]
fn full_win_implies_ep_wins_both_ways() {
    let suite = two_element_suite();
    for k in [1usize, 2] {
        for a in &suite {
            for b in &suite {
                let full =
                    solve_ef_game(a, b, k, GameMode::Full).unwrap().winner == Player::Duplicator;
                if full {
                    assert_eq!(
                        solve_ef_game(a, b, k, GameMode::Ep).unwrap().winner,
                        Player::Duplicator
                    );
                    assert_eq!(
                        solve_ef_game(b, a, k, GameMode::Ep).unwrap().winner,
                        Player::Duplicator
                    );
                }
            }
        }
    }
}

#[test]
fn ep_win_is_a_preorder() {
    let suite = all_structures_upto(&graph_vocab(), 3, true).unwrap();
    let k = 2;
    let n = suite.len();
    let mut wins = vec![vec![false; n]; n];
    for (i, a) in suite.iter().enumerate() {
        for (j, b) in suite.iter().enumerate() {
            wins[i][j] =
                solve_ef_game(a, b, k, GameMode::Ep).unwrap().winner == Player::Duplicator;
        }
        assert!(wins[i][i], "reflexivity failed at {i}");
    }
    for i in 0..n {
        for j in 0..n {
            if !wins[i][j] {
                continue;
            }
            for (l, &jl) in wins[j].iter().enumerate() {
                if jl {
                    assert!(wins[i][l], "transitivity failed: {i} -> {j} -> {l}");
                }
            }
        }
    }
}

#[test]
fn graded_equivalence_refines_plain_modal_equivalence() {
    let suite = all_pointed_kripke_upto(3).unwrap();
    for k in [1usize, 2] {
        let codes: Vec<_> = suite
            .iter()
            .map(|s| unravelling_code(s, k).unwrap())
            .collect();
        let mut by_code: HashMap<&_, Vec<usize>> = HashMap::new();
        for (i, c) in codes.iter().enumerate() {
            by_code.entry(c).or_default().push(i);
        }
        for class in by_code.values() {
            for &i in class {
                for &j in class {
                    let game = solve_modal_game(&suite[i], &suite[j], k - 1, GameMode::Full)
                        .unwrap();
                    assert_eq!(
                        game.winner,
                        Player::Duplicator,
                        "graded-equivalent pair not plainly equivalent at depth {}",
                        k - 1
                    );
                }
            }
        }
    }
}

#[test]
fn td_profiles_respect_counting_equivalence() {
    let suite = all_structures_upto(&graph_vocab(), 3, true).unwrap();
    for k in [1usize, 2] {
        let types: Vec<String> = suite
            .iter()
            .map(|a| gc_core::logic::hintikka_type(a, &[], k, true))
            .collect();
        let profiles: Vec<Vec<u64>> = suite
            .iter()
            .map(|a| {
                bounded_td_profile(a, k, 3)
                    .unwrap()
                    .entries
                    .into_iter()
                    .map(|(_, c)| c)
                    .collect()
            })
            .collect();
        for i in 0..suite.len() {
            for j in 0..suite.len() {
                if types[i] == types[j] {
                    assert_eq!(
                        profiles[i], profiles[j],
                        "counting-equivalent pair with different td-{k} profiles"
                    );
                }
            }
        }
    }
}

#[test]
fn coalgebras_biject_with_forest_orders() {
    // count valid coalgebra maps and valid condition-(E) forest orders of
    // height <= k; the prefix-closure reading makes them the same thing
    let suite = all_structures_upto(&graph_vocab(), 3, false).unwrap();
    for a in &suite {
        for k in 1..=3usize {
            let cover = build_ef(a, k).unwrap();
            let n = a.size();
            // all plays ending at each element
            let plays_for: Vec<Vec<SequenceElement>> = (0..n)
                .map(|e| {
                    (0..cover.size())
                        .map(|node| cover.sequence(node).clone())
                        .filter(|s| *s.entries.last().unwrap() == e)
                        .collect()
                })
                .collect();
            let mut coalgebras = 0usize;
            let mut pick = vec![0usize; n];
            'odometer: loop {
                let map: Vec<SequenceElement> = pick
                    .iter()
                    .enumerate()
                    .map(|(e, &i)| plays_for[e][i].clone())
                    .collect();
                let c = Coalgebra {
                    carrier: a.clone(),
                    bound: k,
                    map,
                };
                if check_coalgebra(&c).unwrap() {
                    coalgebras += 1;
                }
                let mut i = 0;
                loop {
                    if i == n {
                        break 'odometer;
                    }
                    pick[i] += 1;
                    if pick[i] < plays_for[i].len() {
                        break;
                    }
                    pick[i] = 0;
                    i += 1;
                }
            }
            let mut orders = 0usize;
            count_forest_orders(a, k, &mut orders);
            assert_eq!(
                coalgebras, orders,
                "coalgebra/forest-order mismatch on {} at k={k}",
                a.render()
            );
        }
    }
}

fn count_forest_orders(a: &Structure, max_height: usize, out: &mut usize) {
    // scan all parent maps; count acyclic ones of height <= k satisfying (E)
    let n = a.size();
    let gaifman = a.gaifman_graph();
    let mut digits = vec![0usize; n];
    if n == 0 {
        *out = 1;
        return;
    }
    loop {
        let parent: Vec<Option<usize>> = digits
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                if d == 0 {
                    None
                } else {
                    let p = d - 1;
                    Some(if p >= i { p + 1 } else { p })
                }
            })
            .collect();
        if let Ok(f) = ForestStructure::new(a.clone(), parent) {
            let report = f.validate();
            if report.is_valid() && report.height <= max_height {
                let _ = &gaifman;
                *out += 1;
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            digits[i] += 1;
            if digits[i] < n {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn search_iff_positive_count_small() {
    let suite = two_element_suite();
    for a in &suite {
        for b in &suite {
            let found = !search_homomorphisms(a, b, Some(1)).unwrap().is_empty();
            let count = count_homomorphisms(a, b).unwrap();
            assert_eq!(found, count > 0);
        }
    }
}

#[test]
fn connected_counts_add_over_disjoint_unions() {
    let connected = [clique(2), path_graph(3), clique(3), cycle_graph(4)];
    let parts = [clique(3), path_graph(2), cycle_graph(5), edgeless(2)];
    for c in &connected {
        for a in &parts {
            for b in &parts {
                let union = a.disjoint_union(b).unwrap();
                let lhs = count_homomorphisms(c, &union).unwrap();
                let rhs =
                    count_homomorphisms(c, a).unwrap() + count_homomorphisms(c, b).unwrap();
                assert_eq!(lhs, rhs, "additivity failed for C={}", c.render());
            }
        }
    }
}

#[test]
fn pebble_consistency_is_exact_above_the_treewidth() {
    // with k = treewidth(A)+1 pebbles, A carries a coalgebra, so the
    // existential pebble game decides plain homomorphism existence
    let graphs = all_graphs_upto(4);
    for a in &graphs {
        let k = treewidth(a).unwrap() + 1;
        for b in &graphs {
            let game = gc_core::games::solve_pebble_game(a, b, k, GameMode::Ep).unwrap();
            let hom = !search_homomorphisms(a, b, Some(1)).unwrap().is_empty();
            assert_eq!(
                game.winner == Player::Duplicator,
                hom,
                "k-consistency at k={k} disagrees with hom on
{}
vs
{}",
                a.render(),
                b.render()
            );
        }
    }
}

#[test]
fn ef_game_is_exact_at_the_tree_depth() {
    // with k = tree-depth(A) rounds the existential EF game decides plain
    // homomorphism existence, again via the coalgebra
    let graphs = all_graphs_upto(4);
    for a in &graphs {
        let k = tree_depth(a).unwrap();
        for b in &graphs {
            let game = solve_ef_game(a, b, k, GameMode::Ep).unwrap();
            let hom = !search_homomorphisms(a, b, Some(1)).unwrap().is_empty();
            assert_eq!(
                game.winner == Player::Duplicator,
                hom,
                "EF at k={k} disagrees with hom on
{}
vs
{}",
                a.render(),
                b.render()
            );
        }
    }
}

#[test]
#[allow(clippy::int_plus_one)]
fn tree_depth_dominates_treewidth_up_to_six() {
    for g in all_graphs_upto(6) {
        let td = tree_depth(&g).unwrap();
        let tw = treewidth(&g).unwrap();
        assert!(td >= tw + 1, "td {td} < tw+1 {} on {}", tw + 1, g.render());
    }
}

#[test]
fn ep_types_equal_hom_from_cover_on_mixed_vocabulary() {
    // the three-way agreement is not specific to one binary relation: spot
    // check a vocabulary with a unary and a binary symbol
    let vocab = gc_core::Vocabulary::new(&[("P", 1), ("E", 2)]).unwrap();
    let mut a = Structure::new(vocab.clone());
    for i in 0..2 {
        a.add_element(&format!("a{i}")).unwrap();
    }
    a.add_tuple(0, vec![0]).unwrap();
    a.add_tuple(1, vec![0, 1]).unwrap();
    let mut b = Structure::new(vocab);
    for i in 0..2 {
        b.add_element(&format!("b{i}")).unwrap();
    }
    b.add_tuple(0, vec![0]).unwrap();
    b.add_tuple(0, vec![1]).unwrap();
    b.add_tuple(1, vec![0, 1]).unwrap();
    b.add_tuple(1, vec![1, 0]).unwrap();
    for k in 1..=2 {
        let cover = build_ef(&a, k).unwrap();
        let hom = !search_homomorphisms(cover.structure(), &b, Some(1))
            .unwrap()
            .is_empty();
        let game = solve_ef_game(&a, &b, k, GameMode::Ep).unwrap().winner
            == Player::Duplicator;
        let types = rank_k_equiv(&a, &b, k, Fragment::Ep).unwrap();
        assert_eq!(hom, game);
        assert_eq!(game, types);
    }
}

mod random_laws {
    use super::*;
    use proptest::prelude::*;

    fn arb_structure(max_n: usize) -> impl Strategy<Value = Structure> {
        (1..=max_n).prop_flat_map(move |n| {
            let tuples = proptest::collection::vec((0..n, 0..n), 0..=(n * n).min(8));
            tuples.prop_map(move |rows| {
                let mut s = edgeless(n);
                for (x, y) in rows {
                    s.add_tuple(0, vec![x, y]).unwrap();
                }
                s
            })
        })
    }

    fn arb_forest(max_n: usize) -> impl Strategy<Value = ForestStructure> {
        (1..=max_n).prop_flat_map(move |n| {
            let parents = proptest::collection::vec(0..=n, n);
            let chain_edges = proptest::collection::vec((0..n, 0..n), 0..=4);
            (parents, chain_edges).prop_map(move |(raw, edges)| {
                // parent strictly earlier in declaration order: always acyclic
                let parent: Vec<Option<usize>> = raw
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| if p < i { Some(p) } else { None })
                    .collect();
                let mut base = edgeless(n);
                let probe = ForestStructure::new(base.clone(), parent.clone()).unwrap();
                for (x, y) in edges {
                    // keep condition (E): only relate comparable elements
                    if probe.comparable(x, y) {
                        base.add_tuple(0, vec![x, y]).unwrap();
                    }
                }
                ForestStructure::new(base, parent).unwrap()
            })
        })
    }

    fn permuted_copy(f: &ForestStructure, perm: &[usize]) -> ForestStructure {
        // rebuild with permuted declaration order and fresh names
        let base = f.base();
        let n = base.size();
        let mut inverse = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut out = Structure::new(base.vocabulary().clone());
        for &old in perm {
            out.add_element(&format!("r{old}")).unwrap();
        }
        for sym in 0..base.vocabulary().len() {
            for row in base.table(sym).rows() {
                out.add_tuple(sym, row.iter().map(|&e| inverse[e]).collect())
                    .unwrap();
            }
        }
        let parent: Vec<Option<usize>> = (0..n)
            .map(|new| f.parent(perm[new]).map(|p| inverse[p]))
            .collect();
        ForestStructure::new(out, parent).unwrap()
    }

    proptest! {
        #[test]
        fn render_parse_roundtrip(s in arb_structure(4)) {
            let text = s.render();
            let parsed = Structure::parse(&text).unwrap();
            prop_assert_eq!(&parsed, &s);
            prop_assert_eq!(parsed.render(), text);
        }

        #[test]
        fn gaifman_ignores_tuple_declaration_order(s in arb_structure(4), seed in any::<u64>()) {
            // shuffle the tuple lines of the rendered file
            let text = s.render();
            let mut tuple_lines: Vec<&str> =
                text.lines().filter(|l| l.starts_with("tuple")).collect();
            let mut state = seed;
            for i in (1..tuple_lines.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                let j = (state % (i as u64 + 1)) as usize;
                tuple_lines.swap(i, j);
            }
            let other_lines: Vec<&str> =
                text.lines().filter(|l| !l.starts_with("tuple")).collect();
            let shuffled = format!("{}\n{}\n", other_lines.join("\n"), tuple_lines.join("\n"));
            let reparsed = Structure::parse(&shuffled).unwrap();
            prop_assert_eq!(reparsed.gaifman_graph(), s.gaifman_graph());
        }

        #[test]
        fn forest_code_is_relabeling_invariant(f in arb_forest(6), seed in any::<u64>()) {
            let n = f.size();
            let mut state = seed;
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                let j = (state % (i as u64 + 1)) as usize;
                perm.swap(i, j);
            }
            let copy = permuted_copy(&f, &perm);
            prop_assert_eq!(f.canonical_code().unwrap(), copy.canonical_code().unwrap());
        }

        #[test]
        fn branches_cover_every_chain(f in arb_forest(8)) {
            let branches = f.branches().unwrap();
            // every element occurs in some branch
            let mut seen = vec![false; f.size()];
            for b in &branches {
                for name in b.as_forest().base().universe() {
                    seen[f.base().element_index(name).unwrap()] = true;
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
            // every chain-from-root extends to some branch
            for e in 0..f.size() {
                let chain = f.ancestor_chain(e).unwrap();
                let names: Vec<&str> =
                    chain.iter().map(|&x| f.base().element_name(x)).collect();
                let extended = branches.iter().any(|b| {
                    let universe = b.as_forest().base().universe();
                    universe.len() >= names.len()
                        && names
                            .iter()
                            .enumerate()
                            .all(|(i, n)| universe[i] == *n)
                });
                prop_assert!(extended, "chain {names:?} extends to no branch");
            }
            // height is the maximum branch height
            let max_height = branches.iter().map(|b| b.height()).max().unwrap_or(0);
            prop_assert_eq!(f.height(), max_height);
        }

        #[test]
        fn parameters_are_isomorphism_invariant(s in arb_structure(5), seed in any::<u64>()) {
            let n = s.size();
            let mut state = seed;
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                let j = (state % (i as u64 + 1)) as usize;
                perm.swap(i, j);
            }
            let mut copy = Structure::new(s.vocabulary().clone());
            let mut inverse = vec![0usize; n];
            for (new, &old) in perm.iter().enumerate() {
                inverse[old] = new;
            }
            for &old in &perm {
                copy.add_element(&format!("v{old}")).unwrap();
            }
            for sym in 0..s.vocabulary().len() {
                for row in s.table(sym).rows() {
                    copy.add_tuple(sym, row.iter().map(|&e| inverse[e]).collect()).unwrap();
                }
            }
            prop_assert_eq!(tree_depth(&s).unwrap(), tree_depth(&copy).unwrap());
            prop_assert_eq!(treewidth(&s).unwrap(), treewidth(&copy).unwrap());
        }

        #[test]
        fn search_iff_positive_count_random(a in arb_structure(4), b in arb_structure(4)) {
            let found = !search_homomorphisms(&a, &b, Some(1)).unwrap().is_empty();
            let count = count_homomorphisms(&a, &b).unwrap();
            prop_assert_eq!(found, count > 0);
        }
    }
}
