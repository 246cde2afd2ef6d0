//! Named example structures and the exhaustive small-instance suites the
//! tests and the audit sweep over.

use crate::error::Result;
use crate::homcount::enumerate_structures;
use crate::structure::{CanonicalKey, Structure, Vocabulary};

pub fn graph_vocab() -> Vocabulary {
    Vocabulary::new(&[("E", 2)]).expect("valid vocabulary")
}

pub fn kripke_vocab() -> Vocabulary {
    Vocabulary::new(&[("P", 1), ("R", 2)]).expect("valid vocabulary")
}

fn fresh_graph(n: usize) -> Structure {
    let mut s = Structure::new(graph_vocab());
    for i in 0..n {
        s.add_element(&format!("x{i}")).expect("fresh element");
    }
    s
}

/// n isolated vertices over the graph vocabulary (n = 0 gives the empty
/// structure).
pub fn edgeless(n: usize) -> Structure {
    fresh_graph(n)
}

fn add_undirected(s: &mut Structure, a: usize, b: usize) {
    s.add_tuple(0, vec![a, b]).expect("edge");
    s.add_tuple(0, vec![b, a]).expect("edge");
}

/// Complete loop-free graph K_n (symmetric edge relation).
pub fn clique(n: usize) -> Structure {
    let mut s = fresh_graph(n);
    for a in 0..n {
        for b in (a + 1)..n {
            add_undirected(&mut s, a, b);
        }
    }
    s
}

/// Path with n vertices and n-1 edges.
pub fn path_graph(n: usize) -> Structure {
    let mut s = fresh_graph(n);
    for a in 1..n {
        add_undirected(&mut s, a - 1, a);
    }
    s
}

/// Cycle C_n (n >= 3).
pub fn cycle_graph(n: usize) -> Structure {
    assert!(n >= 3, "cycles need at least 3 vertices");
    let mut s = path_graph(n);
    add_undirected(&mut s, n - 1, 0);
    s
}

/// Strict linear order with n points over the vocabulary {lt/2}.
pub fn linear_order(n: usize) -> Structure {
    let vocab = Vocabulary::new(&[("lt", 2)]).expect("valid vocabulary");
    let mut s = Structure::new(vocab);
    for i in 0..n {
        s.add_element(&format!("x{i}")).expect("fresh element");
    }
    for a in 0..n {
        for b in (a + 1)..n {
            s.add_tuple(0, vec![a, b]).expect("order tuple");
        }
    }
    s
}

/// A pointed Kripke structure over {P/1, R/2} from explicit data.
pub fn pointed_kripke(
    states: usize,
    props: &[usize],
    transitions: &[(usize, usize)],
    point: usize,
) -> Structure {
    let mut k = Structure::new(kripke_vocab());
    for i in 0..states {
        k.add_element(&format!("s{i}")).expect("fresh element");
    }
    for &p in props {
        k.add_tuple(0, vec![p]).expect("proposition");
    }
    for &(u, v) in transitions {
        k.add_tuple(1, vec![u, v]).expect("transition");
    }
    k.set_point(point).expect("point in universe");
    k
}

/// All structures over `vocab` with at most `max_size` elements, one per
/// isomorphism class, in canonical generation order. Includes the empty
/// structure when `include_empty` is set.
pub fn all_structures_upto(
    vocab: &Vocabulary,
    max_size: usize,
    include_empty: bool,
) -> Result<Vec<Structure>> {
    let mut out = Vec::new();
    if include_empty {
        out.push(Structure::new(vocab.clone()));
    }
    out.extend(enumerate_structures(vocab, max_size)?);
    Ok(out)
}

/// All simple undirected loop-free graphs with 1..=max_n vertices, one per
/// isomorphism class, as symmetric edge structures.
pub fn all_graphs_upto(max_n: usize) -> Vec<Structure> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .collect();
        let m = pairs.len();
        assert!(m < 28, "graph enumeration is desk-scale only");
        // precompute how each vertex permutation acts on the pair indices
        let mut perms: Vec<Vec<usize>> = Vec::new();
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            let action: Vec<usize> = pairs
                .iter()
                .map(|&(a, b)| {
                    let (x, y) = (perm[a].min(perm[b]), perm[a].max(perm[b]));
                    pairs.iter().position(|&p| p == (x, y)).unwrap()
                })
                .collect();
            perms.push(action);
            if !next_perm(&mut perm) {
                break;
            }
        }
        let mut seen = vec![false; 1usize << m];
        let mut masks: Vec<u32> = Vec::new();
        for mask in 0..(1u32 << m) {
            if seen[mask as usize] {
                continue;
            }
            let mut canon = mask;
            for action in &perms {
                let mut img = 0u32;
                for (i, &j) in action.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        img |= 1 << j;
                    }
                }
                seen[img as usize] = true;
                canon = canon.min(img);
            }
            masks.push(canon);
        }
        masks.sort_unstable();
        masks.dedup();
        // canonical order puts denser structures first within a size
        masks.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));
        for mask in masks {
            let mut g = fresh_graph(n);
            for (i, &(a, b)) in pairs.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    add_undirected(&mut g, a, b);
                }
            }
            out.push(g);
        }
    }
    out
}

/// All pointed Kripke structures (one proposition, one transition relation)
/// with 1..=max_states states, one per pointed-isomorphism class. The point
/// is always the first element.
pub fn all_pointed_kripke_upto(max_states: usize) -> Result<Vec<Structure>> {
    let vocab = kripke_vocab();
    let mut reps: Vec<(CanonicalKey, Structure)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for n in 1..=max_states {
        let prop_space = 1usize << n;
        let trans_space = 1usize << (n * n);
        for props in 0..prop_space {
            for trans in 0..trans_space {
                let mut k = Structure::new(vocab.clone());
                for i in 0..n {
                    k.add_element(&format!("s{i}"))?;
                }
                k.set_point(0)?;
                for i in 0..n {
                    if props & (1 << i) != 0 {
                        k.add_tuple(0, vec![i])?;
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        if trans & (1 << (i * n + j)) != 0 {
                            k.add_tuple(1, vec![i, j])?;
                        }
                    }
                }
                let key = k.canonical_key()?;
                if seen.insert(key.clone()) {
                    reps.push((key, k));
                }
            }
        }
    }
    reps.sort_by(|(a, _), (b, _)| a.cmp(b));
    Ok(reps.into_iter().map(|(_, s)| s).collect())
}

fn next_perm(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_counts_match_oeis() {
        // numbers of simple graphs on 1..6 vertices up to isomorphism
        let counts: Vec<usize> = (1..=6)
            .map(|n| all_graphs_upto(n).iter().filter(|g| g.size() == n).count())
            .collect();
        assert_eq!(counts, vec![1, 2, 4, 11, 34, 156]);
    }

    #[test]
    fn structure_suite_size() {
        // digraphs with loops on <= 3 labelled vertices, up to isomorphism:
        // 2 + 10 + 104
        let suite = all_structures_upto(&graph_vocab(), 3, false).unwrap();
        assert_eq!(suite.len(), 116);
        let with_empty = all_structures_upto(&graph_vocab(), 3, true).unwrap();
        assert_eq!(with_empty.len(), 117);
    }

    #[test]
    fn kripke_suite_basics() {
        let suite = all_pointed_kripke_upto(2).unwrap();
        // 1 state: 2 props x 2 loops = 4; all distinct
        assert!(suite.iter().filter(|k| k.size() == 1).count() == 4);
        for k in &suite {
            assert_eq!(k.point(), Some(0));
        }
    }

    #[test]
    fn fixtures() {
        assert_eq!(clique(4).tuple_count(), 12);
        assert_eq!(path_graph(4).gaifman_graph().edge_count(), 3);
        assert_eq!(cycle_graph(4).gaifman_graph().edge_count(), 4);
        assert_eq!(linear_order(3).tuple_count(), 3);
    }
}
