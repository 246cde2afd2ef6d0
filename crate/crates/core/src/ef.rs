//! The Ehrenfeucht-Fraisse comonad: the cofree forest cover over nonempty
//! sequences of length <= k, its counit and comultiplication, coKleisli
//! extension, coalgebras, and the coalgebra number.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::forest::{check_forest_morphism, ForestStructure};
use crate::structure::{ElementMap, MapMode, Structure};

/// Node budget for materialized covers; overridable with GC_MAX_UNIVERSE.
pub const DEFAULT_MAX_UNIVERSE: usize = 200_000;

pub(crate) fn universe_limit() -> usize {
    std::env::var("GC_MAX_UNIVERSE")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_MAX_UNIVERSE)
}

/// A nonempty play over the base universe, of length at most the bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SequenceElement {
    pub entries: Vec<usize>,
}

impl SequenceElement {
    pub fn new(entries: Vec<usize>) -> Self {
        assert!(!entries.is_empty(), "sequences are nonempty");
        SequenceElement { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// The last entry of a play: where the comonad's counit sends it.
pub fn counit_of(s: &SequenceElement) -> usize {
    *s.entries.last().expect("nonempty")
}

/// All nonempty prefixes in increasing length: the concrete comultiplication.
pub fn comultiplication_of(s: &SequenceElement) -> Vec<SequenceElement> {
    (1..=s.len())
        .map(|i| SequenceElement::new(s.entries[..i].to_vec()))
        .collect()
}

/// The cover E_k A, materialized: a forest structure over all nonempty
/// plays of length <= k, ordered by prefix.
#[derive(Debug, Clone)]
pub struct EfCover {
    forest: ForestStructure,
    original: Structure,
    bound: usize,
    sequences: Vec<SequenceElement>,
    index: HashMap<Vec<usize>, usize>,
}

impl EfCover {
    pub fn forest(&self) -> &ForestStructure {
        &self.forest
    }

    /// The underlying structure of the cover (the cover with its order
    /// forgotten), suitable for homomorphism questions E_k A -> B.
    pub fn structure(&self) -> &Structure {
        self.forest.base()
    }

    /// The structure the cover was built over.
    pub fn original(&self) -> &Structure {
        &self.original
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn size(&self) -> usize {
        self.sequences.len()
    }

    pub fn sequence(&self, node: usize) -> &SequenceElement {
        &self.sequences[node]
    }

    pub fn node_of(&self, entries: &[usize]) -> Option<usize> {
        self.index.get(entries).copied()
    }

    pub fn counit(&self, node: usize) -> usize {
        counit_of(&self.sequences[node])
    }
}

fn sequence_name(entries: &[usize]) -> String {
    let mut name = String::from("s");
    for (i, e) in entries.iter().enumerate() {
        if i > 0 {
            name.push('_');
        }
        name.push_str(&e.to_string());
    }
    name
}

/// Builds E_k A. Relations lift to tuples of pairwise prefix-comparable
/// plays whose last entries stand in the original relation.
pub fn build_ef(a: &Structure, k: usize) -> Result<EfCover> {
    if k == 0 {
        return Err(Error::precondition("cover bound k must be >= 1"));
    }
    let n = a.size();
    let mut total: usize = 0;
    let mut level: usize = 1;
    for _ in 0..k {
        level = level.saturating_mul(n);
        total = total.saturating_add(level);
        if total > universe_limit() {
            return Err(Error::precondition(format!(
                "cover would exceed the node budget ({}); raise GC_MAX_UNIVERSE to override",
                universe_limit()
            )));
        }
    }

    let mut sequences: Vec<SequenceElement> = Vec::with_capacity(total);
    let mut index: HashMap<Vec<usize>, usize> = HashMap::with_capacity(total);
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for stem in &frontier {
            for e in 0..n {
                let mut seq = stem.clone();
                seq.push(e);
                index.insert(seq.clone(), sequences.len());
                sequences.push(SequenceElement::new(seq.clone()));
                next.push(seq);
            }
        }
        frontier = next;
    }

    let mut base = Structure::new(a.vocabulary().clone());
    for s in &sequences {
        base.add_element(&sequence_name(&s.entries))?;
    }
    let parent: Vec<Option<usize>> = sequences
        .iter()
        .map(|s| {
            if s.len() == 1 {
                None
            } else {
                Some(index[&s.entries[..s.len() - 1]])
            }
        })
        .collect();

    // lift each relation along the ancestor chains: a tuple of comparable
    // plays is determined by its longest play plus positions on that chain
    for (node, s) in sequences.iter().enumerate() {
        let chain: Vec<usize> = (1..=s.len()).map(|i| index[&s.entries[..i]]).collect();
        for sym in 0..a.vocabulary().len() {
            let arity = a.vocabulary().arity(sym);
            let mut pick = vec![0usize; arity];
            loop {
                if pick.iter().any(|&p| p == chain.len() - 1) {
                    let tuple: Vec<usize> = pick.iter().map(|&p| chain[p]).collect();
                    let ends: Vec<usize> =
                        tuple.iter().map(|&t| counit_of(&sequences[t])).collect();
                    if a.has_tuple(sym, &ends) {
                        base.add_tuple(sym, tuple)?;
                    }
                }
                // odometer over chain positions
                let mut i = 0;
                loop {
                    if i == arity {
                        break;
                    }
                    pick[i] += 1;
                    if pick[i] < chain.len() {
                        break;
                    }
                    pick[i] = 0;
                    i += 1;
                }
                if i == arity {
                    break;
                }
            }
        }
        let _ = node;
    }

    let forest = ForestStructure::new(base, parent)?;
    debug_assert!(forest.validate().is_valid());
    Ok(EfCover {
        forest,
        original: a.clone(),
        bound: k,
        sequences,
        index,
    })
}

/// Extends a homomorphism f : T -> A (T a forest structure of height <= k)
/// to the unique forest morphism T -> E_k A over the counit: each element
/// maps to the play of f-images along its covering chain.
pub fn cokleisli_extend(f: &ElementMap, t: &ForestStructure, k: usize) -> Result<ElementMap> {
    if f.source != *t.base() {
        return Err(Error::precondition(
            "map source does not match the forest structure",
        ));
    }
    let report = t.validate();
    if !report.is_valid() {
        return Err(Error::precondition("invalid forest structure"));
    }
    if report.height > k {
        return Err(Error::precondition(format!(
            "forest height {} exceeds the bound {k}",
            report.height
        )));
    }
    if !crate::structure::check_map(f, MapMode::Hom)? {
        return Err(Error::precondition("map is not a homomorphism"));
    }
    let img = f.as_total()?;
    let cover = build_ef(&f.target, k)?;
    let pairs: Vec<(usize, usize)> = (0..t.size())
        .map(|x| {
            let chain = t.ancestor_chain(x).expect("validated acyclic");
            let play: Vec<usize> = chain.iter().map(|&c| img[c]).collect();
            let node = cover.node_of(&play).expect("height <= k");
            (x, node)
        })
        .collect();
    let extended = ElementMap::new(t.base(), cover.structure(), pairs)?;
    debug_assert_eq!(
        check_forest_morphism(&extended, t, cover.forest()),
        Ok(true)
    );
    Ok(extended)
}

/// A claimed coalgebra: a map from carrier elements to plays.
#[derive(Debug, Clone)]
pub struct Coalgebra {
    pub carrier: Structure,
    pub bound: usize,
    pub map: Vec<SequenceElement>,
}

/// Checks the two coalgebra laws: the counit law (each play ends at its
/// element) and prefix closure (the concrete content of the
/// comultiplication law), plus the map being a homomorphism into the cover.
pub fn check_coalgebra(c: &Coalgebra) -> Result<bool> {
    if c.bound == 0 {
        return Err(Error::precondition("coalgebra bound must be >= 1"));
    }
    let n = c.carrier.size();
    if c.map.len() != n {
        return Ok(false);
    }
    for (e, s) in c.map.iter().enumerate() {
        if s.len() > c.bound || s.entries.iter().any(|&x| x >= n) {
            return Ok(false);
        }
        if counit_of(s) != e {
            return Ok(false);
        }
        // every proper prefix must be the image of its own last element
        for j in 1..s.len() {
            let prefix = &s.entries[..j];
            if c.map[s.entries[j - 1]].entries != prefix {
                return Ok(false);
            }
        }
    }
    let cover = build_ef(&c.carrier, c.bound)?;
    for sym in 0..c.carrier.vocabulary().len() {
        for row in c.carrier.table(sym).rows() {
            let mapped: Vec<usize> = row
                .iter()
                .map(|&e| cover.node_of(&c.map[e].entries).expect("bounded play"))
                .collect();
            if !cover.structure().has_tuple(sym, &mapped) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Least k <= max_k admitting a coalgebra, by exhaustive search over forest
/// orders satisfying condition (E); coalgebras correspond exactly to those.
pub fn ef_coalgebra_number(a: &Structure, max_k: usize) -> Result<Option<usize>> {
    if max_k == 0 {
        return Err(Error::precondition("max_k must be >= 1"));
    }
    let mut best = usize::MAX;
    crate::order_search::scan_condition_e_forests(a, |_, _, height| {
        best = best.min(height);
    })?;
    if a.size() > 0 {
        debug_assert!(best != usize::MAX, "a chain order always satisfies (E)");
    }
    let k = if best == usize::MAX { 1 } else { best.max(1) };
    Ok(if k <= max_k { Some(k) } else { None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::tree_depth;
    use crate::structure::{check_map, search_homomorphisms};
    use crate::suites::{all_graphs_upto, clique, edgeless, path_graph};

    fn seq(entries: &[usize]) -> SequenceElement {
        SequenceElement::new(entries.to_vec())
    }

    #[test]
    fn cover_universe_size() {
        let a = edgeless(2);
        let cover = build_ef(&a, 2).unwrap();
        assert_eq!(cover.size(), 6);
    }

    #[test]
    fn lifted_edges_on_directed_edge() {
        // A = {a, b} with E = {(a,b)}; the only lifted pairs at k = 2 are
        // ([a],[a,b]) and ([b,a],[b])
        let mut a = edgeless(2);
        a.add_tuple(0, vec![0, 1]).unwrap();
        let cover = build_ef(&a, 2).unwrap();
        let e = 0;
        let rows = cover.structure().table(e).rows();
        let mut found: Vec<(Vec<usize>, Vec<usize>)> = rows
            .iter()
            .map(|r| {
                (
                    cover.sequence(r[0]).entries.clone(),
                    cover.sequence(r[1]).entries.clone(),
                )
            })
            .collect();
        found.sort();
        assert_eq!(
            found,
            vec![(vec![0], vec![0, 1]), (vec![1, 0], vec![1])]
        );
    }

    #[test]
    fn k1_lifts_only_constant_tuples() {
        let mut a = clique(2);
        a.add_tuple(0, vec![0, 0]).unwrap();
        let cover = build_ef(&a, 1).unwrap();
        let rows = cover.structure().table(0).rows();
        assert_eq!(rows.len(), 1);
        assert_eq!(cover.sequence(rows[0][0]).entries, vec![0]);
        assert_eq!(cover.sequence(rows[0][1]).entries, vec![0]);
    }

    #[test]
    fn counit_and_comultiplication() {
        assert_eq!(counit_of(&seq(&[0, 1, 0])), 0);
        assert_eq!(counit_of(&seq(&[0])), 0);
        assert_eq!(comultiplication_of(&seq(&[0])), vec![seq(&[0])]);
        assert_eq!(
            comultiplication_of(&seq(&[0, 1])),
            vec![seq(&[0]), seq(&[0, 1])]
        );
        // last prefix is the play itself (left counit law)
        let s = seq(&[1, 0, 1]);
        assert_eq!(comultiplication_of(&s).last().unwrap(), &s);
    }

    #[test]
    fn counit_is_a_homomorphism() {
        for a in [clique(2), clique(3), path_graph(3)] {
            for k in 1..=3 {
                let cover = build_ef(&a, k).unwrap();
                let pairs: Vec<(usize, usize)> =
                    (0..cover.size()).map(|i| (i, cover.counit(i))).collect();
                let eps = ElementMap::new(cover.structure(), &a, pairs).unwrap();
                assert_eq!(check_map(&eps, MapMode::Hom), Ok(true));
            }
        }
    }

    #[test]
    fn cokleisli_chain_example() {
        // T = chain x < y with edge {x,y}, embedded into K2
        let chain = ForestStructure::new(clique(2), vec![None, Some(0)]).unwrap();
        let k2 = clique(2);
        let f = ElementMap::new(chain.base(), &k2, vec![(0, 0), (1, 1)]).unwrap();
        let fhat = cokleisli_extend(&f, &chain, 2).unwrap();
        let cover = build_ef(&k2, 2).unwrap();
        assert_eq!(cover.sequence(fhat.pairs[0].1).entries, vec![0]);
        assert_eq!(cover.sequence(fhat.pairs[1].1).entries, vec![0, 1]);
    }

    #[test]
    fn cokleisli_counit_factorization() {
        let chain = ForestStructure::new(edgeless(2), vec![None, Some(0)]).unwrap();
        let b = edgeless(1);
        let f = ElementMap::new(chain.base(), &b, vec![(0, 0), (1, 0)]).unwrap();
        let fhat = cokleisli_extend(&f, &chain, 2).unwrap();
        let cover = build_ef(&b, 2).unwrap();
        for (x, node) in &fhat.pairs {
            assert_eq!(cover.counit(*node), f.pairs[*x].1);
        }
    }

    #[test]
    fn extending_the_counit_gives_the_identity() {
        // couniversality: the counit factors through itself via the identity
        let a = clique(2);
        let cover = build_ef(&a, 2).unwrap();
        let eps = ElementMap::new(
            cover.structure(),
            &a,
            (0..cover.size()).map(|n| (n, cover.counit(n))).collect(),
        )
        .unwrap();
        let extended = cokleisli_extend(&eps, cover.forest(), 2).unwrap();
        for &(node, image) in &extended.pairs {
            assert_eq!(node, image);
        }
    }

    #[test]
    fn cokleisli_height_precondition() {
        let chain3 = ForestStructure::new(edgeless(3), vec![None, Some(0), Some(1)]).unwrap();
        let b = edgeless(1);
        let f = ElementMap::new(chain3.base(), &b, vec![(0, 0), (1, 0), (2, 0)]).unwrap();
        assert!(cokleisli_extend(&f, &chain3, 2).is_err());
        assert!(cokleisli_extend(&f, &chain3, 3).is_ok());
    }

    #[test]
    fn coalgebra_examples() {
        // edgeless {a,b}, k = 1, singleton plays
        let a = edgeless(2);
        let c = Coalgebra {
            carrier: a,
            bound: 1,
            map: vec![seq(&[0]), seq(&[1])],
        };
        assert_eq!(check_coalgebra(&c), Ok(true));

        // K2 at k = 1: the only counit-lawful map is not a homomorphism
        let c = Coalgebra {
            carrier: clique(2),
            bound: 1,
            map: vec![seq(&[0]), seq(&[1])],
        };
        assert_eq!(check_coalgebra(&c), Ok(false));

        // K2 at k = 2 via the chain order
        let c = Coalgebra {
            carrier: clique(2),
            bound: 2,
            map: vec![seq(&[0]), seq(&[0, 1])],
        };
        assert_eq!(check_coalgebra(&c), Ok(true));

        // prefix closure failure
        let c = Coalgebra {
            carrier: edgeless(2),
            bound: 2,
            map: vec![seq(&[0]), seq(&[0, 1])],
        };
        assert_eq!(check_coalgebra(&c), Ok(true));
        let c = Coalgebra {
            carrier: edgeless(2),
            bound: 2,
            map: vec![seq(&[1, 0]), seq(&[1])],
        };
        assert_eq!(check_coalgebra(&c), Ok(true));
        let c = Coalgebra {
            carrier: edgeless(3),
            bound: 2,
            map: vec![seq(&[0]), seq(&[2, 1]), seq(&[2])],
        };
        assert_eq!(check_coalgebra(&c), Ok(true));
        let bad = Coalgebra {
            carrier: edgeless(3),
            bound: 2,
            map: vec![seq(&[0]), seq(&[0, 1]), seq(&[1, 2])],
        };
        // prefix [1] of [1,2] is not the image of element 1
        assert_eq!(check_coalgebra(&bad), Ok(false));
    }

    #[test]
    fn coalgebra_number_examples() {
        assert_eq!(ef_coalgebra_number(&edgeless(3), 3).unwrap(), Some(1));
        assert_eq!(ef_coalgebra_number(&clique(3), 3).unwrap(), Some(3));
        assert_eq!(ef_coalgebra_number(&clique(3), 2).unwrap(), None);
        assert_eq!(ef_coalgebra_number(&path_graph(3), 3).unwrap(), Some(2));
    }

    #[test]
    fn coalgebra_number_matches_tree_depth_small() {
        for g in all_graphs_upto(4) {
            let td = tree_depth(&g).unwrap();
            let cn = ef_coalgebra_number(&g, g.size()).unwrap();
            assert_eq!(cn, Some(td), "failed on {}", g.render());
        }
    }

    #[test]
    fn k1_covers_of_edge_and_nonedge_share_a_code() {
        // singletons are incomparable, so a (loopless) edge never lifts at k=1
        let mut edge = edgeless(2);
        edge.add_tuple(0, vec![0, 1]).unwrap();
        let without = build_ef(&edgeless(2), 1).unwrap();
        let with = build_ef(&edge, 1).unwrap();
        assert_eq!(
            without.forest().canonical_code().unwrap(),
            with.forest().canonical_code().unwrap()
        );
    }

    #[test]
    fn non_idempotence_sizes() {
        let a = edgeless(2);
        let once = build_ef(&a, 2).unwrap();
        assert_eq!(once.size(), 6);
        let twice = build_ef(once.structure(), 2).unwrap();
        assert_eq!(twice.size(), 42);
    }

    #[test]
    fn hom_from_cover_decides_k_colorability_style_questions() {
        // E_2(K3) -> K2 exists even though K3 -> K2 does not
        let cover = build_ef(&clique(3), 2).unwrap();
        let homs = search_homomorphisms(cover.structure(), &clique(2), Some(1)).unwrap();
        assert_eq!(homs.len(), 1);
    }
}
