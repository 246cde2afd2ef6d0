//! Homomorphism-count profiles and distinguishability tests over generated
//! families of test structures.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::tree_depth;
use crate::structure::{count_homomorphisms, CanonicalKey, Structure, Vocabulary};

/// All nonempty structures over the vocabulary with at most `max_size`
/// elements, one per isomorphism class, in canonical generation order
/// (smaller first, denser tuple sets before sparser ones). Families are
/// cached per vocabulary and bound; repeated tests over the same family pay
/// the enumeration cost once.
pub fn enumerate_structures(vocab: &Vocabulary, max_size: usize) -> Result<Vec<Structure>> {
    use std::sync::{Arc, Mutex, OnceLock};
    type FamilyCache = Mutex<std::collections::HashMap<(String, usize), Arc<Vec<Structure>>>>;
    static CACHE: OnceLock<FamilyCache> = OnceLock::new();
    let vocab_key = vocab
        .symbols()
        .iter()
        .map(|(n, a)| format!("{n}/{a}"))
        .collect::<Vec<_>>()
        .join(",");
    let cache = CACHE.get_or_init(|| Mutex::new(std::collections::HashMap::new()));
    if let Some(found) = cache.lock().unwrap().get(&(vocab_key.clone(), max_size)) {
        return Ok(found.as_ref().clone());
    }
    let family = Arc::new(enumerate_structures_uncached(vocab, max_size)?);
    cache
        .lock()
        .unwrap()
        .insert((vocab_key, max_size), family.clone());
    Ok(family.as_ref().clone())
}

fn enumerate_structures_uncached(vocab: &Vocabulary, max_size: usize) -> Result<Vec<Structure>> {
    let mut keys: Vec<CanonicalKey> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for n in 1..=max_size {
        let slots: Vec<(usize, Vec<usize>)> = tuple_slots(vocab, n);
        if slots.len() >= 22 {
            return Err(Error::precondition(format!(
                "enumerating structures over {} tuple slots is not desk-scale",
                slots.len()
            )));
        }
        for mask in 0..(1u64 << slots.len()) {
            let mut s = empty_structure(vocab, n);
            for (i, (sym, row)) in slots.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    s.add_tuple(*sym, row.clone())?;
                }
            }
            let key = s.canonical_key()?;
            if seen.insert(key.clone()) {
                keys.push(key);
            }
        }
    }
    keys.sort();
    Ok(keys.iter().map(|k| structure_from_key(vocab, k)).collect())
}

fn tuple_slots(vocab: &Vocabulary, n: usize) -> Vec<(usize, Vec<usize>)> {
    let mut slots = Vec::new();
    for sym in 0..vocab.len() {
        let arity = vocab.arity(sym);
        let mut pick = vec![0usize; arity];
        loop {
            slots.push((sym, pick.clone()));
            let mut i = 0;
            loop {
                if i == arity {
                    break;
                }
                pick[i] += 1;
                if pick[i] < n {
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
    slots
}

fn empty_structure(vocab: &Vocabulary, n: usize) -> Structure {
    let mut s = Structure::new(vocab.clone());
    for i in 0..n {
        s.add_element(&format!("x{i}")).expect("fresh element");
    }
    s
}

/// Rebuilds the canonical representative of an isomorphism class.
pub fn structure_from_key(vocab: &Vocabulary, key: &CanonicalKey) -> Structure {
    let mut s = empty_structure(vocab, key.size);
    for (sym, row) in &key.tuples {
        s.add_tuple(*sym, row.clone()).expect("key tuple");
    }
    if let Some(p) = key.point {
        s.set_point(p).expect("key point");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LovaszVerdict {
    Indistinguishable,
    Distinguished {
        witness: Structure,
        counts: (u64, u64),
    },
}

/// Compares homomorphism counts from every structure with <= max_size
/// elements; returns the first family member with differing counts.
pub fn lovasz_test(a: &Structure, b: &Structure, max_size: usize) -> Result<LovaszVerdict> {
    if a.vocabulary() != b.vocabulary() {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    for c in enumerate_structures(a.vocabulary(), max_size)? {
        let ca = count_homomorphisms(&c, a)?;
        let cb = count_homomorphisms(&c, b)?;
        if ca != cb {
            return Ok(LovaszVerdict::Distinguished {
                witness: c,
                counts: (ca, cb),
            });
        }
    }
    Ok(LovaszVerdict::Indistinguishable)
}

/// A homomorphism-count profile over a deterministic test family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomProfile {
    pub entries: Vec<(Structure, u64)>,
}

/// Profile over all test structures with <= max_size elements and
/// tree-depth <= k. Counts for distinct members are computed in parallel;
/// the profile order is the canonical generation order.
pub fn bounded_td_profile(a: &Structure, k: usize, max_size: usize) -> Result<HomProfile> {
    if k == 0 || max_size == 0 {
        return Err(Error::precondition("bounds must be >= 1"));
    }
    let mut family = Vec::new();
    for c in enumerate_structures(a.vocabulary(), max_size)? {
        if tree_depth(&c)? <= k {
            family.push(c);
        }
    }
    let entries = family
        .into_par_iter()
        .map(|c| {
            let count = count_homomorphisms(&c, a)?;
            Ok((c, count))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HomProfile { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::is_isomorphic;
    use crate::suites::{clique, cycle_graph, edgeless, graph_vocab};

    #[test]
    fn enumeration_is_deduped_and_ordered() {
        let family = enumerate_structures(&graph_vocab(), 2).unwrap();
        assert_eq!(family.len(), 12); // 2 on one element + 10 on two
        // denser before sparser within a size
        let sizes: Vec<(usize, usize)> = family
            .iter()
            .map(|s| (s.size(), s.tuple_count()))
            .collect();
        for w in sizes.windows(2) {
            let ((n1, t1), (n2, t2)) = (w[0], w[1]);
            assert!(n1 < n2 || (n1 == n2 && t1 >= t2));
        }
    }

    #[test]
    fn lovasz_examples() {
        let k2 = clique(2);
        assert_eq!(
            lovasz_test(&k2, &k2, 2).unwrap(),
            LovaszVerdict::Indistinguishable
        );
        match lovasz_test(&k2, &edgeless(2), 2).unwrap() {
            LovaszVerdict::Distinguished { witness, counts } => {
                assert!(is_isomorphic(&witness, &k2).unwrap().is_some());
                assert_eq!(counts, (2, 0));
            }
            v => panic!("expected distinction, got {v:?}"),
        }
    }

    #[test]
    fn triangles_vs_hexagon_distinguished_by_k3() {
        let two_triangles = clique(3).disjoint_union(&clique(3)).unwrap();
        let hexagon = cycle_graph(6);
        match lovasz_test(&two_triangles, &hexagon, 3).unwrap() {
            LovaszVerdict::Distinguished { witness, counts } => {
                assert!(is_isomorphic(&witness, &clique(3)).unwrap().is_some());
                assert_eq!(counts, (12, 0));
            }
            v => panic!("expected distinction, got {v:?}"),
        }
    }

    #[test]
    fn td1_profile_entries_are_products_of_pointwise_counts() {
        // tree-depth 1 means an edgeless Gaifman graph: only constant tuples
        let a = clique(3);
        let profile = bounded_td_profile(&a, 1, 2).unwrap();
        for (c, count) in &profile.entries {
            assert_eq!(tree_depth(c).unwrap(), 1);
            assert!(c.gaifman_graph().edge_count() == 0);
            let mut product = 1u64;
            for e in 0..c.size() {
                let has_loop = c.has_tuple(0, &[e, e]);
                let matches = (0..a.size())
                    .filter(|&x| !has_loop || a.has_tuple(0, &[x, x]))
                    .count() as u64;
                product *= matches;
            }
            assert_eq!(*count, product, "on {}", c.render());
        }
    }

    #[test]
    fn profiles_of_isomorphic_structures_are_equal() {
        let a = Structure::parse("rel E 2\nelem u\nelem v\ntuple E u v").unwrap();
        let b = Structure::parse("rel E 2\nelem p\nelem q\ntuple E q p").unwrap();
        let pa = bounded_td_profile(&a, 2, 2).unwrap();
        let pb = bounded_td_profile(&b, 2, 2).unwrap();
        let counts_a: Vec<u64> = pa.entries.iter().map(|(_, c)| *c).collect();
        let counts_b: Vec<u64> = pb.entries.iter().map(|(_, c)| *c).collect();
        assert_eq!(counts_a, counts_b);
    }
}
