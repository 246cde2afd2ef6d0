//! The modal comonad on pointed Kripke structures: bounded unravelling,
//! idempotence, and graded equivalence via canonical tree codes.
//!
//! Depth counts nodes: "depth k" means walks of at most k states, matching
//! the sequence-length convention of the other covers. Walks of k states
//! take k-1 transition steps, so depth-k unravellings capture modal formulas
//! of modal depth k-1.

use crate::ef::universe_limit;
use crate::error::{Error, Result};
use crate::forest::{ForestCode, ForestStructure};
use crate::structure::Structure;

/// A Kripke structure is a structure whose symbols have arity <= 2 (unary =
/// propositions, binary = transition relations) with a distinguished point.
pub fn check_kripke(k: &Structure) -> Result<()> {
    if k.point().is_none() {
        return Err(Error::precondition(
            "Kripke structures need a distinguished point",
        ));
    }
    for (name, arity) in k.vocabulary().symbols() {
        if *arity > 2 {
            return Err(Error::precondition(format!(
                "Kripke structures allow arity <= 2, but `{name}` has arity {arity}"
            )));
        }
    }
    Ok(())
}

/// A transition-labelled walk from the point: a start state and a list of
/// (relation, state) steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Walk {
    pub start: usize,
    pub steps: Vec<(usize, usize)>,
}

impl Walk {
    pub fn endpoint(&self) -> usize {
        self.steps.last().map(|&(_, s)| s).unwrap_or(self.start)
    }

    pub fn node_count(&self) -> usize {
        self.steps.len() + 1
    }
}

/// The depth-k unravelling: a tree over the walks of at most k states.
#[derive(Debug, Clone)]
pub struct Unravelling {
    forest: ForestStructure,
    walks: Vec<Walk>,
}

impl Unravelling {
    pub fn forest(&self) -> &ForestStructure {
        &self.forest
    }

    /// The underlying pointed structure (pointed at the root walk), which is
    /// itself a Kripke structure over the same vocabulary.
    pub fn structure(&self) -> &Structure {
        self.forest.base()
    }

    pub fn size(&self) -> usize {
        self.walks.len()
    }

    pub fn walk(&self, node: usize) -> &Walk {
        &self.walks[node]
    }
}

fn walk_name(w: &Walk) -> String {
    let mut name = format!("w{}", w.start);
    for (r, s) in &w.steps {
        name.push_str(&format!("_{r}_{s}"));
    }
    name
}

/// Unravels a Kripke structure from its point to walks of <= depth states.
/// Transitions hold exactly between a walk and its one-step extensions;
/// propositions hold of a walk iff they hold of its endpoint.
pub fn unravel(k: &Structure, depth: usize) -> Result<Unravelling> {
    check_kripke(k)?;
    if depth == 0 {
        return Err(Error::precondition("unravelling depth must be >= 1"));
    }
    let point = k.point().expect("checked");
    let transition_syms: Vec<usize> = (0..k.vocabulary().len())
        .filter(|&s| k.vocabulary().arity(s) == 2)
        .collect();
    let prop_syms: Vec<usize> = (0..k.vocabulary().len())
        .filter(|&s| k.vocabulary().arity(s) == 1)
        .collect();

    let mut walks: Vec<Walk> = vec![Walk {
        start: point,
        steps: Vec::new(),
    }];
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut level: Vec<usize> = vec![0];
    for _ in 1..depth {
        let mut next_level = Vec::new();
        for &node in &level {
            let end = walks[node].endpoint();
            for &rel in &transition_syms {
                for target in 0..k.size() {
                    if !k.has_tuple(rel, &[end, target]) {
                        continue;
                    }
                    let mut w = walks[node].clone();
                    w.steps.push((rel, target));
                    let id = walks.len();
                    walks.push(w);
                    parent.push(Some(node));
                    next_level.push(id);
                    if walks.len() > universe_limit() {
                        return Err(Error::precondition(format!(
                            "unravelling would exceed the node budget ({}); raise GC_MAX_UNIVERSE to override",
                            universe_limit()
                        )));
                    }
                }
            }
        }
        level = next_level;
    }

    let mut base = Structure::new(k.vocabulary().clone());
    for w in &walks {
        base.add_element(&walk_name(w))?;
    }
    base.set_point(0)?;
    for (node, w) in walks.iter().enumerate() {
        for &p in &prop_syms {
            if k.has_tuple(p, &[w.endpoint()]) {
                base.add_tuple(p, vec![node])?;
            }
        }
        if let Some(par) = parent[node] {
            let (rel, _) = *w.steps.last().expect("non-root walk has a step");
            base.add_tuple(rel, vec![par, node])?;
        }
    }
    let forest = ForestStructure::new(base, parent)?;
    debug_assert!(forest.validate().is_valid());
    Ok(Unravelling { forest, walks })
}

/// Unravelling twice changes nothing: the re-unravelled tree has the same
/// canonical code.
pub fn check_modal_idempotence(k: &Structure, depth: usize) -> Result<bool> {
    let once = unravel(k, depth)?;
    let twice = unravel(once.structure(), depth)?;
    Ok(once.forest().canonical_code()? == twice.forest().canonical_code()?)
}

/// Graded (counting) equivalence at the given depth: isomorphism of the two
/// unravellings, decided by canonical code equality. Captures graded modal
/// formulas of modal depth <= depth-1.
pub fn graded_equivalence(k1: &Structure, k2: &Structure, depth: usize) -> Result<bool> {
    if k1.vocabulary() != k2.vocabulary() {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    let u1 = unravel(k1, depth)?;
    let u2 = unravel(k2, depth)?;
    Ok(u1.forest().canonical_code()? == u2.forest().canonical_code()?)
}

/// Canonical code of the depth-k unravelling; exposed for callers that want
/// to bucket structures by graded equivalence class.
pub fn unravelling_code(k: &Structure, depth: usize) -> Result<ForestCode> {
    unravel(k, depth)?.forest().canonical_code()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suites::{kripke_vocab, pointed_kripke as kripke};

    #[test]
    fn self_loop_unravels_to_chain() {
        let k = kripke(1, &[], &[(0, 0)], 0);
        let u = unravel(&k, 2).unwrap();
        assert_eq!(u.size(), 2);
        assert!(u.structure().has_tuple(1, &[0, 1]));
        assert_eq!(u.forest().parent(1), Some(0));
    }

    #[test]
    fn branching_unravelling() {
        // a -> b, a -> c with b, c dead ends
        let k = kripke(3, &[], &[(0, 1), (0, 2)], 0);
        let u = unravel(&k, 2).unwrap();
        assert_eq!(u.size(), 3);
        assert_eq!(u.forest().children(0).len(), 2);
    }

    #[test]
    fn unravellings_validate() {
        for trans in [vec![(0, 0)], vec![(0, 1), (1, 0)], vec![(0, 1), (1, 2), (2, 0)]] {
            let k = kripke(3, &[1], &trans, 0);
            for depth in 1..=3 {
                let u = unravel(&k, depth).unwrap();
                assert!(u.forest().validate().is_valid());
            }
        }
    }

    #[test]
    fn idempotence_examples() {
        let loop1 = kripke(1, &[], &[(0, 0)], 0);
        assert_eq!(check_modal_idempotence(&loop1, 2), Ok(true));
        let two_cycle = kripke(2, &[0], &[(0, 1), (1, 0)], 0);
        for depth in 1..=3 {
            assert_eq!(check_modal_idempotence(&two_cycle, depth), Ok(true));
        }
    }

    #[test]
    fn tree_unravels_to_itself() {
        // already a depth-2 tree from the point
        let k = kripke(3, &[2], &[(0, 1), (0, 2)], 0);
        let u = unravel(&k, 2).unwrap();
        let iso = crate::structure::is_isomorphic(u.structure(), &{
            let mut k2 = k.clone();
            k2.set_point(0).unwrap();
            k2
        })
        .unwrap();
        assert!(iso.is_some());
    }

    #[test]
    fn graded_equivalence_examples() {
        let k = kripke(2, &[], &[(0, 1)], 0);
        assert_eq!(graded_equivalence(&k, &k, 2), Ok(true));

        // two successors vs one: diamond counting differs at depth 2
        let two = kripke(3, &[], &[(0, 1), (0, 2)], 0);
        let one = kripke(2, &[], &[(0, 1)], 0);
        assert_eq!(graded_equivalence(&two, &one, 2), Ok(false));
        assert_eq!(graded_equivalence(&two, &one, 1), Ok(true));

        // self-loop vs 2-cycle: both deterministic, so codes agree
        let loop1 = kripke(1, &[], &[(0, 0)], 0);
        let cyc2 = kripke(2, &[], &[(0, 1), (1, 0)], 0);
        assert_eq!(graded_equivalence(&loop1, &cyc2, 3), Ok(true));
    }

    #[test]
    fn rejects_bad_kripke() {
        let mut k = Structure::new(crate::structure::Vocabulary::new(&[("R", 3)]).unwrap());
        k.add_element("a").unwrap();
        k.set_point(0).unwrap();
        assert!(check_kripke(&k).is_err());
        let mut no_point = Structure::new(kripke_vocab());
        no_point.add_element("a").unwrap();
        assert!(check_kripke(&no_point).is_err());
    }
}
