//! The pebbling comonad: finite truncations of the (in general infinite)
//! cover over move sequences, and the pebble coalgebra number.
//!
//! Truncated covers exist for law tests and inspection; homomorphism
//! questions against the full cover are decided by the pebble-game fixpoint
//! in `games`, never by materialization.

use std::collections::HashMap;

use crate::ef::universe_limit;
use crate::error::{Error, Result};
use crate::forest::ForestStructure;
use crate::structure::Structure;

/// A nonempty sequence of moves (pebble index, element); indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PebbleSequence {
    pub moves: Vec<(usize, usize)>,
}

impl PebbleSequence {
    pub fn new(moves: Vec<(usize, usize)>) -> Self {
        assert!(!moves.is_empty(), "move sequences are nonempty");
        PebbleSequence { moves }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last_pebble(&self) -> usize {
        self.moves.last().expect("nonempty").0
    }

    pub fn last_element(&self) -> usize {
        self.moves.last().expect("nonempty").1
    }
}

/// The cover P_k A truncated to plays of length <= n. Verdicts read off a
/// truncation are sound only as Spoiler-win certificates; the untruncated
/// object is infinite.
#[derive(Debug, Clone)]
pub struct PebbleCover {
    forest: ForestStructure,
    original: Structure,
    pebbles: usize,
    truncation: usize,
    sequences: Vec<PebbleSequence>,
}

impl PebbleCover {
    pub fn forest(&self) -> &ForestStructure {
        &self.forest
    }

    pub fn structure(&self) -> &Structure {
        self.forest.base()
    }

    pub fn original(&self) -> &Structure {
        &self.original
    }

    pub fn pebbles(&self) -> usize {
        self.pebbles
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn size(&self) -> usize {
        self.sequences.len()
    }

    pub fn sequence(&self, node: usize) -> &PebbleSequence {
        &self.sequences[node]
    }

    pub fn counit(&self, node: usize) -> usize {
        self.sequences[node].last_element()
    }
}

fn move_name(moves: &[(usize, usize)]) -> String {
    let mut name = String::from("m");
    for (i, (p, e)) in moves.iter().enumerate() {
        if i > 0 {
            name.push('_');
        }
        name.push_str(&format!("{p}_{e}"));
    }
    name
}

/// Builds the truncation of P_k A to plays of length <= n. Relations lift by
/// the same comparability-and-counit rule as the EF cover, with the extra
/// condition that for comparable plays s < t the pebble placed last in s is
/// not moved again within the suffix of s in t.
pub fn build_pebble_truncated(a: &Structure, k: usize, n: usize) -> Result<PebbleCover> {
    if k == 0 || n == 0 {
        return Err(Error::precondition(
            "pebble count and truncation depth must be >= 1",
        ));
    }
    let moves_per_step = k.saturating_mul(a.size());
    let mut total: usize = 0;
    let mut level: usize = 1;
    for _ in 0..n {
        level = level.saturating_mul(moves_per_step);
        total = total.saturating_add(level);
        if total > universe_limit() {
            return Err(Error::precondition(format!(
                "cover would exceed the node budget ({}); raise GC_MAX_UNIVERSE to override",
                universe_limit()
            )));
        }
    }

    let mut sequences: Vec<PebbleSequence> = Vec::with_capacity(total);
    let mut index: HashMap<Vec<(usize, usize)>, usize> = HashMap::with_capacity(total);
    let mut frontier: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for stem in &frontier {
            for p in 1..=k {
                for e in 0..a.size() {
                    let mut seq = stem.clone();
                    seq.push((p, e));
                    index.insert(seq.clone(), sequences.len());
                    sequences.push(PebbleSequence::new(seq.clone()));
                    next.push(seq);
                }
            }
        }
        frontier = next;
    }

    let mut base = Structure::new(a.vocabulary().clone());
    for s in &sequences {
        base.add_element(&move_name(&s.moves))?;
    }
    let parent: Vec<Option<usize>> = sequences
        .iter()
        .map(|s| {
            if s.len() == 1 {
                None
            } else {
                Some(index[&s.moves[..s.len() - 1]])
            }
        })
        .collect();

    for s in sequences.iter() {
        let chain: Vec<usize> = (1..=s.len()).map(|i| index[&s.moves[..i]]).collect();
        for sym in 0..a.vocabulary().len() {
            let arity = a.vocabulary().arity(sym);
            let mut pick = vec![0usize; arity];
            loop {
                if pick.iter().any(|&p| p == chain.len() - 1)
                    && suffix_condition(s, &pick)
                {
                    let tuple: Vec<usize> = pick.iter().map(|&p| chain[p]).collect();
                    let ends: Vec<usize> = pick
                        .iter()
                        .map(|&p| s.moves[p].1)
                        .collect();
                    if a.has_tuple(sym, &ends) {
                        base.add_tuple(sym, tuple)?;
                    }
                }
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
    }

    let pebbling: Vec<usize> = sequences.iter().map(|s| s.last_pebble()).collect();
    let forest = ForestStructure::with_pebbling(base, parent, pebbling, k)?;
    debug_assert!(forest.validate().is_valid());
    Ok(PebbleCover {
        forest,
        original: a.clone(),
        pebbles: k,
        truncation: n,
        sequences,
    })
}

/// The extra lifting condition, per comparable pair in the tuple: writing
/// the shorter prefix s and the longer t, the pebble of s's last move must
/// not occur among the moves of t after s.
fn suffix_condition(s: &PebbleSequence, pick: &[usize]) -> bool {
    for (i, &pi) in pick.iter().enumerate() {
        for &pj in &pick[i + 1..] {
            let (lo, hi) = (pi.min(pj), pi.max(pj));
            if lo == hi {
                continue;
            }
            let last_pebble = s.moves[lo].0;
            if s.moves[lo + 1..=hi].iter().any(|&(p, _)| p == last_pebble) {
                return false;
            }
        }
    }
    true
}

/// Least k <= max_k such that the structure carries a k-pebble forest order:
/// a condition-(E) forest order together with a pebbling satisfying (P).
/// For a fixed order, a valid k-pebbling is exactly a k-coloring of the
/// conflict graph that (P) induces, so the search scans orders and takes the
/// best chromatic number.
pub fn pebble_coalgebra_number(a: &Structure, max_k: usize) -> Result<Option<usize>> {
    if max_k == 0 {
        return Err(Error::precondition("max_k must be >= 1"));
    }
    let n = a.size();
    if n == 0 {
        return Ok(Some(1));
    }
    let mut best = usize::MAX;
    crate::order_search::scan_condition_e_forests(a, |parent, depth, _| {
        let conflicts = conflict_edges(a, parent, depth);
        let chi = chromatic_number(n, &conflicts).max(1);
        best = best.min(chi);
    })?;
    debug_assert!(best != usize::MAX);
    Ok(if best <= max_k { Some(best) } else { None })
}

/// Condition (P) as binary constraints: for Gaifman-adjacent a < b, the
/// pebble of a must differ from every pebble on the half-open chain (a, b].
fn conflict_edges(a: &Structure, parent: &[Option<usize>], depth: &[usize]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for (u, v) in a.gaifman_graph().edges() {
        for (lo, hi) in [(u, v), (v, u)] {
            if depth[lo] < depth[hi] {
                // confirm lo is an ancestor of hi, then walk (lo, hi]
                let mut cur = hi;
                let mut seen = Vec::new();
                while depth[cur] > depth[lo] {
                    seen.push(cur);
                    cur = parent[cur].expect("deeper node has a parent");
                }
                if cur == lo {
                    for x in seen {
                        let e = (lo.min(x), lo.max(x));
                        if !edges.contains(&e) {
                            edges.push(e);
                        }
                    }
                }
            }
        }
    }
    edges
}

fn chromatic_number(n: usize, edges: &[(usize, usize)]) -> usize {
    if n == 0 {
        return 0;
    }
    let mut adj = vec![0u64; n];
    for &(u, v) in edges {
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    for colors in 1..=n {
        let mut assignment = vec![0usize; n];
        if color_search(&adj, &mut assignment, 0, colors) {
            return colors;
        }
    }
    n
}

fn color_search(adj: &[u64], assignment: &mut [usize], v: usize, colors: usize) -> bool {
    if v == adj.len() {
        return true;
    }
    let used_by_earlier = assignment[..v]
        .iter()
        .enumerate()
        .filter(|&(u, _)| adj[v] & (1 << u) != 0)
        .map(|(_, &c)| c)
        .collect::<Vec<_>>();
    // symmetry break: only allow one fresh color beyond those used so far
    let max_so_far = assignment[..v].iter().copied().max().unwrap_or(0);
    for c in 1..=colors.min(max_so_far + 1) {
        if used_by_earlier.contains(&c) {
            continue;
        }
        assignment[v] = c;
        if color_search(adj, assignment, v + 1, colors) {
            return true;
        }
    }
    assignment[v] = 0;
    false
}
