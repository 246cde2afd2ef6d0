//! Exact combinatorial parameters, computed on the Gaifman graph. These are
//! the independent oracles the coalgebra-number searches are checked against.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::structure::{Graph, Structure};

const MAX_PARAM_SIZE: usize = 16;

/// Minimum height over all forest orders satisfying condition (E):
/// recursively, 1 + the best vertex deletion on each connected component.
pub fn tree_depth(a: &Structure) -> Result<usize> {
    if a.size() == 0 {
        return Err(Error::precondition(
            "tree-depth requires a nonempty universe",
        ));
    }
    if a.size() > MAX_PARAM_SIZE {
        return Err(Error::precondition(format!(
            "tree-depth is only computed for universes of size <= {MAX_PARAM_SIZE}"
        )));
    }
    let g = a.gaifman_graph();
    let adj = adjacency_masks(&g);
    let full = if g.size() == 64 {
        u64::MAX
    } else {
        (1u64 << g.size()) - 1
    };
    let mut memo = HashMap::new();
    Ok(td_of_subset(&adj, full, &mut memo))
}

fn adjacency_masks(g: &Graph) -> Vec<u64> {
    let mut adj = vec![0u64; g.size()];
    for (u, v) in g.edges() {
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    adj
}

fn td_of_subset(adj: &[u64], subset: u64, memo: &mut HashMap<u64, usize>) -> usize {
    if subset == 0 {
        return 0;
    }
    if let Some(&v) = memo.get(&subset) {
        return v;
    }
    let components = split_components(adj, subset);
    let result = if components.len() > 1 {
        components
            .into_iter()
            .map(|c| td_of_subset(adj, c, memo))
            .max()
            .unwrap()
    } else if subset.count_ones() == 1 {
        1
    } else {
        let mut best = usize::MAX;
        let mut rest = subset;
        while rest != 0 {
            let v = rest.trailing_zeros() as u64;
            rest &= rest - 1;
            let sub = td_of_subset(adj, subset & !(1 << v), memo);
            best = best.min(1 + sub);
        }
        best
    };
    memo.insert(subset, result);
    result
}

fn split_components(adj: &[u64], subset: u64) -> Vec<u64> {
    let mut components = Vec::new();
    let mut remaining = subset;
    while remaining != 0 {
        let seed = remaining.trailing_zeros() as usize;
        let mut comp = 1u64 << seed;
        loop {
            let mut grown = comp;
            let mut cur = comp;
            while cur != 0 {
                let v = cur.trailing_zeros() as usize;
                cur &= cur - 1;
                grown |= adj[v] & subset;
            }
            if grown == comp {
                break;
            }
            comp = grown;
        }
        components.push(comp);
        remaining &= !comp;
    }
    components
}

/// Exact treewidth of the Gaifman graph via exhaustive elimination-order
/// search with branch-and-bound on the best width found so far.
pub fn treewidth(a: &Structure) -> Result<usize> {
    if a.size() == 0 {
        return Err(Error::precondition(
            "treewidth requires a nonempty universe",
        ));
    }
    if a.size() > 9 {
        return Err(Error::precondition(
            "treewidth is only computed for universes of size <= 9",
        ));
    }
    let g = a.gaifman_graph();
    let n = g.size();
    let adj = adjacency_masks(&g);
    let mut best = n.saturating_sub(1);
    let remaining = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    eliminate(&adj.to_vec(), remaining, 0, &mut best);
    Ok(best)
}

fn eliminate(adj: &[u64], remaining: u64, width_so_far: usize, best: &mut usize) {
    if width_so_far >= *best {
        return; // cannot improve
    }
    if remaining == 0 {
        *best = width_so_far;
        return;
    }
    let mut cand = remaining;
    while cand != 0 {
        let v = cand.trailing_zeros() as usize;
        cand &= cand - 1;
        let back = adj[v] & remaining & !(1 << v);
        let degree = back.count_ones() as usize;
        if degree.max(width_so_far) >= *best {
            continue;
        }
        // eliminating v turns its remaining neighborhood into a clique
        let mut new_adj = adj.to_vec();
        let mut nb = back;
        while nb != 0 {
            let u = nb.trailing_zeros() as usize;
            nb &= nb - 1;
            new_adj[u] |= back & !(1 << u);
        }
        eliminate(
            &new_adj,
            remaining & !(1 << v),
            width_so_far.max(degree),
            best,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suites::{clique, cycle_graph, edgeless, path_graph};

    #[test]
    fn tree_depth_examples() {
        assert_eq!(tree_depth(&edgeless(3)).unwrap(), 1);
        assert_eq!(tree_depth(&clique(3)).unwrap(), 3);
        assert_eq!(tree_depth(&clique(5)).unwrap(), 5);
        assert_eq!(tree_depth(&path_graph(3)).unwrap(), 2);
        assert_eq!(tree_depth(&path_graph(4)).unwrap(), 3);
        assert!(tree_depth(&edgeless(0)).is_err());
    }

    #[test]
    fn treewidth_examples() {
        assert_eq!(treewidth(&edgeless(4)).unwrap(), 0);
        assert_eq!(treewidth(&path_graph(5)).unwrap(), 1);
        assert_eq!(treewidth(&cycle_graph(4)).unwrap(), 2);
        assert_eq!(treewidth(&clique(4)).unwrap(), 3);
        assert!(treewidth(&edgeless(0)).is_err());
    }

    #[test]
    fn tree_depth_disconnected_is_max_over_components() {
        let two_triangles = clique(3).disjoint_union(&clique(3)).unwrap();
        assert_eq!(tree_depth(&two_triangles).unwrap(), 3);
        let mixed = clique(2).disjoint_union(&edgeless(1)).unwrap();
        assert_eq!(tree_depth(&mixed).unwrap(), 2);
    }

    #[test]
    #[allow(clippy::int_plus_one)]
    fn td_at_least_tw_plus_one() {
        for g in crate::suites::all_graphs_upto(5) {
            let td = tree_depth(&g).unwrap();
            let tw = treewidth(&g).unwrap();
            assert!(td >= tw + 1, "failed on {}", g.render());
        }
    }
}
