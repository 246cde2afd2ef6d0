//! Exhaustive scan over forest orders on a structure's universe, filtered to
//! those satisfying condition (E). Both coalgebra-number searches run on top
//! of this; it is deliberately independent of the tree-depth/treewidth
//! recursions it is checked against.

use crate::error::{Error, Result};
use crate::structure::Structure;

pub(crate) const MAX_SCAN_SIZE: usize = 7;

/// Calls `visit(parent, depth, height)` for every forest order on the
/// universe whose order satisfies condition (E) for the Gaifman graph.
pub(crate) fn scan_condition_e_forests(
    a: &Structure,
    mut visit: impl FnMut(&[Option<usize>], &[usize], usize),
) -> Result<()> {
    let n = a.size();
    if n == 0 {
        return Ok(());
    }
    if n > MAX_SCAN_SIZE {
        return Err(Error::precondition(format!(
            "forest-order search is only run for universes of size <= {MAX_SCAN_SIZE}"
        )));
    }
    let edges: Vec<(usize, usize)> = a.gaifman_graph().edges().collect();
    // digit d for element i: 0 = root, otherwise parent is d-1, skipping i
    let mut digits = vec![0usize; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut depth = vec![0usize; n];
    loop {
        for i in 0..n {
            parent[i] = decode_parent(i, digits[i]);
        }
        if let Some(height) = stats_if_valid(&parent, &edges, &mut depth) {
            visit(&parent, &depth, height);
        }
        let mut i = 0;
        loop {
            if i == n {
                return Ok(());
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

fn decode_parent(elem: usize, digit: usize) -> Option<usize> {
    if digit == 0 {
        None
    } else {
        let p = digit - 1;
        Some(if p >= elem { p + 1 } else { p })
    }
}

/// Depths (1-based) and height when the parent map is acyclic and satisfies
/// condition (E); `None` otherwise.
fn stats_if_valid(
    parent: &[Option<usize>],
    edges: &[(usize, usize)],
    depth: &mut [usize],
) -> Option<usize> {
    let n = parent.len();
    depth.iter_mut().for_each(|d| *d = 0);
    let mut height = 0usize;
    #[allow(clippy::needless_range_loop)]
    for e in 0..n {
        if depth[e] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = e;
        let base = loop {
            if depth[cur] != 0 {
                break depth[cur];
            }
            path.push(cur);
            match parent[cur] {
                None => break 0,
                Some(p) => {
                    if path.contains(&p) {
                        return None; // cycle
                    }
                    cur = p;
                }
            }
        };
        for (i, &x) in path.iter().enumerate() {
            depth[x] = base + (path.len() - i);
        }
        height = height.max(depth[path[0]]);
    }
    for &(u, v) in edges {
        let (mut x, mut y) = (u, v);
        while depth[x] > depth[y] {
            x = parent[x].expect("deeper node has a parent");
        }
        while depth[y] > depth[x] {
            y = parent[y].expect("deeper node has a parent");
        }
        if x != y {
            return None; // adjacent but incomparable
        }
    }
    Some(height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suites::{clique, edgeless};

    #[test]
    fn counts_forests_on_edgeless_universe() {
        // rooted forests on 3 labelled nodes: 16
        let mut count = 0;
        scan_condition_e_forests(&edgeless(3), |_, _, _| count += 1).unwrap();
        assert_eq!(count, 16);
    }

    #[test]
    fn clique_forces_chains() {
        // on K3 only total orders survive condition (E): 3! chains
        let mut count = 0;
        let mut heights = Vec::new();
        scan_condition_e_forests(&clique(3), |_, _, h| {
            count += 1;
            heights.push(h);
        })
        .unwrap();
        assert_eq!(count, 6);
        assert!(heights.iter().all(|&h| h == 3));
    }
}
