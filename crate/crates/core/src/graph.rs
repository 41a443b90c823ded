//! Dependency ordering shared by statements, scheduling and the narrative.
//!
//! Nodes are indices `0..n`; `deps[i]` lists the nodes that must come before
//! `i`. Ties are broken by the smallest index, which yields the
//! lexicographically least topological order and therefore keeps an already
//! valid order unchanged.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Stable topological order, or one witnessed cycle (as node indices, in
/// dependency order, first node not repeated) when the relation is cyclic.
pub fn stable_topological_order(deps: &[Vec<usize>]) -> Result<Vec<usize>, Vec<usize>> {
    let n = deps.len();
    let mut indegree = vec![0usize; n];
    let mut dependents = vec![Vec::new(); n];
    for (node, ds) in deps.iter().enumerate() {
        for &d in ds {
            indegree[node] += 1;
            dependents[d].push(node);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(node)) = ready.pop() {
        order.push(node);
        for &next in &dependents[node] {
            indegree[next] -= 1;
            if indegree[next] == 0 {
                ready.push(Reverse(next));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err(find_cycle(deps).expect("unsorted nodes imply a cycle"))
    }
}

/// Finds one cycle by depth-first search, returning its nodes in the order
/// `a -> b -> ... -> a` (following dependency edges).
pub fn find_cycle(deps: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let n = deps.len();
    let mut mark = vec![Mark::White; n];
    for start in 0..n {
        if mark[start] != Mark::White {
            continue;
        }
        // (node, next edge index)
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        mark[start] = Mark::Grey;
        while let Some(&mut (node, ref mut edge)) = stack.last_mut() {
            if *edge < deps[node].len() {
                let next = deps[node][*edge];
                *edge += 1;
                match mark[next] {
                    Mark::White => {
                        mark[next] = Mark::Grey;
                        stack.push((next, 0));
                    }
                    Mark::Grey => {
                        let pos = stack.iter().position(|&(v, _)| v == next).unwrap();
                        return Some(stack[pos..].iter().map(|&(v, _)| v).collect());
                    }
                    Mark::Black => {}
                }
            } else {
                mark[node] = Mark::Black;
                stack.pop();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph() {
        assert_eq!(stable_topological_order(&[]), Ok(vec![]));
    }

    #[test]
    fn reverse_chain_is_reordered() {
        // 0 depends on 1, 1 depends on 2
        let deps = vec![vec![1], vec![2], vec![]];
        assert_eq!(stable_topological_order(&deps), Ok(vec![2, 1, 0]));
    }

    #[test]
    fn two_cycle_is_witnessed() {
        let deps = vec![vec![1], vec![0]];
        let cycle = stable_topological_order(&deps).unwrap_err();
        let mut sorted = cycle.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1]);
    }

    #[test]
    fn cycle_witness_follows_edges() {
        let deps = vec![vec![], vec![2], vec![3], vec![1]];
        let cycle = find_cycle(&deps).unwrap();
        assert_eq!(cycle.len(), 3);
        for (i, &v) in cycle.iter().enumerate() {
            let next = cycle[(i + 1) % cycle.len()];
            assert!(deps[v].contains(&next));
        }
    }
}
