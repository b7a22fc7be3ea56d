//! Reachability helpers over directed graphs given as adjacency lists.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

fn to_digraph(adjacency: &[Vec<usize>]) -> DiGraph<(), ()> {
    let mut graph = DiGraph::with_capacity(adjacency.len(), adjacency.iter().map(Vec::len).sum());
    for _ in 0..adjacency.len() {
        graph.add_node(());
    }
    for (from, targets) in adjacency.iter().enumerate() {
        for &to in targets {
            graph.add_edge(NodeIndex::new(from), NodeIndex::new(to), ());
        }
    }
    graph
}

/// Strongly connected components, each sorted ascending, ordered by their
/// smallest member.
pub fn strongly_connected_components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let graph = to_digraph(adjacency);
    let mut components: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(NodeIndex::index).collect();
            c.sort_unstable();
            c
        })
        .collect();
    components.sort_by_key(|c| c[0]);
    components
}

/// Components with no edge leaving them. For a Markov chain these are the
/// recurrent classes.
pub fn closed_classes(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let components = strongly_connected_components(adjacency);
    let mut owner = vec![0usize; adjacency.len()];
    for (k, c) in components.iter().enumerate() {
        for &v in c {
            owner[v] = k;
        }
    }
    components
        .iter()
        .enumerate()
        .filter(|(k, c)| c.iter().all(|&v| adjacency[v].iter().all(|&w| owner[w] == *k)))
        .map(|(_, c)| c.clone())
        .collect()
}

/// Boolean mask of vertices reachable from `start` (including `start`).
pub fn reachable_from(adjacency: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &w in &adjacency[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

pub fn is_strongly_connected(adjacency: &[Vec<usize>]) -> bool {
    !adjacency.is_empty() && strongly_connected_components(adjacency).len() == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_classes_of_two_absorbing_sinks() {
        // 0 -> 1, 0 -> 2, 1 -> 1, 2 -> 2
        let adj = vec![vec![1, 2], vec![1], vec![2]];
        assert_eq!(closed_classes(&adj), vec![vec![1], vec![2]]);
        assert!(!is_strongly_connected(&adj));
    }

    #[test]
    fn cycle_is_one_component() {
        let adj = vec![vec![1], vec![2], vec![0]];
        assert!(is_strongly_connected(&adj));
        assert_eq!(closed_classes(&adj), vec![vec![0, 1, 2]]);
        assert_eq!(reachable_from(&adj, 1), vec![true, true, true]);
    }
}
