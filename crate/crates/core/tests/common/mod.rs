//! Independent oracles for integration tests. Nothing here calls the
//! library's scoring or re-rooting code.

#![allow(dead_code)]

use rand::Rng;
use rumor_core::tree::{GraphSpec, InfectionTree};

/// Parent vectors (`parents[0]` is the source) of every tree on `n`
/// arrival-ordered vertices: vertex `i` picks any earlier parent. Every
/// unlabelled shape appears among these.
pub fn all_recursive_trees(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![usize::MAX]];
    for i in 1..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..i).map(move |parent| {
                    let mut q = p.clone();
                    q.push(parent);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn random_recursive_tree<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p = vec![usize::MAX];
    for i in 1..n {
        p.push(rng.random_range(0..i));
    }
    p
}

/// Builds the library tree on a host roomy enough for any shape.
pub fn to_tree(parents: &[usize]) -> InfectionTree {
    let labels: Vec<Option<u32>> = parents
        .iter()
        .map(|&p| (p != usize::MAX).then(|| p as u32 + 1))
        .collect();
    let d = parents.len().max(3) as u32;
    InfectionTree::from_parents(GraphSpec::Regular { d }, &labels).unwrap()
}

pub fn adjacency(parents: &[usize]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); parents.len()];
    for (i, &p) in parents.iter().enumerate().skip(1) {
        adj[i].push(p);
        adj[p].push(i);
    }
    adj
}

/// Subtree sizes with the tree hung from `root`, by explicit DFS.
pub fn sizes_from(adj: &[Vec<usize>], root: usize) -> Vec<u64> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut parent = vec![usize::MAX; n];
    let mut stack = vec![root];
    parent[root] = root;
    while let Some(v) = stack.pop() {
        order.push(v);
        for &w in &adj[v] {
            if parent[w] == usize::MAX {
                parent[w] = v;
                stack.push(w);
            }
        }
    }
    let mut size = vec![1u64; n];
    for &v in order.iter().rev() {
        if v != root {
            size[parent[v]] += size[v];
        }
    }
    size
}

/// Exact per-vertex `φ`, `ψ` and `R` from the definitions.
pub struct Naive {
    pub phi: Vec<u128>,
    pub psi: Vec<u64>,
    pub r: Vec<u128>,
}

pub fn naive_scores(parents: &[usize]) -> Naive {
    let n = parents.len();
    let adj = adjacency(parents);
    let fact: u128 = (1..=n as u128).product();
    let mut phi = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for u in 0..n {
        let s = sizes_from(&adj, u);
        let prod: u128 = (0..n).filter(|&v| v != u).map(|v| u128::from(s[v])).product();
        phi.push(prod);
        psi.push(adj[u].iter().map(|&w| s[w]).max().unwrap_or(0));
        r.push(fact / (prod * n as u128));
    }
    Naive { phi, psi, r }
}

/// Distances from `a` by BFS.
pub fn bfs_distances(adj: &[Vec<usize>], a: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    let mut queue = std::collections::VecDeque::from([a]);
    dist[a] = 0;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == u32::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Labels (1-based) attaining the minimum of `xs`.
pub fn argmin<T: Ord + Copy>(xs: &[T]) -> Vec<u32> {
    let m = *xs.iter().min().unwrap();
    (0..xs.len()).filter(|&i| xs[i] == m).map(|i| i as u32 + 1).collect()
}
