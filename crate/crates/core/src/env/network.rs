//! Undirected simple graphs and preferential-attachment generation.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    /// Sorted neighbour lists.
    adjacency: Vec<Vec<u32>>,
}

impl Network {
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u == v || adjacency[u as usize].contains(&v) {
                continue;
            }
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        Self { adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    pub fn degree(&self, node: u32) -> usize {
        self.adjacency[node as usize].len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = u32> {
        0..self.adjacency.len() as u32
    }

    /// Edges with `u < v`, in ascending order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        self.nodes()
            .flat_map(|u| self.neighbors(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        if self.adjacency.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.adjacency.len()];
        let mut queue = VecDeque::from([0u32]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Exact shortest-path betweenness (Brandes), unnormalised, undirected.
    pub fn betweenness(&self) -> Vec<f64> {
        let n = self.adjacency.len();
        let mut cb = vec![0.0; n];
        for s in 0..n {
            let mut stack = Vec::with_capacity(n);
            let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut sigma = vec![0.0f64; n];
            let mut dist = vec![-1i64; n];
            sigma[s] = 1.0;
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                stack.push(v);
                for &w in &self.adjacency[v] {
                    let w = w as usize;
                    if dist[w] < 0 {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                    if dist[w] == dist[v] + 1 {
                        sigma[w] += sigma[v];
                        preds[w].push(v);
                    }
                }
            }
            let mut delta = vec![0.0; n];
            while let Some(w) = stack.pop() {
                for &v in &preds[w] {
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
                if w != s {
                    cb[w] += delta[w];
                }
            }
        }
        cb.iter().map(|x| x / 2.0).collect()
    }

    /// One `u v` pair per line.
    pub fn write_edge_list(&self, mut out: impl Write) -> io::Result<()> {
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }
}

/// Preferential attachment: a seed triangle on nodes 0..3, then every new node
/// links to `m` distinct existing nodes chosen with probability proportional
/// to degree.
pub fn preferential_attachment(n: usize, m: usize, rng: &mut SimRng) -> Network {
    assert!(n >= 3 && (1..=3).contains(&m), "need n >= 3 and 1 <= m <= 3");
    let mut edges: Vec<(u32, u32)> = vec![(0, 1), (1, 2), (0, 2)];
    // Each edge endpoint appears once per incident edge, so uniform sampling
    // from this list is degree-proportional.
    let mut endpoints: Vec<u32> = vec![0, 1, 1, 2, 0, 2];
    for new in 3..n as u32 {
        let mut targets: Vec<u32> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            edges.push((t, new));
            endpoints.push(t);
            endpoints.push(new);
        }
    }
    Network::from_edges(n, &edges)
}

pub const NETWORK_SIZE: usize = 50;
pub const EDGES_PER_NODE: usize = 2;

pub fn generate_network(rng: &mut SimRng) -> Network {
    preferential_attachment(NETWORK_SIZE, EDGES_PER_NODE, rng)
}
