use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::DiscreteMdpGraph;
use crate::error::{Error, Result};

/// Dense `rows × cols` matrix of path costs; `+∞` marks unreachable.
///
/// All-pairs matrices are square; goal-restricted ones hold one column per
/// requested goal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch {
                context: "DistanceMatrix::from_rows",
                expected: cols,
                found: bad.len(),
            });
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Least cost from every node into a set of target nodes (multi-source
/// search on the reversed graph).
pub fn shortest_paths_to_set(graph: &DiscreteMdpGraph, targets: &[usize]) -> Vec<f64> {
    let (offsets, adj) = graph.reverse_adjacency();
    let unit = graph.all_unit_cost();
    let mut dist = vec![f64::INFINITY; graph.num_nodes()];
    if unit {
        let mut queue = VecDeque::new();
        for &t in targets {
            if dist[t] != 0.0 {
                dist[t] = 0.0;
                queue.push_back(t);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[offsets[u]..offsets[u + 1]] {
                if dist[v].is_infinite() {
                    dist[v] = dist[u] + 1.0;
                    queue.push_back(v);
                }
            }
        }
        return dist;
    }
    let mut heap = BinaryHeap::new();
    for &t in targets {
        dist[t] = 0.0;
        heap.push(Frontier { dist: 0.0, node: t });
    }
    let mut done = vec![false; graph.num_nodes()];
    while let Some(Frontier { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, c) in &adj[offsets[u]..offsets[u + 1]] {
            let nd = d + c;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Frontier { dist: nd, node: v });
            }
        }
    }
    dist
}

/// `D[u][j]` = least cost from `u` to `goals[j]`.
pub fn shortest_paths(graph: &DiscreteMdpGraph, goals: &[usize]) -> DistanceMatrix {
    let n = graph.num_nodes();
    let mut out = DistanceMatrix::filled(n, goals.len(), f64::INFINITY);
    for (j, &g) in goals.iter().enumerate() {
        for (u, d) in shortest_paths_to_set(graph, &[g]).into_iter().enumerate() {
            out.set(u, j, d);
        }
    }
    out
}

/// All-pairs least costs by Floyd–Warshall; the brute-force reference.
pub fn floyd_warshall(graph: &DiscreteMdpGraph) -> DistanceMatrix {
    let n = graph.num_nodes();
    let mut d = DistanceMatrix::filled(n, n, f64::INFINITY);
    for i in 0..n {
        d.set(i, i, 0.0);
    }
    for e in graph.edges() {
        if e.cost < d.get(e.from, e.to) {
            d.set(e.from, e.to, e.cost);
        }
    }
    floyd_warshall_in_place(&mut d);
    d
}

pub(crate) fn floyd_warshall_in_place(d: &mut DistanceMatrix) {
    let n = d.rows();
    for k in 0..n {
        for i in 0..n {
            let dik = d.get(i, k);
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = dik + d.get(k, j);
                if via < d.get(i, j) {
                    d.set(i, j, via);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_cycle() -> DiscreteMdpGraph {
        DiscreteMdpGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap()
    }

    #[test]
    fn three_cycle_is_asymmetric() {
        let d = shortest_paths(&three_cycle(), &[0, 1, 2]);
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(2, 0), 1.0);
        for g in 0..3 {
            assert_eq!(d.get(g, g), 0.0);
        }
        assert_eq!(d, floyd_warshall(&three_cycle()));
    }

    #[test]
    fn dijkstra_path_handles_zero_and_weighted_edges() {
        let g = DiscreteMdpGraph::new(4, [(0, 1, 2.5), (1, 3, 0.0), (0, 2, 1.0), (2, 3, 4.0)]).unwrap();
        let d = shortest_paths(&g, &[3]);
        assert_eq!(d.column(0), vec![2.5, 0.0, 4.0, 0.0]);
        let unreachable = shortest_paths(&g, &[0]);
        assert!(unreachable.get(3, 0).is_infinite());
    }

    #[test]
    fn set_targets_take_the_nearest() {
        let g = DiscreteMdpGraph::new(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(shortest_paths_to_set(&g, &[1, 3]), vec![1.0, 0.0, 1.0, 0.0]);
    }
}
