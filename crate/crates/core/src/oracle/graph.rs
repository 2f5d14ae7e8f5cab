use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::env::{Obs, TransitionDataset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
}

/// Directed graph with nonnegative edge costs over dense node indices,
/// optionally labelled with the observation each node stands for.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMdpGraph {
    n: usize,
    edges: Vec<Edge>,
    labels: Option<Vec<Obs>>,
}

fn obs_key(o: &Obs) -> [u32; 3] {
    [o[0].to_bits(), o[1].to_bits(), o[2].to_bits()]
}

impl DiscreteMdpGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let edges = edges
            .into_iter()
            .map(|(from, to, cost)| {
                if from >= n || to >= n {
                    return Err(Error::InvalidState(format!("edge {from}->{to} outside {n} nodes")));
                }
                if !(cost.is_finite() && cost >= 0.0) {
                    return Err(Error::OutOfRange(format!("edge cost {cost} must be finite and >= 0")));
                }
                Ok(Edge { from, to, cost })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            edges,
            labels: None,
        })
    }

    pub fn with_labels(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        labels: Vec<Obs>,
    ) -> Result<Self> {
        if labels.len() != n {
            return Err(Error::ShapeMismatch {
                context: "graph labels",
                expected: n,
                found: labels.len(),
            });
        }
        let mut g = Self::new(n, edges)?;
        g.labels = Some(labels);
        Ok(g)
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[Obs]> {
        self.labels.as_deref()
    }

    /// Node carrying the given observation label.
    pub fn node_of(&self, obs: &Obs) -> Option<usize> {
        let key = obs_key(obs);
        self.labels
            .as_ref()?
            .iter()
            .position(|o| obs_key(o) == key)
    }

    /// Label-to-node lookup table for repeated queries.
    pub fn label_index(&self) -> BTreeMap<[u32; 3], usize> {
        self.labels
            .iter()
            .flatten()
            .enumerate()
            .map(|(i, o)| (obs_key(o), i))
            .collect()
    }

    /// Incoming adjacency in compressed form: `(offsets, (source, cost))`.
    pub(crate) fn reverse_adjacency(&self) -> (Vec<usize>, Vec<(usize, f64)>) {
        let mut offsets = alloc::vec![0usize; self.n + 1];
        for e in &self.edges {
            offsets[e.to + 1] += 1;
        }
        for i in 0..self.n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut adj = alloc::vec![(0, 0.0); self.edges.len()];
        for e in &self.edges {
            adj[fill[e.to]] = (e.from, e.cost);
            fill[e.to] += 1;
        }
        (offsets, adj)
    }

    pub(crate) fn all_unit_cost(&self) -> bool {
        self.edges.iter().all(|e| e.cost == 1.0)
    }
}

/// Graph over the distinct observations of a dataset, one edge of cost
/// `-r` per record. Nodes are numbered in order of first appearance.
pub fn dataset_graph(dataset: &TransitionDataset) -> Result<DiscreteMdpGraph> {
    let mut index: BTreeMap<[u32; 3], usize> = BTreeMap::new();
    let mut labels = Vec::new();
    let mut node = |o: &Obs, labels: &mut Vec<Obs>| {
        *index.entry(obs_key(o)).or_insert_with(|| {
            labels.push(*o);
            labels.len() - 1
        })
    };
    let mut edges = Vec::with_capacity(dataset.len());
    for r in &dataset.records {
        let u = node(&r.s, &mut labels);
        let v = node(&r.s_next, &mut labels);
        edges.push((u, v, -(r.r as f64)));
    }
    DiscreteMdpGraph::with_labels(labels.len(), edges, labels)
}
