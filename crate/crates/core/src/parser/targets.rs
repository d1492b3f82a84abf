//! Supervision derived from gold graphs.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::graph::{EventGraph, Flavor, NodeId};

/// Maps each gold node to the query that should predict it: the first
/// slot of the first token of its first span, or the dedicated root query
/// at index `n_tokens * queries_per_token`.
pub fn assign_targets(gold: &EventGraph, n_tokens: usize, queries_per_token: usize) -> BTreeMap<NodeId, usize> {
    gold.nodes
        .iter()
        .filter_map(|node| {
            let query = if node.is_root {
                n_tokens * queries_per_token
            } else {
                node.first_token()? * queries_per_token
            };
            Some((node.id, query))
        })
        .collect()
}

/// Per-sentence training targets in query/token index space.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub n_tokens: usize,
    /// Node class per token query; 0 means no node.
    pub node_class: Vec<usize>,
    /// Gold anchor token indicators for each anchored gold node's query.
    pub anchors: Vec<(usize, Vec<bool>)>,
    /// Query index of every gold node, in graph node order.
    pub node_queries: Vec<usize>,
    /// `adjacency[i][j]`: edge from `node_queries[i]` to `node_queries[j]`.
    pub adjacency: Vec<Vec<bool>>,
    /// Gold edges as `(i, j, label class)` over `node_queries` positions.
    pub edge_labels: Vec<(usize, usize, usize)>,
}

impl Targets {
    pub fn from_graph(gold: &EventGraph, queries_per_token: usize) -> Self {
        let n = gold.n_tokens;
        let assigned = assign_targets(gold, n, queries_per_token);
        let mut node_class = alloc::vec![0; n * queries_per_token];
        let mut anchors = Vec::new();
        let mut node_queries = Vec::new();
        let mut position = BTreeMap::new();
        for node in &gold.nodes {
            let q = assigned[&node.id];
            position.insert(node.id, node_queries.len());
            node_queries.push(q);
            if node.is_root {
                continue;
            }
            node_class[q] = match gold.flavor {
                Flavor::LabeledEdge => 1,
                Flavor::NodeCentric | Flavor::NodeCentricSplit => {
                    1 + node.label.map_or(0, |r| r.index())
                }
            };
            let mut row = alloc::vec![false; n];
            for t in node.anchor.iter().flat_map(|a| a.tokens()) {
                row[t] = true;
            }
            anchors.push((q, row));
        }
        let k = node_queries.len();
        let mut adjacency = alloc::vec![alloc::vec![false; k]; k];
        let mut edge_labels = Vec::new();
        for e in &gold.edges {
            let (i, j) = (position[&e.source], position[&e.target]);
            adjacency[i][j] = true;
            if let Some(label) = e.label {
                edge_labels.push((i, j, label.index()));
            }
        }
        Targets { n_tokens: n, node_class, anchors, node_queries, adjacency, edge_labels }
    }
}
