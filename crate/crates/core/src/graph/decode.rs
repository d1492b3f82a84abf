use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{EventGraph, Flavor, GraphNode, NodeId};
use crate::label::{BioTag, RoleLabel};

/// Counters for nodes and tokens the decoder had to discard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecodeDiagnostics {
    /// Labeled-edge nodes without an incoming labeled edge.
    pub missing_role: usize,
    /// Labeled-edge nodes with more than one incoming edge; the first was used.
    pub ambiguous_role: usize,
    /// Node-centric nodes without a label, or nodes without an anchor.
    pub unlabeled: usize,
    /// Tokens skipped because a higher-ranked node already claimed them.
    pub conflicting_tokens: usize,
    /// Span tokens beyond `n_tokens`.
    pub out_of_range_tokens: usize,
}

impl DecodeDiagnostics {
    pub fn dropped_nodes(&self) -> usize {
        self.missing_role + self.unlabeled
    }
}

/// Writes a (gold or predicted) graph back to one BIO tag per token.
///
/// Nodes are placed in descending score order, ties broken by first span
/// start and then id; missing scores count as equal. A token already
/// claimed by an earlier node is skipped and the remaining fragments of the
/// span are emitted as fresh `B`/`I` chunks, so the output is always a
/// valid BIO sequence.
pub fn decode_to_bio(
    graph: &EventGraph,
    node_scores: Option<&BTreeMap<NodeId, f64>>,
) -> (Vec<BioTag>, DecodeDiagnostics) {
    let mut diag = DecodeDiagnostics::default();
    let mut placed: Vec<(&GraphNode, RoleLabel, f64)> = Vec::new();
    for node in graph.nodes.iter().filter(|n| !n.is_root) {
        let role = match graph.flavor {
            Flavor::LabeledEdge => {
                let mut incoming = graph.incoming(node.id);
                let first = incoming.next();
                if incoming.next().is_some() {
                    diag.ambiguous_role += 1;
                }
                match first.and_then(|e| e.label) {
                    Some(r) => r,
                    None => {
                        diag.missing_role += 1;
                        continue;
                    }
                }
            }
            Flavor::NodeCentric | Flavor::NodeCentricSplit => match node.label {
                Some(r) => r,
                None => {
                    diag.unlabeled += 1;
                    continue;
                }
            },
        };
        if node.anchor.as_ref().is_none_or(|a| a.spans.is_empty()) {
            diag.unlabeled += 1;
            continue;
        }
        let s = node_scores
            .and_then(|m| m.get(&node.id).copied())
            .unwrap_or(0.0);
        placed.push((node, role, s));
    }
    placed.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.first_token().cmp(&b.0.first_token()))
            .then_with(|| a.0.id.cmp(&b.0.id))
    });

    let n = graph.n_tokens;
    let mut tags = alloc::vec![BioTag::O; n];
    let mut claimed = alloc::vec![false; n];
    for (node, role, _) in placed {
        let Some(anchor) = &node.anchor else { continue };
        for span in &anchor.spans {
            let end = span.end.min(n);
            diag.out_of_range_tokens += span.end.saturating_sub(end.max(span.start));
            let mut inside = false;
            for t in span.start..end {
                if claimed[t] {
                    diag.conflicting_tokens += 1;
                    inside = false;
                    continue;
                }
                claimed[t] = true;
                tags[t] = if inside { BioTag::I(role) } else { BioTag::B(role) };
                inside = true;
            }
        }
    }
    (tags, diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{encode_tags, Anchor, GraphEdge, Span};
    use alloc::string::String;
    use alloc::vec;
    use BioTag::*;
    use RoleLabel::*;

    #[test]
    fn roundtrip_example_all_flavors() {
        let tags = vec![B(Participant), B(Trigger), B(Target), O, B(Place)];
        for flavor in Flavor::ALL {
            let g = encode_tags("s", &tags, flavor);
            assert_eq!(decode_to_bio(&g, None).0, tags, "{flavor}");
        }
    }

    #[test]
    fn empty_graph_is_all_outside() {
        let g = EventGraph {
            sentence_id: String::from("e"),
            flavor: Flavor::NodeCentric,
            n_tokens: 3,
            nodes: vec![],
            edges: vec![],
        };
        assert_eq!(decode_to_bio(&g, None).0, vec![O, O, O]);
    }

    fn node(id: NodeId, label: Option<RoleLabel>, spans: &[(usize, usize)]) -> GraphNode {
        GraphNode {
            id,
            label,
            anchor: Some(Anchor::new(spans.iter().map(|&(s, e)| Span::new(s, e)).collect())),
            is_root: false,
        }
    }

    #[test]
    fn higher_score_wins_overlap() {
        // node a = 0 covers tokens 1..3, node b = 1 covers 2..5
        let g = EventGraph {
            sentence_id: String::from("c"),
            flavor: Flavor::NodeCentric,
            n_tokens: 5,
            nodes: vec![node(0, Some(Target), &[(1, 3)]), node(1, Some(Place), &[(2, 5)])],
            edges: vec![],
        };
        let scores: BTreeMap<_, _> = [(0, 0.9), (1, 0.4)].into_iter().collect();
        let (tags, diag) = decode_to_bio(&g, Some(&scores));
        assert_eq!(tags, vec![O, B(Target), I(Target), B(Place), I(Place)]);
        assert_eq!(diag.conflicting_tokens, 1);

        // reversed scores: b keeps 2..5, a truncated to token 1
        let scores: BTreeMap<_, _> = [(0, 0.1), (1, 0.4)].into_iter().collect();
        let (tags, _) = decode_to_bio(&g, Some(&scores));
        assert_eq!(tags, vec![O, B(Target), B(Place), I(Place), I(Place)]);
    }

    #[test]
    fn truncation_in_middle_re_begins() {
        let g = EventGraph {
            sentence_id: String::from("m"),
            flavor: Flavor::NodeCentric,
            n_tokens: 4,
            nodes: vec![node(0, Some(Fname), &[(2, 3)]), node(1, Some(Etime), &[(0, 4)])],
            edges: vec![],
        };
        let scores: BTreeMap<_, _> = [(0, 0.8), (1, 0.5)].into_iter().collect();
        let (tags, _) = decode_to_bio(&g, Some(&scores));
        assert_eq!(tags, vec![B(Etime), I(Etime), B(Fname), B(Etime)]);
    }

    #[test]
    fn labeled_edge_orphan_dropped() {
        let g = EventGraph {
            sentence_id: String::from("o"),
            flavor: Flavor::LabeledEdge,
            n_tokens: 3,
            nodes: vec![GraphNode::root(), node(1, None, &[(0, 1)]), node(2, None, &[(2, 3)])],
            edges: vec![GraphEdge { source: 0, target: 1, label: Some(Trigger) }],
        };
        let (tags, diag) = decode_to_bio(&g, None);
        assert_eq!(tags, vec![B(Trigger), O, O]);
        assert_eq!(diag.missing_role, 1);
    }
}
