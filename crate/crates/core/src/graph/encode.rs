use alloc::string::String;
use alloc::vec::Vec;

use super::{Anchor, EventGraph, Flavor, GraphEdge, GraphNode, Span};
use crate::corpus::AnnotatedSentence;
use crate::label::{BioTag, RoleLabel};
use crate::scorer::extract_chunks;

/// Encodes a sentence's BIO chunks as an event graph of the given flavor.
pub fn encode(sentence: &AnnotatedSentence, flavor: Flavor) -> EventGraph {
    encode_tags(&sentence.id, &sentence.tags, flavor)
}

/// Encodes a bare tag sequence. Node ids follow first-token order, with the
/// labeled-edge root first; edges are sorted by `(source, target)`.
pub fn encode_tags(sentence_id: &str, tags: &[BioTag], flavor: Flavor) -> EventGraph {
    let chunks = extract_chunks(tags);
    let mut trigger_spans = Vec::new();
    // (role, anchor) in first-token order
    let mut pending: Vec<(RoleLabel, Anchor)> = Vec::new();
    for c in &chunks {
        let span = Span::new(c.start, c.end);
        if c.role.is_trigger() && flavor != Flavor::NodeCentricSplit {
            trigger_spans.push(span);
        } else {
            pending.push((c.role, Anchor::new(alloc::vec![span])));
        }
    }
    if !trigger_spans.is_empty() {
        pending.push((RoleLabel::Trigger, Anchor::new(trigger_spans)));
    }
    pending.sort_by_key(|(_, a)| a.first_token());

    let offset = usize::from(flavor.has_root());
    let mut nodes = Vec::with_capacity(pending.len() + offset);
    if flavor.has_root() {
        nodes.push(GraphNode::root());
    }
    let mut triggers = Vec::new();
    let mut arguments = Vec::new();
    for (i, (role, anchor)) in pending.into_iter().enumerate() {
        let id = i + offset;
        if role.is_trigger() {
            triggers.push(id);
        } else {
            arguments.push((id, role));
        }
        nodes.push(GraphNode {
            id,
            label: (!flavor.has_root()).then_some(role),
            anchor: Some(anchor),
            is_root: false,
        });
    }

    let mut edges = Vec::new();
    match flavor {
        Flavor::LabeledEdge => {
            let head = match triggers.first() {
                Some(&t) => {
                    edges.push(GraphEdge { source: 0, target: t, label: Some(RoleLabel::Trigger) });
                    t
                }
                None => 0,
            };
            for &(a, role) in &arguments {
                edges.push(GraphEdge { source: head, target: a, label: Some(role) });
            }
        }
        Flavor::NodeCentric | Flavor::NodeCentricSplit => {
            for &t in &triggers {
                for &(a, _) in &arguments {
                    edges.push(GraphEdge { source: t, target: a, label: None });
                }
            }
        }
    }
    edges.sort();

    EventGraph {
        sentence_id: String::from(sentence_id),
        flavor,
        n_tokens: tags.len(),
        nodes,
        edges,
    }
}
