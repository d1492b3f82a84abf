//! One-graph-per-line JSON for [`EventGraph`].
//!
//! ```json
//! {"id":"s1","flavor":"node-centric","n_tokens":4,
//!  "nodes":[{"id":0,"label":"trigger","anchors":[{"from":1,"to":2}]}],
//!  "edges":[]}
//! ```
//!
//! Spans are half-open (`to` is exclusive). A node without an `anchors`
//! field is the virtual root. Graphs are validated on parse.

use eventgraph_core::{Anchor, EventGraph, Flavor, GraphEdge, GraphNode, RoleLabel, SchemaViolation, Span};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum GraphParseError {
    #[error("line {line}: malformed graph JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: unknown flavor `{flavor}`")]
    UnknownFlavor { line: usize, flavor: String },
    #[error("line {line}: unknown role label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: graph `{id}` violates its schema: {violation}")]
    Invalid { line: usize, id: String, violation: SchemaViolation },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonSpan {
    from: usize,
    to: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonNode {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchors: Option<Vec<JsonSpan>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonEdge {
    source: usize,
    target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonGraph {
    id: String,
    flavor: String,
    n_tokens: usize,
    nodes: Vec<JsonNode>,
    edges: Vec<JsonEdge>,
}

/// Serializes one graph as a single JSON line (no trailing newline).
pub fn serialize_graph(graph: &EventGraph) -> String {
    let doc = JsonGraph {
        id: graph.sentence_id.clone(),
        flavor: graph.flavor.as_str().to_string(),
        n_tokens: graph.n_tokens,
        nodes: graph
            .nodes
            .iter()
            .map(|n| JsonNode {
                id: n.id,
                label: n.label.map(|l| l.as_str().to_string()),
                anchors: n
                    .anchor
                    .as_ref()
                    .map(|a| a.spans.iter().map(|s| JsonSpan { from: s.start, to: s.end }).collect()),
            })
            .collect(),
        edges: graph
            .edges
            .iter()
            .map(|e| JsonEdge { source: e.source, target: e.target, label: e.label.map(|l| l.as_str().to_string()) })
            .collect(),
    };
    serde_json::to_string(&doc).expect("graphs serialize")
}

/// Parses and validates one graph; `line` is used for diagnostics only.
pub fn parse_graph(text: &str, line: usize) -> Result<EventGraph, GraphParseError> {
    let doc: JsonGraph =
        serde_json::from_str(text).map_err(|e| GraphParseError::Json { line, message: e.to_string() })?;
    let flavor: Flavor = doc
        .flavor
        .parse()
        .map_err(|_| GraphParseError::UnknownFlavor { line, flavor: doc.flavor.clone() })?;
    let label = |s: Option<String>| -> Result<Option<RoleLabel>, GraphParseError> {
        s.map(|l| l.parse().map_err(|_| GraphParseError::UnknownLabel { line, label: l }))
            .transpose()
    };
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for n in doc.nodes {
        let anchor = n
            .anchors
            .map(|spans| Anchor { spans: spans.into_iter().map(|s| Span::new(s.from, s.to)).collect() });
        nodes.push(GraphNode { id: n.id, label: label(n.label)?, is_root: anchor.is_none(), anchor });
    }
    let mut edges = Vec::with_capacity(doc.edges.len());
    for e in doc.edges {
        edges.push(GraphEdge { source: e.source, target: e.target, label: label(e.label)? });
    }
    let graph = EventGraph { sentence_id: doc.id, flavor, n_tokens: doc.n_tokens, nodes, edges };
    graph
        .validate()
        .map_err(|violation| GraphParseError::Invalid { line, id: graph.sentence_id.clone(), violation })?;
    Ok(graph)
}

/// Parses a JSON-lines document, skipping blank lines.
pub fn read_graphs(text: &str) -> Result<Vec<EventGraph>, GraphParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_graph(l, i + 1))
        .collect()
}

pub fn write_graphs<'a>(graphs: impl IntoIterator<Item = &'a EventGraph>) -> String {
    let mut out = String::new();
    for g in graphs {
        out.push_str(&serialize_graph(g));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use eventgraph_core::graph::encode_tags;
    use eventgraph_core::BioTag;

    fn tags(s: &str) -> Vec<BioTag> {
        s.split_whitespace().map(|t| t.parse().unwrap()).collect()
    }

    #[test]
    fn round_trip_each_flavor() {
        let t = tags("B-participant O B-trigger I-trigger B-place O B-trigger");
        for flavor in [Flavor::LabeledEdge, Flavor::NodeCentric, Flavor::NodeCentricSplit] {
            let g = encode_tags("s", &t, flavor);
            let line = serialize_graph(&g);
            assert!(!line.contains('\n'));
            assert_eq!(parse_graph(&line, 1).unwrap(), g);
        }
    }

    #[test]
    fn root_has_no_anchors_field() {
        let g = encode_tags("s", &tags("B-trigger"), Flavor::LabeledEdge);
        let line = serialize_graph(&g);
        assert!(line.starts_with(r#"{"id":"s","flavor":"labeled-edge","n_tokens":1,"nodes":[{"id":0},"#), "{line}");
    }

    #[test]
    fn diagnostics() {
        let e = read_graphs("\n{oops").unwrap_err();
        assert!(matches!(e, GraphParseError::Json { line: 2, .. }));
        let e = parse_graph(r#"{"id":"a","flavor":"amr","n_tokens":1,"nodes":[],"edges":[]}"#, 3).unwrap_err();
        assert!(matches!(e, GraphParseError::UnknownFlavor { line: 3, .. }));
        let e = parse_graph(
            r#"{"id":"a","flavor":"node-centric","n_tokens":1,"nodes":[{"id":0,"label":"trigger","anchors":[{"from":0,"to":5}]}],"edges":[]}"#,
            1,
        )
        .unwrap_err();
        assert!(matches!(e, GraphParseError::Invalid { .. }), "{e}");
        let e = parse_graph(
            r#"{"id":"a","flavor":"node-centric","n_tokens":1,"nodes":[{"id":0,"label":"weapon","anchors":[{"from":0,"to":1}]}],"edges":[]}"#,
            1,
        )
        .unwrap_err();
        assert!(matches!(e, GraphParseError::UnknownLabel { .. }));
    }
}
