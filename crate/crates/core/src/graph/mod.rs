//! Event graphs: data model, schema validation, and the BIO encoders and
//! decoders for the three graph flavors.
//!
//! * `labeled-edge`: an unanchored root node; roles live on edge labels and
//!   all trigger chunks share one node reached by a `trigger` root edge.
//!   Arguments hang off the trigger node, or off the root when the sentence
//!   has no trigger.
//! * `node-centric`: roles live on node labels; one merged trigger node with
//!   an unlabeled edge to every argument.
//! * `node-centric-split`: as node-centric, but one trigger node per trigger
//!   chunk and edges from every trigger to every argument.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::label::RoleLabel;

mod decode;
mod encode;

pub use decode::{decode_to_bio, DecodeDiagnostics};
pub use encode::{encode, encode_tags};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Flavor {
    LabeledEdge,
    NodeCentric,
    NodeCentricSplit,
}

impl Flavor {
    pub const ALL: [Flavor; 3] = [Flavor::LabeledEdge, Flavor::NodeCentric, Flavor::NodeCentricSplit];

    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::LabeledEdge => "labeled-edge",
            Flavor::NodeCentric => "node-centric",
            Flavor::NodeCentricSplit => "node-centric-split",
        }
    }

    pub fn has_root(self) -> bool {
        self == Flavor::LabeledEdge
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Flavor {
    type Err = SchemaViolation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // underscores accepted as an alias
        match s.replace('_', "-").as_str() {
            "labeled-edge" => Ok(Flavor::LabeledEdge),
            "node-centric" => Ok(Flavor::NodeCentric),
            "node-centric-split" => Ok(Flavor::NodeCentricSplit),
            _ => Err(SchemaViolation::UnknownFlavor(String::from(s))),
        }
    }
}

/// Half-open token span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// The token spans a node covers, sorted and pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Anchor {
    pub spans: Vec<Span>,
}

impl Anchor {
    pub fn new(spans: Vec<Span>) -> Self {
        Anchor { spans }
    }

    /// Maximal runs of a sorted, deduplicated token index set.
    pub fn from_tokens(tokens: &BTreeSet<usize>) -> Self {
        let mut spans: Vec<Span> = Vec::new();
        for &t in tokens {
            match spans.last_mut() {
                Some(s) if s.end == t => s.end = t + 1,
                _ => spans.push(Span::new(t, t + 1)),
            }
        }
        Anchor { spans }
    }

    pub fn first_token(&self) -> Option<usize> {
        self.spans.first().map(|s| s.start)
    }

    pub fn tokens(&self) -> impl Iterator<Item = usize> + '_ {
        self.spans.iter().flat_map(|s| s.start..s.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub id: NodeId,
    pub label: Option<RoleLabel>,
    pub anchor: Option<Anchor>,
    pub is_root: bool,
}

impl GraphNode {
    pub fn root() -> Self {
        GraphNode {
            id: 0,
            label: None,
            anchor: None,
            is_root: true,
        }
    }

    pub fn first_token(&self) -> Option<usize> {
        self.anchor.as_ref().and_then(Anchor::first_token)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub label: Option<RoleLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventGraph {
    pub sentence_id: String,
    pub flavor: Flavor,
    pub n_tokens: usize,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaViolation {
    #[error("unknown flavor `{0}`")]
    UnknownFlavor(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("edge {0}->{1} references a missing node")]
    DanglingEdge(NodeId, NodeId),
    #[error("self loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge {0}->{1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("node {0}: anchor span out of range, unsorted, empty or overlapping")]
    BadAnchor(NodeId),
    #[error("node {0} has no anchor")]
    MissingAnchor(NodeId),
    #[error("root node must have id 0, no label and no anchor")]
    BadRoot,
    #[error("flavor {0} requires exactly one root node")]
    MissingRoot(Flavor),
    #[error("flavor {0} does not allow a root node")]
    UnexpectedRoot(Flavor),
    #[error("node {0} must be unlabeled in the labeled-edge flavor")]
    LabeledNode(NodeId),
    #[error("node {0} needs a label")]
    UnlabeledNode(NodeId),
    #[error("edge {0}->{1} must carry a label")]
    UnlabeledEdge(NodeId, NodeId),
    #[error("edge {0}->{1} must not carry a label")]
    LabeledEdge(NodeId, NodeId),
    #[error("node {node} has {count} incoming edges, expected {expected}")]
    InDegree { node: NodeId, count: usize, expected: usize },
    #[error("more than one trigger node")]
    MultipleTriggers,
    #[error("trigger node {0} must anchor a single span")]
    SplitTriggerSpans(NodeId),
    #[error("edge {0}->{1} is not allowed by the flavor")]
    IllegalEdge(NodeId, NodeId),
    #[error("edges must connect every trigger to every argument")]
    IncompleteBipartite,
    #[error("nodes {0} and {1} share a token")]
    OverlappingAnchors(NodeId, NodeId),
}

impl EventGraph {
    pub fn node(&self, id: NodeId) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn root(&self) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.is_root)
    }

    pub fn incoming(&self, id: NodeId) -> impl Iterator<Item = &GraphEdge> + '_ {
        self.edges.iter().filter(move |e| e.target == id)
    }

    /// Total number of anchored spans over all nodes.
    pub fn span_count(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| n.anchor.as_ref())
            .map(|a| a.spans.len())
            .sum()
    }

    /// The `(role, span)` pairs the graph expresses, sorted.
    pub fn role_spans(&self) -> Vec<(RoleLabel, Span)> {
        let mut out = Vec::new();
        for node in self.nodes.iter().filter(|n| !n.is_root) {
            let role = match self.flavor {
                Flavor::LabeledEdge => self.incoming(node.id).next().and_then(|e| e.label),
                _ => node.label,
            };
            if let (Some(role), Some(anchor)) = (role, &node.anchor) {
                out.extend(anchor.spans.iter().map(|&s| (role, s)));
            }
        }
        out.sort();
        out
    }

    /// Checks structure and every flavor invariant that predicted graphs
    /// must also satisfy.
    pub fn validate(&self) -> Result<(), SchemaViolation> {
        self.validate_structure()?;
        match self.flavor {
            Flavor::LabeledEdge => self.validate_labeled_edge(),
            Flavor::NodeCentric => self.validate_node_centric(),
            Flavor::NodeCentricSplit => self.validate_split(),
        }
    }

    /// [`validate`](Self::validate) plus token-disjointness of anchors,
    /// which holds for graphs encoded from gold BIO.
    pub fn validate_gold(&self) -> Result<(), SchemaViolation> {
        self.validate()?;
        let mut owner = alloc::vec![None; self.n_tokens];
        for node in &self.nodes {
            for t in node.anchor.iter().flat_map(Anchor::tokens) {
                if let Some(other) = owner[t].replace(node.id) {
                    return Err(SchemaViolation::OverlappingAnchors(other, node.id));
                }
            }
        }
        Ok(())
    }

    fn validate_structure(&self) -> Result<(), SchemaViolation> {
        let mut ids = BTreeSet::new();
        for node in &self.nodes {
            if !ids.insert(node.id) {
                return Err(SchemaViolation::DuplicateNode(node.id));
            }
            if node.is_root {
                if node.id != 0 || node.label.is_some() || node.anchor.is_some() {
                    return Err(SchemaViolation::BadRoot);
                }
                continue;
            }
            let anchor = match &node.anchor {
                Some(a) if !a.spans.is_empty() => a,
                _ => return Err(SchemaViolation::MissingAnchor(node.id)),
            };
            let mut last_end = 0;
            for (i, s) in anchor.spans.iter().enumerate() {
                if s.is_empty() || s.end > self.n_tokens || (i > 0 && s.start < last_end) {
                    return Err(SchemaViolation::BadAnchor(node.id));
                }
                last_end = s.end;
            }
        }
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if !ids.contains(&e.source) || !ids.contains(&e.target) {
                return Err(SchemaViolation::DanglingEdge(e.source, e.target));
            }
            if e.source == e.target {
                return Err(SchemaViolation::SelfLoop(e.source));
            }
            if !seen.insert((e.source, e.target)) {
                return Err(SchemaViolation::DuplicateEdge(e.source, e.target));
            }
        }
        let roots = self.nodes.iter().filter(|n| n.is_root).count();
        match (self.flavor.has_root(), roots) {
            (true, 1) | (false, 0) => Ok(()),
            (true, _) => Err(SchemaViolation::MissingRoot(self.flavor)),
            (false, _) => Err(SchemaViolation::UnexpectedRoot(self.flavor)),
        }
    }

    fn validate_labeled_edge(&self) -> Result<(), SchemaViolation> {
        let root = 0;
        for node in self.nodes.iter().filter(|n| !n.is_root) {
            if node.label.is_some() {
                return Err(SchemaViolation::LabeledNode(node.id));
            }
            let count = self.incoming(node.id).count();
            if count != 1 {
                return Err(SchemaViolation::InDegree { node: node.id, count, expected: 1 });
            }
        }
        let mut trigger = None;
        for e in &self.edges {
            let label = e.label.ok_or(SchemaViolation::UnlabeledEdge(e.source, e.target))?;
            if e.target == root {
                return Err(SchemaViolation::IllegalEdge(e.source, e.target));
            }
            if e.source == root && label.is_trigger() {
                if trigger.replace(e.target).is_some() {
                    return Err(SchemaViolation::MultipleTriggers);
                }
            }
        }
        for e in self.edges.iter().filter(|e| e.source != root) {
            if Some(e.source) != trigger || e.label.is_some_and(RoleLabel::is_trigger) {
                return Err(SchemaViolation::IllegalEdge(e.source, e.target));
            }
        }
        Ok(())
    }

    fn node_labels(&self) -> Result<(Vec<NodeId>, Vec<NodeId>), SchemaViolation> {
        let mut triggers = Vec::new();
        let mut arguments = Vec::new();
        for node in &self.nodes {
            match node.label {
                None => return Err(SchemaViolation::UnlabeledNode(node.id)),
                Some(RoleLabel::Trigger) => triggers.push(node.id),
                Some(_) => arguments.push(node.id),
            }
        }
        if let Some(e) = self.edges.iter().find(|e| e.label.is_some()) {
            return Err(SchemaViolation::LabeledEdge(e.source, e.target));
        }
        Ok((triggers, arguments))
    }

    fn validate_node_centric(&self) -> Result<(), SchemaViolation> {
        let (triggers, arguments) = self.node_labels()?;
        if triggers.len() > 1 {
            return Err(SchemaViolation::MultipleTriggers);
        }
        for e in &self.edges {
            if !triggers.contains(&e.source) || triggers.contains(&e.target) {
                return Err(SchemaViolation::IllegalEdge(e.source, e.target));
            }
        }
        let expected = triggers.len();
        for &a in &arguments {
            let count = self.incoming(a).count();
            if count != expected {
                return Err(SchemaViolation::InDegree { node: a, count, expected });
            }
        }
        Ok(())
    }

    fn validate_split(&self) -> Result<(), SchemaViolation> {
        let (triggers, arguments) = self.node_labels()?;
        for &t in &triggers {
            let single = self
                .node(t)
                .and_then(|n| n.anchor.as_ref())
                .is_some_and(|a| a.spans.len() == 1);
            if !single {
                return Err(SchemaViolation::SplitTriggerSpans(t));
            }
        }
        for e in &self.edges {
            if !triggers.contains(&e.source) || !arguments.contains(&e.target) {
                return Err(SchemaViolation::IllegalEdge(e.source, e.target));
            }
        }
        // duplicates were rejected structurally, so counting suffices
        if self.edges.len() != triggers.len() * arguments.len() {
            return Err(SchemaViolation::IncompleteBipartite);
        }
        Ok(())
    }
}
