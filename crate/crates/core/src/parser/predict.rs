use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::model::{Input, Model};
use super::PredictedGraph;
use crate::graph::{Anchor, EventGraph, Flavor, GraphEdge, GraphNode, NodeId};
use crate::label::RoleLabel;
use crate::tensor::{Mat, Real};

/// A query classified as a node, before graph assembly.
#[derive(Debug, Clone)]
struct Candidate {
    query: usize,
    role: Option<RoleLabel>,
    prob: f64,
    tokens: BTreeSet<usize>,
}

impl Candidate {
    fn first_token(&self) -> usize {
        self.tokens.first().copied().unwrap_or(usize::MAX)
    }

    fn merge(group: Vec<Candidate>, representative: usize) -> Candidate {
        let mut merged = group[representative].clone();
        for c in &group {
            merged.tokens.extend(c.tokens.iter().copied());
            merged.prob = merged.prob.max(c.prob);
        }
        merged
    }
}

/// Decodes one sentence into a graph satisfying the flavor schema.
///
/// Nodes are the token queries whose most likely class is not "no node"
/// and whose anchor probabilities exceed the threshold on at least one
/// token. Predicted trigger nodes are merged into one node in the merged
/// flavors. In the node-centric flavors edges are fixed by the schema once
/// nodes are known; in the labeled-edge flavor each node keeps its single
/// most likely legal incoming edge, and is dropped when that edge does not
/// clear the edge threshold.
pub fn predict<T: Real>(model: &Model<T>, sentence_id: &str, input: Input<'_>) -> PredictedGraph {
    let config = &model.config;
    let flavor = config.flavor;
    let scores = model.scores(input);
    let n = scores.embeddings.rows();
    let tau_a = config.anchor_threshold;
    let tau_e = config.edge_threshold;

    let mut candidates = Vec::new();
    for i in 0..scores.node_probs.rows() {
        let row = scores.node_probs.row(i);
        let (class, prob) = argmax(row);
        if class == 0 {
            continue;
        }
        let tokens: BTreeSet<usize> = (0..n)
            .filter(|&j| scores.anchor_probs[(i, j)].f64() > tau_a)
            .collect();
        if tokens.is_empty() {
            continue;
        }
        let role = match flavor {
            Flavor::LabeledEdge => None,
            _ => RoleLabel::from_index(class - 1),
        };
        candidates.push(Candidate { query: i, role, prob, tokens });
    }

    match flavor {
        Flavor::LabeledEdge => assemble_labeled_edge(model, sentence_id, n, &scores.queries, candidates, tau_e),
        Flavor::NodeCentric | Flavor::NodeCentricSplit => {
            assemble_node_centric(model, sentence_id, n, &scores.queries, candidates, flavor)
        }
    }
}

fn argmax<T: Real>(row: &[T]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in row.iter().enumerate() {
        if v.f64() > best.1 {
            best = (i, v.f64());
        }
    }
    best
}

fn best_label<T: Real>(dist: &[T], allow_trigger: bool) -> (RoleLabel, f64) {
    let mut best = (RoleLabel::Participant, f64::NEG_INFINITY);
    for role in RoleLabel::ALL {
        if role.is_trigger() && !allow_trigger {
            continue;
        }
        let p = dist[role.index()].f64();
        if p > best.1 {
            best = (role, p);
        }
    }
    best
}

fn node_from(id: NodeId, c: &Candidate, labeled: bool) -> GraphNode {
    GraphNode {
        id,
        label: if labeled { c.role } else { None },
        anchor: Some(Anchor::from_tokens(&c.tokens)),
        is_root: false,
    }
}

fn assemble_node_centric<T: Real>(
    model: &Model<T>,
    sentence_id: &str,
    n: usize,
    queries: &Mat<T>,
    candidates: Vec<Candidate>,
    flavor: Flavor,
) -> PredictedGraph {
    let (triggers, arguments): (Vec<Candidate>, Vec<Candidate>) =
        candidates.into_iter().partition(|c| c.role == Some(RoleLabel::Trigger));
    let triggers = if triggers.is_empty() {
        triggers
    } else if flavor == Flavor::NodeCentric {
        let rep = (0..triggers.len())
            .max_by(|&a, &b| triggers[a].prob.total_cmp(&triggers[b].prob).then(b.cmp(&a)))
            .unwrap_or(0);
        alloc::vec![Candidate::merge(triggers, rep)]
    } else {
        // one node per contiguous trigger run
        let mut split = Vec::new();
        for c in triggers {
            for span in Anchor::from_tokens(&c.tokens).spans {
                split.push(Candidate { tokens: (span.start..span.end).collect(), ..c.clone() });
            }
        }
        split
    };

    let mut ordered: Vec<(Candidate, bool)> = triggers
        .into_iter()
        .map(|c| (c, true))
        .chain(arguments.into_iter().map(|c| (c, false)))
        .collect();
    ordered.sort_by_key(|(c, _)| (c.first_token(), c.query));

    let nodes: Vec<GraphNode> = ordered.iter().enumerate().map(|(id, (c, _))| node_from(id, c, true)).collect();
    let node_scores = ordered.iter().enumerate().map(|(id, (c, _))| (id, c.prob)).collect();

    let rows: Vec<usize> = ordered.iter().map(|(c, _)| c.query).collect();
    let (presence, _) = model.head.predict_edges(&queries.select_rows(&rows));
    let mut edges = Vec::new();
    let mut edge_scores = BTreeMap::new();
    for (s, (_, s_trig)) in ordered.iter().enumerate() {
        if !s_trig {
            continue;
        }
        for (t, (_, t_trig)) in ordered.iter().enumerate() {
            if *t_trig {
                continue;
            }
            edges.push(GraphEdge { source: s, target: t, label: None });
            edge_scores.insert((s, t), presence[(s, t)].f64());
        }
    }
    edges.sort();
    PredictedGraph {
        graph: EventGraph { sentence_id: String::from(sentence_id), flavor, n_tokens: n, nodes, edges },
        node_scores,
        edge_scores,
    }
}

fn assemble_labeled_edge<T: Real>(
    model: &Model<T>,
    sentence_id: &str,
    n: usize,
    queries: &Mat<T>,
    candidates: Vec<Candidate>,
    tau_e: f64,
) -> PredictedGraph {
    let root_row = n * model.head.queries_per_token();
    let mut rows = alloc::vec![root_row];
    rows.extend(candidates.iter().map(|c| c.query));
    let (presence, labels) = model.head.predict_edges(&queries.select_rows(&rows));
    // position 0 is the root, candidate c sits at c + 1
    let p = |i: usize, j: usize| presence[(i, j)].f64();

    let trigger_set: Vec<usize> = (0..candidates.len())
        .filter(|&c| {
            let (role, _) = best_label(&labels[0][c + 1], true);
            role.is_trigger() && p(0, c + 1) > tau_e
        })
        .collect();
    let trigger_rep = trigger_set.iter().copied().max_by(|&a, &b| {
        let sa = p(0, a + 1) * labels[0][a + 1][RoleLabel::Trigger.index()].f64();
        let sb = p(0, b + 1) * labels[0][b + 1][RoleLabel::Trigger.index()].f64();
        sa.total_cmp(&sb).then(b.cmp(&a))
    });

    // (candidate, incoming label, edge score, from trigger?)
    let mut kept: Vec<(Candidate, RoleLabel, f64, bool)> = Vec::new();
    if let Some(rep) = trigger_rep {
        let group: Vec<Candidate> = trigger_set.iter().map(|&c| candidates[c].clone()).collect();
        let rep_ix = trigger_set.iter().position(|&c| c == rep).unwrap_or(0);
        kept.push((Candidate::merge(group, rep_ix), RoleLabel::Trigger, p(0, rep + 1), false));
    }
    for (c, cand) in candidates.iter().enumerate() {
        if trigger_set.contains(&c) {
            continue;
        }
        let (root_label, _) = best_label(&labels[0][c + 1], false);
        let mut best = (root_label, p(0, c + 1), false);
        if let Some(rep) = trigger_rep {
            let (trig_label, _) = best_label(&labels[rep + 1][c + 1], false);
            let score = p(rep + 1, c + 1);
            if score >= best.1 {
                best = (trig_label, score, true);
            }
        }
        if best.1 > tau_e {
            kept.push((cand.clone(), best.0, best.1, best.2));
        }
    }
    kept.sort_by_key(|(c, ..)| (c.first_token(), c.query));

    let mut nodes = alloc::vec![GraphNode::root()];
    let mut node_scores = BTreeMap::new();
    let trigger_id = kept.iter().position(|(_, role, ..)| role.is_trigger()).map(|i| i + 1);
    let mut edges = Vec::new();
    let mut edge_scores = BTreeMap::new();
    for (i, (c, role, score, from_trigger)) in kept.iter().enumerate() {
        let id = i + 1;
        nodes.push(node_from(id, c, false));
        node_scores.insert(id, c.prob);
        let source = match (from_trigger, trigger_id) {
            (true, Some(t)) => t,
            _ => 0,
        };
        edges.push(GraphEdge { source, target: id, label: Some(*role) });
        edge_scores.insert((source, id), *score);
    }
    edges.sort();
    PredictedGraph {
        graph: EventGraph {
            sentence_id: String::from(sentence_id),
            flavor: Flavor::LabeledEdge,
            n_tokens: n,
            nodes,
            edges,
        },
        node_scores,
        edge_scores,
    }
}
