//! Chunk-level precision, recall and F1 following the conlleval convention.
//!
//! A chunk opens at `B-r`, or at `I-r` whose predecessor is not `B-r`/`I-r`,
//! and extends through consecutive `I-r`. A predicted chunk counts as correct
//! only when a gold chunk has the same sentence, role, start and end.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::corpus::AnnotatedSentence;
use crate::label::{BioTag, RoleLabel};

/// A contiguous half-open token span `[start, end)` carrying one role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RoleChunk {
    pub role: RoleLabel,
    pub start: usize,
    pub end: usize,
}

/// Splits a tag sequence into ordered, disjoint chunks.
pub fn extract_chunks(tags: &[BioTag]) -> Vec<RoleChunk> {
    let mut chunks = Vec::new();
    let mut open: Option<RoleChunk> = None;
    let mut prev = None;
    for (i, &tag) in tags.iter().enumerate() {
        let continues = matches!((tag, open), (BioTag::I(r), Some(c)) if c.role == r)
            && !tag.starts_chunk(prev);
        if continues {
            if let Some(c) = open.as_mut() {
                c.end = i + 1;
            }
        } else {
            chunks.extend(open.take());
            if let Some(role) = tag.role() {
                open = Some(RoleChunk {
                    role,
                    start: i,
                    end: i + 1,
                });
            }
        }
        prev = Some(tag);
    }
    chunks.extend(open);
    chunks
}

/// Writes chunks back as `B-r I-r ...` over an otherwise-`O` sequence.
/// Chunks must be disjoint and lie within `n_tokens`.
pub fn chunks_to_tags(chunks: &[RoleChunk], n_tokens: usize) -> Vec<BioTag> {
    let mut tags = alloc::vec![BioTag::O; n_tokens];
    for c in chunks {
        tags[c.start] = BioTag::B(c.role);
        for t in &mut tags[c.start + 1..c.end] {
            *t = BioTag::I(c.role);
        }
    }
    tags
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("sentence `{0}` has no prediction")]
    MissingPrediction(String),
    #[error("prediction for unknown sentence `{0}`")]
    UnknownSentence(String),
    #[error("duplicate sentence id `{0}`")]
    DuplicateId(String),
    #[error("sentence `{id}`: gold has {gold} tokens, prediction has {pred}")]
    LengthMismatch { id: String, gold: usize, pred: usize },
    #[error("{gold} gold sentences but {pred} predictions")]
    CountMismatch { gold: usize, pred: usize },
}

/// Which roles enter the macro average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MacroAverage {
    /// Roles with nonzero gold or predicted support.
    #[default]
    ObservedRoles,
    /// All seven roles, absent ones contributing an F1 of zero.
    AllRoles,
}

/// Precision, recall and F1 as fractions in `[0, 1]`, with supports.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoleScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_support: usize,
    pub pred_support: usize,
    pub correct: usize,
}

impl RoleScore {
    pub fn from_counts(gold_support: usize, pred_support: usize, correct: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, pred_support);
        let recall = ratio(correct, gold_support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RoleScore {
            precision,
            recall,
            f1,
            gold_support,
            pred_support,
            correct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreReport {
    pub per_role: BTreeMap<RoleLabel, RoleScore>,
    pub macro_f1: f64,
    pub micro: RoleScore,
}

impl ScoreReport {
    pub fn role(&self, role: RoleLabel) -> RoleScore {
        self.per_role.get(&role).copied().unwrap_or_default()
    }
}

/// Per-role chunk counts. Merging is associative, so sentences can be
/// counted in any grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChunkCounts {
    /// `(gold, pred, correct)` indexed by role.
    counts: [(usize, usize, usize); 7],
}

impl ChunkCounts {
    pub fn add_sentence(&mut self, gold: &[BioTag], pred: &[BioTag]) {
        let gold_chunks: BTreeSet<RoleChunk> = extract_chunks(gold).into_iter().collect();
        for c in &gold_chunks {
            self.counts[c.role.index()].0 += 1;
        }
        for c in extract_chunks(pred) {
            let entry = &mut self.counts[c.role.index()];
            entry.1 += 1;
            if gold_chunks.contains(&c) {
                entry.2 += 1;
            }
        }
    }

    pub fn merge(mut self, other: &ChunkCounts) -> ChunkCounts {
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            a.0 += b.0;
            a.1 += b.1;
            a.2 += b.2;
        }
        self
    }

    pub fn finish(&self, average: MacroAverage) -> ScoreReport {
        let mut report = ScoreReport::default();
        let mut total = (0, 0, 0);
        let mut f1_sum = 0.0;
        let mut averaged = 0usize;
        for role in RoleLabel::ALL {
            let (gold, pred, correct) = self.counts[role.index()];
            total.0 += gold;
            total.1 += pred;
            total.2 += correct;
            let observed = gold + pred > 0;
            let s = RoleScore::from_counts(gold, pred, correct);
            if observed {
                report.per_role.insert(role, s);
            }
            if observed || average == MacroAverage::AllRoles {
                f1_sum += s.f1;
                averaged += 1;
            }
        }
        report.macro_f1 = if averaged == 0 { 0.0 } else { f1_sum / averaged as f64 };
        report.micro = RoleScore::from_counts(total.0, total.1, total.2);
        report
    }
}

/// Scores predictions aligned to gold sentences by id.
pub fn score(
    gold: &[AnnotatedSentence],
    pred: &[AnnotatedSentence],
    average: MacroAverage,
) -> Result<ScoreReport, ScoreError> {
    let mut by_id: BTreeMap<&str, &AnnotatedSentence> = BTreeMap::new();
    for p in pred {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(ScoreError::DuplicateId(p.id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    let mut counts = ChunkCounts::default();
    for g in gold {
        if !seen.insert(g.id.as_str()) {
            return Err(ScoreError::DuplicateId(g.id.clone()));
        }
        let p = by_id
            .get(g.id.as_str())
            .ok_or_else(|| ScoreError::MissingPrediction(g.id.clone()))?;
        if p.tags.len() != g.tags.len() {
            return Err(ScoreError::LengthMismatch {
                id: g.id.clone(),
                gold: g.tags.len(),
                pred: p.tags.len(),
            });
        }
        counts.add_sentence(&g.tags, &p.tags);
    }
    if let Some(extra) = pred.iter().find(|p| !seen.contains(p.id.as_str())) {
        return Err(ScoreError::UnknownSentence(extra.id.clone()));
    }
    Ok(counts.finish(average))
}

/// Scores tag sequences aligned to gold sentences by position.
pub fn score_tags(
    gold: &[AnnotatedSentence],
    pred: &[Vec<BioTag>],
    average: MacroAverage,
) -> Result<ScoreReport, ScoreError> {
    if gold.len() != pred.len() {
        return Err(ScoreError::CountMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut counts = ChunkCounts::default();
    for (g, p) in gold.iter().zip(pred) {
        if p.len() != g.tags.len() {
            return Err(ScoreError::LengthMismatch {
                id: g.id.clone(),
                gold: g.tags.len(),
                pred: p.len(),
            });
        }
        counts.add_sentence(&g.tags, p);
    }
    Ok(counts.finish(average))
}

/// Formats a report as a fixed-width table: one row per observed role in
/// the development-table column order, then macro and micro rows.
/// Values are percentages with two decimals.
pub fn report_table(report: &ScoreReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7}",
        "role", "precision", "recall", "f1", "gold", "pred", "correct"
    );
    let row = |out: &mut String, name: &str, s: &RoleScore| {
        let _ = writeln!(
            out,
            "{:<12} {:>9.2} {:>9.2} {:>9.2} {:>7} {:>7} {:>7}",
            name,
            100.0 * s.precision,
            100.0 * s.recall,
            100.0 * s.f1,
            s.gold_support,
            s.pred_support,
            s.correct
        );
    };
    for role in RoleLabel::REPORT_ORDER {
        if let Some(s) = report.per_role.get(&role) {
            row(&mut out, role.as_str(), s);
        }
    }
    let _ = writeln!(out, "{:<12} {:>29.2}", "macro", 100.0 * report.macro_f1);
    if report.micro.gold_support + report.micro.pred_support > 0 {
        row(&mut out, "micro", &report.micro);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use RoleLabel::*;

    fn sent(id: &str, tags: Vec<BioTag>) -> AnnotatedSentence {
        let tokens = (0..tags.len()).map(|i| alloc::format!("w{i}")).collect();
        AnnotatedSentence::new(id, tokens, tags).unwrap().0
    }

    #[test]
    fn chunks_basic() {
        let tags = [BioTag::B(Trigger), BioTag::I(Trigger), BioTag::O, BioTag::B(Place)];
        assert_eq!(
            extract_chunks(&tags),
            vec![
                RoleChunk { role: Trigger, start: 0, end: 2 },
                RoleChunk { role: Place, start: 3, end: 4 }
            ]
        );
    }

    #[test]
    fn leading_inside_tag_opens_chunk() {
        assert_eq!(
            extract_chunks(&[BioTag::I(Target)]),
            vec![RoleChunk { role: Target, start: 0, end: 1 }]
        );
    }

    #[test]
    fn all_outside_has_no_chunks() {
        assert!(extract_chunks(&[BioTag::O; 4]).is_empty());
        assert!(extract_chunks(&[]).is_empty());
    }

    #[test]
    fn adjacent_begin_tags_split() {
        let tags = [BioTag::B(Trigger), BioTag::B(Trigger), BioTag::I(Place), BioTag::I(Trigger)];
        let chunks = extract_chunks(&tags);
        assert_eq!(chunks.len(), 4);
        assert_eq!(chunks_to_tags(&chunks, 4), vec![
            BioTag::B(Trigger), BioTag::B(Trigger), BioTag::B(Place), BioTag::B(Trigger)
        ]);
    }

    #[test]
    fn identity_scores_full() {
        let gold = vec![
            sent("a", vec![BioTag::B(Trigger), BioTag::I(Trigger), BioTag::B(Place)]),
            sent("b", vec![BioTag::O, BioTag::B(Etime)]),
        ];
        let r = score(&gold, &gold, MacroAverage::ObservedRoles).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        for s in r.per_role.values() {
            assert_eq!(s.f1, 1.0);
        }
        assert_eq!(r.micro.f1, 1.0);
    }

    #[test]
    fn boundary_mismatch_scores_zero() {
        let gold = vec![sent("a", vec![BioTag::B(Trigger), BioTag::I(Trigger)])];
        let pred = vec![sent("a", vec![BioTag::B(Trigger), BioTag::O])];
        let r = score(&gold, &pred, MacroAverage::ObservedRoles).unwrap();
        let t = r.role(Trigger);
        assert_eq!((t.precision, t.recall, t.f1), (0.0, 0.0, 0.0));
        assert_eq!(r.macro_f1, 0.0);
        assert_eq!(r.per_role.len(), 1);
    }

    #[test]
    fn spurious_role_enters_macro() {
        let gold = vec![sent("a", vec![BioTag::B(Trigger), BioTag::O, BioTag::B(Place)])];
        let pred = vec![sent("a", vec![BioTag::B(Trigger), BioTag::B(Target), BioTag::O])];
        let r = score(&gold, &pred, MacroAverage::ObservedRoles).unwrap();
        assert_eq!(r.role(Trigger).f1, 1.0);
        assert_eq!(r.role(Place).f1, 0.0);
        assert_eq!(r.role(Target).f1, 0.0);
        assert!((100.0 * r.macro_f1 - 33.33).abs() <= 0.01);
        let all = score(&gold, &pred, MacroAverage::AllRoles).unwrap();
        assert!((all.macro_f1 - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn alignment_errors() {
        let gold = vec![sent("a", vec![BioTag::O, BioTag::O])];
        let short = vec![sent("a", vec![BioTag::O])];
        assert!(matches!(
            score(&gold, &short, MacroAverage::default()),
            Err(ScoreError::LengthMismatch { .. })
        ));
        let other = vec![sent("b", vec![BioTag::O, BioTag::O])];
        assert_eq!(
            score(&gold, &other, MacroAverage::default()),
            Err(ScoreError::MissingPrediction("a".into()))
        );
        let extra = vec![gold[0].clone(), other[0].clone()];
        assert_eq!(
            score(&gold, &extra, MacroAverage::default()),
            Err(ScoreError::UnknownSentence("b".into()))
        );
    }

    #[test]
    fn table_layout() {
        let empty = report_table(&ScoreReport::default());
        let lines: Vec<&str> = empty.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("role"));
        assert!(lines[1].starts_with("macro") && lines[1].ends_with("0.00"));

        let gold = vec![sent("a", vec![BioTag::B(Etime), BioTag::B(Trigger), BioTag::B(Target)])];
        let table = report_table(&score(&gold, &gold, MacroAverage::default()).unwrap());
        let names: Vec<&str> = table.lines().skip(1).map(|l| l.split_whitespace().next().unwrap()).collect();
        assert_eq!(names, vec!["trigger", "target", "etime", "macro", "micro"]);
        assert!(table.lines().nth(1).unwrap().contains("100.00"));
    }
}
