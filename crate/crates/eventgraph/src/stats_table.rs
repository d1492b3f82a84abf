//! Corpus statistics laid out like the usual dataset-description table:
//! one column per language, an `articles (sentences)` row, then one row of
//! chunk counts per role.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use eventgraph_core::{compute_stats, AnnotatedSentence, CorpusStats, Language, RoleLabel};
use serde::Serialize;

/// Statistics of one column of the table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnStats {
    pub name: String,
    pub stats: CorpusStats,
}

/// Groups sentences by language (in English, Portuguese, Spanish order);
/// sentences without a language form a final `unspecified` column. A corpus
/// with no language information yields a single `all` column.
pub fn language_columns(sentences: &[AnnotatedSentence]) -> Vec<ColumnStats> {
    let mut groups: BTreeMap<usize, Vec<&AnnotatedSentence>> = BTreeMap::new();
    for s in sentences {
        let key = s
            .language
            .and_then(|l| Language::ALL.iter().position(|&x| x == l))
            .unwrap_or(Language::ALL.len());
        groups.entry(key).or_default().push(s);
    }
    if groups.keys().all(|&k| k == Language::ALL.len()) {
        return vec![ColumnStats { name: "all".into(), stats: compute_stats(sentences.iter()) }];
    }
    groups
        .into_iter()
        .map(|(k, group)| ColumnStats {
            name: Language::ALL.get(k).map_or("unspecified", |l| l.name()).to_string(),
            stats: compute_stats(group.into_iter()),
        })
        .collect()
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn render(columns: &[ColumnStats]) -> String {
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    rows.push((
        "articles (sentences)".into(),
        columns
            .iter()
            .map(|c| format!("{} ({})", thousands(c.stats.n_articles), thousands(c.stats.n_sentences)))
            .collect(),
    ));
    for role in RoleLabel::ALL {
        rows.push((role.as_str().into(), columns.iter().map(|c| thousands(c.stats.count(role))).collect()));
    }
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..columns.len())
        .map(|j| rows.iter().map(|(_, v)| v[j].len()).chain([columns[j].name.len()]).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    let _ = write!(out, "{:<label_w$}", "");
    for (c, w) in columns.iter().zip(&widths) {
        let _ = write!(out, "  {:>w$}", c.name);
    }
    out.push('\n');
    for (label, values) in rows {
        let _ = write!(out, "{label:<label_w$}");
        for (v, w) in values.iter().zip(&widths) {
            let _ = write!(out, "  {v:>w$}");
        }
        out.push('\n');
    }
    out
}
