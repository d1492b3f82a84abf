//! Annotated sentences, BIO repair, and corpus statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::label::{BioTag, RoleLabel};
use crate::scorer::extract_chunks;

/// Language of a sentence. Metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Language {
    En,
    Es,
    Pt,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::En, Language::Pt, Language::Es];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Es => "es",
            Language::Pt => "pt",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::En => "English",
            Language::Es => "Spanish",
            Language::Pt => "Portuguese",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = SentenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "es" => Ok(Language::Es),
            "pt" => Ok(Language::Pt),
            other => Err(SentenceError::UnknownLanguage(String::from(other))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SentenceError {
    #[error("sentence has no tokens")]
    Empty,
    #[error("{tokens} tokens but {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },
    #[error("token {0} is empty")]
    EmptyToken(usize),
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
}

/// A pre-tokenized sentence with one BIO tag per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub id: String,
    pub doc_id: Option<String>,
    pub language: Option<Language>,
    pub tokens: Vec<String>,
    pub tags: Vec<BioTag>,
}

impl AnnotatedSentence {
    /// Builds a sentence, checking shape invariants and repairing stray `I`
    /// tags. Returns the sentence and the number of repaired tags.
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        mut tags: Vec<BioTag>,
    ) -> Result<(Self, usize), SentenceError> {
        if tokens.is_empty() {
            return Err(SentenceError::Empty);
        }
        if tokens.len() != tags.len() {
            return Err(SentenceError::LengthMismatch {
                tokens: tokens.len(),
                tags: tags.len(),
            });
        }
        if let Some(i) = tokens.iter().position(|t| t.is_empty()) {
            return Err(SentenceError::EmptyToken(i));
        }
        let repaired = repair_tags(&mut tags);
        Ok((
            AnnotatedSentence {
                id: id.into(),
                doc_id: None,
                language: None,
                tokens,
                tags,
            },
            repaired,
        ))
    }

    pub fn with_doc(mut self, doc_id: Option<String>) -> Self {
        self.doc_id = doc_id;
        self
    }

    pub fn with_language(mut self, language: Option<Language>) -> Self {
        self.language = language;
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Rewrites every `I-r` whose predecessor is not `B-r`/`I-r` into `B-r`.
/// Returns the number of rewritten tags.
pub fn repair_tags(tags: &mut [BioTag]) -> usize {
    let mut repaired = 0;
    let mut prev: Option<BioTag> = None;
    for tag in tags.iter_mut() {
        if let BioTag::I(role) = *tag {
            if prev.and_then(BioTag::role) != Some(role) {
                *tag = BioTag::B(role);
                repaired += 1;
            }
        }
        prev = Some(*tag);
    }
    repaired
}

/// Corpus summary in the layout of the data overview table.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorpusStats {
    pub n_articles: usize,
    pub n_sentences: usize,
    pub chunk_counts: BTreeMap<RoleLabel, usize>,
}

impl CorpusStats {
    pub fn count(&self, role: RoleLabel) -> usize {
        self.chunk_counts.get(&role).copied().unwrap_or(0)
    }

    pub fn total_chunks(&self) -> usize {
        self.chunk_counts.values().sum()
    }
}

/// Counts distinct documents, sentences, and chunks per role.
pub fn compute_stats<'a, I>(corpus: I) -> CorpusStats
where
    I: IntoIterator<Item = &'a AnnotatedSentence>,
{
    let mut docs = BTreeSet::new();
    let mut stats = CorpusStats {
        chunk_counts: RoleLabel::ALL.iter().map(|&r| (r, 0)).collect(),
        ..CorpusStats::default()
    };
    for sentence in corpus {
        stats.n_sentences += 1;
        if let Some(doc) = &sentence.doc_id {
            docs.insert(doc.as_str());
        }
        for chunk in extract_chunks(&sentence.tags) {
            *stats.chunk_counts.entry(chunk.role).or_insert(0) += 1;
        }
    }
    stats.n_articles = docs.len();
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(id: &str, tags: &[BioTag]) -> AnnotatedSentence {
        let tokens = (0..tags.len()).map(|i| alloc::format!("t{i}")).collect();
        AnnotatedSentence::new(id, tokens, tags.to_vec()).unwrap().0
    }

    #[test]
    fn repair_after_outside() {
        let mut tags = vec![BioTag::O, BioTag::I(RoleLabel::Target)];
        assert_eq!(repair_tags(&mut tags), 1);
        assert_eq!(tags, vec![BioTag::O, BioTag::B(RoleLabel::Target)]);
    }

    #[test]
    fn repair_at_start_and_role_change() {
        use RoleLabel::*;
        let mut tags = vec![BioTag::I(Place), BioTag::I(Place), BioTag::I(Etime), BioTag::B(Fname)];
        assert_eq!(repair_tags(&mut tags), 2);
        assert_eq!(
            tags,
            vec![BioTag::B(Place), BioTag::I(Place), BioTag::B(Etime), BioTag::B(Fname)]
        );
    }

    #[test]
    fn rejects_bad_shapes() {
        assert_eq!(
            AnnotatedSentence::new("x", vec![], vec![]).unwrap_err(),
            SentenceError::Empty
        );
        assert_eq!(
            AnnotatedSentence::new("x", vec!["a".into()], vec![]).unwrap_err(),
            SentenceError::LengthMismatch { tokens: 1, tags: 0 }
        );
        assert_eq!(
            AnnotatedSentence::new("x", vec!["".into()], vec![BioTag::O]).unwrap_err(),
            SentenceError::EmptyToken(0)
        );
    }

    #[test]
    fn empty_corpus_stats() {
        let stats = compute_stats(&[]);
        assert_eq!(stats.n_articles, 0);
        assert_eq!(stats.n_sentences, 0);
        assert_eq!(stats.total_chunks(), 0);
        assert_eq!(stats.chunk_counts.len(), 7);
    }

    #[test]
    fn two_sentences_two_trigger_chunks() {
        let tags = [BioTag::B(RoleLabel::Trigger), BioTag::I(RoleLabel::Trigger)];
        let corpus = vec![s("a", &tags), s("b", &tags)];
        let stats = compute_stats(&corpus);
        assert_eq!(stats.count(RoleLabel::Trigger), 2);
        assert_eq!(stats.n_sentences, 2);
        assert_eq!(stats.n_articles, 0);
    }

    #[test]
    fn articles_are_distinct_docs() {
        let tags = [BioTag::O];
        let corpus = vec![
            s("a", &tags).with_doc(Some("d1".into())),
            s("b", &tags).with_doc(Some("d1".into())),
            s("c", &tags).with_doc(Some("d2".into())),
            s("d", &tags),
        ];
        assert_eq!(compute_stats(&corpus).n_articles, 2);
    }
}
