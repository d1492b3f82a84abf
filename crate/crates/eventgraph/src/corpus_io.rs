//! Reading and writing annotated corpora.
//!
//! `conll`: one `token<TAB>tag` per line, a blank line after each sentence,
//! and optional `# id = …`, `# doc = …`, `# lang = …` comment lines before
//! the tokens. `jsonl`: one object per line with `id`, `tokens`, `labels`
//! and optional `doc` and `lang`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use eventgraph_core::{AnnotatedSentence, BioTag, Language};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    #[default]
    Conll,
    Jsonl,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conll" => Ok(CorpusFormat::Conll),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse { line, message: message.into() }
}

/// Loaded sentences plus the number of `I` tags rewritten to `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCorpus {
    pub sentences: Vec<AnnotatedSentence>,
    pub repairs: usize,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
    parse_corpus(&text, format)
}

pub fn parse_corpus(text: &str, format: CorpusFormat) -> Result<LoadedCorpus, CorpusError> {
    match format {
        CorpusFormat::Conll => parse_conll(text),
        CorpusFormat::Jsonl => parse_jsonl(text),
    }
}

pub fn write_corpus(sentences: &[AnnotatedSentence], format: CorpusFormat) -> String {
    match format {
        CorpusFormat::Conll => write_conll(sentences),
        CorpusFormat::Jsonl => write_jsonl(sentences),
    }
}

#[derive(Default)]
struct Pending {
    start_line: usize,
    id: Option<String>,
    doc: Option<String>,
    lang: Option<Language>,
    tokens: Vec<String>,
    tags: Vec<BioTag>,
}

fn finish(
    pending: Pending,
    out: &mut LoadedCorpus,
) -> Result<(), CorpusError> {
    if pending.tokens.is_empty() {
        if pending.id.is_some() {
            return Err(parse_err(pending.start_line, "sentence has no tokens"));
        }
        return Ok(());
    }
    let id = pending.id.unwrap_or_else(|| (out.sentences.len() + 1).to_string());
    let (sentence, repaired) = AnnotatedSentence::new(id, pending.tokens, pending.tags)
        .map_err(|e| parse_err(pending.start_line, e.to_string()))?;
    out.repairs += repaired;
    out.sentences.push(sentence.with_doc(pending.doc).with_language(pending.lang));
    Ok(())
}

pub fn parse_conll(text: &str) -> Result<LoadedCorpus, CorpusError> {
    let mut out = LoadedCorpus { sentences: Vec::new(), repairs: 0 };
    let mut pending = Pending::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            finish(std::mem::take(&mut pending), &mut out)?;
            continue;
        }
        if pending.tokens.is_empty() && pending.id.is_none() && pending.doc.is_none() && pending.lang.is_none() {
            pending.start_line = line_no;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if !pending.tokens.is_empty() {
                return Err(parse_err(line_no, "comment inside a sentence"));
            }
            if let Some((key, value)) = comment.split_once('=') {
                let value = value.trim().to_string();
                match key.trim() {
                    "id" => pending.id = Some(value),
                    "doc" => pending.doc = Some(value),
                    "lang" => {
                        pending.lang = Some(value.parse().map_err(|e: eventgraph_core::SentenceError| parse_err(line_no, e.to_string()))?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(token), Some(tag), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(line_no, "expected `token<TAB>tag`"));
        };
        let tag: BioTag = tag.parse().map_err(|e: eventgraph_core::TagError| parse_err(line_no, e.to_string()))?;
        if token.is_empty() {
            return Err(parse_err(line_no, "empty token"));
        }
        pending.tokens.push(token.to_string());
        pending.tags.push(tag);
    }
    finish(pending, &mut out)?;
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    tokens: Vec<String>,
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    doc: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lang: Option<String>,
}

pub fn parse_jsonl(text: &str) -> Result<LoadedCorpus, CorpusError> {
    let mut out = LoadedCorpus { sentences: Vec::new(), repairs: 0 };
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonRecord = serde_json::from_str(line).map_err(|e| parse_err(line_no, e.to_string()))?;
        let tags = record
            .labels
            .iter()
            .map(|l| l.parse::<BioTag>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line_no, format!("sentence `{}`: {e}", record.id)))?;
        let lang = record
            .lang
            .as_deref()
            .map(str::parse::<Language>)
            .transpose()
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        let (sentence, repaired) = AnnotatedSentence::new(record.id.clone(), record.tokens, tags)
            .map_err(|e| parse_err(line_no, format!("sentence `{}`: {e}", record.id)))?;
        out.repairs += repaired;
        out.sentences.push(sentence.with_doc(record.doc).with_language(lang));
    }
    Ok(out)
}

pub fn write_conll(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let _ = writeln!(out, "# id = {}", s.id);
        if let Some(doc) = &s.doc_id {
            let _ = writeln!(out, "# doc = {doc}");
        }
        if let Some(lang) = s.language {
            let _ = writeln!(out, "# lang = {lang}");
        }
        for (token, tag) in s.tokens.iter().zip(&s.tags) {
            let _ = writeln!(out, "{token}\t{tag}");
        }
        out.push('\n');
    }
    out
}

pub fn write_jsonl(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let record = JsonRecord {
            id: s.id.clone(),
            tokens: s.tokens.clone(),
            labels: s.tags.iter().map(ToString::to_string).collect(),
            doc: s.doc_id.clone(),
            lang: s.language.map(|l| l.code().to_string()),
        };
        out.push_str(&serde_json::to_string(&record).expect("records serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use eventgraph_core::RoleLabel::*;

    #[test]
    fn conll_basic() {
        let c = parse_conll("Police\tB-participant\ndetained\tB-trigger\n\n").unwrap();
        assert_eq!(c.sentences.len(), 1);
        assert_eq!(c.sentences[0].tokens, vec!["Police", "detained"]);
        assert_eq!(c.sentences[0].tags, vec![BioTag::B(Participant), BioTag::B(Trigger)]);
        assert_eq!(c.repairs, 0);
    }

    #[test]
    fn conll_metadata_and_missing_final_blank() {
        let c = parse_conll("# id = a1\n# doc = d7\n# lang = pt\nx\tO\n\ny\tB-place").unwrap();
        assert_eq!(c.sentences[0].id, "a1");
        assert_eq!(c.sentences[0].doc_id.as_deref(), Some("d7"));
        assert_eq!(c.sentences[0].language, Some(Language::Pt));
        assert_eq!(c.sentences[1].id, "2");
    }

    #[test]
    fn conll_repairs_stray_inside() {
        let c = parse_conll("a\tO\nb\tI-target\n\n").unwrap();
        assert_eq!(c.sentences[0].tags[1], BioTag::B(Target));
        assert_eq!(c.repairs, 1);
    }

    #[test]
    fn conll_errors_carry_line() {
        match parse_conll("a\tO\nb\tB-weapon\n") {
            Err(CorpusError::Parse { line: 2, message }) => assert!(message.contains("weapon")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_conll("a O\n"), Err(CorpusError::Parse { line: 1, .. })));
        assert!(matches!(parse_conll("a\tO\textra\n"), Err(CorpusError::Parse { line: 1, .. })));
    }

    #[test]
    fn jsonl_basic_and_errors() {
        let c = parse_jsonl(r#"{"id":"s1","tokens":["a"],"labels":["O"]}"#).unwrap();
        assert_eq!(c.sentences[0].tags, vec![BioTag::O]);
        assert_eq!(c.sentences[0].id, "s1");
        let bad = "\n{\"id\":\"s2\",\"tokens\":[\"a\",\"b\"],\"labels\":[\"O\"]}";
        match parse_jsonl(bad) {
            Err(CorpusError::Parse { line: 2, message }) => assert!(message.contains("s2")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_jsonl("{not json"), Err(CorpusError::Parse { line: 1, .. })));
        assert!(matches!(
            parse_jsonl(r#"{"id":"s","tokens":["a"],"labels":["B-nope"]}"#),
            Err(CorpusError::Parse { line: 1, .. })
        ));
    }
}
