//! Dataset manifests: utterance records in JSONL form.
//!
//! One utterance per line:
//! `{"utt_id": str, "audio": str|null, "text": str, "language": str|null, "duration_s": float|null}`
//!
//! Texts are NFC-normalized on load and entries are kept sorted by utt_id so
//! every downstream pass iterates in a deterministic order.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Short lowercase token naming a language (e.g. "hindi", "hindmara").
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageId(String);

impl LanguageId {
    pub fn new(id: &str) -> Result<Self> {
        if id.is_empty()
            || !id
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
        {
            return Err(Error::InvalidLanguageId(id.to_string()));
        }
        Ok(LanguageId(id.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LanguageId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LanguageId::new(s)
    }
}

impl TryFrom<String> for LanguageId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        LanguageId::new(&s)
    }
}

impl From<LanguageId> for String {
    fn from(id: LanguageId) -> String {
        id.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub utt_id: String,
    pub audio: Option<String>,
    pub text: String,
    pub language: Option<LanguageId>,
    pub duration_s: Option<f64>,
}

impl Utterance {
    pub fn new(utt_id: impl Into<String>, text: impl Into<String>) -> Self {
        Utterance {
            utt_id: utt_id.into(),
            audio: None,
            text: text.into(),
            language: None,
            duration_s: None,
        }
    }
}

/// An ordered, duplicate-free collection of utterances.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    entries: Vec<Utterance>,
    pub metadata: BTreeMap<String, String>,
}

/// Per-language counts and total duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageStats {
    pub count: usize,
    pub total_duration_hrs: f64,
}

#[derive(Serialize, Deserialize)]
struct MetadataLine {
    metadata: BTreeMap<String, String>,
}

impl Manifest {
    /// Build a manifest, normalizing texts to NFC and sorting by utt_id.
    pub fn from_entries(entries: Vec<Utterance>) -> Result<Self> {
        let mut entries: Vec<Utterance> = entries
            .into_iter()
            .map(|mut u| {
                u.text = u.text.nfc().collect();
                u
            })
            .collect();
        entries.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
        for pair in entries.windows(2) {
            if pair[0].utt_id == pair[1].utt_id {
                return Err(Error::DuplicateUttId(pair[0].utt_id.clone()));
            }
        }
        Ok(Manifest {
            entries,
            metadata: BTreeMap::new(),
        })
    }

    pub fn entries(&self) -> &[Utterance] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, utt_id: &str) -> Option<&Utterance> {
        self.entries
            .binary_search_by(|u| u.utt_id.as_str().cmp(utt_id))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Return a new manifest with every entry passed through `f`.
    pub fn map_entries(&self, f: impl FnMut(Utterance) -> Utterance) -> Result<Manifest> {
        let mut m = Manifest::from_entries(self.entries.iter().cloned().map(f).collect())?;
        m.metadata = self.metadata.clone();
        Ok(m)
    }

    /// Per-language {count, total hours}; unlabeled utterances group under "unknown".
    pub fn stats(&self) -> BTreeMap<String, LanguageStats> {
        let mut out: BTreeMap<String, LanguageStats> = BTreeMap::new();
        for u in &self.entries {
            let key = u
                .language
                .as_ref()
                .map_or_else(|| "unknown".to_string(), |l| l.as_str().to_string());
            let s = out.entry(key).or_insert(LanguageStats {
                count: 0,
                total_duration_hrs: 0.0,
            });
            s.count += 1;
            s.total_duration_hrs += u.duration_s.unwrap_or(0.0) / 3600.0;
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut entries = Vec::new();
        let mut metadata = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            // An optional leading metadata line carries manifest-level key/values.
            if lineno == 1 && !line.contains("\"utt_id\"") {
                if let Ok(m) = serde_json::from_str::<MetadataLine>(&line) {
                    metadata = m.metadata;
                    continue;
                }
            }
            let utt: Utterance = serde_json::from_str(&line)
                .map_err(|e| Error::parse(lineno, format!("bad manifest record: {e}")))?;
            entries.push(utt);
        }
        let mut m = Manifest::from_entries(entries)?;
        m.metadata = metadata;
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        if !self.metadata.is_empty() {
            let line = serde_json::to_string(&MetadataLine {
                metadata: self.metadata.clone(),
            })
            .expect("metadata serializes");
            writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
        }
        for u in &self.entries {
            let line = serde_json::to_string(u).expect("utterance serializes");
            writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utt(id: &str, text: &str, lang: Option<&str>, dur: Option<f64>) -> Utterance {
        Utterance {
            utt_id: id.to_string(),
            audio: None,
            text: text.to_string(),
            language: lang.map(|l| LanguageId::new(l).unwrap()),
            duration_s: dur,
        }
    }

    #[test]
    fn load_three_line_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        std::fs::write(
            &p,
            concat!(
                r#"{"utt_id":"u2","audio":null,"text":"b","language":null,"duration_s":null}"#,
                "\n",
                r#"{"utt_id":"u1","audio":null,"text":"a","language":"hindi","duration_s":1.5}"#,
                "\n",
                r#"{"utt_id":"u3","audio":"x.wav","text":"c","language":null,"duration_s":null}"#,
                "\n"
            ),
        )
        .unwrap();
        let m = Manifest::load(&p).unwrap();
        assert_eq!(m.len(), 3);
        // sorted by utt_id
        assert_eq!(m.entries()[0].utt_id, "u1");
        assert_eq!(m.entries()[2].utt_id, "u3");
    }

    #[test]
    fn duplicate_id_is_error() {
        let entries = vec![utt("u1", "a", None, None), utt("u1", "b", None, None)];
        match Manifest::from_entries(entries) {
            Err(Error::DuplicateUttId(id)) => assert_eq!(id, "u1"),
            other => panic!("expected duplicate-id error, got {other:?}"),
        }
    }

    #[test]
    fn missing_text_field_is_parse_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        std::fs::write(
            &p,
            concat!(
                r#"{"utt_id":"u1","audio":null,"text":"a","language":null,"duration_s":null}"#,
                "\n",
                r#"{"utt_id":"u2","audio":null,"language":null,"duration_s":null}"#,
                "\n"
            ),
        )
        .unwrap();
        match Manifest::load(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn stats_sum_durations_per_language() {
        let m = Manifest::from_entries(vec![
            utt("a", "x", Some("hindi"), Some(1800.0)),
            utt("b", "y", Some("hindi"), Some(1800.0)),
            utt("c", "z", None, Some(60.0)),
        ])
        .unwrap();
        let stats = m.stats();
        assert_eq!(stats["hindi"].count, 2);
        assert!((stats["hindi"].total_duration_hrs - 1.0).abs() < 1e-12);
        assert_eq!(stats["unknown"].count, 1);
    }

    #[test]
    fn empty_manifest_stats_empty() {
        let m = Manifest::from_entries(vec![]).unwrap();
        assert!(m.stats().is_empty());
        assert!(m.is_empty());
    }

    #[test]
    fn round_trip_preserves_non_ascii_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        let m = Manifest::from_entries(vec![
            utt("u1", "नमस्ते", Some("hindi"), Some(2.0)),
            utt("u2", "abc", None, None),
            utt("u3", "வணக்கம்", Some("tamil"), None),
        ])
        .unwrap();
        m.write(&p).unwrap();
        let loaded = Manifest::load(&p).unwrap();
        assert_eq!(m, loaded);
        assert_eq!(loaded.entries()[0].text.as_bytes(), "नमस्ते".nfc().collect::<String>().as_bytes());
    }

    #[test]
    fn round_trip_with_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        let mut m = Manifest::from_entries(vec![utt("u1", "a", None, None)]).unwrap();
        m.metadata.insert("split".into(), "train".into());
        m.write(&p).unwrap();
        assert_eq!(Manifest::load(&p).unwrap(), m);
    }

    #[test]
    fn empty_manifest_writes_zero_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        Manifest::from_entries(vec![]).unwrap().write(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "");
    }

    #[test]
    fn text_is_nfc_normalized_on_construction() {
        // "e" + combining acute normalizes to the precomposed form
        let m = Manifest::from_entries(vec![utt("u1", "e\u{0301}", None, None)]).unwrap();
        assert_eq!(m.entries()[0].text, "\u{00e9}");
    }

    #[test]
    fn language_id_rejects_bad_tokens() {
        assert!(LanguageId::new("").is_err());
        assert!(LanguageId::new("Hindi").is_err());
        assert!(LanguageId::new("hindi").is_ok());
        assert!(LanguageId::new("hindi-english").is_ok());
    }
}
