//! Transcript cleaning: punctuation removal and corpus-level rare-symbol
//! filtering.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_properties::{GeneralCategory, UnicodeGeneralCategory};

use crate::corpus::Manifest;
use crate::error::{Error, Result};

/// Character frequencies over NFC scalars, whitespace excluded.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CharFrequency {
    counts: BTreeMap<char, u64>,
}

impl CharFrequency {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut cf = CharFrequency::default();
        for t in texts {
            cf.add_text(t);
        }
        cf
    }

    pub fn add_text(&mut self, text: &str) {
        for c in text.chars().filter(|c| !c.is_whitespace()) {
            *self.counts.entry(c).or_insert(0) += 1;
        }
    }

    pub fn add_char(&mut self, c: char, n: u64) {
        if n > 0 {
            *self.counts.entry(c).or_insert(0) += n;
        }
    }

    /// Commutative merge of two frequency maps.
    pub fn merge(&mut self, other: &CharFrequency) {
        for (&c, &n) in &other.counts {
            *self.counts.entry(c).or_insert(0) += n;
        }
    }

    pub fn get(&self, c: char) -> u64 {
        self.counts.get(&c).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (char, u64)> + '_ {
        self.counts.iter().map(|(&c, &n)| (c, n))
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Restrict to the given character set.
    pub fn restricted_to(&self, chars: &BTreeSet<char>) -> CharFrequency {
        CharFrequency {
            counts: self
                .counts
                .iter()
                .filter(|(c, _)| chars.contains(c))
                .map(|(&c, &n)| (c, n))
                .collect(),
        }
    }
}

pub fn char_frequency<'a>(texts: impl IntoIterator<Item = &'a str>) -> CharFrequency {
    CharFrequency::from_texts(texts)
}

/// Which characters to strip from transcripts.
///
/// The default treats the Unicode punctuation categories Po, Ps, Pe, Pd, Pi
/// and Pf as unspoken, keeping apostrophe and hyphen since they occur inside
/// words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningRules {
    pub unicode_punctuation: bool,
    pub keep: BTreeSet<char>,
    pub extra_remove: BTreeSet<char>,
    pub collapse_whitespace: bool,
    pub lowercase_latin: bool,
}

impl Default for CleaningRules {
    fn default() -> Self {
        CleaningRules {
            unicode_punctuation: true,
            keep: ['\'', '-'].into_iter().collect(),
            extra_remove: BTreeSet::new(),
            collapse_whitespace: true,
            lowercase_latin: false,
        }
    }
}

impl CleaningRules {
    pub fn removes(&self, c: char) -> bool {
        if self.keep.contains(&c) {
            return false;
        }
        if self.extra_remove.contains(&c) {
            return true;
        }
        self.unicode_punctuation
            && matches!(
                c.general_category(),
                GeneralCategory::OtherPunctuation
                    | GeneralCategory::OpenPunctuation
                    | GeneralCategory::ClosePunctuation
                    | GeneralCategory::DashPunctuation
                    | GeneralCategory::InitialPunctuation
                    | GeneralCategory::FinalPunctuation
            )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CleaningRules> {
        let path = path.as_ref();
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&data).map_err(|e| Error::parse(0, format!("bad rules file: {e}")))
    }
}

pub fn clean_text(text: &str, rules: &CleaningRules) -> String {
    let stripped: String = text
        .chars()
        .filter(|&c| !rules.removes(c))
        .map(|c| {
            if rules.lowercase_latin && c.is_ascii_uppercase() {
                c.to_ascii_lowercase()
            } else {
                c
            }
        })
        .collect();
    if rules.collapse_whitespace {
        collapse_ws(&stripped)
    } else {
        stripped
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Delete every character with corpus frequency strictly below `threshold`
/// from all texts. Returns the filtered manifest and the removed characters.
///
/// Deletion does not insert a space, so a symbol inside a word does not split
/// it; whitespace is re-collapsed afterwards.
pub fn rare_symbol_filter(m: &Manifest, threshold: u64) -> Result<(Manifest, BTreeSet<char>)> {
    let freq = char_frequency(m.entries().iter().map(|u| u.text.as_str()));
    let removed: BTreeSet<char> = freq
        .iter()
        .filter(|&(_, n)| n < threshold)
        .map(|(c, _)| c)
        .collect();
    if removed.is_empty() {
        return Ok((m.clone(), removed));
    }
    let filtered = m.map_entries(|mut u| {
        u.text = collapse_ws(&u.text.chars().filter(|c| !removed.contains(c)).collect::<String>());
        u
    })?;
    Ok((filtered, removed))
}

/// Write the removed-symbol report: one `<char>\t<frequency>` per line.
pub fn write_removed_report(
    path: impl AsRef<Path>,
    removed: &BTreeSet<char>,
    freq: &CharFrequency,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for &c in removed {
        out.push(c);
        out.push('\t');
        out.push_str(&freq.get(c).to_string());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
