//! Character-vocabulary algebra: per-language vocabularies, union for
//! multilingual training, symmetric difference for merger analysis, and
//! explicit language merging.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::corpus::{LanguageId, Manifest};
use crate::error::{Error, Result};
use crate::textnorm::CharFrequency;

/// A language's character set with per-character frequencies.
///
/// Units are NFC Unicode scalars; whitespace is never part of a vocab.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    pub language: LanguageId,
    pub chars: BTreeSet<char>,
    pub freq: CharFrequency,
}

impl Vocab {
    pub fn new(language: LanguageId, freq: CharFrequency) -> Result<Self> {
        let chars: BTreeSet<char> = freq.iter().map(|(c, _)| c).collect();
        if chars.is_empty() {
            return Err(Error::EmptyVocab(language.as_str().to_string()));
        }
        Ok(Vocab {
            language,
            chars,
            freq,
        })
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn contains(&self, c: char) -> bool {
        self.chars.contains(&c)
    }

    /// Vocab file: header `#lang <id>`, then `<char>\t<count>` sorted by
    /// codepoint.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("#lang {}\n", self.language);
        for (c, n) in self.freq.iter() {
            out.push(c);
            out.push('\t');
            out.push_str(&n.to_string());
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Vocab> {
        let path = path.as_ref();
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = data.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty vocab file"))?;
        let id = header
            .strip_prefix("#lang ")
            .ok_or_else(|| Error::parse(1, "expected `#lang <id>` header"))?;
        let language = LanguageId::new(id.trim())?;
        let mut freq = CharFrequency::default();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut chars = line.chars();
            let c = chars
                .next()
                .ok_or_else(|| Error::parse(i + 1, "empty vocab line"))?;
            let rest = chars.as_str();
            let count = rest
                .strip_prefix('\t')
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or_else(|| Error::parse(i + 1, "expected `<char>\\t<count>`"))?;
            freq.add_char(c, count);
        }
        Vocab::new(language, freq)
    }
}

/// Build a language's vocab from the manifest texts labeled with that
/// language. Texts are assumed already cleaned.
pub fn build_vocab(m: &Manifest, lang: &LanguageId) -> Result<Vocab> {
    let freq = CharFrequency::from_texts(
        m.entries()
            .iter()
            .filter(|u| u.language.as_ref() == Some(lang))
            .map(|u| u.text.as_str()),
    );
    Vocab::new(lang.clone(), freq)
}

/// Union character set with element-wise frequency sums.
pub fn vocab_union(vocabs: &[Vocab], name: LanguageId) -> Result<Vocab> {
    if vocabs.is_empty() {
        return Err(Error::EmptyVocab(name.as_str().to_string()));
    }
    let mut freq = CharFrequency::default();
    for v in vocabs {
        freq.merge(&v.freq);
    }
    Vocab::new(name, freq)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabDiff {
    pub only_a: BTreeSet<char>,
    pub only_b: BTreeSet<char>,
    pub shared: BTreeSet<char>,
}

impl VocabDiff {
    pub fn symmetric_difference_size(&self) -> usize {
        self.only_a.len() + self.only_b.len()
    }
}

pub fn vocab_diff(a: &Vocab, b: &Vocab) -> VocabDiff {
    VocabDiff {
        only_a: a.chars.difference(&b.chars).copied().collect(),
        only_b: b.chars.difference(&a.chars).copied().collect(),
        shared: a.chars.intersection(&b.chars).copied().collect(),
    }
}

/// All registered vocabs plus the characters shared by two or more of them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VocabRegistry {
    vocabs: BTreeMap<LanguageId, Vocab>,
    shared: BTreeSet<char>,
    /// Relabeling table for merged languages: old id -> merged id.
    pub merged_from: BTreeMap<LanguageId, LanguageId>,
}

impl VocabRegistry {
    pub fn new(vocabs: impl IntoIterator<Item = Vocab>) -> Result<Self> {
        let mut reg = VocabRegistry::default();
        for v in vocabs {
            if reg.vocabs.contains_key(&v.language) {
                return Err(Error::Invalid(format!(
                    "duplicate vocab for language \"{}\"",
                    v.language
                )));
            }
            reg.vocabs.insert(v.language.clone(), v);
        }
        reg.recompute_shared();
        Ok(reg)
    }

    fn recompute_shared(&mut self) {
        let mut seen: BTreeMap<char, usize> = BTreeMap::new();
        for v in self.vocabs.values() {
            for &c in &v.chars {
                *seen.entry(c).or_insert(0) += 1;
            }
        }
        self.shared = seen
            .into_iter()
            .filter(|&(_, n)| n >= 2)
            .map(|(c, _)| c)
            .collect();
    }

    pub fn languages(&self) -> impl Iterator<Item = &LanguageId> {
        self.vocabs.keys()
    }

    pub fn get(&self, lang: &LanguageId) -> Option<&Vocab> {
        self.vocabs.get(lang)
    }

    pub fn vocabs(&self) -> impl Iterator<Item = &Vocab> {
        self.vocabs.values()
    }

    pub fn len(&self) -> usize {
        self.vocabs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabs.is_empty()
    }

    /// Characters appearing in at least two vocabs.
    pub fn shared(&self) -> &BTreeSet<char> {
        &self.shared
    }

    /// Unordered language pairs whose symmetric difference is at most
    /// `max_sym_diff`, sorted ascending by size then lexicographically.
    pub fn propose_mergers(
        &self,
        max_sym_diff: usize,
    ) -> Vec<(LanguageId, LanguageId, usize)> {
        let langs: Vec<&LanguageId> = self.vocabs.keys().collect();
        let mut out = Vec::new();
        for i in 0..langs.len() {
            for j in i + 1..langs.len() {
                let d = vocab_diff(&self.vocabs[langs[i]], &self.vocabs[langs[j]])
                    .symmetric_difference_size();
                if d <= max_sym_diff {
                    out.push((langs[i].clone(), langs[j].clone(), d));
                }
            }
        }
        out.sort_by(|x, y| x.2.cmp(&y.2).then_with(|| (&x.0, &x.1).cmp(&(&y.0, &y.1))));
        out
    }

    /// Replace languages `a` and `b` with their union under the id `merged`,
    /// recording the relabeling for manifest updates.
    pub fn merge_languages(
        &self,
        a: &LanguageId,
        b: &LanguageId,
        merged: LanguageId,
    ) -> Result<VocabRegistry> {
        if a == b {
            return Err(Error::Invalid(format!(
                "cannot merge language \"{a}\" with itself"
            )));
        }
        let va = self
            .vocabs
            .get(a)
            .ok_or_else(|| Error::UnknownLanguage(a.as_str().to_string()))?;
        let vb = self
            .vocabs
            .get(b)
            .ok_or_else(|| Error::UnknownLanguage(b.as_str().to_string()))?;
        let union = vocab_union(&[va.clone(), vb.clone()], merged.clone())?;
        let mut reg = self.clone();
        reg.vocabs.remove(a);
        reg.vocabs.remove(b);
        reg.vocabs.insert(merged.clone(), union);
        reg.merged_from.insert(a.clone(), merged.clone());
        reg.merged_from.insert(b.clone(), merged);
        reg.recompute_shared();
        Ok(reg)
    }

    /// Apply the merger relabeling table to a manifest's language labels.
    pub fn relabel_manifest(&self, m: &Manifest) -> Result<Manifest> {
        m.map_entries(|mut u| {
            if let Some(lang) = &u.language {
                if let Some(merged) = self.merged_from.get(lang) {
                    u.language = Some(merged.clone());
                }
            }
            u
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Utterance;

    fn lang(s: &str) -> LanguageId {
        LanguageId::new(s).unwrap()
    }

    fn vocab_of(l: &str, chars: &[(char, u64)]) -> Vocab {
        let mut freq = CharFrequency::default();
        for &(c, n) in chars {
            freq.add_char(c, n);
        }
        Vocab::new(lang(l), freq).unwrap()
    }

    #[test]
    fn build_vocab_counts_chars() {
        let m = Manifest::from_entries(vec![
            Utterance {
                language: Some(lang("x")),
                ..Utterance::new("u1", "ab")
            },
            Utterance {
                language: Some(lang("x")),
                ..Utterance::new("u2", "bc")
            },
        ])
        .unwrap();
        let v = build_vocab(&m, &lang("x")).unwrap();
        assert_eq!(v.chars, ['a', 'b', 'c'].into_iter().collect());
        assert_eq!(v.freq.get('a'), 1);
        assert_eq!(v.freq.get('b'), 2);
        assert_eq!(v.freq.get('c'), 1);
    }

    #[test]
    fn build_vocab_empty_is_error() {
        let m = Manifest::from_entries(vec![]).unwrap();
        assert!(matches!(
            build_vocab(&m, &lang("x")),
            Err(Error::EmptyVocab(_))
        ));
    }

    #[test]
    fn union_sums_frequencies() {
        let a = vocab_of("a", &[('a', 2), ('b', 1)]);
        let b = vocab_of("b", &[('a', 3), ('c', 1)]);
        let u = vocab_union(&[a.clone(), b], lang("u")).unwrap();
        assert_eq!(u.chars, ['a', 'b', 'c'].into_iter().collect());
        assert_eq!(u.freq.get('a'), 5);
        // single vocab -> itself relabeled
        let single = vocab_union(&[a.clone()], lang("solo")).unwrap();
        assert_eq!(single.chars, a.chars);
        assert_eq!(single.language, lang("solo"));
    }

    #[test]
    fn diff_partitions_union() {
        let a = vocab_of("a", &[('a', 1), ('b', 1), ('c', 1)]);
        let b = vocab_of("b", &[('a', 1), ('b', 1), ('d', 1)]);
        let d = vocab_diff(&a, &b);
        assert_eq!(d.only_a, ['c'].into_iter().collect());
        assert_eq!(d.only_b, ['d'].into_iter().collect());
        assert_eq!(d.shared, ['a', 'b'].into_iter().collect());
        assert_eq!(d.symmetric_difference_size(), 2);
        let identical = vocab_diff(&a, &a);
        assert!(identical.only_a.is_empty() && identical.only_b.is_empty());
    }

    #[test]
    fn propose_mergers_sorted() {
        let reg = VocabRegistry::new([
            vocab_of("x", &[('a', 1), ('b', 1)]),
            vocab_of("y", &[('a', 1), ('b', 1)]),
            vocab_of("z", &[('p', 1), ('q', 1)]),
        ])
        .unwrap();
        assert_eq!(reg.propose_mergers(0), vec![(lang("x"), lang("y"), 0)]);
        let all = reg.propose_mergers(100);
        assert_eq!(all.len(), 3);
        assert_eq!(all[0], (lang("x"), lang("y"), 0));
        assert_eq!(all[1].2, 4);
        assert_eq!(all[2].2, 4);
        assert!(VocabRegistry::default().propose_mergers(10).is_empty());
    }

    #[test]
    fn merge_replaces_languages_and_relabels() {
        let reg = VocabRegistry::new([
            vocab_of("hindi", &[('क', 5), ('ख', 1)]),
            vocab_of("marathi", &[('क', 2), ('ळ', 1)]),
            vocab_of("odia", &[('ଅ', 1)]),
        ])
        .unwrap();
        let merged = reg
            .merge_languages(&lang("hindi"), &lang("marathi"), lang("hindmara"))
            .unwrap();
        assert!(merged.get(&lang("hindmara")).is_some());
        assert!(merged.get(&lang("hindi")).is_none());
        assert!(merged.get(&lang("marathi")).is_none());
        assert_eq!(merged.get(&lang("hindmara")).unwrap().freq.get('क'), 7);

        let m = Manifest::from_entries(vec![Utterance {
            language: Some(lang("hindi")),
            ..Utterance::new("u1", "क")
        }])
        .unwrap();
        let relabeled = merged.relabel_manifest(&m).unwrap();
        assert_eq!(relabeled.entries()[0].language, Some(lang("hindmara")));
    }

    #[test]
    fn merge_with_self_is_error() {
        let reg = VocabRegistry::new([vocab_of("x", &[('a', 1)])]).unwrap();
        assert!(reg.merge_languages(&lang("x"), &lang("x"), lang("xx")).is_err());
        assert!(matches!(
            reg.merge_languages(&lang("x"), &lang("nope"), lang("xx")),
            Err(Error::UnknownLanguage(_))
        ));
    }

    #[test]
    fn shared_tracks_overlap_after_merge() {
        let reg = VocabRegistry::new([
            vocab_of("x", &[('a', 1), ('b', 1)]),
            vocab_of("y", &[('b', 1), ('c', 1)]),
        ])
        .unwrap();
        assert_eq!(reg.shared(), &['b'].into_iter().collect());
        let merged = reg
            .merge_languages(&lang("x"), &lang("y"), lang("xy"))
            .unwrap();
        assert!(merged.shared().is_empty());
    }

    #[test]
    fn union_size_bound() {
        let a = vocab_of("a", &[('a', 1), ('b', 1)]);
        let b = vocab_of("b", &[('c', 1), ('d', 1)]);
        let u = vocab_union(&[a.clone(), b.clone()], lang("u")).unwrap();
        assert_eq!(u.len(), a.len() + b.len()); // disjoint -> equality
        let overlapping = vocab_of("c", &[('a', 1), ('z', 1)]);
        let u2 = vocab_union(&[a.clone(), overlapping], lang("v")).unwrap();
        assert!(u2.len() < a.len() + 2);
    }

    #[test]
    fn vocab_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        let v = vocab_of("hindi", &[('क', 5), ('ख', 1), ('a', 3)]);
        v.write(&p).unwrap();
        let loaded = Vocab::load(&p).unwrap();
        assert_eq!(v, loaded);
        // bit-exact round trip
        let bytes = std::fs::read(&p).unwrap();
        loaded.write(&p).unwrap();
        assert_eq!(bytes, std::fs::read(&p).unwrap());
    }
}
