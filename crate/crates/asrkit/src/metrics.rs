//! Token alignment, WER, and transliterated WER (T-WER).
//!
//! T-WER folds the transliteration table into the alignment itself: a
//! substitution whose token pair is listed in the table costs 0 and counts as
//! a match. This keeps the alignment optimal and makes `t_wer <= wer` hold by
//! construction.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::LanguageId;
use crate::error::{Error, Result};

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Unordered Latin/native word pairs considered equivalent during scoring.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransliterationTable {
    pairs: BTreeSet<(String, String)>,
    pub native_script: Option<LanguageId>,
}

impl TransliterationTable {
    pub fn new() -> Self {
        TransliterationTable::default()
    }

    /// Insert a pair; exactly one side must be Latin-script.
    pub fn insert(&mut self, latin: &str, native: &str) -> Result<()> {
        let is_latin = |w: &str| w.chars().all(|c| c.is_ascii());
        if is_latin(latin) && is_latin(native) {
            return Err(Error::Invalid(format!(
                "transliteration pair \"{latin}\" / \"{native}\" relates two Latin words"
            )));
        }
        self.pairs.insert((latin.to_string(), native.to_string()));
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    /// Symmetric lookup.
    pub fn equivalent(&self, a: &str, b: &str) -> bool {
        self.pairs.contains(&(a.to_string(), b.to_string()))
            || self.pairs.contains(&(b.to_string(), a.to_string()))
    }

    /// TSV: `latin_word\tnative_word` per line, UTF-8.
    pub fn load(path: impl AsRef<Path>) -> Result<TransliterationTable> {
        let path = path.as_ref();
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table = TransliterationTable::new();
        for (i, line) in data.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (latin, native) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected `latin\\tnative`"))?;
            table.insert(latin.trim(), native.trim())?;
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum AlignOp {
    /// Tokens equal, or listed as transliteration equivalents.
    Match { ref_tok: String, hyp_tok: String },
    Substitution { ref_tok: String, hyp_tok: String },
    Deletion { ref_tok: String },
    Insertion { hyp_tok: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Alignment {
    pub ops: Vec<AlignOp>,
    pub cost: usize,
}

impl Alignment {
    pub fn counts(&self) -> (usize, usize, usize) {
        let (mut sub, mut del, mut ins) = (0, 0, 0);
        for op in &self.ops {
            match op {
                AlignOp::Match { .. } => {}
                AlignOp::Substitution { .. } => sub += 1,
                AlignOp::Deletion { .. } => del += 1,
                AlignOp::Insertion { .. } => ins += 1,
            }
        }
        (sub, del, ins)
    }

    /// Apply the ops to the reference, reproducing the hypothesis.
    pub fn replay(&self) -> Vec<String> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                AlignOp::Match { hyp_tok, .. } => Some(hyp_tok.clone()),
                AlignOp::Substitution { hyp_tok, .. } => Some(hyp_tok.clone()),
                AlignOp::Deletion { .. } => None,
                AlignOp::Insertion { hyp_tok } => Some(hyp_tok.clone()),
            })
            .collect()
    }
}

/// Minimum-cost token alignment. Substitution cost is 0 for equal or
/// table-equivalent tokens, 1 otherwise; deletions and insertions cost 1.
/// On equal cost the backtrace prefers match/substitution, then deletion,
/// then insertion.
pub fn align(ref_toks: &[String], hyp_toks: &[String], equiv: Option<&TransliterationTable>) -> Alignment {
    let n = ref_toks.len();
    let m = hyp_toks.len();
    let matches = |i: usize, j: usize| {
        ref_toks[i] == hyp_toks[j]
            || equiv.is_some_and(|t| t.equivalent(&ref_toks[i], &hyp_toks[j]))
    };

    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in 0..=n {
        dp[i][0] = i;
    }
    for j in 0..=m {
        dp[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = dp[i - 1][j - 1] + usize::from(!matches(i - 1, j - 1));
            let del = dp[i - 1][j] + 1;
            let ins = dp[i][j - 1] + 1;
            dp[i][j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let is_match = matches(i - 1, j - 1);
            let diag = dp[i - 1][j - 1] + usize::from(!is_match);
            if dp[i][j] == diag {
                ops.push(if is_match {
                    AlignOp::Match {
                        ref_tok: ref_toks[i - 1].clone(),
                        hyp_tok: hyp_toks[j - 1].clone(),
                    }
                } else {
                    AlignOp::Substitution {
                        ref_tok: ref_toks[i - 1].clone(),
                        hyp_tok: hyp_toks[j - 1].clone(),
                    }
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[i][j] == dp[i - 1][j] + 1 {
            ops.push(AlignOp::Deletion {
                ref_tok: ref_toks[i - 1].clone(),
            });
            i -= 1;
        } else {
            ops.push(AlignOp::Insertion {
                hyp_tok: hyp_toks[j - 1].clone(),
            });
            j -= 1;
        }
    }
    ops.reverse();
    Alignment { ops, cost: dp[n][m] }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WerStats {
    pub n_ref: usize,
    pub sub: usize,
    pub del: usize,
    pub ins: usize,
    pub wer_percent: f64,
}

impl WerStats {
    fn from_alignment(n_ref: usize, a: &Alignment) -> WerStats {
        let (sub, del, ins) = a.counts();
        WerStats {
            n_ref,
            sub,
            del,
            ins,
            wer_percent: 100.0 * (sub + del + ins) as f64 / n_ref as f64,
        }
    }

    pub fn errors(&self) -> usize {
        self.sub + self.del + self.ins
    }
}

pub fn wer(ref_toks: &[String], hyp_toks: &[String]) -> Result<WerStats> {
    if ref_toks.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(WerStats::from_alignment(ref_toks.len(), &align(ref_toks, hyp_toks, None)))
}

pub fn t_wer(
    ref_toks: &[String],
    hyp_toks: &[String],
    table: &TransliterationTable,
) -> Result<WerStats> {
    if ref_toks.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(WerStats::from_alignment(
        ref_toks.len(),
        &align(ref_toks, hyp_toks, Some(table)),
    ))
}

/// Half-up rounding to 2 decimal places, as printed in reports.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Unweighted mean of per-group metric values.
pub fn macro_average(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusWer {
    pub pooled: WerStats,
    pub by_group: BTreeMap<String, WerStats>,
    /// Unweighted mean of per-group wer_percent.
    pub macro_average_percent: f64,
}

fn pool(stats: &[WerStats]) -> WerStats {
    let n_ref: usize = stats.iter().map(|s| s.n_ref).sum();
    let sub: usize = stats.iter().map(|s| s.sub).sum();
    let del: usize = stats.iter().map(|s| s.del).sum();
    let ins: usize = stats.iter().map(|s| s.ins).sum();
    WerStats {
        n_ref,
        sub,
        del,
        ins,
        wer_percent: if n_ref == 0 {
            0.0
        } else {
            100.0 * (sub + del + ins) as f64 / n_ref as f64
        },
    }
}

/// Pooled and per-group WER over (group, ref, hyp) triples. Pairs without a
/// group only contribute to the pooled figure.
pub fn corpus_wer(
    pairs: &[(Option<String>, Vec<String>, Vec<String>)],
    table: Option<&TransliterationTable>,
) -> Result<CorpusWer> {
    if pairs.iter().any(|(_, r, _)| r.is_empty()) {
        return Err(Error::EmptyReference);
    }
    let per_pair: Vec<(Option<String>, WerStats)> = pairs
        .par_iter()
        .map(|(group, r, h)| {
            let a = align(r, h, table);
            (group.clone(), WerStats::from_alignment(r.len(), &a))
        })
        .collect();

    let all: Vec<WerStats> = per_pair.iter().map(|(_, s)| *s).collect();
    let mut grouped: BTreeMap<String, Vec<WerStats>> = BTreeMap::new();
    for (group, s) in &per_pair {
        if let Some(g) = group {
            grouped.entry(g.clone()).or_default().push(*s);
        }
    }
    let by_group: BTreeMap<String, WerStats> = grouped
        .into_iter()
        .map(|(g, stats)| (g, pool(&stats)))
        .collect();
    let macro_average_percent =
        macro_average(&by_group.values().map(|s| s.wer_percent).collect::<Vec<_>>());
    Ok(CorpusWer {
        pooled: pool(&all),
        by_group,
        macro_average_percent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenize_splits_on_whitespace() {
        assert_eq!(toks("a b  c"), vec!["a", "b", "c"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("मेरी train"), vec!["मेरी", "train"]);
    }

    #[test]
    fn single_substitution() {
        let a = align(&toks("a b c"), &toks("a x c"), None);
        assert_eq!(a.cost, 1);
        assert_eq!(a.counts(), (1, 0, 0));
    }

    #[test]
    fn identity_alignment() {
        let a = align(&toks("a b c"), &toks("a b c"), None);
        assert_eq!(a.cost, 0);
        assert!(a.ops.iter().all(|op| matches!(op, AlignOp::Match { .. })));
    }

    #[test]
    fn transliteration_pair_counts_as_match() {
        let mut table = TransliterationTable::new();
        table.insert("train", "ट्रेन").unwrap();
        let a = align(&toks("train"), &toks("ट्रेन"), Some(&table));
        assert_eq!(a.cost, 0);
        assert!(matches!(&a.ops[0], AlignOp::Match { .. }));
    }

    #[test]
    fn latin_latin_pair_rejected() {
        let mut table = TransliterationTable::new();
        assert!(table.insert("train", "trane").is_err());
        table.insert("train", "ट्रेन").unwrap();
        assert!(table.equivalent("ट्रेन", "train")); // symmetric
    }

    #[test]
    fn wer_basic_cases() {
        let s = wer(&toks("a b c"), &toks("a x c")).unwrap();
        assert!((s.wer_percent - 100.0 / 3.0).abs() < 1e-9);
        let s = wer(&toks("a b"), &toks("")).unwrap();
        assert_eq!(s.del, 2);
        assert!((s.wer_percent - 100.0).abs() < 1e-12);
        let s = wer(&toks("a b"), &toks("a b")).unwrap();
        assert_eq!(s.wer_percent, 0.0);
        assert!(matches!(wer(&[], &toks("a")), Err(Error::EmptyReference)));
    }

    #[test]
    fn t_wer_code_switch_example() {
        let mut table = TransliterationTable::new();
        table.insert("train", "ट्रेन").unwrap();
        let r = toks("मेरी train लेट है");
        let h = toks("मेरी ट्रेन लेट है");
        let plain = wer(&r, &h).unwrap();
        let translit = t_wer(&r, &h, &table).unwrap();
        assert!((plain.wer_percent - 25.0).abs() < 1e-12);
        assert!((translit.wer_percent - 0.0).abs() < 1e-12);
    }

    #[test]
    fn empty_table_t_wer_equals_wer() {
        let table = TransliterationTable::new();
        let r = toks("a b c");
        let h = toks("a x y");
        assert_eq!(
            t_wer(&r, &h, &table).unwrap().wer_percent,
            wer(&r, &h).unwrap().wer_percent
        );
    }

    #[test]
    fn unrelated_native_word_does_not_help() {
        let mut table = TransliterationTable::new();
        table.insert("train", "ट्रेन").unwrap();
        let r = toks("train");
        let h = toks("गाड़ी");
        assert_eq!(
            t_wer(&r, &h, &table).unwrap().wer_percent,
            wer(&r, &h).unwrap().wer_percent
        );
    }

    #[test]
    fn role_symmetry() {
        let r = toks("a b c d");
        let h = toks("a c x");
        let fwd = wer(&r, &h).unwrap();
        let bwd = wer(&h, &r).unwrap();
        assert_eq!(fwd.sub, bwd.sub);
        assert_eq!(fwd.del, bwd.ins);
        assert_eq!(fwd.ins, bwd.del);
    }

    #[test]
    fn replay_reproduces_hypothesis() {
        let mut table = TransliterationTable::new();
        table.insert("train", "ट्रेन").unwrap();
        let r = toks("मेरी train लेट");
        let h = toks("मेरी ट्रेन x लेट");
        let a = align(&r, &h, Some(&table));
        assert_eq!(a.replay(), h);
    }

    #[test]
    fn corpus_wer_table5_macro() {
        let vals = [12.24, 39.74, 27.10, 27.20, 22.43, 30.65];
        assert!((round2(macro_average(&vals)) - 26.56).abs() < 0.005);
        let baseline = [37.2, 29.04, 38.46, 34.09, 31.44, 26.15];
        assert!((round2(macro_average(&baseline)) - 32.73).abs() < 0.005);
    }

    #[test]
    fn corpus_wer_pools_and_groups() {
        let pairs = vec![
            (Some("x".to_string()), toks("a b"), toks("a b")),
            (Some("x".to_string()), toks("c d"), toks("c x")),
            (Some("y".to_string()), toks("e f"), toks("q r")),
            (None, toks("g"), toks("g")),
        ];
        let c = corpus_wer(&pairs, None).unwrap();
        assert_eq!(c.pooled.n_ref, 7);
        assert_eq!(c.pooled.errors(), 3);
        assert!((c.by_group["x"].wer_percent - 25.0).abs() < 1e-12);
        assert!((c.by_group["y"].wer_percent - 100.0).abs() < 1e-12);
        assert!((c.macro_average_percent - 62.5).abs() < 1e-12);
    }

    #[test]
    fn single_pair_pool_equals_pair() {
        let pairs = vec![(None, toks("a b c"), toks("a x c"))];
        let c = corpus_wer(&pairs, None).unwrap();
        let s = wer(&toks("a b c"), &toks("a x c")).unwrap();
        assert_eq!(c.pooled, s);
    }

    #[test]
    fn round2_is_half_up() {
        assert_eq!(round2(23.856), 23.86);
        assert_eq!(round2(23.854), 23.85);
        assert_eq!(round2(26.625), 26.63);
    }
}
