//! Orchestration of the four system configurations over pluggable decoders:
//! M1 (one common model), M2 (common model -> LID -> monolingual models),
//! C1/C2 (code-switch pairs, label provided explicitly).
//!
//! The neural acoustic model is out of scope; decoders either replay
//! precomputed hypotheses from a file or corrupt the reference text through a
//! seeded noisy channel, which is enough to exercise the routing logic and
//! its misroute failure mode at desk scale.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{LanguageId, Manifest, Utterance};
use crate::error::{Error, Result};
use crate::lid::{self, ConfusionMatrix, LidPolicy};
use crate::lm::{rescore_nbest, Hypothesis, NGramModel};
use crate::metrics::{
    align, macro_average, tokenize, TransliterationTable, WerStats,
};
use crate::seed;
use crate::vocab::{build_vocab, VocabRegistry};

pub trait Decoder: Sync {
    fn decode(&self, utt: &Utterance) -> Result<String>;

    fn decode_nbest(&self, utt: &Utterance) -> Result<Vec<Hypothesis>> {
        Ok(vec![Hypothesis {
            utt_id: utt.utt_id.clone(),
            text: self.decode(utt)?,
            acoustic_score: 0.0,
        }])
    }
}

// ------------------------------------------------------------------ replay

/// Returns precomputed hypotheses from a file; a lookup miss is an error.
#[derive(Debug, Clone, Default)]
pub struct ReplayDecoder {
    table: BTreeMap<String, Vec<Hypothesis>>,
}

#[derive(Deserialize)]
struct NBestLine {
    utt_id: String,
    nbest: Vec<NBestEntry>,
}

#[derive(Deserialize)]
struct NBestEntry {
    text: String,
    score: f64,
}

impl ReplayDecoder {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        let table = pairs
            .into_iter()
            .map(|(id, text)| {
                let h = Hypothesis {
                    utt_id: id.clone(),
                    text,
                    acoustic_score: 0.0,
                };
                (id, vec![h])
            })
            .collect();
        ReplayDecoder { table }
    }

    /// Echo decoder: replays every reference text of the manifest.
    pub fn echo(m: &Manifest) -> Self {
        Self::from_pairs(
            m.entries()
                .iter()
                .map(|u| (u.utt_id.clone(), u.text.clone())),
        )
    }

    /// TSV `utt_id\thypothesis`, one line per utterance.
    pub fn from_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (i, line) in data.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (id, hyp) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected `utt_id\\thypothesis`"))?;
            pairs.push((id.to_string(), hyp.to_string()));
        }
        Ok(Self::from_pairs(pairs))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &Vec<Hypothesis>)> {
        self.table.iter()
    }

    /// JSONL with n-best lists: `{"utt_id": ..., "nbest": [{"text": ..., "score": ...}]}`.
    pub fn from_nbest_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut table = BTreeMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: NBestLine = serde_json::from_str(&line)
                .map_err(|e| Error::parse(i + 1, format!("bad n-best record: {e}")))?;
            let hyps: Vec<Hypothesis> = parsed
                .nbest
                .into_iter()
                .map(|e| Hypothesis {
                    utt_id: parsed.utt_id.clone(),
                    text: e.text,
                    acoustic_score: e.score,
                })
                .collect();
            table.insert(parsed.utt_id, hyps);
        }
        Ok(ReplayDecoder { table })
    }
}

impl Decoder for ReplayDecoder {
    fn decode(&self, utt: &Utterance) -> Result<String> {
        let hyps = self
            .table
            .get(&utt.utt_id)
            .ok_or_else(|| Error::ReplayMiss(utt.utt_id.clone()))?;
        let best = hyps
            .iter()
            .max_by(|a, b| a.acoustic_score.total_cmp(&b.acoustic_score))
            .ok_or_else(|| Error::ReplayMiss(utt.utt_id.clone()))?;
        Ok(best.text.clone())
    }

    fn decode_nbest(&self, utt: &Utterance) -> Result<Vec<Hypothesis>> {
        self.table
            .get(&utt.utt_id)
            .cloned()
            .ok_or_else(|| Error::ReplayMiss(utt.utt_id.clone()))
    }
}

// --------------------------------------------------------------- synthetic

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMix {
    pub sub: f64,
    pub del: f64,
    pub ins: f64,
}

impl Default for ErrorMix {
    fn default() -> Self {
        ErrorMix {
            sub: 0.8,
            del: 0.1,
            ins: 0.1,
        }
    }
}

/// Noisy-channel decoder: corrupts the reference text character by
/// character with a seeded RNG. With `char_error_rate` 0 it is the identity.
#[derive(Debug, Clone)]
pub struct SyntheticDecoder {
    pub char_error_rate: f64,
    pub error_mix: ErrorMix,
    /// Pool corrupted characters are drawn from; mixing scripts here lets the
    /// corruption inject cross-script characters on purpose.
    pub confusion_alphabet: Vec<char>,
    pub seed: u64,
}

impl SyntheticDecoder {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.char_error_rate) {
            return Err(Error::Invalid(format!(
                "char_error_rate {} outside [0, 1]",
                self.char_error_rate
            )));
        }
        let total = self.error_mix.sub + self.error_mix.del + self.error_mix.ins;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("error mix sums to {total}, want 1")));
        }
        if self.confusion_alphabet.is_empty() && self.char_error_rate > 0.0 {
            return Err(Error::Invalid("empty confusion alphabet".into()));
        }
        Ok(())
    }
}

impl Decoder for SyntheticDecoder {
    fn decode(&self, utt: &Utterance) -> Result<String> {
        self.validate()?;
        if self.char_error_rate == 0.0 {
            return Ok(utt.text.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, &utt.utt_id));
        let mut out = String::with_capacity(utt.text.len());
        for c in utt.text.chars() {
            if c.is_whitespace() || rng.gen::<f64>() >= self.char_error_rate {
                out.push(c);
                continue;
            }
            let roll: f64 = rng.gen();
            if roll < self.error_mix.sub {
                out.push(*self.confusion_alphabet.choose(&mut rng).expect("nonempty"));
            } else if roll < self.error_mix.sub + self.error_mix.del {
                // deletion: emit nothing
            } else {
                out.push(c);
                out.push(*self.confusion_alphabet.choose(&mut rng).expect("nonempty"));
            }
        }
        Ok(out)
    }
}

// -------------------------------------------------------------- rescoring

/// Wraps a decoder with LM shallow fusion over its n-best list.
pub struct RescoringDecoder<'a, D: Decoder> {
    pub inner: D,
    pub model: &'a NGramModel,
    pub alpha: f64,
    pub beta: f64,
    pub beam: usize,
}

impl<D: Decoder> Decoder for RescoringDecoder<'_, D> {
    fn decode(&self, utt: &Utterance) -> Result<String> {
        let hyps = self.inner.decode_nbest(utt)?;
        Ok(rescore_nbest(&hyps, self.model, self.alpha, self.beta, self.beam)?.text)
    }
}

// ----------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub utt_id: String,
    pub gold_language: Option<String>,
    pub predicted_language: Option<String>,
    pub ref_text: String,
    pub hyp_text: String,
    pub wer: WerStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_wer: Option<WerStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub per_utterance: Vec<ReportRow>,
    pub per_language: BTreeMap<String, WerStats>,
    pub macro_wer_percent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_language_t: Option<BTreeMap<String, WerStats>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macro_t_wer_percent: Option<f64>,
    pub pooled: WerStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lid_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lid_confusion: Option<ConfusionMatrix>,
}

impl PipelineReport {
    /// Plain-text summary table: one row per language plus macro average.
    pub fn render_table(&self) -> String {
        let with_t = self.per_language_t.is_some();
        let mut out = String::new();
        out.push_str(if with_t {
            "Language                  WER    T-WER\n"
        } else {
            "Language                  WER\n"
        });
        for (lang, stats) in &self.per_language {
            out.push_str(&format!("{lang:<22} {:>7.2}", stats.wer_percent));
            if let Some(per_t) = &self.per_language_t {
                out.push_str(&format!("  {:>7.2}", per_t[lang].wer_percent));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<22} {:>7.2}", "Average", self.macro_wer_percent));
        if let Some(t) = self.macro_t_wer_percent {
            out.push_str(&format!("  {t:>7.2}"));
        }
        out.push('\n');
        if let Some(acc) = self.lid_accuracy {
            out.push_str(&format!("LID accuracy: {acc:.4}\n"));
        }
        out
    }
}

fn pool_rows<'a>(stats: impl Iterator<Item = &'a WerStats>) -> WerStats {
    let mut n_ref = 0;
    let (mut sub, mut del, mut ins) = (0, 0, 0);
    for s in stats {
        n_ref += s.n_ref;
        sub += s.sub;
        del += s.del;
        ins += s.ins;
    }
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

fn wer_of(ref_text: &str, hyp_text: &str, table: Option<&TransliterationTable>) -> Result<WerStats> {
    let r = tokenize(ref_text);
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    let h = tokenize(hyp_text);
    let a = align(&r, &h, table);
    let (sub, del, ins) = a.counts();
    Ok(WerStats {
        n_ref: r.len(),
        sub,
        del,
        ins,
        wer_percent: 100.0 * (sub + del + ins) as f64 / r.len() as f64,
    })
}

fn build_report(
    rows: Vec<ReportRow>,
    lid: Option<(f64, ConfusionMatrix)>,
    with_t: bool,
) -> PipelineReport {
    let group_of = |row: &ReportRow| {
        row.gold_language
            .clone()
            .unwrap_or_else(|| "unknown".to_string())
    };
    let mut grouped: BTreeMap<String, Vec<&ReportRow>> = BTreeMap::new();
    for row in &rows {
        grouped.entry(group_of(row)).or_default().push(row);
    }
    let per_language: BTreeMap<String, WerStats> = grouped
        .iter()
        .map(|(g, rs)| (g.clone(), pool_rows(rs.iter().map(|r| &r.wer))))
        .collect();
    let macro_wer_percent =
        macro_average(&per_language.values().map(|s| s.wer_percent).collect::<Vec<_>>());
    let (per_language_t, macro_t_wer_percent) = if with_t {
        let per: BTreeMap<String, WerStats> = grouped
            .iter()
            .map(|(g, rs)| {
                (
                    g.clone(),
                    pool_rows(rs.iter().filter_map(|r| r.t_wer.as_ref())),
                )
            })
            .collect();
        let mac = macro_average(&per.values().map(|s| s.wer_percent).collect::<Vec<_>>());
        (Some(per), Some(mac))
    } else {
        (None, None)
    };
    let pooled = pool_rows(rows.iter().map(|r| &r.wer));
    let (lid_accuracy, lid_confusion) = match lid {
        Some((acc, cm)) => (Some(acc), Some(cm)),
        None => (None, None),
    };
    PipelineReport {
        per_utterance: rows,
        per_language,
        macro_wer_percent,
        per_language_t,
        macro_t_wer_percent,
        pooled,
        lid_accuracy,
        lid_confusion,
    }
}

// ------------------------------------------------------------------- runs

/// Approach M1: decode everything with the common multilingual decoder.
pub fn run_m1(
    common: &dyn Decoder,
    m: &Manifest,
    table: Option<&TransliterationTable>,
) -> Result<PipelineReport> {
    let rows: Vec<ReportRow> = m
        .entries()
        .par_iter()
        .map(|u| -> Result<ReportRow> {
            let hyp = common.decode(u)?;
            Ok(ReportRow {
                utt_id: u.utt_id.clone(),
                gold_language: u.language.as_ref().map(|l| l.as_str().to_string()),
                predicted_language: None,
                wer: wer_of(&u.text, &hyp, None)?,
                t_wer: table.map(|t| wer_of(&u.text, &hyp, Some(t))).transpose()?,
                ref_text: u.text.clone(),
                hyp_text: hyp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(build_report(rows, None, table.is_some()))
}

/// Approach M2: common decode, LID on the transcript, re-decode with the
/// selected monolingual decoder. With `oracle_lid` the gold label replaces
/// the prediction (diagnostic upper bound).
pub fn run_m2(
    common: &dyn Decoder,
    monolingual: &BTreeMap<LanguageId, Box<dyn Decoder + Sync>>,
    reg: &VocabRegistry,
    policy: &LidPolicy,
    m: &Manifest,
    oracle_lid: bool,
) -> Result<PipelineReport> {
    policy.validate(reg)?;
    for lang in reg.languages() {
        if !monolingual.contains_key(lang) {
            return Err(Error::MissingDecoder(lang.as_str().to_string()));
        }
    }
    let rows: Vec<ReportRow> = m
        .entries()
        .par_iter()
        .map(|u| -> Result<ReportRow> {
            let transcript = common.decode(u)?;
            let predicted = if oracle_lid {
                u.language
                    .clone()
                    .ok_or_else(|| Error::Invalid(format!("no gold label for \"{}\"", u.utt_id)))?
            } else {
                lid::identify_language(&transcript, reg, policy).predicted
            };
            let decoder = monolingual
                .get(&predicted)
                .ok_or_else(|| Error::MissingDecoder(predicted.as_str().to_string()))?;
            let hyp = decoder.decode(u)?;
            Ok(ReportRow {
                utt_id: u.utt_id.clone(),
                gold_language: u.language.as_ref().map(|l| l.as_str().to_string()),
                predicted_language: Some(predicted.as_str().to_string()),
                wer: wer_of(&u.text, &hyp, None)?,
                t_wer: None,
                ref_text: u.text.clone(),
                hyp_text: hyp,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut confusion = ConfusionMatrix::default();
    let mut any_gold = false;
    for row in &rows {
        if let (Some(g), Some(p)) = (&row.gold_language, &row.predicted_language) {
            any_gold = true;
            confusion.add(&LanguageId::new(g)?, &LanguageId::new(p)?);
        }
    }
    let lid = any_gold.then(|| (confusion.accuracy(), confusion));
    Ok(build_report(rows, lid, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeSwitchMode {
    /// One decoder for every pair.
    C1,
    /// Decoder selected by the utterance's pair label.
    C2,
}

/// Code-switch evaluation. The pair label is taken from the utterance's
/// language field; there is no LID stage.
pub fn run_codeswitch(
    pair_decoders: &BTreeMap<LanguageId, Box<dyn Decoder + Sync>>,
    m: &Manifest,
    table: &TransliterationTable,
    mode: CodeSwitchMode,
) -> Result<PipelineReport> {
    if mode == CodeSwitchMode::C1 && pair_decoders.len() != 1 {
        return Err(Error::Invalid(format!(
            "C1 expects exactly one decoder, got {}",
            pair_decoders.len()
        )));
    }
    let common = pair_decoders.values().next();
    let rows: Vec<ReportRow> = m
        .entries()
        .par_iter()
        .map(|u| -> Result<ReportRow> {
            let pair = u
                .language
                .as_ref()
                .ok_or_else(|| Error::Invalid(format!("no pair label for \"{}\"", u.utt_id)))?;
            let decoder = match mode {
                CodeSwitchMode::C1 => common.expect("checked above"),
                CodeSwitchMode::C2 => pair_decoders
                    .get(pair)
                    .ok_or_else(|| Error::MissingDecoder(pair.as_str().to_string()))?,
            };
            let hyp = decoder.decode(u)?;
            Ok(ReportRow {
                utt_id: u.utt_id.clone(),
                gold_language: Some(pair.as_str().to_string()),
                predicted_language: None,
                wer: wer_of(&u.text, &hyp, None)?,
                t_wer: Some(wer_of(&u.text, &hyp, Some(table))?),
                ref_text: u.text.clone(),
                hyp_text: hyp,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(build_report(rows, None, true))
}

// -------------------------------------------------------------- simulation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub n_languages: usize,
    pub utterances_per_language: usize,
    pub chars_per_utterance: usize,
    pub common_cer: f64,
    pub mono_cer: f64,
    /// Per-language overrides of `mono_cer`, keyed by language id.
    pub mono_cer_overrides: BTreeMap<String, f64>,
    pub corpus_seed: u64,
    pub decoder_seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            n_languages: 6,
            utterances_per_language: 200,
            chars_per_utterance: 80,
            common_cer: 0.10,
            mono_cer: 0.05,
            mono_cer_overrides: BTreeMap::new(),
            corpus_seed: 7,
            decoder_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateOutcome {
    pub config: SimulateConfig,
    pub m1_report: PipelineReport,
    pub m2_report: PipelineReport,
}

/// Disjoint 20-character alphabet for synthetic language `i`, drawn from a
/// block of CJK ideographs (assigned, NFC-stable, no combining marks).
pub fn synthetic_alphabet(i: usize) -> Vec<char> {
    (0..20)
        .map(|j| char::from_u32(0x4E00 + (i as u32) * 32 + j).expect("valid scalar"))
        .collect()
}

pub fn synthetic_language_id(i: usize) -> LanguageId {
    LanguageId::new(&format!("lang{i:02}")).expect("valid id")
}

/// Generate a labeled corpus where each language writes in its own disjoint
/// alphabet. Deterministic in the seed.
pub fn synthetic_corpus(
    n_languages: usize,
    utterances_per_language: usize,
    chars_per_utterance: usize,
    corpus_seed: u64,
) -> Result<Manifest> {
    let mut entries = Vec::new();
    for i in 0..n_languages {
        let lang = synthetic_language_id(i);
        let alphabet = synthetic_alphabet(i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(corpus_seed, lang.as_str()));
        for u in 0..utterances_per_language {
            let mut text = String::new();
            let mut chars = 0;
            while chars < chars_per_utterance {
                if !text.is_empty() {
                    text.push(' ');
                }
                let word_len = rng.gen_range(3..=7);
                for _ in 0..word_len {
                    text.push(*alphabet.choose(&mut rng).expect("nonempty"));
                }
                chars += word_len;
            }
            entries.push(Utterance {
                utt_id: format!("{}_{u:04}", lang.as_str()),
                audio: None,
                text,
                language: Some(lang.clone()),
                duration_s: None,
            });
        }
    }
    Manifest::from_entries(entries)
}

/// Desk-scale reproduction of the M1-vs-M2 comparison: a synthetic corpus,
/// one common decoder at `common_cer`, and per-language decoders at
/// `mono_cer` behind the LID router.
pub fn simulate(config: &SimulateConfig) -> Result<SimulateOutcome> {
    let rates_ok = (0.0..=1.0).contains(&config.common_cer)
        && (0.0..=1.0).contains(&config.mono_cer)
        && config
            .mono_cer_overrides
            .values()
            .all(|r| (0.0..=1.0).contains(r));
    if !rates_ok {
        return Err(Error::Invalid("error rates must be in [0, 1]".into()));
    }
    if config.n_languages == 0 {
        return Err(Error::Invalid("need at least one language".into()));
    }
    let manifest = synthetic_corpus(
        config.n_languages,
        config.utterances_per_language,
        config.chars_per_utterance,
        config.corpus_seed,
    )?;

    let mut vocabs = Vec::new();
    let mut union_pool = Vec::new();
    for i in 0..config.n_languages {
        let lang = synthetic_language_id(i);
        vocabs.push(build_vocab(&manifest, &lang)?);
        union_pool.extend(synthetic_alphabet(i));
    }
    let reg = VocabRegistry::new(vocabs)?;
    let policy = LidPolicy::for_registry(&reg)?;

    let common = SyntheticDecoder {
        char_error_rate: config.common_cer,
        error_mix: ErrorMix::default(),
        confusion_alphabet: union_pool,
        seed: seed::derive(config.decoder_seed, "common"),
    };
    let mut monolingual: BTreeMap<LanguageId, Box<dyn Decoder + Sync>> = BTreeMap::new();
    for i in 0..config.n_languages {
        let lang = synthetic_language_id(i);
        let cer = config
            .mono_cer_overrides
            .get(lang.as_str())
            .copied()
            .unwrap_or(config.mono_cer);
        monolingual.insert(
            lang.clone(),
            Box::new(SyntheticDecoder {
                char_error_rate: cer,
                error_mix: ErrorMix::default(),
                confusion_alphabet: synthetic_alphabet(i),
                seed: seed::derive(config.decoder_seed, lang.as_str()),
            }),
        );
    }

    let m1_report = run_m1(&common, &manifest, None)?;
    let m2_report = run_m2(&common, &monolingual, &reg, &policy, &manifest, false)?;
    Ok(SimulateOutcome {
        config: config.clone(),
        m1_report,
        m2_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(id: &str, text: &str, lang: &str) -> Utterance {
        Utterance {
            utt_id: id.to_string(),
            audio: None,
            text: text.to_string(),
            language: Some(LanguageId::new(lang).unwrap()),
            duration_s: None,
        }
    }

    #[test]
    fn echo_decoder_gives_zero_wer() {
        let m = Manifest::from_entries(vec![
            labeled("u1", "a b c", "x"),
            labeled("u2", "d e", "y"),
        ])
        .unwrap();
        let report = run_m1(&ReplayDecoder::echo(&m), &m, None).unwrap();
        assert_eq!(report.pooled.wer_percent, 0.0);
        assert_eq!(report.macro_wer_percent, 0.0);
        assert_eq!(report.per_language.len(), 2);
    }

    #[test]
    fn replay_miss_is_error() {
        let m = Manifest::from_entries(vec![labeled("u1", "a", "x")]).unwrap();
        let dec = ReplayDecoder::from_pairs([("other".to_string(), "a".to_string())]);
        assert!(matches!(
            run_m1(&dec, &m, None),
            Err(Error::ReplayMiss(_))
        ));
    }

    #[test]
    fn synthetic_zero_cer_is_identity() {
        let m = Manifest::from_entries(vec![labeled("u1", "a b c", "x")]).unwrap();
        let dec = SyntheticDecoder {
            char_error_rate: 0.0,
            error_mix: ErrorMix::default(),
            confusion_alphabet: vec!['z'],
            seed: 1,
        };
        let report = run_m1(&dec, &m, None).unwrap();
        assert_eq!(report.pooled.wer_percent, 0.0);
    }

    #[test]
    fn synthetic_decoder_is_deterministic() {
        let u = labeled("u1", "abcdef ghijkl", "x");
        let dec = SyntheticDecoder {
            char_error_rate: 0.4,
            error_mix: ErrorMix::default(),
            confusion_alphabet: vec!['p', 'q', 'r'],
            seed: 3,
        };
        assert_eq!(dec.decode(&u).unwrap(), dec.decode(&u).unwrap());
    }

    #[test]
    fn m2_oracle_lid_with_echo_monos_is_perfect() {
        let outcome_manifest = synthetic_corpus(3, 5, 40, 11).unwrap();
        let mut vocabs = Vec::new();
        for i in 0..3 {
            vocabs.push(build_vocab(&outcome_manifest, &synthetic_language_id(i)).unwrap());
        }
        let reg = VocabRegistry::new(vocabs).unwrap();
        let policy = LidPolicy::for_registry(&reg).unwrap();
        let mut monos: BTreeMap<LanguageId, Box<dyn Decoder + Sync>> = BTreeMap::new();
        for i in 0..3 {
            monos.insert(
                synthetic_language_id(i),
                Box::new(ReplayDecoder::echo(&outcome_manifest)),
            );
        }
        let common = ReplayDecoder::echo(&outcome_manifest);
        let report = run_m2(&common, &monos, &reg, &policy, &outcome_manifest, true).unwrap();
        assert_eq!(report.pooled.wer_percent, 0.0);
        assert_eq!(report.lid_accuracy, Some(1.0));
    }

    #[test]
    fn m2_missing_decoder_is_error() {
        let m = synthetic_corpus(2, 2, 40, 1).unwrap();
        let reg = VocabRegistry::new(vec![
            build_vocab(&m, &synthetic_language_id(0)).unwrap(),
            build_vocab(&m, &synthetic_language_id(1)).unwrap(),
        ])
        .unwrap();
        let policy = LidPolicy::for_registry(&reg).unwrap();
        let mut monos: BTreeMap<LanguageId, Box<dyn Decoder + Sync>> = BTreeMap::new();
        monos.insert(
            synthetic_language_id(0),
            Box::new(ReplayDecoder::echo(&m)),
        );
        let common = ReplayDecoder::echo(&m);
        assert!(matches!(
            run_m2(&common, &monos, &reg, &policy, &m, false),
            Err(Error::MissingDecoder(_))
        ));
    }

    #[test]
    fn misroute_scores_against_wrong_decoder() {
        // one utterance whose transcript votes for the wrong language
        let lang_a = synthetic_language_id(0);
        let alpha_b: String = synthetic_alphabet(1)[..5].iter().collect();
        let m = Manifest::from_entries(vec![Utterance {
            utt_id: "u1".into(),
            audio: None,
            text: alpha_b.clone(), // written in language B's script
            language: Some(lang_a.clone()),
            duration_s: None,
        }])
        .unwrap();
        let corpus = synthetic_corpus(2, 3, 40, 5).unwrap();
        let reg = VocabRegistry::new(vec![
            build_vocab(&corpus, &synthetic_language_id(0)).unwrap(),
            build_vocab(&corpus, &synthetic_language_id(1)).unwrap(),
        ])
        .unwrap();
        let policy = LidPolicy::for_registry(&reg).unwrap();
        let mut monos: BTreeMap<LanguageId, Box<dyn Decoder + Sync>> = BTreeMap::new();
        // correct decoder echoes; wrong decoder outputs garbage
        monos.insert(lang_a.clone(), Box::new(ReplayDecoder::echo(&m)));
        monos.insert(
            synthetic_language_id(1),
            Box::new(ReplayDecoder::from_pairs([(
                "u1".to_string(),
                "wrong output entirely".to_string(),
            )])),
        );
        let report =
            run_m2(&ReplayDecoder::echo(&m), &monos, &reg, &policy, &m, false).unwrap();
        // routed to language B's decoder, so WER is high and LID accuracy 0
        assert!(report.pooled.wer_percent > 0.0);
        assert_eq!(report.lid_accuracy, Some(0.0));
    }

    #[test]
    fn codeswitch_echo_is_zero() {
        let m = Manifest::from_entries(vec![
            labeled("u1", "मेरी train लेट है", "hindi-english"),
            labeled("u2", "আমার bus আসছে", "bengali-english"),
        ])
        .unwrap();
        let mut decs: BTreeMap<LanguageId, Box<dyn Decoder + Sync>> = BTreeMap::new();
        decs.insert(
            LanguageId::new("common").unwrap(),
            Box::new(ReplayDecoder::echo(&m)),
        );
        let table = TransliterationTable::new();
        let report = run_codeswitch(&decs, &m, &table, CodeSwitchMode::C1).unwrap();
        assert_eq!(report.pooled.wer_percent, 0.0);
        assert_eq!(report.macro_t_wer_percent, Some(0.0));
    }

    #[test]
    fn codeswitch_c2_unknown_pair_is_error() {
        let m = Manifest::from_entries(vec![labeled("u1", "a b", "hindi-english")]).unwrap();
        let decs: BTreeMap<LanguageId, Box<dyn Decoder + Sync>> = BTreeMap::new();
        let table = TransliterationTable::new();
        assert!(run_codeswitch(&decs, &m, &table, CodeSwitchMode::C2).is_err());
    }

    #[test]
    fn codeswitch_translit_lowers_t_wer() {
        let m = Manifest::from_entries(vec![labeled(
            "u1",
            "मेरी train लेट है",
            "hindi-english",
        )])
        .unwrap();
        let dec = ReplayDecoder::from_pairs([(
            "u1".to_string(),
            "मेरी ट्रेन लेट है".to_string(),
        )]);
        let mut decs: BTreeMap<LanguageId, Box<dyn Decoder + Sync>> = BTreeMap::new();
        decs.insert(LanguageId::new("hindi-english").unwrap(), Box::new(dec));
        let mut table = TransliterationTable::new();
        table.insert("train", "ट्रेन").unwrap();
        let report = run_codeswitch(&decs, &m, &table, CodeSwitchMode::C2).unwrap();
        assert!((report.macro_wer_percent - 25.0).abs() < 1e-9);
        assert_eq!(report.macro_t_wer_percent, Some(0.0));
    }

    #[test]
    fn simulate_zero_rates_zero_wer() {
        let config = SimulateConfig {
            n_languages: 3,
            utterances_per_language: 10,
            chars_per_utterance: 40,
            common_cer: 0.0,
            mono_cer: 0.0,
            ..SimulateConfig::default()
        };
        let outcome = simulate(&config).unwrap();
        assert_eq!(outcome.m1_report.pooled.wer_percent, 0.0);
        assert_eq!(outcome.m2_report.pooled.wer_percent, 0.0);
    }

    #[test]
    fn simulate_deterministic() {
        let config = SimulateConfig {
            n_languages: 3,
            utterances_per_language: 10,
            chars_per_utterance: 40,
            ..SimulateConfig::default()
        };
        let a = serde_json::to_string(&simulate(&config).unwrap()).unwrap();
        let b = serde_json::to_string(&simulate(&config).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn aggregates_match_rows() {
        let config = SimulateConfig {
            n_languages: 3,
            utterances_per_language: 10,
            chars_per_utterance: 40,
            ..SimulateConfig::default()
        };
        let report = simulate(&config).unwrap().m1_report;
        let recomputed = pool_rows(report.per_utterance.iter().map(|r| &r.wer));
        assert_eq!(report.pooled, recomputed);
        for (lang, stats) in &report.per_language {
            let rows = report
                .per_utterance
                .iter()
                .filter(|r| r.gold_language.as_deref() == Some(lang.as_str()));
            assert_eq!(*stats, pool_rows(rows.map(|r| &r.wer)));
        }
    }
}
