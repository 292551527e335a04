//! Statistical n-gram language modeling: corpus cleaning against an ASR
//! vocab, frequency-based lexicon selection, interpolated Kneser-Ney training
//! with count pruning, ARPA export/import, sentence scoring, and n-best
//! rescoring.
//!
//! Smoothing is interpolated Kneser-Ney with a single fixed discount. Stored
//! n-gram probabilities are the fully interpolated values and the ARPA
//! backoff weight of a context is its interpolation weight, so backoff
//! scoring reproduces the model exactly.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::tokenize;
use crate::vocab::Vocab;

pub const START: &str = "<s>";
pub const END: &str = "</s>";
pub const UNK: &str = "<unk>";

pub const DEFAULT_DISCOUNT: f64 = 0.75;
pub const DEFAULT_LEXICON_SIZE: usize = 500_000;
pub const DEFAULT_BEAM: usize = 3000;

/// Remove words containing characters outside the ASR vocab; drop lines that
/// end up empty.
pub fn clean_lm_corpus<'a>(texts: impl IntoIterator<Item = &'a str>, vocab: &Vocab) -> Vec<String> {
    texts
        .into_iter()
        .filter_map(|line| {
            let kept: Vec<&str> = line
                .split_whitespace()
                .filter(|w| w.chars().all(|c| vocab.contains(c)))
                .collect();
            if kept.is_empty() {
                None
            } else {
                Some(kept.join(" "))
            }
        })
        .collect()
}

/// Words ranked by descending frequency, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    words: Vec<(String, u64)>,
    index: HashSet<String>,
}

impl Lexicon {
    pub fn from_ranked(words: Vec<(String, u64)>) -> Self {
        let index = words.iter().map(|(w, _)| w.clone()).collect();
        Lexicon { words, index }
    }

    pub fn words(&self) -> &[(String, u64)] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains(word)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for (w, n) in &self.words {
            out.push_str(w);
            out.push('\t');
            out.push_str(&n.to_string());
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Lexicon> {
        let path = path.as_ref();
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut words = Vec::new();
        for (i, line) in data.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (w, n) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected `word\\tfreq`"))?;
            let n = n
                .parse::<u64>()
                .map_err(|e| Error::parse(i + 1, format!("bad frequency: {e}")))?;
            words.push((w.to_string(), n));
        }
        Ok(Lexicon::from_ranked(words))
    }
}

/// Top-k words by corpus frequency.
pub fn build_lexicon<'a>(texts: impl IntoIterator<Item = &'a str>, k: usize) -> Result<Lexicon> {
    if k == 0 {
        return Err(Error::Invalid("lexicon size must be >= 1".into()));
    }
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for line in texts {
        for w in line.split_whitespace() {
            *freq.entry(w).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = freq.into_iter().map(|(w, n)| (w.to_string(), n)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(Lexicon::from_ranked(ranked))
}

type Gram = Vec<String>;

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    discount: f64,
    /// Raw counts per order (index n-1); retained so pruning can re-estimate.
    /// Empty for models imported from ARPA.
    counts: Vec<BTreeMap<Gram, u64>>,
    /// log10 probability of each stored n-gram (index n-1).
    probs: Vec<BTreeMap<Gram, f64>>,
    /// log10 backoff weight per context, indexed by context length - 1.
    backoffs: Vec<BTreeMap<Gram, f64>>,
    /// Predictable words: lexicon plus `<unk>` and `</s>`.
    vocab: BTreeSet<String>,
}

/// Map a token into the closed vocabulary.
fn map_word<'a>(w: &'a str, vocab: &BTreeSet<String>) -> &'a str {
    if vocab.contains(w) || w == START {
        w
    } else {
        UNK
    }
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    pub fn unk_logprob(&self) -> f64 {
        self.probs[0][&vec![UNK.to_string()]]
    }

    pub fn ngram_count(&self, order: usize) -> usize {
        self.probs[order - 1].len()
    }

    /// Train on one sentence per line with the given lexicon.
    pub fn train<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        order: usize,
        lexicon: &Lexicon,
    ) -> Result<NGramModel> {
        Self::train_pruned(texts, order, lexicon, &vec![1; order])
    }

    /// Train with per-order minimum counts. N-grams of order >= 2 whose raw
    /// count falls below the threshold are dropped before probability
    /// estimation; unigrams are never pruned.
    pub fn train_pruned<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        order: usize,
        lexicon: &Lexicon,
        min_counts: &[u64],
    ) -> Result<NGramModel> {
        if !(1..=5).contains(&order) {
            return Err(Error::Invalid(format!("order must be in [1,5], got {order}")));
        }
        validate_min_counts(min_counts, order)?;

        let vocab: BTreeSet<String> = lexicon
            .words()
            .iter()
            .map(|(w, _)| w.clone())
            .chain([UNK.to_string(), END.to_string()])
            .collect();

        let mut counts: Vec<BTreeMap<Gram, u64>> = vec![BTreeMap::new(); order];
        let mut any = false;
        for line in texts {
            let toks = tokenize(line);
            if toks.is_empty() {
                continue;
            }
            any = true;
            let padded: Vec<String> = std::iter::once(START.to_string())
                .chain(toks.iter().map(|t| map_word(t, &vocab).to_string()))
                .chain(std::iter::once(END.to_string()))
                .collect();
            for n in 1..=order {
                for window in padded.windows(n) {
                    *counts[n - 1].entry(window.to_vec()).or_insert(0) += 1;
                }
            }
        }
        if !any {
            return Err(Error::EmptyCorpus);
        }

        let mut model = NGramModel {
            order,
            discount: DEFAULT_DISCOUNT,
            counts,
            probs: Vec::new(),
            backoffs: Vec::new(),
            vocab,
        };
        model.estimate(min_counts)?;
        Ok(model)
    }

    /// Re-estimate with stricter count thresholds.
    pub fn prune(&self, min_counts: &[u64]) -> Result<NGramModel> {
        if self.counts.iter().all(|c| c.is_empty()) {
            return Err(Error::Invalid(
                "cannot prune a model imported from ARPA: raw counts are gone".into(),
            ));
        }
        validate_min_counts(min_counts, self.order)?;
        let mut model = self.clone();
        model.estimate(min_counts)?;
        Ok(model)
    }

    fn estimate(&mut self, min_counts: &[u64]) -> Result<()> {
        let order = self.order;
        let d = self.discount;

        // Pruned raw counts per order.
        let pruned: Vec<BTreeMap<Gram, u64>> = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, table)| {
                let threshold = if i == 0 { 1 } else { min_counts[i] };
                table
                    .iter()
                    .filter(|&(_, &c)| c >= threshold)
                    .map(|(g, &c)| (g.clone(), c))
                    .collect()
            })
            .collect();

        // Adjusted counts: raw at the highest order, continuation counts
        // below (raw for grams starting with <s>, which nothing precedes).
        let mut adjusted: Vec<BTreeMap<Gram, u64>> = vec![BTreeMap::new(); order];
        adjusted[order - 1] = pruned[order - 1].clone();
        for k in (1..order).rev() {
            let mut table: BTreeMap<Gram, u64> = BTreeMap::new();
            for gram in pruned[k].keys() {
                // each distinct (k+1)-gram is one distinct left extension
                let suffix = gram[1..].to_vec();
                if suffix[0] != START {
                    *table.entry(suffix).or_insert(0) += 1;
                }
            }
            for (gram, &c) in &pruned[k - 1] {
                if gram[0] == START {
                    table.insert(gram.clone(), c);
                }
            }
            adjusted[k - 1] = table;
        }

        self.probs = vec![BTreeMap::new(); order];
        self.backoffs = vec![BTreeMap::new(); order.saturating_sub(1)];

        // Unigram level: discounted continuation counts interpolated with a
        // uniform distribution over the closed vocabulary.
        let uni = &adjusted[0];
        let total: u64 = uni.iter().filter(|(g, _)| g[0] != START).map(|(_, &c)| c).sum();
        let distinct = uni.keys().filter(|g| g[0] != START).count();
        if total == 0 {
            return Err(Error::EmptyCorpus);
        }
        let v_size = self.vocab.len() as f64;
        let uniform_mass = d * distinct as f64 / total as f64;
        for w in &self.vocab {
            let c = uni.get(&vec![w.clone()]).copied().unwrap_or(0);
            let disc = if c > 0 { (c as f64 - d).max(0.0) } else { 0.0 };
            let p = disc / total as f64 + uniform_mass / v_size;
            self.probs[0].insert(vec![w.clone()], p.log10());
        }
        // <s> is a context, never a prediction.
        self.probs[0].insert(vec![START.to_string()], -99.0);

        // Higher orders.
        for k in 2..=order {
            let table = &adjusted[k - 1];
            let mut by_context: BTreeMap<&[String], Vec<(&Gram, u64)>> = BTreeMap::new();
            for (gram, &c) in table {
                by_context.entry(&gram[..k - 1]).or_default().push((gram, c));
            }
            for (context, entries) in by_context {
                let t: u64 = entries.iter().map(|&(_, c)| c).sum();
                let distinct = entries.len();
                let gamma = d * distinct as f64 / t as f64;
                self.backoffs[k - 2].insert(context.to_vec(), gamma.log10());
                for (gram, c) in entries {
                    let lower = self.lookup(&gram[1..k - 1], &gram[k - 1], k - 1);
                    let p = (c as f64 - d).max(0.0) / t as f64 + gamma * 10f64.powf(lower);
                    self.probs[k - 1].insert(gram.clone(), p.log10());
                }
            }
        }
        Ok(())
    }

    /// Backoff lookup of log10 p(word | context) using orders up to
    /// `max_order`. Words are assumed already vocabulary-mapped.
    fn lookup(&self, context: &[String], word: &str, max_order: usize) -> f64 {
        let start = context.len().saturating_sub(max_order - 1);
        let mut ctx = &context[start..];
        let mut backoff_acc = 0.0;
        loop {
            let mut key: Gram = ctx.to_vec();
            key.push(word.to_string());
            if let Some(&p) = self.probs[key.len() - 1].get(&key) {
                return backoff_acc + p;
            }
            if ctx.is_empty() {
                // word outside the stored vocabulary: score as <unk>
                return backoff_acc + self.probs[0][&vec![UNK.to_string()]];
            }
            if let Some(&b) = self.backoffs[ctx.len() - 1].get(ctx) {
                backoff_acc += b;
            }
            ctx = &ctx[1..];
        }
    }

    /// log10 p(word | context), with OOV words mapped to `<unk>`.
    pub fn cond_logprob(&self, context: &[String], word: &str) -> f64 {
        let mapped: Vec<String> = context
            .iter()
            .map(|w| map_word(w, &self.vocab).to_string())
            .collect();
        self.lookup(&mapped, map_word(word, &self.vocab), self.order)
    }

    /// Sentence log10 probability including the end marker. An empty token
    /// list scores just p(</s> | <s>).
    pub fn score(&self, tokens: &[String]) -> f64 {
        let mut context: Vec<String> = vec![START.to_string()];
        let mut total = 0.0;
        for tok in tokens {
            let mapped = map_word(tok, &self.vocab).to_string();
            total += self.lookup(&context, &mapped, self.order);
            context.push(mapped);
            let excess = context.len().saturating_sub(self.order - 1);
            if self.order > 1 && excess > 0 {
                context.drain(..excess);
            } else if self.order == 1 {
                context.clear();
            }
        }
        total + self.lookup(&context, END, self.order)
    }

    /// Per-word perplexity over a set of sentences (end markers included).
    pub fn perplexity<'a>(&self, texts: impl IntoIterator<Item = &'a str>) -> f64 {
        let mut log_sum = 0.0;
        let mut n_events = 0usize;
        for line in texts {
            let toks = tokenize(line);
            log_sum += self.score(&toks);
            n_events += toks.len() + 1;
        }
        if n_events == 0 {
            return f64::INFINITY;
        }
        10f64.powf(-log_sum / n_events as f64)
    }

    /// Largest |1 - sum_w p(w | context)| over every stored context.
    /// Exhaustive over the closed vocabulary; meant for toy-scale checks.
    pub fn max_normalization_error(&self) -> f64 {
        let mut contexts: Vec<Gram> = vec![Vec::new()];
        for len in 1..self.order {
            contexts.extend(self.probs[len - 1].keys().cloned());
        }
        let mut worst = 0.0f64;
        for ctx in contexts {
            let sum: f64 = self
                .vocab
                .iter()
                .map(|w| 10f64.powf(self.lookup(&ctx, w, self.order)))
                .sum();
            worst = worst.max((sum - 1.0).abs());
        }
        worst
    }

    /// Write the model in ARPA text format.
    pub fn write_arpa(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_arpa()).map_err(|e| Error::io(path, e))
    }

    pub fn to_arpa(&self) -> String {
        let mut out = String::from("\\data\\\n");
        for n in 1..=self.order {
            out.push_str(&format!("ngram {}={}\n", n, self.probs[n - 1].len()));
        }
        for n in 1..=self.order {
            out.push_str(&format!("\n\\{n}-grams:\n"));
            for (gram, p) in &self.probs[n - 1] {
                out.push_str(&format!("{:.7}\t{}", p, gram.join(" ")));
                if n < self.order {
                    if let Some(b) = self.backoffs[n - 1].get(gram) {
                        out.push_str(&format!("\t{b:.7}"));
                    }
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    pub fn read_arpa(path: impl AsRef<Path>) -> Result<NGramModel> {
        let path = path.as_ref();
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_arpa(&data)
    }

    pub fn from_arpa(data: &str) -> Result<NGramModel> {
        let mut order = 0usize;
        // first pass: order from the \data\ section
        for line in data.lines() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("ngram ") {
                if let Some((n, _)) = rest.split_once('=') {
                    order = order.max(
                        n.parse::<usize>()
                            .map_err(|e| Error::parse(0, format!("bad ngram header: {e}")))?,
                    );
                }
            }
        }
        if order == 0 {
            return Err(Error::parse(0, "missing \\data\\ section"));
        }

        let mut probs: Vec<BTreeMap<Gram, f64>> = vec![BTreeMap::new(); order];
        let mut backoffs: Vec<BTreeMap<Gram, f64>> = vec![BTreeMap::new(); order.saturating_sub(1)];
        let mut current: Option<usize> = None;
        for (i, raw) in data.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line == "\\data\\" || line.starts_with("ngram ") {
                continue;
            }
            if line == "\\end\\" {
                break;
            }
            if let Some(rest) = line.strip_prefix('\\') {
                if let Some(n) = rest.strip_suffix("-grams:") {
                    current = Some(
                        n.parse::<usize>()
                            .map_err(|e| Error::parse(i + 1, format!("bad section: {e}")))?,
                    );
                    continue;
                }
            }
            let n = current.ok_or_else(|| Error::parse(i + 1, "entry outside any section"))?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 {
                return Err(Error::parse(i + 1, "expected `logprob\\tngram[\\tbackoff]`"));
            }
            let p = fields[0]
                .parse::<f64>()
                .map_err(|e| Error::parse(i + 1, format!("bad probability: {e}")))?;
            let gram: Gram = fields[1].split(' ').map(str::to_string).collect();
            if gram.len() != n {
                return Err(Error::parse(i + 1, format!("{n}-gram has {} tokens", gram.len())));
            }
            if let Some(b) = fields.get(2) {
                let b = b
                    .parse::<f64>()
                    .map_err(|e| Error::parse(i + 1, format!("bad backoff: {e}")))?;
                backoffs[n - 1].insert(gram.clone(), b);
            }
            probs[n - 1].insert(gram, p);
        }

        let vocab: BTreeSet<String> = probs[0]
            .keys()
            .map(|g| g[0].clone())
            .filter(|w| w != START)
            .collect();
        if !vocab.contains(UNK) {
            return Err(Error::parse(0, "ARPA model lacks <unk>"));
        }
        Ok(NGramModel {
            order,
            discount: DEFAULT_DISCOUNT,
            counts: vec![BTreeMap::new(); order],
            probs,
            backoffs,
            vocab,
        })
    }

    #[cfg(test)]
    pub(crate) fn raw_count(&self, gram: &[&str]) -> u64 {
        let key: Gram = gram.iter().map(|s| s.to_string()).collect();
        self.counts[gram.len() - 1].get(&key).copied().unwrap_or(0)
    }
}

fn validate_min_counts(min_counts: &[u64], order: usize) -> Result<()> {
    if min_counts.len() != order {
        return Err(Error::Invalid(format!(
            "expected {order} min-count thresholds, got {}",
            min_counts.len()
        )));
    }
    if min_counts[0] > 1 {
        return Err(Error::Invalid(
            "unigrams are never pruned: the order-1 threshold must be <= 1".into(),
        ));
    }
    if min_counts.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Invalid(
            "min-count thresholds must be non-decreasing across orders".into(),
        ));
    }
    Ok(())
}

/// One decoding candidate with its acoustic model score (log domain).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub utt_id: String,
    pub text: String,
    pub acoustic_score: f64,
}

/// Shallow-fusion selection over an n-best list: keep the top-`beam`
/// candidates by acoustic score, then pick the argmax of
/// `acoustic + alpha * lm + beta * word_count`.
///
/// Candidates are put in a total order (acoustic desc, then text) before
/// truncation so the result does not depend on input order.
pub fn rescore_nbest(
    hyps: &[Hypothesis],
    model: &NGramModel,
    alpha: f64,
    beta: f64,
    beam: usize,
) -> Result<Hypothesis> {
    if hyps.is_empty() {
        return Err(Error::Invalid("empty n-best list".into()));
    }
    if beam == 0 {
        return Err(Error::Invalid("beam must be >= 1".into()));
    }
    let mut ordered: Vec<&Hypothesis> = hyps.iter().collect();
    ordered.sort_by(|a, b| {
        b.acoustic_score
            .total_cmp(&a.acoustic_score)
            .then_with(|| a.text.cmp(&b.text))
    });
    ordered.truncate(beam);

    let mut best: Option<(&Hypothesis, f64)> = None;
    for h in ordered {
        let toks = tokenize(&h.text);
        let combined = h.acoustic_score + alpha * model.score(&toks) + beta * toks.len() as f64;
        match &best {
            Some((_, s)) if combined <= *s => {}
            _ => best = Some((h, combined)),
        }
    }
    Ok(best.expect("nonempty list").0.clone())
}
