//! Rule-based language identification: classify each transcript character by
//! vocabulary membership and take a majority vote.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{LanguageId, Manifest};
use crate::error::{Error, Result};
use crate::vocab::VocabRegistry;

/// Edge-case policy for the majority vote.
///
/// Shared characters (digits, incidental cross-script symbols) are excluded
/// from voting by default so that each vote names exactly one language. Ties
/// are broken by a fixed order and flagged; an utterance with fewer than
/// `min_votes` voting characters falls back to `fallback`.
#[derive(Debug, Clone, PartialEq)]
pub struct LidPolicy {
    pub ignore_shared: bool,
    pub tie_break_order: Vec<LanguageId>,
    pub fallback: LanguageId,
    pub min_votes: usize,
}

impl LidPolicy {
    /// Default policy for a registry: tie-break in sorted language order,
    /// fall back to the first language, require one vote.
    pub fn for_registry(reg: &VocabRegistry) -> Result<LidPolicy> {
        let order: Vec<LanguageId> = reg.languages().cloned().collect();
        let fallback = order
            .first()
            .cloned()
            .ok_or_else(|| Error::Invalid("empty registry".into()))?;
        Ok(LidPolicy {
            ignore_shared: true,
            tie_break_order: order,
            fallback,
            min_votes: 1,
        })
    }

    pub fn validate(&self, reg: &VocabRegistry) -> Result<()> {
        let in_order: BTreeSet<&LanguageId> = self.tie_break_order.iter().collect();
        if in_order.len() != self.tie_break_order.len() {
            return Err(Error::Invalid("tie_break_order has duplicates".into()));
        }
        for lang in reg.languages() {
            if !in_order.contains(lang) {
                return Err(Error::Invalid(format!(
                    "tie_break_order misses language \"{lang}\""
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LidResult {
    pub predicted: LanguageId,
    pub votes: BTreeMap<LanguageId, u64>,
    pub total_voting_chars: u64,
    pub confidence: f64,
    pub tie: bool,
    pub used_fallback: bool,
}

/// Languages whose vocab contains `c`. Possibly empty, possibly several.
pub fn classify_char(c: char, reg: &VocabRegistry) -> BTreeSet<LanguageId> {
    reg.vocabs()
        .filter(|v| v.contains(c))
        .map(|v| v.language.clone())
        .collect()
}

/// Majority vote over the characters of `text`.
pub fn identify_language(text: &str, reg: &VocabRegistry, policy: &LidPolicy) -> LidResult {
    let mut votes: BTreeMap<LanguageId, u64> = BTreeMap::new();
    let mut total_voting_chars = 0u64;
    for c in text.chars().filter(|c| !c.is_whitespace()) {
        let owners = classify_char(c, reg);
        if owners.is_empty() {
            continue;
        }
        if owners.len() > 1 && policy.ignore_shared {
            continue;
        }
        total_voting_chars += 1;
        for lang in owners {
            *votes.entry(lang).or_insert(0) += 1;
        }
    }

    if total_voting_chars < policy.min_votes as u64 {
        return LidResult {
            predicted: policy.fallback.clone(),
            votes,
            total_voting_chars,
            confidence: 0.0,
            tie: false,
            used_fallback: true,
        };
    }

    let max_votes = votes.values().copied().max().unwrap_or(0);
    let leaders: BTreeSet<&LanguageId> = votes
        .iter()
        .filter(|&(_, &n)| n == max_votes)
        .map(|(l, _)| l)
        .collect();
    let tie = leaders.len() > 1;
    let predicted = policy
        .tie_break_order
        .iter()
        .find(|l| leaders.contains(l))
        .cloned()
        // Leader outside the configured order can only happen with a stale
        // policy; fall back deterministically to the smallest leader.
        .unwrap_or_else(|| (*leaders.iter().next().expect("votes nonempty")).clone());
    let confidence = votes.get(&predicted).copied().unwrap_or(0) as f64 / total_voting_chars as f64;
    LidResult {
        predicted,
        votes,
        total_voting_chars,
        confidence,
        tie,
        used_fallback: false,
    }
}

/// Gold-vs-predicted counts from a labeled run.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConfusionMatrix {
    /// gold language -> predicted language -> count
    pub counts: BTreeMap<LanguageId, BTreeMap<LanguageId, u64>>,
}

impl ConfusionMatrix {
    pub fn add(&mut self, gold: &LanguageId, predicted: &LanguageId) {
        *self
            .counts
            .entry(gold.clone())
            .or_default()
            .entry(predicted.clone())
            .or_insert(0) += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flat_map(|m| m.values()).sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts
            .iter()
            .filter_map(|(g, m)| m.get(g))
            .copied()
            .sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }
}

/// Label every utterance with its predicted language. When gold labels are
/// present a confusion matrix is produced as well.
pub fn batch_identify(
    m: &Manifest,
    reg: &VocabRegistry,
    policy: &LidPolicy,
) -> Result<(Manifest, Vec<LidResult>, Option<ConfusionMatrix>)> {
    policy.validate(reg)?;
    let results: Vec<LidResult> = m
        .entries()
        .par_iter()
        .map(|u| identify_language(&u.text, reg, policy))
        .collect();

    let mut confusion = ConfusionMatrix::default();
    let mut any_gold = false;
    let labeled = Manifest::from_entries(
        m.entries()
            .iter()
            .zip(&results)
            .map(|(u, r)| {
                if let Some(gold) = &u.language {
                    any_gold = true;
                    confusion.add(gold, &r.predicted);
                }
                let mut u = u.clone();
                u.language = Some(r.predicted.clone());
                u
            })
            .collect(),
    )?;
    Ok((labeled, results, any_gold.then_some(confusion)))
}
