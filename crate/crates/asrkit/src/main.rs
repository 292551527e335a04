//! `asrkit`: every pipeline stage as a subcommand.
//!
//! Exit codes: 0 success, 1 usage error (bad flags / bad config file),
//! 2 data error (unreadable or invalid inputs).
//!
//! A `--config file.json` may supply defaults for any long flag of the chosen
//! subcommand (keys are flag names without dashes); flags given on the command
//! line override the file. Reports echo the fully-resolved arguments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use asrkit::audioprep::{
    augment_manifest, loudness_normalize, read_wav, resample_2x, write_wav, AugmentSpec,
    DEFAULT_TARGET_RMS_DBFS,
};
use asrkit::corpus::{LanguageId, Manifest};
use asrkit::lid::{batch_identify, LidPolicy};
use asrkit::lm::{
    build_lexicon, clean_lm_corpus, rescore_nbest, Lexicon, NGramModel, DEFAULT_BEAM,
    DEFAULT_LEXICON_SIZE,
};
use asrkit::metrics::{corpus_wer, tokenize, TransliterationTable};
use asrkit::pipeline::{
    run_codeswitch, run_m1, run_m2, simulate, CodeSwitchMode, Decoder, PipelineReport,
    ReplayDecoder, SimulateConfig,
};
use asrkit::textnorm::{
    char_frequency, clean_text, rare_symbol_filter, write_removed_report, CleaningRules,
};
use asrkit::vocab::{build_vocab, vocab_diff, vocab_union, Vocab, VocabRegistry};
use asrkit::Error;

#[derive(Parser, Debug)]
#[command(
    name = "asrkit",
    version,
    about = "Multilingual ASR evaluation toolkit",
    args_override_self = true
)]
struct Cli {
    /// JSON file with default values for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory for all produced files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean transcripts and drop rare symbols from a manifest.
    Clean(CleanArgs),
    /// Character vocabulary operations.
    #[command(subcommand)]
    Vocab(VocabCmd),
    /// Character-vocabulary language identification over a manifest.
    Lid(LidArgs),
    /// Word error rate between parallel reference/hypothesis files.
    Wer(WerArgs),
    /// N-gram language model operations.
    #[command(subcommand)]
    Lm(LmCmd),
    /// Audio preprocessing and augmentation.
    #[command(subcommand)]
    Audio(AudioCmd),
    /// End-to-end evaluation runs.
    #[command(subcommand)]
    Run(RunCmd),
}

#[derive(Args, Debug, Serialize)]
struct CleanArgs {
    /// Input manifest (JSONL).
    #[arg(long)]
    manifest: PathBuf,
    /// Cleaning rules JSON; defaults keep `'` and `-`, strip punctuation.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Drop characters with corpus frequency below this value (0 = off).
    #[arg(long, default_value_t = 0)]
    rare_threshold: u64,
}

#[derive(Subcommand, Debug)]
enum VocabCmd {
    /// Build the character vocabulary of one language from a manifest.
    Build(VocabBuildArgs),
    /// Union several vocabulary files into one.
    Union(VocabUnionArgs),
    /// Compare two vocabulary files.
    Diff(VocabDiffArgs),
    /// Merge two languages of a registry (and optionally relabel a manifest).
    Merge(VocabMergeArgs),
}

#[derive(Args, Debug, Serialize)]
struct VocabBuildArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    language: String,
}

#[derive(Args, Debug, Serialize)]
struct VocabUnionArgs {
    /// Vocabulary files to union (repeatable).
    #[arg(long = "vocab", required = true, action = ArgAction::Append)]
    vocabs: Vec<PathBuf>,
    /// Language id of the union.
    #[arg(long)]
    name: String,
}

#[derive(Args, Debug, Serialize)]
struct VocabDiffArgs {
    #[arg(long)]
    vocab_a: PathBuf,
    #[arg(long)]
    vocab_b: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct VocabMergeArgs {
    /// Vocabulary files forming the registry (repeatable).
    #[arg(long = "vocab", required = true, action = ArgAction::Append)]
    vocabs: Vec<PathBuf>,
    /// First language to merge.
    #[arg(long)]
    a: String,
    /// Second language to merge.
    #[arg(long)]
    b: String,
    /// Name of the merged language.
    #[arg(long)]
    name: String,
    /// Manifest to relabel with the merged language ids.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct LidArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Vocabulary files, one per candidate language (repeatable).
    #[arg(long = "vocab", required = true, action = ArgAction::Append)]
    vocabs: Vec<PathBuf>,
    /// Language predicted when no character votes (default: first language).
    #[arg(long)]
    fallback: Option<String>,
    /// Minimum voting characters before the fallback kicks in.
    #[arg(long, default_value_t = 1)]
    min_votes: usize,
    /// Let characters shared between vocabularies vote for all their owners.
    #[arg(long, default_value_t = false)]
    vote_shared: bool,
}

#[derive(Args, Debug, Serialize)]
struct WerArgs {
    /// Reference transcripts, one utterance per line.
    #[arg(long = "ref")]
    ref_file: PathBuf,
    /// Hypothesis transcripts, parallel to the reference file.
    #[arg(long = "hyp")]
    hyp_file: PathBuf,
    /// TSV of `latin\tnative` pairs; enables transliteration-tolerant WER.
    #[arg(long)]
    translit_table: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum LmCmd {
    /// Restrict manifest transcripts to a vocabulary's characters.
    Clean(LmCleanArgs),
    /// Build a frequency-ranked lexicon from a text corpus.
    Lexicon(LmLexiconArgs),
    /// Train an n-gram model and write it as ARPA.
    Train(LmTrainArgs),
    /// Train with count pruning and write the pruned model as ARPA.
    Prune(LmPruneArgs),
    /// Score a text corpus with an ARPA model.
    Score(LmScoreArgs),
    /// Pick the best hypothesis per utterance from an n-best file.
    Rescore(LmRescoreArgs),
}

#[derive(Args, Debug, Serialize)]
struct LmCleanArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct LmLexiconArgs {
    /// Text corpus, one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LEXICON_SIZE)]
    top_k: usize,
}

#[derive(Args, Debug, Serialize)]
struct LmTrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long, default_value_t = 5)]
    order: usize,
}

#[derive(Args, Debug, Serialize)]
struct LmPruneArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long, default_value_t = 5)]
    order: usize,
    /// Comma-separated per-order minimum counts, e.g. `1,1,2,2,3`.
    #[arg(long, value_delimiter = ',')]
    min_counts: Vec<u64>,
}

#[derive(Args, Debug, Serialize)]
struct LmScoreArgs {
    #[arg(long)]
    arpa: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct LmRescoreArgs {
    #[arg(long)]
    arpa: PathBuf,
    /// JSONL n-best file: `{"utt_id":…, "nbest":[{"text":…, "score":…}]}`.
    #[arg(long)]
    nbest: PathBuf,
    /// LM weight.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Word-count bonus.
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = DEFAULT_BEAM)]
    beam: usize,
}

#[derive(Subcommand, Debug)]
enum AudioCmd {
    /// Upsample 8 kHz WAV files to 16 kHz.
    Resample(AudioFilesArgs),
    /// RMS loudness normalization.
    Normalize(AudioNormalizeArgs),
    /// Apply two augmentation specs to every manifest entry (3x the data).
    Augment(AudioAugmentArgs),
}

#[derive(Args, Debug, Serialize)]
struct AudioFilesArgs {
    /// Input WAV files (repeatable).
    #[arg(long = "wav", required = true, action = ArgAction::Append)]
    wavs: Vec<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct AudioNormalizeArgs {
    #[arg(long = "wav", required = true, action = ArgAction::Append)]
    wavs: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TARGET_RMS_DBFS)]
    target_dbfs: f64,
}

#[derive(Args, Debug, Serialize)]
struct AudioAugmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// JSON file with an array of exactly 2 augmentation specs.
    #[arg(long)]
    specs: Option<PathBuf>,
    /// Seed folded into each spec when using the built-in default specs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum RunCmd {
    /// Score one common decoder over the whole manifest.
    M1(RunM1Args),
    /// Common decode, LID, then per-language decoders.
    M2(RunM2Args),
    /// Code-switch evaluation with explicit pair labels.
    Cs(RunCsArgs),
    /// Synthetic corpus comparison of the M1 and M2 approaches.
    Simulate(RunSimulateArgs),
}

#[derive(Args, Debug, Serialize)]
struct RunM1Args {
    #[arg(long)]
    manifest: PathBuf,
    /// Hypotheses: TSV `utt_id\thypothesis` or n-best JSONL.
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long)]
    translit_table: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct RunM2Args {
    #[arg(long)]
    manifest: PathBuf,
    /// Common (stage 1) hypotheses file.
    #[arg(long)]
    common_hyp: PathBuf,
    /// Per-language hypotheses as `lang=path` (repeatable).
    #[arg(long = "mono", required = true, action = ArgAction::Append)]
    monos: Vec<String>,
    /// Vocabulary files for the LID registry (repeatable).
    #[arg(long = "vocab", required = true, action = ArgAction::Append)]
    vocabs: Vec<PathBuf>,
    /// Route with gold labels instead of LID (diagnostic upper bound).
    #[arg(long, default_value_t = false)]
    oracle_lid: bool,
}

#[derive(Args, Debug, Serialize)]
struct RunCsArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Hypotheses as `pair=path`; one entry for c1, one per pair for c2.
    #[arg(long = "hyp", required = true, action = ArgAction::Append)]
    hyps: Vec<String>,
    #[arg(long)]
    translit_table: PathBuf,
    /// c1 = one shared decoder, c2 = decoder per pair label.
    #[arg(long, value_parser = ["c1", "c2"])]
    mode: String,
}

#[derive(Args, Debug, Serialize)]
struct RunSimulateArgs {
    #[arg(long, default_value_t = 6)]
    languages: usize,
    #[arg(long, default_value_t = 200)]
    utterances: usize,
    #[arg(long, default_value_t = 80)]
    chars: usize,
    #[arg(long, default_value_t = 0.10)]
    common_cer: f64,
    #[arg(long, default_value_t = 0.05)]
    mono_cer: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

// ----------------------------------------------------------------- plumbing

fn usage_error(msg: impl std::fmt::Display) -> Error {
    Error::Invalid(msg.to_string())
}

/// Splice `--key value` pairs from the config file in front of the explicit
/// flags so that the command line wins on conflict.
fn inject_config(mut argv: Vec<String>) -> Result<Vec<String>, Error> {
    let pos = match argv.iter().position(|a| a == "--config") {
        Some(p) => p,
        None => return Ok(argv),
    };
    if pos + 1 >= argv.len() {
        return Err(usage_error("--config needs a file argument"));
    }
    let path = PathBuf::from(&argv[pos + 1]);
    argv.drain(pos..=pos + 1);
    let data = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let map: BTreeMap<String, serde_json::Value> = serde_json::from_str(&data)
        .map_err(|e| usage_error(format!("bad config file {}: {e}", path.display())))?;
    let insert_at = argv
        .iter()
        .position(|a| a.starts_with('-'))
        .unwrap_or(argv.len());
    let mut injected = Vec::new();
    for (key, value) in &map {
        let flag = format!("--{}", key.replace('_', "-"));
        let values: Vec<&serde_json::Value> = match value {
            serde_json::Value::Array(items) => items.iter().collect(),
            other => vec![other],
        };
        for v in values {
            injected.push(flag.clone());
            match v {
                serde_json::Value::String(s) => injected.push(s.clone()),
                serde_json::Value::Bool(b) => injected.push(b.to_string()),
                serde_json::Value::Number(n) => injected.push(n.to_string()),
                other => {
                    return Err(usage_error(format!(
                        "config key \"{key}\": unsupported value {other}"
                    )))
                }
            }
        }
    }
    argv.splice(insert_at..insert_at, injected);
    Ok(argv)
}

fn read_lines(path: &Path) -> Result<Vec<String>, Error> {
    let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(data.lines().map(str::to_string).collect())
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Invalid(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

/// Reports carry the resolved arguments so a run is reconstructible.
fn with_config(args: &impl Serialize, report: &impl Serialize) -> serde_json::Value {
    json!({ "config": serde_json::to_value(args).unwrap(), "report": serde_json::to_value(report).unwrap() })
}

fn load_registry(paths: &[PathBuf]) -> Result<VocabRegistry, Error> {
    let vocabs = paths
        .iter()
        .map(Vocab::load)
        .collect::<Result<Vec<_>, _>>()?;
    VocabRegistry::new(vocabs)
}

fn load_decoder(path: &Path) -> Result<ReplayDecoder, Error> {
    if path.extension().is_some_and(|e| e == "jsonl" || e == "json") {
        ReplayDecoder::from_nbest_jsonl(path)
    } else {
        ReplayDecoder::from_tsv(path)
    }
}

/// Parse repeatable `key=path` flags into a decoder map.
fn decoder_map(
    specs: &[String],
) -> Result<BTreeMap<LanguageId, Box<dyn Decoder + Sync>>, Error> {
    let mut map: BTreeMap<LanguageId, Box<dyn Decoder + Sync>> = BTreeMap::new();
    for spec in specs {
        let (lang, path) = spec
            .split_once('=')
            .ok_or_else(|| usage_error(format!("expected `lang=path`, got \"{spec}\"")))?;
        map.insert(
            LanguageId::new(lang)?,
            Box::new(load_decoder(Path::new(path))?),
        );
    }
    Ok(map)
}

fn vocab_file(out: &Path, lang: &LanguageId) -> PathBuf {
    out.join(format!("vocab_{}.tsv", lang.as_str()))
}

// -------------------------------------------------------------- subcommands

fn cmd_clean(out: &Path, args: &CleanArgs) -> Result<(), Error> {
    let manifest = Manifest::load(&args.manifest)?;
    let rules = match &args.rules {
        Some(path) => CleaningRules::load(path)?,
        None => CleaningRules::default(),
    };
    let cleaned = manifest.map_entries(|mut u| {
        u.text = clean_text(&u.text, &rules);
        u
    })?;
    let freq = char_frequency(cleaned.entries().iter().map(|u| u.text.as_str()));
    let (filtered, removed) = rare_symbol_filter(&cleaned, args.rare_threshold)?;
    filtered.write(out.join("cleaned.jsonl"))?;
    write_removed_report(out.join("removed_chars.tsv"), &removed, &freq)?;
    let report = json!({
        "input_utterances": manifest.len(),
        "output_utterances": filtered.len(),
        "removed_char_types": removed.len(),
        "stats": filtered.stats(),
    });
    write_json(&out.join("clean_report.json"), &with_config(args, &report))?;
    println!(
        "cleaned {} utterances, removed {} rare character types",
        filtered.len(),
        removed.len()
    );
    Ok(())
}

fn cmd_vocab(out: &Path, cmd: &VocabCmd) -> Result<(), Error> {
    match cmd {
        VocabCmd::Build(args) => {
            let manifest = Manifest::load(&args.manifest)?;
            let lang = LanguageId::new(&args.language)?;
            let vocab = build_vocab(&manifest, &lang)?;
            let path = vocab_file(out, &lang);
            vocab.write(&path)?;
            println!("{} characters -> {}", vocab.len(), path.display());
        }
        VocabCmd::Union(args) => {
            let vocabs = args
                .vocabs
                .iter()
                .map(Vocab::load)
                .collect::<Result<Vec<_>, _>>()?;
            let name = LanguageId::new(&args.name)?;
            let union = vocab_union(&vocabs, name.clone())?;
            let path = vocab_file(out, &name);
            union.write(&path)?;
            println!("{} characters -> {}", union.len(), path.display());
        }
        VocabCmd::Diff(args) => {
            let a = Vocab::load(&args.vocab_a)?;
            let b = Vocab::load(&args.vocab_b)?;
            let diff = vocab_diff(&a, &b);
            let report = json!({
                "only_a": diff.only_a.iter().collect::<String>(),
                "only_b": diff.only_b.iter().collect::<String>(),
                "shared": diff.shared.iter().collect::<String>(),
                "symmetric_difference": diff.symmetric_difference_size(),
            });
            write_json(&out.join("vocab_diff.json"), &with_config(args, &report))?;
            println!(
                "only {}: {}, only {}: {}, shared: {}",
                a.language.as_str(),
                diff.only_a.len(),
                b.language.as_str(),
                diff.only_b.len(),
                diff.shared.len()
            );
        }
        VocabCmd::Merge(args) => {
            let reg = load_registry(&args.vocabs)?;
            let reg = reg.merge_languages(
                &LanguageId::new(&args.a)?,
                &LanguageId::new(&args.b)?,
                LanguageId::new(&args.name)?,
            )?;
            for vocab in reg.vocabs() {
                vocab.write(vocab_file(out, &vocab.language))?;
            }
            if let Some(path) = &args.manifest {
                let manifest = Manifest::load(path)?;
                reg.relabel_manifest(&manifest)?
                    .write(out.join("relabeled.jsonl"))?;
            }
            println!(
                "merged {} + {} -> {} ({} languages left)",
                args.a,
                args.b,
                args.name,
                reg.len()
            );
        }
    }
    Ok(())
}

fn cmd_lid(out: &Path, args: &LidArgs) -> Result<(), Error> {
    let manifest = Manifest::load(&args.manifest)?;
    let reg = load_registry(&args.vocabs)?;
    let mut policy = LidPolicy::for_registry(&reg)?;
    policy.min_votes = args.min_votes;
    policy.ignore_shared = !args.vote_shared;
    if let Some(f) = &args.fallback {
        policy.fallback = LanguageId::new(f)?;
    }
    let (labeled, results, confusion) = batch_identify(&manifest, &reg, &policy)?;
    labeled.write(out.join("lid_labeled.jsonl"))?;
    let report = json!({
        "per_utterance": manifest
            .entries()
            .iter()
            .zip(&results)
            .map(|(u, r)| json!({ "utt_id": u.utt_id, "result": r }))
            .collect::<Vec<_>>(),
        "accuracy": confusion.as_ref().map(|c| c.accuracy()),
        "confusion": confusion,
    });
    write_json(&out.join("lid_report.json"), &with_config(args, &report))?;
    match &report["accuracy"] {
        serde_json::Value::Null => println!("labeled {} utterances (no gold labels)", results.len()),
        acc => println!("labeled {} utterances, accuracy {}", results.len(), acc),
    }
    Ok(())
}

fn cmd_wer(out: &Path, args: &WerArgs) -> Result<(), Error> {
    let refs = read_lines(&args.ref_file)?;
    let hyps = read_lines(&args.hyp_file)?;
    if refs.len() != hyps.len() {
        return Err(Error::Invalid(format!(
            "line count mismatch: {} references vs {} hypotheses",
            refs.len(),
            hyps.len()
        )));
    }
    let table = args
        .translit_table
        .as_ref()
        .map(TransliterationTable::load)
        .transpose()?;
    let pairs: Vec<(Option<String>, Vec<String>, Vec<String>)> = refs
        .iter()
        .zip(&hyps)
        .map(|(r, h)| (None, tokenize(r), tokenize(h)))
        .collect();
    let plain = corpus_wer(&pairs, None)?;
    println!("WER {:.2}", plain.pooled.wer_percent);
    let translit = match &table {
        Some(t) => {
            let tw = corpus_wer(&pairs, Some(t))?;
            println!("T-WER {:.2}", tw.pooled.wer_percent);
            Some(tw)
        }
        None => None,
    };
    let report = json!({ "wer": plain, "t_wer": translit });
    write_json(&out.join("wer_report.json"), &with_config(args, &report))
}

fn cmd_lm(out: &Path, cmd: &LmCmd) -> Result<(), Error> {
    match cmd {
        LmCmd::Clean(args) => {
            let manifest = Manifest::load(&args.manifest)?;
            let vocab = Vocab::load(&args.vocab)?;
            let lines = clean_lm_corpus(
                manifest.entries().iter().map(|u| u.text.as_str()),
                &vocab,
            );
            write_text(&out.join("lm_corpus.txt"), &(lines.join("\n") + "\n"))?;
            println!("{} sentences kept", lines.len());
        }
        LmCmd::Lexicon(args) => {
            let lines = read_lines(&args.corpus)?;
            let lexicon = build_lexicon(lines.iter().map(String::as_str), args.top_k)?;
            lexicon.write(out.join("lexicon.tsv"))?;
            println!("{} words", lexicon.len());
        }
        LmCmd::Train(args) => {
            let lines = read_lines(&args.corpus)?;
            let lexicon = Lexicon::load(&args.lexicon)?;
            let model =
                NGramModel::train(lines.iter().map(String::as_str), args.order, &lexicon)?;
            model.write_arpa(out.join("model.arpa"))?;
            println!(
                "order-{} model, {} unigrams",
                model.order(),
                model.ngram_count(1)
            );
        }
        LmCmd::Prune(args) => {
            let lines = read_lines(&args.corpus)?;
            let lexicon = Lexicon::load(&args.lexicon)?;
            let model = NGramModel::train_pruned(
                lines.iter().map(String::as_str),
                args.order,
                &lexicon,
                &args.min_counts,
            )?;
            model.write_arpa(out.join("model.arpa"))?;
            let counts: Vec<usize> = (1..=model.order()).map(|o| model.ngram_count(o)).collect();
            println!("pruned model, n-grams per order: {counts:?}");
        }
        LmCmd::Score(args) => {
            let model = NGramModel::read_arpa(&args.arpa)?;
            let lines = read_lines(&args.corpus)?;
            let scores: Vec<f64> = lines.iter().map(|l| model.score(&tokenize(l))).collect();
            let ppl = model.perplexity(lines.iter().map(String::as_str));
            let report = json!({ "per_sentence_log10": scores, "perplexity": ppl });
            write_json(&out.join("score_report.json"), &with_config(args, &report))?;
            println!("perplexity {ppl:.3}");
        }
        LmCmd::Rescore(args) => {
            let model = NGramModel::read_arpa(&args.arpa)?;
            let decoder = ReplayDecoder::from_nbest_jsonl(&args.nbest)?;
            let mut lines = String::new();
            for (utt_id, hyps) in decoder.entries() {
                let best = rescore_nbest(hyps, &model, args.alpha, args.beta, args.beam)?;
                lines.push_str(&format!("{utt_id}\t{}\n", best.text));
            }
            write_text(&out.join("rescored.tsv"), &lines)?;
            println!("rescored {} utterances", decoder.entries().count());
        }
    }
    Ok(())
}

fn cmd_audio(out: &Path, cmd: &AudioCmd) -> Result<(), Error> {
    fn out_name(out: &Path, input: &Path, suffix: &str) -> PathBuf {
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "audio".to_string());
        out.join(format!("{stem}{suffix}.wav"))
    }
    match cmd {
        AudioCmd::Resample(args) => {
            for input in &args.wavs {
                let buf = read_wav(input)?;
                let up = resample_2x(&buf)?;
                let path = out_name(out, input, "_16k");
                write_wav(&up, &path)?;
                println!("{} -> {}", input.display(), path.display());
            }
        }
        AudioCmd::Normalize(args) => {
            for input in &args.wavs {
                let buf = read_wav(input)?;
                let outcome = loudness_normalize(&buf, args.target_dbfs)?;
                let path = out_name(out, input, "_norm");
                write_wav(&outcome.buffer, &path)?;
                println!(
                    "{} -> {} (clipped fraction {:.6})",
                    input.display(),
                    path.display(),
                    outcome.clipped_fraction
                );
            }
        }
        AudioCmd::Augment(args) => {
            let manifest = Manifest::load(&args.manifest)?;
            let specs = match &args.specs {
                Some(path) => {
                    let data =
                        std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    serde_json::from_str::<Vec<AugmentSpec>>(&data)
                        .map_err(|e| usage_error(format!("bad specs file: {e}")))?
                }
                None => default_augment_specs(args.seed),
            };
            let augmented = augment_manifest(&manifest, &specs, out)?;
            augmented.write(out.join("augmented.jsonl"))?;
            println!(
                "{} -> {} utterances",
                manifest.len(),
                augmented.len()
            );
        }
    }
    Ok(())
}

fn default_augment_specs(seed: u64) -> Vec<AugmentSpec> {
    vec![
        AugmentSpec {
            gain_db: -3.0,
            snr_db: 20.0,
            pace_factor: 1.1,
            pitch_semitones: 0.0,
            seed: asrkit::seed::derive(seed, "aug1"),
        },
        AugmentSpec {
            gain_db: 2.0,
            snr_db: 30.0,
            pace_factor: 0.9,
            pitch_semitones: 1.0,
            seed: asrkit::seed::derive(seed, "aug2"),
        },
    ]
}

fn emit_report(
    out: &Path,
    file: &str,
    args: &impl Serialize,
    report: &PipelineReport,
) -> Result<(), Error> {
    write_json(&out.join(file), &with_config(args, report))?;
    print!("{}", report.render_table());
    Ok(())
}

fn cmd_run(out: &Path, cmd: &RunCmd) -> Result<(), Error> {
    match cmd {
        RunCmd::M1(args) => {
            let manifest = Manifest::load(&args.manifest)?;
            let decoder = load_decoder(&args.hyp)?;
            let table = args
                .translit_table
                .as_ref()
                .map(TransliterationTable::load)
                .transpose()?;
            let report = run_m1(&decoder, &manifest, table.as_ref())?;
            emit_report(out, "m1_report.json", args, &report)?;
        }
        RunCmd::M2(args) => {
            let manifest = Manifest::load(&args.manifest)?;
            let common = load_decoder(&args.common_hyp)?;
            let monos = decoder_map(&args.monos)?;
            let reg = load_registry(&args.vocabs)?;
            let policy = LidPolicy::for_registry(&reg)?;
            let report = run_m2(&common, &monos, &reg, &policy, &manifest, args.oracle_lid)?;
            emit_report(out, "m2_report.json", args, &report)?;
        }
        RunCmd::Cs(args) => {
            let manifest = Manifest::load(&args.manifest)?;
            let decoders = decoder_map(&args.hyps)?;
            let table = TransliterationTable::load(&args.translit_table)?;
            let mode = if args.mode == "c1" {
                CodeSwitchMode::C1
            } else {
                CodeSwitchMode::C2
            };
            let report = run_codeswitch(&decoders, &manifest, &table, mode)?;
            emit_report(out, "cs_report.json", args, &report)?;
        }
        RunCmd::Simulate(args) => {
            let config = SimulateConfig {
                n_languages: args.languages,
                utterances_per_language: args.utterances,
                chars_per_utterance: args.chars,
                common_cer: args.common_cer,
                mono_cer: args.mono_cer,
                mono_cer_overrides: BTreeMap::new(),
                corpus_seed: args.seed,
                decoder_seed: args.seed,
            };
            let outcome = simulate(&config)?;
            write_json(&out.join("simulate_report.json"), &with_config(args, &outcome))?;
            println!("M1:");
            print!("{}", outcome.m1_report.render_table());
            println!("M2:");
            print!("{}", outcome.m2_report.render_table());
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    if cli.jobs > 0 {
        // Ignore the error if a global pool already exists (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global();
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    match &cli.command {
        Command::Clean(args) => cmd_clean(&cli.out, args),
        Command::Vocab(cmd) => cmd_vocab(&cli.out, cmd),
        Command::Lid(args) => cmd_lid(&cli.out, args),
        Command::Wer(args) => cmd_wer(&cli.out, args),
        Command::Lm(cmd) => cmd_lm(&cli.out, cmd),
        Command::Audio(cmd) => cmd_audio(&cli.out, cmd),
        Command::Run(cmd) => cmd_run(&cli.out, cmd),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match inject_config(argv) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
