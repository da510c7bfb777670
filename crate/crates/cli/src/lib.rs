//! Subcommands of the `natlog` binary.
//!
//! Every command writes its human-readable output to the `out` writer it is
//! handed and its machine records to files, so the binary and the tests
//! share one code path.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use natlog::chunker::ChunkRules;
use natlog::datagen::{generate, GenSpec, LabeledExample};
use natlog::executor::{enumerate_programs, execute, ChunkedPair, Program};
use natlog::io::{load_jsonl, save_jsonl, DATASET_SCHEMA, EVAL_SCHEMA, METRICS_SCHEMA, ORACLE_SCHEMA, TRACE_SCHEMA};
use natlog::metrics::{evaluate, predict, EvalReport};
use natlog::trainer::{train, EpochMetrics, RevisionStats, TrainConfig, TrainExample};
use natlog::{ActionRelation, Lexicon, LinearPolicyF64, NliLabel, Policy, ProjectivityContext, Relation};

/// Parsed command line.
#[derive(Debug, Parser)]
#[command(name = "natlog", version, about = "Natural-logic inference: data generation, training, evaluation and proofs")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate train/test/noise/2-hop datasets.
    Gen(GenArgs),
    /// Train a policy and write its checkpoint and per-epoch metrics.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled dataset.
    Eval(EvalArgs),
    /// Print the greedy proof trace for one sentence pair.
    Prove(ProveArgs),
    /// Count label-reaching programs per example by exhaustive enumeration.
    Oracle(OracleArgs),
}

/// Grammar and lexicon overrides shared by every subcommand. The embedded
/// fragment is used when a path is absent.
#[derive(Debug, Clone, Default, Args)]
pub struct Resources {
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub grammar: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Generation spec (TOML). Defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub resources: Resources,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training config (TOML). Defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset file, or a directory holding `train.jsonl`.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch metrics file; defaults to the checkpoint path with a
    /// `.metrics.jsonl` extension.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[command(flatten)]
    pub resources: Resources,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset file, or a directory holding `test.jsonl`.
    #[arg(long)]
    pub data: PathBuf,
    /// Report file; per-example predictions go next to it as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Headline accuracy over entailment vs non-entailment.
    #[arg(long)]
    pub collapse_binary: bool,
    #[command(flatten)]
    pub resources: Resources,
}

#[derive(Debug, Clone, Args)]
pub struct ProveArgs {
    /// Policy checkpoint; an all-zero policy is used when absent.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub premise: String,
    #[arg(long)]
    pub hypothesis: String,
    /// Also write the trace record here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub resources: Resources,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Examples with more hypothesis chunks than this are skipped.
    #[arg(long, default_value_t = 6)]
    pub max_m: usize,
    #[command(flatten)]
    pub resources: Resources,
}

/// Failure raised by the CLI itself rather than the engine.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn cli_error(kind: &'static str, message: impl Into<String>) -> anyhow::Error {
    CliError { kind, message: message.into() }.into()
}

/// Machine-readable error record: `{"error": kind, "message": text}`.
pub fn error_record(err: &anyhow::Error) -> serde_json::Value {
    let kind = if let Some(e) = err.downcast_ref::<CliError>() {
        e.kind
    } else if let Some(e) = err.downcast_ref::<natlog::Error>() {
        e.kind()
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        "io"
    } else {
        "internal"
    };
    serde_json::json!({ "error": kind, "message": format!("{err:#}") })
}

pub fn run(cfg: RunConfig, out: &mut dyn Write) -> Result<()> {
    match cfg.command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Train(a) => cmd_train(&a, out).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a, out).map(|_| ()),
        Command::Prove(a) => cmd_prove(&a, out).map(|_| ()),
        Command::Oracle(a) => cmd_oracle(&a, out).map(|_| ()),
    }
}

fn require(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        return Err(cli_error("missing_path", format!("{what} `{}` does not exist", path.display())));
    }
    Ok(())
}

impl Resources {
    pub fn rules(&self) -> Result<ChunkRules> {
        match &self.grammar {
            Some(p) => {
                require(p, "grammar")?;
                Ok(ChunkRules::load(p).with_context(|| format!("loading grammar {}", p.display()))?)
            }
            None => Ok(ChunkRules::fragment()),
        }
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        match &self.lexicon {
            Some(p) => {
                require(p, "lexicon")?;
                Ok(Lexicon::load(p).with_context(|| format!("loading lexicon {}", p.display()))?)
            }
            None => Ok(Lexicon::fragment()),
        }
    }
}

/// A dataset path, or `dir/default_name` when it names a directory.
fn dataset_path(path: &Path, default_name: &str) -> Result<PathBuf> {
    require(path, "dataset")?;
    Ok(if path.is_dir() { path.join(default_name) } else { path.to_path_buf() })
}

fn load_dataset(path: &Path) -> Result<Vec<LabeledExample>> {
    require(path, "dataset")?;
    load_jsonl(path, DATASET_SCHEMA).with_context(|| format!("reading {}", path.display()))
}

pub fn load_checkpoint(path: &Path) -> Result<LinearPolicyF64> {
    require(path, "checkpoint")?;
    let text = fs::read_to_string(path)?;
    LinearPolicyF64::from_checkpoint(&text).with_context(|| format!("reading checkpoint {}", path.display()))
}

pub const SPLIT_FILES: [&str; 4] = ["train.jsonl", "test.jsonl", "test_noise.jsonl", "two_hop.jsonl"];

pub fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let mut spec = match &args.config {
        Some(p) => {
            require(p, "generation spec")?;
            GenSpec::load(p)?
        }
        None => GenSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let rules = args.resources.rules()?;
    let data = generate(&spec, &rules)?;
    fs::create_dir_all(&args.out)?;
    let splits = [&data.train, &data.test, &data.test_noise, &data.two_hop];
    for (name, split) in SPLIT_FILES.iter().zip(splits) {
        let path = args.out.join(name);
        save_jsonl(&path, DATASET_SCHEMA, split)?;
        writeln!(out, "{:<18} {:>6} examples", name, split.len())?;
    }
    Ok(())
}

/// Path of the metrics file written by `train` when `--metrics` is absent.
pub fn default_metrics_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("metrics.jsonl")
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<Vec<EpochMetrics>> {
    let mut cfg = match &args.config {
        Some(p) => {
            require(p, "training config")?;
            TrainConfig::load(p)?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let rules = args.resources.rules()?;
    let lex = args.resources.lexicon()?;
    let data = load_dataset(&dataset_path(&args.data, "train.jsonl")?)?;
    let examples = data.iter().map(|e| e.to_train_example(&rules)).collect::<natlog::Result<Vec<TrainExample>>>()?;

    let mut policy = LinearPolicyF64::zeros();
    let mut io_err = None;
    let history = train(&mut policy, &examples, &lex, &cfg, |m| {
        if io_err.is_none() {
            io_err = writeln!(out, "{}", epoch_line(m, cfg.epochs)).err();
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    let mut total = RevisionStats::default();
    for m in &history {
        merge(&mut total, &m.revisions);
    }
    write_revision_table(out, &total)?;

    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&args.out, policy.to_checkpoint())?;
    let metrics = args.metrics.clone().unwrap_or_else(|| default_metrics_path(&args.out));
    save_jsonl(&metrics, METRICS_SCHEMA, &history)?;
    Ok(history)
}

fn epoch_line(m: &EpochMetrics, epochs: usize) -> String {
    let r = &m.revisions;
    format!(
        "epoch {:>3}/{epochs}  train_acc {:.4}  reward {:+.4}  objective {:.4}  sampled_correct {}/{}  revised k={} a={} both={} none={}",
        m.epoch, m.train_accuracy, m.mean_reward, m.mean_objective, m.sampled_correct, m.episodes, r.knowledge_only, r.answer_only, r.both, r.unrevised
    )
}

fn merge(into: &mut RevisionStats, s: &RevisionStats) {
    into.episodes += s.episodes;
    into.knowledge_only += s.knowledge_only;
    into.answer_only += s.answer_only;
    into.both += s.both;
    into.unrevised += s.unrevised;
    into.knowledge_edits += s.knowledge_edits;
    into.answer_edits += s.answer_edits;
    for (k, v) in &s.knowledge_by_relation {
        *into.knowledge_by_relation.entry(*k).or_default() += v;
    }
    for (k, v) in &s.answer_by_relation {
        *into.answer_by_relation.entry(*k).or_default() += v;
    }
}

fn write_revision_table(out: &mut dyn Write, s: &RevisionStats) -> Result<()> {
    writeln!(out, "revised episodes: knowledge {} answer {} both {} none {} (of {})", s.knowledge_only, s.answer_only, s.both, s.unrevised, s.episodes)?;
    writeln!(out, "{:<20} {:>10} {:>8}", "relation", "knowledge", "answer")?;
    for a in ActionRelation::ALL {
        let k = s.knowledge_by_relation.get(&a).copied().unwrap_or(0);
        let n = s.answer_by_relation.get(&a).copied().unwrap_or(0);
        writeln!(out, "{:<20} {:>10} {:>8}", a.name(), k, n)?;
    }
    writeln!(out, "{:<20} {:>10} {:>8}", "total", s.knowledge_edits, s.answer_edits)?;
    Ok(())
}

/// The `eval` report file's single record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub collapse_binary: bool,
    /// Three-way accuracy, or the binary one under `--collapse-binary`.
    pub accuracy: f64,
    pub report: EvalReport,
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<EvalRecord> {
    let rules = args.resources.rules()?;
    let lex = args.resources.lexicon()?;
    let policy = load_checkpoint(&args.checkpoint)?;
    let data = load_dataset(&dataset_path(&args.data, "test.jsonl")?)?;
    let report = evaluate(&policy, &data, &rules, &lex)?;
    let accuracy = if args.collapse_binary { report.binary_label_accuracy } else { report.label_accuracy };
    let record = EvalRecord { collapse_binary: args.collapse_binary, accuracy, report };

    let r = &record.report;
    writeln!(out, "examples            {}", r.examples)?;
    writeln!(out, "label accuracy      {:.4}{}", accuracy, if args.collapse_binary { " (binary)" } else { "" })?;
    writeln!(out, "binary accuracy     {:.4}", r.binary_label_accuracy)?;
    writeln!(out, "state accuracy      {:.4}", r.state_accuracy)?;
    writeln!(out, "rationale IOU       {:.4}", r.rationale_iou)?;
    writeln!(out, "rationale P/R/F1    {:.4} / {:.4} / {:.4}", r.rationale_precision, r.rationale_recall, r.rationale_f1)?;

    if let Some(path) = &args.out {
        save_jsonl(path, EVAL_SCHEMA, std::slice::from_ref(&record))?;
        write_predictions(&path.with_extension("csv"), &policy, &data, &rules, &lex)?;
    }
    Ok(record)
}

fn join_states(states: &[Relation]) -> String {
    states.iter().map(|r| r.symbol()).collect::<Vec<_>>().join(" ")
}

fn join_indices<'a>(xs: impl IntoIterator<Item = &'a usize>) -> String {
    xs.into_iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn write_predictions(
    path: &Path,
    policy: &LinearPolicyF64,
    data: &[LabeledExample],
    rules: &ChunkRules,
    lex: &Lexicon,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "index", "split", "premise", "hypothesis", "gold", "predicted", "correct", "gold_states", "predicted_states",
        "gold_rationale", "predicted_rationale",
    ])?;
    for (i, ex) in data.iter().enumerate() {
        let p = predict(policy, &ex.chunked(rules)?, lex)?;
        w.write_record([
            i.to_string(),
            ex.split_tag.clone(),
            ex.premise.clone(),
            ex.hypothesis.clone(),
            ex.label.name().to_string(),
            p.label.name().to_string(),
            (p.label == ex.label).to_string(),
            join_states(&ex.gold_states),
            join_states(p.trace.step_states()),
            join_indices(&ex.gold_rationale_tokens),
            join_indices(&p.rationale_tokens),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub text: String,
    pub start: usize,
    pub context: Vec<String>,
}

/// One executed proof, as written by `prove --out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub premise: String,
    pub hypothesis: String,
    pub chunks: Vec<ChunkRecord>,
    pub program: Program,
    pub projected: Vec<Relation>,
    /// `z_0..z_m`
    pub states: Vec<Relation>,
    pub label: NliLabel,
    /// 1-based steps.
    pub rationales: Vec<usize>,
}

fn context_names(ctx: &ProjectivityContext) -> Vec<String> {
    ctx.layers().iter().map(|m| m.name().to_string()).collect()
}

fn context_label(ctx: &ProjectivityContext) -> String {
    if ctx.is_upward() && ctx.layers().is_empty() {
        "upward".into()
    } else {
        context_names(ctx).join(">")
    }
}

pub fn prove_pair(policy: &LinearPolicyF64, pair: &ChunkedPair, lex: &Lexicon, premise: &str, hypothesis: &str) -> Result<TraceRecord> {
    let program = policy.greedy_program(pair, lex)?;
    let trace = execute(pair, &program)?;
    Ok(TraceRecord {
        premise: premise.into(),
        hypothesis: hypothesis.into(),
        chunks: pair
            .hypothesis
            .iter()
            .map(|c| ChunkRecord { text: c.text(), start: c.start, context: context_names(&c.context) })
            .collect(),
        program,
        projected: trace.projected,
        states: trace.states,
        label: trace.label,
        rationales: trace.rationales,
    })
}

/// Renders the step table: chunk, context, chosen relation, projected
/// relation and running state.
pub fn render_trace(rec: &TraceRecord, pair: &ChunkedPair) -> String {
    let width = pair.hypothesis.iter().map(|c| c.text().chars().count()).max().unwrap_or(0).max(5);
    let cwidth = pair.hypothesis.iter().map(|c| context_label(&c.context).len()).max().unwrap_or(0).max(7);
    let mut s = String::new();
    s += &format!("premise     {}\nhypothesis  {}\n\n", rec.premise, rec.hypothesis);
    s += &format!("{:>2}  {:<width$}  {:<cwidth$}  r_t  r\u{304}_t  z_t\n", "t", "chunk", "context");
    s += &format!("{:>2}  {:<width$}  {:<cwidth$}  {:<3}  {:<3}  {}\n", 0, "", "", "", "", rec.states[0].symbol());
    for (i, c) in pair.hypothesis.iter().enumerate() {
        s += &format!(
            "{:>2}  {:<width$}  {:<cwidth$}  {:<3}  {:<3}  {}\n",
            i + 1,
            c.text(),
            context_label(&c.context),
            rec.program.at(i + 1).symbol(),
            rec.projected[i].symbol(),
            rec.states[i + 1].symbol(),
        );
    }
    let rationale = if rec.rationales.is_empty() {
        "none".to_string()
    } else {
        rec.rationales.iter().map(|&t| format!("{t} ({})", pair.chunk(t).text())).collect::<Vec<_>>().join(", ")
    };
    s += &format!("\nlabel       {}\nrationale   {}\n", rec.label.name(), rationale);
    s
}

pub fn cmd_prove(args: &ProveArgs, out: &mut dyn Write) -> Result<TraceRecord> {
    let rules = args.resources.rules()?;
    let lex = args.resources.lexicon()?;
    let policy = match &args.checkpoint {
        Some(p) => load_checkpoint(p)?,
        None => LinearPolicyF64::zeros(),
    };
    let pair = ChunkedPair::parse(&args.premise, &args.hypothesis, &rules)?;
    let rec = prove_pair(&policy, &pair, &lex, &args.premise, &args.hypothesis)?;
    out.write_all(render_trace(&rec, &pair).as_bytes())?;
    if let Some(path) = &args.out {
        save_jsonl(path, TRACE_SCHEMA, std::slice::from_ref(&rec))?;
    }
    Ok(rec)
}

/// Per-example enumeration result. Counts are absent for skipped examples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub index: usize,
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    pub m: usize,
    pub skipped: bool,
    pub label_reaching: Option<usize>,
    pub gold_reaches_label: Option<bool>,
    /// Label-reaching programs that differ from the gold program.
    pub spurious: Option<usize>,
    pub spurious_ratio: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub examples: usize,
    pub skipped: usize,
    pub label_reaching: usize,
    pub spurious: usize,
    /// `spurious / label_reaching` pooled over examples.
    pub spurious_ratio: f64,
}

pub fn oracle_record(index: usize, ex: &LabeledExample, pair: &ChunkedPair, max_m: usize) -> Result<OracleRecord> {
    let m = pair.m();
    let mut rec = OracleRecord {
        index,
        premise: ex.premise.clone(),
        hypothesis: ex.hypothesis.clone(),
        label: ex.label,
        m,
        skipped: true,
        label_reaching: None,
        gold_reaches_label: None,
        spurious: None,
        spurious_ratio: None,
    };
    if m > max_m {
        return Ok(rec);
    }
    let programs = enumerate_programs(pair, ex.label, max_m)?;
    let gold_in = programs.contains(&ex.gold_program);
    let spurious = programs.len() - gold_in as usize;
    rec.skipped = false;
    rec.label_reaching = Some(programs.len());
    rec.gold_reaches_label = Some(gold_in);
    rec.spurious = Some(spurious);
    rec.spurious_ratio = Some(if programs.is_empty() { 0.0 } else { spurious as f64 / programs.len() as f64 });
    Ok(rec)
}

pub fn cmd_oracle(args: &OracleArgs, out: &mut dyn Write) -> Result<OracleSummary> {
    let rules = args.resources.rules()?;
    let data = load_dataset(&args.data)?;
    let mut records = Vec::with_capacity(data.len());
    let mut summary = OracleSummary { examples: data.len(), ..OracleSummary::default() };
    for (i, ex) in data.iter().enumerate() {
        let rec = oracle_record(i, ex, &ex.chunked(&rules)?, args.max_m)?;
        if rec.skipped {
            summary.skipped += 1;
        }
        summary.label_reaching += rec.label_reaching.unwrap_or(0);
        summary.spurious += rec.spurious.unwrap_or(0);
        records.push(rec);
    }
    if summary.label_reaching > 0 {
        summary.spurious_ratio = summary.spurious as f64 / summary.label_reaching as f64;
    }
    save_jsonl(&args.out, ORACLE_SCHEMA, &records)?;
    let scored = summary.examples - summary.skipped;
    writeln!(out, "examples {} (skipped {} above m={})", summary.examples, summary.skipped, args.max_m)?;
    if scored > 0 {
        writeln!(out, "mean label-reaching programs {:.2}", summary.label_reaching as f64 / scored as f64)?;
    }
    writeln!(out, "spurious ratio {:.4}", summary.spurious_ratio)?;
    Ok(summary)
}
