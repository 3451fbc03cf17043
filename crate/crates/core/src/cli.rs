//! Subcommand definitions and their wiring to the library.
//!
//! Every option can also come from a flat TOML file passed with `--config`;
//! keys are the long flag names with `-` replaced by `_`, and a flag given on
//! the command line wins over the file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use goalplot::checkpoint::{load_checkpoint, save_checkpoint, to_bytes};
use goalplot::clusters::{build_cluster_index, ClusterIndex};
use goalplot::eval::{
    corpus_row, evaluate_model, run_experiment, seed_events, EvaluationReport, ExperimentConfig,
    CLUSTERED, SEQ2SEQ, UNRESTRICTED,
};
use goalplot::event::{parse_corpus, parse_event, split_corpus, Corpus, Event};
use goalplot::eventifier::{eventify_corpus, parse_clauses, Lexicon};
use goalplot::io::{read_to_string, write_atomic};
use goalplot::model::{pretrain_with, ModelConfig};
use goalplot::reinforce::{
    finetune_observed, FinetuneConfig, FinetuneMode, FinetuneObserver, StepReport,
};
use goalplot::reward::RewardTable;
use goalplot::rollout::{
    batch_generate, rollout_meta, Decoding, GenerationConfig, DEFAULT_MAX_LENGTH,
};
use goalplot::synthetic::{make_synthetic, SyntheticConfig};
use goalplot::Error;

#[derive(Parser)]
#[command(
    name = "goalplot",
    version,
    about = "Goal-directed plot generation over story events"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn a clause file into an event corpus.
    Eventify(EventifyArgs),
    /// Compute the per-verb reward table and verb clusters for a goal.
    Rewards(RewardsArgs),
    /// Train the event-to-event model by maximum likelihood.
    Pretrain(PretrainArgs),
    /// Fine-tune a pretrained checkpoint with the reward-weighted policy gradient.
    Finetune(FinetuneArgs),
    /// Generate plots from seed events.
    Generate(GenerateArgs),
    /// Score checkpoints on the held-out split.
    Evaluate(EvaluateArgs),
    /// Run split, rewards, pretraining, both fine-tunes and evaluation end to end.
    Experiment(ExperimentArgs),
    /// Write the synthetic verb-ladder corpus.
    #[command(hide = true)]
    MakeSynthetic(SyntheticArgs),
}

#[derive(Args)]
struct Common {
    /// Flat TOML file supplying defaults for any option.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; more specific seeds default to it.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SplitArgs {
    /// Share of stories held out for testing; 0 uses the whole corpus for both.
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Args)]
struct FinetuneSettings {
    #[arg(long)]
    finetune_epochs: Option<usize>,
    #[arg(long)]
    finetune_learning_rate: Option<f64>,
    #[arg(long)]
    finetune_seed: Option<u64>,
}

#[derive(Args)]
struct EventifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    clauses: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RewardsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    goal: Option<String>,
    /// Number of verb clusters.
    #[arg(long)]
    k: Option<usize>,
    /// Reward table output (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cluster report output (JSON).
    #[arg(long)]
    clusters: Option<PathBuf>,
}

#[derive(Args)]
struct PretrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Checkpoint output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FinetuneArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    finetune: FinetuneSettings,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Pretrained checkpoint to start from.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Reward table written by `rewards`.
    #[arg(long)]
    rewards: Option<PathBuf>,
    /// Cluster report written by `rewards`; required in clustered mode.
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// clustered or unrestricted.
    #[arg(long)]
    mode: Option<String>,
    /// Per-step JSON-lines log.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// File of seed events, one per line.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// A seed event given inline; may be repeated.
    #[arg(long = "event")]
    events: Vec<String>,
    #[arg(long)]
    goal: Option<String>,
    #[arg(long)]
    max_length: Option<usize>,
    /// greedy or sample.
    #[arg(long)]
    decoding: Option<String>,
    #[arg(long)]
    generation_seed: Option<u64>,
    /// Restrict generated verbs to the next cluster up, as during fine-tuning.
    #[arg(long)]
    mask_decode: bool,
    /// Cluster report; required with --mask-decode.
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Generated stories; metadata goes to `<out>.meta.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// `NAME=PATH` or `PATH`; may be repeated.
    #[arg(long = "checkpoint")]
    checkpoints: Vec<String>,
    #[arg(long)]
    goal: Option<String>,
    #[arg(long)]
    max_length: Option<usize>,
    #[arg(long)]
    generation_seed: Option<u64>,
    #[arg(long)]
    mask_decode: bool,
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Report output (JSON); the text table goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    finetune: FinetuneSettings,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    goal: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_length: Option<usize>,
    #[arg(long)]
    generation_seed: Option<u64>,
    /// Directory for the report, reward table, clusters and checkpoints.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SyntheticArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    stories: Option<usize>,
    #[arg(long)]
    ladder: Option<usize>,
    #[arg(long)]
    noise_rate: Option<f64>,
    #[arg(long)]
    advance_rate: Option<f64>,
    #[arg(long)]
    end_rate: Option<f64>,
    #[arg(long)]
    goal_repeat_rate: Option<f64>,
    #[arg(long)]
    max_events: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

const KNOWN_KEYS: &[&str] = &[
    "advance_rate",
    "batch_size",
    "checkpoint",
    "clauses",
    "clusters",
    "corpus",
    "decoding",
    "embed_dim",
    "end_rate",
    "epochs",
    "event",
    "finetune_epochs",
    "finetune_learning_rate",
    "finetune_seed",
    "generation_seed",
    "goal",
    "goal_repeat_rate",
    "hidden_dim",
    "k",
    "ladder",
    "learning_rate",
    "lexicon",
    "log",
    "mask_decode",
    "max_events",
    "max_length",
    "mode",
    "noise_rate",
    "out",
    "out_dir",
    "rewards",
    "seed",
    "seeds",
    "split_seed",
    "stories",
    "test_fraction",
];

/// Options read from `--config`.
struct FileConfig(toml::Table);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig(toml::Table::new()));
        };
        let text = read_to_string(path)?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        for (key, value) in &table {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(input_error(format!(
                    "{}: unknown key `{key}`",
                    path.display()
                )));
            }
            if value.is_table() {
                return Err(input_error(format!(
                    "{}: `{key}` is a table; the config file is flat",
                    path.display()
                )));
            }
        }
        Ok(FileConfig(table))
    }

    fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .map_err(|e| input_error(format!("config key `{key}`: {e}"))),
        }
    }

    /// Command-line value, else file value, else `default`.
    fn or<T: DeserializeOwned>(&self, cli: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.opt(cli, key)?.unwrap_or(default))
    }

    fn opt<T: DeserializeOwned>(&self, cli: Option<T>, key: &str) -> Result<Option<T>> {
        match cli {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    fn required<T: DeserializeOwned>(&self, cli: Option<T>, key: &str) -> Result<T> {
        self.opt(cli, key)?.ok_or_else(|| {
            input_error(format!(
                "missing --{} (or `{key}` in the config file)",
                key.replace('_', "-")
            ))
        })
    }

    fn flag(&self, cli: bool, key: &str) -> Result<bool> {
        Ok(cli || self.get(key)?.unwrap_or(false))
    }

    fn seed(&self, common: &Common) -> Result<u64> {
        self.or(common.seed, "seed", 0)
    }
}

fn input_error(message: String) -> anyhow::Error {
    Error::InvalidArgument(message).into()
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = read_to_string(path)?;
    Ok(parse_corpus(&text).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })?)
}

/// Train and test corpora; a zero test fraction uses the whole corpus for both.
fn split(
    corpus: &Corpus,
    file: &FileConfig,
    args: &SplitArgs,
    seed: u64,
) -> Result<(Corpus, Corpus)> {
    let fraction = file.or(args.test_fraction, "test_fraction", 0.1)?;
    let split_seed = file.or(args.split_seed, "split_seed", seed)?;
    if fraction == 0.0 {
        return Ok((corpus.clone(), corpus.clone()));
    }
    let split = split_corpus(corpus, fraction, split_seed)?;
    Ok((split.train(), split.test()))
}

fn model_config(file: &FileConfig, args: &ModelArgs, seed: u64) -> Result<ModelConfig> {
    let d = ModelConfig::default();
    let config = ModelConfig {
        embed_dim: file.or(args.embed_dim, "embed_dim", d.embed_dim)?,
        hidden_dim: file.or(args.hidden_dim, "hidden_dim", d.hidden_dim)?,
        epochs: file.or(args.epochs, "epochs", d.epochs)?,
        batch_size: file.or(args.batch_size, "batch_size", d.batch_size)?,
        learning_rate: file.or(args.learning_rate, "learning_rate", d.learning_rate)?,
        seed,
        gamma: d.gamma,
    };
    config.validate()?;
    Ok(config)
}

fn finetune_config(
    file: &FileConfig,
    args: &FinetuneSettings,
    mode: FinetuneMode,
    seed: u64,
) -> Result<FinetuneConfig> {
    let d = FinetuneConfig::default();
    Ok(FinetuneConfig {
        mode,
        epochs: file.or(args.finetune_epochs, "finetune_epochs", d.epochs)?,
        learning_rate: file.or(
            args.finetune_learning_rate,
            "finetune_learning_rate",
            d.learning_rate,
        )?,
        seed: file.or(args.finetune_seed, "finetune_seed", seed)?,
    })
}

/// Files written by the current command; removed again unless the command
/// finishes successfully.
#[derive(Default)]
struct Outputs {
    written: Vec<PathBuf>,
    done: bool,
}

impl Outputs {
    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn commit(mut self) {
        self.done = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.done {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eventify(a) => eventify(a),
        Command::Rewards(a) => rewards(a),
        Command::Pretrain(a) => pretrain(a),
        Command::Finetune(a) => finetune(a),
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(a) => experiment(a),
        Command::MakeSynthetic(a) => synthetic(a),
    }
}

fn eventify(a: EventifyArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let clauses: PathBuf = file.required(a.clauses, "clauses")?;
    let lexicon: PathBuf = file.required(a.lexicon, "lexicon")?;
    let out: PathBuf = file.required(a.out, "out")?;

    let lexicon = Lexicon::load(&lexicon)?;
    let text = read_to_string(&clauses)?;
    let stories = parse_clauses(&text)?;
    let corpus = eventify_corpus(&stories, &lexicon)?;
    let events: usize = corpus.stories.iter().map(|s| s.len()).sum();

    let mut outputs = Outputs::default();
    outputs.write(&out, corpus.to_text().as_bytes())?;
    outputs.commit();
    println!("{} stories, {events} events", corpus.len());
    Ok(())
}

fn rewards(a: RewardsArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let seed = file.seed(&a.common)?;
    let corpus_path: PathBuf = file.required(a.corpus, "corpus")?;
    let goal: String = file.required(a.goal, "goal")?;
    let k = file.or(a.k, "k", 5)?;
    let out: PathBuf = file.required(a.out, "out")?;
    let clusters_out: Option<PathBuf> = file.opt(a.clusters, "clusters")?;

    let corpus = load_corpus(&corpus_path)?;
    let (train, _) = split(&corpus, &file, &a.split, seed)?;
    let table = RewardTable::from_corpus(&train, &goal)?;
    let index = build_cluster_index(&table, k)?;

    let mut outputs = Outputs::default();
    outputs.write(&out, table.to_json()?.as_bytes())?;
    if let Some(path) = &clusters_out {
        outputs.write(path, index.to_json()?.as_bytes())?;
    }
    outputs.commit();

    println!("goal {goal}, alpha {:.6}", table.alpha);
    for (verb, r) in table.ranked().into_iter().take(10) {
        let cluster = index
            .cluster_of(verb)
            .map_or_else(|| "-".to_string(), |c| c.to_string());
        println!("{r:>10.6}  cluster {cluster:>2}  {verb}");
    }
    Ok(())
}

fn pretrain(a: PretrainArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let seed = file.seed(&a.common)?;
    let corpus_path: PathBuf = file.required(a.corpus, "corpus")?;
    let out: PathBuf = file.required(a.out, "out")?;
    let config = model_config(&file, &a.model, seed)?;

    let corpus = load_corpus(&corpus_path)?;
    let (train, test) = split(&corpus, &file, &a.split, seed)?;
    let model = pretrain_with(&train, &config, |s| {
        eprintln!("epoch {:>4}  loss {:.5}", s.epoch + 1, s.mean_loss);
    })?;

    let mut outputs = Outputs::default();
    outputs.write(&out, &to_bytes(&model))?;
    outputs.commit();
    println!(
        "train perplexity {:.4}, test perplexity {:.4}",
        model.perplexity(&train)?,
        model.perplexity(&test)?
    );
    Ok(())
}

/// Collects the per-step log as JSON lines and reports progress per epoch.
struct StepLog {
    lines: Option<String>,
    reward_sum: f64,
    steps: usize,
}

impl FinetuneObserver for StepLog {
    fn on_step(&mut self, report: &StepReport) {
        self.reward_sum += report.reward;
        self.steps += 1;
        if let Some(lines) = &mut self.lines {
            // StepReport holds only strings and finite floats.
            let _ = writeln!(
                lines,
                "{}",
                serde_json::to_string(report).expect("serializable step")
            );
        }
    }

    fn on_epoch_end(&mut self, epoch: usize, _model: &goalplot::EventModel) {
        eprintln!(
            "epoch {:>4}  mean reward {:.5}",
            epoch + 1,
            self.reward_sum / self.steps.max(1) as f64
        );
        self.reward_sum = 0.0;
        self.steps = 0;
    }
}

fn finetune(a: FinetuneArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let seed = file.seed(&a.common)?;
    let corpus_path: PathBuf = file.required(a.corpus, "corpus")?;
    let checkpoint: PathBuf = file.required(a.checkpoint, "checkpoint")?;
    let rewards_path: PathBuf = file.required(a.rewards, "rewards")?;
    let clusters_path: Option<PathBuf> = file.opt(a.clusters, "clusters")?;
    let mode: FinetuneMode = file.or(a.mode, "mode", "clustered".to_string())?.parse()?;
    let log: Option<PathBuf> = file.opt(a.log, "log")?;
    let out: PathBuf = file.required(a.out, "out")?;
    let config = finetune_config(&file, &a.finetune, mode, seed)?;

    let corpus = load_corpus(&corpus_path)?;
    let (train, test) = split(&corpus, &file, &a.split, seed)?;
    let base = load_checkpoint(&checkpoint)?;
    let table = RewardTable::load(&rewards_path)?;
    let index = clusters_path
        .as_deref()
        .map(ClusterIndex::load)
        .transpose()?;
    if mode == FinetuneMode::Clustered && index.is_none() {
        return Err(Error::MissingClusterIndex.into());
    }

    let mut observer = StepLog {
        lines: log.as_ref().map(|_| String::new()),
        reward_sum: 0.0,
        steps: 0,
    };
    let model = finetune_observed(
        &base,
        &train,
        &table,
        index.as_ref(),
        &config,
        &mut observer,
    )?;

    let mut outputs = Outputs::default();
    outputs.write(&out, &to_bytes(&model))?;
    if let (Some(path), Some(lines)) = (&log, &observer.lines) {
        outputs.write(path, lines.as_bytes())?;
    }
    outputs.commit();
    println!("test perplexity {:.4}", model.perplexity(&test)?);
    Ok(())
}

fn read_seed_events(path: &Path) -> Result<Vec<Event>> {
    let text = read_to_string(path)?;
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let e = parse_event(line).with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        if !e.is_eos() {
            events.push(e);
        }
    }
    Ok(events)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let seed = file.seed(&a.common)?;
    let checkpoint: PathBuf = file.required(a.checkpoint, "checkpoint")?;
    let seeds_path: Option<PathBuf> = file.opt(a.seeds, "seeds")?;
    let inline: Vec<String> = if a.events.is_empty() {
        file.get("event")?.unwrap_or_default()
    } else {
        a.events
    };
    let goal: String = file.required(a.goal, "goal")?;
    let decoding: Decoding = file
        .or(a.decoding, "decoding", "greedy".to_string())?
        .parse()?;
    let config = GenerationConfig {
        goal,
        max_length: file.or(a.max_length, "max_length", DEFAULT_MAX_LENGTH)?,
        decoding,
        seed: file.or(a.generation_seed, "generation_seed", seed)?,
    };
    let mask_decode = file.flag(a.mask_decode, "mask_decode")?;
    let clusters_path: Option<PathBuf> = file.opt(a.clusters, "clusters")?;
    let out: PathBuf = file.required(a.out, "out")?;

    let mut seeds = match &seeds_path {
        Some(p) => read_seed_events(p)?,
        None => Vec::new(),
    };
    for e in &inline {
        seeds.push(parse_event(e)?);
    }
    if seeds.is_empty() {
        return Err(input_error(
            "no seed events (use --seeds or --event)".into(),
        ));
    }
    let index = match (mask_decode, clusters_path) {
        (false, _) => None,
        (true, Some(p)) => Some(ClusterIndex::load(&p)?),
        (true, None) => return Err(input_error("--mask-decode needs --clusters".into())),
    };

    let model = load_checkpoint(&checkpoint)?;
    let results = batch_generate(&model, &seeds, &config, index.as_ref())?;
    let stories: Vec<_> = results.iter().map(|r| r.story.clone()).collect();
    let meta = serde_json::to_string_pretty(&rollout_meta(&results))? + "\n";

    let mut meta_path = out.clone().into_os_string();
    meta_path.push(".meta.json");
    let mut outputs = Outputs::default();
    outputs.write(&out, goalplot::event::format_corpus(&stories).as_bytes())?;
    outputs.write(Path::new(&meta_path), meta.as_bytes())?;
    outputs.commit();

    let reached = results
        .iter()
        .filter(|r| r.termination == goalplot::rollout::Termination::GoalReached)
        .count();
    println!("{} stories, {reached} reached the goal", results.len());
    Ok(())
}

/// Splits `NAME=PATH`; a bare path is named after its file stem.
fn named_checkpoint(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) => (name.to_string(), PathBuf::from(path)),
        None => {
            let path = PathBuf::from(spec);
            let name = path
                .file_stem()
                .map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (name, path)
        }
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let seed = file.seed(&a.common)?;
    let corpus_path: PathBuf = file.required(a.corpus, "corpus")?;
    let specs: Vec<String> = if a.checkpoints.is_empty() {
        match file.get::<toml::Value>("checkpoint")? {
            Some(toml::Value::String(s)) => vec![s],
            Some(v) => v
                .try_into()
                .map_err(|e| input_error(format!("config key `checkpoint`: {e}")))?,
            None => Vec::new(),
        }
    } else {
        a.checkpoints
    };
    if specs.is_empty() {
        return Err(input_error("missing --checkpoint".into()));
    }
    let goal: String = file.required(a.goal, "goal")?;
    let max_length = file.or(a.max_length, "max_length", DEFAULT_MAX_LENGTH)?;
    let generation = GenerationConfig {
        goal: goal.clone(),
        max_length,
        decoding: Decoding::Greedy,
        seed: file.or(a.generation_seed, "generation_seed", seed)?,
    };
    let mask_decode = file.flag(a.mask_decode, "mask_decode")?;
    let clusters_path: Option<PathBuf> = file.opt(a.clusters, "clusters")?;
    let out: Option<PathBuf> = file.opt(a.out, "out")?;

    let corpus = load_corpus(&corpus_path)?;
    let (_, test) = split(&corpus, &file, &a.split, seed)?;
    let index = match (mask_decode, clusters_path) {
        (false, _) => None,
        (true, Some(p)) => Some(ClusterIndex::load(&p)?),
        (true, None) => return Err(input_error("--mask-decode needs --clusters".into())),
    };

    let mut rows = vec![corpus_row(&test, &goal, max_length)?];
    for spec in &specs {
        let (name, path) = named_checkpoint(spec);
        let model = load_checkpoint(&path)?;
        rows.push(evaluate_model(&name, &model, &test, &generation, index.as_ref())?.0);
    }
    let report = EvaluationReport {
        goal,
        test_fingerprint: test.fingerprint(),
        test_stories: test.len(),
        seed_events: seed_events(&test).len(),
        max_length,
        mask_decode,
        rows,
    };

    let mut outputs = Outputs::default();
    if let Some(path) = &out {
        outputs.write(path, report.to_json()?.as_bytes())?;
    }
    outputs.commit();
    print!("{}", report.to_text());
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let seed = file.seed(&a.common)?;
    let corpus_path: PathBuf = file.required(a.corpus, "corpus")?;
    let goal: String = file.required(a.goal, "goal")?;
    let out_dir: PathBuf = file.required(a.out_dir, "out_dir")?;
    let d = ExperimentConfig::default();
    let ft = finetune_config(&file, &a.finetune, FinetuneMode::Clustered, seed)?;
    let config = ExperimentConfig {
        test_fraction: file.or(a.split.test_fraction, "test_fraction", d.test_fraction)?,
        split_seed: file.or(a.split.split_seed, "split_seed", seed)?,
        clusters: file.or(a.k, "k", d.clusters)?,
        model: model_config(&file, &a.model, seed)?,
        finetune_epochs: ft.epochs,
        finetune_learning_rate: ft.learning_rate,
        finetune_seed: ft.seed,
        max_length: file.or(a.max_length, "max_length", d.max_length)?,
        generation_seed: file.or(a.generation_seed, "generation_seed", seed)?,
    };

    let corpus = load_corpus(&corpus_path)?;
    let outcome = run_experiment(&corpus, &goal, &config)?;

    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut outputs = Outputs::default();
    let report = &outcome.report;
    outputs.write(&out_dir.join("report.json"), report.to_json()?.as_bytes())?;
    outputs.write(&out_dir.join("report.txt"), report.to_text().as_bytes())?;
    outputs.write(
        &out_dir.join("rewards.json"),
        outcome.rewards.to_json()?.as_bytes(),
    )?;
    outputs.write(
        &out_dir.join("clusters.json"),
        outcome.clusters.to_json()?.as_bytes(),
    )?;
    for (name, model) in [
        (SEQ2SEQ, &outcome.baseline),
        (UNRESTRICTED, &outcome.unrestricted),
        (CLUSTERED, &outcome.clustered),
    ] {
        let path = out_dir.join(format!("{}.ckpt", name.to_lowercase()));
        save_checkpoint(model, &path)?;
        outputs.written.push(path);
    }
    outputs.commit();
    print!("{}", report.to_text());
    Ok(())
}

fn synthetic(a: SyntheticArgs) -> Result<()> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let d = SyntheticConfig::default();
    let config = SyntheticConfig {
        stories: file.or(a.stories, "stories", d.stories)?,
        ladder: file.or(a.ladder, "ladder", d.ladder)?,
        noise_rate: file.or(a.noise_rate, "noise_rate", d.noise_rate)?,
        advance_rate: file.or(a.advance_rate, "advance_rate", d.advance_rate)?,
        end_rate: file.or(a.end_rate, "end_rate", d.end_rate)?,
        goal_repeat_rate: file.or(a.goal_repeat_rate, "goal_repeat_rate", d.goal_repeat_rate)?,
        max_events: file.or(a.max_events, "max_events", d.max_events)?,
        seed: file.seed(&a.common)?,
    };
    let out: PathBuf = file.required(a.out, "out")?;
    let corpus = make_synthetic(&config)?;
    let mut outputs = Outputs::default();
    outputs.write(&out, corpus.to_text().as_bytes())?;
    outputs.commit();
    println!("{} stories", corpus.len());
    Ok(())
}

/// Exit code for a failed command: library errors carry their own class,
/// anything else is internal.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    err.chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map_or(4, Error::exit_code)
}
