//! Goal achievement rate, perplexity and story length for the test corpus and
//! for each trained model, and the end-to-end experiment behind the report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::clusters::{build_cluster_index, ClusterIndex};
use crate::error::{Error, Result};
use crate::event::{split_corpus, Corpus, Event};
use crate::model::{pretrain, EventModel, ModelConfig};
use crate::reinforce::{finetune, FinetuneConfig, FinetuneMode};
use crate::reward::RewardTable;
use crate::rollout::{batch_generate, GenerationConfig, RolloutResult, Termination};

pub fn goal_achievement_rate(results: &[RolloutResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no rollouts to score".into()));
    }
    let hits = results
        .iter()
        .filter(|r| r.termination == Termination::GoalReached)
        .count();
    Ok(100.0 * hits as f64 / results.len() as f64)
}

/// Position (1-based) of the first goal event within the first `max_length`
/// plot events, if any.
fn goal_position(events: &[Event], goal: &str, max_length: usize) -> Option<usize> {
    events
        .iter()
        .take(max_length)
        .position(|e| e.verb == goal)
        .map(|p| p + 1)
}

/// Percentage of test stories whose goal event falls inside the generation horizon.
pub fn corpus_goal_rate(test: &Corpus, goal: &str, max_length: usize) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::NoStories);
    }
    let hits = test
        .stories
        .iter()
        .filter(|s| goal_position(s.plot(), goal, max_length).is_some())
        .count();
    Ok(100.0 * hits as f64 / test.len() as f64)
}

pub fn avg_rollout_length(results: &[RolloutResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no rollouts to measure".into()));
    }
    Ok(results.iter().map(|r| r.len() as f64).sum::<f64>() / results.len() as f64)
}

/// Mean length of test stories up to their goal event; stories without the
/// goal inside the horizon count as `max_length`.
pub fn avg_corpus_length(test: &Corpus, goal: &str, max_length: usize) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::NoStories);
    }
    let total: usize = test
        .stories
        .iter()
        .map(|s| goal_position(s.plot(), goal, max_length).unwrap_or(max_length))
        .sum();
    Ok(total as f64 / test.len() as f64)
}

/// Every plot event of the held-out stories, in corpus order.
pub fn seed_events(test: &Corpus) -> Vec<Event> {
    test.stories
        .iter()
        .flat_map(|s| s.plot().iter().cloned())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub goal_rate: f64,
    /// Absent for the test corpus, which is not a model.
    pub perplexity: Option<f64>,
    pub avg_length: f64,
    pub checkpoint_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub goal: String,
    pub corpus_fingerprint: String,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    pub train_stories: usize,
    pub test_stories: usize,
    pub seed_events: usize,
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, model: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_text(&self) -> String {
        render_rows(&self.goal, &self.rows)
    }
}

/// Report for `evaluate`: externally trained checkpoints scored on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub goal: String,
    pub test_fingerprint: String,
    pub test_stories: usize,
    pub seed_events: usize,
    pub max_length: usize,
    pub mask_decode: bool,
    pub rows: Vec<ReportRow>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_text(&self) -> String {
        render_rows(&self.goal, &self.rows)
    }
}

fn render_rows(goal: &str, rows: &[ReportRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "goal: {goal}");
    let _ = writeln!(
        out,
        "{:<14} {:>10} {:>12} {:>12}",
        "model", "goal rate", "perplexity", "avg length"
    );
    for r in rows {
        let ppl = r
            .perplexity
            .map_or_else(|| "n/a".to_string(), |p| format!("{p:.2}"));
        let _ = writeln!(
            out,
            "{:<14} {:>9.2}% {:>12} {:>12.2}",
            r.model, r.goal_rate, ppl, r.avg_length
        );
    }
    out
}

pub const TEST_CORPUS: &str = "Test Corpus";
pub const SEQ2SEQ: &str = "Seq2Seq";
pub const UNRESTRICTED: &str = "Unrestricted";
pub const CLUSTERED: &str = "Clustered";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub test_fraction: f64,
    pub split_seed: u64,
    pub clusters: usize,
    pub model: ModelConfig,
    pub finetune_epochs: usize,
    pub finetune_learning_rate: f64,
    pub finetune_seed: u64,
    pub max_length: usize,
    pub generation_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ft = FinetuneConfig::default();
        ExperimentConfig {
            test_fraction: 0.1,
            split_seed: 0,
            clusters: 5,
            model: ModelConfig::default(),
            finetune_epochs: ft.epochs,
            finetune_learning_rate: ft.learning_rate,
            finetune_seed: ft.seed,
            max_length: crate::rollout::DEFAULT_MAX_LENGTH,
            generation_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn finetune(&self, mode: FinetuneMode) -> FinetuneConfig {
        FinetuneConfig {
            mode,
            epochs: self.finetune_epochs,
            learning_rate: self.finetune_learning_rate,
            seed: self.finetune_seed,
        }
    }
}

/// Evaluates one model on the held-out split with one rollout from every
/// test event. `mask` restricts generated verbs cluster by cluster.
pub fn evaluate_model(
    name: &str,
    model: &EventModel,
    test: &Corpus,
    generation: &GenerationConfig,
    mask: Option<&ClusterIndex>,
) -> Result<(ReportRow, Vec<RolloutResult>)> {
    let seeds = seed_events(test);
    let results = batch_generate(model, &seeds, generation, mask)?;
    let row = ReportRow {
        model: name.to_string(),
        goal_rate: goal_achievement_rate(&results)?,
        perplexity: Some(model.perplexity(test)?),
        avg_length: avg_rollout_length(&results)?,
        checkpoint_digest: Some(checkpoint::digest(model)),
    };
    Ok((row, results))
}

pub fn corpus_row(test: &Corpus, goal: &str, max_length: usize) -> Result<ReportRow> {
    Ok(ReportRow {
        model: TEST_CORPUS.to_string(),
        goal_rate: corpus_goal_rate(test, goal, max_length)?,
        perplexity: None,
        avg_length: avg_corpus_length(test, goal, max_length)?,
        checkpoint_digest: None,
    })
}

/// Everything produced by one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub split: Corpus,
    pub rewards: RewardTable,
    pub clusters: ClusterIndex,
    pub baseline: EventModel,
    pub unrestricted: EventModel,
    pub clustered: EventModel,
}

/// Splits the corpus, pretrains the baseline once, fine-tunes clustered and
/// unrestricted variants from it, and evaluates all of them plus the test
/// corpus itself.
pub fn run_experiment(
    corpus: &Corpus,
    goal: &str,
    config: &ExperimentConfig,
) -> Result<ExperimentOutcome> {
    let split = split_corpus(corpus, config.test_fraction, config.split_seed)?;
    let train = split.train();
    let test = split.test();

    let rewards = RewardTable::from_corpus(&train, goal)?;
    let clusters = build_cluster_index(&rewards, config.clusters)?;

    let baseline = pretrain(&train, &config.model)?;
    let unrestricted = finetune(
        &baseline,
        &train,
        &rewards,
        None,
        &config.finetune(FinetuneMode::Unrestricted),
    )?;
    let clustered = finetune(
        &baseline,
        &train,
        &rewards,
        Some(&clusters),
        &config.finetune(FinetuneMode::Clustered),
    )?;

    let generation = GenerationConfig {
        goal: goal.to_string(),
        max_length: config.max_length,
        decoding: crate::rollout::Decoding::Greedy,
        seed: config.generation_seed,
    };
    let mut rows = vec![corpus_row(&test, goal, config.max_length)?];
    for (name, model) in [
        (SEQ2SEQ, &baseline),
        (UNRESTRICTED, &unrestricted),
        (CLUSTERED, &clustered),
    ] {
        rows.push(evaluate_model(name, model, &test, &generation, None)?.0);
    }

    let report = ExperimentReport {
        goal: goal.to_string(),
        corpus_fingerprint: corpus.fingerprint(),
        train_fingerprint: train.fingerprint(),
        test_fingerprint: test.fingerprint(),
        train_stories: train.len(),
        test_stories: test.len(),
        seed_events: seed_events(&test).len(),
        config: config.clone(),
        rows,
    };
    Ok(ExperimentOutcome {
        report,
        split,
        rewards,
        clusters,
        baseline,
        unrestricted,
        clustered,
    })
}
