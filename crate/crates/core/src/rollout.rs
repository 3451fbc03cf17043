//! Plot generation from a seed event.
//!
//! Generation stops when an event carries the goal verb, when the model emits
//! the end-of-story token, or when the story reaches the length cap, whichever
//! comes first. The seed counts as the first event.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clusters::{restricted_vocab, ClusterIndex};
use crate::error::{Error, Result};
use crate::event::{Event, Story};
use crate::model::{EventModel, Pick};

pub const DEFAULT_MAX_LENGTH: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoding {
    Greedy,
    Sample,
}

impl FromStr for Decoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Decoding::Greedy),
            "sample" => Ok(Decoding::Sample),
            other => Err(Error::InvalidArgument(format!(
                "unknown decoding `{other}` (expected greedy or sample)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub goal: String,
    pub max_length: usize,
    pub decoding: Decoding,
    pub seed: u64,
}

impl GenerationConfig {
    pub fn greedy(goal: impl Into<String>) -> Self {
        GenerationConfig {
            goal: goal.into(),
            max_length: DEFAULT_MAX_LENGTH,
            decoding: Decoding::Greedy,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GoalReached,
    EndOfStory,
    MaxLength,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutResult {
    /// Generated plot; ends with the sentinel event when the model emitted it.
    pub story: Story,
    pub termination: Termination,
    /// Log-probability of each generated event (the seed has none).
    pub log_probs: Vec<f64>,
}

impl RolloutResult {
    /// Plot events, excluding any end-of-story sentinel.
    pub fn len(&self) -> usize {
        self.story.len()
    }

    pub fn is_empty(&self) -> bool {
        self.story.is_empty()
    }
}

fn rollout(
    model: &EventModel,
    seed_event: &Event,
    config: &GenerationConfig,
    mask_index: Option<&ClusterIndex>,
    rng: &mut ChaCha8Rng,
) -> Result<RolloutResult> {
    if config.max_length == 0 {
        return Err(Error::InvalidArgument(
            "max length must be at least 1".into(),
        ));
    }
    let mut events = vec![seed_event.clone()];
    let mut log_probs = Vec::new();
    let mut current = model.encode_event(seed_event)?;
    let termination = loop {
        if events.last().unwrap().verb == config.goal {
            break Termination::GoalReached;
        }
        if events.len() >= config.max_length {
            break Termination::MaxLength;
        }
        let mask = match mask_index {
            Some(index) => {
                Some(model.mask_ids(restricted_vocab(index, &events.last().unwrap().verb))?)
            }
            None => None,
        };
        let pick = match config.decoding {
            Decoding::Greedy => Pick::Greedy,
            Decoding::Sample => Pick::Sample,
        };
        let (next, logp) = model.choose_ids(&current, pick, mask.as_deref(), rng);
        let event = model.vocab.decode(next);
        log_probs.push(logp);
        if event.is_eos() {
            events.push(Event::eos());
            break Termination::EndOfStory;
        }
        events.push(event);
        current = next;
    };
    Ok(RolloutResult {
        story: Story::new("rollout", events)?,
        termination,
        log_probs,
    })
}

pub fn generate(
    model: &EventModel,
    seed_event: &Event,
    config: &GenerationConfig,
) -> Result<RolloutResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rollout(model, seed_event, config, None, &mut rng)
}

/// Like [`generate`], but every generated verb is restricted to the cluster
/// above the previous verb's cluster.
pub fn generate_masked(
    model: &EventModel,
    seed_event: &Event,
    config: &GenerationConfig,
    index: &ClusterIndex,
) -> Result<RolloutResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rollout(model, seed_event, config, Some(index), &mut rng)
}

/// Generates one rollout per seed, in order. Rollout `i` draws from stream
/// `i` of a generator keyed by `config.seed`.
pub fn batch_generate(
    model: &EventModel,
    seeds: &[Event],
    config: &GenerationConfig,
    mask_index: Option<&ClusterIndex>,
) -> Result<Vec<RolloutResult>> {
    seeds
        .par_iter()
        .enumerate()
        .map(|(i, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let mut r = rollout(model, seed, config, mask_index, &mut rng)?;
            r.story.id = format!("rollout-{i:05}");
            Ok(r)
        })
        .collect()
}

/// Sidecar metadata for a generated story file, one entry per story.
#[derive(Debug, Clone, Serialize)]
pub struct RolloutMeta<'a> {
    pub id: &'a str,
    pub termination: Termination,
    pub length: usize,
    pub log_probs: &'a [f64],
}

pub fn rollout_meta(results: &[RolloutResult]) -> Vec<RolloutMeta<'_>> {
    results
        .iter()
        .map(|r| RolloutMeta {
            id: &r.story.id,
            termination: r.termination,
            length: r.len(),
            log_probs: &r.log_probs,
        })
        .collect()
}
