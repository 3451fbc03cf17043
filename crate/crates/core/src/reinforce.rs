//! Reward-weighted policy-gradient fine-tuning.
//!
//! Each step samples a continuation `e_{i+1}` of a corpus event `e_i` and moves
//! the parameters along `R(v(e_{i+1})) · ∇θ log P(e_{i+1} | e_i; θ)`, using the
//! immediate reward only. In clustered mode the sampled verb is restricted to
//! the cluster above the input verb's cluster; the remaining slots are drawn
//! from the full distribution.

use std::collections::HashMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clusters::{restricted_vocab, ClusterIndex};
use crate::error::{Error, Result};
use crate::event::{Corpus, Event, VERB_SLOT};
use crate::model::{EventModel, Params, Phase, Pick, TokenIds, TrainingRecord};
use crate::reward::RewardTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinetuneMode {
    Clustered,
    Unrestricted,
}

impl FromStr for FinetuneMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clustered" => Ok(FinetuneMode::Clustered),
            "unrestricted" => Ok(FinetuneMode::Unrestricted),
            other => Err(Error::InvalidArgument(format!(
                "unknown fine-tuning mode `{other}` (expected clustered or unrestricted)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub mode: FinetuneMode,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            mode: FinetuneMode::Clustered,
            epochs: 3,
            learning_rate: 0.0025,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub epoch: usize,
    pub step: usize,
    pub input: Event,
    pub sampled: Event,
    pub reward: f64,
    /// `R · log P(e_{i+1} | e_i)` under the unmasked model before the update.
    pub objective: f64,
}

/// Precomputed token-id lookups for one fine-tuning run.
struct StepContext {
    rewards: Vec<f64>,
    masks: HashMap<usize, Vec<usize>>,
    mode: FinetuneMode,
}

impl StepContext {
    fn new(
        model: &EventModel,
        table: &RewardTable,
        index: Option<&ClusterIndex>,
        mode: FinetuneMode,
    ) -> Result<Self> {
        let rewards = model
            .vocab
            .tokens()
            .iter()
            .map(|t| table.reward(t))
            .collect();
        let mut masks = HashMap::new();
        if mode == FinetuneMode::Clustered {
            let index = index.ok_or(Error::MissingClusterIndex)?;
            for &verb in model.vocab.verb_ids() {
                let allowed = restricted_vocab(index, model.vocab.token(verb));
                masks.insert(verb, model.mask_ids(allowed)?);
            }
        }
        Ok(StepContext {
            rewards,
            masks,
            mode,
        })
    }

    fn mask_for(
        &self,
        model: &EventModel,
        src: &TokenIds,
        index: Option<&ClusterIndex>,
    ) -> Result<Option<Vec<usize>>> {
        if self.mode == FinetuneMode::Unrestricted {
            return Ok(None);
        }
        let verb = src[VERB_SLOT];
        match self.masks.get(&verb) {
            Some(m) => Ok(Some(m.clone())),
            None => {
                let index = index.ok_or(Error::MissingClusterIndex)?;
                let allowed = restricted_vocab(index, model.vocab.token(verb));
                Ok(Some(model.mask_ids(allowed)?))
            }
        }
    }
}

fn step_ids(
    model: &mut EventModel,
    src: &TokenIds,
    mask: Option<&[usize]>,
    rewards: &[f64],
    lr: f64,
    rng: &mut impl Rng,
    grad: &mut Params,
) -> (TokenIds, f64, f64) {
    let (tgt, _) = model.choose_ids(src, Pick::Sample, mask, rng);
    let reward = rewards[tgt[VERB_SLOT]];
    let objective = if reward == 0.0 {
        0.0
    } else {
        reward * model.log_prob_ids(src, &tgt)
    };
    model.weighted_step_ids(src, &tgt, reward, lr, grad);
    (tgt, reward, objective)
}

/// One sampled policy-gradient update from `e_i`.
pub fn reinforce_step(
    model: &mut EventModel,
    e_i: &Event,
    table: &RewardTable,
    index: Option<&ClusterIndex>,
    mode: FinetuneMode,
    learning_rate: f64,
    rng: &mut impl Rng,
) -> Result<StepReport> {
    let src = model.encode_event(e_i)?;
    let mask = match mode {
        FinetuneMode::Unrestricted => None,
        FinetuneMode::Clustered => {
            let index = index.ok_or(Error::MissingClusterIndex)?;
            Some(model.mask_ids(restricted_vocab(index, &e_i.verb))?)
        }
    };
    let rewards: Vec<f64> = model
        .vocab
        .tokens()
        .iter()
        .map(|t| table.reward(t))
        .collect();
    let mut grad = model.zero_grad();
    let (tgt, reward, objective) = step_ids(
        model,
        &src,
        mask.as_deref(),
        &rewards,
        learning_rate,
        rng,
        &mut grad,
    );
    Ok(StepReport {
        epoch: 0,
        step: 0,
        input: e_i.clone(),
        sampled: model.vocab.decode(tgt),
        reward,
        objective,
    })
}

/// Callbacks invoked while fine-tuning.
pub trait FinetuneObserver {
    fn on_step(&mut self, _report: &StepReport) {}
    fn on_epoch_end(&mut self, _epoch: usize, _model: &EventModel) {}
}

impl FinetuneObserver for () {}

pub fn finetune(
    model: &EventModel,
    train: &Corpus,
    table: &RewardTable,
    index: Option<&ClusterIndex>,
    config: &FinetuneConfig,
) -> Result<EventModel> {
    finetune_observed(model, train, table, index, config, &mut ())
}

/// Runs `config.epochs` passes; each pass takes every non-sentinel event of
/// every training story, in corpus order, as `e_i` for one online update.
pub fn finetune_observed(
    model: &EventModel,
    train: &Corpus,
    table: &RewardTable,
    index: Option<&ClusterIndex>,
    config: &FinetuneConfig,
    observer: &mut dyn FinetuneObserver,
) -> Result<EventModel> {
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::InvalidArgument(
            "learning rate must be positive".into(),
        ));
    }
    let mut model = model.clone();
    let ctx = StepContext::new(&model, table, index, config.mode)?;
    let inputs: Vec<(Event, TokenIds)> = train
        .stories
        .iter()
        .flat_map(|s| s.plot())
        .map(|e| Ok((e.clone(), model.encode_event(e)?)))
        .collect::<Result<_>>()?;
    let masks: Vec<Option<Vec<usize>>> = inputs
        .iter()
        .map(|(_, src)| ctx.mask_for(&model, src, index))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);
    let mut grad = model.zero_grad();
    let mut step = 0;
    for epoch in 0..config.epochs {
        for ((input, src), mask) in inputs.iter().zip(&masks) {
            let (tgt, reward, objective) = step_ids(
                &mut model,
                src,
                mask.as_deref(),
                &ctx.rewards,
                config.learning_rate,
                &mut rng,
                &mut grad,
            );
            observer.on_step(&StepReport {
                epoch,
                step,
                input: input.clone(),
                sampled: model.vocab.decode(tgt),
                reward,
                objective,
            });
            step += 1;
        }
        observer.on_epoch_end(epoch, &model);
    }
    model.history.push(TrainingRecord {
        phase: match config.mode {
            FinetuneMode::Clustered => Phase::FinetuneClustered,
            FinetuneMode::Unrestricted => Phase::FinetuneUnrestricted,
        },
        epochs: config.epochs,
        seed: config.seed,
        corpus_fingerprint: train.fingerprint(),
    });
    Ok(model)
}
