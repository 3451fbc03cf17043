#![allow(dead_code)]

use std::collections::BTreeMap;

use goalplot::clusters::sort_values;
use goalplot::event::{Corpus, Event, Story, EMPTY};
use goalplot::model::{pretrain, EventModel, ModelConfig, Params, TENSOR_NAMES};
use goalplot::reward::{reward_of, RewardTable};
use goalplot::rollout::{RolloutResult, Termination};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn plot_corpus(plots: &[&[&str]], eos: bool) -> Corpus {
    let stories = plots
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut events: Vec<Event> = p
                .iter()
                .map(|v| Event::new("PERSON0", *v, EMPTY, EMPTY))
                .collect();
            if eos {
                events.push(Event::eos());
            }
            Story::new(format!("s{i}"), events).unwrap()
        })
        .collect();
    Corpus::new(stories).unwrap()
}

/// Checks that a rollout stopped for exactly the reason it reports.
pub fn termination_is_consistent(
    r: &RolloutResult,
    goal: &str,
    max_length: usize,
) -> Result<(), String> {
    let plot = r.story.plot();
    let ended = r.story.ends_with_eos();
    let goal_at = plot.iter().position(|e| e.verb == goal);
    if plot.len() > max_length {
        return Err(format!(
            "{} events exceed the cap of {max_length}",
            plot.len()
        ));
    }
    if r.log_probs.len() + 1 != r.story.events().len() {
        return Err(format!(
            "{} log probs for {} events",
            r.log_probs.len(),
            r.story.events().len()
        ));
    }
    let reached = goal_at == Some(plot.len() - 1);
    let ok = match r.termination {
        Termination::GoalReached => reached && !ended,
        Termination::EndOfStory => ended && goal_at.is_none() && plot.len() < max_length,
        Termination::MaxLength => !ended && goal_at.is_none() && plot.len() == max_length,
    };
    if goal_at.is_some() && !reached {
        return Err("rollout continued past the goal".into());
    }
    if ok {
        Ok(())
    } else {
        Err(format!(
            "termination {:?} inconsistent with length {} (eos {ended}, goal at {goal_at:?})",
            r.termination,
            plot.len()
        ))
    }
}

/// Reward table recomputed with nested loops straight from the definitions:
/// per story, the first goal position, the closest earlier occurrence of each
/// verb, and occurrence counts before that goal.
pub struct Oracle {
    pub r1: BTreeMap<String, f64>,
    pub r2: BTreeMap<String, f64>,
    pub raw: BTreeMap<String, f64>,
    pub reward: BTreeMap<String, f64>,
    pub alpha: f64,
}

pub fn oracle(stories: &[Vec<String>], goal: &str) -> Oracle {
    let mut verbs: Vec<String> = stories.iter().flatten().cloned().collect();
    verbs.sort();
    verbs.dedup();

    let mut r1 = BTreeMap::new();
    let mut r2 = BTreeMap::new();
    for v in verbs.iter().filter(|v| *v != goal) {
        let mut total = 0usize;
        let mut before = 0usize;
        let mut dist_sum = 0usize;
        for s in stories {
            for w in s {
                if w == v {
                    total += 1;
                }
            }
            let Some(g) = s.iter().position(|w| w == goal) else {
                continue;
            };
            let mut closest: Option<usize> = None;
            for (j, w) in s.iter().enumerate().take(g) {
                if w == v {
                    before += 1;
                    let d = g - j;
                    closest = Some(closest.map_or(d, |c: usize| c.min(d)));
                }
            }
            if let Some(d) = closest {
                dist_sum += s.len() - d;
            }
        }
        if dist_sum > 0 && before > 0 {
            r1.insert(v.clone(), (dist_sum as f64).ln());
            r2.insert(v.clone(), (before as f64 / total as f64).ln());
        }
    }

    let min1 = r1.values().cloned().fold(f64::INFINITY, f64::min);
    let min2 = r2.values().cloned().fold(f64::INFINITY, f64::min);
    let raw: BTreeMap<String, f64> = r1
        .keys()
        .map(|v| (v.clone(), (r1[v] - min1) * (r2[v] - min2)))
        .collect();
    let max = raw.values().cloned().fold(0.0, f64::max);
    let alpha = if max > 0.0 { 1.0 / max } else { 1.0 };

    let mut reward: BTreeMap<String, f64> = verbs.iter().map(|v| (v.clone(), 0.0)).collect();
    for (v, x) in &raw {
        reward.insert(v.clone(), alpha * x);
    }
    reward.insert(goal.to_string(), 1.0);
    Oracle {
        r1,
        r2,
        raw,
        reward,
        alpha,
    }
}

pub fn verb_lists(corpus: &Corpus) -> Vec<Vec<String>> {
    corpus
        .stories
        .iter()
        .map(|s| s.plot().iter().map(|e| e.verb.clone()).collect())
        .collect()
}

pub fn build_corpus(stories: &[Vec<String>]) -> Corpus {
    let stories = stories
        .iter()
        .enumerate()
        .map(|(i, verbs)| {
            let mut events: Vec<Event> = verbs
                .iter()
                .map(|v| Event::new("PERSON0", v.as_str(), EMPTY, EMPTY))
                .collect();
            events.push(Event::eos());
            Story::new(format!("s{i}"), events).unwrap()
        })
        .collect();
    Corpus::new(stories).unwrap()
}

fn ssd(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum()
}

/// Tries every placement of `k − 1` breaks between distinct neighbours.
pub fn exhaustive_breaks(values: &[f64], k: usize) -> Vec<usize> {
    let sorted = sort_values(values);
    let n = sorted.len();
    let gaps: Vec<usize> = (1..n).filter(|&i| sorted[i - 1] < sorted[i]).collect();
    let mut best = (f64::INFINITY, Vec::new());
    let mut chosen = Vec::new();
    fn walk(
        sorted: &[f64],
        gaps: &[usize],
        need: usize,
        chosen: &mut Vec<usize>,
        best: &mut (f64, Vec<usize>),
    ) {
        if need == 0 {
            let mut bounds = vec![0];
            bounds.extend(chosen.iter());
            bounds.push(sorted.len());
            let cost: f64 = bounds.windows(2).map(|w| ssd(&sorted[w[0]..w[1]])).sum();
            if cost < best.0 {
                *best = (cost, chosen.clone());
            }
            return;
        }
        for (i, &g) in gaps.iter().enumerate() {
            chosen.push(g);
            walk(sorted, &gaps[i + 1..], need - 1, chosen, best);
            chosen.pop();
        }
    }
    walk(&sorted, &gaps, k - 1, &mut chosen, &mut best);
    best.1
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, usize) {
    let n = rng.gen_range(1..=12);
    let k = rng.gen_range(1..=4.min(n));
    // A few loose centres so the instances have some natural grouping.
    let centres: Vec<f64> = (0..rng.gen_range(1..=4))
        .map(|_| rng.gen::<f64>())
        .collect();
    let values = (0..n)
        .map(|_| {
            let c = centres[rng.gen_range(0..centres.len())];
            c + rng.gen_range(-0.1..0.1)
        })
        .collect();
    (values, k)
}

pub fn grad_corpus() -> Corpus {
    let plots: [&[(&str, &str)]; 5] = [
        &[("a", "PERSON1"), ("b", EMPTY), ("g", "PERSON1")],
        &[
            ("a", EMPTY),
            ("c", "thing.n.01"),
            ("b", EMPTY),
            ("g", "PERSON1"),
        ],
        &[("c", "PERSON1"), ("a", EMPTY), ("z", "thing.n.01")],
        &[("b", EMPTY), ("z", EMPTY)],
        &[
            ("d", "PERSON1"),
            ("z", EMPTY),
            ("c", EMPTY),
            ("g", "PERSON1"),
        ],
    ];
    let stories = plots
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut events: Vec<Event> = p
                .iter()
                .map(|(v, o)| Event::new("PERSON0", *v, *o, EMPTY))
                .collect();
            events.push(Event::eos());
            Story::new(format!("s{i}"), events).unwrap()
        })
        .collect();
    Corpus::new(stories).unwrap()
}

pub fn grad_config() -> ModelConfig {
    ModelConfig {
        embed_dim: 5,
        hidden_dim: 7,
        epochs: 3,
        batch_size: 4,
        learning_rate: 0.1,
        seed: 9,
        ..ModelConfig::default()
    }
}

/// A trained model with every weight jittered, so the output layer and biases
/// are non-zero and no gradient vanishes by construction.
pub fn jittered_model(seed: u64) -> EventModel {
    let mut model = pretrain(&grad_corpus(), &grad_config()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (_, t) in model.params.tensors_mut() {
        for w in &mut t.data {
            *w += rng.gen_range(-0.5..0.5);
        }
    }
    model
}

pub fn pair(model: &EventModel, i: usize, j: usize) -> ([usize; 4], [usize; 4]) {
    let c = grad_corpus();
    let e = c.stories[i].events();
    (
        model.encode_event(&e[j]).unwrap(),
        model.encode_event(&e[j + 1]).unwrap(),
    )
}

/// First disagreement between a reward table and the oracle beyond 1e-9.
pub fn reward_mismatch(table: &RewardTable, expected: &Oracle) -> Option<String> {
    const TOL: f64 = 1e-9;
    for (v, want) in &expected.reward {
        let got = reward_of(table, v);
        if (got - want).abs() > TOL {
            return Some(format!("R({v}): got {got}, want {want}"));
        }
    }
    for (v, entry) in &table.verbs {
        for (name, got, want) in [
            ("r1", entry.r1, expected.r1.get(v)),
            ("r2", entry.r2, expected.r2.get(v)),
        ] {
            match (got, want) {
                (Some(a), Some(b)) if (a - b).abs() <= TOL => {}
                (None, None) => {}
                (a, b) => return Some(format!("{name}({v}): got {a:?}, want {b:?}")),
            }
        }
    }
    if (table.alpha - expected.alpha).abs() > TOL * expected.alpha.max(1.0) {
        return Some(format!(
            "alpha: got {}, want {}",
            table.alpha, expected.alpha
        ));
    }
    None
}

/// Largest relative error between the analytic gradient and central finite
/// differences over `per_tensor` random coordinates of every tensor.
/// Coordinates where both are below 1e-7 are skipped.
pub fn gradient_error(
    model: &mut EventModel,
    src: &[usize; 4],
    tgt: &[usize; 4],
    per_tensor: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, String) {
    const H: f64 = 1e-5;
    let (_, grad) = model.loss_and_grad_ids(src, tgt);
    let mut worst = (0.0, String::new());
    for (t, name) in TENSOR_NAMES.iter().enumerate() {
        let len = model.params.tensors()[t].1.data.len();
        for _ in 0..per_tensor {
            let k = rng.gen_range(0..len);
            let analytic = grad.tensors()[t].1.data[k];
            let orig = model.params.tensors()[t].1.data[k];
            model.params.tensors_mut()[t].1.data[k] = orig + H;
            let up = model.loss_ids(src, tgt);
            model.params.tensors_mut()[t].1.data[k] = orig - H;
            let down = model.loss_ids(src, tgt);
            model.params.tensors_mut()[t].1.data[k] = orig;
            let numeric = (up - down) / (2.0 * H);
            let scale = analytic.abs().max(numeric.abs());
            if scale < 1e-7 {
                continue;
            }
            let rel = (analytic - numeric).abs() / scale;
            if rel > worst.0 {
                worst = (
                    rel,
                    format!("{name}[{k}]: analytic {analytic}, numeric {numeric}"),
                );
            }
        }
    }
    worst
}

pub fn param_delta(after: &Params, before: &Params) -> Vec<f64> {
    after
        .tensors()
        .iter()
        .zip(before.tensors())
        .flat_map(|((_, a), (_, b))| {
            a.data
                .iter()
                .zip(&b.data)
                .map(|(x, y)| x - y)
                .collect::<Vec<_>>()
        })
        .collect()
}

/// A small model with every weight drawn uniformly from [-2, 2).
pub fn random_model(seed: u64) -> EventModel {
    let plots: [&[&str]; 3] = [&["a", "b", "g"], &["c", "a"], &["b", "c", "d"]];
    let config = ModelConfig {
        embed_dim: 4,
        hidden_dim: 6,
        epochs: 0,
        seed,
        ..ModelConfig::default()
    };
    let mut model = pretrain(&plot_corpus(&plots, true), &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (_, t) in model.params.tensors_mut() {
        for w in &mut t.data {
            *w = rng.gen_range(-2.0..2.0);
        }
    }
    model
}
