//! Shaped per-verb rewards for a goal verb, derived from training-corpus
//! statistics.
//!
//! The distance component `r1(v) = ln Σ_s (l_s − d_s(v, g))` sums over the
//! stories where `v` precedes the goal; the frequency component
//! `r2(v) = ln(k_{v,g} / N_v)` compares before-goal occurrences with total
//! occurrences. `r1 ≥ 0` and `r2 ≤ 0`, so both are shifted by their minimum
//! over eligible verbs before multiplying, and the product is scaled by
//! `α = 1 / max` into `[0, 1]`. The goal itself is pinned at 1.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Corpus, EOS};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbStats {
    /// Total occurrences in the corpus (`N_v`).
    pub occurrences: usize,
    /// Occurrences before the first goal event of a story (`k_{v,g}`).
    pub before_goal: usize,
    /// `Σ (l_s − d_s(v, g))` over stories where `v` precedes the goal.
    pub distance_sum: usize,
    /// `|S_{v,g}|`.
    pub stories_before_goal: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    pub goal: String,
    pub verbs: BTreeMap<String, VerbStats>,
    pub story_lengths: Vec<usize>,
    pub goal_stories: usize,
}

impl CorpusStats {
    pub fn story_count(&self) -> usize {
        self.story_lengths.len()
    }

    pub fn get(&self, verb: &str) -> VerbStats {
        self.verbs.get(verb).copied().unwrap_or_default()
    }
}

/// Counts are taken against the first goal occurrence of each story; a verb
/// seen several times before it uses its occurrence closest to the goal.
pub fn collect_stats(train: &Corpus, goal: &str) -> Result<CorpusStats> {
    let mut verbs: BTreeMap<String, VerbStats> = BTreeMap::new();
    let mut story_lengths = Vec::with_capacity(train.len());
    let mut goal_stories = 0;
    for story in &train.stories {
        let plot = story.plot();
        let len = plot.len();
        story_lengths.push(len);
        for e in plot {
            if e.verb != EOS {
                verbs.entry(e.verb.clone()).or_default().occurrences += 1;
            }
        }
        let Some(goal_pos) = plot.iter().position(|e| e.verb == goal) else {
            continue;
        };
        goal_stories += 1;
        let mut closest: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, e) in plot[..goal_pos].iter().enumerate() {
            verbs.get_mut(&e.verb).expect("counted above").before_goal += 1;
            closest.insert(&e.verb, i);
        }
        for (verb, pos) in closest {
            let st = verbs.get_mut(verb).expect("counted above");
            st.distance_sum += len - (goal_pos - pos);
            st.stories_before_goal += 1;
        }
    }
    if goal_stories == 0 {
        return Err(Error::GoalAbsent(goal.to_string()));
    }
    Ok(CorpusStats {
        goal: goal.to_string(),
        verbs,
        story_lengths,
        goal_stories,
    })
}

/// `r1(v)`, or `None` when `v` never precedes the goal.
pub fn distance_component(stats: &CorpusStats, verb: &str) -> Option<f64> {
    let d = stats.get(verb).distance_sum;
    (d > 0).then(|| (d as f64).ln())
}

/// `r2(v)`, or `None` when `v` never precedes the goal.
pub fn frequency_component(stats: &CorpusStats, verb: &str) -> Option<f64> {
    let st = stats.get(verb);
    (st.before_goal > 0 && st.occurrences > 0)
        .then(|| (st.before_goal as f64 / st.occurrences as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    #[serde(rename = "R")]
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    pub goal: String,
    pub alpha: f64,
    pub verbs: BTreeMap<String, RewardEntry>,
}

/// Scales non-negative raw scores so the largest becomes 1. Returns `α` and
/// the scaled values; an all-zero input is left at zero with `α = 1`.
pub fn normalize_scores(raw: &[f64]) -> (f64, Vec<f64>) {
    let max = raw.iter().copied().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return (1.0, vec![0.0; raw.len()]);
    }
    (1.0 / max, raw.iter().map(|r| r / max).collect())
}

pub fn build_reward_table(stats: &CorpusStats) -> Result<RewardTable> {
    let goal = stats.goal.as_str();
    let components: Vec<(&str, Option<f64>, Option<f64>)> = stats
        .verbs
        .keys()
        .map(|v| {
            if v == goal {
                (v.as_str(), None, None)
            } else {
                (
                    v.as_str(),
                    distance_component(stats, v),
                    frequency_component(stats, v),
                )
            }
        })
        .collect();
    let eligible: Vec<(&str, f64, f64)> = components
        .iter()
        .filter_map(|&(v, r1, r2)| Some((v, r1?, r2?)))
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleVerbs(goal.to_string()));
    }
    let min_r1 = eligible.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    let min_r2 = eligible.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = eligible
        .iter()
        .map(|&(_, r1, r2)| (r1 - min_r1) * (r2 - min_r2))
        .collect();
    let (alpha, scaled) = normalize_scores(&raw);
    let scaled: BTreeMap<&str, f64> = eligible.iter().map(|e| e.0).zip(scaled).collect();

    let mut verbs = BTreeMap::new();
    for (v, r1, r2) in components {
        let reward = if v == goal {
            1.0
        } else {
            scaled.get(v).copied().unwrap_or(0.0)
        };
        verbs.insert(v.to_string(), RewardEntry { r1, r2, reward });
    }
    Ok(RewardTable {
        goal: goal.to_string(),
        alpha,
        verbs,
    })
}

pub fn reward_of(table: &RewardTable, verb: &str) -> f64 {
    table.reward(verb)
}

impl RewardTable {
    pub fn from_corpus(train: &Corpus, goal: &str) -> Result<Self> {
        build_reward_table(&collect_stats(train, goal)?)
    }

    pub fn reward(&self, verb: &str) -> f64 {
        self.verbs.get(verb).map_or(0.0, |e| e.reward)
    }

    /// Verbs ordered by descending reward, ties by name.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self
            .verbs
            .iter()
            .map(|(k, e)| (k.as_str(), e.reward))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
