//! Synthetic "verb ladder" corpus.
//!
//! Every story climbs a fixed sequence of ladder verbs toward the goal verb.
//! After each ladder event the story ends with probability `end_rate`;
//! otherwise it moves one rung up with probability `advance_rate` or repeats
//! the current rung. The last rung always leads to the goal. Before every
//! step a noise event is inserted with probability `noise_rate`, leaving the
//! rung unchanged. A story that reaches the goal may repeat the goal event,
//! then closes with one aftermath event.
//!
//! Repeating a rung is the single most likely continuation, so a model that
//! always picks the most probable next event stalls on the ladder, while the
//! goal is reachable along less probable steps.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Corpus, Event, Story, EMPTY, LOCATION};

pub const GOAL_VERB: &str = "admire-31.2";

const LADDER_NAMES: [&str; 8] = [
    "meet-36.3-1",
    "say-37.7-1",
    "correspond-36.1",
    "amuse-31.1",
    "marvel-31.3",
    "characterize-29.2",
    "contribute-13.2",
    "conjecture-29.5",
];

const NOISE_VERBS: [&str; 6] = [
    "run-51.3.2",
    "eat-39.1",
    "sleep-40.4",
    "drive-11.5",
    "cheat-10.6",
    "disappearance-48.2",
];

const NOUNS: [&str; 5] = [
    "food.n.02",
    "vehicle.n.01",
    "time_interval.n.01",
    "gathering.n.01",
    "relative.n.01",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub stories: usize,
    pub ladder: usize,
    pub noise_rate: f64,
    pub advance_rate: f64,
    pub end_rate: f64,
    /// Chance that the goal event is immediately repeated.
    pub goal_repeat_rate: f64,
    /// Upper bound on plot events per story.
    pub max_events: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            stories: 500,
            ladder: 5,
            noise_rate: 0.2,
            advance_rate: 0.35,
            end_rate: 0.1,
            goal_repeat_rate: 0.5,
            max_events: 30,
            seed: 0,
        }
    }
}

pub fn ladder_verbs(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match LADDER_NAMES.get(i) {
            Some(name) => name.to_string(),
            None => format!("rung-{i}"),
        })
        .collect()
}

fn person_pair(rng: &mut impl Rng) -> (&'static str, &'static str) {
    if rng.gen_bool(0.5) {
        ("PERSON0", "PERSON1")
    } else {
        ("PERSON1", "PERSON0")
    }
}

fn ladder_event(verb: &str, rng: &mut impl Rng) -> Event {
    let (s, o) = person_pair(rng);
    let object = if rng.gen_bool(0.7) { o } else { EMPTY };
    let modifier = if rng.gen_bool(0.2) { LOCATION } else { EMPTY };
    Event::new(s, verb, object, modifier)
}

fn goal_event(rng: &mut impl Rng) -> Event {
    let (s, o) = person_pair(rng);
    Event::new(s, GOAL_VERB, o, EMPTY)
}

fn noise_event(rng: &mut impl Rng) -> Event {
    let (s, _) = person_pair(rng);
    let verb = *NOISE_VERBS.choose(rng).unwrap();
    let object = if rng.gen_bool(0.6) {
        *NOUNS.choose(rng).unwrap()
    } else {
        EMPTY
    };
    Event::new(s, verb, object, EMPTY)
}

pub fn make_synthetic(config: &SyntheticConfig) -> Result<Corpus> {
    if config.stories == 0 {
        return Err(Error::NoStories);
    }
    if config.ladder == 0 || config.max_events < 2 {
        return Err(Error::InvalidArgument(
            "ladder and max_events must be positive".into(),
        ));
    }
    for (name, p) in [
        ("noise_rate", config.noise_rate),
        ("advance_rate", config.advance_rate),
        ("end_rate", config.end_rate),
        ("goal_repeat_rate", config.goal_repeat_rate),
    ] {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1)")));
        }
    }
    let ladder = ladder_verbs(config.ladder);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stories = Vec::with_capacity(config.stories);
    for i in 0..config.stories {
        let mut events = Vec::new();
        let mut rung = 0;
        while events.len() < config.max_events {
            if rng.gen_bool(config.noise_rate) {
                events.push(noise_event(&mut rng));
                continue;
            }
            if rung == ladder.len() {
                events.push(goal_event(&mut rng));
                if events.len() < config.max_events && rng.gen_bool(config.goal_repeat_rate) {
                    events.push(goal_event(&mut rng));
                }
                if events.len() < config.max_events {
                    events.push(noise_event(&mut rng));
                }
                break;
            }
            events.push(ladder_event(&ladder[rung], &mut rng));
            if rng.gen_bool(config.end_rate) {
                break;
            }
            if rung + 1 == ladder.len() || rng.gen_bool(config.advance_rate) {
                rung += 1;
            }
        }
        events.push(Event::eos());
        stories.push(Story::new(format!("story-{i:05}"), events)?);
    }
    Corpus::new(stories)
}
