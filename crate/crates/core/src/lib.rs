//! Goal-directed plot generation over abstracted story events.
//!
//! An event-to-event language model is pretrained on an eventified corpus and
//! then fine-tuned with a policy gradient whose per-verb rewards are derived
//! from how close, and how reliably, each verb precedes a goal verb in the
//! corpus. Verbs are clustered by reward so fine-tuning can climb toward the
//! goal one cluster at a time.

pub mod checkpoint;
pub mod clusters;
pub mod error;
pub mod eval;
pub mod event;
pub mod eventifier;
pub mod io;
pub mod model;
pub mod reinforce;
pub mod reward;
pub mod rollout;
pub mod synthetic;

pub use error::{Error, Result};
pub use event::{Corpus, Event, Story, VocabIndex};
pub use model::{EventModel, ModelCheckpoint, ModelConfig};
