//! Versioned binary checkpoint container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  "EVLMCKPT"
//! version    u32
//! config     embed_dim u64, hidden_dim u64, epochs u64, batch_size u64,
//!            learning_rate f64, seed u64, gamma f64
//! vocab      count u64, then per token: len u32 + UTF-8 bytes;
//!            verb count u64, then verb ids u64
//! history    count u64, then per record: phase u8, epochs u64, seed u64,
//!            fingerprint len u32 + bytes
//! tensors    count u32, then per tensor: name len u32 + bytes, ndim u32,
//!            dims u64 × ndim, data f64 × product(dims)
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::event::VocabIndex;
use crate::model::{EventModel, ModelConfig, Params, Phase, Tensor, TrainingRecord, TENSOR_NAMES};

pub const MAGIC: &[u8; 8] = b"EVLMCKPT";
pub const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size overflows usize".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("invalid UTF-8 in string field".into()))
    }
}

fn phase_code(p: Phase) -> u8 {
    match p {
        Phase::Pretrain => 0,
        Phase::FinetuneClustered => 1,
        Phase::FinetuneUnrestricted => 2,
    }
}

fn phase_from(code: u8) -> Result<Phase> {
    Ok(match code {
        0 => Phase::Pretrain,
        1 => Phase::FinetuneClustered,
        2 => Phase::FinetuneUnrestricted,
        other => return Err(Error::Checkpoint(format!("unknown phase code {other}"))),
    })
}

pub fn to_bytes(model: &EventModel) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);

    let c = &model.config;
    w.u64(c.embed_dim as u64);
    w.u64(c.hidden_dim as u64);
    w.u64(c.epochs as u64);
    w.u64(c.batch_size as u64);
    w.f64(c.learning_rate);
    w.u64(c.seed);
    w.f64(c.gamma);

    w.u64(model.vocab.len() as u64);
    for t in model.vocab.tokens() {
        w.str(t);
    }
    w.u64(model.vocab.verb_ids().len() as u64);
    for &id in model.vocab.verb_ids() {
        w.u64(id as u64);
    }

    w.u64(model.history.len() as u64);
    for h in &model.history {
        w.u8(phase_code(h.phase));
        w.u64(h.epochs as u64);
        w.u64(h.seed);
        w.str(&h.corpus_fingerprint);
    }

    let tensors = model.params.tensors();
    w.u32(tensors.len() as u32);
    for (name, t) in tensors {
        w.str(name);
        w.u32(2);
        w.u64(t.rows as u64);
        w.u64(t.cols as u64);
        for &v in &t.data {
            w.f64(v);
        }
    }
    w.0
}

pub fn from_bytes(buf: &[u8]) -> Result<EventModel> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint(
            "not a checkpoint file (bad magic)".into(),
        ));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: VERSION,
        });
    }
    let config = ModelConfig {
        embed_dim: r.usize()?,
        hidden_dim: r.usize()?,
        epochs: r.usize()?,
        batch_size: r.usize()?,
        learning_rate: r.f64()?,
        seed: r.u64()?,
        gamma: r.f64()?,
    };

    let n_tokens = r.usize()?;
    let tokens = (0..n_tokens).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
    let n_verbs = r.usize()?;
    let verb_ids = (0..n_verbs)
        .map(|_| r.usize())
        .collect::<Result<Vec<_>>>()?;
    if verb_ids.iter().any(|&i| i >= tokens.len()) {
        return Err(Error::Checkpoint("verb id outside vocabulary".into()));
    }
    let verbs: Vec<String> = verb_ids.iter().map(|&i| tokens[i].clone()).collect();
    let vocab = VocabIndex::from_parts(tokens, verbs.iter().map(String::as_str))
        .map_err(|e| Error::Checkpoint(e.to_string()))?;

    let n_hist = r.usize()?;
    let history = (0..n_hist)
        .map(|_| {
            Ok(TrainingRecord {
                phase: phase_from(r.u8()?)?,
                epochs: r.usize()?,
                seed: r.u64()?,
                corpus_fingerprint: r.str()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut params = Params::zeros(vocab.len(), config.embed_dim, config.hidden_dim);
    let n_tensors = r.u32()? as usize;
    if n_tensors != TENSOR_NAMES.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {n_tensors}",
            TENSOR_NAMES.len()
        )));
    }
    for (expected, slot) in params.tensors_mut() {
        let name = r.str()?;
        if name != expected {
            return Err(Error::Checkpoint(format!(
                "expected tensor `{expected}`, found `{name}`"
            )));
        }
        if r.u32()? != 2 {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` is not 2-dimensional"
            )));
        }
        let (rows, cols) = (r.usize()?, r.usize()?);
        if (rows, cols) != (slot.rows, slot.cols) {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` has shape {rows}x{cols}, expected {}x{}",
                slot.rows, slot.cols
            )));
        }
        let data = (0..rows * cols)
            .map(|_| r.f64())
            .collect::<Result<Vec<_>>>()?;
        *slot = Tensor { rows, cols, data };
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            buf.len() - r.pos
        )));
    }
    Ok(EventModel {
        vocab,
        config,
        params,
        history,
    })
}

/// SHA-256 of the serialized checkpoint, hex encoded.
pub fn digest(model: &EventModel) -> String {
    hex::encode(Sha256::digest(to_bytes(model)))
}

pub fn save_checkpoint(model: &EventModel, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &to_bytes(model))
}

pub fn load_checkpoint(path: &Path) -> Result<EventModel> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Corpus, Event, Story, EMPTY};
    use crate::model::pretrain;

    fn model() -> EventModel {
        let ev = |v: &str| Event::new("PERSON0", v, EMPTY, EMPTY);
        let stories = vec![Story::new("s", vec![ev("a"), ev("b"), Event::eos()]).unwrap()];
        let corpus = Corpus::new(stories).unwrap();
        let config = ModelConfig {
            embed_dim: 4,
            hidden_dim: 6,
            epochs: 3,
            batch_size: 2,
            ..ModelConfig::default()
        };
        pretrain(&corpus, &config).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let bytes = to_bytes(&m);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back), bytes);
    }

    #[test]
    fn wrong_version_is_reported() {
        let mut bytes = to_bytes(&model());
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            from_bytes(&bytes),
            Err(Error::CheckpointVersion {
                found: 7,
                expected: VERSION
            })
        ));
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = to_bytes(&model());
        let err = from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
        assert!(from_bytes(b"nonsense").is_err());
    }

    #[test]
    fn loaded_model_predicts_identically() {
        let m = model();
        let back = from_bytes(&to_bytes(&m)).unwrap();
        let e = Event::new("PERSON0", "a", EMPTY, EMPTY);
        assert_eq!(
            m.next_event_dist(&e).unwrap(),
            back.next_event_dist(&e).unwrap()
        );
    }
}
