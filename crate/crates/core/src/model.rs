//! Event-to-event language model `P(e_{i+1} | e_i; θ)`.
//!
//! A tanh recurrent encoder reads the four tokens of the input event; a tanh
//! recurrent decoder, started from the encoder's final state, emits one
//! categorical distribution per slot over the whole vocabulary. Slots are
//! decoded verb first, then subject, object and modifier, each step fed the
//! embedding of the token chosen before it. Gradients are coded by hand and
//! everything runs in `f64`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Corpus, Event, VocabIndex, SLOTS, VERB_SLOT};

/// Slot visited at each decoder step.
pub const DECODE_ORDER: [usize; SLOTS] = [VERB_SLOT, 0, 2, 3];

pub type TokenIds = [usize; SLOTS];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Discount factor. Stored for provenance; updates use immediate rewards.
    pub gamma: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 32,
            hidden_dim: 64,
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.1,
            seed: 0,
            gamma: 1.0,
        }
    }
}

impl ModelConfig {
    /// Dimensions used for the full-size romance-corpus runs.
    pub fn full_scale() -> Self {
        ModelConfig {
            embed_dim: 256,
            hidden_dim: 1024,
            epochs: 200,
            batch_size: 64,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "model dimensions and batch size must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Row-major matrix; vectors are single-column.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        Tensor { rows, cols, data }
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self · x`
    fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let w = self.row(r);
            *o += w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `out += selfᵀ · g`
    fn mul_t_add(&self, g: &[f64], out: &mut [f64]) {
        for (r, &gr) in g.iter().enumerate() {
            if gr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * gr;
            }
        }
    }

    /// `self += g ⊗ x`
    fn outer_add(&mut self, g: &[f64], x: &[f64]) {
        for (r, &gr) in g.iter().enumerate() {
            if gr == 0.0 {
                continue;
            }
            for (w, xv) in self.row_mut(r).iter_mut().zip(x) {
                *w += gr * xv;
            }
        }
    }

    fn add(&mut self, g: &[f64]) {
        for (w, v) in self.data.iter_mut().zip(g) {
            *w += v;
        }
    }
}

pub const TENSOR_NAMES: [&str; 10] = [
    "embed",
    "encoder.w_in",
    "encoder.w_rec",
    "encoder.bias",
    "decoder.w_in",
    "decoder.w_rec",
    "decoder.bias",
    "decoder.start",
    "output.weight",
    "output.bias",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub embed: Tensor,
    pub enc_in: Tensor,
    pub enc_rec: Tensor,
    pub enc_bias: Tensor,
    pub dec_in: Tensor,
    pub dec_rec: Tensor,
    pub dec_bias: Tensor,
    pub dec_start: Tensor,
    pub out_weight: Tensor,
    pub out_bias: Tensor,
}

impl Params {
    fn shapes(vocab: usize, embed: usize, hidden: usize) -> [(usize, usize); 10] {
        [
            (vocab, embed),
            (hidden, embed),
            (hidden, hidden),
            (hidden, 1),
            (hidden, embed),
            (hidden, hidden),
            (hidden, 1),
            (embed, 1),
            (vocab, hidden),
            (vocab, 1),
        ]
    }

    pub fn zeros(vocab: usize, embed: usize, hidden: usize) -> Self {
        let t = Self::shapes(vocab, embed, hidden).map(|(r, c)| Tensor::zeros(r, c));
        Self::from_array(t)
    }

    /// Random hidden-layer weights with a zero output layer, so an untrained
    /// model predicts uniform distributions.
    pub fn init(vocab: usize, embed: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let in_scale = 1.0 / (embed as f64).sqrt();
        let rec_scale = 1.0 / (hidden as f64).sqrt();
        Params {
            embed: Tensor::uniform(vocab, embed, 1.0, &mut rng),
            enc_in: Tensor::uniform(hidden, embed, in_scale, &mut rng),
            enc_rec: Tensor::uniform(hidden, hidden, rec_scale, &mut rng),
            enc_bias: Tensor::zeros(hidden, 1),
            dec_in: Tensor::uniform(hidden, embed, in_scale, &mut rng),
            dec_rec: Tensor::uniform(hidden, hidden, rec_scale, &mut rng),
            dec_bias: Tensor::zeros(hidden, 1),
            dec_start: Tensor::uniform(embed, 1, 1.0, &mut rng),
            out_weight: Tensor::zeros(vocab, hidden),
            out_bias: Tensor::zeros(vocab, 1),
        }
    }

    fn from_array(t: [Tensor; 10]) -> Self {
        let [embed, enc_in, enc_rec, enc_bias, dec_in, dec_rec, dec_bias, dec_start, out_weight, out_bias] =
            t;
        Params {
            embed,
            enc_in,
            enc_rec,
            enc_bias,
            dec_in,
            dec_rec,
            dec_bias,
            dec_start,
            out_weight,
            out_bias,
        }
    }

    pub fn tensors(&self) -> [(&'static str, &Tensor); 10] {
        let t = [
            &self.embed,
            &self.enc_in,
            &self.enc_rec,
            &self.enc_bias,
            &self.dec_in,
            &self.dec_rec,
            &self.dec_bias,
            &self.dec_start,
            &self.out_weight,
            &self.out_bias,
        ];
        let mut i = 0;
        t.map(|x| {
            i += 1;
            (TENSOR_NAMES[i - 1], x)
        })
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); 10] {
        let t = [
            &mut self.embed,
            &mut self.enc_in,
            &mut self.enc_rec,
            &mut self.enc_bias,
            &mut self.dec_in,
            &mut self.dec_rec,
            &mut self.dec_bias,
            &mut self.dec_start,
            &mut self.out_weight,
            &mut self.out_bias,
        ];
        let mut i = 0;
        t.map(|x| {
            i += 1;
            (TENSOR_NAMES[i - 1], x)
        })
    }

    fn fill_zero(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.data.fill(0.0);
        }
    }

    /// `self -= scale * grad`
    fn descend(&mut self, grad: &Params, scale: f64) {
        for ((_, p), (_, g)) in self.tensors_mut().into_iter().zip(grad.tensors()) {
            for (w, d) in p.data.iter_mut().zip(&g.data) {
                *w -= scale * d;
            }
        }
    }
}

/// Training phase recorded in a checkpoint's history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pretrain,
    FinetuneClustered,
    FinetuneUnrestricted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub phase: Phase,
    pub epochs: usize,
    pub seed: u64,
    pub corpus_fingerprint: String,
}

/// Trainable parameters together with the vocabulary, configuration and
/// training history they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct EventModel {
    pub vocab: VocabIndex,
    pub config: ModelConfig,
    pub params: Params,
    pub history: Vec<TrainingRecord>,
}

pub type ModelCheckpoint = EventModel;

/// Per-slot categorical distributions in event slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDistribution {
    pub slots: [Vec<f64>; SLOTS],
}

impl EventDistribution {
    pub fn verb(&self) -> &[f64] {
        &self.slots[VERB_SLOT]
    }

    /// Verb distribution renormalised over `mask`; zero elsewhere.
    pub fn masked_verb(&self, mask: &[usize]) -> Vec<f64> {
        mask_distribution(self.verb(), mask)
    }
}

fn mask_distribution(p: &[f64], mask: &[usize]) -> Vec<f64> {
    let total: f64 = mask.iter().map(|&i| p[i]).sum();
    let mut out = vec![0.0; p.len()];
    for &i in mask {
        out[i] = p[i] / total;
    }
    out
}

/// The sentinel that can never be decoded into `slot`: `empty` as a verb, or
/// the end-of-story marker anywhere else.
fn invalid_token(slot: usize) -> usize {
    if slot == VERB_SLOT {
        VocabIndex::EMPTY_ID
    } else {
        VocabIndex::EOS_ID
    }
}

/// `p` with one entry zeroed; callers rely on unnormalised sampling.
fn without(p: &[f64], id: usize) -> Vec<f64> {
    let mut q = p.to_vec();
    q[id] = 0.0;
    q
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = p.iter().sum();
    for v in &mut p {
        *v /= z;
    }
    p
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn argmax_in(p: &[f64], allowed: &[usize]) -> usize {
    let mut best = allowed[0];
    for &i in allowed {
        if p[i] > p[best] || (p[i] == p[best] && i < best) {
            best = i;
        }
    }
    best
}

fn sample_categorical(p: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen::<f64>() * p.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &v) in p.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        acc += v;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Activations of one teacher-forced pass, kept for backpropagation.
struct Trace {
    enc: Vec<Vec<f64>>,
    dec: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
}

/// How a decoding pass picks each slot.
#[derive(Clone, Copy)]
pub(crate) enum Pick<'a> {
    Greedy,
    Sample,
    Forced(&'a TokenIds),
}

impl EventModel {
    pub fn new(vocab: VocabIndex, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = Params::init(
            vocab.len(),
            config.embed_dim,
            config.hidden_dim,
            config.seed,
        );
        Ok(EventModel {
            vocab,
            config,
            params,
            history: Vec::new(),
        })
    }

    pub fn encode_event(&self, e: &Event) -> Result<TokenIds> {
        self.vocab.encode(e)
    }

    fn encoder(&self, src: &TokenIds) -> Vec<Vec<f64>> {
        let p = &self.params;
        let h_dim = self.config.hidden_dim;
        let mut states = Vec::with_capacity(SLOTS + 1);
        states.push(vec![0.0; h_dim]);
        for &tok in src {
            let mut a = p.enc_bias.data.clone();
            p.enc_in.mul_add(p.embed.row(tok), &mut a);
            p.enc_rec.mul_add(states.last().unwrap(), &mut a);
            a.iter_mut().for_each(|v| *v = v.tanh());
            states.push(a);
        }
        states
    }

    fn decoder_input(&self, step: usize, chosen: &TokenIds) -> &[f64] {
        if step == 0 {
            &self.params.dec_start.data
        } else {
            self.params.embed.row(chosen[DECODE_ORDER[step - 1]])
        }
    }

    fn decoder_step(&self, input: &[f64], prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let mut a = p.dec_bias.data.clone();
        p.dec_in.mul_add(input, &mut a);
        p.dec_rec.mul_add(prev, &mut a);
        a.iter_mut().for_each(|v| *v = v.tanh());
        let mut logits = p.out_bias.data.clone();
        p.out_weight.mul_add(&a, &mut logits);
        (a, softmax(&logits))
    }

    /// Runs the decoder, choosing each slot by `pick`. Returns the chosen
    /// tokens, the full distributions at each step (slot order), the log
    /// probability under the distribution actually drawn from, and the trace.
    fn decode(
        &self,
        src: &TokenIds,
        pick: Pick<'_>,
        verb_mask: Option<&[usize]>,
        rng: &mut impl Rng,
    ) -> (TokenIds, [Vec<f64>; SLOTS], f64, Trace) {
        let enc = self.encoder(src);
        let mut dec = vec![enc[SLOTS].clone()];
        let mut chosen = [0usize; SLOTS];
        let mut dists: [Vec<f64>; SLOTS] = Default::default();
        let mut probs = Vec::with_capacity(SLOTS);
        let mut logp = 0.0;
        for step in 0..SLOTS {
            let slot = DECODE_ORDER[step];
            let (state, p) = self.decoder_step(self.decoder_input(step, &chosen), &dec[step]);
            let mask = if slot == VERB_SLOT { verb_mask } else { None };
            let tok = match (pick, mask) {
                (Pick::Forced(t), _) => t[slot],
                (Pick::Greedy, Some(m)) => argmax_in(&p, m),
                (Pick::Sample, Some(m)) => sample_categorical(&mask_distribution(&p, m), rng),
                (Pick::Greedy, None) => argmax(&without(&p, invalid_token(slot))),
                (Pick::Sample, None) => sample_categorical(&without(&p, invalid_token(slot)), rng),
            };
            logp += match (pick, mask) {
                (Pick::Forced(_), _) => p[tok].ln(),
                (_, Some(m)) => p[tok].ln() - m.iter().map(|&i| p[i]).sum::<f64>().ln(),
                (_, None) => p[tok].ln() - (1.0 - p[invalid_token(slot)]).ln(),
            };
            chosen[slot] = tok;
            dists[slot] = p.clone();
            probs.push(p);
            dec.push(state);
        }
        (chosen, dists, logp, Trace { enc, dec, probs })
    }

    fn forced(&self, src: &TokenIds, tgt: &TokenIds) -> (Trace, f64) {
        let (_, _, logp, trace) = self.decode(src, Pick::Forced(tgt), None, &mut NoRng);
        (trace, logp)
    }

    /// Accumulates `coef * ∇θ(−log P(tgt | src))` into `grad`.
    fn backward(
        &self,
        src: &TokenIds,
        tgt: &TokenIds,
        trace: &Trace,
        coef: f64,
        grad: &mut Params,
    ) {
        let p = &self.params;
        let h_dim = self.config.hidden_dim;
        let mut ds = vec![0.0; h_dim];
        for step in (0..SLOTS).rev() {
            let slot = DECODE_ORDER[step];
            let mut dlogits: Vec<f64> = trace.probs[step].iter().map(|v| coef * v).collect();
            dlogits[tgt[slot]] -= coef;
            let s_next = &trace.dec[step + 1];
            grad.out_weight.outer_add(&dlogits, s_next);
            grad.out_bias.add(&dlogits);
            p.out_weight.mul_t_add(&dlogits, &mut ds);

            let da: Vec<f64> = ds
                .iter()
                .zip(s_next)
                .map(|(d, s)| d * (1.0 - s * s))
                .collect();
            let input = self.decoder_input(step, tgt);
            grad.dec_in.outer_add(&da, input);
            grad.dec_rec.outer_add(&da, &trace.dec[step]);
            grad.dec_bias.add(&da);
            if step == 0 {
                p.dec_in.mul_t_add(&da, &mut grad.dec_start.data);
            } else {
                p.dec_in
                    .mul_t_add(&da, grad.embed.row_mut(tgt[DECODE_ORDER[step - 1]]));
            }
            ds.fill(0.0);
            p.dec_rec.mul_t_add(&da, &mut ds);
        }
        let mut dh = ds;
        for t in (0..SLOTS).rev() {
            let h_next = &trace.enc[t + 1];
            let da: Vec<f64> = dh
                .iter()
                .zip(h_next)
                .map(|(d, h)| d * (1.0 - h * h))
                .collect();
            let x = p.embed.row(src[t]);
            grad.enc_in.outer_add(&da, x);
            grad.enc_rec.outer_add(&da, &trace.enc[t]);
            grad.enc_bias.add(&da);
            p.enc_in.mul_t_add(&da, grad.embed.row_mut(src[t]));
            dh.fill(0.0);
            p.enc_rec.mul_t_add(&da, &mut dh);
        }
    }

    pub fn zero_grad(&self) -> Params {
        Params::zeros(
            self.vocab.len(),
            self.config.embed_dim,
            self.config.hidden_dim,
        )
    }

    /// Cross-entropy `−log P(tgt | src)` of one pair.
    pub fn loss_ids(&self, src: &TokenIds, tgt: &TokenIds) -> f64 {
        -self.forced(src, tgt).1
    }

    /// Cross-entropy of one pair and its gradient.
    pub fn loss_and_grad_ids(&self, src: &TokenIds, tgt: &TokenIds) -> (f64, Params) {
        let mut grad = self.zero_grad();
        let (trace, logp) = self.forced(src, tgt);
        self.backward(src, tgt, &trace, 1.0, &mut grad);
        (-logp, grad)
    }

    /// One plain gradient step on `−log P(tgt | src)` scaled by `weight`.
    /// A zero weight leaves every parameter untouched.
    pub fn weighted_step_ids(
        &mut self,
        src: &TokenIds,
        tgt: &TokenIds,
        weight: f64,
        lr: f64,
        grad: &mut Params,
    ) {
        if weight == 0.0 {
            return;
        }
        grad.fill_zero();
        let (trace, _) = self.forced(src, tgt);
        self.backward(src, tgt, &trace, 1.0, grad);
        self.params.descend(grad, lr * weight);
    }

    /// One maximum-likelihood step on a single pair.
    pub fn likelihood_step(&mut self, e_i: &Event, e_next: &Event, lr: f64) -> Result<()> {
        let (src, tgt) = (self.encode_event(e_i)?, self.encode_event(e_next)?);
        let mut grad = self.zero_grad();
        self.weighted_step_ids(&src, &tgt, 1.0, lr, &mut grad);
        Ok(())
    }

    pub fn log_prob_ids(&self, src: &TokenIds, tgt: &TokenIds) -> f64 {
        self.forced(src, tgt).1
    }

    pub fn log_prob(&self, e_i: &Event, e_next: &Event) -> Result<f64> {
        Ok(self.log_prob_ids(&self.encode_event(e_i)?, &self.encode_event(e_next)?))
    }

    /// Slot distributions along the greedy path: each slot conditions on the
    /// most probable choice for the slots decoded before it.
    pub fn next_event_dist(&self, e_i: &Event) -> Result<EventDistribution> {
        let src = self.encode_event(e_i)?;
        let (_, slots, _, _) = self.decode(&src, Pick::Greedy, None, &mut NoRng);
        Ok(EventDistribution { slots })
    }

    /// Slot distributions when each slot conditions on the slots of `e_next`.
    pub fn conditional_dist(&self, e_i: &Event, e_next: &Event) -> Result<EventDistribution> {
        let src = self.encode_event(e_i)?;
        let tgt = self.encode_event(e_next)?;
        let (_, slots, _, _) = self.decode(&src, Pick::Forced(&tgt), None, &mut NoRng);
        Ok(EventDistribution { slots })
    }

    /// Resolves a verb mask to vocabulary ids, keeping only verb tokens.
    pub fn mask_ids<S: AsRef<str>>(&self, mask: &[S]) -> Result<Vec<usize>> {
        let mut ids: Vec<usize> = mask
            .iter()
            .filter_map(|v| self.vocab.id(v.as_ref()))
            .filter(|&id| self.vocab.is_verb(id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(ids)
    }

    pub(crate) fn choose_ids(
        &self,
        src: &TokenIds,
        pick: Pick<'_>,
        verb_mask: Option<&[usize]>,
        rng: &mut impl Rng,
    ) -> (TokenIds, f64) {
        let (ids, _, logp, _) = self.decode(src, pick, verb_mask, rng);
        (ids, logp)
    }

    /// Samples the next event. With a mask the verb is drawn from the
    /// renormalised masked distribution; the returned log probability is
    /// under the distribution actually sampled from.
    pub fn sample_next<S: AsRef<str>>(
        &self,
        e_i: &Event,
        verb_mask: Option<&[S]>,
        rng: &mut impl Rng,
    ) -> Result<(Event, f64)> {
        let src = self.encode_event(e_i)?;
        let mask = verb_mask.map(|m| self.mask_ids(m)).transpose()?;
        let (ids, logp) = self.choose_ids(&src, Pick::Sample, mask.as_deref(), rng);
        Ok((self.vocab.decode(ids), logp))
    }

    /// Most probable next event, slot by slot.
    pub fn greedy_next(&self, e_i: &Event) -> Result<(Event, f64)> {
        let src = self.encode_event(e_i)?;
        let (ids, logp) = self.choose_ids(&src, Pick::Greedy, None, &mut NoRng);
        Ok((self.vocab.decode(ids), logp))
    }

    /// Total negative log-probability and slot-token count over every
    /// consecutive pair of `corpus`.
    pub fn corpus_nll(&self, corpus: &Corpus) -> Result<(f64, usize)> {
        let mut nll = 0.0;
        let mut tokens = 0;
        for (a, b) in corpus.pairs() {
            nll -= self.log_prob(a, b)?;
            tokens += SLOTS;
        }
        Ok((nll, tokens))
    }

    pub fn perplexity(&self, corpus: &Corpus) -> Result<f64> {
        let (nll, tokens) = self.corpus_nll(corpus)?;
        if tokens == 0 {
            return Err(Error::InvalidArgument("corpus has no event pairs".into()));
        }
        Ok((nll / tokens as f64).exp())
    }
}

pub fn log_prob(model: &EventModel, e_i: &Event, e_next: &Event) -> Result<f64> {
    model.log_prob(e_i, e_next)
}

pub fn next_event_dist(model: &EventModel, e_i: &Event) -> Result<EventDistribution> {
    model.next_event_dist(e_i)
}

pub fn perplexity(model: &EventModel, corpus: &Corpus) -> Result<f64> {
    model.perplexity(corpus)
}

/// Placeholder generator for deterministic decoding paths; never consulted.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("deterministic decoding drew a random number")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("deterministic decoding drew a random number")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("deterministic decoding drew a random number")
    }
    fn try_fill_bytes(&mut self, _: &mut [u8]) -> std::result::Result<(), rand::Error> {
        unreachable!("deterministic decoding drew a random number")
    }
}

/// Per-epoch training summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
}

/// Maximum-likelihood training on consecutive event pairs with plain
/// mini-batch gradient descent.
pub fn pretrain(train: &Corpus, config: &ModelConfig) -> Result<EventModel> {
    pretrain_with(train, config, |_| {})
}

pub fn pretrain_with(
    train: &Corpus,
    config: &ModelConfig,
    mut on_epoch: impl FnMut(EpochStats),
) -> Result<EventModel> {
    let mut model = EventModel::new(train.vocab.clone(), config.clone())?;
    let pairs = train
        .pairs()
        .map(|(a, b)| Ok((model.encode_event(a)?, model.encode_event(b)?)))
        .collect::<Result<Vec<_>>>()?;
    if pairs.is_empty() {
        return Err(Error::NoStories);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut grad = model.zero_grad();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.fill_zero();
            let coef = 1.0 / batch.len() as f64;
            for &i in batch {
                let (src, tgt) = &pairs[i];
                let (trace, logp) = model.forced(src, tgt);
                total -= logp;
                model.backward(src, tgt, &trace, coef, &mut grad);
            }
            model.params.descend(&grad, config.learning_rate);
        }
        on_epoch(EpochStats {
            epoch,
            mean_loss: total / pairs.len() as f64,
        });
    }
    model.history.push(TrainingRecord {
        phase: Phase::Pretrain,
        epochs: config.epochs,
        seed: config.seed,
        corpus_fingerprint: train.fingerprint(),
    });
    Ok(model)
}
