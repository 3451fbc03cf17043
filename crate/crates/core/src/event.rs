//! Events, stories and corpora, plus their line-oriented text format.
//!
//! One event per line as `subject | verb | object | modifier`, with a blank
//! line between stories. The literal `empty` marks an absent slot and `<eos>`
//! in the verb slot marks the end-of-story sentinel event.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const EMPTY: &str = "empty";
pub const EOS: &str = "<eos>";
pub const LOCATION: &str = "LOCATION";
pub const SEPARATOR: &str = " | ";

/// Number of token slots in an event.
pub const SLOTS: usize = 4;
pub const VERB_SLOT: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub subject: String,
    pub verb: String,
    pub object: String,
    pub modifier: String,
}

impl Event {
    pub fn new(
        subject: impl Into<String>,
        verb: impl Into<String>,
        object: impl Into<String>,
        modifier: impl Into<String>,
    ) -> Self {
        Event {
            subject: subject.into(),
            verb: verb.into(),
            object: object.into(),
            modifier: modifier.into(),
        }
    }

    /// The terminal sentinel event.
    pub fn eos() -> Self {
        Event::new(EMPTY, EOS, EMPTY, EMPTY)
    }

    pub fn is_eos(&self) -> bool {
        self.verb == EOS
    }

    pub fn slots(&self) -> [&str; SLOTS] {
        [&self.subject, &self.verb, &self.object, &self.modifier]
    }

    pub fn from_slots(slots: [String; SLOTS]) -> Self {
        let [subject, verb, object, modifier] = slots;
        Event {
            subject,
            verb,
            object,
            modifier,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{SEPARATOR}{}{SEPARATOR}{}{SEPARATOR}{}",
            self.subject, self.verb, self.object, self.modifier
        )
    }
}

pub fn parse_event(line: &str) -> Result<Event> {
    parse_event_at(line, 1)
}

pub fn format_event(event: &Event) -> String {
    event.to_string()
}

pub(crate) fn parse_event_at(line: &str, line_no: usize) -> Result<Event> {
    let fields: Vec<&str> = line.split('|').map(str::trim).collect();
    if fields.len() != SLOTS {
        return Err(Error::parse(
            line_no,
            format!("field count {} != {SLOTS}", fields.len()),
        ));
    }
    if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
        return Err(Error::parse(line_no, format!("field {} is blank", pos + 1)));
    }
    if fields[VERB_SLOT] == EMPTY {
        return Err(Error::parse(line_no, "verb slot cannot be empty"));
    }
    let event = Event::new(fields[0], fields[1], fields[2], fields[3]);
    if !event.is_eos() && event.slots().contains(&EOS) {
        return Err(Error::parse(line_no, "<eos> may only occupy the verb slot"));
    }
    Ok(event)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub id: String,
    events: Vec<Event>,
}

impl Story {
    pub fn new(id: impl Into<String>, events: Vec<Event>) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::InvalidArgument(
                "a story needs at least one event".into(),
            ));
        }
        if let Some(pos) = events.iter().position(Event::is_eos) {
            if pos + 1 != events.len() {
                return Err(Error::InvalidArgument(format!(
                    "story has events after the end-of-story sentinel at position {pos}"
                )));
            }
        }
        Ok(Story {
            id: id.into(),
            events,
        })
    }

    /// All events, including a trailing sentinel if present.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Events excluding the end-of-story sentinel.
    pub fn plot(&self) -> &[Event] {
        match self.events.last() {
            Some(e) if e.is_eos() => &self.events[..self.events.len() - 1],
            _ => &self.events,
        }
    }

    /// Story length in plot events (the sentinel is not counted).
    pub fn len(&self) -> usize {
        self.plot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.plot().is_empty()
    }

    pub fn ends_with_eos(&self) -> bool {
        self.events.last().is_some_and(Event::is_eos)
    }
}

/// Dense token ids. `empty` and `<eos>` always take ids 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabIndex {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
    verbs: Vec<usize>,
}

impl VocabIndex {
    pub const EMPTY_ID: usize = 0;
    pub const EOS_ID: usize = 1;

    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut others = BTreeSet::new();
        let mut verbs = BTreeSet::new();
        for e in events {
            for (slot, tok) in e.slots().into_iter().enumerate() {
                if slot == VERB_SLOT {
                    verbs.insert(tok.to_string());
                }
                if tok != EMPTY && tok != EOS {
                    others.insert(tok.to_string());
                }
            }
        }
        let tokens: Vec<String> = [EMPTY.to_string(), EOS.to_string()]
            .into_iter()
            .chain(others)
            .collect();
        Self::from_parts(tokens, verbs.iter().map(String::as_str))
            .expect("constructed vocabulary is consistent")
    }

    /// Rebuilds an index from an ordered token list and the verb subset.
    pub fn from_parts<'a>(
        tokens: Vec<String>,
        verbs: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != EMPTY || tokens[1] != EOS {
            return Err(Error::InvalidArgument(
                "vocabulary must start with the reserved sentinels".into(),
            ));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate token `{t}`")));
            }
        }
        let mut verb_ids = verbs
            .into_iter()
            .map(|v| {
                ids.get(v)
                    .copied()
                    .ok_or_else(|| Error::OutOfVocabulary(v.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        verb_ids.sort_unstable();
        verb_ids.dedup();
        Ok(VocabIndex {
            tokens,
            ids,
            verbs: verb_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Ids of tokens seen in the verb slot, ascending.
    pub fn verb_ids(&self) -> &[usize] {
        &self.verbs
    }

    pub fn is_verb(&self, id: usize) -> bool {
        self.verbs.binary_search(&id).is_ok()
    }

    pub fn encode(&self, event: &Event) -> Result<[usize; SLOTS]> {
        let s = event.slots();
        let mut out = [0; SLOTS];
        for (o, tok) in out.iter_mut().zip(s) {
            *o = self
                .id(tok)
                .ok_or_else(|| Error::OutOfVocabulary(tok.to_string()))?;
        }
        Ok(out)
    }

    pub fn decode(&self, ids: [usize; SLOTS]) -> Event {
        Event::from_slots(ids.map(|i| self.tokens[i].clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub stories: Vec<Story>,
    pub vocab: VocabIndex,
    /// One entry per story. A fresh corpus is entirely `Train`.
    pub split: Vec<Partition>,
}

impl Corpus {
    pub fn new(stories: Vec<Story>) -> Result<Self> {
        if stories.is_empty() {
            return Err(Error::NoStories);
        }
        let vocab = VocabIndex::from_events(stories.iter().flat_map(|s| s.events()));
        let split = vec![Partition::Train; stories.len()];
        Ok(Corpus {
            stories,
            vocab,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.stories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stories.is_empty()
    }

    /// The stories of one partition as a corpus sharing this corpus' vocabulary.
    pub fn partition(&self, part: Partition) -> Corpus {
        let stories: Vec<Story> = self
            .stories
            .iter()
            .zip(&self.split)
            .filter(|(_, p)| **p == part)
            .map(|(s, _)| s.clone())
            .collect();
        let split = vec![part; stories.len()];
        Corpus {
            stories,
            vocab: self.vocab.clone(),
            split,
        }
    }

    pub fn train(&self) -> Corpus {
        self.partition(Partition::Train)
    }

    pub fn test(&self) -> Corpus {
        self.partition(Partition::Test)
    }

    /// Consecutive (e_i, e_{i+1}) pairs, including the pair ending in the sentinel.
    pub fn pairs(&self) -> impl Iterator<Item = (&Event, &Event)> {
        self.stories
            .iter()
            .flat_map(|s| s.events().windows(2).map(|w| (&w[0], &w[1])))
    }

    pub fn to_text(&self) -> String {
        format_corpus(&self.stories)
    }

    /// SHA-256 of the canonical text form.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut stories = Vec::new();
    let mut current: Vec<Event> = Vec::new();
    let mut start_line = 1;
    let mut flush = |events: &mut Vec<Event>, line: usize| -> Result<()> {
        if events.is_empty() {
            return Ok(());
        }
        let id = format!("story-{:05}", stories.len());
        let story = Story::new(id, std::mem::take(events))
            .map_err(|e| Error::parse(line, e.to_string()))?;
        stories.push(story);
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if raw.trim().is_empty() {
            flush(&mut current, start_line)?;
            continue;
        }
        if current.is_empty() {
            start_line = line_no;
        }
        current.push(parse_event_at(raw, line_no)?);
    }
    flush(&mut current, start_line)?;
    Corpus::new(stories)
}

pub fn format_corpus(stories: &[Story]) -> String {
    let mut out = String::new();
    for (i, story) in stories.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for e in story.events() {
            out.push_str(&e.to_string());
            out.push('\n');
        }
    }
    out
}

/// Story-level random split. The test share is `round(test_fraction * n)`,
/// clamped so both partitions keep at least one story.
pub fn split_corpus(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<Corpus> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = corpus.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "splitting needs at least two stories".into(),
        ));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut split = vec![Partition::Train; n];
    for &i in &order[..n_test] {
        split[i] = Partition::Test;
    }
    Ok(Corpus {
        stories: corpus.stories.clone(),
        vocab: corpus.vocab.clone(),
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table_rows() {
        let e = parse_event("relative.n.01 | disappearance-48.2 | empty | empty").unwrap();
        assert_eq!(
            e,
            Event::new("relative.n.01", "disappearance-48.2", EMPTY, EMPTY)
        );
        let e = parse_event("PERSON1 | say-37.7-1 | visit | empty").unwrap();
        assert_eq!(e, Event::new("PERSON1", "say-37.7-1", "visit", EMPTY));
    }

    #[test]
    fn rejects_wrong_field_count() {
        let err = parse_event("a | b | c").unwrap_err();
        assert!(err.to_string().contains("field count 3 != 4"), "{err}");
    }

    #[test]
    fn rejects_empty_verb() {
        assert!(parse_event("a | empty | c | d").is_err());
        assert!(parse_event("a |  | c | d").is_err());
    }

    #[test]
    fn formats_with_sentinels() {
        let e = Event::new("PERSON0", "correspond-36.1", EMPTY, "PERSON1");
        assert_eq!(
            format_event(&e),
            "PERSON0 | correspond-36.1 | empty | PERSON1"
        );
        let bare = Event::new("x", "go-51.1", EMPTY, EMPTY);
        assert_eq!(parse_event(&format_event(&bare)).unwrap(), bare);
    }

    #[test]
    fn corpus_error_names_line() {
        let text = "a | v | b | c\n\nx | y | z\n";
        match parse_corpus(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn sentinel_must_be_last() {
        let text = "empty | <eos> | empty | empty\na | v | b | c\n";
        assert!(parse_corpus(text).is_err());
    }

    fn toy(n: usize) -> Corpus {
        let stories = (0..n)
            .map(|i| {
                Story::new(
                    format!("s{i}"),
                    vec![
                        Event::new("PERSON0", format!("v{}", i % 3), EMPTY, EMPTY),
                        Event::eos(),
                    ],
                )
                .unwrap()
            })
            .collect();
        Corpus::new(stories).unwrap()
    }

    #[test]
    fn split_ninety_ten() {
        let c = split_corpus(&toy(100), 0.10, 7).unwrap();
        assert_eq!(c.train().len(), 90);
        assert_eq!(c.test().len(), 10);
    }

    #[test]
    fn split_minimum_one_test_story() {
        let c = split_corpus(&toy(2), 0.10, 0).unwrap();
        assert_eq!(c.train().len(), 1);
        assert_eq!(c.test().len(), 1);
    }

    #[test]
    fn split_is_deterministic() {
        let a = split_corpus(&toy(37), 0.2, 11).unwrap();
        let b = split_corpus(&toy(37), 0.2, 11).unwrap();
        assert_eq!(a.split, b.split);
    }

    #[test]
    fn split_rejects_tiny_corpus_and_bad_fraction() {
        assert!(split_corpus(&toy(1), 0.1, 0).is_err());
        assert!(split_corpus(&toy(10), 0.0, 0).is_err());
        assert!(split_corpus(&toy(10), 1.0, 0).is_err());
    }

    #[test]
    fn vocabulary_reserves_sentinels() {
        let c = toy(4);
        assert_eq!(c.vocab.id(EMPTY), Some(VocabIndex::EMPTY_ID));
        assert_eq!(c.vocab.id(EOS), Some(VocabIndex::EOS_ID));
        let verbs: Vec<&str> = c
            .vocab
            .verb_ids()
            .iter()
            .map(|&i| c.vocab.token(i))
            .collect();
        assert_eq!(verbs, vec!["<eos>", "v0", "v1", "v2"]);
    }

    #[test]
    fn story_length_excludes_sentinel() {
        let s = Story::new("a", vec![Event::new("a", "b", EMPTY, EMPTY), Event::eos()]).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.ends_with_eos());
    }
}
