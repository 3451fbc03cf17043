//! Clause records to abstracted events.
//!
//! Nouns map to precomputed grandparent synsets, verbs to verb classes, named
//! entities to `PERSON<k>` (numbered per story by first appearance) and known
//! places to `LOCATION`. Words outside the lexicon fall back to their stem.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::event::{Corpus, Event, Story, EMPTY, EOS, LOCATION};

/// Inflectional suffix stripper shared by lexicon construction and lookup.
///
/// Lowercases, then removes one plural/past/progressive suffix:
/// `-sses -> -ss`, `-ies/-ied -> -y` (or `-ie` for short words such as
/// "died"), `-es` after sibilants, `-s`, `-ed` and `-ing` (the latter two only
/// when a vowel remains, undoubling a final consonant pair). Derivational
/// suffixes are left alone, so uninflected words are fixed points.
pub fn stem(word: &str) -> String {
    let w = word.to_lowercase();
    let n = w.len();
    if !w.is_ascii() || n <= 3 {
        return w;
    }
    if let Some(base) = w.strip_suffix("sses") {
        return format!("{base}ss");
    }
    for suffix in ["ies", "ied"] {
        if let Some(base) = w.strip_suffix(suffix) {
            return if base.len() >= 2 {
                format!("{base}y")
            } else {
                format!("{base}ie")
            };
        }
    }
    if w.ends_with("ss") || w.ends_with("us") || w.ends_with("is") {
        return w;
    }
    if let Some(base) = w.strip_suffix("es") {
        if ["s", "x", "z", "ch", "sh"]
            .iter()
            .any(|s| base.ends_with(s))
        {
            return base.to_string();
        }
    }
    for suffix in ["ing", "ed"] {
        if let Some(base) = w.strip_suffix(suffix) {
            if base.len() >= 2 && base.chars().any(is_vowel) {
                return undouble(base);
            }
            return w;
        }
    }
    if let Some(base) = w.strip_suffix('s') {
        return base.to_string();
    }
    w
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn undouble(base: &str) -> String {
    let b = base.as_bytes();
    let n = b.len();
    if n >= 3
        && b[n - 1] == b[n - 2]
        && !matches!(b[n - 1], b'l' | b's' | b'z')
        && !is_vowel(b[n - 1] as char)
    {
        base[..n - 1].to_string()
    } else {
        base.to_string()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    noun_map: HashMap<String, String>,
    verb_map: HashMap<String, String>,
    entities: HashSet<String>,
    locations: HashSet<String>,
}

impl Lexicon {
    /// Parses `kind<TAB>key<TAB>value` lines. Entity and location lines may
    /// omit the value. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            match fields.as_slice() {
                ["noun", key, value] => {
                    lex.noun_map
                        .insert(stem(key), checked_identifier(value, line_no)?);
                }
                ["verb", key, value] => {
                    lex.verb_map
                        .insert(stem(key), checked_identifier(value, line_no)?);
                }
                ["entity", key] | ["entity", key, _] => {
                    lex.entities.insert(key.to_string());
                }
                ["location", key] | ["location", key, _] => {
                    lex.locations.insert(key.to_string());
                }
                [kind, ..] => {
                    return Err(Error::parse(
                        line_no,
                        format!("unknown lexicon kind `{kind}` or wrong field count"),
                    ))
                }
                [] => unreachable!(),
            }
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn lookup<'a>(map: &'a HashMap<String, String>, word: &str) -> Option<&'a String> {
        let stemmed = stem(word);
        map.get(&stemmed).or_else(|| {
            if stemmed != word.to_lowercase() {
                map.get(&format!("{stemmed}e"))
            } else {
                None
            }
        })
    }
}

fn checked_identifier(value: &str, line_no: usize) -> Result<String> {
    if value.is_empty() || value.contains('|') || value.chars().any(char::is_whitespace) {
        return Err(Error::parse(
            line_no,
            format!("invalid identifier `{value}`"),
        ));
    }
    Ok(value.to_string())
}

/// Turns an arbitrary fallback word into a token that cannot collide with
/// the sentinels or break the field separator.
fn fallback_token(word: &str) -> String {
    let mut tok: String = stem(word)
        .chars()
        .map(|c| {
            if c == '|' || c.is_whitespace() {
                '_'
            } else {
                c
            }
        })
        .collect();
    if tok.is_empty() || tok == EMPTY || tok == EOS {
        tok.push('_');
    }
    tok
}

/// Per-story named-entity numbering.
#[derive(Debug, Default)]
pub struct EntityState {
    assigned: HashMap<String, usize>,
}

impl EntityState {
    fn person(&mut self, name: &str) -> String {
        let next = self.assigned.len();
        let k = *self.assigned.entry(name.to_string()).or_insert(next);
        format!("PERSON{k}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseRecord {
    pub subject: Option<String>,
    pub verb: String,
    pub object: Option<String>,
    pub modifier: Option<String>,
}

impl ClauseRecord {
    pub fn new(
        subject: Option<&str>,
        verb: &str,
        object: Option<&str>,
        modifier: Option<&str>,
    ) -> Self {
        ClauseRecord {
            subject: subject.map(str::to_string),
            verb: verb.to_string(),
            object: object.map(str::to_string),
            modifier: modifier.map(str::to_string),
        }
    }
}

/// Parses clause files: `s | v | o | m` per line, `-` for an absent slot,
/// blank lines between stories.
pub fn parse_clauses(text: &str) -> Result<Vec<Vec<ClauseRecord>>> {
    let mut stories = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            if !current.is_empty() {
                stories.push(std::mem::take(&mut current));
            }
            continue;
        }
        let fields: Vec<&str> = line.split('|').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                line_no,
                format!("field count {} != 4", fields.len()),
            ));
        }
        let slot = |f: &str| (f != "-" && !f.is_empty()).then(|| f.to_string());
        let verb = slot(fields[1]).ok_or_else(|| Error::parse(line_no, "clause has no verb"))?;
        current.push(ClauseRecord {
            subject: slot(fields[0]),
            verb,
            object: slot(fields[2]),
            modifier: slot(fields[3]),
        });
    }
    if !current.is_empty() {
        stories.push(current);
    }
    Ok(stories)
}

pub fn abstract_noun(word: &str, lexicon: &Lexicon, entities: &mut EntityState) -> String {
    if lexicon.entities.contains(word) {
        return entities.person(word);
    }
    if lexicon.locations.contains(word) {
        return LOCATION.to_string();
    }
    match Lexicon::lookup(&lexicon.noun_map, word) {
        Some(synset) => synset.clone(),
        None => fallback_token(word),
    }
}

pub fn abstract_verb(word: &str, lexicon: &Lexicon) -> String {
    match Lexicon::lookup(&lexicon.verb_map, word) {
        Some(class) => class.clone(),
        None => fallback_token(word),
    }
}

pub fn eventify_story(clauses: &[ClauseRecord], lexicon: &Lexicon) -> Result<Story> {
    if clauses.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot eventify an empty clause list".into(),
        ));
    }
    let mut entities = EntityState::default();
    let mut noun = |w: &Option<String>| match w {
        Some(w) => abstract_noun(w, lexicon, &mut entities),
        None => EMPTY.to_string(),
    };
    let mut events = Vec::with_capacity(clauses.len() + 1);
    for c in clauses {
        let subject = noun(&c.subject);
        let verb = abstract_verb(&c.verb, lexicon);
        let object = noun(&c.object);
        let modifier = noun(&c.modifier);
        events.push(Event::new(subject, verb, object, modifier));
    }
    events.push(Event::eos());
    Story::new("story", events)
}

pub fn eventify_corpus(stories: &[Vec<ClauseRecord>], lexicon: &Lexicon) -> Result<Corpus> {
    let stories = stories
        .iter()
        .enumerate()
        .map(|(i, clauses)| {
            let mut s = eventify_story(clauses, lexicon)?;
            s.id = format!("story-{i:05}");
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(stories)
}
