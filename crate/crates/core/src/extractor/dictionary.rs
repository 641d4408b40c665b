use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Multi-word ingredient phrase -> single-term entity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityDictionary {
    entries: BTreeMap<String, String>,
    max_words: usize,
}

/// `["French", "fried", "onions"]` -> `"french_fried_onions"`.
pub fn canonical_form<S: AsRef<str>>(phrase: &[S]) -> String {
    phrase
        .iter()
        .map(|w| w.as_ref().to_lowercase())
        .collect::<Vec<_>>()
        .join("_")
}

fn phrase_key<S: AsRef<str>>(phrase: &[S]) -> String {
    phrase
        .iter()
        .map(|w| w.as_ref().to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

impl EntityDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a dictionary from space-separated phrases.
    pub fn from_phrases<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut d = Self::new();
        for p in phrases {
            let words: Vec<&str> = p.as_ref().split_whitespace().collect();
            if !words.is_empty() {
                d.canonicalize(&words);
            }
        }
        d
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_words(&self) -> usize {
        self.max_words
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn lookup<S: AsRef<str>>(&self, phrase: &[S]) -> Option<&str> {
        self.entries.get(&phrase_key(phrase)).map(String::as_str)
    }

    /// Joins the words with underscores and records the mapping.
    pub fn canonicalize<S: AsRef<str>>(&mut self, phrase: &[S]) -> String {
        let canonical = canonical_form(phrase);
        self.entries.insert(phrase_key(phrase), canonical.clone());
        self.max_words = self.max_words.max(phrase.len());
        canonical
    }

    /// Longest dictionary sub-phrase of `words` (leftmost on ties), as a
    /// token range and its canonical entity.
    pub fn longest_match<S: AsRef<str>>(&self, words: &[S]) -> Option<((usize, usize), &str)> {
        let n = words.len();
        for len in (1..=n.min(self.max_words)).rev() {
            for start in 0..=n - len {
                if let Some(c) = self.lookup(&words[start..start + len]) {
                    return Some(((start, start + len), c));
                }
            }
        }
        None
    }

    /// Rewrites a token sequence, replacing dictionary phrases (greedy
    /// longest match, left to right) with their entity.
    pub fn rewrite<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        let mut out = Vec::with_capacity(tokens.len());
        let mut k = 0;
        while k < tokens.len() {
            let max = self.max_words.min(tokens.len() - k);
            let hit = (2..=max)
                .rev()
                .find_map(|len| self.lookup(&tokens[k..k + len]).map(|c| (len, c)));
            match hit {
                Some((len, c)) => {
                    out.push(c.to_string());
                    k += len;
                }
                None => {
                    out.push(tokens[k].as_ref().to_string());
                    k += 1;
                }
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (p, c) in &self.entries {
            writeln!(out, "{p}\t{c}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut d = Self::new();
        for (k, line) in BufReader::new(std::fs::File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (phrase, canonical) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: "expected `phrase<TAB>canonical`".into(),
            })?;
            let words: Vec<&str> = phrase.split_whitespace().collect();
            if canonical_form(&words) != canonical {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: k + 1,
                    msg: format!("`{canonical}` is not the canonical form of `{phrase}`"),
                });
            }
            d.canonicalize(&words);
        }
        Ok(d)
    }
}
