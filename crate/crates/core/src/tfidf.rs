//! Term weighting over recipe documents.
//!
//! `tf` is the relative frequency of a term inside the document and
//! `idf = ln(1 + N_docs / df)`, which stays positive for terms present in
//! every document.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Default key-term threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TfidfModel {
    n_docs: usize,
    df: BTreeMap<String, usize>,
}

/// Ordered `(term, weight)` pairs for one document; terms are unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeyTermWeights {
    pub terms: Vec<(String, f64)>,
}

impl KeyTermWeights {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.terms.iter().find(|(t, _)| t == term).map(|(_, w)| *w)
    }
}

impl TfidfModel {
    pub fn fit<S: AsRef<str>>(documents: &[Vec<S>]) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::Empty("cannot fit TFIDF on an empty corpus".into()));
        }
        let mut df = BTreeMap::new();
        for doc in documents {
            let unique: HashSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for t in unique {
                *df.entry(t.to_string()).or_insert(0) += 1;
            }
        }
        Ok(Self {
            n_docs: documents.len(),
            df,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn n_terms(&self) -> usize {
        self.df.len()
    }

    /// `ln(1 + N/df)`, or 0 for unseen terms.
    pub fn idf(&self, term: &str) -> f64 {
        match self.df(term) {
            0 => 0.0,
            df => (1.0 + self.n_docs as f64 / df as f64).ln(),
        }
    }

    /// Weights of the distinct terms of `doc`, in order of first occurrence.
    pub fn score<S: AsRef<str>>(&self, doc: &[S]) -> KeyTermWeights {
        if doc.is_empty() {
            return KeyTermWeights::default();
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut order = Vec::new();
        for t in doc {
            let t = t.as_ref();
            let c = counts.entry(t).or_insert(0);
            if *c == 0 {
                order.push(t);
            }
            *c += 1;
        }
        let len = doc.len() as f64;
        let terms = order
            .into_iter()
            .map(|t| (t.to_string(), counts[t] as f64 / len * self.idf(t)))
            .collect();
        KeyTermWeights { terms }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{}", self.n_docs)?;
        for (t, df) in &self.df {
            writeln!(out, "{t}\t{df}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
        let header = lines.next().ok_or_else(|| bad(1, "missing header".into()))??;
        let n_docs: usize = header.trim().parse().map_err(|e| bad(1, format!("{e}")))?;
        let mut df = BTreeMap::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            let (t, d) = line
                .rsplit_once('\t')
                .ok_or_else(|| bad(k + 2, "expected `term<TAB>df`".into()))?;
            let d: usize = d.parse().map_err(|e| bad(k + 2, format!("{e}")))?;
            if d == 0 || d > n_docs {
                return Err(bad(k + 2, format!("df {d} outside [1, {n_docs}]")));
            }
            df.insert(t.to_string(), d);
        }
        Ok(Self { n_docs, df })
    }
}

/// Keeps the terms whose weight reaches `threshold`, preserving order.
pub fn filter_key_terms(weights: &KeyTermWeights, threshold: f64) -> KeyTermWeights {
    KeyTermWeights {
        terms: weights
            .terms
            .iter()
            .filter(|(_, w)| *w >= threshold)
            .cloned()
            .collect(),
    }
}
