//! Exact nearest-neighbour index over one side's joint embeddings.

use std::collections::HashSet;
use std::path::Path;

use msje_core::checkpoint::Checkpoint;
use msje_core::encoders::Side;
use msje_core::nn::{euclidean, Tensor2};
use msje_core::{Error, Result};

/// Immutable id → embedding table with the fingerprint of the model that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    side: Side,
    model_fingerprint: String,
    ids: Vec<String>,
    embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub id: String,
    pub distance: f64,
}

impl RetrievalIndex {
    pub fn build(side: Side, model_fingerprint: impl Into<String>, items: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = items
            .first()
            .map(|(_, e)| e.len())
            .ok_or_else(|| Error::Empty("index needs at least one item".into()))?;
        let mut seen = HashSet::new();
        for (id, e) in &items {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate index id `{id}`")));
            }
            if e.len() != dim || dim == 0 {
                return Err(Error::Shape(format!("item `{id}` has {} dims, expected {dim}", e.len())));
            }
            if e.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("item `{id}` has a non-finite embedding")));
            }
        }
        let (ids, embeddings) = items.into_iter().unzip();
        Ok(Self {
            side,
            model_fingerprint: model_fingerprint.into(),
            ids,
            embeddings,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].len()
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn model_fingerprint(&self) -> &str {
        &self.model_fingerprint
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// The `k` nearest items by Euclidean distance, ascending, ties by id.
    /// `k` larger than the index returns everything.
    pub fn query_topk(&self, query: &[f64], k: usize) -> Result<Vec<Hit>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if query.len() != self.dim() {
            return Err(Error::Shape(format!(
                "query has {} dims, index holds {}-dim embeddings",
                query.len(),
                self.dim()
            )));
        }
        let mut scored: Vec<(f64, usize)> = self
            .embeddings
            .iter()
            .enumerate()
            .map(|(j, e)| (euclidean(query, e), j))
            .collect();
        let by_distance_then_id =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then_with(|| self.ids[a.1].cmp(&self.ids[b.1]));
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_distance_then_id);
            scored.truncate(k);
        }
        scored.sort_by(by_distance_then_id);
        Ok(scored
            .into_iter()
            .map(|(distance, j)| Hit {
                id: self.ids[j].clone(),
                distance,
            })
            .collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut ck = Checkpoint::new();
        let data: Vec<f64> = self.embeddings.concat();
        ck.insert("index.embeddings", Tensor2::from_vec(self.len(), self.dim(), data)?);
        ck.set_meta("index.ids", self.ids.join("\n"));
        ck.set_meta("index.side", serde_json::to_string(&self.side).expect("side serializes"));
        ck.set_meta("index.model_fingerprint", self.model_fingerprint.clone());
        ck.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        let t = ck.get("index.embeddings")?;
        let ids: Vec<String> = ck.meta("index.ids")?.split('\n').map(String::from).collect();
        if ids.len() != t.rows() {
            return Err(Error::Checkpoint(format!("{} ids for {} embeddings", ids.len(), t.rows())));
        }
        let side = serde_json::from_str(ck.meta("index.side")?)
            .map_err(|e| Error::Checkpoint(format!("bad index side: {e}")))?;
        let items = ids.into_iter().enumerate().map(|(k, id)| (id, t.row(k).to_vec())).collect();
        Self::build(side, ck.meta("index.model_fingerprint")?, items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(v: &[(&str, &[f64])]) -> Vec<(String, Vec<f64>)> {
        v.iter().map(|(i, e)| (i.to_string(), e.to_vec())).collect()
    }

    #[test]
    fn build_and_query() {
        let idx = RetrievalIndex::build(Side::Image, "fp", items(&[("b", &[1.0, 0.0]), ("a", &[0.0, 0.0]), ("c", &[3.0, 0.0])]))
            .unwrap();
        assert_eq!(idx.len(), 3);
        let hits = idx.query_topk(&[1.0, 0.0], 1).unwrap();
        assert_eq!((hits[0].id.as_str(), hits[0].distance), ("b", 0.0));
        let all = idx.query_topk(&[0.5, 0.0], 10).unwrap();
        // a and b tie at 0.5; id order decides.
        assert_eq!(all.iter().map(|h| h.id.as_str()).collect::<Vec<_>>(), vec!["a", "b", "c"]);
        assert!(idx.query_topk(&[0.0], 1).is_err());
        assert!(idx.query_topk(&[0.0, 0.0], 0).is_err());
    }

    #[test]
    fn rejects_bad_items() {
        assert!(RetrievalIndex::build(Side::Recipe, "fp", items(&[("a", &[1.0]), ("a", &[2.0])])).is_err());
        assert!(RetrievalIndex::build(Side::Recipe, "fp", items(&[("a", &[1.0]), ("b", &[2.0, 1.0])])).is_err());
        assert!(RetrievalIndex::build(Side::Recipe, "fp", vec![]).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("idx.ckpt");
        let idx = RetrievalIndex::build(Side::Recipe, "abc123", items(&[("r1", &[0.1, 0.2]), ("r2", &[-0.3, 0.4])])).unwrap();
        idx.save(&p).unwrap();
        let back = RetrievalIndex::load(&p).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.query_topk(&[0.0, 0.0], 2).unwrap(), idx.query_topk(&[0.0, 0.0], 2).unwrap());
    }
}
