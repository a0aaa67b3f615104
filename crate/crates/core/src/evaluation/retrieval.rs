use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            _ => Err(Error::InvalidArgument(format!("unknown metric '{s}'"))),
        }
    }
}

impl Metric {
    /// Euclidean distance, or `1 - cos` (1 when either vector is zero).
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Cosine => {
                let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    ab += x * y;
                    aa += x * x;
                    bb += y * y;
                }
                if aa == 0.0 || bb == 0.0 {
                    1.0
                } else {
                    1.0 - ab / (aa.sqrt() * bb.sqrt())
                }
            }
        }
    }
}

/// A feature vector with its category, used both as query and as corpus item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    pub id: u64,
    pub values: Vec<f64>,
    pub category: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: u64,
    pub distance: f64,
}

fn rank_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id))
}

fn check_corpus(corpus: &[LabeledVector], dim: usize) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty corpus".into()));
    }
    let mut ids = BTreeSet::new();
    for item in corpus {
        if item.values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: item.values.len(),
            });
        }
        if !ids.insert(item.id) {
            return Err(Error::DuplicateId(item.id));
        }
    }
    Ok(())
}

fn ranked(query: &[f64], corpus: &[LabeledVector], k: usize, metric: Metric) -> Vec<(Neighbor, usize)> {
    let mut all: Vec<(Neighbor, usize)> = corpus
        .iter()
        .enumerate()
        .map(|(i, c)| {
            (
                Neighbor {
                    id: c.id,
                    distance: metric.distance(query, &c.values),
                },
                i,
            )
        })
        .collect();
    let cmp = |a: &(Neighbor, usize), b: &(Neighbor, usize)| rank_order(&a.0, &b.0);
    if k < all.len() {
        all.select_nth_unstable_by(k, cmp);
        all.truncate(k);
    }
    all.sort_unstable_by(cmp);
    all
}

/// The `k` nearest corpus items by ascending distance, ties by ascending id.
pub fn nn_retrieve(query: &[f64], corpus: &[LabeledVector], k: usize, metric: Metric) -> Result<Vec<Neighbor>> {
    check_corpus(corpus, query.len())?;
    if k > corpus.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds corpus size {}",
            corpus.len()
        )));
    }
    Ok(ranked(query, corpus, k, metric).into_iter().map(|(n, _)| n).collect())
}

/// Recall@k for `k = 1..=k_max`, overall and per query category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallCurve {
    pub k_max: usize,
    pub overall: Vec<f64>,
    pub per_category: BTreeMap<String, Vec<f64>>,
}

impl RecallCurve {
    pub fn at(&self, k: usize) -> f64 {
        self.overall[k - 1]
    }
}

/// Rank (1-based) of the first same-category item among the top `k_max`.
fn first_hit(query: &LabeledVector, corpus: &[LabeledVector], k_max: usize, metric: Metric) -> Option<usize> {
    ranked(&query.values, corpus, k_max, metric)
        .iter()
        .position(|(_, i)| corpus[*i].category == query.category)
        .map(|p| p + 1)
}

pub fn recall_curve(
    queries: &[LabeledVector],
    corpus: &[LabeledVector],
    k_max: usize,
    metric: Metric,
) -> Result<RecallCurve> {
    let dim = queries
        .first()
        .map_or_else(|| corpus.first().map_or(0, |c| c.values.len()), |q| q.values.len());
    check_corpus(corpus, dim)?;
    if k_max == 0 || k_max > corpus.len() {
        return Err(Error::InvalidArgument(format!(
            "k_max = {k_max} must lie in 1..={}",
            corpus.len()
        )));
    }
    if let Some(q) = queries.iter().find(|q| q.values.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: q.values.len(),
        });
    }
    let hits: Vec<Option<usize>> = queries
        .par_iter()
        .map(|q| first_hit(q, corpus, k_max, metric))
        .collect();

    let curve = |members: &[usize]| -> Vec<f64> {
        let mut counts = vec![0usize; k_max + 1];
        for &m in members {
            if let Some(r) = hits[m] {
                counts[r] += 1;
            }
        }
        let n = members.len().max(1) as f64;
        let mut acc = 0usize;
        (1..=k_max)
            .map(|k| {
                acc += counts[k];
                acc as f64 / n
            })
            .collect()
    };
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, q) in queries.iter().enumerate() {
        groups.entry(q.category.clone()).or_default().push(i);
    }
    let all: Vec<usize> = (0..queries.len()).collect();
    Ok(RecallCurve {
        k_max,
        overall: curve(&all),
        per_category: groups.iter().map(|(c, m)| (c.clone(), curve(m))).collect(),
    })
}

/// Fraction of queries whose nearest corpus item shares their category.
pub fn nn_accuracy(queries: &[LabeledVector], corpus: &[LabeledVector], metric: Metric) -> Result<f64> {
    Ok(recall_curve(queries, corpus, 1, metric)?.overall[0])
}
