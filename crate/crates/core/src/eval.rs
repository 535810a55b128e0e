//! Clustering quality against gold labels.
//!
//! * **ACC**: fraction of documents correctly labelled under the best
//!   one-to-one mapping from predicted clusters to gold classes. The
//!   confusion matrix is zero-padded to square and the mapping is found
//!   with the Hungarian (Kuhn–Munkres) algorithm.
//! * **NMI**: `I(pred; gold) / sqrt(H(pred) · H(gold))`, natural logs,
//!   `0 · ln 0 = 0`.

use std::collections::HashMap;
use std::hash::Hash;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("prediction has {pred} entries but gold has {gold}")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("cannot evaluate an empty partition")]
    Empty,
    #[error("{which} ids are not dense: id {missing} is unused")]
    NotDense { which: &'static str, missing: usize },
}

/// Predicted and gold partitions over the same documents, with ids dense
/// in `[0, k_pred)` and `[0, k_gold)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPartitionPair {
    pred: Vec<usize>,
    gold: Vec<usize>,
    k_pred: usize,
    k_gold: usize,
}

fn dense_k(ids: &[usize], which: &'static str) -> Result<usize, EvalError> {
    let k = ids.iter().max().map_or(0, |&m| m + 1);
    let mut used = vec![false; k];
    for &i in ids {
        used[i] = true;
    }
    match used.iter().position(|u| !u) {
        Some(missing) => Err(EvalError::NotDense { which, missing }),
        None => Ok(k),
    }
}

fn densify<T: Hash + Eq>(labels: &[T]) -> Vec<usize> {
    let mut ids: HashMap<&T, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect()
}

impl LabeledPartitionPair {
    pub fn new(pred: Vec<usize>, gold: Vec<usize>) -> Result<Self, EvalError> {
        if pred.len() != gold.len() {
            return Err(EvalError::LengthMismatch {
                pred: pred.len(),
                gold: gold.len(),
            });
        }
        if pred.is_empty() {
            return Err(EvalError::Empty);
        }
        let k_pred = dense_k(&pred, "predicted")?;
        let k_gold = dense_k(&gold, "gold")?;
        Ok(LabeledPartitionPair {
            pred,
            gold,
            k_pred,
            k_gold,
        })
    }

    /// Relabels arbitrary hashable labels to dense ids by first appearance.
    pub fn from_labels<P: Hash + Eq, G: Hash + Eq>(
        pred: &[P],
        gold: &[G],
    ) -> Result<Self, EvalError> {
        if pred.len() != gold.len() {
            return Err(EvalError::LengthMismatch {
                pred: pred.len(),
                gold: gold.len(),
            });
        }
        LabeledPartitionPair::new(densify(pred), densify(gold))
    }

    pub fn pred(&self) -> &[usize] {
        &self.pred
    }

    pub fn gold(&self) -> &[usize] {
        &self.gold
    }

    pub fn k_pred(&self) -> usize {
        self.k_pred
    }

    pub fn k_gold(&self) -> usize {
        self.k_gold
    }

    pub fn len(&self) -> usize {
        self.pred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pred.is_empty()
    }

    /// `k_pred × k_gold` contingency table.
    pub fn confusion(&self) -> Vec<Vec<u64>> {
        let mut m = vec![vec![0u64; self.k_gold]; self.k_pred];
        for (&p, &g) in self.pred.iter().zip(&self.gold) {
            m[p][g] += 1;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub nmi: f64,
    pub k_pred: usize,
    pub k_gold: usize,
    #[serde(skip)]
    pub confusion: Vec<Vec<u64>>,
}

/// Number of documents matched under the optimal one-to-one mapping.
pub fn matched_count(pair: &LabeledPartitionPair) -> u64 {
    let confusion = pair.confusion();
    let n = pair.k_pred.max(pair.k_gold);
    let weights = Matrix::from_fn(n, n, |(r, c)| {
        confusion
            .get(r)
            .and_then(|row| row.get(c))
            .map_or(0, |&v| v as i64)
    });
    let (total, _) = kuhn_munkres(&weights);
    total as u64
}

pub fn accuracy(pair: &LabeledPartitionPair) -> f64 {
    matched_count(pair) as f64 / pair.len() as f64
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn nmi(pair: &LabeledPartitionPair) -> f64 {
    let confusion = pair.confusion();
    let n = pair.len() as f64;
    let row: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<u64> = (0..pair.k_gold)
        .map(|g| confusion.iter().map(|r| r[g]).sum())
        .collect();
    let h_pred = entropy(&row, n);
    let h_gold = entropy(&col, n);
    if h_pred == 0.0 || h_gold == 0.0 {
        return if pair.k_pred == 1 && pair.k_gold == 1 {
            1.0
        } else {
            0.0
        };
    }
    let mut mi = 0.0;
    for (p, r) in confusion.iter().enumerate() {
        for (g, &c) in r.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (row[p] as f64 * col[g] as f64)).ln();
            }
        }
    }
    (mi / (h_pred * h_gold).sqrt()).clamp(0.0, 1.0)
}

pub fn evaluate(pair: &LabeledPartitionPair) -> EvalReport {
    EvalReport {
        acc: accuracy(pair),
        nmi: nmi(pair),
        k_pred: pair.k_pred,
        k_gold: pair.k_gold,
        confusion: pair.confusion(),
    }
}
