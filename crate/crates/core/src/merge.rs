//! Granularity adjustment: agglomerative merging of clusters by the cosine
//! similarity of their TF-ICF representations.
//!
//! Each cluster is treated as one large document. With `K` active clusters
//! and `cf(t)` the number of clusters containing term `t`:
//!
//! ```text
//! icf_t   = 1 + ln((1 + K) / (1 + cf(t)))
//! W_{t,c} = tf_{t,c} · icf_t,   tf_{t,c} = n_c^t / n_c
//! ```
//!
//! `icf` is computed once from the pre-merge clustering and held fixed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use thiserror::Error;

use crate::corpus::WordId;
use crate::model::{ModelError, ModelState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MergeError {
    #[error("k_real = {k_real} is outside [1, {k_active}]")]
    KRealOutOfRange { k_real: usize, k_active: usize },
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("cosine of a zero-norm vector")]
    ZeroNorm,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Sparse TF-ICF weights sorted by word id, with the cached Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIcfVector {
    weights: Vec<(WordId, f64)>,
    norm: f64,
}

impl TfIcfVector {
    pub fn new(mut weights: Vec<(WordId, f64)>) -> Self {
        weights.sort_unstable_by_key(|&(w, _)| w);
        weights.retain(|&(_, x)| x != 0.0);
        let norm = weights.iter().map(|&(_, x)| x * x).sum::<f64>().sqrt();
        TfIcfVector { weights, norm }
    }

    pub fn weights(&self) -> &[(WordId, f64)] {
        &self.weights
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn get(&self, w: WordId) -> f64 {
        self.weights
            .binary_search_by_key(&w, |&(id, _)| id)
            .map_or(0.0, |i| self.weights[i].1)
    }
}

/// Inverse cluster frequency of every word over the active clusters.
pub fn compute_icf(state: &ModelState) -> Vec<f64> {
    let k = state.k_active() as f64;
    let mut cf = vec![0u32; state.vocab_size()];
    for c in state.clusters() {
        for (w, _) in c.word_counts() {
            cf[w as usize] += 1;
        }
    }
    cf.into_iter()
        .map(|f| 1.0 + ((1.0 + k) / (1.0 + f as f64)).ln())
        .collect()
}

pub fn tficf_vector(state: &ModelState, z: usize, icf: &[f64]) -> Result<TfIcfVector, MergeError> {
    let c = state.cluster(z)?;
    if c.tokens() == 0 {
        return Err(MergeError::EmptyCluster(z));
    }
    let n = c.tokens() as f64;
    Ok(TfIcfVector::new(
        c.word_counts()
            .map(|(w, count)| (w, count as f64 / n * icf[w as usize]))
            .collect(),
    ))
}

/// Cosine similarity of two non-negative vectors, clamped to `[0, 1]`.
pub fn cosine(u: &TfIcfVector, v: &TfIcfVector) -> Result<f64, MergeError> {
    if u.norm == 0.0 || v.norm == 0.0 {
        return Err(MergeError::ZeroNorm);
    }
    let (mut i, mut j) = (0, 0);
    let mut dot = 0.0;
    while i < u.weights.len() && j < v.weights.len() {
        let (wu, xu) = u.weights[i];
        let (wv, xv) = v.weights[j];
        match wu.cmp(&wv) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                dot += xu * xv;
                i += 1;
                j += 1;
            }
        }
    }
    Ok((dot / (u.norm * v.norm)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeStep {
    /// Surviving cluster (the smaller id).
    pub a: usize,
    /// Absorbed cluster.
    pub b: usize,
    pub similarity: f64,
}

/// Ordered record of merges. Ids refer to cluster indices before the final
/// compaction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeLog {
    pub steps: Vec<MergeStep>,
}

impl MergeLog {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `step,cluster_a,cluster_b,similarity`
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "step,cluster_a,cluster_b,similarity")?;
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(out, "{},{},{},{}", i + 1, s.a, s.b, s.similarity)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    similarity: f64,
    a: usize,
    b: usize,
    stamp_a: u64,
    stamp_b: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap on similarity; equal similarities pop the smallest (a, b) first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.similarity
            .total_cmp(&other.similarity)
            .then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
            .then_with(|| (other.stamp_a, other.stamp_b).cmp(&(self.stamp_a, self.stamp_b)))
    }
}

/// Greedily merges the most similar pair of clusters until `k_real` remain.
///
/// The surviving id of each merge is the smaller one; absorbed clusters are
/// removed (order-preserving) once merging finishes.
pub fn merge_to_k(state: &mut ModelState, k_real: usize) -> Result<MergeLog, MergeError> {
    let k = state.k_active();
    if k_real < 1 || k_real > k {
        return Err(MergeError::KRealOutOfRange {
            k_real,
            k_active: k,
        });
    }
    let mut log = MergeLog::default();
    if k_real == k {
        return Ok(log);
    }

    let icf = compute_icf(state);
    let mut vectors = (0..k)
        .map(|z| tficf_vector(state, z, &icf))
        .collect::<Result<Vec<_>, _>>()?;
    let mut active = vec![true; k];
    let mut version = vec![0u64; k];

    let mut queue = BinaryHeap::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            queue.push(Candidate {
                similarity: cosine(&vectors[a], &vectors[b])?,
                a,
                b,
                stamp_a: 0,
                stamp_b: 0,
            });
        }
    }

    let mut remaining = k;
    while remaining > k_real {
        let Some(cand) = queue.pop() else {
            unreachable!("queue drained with {remaining} clusters left");
        };
        let valid = active[cand.a]
            && active[cand.b]
            && version[cand.a] == cand.stamp_a
            && version[cand.b] == cand.stamp_b;
        if !valid {
            continue;
        }
        let (keep, gone) = (cand.a, cand.b);
        state.merge_into(keep, gone);
        active[gone] = false;
        version[keep] += 1;
        vectors[keep] = tficf_vector(state, keep, &icf)?;
        remaining -= 1;
        log.steps.push(MergeStep {
            a: keep,
            b: gone,
            similarity: cand.similarity,
        });
        log::debug!(
            "merged cluster {gone} into {keep} (cosine {:.6})",
            cand.similarity
        );

        for other in (0..k).filter(|&c| active[c] && c != keep) {
            let (a, b) = if other < keep {
                (other, keep)
            } else {
                (keep, other)
            };
            queue.push(Candidate {
                similarity: cosine(&vectors[a], &vectors[b])?,
                a,
                b,
                stamp_a: version[a],
                stamp_b: version[b],
            });
        }
    }
    state.compact();
    Ok(log)
}
