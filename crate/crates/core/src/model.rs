//! Cluster sufficient statistics and the collapsed conditional.
//!
//! The conditional probability of document `d` joining cluster `z` is
//!
//! ```text
//!            m_{z,¬d} + α     Π_{w∈d} Π_{j=1..N_d^w} (n_{z,¬d}^w + c_w + j - 1)
//! p(z|·) ∝ --------------- · ------------------------------------------------
//!          D - 1 + K_max·α          Π_{i=1..N_d} (n_{z,¬d} + C + i - 1)
//! ```
//!
//! where `c_w` is the per-word pseudo-count (a uniform `β`, or the word's
//! entropy) and `C = Σ_w c_w`. Everything is evaluated in log space.

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::corpus::{Corpus, Document, Vocabulary, WordId};
use crate::numeric::{ln_rising, normalize_log_weights};

/// Marker for a document that is not currently counted in any cluster.
pub const UNASSIGNED: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("cluster {cluster} is not active (K_active = {k_active})")]
    InactiveCluster { cluster: usize, k_active: usize },
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("non-finite score for document `{doc_id}` in cluster {cluster}: {detail}")]
    NonFiniteScore {
        doc_id: String,
        cluster: usize,
        detail: String,
    },
}

/// Per-cluster sufficient statistics: `m_z`, `n_z` and `n_z^w`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterStats {
    m: u32,
    n: u32,
    word_counts: FxHashMap<WordId, u32>,
}

impl ClusterStats {
    /// Number of documents.
    pub fn docs(&self) -> u32 {
        self.m
    }

    /// Number of word tokens.
    pub fn tokens(&self) -> u32 {
        self.n
    }

    pub fn word_count(&self, w: WordId) -> u32 {
        self.word_counts.get(&w).copied().unwrap_or(0)
    }

    /// Non-zero word counts, in unspecified order.
    pub fn word_counts(&self) -> impl Iterator<Item = (WordId, u32)> + '_ {
        self.word_counts.iter().map(|(&w, &c)| (w, c))
    }

    /// Non-zero word counts sorted by word id.
    pub fn sorted_word_counts(&self) -> Vec<(WordId, u32)> {
        let mut v: Vec<_> = self.word_counts().collect();
        v.sort_unstable_by_key(|&(w, _)| w);
        v
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    fn add(&mut self, doc: &Document) {
        self.m += 1;
        self.n += doc.total_len;
        for &(w, c) in &doc.counts {
            *self.word_counts.entry(w).or_insert(0) += c;
        }
    }

    fn remove(&mut self, doc: &Document) {
        debug_assert!(self.m > 0 && self.n >= doc.total_len);
        self.m -= 1;
        self.n -= doc.total_len;
        for &(w, c) in &doc.counts {
            let slot = self
                .word_counts
                .get_mut(&w)
                .expect("removing a word the cluster does not hold");
            debug_assert!(*slot >= c);
            *slot -= c;
            if *slot == 0 {
                self.word_counts.remove(&w);
            }
        }
    }

    fn absorb(&mut self, other: ClusterStats) {
        self.m += other.m;
        self.n += other.n;
        for (w, c) in other.word_counts {
            *self.word_counts.entry(w).or_insert(0) += c;
        }
    }
}

/// The mutable sampler state: clusters, assignments and a cluster → members
/// index that makes relabelling proportional to cluster size.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    clusters: Vec<ClusterStats>,
    members: Vec<Vec<usize>>,
    member_slot: Vec<usize>,
    assignments: Vec<usize>,
    alpha: f64,
    k_max: usize,
    v: usize,
}

impl ModelState {
    /// An empty state with `k` empty clusters over `num_docs` unassigned documents.
    pub fn new(k: usize, num_docs: usize, vocab_size: usize, alpha: f64, k_max: usize) -> Self {
        ModelState {
            clusters: vec![ClusterStats::default(); k],
            members: vec![Vec::new(); k],
            member_slot: vec![UNASSIGNED; num_docs],
            assignments: vec![UNASSIGNED; num_docs],
            alpha,
            k_max,
            v: vocab_size,
        }
    }

    /// Builds a state from a complete assignment vector.
    pub fn from_assignments(
        corpus: &Corpus,
        assignments: &[usize],
        k: usize,
        alpha: f64,
    ) -> Result<Self, ModelError> {
        let mut state = ModelState::new(k, corpus.len(), corpus.vocab_size(), alpha, k);
        for (i, (&z, doc)) in assignments.iter().zip(corpus.documents()).enumerate() {
            state.check_active(z)?;
            state.add_doc(i, doc, z);
        }
        Ok(state)
    }

    pub fn k_active(&self) -> usize {
        self.clusters.len()
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_docs(&self) -> usize {
        self.assignments.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.v
    }

    pub fn clusters(&self) -> &[ClusterStats] {
        &self.clusters
    }

    pub fn cluster(&self, z: usize) -> Result<&ClusterStats, ModelError> {
        self.check_active(z)?;
        Ok(&self.clusters[z])
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn members(&self, z: usize) -> &[usize] {
        &self.members[z]
    }

    /// Number of clusters holding at least one document.
    pub fn non_empty(&self) -> usize {
        self.clusters.iter().filter(|c| !c.is_empty()).count()
    }

    /// Number of documents currently counted.
    pub fn assigned_docs(&self) -> usize {
        self.clusters.iter().map(|c| c.m as usize).sum()
    }

    pub(crate) fn check_active(&self, z: usize) -> Result<(), ModelError> {
        if z < self.clusters.len() {
            Ok(())
        } else {
            Err(ModelError::InactiveCluster {
                cluster: z,
                k_active: self.clusters.len(),
            })
        }
    }

    /// Adds an unassigned document to cluster `z`.
    pub fn add_doc(&mut self, idx: usize, doc: &Document, z: usize) {
        debug_assert_eq!(self.assignments[idx], UNASSIGNED);
        self.clusters[z].add(doc);
        self.member_slot[idx] = self.members[z].len();
        self.members[z].push(idx);
        self.assignments[idx] = z;
    }

    /// Removes a document from its cluster and returns that cluster.
    pub fn remove_doc(&mut self, idx: usize, doc: &Document) -> usize {
        let z = self.assignments[idx];
        debug_assert_ne!(z, UNASSIGNED);
        self.clusters[z].remove(doc);
        let slot = self.member_slot[idx];
        self.members[z].swap_remove(slot);
        if let Some(&moved) = self.members[z].get(slot) {
            self.member_slot[moved] = slot;
        }
        self.member_slot[idx] = UNASSIGNED;
        self.assignments[idx] = UNASSIGNED;
        z
    }

    /// Deletes empty cluster `z` by moving the last cluster into its slot.
    /// Only the moved cluster's members are relabelled.
    pub fn swap_remove_cluster(&mut self, z: usize) {
        assert!(self.clusters[z].is_empty(), "cluster {z} is not empty");
        let last = self.clusters.len() - 1;
        self.clusters.swap_remove(z);
        self.members.swap_remove(z);
        if z != last {
            for &doc in &self.members[z] {
                self.assignments[doc] = z;
            }
        }
    }

    /// Drops every empty cluster, keeping the relative order of the rest.
    pub fn compact(&mut self) {
        let mut remap = vec![UNASSIGNED; self.clusters.len()];
        let mut next = 0;
        for (z, c) in self.clusters.iter().enumerate() {
            if !c.is_empty() {
                remap[z] = next;
                next += 1;
            }
        }
        if next == self.clusters.len() {
            return;
        }
        let clusters = std::mem::take(&mut self.clusters);
        let members = std::mem::take(&mut self.members);
        for (c, m) in clusters.into_iter().zip(members) {
            if !c.is_empty() {
                self.clusters.push(c);
                self.members.push(m);
            }
        }
        for z in self.assignments.iter_mut() {
            if *z != UNASSIGNED {
                *z = remap[*z];
            }
        }
    }

    /// Moves all of `from`'s documents and counts into `into`, leaving `from` empty.
    pub fn merge_into(&mut self, into: usize, from: usize) {
        assert_ne!(into, from);
        let stats = std::mem::take(&mut self.clusters[from]);
        self.clusters[into].absorb(stats);
        let moved = std::mem::take(&mut self.members[from]);
        for doc in moved {
            self.assignments[doc] = into;
            self.member_slot[doc] = self.members[into].len();
            self.members[into].push(doc);
        }
    }

    /// Recomputes all statistics from the assignments and compares them
    /// with the incrementally maintained ones.
    pub fn check_invariants(&self, corpus: &Corpus) -> Result<(), String> {
        let mut fresh = vec![ClusterStats::default(); self.clusters.len()];
        for (i, &z) in self.assignments.iter().enumerate() {
            if z == UNASSIGNED {
                continue;
            }
            if z >= fresh.len() {
                return Err(format!("document {i} assigned to inactive cluster {z}"));
            }
            fresh[z].add(&corpus.documents()[i]);
        }
        for (z, (have, want)) in self.clusters.iter().zip(&fresh).enumerate() {
            if have != want {
                return Err(format!(
                    "cluster {z} statistics drifted from its assignments"
                ));
            }
            let token_sum: u32 = have.word_counts.values().sum();
            if token_sum != have.n {
                return Err(format!(
                    "cluster {z}: n = {} but Σ n^w = {token_sum}",
                    have.n
                ));
            }
            if (have.n == 0) != (have.m == 0) {
                return Err(format!("cluster {z}: m = {}, n = {}", have.m, have.n));
            }
            if self.members[z].len() != have.m as usize {
                return Err(format!("cluster {z}: member index out of sync"));
            }
            for (slot, &doc) in self.members[z].iter().enumerate() {
                if self.assignments[doc] != z || self.member_slot[doc] != slot {
                    return Err(format!("cluster {z}: member index out of sync"));
                }
            }
        }
        Ok(())
    }

    /// `(m_{z,¬d} + α) / (D − 1 + K_max·α)`.
    ///
    /// If `excluding_doc` is still counted in `z`, its removal is simulated.
    pub fn prior_cluster_factor(&self, z: usize, excluding_doc: usize) -> Result<f64, ModelError> {
        self.check_active(z)?;
        let mut m = self.clusters[z].m as f64;
        if self.assignments[excluding_doc] == z {
            m -= 1.0;
        }
        let d = self.assignments.len() as f64;
        Ok((m + self.alpha) / (d - 1.0 + self.k_max as f64 * self.alpha))
    }
}

/// Per-word entropies across clusters, used as pseudo-counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyTable {
    h: Vec<f64>,
    sum_h: f64,
    epsilon: f64,
    normalized: bool,
}

impl EntropyTable {
    /// Wraps explicit entropy values, e.g. for tests or replay.
    pub fn from_values(h: Vec<f64>, epsilon: f64, normalized: bool) -> Self {
        let sum_h = h.iter().sum();
        EntropyTable {
            h,
            sum_h,
            epsilon,
            normalized,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.h
    }

    pub fn get(&self, w: WordId) -> f64 {
        self.h[w as usize]
    }

    pub fn sum(&self) -> f64 {
        self.sum_h
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
}

/// Per-word Dirichlet pseudo-counts used by the conditional.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightingScheme {
    UniformBeta(f64),
    Entropy(EntropyTable),
}

impl WeightingScheme {
    #[inline]
    pub fn pseudo_count(&self, w: WordId) -> f64 {
        match self {
            WeightingScheme::UniformBeta(beta) => *beta,
            WeightingScheme::Entropy(t) => t.h[w as usize],
        }
    }

    /// `Σ_{w∈V} c_w`.
    pub fn total(&self, vocab_size: usize) -> f64 {
        match self {
            WeightingScheme::UniformBeta(beta) => vocab_size as f64 * beta,
            WeightingScheme::Entropy(t) => t.sum_h,
        }
    }
}

fn non_finite(doc: &Document, z: usize, detail: String) -> ModelError {
    ModelError::NonFiniteScore {
        doc_id: doc.doc_id.clone(),
        cluster: z,
        detail,
    }
}

/// Unnormalized log conditional of `doc` joining cluster `z`.
///
/// The document must currently be excluded from the counts. The shared
/// denominator `D − 1 + K·α` is omitted. With `α = 0` an empty cluster
/// scores `-inf`.
pub fn doc_cluster_log_score(
    doc: &Document,
    z: usize,
    state: &ModelState,
    w: &WeightingScheme,
) -> Result<f64, ModelError> {
    state.check_active(z)?;
    let total = w.total(state.v);
    score_with_total(doc, z, state, w, total)
}

fn score_with_total(
    doc: &Document,
    z: usize,
    state: &ModelState,
    w: &WeightingScheme,
    total: f64,
) -> Result<f64, ModelError> {
    let cluster = &state.clusters[z];
    let prior = cluster.m as f64 + state.alpha;
    if prior <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let mut score = prior.ln();
    for &(word, count) in &doc.counts {
        let base = cluster.word_count(word) as f64 + w.pseudo_count(word);
        if !(base > 0.0) {
            return Err(non_finite(
                doc,
                z,
                format!("word {word}: count + pseudo-count = {base}"),
            ));
        }
        score += ln_rising(base, count);
    }
    let base = cluster.n as f64 + total;
    if !(base > 0.0) {
        return Err(non_finite(doc, z, format!("cluster total {base}")));
    }
    score -= ln_rising(base, doc.total_len);
    if score.is_nan() || score == f64::INFINITY {
        return Err(non_finite(doc, z, format!("score {score}")));
    }
    Ok(score)
}

/// Fills `out` with log scores of `doc` against every active cluster.
pub(crate) fn log_scores_into(
    doc: &Document,
    state: &ModelState,
    w: &WeightingScheme,
    out: &mut Vec<f64>,
) -> Result<(), ModelError> {
    out.clear();
    let total = w.total(state.v);
    for z in 0..state.clusters.len() {
        out.push(score_with_total(doc, z, state, w, total)?);
    }
    Ok(())
}

/// Normalized conditional over the active clusters.
pub fn conditional_distribution(
    doc: &Document,
    state: &ModelState,
    w: &WeightingScheme,
) -> Result<Vec<f64>, ModelError> {
    if state.k_active() == 1 {
        return Ok(vec![1.0]);
    }
    let mut scores = Vec::with_capacity(state.k_active());
    log_scores_into(doc, state, w, &mut scores)?;
    normalize_log_weights(&scores)
        .ok_or_else(|| non_finite(doc, 0, "no cluster has a finite score".to_string()))
}

/// Entropy of each word's distribution over the active clusters.
///
/// `p_k(w) = (n_k^w + ε) / (Σ_k n_k^w + K·ε)` and `H(w) = −Σ_k p_k ln p_k`.
/// When `normalized`, values are divided by `ln K`; a single cluster gives 1.
pub fn word_entropy(state: &ModelState, epsilon: f64, normalized: bool) -> EntropyTable {
    let k = state.k_active();
    let v = state.v;
    if normalized && k <= 1 {
        return EntropyTable::from_values(vec![1.0; v], epsilon, normalized);
    }
    let kf = k as f64;
    let mut totals = vec![0u64; v];
    let mut nnz = vec![0u32; v];
    let mut min_count = vec![u32::MAX; v];
    let mut max_count = vec![0u32; v];
    for c in &state.clusters {
        for (&w, &n) in &c.word_counts {
            let w = w as usize;
            totals[w] += n as u64;
            nnz[w] += 1;
            min_count[w] = min_count[w].min(n);
            max_count[w] = max_count[w].max(n);
        }
    }
    let mut acc = vec![0.0f64; v];
    for c in &state.clusters {
        for (&w, &n) in &c.word_counts {
            let p = (n as f64 + epsilon) / (totals[w as usize] as f64 + kf * epsilon);
            acc[w as usize] -= p * p.ln();
        }
    }
    let scale = if normalized { 1.0 / kf.ln() } else { 1.0 };
    let h = (0..v)
        .map(|w| {
            // Equal counts in every cluster (or none at all) give p_k = 1/K exactly.
            let uniform = nnz[w] == 0 || (nnz[w] as usize == k && min_count[w] == max_count[w]);
            if uniform {
                return if normalized { 1.0 } else { kf.ln() };
            }
            let denom = totals[w] as f64 + kf * epsilon;
            let p0 = epsilon / denom;
            let zeros = (k as u32 - nnz[w]) as f64;
            let zero_term = if zeros > 0.0 {
                -zeros * p0 * p0.ln()
            } else {
                0.0
            };
            let h = (acc[w] + zero_term) * scale;
            if normalized {
                h.clamp(0.0, 1.0)
            } else {
                h.max(0.0)
            }
        })
        .collect();
    EntropyTable::from_values(h, epsilon, normalized)
}

/// Posterior mean word distribution of cluster `z`:
/// `φ̂_{z,w} = (n_z^w + β) / (n_z + V·β)`.
pub fn posterior_phi(state: &ModelState, z: usize, beta: f64) -> Result<Vec<f64>, ModelError> {
    let c = state.cluster(z)?;
    let denom = c.n as f64 + state.v as f64 * beta;
    let mut phi = vec![beta / denom; state.v];
    for (w, n) in c.word_counts() {
        phi[w as usize] = (n as f64 + beta) / denom;
    }
    Ok(phi)
}

/// The `n` most probable words of cluster `z`, ties broken by word id.
pub fn top_words(
    state: &ModelState,
    vocab: &Vocabulary,
    z: usize,
    n: usize,
    beta: f64,
) -> Result<Vec<(String, f64)>, ModelError> {
    let phi = posterior_phi(state, z, beta)?;
    let mut order: Vec<usize> = (0..phi.len()).collect();
    order.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(n)
        .map(|w| (vocab.word(w as WordId).to_owned(), phi[w]))
        .collect())
}
