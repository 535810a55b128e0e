//! Fixture builders shared by the integration and acceptance tests.
#![allow(dead_code)]

use gsdmm::corpus::{Corpus, Document, Vocabulary, WordId};
use gsdmm::model::ModelState;
use rand::Rng;

/// A corpus over `v` words named `w0..`, with document lengths in
/// `1..=max_len`. Words are drawn from a small per-document pool so that
/// repeated words are common.
pub fn random_corpus<R: Rng>(rng: &mut R, d: usize, v: usize, max_len: usize) -> Corpus {
    let mut df = vec![0u32; v];
    let docs: Vec<Document> = (0..d)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            let pool: Vec<WordId> = (0..3).map(|_| rng.random_range(0..v) as WordId).collect();
            let ids: Vec<WordId> = (0..len)
                .map(|_| pool[rng.random_range(0..pool.len())])
                .collect();
            let doc = Document::from_word_ids(format!("d{i}"), ids, None);
            for &(w, _) in &doc.counts {
                df[w as usize] += 1;
            }
            doc
        })
        .collect();
    let vocab = Vocabulary::from_entries((0..v).map(|j| (format!("w{j}"), df[j]))).unwrap();
    Corpus::new(docs, vocab).unwrap()
}

/// Uniform random assignment to `k` clusters in which every cluster is used
/// (requires `k <= d`).
pub fn covering_assignment<R: Rng>(rng: &mut R, d: usize, k: usize) -> Vec<usize> {
    assert!(k <= d);
    let mut a: Vec<usize> = (0..d).map(|_| rng.random_range(0..k)).collect();
    let mut slots: Vec<usize> = (0..d).collect();
    for z in 0..k {
        let pick = rng.random_range(z..d);
        slots.swap(z, pick);
        a[slots[z]] = z;
    }
    a
}

/// Recounts everything from the assignment vector and compares it with the
/// state's statistics using only public accessors.
pub fn check_counts(state: &ModelState, corpus: &Corpus, pruned: bool) -> Result<(), String> {
    let k = state.k_active();
    let docs = corpus.documents();
    let mut m = vec![0u64; k];
    let mut n = vec![0u64; k];
    let mut nw = vec![std::collections::HashMap::<WordId, u64>::new(); k];
    for (i, &z) in state.assignments().iter().enumerate() {
        if z >= k {
            return Err(format!("document {i} has cluster {z} >= K_active {k}"));
        }
        m[z] += 1;
        n[z] += docs[i].total_len as u64;
        for &(w, c) in &docs[i].counts {
            *nw[z].entry(w).or_default() += c as u64;
        }
    }
    let total_m: u64 = state.clusters().iter().map(|c| c.docs() as u64).sum();
    if total_m != corpus.len() as u64 {
        return Err(format!("Σ m_z = {total_m}, D = {}", corpus.len()));
    }
    for (z, c) in state.clusters().iter().enumerate() {
        let word_sum: u64 = c.word_counts().map(|(_, x)| x as u64).sum();
        if c.tokens() as u64 != word_sum {
            return Err(format!(
                "cluster {z}: n_z = {} but Σ_w n_z^w = {word_sum}",
                c.tokens()
            ));
        }
        if c.docs() as u64 != m[z] || c.tokens() as u64 != n[z] {
            return Err(format!(
                "cluster {z}: (m, n) = ({}, {}), recount ({}, {})",
                c.docs(),
                c.tokens(),
                m[z],
                n[z]
            ));
        }
        for (w, x) in c.word_counts() {
            if nw[z].get(&w).copied().unwrap_or(0) != x as u64 {
                return Err(format!("cluster {z}: n^{w} mismatch"));
            }
        }
        if nw[z].len() != c.word_counts().count() {
            return Err(format!("cluster {z}: word support mismatch"));
        }
        if pruned && c.tokens() == 0 {
            return Err(format!("cluster {z} is active but empty"));
        }
    }
    Ok(())
}
