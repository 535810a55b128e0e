//! Initialization, Gibbs sweeps and the two end-to-end algorithms.
//!
//! Randomness comes from ChaCha8 seeded with the run seed. Initialization
//! and sweeps read from separate streams of that generator, so adding or
//! removing instrumentation never shifts the draws of either phase.

use std::io::{self, Write};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::eval::{self, LabeledPartitionPair};
use crate::merge::{merge_to_k, MergeError, MergeLog};
use crate::model::{log_scores_into, word_entropy, ModelError, ModelState, WeightingScheme};
use crate::numeric::{normalize_log_weights, sample_index};

const INIT_STREAM: u64 = 0;
const SWEEP_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("k_max = {k_max} exceeds the number of documents ({docs})")]
    KMaxExceedsCorpus { k_max: usize, docs: usize },
    #[error("cannot cluster an empty corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Merge(#[from] MergeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Gsdmm,
    GsdmmPlus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub k_max: usize,
    pub k_real: Option<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub entropy_refreshes_per_sweep: usize,
    pub entropy_epsilon: f64,
    pub entropy_normalized: bool,
    /// Visit documents in a fresh random order each sweep.
    pub shuffle: bool,
    /// Record ACC / NMI in the trace when every document has a gold label.
    pub trace_metrics: bool,
}

impl RunConfig {
    /// α = β = 0.1, K_max = 500, 20 iterations.
    pub fn gsdmm() -> Self {
        RunConfig {
            algorithm: Algorithm::Gsdmm,
            k_max: 500,
            k_real: None,
            alpha: 0.1,
            beta: 0.1,
            iterations: 20,
            seed: 0,
            entropy_refreshes_per_sweep: 15,
            entropy_epsilon: 1e-9,
            entropy_normalized: true,
            shuffle: false,
            trace_metrics: false,
        }
    }

    /// α = 0.1, β = 0.01, K_max = 500, 20 iterations, 15 entropy refreshes per sweep.
    pub fn gsdmm_plus() -> Self {
        RunConfig {
            algorithm: Algorithm::GsdmmPlus,
            beta: 0.01,
            ..RunConfig::gsdmm()
        }
    }

    pub fn defaults_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Gsdmm => RunConfig::gsdmm(),
            Algorithm::GsdmmPlus => RunConfig::gsdmm_plus(),
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let fail = |m: String| Err(SamplerError::Config(m));
        if self.k_max < 1 {
            return fail("k_max must be at least 1".into());
        }
        if self.iterations < 1 {
            return fail("iterations must be at least 1".into());
        }
        if let Some(k_real) = self.k_real {
            if k_real < 1 || k_real > self.k_max {
                return fail(format!(
                    "k_real = {k_real} must lie in [1, k_max = {}]",
                    self.k_max
                ));
            }
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return fail(format!("alpha = {} must be non-negative", self.alpha));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return fail(format!("beta = {} must be positive", self.beta));
        }
        if self.entropy_refreshes_per_sweep < 1 {
            return fail("entropy refreshes per sweep must be at least 1".into());
        }
        if !(self.entropy_epsilon > 0.0) {
            return fail("entropy epsilon must be positive".into());
        }
        Ok(())
    }

    fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub iteration: usize,
    pub active_clusters: usize,
    pub moved_docs: usize,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTrace {
    pub records: Vec<SweepRecord>,
}

impl SweepTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `iteration,active_clusters,moved_docs,acc,nmi`; missing metrics are empty fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,active_clusters,moved_docs,acc,nmi")?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration,
                r.active_clusters,
                r.moved_docs,
                opt(r.acc),
                opt(r.nmi)
            )?;
        }
        Ok(())
    }
}

/// Something that happened during a run without aborting it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunNote {
    /// Fewer clusters survived sampling than `k_real`; merging was skipped.
    KRealExceedsActive { k_real: usize, k_active: usize },
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Final cluster of each document, dense in `[0, k)`.
    pub assignments: Vec<usize>,
    pub state: ModelState,
    pub trace: SweepTrace,
    pub merge_log: MergeLog,
    pub notes: Vec<RunNote>,
}

/// Assigns every document to one of `k_max` clusters uniformly at random.
pub fn random_init<R: Rng>(corpus: &Corpus, cfg: &RunConfig, rng: &mut R) -> ModelState {
    let mut state = ModelState::new(
        cfg.k_max,
        corpus.len(),
        corpus.vocab_size(),
        cfg.alpha,
        cfg.k_max,
    );
    for (i, doc) in corpus.documents().iter().enumerate() {
        let z = rng.random_range(0..cfg.k_max);
        state.add_doc(i, doc, z);
    }
    state
}

/// Seeds `k_max` clusters with distinct random documents, then places the
/// remaining documents in corpus order by sampling from the conditional
/// (uniform β) computed over the documents placed so far.
pub fn adaptive_init<R: Rng>(
    corpus: &Corpus,
    cfg: &RunConfig,
    rng: &mut R,
) -> Result<ModelState, SamplerError> {
    let docs = corpus.documents();
    if cfg.k_max > docs.len() {
        return Err(SamplerError::KMaxExceedsCorpus {
            k_max: cfg.k_max,
            docs: docs.len(),
        });
    }
    let mut state = ModelState::new(
        cfg.k_max,
        docs.len(),
        corpus.vocab_size(),
        cfg.alpha,
        cfg.k_max,
    );
    let seeds = index::sample(rng, docs.len(), cfg.k_max);
    let mut placed = vec![false; docs.len()];
    for (z, d) in seeds.iter().enumerate() {
        state.add_doc(d, &docs[d], z);
        placed[d] = true;
    }

    let weighting = WeightingScheme::UniformBeta(cfg.beta);
    let mut scores = Vec::with_capacity(cfg.k_max);
    for (d, doc) in docs.iter().enumerate() {
        if placed[d] {
            continue;
        }
        let z = draw_cluster(doc, &state, &weighting, rng, &mut scores)?;
        state.add_doc(d, doc, z);
    }
    Ok(state)
}

fn draw_cluster<R: Rng>(
    doc: &crate::corpus::Document,
    state: &ModelState,
    weighting: &WeightingScheme,
    rng: &mut R,
    scores: &mut Vec<f64>,
) -> Result<usize, SamplerError> {
    let u = rng.random::<f64>();
    if state.k_active() == 1 {
        return Ok(0);
    }
    log_scores_into(doc, state, weighting, scores)?;
    let probs = normalize_log_weights(scores).ok_or_else(|| ModelError::NonFiniteScore {
        doc_id: doc.doc_id.clone(),
        cluster: 0,
        detail: "no cluster has a finite score".into(),
    })?;
    Ok(sample_index(&probs, u))
}

/// Reseats every document once. Returns how many changed cluster.
///
/// With `prune_empty`, a cluster emptied by removing its last document is
/// deleted (swap-with-last) unless it is the only cluster. With an
/// [`WeightingScheme::Entropy`] weighting the table is recomputed every
/// `⌈D / cfg.entropy_refreshes_per_sweep⌉` documents.
pub fn gibbs_sweep<R: Rng>(
    state: &mut ModelState,
    corpus: &Corpus,
    weighting: &mut WeightingScheme,
    cfg: &RunConfig,
    rng: &mut R,
    prune_empty: bool,
) -> Result<usize, SamplerError> {
    let docs = corpus.documents();
    let mut order: Vec<usize> = (0..docs.len()).collect();
    if cfg.shuffle {
        order.shuffle(rng);
    }
    let refresh_every = docs.len().div_ceil(cfg.entropy_refreshes_per_sweep).max(1);
    let mut scores = Vec::with_capacity(state.k_active());
    let mut moved = 0;

    for (pos, &d) in order.iter().enumerate() {
        let doc = &docs[d];
        let old = state.remove_doc(d, doc);
        let mut pruned = false;
        if prune_empty && state.clusters()[old].is_empty() && state.k_active() > 1 {
            state.swap_remove_cluster(old);
            pruned = true;
        }
        if let WeightingScheme::Entropy(table) = weighting {
            if pos % refresh_every == 0 {
                *table = word_entropy(state, cfg.entropy_epsilon, cfg.entropy_normalized);
            }
        }
        let new = draw_cluster(doc, state, weighting, rng, &mut scores)?;
        state.add_doc(d, doc, new);
        if pruned || new != old {
            moved += 1;
        }
    }
    debug_assert_eq!(state.check_invariants(corpus), Ok(()));
    Ok(moved)
}

fn record(
    iteration: usize,
    state: &ModelState,
    corpus: &Corpus,
    cfg: &RunConfig,
    moved_docs: usize,
) -> SweepRecord {
    let (acc, nmi) = match (cfg.trace_metrics, corpus.gold_labels()) {
        (true, Some(gold)) => {
            let pair = LabeledPartitionPair::from_labels(state.assignments(), &gold)
                .expect("assignments cover every document");
            (Some(eval::accuracy(&pair)), Some(eval::nmi(&pair)))
        }
        _ => (None, None),
    };
    SweepRecord {
        iteration,
        active_clusters: state.non_empty(),
        moved_docs,
        acc,
        nmi,
    }
}

/// Observer invoked after every sweep with the sweep record and the state.
pub type SweepObserver<'a> = dyn FnMut(&SweepRecord, &ModelState) + 'a;

/// Runs whichever algorithm `cfg.algorithm` selects.
pub fn run(corpus: &Corpus, cfg: &RunConfig) -> Result<RunOutput, SamplerError> {
    run_observed(corpus, cfg, &mut |_, _| {})
}

pub fn run_observed(
    corpus: &Corpus,
    cfg: &RunConfig,
    observer: &mut SweepObserver<'_>,
) -> Result<RunOutput, SamplerError> {
    match cfg.algorithm {
        Algorithm::Gsdmm => run_gsdmm_observed(corpus, cfg, observer),
        Algorithm::GsdmmPlus => run_gsdmm_plus_observed(corpus, cfg, observer),
    }
}

pub fn run_gsdmm(corpus: &Corpus, cfg: &RunConfig) -> Result<RunOutput, SamplerError> {
    run_gsdmm_observed(corpus, cfg, &mut |_, _| {})
}

/// Random initialization followed by `cfg.iterations` sweeps with a uniform
/// β. Empty clusters stay selectable; with α = 0 they score zero and are
/// skipped without evaluating the word terms.
pub fn run_gsdmm_observed(
    corpus: &Corpus,
    cfg: &RunConfig,
    observer: &mut SweepObserver<'_>,
) -> Result<RunOutput, SamplerError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(SamplerError::EmptyCorpus);
    }
    let mut init_rng = cfg.stream(INIT_STREAM);
    let mut sweep_rng = cfg.stream(SWEEP_STREAM);
    let mut state = random_init(corpus, cfg, &mut init_rng);
    let mut weighting = WeightingScheme::UniformBeta(cfg.beta);
    let mut trace = SweepTrace::default();
    for it in 1..=cfg.iterations {
        let moved = gibbs_sweep(
            &mut state,
            corpus,
            &mut weighting,
            cfg,
            &mut sweep_rng,
            false,
        )?;
        let rec = record(it, &state, corpus, cfg, moved);
        log::info!(
            "sweep {it}: {} non-empty clusters, {moved} moved",
            rec.active_clusters
        );
        observer(&rec, &state);
        trace.records.push(rec);
    }
    state.compact();
    Ok(RunOutput {
        assignments: state.assignments().to_vec(),
        state,
        trace,
        merge_log: MergeLog::default(),
        notes: Vec::new(),
    })
}

pub fn run_gsdmm_plus(corpus: &Corpus, cfg: &RunConfig) -> Result<RunOutput, SamplerError> {
    run_gsdmm_plus_observed(corpus, cfg, &mut |_, _| {})
}

/// Adaptive initialization, entropy-weighted sweeps with empty-cluster
/// pruning, then TF-ICF merging down to `cfg.k_real` when it is set.
pub fn run_gsdmm_plus_observed(
    corpus: &Corpus,
    cfg: &RunConfig,
    observer: &mut SweepObserver<'_>,
) -> Result<RunOutput, SamplerError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(SamplerError::EmptyCorpus);
    }
    let mut init_rng = cfg.stream(INIT_STREAM);
    let mut sweep_rng = cfg.stream(SWEEP_STREAM);
    let mut state = adaptive_init(corpus, cfg, &mut init_rng)?;
    let mut weighting = WeightingScheme::Entropy(word_entropy(
        &state,
        cfg.entropy_epsilon,
        cfg.entropy_normalized,
    ));
    let mut trace = SweepTrace::default();
    for it in 1..=cfg.iterations {
        let moved = gibbs_sweep(
            &mut state,
            corpus,
            &mut weighting,
            cfg,
            &mut sweep_rng,
            true,
        )?;
        let rec = record(it, &state, corpus, cfg, moved);
        log::info!(
            "sweep {it}: {} active clusters, {moved} moved",
            rec.active_clusters
        );
        observer(&rec, &state);
        trace.records.push(rec);
    }

    let mut merge_log = MergeLog::default();
    let mut notes = Vec::new();
    if let Some(k_real) = cfg.k_real {
        let k_active = state.k_active();
        if k_real > k_active {
            log::warn!("k_real = {k_real} exceeds the {k_active} active clusters; skipping merge");
            notes.push(RunNote::KRealExceedsActive { k_real, k_active });
        } else if k_real < k_active {
            merge_log = merge_to_k(&mut state, k_real)?;
        }
    }
    Ok(RunOutput {
        assignments: state.assignments().to_vec(),
        state,
        trace,
        merge_log,
        notes,
    })
}
