//! Synthetic corpora drawn from the Dirichlet multinomial mixture, and
//! brute-force reference computations used to check the sampler and metrics.
//!
//! The oracles here deliberately take the long way round: the conditional
//! is evaluated as a ratio of Dirichlet normalizers via `ln Γ`, and the
//! joint is enumerated over every assignment, so they share no arithmetic
//! with the rising-factorial kernels in [`crate::model`].

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{assemble, tokenize, Corpus, Document, RawDoc, TokenRules, WordId};
use crate::eval::LabeledPartitionPair;
use crate::model::{ModelState, WeightingScheme};
use crate::numeric::ln_gamma;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("Δ argument {0} is not positive")]
    NonPositiveArgument(f64),
    #[error("enumeration needs {needed} assignments, limit is {limit}")]
    InstanceTooLarge { needed: f64, limit: usize },
    #[error("brute-force assignment supports at most {limit} clusters, got {got}")]
    TooManyClusters { got: usize, limit: usize },
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
}

pub const MAX_ENUMERATION: usize = 1_000_000;
pub const MAX_BRUTEFORCE_CLUSTERS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DocLength {
    Fixed(u32),
    /// `1 + Poisson(mean - 1)`, so the mean is exactly `mean` and no draw is 0.
    ShiftedPoisson {
        mean: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub k: usize,
    pub v: usize,
    pub d: usize,
    pub doc_len: DocLength,
    pub alpha_gen: f64,
    pub beta_gen: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |msg: &str| Err(OracleError::InvalidSpec(msg.to_owned()));
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if self.v < 2 {
            return bad("v must be at least 2");
        }
        match self.doc_len {
            DocLength::Fixed(0) => return bad("document length must be at least 1"),
            DocLength::ShiftedPoisson { mean } if !(mean >= 1.0) || !mean.is_finite() => {
                return bad("mean document length must be at least 1")
            }
            _ => {}
        }
        if !(self.alpha_gen > 0.0) || !(self.beta_gen > 0.0) {
            return bad("Dirichlet concentrations must be positive");
        }
        Ok(())
    }
}

/// A generated corpus together with its latent parameters.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// True mixture component of each document.
    pub labels: Vec<usize>,
    pub theta: Vec<f64>,
    /// `phi[k][j]` over generator word indices `j ∈ [0, v)`.
    pub phi: Vec<Vec<f64>>,
    /// Raw records, as written by [`SyntheticCorpus::write_jsonl`].
    pub raw: Vec<RawDoc>,
    /// Generator word index of every vocabulary id.
    pub generator_index: Vec<usize>,
}

/// Alphabetic name of generator word `j`, e.g. `qaab`. Names survive the
/// default tokenizer untouched and never collide with bundled stopwords.
pub fn word_name(j: usize, v: usize) -> String {
    let mut width = 3;
    while 26usize.pow(width as u32) < v {
        width += 1;
    }
    let mut letters = vec![b'a'; width];
    let mut rest = j;
    for slot in letters.iter_mut().rev() {
        *slot = b'a' + (rest % 26) as u8;
        rest /= 26;
    }
    let mut name = String::with_capacity(width + 1);
    name.push('q');
    name.push_str(std::str::from_utf8(&letters).expect("ascii"));
    name
}

fn parse_word_name(name: &str) -> usize {
    name[1..]
        .bytes()
        .fold(0usize, |acc, b| acc * 26 + (b - b'a') as usize)
}

pub fn topic_label(k: usize) -> String {
    format!("topic{k}")
}

fn dirichlet<R: Rng>(rng: &mut R, concentration: f64, dim: usize) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|x| x / total).collect();
        }
    }
}

fn categorical<R: Rng>(rng: &mut R, p: &[f64]) -> usize {
    crate::numeric::sample_index(p, rng.random::<f64>())
}

/// Draws a corpus from the generative process: `θ ~ Dir(α)`, `φ_k ~ Dir(β)`,
/// then per document `z ~ Mult(θ)` and i.i.d. words from `φ_z`.
pub fn generate_corpus(spec: &GenSpec) -> Result<SyntheticCorpus, OracleError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let theta = dirichlet(&mut rng, spec.alpha_gen, spec.k);
    let phi: Vec<Vec<f64>> = (0..spec.k)
        .map(|_| dirichlet(&mut rng, spec.beta_gen, spec.v))
        .collect();
    let poisson = match spec.doc_len {
        DocLength::ShiftedPoisson { mean } if mean > 1.0 => {
            Some(Poisson::new(mean - 1.0).expect("positive rate"))
        }
        _ => None,
    };

    let mut labels = Vec::with_capacity(spec.d);
    let mut raw = Vec::with_capacity(spec.d);
    for i in 0..spec.d {
        let z = categorical(&mut rng, &theta);
        let len = match (spec.doc_len, &poisson) {
            (DocLength::Fixed(n), _) => n,
            (_, Some(p)) => 1 + p.sample(&mut rng) as u32,
            (_, None) => 1,
        };
        let words: Vec<String> = (0..len)
            .map(|_| word_name(categorical(&mut rng, &phi[z]), spec.v))
            .collect();
        labels.push(z);
        raw.push(RawDoc {
            id: format!("doc{i}"),
            text: words.join(" "),
            label: Some(topic_label(z)),
        });
    }

    let rules = TokenRules::permissive();
    let tokenized: Vec<Vec<String>> = raw.iter().map(|r| tokenize(&r.text, &rules)).collect();
    let corpus = assemble(&raw, &tokenized, 1).corpus;
    let generator_index = corpus
        .vocabulary()
        .words()
        .iter()
        .map(|w| parse_word_name(w))
        .collect();
    Ok(SyntheticCorpus {
        corpus,
        labels,
        theta,
        phi,
        raw,
        generator_index,
    })
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    id: &'a str,
    text: &'a str,
    label: Option<&'a str>,
}

impl SyntheticCorpus {
    /// Writes the labelled records in the JSONL input format.
    pub fn write_jsonl(&self, path: &Path) -> io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for r in &self.raw {
            let rec = JsonRecord {
                id: &r.id,
                text: &r.text,
                label: r.label.as_deref(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

fn ln_delta(xs: impl IntoIterator<Item = f64>) -> Result<f64, OracleError> {
    let mut sum_ln = 0.0;
    let mut total = 0.0;
    for x in xs {
        if !(x > 0.0) {
            return Err(OracleError::NonPositiveArgument(x));
        }
        sum_ln += ln_gamma(x);
        total += x;
    }
    Ok(sum_ln - ln_gamma(total))
}

/// Unnormalized conditional of `doc` joining `z` as a ratio of Dirichlet
/// normalizers: `Δ(n⃗_z + c⃗) / Δ(n⃗_{z,¬d} + c⃗) · (m_{z,¬d} + α)`, where
/// `n⃗_z` includes the document. `doc` must be excluded from `state`.
pub fn oracle_delta_ratio(
    doc: &Document,
    z: usize,
    state: &ModelState,
    w: &WeightingScheme,
) -> Result<f64, OracleError> {
    let cluster = state
        .cluster(z)
        .map_err(|e| OracleError::InvalidSpec(e.to_string()))?;
    let v = state.vocab_size();
    let without: Vec<f64> = (0..v as WordId)
        .map(|word| cluster.word_count(word) as f64 + w.pseudo_count(word))
        .collect();
    let mut with = without.clone();
    for &(word, c) in &doc.counts {
        with[word as usize] += c as f64;
    }
    let log_ratio = ln_delta(with)? - ln_delta(without)?;
    Ok(log_ratio.exp() * (cluster.docs() as f64 + state.alpha()))
}

/// Log joint `ln p(d⃗, z⃗)` up to a constant, for every assignment of a small corpus.
#[derive(Debug, Clone)]
pub struct JointEnumeration {
    k: usize,
    d: usize,
    log_joint: Vec<f64>,
}

impl JointEnumeration {
    fn code(&self, assignment: &[usize]) -> usize {
        assignment.iter().rev().fold(0, |acc, &z| acc * self.k + z)
    }

    pub fn log_joint(&self, assignment: &[usize]) -> f64 {
        self.log_joint[self.code(assignment)]
    }

    pub fn num_assignments(&self) -> usize {
        self.log_joint.len()
    }

    /// `ln Σ_z⃗ p(d⃗, z⃗)` over all assignments.
    pub fn log_normalizer(&self) -> f64 {
        let max = self
            .log_joint
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        max + self
            .log_joint
            .iter()
            .map(|&l| (l - max).exp())
            .sum::<f64>()
            .ln()
    }

    /// `p(z_doc = · | z⃗_¬doc, d⃗)` as a ratio of joints; the current value of
    /// `assignment[doc]` is ignored.
    pub fn conditional(&self, doc: usize, assignment: &[usize]) -> Vec<f64> {
        assert_eq!(assignment.len(), self.d);
        let mut a = assignment.to_vec();
        let logs: Vec<f64> = (0..self.k)
            .map(|z| {
                a[doc] = z;
                self.log_joint(&a)
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|x| x / total).collect()
    }
}

/// Enumerates the collapsed joint
/// `[Δ(m⃗ + α) / Δ(α)] · Π_z [Δ(n⃗_z + c⃗) / Δ(c⃗)]` over all `k^D` assignments.
pub fn oracle_enumerate_joint(
    corpus: &Corpus,
    k: usize,
    alpha: f64,
    w: &WeightingScheme,
) -> Result<JointEnumeration, OracleError> {
    let d = corpus.len();
    let needed = (k as f64).powi(d as i32);
    if needed > MAX_ENUMERATION as f64 {
        return Err(OracleError::InstanceTooLarge {
            needed,
            limit: MAX_ENUMERATION,
        });
    }
    let v = corpus.vocab_size();
    let pseudo: Vec<f64> = (0..v as WordId).map(|word| w.pseudo_count(word)).collect();
    let ln_delta_prior = ln_delta(pseudo.iter().copied())?;
    let ln_delta_alpha = ln_delta(std::iter::repeat_n(alpha, k))?;

    let total = needed as usize;
    let mut log_joint = Vec::with_capacity(total);
    let mut assignment = vec![0usize; d];
    for code in 0..total {
        let mut rest = code;
        for z in assignment.iter_mut() {
            *z = rest % k;
            rest /= k;
        }
        let mut m = vec![0.0f64; k];
        let mut n = vec![pseudo.clone(); k];
        for (doc, &z) in corpus.documents().iter().zip(&assignment) {
            m[z] += 1.0;
            for &(word, c) in &doc.counts {
                n[z][word as usize] += c as f64;
            }
        }
        let mut lj = ln_delta(m.iter().map(|&x| x + alpha))? - ln_delta_alpha;
        for counts in &n {
            lj += ln_delta(counts.iter().copied())? - ln_delta_prior;
        }
        log_joint.push(lj);
    }
    Ok(JointEnumeration { k, d, log_joint })
}

/// Best matched fraction over every one-to-one cluster → class map,
/// by exhaustive search over permutations of the padded label set.
pub fn oracle_assignment_bruteforce(pair: &LabeledPartitionPair) -> Result<f64, OracleError> {
    let n = pair.k_pred().max(pair.k_gold());
    if n > MAX_BRUTEFORCE_CLUSTERS {
        return Err(OracleError::TooManyClusters {
            got: n,
            limit: MAX_BRUTEFORCE_CLUSTERS,
        });
    }
    let mut table = vec![vec![0u64; n]; n];
    for (&p, &g) in pair.pred().iter().zip(pair.gold()) {
        table[p][g] += 1;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = 0;
    permute(&mut perm, 0, &mut |p| {
        let matched: u64 = p.iter().enumerate().map(|(r, &c)| table[r][c]).sum();
        best = best.max(matched);
    });
    Ok(best as f64 / pair.len() as f64)
}

fn permute(items: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, RawDoc, TokenRules};
    use crate::model::{conditional_distribution, EntropyTable};

    fn spec(k: usize, d: usize) -> GenSpec {
        GenSpec {
            k,
            v: 50,
            d,
            doc_len: DocLength::Fixed(6),
            alpha_gen: 1.0,
            beta_gen: 0.1,
            seed: 7,
        }
    }

    #[test]
    fn word_names_roundtrip() {
        assert_eq!(word_name(0, 10), "qaaa");
        assert_eq!(word_name(27, 2000), "qabb");
        assert_eq!(word_name(17575, 17576), "qzzz");
        assert_eq!(word_name(0, 17577).len(), 5);
        for j in [0, 1, 25, 26, 675, 1999] {
            assert_eq!(parse_word_name(&word_name(j, 2000)), j);
        }
    }

    #[test]
    fn single_topic_labels() {
        let s = generate_corpus(&spec(1, 20)).unwrap();
        assert!(s.labels.iter().all(|&l| l == 0));
        assert_eq!(s.corpus.len(), 20);
    }

    #[test]
    fn empty_corpus() {
        let s = generate_corpus(&spec(3, 0)).unwrap();
        assert!(s.corpus.is_empty());
        assert!(s.labels.is_empty());
    }

    #[test]
    fn reproducible() {
        let a = generate_corpus(&spec(3, 30)).unwrap();
        let b = generate_corpus(&spec(3, 30)).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.phi, b.phi);
        let mut other = spec(3, 30);
        other.seed = 8;
        assert_ne!(generate_corpus(&other).unwrap().theta, a.theta);
    }

    #[test]
    fn shifted_poisson_lengths() {
        let mut sp = spec(2, 4000);
        sp.doc_len = DocLength::ShiftedPoisson { mean: 6.0 };
        let s = generate_corpus(&sp).unwrap();
        assert!(s.corpus.documents().iter().all(|d| d.total_len >= 1));
        let mean = s.corpus.stats().mean_len;
        assert!((mean - 6.0).abs() < 0.15, "mean {mean}");
    }

    #[test]
    fn invalid_specs() {
        let mut sp = spec(0, 1);
        assert!(generate_corpus(&sp).is_err());
        sp = spec(1, 1);
        sp.v = 1;
        assert!(generate_corpus(&sp).is_err());
        sp = spec(1, 1);
        sp.doc_len = DocLength::Fixed(0);
        assert!(generate_corpus(&sp).is_err());
        sp = spec(1, 1);
        sp.beta_gen = 0.0;
        assert!(generate_corpus(&sp).is_err());
    }

    #[test]
    fn delta_ratio_empty_doc() {
        let c = build_corpus(&[RawDoc::new("a", "x y", None)], &TokenRules::permissive())
            .unwrap()
            .corpus;
        let state = ModelState::from_assignments(&c, &[0], 2, 0.1).unwrap();
        let empty = Document::from_counts("e", vec![], None);
        let w = WeightingScheme::UniformBeta(0.1);
        assert_eq!(oracle_delta_ratio(&empty, 0, &state, &w).unwrap(), 1.1);
        assert_eq!(oracle_delta_ratio(&empty, 1, &state, &w).unwrap(), 0.1);
    }

    #[test]
    fn delta_ratio_single_word() {
        // Word counts (3,4,2,1,0) in the cluster, n_z = 10, V = 5, β = 0.1,
        // m = 2, α = 0.1: (3.1 / 10.5) · 2.1 = 0.62.
        let raw = vec![
            RawDoc::new("a", "a a a b b b b", None),
            RawDoc::new("b", "c c d e", None),
        ];
        let c = build_corpus(&raw, &TokenRules::permissive())
            .unwrap()
            .corpus;
        let mut state = ModelState::from_assignments(&c, &[0, 0], 1, 0.1).unwrap();
        // Drop word e from the cluster by removing doc b and re-adding a copy without e.
        state.remove_doc(1, &c.documents()[1]);
        let partial = Document::from_counts("b", vec![(2, 2), (3, 1)], None);
        state.add_doc(1, &partial, 0);
        let probe = Document::from_counts("p", vec![(0, 1)], None);
        let w = WeightingScheme::UniformBeta(0.1);
        let got = oracle_delta_ratio(&probe, 0, &state, &w).unwrap();
        assert!((got - 0.62).abs() < 1e-13, "{got}");
    }

    #[test]
    fn delta_ratio_rejects_zero_pseudo_count() {
        let c = build_corpus(&[RawDoc::new("a", "x y", None)], &TokenRules::permissive())
            .unwrap()
            .corpus;
        let state = ModelState::from_assignments(&c, &[0], 2, 0.1).unwrap();
        let w = WeightingScheme::Entropy(EntropyTable::from_values(vec![0.0, 0.5], 1e-9, true));
        let probe = Document::from_counts("p", vec![(1, 1)], None);
        assert!(matches!(
            oracle_delta_ratio(&probe, 1, &state, &w),
            Err(OracleError::NonPositiveArgument(_))
        ));
    }

    #[test]
    fn enumeration_single_doc_is_symmetric() {
        let c = build_corpus(&[RawDoc::new("a", "x y", None)], &TokenRules::permissive())
            .unwrap()
            .corpus;
        let e = oracle_enumerate_joint(&c, 2, 0.1, &WeightingScheme::UniformBeta(0.1)).unwrap();
        let p = e.conditional(0, &[0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        assert!(e.log_normalizer().is_finite());
    }

    #[test]
    fn enumeration_matches_conditional_on_small_fixture() {
        let raw = vec![
            RawDoc::new("a", "x x y", None),
            RawDoc::new("b", "y z", None),
            RawDoc::new("c", "z z x", None),
            RawDoc::new("d", "x", None),
        ];
        let c = build_corpus(&raw, &TokenRules::permissive())
            .unwrap()
            .corpus;
        let w = WeightingScheme::UniformBeta(0.3);
        let e = oracle_enumerate_joint(&c, 2, 0.2, &w).unwrap();
        assert_eq!(e.num_assignments(), 16);
        let assignment = [0, 1, 1, 0];
        let mut state = ModelState::from_assignments(&c, &assignment, 2, 0.2).unwrap();
        state.remove_doc(2, &c.documents()[2]);
        let model = conditional_distribution(&c.documents()[2], &state, &w).unwrap();
        let oracle = e.conditional(2, &assignment);
        for (a, b) in model.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * b, "{model:?} vs {oracle:?}");
        }
    }

    #[test]
    fn enumeration_size_limit() {
        let s = generate_corpus(&spec(2, 25)).unwrap();
        assert!(matches!(
            oracle_enumerate_joint(&s.corpus, 2, 0.1, &WeightingScheme::UniformBeta(0.1)),
            Err(OracleError::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn bruteforce_basics() {
        let p = LabeledPartitionPair::from_labels(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(oracle_assignment_bruteforce(&p).unwrap(), 1.0);
        let p = LabeledPartitionPair::from_labels(&[0; 6], &[0, 0, 1, 1, 2, 2]).unwrap();
        assert!((oracle_assignment_bruteforce(&p).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let many: Vec<usize> = (0..7).collect();
        let p = LabeledPartitionPair::from_labels(&many, &many).unwrap();
        assert!(matches!(
            oracle_assignment_bruteforce(&p),
            Err(OracleError::TooManyClusters { got: 7, .. })
        ));
    }
}
