use gsdmm::archive::{read_archive, read_assignments, write_archive, write_assignments};
use gsdmm::corpus::{build_corpus, read_dataset, DatasetFormat, TokenRules};
use gsdmm::eval::{evaluate, LabeledPartitionPair};
use gsdmm::sampler::{run, RunConfig};
use gsdmm::synth::{generate_corpus, DocLength, GenSpec};

fn small_spec() -> GenSpec {
    GenSpec {
        k: 3,
        v: 300,
        d: 150,
        doc_len: DocLength::ShiftedPoisson { mean: 7.0 },
        alpha_gen: 1.0,
        beta_gen: 0.01,
        seed: 77,
    }
}

#[test]
fn synthetic_jsonl_survives_the_default_tokenizer() {
    let syn = generate_corpus(&small_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synth.jsonl");
    syn.write_jsonl(&path).unwrap();

    let raw = read_dataset(&path, DatasetFormat::Jsonl).unwrap();
    assert_eq!(raw.len(), 150);
    let rules = TokenRules {
        min_df: 1,
        ..TokenRules::default()
    };
    let built = build_corpus(&raw, &rules).unwrap();
    assert!(built.dropped.is_empty());
    assert_eq!(built.corpus.documents(), syn.corpus.documents());
    assert_eq!(
        built.corpus.vocabulary().words(),
        syn.corpus.vocabulary().words()
    );
}

#[test]
fn preprocess_cluster_evaluate() {
    let syn = generate_corpus(&small_spec()).unwrap();
    let built = build_corpus(&syn.raw, &TokenRules::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_archive(dir.path(), &built.corpus, &built.dropped).unwrap();
    let corpus = read_archive(dir.path()).unwrap();
    assert_eq!(corpus, built.corpus);

    for cfg in [
        RunConfig {
            k_max: 15,
            seed: 1,
            ..RunConfig::gsdmm()
        },
        RunConfig {
            k_max: 15,
            k_real: Some(3),
            seed: 1,
            ..RunConfig::gsdmm_plus()
        },
    ] {
        let out = run(&corpus, &cfg).unwrap();
        let path = dir.path().join("assignments.csv");
        write_assignments(
            std::fs::File::create(&path).unwrap(),
            &corpus,
            &out.assignments,
        )
        .unwrap();
        let rows = read_assignments(&path).unwrap();
        assert_eq!(rows.len(), corpus.len());

        let gold = corpus.gold_labels().unwrap();
        let pred: Vec<usize> = rows.iter().map(|(_, z)| *z).collect();
        let report = evaluate(&LabeledPartitionPair::from_labels(&pred, &gold).unwrap());
        assert!(report.nmi > 0.7, "{:?}: NMI {}", cfg.algorithm, report.nmi);
        assert!(report.acc > 0.7, "{:?}: ACC {}", cfg.algorithm, report.acc);
    }
}
