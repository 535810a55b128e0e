use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsdmm::archive::{read_archive, read_assignments};
use gsdmm::eval::{evaluate, LabeledPartitionPair};

fn gsdmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsdmm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gsdmm(args);
    assert!(
        out.status.success(),
        "gsdmm {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    gsdmm(args).status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// synth → preprocess; returns (dataset file, archive dir).
fn prepared(dir: &Path, seed: &str) -> (PathBuf, PathBuf) {
    let data = dir.join("data.jsonl");
    let archive = dir.join("archive");
    ok(&[
        "synth",
        "--k",
        "3",
        "--v",
        "300",
        "--d",
        "150",
        "--mean-len",
        "7",
        "--seed",
        seed,
        "--output",
        s(&data),
    ]);
    ok(&["preprocess", "--input", s(&data), "--output", s(&archive)]);
    (data, archive)
}

fn cluster(archive: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![
        "cluster",
        "--corpus",
        s(archive),
        "--output",
        s(out),
        "--kmax",
        "15",
        "--seed",
        "1",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn pipeline_report_matches_library_eval() {
    let dir = tempfile::tempdir().unwrap();
    let (data, archive) = prepared(dir.path(), "5");
    for (name, extra) in [
        ("g", &[][..]),
        ("p", &["--algorithm", "gsdmm+", "--kreal", "3"][..]),
    ] {
        let model = dir.path().join(name);
        cluster(&archive, &model, extra);
        let assignments = model.join("assignments.csv");
        let report_path = dir.path().join(format!("{name}.json"));
        ok(&[
            "eval",
            "--assignments",
            s(&assignments),
            "--gold",
            s(&data),
            "--output",
            s(&report_path),
        ]);

        let corpus = read_archive(&archive).unwrap();
        let rows = read_assignments(&assignments).unwrap();
        let pred: Vec<usize> = rows.iter().map(|(_, z)| *z).collect();
        let gold = corpus.gold_labels().unwrap();
        let expected = evaluate(&LabeledPartitionPair::from_labels(&pred, &gold).unwrap());

        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
        assert_eq!(report["acc"].as_f64().unwrap(), expected.acc);
        assert_eq!(report["nmi"].as_f64().unwrap(), expected.nmi);
        assert!(expected.nmi > 0.7, "{name}: NMI {}", expected.nmi);

        // Gold taken from the archive agrees with gold taken from the dataset.
        let from_archive = ok(&[
            "eval",
            "--assignments",
            s(&assignments),
            "--gold",
            s(&archive),
        ]);
        let v: serde_json::Value = serde_json::from_str(&from_archive).unwrap();
        assert_eq!(v, report);
    }
    assert!(dir.path().join("p/merge_log.csv").exists());
    assert!(!dir.path().join("g/merge_log.csv").exists());
}

#[test]
fn fixed_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (data, archive) = prepared(dir.path(), "9");
    let data2 = dir.path().join("again.jsonl");
    ok(&[
        "synth",
        "--k",
        "3",
        "--v",
        "300",
        "--d",
        "150",
        "--mean-len",
        "7",
        "--seed",
        "9",
        "--output",
        s(&data2),
    ]);
    assert_eq!(fs::read(&data).unwrap(), fs::read(&data2).unwrap());

    let archive2 = dir.path().join("archive2");
    ok(&["preprocess", "--input", s(&data), "--output", s(&archive2)]);
    for entry in fs::read_dir(&archive).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(archive.join(&name)).unwrap(),
            fs::read(archive2.join(&name)).unwrap(),
            "{name:?} differs"
        );
    }

    for extra in [
        &[][..],
        &["--algorithm", "gsdmm+", "--kreal", "3", "--trace"][..],
    ] {
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        cluster(&archive, &a, extra);
        cluster(&archive, &b, extra);
        for file in ["assignments.csv", "trace.csv", "merge_log.csv"] {
            if a.join(file).exists() {
                assert_eq!(
                    fs::read(a.join(file)).unwrap(),
                    fs::read(b.join(file)).unwrap(),
                    "{file}"
                );
            }
        }
    }
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let (_, archive) = prepared(dir.path(), "3");
    let model = dir.path().join("model");
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "corpus = {:?}\noutput = {:?}\nalgorithm = \"gsdmm+\"\nkmax = 12\nkreal = 3\niters = 5\nseed = 4\n",
            s(&archive),
            s(&model)
        ),
    )
    .unwrap();
    ok(&["--config", s(&config), "cluster", "--iters", "7"]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(model.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["algorithm"], "gsdmm+");
    assert_eq!(summary["k_max"], 12);
    assert_eq!(summary["iterations"], 7);
    assert_eq!(summary["seed"], 4);
    assert_eq!(summary["beta"], 0.01);

    fs::write(&config, "kmax = 12\nbogus = 1\n").unwrap();
    assert_eq!(
        code(&[
            "--config",
            s(&config),
            "cluster",
            "--corpus",
            s(&archive),
            "--output",
            s(&model)
        ]),
        3
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (data, archive) = prepared(dir.path(), "11");
    let model = dir.path().join("model");

    // Input errors.
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    assert_eq!(
        code(&[
            "preprocess",
            "--input",
            s(&empty),
            "--output",
            s(&dir.path().join("x"))
        ]),
        2
    );
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{not json\n").unwrap();
    assert_eq!(
        code(&[
            "preprocess",
            "--input",
            s(&bad),
            "--output",
            s(&dir.path().join("y"))
        ]),
        2
    );
    assert_eq!(
        code(&[
            "synth",
            "--k",
            "0",
            "--v",
            "10",
            "--d",
            "5",
            "--doc-len",
            "3",
            "--output",
            s(&empty)
        ]),
        2
    );

    // Configuration errors.
    let c = |extra: &[&str]| {
        let mut args = vec!["cluster", "--corpus", s(&archive), "--output", s(&model)];
        args.extend_from_slice(extra);
        code(&args)
    };
    assert_eq!(c(&["--alpha=-1"]), 3);
    assert_eq!(c(&["--kmax", "0"]), 3);
    assert_eq!(
        c(&["--algorithm", "gsdmm+", "--kmax", "10", "--kreal", "11"]),
        3
    );
    assert_eq!(
        c(&["--algorithm", "gsdmm+", "--kmax", "1000", "--kreal", "3"]),
        3
    );
    assert_eq!(code(&["cluster", "--output", s(&model)]), 3);

    // Unmatched gold.
    cluster(&archive, &model, &[]);
    let partial = dir.path().join("partial.jsonl");
    let text = fs::read_to_string(&data).unwrap();
    let kept: Vec<&str> = text.lines().skip(1).collect();
    fs::write(&partial, kept.join("\n") + "\n").unwrap();
    let out = gsdmm(&[
        "eval",
        "--assignments",
        s(&model.join("assignments.csv")),
        "--gold",
        s(&partial),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let first_id: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let id = first_id["id"].as_str().unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains(id));

    // Missing artifacts.
    let lonely = dir.path().join("lonely");
    fs::create_dir_all(&lonely).unwrap();
    assert_eq!(code(&["topwords", "--model", s(&lonely)]), 5);
    fs::copy(model.join("summary.json"), lonely.join("summary.json")).unwrap();
    assert_eq!(code(&["topwords", "--model", s(&lonely)]), 5);
}

#[test]
fn topwords_rows_per_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let (_, archive) = prepared(dir.path(), "2");
    let model = dir.path().join("model");
    cluster(&archive, &model, &["--algorithm", "gsdmm+", "--kreal", "3"]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(model.join("summary.json")).unwrap()).unwrap();
    let k = summary["k_final"].as_u64().unwrap() as usize;

    for (flag, n) in [(Some("1"), 1), (None, 10)] {
        let mut args = vec!["topwords", "--model", s(&model)];
        if let Some(f) = flag {
            args.extend(["-n", f]);
        }
        let tsv = ok(&args);
        let mut lines = tsv.lines();
        assert_eq!(lines.next(), Some("cluster\trank\tword\tphi"));
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
        assert_eq!(rows.len(), k * n);
        for row in &rows {
            assert_eq!(row.len(), 4);
            let phi: f64 = row[3].parse().unwrap();
            assert!(phi > 0.0 && phi < 1.0);
        }
    }
}

#[test]
fn single_component_synth() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("one.jsonl");
    ok(&[
        "synth",
        "--k",
        "1",
        "--v",
        "20",
        "--d",
        "5",
        "--doc-len",
        "4",
        "--output",
        s(&data),
    ]);
    let records: Vec<serde_json::Value> = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 5);
    assert!(records.iter().all(|r| r["label"] == records[0]["label"]));
}
