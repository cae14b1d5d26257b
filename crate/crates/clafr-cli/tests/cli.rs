//! End-to-end checks of the `clafr` binary: flag surface, exit codes,
//! artifact layout, and numeric agreement with the library.

use std::ffi::OsStr;
use std::path::Path;
use std::process::{Command, Output};

use clafr_core::baselines::{knn_batch, FeatureBank};
use clafr_core::io::{read_matrix, read_vector, write_tensor, Dtype, Tensor};
use clafr_core::synth::{ABLATION_CSV_HEADER, BENCH_CSV_HEADER};
use clafr_core::{Matrix, Vector};
use tempfile::TempDir;

fn clafr<I, S>(dir: &Path, args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_clafr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_matrix_file(path: &Path, rows: &[&[f64]]) {
    let m = Matrix::from_rows(rows).unwrap();
    write_tensor(path, &Tensor::Matrix(m), Dtype::F64).unwrap();
}

fn write_vector_file(path: &Path, values: &[f64]) {
    let v = Vector::from_slice(values).unwrap();
    write_tensor(path, &Tensor::Vector(v), Dtype::F64).unwrap();
}

fn data_lines(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Small-but-nontrivial synthetic dataset most tests share.
fn gen_dataset(dir: &Path) {
    let out = clafr(
        dir,
        [
            "gen-synth",
            "--seed",
            "7",
            "--dim",
            "16",
            "--classes",
            "4",
            "--n-train",
            "80",
            "--n-id-test",
            "60",
            "--n-ood-test",
            "60",
            "--out-dir",
            "ds",
        ],
    );
    assert_ok(&out);
}

#[test]
fn help_exits_zero_everywhere() {
    let tmp = TempDir::new().unwrap();
    let subs = ["decompose", "score", "eval", "ablate", "bench", "gen-synth"];
    let root = clafr(tmp.path(), ["--help"]);
    assert_ok(&root);
    assert!(stdout(&root).contains("decompose"));
    for sub in subs {
        let out = clafr(tmp.path(), [sub, "--help"]);
        assert_ok(&out);
        assert!(stdout(&out).contains("--out"), "{sub} help names --out");
    }
}

#[test]
fn gen_synth_same_seed_writes_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    for dir in ["a", "b"] {
        let out = clafr(
            tmp.path(),
            [
                "gen-synth", "--seed", "11", "--dim", "12", "--classes", "3",
                "--n-train", "30", "--n-id-test", "20", "--n-ood-test", "20",
                "--out-dir", dir,
            ],
        );
        assert_ok(&out);
    }
    let names = [
        "weights.ctf",
        "train_features.ctf",
        "train_labels.ctf",
        "id_features.ctf",
        "ood_features.ctf",
        "manifest.txt",
    ];
    for name in names {
        let a = std::fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical-seed runs");
    }

    let out = clafr(
        tmp.path(),
        [
            "gen-synth", "--seed", "12", "--dim", "12", "--classes", "3",
            "--n-train", "30", "--n-id-test", "20", "--n-ood-test", "20",
            "--out-dir", "c",
        ],
    );
    assert_ok(&out);
    let a = std::fs::read(tmp.path().join("a/id_features.ctf")).unwrap();
    let c = std::fs::read(tmp.path().join("c/id_features.ctf")).unwrap();
    assert_ne!(a, c, "different seeds should draw different features");
}

#[test]
fn gen_synth_skips_ood_artifacts_when_no_ood_rows_requested() {
    let tmp = TempDir::new().unwrap();
    let out = clafr(
        tmp.path(),
        [
            "gen-synth", "--seed", "5", "--dim", "8", "--classes", "2",
            "--n-train", "12", "--n-id-test", "6", "--n-ood-test", "0",
            "--out-dir", "ds",
        ],
    );
    assert_ok(&out);
    let ds = tmp.path().join("ds");
    for present in ["weights.ctf", "train_features.ctf", "train_labels.ctf", "id_features.ctf"] {
        assert!(ds.join(present).exists(), "{present} missing");
    }
    for absent in ["ood_features.ctf", "manifest.txt"] {
        assert!(!ds.join(absent).exists(), "{absent} should not exist");
    }
}

#[test]
fn decompose_records_selected_rank_in_sidecar() {
    let tmp = TempDir::new().unwrap();
    write_matrix_file(
        &tmp.path().join("w.ctf"),
        &[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]],
    );
    let out = clafr(
        tmp.path(),
        ["decompose", "--weights", "w.ctf", "--alpha", "0.9", "--out", "sub.ctf"],
    );
    assert_ok(&out);
    let meta = std::fs::read_to_string(tmp.path().join("sub.ctf.meta")).unwrap();
    assert!(meta.contains("m = 2"), "sidecar: {meta}");
    assert!(meta.contains("alpha = 0.9"));
    assert!(meta.contains("weights = sha256:"));
    let u_m = read_matrix(&tmp.path().join("sub.ctf")).unwrap();
    assert_eq!((u_m.rows(), u_m.cols()), (3, 2));
}

#[test]
fn decompose_m_override_wins_over_alpha() {
    let tmp = TempDir::new().unwrap();
    write_matrix_file(
        &tmp.path().join("w.ctf"),
        &[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]],
    );
    let out = clafr(
        tmp.path(),
        ["decompose", "--weights", "w.ctf", "--m", "1", "--out", "sub.ctf"],
    );
    assert_ok(&out);
    let u_m = read_matrix(&tmp.path().join("sub.ctf")).unwrap();
    assert_eq!(u_m.cols(), 1);
    let meta = std::fs::read_to_string(tmp.path().join("sub.ctf.meta")).unwrap();
    assert!(meta.contains("m = 1"));
}

#[test]
fn decompose_missing_input_exits_2_without_output() {
    let tmp = TempDir::new().unwrap();
    let out = clafr(
        tmp.path(),
        ["decompose", "--weights", "absent.ctf", "--out", "sub.ctf"],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("absent.ctf"));
    assert!(!tmp.path().join("sub.ctf").exists());
    assert!(!tmp.path().join("sub.ctf.meta").exists());
}

#[test]
fn score_reports_exact_projection_norms_without_normalization() {
    let tmp = TempDir::new().unwrap();
    write_matrix_file(
        &tmp.path().join("w.ctf"),
        &[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]],
    );
    write_matrix_file(
        &tmp.path().join("z.ctf"),
        &[&[3.0, 4.0, 0.0], &[0.0, 0.0, 2.0]],
    );
    assert_ok(&clafr(
        tmp.path(),
        ["decompose", "--weights", "w.ctf", "--out", "sub.ctf"],
    ));
    let out = clafr(
        tmp.path(),
        [
            "score", "--features", "z.ctf", "--subspace", "sub.ctf",
            "--no-normalize", "--out", "s.ctf",
        ],
    );
    assert_ok(&out);
    let scores = read_vector(&tmp.path().join("s.ctf")).unwrap();
    // The basis is exactly {e1, e2}: [3,4,0] projects to norm 5, [0,0,2]
    // to norm 0. No rounding anywhere on this path.
    assert_eq!(scores.data(), &[5.0, 0.0]);
}

#[test]
fn score_via_weights_matches_score_via_subspace_bitwise() {
    let tmp = TempDir::new().unwrap();
    gen_dataset(tmp.path());
    assert_ok(&clafr(
        tmp.path(),
        ["decompose", "--weights", "ds/weights.ctf", "--alpha", "0.9", "--out", "sub.ctf"],
    ));
    assert_ok(&clafr(
        tmp.path(),
        ["score", "--features", "ds/id_features.ctf", "--subspace", "sub.ctf", "--out", "a.ctf"],
    ));
    assert_ok(&clafr(
        tmp.path(),
        [
            "score", "--features", "ds/id_features.ctf", "--weights", "ds/weights.ctf",
            "--alpha", "0.9", "--out", "b.ctf",
        ],
    ));
    let a = std::fs::read(tmp.path().join("a.ctf")).unwrap();
    let b = std::fs::read(tmp.path().join("b.ctf")).unwrap();
    assert_eq!(a, b, "score tensors differ between the two clafr paths");
    let am = std::fs::read(tmp.path().join("a.ctf.meta")).unwrap();
    let bm = std::fs::read(tmp.path().join("b.ctf.meta")).unwrap();
    assert_eq!(am, bm, "fingerprint sidecars differ");
}

#[test]
fn score_reads_logit_rows_when_no_weights_given() {
    let tmp = TempDir::new().unwrap();
    write_matrix_file(&tmp.path().join("logits.ctf"), &[&[0.0, 0.0]]);
    for (method, want) in [("energy", 2.0f64.ln()), ("msp", 0.5), ("maxlogit", 0.0)] {
        let out = clafr(
            tmp.path(),
            ["score", "--features", "logits.ctf", "--method", method, "--out", "s.ctf"],
        );
        assert_ok(&out);
        let scores = read_vector(&tmp.path().join("s.ctf")).unwrap();
        assert_eq!(scores.data(), &[want], "{method} on symmetric logits");
    }
}

#[test]
fn score_knn_matches_library_scoring() {
    let tmp = TempDir::new().unwrap();
    gen_dataset(tmp.path());
    let out = clafr(
        tmp.path(),
        [
            "score", "--features", "ds/id_features.ctf", "--method", "knn",
            "--bank", "ds/train_features.ctf", "--k", "3", "--out", "s.ctf",
        ],
    );
    assert_ok(&out);
    let got = read_vector(&tmp.path().join("s.ctf")).unwrap();

    let bank = FeatureBank::new(
        read_matrix(&tmp.path().join("ds/train_features.ctf")).unwrap(),
        "train_features",
    )
    .unwrap();
    let feats = read_matrix(&tmp.path().join("ds/id_features.ctf")).unwrap();
    let want = knn_batch(&feats, &bank, 3).unwrap();
    assert_eq!(got.data(), want.scores.data());

    let meta = std::fs::read_to_string(tmp.path().join("s.ctf.meta")).unwrap();
    assert!(meta.contains("method = knn"));
    assert!(meta.contains("k = 3"));
}

#[test]
fn score_knn_without_bank_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    write_matrix_file(&tmp.path().join("z.ctf"), &[&[1.0, 0.0]]);
    let out = clafr(
        tmp.path(),
        ["score", "--features", "z.ctf", "--method", "knn", "--out", "s.ctf"],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--bank"));
    assert!(!tmp.path().join("s.ctf").exists());
}

#[test]
fn score_rejects_contradictory_flag_combinations() {
    let tmp = TempDir::new().unwrap();
    write_matrix_file(&tmp.path().join("z.ctf"), &[&[1.0, 0.0]]);
    let cases: &[&[&str]] = &[
        &["score", "--features", "z.ctf", "--out", "s.ctf"],
        &["score", "--features", "z.ctf", "--method", "msp", "--no-normalize", "--out", "s.ctf"],
        &["score", "--features", "z.ctf", "--method", "energy", "--k", "5", "--out", "s.ctf"],
        &["score", "--features", "z.ctf", "--method", "nope", "--out", "s.ctf"],
    ];
    for args in cases {
        let out = clafr(tmp.path(), args.iter().copied());
        assert_eq!(code(&out), 2, "args {args:?} should be a usage error");
        assert!(!tmp.path().join("s.ctf").exists());
    }
}

#[test]
fn eval_perfect_separation_reports_100_auroc_0_fpr() {
    let tmp = TempDir::new().unwrap();
    write_vector_file(&tmp.path().join("id.ctf"), &[2.0, 3.0, 4.0, 5.0]);
    write_vector_file(&tmp.path().join("far.ctf"), &[0.0, 0.1, 0.2]);
    let out = clafr(
        tmp.path(),
        ["eval", "--id-scores", "id.ctf", "--ood-scores", "far.ctf", "--out", "r.csv"],
    );
    assert_ok(&out);
    let csv = std::fs::read_to_string(tmp.path().join("r.csv")).unwrap();
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "unknown");
    assert_eq!(rows[0][1], "far");
    assert_eq!(rows[0][2], "100.00");
    assert_eq!(rows[0][3], "0.00");
    assert!(stdout(&out).contains("100.00"));
}

#[test]
fn eval_identical_scores_report_50_auroc() {
    let tmp = TempDir::new().unwrap();
    let values = [0.4, 0.5, 0.6, 0.7, 0.8];
    write_vector_file(&tmp.path().join("id.ctf"), &values);
    write_vector_file(&tmp.path().join("same.ctf"), &values);
    let out = clafr(
        tmp.path(),
        ["eval", "--id-scores", "id.ctf", "--ood-scores", "same.ctf", "--out", "r.csv"],
    );
    assert_ok(&out);
    let csv = std::fs::read_to_string(tmp.path().join("r.csv")).unwrap();
    assert_eq!(data_lines(&csv)[0][2], "50.00");
}

#[test]
fn eval_refuses_mismatched_fingerprints_with_exit_4() {
    let tmp = TempDir::new().unwrap();
    gen_dataset(tmp.path());
    assert_ok(&clafr(
        tmp.path(),
        [
            "score", "--features", "ds/id_features.ctf", "--weights", "ds/weights.ctf",
            "--out", "clafr.ctf",
        ],
    ));
    assert_ok(&clafr(
        tmp.path(),
        [
            "score", "--features", "ds/ood_features.ctf", "--weights", "ds/weights.ctf",
            "--method", "energy", "--out", "energy.ctf",
        ],
    ));
    let out = clafr(
        tmp.path(),
        ["eval", "--id-scores", "clafr.ctf", "--ood-scores", "energy.ctf", "--out", "r.csv"],
    );
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("fingerprint"));
    assert!(!tmp.path().join("r.csv").exists());
}

#[test]
fn eval_three_ood_sets_append_an_average_row() {
    let tmp = TempDir::new().unwrap();
    write_vector_file(&tmp.path().join("id.ctf"), &[2.0, 3.0, 4.0]);
    write_vector_file(&tmp.path().join("near.ctf"), &[1.9, 2.5, 3.1]);
    write_vector_file(&tmp.path().join("mid.ctf"), &[1.0, 1.5, 2.1]);
    write_vector_file(&tmp.path().join("far.ctf"), &[0.0, 0.1, 0.2]);
    let out = clafr(
        tmp.path(),
        [
            "eval", "--id-scores", "id.ctf",
            "--ood-scores", "near.ctf", "mid.ctf", "far.ctf",
            "--out", "r.csv",
        ],
    );
    assert_ok(&out);
    let csv = std::fs::read_to_string(tmp.path().join("r.csv")).unwrap();
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 4, "three sets plus the average:\n{csv}");
    let names: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(names, ["near", "mid", "far", "average"]);
    assert!(stdout(&out).contains("average"));
}

#[test]
fn ablate_writes_a_monotone_sweep_deterministically() {
    let tmp = TempDir::new().unwrap();
    let args = [
        "ablate", "--alphas", "0.8,0.85,0.9,0.95", "--seed", "7",
        "--dim", "16", "--classes", "4", "--n-train", "60",
        "--n-id-test", "40", "--n-ood-test", "40", "--out", "abl.csv",
    ];
    assert_ok(&clafr(tmp.path(), args));
    let first = std::fs::read_to_string(tmp.path().join("abl.csv")).unwrap();
    assert_eq!(first.lines().next().unwrap(), ABLATION_CSV_HEADER);
    let rows = data_lines(&first);
    assert_eq!(rows.len(), 4);
    let ms: Vec<usize> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(ms.windows(2).all(|w| w[0] <= w[1]), "m not monotone: {ms:?}");

    assert_ok(&clafr(tmp.path(), args));
    let second = std::fs::read_to_string(tmp.path().join("abl.csv")).unwrap();
    assert_eq!(first, second, "ablation rerun should be byte-identical");
}

#[test]
fn ablate_rejects_unsorted_alphas() {
    let tmp = TempDir::new().unwrap();
    let out = clafr(
        tmp.path(),
        ["ablate", "--alphas", "0.9,0.8", "--out", "abl.csv"],
    );
    assert_eq!(code(&out), 2);
    assert!(!tmp.path().join("abl.csv").exists());
}

#[test]
fn bench_synth_sweeps_training_sizes_with_timings() {
    let tmp = TempDir::new().unwrap();
    let out = clafr(
        tmp.path(),
        [
            "bench", "--seed", "7", "--dim", "16", "--classes", "4",
            "--n-id-test", "40", "--n-ood-test", "40",
            "--ntr", "100,300", "--methods", "clafr,knn", "--reps", "3",
            "--out", "bench.csv",
        ],
    );
    assert_ok(&out);
    let csv = std::fs::read_to_string(tmp.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), BENCH_CSV_HEADER);
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert!(["100", "300"].contains(&row[0].as_str()));
        let ns: f64 = row[10].parse().expect("timing column filled");
        assert!(ns > 0.0);
        match row[3].as_str() {
            "clafr" => {
                assert_eq!(row[1], "0.9");
                assert!(!row[2].is_empty(), "clafr rows carry m");
            }
            "knn" => {
                assert!(row[1].is_empty() && row[2].is_empty(), "knn rows have no alpha/m");
            }
            other => panic!("unexpected method {other}"),
        }
    }
}

#[test]
fn bench_manifest_mode_matches_the_score_eval_path() {
    let tmp = TempDir::new().unwrap();
    gen_dataset(tmp.path());
    let out = clafr(
        tmp.path(),
        [
            "bench", "--manifest", "ds/manifest.txt", "--methods", "clafr,msp",
            "--reps", "3", "--out", "bench.csv",
        ],
    );
    assert_ok(&out);
    let bench_csv = std::fs::read_to_string(tmp.path().join("bench.csv")).unwrap();
    let bench_rows = data_lines(&bench_csv);
    assert_eq!(bench_rows.len(), 2);
    assert!(bench_rows.iter().all(|r| r[7].parse::<f64>().is_ok()));

    // The same tensors through decompose/score/eval must land on the same
    // metrics; only the timing column may differ.
    assert_ok(&clafr(
        tmp.path(),
        ["decompose", "--weights", "ds/weights.ctf", "--alpha", "0.9", "--out", "sub.ctf"],
    ));
    assert_ok(&clafr(
        tmp.path(),
        ["score", "--features", "ds/id_features.ctf", "--subspace", "sub.ctf", "--out", "id.ctf"],
    ));
    assert_ok(&clafr(
        tmp.path(),
        [
            "score", "--features", "ds/ood_features.ctf", "--subspace", "sub.ctf",
            "--out", "synth-ood.ctf",
        ],
    ));
    assert_ok(&clafr(
        tmp.path(),
        ["eval", "--id-scores", "id.ctf", "--ood-scores", "synth-ood.ctf", "--out", "eval.csv"],
    ));
    let eval_csv = std::fs::read_to_string(tmp.path().join("eval.csv")).unwrap();
    let eval_row = &data_lines(&eval_csv)[0];
    let clafr_row = bench_rows.iter().find(|r| r[0] == "clafr").unwrap();
    assert_eq!(clafr_row[..7], eval_row[..7], "metrics disagree between paths");
}

#[test]
fn bench_rejects_contradictory_sources() {
    let tmp = TempDir::new().unwrap();
    gen_dataset(tmp.path());
    let cases: &[&[&str]] = &[
        &["bench", "--out", "b.csv"],
        &["bench", "--manifest", "ds/manifest.txt", "--seed", "3", "--out", "b.csv"],
        &["bench", "--manifest", "ds/manifest.txt", "--ntr", "100", "--out", "b.csv"],
        &["bench", "--manifest", "ds/manifest.txt", "--alpha", "0.8", "--out", "b.csv"],
        &["bench", "--manifest", "ds/manifest.txt", "--methods", "knn", "--out", "b.csv"],
    ];
    for args in cases {
        let out = clafr(tmp.path(), args.iter().copied());
        assert_eq!(code(&out), 2, "args {args:?}");
        assert!(!tmp.path().join("b.csv").exists());
    }
}
