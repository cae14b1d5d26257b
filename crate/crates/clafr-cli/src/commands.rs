//! One function per subcommand. Flags are validated before any file is
//! touched, all computation happens before any file is written, and the
//! writers underneath are atomic — together that keeps every command free
//! of partial output on the error path.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clafr_core::baselines::{
    energy_score, knn_batch, logit_batch, logits_from_features, maxlogit_score, msp_score,
    BaselineError, FeatureBank,
};
use clafr_core::io::{
    load_manifest, read_matrix, read_vector, write_tensor, write_text_atomic, Dtype, IoError,
    Tensor,
};
use clafr_core::metrics::{evaluate, render_table, reports_to_csv, EvalReport, MetricsError, ScoredBatch};
use clafr_core::subspace::{build_subspace, score_batch, SubspaceConfig, SubspaceError};
use clafr_core::synth::{
    ablate_alpha, bench_csv, bench_over_ntr, fit_linear_classifier, generate, median_pass_ns,
    Method, SynthError, KNN_K, OOD_SET_NAME,
};
use clafr_core::{Matrix, TensorError, Vector};
use thiserror::Error;

use crate::sidecar;
use crate::{AblateArgs, BenchArgs, DecomposeArgs, EvalArgs, GenSynthArgs, ScoreArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

fn tensor_code(err: &TensorError) -> i32 {
    match err {
        TensorError::SvdNonConvergence { .. } => 3,
        _ => 2,
    }
}

fn subspace_code(err: &SubspaceError) -> i32 {
    match err {
        SubspaceError::DegenerateWeights => 3,
        SubspaceError::Tensor(t) => tensor_code(t),
        _ => 2,
    }
}

fn baseline_code(err: &BaselineError) -> i32 {
    match err {
        BaselineError::Tensor(t) => tensor_code(t),
        _ => 2,
    }
}

fn metrics_code(err: &MetricsError) -> i32 {
    match err {
        MetricsError::FingerprintMismatch { .. } => 4,
        _ => 2,
    }
}

fn synth_code(err: &SynthError) -> i32 {
    match err {
        SynthError::Subspace(e) => subspace_code(e),
        SynthError::Baseline(e) => baseline_code(e),
        SynthError::Metrics(e) => metrics_code(e),
        SynthError::Tensor(e) => tensor_code(e),
        _ => 2,
    }
}

impl CliError {
    /// Process exit code: 2 input/format, 3 numerical, 4 artifact misuse.
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Tensor(e) => tensor_code(e),
            CliError::Subspace(e) => subspace_code(e),
            CliError::Baseline(e) => baseline_code(e),
            CliError::Metrics(e) => metrics_code(e),
            CliError::Synth(e) => synth_code(e),
        }
    }
}

pub(crate) fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scores".to_string())
}

fn parse_f64_list(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| input(format!("{flag}: {t:?} is not a number")))
        })
        .collect()
}

fn parse_usize_list(text: &str, flag: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<usize>()
                .map_err(|_| input(format!("{flag}: {t:?} is not a count")))
        })
        .collect()
}

fn parse_methods(text: &str) -> Result<Vec<Method>, CliError> {
    text.split(',')
        .map(|t| t.trim().parse::<Method>().map_err(CliError::Input))
        .collect()
}

pub fn decompose(args: &DecomposeArgs) -> Result<(), CliError> {
    let w = read_matrix(&args.weights)?;
    let cfg = SubspaceConfig {
        alpha: args.alpha,
        normalize_features: true,
        m_override: args.m,
    };
    let sub = build_subspace(&w, &cfg)?;
    write_tensor(&args.out, &Tensor::Matrix(sub.u_m.clone()), Dtype::F64)?;
    sidecar::write_subspace_meta(&args.out, &sub)?;
    println!(
        "kept m = {} of {} directions (alpha = {}); wrote {}",
        sub.m,
        sub.sigma.len(),
        sub.alpha_used,
        args.out.display()
    );
    Ok(())
}

pub fn score(args: &ScoreArgs) -> Result<(), CliError> {
    let method: Method = args.method.parse().map_err(CliError::Input)?;

    // Reject contradictory flags before touching any file.
    match method {
        Method::Clafr => {
            if args.subspace.is_some() == args.weights.is_some() {
                return Err(input("clafr needs exactly one of --subspace or --weights"));
            }
            if args.subspace.is_some() && args.alpha.is_some() {
                return Err(input("--alpha is already fixed by the subspace sidecar"));
            }
            if args.bank.is_some() || args.k.is_some() {
                return Err(input("--bank/--k apply to knn only"));
            }
        }
        Method::Msp | Method::Energy | Method::MaxLogit => {
            if args.subspace.is_some() || args.alpha.is_some() || args.no_normalize {
                return Err(input(format!(
                    "--subspace/--alpha/--no-normalize apply to clafr, not {}",
                    method.name()
                )));
            }
            if args.bank.is_some() || args.k.is_some() {
                return Err(input("--bank/--k apply to knn only"));
            }
        }
        Method::Knn => {
            if args.bank.is_none() {
                return Err(input("knn needs --bank with the training features"));
            }
            if args.subspace.is_some() || args.weights.is_some() || args.alpha.is_some() {
                return Err(input("--subspace/--weights/--alpha apply to clafr, not knn"));
            }
            if args.no_normalize {
                return Err(input("knn always compares unit-normalized features"));
            }
        }
    }

    let features = read_matrix(&args.features)?;
    let batch = match method {
        Method::Clafr => {
            let (sub, cfg) = match (&args.subspace, &args.weights) {
                (Some(path), None) => {
                    let sub = sidecar::read_subspace(path)?;
                    let cfg = SubspaceConfig {
                        alpha: sub.alpha_used,
                        normalize_features: !args.no_normalize,
                        m_override: None,
                    };
                    (sub, cfg)
                }
                (None, Some(wpath)) => {
                    let cfg = SubspaceConfig {
                        alpha: args.alpha.unwrap_or(0.9),
                        normalize_features: !args.no_normalize,
                        m_override: None,
                    };
                    (build_subspace(&read_matrix(wpath)?, &cfg)?, cfg)
                }
                _ => unreachable!("validated above"),
            };
            score_batch(&features, &sub, &cfg)?
        }
        Method::Msp | Method::Energy | Method::MaxLogit => {
            let logits = match &args.weights {
                Some(wpath) => logits_from_features(&features, &read_matrix(wpath)?)?,
                None => features.clone(),
            };
            let row_fn = match method {
                Method::Msp => msp_score as fn(&[f64]) -> f64,
                Method::Energy => energy_score,
                _ => maxlogit_score,
            };
            logit_batch(&logits, row_fn, method.name())?
        }
        Method::Knn => {
            let bank_path = args.bank.as_ref().expect("validated above");
            let bank = FeatureBank::new(read_matrix(bank_path)?, &stem(bank_path))?;
            knn_batch(&features, &bank, args.k.unwrap_or(KNN_K))?
        }
    };

    write_tensor(&args.out, &Tensor::Vector(batch.scores.clone()), Dtype::F64)?;
    sidecar::write_scores_meta(&args.out, &batch.fingerprint)?;
    println!(
        "scored {} rows with {}; wrote {}",
        batch.scores.len(),
        method.name(),
        args.out.display()
    );
    Ok(())
}

fn load_scored_batch(path: &Path) -> Result<ScoredBatch, CliError> {
    Ok(ScoredBatch {
        scores: read_vector(path)?,
        fingerprint: sidecar::read_scores_fingerprint(path)?,
        ns_per_sample: None,
    })
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let id = load_scored_batch(&args.id_scores)?;
    let mut reports = Vec::with_capacity(args.ood_scores.len());
    for path in &args.ood_scores {
        let ood = load_scored_batch(path)?;
        reports.push(evaluate(&id, &ood, &stem(path), args.tpr)?);
    }
    let include_average = reports.len() > 1;
    write_text_atomic(&args.out, &reports_to_csv(&reports, include_average))?;
    println!("{}", render_table(&reports, include_average).trim_end());
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn ablate(args: &AblateArgs) -> Result<(), CliError> {
    let alphas = parse_f64_list(&args.alphas, "--alphas")?;
    let cfg = args.synth.config(args.seed);
    let sweep = ablate_alpha(&cfg, &alphas)?;
    write_text_atomic(&args.out, &sweep.to_csv())?;
    let first = sweep.points.first().expect("non-empty sweep");
    let last = sweep.points.last().expect("non-empty sweep");
    println!(
        "{} alphas, m in [{}, {}]; wrote {}",
        sweep.points.len(),
        first.m,
        last.m,
        args.out.display()
    );
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let methods = parse_methods(&args.methods)?;
    match (&args.manifest, args.seed) {
        (Some(_), Some(_)) => Err(input("give --manifest or --seed, not both")),
        (None, None) => Err(input("bench needs --manifest or --seed")),
        (Some(path), None) => {
            if args.ntr.is_some() {
                return Err(input("--ntr applies to synthetic (--seed) mode"));
            }
            if args.alpha.is_some() {
                return Err(input("manifest mode takes alpha from the manifest"));
            }
            bench_manifest(path, &methods, args.reps, &args.out)
        }
        (None, Some(seed)) => {
            let cfg = args.synth.config(seed);
            let sizes = match &args.ntr {
                Some(text) => parse_usize_list(text, "--ntr")?,
                None => vec![cfg.n_train],
            };
            let alpha = args.alpha.unwrap_or(0.9);
            let rows = bench_over_ntr(&cfg, &methods, alpha, &sizes, args.reps)?;
            write_text_atomic(&args.out, &bench_csv(&rows))?;
            println!(
                "{} rows ({} sizes x {} methods); wrote {}",
                rows.len(),
                sizes.len(),
                methods.len(),
                args.out.display()
            );
            Ok(())
        }
    }
}

/// Timed evaluation of real exported tensors. Logit methods reuse the
/// manifest's precomputed logits when named, otherwise features·W; knn is
/// rejected because manifests carry no feature bank.
fn bench_manifest(
    path: &Path,
    methods: &[Method],
    reps: usize,
    out: &Path,
) -> Result<(), CliError> {
    if methods.is_empty() {
        return Err(input("no methods requested"));
    }
    if methods.contains(&Method::Knn) {
        return Err(input(
            "knn needs a feature bank and manifests name none; use `score --bank` or `bench --seed`",
        ));
    }
    let man = load_manifest(path)?;
    let w = read_matrix(&man.weights)?;
    let id_features = read_matrix(&man.id_features)?;
    let mut ood_sets = Vec::with_capacity(man.ood_features.len());
    for (name, p) in &man.ood_features {
        ood_sets.push((name.clone(), read_matrix(p)?));
    }

    let sub_cfg = SubspaceConfig {
        alpha: man.alpha,
        normalize_features: man.normalize,
        m_override: None,
    };
    let sub = if methods.contains(&Method::Clafr) {
        Some(build_subspace(&w, &sub_cfg)?)
    } else {
        None
    };
    let needs_logits = methods
        .iter()
        .any(|m| matches!(m, Method::Msp | Method::Energy | Method::MaxLogit));
    let ood_logit_paths: BTreeMap<&str, &PathBuf> = man
        .ood_logits
        .iter()
        .map(|(n, p)| (n.as_str(), p))
        .collect();
    let id_logits = if needs_logits {
        Some(match &man.id_logits {
            Some(p) => read_matrix(p)?,
            None => logits_from_features(&id_features, &w)?,
        })
    } else {
        None
    };
    let mut ood_logits: Vec<Option<Matrix>> = Vec::with_capacity(ood_sets.len());
    for (name, feats) in &ood_sets {
        ood_logits.push(if needs_logits {
            Some(match ood_logit_paths.get(name.as_str()) {
                Some(p) => read_matrix(p)?,
                None => logits_from_features(feats, &w)?,
            })
        } else {
            None
        });
    }

    let reps = reps.max(3);
    let include_average = ood_sets.len() > 1;
    let mut csv = String::new();
    let mut all_reports: Vec<EvalReport> = Vec::new();
    for (gi, &method) in methods.iter().enumerate() {
        let mut group = Vec::with_capacity(ood_sets.len());
        for (si, (name, ood_feats)) in ood_sets.iter().enumerate() {
            let score_both = || -> Result<(ScoredBatch, ScoredBatch), CliError> {
                Ok(match method {
                    Method::Clafr => {
                        let s = sub.as_ref().expect("subspace built above");
                        (
                            score_batch(&id_features, s, &sub_cfg)?,
                            score_batch(ood_feats, s, &sub_cfg)?,
                        )
                    }
                    Method::Msp | Method::Energy | Method::MaxLogit => {
                        let id_l = id_logits.as_ref().expect("logits built above");
                        let ood_l = ood_logits[si].as_ref().expect("logits built above");
                        let row_fn = match method {
                            Method::Msp => msp_score as fn(&[f64]) -> f64,
                            Method::Energy => energy_score,
                            _ => maxlogit_score,
                        };
                        (
                            logit_batch(id_l, row_fn, method.name())?,
                            logit_batch(ood_l, row_fn, method.name())?,
                        )
                    }
                    Method::Knn => unreachable!("rejected above"),
                })
            };
            let (mut id_batch, mut ood_batch) = score_both()?;
            let ns = median_pass_ns(
                || -> Result<(), CliError> {
                    std::hint::black_box(score_both()?);
                    Ok(())
                },
                reps,
                id_features.rows() + ood_feats.rows(),
            )?;
            id_batch.ns_per_sample = Some(ns);
            ood_batch.ns_per_sample = Some(ns);
            group.push(evaluate(&id_batch, &ood_batch, name, 0.95)?);
        }
        let text = reports_to_csv(&group, include_average);
        if gi == 0 {
            csv.push_str(&text);
        } else if let Some((_, rest)) = text.split_once('\n') {
            csv.push_str(rest);
        }
        all_reports.extend(group);
    }
    write_text_atomic(out, &csv)?;
    println!("{}", render_table(&all_reports, false).trim_end());
    println!("wrote {}", out.display());
    Ok(())
}

pub fn gen_synth(args: &GenSynthArgs) -> Result<(), CliError> {
    let cfg = args.synth.config(args.seed);
    let data = generate(&cfg)?;
    let w = fit_linear_classifier(&data.train_features, &data.train_labels)?;

    std::fs::create_dir_all(&args.out_dir).map_err(|source| IoError::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    let file = |name: &str| args.out_dir.join(name);
    let labels = Vector::from_vec(data.train_labels.iter().map(|&l| l as f64).collect())?;

    write_tensor(&file("weights.ctf"), &Tensor::Matrix(w), Dtype::F64)?;
    write_tensor(
        &file("train_features.ctf"),
        &Tensor::Matrix(data.train_features),
        Dtype::F64,
    )?;
    write_tensor(&file("train_labels.ctf"), &Tensor::Vector(labels), Dtype::F64)?;
    write_tensor(
        &file("id_features.ctf"),
        &Tensor::Matrix(data.id_test),
        Dtype::F64,
    )?;
    let mut count = 4;
    if data.ood_test.rows() > 0 {
        write_tensor(
            &file("ood_features.ctf"),
            &Tensor::Matrix(data.ood_test),
            Dtype::F64,
        )?;
        let manifest = format!(
            "# synthetic benchmark, seed {}\n\
             weights = weights.ctf\n\
             id_features = id_features.ctf\n\
             ood_feature = {OOD_SET_NAME}:ood_features.ctf\n\
             alpha = 0.9\n\
             normalize = true\n",
            cfg.seed
        );
        write_text_atomic(&file("manifest.txt"), &manifest)?;
        count += 2;
    } else {
        println!("no OOD rows requested; skipping ood_features.ctf and manifest.txt");
    }
    println!("wrote {count} files under {}", args.out_dir.display());
    Ok(())
}
