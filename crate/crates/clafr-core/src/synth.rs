//! Seeded synthetic benchmark: Gaussian class clusters, a displaced OOD
//! cluster, a closed-form classifier, and the harnesses that exercise the
//! whole pipeline — method comparison, alpha ablation, and the
//! constant-vs-linear scoring-time contrast.
//!
//! Everything downstream of a [`SynthConfig`] is a pure function of the
//! seed: generation uses the crate's own portable RNG and a fixed draw
//! order, so golden outputs hold across platforms. Timing numbers are the
//! one exception and are never part of golden comparisons.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::baselines::{
    energy_score, knn_batch, logit_batch, logits_from_features, maxlogit_score, msp_score,
    BaselineError, FeatureBank,
};
use crate::metrics::{evaluate, EvalReport, MetricsError, ScoredBatch};
use crate::rng::Xoshiro256pp;
use crate::subspace::{
    build_subspace, score_batch, subspace_from_factors, weight_fingerprint, SubspaceConfig,
    SubspaceError,
};
use crate::tensor::{slice_l2_norm, svd, Matrix, TensorError, Vector};

/// k used by the KNN baseline throughout the benchmark.
pub const KNN_K: usize = 10;

/// Name of the generated OOD set in reports.
pub const OOD_SET_NAME: &str = "synth-ood";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {reason}")]
    BadConfig { reason: String },
    #[error("class {class} has no training samples")]
    EmptyClass { class: usize },
    #[error("labels length {got} does not match {rows} feature rows")]
    LabelCount { rows: usize, got: usize },
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

fn bad_config(reason: impl Into<String>) -> SynthError {
    SynthError::BadConfig {
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Feature dimension D.
    pub d: usize,
    /// Number of ID classes C.
    pub c: usize,
    pub n_train: usize,
    pub n_id_test: usize,
    /// May be zero: some runs only need the ID side.
    pub n_ood_test: usize,
    /// Distance of each class mean from the origin; means sit on mutually
    /// orthogonal directions, so they are pairwise √2 × this far apart.
    pub class_sep: f64,
    /// Distance of the OOD cluster mean from the origin, along a direction
    /// orthogonal to every class mean (where d > c allows one).
    pub ood_shift: f64,
    /// Isotropic noise around every mean.
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            d: 64,
            c: 8,
            n_train: 512,
            n_id_test: 256,
            n_ood_test: 256,
            class_sep: 3.0,
            ood_shift: 2.5,
            noise_sigma: 1.0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        if self.c < 2 || self.d < self.c {
            return Err(bad_config(format!(
                "need d ≥ c ≥ 2, got d={} c={}",
                self.d, self.c
            )));
        }
        if self.n_train == 0 || self.n_id_test == 0 {
            return Err(bad_config("n_train and n_id_test must be ≥ 1"));
        }
        if !(self.class_sep > 0.0 && self.class_sep.is_finite()) {
            return Err(bad_config(format!("class_sep must be > 0, got {}", self.class_sep)));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(bad_config(format!(
                "noise_sigma must be > 0, got {}",
                self.noise_sigma
            )));
        }
        if !(self.ood_shift >= 0.0 && self.ood_shift.is_finite()) {
            return Err(bad_config(format!(
                "ood_shift must be ≥ 0, got {}",
                self.ood_shift
            )));
        }
        Ok(())
    }
}

/// One generated dataset. Labels are parallel to `train_features` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train_features: Matrix,
    pub train_labels: Vec<usize>,
    pub id_test: Matrix,
    pub ood_test: Matrix,
    /// The planted class means, c×d.
    pub class_means: Matrix,
    /// The planted OOD cluster mean.
    pub ood_mean: Vector,
}

/// Draws `count` orthonormal direction rows, rejecting near-degenerate
/// residuals so the result is deterministically well-conditioned.
fn orthonormal_rows(rng: &mut Xoshiro256pp, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(count);
    while rows.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
        for prev in &rows {
            let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (x, p) in v.iter_mut().zip(prev) {
                *x -= dot * p;
            }
        }
        let norm = slice_l2_norm(&v);
        if norm < 1e-6 {
            continue;
        }
        for x in &mut v {
            *x /= norm;
        }
        rows.push(v);
    }
    rows
}

/// Generates the dataset for `cfg`. Fixed draw order — class directions,
/// OOD direction, ID test, OOD test, then training rows — so the eval sets
/// are identical across sweeps that only change `n_train`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData, SynthError> {
    cfg.validate()?;
    let mut rng = Xoshiro256pp::seed_from_u64(cfg.seed);

    let dirs = orthonormal_rows(&mut rng, cfg.c, cfg.d);
    let ood_dir: Vec<f64> = if cfg.d > cfg.c {
        orthonormal_rows_continue(&mut rng, &dirs, cfg.d)
    } else {
        // No direction orthogonal to all class means exists; displace along
        // a fresh random direction instead.
        let mut v: Vec<f64> = (0..cfg.d).map(|_| rng.next_gaussian()).collect();
        let norm = slice_l2_norm(&v);
        for x in &mut v {
            *x /= norm;
        }
        v
    };

    let mut means = Vec::with_capacity(cfg.c * cfg.d);
    for dir in &dirs {
        means.extend(dir.iter().map(|x| x * cfg.class_sep));
    }
    let class_means = Matrix::from_vec(cfg.c, cfg.d, means)?;
    let ood_mean =
        Vector::from_vec(ood_dir.iter().map(|x| x * cfg.ood_shift).collect())?;

    let draw_cluster = |rng: &mut Xoshiro256pp, mean: &[f64]| -> Vec<f64> {
        mean.iter()
            .map(|mu| mu + cfg.noise_sigma * rng.next_gaussian())
            .collect()
    };

    let mut id_test = Vec::with_capacity(cfg.n_id_test * cfg.d);
    for i in 0..cfg.n_id_test {
        id_test.extend(draw_cluster(&mut rng, class_means.row(i % cfg.c)));
    }
    let mut ood_test = Vec::with_capacity(cfg.n_ood_test * cfg.d);
    for _ in 0..cfg.n_ood_test {
        ood_test.extend(draw_cluster(&mut rng, ood_mean.data()));
    }
    let mut train = Vec::with_capacity(cfg.n_train * cfg.d);
    let mut train_labels = Vec::with_capacity(cfg.n_train);
    for i in 0..cfg.n_train {
        let label = i % cfg.c;
        train.extend(draw_cluster(&mut rng, class_means.row(label)));
        train_labels.push(label);
    }

    Ok(SynthData {
        train_features: Matrix::from_vec(cfg.n_train, cfg.d, train)?,
        train_labels,
        id_test: Matrix::from_vec(cfg.n_id_test, cfg.d, id_test)?,
        ood_test: Matrix::from_vec(cfg.n_ood_test, cfg.d, ood_test)?,
        class_means,
        ood_mean,
    })
}

fn orthonormal_rows_continue(
    rng: &mut Xoshiro256pp,
    existing: &[Vec<f64>],
    dim: usize,
) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
        for prev in existing {
            let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (x, p) in v.iter_mut().zip(prev) {
                *x -= dot * p;
            }
        }
        let norm = slice_l2_norm(&v);
        if norm >= 1e-6 {
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
}

/// Nearest-class-mean classifier: column c of the returned D×C matrix is
/// the unit-normalized mean of the class-c training rows. Closed-form and
/// deterministic — no optimizer in the loop.
pub fn fit_linear_classifier(
    features: &Matrix,
    labels: &[usize],
) -> Result<Matrix, SynthError> {
    if labels.len() != features.rows() || labels.is_empty() {
        return Err(SynthError::LabelCount {
            rows: features.rows(),
            got: labels.len(),
        });
    }
    let d = features.cols();
    let c = labels.iter().max().copied().unwrap_or(0) + 1;
    let mut sums = vec![0.0; c * d];
    let mut counts = vec![0usize; c];
    for (i, &label) in labels.iter().enumerate() {
        counts[label] += 1;
        for (s, x) in sums[label * d..(label + 1) * d].iter_mut().zip(features.row(i)) {
            *s += x;
        }
    }
    let mut w = vec![0.0; d * c];
    for (class, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(SynthError::EmptyClass { class });
        }
        let mean: Vec<f64> = sums[class * d..(class + 1) * d]
            .iter()
            .map(|s| s / count as f64)
            .collect();
        let norm = slice_l2_norm(&mean);
        let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
        for (i, &mu) in mean.iter().enumerate() {
            w[i * c + class] = mu * scale;
        }
    }
    Ok(Matrix::from_vec(d, c, w)?)
}

/// Scoring methods the benchmark can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Clafr,
    Msp,
    Energy,
    MaxLogit,
    Knn,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Clafr,
        Method::Msp,
        Method::Energy,
        Method::MaxLogit,
        Method::Knn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Clafr => "clafr",
            Method::Msp => "msp",
            Method::Energy => "energy",
            Method::MaxLogit => "maxlogit",
            Method::Knn => "knn",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clafr" => Ok(Method::Clafr),
            "msp" => Ok(Method::Msp),
            "energy" => Ok(Method::Energy),
            "maxlogit" => Ok(Method::MaxLogit),
            "knn" => Ok(Method::Knn),
            other => Err(format!(
                "unknown method {other:?}, expected one of clafr, msp, energy, maxlogit, knn"
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

struct MethodRun {
    m: Option<usize>,
    report: EvalReport,
}

/// Scores ID and OOD test sets with every requested method and evaluates
/// each pair. With `timing_reps`, the scoring pass is repeated and the
/// median per-sample wall time lands in the reports.
fn run_methods(
    cfg: &SynthConfig,
    methods: &[Method],
    alpha: f64,
    timing_reps: Option<usize>,
) -> Result<Vec<MethodRun>, SynthError> {
    if methods.is_empty() {
        return Err(bad_config("no methods requested"));
    }
    if cfg.n_ood_test == 0 {
        return Err(bad_config("evaluation needs n_ood_test ≥ 1"));
    }
    let data = generate(cfg)?;
    let w = fit_linear_classifier(&data.train_features, &data.train_labels)?;

    let sub_cfg = SubspaceConfig {
        alpha,
        normalize_features: true,
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
    let logits = if needs_logits {
        Some((
            logits_from_features(&data.id_test, &w)?,
            logits_from_features(&data.ood_test, &w)?,
        ))
    } else {
        None
    };
    let bank = if methods.contains(&Method::Knn) {
        Some(FeatureBank::new(data.train_features.clone(), "synth-train")?)
    } else {
        None
    };

    let n_samples = data.id_test.rows() + data.ood_test.rows();
    let mut runs = Vec::with_capacity(methods.len());
    for &method in methods {
        let score_both = || -> Result<(ScoredBatch, ScoredBatch), SynthError> {
            Ok(match method {
                Method::Clafr => {
                    let s = sub.as_ref().expect("subspace built above");
                    (
                        score_batch(&data.id_test, s, &sub_cfg)?,
                        score_batch(&data.ood_test, s, &sub_cfg)?,
                    )
                }
                Method::Msp | Method::Energy | Method::MaxLogit => {
                    let (id_logits, ood_logits) = logits.as_ref().expect("logits built above");
                    let row_fn = match method {
                        Method::Msp => msp_score as fn(&[f64]) -> f64,
                        Method::Energy => energy_score,
                        _ => maxlogit_score,
                    };
                    (
                        logit_batch(id_logits, row_fn, method.name())?,
                        logit_batch(ood_logits, row_fn, method.name())?,
                    )
                }
                Method::Knn => {
                    let bank = bank.as_ref().expect("bank built above");
                    (
                        knn_batch(&data.id_test, bank, KNN_K)?,
                        knn_batch(&data.ood_test, bank, KNN_K)?,
                    )
                }
            })
        };
        let (mut id_batch, mut ood_batch) = score_both()?;
        if let Some(reps) = timing_reps {
            let ns = median_pass_ns(
                || -> Result<(), SynthError> {
                    std::hint::black_box(score_both()?);
                    Ok(())
                },
                reps,
                n_samples,
            )?;
            id_batch.ns_per_sample = Some(ns);
            ood_batch.ns_per_sample = Some(ns);
        }
        let report = evaluate(&id_batch, &ood_batch, OOD_SET_NAME, 0.95)?;
        runs.push(MethodRun {
            m: sub.as_ref().filter(|_| method == Method::Clafr).map(|s| s.m),
            report,
        });
    }
    Ok(runs)
}

/// Median per-sample wall time of a scoring pass over `reps` measured
/// repetitions. Short passes are looped until a repetition spans at least
/// ~2 ms so the clock resolution never dominates; the caller's pass should
/// end in `std::hint::black_box` so the work cannot be elided.
pub fn median_pass_ns<E, F>(mut pass: F, reps: usize, n_samples: usize) -> Result<f64, E>
where
    F: FnMut() -> Result<(), E>,
{
    let start = Instant::now();
    pass()?;
    let calibration = start.elapsed();
    let target = Duration::from_millis(2);
    let iters = if calibration >= target {
        1
    } else {
        (target.as_nanos() / calibration.as_nanos().max(1)) as usize + 1
    };
    let mut per_sample = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        for _ in 0..iters {
            pass()?;
        }
        let ns = start.elapsed().as_nanos() as f64 / (iters as f64 * n_samples.max(1) as f64);
        per_sample.push(ns);
    }
    per_sample.sort_by(f64::total_cmp);
    let mid = per_sample.len() / 2;
    Ok(if per_sample.len() % 2 == 1 {
        per_sample[mid]
    } else {
        (per_sample[mid - 1] + per_sample[mid]) / 2.0
    })
}

/// Untimed pipeline run: fully deterministic reports (ns fields empty),
/// suitable for golden-file comparison.
pub fn evaluate_synth(
    cfg: &SynthConfig,
    methods: &[Method],
    alpha: f64,
) -> Result<Vec<EvalReport>, SynthError> {
    Ok(run_methods(cfg, methods, alpha, None)?
        .into_iter()
        .map(|r| r.report)
        .collect())
}

/// Timed pipeline run; per-sample timing is the median of at least three
/// repetitions of the full scoring pass.
pub fn run_benchmark(
    cfg: &SynthConfig,
    methods: &[Method],
    alpha: f64,
    reps: usize,
) -> Result<Vec<EvalReport>, SynthError> {
    Ok(run_methods(cfg, methods, alpha, Some(reps.max(3)))?
        .into_iter()
        .map(|r| r.report)
        .collect())
}

/// One evaluated alpha in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationPoint {
    pub alpha: f64,
    pub m: usize,
    pub report: EvalReport,
}

/// Alpha sweep over one seeded dataset; the SVD is computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationSweep {
    pub points: Vec<AblationPoint>,
}

pub const ABLATION_CSV_HEADER: &str =
    "alpha,m,method,ood_set,auroc,fpr95,tau,n_id,n_ood,ns_per_sample";

impl AblationSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(ABLATION_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.alpha, p.m, p.report.csv_row()));
        }
        out
    }
}

/// Runs the clafr pipeline once per alpha. Alphas must be strictly
/// increasing and inside (0, 1]; m is then non-decreasing across the sweep.
pub fn ablate_alpha(cfg: &SynthConfig, alphas: &[f64]) -> Result<AblationSweep, SynthError> {
    if alphas.is_empty() {
        return Err(bad_config("alpha sweep is empty"));
    }
    if alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(bad_config("every alpha must lie in (0, 1]"));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad_config("alphas must be strictly increasing"));
    }
    if cfg.n_ood_test == 0 {
        return Err(bad_config("evaluation needs n_ood_test ≥ 1"));
    }
    let data = generate(cfg)?;
    let w = fit_linear_classifier(&data.train_features, &data.train_labels)?;
    let factors = svd(&w)?;
    let hash = weight_fingerprint(&w);

    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let sub_cfg = SubspaceConfig {
            alpha,
            normalize_features: true,
            m_override: None,
        };
        let sub = subspace_from_factors(&factors, &hash, &sub_cfg)?;
        let id_batch = score_batch(&data.id_test, &sub, &sub_cfg)?;
        let ood_batch = score_batch(&data.ood_test, &sub, &sub_cfg)?;
        let report = evaluate(&id_batch, &ood_batch, OOD_SET_NAME, 0.95)?;
        points.push(AblationPoint {
            alpha,
            m: sub.m,
            report,
        });
    }
    Ok(AblationSweep { points })
}

/// One row of the training-set-size sweep; `alpha`/`m` are filled only for
/// the subspace method.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n_tr: usize,
    pub alpha: Option<f64>,
    pub m: Option<usize>,
    pub report: EvalReport,
}

pub const BENCH_CSV_HEADER: &str =
    "n_tr,alpha,m,method,ood_set,auroc,fpr95,tau,n_id,n_ood,ns_per_sample";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.n_tr,
            row.alpha.map(|a| a.to_string()).unwrap_or_default(),
            row.m.map(|m| m.to_string()).unwrap_or_default(),
            row.report.csv_row()
        ));
    }
    out
}

/// Repeats the timed benchmark across training-set sizes. The eval sets are
/// seed-identical for every size (generation draws them before the training
/// rows), so per-sample times are directly comparable: subspace scoring
/// never touches the bank while KNN scans all of it.
pub fn bench_over_ntr(
    base: &SynthConfig,
    methods: &[Method],
    alpha: f64,
    n_trains: &[usize],
    reps: usize,
) -> Result<Vec<BenchRow>, SynthError> {
    if n_trains.is_empty() {
        return Err(bad_config("no training-set sizes given"));
    }
    let mut rows = Vec::new();
    for &n_tr in n_trains {
        let cfg = SynthConfig {
            n_train: n_tr,
            ..base.clone()
        };
        for run in run_methods(&cfg, methods, alpha, Some(reps.max(3)))? {
            rows.push(BenchRow {
                n_tr,
                alpha: run.m.map(|_| alpha),
                m: run.m,
                report: run.report,
            });
        }
    }
    Ok(rows)
}
