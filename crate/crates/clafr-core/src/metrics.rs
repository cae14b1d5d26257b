//! Threshold detection and the two headline metrics: AUROC and FPR at a
//! fixed TPR target.
//!
//! Both metrics are defined combinatorially so that a brute-force oracle can
//! reproduce them bit for bit: AUROC is the Mann–Whitney statistic computed
//! from integer win/tie counts, and the FPR threshold is always one of the
//! observed ID scores.

use thiserror::Error;

use crate::tensor::Vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least one ID and one OOD score, got {n_id} ID and {n_ood} OOD")]
    EmptyScores { n_id: usize, n_ood: usize },
    #[error("TPR target must lie in (0, 1], got {target}")]
    BadTarget { target: f64 },
    #[error("score fingerprints disagree: ID batch is [{id}], OOD batch is [{ood}]")]
    FingerprintMismatch { id: String, ood: String },
}

/// Identifies how a batch of scores was produced. Two batches are comparable
/// only if their fingerprints match exactly; mixing scores from different
/// subspaces or methods silently corrupts every metric downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub method: String,
    pub alpha: Option<f64>,
    pub m: Option<usize>,
    pub normalize: Option<bool>,
    pub k: Option<usize>,
    pub weight_hash: Option<String>,
}

impl Fingerprint {
    pub fn bare(method: &str) -> Self {
        Self {
            method: method.to_string(),
            alpha: None,
            m: None,
            normalize: None,
            k: None,
            weight_hash: None,
        }
    }

    /// Canonical single-line rendering; equal fingerprints render equally and
    /// vice versa (floats print in shortest round-trip form).
    pub fn canonical(&self) -> String {
        let mut parts = vec![format!("method={}", self.method)];
        if let Some(alpha) = self.alpha {
            parts.push(format!("alpha={alpha}"));
        }
        if let Some(m) = self.m {
            parts.push(format!("m={m}"));
        }
        if let Some(normalize) = self.normalize {
            parts.push(format!("normalize={normalize}"));
        }
        if let Some(k) = self.k {
            parts.push(format!("k={k}"));
        }
        if let Some(hash) = &self.weight_hash {
            parts.push(format!("weights={hash}"));
        }
        parts.join(" ")
    }
}

impl std::fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Scores for one batch of samples, in input order, plus the fingerprint of
/// the scorer that produced them and (when measured) the per-sample scoring
/// time in nanoseconds.
#[derive(Debug, Clone)]
pub struct ScoredBatch {
    pub scores: Vector,
    pub fingerprint: Fingerprint,
    pub ns_per_sample: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detection {
    Id,
    Ood,
}

/// Thresholding rule: a sample is in-distribution iff its score reaches tau.
#[inline]
pub fn detect(score: f64, tau: f64) -> Detection {
    if score >= tau {
        Detection::Id
    } else {
        Detection::Ood
    }
}

/// Mann–Whitney AUROC: (wins + 0.5·ties) / (n_id·n_ood) over all ID/OOD
/// pairs, where a win is an ID score strictly above an OOD score.
///
/// Wins and ties are counted as integers (sorted OOD scores + binary
/// search), so the result equals the brute-force pairwise count exactly.
pub fn auroc(id_scores: &Vector, ood_scores: &Vector) -> Result<f64, MetricsError> {
    if id_scores.is_empty() || ood_scores.is_empty() {
        return Err(MetricsError::EmptyScores {
            n_id: id_scores.len(),
            n_ood: ood_scores.len(),
        });
    }
    let mut ood_sorted = ood_scores.data().to_vec();
    ood_sorted.sort_by(f64::total_cmp);
    let mut wins: u64 = 0;
    let mut ties: u64 = 0;
    for &s in id_scores.data() {
        let below = ood_sorted.partition_point(|&x| x < s);
        let not_above = ood_sorted.partition_point(|&x| x <= s);
        wins += below as u64;
        ties += (not_above - below) as u64;
    }
    let pairs = id_scores.len() as f64 * ood_scores.len() as f64;
    Ok((wins as f64 + 0.5 * ties as f64) / pairs)
}

/// The operating point chosen by [`fpr_at_tpr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub fpr: f64,
    pub tau: f64,
    /// Actual TPR at tau; exceeds the target when n_id·target is not an
    /// attainable count or when ID scores tie at the threshold.
    pub tpr_achieved: f64,
}

/// Largest threshold tau with TPR(tau) ≥ `target`, where TPR(tau) is the
/// fraction of ID scores ≥ tau, plus the OOD false-positive rate there.
///
/// tau is always the k-th largest ID score for the smallest k with
/// k/n_id ≥ target, so an exhaustive scan over candidate thresholds
/// reproduces the result exactly.
pub fn fpr_at_tpr(
    id_scores: &Vector,
    ood_scores: &Vector,
    target: f64,
) -> Result<OperatingPoint, MetricsError> {
    if id_scores.is_empty() {
        return Err(MetricsError::EmptyScores {
            n_id: 0,
            n_ood: ood_scores.len(),
        });
    }
    if !(target > 0.0 && target <= 1.0) {
        return Err(MetricsError::BadTarget { target });
    }
    let n = id_scores.len();
    let mut sorted = id_scores.data().to_vec();
    sorted.sort_by(|a, b| f64::total_cmp(b, a));
    let mut k_star = n;
    for k in 1..=n {
        if (k as f64) / (n as f64) >= target {
            k_star = k;
            break;
        }
    }
    let tau = sorted[k_star - 1];
    let kept = id_scores.data().iter().filter(|&&s| s >= tau).count();
    let tpr_achieved = kept as f64 / n as f64;
    let fpr = if ood_scores.is_empty() {
        0.0
    } else {
        let fp = ood_scores.data().iter().filter(|&&s| s >= tau).count();
        fp as f64 / ood_scores.len() as f64
    };
    Ok(OperatingPoint {
        fpr,
        tau,
        tpr_achieved,
    })
}

/// One evaluated (method, OOD set) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub ood_set: String,
    pub auroc: f64,
    pub fpr_at_95tpr: f64,
    pub tau: f64,
    pub tpr_target: f64,
    pub tpr_achieved: f64,
    pub n_id: usize,
    pub n_ood: usize,
    pub ns_per_sample: Option<f64>,
}

/// Computes both metrics for an ID/OOD batch pair scored by the same method.
///
/// Refuses batches whose fingerprints differ: scores from different
/// subspaces (or different methods) are not on a common scale.
pub fn evaluate(
    id: &ScoredBatch,
    ood: &ScoredBatch,
    ood_set: &str,
    tpr_target: f64,
) -> Result<EvalReport, MetricsError> {
    if id.fingerprint != ood.fingerprint {
        return Err(MetricsError::FingerprintMismatch {
            id: id.fingerprint.canonical(),
            ood: ood.fingerprint.canonical(),
        });
    }
    let auroc = auroc(&id.scores, &ood.scores)?;
    let op = fpr_at_tpr(&id.scores, &ood.scores, tpr_target)?;
    let n_id = id.scores.len();
    let n_ood = ood.scores.len();
    let ns_per_sample = match (id.ns_per_sample, ood.ns_per_sample) {
        (Some(a), Some(b)) => {
            Some((a * n_id as f64 + b * n_ood as f64) / (n_id + n_ood) as f64)
        }
        _ => None,
    };
    Ok(EvalReport {
        method: id.fingerprint.method.clone(),
        ood_set: ood_set.to_string(),
        auroc,
        fpr_at_95tpr: op.fpr,
        tau: op.tau,
        tpr_target,
        tpr_achieved: op.tpr_achieved,
        n_id,
        n_ood,
        ns_per_sample,
    })
}

pub const CSV_HEADER: &str = "method,ood_set,auroc,fpr95,tau,n_id,n_ood,ns_per_sample";

fn ns_field(ns: Option<f64>) -> String {
    ns.map(|x| format!("{x:.1}")).unwrap_or_default()
}

impl EvalReport {
    /// One CSV row matching [`CSV_HEADER`]: rates as percentages with two
    /// decimals, tau with six, empty ns field when timing was not measured.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.2},{:.2},{:.6},{},{},{}",
            self.method,
            self.ood_set,
            self.auroc * 100.0,
            self.fpr_at_95tpr * 100.0,
            self.tau,
            self.n_id,
            self.n_ood,
            ns_field(self.ns_per_sample)
        )
    }
}

/// Reports as a CSV document. With `include_average` (and more than one
/// report) a final row carries the mean AUROC/FPR; its tau and timing fields
/// are left empty since they do not average meaningfully.
pub fn reports_to_csv(reports: &[EvalReport], include_average: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    if include_average && reports.len() > 1 {
        let (auroc, fpr, n_ood) = average_of(reports);
        out.push_str(&format!(
            "{},average,{:.2},{:.2},,{},{},\n",
            reports[0].method,
            auroc * 100.0,
            fpr * 100.0,
            reports[0].n_id,
            n_ood,
        ));
    }
    out
}

fn average_of(reports: &[EvalReport]) -> (f64, f64, usize) {
    let n = reports.len() as f64;
    let auroc = reports.iter().map(|r| r.auroc).sum::<f64>() / n;
    let fpr = reports.iter().map(|r| r.fpr_at_95tpr).sum::<f64>() / n;
    let n_ood = reports.iter().map(|r| r.n_ood).sum();
    (auroc, fpr, n_ood)
}

/// Reports as an aligned plain-text table (same columns as the CSV).
pub fn render_table(reports: &[EvalReport], include_average: bool) -> String {
    let mut rows: Vec<[String; 8]> = vec![[
        "method".into(),
        "ood_set".into(),
        "auroc%".into(),
        "fpr95%".into(),
        "tau".into(),
        "n_id".into(),
        "n_ood".into(),
        "ns/sample".into(),
    ]];
    for r in reports {
        rows.push([
            r.method.clone(),
            r.ood_set.clone(),
            format!("{:.2}", r.auroc * 100.0),
            format!("{:.2}", r.fpr_at_95tpr * 100.0),
            format!("{:.6}", r.tau),
            r.n_id.to_string(),
            r.n_ood.to_string(),
            ns_field(r.ns_per_sample),
        ]);
    }
    if include_average && reports.len() > 1 {
        let (auroc, fpr, n_ood) = average_of(reports);
        rows.push([
            reports[0].method.clone(),
            "average".into(),
            format!("{:.2}", auroc * 100.0),
            format!("{:.2}", fpr * 100.0),
            String::new(),
            reports[0].n_id.to_string(),
            n_ood.to_string(),
            String::new(),
        ]);
    }
    let mut widths = [0usize; 8];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(&widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i < 2 {
                line.push_str(&format!("{cell:<w$}"));
            } else {
                line.push_str(&format!("{cell:>w$}"));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
