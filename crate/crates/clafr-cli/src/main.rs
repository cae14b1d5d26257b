//! `clafr`: out-of-distribution detection from classifier weights.
//!
//! Six subcommands cover the pipeline end to end: `decompose` extracts the
//! class-known subspace from a weight matrix, `score` turns feature rows
//! into per-sample OOD scores, `eval` builds AUROC/FPR tables from score
//! files, `ablate` sweeps the explained-variance cutoff, `bench` times
//! methods against each other, and `gen-synth` writes the seeded synthetic
//! dataset the last two run on by default.
//!
//! Exit codes: 0 success, 2 bad input or file format, 3 numerical failure,
//! 4 artifact misuse (score fingerprints disagree). Diagnostics go to
//! stderr; result files are written via temp-and-rename, so a failed run
//! never leaves a partial artifact at the output path.

mod commands;
mod sidecar;

use std::path::PathBuf;

use clafr_core::synth::SynthConfig;
use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Parser)]
#[command(name = "clafr", version, about = "Post-hoc OOD detection from classifier weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the class-known subspace from a weight matrix.
    Decompose(DecomposeArgs),
    /// Score feature (or logit) rows with one detection method.
    Score(ScoreArgs),
    /// Compute AUROC and FPR-at-TPR tables from score files.
    Eval(EvalArgs),
    /// Sweep the alpha cutoff on the seeded synthetic benchmark.
    Ablate(AblateArgs),
    /// Timed method comparison, synthetic or manifest-driven.
    Bench(BenchArgs),
    /// Write the seeded synthetic dataset as tensor files plus a manifest.
    GenSynth(GenSynthArgs),
}

#[derive(Args)]
struct DecomposeArgs {
    /// Classifier weight matrix, a D×C tensor file.
    #[arg(long)]
    weights: PathBuf,
    /// Cumulative explained-variance cutoff in (0, 1].
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    /// Fixed subspace rank overriding the alpha rule.
    #[arg(long)]
    m: Option<usize>,
    /// Output path for the D×m basis; a `.meta` sidecar lands next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Rows to score, N×D. For msp/energy/maxlogit without --weights the
    /// file is read as precomputed logit rows (N×C) instead.
    #[arg(long)]
    features: PathBuf,
    /// Subspace basis written by `decompose`; its sidecar must sit next to
    /// it. clafr only.
    #[arg(long)]
    subspace: Option<PathBuf>,
    /// Weight matrix. clafr builds the subspace from it; logit methods
    /// multiply features by it.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Explained-variance cutoff used with --weights (default 0.9).
    #[arg(long)]
    alpha: Option<f64>,
    /// Project raw feature norms instead of unit-normalized ones. clafr only.
    #[arg(long)]
    no_normalize: bool,
    /// One of clafr, msp, energy, maxlogit, knn.
    #[arg(long, default_value = "clafr")]
    method: String,
    /// Training-feature bank, N_tr×D. Required by knn, meaningless elsewhere.
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Neighbor count for knn (default 10).
    #[arg(long)]
    k: Option<usize>,
    /// Output path for the score vector; fingerprint sidecar lands next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// In-distribution score vector.
    #[arg(long)]
    id_scores: PathBuf,
    /// One or more OOD score vectors; each becomes a table row named by its
    /// file stem. More than one adds an Average row.
    #[arg(long, num_args = 1.., required = true)]
    ood_scores: Vec<PathBuf>,
    /// True-positive-rate target for the FPR operating point.
    #[arg(long, default_value_t = 0.95)]
    tpr: f64,
    /// Output path for the report CSV; the aligned table goes to stdout.
    #[arg(long)]
    out: PathBuf,
}

/// Synthetic-dataset shape flags shared by ablate, bench, and gen-synth.
/// Defaults mirror the library's seeded default configuration.
#[derive(Args)]
struct SynthFlags {
    /// Feature dimension D.
    #[arg(long, default_value_t = SynthConfig::default().d)]
    dim: usize,
    /// Number of ID classes C.
    #[arg(long, default_value_t = SynthConfig::default().c)]
    classes: usize,
    /// Training rows (the KNN bank size).
    #[arg(long, default_value_t = SynthConfig::default().n_train)]
    n_train: usize,
    /// ID evaluation rows.
    #[arg(long, default_value_t = SynthConfig::default().n_id_test)]
    n_id_test: usize,
    /// OOD evaluation rows.
    #[arg(long, default_value_t = SynthConfig::default().n_ood_test)]
    n_ood_test: usize,
    /// Class-mean distance from the origin.
    #[arg(long, default_value_t = SynthConfig::default().class_sep)]
    class_sep: f64,
    /// OOD-cluster displacement, orthogonal to the class-mean span.
    #[arg(long, default_value_t = SynthConfig::default().ood_shift)]
    ood_shift: f64,
    /// Isotropic noise scale around every cluster mean.
    #[arg(long, default_value_t = SynthConfig::default().noise_sigma)]
    noise_sigma: f64,
}

impl SynthFlags {
    fn config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            d: self.dim,
            c: self.classes,
            n_train: self.n_train,
            n_id_test: self.n_id_test,
            n_ood_test: self.n_ood_test,
            class_sep: self.class_sep,
            ood_shift: self.ood_shift,
            noise_sigma: self.noise_sigma,
        }
    }
}

#[derive(Args)]
struct AblateArgs {
    /// Comma-separated alpha values, strictly increasing, each in (0, 1].
    #[arg(long)]
    alphas: String,
    /// Dataset seed.
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    seed: u64,
    #[command(flatten)]
    synth: SynthFlags,
    /// Output path for the sweep CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Run against real exported tensors named by a manifest file instead
    /// of the synthetic generator.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Synthetic mode: dataset seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated methods to time.
    #[arg(long, default_value = "clafr,msp,energy,maxlogit,knn")]
    methods: String,
    /// Alpha cutoff for clafr in synthetic mode (default 0.9). Manifest
    /// mode takes alpha from the manifest.
    #[arg(long)]
    alpha: Option<f64>,
    /// Timing repetitions per measurement; the median is reported.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Synthetic mode: comma-separated training-set sizes to sweep.
    #[arg(long)]
    ntr: Option<String>,
    #[command(flatten)]
    synth: SynthFlags,
    /// Output path for the timing CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenSynthArgs {
    /// Dataset seed. Required: generated fixtures should never depend on
    /// an implicit default.
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    synth: SynthFlags,
    /// Directory for the tensor files and manifest; created if missing.
    #[arg(long)]
    out_dir: PathBuf,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Decompose(args) => commands::decompose(args),
        Command::Score(args) => commands::score(args),
        Command::Eval(args) => commands::eval(args),
        Command::Ablate(args) => commands::ablate(args),
        Command::Bench(args) => commands::bench(args),
        Command::GenSynth(args) => commands::gen_synth(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(err.code());
    }
}
