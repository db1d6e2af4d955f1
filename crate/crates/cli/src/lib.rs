//! Command-line front end: runs refinement schemes on instances, batches of
//! seeded instances, and replays certificate artifacts.

pub mod certify;
pub mod commands;
pub mod error;
pub mod report;
pub mod source;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "sddcp", version, about = "Inner SOC approximations of completely positive programs")]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scheme on one instance.
    Solve(SolveArgs),
    /// Run strategies over a seeded batch of instances.
    Bench(BenchArgs),
    /// Re-check a certificate written by `solve --cert-out`.
    Certify(CertifyArgs),
}

/// Exactly one instance source.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Instance file in the JSON instance format.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Standard quadratic program: a graph spec (Motzkin–Straus form) or random:N:MODE:SEED.
    #[arg(long)]
    pub sqp: Option<String>,
    /// Stability number of a graph spec.
    #[arg(long = "stable-set")]
    pub stable_set: Option<String>,
    /// Clique number of a graph spec, posed as the stability number of its complement.
    #[arg(long)]
    pub clique: Option<String>,
}

impl SourceArgs {
    pub fn source(&self) -> source::Source {
        use source::Source;
        match (&self.instance, &self.sqp, &self.stable_set, &self.clique) {
            (Some(p), ..) => Source::Instance(p.clone()),
            (_, Some(s), ..) => Source::Sqp(s.clone()),
            (_, _, Some(s), _) => Source::StableSet(s.clone()),
            (.., Some(s)) => Source::Clique(s.clone()),
            _ => unreachable!("clap enforces one source"),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SchemeArgs {
    /// Maximum number of solves (strategy default when omitted).
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub vertex_cap: usize,
    /// Relative weight below which atoms are not proposed as vertices.
    #[arg(long, default_value_t = 1e-5)]
    pub threshold: f64,
    /// ℓ1 distance under which vertices are merged.
    #[arg(long, default_value_t = 1e-6)]
    pub prune_delta: f64,
    /// Stall window (strategy default when omitted).
    #[arg(long)]
    pub stall_window: Option<usize>,
    /// Add a random simplex point per iteration (max and max1).
    #[arg(long)]
    pub rescue: bool,
    /// Restart from the Δ-partition with k = 2 when the base graph is infeasible.
    #[arg(long)]
    pub fallback: bool,
    /// Give each vertex its own weight variable.
    #[arg(long)]
    pub vertex_atoms: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solver feasibility and gap tolerance (overrides SDDCP_BACKEND_TOL).
    #[arg(long)]
    pub backend_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// max, max1, adaptive, forgetfulness or delta-partition-K.
    #[arg(long, default_value = "forgetfulness")]
    pub strategy: String,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// dnn, oracle or none.
    #[arg(long, default_value = "none")]
    pub reference: String,
    /// Per-iteration trace as CSV.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Rank-one certificate of the best iterate as JSON.
    #[arg(long)]
    pub cert_out: Option<PathBuf>,
    /// Run report as one JSON line.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// random:N:M:COUNT:SEED or sqp-random:N:MODE:COUNT:SEED.
    #[arg(long)]
    pub family: String,
    /// Comma-separated strategies.
    #[arg(long, alias = "strategy", default_value = "forgetfulness")]
    pub strategies: String,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// dnn, oracle or none.
    #[arg(long, default_value = "dnn")]
    pub reference: String,
    /// Worker threads; instances run concurrently, each scheme run is sequential.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Per-run reports, one JSON object per line.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Per-run reports as CSV.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
    /// Mean time and gap per strategy as CSV.
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
    /// value/reference ratios per run as CSV.
    #[arg(long)]
    pub ratios_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Certificate written by `solve --cert-out`.
    #[arg(long)]
    pub cert: PathBuf,
    #[command(flatten)]
    pub source: SourceArgs,
}
