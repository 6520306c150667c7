//! Command-line flags and their translation into a [`JobSpec`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};
use crate::job::{read_text, JobSpec, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "curvkit", version, about = "Curvature prescription, conformal spectra and invariant checks")]
pub struct Cli {
    /// Output directory (the CURVKIT_OUT environment variable takes precedence).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed of the randomized suites.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    /// `disk`, `annulus`, `pants` or an OFF file.
    #[arg(long, default_value = "disk")]
    pub mesh: String,
    /// Resolution of the built-in meshes.
    #[arg(long, default_value_t = 16)]
    pub res: usize,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Metric JSON file (grid shape plus metric components).
    #[arg(long)]
    pub metric: Option<PathBuf>,
    /// Built-in background when no file is given: hneg, hneg-discrete, flat, flat2.
    #[arg(long, default_value = "hneg")]
    pub fixture: String,
    /// Cells per axis of the built-in background.
    #[arg(long, default_value_t = 8)]
    pub cells: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flat conformal metric on a surface with prescribed geodesic curvature.
    #[command(name = "solve-kappa")]
    SolveKappa {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Target geodesic curvature (expression in x, y, r, θ).
        #[arg(long, allow_hyphen_values = true, default_value = "1")]
        h: String,
        /// CSV with one target value per vertex in its last column.
        #[arg(long)]
        h_file: Option<PathBuf>,
    },
    /// Conformal metric with prescribed Gauss curvature and geodesic boundary.
    #[command(name = "solve-K")]
    SolveGauss {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Target Gauss curvature (expression in x, y, r, θ).
        #[arg(long, allow_hyphen_values = true, default_value = "1")]
        f: String,
        #[arg(long)]
        f_file: Option<PathBuf>,
    },
    /// Prescribe boundary mean curvature (and optionally scalar curvature) on a slab.
    Prescribe {
        #[command(flatten)]
        metric: MetricArgs,
        /// Target mean curvature on the boundary (expression in x, y, z).
        #[arg(long, allow_hyphen_values = true, default_value = "-1 + 0.01*sin(2*pi*x)")]
        h: String,
        /// Target scalar curvature; switches to a direct Newton solve.
        #[arg(long, allow_hyphen_values = true)]
        r: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// First eigenvalues of the conformal Laplacian pair.
    Spectrum {
        #[command(flatten)]
        metric: MetricArgs,
        /// interior, boundary or both.
        #[arg(long, default_value = "both")]
        problem: String,
    },
    /// Sign class of the conformal structure: positive, negative or zero.
    Classify {
        #[command(flatten)]
        metric: MetricArgs,
    },
    /// Monotone rearrangement of f towards g on the circle or an interval.
    Approx {
        #[arg(long, allow_hyphen_values = true, default_value = "sin(theta)")]
        f: String,
        #[arg(long, allow_hyphen_values = true, default_value = "0")]
        g: String,
        #[arg(long, default_value_t = 5.0)]
        p: f64,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        /// lp or fractional.
        #[arg(long, default_value = "lp")]
        mode: String,
        /// `circle` or `a,b`.
        #[arg(long, default_value = "circle")]
        domain: String,
    },
    /// Total scalar curvature of a warped product over the disk.
    Warp {
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 2)]
        q: usize,
        /// Bump amplitude (1 is the constant profile).
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Search the smallest amplitude reaching this total instead.
        #[arg(long, allow_hyphen_values = true)]
        target: Option<f64>,
        /// Radial resolution of the grid cross-check (0 skips it).
        #[arg(long, default_value_t = 0)]
        grid: usize,
    },
    /// Run every invariant suite.
    Verify,
    /// Run a JSON job file.
    Run { job: PathBuf },
    /// Write a built-in background metric as JSON.
    ExportFixture {
        #[command(flatten)]
        metric: MetricArgs,
        output: PathBuf,
    },
}

fn mesh_job(mut job: JobSpec, m: MeshArgs) -> JobSpec {
    job = if ["disk", "annulus", "pants"].contains(&m.mesh.as_str()) {
        job.param("mesh", m.mesh).param("res", m.res)
    } else {
        job.input("mesh", m.mesh)
    };
    if let Some(t) = m.tol {
        job = job.param("tol", t);
    }
    if let Some(k) = m.max_iter {
        job = job.param("max_iter", k);
    }
    job
}

fn metric_job(job: JobSpec, m: MetricArgs) -> JobSpec {
    match m.metric {
        Some(path) => job.input("metric", path),
        None => job.param("fixture", m.fixture).param("cells", m.cells),
    }
}

fn target(job: JobSpec, key: &str, expr: String, file: Option<PathBuf>) -> JobSpec {
    match file {
        Some(path) => job.input(key, path),
        None => job.param(key, expr),
    }
}

/// What `main` should do with the parsed flags.
pub enum Action {
    Run(JobSpec),
    Export { job: JobSpec, output: PathBuf },
}

pub fn to_action(cli: Cli) -> CliResult<Action> {
    let name = match &cli.command {
        Command::SolveKappa { .. } => "solve-kappa",
        Command::SolveGauss { .. } => "solve-K",
        Command::Prescribe { .. } => "prescribe",
        Command::Spectrum { .. } => "spectrum",
        Command::Classify { .. } => "classify",
        Command::Approx { .. } => "approx",
        Command::Warp { .. } => "warp",
        Command::Verify => "verify",
        Command::Run { .. } => "run",
        Command::ExportFixture { .. } => "export-fixture",
    };
    let mut job = JobSpec::new(name);
    job.seed = cli.seed;
    job.out_dir = cli.out.clone();
    let job = match cli.command {
        Command::SolveKappa { mesh, h, h_file } => target(mesh_job(job, mesh), "h", h, h_file),
        Command::SolveGauss { mesh, f, f_file } => target(mesh_job(job, mesh), "f", f, f_file),
        Command::Prescribe { metric, h, r, tol, max_iter } => {
            let mut j = metric_job(job, metric).param("h", h);
            if let Some(r) = r {
                j = j.param("r", r);
            }
            if let Some(t) = tol {
                j = j.param("tol", t);
            }
            if let Some(k) = max_iter {
                j = j.param("max_iter", k);
            }
            j
        }
        Command::Spectrum { metric, problem } => metric_job(job, metric).param("problem", problem),
        Command::Classify { metric } => metric_job(job, metric),
        Command::Approx { f, g, p, eps, mode, domain } => job
            .param("f", f)
            .param("g", g)
            .param("p", p)
            .param("eps", eps)
            .param("mode", mode)
            .param("domain", domain),
        Command::Warp { p, q, lambda, target, grid } => {
            let j = job.param("p", p).param("q", q).param("grid", grid);
            match target {
                Some(t) => j.param("target", t),
                None => j.param("lambda", lambda),
            }
        }
        Command::Verify => job,
        Command::Run { job: path } => {
            let mut j = JobSpec::from_json(&read_text(&path)?)?;
            if cli.out.is_some() {
                j.out_dir = cli.out;
            }
            j
        }
        Command::ExportFixture { metric, output } => {
            if metric.metric.is_some() {
                return Err(CliError::Usage("export-fixture takes --fixture, not --metric".into()));
            }
            return Ok(Action::Export { job: metric_job(job, metric), output });
        }
    };
    Ok(Action::Run(job))
}
