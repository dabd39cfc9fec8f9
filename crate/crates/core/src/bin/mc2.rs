use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use mc2::genmat::{preset, TestMatrix};
use mc2::harness::{run_experiment, ExperimentConfig, RESULTS_FILE};
use mc2::io::{read_matrix_csv, write_matrix_csv};
use mc2::leverage::{
    coherence, exact_leverage_scores, expected_samples_bound, lemma1_bound, theorem1_sufficient_p, BoundConfig,
};
use mc2::linalg::{Svd, RANK_TOL};
use mc2::pipeline::{mc2_paper_sample, mc2_practical_sample, observe, umc_sample, PaperParams};
use mc2::sampling::SampleSet;
use mc2::solver::{complete_exact, complete_noisy, max_constraint_violation, sampled_residual_energy, SolverOptions};
use mc2::{Error, Result};

#[derive(Parser)]
#[command(name = "mc2", version, about = "Two-phase leveraged matrix completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a preset test matrix as CSV plus a JSON sidecar.
    Gen {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        r: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact leverage scores, coherence and condition number of a CSV matrix.
    Leverage {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = RANK_TOL)]
        rank_tol: f64,
    },
    /// Sample-complexity calculators for a CSV matrix.
    Bounds {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        tau: f64,
        /// Phase 1 rate used for the expected-sample bound.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Draw a sample set from a CSV matrix with one of the sampling schemes.
    Sample {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_enum, default_value_t = Scheme::Mc2)]
        scheme: Scheme,
        /// Average rate `q`; the theoretical scheme uses it as its Phase 1 rate `p`.
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the Phase 2 probability matrix.
        #[arg(long)]
        dump_plan: Option<PathBuf>,
    },
    /// Nuclear-norm completion of a sample CSV (`i,j,value`).
    Complete {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        n: usize,
        /// Squared residual budget; equality constraints when absent.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Run a configured experiment grid and write CSV and SVG outputs.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Output directory; overrides `outputs` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Umc,
    Mc2,
    Mc2Paper,
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen { preset: name, n, r, seed, out } => gen(&name, n, r, seed, &out),
        Command::Leverage { matrix, rank_tol } => leverage(&matrix, rank_tol),
        Command::Bounds { matrix, tau, p } => bounds(&matrix, tau, p),
        Command::Sample { matrix, scheme, q, sigma, seed, c2, out, dump_plan } => {
            sample(&matrix, scheme, q, sigma, seed, c2, &out, dump_plan.as_deref())
        }
        Command::Complete { samples, n, delta, out, max_iters } => complete(&samples, n, delta, &out, max_iters),
        Command::Experiment { config, threads, out } => experiment(&config, threads, out),
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(value)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn load_matrix(path: &Path) -> Result<TestMatrix> {
    let values = read_matrix_csv(BufReader::new(File::open(path)?))?;
    if values.nrows() != values.ncols() {
        return Err(Error::InvalidArgument(format!("expected a square matrix, got {:?}", values.shape())));
    }
    TestMatrix::from_values(values)
}

fn gen(name: &str, n: usize, r: usize, seed: u64, out: &Path) -> Result<()> {
    let m = preset(name, n, r, seed)?;
    let mut w = BufWriter::new(File::create(out)?);
    write_matrix_csv(&mut w, &m.values)?;
    w.flush()?;
    let sidecar = json!({
        "n": m.n,
        "r": m.r,
        "kappa": m.kappa,
        "eta": m.eta(),
        "preset": name,
        "seed": seed,
        "spectrum": m.spectrum,
    });
    std::fs::write(out.with_extension("json"), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(())
}

fn leverage(path: &Path, rank_tol: f64) -> Result<()> {
    let values = read_matrix_csv(BufReader::new(File::open(path)?))?;
    let scores = exact_leverage_scores(&values, rank_tol)?;
    let svd = Svd::new(&values);
    let s = svd.singular_values.as_slice();
    let kappa = s[0] / s[scores.r - 1];
    print_json(&json!({
        "n": scores.n,
        "r": scores.r,
        "mu": scores.mu,
        "nu": scores.nu,
        "eta": coherence(&scores),
        "kappa": kappa,
    }))
}

fn bounds(path: &Path, tau: f64, p: Option<f64>) -> Result<()> {
    let m = load_matrix(path)?;
    let cfg = BoundConfig { tau, ..BoundConfig::default() };
    let lemma1 = lemma1_bound(&m.exact_scores, m.r, m.n, m.kappa, &cfg)?;
    let (thm1, cutoff) = theorem1_sufficient_p(&m.exact_scores, m.r, m.n, m.kappa, &cfg)?;
    let mut report = json!({
        "n": m.n,
        "r": m.r,
        "kappa": m.kappa,
        "eta": m.eta(),
        "lemma1_p": lemma1,
        "lemma1_p_clipped": lemma1.min(1.0),
        "theorem1_p": thm1,
        "theorem1_p_clipped": thm1.min(1.0),
        "theorem1_cutoff": cutoff,
    });
    if let Some(p) = p {
        report["expected_samples_bound"] = json!(expected_samples_bound(p, m.r, m.n, m.kappa, cfg.c2));
    }
    print_json(&report)
}

#[allow(clippy::too_many_arguments)]
fn sample(
    path: &Path,
    scheme: Scheme,
    q: f64,
    sigma: f64,
    seed: u64,
    c2: f64,
    out: &Path,
    dump_plan: Option<&Path>,
) -> Result<()> {
    let m = load_matrix(path)?;
    let (omega, plan) = match scheme {
        Scheme::Umc => (umc_sample(m.n, q, seed)?, None),
        Scheme::Mc2 => {
            let draw = mc2_practical_sample(&m, q, sigma, seed)?.ok_or(Error::EmptySample)?;
            (draw.omega, Some(draw.plan))
        }
        Scheme::Mc2Paper => {
            let params = PaperParams { r: m.r, kappa: m.kappa, c2 };
            let draw = mc2_paper_sample(&m, q, &params, sigma, seed)?.ok_or(Error::EmptySample)?;
            (draw.omega, Some(draw.plan))
        }
    };
    let samples = observe(&m, &omega, sigma, seed)?;
    let mut w = BufWriter::new(File::create(out)?);
    samples.write_csv(&mut w)?;
    w.flush()?;
    if let Some(plan_path) = dump_plan {
        let plan = plan.ok_or_else(|| Error::InvalidArgument("uniform sampling has no Phase 2 plan".into()))?;
        let mut w = BufWriter::new(File::create(plan_path)?);
        plan.write_csv(&mut w)?;
        w.flush()?;
    }
    print_json(&json!({
        "count": samples.len(),
        "fraction": samples.indices.fraction(),
        "noise_energy": samples.noise_energy,
    }))
}

fn complete(path: &Path, n: usize, delta: Option<f64>, out: &Path, max_iters: Option<usize>) -> Result<()> {
    let samples = SampleSet::read_csv(BufReader::new(File::open(path)?), n)?;
    let mut opts = SolverOptions::for_dimension(n);
    if let Some(k) = max_iters {
        opts.max_iters = k;
    }
    let result = match delta {
        Some(d) => complete_noisy(&samples, d, n, &opts)?,
        None => complete_exact(&samples, n, &opts)?,
    };
    let mut w = BufWriter::new(File::create(out)?);
    write_matrix_csv(&mut w, &result.m_hat)?;
    w.flush()?;
    print_json(&json!({
        "samples": samples.len(),
        "iterations": result.iterations,
        "converged": result.converged,
        "primal_residual": result.primal_residual,
        "dual_residual": result.dual_residual,
        "nuclear_norm": result.nuclear_norm,
        "max_constraint_violation": max_constraint_violation(&result.m_hat, &samples),
        "sampled_residual_energy": sampled_residual_energy(&result.m_hat, &samples),
    }))
}

fn experiment(path: &Path, threads: usize, out: Option<PathBuf>) -> Result<()> {
    let mut config = ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?;
    if let Some(dir) = out {
        config.outputs = dir;
    }
    let rows = run_experiment(&config, threads.max(1))?;
    eprintln!("{} points written to {}", rows.len(), config.outputs.join(RESULTS_FILE).display());
    Ok(())
}
