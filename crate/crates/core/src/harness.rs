//! Experiment runner: recovery curves over a sampling grid, per-column error
//! profiles and leverage-ratio reports, written as CSV and SVG.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{invalid, Error, Result};
use crate::genmat::{preset, TestMatrix};
use crate::io::fmt_f64;
use crate::leverage::{EstimatedScores, LeverageScores};
use crate::linalg::Matrix;
use crate::pipeline::{phase1_estimate, run_mc2_paper, run_mc2_practical, run_umc, Method, PaperParams, TrialResult};
use crate::plot;
use crate::rng::mix64;
use crate::solver::SolverOptions;

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

/// `0.05, 0.10, ..., 0.60`
pub fn default_q_grid() -> Vec<f64> {
    (1..=12).map(|k| k as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub presets: Vec<String>,
    pub methods: Vec<Method>,
    #[serde(default = "default_q_grid")]
    pub q_grid: Vec<f64>,
    pub trials: usize,
    /// One noise level or a list of them; each becomes its own set of rows.
    #[serde(default = "default_sigma", deserialize_with = "one_or_many")]
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_solver")]
    pub solver: SolverOptions,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_r")]
    pub r: usize,
    /// Phase 2 constant of the theoretical variant.
    #[serde(default = "default_c2")]
    pub c2: f64,
    /// When set, also write per-column error and leverage-ratio profiles at this budget.
    #[serde(default)]
    pub profile_q: Option<f64>,
    /// Plug the true condition number into the profile's score estimate instead of 1.
    #[serde(default)]
    pub profile_use_kappa: bool,
}

fn default_sigma() -> Vec<f64> {
    vec![0.0]
}

fn default_solver() -> SolverOptions {
    SolverOptions::for_dimension(default_n())
}

fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

fn default_n() -> usize {
    100
}

fn default_r() -> usize {
    5
}

fn default_c2() -> f64 {
    1.0
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

impl ExperimentConfig {
    /// Config with library defaults for everything but the required fields.
    pub fn new(presets: &[&str], methods: &[Method], trials: usize) -> Self {
        ExperimentConfig {
            presets: presets.iter().map(|s| s.to_string()).collect(),
            methods: methods.to_vec(),
            q_grid: default_q_grid(),
            trials,
            sigma: default_sigma(),
            master_seed: 0,
            solver: default_solver(),
            outputs: default_outputs(),
            n: default_n(),
            r: default_r(),
            c2: default_c2(),
            profile_q: None,
            profile_use_kappa: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.presets.is_empty() || self.methods.is_empty() {
            return Err(invalid("presets and methods must be nonempty"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.q_grid.is_empty() {
            return Err(invalid("q_grid must be nonempty"));
        }
        if let Some(q) = self.q_grid.iter().chain(&self.profile_q).find(|q| !(**q > 0.0 && **q <= 1.0)) {
            return Err(invalid(format!("sampling rates must lie in (0, 1], got {q}")));
        }
        if self.sigma.is_empty() || self.sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(invalid("sigma must be a nonempty list of finite values >= 0"));
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(invalid("c2 must be positive"));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub preset: String,
    pub method: Method,
    pub q: f64,
    pub sigma: f64,
    pub trials: usize,
    pub success_rate: f64,
    pub mean_rel_error: f64,
    pub mean_realized_fraction: f64,
    /// Summed trial time; written to the timings file, not to `results.csv`.
    pub wall_time_seconds: f64,
}

impl ResultsRow {
    pub const CSV_HEADER: &'static str =
        "preset,method,q,sigma,trials,success_rate,mean_rel_error,mean_realized_fraction";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.preset,
            self.method,
            fmt_f64(self.q),
            fmt_f64(self.sigma),
            self.trials,
            fmt_f64(self.success_rate),
            fmt_f64(self.mean_rel_error),
            fmt_f64(self.mean_realized_fraction)
        )
    }
}

/// Canonical position of a method, used in seed derivation so that seeds do
/// not depend on the order methods are listed in a config.
fn method_index(m: Method) -> u64 {
    match m {
        Method::Umc => 0,
        Method::MC2Practical => 1,
        Method::MC2Paper => 2,
    }
}

pub fn trial_seed(master: u64, preset_idx: usize, method: Method, q_idx: usize, trial_idx: usize) -> u64 {
    mix64(&[master, preset_idx as u64, method_index(method), q_idx as u64, trial_idx as u64])
}

/// Matrix seed for a preset; every method and budget sees the same matrix.
pub fn matrix_seed(master: u64, preset_idx: usize) -> u64 {
    mix64(&[master, preset_idx as u64, u64::MAX])
}

/// Runs one trial of `method` at budget `q`. The theoretical variant uses `p = q/2`.
pub fn run_trial(
    m: &TestMatrix,
    method: Method,
    q: f64,
    sigma: f64,
    c2: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<TrialResult> {
    match method {
        Method::Umc => run_umc(m, q, sigma, seed, opts),
        Method::MC2Practical => run_mc2_practical(m, q, sigma, seed, opts),
        Method::MC2Paper => {
            let params = PaperParams { r: m.r, kappa: m.kappa, c2 };
            run_mc2_paper(m, q / 2.0, &params, sigma, seed, opts)
        }
    }
}

/// Aggregates trials of a single grid point.
pub fn aggregate(preset: &str, method: Method, q: f64, sigma: f64, trials: &[(TrialResult, f64)]) -> ResultsRow {
    let k = trials.len() as f64;
    ResultsRow {
        preset: preset.to_string(),
        method,
        q,
        sigma,
        trials: trials.len(),
        success_rate: trials.iter().filter(|(t, _)| t.success).count() as f64 / k,
        mean_rel_error: trials.iter().map(|(t, _)| t.rel_error).sum::<f64>() / k,
        mean_realized_fraction: trials.iter().map(|(t, _)| t.realized_fraction).sum::<f64>() / k,
        wall_time_seconds: trials.iter().map(|(_, s)| s).sum(),
    }
}

/// Runs every (preset, method, q, sigma) point without touching the file system.
///
/// Rows come back ordered by preset, sigma, method, then q, independent of
/// thread count.
pub fn run_points(config: &ExperimentConfig, threads: usize) -> Result<Vec<ResultsRow>> {
    config.validate()?;
    let matrices = load_matrices(config)?;

    struct Job {
        preset: usize,
        sigma: usize,
        method: Method,
        q: usize,
        trial: usize,
    }
    let mut jobs = Vec::new();
    for preset in 0..config.presets.len() {
        for sigma in 0..config.sigma.len() {
            for &method in &config.methods {
                for q in 0..config.q_grid.len() {
                    for trial in 0..config.trials {
                        jobs.push(Job { preset, sigma, method, q, trial });
                    }
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("cannot build thread pool: {e}")))?;
    let outcomes: Vec<Result<(TrialResult, f64)>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let start = Instant::now();
                let seed = trial_seed(config.master_seed, job.preset, job.method, job.q, job.trial);
                let t = run_trial(
                    &matrices[job.preset],
                    job.method,
                    config.q_grid[job.q],
                    config.sigma[job.sigma],
                    config.c2,
                    seed,
                    &config.solver,
                )?;
                Ok((t, start.elapsed().as_secs_f64()))
            })
            .collect()
    });
    let outcomes: Vec<(TrialResult, f64)> = outcomes.into_iter().collect::<Result<_>>()?;

    Ok(jobs
        .chunks(config.trials)
        .zip(outcomes.chunks(config.trials))
        .map(|(js, ts)| {
            let j = &js[0];
            aggregate(&config.presets[j.preset], j.method, config.q_grid[j.q], config.sigma[j.sigma], ts)
        })
        .collect())
}

fn load_matrices(config: &ExperimentConfig) -> Result<Vec<TestMatrix>> {
    config
        .presets
        .iter()
        .enumerate()
        .map(|(k, name)| preset(name, config.n, config.r, matrix_seed(config.master_seed, k)))
        .collect()
}

/// Runs the experiment and writes `results.csv`, timings, plots and optional
/// profiles into `config.outputs`.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<Vec<ResultsRow>> {
    config.validate()?;
    let dir = &config.outputs;
    fs::create_dir_all(dir)?;
    let rows = run_points(config, threads)?;
    write_results_csv(&dir.join(RESULTS_FILE), &rows)?;
    write_timings_csv(&dir.join(TIMINGS_FILE), &rows)?;
    emit_plots(&rows, dir)?;
    if let Some(q) = config.profile_q {
        write_profiles(config, q)?;
    }
    Ok(rows)
}

pub fn results_csv_string(rows: &[ResultsRow]) -> String {
    let mut s = String::from(ResultsRow::CSV_HEADER);
    s.push('\n');
    for row in rows {
        s.push_str(&row.csv_line());
        s.push('\n');
    }
    s
}

pub fn write_results_csv(path: &Path, rows: &[ResultsRow]) -> Result<()> {
    fs::write(path, results_csv_string(rows))?;
    Ok(())
}

fn write_timings_csv(path: &Path, rows: &[ResultsRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "preset,method,q,sigma,wall_time_seconds")?;
    for r in rows {
        writeln!(f, "{},{},{},{},{:.3}", r.preset, r.method, fmt_f64(r.q), fmt_f64(r.sigma), r.wall_time_seconds)?;
    }
    f.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnErrorProfile {
    /// `||M_hat[:,j] - M[:,j]||^2 / ||M[:,j]||^2`, zero for zero columns.
    pub errors: Vec<f64>,
    pub col_norms_sq: Vec<f64>,
    pub zero_column: Vec<bool>,
}

pub fn column_error_profile(m_hat: &Matrix, m: &Matrix) -> Result<ColumnErrorProfile> {
    if m_hat.shape() != m.shape() {
        return Err(invalid("column profile needs matrices of equal shape"));
    }
    let mut profile = ColumnErrorProfile { errors: vec![], col_norms_sq: vec![], zero_column: vec![] };
    for (a, b) in m_hat.column_iter().zip(m.column_iter()) {
        let norm = b.norm_squared();
        let zero = norm == 0.0;
        profile.errors.push(if zero { 0.0 } else { (a - b).norm_squared() / norm });
        profile.col_norms_sq.push(norm);
        profile.zero_column.push(zero);
    }
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    /// `(mu_i, mu_hat_i / mu_i)` for every row with nonzero true score.
    pub rows: Vec<(f64, f64)>,
    pub cols: Vec<(f64, f64)>,
    pub skipped_rows: usize,
    pub skipped_cols: usize,
}

pub fn leverage_ratio_report(est: &EstimatedScores, exact: &LeverageScores) -> RatioReport {
    fn pairs(hat: &[f64], truth: &[f64]) -> (Vec<(f64, f64)>, usize) {
        let kept: Vec<_> = truth.iter().zip(hat).filter(|(t, _)| **t > 0.0).map(|(t, h)| (*t, h / t)).collect();
        let skipped = truth.len() - kept.len();
        (kept, skipped)
    }
    let (rows, skipped_rows) = pairs(&est.mu_hat, &exact.mu);
    let (cols, skipped_cols) = pairs(&est.nu_hat, &exact.nu);
    RatioReport { rows, cols, skipped_rows, skipped_cols }
}

/// One solve per (preset, method) at `q` plus a Phase 1 score estimate, written
/// as `<preset>_columns.csv` and `<preset>_ratios.csv`.
fn write_profiles(config: &ExperimentConfig, q: f64) -> Result<()> {
    let matrices = load_matrices(config)?;
    let sigma = config.sigma[0];
    for (k, (name, m)) in config.presets.iter().zip(&matrices).enumerate() {
        let mut columns = Vec::new();
        for &method in &config.methods {
            let seed = mix64(&[trial_seed(config.master_seed, k, method, usize::MAX, 0), 0xC0]);
            let t = run_trial(m, method, q, sigma, config.c2, seed, &config.solver)?;
            columns.push((method, t.column_errors.unwrap_or_else(|| vec![1.0; m.n])));
        }
        let mut f = std::io::BufWriter::new(fs::File::create(config.outputs.join(format!("{name}_columns.csv")))?);
        write!(f, "column,col_norm_sq")?;
        for (method, _) in &columns {
            write!(f, ",{method}")?;
        }
        writeln!(f)?;
        let norms: Vec<f64> = m.values.column_iter().map(|c| c.norm_squared()).collect();
        for (j, norm) in norms.iter().enumerate() {
            write!(f, "{j},{}", fmt_f64(*norm))?;
            for (_, errs) in &columns {
                write!(f, ",{}", fmt_f64(errs[j]))?;
            }
            writeln!(f)?;
        }
        f.flush()?;

        let kappa = if config.profile_use_kappa { m.kappa } else { 1.0 };
        let seed = mix64(&[config.master_seed, k as u64, 0x5A]);
        let (_, _, est) = phase1_estimate(m, q / 2.0, kappa, sigma, seed)?;
        let Some(est) = est else { continue };
        let report = leverage_ratio_report(&est, &m.exact_scores);
        let mut f = std::io::BufWriter::new(fs::File::create(config.outputs.join(format!("{name}_ratios.csv")))?);
        writeln!(f, "axis,score,ratio")?;
        for (axis, list) in [("row", &report.rows), ("col", &report.cols)] {
            for (s, ratio) in list {
                writeln!(f, "{axis},{},{}", fmt_f64(*s), fmt_f64(*ratio))?;
            }
        }
        f.flush()?;
    }
    Ok(())
}

/// Writes `<preset>_recovery.svg` and `<preset>_error.svg` for every preset in
/// `rows`; two-phase methods are drawn solid and UMC dashed.
pub fn emit_plots(rows: &[ResultsRow], dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(invalid("no results to plot"));
    }
    let mut presets: Vec<&str> = Vec::new();
    for r in rows {
        if !presets.contains(&r.preset.as_str()) {
            presets.push(&r.preset);
        }
    }
    let mut written = Vec::new();
    for name in presets {
        let mine: Vec<&ResultsRow> = rows.iter().filter(|r| r.preset == name).collect();
        let mut keys: Vec<(Method, u64)> = Vec::new();
        for r in &mine {
            let key = (r.method, r.sigma.to_bits());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let multi_sigma = keys.iter().any(|k| k.1 != keys[0].1);
        let series = |value: fn(&ResultsRow) -> f64| -> Vec<plot::Series> {
            keys.iter()
                .enumerate()
                .map(|(k, &(method, sigma))| {
                    let label = if multi_sigma {
                        format!("{method} sigma={}", f64::from_bits(sigma))
                    } else {
                        method.to_string()
                    };
                    let points = mine
                        .iter()
                        .filter(|r| r.method == method && r.sigma.to_bits() == sigma)
                        .map(|r| (r.q, value(r)))
                        .collect();
                    plot::Series { label, points, dashed: method == Method::Umc, color_index: k }
                })
                .collect()
        };
        let recovery = plot::line_chart(
            &format!("{name}: probability of exact recovery"),
            "q",
            "success rate",
            &series(|r| r.success_rate),
            plot::Axis::Linear { min: 0.0, max: 1.0 },
        );
        let error = plot::line_chart(
            &format!("{name}: mean relative error"),
            "q",
            "relative error",
            &series(|r| r.mean_rel_error),
            plot::Axis::Log10,
        );
        for (suffix, svg) in [("recovery", recovery), ("error", error)] {
            let path = dir.join(format!("{name}_{suffix}.svg"));
            fs::write(&path, svg).map_err(Error::Io)?;
            written.push(path);
        }
    }
    Ok(written)
}
