//! End-to-end trials: uniform completion and the two-phase leveraged variants.
//!
//! Every random draw in a trial derives from the trial seed: Phase 1 mask,
//! Phase 2 mask and observation noise each get their own child seed. Noise is
//! indexed by entry, so an entry observed in Phase 1 carries the same value
//! into the final solve.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::genmat::TestMatrix;
use crate::harness::column_error_profile;
use crate::leverage::{estimate_leverage_scores, EstimatedScores};
use crate::linalg::{frobenius, Matrix};
use crate::rng::mix64;
use crate::sampling::{
    bernoulli_plan, bernoulli_uniform, build_phase2_plan_budgeted, build_phase2_plan_theoretical, sample_entries,
    IndexSet, SampleSet, SamplingPlan,
};
use crate::solver::{complete_exact, complete_noisy, SolverOptions};

/// Relative Frobenius error below which a trial counts as exact recovery.
pub const SUCCESS_THRESHOLD: f64 = 1e-4;

const SALT_PHASE1: u64 = 1;
const SALT_PHASE2: u64 = 2;
const SALT_NOISE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "UMC")]
    Umc,
    MC2Practical,
    MC2Paper,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Umc => "UMC",
            Method::MC2Practical => "MC2Practical",
            Method::MC2Paper => "MC2Paper",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "UMC" | "umc" => Ok(Method::Umc),
            "MC2Practical" | "mc2" | "mc2-practical" => Ok(Method::MC2Practical),
            "MC2Paper" | "mc2-paper" => Ok(Method::MC2Paper),
            other => Err(invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// Inputs the theoretical pipeline takes on faith: rank, condition number and
/// the Phase 2 constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaperParams {
    pub r: usize,
    pub kappa: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub method: Method,
    /// `q` for UMC and the practical variant, `p` for the theoretical one.
    pub q_or_p: f64,
    pub realized_fraction: f64,
    pub rel_error: f64,
    pub success: bool,
    pub est_scores: Option<EstimatedScores>,
    /// `||M_hat[:,j] - M[:,j]||^2 / ||M[:,j]||^2`; absent when no solve ran.
    pub column_errors: Option<Vec<f64>>,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub phase1_count: usize,
    pub phase2_count: usize,
}

/// Both index sets of a two-phase draw.
#[derive(Debug, Clone)]
pub struct TwoPhaseSample {
    pub omega1: IndexSet,
    pub omega2: IndexSet,
    pub omega: IndexSet,
    pub plan: SamplingPlan,
    pub est: EstimatedScores,
}

pub fn child_seed(seed: u64, salt: u64) -> u64 {
    mix64(&[seed, salt])
}

fn check_fraction(name: &str, q: f64) -> Result<()> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid(format!("{name} must lie in (0, 1], got {q}")));
    }
    Ok(())
}

/// Uniform Phase 1 at rate `p` and score estimates from the zero-filled sample.
///
/// Returns the index set, the observations and the estimate, or `None` for the
/// estimate when the sample is empty or identically zero.
pub fn phase1_estimate(
    m: &TestMatrix,
    p: f64,
    kappa: f64,
    sigma: f64,
    seed: u64,
) -> Result<(IndexSet, SampleSet, Option<EstimatedScores>)> {
    check_fraction("p", p)?;
    let omega1 = bernoulli_uniform(m.n, p, child_seed(seed, SALT_PHASE1))?;
    let y = observe(m, &omega1, sigma, seed)?;
    let est = match estimate_leverage_scores(&y.zero_filled(), kappa, p) {
        Ok(est) => Some(est),
        Err(crate::Error::EmptySample) => None,
        Err(e) => return Err(e),
    };
    Ok((omega1, y, est))
}

/// Index sets of the theoretical two-phase scheme, without solving.
///
/// Phase 2 samples entry `(i, j)` with probability `min(1, P[i,j] + p)`.
/// Returns `None` when Phase 1 observed nothing.
pub fn mc2_paper_sample(m: &TestMatrix, p: f64, params: &PaperParams, sigma: f64, seed: u64) -> Result<Option<TwoPhaseSample>> {
    let (omega1, _, est) = phase1_estimate(m, p, params.kappa, sigma, seed)?;
    let Some(est) = est else { return Ok(None) };
    let mut plan = build_phase2_plan_theoretical(&est, params.r, m.n, params.c2)?;
    plan.probs.apply(|x| *x = (*x + p).min(1.0));
    plan.target_mean = plan.probs.mean();
    let omega2 = bernoulli_plan(&plan, child_seed(seed, SALT_PHASE2));
    let omega = omega1.union(&omega2);
    Ok(Some(TwoPhaseSample { omega1, omega2, omega, plan, est }))
}

/// Index sets of the budgeted two-phase scheme (`p = q/2`, `kappa = 1`), without solving.
pub fn mc2_practical_sample(m: &TestMatrix, q: f64, sigma: f64, seed: u64) -> Result<Option<TwoPhaseSample>> {
    check_fraction("q", q)?;
    let p = q / 2.0;
    let (omega1, _, est) = phase1_estimate(m, p, 1.0, sigma, seed)?;
    let Some(est) = est else { return Ok(None) };
    let plan = match build_phase2_plan_budgeted(&est, &omega1, q, m.n) {
        Ok(plan) => plan,
        Err(crate::Error::CannotCalibrate(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let omega2 = bernoulli_plan(&plan, child_seed(seed, SALT_PHASE2));
    let omega = omega1.union(&omega2);
    Ok(Some(TwoPhaseSample { omega1, omega2, omega, plan, est }))
}

struct Solved {
    rel_error: f64,
    column_errors: Option<Vec<f64>>,
    converged: bool,
    iterations: usize,
}

fn failed_solve() -> Solved {
    Solved { rel_error: 1.0, column_errors: None, converged: false, iterations: 0 }
}

/// Uniform index set used by the single-phase baseline.
pub fn umc_sample(n: usize, q: f64, seed: u64) -> Result<IndexSet> {
    check_fraction("q", q)?;
    bernoulli_uniform(n, q, child_seed(seed, SALT_PHASE1))
}

/// Noisy observations of `m` on `omega` with the trial's noise draws.
pub fn observe(m: &TestMatrix, omega: &IndexSet, sigma: f64, seed: u64) -> Result<SampleSet> {
    sample_entries(&m.values, omega, sigma, child_seed(seed, SALT_NOISE))
}

fn solve(m: &TestMatrix, omega: &IndexSet, sigma: f64, seed: u64, opts: &SolverOptions) -> Result<Solved> {
    let samples = observe(m, omega, sigma, seed)?;
    if samples.is_empty() {
        return Ok(failed_solve());
    }
    let result = if sigma > 0.0 {
        complete_noisy(&samples, samples.noise_energy, m.n, opts)?
    } else {
        complete_exact(&samples, m.n, opts)?
    };
    Ok(Solved {
        rel_error: relative_error(&result.m_hat, &m.values),
        column_errors: Some(column_error_profile(&result.m_hat, &m.values)?.errors),
        converged: result.converged,
        iterations: result.iterations,
    })
}

/// `||m_hat - m||_F / ||m||_F`.
pub fn relative_error(m_hat: &Matrix, m: &Matrix) -> f64 {
    frobenius(&(m_hat - m)) / frobenius(m)
}

fn assemble(
    method: Method,
    q_or_p: f64,
    n: usize,
    seed: u64,
    counts: (usize, usize, usize),
    est: Option<EstimatedScores>,
    solved: Solved,
) -> TrialResult {
    let (phase1_count, phase2_count, total) = counts;
    TrialResult {
        method,
        q_or_p,
        realized_fraction: total as f64 / (n * n) as f64,
        rel_error: solved.rel_error,
        success: solved.rel_error < SUCCESS_THRESHOLD,
        est_scores: est,
        column_errors: solved.column_errors,
        seed,
        converged: solved.converged,
        iterations: solved.iterations,
        phase1_count,
        phase2_count,
    }
}

/// Uniform sampling at rate `q`, then nuclear-norm completion.
pub fn run_umc(m: &TestMatrix, q: f64, sigma: f64, seed: u64, opts: &SolverOptions) -> Result<TrialResult> {
    let omega = umc_sample(m.n, q, seed)?;
    let solved = solve(m, &omega, sigma, seed, opts)?;
    let count = omega.len();
    Ok(assemble(Method::Umc, q, m.n, seed, (count, 0, count), None, solved))
}

/// Theoretical two-phase scheme at Phase 1 rate `p`.
pub fn run_mc2_paper(
    m: &TestMatrix,
    p: f64,
    params: &PaperParams,
    sigma: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<TrialResult> {
    two_phase_trial(Method::MC2Paper, m, p, mc2_paper_sample(m, p, params, sigma, seed)?, sigma, seed, opts)
}

/// Budgeted two-phase scheme with average sampling rate `q`.
pub fn run_mc2_practical(m: &TestMatrix, q: f64, sigma: f64, seed: u64, opts: &SolverOptions) -> Result<TrialResult> {
    two_phase_trial(Method::MC2Practical, m, q, mc2_practical_sample(m, q, sigma, seed)?, sigma, seed, opts)
}

fn two_phase_trial(
    method: Method,
    m: &TestMatrix,
    q_or_p: f64,
    draw: Option<TwoPhaseSample>,
    sigma: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<TrialResult> {
    let Some(draw) = draw else {
        return Ok(assemble(method, q_or_p, m.n, seed, (0, 0, 0), None, failed_solve()));
    };
    let solved = solve(m, &draw.omega, sigma, seed, opts)?;
    let counts = (draw.omega1.len(), draw.omega2.len(), draw.omega.len());
    Ok(assemble(method, q_or_p, m.n, seed, counts, Some(draw.est), solved))
}
