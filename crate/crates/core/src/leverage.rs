//! Leverage scores, coherence, the row/column-norm estimator and the
//! sufficient-sampling-probability calculators built on sorted scores.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{Matrix, Svd};

/// Row scores `mu` and column scores `nu` of a rank-`r` matrix.
///
/// `mu[i] = (n/r) * ||U[i,:]||^2` and `nu[j] = (n/r) * ||V[j,:]||^2`; each
/// vector sums to `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageScores {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub r: usize,
    pub n: usize,
}

impl LeverageScores {
    /// Row scores in non-increasing order (ties by ascending index).
    pub fn mu_sorted(&self) -> Vec<f64> {
        sorted_desc(&self.mu)
    }

    pub fn nu_sorted(&self) -> Vec<f64> {
        sorted_desc(&self.nu)
    }

    /// Copy with both vectors sorted in non-increasing order.
    pub fn sorted(&self) -> LeverageScores {
        LeverageScores { mu: self.mu_sorted(), nu: self.nu_sorted(), r: self.r, n: self.n }
    }
}

/// Scores estimated from a zero-filled partial observation of the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedScores {
    pub mu_hat: Vec<f64>,
    pub nu_hat: Vec<f64>,
    pub kappa_used: f64,
    pub p_used: f64,
}

/// Constants and cutoffs for the sample-complexity calculators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Failure tolerance, in `(0, 1/3]`.
    pub tau: f64,
    pub l: usize,
    pub d1: usize,
    pub d2: usize,
    /// Power-law decay exponent of the largest scores.
    pub t: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig { c1: 1.0, c2: 1.0, c3: 1.0, tau: 1.0 / 3.0, l: 1, d1: 1, d2: 1, t: 1.0 }
    }
}

impl BoundConfig {
    fn check_tau(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0 / 3.0) {
            return Err(invalid(format!("tau must lie in (0, 1/3], got {}", self.tau)));
        }
        Ok(())
    }
}

/// Stable descending sort; equal scores keep ascending index order.
pub fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx.into_iter().map(|k| v[k]).collect()
}

/// Exact scores from the thin SVD of `m`; the rank is the number of singular
/// values above `rank_tol * sigma_1`.
pub fn exact_leverage_scores(m: &Matrix, rank_tol: f64) -> Result<LeverageScores> {
    if m.nrows() != m.ncols() {
        return Err(invalid(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().all(|&x| x == 0.0) {
        return Err(invalid("leverage scores of the zero matrix are undefined"));
    }
    let n = m.nrows();
    let svd = Svd::new(m);
    let r = svd.rank(rank_tol);
    let scale = n as f64 / r as f64;
    let row_scores = |f: &Matrix| -> Vec<f64> {
        (0..n).map(|i| scale * (0..r).map(|c| f[(i, c)].powi(2)).sum::<f64>()).collect()
    };
    Ok(LeverageScores { mu: row_scores(&svd.u), nu: row_scores(&svd.v), r, n })
}

/// Coherence: the largest row or column score.
pub fn coherence(scores: &LeverageScores) -> f64 {
    scores.mu.iter().chain(&scores.nu).copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Row/column-norm estimator applied to the zero-filled Phase 1 matrix `y`:
/// `mu_hat[i] = n kappa^2 ||Y[i,:]||^2 / ||Y||_F^2`, and likewise for columns.
pub fn estimate_leverage_scores(y: &Matrix, kappa: f64, p: f64) -> Result<EstimatedScores> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(invalid(format!("kappa must be positive and finite, got {kappa}")));
    }
    let total = y.norm_squared();
    if total == 0.0 {
        return Err(Error::EmptySample);
    }
    let n = y.nrows() as f64;
    let factor = n * kappa * kappa / total;
    let mu_hat = y.row_iter().map(|row| factor * row.norm_squared()).collect();
    let nu_hat = y.column_iter().map(|col| factor * col.norm_squared()).collect();
    Ok(EstimatedScores { mu_hat, nu_hat, kappa_used: kappa, p_used: p })
}

fn order_stat(sorted: &[f64], k: usize) -> f64 {
    // one-based; past-the-end statistics are zero
    if k == 0 {
        return 0.0;
    }
    sorted.get(k - 1).copied().unwrap_or(0.0)
}

fn head_sq_sum(sorted: &[f64], k: usize) -> f64 {
    sorted.iter().take(k).map(|x| x * x).sum()
}

/// `(r/n) sum_{j<=d1} nu_(j)^2 + nu_(d1+1) + (r/n) sum_{i<=d2} mu_(i)^2 + mu_(d2+1)`
fn tail_bracket(mu: &[f64], nu: &[f64], r: usize, n: usize, d1: usize, d2: usize) -> f64 {
    let rn = r as f64 / n as f64;
    rn * head_sq_sum(nu, d1) + order_stat(nu, d1 + 1) + rn * head_sq_sum(mu, d2) + order_stat(mu, d2 + 1)
}

fn log2n(n: usize) -> f64 {
    (n as f64).ln().powi(2)
}

/// Unclipped Phase 1 probability that guarantees the top-`L` score sandwich.
pub fn lemma1_bound(scores: &LeverageScores, r: usize, n: usize, kappa: f64, cfg: &BoundConfig) -> Result<f64> {
    cfg.check_tau()?;
    for (name, v) in [("L", cfg.l), ("d1", cfg.d1), ("d2", cfg.d2)] {
        if v < 1 || v > n {
            return Err(invalid(format!("{name} must lie in [1, {n}], got {v}")));
        }
    }
    let s = scores.sorted();
    let bracket = tail_bracket(&s.mu, &s.nu, r, n, cfg.d1, cfg.d2);
    let nf = n as f64;
    Ok(16.0 * cfg.l as f64 / cfg.tau * kappa.powi(4) * r as f64 * nf * bracket / (nf * nf))
}

/// [`lemma1_bound`] clipped to 1.
pub fn lemma1_required_p(scores: &LeverageScores, r: usize, n: usize, kappa: f64, cfg: &BoundConfig) -> Result<f64> {
    Ok(lemma1_bound(scores, r, n, kappa, cfg)?.min(1.0))
}

/// Value of the main sufficient condition at a single cutoff `L`.
pub fn theorem1_term(sorted: &LeverageScores, r: usize, n: usize, kappa: f64, cfg: &BoundConfig, l: usize) -> f64 {
    let gate = (l as f64 / cfg.tau * kappa.powi(4)).max(log2n(n));
    cfg.c3 * (r as f64 / n as f64) * gate * tail_bracket(&sorted.mu, &sorted.nu, r, n, l, l)
}

/// Minimum of [`theorem1_term`] over `L in [0, n]` and the smallest minimizer.
/// The returned probability is not clipped.
pub fn theorem1_sufficient_p(
    scores: &LeverageScores,
    r: usize,
    n: usize,
    kappa: f64,
    cfg: &BoundConfig,
) -> Result<(f64, usize)> {
    cfg.check_tau()?;
    let s = scores.sorted();
    let mut best = (f64::INFINITY, 0);
    for l in 0..=n {
        let v = theorem1_term(&s, r, n, kappa, cfg, l);
        if v < best.0 {
            best = (v, l);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorollaryKind {
    /// Largest scores decay like `i^-(1+T)`; exponent taken from `BoundConfig::t`.
    PowerLaw { eta: f64 },
    /// A fixed number `l` of scores within `log^2 n` of the largest ones.
    FewLarge { mu1: f64, nu1: f64, l: usize },
}

/// Unclipped closed-form Phase 1 probability for the two special score profiles.
pub fn corollary_bound(kind: CorollaryKind, r: usize, n: usize, kappa: f64, cfg: &BoundConfig) -> Result<f64> {
    cfg.check_tau()?;
    let (rf, nf) = (r as f64, n as f64);
    match kind {
        CorollaryKind::PowerLaw { eta } => {
            let floor = (nf / rf).sqrt();
            if eta < floor {
                return Err(invalid(format!("power-law profile requires eta >= sqrt(n/r) = {floor}, got {eta}")));
            }
            if !(cfg.t > 0.0) {
                return Err(invalid(format!("power-law profile requires T > 0, got {}", cfg.t)));
            }
            let exponent = (3.0 + 2.0 * cfg.t) / (1.0 + cfg.t);
            Ok(8.0 * cfg.c3 / cfg.tau * kappa.powi(4) * rf * rf / (nf * nf) * eta.powf(exponent))
        }
        CorollaryKind::FewLarge { mu1, nu1, l } => {
            let ceiling = nf / (rf * log2n(n));
            if mu1.max(nu1) > ceiling {
                return Err(invalid(format!(
                    "few-large profile requires max(mu1, nu1) <= n/(r log^2 n) = {ceiling}, got {}",
                    mu1.max(nu1)
                )));
            }
            let lf = l as f64;
            let gate = (lf / cfg.tau * kappa.powi(4) / log2n(n)).max(1.0);
            Ok(cfg.c3 * (rf / nf) * gate * (lf + 1.0) * (nu1 + mu1))
        }
    }
}

/// [`corollary_bound`] clipped to 1.
pub fn corollary_p(kind: CorollaryKind, r: usize, n: usize, kappa: f64, cfg: &BoundConfig) -> Result<f64> {
    Ok(corollary_bound(kind, r, n, kappa, cfg)?.min(1.0))
}

/// Expected total sample count of the two-phase scheme with Phase 1 probability `p`:
/// `2 p n^2 + 6 C2 r n kappa^2 log^2 n`.
pub fn expected_samples_bound(p: f64, r: usize, n: usize, kappa: f64, c2: f64) -> f64 {
    let nf = n as f64;
    2.0 * p * nf * nf + 6.0 * c2 * r as f64 * nf * kappa * kappa * log2n(n)
}

/// Whether `1/n^4 <= C2 (mu_i + nu_j) r log^2 n / n` holds for every pair.
pub fn check_n4_condition(scores: &LeverageScores, r: usize, n: usize, c2: f64) -> bool {
    let min_mu = scores.mu.iter().copied().fold(f64::INFINITY, f64::min);
    let min_nu = scores.nu.iter().copied().fold(f64::INFINITY, f64::min);
    let nf = n as f64;
    1.0 / nf.powi(4) <= c2 * (min_mu + min_nu) * r as f64 * log2n(n) / nf
}
