//! Nuclear-norm completion by two-block ADMM.
//!
//! Solves `min ||X||_*` subject to `X in C`, split as `X = Z` with `Z in C`:
//!
//! ```text
//! X+ = svt(Z - U, 1/rho)
//! H  = alpha X+ + (1 - alpha) Z
//! Z+ = proj_C(H + U)
//! U+ = U + H - Z+
//! ```
//!
//! `C` is either the affine set `{Z : Z[i,j] = y_ij on Omega}` or the ball
//! `{Z : ||P_Omega(Z) - y||_F^2 <= delta}`. Primal residual is `||X+ - Z+||_F`
//! and dual residual `rho ||Z+ - Z||_F`. The returned matrix is the last `X`
//! projected onto `C`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{Matrix, Svd};
use crate::sampling::SampleSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Residual tolerances; the solver normalizes the observations to an
    /// estimated unit Frobenius norm, so these are relative to the data scale.
    pub tol_primal: f64,
    pub tol_dual: f64,
    /// Splitting penalty on the normalized problem; shrinkage threshold is `1/rho`.
    pub rho: f64,
    /// Relaxation factor in `[1, 1.8]`.
    pub over_relaxation: f64,
    /// Residual balancing: rescale `rho` by 2 when one residual exceeds the
    /// other by a factor of 10.
    pub adaptive_rho: bool,
}

impl SolverOptions {
    /// Defaults with tolerances `1e-7 * n`.
    pub fn for_dimension(n: usize) -> Self {
        SolverOptions { tol_primal: 1e-7 * n as f64, tol_dual: 1e-7 * n as f64, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.tol_primal > 0.0 && self.tol_dual > 0.0) {
            return Err(invalid("solver tolerances must be positive"));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if !(1.0..=1.8).contains(&self.over_relaxation) {
            return Err(invalid(format!("over_relaxation must lie in [1, 1.8], got {}", self.over_relaxation)));
        }
        Ok(())
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 1000,
            tol_primal: 1e-5,
            tol_dual: 1e-5,
            rho: 50.0,
            over_relaxation: 1.8,
            adaptive_rho: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub m_hat: Matrix,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    pub nuclear_norm: f64,
}

/// Proximal operator of `threshold * ||.||_*`: soft-thresholds the singular values.
///
/// Works from the eigendecomposition of the smaller Gram matrix: with
/// `X^T X = V diag(s^2) V^T`, the result is `X V diag((s - t)/s) V^T` over the
/// singular values above the threshold.
pub fn svt(x: &Matrix, threshold: f64) -> Matrix {
    assert!(threshold >= 0.0, "threshold must be non-negative");
    if threshold == 0.0 {
        return x.clone();
    }
    if x.nrows() < x.ncols() {
        return svt(&x.transpose(), threshold).transpose();
    }
    let gram = x.transpose() * x;
    let k = gram.ncols();
    let eig = faer::Mat::<f64>::from_fn(k, k, |i, j| gram[(i, j)])
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition did not converge");
    let (values, vectors) = (eig.S().column_vector(), eig.U());

    let kept: Vec<(usize, f64)> = (0..k)
        .filter_map(|c| {
            let s = values[c].max(0.0).sqrt();
            (s > threshold).then(|| (c, (s - threshold) / s))
        })
        .collect();
    if kept.is_empty() {
        return Matrix::zeros(x.nrows(), x.ncols());
    }
    let v = Matrix::from_fn(k, kept.len(), |i, c| vectors[(i, kept[c].0)]);
    let mut xv = x * &v;
    for (c, &(_, factor)) in kept.iter().enumerate() {
        xv.column_mut(c).scale_mut(factor);
    }
    xv * v.transpose()
}

pub fn nuclear_norm(x: &Matrix) -> f64 {
    Svd::new(x).singular_values.sum()
}

#[derive(Debug, Clone, Copy)]
enum Constraint {
    Equality,
    Ball { delta: f64 },
}

fn check_samples(samples: &SampleSet, n: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(invalid("cannot complete from an empty sample"));
    }
    if samples.n() != n {
        return Err(invalid(format!("sample dimension {} differs from n={n}", samples.n())));
    }
    Ok(())
}

/// `min ||X||_*` subject to `X[i,j] = y_ij` on the sampled entries.
pub fn complete_exact(samples: &SampleSet, n: usize, opts: &SolverOptions) -> Result<CompletionResult> {
    check_samples(samples, n)?;
    opts.validate()?;
    Ok(admm(samples, Constraint::Equality, opts))
}

/// `min ||X||_*` subject to `||P_Omega(X) - y||_F^2 <= delta`.
pub fn complete_noisy(samples: &SampleSet, delta: f64, n: usize, opts: &SolverOptions) -> Result<CompletionResult> {
    check_samples(samples, n)?;
    opts.validate()?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be finite and >= 0, got {delta}")));
    }
    Ok(admm(samples, Constraint::Ball { delta }, opts))
}

fn project(v: &mut Matrix, samples: &SampleSet, constraint: Constraint) {
    let pairs = samples.indices.pairs();
    match constraint {
        Constraint::Equality => {
            for (&(i, j), &y) in pairs.iter().zip(&samples.values) {
                v[(i, j)] = y;
            }
        }
        Constraint::Ball { delta } => {
            let dist2: f64 = pairs.iter().zip(&samples.values).map(|(&(i, j), &y)| (v[(i, j)] - y).powi(2)).sum();
            if dist2 <= delta {
                return;
            }
            let shrink = (delta / dist2).sqrt();
            for (&(i, j), &y) in pairs.iter().zip(&samples.values) {
                v[(i, j)] = y + shrink * (v[(i, j)] - y);
            }
        }
    }
}

/// Scale that maps the observations to an estimated unit-Frobenius-norm matrix.
fn data_scale(samples: &SampleSet) -> f64 {
    let n = samples.n() as f64;
    let energy: f64 = samples.values.iter().map(|v| v * v).sum();
    let s = (energy * n * n / samples.len() as f64).sqrt();
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

fn admm(samples: &SampleSet, constraint: Constraint, opts: &SolverOptions) -> CompletionResult {
    // work on data normalized to unit estimated norm; tolerances are relative to it
    let scale = data_scale(samples);
    let mut normalized = samples.clone();
    normalized.values.iter_mut().for_each(|v| *v /= scale);
    let constraint = match constraint {
        Constraint::Ball { delta } => Constraint::Ball { delta: delta / (scale * scale) },
        c => c,
    };
    let samples = &normalized;

    let alpha = opts.over_relaxation;
    let mut rho = opts.rho;
    let mut z = samples.zero_filled();
    let mut u = Matrix::zeros(z.nrows(), z.ncols());
    let mut x = z.clone();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=opts.max_iters {
        iterations = it;
        x = svt(&(&z - &u), 1.0 / rho);

        let relaxed = if alpha == 1.0 { x.clone() } else { &x * alpha + &z * (1.0 - alpha) };
        let mut z_next = &relaxed + &u;
        project(&mut z_next, samples, constraint);

        u += &relaxed - &z_next;
        primal = (&x - &z_next).norm();
        dual = rho * (&z_next - &z).norm();
        z = z_next;

        if primal <= opts.tol_primal && dual <= opts.tol_dual {
            converged = true;
            break;
        }
        if opts.adaptive_rho {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u *= 0.5;
            } else if dual > 10.0 * primal {
                rho *= 0.5;
                u *= 2.0;
            }
        }
    }

    // report the feasible point nearest the last iterate
    project(&mut x, samples, constraint);
    x *= scale;
    let nuclear_norm = nuclear_norm(&x);
    CompletionResult { m_hat: x, iterations, primal_residual: primal, dual_residual: dual, converged, nuclear_norm }
}

/// Largest `|X[i,j] - y_ij|` over the sampled entries.
pub fn max_constraint_violation(x: &Matrix, samples: &SampleSet) -> f64 {
    samples
        .indices
        .pairs()
        .iter()
        .zip(&samples.values)
        .map(|(&(i, j), &y)| (x[(i, j)] - y).abs())
        .fold(0.0, f64::max)
}

/// `||P_Omega(X) - y||_F^2`.
pub fn sampled_residual_energy(x: &Matrix, samples: &SampleSet) -> f64 {
    samples.indices.pairs().iter().zip(&samples.values).map(|(&(i, j), &y)| (x[(i, j)] - y).powi(2)).sum()
}
