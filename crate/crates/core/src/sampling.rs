//! Entrywise Bernoulli sampling, Phase 2 sampling plans and noisy observation.

use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::leverage::EstimatedScores;
use crate::linalg::Matrix;
use crate::rng;

/// Observed index set, strictly sorted in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSet {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl IndexSet {
    /// Sorts and deduplicates `pairs`; every index must lie in `[0, n)`.
    pub fn from_pairs(n: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n || j >= n) {
            return Err(invalid(format!("index ({i}, {j}) out of range for n={n}")));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(IndexSet { n, pairs })
    }

    pub fn empty(n: usize) -> Self {
        IndexSet { n, pairs: Vec::new() }
    }

    pub fn full(n: usize) -> Self {
        IndexSet { n, pairs: (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.binary_search(&(i, j)).is_ok()
    }

    /// `|Omega| / n^2`.
    pub fn fraction(&self) -> f64 {
        self.len() as f64 / (self.n * self.n) as f64
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        assert_eq!(self.n, other.n, "index sets over different dimensions");
        let (a, b) = (&self.pairs, &other.pairs);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut x, mut y) = (0, 0);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => {
                    out.push(a[x]);
                    x += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[y]);
                    y += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[x]);
                    x += 1;
                    y += 1;
                }
            }
        }
        out.extend_from_slice(&a[x..]);
        out.extend_from_slice(&b[y..]);
        IndexSet { n: self.n, pairs: out }
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.pairs.iter().all(|&(i, j)| other.contains(i, j))
    }

    pub fn is_disjoint_from(&self, other: &IndexSet) -> bool {
        self.pairs.iter().all(|&(i, j)| !other.contains(i, j))
    }

    /// Dense 0/1 mask.
    pub fn mask(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for &(i, j) in &self.pairs {
            m[(i, j)] = 1.0;
        }
        m
    }
}

/// Observed values aligned with an [`IndexSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub indices: IndexSet,
    pub values: Vec<f64>,
    pub noise_sigma: f64,
    /// Sum of squared realized noise over the sampled entries.
    pub noise_energy: f64,
}

impl SampleSet {
    pub fn new(indices: IndexSet, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(invalid(format!("{} indices but {} values", indices.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sample values must be finite"));
        }
        Ok(SampleSet { indices, values, noise_sigma: 0.0, noise_energy: 0.0 })
    }

    pub fn n(&self) -> usize {
        self.indices.n()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Observed values on their positions, zeros elsewhere.
    pub fn zero_filled(&self) -> Matrix {
        let n = self.n();
        let mut y = Matrix::zeros(n, n);
        for (&(i, j), &v) in self.indices.pairs().iter().zip(&self.values) {
            y[(i, j)] = v;
        }
        y
    }

    /// Writes `i,j,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,value")?;
        for (&(i, j), &v) in self.indices.pairs().iter().zip(&self.values) {
            writeln!(w, "{i},{j},{}", crate::io::fmt_f64(v))?;
        }
        Ok(())
    }

    /// Reads `i,j,value` rows; a non-numeric first line is treated as a header.
    pub fn read_csv<R: BufRead>(r: R, n: usize) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected `i,j,value`", lineno + 1)));
            }
            let parsed = (fields[0].parse::<usize>(), fields[1].parse::<usize>(), fields[2].parse::<f64>());
            match parsed {
                (Ok(i), Ok(j), Ok(v)) => rows.push((i, j, v)),
                _ if lineno == 0 => continue,
                _ => return Err(Error::Parse(format!("line {}: cannot parse `{line}`", lineno + 1))),
            }
        }
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if rows.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Parse("duplicate index in sample file".into()));
        }
        let idx = IndexSet::from_pairs(n, rows.iter().map(|r| (r.0, r.1)).collect())?;
        SampleSet::new(idx, rows.into_iter().map(|r| r.2).collect())
    }
}

/// Entrywise observation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub probs: Matrix,
    /// Scale found by budget calibration; `None` for fixed-formula plans.
    pub beta: Option<f64>,
    pub target_mean: f64,
    /// Expected-count shortfall when the budget cannot be met even with every
    /// eligible entry at probability one.
    pub shortfall: Option<f64>,
}

impl SamplingPlan {
    pub fn n(&self) -> usize {
        self.probs.nrows()
    }

    /// Expected number of sampled entries.
    pub fn expected_count(&self) -> f64 {
        self.probs.sum()
    }

    /// Dense `n x n` CSV dump.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_matrix_csv(w, &self.probs)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("probability must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Each entry independently with probability `p`.
pub fn bernoulli_uniform(n: usize, p: f64, seed: u64) -> Result<IndexSet> {
    check_probability(p)?;
    let pairs = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| rng::entry_uniform(seed, i, j) < p)
        .collect();
    Ok(IndexSet { n, pairs })
}

/// Entry `(i, j)` independently with probability `plan.probs[(i, j)]`.
pub fn bernoulli_plan(plan: &SamplingPlan, seed: u64) -> IndexSet {
    let n = plan.n();
    let probs = &plan.probs;
    let pairs = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| rng::entry_uniform(seed, i, j) < probs[(i, j)])
        .collect();
    IndexSet { n, pairs }
}

/// `P[i,j] = min(1, 3 C2 r log^2(n) / n * (mu_hat[i] + nu_hat[j]))`.
pub fn build_phase2_plan_theoretical(est: &EstimatedScores, r: usize, n: usize, c2: f64) -> Result<SamplingPlan> {
    check_estimates(est, n)?;
    let scale = 3.0 * c2 * r as f64 * (n as f64).ln().powi(2) / n as f64;
    let probs = Matrix::from_fn(n, n, |i, j| (scale * (est.mu_hat[i] + est.nu_hat[j])).min(1.0));
    let target_mean = probs.mean();
    Ok(SamplingPlan { probs, beta: None, target_mean, shortfall: None })
}

fn check_estimates(est: &EstimatedScores, n: usize) -> Result<()> {
    if est.mu_hat.len() != n || est.nu_hat.len() != n {
        return Err(invalid(format!("estimated scores must have length n={n}")));
    }
    if est.mu_hat.iter().chain(&est.nu_hat).any(|x| !x.is_finite() || *x < 0.0) {
        return Err(invalid("estimated scores must be finite and non-negative"));
    }
    Ok(())
}

const BISECTION_REL_TOL: f64 = 1e-6;
const BISECTION_MAX_ITERS: usize = 200;

/// Budget-calibrated Phase 2 plan.
///
/// `P[i,j] = min(1, beta * (mu_hat[i] + nu_hat[j]))` off `omega1`, zero on it,
/// with `beta` chosen so that `sum P = q n^2 / 2`. When the eligible entries
/// cannot reach the target even at probability one, they are all set to one
/// and the missing expected count is recorded in `shortfall`.
pub fn build_phase2_plan_budgeted(est: &EstimatedScores, omega1: &IndexSet, q: f64, n: usize) -> Result<SamplingPlan> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid(format!("q must lie in (0, 1], got {q}")));
    }
    check_estimates(est, n)?;
    if omega1.n() != n {
        return Err(invalid("phase 1 index set has the wrong dimension"));
    }

    let mask = omega1.mask();
    let weights = Matrix::from_fn(n, n, |i, j| {
        if mask[(i, j)] != 0.0 {
            0.0
        } else {
            est.mu_hat[i] + est.nu_hat[j]
        }
    });
    let eligible = weights.iter().filter(|&&w| w > 0.0).count();
    if eligible == 0 {
        return Err(Error::CannotCalibrate("every eligible entry has zero estimated score".into()));
    }

    let target = q * (n * n) as f64 / 2.0;
    let target_mean = q / 2.0;
    if eligible as f64 <= target {
        let probs = weights.map(|w| if w > 0.0 { 1.0 } else { 0.0 });
        return Ok(SamplingPlan {
            probs,
            beta: Some(f64::INFINITY),
            target_mean,
            shortfall: Some(target - eligible as f64),
        });
    }

    let mass = |beta: f64| weights.iter().map(|&w| (beta * w).min(1.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while mass(hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let m = mass(mid);
        if (m - target).abs() <= BISECTION_REL_TOL * target {
            lo = mid;
            hi = mid;
            break;
        }
        if m < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = refine_linear(&weights, target, lo, hi);

    let probs = weights.map(|w| (beta * w).min(1.0));
    Ok(SamplingPlan { probs, beta: Some(beta), target_mean, shortfall: None })
}

/// Exact solve of the piecewise-linear budget equation when `[lo, hi]` does
/// not cross a clipping kink; otherwise the bisection midpoint.
fn refine_linear(weights: &Matrix, target: f64, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let clipped = |beta: f64| weights.iter().filter(|&&w| w > 0.0 && beta * w >= 1.0).count();
    if clipped(lo) != clipped(hi) {
        return mid;
    }
    let (mut saturated, mut free) = (0.0, 0.0);
    for &w in weights.iter() {
        if w > 0.0 && mid * w >= 1.0 {
            saturated += 1.0;
        } else {
            free += w;
        }
    }
    let exact = (target - saturated) / free;
    if exact.is_finite() && exact > 0.0 && clipped(exact) == clipped(mid) {
        exact
    } else {
        mid
    }
}

/// Reads `M` on `idx`, adding `sigma * g` with `g` standard normal per entry.
pub fn sample_entries(m: &Matrix, idx: &IndexSet, sigma: f64, seed: u64) -> Result<SampleSet> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    if m.nrows() != idx.n() || m.ncols() != idx.n() {
        return Err(invalid("matrix and index set dimensions differ"));
    }
    let mut energy = 0.0;
    let values = idx
        .pairs()
        .iter()
        .map(|&(i, j)| {
            if sigma == 0.0 {
                return m[(i, j)];
            }
            let e = sigma * rng::entry_normal(seed, i, j);
            energy += e * e;
            m[(i, j)] + e
        })
        .collect();
    Ok(SampleSet { indices: idx.clone(), values, noise_sigma: sigma, noise_energy: energy })
}
