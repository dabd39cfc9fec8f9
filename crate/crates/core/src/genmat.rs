//! Synthetic low-rank test matrices: the power-law family `D U S V^T D` and
//! constant-block diagonal matrices, plus the twelve named presets.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::leverage::{coherence, exact_leverage_scores, LeverageScores};
use crate::linalg::{numeric_rank, orthonormal_factor, Matrix, Svd, RANK_TOL};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conditioning {
    /// All retained singular values equal.
    WellConditioned,
    /// Singular values linearly spaced between 1 and n.
    LinSpaced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeneratorSpec {
    PowerLaw { gamma: f64, conditioning: Conditioning },
    BlockDiag { blocks: Vec<(usize, f64)> },
    Explicit,
}

#[derive(Debug, Clone)]
pub struct TestMatrix {
    pub n: usize,
    pub r: usize,
    pub values: Matrix,
    /// Nonzero singular values after normalization, non-increasing.
    pub spectrum: Vec<f64>,
    pub kappa: f64,
    pub generator: GeneratorSpec,
    pub exact_scores: LeverageScores,
    pub preset: Option<String>,
    pub seed: Option<u64>,
}

impl TestMatrix {
    /// Wraps an arbitrary dense matrix; rank, spectrum and scores are measured.
    pub fn from_values(values: Matrix) -> Result<Self> {
        Self::assemble(values, GeneratorSpec::Explicit, None)
    }

    fn assemble(values: Matrix, generator: GeneratorSpec, spectrum: Option<Vec<f64>>) -> Result<Self> {
        let exact_scores = exact_leverage_scores(&values, RANK_TOL)?;
        let spectrum = match spectrum {
            Some(s) => s,
            None => {
                let svd = Svd::new(&values);
                svd.singular_values.iter().take(exact_scores.r).copied().collect()
            }
        };
        let kappa = spectrum[0] / spectrum[spectrum.len() - 1];
        Ok(TestMatrix {
            n: values.nrows(),
            r: exact_scores.r,
            values,
            spectrum,
            kappa,
            generator,
            exact_scores,
            preset: None,
            seed: None,
        })
    }

    pub fn eta(&self) -> f64 {
        coherence(&self.exact_scores)
    }

    /// Copy scaled by `c`; scores and condition number are unchanged.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut out = Self::assemble(&self.values * c, self.generator.clone(), None)?;
        out.preset = self.preset.clone();
        out.seed = self.seed;
        Ok(out)
    }
}

/// `n x r` matrix with orthonormal columns: Gaussian fill, thin QR, positive `diag(R)`.
pub fn random_orthonormal(n: usize, r: usize, seed: u64) -> Result<Matrix> {
    if r == 0 || r > n {
        return Err(invalid(format!("need 1 <= r <= n, got n={n}, r={r}")));
    }
    let mut rng = rng::stream(seed, 0x5152);
    // column-major fill order
    let mut data = Vec::with_capacity(n * r);
    for _ in 0..n * r {
        data.push(StandardNormal.sample(&mut rng));
    }
    Ok(orthonormal_factor(Matrix::from_vec(n, r, data)))
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    (0..k).map(|t| lo + (hi - lo) * t as f64 / (k - 1) as f64).collect()
}

fn target_spectrum(conditioning: Conditioning, n: usize, k: usize) -> Vec<f64> {
    match conditioning {
        Conditioning::WellConditioned => vec![1.0; k],
        Conditioning::LinSpaced => linspace(1.0, n as f64, k),
    }
}

/// Power-law test matrix.
///
/// Forms `M' = D U S V^T D` with `D[i,i] = (i+1)^-gamma`, keeps the leading
/// `r` singular vectors of `M'`, installs the target spectrum on them and
/// normalizes to unit Frobenius norm.
pub fn make_power_law(n: usize, r: usize, gamma: f64, conditioning: Conditioning, seed: u64) -> Result<TestMatrix> {
    if r == 0 || r > n {
        return Err(invalid(format!("need n >= r >= 1, got n={n}, r={r}")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    let u = random_orthonormal(n, n, rng::mix64(&[seed, 0x55]))?;
    let v = random_orthonormal(n, n, rng::mix64(&[seed, 0x56]))?;
    let sigma = target_spectrum(conditioning, n, n);
    let d = DVector::from_fn(n, |i, _| ((i + 1) as f64).powf(-gamma));

    let svd = if gamma == 0.0 {
        // D = I: U S V^T is already an SVD; reuse it rather than picking an
        // arbitrary basis out of a degenerate spectrum
        let order: Vec<usize> = (0..n).rev().collect();
        Svd {
            u: Matrix::from_fn(n, n, |i, c| u[(i, order[c])]),
            singular_values: DVector::from_fn(n, |c, _| sigma[order[c]]),
            v: Matrix::from_fn(n, n, |j, c| v[(j, order[c])]),
        }
    } else {
        let mut us = u;
        for (c, s) in sigma.iter().enumerate() {
            us.column_mut(c).scale_mut(*s);
        }
        let mut m_prime = us * v.transpose();
        for i in 0..n {
            for j in 0..n {
                m_prime[(i, j)] *= d[i] * d[j];
            }
        }
        Svd::new(&m_prime)
    };
    let mut target = target_spectrum(conditioning, n, r);
    target.reverse();
    let norm = target.iter().map(|x| x * x).sum::<f64>().sqrt();
    let spectrum: Vec<f64> = target.iter().map(|x| x / norm).collect();
    let values = svd.recompose_with(&spectrum);

    TestMatrix::assemble(values, GeneratorSpec::PowerLaw { gamma, conditioning }, Some(spectrum)).and_then(|m| {
        if m.r != r {
            Err(invalid(format!("power-law construction lost rank: expected {r}, measured {}", m.r)))
        } else {
            Ok(m)
        }
    })
}

/// Block-diagonal matrix with constant blocks, `(size, value)` per block.
pub fn make_block_diag(n: usize, r: usize, blocks: &[(usize, f64)]) -> Result<TestMatrix> {
    if blocks.len() != r {
        return Err(invalid(format!("expected exactly r={r} blocks, got {}", blocks.len())));
    }
    let total: usize = blocks.iter().map(|b| b.0).sum();
    if total != n {
        return Err(invalid(format!("block sizes sum to {total}, expected n={n}")));
    }
    if let Some(b) = blocks.iter().find(|b| b.0 == 0 || b.1 == 0.0 || !b.1.is_finite()) {
        return Err(invalid(format!("blocks need size >= 1 and a finite nonzero value, got {b:?}")));
    }

    let mut values = Matrix::zeros(n, n);
    let mut start = 0;
    for &(size, v) in blocks {
        values.view_mut((start, start), (size, size)).fill(v);
        start += size;
    }
    let frob = values.norm();
    values /= frob;

    // singular values are |b_k v_k|
    let mut spectrum: Vec<f64> = blocks.iter().map(|&(b, v)| (b as f64 * v).abs() / frob).collect();
    spectrum.sort_by(|a, b| b.total_cmp(a));
    let m = TestMatrix::assemble(values, GeneratorSpec::BlockDiag { blocks: blocks.to_vec() }, Some(spectrum))?;
    if numeric_rank(&m.spectrum, RANK_TOL) != r || m.r != r {
        return Err(invalid(format!("block spectrum does not have rank {r}")));
    }
    Ok(m)
}

/// Splits `total` into `parts` sizes differing by at most one, larger sizes last.
fn even_split(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|k| base + usize::from(k >= parts - extra)).collect()
}

/// Block sizes with a single size-2 block first and the rest split evenly.
fn coherent_sizes(n: usize, r: usize) -> Result<Vec<usize>> {
    if r < 2 || n < 2 + 3 * (r - 1) {
        return Err(invalid(format!("coherent block preset needs r >= 2 and n >= 3r - 1, got n={n}, r={r}")));
    }
    let mut sizes = vec![2];
    sizes.extend(even_split(n - 2, r - 1));
    Ok(sizes)
}

fn linear_ramp(n: usize, r: usize, k: usize) -> f64 {
    if r == 1 {
        return 1.0;
    }
    1.0 + (n as f64 - 1.0) * k as f64 / (r as f64 - 1.0)
}

pub const PRESET_NAMES: [&str; 12] = ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "B1", "B2", "B3", "B4"];

/// Named test matrix. Power-law presets use `seed`; block presets ignore it.
///
/// | name  | family | parameters |
/// |-------|--------|------------|
/// | P1-P4 | power law, flat spectrum | gamma = 0, 0.5, 1, 2 |
/// | P5-P8 | power law, spectrum 1..n | gamma = 0, 0.5, 1, 2 |
/// | B1    | equal blocks n/r, v = 1/b | eta = 1, kappa = 1 |
/// | B2    | blocks (2, rest even), v = 1/b | eta = n/(2r), kappa = 1 |
/// | B3    | equal blocks, v ramps 1..n | eta = 1, kappa = n |
/// | B4    | blocks (2, rest even), b v ramps 1..n | eta = n/(2r), kappa = n |
pub fn preset(name: &str, n: usize, r: usize, seed: u64) -> Result<TestMatrix> {
    const GAMMAS: [f64; 4] = [0.0, 0.5, 1.0, 2.0];
    let upper = name.to_ascii_uppercase();
    let mut m = match upper.as_str() {
        "P1" | "P2" | "P3" | "P4" | "P5" | "P6" | "P7" | "P8" => {
            let k: usize = upper[1..].parse().expect("matched digit");
            let conditioning = if k <= 4 { Conditioning::WellConditioned } else { Conditioning::LinSpaced };
            make_power_law(n, r, GAMMAS[(k - 1) % 4], conditioning, seed)?
        }
        "B1" | "B3" => {
            let sizes = even_split(n, r);
            let blocks: Vec<(usize, f64)> = sizes
                .iter()
                .enumerate()
                .map(|(k, &b)| if upper == "B1" { (b, 1.0 / b as f64) } else { (b, linear_ramp(n, r, k)) })
                .collect();
            make_block_diag(n, r, &blocks)?
        }
        "B2" | "B4" => {
            let sizes = coherent_sizes(n, r)?;
            let blocks: Vec<(usize, f64)> = sizes
                .iter()
                .enumerate()
                .map(|(k, &b)| {
                    let ramp = if upper == "B2" { 1.0 } else { linear_ramp(n, r, k) };
                    (b, ramp / b as f64)
                })
                .collect();
            make_block_diag(n, r, &blocks)?
        }
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    m.preset = Some(upper);
    m.seed = Some(seed);
    Ok(m)
}
