//! Dense symmetric linear algebra, numerical differentiation, and spectral
//! density estimation.
//!
//! Inference paths use only the Cholesky factorization; the symmetric
//! eigensolver exists as a test oracle for positive semi-definiteness.

use nalgebra::DMatrix;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

/// Symmetric matrix, row-major storage, symmetric by contract.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1);
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Build from an entry function; `f` is evaluated once per unordered pair.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        SymMatrix::from_fn(n, |i, j| rows[i][j])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both (i, j) and (j, i).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n)
            .map(|i| self.get(i, i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// Lower-triangular Cholesky factor with the diagonal inflation that was
/// needed to factorize.
#[derive(Clone, Debug)]
pub struct CholFactor {
    n: usize,
    lower: Vec<f64>,
    jitter_used: f64,
}

impl CholFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// Entry (i, j) of the lower factor, zero above the diagonal.
    pub fn lower(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.lower[i * self.n + j]
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut lower = vec![0.0; n * n];
        for i in 0..n {
            lower[i * n + i] = 1.0;
        }
        CholFactor {
            n,
            lower,
            jitter_used: 0.0,
        }
    }
}

fn try_cholesky(m: &SymMatrix, jitter: f64) -> Option<Vec<f64>> {
    let n = m.n;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j) + if i == j { jitter } else { 0.0 };
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Factorize a symmetric positive-definite matrix, escalating through the
/// jitter ladder {0, 1e-8·d, 1e-7·d, ..., 1e-4·d} (d = max diagonal entry)
/// with steps above `max_jitter` skipped.
pub fn cholesky(m: &SymMatrix, max_jitter: f64) -> Result<CholFactor> {
    let d = m.max_diag().max(0.0);
    let ladder = std::iter::once(0.0).chain((0..5).map(|k| 1e-8 * 10f64.powi(k) * d));
    let mut tried_max = 0.0;
    for jitter in ladder {
        if jitter > max_jitter {
            break;
        }
        tried_max = jitter;
        if let Some(lower) = try_cholesky(m, jitter) {
            return Ok(CholFactor {
                n: m.n,
                lower,
                jitter_used: jitter,
            });
        }
    }
    Err(Error::NotPositiveDefinite {
        max_jitter: tried_max,
    })
}

/// Full-ladder convenience wrapper.
pub fn cholesky_default(m: &SymMatrix) -> Result<CholFactor> {
    cholesky(m, f64::INFINITY)
}

/// Solve (L·Lᵀ)x = b.
pub fn solve_psd(f: &CholFactor, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != f.n {
        return Err(Error::DimensionMismatch {
            expected: f.n,
            got: b.len(),
        });
    }
    let n = f.n;
    let l = &f.lower;
    // forward: L z = b
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[i * n + k] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    // backward: Lᵀ x = z
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[k * n + i] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    Ok(z)
}

/// Forward substitution only: solve L z = b.
pub fn solve_lower(f: &CholFactor, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != f.n {
        return Err(Error::DimensionMismatch {
            expected: f.n,
            got: b.len(),
        });
    }
    let n = f.n;
    let l = &f.lower;
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[i * n + k] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    Ok(z)
}

/// Explicit inverse (L·Lᵀ)⁻¹, column by column.
pub fn inverse_psd(f: &CholFactor) -> Result<SymMatrix> {
    let n = f.n;
    let mut inv = SymMatrix::zeros(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = solve_psd(f, &e)?;
        e[j] = 0.0;
        for i in 0..n {
            inv.data[i * n + j] = col[i];
        }
    }
    // symmetrize against roundoff
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (inv.data[i * n + j] + inv.data[j * n + i]);
            inv.data[i * n + j] = v;
            inv.data[j * n + i] = v;
        }
    }
    Ok(inv)
}

/// log|L·Lᵀ| = 2·Σ log L_ii.
pub fn log_det(f: &CholFactor) -> f64 {
    (0..f.n).map(|i| f.lower[i * f.n + i].ln()).sum::<f64>() * 2.0
}

/// Smallest eigenvalue of a symmetric matrix. Test oracle only; inference
/// never calls this.
pub fn min_eigenvalue(m: &SymMatrix) -> f64 {
    let eig = m.to_dmatrix().symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue; companion oracle for relative PSD tolerances.
pub fn max_eigenvalue(m: &SymMatrix) -> f64 {
    let eig = m.to_dmatrix().symmetric_eigen();
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Central finite differences with per-coordinate step h·(1 + |xᵢ|).
pub fn finite_diff_grad(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    assert!(h > 0.0);
    let mut grad = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let hi = h * (1.0 + x[i].abs());
        xp[i] = x[i] + hi;
        let fp = f(&xp);
        xp[i] = x[i] - hi;
        let fm = f(&xp);
        xp[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFiniteEvaluation { index: i });
        }
        grad.push((fp - fm) / (2.0 * hi));
    }
    Ok(grad)
}

/// Empirical spectral density sample: frequency points (cycles per input
/// unit) with nonnegative power weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSampleSet {
    pub freqs: Vec<f64>,
    pub powers: Vec<f64>,
}

/// Periodogram of a uniformly sampled signal. The mean is removed before
/// the transform, powers are normalized so that the total power over the
/// returned nonnegative-frequency bins equals the variance of the demeaned
/// signal (Parseval; interior bins count their negative-frequency mirror).
pub fn periodogram(x: &[f64], y: &[f64]) -> Result<SpectralSampleSet> {
    let n = x.len();
    if n < 4 {
        return Err(Error::TooFewPoints { need: 4, got: n });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let dx = x[1] - x[0];
    if !(dx.abs() > 0.0) {
        return Err(Error::NonUniformGrid { deviation: 1.0 });
    }
    for w in x.windows(2) {
        let dev = ((w[1] - w[0]) - dx).abs() / dx.abs();
        if dev > 1e-9 {
            return Err(Error::NonUniformGrid { deviation: dev });
        }
    }

    let mean = y.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = y
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let half = n / 2; // highest nonnegative-frequency bin index
    let mut freqs = Vec::with_capacity(half + 1);
    let mut powers = Vec::with_capacity(half + 1);
    let norm = 1.0 / (n as f64 * n as f64);
    for k in 0..=half {
        let mut p = buf[k].norm_sqr() * norm;
        // double interior bins to fold in the conjugate negative frequency
        if k != 0 && !(n % 2 == 0 && k == half) {
            p *= 2.0;
        }
        freqs.push(k as f64 / (n as f64 * dx));
        powers.push(p);
    }
    Ok(SpectralSampleSet { freqs, powers })
}
