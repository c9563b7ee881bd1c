//! Plane-wave Galerkin discretization of the shifted spectral cell form and
//! computation of Bloch bands.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dual_lattice::{FreqVector, GammaWeight, QuasiMatrix};
use crate::error::{Error, Result};
use crate::harmonics::{MatrixSpectralField, SpectralField};

/// Frequency truncation of the Galerkin basis.
#[derive(Debug, Clone)]
pub enum Truncation {
    /// Default: the certified sublevel set of a gamma weight at radius d.
    /// Only weights with exact enumeration (compact embedding certified)
    /// admit this form.
    Sublevel { weight: GammaWeight, d: f64 },
    /// Explicit symmetric set containing zero.
    Explicit(Vec<FreqVector>),
}

/// The discretized shifted-cell eigenvalue problem.
#[derive(Debug, Clone)]
pub struct BlochProblem {
    pub lambda: QuasiMatrix,
    pub a_hat: MatrixSpectralField,
    pub v_hat: SpectralField,
    pub theta: Vec<f64>,
    pub truncation: Truncation,
}

/// Bands at one Bloch frequency: ascending eigenvalues with orthonormal
/// eigenvectors over the truncation set and per-pair residuals.
#[derive(Debug, Clone)]
pub struct BandResult {
    pub theta: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DMatrix<Complex64>>,
    pub residuals: Vec<f64>,
}

impl BlochProblem {
    /// Free problem: A = I, V = 0.
    pub fn free(lambda: QuasiMatrix, theta: Vec<f64>, truncation: Truncation) -> Self {
        let m = lambda.rows();
        let n = lambda.cols();
        BlochProblem {
            lambda,
            a_hat: MatrixSpectralField::identity(m, n),
            v_hat: SpectralField::zero(m),
            theta,
            truncation,
        }
    }

    fn validate(&self) -> Result<()> {
        let m = self.lambda.rows();
        let n = self.lambda.cols();
        if self.a_hat.dim() != m || self.v_hat.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.a_hat.dim().max(self.v_hat.dim()),
            });
        }
        if self.a_hat.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.a_hat.n(),
            });
        }
        if self.theta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.theta.len(),
            });
        }
        if !self.v_hat.real_valued() {
            return Err(Error::InvalidField("potential must be real-valued".into()));
        }
        let a0 = self.a_hat.ellipticity_floor()?;
        if a0 <= 0.0 {
            return Err(Error::EllipticityViolation { a0 });
        }
        Ok(())
    }

    /// The lexicographically ordered basis frequency set.
    pub fn truncation_set(&self) -> Result<Vec<FreqVector>> {
        let m = self.lambda.rows();
        match &self.truncation {
            Truncation::Sublevel { weight, d } => {
                if weight.dim() != Some(m) {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        got: weight.dim().unwrap_or(0),
                    });
                }
                let set = match weight.enumerate_sublevel(*d, None) {
                    Ok(s) => s,
                    Err(Error::WindowRequired(msg)) => {
                        return Err(Error::TruncationNotCertified(msg))
                    }
                    Err(e) => return Err(e),
                };
                if !set.exact {
                    return Err(Error::TruncationNotCertified(
                        "sublevel enumeration is window-limited".into(),
                    ));
                }
                Ok(set.freqs)
            }
            Truncation::Explicit(freqs) => {
                if freqs.is_empty() {
                    return Err(Error::InvalidTruncation("empty set".into()));
                }
                let mut sorted = freqs.clone();
                sorted.sort();
                sorted.dedup();
                for k in &sorted {
                    if k.dim() != m {
                        return Err(Error::DimensionMismatch {
                            expected: m,
                            got: k.dim(),
                        });
                    }
                    if sorted.binary_search(&k.negate()).is_err() {
                        return Err(Error::InvalidTruncation(format!(
                            "set is not symmetric: missing {}",
                            k.negate()
                        )));
                    }
                }
                if sorted.binary_search(&FreqVector::zero(m)).is_err() {
                    return Err(Error::InvalidTruncation("set does not contain 0".into()));
                }
                Ok(sorted)
            }
        }
    }

    /// Galerkin matrix in the character basis:
    /// H[k', k] = 4 pi^2 (L^T k' + theta)^T A_{k'-k} (L^T k + theta) + V_{k'-k}.
    pub fn assemble(&self) -> Result<(Vec<FreqVector>, DMatrix<Complex64>)> {
        self.validate()?;
        let freqs = self.truncation_set()?;
        let size = freqs.len();
        let theta = DVector::from_column_slice(&self.theta);
        let shifted: Vec<DVector<f64>> = freqs
            .iter()
            .map(|k| Ok(self.lambda.pullback(k)? + &theta))
            .collect::<Result<_>>()?;
        let four_pi2 = 4.0 * PI * PI;
        let mut h = DMatrix::from_element(size, size, Complex64::new(0.0, 0.0));
        for (row, krow) in freqs.iter().enumerate() {
            for (col, kcol) in freqs.iter().enumerate() {
                let q = krow.sub(kcol)?;
                let a_q = self.a_hat.coeff(&q);
                let mut quad = Complex64::new(0.0, 0.0);
                for i in 0..a_q.nrows() {
                    for j in 0..a_q.ncols() {
                        quad += shifted[row][i] * a_q[(i, j)] * shifted[col][j];
                    }
                }
                h[(row, col)] = four_pi2 * quad + self.v_hat.coeff(&q);
            }
        }
        // Hermiticity guard; the coefficient constraints make this exact up
        // to rounding.
        let scale = h.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        for i in 0..size {
            for j in i..size {
                let d = (h[(i, j)] - h[(j, i)].conj()).norm();
                if d > 1e-12 * scale {
                    return Err(Error::InvalidField(format!(
                        "assembled matrix is not Hermitian: defect {d}"
                    )));
                }
            }
        }
        Ok((freqs, h))
    }

    /// Lowest `count` eigenpairs by a dense Hermitian eigensolver.
    pub fn solve_bands(&self, count: usize) -> Result<BandResult> {
        let (_, h) = self.assemble()?;
        let size = h.nrows();
        let eig = nalgebra::SymmetricEigen::try_new(h.clone(), f64::EPSILON, 100_000)
            .ok_or(Error::EigensolverFailure { size })?;
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let take = count.min(size);
        let mut eigenvalues = Vec::with_capacity(take);
        let mut vectors = DMatrix::from_element(size, take, Complex64::new(0.0, 0.0));
        let mut residuals = Vec::with_capacity(take);
        for (out_col, &src) in order.iter().take(take).enumerate() {
            let lam = eig.eigenvalues[src];
            let v = eig.eigenvectors.column(src).clone_owned();
            let v = &v / Complex64::new(v.norm(), 0.0);
            let r = (&h * &v) - &v * Complex64::new(lam, 0.0);
            let res = r.norm();
            if res > 1e-8 * (1.0 + lam.abs()) {
                return Err(Error::EigensolverFailure { size });
            }
            eigenvalues.push(lam);
            vectors.set_column(out_col, &v);
            residuals.push(res);
        }
        Ok(BandResult {
            theta: self.theta.clone(),
            eigenvalues,
            eigenvectors: Some(vectors),
            residuals,
        })
    }

    /// Rayleigh quotient (c^H H c) / (c^H c).
    pub fn energy(&self, c: &DVector<Complex64>) -> Result<f64> {
        let (_, h) = self.assemble()?;
        energy_of(&h, c)
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> BlochProblem {
        BlochProblem {
            theta,
            ..self.clone()
        }
    }
}

/// Rayleigh quotient against a pre-assembled matrix.
pub fn energy_of(h: &DMatrix<Complex64>, c: &DVector<Complex64>) -> Result<f64> {
    if c.nrows() != h.nrows() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            got: c.nrows(),
        });
    }
    let norm_sq: f64 = c.iter().map(|v| v.norm_sqr()).sum();
    if norm_sq == 0.0 {
        return Err(Error::ZeroVector);
    }
    let hc = h * c;
    let num: Complex64 = c
        .iter()
        .zip(hc.iter())
        .map(|(ci, hci)| ci.conj() * hci)
        .sum();
    if num.im.abs() > 1e-12 * (1.0 + num.norm()) {
        return Err(Error::InvalidField(format!(
            "quadratic form is not real: imaginary part {}",
            num.im
        )));
    }
    Ok(num.re / norm_sq)
}

/// Bands over a sweep of Bloch frequencies; dispatched to parallel workers
/// and merged by input index.
pub fn band_structure(
    template: &BlochProblem,
    thetas: &[Vec<f64>],
    count: usize,
) -> Result<Vec<BandResult>> {
    if thetas.is_empty() {
        return Err(Error::EmptyInput("theta list"));
    }
    thetas
        .par_iter()
        .map(|theta| template.with_theta(theta.clone()).solve_bands(count))
        .collect()
}
