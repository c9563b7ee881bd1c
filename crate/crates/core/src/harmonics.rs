//! Trigonometric-polynomial calculus on the torus: evaluation, Plancherel,
//! Sobolev norms, spectral derivatives, and the diagonal compactness operator.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dual_lattice::{FreqVector, GammaWeight, QuasiMatrix};
use crate::error::{Error, Result};

/// Coefficients below this magnitude are dropped during canonicalization.
const COEFF_FLOOR: f64 = 1e-30;

/// A finitely supported Fourier coefficient map on the dual of T^m.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    dim: usize,
    real_valued: bool,
    coeffs: BTreeMap<FreqVector, Complex64>,
}

impl SpectralField {
    /// Builds a field from (frequency, amplitude) pairs. Duplicate keys
    /// accumulate. When `real_valued` is set, conjugate symmetry
    /// c_{-k} = conj(c_k) is enforced.
    pub fn from_coeffs<I>(dim: usize, entries: I, real_valued: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (FreqVector, Complex64)>,
    {
        let mut coeffs: BTreeMap<FreqVector, Complex64> = BTreeMap::new();
        for (k, c) in entries {
            if k.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: k.dim(),
                });
            }
            *coeffs.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        coeffs.retain(|_, c| c.norm() >= COEFF_FLOOR);
        let field = SpectralField {
            dim,
            real_valued,
            coeffs,
        };
        if real_valued {
            field.check_real_symmetry()?;
        }
        Ok(field)
    }

    pub fn zero(dim: usize) -> Self {
        SpectralField {
            dim,
            real_valued: true,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        let mut coeffs = BTreeMap::new();
        if value.abs() >= COEFF_FLOOR {
            coeffs.insert(FreqVector::zero(dim), Complex64::new(value, 0.0));
        }
        SpectralField {
            dim,
            real_valued: true,
            coeffs,
        }
    }

    /// Real cosine mode: amp * cos(2 pi k . w), stored as +-k half-amplitudes.
    pub fn cosine(dim: usize, k: FreqVector, amp: f64) -> Result<Self> {
        let half = Complex64::new(amp / 2.0, 0.0);
        SpectralField::from_coeffs(dim, [(k.clone(), half), (k.negate(), half)], true)
    }

    fn check_real_symmetry(&self) -> Result<()> {
        for (k, c) in &self.coeffs {
            let mirror = self
                .coeffs
                .get(&k.negate())
                .copied()
                .unwrap_or(Complex64::new(0.0, 0.0));
            if (mirror - c.conj()).norm() > 1e-12 * (1.0 + c.norm()) {
                return Err(Error::InvalidField(format!(
                    "real_valued field violates c_(-k) = conj(c_k) at k = {k}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn real_valued(&self) -> bool {
        self.real_valued
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&FreqVector, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, k: &FreqVector) -> Complex64 {
        self.coeffs
            .get(k)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Largest |k_j| over the support, per axis.
    pub fn max_abs_freq(&self) -> Vec<i64> {
        let mut out = vec![0i64; self.dim];
        for k in self.coeffs.keys() {
            for (j, &e) in k.entries().iter().enumerate() {
                out[j] = out[j].max(e.abs());
            }
        }
        out
    }

    /// Pointwise value: sum_k c_k e^{2 pi i k . w}.
    pub fn evaluate(&self, omega: &[f64]) -> Result<Complex64> {
        if omega.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: omega.len(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in &self.coeffs {
            let phase: f64 = k
                .entries()
                .iter()
                .zip(omega)
                .map(|(&e, &w)| e as f64 * w)
                .sum();
            acc += c * Complex64::from_polar(1.0, 2.0 * PI * phase);
        }
        Ok(acc)
    }

    /// Plancherel norm sqrt(sum |c_k|^2).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs
            .values()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// (sum_k (1 + gamma(k)^2)^s |c_k|^2)^{1/2}.
    pub fn sobolev_norm(&self, weight: &GammaWeight, s: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (k, c) in &self.coeffs {
            let g = weight.gamma(k)?;
            acc += (1.0 + g * g).powf(s) * c.norm_sqr();
        }
        Ok(acc.sqrt())
    }

    /// Directional derivative along the flow: c_k -> 2 pi i (Lambda^T k)_j c_k.
    /// `j` is 1-based.
    pub fn spectral_derivative(&self, lambda: &QuasiMatrix, j: usize) -> Result<SpectralField> {
        if j < 1 || j > lambda.cols() {
            return Err(Error::InvalidInput(format!(
                "direction index {j} out of range 1..={}",
                lambda.cols()
            )));
        }
        let mut coeffs = BTreeMap::new();
        for (k, c) in &self.coeffs {
            let y = lambda.pullback(k)?;
            let factor = Complex64::new(0.0, 2.0 * PI * y[j - 1]);
            let v = factor * c;
            if v.norm() >= COEFF_FLOOR {
                coeffs.insert(k.clone(), v);
            }
        }
        Ok(SpectralField {
            dim: self.dim,
            real_valued: false,
            coeffs,
        })
    }

    /// The compactness operator: c_k -> c_k / sqrt(1 + gamma(k)^2).
    pub fn apply_t(&self, weight: &GammaWeight) -> Result<SpectralField> {
        let mut coeffs = BTreeMap::new();
        for (k, c) in &self.coeffs {
            let g = weight.gamma(k)?;
            coeffs.insert(k.clone(), c / (1.0 + g * g).sqrt());
        }
        Ok(SpectralField {
            dim: self.dim,
            real_valued: self.real_valued,
            coeffs,
        })
    }

    /// Spectral inner product sum_k c_k conj(d_k).
    pub fn inner(&self, other: &SpectralField) -> Result<Complex64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in &self.coeffs {
            acc += c * other.coeff(k).conj();
        }
        Ok(acc)
    }

    /// Pointwise product as coefficient convolution; stays a trigonometric
    /// polynomial.
    pub fn convolve(&self, other: &SpectralField) -> Result<SpectralField> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut entries = Vec::with_capacity(self.coeffs.len() * other.coeffs.len());
        for (k1, c1) in &self.coeffs {
            for (k2, c2) in &other.coeffs {
                entries.push((k1.add(k2)?, c1 * c2));
            }
        }
        SpectralField::from_coeffs(self.dim, entries, self.real_valued && other.real_valued)
    }

    pub fn scale(&self, factor: Complex64) -> SpectralField {
        let mut coeffs = BTreeMap::new();
        for (k, c) in &self.coeffs {
            let v = c * factor;
            if v.norm() >= COEFF_FLOOR {
                coeffs.insert(k.clone(), v);
            }
        }
        SpectralField {
            dim: self.dim,
            real_valued: self.real_valued && factor.im == 0.0,
            coeffs,
        }
    }

    pub fn add_field(&self, other: &SpectralField) -> Result<SpectralField> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let entries = self
            .coeffs
            .iter()
            .chain(other.coeffs.iter())
            .map(|(k, c)| (k.clone(), *c));
        SpectralField::from_coeffs(self.dim, entries, self.real_valued && other.real_valued)
    }
}

/// Residual of the integration-by-parts identity
/// |<u, d_j zeta> + <d_j u, zeta>|; analytically zero.
pub fn integration_by_parts_check(
    u: &SpectralField,
    zeta: &SpectralField,
    lambda: &QuasiMatrix,
    j: usize,
) -> Result<f64> {
    let du = u.spectral_derivative(lambda, j)?;
    let dzeta = zeta.spectral_derivative(lambda, j)?;
    let r = u.inner(&dzeta)? + du.inner(zeta)?;
    Ok(r.norm())
}

/// Eigenvalues 1/sqrt(1 + gamma(k)^2) of the compactness operator over the
/// box window [-R, R]^m, sorted descending and truncated to `top`.
///
/// For the open-ended rule scheme the window also fixes the coordinate
/// truncation (m = R).
pub fn t_spectrum(weight: &GammaWeight, window: i64, top: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(Error::InvalidInput(format!(
            "window must be >= 1, got {window}"
        )));
    }
    let m = weight.dim().unwrap_or(window as usize);
    let width = 2 * window as u128 + 1;
    let mut total: u128 = 1;
    for _ in 0..m {
        total = total.saturating_mul(width);
        if total > 20_000_000 {
            return Err(Error::InvalidInput(format!(
                "t_spectrum window {window} in dimension {m} is too large to enumerate"
            )));
        }
    }
    let mut values = Vec::new();
    let mut current = vec![0i64; m];
    collect_box(weight, window, 0, &mut current, &mut values)?;
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    values.truncate(top);
    Ok(values)
}

fn collect_box(
    weight: &GammaWeight,
    r: i64,
    depth: usize,
    current: &mut Vec<i64>,
    out: &mut Vec<f64>,
) -> Result<()> {
    if depth == current.len() {
        let g = weight.gamma(&FreqVector::new(current.clone()))?;
        out.push(1.0 / (1.0 + g * g).sqrt());
        return Ok(());
    }
    for v in -r..=r {
        current[depth] = v;
        collect_box(weight, r, depth + 1, current, out)?;
    }
    Ok(())
}

/// Matrix-valued trigonometric polynomial on T^m with values in C^{n x n};
/// constrained so every reconstructed A(w) is real symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSpectralField {
    dim: usize,
    n: usize,
    coeffs: BTreeMap<FreqVector, DMatrix<Complex64>>,
}

impl MatrixSpectralField {
    pub fn from_coeffs<I>(dim: usize, n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FreqVector, DMatrix<Complex64>)>,
    {
        let mut coeffs: BTreeMap<FreqVector, DMatrix<Complex64>> = BTreeMap::new();
        for (k, mat) in entries {
            if k.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: k.dim(),
                });
            }
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: mat.nrows().max(mat.ncols()),
                });
            }
            match coeffs.get_mut(&k) {
                Some(existing) => *existing += mat,
                None => {
                    coeffs.insert(k, mat);
                }
            }
        }
        coeffs.retain(|_, m| m.iter().any(|c| c.norm() >= COEFF_FLOOR));
        let field = MatrixSpectralField { dim, n, coeffs };
        field.check_hermitian_real()?;
        Ok(field)
    }

    pub fn identity(dim: usize, n: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(
            FreqVector::zero(dim),
            DMatrix::from_diagonal_element(n, n, Complex64::new(1.0, 0.0)),
        );
        MatrixSpectralField { dim, n, coeffs }
    }

    pub fn zero(dim: usize, n: usize) -> Self {
        MatrixSpectralField {
            dim,
            n,
            coeffs: BTreeMap::new(),
        }
    }

    /// Scalar 1x1 matrix field from a real-valued spectral field.
    pub fn from_scalar(f: &SpectralField) -> Result<Self> {
        let entries = f
            .coeffs()
            .map(|(k, c)| (k.clone(), DMatrix::from_element(1, 1, *c)));
        MatrixSpectralField::from_coeffs(f.dim(), 1, entries)
    }

    fn check_hermitian_real(&self) -> Result<()> {
        for (k, mat) in &self.coeffs {
            let mirror = self.coeffs.get(&k.negate());
            let scale = 1.0 + mat.iter().map(|c| c.norm()).fold(0.0, f64::max);
            // A(w) real: A_{-q} = conj(A_q).
            let conj = mat.map(|c| c.conj());
            match mirror {
                Some(mm) => {
                    if (mm - &conj).iter().any(|c| c.norm() > 1e-12 * scale) {
                        return Err(Error::InvalidField(format!(
                            "matrix field violates A_(-q) = conj(A_q) at q = {k}"
                        )));
                    }
                }
                None => {
                    if mat.iter().any(|c| c.norm() > 1e-12 * scale) {
                        return Err(Error::InvalidField(format!(
                            "matrix field misses the mirror coefficient at q = {k}"
                        )));
                    }
                }
            }
            // A(w) symmetric: A_q^T = A_q.
            if (mat.transpose() - mat).iter().any(|c| c.norm() > 1e-12 * scale) {
                return Err(Error::InvalidField(format!(
                    "matrix field coefficient at q = {k} is not symmetric"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&FreqVector, &DMatrix<Complex64>)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, k: &FreqVector) -> DMatrix<Complex64> {
        self.coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(|| DMatrix::from_element(self.n, self.n, Complex64::new(0.0, 0.0)))
    }

    pub fn max_abs_freq(&self) -> Vec<i64> {
        let mut out = vec![0i64; self.dim];
        for k in self.coeffs.keys() {
            for (j, &e) in k.entries().iter().enumerate() {
                out[j] = out[j].max(e.abs());
            }
        }
        out
    }

    /// Reconstructs the real symmetric matrix A(w).
    pub fn evaluate_real(&self, omega: &[f64]) -> Result<DMatrix<f64>> {
        if omega.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: omega.len(),
            });
        }
        let mut acc = DMatrix::from_element(self.n, self.n, Complex64::new(0.0, 0.0));
        for (k, mat) in &self.coeffs {
            let phase: f64 = k
                .entries()
                .iter()
                .zip(omega)
                .map(|(&e, &w)| e as f64 * w)
                .sum();
            let ph = Complex64::from_polar(1.0, 2.0 * PI * phase);
            acc += mat.map(|c| c * ph);
        }
        Ok(acc.map(|c| c.re))
    }

    /// Sampled coercivity floor: the smallest eigenvalue of A(w) over a
    /// 32^m grid (m <= 3) or 10^4 seeded random points.
    pub fn ellipticity_floor(&self) -> Result<f64> {
        let mut floor = f64::INFINITY;
        let mut visit = |omega: &[f64]| -> Result<()> {
            let a = self.evaluate_real(omega)?;
            let sym = (&a + a.transpose()) * 0.5;
            let eig = sym.symmetric_eigen().eigenvalues;
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            floor = floor.min(min);
            Ok(())
        };
        if self.dim <= 3 {
            let npts = 32usize;
            let mut idx = vec![0usize; self.dim];
            loop {
                let omega: Vec<f64> = idx.iter().map(|&i| i as f64 / npts as f64).collect();
                visit(&omega)?;
                let mut carry = true;
                for d in (0..self.dim).rev() {
                    if carry {
                        idx[d] += 1;
                        if idx[d] == npts {
                            idx[d] = 0;
                        } else {
                            carry = false;
                        }
                    }
                }
                if carry {
                    break;
                }
            }
        } else {
            let mut rng = StdRng::seed_from_u64(0x5eed_e111);
            for _ in 0..10_000 {
                let omega: Vec<f64> = (0..self.dim).map(|_| rng.gen::<f64>()).collect();
                visit(&omega)?;
            }
        }
        Ok(floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual_lattice::TWO_PI;
    use proptest::prelude::*;
    use rand::Rng;

    fn mode(dim: usize, k: Vec<i64>, re: f64, im: f64) -> (FreqVector, Complex64) {
        assert_eq!(k.len(), dim);
        (FreqVector::new(k), Complex64::new(re, im))
    }

    fn random_real_field(dim: usize, modes: usize, seed: u64) -> SpectralField {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut entries = Vec::new();
        for _ in 0..modes {
            let k = FreqVector::new((0..dim).map(|_| rng.gen_range(-6i64..=6)).collect());
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            entries.push((k.clone(), c));
            entries.push((k.negate(), c.conj()));
        }
        SpectralField::from_coeffs(dim, entries, true).unwrap()
    }

    /// Quadrature oracle: trapezoid (= exact trigonometric) quadrature of
    /// |f|^2 over a uniform grid strictly finer than twice the max frequency.
    fn quadrature_l2(f: &SpectralField) -> f64 {
        let maxf = f.max_abs_freq().into_iter().max().unwrap_or(0);
        let npts = (2 * maxf + 3) as usize;
        let dim = f.dim();
        let mut idx = vec![0usize; dim];
        let mut acc = 0.0;
        loop {
            let omega: Vec<f64> = idx.iter().map(|&i| i as f64 / npts as f64).collect();
            acc += f.evaluate(&omega).unwrap().norm_sqr();
            let mut carry = true;
            for d in (0..dim).rev() {
                if carry {
                    idx[d] += 1;
                    if idx[d] == npts {
                        idx[d] = 0;
                    } else {
                        carry = false;
                    }
                }
            }
            if carry {
                break;
            }
        }
        (acc / npts.pow(dim as u32) as f64).sqrt()
    }

    #[test]
    fn evaluate_examples() {
        let f = SpectralField::constant(1, 1.0);
        assert_eq!(f.evaluate(&[0.37]).unwrap(), Complex64::new(1.0, 0.0));

        let f = SpectralField::cosine(1, FreqVector::new(vec![1]), 1.0).unwrap();
        let v = f.evaluate(&[0.25]).unwrap();
        assert!(v.norm() < 1e-15);

        let f = SpectralField::from_coeffs(
            1,
            [(FreqVector::new(vec![1]), Complex64::new(0.0, 1.0))],
            false,
        )
        .unwrap();
        let v = f.evaluate(&[0.5]).unwrap();
        assert!((v - Complex64::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn l2_norm_examples() {
        let f = SpectralField::constant(1, 3.0);
        assert_eq!(f.l2_norm(), 3.0);

        let f = SpectralField::cosine(1, FreqVector::new(vec![1]), 1.0).unwrap();
        assert!((f.l2_norm() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn l2_norm_matches_quadrature() {
        let f = random_real_field(2, 25, 42);
        let q = quadrature_l2(&f);
        let s = f.l2_norm();
        assert!((q - s).abs() <= 1e-10 * s.max(1.0), "{q} vs {s}");
    }

    #[test]
    fn sobolev_norm_examples() {
        let w = GammaWeight::periodic(1);
        let f = SpectralField::from_coeffs(
            1,
            [mode(1, vec![1], 1.0, 0.0)],
            false,
        )
        .unwrap();
        assert_eq!(f.sobolev_norm(&w, 0.0).unwrap(), f.l2_norm());
        let s1 = f.sobolev_norm(&w, 1.0).unwrap();
        assert!((s1 - (1.0 + 4.0 * PI * PI).sqrt()).abs() < 1e-12);

        let g = SpectralField::from_coeffs(
            1,
            [mode(1, vec![1], 1.0, 0.0), mode(1, vec![2], 1.0, 0.0)],
            false,
        )
        .unwrap();
        let got = g.sobolev_norm(&w, 1.0).unwrap();
        // Term list route.
        let expect = ((1.0 + TWO_PI * TWO_PI) + (1.0 + (2.0 * TWO_PI).powi(2))).sqrt();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn spectral_derivative_examples() {
        let lambda = QuasiMatrix::from_rows(&[vec![1.0]]).unwrap();
        let f = SpectralField::constant(1, 5.0);
        assert_eq!(f.spectral_derivative(&lambda, 1).unwrap().support_len(), 0);

        let f = SpectralField::from_coeffs(1, [mode(1, vec![1], 1.0, 0.0)], false).unwrap();
        let d = f.spectral_derivative(&lambda, 1).unwrap();
        let c = d.coeff(&FreqVector::new(vec![1]));
        assert!((c - Complex64::new(0.0, TWO_PI)).norm() < 1e-14);

        let lambda = QuasiMatrix::from_rows(&[vec![1.0], vec![2f64.sqrt()]]).unwrap();
        let f = SpectralField::from_coeffs(2, [mode(2, vec![1, 1], 1.0, 0.0)], false).unwrap();
        let d = f.spectral_derivative(&lambda, 1).unwrap();
        let c = d.coeff(&FreqVector::new(vec![1, 1]));
        assert!((c - Complex64::new(0.0, TWO_PI * (1.0 + 2f64.sqrt()))).norm() < 1e-12);
    }

    #[test]
    fn apply_t_examples_and_identity() {
        let w = GammaWeight::periodic(1);
        let f = SpectralField::constant(1, 1.0);
        assert_eq!(f.apply_t(&w).unwrap(), f);

        let f = SpectralField::from_coeffs(1, [mode(1, vec![1], 1.0, 0.0)], false).unwrap();
        let t = f.apply_t(&w).unwrap();
        let expect = 1.0 / (1.0 + 4.0 * PI * PI).sqrt();
        assert!((t.coeff(&FreqVector::new(vec![1])).re - expect).abs() < 1e-14);

        // Norm-restoring identity: sum (1+g^2) |T(f)_k|^2 = sum |f_k|^2.
        let f = random_real_field(1, 30, 7);
        let t = f.apply_t(&w).unwrap();
        let lhs: f64 = t
            .coeffs()
            .map(|(k, c)| {
                let g = w.gamma(k).unwrap();
                (1.0 + g * g) * c.norm_sqr()
            })
            .sum();
        let rhs = f.l2_norm().powi(2);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn apply_t_is_contraction() {
        let w = GammaWeight::periodic(2);
        let f = random_real_field(2, 20, 11);
        let t = f.apply_t(&w).unwrap();
        assert!(t.l2_norm() <= f.l2_norm());
        // Equality iff support within {0}.
        let g = SpectralField::constant(2, 2.5);
        assert_eq!(g.apply_t(&w).unwrap().l2_norm(), g.l2_norm());
    }

    #[test]
    fn t_spectrum_examples() {
        let w = GammaWeight::periodic(1);
        let s = t_spectrum(&w, 2, 5).unwrap();
        let a = 1.0 / (1.0 + 4.0 * PI * PI).sqrt();
        let b = 1.0 / (1.0 + 16.0 * PI * PI).sqrt();
        let expect = [1.0, a, a, b, b];
        for (got, want) in s.iter().zip(expect) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!(s.windows(2).all(|p| p[0] >= p[1]));
        assert!(s.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn t_spectrum_constant_weight_multiplicity() {
        // Constant alpha: eigenvalue 1/sqrt(1+4pi^2 c^2) carried by every
        // +-unit vector, so multiplicity 2m grows with the window dimension.
        for m in [2usize, 4, 6] {
            let w = GammaWeight::weighted(vec![1.0; m]);
            let s = t_spectrum(&w, 1, usize::MAX).unwrap();
            let val = 1.0 / (1.0 + 4.0 * PI * PI).sqrt();
            let mult = s.iter().filter(|&&v| (v - val).abs() < 1e-13).count();
            assert_eq!(mult, 2 * m);
        }
    }

    #[test]
    fn integration_by_parts_residuals() {
        let lambda = QuasiMatrix::from_rows(&[vec![1.0]]).unwrap();
        let u = SpectralField::constant(1, 4.0);
        let zeta = random_real_field(1, 10, 3);
        assert!(integration_by_parts_check(&u, &zeta, &lambda, 1).unwrap() <= 1e-14);

        let u = SpectralField::from_coeffs(1, [mode(1, vec![1], 1.0, 0.0)], false).unwrap();
        assert_eq!(integration_by_parts_check(&u, &u, &lambda, 1).unwrap(), 0.0);

        let u = random_real_field(1, 20, 5);
        let zeta = random_real_field(1, 20, 6);
        let scale = u.l2_norm() * zeta.l2_norm() * TWO_PI * 6.0;
        assert!(integration_by_parts_check(&u, &zeta, &lambda, 1).unwrap() <= 1e-12 * scale);
    }

    #[test]
    fn real_symmetry_enforced() {
        let bad = SpectralField::from_coeffs(
            1,
            [(FreqVector::new(vec![1]), Complex64::new(1.0, 0.0))],
            true,
        );
        assert!(matches!(bad, Err(Error::InvalidField(_))));
    }

    #[test]
    fn matrix_field_identity_is_elliptic() {
        let a = MatrixSpectralField::identity(1, 2);
        let floor = a.ellipticity_floor().unwrap();
        assert!((floor - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_field_rejects_broken_symmetry() {
        let mut m = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        let r = MatrixSpectralField::from_coeffs(1, 2, [(FreqVector::zero(1), m)]);
        assert!(r.is_err());
    }

    #[test]
    fn sobolev_norm_equality_with_flow_derivatives() {
        // |f|_{H1_gamma}^2 = |f|_{L2}^2 + sum_j |d_j f|_{L2}^2 for the
        // quasi-Euclidean weight of the same Lambda.
        for lam in [vec![vec![1.0]], vec![vec![1.0, 2f64.sqrt()]]] {
            let lambda = QuasiMatrix::from_rows(&lam).unwrap();
            let w = GammaWeight::quasi_euclidean(lambda.clone());
            let f = random_real_field(lambda.rows(), 15, 9);
            let lhs = f.sobolev_norm(&w, 1.0).unwrap().powi(2);
            let mut rhs = f.l2_norm().powi(2);
            for j in 1..=lambda.cols() {
                rhs += f.spectral_derivative(&lambda, j).unwrap().l2_norm().powi(2);
            }
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }

    proptest! {
        #[test]
        fn real_fields_evaluate_real(seed in 0u64..50, w0 in 0.0f64..1.0, w1 in 0.0f64..1.0) {
            let f = random_real_field(2, 8, seed);
            let v = f.evaluate(&[w0, w1]).unwrap();
            let scale = f.coeffs().map(|(_, c)| c.norm()).sum::<f64>().max(1.0);
            prop_assert!(v.im.abs() <= 1e-12 * scale);
        }

        #[test]
        fn json_round_trip_preserves_values(seed in 0u64..20) {
            let f = random_real_field(2, 6, seed);
            let json = crate::jsonio::field_to_json(&f);
            let back = crate::jsonio::field_from_json(&json).unwrap();
            prop_assert_eq!(f, back);
        }
    }
}
