//! The torus flow tau(x)w = w + Lambda x mod 1, ergodicity diagnostics,
//! Birkhoff box averages, and the deformed mean-value formulas.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dual_lattice::{FreqVector, QuasiMatrix};
use crate::error::{Error, Result};
use crate::harmonics::{MatrixSpectralField, SpectralField};

/// Cooperative cancellation hook for long-running estimates; return `true`
/// to abort.
pub type CancelCheck<'a> = &'a (dyn Fn() -> bool + Sync);

/// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// tau(x) w = frac(w + Lambda x).
pub fn tau(lambda: &QuasiMatrix, x: &[f64], omega: &[f64]) -> Result<Vec<f64>> {
    if omega.len() != lambda.rows() {
        return Err(Error::DimensionMismatch {
            expected: lambda.rows(),
            got: omega.len(),
        });
    }
    let shift = lambda.apply(x)?;
    Ok(omega
        .iter()
        .zip(shift.iter())
        .map(|(&w, &s)| frac(w + s))
        .collect())
}

/// Outcome of the window-limited density obstruction search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DensityVerdict {
    /// No annihilating character found within the window; evidence for
    /// ergodicity, never a proof.
    NoObstructionFound,
    /// A nonzero k with Lambda^T k = 0 (within tol); the character xi_k is
    /// constant on the orbit closure, so the flow is not ergodic.
    Obstruction(FreqVector),
}

/// Searches nonzero k in [-R, R]^m with |Lambda^T k| <= tol.
pub fn density_kernel_test(lambda: &QuasiMatrix, window: i64, tol: f64) -> Result<DensityVerdict> {
    if window < 1 {
        return Err(Error::InvalidInput(format!(
            "window must be >= 1, got {window}"
        )));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let m = lambda.rows();
    let mut current = vec![0i64; m];
    let mut found: Option<FreqVector> = None;
    // Grow the sup-norm shell so the smallest obstruction is reported first.
    for shell in 1..=window {
        search(lambda, shell, tol, 0, false, &mut current, &mut found)?;
        if found.is_some() {
            break;
        }
    }
    Ok(match found {
        Some(k) => DensityVerdict::Obstruction(k),
        None => DensityVerdict::NoObstructionFound,
    })
}

#[allow(clippy::too_many_arguments)]
fn search(
    lambda: &QuasiMatrix,
    r: i64,
    tol: f64,
    depth: usize,
    on_shell: bool,
    current: &mut Vec<i64>,
    found: &mut Option<FreqVector>,
) -> Result<()> {
    if found.is_some() {
        return Ok(());
    }
    if depth == current.len() {
        if !on_shell {
            return Ok(());
        }
        let k = FreqVector::new(current.clone());
        if lambda.pullback(&k)?.norm() <= tol {
            // Canonical sign: first nonzero component positive.
            let canon = match k.entries().iter().find(|&&e| e != 0) {
                Some(&e) if e < 0 => k.negate(),
                _ => k,
            };
            *found = Some(canon);
        }
        return Ok(());
    }
    for v in -r..=r {
        current[depth] = v;
        search(
            lambda,
            r,
            tol,
            depth + 1,
            on_shell || v.abs() == r,
            current,
            found,
        )?;
    }
    Ok(())
}

/// The mean value of a stationary field is its zero Fourier coefficient.
pub fn exact_mean(f: &SpectralField) -> Complex64 {
    f.coeff(&FreqVector::zero(f.dim()))
}

/// Composite Gauss-Legendre grid over [0, t] resolving frequency `max_freq`.
fn gl_axis(t: f64, max_freq: f64) -> Vec<(f64, f64)> {
    let panels = ((8.0 * (t * max_freq).ceil()) as usize).max(4);
    let h = t / panels as f64;
    let mut out = Vec::with_capacity(panels * GL_NODES.len());
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
            out.push((mid + 0.5 * h * node, 0.5 * h * weight));
        }
    }
    out
}

/// Per-axis top frequency |(Lambda^T k)_j| over the support of `f`.
fn axis_freqs(f: &SpectralField, lambda: &QuasiMatrix) -> Result<Vec<f64>> {
    let n = lambda.cols();
    let mut out = vec![0.0f64; n];
    for (k, _) in f.coeffs() {
        let y = lambda.pullback(k)?;
        for j in 0..n {
            out[j] = out[j].max(y[j].abs());
        }
    }
    Ok(out)
}

const MAX_QUAD_POINTS: usize = 50_000_000;

/// Tensor quadrature of `integrand` over [0, t]^n, divided by t^n.
fn box_average<F>(
    axes: &[Vec<(f64, f64)>],
    t: f64,
    cancel: Option<CancelCheck>,
    mut integrand: F,
) -> Result<Complex64>
where
    F: FnMut(&[f64]) -> Result<Complex64>,
{
    let n = axes.len();
    let total: usize = axes.iter().map(|a| a.len()).product();
    if total > MAX_QUAD_POINTS {
        return Err(Error::InvalidInput(format!(
            "quadrature grid of {total} points exceeds the supported size"
        )));
    }
    let mut idx = vec![0usize; n];
    let mut acc = Complex64::new(0.0, 0.0);
    let mut visited = 0usize;
    loop {
        if let Some(check) = cancel {
            if visited % 4096 == 0 && check() {
                return Err(Error::InvalidInput("estimate cancelled".into()));
            }
        }
        let mut x = Vec::with_capacity(n);
        let mut w = 1.0;
        for (d, &i) in idx.iter().enumerate() {
            let (xi, wi) = axes[d][i];
            x.push(xi);
            w *= wi;
        }
        acc += integrand(&x)? * w;
        visited += 1;
        let mut carry = true;
        for d in (0..n).rev() {
            if carry {
                idx[d] += 1;
                if idx[d] == axes[d].len() {
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
    Ok(acc / t.powi(n as i32))
}

/// Box average (1/t^n) int_{[0,t]^n} f(tau(x) w0) dx by composite
/// Gauss-Legendre quadrature resolved against the integrand's top frequency.
pub fn mean_value_estimate(
    f: &SpectralField,
    lambda: &QuasiMatrix,
    omega0: &[f64],
    t: f64,
) -> Result<Complex64> {
    mean_value_estimate_with_cancel(f, lambda, omega0, t, None)
}

pub fn mean_value_estimate_with_cancel(
    f: &SpectralField,
    lambda: &QuasiMatrix,
    omega0: &[f64],
    t: f64,
    cancel: Option<CancelCheck>,
) -> Result<Complex64> {
    if t <= 0.0 {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    if omega0.len() != lambda.rows() {
        return Err(Error::DimensionMismatch {
            expected: lambda.rows(),
            got: omega0.len(),
        });
    }
    let freqs = axis_freqs(f, lambda)?;
    let axes: Vec<Vec<(f64, f64)>> = freqs.iter().map(|&w| gl_axis(t, w)).collect();
    box_average(&axes, t, cancel, |x| {
        let w = tau(lambda, x, omega0)?;
        f.evaluate(&w)
    })
}

/// A deterministic realization of a stochastic deformation through the torus:
/// grad Phi(y) = I + G(tau(y) w0) with G a matrix trigonometric polynomial.
#[derive(Debug, Clone)]
pub struct Deformation {
    lambda: QuasiMatrix,
    omega0: Vec<f64>,
    g: MatrixSpectralField,
    nu_lower: f64,
    sup_bound: f64,
}

impl Deformation {
    /// Validates the Jacobian and gradient bounds by sampling 10^4 torus
    /// points; construction fails if either bound is violated.
    pub fn new(
        lambda: QuasiMatrix,
        omega0: Vec<f64>,
        g: MatrixSpectralField,
        nu_lower: f64,
        sup_bound: f64,
    ) -> Result<Self> {
        if g.n() != lambda.cols() {
            return Err(Error::DimensionMismatch {
                expected: lambda.cols(),
                got: g.n(),
            });
        }
        if g.dim() != lambda.rows() {
            return Err(Error::DimensionMismatch {
                expected: lambda.rows(),
                got: g.dim(),
            });
        }
        if omega0.len() != lambda.rows() {
            return Err(Error::DimensionMismatch {
                expected: lambda.rows(),
                got: omega0.len(),
            });
        }
        if nu_lower <= 0.0 {
            return Err(Error::InvalidDeformation(format!(
                "Jacobian lower bound must be positive, got {nu_lower}"
            )));
        }
        let d = Deformation {
            lambda,
            omega0,
            g,
            nu_lower,
            sup_bound,
        };
        let mut rng = StdRng::seed_from_u64(0xdef0_0a11);
        let m = d.lambda.rows();
        for _ in 0..10_000 {
            let omega: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            let grad = d.grad_at_torus_point(&omega)?;
            let det = grad.determinant();
            if det < d.nu_lower {
                return Err(Error::InvalidDeformation(format!(
                    "sampled det(grad Phi) = {det} below the lower bound {}",
                    d.nu_lower
                )));
            }
            let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > d.sup_bound {
                return Err(Error::InvalidDeformation(format!(
                    "sampled |grad Phi| = {norm} above the sup bound {}",
                    d.sup_bound
                )));
            }
        }
        Ok(d)
    }

    pub fn lambda(&self) -> &QuasiMatrix {
        &self.lambda
    }

    pub fn omega0(&self) -> &[f64] {
        &self.omega0
    }

    pub fn gradient_field(&self) -> &MatrixSpectralField {
        &self.g
    }

    pub fn nu_lower(&self) -> f64 {
        self.nu_lower
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn spatial_dim(&self) -> usize {
        self.lambda.cols()
    }

    /// grad Phi expressed on the torus: I + G(w).
    fn grad_at_torus_point(&self, omega: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.spatial_dim();
        let mut grad = self.g.evaluate_real(omega)?;
        for i in 0..n {
            grad[(i, i)] += 1.0;
        }
        Ok(grad)
    }

    /// grad Phi(y) = I + G(tau(y) w0).
    pub fn grad(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let omega = tau(&self.lambda, y, &self.omega0)?;
        self.grad_at_torus_point(&omega)
    }

    /// det grad Phi(y); errors if the sampled Jacobian turns non-positive.
    pub fn jacobian(&self, y: &[f64]) -> Result<f64> {
        let det = self.grad(y)?.determinant();
        if det <= 0.0 {
            return Err(Error::InvalidDeformation(format!(
                "non-positive Jacobian {det} encountered"
            )));
        }
        Ok(det)
    }
}

/// Uniform grid average over T^m, exact for trigonometric polynomials when
/// `npts` exceeds twice the top frequency per axis.
fn torus_grid_average<F>(m: usize, npts: usize, mut integrand: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let total = npts.pow(m as u32);
    if total > MAX_QUAD_POINTS {
        return Err(Error::InvalidInput(format!(
            "torus grid of {total} points exceeds the supported size"
        )));
    }
    let mut idx = vec![0usize; m];
    let mut acc = 0.0;
    loop {
        let omega: Vec<f64> = idx.iter().map(|&i| i as f64 / npts as f64).collect();
        acc += integrand(&omega)?;
        let mut carry = true;
        for d in (0..m).rev() {
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
    Ok(acc / total as f64)
}

/// Right-hand side of the deformed mean-value formula:
/// E[f det(grad Phi)] / det(E[grad Phi]), both expectations by exact
/// trigonometric grid quadrature over T^m.
pub fn phi2_rhs(f: &SpectralField, d: &Deformation) -> Result<f64> {
    if !f.real_valued() {
        return Err(Error::InvalidField(
            "deformed mean requires a real-valued field".into(),
        ));
    }
    if f.dim() != d.lambda.rows() {
        return Err(Error::DimensionMismatch {
            expected: d.lambda.rows(),
            got: f.dim(),
        });
    }
    let m = d.lambda.rows();
    let n = d.spatial_dim();
    let deg_f = f.max_abs_freq().into_iter().max().unwrap_or(0);
    let deg_g = d.g.max_abs_freq().into_iter().max().unwrap_or(0);
    // det(I+G) has trig degree at most n * deg_g per axis.
    let npts = (2 * (deg_f + n as i64 * deg_g) + 3) as usize;

    let numerator = torus_grid_average(m, npts, |omega| {
        let fv = f.evaluate(omega)?.re;
        let det = d.grad_at_torus_point(omega)?.determinant();
        Ok(fv * det)
    })?;

    let mean_grad = {
        let mut acc = DMatrix::<f64>::zeros(n, n);
        let npts_g = (2 * deg_g + 3) as usize;
        let total = npts_g.pow(m as u32) as f64;
        let mut idx = vec![0usize; m];
        loop {
            let omega: Vec<f64> = idx.iter().map(|&i| i as f64 / npts_g as f64).collect();
            acc += d.grad_at_torus_point(&omega)?;
            let mut carry = true;
            for dd in (0..m).rev() {
                if carry {
                    idx[dd] += 1;
                    if idx[dd] == npts_g {
                        idx[dd] = 0;
                    } else {
                        carry = false;
                    }
                }
            }
            if carry {
                break;
            }
        }
        acc / total
    };
    let denominator = mean_grad.determinant();
    if denominator <= 0.0 {
        return Err(Error::NonPositiveDenominator(denominator));
    }
    Ok(numerator / denominator)
}

/// Left-hand side of the deformed mean-value formula, estimated over the
/// deformed box Phi([0,t]^n) by change of variables:
/// int f(tau(y) w0) det grad Phi(y) dy / int det grad Phi(y) dy.
pub fn phi2_lhs_estimate(f: &SpectralField, d: &Deformation, t: f64) -> Result<f64> {
    phi2_lhs_estimate_with_cancel(f, d, t, None)
}

pub fn phi2_lhs_estimate_with_cancel(
    f: &SpectralField,
    d: &Deformation,
    t: f64,
    cancel: Option<CancelCheck>,
) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    if f.dim() != d.lambda.rows() {
        return Err(Error::DimensionMismatch {
            expected: d.lambda.rows(),
            got: f.dim(),
        });
    }
    let n = d.spatial_dim();
    // Per-axis frequency budget: f plus n copies of G (Leibniz expansion of
    // the determinant).
    let f_freqs = axis_freqs(f, &d.lambda)?;
    let mut g_freqs = vec![0.0f64; n];
    for (k, _) in d.g.coeffs() {
        let y = d.lambda.pullback(k)?;
        for j in 0..n {
            g_freqs[j] = g_freqs[j].max(y[j].abs());
        }
    }
    let axes: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|j| gl_axis(t, f_freqs[j] + n as f64 * g_freqs[j]))
        .collect();

    let numerator = box_average(&axes, t, cancel, |y| {
        let omega = tau(&d.lambda, y, &d.omega0)?;
        let det = d.grad_at_torus_point(&omega)?.determinant();
        if det <= 0.0 {
            return Err(Error::InvalidDeformation(format!(
                "non-positive Jacobian {det} encountered"
            )));
        }
        Ok(f.evaluate(&omega)? * det)
    })?;
    let denominator = box_average(&axes, t, cancel, |y| {
        let omega = tau(&d.lambda, y, &d.omega0)?;
        Ok(Complex64::new(
            d.grad_at_torus_point(&omega)?.determinant(),
            0.0,
        ))
    })?;
    if denominator.re <= 0.0 {
        return Err(Error::NonPositiveDenominator(denominator.re));
    }
    Ok(numerator.re / denominator.re)
}
