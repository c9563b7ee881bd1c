//! Dual-group frequencies of the torus, gamma weights, sublevel enumeration,
//! and the finite-sublevel (compact embedding) certifier.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Relative slack used when comparing a gamma value against a level d.
fn level_cut(d: f64) -> f64 {
    d * (1.0 + 1e-12) + 1e-12
}

/// Integer frequency vector indexing a character of the torus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FreqVector(pub Vec<i64>);

impl FreqVector {
    pub fn new(entries: Vec<i64>) -> Self {
        FreqVector(entries)
    }

    pub fn zero(dim: usize) -> Self {
        FreqVector(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn negate(&self) -> Self {
        FreqVector(self.0.iter().map(|&e| -e).collect())
    }

    pub fn add(&self, other: &FreqVector) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(FreqVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &FreqVector) -> Result<Self> {
        self.add(&other.negate())
    }

    pub fn l1(&self) -> i64 {
        self.0.iter().map(|e| e.abs()).sum()
    }

    /// Euclidean norm of the entries.
    pub fn l2(&self) -> f64 {
        self.0.iter().map(|&e| (e as f64).powi(2)).sum::<f64>().sqrt()
    }
}

impl fmt::Display for FreqVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Real m x n frequency matrix with rows spanning the quasiperiodic
/// frequency module, together with the cached Gram matrix B = Lambda Lambda^T.
#[derive(Debug, Clone)]
pub struct QuasiMatrix {
    lambda: DMatrix<f64>,
    b: DMatrix<f64>,
    det_b: f64,
    /// Largest and smallest eigenvalues of B.
    b_eig_max: f64,
    b_eig_min: f64,
    positive: bool,
}

impl QuasiMatrix {
    /// Builds the matrix from its rows. Rows live in R^n, one per torus axis.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::EmptyInput("QuasiMatrix rows"));
        }
        if m > 8 {
            return Err(Error::UnsupportedDimension(m));
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(Error::EmptyInput("QuasiMatrix columns"));
        }
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteEntry);
            }
        }
        let lambda = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        let b = &lambda * lambda.transpose();
        let det_b = b.determinant();
        let eig = b.clone().symmetric_eigen().eigenvalues;
        let b_eig_max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let b_eig_min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        // Scale-aware positivity: det B > 1e-12 * |Lambda|^(2m).
        let positive = det_b > 1e-12 * b_eig_max.max(0.0).powi(m as i32);
        Ok(QuasiMatrix {
            lambda,
            b,
            det_b,
            b_eig_max,
            b_eig_min,
            positive,
        })
    }

    pub fn rows(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn cols(&self) -> usize {
        self.lambda.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn det_gram(&self) -> f64 {
        self.det_b
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    /// Spectral norm of Lambda.
    pub fn norm(&self) -> f64 {
        self.b_eig_max.max(0.0).sqrt()
    }

    /// Spectral norm of B^{-1}; only meaningful when `is_positive`.
    pub fn norm_gram_inv(&self) -> f64 {
        1.0 / self.b_eig_min
    }

    /// Lambda^T k, the frequency of the character k pulled back along the flow.
    pub fn pullback(&self, k: &FreqVector) -> Result<DVector<f64>> {
        if k.dim() != self.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.rows(),
                got: k.dim(),
            });
        }
        let kv = DVector::from_iterator(k.dim(), k.entries().iter().map(|&e| e as f64));
        Ok(self.lambda.transpose() * kv)
    }

    /// Lambda x for a spatial point x in R^n.
    pub fn apply(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                got: x.len(),
            });
        }
        let xv = DVector::from_column_slice(x);
        Ok(&self.lambda * xv)
    }
}

/// Rule generating the weight sequence of a windowed infinite-torus scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AlphaRule {
    /// alpha_l = c for every l; the bounded-generator obstruction.
    Constant { value: f64 },
    /// alpha_l = l (1-based); diverges, so every sublevel set is finite.
    Linear,
}

impl AlphaRule {
    pub fn alpha(&self, l: usize) -> f64 {
        match self {
            AlphaRule::Constant { value } => *value,
            AlphaRule::Linear => (l + 1) as f64,
        }
    }
}

/// A gamma weight scheme on the dual lattice, 2*pi prefactor included.
#[derive(Debug, Clone)]
pub enum GammaWeight {
    /// gamma(k) = 2 pi * sum |k_j| on Z^m.
    PeriodicL1 { dim: usize },
    /// gamma(k) = 2 pi * sum alpha_j |k_j| with a fixed nonnegative alpha.
    WeightedL1 { alpha: Vec<f64> },
    /// Windowed dual of the infinite torus: gamma(k) = 2 pi * sum alpha_l |k_l|
    /// with alpha drawn from a rule; frequency dimension is open-ended and a
    /// window fixes the coordinate truncation.
    WeightedL1Rule { rule: AlphaRule },
    /// gamma(k) = 2 pi |Lambda^T k|.
    QuasiEuclidean { lambda: QuasiMatrix },
}

impl GammaWeight {
    pub fn periodic(dim: usize) -> Self {
        GammaWeight::PeriodicL1 { dim }
    }

    pub fn weighted(alpha: Vec<f64>) -> Self {
        GammaWeight::WeightedL1 { alpha }
    }

    pub fn quasi_euclidean(lambda: QuasiMatrix) -> Self {
        GammaWeight::QuasiEuclidean { lambda }
    }

    /// Intrinsic frequency dimension, `None` for the open-ended rule scheme.
    pub fn dim(&self) -> Option<usize> {
        match self {
            GammaWeight::PeriodicL1 { dim } => Some(*dim),
            GammaWeight::WeightedL1 { alpha } => Some(alpha.len()),
            GammaWeight::WeightedL1Rule { .. } => None,
            GammaWeight::QuasiEuclidean { lambda } => Some(lambda.rows()),
        }
    }

    fn check_dim(&self, k: &FreqVector) -> Result<()> {
        if let Some(m) = self.dim() {
            if k.dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: k.dim(),
                });
            }
        }
        Ok(())
    }

    /// Evaluates gamma(k).
    pub fn gamma(&self, k: &FreqVector) -> Result<f64> {
        self.check_dim(k)?;
        Ok(match self {
            GammaWeight::PeriodicL1 { .. } => TWO_PI * k.l1() as f64,
            GammaWeight::WeightedL1 { alpha } => {
                TWO_PI
                    * alpha
                        .iter()
                        .zip(k.entries())
                        .map(|(a, &e)| a * e.abs() as f64)
                        .sum::<f64>()
            }
            GammaWeight::WeightedL1Rule { rule } => {
                TWO_PI
                    * k.entries()
                        .iter()
                        .enumerate()
                        .map(|(l, &e)| rule.alpha(l) * e.abs() as f64)
                        .sum::<f64>()
            }
            GammaWeight::QuasiEuclidean { lambda } => TWO_PI * lambda.pullback(k)?.norm(),
        })
    }

    /// Enumerates the sublevel set { k : gamma(k) <= d }.
    ///
    /// Returns the full set with `exact = true` whenever a rigorous coordinate
    /// bound exists; otherwise the intersection with the window box (or
    /// coordinate truncation, for the rule scheme) with `exact = false`.
    pub fn enumerate_sublevel(&self, d: f64, window: Option<i64>) -> Result<SublevelSet> {
        if d < 0.0 {
            return Err(Error::NegativeLevel(d));
        }
        let cut = level_cut(d);
        match self {
            GammaWeight::PeriodicL1 { dim } => {
                let r = (d / TWO_PI + 1e-9).floor() as i64;
                let freqs = enumerate_box(*dim, r, |k| TWO_PI * k.l1() as f64 <= cut);
                Ok(SublevelSet { freqs, exact: true })
            }
            GammaWeight::WeightedL1 { alpha } => {
                if alpha.iter().all(|&a| a > 0.0) {
                    let radii: Vec<i64> = alpha
                        .iter()
                        .map(|&a| (d / (TWO_PI * a) + 1e-9).floor() as i64)
                        .collect();
                    let freqs =
                        enumerate_box_radii(&radii, |k| self.gamma(k).unwrap() <= cut);
                    Ok(SublevelSet { freqs, exact: true })
                } else {
                    let r = window.ok_or_else(|| {
                        Error::WindowRequired(
                            "weighted l1 scheme with a zero weight has unbounded sublevel sets; \
                             pass --window"
                                .into(),
                        )
                    })?;
                    let freqs =
                        enumerate_box(alpha.len(), r, |k| self.gamma(k).unwrap() <= cut);
                    Ok(SublevelSet {
                        freqs,
                        exact: false,
                    })
                }
            }
            GammaWeight::WeightedL1Rule { rule } => match rule {
                AlphaRule::Linear => {
                    // Forced support: coordinates with alpha_l <= d/2pi.
                    let mut dim = 0;
                    while rule.alpha(dim) <= d / TWO_PI + 1e-9 {
                        dim += 1;
                    }
                    let dim = dim.max(1);
                    let radii: Vec<i64> = (0..dim)
                        .map(|l| (d / (TWO_PI * rule.alpha(l)) + 1e-9).floor() as i64)
                        .collect();
                    let freqs =
                        enumerate_box_radii(&radii, |k| self.gamma(k).unwrap() <= cut);
                    Ok(SublevelSet { freqs, exact: true })
                }
                AlphaRule::Constant { value } => {
                    let r = window.ok_or_else(|| {
                        Error::WindowRequired(
                            "constant-weight rule scheme has an infinite dual; pass --window \
                             to fix the coordinate truncation"
                                .into(),
                        )
                    })?;
                    if r < 1 {
                        return Err(Error::InvalidInput(format!(
                            "window must be >= 1, got {r}"
                        )));
                    }
                    if *value <= 0.0 {
                        return Err(Error::InvalidInput(
                            "constant rule weight must be positive".into(),
                        ));
                    }
                    let dim = r as usize;
                    let budget = (d / (TWO_PI * value) + 1e-9).floor() as i64;
                    let freqs = enumerate_l1_ball(dim, budget);
                    Ok(SublevelSet {
                        freqs,
                        exact: false,
                    })
                }
            },
            GammaWeight::QuasiEuclidean { lambda } => {
                if lambda.is_positive() {
                    // |k| <= |B^{-1}| |Lambda| |Lambda^T k| gives a box bound.
                    let r = (lambda.norm_gram_inv() * lambda.norm() * d / TWO_PI + 1e-9)
                        .floor() as i64;
                    let freqs =
                        enumerate_box(lambda.rows(), r, |k| self.gamma(k).unwrap() <= cut);
                    Ok(SublevelSet { freqs, exact: true })
                } else {
                    let r = window.ok_or_else(|| {
                        Error::WindowRequired(
                            "rank-deficient quasi-Euclidean scheme has unbounded sublevel \
                             sets; pass --window"
                                .into(),
                        )
                    })?;
                    let freqs =
                        enumerate_box(lambda.rows(), r, |k| self.gamma(k).unwrap() <= cut);
                    Ok(SublevelSet {
                        freqs,
                        exact: false,
                    })
                }
            }
        }
    }

    /// Sublevel counts per level and window, with a compactness verdict.
    pub fn condition_c_report(
        &self,
        d_levels: &[f64],
        windows: &[i64],
    ) -> Result<ConditionCReport> {
        if d_levels.is_empty() {
            return Err(Error::EmptyInput("d_levels"));
        }
        if d_levels.windows(2).any(|p| p[0] > p[1]) {
            return Err(Error::InvalidInput("d_levels must be ascending".into()));
        }
        let mut levels = Vec::new();
        for &d in d_levels {
            match self.enumerate_sublevel(d, None) {
                Ok(set) => {
                    levels.push(LevelCounts {
                        d,
                        exact: true,
                        counts: vec![WindowCount {
                            window: None,
                            count: set.freqs.len(),
                        }],
                    });
                }
                Err(Error::WindowRequired(msg)) => {
                    if windows.is_empty() {
                        return Err(Error::WindowRequired(msg));
                    }
                    let mut counts = Vec::new();
                    for &w in windows {
                        let set = self.enumerate_sublevel(d, Some(w))?;
                        counts.push(WindowCount {
                            window: Some(w),
                            count: set.freqs.len(),
                        });
                    }
                    levels.push(LevelCounts {
                        d,
                        exact: false,
                        counts,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        let all_exact = levels.iter().all(|l| l.exact);
        let verdict = if all_exact {
            Verdict::CertifiedFinite
        } else {
            let growing = levels.iter().any(|l| {
                !l.exact
                    && l.counts.len() >= 3
                    && l.counts.windows(2).all(|p| p[1].count > p[0].count)
            });
            if growing {
                Verdict::EvidenceInfinite
            } else {
                Verdict::Inconclusive
            }
        };
        Ok(ConditionCReport { levels, verdict })
    }

    /// Sup of gamma over a finite generator list. A finite list is always
    /// bounded; the point of the report is the sup itself, which stays flat
    /// under window growth for constant-weight schemes (the non-compactness
    /// obstruction) and diverges for schemes certified finite.
    pub fn generator_bounded_check(&self, generators: &[FreqVector]) -> Result<GeneratorBound> {
        if generators.is_empty() {
            return Err(Error::EmptyInput("generators"));
        }
        let mut sup = 0.0f64;
        for g in generators {
            sup = sup.max(self.gamma(g)?);
        }
        Ok(GeneratorBound { bounded: true, sup })
    }
}

/// Result of a sublevel enumeration, lexicographically ordered.
#[derive(Debug, Clone)]
pub struct SublevelSet {
    pub freqs: Vec<FreqVector>,
    pub exact: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowCount {
    pub window: Option<i64>,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelCounts {
    pub d: f64,
    pub exact: bool,
    pub counts: Vec<WindowCount>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    CertifiedFinite,
    EvidenceInfinite,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::CertifiedFinite => "CERTIFIED_FINITE",
            Verdict::EvidenceInfinite => "EVIDENCE_INFINITE",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        f.write_str(s)
    }
}

/// Counts are window-limited evidence only; infiniteness is never claimed
/// as proven.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCReport {
    pub levels: Vec<LevelCounts>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorBound {
    pub bounded: bool,
    pub sup: f64,
}

/// Enumerates k in the box [-r, r]^dim passing the filter, in lexicographic
/// order.
fn enumerate_box<F: FnMut(&FreqVector) -> bool>(dim: usize, r: i64, filter: F) -> Vec<FreqVector> {
    enumerate_box_radii(&vec![r; dim], filter)
}

fn enumerate_box_radii<F: FnMut(&FreqVector) -> bool>(
    radii: &[i64],
    mut filter: F,
) -> Vec<FreqVector> {
    let mut out = Vec::new();
    let mut current = vec![0i64; radii.len()];
    fn rec<F: FnMut(&FreqVector) -> bool>(
        radii: &[i64],
        depth: usize,
        current: &mut Vec<i64>,
        filter: &mut F,
        out: &mut Vec<FreqVector>,
    ) {
        if depth == radii.len() {
            let k = FreqVector(current.clone());
            if filter(&k) {
                out.push(k);
            }
            return;
        }
        let r = radii[depth].max(0);
        for v in -r..=r {
            current[depth] = v;
            rec(radii, depth + 1, current, filter, out);
        }
    }
    rec(radii, 0, &mut current, &mut filter, &mut out);
    out
}

/// Enumerates { k in Z^dim : sum |k_l| <= budget } without scanning the full
/// box, in lexicographic order.
fn enumerate_l1_ball(dim: usize, budget: i64) -> Vec<FreqVector> {
    let mut out = Vec::new();
    let mut current = vec![0i64; dim];
    fn rec(
        dim: usize,
        depth: usize,
        left: i64,
        current: &mut Vec<i64>,
        out: &mut Vec<FreqVector>,
    ) {
        if depth == dim {
            out.push(FreqVector(current.clone()));
            return;
        }
        for v in -left..=left {
            current[depth] = v;
            rec(dim, depth + 1, left - v.abs(), current, out);
        }
    }
    if budget >= 0 {
        rec(dim, 0, budget, &mut current, &mut out);
    }
    out
}
