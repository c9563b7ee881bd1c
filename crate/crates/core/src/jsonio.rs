//! JSON wire forms for fields, weights, problems, and deformations.
//!
//! Floats survive round-trips exactly: serialization uses the shortest
//! representation that parses back to the same double.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{BlochProblem, Truncation};
use crate::dual_lattice::{AlphaRule, FreqVector, GammaWeight, QuasiMatrix};
use crate::error::{Error, Result};
use crate::harmonics::{MatrixSpectralField, SpectralField};
use crate::quasi_dynamics::Deformation;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffJson {
    pub k: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldJson {
    pub dim: usize,
    pub real: bool,
    pub coeffs: Vec<CoeffJson>,
}

pub fn field_to_json(f: &SpectralField) -> FieldJson {
    FieldJson {
        dim: f.dim(),
        real: f.real_valued(),
        coeffs: f
            .coeffs()
            .map(|(k, c)| CoeffJson {
                k: k.entries().to_vec(),
                re: c.re,
                im: c.im,
            })
            .collect(),
    }
}

pub fn field_from_json(j: &FieldJson) -> Result<SpectralField> {
    SpectralField::from_coeffs(
        j.dim,
        j.coeffs
            .iter()
            .map(|c| (FreqVector::new(c.k.clone()), Complex64::new(c.re, c.im))),
        j.real,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixCoeffJson {
    pub k: Vec<i64>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFieldJson {
    pub dim: usize,
    pub n: usize,
    pub coeffs: Vec<MatrixCoeffJson>,
}

pub fn matrix_field_to_json(f: &MatrixSpectralField) -> MatrixFieldJson {
    let n = f.n();
    MatrixFieldJson {
        dim: f.dim(),
        n,
        coeffs: f
            .coeffs()
            .map(|(k, m)| MatrixCoeffJson {
                k: k.entries().to_vec(),
                re: (0..n)
                    .map(|i| (0..n).map(|j| m[(i, j)].re).collect())
                    .collect(),
                im: (0..n)
                    .map(|i| (0..n).map(|j| m[(i, j)].im).collect())
                    .collect(),
            })
            .collect(),
    }
}

pub fn matrix_field_from_json(j: &MatrixFieldJson) -> Result<MatrixSpectralField> {
    let n = j.n;
    let entries = j
        .coeffs
        .iter()
        .map(|c| {
            if c.re.len() != n || c.im.len() != n || c.re.iter().any(|r| r.len() != n)
                || c.im.iter().any(|r| r.len() != n)
            {
                return Err(Error::InvalidField(format!(
                    "matrix coefficient at k = {:?} is not {n}x{n}",
                    c.k
                )));
            }
            let m = DMatrix::from_fn(n, n, |i, jj| Complex64::new(c.re[i][jj], c.im[i][jj]));
            Ok((FreqVector::new(c.k.clone()), m))
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixSpectralField::from_coeffs(j.dim, n, entries)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum WeightJson {
    PeriodicL1 { dim: usize },
    WeightedL1 { alpha: Vec<f64> },
    WeightedL1Rule { rule: AlphaRule },
    QuasiEuclidean { lambda: Vec<Vec<f64>> },
}

pub fn weight_to_json(w: &GammaWeight) -> WeightJson {
    match w {
        GammaWeight::PeriodicL1 { dim } => WeightJson::PeriodicL1 { dim: *dim },
        GammaWeight::WeightedL1 { alpha } => WeightJson::WeightedL1 {
            alpha: alpha.clone(),
        },
        GammaWeight::WeightedL1Rule { rule } => WeightJson::WeightedL1Rule { rule: *rule },
        GammaWeight::QuasiEuclidean { lambda } => WeightJson::QuasiEuclidean {
            lambda: (0..lambda.rows())
                .map(|i| (0..lambda.cols()).map(|j| lambda.matrix()[(i, j)]).collect())
                .collect(),
        },
    }
}

pub fn weight_from_json(j: &WeightJson) -> Result<GammaWeight> {
    Ok(match j {
        WeightJson::PeriodicL1 { dim } => GammaWeight::PeriodicL1 { dim: *dim },
        WeightJson::WeightedL1 { alpha } => GammaWeight::WeightedL1 {
            alpha: alpha.clone(),
        },
        WeightJson::WeightedL1Rule { rule } => GammaWeight::WeightedL1Rule { rule: *rule },
        WeightJson::QuasiEuclidean { lambda } => GammaWeight::QuasiEuclidean {
            lambda: QuasiMatrix::from_rows(lambda)?,
        },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeformationJson {
    pub n: usize,
    pub m: usize,
    pub lambda: Vec<Vec<f64>>,
    pub omega0: Vec<f64>,
    #[serde(rename = "G")]
    pub g: MatrixFieldJson,
    pub nu_lower: f64,
    #[serde(rename = "M")]
    pub sup_bound: f64,
}

pub fn deformation_to_json(d: &Deformation) -> DeformationJson {
    let lambda = d.lambda();
    DeformationJson {
        n: lambda.cols(),
        m: lambda.rows(),
        lambda: (0..lambda.rows())
            .map(|i| (0..lambda.cols()).map(|j| lambda.matrix()[(i, j)]).collect())
            .collect(),
        omega0: d.omega0().to_vec(),
        g: matrix_field_to_json(d.gradient_field()),
        nu_lower: d.nu_lower(),
        sup_bound: d.sup_bound(),
    }
}

pub fn deformation_from_json(j: &DeformationJson) -> Result<Deformation> {
    let lambda = QuasiMatrix::from_rows(&j.lambda)?;
    if lambda.rows() != j.m || lambda.cols() != j.n {
        return Err(Error::DimensionMismatch {
            expected: j.m,
            got: lambda.rows(),
        });
    }
    let g = matrix_field_from_json(&j.g)?;
    Deformation::new(lambda, j.omega0.clone(), g, j.nu_lower, j.sup_bound)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruncationJson {
    Sublevel { weight: WeightJson, d: f64 },
    Explicit { #[serde(rename = "K")] k: Vec<Vec<i64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemJson {
    pub lambda: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    #[serde(rename = "A")]
    pub a: MatrixFieldJson,
    #[serde(rename = "V")]
    pub v: FieldJson,
    pub truncation: TruncationJson,
}

pub fn problem_to_json(p: &BlochProblem) -> ProblemJson {
    ProblemJson {
        lambda: (0..p.lambda.rows())
            .map(|i| {
                (0..p.lambda.cols())
                    .map(|j| p.lambda.matrix()[(i, j)])
                    .collect()
            })
            .collect(),
        theta: p.theta.clone(),
        a: matrix_field_to_json(&p.a_hat),
        v: field_to_json(&p.v_hat),
        truncation: match &p.truncation {
            Truncation::Sublevel { weight, d } => TruncationJson::Sublevel {
                weight: weight_to_json(weight),
                d: *d,
            },
            Truncation::Explicit(freqs) => TruncationJson::Explicit {
                k: freqs.iter().map(|f| f.entries().to_vec()).collect(),
            },
        },
    }
}

pub fn problem_from_json(j: &ProblemJson) -> Result<BlochProblem> {
    let lambda = QuasiMatrix::from_rows(&j.lambda)?;
    let a_hat = matrix_field_from_json(&j.a)?;
    let v_hat = field_from_json(&j.v)?;
    let truncation = match &j.truncation {
        TruncationJson::Sublevel { weight, d } => Truncation::Sublevel {
            weight: weight_from_json(weight)?,
            d: *d,
        },
        TruncationJson::Explicit { k } => Truncation::Explicit(
            k.iter().map(|e| FreqVector::new(e.clone())).collect(),
        ),
    };
    Ok(BlochProblem {
        lambda,
        a_hat,
        v_hat,
        theta: j.theta.clone(),
        truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_json_round_trip() {
        let w = GammaWeight::weighted(vec![1.0, 2.5]);
        let j = weight_to_json(&w);
        let text = serde_json::to_string(&j).unwrap();
        let back: WeightJson = serde_json::from_str(&text).unwrap();
        let w2 = weight_from_json(&back).unwrap();
        assert_eq!(
            w.gamma(&FreqVector::new(vec![3, -1])).unwrap(),
            w2.gamma(&FreqVector::new(vec![3, -1])).unwrap()
        );
    }

    #[test]
    fn problem_json_round_trip() {
        let lambda = QuasiMatrix::from_rows(&[vec![1.0, 2f64.sqrt()]]).unwrap();
        let p = BlochProblem::free(
            lambda,
            vec![0.125, 0.25],
            Truncation::Explicit(
                (-2..=2).map(|k| FreqVector::new(vec![k])).collect(),
            ),
        );
        let text = serde_json::to_string(&problem_to_json(&p)).unwrap();
        let back = problem_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.theta, p.theta);
        let a = p.solve_bands(2).unwrap();
        let b = back.solve_bands(2).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
    }

    #[test]
    fn truncation_json_forms() {
        let sub: TruncationJson = serde_json::from_str(
            r#"{"weight":{"scheme":"periodic_l1","dim":1},"d":6.28}"#,
        )
        .unwrap();
        assert!(matches!(sub, TruncationJson::Sublevel { .. }));
        let exp: TruncationJson = serde_json::from_str(r#"{"K":[[0],[1],[-1]]}"#).unwrap();
        assert!(matches!(exp, TruncationJson::Explicit { .. }));
    }

    #[test]
    fn matrix_field_json_round_trip() {
        let a = MatrixSpectralField::identity(1, 2);
        let j = matrix_field_to_json(&a);
        let text = serde_json::to_string(&j).unwrap();
        let back = matrix_field_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(a, back);
    }
}
