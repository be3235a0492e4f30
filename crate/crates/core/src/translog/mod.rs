//! Translog cost function with its cost-share system.
//!
//! ```text
//! ln C = a0 + Σ a_i ln w_i + a_y ln y + ½ ΣΣ a_ij ln w_i ln w_j
//!        + ½ a_yy (ln y)² + Σ a_iy ln w_i ln y
//! S_i  = a_i + a_iy ln y + Σ_j a_ij ln w_j
//! ```
//!
//! Coefficients are symmetric (`a_ij = a_ji`) and linearly homogeneous in
//! prices (`Σ a_i = 1`, `Σ_j a_ij = 0`, `Σ a_iy = 0`). Estimation imposes
//! homogeneity by dividing cost and prices by a numeraire price and symmetry
//! by sharing one parameter per unordered input pair, so both hold exactly.

mod estimate;
mod linalg;

pub use estimate::{fit, EquationVariance, Estimator, EstimationOptions, FitReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{CostObservation, CostSample, DataError, ShareVector};

/// Tolerance on the homogeneity and symmetry restrictions.
pub const CONSTRAINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TranslogError {
    #[error("price of input `{0}` is not strictly positive")]
    NonPositivePrice(String),
    #[error("output level {0} is not strictly positive")]
    NonPositiveOutput(f64),
    #[error("expected {expected} input prices, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coefficient restriction violated: {0}")]
    ConstraintViolation(String),
    #[error("input `{0}` is not modeled")]
    NumeraireNotFound(String),
    #[error("need at least 2 modeled inputs, got {0}")]
    TooFewInputs(usize),
    #[error("{got} observations for {needed} free parameters")]
    InsufficientObservations { needed: usize, got: usize },
    #[error("regressors are collinear (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },
    #[error("iterated estimation stopped after {} iterations without converging", .0.iterations_used)]
    NotConverged(Box<FitReport>),
    #[error("invalid estimation options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Fitted or hand-specified translog parameters.
///
/// The second-order price terms are stored once per unordered pair, so
/// `alpha_ij(i, j)` and `alpha_ij(j, i)` read the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslogCoefficients {
    inputs: Vec<String>,
    numeraire: String,
    alpha0: f64,
    alpha_i: Vec<f64>,
    alpha_y: f64,
    alpha_ij: Vec<f64>,
    alpha_yy: f64,
    alpha_iy: Vec<f64>,
}

fn packed(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

impl TranslogCoefficients {
    /// Builds a coefficient set, checking symmetry and homogeneity within
    /// [`CONSTRAINT_TOL`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        inputs: Vec<String>,
        numeraire: impl Into<String>,
        alpha0: f64,
        alpha_i: Vec<f64>,
        alpha_y: f64,
        alpha_ij: &[Vec<f64>],
        alpha_yy: f64,
        alpha_iy: Vec<f64>,
    ) -> Result<Self, TranslogError> {
        let n = inputs.len();
        let numeraire = numeraire.into();
        if n < 2 {
            return Err(TranslogError::TooFewInputs(n));
        }
        if !inputs.contains(&numeraire) {
            return Err(TranslogError::NumeraireNotFound(numeraire));
        }
        let dims_ok = alpha_i.len() == n
            && alpha_iy.len() == n
            && alpha_ij.len() == n
            && alpha_ij.iter().all(|r| r.len() == n);
        if !dims_ok {
            return Err(TranslogError::DimensionMismatch {
                expected: n,
                got: alpha_i.len(),
            });
        }
        let violation = |msg: String| Err(TranslogError::ConstraintViolation(msg));
        let mut packed_ij = vec![0.0; n * (n + 1) / 2];
        for i in 0..n {
            for j in i..n {
                if (alpha_ij[i][j] - alpha_ij[j][i]).abs() > CONSTRAINT_TOL {
                    return violation(format!("alpha_ij[{i}][{j}] != alpha_ij[{j}][{i}]"));
                }
                packed_ij[packed(n, i, j)] = alpha_ij[i][j];
            }
        }
        let sum_i: f64 = alpha_i.iter().sum();
        if (sum_i - 1.0).abs() > CONSTRAINT_TOL {
            return violation(format!("sum of alpha_i is {sum_i}"));
        }
        for (i, row) in alpha_ij.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if s.abs() > CONSTRAINT_TOL {
                return violation(format!("row {i} of alpha_ij sums to {s}"));
            }
        }
        let sum_iy: f64 = alpha_iy.iter().sum();
        if sum_iy.abs() > CONSTRAINT_TOL {
            return violation(format!("sum of alpha_iy is {sum_iy}"));
        }
        let all = [alpha0, alpha_y, alpha_yy]
            .into_iter()
            .chain(alpha_i.iter().copied())
            .chain(alpha_iy.iter().copied())
            .chain(packed_ij.iter().copied());
        for v in all {
            if !v.is_finite() {
                return violation("non-finite coefficient".into());
            }
        }
        Ok(Self {
            inputs,
            numeraire,
            alpha0,
            alpha_i,
            alpha_y,
            alpha_ij: packed_ij,
            alpha_yy,
            alpha_iy,
        })
    }

    /// Cobb–Douglas special case: every second-order term is zero.
    pub fn cobb_douglas(
        inputs: Vec<String>,
        alpha0: f64,
        alpha_i: Vec<f64>,
        alpha_y: f64,
    ) -> Result<Self, TranslogError> {
        let n = inputs.len();
        let numeraire = inputs.last().cloned().unwrap_or_default();
        Self::new(
            inputs,
            numeraire,
            alpha0,
            alpha_i,
            alpha_y,
            &vec![vec![0.0; n]; n],
            0.0,
            vec![0.0; n],
        )
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn numeraire(&self) -> &str {
        &self.numeraire
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn alpha_i(&self) -> &[f64] {
        &self.alpha_i
    }

    pub fn alpha_y(&self) -> f64 {
        self.alpha_y
    }

    pub fn alpha_ij(&self, i: usize, j: usize) -> f64 {
        self.alpha_ij[packed(self.inputs.len(), i, j)]
    }

    /// Full symmetric matrix with mirrored entries.
    pub fn alpha_ij_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.inputs.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.alpha_ij(i, j)).collect())
            .collect()
    }

    pub fn alpha_yy(&self) -> f64 {
        self.alpha_yy
    }

    pub fn alpha_iy(&self) -> &[f64] {
        &self.alpha_iy
    }

    fn check_point(&self, w: &[f64], y: f64) -> Result<(), TranslogError> {
        if w.len() != self.inputs.len() {
            return Err(TranslogError::DimensionMismatch {
                expected: self.inputs.len(),
                got: w.len(),
            });
        }
        if let Some(i) = w.iter().position(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(TranslogError::NonPositivePrice(self.inputs[i].clone()));
        }
        if !(y.is_finite() && y > 0.0) {
            return Err(TranslogError::NonPositiveOutput(y));
        }
        Ok(())
    }

    /// `ln C(w, y)`.
    pub fn predict_log_cost(&self, w: &[f64], y: f64) -> Result<f64, TranslogError> {
        self.check_point(w, y)?;
        let n = self.inputs.len();
        let lw: Vec<f64> = w.iter().map(|p| p.ln()).collect();
        let ly = y.ln();
        let mut v = self.alpha0 + self.alpha_y * ly + 0.5 * self.alpha_yy * ly * ly;
        for i in 0..n {
            v += self.alpha_i[i] * lw[i] + self.alpha_iy[i] * lw[i] * ly;
            for j in 0..n {
                v += 0.5 * self.alpha_ij(i, j) * lw[i] * lw[j];
            }
        }
        Ok(v)
    }

    /// Cost shares implied by Shephard's lemma at `(w, y)`.
    pub fn predicted_shares(&self, w: &[f64], y: f64) -> Result<PredictedShares, TranslogError> {
        self.check_point(w, y)?;
        let n = self.inputs.len();
        let lw: Vec<f64> = w.iter().map(|p| p.ln()).collect();
        let ly = y.ln();
        let values = (0..n)
            .map(|i| {
                self.alpha_i[i]
                    + self.alpha_iy[i] * ly
                    + (0..n).map(|j| self.alpha_ij(i, j) * lw[j]).sum::<f64>()
            })
            .collect();
        Ok(PredictedShares {
            labels: self.inputs.clone(),
            values,
        })
    }

    /// `∂ln C / ∂ln y` at `(w, y)`.
    pub fn cost_output_elasticity(&self, w: &[f64], y: f64) -> Result<f64, TranslogError> {
        self.check_point(w, y)?;
        let ly = y.ln();
        let cross: f64 = self
            .alpha_iy
            .iter()
            .zip(w)
            .map(|(a, p)| a * p.ln())
            .sum();
        Ok(self.alpha_y + self.alpha_yy * ly + cross)
    }

    fn to_wire(&self) -> CoefficientsWire {
        CoefficientsWire {
            inputs: self.inputs.clone(),
            numeraire: self.numeraire.clone(),
            alpha0: self.alpha0,
            alpha_i: self.alpha_i.clone(),
            alpha_y: self.alpha_y,
            alpha_ij: self.alpha_ij_matrix(),
            alpha_yy: self.alpha_yy,
            alpha_iy: self.alpha_iy.clone(),
        }
    }
}

/// Serialized form; `alpha_ij` is written as the full mirrored matrix.
#[derive(Serialize, Deserialize)]
struct CoefficientsWire {
    inputs: Vec<String>,
    numeraire: String,
    alpha0: f64,
    alpha_i: Vec<f64>,
    alpha_y: f64,
    alpha_ij: Vec<Vec<f64>>,
    alpha_yy: f64,
    alpha_iy: Vec<f64>,
}

impl Serialize for TranslogCoefficients {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_wire().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TranslogCoefficients {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = CoefficientsWire::deserialize(d)?;
        TranslogCoefficients::new(
            w.inputs,
            w.numeraire,
            w.alpha0,
            w.alpha_i,
            w.alpha_y,
            &w.alpha_ij,
            w.alpha_yy,
            w.alpha_iy,
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Fitted shares. They sum to one by construction but, away from the
/// sample, individual values may leave `[0, 1]`; that is reported, not
/// clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedShares {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl PredictedShares {
    pub fn in_unit_interval(&self) -> bool {
        self.values.iter().all(|s| (0.0..=1.0).contains(s))
    }

    pub fn to_share_vector(&self) -> Result<ShareVector, DataError> {
        ShareVector::new(self.labels.clone(), self.values.clone())
    }
}

/// Observation expressed relative to the numeraire price.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedObservation {
    pub relative_cost: f64,
    pub relative_prices: Vec<f64>,
    pub output_level: f64,
    pub shares: Vec<f64>,
    pub numeraire_price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSample {
    pub inputs: Vec<String>,
    pub numeraire: usize,
    pub observations: Vec<NormalizedObservation>,
}

/// Divides cost and every input price by the numeraire's price.
pub fn normalize_by_numeraire(
    sample: &CostSample,
    numeraire: &str,
) -> Result<NormalizedSample, TranslogError> {
    let k = sample
        .input_index(numeraire)
        .ok_or_else(|| TranslogError::NumeraireNotFound(numeraire.to_string()))?;
    let observations = sample
        .observations
        .iter()
        .map(|obs| {
            let base = obs.input_prices[k];
            if !(base > 0.0) {
                return Err(TranslogError::NonPositivePrice(numeraire.to_string()));
            }
            Ok(NormalizedObservation {
                relative_cost: obs.total_cost / base,
                relative_prices: obs
                    .input_prices
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| if i == k { 1.0 } else { p / base })
                    .collect(),
                output_level: obs.output_level,
                shares: obs.cost_shares.values().to_vec(),
                numeraire_price: base,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NormalizedSample {
        inputs: sample.inputs.clone(),
        numeraire: k,
        observations,
    })
}

/// Generates noiseless observations from known coefficients at the given
/// `(prices, output)` points.
///
/// Fails if the model implies a share outside `[0, 1]` at any point.
pub fn synthesize_sample(
    coeffs: &TranslogCoefficients,
    points: &[(Vec<f64>, f64)],
) -> Result<CostSample, TranslogError> {
    let observations = points
        .iter()
        .enumerate()
        .map(|(t, (w, y))| {
            let cost = coeffs.predict_log_cost(w, *y)?.exp();
            let shares = coeffs.predicted_shares(w, *y)?.to_share_vector()?;
            Ok(CostObservation::new(
                format!("s{t}"),
                cost,
                w.clone(),
                *y,
                shares,
                None,
            )?)
        })
        .collect::<Result<Vec<_>, TranslogError>>()?;
    Ok(CostSample::new(coeffs.inputs.clone(), observations)?)
}
