//! Allen partial elasticities of substitution and input-demand elasticities
//! implied by translog coefficients at an evaluation point.

use serde::Serialize;
use thiserror::Error;

use crate::data_model::ShareVector;
use crate::translog::{TranslogCoefficients, TranslogError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElasticityError {
    #[error("share {0} must lie in (0, 1]")]
    ZeroShare(f64),
    #[error("evaluation shares are labelled {got:?}, coefficients model {expected:?}")]
    InputMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error(transparent)]
    Translog(#[from] TranslogError),
}

fn check_share(s: f64) -> Result<(), ElasticityError> {
    if s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(ElasticityError::ZeroShare(s))
    }
}

/// `σ_ii = (α_ii + S_i² − S_i) / S_i²`
pub fn allen_own(alpha_ii: f64, share_i: f64) -> Result<f64, ElasticityError> {
    check_share(share_i)?;
    Ok((alpha_ii + share_i * share_i - share_i) / (share_i * share_i))
}

/// `σ_ij = (α_ij + S_i S_j) / (S_i S_j)`
pub fn allen_cross(alpha_ij: f64, share_i: f64, share_j: f64) -> Result<f64, ElasticityError> {
    check_share(share_i)?;
    check_share(share_j)?;
    let ss = share_i * share_j;
    Ok((alpha_ij + ss) / ss)
}

/// `η_ij = σ_ij S_j`
pub fn price_elasticity(sigma_ij: f64, share_j: f64) -> Result<f64, ElasticityError> {
    check_share(share_j)?;
    Ok(sigma_ij * share_j)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElasticityReport {
    pub inputs: Vec<String>,
    pub allen: Vec<Vec<f64>>,
    /// `price[i][j]`: response of demand for input `i` to the price of `j`.
    pub price: Vec<Vec<f64>>,
    /// `∂ln x_i / ∂ln y`.
    pub output_elasticity: Vec<f64>,
    pub shares_used: ShareVector,
    pub own_price_all_negative: bool,
}

/// Assembles the full elasticity report at the given shares, prices and
/// output level.
///
/// Output elasticities use the derived demand `x_i = S_i C / w_i`:
/// `∂ln x_i/∂ln y = ∂ln C/∂ln y + α_iy / S_i`.
pub fn full_report(
    coeffs: &TranslogCoefficients,
    shares: &ShareVector,
    output_level: f64,
    w: &[f64],
) -> Result<ElasticityReport, ElasticityError> {
    if shares.labels() != coeffs.inputs() {
        return Err(ElasticityError::InputMismatch {
            expected: coeffs.inputs().to_vec(),
            got: shares.labels().to_vec(),
        });
    }
    let s = shares.values();
    let n = s.len();
    let mut allen = vec![vec![0.0; n]; n];
    let mut price = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            allen[i][j] = if i == j {
                allen_own(coeffs.alpha_ij(i, i), s[i])?
            } else {
                allen_cross(coeffs.alpha_ij(i, j), s[i], s[j])?
            };
            price[i][j] = price_elasticity(allen[i][j], s[j])?;
        }
    }
    let scale = coeffs.cost_output_elasticity(w, output_level)?;
    let output_elasticity = (0..n).map(|i| scale + coeffs.alpha_iy()[i] / s[i]).collect();
    let own_price_all_negative = (0..n).all(|i| price[i][i] < 0.0);
    Ok(ElasticityReport {
        inputs: coeffs.inputs().to_vec(),
        allen,
        price,
        output_elasticity,
        shares_used: shares.clone(),
        own_price_all_negative,
    })
}

/// Report evaluated at the model's own fitted shares for `(w, y)`.
pub fn report_at_point(
    coeffs: &TranslogCoefficients,
    w: &[f64],
    output_level: f64,
) -> Result<ElasticityReport, ElasticityError> {
    let shares = coeffs
        .predicted_shares(w, output_level)?
        .to_share_vector()
        .map_err(TranslogError::from)?;
    full_report(coeffs, &shares, output_level, w)
}
