//! Joint estimation of the normalized cost equation and the retained
//! share equations.
//!
//! Free parameters, with `k` the numeraire and `r` running over the other
//! `m = n - 1` inputs:
//!
//! ```text
//! [ a0 | a_r (m) | a_y | a_rs, r <= s (m(m+1)/2) | a_yy | a_ry (m) ]
//! ```
//!
//! The numeraire's coefficients follow from the homogeneity restrictions.
//! The numeraire's own share equation, when retained, is written as
//! `S_k - 1 = -Σ_r S_r(θ)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{self, LstsqError};
use super::{normalize_by_numeraire, NormalizedSample, TranslogCoefficients, TranslogError};
use crate::data_model::CostSample;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Re-estimate the cross-equation residual covariance until the
    /// parameters stop moving.
    #[default]
    IteratedFeasibleGls,
    /// One pass of equally weighted stacked least squares.
    StackedRestrictedLs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationOptions {
    pub numeraire: String,
    /// Defaults to the numeraire.
    pub dropped_share_equation: Option<String>,
    pub estimator: Estimator,
    pub max_iterations: usize,
    /// Maximum change of any free parameter, relative to `max(|θ|, 1)`.
    pub convergence_tol: f64,
}

impl EstimationOptions {
    pub fn new(numeraire: impl Into<String>) -> Self {
        Self {
            numeraire: numeraire.into(),
            dropped_share_equation: None,
            estimator: Estimator::default(),
            max_iterations: 100,
            convergence_tol: 1e-8,
        }
    }

    pub fn dropping(mut self, input: impl Into<String>) -> Self {
        self.dropped_share_equation = Some(input.into());
        self
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn dropped(&self) -> &str {
        self.dropped_share_equation
            .as_deref()
            .unwrap_or(&self.numeraire)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquationVariance {
    pub equation: String,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub coefficients: TranslogCoefficients,
    pub estimator: Estimator,
    pub dropped_share_equation: String,
    pub iterations_used: usize,
    pub converged: bool,
    pub residual_variance_per_equation: Vec<EquationVariance>,
    pub sample_size: usize,
}

impl FitReport {
    pub fn require_converged(self) -> Result<Self, TranslogError> {
        if self.converged {
            Ok(self)
        } else {
            Err(TranslogError::NotConverged(Box::new(self)))
        }
    }
}

struct Layout {
    n: usize,
    numeraire: usize,
    /// Non-numeraire inputs in input order.
    others: Vec<usize>,
    pair_index: Vec<Vec<usize>>,
    n_pairs: usize,
}

impl Layout {
    fn new(n: usize, numeraire: usize) -> Self {
        let others: Vec<usize> = (0..n).filter(|&i| i != numeraire).collect();
        let m = others.len();
        let mut pair_index = vec![vec![0; m]; m];
        let mut next = 0;
        for a in 0..m {
            for b in a..m {
                pair_index[a][b] = next;
                pair_index[b][a] = next;
                next += 1;
            }
        }
        Self {
            n,
            numeraire,
            others,
            pair_index,
            n_pairs: next,
        }
    }

    fn m(&self) -> usize {
        self.others.len()
    }

    fn n_params(&self) -> usize {
        3 + 2 * self.m() + self.n_pairs
    }

    fn a_i(&self, a: usize) -> usize {
        1 + a
    }

    fn a_y(&self) -> usize {
        1 + self.m()
    }

    fn a_pair(&self, a: usize, b: usize) -> usize {
        2 + self.m() + self.pair_index[a][b]
    }

    fn a_yy(&self) -> usize {
        2 + self.m() + self.n_pairs
    }

    fn a_iy(&self, a: usize) -> usize {
        3 + self.m() + self.n_pairs + a
    }

    fn cost_row(&self, lp: &[f64], ly: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n_params()];
        x[0] = 1.0;
        for a in 0..self.m() {
            x[self.a_i(a)] = lp[a];
            x[self.a_iy(a)] = lp[a] * ly;
            x[self.a_pair(a, a)] = 0.5 * lp[a] * lp[a];
            for b in a + 1..self.m() {
                x[self.a_pair(a, b)] = lp[a] * lp[b];
            }
        }
        x[self.a_y()] = ly;
        x[self.a_yy()] = 0.5 * ly * ly;
        x
    }

    fn share_row(&self, a: usize, lp: &[f64], ly: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n_params()];
        x[self.a_i(a)] = 1.0;
        x[self.a_iy(a)] = ly;
        for b in 0..self.m() {
            x[self.a_pair(a, b)] += lp[b];
        }
        x
    }

    fn coefficients(
        &self,
        inputs: &[String],
        theta: &DVector<f64>,
    ) -> Result<TranslogCoefficients, TranslogError> {
        let (n, k, m) = (self.n, self.numeraire, self.m());
        let mut alpha_i = vec![0.0; n];
        let mut alpha_iy = vec![0.0; n];
        let mut alpha_ij = vec![vec![0.0; n]; n];
        for (a, &i) in self.others.iter().enumerate() {
            alpha_i[i] = theta[self.a_i(a)];
            alpha_iy[i] = theta[self.a_iy(a)];
            for (b, &j) in self.others.iter().enumerate() {
                alpha_ij[i][j] = theta[self.a_pair(a, b)];
            }
        }
        alpha_i[k] = 1.0 - (0..m).map(|a| theta[self.a_i(a)]).sum::<f64>();
        alpha_iy[k] = -(0..m).map(|a| theta[self.a_iy(a)]).sum::<f64>();
        for &i in &self.others {
            let s: f64 = self.others.iter().map(|&j| alpha_ij[i][j]).sum();
            alpha_ij[i][k] = -s;
            alpha_ij[k][i] = -s;
        }
        alpha_ij[k][k] = -self.others.iter().map(|&i| alpha_ij[i][k]).sum::<f64>();
        TranslogCoefficients::new(
            inputs.to_vec(),
            inputs[k].clone(),
            theta[0],
            alpha_i,
            theta[self.a_y()],
            &alpha_ij,
            theta[self.a_yy()],
            alpha_iy,
        )
    }
}

/// Stacked equations for one observation: regressor rows and dependent values.
struct ObservationBlock {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn build_blocks(
    layout: &Layout,
    sample: &NormalizedSample,
    retained: &[usize],
) -> Vec<ObservationBlock> {
    sample
        .observations
        .iter()
        .map(|obs| {
            let lp: Vec<f64> = layout
                .others
                .iter()
                .map(|&i| obs.relative_prices[i].ln())
                .collect();
            let ly = obs.output_level.ln();
            let mut x = vec![layout.cost_row(&lp, ly)];
            let mut y = vec![obs.relative_cost.ln()];
            for &i in retained {
                if i == layout.numeraire {
                    let mut row = vec![0.0; layout.n_params()];
                    for a in 0..layout.m() {
                        for (r, v) in row.iter_mut().zip(layout.share_row(a, &lp, ly)) {
                            *r -= v;
                        }
                    }
                    x.push(row);
                    y.push(obs.shares[i] - 1.0);
                } else {
                    let a = layout.others.iter().position(|&o| o == i).expect("non-numeraire");
                    x.push(layout.share_row(a, &lp, ly));
                    y.push(obs.shares[i]);
                }
            }
            ObservationBlock { x, y }
        })
        .collect()
}

fn solve(
    blocks: &[ObservationBlock],
    n_params: usize,
    whitening: Option<&DMatrix<f64>>,
) -> Result<DVector<f64>, TranslogError> {
    let eqs = blocks[0].y.len();
    let rows = blocks.len() * eqs;
    let mut a = DMatrix::<f64>::zeros(rows, n_params);
    let mut b = DVector::<f64>::zeros(rows);
    for (t, block) in blocks.iter().enumerate() {
        for e in 0..eqs {
            let r = t * eqs + e;
            match whitening {
                None => {
                    for p in 0..n_params {
                        a[(r, p)] = block.x[e][p];
                    }
                    b[r] = block.y[e];
                }
                Some(li) => {
                    // lower triangular: only equations f <= e contribute
                    for f in 0..=e {
                        let c = li[(e, f)];
                        for p in 0..n_params {
                            a[(r, p)] += c * block.x[f][p];
                        }
                        b[r] += c * block.y[f];
                    }
                }
            }
        }
    }
    linalg::least_squares(&a, &b).map_err(|e| match e {
        LstsqError::Singular { condition } => TranslogError::SingularSystem { condition },
    })
}

fn residuals(blocks: &[ObservationBlock], theta: &DVector<f64>) -> DMatrix<f64> {
    let eqs = blocks[0].y.len();
    let mut res = DMatrix::<f64>::zeros(blocks.len(), eqs);
    for (t, block) in blocks.iter().enumerate() {
        for e in 0..eqs {
            let fitted: f64 = block.x[e].iter().zip(theta.iter()).map(|(x, c)| x * c).sum();
            res[(t, e)] = block.y[e] - fitted;
        }
    }
    res
}

/// Residual variance small enough, relative to the dependent variable,
/// that the equation is reproduced exactly up to rounding.
fn is_exact_fit(blocks: &[ObservationBlock], sigma: &DMatrix<f64>) -> bool {
    let n = blocks.len() as f64;
    (0..sigma.nrows()).all(|e| {
        let mean_sq = blocks.iter().map(|b| b.y[e] * b.y[e]).sum::<f64>() / n;
        sigma[(e, e)] <= 1e-24 * mean_sq.max(1.0)
    })
}

fn max_relative_change(old: &DVector<f64>, new: &DVector<f64>) -> f64 {
    old.iter()
        .zip(new.iter())
        .map(|(o, n)| (n - o).abs() / o.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Estimates the translog cost system.
///
/// Returns a report with `converged == false` when the iteration cap is
/// reached; use [`FitReport::require_converged`] to turn that into an error.
pub fn fit(sample: &CostSample, options: &EstimationOptions) -> Result<FitReport, TranslogError> {
    let n = sample.inputs.len();
    if n < 2 {
        return Err(TranslogError::TooFewInputs(n));
    }
    if options.max_iterations == 0 {
        return Err(TranslogError::InvalidOptions("max_iterations must be positive".into()));
    }
    if !(options.convergence_tol > 0.0) {
        return Err(TranslogError::InvalidOptions("convergence_tol must be positive".into()));
    }
    let normalized = normalize_by_numeraire(sample, &options.numeraire)?;
    let dropped = sample
        .input_index(options.dropped())
        .ok_or_else(|| TranslogError::NumeraireNotFound(options.dropped().to_string()))?;

    let layout = Layout::new(n, normalized.numeraire);
    let n_params = layout.n_params();
    let t = sample.observations.len();
    if t < n_params {
        return Err(TranslogError::InsufficientObservations {
            needed: n_params,
            got: t,
        });
    }

    let retained: Vec<usize> = (0..n).filter(|&i| i != dropped).collect();
    let blocks = build_blocks(&layout, &normalized, &retained);

    let mut theta = solve(&blocks, n_params, None)?;
    let mut iterations_used = 1;
    let mut converged = options.estimator == Estimator::StackedRestrictedLs;
    while !converged {
        let res = residuals(&blocks, &theta);
        let sigma = res.transpose() * &res / t as f64;
        if is_exact_fit(&blocks, &sigma) {
            converged = true;
            break;
        }
        if iterations_used >= options.max_iterations {
            break;
        }
        let whitening = linalg::inverse_cholesky_factor(&sigma).ok_or(
            TranslogError::SingularSystem {
                condition: f64::INFINITY,
            },
        )?;
        let next = solve(&blocks, n_params, Some(&whitening))?;
        iterations_used += 1;
        let change = max_relative_change(&theta, &next);
        theta = next;
        if change < options.convergence_tol {
            converged = true;
        }
    }

    let res = residuals(&blocks, &theta);
    let mut names = vec!["cost".to_string()];
    names.extend(retained.iter().map(|&i| format!("share_{}", sample.inputs[i])));
    let residual_variance_per_equation = names
        .into_iter()
        .enumerate()
        .map(|(e, equation)| EquationVariance {
            equation,
            variance: res.column(e).norm_squared() / t as f64,
        })
        .collect();

    Ok(FitReport {
        coefficients: layout.coefficients(&sample.inputs, &theta)?,
        estimator: options.estimator,
        dropped_share_equation: sample.inputs[dropped].clone(),
        iterations_used,
        converged,
        residual_variance_per_equation,
        sample_size: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{CostObservation, ShareVector};
    use crate::translog::synthesize_sample;

    fn truth() -> TranslogCoefficients {
        TranslogCoefficients::new(
            vec!["labour".into(), "fert".into(), "machine".into()],
            "machine",
            1.2,
            vec![0.5, 0.2, 0.3],
            0.85,
            &[
                vec![0.06, -0.02, -0.04],
                vec![-0.02, 0.05, -0.03],
                vec![-0.04, -0.03, 0.07],
            ],
            0.04,
            vec![0.02, -0.01, -0.01],
        )
        .unwrap()
    }

    fn grid(count: usize) -> Vec<(Vec<f64>, f64)> {
        // deterministic quasi-random design
        (0..count)
            .map(|t| {
                let f = |k: f64| ((t as f64 + 1.0) * k).sin();
                (
                    vec![(0.4 * f(1.3)).exp(), (0.5 * f(2.7)).exp(), (0.3 * f(0.9)).exp()],
                    (0.6 * f(1.9) + 1.0).exp(),
                )
            })
            .collect()
    }

    #[test]
    fn layout_counts_free_parameters() {
        assert_eq!(Layout::new(3, 2).n_params(), 10);
        assert_eq!(Layout::new(2, 0).n_params(), 6);
        assert_eq!(Layout::new(4, 1).n_params(), 15);
    }

    #[test]
    fn recovers_noiseless_coefficients() {
        let truth = truth();
        let sample = synthesize_sample(&truth, &grid(30)).unwrap();
        for estimator in [Estimator::IteratedFeasibleGls, Estimator::StackedRestrictedLs] {
            let report = fit(&sample, &EstimationOptions::new("machine").with_estimator(estimator)).unwrap();
            assert!(report.converged);
            let c = &report.coefficients;
            assert!((c.alpha0() - truth.alpha0()).abs() < 1e-9);
            for i in 0..3 {
                assert!((c.alpha_i()[i] - truth.alpha_i()[i]).abs() < 1e-9);
                for j in 0..3 {
                    assert!((c.alpha_ij(i, j) - truth.alpha_ij(i, j)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn too_few_observations() {
        let sample = synthesize_sample(&truth(), &grid(2)).unwrap();
        assert_eq!(
            fit(&sample, &EstimationOptions::new("machine")),
            Err(TranslogError::InsufficientObservations { needed: 10, got: 2 })
        );
    }

    #[test]
    fn collinear_prices_are_singular() {
        // labour and fertiliser prices move together
        let points: Vec<_> = grid(20)
            .into_iter()
            .map(|(w, y)| (vec![w[0], 2.0 * w[0], w[2]], y))
            .collect();
        let sample = synthesize_sample(&truth(), &points).unwrap();
        assert!(matches!(
            fit(&sample, &EstimationOptions::new("machine")),
            Err(TranslogError::SingularSystem { .. })
        ));
    }

    #[test]
    fn unknown_inputs_rejected() {
        let sample = synthesize_sample(&truth(), &grid(20)).unwrap();
        assert!(matches!(
            fit(&sample, &EstimationOptions::new("land")),
            Err(TranslogError::NumeraireNotFound(_))
        ));
        assert!(matches!(
            fit(&sample, &EstimationOptions::new("machine").dropping("land")),
            Err(TranslogError::NumeraireNotFound(_))
        ));
    }

    fn noisy_sample() -> CostSample {
        let truth = truth();
        let clean = synthesize_sample(&truth, &grid(40)).unwrap();
        let obs = clean
            .observations
            .iter()
            .enumerate()
            .map(|(t, o)| {
                let e = |k: f64| 0.01 * ((t as f64 + 0.5) * k).cos();
                let mut s = o.cost_shares.values().to_vec();
                s[0] += e(3.1);
                s[1] += e(5.3) - e(7.7);
                s[2] = 1.0 - s[0] - s[1];
                let shares = ShareVector::new(clean.inputs.clone(), s).unwrap();
                CostObservation::new(
                    o.id.clone(),
                    o.total_cost * (1.0 + e(11.9)),
                    o.input_prices.clone(),
                    o.output_level,
                    shares,
                    None,
                )
                .unwrap()
            })
            .collect();
        CostSample::new(clean.inputs.clone(), obs).unwrap()
    }

    #[test]
    fn iterated_gls_converges_on_noisy_data() {
        let report = fit(&noisy_sample(), &EstimationOptions::new("machine")).unwrap();
        assert!(report.converged);
        assert!(report.iterations_used > 1 && report.iterations_used <= 100);
        assert_eq!(report.residual_variance_per_equation.len(), 3);
        assert!(report.residual_variance_per_equation.iter().all(|v| v.variance > 0.0));
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let mut opts = EstimationOptions::new("machine");
        opts.max_iterations = 1;
        let report = fit(&noisy_sample(), &opts).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations_used, 1);
        assert!(matches!(
            report.require_converged(),
            Err(TranslogError::NotConverged(_))
        ));
    }

    #[test]
    fn fixed_point_ignores_dropped_equation() {
        let sample = noisy_sample();
        let mut base = EstimationOptions::new("machine");
        base.convergence_tol = 1e-13;
        base.max_iterations = 500;
        let a = fit(&sample, &base).unwrap();
        let b = fit(&sample, &base.clone().dropping("labour")).unwrap();
        let c = fit(&sample, &base.clone().dropping("fert")).unwrap();
        for other in [&b, &c] {
            assert!(other.converged);
            let (x, y) = (&a.coefficients, &other.coefficients);
            assert!((x.alpha0() - y.alpha0()).abs() < 1e-8);
            for i in 0..3 {
                assert!((x.alpha_i()[i] - y.alpha_i()[i]).abs() < 1e-8);
                assert!((x.alpha_iy()[i] - y.alpha_iy()[i]).abs() < 1e-8);
                for j in 0..3 {
                    assert!((x.alpha_ij(i, j) - y.alpha_ij(i, j)).abs() < 1e-8);
                }
            }
        }
    }
}
