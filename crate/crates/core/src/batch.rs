//! Batch evaluation across crops, samples or scenarios.
//!
//! Each function has a `_sequential` twin that never touches the thread
//! pool; results are identical and in input order either way.

use crate::data_model::{CostSample, PriceQuantityPanel};
use crate::index_numbers::{tfp_indices, BaseMode, IndexError, TfpIndices};
use crate::par;
use crate::policy::{evaluate_scenario, PolicyError, PolicyScenario, SspResult};
use crate::translog::{fit, EstimationOptions, FitReport, TranslogError};

pub fn fit_all(
    samples: &[CostSample],
    options: &EstimationOptions,
) -> Vec<Result<FitReport, TranslogError>> {
    par::map(samples, |s| fit(s, options))
}

pub fn fit_all_sequential(
    samples: &[CostSample],
    options: &EstimationOptions,
) -> Vec<Result<FitReport, TranslogError>> {
    par::map_sequential(samples, |s| fit(s, options))
}

pub fn evaluate_all(scenarios: &[PolicyScenario]) -> Vec<Result<SspResult, PolicyError>> {
    par::map(scenarios, evaluate_scenario)
}

pub fn evaluate_all_sequential(
    scenarios: &[PolicyScenario],
) -> Vec<Result<SspResult, PolicyError>> {
    par::map_sequential(scenarios, evaluate_scenario)
}

pub fn tfp_all(
    panels: &[PriceQuantityPanel],
    mode: BaseMode,
) -> Vec<Result<TfpIndices, IndexError>> {
    par::map(panels, |p| tfp_indices(p, None, mode))
}

pub fn tfp_all_sequential(
    panels: &[PriceQuantityPanel],
    mode: BaseMode,
) -> Vec<Result<TfpIndices, IndexError>> {
    par::map_sequential(panels, |p| tfp_indices(p, None, mode))
}
