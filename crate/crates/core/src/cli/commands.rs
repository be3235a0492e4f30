use std::path::Path;

use serde::{Deserialize, Serialize};

use super::output::{self, csv_line, emit, num, Format, Precision};
use super::{CliError, ElastArgs, FitArgs, PolicyArgs, Series, TfpArgs};
use crate::data_model::io::{parse_number, read_cost_sample_file, read_panel, read_sidecar};
use crate::data_model::{PriceQuantityPanel, ShareVector};
use crate::elasticities::{full_report, ElasticityReport};
use crate::index_numbers::{average_annual_growth, tfp_indices, Averaging, BaseMode};
use crate::policy::{
    evaluate_scenario, render_table, NetEffectBounds, PolicyScenario, SspResult,
};
use crate::translog::{
    fit as fit_system, EquationVariance, EstimationOptions, Estimator, FitReport,
    TranslogCoefficients,
};

const INDEX_DECIMALS: usize = 2;
const ELASTICITY_DECIMALS: usize = 3;

#[derive(Debug, Clone, Serialize)]
pub(crate) struct TfpRow {
    pub year: i32,
    pub input_index: f64,
    pub output_index: f64,
    pub tfp_index: f64,
}

#[derive(Debug, Clone, Serialize)]
pub(crate) struct TfpMean {
    pub input_index: f64,
    pub output_index: f64,
    pub tfp_index: f64,
}

#[derive(Debug, Clone, Serialize)]
pub(crate) struct TfpTable {
    pub series: Series,
    pub base_mode: BaseMode,
    pub base_year: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub currency: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity_unit: Option<String>,
    pub rows: Vec<TfpRow>,
    pub mean: TfpMean,
}

pub(crate) struct LoadedPanel {
    pub panel: PriceQuantityPanel,
    pub base_year: Option<i32>,
    pub currency: Option<String>,
    pub quantity_unit: Option<String>,
}

pub(crate) fn load_panel(path: &Path) -> Result<LoadedPanel, CliError> {
    let panel = read_panel(path)?;
    let meta = read_sidecar(path)?.unwrap_or_default();
    if let Some(y) = meta.base_year {
        if panel.year_index(y).is_none() {
            return Err(CliError::Validation(format!(
                "{}: sidecar base_year {y} is not a panel year",
                path.display()
            )));
        }
    }
    Ok(LoadedPanel {
        panel,
        base_year: meta.base_year,
        currency: meta.currency,
        quantity_unit: meta.quantity_unit,
    })
}

pub(crate) fn tfp_table(
    loaded: &LoadedPanel,
    base_year: Option<i32>,
    series: Series,
    mode: BaseMode,
) -> Result<TfpTable, CliError> {
    let panel = &loaded.panel;
    let base_year = base_year.or(loaded.base_year);
    let idx = tfp_indices(panel, base_year, mode).map_err(|e| CliError::computation("tfp", e))?;
    let rows: Vec<TfpRow> = match series {
        Series::Growth => std::iter::once(TfpRow {
            year: panel.years()[0],
            input_index: 1.0,
            output_index: 1.0,
            tfp_index: 1.0,
        })
        .chain(idx.links.iter().map(|l| TfpRow {
            year: l.to_year,
            input_index: l.input_growth,
            output_index: l.output_growth,
            tfp_index: l.tfp_growth,
        }))
        .collect(),
        Series::Index => (0..panel.years().len())
            .map(|t| TfpRow {
                year: panel.years()[t],
                input_index: idx.input.values[t],
                output_index: idx.output.values[t],
                tfp_index: idx.tfp.values[t],
            })
            .collect(),
    };
    let mean = |f: fn(&TfpRow) -> f64| {
        let col: Vec<f64> = rows.iter().map(f).collect();
        average_annual_growth(&col, Averaging::Arithmetic).map_err(|e| CliError::computation("tfp", e))
    };
    let mean = TfpMean {
        input_index: mean(|r| r.input_index)?,
        output_index: mean(|r| r.output_index)?,
        tfp_index: mean(|r| r.tfp_index)?,
    };
    Ok(TfpTable {
        series,
        base_mode: mode,
        base_year: idx.tfp.base_year,
        currency: loaded.currency.clone(),
        quantity_unit: loaded.quantity_unit.clone(),
        rows,
        mean,
    })
}

pub(crate) fn tfp_csv(table: &TfpTable, precision: Precision) -> String {
    let f = |x: f64| num(x, INDEX_DECIMALS, precision);
    let mut out = csv_line(&[
        "year".into(),
        "input_index".into(),
        "output_index".into(),
        "tfp_index".into(),
    ]);
    for r in &table.rows {
        out += &csv_line(&[r.year.to_string(), f(r.input_index), f(r.output_index), f(r.tfp_index)]);
    }
    out += &csv_line(&[
        "mean".into(),
        f(table.mean.input_index),
        f(table.mean.output_index),
        f(table.mean.tfp_index),
    ]);
    out
}

pub(crate) fn tfp(args: &TfpArgs, format: Format, precision: Precision) -> Result<(), CliError> {
    let loaded = load_panel(&args.panel)?;
    let table = tfp_table(&loaded, args.base_year, args.series, args.base.into())?;
    let text = match format {
        Format::Csv => tfp_csv(&table, precision),
        Format::Json => output::to_json(&table, precision),
    };
    emit(&text, args.out.as_deref())
}

/// Sample point at which elasticities are evaluated by default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct EvaluationPoint {
    pub mean_shares: Vec<f64>,
    pub prices: Vec<f64>,
    pub output_level: f64,
}

#[derive(Debug, Clone, Serialize)]
pub(crate) struct FitDocument<'a> {
    pub numeraire: &'a str,
    pub dropped_share_equation: &'a str,
    pub estimator: Estimator,
    pub converged: bool,
    pub iterations_used: usize,
    pub sample_size: usize,
    pub coefficients: &'a TranslogCoefficients,
    pub residual_variance: &'a [EquationVariance],
    pub evaluation_point: EvaluationPoint,
}

fn fit_csv(report: &FitReport, precision: Precision) -> String {
    let c = &report.coefficients;
    let f = |x: f64| num(x, 6, precision);
    let mut out = csv_line(&["parameter".into(), "value".into()]);
    let mut row = |name: String, v: f64| out += &csv_line(&[name, f(v)]);
    row("alpha0".into(), c.alpha0());
    for (i, name) in c.inputs().iter().enumerate() {
        row(format!("alpha_i[{name}]"), c.alpha_i()[i]);
    }
    row("alpha_y".into(), c.alpha_y());
    for (i, a) in c.inputs().iter().enumerate() {
        for (j, b) in c.inputs().iter().enumerate() {
            row(format!("alpha_ij[{a},{b}]"), c.alpha_ij(i, j));
        }
    }
    row("alpha_yy".into(), c.alpha_yy());
    for (i, name) in c.inputs().iter().enumerate() {
        row(format!("alpha_iy[{name}]"), c.alpha_iy()[i]);
    }
    out
}

pub(crate) fn fit(args: &FitArgs, format: Format, precision: Precision) -> Result<(), CliError> {
    let sample = read_cost_sample_file(&args.obs, args.inputs.as_deref())?;
    let mut options = EstimationOptions::new(args.numeraire.clone()).with_estimator(args.estimator.into());
    options.dropped_share_equation = args.drop.clone();
    options.max_iterations = args.max_iterations;
    options.convergence_tol = args.tol;
    if sample.input_index(&options.numeraire).is_none() {
        return Err(CliError::Validation(format!(
            "numeraire `{}` is not among the inputs {:?}",
            options.numeraire, sample.inputs
        )));
    }
    let report = fit_system(&sample, &options).map_err(|e| CliError::computation("fit", e))?;
    let (prices, output_level) = sample.geometric_mean_point();
    let doc = FitDocument {
        numeraire: report.coefficients.numeraire(),
        dropped_share_equation: &report.dropped_share_equation,
        estimator: report.estimator,
        converged: report.converged,
        iterations_used: report.iterations_used,
        sample_size: report.sample_size,
        coefficients: &report.coefficients,
        residual_variance: &report.residual_variance_per_equation,
        evaluation_point: EvaluationPoint {
            mean_shares: sample.mean_shares(),
            prices,
            output_level,
        },
    };
    let text = match format {
        Format::Json => output::to_json(&doc, precision),
        Format::Csv => fit_csv(&report, precision),
    };
    emit(&text, args.out.as_deref())?;
    if !report.converged {
        let iterations = report.iterations_used;
        return Err(CliError::computation(
            "fit",
            format!("not converged after {iterations} iterations; best iterate written"),
        ));
    }
    Ok(())
}

pub(crate) struct LoadedCoefficients {
    pub coefficients: TranslogCoefficients,
    pub point: Option<EvaluationPoint>,
}

pub(crate) fn load_coefficients(path: &Path) -> Result<LoadedCoefficients, CliError> {
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: label.clone(),
        message: e.to_string(),
    })?;
    let parse_err = |e: serde_json::Error| CliError::Parse {
        path: label.clone(),
        line: e.line() as u64,
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
    let (coef_value, point_value) = match value.get("coefficients") {
        Some(c) => (c.clone(), value.get("evaluation_point").cloned()),
        None => (value, None),
    };
    let coefficients: TranslogCoefficients = serde_json::from_value(coef_value)
        .map_err(|e| CliError::Validation(format!("{label}: {e}")))?;
    let point = point_value
        .map(serde_json::from_value::<EvaluationPoint>)
        .transpose()
        .map_err(|e| CliError::Validation(format!("{label}: evaluation_point: {e}")))?;
    if let Some(p) = &point {
        let n = coefficients.inputs().len();
        if p.mean_shares.len() != n || p.prices.len() != n {
            return Err(CliError::Validation(format!(
                "{label}: evaluation_point does not match {n} inputs"
            )));
        }
    }
    Ok(LoadedCoefficients { coefficients, point })
}

/// Parses `a=0.5,b=0.5` (any order) or `0.5,0.5` (input order).
pub(crate) fn parse_vector(spec: &str, inputs: &[String], what: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != inputs.len() {
        return Err(CliError::Validation(format!(
            "{what}: expected {} values, got {}",
            inputs.len(),
            parts.len()
        )));
    }
    let bad = |m: String| CliError::Validation(format!("{what}: {m}"));
    if parts.iter().all(|p| p.contains('=')) {
        let mut out = vec![None; inputs.len()];
        for p in parts {
            let (k, v) = p.split_once('=').expect("checked");
            let i = inputs
                .iter()
                .position(|n| n == k.trim())
                .ok_or_else(|| bad(format!("unknown input `{}`", k.trim())))?;
            out[i] = Some(parse_number(v).map_err(bad)?);
        }
        out.into_iter()
            .zip(inputs)
            .map(|(v, n)| v.ok_or_else(|| bad(format!("no value for `{n}`"))))
            .collect()
    } else {
        parts.iter().map(|p| parse_number(p).map_err(bad)).collect()
    }
}

pub(crate) fn elasticity_report(
    loaded: &LoadedCoefficients,
    shares_spec: &str,
    prices: Option<&str>,
    output_level: Option<f64>,
) -> Result<ElasticityReport, CliError> {
    let c = &loaded.coefficients;
    let inputs = c.inputs();
    let w = match prices {
        Some(spec) => parse_vector(spec, inputs, "--prices")?,
        None => loaded
            .point
            .as_ref()
            .map(|p| p.prices.clone())
            .unwrap_or_else(|| vec![1.0; inputs.len()]),
    };
    let y = output_level
        .or_else(|| loaded.point.as_ref().map(|p| p.output_level))
        .unwrap_or(1.0);
    let share_values = match shares_spec.trim() {
        "mean" => loaded
            .point
            .as_ref()
            .map(|p| p.mean_shares.clone())
            .ok_or_else(|| {
                CliError::Validation("coefficients carry no sample mean shares; pass --shares".into())
            })?,
        "fitted" => c
            .predicted_shares(&w, y)
            .map_err(|e| CliError::computation("elast", e))?
            .values,
        spec => parse_vector(spec, inputs, "--shares")?,
    };
    let shares = ShareVector::new(inputs.to_vec(), share_values)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    full_report(c, &shares, y, &w).map_err(|e| CliError::computation("elast", e))
}

pub(crate) fn elasticity_csv(report: &ElasticityReport, precision: Precision) -> String {
    let f = |x: f64| num(x, ELASTICITY_DECIMALS, precision);
    let mut header = vec!["block".to_string(), "factor".to_string()];
    header.extend(report.inputs.iter().cloned());
    header.push("output".into());
    let mut out = csv_line(&header);
    for (i, name) in report.inputs.iter().enumerate() {
        let mut row = vec!["price".to_string(), name.clone()];
        row.extend(report.price[i].iter().map(|&v| f(v)));
        row.push(f(report.output_elasticity[i]));
        out += &csv_line(&row);
    }
    for (i, name) in report.inputs.iter().enumerate() {
        let mut row = vec!["allen".to_string(), name.clone()];
        row.extend(report.allen[i].iter().map(|&v| f(v)));
        row.push(String::new());
        out += &csv_line(&row);
    }
    out
}

pub(crate) fn elast(args: &ElastArgs, format: Format, precision: Precision) -> Result<(), CliError> {
    let loaded = load_coefficients(&args.coeffs)?;
    let report = elasticity_report(&loaded, &args.shares, args.prices.as_deref(), args.output_level)?;
    let text = match format {
        Format::Csv => elasticity_csv(&report, precision),
        Format::Json => output::to_json(&report, precision),
    };
    emit(&text, args.out.as_deref())
}

pub(crate) fn load_scenario(path: &Path) -> Result<PolicyScenario, CliError> {
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: label.clone(),
        message: e.to_string(),
    })?;
    let file: crate::policy::ScenarioFile = toml::from_str(&text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
            .unwrap_or(0);
        CliError::Parse {
            path: label.clone(),
            line,
            message: e.message().to_string(),
        }
    })?;
    PolicyScenario::from_file(file).map_err(|e| CliError::Validation(format!("{label}: {e}")))
}

pub(crate) fn parse_bounds(spec: &str) -> Result<NetEffectBounds, CliError> {
    let bad = |m: String| CliError::Validation(format!("--bounds: {m}"));
    let (lo, hi) = spec
        .split_once(',')
        .ok_or_else(|| bad("expected `lower,upper`".into()))?;
    let lower = parse_number(lo).map_err(bad)?;
    let upper = parse_number(hi).map_err(bad)?;
    NetEffectBounds::new(lower, upper).map_err(|e| bad(e.to_string()))
}

pub(crate) fn policy_csv(result: &SspResult, precision: Precision) -> String {
    let f2 = |x: f64| num(x, 2, precision);
    let f4 = |x: f64| num(x, 4, precision);
    let mut out = csv_line(&["field".into(), "value".into()]);
    let mut row = |k: String, v: String| out += &csv_line(&[k, v]);
    row("crop".into(), result.crop.clone());
    for c in &result.contributions {
        row(format!("growth:{}", c.item), f4(c.growth));
        row(format!("elasticity:{}", c.item), f4(c.elasticity));
        row(format!("contribution:{}", c.item), f4(c.contribution));
    }
    row("net_effect_raw".into(), f4(result.net_effect_raw));
    row("net_effect_clamped".into(), f4(result.net_effect_clamped));
    row("was_clamped".into(), result.was_clamped.to_string());
    row("net_effect_applied".into(), f4(result.net_effect_applied));
    row("cost_a2fl".into(), num(result.cost_a2fl, 0, precision));
    row("cost_c2".into(), num(result.cost_c2, 0, precision));
    row("msp_cacp".into(), num(result.msp_cacp, 0, precision));
    row("swaminathan_price".into(), result.swaminathan_price.to_string());
    row("gap_cacp_vs_swaminathan_pct".into(), f2(result.gap_cacp_vs_swaminathan_pct));
    row("ssp".into(), result.ssp.to_string());
    row("gap_cacp_vs_ssp_pct".into(), f2(result.gap_cacp_vs_ssp_pct));
    out
}

pub(crate) fn policy(args: &PolicyArgs, format: Format, precision: Precision) -> Result<(), CliError> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(spec) = &args.bounds {
        scenario.bounds = parse_bounds(spec)?;
    }
    if let Some(g) = args.gap_base {
        scenario.gap_base = g.into();
    }
    if args.unrounded_net_effect {
        scenario.net_effect_decimals = None;
    }
    let result = evaluate_scenario(&scenario).map_err(|e| CliError::computation("policy", e))?;
    let text = match format {
        Format::Json => output::to_json(&result, precision),
        Format::Csv => policy_csv(&result, precision),
    };
    emit(&text, args.out.as_deref())?;
    if args.out.is_some() {
        emit(&render_table(std::slice::from_ref(&result)), None)?;
    }
    Ok(())
}
