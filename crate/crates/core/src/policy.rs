//! Price-growth decomposition, net effect and the Strategic Support Price.
//!
//! Each factor or product contributes `ΔP · E` where `ΔP` is its relative
//! unit-price change and `E` its elasticity. The contributions sum to the
//! net effect, which is bounded and then applied as
//! `SSP = MSP · (1 − net effect)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{ItemId, ItemKind};

pub const DEFAULT_LOWER_BOUND: f64 = -2.0;
pub const DEFAULT_UPPER_BOUND: f64 = 0.8;
/// Net effects are applied at the precision they are reported with.
pub const DEFAULT_NET_EFFECT_DECIMALS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("price of `{item}` must be strictly positive, got {value}")]
    NonPositivePrice { item: String, value: f64 },
    #[error("no contributions to sum")]
    EmptyContributions,
    #[error("invalid net-effect bounds [{lower}, {upper}]")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("MSP must be strictly positive, got {0}")]
    NonPositiveMsp(f64),
    #[error("cost must be strictly positive, got {0}")]
    NonPositiveCost(f64),
    #[error("target price must be strictly positive, got {0}")]
    NonPositiveTarget(f64),
    #[error("no elasticity given for `{0}`")]
    MissingElasticity(String),
    #[error("item `{0}` appears more than once")]
    DuplicateItem(String),
    #[error("scenario `{0}` lists no items")]
    NoItems(String),
    #[error("scenario file: {0}")]
    Format(String),
}

/// Relative change `(terminal − base) / base`.
pub fn price_growth(base: f64, terminal: f64) -> Result<f64, PolicyError> {
    for v in [base, terminal] {
        if !(v.is_finite() && v > 0.0) {
            return Err(PolicyError::NonPositivePrice {
                item: String::new(),
                value: v,
            });
        }
    }
    Ok((terminal - base) / base)
}

pub fn contribution(growth: f64, elasticity: f64) -> f64 {
    growth * elasticity
}

pub fn net_effect(contributions: &[f64]) -> Result<f64, PolicyError> {
    if contributions.is_empty() {
        return Err(PolicyError::EmptyContributions);
    }
    Ok(contributions.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetEffectBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for NetEffectBounds {
    fn default() -> Self {
        Self {
            lower: DEFAULT_LOWER_BOUND,
            upper: DEFAULT_UPPER_BOUND,
        }
    }
}

impl NetEffectBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self, PolicyError> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(PolicyError::InvalidBounds { lower, upper });
        }
        Ok(Self { lower, upper })
    }
}

/// Limits the net effect to the bounds; the flag tells whether it bound.
pub fn clamp_net_effect(raw: f64, bounds: NetEffectBounds) -> Result<(f64, bool), PolicyError> {
    let bounds = NetEffectBounds::new(bounds.lower, bounds.upper)?;
    let clamped = raw.clamp(bounds.lower, bounds.upper);
    Ok((clamped, clamped != raw))
}

/// Rounds half-up to a whole currency unit.
pub fn round_currency(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

fn round_decimals(x: f64, decimals: u32) -> f64 {
    let f = 10f64.powi(decimals as i32);
    (x * f).round() / f
}

/// `MSP · (1 − net effect)`, rounded to a whole unit.
pub fn strategic_support_price(msp: f64, net_effect_clamped: f64) -> Result<i64, PolicyError> {
    if !(msp.is_finite() && msp > 0.0) {
        return Err(PolicyError::NonPositiveMsp(msp));
    }
    Ok(round_currency(msp * (1.0 - net_effect_clamped)))
}

/// Comprehensive cost plus a 50% margin, rounded to a whole unit.
pub fn swaminathan_price(cost_c2: f64) -> Result<i64, PolicyError> {
    if !(cost_c2.is_finite() && cost_c2 > 0.0) {
        return Err(PolicyError::NonPositiveCost(cost_c2));
    }
    Ok(round_currency(1.5 * cost_c2))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapBase {
    /// Gap as a share of the target price.
    #[default]
    Target,
    /// Gap as a share of the MSP.
    Msp,
}

/// Percentage by which `msp` falls short of `target_price`, over the target.
pub fn gap_percent(target_price: f64, msp: f64) -> Result<f64, PolicyError> {
    gap_percent_with_base(target_price, msp, GapBase::Target)
}

pub fn gap_percent_with_base(target_price: f64, msp: f64, base: GapBase) -> Result<f64, PolicyError> {
    if !(target_price.is_finite() && target_price > 0.0) {
        return Err(PolicyError::NonPositiveTarget(target_price));
    }
    let denom = match base {
        GapBase::Target => target_price,
        GapBase::Msp => {
            if !(msp.is_finite() && msp > 0.0) {
                return Err(PolicyError::NonPositiveMsp(msp));
            }
            msp
        }
    };
    Ok((target_price - msp) / denom * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceChange {
    pub item: ItemId,
    pub base_price: f64,
    pub terminal_price: f64,
    pub growth: f64,
}

impl PriceChange {
    pub fn new(item: ItemId, base_price: f64, terminal_price: f64) -> Result<Self, PolicyError> {
        let growth = price_growth(base_price, terminal_price).map_err(|e| match e {
            PolicyError::NonPositivePrice { value, .. } => PolicyError::NonPositivePrice {
                item: item.name.clone(),
                value,
            },
            other => other,
        })?;
        Ok(Self {
            item,
            base_price,
            terminal_price,
            growth,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyScenario {
    pub crop: String,
    pub changes: Vec<PriceChange>,
    /// Output items carry a supply elasticity, inputs their own-price
    /// demand elasticity.
    pub elasticities: BTreeMap<String, f64>,
    pub msp_cacp: f64,
    pub cost_a2fl: f64,
    pub cost_c2: f64,
    pub bounds: NetEffectBounds,
    /// Decimal places the net effect is rounded to before it enters the
    /// SSP; `None` applies it at full precision.
    pub net_effect_decimals: Option<u32>,
    pub gap_base: GapBase,
}

/// One item block of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioItem {
    pub name: String,
    pub kind: ItemKind,
    pub base_price: f64,
    pub terminal_price: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elasticity: Option<f64>,
}

/// On-disk scenario layout (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub crop: String,
    pub msp_cacp: f64,
    pub cost_a2fl: f64,
    pub cost_c2: f64,
    #[serde(default)]
    pub bounds: Option<NetEffectBounds>,
    /// Omitted means the reporting default of 2; a negative value means
    /// full precision.
    #[serde(default)]
    pub net_effect_decimals: Option<i32>,
    #[serde(default)]
    pub gap_base: Option<GapBase>,
    pub items: Vec<ScenarioItem>,
}

impl PolicyScenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, PolicyError> {
        if file.items.is_empty() {
            return Err(PolicyError::NoItems(file.crop));
        }
        let mut changes = Vec::with_capacity(file.items.len());
        let mut elasticities = BTreeMap::new();
        for item in &file.items {
            if changes.iter().any(|c: &PriceChange| c.item.name == item.name) {
                return Err(PolicyError::DuplicateItem(item.name.clone()));
            }
            changes.push(PriceChange::new(
                ItemId::new(item.name.clone(), item.kind),
                item.base_price,
                item.terminal_price,
            )?);
            let e = item
                .elasticity
                .ok_or_else(|| PolicyError::MissingElasticity(item.name.clone()))?;
            elasticities.insert(item.name.clone(), e);
        }
        let bounds = file.bounds.unwrap_or_default();
        let bounds = NetEffectBounds::new(bounds.lower, bounds.upper)?;
        if !(file.msp_cacp.is_finite() && file.msp_cacp > 0.0) {
            return Err(PolicyError::NonPositiveMsp(file.msp_cacp));
        }
        for cost in [file.cost_a2fl, file.cost_c2] {
            if !(cost.is_finite() && cost > 0.0) {
                return Err(PolicyError::NonPositiveCost(cost));
            }
        }
        let net_effect_decimals = match file.net_effect_decimals {
            None => Some(DEFAULT_NET_EFFECT_DECIMALS),
            Some(d) if d < 0 => None,
            Some(d) => Some(d as u32),
        };
        Ok(Self {
            crop: file.crop,
            changes,
            elasticities,
            msp_cacp: file.msp_cacp,
            cost_a2fl: file.cost_a2fl,
            cost_c2: file.cost_c2,
            bounds,
            net_effect_decimals,
            gap_base: file.gap_base.unwrap_or_default(),
        })
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            crop: self.crop.clone(),
            msp_cacp: self.msp_cacp,
            cost_a2fl: self.cost_a2fl,
            cost_c2: self.cost_c2,
            bounds: Some(self.bounds),
            net_effect_decimals: Some(self.net_effect_decimals.map_or(-1, |d| d as i32)),
            gap_base: Some(self.gap_base),
            items: self
                .changes
                .iter()
                .map(|c| ScenarioItem {
                    name: c.item.name.clone(),
                    kind: c.item.kind,
                    base_price: c.base_price,
                    terminal_price: c.terminal_price,
                    elasticity: self.elasticities.get(&c.item.name).copied(),
                })
                .collect(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PolicyError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| PolicyError::Format(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file()).expect("scenario serializes to TOML")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution {
    pub item: String,
    pub kind: ItemKind,
    pub base_price: f64,
    pub terminal_price: f64,
    pub growth: f64,
    pub elasticity: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SspResult {
    pub crop: String,
    pub contributions: Vec<Contribution>,
    pub net_effect_raw: f64,
    pub net_effect_clamped: f64,
    pub was_clamped: bool,
    /// The clamped net effect at the scenario's reporting precision; this
    /// is the value that enters the SSP.
    pub net_effect_applied: f64,
    pub bounds: NetEffectBounds,
    pub cost_a2fl: f64,
    pub cost_c2: f64,
    pub msp_cacp: f64,
    pub swaminathan_price: i64,
    pub gap_cacp_vs_swaminathan_pct: f64,
    pub ssp: i64,
    pub gap_cacp_vs_ssp_pct: f64,
    pub gap_base: GapBase,
}

/// Runs growth, contributions, net effect, clamping, SSP and benchmarks.
pub fn evaluate_scenario(scenario: &PolicyScenario) -> Result<SspResult, PolicyError> {
    let bounds = NetEffectBounds::new(scenario.bounds.lower, scenario.bounds.upper)?;
    let contributions = scenario
        .changes
        .iter()
        .map(|c| {
            let e = *scenario
                .elasticities
                .get(&c.item.name)
                .ok_or_else(|| PolicyError::MissingElasticity(c.item.name.clone()))?;
            Ok(Contribution {
                item: c.item.name.clone(),
                kind: c.item.kind,
                base_price: c.base_price,
                terminal_price: c.terminal_price,
                growth: c.growth,
                elasticity: e,
                contribution: contribution(c.growth, e),
            })
        })
        .collect::<Result<Vec<_>, PolicyError>>()?;

    let raw = net_effect(&contributions.iter().map(|c| c.contribution).collect::<Vec<_>>())?;
    let (clamped, was_clamped) = clamp_net_effect(raw, bounds)?;
    let applied = match scenario.net_effect_decimals {
        Some(d) => round_decimals(clamped, d).clamp(bounds.lower, bounds.upper),
        None => clamped,
    };
    let ssp = strategic_support_price(scenario.msp_cacp, applied)?;
    let swaminathan = swaminathan_price(scenario.cost_c2)?;
    let base = scenario.gap_base;
    Ok(SspResult {
        crop: scenario.crop.clone(),
        contributions,
        net_effect_raw: raw,
        net_effect_clamped: clamped,
        was_clamped,
        net_effect_applied: applied,
        bounds,
        cost_a2fl: scenario.cost_a2fl,
        cost_c2: scenario.cost_c2,
        msp_cacp: scenario.msp_cacp,
        swaminathan_price: swaminathan,
        gap_cacp_vs_swaminathan_pct: gap_percent_with_base(swaminathan as f64, scenario.msp_cacp, base)?,
        ssp,
        gap_cacp_vs_ssp_pct: gap_percent_with_base(ssp as f64, scenario.msp_cacp, base)?,
        gap_base: base,
    })
}

/// Side-by-side pricing-method table, one column per crop.
pub fn render_table(results: &[SspResult]) -> String {
    let label_width = 36;
    let mut out = String::new();
    let _ = write!(out, "{:<label_width$}", "Particulars");
    for r in results {
        let _ = write!(out, "{:>12}", r.crop);
    }
    out.push('\n');
    let gap_label = |what: &str, base: GapBase| match base {
        GapBase::Target => format!("Gap: CACP vs {what} (%)"),
        GapBase::Msp => format!("Gap: CACP vs {what} (% of MSP)"),
    };
    let base = results.first().map(|r| r.gap_base).unwrap_or_default();
    let rows: Vec<(String, Box<dyn Fn(&SspResult) -> String>)> = vec![
        ("Cost A2+FL".into(), Box::new(|r| format!("{:.0}", r.cost_a2fl))),
        ("Cost C2".into(), Box::new(|r| format!("{:.0}", r.cost_c2))),
        ("MSP recommended by CACP".into(), Box::new(|r| format!("{:.0}", r.msp_cacp))),
        ("Swaminathan MSP (C2+50%)".into(), Box::new(|r| r.swaminathan_price.to_string())),
        (gap_label("Swaminathan", base), Box::new(|r| format!("{:.2}", r.gap_cacp_vs_swaminathan_pct))),
        ("Net effect".into(), Box::new(|r| format!("{:.2}", r.net_effect_applied))),
        ("Strategic Support Price".into(), Box::new(|r| r.ssp.to_string())),
        (gap_label("SSP", base), Box::new(|r| format!("{:.2}", r.gap_cacp_vs_ssp_pct))),
    ];
    for (label, cell) in rows {
        let _ = write!(out, "{label:<label_width$}");
        for r in results {
            let _ = write!(out, "{:>12}", cell(r));
        }
        out.push('\n');
    }
    out
}
