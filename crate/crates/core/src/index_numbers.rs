//! Törnqvist–Theil quantity indices and TFP.
//!
//! A link between two years is
//! `exp( Σ_k ½(s_k,a + s_k,b) · ln(q_k,b / q_k,a) )` with `s` the value
//! shares of the items of one kind (revenue shares for outputs, cost shares
//! for inputs). TFP growth is the output link over the input link. Links
//! are chained into index series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{
    shares_from_panel, DataError, IndexKind, IndexSeries, ItemKind, PriceQuantityPanel,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("years {from} -> {to} are not adjacent years of the panel")]
    YearPairInvalid { from: i32, to: i32 },
    #[error("item `{item}` has positive share weight but zero quantity between {from} and {to}")]
    UndefinedRatio { item: String, from: i32, to: i32 },
    #[error("growth ratio {0} is not strictly positive")]
    NonPositiveGrowth(f64),
    #[error("no growth links given")]
    EmptyLinks,
    #[error("base year {0} is not in the panel")]
    BaseYearNotInPanel(i32),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Output, input and TFP growth between two adjacent panel years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthLink {
    pub from_year: i32,
    pub to_year: i32,
    pub output_growth: f64,
    pub input_growth: f64,
    pub tfp_growth: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Arithmetic,
    Geometric,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseMode {
    /// Multiply adjacent-year links.
    #[default]
    Chain,
    /// Compare each year directly with the base year.
    FixedBase,
}

/// Törnqvist quantity ratio of one item kind from year `from` to year `to`.
///
/// The years need not be adjacent; this is the building block for both the
/// adjacent links and the fixed-base comparison.
pub fn tornqvist_link(
    panel: &PriceQuantityPanel,
    kind: ItemKind,
    from: i32,
    to: i32,
) -> Result<f64, IndexError> {
    let a = panel.year_index(from).ok_or(DataError::YearNotInPanel(from))?;
    let b = panel.year_index(to).ok_or(DataError::YearNotInPanel(to))?;
    let sa = shares_from_panel(panel, from, kind)?;
    let sb = shares_from_panel(panel, to, kind)?;

    let mut log_sum = 0.0;
    for (k, &item) in panel.item_indices(kind).iter().enumerate() {
        let weight = 0.5 * (sa.values()[k] + sb.values()[k]);
        if weight == 0.0 {
            continue;
        }
        let (qa, qb) = (panel.quantity(item, a), panel.quantity(item, b));
        if qa == 0.0 || qb == 0.0 {
            return Err(IndexError::UndefinedRatio {
                item: panel.items()[item].name.clone(),
                from,
                to,
            });
        }
        log_sum += weight * (qb / qa).ln();
    }
    Ok(log_sum.exp())
}

fn check_adjacent(panel: &PriceQuantityPanel, t_prev: i32, t: i32) -> Result<(), IndexError> {
    let invalid = IndexError::YearPairInvalid { from: t_prev, to: t };
    match (panel.year_index(t_prev), panel.year_index(t)) {
        (Some(a), Some(b)) if b == a + 1 => Ok(()),
        _ => Err(invalid),
    }
}

/// Aggregate output growth between adjacent years, weighted by revenue shares.
pub fn tornqvist_output_link(
    panel: &PriceQuantityPanel,
    t_prev: i32,
    t: i32,
) -> Result<f64, IndexError> {
    check_adjacent(panel, t_prev, t)?;
    tornqvist_link(panel, ItemKind::Output, t_prev, t)
}

/// Aggregate input growth between adjacent years, weighted by cost shares.
pub fn tornqvist_input_link(
    panel: &PriceQuantityPanel,
    t_prev: i32,
    t: i32,
) -> Result<f64, IndexError> {
    check_adjacent(panel, t_prev, t)?;
    tornqvist_link(panel, ItemKind::Input, t_prev, t)
}

pub fn tfp_link(output_growth: f64, input_growth: f64) -> Result<f64, IndexError> {
    for g in [output_growth, input_growth] {
        if !(g.is_finite() && g > 0.0) {
            return Err(IndexError::NonPositiveGrowth(g));
        }
    }
    Ok(output_growth / input_growth)
}

/// All adjacent-year links of a panel, in year order.
pub fn growth_links(panel: &PriceQuantityPanel) -> Result<Vec<GrowthLink>, IndexError> {
    panel
        .years()
        .windows(2)
        .map(|w| {
            let output_growth = tornqvist_output_link(panel, w[0], w[1])?;
            let input_growth = tornqvist_input_link(panel, w[0], w[1])?;
            Ok(GrowthLink {
                from_year: w[0],
                to_year: w[1],
                output_growth,
                input_growth,
                tfp_growth: tfp_link(output_growth, input_growth)?,
            })
        })
        .collect()
}

/// Chains links into a series over consecutive calendar years starting at
/// `base_year`. An empty list yields the base year alone.
pub fn chain(links: &[f64], base_year: i32, kind: IndexKind) -> Result<IndexSeries, IndexError> {
    let years: Vec<i32> = (0..=links.len() as i32).map(|k| base_year + k).collect();
    chain_over(links, &years, 0, kind)
}

/// Chains links over an explicit year list; `links[k]` connects `years[k]`
/// to `years[k + 1]` and the value at `years[base]` is 1.
pub fn chain_over(
    links: &[f64],
    years: &[i32],
    base: usize,
    kind: IndexKind,
) -> Result<IndexSeries, IndexError> {
    assert_eq!(years.len(), links.len() + 1, "one more year than links");
    if let Some(&bad) = links.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(IndexError::NonPositiveGrowth(bad));
    }
    let mut values = vec![1.0; years.len()];
    for k in base + 1..years.len() {
        values[k] = values[k - 1] * links[k - 1];
    }
    for k in (0..base).rev() {
        values[k] = values[k + 1] / links[k];
    }
    Ok(IndexSeries {
        base_year: years[base],
        kind,
        years: years.to_vec(),
        values,
    })
}

/// Mean of annual growth ratios. The arithmetic mean is the reporting
/// convention for annual-growth tables.
pub fn average_annual_growth(links: &[f64], averaging: Averaging) -> Result<f64, IndexError> {
    if links.is_empty() {
        return Err(IndexError::EmptyLinks);
    }
    let n = links.len() as f64;
    Ok(match averaging {
        Averaging::Arithmetic => links.iter().sum::<f64>() / n,
        Averaging::Geometric => {
            if let Some(&bad) = links.iter().find(|l| **l <= 0.0) {
                return Err(IndexError::NonPositiveGrowth(bad));
            }
            (links.iter().map(|l| l.ln()).sum::<f64>() / n).exp()
        }
    })
}

/// Input, output and TFP index series for a whole panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TfpIndices {
    pub links: Vec<GrowthLink>,
    pub input: IndexSeries,
    pub output: IndexSeries,
    pub tfp: IndexSeries,
}

pub fn tfp_indices(
    panel: &PriceQuantityPanel,
    base_year: Option<i32>,
    mode: BaseMode,
) -> Result<TfpIndices, IndexError> {
    let years = panel.years();
    let base_year = base_year.unwrap_or(years[0]);
    let base = panel
        .year_index(base_year)
        .ok_or(IndexError::BaseYearNotInPanel(base_year))?;
    let links = growth_links(panel)?;

    let (input, output, tfp) = match mode {
        BaseMode::Chain => {
            let inp: Vec<f64> = links.iter().map(|l| l.input_growth).collect();
            let out: Vec<f64> = links.iter().map(|l| l.output_growth).collect();
            let tfp: Vec<f64> = links.iter().map(|l| l.tfp_growth).collect();
            (
                chain_over(&inp, years, base, IndexKind::Input)?,
                chain_over(&out, years, base, IndexKind::Output)?,
                chain_over(&tfp, years, base, IndexKind::Tfp)?,
            )
        }
        BaseMode::FixedBase => {
            let mut inp = Vec::with_capacity(years.len());
            let mut out = Vec::with_capacity(years.len());
            let mut tfp = Vec::with_capacity(years.len());
            for &year in years {
                let (i, o) = if year == base_year {
                    (1.0, 1.0)
                } else {
                    (
                        tornqvist_link(panel, ItemKind::Input, base_year, year)?,
                        tornqvist_link(panel, ItemKind::Output, base_year, year)?,
                    )
                };
                inp.push(i);
                out.push(o);
                tfp.push(tfp_link(o, i)?);
            }
            let series = |values, kind| IndexSeries {
                base_year,
                kind,
                years: years.to_vec(),
                values,
            };
            (
                series(inp, IndexKind::Input),
                series(out, IndexKind::Output),
                series(tfp, IndexKind::Tfp),
            )
        }
    };
    Ok(TfpIndices {
        links,
        input,
        output,
        tfp,
    })
}
