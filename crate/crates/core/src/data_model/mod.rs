//! Validated domain types shared by every computation stage.
//!
//! Raw file contents enter as [`RawPanel`] or through the CSV readers in
//! [`io`]; everything downstream works on the validated, immutable types
//! defined here.

pub mod io;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for a share vector summing to one.
pub const SHARE_SUM_TOL: f64 = 1e-9;
/// Tolerance for reconstructing a cost share from `w_i * x_i / C`.
pub const SHARE_RECONSTRUCTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Input,
    Output,
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItemKind::Input => f.write_str("input"),
            ItemKind::Output => f.write_str("output"),
        }
    }
}

impl std::str::FromStr for ItemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "input" => Ok(ItemKind::Input),
            "output" => Ok(ItemKind::Output),
            other => Err(format!("unknown item kind `{other}` (expected input or output)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemId {
    pub name: String,
    pub kind: ItemKind,
}

impl ItemId {
    pub fn new(name: impl Into<String>, kind: ItemKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    pub fn input(name: impl Into<String>) -> Self {
        Self::new(name, ItemKind::Input)
    }

    pub fn output(name: impl Into<String>) -> Self {
        Self::new(name, ItemKind::Output)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("missing cell for item `{item}` in year {year}")]
    MissingCell { item: String, year: i32 },
    #[error("duplicate cell for item `{item}` in year {year}")]
    DuplicateCell { item: String, year: i32 },
    #[error("non-positive price for item `{item}` in year {year}")]
    NonPositivePrice { item: String, year: i32 },
    #[error("negative quantity for item `{item}` in year {year}")]
    NegativeQuantity { item: String, year: i32 },
    #[error("non-finite value for item `{item}` in year {year}")]
    NonFinite { item: String, year: i32 },
    #[error("panel needs at least 2 years")]
    TooFewYears,
    #[error("empty item name")]
    EmptyItemName,
    #[error("item `{0}` is declared with conflicting kinds")]
    ConflictingKind(String),
    #[error("no {kind} item has positive quantity in year {year}")]
    NoActiveItems { kind: ItemKind, year: i32 },
    #[error("year {0} is not in the panel")]
    YearNotInPanel(i32),
    #[error("all {kind} quantities are zero in year {year}")]
    ZeroAggregate { kind: ItemKind, year: i32 },
    #[error("invalid share vector: {0}")]
    InvalidShares(String),
    #[error("invalid cost observation `{obs}`: {reason}")]
    InvalidObservation { obs: String, reason: String },
}

/// One unvalidated `(item, year)` record as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub item: String,
    pub kind: ItemKind,
    pub year: i32,
    pub price: f64,
    pub quantity: f64,
}

/// Panel rows as parsed, before any invariant has been checked.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawPanel {
    pub rows: Vec<PanelRow>,
}

/// Per-item, per-year prices and quantities with every cell present.
///
/// Items keep the order in which they first appeared in the source; years
/// are strictly increasing. Storage is item-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceQuantityPanel {
    items: Vec<ItemId>,
    years: Vec<i32>,
    price: Vec<f64>,
    quantity: Vec<f64>,
}

impl PriceQuantityPanel {
    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn year_index(&self, year: i32) -> Option<usize> {
        self.years.binary_search(&year).ok()
    }

    pub fn price(&self, item: usize, year: usize) -> f64 {
        self.price[item * self.years.len() + year]
    }

    pub fn quantity(&self, item: usize, year: usize) -> f64 {
        self.quantity[item * self.years.len() + year]
    }

    /// Indices of the items of one kind, in panel order.
    pub fn item_indices(&self, kind: ItemKind) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    /// Flattens back to rows, item-major.
    pub fn to_raw(&self) -> RawPanel {
        let mut rows = Vec::with_capacity(self.price.len());
        for (i, item) in self.items.iter().enumerate() {
            for (t, &year) in self.years.iter().enumerate() {
                rows.push(PanelRow {
                    item: item.name.clone(),
                    kind: item.kind,
                    year,
                    price: self.price(i, t),
                    quantity: self.quantity(i, t),
                });
            }
        }
        RawPanel { rows }
    }

    /// Returns a copy with `f(item, year_index, price)` applied to every price.
    pub fn map_prices(&self, f: impl Fn(&ItemId, usize, f64) -> f64) -> Result<Self, DataError> {
        let mut raw = self.to_raw();
        for row in &mut raw.rows {
            let t = self.year_index(row.year).expect("year from own panel");
            let id = ItemId::new(row.item.clone(), row.kind);
            row.price = f(&id, t, row.price);
        }
        validate_panel(raw)
    }

    /// Returns a copy with `f(item, year_index, quantity)` applied to every quantity.
    pub fn map_quantities(
        &self,
        f: impl Fn(&ItemId, usize, f64) -> f64,
    ) -> Result<Self, DataError> {
        let mut raw = self.to_raw();
        for row in &mut raw.rows {
            let t = self.year_index(row.year).expect("year from own panel");
            let id = ItemId::new(row.item.clone(), row.kind);
            row.quantity = f(&id, t, row.quantity);
        }
        validate_panel(raw)
    }
}

/// Checks every panel invariant and builds the validated panel.
///
/// Errors name the first violated cell, scanning items in order of first
/// appearance and years in ascending order.
pub fn validate_panel(raw: RawPanel) -> Result<PriceQuantityPanel, DataError> {
    let mut items: Vec<ItemId> = Vec::new();
    let mut item_pos: HashMap<String, usize> = HashMap::new();
    let mut cells: BTreeMap<(usize, i32), (f64, f64)> = BTreeMap::new();

    for row in &raw.rows {
        let name = row.item.trim();
        if name.is_empty() {
            return Err(DataError::EmptyItemName);
        }
        let idx = match item_pos.get(name) {
            Some(&idx) => {
                if items[idx].kind != row.kind {
                    return Err(DataError::ConflictingKind(name.to_string()));
                }
                idx
            }
            None => {
                items.push(ItemId::new(name, row.kind));
                item_pos.insert(name.to_string(), items.len() - 1);
                items.len() - 1
            }
        };
        if cells.insert((idx, row.year), (row.price, row.quantity)).is_some() {
            return Err(DataError::DuplicateCell {
                item: name.to_string(),
                year: row.year,
            });
        }
    }

    let mut years: Vec<i32> = cells.keys().map(|&(_, y)| y).collect();
    years.sort_unstable();
    years.dedup();
    if years.len() < 2 {
        return Err(DataError::TooFewYears);
    }

    let mut price = Vec::with_capacity(items.len() * years.len());
    let mut quantity = Vec::with_capacity(items.len() * years.len());
    for (i, item) in items.iter().enumerate() {
        for &year in &years {
            let cell = || (item.name.clone(), year);
            let &(p, q) = cells.get(&(i, year)).ok_or_else(|| {
                let (item, year) = cell();
                DataError::MissingCell { item, year }
            })?;
            if !p.is_finite() || !q.is_finite() {
                let (item, year) = cell();
                return Err(DataError::NonFinite { item, year });
            }
            if p <= 0.0 {
                let (item, year) = cell();
                return Err(DataError::NonPositivePrice { item, year });
            }
            if q < 0.0 {
                let (item, year) = cell();
                return Err(DataError::NegativeQuantity { item, year });
            }
            price.push(p);
            quantity.push(q);
        }
    }

    let panel = PriceQuantityPanel {
        items,
        years,
        price,
        quantity,
    };
    for (t, &year) in panel.years.iter().enumerate() {
        for kind in [ItemKind::Output, ItemKind::Input] {
            let active = panel
                .item_indices(kind)
                .into_iter()
                .any(|i| panel.quantity(i, t) > 0.0);
            if !active {
                return Err(DataError::NoActiveItems { kind, year });
            }
        }
    }
    Ok(panel)
}

/// Labelled fractions in `[0, 1]` that sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareVector {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl ShareVector {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self, DataError> {
        if labels.len() != values.len() {
            return Err(DataError::InvalidShares(format!(
                "{} labels for {} values",
                labels.len(),
                values.len()
            )));
        }
        if values.is_empty() {
            return Err(DataError::InvalidShares("empty".into()));
        }
        for (label, &v) in labels.iter().zip(&values) {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(DataError::InvalidShares(format!(
                    "share of `{label}` is {v}, outside [0, 1]"
                )));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SHARE_SUM_TOL {
            return Err(DataError::InvalidShares(format!("shares sum to {sum}")));
        }
        Ok(Self { labels, values })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.values[i])
    }
}

/// Value shares (`price * quantity` over the kind's total) for one year.
pub fn shares_from_panel(
    panel: &PriceQuantityPanel,
    year: i32,
    kind: ItemKind,
) -> Result<ShareVector, DataError> {
    let t = panel
        .year_index(year)
        .ok_or(DataError::YearNotInPanel(year))?;
    let idx = panel.item_indices(kind);
    let values: Vec<f64> = idx
        .iter()
        .map(|&i| panel.price(i, t) * panel.quantity(i, t))
        .collect();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(DataError::ZeroAggregate { kind, year });
    }
    let labels = idx.iter().map(|&i| panel.items[i].name.clone()).collect();
    ShareVector::new(labels, values.into_iter().map(|v| v / total).collect())
}

/// One row of a translog estimation sample.
///
/// Prices and shares are aligned with the input list of the owning
/// [`CostSample`].
#[derive(Debug, Clone, PartialEq)]
pub struct CostObservation {
    pub id: String,
    pub total_cost: f64,
    pub input_prices: Vec<f64>,
    pub output_level: f64,
    pub cost_shares: ShareVector,
}

impl CostObservation {
    /// Validates one observation; `quantities`, when given, must reproduce
    /// the shares as `w_i * x_i / C`.
    pub fn new(
        id: impl Into<String>,
        total_cost: f64,
        input_prices: Vec<f64>,
        output_level: f64,
        cost_shares: ShareVector,
        quantities: Option<&[f64]>,
    ) -> Result<Self, DataError> {
        let id = id.into();
        let bad = |reason: String| DataError::InvalidObservation {
            obs: id.clone(),
            reason,
        };
        if !(total_cost.is_finite() && total_cost > 0.0) {
            return Err(bad(format!("total cost {total_cost} is not positive")));
        }
        if !(output_level.is_finite() && output_level > 0.0) {
            return Err(bad(format!("output level {output_level} is not positive")));
        }
        if input_prices.len() != cost_shares.len() {
            return Err(bad(format!(
                "{} prices for {} shares",
                input_prices.len(),
                cost_shares.len()
            )));
        }
        if let Some((label, p)) = cost_shares
            .labels()
            .iter()
            .zip(&input_prices)
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(bad(format!("price of `{label}` is {p}")));
        }
        if let Some(x) = quantities {
            if x.len() != input_prices.len() {
                return Err(bad("quantity count does not match inputs".into()));
            }
            for ((label, (&w, &q)), &s) in cost_shares
                .labels()
                .iter()
                .zip(input_prices.iter().zip(x))
                .zip(cost_shares.values())
            {
                let implied = w * q / total_cost;
                if (implied - s).abs() > SHARE_RECONSTRUCTION_TOL {
                    return Err(bad(format!(
                        "share of `{label}` is {s} but price*quantity/cost gives {implied}"
                    )));
                }
            }
        }
        Ok(Self {
            id,
            total_cost,
            input_prices,
            output_level,
            cost_shares,
        })
    }
}

/// An estimation sample: the modeled inputs and their observations.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSample {
    pub inputs: Vec<String>,
    pub observations: Vec<CostObservation>,
}

impl CostSample {
    pub fn new(inputs: Vec<String>, observations: Vec<CostObservation>) -> Result<Self, DataError> {
        for obs in &observations {
            if obs.cost_shares.labels() != inputs.as_slice() {
                return Err(DataError::InvalidObservation {
                    obs: obs.id.clone(),
                    reason: "share labels do not match the sample's inputs".into(),
                });
            }
        }
        Ok(Self {
            inputs,
            observations,
        })
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|i| i == name)
    }

    /// Arithmetic mean of observed cost shares.
    pub fn mean_shares(&self) -> Vec<f64> {
        let n = self.observations.len().max(1) as f64;
        let mut acc = vec![0.0; self.inputs.len()];
        for obs in &self.observations {
            for (a, s) in acc.iter_mut().zip(obs.cost_shares.values()) {
                *a += s;
            }
        }
        acc.into_iter().map(|a| a / n).collect()
    }

    /// Geometric mean of input prices and of output level.
    pub fn geometric_mean_point(&self) -> (Vec<f64>, f64) {
        let n = self.observations.len().max(1) as f64;
        let mut lw = vec![0.0; self.inputs.len()];
        let mut ly = 0.0;
        for obs in &self.observations {
            for (a, w) in lw.iter_mut().zip(&obs.input_prices) {
                *a += w.ln();
            }
            ly += obs.output_level.ln();
        }
        (lw.into_iter().map(|a| (a / n).exp()).collect(), (ly / n).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Input,
    Output,
    Tfp,
}

/// A chained or fixed-base index with `values[base_year] == 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexSeries {
    pub base_year: i32,
    pub kind: IndexKind,
    pub years: Vec<i32>,
    pub values: Vec<f64>,
}

impl IndexSeries {
    pub fn value(&self, year: i32) -> Option<f64> {
        self.years
            .iter()
            .position(|&y| y == year)
            .map(|i| self.values[i])
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("series always holds the base year")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(item: &str, kind: ItemKind, year: i32, price: f64, quantity: f64) -> PanelRow {
        PanelRow {
            item: item.into(),
            kind,
            year,
            price,
            quantity,
        }
    }

    fn two_by_two() -> RawPanel {
        RawPanel {
            rows: vec![
                row("grain", ItemKind::Output, 2010, 10.0, 5.0),
                row("grain", ItemKind::Output, 2011, 11.0, 6.0),
                row("labour", ItemKind::Input, 2010, 2.0, 3.0),
                row("labour", ItemKind::Input, 2011, 2.5, 3.5),
            ],
        }
    }

    #[test]
    fn validates_complete_panel() {
        let raw = two_by_two();
        let panel = validate_panel(raw.clone()).unwrap();
        assert_eq!(panel.years(), &[2010, 2011]);
        assert_eq!(panel.items().len(), 2);
        assert_eq!(panel.to_raw(), raw);
        assert_eq!(validate_panel(panel.to_raw()).unwrap(), panel);
    }

    #[test]
    fn rejects_zero_price() {
        let mut raw = two_by_two();
        raw.rows[3].price = 0.0;
        assert_eq!(
            validate_panel(raw),
            Err(DataError::NonPositivePrice {
                item: "labour".into(),
                year: 2011
            })
        );
    }

    #[test]
    fn rejects_single_year() {
        let raw = RawPanel {
            rows: vec![
                row("grain", ItemKind::Output, 2010, 10.0, 5.0),
                row("labour", ItemKind::Input, 2010, 2.0, 3.0),
            ],
        };
        assert_eq!(validate_panel(raw), Err(DataError::TooFewYears));
    }

    #[test]
    fn reports_first_missing_cell() {
        let mut raw = two_by_two();
        raw.rows.remove(1);
        assert_eq!(
            validate_panel(raw),
            Err(DataError::MissingCell {
                item: "grain".into(),
                year: 2011
            })
        );
    }

    #[test]
    fn rejects_negative_quantity_and_duplicates() {
        let mut raw = two_by_two();
        raw.rows[2].quantity = -1.0;
        assert!(matches!(
            validate_panel(raw),
            Err(DataError::NegativeQuantity { .. })
        ));
        let mut raw = two_by_two();
        raw.rows.push(row("grain", ItemKind::Output, 2010, 1.0, 1.0));
        assert!(matches!(
            validate_panel(raw),
            Err(DataError::DuplicateCell { .. })
        ));
    }

    #[test]
    fn rejects_year_without_active_input() {
        let mut raw = two_by_two();
        raw.rows[2].quantity = 0.0;
        assert_eq!(
            validate_panel(raw),
            Err(DataError::NoActiveItems {
                kind: ItemKind::Input,
                year: 2010
            })
        );
    }

    fn inputs_panel(values: &[(f64, f64)]) -> PriceQuantityPanel {
        let mut rows = vec![
            row("out", ItemKind::Output, 2019, 1.0, 1.0),
            row("out", ItemKind::Output, 2020, 1.0, 1.0),
        ];
        for (k, &(p, q)) in values.iter().enumerate() {
            for year in [2019, 2020] {
                rows.push(row(&format!("x{k}"), ItemKind::Input, year, p, q));
            }
        }
        validate_panel(RawPanel { rows }).unwrap()
    }

    #[test]
    fn single_input_has_unit_share() {
        let panel = inputs_panel(&[(3.0, 7.0)]);
        let s = shares_from_panel(&panel, 2019, ItemKind::Input).unwrap();
        assert_eq!(s.values(), &[1.0]);
    }

    #[test]
    fn equal_values_split_evenly() {
        let panel = inputs_panel(&[(2.0, 5.0), (10.0, 1.0)]);
        let s = shares_from_panel(&panel, 2020, ItemKind::Input).unwrap();
        assert_eq!(s.values(), &[0.5, 0.5]);
    }

    #[test]
    fn seven_component_cost_structure() {
        let weights = [48.0, 16.0, 12.0, 12.0, 8.0, 3.0, 2.0];
        let values: Vec<(f64, f64)> = weights.iter().map(|&w| (2.5, w * 4.0)).collect();
        let panel = inputs_panel(&values);
        let s = shares_from_panel(&panel, 2019, ItemKind::Input).unwrap();
        // Whole-percent shares that sum to 101, so each is off by up to 0.5 pp.
        let expected = [0.48, 0.16, 0.12, 0.12, 0.08, 0.03, 0.02];
        for ((got, want), w) in s.values().iter().zip(expected).zip(weights) {
            assert!((got - want).abs() <= 0.005, "{got} vs {want}");
            assert!((got - w / 101.0).abs() < 1e-15);
        }
        assert!((s.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn share_errors() {
        let panel = inputs_panel(&[(1.0, 1.0)]);
        assert_eq!(
            shares_from_panel(&panel, 1999, ItemKind::Input),
            Err(DataError::YearNotInPanel(1999))
        );
        assert!(ShareVector::new(vec!["a".into(), "b".into()], vec![0.5, 0.6]).is_err());
        assert!(ShareVector::new(vec!["a".into(), "b".into()], vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn observation_checks_reconstructed_shares() {
        let shares = ShareVector::new(vec!["a".into(), "b".into()], vec![0.25, 0.75]).unwrap();
        let ok = CostObservation::new("o1", 100.0, vec![5.0, 15.0], 2.0, shares.clone(), Some(&[5.0, 5.0]));
        assert!(ok.is_ok());
        let bad = CostObservation::new("o2", 100.0, vec![5.0, 15.0], 2.0, shares.clone(), Some(&[6.0, 5.0]));
        assert!(matches!(bad, Err(DataError::InvalidObservation { .. })));
        let bad = CostObservation::new("o3", 100.0, vec![0.0, 15.0], 2.0, shares, None);
        assert!(bad.is_err());
    }
}
