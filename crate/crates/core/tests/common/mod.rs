#![allow(dead_code)]

use std::path::PathBuf;

use agriprice::data_model::{validate_panel, ItemKind, PanelRow, PriceQuantityPanel, RawPanel};
use agriprice::translog::{synthesize_sample, TranslogCoefficients};
use agriprice::data_model::CostSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 2-3 outputs and 2-3 inputs over 3-5 years, all values strictly positive.
pub fn random_panel(seed: u64) -> PriceQuantityPanel {
    let mut r = rng(seed);
    let n_out = r.gen_range(2..=3);
    let n_in = r.gen_range(2..=3);
    let n_years = r.gen_range(3..=5);
    let mut rows = Vec::new();
    for (kind, n) in [(ItemKind::Output, n_out), (ItemKind::Input, n_in)] {
        for k in 0..n {
            for t in 0..n_years {
                rows.push(PanelRow {
                    item: format!("{kind:?}{k}").to_lowercase(),
                    kind,
                    year: 2000 + t,
                    price: r.gen_range(0.5..50.0),
                    quantity: r.gen_range(0.1..200.0),
                });
            }
        }
    }
    validate_panel(RawPanel { rows }).expect("generated panel is valid")
}

/// Törnqvist link computed straight from the defining sum, without any
/// library share or index code.
pub fn oracle_link(panel: &PriceQuantityPanel, kind: ItemKind, a: usize, b: usize) -> f64 {
    let items = panel.item_indices(kind);
    let value = |i: usize, t: usize| panel.price(i, t) * panel.quantity(i, t);
    let total_a: f64 = items.iter().map(|&i| value(i, a)).sum();
    let total_b: f64 = items.iter().map(|&i| value(i, b)).sum();
    let mut sum = 0.0;
    for &i in &items {
        let w = 0.5 * (value(i, a) / total_a + value(i, b) / total_b);
        sum += w * (panel.quantity(i, b) / panel.quantity(i, a)).ln();
    }
    sum.exp()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

pub fn three_inputs() -> Vec<String> {
    vec!["labour".into(), "fertiliser".into(), "machine".into()]
}

/// Random translog system over three inputs satisfying symmetry and
/// homogeneity; second-order terms are small enough that shares stay in
/// (0, 1) over the sampling box used by [`random_points`].
pub fn random_coefficients(seed: u64) -> TranslogCoefficients {
    let mut r = rng(seed);
    let raw: Vec<f64> = (0..3).map(|_| r.gen_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let mut alpha_i: Vec<f64> = raw.iter().map(|v| v / total).collect();
    alpha_i[2] = 1.0 - alpha_i[0] - alpha_i[1];

    let b00 = r.gen_range(-0.05..0.05);
    let b01 = r.gen_range(-0.05..0.05);
    let b11 = r.gen_range(-0.05..0.05);
    let b02 = -b00 - b01;
    let b12 = -b01 - b11;
    let b22 = -b02 - b12;
    let alpha_ij = vec![vec![b00, b01, b02], vec![b01, b11, b12], vec![b02, b12, b22]];

    let g0 = r.gen_range(-0.02..0.02);
    let g1 = r.gen_range(-0.02..0.02);
    let alpha_iy = vec![g0, g1, -g0 - g1];

    TranslogCoefficients::new(
        three_inputs(),
        "machine",
        r.gen_range(-1.0..1.0),
        alpha_i,
        r.gen_range(0.5..1.2),
        &alpha_ij,
        r.gen_range(-0.05..0.05),
        alpha_iy,
    )
    .expect("generated coefficients satisfy the restrictions")
}

/// Prices and output levels within one log unit of 1.
pub fn random_points(seed: u64, n: usize) -> Vec<(Vec<f64>, f64)> {
    let mut r = rng(seed ^ 0x5eed);
    (0..n)
        .map(|_| {
            let w = (0..3).map(|_| r.gen_range(-1.0f64..1.0).exp()).collect();
            (w, r.gen_range(-1.0f64..1.0).exp())
        })
        .collect()
}

pub fn noiseless_sample(seed: u64, n: usize) -> (TranslogCoefficients, CostSample) {
    let c = random_coefficients(seed);
    let sample = synthesize_sample(&c, &random_points(seed, n)).expect("shares stay in range");
    (c, sample)
}

/// Noiseless sample with multiplicative cost noise and zero-sum share noise.
pub fn noisy_sample(seed: u64, n: usize, scale: f64) -> CostSample {
    use agriprice::data_model::{CostObservation, ShareVector};
    let (_, clean) = noiseless_sample(seed, n);
    let mut r = rng(seed ^ 0xface);
    let observations = clean
        .observations
        .iter()
        .map(|o| {
            let e0 = r.gen_range(-scale..scale);
            let e1 = r.gen_range(-scale..scale);
            let s = o.cost_shares.values();
            let v = vec![s[0] + e0, s[1] + e1, 1.0 - (s[0] + e0) - (s[1] + e1)];
            let shares = ShareVector::new(o.cost_shares.labels().to_vec(), v).expect("noise keeps shares valid");
            CostObservation::new(
                o.id.clone(),
                o.total_cost * (r.gen_range(-scale..scale)).exp(),
                o.input_prices.clone(),
                o.output_level,
                shares,
                None,
            )
            .expect("valid observation")
        })
        .collect();
    CostSample::new(clean.inputs.clone(), observations).expect("valid sample")
}

/// Central difference of `f` in log space at step `h`.
pub fn log_derivative(f: impl Fn(&[f64]) -> f64, w: &[f64], j: usize, h: f64) -> f64 {
    let mut up = w.to_vec();
    let mut dn = w.to_vec();
    up[j] *= h.exp();
    dn[j] *= (-h).exp();
    (f(&up) - f(&dn)) / (2.0 * h)
}
