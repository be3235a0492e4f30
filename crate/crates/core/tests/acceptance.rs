//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use agriprice::data_model::{IndexKind, ItemKind, ShareVector};
use agriprice::elasticities::full_report;
use agriprice::index_numbers::{
    average_annual_growth, chain, growth_links, tornqvist_input_link, tornqvist_output_link,
    Averaging,
};
use agriprice::policy::{evaluate_scenario, gap_percent, swaminathan_price, PolicyScenario};
use agriprice::translog::{fit, EstimationOptions, TranslogCoefficients, CONSTRAINT_TOL};
use common::{
    fixture, log_derivative, noiseless_sample, noisy_sample, oracle_link, random_coefficients,
    random_panel, random_points, rel_err, rng, three_inputs,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario(name: &str) -> PolicyScenario {
    PolicyScenario::from_toml_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

fn ssp_reproduction() -> Outcome {
    let mut notes = Vec::new();
    for (file, want) in [("jowar.toml", 6375), ("ragi.toml", 5859)] {
        let s = scenario(file);
        let start = Instant::now();
        let r = evaluate_scenario(&s).map_err(|e| e.to_string())?;
        let took = start.elapsed();
        ensure(r.ssp == want, || format!("{file}: ssp {} != {want}", r.ssp))?;
        ensure(took < Duration::from_millis(1), || format!("{file}: {took:?} >= 1 ms"))?;
        notes.push(format!("{} in {took:?}", r.ssp));
    }
    Ok(notes.join(", "))
}

fn gap_reproduction() -> Outcome {
    let cases = [
        (4715.0, 2550.0, 45.92),
        (5469.0, 3150.0, 42.40),
        (6375.0, 2550.0, 60.00),
        (5859.0, 3150.0, 46.24),
    ];
    let mut got = Vec::new();
    for (target, msp, want) in cases {
        let g = gap_percent(target, msp).map_err(|e| e.to_string())?;
        ensure((g - want).abs() <= 0.05, || format!("gap({target}, {msp}) = {g}, want {want}"))?;
        got.push(format!("{g:.3}"));
    }
    for (file, sw, ssp) in [("jowar.toml", 45.92, 60.00), ("ragi.toml", 42.40, 46.24)] {
        let r = evaluate_scenario(&scenario(file)).map_err(|e| e.to_string())?;
        ensure((r.gap_cacp_vs_swaminathan_pct - sw).abs() <= 0.05, || format!("{file} swaminathan gap"))?;
        ensure((r.gap_cacp_vs_ssp_pct - ssp).abs() <= 0.05, || format!("{file} ssp gap"))?;
    }
    Ok(got.join(", "))
}

fn swaminathan_benchmark() -> Outcome {
    let a = swaminathan_price(3143.0).map_err(|e| e.to_string())?;
    let b = swaminathan_price(3646.0).map_err(|e| e.to_string())?;
    ensure(a == 4715 && b == 5469, || format!("got {a}, {b}"))?;
    Ok(format!("{a}, {b}"))
}

fn net_effect_reproduction() -> Outcome {
    let cases = [
        ("jowar.toml", -1.50, [0.78, -0.63, -0.02, -1.64]),
        ("ragi.toml", -0.86, [0.00, 0.09, 0.02, -0.96]),
    ];
    let mut notes = Vec::new();
    for (file, net, contributions) in cases {
        let r = evaluate_scenario(&scenario(file)).map_err(|e| e.to_string())?;
        ensure((r.net_effect_raw - net).abs() <= 0.02, || format!("{file}: net {}", r.net_effect_raw))?;
        for (c, want) in r.contributions.iter().zip(contributions) {
            ensure((c.contribution - want).abs() <= 0.01, || {
                format!("{file}: {} contribution {} vs {want}", c.item, c.contribution)
            })?;
        }
        notes.push(format!("{:.4}", r.net_effect_raw));
    }
    Ok(notes.join(", "))
}

fn tfp_summary_reproduction() -> Outcome {
    let mut rdr = csv::Reader::from_path(fixture("table1_links.csv")).map_err(|e| e.to_string())?;
    let mut cols = [Vec::new(), Vec::new(), Vec::new()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        for (k, col) in cols.iter_mut().enumerate() {
            col.push(rec[k + 1].parse::<f64>().map_err(|e| e.to_string())?);
        }
    }
    let mut got = Vec::new();
    for (col, want) in cols.iter().zip([0.98, 1.01, 1.04]) {
        let m = average_annual_growth(col, Averaging::Arithmetic).map_err(|e| e.to_string())?;
        ensure((m - want).abs() <= 0.005, || format!("mean {m} vs {want}"))?;
        got.push(format!("{m:.4}"));
    }
    Ok(got.join(", "))
}

fn index_axioms() -> Outcome {
    const TOL: f64 = 1e-12;
    let panels = 128;
    for seed in 0..panels {
        let p = random_panel(seed);
        let years = p.years().to_vec();
        let mut r = rng(seed ^ 0xabc);
        let links = growth_links(&p).map_err(|e| e.to_string())?;
        for (t, l) in links.iter().enumerate() {
            let (a, b) = (t, t + 1);
            ensure(rel_err(l.output_growth, oracle_link(&p, ItemKind::Output, a, b)) < TOL, || {
                format!("panel {seed}: output oracle")
            })?;
            ensure(rel_err(l.input_growth, oracle_link(&p, ItemKind::Input, a, b)) < TOL, || {
                format!("panel {seed}: input oracle")
            })?;
        }

        let frozen = p
            .map_quantities(|id, _, _| p.quantity(p.items().iter().position(|x| x == id).unwrap(), 0))
            .map_err(|e| e.to_string())?;
        for l in growth_links(&frozen).map_err(|e| e.to_string())? {
            ensure((l.output_growth - 1.0).abs() < TOL && (l.input_growth - 1.0).abs() < TOL, || {
                format!("panel {seed}: identity")
            })?;
        }

        let ab = [links[0].tfp_growth, links[1].tfp_growth];
        let series = chain(&ab, years[0], IndexKind::Tfp).map_err(|e| e.to_string())?;
        ensure(rel_err(series.last(), ab[0] * ab[1]) < TOL, || format!("panel {seed}: chain"))?;

        let c = r.gen_range(0.01..100.0);
        let scaled = p.map_prices(|_, _, v| v * c).map_err(|e| e.to_string())?;
        for (x, y) in links.iter().zip(growth_links(&scaled).map_err(|e| e.to_string())?) {
            ensure(
                rel_err(y.output_growth, x.output_growth) < TOL && rel_err(y.input_growth, x.input_growth) < TOL,
                || format!("panel {seed}: price scaling"),
            )?;
        }

        let k = r.gen_range(0.1..10.0);
        let t = years.len() - 1;
        for kind in [ItemKind::Output, ItemKind::Input] {
            let q = p
                .map_quantities(|id, y, v| if id.kind == kind && y == t { v * k } else { v })
                .map_err(|e| e.to_string())?;
            let link = |panel| match kind {
                ItemKind::Output => tornqvist_output_link(panel, years[t - 1], years[t]),
                ItemKind::Input => tornqvist_input_link(panel, years[t - 1], years[t]),
            };
            let (before, after) = (link(&p).map_err(|e| e.to_string())?, link(&q).map_err(|e| e.to_string())?);
            ensure(rel_err(after, k * before) < TOL, || format!("panel {seed}: {kind:?} homogeneity"))?;
        }
    }
    Ok(format!("{panels} panels"))
}

fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs()
}

fn flatten(c: &TranslogCoefficients) -> Vec<f64> {
    let mut v = vec![c.alpha0(), c.alpha_y(), c.alpha_yy()];
    v.extend_from_slice(c.alpha_i());
    v.extend_from_slice(c.alpha_iy());
    v.extend(c.alpha_ij_matrix().into_iter().flatten());
    v
}

fn translog_round_trip() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (truth, sample) = noiseless_sample(seed, 50);
        let got = fit(&sample, &EstimationOptions::new("machine"))
            .and_then(|r| r.require_converged())
            .map_err(|e| format!("seed {seed}: {e}"))?
            .coefficients;
        for (g, t) in flatten(&got).into_iter().zip(flatten(&truth)) {
            ensure(rel_close(g, t, 1e-6), || format!("seed {seed}: {g} vs {t}"))?;
            worst = worst.max((g - t).abs() / t.abs());
        }
        let m = got.alpha_ij_matrix();
        ensure((got.alpha_i().iter().sum::<f64>() - 1.0).abs() <= CONSTRAINT_TOL, || "sum alpha_i".into())?;
        ensure(got.alpha_iy().iter().sum::<f64>().abs() <= CONSTRAINT_TOL, || "sum alpha_iy".into())?;
        for i in 0..3 {
            ensure(m[i].iter().sum::<f64>().abs() <= CONSTRAINT_TOL, || format!("row {i} of alpha_ij"))?;
            for j in 0..3 {
                ensure(m[i][j] == m[j][i], || "alpha_ij symmetry".into())?;
            }
        }
    }

    let mut spread: f64 = 0.0;
    for seed in 0..20 {
        let sample = noisy_sample(seed, 50, 0.01);
        let opts = |drop: &str| {
            let mut o = EstimationOptions::new("machine").dropping(drop);
            o.convergence_tol = 1e-13;
            o.max_iterations = 500;
            o
        };
        let fits: Vec<Vec<f64>> = ["machine", "labour", "fertiliser"]
            .iter()
            .map(|d| {
                fit(&sample, &opts(d))
                    .and_then(|r| r.require_converged())
                    .map(|r| flatten(&r.coefficients))
                    .map_err(|e| format!("seed {seed} drop {d}: {e}"))
            })
            .collect::<Result<_, _>>()?;
        for other in &fits[1..] {
            for (a, b) in fits[0].iter().zip(other) {
                spread = spread.max((a - b).abs());
            }
        }
    }
    ensure(spread < 1e-8, || format!("dropped-equation spread {spread:e}"))?;
    Ok(format!("worst rel err {worst:.1e}, dropped-equation spread {spread:.1e}"))
}

fn shephard_and_elasticities() -> Outcome {
    let mut worst_fd: f64 = 0.0;
    let mut worst_row: f64 = 0.0;
    for seed in 0..200 {
        let coef = random_coefficients(seed);
        for (w, y) in random_points(seed, 5) {
            let shares = coef.predicted_shares(&w, y).map_err(|e| e.to_string())?;
            for j in 0..3 {
                let fd = log_derivative(|p| coef.predict_log_cost(p, y).unwrap(), &w, j, 1e-5);
                worst_fd = worst_fd.max((fd - shares.values[j]).abs());
            }
            let sv = shares.to_share_vector().map_err(|e| e.to_string())?;
            let r = full_report(&coef, &sv, y, &w).map_err(|e| e.to_string())?;
            for row in &r.price {
                worst_row = worst_row.max(row.iter().sum::<f64>().abs());
            }
        }
    }
    ensure(worst_fd < 1e-6, || format!("finite-difference gap {worst_fd:e}"))?;
    ensure(worst_row < 1e-8, || format!("price row sum {worst_row:e}"))?;

    let mut r = rng(99);
    for _ in 0..200 {
        let raw: Vec<f64> = (0..3).map(|_| r.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut s: Vec<f64> = raw.iter().map(|v| v / total).collect();
        s[2] = 1.0 - s[0] - s[1];
        let cd = TranslogCoefficients::cobb_douglas(three_inputs(), 0.0, s.clone(), 1.0).map_err(|e| e.to_string())?;
        let sv = ShareVector::new(three_inputs(), s.clone()).map_err(|e| e.to_string())?;
        let rep = full_report(&cd, &sv, 1.0, &[1.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    ensure(rep.allen[i][j] == 1.0, || format!("sigma_{i}{j} = {}", rep.allen[i][j]))?;
                } else {
                    let eta = rep.price[i][i];
                    ensure((eta - (s[i] - 1.0)).abs() <= 1e-15, || format!("eta_{i}{i} = {eta} vs {}", s[i] - 1.0))?;
                }
            }
        }
    }
    Ok(format!("max FD gap {worst_fd:.1e}, max row sum {worst_row:.1e}"))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    let mut times = Vec::new();
    for run in ["first", "second"] {
        let out_dir = dir.path().join(run);
        let start = Instant::now();
        let status = Command::new(env!("CARGO_BIN_EXE_agriprice"))
            .args(["report", "--config"])
            .arg(fixture("report.toml"))
            .arg("--out")
            .arg(&out_dir)
            .env_remove("AGRIPRICE_FORMAT")
            .output()
            .map_err(|e| e.to_string())?;
        let took = start.elapsed();
        ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
        ensure(took < Duration::from_secs(1), || format!("{run} run took {took:?}"))?;
        outputs.push(std::fs::read(out_dir.join("report.json")).map_err(|e| e.to_string())?);
        times.push(took);
    }
    ensure(outputs[0] == outputs[1], || "bundles differ".into())?;
    let text = String::from_utf8_lossy(&outputs[0]);
    ensure(text.contains("\"ssp\": 6375") && text.contains("\"ssp\": 5859"), || "missing SSP blocks".into())?;
    Ok(format!("{} bytes, {:?} / {:?}", outputs[0].len(), times[0], times[1]))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("SSP reproduction", ssp_reproduction),
        ("policy gaps", gap_reproduction),
        ("Swaminathan benchmark", swaminathan_benchmark),
        ("net effects and contributions", net_effect_reproduction),
        ("TFP summary means", tfp_summary_reproduction),
        ("index axioms and oracle", index_axioms),
        ("translog round trip", translog_round_trip),
        ("Shephard and elasticity identities", shephard_and_elasticities),
        ("report determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail})", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
