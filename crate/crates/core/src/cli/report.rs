//! Multi-crop report bundle.
//!
//! Every referenced file is read, digested and validated up front. Crops
//! are then evaluated (concurrently when the `parallel` feature is on),
//! ordered by name, and written as one bundle.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::commands::{
    elasticity_csv, elasticity_report, load_coefficients, load_panel, load_scenario, policy_csv,
    tfp_csv, tfp_table, LoadedCoefficients, LoadedPanel, TfpTable,
};
use super::output::{self, csv_line, write_atomic, Format, Precision};
use super::{BaseArg, CliError, ReportArgs, Series};
use crate::elasticities::ElasticityReport;
use crate::index_numbers::BaseMode;
use crate::par;
use crate::policy::{evaluate_scenario, render_table, PolicyScenario, SspResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportCrop {
    pub name: String,
    pub scenario: PathBuf,
    #[serde(default)]
    pub panel: Option<PathBuf>,
    #[serde(default)]
    pub coefficients: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOptions {
    #[serde(default = "default_series")]
    pub series: String,
    #[serde(default = "default_base")]
    pub base: String,
    #[serde(default = "default_shares")]
    pub shares: String,
}

fn default_series() -> String {
    "growth".into()
}
fn default_base() -> String {
    "chain".into()
}
fn default_shares() -> String {
    "mean".into()
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            series: default_series(),
            base: default_base(),
            shares: default_shares(),
        }
    }
}

/// `report --config` file layout (TOML). Relative paths resolve against
/// the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default)]
    pub options: ReportOptions,
    #[serde(default)]
    pub crops: Vec<ReportCrop>,
}

#[derive(Debug, Clone, Serialize)]
struct InputDigest {
    crop: String,
    role: &'static str,
    path: String,
    sha256: String,
}

#[derive(Debug, Clone, Serialize)]
struct Provenance {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    inputs: Vec<InputDigest>,
    series: Series,
    base_mode: BaseMode,
    shares: String,
    precision: Precision,
}

#[derive(Debug, Clone, Serialize)]
struct CropReport {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    tfp: Option<TfpTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elasticities: Option<ElasticityReport>,
    policy: SspResult,
}

#[derive(Debug, Clone, Serialize)]
struct Bundle {
    provenance: Provenance,
    crops: Vec<CropReport>,
}

struct LoadedCrop {
    name: String,
    scenario: PolicyScenario,
    panel: Option<LoadedPanel>,
    coefficients: Option<LoadedCoefficients>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_series(s: &str) -> Result<Series, CliError> {
    match s {
        "growth" => Ok(Series::Growth),
        "index" => Ok(Series::Index),
        other => Err(CliError::Validation(format!("options.series: unknown value `{other}`"))),
    }
}

fn parse_base(s: &str) -> Result<BaseArg, CliError> {
    match s {
        "chain" => Ok(BaseArg::Chain),
        "fixed-base" => Ok(BaseArg::FixedBase),
        other => Err(CliError::Validation(format!("options.base: unknown value `{other}`"))),
    }
}

fn load_crop(
    crop: &ReportCrop,
    dir: &Path,
    digests: &mut Vec<InputDigest>,
) -> Result<LoadedCrop, CliError> {
    let mut digest = |role: &'static str, rel: &Path| -> Result<PathBuf, CliError> {
        let full = dir.join(rel);
        let bytes = read_bytes(&full)?;
        digests.push(InputDigest {
            crop: crop.name.clone(),
            role,
            path: rel.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(full)
    };
    let scenario_path = digest("scenario", &crop.scenario)?;
    let panel_path = crop.panel.as_deref().map(|p| digest("panel", p)).transpose()?;
    let coef_path = crop
        .coefficients
        .as_deref()
        .map(|p| digest("coefficients", p))
        .transpose()?;
    Ok(LoadedCrop {
        name: crop.name.clone(),
        scenario: load_scenario(&scenario_path)?,
        panel: panel_path.as_deref().map(load_panel).transpose()?,
        coefficients: coef_path.as_deref().map(load_coefficients).transpose()?,
    })
}

fn evaluate_crop(
    crop: &LoadedCrop,
    series: Series,
    mode: BaseMode,
    shares: &str,
) -> Result<CropReport, CliError> {
    let tfp = crop
        .panel
        .as_ref()
        .map(|p| tfp_table(p, None, series, mode))
        .transpose()?;
    let elasticities = crop
        .coefficients
        .as_ref()
        .map(|c| elasticity_report(c, shares, None, None))
        .transpose()?;
    let policy = evaluate_scenario(&crop.scenario).map_err(|e| {
        CliError::computation("report", format!("{}: {e}", crop.name))
    })?;
    Ok(CropReport {
        name: crop.name.clone(),
        tfp,
        elasticities,
        policy,
    })
}

fn bundle_csv(bundle: &Bundle, precision: Precision) -> String {
    let p = &bundle.provenance;
    let mut out = String::new();
    out += &format!("# tool={} version={}\n", p.tool, p.version);
    out += &format!("# config_sha256={}\n", p.config_sha256);
    for d in &p.inputs {
        out += &format!("# input crop={} role={} path={} sha256={}\n", d.crop, d.role, d.path, d.sha256);
    }
    out += &format!(
        "# options series={} base={} shares={}\n",
        serde_json::to_value(p.series).unwrap_or_default().as_str().unwrap_or_default(),
        serde_json::to_value(p.base_mode).unwrap_or_default().as_str().unwrap_or_default(),
        p.shares
    );
    // Each stage keeps its own CSV layout, prefixed by crop and stage.
    out += &csv_line(&["crop".into(), "stage".into(), "row".into()]);
    for c in &bundle.crops {
        let mut section = |stage: &str, body: String| {
            for line in body.lines() {
                out += &csv_line(&[c.name.clone(), stage.into(), line.to_string()]);
            }
        };
        if let Some(t) = &c.tfp {
            section("tfp", tfp_csv(t, precision));
        }
        if let Some(e) = &c.elasticities {
            section("elasticities", elasticity_csv(e, precision));
        }
        section("policy", policy_csv(&c.policy, precision));
    }
    out
}

pub(crate) fn run(args: &ReportArgs, format: Format, precision: Precision) -> Result<(), CliError> {
    let config_bytes = read_bytes(&args.config)?;
    let label = args.config.display().to_string();
    let text = String::from_utf8(config_bytes.clone())
        .map_err(|e| CliError::Validation(format!("{label}: {e}")))?;
    let config: ReportConfig = toml::from_str(&text).map_err(|e| CliError::Parse {
        path: label.clone(),
        line: e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
            .unwrap_or(0),
        message: e.message().to_string(),
    })?;
    if config.crops.is_empty() {
        return Err(CliError::Validation(format!("{label}: no crops configured")));
    }
    let mut names: Vec<&str> = config.crops.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Validation(format!("{label}: duplicate crop `{}`", w[0])));
    }
    let series = parse_series(&config.options.series)?;
    let mode: BaseMode = parse_base(&config.options.base)?.into();
    let dir = args.config.parent().unwrap_or(Path::new(""));

    let mut digests = Vec::new();
    let mut crops = config
        .crops
        .iter()
        .map(|c| load_crop(c, dir, &mut digests))
        .collect::<Result<Vec<_>, _>>()?;
    crops.sort_by(|a, b| a.name.cmp(&b.name));

    let reports = par::map(&crops, |c| evaluate_crop(c, series, mode, &config.options.shares))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let bundle = Bundle {
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha256_hex(&config_bytes),
            inputs: digests,
            series,
            base_mode: mode,
            shares: config.options.shares.clone(),
            precision,
        },
        crops: reports,
    };
    let (name, body) = match format {
        Format::Json => ("report.json", output::to_json(&bundle, precision)),
        Format::Csv => ("report.csv", bundle_csv(&bundle, precision)),
    };
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Io {
        path: args.out.display().to_string(),
        message: e.to_string(),
    })?;
    write_atomic(&args.out.join(name), &body)?;
    let policies: Vec<SspResult> = bundle.crops.iter().map(|c| c.policy.clone()).collect();
    output::emit(&render_table(&policies), None)
}
