//! Run configuration: defaults, a flat `key = value` file, and flag overrides.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::Failure;
use crate::pipeline::PipelineConfig;
use crate::var_engine::ModelTag;

/// Effective configuration of one CLI invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input_path: None,
            output_dir: PathBuf::from("."),
            pipeline: PipelineConfig::default(),
        }
    }
}

impl RunConfig {
    /// SHA-256 of the canonical JSON form, leaving out `output_dir` so that
    /// moving a run's outputs does not change its identity.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut value {
            map.remove("output_dir");
        }
        let canonical = serde_json::to_string(&value).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn input(&self) -> Result<&Path, Failure> {
        self.input_path.as_deref().ok_or_else(|| {
            Failure::Input("no input file given (use --input or `input` in the config file)".into())
        })
    }

    pub fn apply(&mut self, o: Overrides) {
        let p = &mut self.pipeline;
        if let Some(v) = o.input {
            self.input_path = Some(v);
        }
        if let Some(v) = o.output_dir {
            self.output_dir = v;
        }
        if let Some(v) = o.out_of_sample {
            p.out_of_sample_count = v;
        }
        if let Some(v) = o.alpha {
            p.alpha = v;
        }
        if let Some(v) = o.horizons {
            p.horizons = v;
        }
        if let Some(v) = o.models {
            p.models = v;
        }
        if let Some(v) = o.riskmetrics_lambda {
            p.riskmetrics_lambda = v;
        }
        if let Some(v) = o.cf_raw_kurtosis {
            p.cf_raw_kurtosis = v;
        }
        if let Some(v) = o.cf_full {
            p.cf_full = v;
        }
        if let Some(v) = o.rolling_window {
            p.rolling_window = Some(v);
        }
        if let Some(v) = o.pin_mu {
            p.pin_mu = v;
        }
        if let Some(v) = o.credit_addon {
            p.credit_addon = v;
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let p = &self.pipeline;
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return Err(Failure::Input(format!(
                "alpha must lie in (0, 1), got {}",
                p.alpha
            )));
        }
        if !(p.riskmetrics_lambda > 0.0 && p.riskmetrics_lambda < 1.0) {
            return Err(Failure::Input(format!(
                "riskmetrics_lambda must lie in (0, 1), got {}",
                p.riskmetrics_lambda
            )));
        }
        if p.horizons.is_empty() || p.horizons.contains(&0) {
            return Err(Failure::Input(
                "horizons must be a non-empty list of positive integers".into(),
            ));
        }
        if p.models.is_empty() {
            return Err(Failure::Input(
                "at least one model must be requested".into(),
            ));
        }
        if p.rolling_window == Some(0) {
            return Err(Failure::Input("rolling_window must be positive".into()));
        }
        if !p.credit_addon.is_finite() {
            return Err(Failure::Input("credit_addon must be finite".into()));
        }
        Ok(())
    }
}

/// Partial configuration from one source; `None` leaves the lower layer alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub out_of_sample: Option<usize>,
    pub alpha: Option<f64>,
    pub horizons: Option<Vec<u32>>,
    pub models: Option<Vec<ModelTag>>,
    pub riskmetrics_lambda: Option<f64>,
    pub cf_raw_kurtosis: Option<bool>,
    pub cf_full: Option<bool>,
    pub rolling_window: Option<usize>,
    pub pin_mu: Option<bool>,
    pub credit_addon: Option<f64>,
}

pub fn parse_horizons(s: &str) -> Result<Vec<u32>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<u32>()
                .map_err(|_| format!("invalid horizon `{t}`"))
        })
        .collect()
}

pub fn parse_models(s: &str) -> Result<Vec<ModelTag>, String> {
    let mut out: Vec<ModelTag> = Vec::new();
    for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if t.eq_ignore_ascii_case("all") {
            out.extend(ModelTag::ALL);
            continue;
        }
        out.push(t.parse().map_err(|e| format!("{e}"))?);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("invalid boolean `{s}`")),
    }
}

/// Parses a flat config file: one `key = value` per line, `#` starts a
/// comment, keys may use `-` or `_`.
pub fn parse_config_file(text: &str, origin: &Path) -> Result<Overrides, Failure> {
    let mut o = Overrides::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad =
            |msg: String| Failure::Input(format!("{}: line {}: {msg}", origin.display(), i + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim().replace('-', "_");
        let value = value.trim().trim_matches('"');
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| bad(format!("invalid number `{v}` for {key}")))
        };
        let int = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| bad(format!("invalid integer `{v}` for {key}")))
        };
        match key.as_str() {
            "input" | "input_path" => o.input = Some(PathBuf::from(value)),
            "output_dir" => o.output_dir = Some(PathBuf::from(value)),
            "out_of_sample" | "out_of_sample_count" => o.out_of_sample = Some(int(value)?),
            "alpha" => o.alpha = Some(num(value)?),
            "horizons" => o.horizons = Some(parse_horizons(value).map_err(bad)?),
            "models" => o.models = Some(parse_models(value).map_err(bad)?),
            "riskmetrics_lambda" => o.riskmetrics_lambda = Some(num(value)?),
            "cf_raw_kurtosis" => o.cf_raw_kurtosis = Some(parse_bool(value).map_err(bad)?),
            "cf_full" => o.cf_full = Some(parse_bool(value).map_err(bad)?),
            "rolling_window" => o.rolling_window = Some(int(value)?),
            "pin_mu" => o.pin_mu = Some(parse_bool(value).map_err(bad)?),
            "credit_addon" => o.credit_addon = Some(num(value)?),
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }
    Ok(o)
}
