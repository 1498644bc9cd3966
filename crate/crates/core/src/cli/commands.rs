use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::output::{read_stamped_csv, Outputs};
use super::Failure;
use crate::backtest::{hit_sequence, render_table, run_backtest_with_addon, BacktestReport};
use crate::ewma::{fmt_num, DecayParams, MomentPath};
use crate::garch::GarchParams;
use crate::ingest::{compute_log_returns, split_sample, summarize_any, PriceSeries, ReturnSeries};
use crate::pipeline::{fit_models, forecast_all, realized_returns, Fits};
use crate::var_engine::{ModelTag, VaRSeries};

const MOMENT_PATH: &str = "moment_path.csv";
const GARCH_VARIANCE: &str = "garch_variance.csv";
const RISKMETRICS_VARIANCE: &str = "riskmetrics_variance.csv";
const BACKTEST_REPORT: &str = "backtest_report.json";
const REPORT_DIR: &str = "report";

fn load_returns(cfg: &RunConfig) -> Result<ReturnSeries, Failure> {
    let input = cfg.input()?;
    let prices = PriceSeries::from_csv_path(input).map_err(|e| match e {
        crate::Error::Io { .. } => Failure::from(e),
        other => Failure::from(other).context(input.display()),
    })?;
    Ok(compute_log_returns(&prices)?)
}

fn load_split(cfg: &RunConfig) -> Result<ReturnSeries, Failure> {
    let returns = load_returns(cfg)?;
    Ok(split_sample(&returns, cfg.pipeline.out_of_sample_count)?)
}

fn var_file(s: &VaRSeries) -> String {
    format!(
        "var_{}_{}d.csv",
        s.query.model_tag.slug(),
        s.query.horizon_days
    )
}

fn hits_file(tag: ModelTag, horizon: u32) -> String {
    format!("hits_{}_{}d.csv", tag.slug(), horizon)
}

#[derive(Serialize)]
struct StatsResult<'a> {
    input: &'a Path,
    first_date: Option<NaiveDate>,
    last_date: Option<NaiveDate>,
    #[serde(flatten)]
    stats: crate::ingest::StatsSummary,
}

pub fn stats(cfg: &RunConfig) -> Result<(), Failure> {
    let returns = load_returns(cfg)?;
    let values = returns.values();
    if values.len() < 4 {
        log::warn!(
            "only {} returns; skewness, kurtosis and Jarque-Bera are not meaningful",
            values.len()
        );
    }
    let stats = summarize_any(&values)?;
    let mut out = Outputs::new(cfg);
    out.json(
        "stats.json",
        &StatsResult {
            input: cfg.input()?,
            first_date: returns.observations().first().map(|p| p.date),
            last_date: returns.observations().last().map(|p| p.date),
            stats,
        },
    )?;
    let name = cfg
        .input()?
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    println!(
        "{:<16} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>12} {:>8} {:>6}",
        "Series", "Mean", "Std.Dev.", "Min", "Max", "Skewness", "Kurtosis", "JB", "p", "N"
    );
    println!(
        "{:<16} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>12.3} {:>8.4} {:>6}",
        name,
        stats.mean,
        stats.std_dev,
        stats.minimum,
        stats.maximum,
        stats.skewness,
        stats.kurtosis,
        stats.jarque_bera,
        stats.jb_p_value,
        stats.count
    );
    Ok(())
}

#[derive(Serialize)]
struct SampleInfo {
    in_sample_count: usize,
    in_sample_start: NaiveDate,
    in_sample_end: NaiveDate,
    init_variance: f64,
}

impl SampleInfo {
    fn new(returns: &ReturnSeries, fits: &Fits) -> Self {
        let ins = returns.in_sample();
        Self {
            in_sample_count: ins.len(),
            in_sample_start: ins[0].date,
            in_sample_end: ins[ins.len() - 1].date,
            init_variance: fits.init_variance,
        }
    }
}

#[derive(Serialize)]
struct EwmaSkResult<'a> {
    model: ModelTag,
    #[serde(flatten)]
    params: &'a DecayParams,
    #[serde(flatten)]
    sample: &'a SampleInfo,
}

#[derive(Serialize)]
struct GarchResult<'a> {
    model: ModelTag,
    #[serde(flatten)]
    params: &'a GarchParams,
    persistence: f64,
    unconditional_variance: f64,
    #[serde(flatten)]
    sample: &'a SampleInfo,
}

fn write_path(out: &mut Outputs, name: &str, path: &MomentPath, full: bool) -> Result<(), Failure> {
    out.csv(name, |buf| {
        if full {
            path.write_csv(buf)
        } else {
            path.write_variance_csv(buf)
        }
    })
}

pub fn fit(cfg: &RunConfig) -> Result<(), Failure> {
    let returns = load_split(cfg)?;
    let fits = fit_models(&returns, &cfg.pipeline)?;
    let sample = SampleInfo::new(&returns, &fits);
    let mut out = Outputs::new(cfg);

    println!(
        "in-sample: {} returns, {} to {}",
        sample.in_sample_count, sample.in_sample_start, sample.in_sample_end
    );
    let t = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.2}"));
    if let (Some(p), Some(path)) = (&fits.ewma_sk, &fits.ewma_sk_path) {
        out.json(
            "ewma_sk.json",
            &EwmaSkResult {
                model: ModelTag::EwmaSk,
                params: p,
                sample: &sample,
            },
        )?;
        write_path(&mut out, MOMENT_PATH, path, true)?;
        println!(
            "EWMA-SK  lambda1 {:.4} (t {})  lambda2 {:.4} (t {})  lambda3 {:.4} (t {})  mu {:.4}  logL {:.3}",
            p.lambda1, t(p.t_stats[0]), p.lambda2, t(p.t_stats[1]), p.lambda3, t(p.t_stats[2]), p.mu, p.log_likelihood
        );
    }
    if let (Some(p), Some(path)) = (&fits.garch, &fits.garch_path) {
        out.json(
            "garch.json",
            &GarchResult {
                model: ModelTag::GarchN,
                params: p,
                persistence: p.persistence(),
                unconditional_variance: p.unconditional_variance(),
                sample: &sample,
            },
        )?;
        write_path(&mut out, GARCH_VARIANCE, path, false)?;
        println!(
            "GARCH-N  omega {:.4} (t {})  alpha {:.4} (t {})  beta {:.4} (t {})  mu {:.4}  logL {:.3}",
            p.omega, t(p.t_stats[1]), p.alpha, t(p.t_stats[2]), p.beta, t(p.t_stats[3]), p.mu, p.log_likelihood
        );
    }
    write_path(
        &mut out,
        RISKMETRICS_VARIANCE,
        &fits.riskmetrics_path,
        false,
    )?;
    println!(
        "RiskMetrics  lambda {:.4}  mu {:.4}",
        fits.riskmetrics.lambda, fits.riskmetrics.mu
    );
    Ok(())
}

fn forecasts(cfg: &RunConfig) -> Result<(ReturnSeries, Vec<VaRSeries>), Failure> {
    let returns = load_split(cfg)?;
    let fits = fit_models(&returns, &cfg.pipeline)?;
    let series = forecast_all(&returns, &fits, &cfg.pipeline)?;
    Ok((returns, series))
}

fn write_var_files(out: &mut Outputs, series: &[VaRSeries]) -> Result<(), Failure> {
    for s in series {
        out.csv(&var_file(s), |buf| s.write_csv(buf))?;
    }
    Ok(())
}

pub fn forecast(cfg: &RunConfig) -> Result<(), Failure> {
    let (_, series) = forecasts(cfg)?;
    let mut out = Outputs::new(cfg);
    write_var_files(&mut out, &series)?;
    out.json("var_forecasts.json", &series)?;
    println!(
        "{:<12} {:>3} {:>5} {:>10} {:>10} {:>10}",
        "Model", "h", "N", "Mean VaR", "Min", "Max"
    );
    for s in &series {
        let l = s.losses();
        let mean = l.iter().sum::<f64>() / l.len().max(1) as f64;
        let min = l.iter().copied().fold(f64::INFINITY, f64::min);
        let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{:<12} {:>3} {:>5} {:>10.4} {:>10.4} {:>10.4}",
            s.query.model_tag.as_str(),
            s.query.horizon_days,
            s.len(),
            mean,
            min,
            max
        );
    }
    Ok(())
}

pub fn backtest(cfg: &RunConfig) -> Result<(), Failure> {
    let (returns, series) = forecasts(cfg)?;
    let mut out = Outputs::new(cfg);
    write_var_files(&mut out, &series)?;

    let mut reports = Vec::with_capacity(series.len());
    for s in &series {
        let (tag, h) = (s.query.model_tag, s.query.horizon_days);
        let ctx = |e: crate::Error| Failure::from(e).context(format!("{tag}, {h}-day"));
        let realized = realized_returns(&returns, h);
        let hits = hit_sequence(&realized, s).map_err(ctx)?;
        out.csv(&hits_file(tag, h), |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["date", "realized_return", "var_loss", "hit"])?;
            for ((r, v), hit) in realized.iter().zip(&s.entries).zip(hits.hits()) {
                w.write_record([
                    r.date.to_string(),
                    fmt_num(r.value),
                    fmt_num(v.var_loss),
                    hit.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
        reports
            .push(run_backtest_with_addon(&realized, s, cfg.pipeline.credit_addon).map_err(ctx)?);
    }

    let table = render_table(&reports);
    out.json(BACKTEST_REPORT, &reports)?;
    out.text("backtest_table.txt", &table)?;
    print!("{table}");
    Ok(())
}

fn require(dir: &Path, name: &str) -> Result<std::path::PathBuf, Failure> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(Failure::Missing(format!(
            "{} (run `fit` and `backtest` first)",
            path.display()
        )))
    }
}

/// A stamped CSV from an earlier run. When the report is run with the same
/// input as the earlier commands, the stamps are checked against its config.
fn read_prior(path: &Path, hash: Option<&str>) -> Result<Vec<csv::StringRecord>, Failure> {
    let (stamp, records) = read_stamped_csv(path)?;
    if hash.is_some() && stamp.as_deref() != hash {
        log::warn!(
            "{} was produced by a different configuration",
            path.display()
        );
    }
    Ok(records)
}

#[derive(Deserialize)]
struct Envelope<T> {
    config_hash: String,
    result: T,
}

fn parse_num(s: &str, path: &Path) -> Result<f64, Failure> {
    s.parse()
        .map_err(|_| Failure::Input(format!("{}: invalid number `{s}`", path.display())))
}

pub fn report(cfg: &RunConfig) -> Result<(), Failure> {
    let dir = cfg.output_dir.as_path();
    let p = &cfg.pipeline;

    let mut vol_sources = vec![("riskmetrics", require(dir, RISKMETRICS_VARIANCE)?)];
    let moment = if p.needs_ewma_sk() {
        Some(require(dir, MOMENT_PATH)?)
    } else {
        None
    };
    if let Some(m) = &moment {
        vol_sources.push(("ewma_sk", m.clone()));
    }
    if p.needs_garch() {
        vol_sources.push(("garch_n", require(dir, GARCH_VARIANCE)?));
    }
    let report_path = require(dir, BACKTEST_REPORT)?;
    let mut hit_paths = BTreeMap::new();
    for &h in &p.horizons {
        for &tag in &p.models {
            hit_paths.insert((h, tag), require(dir, &hits_file(tag, h))?);
        }
    }

    let mut out = Outputs::new(cfg);
    let expected = cfg.input_path.is_some().then(|| out.hash.clone());
    let hash = expected.as_deref();

    // in-sample volatility paths, one column per filtered model
    let mut dates: Vec<String> = Vec::new();
    let mut columns: Vec<(&str, Vec<String>)> = Vec::new();
    for (name, path) in &vol_sources {
        let records = read_prior(path, hash)?;
        if columns.is_empty() {
            dates = records.iter().map(|r| r[0].to_string()).collect();
        } else if records.len() != dates.len()
            || records.iter().zip(&dates).any(|(r, d)| &r[0] != d)
        {
            return Err(Failure::Input(format!(
                "{} does not cover the same dates as {RISKMETRICS_VARIANCE}",
                path.display()
            )));
        }
        let vol = records
            .iter()
            .map(|r| parse_num(&r[1], path).map(|v| fmt_num(v.sqrt())))
            .collect::<Result<Vec<_>, _>>()?;
        columns.push((name, vol));
    }
    out.csv(&format!("{REPORT_DIR}/volatility_paths.csv"), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut header = vec!["date"];
        header.extend(columns.iter().map(|(n, _)| *n));
        w.write_record(&header)?;
        for (i, d) in dates.iter().enumerate() {
            let mut row = vec![d.as_str()];
            row.extend(columns.iter().map(|(_, c)| c[i].as_str()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })?;

    if let Some(path) = &moment {
        let records = read_prior(path, hash)?;
        let rows = records
            .iter()
            .map(|r| {
                let var = parse_num(&r[1], path)?;
                Ok([
                    r[0].to_string(),
                    r[1].to_string(),
                    fmt_num(var.sqrt()),
                    r[2].to_string(),
                    r[3].to_string(),
                ])
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        out.csv(&format!("{REPORT_DIR}/moment_paths.csv"), |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["date", "variance", "volatility", "skew_state", "kurt_state"])?;
            for row in &rows {
                w.write_record(row)?;
            }
            w.flush()?;
            Ok(())
        })?;
    }

    // out-of-sample VaR against realized returns, one file per horizon
    for &h in &p.horizons {
        let mut base: Option<Vec<(String, String)>> = None;
        let mut vars: Vec<(ModelTag, Vec<String>)> = Vec::new();
        for &tag in &p.models {
            let path = &hit_paths[&(h, tag)];
            let records = read_prior(path, hash)?;
            let rows: Vec<(String, String)> = records
                .iter()
                .map(|r| (r[0].to_string(), r[1].to_string()))
                .collect();
            match &base {
                None => base = Some(rows),
                Some(b) if b.iter().map(|x| &x.0).ne(rows.iter().map(|x| &x.0)) => {
                    return Err(Failure::Input(format!(
                        "{} is not aligned with the other {h}-day hit files",
                        path.display()
                    )));
                }
                Some(_) => {}
            }
            vars.push((tag, records.iter().map(|r| r[2].to_string()).collect()));
        }
        let base = base.unwrap_or_default();
        out.csv(&format!("{REPORT_DIR}/var_vs_returns_{h}d.csv"), |buf| {
            let mut w = csv::Writer::from_writer(buf);
            let mut header = vec!["date".to_string(), "realized_return".to_string()];
            header.extend(vars.iter().map(|(t, _)| t.to_string()));
            w.write_record(&header)?;
            for (i, (d, r)) in base.iter().enumerate() {
                let mut row = vec![d.as_str(), r.as_str()];
                row.extend(vars.iter().map(|(_, v)| v[i].as_str()));
                w.write_record(&row)?;
            }
            w.flush()?;
            Ok(())
        })?;
    }

    let text = std::fs::read_to_string(&report_path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", report_path.display())))?;
    let envelope: Envelope<Vec<BacktestReport>> = serde_json::from_str(&text)
        .map_err(|e| Failure::Input(format!("cannot parse {}: {e}", report_path.display())))?;
    if hash.is_some_and(|h| h != envelope.config_hash) {
        log::warn!(
            "{} was produced by a different configuration",
            report_path.display()
        );
    }
    out.csv(&format!("{REPORT_DIR}/backtest_summary.csv"), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "model",
            "horizon",
            "observations",
            "violations",
            "failure_pct",
            "lr_uc",
            "p_uc",
            "lr_ind",
            "p_ind",
            "lr_cc",
            "p_cc",
            "zone",
            "multiplier",
        ])?;
        for r in &envelope.result {
            w.write_record([
                r.model.to_string(),
                r.horizon.to_string(),
                r.observations.to_string(),
                r.violations.to_string(),
                fmt_num(r.failure_pct),
                fmt_num(r.lr_uc.statistic),
                fmt_num(r.lr_uc.p_value),
                fmt_num(r.lr_ind.statistic),
                fmt_num(r.lr_ind.p_value),
                fmt_num(r.lr_cc.statistic),
                fmt_num(r.lr_cc.p_value),
                format!("{:?}", r.basel_zone.zone).to_lowercase(),
                fmt_num(r.basel_zone.multiplier),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;

    let mut summary = String::new();
    for path in out.written() {
        let _ = writeln!(summary, "{}", path.display());
    }
    print!("{summary}");
    Ok(())
}
