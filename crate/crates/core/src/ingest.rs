//! Price ingestion, log returns, descriptive statistics and sample splitting.
//!
//! Input files are `date,price` CSVs with ISO-8601 dates and one row per
//! trading day. Rows are validated, never repaired: a missing or non-numeric
//! price, a non-positive price or an out-of-order date is an error naming the
//! offending row.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dist::chi_square_sf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub price: f64,
}

/// Strictly dated, strictly positive price observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSeries {
    observations: Vec<PricePoint>,
}

impl PriceSeries {
    pub fn new(observations: Vec<PricePoint>) -> Result<Self> {
        for (i, obs) in observations.iter().enumerate() {
            if !(obs.price > 0.0) || !obs.price.is_finite() {
                return Err(Error::NonPositivePrice {
                    date: obs.date,
                    price: obs.price,
                });
            }
            if i > 0 && observations[i - 1].date >= obs.date {
                return Err(Error::UnorderedDates {
                    previous: observations[i - 1].date,
                    date: obs.date,
                });
            }
        }
        Ok(Self { observations })
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_reader(file)
    }

    /// Parses a `date,price` CSV. Row numbers in errors are file line numbers
    /// (the header is line 1).
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?;
        if headers.len() != 2
            || !headers[0].eq_ignore_ascii_case("date")
            || !headers[1].eq_ignore_ascii_case("price")
        {
            return Err(Error::Parse {
                row: 1,
                message: format!(
                    "expected header `date,price`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }

        let mut observations = Vec::new();
        let mut record = csv::StringRecord::new();
        loop {
            let more = rdr.read_record(&mut record).map_err(|e| Error::Parse {
                row: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            if !more {
                break;
            }
            let row = record.position().map(|p| p.line()).unwrap_or(0);
            let bad = |message: String| Error::Parse { row, message };
            if record.len() != 2 {
                return Err(bad(format!("expected 2 fields, found {}", record.len())));
            }
            let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
                .map_err(|e| bad(format!("invalid date `{}`: {e}", &record[0])))?;
            let price: f64 = record[1]
                .parse()
                .map_err(|_| bad(format!("invalid price `{}`", &record[1])))?;
            if !(price > 0.0) || !price.is_finite() {
                return Err(bad(format!("non-positive price {price} on {date}")));
            }
            if let Some(prev) = observations.last().map(|p: &PricePoint| p.date) {
                if prev >= date {
                    return Err(bad(format!("date {date} does not follow {prev}")));
                }
            }
            observations.push(PricePoint { date, price });
        }
        Self::new(observations)
    }

    pub fn observations(&self) -> &[PricePoint] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnPoint {
    pub date: NaiveDate,
    /// Continuously compounded return in percent.
    pub value: f64,
}

/// Dated percentage returns with an in-sample / out-of-sample boundary.
///
/// Positions `0..split_index` are in-sample, `split_index..len` out-of-sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    observations: Vec<ReturnPoint>,
    split_index: usize,
}

impl ReturnSeries {
    /// Builds a series with every observation in-sample.
    pub fn new(observations: Vec<ReturnPoint>) -> Result<Self> {
        for (i, obs) in observations.iter().enumerate() {
            if !obs.value.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            if i > 0 && observations[i - 1].date >= obs.date {
                return Err(Error::UnorderedDates {
                    previous: observations[i - 1].date,
                    date: obs.date,
                });
            }
        }
        let split_index = observations.len();
        Ok(Self {
            observations,
            split_index,
        })
    }

    /// Builds a series from bare values, dating them on consecutive calendar
    /// days from `start`. Intended for simulated data.
    pub fn from_values(start: NaiveDate, values: &[f64]) -> Result<Self> {
        let observations = values
            .iter()
            .zip(start.iter_days())
            .map(|(&value, date)| ReturnPoint { date, value })
            .collect();
        Self::new(observations)
    }

    pub fn observations(&self) -> &[ReturnPoint] {
        &self.observations
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.value).collect()
    }

    pub fn split_index(&self) -> usize {
        self.split_index
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn in_sample(&self) -> &[ReturnPoint] {
        &self.observations[..self.split_index]
    }

    pub fn out_of_sample(&self) -> &[ReturnPoint] {
        &self.observations[self.split_index..]
    }

    pub fn in_sample_values(&self) -> Vec<f64> {
        self.in_sample().iter().map(|o| o.value).collect()
    }
}

/// `r_t = 100·[ln p_t − ln p_{t−1}]`, all observations in-sample.
pub fn compute_log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    let obs = prices.observations();
    if obs.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: obs.len(),
        });
    }
    let returns = obs
        .windows(2)
        .map(|w| ReturnPoint {
            date: w[1].date,
            value: 100.0 * (w[1].price.ln() - w[0].price.ln()),
        })
        .collect();
    ReturnSeries::new(returns)
}

/// Moves the in-sample boundary so the last `out_of_sample_count`
/// observations form the evaluation period.
pub fn split_sample(returns: &ReturnSeries, out_of_sample_count: usize) -> Result<ReturnSeries> {
    let length = returns.len();
    if out_of_sample_count > length {
        return Err(Error::SplitOutOfRange {
            requested: out_of_sample_count,
            length,
        });
    }
    Ok(ReturnSeries {
        observations: returns.observations.clone(),
        split_index: length - out_of_sample_count,
    })
}

/// Table-style summary of a return sample. `kurtosis` is the raw fourth
/// standardized moment (3 for a Gaussian), not excess kurtosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub mean: f64,
    pub std_dev: f64,
    pub minimum: f64,
    pub maximum: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub jarque_bera: f64,
    pub jb_p_value: f64,
    pub count: usize,
}

/// Summary statistics over every observation of `returns`.
pub fn descriptive_stats(returns: &ReturnSeries) -> Result<StatsSummary> {
    summarize(&returns.values())
}

/// Mean and population variance; a sample whose values are all equal is
/// rejected even when rounding leaves a tiny positive variance.
pub(crate) fn mean_variance(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(Error::ZeroVariance);
    }
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    Ok((mean, var))
}

/// Central moments use the population divisor.
pub fn summarize(values: &[f64]) -> Result<StatsSummary> {
    let n = values.len();
    if n < 4 {
        return Err(Error::TooFewObservations { needed: 4, got: n });
    }
    summarize_any(values)
}

/// [`summarize`] without the four-observation floor, for callers that report
/// very short samples as-is.
pub(crate) fn summarize_any(values: &[f64]) -> Result<StatsSummary> {
    let n = values.len();
    let (mean, _) = mean_variance(values)?;
    let count = n as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= count;
    m3 /= count;
    m4 /= count;
    if !(m2 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);
    let (jarque_bera, jb_p_value) = jarque_bera(skewness, kurtosis, n);
    let minimum = values.iter().copied().fold(f64::INFINITY, f64::min);
    let maximum = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(StatsSummary {
        // rounding can push the mean of a near-constant sample a hair outside [min, max]
        mean: mean.clamp(minimum, maximum),
        std_dev: m2.sqrt(),
        minimum,
        maximum,
        skewness,
        kurtosis,
        jarque_bera,
        jb_p_value,
        count: n,
    })
}

/// Jarque-Bera normality statistic `n·(S²/6 + (K−3)²/24)` and its
/// chi-square(2) p-value. `kurtosis` is raw (not excess).
pub fn jarque_bera(skewness: f64, kurtosis: f64, count: usize) -> (f64, f64) {
    let excess = kurtosis - 3.0;
    let statistic = count as f64 * (skewness * skewness / 6.0 + excess * excess / 24.0);
    (statistic, chi_square_sf(statistic, 2))
}
