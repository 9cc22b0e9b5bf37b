//! Price ingestion, calendar alignment, and compound-return construction.
//!
//! Input CSVs carry one ISO-8601 date column followed by one adjusted-close
//! column per ticker. Days on which any asset lacks a price are dropped
//! (intersection alignment, no forward fill) so that every retained day has
//! a full cross-section.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::ambiguity::SampleSet;
use crate::error::{Error, Result};

/// Ingestion options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Trading days per year used to de-annualize risk-free rates.
    pub day_count: u32,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { day_count: 252 }
    }
}

/// Aligned daily prices for a set of assets plus an optional risk-free rate
/// path (annualized decimal per day).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub tickers: Vec<String>,
    /// Row-major: `prices[day][asset]`, strictly positive.
    pub prices: Vec<Vec<f64>>,
    /// Annualized risk-free rate per retained day; empty when not supplied.
    pub risk_free: Vec<f64>,
    /// Ordered trading-day labels, one per price row.
    pub calendar: Vec<String>,
    /// Trading days per year for rate conversion.
    pub day_count: u32,
}

/// What alignment discarded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub dropped_days: Vec<String>,
}

/// Per-period simple returns: `values[k][i] = S_i(k+1)/S_i(k) - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    pub values: Vec<Vec<f64>>,
    pub tickers: Vec<String>,
}

/// How consecutive return rows are grouped into compound-return samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockMode {
    /// Disjoint consecutive blocks of `n` rows (buy-and-hold semantics).
    #[default]
    NonOverlapping,
    /// Every window of `n` consecutive rows; sample-hungry but serially
    /// dependent.
    Overlapping,
}

impl PriceSeries {
    pub fn asset_count(&self) -> usize {
        self.tickers.len()
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Column index of a ticker.
    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    /// Contiguous day slice `[start, end)` as a new series.
    pub fn slice(&self, start: usize, end: usize) -> PriceSeries {
        PriceSeries {
            tickers: self.tickers.clone(),
            prices: self.prices[start..end].to_vec(),
            risk_free: if self.risk_free.is_empty() {
                Vec::new()
            } else {
                self.risk_free[start..end].to_vec()
            },
            calendar: self.calendar[start..end].to_vec(),
            day_count: self.day_count,
        }
    }

    /// Restrict to a subset of tickers, preserving order of `keep`.
    pub fn select(&self, keep: &[String]) -> Result<PriceSeries> {
        let mut idx = Vec::with_capacity(keep.len());
        for t in keep {
            match self.ticker_index(t) {
                Some(i) => idx.push(i),
                None => {
                    return Err(Error::InvalidConfig {
                        field: "tickers".into(),
                        message: format!("unknown ticker {t:?}"),
                    })
                }
            }
        }
        Ok(PriceSeries {
            tickers: keep.to_vec(),
            prices: self
                .prices
                .iter()
                .map(|row| idx.iter().map(|&i| row[i]).collect())
                .collect(),
            risk_free: self.risk_free.clone(),
            calendar: self.calendar.clone(),
            day_count: self.day_count,
        })
    }

    /// Simple daily risk-free return on day `k`, `rate/day_count`, or 0 when
    /// no rate path is attached.
    pub fn daily_risk_free(&self, k: usize) -> f64 {
        if self.risk_free.is_empty() {
            0.0
        } else {
            self.risk_free[k] / self.day_count as f64
        }
    }

    /// Compound risk-free growth over days `[start, start+n)` minus one.
    pub fn compound_risk_free(&self, start: usize, n: usize) -> f64 {
        let mut acc = 1.0;
        for k in start..(start + n).min(self.len()) {
            acc *= 1.0 + self.daily_risk_free(k);
        }
        acc - 1.0
    }
}

fn parse_price(field: &str, line: usize) -> Result<Option<f64>> {
    let t = field.trim();
    if t.is_empty() {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::MalformedCsv {
            line,
            message: format!("not a number: {t:?}"),
        })
}

/// Load an aligned price series from a CSV file (first column date, one
/// column per ticker). Rows with any missing price are dropped and reported.
pub fn load_csv(path: &Path, _config: &IngestConfig) -> Result<(PriceSeries, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::MalformedCsv {
            line: 1,
            message: "need a date column and at least one ticker column".into(),
        });
    }
    let tickers: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();

    let mut calendar = Vec::new();
    let mut prices: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();

    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = row_idx + 2;
        if record.is_empty() {
            continue;
        }
        let date = record.get(0).unwrap_or("").trim().to_string();
        if date.is_empty() {
            return Err(Error::MalformedCsv {
                line,
                message: "missing date".into(),
            });
        }
        let mut row = Vec::with_capacity(tickers.len());
        let mut complete = true;
        for (col, ticker) in tickers.iter().enumerate() {
            let field = record.get(col + 1).unwrap_or("");
            match parse_price(field, line)? {
                Some(v) => {
                    if v <= 0.0 {
                        return Err(Error::NonPositivePrice {
                            ticker: ticker.clone(),
                            date: date.clone(),
                            value: v,
                        });
                    }
                    row.push(v);
                }
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            calendar.push(date);
            prices.push(row);
        } else {
            dropped.push(date);
        }
    }

    if prices.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: prices.len(),
        });
    }

    Ok((
        PriceSeries {
            tickers,
            prices,
            risk_free: Vec::new(),
            calendar,
            day_count: _config.day_count,
        },
        LoadReport {
            dropped_days: dropped,
        },
    ))
}

/// Load a (date, annualized rate) CSV and join it onto the series calendar.
/// Days missing from the rate file reuse the last known rate (rates are
/// slow-moving); a leading gap uses the first available rate.
pub fn attach_risk_free(series: &mut PriceSeries, path: &Path) -> Result<()> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut by_date = std::collections::BTreeMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = row_idx + 2;
        let date = record.get(0).unwrap_or("").trim().to_string();
        if let Some(rate) = parse_price(record.get(1).unwrap_or(""), line)? {
            by_date.insert(date, rate);
        }
    }
    if by_date.is_empty() {
        return Err(Error::MalformedCsv {
            line: 1,
            message: "risk-free file has no usable rows".into(),
        });
    }
    let first = *by_date.values().next().unwrap();
    let mut last = first;
    let mut rates = Vec::with_capacity(series.calendar.len());
    for d in &series.calendar {
        if let Some(&r) = by_date.get(d) {
            last = r;
        }
        rates.push(last);
    }
    series.risk_free = rates;
    Ok(())
}

/// Per-period simple returns between consecutive aligned days.
pub fn per_period_returns(p: &PriceSeries) -> Result<ReturnMatrix> {
    if p.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: p.len(),
        });
    }
    let values = p
        .prices
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(&prev, &next)| next / prev - 1.0)
                .collect()
        })
        .collect();
    Ok(ReturnMatrix {
        values,
        tickers: p.tickers.clone(),
    })
}

/// Compound consecutive per-period returns into n-period samples,
/// `x_i = prod_k (1 + r_i(k)) - 1` over each block.
pub fn compound_returns(r: &ReturnMatrix, n: usize) -> Result<SampleSet> {
    compound_returns_with_mode(r, n, BlockMode::NonOverlapping)
}

/// As [`compound_returns`] with an explicit block mode.
pub fn compound_returns_with_mode(r: &ReturnMatrix, n: usize, mode: BlockMode) -> Result<SampleSet> {
    let rows = r.values.len();
    if n == 0 || n > rows {
        return Err(Error::HorizonTooLong { n, rows });
    }
    let m = r.tickers.len();
    let starts: Vec<usize> = match mode {
        BlockMode::NonOverlapping => (0..rows / n).map(|b| b * n).collect(),
        BlockMode::Overlapping => (0..=rows - n).collect(),
    };
    let mut samples = Vec::with_capacity(starts.len());
    for s in starts {
        if n == 1 {
            // exact identity on single-period blocks
            samples.push(r.values[s].clone());
            continue;
        }
        let mut acc = vec![1.0; m];
        for k in s..s + n {
            for i in 0..m {
                acc[i] *= 1.0 + r.values[k][i];
            }
        }
        samples.push(acc.into_iter().map(|v| v - 1.0).collect());
    }
    SampleSet::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn alignment_drops_incomplete_days() {
        let f = write_tmp(
            "date,A,B\n2023-01-02,100,50\n2023-01-03,101,\n2023-01-04,102,51\n2023-01-05,103,52\n",
        );
        let (series, report) = load_csv(f.path(), &IngestConfig::default()).unwrap();
        assert_eq!(series.len(), 3);
        assert_eq!(report.dropped_days, vec!["2023-01-03".to_string()]);
    }

    #[test]
    fn non_positive_price_is_an_error() {
        let f = write_tmp("date,A\n2023-01-02,100\n2023-01-03,0\n");
        let err = load_csv(f.path(), &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonPositivePrice { .. }));
        assert!(err.to_string().contains("non-positive price"));
    }

    #[test]
    fn single_asset_load() {
        let f = write_tmp("date,A\n2023-01-02,100\n2023-01-03,110\n2023-01-04,121\n");
        let (series, report) = load_csv(f.path(), &IngestConfig::default()).unwrap();
        assert_eq!(series.asset_count(), 1);
        assert_eq!(series.len(), 3);
        assert!(report.dropped_days.is_empty());
    }

    #[test]
    fn alignment_is_idempotent() {
        let f = write_tmp(
            "date,A,B\n2023-01-02,100,50\n2023-01-03,101,\n2023-01-04,102,51\n",
        );
        let (series, _) = load_csv(f.path(), &IngestConfig::default()).unwrap();
        // re-serialize the aligned series and reload: nothing more to drop
        let mut body = String::from("date,A,B\n");
        for (d, row) in series.calendar.iter().zip(&series.prices) {
            body.push_str(&format!("{d},{},{}\n", row[0], row[1]));
        }
        let f2 = write_tmp(&body);
        let (_, report2) = load_csv(f2.path(), &IngestConfig::default()).unwrap();
        assert!(report2.dropped_days.is_empty());
    }

    fn series_from(prices: &[f64]) -> PriceSeries {
        PriceSeries {
            tickers: vec!["A".into()],
            prices: prices.iter().map(|&p| vec![p]).collect(),
            risk_free: Vec::new(),
            calendar: (0..prices.len()).map(|i| format!("d{i}")).collect(),
            day_count: 252,
        }
    }

    #[test]
    fn per_period_return_examples() {
        let r = per_period_returns(&series_from(&[100.0, 110.0, 121.0])).unwrap();
        assert!((r.values[0][0] - 0.1).abs() < 1e-12);
        assert!((r.values[1][0] - 0.1).abs() < 1e-12);

        let flat = per_period_returns(&series_from(&[50.0, 50.0])).unwrap();
        assert_eq!(flat.values[0][0], 0.0);

        let down = per_period_returns(&series_from(&[100.0, 90.0])).unwrap();
        assert!((down.values[0][0] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn compound_two_periods() {
        let r = per_period_returns(&series_from(&[100.0, 110.0, 121.0])).unwrap();
        let s = compound_returns(&r, 2).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.samples()[0][0] - 0.21).abs() < 1e-12);
    }

    #[test]
    fn compound_identity_at_n1() {
        let r = ReturnMatrix {
            values: vec![vec![0.05], vec![-0.02], vec![0.01]],
            tickers: vec!["A".into()],
        };
        let s = compound_returns(&r, 1).unwrap();
        assert_eq!(s.len(), 3);
        for (row, sample) in r.values.iter().zip(s.samples()) {
            assert_eq!(row, sample);
        }
    }

    #[test]
    fn compound_mixed_signs() {
        let r = ReturnMatrix {
            values: vec![vec![0.5], vec![-0.4]],
            tickers: vec!["A".into()],
        };
        let s = compound_returns(&r, 2).unwrap();
        assert!((s.samples()[0][0] - (1.5 * 0.6 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn horizon_larger_than_history_fails() {
        let r = ReturnMatrix {
            values: vec![vec![0.1]],
            tickers: vec!["A".into()],
        };
        assert!(matches!(
            compound_returns(&r, 2),
            Err(Error::HorizonTooLong { .. })
        ));
    }

    #[test]
    fn overlapping_mode_yields_more_samples() {
        let r = ReturnMatrix {
            values: vec![vec![0.1], vec![0.2], vec![0.3]],
            tickers: vec!["A".into()],
        };
        let s = compound_returns_with_mode(&r, 2, BlockMode::Overlapping).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.samples()[0][0] - (1.1 * 1.2 - 1.0)).abs() < 1e-12);
        assert!((s.samples()[1][0] - (1.2 * 1.3 - 1.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn compound_returns_stay_above_minus_one(
            rows in prop::collection::vec(prop::collection::vec(-0.99f64..5.0, 2), 1..12),
            n in 1usize..4,
        ) {
            prop_assume!(rows.len() >= n);
            let r = ReturnMatrix { values: rows, tickers: vec!["A".into(), "B".into()] };
            let s = compound_returns(&r, n).unwrap();
            for sample in s.samples() {
                for &v in sample {
                    prop_assert!(v > -1.0);
                }
            }
        }
    }
}
