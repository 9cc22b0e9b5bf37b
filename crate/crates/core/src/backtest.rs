//! Sliding-window rebalancing engine and performance metrics.
//!
//! At each rebalance date the engine estimates GBM parameters on the
//! trailing window, simulates compound-return samples, solves the robust
//! program at every configured radius, and steps the account through the
//! realized n-day block with costs charged once on the allocation. The
//! account path is recorded at rebalance boundaries: between rebalances the
//! investor makes no trades.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{NormKind, SampleSet, SupportBox};
use crate::cost_model::CostModel;
use crate::dro::{solve, DroSolution, SolverConfig};
use crate::error::{Error, Result};
use crate::market_data::PriceSeries;
use crate::sampling::{estimate_gbm, simulate_samples, GbmParams, SimulationOptions};

/// Engine configuration. When `include_risk_free` is set, asset 0 of the
/// solved portfolio is the deterministic risk-free leg and the cost model
/// must exempt it (or charge it) explicitly; risky assets follow in the
/// order of the price series tickers.
#[derive(Debug, Clone)]
pub struct BacktestConfig {
    /// Trailing estimation window in days (>= 3).
    pub window: usize,
    /// Days between rebalances (the compounding horizon n).
    pub horizon: usize,
    /// Ambiguity radii to run.
    pub epsilons: Vec<f64>,
    /// Cost model over the full asset vector (risk-free leg included when
    /// `include_risk_free`).
    pub cost: CostModel,
    pub v0: f64,
    pub seed: u64,
    pub norm_kind: NormKind,
    /// Per-risky-asset one-day return bounds, compounded into the support
    /// box at each rebalance.
    pub step_lower: Vec<f64>,
    pub step_upper: Vec<f64>,
    /// Monte Carlo samples per window.
    pub samples: usize,
    pub include_risk_free: bool,
    /// Correlated GBM (default) or per-asset independent simulation.
    pub correlated: bool,
    pub solver: SolverConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        // lighter solver profile: a sliding backtest solves many instances
        let solver = SolverConfig {
            max_iterations: 200,
            inner_gap_tol: 1e-9,
            fw_max_iters: 120,
            lambda_bisections: 48,
            refine_sweeps: 6,
            perturbation_probes: 0,
            ..SolverConfig::default()
        };
        Self {
            window: 21,
            horizon: 21,
            epsilons: vec![0.0, 1e-3, 1e-2, 1e-1, 1.0],
            cost: CostModel::zero(1),
            v0: 1.0,
            seed: 0,
            norm_kind: NormKind::Two,
            step_lower: Vec::new(),
            step_upper: Vec::new(),
            samples: 1000,
            include_risk_free: true,
            correlated: true,
            solver,
        }
    }
}

/// Account trajectory recorded at rebalance boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountPath {
    pub timestamps: Vec<String>,
    pub values: Vec<f64>,
    /// Weights applied on each rebalance (one entry per block).
    pub weights: Vec<Vec<f64>>,
    /// Transaction costs paid at each rebalance (currency).
    pub costs: Vec<f64>,
    /// Blocks where the solver failed and weights were carried over.
    pub skipped: Vec<bool>,
}

/// Footnote-convention performance metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    /// Cumulative return (V_N - V_0) / V_0.
    pub cr: f64,
    /// V_N / V_0 (the convention behind tables of values near 1).
    pub wealth_ratio: f64,
    /// sqrt(N) times the sample standard deviation of per-period returns.
    pub std: f64,
    /// sqrt(N) (mean - r_f) / std; undefined when std is zero.
    pub sr: Option<f64>,
    /// Maximum percentage drawdown in [0, 1].
    pub mdd: f64,
}

/// One radius of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRun {
    pub epsilon: f64,
    pub path: AccountPath,
    pub report: PerformanceReport,
}

/// One account step `V · (c(w) + wᵀx)` with the cost fraction evaluated on
/// the current account value. A non-positive result is a hard error; it is
/// unreachable for survivable weights and in-box realizations.
pub fn step_account(v: f64, w: &[f64], realized: &[f64], cost: &CostModel) -> Result<f64> {
    let c = cost.cost_fraction(w, v)?;
    let growth: f64 = c + w.iter().zip(realized).map(|(&a, &b)| a * b).sum::<f64>();
    let next = v * growth;
    if next <= 0.0 {
        return Err(Error::Infeasible(format!(
            "account value became non-positive: {next}"
        )));
    }
    Ok(next)
}

/// Footnote metrics over an account value sequence. `r_f` is the per-period
/// risk-free return matching the path's period length.
pub fn metrics(values: &[f64], r_f: f64) -> Result<PerformanceReport> {
    if values.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() - 1;
    let returns: Vec<f64> = values
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .collect();
    let mean = returns.iter().sum::<f64>() / n as f64;
    let std_period = if n >= 2 {
        (returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let sqrt_n = (n as f64).sqrt();
    let std = sqrt_n * std_period;
    let sr = if std > 0.0 {
        Some(sqrt_n * (mean - r_f) / std)
    } else {
        None
    };

    let mut peak = values[0];
    let mut mdd = 0.0f64;
    for &v in values {
        if v > peak {
            peak = v;
        }
        mdd = mdd.max((peak - v) / peak);
    }

    Ok(PerformanceReport {
        cr: (values[n] - values[0]) / values[0],
        wealth_ratio: values[n] / values[0],
        std,
        sr,
        mdd,
    })
}

/// Rebalance boundary day indices: the first window is observation only,
/// trading starts at its last day and repeats every `horizon` days while a
/// full holding block of price data remains.
pub fn rebalance_boundaries(total_days: usize, window: usize, horizon: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if total_days < window {
        return out;
    }
    let mut t = window - 1;
    while t + horizon <= total_days - 1 {
        out.push(t);
        t += horizon;
    }
    out
}

/// Normalized buy-and-hold path of one ticker sampled at the boundary days
/// (plus the terminal day of the last block).
pub fn benchmark_path(
    prices: &PriceSeries,
    ticker: &str,
    boundaries: &[usize],
    horizon: usize,
    v0: f64,
) -> Option<Vec<f64>> {
    let col = prices.ticker_index(ticker)?;
    let first = *boundaries.first()?;
    let base = prices.prices[first][col];
    let mut days: Vec<usize> = boundaries.to_vec();
    days.push(boundaries.last()? + horizon);
    Some(
        days.iter()
            .map(|&d| v0 * prices.prices[d][col] / base)
            .collect(),
    )
}

struct WindowData {
    boundary: usize,
    samples: SampleSet,
    support: SupportBox,
    realized: Vec<f64>,
    rf_block: f64,
}

fn prepare_windows(prices: &PriceSeries, cfg: &BacktestConfig) -> Result<Vec<WindowData>> {
    let m_risky = prices.asset_count();
    if cfg.step_lower.len() != m_risky || cfg.step_upper.len() != m_risky {
        return Err(Error::DimensionMismatch {
            expected: m_risky,
            got: cfg.step_lower.len(),
        });
    }
    let boundaries = rebalance_boundaries(prices.len(), cfg.window, cfg.horizon);
    if boundaries.is_empty() {
        return Err(Error::TooFewRows {
            needed: cfg.window + cfg.horizon,
            got: prices.len(),
        });
    }

    let mut out = Vec::with_capacity(boundaries.len());
    for (k, &t) in boundaries.iter().enumerate() {
        let slice = prices.slice(t + 1 - cfg.window, t + 1);
        let params_risky = estimate_gbm(&slice)?;

        // the risk-free leg compounds the rate quoted at decision time
        let rf_daily = prices.daily_risk_free(t);
        let rf_n = (1.0 + rf_daily).powi(cfg.horizon as i32) - 1.0;

        let (params, support, options) = if cfg.include_risk_free {
            let m = m_risky + 1;
            let mut drift = vec![0.0; m];
            let mut cov = vec![vec![0.0; m]; m];
            for i in 0..m_risky {
                drift[i + 1] = params_risky.drift[i];
                for j in 0..m_risky {
                    cov[i + 1][j + 1] = params_risky.covariance[i][j];
                }
            }
            let params = GbmParams {
                drift,
                covariance: cov,
                window: params_risky.window,
                jittered: params_risky.jittered,
            };
            let mut step_lo = vec![0.0; m];
            let mut step_hi = vec![0.0; m];
            step_lo[0] = rf_daily;
            step_hi[0] = rf_daily;
            step_lo[1..].copy_from_slice(&cfg.step_lower);
            step_hi[1..].copy_from_slice(&cfg.step_upper);
            let support = SupportBox::compound_from_steps(&step_lo, &step_hi, cfg.horizon)?;
            let options = SimulationOptions {
                correlated: cfg.correlated,
                deterministic_coord: Some((0, rf_n)),
            };
            (params, support, options)
        } else {
            let support =
                SupportBox::compound_from_steps(&cfg.step_lower, &cfg.step_upper, cfg.horizon)?;
            let options = SimulationOptions {
                correlated: cfg.correlated,
                deterministic_coord: None,
            };
            (params_risky, support, options)
        };

        let (samples, _clip) = simulate_samples(
            &params,
            cfg.horizon,
            cfg.samples,
            cfg.seed.wrapping_add(k as u64),
            &support,
            &options,
        )?;

        // realized block returns from actual prices (out-of-sample)
        let mut realized = Vec::with_capacity(support.dimension());
        if cfg.include_risk_free {
            realized.push(prices.compound_risk_free(t, cfg.horizon));
        }
        for i in 0..m_risky {
            realized.push(prices.prices[t + cfg.horizon][i] / prices.prices[t][i] - 1.0);
        }

        out.push(WindowData {
            boundary: t,
            samples,
            support,
            realized,
            rf_block: prices.compound_risk_free(t, cfg.horizon),
        });
    }
    Ok(out)
}

fn run_epsilon(
    prices: &PriceSeries,
    cfg: &BacktestConfig,
    windows: &[WindowData],
    epsilon: f64,
) -> Result<EpsilonRun> {
    let m = windows[0].support.dimension();
    let mut v = cfg.v0;
    let mut timestamps = vec![prices.calendar[windows[0].boundary].clone()];
    let mut values = vec![v];
    let mut weights_log = Vec::with_capacity(windows.len());
    let mut costs_log = Vec::with_capacity(windows.len());
    let mut skipped_log = Vec::with_capacity(windows.len());
    let mut rf_mean = 0.0;
    let mut prev_weights: Option<Vec<f64>> = None;

    for win in windows {
        let solved: Result<DroSolution> = crate::dro::DroProblem::new(
            win.samples.clone(),
            win.support.clone(),
            epsilon,
            cfg.cost.clone(),
            cfg.horizon,
            cfg.norm_kind,
            v,
        )
        .and_then(|p| solve(&p, &cfg.solver));

        let (weights, skipped) = match solved {
            Ok(sol) => (sol.weights, false),
            Err(_) => {
                // carry the previous weights; before the first successful
                // solve fall back to the most survivable vertex
                let fallback = prev_weights.clone().unwrap_or_else(|| {
                    let feasible = crate::dro::FeasibleSet::new(
                        &win.support,
                        &cfg.cost,
                        v,
                        cfg.solver.survivability_margin,
                    );
                    let (idx, _) = feasible.best_vertex();
                    let mut e = vec![0.0; m];
                    e[idx] = 1.0;
                    e
                });
                (fallback, true)
            }
        };

        let cost_paid = v * (1.0 - cfg.cost.cost_fraction_raw(&weights, v));
        v = step_account(v, &weights, &win.realized, &cfg.cost)?;
        timestamps.push(prices.calendar[win.boundary + cfg.horizon].clone());
        values.push(v);
        weights_log.push(weights.clone());
        costs_log.push(cost_paid);
        skipped_log.push(skipped);
        rf_mean += win.rf_block;
        prev_weights = Some(weights);
    }
    rf_mean /= windows.len() as f64;

    let report = metrics(&values, rf_mean)?;
    Ok(EpsilonRun {
        epsilon,
        path: AccountPath {
            timestamps,
            values,
            weights: weights_log,
            costs: costs_log,
            skipped: skipped_log,
        },
        report,
    })
}

/// Run the sliding-window backtest for every configured radius. Radii run
/// concurrently; within one radius the account loop is sequential.
pub fn run(prices: &PriceSeries, cfg: &BacktestConfig) -> Result<Vec<EpsilonRun>> {
    if cfg.window < 3 {
        return Err(Error::InvalidConfig {
            field: "window".into(),
            message: format!("window must be >= 3, got {}", cfg.window),
        });
    }
    if cfg.horizon == 0 {
        return Err(Error::InvalidConfig {
            field: "horizon".into(),
            message: "horizon must be >= 1".into(),
        });
    }
    for &e in &cfg.epsilons {
        if !(e >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "epsilon".into(),
                message: format!("radii must be >= 0, got {e}"),
            });
        }
    }
    let m_total = prices.asset_count() + usize::from(cfg.include_risk_free);
    if cfg.cost.dimension() != m_total {
        return Err(Error::DimensionMismatch {
            expected: m_total,
            got: cfg.cost.dimension(),
        });
    }

    let windows = prepare_windows(prices, cfg)?;
    cfg.epsilons
        .par_iter()
        .map(|&eps| run_epsilon(prices, cfg, &windows, eps))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_examples() {
        let zero = CostModel::zero(2);
        let v = step_account(1.0, &[0.5, 0.5], &[0.2, 0.0], &zero).unwrap();
        assert!((v - 1.1).abs() < 1e-12);

        // all weight on a zero-return leg leaves the account unchanged
        let v = step_account(2.5, &[1.0, 0.0], &[0.0, 0.3], &zero).unwrap();
        assert!((v - 2.5).abs() < 1e-12);

        let costly = CostModel::proportional(0.01, 1).unwrap();
        let v = step_account(1.0, &[1.0], &[-0.1], &costly).unwrap();
        assert!((v - 0.89).abs() < 1e-12);
    }

    #[test]
    fn metric_examples() {
        let r = metrics(&[1.0, 1.2, 0.9, 1.0], 0.0).unwrap();
        assert!((r.mdd - 0.25).abs() < 1e-15);

        let r = metrics(&[1.0, 1.16], 0.0).unwrap();
        assert!((r.cr - 0.16).abs() < 1e-12);
        assert!((r.wealth_ratio - 1.16).abs() < 1e-12);
        assert!(r.sr.is_none(), "single return has no dispersion");

        // returns 0.01, -0.005: mean 0.0025, std sqrt(2)*0.0075*sqrt(2)=0.015
        let r = metrics(&[1.0, 1.01, 1.01 * 0.995], 0.0).unwrap();
        assert!((r.std - 0.015).abs() < 1e-12);
        let sr = r.sr.unwrap();
        assert!((sr - 2f64.sqrt() * 0.0025 / 0.015).abs() < 1e-12);
    }

    #[test]
    fn mdd_of_monotone_path_is_zero() {
        let r = metrics(&[1.0, 1.1, 1.1, 1.25], 0.0).unwrap();
        assert_eq!(r.mdd, 0.0);
    }

    #[test]
    fn boundaries_leave_full_blocks() {
        let b = rebalance_boundaries(10, 4, 3);
        assert_eq!(b, vec![3, 6]);
        assert!(rebalance_boundaries(5, 4, 3).is_empty());
    }
}
