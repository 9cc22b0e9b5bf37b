//! Multivariate geometric Brownian motion estimation and seeded Monte Carlo
//! generation of n-period compound return samples.
//!
//! Drift and covariance are estimated directly on daily log returns, so no
//! Ito correction is applied when simulating. Paths use one ChaCha12 stream
//! per path (stream id = path index), which makes the output independent of
//! any parallel scheduling.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ambiguity::{ClipReport, SampleSet, SupportBox};
use crate::error::{Error, Result};
use crate::market_data::PriceSeries;

/// Estimated GBM parameters on daily log returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    /// Per-asset mean daily log return.
    pub drift: Vec<f64>,
    /// Row-major sample covariance of daily log returns.
    pub covariance: Vec<Vec<f64>>,
    /// Days in the estimation window.
    pub window: usize,
    /// Whether diagonal jitter was added to restore positive
    /// semidefiniteness.
    pub jittered: bool,
}

const JITTER: f64 = 1e-10;

impl GbmParams {
    pub fn dimension(&self) -> usize {
        self.drift.len()
    }

    fn covariance_matrix(&self) -> DMatrix<f64> {
        let m = self.dimension();
        DMatrix::from_fn(m, m, |r, c| self.covariance[r][c])
    }

    /// Symmetric PSD square root `L` with `L Lᵀ = covariance` (eigenvalue
    /// factorization, negative eigenvalues clamped to zero).
    pub fn factor(&self) -> DMatrix<f64> {
        let eig = self.covariance_matrix().symmetric_eigen();
        let sqrt = DVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
        );
        &eig.eigenvectors * DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose()
    }
}

/// Estimate drift and covariance from a trailing price window.
pub fn estimate_gbm(window: &PriceSeries) -> Result<GbmParams> {
    let rows = window.len();
    if rows < 3 {
        return Err(Error::TooFewRows {
            needed: 3,
            got: rows,
        });
    }
    let m = window.asset_count();
    let n_obs = rows - 1;

    let mut logs = vec![vec![0.0; m]; n_obs];
    for k in 0..n_obs {
        for i in 0..m {
            logs[k][i] = (window.prices[k + 1][i] / window.prices[k][i]).ln();
        }
    }

    let drift: Vec<f64> = (0..m)
        .map(|i| logs.iter().map(|r| r[i]).sum::<f64>() / n_obs as f64)
        .collect();

    // unbiased sample covariance
    let denom = (n_obs - 1) as f64;
    let mut covariance = vec![vec![0.0; m]; m];
    for r in 0..m {
        for c in r..m {
            let mut acc = 0.0;
            for row in &logs {
                acc += (row[r] - drift[r]) * (row[c] - drift[c]);
            }
            let v = acc / denom;
            covariance[r][c] = v;
            covariance[c][r] = v;
        }
    }

    let mut params = GbmParams {
        drift,
        covariance,
        window: rows,
        jittered: false,
    };

    let min_eig = params
        .covariance_matrix()
        .symmetric_eigen()
        .eigenvalues
        .min();
    if min_eig < JITTER {
        for i in 0..m {
            params.covariance[i][i] += JITTER;
        }
        params.jittered = true;
    }
    Ok(params)
}

/// Options for [`simulate_samples`].
#[derive(Debug, Clone, Copy)]
pub struct SimulationOptions {
    /// Simulate with the estimated cross-asset covariance (default) or with
    /// the diagonal only.
    pub correlated: bool,
    /// Index of a deterministic coordinate (the risk-free leg); it is forced
    /// to `deterministic_return` on every sample instead of being simulated.
    pub deterministic_coord: Option<(usize, f64)>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            correlated: true,
            deterministic_coord: None,
        }
    }
}

/// Generate `count` samples of the n-period compound return vector
/// `exp(sum of daily log returns) - 1`, clipped into the support box.
pub fn simulate_samples(
    params: &GbmParams,
    horizon: usize,
    count: usize,
    seed: u64,
    support: &SupportBox,
    options: &SimulationOptions,
) -> Result<(SampleSet, ClipReport)> {
    if count == 0 {
        return Err(Error::InvalidConfig {
            field: "samples".into(),
            message: "need at least one sample".into(),
        });
    }
    let m = params.dimension();
    if support.dimension() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: support.dimension(),
        });
    }

    let factor = if options.correlated {
        params.factor()
    } else {
        let mut diag = DMatrix::zeros(m, m);
        for i in 0..m {
            diag[(i, i)] = params.covariance[i][i].max(0.0).sqrt();
        }
        diag
    };

    let mut samples = Vec::with_capacity(count);
    for path in 0..count {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(path as u64);
        let mut log_sum = vec![0.0; m];
        for _ in 0..horizon {
            let g = DVector::from_iterator(m, (0..m).map(|_| StandardNormal.sample(&mut rng)));
            let shock = &factor * g;
            for i in 0..m {
                log_sum[i] += params.drift[i] + shock[i];
            }
        }
        let mut sample: Vec<f64> = log_sum.iter().map(|&s| s.exp() - 1.0).collect();
        if let Some((idx, ret)) = options.deterministic_coord {
            sample[idx] = ret;
        }
        samples.push(sample);
    }

    let mut set = SampleSet::new(samples)?;
    let report = set.clip_to_box(support)?;
    Ok((set, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_from_rows(rows: Vec<Vec<f64>>) -> PriceSeries {
        PriceSeries {
            tickers: (0..rows[0].len()).map(|i| format!("A{i}")).collect(),
            prices: rows.clone(),
            risk_free: Vec::new(),
            calendar: (0..rows.len()).map(|i| format!("d{i}")).collect(),
            day_count: 252,
        }
    }

    fn wide_box(m: usize) -> SupportBox {
        SupportBox::new(vec![-0.999; m], vec![1e6; m]).unwrap()
    }

    #[test]
    fn constant_growth_estimates() {
        let s = series_from_rows(vec![vec![100.0], vec![110.0], vec![121.0]]);
        let p = estimate_gbm(&s).unwrap();
        assert!((p.drift[0] - 1.1f64.ln()).abs() < 1e-12);
        // zero variance before jitter
        assert!(p.covariance[0][0] <= JITTER * 1.001);
        assert!(p.jittered);
    }

    #[test]
    fn perfectly_correlated_assets_get_jitter() {
        // second asset is a scaled copy, so the covariance is rank 1
        let mut rows = Vec::new();
        let mut a = 100.0;
        for k in 0..40 {
            a *= if k % 2 == 0 { 1.01 } else { 0.995 };
            rows.push(vec![a, 2.0 * a]);
        }
        let p = estimate_gbm(&series_from_rows(rows)).unwrap();
        assert!(p.jittered);
        let f = p.factor();
        // factor reproduces covariance
        let cov = f.clone() * f.transpose();
        for r in 0..2 {
            for c in 0..2 {
                assert!((cov[(r, c)] - p.covariance[r][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn estimate_recovers_known_parameters() {
        // synthetic iid log returns with known drift and covariance; the
        // estimates must land within 3 standard errors
        let mu = [0.0004, -0.0002];
        let sd = [0.01, 0.02];
        let rho = 0.5f64;
        let n = 10_000usize;
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let mut rows = vec![vec![100.0, 100.0]];
        for _ in 0..n {
            let g1: f64 = StandardNormal.sample(&mut rng);
            let g2: f64 = StandardNormal.sample(&mut rng);
            let e1 = mu[0] + sd[0] * g1;
            let e2 = mu[1] + sd[1] * (rho * g1 + (1.0 - rho * rho).sqrt() * g2);
            let last = rows.last().unwrap().clone();
            rows.push(vec![last[0] * e1.exp(), last[1] * e2.exp()]);
        }
        let p = estimate_gbm(&series_from_rows(rows)).unwrap();
        for i in 0..2 {
            let se = sd[i] / (n as f64).sqrt();
            assert!(
                (p.drift[i] - mu[i]).abs() < 3.0 * se,
                "drift {i}: {} vs {}",
                p.drift[i],
                mu[i]
            );
        }
        let cov12 = rho * sd[0] * sd[1];
        // variance of sample covariance approx (sigma1^2 sigma2^2 (1+rho^2))/n
        let se12 = ((sd[0] * sd[1]).powi(2) * (1.0 + rho * rho) / n as f64).sqrt();
        assert!((p.covariance[0][1] - cov12).abs() < 3.0 * se12);
    }

    #[test]
    fn zero_covariance_is_deterministic() {
        let p = GbmParams {
            drift: vec![1.1f64.ln()],
            covariance: vec![vec![0.0]],
            window: 10,
            jittered: false,
        };
        let (set, report) = simulate_samples(
            &p,
            2,
            16,
            1,
            &wide_box(1),
            &SimulationOptions {
                correlated: false,
                deterministic_coord: None,
            },
        )
        .unwrap();
        assert_eq!(report.clipped, 0);
        for s in set.samples() {
            assert!((s[0] - 0.21).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let p = GbmParams {
            drift: vec![0.0002, 0.0001],
            covariance: vec![vec![1e-4, 2e-5], vec![2e-5, 4e-4]],
            window: 21,
            jittered: false,
        };
        let opts = SimulationOptions::default();
        let (a, _) = simulate_samples(&p, 21, 64, 42, &wide_box(2), &opts).unwrap();
        let (b, _) = simulate_samples(&p, 21, 64, 42, &wide_box(2), &opts).unwrap();
        assert_eq!(a, b);
        let (c, _) = simulate_samples(&p, 21, 64, 43, &wide_box(2), &opts).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_drift_monte_carlo_mean() {
        // drift 0, daily vol sigma: mean of log(1 + X_n) ~ N(0, n sigma^2 / N)
        let sigma = 0.01;
        let n = 4usize;
        let count = 100_000usize;
        let p = GbmParams {
            drift: vec![0.0],
            covariance: vec![vec![sigma * sigma]],
            window: 10,
            jittered: false,
        };
        let (set, _) = simulate_samples(&p, n, count, 7, &wide_box(1), &SimulationOptions::default())
            .unwrap();
        let mean_log: f64 = set
            .samples()
            .iter()
            .map(|s| (1.0 + s[0]).ln())
            .sum::<f64>()
            / count as f64;
        let bound = 3.0 * sigma * (n as f64).sqrt() / (count as f64).sqrt();
        assert!(mean_log.abs() < bound, "{mean_log} vs {bound}");
    }

    #[test]
    fn deterministic_coordinate_is_forced() {
        let p = GbmParams {
            drift: vec![0.0, 0.0003],
            covariance: vec![vec![0.0, 0.0], vec![0.0, 1e-4]],
            window: 10,
            jittered: false,
        };
        let opts = SimulationOptions {
            correlated: true,
            deterministic_coord: Some((0, 0.004)),
        };
        let (set, _) = simulate_samples(&p, 5, 32, 3, &wide_box(2), &opts).unwrap();
        for s in set.samples() {
            assert_eq!(s[0], 0.004);
        }
    }

    #[test]
    fn samples_clipped_into_box() {
        let p = GbmParams {
            drift: vec![0.0],
            covariance: vec![vec![0.04]],
            window: 10,
            jittered: false,
        };
        let tight = SupportBox::new(vec![-0.01], vec![0.01]).unwrap();
        let (set, report) =
            simulate_samples(&p, 5, 200, 11, &tight, &SimulationOptions::default()).unwrap();
        assert!(report.clipped > 0);
        assert!(report.warning());
        for s in set.samples() {
            assert!(tight.contains(s, 0.0));
        }
    }
}
