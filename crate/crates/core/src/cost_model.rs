//! Convex transaction cost models and the deterministic cost fraction.
//!
//! Costs are charged on the full allocation `u_i = w_i * V0` at each
//! rebalance. The cost fraction `c(w) = 1 - TC(w V0) / V0` is concave in the
//! weights whenever every per-asset cost is convex, which the constructors
//! enforce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-asset transaction cost curve over the traded amount (currency).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    /// No cost.
    Zero,
    /// `TC(u) = rate * u` with `rate` in `[0, 1)`.
    Proportional { rate: f64 },
    /// Convex piecewise-linear curve: `slopes[k]` applies between
    /// `breakpoints[k-1]` and `breakpoints[k]` (the last slope extends to
    /// infinity). Slopes must be nonnegative and nondecreasing.
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
    },
}

impl CostSpec {
    fn validate(&self) -> Result<()> {
        match self {
            CostSpec::Zero => Ok(()),
            CostSpec::Proportional { rate } => {
                if !(*rate >= 0.0 && *rate < 1.0) {
                    return Err(Error::NonConvexCost(format!(
                        "proportional rate must be in [0, 1), got {rate}"
                    )));
                }
                Ok(())
            }
            CostSpec::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                if slopes.is_empty() || slopes.len() != breakpoints.len() + 1 {
                    return Err(Error::NonConvexCost(format!(
                        "need breakpoints.len() + 1 slopes, got {} breakpoints and {} slopes",
                        breakpoints.len(),
                        slopes.len()
                    )));
                }
                if breakpoints.iter().any(|b| !(*b > 0.0)) {
                    return Err(Error::NonConvexCost(
                        "breakpoints must be strictly positive".into(),
                    ));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::NonConvexCost(
                        "breakpoints must be strictly increasing".into(),
                    ));
                }
                if slopes[0] < 0.0 {
                    return Err(Error::NonConvexCost("slopes must be nonnegative".into()));
                }
                if slopes.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::NonConvexCost(
                        "slopes must be nondecreasing for a convex cost".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Cost of trading amount `u >= 0`.
    fn eval(&self, u: f64) -> f64 {
        match self {
            CostSpec::Zero => 0.0,
            CostSpec::Proportional { rate } => rate * u,
            CostSpec::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                let mut total = 0.0;
                let mut prev = 0.0;
                for (k, &b) in breakpoints.iter().enumerate() {
                    if u <= b {
                        return total + slopes[k] * (u - prev);
                    }
                    total += slopes[k] * (b - prev);
                    prev = b;
                }
                total + slopes[breakpoints.len()] * (u - prev)
            }
        }
    }

    /// Right derivative at `u` (a valid subgradient at kinks).
    fn slope_at(&self, u: f64) -> f64 {
        match self {
            CostSpec::Zero => 0.0,
            CostSpec::Proportional { rate } => *rate,
            CostSpec::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                for (k, &b) in breakpoints.iter().enumerate() {
                    if u < b {
                        return slopes[k];
                    }
                }
                slopes[breakpoints.len()]
            }
        }
    }
}

/// Portfolio-wide cost model: one spec per asset plus an exemption mask for
/// cost-free assets such as the risk-free leg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    specs: Vec<CostSpec>,
    exempt: Vec<bool>,
}

impl CostModel {
    pub fn new(specs: Vec<CostSpec>, exempt: Vec<bool>) -> Result<Self> {
        if specs.len() != exempt.len() {
            return Err(Error::DimensionMismatch {
                expected: specs.len(),
                got: exempt.len(),
            });
        }
        for s in &specs {
            s.validate()?;
        }
        Ok(Self { specs, exempt })
    }

    /// Zero costs on `m` assets.
    pub fn zero(m: usize) -> Self {
        Self {
            specs: vec![CostSpec::Zero; m],
            exempt: vec![false; m],
        }
    }

    /// Uniform proportional cost on `m` assets.
    pub fn proportional(rate: f64, m: usize) -> Result<Self> {
        Self::new(
            vec![CostSpec::Proportional { rate }; m],
            vec![false; m],
        )
    }

    /// Mark assets as cost-exempt.
    pub fn with_exempt(mut self, indices: &[usize]) -> Self {
        for &i in indices {
            if i < self.exempt.len() {
                self.exempt[i] = true;
            }
        }
        self
    }

    pub fn dimension(&self) -> usize {
        self.specs.len()
    }

    pub fn is_exempt(&self, i: usize) -> bool {
        self.exempt[i]
    }

    pub fn is_zero(&self) -> bool {
        (0..self.specs.len()).all(|i| self.exempt[i] || self.specs[i] == CostSpec::Zero)
    }

    /// Total cost of the allocation vector `u` (currency amounts, `u_i >= 0`).
    /// Exempt assets contribute nothing.
    pub fn transaction_cost(&self, u: &[f64]) -> f64 {
        u.iter()
            .enumerate()
            .map(|(i, &ui)| {
                if self.exempt[i] {
                    0.0
                } else {
                    self.specs[i].eval(ui.max(0.0))
                }
            })
            .sum()
    }

    /// Cost fraction `c(w) = 1 - TC(w V0) / V0`, a concave function of the
    /// weights with values in (0, 1].
    pub fn cost_fraction(&self, w: &[f64], v0: f64) -> Result<f64> {
        let u: Vec<f64> = w.iter().map(|&wi| wi * v0).collect();
        let tc = self.transaction_cost(&u);
        if tc >= v0 {
            return Err(Error::CostsConsumeAccount { tc, v0 });
        }
        Ok(1.0 - tc / v0)
    }

    /// Cost fraction without the positivity gate; values at or below zero
    /// simply mean costs consume the account at those weights.
    pub fn cost_fraction_raw(&self, w: &[f64], v0: f64) -> f64 {
        let u: Vec<f64> = w.iter().map(|&wi| wi * v0).collect();
        1.0 - self.transaction_cost(&u) / v0
    }

    /// Effective proportional rate per asset (exempt assets rate 0), or
    /// `None` when any asset carries a nonlinear cost curve.
    pub fn proportional_rates(&self) -> Option<Vec<f64>> {
        let mut rates = Vec::with_capacity(self.specs.len());
        for (i, spec) in self.specs.iter().enumerate() {
            if self.exempt[i] {
                rates.push(0.0);
                continue;
            }
            match spec {
                CostSpec::Zero => rates.push(0.0),
                CostSpec::Proportional { rate } => rates.push(*rate),
                CostSpec::PiecewiseLinear { .. } => return None,
            }
        }
        Some(rates)
    }

    /// Subgradient of the cost fraction with respect to the weights:
    /// `∂c/∂w_i = -TC_i'(w_i V0)`.
    pub fn cost_fraction_gradient(&self, w: &[f64], v0: f64) -> Vec<f64> {
        w.iter()
            .enumerate()
            .map(|(i, &wi)| {
                if self.exempt[i] {
                    0.0
                } else {
                    -self.specs[i].slope_at((wi * v0).max(0.0))
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn proportional_with_exempt_asset() {
        let m = CostModel::proportional(0.01, 2).unwrap().with_exempt(&[1]);
        let tc = m.transaction_cost(&[50.0, 50.0]);
        assert!((tc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_model_costs_nothing() {
        let m = CostModel::zero(3);
        assert_eq!(m.transaction_cost(&[10.0, 20.0, 30.0]), 0.0);
        assert_eq!(m.cost_fraction(&[0.2, 0.3, 0.5], 100.0).unwrap(), 1.0);
    }

    #[test]
    fn piecewise_two_segments() {
        // 1% up to 100, 2% beyond; u = 150 -> 1.0 + 1.0 = 2.0
        let spec = CostSpec::PiecewiseLinear {
            breakpoints: vec![100.0],
            slopes: vec![0.01, 0.02],
        };
        let m = CostModel::new(vec![spec], vec![false]).unwrap();
        assert!((m.transaction_cost(&[150.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_convex_piecewise_rejected() {
        let spec = CostSpec::PiecewiseLinear {
            breakpoints: vec![100.0],
            slopes: vec![0.02, 0.01],
        };
        assert!(matches!(
            CostModel::new(vec![spec], vec![false]),
            Err(Error::NonConvexCost(_))
        ));
    }

    #[test]
    fn cost_fraction_matches_proportional_formula() {
        // c = 0.005, risky weight sum 0.6 -> 0.997
        let m = CostModel::proportional(0.005, 3).unwrap().with_exempt(&[0]);
        let c = m.cost_fraction(&[0.4, 0.25, 0.35], 1.0).unwrap();
        assert!((c - 0.997).abs() < 1e-12);
    }

    #[test]
    fn all_risk_free_pays_nothing() {
        let m = CostModel::proportional(0.01, 2).unwrap().with_exempt(&[0]);
        let c = m.cost_fraction(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn costs_consuming_account_error() {
        let spec = CostSpec::PiecewiseLinear {
            breakpoints: vec![0.5],
            slopes: vec![0.5, 0.999],
        };
        let m = CostModel::new(vec![spec], vec![false]).unwrap();
        // slope near 1 over the whole allocation pushes TC toward V0
        let res = m.cost_fraction(&[1.0], 1e6);
        assert!(res.is_ok());
        let c = res.unwrap();
        assert!(c > 0.0 && c < 0.01);
    }

    fn simplex_strategy(m: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, m).prop_map(|raw| {
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
    }

    proptest! {
        #[test]
        fn cost_fraction_is_concave(
            w1 in simplex_strategy(3),
            w2 in simplex_strategy(3),
            t in 0.0f64..1.0,
        ) {
            let spec = CostSpec::PiecewiseLinear {
                breakpoints: vec![0.2, 0.5],
                slopes: vec![0.001, 0.004, 0.01],
            };
            let m = CostModel::new(vec![spec; 3], vec![false; 3]).unwrap();
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(&a, &b)| t * a + (1.0 - t) * b).collect();
            let c_mix = m.cost_fraction(&mix, 1.0).unwrap();
            let c1 = m.cost_fraction(&w1, 1.0).unwrap();
            let c2 = m.cost_fraction(&w2, 1.0).unwrap();
            prop_assert!(c_mix >= t * c1 + (1.0 - t) * c2 - 1e-12);
        }

        #[test]
        fn proportional_cost_fraction_ignores_scale(
            w in simplex_strategy(4),
            v0 in 0.1f64..1e7,
        ) {
            let m = CostModel::proportional(0.004, 4).unwrap().with_exempt(&[0]);
            let a = m.cost_fraction(&w, v0).unwrap();
            let b = m.cost_fraction(&w, 1.0).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn transaction_cost_nondecreasing(u in prop::collection::vec(0.0f64..100.0, 2), bump in 0.0f64..50.0) {
            let spec = CostSpec::PiecewiseLinear {
                breakpoints: vec![30.0, 60.0],
                slopes: vec![0.01, 0.02, 0.05],
            };
            let m = CostModel::new(vec![spec; 2], vec![false; 2]).unwrap();
            let base = m.transaction_cost(&u);
            let mut more = u.clone();
            more[0] += bump;
            prop_assert!(m.transaction_cost(&more) >= base - 1e-12);
        }
    }
}
