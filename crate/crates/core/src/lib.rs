//! Cost-sensitive distributionally robust log-optimal portfolio toolkit.
//!
//! The crate builds Wasserstein ambiguity balls around empirical
//! compound-return samples, solves the finite concave reformulation of the
//! worst-case log-growth problem under convex transaction costs, and
//! backtests the resulting policies with a sliding-window protocol.
//!
//! Module map:
//! - [`market_data`]: CSV ingestion, calendar alignment, compound returns
//! - [`ambiguity`]: support box, samples, norms, the Wasserstein ball
//! - [`cost_model`]: convex transaction costs and the cost fraction c(w)
//! - [`sampling`]: GBM estimation and seeded Monte Carlo sample generation
//! - [`dro`]: the robust growth solver and its certification machinery
//! - [`backtest`]: sliding-window engine and performance metrics

pub mod ambiguity;
pub mod backtest;
pub mod cost_model;
pub mod dro;
pub mod error;
pub mod market_data;
pub mod sampling;

pub use ambiguity::{dual_norm, norm, NormKind, SampleSet, SupportBox, WassersteinBall};
pub use backtest::{metrics, step_account, AccountPath, BacktestConfig, EpsilonRun, PerformanceReport};
pub use cost_model::{CostModel, CostSpec};
pub use dro::{
    elg_classical, inner_constraint_min, phi, reduced_objective, solve, survivability_margin,
    DroProblem, DroSolution, FeasibleSet, SolverConfig,
};
pub use error::{Error, Result};
pub use market_data::{load_csv, per_period_returns, compound_returns, IngestConfig, PriceSeries};
pub use sampling::{estimate_gbm, simulate_samples, GbmParams, SimulationOptions};
