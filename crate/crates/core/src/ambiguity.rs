//! Support set, empirical samples, and the Wasserstein ambiguity ball.
//!
//! The support set is a coordinate box of n-period compound returns with
//! bounds compounded from per-step bounds. Its extreme points (corners) are
//! what the worst-case constraints of the robust program range over. The
//! ambiguity ball collects every distribution within type-1 transport cost
//! `radius` of the empirical distribution of the samples.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Norm placed on return vectors. The transport cost and the dual-variable
/// caps of the robust program are measured in this norm and its dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NormKind {
    /// l1 norm; its dual is l-infinity.
    #[serde(rename = "1", alias = "l1")]
    One,
    /// Euclidean norm; self-dual.
    #[default]
    #[serde(rename = "2", alias = "l2")]
    Two,
    /// l-infinity norm; its dual is l1.
    #[serde(rename = "inf", alias = "linf")]
    Inf,
}

/// `‖z‖` in the configured norm.
pub fn norm(z: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::One => z.iter().map(|v| v.abs()).sum(),
        NormKind::Two => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormKind::Inf => z.iter().fold(0.0f64, |m, v| m.max(v.abs())),
    }
}

/// Dual norm `‖z‖_* = max { zᵀx : ‖x‖ ≤ 1 }` of the configured norm.
///
/// The dual of l1 is l-infinity, the Euclidean norm is self-dual, and the
/// dual of l-infinity is l1.
pub fn dual_norm(z: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::One => norm(z, NormKind::Inf),
        NormKind::Two => norm(z, NormKind::Two),
        NormKind::Inf => norm(z, NormKind::One),
    }
}

/// Coordinate box of n-period compound returns, one `[lower_i, upper_i]`
/// interval per asset. A degenerate coordinate (`lower == upper`) models a
/// deterministic asset such as the risk-free leg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SupportBox {
    /// Build a box from explicit per-asset bounds. Every lower bound must
    /// exceed -1 (total loss is excluded) and not exceed its upper bound.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidBounds("empty bounds".into()));
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l > -1.0) || !l.is_finite() {
                return Err(Error::InvalidBounds(format!(
                    "support bound must exceed -1: lower[{i}] = {l}"
                )));
            }
            if !(l <= u) || !u.is_finite() {
                return Err(Error::InvalidBounds(format!(
                    "lower[{i}] = {l} exceeds upper[{i}] = {u} or is not finite"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Compound per-step bounds over an `n`-step horizon:
    /// `lower_i = (1 + step_lower_i)^n - 1`, likewise for the upper bound.
    /// `n = 1` is the exact identity.
    pub fn compound_from_steps(step_lower: &[f64], step_upper: &[f64], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidBounds("horizon n must be >= 1".into()));
        }
        if n == 1 {
            return SupportBox::new(step_lower.to_vec(), step_upper.to_vec());
        }
        let pow = |r: f64| (1.0 + r).powi(n as i32) - 1.0;
        SupportBox::new(
            step_lower.iter().map(|&r| pow(r)).collect(),
            step_upper.iter().map(|&r| pow(r)).collect(),
        )
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Indices of coordinates with strictly positive width.
    pub fn non_degenerate(&self) -> Vec<usize> {
        (0..self.dimension())
            .filter(|&i| self.upper[i] > self.lower[i])
            .collect()
    }

    /// Number of corners, `2^d` with `d` the non-degenerate coordinate count.
    pub fn corner_count(&self) -> u64 {
        1u64 << self.non_degenerate().len().min(63)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dimension()
            && x.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((&v, &l), &u)| v >= l - tol && v <= u + tol)
    }

    /// Clip a point coordinate-wise into the box. Returns true if any
    /// coordinate moved.
    pub fn clip(&self, x: &mut [f64]) -> bool {
        let mut moved = false;
        for i in 0..x.len() {
            let c = x[i].clamp(self.lower[i], self.upper[i]);
            if c != x[i] {
                x[i] = c;
                moved = true;
            }
        }
        moved
    }

    /// Iterate the corners in lexicographic bit order (coordinate 0 is the
    /// most significant bit; bit 0 selects the lower bound, bit 1 the upper).
    /// Degenerate coordinates contribute a single value, so exactly `2^d`
    /// distinct corners are produced.
    pub fn extreme_points(&self, cap: usize) -> Result<CornerIter<'_>> {
        let free = self.non_degenerate();
        if free.len() > cap {
            return Err(Error::CornerCapExceeded {
                dims: free.len(),
                cap,
            });
        }
        Ok(CornerIter {
            box_: self,
            free,
            next: 0,
        })
    }

    /// Largest distance between two points of the box in the given norm.
    pub fn diameter(&self, kind: NormKind) -> f64 {
        let widths: Vec<f64> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| u - l)
            .collect();
        norm(&widths, kind)
    }
}

/// Restartable corner iterator; see [`SupportBox::extreme_points`].
#[derive(Debug, Clone)]
pub struct CornerIter<'a> {
    box_: &'a SupportBox,
    free: Vec<usize>,
    next: u64,
}

impl<'a> CornerIter<'a> {
    pub fn count_hint(&self) -> u64 {
        1u64 << self.free.len()
    }
}

impl<'a> Iterator for CornerIter<'a> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let total = 1u64 << self.free.len();
        if self.next >= total {
            return None;
        }
        let k = self.next;
        self.next += 1;
        let d = self.free.len();
        let mut corner = self.box_.lower.to_vec();
        for (rank, &coord) in self.free.iter().enumerate() {
            // coordinate order = lexicographic significance
            if d >= 1 && (k >> (d - 1 - rank)) & 1 == 1 {
                corner[coord] = self.box_.upper[coord];
            }
        }
        Some(corner)
    }
}

/// Outcome of clipping a sample set into a support box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipReport {
    pub clipped: usize,
    pub total: usize,
}

impl ClipReport {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.clipped as f64 / self.total as f64
        }
    }

    /// True when more than 5% of the samples had to be clipped, which
    /// usually means the configured step bounds are too tight for the data.
    pub fn warning(&self) -> bool {
        self.fraction() > 0.05
    }
}

/// `N` draws of the m-dimensional compound return vector, each weighted
/// 1/N. This is the center of the ambiguity ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    samples: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooFewRows { needed: 1, got: 0 });
        }
        let dim = samples[0].len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        for s in &samples {
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.len(),
                });
            }
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.samples[0].len()
    }

    /// Uniform empirical weight of each sample.
    pub fn weight(&self) -> f64 {
        1.0 / self.samples.len() as f64
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Clip every sample into the box, returning how many points moved.
    pub fn clip_to_box(&mut self, support: &SupportBox) -> Result<ClipReport> {
        if support.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: support.dimension(),
            });
        }
        let mut clipped = 0;
        for s in &mut self.samples {
            if support.clip(s) {
                clipped += 1;
            }
        }
        Ok(ClipReport {
            clipped,
            total: self.samples.len(),
        })
    }

    /// Write one sample per row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let header: Vec<String> = (0..self.dimension()).map(|i| format!("x{i}")).collect();
        w.write_record(&header)?;
        for s in &self.samples {
            w.write_record(s.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a sample set written by [`SampleSet::write_csv`] (or any CSV with
    /// one numeric sample per row and a header).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut samples = Vec::new();
        for (idx, record) in r.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(record.len());
            for field in record.iter() {
                let v: f64 = field.trim().parse().map_err(|_| Error::MalformedCsv {
                    line: idx + 2,
                    message: format!("not a number: {field:?}"),
                })?;
                row.push(v);
            }
            samples.push(row);
        }
        SampleSet::new(samples)
    }
}

/// All distributions within type-1 transport cost `radius` of the empirical
/// distribution of `center`, measured in `norm_kind`.
#[derive(Debug, Clone)]
pub struct WassersteinBall {
    pub center: SampleSet,
    pub radius: f64,
    pub norm_kind: NormKind,
}

impl WassersteinBall {
    pub fn new(center: SampleSet, radius: f64, norm_kind: NormKind) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "epsilon".into(),
                message: format!("radius must be >= 0, got {radius}"),
            });
        }
        Ok(Self {
            center,
            radius,
            norm_kind,
        })
    }

    /// Construct a member of the ball by moving every sample and clipping to
    /// the support. The average displacement norm is kept at or below the
    /// radius, so the returned set's empirical distribution lies in the ball
    /// by the explicit transport plan that pairs old and new points.
    pub fn perturb_within(&self, support: &SupportBox, seed: u64) -> SampleSet {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = self.center.len();
        let m = self.center.dimension();

        // Raw radii in [0, radius], rescaled so the sample mean uses most of
        // the budget but stays strictly below it.
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rand::Rng::gen(&mut rng);
                u * self.radius
            })
            .collect();
        let mean_raw: f64 = raw.iter().sum::<f64>() / n as f64;
        let scale = if mean_raw > 0.0 {
            (self.radius / mean_raw) * (1.0 - 1e-9)
        } else {
            0.0
        };

        let mut out = Vec::with_capacity(n);
        for (j, base) in self.center.samples().iter().enumerate() {
            let mut dir: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            let len = norm(&dir, self.norm_kind);
            if len > 0.0 {
                for v in &mut dir {
                    *v /= len;
                }
            }
            let rho = raw[j] * scale;
            let mut point: Vec<f64> = base.iter().zip(&dir).map(|(&b, &d)| b + rho * d).collect();
            support.clip(&mut point);
            out.push(point);
        }
        SampleSet::new(out).expect("perturbed set preserves shape")
    }

    /// Average transport cost of moving each center sample to the matching
    /// sample of `other`: an upper bound on the Wasserstein distance between
    /// the two empirical distributions.
    pub fn paired_transport_cost(&self, other: &SampleSet) -> f64 {
        let n = self.center.len().min(other.len());
        let mut total = 0.0;
        for j in 0..n {
            let delta: Vec<f64> = self.center.samples()[j]
                .iter()
                .zip(&other.samples()[j])
                .map(|(&a, &b)| b - a)
                .collect();
            total += norm(&delta, self.norm_kind);
        }
        total / n as f64
    }

    /// True when `other` is certified inside the ball by the pairing plan.
    pub fn contains_paired(&self, other: &SampleSet, tol: f64) -> bool {
        self.paired_transport_cost(other) <= self.radius + tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn compound_bounds_square() {
        let b = SupportBox::compound_from_steps(&[-0.1], &[0.2], 2).unwrap();
        assert!((b.lower()[0] - (-0.19)).abs() < 1e-15);
        assert!((b.upper()[0] - 0.44).abs() < 1e-15);
    }

    #[test]
    fn compound_bounds_identity_at_n1() {
        let b = SupportBox::compound_from_steps(&[-0.3, 0.0], &[0.5, 0.0], 1).unwrap();
        assert_eq!(b.lower(), &[-0.3, 0.0]);
        assert_eq!(b.upper(), &[0.5, 0.0]);
    }

    #[test]
    fn compound_bounds_degenerate_riskfree() {
        let r = 0.01;
        let b = SupportBox::compound_from_steps(&[r], &[r], 3).unwrap();
        let expect = 1.01f64.powi(3) - 1.0;
        assert!((b.lower()[0] - expect).abs() < 1e-15);
        assert_eq!(b.lower()[0], b.upper()[0]);
    }

    #[test]
    fn bounds_must_exceed_minus_one() {
        assert!(SupportBox::new(vec![-1.0], vec![0.5]).is_err());
    }

    #[test]
    fn corner_count_full() {
        let b = SupportBox::new(vec![-0.1; 3], vec![0.1; 3]).unwrap();
        let corners: Vec<_> = b.extreme_points(20).unwrap().collect();
        assert_eq!(corners.len(), 8);
        // lexicographic order: first all-lower, last all-upper
        assert_eq!(corners[0], vec![-0.1, -0.1, -0.1]);
        assert_eq!(corners[7], vec![0.1, 0.1, 0.1]);
        assert_eq!(corners[1], vec![-0.1, -0.1, 0.1]);
    }

    #[test]
    fn corner_count_one_dim() {
        let b = SupportBox::new(vec![-0.19], vec![0.44]).unwrap();
        let corners: Vec<_> = b.extreme_points(20).unwrap().collect();
        assert_eq!(corners, vec![vec![-0.19], vec![0.44]]);
    }

    #[test]
    fn corner_count_with_degenerate_axis() {
        let b = SupportBox::new(vec![0.01, -0.2], vec![0.01, 0.3]).unwrap();
        let corners: Vec<_> = b.extreme_points(20).unwrap().collect();
        assert_eq!(corners.len(), 2);
        assert_eq!(corners[0], vec![0.01, -0.2]);
        assert_eq!(corners[1], vec![0.01, 0.3]);
    }

    #[test]
    fn corner_cap_is_enforced() {
        let b = SupportBox::new(vec![-0.1; 25], vec![0.1; 25]).unwrap();
        match b.extreme_points(20) {
            Err(Error::CornerCapExceeded { dims, cap }) => {
                assert_eq!(dims, 25);
                assert_eq!(cap, 20);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn dual_norm_examples() {
        assert!((dual_norm(&[3.0, 4.0], NormKind::Two) - 5.0).abs() < 1e-15);
        assert!((dual_norm(&[3.0, -4.0], NormKind::One) - 4.0).abs() < 1e-15);
        assert_eq!(dual_norm(&[0.0, 0.0], NormKind::Inf), 0.0);
    }

    #[test]
    fn perturb_zero_budget_is_identity() {
        let s = SampleSet::new(vec![vec![0.1, -0.05], vec![0.0, 0.2]]).unwrap();
        let b = SupportBox::new(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap();
        let ball = WassersteinBall::new(s.clone(), 0.0, NormKind::Two).unwrap();
        let out = ball.perturb_within(&b, 7);
        assert_eq!(out, s);
    }

    #[test]
    fn perturb_respects_budget_over_seeds() {
        // 200 seeded draws all satisfy the mean-displacement budget; checked
        // by recomputing the transport sum directly.
        let s = SampleSet::new(vec![
            vec![0.10, -0.05],
            vec![0.00, 0.20],
            vec![-0.15, 0.02],
        ])
        .unwrap();
        let b = SupportBox::new(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap();
        for kind in [NormKind::One, NormKind::Two, NormKind::Inf] {
            let ball = WassersteinBall::new(s.clone(), 0.07, kind).unwrap();
            for seed in 0..200u64 {
                let out = ball.perturb_within(&b, seed);
                let cost: f64 = s
                    .samples()
                    .iter()
                    .zip(out.samples())
                    .map(|(a, c)| {
                        let d: Vec<f64> = a.iter().zip(c).map(|(&x, &y)| y - x).collect();
                        norm(&d, kind)
                    })
                    .sum::<f64>()
                    / s.len() as f64;
                assert!(cost <= 0.07 + 1e-12, "seed {seed}: cost {cost}");
                assert!(ball.contains_paired(&out, 1e-12));
                for p in out.samples() {
                    assert!(b.contains(p, 0.0));
                }
            }
        }
    }

    #[test]
    fn sampleset_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = SampleSet::new(vec![vec![0.125, -0.0625], vec![1e-9, 0.3]]).unwrap();
        s.write_csv(&path).unwrap();
        let back = SampleSet::read_csv(&path).unwrap();
        assert_eq!(s, back);
    }

    fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, len)
    }

    proptest! {
        #[test]
        fn holder_inequality(z in vec_strategy(4), x in vec_strategy(4)) {
            for kind in [NormKind::One, NormKind::Two, NormKind::Inf] {
                let dot: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
                prop_assert!(dot <= dual_norm(&z, kind) * norm(&x, kind) + 1e-12);
            }
        }

        #[test]
        fn double_dual_recovers_norm(z in vec_strategy(5)) {
            // dual of the dual norm is the original norm
            let pairs = [
                (NormKind::One, NormKind::Inf),
                (NormKind::Two, NormKind::Two),
                (NormKind::Inf, NormKind::One),
            ];
            for (kind, dual_kind) in pairs {
                prop_assert!((dual_norm(&z, dual_kind) - norm(&z, kind)).abs() < 1e-12);
                prop_assert!((norm(&z, dual_kind) - dual_norm(&z, kind)).abs() < 1e-12);
            }
        }

        #[test]
        fn corners_lie_in_box(lo in vec_strategy(3), width in prop::collection::vec(0.0f64..3.0, 3)) {
            let lower: Vec<f64> = lo.iter().map(|v| v.abs() * 0.05 - 0.5).collect();
            let upper: Vec<f64> = lower.iter().zip(&width).map(|(&l, &w)| l + w).collect();
            let b = SupportBox::new(lower.clone(), upper.clone()).unwrap();
            for corner in b.extreme_points(20).unwrap() {
                prop_assert!(b.contains(&corner, 0.0));
                for (i, &v) in corner.iter().enumerate() {
                    prop_assert!(v == lower[i] || v == upper[i]);
                }
            }
        }
    }
}
