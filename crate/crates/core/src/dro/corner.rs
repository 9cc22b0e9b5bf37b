//! Exact minimization of the corner constraint integrand
//! `φ(x) = log(c(w) + wᵀx) + zᵀ(x − x̂)` over the extreme points of the
//! support box.
//!
//! The integrand is concave in `x`, so its minimum over the box sits on a
//! corner, and the candidate corners can be narrowed down without
//! enumeration: projecting the box onto the plane spanned by
//! `(wᵀx, zᵀx)` yields a zonogon whose vertices are prefix/suffix sets of
//! the coordinates sorted by the slope `z_i / w_i` (width-scaled). Only
//! those `O(m)` corners can attain the minimum, which makes the oracle run
//! in `O(m log m)` instead of `O(2^m)`.
//!
//! A brute-force enumerating twin is kept for the public operation and for
//! the post-solve sweep, so the fast path is always cross-checkable.

use crate::ambiguity::SupportBox;

/// Corner ids are bit patterns over the non-degenerate coordinates, most
/// significant bit = first coordinate, bit set = upper bound. Ids therefore
/// order corners lexicographically and agree with
/// [`SupportBox::extreme_points`].
pub type CornerId = u64;

/// Evaluation context for a fixed weight vector.
#[derive(Debug, Clone)]
pub struct CornerContext<'a> {
    support: &'a SupportBox,
    w: &'a [f64],
    /// Cost fraction c(w).
    pub cost_fraction: f64,
    log_floor: f64,
    /// Non-degenerate coordinate indices in coordinate order.
    free: Vec<usize>,
    /// Box width per free rank.
    widths: Vec<f64>,
    /// Increment of wᵀx when the rank flips to its upper bound.
    t_incr: Vec<f64>,
    /// wᵀ lower corner.
    t0: f64,
}

/// Result of a corner minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerHit {
    pub value: f64,
    pub id: CornerId,
    /// wᵀx at the corner.
    pub t: f64,
}

impl<'a> CornerContext<'a> {
    pub fn new(support: &'a SupportBox, w: &'a [f64], cost_fraction: f64, log_floor: f64) -> Self {
        let free = support.non_degenerate();
        let widths: Vec<f64> = free
            .iter()
            .map(|&i| support.upper()[i] - support.lower()[i])
            .collect();
        let t_incr: Vec<f64> = free.iter().zip(&widths).map(|(&i, &g)| w[i] * g).collect();
        let t0 = w
            .iter()
            .zip(support.lower())
            .map(|(&wi, &l)| wi * l)
            .sum();
        Self {
            support,
            w,
            cost_fraction,
            log_floor,
            free,
            widths,
            t_incr,
            t0,
        }
    }

    pub fn dims(&self) -> usize {
        self.free.len()
    }

    /// Guarded log of the account growth factor at portfolio return `t`.
    pub fn log_at(&self, t: f64) -> f64 {
        let arg = self.cost_fraction + t;
        if arg < self.log_floor {
            f64::NEG_INFINITY
        } else {
            arg.ln()
        }
    }

    /// Materialize a corner vector from its id.
    pub fn corner_from_id(&self, id: CornerId) -> Vec<f64> {
        let d = self.free.len();
        let mut x = self.support.lower().to_vec();
        for (rank, &coord) in self.free.iter().enumerate() {
            if (id >> (d - 1 - rank)) & 1 == 1 {
                x[coord] = self.support.upper()[coord];
            }
        }
        x
    }

    /// wᵀx for the corner with the given id.
    pub fn t_of_id(&self, id: CornerId) -> f64 {
        let d = self.free.len();
        let mut t = self.t0;
        for rank in 0..d {
            if (id >> (d - 1 - rank)) & 1 == 1 {
                t += self.t_incr[rank];
            }
        }
        t
    }

    /// Exact minimum of `log(c + wᵀx) + zᵀ(x − x̂)` over all corners.
    ///
    /// Ties on the exact value are broken toward the smaller corner id.
    pub fn corner_min(&self, z: &[f64], xhat: &[f64]) -> CornerHit {
        let d = self.free.len();
        debug_assert_eq!(z.len(), self.w.len());

        // base linear part at the all-lower corner
        let mut base_lin = 0.0;
        for i in 0..z.len() {
            base_lin += z[i] * (self.support.lower()[i] - xhat[i]);
        }

        // split free ranks into zero-weight (separable) and active ones
        let mut base_bits: CornerId = 0;
        let mut active: Vec<usize> = Vec::with_capacity(d);
        for rank in 0..d {
            let coord = self.free[rank];
            let c_r = z[coord] * self.widths[rank];
            if self.t_incr[rank] > 0.0 {
                active.push(rank);
            } else if c_r < 0.0 {
                base_lin += c_r;
                base_bits |= 1 << (d - 1 - rank);
            }
        }

        // slope-sorted zonogon walk over the active ranks
        let mut order = active;
        order.sort_by(|&ra, &rb| {
            let sa = z[self.free[ra]] * self.widths[ra] / self.t_incr[ra];
            let sb = z[self.free[rb]] * self.widths[rb] / self.t_incr[rb];
            sa.partial_cmp(&sb).unwrap().then(ra.cmp(&rb))
        });

        let mut best = CornerHit {
            value: self.log_at(self.t0) + base_lin,
            id: base_bits,
            t: self.t0,
        };
        let mut consider = |value: f64, id: CornerId, t: f64| {
            if value < best.value || (value == best.value && id < best.id) {
                best = CornerHit { value, id, t };
            }
        };

        // lower chain: prefixes of the sorted order
        let mut t = self.t0;
        let mut lin = base_lin;
        let mut bits = base_bits;
        for &rank in &order {
            t += self.t_incr[rank];
            lin += z[self.free[rank]] * self.widths[rank];
            bits |= 1 << (d - 1 - rank);
            consider(self.log_at(t) + lin, bits, t);
        }
        // upper chain: suffixes of the sorted order
        t = self.t0;
        lin = base_lin;
        bits = base_bits;
        for &rank in order.iter().rev() {
            t += self.t_incr[rank];
            lin += z[self.free[rank]] * self.widths[rank];
            bits |= 1 << (d - 1 - rank);
            consider(self.log_at(t) + lin, bits, t);
        }
        best
    }

    /// φ evaluated at one corner (by id).
    pub fn corner_value(&self, id: CornerId, z: &[f64], xhat: &[f64]) -> f64 {
        let x = self.corner_from_id(id);
        let lin: f64 = z
            .iter()
            .zip(&x)
            .zip(xhat)
            .map(|((&zi, &xi), &hi)| zi * (xi - hi))
            .sum();
        self.log_at(self.t_of_id(id)) + lin
    }

    /// Brute-force minimum over every corner in lexicographic id order,
    /// keeping the first (lowest id) corner on exact ties. Used as the
    /// independent reference for [`CornerContext::corner_min`].
    pub fn brute_corner_min(&self, z: &[f64], xhat: &[f64]) -> CornerHit {
        let d = self.free.len();
        let total: u64 = 1 << d;
        let mut best = CornerHit {
            value: f64::INFINITY,
            id: 0,
            t: self.t0,
        };
        for id in 0..total {
            let t = self.t_of_id(id);
            let x = self.corner_from_id(id);
            let lin: f64 = z
                .iter()
                .zip(&x)
                .zip(xhat)
                .map(|((&zi, &xi), &hi)| zi * (xi - hi))
                .sum();
            let value = self.log_at(t) + lin;
            if value < best.value {
                best = CornerHit { value, id, t };
            }
        }
        best
    }

    /// Check every corner constraint `φ_j(corner) ≥ s_j - tol` for all
    /// samples by full Gray-code enumeration.
    pub fn sweep(
        &self,
        zs: &[Vec<f64>],
        xhats: &[Vec<f64>],
        s: &[f64],
        tol: f64,
    ) -> SweepReport {
        let d = self.free.len();
        let total: u64 = 1 << d;

        // portfolio return per corner in Gray order, shared across samples
        let mut t_by_step = vec![0.0f64; total as usize];
        let mut t = self.t0;
        t_by_step[0] = t;
        for k in 1..total {
            let bitpos = k.trailing_zeros() as usize; // flipped Gray bit
            let rank = d - 1 - bitpos;
            let gray = k ^ (k >> 1);
            if (gray >> bitpos) & 1 == 1 {
                t += self.t_incr[rank];
            } else {
                t -= self.t_incr[rank];
            }
            t_by_step[k as usize] = t;
        }

        let mut report = SweepReport {
            corners: total,
            max_violation: f64::NEG_INFINITY,
            worst_sample: 0,
            worst_corner: 0,
            violations: 0,
        };
        for (j, z) in zs.iter().enumerate() {
            let mut lin: f64 = z
                .iter()
                .zip(self.support.lower())
                .zip(&xhats[j])
                .map(|((&zi, &li), &hi)| zi * (li - hi))
                .sum();
            let mut check = |k: u64, lin: f64| {
                let phi = self.log_at(t_by_step[k as usize]) + lin;
                let violation = s[j] - phi;
                if violation > report.max_violation {
                    report.max_violation = violation;
                    report.worst_sample = j;
                    report.worst_corner = k ^ (k >> 1);
                }
                if violation > tol {
                    report.violations += 1;
                }
            };
            check(0, lin);
            for k in 1..total {
                let bitpos = k.trailing_zeros() as usize;
                let rank = d - 1 - bitpos;
                let coord = self.free[rank];
                let gray = k ^ (k >> 1);
                if (gray >> bitpos) & 1 == 1 {
                    lin += z[coord] * self.widths[rank];
                } else {
                    lin -= z[coord] * self.widths[rank];
                }
                check(k, lin);
            }
        }
        if !report.max_violation.is_finite() {
            report.max_violation = 0.0;
        }
        report
    }
}

/// Outcome of the post-solve full corner sweep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepReport {
    pub corners: u64,
    /// Largest `s_j - φ_j(corner)` observed (negative values mean slack).
    pub max_violation: f64,
    pub worst_sample: usize,
    pub worst_corner: CornerId,
    /// Corner constraints violated beyond the tolerance.
    pub violations: u64,
}
