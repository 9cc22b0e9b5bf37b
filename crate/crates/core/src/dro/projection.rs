//! Euclidean projections onto the simplex and onto the simplex intersected
//! with the survivability half-space.

/// Project `v` onto the probability simplex `{w : 1ᵀw = 1, w ⪰ 0}`.
///
/// Sort-based threshold rule: the support size is the largest `k` with
/// `u_(k) > (sum of k largest - 1)/k`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        acc += s;
        let t = (acc - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    // renormalize away accumulated rounding
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        for x in &mut w {
            *x /= s;
        }
    } else {
        w = vec![1.0 / m as f64; m];
    }
    w
}

/// Project `v` onto `{w in simplex : aᵀw >= b}` by bisection on the dual
/// multiplier of the half-space constraint. Requires the intersection to be
/// nonempty (`max_i a_i >= b`).
pub fn project_simplex_halfspace(v: &[f64], a: &[f64], b: f64) -> Vec<f64> {
    let w0 = project_simplex(v);
    if dot(a, &w0) >= b {
        return w0;
    }
    // g(mu) = aᵀ proj_simplex(v + mu a) is nondecreasing in mu and tends to
    // max_i a_i, so a root of g(mu) = b exists whenever the set is nonempty.
    let shifted = |mu: f64| -> Vec<f64> {
        let vs: Vec<f64> = v.iter().zip(a).map(|(&vi, &ai)| vi + mu * ai).collect();
        project_simplex(&vs)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut w_hi = shifted(hi);
    let mut guard = 0;
    while dot(a, &w_hi) < b && guard < 200 {
        lo = hi;
        hi *= 2.0;
        w_hi = shifted(hi);
        guard += 1;
    }
    let mut w = w_hi;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let wm = shifted(mid);
        if dot(a, &wm) >= b {
            hi = mid;
            w = wm;
        } else {
            lo = mid;
        }
    }
    w
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_simplex(w: &[f64]) {
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn projection_of_simplex_point_is_identity() {
        let w = vec![0.2, 0.3, 0.5];
        let p = project_simplex(&w);
        for (a, b) in w.iter().zip(&p) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_clamps_negative_mass() {
        let p = project_simplex(&[1.4, -0.4, 0.0]);
        assert_simplex(&p);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn halfspace_projection_activates_constraint() {
        // margin aᵀw >= b excludes the unconstrained projection
        let a = vec![1.0, -1.0];
        let b = 0.5;
        let p = project_simplex_halfspace(&[0.0, 1.0], &a, b);
        assert_simplex(&p);
        assert!(dot(&a, &p) >= b - 1e-9);
        // the result should sit close to the constraint boundary
        assert!(dot(&a, &p) <= b + 1e-6);
    }

    proptest! {
        #[test]
        fn projection_lands_on_simplex(v in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            assert_simplex(&project_simplex(&v));
        }

        #[test]
        fn projection_is_nearest_against_random_candidates(
            v in prop::collection::vec(-2.0f64..2.0, 3),
            cand in prop::collection::vec(0.01f64..1.0, 3),
        ) {
            let p = project_simplex(&v);
            let s: f64 = cand.iter().sum();
            let c: Vec<f64> = cand.iter().map(|x| x / s).collect();
            let d2 = |a: &[f64]| -> f64 {
                a.iter().zip(&v).map(|(&x, &y)| (x - y) * (x - y)).sum()
            };
            prop_assert!(d2(&p) <= d2(&c) + 1e-9);
        }
    }
}
