//! Weighted projection onto `{x | 0 ≤ x ≤ upper, 1ᵀx = total}`.

use crate::error::{check_len, Error, Result};

/// Maximum bisection steps on the scalar multiplier.
pub const MAX_BISECTION_STEPS: usize = 200;

/// Acceptance tolerance on `|1ᵀx − total|` for a bisection midpoint.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Solves `argmin Σ w_j (x_j − v_j)²` over the box-simplex.
///
/// The minimizer is `x_j(θ) = clamp(v_j − θ/w_j, 0, upper_j)` for the unique
/// multiplier θ with `1ᵀx(θ) = total`. θ is bracketed explicitly by the
/// extreme breakpoints, then bisected. Once no breakpoint lies inside the
/// bracket the sum is affine there and θ is solved in closed form.
pub fn project_box_simplex(
    v: &[f64],
    upper: &[f64],
    total: f64,
    weights: &[f64],
) -> Result<Vec<f64>> {
    let n = v.len();
    check_len("box-simplex upper", n, upper.len())?;
    check_len("box-simplex weights", n, weights.len())?;
    if n == 0 {
        return Err(Error::InvalidConfig("empty projection vector".into()));
    }
    if !(total >= 0.0) || upper.iter().any(|u| !(*u >= 0.0)) {
        return Err(Error::InvalidConfig(
            "box-simplex bounds must be nonnegative".into(),
        ));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidConfig(
            "projection weights must be positive and finite".into(),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig("non-finite projection input".into()));
    }
    let upper_sum: f64 = upper.iter().sum();
    if upper_sum < total {
        return Err(Error::EmptySet { upper_sum, total });
    }
    // degenerate sets are single points
    if upper_sum == total {
        return Ok(upper.to_vec());
    }
    if total == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let point = |theta: f64| -> Vec<f64> {
        v.iter()
            .zip(upper)
            .zip(weights)
            .map(|((&vj, &uj), &wj)| clamp(vj - theta / wj, uj))
            .collect()
    };
    let sum_at = |theta: f64| -> f64 {
        v.iter()
            .zip(upper)
            .zip(weights)
            .map(|((&vj, &uj), &wj)| clamp(vj - theta / wj, uj))
            .sum()
    };

    // x_j sits at its upper bound for θ ≤ w_j(v_j − u_j) and at zero for
    // θ ≥ w_j v_j.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..n {
        lo = lo.min(weights[j] * (v[j] - upper[j]));
        hi = hi.max(weights[j] * v[j]);
    }
    if (sum_at(lo) - total).abs() <= SUM_TOLERANCE {
        return Ok(point(lo));
    }
    if (sum_at(hi) - total).abs() <= SUM_TOLERANCE {
        return Ok(point(hi));
    }

    for _ in 0..MAX_BISECTION_STEPS {
        if let Some(theta) = affine_root(v, upper, weights, total, lo, hi) {
            return Ok(point(theta));
        }
        let mid = 0.5 * (lo + hi);
        let s = sum_at(mid);
        if (s - total).abs() <= SUM_TOLERANCE {
            return Ok(point(mid));
        }
        if s > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        what: "box-simplex bisection",
        iters: MAX_BISECTION_STEPS,
        residual: (sum_at(0.5 * (lo + hi)) - total).abs(),
    })
}

/// Unweighted projection.
pub fn project_box_simplex_euclidean(v: &[f64], upper: &[f64], total: f64) -> Result<Vec<f64>> {
    project_box_simplex(v, upper, total, &vec![1.0; v.len()])
}

#[inline]
fn clamp(x: f64, upper: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= upper {
        upper
    } else {
        x
    }
}

/// Closed-form θ when no breakpoint lies strictly inside `(lo, hi)`.
fn affine_root(
    v: &[f64],
    upper: &[f64],
    weights: &[f64],
    total: f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    let mut free_v = 0.0;
    let mut free_inv_w = 0.0;
    let mut at_upper = 0.0;
    for j in 0..v.len() {
        let to_upper = weights[j] * (v[j] - upper[j]);
        let to_zero = weights[j] * v[j];
        let inside = |b: f64| b > lo && b < hi;
        if inside(to_upper) || inside(to_zero) {
            return None;
        }
        if to_upper >= hi {
            at_upper += upper[j];
        } else if to_zero <= lo {
            // pinned at zero over the whole bracket
        } else {
            free_v += v[j];
            free_inv_w += 1.0 / weights[j];
        }
    }
    if free_inv_w == 0.0 {
        return Some(lo);
    }
    let theta = (free_v + at_upper - total) / free_inv_w;
    Some(theta.clamp(lo, hi))
}
