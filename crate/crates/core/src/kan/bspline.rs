//! B-spline basis on a clamped knot vector (Cox–de Boor).

use crate::error::{Error, Result};

pub const SPLINE_ORDER: usize = 3;
pub const GRID_SIZE: usize = 5;
pub const N_BASIS: usize = GRID_SIZE + SPLINE_ORDER;

/// Clamped knot vector with `GRID_SIZE` uniform intervals on `[0, 1]` and
/// `SPLINE_ORDER + 1` repeated knots at each end.
pub fn clamped_knots() -> Vec<f64> {
    let mut knots = vec![0.0; SPLINE_ORDER];
    knots.extend((0..=GRID_SIZE).map(|i| i as f64 / GRID_SIZE as f64));
    knots.extend(std::iter::repeat(1.0).take(SPLINE_ORDER));
    knots
}

/// Non-decreasing, `N_BASIS + SPLINE_ORDER + 1` entries, ends clamped at 0 and 1.
pub fn validate_knots(knots: &[f64]) -> Result<()> {
    let k = SPLINE_ORDER;
    if knots.len() != N_BASIS + k + 1 {
        return Err(Error::Config(format!(
            "knot vector needs {} entries, got {}",
            N_BASIS + k + 1,
            knots.len()
        )));
    }
    if knots.iter().any(|v| !v.is_finite()) || knots.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("knot vector must be finite and non-decreasing".into()));
    }
    let n = knots.len();
    if knots[..=k].iter().any(|&v| v != 0.0) || knots[n - k - 1..].iter().any(|&v| v != 1.0) {
        return Err(Error::Config("knot vector ends must be clamped to 0 and 1".into()));
    }
    Ok(())
}

/// The `SPLINE_ORDER + 1` basis functions that can be non-zero at `x`,
/// starting at index `first`, with their derivatives in `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBasis {
    pub first: usize,
    pub values: [f64; SPLINE_ORDER + 1],
    pub derivs: [f64; SPLINE_ORDER + 1],
}

fn find_span(knots: &[f64], x: f64) -> usize {
    let k = SPLINE_ORDER;
    let last = knots.len() - k - 2;
    if x >= knots[last + 1] {
        return last;
    }
    let mut span = k;
    while span < last && x >= knots[span + 1] {
        span += 1;
    }
    span
}

/// Evaluate the local basis at `x` (clamped to `[0, 1]`). The derivative is
/// taken with respect to the clamped value, so it is zero-extended outside.
pub fn local_basis(knots: &[f64], x: f64) -> LocalBasis {
    const K: usize = SPLINE_ORDER;
    let inside = (0.0..=1.0).contains(&x);
    let x = x.clamp(0.0, 1.0);
    let span = find_span(knots, x);
    // triangular table: row d holds the d+1 non-zero basis functions of degree d
    let mut n = [[0.0; K + 1]; K + 1];
    n[0][0] = 1.0;
    let mut left = [0.0; K + 1];
    let mut right = [0.0; K + 1];
    for d in 1..=K {
        left[d] = x - knots[span + 1 - d];
        right[d] = knots[span + d] - x;
        let mut saved = 0.0;
        for r in 0..d {
            let denom = right[r + 1] + left[d - r];
            let tmp = if denom == 0.0 { 0.0 } else { n[d - 1][r] / denom };
            n[d][r] = saved + right[r + 1] * tmp;
            saved = left[d - r] * tmp;
        }
        n[d][d] = saved;
    }
    let first = span - K;
    let mut derivs = [0.0; K + 1];
    if inside {
        // B'_{i,K} = K/(t_{i+K} − t_i)·B_{i,K−1} − K/(t_{i+K+1} − t_{i+1})·B_{i+1,K−1}
        let lower = |j: isize| -> f64 {
            if (0..K as isize).contains(&j) {
                n[K - 1][j as usize]
            } else {
                0.0
            }
        };
        for (r, d) in derivs.iter_mut().enumerate() {
            let i = first + r;
            let a = knots[i + K] - knots[i];
            let b = knots[i + K + 1] - knots[i + 1];
            let ta = if a == 0.0 {
                0.0
            } else {
                K as f64 / a * lower(r as isize - 1)
            };
            let tb = if b == 0.0 {
                0.0
            } else {
                K as f64 / b * lower(r as isize)
            };
            *d = ta - tb;
        }
    }
    LocalBasis {
        first,
        values: n[K],
        derivs,
    }
}

/// Full basis vector `B_0(x) … B_{N_BASIS−1}(x)` for `x` clamped to `[0, 1]`.
pub fn bspline_basis(x: f64, knots: &[f64]) -> [f64; N_BASIS] {
    let lb = local_basis(knots, x);
    let mut out = [0.0; N_BASIS];
    out[lb.first..lb.first + SPLINE_ORDER + 1].copy_from_slice(&lb.values);
    out
}
