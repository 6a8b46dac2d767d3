use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution summary used in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub median: f64,
    pub trimean: f64,
    pub best25_mean: f64,
    pub worst25_mean: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
    pub n: usize,
}

/// Quantile of sorted data by linear interpolation between closest ranks:
/// rank `r = 1 + (n − 1)·q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let r = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = r.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = r - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Number of values in a best/worst quartile: `⌈n/4⌉`.
pub fn quartile_count(n: usize) -> usize {
    n.div_ceil(4)
}

pub fn aggregate_stats(values: &[f64]) -> Result<ErrorStats> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("statistics input".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let mean_of = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (q1, q2, q3) = (
        quantile_sorted(&s, 0.25),
        quantile_sorted(&s, 0.5),
        quantile_sorted(&s, 0.75),
    );
    let k = quartile_count(n);
    // summing the sorted sample makes the mean independent of input order;
    // the clamp absorbs last-bit rounding against the quartile means
    let best = mean_of(&s[..k]);
    let worst = mean_of(&s[n - k..]);
    let mean = mean_of(&s).clamp(best, worst);
    Ok(ErrorStats {
        mean,
        median: q2,
        trimean: (q1 + 2.0 * q2 + q3) / 4.0,
        best25_mean: best,
        worst25_mean: worst,
        p95: quantile_sorted(&s, 0.95),
        p99: quantile_sorted(&s, 0.99),
        max: s[n - 1],
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample() {
        let s = aggregate_stats(&[2.5; 7]).unwrap();
        for v in [
            s.mean,
            s.median,
            s.trimean,
            s.best25_mean,
            s.worst25_mean,
            s.p95,
            s.p99,
            s.max,
        ] {
            assert_eq!(v, 2.5);
        }
        assert_eq!(s.n, 7);
    }

    #[test]
    fn five_values() {
        let s = aggregate_stats(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!((s.median, s.trimean, s.max, s.mean), (3.0, 3.0, 5.0, 3.0));
        assert_eq!((s.best25_mean, s.worst25_mean), (1.5, 4.5));
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.75), 4.0);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(aggregate_stats(&[]).is_err());
        assert!(aggregate_stats(&[1.0, f64::NAN]).is_err());
    }
}
