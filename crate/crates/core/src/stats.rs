//! Order-independent descriptive statistics over sorted samples.

use crate::scalar::Scalar;

/// Sorts a copy of `values` ascending. NaN is not expected here.
pub fn sorted<S: Scalar>(values: impl IntoIterator<Item = S>) -> Vec<S> {
    let mut v: Vec<S> = values.into_iter().collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in statistics input"));
    v
}

/// Arithmetic mean of an ascending sample; summing in sorted order keeps the
/// result independent of input order.
pub fn mean_sorted<S: Scalar>(sorted: &[S]) -> Option<S> {
    if sorted.is_empty() {
        return None;
    }
    let n = S::from_usize(sorted.len())?;
    Some(sorted.iter().copied().sum::<S>() / n)
}

/// Percentile of an ascending sample, `p` in `[0, 100]`, by linear
/// interpolation between closest ranks (rank `h = (n − 1)·p/100`).
pub fn percentile_sorted<S: Scalar>(sorted: &[S], p: f64) -> Option<S> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * (p / 100.0).clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = S::lit(h - lo as f64);
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Median; for an even count, the mean of the two middle values.
pub fn median_sorted<S: Scalar>(sorted: &[S]) -> Option<S> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    if n % 2 == 1 {
        Some(sorted[n / 2])
    } else {
        Some((sorted[n / 2 - 1] + sorted[n / 2]) / S::lit(2.0))
    }
}
