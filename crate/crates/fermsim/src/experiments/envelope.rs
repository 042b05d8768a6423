//! Sliding-window extrema of a sampled time series.

use super::ExperimentError;

/// Centered sliding max/min: for each sample i, the extrema of all values
/// whose time lies within window/2 of times[i].  Every window contains at
/// least the sample itself, so a window narrower than the sampling step
/// returns the series unchanged.
pub fn envelope(
    times: &[f64],
    values: &[f64],
    window: f64,
) -> Result<(Vec<f64>, Vec<f64>), ExperimentError> {
    if times.len() != values.len() {
        return Err(ExperimentError::Config(format!(
            "envelope input lengths differ: {} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    if !(window.is_finite() && window > 0.0) {
        return Err(ExperimentError::Config(format!(
            "envelope window must be positive and finite, got {window}"
        )));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(ExperimentError::Config("envelope input times must be sorted".into()));
    }
    let half = window / 2.0;
    let n = times.len();
    let mut upper = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut lo = 0usize;
    let mut hi = 0usize;
    for i in 0..n {
        while times[lo] < times[i] - half {
            lo += 1;
        }
        while hi < n && times[hi] <= times[i] + half {
            hi += 1;
        }
        let mut max = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        for &v in &values[lo..hi] {
            max = max.max(v);
            min = min.min(v);
        }
        upper.push(max);
        lower.push(min);
    }
    Ok((upper, lower))
}
