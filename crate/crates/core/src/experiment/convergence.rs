//! Convergence-episode detector for learning curves.

/// Trailing moving averages; entry `k` averages `values[k..k + window]`,
/// i.e. the window ending at episode `k + window - 1`.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || values.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(values.len() - window + 1);
    let mut sum: f64 = values[..window].iter().sum();
    out.push(sum / window as f64);
    for k in window..values.len() {
        sum += values[k] - values[k - window];
        out.push(sum / window as f64);
    }
    out
}

/// Trailing average that shrinks the window at the start of the series.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|k| {
            let lo = (k + 1).saturating_sub(window);
            values[lo..=k].iter().sum::<f64>() / (k + 1 - lo) as f64
        })
        .collect()
}

/// Parameters of the convergence rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRule {
    pub window: usize,
    pub band: f64,
    pub final_len: usize,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        Self {
            window: 20,
            band: 0.05,
            final_len: 100,
        }
    }
}

impl ConvergenceRule {
    /// First episode from which the trailing moving average stays within
    /// `band * |reference|` of the reference, where the reference is the mean
    /// of the final `final_len` values. `None` if it never settles.
    pub fn detect(&self, returns: &[f64]) -> Option<usize> {
        if returns.is_empty() {
            return None;
        }
        let tail = &returns[returns.len().saturating_sub(self.final_len)..];
        let reference = tail.iter().sum::<f64>() / tail.len() as f64;
        let tolerance = self.band * reference.abs();
        let ma = moving_average(returns, self.window);
        let mut first = None;
        for k in (0..ma.len()).rev() {
            if (ma[k] - reference).abs() <= tolerance {
                first = Some(k);
            } else {
                break;
            }
        }
        first.map(|k| k + self.window - 1)
    }
}
