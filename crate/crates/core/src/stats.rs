//! Small statistics helpers: log-sum-exp, means with standard errors,
//! batch means and weighted regression.

/// log Σ exp(x_i) with max subtraction; −∞ for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Running log-sum-exp accumulator carrying any number of weighted sums
/// Σ e^{ℓ_i} f_k(i) alongside Σ e^{ℓ_i}.
#[derive(Clone, Debug)]
pub(crate) struct LogWeightedSums {
    shift: f64,
    mass: f64,
    sums: Vec<f64>,
}

impl LogWeightedSums {
    pub fn new(n: usize) -> Self {
        LogWeightedSums {
            shift: f64::NEG_INFINITY,
            mass: 0.0,
            sums: vec![0.0; n],
        }
    }

    fn rescale(&mut self, new_shift: f64) {
        if self.shift != f64::NEG_INFINITY {
            let r = (self.shift - new_shift).exp();
            self.mass *= r;
            for s in &mut self.sums {
                *s *= r;
            }
        }
        self.shift = new_shift;
    }

    /// Adds a term with log-weight `log_w` and observable values `values`.
    #[inline]
    pub fn push(&mut self, log_w: f64, values: &[f64]) {
        if log_w > self.shift {
            self.rescale(log_w);
        }
        let e = (log_w - self.shift).exp();
        self.mass += e;
        for (s, v) in self.sums.iter_mut().zip(values) {
            *s += e * v;
        }
    }

    /// Adds a block already reduced relative to `block_shift`.
    pub fn push_block(&mut self, block_shift: f64, mass: f64, sums: &[f64]) {
        if mass == 0.0 {
            return;
        }
        if block_shift > self.shift {
            self.rescale(block_shift);
        }
        let r = (block_shift - self.shift).exp();
        self.mass += r * mass;
        for (s, v) in self.sums.iter_mut().zip(sums) {
            *s += r * v;
        }
    }

    /// Folds another accumulator into this one.
    pub fn merge(&mut self, other: &LogWeightedSums) {
        self.push_block(other.shift, other.mass, &other.sums);
    }

    pub fn log_mass(&self) -> f64 {
        self.shift + self.mass.ln()
    }

    pub fn means(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s / self.mass).collect()
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Mean and standard error from non-overlapping batch means.
pub fn batch_means(xs: &[f64], n_batches: usize) -> (f64, f64) {
    let n_batches = n_batches.max(2).min(xs.len().max(1));
    let size = xs.len() / n_batches;
    if size == 0 {
        return mean_and_error(xs);
    }
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .take(n_batches)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    mean_and_error(&means)
}

/// Weighted least-squares slope of y on x with per-point standard errors;
/// returns (slope, standard error of slope).
pub fn weighted_slope(x: &[f64], y: &[f64], y_err: &[f64]) -> (f64, f64) {
    let w: Vec<f64> = y_err.iter().map(|e| 1.0 / (e * e).max(1e-300)).collect();
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((a, c), b)| b * (a - xm) * (c - ym))
        .sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lse_handles_large_arguments() {
        assert_relative_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln());
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_relative_eq!(log_sum_exp(&[-1.0, 0.0, 2.0]), (f64::exp(-1.0) + 1.0 + f64::exp(2.0)).ln());
    }

    #[test]
    fn running_sums_match_direct() {
        let logs = [3.0, -2.0, 700.0, 699.0, 10.0];
        let vals = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut acc = LogWeightedSums::new(1);
        for (l, v) in logs.iter().zip(&vals) {
            acc.push(*l, &[*v]);
        }
        let m = 700.0;
        let z: f64 = logs.iter().map(|l| (l - m).exp()).sum();
        let s: f64 = logs.iter().zip(&vals).map(|(l, v)| (l - m).exp() * v).sum();
        assert_relative_eq!(acc.means()[0], s / z, max_relative = 1e-14);
        assert_relative_eq!(acc.log_mass(), m + z.ln(), max_relative = 1e-14);
    }

    #[test]
    fn slope_of_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        let (s, _) = weighted_slope(&x, &y, &[1.0; 4]);
        assert_relative_eq!(s, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn batch_means_of_constant() {
        let xs = vec![1.5; 1000];
        assert_eq!(batch_means(&xs, 20), (1.5, 0.0));
    }
}
