//! Small numeric helpers.

/// `log(sum(exp(x)))` with max-subtraction. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalized `exp(x)` weights.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|&x| (x - lse).exp()).collect()
}

/// `x ln x` with `0 ln 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Lookup table of `k ln k` for integer `k` in `0..=max`.
#[derive(Debug, Clone)]
pub struct XLogXTable {
    values: Vec<f64>,
}

impl XLogXTable {
    pub fn new(max: u64) -> Self {
        let values = (0..=max).map(|k| xlogx(k as f64)).collect();
        XLogXTable { values }
    }

    #[inline]
    pub fn get(&self, k: u64) -> f64 {
        match self.values.get(k as usize) {
            Some(&v) => v,
            None => xlogx(k as f64),
        }
    }
}

/// Mean of a slice; `NaN` when empty.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
