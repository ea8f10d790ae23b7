//! Small descriptive statistics used across modules.

use crate::Scalar;

pub fn mean<T: Scalar>(x: &[T]) -> T {
    if x.is_empty() {
        return T::zero();
    }
    x.iter().copied().sum::<T>() / T::from_count(x.len())
}

/// Sample variance (n − 1 denominator); zero for fewer than two values.
pub fn variance<T: Scalar>(x: &[T]) -> T {
    covariance(x, x)
}

pub fn sd<T: Scalar>(x: &[T]) -> T {
    variance(x).sqrt()
}

/// Sample covariance (n − 1 denominator).
pub fn covariance<T: Scalar>(x: &[T], y: &[T]) -> T {
    assert_eq!(x.len(), y.len(), "covariance of vectors with different lengths");
    let n = x.len();
    if n < 2 {
        return T::zero();
    }
    let mx = mean(x);
    let my = mean(y);
    let s: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    s / T::from_count(n - 1)
}

/// Pearson correlation; zero when either vector is constant.
pub fn correlation<T: Scalar>(x: &[T], y: &[T]) -> T {
    let vx = variance(x);
    let vy = variance(y);
    if vx <= T::zero() || vy <= T::zero() {
        return T::zero();
    }
    covariance(x, y) / (vx * vy).sqrt()
}

/// Within-vector standardization to zero mean and unit variance.
/// A constant vector maps to zeros.
pub fn standardize<T: Scalar>(x: &[T]) -> Vec<T> {
    let m = mean(x);
    let s = sd(x);
    if s <= T::zero() {
        return vec![T::zero(); x.len()];
    }
    x.iter().map(|&v| (v - m) / s).collect()
}

pub fn median<T: Scalar>(x: &[T]) -> T {
    if x.is_empty() {
        return T::nan();
    }
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}

/// Mean with a normal-approximation 95% confidence interval of the mean.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeanInterval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn mean_interval(x: &[f64]) -> MeanInterval {
    let m = mean(x);
    let half = if x.len() > 1 {
        1.96 * sd(x) / (x.len() as f64).sqrt()
    } else {
        0.0
    };
    MeanInterval {
        mean: m,
        lower: m - half,
        upper: m + half,
    }
}

/// Two-group separation of a 1-D sample (Ashman's D) at the best 2-means split.
///
/// Values are sorted, every split point is scored by within-group sum of
/// squares, and D = √2·|μ₁ − μ₂| / √(σ₁² + σ₂²) is returned for the best split.
/// D > 2 is the usual threshold for a clean bimodal mixture.
pub fn two_group_separation(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in separation input"));
    let n = v.len();
    if n < 4 {
        return 0.0;
    }
    let mut prefix = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    for (i, &val) in v.iter().enumerate() {
        prefix[i + 1] = prefix[i] + val;
        prefix_sq[i + 1] = prefix_sq[i] + val * val;
    }
    let sse = |lo: usize, hi: usize| {
        let k = (hi - lo) as f64;
        let s = prefix[hi] - prefix[lo];
        let ss = prefix_sq[hi] - prefix_sq[lo];
        ss - s * s / k
    };
    let mut best = (f64::INFINITY, 2);
    for split in 2..=n - 2 {
        let total = sse(0, split) + sse(split, n);
        if total < best.0 {
            best = (total, split);
        }
    }
    let (lo, hi) = v.split_at(best.1);
    let var1 = variance(lo);
    let var2 = variance(hi);
    let denom = (var1 + var2).sqrt();
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    std::f64::consts::SQRT_2 * (mean(hi) - mean(lo)).abs() / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_of_known_sample() {
        let x = [1.0f64, 2.0, 3.0, 4.0];
        assert!((variance(&x) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn correlation_of_linear_relation_is_one() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((correlation(&x, &y) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn separation_detects_bimodal() {
        let mut x: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
        x.extend((0..50).map(|i| 10.0 + i as f64 * 0.01));
        assert!(two_group_separation(&x) > 10.0);
        let unimodal: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        assert!(two_group_separation(&unimodal) < 4.0);
    }
}
