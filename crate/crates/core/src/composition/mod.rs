//! Compositional data mathematics.
//!
//! Relative abundances live on the open simplex as [`Composition`]s; genetic
//! and environmental modulation happen on the centered log-ratio scale as
//! [`ClrVector`]s. Logs are natural throughout.

mod pcoa;

pub use pcoa::pcoa;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::Scalar;

/// Tolerance on the unit sum of a composition.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Smallest Dirichlet gamma shape; smaller shapes are floored.
pub const MIN_DIRICHLET_SHAPE: f64 = 1e-12;

/// Strictly positive relative abundances summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition<T>(Vec<T>);

impl<T: Scalar> Composition<T> {
    /// Validates positivity and the unit sum.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("empty composition".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > T::zero()) || !v.is_finite()) {
            return Err(Error::Data(format!("composition entry {i} is not strictly positive ({v})")));
        }
        let total: T = values.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(SIMPLEX_TOLERANCE).max(T::epsilon() * T::from_count(4 * values.len())) {
            return Err(Error::Data(format!("composition sums to {total}, not 1")));
        }
        Ok(Self(values))
    }

    /// Normalizes positive weights onto the simplex.
    pub fn from_weights(weights: &[T]) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::Data("weights have no positive mass".into()));
        }
        Self::new(weights.iter().map(|&w| w / total).collect())
    }

    /// Uniform composition over `n` parts.
    pub fn uniform(n: usize) -> Self {
        Self(vec![T::one() / T::from_count(n); n])
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    /// Convex combination `w·self + (1 − w)·other`.
    pub fn mix(&self, other: &Self, w: T) -> Self {
        assert_eq!(self.len(), other.len());
        let v = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| w * a + (T::one() - w) * b)
            .collect();
        Self(v)
    }
}

/// Values on the centered log-ratio scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ClrVector<T>(Vec<T>);

impl<T: Scalar> ClrVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

/// Centered log-ratio: `ln c_i − mean_j ln c_j`.
pub fn clr<T: Scalar>(c: &Composition<T>) -> ClrVector<T> {
    let logs: Vec<T> = c.values().iter().map(|v| v.ln()).collect();
    let centre = logs.iter().copied().sum::<T>() / T::from_count(logs.len());
    ClrVector(logs.into_iter().map(|l| l - centre).collect())
}

/// Inverse CLR (softmax). Invariant to adding a constant to every entry.
///
/// Entries that underflow are floored at the smallest positive normal value so
/// the output stays strictly positive.
pub fn clr_inv<T: Scalar>(v: &ClrVector<T>) -> Composition<T> {
    let max = v.values().iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = v.values().iter().map(|&x| (x - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let floor = T::min_positive_value();
    Composition(exps.into_iter().map(|e| (e / total).max(floor)).collect())
}

/// Empirical-Bayes composition: `pi·counts/total + (1 − pi)·population_mean`.
///
/// This is the posterior mean under a Dirichlet(S·mean) prior with
/// `pi = total / (total + S)`.
pub fn empirical_bayes_smooth<T: Scalar>(
    counts: &[u64],
    population_mean: &Composition<T>,
    pi: T,
) -> Result<Composition<T>> {
    if counts.len() != population_mean.len() {
        return Err(Error::Data(format!(
            "count vector has {} taxa but population mean has {}",
            counts.len(),
            population_mean.len()
        )));
    }
    if !(pi > T::zero() && pi <= T::one()) {
        return Err(Error::Config(format!("pi must lie in (0, 1], got {pi}")));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Data("cannot smooth a sample with zero total count".into()));
    }
    let total = T::lit(total as f64);
    let values: Vec<T> = counts
        .iter()
        .zip(population_mean.values())
        .map(|(&k, &m)| pi * T::lit(k as f64) / total + (T::one() - pi) * m)
        .collect();
    if values.iter().any(|v| !(*v > T::zero())) {
        return Err(Error::Data(
            "smoothed composition has a zero entry (taxon absent everywhere, or pi = 1 with a zero count)".into(),
        ));
    }
    Ok(Composition(values))
}

/// Draws from Dirichlet(eta · mean) via normalized gamma variates in log space.
pub fn sample_dirichlet<T: Scalar, R: Rng + ?Sized>(
    mean: &Composition<T>,
    eta: T,
    rng: &mut R,
) -> Composition<T> {
    assert!(eta > T::zero(), "Dirichlet dispersion must be positive");
    let floor = T::lit(MIN_DIRICHLET_SHAPE);
    let logs: Vec<T> = mean
        .values()
        .iter()
        .map(|&m| T::ln_gamma_draw(rng, (eta * m).max(floor)))
        .collect();
    clr_inv(&ClrVector(logs))
}

/// Bray–Curtis dissimilarity `1 − 2·Σ min(a_i, b_i) / (Σ a + Σ b)`.
pub fn bray_curtis<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Data(format!(
            "Bray-Curtis inputs differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let sa: T = a.iter().copied().sum();
    let sb: T = b.iter().copied().sum();
    if !(sa > T::zero()) || !(sb > T::zero()) {
        return Err(Error::Data("Bray-Curtis input has no positive entry".into()));
    }
    if a.iter().chain(b).any(|v| *v < T::zero()) {
        return Err(Error::Data("Bray-Curtis input has a negative entry".into()));
    }
    let shared: T = a.iter().zip(b).map(|(&x, &y)| x.min(y)).sum();
    Ok(T::one() - T::lit(2.0) * shared / (sa + sb))
}

/// Shannon index `−Σ p ln p` with `0 ln 0 = 0`.
pub fn shannon<T: Scalar>(p: &[T]) -> T {
    -p.iter()
        .filter(|&&x| x > T::zero())
        .map(|&x| x * x.ln())
        .sum::<T>()
}

/// Shannon index of a count vector after normalizing to proportions.
pub fn shannon_of_counts<T: Scalar>(counts: &[u32]) -> T {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return T::zero();
    }
    let total = total as f64;
    let p: Vec<T> = counts.iter().map(|&c| T::lit(c as f64 / total)).collect();
    shannon(&p)
}

/// Multinomial(depth, c) by sequential conditional binomials.
pub fn multinomial_resample<T: Scalar, R: Rng + ?Sized>(
    c: &Composition<T>,
    depth: u32,
    rng: &mut R,
) -> Vec<u32> {
    assert!(depth >= 1, "resampling depth must be at least 1");
    let mut out = vec![0u32; c.len()];
    let mut remaining = depth as u64;
    let mut mass_left = 1.0f64;
    let last = c.len() - 1;
    for (i, &p) in c.values().iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last {
            out[i] = remaining as u32;
            break;
        }
        let p = p.as_f64();
        let q = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 1.0 };
        let k = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        out[i] = k as u32;
        remaining -= k;
        mass_left -= p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn comp(v: &[f64]) -> Composition<f64> {
        Composition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn clr_of_uniform_is_zero() {
        let out = clr(&comp(&[0.25; 4]));
        assert!(out.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn clr_direct_evaluation() {
        // ln x_i − mean(ln x), evaluated independently.
        let x = [0.5f64, 0.25, 0.25];
        let m = x.iter().map(|v| v.ln()).sum::<f64>() / 3.0;
        let expected: Vec<f64> = x.iter().map(|v| v.ln() - m).collect();
        let out = clr(&comp(&x));
        for (o, e) in out.values().iter().zip(&expected) {
            assert!((o - e).abs() < 1e-12);
        }
        let frozen = [0.4621, -0.2310, -0.2310];
        for (o, e) in out.values().iter().zip(frozen) {
            assert!((o - e).abs() < 1e-4);
        }
    }

    #[test]
    fn clr_inv_uniform_and_closed_form() {
        let u = clr_inv(&ClrVector::new(vec![0.0f64; 3]));
        assert!(u.values().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let c = clr_inv(&ClrVector::new(vec![2f64.ln(), 0.0, 0.0]));
        for (o, e) in c.values().iter().zip([0.5, 0.25, 0.25]) {
            assert!((o - e).abs() < 1e-15);
        }
    }

    #[test]
    fn clr_inv_translation_invariance() {
        let v = vec![0.3, -1.2, 2.0, 0.1];
        let shifted: Vec<f64> = v.iter().map(|x| x + 100.0).collect();
        let a = clr_inv(&ClrVector::new(v));
        let b = clr_inv(&ClrVector::new(shifted));
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_examples() {
        let mean = comp(&[0.5, 0.25, 0.25]);
        let out = empirical_bayes_smooth(&[10, 0, 10], &mean, 0.75).unwrap();
        for (o, e) in out.values().iter().zip([0.5, 0.0625, 0.4375]) {
            assert!((o - e).abs() < 1e-15);
        }
        let pure = empirical_bayes_smooth(&[1, 1], &comp(&[0.3, 0.7]), 1.0).unwrap();
        assert_eq!(pure.values(), &[0.5, 0.5]);
    }

    #[test]
    fn default_pi_is_dirichlet_posterior_with_third_of_depth() {
        // Posterior mean of Dirichlet(S·p) after counts k: (k + S·p) / (total + S).
        let total = 4100u64;
        let s = total as f64 / 3.0;
        let counts = [2000u64, 1500, 600, 0];
        let mean = comp(&[0.4, 0.3, 0.2, 0.1]);
        let posterior: Vec<f64> = counts
            .iter()
            .zip(mean.values())
            .map(|(&k, &p)| (k as f64 + s * p) / (total as f64 + s))
            .collect();
        let smoothed = empirical_bayes_smooth(&counts, &mean, 0.75).unwrap();
        for (a, b) in smoothed.values().iter().zip(&posterior) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_rejects_zero_total() {
        assert!(empirical_bayes_smooth(&[0, 0], &comp(&[0.5, 0.5]), 0.75).is_err());
    }

    #[test]
    fn dirichlet_moments() {
        let mean = comp(&[0.6, 0.3, 0.1]);
        let eta = 25.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut sum = [0.0f64; 3];
        let mut sum_sq = [0.0f64; 3];
        for _ in 0..n {
            let d = sample_dirichlet(&mean, eta, &mut rng);
            for i in 0..3 {
                sum[i] += d.values()[i];
                sum_sq[i] += d.values()[i].powi(2);
            }
        }
        for i in 0..3 {
            let m = sum[i] / n as f64;
            let var = sum_sq[i] / n as f64 - m * m;
            let mi = mean.values()[i];
            let expected_var = mi * (1.0 - mi) / (eta + 1.0);
            assert!((m - mi).abs() < 0.005, "mean {i}: {m}");
            assert!(((var - expected_var) / expected_var).abs() < 0.10, "var {i}: {var} vs {expected_var}");
        }
    }

    #[test]
    fn dirichlet_concentrates_for_huge_eta() {
        let mean = comp(&[0.6, 0.3, 0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let d = sample_dirichlet(&mean, 1e9, &mut rng);
            for (a, b) in d.values().iter().zip(mean.values()) {
                assert!((a - b).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn dirichlet_stays_positive_with_rare_parts() {
        let mut v = vec![1e-9; 50];
        v[0] = 1.0 - 49.0 * 1e-9;
        let mean = comp(&v);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let d = sample_dirichlet(&mean, 25.0, &mut rng);
            assert!(d.values().iter().all(|x| *x > 0.0));
        }
    }

    #[test]
    fn bray_curtis_examples() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(bray_curtis(&x, &x).unwrap(), 0.0);
        assert_eq!(bray_curtis(&[1.0, 0.0], &[0.0, 4.0]).unwrap(), 1.0);
        assert!((bray_curtis(&[1.0f64, 1.0, 0.0], &[0.0, 1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(bray_curtis(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn shannon_examples() {
        assert!((shannon(&[0.25f64; 4]) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(shannon(&[1.0f64, 0.0, 0.0]), 0.0);
        let direct = -(0.5f64 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        assert!((shannon(&[0.5f64, 0.25, 0.25]) - direct).abs() < 1e-15);
        assert!((shannon(&[0.5f64, 0.25, 0.25]) - 1.0397).abs() < 1e-4);
    }

    #[test]
    fn multinomial_sums_and_spread() {
        let c = Composition::<f64>::uniform(100);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut inside = 0usize;
        let mut cells = 0usize;
        for _ in 0..50 {
            let k = multinomial_resample(&c, 10_000, &mut rng);
            assert_eq!(k.iter().map(|&x| x as u64).sum::<u64>(), 10_000);
            inside += k.iter().filter(|&&x| (60..=140).contains(&x)).count();
            cells += k.len();
        }
        assert!(inside as f64 / cells as f64 >= 0.99);
    }

    #[test]
    fn resampled_shannon_is_biased_down_for_sparse_compositions() {
        let mut w = vec![1e-4; 200];
        w[..5].copy_from_slice(&[0.3, 0.2, 0.1, 0.1, 0.1]);
        let c = Composition::from_weights(&w).unwrap();
        let truth = shannon(c.values());
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n = 200;
        let avg = (0..n)
            .map(|_| shannon_of_counts::<f64>(&multinomial_resample(&c, 1000, &mut rng)))
            .sum::<f64>()
            / n as f64;
        assert!(avg <= truth, "{avg} > {truth}");
    }

    fn composition_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-6f64..1.0, 2..30)
    }

    proptest! {
        #[test]
        fn clr_round_trip_and_zero_sum(w in composition_strategy()) {
            let c = Composition::from_weights(&w).unwrap();
            let v = clr(&c);
            prop_assert!(v.values().iter().sum::<f64>().abs() < 1e-9);
            let back = clr_inv(&v);
            for (a, b) in back.values().iter().zip(c.values()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn bray_curtis_symmetric_and_bounded(a in composition_strategy(), b in composition_strategy()) {
            let n = a.len().min(b.len());
            let (a, b) = (&a[..n], &b[..n]);
            let ab = bray_curtis(a, b).unwrap();
            let ba = bray_curtis(b, a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&ab));
            let total: f64 = a.iter().sum();
            let normalized: Vec<f64> = a.iter().map(|x| x / total).collect();
            let self_d = bray_curtis(&normalized, &normalized).unwrap();
            prop_assert!(self_d.abs() < 1e-15);
        }

        #[test]
        fn shannon_permutation_invariant_and_bounded(w in composition_strategy(), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let c = Composition::from_weights(&w).unwrap();
            let h = shannon(c.values());
            let mut perm = c.values().to_vec();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert!((shannon(&perm) - h).abs() < 1e-12);
            prop_assert!(h >= 0.0 && h <= (w.len() as f64).ln() + 1e-12);
        }

        #[test]
        fn smoothing_stays_on_simplex_and_moves_toward_empirical(
            counts in prop::collection::vec(0u64..50, 3..10),
            pi_lo in 0.05f64..0.5,
            dp in 0.01f64..0.5,
        ) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let n = counts.len();
            let mean = Composition::<f64>::uniform(n);
            let total = counts.iter().sum::<u64>() as f64;
            let empirical: Vec<f64> = counts.iter().map(|&k| k as f64 / total).collect();
            let lo = empirical_bayes_smooth(&counts, &mean, pi_lo).unwrap();
            let hi = empirical_bayes_smooth(&counts, &mean, (pi_lo + dp).min(0.999)).unwrap();
            prop_assert!((lo.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let dist = |c: &Composition<f64>| c.values().iter().zip(&empirical).map(|(a, b)| (a - b).abs()).sum::<f64>();
            prop_assert!(dist(&hi) <= dist(&lo) + 1e-12);
        }
    }
}
