//! Selection criteria and truncation selection per sex.

use rand::Rng;

use crate::config::Criterion;
use crate::error::{Error, Result};
use crate::genome::{round_half_up, Sex};
use crate::phenotype::BreedingValues;
use crate::{stats, Scalar};

/// Inputs a criterion may need for one generation.
#[derive(Debug, Clone, Copy)]
pub struct ScoreInputs<'a, T> {
    pub breeding_values: Option<&'a BreedingValues<T>>,
    /// `ωᵀB` per individual.
    pub microbiota_effect: Option<&'a [T]>,
    /// Shannon diversity of resampled counts per individual.
    pub diversity: Option<&'a [T]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionScore<T> {
    pub criterion: Criterion,
    pub scores: Vec<T>,
    pub w_div: f64,
}

fn need<'a, T>(v: Option<&'a [T]>, criterion: Criterion, what: &str) -> Result<&'a [T]> {
    v.ok_or_else(|| Error::Data(format!("criterion {} needs {what}", criterion.as_str())))
}

/// Per-individual scores; higher is better. `n` is the generation size, used
/// by RANDOM. `standardize` switches the mixed index between z-scores and
/// raw values.
pub fn score<T: Scalar, R: Rng + ?Sized>(
    criterion: Criterion,
    inputs: &ScoreInputs<'_, T>,
    n: usize,
    w_div: f64,
    standardize: bool,
    rng: &mut R,
) -> Result<SelectionScore<T>> {
    let bv = || {
        inputs
            .breeding_values
            .ok_or_else(|| Error::Data(format!("criterion {} needs breeding values", criterion.as_str())))
    };
    let scores: Vec<T> = match criterion {
        Criterion::Random => (0..n).map(|_| T::open01(rng)).collect(),
        Criterion::MicrobiotaEffect => need(inputs.microbiota_effect, criterion, "microbiota effects")?.to_vec(),
        Criterion::BvM => bv()?.bv_m.clone(),
        Criterion::BvD => bv()?.bv_d.clone(),
        Criterion::BvT => bv()?.bv_t.clone(),
        Criterion::Diversity => need(inputs.diversity, criterion, "diversity values")?.to_vec(),
        Criterion::MixedIndex => {
            if !(0.0..=1.0).contains(&w_div) {
                return Err(Error::Config(format!("w_div must lie in [0, 1], got {w_div}")));
            }
            let d = need(inputs.diversity, criterion, "diversity values")?;
            let t = &bv()?.bv_t;
            let (d, t) = if standardize {
                (stats::standardize(d), stats::standardize(t))
            } else {
                (d.to_vec(), t.clone())
            };
            let w = T::lit(w_div);
            d.iter().zip(&t).map(|(&d, &t)| w * d + (T::one() - w) * t).collect()
        }
    };
    if scores.len() != n {
        return Err(Error::Data(format!("{} scores for {n} individuals", scores.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical(format!("non-finite {} score", criterion.as_str())));
    }
    Ok(SelectionScore {
        criterion,
        scores,
        w_div,
    })
}

fn top<T: Scalar>(scores: &[T], candidates: Vec<usize>, frac: f64, label: &str) -> Vec<usize> {
    let mut k = round_half_up(frac * candidates.len() as f64).min(candidates.len());
    if k == 0 {
        log::warn!("selecting {frac} of {} {label} rounds to zero; keeping one", candidates.len());
        k = 1;
    }
    let mut c = candidates;
    // descending score, ascending index on ties
    c.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores").then(a.cmp(&b)));
    c.truncate(k);
    c.sort_unstable();
    c
}

/// Top `round(frac · count)` individuals of each sex (at least one), returned
/// as ascending indices `(females, males)`. Ties go to the lower index.
pub fn select_breeding_stock<T: Scalar>(
    scores: &[T],
    sexes: &[Sex],
    frac_f: f64,
    frac_m: f64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if scores.len() != sexes.len() {
        return Err(Error::Data("scores and sexes differ in length".into()));
    }
    for (name, f) in [("size_selection_F", frac_f), ("size_selection_M", frac_m)] {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!("{name} must lie in (0, 1], got {f}")));
        }
    }
    let females: Vec<usize> = (0..sexes.len()).filter(|&i| sexes[i] == Sex::Female).collect();
    let males: Vec<usize> = (0..sexes.len()).filter(|&i| sexes[i] == Sex::Male).collect();
    if females.is_empty() || males.is_empty() {
        return Err(Error::Data(format!(
            "selection needs both sexes ({} females, {} males)",
            females.len(),
            males.len()
        )));
    }
    Ok((top(scores, females, frac_f, "females"), top(scores, males, frac_m, "males")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ranking(s: &[f64]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap().then(a.cmp(&b)));
        idx
    }

    fn bv() -> BreedingValues<f64> {
        let bv_d = vec![0.3, -1.0, 2.0, 0.1, 0.0];
        let bv_m = vec![0.5, 0.2, -0.4, 0.9, -0.1];
        let bv_t = bv_d.iter().zip(&bv_m).map(|(a, b)| a + b).collect();
        BreedingValues { bv_d, bv_m, bv_t }
    }

    #[test]
    fn mixed_index_extremes() {
        let b = bv();
        let div = [1.2, 3.4, 0.5, 2.2, 1.9];
        let inputs = ScoreInputs {
            breeding_values: Some(&b),
            microbiota_effect: None,
            diversity: Some(&div),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s0 = score(Criterion::MixedIndex, &inputs, 5, 0.0, true, &mut rng).unwrap();
        assert_eq!(ranking(&s0.scores), ranking(&b.bv_t));
        let s1 = score(Criterion::MixedIndex, &inputs, 5, 1.0, true, &mut rng).unwrap();
        assert_eq!(ranking(&s1.scores), ranking(&div));
        let raw = score(Criterion::MixedIndex, &inputs, 5, 0.5, false, &mut rng).unwrap();
        assert!((raw.scores[0] - 0.5 * (1.2 + 0.8)).abs() < 1e-15);
        let t = score(Criterion::BvT, &inputs, 5, 0.0, true, &mut rng).unwrap();
        assert_eq!(t.scores, b.bv_t);
        assert!(score(Criterion::MicrobiotaEffect, &inputs, 5, 0.0, true, &mut rng).is_err());
    }

    #[test]
    fn random_scores_are_reproducible() {
        let inputs = ScoreInputs::<f64> {
            breeding_values: None,
            microbiota_effect: None,
            diversity: None,
        };
        let a = score(Criterion::Random, &inputs, 10, 0.0, true, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = score(Criterion::Random, &inputs, 10, 0.0, true, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn selected_counts() {
        let sexes: Vec<Sex> = (0..500).map(|i| if i < 250 { Sex::Female } else { Sex::Male }).collect();
        let scores: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let (f, m) = select_breeding_stock(&scores, &sexes, 0.3, 0.3).unwrap();
        assert_eq!((f.len(), m.len()), (75, 75));
        assert_eq!(f[0], 175);
    }

    #[test]
    fn ties_go_to_low_indices() {
        let sexes = vec![Sex::Female, Sex::Male, Sex::Female, Sex::Male, Sex::Female, Sex::Male];
        let (f, m) = select_breeding_stock(&[1.0; 6], &sexes, 0.34, 0.34).unwrap();
        assert_eq!(f, vec![0]);
        assert_eq!(m, vec![1]);
    }

    #[test]
    fn minimum_of_one() {
        let sexes = vec![Sex::Female, Sex::Male, Sex::Male];
        let (f, m) = select_breeding_stock(&[0.0, 1.0, 2.0], &sexes, 0.01, 0.01).unwrap();
        assert_eq!((f, m), (vec![0], vec![2]));
        assert!(select_breeding_stock(&[0.0, 1.0], &[Sex::Male, Sex::Male], 0.3, 0.3).is_err());
    }

    proptest! {
        #[test]
        fn top_k_and_monotone_invariance(
            scores in prop::collection::vec(-100.0f64..100.0, 4..80),
            seed in 0u64..1000,
            frac in 0.05f64..1.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = scores.len();
            let mut sexes: Vec<Sex> = (0..n).map(|_| if rng.random::<bool>() { Sex::Female } else { Sex::Male }).collect();
            sexes[0] = Sex::Female;
            sexes[1] = Sex::Male;
            let (f, m) = select_breeding_stock(&scores, &sexes, frac, frac).unwrap();
            prop_assert!(f.iter().all(|&i| sexes[i] == Sex::Female));
            prop_assert!(m.iter().all(|&i| sexes[i] == Sex::Male));
            let unselected_m: Vec<usize> = (0..n).filter(|&i| sexes[i] == Sex::Male && !m.contains(&i)).collect();
            let min_sel = m.iter().map(|&i| scores[i]).fold(f64::INFINITY, f64::min);
            prop_assert!(unselected_m.iter().all(|&i| scores[i] <= min_sel));
            let transformed: Vec<f64> = scores.iter().map(|s| (s / 50.0).exp() * 3.0 - 7.0).collect();
            prop_assert_eq!(select_breeding_stock(&transformed, &sexes, frac, frac).unwrap(), (f, m));
        }
    }
}
