//! Microbiota model. Offspring inherit a mix of dam and ambient pool, shifted
//! by host genetics on taxa clusters and by environmental effects.

mod beta;
mod cluster;
mod environment;

pub use beta::{
    build_beta, centered_genetic_term, default_qtl_per_cluster, format_beta_support, BetaMatrix, BetaRow,
    ClusterSupport,
};
pub use cluster::{
    cluster_from_dissimilarities, cluster_taxa, format_clusters, select_genetic_clusters, taxa_dissimilarities,
    TaxaClustering,
};
pub use environment::{realize_environment, EnvironmentEffects, EnvironmentRealization};

use rand::Rng;

use crate::composition::{clr, clr_inv, empirical_bayes_smooth, sample_dirichlet, ClrVector, Composition};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::genome::{self, GeneticMap, ParentPool, Sex};
use crate::io::{BaseInputs, CountMatrix};
use crate::{stats, Scalar};

/// Arithmetic mean of compositions.
pub fn mean_composition<T: Scalar>(comps: &[Composition<T>]) -> Composition<T> {
    assert!(!comps.is_empty(), "mean of no compositions");
    let n_b = comps[0].len();
    let n = T::from_count(comps.len());
    let mut acc = vec![T::zero(); n_b];
    for c in comps {
        acc.iter_mut().zip(c.values()).for_each(|(a, &v)| *a = *a + v);
    }
    let v: Vec<T> = acc.into_iter().map(|a| a / n).collect();
    let total: T = v.iter().copied().sum();
    Composition::new(v.into_iter().map(|x| x / total).collect()).expect("mean of compositions is a composition")
}

/// Smooths every base sample toward the mean of the relative abundances.
pub fn smooth_base_counts<T: Scalar>(counts: &CountMatrix, pi: T) -> Result<Vec<Composition<T>>> {
    let n = counts.n_ind();
    let n_b = counts.n_taxa();
    let mut acc = vec![0.0f64; n_b];
    for i in 0..n {
        let col = counts.column(i);
        let total: u64 = col.iter().sum();
        if total == 0 {
            return Err(Error::Data(format!("sample {i} has no counts")));
        }
        acc.iter_mut().zip(col).for_each(|(a, &k)| *a += k as f64 / total as f64);
    }
    let mean: Vec<T> = acc.iter().map(|a| T::lit(a / n as f64)).collect();
    if let Some(s) = mean.iter().position(|m| !(*m > T::zero())) {
        return Err(Error::Data(format!("taxon {s} is absent from every base sample")));
    }
    let total: T = mean.iter().copied().sum();
    let mean = Composition::new(mean.into_iter().map(|m| m / total).collect())?;
    (0..n).map(|i| empirical_bayes_smooth(counts.column(i), &mean, pi)).collect()
}

/// One individual's ambient composition `pi·Dir(eta·mean) + (1 − pi)·mean`.
pub fn ambient_microbiota<T: Scalar, R: Rng + ?Sized>(
    prev_mean: &Composition<T>,
    eta: T,
    pi: T,
    rng: &mut R,
) -> Composition<T> {
    let r = sample_dirichlet(prev_mean, eta, rng);
    r.mix(prev_mean, pi)
}

/// `clr_inv(clr(λ·dam + (1 − λ)·ambient) + offset)`.
pub fn transmit<T: Scalar>(dam: &Composition<T>, ambient: &Composition<T>, lambda: T, offset: &[T]) -> Composition<T> {
    let mut v = clr(&dam.mix(ambient, lambda));
    v.values_mut().iter_mut().zip(offset).for_each(|(x, &o)| *x = *x + o);
    clr_inv(&v)
}

/// Offspring composition. Environmental and genetic shifts plus N(0, σ_m²)
/// noise are added on the CLR scale.
pub fn simulate_microbiota<T: Scalar, R: Rng + ?Sized>(
    dam: &Composition<T>,
    ambient: &Composition<T>,
    lambda: T,
    env_contrib: &[T],
    genetic_contrib: &[T],
    sigma_m: T,
    rng: &mut R,
) -> Composition<T> {
    let n_b = dam.len();
    assert!(env_contrib.len() == n_b && genetic_contrib.len() == n_b, "contribution lengths differ from n_b");
    let offset: Vec<T> = env_contrib
        .iter()
        .zip(genetic_contrib)
        .map(|(&e, &g)| {
            let noise = if sigma_m > T::zero() { sigma_m * T::standard_normal(rng) } else { T::zero() };
            e + g + noise
        })
        .collect();
    transmit(dam, ambient, lambda, &offset)
}

/// CLR of every composition.
pub fn clr_matrix<T: Scalar>(comps: &[Composition<T>]) -> Vec<ClrVector<T>> {
    comps.iter().map(clr).collect()
}

/// Per-taxon heritability `var(genetic term) / var(CLR)` for each σ_β in
/// `sigma_grid`, from one generation of random mating out of the base.
///
/// Every grid point reuses the same offspring, β directions, ambient draws
/// and noise, so the profiles differ only through σ_β.
pub fn taxa_heritability_profile<T: Scalar, R: Rng + ?Sized>(
    base: &BaseInputs,
    clustering: &TaxaClustering,
    sigma_grid: &[f64],
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<Vec<T>>> {
    if sigma_grid.is_empty() {
        return Err(Error::Config("taxa heritability grid is empty".into()));
    }
    let n_g = base.n_snps();
    let n_b = base.n_taxa();
    let map = match &config.genetic_map {
        Some(p) => GeneticMap::load(p, &base.snp_ids)?,
        None => GeneticMap::uniform(n_g, 1.0),
    };
    let g0 = genome::phase_base_population(&base.genotypes, rng);
    let m0: Vec<Composition<T>> = smooth_base_counts(&base.taxa_counts, T::lit(config.pi))?;
    let sexes = genome::assign_sexes(base.n_individuals(), config.sex_ratio, rng);
    let females: Vec<usize> = (0..sexes.len()).filter(|&i| sexes[i] == Sex::Female).collect();
    let males: Vec<usize> = (0..sexes.len()).filter(|&i| sexes[i] == Sex::Male).collect();
    let n_ind = config.n_ind.unwrap_or(base.n_individuals());
    let pool = ParentPool {
        genotypes: &g0,
        ids: &base.individual_ids,
    };
    let kids = genome::build_generation(&pool, &females, &males, n_ind, config.sex_ratio, 1, &map, rng)?;
    let g1 = genome::dosage_matrix(&kids.genotypes);

    let qtl_o = config
        .qtl_o
        .unwrap_or_else(|| default_qtl_per_cluster(n_g, clustering.genetic_clusters().len()));
    let unit: BetaMatrix<T> = build_beta(clustering, n_g, qtl_o, T::one(), rng)?;
    let unit_term = centered_genetic_term(&unit, &g1);

    let prev_mean = mean_composition(&m0);
    let (eta, pi, lambda, sigma_m) = (T::lit(config.eta), T::lit(config.pi), T::lit(config.lambda), T::lit(config.sigma_m));
    let ambient: Vec<Composition<T>> = (0..n_ind).map(|_| ambient_microbiota(&prev_mean, eta, pi, rng)).collect();
    let noise: Vec<Vec<T>> = (0..n_ind)
        .map(|_| (0..n_b).map(|_| sigma_m * T::standard_normal(rng)).collect())
        .collect();

    let mut profiles = Vec::with_capacity(sigma_grid.len());
    for &sigma in sigma_grid {
        let sigma = T::lit(sigma);
        let mut clr_rows = Vec::with_capacity(n_ind);
        for i in 0..n_ind {
            let dam = kids.pedigree[i].dam_index.expect("offspring have dams");
            let offset: Vec<T> = (0..n_b).map(|s| sigma * unit_term[i][s] + noise[i][s]).collect();
            clr_rows.push(clr(&transmit(&m0[dam], &ambient[i], lambda, &offset)));
        }
        let h2 = (0..n_b)
            .map(|s| {
                let genetic: Vec<T> = unit_term.iter().map(|row| sigma * row[s]).collect();
                let total: Vec<T> = clr_rows.iter().map(|c| c.values()[s]).collect();
                let vt = stats::variance(&total);
                if vt > T::zero() {
                    stats::variance(&genetic) / vt
                } else {
                    T::zero()
                }
            })
            .collect();
        profiles.push(h2);
    }
    Ok(profiles)
}
