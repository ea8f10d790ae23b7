//! Environmental fixed effects on taxa CLR abundances.

use rand::seq::index;
use rand::Rng;

use super::cluster::TaxaClustering;
use crate::config::{EnvEffectSpec, TaxaScope};
use crate::error::{Error, Result};
use crate::genome::round_half_up;
use crate::Scalar;

/// Effect columns θ, one per effect, drawn once for the whole simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentEffects<T> {
    pub n_taxa: usize,
    /// Per effect, a length-`n_b` vector, zero outside the effect's taxa.
    pub theta: Vec<Vec<T>>,
    /// Per effect, the taxa it touches (ascending).
    pub taxa: Vec<Vec<usize>>,
}

fn resolve_scope<R: Rng + ?Sized>(
    scope: &TaxaScope,
    clustering: &TaxaClustering,
    taxon_ids: &[String],
    rng: &mut R,
) -> Result<Vec<usize>> {
    let v = clustering.n_clusters();
    let from_clusters = |ids: &[usize]| -> Vec<usize> {
        let mut t: Vec<usize> = ids.iter().flat_map(|&c| clustering.members(c)).collect();
        t.sort_unstable();
        t.dedup();
        t
    };
    match scope {
        TaxaScope::All => Ok((0..clustering.n_taxa()).collect()),
        TaxaScope::Clusters(ids) => {
            if let Some(c) = ids.iter().find(|&&c| c >= v) {
                return Err(Error::Config(format!("environment scope names cluster {c}, but only {v} exist")));
            }
            Ok(from_clusters(ids))
        }
        TaxaScope::Taxa(names) => {
            let mut t = Vec::with_capacity(names.len());
            for name in names {
                let s = taxon_ids
                    .iter()
                    .position(|id| id == name)
                    .ok_or_else(|| Error::Config(format!("environment scope names unknown taxon '{name}'")))?;
                t.push(s);
            }
            t.sort_unstable();
            t.dedup();
            Ok(t)
        }
        TaxaScope::RandomClusters(n) => {
            if *n == 0 || *n > v {
                return Err(Error::Config(format!("cannot pick {n} random clusters out of {v}")));
            }
            let ids = index::sample(rng, v, *n).into_vec();
            Ok(from_clusters(&ids))
        }
    }
}

impl<T: Scalar> EnvironmentEffects<T> {
    /// θ entries are N(0, effect_sd²) on the scoped taxa.
    pub fn draw<R: Rng + ?Sized>(
        specs: &[EnvEffectSpec],
        clustering: &TaxaClustering,
        taxon_ids: &[String],
        rng: &mut R,
    ) -> Result<Self> {
        let n_b = clustering.n_taxa();
        let mut theta = Vec::with_capacity(specs.len());
        let mut taxa = Vec::with_capacity(specs.len());
        for spec in specs {
            let scoped = resolve_scope(&spec.taxa_scope, clustering, taxon_ids, rng)?;
            let mut col = vec![T::zero(); n_b];
            let sd = T::lit(spec.effect_sd);
            for &s in &scoped {
                col[s] = sd * T::standard_normal(rng);
            }
            theta.push(col);
            taxa.push(scoped);
        }
        Ok(Self { n_taxa: n_b, theta, taxa })
    }

    /// `θ E_iᵀ` for individual `i` of `realization`.
    pub fn contribution(&self, realization: &EnvironmentRealization, i: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_taxa];
        for (k, col) in self.theta.iter().enumerate() {
            if realization.design[k][i] {
                out.iter_mut().zip(col).for_each(|(o, &t)| *o = *o + t);
            }
        }
        out
    }
}

/// Exposure design of one generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvironmentRealization {
    pub generation: usize,
    /// Per effect and individual: exposed in this generation.
    pub design: Vec<Vec<bool>>,
    /// Per effect, the inherited assignment of persistent effects once first drawn.
    pub assignment: Vec<Option<Vec<bool>>>,
}

impl EnvironmentRealization {
    /// No exposure at all (generation 0).
    pub fn none(n_specs: usize, n_ind: usize) -> Self {
        Self {
            generation: 0,
            design: vec![vec![false; n_ind]; n_specs],
            assignment: vec![None; n_specs],
        }
    }

    pub fn any_active(&self) -> bool {
        self.design.iter().any(|c| c.iter().any(|&e| e))
    }
}

fn draw_members<R: Rng + ?Sized>(n_ind: usize, fraction: f64, rng: &mut R) -> Vec<bool> {
    let k = round_half_up(fraction * n_ind as f64).min(n_ind);
    let mut m = vec![false; n_ind];
    for i in index::sample(rng, n_ind, k) {
        m[i] = true;
    }
    m
}

/// Exposure of generation `t`. Active specs mark exactly
/// `round(target_fraction · n_ind)` random individuals. Persistent specs
/// draw once, at their first active generation, and from then on each
/// offspring inherits its dam's assignment.
pub fn realize_environment<R: Rng + ?Sized>(
    specs: &[EnvEffectSpec],
    generation: usize,
    n_ind: usize,
    previous: Option<&EnvironmentRealization>,
    dams: &[usize],
    rng: &mut R,
) -> Result<EnvironmentRealization> {
    if generation == 0 {
        return Err(Error::Data("environmental effects apply from generation 1 onwards".into()));
    }
    let mut design = Vec::with_capacity(specs.len());
    let mut assignment = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let active = spec.is_active(generation);
        let inherited = previous.and_then(|p| p.assignment.get(k).cloned().flatten());
        let assigned = if spec.persistent_assignment {
            match inherited {
                Some(prev) => Some(dams.iter().map(|&d| prev[d]).collect::<Vec<bool>>()),
                None if active => Some(draw_members(n_ind, spec.target_fraction, rng)),
                None => None,
            }
        } else {
            None
        };
        let col = match (&assigned, active) {
            (_, false) => vec![false; n_ind],
            (Some(a), true) => a.clone(),
            (None, true) => draw_members(n_ind, spec.target_fraction, rng),
        };
        design.push(col);
        assignment.push(assigned);
    }
    Ok(EnvironmentRealization {
        generation,
        design,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(generations: Vec<usize>, scope: TaxaScope, persistent: bool) -> EnvEffectSpec {
        EnvEffectSpec {
            generations,
            target_fraction: 0.5,
            taxa_scope: scope,
            effect_sd: 5.0,
            persistent_assignment: persistent,
        }
    }

    fn clustering() -> TaxaClustering {
        TaxaClustering::from_assignment(vec![0, 1, 1, 2, 2, 2]).unwrap()
    }

    fn ids() -> Vec<String> {
        (0..6).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn theta_is_limited_to_scope() {
        let specs = vec![
            spec(vec![1], TaxaScope::Clusters(vec![1]), false),
            spec(vec![1], TaxaScope::Taxa(vec!["t5".into()]), false),
            spec(vec![1], TaxaScope::All, false),
        ];
        let e: EnvironmentEffects<f64> = EnvironmentEffects::draw(&specs, &clustering(), &ids(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let nz = |k: usize| -> Vec<usize> { (0..6).filter(|&s| e.theta[k][s] != 0.0).collect() };
        assert_eq!(nz(0), vec![1, 2]);
        assert_eq!(nz(1), vec![5]);
        assert_eq!(nz(2).len(), 6);
        let bad = vec![spec(vec![1], TaxaScope::Clusters(vec![9]), false)];
        assert!(EnvironmentEffects::<f64>::draw(&bad, &clustering(), &ids(), &mut ChaCha8Rng::seed_from_u64(1)).is_err());
        let bad = vec![spec(vec![1], TaxaScope::Taxa(vec!["nope".into()]), false)];
        assert!(EnvironmentEffects::<f64>::draw(&bad, &clustering(), &ids(), &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn theta_sd_matches_effect_sd() {
        let specs = vec![spec(vec![1], TaxaScope::All, false)];
        let big = TaxaClustering::from_assignment(vec![0; 20_000]).unwrap();
        let names: Vec<String> = (0..20_000).map(|i| i.to_string()).collect();
        let e: EnvironmentEffects<f64> = EnvironmentEffects::draw(&specs, &big, &names, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let sd = crate::stats::sd(&e.theta[0]);
        assert!((sd - 5.0).abs() < 0.1, "{sd}");
    }

    #[test]
    fn one_generation_pulse() {
        let specs = vec![spec(vec![1], TaxaScope::All, false)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dams: Vec<usize> = (0..500).collect();
        let g1 = realize_environment(&specs, 1, 500, None, &dams, &mut rng).unwrap();
        assert_eq!(g1.design[0].iter().filter(|&&e| e).count(), 250);
        let g2 = realize_environment(&specs, 2, 500, Some(&g1), &dams, &mut rng).unwrap();
        assert!(!g2.any_active());
        assert!(realize_environment(&specs, 0, 500, None, &dams, &mut rng).is_err());
    }

    #[test]
    fn persistent_assignment_follows_dams() {
        let specs = vec![spec(vec![1, 2], TaxaScope::All, true)];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g1 = realize_environment(&specs, 1, 10, None, &[0; 10], &mut rng).unwrap();
        let dams = [3, 3, 7, 1, 0, 9, 2, 2, 5, 4];
        let g2 = realize_environment(&specs, 2, 10, Some(&g1), &dams, &mut rng).unwrap();
        for (i, &d) in dams.iter().enumerate() {
            assert_eq!(g2.design[0][i], g1.design[0][d]);
        }
    }

    #[test]
    fn contribution_sums_exposed_columns() {
        let specs = vec![spec(vec![1], TaxaScope::All, false), spec(vec![1], TaxaScope::All, false)];
        let e: EnvironmentEffects<f64> = EnvironmentEffects::draw(&specs, &clustering(), &ids(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let r = EnvironmentRealization {
            generation: 1,
            design: vec![vec![true, false], vec![true, true]],
            assignment: vec![None, None],
        };
        let c0 = e.contribution(&r, 0);
        let c1 = e.contribution(&r, 1);
        for s in 0..6 {
            assert!((c0[s] - e.theta[0][s] - e.theta[1][s]).abs() < 1e-15);
            assert_eq!(c1[s], e.theta[1][s]);
        }
        assert!(e.contribution(&EnvironmentRealization::none(2, 2), 0).iter().all(|&v| v == 0.0));
    }
}
