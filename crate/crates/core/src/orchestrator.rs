//! Simulation driver: base preparation, the generation loop and replicates.

use rand::Rng;
use rayon::prelude::*;

use crate::composition::{clr, multinomial_resample, shannon, shannon_of_counts, ClrVector, Composition};
use crate::config::{Depth, ScenarioConfig};
use crate::error::{Error, Result};
use crate::genome::{self, GeneticMap, ParentPool, PedigreeEntry, PhasedGenotype, Sex};
use crate::io::{BaseInputs, DosageMatrix};
use crate::microbiome::{
    self, build_beta, centered_genetic_term, cluster_taxa, default_qtl_per_cluster, realize_environment,
    select_genetic_clusters, BetaMatrix, EnvironmentEffects, EnvironmentRealization, TaxaClustering,
};
use crate::phenotype::{self, BreedingValues, Components, PhenotypeModel};
use crate::rng::Streams;
use crate::selection::{self, ScoreInputs};
use crate::Scalar;

/// Everything drawn once and then frozen for the whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectsModel<T> {
    pub clustering: TaxaClustering,
    pub qtl_per_cluster: usize,
    pub sigma_beta: f64,
    pub beta: BetaMatrix<T>,
    pub phenotype: PhenotypeModel<T>,
    pub environment: EnvironmentEffects<T>,
}

/// One generation of individuals with every derived quantity.
#[derive(Debug, Clone)]
pub struct GenerationRecord<T> {
    pub generation: usize,
    pub pedigree: Vec<PedigreeEntry>,
    pub genotypes: Vec<PhasedGenotype>,
    pub dosages: DosageMatrix,
    pub microbiota: Vec<Composition<T>>,
    pub clr: Vec<ClrVector<T>>,
    /// Counts resampled at the configured depth, used for diversity.
    pub counts: Vec<Vec<u32>>,
    pub phenotypes: Vec<T>,
    pub breeding_values: BreedingValues<T>,
    /// `ωᵀB` per individual.
    pub microbiota_effect: Vec<T>,
    /// Shannon index of the resampled counts.
    pub diversity: Vec<T>,
    pub components: Components,
    /// Mean composition of the previous generation (absent for the base).
    pub ambient_mean: Option<Composition<T>>,
    /// Shannon index of each individual's ambient composition (empty for the base).
    pub ambient_diversity: Vec<T>,
    pub environment: EnvironmentRealization,
    /// Chosen as a parent of the next generation.
    pub selected: Vec<bool>,
}

impl<T: Scalar> GenerationRecord<T> {
    pub fn len(&self) -> usize {
        self.pedigree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pedigree.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.pedigree.iter().map(|p| p.id.clone()).collect()
    }

    pub fn sexes(&self) -> Vec<Sex> {
        self.pedigree.iter().map(|p| p.sex).collect()
    }
}

/// A running simulation of one replicate.
#[derive(Debug, Clone)]
pub struct Simulation<T> {
    config: ScenarioConfig,
    replicate: u64,
    snp_ids: Vec<String>,
    taxon_ids: Vec<String>,
    map: GeneticMap,
    effects: EffectsModel<T>,
    records: Vec<GenerationRecord<T>>,
    streams: Streams,
}

fn diversity_of<T: Scalar, R: Rng + ?Sized>(comps: &[Composition<T>], depth: &Depth, rng: &mut R) -> (Vec<T>, Vec<Vec<u32>>) {
    let counts: Vec<Vec<u32>> = comps
        .iter()
        .enumerate()
        .map(|(i, c)| multinomial_resample(c, depth.for_individual(i), rng))
        .collect();
    let div = counts.iter().map(|k| shannon_of_counts::<T>(k)).collect();
    (div, counts)
}

/// Effective per-QTL scale of β.
pub fn effective_sigma_beta(config: &ScenarioConfig, qtl_per_cluster: usize) -> f64 {
    match config.sigma_beta_scaled {
        Some(s) => s / (qtl_per_cluster as f64).sqrt(),
        None => config.sigma_beta,
    }
}

/// Loads the configured genetic map, or the default one-Morgan map.
pub fn genetic_map_for(config: &ScenarioConfig, snp_ids: &[String]) -> Result<GeneticMap> {
    match &config.genetic_map {
        Some(p) => GeneticMap::load(p, snp_ids),
        None => Ok(GeneticMap::uniform(snp_ids.len(), 1.0)),
    }
}

impl<T: Scalar> Simulation<T> {
    /// Builds generation 0 of replicate `replicate`.
    pub fn prepare_base(inputs: &BaseInputs, config: &ScenarioConfig, replicate: u64) -> Result<Self> {
        Self::prepare_base_with(inputs, config, replicate, None)
    }

    /// As [`Simulation::prepare_base`], reusing a precomputed taxa clustering
    /// (the clustering involves no randomness, so replicates can share it).
    pub fn prepare_base_with(
        inputs: &BaseInputs,
        config: &ScenarioConfig,
        replicate: u64,
        clustering: Option<&TaxaClustering>,
    ) -> Result<Self> {
        config.validate()?;
        inputs.validate()?;
        let n = inputs.n_individuals();
        if n < 2 {
            return Err(Error::Data("the base population needs at least two individuals".into()));
        }
        let n_g = inputs.n_snps();
        let n_b = inputs.n_taxa();
        let mut streams = Streams::new(config.seed, replicate);
        let map = genetic_map_for(config, &inputs.snp_ids)?;

        let genotypes = genome::phase_base_population(&inputs.genotypes, &mut streams.genome);
        let sexes = genome::assign_sexes(n, config.sex_ratio, &mut streams.genome);
        let microbiota: Vec<Composition<T>> = microbiome::smooth_base_counts(&inputs.taxa_counts, T::lit(config.pi))?;

        let clustering = match clustering {
            Some(c) => c.clone(),
            None => cluster_taxa(&inputs.taxa_counts, config.n_clusters)?,
        };
        if clustering.n_taxa() != n_b {
            return Err(Error::Data("clustering does not match the taxa of the base population".into()));
        }
        let clustering = select_genetic_clusters(
            clustering,
            config.otu_g,
            config.cluster_size_min,
            config.cluster_size_max,
            &mut streams.effects,
        )?;
        let qtl_per_cluster = config
            .qtl_o
            .unwrap_or_else(|| default_qtl_per_cluster(n_g, clustering.genetic_clusters().len()));
        let sigma_beta = effective_sigma_beta(config, qtl_per_cluster);
        let beta = build_beta(&clustering, n_g, qtl_per_cluster, T::lit(sigma_beta), &mut streams.effects)?;
        let (alpha_raw, omega_raw) =
            phenotype::sample_effects::<T, _>(n_g, config.qtl_y, n_b, clustering.genetic_taxa(), &mut streams.effects)?;
        let environment = EnvironmentEffects::draw(&config.env_effects, &clustering, &inputs.taxon_ids, &mut streams.environment)?;

        let dosages = inputs.genotypes.clone();
        let clr_rows: Vec<ClrVector<T>> = microbiota.iter().map(clr).collect();
        let residual: Vec<T> = phenotype::draw_residuals(n, &mut streams.phenotype);
        let model = phenotype::calibrate(&alpha_raw, &omega_raw, &dosages, &clr_rows, Some(&residual), config.h2_d, config.b2)?;
        let phenotypes = phenotype::phenotypes_with_residual(&model, &dosages, &clr_rows, &residual);
        let breeding_values = phenotype::breeding_values(&model, &beta, &dosages);
        let microbiota_effect = phenotype::microbiota_values(&model.omega, &clr_rows);
        let components = phenotype::realized_components(&breeding_values, &microbiota_effect, &phenotypes)?;
        let (diversity, counts) = diversity_of(&microbiota, &config.depth, &mut streams.diversity);

        let pedigree = inputs
            .individual_ids
            .iter()
            .zip(&sexes)
            .map(|(id, &sex)| PedigreeEntry {
                id: id.clone(),
                generation: 0,
                sire: None,
                dam: None,
                sire_index: None,
                dam_index: None,
                sex,
            })
            .collect();
        let record = GenerationRecord {
            generation: 0,
            pedigree,
            genotypes,
            dosages,
            microbiota,
            clr: clr_rows,
            counts,
            phenotypes,
            breeding_values,
            microbiota_effect,
            diversity,
            components,
            ambient_mean: None,
            ambient_diversity: Vec::new(),
            environment: EnvironmentRealization::none(config.env_effects.len(), n),
            selected: vec![false; n],
        };
        Ok(Self {
            config: config.clone(),
            replicate,
            snp_ids: inputs.snp_ids.clone(),
            taxon_ids: inputs.taxon_ids.clone(),
            map,
            effects: EffectsModel {
                clustering,
                qtl_per_cluster,
                sigma_beta,
                beta,
                phenotype: model,
                environment,
            },
            records: vec![record],
            streams,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    pub fn effects(&self) -> &EffectsModel<T> {
        &self.effects
    }

    pub fn records(&self) -> &[GenerationRecord<T>] {
        &self.records
    }

    pub fn into_records(self) -> Vec<GenerationRecord<T>> {
        self.records
    }

    pub fn snp_ids(&self) -> &[String] {
        &self.snp_ids
    }

    pub fn taxon_ids(&self) -> &[String] {
        &self.taxon_ids
    }

    pub fn current(&self) -> &GenerationRecord<T> {
        self.records.last().expect("a simulation always has a base generation")
    }

    fn choose_parents(&mut self) -> Result<(Vec<usize>, Vec<usize>)> {
        let cfg = &self.config;
        let rec = self.records.last().expect("base generation");
        let sexes = rec.sexes();
        if rec.generation == 0 && !cfg.select_from_g0 {
            let f: Vec<usize> = (0..sexes.len()).filter(|&i| sexes[i] == Sex::Female).collect();
            let m: Vec<usize> = (0..sexes.len()).filter(|&i| sexes[i] == Sex::Male).collect();
            return Ok((f, m));
        }
        let inputs = ScoreInputs {
            breeding_values: Some(&rec.breeding_values),
            microbiota_effect: Some(&rec.microbiota_effect),
            diversity: Some(&rec.diversity),
        };
        let s = selection::score(
            cfg.selection,
            &inputs,
            rec.len(),
            cfg.w_div,
            cfg.mixed_index_standardize,
            &mut self.streams.selection,
        )?;
        selection::select_breeding_stock(&s.scores, &sexes, cfg.size_selection_f, cfg.size_selection_m)
    }

    /// Produces generation `t + 1` from the current generation `t`.
    pub fn advance_generation(&mut self) -> Result<()> {
        let (females, males) = self.choose_parents()?;
        {
            let rec = self.records.last_mut().expect("base generation");
            for &i in females.iter().chain(&males) {
                rec.selected[i] = true;
            }
        }
        let cfg = &self.config;
        let parent = self.records.last().expect("base generation");
        let t = parent.generation + 1;
        let n_ind = cfg.n_ind.unwrap_or(parent.len());
        let parent_ids = parent.ids();
        let pool = ParentPool {
            genotypes: &parent.genotypes,
            ids: &parent_ids,
        };
        let kids = genome::build_generation(&pool, &females, &males, n_ind, cfg.sex_ratio, t, &self.map, &mut self.streams.genome)?;
        let dosages = genome::dosage_matrix(&kids.genotypes);
        let dams: Vec<usize> = kids.pedigree.iter().map(|p| p.dam_index.expect("offspring have dams")).collect();

        let prev_mean = microbiome::mean_composition(&parent.microbiota);
        let environment = realize_environment(&cfg.env_effects, t, n_ind, Some(&parent.environment), &dams, &mut self.streams.environment)?;
        let genetic = centered_genetic_term(&self.effects.beta, &dosages);
        let (eta, pi, lambda, sigma_m) = (T::lit(cfg.eta), T::lit(cfg.pi), T::lit(cfg.lambda), T::lit(cfg.sigma_m));
        let mut microbiota = Vec::with_capacity(n_ind);
        let mut ambient_diversity = Vec::with_capacity(n_ind);
        for i in 0..n_ind {
            let rng = &mut self.streams.microbiome;
            let ambient = microbiome::ambient_microbiota(&prev_mean, eta, pi, rng);
            ambient_diversity.push(shannon(ambient.values()));
            let env = self.effects.environment.contribution(&environment, i);
            microbiota.push(microbiome::simulate_microbiota(
                &parent.microbiota[dams[i]],
                &ambient,
                lambda,
                &env,
                &genetic[i],
                sigma_m,
                rng,
            ));
        }
        let clr_rows: Vec<ClrVector<T>> = microbiota.iter().map(clr).collect();
        let model = &self.effects.phenotype;
        let phenotypes = phenotype::compute_phenotypes(model, &dosages, &clr_rows, &mut self.streams.phenotype);
        let breeding_values = phenotype::breeding_values(model, &self.effects.beta, &dosages);
        let microbiota_effect = phenotype::microbiota_values(&model.omega, &clr_rows);
        let components = phenotype::realized_components(&breeding_values, &microbiota_effect, &phenotypes)?;
        let (diversity, counts) = diversity_of(&microbiota, &cfg.depth, &mut self.streams.diversity);

        self.records.push(GenerationRecord {
            generation: t,
            pedigree: kids.pedigree,
            genotypes: kids.genotypes,
            dosages,
            microbiota,
            clr: clr_rows,
            counts,
            phenotypes,
            breeding_values,
            microbiota_effect,
            diversity,
            components,
            ambient_mean: Some(prev_mean),
            ambient_diversity,
            environment,
            selected: vec![false; n_ind],
        });
        Ok(())
    }

    /// Advances until generation `n_gen` exists.
    pub fn run_to_end(&mut self) -> Result<()> {
        while self.current().generation < self.config.n_gen {
            self.advance_generation()?;
        }
        Ok(())
    }

    /// Drops haplotypes of generations that can no longer be parents.
    pub fn release_old_haplotypes(&mut self) {
        let last = self.records.len().saturating_sub(1);
        for r in &mut self.records[..last] {
            r.genotypes = Vec::new();
        }
    }
}

/// Base preparation followed by `n_gen` generation steps (replicate 0).
pub fn run_simulation<T: Scalar>(inputs: &BaseInputs, config: &ScenarioConfig) -> Result<Simulation<T>> {
    run_replicate(inputs, config, 0, None)
}

fn run_replicate<T: Scalar>(
    inputs: &BaseInputs,
    config: &ScenarioConfig,
    replicate: u64,
    clustering: Option<&TaxaClustering>,
) -> Result<Simulation<T>> {
    let mut sim = Simulation::prepare_base_with(inputs, config, replicate, clustering)?;
    sim.run_to_end()?;
    Ok(sim)
}

/// Runs replicates `0..n_reps` on at most `parallelism` threads and maps each
/// finished simulation through `reduce`. Results come back in replicate
/// order; a failing replicate does not stop the others.
pub fn run_replicates_with<T, U, F>(
    inputs: &BaseInputs,
    config: &ScenarioConfig,
    n_reps: usize,
    parallelism: usize,
    reduce: F,
) -> Result<Vec<Result<U>>>
where
    T: Scalar,
    U: Send,
    F: Fn(Simulation<T>) -> Result<U> + Sync,
{
    if n_reps == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    config.validate()?;
    inputs.validate()?;
    let clustering = cluster_taxa(&inputs.taxa_counts, config.n_clusters)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    let out = pool.install(|| {
        (0..n_reps)
            .into_par_iter()
            .map(|r| run_replicate::<T>(inputs, config, r as u64, Some(&clustering)).and_then(&reduce))
            .collect::<Vec<_>>()
    });
    for (r, res) in out.iter().enumerate() {
        if let Err(e) = res {
            log::error!("replicate {r} failed: {e}");
        }
    }
    Ok(out)
}

/// Full simulations of every replicate plus per-generation aggregates.
pub struct ReplicateResults<T> {
    pub runs: Vec<Result<Simulation<T>>>,
    pub aggregate: Vec<crate::reporting::AggregateSummary>,
}

/// Runs replicates and keeps every record. Prefer [`run_replicates_with`]
/// when only summaries are needed.
pub fn run_replicates<T: Scalar>(
    inputs: &BaseInputs,
    config: &ScenarioConfig,
    n_reps: usize,
    parallelism: usize,
) -> Result<ReplicateResults<T>> {
    let runs = run_replicates_with(inputs, config, n_reps, parallelism, Ok)?;
    let summaries: Vec<Vec<crate::reporting::GenerationSummary>> = runs
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|s| crate::reporting::summarize_run(s.records(), s.replicate()))
        .collect();
    let aggregate = crate::reporting::aggregate(&summaries);
    Ok(ReplicateResults { runs, aggregate })
}
