//! Per-generation exports, run summaries, plot-ready tables and the run manifest.
//!
//! Output layout of a run directory:
//!
//! ```text
//! out/
//!   manifest.json        checksums, config snapshot, timing
//!   summary.jsonl        one GenerationSummary per replicate and generation
//!   aggregate.jsonl      one AggregateSummary per generation
//!   rep_000/
//!     alpha.tsv omega.tsv clusters.tsv beta_support.tsv [environment.tsv]
//!     G0/ genotypes.tsv microbiota.tsv [counts.tsv] [clr.tsv] phenotypes.tsv pedigree.tsv
//!     G1/ ...
//! ```
//!
//! Summaries are computed from the phenotype tables alone, so recomputing
//! them from an exported run reproduces `summary.jsonl` byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::composition::{bray_curtis, pcoa};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::genome::Sex;
use crate::io::{format_counts, format_dosages, format_real, format_reals};
use crate::microbiome::{centered_genetic_term, format_beta_support, format_clusters};
use crate::orchestrator::{GenerationRecord, Simulation};
use crate::phenotype::format_effects;
use crate::stats::{self, MeanInterval};
use crate::Scalar;

/// Column set of `phenotypes.tsv`.
pub const PHENOTYPE_COLUMNS: [&str; 11] = [
    "id",
    "sex",
    "dam",
    "sire",
    "phenotype",
    "bv_d",
    "bv_m",
    "bv_t",
    "microbiota_effect",
    "diversity",
    "selected",
];

const MISSING: &str = "NA";

/// The per-individual table behind every summary.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeTable {
    pub generation: usize,
    pub ids: Vec<String>,
    pub sexes: Vec<Sex>,
    pub dams: Vec<Option<String>>,
    pub sires: Vec<Option<String>>,
    pub phenotype: Vec<f64>,
    pub bv_d: Vec<f64>,
    pub bv_m: Vec<f64>,
    pub bv_t: Vec<f64>,
    pub microbiota_effect: Vec<f64>,
    pub diversity: Vec<f64>,
    pub selected: Vec<bool>,
}

fn to64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

pub fn phenotype_table<T: Scalar>(record: &GenerationRecord<T>) -> PhenotypeTable {
    PhenotypeTable {
        generation: record.generation,
        ids: record.ids(),
        sexes: record.sexes(),
        dams: record.pedigree.iter().map(|p| p.dam.clone()).collect(),
        sires: record.pedigree.iter().map(|p| p.sire.clone()).collect(),
        phenotype: to64(&record.phenotypes),
        bv_d: to64(&record.breeding_values.bv_d),
        bv_m: to64(&record.breeding_values.bv_m),
        bv_t: to64(&record.breeding_values.bv_t),
        microbiota_effect: to64(&record.microbiota_effect),
        diversity: to64(&record.diversity),
        selected: record.selected.clone(),
    }
}

pub fn format_phenotype_table(t: &PhenotypeTable) -> String {
    let mut out = PHENOTYPE_COLUMNS.join("\t");
    out.push('\n');
    for i in 0..t.ids.len() {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}",
            t.ids[i],
            t.sexes[i],
            t.dams[i].as_deref().unwrap_or(MISSING),
            t.sires[i].as_deref().unwrap_or(MISSING)
        );
        for col in [&t.phenotype, &t.bv_d, &t.bv_m, &t.bv_t, &t.microbiota_effect, &t.diversity] {
            out.push('\t');
            out.push_str(&format_real(col[i]));
        }
        out.push_str(if t.selected[i] { "\t1\n" } else { "\t0\n" });
    }
    out
}

fn parse_sex(s: &str) -> Result<Sex> {
    match s {
        "F" => Ok(Sex::Female),
        "M" => Ok(Sex::Male),
        other => Err(Error::Data(format!("unknown sex code '{other}'"))),
    }
}

fn parent(s: &str) -> Option<String> {
    (s != MISSING).then(|| s.to_string())
}

/// Parses a `phenotypes.tsv` of generation `generation`.
pub fn parse_phenotype_table(text: &str, generation: usize) -> Result<PhenotypeTable> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Data("empty phenotype table".into()))?.split('\t').collect();
    if header != PHENOTYPE_COLUMNS {
        return Err(Error::Data(format!("unexpected phenotype table header: {}", header.join(","))));
    }
    let mut t = PhenotypeTable {
        generation,
        ids: Vec::new(),
        sexes: Vec::new(),
        dams: Vec::new(),
        sires: Vec::new(),
        phenotype: Vec::new(),
        bv_d: Vec::new(),
        bv_m: Vec::new(),
        bv_t: Vec::new(),
        microbiota_effect: Vec::new(),
        diversity: Vec::new(),
        selected: Vec::new(),
    };
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != PHENOTYPE_COLUMNS.len() {
            return Err(Error::Data(format!("phenotype table row {} has {} fields", n + 2, f.len())));
        }
        let real = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Data(format!("phenotype table row {}: '{s}' is not a number", n + 2)))
        };
        t.ids.push(f[0].to_string());
        t.sexes.push(parse_sex(f[1])?);
        t.dams.push(parent(f[2]));
        t.sires.push(parent(f[3]));
        t.phenotype.push(real(f[4])?);
        t.bv_d.push(real(f[5])?);
        t.bv_m.push(real(f[6])?);
        t.bv_t.push(real(f[7])?);
        t.microbiota_effect.push(real(f[8])?);
        t.diversity.push(real(f[9])?);
        t.selected.push(match f[10] {
            "1" => true,
            "0" => false,
            other => return Err(Error::Data(format!("selected flag must be 0 or 1, got '{other}'"))),
        });
    }
    Ok(t)
}

/// One line of `summary.jsonl`.
///
/// * `mean_*`, `sd_*`: within-generation moments (sd with n − 1).
/// * `h2_d`, `b2`, `h2_total`: var(BV_d), var(ωᵀB), var(BV_t) over var(y).
/// * `phenotype_change_sd`: (mean y_t − mean y_0) / sd y_0.
/// * `diversity_change`: mean δ_t − mean δ_0; `diversity_change_relative` divides by mean δ_0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub replicate: u64,
    pub generation: usize,
    pub n: usize,
    pub mean_phenotype: f64,
    pub sd_phenotype: f64,
    pub mean_diversity: f64,
    pub sd_diversity: f64,
    pub mean_bv_t: f64,
    pub sd_bv_t: f64,
    pub mean_bv_d: f64,
    pub mean_bv_m: f64,
    pub mean_microbiota_effect: f64,
    pub h2_d: f64,
    pub b2: f64,
    pub h2_total: f64,
    pub phenotype_change_sd: f64,
    pub diversity_change: f64,
    pub diversity_change_relative: f64,
}

/// Summaries of one replicate from its phenotype tables (first table is the
/// reference generation for change series).
pub fn summarize_tables(tables: &[PhenotypeTable], replicate: u64) -> Vec<GenerationSummary> {
    let Some(first) = tables.first() else {
        return Vec::new();
    };
    let (y0, sd0, d0) = (stats::mean(&first.phenotype), stats::sd(&first.phenotype), stats::mean(&first.diversity));
    tables
        .iter()
        .map(|t| {
            let vy = stats::variance(&t.phenotype);
            let (my, md) = (stats::mean(&t.phenotype), stats::mean(&t.diversity));
            GenerationSummary {
                replicate,
                generation: t.generation,
                n: t.ids.len(),
                mean_phenotype: my,
                sd_phenotype: vy.sqrt(),
                mean_diversity: md,
                sd_diversity: stats::sd(&t.diversity),
                mean_bv_t: stats::mean(&t.bv_t),
                sd_bv_t: stats::sd(&t.bv_t),
                mean_bv_d: stats::mean(&t.bv_d),
                mean_bv_m: stats::mean(&t.bv_m),
                mean_microbiota_effect: stats::mean(&t.microbiota_effect),
                h2_d: stats::variance(&t.bv_d) / vy,
                b2: stats::variance(&t.microbiota_effect) / vy,
                h2_total: stats::variance(&t.bv_t) / vy,
                phenotype_change_sd: (my - y0) / sd0,
                diversity_change: md - d0,
                diversity_change_relative: (md - d0) / d0,
            }
        })
        .collect()
}

/// Summaries of one replicate's records.
pub fn summarize_run<T: Scalar>(records: &[GenerationRecord<T>], replicate: u64) -> Vec<GenerationSummary> {
    let tables: Vec<PhenotypeTable> = records.iter().map(phenotype_table).collect();
    summarize_tables(&tables, replicate)
}

/// One line of `aggregate.jsonl`: replicate means with 95% intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub generation: usize,
    pub replicates: usize,
    pub mean_phenotype: MeanInterval,
    pub phenotype_change_sd: MeanInterval,
    pub mean_diversity: MeanInterval,
    pub diversity_change: MeanInterval,
    pub diversity_change_relative: MeanInterval,
    pub mean_bv_t: MeanInterval,
    pub h2_d: MeanInterval,
    pub b2: MeanInterval,
    pub h2_total: MeanInterval,
}

/// Per-generation reduction over replicates, in the order given.
pub fn aggregate(runs: &[Vec<GenerationSummary>]) -> Vec<AggregateSummary> {
    let n_gen = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..n_gen)
        .map(|t| {
            let rows: Vec<&GenerationSummary> = runs.iter().filter_map(|r| r.get(t)).collect();
            let col = |f: fn(&GenerationSummary) -> f64| stats::mean_interval(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            AggregateSummary {
                generation: rows[0].generation,
                replicates: rows.len(),
                mean_phenotype: col(|r| r.mean_phenotype),
                phenotype_change_sd: col(|r| r.phenotype_change_sd),
                mean_diversity: col(|r| r.mean_diversity),
                diversity_change: col(|r| r.diversity_change),
                diversity_change_relative: col(|r| r.diversity_change_relative),
                mean_bv_t: col(|r| r.mean_bv_t),
                h2_d: col(|r| r.h2_d),
                b2: col(|r| r.b2),
                h2_total: col(|r| r.h2_total),
            }
        })
        .collect()
}

/// One JSON object per line.
pub fn to_json_lines<S: Serialize>(items: &[S]) -> Result<String> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).map_err(|e| Error::Numerical(format!("cannot serialize summary: {e}")))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_json_lines<S: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<S>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Data(format!("summary line {}: {e}", i + 1))))
        .collect()
}

/// Optional per-generation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportOptions {
    pub counts: bool,
    pub clr: bool,
}

impl ExportOptions {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            counts: config.export_counts,
            clr: config.export_clr,
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Pedigree with the selected flag: `id generation sex dam sire selected`.
pub fn format_pedigree<T: Scalar>(record: &GenerationRecord<T>) -> String {
    let mut out = String::from("id\tgeneration\tsex\tdam\tsire\tselected\n");
    for (p, &s) in record.pedigree.iter().zip(&record.selected) {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.id,
            p.generation,
            p.sex,
            p.dam.as_deref().unwrap_or(MISSING),
            p.sire.as_deref().unwrap_or(MISSING),
            u8::from(s)
        );
    }
    out
}

/// Writes one generation's tables into `dir` (created if needed).
pub fn export_generation<T: Scalar>(
    record: &GenerationRecord<T>,
    snp_ids: &[String],
    taxon_ids: &[String],
    dir: &Path,
    opts: ExportOptions,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let ids = record.ids();
    let mut files = vec![write_file(&dir.join("genotypes.tsv"), &format_dosages(snp_ids, &ids, &record.dosages))?];
    let comps: Vec<&[T]> = record.microbiota.iter().map(|c| c.values()).collect();
    files.push(write_file(&dir.join("microbiota.tsv"), &format_reals("taxon", taxon_ids, &ids, &comps))?);
    if opts.counts {
        let counts: Vec<&[u32]> = record.counts.iter().map(Vec::as_slice).collect();
        files.push(write_file(&dir.join("counts.tsv"), &format_counts(taxon_ids, &ids, &counts))?);
    }
    if opts.clr {
        let rows: Vec<&[T]> = record.clr.iter().map(|c| c.values()).collect();
        files.push(write_file(&dir.join("clr.tsv"), &format_reals("taxon", taxon_ids, &ids, &rows))?);
    }
    files.push(write_file(&dir.join("phenotypes.tsv"), &format_phenotype_table(&phenotype_table(record)))?);
    files.push(write_file(&dir.join("pedigree.tsv"), &format_pedigree(record))?);
    Ok(files)
}

/// Frozen effects of a replicate: α, ω, clusters, β support and θ.
pub fn export_effects<T: Scalar>(sim: &Simulation<T>, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let fx = sim.effects();
    let mut files = vec![
        write_file(&dir.join("alpha.tsv"), &format_effects(sim.snp_ids(), &fx.phenotype.alpha))?,
        write_file(&dir.join("omega.tsv"), &format_effects(sim.taxon_ids(), &fx.phenotype.omega))?,
        write_file(&dir.join("clusters.tsv"), &format_clusters(sim.taxon_ids(), &fx.clustering))?,
        write_file(&dir.join("beta_support.tsv"), &format_beta_support(sim.taxon_ids(), sim.snp_ids(), &fx.beta))?,
    ];
    if !fx.environment.theta.is_empty() {
        let names: Vec<String> = (0..fx.environment.theta.len()).map(|k| format!("env{k}")).collect();
        let cols: Vec<&[T]> = fx.environment.theta.iter().map(Vec::as_slice).collect();
        files.push(write_file(&dir.join("environment.tsv"), &format_reals("taxon", sim.taxon_ids(), &names, &cols))?);
    }
    Ok(files)
}

/// Directory of replicate `r` under a run root.
pub fn replicate_dir(root: &Path, replicate: u64) -> PathBuf {
    root.join(format!("rep_{replicate:03}"))
}

/// Effects plus every generation of one replicate.
pub fn export_replicate<T: Scalar>(sim: &Simulation<T>, root: &Path, opts: ExportOptions) -> Result<Vec<PathBuf>> {
    let dir = replicate_dir(root, sim.replicate());
    let mut files = export_effects(sim, &dir)?;
    for r in sim.records() {
        files.extend(export_generation(r, sim.snp_ids(), sim.taxon_ids(), &dir.join(format!("G{}", r.generation)), opts)?);
    }
    Ok(files)
}

fn numbered_dirs(dir: &Path, prefix: &str) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let e = e.map_err(|e| Error::io(dir, e))?;
        let name = e.file_name().to_string_lossy().into_owned();
        if let Some(n) = name.strip_prefix(prefix).and_then(|s| s.parse::<u64>().ok()) {
            if e.path().is_dir() {
                out.push((n, e.path()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Recomputes every replicate's summaries from the exported phenotype tables.
pub fn replay_summaries(root: &Path) -> Result<Vec<Vec<GenerationSummary>>> {
    let reps = numbered_dirs(root, "rep_")?;
    if reps.is_empty() {
        return Err(Error::Data(format!("no replicate directories under {}", root.display())));
    }
    reps.into_iter()
        .map(|(r, dir)| {
            let tables = numbered_dirs(&dir, "G")?
                .into_iter()
                .map(|(t, gdir)| {
                    let p = gdir.join("phenotypes.tsv");
                    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    parse_phenotype_table(&text, t as usize)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize_tables(&tables, r))
        })
        .collect()
}

/// A file listed in the manifest, with its path relative to the run root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub seed: u64,
    pub replicates: usize,
    pub failed_replicates: Vec<u64>,
    /// `key = value` snapshot of the scenario.
    pub config: String,
    pub files: Vec<ManifestFile>,
    pub wall_clock_seconds: f64,
    pub peak_memory_bytes: Option<u64>,
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

/// Peak resident set size of this process, where the platform reports it.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

impl RunManifest {
    /// Checksums `files` (sorted by relative path) under `root`.
    pub fn build(
        root: &Path,
        files: &[PathBuf],
        config: &ScenarioConfig,
        failed_replicates: Vec<u64>,
        wall_clock_seconds: f64,
    ) -> Result<Self> {
        let mut entries = files
            .iter()
            .map(|f| {
                let rel = f.strip_prefix(root).unwrap_or(f);
                let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                let (bytes, sha256) = sha256_file(f)?;
                Ok(ManifestFile { path, bytes, sha256 })
            })
            .collect::<Result<Vec<_>>>()?;
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Self {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            replicates: config.replicates,
            failed_replicates,
            config: config.to_text(),
            files: entries,
            wall_clock_seconds,
            peak_memory_bytes: peak_memory_bytes(),
        })
    }

    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(format!("cannot serialize manifest: {e}")))?;
        write_file(&root.join("manifest.json"), &(text + "\n"))
    }

    pub fn load(root: &Path) -> Result<Self> {
        let p = root.join("manifest.json");
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", p.display())))
    }

    /// Every listed file exists, is non-empty and matches its checksum.
    pub fn verify(&self, root: &Path) -> Result<()> {
        for f in &self.files {
            let p = root.join(&f.path);
            let (bytes, sha) = sha256_file(&p)?;
            if bytes == 0 || bytes != f.bytes || sha != f.sha256 {
                return Err(Error::Data(format!("{} does not match the manifest", f.path)));
            }
        }
        Ok(())
    }
}

/// Offspring diversity correlated with the dam's, the sire's and the
/// offspring's own ambient composition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionCorrelations {
    pub mother: f64,
    pub father: f64,
    pub ambient: f64,
}

pub fn transmission_correlations<T: Scalar>(parents: &GenerationRecord<T>, offspring: &GenerationRecord<T>) -> Result<TransmissionCorrelations> {
    if offspring.ambient_diversity.len() != offspring.len() {
        return Err(Error::Data("offspring generation has no ambient record".into()));
    }
    let child = to64(&offspring.diversity);
    let mut dam = Vec::with_capacity(child.len());
    let mut sire = Vec::with_capacity(child.len());
    for p in &offspring.pedigree {
        let (d, s) = p
            .dam_index
            .zip(p.sire_index)
            .ok_or_else(|| Error::Data(format!("{} has no recorded parents", p.id)))?;
        if d >= parents.len() || s >= parents.len() {
            return Err(Error::Data(format!("{} has parents outside the parent generation", p.id)));
        }
        dam.push(parents.diversity[d].as_f64());
        sire.push(parents.diversity[s].as_f64());
    }
    Ok(TransmissionCorrelations {
        mother: stats::correlation(&child, &dam),
        father: stats::correlation(&child, &sire),
        ambient: stats::correlation(&child, &to64(&offspring.ambient_diversity)),
    })
}

/// Group label of each individual for ordination plots.
pub fn exposure_groups<T: Scalar>(record: &GenerationRecord<T>) -> Vec<&'static str> {
    (0..record.len())
        .map(|i| {
            if record.generation == 0 {
                "base"
            } else if record.environment.design.iter().any(|d| d[i]) {
                "exposed"
            } else {
                "unexposed"
            }
        })
        .collect()
}

/// Bray–Curtis PCoA of one generation's compositions, two axes per individual.
pub fn pcoa_generation<T: Scalar>(record: &GenerationRecord<T>) -> Result<Vec<Vec<f64>>> {
    let comps: Vec<Vec<f64>> = record.microbiota.iter().map(|c| to64(c.values())).collect();
    let n = comps.len();
    let mut d = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = bray_curtis(&comps[i], &comps[j])?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    pcoa(&d, 2.min(n.saturating_sub(1)).max(1))
}

/// Distance between two group centroids against the mean distance of points
/// to their own centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidSeparation {
    pub between: f64,
    pub within: f64,
}

pub fn centroid_separation(coords: &[Vec<f64>], in_group: &[bool]) -> Result<CentroidSeparation> {
    let dim = coords.first().map_or(0, Vec::len);
    let centroid = |flag: bool| -> Result<Vec<f64>> {
        let pts: Vec<&Vec<f64>> = coords.iter().zip(in_group).filter(|(_, &g)| g == flag).map(|(c, _)| c).collect();
        if pts.is_empty() {
            return Err(Error::Data("centroid separation needs two non-empty groups".into()));
        }
        Ok((0..dim).map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / pts.len() as f64).collect())
    };
    let (a, b) = (centroid(true)?, centroid(false)?);
    let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let within = coords
        .iter()
        .zip(in_group)
        .map(|(c, &g)| dist(c, if g { &a } else { &b }))
        .sum::<f64>()
        / coords.len() as f64;
    Ok(CentroidSeparation {
        between: dist(&a, &b),
        within,
    })
}

/// Per-taxon `var(centered βG) / var(CLR)` of one generation.
pub fn taxa_heritability<T: Scalar>(sim: &Simulation<T>, record: &GenerationRecord<T>) -> Vec<f64> {
    let genetic = centered_genetic_term(&sim.effects().beta, &record.dosages);
    let n_b = sim.taxon_ids().len();
    (0..n_b)
        .map(|s| {
            let g: Vec<f64> = genetic.iter().map(|row| row[s].as_f64()).collect();
            let b: Vec<f64> = record.clr.iter().map(|c| c.values()[s].as_f64()).collect();
            let vb = stats::variance(&b);
            if vb > 0.0 {
                stats::variance(&g) / vb
            } else {
                0.0
            }
        })
        .collect()
}

/// Plot-ready table kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    DiversityDensity,
    Pcoa,
    ResponseCurves,
    HeritabilityDensity,
    LambdaCorrelations,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        PlotKind::DiversityDensity,
        PlotKind::Pcoa,
        PlotKind::ResponseCurves,
        PlotKind::HeritabilityDensity,
        PlotKind::LambdaCorrelations,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::DiversityDensity => "diversity_density",
            PlotKind::Pcoa => "pcoa",
            PlotKind::ResponseCurves => "response_curves",
            PlotKind::HeritabilityDensity => "heritability_density",
            PlotKind::LambdaCorrelations => "lambda_correlations",
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unsupported plot kind '{s}'")))
    }
}

/// Long-format TSV for `kind`.
pub fn emit_plot_data<T: Scalar>(sim: &Simulation<T>, kind: PlotKind) -> Result<String> {
    let records = sim.records();
    let mut out = String::new();
    match kind {
        PlotKind::DiversityDensity => {
            out.push_str("generation\tid\tdiversity\n");
            for r in records {
                for (p, d) in r.pedigree.iter().zip(&r.diversity) {
                    let _ = writeln!(out, "{}\t{}\t{}", r.generation, p.id, format_real(*d));
                }
            }
        }
        PlotKind::Pcoa => {
            out.push_str("id\tgeneration\tgroup\taxis1\taxis2\n");
            for r in records {
                let coords = pcoa_generation(r)?;
                for ((p, g), c) in r.pedigree.iter().zip(exposure_groups(r)).zip(&coords) {
                    let axis2 = c.get(1).copied().unwrap_or(0.0);
                    let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", p.id, r.generation, g, format_real(c[0]), format_real(axis2));
                }
            }
        }
        PlotKind::ResponseCurves => {
            out.push_str("generation\tmean_phenotype\tphenotype_change_sd\tmean_diversity\tdiversity_change\n");
            for s in summarize_run(records, sim.replicate()) {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    s.generation,
                    format_real(s.mean_phenotype),
                    format_real(s.phenotype_change_sd),
                    format_real(s.mean_diversity),
                    format_real(s.diversity_change)
                );
            }
        }
        PlotKind::HeritabilityDensity => {
            out.push_str("generation\ttaxon\tgenetic\th2\n");
            let clustering = &sim.effects().clustering;
            for r in records.iter().filter(|r| r.generation > 0) {
                for (s, h) in taxa_heritability(sim, r).into_iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}",
                        r.generation,
                        sim.taxon_ids()[s],
                        u8::from(clustering.is_genetic(s)),
                        format_real(h)
                    );
                }
            }
        }
        PlotKind::LambdaCorrelations => {
            out.push_str("lambda\tgeneration\tsource\tr\n");
            for w in records.windows(2) {
                let c = transmission_correlations(&w[0], &w[1])?;
                for (source, r) in [("mother", c.mother), ("father", c.father), ("ambient", c.ambient)] {
                    let _ = writeln!(out, "{}\t{}\t{}\t{}", sim.config().lambda, w[1].generation, source, format_real(r));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Depth, EnvEffectSpec, TaxaScope};
    use crate::io::{generate_synthetic_base, parse_dosages, parse_real_columns, BaseInputs};
    use crate::orchestrator::run_simulation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base() -> BaseInputs {
        generate_synthetic_base(150, 50, 60, &mut ChaCha8Rng::seed_from_u64(4)).unwrap()
    }

    fn config() -> ScenarioConfig {
        ScenarioConfig {
            n_clusters: 8,
            cluster_size_min: 2,
            cluster_size_max: 30,
            otu_g: 0.1,
            qtl_y: 20,
            n_gen: 2,
            depth: Depth::Fixed(2000),
            export_clr: true,
            ..ScenarioConfig::default()
        }
    }

    fn sim() -> Simulation<f64> {
        run_simulation(&base(), &config()).unwrap()
    }

    #[test]
    fn exports_round_trip() {
        let s = sim();
        let dir = tempfile::tempdir().unwrap();
        let files = export_replicate(&s, dir.path(), ExportOptions::from_config(s.config())).unwrap();
        assert!(files.iter().all(|f| f.exists()));
        let g1 = replicate_dir(dir.path(), 0).join("G1");
        let rec = &s.records()[1];

        let (ids, snps, g) = parse_dosages(&fs::read_to_string(g1.join("genotypes.tsv")).unwrap()).unwrap();
        assert_eq!((snps.as_slice(), g), (s.snp_ids(), rec.dosages.clone()));
        assert_eq!(ids, rec.ids());


        let (_, _, comps) = parse_real_columns::<f64>(&fs::read_to_string(g1.join("microbiota.tsv")).unwrap()).unwrap();
        for (col, c) in comps.iter().zip(&rec.microbiota) {
            assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(col.as_slice(), c.values());
        }
        let (_, _, clr_cols) = parse_real_columns::<f64>(&fs::read_to_string(g1.join("clr.tsv")).unwrap()).unwrap();
        assert_eq!(clr_cols[3].as_slice(), rec.clr[3].values());

        let t = parse_phenotype_table(&fs::read_to_string(g1.join("phenotypes.tsv")).unwrap(), 1).unwrap();
        assert_eq!(t, phenotype_table(rec));
        assert_eq!(t.ids.len(), 60);
    }

    #[test]
    fn replay_reproduces_summaries() {
        let s = sim();
        let dir = tempfile::tempdir().unwrap();
        export_replicate(&s, dir.path(), ExportOptions::from_config(s.config())).unwrap();
        let replayed = replay_summaries(dir.path()).unwrap();
        let direct = summarize_run(s.records(), 0);
        assert_eq!(replayed, vec![direct.clone()]);
        let text = to_json_lines(&direct).unwrap();
        assert_eq!(to_json_lines(&replayed[0]).unwrap(), text);
        assert_eq!(parse_json_lines::<GenerationSummary>(&text).unwrap(), direct);
    }

    #[test]
    fn base_summary_hits_targets() {
        let s = summarize_run(sim().records(), 0);
        assert!((s[0].h2_d - 0.25).abs() < 1e-6 && (s[0].b2 - 0.25).abs() < 1e-6);
        assert_eq!(s[0].phenotype_change_sd, 0.0);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn aggregate_of_identical_runs_has_zero_width() {
        let s = summarize_run(sim().records(), 0);
        let a = aggregate(&[s.clone(), s.clone()]);
        assert_eq!(a.len(), 3);
        assert_eq!(a[2].mean_phenotype.mean, s[2].mean_phenotype);
        assert_eq!(a[2].mean_phenotype.lower, a[2].mean_phenotype.upper);
        assert_eq!(a[2].replicates, 2);
    }

    #[test]
    fn manifest_checksums_match() {
        let s = sim();
        let dir = tempfile::tempdir().unwrap();
        let files = export_replicate(&s, dir.path(), ExportOptions::from_config(s.config())).unwrap();
        let m = RunManifest::build(dir.path(), &files, s.config(), vec![], 0.5).unwrap();
        m.write(dir.path()).unwrap();
        let loaded = RunManifest::load(dir.path()).unwrap();
        assert_eq!(loaded, m);
        loaded.verify(dir.path()).unwrap();
        fs::write(dir.path().join(&m.files[0].path), "tampered").unwrap();
        assert!(loaded.verify(dir.path()).is_err());
    }

    #[test]
    fn plot_tables_have_expected_shape() {
        let s = sim();
        for kind in PlotKind::ALL {
            let text = emit_plot_data(&s, kind).unwrap();
            let rows = text.lines().count() - 1;
            let expected = match kind {
                PlotKind::DiversityDensity | PlotKind::Pcoa => 3 * 60,
                PlotKind::ResponseCurves => 3,
                PlotKind::HeritabilityDensity => 2 * 50,
                PlotKind::LambdaCorrelations => 2 * 3,
            };
            assert_eq!(rows, expected, "{}", kind.as_str());
        }
        assert!("histogram".parse::<PlotKind>().is_err());
    }

    #[test]
    fn antibiotic_exposure_separates_groups() {
        let mut cfg = config();
        cfg.n_gen = 1;
        cfg.env_effects = vec![EnvEffectSpec {
            generations: vec![1],
            target_fraction: 0.5,
            taxa_scope: TaxaScope::All,
            effect_sd: 5.0,
            persistent_assignment: false,
        }];
        let s: Simulation<f64> = run_simulation(&base(), &cfg).unwrap();
        let g1 = &s.records()[1];
        let coords = pcoa_generation(g1).unwrap();
        let groups: Vec<bool> = exposure_groups(g1).iter().map(|&g| g == "exposed").collect();
        assert_eq!(groups.iter().filter(|&&g| g).count(), 30);
        let sep = centroid_separation(&coords, &groups).unwrap();
        assert!(sep.between > sep.within, "{sep:?}");
    }

    #[test]
    fn centroid_separation_by_hand() {
        let coords = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![10.0, 0.0], vec![12.0, 0.0]];
        let sep = centroid_separation(&coords, &[true, true, false, false]).unwrap();
        assert_eq!(sep, CentroidSeparation { between: 10.0, within: 1.0 });
    }

    #[test]
    fn pedigree_flags_selected() {
        let s = sim();
        let text = format_pedigree(&s.records()[0]);
        let flagged = text.lines().skip(1).filter(|l| l.ends_with("\t1")).count();
        assert_eq!(flagged, s.records()[0].selected.iter().filter(|&&x| x).count());
        assert!(text.lines().nth(1).unwrap().contains("\tNA\tNA\t"));
    }
}
