//! Scenario configuration.
//!
//! The on-disk grammar is flat `key = value` lines; `#` starts a comment.
//! Environmental effects are indexed key groups:
//!
//! ```text
//! h2_d = 0.25
//! b2 = 0.25
//! selection = bv_t
//! env.1.generations = 1
//! env.1.target_fraction = 0.5
//! env.1.taxa_scope = all          # or clusters:3,7 / taxa:otu12,otu40 / random_clusters:2
//! env.1.effect_sd = 5
//! ```
//!
//! Overrides use the same `key=value` form and win over file values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Selection criterion used to rank candidates for the breeding stock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Random,
    MicrobiotaEffect,
    BvM,
    BvD,
    BvT,
    Diversity,
    MixedIndex,
}

impl Criterion {
    pub const ALL: [Criterion; 7] = [
        Criterion::Random,
        Criterion::MicrobiotaEffect,
        Criterion::BvM,
        Criterion::BvD,
        Criterion::BvT,
        Criterion::Diversity,
        Criterion::MixedIndex,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Random => "random",
            Criterion::MicrobiotaEffect => "microbiota_effect",
            Criterion::BvM => "bv_m",
            Criterion::BvD => "bv_d",
            Criterion::BvT => "bv_t",
            Criterion::Diversity => "diversity",
            Criterion::MixedIndex => "mixed_index",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown selection criterion '{s}'")))
    }
}

/// Which taxa an environmental effect touches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaxaScope {
    All,
    /// Cluster ids as reported in the cluster export.
    Clusters(Vec<usize>),
    /// Taxon labels from the base microbiota table.
    Taxa(Vec<String>),
    /// `n` clusters chosen at random when the simulation starts.
    RandomClusters(usize),
}

impl FromStr for TaxaScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(TaxaScope::All);
        }
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("invalid taxa scope '{s}'")))?;
        match kind.trim() {
            "clusters" => Ok(TaxaScope::Clusters(parse_list(rest, "clusters")?)),
            "taxa" => Ok(TaxaScope::Taxa(
                rest.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect(),
            )),
            "random_clusters" => Ok(TaxaScope::RandomClusters(parse_value(rest, "random_clusters")?)),
            other => Err(Error::Config(format!("unknown taxa scope kind '{other}'"))),
        }
    }
}

impl fmt::Display for TaxaScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaxaScope::All => f.write_str("all"),
            TaxaScope::Clusters(ids) => write!(f, "clusters:{}", join(ids)),
            TaxaScope::Taxa(ids) => write!(f, "taxa:{}", ids.join(",")),
            TaxaScope::RandomClusters(n) => write!(f, "random_clusters:{n}"),
        }
    }
}

/// One environmental fixed effect on taxa abundances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvEffectSpec {
    /// Generations (≥ 1) in which the effect is applied.
    pub generations: Vec<usize>,
    /// Fraction of individuals exposed in each listed generation.
    pub target_fraction: f64,
    pub taxa_scope: TaxaScope,
    /// Standard deviation of the nonzero effect entries.
    pub effect_sd: f64,
    /// Exposed offspring inherit their dam's exposure instead of a fresh draw.
    pub persistent_assignment: bool,
}

impl EnvEffectSpec {
    pub fn is_active(&self, generation: usize) -> bool {
        self.generations.contains(&generation)
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.generations.is_empty() {
            return Err(Error::Config(format!("env.{index}.generations is empty")));
        }
        if self.generations.contains(&0) {
            return Err(Error::Config(format!(
                "env.{index}.generations: effects apply from generation 1 onwards"
            )));
        }
        if !(self.effect_sd > 0.0) {
            return Err(Error::Config(format!("env.{index}.effect_sd must be > 0")));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(Error::Config(format!("env.{index}.target_fraction must lie in (0, 1]")));
        }
        Ok(())
    }
}

/// Sequencing depth used for diversity resampling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Depth {
    Fixed(u32),
    /// Individual `i` uses entry `i mod len`.
    PerIndividual(Vec<u32>),
}

impl Depth {
    pub fn for_individual(&self, i: usize) -> u32 {
        match self {
            Depth::Fixed(d) => *d,
            Depth::PerIndividual(v) => v[i % v.len()],
        }
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Fixed(d) => write!(f, "{d}"),
            Depth::PerIndividual(v) => f.write_str(&join(v)),
        }
    }
}

/// Every tunable of a simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_gen: usize,
    /// Individuals per generation; `None` means the base population size.
    pub n_ind: Option<usize>,
    /// Fraction of females.
    pub sex_ratio: f64,
    /// Vertical-transmission proportion.
    pub lambda: f64,
    pub h2_d: f64,
    pub b2: f64,
    pub sigma_beta: f64,
    /// When set, `sigma_beta = sigma_beta_scaled / sqrt(QTL_o)`.
    pub sigma_beta_scaled: Option<f64>,
    pub sigma_m: f64,
    pub qtl_y: usize,
    /// QTL per genetic cluster; `None` means `round(0.2·n_g / v)`.
    pub qtl_o: Option<usize>,
    pub otu_g: f64,
    pub eta: f64,
    pub pi: f64,
    pub n_clusters: usize,
    pub cluster_size_min: usize,
    pub cluster_size_max: usize,
    pub depth: Depth,
    pub size_selection_f: f64,
    pub size_selection_m: f64,
    pub selection: Criterion,
    pub w_div: f64,
    /// Standardize both mixed-index components within generation.
    pub mixed_index_standardize: bool,
    /// Apply the selection criterion already when producing G1.
    pub select_from_g0: bool,
    pub env_effects: Vec<EnvEffectSpec>,
    pub seed: u64,
    pub replicates: usize,
    pub genetic_map: Option<PathBuf>,
    pub export_clr: bool,
    pub export_counts: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_gen: 5,
            n_ind: None,
            sex_ratio: 0.5,
            lambda: 0.5,
            h2_d: 0.25,
            b2: 0.25,
            sigma_beta: 0.1,
            sigma_beta_scaled: None,
            sigma_m: 0.1,
            qtl_y: 100,
            qtl_o: None,
            otu_g: 0.05,
            eta: 25.0,
            pi: 0.75,
            n_clusters: 100,
            cluster_size_min: 10,
            cluster_size_max: 25,
            depth: Depth::Fixed(10_000),
            size_selection_f: 0.30,
            size_selection_m: 0.30,
            selection: Criterion::Random,
            w_div: 0.0,
            mixed_index_standardize: true,
            select_from_g0: false,
            env_effects: Vec::new(),
            seed: 1,
            replicates: 1,
            genetic_map: None,
            export_clr: false,
            export_counts: true,
        }
    }
}

impl ScenarioConfig {
    /// Checks ranges and cross-field feasibility.
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        if self.n_gen < 1 {
            return Err(Error::Config("n_gen must be at least 1".into()));
        }
        if let Some(n) = self.n_ind {
            if n < 2 {
                return Err(Error::Config("n_ind must be at least 2".into()));
            }
        }
        unit("sex_ratio", self.sex_ratio)?;
        unit("lambda", self.lambda)?;
        unit("w_div", self.w_div)?;
        if !(0.0..1.0).contains(&self.h2_d) {
            return Err(Error::Config(format!("h2_d must lie in [0, 1), got {}", self.h2_d)));
        }
        if !(0.0..1.0).contains(&self.b2) {
            return Err(Error::Config(format!("b2 must lie in [0, 1), got {}", self.b2)));
        }
        if self.h2_d + self.b2 >= 1.0 {
            return Err(Error::Config(format!(
                "h2_d + b2 must be < 1 (residual variance is 1), got {} + {}",
                self.h2_d, self.b2
            )));
        }
        if !(self.otu_g > 0.0 && self.otu_g <= 1.0) {
            return Err(Error::Config(format!("otu_g must lie in (0, 1], got {}", self.otu_g)));
        }
        if !(self.pi > 0.0 && self.pi <= 1.0) {
            return Err(Error::Config(format!("pi must lie in (0, 1], got {}", self.pi)));
        }
        for (name, v) in [("size_selection_F", self.size_selection_f), ("size_selection_M", self.size_selection_m)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.eta > 0.0) {
            return Err(Error::Config("eta must be > 0".into()));
        }
        if !(self.sigma_beta >= 0.0) || !(self.sigma_m >= 0.0) {
            return Err(Error::Config("sigma_beta and sigma_m must be >= 0".into()));
        }
        if let Some(s) = self.sigma_beta_scaled {
            if !(s >= 0.0) {
                return Err(Error::Config("sigma_beta_scaled must be >= 0".into()));
            }
        }
        if self.n_clusters < 1 {
            return Err(Error::Config("n_clusters must be at least 1".into()));
        }
        if self.cluster_size_min > self.cluster_size_max {
            return Err(Error::Config("cluster_size_min exceeds cluster_size_max".into()));
        }
        if self.qtl_o == Some(0) {
            return Err(Error::Config("qtl_o must be at least 1".into()));
        }
        match &self.depth {
            Depth::Fixed(0) => return Err(Error::Config("depth must be at least 1".into())),
            Depth::PerIndividual(v) if v.is_empty() || v.contains(&0) => {
                return Err(Error::Config("depth entries must be at least 1".into()))
            }
            _ => {}
        }
        if self.replicates < 1 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        for (i, spec) in self.env_effects.iter().enumerate() {
            spec.validate(i + 1)?;
        }
        Ok(())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        if let Some(rest) = key.strip_prefix("env.") {
            return self.set_env(rest, value);
        }
        match key {
            "n_gen" => self.n_gen = parse_value(value, key)?,
            "n_ind" => self.n_ind = parse_optional(value, key)?,
            "sex_ratio" => self.sex_ratio = parse_value(value, key)?,
            "lambda" => self.lambda = parse_value(value, key)?,
            "h2_d" | "h2" => self.h2_d = parse_value(value, key)?,
            "b2" => self.b2 = parse_value(value, key)?,
            "sigma_beta" | "effect_size" => self.sigma_beta = parse_value(value, key)?,
            "sigma_beta_scaled" => self.sigma_beta_scaled = parse_optional(value, key)?,
            "sigma_m" | "noise.microbiome" => self.sigma_m = parse_value(value, key)?,
            "qtl_y" | "qtn_y" => self.qtl_y = parse_value(value, key)?,
            "qtl_o" => self.qtl_o = parse_optional(value, key)?,
            "otu_g" => self.otu_g = parse_value(value, key)?,
            "eta" => self.eta = parse_value(value, key)?,
            "pi" => self.pi = parse_value(value, key)?,
            "n_clusters" => self.n_clusters = parse_value(value, key)?,
            "cluster_size_min" => self.cluster_size_min = parse_value(value, key)?,
            "cluster_size_max" => self.cluster_size_max = parse_value(value, key)?,
            "depth" => {
                let v: Vec<u32> = parse_list(value, key)?;
                self.depth = match v.as_slice() {
                    [d] => Depth::Fixed(*d),
                    _ => Depth::PerIndividual(v),
                };
            }
            "size_selection_F" | "size_selection_f" => self.size_selection_f = parse_value(value, key)?,
            "size_selection_M" | "size_selection_m" => self.size_selection_m = parse_value(value, key)?,
            "selection" => self.selection = value.parse()?,
            "w_div" => self.w_div = parse_value(value, key)?,
            "mixed_index_standardize" => self.mixed_index_standardize = parse_bool(value, key)?,
            "select_from_g0" => self.select_from_g0 = parse_bool(value, key)?,
            "seed" => self.seed = parse_value(value, key)?,
            "replicates" => self.replicates = parse_value(value, key)?,
            "genetic_map" => self.genetic_map = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "export_clr" => self.export_clr = parse_bool(value, key)?,
            "export_counts" => self.export_counts = parse_bool(value, key)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    fn set_env(&mut self, rest: &str, value: &str) -> Result<()> {
        let (idx, field) = rest
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("malformed env key 'env.{rest}'")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::Config(format!("env index '{idx}' is not a positive integer")))?;
        if idx == 0 {
            return Err(Error::Config("env indices start at 1".into()));
        }
        while self.env_effects.len() < idx {
            self.env_effects.push(EnvEffectSpec {
                generations: Vec::new(),
                target_fraction: 1.0,
                taxa_scope: TaxaScope::All,
                effect_sd: 1.0,
                persistent_assignment: false,
            });
        }
        let spec = &mut self.env_effects[idx - 1];
        let key = format!("env.{rest}");
        match field {
            "generations" => spec.generations = parse_generations(value, &key)?,
            "target_fraction" => spec.target_fraction = parse_value(value, &key)?,
            "taxa_scope" => spec.taxa_scope = value.parse()?,
            "effect_sd" => spec.effect_sd = parse_value(value, &key)?,
            "persistent_assignment" => spec.persistent_assignment = parse_bool(value, &key)?,
            other => return Err(Error::Config(format!("unknown env field '{other}' in '{key}'"))),
        }
        Ok(())
    }

    /// Parses config text, then applies overrides, then validates.
    pub fn from_text(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        for (key, value) in parse_assignments(text)? {
            cfg.set(&key, &value)?;
        }
        for (key, value) in overrides {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes to the same flat grammar `from_text` reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("n_gen", self.n_gen.to_string());
        if let Some(n) = self.n_ind {
            put("n_ind", n.to_string());
        }
        put("sex_ratio", self.sex_ratio.to_string());
        put("lambda", self.lambda.to_string());
        put("h2_d", self.h2_d.to_string());
        put("b2", self.b2.to_string());
        put("sigma_beta", self.sigma_beta.to_string());
        if let Some(s) = self.sigma_beta_scaled {
            put("sigma_beta_scaled", s.to_string());
        }
        put("sigma_m", self.sigma_m.to_string());
        put("qtl_y", self.qtl_y.to_string());
        if let Some(q) = self.qtl_o {
            put("qtl_o", q.to_string());
        }
        put("otu_g", self.otu_g.to_string());
        put("eta", self.eta.to_string());
        put("pi", self.pi.to_string());
        put("n_clusters", self.n_clusters.to_string());
        put("cluster_size_min", self.cluster_size_min.to_string());
        put("cluster_size_max", self.cluster_size_max.to_string());
        put("depth", self.depth.to_string());
        put("size_selection_F", self.size_selection_f.to_string());
        put("size_selection_M", self.size_selection_m.to_string());
        put("selection", self.selection.to_string());
        put("w_div", self.w_div.to_string());
        put("mixed_index_standardize", self.mixed_index_standardize.to_string());
        put("select_from_g0", self.select_from_g0.to_string());
        put("seed", self.seed.to_string());
        put("replicates", self.replicates.to_string());
        if let Some(p) = &self.genetic_map {
            put("genetic_map", p.display().to_string());
        }
        put("export_clr", self.export_clr.to_string());
        put("export_counts", self.export_counts.to_string());
        for (i, spec) in self.env_effects.iter().enumerate() {
            let k = i + 1;
            put(&format!("env.{k}.generations"), join(&spec.generations));
            put(&format!("env.{k}.target_fraction"), spec.target_fraction.to_string());
            put(&format!("env.{k}.taxa_scope"), spec.taxa_scope.to_string());
            put(&format!("env.{k}.effect_sd"), spec.effect_sd.to_string());
            put(&format!("env.{k}.persistent_assignment"), spec.persistent_assignment.to_string());
        }
        out
    }
}

/// Reads a config file and applies `KEY=VALUE` overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ScenarioConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    let overrides = overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<Result<Vec<_>>>()?;
    ScenarioConfig::from_text(&text, &overrides)
}

/// Splits `KEY=VALUE`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{s}' is not KEY=VALUE")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_assignments(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        let k = k.trim().to_string();
        if let Some(prev) = seen.insert(k.clone(), lineno + 1) {
            return Err(Error::Config(format!("line {}: key '{k}' already set on line {prev}", lineno + 1)));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

fn parse_value<V: FromStr>(s: &str, key: &str) -> Result<V> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{s}' for '{key}'")))
}

fn parse_optional<V: FromStr>(s: &str, key: &str) -> Result<Option<V>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("none") || s.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse_value(s, key).map(Some)
    }
}

fn parse_bool(s: &str, key: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{s}' for '{key}'"))),
    }
}

fn parse_list<V: FromStr>(s: &str, key: &str) -> Result<Vec<V>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_value(t, key))
        .collect()
}

/// Accepts `1,2,5` and ranges such as `1-3`.
fn parse_generations(s: &str, key: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = tok.split_once('-') {
            let a: usize = parse_value(a, key)?;
            let b: usize = parse_value(b, key)?;
            if a > b {
                return Err(Error::Config(format!("empty generation range '{tok}' in '{key}'")));
            }
            out.extend(a..=b);
        } else {
            out.push(parse_value(tok, key)?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn join<V: fmt::Display>(v: &[V]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
