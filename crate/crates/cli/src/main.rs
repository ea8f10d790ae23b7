//! `holosim` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use holosim::config::{load_config, ScenarioConfig};
use holosim::error::{Error, Result};
use holosim::io::{generate_synthetic_base, load_base_inputs, write_base_inputs, BaseInputs};
use holosim::microbiome::{cluster_taxa, default_qtl_per_cluster, select_genetic_clusters, taxa_heritability_profile};
use holosim::orchestrator::run_replicates_with;
use holosim::reporting::{self, ExportOptions, GenerationSummary, PlotKind, RunManifest};
use holosim::rng::{stream, Purpose};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "holosim", version, about = "Transgenerational hologenomic simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all replicates of a scenario and export every generation.
    Simulate(SimulateArgs),
    /// Taxa heritability over a grid of genetic effect sizes.
    CalibrateEffects(CalibrateArgs),
    /// Write a synthetic base population.
    SynthesizeBase(SynthesizeArgs),
    /// Recompute summaries from exported phenotype tables.
    ReplaySummary(ReplayArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, value_name = "PATH")]
    base_genotypes: PathBuf,
    #[arg(long, value_name = "PATH")]
    base_microbiota: PathBuf,
    /// `key = value` scenario file; omitted keys keep their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<(ScenarioConfig, BaseInputs)> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        let config = load_config(self.config.as_deref(), &overrides)?;
        config.validate()?;
        let base = load_base_inputs(&self.base_genotypes, &self.base_microbiota)?;
        Ok((config, base))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Replicates run concurrently.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Also write plot-ready tables under each replicate's `plots/`.
    #[arg(long)]
    plots: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Effect sizes in units of one over the square root of QTL per cluster.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5")]
    grid: Vec<f64>,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[arg(long, default_value_t = 1000)]
    n_snps: usize,
    #[arg(long, default_value_t = 400)]
    n_taxa: usize,
    #[arg(long, default_value_t = 300)]
    n_ind: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Root of a `simulate` run.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Fail with a data error unless the replay matches `summary.jsonl` and
    /// the manifest checksums.
    #[arg(long)]
    check: bool,
}

fn write(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let (config, base) = args.scenario.load()?;
    let start = Instant::now();
    let root = &args.out;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let opts = ExportOptions::from_config(&config);
    let plots = args.plots;
    let results = run_replicates_with::<f64, _, _>(&base, &config, config.replicates, args.parallelism.max(1), |sim| {
        let mut files = reporting::export_replicate(&sim, root, opts)?;
        if plots {
            let dir = reporting::replicate_dir(root, sim.replicate()).join("plots");
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for kind in PlotKind::ALL {
                let text = reporting::emit_plot_data(&sim, kind)?;
                files.push(write(&dir.join(format!("{}.tsv", kind.as_str())), &text)?);
            }
        }
        Ok((files, reporting::summarize_run(sim.records(), sim.replicate())))
    })?;

    let mut files = Vec::new();
    let mut runs: Vec<Vec<GenerationSummary>> = Vec::new();
    let mut failed = Vec::new();
    let mut first_error = None;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok((f, s)) => {
                files.extend(f);
                runs.push(s);
            }
            Err(e) => {
                log::error!("replicate {r} failed: {e}");
                failed.push(r as u64);
                first_error.get_or_insert(e);
            }
        }
    }
    if !runs.is_empty() {
        let flat: Vec<GenerationSummary> = runs.iter().flatten().cloned().collect();
        files.push(write(&root.join("summary.jsonl"), &reporting::to_json_lines(&flat)?)?);
        files.push(write(&root.join("aggregate.jsonl"), &reporting::to_json_lines(&reporting::aggregate(&runs))?)?);
    }
    let manifest = RunManifest::build(root, &files, &config, failed.clone(), start.elapsed().as_secs_f64())?;
    manifest.write(root)?;
    log::info!("{} of {} replicates written to {}", runs.len(), config.replicates, root.display());
    match first_error {
        Some(e) => Err(Error::Numerical(format!("{} replicate(s) failed {failed:?}; first: {e}", failed.len()))),
        None => Ok(()),
    }
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let (config, base) = args.scenario.load()?;
    if args.grid.is_empty() || args.grid.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::Config("grid must hold non-negative effect sizes".into()));
    }
    let mut rng = stream(config.seed, 0, Purpose::Effects);
    let clustering = cluster_taxa(&base.taxa_counts, config.n_clusters)?;
    let clustering = select_genetic_clusters(clustering, config.otu_g, config.cluster_size_min, config.cluster_size_max, &mut rng)?;
    let qtl_o = config
        .qtl_o
        .unwrap_or_else(|| default_qtl_per_cluster(base.n_snps(), clustering.genetic_clusters().len()));
    let grid: Vec<f64> = args
        .grid
        .iter()
        .map(|&s| s / (qtl_o as f64).sqrt())
        .collect();
    let profile: Vec<Vec<f64>> = taxa_heritability_profile(&base, &clustering, &grid, &config, &mut rng)?;
    let mut text = String::from("sigma_scaled\tsigma_beta\ttaxon\tgenetic\th2\n");
    for ((scaled, sigma), h) in args.grid.iter().zip(&grid).zip(&profile) {
        for (s, h) in h.iter().enumerate() {
            text.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                scaled,
                holosim::io::format_real(*sigma),
                base.taxon_ids[s],
                u8::from(clustering.is_genetic(s)),
                holosim::io::format_real(*h)
            ));
        }
    }
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write(&args.out.join("heritability_profile.tsv"), &text)?;
    Ok(())
}

fn synthesize(args: &SynthesizeArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let base = generate_synthetic_base(args.n_snps, args.n_taxa, args.n_ind, &mut rng)?;
    write_base_inputs(&base, &args.out)
}

fn replay(args: &ReplayArgs) -> Result<()> {
    let runs = reporting::replay_summaries(&args.out)?;
    let flat: Vec<GenerationSummary> = runs.iter().flatten().cloned().collect();
    let text = reporting::to_json_lines(&flat)?;
    if args.check {
        RunManifest::load(&args.out)?.verify(&args.out)?;
        let p = args.out.join("summary.jsonl");
        let stored = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        if stored != text {
            return Err(Error::Data(format!("replayed summaries differ from {}", p.display())));
        }
    }
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::CalibrateEffects(a) => calibrate(a),
        Command::SynthesizeBase(a) => synthesize(a),
        Command::ReplaySummary(a) => replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("holosim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
