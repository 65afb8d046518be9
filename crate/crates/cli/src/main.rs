use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use dgcc_core::dgcc::write_run_outputs;
use dgcc_core::harness::{self, SweepParam, Sweep};
use dgcc_core::{
    check_weak_decomposability, generate_instance, load_instance, run_dgcc, run_global_nsga2, save_instance,
    Ablation, Channel, ExperimentSpec, GeneratorSpec, Instance, RunConfig, RunSummary,
};

#[derive(Parser)]
#[command(name = "dgcc", version, about = "Multi-city trip planning with dynamic cooperative coevolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a weakly decomposable instance.
    Generate {
        /// Generator parameters as JSON; overrides the shape flags.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 20)]
        size: usize,
        #[arg(long, default_value_t = 1.5)]
        margin: f64,
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check weak decomposability on both weight channels.
    Check {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Optimize one instance and write archive.csv, history.jsonl and summary.json.
    Run {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        days: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Disable a mechanism: structure, resources or inheritance. Repeatable.
        #[arg(long)]
        ablation: Vec<String>,
        /// Run a baseline instead (only global-nsga2 is available).
        #[arg(long)]
        baseline: Option<String>,
        /// Component order as comma-separated cluster indices.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<usize>>,
        #[arg(long)]
        max_fes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment spec.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment spec sweeping L or Q.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        param: String,
        /// Inclusive integer range `a..b` or a comma-separated list.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the aggregate table of an experiment directory.
    Report { dir: PathBuf },
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad range start in {text:?}"))?;
        let b: u64 = b.trim().parse().with_context(|| format!("bad range end in {text:?}"))?;
        if a > b {
            bail!("empty range {text:?}");
        }
        return Ok((a..=b).map(|v| v as f64).collect());
    }
    text.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad value {v:?}")))
        .collect()
}

fn generate(spec: Option<PathBuf>, m: usize, size: usize, margin: f64, name: Option<String>, seed: u64, out: &Path) -> Result<()> {
    let mut gen: GeneratorSpec = match spec {
        Some(path) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => GeneratorSpec::uniform(m, size, margin),
    };
    if name.is_some() {
        gen.name = name;
    }
    let inst = generate_instance(&gen, seed)?;
    save_instance(&inst, out)?;
    println!("wrote {} ({} POIs in {} clusters)", out.display(), inst.len(), inst.num_clusters());
    Ok(())
}

fn check(path: &Path) -> Result<()> {
    let inst: Instance = load_instance(path)?;
    let mut all = true;
    for channel in Channel::ALL {
        let report = check_weak_decomposability(&inst, channel);
        all &= report.satisfied;
        println!("{}", serde_json::to_string(&report)?);
    }
    println!("weakly decomposable: {all}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    instance: &Path,
    days: usize,
    config: Option<PathBuf>,
    seed: Option<u64>,
    ablations: &[String],
    baseline: Option<String>,
    order: Option<Vec<usize>>,
    max_fes: Option<usize>,
    out: &Path,
) -> Result<()> {
    let inst: Instance = load_instance(instance)?;
    let mut cfg = match config {
        Some(path) => RunConfig::load(&path)?,
        None => RunConfig::default(),
    };
    cfg.days = days;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    for name in ablations {
        cfg.ablations = cfg.ablations.with(name.parse::<Ablation>()?);
    }
    if order.is_some() {
        cfg.component_order = order;
    }
    if max_fes.is_some() {
        cfg.max_fes = max_fes;
    }
    let start = Instant::now();
    let (result, variant) = match baseline.as_deref() {
        None => {
            let label = if cfg.ablations.any() { "dgcc-ablation" } else { "dgcc" };
            (run_dgcc(&inst, &cfg)?, label)
        }
        Some("global-nsga2") => (run_global_nsga2(&inst, &cfg)?, "global-nsga2"),
        Some(other) => bail!("unknown baseline {other:?} (expected global-nsga2)"),
    };
    let wall_ms = start.elapsed().as_millis() as u64;
    let summary = RunSummary::new(&result, variant, cfg.seed, wall_ms);
    write_run_outputs(out, &result, &summary)?;
    println!(
        "{variant}: hv={:.6e} archive={} fes={}/{} rounds={} in {wall_ms} ms",
        summary.final_hv, summary.archive_size, summary.fes_total, summary.max_fes, summary.rounds
    );
    Ok(())
}

fn bench(spec: ExperimentSpec, out: &Path) -> Result<()> {
    let sweep = spec.sweep.as_ref().map(|s| s.parameter);
    let output = harness::run_experiment(&spec)?;
    for (label, reason) in &output.failures {
        eprintln!("instance {label} skipped: {reason}");
    }
    harness::write_experiment(out, &output, sweep)?;
    print!("{}", harness::report(out)?);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Generate { spec, m, size, margin, name, seed, out } => generate(spec, m, size, margin, name, seed, &out),
        Command::Check { instance } => check(&instance),
        Command::Run { instance, days, config, seed, ablation, baseline, order, max_fes, out } => {
            run(&instance, days, config, seed, &ablation, baseline, order, max_fes, &out)
        }
        Command::Bench { spec, out } => bench(ExperimentSpec::load(&spec)?, &out),
        Command::Sweep { spec, param, values, out } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            let parameter: SweepParam = param.parse()?;
            spec.sweep = Some(Sweep { parameter, values: parse_values(&values)? });
            bench(spec, &out)
        }
        Command::Report { dir } => {
            print!("{}", harness::report(&dir)?);
            Ok(())
        }
    }
}
