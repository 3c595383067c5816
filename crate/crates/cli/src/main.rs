use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aqbench::analysis::{Aggregate, TimingTable};
use aqbench::appsuite::Family;
use aqbench::par;
use aqbench::NoiseModel;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{IngestSpec, Method, RunConfig, UsageError};

#[derive(Parser, Debug)]
#[command(name = "aqbench", version, about = "DRB, application benchmarks and #AQ scoring on a depolarizing noise model")]
struct Cli {
    /// Root seed for every random stream.
    #[arg(long, global = true, env = "AQBENCH_SEED")]
    seed: Option<u64>,
    /// Noise model JSON file.
    #[arg(long, global = true, env = "AQBENCH_NOISE")]
    noise: Option<PathBuf>,
    /// Timing table JSON file.
    #[arg(long, global = true, env = "AQBENCH_TIMING")]
    timing: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "AQBENCH_OUT", default_value = "aqbench-out")]
    out: PathBuf,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, env = "AQBENCH_WORKERS", default_value_t = 0)]
    workers: usize,
    /// JSON run configuration; a previous run's manifest.json works too.
    #[arg(long, global = true, env = "AQBENCH_CONFIG")]
    config: Option<PathBuf>,
    /// Run the built-in oracle self-check and exit.
    #[arg(long)]
    self_check: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Two-qubit DRB on each pair; writes per-pair error rates.
    Drb(DrbArgs),
    /// Simulate application instances; writes benchmark records.
    Bench(BenchArgs),
    /// #AQ and volumetric tables from a records CSV.
    Score(ScoreArgs),
    /// Aggregate variant histograms.
    Vote(VoteArgs),
    /// Estimated wall-clock time of a circuit.
    Timing(TimingArgs),
}

#[derive(Args, Debug)]
struct DrbArgs {
    /// `all` or a list like `0-1,2-5`.
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    circuits: Option<usize>,
    #[arg(long)]
    shots: Option<u64>,
    /// Bootstrap resamples (0 disables).
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    no_datasets: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    variants: Option<usize>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    t_start: Option<usize>,
    #[arg(long)]
    min_width: Option<usize>,
    #[arg(long)]
    max_width: Option<usize>,
    /// Comma-separated: qft, phase_estimation, hamiltonian_simulation.
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<String>>,
    /// Add an ingested instance, `CIRCUIT.json:IDEAL.json` (repeatable).
    #[arg(long = "instance")]
    instances: Vec<String>,
    /// Only run ingested instances.
    #[arg(long)]
    no_suite: bool,
    /// Also compute the model-predicted fidelity (small widths).
    #[arg(long)]
    predict: bool,
    #[arg(long)]
    sim_max_width: Option<usize>,
    #[arg(long)]
    no_histograms: bool,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Records CSV.
    records: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_parser = ["mean", "min"])]
    aggregate: Option<String>,
}

#[derive(Args, Debug)]
struct VoteArgs {
    /// Histogram JSON files, one per variant.
    histograms: Vec<String>,
    /// JSON file with `variant_maps` to undo.
    #[arg(long)]
    maps: Option<String>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    t_start: Option<usize>,
}

#[derive(Args, Debug)]
struct TimingArgs {
    /// Circuit JSON file.
    circuit: Option<String>,
    #[arg(long)]
    shots: Option<u64>,
}

fn family(name: &str) -> Result<Family> {
    [Family::Qft, Family::PhaseEstimation, Family::HamiltonianSimulation]
        .into_iter()
        .find(|f| f.name() == name.trim())
        .ok_or_else(|| UsageError(format!("bench.families: unknown family `{name}`")).into())
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("{what} {}: {e}", path.display())).into())
}

/// Merge flags over the config file and return the manifest for this run.
fn resolve(cli: &Cli, command: &Command) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let noise = match &cli.noise {
        Some(p) => {
            let m: NoiseModel = load_json(p, "noise model")?;
            m.validate().map_err(|e| UsageError(format!("noise model: {e}")))?;
            m
        }
        None => file.noise.clone().unwrap_or_default(),
    };
    let timing = match &cli.timing {
        Some(p) => load_json(p, "timing table")?,
        None => file.timing_table.clone().unwrap_or_else(TimingTable::default),
    };
    let mut m = RunConfig {
        version: Some(env!("CARGO_PKG_VERSION").into()),
        seed: Some(cli.seed.or(file.seed).unwrap_or(0)),
        ..Default::default()
    };
    match command {
        Command::Drb(a) => {
            let mut s = file.drb.unwrap_or_default();
            if let Some(v) = &a.pairs {
                s.pairs = v.clone();
            }
            if let Some(v) = a.width {
                s.width = v;
            }
            if let Some(v) = a.circuits {
                s.circuits_per_depth = v;
            }
            if let Some(v) = a.shots {
                s.shots_per_circuit = v;
            }
            if let Some(v) = a.bootstrap {
                s.bootstrap = v;
            }
            s.write_datasets &= !a.no_datasets;
            m.command = Some("drb".into());
            m.noise = Some(noise);
            m.drb = Some(s);
        }
        Command::Bench(a) => {
            let mut s = file.bench.unwrap_or_default();
            if let Some(v) = a.variants {
                s.run.n_variants = v;
            }
            if let Some(v) = a.shots {
                s.run.shots_per_variant = v;
            }
            if let Some(v) = a.t_start {
                s.run.t_start = v;
            }
            if let Some(v) = a.min_width {
                s.suite.min_width = v;
            }
            if let Some(v) = a.max_width {
                s.suite.max_width = v;
            }
            if let Some(v) = &a.families {
                s.suite.families = v.iter().map(|f| family(f)).collect::<Result<_>>()?;
            }
            for spec in &a.instances {
                let Some((circuit, ideal)) = spec.split_once(':') else {
                    return config::usage(format!("bench.instances: `{spec}` is not CIRCUIT:IDEAL"));
                };
                s.instances.push(IngestSpec {
                    circuit: circuit.into(),
                    ideal: ideal.into(),
                });
            }
            s.use_suite &= !a.no_suite;
            s.run.predict |= a.predict;
            if let Some(v) = a.sim_max_width {
                s.sim_max_width = v;
            }
            s.write_histograms &= !a.no_histograms;
            m.command = Some("bench".into());
            m.noise = Some(noise);
            m.bench = Some(s);
        }
        Command::Score(a) => {
            let mut s = file.score.unwrap_or_default();
            if let Some(v) = &a.records {
                s.records = v.clone();
            }
            if let Some(v) = a.threshold {
                s.threshold = v;
            }
            match a.aggregate.as_deref() {
                Some("min") => s.aggregate = Aggregate::Min,
                Some(_) => s.aggregate = Aggregate::Mean,
                None => {}
            }
            m.command = Some("score".into());
            m.seed = None;
            m.score = Some(s);
        }
        Command::Vote(a) => {
            let mut s = file.vote.unwrap_or_default();
            if !a.histograms.is_empty() {
                s.histograms = a.histograms.clone();
            }
            if a.maps.is_some() {
                s.maps = a.maps.clone();
            }
            if let Some(v) = a.method {
                s.method = v;
            }
            if let Some(v) = a.t_start {
                s.t_start = v;
            }
            m.command = Some("vote".into());
            m.seed = None;
            m.vote = Some(s);
        }
        Command::Timing(a) => {
            let mut s = file.timing.unwrap_or_default();
            if let Some(v) = &a.circuit {
                s.circuit = v.clone();
            }
            if let Some(v) = a.shots {
                s.shots = v;
            }
            m.command = Some("timing".into());
            m.seed = None;
            m.timing_table = Some(timing);
            m.timing = Some(s);
        }
    }
    Ok(m)
}

fn run(cli: &Cli, command: &Command) -> Result<()> {
    let m = resolve(cli, command)?;
    let out = &cli.out;
    let seed = m.seed.unwrap_or(0);
    let noise = m.noise.clone().unwrap_or_default();
    let printed = par::with_workers(cli.workers, || -> Result<String> {
        match command {
            Command::Drb(_) => commands::drb(m.drb.as_ref().expect("resolved"), &noise, seed, out).map(|_| String::new()),
            Command::Bench(_) => commands::bench(m.bench.as_ref().expect("resolved"), &noise, seed, out).map(|_| String::new()),
            Command::Score(_) => commands::score(m.score.as_ref().expect("resolved"), out),
            Command::Vote(_) => commands::vote(m.vote.as_ref().expect("resolved"), out),
            Command::Timing(_) => commands::timing(
                m.timing.as_ref().expect("resolved"),
                m.timing_table.as_ref().expect("resolved"),
                out,
            ),
        }
    })?;
    print!("{printed}");
    commands::write(out, "manifest.json", serde_json::to_string_pretty(&m)? + "\n")
}

fn self_check(seed: u64) -> Result<bool> {
    let report = aqbench::oracles::self_check(seed);
    print!("{}", report.to_json());
    Ok(report.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = if cli.self_check {
        self_check(cli.seed.unwrap_or(0)).map(|ok| if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
    } else if let Some(command) = &cli.command {
        run(&cli, command).map(|_| ExitCode::SUCCESS)
    } else {
        Err(UsageError("no command given; see --help".into()).into())
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
