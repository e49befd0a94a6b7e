use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bptrack_cli::bench::{run_sweep, Axis, Protocol};
use bptrack_cli::experiment::{monte_carlo, simulate_run, track_recorded};
use bptrack_cli::fit::{polyfit, quadratic_gain};
use bptrack_cli::io::{self, fmt_sig};
use bptrack_cli::oracle::{assoc_oracle, bernoulli_check};
use bptrack_cli::{aggregate, time_average, CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bptrack", version, about = "Belief-propagation multisensor multitarget tracking experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of Monte Carlo runs, overriding the configuration.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write ground truth and measurement frames.
    Simulate,
    /// Track simulated (or recorded) runs and score them with OSPA.
    Track {
        /// Recorded frames; requires --truth.
        #[arg(long, requires = "truth")]
        frames: Option<PathBuf>,
        /// Recorded ground truth; requires --frames.
        #[arg(long, requires = "frames")]
        truth: Option<PathBuf>,
    },
    /// Check tracker components against exact references.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
    /// Per-step runtime sweep along one axis.
    Bench {
        #[arg(long)]
        axis: String,
        /// Comma-separated sweep values (default: the full-range sweep).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, default_value_t = Protocol::default().warmup)]
        warmup: usize,
        #[arg(long, default_value_t = Protocol::default().steps)]
        steps: usize,
        /// Replays of the run; each step keeps its fastest time.
        #[arg(long, default_value_t = Protocol::default().repeats)]
        repeats: usize,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Association marginals versus exact enumeration.
    Assoc {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 3)]
        max_targets: usize,
        #[arg(long, default_value_t = 3)]
        max_measurements: usize,
    },
    /// One-target tracker versus the grid Bernoulli filter.
    Bernoulli {
        #[arg(long, default_value_t = 3000)]
        particles: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(runs) = cli.common.runs {
        cfg.experiment.monte_carlo_runs = runs;
    }
    if let Some(out) = &cli.common.out {
        cfg.experiment.output_dir = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    if let Some(threads) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
    }
    let seed = cfg.experiment.seed;
    let out = PathBuf::from(&cfg.experiment.output_dir);

    match cli.command {
        Command::Simulate => simulate(&cfg, seed, &out),
        Command::Track { frames, truth } => track(&cfg, seed, &out, frames.as_deref().zip(truth.as_deref())),
        Command::Oracle { which } => oracle(which, seed),
        Command::Bench { axis, values, warmup, steps, repeats } => {
            let axis: Axis = axis.parse()?;
            let values = values.unwrap_or_else(|| axis.default_values());
            bench(&cfg, seed, &out, axis, &values, Protocol { warmup, steps, repeats })
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn simulate(cfg: &RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let mut truth_rows = Vec::new();
    let mut frame_rows = Vec::new();
    for run in 0..cfg.experiment.monte_carlo_runs {
        let (truth, frames) = simulate_run(cfg, seed, run)?;
        truth_rows.extend(io::truth_rows(run, &truth));
        for (i, f) in frames.iter().enumerate() {
            frame_rows.extend(io::frame_rows(run, i + 1, f));
        }
    }
    io::write_truth(create(out, "truth.csv")?, &truth_rows)?;
    io::write_frames(create(out, "frames.csv")?, &frame_rows)?;
    println!(
        "wrote {} truth rows and {} frame rows to {}",
        truth_rows.len(),
        frame_rows.len(),
        out.display()
    );
    Ok(())
}

fn track(cfg: &RunConfig, seed: u64, out: &Path, recorded: Option<(&Path, &Path)>) -> Result<(), CliError> {
    let rows = match recorded {
        None => monte_carlo(cfg, seed, cfg.experiment.monte_carlo_runs)?,
        Some((frames, truth)) => {
            let steps = cfg.scenario.n_steps;
            let f = io::read_frames(File::open(frames)?)?;
            let t = io::read_truth(File::open(truth)?)?;
            let frames = io::assemble_frames(&f, steps, cfg.scenario.num_sensors)?;
            let truth = io::assemble_truth(&t, steps)?;
            track_recorded(cfg, seed, &frames, &truth)?
        }
    };
    let mospa = aggregate(&rows);
    io::write_results(create(out, "results.csv")?, &rows)?;
    io::write_mospa(create(out, "mospa.csv")?, &mospa)?;
    let last = mospa.last().map_or(0, |r| r.n);
    println!(
        "{} rows; time-averaged MOSPA over n = 1..={last}: {}",
        rows.len(),
        fmt_sig(time_average(&mospa, 1..=last))
    );
    Ok(())
}

fn oracle(which: OracleCommand, seed: u64) -> Result<(), CliError> {
    match which {
        OracleCommand::Assoc { instances, max_targets, max_measurements } => {
            let r = assoc_oracle(instances, max_targets, max_measurements, seed)?;
            println!("instances            {}", r.instances);
            println!("max abs error        {:.3e}", r.max_abs);
            println!("mean abs error       {:.3e}", r.mean_abs);
            println!("median abs error     {:.3e}", r.median_abs);
            println!("single-target rel    {:.3e}", r.single_target_max_rel);
            println!("unconverged          {}", r.unconverged);
            if !r.passes() {
                return Err(CliError::OracleTolerance("association marginals deviate from enumeration".into()));
            }
        }
        OracleCommand::Bernoulli { particles } => {
            let r = bernoulli_check(particles, seed)?;
            println!("n,oracle,tracker");
            for (n, (a, b)) in r.oracle.iter().zip(&r.tracker).enumerate() {
                println!("{},{},{}", n + 1, fmt_sig(*a), fmt_sig(*b));
            }
            println!("max abs deviation {:.4}, mean {:.4}", r.max_abs, r.mean_abs);
            if !r.passes() {
                return Err(CliError::OracleTolerance(format!(
                    "existence deviation {:.4} exceeds tolerance",
                    r.max_abs
                )));
            }
        }
    }
    Ok(())
}

fn bench(cfg: &RunConfig, seed: u64, out: &Path, axis: Axis, values: &[f64], protocol: Protocol) -> Result<(), CliError> {
    let points = run_sweep(cfg, axis, values, seed, protocol)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(out, &format!("bench_{}.csv", axis.name()))?);
    let csv_err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record([axis.name(), "mean_ms", "median_ms"]).map_err(csv_err)?;
    for p in &points {
        w.write_record([fmt_sig(p.value), fmt_sig(p.mean_ms), fmt_sig(p.median_ms)])
            .map_err(csv_err)?;
        println!("{} = {:>6}: mean {:>9.3} ms, median {:>9.3} ms", axis.name(), p.value, p.mean_ms, p.median_ms);
    }
    w.flush()?;
    if points.len() >= 3 {
        let x: Vec<f64> = points.iter().map(|p| p.value).collect();
        let y: Vec<f64> = points.iter().map(|p| p.median_ms).collect();
        println!("linear fit R^2 {:.4}", polyfit(&x, &y, 1).r_squared);
        println!("quadratic fit residual reduction {:.1}%", 100.0 * quadratic_gain(&x, &y));
    }
    Ok(())
}
