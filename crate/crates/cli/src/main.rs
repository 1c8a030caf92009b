use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use irs_diagnosis::harness::{self, ExperimentConfig, MethodSelector};
use irs_diagnosis::Error;

const EXIT_REPRO_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "irsdiag", version, about = "Locate stuck elements on an IRS from over-the-air measurements")]
struct Cli {
    /// TOML experiment config; built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// sortpm, bisect or both.
    #[arg(long, global = true)]
    method: Option<MethodSelector>,
    /// Comma-separated transmit powers in dBm.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    power_dbm: Option<Vec<f64>>,
    /// Comma-separated receive-antenna counts.
    #[arg(long, global = true, value_delimiter = ',')]
    antennas: Option<Vec<usize>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one trial at the first sweep point and print every step.
    Run {
        /// Trial index whose seed is used.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Run the full sweep and write the CSV.
    Sweep {
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay the worked examples and check every intermediate value.
    ReproExamples,
    /// Search for a noise floor that puts the power grid across the accuracy transition.
    Calibrate {
        #[arg(long, default_value_t = -90.0, allow_negative_numbers = true)]
        from_dbm: f64,
        #[arg(long, default_value_t = -30.0, allow_negative_numbers = true)]
        to_dbm: f64,
        #[arg(long, default_value_t = 5.0)]
        step_db: f64,
        /// Write the config with the chosen noise floor here.
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if let Some(method) = cli.method {
        cfg.method = method;
    }
    if let Some(p) = &cli.power_dbm {
        cfg.power_dbm = p.clone();
    }
    if let Some(m) = &cli.antennas {
        cfg.antennas = m.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_one(cfg: &ExperimentConfig, trial: usize) -> anyhow::Result<()> {
    let point = cfg.points()[0];
    let seed = harness::trial_seed(cfg.seed, trial);
    let run = harness::simulate_trial(cfg, point, seed)?;
    let truth = run.scene.defect().context("scene without defect")?;
    println!("grid {}x{}, P_t = {} dBm, M = {}, seed {seed}", cfg.n_h, cfg.n_v, point.power_dbm, point.antennas);
    println!(
        "true rectangle: columns {}..={}, rows {}..={}",
        truth.h_min, truth.h_max, truth.v_min, truth.v_max
    );
    for (b, out) in &run.sortpm {
        println!(
            "sortpm {b:?}: estimate {} after {} rounds, {} slots, converged {}, fallbacks {}",
            out.estimate, out.rounds, out.slots, out.converged, out.fallbacks
        );
    }
    for (axis, out) in &run.bisect {
        for s in &out.trace {
            println!(
                "bisect {axis:?} cut {}: {:?} -> min in [{}, {}], max in [{}, {}]",
                s.cut, s.case, s.after.lb_min, s.after.ub_min, s.after.lb_max, s.after.ub_max
            );
        }
        println!("bisect {axis:?}: ({}, {}) in {} slots", out.n_min, out.n_max, out.slots);
    }
    for r in &run.results {
        println!(
            "{}: estimate {:?}, correct {}, slots {}, converged {}",
            r.method, r.estimate, r.correct, r.slots_used, r.converged
        );
    }
    Ok(())
}

fn calibrate(cfg: &ExperimentConfig, from: f64, to: f64, step: f64, write: Option<&PathBuf>) -> anyhow::Result<()> {
    if step.is_nan() || step <= 0.0 || from > to {
        return Err(Error::Config(format!("bad noise range {from}..{to} step {step}")).into());
    }
    let n = ((to - from) / step).floor() as usize;
    let candidates: Vec<f64> = (0..=n).map(|i| from + step * i as f64).collect();
    let cal = harness::calibrate(cfg, &candidates, cfg.trials)?;
    for p in &cal.points {
        let cells: Vec<String> = p
            .accuracy
            .iter()
            .map(|(m, lo, hi)| format!("{m} {lo:.3} -> {hi:.3}"))
            .collect();
        println!("noise {:>6.1} dBm: {}{}", p.noise_dbm, cells.join(", "), if p.in_regime() { "  *" } else { "" });
    }
    match cal.chosen {
        Some(noise) => {
            println!("chosen noise floor: {noise} dBm");
            if let Some(path) = write {
                let out = ExperimentConfig {
                    noise_dbm: noise,
                    ..cfg.clone()
                };
                std::fs::write(path, out.to_toml_string()?).with_context(|| format!("writing {}", path.display()))?;
                println!("wrote {}", path.display());
            }
        }
        None => println!("no candidate spans the accuracy transition"),
    }
    Ok(())
}

fn exit_for(err: &anyhow::Error) -> ExitCode {
    eprintln!("error: {err:#}");
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = match &cli.command {
        Command::Run { trial } => run_one(&cfg, *trial),
        Command::Sweep { out } => harness::sweep_to_path(&cfg, out)
            .map(|r| println!("wrote {} points to {}", r.len(), out.display()))
            .map_err(Into::into),
        Command::ReproExamples => match harness::repro_examples() {
            Ok(report) => {
                println!("{report}");
                if !report.passed() {
                    return ExitCode::from(EXIT_REPRO_FAILED);
                }
                Ok(())
            }
            Err(e) => Err(e.into()),
        },
        Command::Calibrate {
            from_dbm,
            to_dbm,
            step_db,
            write,
        } => calibrate(&cfg, *from_dbm, *to_dbm, *step_db, write.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}
