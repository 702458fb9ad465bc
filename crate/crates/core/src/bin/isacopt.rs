//! Command-line front end: Monte Carlo sweeps, radiation footprint dumps,
//! and scenario validation.

use clap::{Parser, Subcommand};
use isacopt::harness::{self, Algorithm, RunOptions, SweepSpec};
use isacopt::scenario::{sample_channels, ScenarioSpec};
use isacopt::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "isacopt", version, about = "Cell-free ISAC activation and beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write results.csv / trials.csv.
    Run {
        /// Scenario file (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Sweep file (JSON).
        #[arg(long)]
        sweep: PathBuf,
        /// Algorithms to run (repeatable). Falls back to the sweep file's list.
        #[arg(long = "algo")]
        algos: Vec<Algorithm>,
        /// Master seed; defaults to the scenario file's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Polyblock relative tolerance.
        #[arg(long)]
        rho: Option<f64>,
        /// SCA penalty factor.
        #[arg(long)]
        eta: Option<f64>,
        /// SCA convergence tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Also write per-trial convergence traces.
        #[arg(long, default_value_t = false)]
        traces: bool,
    },
    /// Solve one realization and dump the radiation footprint grid.
    Footprint {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        algo: Algorithm,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() {
    std::process::exit(real_main());
}

const EXIT_OK: i32 = 0;
const EXIT_CONFIG: i32 = 1;
const EXIT_IO: i32 = 2;
const EXIT_ALL_INFEASIBLE: i32 = 3;

fn classify(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn read_file(path: &PathBuf) -> Result<String, i32> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_IO
    })
}

fn parse_scenario(path: &PathBuf) -> Result<ScenarioSpec, i32> {
    let text = read_file(path)?;
    match serde_json::from_str::<ScenarioSpec>(&text) {
        Ok(s) => Ok(s),
        Err(e) => {
            eprintln!(
                "error: {}:{}:{}: {e}",
                path.display(),
                e.line(),
                e.column()
            );
            Err(EXIT_CONFIG)
        }
    }
}

fn real_main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(code) => code,
    }
}

fn run(cli: Cli) -> Result<i32, i32> {
    match cli.command {
        Command::Run {
            scenario,
            sweep,
            algos,
            seed,
            out,
            rho,
            eta,
            tol,
            jobs,
            traces,
        } => {
            let base = parse_scenario(&scenario)?;
            let sweep_text = read_file(&sweep)?;
            let sweep_spec = match SweepSpec::from_json(&sweep_text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {}: {e}", sweep.display());
                    return Err(EXIT_CONFIG);
                }
            };
            let mut opts = RunOptions {
                jobs,
                ..Default::default()
            };
            if let Some(r) = rho {
                opts.rho = r;
            }
            if let Some(e) = eta {
                opts.eta = e;
            }
            if let Some(t) = tol {
                opts.conv_tol = t;
            }
            let master = seed.unwrap_or(base.rng_seed);
            let results = harness::run_sweep(
                &base,
                &sweep_spec,
                &algos,
                master,
                &opts,
                &out,
                traces,
            )
            .map_err(|e| {
                eprintln!("error: {e}");
                classify(&e)
            })?;
            for r in &results {
                println!(
                    "{:>10} {:>9}: mean utility {:.4} (outage {:.0}%) over {} trials",
                    r.sweep_value,
                    r.algorithm.name(),
                    r.mean_utility,
                    100.0 * r.outage_fraction,
                    r.trials
                );
            }
            if results.iter().all(|r| r.outage_fraction >= 1.0) {
                eprintln!("all trials infeasible");
                return Ok(EXIT_ALL_INFEASIBLE);
            }
            Ok(EXIT_OK)
        }
        Command::Footprint {
            scenario,
            algo,
            seed,
            out,
        } => {
            let base = parse_scenario(&scenario)?;
            let master = seed.unwrap_or(base.rng_seed);
            let mut rng = ChaCha8Rng::seed_from_u64(master);
            let cfg = base.resolve(&mut rng).map_err(|e| {
                eprintln!("error: {e}");
                classify(&e)
            })?;
            let channels = sample_channels(&cfg, &mut rng).map_err(|e| {
                eprintln!("error: {e}");
                classify(&e)
            })?;
            let opts = RunOptions::default();
            let aseed = harness::algorithm_seed(master, 0, 0, algo);
            let report = harness::run_trial(&cfg, &channels, algo, aseed, &opts).map_err(|e| {
                eprintln!("error: {e}");
                classify(&e)
            })?;
            let Some(sol) = report.solution.as_ref() else {
                eprintln!("trial infeasible; no footprint to dump");
                return Ok(EXIT_ALL_INFEASIBLE);
            };
            std::fs::create_dir_all(&out).map_err(|e| {
                eprintln!("error: cannot create {}: {e}", out.display());
                EXIT_IO
            })?;
            let path = out.join("footprint.csv");
            harness::footprint_dump(&cfg, &channels, sol, &path).map_err(|e| {
                eprintln!("error: {e}");
                classify(&e)
            })?;
            println!(
                "{} (utility {:.4}, activation {:?})",
                path.display(),
                report.utility,
                report.activation
            );
            Ok(EXIT_OK)
        }
        Command::Validate { scenario } => {
            let base = parse_scenario(&scenario)?;
            let mut rng = ChaCha8Rng::seed_from_u64(base.rng_seed);
            match base.resolve(&mut rng) {
                Ok(cfg) => {
                    println!(
                        "ok: B={} K={} Q={} N_tx={} N_bs={} grid {}x{}",
                        cfg.num_bs,
                        cfg.num_users,
                        cfg.num_targets,
                        cfg.num_tx_antennas,
                        cfg.max_active_bs,
                        cfg.area.x_count(),
                        cfg.area.y_count()
                    );
                    Ok(EXIT_OK)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Err(EXIT_CONFIG)
                }
            }
        }
    }
}
