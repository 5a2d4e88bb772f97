use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mcnoma::experiments::{self, parse_list, RadioConfig};
use mcnoma::oracle::{self, GridOptimum, Sandwich};
use mcnoma::polyblock::{SolveOptions, SolveResult, DEFAULT_MAX_ITERATIONS};
use mcnoma::{AllocatorRegistry, Error, Scenario};

/// Environment variable naming the directory that relative output paths are
/// resolved against.
const OUT_DIR_ENV: &str = "MCNOMA_OUT_DIR";

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID_SCENARIO: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "mcnoma", version, about = "Epsilon-optimal power allocation for multi-cell multi-carrier NOMA")]
struct Cli {
    /// Worker threads for parallel experiments (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one scenario from a radio config.
    Gen {
        #[command(flatten)]
        radio: RadioArgs,
        /// Trial index; selects the generator stream.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long, default_value = "scenario.json")]
        out: PathBuf,
    },
    /// Solve a scenario with one allocator.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "polyblock")]
        algo: String,
        #[command(flatten)]
        solver: SolverArgs,
        /// Grid points per dimension for the grid allocator.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, default_value = "result.json")]
        out: PathBuf,
        /// Also write the per-iteration bounds as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Mean sum rate against the per-carrier power cap.
    Sweep {
        #[command(flatten)]
        radio: RadioArgs,
        /// Comma-separated per-carrier caps in watts.
        #[arg(long)]
        caps: String,
        #[arg(long, default_value = "0.1,0.5,1")]
        epsilons: String,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
        max_iterations: usize,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Empirical CDF of the SIC gain-product differences.
    Cdf {
        #[command(flatten)]
        radio: RadioArgs,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value = "cdf.csv")]
        out: PathBuf,
    },
    /// Polyblock wall time and iterations against epsilon.
    Bench {
        #[command(flatten)]
        radio: RadioArgs,
        #[arg(long, default_value = "0.1,0.5,1")]
        epsilons: String,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
        max_iterations: usize,
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
    /// Compare a polyblock solve against the exhaustive grid.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 400)]
        grid: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RadioArgs {
    /// Radio config JSON; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl RadioArgs {
    fn load(&self) -> Result<RadioConfig> {
        let mut cfg = match &self.config {
            Some(path) => RadioConfig::from_json(&read(path)?)?,
            None => RadioConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Optimality gap in nats.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iterations: usize,
}

impl SolverArgs {
    fn options(&self, grid_points: usize, record_trace: bool) -> SolveOptions {
        SolveOptions {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            grid_points,
            record_trace,
            ..Default::default()
        }
    }
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Done,
    /// Output was written but some solve hit its budget.
    Uncertified,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Uncertified) => {
            eprintln!("warning: iteration budget exceeded; results are not certified");
            ExitCode::from(EXIT_BUDGET)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::InvalidScenario(_) | Error::IndexOutOfRange { .. } | Error::UnsupportedWeights | Error::Json(_)) => {
            EXIT_INVALID_SCENARIO
        }
        _ => EXIT_USAGE,
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Gen { radio, trial, out } => {
            let s = experiments::generate_trial(&radio.load()?, trial)?;
            write_text(&out, &(s.to_json()? + "\n"))?;
            Ok(Outcome::Done)
        }
        Command::Solve {
            scenario,
            algo,
            solver,
            grid,
            out,
            trace,
        } => {
            let s = load_scenario(&scenario)?;
            let alloc = AllocatorRegistry::builtin().get(&algo)?;
            let res = alloc.allocate(&s, &solver.options(grid, trace.is_some()))?;
            write_json(&out, &res)?;
            if let Some(path) = trace {
                write_trace(&path, &res)?;
            }
            println!("{}: {}", res.algorithm, alloc.summary());
            println!(
                "sum rate {:.6} nats ({:.6} bits), status {:?}, {} iterations, {:.3} ms",
                res.sum_rate_nats, res.sum_rate_bits, res.status, res.iterations, res.wall_time_ms
            );
            Ok(if res.status == mcnoma::polyblock::SolveStatus::BudgetExceeded {
                Outcome::Uncertified
            } else {
                Outcome::Done
            })
        }
        Command::Sweep {
            radio,
            caps,
            epsilons,
            trials,
            max_iterations,
            out,
        } => {
            let base = SolveOptions {
                max_iterations,
                ..Default::default()
            };
            let table = experiments::power_sweep(&radio.load()?, &parse_list(&caps)?, &parse_list(&epsilons)?, trials, &base)?;
            write_with(&out, |w| table.write_csv(w))?;
            println!("baselines {:?} are declared stand-ins, not published schemes", experiments::BASELINES);
            let certified = table.records.iter().all(|r| r.epsilon.is_none() || r.certified);
            Ok(if certified { Outcome::Done } else { Outcome::Uncertified })
        }
        Command::Cdf { radio, samples, out } => {
            let table = experiments::cdf_experiment(&radio.load()?, samples)?;
            write_with(&out, |w| table.write_csv(w))?;
            println!(
                "P(difference >= 0) = {:.6}, 95% CI [{:.6}, {:.6}] over {} values from {} drops",
                table.p_nonneg,
                table.ci_low,
                table.ci_high,
                table.values.len(),
                table.samples
            );
            Ok(Outcome::Done)
        }
        Command::Bench {
            radio,
            epsilons,
            trials,
            max_iterations,
            out,
        } => {
            let base = SolveOptions {
                max_iterations,
                ..Default::default()
            };
            let table = experiments::runtime_bench(&radio.load()?, &parse_list(&epsilons)?, trials, &base)?;
            write_with(&out, |w| table.write_csv(w))?;
            let certified = table.records.iter().all(|r| r.certified);
            Ok(if certified { Outcome::Done } else { Outcome::Uncertified })
        }
        Command::Oracle {
            scenario,
            grid,
            solver,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let res = mcnoma::polyblock::solve_with(&s, &solver.options(grid, false))?;
            let g = oracle::grid_optimum(&s, grid)?;
            let check = oracle::sandwich(res.sum_rate_nats, &g, solver.epsilon);
            let report = OracleReport {
                verdict: if check.pass && res.certified { "pass" } else { "fail" },
                certified: res.certified,
                sandwich: check,
                polyblock: &res,
                grid: &g,
            };
            write_json(&out, &report)?;
            println!(
                "verdict {}: polyblock {:.6}, grid {:.6}, grid bound {:.3e}",
                report.verdict, res.sum_rate_nats, g.value, g.error_bound
            );
            Ok(if res.certified { Outcome::Done } else { Outcome::Uncertified })
        }
    }
}

#[derive(Serialize)]
struct OracleReport<'a> {
    verdict: &'static str,
    certified: bool,
    sandwich: Sandwich,
    polyblock: &'a SolveResult,
    grid: &'a GridOptimum,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let s = Scenario::from_json(&read(path)?).with_context(|| format!("loading {}", path.display()))?;
    let report = s.validate()?;
    for c in &report.binding_cell_caps {
        eprintln!(
            "warning: cell {} carrier caps sum to {} W, above its cell cap {} W",
            c.cell, c.carrier_cap_sum, c.cell_cap
        );
    }
    Ok(s)
}

/// Relative paths land in `$MCNOMA_OUT_DIR` when it is set.
fn output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> mcnoma::Result<()>) -> Result<()> {
    let path = output_path(path);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_with(path, |w| Ok(w.write_all(text.as_bytes())?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn write_trace(path: &Path, res: &SolveResult) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "iteration,upper_bound,incumbent")?;
        for row in &res.trace {
            write!(w, "{},", row.iteration)?;
            experiments::write_float(w, row.upper_bound)?;
            w.write_all(b",")?;
            experiments::write_float(w, row.incumbent)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}
