//! Command-line driver: run scenarios, verify library invariants, render
//! figures, and sweep seeds.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use armnet_core::scenario::{self, LoadedScenario};
use armnet_core::subtask::Subtask;
use armnet_core::{checks, figures, report, sim, trace::SimTrace, Signum};

/// Environment variable overriding the scenario's base seed. A `--seed` flag
/// outranks it.
const SEED_ENV: &str = "ARMNET_SEED";

#[derive(Parser)]
#[command(
    name = "armnet",
    about = "Simulate networks of planar arms cooperatively tracking a moving reference",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario: write the trace, the report, and the figure set.
    ///
    /// Exits 0 only when every declared threshold passes. When the scenario
    /// assigns subtasks, a second run with the subtasks disabled is written
    /// alongside the first and the comparison figures are rendered.
    Run {
        /// Scenario file (TOML)
        scenario: PathBuf,
        /// Output directory (default runs/<scenario-name>)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario's seed (also via ARMNET_SEED; the flag wins)
        #[arg(long)]
        seed: Option<u64>,
        /// Replace the estimator's exact signum with tanh(z/EPS)
        #[arg(long, value_name = "EPS")]
        smooth_sgn: Option<f64>,
    },
    /// Check every library invariant against independent oracles.
    Verify {
        /// Seed for the randomized checks
        #[arg(long, default_value_t = 2026)]
        seed: u64,
    },
    /// Render the figure set from an existing trace.
    Plot {
        /// Trace file written by `run`
        trace: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Subtask-free twin trace; adds the comparison figures
        #[arg(long)]
        without: Option<PathBuf>,
        /// Scenario the traces came from; names the subtask arms for the
        /// comparison figures (otherwise every arm with a manipulability
        /// column is compared and joint comparisons are skipped)
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Run a scenario across a seed range and aggregate pass rates.
    Sweep {
        /// Scenario file (TOML)
        scenario: PathBuf,
        /// Seed range, half-open `a..b` or inclusive `a..=b`
        #[arg(long)]
        seeds: String,
        /// Replace the estimator's exact signum with tanh(z/EPS)
        #[arg(long, value_name = "EPS")]
        smooth_sgn: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            smooth_sgn,
        } => cmd_run(&scenario, out, seed, smooth_sgn),
        Command::Verify { seed } => cmd_verify(seed),
        Command::Plot {
            trace,
            out,
            without,
            scenario,
        } => cmd_plot(&trace, &out, without.as_deref(), scenario.as_deref()),
        Command::Sweep {
            scenario,
            seeds,
            smooth_sgn,
        } => cmd_sweep(&scenario, &seeds, smooth_sgn),
    };
    match outcome {
        Ok(passed) => {
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

/// Loads a scenario and applies the seed and signum overrides, printing any
/// validation warnings to stderr.
fn load(
    path: &Path,
    seed_flag: Option<u64>,
    smooth_sgn: Option<f64>,
) -> Result<LoadedScenario, String> {
    let mut loaded = scenario::parse_scenario(path).map_err(|e| e.to_string())?;
    if let Some(seed) = seed_override(seed_flag)? {
        loaded.config.seed = seed;
    }
    if let Some(epsilon) = smooth_sgn {
        if epsilon <= 0.0 || !epsilon.is_finite() {
            return Err(format!("--smooth-sgn must be positive, got {epsilon}"));
        }
        loaded.config.estimator.signum = Signum::Smooth { epsilon };
    }
    let warnings = loaded.config.validate().map_err(|e| e.to_string())?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded)
}

fn seed_override(flag: Option<u64>) -> Result<Option<u64>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| format!("{SEED_ENV} must be an unsigned integer, got {text:?}")),
        Err(_) => Ok(None),
    }
}

fn cmd_run(
    scenario_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    smooth_sgn: Option<f64>,
) -> Result<bool, String> {
    let loaded = load(scenario_path, seed, smooth_sgn)?;
    let config = &loaded.config;
    let out_dir = out.unwrap_or_else(|| PathBuf::from("runs").join(&config.name));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;

    let has_subtask = config.arms.iter().any(|a| a.subtask != Subtask::None);
    let (trace, twin) = if has_subtask {
        let (with, without) = sim::run_pair_subtask(config).map_err(|e| e.to_string())?;
        (with, Some(without))
    } else {
        (sim::run(config).map_err(|e| e.to_string())?, None)
    };

    trace
        .write_csv(out_dir.join("trace.csv"))
        .map_err(|e| e.to_string())?;
    if let Some(twin) = &twin {
        twin.write_csv(out_dir.join("trace_no_subtask.csv"))
            .map_err(|e| e.to_string())?;
    }

    let run_report =
        report::compute_report(&trace, config, &loaded.thresholds).map_err(|e| e.to_string())?;
    let text = run_report.to_string();
    std::fs::write(out_dir.join("report.txt"), &text)
        .map_err(|e| format!("cannot write report.txt: {e}"))?;
    std::fs::write(out_dir.join("report.json"), run_report.to_json())
        .map_err(|e| format!("cannot write report.json: {e}"))?;

    figures::render_figures(&trace, &out_dir).map_err(|e| e.to_string())?;
    if let Some(twin) = &twin {
        render_comparisons(&trace, twin, config, &out_dir)?;
    }

    print!("{text}");
    println!("outputs: {}", out_dir.display());
    Ok(run_report.passed)
}

/// Renders the per-arm comparison figures a subtask pair supports.
fn render_comparisons(
    with: &SimTrace,
    without: &SimTrace,
    config: &sim::ScenarioConfig,
    out_dir: &Path,
) -> Result<(), String> {
    for (i, arm) in config.arms.iter().enumerate() {
        let a = i + 1;
        match arm.subtask {
            Subtask::None => {}
            Subtask::JointTarget { target, .. } => {
                figures::render_joint_comparison(with, without, a, Some(target), out_dir)
                    .map_err(|e| e.to_string())?;
            }
            Subtask::Manipulability { .. } => {
                figures::render_manipulability_comparison(with, without, a, out_dir)
                    .map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(())
}

fn cmd_verify(seed: u64) -> Result<bool, String> {
    let results = checks::run_all(seed);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut passed = 0usize;
    for r in &results {
        println!(
            "{}  {:width$}  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        passed += usize::from(r.passed);
    }
    println!("{passed}/{} properties hold", results.len());
    Ok(passed == results.len())
}

fn cmd_plot(
    trace_path: &Path,
    out_dir: &Path,
    without: Option<&Path>,
    scenario_path: Option<&Path>,
) -> Result<bool, String> {
    let trace = SimTrace::read_csv(trace_path).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let written = figures::render_figures(&trace, out_dir).map_err(|e| e.to_string())?;
    let mut count = written.len();

    if let Some(without) = without {
        let twin = SimTrace::read_csv(without).map_err(|e| e.to_string())?;
        match scenario_path {
            Some(path) => {
                let loaded = scenario::parse_scenario(path).map_err(|e| e.to_string())?;
                render_comparisons(&trace, &twin, &loaded.config, out_dir)?;
                count += loaded
                    .config
                    .arms
                    .iter()
                    .filter(|a| a.subtask != Subtask::None)
                    .count();
            }
            None => {
                // without the scenario, compare whatever announces itself
                for name in trace.columns() {
                    if let Some(arm) = name
                        .strip_prefix("manip")
                        .and_then(|n| n.parse::<usize>().ok())
                    {
                        figures::render_manipulability_comparison(&trace, &twin, arm, out_dir)
                            .map_err(|e| e.to_string())?;
                        count += 1;
                    }
                }
            }
        }
    }
    println!("wrote {count} figures to {}", out_dir.display());
    Ok(true)
}

fn parse_seed_range(text: &str) -> Result<(u64, u64), String> {
    let bad = || format!("--seeds expects a..b or a..=b, got {text:?}");
    let (a, b, inclusive) = match text.split_once("..=") {
        Some((a, b)) => (a, b, true),
        None => match text.split_once("..") {
            Some((a, b)) => (a, b, false),
            None => return Err(bad()),
        },
    };
    let start: u64 = a.trim().parse().map_err(|_| bad())?;
    let end: u64 = b.trim().parse().map_err(|_| bad())?;
    let end = if inclusive {
        end.checked_add(1).ok_or_else(bad)?
    } else {
        end
    };
    if end <= start {
        return Err(format!("--seeds range {text:?} is empty"));
    }
    Ok((start, end))
}

fn cmd_sweep(scenario_path: &Path, seeds: &str, smooth_sgn: Option<f64>) -> Result<bool, String> {
    let (start, end) = parse_seed_range(seeds)?;
    let loaded = load(scenario_path, None, smooth_sgn)?;
    let seeds: Vec<u64> = (start..end).collect();

    // independent runs, fanned out across available cores
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(seeds.len());
    let mut results: Vec<Option<Result<report::RunReport, String>>> = vec![None; seeds.len()];
    std::thread::scope(|scope| {
        let chunks: Vec<_> = results.chunks_mut(seeds.len().div_ceil(workers)).collect();
        for (w, chunk) in chunks.into_iter().enumerate() {
            let loaded = &loaded;
            let seeds = &seeds;
            scope.spawn(move || {
                let base = w * seeds.len().div_ceil(workers);
                for (k, slot) in chunk.iter_mut().enumerate() {
                    let mut config = loaded.config.clone();
                    config.seed = seeds[base + k];
                    let outcome = sim::run(&config)
                        .map_err(|e| e.to_string())
                        .and_then(|trace| {
                            report::compute_report(&trace, &config, &loaded.thresholds)
                                .map_err(|e| e.to_string())
                        });
                    *slot = Some(outcome);
                }
            });
        }
    });

    let mut passed = 0usize;
    for (seed, outcome) in seeds.iter().zip(results) {
        match outcome.expect("every slot is filled") {
            Ok(report) if report.passed => {
                println!("seed {seed}: PASS");
                passed += 1;
            }
            Ok(report) => {
                println!("seed {seed}: FAIL ({})", report.failures.join("; "));
            }
            Err(e) => println!("seed {seed}: ERROR ({e})"),
        }
    }
    let total = seeds.len();
    println!(
        "{passed}/{total} seeds passed ({:.0}%)",
        100.0 * passed as f64 / total as f64
    );
    Ok(passed == total)
}
