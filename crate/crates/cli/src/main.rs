use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use casimir_core::checks::run_checks;
use casimir_core::dynamics::Method;
use casimir_core::scenario::{
    bundled, bundled_names, convergence_check, load_scenario, sweep, write_coupling_matrix, write_mode_table,
    write_sweep_csv, ModesConfig, RunOptions, Scenario, BUNDLED,
};
use clap::{Args, Parser, Subcommand};

/// Three-body SQUID-cavity refrigerator simulator.
#[derive(Parser)]
#[command(name = "casimir", version, about)]
struct Cli {
    /// Worker threads for ensemble evolution and sweeps.
    #[arg(long, global = true, env = "CASIMIR_THREADS")]
    threads: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario file, or `bundled:<name>` for a shipped scenario.
    #[arg(long)]
    config: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write the trajectory CSV, metadata and report.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the scenario's propagation method.
        #[arg(long)]
        method: Option<Method>,
    },
    /// Solve the cavity eigenmodes and write the mode table.
    Modes {
        /// Geometry document or a scenario with derived coupling.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write the coupling matrix M[n][m].
        #[arg(long)]
        coupling_out: Option<PathBuf>,
    },
    /// Rerun a scenario over a list of parameter values.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated parameter paths, e.g. `modes[3].temperature,modes[4].temperature`.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant suite; nonzero exit on failure.
    Check,
    /// Rerun a scenario on a ladder of uniform per-mode dimensions.
    Converge {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_delimiter = ',', default_value = "8,12,16")]
        dims: Vec<usize>,
        /// Allowed delta as a fraction of the finest E_cold(0).
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        /// Write the table as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled scenarios or print one of them.
    Scenarios {
        /// Print this scenario's JSON.
        #[arg(long)]
        show: Option<String>,
    },
}

fn load(config: &str) -> Result<Scenario> {
    if let Some(name) = config.strip_prefix("bundled:") {
        return Ok(bundled(name)?);
    }
    load_scenario(config).with_context(|| format!("loading scenario {config}"))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn execute(cli: Cli) -> Result<bool> {
    let options = RunOptions {
        method: None,
        threads: cli.threads,
    };
    match cli.command {
        Command::Simulate { config, out_dir, method } => {
            let scenario = load(&config.config)?;
            let options = RunOptions { method, ..options };
            let (out, files) = casimir_core::scenario::run_to_dir(&scenario, &out_dir, &options)?;
            let d = &out.metadata.diagnostics;
            println!(
                "{}: {} members, method {}, {:.2}s",
                scenario.name, out.metadata.members, out.metadata.method, out.metadata.wall_time_s
            );
            println!(
                "drift: norm {:.2e}, energy {:.2e}, charges {:.2e}",
                d.norm_drift,
                d.energy_drift_rel,
                d.max_charge_drift()
            );
            if let Some(r) = &out.report {
                println!(
                    "{}: E(0) {:.6}, min {:.6} at t = {:.3}, cooling achieved: {}",
                    r.cold, r.initial_cold_energy, r.min_cold_energy, r.t_min, r.cooling_achieved
                );
            }
            println!("wrote {}", files.trajectory_csv.display());
            Ok(true)
        }
        Command::Modes { config, out, coupling_out } => {
            let text = match config.strip_prefix("bundled:") {
                Some(name) => bundled(name)?.to_json(),
                None => fs::read_to_string(&config).with_context(|| format!("reading {config}"))?,
            };
            let cfg = ModesConfig::parse(&text)?;
            let (modes, m) = cfg.solve()?;
            write_mode_table(&modes, &cfg.geometry, create(&out)?)?;
            if let Some(path) = coupling_out {
                write_coupling_matrix(&m, create(&path)?)?;
            }
            println!("wrote {} modes to {}", modes.len(), out.display());
            Ok(true)
        }
        Command::Sweep { config, param, values, out } => {
            let scenario = load(&config.config)?;
            let (param, values) = match (param, values, &scenario.sweep) {
                (Some(p), Some(v), _) => (p, v),
                (None, None, Some(spec)) => (spec.parameter.clone(), spec.values.clone()),
                (p, v, Some(spec)) => (
                    p.unwrap_or_else(|| spec.parameter.clone()),
                    v.unwrap_or_else(|| spec.values.clone()),
                ),
                _ => bail!("give --param and --values (the scenario has no sweep block)"),
            };
            let rows = sweep(&scenario, &param, &values, &options)?;
            write_sweep_csv(&rows, create(&out)?)?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!("{} rows ({failed} failed) written to {}", rows.len(), out.display());
            Ok(true)
        }
        Command::Check => {
            let outcomes = options.install(run_checks)?;
            for o in &outcomes {
                println!(
                    "{} {:<24} [{:>6.2}s] {}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.name,
                    o.seconds,
                    o.detail
                );
            }
            Ok(outcomes.iter().all(|o| o.passed))
        }
        Command::Converge { config, dims, tolerance, out } => {
            let scenario = load(&config.config)?;
            let ladder: Vec<Vec<usize>> = dims.iter().map(|&d| vec![d; scenario.modes.len()]).collect();
            let table = convergence_check(&scenario, &ladder, tolerance, &options)?;
            for r in &table.rungs {
                match r.delta_to_next {
                    Some(d) => println!("dims {:?}: min E_{} {:.6}, delta to next {:.3e}", r.dims, table.cold, r.min_cold_energy, d),
                    None => println!("dims {:?}: min E_{} {:.6}", r.dims, table.cold, r.min_cold_energy),
                }
            }
            println!(
                "threshold {:.3e}; converged at rung {}",
                table.threshold(),
                table.converged_at.map_or("none".to_string(), |i| i.to_string())
            );
            if let Some(path) = out {
                serde_json::to_writer_pretty(create(&path)?, &table)?;
            }
            Ok(table.top_converged())
        }
        Command::Scenarios { show } => {
            match show {
                Some(name) => {
                    let text = BUNDLED
                        .iter()
                        .find(|(n, _)| *n == name)
                        .map(|(_, t)| *t)
                        .with_context(|| format!("no bundled scenario `{name}`"))?;
                    print!("{text}");
                }
                None => {
                    for name in bundled_names() {
                        let s = bundled(name)?;
                        println!("{name:<14} {}", s.description);
                    }
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
