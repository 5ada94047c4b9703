//! Command-line front end: configuration in, experiment artifacts out.
//!
//! Every run names a cell configuration with `--config`; the subcommand
//! decides what to compute. `solve-state` prints one state's equilibrium to
//! standard output; every other subcommand writes its data to the file named
//! by `--out` and keeps standard error for diagnostics, so pipelines can
//! trust the artifacts. Any model or I/O failure exits nonzero with the
//! error chain on standard error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use greencell::fixed_point::{metrics_from_solution, solve_heterogeneous};
use greencell::simulator::{simulate, simulate_with_trace};
use greencell::{
    run_sweep, write_sweep_csv, CellConfig, CellState, Error, PowerPolicy, PowerVector, Result,
    SimConfig, StateSpace, SweepSpec, TraceEvent,
};

/// Flow-level energy-efficiency experiments for a shared downlink cell.
#[derive(Parser)]
#[command(name = "greencell", version, about)]
struct Cli {
    /// Cell configuration file (JSON).
    #[arg(long)]
    config: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one state's activity equilibrium and print its metrics.
    SolveState {
        /// Occupancy per zone, e.g. "2" or "1,3".
        #[arg(long)]
        state: String,
        /// Transmit power per zone in watts, e.g. "1.0" or "0.02,0.01".
        #[arg(long)]
        power: String,
    },
    /// Optimize every state separately; write the per-state optima table.
    LocalOpt {
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize the traffic-averaged efficiency under the blocking
    /// constraint; write the policy and its score.
    GlobalOpt {
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo run under a policy (default: the per-state optima).
    Simulate {
        /// Master seed; replication r uses seed + r.
        #[arg(long)]
        seed: u64,
        /// Simulated seconds per replication.
        #[arg(long)]
        horizon: f64,
        /// Leading seconds excluded from the empirical metrics.
        #[arg(long, default_value_t = 0.0)]
        warmup: f64,
        /// Independent replications to average.
        #[arg(long, default_value_t = 1)]
        reps: u32,
        /// Policy file: either a state-to-powers map or global-opt output.
        #[arg(long, conflicts_with = "power")]
        policy: Option<PathBuf>,
        /// Constant per-zone powers in watts, e.g. "0.02,0.01".
        #[arg(long)]
        power: Option<String>,
        /// Also write the first replication's event trace to this CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Output JSON path for the aggregated result.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a sweep specification; write CSV rows in input order.
    Sweep {
        /// Sweep specification file (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

/// What `global-opt` writes: the score, the constraint status, the ascent
/// trace, and the policy itself (reloadable via `simulate --policy`).
#[derive(Serialize, Deserialize)]
struct GlobalReport {
    objective_bits_per_joule: f64,
    blocking_probability: f64,
    feasible: bool,
    trace: Vec<f64>,
    policy: std::collections::BTreeMap<String, Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = CellConfig::load(&cli.config)?;
    let space = config.state_space()?;
    match cli.command {
        Command::SolveState { state, power } => solve_state(&config, &space, &state, &power),
        Command::LocalOpt { out } => local_opt(&config, &space, &out),
        Command::GlobalOpt { out } => global_opt(&config, &space, &out),
        Command::Simulate {
            seed,
            horizon,
            warmup,
            reps,
            policy,
            power,
            trace,
            out,
        } => {
            let sim = SimConfig {
                horizon_s: horizon,
                warmup_s: warmup,
                seed,
                replications: reps,
            };
            run_simulation(&config, &space, &sim, policy, power, trace, &out)
        }
        Command::Sweep { spec, out } => sweep(&config, &spec, &out),
    }
}

fn parse_powers(text: &str, n_zones: usize) -> Result<PowerVector> {
    let values = text
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("power: could not parse {tok:?} as watts: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != n_zones {
        return Err(Error::Config(format!(
            "power: expected {n_zones} comma-separated values, got {}",
            values.len()
        )));
    }
    Ok(PowerVector(values))
}

fn admissible_state(space: &StateSpace, text: &str) -> Result<CellState> {
    let state = CellState::from_str(text)?;
    if space.index_of(&state).is_none() {
        return Err(Error::BadState {
            state: text.to_string(),
            reason: format!(
                "outside the admissible space ({} zones, at most {} flows)",
                space.zones(),
                space.n_max()
            ),
        });
    }
    Ok(state)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn solve_state(config: &CellConfig, space: &StateSpace, state: &str, power: &str) -> Result<()> {
    let state = admissible_state(space, state)?;
    let powers = parse_powers(power, config.zones.len())?;
    let solution = solve_heterogeneous(
        &state,
        &powers,
        &config.zones,
        &config.rate_curve,
        &config.traffic,
    )?;
    let metrics = metrics_from_solution(state.counts(), &powers, &solution, config.fixed_cost_w);
    println!("state: {state}");
    println!("phi: {}", join(&solution.phi));
    println!("r_active_bps: {}", join(&solution.r_active));
    println!("throughput_bps: {}", metrics.throughput_bps);
    println!("power_w: {}", metrics.power_w);
    println!("eta_bits_per_joule: {}", metrics.eta_bits_per_joule);
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
}

fn local_opt(config: &CellConfig, space: &StateSpace, out: &Path) -> Result<()> {
    let policy = config.local_policy(space)?;
    let mut evaluator = config.evaluator(space);
    evaluator.load_policy(&policy)?;

    let mut writer = csv::Writer::from_writer(create(out)?);
    let csv_err = |e: csv::Error| Error::Config(format!("local-opt csv: {e}"));
    let mut header = vec!["state".to_string()];
    header.extend((1..=config.zones.len()).map(|j| format!("power_w_{j}")));
    header.extend(
        ["throughput_bps", "mean_power_w", "eta_bits_per_joule"]
            .iter()
            .map(|s| s.to_string()),
    );
    writer.write_record(&header).map_err(csv_err)?;

    let mut rows = 0usize;
    for idx in 0..space.len() {
        let state = space.state(idx);
        if state.is_empty() {
            continue;
        }
        let eval = evaluator
            .state_eval(idx)
            .expect("local policy covers every nonempty state");
        let mut record = vec![state.to_string()];
        record.extend(eval.powers.as_slice().iter().map(f64::to_string));
        record.push(eval.metrics.throughput_bps.to_string());
        record.push(eval.metrics.power_w.to_string());
        record.push(eval.metrics.eta_bits_per_joule.to_string());
        writer.write_record(&record).map_err(csv_err)?;
        rows += 1;
    }
    writer.flush().map_err(|e| Error::Config(format!("local-opt csv: {e}")))?;
    eprintln!("wrote {rows} per-state optima to {}", out.display());
    Ok(())
}

fn global_opt(config: &CellConfig, space: &StateSpace, out: &Path) -> Result<()> {
    let result = config.optimize(space)?;
    let report = GlobalReport {
        objective_bits_per_joule: result.objective_bits_per_joule,
        blocking_probability: result.blocking_probability,
        feasible: result.feasible,
        trace: result.trace,
        policy: result.policy.to_map(space),
    };
    let mut writer = create(out)?;
    serde_json::to_writer_pretty(&mut writer, &report)
        .map_err(|e| Error::Config(format!("global-opt json: {e}")))?;
    writeln!(writer).ok();
    writer.flush().map_err(|source| Error::Io {
        path: out.display().to_string(),
        source,
    })?;
    eprintln!(
        "global optimum {} bit/J, blocking {:.3e}, feasible: {} -> {}",
        report.objective_bits_per_joule,
        report.blocking_probability,
        report.feasible,
        out.display()
    );
    Ok(())
}

/// Accepts either a bare state-to-powers map or a full global-opt report.
fn load_policy_file(space: &StateSpace, path: &Path) -> Result<PowerPolicy> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    type PowerMap = std::collections::BTreeMap<String, Vec<f64>>;
    if let Ok(map) = serde_json::from_str::<PowerMap>(&text) {
        return PowerPolicy::from_map(space, &map);
    }
    let report: GlobalReport = serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!(
            "policy file {}: neither a state-to-powers map nor a global-opt report: {e}",
            path.display()
        ))
    })?;
    PowerPolicy::from_map(space, &report.policy)
}

fn run_simulation(
    config: &CellConfig,
    space: &StateSpace,
    sim: &SimConfig,
    policy_path: Option<PathBuf>,
    power: Option<String>,
    trace_path: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    let policy = match (policy_path, power) {
        (Some(path), _) => load_policy_file(space, &path)?,
        (None, Some(text)) => {
            PowerPolicy::constant(space, parse_powers(&text, config.zones.len())?)?
        }
        (None, None) => {
            eprintln!("no policy given; simulating the per-state optima");
            config.local_policy(space)?
        }
    };

    let result = if let Some(trace_path) = trace_path {
        let (result, trace) = simulate_with_trace(
            &policy,
            space,
            &config.zones,
            &config.rate_curve,
            &config.traffic,
            &config.flow,
            config.fixed_cost_w,
            sim,
        )?;
        write_trace(&trace, &trace_path)?;
        eprintln!("wrote {} trace events to {}", trace.len(), trace_path.display());
        result
    } else {
        simulate(
            &policy,
            space,
            &config.zones,
            &config.rate_curve,
            &config.traffic,
            &config.flow,
            config.fixed_cost_w,
            sim,
        )?
    };

    let mut writer = create(out)?;
    serde_json::to_writer_pretty(&mut writer, &result)
        .map_err(|e| Error::Config(format!("simulate json: {e}")))?;
    writeln!(writer).ok();
    writer.flush().map_err(|source| Error::Io {
        path: out.display().to_string(),
        source,
    })?;
    eprintln!(
        "simulated {} events over {} replications -> {}",
        result.events,
        sim.replications,
        out.display()
    );
    Ok(())
}

fn write_trace(trace: &[TraceEvent], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| Error::Config(format!("trace csv: {e}"));
    writer
        .write_record(["time_s", "event", "zone", "state_after"])
        .map_err(csv_err)?;
    for event in trace {
        writer
            .write_record([
                event.time_s.to_string(),
                event.event.to_string(),
                event.zone.to_string(),
                event.state_after.clone(),
            ])
            .map_err(csv_err)?;
    }
    writer
        .flush()
        .map_err(|e| Error::Config(format!("trace csv: {e}")))
}

fn sweep(config: &CellConfig, spec_path: &Path, out: &Path) -> Result<()> {
    let spec = SweepSpec::load(spec_path)?;
    let rows = run_sweep(config, &spec)?;
    write_sweep_csv(&rows, create(out)?)?;
    eprintln!("wrote {} sweep rows to {}", rows.len(), out.display());
    Ok(())
}
