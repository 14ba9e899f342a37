//! `fieldc`: check programs, run scenarios and test their properties.
//!
//! Exit codes: 0 success or property holds, 1 property fails, 2 any error
//! (usage, parse, configuration, evaluation, I/O).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fieldcalc::analysis::{self, oracle::oracle_field};
use fieldcalc::blocks::{self, STDLIB_SOURCE};
use fieldcalc::builtins::{self, Arity};
use fieldcalc::lang;
use fieldcalc::sim::{default_quiet_rounds, Scenario, SimError, SweepReference, WarmStart};

#[derive(Parser)]
#[command(name = "fieldc", version, about = "Field calculus interpreter and network simulator")]
struct Cli {
    /// Seed for every random choice; overrides FIELDC_SEED and the
    /// scenario's own seed.
    #[arg(long, global = true, env = "FIELDC_SEED")]
    seed: Option<u64>,
    /// Directory for every file the command writes. Nothing is written
    /// without it.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program file and report its definitions.
    Check {
        file: PathBuf,
        /// Put the standard library in scope.
        #[arg(long)]
        with_stdlib: bool,
    },
    /// Run a scenario and emit its trace as CSV.
    Run {
        scenario: PathBuf,
        /// Override the scenario's round budget.
        #[arg(long)]
        rounds: Option<u64>,
    },
    /// Check a property of a scenario.
    Analyze {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        property: Property,
        /// Tolerance for numeric comparisons.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Quiet rounds required before calling a run stabilised; defaults to
        /// the scenario's stop rule or four rounds per hop of diameter.
        #[arg(long)]
        quiet_rounds: Option<usize>,
        /// Number of warm-started runs for `uniqueness`.
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Upper bound of the random initial rep state for `uniqueness`.
        #[arg(long, default_value_t = 10.0)]
        warm_scale: f64,
        /// Fairness window in seconds; defaults to twice the base period.
        #[arg(long)]
        window: Option<f64>,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Compare stabilised fields across device densities.
    Sweep {
        scenario: PathBuf,
        /// Comma-separated device counts; defaults to the scenario's sweep.
        #[arg(long, value_delimiter = ',')]
        densities: Option<Vec<usize>>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long, value_enum)]
        reference: Option<Reference>,
        #[arg(long)]
        json: bool,
    },
    /// Print the standard library source.
    DumpStdlib,
    /// List the builtin functions.
    ListBuiltins,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Property {
    /// The field stops changing after the last environment change.
    SelfStabilization,
    /// It stops changing and matches the scenario's oracle.
    SelfStabilizationCorrectness,
    /// Warm-started runs settle on the same field.
    Uniqueness,
    /// Two runs with one seed give byte-identical traces.
    Replay,
    /// Every device fires at least once per window.
    Fairness,
    /// Error against the oracle settles after the first perturbation.
    Dynamics,
}

#[derive(Clone, Copy, ValueEnum)]
enum Reference {
    Successive,
    Highest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("fieldc: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Check { file, with_stdlib } => check(file, *with_stdlib),
        Command::Run { scenario, rounds } => run(cli, scenario, *rounds),
        Command::Analyze { scenario, property, epsilon, quiet_rounds, runs, warm_scale, window, json } => {
            let opts = AnalyzeOptions { epsilon: *epsilon, quiet_rounds: *quiet_rounds, runs: *runs, warm_scale: *warm_scale, window: *window, json: *json };
            analyze(cli, scenario, *property, &opts)
        }
        Command::Sweep { scenario, densities, replications, reference, json } => sweep(cli, scenario, densities.clone(), *replications, *reference, *json),
        Command::DumpStdlib => {
            print!("{STDLIB_SOURCE}");
            Ok(true)
        }
        Command::ListBuiltins => {
            for b in builtins::all() {
                let arity = match b.arity {
                    Arity::Fixed(n) => n.to_string(),
                    Arity::Variadic => "n".to_string(),
                };
                println!("{:<12} {:>2}  {}", b.name, arity, b.summary);
            }
            Ok(true)
        }
    }
}

fn check(file: &Path, with_stdlib: bool) -> Result<bool> {
    let source = fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let parsed = if with_stdlib { blocks::compile(&source) } else { lang::parse(&source) };
    let program = parsed.map_err(|e| anyhow!(e.with_file(&file.display().to_string())))?;
    let defs = program.defs.len() - if with_stdlib { blocks::stdlib().defs.len() } else { 0 };
    let main = if program.main.is_some() { ", main expression" } else { "" };
    println!("{}: ok ({defs} definitions{main})", file.display());
    Ok(true)
}

fn load(path: &Path) -> Result<Scenario> {
    Scenario::load(path).map_err(|e| anyhow!(scenario_error(path, e)))
}

fn scenario_error(path: &Path, e: SimError) -> String {
    match e {
        SimError::Json(_) | SimError::Config(_) | SimError::Topology(_) => format!("{}: {e}", path.display()),
        other => other.to_string(),
    }
}

fn seed_of(cli: &Cli, scenario: &Scenario) -> u64 {
    cli.seed.unwrap_or(scenario.seed)
}

/// Resolves `name` inside the output directory, refusing anything that
/// would land elsewhere.
fn output_path(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = Path::new(name).components().count() == 1 && !name.contains(['/', '\\']) && name != ".." && name != ".";
    if !plain {
        bail!("output name `{name}` must be a plain file name");
    }
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir.join(name))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

fn run(cli: &Cli, path: &Path, rounds: Option<u64>) -> Result<bool> {
    let mut scenario = load(path)?;
    if let Some(r) = rounds {
        scenario.rounds = r;
    }
    let seed = seed_of(cli, &scenario);
    let trace = scenario.run(seed).map_err(|e| anyhow!(scenario_error(path, e)))?;
    match &cli.out {
        Some(dir) => {
            let csv_name = scenario.outputs.csv.clone().unwrap_or_else(|| format!("{}.csv", stem(path)));
            let csv_path = output_path(dir, &csv_name)?;
            trace.write_csv(fs::File::create(&csv_path).with_context(|| format!("cannot write {}", csv_path.display()))?)?;
            if let Some(name) = &scenario.outputs.exports {
                let p = output_path(dir, name)?;
                fs::write(&p, serde_json::to_string_pretty(&trace.exports_json())?)?;
            }
            eprintln!("{}: {} device rounds, stopped by {:?}, trace in {}", path.display(), trace.records.len(), trace.stop, csv_path.display());
        }
        None => print!("{}", trace.csv_string()),
    }
    Ok(true)
}

struct AnalyzeOptions {
    epsilon: f64,
    quiet_rounds: Option<usize>,
    runs: usize,
    warm_scale: f64,
    window: Option<f64>,
    json: bool,
}

fn analyze(cli: &Cli, path: &Path, property: Property, opts: &AnalyzeOptions) -> Result<bool> {
    let scenario = load(path)?;
    let seed = seed_of(cli, &scenario);
    let sim = |e: SimError| anyhow!(scenario_error(path, e));
    let env = scenario.environment(seed).map_err(sim)?;
    let quiet = opts.quiet_rounds.or_else(|| scenario.stop_rule(&env).map(|r| r.quiet_rounds)).unwrap_or_else(|| default_quiet_rounds(&env));
    let oracle_for = |env: &fieldcalc::sim::Environment| -> Result<_> {
        let spec = scenario.oracle.as_ref().ok_or_else(|| anyhow!("{}: scenario has no oracle", path.display()))?;
        oracle_field(spec, env).map_err(|e| anyhow!("{}: {e}", path.display()))
    };

    let (pass, report, table) = match property {
        Property::SelfStabilization | Property::SelfStabilizationCorrectness => {
            let trace = scenario.run(seed).map_err(sim)?;
            let st = analysis::detect_stabilization(&trace, trace.last_change(), quiet, opts.epsilon);
            let mut report = st.to_json();
            let mut table = format!("stabilized: {}\nquiet rounds: {}\nepsilon: {}\n", st.stabilized, quiet, opts.epsilon);
            if let Some(r) = st.stabilization_round {
                table.push_str(&format!("last change at round: {r}\n"));
            }
            let mut pass = st.stabilized;
            if property == Property::SelfStabilizationCorrectness {
                let reference = oracle_for(trace.final_environment())?;
                let error = st.snapshot.as_ref().map_or(f64::INFINITY, |s| s.max_error(&reference));
                let correct = error <= opts.epsilon;
                table.push_str(&format!("max error against oracle: {error}\ncorrect: {correct}\n"));
                report["maxError"] = if error.is_finite() { error.into() } else { "infinity".into() };
                report["correct"] = correct.into();
                pass &= correct;
            }
            (pass, report, table)
        }
        Property::Uniqueness => {
            let u = analysis::check_uniqueness(&scenario, opts.runs, seed, WarmStart { scale: opts.warm_scale }, opts.epsilon).map_err(sim)?;
            let table = format!(
                "unique: {}\nruns: {} ({} stabilized)\ndivergent devices: {}\nmax divergence: {}\n",
                u.unique,
                u.snapshots.len(),
                u.snapshots.iter().flatten().count(),
                u.divergent.len(),
                u.max_divergence
            );
            (u.unique, u.to_json(), table)
        }
        Property::Replay => {
            let a = scenario.run(seed).map_err(sim)?.csv_string();
            let b = scenario.run(seed).map_err(sim)?.csv_string();
            let same = a == b;
            let table = format!("identical traces: {same}\ntrace bytes: {}\n", a.len());
            (same, serde_json::json!({ "identical": same, "bytes": a.len() }), table)
        }
        Property::Fairness => {
            let trace = scenario.run(seed).map_err(sim)?;
            let window = opts.window.unwrap_or(2.0 * scenario.schedule.base_period);
            let f = analysis::check_fairness(&trace, window);
            let table = format!("fair: {}\nwindow: {}\nworst gap: {}\nviolations: {}\n", f.fair, f.window, f.worst_gap, f.violations.len());
            (f.fair, serde_json::to_value(&f)?, table)
        }
        Property::Dynamics => {
            let trace = scenario.run(seed).map_err(sim)?;
            oracle_for(trace.final_environment())?;
            // measured from the first environment change, or from the start
            let from = trace.epochs.get(1).map_or(0.0, |e| e.0);
            let m = analysis::dynamics_metrics(&trace, |e| oracle_for(e).unwrap_or_default(), from, opts.epsilon, scenario.schedule.base_period);
            let table = format!(
                "from: {from}\nconvergence time: {}\npeak error: {}\ncumulative error: {}\n",
                m.convergence_time.map_or("never".to_string(), |t| t.to_string()),
                m.peak_error,
                m.cumulative_error
            );
            (m.convergence_time.is_some(), serde_json::to_value(&m)?, table)
        }
    };

    emit(cli, path, property.to_possible_value().expect("named").get_name(), &report, &table, opts.json)?;
    Ok(pass)
}

fn emit(cli: &Cli, path: &Path, what: &str, report: &serde_json::Value, table: &str, json: bool) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    if json {
        println!("{text}");
    } else {
        print!("{table}");
    }
    if let Some(dir) = &cli.out {
        let p = output_path(dir, &format!("{}.{what}.json", stem(path)))?;
        fs::write(&p, text + "\n").with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

fn sweep(cli: &Cli, path: &Path, densities: Option<Vec<usize>>, replications: Option<usize>, reference: Option<Reference>, json: bool) -> Result<bool> {
    let scenario = load(path)?;
    let mut spec = scenario.sweep.clone().ok_or_else(|| anyhow!("{}: scenario has no sweep section", path.display()))?;
    if let Some(d) = densities {
        spec.densities = d;
    }
    if spec.densities.is_empty() {
        bail!("at least one density is needed");
    }
    if let Some(r) = replications {
        spec.replications = r;
    }
    if let Some(r) = reference {
        spec.reference = match r {
            Reference::Successive => SweepReference::Successive,
            Reference::Highest => SweepReference::Highest,
        };
    }
    let seed = seed_of(cli, &scenario);
    let report = analysis::density_sweep(&scenario, &spec, seed).map_err(|e| anyhow!(scenario_error(path, e)))?;
    let pass = report.verdict.starts_with("consistent-with");
    emit(cli, path, "sweep", &serde_json::to_value(&report)?, &report.table(), json)?;
    Ok(pass)
}
