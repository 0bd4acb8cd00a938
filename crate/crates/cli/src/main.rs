mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use qamsim::densesim::{self, matrix_from_json, MatrixJson, ObservableElement, QuantumState};
use qamsim::hstab::{self, HstabInstanceFile};
use qamsim::linalg::C64;
use qamsim::par::{sub_seed, Execution};
use qamsim::pauli::{parse_stabilizer_json, StabilizerGroup};
use qamsim::protocol::{self, MerlinStrategy, Mode, ProtocolInstanceFile, QamSingle};
use qamsim::stabtest::{self, LambdaProjector};
use qamsim::Error;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "qamsim", version, about = "Stabilizer tests, QAM verification and h_Stab instances")]
struct Cli {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Largest qubit count for dense pure and mixed states.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..=16))]
    dense_cap: Option<u32>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run Monte Carlo loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a stabilizer file.
    Validate { file: PathBuf },
    /// Run the stabilizer test on a state.
    Test(TestArgs),
    /// Run the single-measurement protocol on an instance file.
    Protocol(ProtocolArgs),
    /// Solve an h_Stab instance and run its verification protocol.
    Hstab(HstabArgs),
    /// Print the parameter schedules.
    Params(ParamsArgs),
}

#[derive(Debug, Args)]
struct TestArgs {
    /// `zero`, `plus`, `basis:<bits>`, `mixed`, `codespace`, or a state file.
    #[arg(long)]
    state: String,
    #[arg(long)]
    stabilizer: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    rounds: u64,
    /// Matrix file for the closeness check (defaults to the codespace projector).
    #[arg(long)]
    observable: Option<PathBuf>,
    /// Budget for the closeness check (defaults to 1 - p_pass).
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Debug, Clone)]
enum StrategyArg {
    Named(MerlinStrategy),
    File(PathBuf),
}

fn parse_strategy(s: &str) -> Result<StrategyArg, String> {
    match s.strip_prefix("fixed:") {
        Some(path) if !path.is_empty() => Ok(StrategyArg::File(path.into())),
        Some(_) => Err("fixed strategy needs a state file, e.g. fixed:state.json".into()),
        None => s.parse().map(StrategyArg::Named).map_err(|e: Error| e.to_string()),
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
struct ProtocolArgs {
    instance: PathBuf,
    #[arg(long, value_parser = parse_mode, default_value = "direct")]
    mode: Mode,
    /// `honest`, `depolarizing:<μ>`, `fixed:<state file>` or `optimal`.
    #[arg(long, value_parser = parse_strategy, default_value = "honest")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 10_000)]
    rounds: u64,
    /// Override the computation-branch probability.
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Debug, Args)]
struct HstabArgs {
    instance: PathBuf,
    /// Random codespace states for the sampling oracle.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Verification rounds run with the optimal prover state.
    #[arg(long, default_value_t = 10_000)]
    rounds: u64,
}

#[derive(Debug, Args)]
struct ParamsArgs {
    #[arg(long)]
    x_size: Option<u64>,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    b: f64,
    /// Print the h_Stab verification schedule instead.
    #[arg(long)]
    qma: bool,
    #[arg(long)]
    epsilon: Option<f64>,
}

/// Command outcome: the result body and whether every check held.
struct Outcome {
    result: Value,
    ok: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(cap) = cli.dense_cap {
        densesim::set_dense_caps(cap as usize, cap as usize);
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Auto };
    let outcome = match &cli.command {
        Command::Validate { file } => cmd_validate(file),
        Command::Test(args) => cmd_test(args, cli.seed, exec),
        Command::Protocol(args) => cmd_protocol(args, cli.seed, exec),
        Command::Hstab(args) => cmd_hstab(args, cli.seed, exec),
        Command::Params(args) => cmd_params(args),
    };
    let (body, code) = match outcome {
        Ok(o) => {
            let code = if o.ok { 0 } else { 1 };
            (json!({ "ok": o.ok, "result": o.result }), code)
        }
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error [{}]: {e}", error_kind(&e));
            (json!({ "ok": false, "error": { "kind": error_kind(&e), "message": e.to_string() } }), code)
        }
    };
    let (pure_cap, mixed_cap) = densesim::dense_caps();
    let mut report = body;
    report["version"] = json!(VERSION);
    report["seed"] = json!(cli.seed);
    report["command"] = json!(command_name(&cli.command));
    report["config"] = json!({
        "args": config_echo(&cli.command),
        "dense_cap": { "pure": pure_cap, "mixed": mixed_cap },
        "execution": if cli.sequential { "sequential" } else { "auto" },
    });
    let text = report::render(report);
    match &cli.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(code)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Parse(_) => 2,
        _ => 1,
    }
}

fn error_kind(e: &Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(['(', ' ', '{']).next().unwrap_or("Error").to_string()
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Test(_) => "test",
        Command::Protocol(_) => "protocol",
        Command::Hstab(_) => "hstab",
        Command::Params(_) => "params",
    }
}

fn config_echo(c: &Command) -> Value {
    match c {
        Command::Validate { file } => json!({ "file": file }),
        Command::Test(a) => json!({
            "state": a.state, "stabilizer": a.stabilizer, "rounds": a.rounds,
            "observable": a.observable, "epsilon": a.epsilon,
        }),
        Command::Protocol(a) => json!({
            "instance": a.instance,
            "mode": format!("{:?}", a.mode).to_lowercase(),
            "strategy": match &a.strategy {
                StrategyArg::Named(s) => s.name(),
                StrategyArg::File(p) => format!("fixed:{}", p.display()),
            },
            "rounds": a.rounds,
            "q": a.q,
        }),
        Command::Hstab(a) => json!({ "instance": a.instance, "samples": a.samples, "rounds": a.rounds }),
        Command::Params(a) => json!({ "x_size": a.x_size, "a": a.a, "b": a.b, "qma": a.qma, "epsilon": a.epsilon }),
    }
}

fn read(path: &Path) -> qamsim::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report types serialize")
}

fn cmd_validate(file: &Path) -> qamsim::Result<Outcome> {
    let g = parse_stabilizer_json(&read(file)?)?;
    let lambda = LambdaProjector::new(&g).ok().map(|l| l.rank());
    Ok(Outcome {
        result: json!({
            "valid": true,
            "qubits": g.num_qubits(),
            "generators": g.generators().iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "codespace_dimension": lambda,
        }),
        ok: true,
    })
}

/// Loads `{"amplitudes": [[re, im], ...]}` or `{"density": [[[re, im], ...], ...]}`.
fn load_state_file(path: &Path) -> qamsim::Result<QuantumState> {
    let v: Value = serde_json::from_str(&read(path)?)?;
    if let Some(a) = v.get("amplitudes") {
        let amps: Vec<[f64; 2]> = serde_json::from_value(a.clone())?;
        return QuantumState::pure(amps.into_iter().map(|[re, im]| C64::new(re, im)).collect());
    }
    if let Some(d) = v.get("density") {
        let rows: MatrixJson = serde_json::from_value(d.clone())?;
        return QuantumState::mixed(matrix_from_json(rows)?);
    }
    Err(Error::Parse(format!("{}: expected \"amplitudes\" or \"density\"", path.display())))
}

fn resolve_state(spec: &str, g: &StabilizerGroup) -> qamsim::Result<QuantumState> {
    let n = g.num_qubits();
    match spec {
        "zero" => QuantumState::zero(n),
        "plus" => densesim::plus_state(n),
        "mixed" => QuantumState::maximally_mixed(n),
        "codespace" => {
            let (_, vecs) = LambdaProjector::new(g)?.matrix().eigh();
            QuantumState::pure_normalized(vecs.last().cloned().unwrap_or_default())
        }
        _ => {
            if let Some(bits) = spec.strip_prefix("basis:") {
                let bits = bits
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        _ => Err(Error::Parse(format!("bad basis label {bits:?}"))),
                    })
                    .collect::<qamsim::Result<Vec<_>>>()?;
                return QuantumState::basis(&bits);
            }
            load_state_file(Path::new(spec))
        }
    }
}

fn cmd_test(args: &TestArgs, seed: u64, exec: Execution) -> qamsim::Result<Outcome> {
    let g = parse_stabilizer_json(&read(&args.stabilizer)?)?;
    let rho = resolve_state(&args.state, &g)?;
    if rho.num_qubits() != g.num_qubits() {
        return Err(Error::DimensionMismatch { expected: g.num_qubits(), found: rho.num_qubits() });
    }
    let lambda = LambdaProjector::new(&g)?;
    let report = stabtest::run_test_rounds(&rho, &g, args.rounds, sub_seed(seed, 1), exec)?;
    let identity = stabtest::pass_probability_identity_check(&rho, &g)?;
    let gentle = stabtest::gentle_measurement_check_with(&rho, &lambda)?;
    let m = match &args.observable {
        Some(p) => ObservableElement::from_json(&read(p)?)?,
        None => lambda.as_observable(),
    };
    let p_pass = stabtest::pass_probability_via_projector(&rho, &lambda)?;
    let eps = args.epsilon.unwrap_or((1.0 - p_pass).max(0.0));
    let sandwich = match stabtest::closeness_bounds_with(&rho, &lambda, &m, eps) {
        Ok(b) => to_value(&b),
        Err(e @ (Error::ZeroOverlap(_) | Error::HypothesisViolated { .. })) => json!({ "skipped": e.to_string() }),
        Err(e) => return Err(e),
    };
    let sandwich_ok = sandwich.get("holds").and_then(Value::as_bool).unwrap_or(true);
    Ok(Outcome {
        ok: identity.holds && gentle.holds && sandwich_ok,
        result: json!({
            "rounds": report.rounds,
            "passes": report.passes,
            "sampled_rate": report.sampled_pass_rate,
            "std_error": report.std_error,
            "exact": report.exact_pass_probability,
            "identity_check": to_value(&identity),
            "gentle": to_value(&gentle),
            "sandwich": sandwich,
        }),
    })
}

fn cmd_protocol(args: &ProtocolArgs, seed: u64, exec: Execution) -> qamsim::Result<Outcome> {
    let file: ProtocolInstanceFile = serde_json::from_str(&read(&args.instance)?)?;
    let mut inst = QamSingle::from_file(file)?;
    if let Some(q) = args.q {
        inst = inst.with_q(q)?;
    }
    let strategy = match &args.strategy {
        StrategyArg::Named(s) => s.clone(),
        StrategyArg::File(p) => MerlinStrategy::Fixed(load_state_file(p)?),
    };
    let p = *inst.params();
    let breakdown = inst.soundness_breakdown(&strategy)?;
    let mc = inst.simulate(&strategy, args.mode, args.rounds, sub_seed(seed, 2), exec)?;
    let b_exact = inst.circuit().exact_best_acceptance()?;
    let optimum = inst.optimal_acceptance()?;
    let beta_exact = p.beta_for(b_exact);
    let honest = inst.honest_circuit_acceptance()?;
    Ok(Outcome {
        ok: true,
        result: json!({
            "params": to_value(&p),
            "alpha": p.alpha,
            "beta": p.beta,
            "gap": p.gap,
            "printed_gap_bound": p.printed_gap_bound(),
            "honest_circuit_acceptance": to_value(&honest),
            "b_exact": b_exact,
            "beta_exact": beta_exact,
            "optimal_acceptance": optimum,
            "optimum_within_beta_exact": optimum <= beta_exact + 1e-9,
            "exact": to_value(&breakdown),
            "monte_carlo": to_value(&mc),
            "monte_carlo_seed": sub_seed(seed, 2),
        }),
    })
}

fn cmd_hstab(args: &HstabArgs, seed: u64, exec: Execution) -> qamsim::Result<Outcome> {
    let file: HstabInstanceFile = serde_json::from_str(&read(&args.instance)?)?;
    let inst = file.into_instance()?;
    let h = hstab::h_stab(&inst);
    let mut rng = qamsim::par::stream_rng(sub_seed(seed, 3), 0);
    let sampled = hstab::h_stab_sampling_oracle(&inst, args.samples, &mut rng)?;
    let params = hstab::qma_params(inst.a(), inst.b())?;
    let prover = inst.maximizer()?;
    let verify = hstab::qma_verify(&inst, &prover, &params, args.rounds, sub_seed(seed, 4), exec)?;
    let soundness = match hstab::qma_soundness_check(&inst, &params) {
        Ok(r) => to_value(&r),
        Err(e @ Error::NotNoInstance { .. }) => json!({ "inapplicable": e.to_string() }),
        Err(e) => return Err(e),
    };
    let sound_ok = soundness.get("holds").and_then(Value::as_bool).unwrap_or(true);
    Ok(Outcome {
        ok: sampled <= h + 1e-9 && sound_ok,
        result: json!({
            "h_stab": h,
            "decision": to_value(&inst.decision()),
            "a": inst.a(),
            "b": inst.b(),
            "codespace_dimension": inst.lambda().rank(),
            "sampling_oracle": { "samples": args.samples, "value": sampled },
            "qma_params": to_value(&params),
            "verify_optimal_prover": to_value(&verify),
            "soundness": soundness,
        }),
    })
}

fn cmd_params(args: &ParamsArgs) -> qamsim::Result<Outcome> {
    if args.qma {
        let p = hstab::qma_params(args.a, args.b)?;
        return Ok(Outcome {
            ok: true,
            result: json!({
                "qma": to_value(&p),
                "delta2_closed_form": p.delta2_closed_form(),
                "delta2_bound": p.delta2_bound(),
                "delta2_above_bound": p.delta2 >= p.delta2_bound() - 1e-12,
            }),
        });
    }
    let p = match args.epsilon {
        Some(eps) => {
            let mut p = protocol::ProtocolParams::with_epsilon(eps, args.a, args.b)?;
            p.x_size = args.x_size;
            p
        }
        None => protocol::make_params(args.x_size.unwrap_or(1), args.a, args.b)?,
    };
    Ok(Outcome {
        ok: true,
        result: json!({
            "protocol": to_value(&p),
            "gap_formula": p.gap_formula(),
            "identity_residual": p.identity_residual(),
            "printed_gap_bound": p.printed_gap_bound(),
            "gap_above_printed_bound": p.printed_gap_bound().map(|b| p.gap >= b),
        }),
    })
}
