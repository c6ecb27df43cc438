//! `riskdp` command-line front end.
//!
//! Reports go to standard output (or `--output`), the run manifest to
//! `--manifest` or, failing that, to standard error as one JSON line.
//! Errors are printed to standard error as `{"error": code, "detail": ...}`.
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 violated
//! precondition, 4 value iteration out of iterations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use riskdp::error::take_validation_error;
use riskdp::mdp::{mdp_value_iteration, solve_mdp_finite, static_robust_bruteforce, MdpModel};
use riskdp::measures::FiniteDistribution;
use riskdp::nested::{ScenarioTree, StageRiskProfile};
use riskdp::risk::{evaluate, robust_evaluate, RiskSpec};
use riskdp::saa::{
    dkw_experiment, mc_exact_experiment, mc_growth_experiment, mc_uniform_experiment,
    AffineNoiseFamily, CoverageReport, GrowthCondition, PiecewiseLinearCdf, Sampler,
    UniformBoundParams,
};
use riskdp::saddle::{analyze, PsiMatrix, DEFAULT_SADDLE_TOL};
use riskdp::soc::{mc_soc_experiment, soc_value_iteration, solve_soc_finite, SocExperiment, SocModel};
use riskdp::{DpSolution, Error, ValueIteration, VERSION};

const DEFAULT_TOL: f64 = 1e-8;
const DEFAULT_MAX_ITER: usize = 1_000_000;
const DEFAULT_REPS: usize = 1000;
const SEED_ENV: &str = "RISKDP_SEED";

#[derive(Parser)]
#[command(name = "riskdp", version, about = "Risk-averse dynamic programming toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (1 runs serially).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the run manifest here instead of standard error.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a risk functional on a distribution, or its worst case over a list.
    RiskEval {
        file: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Nested risk of a scenario tree.
    NestedEval {
        file: PathBuf,
        #[arg(long, default_value = "expectation")]
        risk_profile: String,
    },
    /// Solve a control model or decision process.
    Solve {
        file: PathBuf,
        #[arg(long, default_value = "expectation")]
        risk_profile: String,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Min-max analysis of a payoff matrix.
    Saddle {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SADDLE_TOL)]
        tol: f64,
    },
    /// Run a seeded experiment described by a JSON config.
    Experiment {
        file: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        /// Overridden by the RISKDP_SEED environment variable.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutFormat::Json)]
        out: OutFormat,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

enum Failure {
    /// Input could not be read or parsed.
    Input(String),
    Domain(Error),
    /// Out of iterations; the residual log still goes out as the report.
    MaxIter { error: Error, report: String },
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Domain(_) => 3,
            Failure::MaxIter { .. } => 4,
        }
    }

    fn payload(&self) -> Value {
        match self {
            Failure::Input(detail) => json!({"error": "parse_error", "detail": detail}),
            Failure::Domain(e) | Failure::MaxIter { error: e, .. } => {
                json!({"error": e.code(), "detail": e.to_string()})
            }
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

/// Provenance of one run.
#[derive(Serialize, Default)]
struct Manifest {
    command: String,
    input: String,
    input_sha256: String,
    seed: Option<u64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    reps: Option<usize>,
    risk: Option<String>,
    threads: Option<usize>,
    timestamp_unix: u64,
    version: String,
    outputs: Vec<String>,
    status: String,
}

/// Parsed input plus the settings the run will use.
struct Run {
    manifest: Manifest,
    bytes: Vec<u8>,
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Syntax and shape errors are input failures; validation failures raised
/// while building library types are domain failures.
fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, Failure> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| Failure::Input(e.to_string()))?;
    from_value(value)
}

fn from_value<T: DeserializeOwned>(value: Value) -> Result<T, Failure> {
    take_validation_error();
    serde_json::from_value(value).map_err(|e| match take_validation_error() {
        Some(err) => Failure::Domain(err),
        None => Failure::Input(e.to_string()),
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("reports serialize");
    s.push('\n');
    s
}

fn risk_from_flags(kind: &str, alpha: Option<f64>, tau: Option<f64>) -> Result<RiskSpec, Failure> {
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| Failure::Input(format!("--kind {kind} requires --{flag}")))
    };
    let risk = match kind {
        "expectation" => RiskSpec::Expectation,
        "var" => RiskSpec::VaR { alpha: need(alpha, "alpha")? },
        "avar" | "cvar" => RiskSpec::AVaR { alpha: need(alpha, "alpha")? },
        "entropic" => RiskSpec::Entropic { tau: need(tau, "tau")? },
        other => return Err(Failure::Input(format!("unknown risk kind {other:?}"))),
    };
    risk.validate()?;
    Ok(risk)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DistributionInput {
    One(FiniteDistribution),
    Many(Vec<FiniteDistribution>),
}

fn risk_eval(run: &mut Run, kind: &str, alpha: Option<f64>, tau: Option<f64>) -> Result<String, Failure> {
    let input: DistributionInput = parse(&run.bytes)?;
    let risk = risk_from_flags(kind, alpha, tau)?;
    run.manifest.risk = Some(risk.to_string());
    Ok(match input {
        DistributionInput::One(d) => to_json(&json!({ "value": evaluate(&risk, &d)? })),
        DistributionInput::Many(ds) => {
            let (value, worst) = robust_evaluate(&risk, &ds)?;
            to_json(&json!({ "value": value, "worst_member": worst }))
        }
    })
}

fn nested_eval(run: &mut Run, profile: &str) -> Result<String, Failure> {
    let tree: ScenarioTree = parse(&run.bytes)?;
    let profile: StageRiskProfile = profile.parse()?;
    run.manifest.risk = Some(profile.to_string());
    let report = tree.robust_nested_report(&profile.fit(tree.stages())?)?;
    Ok(to_json(&json!({
        "value": report.value,
        "worst_member": report.worst_member,
    })))
}

fn finite_report(sol: &DpSolution) -> String {
    to_json(&json!({ "V": sol.values, "policy": sol.policy }))
}

fn iteration_report(vi: &ValueIteration) -> String {
    to_json(&json!({
        "V": vi.value,
        "policy": vi.policy,
        "iterations": vi.iterations,
        "residual": vi.residual,
        "residuals": vi.residuals,
    }))
}

fn stationary_risk(profile: &StageRiskProfile) -> Result<RiskSpec, Failure> {
    match profile.specs() {
        [r] => Ok(*r),
        _ => Err(Failure::Domain(Error::InvalidProfile(
            "a discounted model takes a single risk functional".into(),
        ))),
    }
}

fn iterate(result: riskdp::Result<ValueIteration>) -> Result<String, Failure> {
    match result {
        Ok(vi) => Ok(iteration_report(&vi)),
        Err(error @ Error::MaxIterExceeded { .. }) => {
            let Error::MaxIterExceeded { iterations, last_residual, residuals } = &error else {
                unreachable!()
            };
            let report = to_json(&json!({
                "converged": false,
                "iterations": iterations,
                "residual": last_residual,
                "residuals": residuals,
            }));
            Err(Failure::MaxIter { error, report })
        }
        Err(e) => Err(Failure::Domain(e)),
    }
}

fn solve(run: &mut Run, profile: &str, tol: f64, max_iter: usize) -> Result<String, Failure> {
    let value: Value =
        serde_json::from_slice(&run.bytes).map_err(|e| Failure::Input(e.to_string()))?;
    let profile: StageRiskProfile = profile.parse()?;
    run.manifest.risk = Some(profile.to_string());
    run.manifest.tol = Some(tol);
    run.manifest.max_iter = Some(max_iter);
    let has = |key: &str| value.get(key).is_some();
    if has("phi") {
        let model: SocModel = from_value(value)?;
        match model.discount() {
            None => Ok(finite_report(&solve_soc_finite(&model, &profile.fit(model.stages())?)?)),
            Some(_) => iterate(soc_value_iteration(&model, &stationary_risk(&profile)?, tol, max_iter)),
        }
    } else if has("kernels") {
        let model: MdpModel = from_value(value)?;
        match model.discount() {
            None => Ok(finite_report(&solve_mdp_finite(&model, &profile.fit(model.stages())?)?)),
            Some(_) => iterate(mdp_value_iteration(&model, &stationary_risk(&profile)?, tol, max_iter)),
        }
    } else {
        Err(Failure::Input(
            "unrecognized model: expected a \"phi\" (control model) or \"kernels\" (decision process) table".into(),
        ))
    }
}

fn saddle(run: &mut Run, tol: f64) -> Result<String, Failure> {
    let psi: PsiMatrix = parse(&run.bytes)?;
    run.manifest.tol = Some(tol);
    Ok(to_json(&analyze(&psi, tol)?))
}

#[derive(Deserialize)]
struct ExactCfg {
    distribution: FiniteDistribution,
    alpha: f64,
    delta: f64,
}

#[derive(Deserialize)]
struct GrowthCfg {
    law: PiecewiseLinearCdf,
    alpha: f64,
    c: f64,
    b: f64,
    eps: f64,
    delta: f64,
}

#[derive(Deserialize)]
struct UniformCfg {
    #[serde(default)]
    grid: Option<Vec<f64>>,
    #[serde(default)]
    family: Option<AffineNoiseFamily>,
    law: PiecewiseLinearCdf,
    alpha: f64,
    c: f64,
    b: f64,
    lipschitz: f64,
    eps: f64,
    delta: f64,
}

#[derive(Deserialize)]
struct SocCfg {
    model: SocModel,
    alpha: f64,
    eps: f64,
    delta: f64,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    max_iter: Option<usize>,
}

#[derive(Deserialize)]
struct DkwCfg {
    sampler: Sampler,
    n: usize,
    eps: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProfileInput {
    Text(String),
    List(StageRiskProfile),
}

#[derive(Deserialize)]
struct StaticCfg {
    model: MdpModel,
    #[serde(default)]
    profile: Option<ProfileInput>,
    #[serde(default)]
    initial_state: usize,
}

#[derive(Deserialize)]
struct SaddleCfg {
    #[serde(alias = "matrix")]
    psi: PsiMatrix,
    #[serde(default)]
    tol: Option<f64>,
}

enum ExperimentOutput {
    Coverage(CoverageReport),
    Other(Value),
}

fn experiment(run: &mut Run, reps: Option<usize>, seed: Option<u64>, out: OutFormat) -> Result<String, Failure> {
    let value: Value =
        serde_json::from_slice(&run.bytes).map_err(|e| Failure::Input(e.to_string()))?;
    let kind = value
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Failure::Input("experiment config needs a string \"kind\"".into()))?
        .to_string();
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(s) => Some(
            s.trim()
                .parse::<u64>()
                .map_err(|_| Failure::Input(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?,
        ),
        Err(_) => None,
    };
    let seed = env_seed
        .or(seed)
        .or_else(|| value.get("seed").and_then(Value::as_u64))
        .unwrap_or(0);
    let reps = reps
        .or_else(|| value.get("reps").and_then(Value::as_u64).map(|r| r as usize))
        .unwrap_or(DEFAULT_REPS);
    run.manifest.command = format!("experiment:{kind}");
    run.manifest.seed = Some(seed);
    run.manifest.reps = Some(reps);
    let output = match kind.as_str() {
        "exact" => {
            let c: ExactCfg = from_value(value)?;
            ExperimentOutput::Coverage(mc_exact_experiment(&c.distribution, c.alpha, c.delta, reps, seed)?)
        }
        "growth" => {
            let c: GrowthCfg = from_value(value)?;
            let g = GrowthCondition { c: c.c, b: c.b };
            ExperimentOutput::Coverage(mc_growth_experiment(&c.law, c.alpha, g, c.eps, c.delta, reps, seed)?)
        }
        "uniform" => {
            let c: UniformCfg = from_value(value)?;
            let family = match (c.family, c.grid) {
                (Some(f), None) => f,
                (None, Some(g)) => AffineNoiseFamily::additive(&g)?,
                _ => {
                    return Err(Failure::Input(
                        "uniform experiment needs exactly one of \"grid\" and \"family\"".into(),
                    ))
                }
            };
            let params = UniformBoundParams {
                growth: GrowthCondition { c: c.c, b: c.b },
                lipschitz: c.lipschitz,
                eps: c.eps,
                delta: c.delta,
            };
            ExperimentOutput::Coverage(mc_uniform_experiment(&family, &c.law, c.alpha, params, reps, seed)?)
        }
        "soc" => {
            let c: SocCfg = from_value(value)?;
            let cfg = SocExperiment {
                alpha: c.alpha,
                eps: c.eps,
                delta: c.delta,
                reps,
                seed,
                tol: c.tol.unwrap_or(DEFAULT_TOL),
                max_iter: c.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            };
            run.manifest.tol = Some(cfg.tol);
            run.manifest.max_iter = Some(cfg.max_iter);
            ExperimentOutput::Coverage(mc_soc_experiment(&c.model, &cfg)?)
        }
        "dkw" => {
            let c: DkwCfg = from_value(value)?;
            ExperimentOutput::Other(json!(dkw_experiment(&c.sampler, c.n, c.eps, reps, seed)?))
        }
        "static_robust" => {
            let c: StaticCfg = from_value(value)?;
            let profile = match c.profile {
                None => StageRiskProfile::constant(RiskSpec::Expectation, 1),
                Some(ProfileInput::Text(s)) => s.parse()?,
                Some(ProfileInput::List(p)) => p,
            };
            run.manifest.risk = Some(profile.to_string());
            ExperimentOutput::Other(json!(static_robust_bruteforce(&c.model, &profile, c.initial_state)?))
        }
        "saddle" => {
            let c: SaddleCfg = from_value(value)?;
            let tol = c.tol.unwrap_or(DEFAULT_SADDLE_TOL);
            run.manifest.tol = Some(tol);
            ExperimentOutput::Other(json!(analyze(&c.psi, tol)?))
        }
        other => return Err(Failure::Input(format!("unknown experiment kind {other:?}"))),
    };
    Ok(match (output, out) {
        (ExperimentOutput::Coverage(r), OutFormat::Json) => to_json(&r),
        (ExperimentOutput::Coverage(r), OutFormat::Csv) => r.to_csv(),
        (ExperimentOutput::Other(v), OutFormat::Json) => to_json(&v),
        (ExperimentOutput::Other(v), OutFormat::Csv) => flat_csv(&v),
    })
}

/// Header and one row of the top-level fields; nested values are JSON-encoded.
fn flat_csv(v: &Value) -> String {
    let Some(obj) = v.as_object() else {
        return format!("value\n{v}\n");
    };
    let quote = |s: String| {
        if s.contains([',', '"', '\n']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s
        }
    };
    let header: Vec<String> = obj.keys().cloned().collect();
    let row: Vec<String> = obj
        .values()
        .map(|x| match x {
            Value::String(s) => quote(s.clone()),
            Value::Null => String::new(),
            other => quote(other.to_string()),
        })
        .collect();
    format!("{}\n{}\n", header.join(","), row.join(","))
}

fn emit_manifest(path: Option<&Path>, manifest: &Manifest) {
    let text = to_json(manifest);
    match path {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                eprintln!("{}", json!({"error": "io_error", "detail": format!("manifest {}: {e}", p.display())}));
            }
        }
        None => eprint!("{text}"),
    }
}

fn write_report(path: Option<&Path>, text: &str) -> Result<String, Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            Ok(p.display().to_string())
        }
        None => {
            print!("{text}");
            Ok("stdout".into())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("{}", json!({"error": "parse_error", "detail": "--threads must be at least 1"}));
            return ExitCode::from(2);
        }
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (name, file) = match &cli.command {
        Command::RiskEval { file, .. } => ("risk-eval", file),
        Command::NestedEval { file, .. } => ("nested-eval", file),
        Command::Solve { file, .. } => ("solve", file),
        Command::Saddle { file, .. } => ("saddle", file),
        Command::Experiment { file, .. } => ("experiment", file),
    };
    let bytes = match read_input(file) {
        Ok(b) => b,
        Err(f) => {
            eprintln!("{}", f.payload());
            return ExitCode::from(f.exit_code());
        }
    };
    let mut run = Run {
        manifest: Manifest {
            command: name.into(),
            input: file.display().to_string(),
            input_sha256: hex::encode(Sha256::digest(&bytes)),
            threads: cli.threads,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            version: VERSION.into(),
            ..Manifest::default()
        },
        bytes,
    };
    let result = match &cli.command {
        Command::RiskEval { kind, alpha, tau, .. } => risk_eval(&mut run, kind, *alpha, *tau),
        Command::NestedEval { risk_profile, .. } => nested_eval(&mut run, risk_profile),
        Command::Solve { risk_profile, tol, max_iter, .. } => solve(&mut run, risk_profile, *tol, *max_iter),
        Command::Saddle { tol, .. } => saddle(&mut run, *tol),
        Command::Experiment { reps, seed, out, .. } => experiment(&mut run, *reps, *seed, *out),
    };
    let output = cli.output.as_deref();
    match result {
        Ok(report) => match write_report(output, &report) {
            Ok(dest) => {
                run.manifest.outputs.push(dest);
                run.manifest.status = "ok".into();
                emit_manifest(cli.manifest.as_deref(), &run.manifest);
                ExitCode::SUCCESS
            }
            Err(f) => {
                eprintln!("{}", f.payload());
                ExitCode::from(f.exit_code())
            }
        },
        Err(failure) => {
            if let Failure::MaxIter { report, .. } = &failure {
                if let Ok(dest) = write_report(output, report) {
                    run.manifest.outputs.push(dest);
                }
            }
            // parse failures never reach a manifest
            if !matches!(failure, Failure::Input(_)) {
                run.manifest.status = failure.payload()["error"].as_str().unwrap_or("error").into();
                emit_manifest(cli.manifest.as_deref(), &run.manifest);
            }
            eprintln!("{}", failure.payload());
            ExitCode::from(failure.exit_code())
        }
    }
}
