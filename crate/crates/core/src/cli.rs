//! The `cwgan` command line: loads inputs, runs one computation and writes a
//! JSON report (CSV for `converge`).
//!
//! Every JSON report has the same envelope: `tool` (name and version),
//! `command`, `config` (an echo of the inputs), `tolerances` and `result`.
//! Exit codes: 0 success, 2 input error, 3 solver error, 4 invariant violation.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::covering::{self, CHAIN_TOLERANCE, LEMMA_TOLERANCE};
use crate::duality::{self, Instance, DOMINATION_SLACK, RECOMPUTE_TOLERANCE};
use crate::error::{Error, Result};
use crate::fixtures::{self, Triple};
use crate::generator::{parse_generator_json, parse_latent_json};
use crate::measures::{self, load_joint, load_measure, MeasureFormat, INGEST_TOLERANCE, INTERNAL_TOLERANCE};
use crate::metric::{Metric, ProductMetric};
use crate::par;
use crate::report::to_json_string;
use crate::transport::{self, DUALITY_GAP, LIPSCHITZ_SLACK, PLAN_TOLERANCE};

#[derive(Debug, Parser)]
#[command(name = "cwgan", version, about = "Exact conditional W1 objectives and covering certificates")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureName {
    /// π = μ⊗ν with G(z, y) = z and η = μ.
    Copy,
    /// π(x|y) = δ_y on y ∈ {0, 1}, G = y + 1.
    ShiftedDelta,
    /// Two conditions swapped by the generator, at distance --rho.
    Swap,
    /// --atoms conditions π(x|y) = δ_y on a grid of [0, 1], G = 2y + z.
    DeltaFamily,
    /// One condition.
    SingleY,
    /// Random affine instance drawn from --seed.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Perturbs the conditional objective before its invariants are checked.
    ShiftLhs,
    /// Corrupts the table of F values before the modulus check.
    CorruptF,
    /// Breaks one slack of the certificate chain.
    BreakChain,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Joint measure JSON.
    #[arg(long, global = true)]
    pub joint: Option<PathBuf>,
    /// Generator JSON.
    #[arg(long, global = true)]
    pub generator: Option<PathBuf>,
    /// Latent measure JSON (discrete or gaussian).
    #[arg(long, global = true)]
    pub latent: Option<PathBuf>,
    /// Built-in instance used instead of --joint/--generator/--latent.
    #[arg(long, global = true, value_enum)]
    pub fixture: Option<FixtureName>,
    #[arg(long, global = true, default_value_t = 0.1)]
    pub rho: f64,
    #[arg(long, global = true, default_value_t = 200)]
    pub atoms: usize,
    #[arg(long, global = true, default_value_t = Metric::Euclidean)]
    pub metric: Metric,
    #[arg(long, global = true, default_value_t = ProductMetric::Sum)]
    pub product_metric: ProductMetric,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 1 runs sequentially. Defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub emit_witness: bool,
    #[arg(long, global = true)]
    pub emit_plan: bool,
    #[arg(long, global = true, hide = true, value_enum)]
    pub inject_fault: Option<Fault>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Exact W1 between two measure files.
    W1 { mu: PathBuf, nu: PathBuf },
    /// W1 between two 1-D measure files by CDF integration.
    Oracle1d { mu: PathBuf, nu: PathBuf },
    /// Conditional, partial-dual and joint objectives.
    Objectives,
    /// Piecewise discriminator within epsilon of the conditional objective.
    Certify {
        #[arg(long, allow_hyphen_values = true)]
        epsilon: f64,
    },
    /// One certificate per epsilon of a strictly decreasing schedule; CSV.
    Converge {
        /// Comma-separated epsilons, e.g. 0.5,0.2,0.1.
        #[arg(long, allow_hyphen_values = true)]
        schedule: String,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Pairwise modulus inequality for F on the y-support.
    Lemma,
    /// Uniform box cover of the y-support.
    Cover {
        #[arg(long, allow_hyphen_values = true)]
        delta: f64,
    },
}

fn tolerances() -> Value {
    json!({
        "ingest_weight_sum": INGEST_TOLERANCE,
        "internal_weight_sum": INTERNAL_TOLERANCE,
        "plan_marginals": PLAN_TOLERANCE,
        "lipschitz_slack": LIPSCHITZ_SLACK,
        "duality_gap": DUALITY_GAP,
        "joint_domination": DOMINATION_SLACK,
        "lhs_recompute": RECOMPUTE_TOLERANCE,
        "lemma_slack": LEMMA_TOLERANCE,
        "chain_slack": CHAIN_TOLERANCE,
        "max_exact_denominator": transport::MAX_EXACT_DENOMINATOR,
    })
}

fn path_str(p: &Option<PathBuf>) -> Value {
    p.as_ref().map_or(Value::Null, |p| Value::String(p.display().to_string()))
}

impl Cli {
    fn command_name(&self) -> &'static str {
        match self.command {
            Command::W1 { .. } => "w1",
            Command::Oracle1d { .. } => "oracle1d",
            Command::Objectives => "objectives",
            Command::Certify { .. } => "certify",
            Command::Converge { .. } => "converge",
            Command::Lemma => "lemma",
            Command::Cover { .. } => "cover",
        }
    }

    /// Inputs and parameters, without `--jobs` and `--out` so that reports
    /// do not depend on them.
    fn config_echo(&self) -> Value {
        let c = &self.common;
        let mut cfg = json!({
            "joint": path_str(&c.joint),
            "generator": path_str(&c.generator),
            "latent": path_str(&c.latent),
            "fixture": c.fixture.map(|f| f.to_possible_value().expect("not skipped").get_name().to_string()),
            "metric": c.metric.to_string(),
            "product_metric": c.product_metric.to_string(),
            "seed": c.seed,
            "emit_witness": c.emit_witness,
            "emit_plan": c.emit_plan,
        });
        if matches!(c.fixture, Some(FixtureName::Swap)) {
            cfg["rho"] = json!(c.rho);
        }
        if matches!(c.fixture, Some(FixtureName::DeltaFamily)) {
            cfg["atoms"] = json!(c.atoms);
        }
        let extra = match &self.command {
            Command::W1 { mu, nu } | Command::Oracle1d { mu, nu } => {
                json!({"mu": mu.display().to_string(), "nu": nu.display().to_string()})
            }
            Command::Certify { epsilon } => json!({ "epsilon": epsilon }),
            Command::Converge { schedule, .. } => json!({ "schedule": schedule }),
            Command::Cover { delta } => json!({ "delta": delta }),
            Command::Objectives | Command::Lemma => json!({}),
        };
        for (k, v) in extra.as_object().expect("object literal") {
            cfg[k] = v.clone();
        }
        cfg
    }

    fn envelope(&self, result: Value) -> String {
        to_json_string(&json!({
            "tool": {"name": "cwgan", "version": env!("CARGO_PKG_VERSION")},
            "command": self.command_name(),
            "config": self.config_echo(),
            "tolerances": tolerances(),
            "result": result,
        }))
    }
}

fn read(path: &Path) -> Result<String> {
    measures::read_to_string(path)
}

fn load_triple(c: &Common) -> Result<Triple> {
    if let Some(f) = c.fixture {
        return Ok(match f {
            FixtureName::Copy => fixtures::copy_instance(),
            FixtureName::ShiftedDelta => fixtures::shifted_delta_instance(),
            FixtureName::Swap => {
                if !(c.rho > 0.0 && c.rho.is_finite()) {
                    return Err(Error::InvalidInput(format!("--rho {} must be positive", c.rho)));
                }
                fixtures::swap_instance(c.rho)
            }
            FixtureName::DeltaFamily => {
                if c.atoms == 0 {
                    return Err(Error::InvalidInput("--atoms must be positive".into()));
                }
                fixtures::delta_family(c.atoms)
            }
            FixtureName::SingleY => fixtures::single_y_instance(),
            FixtureName::Random => {
                fixtures::random_conditional_instance(&mut fixtures::rng(c.seed), &fixtures::InstanceShape::default())
            }
        });
    }
    let need = |p: &Option<PathBuf>, flag: &str| {
        p.clone().ok_or_else(|| Error::InvalidInput(format!("{flag} is required (or use --fixture)")))
    };
    let joint = load_joint(&need(&c.joint, "--joint")?)?;
    let g = parse_generator_json(&read(&need(&c.generator, "--generator")?)?)?;
    let eta = parse_latent_json(&read(&need(&c.latent, "--latent")?)?, c.seed)?;
    Ok((joint, g, eta))
}

fn load_instance(c: &Common) -> Result<Instance> {
    let (joint, g, eta) = load_triple(c)?;
    Instance::new(&joint, &g, &eta, c.metric)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values are serializable")
}

/// What a successful command produced.
#[derive(Debug)]
pub struct Output {
    pub text: String,
    /// Secondary file to write (the converge JSON report).
    pub extra: Option<(PathBuf, String)>,
}

fn cmd_w1(cli: &Cli, mu: &Path, nu: &Path) -> Result<Output> {
    let c = &cli.common;
    let mu_m = load_measure(mu, MeasureFormat::from_path(mu))?;
    let nu_m = load_measure(nu, MeasureFormat::from_path(nu))?;
    let mut result = json!({});
    if c.emit_witness {
        let (plan, witness) = transport::w1_certified(&mu_m, &nu_m, c.metric)?;
        result["value"] = json!(plan.cost_value);
        result["witness"] = to_value(&witness);
        if c.emit_plan {
            result["plan"] = to_value(&plan);
        }
    } else {
        let (value, plan) = transport::w1_exact(&mu_m, &nu_m, c.metric)?;
        result["value"] = json!(value);
        if c.emit_plan {
            result["plan"] = to_value(&plan);
        }
    }
    Ok(Output { text: cli.envelope(result), extra: None })
}

fn cmd_oracle1d(cli: &Cli, mu: &Path, nu: &Path) -> Result<Output> {
    let mu_m = load_measure(mu, MeasureFormat::from_path(mu))?;
    let nu_m = load_measure(nu, MeasureFormat::from_path(nu))?;
    let value = transport::w1_1d_oracle(&mu_m, &nu_m)?;
    Ok(Output { text: cli.envelope(json!({ "value": value })), extra: None })
}

fn cmd_objectives(cli: &Cli) -> Result<Output> {
    let c = &cli.common;
    let inst = load_instance(c)?;
    let mut report = duality::objective_report_unchecked(&inst, c.product_metric)?;
    if c.inject_fault == Some(Fault::ShiftLhs) {
        report.lhs_value += 1.0;
    }
    report.check_invariants()?;
    let mut result = to_value(&report);
    if !c.emit_witness {
        result.as_object_mut().expect("struct").remove("witness");
    }
    Ok(Output { text: cli.envelope(result), extra: None })
}

fn cmd_certify(cli: &Cli, epsilon: f64) -> Result<Output> {
    let c = &cli.common;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let inst = load_instance(c)?;
    let (mut cert, d) = covering::epsilon_certificate_unchecked(&inst, epsilon)?;
    if c.inject_fault == Some(Fault::BreakChain) {
        if let Some(s) = cert.chain.per_k_slacks.first_mut() {
            *s = -1.0;
        }
    }
    cert.check()?;
    let mut result = to_value(&cert);
    if c.emit_witness {
        let pieces: Vec<Value> = d
            .pieces
            .iter()
            .map(|p| {
                json!({
                    "box": p.box_index,
                    "low": d.partition.boxes[p.box_index].low,
                    "high": d.partition.boxes[p.box_index].high,
                    "representative": p.representative,
                    "points": to_value(&p.points),
                    "values": p.values,
                    "lipschitz_modulus": p.lipschitz_modulus,
                    "lipschitz_excess": p.lipschitz_excess,
                })
            })
            .collect();
        result["discriminator"] = Value::Array(pieces);
    }
    Ok(Output { text: cli.envelope(result), extra: None })
}

fn parse_schedule(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Err(Error::InvalidInput("empty epsilon schedule".into()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("schedule entry `{}`: {e}", t.trim()))))
        .collect()
}

fn cmd_converge(cli: &Cli, schedule: &str, report: &Option<PathBuf>) -> Result<Output> {
    let schedule = parse_schedule(schedule)?;
    let inst = load_instance(&cli.common)?;
    let rows = covering::convergence_study(&inst, &schedule)?;
    let extra = report.as_ref().map(|p| (p.clone(), cli.envelope(json!({ "rows": to_value(&rows) }))));
    Ok(Output { text: covering::convergence_table_csv(&rows), extra })
}

fn cmd_lemma(cli: &Cli) -> Result<Output> {
    let c = &cli.common;
    let inst = load_instance(c)?;
    let mut table = covering::empirical_moduli(&inst)?;
    if c.inject_fault == Some(Fault::CorruptF) {
        if let Some(f) = table.f_values.first_mut() {
            *f += 10.0;
        }
    }
    let pairs = covering::lemma1_check(&table)?;
    let min_slack = pairs.iter().map(|p| p.slack).reduce(f64::min);
    let result = json!({
        "pairs": to_value(&pairs),
        "min_slack": min_slack,
        "f_values": table.f_values,
    });
    Ok(Output { text: cli.envelope(result), extra: None })
}

fn cmd_cover(cli: &Cli, delta: f64) -> Result<Output> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidDelta(delta));
    }
    let c = &cli.common;
    let joint = match (&c.fixture, &c.joint) {
        (None, Some(path)) => load_joint(path)?,
        _ => load_triple(c)?.0,
    };
    let y_atoms = measures::decompose(&joint).y_atoms;
    let partition = covering::build_cover(&y_atoms, delta)?;
    let mut result = to_value(&partition);
    result["box_diameter"] = json!(partition.box_diameter());
    result["y_atoms"] = to_value(&y_atoms);
    Ok(Output { text: cli.envelope(result), extra: None })
}

pub fn execute(cli: &Cli) -> Result<Output> {
    let run = || match &cli.command {
        Command::W1 { mu, nu } => cmd_w1(cli, mu, nu),
        Command::Oracle1d { mu, nu } => cmd_oracle1d(cli, mu, nu),
        Command::Objectives => cmd_objectives(cli),
        Command::Certify { epsilon } => cmd_certify(cli, *epsilon),
        Command::Converge { schedule, report } => cmd_converge(cli, schedule, report),
        Command::Lemma => cmd_lemma(cli),
        Command::Cover { delta } => cmd_cover(cli, *delta),
    };
    match cli.common.jobs {
        Some(0) => Err(Error::InvalidInput("--jobs must be at least 1".into())),
        Some(n) => par::with_jobs(n, run),
        None => run(),
    }
}

fn deliver(cli: &Cli, out: Output) -> Result<()> {
    match &cli.common.out {
        Some(path) => measures::write_string(path, &out.text)?,
        None => print!("{}", out.text),
    }
    if let Some((path, text)) = out.extra {
        measures::write_string(&path, &text)?;
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli).and_then(|out| deliver(&cli, out)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("cwgan").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn schedule_parsing() {
        assert_eq!(parse_schedule("0.5, 0.2,0.1").unwrap(), vec![0.5, 0.2, 0.1]);
        assert!(matches!(parse_schedule(""), Err(Error::InvalidInput(_))));
        assert!(matches!(parse_schedule("0.5,x"), Err(Error::Parse(_))));
    }

    #[test]
    fn swap_objectives_from_fixture() {
        let cli = parse(&["objectives", "--fixture", "swap", "--rho", "0.1"]);
        let out = execute(&cli).unwrap();
        let v: Value = serde_json::from_str(&out.text).unwrap();
        assert_eq!(v["command"], "objectives");
        assert!((v["result"]["lhs_value"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
        assert!((v["result"]["joint_value"].as_f64().unwrap() - 0.1).abs() <= 1e-9);
        assert!(v["result"].get("witness").is_none());
        assert_eq!(v["config"]["rho"].as_f64(), Some(0.1));
    }

    #[test]
    fn faults_map_to_invariant_violations() {
        for args in [
            ["objectives", "--fixture", "shifted-delta", "--inject-fault", "shift-lhs"],
            ["lemma", "--fixture", "shifted-delta", "--inject-fault", "corrupt-f"],
            ["certify", "--fixture", "shifted-delta", "--inject-fault", "break-chain"],
        ] {
            let mut full = args.to_vec();
            if args[0] == "certify" {
                full.extend(["--epsilon", "0.5"]);
            }
            let err = execute(&parse(&full)).unwrap_err();
            assert_eq!(err.exit_code(), 4, "{args:?}: {err}");
        }
    }

    #[test]
    fn missing_inputs_are_input_errors() {
        let err = execute(&parse(&["objectives"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = execute(&parse(&["certify", "--fixture", "copy", "--epsilon", "0"])).unwrap_err();
        assert!(matches!(err, Error::InvalidEpsilon(_)));
    }

    #[test]
    fn reports_do_not_depend_on_jobs() {
        let one = execute(&parse(&["certify", "--fixture", "delta-family", "--atoms", "40", "--epsilon", "0.2", "--jobs", "1"]))
            .unwrap();
        let four = execute(&parse(&["certify", "--fixture", "delta-family", "--atoms", "40", "--epsilon", "0.2", "--jobs", "4"]))
            .unwrap();
        assert_eq!(one.text, four.text);
    }
}
