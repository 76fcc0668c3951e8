use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use twistcm::cm_system::{CMSystem, SystemVariant};
use twistcm::elliptic::C64;
use twistcm::lie_twist::{build_twisted_algebra, CMat, Variant};
use twistcm::rmatrix::r_eval;
use twistcm::table2::{render_table2, table2};
use twistcm::verify::{parse_complex, run_suite, AlgebraSpec, Suite, SuiteConfig, ToleranceOverride};

/// Exit status when a check fails.
const EXIT_FAILED: u8 = 1;
/// Exit status for configuration, schema and input errors.
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "twistcm", version, about = "Numerical checks for twisted elliptic Calogero-Moser systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and print its report.
    Verify(VerifyArgs),
    /// Print the characteristic-class table next to the tabulated values.
    Table2(OutputArgs),
    /// Evaluate one quantity at a phase point read from a JSON file.
    Eval(EvalArgs),
    /// List the generator labels used as spin keys in phase files.
    Labels(LabelArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Elliptic,
    Lie,
    Lattice,
    Cm,
    Rmatrix,
    Kzb,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Vector,
    Adjoint,
    #[value(alias = "sl2n_lambda")]
    Sl2nLambda,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalKind {
    Hamiltonian,
    Lax,
    Rmatrix,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the output here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SystemArgs {
    #[arg(long, default_value = "A2")]
    algebra: String,
    /// Order of the outer automorphism.
    #[arg(long, default_value_t = 2)]
    order: u32,
    #[arg(long, value_enum, default_value = "vector")]
    variant: VariantArg,
    /// Modular parameter, e.g. 0+0.9i.
    #[arg(long, default_value = "0+0.9i", allow_hyphen_values = true)]
    tau: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: SuiteArg,
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples per check; each suite has its own default.
    #[arg(long)]
    samples: Option<usize>,
    /// Tolerance for every check, or CHECK=VALUE for one; repeatable.
    #[arg(long)]
    tol: Vec<String>,
    /// Marked points for the KZB probe.
    #[arg(long, default_value_t = 2)]
    points: usize,
    /// Finite-difference step of the KZB probe.
    #[arg(long, default_value_t = 1e-4)]
    fd_step: f64,
    /// Record wall time per check (reports then differ between runs).
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct LabelArgs {
    #[command(flatten)]
    system: SystemArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(value_enum)]
    kind: EvalKind,
    /// Phase point JSON: {"u": [[re, im], ...], "v": [...], "spin": {"label": [re, im]}}.
    #[arg(long)]
    phase: PathBuf,
    #[command(flatten)]
    system: SystemArgs,
    /// Spectral parameter for `lax` and `rmatrix`.
    #[arg(long, default_value = "0.31+0.17i", allow_hyphen_values = true)]
    z: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure that ends the run with a nonzero status.
struct Failure {
    code: u8,
    message: String,
}

fn config_error(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_CONFIG, message: e.to_string() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(args) => verify(args),
        Command::Table2(args) => print_table2(args),
        Command::Eval(args) => eval(args),
        Command::Labels(args) => labels(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("twistcm: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| config_error(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn system_variant(v: VariantArg) -> SystemVariant {
    match v {
        VariantArg::Vector => SystemVariant::Vector,
        VariantArg::Adjoint => SystemVariant::Adjoint,
        VariantArg::Sl2nLambda => SystemVariant::Sl2nLambda,
    }
}

fn suite(s: SuiteArg) -> Suite {
    match s {
        SuiteArg::Elliptic => Suite::Elliptic,
        SuiteArg::Lie => Suite::Lie,
        SuiteArg::Lattice => Suite::Lattice,
        SuiteArg::Cm => Suite::Cm,
        SuiteArg::Rmatrix => Suite::Rmatrix,
        SuiteArg::Kzb => Suite::Kzb,
        SuiteArg::All => Suite::All,
    }
}

fn verify(args: VerifyArgs) -> Result<u8, Failure> {
    let algebra: AlgebraSpec = args.system.algebra.parse().map_err(config_error)?;
    let tolerances = args.tol.iter().map(|t| t.parse::<ToleranceOverride>()).collect::<Result<Vec<_>, _>>().map_err(config_error)?;
    let cfg = SuiteConfig {
        order: args.system.order,
        variant: system_variant(args.system.variant),
        tau: parse_complex(&args.system.tau).map_err(config_error)?,
        seed: args.seed,
        samples: args.samples,
        points: args.points,
        fd_step: args.fd_step,
        tolerances,
        timed: args.timings,
        ..SuiteConfig::new(suite(args.suite), algebra)
    };
    let report = run_suite(&cfg).map_err(config_error)?;
    let text = match args.output.format {
        Format::Json => report.to_json() + "\n",
        Format::Text => {
            let failed = report.entries.iter().filter(|e| !e.passed).count();
            format!("{}{} checks, {} failed\n", report.render_text(), report.entries.len(), failed)
        }
    };
    emit(&text, args.output.out.as_ref())?;
    Ok(if report.all_passed() { 0 } else { EXIT_FAILED })
}

fn print_table2(args: OutputArgs) -> Result<u8, Failure> {
    let rows = table2().map_err(config_error)?;
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n",
        Format::Text => render_table2(&rows),
    };
    emit(&text, args.out.as_ref())?;
    Ok(if rows.iter().all(|r| r.matches()) { 0 } else { EXIT_FAILED })
}

fn pair(c: C64) -> Value {
    json!([c.re, c.im])
}

fn matrix(m: &CMat) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| pair(m[(i, j)])).collect())).collect())
}

fn build_system(args: &SystemArgs) -> Result<CMSystem, Failure> {
    let spec: AlgebraSpec = args.algebra.parse().map_err(config_error)?;
    let variant = system_variant(args.variant);
    let basis = if variant == SystemVariant::Sl2nLambda { Variant::Sl2nLambda } else { Variant::Diagram };
    let tau = parse_complex(&args.tau).map_err(config_error)?;
    let tla = build_twisted_algebra(spec.family, spec.rank, args.order, basis).map_err(config_error)?;
    CMSystem::new(tla, tau, variant).map_err(config_error)
}

fn labels(args: LabelArgs) -> Result<u8, Failure> {
    let sys = build_system(&args.system)?;
    let generators: Vec<Value> = (0..sys.dim())
        .map(|a| {
            let g = &sys.tla().generators[a];
            json!({ "label": g.label, "kind": g.kind, "grade": g.grade, "constrained": sys.is_constrained(a) })
        })
        .collect();
    let value = json!({ "rank": sys.rank(), "generators": generators });
    emit(&(serde_json::to_string_pretty(&value).expect("value serializes") + "\n"), None)?;
    Ok(0)
}

fn eval(args: EvalArgs) -> Result<u8, Failure> {
    let sys = build_system(&args.system)?;
    let z = parse_complex(&args.z).map_err(config_error)?;
    let text = std::fs::read_to_string(&args.phase).map_err(|e| config_error(format!("cannot read {}: {e}", args.phase.display())))?;
    let p = sys.phase_from_json(&text).map_err(config_error)?;
    let value = match args.kind {
        EvalKind::Hamiltonian => json!({ "hamiltonian": pair(sys.hamiltonian_closed(&p).map_err(config_error)?) }),
        EvalKind::Lax => {
            let l = sys.lax(&p, z).map_err(config_error)?;
            json!({ "z": pair(z), "trace_normalization": sys.trace_normalization(), "matrix": matrix(&l.matrix) })
        }
        EvalKind::Rmatrix => {
            let r = r_eval(&sys, &p.u, z).map_err(config_error)?;
            json!({ "z": pair(z), "u": p.u.iter().map(|&c| pair(c)).collect::<Vec<_>>(), "tensor": matrix(&r.tensor) })
        }
    };
    emit(&(serde_json::to_string_pretty(&value).expect("value serializes") + "\n"), args.out.as_ref())?;
    Ok(0)
}
