//! `combsqec check|decode|optimize|demo`.
//!
//! Exit codes: 0 success / correctable, 1 not correctable or recovery
//! below threshold, 2 usage, parse or cap error, 3 checker disagreement,
//! 4 optimizer stopped at the iteration limit without converging.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use combsqec_core::conditions::{
    check_info_from, compose_all, joint_state_from, lambda_from, random_codestates, synth_decoder_algebraic_from,
    synth_decoder_schmidt_from, verify_recovery_from, Composed, ConditionReport, SchmidtOptions, Verdict, ALGEBRAIC_TOL,
    INFO_TOL,
};
use combsqec_core::library::{self, format_signs, hexagon_flip_table};
use combsqec_core::model::{ErrorModel, ErrorRound, Limits, StrategicCode};
use combsqec_core::optimize::{maximally_mixed, seesaw, seesaw_from, static_biconvex, OptimizationState};
use combsqec_core::tensor::eye;
use combsqec_core::Error as CoreError;

use crate::format::{instance_file, parse_instance, write_instance, LoadedInstance, Start};
use crate::parallel::Parallel;
use crate::report::{render_check, render_decode, render_lambda, CheckSummary, DecodeSummary, OptimizeSummary, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CORRECTABLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DISAGREE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

/// Recovery fidelity threshold of `decode`.
pub const DECODE_THRESHOLD: f64 = 1e-6;
pub const DENSE_CAP_VAR: &str = "COMBSQEC_DENSE_CAP";

#[derive(Parser, Debug)]
#[command(name = "combsqec", version, about = "Correctability checks, decoders and code optimization for strategic quantum codes")]
pub struct Cli {
    /// Worker threads for independent sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Algebraic,
    Info,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Proof {
    Algebraic,
    Schmidt,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StartArg {
    Code,
    Identity,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide exact correctability of an instance file.
    Check {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Algebraic)]
        method: Method,
        /// Algebraic tolerance (relative to the operator scale) and
        /// mutual-information tolerance in bits.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build a decoder and verify recovery on random codestates.
    Decode {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Proof::Algebraic)]
        proof: Proof,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Maximize entanglement fidelity by see-saw coordinate ascent.
    Optimize {
        /// Instance file; omit to optimize against a noiseless model built from --dims.
        path: Option<PathBuf>,
        /// Comma-separated Q_r dimensions, one per round or a single value for all.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Number of rounds l (the model has l + 1 error rounds).
        #[arg(long)]
        rounds: Option<usize>,
        /// Dimension of the logical system L.
        #[arg(long)]
        logical: Option<usize>,
        /// Comma-separated number of memory values per round.
        #[arg(long, value_delimiter = ',')]
        memory: Option<Vec<usize>>,
        #[arg(long, value_enum)]
        start: Option<StartArg>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol_conv: Option<f64>,
        #[arg(long)]
        perturbation: Option<f64>,
        #[arg(long)]
        inner_steps: Option<usize>,
        /// Alternate encoder and decoder only (single-round models).
        #[arg(long)]
        biconvex: bool,
        /// Line-oriented fidelity trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Walk through a built-in instance.
    Demo {
        name: String,
        /// Write the instance file.
        #[arg(long)]
        export: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// A failure that ends the run with a given exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: i32,
    pub message: String,
}

impl Exit {
    fn usage(msg: impl std::fmt::Display) -> Self {
        Exit { code: EXIT_USAGE, message: msg.to_string() }
    }
}

impl From<CoreError> for Exit {
    fn from(e: CoreError) -> Self {
        let message = match &e {
            CoreError::DenseCap { .. } => format!("{e} (raise it with {DENSE_CAP_VAR})"),
            _ => e.to_string(),
        };
        Exit { code: EXIT_USAGE, message }
    }
}

type Run = Result<i32, Exit>;

pub fn limits_from_env() -> Result<Limits, Exit> {
    let mut limits = Limits::default();
    if let Ok(v) = std::env::var(DENSE_CAP_VAR) {
        limits.dense_cap = v.trim().parse().map_err(|_| Exit::usage(format!("{DENSE_CAP_VAR} must be a positive integer, got `{v}`")))?;
        if limits.dense_cap == 0 {
            return Err(Exit::usage(format!("{DENSE_CAP_VAR} must be positive")));
        }
    }
    Ok(limits)
}

struct Ctx {
    limits: Limits,
    exec: Parallel,
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: Cli) -> Run {
    let ctx = Ctx { limits: limits_from_env()?, exec: Parallel::new(cli.jobs).map_err(Exit::usage)? };
    match cli.command {
        Command::Check { path, method, tol, report } => cmd_check(&ctx, &path, method, tol, report.as_deref()),
        Command::Decode { path, proof, samples, seed, report } => cmd_decode(&ctx, &path, proof, samples, seed, report.as_deref()),
        Command::Optimize {
            path,
            dims,
            rounds,
            logical,
            memory,
            start,
            seed,
            max_iters,
            tol_conv,
            perturbation,
            inner_steps,
            biconvex,
            trace,
            report,
        } => {
            let args = OptimizeArgs {
                dims,
                rounds,
                logical,
                memory,
                start,
                seed,
                max_iters,
                tol_conv,
                perturbation,
                inner_steps,
                biconvex,
            };
            cmd_optimize(path.as_deref(), args, trace.as_deref(), report.as_deref())
        }
        Command::Demo { name, export, report } => cmd_demo(&ctx, &name, export.as_deref(), report.as_deref()),
    }
}

fn load(path: &Path) -> Result<LoadedInstance, Exit> {
    parse_instance(path).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))
}

fn write_report(path: Option<&Path>, report: &Report) -> Result<(), Exit> {
    if let Some(p) = path {
        std::fs::write(p, report.to_json()).map_err(|e| Exit::usage(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn describe(inst: &LoadedInstance) -> String {
    let mut out = String::new();
    let basis = inst.code.codespace.basis();
    let _ = writeln!(
        out,
        "instance {}: {} logical states in dimension {}, {} rounds, {} error sequences ({})",
        inst.name,
        basis.ncols(),
        basis.nrows(),
        inst.code.rounds(),
        inst.errors.sequence_count(),
        inst.digest
    );
    let worst = inst.residuals.completeness.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    let tp = inst.residuals.error_tp.iter().copied().fold(0.0, f64::max);
    let _ = writeln!(
        out,
        "residuals: orthonormality {:.1e}, instrument completeness {:.1e}, error trace preservation {:.1e}",
        inst.residuals.orthonormality, worst, tp
    );
    out
}

struct Checks {
    reports: Vec<ConditionReport>,
    verdict: Verdict,
    agree: bool,
}

fn run_checks(ctx: &Ctx, composed: &Composed, method: Method, tol: Option<f64>) -> Result<Checks, Exit> {
    let mut reports = Vec::new();
    if matches!(method, Method::Algebraic | Method::Both) {
        reports.push(lambda_from(composed, &ctx.exec).report("algebraic", tol.unwrap_or(ALGEBRAIC_TOL)));
    }
    if matches!(method, Method::Info | Method::Both) {
        let js = joint_state_from(composed, &ctx.limits, &ctx.exec)?;
        reports.push(check_info_from(&js, tol.unwrap_or(INFO_TOL), &ctx.exec)?);
    }
    let verdict = reports[0].verdict;
    let agree = reports.iter().all(|r| r.verdict == verdict);
    Ok(Checks { reports, verdict, agree })
}

fn print_checks(checks: &Checks, env_dim: usize, report: &mut Report) {
    for r in &checks.reports {
        let s = CheckSummary::from_report(r, env_dim);
        print!("{}", render_check(&s));
        if s.method == "algebraic" {
            print!("{}", render_lambda(&s, 4));
        }
        report.checks.push(s);
    }
    report.verdict = Some(checks.verdict.as_str().into());
}

fn verdict_exit(checks: &Checks) -> i32 {
    if !checks.agree {
        eprintln!("error: checkers disagree; this indicates a bug");
        return EXIT_DISAGREE;
    }
    println!("{}", checks.verdict.as_str());
    if checks.verdict.is_correctable() {
        EXIT_OK
    } else {
        EXIT_NOT_CORRECTABLE
    }
}

fn cmd_check(ctx: &Ctx, path: &Path, method: Method, tol: Option<f64>, report_path: Option<&Path>) -> Run {
    if let Some(t) = tol {
        if !(t >= 0.0) {
            return Err(Exit::usage("--tol must be nonnegative"));
        }
    }
    let inst = load(path)?;
    let composed = compose_all(&inst.code, &inst.errors, &ctx.limits, &ctx.exec)?;
    let checks = run_checks(ctx, &composed, method, tol)?;
    print!("{}", describe(&inst));
    let mut report = Report::new("check", &inst.name, Some(inst.digest.clone()));
    report.residuals = Some(inst.residuals.clone());
    print_checks(&checks, inst.errors.final_env_dim(), &mut report);
    if let Some(exp) = inst.expected {
        if exp != checks.verdict {
            report.notes.push(format!("file expects {}", exp.as_str()));
            println!("note: the file expects {}", exp.as_str());
        }
    }
    let code = verdict_exit(&checks);
    write_report(report_path, &report)?;
    Ok(code)
}

/// Decoder synthesis plus recovery check; `Err` carries the checker witness.
fn decode_one(
    ctx: &Ctx,
    code: &StrategicCode,
    composed: &Composed,
    proof: &str,
    samples: usize,
    seed: u64,
) -> Result<Result<DecodeSummary, String>, Exit> {
    let basis = code.codespace.basis();
    let dec = match proof {
        "algebraic" => {
            let lt = lambda_from(composed, &ctx.exec);
            synth_decoder_algebraic_from(composed, &lt, basis, ALGEBRAIC_TOL, &ctx.exec)
        }
        _ => {
            let js = joint_state_from(composed, &ctx.limits, &ctx.exec)?;
            synth_decoder_schmidt_from(composed, &js, basis, SchmidtOptions::default(), &ctx.exec)
        }
    };
    let dec = match dec {
        Ok(d) => d,
        Err(CoreError::NotCorrectable(w)) => return Ok(Err(w)),
        Err(e) => return Err(e.into()),
    };
    let states = random_codestates(&code.codespace, samples, seed);
    let rec = verify_recovery_from(composed, basis, &dec, &states)?;
    Ok(Ok(DecodeSummary::new(proof, seed, &dec, &rec)))
}

fn proofs(p: Proof) -> &'static [&'static str] {
    match p {
        Proof::Algebraic => &["algebraic"],
        Proof::Schmidt => &["schmidt"],
        Proof::Both => &["algebraic", "schmidt"],
    }
}

fn run_decodes(ctx: &Ctx, code: &StrategicCode, composed: &Composed, which: &[&str], samples: usize, seed: u64, report: &mut Report) -> Run {
    if samples == 0 {
        println!("warning: --samples=0, recovery holds vacuously");
    }
    let mut exit = EXIT_OK;
    for proof in which {
        match decode_one(ctx, code, composed, proof, samples, seed)? {
            Ok(s) => {
                print!("{}", render_decode(&s));
                if s.worst_fidelity < 1.0 - DECODE_THRESHOLD {
                    println!("  recovery fidelity below 1 - {DECODE_THRESHOLD:e}");
                    exit = EXIT_NOT_CORRECTABLE;
                }
                report.decode.push(s);
            }
            Err(w) => {
                println!("decoder ({proof} proof): NOT CORRECTABLE");
                println!("  witness: {w}");
                report.notes.push(format!("{proof}: {w}"));
                exit = EXIT_NOT_CORRECTABLE;
            }
        }
    }
    Ok(exit)
}

fn cmd_decode(ctx: &Ctx, path: &Path, proof: Proof, samples: usize, seed: u64, report_path: Option<&Path>) -> Run {
    let inst = load(path)?;
    let composed = compose_all(&inst.code, &inst.errors, &ctx.limits, &ctx.exec)?;
    print!("{}", describe(&inst));
    let mut report = Report::new("decode", &inst.name, Some(inst.digest.clone()));
    report.residuals = Some(inst.residuals.clone());
    let exit = run_decodes(ctx, &inst.code, &composed, proofs(proof), samples, seed, &mut report)?;
    write_report(report_path, &report)?;
    Ok(exit)
}

#[derive(Debug, Default)]
pub struct OptimizeArgs {
    pub dims: Option<Vec<usize>>,
    pub rounds: Option<usize>,
    pub logical: Option<usize>,
    pub memory: Option<Vec<usize>>,
    pub start: Option<StartArg>,
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub tol_conv: Option<f64>,
    pub perturbation: Option<f64>,
    pub inner_steps: Option<usize>,
    pub biconvex: bool,
}

/// Noiseless model with Q_r of dimension `dims[r]`.
pub fn noiseless(dims: &[usize], rounds: usize) -> Result<ErrorModel, Exit> {
    let ds: Vec<usize> = match dims.len() {
        1 => vec![dims[0]; rounds + 1],
        n if n == rounds + 1 => dims.to_vec(),
        n => return Err(Exit::usage(format!("--dims has {n} entries; expected 1 or {}", rounds + 1))),
    };
    if ds.contains(&0) {
        return Err(Exit::usage("--dims entries must be positive"));
    }
    let rs = ds.iter().map(|&d| ErrorRound::simple(vec![eye(d)])).collect::<Result<Vec<_>, _>>()?;
    Ok(ErrorModel::new(rs)?)
}

fn cmd_optimize(path: Option<&Path>, a: OptimizeArgs, trace: Option<&Path>, report_path: Option<&Path>) -> Run {
    let inst = match path {
        Some(p) => Some(load(p)?),
        None => None,
    };
    let spec = inst.as_ref().and_then(|i| i.optimization.clone());
    let (errors, name, digest) = match (&inst, &a.dims) {
        (Some(_), Some(_)) => return Err(Exit::usage("give either an instance file or --dims, not both")),
        (Some(i), None) => {
            if let Some(l) = a.rounds {
                if l != i.code.rounds() {
                    return Err(Exit::usage(format!("--rounds {l} but the instance has {} rounds", i.code.rounds())));
                }
            }
            (i.errors.clone(), i.name.clone(), Some(i.digest.clone()))
        }
        (None, Some(d)) => (noiseless(d, a.rounds.unwrap_or(0))?, "noiseless".to_string(), None),
        (None, None) => return Err(Exit::usage("optimize needs an instance file or --dims")),
    };
    let l = errors.num_rounds() - 1;
    let mut config = spec.as_ref().map(|s| s.config.clone()).unwrap_or_default();
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if let Some(v) = a.max_iters {
        config.max_iters = v;
    }
    if let Some(v) = a.tol_conv {
        config.tol_conv = v;
    }
    if let Some(v) = a.perturbation {
        config.perturbation = v;
    }
    if let Some(v) = a.inner_steps {
        config.inner_steps = v;
    }
    if !(config.tol_conv > 0.0) || !(config.perturbation >= 0.0) {
        return Err(Exit::usage("--tol-conv must be positive and --perturbation nonnegative"));
    }
    let code = inst.as_ref().map(|i| &i.code);
    let logical = a.logical.or(spec.as_ref().map(|s| s.logical)).or(code.map(|c| c.codespace.dim())).unwrap_or(2);
    let memory = a.memory.clone().or(spec.as_ref().map(|s| s.memory.clone())).unwrap_or_else(|| vec![1; l]);
    let code_fits = code.map(|c| c.codespace.dim()) == Some(logical);
    let start = match (a.start, &spec) {
        (Some(StartArg::Code), _) => Start::Code,
        (Some(StartArg::Identity), _) => Start::Identity,
        (None, Some(s)) => s.start,
        (None, None) if code_fits && a.memory.is_none() => Start::Code,
        (None, None) => Start::Identity,
    };
    if start == Start::Code && !code_fits {
        return Err(Exit::usage("the code start needs an instance whose codespace dimension equals the logical dimension"));
    }
    let rho = match spec.as_ref().and_then(|s| s.rho.clone()) {
        Some(r) if r.nrows() == logical => r,
        Some(_) => return Err(Exit::usage("optimization.rho does not match the logical dimension")),
        None => maximally_mixed(logical),
    };
    let biconvex = a.biconvex || spec.as_ref().map(|s| s.biconvex).unwrap_or(false);
    let (method, state) = if biconvex {
        if l != 0 {
            return Err(Exit::usage(format!("--biconvex needs a single-round model; this one has {l} rounds")));
        }
        ("biconvex", static_biconvex(&errors, &rho, &config)?)
    } else if start == Start::Code {
        let c = code.expect("code start has a code");
        ("seesaw", seesaw_from(OptimizationState::from_code(c, &errors, &config)?, &errors, &rho)?)
    } else {
        ("seesaw", seesaw(&errors, &rho, &memory, &config)?)
    };
    let start_name = if !biconvex && start == Start::Code { "code" } else { "identity" };
    let feasibility = state.feasibility_residual()?;
    let f = state.final_fidelity().unwrap_or(0.0);
    if let Some(t) = trace {
        let mut text = state.trace_lines().join("\n");
        text.push('\n');
        std::fs::write(t, text).map_err(|e| Exit::usage(format!("{}: {e}", t.display())))?;
    }
    println!("optimizing {name}: {method} from the {start_name} start, logical dimension {logical}, seed {}", config.seed);
    for ev in &state.events {
        println!("  event: {ev}");
    }
    println!(
        "final entanglement fidelity {f:.12} after {} iterations ({}), feasibility residual {feasibility:.1e}",
        state.iterations,
        if state.converged { "converged" } else { "iteration limit reached" }
    );
    let mut report = Report::new("optimize", &name, digest);
    report.optimize = Some(OptimizeSummary::new(method, start_name, &state, feasibility));
    write_report(report_path, &report)?;
    Ok(if state.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_demo(ctx: &Ctx, name: &str, export: Option<&Path>, report_path: Option<&Path>) -> Run {
    let inst = match library::by_name(name) {
        Some(r) => r?,
        None => return Err(Exit::usage(format!("unknown demo `{name}`; available: {}", library::library_names().join(", ")))),
    };
    if let Some(p) = export {
        write_instance(p, &instance_file(&inst)).map_err(Exit::usage)?;
    }
    let composed = compose_all(&inst.code, &inst.errors, &ctx.limits, &ctx.exec)?;
    let checks = run_checks(ctx, &composed, Method::Both, None)?;
    let basis = inst.code.codespace.basis();
    println!("demo {}: {}", inst.name, inst.provenance);
    println!(
        "{} logical states in dimension {}, {} rounds, {} error sequences",
        basis.ncols(),
        basis.nrows(),
        inst.code.rounds(),
        inst.errors.sequence_count()
    );
    let mut report = Report::new("demo", &inst.name, None);
    print_checks(&checks, inst.errors.final_env_dim(), &mut report);
    if name == "hexagon" {
        print!("{}", flip_walkthrough(ctx)?);
    }
    let mut exit = verdict_exit(&checks);
    if exit == EXIT_OK {
        exit = run_decodes(ctx, &inst.code, &composed, proofs(Proof::Both), 20, 0, &mut report)?;
    }
    if let Some(p) = export {
        println!("instance written to {}", p.display());
    }
    write_report(report_path, &report)?;
    Ok(exit)
}

/// Outcome-flip table of the hexagon relative to the error-free run.
fn flip_walkthrough(ctx: &Ctx) -> Result<String, Exit> {
    let rows = hexagon_flip_table(&ctx.limits, &ctx.exec)?;
    let mut out = String::new();
    let _ = writeln!(out, "outcome flips relative to the error-free run (o1: XX checks, o2: YY checks):");
    let _ = writeln!(out, "  {:<6} {:<12} {:<12} support", "error", "flip o1", "flip o2");
    for r in &rows {
        let (f1, f2) = match &r.flip {
            Some(f) => (format_signs(&f[0]), format_signs(&f[1])),
            None => ("none".into(), "none".into()),
        };
        let _ = writeln!(out, "  {:<6} {:<12} {:<12} {} outcome sequences", r.error, f1, f2, r.support.len());
    }
    Ok(out)
}
