//! Machine-readable run reports and their human-readable rendering.

use std::fmt::Write as _;

use combsqec_core::conditions::{ConditionReport, Decoder, EntropyRow, ErrorIndex, RecoveryReport, Witness};
use combsqec_core::optimize::OptimizationState;
use serde::{Deserialize, Serialize};

use crate::format::{matrix_to, Complex, LoadResiduals, Matrix};

pub const TOOL: &str = "combsqec";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub instance: String,
    #[serde(default)]
    pub input_digest: Option<String>,
    /// "CORRECTABLE" or "NOT CORRECTABLE" when a checker ran.
    #[serde(default)]
    pub verdict: Option<String>,
    #[serde(default)]
    pub residuals: Option<LoadResiduals>,
    #[serde(default)]
    pub checks: Vec<CheckSummary>,
    #[serde(default)]
    pub decode: Vec<DecodeSummary>,
    #[serde(default)]
    pub optimize: Option<OptimizeSummary>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str, instance: &str, input_digest: Option<String>) -> Self {
        Report {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            instance: instance.into(),
            input_digest,
            verdict: None,
            residuals: None,
            checks: Vec::new(),
            decode: Vec::new(),
            optimize: None,
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// `(e_0,…,e_l)` with `:ε` appended for a nontrivial final environment.
pub fn error_label(e: &ErrorIndex, env_dim: usize) -> String {
    let seq: Vec<String> = e.sequence.iter().map(|k| k.to_string()).collect();
    if env_dim > 1 {
        format!("({}):{}", seq.join(","), e.env)
    } else {
        format!("({})", seq.join(","))
    }
}

fn c(z: combsqec_core::tensor::C64) -> Complex {
    [z.re, z.im]
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct WitnessSummary {
    pub memory: String,
    pub outcomes: Vec<String>,
    pub e: String,
    pub e_prime: String,
    pub i: usize,
    pub j: usize,
    pub value: Complex,
    pub lambda: Complex,
    pub residual: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct LambdaEntry {
    pub memory: String,
    /// Rows e', columns e, in the order of `CheckSummary::errors`.
    pub matrix: Matrix,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct EntropySummary {
    pub memory: String,
    pub probability: f64,
    pub s_r: f64,
    pub s_me: f64,
    pub s_rme: f64,
    pub mutual_information: f64,
    pub reference_deficit: f64,
}

impl From<&EntropyRow> for EntropySummary {
    fn from(r: &EntropyRow) -> Self {
        EntropySummary {
            memory: r.m.clone(),
            probability: r.probability,
            s_r: r.s_r,
            s_me: r.s_me,
            s_rme: r.s_rme,
            mutual_information: r.mutual_information,
            reference_deficit: r.reference_deficit,
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct CheckSummary {
    pub method: String,
    pub verdict: String,
    pub worst_residual: f64,
    pub tolerance: f64,
    pub scale: f64,
    pub errors: Vec<String>,
    #[serde(default)]
    pub witness: Option<WitnessSummary>,
    #[serde(default)]
    pub lambda: Vec<LambdaEntry>,
    #[serde(default)]
    pub entropy: Vec<EntropySummary>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl CheckSummary {
    pub fn from_report(r: &ConditionReport, env_dim: usize) -> Self {
        let w = |w: &Witness| WitnessSummary {
            memory: w.m.clone(),
            outcomes: w.outcomes.clone(),
            e: error_label(&w.e, env_dim),
            e_prime: error_label(&w.e_prime, env_dim),
            i: w.i,
            j: w.j,
            value: c(w.value),
            lambda: c(w.lambda),
            residual: w.residual,
        };
        CheckSummary {
            method: r.method.clone(),
            verdict: r.verdict.as_str().into(),
            worst_residual: r.worst_residual,
            tolerance: r.tolerance,
            scale: r.scale,
            errors: r.errors.iter().map(|e| error_label(e, env_dim)).collect(),
            witness: r.witness.as_ref().map(w),
            lambda: r.lambda.iter().map(|(m, l)| LambdaEntry { memory: m.clone(), matrix: matrix_to(l) }).collect(),
            entropy: r.entropy.iter().map(EntropySummary::from).collect(),
            notes: r.notes.clone(),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct DecoderBlockSummary {
    pub memory: String,
    pub kraus_count: usize,
    pub completion_rank: usize,
    pub completeness_residual: f64,
    /// max − min of λ_m(ψ) over the sampled states.
    #[serde(default)]
    pub lambda_spread: Option<f64>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct DecodeSummary {
    pub proof: String,
    pub samples: usize,
    pub seed: u64,
    pub worst_fidelity: f64,
    pub lambda_sums: Vec<f64>,
    pub min_lambda: f64,
    pub blocks: Vec<DecoderBlockSummary>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl DecodeSummary {
    pub fn new(proof: &str, seed: u64, decoder: &Decoder, rec: &RecoveryReport) -> Self {
        DecodeSummary {
            proof: proof.into(),
            samples: rec.samples,
            seed,
            worst_fidelity: rec.worst_fidelity,
            lambda_sums: rec.lambda_sums.clone(),
            min_lambda: rec.min_lambda,
            blocks: decoder
                .blocks
                .iter()
                .map(|b| DecoderBlockSummary {
                    memory: b.m.clone(),
                    kraus_count: b.kraus.len(),
                    completion_rank: b.completion_kraus.len(),
                    completeness_residual: b.completeness_residual(),
                    lambda_spread: rec.lambda_spread.iter().find(|(m, _)| *m == b.m).map(|(_, s)| *s),
                })
                .collect(),
            notes: rec.notes.clone(),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub factor: String,
    pub fidelity: f64,
    pub feasibility: f64,
}

/// Final factors as Choi matrices, ordered (output, input).
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Factors {
    pub memory: Vec<Vec<String>>,
    pub encoder: Matrix,
    /// `instruments[r-1][a][b]` for memory value a before and b after round r.
    pub instruments: Vec<Vec<Vec<Matrix>>>,
    pub decoders: Vec<Matrix>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct OptimizeSummary {
    pub method: String,
    pub start: String,
    pub seed: u64,
    pub logical: usize,
    pub final_fidelity: f64,
    pub converged: bool,
    pub iterations: usize,
    pub feasibility: f64,
    pub trace: Vec<TraceEntry>,
    #[serde(default)]
    pub events: Vec<String>,
    pub factors: Factors,
}

impl OptimizeSummary {
    pub fn new(method: &str, start: &str, state: &OptimizationState, feasibility: f64) -> Self {
        OptimizeSummary {
            method: method.into(),
            start: start.into(),
            seed: state.config.seed,
            logical: state.dims.logical,
            final_fidelity: state.final_fidelity().unwrap_or(0.0),
            converged: state.converged,
            iterations: state.iterations,
            feasibility,
            trace: state
                .trace
                .iter()
                .map(|t| TraceEntry { iteration: t.iteration, factor: t.factor.clone(), fidelity: t.fidelity, feasibility: t.feasibility })
                .collect(),
            events: state.events.clone(),
            factors: Factors {
                memory: state.memory.clone(),
                encoder: matrix_to(&state.encoder),
                instruments: state
                    .instruments
                    .iter()
                    .map(|round| round.iter().map(|g| g.iter().map(matrix_to).collect()).collect())
                    .collect(),
                decoders: state.decoders.iter().map(matrix_to).collect(),
            },
        }
    }
}

/// Human-readable lines for one checker run.
pub fn render_check(s: &CheckSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "method {}: {} (worst residual {:.3e}, tolerance {:.1e}, scale {:.3e})",
        s.method, s.verdict, s.worst_residual, s.tolerance, s.scale
    );
    if let Some(w) = &s.witness {
        if w.residual > s.tolerance * s.scale {
            let _ = writeln!(
                out,
                "  witness: memory `{}`, outcomes [{}], e' = {}, e = {}, entry ({}, {}) = {:.6e}{:+.6e}i, residual {:.3e}",
                w.memory,
                w.outcomes.join(" "),
                w.e_prime,
                w.e,
                w.j,
                w.i,
                w.value[0],
                w.value[1],
                w.residual
            );
        }
    }
    for row in &s.entropy {
        let _ = writeln!(
            out,
            "  memory `{}`: P = {:.6}, S(R) = {:.6}, S(ME) = {:.6}, S(RME) = {:.6}, I(R:ME) = {:.3e}",
            row.memory, row.probability, row.s_r, row.s_me, row.s_rme, row.mutual_information
        );
    }
    for n in &s.notes {
        let _ = writeln!(out, "  note: {n}");
    }
    out
}

/// λ table of one memory state, rows e' and columns e.
pub fn render_lambda(s: &CheckSummary, limit: usize) -> String {
    let mut out = String::new();
    let nonzero = |e: &&LambdaEntry| e.matrix.iter().flatten().any(|z| z[0].abs() > 1e-12 || z[1].abs() > 1e-12);
    let shown: Vec<&LambdaEntry> = s.lambda.iter().filter(nonzero).collect();
    let zero = s.lambda.len() - shown.len();
    if zero > 0 {
        let _ = writeln!(out, "  lambda vanishes at {zero} memory states");
    }
    for entry in shown.iter().take(limit) {
        let _ = writeln!(out, "  lambda at memory `{}` (rows e', columns e over {}):", entry.memory, s.errors.join(" "));
        for row in &entry.matrix {
            let cells: Vec<String> = row
                .iter()
                .map(|z| if z[1].abs() < 1e-12 { format!("{:>9.5}", z[0]) } else { format!("{:.5}{:+.5}i", z[0], z[1]) })
                .collect();
            let _ = writeln!(out, "    {}", cells.join(" "));
        }
    }
    if shown.len() > limit {
        let _ = writeln!(out, "  ({} more memory states)", shown.len() - limit);
    }
    out
}

pub fn render_decode(d: &DecodeSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "decoder ({} proof): {} blocks, {} samples (seed {})", d.proof, d.blocks.len(), d.samples, d.seed);
    let _ = writeln!(out, "  worst recovery fidelity {:.12}", d.worst_fidelity);
    if let (Some(lo), Some(hi)) = (
        d.lambda_sums.iter().copied().reduce(f64::min),
        d.lambda_sums.iter().copied().reduce(f64::max),
    ) {
        let _ = writeln!(out, "  sum over final memory of lambda: min {lo:.12}, max {hi:.12}");
    }
    let spread = d.blocks.iter().filter_map(|b| b.lambda_spread).fold(0.0, f64::max);
    let _ = writeln!(out, "  largest lambda spread across states {spread:.3e}");
    for n in &d.notes {
        let _ = writeln!(out, "  note: {n}");
    }
    out
}
