//! Exact correctability: the algebraic and information-theoretic checkers,
//! decoder synthesis from either, and recovery verification.
//!
//! The final environment leg E_l is part of the inaccessible register: each
//! composed operator K_{e,m,o} is split into its components along E_l and
//! every component is treated as a separate error index `ê = (e, ε)`.

mod algebraic;
mod decoder;
mod info;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::{try_map, Executor};
use crate::model::{compose_on, ErrorModel, Limits, StrategicCode, Trajectory};
use crate::tensor::{CMat, C64};

pub use algebraic::{
    check_algebraic, check_corollary_all_outcomes, check_static_kl, lambda_from, lambda_tensor, LambdaBlock,
    LambdaTensor,
};
pub use decoder::{
    random_codestates, synth_decoder_algebraic, synth_decoder_algebraic_from, synth_decoder_schmidt,
    synth_decoder_schmidt_from, verify_recovery, verify_recovery_from, Decoder, DecoderBlock, RecoveryReport,
    RecoveryRow, SchmidtOptions,
};
pub use info::{check_info, check_info_from, joint_state, joint_state_from, JointBlock, JointState};

/// Relative tolerance of the algebraic checkers, multiplied by the operator scale.
pub const ALGEBRAIC_TOL: f64 = 1e-8;
/// Mutual-information tolerance in bits.
pub const INFO_TOL: f64 = 1e-7;
/// Final memory states with probability at or below this are ignored.
pub const P_FLOOR: f64 = 1e-12;
/// Branches whose composed operators all have norm at or below this are skipped.
pub const ZERO_BRANCH_TOL: f64 = 1e-12;

/// Error sequence plus component along the final environment leg.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ErrorIndex {
    pub sequence: Vec<usize>,
    pub env: usize,
}

/// One outcome sequence o ∈ O_m with K̃_{ê,o} = K_{ê,o}B for every ê.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub trajectory: Trajectory,
    /// Indexed like [`Composed::errors`]; each is d_out × k.
    pub kraus: Vec<CMat>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryBlock {
    pub m: String,
    pub branches: Vec<Branch>,
    /// Outcome sequences of O_m whose operators vanish for every error.
    pub skipped: usize,
}

/// All composed operators of a code under an error model, restricted to the
/// codespace and grouped by final memory state.
#[derive(Clone, Debug, PartialEq)]
pub struct Composed {
    pub errors: Vec<ErrorIndex>,
    pub blocks: Vec<MemoryBlock>,
    pub code_dim: usize,
    pub output_dim: usize,
    pub trajectory_count: usize,
    pub injective: bool,
}

impl Composed {
    pub fn skipped(&self) -> usize {
        self.blocks.iter().map(|b| b.skipped).sum()
    }

    pub fn block(&self, m: &str) -> Option<&MemoryBlock> {
        self.blocks.iter().find(|b| b.m == m)
    }

    /// Diagnostic lines shared by every report built from this composition.
    pub fn notes(&self) -> Vec<String> {
        let mut notes = Vec::new();
        let s = self.skipped();
        if s > 0 {
            notes.push(format!(
                "skipped {s} of {} outcome sequences whose composed operators vanish for every error",
                self.trajectory_count
            ));
        }
        notes
    }
}

/// Composes every K_{e,m,o} on the codespace basis.
pub fn compose_all<X: Executor>(code: &StrategicCode, errors: &ErrorModel, limits: &Limits, exec: &X) -> Result<Composed> {
    code.check_compatible(errors)?;
    let seq_count = errors.sequence_count();
    if seq_count > limits.trajectory_cap {
        return Err(Error::TrajectoryCap { count: seq_count, cap: limits.trajectory_cap });
    }
    let traj = code.interrogator.enumerate_trajectories(limits)?;
    let sequences = errors.sequences();
    let env = errors.final_env_dim();
    let l = errors.num_rounds() - 1;
    let output_dim = errors.rounds[l].output_dim();
    let mut index = Vec::with_capacity(sequences.len() * env);
    for s in &sequences {
        for eps in 0..env {
            index.push(ErrorIndex { sequence: s.clone(), env: eps });
        }
    }
    let basis = code.codespace.basis();
    let k = code.codespace.dim();
    let interrogator = &code.interrogator;
    let groups: Vec<(String, Vec<Trajectory>)> = traj.groups.clone();
    let blocks = try_map(exec, groups, |(m, group)| -> Result<MemoryBlock> {
        let mut branches = Vec::new();
        let mut skipped = 0;
        for t in group {
            let factors = interrogator.factors(&t)?;
            let mut kraus = Vec::with_capacity(sequences.len() * env);
            let mut nonzero = false;
            for s in &sequences {
                let full = compose_on(errors, &factors, s, basis)?;
                for eps in 0..env {
                    let part = CMat::from_fn(output_dim, k, |q, i| full[(q * env + eps, i)]);
                    nonzero |= part.norm() > ZERO_BRANCH_TOL;
                    kraus.push(part);
                }
            }
            if nonzero {
                branches.push(Branch { trajectory: t, kraus });
            } else {
                skipped += 1;
            }
        }
        Ok(MemoryBlock { m, branches, skipped })
    })?;
    Ok(Composed {
        errors: index,
        blocks,
        code_dim: k,
        output_dim,
        trajectory_count: traj.count(),
        injective: traj.injective(),
    })
}

/// Location of the largest violation found by a checker.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub m: String,
    pub outcomes: Vec<String>,
    pub e: ErrorIndex,
    pub e_prime: ErrorIndex,
    /// Basis indices of the worst entry ⟨j|T|i⟩ of T − λI.
    pub i: usize,
    pub j: usize,
    /// ⟨j|T|i⟩.
    pub value: C64,
    pub lambda: C64,
    pub residual: f64,
}

/// Per-m entropies of the normalized joint state, in bits.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyRow {
    pub m: String,
    pub probability: f64,
    pub s_r: f64,
    pub s_me: f64,
    pub s_rme: f64,
    pub mutual_information: f64,
    /// log2(k) − S(R).
    pub reference_deficit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Correctable,
    NotCorrectable,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Correctable
        } else {
            Verdict::NotCorrectable
        }
    }

    pub fn is_correctable(self) -> bool {
        self == Verdict::Correctable
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Correctable => "CORRECTABLE",
            Verdict::NotCorrectable => "NOT CORRECTABLE",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub method: String,
    pub verdict: Verdict,
    pub worst_residual: f64,
    /// Absolute tolerance the worst residual was compared against.
    pub tolerance: f64,
    pub scale: f64,
    pub witness: Option<Witness>,
    /// Aggregated λ_{e',e,m} per final memory state (rows e', columns e).
    pub lambda: Vec<(String, CMat)>,
    pub entropy: Vec<EntropyRow>,
    pub errors: Vec<ErrorIndex>,
    pub notes: Vec<String>,
}

#[cfg(test)]
mod tests;
