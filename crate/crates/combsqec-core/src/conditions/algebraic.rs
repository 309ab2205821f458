//! The λ tensor and the algebraic checkers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    compose_all, Branch, Composed, ConditionReport, ErrorIndex, MemoryBlock, Verdict, Witness,
};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::linalg::{herm_eig_mat, op_norm, SpectralResult};
use crate::model::{CodeSpace, ErrorModel, Limits, StrategicCode, Trajectory};
use crate::tensor::CMat;

/// λ_{e',e,m,o} for one final memory state.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaBlock {
    pub m: String,
    pub outcomes: Vec<Vec<String>>,
    /// One n×n matrix per outcome sequence, rows ê', columns ê.
    pub per_outcome: Vec<CMat>,
    /// Σ_o λ_{e',e,m,o}.
    pub aggregate: CMat,
    pub worst: Option<Witness>,
}

impl LambdaBlock {
    /// Λ_m = U diag(d) U†, eigenvalues descending.
    pub fn diagonalize(&self) -> Result<SpectralResult> {
        herm_eig_mat(&self.aggregate)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaTensor {
    pub errors: Vec<ErrorIndex>,
    pub code_dim: usize,
    pub blocks: Vec<LambdaBlock>,
    pub worst: Option<Witness>,
    pub worst_residual: f64,
    /// max ‖K̃‖ · max ‖K̂‖ over all operators.
    pub scale: f64,
    pub notes: Vec<String>,
}

impl LambdaTensor {
    pub fn block(&self, m: &str) -> Option<&LambdaBlock> {
        self.blocks.iter().find(|b| b.m == m)
    }

    /// Verdict under tolerance `tol · scale`.
    pub fn report(&self, method: &str, tol: f64) -> ConditionReport {
        let tolerance = tol * self.scale;
        ConditionReport {
            method: method.into(),
            verdict: Verdict::from_bool(self.worst_residual <= tolerance),
            worst_residual: self.worst_residual,
            tolerance,
            scale: self.scale,
            witness: self.worst.clone(),
            lambda: self.blocks.iter().map(|b| (b.m.clone(), b.aggregate.clone())).collect(),
            entropy: Vec::new(),
            errors: self.errors.clone(),
            notes: self.notes.clone(),
        }
    }
}

struct Sweep {
    block: LambdaBlock,
    norm_k: f64,
    norm_hat: f64,
}

/// T = K̂_{ê'}† K̃_{ê,o} for every pair and branch, given the row operators
/// `hats` (K̂_{ê'} indexed like the branch operators).
fn sweep(errors: &[ErrorIndex], block: &MemoryBlock, hats: &[CMat], k: usize) -> Sweep {
    let n = errors.len();
    let mut per_outcome = Vec::with_capacity(block.branches.len());
    let mut aggregate = CMat::zeros(n, n);
    let mut worst: Option<Witness> = None;
    let mut norm_k: f64 = 0.0;
    for branch in &block.branches {
        let mut lam = CMat::zeros(n, n);
        for (b, kb) in branch.kraus.iter().enumerate() {
            norm_k = norm_k.max(op_norm(kb));
            for (a, ha) in hats.iter().enumerate() {
                let t = ha.adjoint() * kb;
                let l = t.trace() / k as f64;
                let mut r = t.clone();
                for d in 0..k {
                    r[(d, d)] -= l;
                }
                let res = r.norm();
                lam[(a, b)] = l;
                if worst.as_ref().is_none_or(|w| res > w.residual) {
                    let (mut bi, mut bj, mut big) = (0, 0, -1.0);
                    for i in 0..k {
                        for j in 0..k {
                            let v = r[(j, i)].norm();
                            if v > big {
                                big = v;
                                bi = i;
                                bj = j;
                            }
                        }
                    }
                    worst = Some(Witness {
                        m: block.m.clone(),
                        outcomes: branch.trajectory.labels.clone(),
                        e: errors[b].clone(),
                        e_prime: errors[a].clone(),
                        i: bi,
                        j: bj,
                        value: t[(bj, bi)],
                        lambda: l,
                        residual: res,
                    });
                }
            }
        }
        aggregate += &lam;
        per_outcome.push(lam);
    }
    let norm_hat = hats.iter().map(op_norm).fold(0.0, f64::max);
    Sweep {
        block: LambdaBlock {
            m: block.m.clone(),
            outcomes: block.branches.iter().map(|b| b.trajectory.labels.clone()).collect(),
            per_outcome,
            aggregate,
            worst,
        },
        norm_k,
        norm_hat,
    }
}

fn hat_operators(block: &MemoryBlock, n: usize, d: usize, k: usize) -> Vec<CMat> {
    let mut hats = vec![CMat::zeros(d, k); n];
    for branch in &block.branches {
        for (h, kb) in hats.iter_mut().zip(branch.kraus.iter()) {
            *h += kb;
        }
    }
    hats
}

fn assemble(composed: &Composed, sweeps: Vec<Sweep>) -> LambdaTensor {
    let mut worst: Option<Witness> = None;
    let (mut nk, mut nh): (f64, f64) = (0.0, 0.0);
    let mut blocks = Vec::with_capacity(sweeps.len());
    for s in sweeps {
        if let Some(w) = &s.block.worst {
            if worst.as_ref().is_none_or(|cur| w.residual > cur.residual) {
                worst = Some(w.clone());
            }
        }
        nk = nk.max(s.norm_k);
        nh = nh.max(s.norm_hat);
        blocks.push(s.block);
    }
    let scale = nk * nh;
    LambdaTensor {
        errors: composed.errors.clone(),
        code_dim: composed.code_dim,
        blocks,
        worst_residual: worst.as_ref().map(|w| w.residual).unwrap_or(0.0),
        worst,
        scale: if scale > 0.0 { scale } else { 1.0 },
        notes: composed.notes(),
    }
}

/// λ tensor from a precomputed composition.
pub fn lambda_from<X: Executor>(composed: &Composed, exec: &X) -> LambdaTensor {
    let (n, d, k) = (composed.errors.len(), composed.output_dim, composed.code_dim);
    let blocks: Vec<&MemoryBlock> = composed.blocks.iter().collect();
    let sweeps = exec.map(blocks, |b| {
        let hats = hat_operators(b, n, d, k);
        sweep(&composed.errors, b, &hats, k)
    });
    assemble(composed, sweeps)
}

pub fn lambda_tensor<X: Executor>(
    code: &StrategicCode,
    errors: &ErrorModel,
    limits: &Limits,
    exec: &X,
) -> Result<LambdaTensor> {
    Ok(lambda_from(&compose_all(code, errors, limits, exec)?, exec))
}

/// ⟨j|K̂†_{e',m}K_{e,m,o}|i⟩ = λ_{e',e,m,o} δ_{ji} for all entries, with
/// K̂_{e',m} = Σ_{o'} K_{e',m,o'}. `tol` is relative to the operator scale.
pub fn check_algebraic<X: Executor>(
    code: &StrategicCode,
    errors: &ErrorModel,
    tol: f64,
    limits: &Limits,
    exec: &X,
) -> Result<ConditionReport> {
    Ok(lambda_tensor(code, errors, limits, exec)?.report("algebraic", tol))
}

/// Rank-one form for memories that store every outcome sequence:
/// ⟨j|K†_{e',m}K_{e,m}|i⟩ = λ_{e',e,m} δ_{ji}.
pub fn check_corollary_all_outcomes<X: Executor>(
    code: &StrategicCode,
    errors: &ErrorModel,
    tol: f64,
    limits: &Limits,
    exec: &X,
) -> Result<ConditionReport> {
    let composed = compose_all(code, errors, limits, exec)?;
    if !composed.injective {
        return Err(Error::Model(
            "memory update is not injective on outcome sequences; use the algebraic checker".into(),
        ));
    }
    let k = composed.code_dim;
    let blocks: Vec<&MemoryBlock> = composed.blocks.iter().collect();
    let sweeps = exec.map(blocks, |b| {
        let hats = b.branches.first().map(|br| br.kraus.clone()).unwrap_or_default();
        sweep(&composed.errors, b, &hats, k)
    });
    Ok(assemble(&composed, sweeps).report("corollary", tol))
}

/// Π E_a† E_b Π = λ_{ab} Π for square Kraus operators on the ambient space.
pub fn check_static_kl(codespace: &CodeSpace, kraus: &[CMat], tol: f64) -> Result<ConditionReport> {
    let d = codespace.ambient_dim();
    if kraus.is_empty() {
        return Err(Error::Model("empty Kraus list".into()));
    }
    if let Some(p) = kraus.iter().position(|e| e.nrows() != d || e.ncols() != d) {
        return Err(Error::Shape(format!("Kraus operator {p} is not {d}x{d}")));
    }
    let b = codespace.basis();
    let restricted: Vec<CMat> = kraus.iter().map(|e| e * b).collect();
    let errors: Vec<ErrorIndex> = (0..kraus.len()).map(|a| ErrorIndex { sequence: vec![a], env: 0 }).collect();
    let block = MemoryBlock {
        m: String::new(),
        branches: vec![Branch {
            trajectory: Trajectory { outcomes: Vec::new(), labels: Vec::new(), memory: vec![String::new()] },
            kraus: restricted.clone(),
        }],
        skipped: 0,
    };
    let composed = Composed {
        errors: errors.clone(),
        blocks: vec![block.clone()],
        code_dim: codespace.dim(),
        output_dim: d,
        trajectory_count: 1,
        injective: true,
    };
    let s = sweep(&errors, &block, &restricted, codespace.dim());
    Ok(assemble(&composed, vec![s]).report("static-kl", tol))
}
