//! Joint reference/register states and the mutual-information checker.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{compose_all, Composed, ConditionReport, EntropyRow, ErrorIndex, Verdict, P_FLOOR};
use crate::error::Result;
use crate::exec::{try_map, Executor};
use crate::linalg::entropy_mat;
use crate::model::{ErrorModel, Limits, StrategicCode};
use crate::tensor::{sys, CMat, LabeledOperator};

/// Joint state of one final memory state over registers R, M, E.
#[derive(Clone, Debug, PartialEq)]
pub struct JointBlock {
    pub m: String,
    /// P_M(m) = Tr ρ_m / k.
    pub probability: f64,
    pub outcomes: Vec<Vec<String>>,
    /// Normalized ρ̃^{RME}; absent when the probability is at or below the floor.
    pub rho: Option<LabeledOperator>,
    pub rho_r: Option<LabeledOperator>,
    pub rho_me: Option<LabeledOperator>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    pub errors: Vec<ErrorIndex>,
    pub code_dim: usize,
    pub blocks: Vec<JointBlock>,
    pub total_probability: f64,
    pub notes: Vec<String>,
}

impl JointState {
    pub fn block(&self, m: &str) -> Option<&JointBlock> {
        self.blocks.iter().find(|b| b.m == m)
    }
}

/// ρ^{RME}[(i,o,ê),(j,o',ê')] = ⟨j|K†_{ê',o'}K_{ê,o}|i⟩ from the matrix
/// elements, without a dense code register.
pub fn joint_state_from<X: Executor>(composed: &Composed, limits: &Limits, exec: &X) -> Result<JointState> {
    let (n, k, d) = (composed.errors.len(), composed.code_dim, composed.output_dim);
    let blocks: Vec<_> = composed.blocks.iter().collect();
    let out = try_map(exec, blocks, |block| -> Result<JointBlock> {
        let no = block.branches.len();
        let outcomes = block.branches.iter().map(|b| b.trajectory.labels.clone()).collect();
        let empty = JointBlock {
            m: block.m.clone(),
            probability: 0.0,
            outcomes,
            rho: None,
            rho_r: None,
            rho_me: None,
        };
        if no == 0 {
            return Ok(empty);
        }
        let dim = k * no * n;
        limits.check_dense(dim)?;
        // columns (o, ê, i)
        let mut w = CMat::zeros(d, dim);
        for (o, branch) in block.branches.iter().enumerate() {
            for (e, kk) in branch.kraus.iter().enumerate() {
                for i in 0..k {
                    w.column_mut((o * n + e) * k + i).copy_from(&kk.column(i));
                }
            }
        }
        let gram = w.adjoint() * &w;
        let rho = CMat::from_fn(dim, dim, |r, c| {
            let (i, oe) = (r / (no * n), r % (no * n));
            let (j, oe2) = (c / (no * n), c % (no * n));
            gram[(oe2 * k + j, oe * k + i)]
        });
        let tr = rho.trace().re;
        let probability = tr / k as f64;
        if probability <= P_FLOOR {
            return Ok(JointBlock { probability, ..empty });
        }
        let side = sys(&[("R", k), ("M", no), ("E", n)]);
        let rho = LabeledOperator::new(side.clone(), side, rho.map(|z| z / tr))?;
        let rho_r = rho.partial_trace(&["M", "E"])?;
        let rho_me = rho.partial_trace(&["R"])?;
        Ok(JointBlock { probability, rho: Some(rho), rho_r: Some(rho_r), rho_me: Some(rho_me), ..empty })
    })?;
    let total_probability = out.iter().map(|b| b.probability).sum();
    Ok(JointState {
        errors: composed.errors.clone(),
        code_dim: k,
        blocks: out,
        total_probability,
        notes: composed.notes(),
    })
}

pub fn joint_state<X: Executor>(code: &StrategicCode, errors: &ErrorModel, limits: &Limits, exec: &X) -> Result<JointState> {
    joint_state_from(&compose_all(code, errors, limits, exec)?, limits, exec)
}

/// Correctable when, for every final memory state with P > floor, the
/// reference is uncorrelated with M E and maximally mixed, both to within
/// `tol` bits.
pub fn check_info_from<X: Executor>(js: &JointState, tol: f64, exec: &X) -> Result<ConditionReport> {
    let k = js.code_dim;
    let log_k = (k as f64).log2();
    let live: Vec<&JointBlock> = js.blocks.iter().filter(|b| b.rho.is_some()).collect();
    let rows = try_map(exec, live, |b| -> Result<EntropyRow> {
        let s_rme = entropy_mat(b.rho.as_ref().expect("live block").data())?;
        let s_r = entropy_mat(b.rho_r.as_ref().expect("live block").data())?;
        let s_me = entropy_mat(b.rho_me.as_ref().expect("live block").data())?;
        Ok(EntropyRow {
            m: b.m.clone(),
            probability: b.probability,
            s_r,
            s_me,
            s_rme,
            mutual_information: s_r + s_me - s_rme,
            reference_deficit: log_k - s_r,
        })
    })?;
    let mut worst: f64 = 0.0;
    let mut notes = js.notes.clone();
    for r in &rows {
        worst = worst.max(r.mutual_information).max(r.reference_deficit);
        if r.mutual_information < -1e-9 {
            notes.push(format!("negative mutual information {:e} at memory `{}`", r.mutual_information, r.m));
        }
    }
    let floored = js.blocks.len() - rows.len();
    if floored > 0 {
        notes.push(format!("{floored} final memory states have probability at or below {P_FLOOR:e}"));
    }
    Ok(ConditionReport {
        method: "info".into(),
        verdict: Verdict::from_bool(worst <= tol),
        worst_residual: worst,
        tolerance: tol,
        scale: 1.0,
        witness: None,
        lambda: Vec::new(),
        entropy: rows,
        errors: js.errors.clone(),
        notes,
    })
}

pub fn check_info<X: Executor>(
    code: &StrategicCode,
    errors: &ErrorModel,
    tol: f64,
    limits: &Limits,
    exec: &X,
) -> Result<ConditionReport> {
    check_info_from(&joint_state(code, errors, limits, exec)?, tol, exec)
}
