//! Choi operators, the link product and causality checks for combs.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{herm_eig_mat, min_eigenvalue};
use crate::tensor::{total_dim, CMat, LabeledOperator, Subsystem};

/// Relative PSD tolerance: eigenvalues ≥ −PSD_TOL·max(1, ‖C‖_F).
pub const PSD_TOL: f64 = 1e-9;
/// Absolute trace-preservation tolerance on ‖Tr_out C − I_in‖_F.
pub const TP_TOL: f64 = 1e-9;
/// Eigenvalues above this become Kraus operators.
pub const KRAUS_CUTOFF: f64 = 1e-10;

/// A square labeled operator with its subsystems split into input and
/// output legs.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiOperator {
    op: LabeledOperator,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

fn check_partition(op: &LabeledOperator, inputs: &[String], outputs: &[String]) -> Result<()> {
    if !op.is_square_labeled() {
        return Err(Error::Shape("Choi operator must carry identical row and column subsystems".into()));
    }
    for s in op.rows() {
        let i = inputs.contains(&s.label);
        let o = outputs.contains(&s.label);
        if i == o {
            return Err(Error::Model(format!("label `{}` must be exactly one of input or output", s.label)));
        }
    }
    for l in inputs.iter().chain(outputs.iter()) {
        if op.dim_of(l).is_none() {
            return Err(Error::UnknownLabel(l.clone()));
        }
    }
    Ok(())
}

impl ChoiOperator {
    /// Checked constructor: validates the leg partition and positivity.
    pub fn new(op: LabeledOperator, inputs: Vec<String>, outputs: Vec<String>) -> Result<Self> {
        check_partition(&op, &inputs, &outputs)?;
        let min = min_eigenvalue(op.data())?;
        if min < -PSD_TOL * op.norm_fro().max(1.0) {
            return Err(Error::NotPsd(min));
        }
        Ok(ChoiOperator { op, inputs, outputs })
    }

    /// Constructor that skips the positivity check (used for intermediate
    /// iterates and deliberately broken test inputs).
    pub fn new_unchecked(op: LabeledOperator, inputs: Vec<String>, outputs: Vec<String>) -> Result<Self> {
        check_partition(&op, &inputs, &outputs)?;
        Ok(ChoiOperator { op, inputs, outputs })
    }

    pub fn op(&self) -> &LabeledOperator {
        &self.op
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        self.op.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.iter().map(|l| self.op.dim_of(l).unwrap_or(1)).product()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.iter().map(|l| self.op.dim_of(l).unwrap_or(1)).product()
    }

    /// Reorders subsystems to the given label order (same on both sides).
    pub fn reorder(&self, labels: &[&str]) -> Result<Self> {
        Ok(ChoiOperator {
            op: self.op.reorder(labels, labels)?,
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
        })
    }

    /// Reorders so that the subsystem order equals `like`'s.
    pub fn reorder_like(&self, like: &ChoiOperator) -> Result<Self> {
        Ok(ChoiOperator { op: self.op.reorder_like(&like.op)?, inputs: self.inputs.clone(), outputs: self.outputs.clone() })
    }

    /// Output legs first, then input legs, each in their declared order.
    pub fn canonical(&self) -> Result<Self> {
        let mut order: Vec<&str> = self.outputs.iter().map(|s| s.as_str()).collect();
        order.extend(self.inputs.iter().map(|s| s.as_str()));
        self.reorder(&order)
    }
}

/// Σ_k |K_k⟫⟪K_k|. Outputs are the row labels of the Kraus operators.
pub fn choi_from_kraus(kraus: &[LabeledOperator]) -> Result<ChoiOperator> {
    let first = kraus.first().ok_or_else(|| Error::Model("empty Kraus list".into()))?;
    let mut acc: Option<CMat> = None;
    let mut side = Vec::new();
    for k in kraus {
        if k.rows() != first.rows() || k.cols() != first.cols() {
            return Err(Error::Shape("Kraus operators carry different subsystem signatures".into()));
        }
        let v = k.vectorize()?;
        side = v.rows().to_vec();
        let p = v.data() * v.data().adjoint();
        acc = Some(match acc {
            Some(a) => a + p,
            None => p,
        });
    }
    let op = LabeledOperator::new(side.clone(), side, acc.expect("nonempty"))?;
    let outputs = first.rows().iter().map(|s| s.label.clone()).collect();
    let inputs = first.cols().iter().map(|s| s.label.clone()).collect();
    Ok(ChoiOperator { op, inputs, outputs })
}

/// Canonical Kraus operators from the eigendecomposition of a Choi operator.
pub fn kraus_from_choi(c: &ChoiOperator) -> Result<Vec<LabeledOperator>> {
    let canon = c.canonical()?;
    let eig = herm_eig_mat(canon.op.data())?;
    let min = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if min < -PSD_TOL * canon.op.norm_fro().max(1.0) {
        return Err(Error::NotPsd(min));
    }
    let no = c.outputs.len();
    let out_side: Vec<Subsystem> = canon.op.rows()[..no].to_vec();
    let in_side: Vec<Subsystem> = canon.op.rows()[no..].to_vec();
    let mut out = Vec::new();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= KRAUS_CUTOFF {
            continue;
        }
        let col: Vec<_> = eig.eigenvectors.column(k).iter().map(|z| z * l.sqrt()).collect();
        let v = LabeledOperator::ket(canon.op.rows().to_vec(), &col)?;
        out.push(v.devectorize(out_side.clone(), in_side.clone())?);
    }
    Ok(out)
}

/// Link product A∗B = Tr_C((A^{⊤_C}⊗I_B)(I_A⊗B)) over the shared labels C,
/// evaluated by index contraction. Result subsystems: A's unshared labels,
/// then B's.
pub fn link_product_op(a: &LabeledOperator, b: &LabeledOperator) -> Result<LabeledOperator> {
    if !a.is_square_labeled() || !b.is_square_labeled() {
        return Err(Error::Shape("link product needs square labeled operands".into()));
    }
    let mut shared: Vec<&str> = Vec::new();
    let mut a_rem: Vec<&str> = Vec::new();
    for s in a.rows() {
        match b.dim_of(&s.label) {
            Some(d) if d == s.dim => shared.push(&s.label),
            Some(_) => return Err(Error::LabelMismatch(s.label.clone())),
            None => a_rem.push(&s.label),
        }
    }
    let b_rem: Vec<&str> = b
        .rows()
        .iter()
        .map(|s| s.label.as_str())
        .filter(|l| !shared.contains(l))
        .collect();

    let mut a_order = a_rem.clone();
    a_order.extend(shared.iter().copied());
    let mut b_order = shared.clone();
    b_order.extend(b_rem.iter().copied());
    let ap = a.reorder(&a_order, &a_order)?;
    let bp = b.reorder(&b_order, &b_order)?;

    let da = total_dim(&ap.rows()[..a_rem.len()]);
    let dc = total_dim(&ap.rows()[a_rem.len()..]);
    let db = total_dim(&bp.rows()[shared.len()..]);
    let (ad, bd) = (ap.data(), bp.data());

    // Ã[(a,a'),(x,y)] = A[(a,x),(a',y)],  B̃[(x,y),(b,b')] = B[(x,b),(y,b')]
    let at = CMat::from_fn(da * da, dc * dc, |r, c| {
        let (i, ip) = (r / da, r % da);
        let (x, y) = (c / dc, c % dc);
        ad[(i * dc + x, ip * dc + y)]
    });
    let bt = CMat::from_fn(dc * dc, db * db, |r, c| {
        let (x, y) = (r / dc, r % dc);
        let (j, jp) = (c / db, c % db);
        bd[(x * db + j, y * db + jp)]
    });
    let rt = at * bt;
    let data = CMat::from_fn(da * db, da * db, |r, c| {
        let (i, j) = (r / db, r % db);
        let (ip, jp) = (c / db, c % db);
        rt[(i * da + ip, j * db + jp)]
    });
    let mut side: Vec<Subsystem> = ap.rows()[..a_rem.len()].to_vec();
    side.extend(bp.rows()[shared.len()..].iter().cloned());
    LabeledOperator::new(side.clone(), side, data)
}

/// Link product of Choi operators; legs of the result are the unshared legs.
pub fn link_product(a: &ChoiOperator, b: &ChoiOperator) -> Result<ChoiOperator> {
    let op = link_product_op(&a.op, &b.op)?;
    let keep = |l: &String| op.dim_of(l).is_some();
    let mut inputs: Vec<String> = a.inputs.iter().filter(|l| keep(l)).cloned().collect();
    inputs.extend(b.inputs.iter().filter(|l| keep(l)).cloned());
    let mut outputs: Vec<String> = a.outputs.iter().filter(|l| keep(l)).cloned().collect();
    outputs.extend(b.outputs.iter().filter(|l| keep(l)).cloned());
    Ok(ChoiOperator { op, inputs, outputs })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CptpReport {
    pub cp: bool,
    pub tp: bool,
    pub min_eigenvalue: f64,
    pub tp_residual: f64,
    /// max(negativity beyond zero, tp residual)
    pub residual: f64,
}

/// Trace over the output legs, reordered to the input-leg order.
pub fn trace_outputs(c: &ChoiOperator) -> Result<LabeledOperator> {
    let outs: Vec<&str> = c.outputs.iter().map(|s| s.as_str()).collect();
    let ins: Vec<&str> = c.inputs.iter().map(|s| s.as_str()).collect();
    c.op.partial_trace(&outs)?.reorder(&ins, &ins)
}

pub fn is_cptp(c: &ChoiOperator) -> Result<CptpReport> {
    let min = min_eigenvalue(c.op.data())?;
    let cp = min >= -PSD_TOL * c.op.norm_fro().max(1.0);
    let t = trace_outputs(c)?;
    let d = t.data().nrows();
    let tp_residual = (t.data() - CMat::identity(d, d)).norm();
    Ok(CptpReport {
        cp,
        tp: tp_residual <= TP_TOL,
        min_eigenvalue: min,
        tp_residual,
        residual: (-min).max(0.0).max(tp_residual),
    })
}

/// Causal order of a comb as (input leg, output leg) pairs, earliest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombSignature {
    pub rounds: Vec<(String, String)>,
}

impl CombSignature {
    pub fn new(rounds: &[(&str, &str)]) -> Result<Self> {
        if rounds.is_empty() {
            return Err(Error::Model("comb signature needs at least one round".into()));
        }
        let mut seen: Vec<&str> = Vec::new();
        for (i, o) in rounds {
            for l in [i, o] {
                if seen.contains(l) {
                    return Err(Error::DuplicateLabel((*l).to_owned()));
                }
                seen.push(l);
            }
        }
        Ok(CombSignature { rounds: rounds.iter().map(|(i, o)| ((*i).to_owned(), (*o).to_owned())).collect() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombReport {
    pub valid: bool,
    /// Residual norm per level, index 0 = first round.
    pub residuals: Vec<f64>,
    /// 1-based round of the first violated level scanning from the last round.
    pub violated_round: Option<usize>,
}

/// Checks Tr_{out_n} Q⁽ⁿ⁾ = I_{in_n} ⊗ Q⁽ⁿ⁻¹⁾ for n = N..1 with Q⁽⁰⁾ = 1.
pub fn validate_comb(q: &ChoiOperator, sig: &CombSignature, tol: f64) -> Result<CombReport> {
    let mut labels_seen = 0;
    for (i, o) in &sig.rounds {
        for l in [i, o] {
            if q.op.dim_of(l).is_none() {
                return Err(Error::UnknownLabel(l.clone()));
            }
            labels_seen += 1;
        }
    }
    if labels_seen != q.op.rows().len() {
        return Err(Error::Shape("comb signature does not cover every subsystem".into()));
    }
    let n = sig.rounds.len();
    let mut residuals = alloc::vec![0.0; n];
    let mut violated = None;
    let mut cur = q.op.clone();
    for lvl in (0..n).rev() {
        let (inp, out) = (&sig.rounds[lvl].0, &sig.rounds[lvl].1);
        let t = cur.partial_trace(&[out.as_str()])?;
        let din = t.dim_of(inp).unwrap_or(1);
        let lower = t.partial_trace(&[inp.as_str()])?.scale(crate::tensor::re(1.0 / din as f64));
        let id = LabeledOperator::identity(alloc::vec![Subsystem::new(inp, din)])?;
        let expect = if lower.rows().is_empty() {
            id.scale(lower.data()[(0, 0)])
        } else {
            id.tensor_product(&lower)?
        };
        let mut r = t.sub(&expect)?.norm_fro();
        if lvl == 0 {
            r = r.max((lower.data()[(0, 0)] - crate::tensor::re(1.0)).norm() * (din as f64).sqrt());
        }
        residuals[lvl] = r;
        if r > tol && violated.is_none() {
            violated = Some(lvl + 1);
        }
        cur = lower;
    }
    Ok(CombReport { valid: violated.is_none(), residuals, violated_round: violated })
}
