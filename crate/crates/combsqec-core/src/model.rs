//! Strategic codes: codespace, adaptive check instruments with classical
//! memory, error models with environment legs, and the comb constructions
//! built from them.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;


use crate::combs::ChoiOperator;
use crate::error::{Error, Result};
use crate::linalg::herm_eig_mat;
use crate::tensor::{eye, kron, total_dim, CMat, LabeledOperator, Subsystem, C64};

/// Default cap on the dimension of any dense matrix side.
pub const DEFAULT_DENSE_CAP: usize = 4096;
/// Default cap on the number of enumerated outcome sequences.
pub const DEFAULT_TRAJECTORY_CAP: usize = 1_000_000;
/// Instrument completeness and error-round tolerance.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Codespace orthonormality tolerance.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub dense_cap: usize,
    pub trajectory_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { dense_cap: DEFAULT_DENSE_CAP, trajectory_cap: DEFAULT_TRAJECTORY_CAP }
    }
}

impl Limits {
    pub fn check_dense(&self, dim: usize) -> Result<()> {
        if dim > self.dense_cap {
            Err(Error::DenseCap { dim, cap: self.dense_cap })
        } else {
            Ok(())
        }
    }
}

pub fn q_label(r: usize) -> String {
    format!("Q{r}")
}

pub fn qp_label(r: usize) -> String {
    format!("Q{r}'")
}

pub fn env_label(r: usize) -> String {
    format!("E{r}")
}

/// Orthonormal basis {|i⟩} of the initial codespace, stored as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeSpace {
    basis: CMat,
}

impl CodeSpace {
    pub fn new(basis: CMat) -> Result<Self> {
        if basis.ncols() == 0 || basis.nrows() == 0 {
            return Err(Error::Model("codespace needs at least one basis vector".into()));
        }
        let k = basis.ncols();
        let r = Self::orthonormality_residual_of(&basis);
        if r > ORTHONORMAL_TOL {
            return Err(Error::Model(format!(
                "codespace basis is not orthonormal: |G - I|_F = {r:e} for {k} vectors"
            )));
        }
        Ok(CodeSpace { basis })
    }

    pub fn from_vectors(vectors: &[Vec<C64>]) -> Result<Self> {
        let k = vectors.len();
        let d = vectors.first().map(|v| v.len()).unwrap_or(0);
        if vectors.iter().any(|v| v.len() != d) {
            return Err(Error::Shape("codespace basis vectors differ in length".into()));
        }
        Self::new(CMat::from_fn(d, k, |i, j| vectors[j][i]))
    }

    pub fn orthonormality_residual_of(basis: &CMat) -> f64 {
        let k = basis.ncols();
        (basis.adjoint() * basis - eye(k)).norm()
    }

    pub fn orthonormality_residual(&self) -> f64 {
        Self::orthonormality_residual_of(&self.basis)
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn vector(&self, i: usize) -> Vec<C64> {
        self.basis.column(i).iter().copied().collect()
    }

    pub fn projector(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }
}

/// Kraus operators C_{o|m} of one check instrument, in declared outcome order.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckInstrument {
    pub outcomes: Vec<(String, CMat)>,
}

impl CheckInstrument {
    pub fn new(outcomes: Vec<(String, CMat)>) -> Result<Self> {
        let (r, c) = match outcomes.first() {
            Some((_, m)) => (m.nrows(), m.ncols()),
            None => return Err(Error::Model("instrument without outcomes".into())),
        };
        for (k, (l, m)) in outcomes.iter().enumerate() {
            if m.nrows() != r || m.ncols() != c {
                return Err(Error::Shape(format!("outcome `{l}` has a different shape")));
            }
            if outcomes[..k].iter().any(|(p, _)| p == l) {
                return Err(Error::Model(format!("duplicate outcome label `{l}`")));
            }
        }
        Ok(CheckInstrument { outcomes })
    }

    pub fn input_dim(&self) -> usize {
        self.outcomes[0].1.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.outcomes[0].1.nrows()
    }

    /// ‖Σ_o C†C − I‖_F.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.input_dim();
        let mut acc = CMat::zeros(d, d);
        for (_, c) in &self.outcomes {
            acc += c.adjoint() * c;
        }
        (acc - eye(d)).norm()
    }

    pub fn kraus(&self, outcome: usize) -> &CMat {
        &self.outcomes[outcome].1
    }
}

/// One interrogator round: instruments keyed by the incoming memory state
/// and the update table (m_prev, o) → m.
#[derive(Clone, Debug, PartialEq)]
pub struct Round {
    pub instruments: BTreeMap<String, CheckInstrument>,
    pub update: BTreeMap<(String, String), String>,
}

impl Round {
    /// Non-adaptive round whose memory stores the outcome appended to the
    /// previous memory string.
    pub fn storing(prev_states: &[String], instrument: CheckInstrument, sep: &str) -> Self {
        let mut instruments = BTreeMap::new();
        let mut update = BTreeMap::new();
        for m in prev_states {
            for (o, _) in &instrument.outcomes {
                let next = if m.is_empty() { o.clone() } else { format!("{m}{sep}{o}") };
                update.insert((m.clone(), o.clone()), next);
            }
            instruments.insert(m.clone(), instrument.clone());
        }
        Round { instruments, update }
    }
}

/// Per-round check instruments with classical memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Interrogator {
    pub initial_memory: String,
    pub rounds: Vec<Round>,
}

/// One outcome sequence with its memory trajectory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    /// Outcome index per round, into the instrument used at that round.
    pub outcomes: Vec<usize>,
    pub labels: Vec<String>,
    /// m_0 (initial), m_1, …, m_l.
    pub memory: Vec<String>,
}

impl Trajectory {
    pub fn final_memory(&self) -> &str {
        self.memory.last().map(|s| s.as_str()).unwrap_or("")
    }
}

/// Outcome sequences grouped by final memory state, in sorted state order.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectories {
    pub groups: Vec<(String, Vec<Trajectory>)>,
}

impl Trajectories {
    pub fn count(&self) -> usize {
        self.groups.iter().map(|(_, g)| g.len()).sum()
    }

    pub fn group(&self, m: &str) -> Option<&[Trajectory]> {
        self.groups.iter().find(|(k, _)| k == m).map(|(_, g)| g.as_slice())
    }

    /// True when every final memory state has exactly one outcome sequence.
    pub fn injective(&self) -> bool {
        self.groups.iter().all(|(_, g)| g.len() == 1)
    }
}

impl Interrogator {
    pub fn trivial() -> Self {
        Interrogator { initial_memory: String::new(), rounds: Vec::new() }
    }

    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Instrument used at round `r` (1-based) given memory `m`.
    pub fn instrument(&self, r: usize, m: &str) -> Result<&CheckInstrument> {
        self.rounds
            .get(r - 1)
            .and_then(|round| round.instruments.get(m))
            .ok_or_else(|| Error::Model(format!("round {r} has no instrument for memory state `{m}`")))
    }

    /// Structural checks: instruments exist for reachable memory states,
    /// update tables are total, and instruments are complete.
    pub fn validate(&self) -> Result<()> {
        let mut reachable: Vec<String> = vec![self.initial_memory.clone()];
        for (k, round) in self.rounds.iter().enumerate() {
            let r = k + 1;
            let mut next: Vec<String> = Vec::new();
            let (mut din, mut dout) = (None, None);
            for m in &reachable {
                let inst = self.instrument(r, m)?;
                let res = inst.completeness_residual();
                if res > COMPLETENESS_TOL {
                    return Err(Error::Model(format!(
                        "round {r} instrument for memory `{m}` is incomplete: |Σ C†C - I|_F = {res:e}"
                    )));
                }
                if *din.get_or_insert(inst.input_dim()) != inst.input_dim()
                    || *dout.get_or_insert(inst.output_dim()) != inst.output_dim()
                {
                    return Err(Error::Shape(format!("round {r} instruments differ in dimension")));
                }
                for (o, _) in &inst.outcomes {
                    let m2 = round.update.get(&(m.clone(), o.clone())).ok_or_else(|| {
                        Error::Model(format!("round {r} update table misses (memory `{m}`, outcome `{o}`)"))
                    })?;
                    if !next.contains(m2) {
                        next.push(m2.clone());
                    }
                }
            }
            next.sort();
            reachable = next;
        }
        Ok(())
    }

    /// (input, output) dimension of round `r` instruments.
    pub fn round_dims(&self, r: usize) -> Option<(usize, usize)> {
        let inst = self.rounds.get(r - 1)?.instruments.values().next()?;
        Some((inst.input_dim(), inst.output_dim()))
    }

    /// O_{m_l} for every reachable final memory state.
    pub fn enumerate_trajectories(&self, limits: &Limits) -> Result<Trajectories> {
        let mut groups: BTreeMap<String, Vec<Trajectory>> = BTreeMap::new();
        let mut count = 0usize;
        let mut stack = vec![Trajectory {
            outcomes: Vec::new(),
            labels: Vec::new(),
            memory: vec![self.initial_memory.clone()],
        }];
        // depth-first in declared outcome order
        while let Some(t) = stack.pop() {
            let r = t.outcomes.len() + 1;
            if r > self.rounds.len() {
                count += 1;
                if count > limits.trajectory_cap {
                    return Err(Error::TrajectoryCap { count, cap: limits.trajectory_cap });
                }
                groups.entry(t.final_memory().to_owned()).or_default().push(t);
                continue;
            }
            let m = t.final_memory().to_owned();
            let inst = self.instrument(r, &m)?;
            for (k, (o, _)) in inst.outcomes.iter().enumerate().rev() {
                let m2 = self.rounds[r - 1].update.get(&(m.clone(), o.clone())).ok_or_else(|| {
                    Error::Model(format!("round {r} update table misses (memory `{m}`, outcome `{o}`)"))
                })?;
                let mut nt = t.clone();
                nt.outcomes.push(k);
                nt.labels.push(o.clone());
                nt.memory.push(m2.clone());
                stack.push(nt);
            }
        }
        Ok(Trajectories { groups: groups.into_iter().collect() })
    }

    /// Kraus factors [C⁽¹⁾_{o_1}, …, C⁽ˡ⁾_{o_l|m_{l-1}}] of one trajectory.
    pub fn factors(&self, t: &Trajectory) -> Result<Vec<&CMat>> {
        let mut out = Vec::with_capacity(t.outcomes.len());
        for (k, &o) in t.outcomes.iter().enumerate() {
            let inst = self.instrument(k + 1, &t.memory[k])?;
            let c = inst
                .outcomes
                .get(o)
                .ok_or_else(|| Error::Model(format!("round {} has no outcome index {o}", k + 1)))?;
            out.push(&c.1);
        }
        Ok(out)
    }

    fn check_membership(&self, m: &str, t: &Trajectory) -> Result<()> {
        if t.outcomes.len() != self.rounds.len() || t.final_memory() != m {
            return Err(Error::Model(format!(
                "outcome sequence {:?} is not in O_m for final memory `{m}`",
                t.labels
            )));
        }
        let mut cur = self.initial_memory.clone();
        for (k, (o, &idx)) in t.labels.iter().zip(t.outcomes.iter()).enumerate() {
            let inst = self.instrument(k + 1, &cur)?;
            if inst.outcomes.get(idx).map(|p| &p.0) != Some(o) {
                return Err(Error::Model(format!("outcome `{o}` does not match round {}", k + 1)));
            }
            cur = self.rounds[k]
                .update
                .get(&(cur.clone(), o.clone()))
                .cloned()
                .ok_or_else(|| Error::Model("update table incomplete".into()))?;
            if cur != t.memory[k + 1] {
                return Err(Error::Model("memory trajectory is inconsistent".into()));
            }
        }
        Ok(())
    }

    /// Labeled factor list C⁽ʳ⁾: Q_{r-1}' → Q_r for o ∈ O_m.
    pub fn comb_vector(&self, m: &str, t: &Trajectory) -> Result<Vec<LabeledOperator>> {
        self.check_membership(m, t)?;
        let mut out = Vec::new();
        for (k, c) in self.factors(t)?.into_iter().enumerate() {
            let r = k + 1;
            out.push(LabeledOperator::new(
                vec![Subsystem::new(&q_label(r), c.nrows())],
                vec![Subsystem::new(&qp_label(r - 1), c.ncols())],
                c.clone(),
            )?);
        }
        Ok(out)
    }

    /// |C_{m,o}⟫ = |C⁽ˡ⁾⟫ ⊗ … ⊗ |C⁽¹⁾⟫ as a dense vector.
    pub fn comb_vector_dense(&self, m: &str, t: &Trajectory, limits: &Limits) -> Result<LabeledOperator> {
        let factors = self.comb_vector(m, t)?;
        let dim: usize = factors.iter().map(|f| f.data().len()).product();
        limits.check_dense(dim)?;
        let mut acc = LabeledOperator::scalar(C64::new(1.0, 0.0));
        for f in factors.iter().rev() {
            let v = f.vectorize()?;
            acc = if acc.rows().is_empty() {
                v.scale(acc.data()[(0, 0)])
            } else {
                acc.tensor_product(&v)?
            };
        }
        Ok(acc)
    }

    /// 𝐈_m = Σ_{o∈O_m} |C_{m,o}⟫⟪C_{m,o}|.
    pub fn interrogator_operator(&self, m: &str, limits: &Limits) -> Result<ChoiOperator> {
        if self.rounds.is_empty() {
            return Err(Error::Model("a 0-round interrogator has no comb legs".into()));
        }
        let traj = self.enumerate_trajectories(limits)?;
        let group = traj
            .group(m)
            .ok_or_else(|| Error::Model(format!("memory state `{m}` is not reachable")))?;
        let mut acc: Option<LabeledOperator> = None;
        for t in group {
            let v = self.comb_vector_dense(m, t, limits)?;
            let p = LabeledOperator::outer(&v, &v)?;
            acc = Some(match acc {
                Some(a) => a.add(&p)?,
                None => p,
            });
        }
        let op = acc.ok_or_else(|| Error::Model("empty trajectory group".into()))?;
        let l = self.rounds.len();
        let inputs = (0..l).map(qp_label).collect();
        let outputs = (1..=l).map(q_label).collect();
        ChoiOperator::new(op, inputs, outputs)
    }

    /// Σ_m 𝐈_m.
    pub fn total_operator(&self, limits: &Limits) -> Result<ChoiOperator> {
        let traj = self.enumerate_trajectories(limits)?;
        let mut acc: Option<ChoiOperator> = None;
        for (m, _) in &traj.groups {
            let c = self.interrogator_operator(m, limits)?;
            acc = Some(match acc {
                Some(a) => {
                    let c = c.reorder_like(&a)?;
                    ChoiOperator::new(a.op().add(c.op())?, a.inputs().to_vec(), a.outputs().to_vec())?
                }
                None => c,
            });
        }
        acc.ok_or_else(|| Error::Model("no trajectories".into()))
    }
}

/// One error round: Kraus operators (Q_r ⊗ E_{r-1}) → (Q_r' ⊗ E_r).
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRound {
    pub env_in: usize,
    pub env_out: usize,
    pub kraus: Vec<CMat>,
}

impl ErrorRound {
    pub fn new(env_in: usize, env_out: usize, kraus: Vec<CMat>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::Model("error round without Kraus operators".into()))?;
        let (r, c) = (first.nrows(), first.ncols());
        if env_in == 0 || env_out == 0 || r % env_out != 0 || c % env_in != 0 {
            return Err(Error::Shape("error round shape is not divisible by its environment dims".into()));
        }
        if kraus.iter().any(|k| k.nrows() != r || k.ncols() != c) {
            return Err(Error::Shape("error round Kraus operators differ in shape".into()));
        }
        Ok(ErrorRound { env_in, env_out, kraus })
    }

    /// Uncorrelated round with trivial environment.
    pub fn simple(kraus: Vec<CMat>) -> Result<Self> {
        Self::new(1, 1, kraus)
    }

    pub fn input_dim(&self) -> usize {
        self.kraus[0].ncols() / self.env_in
    }

    pub fn output_dim(&self) -> usize {
        self.kraus[0].nrows() / self.env_out
    }

    /// Largest eigenvalue of Σ E†E.
    pub fn max_weight(&self) -> f64 {
        let d = self.kraus[0].ncols();
        let mut acc = CMat::zeros(d, d);
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        herm_eig_mat(&acc).map(|e| e.eigenvalues[0]).unwrap_or(f64::INFINITY)
    }

    /// ‖Σ E†E − I‖_F.
    pub fn tp_residual(&self) -> f64 {
        let d = self.kraus[0].ncols();
        let mut acc = CMat::zeros(d, d);
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        (acc - eye(d)).norm()
    }
}

/// Error rounds 0..=l.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorModel {
    pub rounds: Vec<ErrorRound>,
}

impl ErrorModel {
    pub fn new(rounds: Vec<ErrorRound>) -> Result<Self> {
        let m = ErrorModel { rounds };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.rounds.first().ok_or_else(|| Error::Model("error model without rounds".into()))?;
        if first.env_in != 1 {
            return Err(Error::Model("round 0 error operators take no environment input".into()));
        }
        for (r, round) in self.rounds.iter().enumerate() {
            if r > 0 && round.env_in != self.rounds[r - 1].env_out {
                return Err(Error::Shape(format!("round {r} environment input does not match round {}", r - 1)));
            }
            let w = round.max_weight();
            if w > 1.0 + COMPLETENESS_TOL {
                return Err(Error::Model(format!("error round {r} is trace increasing: max eig Σ E†E = {w}")));
            }
        }
        Ok(())
    }

    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_tp(&self) -> bool {
        self.rounds.iter().all(|r| r.tp_residual() <= COMPLETENESS_TOL)
    }

    pub fn final_env_dim(&self) -> usize {
        self.rounds.last().map(|r| r.env_out).unwrap_or(1)
    }

    /// All error sequences e = (e_0, …, e_l) in lexicographic order.
    pub fn sequences(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for round in &self.rounds {
            let mut next = Vec::with_capacity(out.len() * round.kraus.len());
            for s in &out {
                for k in 0..round.kraus.len() {
                    let mut t = s.clone();
                    t.push(k);
                    next.push(t);
                }
            }
            out = next;
        }
        out
    }

    pub fn sequence_count(&self) -> usize {
        self.rounds.iter().map(|r| r.kraus.len()).product()
    }

    /// Labeled Kraus operator of round `r`: rows (Q_r', E_r), cols (Q_r[, E_{r-1}]).
    pub fn labeled_kraus(&self, r: usize, k: usize) -> Result<LabeledOperator> {
        let round = &self.rounds[r];
        let rows = vec![Subsystem::new(&qp_label(r), round.output_dim()), Subsystem::new(&env_label(r), round.env_out)];
        let mut cols = vec![Subsystem::new(&q_label(r), round.input_dim())];
        if r > 0 {
            cols.push(Subsystem::new(&env_label(r - 1), round.env_in));
        }
        LabeledOperator::new(rows, cols, round.kraus[k].clone())
    }

    /// |E_e⟫: round vectors contracted over the environment legs; the
    /// final environment leg E_l stays open.
    pub fn sequence_vector(&self, e: &[usize], limits: &Limits) -> Result<LabeledOperator> {
        let mut acc: Option<LabeledOperator> = None;
        for (r, &k) in e.iter().enumerate() {
            let v = self.labeled_kraus(r, k)?.vectorize()?;
            acc = Some(match acc {
                Some(a) => {
                    let c = vector_link(&a, &v)?;
                    limits.check_dense(c.data().nrows())?;
                    c
                }
                None => v,
            });
        }
        acc.ok_or_else(|| Error::Model("empty error sequence".into()))
    }

    /// 𝐄 = Σ_e |E_e⟫⟪E_e|.
    pub fn error_comb(&self, limits: &Limits) -> Result<ChoiOperator> {
        let mut acc: Option<LabeledOperator> = None;
        for e in self.sequences() {
            let v = self.sequence_vector(&e, limits)?;
            let p = LabeledOperator::outer(&v, &v)?;
            acc = Some(match acc {
                Some(a) => a.add(&p)?,
                None => p,
            });
        }
        let op = acc.ok_or_else(|| Error::Model("no error sequences".into()))?;
        let l = self.rounds.len();
        let inputs = (0..l).map(q_label).collect();
        let mut outputs: Vec<String> = (0..l).map(qp_label).collect();
        outputs.push(env_label(l - 1));
        ChoiOperator::new(op, inputs, outputs)
    }
}

/// Contraction of two vectors over their shared labels:
/// c[(α,β)] = Σ_x a[(α,x)] b[(x,β)]; the pure-state form of the link product.
pub fn vector_link(a: &LabeledOperator, b: &LabeledOperator) -> Result<LabeledOperator> {
    if !a.is_vector() || !b.is_vector() {
        return Err(Error::Shape("vector_link expects column vectors".into()));
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
    let b_rem: Vec<&str> = b.rows().iter().map(|s| s.label.as_str()).filter(|l| !shared.contains(l)).collect();
    let mut ao = a_rem.clone();
    ao.extend(shared.iter().copied());
    let mut bo = shared.clone();
    bo.extend(b_rem.iter().copied());
    let ap = a.reorder(&ao, &[])?;
    let bp = b.reorder(&bo, &[])?;
    let da = total_dim(&ap.rows()[..a_rem.len()]);
    let dx = total_dim(&ap.rows()[a_rem.len()..]);
    let db = total_dim(&bp.rows()[shared.len()..]);
    let am = CMat::from_fn(da, dx, |i, x| ap.data()[(i * dx + x, 0)]);
    let bm = CMat::from_fn(dx, db, |x, j| bp.data()[(x * db + j, 0)]);
    let cm = am * bm;
    let mut side: Vec<Subsystem> = ap.rows()[..a_rem.len()].to_vec();
    side.extend(bp.rows()[shared.len()..].iter().cloned());
    let flat: Vec<C64> = (0..da * db).map(|f| cm[(f / db, f % db)]).collect();
    LabeledOperator::ket(side, &flat)
}

/// A strategic code (codespace, interrogator).
#[derive(Clone, Debug, PartialEq)]
pub struct StrategicCode {
    pub codespace: CodeSpace,
    pub interrogator: Interrogator,
}

impl StrategicCode {
    pub fn new(codespace: CodeSpace, interrogator: Interrogator) -> Result<Self> {
        interrogator.validate()?;
        Ok(StrategicCode { codespace, interrogator })
    }

    pub fn rounds(&self) -> usize {
        self.interrogator.num_rounds()
    }

    /// Checks that code, instruments and error rounds chain dimensionally.
    pub fn check_compatible(&self, errors: &ErrorModel) -> Result<()> {
        let l = self.rounds();
        if errors.num_rounds() != l + 1 {
            return Err(Error::Model(format!(
                "error model has {} rounds but the interrogator needs {}",
                errors.num_rounds(),
                l + 1
            )));
        }
        if errors.rounds[0].input_dim() != self.codespace.ambient_dim() {
            return Err(Error::Shape(format!(
                "round 0: error input dim {} differs from ambient dim {}",
                errors.rounds[0].input_dim(),
                self.codespace.ambient_dim()
            )));
        }
        for r in 1..=l {
            let (din, dout) = self.interrogator.round_dims(r).ok_or_else(|| Error::Model(format!("round {r} has no instruments")))?;
            if din != errors.rounds[r - 1].output_dim() {
                return Err(Error::Shape(format!("round {r}: instrument input dim {din} differs from error output")));
            }
            if dout != errors.rounds[r].input_dim() {
                return Err(Error::Shape(format!("round {r}: instrument output dim {dout} differs from error input")));
            }
        }
        Ok(())
    }
}

/// K_{e,m,o} = E_{e_l}(C⁽ˡ⁾⊗I)E_{e_{l-1}}⋯(C⁽¹⁾⊗I)E_{e_0} applied to `input`
/// (a matrix whose rows live on Q_0); the result's rows are (Q_l', E_l).
pub fn compose_on(errors: &ErrorModel, factors: &[&CMat], e: &[usize], input: &CMat) -> Result<CMat> {
    if e.len() != factors.len() + 1 || e.len() != errors.num_rounds() {
        return Err(Error::Shape("error sequence length does not match the number of rounds".into()));
    }
    let mut cur = &errors.rounds[0].kraus[e[0]] * input;
    for (k, c) in factors.iter().enumerate() {
        let r = k + 1;
        let env = errors.rounds[r].env_in;
        if c.ncols() * env != cur.nrows() {
            return Err(Error::Shape(format!("dimension chain breaks at round {r}")));
        }
        let lifted = if env == 1 { (*c).clone() } else { kron(c, &eye(env)) };
        cur = &lifted * cur;
        let er = &errors.rounds[r].kraus[e[r]];
        if er.ncols() != cur.nrows() {
            return Err(Error::Shape(format!("dimension chain breaks at round {r}")));
        }
        cur = er * cur;
    }
    Ok(cur)
}

/// Composed Kraus operator as a labeled operator Q_0 → (Q_l', E_l).
pub fn compose_k(errors: &ErrorModel, interrogator: &Interrogator, e: &[usize], m: &str, t: &Trajectory) -> Result<LabeledOperator> {
    interrogator.check_membership(m, t)?;
    let factors = interrogator.factors(t)?;
    let d0 = errors.rounds[0].input_dim();
    let k = compose_on(errors, &factors, e, &eye(d0))?;
    let l = errors.num_rounds() - 1;
    let last = &errors.rounds[l];
    LabeledOperator::new(
        vec![Subsystem::new(&qp_label(l), last.output_dim()), Subsystem::new(&env_label(l), last.env_out)],
        vec![Subsystem::new(&q_label(0), d0)],
        k,
    )
}

/// One round of a quantum-memory interrogator: Kraus operators
/// (Q_{r-1}' ⊗ B_{r-1}) → (Q_r ⊗ B_r) keyed by outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct QmemRound {
    pub memory_in: usize,
    pub memory_out: usize,
    pub instruments: BTreeMap<String, Vec<(String, CMat)>>,
    pub update: BTreeMap<(String, String), String>,
}

/// Interrogator whose rounds also pass a quantum memory B_r.
#[derive(Clone, Debug, PartialEq)]
pub struct QmemInterrogator {
    pub initial_memory: String,
    pub b0_dim: usize,
    pub rounds: Vec<QmemRound>,
    /// Entangled codestate over (B_0, Q_0), returned as is when l = 0.
    pub codestate: Option<LabeledOperator>,
}

pub fn b_label(r: usize) -> String {
    format!("B{r}")
}

/// Comb vector of a quantum-memory interrogator for one outcome sequence
/// (labels per round): memory legs B_1..B_{l-1} contracted, B_0 and B_l open.
pub fn qmem_comb_vector(iq: &QmemInterrogator, m: &str, outcomes: &[&str]) -> Result<LabeledOperator> {
    if iq.rounds.is_empty() {
        return iq
            .codestate
            .clone()
            .ok_or_else(|| Error::Model("0-round quantum-memory interrogator needs a codestate".into()));
    }
    if outcomes.len() != iq.rounds.len() {
        return Err(Error::Model("outcome sequence length differs from the number of rounds".into()));
    }
    let mut mem = iq.initial_memory.clone();
    let mut acc: Option<LabeledOperator> = None;
    let mut expected_in = iq.b0_dim;
    for (k, round) in iq.rounds.iter().enumerate() {
        let r = k + 1;
        if round.memory_in != expected_in {
            return Err(Error::Shape(format!("round {r}: memory input dim {} differs from {}", round.memory_in, expected_in)));
        }
        let inst = round
            .instruments
            .get(&mem)
            .ok_or_else(|| Error::Model(format!("round {r} has no instrument for memory `{mem}`")))?;
        let (_, c) = inst
            .iter()
            .find(|(o, _)| o == outcomes[k])
            .ok_or_else(|| Error::Model(format!("round {r} has no outcome `{}`", outcomes[k])))?;
        let (bin, bout) = (round.memory_in, round.memory_out);
        if c.nrows() % bout != 0 || c.ncols() % bin != 0 {
            return Err(Error::Shape(format!("round {r}: Kraus shape does not factor over memory dims")));
        }
        let op = LabeledOperator::new(
            vec![Subsystem::new(&q_label(r), c.nrows() / bout), Subsystem::new(&b_label(r), bout)],
            vec![Subsystem::new(&qp_label(r - 1), c.ncols() / bin), Subsystem::new(&b_label(r - 1), bin)],
            c.clone(),
        )?;
        let v = op.vectorize()?;
        acc = Some(match acc {
            Some(a) => vector_link(&a, &v)?,
            None => v,
        });
        mem = round
            .update
            .get(&(mem.clone(), outcomes[k].to_string()))
            .cloned()
            .ok_or_else(|| Error::Model(format!("round {r} update table misses outcome `{}`", outcomes[k])))?;
        expected_in = bout;
    }
    if mem != m {
        return Err(Error::Model(format!("outcome sequence ends in memory `{mem}`, not `{m}`")));
    }
    acc.ok_or_else(|| Error::Model("empty interrogator".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combs::{link_product_op, validate_comb, CombSignature};
    use crate::linalg::min_eigenvalue;
    use crate::random::{random_channel, random_state, rng};
    use crate::tensor::{re, sys, ONE, ZERO};
    use proptest::prelude::*;

    fn instrument(ks: Vec<CMat>) -> CheckInstrument {
        CheckInstrument::new(ks.into_iter().enumerate().map(|(k, c)| (k.to_string(), c)).collect()).unwrap()
    }

    fn projective(d: usize) -> CheckInstrument {
        instrument(
            (0..d)
                .map(|k| {
                    let mut p = CMat::zeros(d, d);
                    p[(k, k)] = ONE;
                    p
                })
                .collect(),
        )
    }

    fn storing_rounds(insts: Vec<CheckInstrument>) -> Interrogator {
        let mut states = vec![String::new()];
        let mut rounds = Vec::new();
        for inst in insts {
            let round = Round::storing(&states, inst, ",");
            states = round.update.values().cloned().collect::<alloc::collections::BTreeSet<_>>().into_iter().collect();
            rounds.push(round);
        }
        Interrogator { initial_memory: String::new(), rounds }
    }

    /// Forgetful memory: every outcome maps back to the single state "".
    fn forgetful(insts: Vec<CheckInstrument>) -> Interrogator {
        let rounds = insts
            .into_iter()
            .map(|inst| {
                let update = inst.outcomes.iter().map(|(o, _)| ((String::new(), o.clone()), String::new())).collect();
                Round { instruments: [(String::new(), inst)].into_iter().collect(), update }
            })
            .collect();
        Interrogator { initial_memory: String::new(), rounds }
    }

    /// Round 2 uses `a` after outcome "0" and `b` after outcome "1".
    fn adaptive(first: CheckInstrument, a: CheckInstrument, b: CheckInstrument) -> Interrogator {
        let r1 = Round::storing(&[String::new()], first, ",");
        let mut instruments = BTreeMap::new();
        instruments.insert("0".to_owned(), a);
        instruments.insert("1".to_owned(), b);
        let mut update = BTreeMap::new();
        for (m, inst) in &instruments {
            for (o, _) in &inst.outcomes {
                update.insert((m.clone(), o.clone()), format!("{m},{o}"));
            }
        }
        Interrogator { initial_memory: String::new(), rounds: vec![r1, Round { instruments, update }] }
    }

    fn correlated_errors(seed: u64) -> ErrorModel {
        let mut r = rng(seed);
        ErrorModel::new(vec![
            ErrorRound::new(1, 2, random_channel(&mut r, 2, 4, 2)).unwrap(),
            ErrorRound::new(2, 2, random_channel(&mut r, 4, 4, 2)).unwrap(),
            ErrorRound::new(2, 1, random_channel(&mut r, 4, 2, 2)).unwrap(),
        ])
        .unwrap()
    }

    fn random_two_round(seed: u64) -> Interrogator {
        let mut r = rng(seed + 7);
        adaptive(
            instrument(random_channel(&mut r, 2, 2, 2)),
            instrument(random_channel(&mut r, 2, 2, 2)),
            instrument(random_channel(&mut r, 2, 2, 3)),
        )
    }

    #[test]
    fn deterministic_rounds_give_one_trajectory() {
        let it = forgetful(vec![instrument(vec![eye(2)]), instrument(vec![eye(2)])]);
        let t = it.enumerate_trajectories(&Limits::default()).unwrap();
        assert_eq!(t.count(), 1);
        assert_eq!(t.groups.len(), 1);
    }

    #[test]
    fn forgetful_memory_collects_full_alphabet() {
        let it = forgetful(vec![projective(2), projective(3)]);
        let t = it.enumerate_trajectories(&Limits::default()).unwrap();
        assert_eq!(t.groups.len(), 1);
        assert_eq!(t.count(), 6);
        assert!(!t.injective());
    }

    #[test]
    fn stored_eight_outcome_rounds_give_64_final_states() {
        let it = storing_rounds(vec![projective(8), projective(8)]);
        it.validate().unwrap();
        let t = it.enumerate_trajectories(&Limits::default()).unwrap();
        assert_eq!(t.count(), 8 * 8);
        assert_eq!(t.groups.len(), 64);
        assert!(t.injective());
    }

    #[test]
    fn trajectory_cap_reports_count() {
        let it = storing_rounds(vec![projective(8), projective(8)]);
        let limits = Limits { trajectory_cap: 10, ..Limits::default() };
        assert_eq!(it.enumerate_trajectories(&limits), Err(Error::TrajectoryCap { count: 11, cap: 10 }));
    }

    #[test]
    fn validate_catches_missing_update_and_incomplete_instrument() {
        let mut it = storing_rounds(vec![projective(2)]);
        it.rounds[0].update.remove(&(String::new(), "1".to_owned()));
        assert!(it.validate().is_err());
        let it = forgetful(vec![instrument(vec![eye(2).map(|z| z * 0.5)])]);
        assert!(it.validate().is_err());
    }

    #[test]
    fn single_round_comb_vector_is_the_instrument_kraus() {
        let it = storing_rounds(vec![projective(2)]);
        let t = it.enumerate_trajectories(&Limits::default()).unwrap();
        let tr = &t.group("1").unwrap()[0];
        let f = it.comb_vector("1", tr).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].data(), it.instrument(1, "").unwrap().kraus(1));
        assert!(it.comb_vector("0", tr).is_err());
    }

    #[test]
    fn dense_comb_vector_matches_tensor_oracle() {
        let it = storing_rounds(vec![projective(2), instrument(random_channel(&mut rng(40), 2, 2, 2))]);
        let t = it.enumerate_trajectories(&Limits::default()).unwrap();
        for (m, group) in &t.groups {
            for tr in group {
                let v = it.comb_vector_dense(m, tr, &Limits::default()).unwrap();
                let f = it.factors(tr).unwrap();
                let v1: Vec<C64> = (0..4).map(|x| f[0][(x / 2, x % 2)]).collect();
                let v2: Vec<C64> = (0..4).map(|x| f[1][(x / 2, x % 2)]).collect();
                for a in 0..4 {
                    for b in 0..4 {
                        assert_eq!(v.data()[(a * 4 + b, 0)], v2[a] * v1[b]);
                    }
                }
                let labels: Vec<&str> = v.rows().iter().map(|s| s.label.as_str()).collect();
                assert_eq!(labels, ["Q2", "Q1'", "Q1", "Q0'"]);
            }
        }
    }

    #[test]
    fn adaptive_round_switches_on_memory() {
        let x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let it = adaptive(projective(2), instrument(vec![eye(2)]), instrument(vec![x.clone()]));
        let t = it.enumerate_trajectories(&Limits::default()).unwrap();
        assert_eq!(t.count(), 2);
        assert_eq!(it.factors(&t.group("0,0").unwrap()[0]).unwrap()[1], &eye(2));
        assert_eq!(it.factors(&t.group("1,0").unwrap()[0]).unwrap()[1], &x);
    }

    #[test]
    fn deterministic_interrogator_operator_is_rank_one() {
        let it = forgetful(vec![instrument(vec![eye(2)])]);
        let op = it.interrogator_operator("", &Limits::default()).unwrap();
        let eig = herm_eig_mat(op.op().data()).unwrap();
        assert!((eig.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!(eig.eigenvalues[1..].iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn total_interrogator_operator_is_a_comb() {
        let it = random_two_round(41);
        let lim = Limits::default();
        for (m, _) in &it.enumerate_trajectories(&lim).unwrap().groups {
            let op = it.interrogator_operator(m, &lim).unwrap();
            assert!(min_eigenvalue(op.op().data()).unwrap() > -1e-10);
        }
        let total = it.total_operator(&lim).unwrap();
        let sig = CombSignature::new(&[("Q0'", "Q1"), ("Q1'", "Q2")]).unwrap();
        let rep = validate_comb(&total, &sig, 1e-8).unwrap();
        assert!(rep.valid, "{rep:?}");
    }

    #[test]
    fn zero_rounds_compose_to_the_error_operator() {
        let mut r = rng(42);
        let ks = random_channel(&mut r, 2, 2, 3);
        let errors = ErrorModel::new(vec![ErrorRound::simple(ks.clone()).unwrap()]).unwrap();
        let it = Interrogator::trivial();
        let t = it.enumerate_trajectories(&Limits::default()).unwrap();
        let tr = &t.groups[0].1[0];
        for (e, k) in ks.iter().enumerate() {
            assert_eq!(compose_k(&errors, &it, &[e], "", tr).unwrap().data(), k);
        }
    }

    fn dense_oracle_residual(errors: &ErrorModel, it: &Interrogator) -> f64 {
        let lim = Limits::default();
        let mut worst: f64 = 0.0;
        for (m, group) in &it.enumerate_trajectories(&lim).unwrap().groups {
            for tr in group {
                let c = it.comb_vector_dense(m, tr, &lim).unwrap();
                let cc = LabeledOperator::outer(&c, &c).unwrap();
                for e in errors.sequences() {
                    let ev = errors.sequence_vector(&e, &lim).unwrap();
                    let ee = LabeledOperator::outer(&ev, &ev).unwrap();
                    let link = link_product_op(&ee, &cc).unwrap();
                    let k = compose_k(errors, it, &e, m, tr).unwrap().vectorize().unwrap();
                    let kk = LabeledOperator::outer(&k, &k).unwrap();
                    let link = link.reorder_like(&kk).unwrap();
                    worst = worst.max((link.data() - kk.data()).norm());
                }
            }
        }
        worst
    }

    #[test]
    fn compose_k_matches_dense_link_product() {
        assert!(dense_oracle_residual(&correlated_errors(43), &random_two_round(43)) < 1e-9);
    }

    #[test]
    fn compose_k_rejects_broken_chain() {
        let errors = ErrorModel::new(vec![
            ErrorRound::simple(vec![eye(2)]).unwrap(),
            ErrorRound::simple(vec![eye(3)]).unwrap(),
        ])
        .unwrap();
        let it = forgetful(vec![instrument(vec![eye(2)])]);
        let t = it.enumerate_trajectories(&Limits::default()).unwrap();
        let tr = &t.groups[0].1[0];
        assert!(matches!(compose_k(&errors, &it, &[0, 0], "", tr), Err(Error::Shape(_))));
        let code = StrategicCode::new(CodeSpace::new(eye(2)).unwrap(), it).unwrap();
        assert!(code.check_compatible(&errors).is_err());
    }

    #[test]
    fn identity_error_comb_is_product_of_identity_chois() {
        let errors = ErrorModel::new(vec![
            ErrorRound::simple(vec![eye(2)]).unwrap(),
            ErrorRound::simple(vec![eye(2)]).unwrap(),
        ])
        .unwrap();
        let c = errors.error_comb(&Limits::default()).unwrap();
        let id = |o: &str, i: &str| {
            let k = LabeledOperator::new(sys(&[(o, 2)]), sys(&[(i, 2)]), eye(2)).unwrap().vectorize().unwrap();
            LabeledOperator::outer(&k, &k).unwrap()
        };
        let expect = id("Q0'", "Q0").tensor_product(&id("Q1'", "Q1")).unwrap();
        let got = c.op().partial_trace(&["E1"]).unwrap().reorder_like(&expect).unwrap();
        assert!((got.data() - expect.data()).norm() < 1e-12);
    }

    #[test]
    fn depolarizing_error_comb_is_half_identity() {
        let i = C64::new(0.0, 1.0);
        let paulis = [
            eye(2),
            CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            CMat::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
            CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        ];
        let ks: Vec<CMat> = paulis.iter().map(|p| p.map(|z| z * 0.5)).collect();
        let errors = ErrorModel::new(vec![ErrorRound::simple(ks.clone()).unwrap()]).unwrap();
        let c = errors.error_comb(&Limits::default()).unwrap();
        let mut oracle = CMat::zeros(4, 4);
        for k in &ks {
            let v = CMat::from_fn(4, 1, |r, _| k[(r / 2, r % 2)]);
            oracle += &v * v.adjoint();
        }
        assert!((c.op().data() - &oracle).norm() < 1e-15);
        assert!((c.op().data() - eye(4).map(|z| z * 0.5)).norm() < 1e-15);
    }

    #[test]
    fn correlated_error_comb_rank_is_bounded_by_sequences() {
        let errors = correlated_errors(44);
        let c = errors.error_comb(&Limits::default()).unwrap();
        let eig = herm_eig_mat(c.op().data()).unwrap();
        let rank = eig.eigenvalues.iter().filter(|&&l| l > 1e-10).count();
        assert!(rank <= errors.sequence_count());
        assert_eq!(errors.sequence_count(), 8);
    }

    #[test]
    fn error_model_rejections() {
        assert!(ErrorModel::new(vec![ErrorRound::simple(vec![eye(2).map(|z| z * 1.5)]).unwrap()]).is_err());
        let r0 = ErrorRound::new(1, 2, vec![CMat::zeros(4, 2)]).unwrap();
        let r1 = ErrorRound::new(3, 1, vec![CMat::zeros(2, 6)]).unwrap();
        assert!(matches!(ErrorModel::new(vec![r0, r1]), Err(Error::Shape(_))));
        assert!(ErrorRound::new(1, 3, vec![CMat::zeros(4, 2)]).is_err());
    }

    #[test]
    fn codespace_validation() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let good = CodeSpace::from_vectors(&[vec![re(h), ZERO, ZERO, re(h)]]).unwrap();
        let p = good.projector();
        assert!((&p * &p - &p).norm() < 1e-12);
        assert!(CodeSpace::from_vectors(&[vec![ONE, ZERO], vec![ONE, ZERO]]).is_err());
        assert!(CheckInstrument::new(vec![("a".into(), eye(2)), ("a".into(), eye(2))]).is_err());
    }

    fn trivial_qmem_round(c: CMat, bin: usize, bout: usize, mem: &str) -> QmemRound {
        QmemRound {
            memory_in: bin,
            memory_out: bout,
            instruments: [(mem.to_owned(), vec![("o".to_owned(), c)])].into_iter().collect(),
            update: [((mem.to_owned(), "o".to_owned()), mem.to_owned())].into_iter().collect(),
        }
    }

    #[test]
    fn qmem_with_unit_memory_reduces_to_classical_vector() {
        let mut r = rng(45);
        let c1 = random_channel(&mut r, 2, 2, 1).remove(0);
        let c2 = random_channel(&mut r, 2, 2, 1).remove(0);
        let iq = QmemInterrogator {
            initial_memory: String::new(),
            b0_dim: 1,
            rounds: vec![trivial_qmem_round(c1.clone(), 1, 1, ""), trivial_qmem_round(c2.clone(), 1, 1, "")],
            codestate: None,
        };
        let q = qmem_comb_vector(&iq, "", &["o", "o"]).unwrap();
        let it = forgetful(vec![instrument(vec![c1]), instrument(vec![c2])]);
        let t = it.enumerate_trajectories(&Limits::default()).unwrap();
        let v = it.comb_vector_dense("", &t.groups[0].1[0], &Limits::default()).unwrap();
        let q = q.reorder(&["B0", "B2", "Q2", "Q1'", "Q1", "Q0'"], &[]).unwrap();
        assert!((q.data() - v.data()).norm() < 1e-14);
    }

    #[test]
    fn qmem_zero_rounds_returns_codestate() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let state = LabeledOperator::ket(sys(&[("B0", 2), ("Q0", 2)]), &[re(h), ZERO, ZERO, re(h)]).unwrap();
        let iq = QmemInterrogator { initial_memory: String::new(), b0_dim: 2, rounds: vec![], codestate: Some(state.clone()) };
        assert_eq!(qmem_comb_vector(&iq, "", &[]).unwrap(), state);
    }

    #[test]
    fn qmem_norm_matches_composed_map() {
        let mut r = rng(46);
        let c1 = random_channel(&mut r, 4, 4, 1).remove(0);
        let c2 = random_channel(&mut r, 4, 4, 1).remove(0);
        let iq = QmemInterrogator {
            initial_memory: String::new(),
            b0_dim: 2,
            rounds: vec![trivial_qmem_round(c1.clone(), 2, 2, ""), trivial_qmem_round(c2.clone(), 2, 2, "")],
            codestate: None,
        };
        let v = qmem_comb_vector(&iq, "", &["o", "o"]).unwrap();
        // M: (Q0', B0, Q1') → (Q1, Q2, B2)
        let mut m = CMat::zeros(8, 8);
        for q1 in 0..2 {
            for q2 in 0..2 {
                for b2 in 0..2 {
                    for q0 in 0..2 {
                        for b0 in 0..2 {
                            for q1p in 0..2 {
                                let mut s = ZERO;
                                for b1 in 0..2 {
                                    s += c2[(q2 * 2 + b2, q1p * 2 + b1)] * c1[(q1 * 2 + b1, q0 * 2 + b0)];
                                }
                                m[((q1 * 2 + q2) * 2 + b2, (q0 * 2 + b0) * 2 + q1p)] = s;
                            }
                        }
                    }
                }
            }
        }
        let oracle = (&m * m.adjoint()).trace().re;
        assert!((v.norm_fro().powi(2) - oracle).abs() < 1e-10 * oracle);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn total_probability_is_one(seed in 0u64..1000) {
            let errors = correlated_errors(seed);
            let it = random_two_round(seed);
            let lim = Limits::default();
            let psi = CMat::from_column_slice(2, 1, &random_state(&mut rng(seed + 99), 2));
            let mut total = 0.0;
            for (_, group) in &it.enumerate_trajectories(&lim).unwrap().groups {
                for tr in group {
                    let f = it.factors(tr).unwrap();
                    for e in errors.sequences() {
                        total += compose_on(&errors, &f, &e, &psi).unwrap().norm_squared();
                    }
                }
            }
            prop_assert!((total - 1.0).abs() < 1e-8);
        }

        #[test]
        fn trajectories_partition_the_alphabet(seed in 0u64..1000) {
            let it = random_two_round(seed);
            let t = it.enumerate_trajectories(&Limits::default()).unwrap();
            let mut seen: Vec<Vec<String>> = Vec::new();
            for (m, group) in &t.groups {
                for tr in group {
                    prop_assert_eq!(tr.final_memory(), m.as_str());
                    prop_assert!(!seen.contains(&tr.labels));
                    seen.push(tr.labels.clone());
                }
            }
            prop_assert_eq!(seen.len(), 2 + 3);
        }

        #[test]
        fn compose_k_equals_dense_oracle(seed in 0u64..1000) {
            prop_assert!(dense_oracle_residual(&correlated_errors(seed), &random_two_round(seed)) < 1e-9);
        }
    }
}
