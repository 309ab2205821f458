//! Entanglement fidelity of a factored comb and see-saw ascent over its
//! encoder, check-instrument and decoder Choi factors.
//!
//! Choi factors are stored as plain matrices ordered (output, input), so
//! `J[(o,i),(o',i')] = ⟨o|Φ(|i⟩⟨i'|)|o'⟩` and `J = Σ_k |K_k⟫⟪K_k|`.
//! Propagated states and effects carry an extra reference register R ≅ L
//! as their last tensor factor.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::combs::ChoiOperator;
use crate::error::{Error, Result};
use crate::linalg::{herm_eig_mat, op_norm, psd_part};
use crate::model::{ErrorModel, StrategicCode};
use crate::random::{ginibre, rng, SeededRng};
use crate::tensor::{kron, CMat, LabeledOperator, C64, ZERO};

pub const PROJECTION_TOL: f64 = 1e-9;
pub const PROJECTION_SWEEPS: usize = 500;
pub const DEFAULT_TOL_CONV: f64 = 1e-7;
pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_PERTURBATION: f64 = 1e-2;
pub const DEFAULT_INNER_STEPS: usize = 50;
/// Choi eigenvalues at or below this are dropped when extracting Kraus operators.
const KRAUS_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Factor {
    Encoder,
    /// Check instrument of round r ≥ 1.
    Round(usize),
    Decoder,
}

impl Factor {
    pub fn name(self) -> String {
        match self {
            Factor::Encoder => "encoder".into(),
            Factor::Round(r) => format!("round{r}"),
            Factor::Decoder => "decoder".into(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "encoder" => Some(Factor::Encoder),
            "decoder" => Some(Factor::Decoder),
            _ => s.strip_prefix("round")?.parse().ok().filter(|r| *r > 0).map(Factor::Round),
        }
    }
}

/// Decoder, rounds l..1, encoder.
pub fn default_order(rounds: usize) -> Vec<Factor> {
    let mut v = vec![Factor::Decoder];
    v.extend((1..=rounds).rev().map(Factor::Round));
    v.push(Factor::Encoder);
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptConfig {
    pub tol_conv: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub perturbation: f64,
    /// Projected-ascent steps per coordinate update.
    pub inner_steps: usize,
    /// Coordinate order within one iteration; `None` uses [`default_order`].
    pub order: Option<Vec<Factor>>,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            tol_conv: DEFAULT_TOL_CONV,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
            perturbation: DEFAULT_PERTURBATION,
            inner_steps: DEFAULT_INNER_STEPS,
            order: None,
        }
    }
}

/// Leg dimensions: L, Q_r, Q_r' and E_r for r = 0..=l.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dims {
    pub logical: usize,
    pub q_in: Vec<usize>,
    pub q_out: Vec<usize>,
    pub env: Vec<usize>,
}

impl Dims {
    pub fn from_errors(errors: &ErrorModel, logical: usize) -> Result<Self> {
        errors.validate()?;
        if logical == 0 {
            return Err(Error::Shape("logical dimension must be positive".into()));
        }
        Ok(Dims {
            logical,
            q_in: errors.rounds.iter().map(|r| r.input_dim()).collect(),
            q_out: errors.rounds.iter().map(|r| r.output_dim()).collect(),
            env: errors.rounds.iter().map(|r| r.env_out).collect(),
        })
    }

    pub fn rounds(&self) -> usize {
        self.q_in.len() - 1
    }

    /// Dimension of E_{r-1}, with E_{-1} trivial.
    fn env_before(&self, r: usize) -> usize {
        if r == 0 {
            1
        } else {
            self.env[r - 1]
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub factor: String,
    pub fidelity: f64,
    pub feasibility: f64,
}

impl TraceRecord {
    /// `iteration factor F` with F to 12 decimals.
    pub fn line(&self) -> String {
        format!("{} {} {:.12}", self.iteration, self.factor, self.fidelity)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationState {
    pub dims: Dims,
    /// Memory labels per level r = 0..=l; level 0 has a single entry.
    pub memory: Vec<Vec<String>>,
    /// Choi on (Q_0, L).
    pub encoder: CMat,
    /// `instruments[r-1][a][b]`: Choi of C⁽ʳ⁾_{b|a} on (Q_r, Q_{r-1}').
    pub instruments: Vec<Vec<Vec<CMat>>>,
    /// Choi of 𝐃_m on (L', Q_l'), one per final memory value.
    pub decoders: Vec<CMat>,
    pub trace: Vec<TraceRecord>,
    pub config: OptConfig,
    pub converged: bool,
    pub iterations: usize,
    pub events: Vec<String>,
}

fn memory_labels(sizes: &[usize]) -> Vec<Vec<String>> {
    let mut v = vec![vec!["0".to_string()]];
    v.extend(sizes.iter().map(|&n| (0..n).map(|k| k.to_string()).collect()));
    v
}

fn vec_choi(k: &CMat) -> CMat {
    let v = CMat::from_fn(k.nrows() * k.ncols(), 1, |f, _| k[(f / k.ncols(), f % k.ncols())]);
    &v * v.adjoint()
}

fn embedding(d_out: usize, d_in: usize) -> CMat {
    CMat::from_fn(d_out, d_in, |o, i| if o == i { C64::new(1.0, 0.0) } else { ZERO })
}

fn perturb(x: &CMat, eps: f64, r: &mut SeededRng) -> CMat {
    if eps == 0.0 {
        return x.clone();
    }
    let g = ginibre(r, x.nrows(), x.nrows());
    let p = &g * g.adjoint();
    let n = p.norm();
    x + p.map(|z| z * (eps / n))
}

impl OptimizationState {
    /// Identity embeddings split evenly over memory values, plus a seeded
    /// PSD perturbation of relative size `config.perturbation`, re-projected.
    pub fn initial(errors: &ErrorModel, logical: usize, memory: &[usize], config: &OptConfig) -> Result<Self> {
        let dims = Dims::from_errors(errors, logical)?;
        let l = dims.rounds();
        if memory.len() != l {
            return Err(Error::Shape(format!("memory structure has {} levels but the model has {l} rounds", memory.len())));
        }
        if memory.contains(&0) {
            return Err(Error::Shape("every round needs at least one memory value".into()));
        }
        let mut r = rng(config.seed);
        let encoder = project_cptp_mat(&perturb(&vec_choi(&embedding(dims.q_in[0], logical)), config.perturbation, &mut r), dims.q_in[0], logical)?;
        let mut instruments = Vec::with_capacity(l);
        let mut prev = 1;
        for round in 1..=l {
            let (din, dout, n) = (dims.q_out[round - 1], dims.q_in[round], memory[round - 1]);
            let base = vec_choi(&embedding(dout, din)).map(|z| z / n as f64);
            let mut groups = Vec::with_capacity(prev);
            for _ in 0..prev {
                let blocks: Vec<CMat> = (0..n).map(|_| perturb(&base, config.perturbation, &mut r)).collect();
                groups.push(project_cptp_blocks(&blocks, dout, din)?);
            }
            instruments.push(groups);
            prev = n;
        }
        let dl = dims.q_out[l];
        let base = vec_choi(&embedding(logical, dl));
        let decoders =
            (0..prev).map(|_| project_cptp_mat(&perturb(&base, config.perturbation, &mut r), logical, dl)).collect::<Result<_>>()?;
        Ok(OptimizationState {
            dims,
            memory: memory_labels(memory),
            encoder,
            instruments,
            decoders,
            trace: Vec::new(),
            config: config.clone(),
            converged: false,
            iterations: 0,
            events: Vec::new(),
        })
    }

    /// Encoder and instruments taken from a strategic code, memory values
    /// from its reachable memory states; decoders start as in [`Self::initial`].
    pub fn from_code(code: &StrategicCode, errors: &ErrorModel, config: &OptConfig) -> Result<Self> {
        code.check_compatible(errors)?;
        let k = code.codespace.dim();
        let l = code.rounds();
        let sizes = vec![1; l];
        let mut state = Self::initial(errors, k, &sizes, config)?;
        state.encoder = vec_choi(code.codespace.basis());
        let mut levels = vec![vec![code.interrogator.initial_memory.clone()]];
        let mut instruments = Vec::with_capacity(l);
        for r in 1..=l {
            let round = &code.interrogator.rounds[r - 1];
            let prev = &levels[r - 1];
            let mut next = BTreeSet::new();
            for a in prev {
                let inst = code.interrogator.instrument(r, a)?;
                for (o, _) in &inst.outcomes {
                    let b = round.update.get(&(a.clone(), o.clone())).ok_or_else(|| Error::Model(format!("round {r}: no update for ({a}, {o})")))?;
                    next.insert(b.clone());
                }
            }
            let next: Vec<String> = next.into_iter().collect();
            let (din, dout) = (state.dims.q_out[r - 1], state.dims.q_in[r]);
            let mut groups = Vec::with_capacity(prev.len());
            for a in prev {
                let inst = code.interrogator.instrument(r, a)?;
                let mut blocks = vec![CMat::zeros(dout * din, dout * din); next.len()];
                for (o, c) in &inst.outcomes {
                    let b = &round.update[&(a.clone(), o.clone())];
                    let idx = next.iter().position(|x| x == b).expect("collected above");
                    blocks[idx] += vec_choi(c);
                }
                groups.push(blocks);
            }
            instruments.push(groups);
            levels.push(next);
        }
        state.instruments = instruments;
        let finals = levels[l].len();
        let mut r = rng(config.seed ^ 0x5eed);
        let dl = state.dims.q_out[l];
        let base = vec_choi(&embedding(k, dl));
        state.decoders =
            (0..finals).map(|_| project_cptp_mat(&perturb(&base, config.perturbation, &mut r), k, dl)).collect::<Result<_>>()?;
        state.memory = levels;
        Ok(state)
    }

    pub fn rounds(&self) -> usize {
        self.dims.rounds()
    }

    /// Largest PSD or trace-constraint violation over all factors.
    pub fn feasibility_residual(&self) -> Result<f64> {
        let mut worst = group_residual(core::slice::from_ref(&self.encoder), self.dims.q_in[0], self.dims.logical)?;
        for (r, groups) in self.instruments.iter().enumerate() {
            for g in groups {
                worst = worst.max(group_residual(g, self.dims.q_in[r + 1], self.dims.q_out[r])?);
            }
        }
        let dl = self.dims.q_out[self.rounds()];
        for d in &self.decoders {
            worst = worst.max(group_residual(core::slice::from_ref(d), self.dims.logical, dl)?);
        }
        Ok(worst)
    }

    pub fn trace_lines(&self) -> Vec<String> {
        self.trace.iter().map(TraceRecord::line).collect()
    }

    pub fn final_fidelity(&self) -> Option<f64> {
        self.trace.last().map(|t| t.fidelity)
    }

    fn check_against(&self, errors: &ErrorModel, rho: &CMat) -> Result<()> {
        let d = Dims::from_errors(errors, self.dims.logical)?;
        if d != self.dims {
            return Err(Error::Shape("optimization state does not match the error model's leg dimensions".into()));
        }
        if rho.nrows() != self.dims.logical || rho.ncols() != self.dims.logical {
            return Err(Error::Shape(format!("rho must be {0}x{0}", self.dims.logical)));
        }
        Ok(())
    }

    fn groups(&self, f: Factor) -> Result<(Vec<Vec<CMat>>, usize, usize)> {
        let l = self.rounds();
        Ok(match f {
            Factor::Encoder => (vec![vec![self.encoder.clone()]], self.dims.q_in[0], self.dims.logical),
            Factor::Round(r) if (1..=l).contains(&r) => (self.instruments[r - 1].clone(), self.dims.q_in[r], self.dims.q_out[r - 1]),
            Factor::Decoder => (self.decoders.iter().map(|d| vec![d.clone()]).collect(), self.dims.logical, self.dims.q_out[l]),
            Factor::Round(r) => return Err(Error::Shape(format!("no check round {r}"))),
        })
    }

    fn set_groups(&mut self, f: Factor, groups: Vec<Vec<CMat>>) {
        match f {
            Factor::Encoder => self.encoder = groups.into_iter().next().and_then(|g| g.into_iter().next()).expect("one block"),
            Factor::Round(r) => self.instruments[r - 1] = groups,
            Factor::Decoder => self.decoders = groups.into_iter().map(|g| g.into_iter().next().expect("one block")).collect(),
        }
    }
}

fn tr_out(x: &CMat, d_out: usize, d_in: usize) -> CMat {
    CMat::from_fn(d_in, d_in, |i, j| (0..d_out).map(|o| x[(o * d_in + i, o * d_in + j)]).sum())
}

fn hermitize(x: &CMat) -> CMat {
    (x + x.adjoint()).map(|z| z * 0.5)
}

fn min_eig(x: &CMat) -> Result<f64> {
    Ok(herm_eig_mat(&hermitize(x))?.eigenvalues.last().copied().unwrap_or(0.0))
}

fn group_residual(blocks: &[CMat], d_out: usize, d_in: usize) -> Result<f64> {
    let mut sum = CMat::zeros(d_in, d_in);
    let mut neg: f64 = 0.0;
    for b in blocks {
        neg = neg.max(-min_eig(b)?);
        sum += tr_out(b, d_out, d_in);
    }
    Ok(neg.max((sum - CMat::identity(d_in, d_in)).norm()))
}

/// X_m ↦ X_m + I_out ⊗ Δ / (d_out·n) with Δ = I − Σ_m Tr_out X_m.
fn affine(blocks: &[CMat], d_out: usize, d_in: usize) -> Vec<CMat> {
    let mut delta = CMat::identity(d_in, d_in);
    for b in blocks {
        delta -= tr_out(b, d_out, d_in);
    }
    let corr = kron(&CMat::identity(d_out, d_out), &delta).map(|z| z / (d_out * blocks.len()) as f64);
    blocks.iter().map(|b| b + &corr).collect()
}

/// Dykstra alternating projection of the block family onto
/// {X_m ⪰ 0, Σ_m Tr_out X_m = I_in}; blocks ordered (out, in).
pub fn project_cptp_blocks(blocks: &[CMat], d_out: usize, d_in: usize) -> Result<Vec<CMat>> {
    let dim = d_out * d_in;
    if blocks.is_empty() || blocks.iter().any(|b| b.nrows() != dim || b.ncols() != dim) {
        return Err(Error::Shape(format!("projection expects {dim}x{dim} blocks")));
    }
    let mut x: Vec<CMat> = blocks.iter().map(hermitize).collect();
    let mut p: Vec<CMat> = vec![CMat::zeros(dim, dim); x.len()];
    let mut aff_res = f64::INFINITY;
    for _ in 0..PROJECTION_SWEEPS {
        let mut y = Vec::with_capacity(x.len());
        for (xm, pm) in x.iter().zip(p.iter_mut()) {
            let z = hermitize(&(xm + &*pm));
            let ym = psd_part(&z)?;
            *pm = z - &ym;
            y.push(ym);
        }
        let mut sum = CMat::zeros(d_in, d_in);
        for ym in &y {
            sum += tr_out(ym, d_out, d_in);
        }
        aff_res = (sum - CMat::identity(d_in, d_in)).norm();
        if aff_res <= PROJECTION_TOL {
            return exact_tp(&y, d_out, d_in);
        }
        x = affine(&y, d_out, d_in);
    }
    let mut psd_res: f64 = 0.0;
    for xm in &x {
        psd_res = psd_res.max(-min_eig(xm)?);
    }
    Err(Error::Projection { psd: psd_res, affine: aff_res })
}

/// (I ⊗ S^{-1/2}) Y_m (I ⊗ S^{-1/2}) with S = Σ_m Tr_out Y_m: exactly trace
/// preserving and still PSD.
fn exact_tp(y: &[CMat], d_out: usize, d_in: usize) -> Result<Vec<CMat>> {
    let mut sum = CMat::zeros(d_in, d_in);
    for ym in y {
        sum += tr_out(ym, d_out, d_in);
    }
    let eig = herm_eig_mat(&hermitize(&sum))?;
    if eig.eigenvalues.last().copied().unwrap_or(0.0) <= 0.5 {
        return Err(Error::Numerical("trace constraint far from satisfied after projection".into()));
    }
    let mut v = eig.eigenvectors.clone();
    for (k, l) in eig.eigenvalues.iter().enumerate() {
        v.column_mut(k).iter_mut().for_each(|z| *z /= l.sqrt().sqrt());
    }
    let t = kron(&CMat::identity(d_out, d_out), &(&v * v.adjoint()));
    Ok(y.iter().map(|ym| hermitize(&(&t * ym * &t))).collect())
}

pub fn project_cptp_mat(x: &CMat, d_out: usize, d_in: usize) -> Result<CMat> {
    Ok(project_cptp_blocks(core::slice::from_ref(x), d_out, d_in)?.remove(0))
}

/// Projection of a square labeled operator onto the CPTP maps whose output
/// legs are `out_labels`; the result is in canonical (outputs, inputs) order.
pub fn project_cptp(x: &LabeledOperator, out_labels: &[&str]) -> Result<ChoiOperator> {
    if !x.is_square_labeled() {
        return Err(Error::Shape("projection needs a square labeled operator".into()));
    }
    for l in out_labels {
        if x.dim_of(l).is_none() {
            return Err(Error::UnknownLabel((*l).into()));
        }
    }
    let ins: Vec<&str> = x.rows().iter().map(|s| s.label.as_str()).filter(|l| !out_labels.contains(l)).collect();
    let mut order: Vec<&str> = out_labels.to_vec();
    order.extend(ins.iter().copied());
    let y = x.reorder(&order, &order)?;
    let d_out: usize = out_labels.iter().map(|l| x.dim_of(l).unwrap_or(1)).product();
    let d_in = y.data().nrows() / d_out;
    let p = project_cptp_mat(y.data(), d_out, d_in)?;
    let op = LabeledOperator::new(y.rows().to_vec(), y.cols().to_vec(), p)?;
    ChoiOperator::new_unchecked(op, ins.iter().map(|s| s.to_string()).collect(), out_labels.iter().map(|s| s.to_string()).collect())
}

/// Canonical Kraus operators (d_out × d_in) of a Choi matrix ordered (out, in).
pub fn kraus_of(choi: &CMat, d_out: usize, d_in: usize) -> Result<Vec<CMat>> {
    let eig = herm_eig_mat(&hermitize(choi))?;
    let mut out = Vec::new();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= KRAUS_FLOOR {
            continue;
        }
        let s = l.sqrt();
        let col = eig.eigenvectors.column(k);
        out.push(CMat::from_fn(d_out, d_in, |o, i| col[o * d_in + i] * s));
    }
    Ok(out)
}

fn apply(kraus: &[CMat], state: &CMat, rest: usize) -> CMat {
    let id = CMat::identity(rest, rest);
    let d = kraus.first().map(|k| k.nrows() * rest).unwrap_or(0);
    let mut out = CMat::zeros(d, d);
    for k in kraus {
        let big = kron(k, &id);
        out += &big * state * big.adjoint();
    }
    out
}

fn apply_adjoint(kraus: &[CMat], effect: &CMat, rest: usize) -> CMat {
    let id = CMat::identity(rest, rest);
    let d = kraus.first().map(|k| k.ncols() * rest).unwrap_or(0);
    let mut out = CMat::zeros(d, d);
    for k in kraus {
        let big = kron(k, &id);
        out += big.adjoint() * effect * &big;
    }
    out
}

/// Tr_E on (Q, E, R).
fn trace_middle(x: &CMat, q: usize, e: usize, r: usize) -> CMat {
    CMat::from_fn(q * r, q * r, |a, b| {
        let (qa, ra, qb, rb) = (a / r, a % r, b / r, b % r);
        (0..e).map(|k| x[((qa * e + k) * r + ra, (qb * e + k) * r + rb)]).sum()
    })
}

/// X on (Q, R) ↦ X ⊗ I_E placed as (Q, E, R).
fn identity_middle(x: &CMat, q: usize, e: usize, r: usize) -> CMat {
    CMat::from_fn(q * e * r, q * e * r, |a, b| {
        let (qa, ea, ra) = (a / (e * r), (a / r) % e, a % r);
        let (qb, eb, rb) = (b / (e * r), (b / r) % e, b % r);
        if ea == eb {
            x[(qa * r + ra, qb * r + rb)]
        } else {
            ZERO
        }
    })
}

/// |ρ⟫⟪ρ| on (L, R).
fn rho_projector(rho: &CMat) -> CMat {
    vec_choi(rho)
}

/// |I⟫⟪I| on (L', R).
fn overlap_effect(d: usize) -> CMat {
    vec_choi(&CMat::identity(d, d))
}

/// A with Tr[ω (Φ⊗id)(σ)] = Tr(J A) for every Choi J on (out, in), given σ
/// on (in, rest) and ω on (out, rest).
pub fn coefficient(sigma: &CMat, omega: &CMat, d_in: usize, d_out: usize, rest: usize) -> CMat {
    // M1[(o',o),(r',r)] = ω[(o',r'),(o,r)], M2[(r',r),(i',i)] = σ[(i,r),(i',r')]
    let m1 = CMat::from_fn(d_out * d_out, rest * rest, |a, b| {
        let (op, o, rp, r) = (a / d_out, a % d_out, b / rest, b % rest);
        omega[(op * rest + rp, o * rest + r)]
    });
    let m2 = CMat::from_fn(rest * rest, d_in * d_in, |a, b| {
        let (rp, r, ip, i) = (a / rest, a % rest, b / d_in, b % d_in);
        sigma[(i * rest + r, ip * rest + rp)]
    });
    let p = m1 * m2;
    CMat::from_fn(d_out * d_in, d_out * d_in, |a, b| {
        let (op, ip, o, i) = (a / d_in, a % d_in, b / d_in, b % d_in);
        p[(op * d_out + o, ip * d_in + i)]
    })
}

fn split_kraus(k: &CMat, env: usize) -> Vec<CMat> {
    let q = k.nrows() / env;
    (0..env).map(|e| CMat::from_fn(q, k.ncols(), |a, b| k[(a * env + e, b)])).collect()
}

struct Forward {
    /// `after_error[r][m]`: state after error round r on (Q_r', E_r, R).
    after_error: Vec<Vec<CMat>>,
    /// Per final memory value on (Q_l', R).
    decoder_in: Vec<CMat>,
    output: CMat,
}

fn forward(state: &OptimizationState, errors: &ErrorModel, rho: &CMat) -> Result<Forward> {
    let d = &state.dims;
    let rr = d.logical;
    let l = d.rounds();
    let enc = kraus_of(&state.encoder, d.q_in[0], rr)?;
    let s0 = apply(&enc, &rho_projector(rho), rr);
    let mut after_error = vec![vec![apply(&errors.rounds[0].kraus, &s0, rr)]];
    for r in 1..=l {
        let rest = d.env_before(r) * rr;
        let n = state.memory[r].len();
        let mut next = vec![CMat::zeros(d.q_in[r] * rest, d.q_in[r] * rest); n];
        for (a, sa) in after_error[r - 1].iter().enumerate() {
            for (b, c) in state.instruments[r - 1][a].iter().enumerate() {
                let ks = kraus_of(c, d.q_in[r], d.q_out[r - 1])?;
                if !ks.is_empty() {
                    next[b] += apply(&ks, sa, rest);
                }
            }
        }
        let errs = &errors.rounds[r].kraus;
        after_error.push(next.iter().map(|s| apply(errs, s, rr)).collect());
    }
    let decoder_in: Vec<CMat> = after_error[l].iter().map(|s| trace_middle(s, d.q_out[l], d.env[l], rr)).collect();
    let mut output = CMat::zeros(rr * rr, rr * rr);
    for (m, s) in decoder_in.iter().enumerate() {
        let ks = kraus_of(&state.decoders[m], rr, d.q_out[l])?;
        if !ks.is_empty() {
            output += apply(&ks, s, rr);
        }
    }
    Ok(Forward { after_error, decoder_in, output })
}

/// `after_factor[r][m]`: effect just after factor r (encoder for r = 0) on (Q_r, E_{r-1}, R).
fn backward(state: &OptimizationState, errors: &ErrorModel) -> Result<Vec<Vec<CMat>>> {
    let d = &state.dims;
    let rr = d.logical;
    let l = d.rounds();
    let top = overlap_effect(rr);
    let mut after: Vec<Vec<CMat>> = vec![Vec::new(); l + 1];
    let mut level: Vec<CMat> = Vec::with_capacity(state.decoders.len());
    for dec in &state.decoders {
        let ks = kraus_of(dec, rr, d.q_out[l])?;
        let w = if ks.is_empty() { CMat::zeros(d.q_out[l] * rr, d.q_out[l] * rr) } else { apply_adjoint(&ks, &top, rr) };
        let w = identity_middle(&w, d.q_out[l], d.env[l], rr);
        level.push(apply_adjoint(&errors.rounds[l].kraus, &w, rr));
    }
    after[l] = level;
    for r in (1..=l).rev() {
        let rest = d.env_before(r) * rr;
        let dim = d.q_out[r - 1] * rest;
        let mut prev = Vec::with_capacity(state.instruments[r - 1].len());
        for group in &state.instruments[r - 1] {
            let mut w = CMat::zeros(dim, dim);
            for (b, c) in group.iter().enumerate() {
                let ks = kraus_of(c, d.q_in[r], d.q_out[r - 1])?;
                if !ks.is_empty() {
                    w += apply_adjoint(&ks, &after[r][b], rest);
                }
            }
            prev.push(apply_adjoint(&errors.rounds[r - 1].kraus, &w, rr));
        }
        after[r - 1] = prev;
    }
    Ok(after)
}

fn overlap(output: &CMat, d: usize) -> f64 {
    (overlap_effect(d) * output).trace().re
}

/// F = ⟪ρ|𝐄∗𝐐|ρ⟫ by forward propagation through the factored comb.
pub fn ent_fidelity(state: &OptimizationState, errors: &ErrorModel, rho: &CMat) -> Result<f64> {
    state.check_against(errors, rho)?;
    Ok(overlap(&forward(state, errors, rho)?.output, state.dims.logical))
}

/// F = Σ |Tr(ρ K)|² over every composed Kraus operator K of the total
/// channel, memory paths and final environment components included.
pub fn ent_fidelity_kraus(state: &OptimizationState, errors: &ErrorModel, rho: &CMat) -> Result<f64> {
    state.check_against(errors, rho)?;
    let d = &state.dims;
    let l = d.rounds();
    // partial products with rows (Q_r', E_r), tagged by memory value
    let mut cur: Vec<(usize, CMat)> = Vec::new();
    for v in kraus_of(&state.encoder, d.q_in[0], d.logical)? {
        for e in &errors.rounds[0].kraus {
            cur.push((0, e * &v));
        }
    }
    for r in 1..=l {
        let env = d.env_before(r);
        let id = CMat::identity(env, env);
        let mut next = Vec::new();
        for (a, m) in &cur {
            for (b, c) in state.instruments[r - 1][*a].iter().enumerate() {
                for k in kraus_of(c, d.q_in[r], d.q_out[r - 1])? {
                    let km = kron(&k, &id) * m;
                    for e in &errors.rounds[r].kraus {
                        next.push((b, e * &km));
                    }
                }
            }
        }
        cur = next;
    }
    let mut f = 0.0;
    for (m, op) in &cur {
        let decs = kraus_of(&state.decoders[*m], d.logical, d.q_out[l])?;
        for part in split_kraus(op, d.env[l]) {
            for dk in &decs {
                f += (rho * (dk * &part)).trace().norm_sqr();
            }
        }
    }
    Ok(f)
}

/// Coefficient blocks, grouped like the factor's projection groups.
fn coefficients(state: &OptimizationState, errors: &ErrorModel, rho: &CMat, f: Factor) -> Result<Vec<Vec<CMat>>> {
    let d = &state.dims;
    let rr = d.logical;
    let l = d.rounds();
    match f {
        Factor::Decoder => {
            let fw = forward(state, errors, rho)?;
            let top = overlap_effect(rr);
            Ok(fw.decoder_in.iter().map(|s| vec![coefficient(s, &top, d.q_out[l], rr, rr)]).collect())
        }
        Factor::Encoder => {
            let bw = backward(state, errors)?;
            Ok(vec![vec![coefficient(&rho_projector(rho), &bw[0][0], rr, d.q_in[0], rr)]])
        }
        Factor::Round(r) => {
            if r == 0 || r > l {
                return Err(Error::Shape(format!("no check round {r}")));
            }
            let fw = forward(state, errors, rho)?;
            let bw = backward(state, errors)?;
            let rest = d.env_before(r) * rr;
            Ok(fw.after_error[r - 1]
                .iter()
                .map(|s| bw[r].iter().map(|w| coefficient(s, w, d.q_out[r - 1], d.q_in[r], rest)).collect())
                .collect())
        }
    }
}

fn linear(a: &[Vec<CMat>], x: &[Vec<CMat>]) -> f64 {
    a.iter().flatten().zip(x.iter().flatten()).map(|(a, x)| (a * x).trace().re).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub before: f64,
    pub after: f64,
    pub accepted: usize,
    pub event: Option<String>,
}

/// Projected ascent on Tr(A X) over the factor's feasible set with step
/// 1/‖A‖, keeping only improving iterates.
fn ascend(a: &[Vec<CMat>], x: Vec<Vec<CMat>>, d_out: usize, d_in: usize, steps: usize) -> (Vec<Vec<CMat>>, f64, f64, usize, Option<String>) {
    let before = linear(a, &x);
    let norm = a.iter().flatten().map(op_norm).fold(0.0, f64::max);
    let mut cur = x;
    let mut val = before;
    let mut accepted = 0;
    let mut event = None;
    if norm <= 0.0 {
        return (cur, before, val, 0, None);
    }
    let s = 1.0 / norm;
    for _ in 0..steps {
        let mut trial = Vec::with_capacity(cur.len());
        let mut failed = None;
        for (g, ag) in cur.iter().zip(a) {
            let moved: Vec<CMat> = g.iter().zip(ag).map(|(xb, ab)| xb + ab.map(|z| z * s)).collect();
            match project_cptp_blocks(&moved, d_out, d_in) {
                Ok(p) => trial.push(p),
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            event = Some(format!("step rejected: {e}"));
            break;
        }
        let v = linear(a, &trial);
        if v <= val {
            break;
        }
        let gain = v - val;
        cur = trial;
        val = v;
        accepted += 1;
        if gain < 1e-14 {
            break;
        }
    }
    (cur, before, val, accepted, event)
}

/// One coordinate update of `which`, all other factors fixed.
pub fn coordinate_step(state: &mut OptimizationState, errors: &ErrorModel, rho: &CMat, which: Factor) -> Result<StepOutcome> {
    state.check_against(errors, rho)?;
    let a = coefficients(state, errors, rho, which)?;
    let (x, d_out, d_in) = state.groups(which)?;
    let (x, before, after, accepted, event) = ascend(&a, x, d_out, d_in, state.config.inner_steps);
    state.set_groups(which, x);
    if let Some(e) = &event {
        state.events.push(format!("{}: {e}", which.name()));
    }
    Ok(StepOutcome { before, after, accepted, event })
}

fn record(state: &mut OptimizationState, iteration: usize, factor: String, fidelity: f64) -> Result<()> {
    let feasibility = state.feasibility_residual()?;
    state.trace.push(TraceRecord { iteration, factor, fidelity, feasibility });
    Ok(())
}

/// Maximally mixed state on `d`.
pub fn maximally_mixed(d: usize) -> CMat {
    CMat::identity(d, d).map(|z| z / d as f64)
}

fn check_rho(rho: &CMat) -> Result<()> {
    if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
        return Err(Error::Shape("rho must be square".into()));
    }
    if (rho.trace().re - 1.0).abs() > 1e-9 || min_eig(rho)? < -1e-9 {
        return Err(Error::Model("rho must be a density operator".into()));
    }
    Ok(())
}

/// Cyclic coordinate ascent from `state` until one full cycle changes F by
/// less than `tol_conv` or `max_iters` cycles have run.
pub fn seesaw_from(mut state: OptimizationState, errors: &ErrorModel, rho: &CMat) -> Result<OptimizationState> {
    check_rho(rho)?;
    state.check_against(errors, rho)?;
    let order = state.config.order.clone().unwrap_or_else(|| default_order(state.rounds()));
    let l = state.rounds();
    if let Some(bad) = order.iter().find(|f| matches!(f, Factor::Round(r) if *r == 0 || *r > l)) {
        return Err(Error::Shape(format!("order names {} but the model has {l} rounds", bad.name())));
    }
    let mut f = ent_fidelity(&state, errors, rho)?;
    state.trace.clear();
    record(&mut state, 0, "init".into(), f)?;
    state.converged = false;
    for it in 1..=state.config.max_iters {
        let start = f;
        for &which in &order {
            coordinate_step(&mut state, errors, rho, which)?;
            let g = ent_fidelity(&state, errors, rho)?;
            f = g;
            record(&mut state, it, which.name(), f)?;
        }
        state.iterations = it;
        if (f - start).abs() < state.config.tol_conv {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// See-saw from the seeded identity-embedding start.
pub fn seesaw(errors: &ErrorModel, rho: &CMat, memory: &[usize], config: &OptConfig) -> Result<OptimizationState> {
    check_rho(rho)?;
    let init = OptimizationState::initial(errors, rho.nrows(), memory, config)?;
    seesaw_from(init, errors, rho)
}

/// Σ_{ab} |W⟫⟪W| with W = (M ρ)† for every M = E_b V_a (decoder coefficient)
/// or W = (ρ D_a E_b)† (encoder coefficient); single-round models only.
fn static_coefficient(f: Factor, state: &OptimizationState, errors: &ErrorModel, rho: &CMat) -> Result<Vec<Vec<CMat>>> {
    let d = &state.dims;
    let env = d.env[0];
    let errs: Vec<CMat> = errors.rounds[0].kraus.iter().flat_map(|e| split_kraus(e, env)).collect();
    let acc = match f {
        Factor::Decoder => {
            let dim = d.logical * d.q_out[0];
            let mut acc = CMat::zeros(dim, dim);
            for v in kraus_of(&state.encoder, d.q_in[0], d.logical)? {
                for e in &errs {
                    acc += vec_choi(&(e * &v * rho).adjoint());
                }
            }
            acc
        }
        Factor::Encoder => {
            let dim = d.q_in[0] * d.logical;
            let mut acc = CMat::zeros(dim, dim);
            for dk in kraus_of(&state.decoders[0], d.logical, d.q_out[0])? {
                for e in &errs {
                    acc += vec_choi(&(rho * &dk * e).adjoint());
                }
            }
            acc
        }
        Factor::Round(r) => return Err(Error::Model(format!("static optimization has no round {r}"))),
    };
    Ok(vec![vec![acc]])
}

/// Decoder/encoder alternation for l = 0, with coefficients from Kraus sums.
pub fn static_biconvex(errors: &ErrorModel, rho: &CMat, config: &OptConfig) -> Result<OptimizationState> {
    check_rho(rho)?;
    if errors.num_rounds() != 1 {
        return Err(Error::Model("static optimization needs a single error round".into()));
    }
    let mut state = OptimizationState::initial(errors, rho.nrows(), &[], config)?;
    let eval = |s: &OptimizationState| ent_fidelity_kraus(s, errors, rho);
    let mut f = eval(&state)?;
    record(&mut state, 0, "init".into(), f)?;
    for it in 1..=state.config.max_iters {
        let start = f;
        for which in [Factor::Decoder, Factor::Encoder] {
            let a = static_coefficient(which, &state, errors, rho)?;
            let (x, d_out, d_in) = state.groups(which)?;
            let (x, _, _, _, event) = ascend(&a, x, d_out, d_in, state.config.inner_steps);
            state.set_groups(which, x);
            if let Some(e) = event {
                state.events.push(format!("{}: {e}", which.name()));
            }
            f = eval(&state)?;
            record(&mut state, it, which.name(), f)?;
        }
        state.iterations = it;
        if (f - start).abs() < state.config.tol_conv {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combs::{is_cptp, link_product};
    use crate::library::{self, pauli_string};
    use crate::model::{env_label, q_label, qp_label, ErrorRound, Limits};
    use crate::random::{random_channel, random_hermitian};
    use crate::tensor::{eye, sys};
    use proptest::prelude::*;
    use rand::Rng;

    fn no_error(dims: &[usize]) -> ErrorModel {
        ErrorModel::new(dims.iter().map(|&d| ErrorRound::simple(vec![eye(d)]).unwrap()).collect()).unwrap()
    }

    fn exact(errors: &ErrorModel, logical: usize, memory: &[usize]) -> OptimizationState {
        let cfg = OptConfig { perturbation: 0.0, ..OptConfig::default() };
        OptimizationState::initial(errors, logical, memory, &cfg).unwrap()
    }

    fn random_model(seed: u64, rounds: usize) -> ErrorModel {
        let mut r = rng(seed);
        let rs = (0..=rounds).map(|_| {
            let n = r.random_range(1..=2);
            ErrorRound::simple(random_channel(&mut r, 2, 2, n)).unwrap()
        });
        ErrorModel::new(rs.collect()).unwrap()
    }

    fn random_state(errors: &ErrorModel, memory: &[usize], seed: u64) -> OptimizationState {
        let cfg = OptConfig { perturbation: 0.7, seed, ..OptConfig::default() };
        OptimizationState::initial(errors, 2, memory, &cfg).unwrap()
    }

    fn labeled(choi: &CMat, out: (&str, usize), inp: (&str, usize)) -> ChoiOperator {
        let side = sys(&[out, inp]);
        let op = LabeledOperator::new(side.clone(), side, choi.clone()).unwrap();
        ChoiOperator::new_unchecked(op, vec![inp.0.into()], vec![out.0.into()]).unwrap()
    }

    /// ⟪ρ|E∗Q|ρ⟫ from dense link products, summed over memory paths.
    fn dense_fidelity(state: &OptimizationState, errors: &ErrorModel, rho: &CMat) -> f64 {
        let d = &state.dims;
        let l = d.rounds();
        let comb = errors.error_comb(&Limits::default()).unwrap();
        let mut paths: Vec<Vec<usize>> = vec![vec![0]];
        for r in 1..=l {
            paths = paths.into_iter().flat_map(|p| (0..state.memory[r].len()).map(move |b| {
                let mut q = p.clone();
                q.push(b);
                q
            })).collect();
        }
        let dl = d.logical;
        let mut total = 0.0;
        for p in paths {
            let mut acc = link_product(&comb, &labeled(&state.encoder, (&q_label(0), d.q_in[0]), ("L", dl))).unwrap();
            for r in 1..=l {
                let c = &state.instruments[r - 1][p[r - 1]][p[r]];
                acc = link_product(&acc, &labeled(c, (&q_label(r), d.q_in[r]), (&qp_label(r - 1), d.q_out[r - 1]))).unwrap();
            }
            acc = link_product(&acc, &labeled(&state.decoders[p[l]], ("L'", dl), (&qp_label(l), d.q_out[l]))).unwrap();
            let j = acc.op().partial_trace(&[&env_label(l)]).unwrap().reorder(&["L'", "L"], &["L'", "L"]).unwrap();
            let v = CMat::from_fn(dl * dl, 1, |f, _| rho[(f / dl, f % dl)]);
            total += (v.adjoint() * j.data() * &v)[(0, 0)].re;
        }
        total
    }

    #[test]
    fn identity_channel_has_unit_fidelity() {
        let errors = no_error(&[2, 2]);
        let s = exact(&errors, 2, &[1]);
        for rho in [maximally_mixed(2), CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), ZERO, ZERO, ZERO])] {
            assert!((ent_fidelity(&s, &errors, &rho).unwrap() - 1.0).abs() < 1e-12);
            assert!((ent_fidelity_kraus(&s, &errors, &rho).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn depolarizing_quarter() {
        let errors = ErrorModel::new(vec![ErrorRound::simple(["I", "X", "Y", "Z"].iter().map(|p| pauli_string(p).map(|z| z * 0.5)).collect()).unwrap()]).unwrap();
        let s = exact(&errors, 2, &[]);
        let rho = maximally_mixed(2);
        let oracle: f64 = errors.rounds[0].kraus.iter().map(|k| (&rho * k).trace().norm_sqr()).sum();
        assert!((oracle - 0.25).abs() < 1e-15);
        assert!((ent_fidelity(&s, &errors, &rho).unwrap() - 0.25).abs() < 1e-10);
    }

    #[test]
    fn coefficient_reproduces_contraction() {
        let mut r = rng(3);
        let (din, dout, rest) = (2, 3, 2);
        let g = ginibre(&mut r, din * rest, din * rest);
        let sigma = &g * g.adjoint();
        let h = ginibre(&mut r, dout * rest, dout * rest);
        let omega = &h * h.adjoint();
        let ks = random_channel(&mut r, din, dout, 2);
        let choi: CMat = ks.iter().map(vec_choi).fold(CMat::zeros(dout * din, dout * din), |a, b| a + b);
        let direct = (&omega * apply(&ks, &sigma, rest)).trace().re;
        let a = coefficient(&sigma, &omega, din, dout, rest);
        assert!(((&choi * &a).trace().re - direct).abs() < 1e-10);
        assert!((&a - a.adjoint()).norm() < 1e-10);
    }

    #[test]
    fn kraus_round_trip() {
        let mut r = rng(5);
        let ks = random_channel(&mut r, 2, 3, 3);
        let choi: CMat = ks.iter().map(vec_choi).fold(CMat::zeros(6, 6), |a, b| a + b);
        let back: CMat = kraus_of(&choi, 3, 2).unwrap().iter().map(vec_choi).fold(CMat::zeros(6, 6), |a, b| a + b);
        assert!((choi - back).norm() < 1e-12);
    }

    #[test]
    fn factored_matches_kraus_and_dense_oracles() {
        for seed in 0..12u64 {
            let rounds = (seed % 3) as usize;
            let errors = random_model(seed, rounds);
            let memory: Vec<usize> = (0..rounds).map(|r| 1 + (seed as usize + r) % 2).collect();
            let s = random_state(&errors, &memory, seed);
            let mut rr = rng(seed + 100);
            let g = ginibre(&mut rr, 2, 2);
            let rho = (&g * g.adjoint()).map(|z| z / (g.norm() * g.norm()));
            let f = ent_fidelity(&s, &errors, &rho).unwrap();
            assert!((f - ent_fidelity_kraus(&s, &errors, &rho).unwrap()).abs() < 1e-9, "seed {seed}");
            assert!((f - dense_fidelity(&s, &errors, &rho)).abs() < 1e-9, "seed {seed}");
            assert!(f <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn dense_oracle_with_environment() {
        let mut r = rng(9);
        let k0 = random_channel(&mut r, 2, 4, 2);
        let k1 = random_channel(&mut r, 4, 2, 2);
        let errors = ErrorModel::new(vec![ErrorRound::new(1, 2, k0).unwrap(), ErrorRound::new(2, 1, k1).unwrap()]).unwrap();
        let s = random_state(&errors, &[2], 4);
        let rho = maximally_mixed(2);
        let f = ent_fidelity(&s, &errors, &rho).unwrap();
        assert!((f - ent_fidelity_kraus(&s, &errors, &rho).unwrap()).abs() < 1e-9);
        assert!((f - dense_fidelity(&s, &errors, &rho)).abs() < 1e-9);
    }

    #[test]
    fn projection_fixes_cptp_and_maps_zero_to_depolarizing() {
        let mut r = rng(1);
        let ks = random_channel(&mut r, 2, 3, 2);
        let choi: CMat = ks.iter().map(vec_choi).fold(CMat::zeros(6, 6), |a, b| a + b);
        assert!((project_cptp_mat(&choi, 3, 2).unwrap() - &choi).norm() < 1e-10);
        let z = project_cptp_mat(&CMat::zeros(6, 6), 3, 2).unwrap();
        assert!((z - CMat::identity(6, 6).map(|x| x / 3.0)).norm() < 1e-12);
    }

    #[test]
    fn projection_of_labeled_operator() {
        let mut r = rng(2);
        let h = random_hermitian(&mut r, 4);
        let side = sys(&[("A", 2), ("B", 2)]);
        let x = LabeledOperator::new(side.clone(), side, h).unwrap();
        let c = project_cptp(&x, &["A"]).unwrap();
        let rep = is_cptp(&c).unwrap();
        assert!(rep.residual < 1e-8, "{rep:?}");
        assert!(project_cptp(&x, &["Z"]).is_err());
    }

    #[test]
    fn decoder_step_finds_identity_without_errors() {
        let errors = no_error(&[2]);
        let cfg = OptConfig { perturbation: 0.5, seed: 4, ..OptConfig::default() };
        let mut s = OptimizationState::initial(&errors, 2, &[], &cfg).unwrap();
        s.encoder = vec_choi(&eye(2));
        let rho = maximally_mixed(2);
        let before = ent_fidelity(&s, &errors, &rho).unwrap();
        let out = coordinate_step(&mut s, &errors, &rho, Factor::Decoder).unwrap();
        assert!((out.before - before).abs() < 1e-10);
        let after = ent_fidelity(&s, &errors, &rho).unwrap();
        assert!((out.after - after).abs() < 1e-10);
        assert!(after > 1.0 - 1e-6, "{after}");
    }

    #[test]
    fn encoder_step_matches_grid_search() {
        // depolarized qubit 2, decoder keeps qubit 1
        let kraus = ["II", "IX", "IY", "IZ"].iter().map(|p| pauli_string(p).map(|z| z * 0.5)).collect();
        let errors = ErrorModel::new(vec![ErrorRound::simple(kraus).unwrap()]).unwrap();
        let cfg = OptConfig { inner_steps: 400, ..OptConfig::default() };
        let mut s = OptimizationState::initial(&errors, 2, &[], &cfg).unwrap();
        let keep_first: Vec<CMat> = (0..2).map(|a| {
            CMat::from_fn(2, 4, |o, x| if x == o * 2 + a { C64::new(1.0, 0.0) } else { ZERO })
        }).collect();
        s.decoders = vec![keep_first.iter().map(vec_choi).fold(CMat::zeros(8, 8), |a, b| a + b)];
        let rho = maximally_mixed(2);
        let swap = CMat::from_fn(4, 4, |y, x| if y == (x % 2) * 2 + x / 2 { C64::new(1.0, 0.0) } else { ZERO });
        let e0 = embedding(4, 2);
        let mut grid = 0.0f64;
        let n = 2000;
        for t in 0..=n {
            let th = core::f64::consts::PI * t as f64 / n as f64;
            let u = eye(4).map(|z| z * th.cos()) - swap.map(|z| z * C64::new(0.0, th.sin()));
            let mut g = s.clone();
            g.encoder = vec_choi(&(u * &e0));
            grid = grid.max(ent_fidelity(&g, &errors, &rho).unwrap());
        }
        coordinate_step(&mut s, &errors, &rho, Factor::Encoder).unwrap();
        let f = ent_fidelity(&s, &errors, &rho).unwrap();
        assert!((f - grid).abs() < 1e-3, "step {f} grid {grid}");
    }

    #[test]
    fn coordinate_steps_never_decrease_fidelity() {
        let rho = maximally_mixed(2);
        for seed in 0..100u64 {
            let rounds = (seed % 3) as usize;
            let errors = random_model(seed, rounds);
            let memory: Vec<usize> = (0..rounds).map(|r| 1 + (seed as usize >> r) % 2).collect();
            let mut s = random_state(&errors, &memory, seed);
            s.config.inner_steps = 3;
            let order = default_order(rounds);
            let which = order[(seed as usize) % order.len()];
            let before = ent_fidelity(&s, &errors, &rho).unwrap();
            coordinate_step(&mut s, &errors, &rho, which).unwrap();
            let after = ent_fidelity(&s, &errors, &rho).unwrap();
            assert!(after >= before - 1e-10, "seed {seed}: {before} -> {after}");
            assert!(s.feasibility_residual().unwrap() < 1e-7);
        }
    }

    #[test]
    fn no_error_reaches_one_within_three_cycles() {
        let errors = no_error(&[2, 2]);
        let cfg = OptConfig { max_iters: 3, ..OptConfig::default() };
        let s = seesaw(&errors, &maximally_mixed(2), &[2], &cfg).unwrap();
        assert!(s.final_fidelity().unwrap() >= 1.0 - 1e-6);
    }

    fn assert_contract(s: &OptimizationState) {
        for w in s.trace.windows(2) {
            assert!(w[1].fidelity >= w[0].fidelity - 1e-9, "{:?} -> {:?}", w[0], w[1]);
        }
        for t in &s.trace {
            assert!(t.feasibility <= 1e-7, "{t:?}");
            assert!(t.fidelity <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn warm_started_correctable_codes_reach_high_fidelity() {
        for inst in [library::bitflip_code().unwrap(), library::spacetime_toy_circuit().unwrap()] {
            let st = OptimizationState::from_code(&inst.code, &inst.errors, &OptConfig::default()).unwrap();
            let s = seesaw_from(st, &inst.errors, &maximally_mixed(2)).unwrap();
            assert!(s.final_fidelity().unwrap() >= 0.999, "{}", inst.name);
            assert_contract(&s);
        }
    }

    fn single_flip_channel(p: f64) -> ErrorModel {
        let mut kraus = vec![eye(8).map(|z| z * (1.0 - p).sqrt())];
        kraus.extend(["XII", "IXI", "IIX"].iter().map(|s| pauli_string(s).map(|z| z * (p / 3.0).sqrt())));
        ErrorModel::new(vec![ErrorRound::simple(kraus).unwrap()]).unwrap()
    }

    #[test]
    fn optimized_code_beats_unencoded_baseline() {
        let p: f64 = 0.1;
        let errors = single_flip_channel(p);
        let rho = maximally_mixed(2);
        let cfg = OptConfig { max_iters: 20, ..OptConfig::default() };
        let mut base = exact(&errors, 2, &[]);
        base.config = OptConfig { order: Some(vec![Factor::Decoder]), ..cfg.clone() };
        let b = seesaw_from(base, &errors, &rho).unwrap().final_fidelity().unwrap();
        assert!((b - (1.0 - p / 3.0)).abs() < 1e-6, "baseline {b}");

        // the cold start settles on the trivial-encoding fixed point
        let cold = seesaw(&errors, &rho, &[], &cfg).unwrap();
        assert!(cold.converged);
        assert!(cold.final_fidelity().unwrap() >= b - cfg.tol_conv, "cold {:?}", cold.final_fidelity());
        assert_contract(&cold);

        let rep = library::bitflip_code().unwrap();
        let warm = OptimizationState::from_code(&rep.code, &errors, &cfg).unwrap();
        let warm = seesaw_from(warm, &errors, &rho).unwrap();
        assert!(warm.final_fidelity().unwrap() > b + 1e-2, "warm {:?}", warm.final_fidelity());
        assert_contract(&warm);
    }

    #[test]
    fn biconvex_agrees_with_seesaw_at_l0() {
        let rho = maximally_mixed(2);
        for seed in 20..24u64 {
            let mut r = rng(seed);
            let errors = ErrorModel::new(vec![ErrorRound::simple(random_channel(&mut r, 4, 4, 2)).unwrap()]).unwrap();
            let cfg = OptConfig { seed, max_iters: 30, ..OptConfig::default() };
            let a = seesaw(&errors, &rho, &[], &cfg).unwrap();
            let b = static_biconvex(&errors, &rho, &cfg).unwrap();
            let (fa, fb) = (a.final_fidelity().unwrap(), b.final_fidelity().unwrap());
            assert!((fa - fb).abs() < 1e-6, "seed {seed}: {fa} vs {fb}");
            assert_contract(&a);
            assert_contract(&b);
        }
    }

    #[test]
    fn identical_seeds_reproduce_traces() {
        let errors = random_model(11, 1);
        let rho = maximally_mixed(2);
        let cfg = OptConfig { seed: 11, max_iters: 5, ..OptConfig::default() };
        let a = seesaw(&errors, &rho, &[2], &cfg).unwrap();
        let b = seesaw(&errors, &rho, &[2], &cfg).unwrap();
        assert_eq!(a.trace_lines(), b.trace_lines());
        let c = seesaw(&errors, &rho, &[2], &OptConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.trace_lines(), c.trace_lines());
    }

    #[test]
    fn rejects_bad_dims() {
        let errors = no_error(&[2, 2]);
        let rho = maximally_mixed(2);
        assert!(seesaw(&errors, &rho, &[], &OptConfig::default()).is_err());
        assert!(seesaw(&errors, &rho, &[0], &OptConfig::default()).is_err());
        assert!(seesaw(&errors, &CMat::identity(2, 2), &[1], &OptConfig::default()).is_err());
        let cfg = OptConfig { order: Some(vec![Factor::Round(3)]), ..OptConfig::default() };
        assert!(seesaw(&errors, &rho, &[1], &cfg).is_err());
        assert!(static_biconvex(&errors, &rho, &OptConfig::default()).is_err());
    }

    #[test]
    fn factor_names_round_trip() {
        for f in [Factor::Encoder, Factor::Decoder, Factor::Round(2)] {
            assert_eq!(Factor::parse(&f.name()), Some(f));
        }
        assert_eq!(Factor::parse("round0"), None);
        assert_eq!(TraceRecord { iteration: 3, factor: "decoder".into(), fidelity: 0.5, feasibility: 0.0 }.line(), "3 decoder 0.500000000000");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn random_hermitian_projects_to_cptp(seed in 0u64..10_000, dout in 1usize..4, din in 1usize..4) {
            let mut r = rng(seed);
            let h = random_hermitian(&mut r, dout * din).map(|z| z * 3.0);
            let p = project_cptp_mat(&h, dout, din).unwrap();
            prop_assert!(group_residual(&[p], dout, din).unwrap() < 1e-8);
        }

        #[test]
        fn fidelity_never_exceeds_one(seed in 0u64..10_000, rounds in 0usize..3) {
            let errors = random_model(seed, rounds);
            let s = random_state(&errors, &vec![2; rounds], seed);
            let f = ent_fidelity(&s, &errors, &maximally_mixed(2)).unwrap();
            prop_assert!(f <= 1.0 + 1e-8 && f >= -1e-12);
        }
    }
}
