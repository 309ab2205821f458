//! Decoder synthesis from both correctability proofs and recovery checks.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::info::{check_info_from, joint_state_from, JointState};
use super::{compose_all, lambda_from, Composed, LambdaTensor, MemoryBlock, ALGEBRAIC_TOL, INFO_TOL};
use crate::error::{Error, Result};
use crate::exec::{try_map, Executor};
use crate::linalg::{complement_basis, herm_eig_mat};
use crate::model::{CodeSpace, ErrorModel, Limits, StrategicCode};
use crate::random::{random_state, rng};
use crate::tensor::{eye, CMat, C64};

/// Error directions with Λ eigenvalue at or below this are dropped.
pub const DIRECTION_CUTOFF: f64 = 1e-10;
/// Decoder Kraus sets must satisfy Π⊥ + Σ D†D = I within this.
pub const DECODER_COMPLETENESS_TOL: f64 = 1e-8;
/// Final memory states with recovered weight at or below this carry no fidelity.
pub const RECOVERY_FLOOR: f64 = 1e-8;

/// Recovery operation for one final memory state, from Q_l' to Q_0.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderBlock {
    pub m: String,
    pub kraus: Vec<CMat>,
    /// Π⊥ on Q_l'.
    pub completion: CMat,
    /// Kraus operators |b_0⟩⟨w_t| over an orthonormal basis of Π⊥.
    pub completion_kraus: Vec<CMat>,
}

impl DecoderBlock {
    /// ‖Π⊥ + Σ D†D − I‖_F.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.completion.nrows();
        let mut acc = self.completion.clone();
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        (acc - eye(d)).norm()
    }

    pub fn all_kraus(&self) -> impl Iterator<Item = &CMat> {
        self.kraus.iter().chain(self.completion_kraus.iter())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoder {
    pub method: String,
    pub input_dim: usize,
    pub output_dim: usize,
    pub blocks: Vec<DecoderBlock>,
}

impl Decoder {
    pub fn block(&self, m: &str) -> Option<&DecoderBlock> {
        self.blocks.iter().find(|b| b.m == m)
    }

    pub fn completeness_residual(&self) -> f64 {
        self.blocks.iter().map(|b| b.completeness_residual()).fold(0.0, f64::max)
    }
}

/// Builds the block from isometric pieces `g_α` (d × k with orthonormal or
/// zero columns): D_α = B g_α†, completed on the orthogonal complement.
fn finish_block(m: &str, basis: &CMat, pieces: Vec<CMat>, d: usize) -> Result<DecoderBlock> {
    let k = basis.ncols();
    let mut span = CMat::zeros(d, pieces.len() * k);
    for (a, g) in pieces.iter().enumerate() {
        for i in 0..k {
            span.column_mut(a * k + i).copy_from(&g.column(i));
        }
    }
    let w = complement_basis(&span, 0.5);
    let b0 = basis.column(0).into_owned();
    let completion_kraus = (0..w.ncols()).map(|t| &b0 * w.column(t).adjoint()).collect();
    let block = DecoderBlock {
        m: m.into(),
        kraus: pieces.iter().map(|g| basis * g.adjoint()).collect(),
        completion: &w * w.adjoint(),
        completion_kraus,
    };
    let r = block.completeness_residual();
    if r > DECODER_COMPLETENESS_TOL {
        return Err(Error::Numerical(format!(
            "decoder for memory `{m}` violates completeness: |Π⊥ + Σ D†D - I|_F = {r:e}"
        )));
    }
    Ok(block)
}

fn witness_text(lt: &LambdaTensor) -> String {
    match &lt.worst {
        Some(w) => format!(
            "residual {:e} at memory `{}`, outcomes {:?}, e {:?}, e' {:?}, <{}|T|{}> = {:e}{:+e}i",
            w.residual, w.m, w.outcomes, w.e, w.e_prime, w.j, w.i, w.value.re, w.value.im
        ),
        None => "no witness".into(),
    }
}

/// Decoder of the algebraic proof: diagonalize Λ_m, rotate the summed
/// operators K̂_e into F_α, and set D_α = B F_α† / √d_α.
pub fn synth_decoder_algebraic_from<X: Executor>(
    composed: &Composed,
    lt: &LambdaTensor,
    basis: &CMat,
    tol: f64,
    exec: &X,
) -> Result<Decoder> {
    if lt.worst_residual > tol * lt.scale {
        return Err(Error::NotCorrectable(witness_text(lt)));
    }
    let (n, k, d) = (composed.errors.len(), composed.code_dim, composed.output_dim);
    let blocks: Vec<&MemoryBlock> = composed.blocks.iter().collect();
    let out = try_map(exec, blocks, |block| -> Result<DecoderBlock> {
        if block.branches.is_empty() {
            return finish_block(&block.m, basis, Vec::new(), d);
        }
        let lb = lt.block(&block.m).ok_or_else(|| Error::Model(format!("λ tensor misses memory `{}`", block.m)))?;
        let mut hats = vec![CMat::zeros(d, k); n];
        for branch in &block.branches {
            for (h, kb) in hats.iter_mut().zip(branch.kraus.iter()) {
                *h += kb;
            }
        }
        let eig = lb.diagonalize()?;
        let mut pieces = Vec::new();
        for (a, &da) in eig.eigenvalues.iter().enumerate() {
            if da <= DIRECTION_CUTOFF {
                continue;
            }
            let mut f = CMat::zeros(d, k);
            for (e, h) in hats.iter().enumerate() {
                f += h * eig.eigenvectors[(e, a)];
            }
            pieces.push(f / C64::new(da.sqrt(), 0.0));
        }
        finish_block(&block.m, basis, pieces, d)
    })?;
    Ok(Decoder { method: "algebraic".into(), input_dim: d, output_dim: basis.nrows(), blocks: out })
}

pub fn synth_decoder_algebraic<X: Executor>(
    code: &StrategicCode,
    errors: &ErrorModel,
    limits: &Limits,
    exec: &X,
) -> Result<Decoder> {
    let composed = compose_all(code, errors, limits, exec)?;
    let lt = lambda_from(&composed, exec);
    synth_decoder_algebraic_from(&composed, &lt, code.codespace.basis(), ALGEBRAIC_TOL, exec)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchmidtOptions {
    pub tol: f64,
    /// Build an orthonormalized decoder even when the instance is not
    /// correctable, skipping the verdict and consistency checks.
    pub best_effort: bool,
}

impl Default for SchmidtOptions {
    fn default() -> Self {
        SchmidtOptions { tol: INFO_TOL, best_effort: false }
    }
}

/// Relative agreement required between ‖v_{iα}‖² and q_α / k across i.
const SCHMIDT_CONSISTENCY: f64 = 1e-6;

fn gram_schmidt(cols: &mut [Vec<C64>]) {
    for a in 0..cols.len() {
        for _ in 0..2 {
            for b in 0..a {
                let ov: C64 = cols[b].iter().zip(cols[a].iter()).map(|(x, y)| x.conj() * y).sum();
                let prev = cols[b].clone();
                cols[a].iter_mut().zip(prev.iter()).for_each(|(y, x)| *y -= ov * x);
            }
        }
        let nrm = cols[a].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 1e-10 {
            cols[a].iter_mut().for_each(|z| *z /= nrm);
        } else {
            cols[a].iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        }
    }
}

/// Decoder of the information-theoretic proof: Schmidt-decompose the joint
/// state across Q_l' versus R M E and map each |v_{iα}⟩ back to |b_i⟩.
pub fn synth_decoder_schmidt_from<X: Executor>(
    composed: &Composed,
    js: &JointState,
    basis: &CMat,
    opts: SchmidtOptions,
    exec: &X,
) -> Result<Decoder> {
    if !opts.best_effort {
        let rep = check_info_from(js, opts.tol, exec)?;
        if !rep.verdict.is_correctable() {
            let worst = rep
                .entropy
                .iter()
                .max_by(|a, b| {
                    let x = a.mutual_information.max(a.reference_deficit);
                    let y = b.mutual_information.max(b.reference_deficit);
                    x.partial_cmp(&y).unwrap_or(core::cmp::Ordering::Equal)
                })
                .map(|r| format!("memory `{}`: I(R:ME) = {:e}, reference deficit {:e}", r.m, r.mutual_information, r.reference_deficit))
                .unwrap_or_default();
            return Err(Error::NotCorrectable(worst));
        }
    }
    let (k, d) = (composed.code_dim, composed.output_dim);
    let blocks: Vec<&MemoryBlock> = composed.blocks.iter().collect();
    let out = try_map(exec, blocks, |block| -> Result<DecoderBlock> {
        let live = js.block(&block.m).map(|b| b.rho.is_some()).unwrap_or(false);
        if block.branches.is_empty() || !live {
            return finish_block(&block.m, basis, Vec::new(), d);
        }
        let ops: Vec<&CMat> = block.branches.iter().flat_map(|b| b.kraus.iter()).collect();
        let nx = ops.len();
        let rho_me = CMat::from_fn(nx, nx, |x, y| (ops[y].adjoint() * ops[x]).trace());
        let eig = herm_eig_mat(&rho_me)?;
        let qmax = eig.eigenvalues.first().copied().unwrap_or(0.0);
        let mut cols: Vec<Vec<C64>> = Vec::new();
        for (a, &q) in eig.eigenvalues.iter().enumerate() {
            if q <= 1e-10 * qmax.max(1e-300) {
                continue;
            }
            let expect = q / k as f64;
            for i in 0..k {
                let mut v = vec![C64::new(0.0, 0.0); d];
                for (x, op) in ops.iter().enumerate() {
                    let c = eig.eigenvectors[(x, a)].conj();
                    for (r, z) in v.iter_mut().enumerate() {
                        *z += c * op[(r, i)];
                    }
                }
                let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                if !opts.best_effort {
                    if (n2 - expect).abs() > SCHMIDT_CONSISTENCY * expect {
                        return Err(Error::Numerical(format!(
                            "Schmidt vector norms disagree across codewords at memory `{}`: |v_({i},{a})|^2 = {n2:e}, expected {expect:e}",
                            block.m
                        )));
                    }
                    let s = expect.sqrt();
                    v.iter_mut().for_each(|z| *z /= s);
                }
                cols.push(v);
            }
        }
        if opts.best_effort {
            gram_schmidt(&mut cols);
        }
        let pieces: Vec<CMat> = cols
            .chunks(k)
            .map(|chunk| CMat::from_fn(d, k, |r, i| chunk[i][r]))
            .collect();
        finish_block(&block.m, basis, pieces, d)
    })?;
    Ok(Decoder { method: "schmidt".into(), input_dim: d, output_dim: basis.nrows(), blocks: out })
}

pub fn synth_decoder_schmidt<X: Executor>(
    code: &StrategicCode,
    errors: &ErrorModel,
    opts: SchmidtOptions,
    limits: &Limits,
    exec: &X,
) -> Result<Decoder> {
    let composed = compose_all(code, errors, limits, exec)?;
    let js = joint_state_from(&composed, limits, exec)?;
    synth_decoder_schmidt_from(&composed, &js, code.codespace.basis(), opts, exec)
}

/// Seeded Gaussian unit vectors inside the codespace, in ambient coordinates.
pub fn random_codestates(codespace: &CodeSpace, count: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut r = rng(seed);
    let b = codespace.basis();
    (0..count)
        .map(|_| {
            let c = CMat::from_column_slice(codespace.dim(), 1, &random_state(&mut r, codespace.dim()));
            (b * c).iter().copied().collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryRow {
    pub state: usize,
    pub m: String,
    /// λ_m(ψ) = Tr 𝓓_m(𝐄 ∗ 𝐈_m ∗ |ψ⟩⟨ψ|).
    pub lambda: f64,
    /// ⟨ψ|out|ψ⟩ / λ_m(ψ), absent when λ_m(ψ) is at or below the floor.
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryReport {
    pub samples: usize,
    pub rows: Vec<RecoveryRow>,
    /// Minimum fidelity over all rows; 1 when no row carries weight.
    pub worst_fidelity: f64,
    /// Σ_m λ_m(ψ) per state.
    pub lambda_sums: Vec<f64>,
    /// max − min of λ_m(ψ) over states, per final memory state.
    pub lambda_spread: Vec<(String, f64)>,
    pub min_lambda: f64,
    pub notes: Vec<String>,
}

/// Applies 𝓓_m(Σ_{e,o} K_{e,m,o}|ψ⟩⟨ψ|K†_{e,m,o}) for each state and final
/// memory state and compares the output with |ψ⟩.
pub fn verify_recovery_from(composed: &Composed, basis: &CMat, decoder: &Decoder, states: &[Vec<C64>]) -> Result<RecoveryReport> {
    let d0 = basis.nrows();
    let proj = basis * basis.adjoint();
    let mut coords = Vec::with_capacity(states.len());
    for (s, psi) in states.iter().enumerate() {
        if psi.len() != d0 {
            return Err(Error::Shape(format!("state {s} has length {} instead of {d0}", psi.len())));
        }
        let v = CMat::from_column_slice(d0, 1, psi);
        let nrm = v.norm();
        if (nrm - 1.0).abs() > 1e-8 || (&v - &proj * &v).norm() > 1e-8 {
            return Err(Error::Model(format!("state {s} is not a unit vector in the codespace")));
        }
        coords.push((v.clone(), basis.adjoint() * v));
    }
    let mut rows = Vec::new();
    let mut lambda_sums = vec![0.0; states.len()];
    let mut lambda_spread = Vec::new();
    let mut worst: f64 = 1.0;
    let mut min_lambda = f64::INFINITY;
    for block in &composed.blocks {
        let db = decoder
            .block(&block.m)
            .ok_or_else(|| Error::Model(format!("decoder has no block for memory `{}`", block.m)))?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (s, (psi, c)) in coords.iter().enumerate() {
            let mut out = CMat::zeros(d0, d0);
            for branch in &block.branches {
                for kk in &branch.kraus {
                    let w = kk * c;
                    for dk in db.all_kraus() {
                        let y = dk * &w;
                        out += &y * y.adjoint();
                    }
                }
            }
            let lambda = out.trace().re;
            let fidelity = if lambda > RECOVERY_FLOOR {
                let f = (psi.adjoint() * &out * psi)[(0, 0)].re / lambda;
                worst = worst.min(f);
                Some(f)
            } else {
                None
            };
            lambda_sums[s] += lambda;
            lo = lo.min(lambda);
            hi = hi.max(lambda);
            min_lambda = min_lambda.min(lambda);
            rows.push(RecoveryRow { state: s, m: block.m.clone(), lambda, fidelity });
        }
        if !coords.is_empty() {
            lambda_spread.push((block.m.clone(), hi - lo));
        }
    }
    let mut notes = composed.notes();
    if states.is_empty() {
        notes.push("no states sampled; recovery holds vacuously".into());
    }
    if min_lambda < -1e-12 {
        notes.push(format!("negative recovered weight {min_lambda:e}"));
    }
    Ok(RecoveryReport {
        samples: states.len(),
        rows,
        worst_fidelity: worst,
        lambda_sums,
        lambda_spread,
        min_lambda: if min_lambda.is_finite() { min_lambda } else { 0.0 },
        notes,
    })
}

pub fn verify_recovery<X: Executor>(
    code: &StrategicCode,
    errors: &ErrorModel,
    decoder: &Decoder,
    states: &[Vec<C64>],
    limits: &Limits,
    exec: &X,
) -> Result<RecoveryReport> {
    let composed = compose_all(code, errors, limits, exec)?;
    verify_recovery_from(&composed, code.codespace.basis(), decoder, states)
}
