//! Seeded random matrices for instance generation and tests.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::herm_eig_mat;
use crate::tensor::{CMat, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_c64<R: Rng>(rng: &mut R) -> C64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    C64::new(a, b) * core::f64::consts::FRAC_1_SQRT_2
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = gaussian_c64(rng);
        }
    }
    m
}

/// Unit-norm random vector.
pub fn random_state<R: Rng>(rng: &mut R, d: usize) -> Vec<C64> {
    let v = ginibre(rng, d, 1);
    let n = v.norm();
    v.iter().map(|z| z / n).collect()
}

/// Haar-random unitary via Gram–Schmidt on a Ginibre matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let g = ginibre(rng, d, d);
    orthonormalize_columns(&g)
}

/// Modified Gram–Schmidt on the columns.
pub fn orthonormalize_columns(g: &CMat) -> CMat {
    let mut q = g.clone();
    for j in 0..q.ncols() {
        for i in 0..j {
            let ov = q.column(i).dotc(&q.column(j));
            let qi = q.column(i).clone_owned();
            let mut cj = q.column_mut(j);
            cj -= qi * ov;
        }
        let n = q.column(j).norm();
        q.column_mut(j).iter_mut().for_each(|z| *z /= n);
    }
    q
}

/// Random Hermitian matrix (GUE-like).
pub fn random_hermitian<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let g = ginibre(rng, d, d);
    (&g + g.adjoint()).map(|z| z * 0.5)
}

/// Random density matrix of full rank.
pub fn random_density<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let g = ginibre(rng, d, d);
    let p = &g * g.adjoint();
    let t = p.trace();
    p.map(|z| z / t)
}

/// Kraus operators of a random CPTP map din → dout with `n` operators:
/// K_k = G_k S^{-1/2}, S = Σ G†G.
pub fn random_channel<R: Rng>(rng: &mut R, din: usize, dout: usize, n: usize) -> Vec<CMat> {
    let gs: Vec<CMat> = (0..n).map(|_| ginibre(rng, dout, din)).collect();
    normalize_kraus(&gs, 1.0)
}

/// Rescales Kraus operators so that Σ K†K = w·I, via K_k S^{-1/2}.
pub fn normalize_kraus(gs: &[CMat], w: f64) -> Vec<CMat> {
    let din = gs[0].ncols();
    let mut s = CMat::zeros(din, din);
    for g in gs {
        s += g.adjoint() * g;
    }
    let eig = herm_eig_mat(&s).expect("Hermitian by construction");
    let mut inv = eig.eigenvectors.clone();
    for k in 0..din {
        let l = 1.0 / eig.eigenvalues[k].max(1e-300).sqrt();
        inv.column_mut(k).iter_mut().for_each(|z| *z *= l);
    }
    let inv_sqrt = inv * eig.eigenvectors.adjoint();
    gs.iter().map(|g| g * &inv_sqrt * C64::new(w.sqrt(), 0.0)).collect()
}

/// Random trace non-increasing CP map: a random channel scaled by a
/// random weight in [0.5, 1].
pub fn random_subchannel<R: Rng>(rng: &mut R, din: usize, dout: usize, n: usize) -> Vec<CMat> {
    let w: f64 = 0.5 + 0.5 * rng.random::<f64>();
    let gs: Vec<CMat> = (0..n).map(|_| ginibre(rng, dout, din)).collect();
    normalize_kraus(&gs, w)
}
