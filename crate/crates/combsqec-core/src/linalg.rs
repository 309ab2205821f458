//! Spectral decompositions and entropies.

use alloc::vec::Vec;

use nalgebra::{SymmetricEigen, SVD};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::tensor::{total_dim, CMat, LabeledOperator, Subsystem, C64, ZERO};

/// Asymmetry accepted before Hermitian decompositions, relative to max(1, ‖A‖_F).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues at or below this count as zero in entropies.
pub const ENTROPY_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResult {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns in eigenvalue order.
    pub eigenvectors: CMat,
}

impl SpectralResult {
    pub fn reconstruct(&self) -> CMat {
        let d = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for k in 0..d {
            let l = self.eigenvalues[k];
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= l);
        }
        scaled * self.eigenvectors.adjoint()
    }
}

/// Rotates a vector so its largest-magnitude entry (first on ties) is real positive.
fn fix_phase(col: &mut [C64]) {
    let mut best = 0;
    let mut mag = -1.0;
    for (k, z) in col.iter().enumerate() {
        let m = z.norm();
        if m > mag + 1e-12 {
            mag = m;
            best = k;
        }
    }
    if mag > 0.0 {
        let ph = col[best].conj() / mag;
        col.iter_mut().for_each(|z| *z *= ph);
    }
}

pub fn hermitian_defect(a: &CMat) -> f64 {
    (a - a.adjoint()).norm()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
pub fn herm_eig_mat(a: &CMat) -> Result<SpectralResult> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape("eigendecomposition of a non-square matrix".into()));
    }
    let defect = hermitian_defect(a);
    if defect > HERMITIAN_TOL * a.norm().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let d = a.nrows();
    if d == 0 {
        return Ok(SpectralResult { eigenvalues: Vec::new(), eigenvectors: CMat::zeros(0, 0) });
    }
    let sym = (a + a.adjoint()).map(|z| z * 0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap_or(core::cmp::Ordering::Equal)
    });
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = CMat::zeros(d, d);
    for (new, &old) in order.iter().enumerate() {
        let mut col: Vec<C64> = eig.eigenvectors.column(old).iter().copied().collect();
        fix_phase(&mut col);
        eigenvectors.column_mut(new).copy_from_slice(&col);
    }
    Ok(SpectralResult { eigenvalues, eigenvectors })
}

/// Eigendecomposition of a square labeled operator.
pub fn herm_eig(a: &LabeledOperator) -> Result<SpectralResult> {
    herm_eig_mat(a.data())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMat) -> Result<f64> {
    Ok(herm_eig_mat(a)?.eigenvalues.last().copied().unwrap_or(0.0))
}

/// Thin singular value decomposition `A = U diag(s) V†`, singular values descending.
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v_t: CMat,
}

pub fn svd(a: &CMat) -> Svd {
    let (r, c) = (a.nrows(), a.ncols());
    let k = r.min(c);
    if k == 0 {
        return Svd { u: CMat::zeros(r, 0), s: Vec::new(), v_t: CMat::zeros(0, c) };
    }
    let dec = SVD::new(a.clone(), true, true);
    let u0 = dec.u.expect("left vectors requested");
    let vt0 = dec.v_t.expect("right vectors requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        dec.singular_values[j]
            .partial_cmp(&dec.singular_values[i])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut u = CMat::zeros(r, k);
    let mut v_t = CMat::zeros(k, c);
    let mut s = Vec::with_capacity(k);
    for (new, &old) in order.iter().enumerate() {
        s.push(dec.singular_values[old]);
        u.column_mut(new).copy_from(&u0.column(old));
        v_t.row_mut(new).copy_from(&vt0.row(old));
    }
    Svd { u, s, v_t }
}

/// Largest singular value.
pub fn op_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    svd(a).s.first().copied().unwrap_or(0.0)
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `a`, as columns. Singular values at or below `cutoff` count as zero.
pub fn complement_basis(a: &CMat, cutoff: f64) -> CMat {
    let d = a.nrows();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    if a.ncols() > 0 {
        let dec = svd(a);
        for (k, &s) in dec.s.iter().enumerate() {
            if s > cutoff {
                basis.push(dec.u.column(k).iter().copied().collect());
            }
        }
    }
    let rank = basis.len();
    for e in 0..d {
        let mut v = alloc::vec![ZERO; d];
        v[e] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in &basis {
                let ov: C64 = b.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
                v.iter_mut().zip(b.iter()).for_each(|(y, x)| *y -= ov * x);
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|z| *z /= n);
            basis.push(v);
        }
        if basis.len() == d {
            break;
        }
    }
    let extra = basis.len() - rank;
    CMat::from_fn(d, extra, |i, j| basis[rank + j][i])
}

#[derive(Clone, Debug)]
pub struct Schmidt {
    /// Descending, strictly positive.
    pub coefficients: Vec<f64>,
    /// Columns over the left subsystems.
    pub left: CMat,
    /// Columns over the right subsystems.
    pub right: CMat,
    pub left_side: Vec<Subsystem>,
    pub right_side: Vec<Subsystem>,
}

/// Relative cutoff below which Schmidt coefficients are discarded.
pub const SCHMIDT_CUTOFF: f64 = 1e-12;

/// Schmidt decomposition of a vector across `left_labels` versus the rest.
pub fn schmidt(v: &LabeledOperator, left_labels: &[&str]) -> Result<Schmidt> {
    if !v.is_vector() {
        return Err(Error::Shape("schmidt expects a column vector".into()));
    }
    let all: Vec<&str> = v.rows().iter().map(|s| s.label.as_str()).collect();
    let right: Vec<&str> = all.iter().copied().filter(|l| !left_labels.contains(l)).collect();
    if left_labels.is_empty() || right.is_empty() {
        return Err(Error::Shape("schmidt needs two nonempty sides".into()));
    }
    let mut order: Vec<&str> = left_labels.to_vec();
    order.extend(right.iter().copied());
    let w = v.reorder(&order, &[])?;
    let left_side: Vec<Subsystem> = w.rows()[..left_labels.len()].to_vec();
    let right_side: Vec<Subsystem> = w.rows()[left_labels.len()..].to_vec();
    let (dl, dr) = (total_dim(&left_side), total_dim(&right_side));
    let m = CMat::from_fn(dl, dr, |a, b| w.data()[(a * dr + b, 0)]);
    let dec = svd(&m);
    let smax = dec.s.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..dec.s.len()).filter(|&k| dec.s[k] > SCHMIDT_CUTOFF * smax.max(1e-300)).collect();
    let left = CMat::from_fn(dl, keep.len(), |a, k| dec.u[(a, keep[k])]);
    let right = CMat::from_fn(dr, keep.len(), |b, k| dec.v_t[(keep[k], b)]);
    Ok(Schmidt {
        coefficients: keep.iter().map(|&k| dec.s[k]).collect(),
        left,
        right,
        left_side,
        right_side,
    })
}

/// S(ρ) in bits for a PSD matrix; the input is normalized by its trace.
pub fn entropy_mat(rho: &CMat) -> Result<f64> {
    let eig = herm_eig_mat(rho)?;
    let tr: f64 = eig.eigenvalues.iter().sum();
    let min = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if min < -1e-8 * tr.abs().max(1.0) {
        return Err(Error::NotPsd(min));
    }
    if tr <= 0.0 {
        return Err(Error::Numerical("entropy of a zero operator".into()));
    }
    let mut s = 0.0;
    for &l in &eig.eigenvalues {
        let p = l / tr;
        if p > ENTROPY_FLOOR {
            s -= p * p.log2();
        }
    }
    Ok(s)
}

pub fn entropy(rho: &LabeledOperator) -> Result<f64> {
    entropy_mat(rho.data())
}

/// Polar decomposition `A = U P` with `P = √(A†A)`; on null directions `U`
/// pairs left and right singular vectors.
pub fn polar_mat(a: &CMat) -> Result<(CMat, CMat)> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape("polar decomposition of a non-square matrix".into()));
    }
    let dec = svd(a);
    let d = a.nrows();
    let cutoff = 1e-12 * dec.s.first().copied().unwrap_or(0.0).max(1e-300);
    let rank = dec.s.iter().filter(|&&s| s > cutoff).count();
    let mut u = CMat::zeros(d, d);
    for k in 0..rank {
        u += dec.u.column(k) * dec.v_t.row(k);
    }
    if rank < d {
        let range = CMat::from_fn(d, rank, |i, k| dec.u[(i, k)]);
        let corange = CMat::from_fn(d, rank, |i, k| dec.v_t[(k, i)].conj());
        let left = complement_basis(&range, 0.5);
        let right = complement_basis(&corange, 0.5);
        u += &left * right.adjoint();
    }
    let mut sv = dec.v_t.adjoint();
    for k in 0..d {
        let s = dec.s[k];
        sv.column_mut(k).iter_mut().for_each(|z| *z *= s);
    }
    let p = sv * &dec.v_t;
    let p = (&p + p.adjoint()).map(|z| z * 0.5);
    Ok((u, p))
}

pub fn polar(a: &LabeledOperator) -> Result<(LabeledOperator, LabeledOperator)> {
    let (u, p) = polar_mat(a.data())?;
    let cols = a.cols().to_vec();
    Ok((
        LabeledOperator::new(a.rows().to_vec(), cols.clone(), u)?,
        LabeledOperator::new(cols.clone(), cols, p)?,
    ))
}

/// Eigenvalue-clipped projection onto the PSD cone.
pub fn psd_part(a: &CMat) -> Result<CMat> {
    let eig = herm_eig_mat(a)?;
    let d = eig.eigenvalues.len();
    let mut scaled = eig.eigenvectors.clone();
    for k in 0..d {
        let l = eig.eigenvalues[k].max(0.0);
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= l);
    }
    Ok(scaled * eig.eigenvectors.adjoint())
}

/// Principal square root of a PSD matrix.
pub fn psd_sqrt(a: &CMat) -> Result<CMat> {
    let eig = herm_eig_mat(a)?;
    let d = eig.eigenvalues.len();
    let mut scaled = eig.eigenvectors.clone();
    for k in 0..d {
        let l = eig.eigenvalues[k].max(0.0).sqrt();
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= l);
    }
    Ok(scaled * eig.eigenvectors.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{ginibre, random_density, random_hermitian, random_unitary, rng};
    use crate::tensor::{eye, re, sys, ONE};
    use proptest::prelude::*;

    #[test]
    fn eig_of_z() {
        let z = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        let e = herm_eig_mat(&z).unwrap();
        assert_eq!(e.eigenvalues, alloc::vec![1.0, -1.0]);
    }

    #[test]
    fn eig_of_degenerate_half_identity() {
        let e = herm_eig_mat(&eye(2).map(|z| z * 0.5)).unwrap();
        assert!(e.eigenvalues.iter().all(|l| (l - 0.5).abs() < 1e-15));
        assert!((e.eigenvectors.adjoint() * &e.eigenvectors - eye(2)).norm() < 1e-14);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut r = rng(11);
        let a = random_hermitian(&mut r, 7);
        let e = herm_eig_mat(&a).unwrap();
        assert!((e.reconstruct() - &a).norm() <= 1e-10 * a.norm());
        assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eig_rejects_non_hermitian_with_defect() {
        let a = CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        match herm_eig_mat(&a) {
            Err(Error::NotHermitian(d)) => assert!((d - 2f64.sqrt()).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eig_is_deterministic() {
        let mut r = rng(12);
        let a = random_hermitian(&mut r, 5);
        assert_eq!(herm_eig_mat(&a).unwrap(), herm_eig_mat(&a.clone()).unwrap());
    }

    #[test]
    fn schmidt_of_bell_and_product_states() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let bell = LabeledOperator::ket(sys(&[("A", 2), ("B", 2)]), &[re(h), ZERO, ZERO, re(h)]).unwrap();
        let s = schmidt(&bell, &["A"]).unwrap();
        assert_eq!(s.coefficients.len(), 2);
        assert!(s.coefficients.iter().all(|c| (c - h).abs() < 1e-14));
        let prod = LabeledOperator::ket(sys(&[("A", 2), ("B", 2)]), &[ZERO, re(0.6), ZERO, re(0.8)]).unwrap();
        let s = schmidt(&prod, &["B"]).unwrap();
        assert_eq!(s.coefficients.len(), 1);
        assert!((s.coefficients[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn schmidt_rejects_empty_side() {
        let v = LabeledOperator::ket(sys(&[("A", 2)]), &[ONE, ZERO]).unwrap();
        assert!(schmidt(&v, &["A"]).is_err());
        assert!(schmidt(&v, &[]).is_err());
    }

    fn reconstruct(s: &Schmidt) -> CMat {
        let (dl, dr) = (s.left.nrows(), s.right.nrows());
        let mut v = CMat::zeros(dl * dr, 1);
        for (k, c) in s.coefficients.iter().enumerate() {
            for a in 0..dl {
                for b in 0..dr {
                    v[(a * dr + b, 0)] += s.left[(a, k)] * s.right[(b, k)] * *c;
                }
            }
        }
        v
    }

    #[test]
    fn schmidt_reconstructs_random_vector() {
        let mut r = rng(13);
        let amps: Vec<C64> = ginibre(&mut r, 16, 1).iter().copied().collect();
        let v = LabeledOperator::ket(sys(&[("A", 4), ("B", 4)]), &amps).unwrap();
        let s = schmidt(&v, &["A"]).unwrap();
        assert!((reconstruct(&s) - v.data()).norm() <= 1e-10 * v.norm_fro());
        let k = s.coefficients.len();
        assert!((s.left.adjoint() * &s.left - eye(k)).norm() < 1e-10);
        assert!((s.right.adjoint() * &s.right - eye(k)).norm() < 1e-10);
    }

    #[test]
    fn entropy_spot_values() {
        let pure = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        assert_eq!(entropy_mat(&pure).unwrap(), 0.0);
        assert!((entropy_mat(&eye(2).map(|z| z * 0.5)).unwrap() - 1.0).abs() < 1e-14);
        let d = CMat::from_row_slice(2, 2, &[re(0.75), ZERO, ZERO, re(0.25)]);
        let oracle = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((entropy_mat(&d).unwrap() - oracle).abs() < 1e-14);
        assert!((oracle - 0.811_278_124_459_132_8).abs() < 1e-15);
    }

    #[test]
    fn entropy_rejects_negative_operator() {
        let d = CMat::from_row_slice(2, 2, &[re(1.1), ZERO, ZERO, re(-0.1)]);
        assert!(matches!(entropy_mat(&d), Err(Error::NotPsd(_))));
    }

    #[test]
    fn polar_of_unitary_and_degenerate() {
        let mut r = rng(14);
        let v = random_unitary(&mut r, 3);
        let (u, p) = polar_mat(&v).unwrap();
        assert!((u - &v).norm() < 1e-10);
        assert!((p - eye(3)).norm() < 1e-10);
        let d = CMat::from_row_slice(2, 2, &[re(2.0), ZERO, ZERO, ZERO]);
        let (u, p) = polar_mat(&d).unwrap();
        assert!((p - &d).norm() < 1e-14);
        assert!((u - eye(2)).norm() < 1e-14);
    }

    #[test]
    fn polar_reconstructs_random() {
        let mut r = rng(15);
        let a = ginibre(&mut r, 4, 4);
        let (u, p) = polar_mat(&a).unwrap();
        assert!((&u * &p - &a).norm() <= 1e-10 * a.norm());
        assert!((u.adjoint() * &u - eye(4)).norm() <= 1e-10);
        assert!(min_eigenvalue(&p).unwrap() > -1e-12);
    }

    proptest! {
        #[test]
        fn eigenvalues_sum_to_trace(seed in 0u64..1000, d in 1usize..7) {
            let mut r = rng(seed);
            let a = random_hermitian(&mut r, d);
            let e = herm_eig_mat(&a).unwrap();
            let s: f64 = e.eigenvalues.iter().sum();
            prop_assert!((s - a.trace().re).abs() <= 1e-10 * a.norm().max(1.0));
        }

        #[test]
        fn schmidt_coefficients_carry_norm(seed in 0u64..1000) {
            let mut r = rng(seed);
            let amps: Vec<C64> = ginibre(&mut r, 12, 1).iter().copied().collect();
            let v = LabeledOperator::ket(sys(&[("A", 3), ("B", 4)]), &amps).unwrap();
            let s = schmidt(&v, &["B"]).unwrap();
            let n2: f64 = s.coefficients.iter().map(|c| c * c).sum();
            prop_assert!((n2 - v.norm_fro().powi(2)).abs() <= 1e-10 * n2);
        }

        #[test]
        fn entropy_is_unitarily_invariant(seed in 0u64..1000) {
            let mut r = rng(seed);
            let rho = random_density(&mut r, 4);
            let u = random_unitary(&mut r, 4);
            let s1 = entropy_mat(&rho).unwrap();
            let s2 = entropy_mat(&(&u * &rho * u.adjoint())).unwrap();
            prop_assert!((s1 - s2).abs() <= 1e-9);
        }
    }
}
