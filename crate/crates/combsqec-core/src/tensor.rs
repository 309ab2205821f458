//! Dense complex operators carrying named subsystems.
//!
//! Flat indices are row-major over the declared subsystem list: the first
//! subsystem is the most significant digit.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
}

impl Subsystem {
    pub fn new(label: &str, dim: usize) -> Self {
        Subsystem { label: label.to_owned(), dim }
    }
}

/// Shorthand for building subsystem lists: `sys(&[("Q", 2), ("E", 3)])`.
pub fn sys(list: &[(&str, usize)]) -> Vec<Subsystem> {
    list.iter().map(|(l, d)| Subsystem::new(l, *d)).collect()
}

pub fn total_dim(side: &[Subsystem]) -> usize {
    side.iter().map(|s| s.dim).product()
}

fn check_unique(side: &[Subsystem]) -> Result<()> {
    for (k, s) in side.iter().enumerate() {
        if side[..k].iter().any(|t| t.label == s.label) {
            return Err(Error::DuplicateLabel(s.label.clone()));
        }
    }
    Ok(())
}

fn position(side: &[Subsystem], label: &str) -> Option<usize> {
    side.iter().position(|s| s.label == label)
}

/// Per-index bookkeeping for one side of an operator split into selected
/// and remaining subsystems.
struct Split {
    /// compact index over remaining subsystems
    kept: Vec<usize>,
    /// compact index over selected subsystems, in selection order
    sel: Vec<usize>,
    /// flat index with selected digits zeroed
    base: Vec<usize>,
    /// flat offset contributed by each compact selected index
    offset: Vec<usize>,
}

impl Split {
    fn new(side: &[Subsystem], selected: &[usize]) -> Self {
        let n = side.len();
        let mut stride = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            stride[k] = stride[k + 1] * side[k + 1].dim;
        }
        let total = total_dim(side);
        let sel_dims: Vec<usize> = selected.iter().map(|&p| side[p].dim).collect();
        let sel_total: usize = sel_dims.iter().product();
        let kept_pos: Vec<usize> = (0..n).filter(|p| !selected.contains(p)).collect();

        let mut offset = vec![0usize; sel_total];
        for (t, off) in offset.iter_mut().enumerate() {
            let mut rem = t;
            for q in (0..selected.len()).rev() {
                let d = rem % sel_dims[q];
                rem /= sel_dims[q];
                *off += d * stride[selected[q]];
            }
        }

        let mut kept = vec![0usize; total];
        let mut sel = vec![0usize; total];
        let mut base = vec![0usize; total];
        for idx in 0..total {
            let digit = |p: usize| (idx / stride[p]) % side[p].dim;
            let mut k = 0;
            for &p in &kept_pos {
                k = k * side[p].dim + digit(p);
            }
            let mut s = 0;
            let mut zeroed = idx;
            for &p in selected {
                let d = digit(p);
                s = s * side[p].dim + d;
                zeroed -= d * stride[p];
            }
            kept[idx] = k;
            sel[idx] = s;
            base[idx] = zeroed;
        }
        Split { kept, sel, base, offset }
    }
}

/// Map from new flat index to old flat index when `side` is reordered so
/// that new position `k` holds old subsystem `perm[k]`.
fn permutation_map(side: &[Subsystem], perm: &[usize]) -> Vec<usize> {
    let n = side.len();
    let mut stride = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        stride[k] = stride[k + 1] * side[k + 1].dim;
    }
    let total = total_dim(side);
    let mut map = vec![0usize; total];
    for (new, slot) in map.iter_mut().enumerate() {
        let mut rem = new;
        let mut old = 0;
        for k in (0..n).rev() {
            let d = side[perm[k]].dim;
            old += (rem % d) * stride[perm[k]];
            rem /= d;
        }
        *slot = old;
    }
    map
}

fn resolve(side: &[Subsystem], labels: &[&str]) -> Result<Vec<usize>> {
    if labels.len() != side.len() {
        return Err(Error::Shape(format!(
            "reorder lists {} labels for {} subsystems",
            labels.len(),
            side.len()
        )));
    }
    let mut perm = Vec::with_capacity(labels.len());
    for l in labels {
        let p = position(side, l).ok_or_else(|| Error::UnknownLabel((*l).to_owned()))?;
        if perm.contains(&p) {
            return Err(Error::DuplicateLabel((*l).to_owned()));
        }
        perm.push(p);
    }
    Ok(perm)
}

/// A dense complex matrix whose row and column spaces are tensor products of
/// named subsystems. Vectors use an empty column list.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOperator {
    rows: Vec<Subsystem>,
    cols: Vec<Subsystem>,
    data: CMat,
}

impl LabeledOperator {
    pub fn new(rows: Vec<Subsystem>, cols: Vec<Subsystem>, data: CMat) -> Result<Self> {
        check_unique(&rows)?;
        check_unique(&cols)?;
        if let Some(s) = rows.iter().chain(cols.iter()).find(|s| s.dim == 0) {
            return Err(Error::Shape(format!("subsystem `{}` has dimension 0", s.label)));
        }
        let (r, c) = (total_dim(&rows), total_dim(&cols));
        if data.nrows() != r || data.ncols() != c {
            return Err(Error::Shape(format!(
                "matrix is {}x{} but subsystems declare {}x{}",
                data.nrows(),
                data.ncols(),
                r,
                c
            )));
        }
        Ok(LabeledOperator { rows, cols, data })
    }

    pub(crate) fn from_parts(rows: Vec<Subsystem>, cols: Vec<Subsystem>, data: CMat) -> Self {
        debug_assert_eq!(data.nrows(), total_dim(&rows));
        debug_assert_eq!(data.ncols(), total_dim(&cols));
        LabeledOperator { rows, cols, data }
    }

    pub fn identity(side: Vec<Subsystem>) -> Result<Self> {
        let d = total_dim(&side);
        Self::new(side.clone(), side, CMat::identity(d, d))
    }

    /// Column vector over `side`.
    pub fn ket(side: Vec<Subsystem>, amplitudes: &[C64]) -> Result<Self> {
        let d = amplitudes.len();
        Self::new(side, Vec::new(), CMat::from_column_slice(d, 1, amplitudes))
    }

    pub fn scalar(value: C64) -> Self {
        LabeledOperator { rows: Vec::new(), cols: Vec::new(), data: CMat::from_element(1, 1, value) }
    }

    pub fn rows(&self) -> &[Subsystem] {
        &self.rows
    }

    pub fn cols(&self) -> &[Subsystem] {
        &self.cols
    }

    pub fn data(&self) -> &CMat {
        &self.data
    }

    pub fn into_data(self) -> CMat {
        self.data
    }

    pub fn is_vector(&self) -> bool {
        self.cols.is_empty()
    }

    /// True when rows and columns carry the same subsystem list.
    pub fn is_square_labeled(&self) -> bool {
        self.rows == self.cols
    }

    pub fn labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.rows.iter().map(|s| s.label.as_str()).collect();
        for s in &self.cols {
            if !out.contains(&s.label.as_str()) {
                out.push(s.label.as_str());
            }
        }
        out
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.rows
            .iter()
            .chain(self.cols.iter())
            .find(|s| s.label == label)
            .map(|s| s.dim)
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.norm()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_parts(self.rows.clone(), self.cols.clone(), self.data.map(|z| z * c))
    }

    pub fn dagger(&self) -> Self {
        Self::from_parts(self.cols.clone(), self.rows.clone(), self.data.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self::from_parts(self.cols.clone(), self.rows.clone(), self.data.transpose())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let other = other.reorder_like(self)?;
        Ok(Self::from_parts(self.rows.clone(), self.cols.clone(), &self.data + &other.data))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let other = other.reorder_like(self)?;
        Ok(Self::from_parts(self.rows.clone(), self.cols.clone(), &self.data - &other.data))
    }

    /// Operator product; `other`'s row subsystems must match `self`'s
    /// column subsystems as a set, and are reordered to match.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let labels: Vec<&str> = self.cols.iter().map(|s| s.label.as_str()).collect();
        let ocols: Vec<&str> = other.cols.iter().map(|s| s.label.as_str()).collect();
        let other = other.reorder(&labels, &ocols)?;
        if other.rows != self.cols {
            return Err(Error::Shape("operator product: inner subsystems differ".into()));
        }
        Ok(Self::from_parts(self.rows.clone(), other.cols.clone(), &self.data * &other.data))
    }

    /// Renames subsystems; labels absent from `map` are kept.
    pub fn relabel(&self, map: &[(&str, &str)]) -> Result<Self> {
        let rename = |side: &[Subsystem]| -> Vec<Subsystem> {
            side.iter()
                .map(|s| match map.iter().find(|(a, _)| *a == s.label) {
                    Some((_, b)) => Subsystem::new(b, s.dim),
                    None => s.clone(),
                })
                .collect()
        };
        Self::new(rename(&self.rows), rename(&self.cols), self.data.clone())
    }

    /// Reorders the subsystems on each side to the given label orders.
    pub fn reorder(&self, row_labels: &[&str], col_labels: &[&str]) -> Result<Self> {
        let rp = resolve(&self.rows, row_labels)?;
        let cp = resolve(&self.cols, col_labels)?;
        let rmap = permutation_map(&self.rows, &rp);
        let cmap = permutation_map(&self.cols, &cp);
        let data = CMat::from_fn(rmap.len(), cmap.len(), |i, j| self.data[(rmap[i], cmap[j])]);
        let rows = rp.iter().map(|&p| self.rows[p].clone()).collect();
        let cols = cp.iter().map(|&p| self.cols[p].clone()).collect();
        Ok(Self::from_parts(rows, cols, data))
    }

    /// Reorders `self` so that its subsystem lists equal `like`'s.
    pub fn reorder_like(&self, like: &Self) -> Result<Self> {
        let r: Vec<&str> = like.rows.iter().map(|s| s.label.as_str()).collect();
        let c: Vec<&str> = like.cols.iter().map(|s| s.label.as_str()).collect();
        let out = self.reorder(&r, &c)?;
        if out.rows != like.rows || out.cols != like.cols {
            return Err(Error::Shape("subsystem dimensions differ".into()));
        }
        Ok(out)
    }

    /// Kronecker product, subsystem lists concatenated `self` then `other`.
    pub fn tensor_product(&self, other: &Self) -> Result<Self> {
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let mut cols = self.cols.clone();
        cols.extend(other.cols.iter().cloned());
        check_unique(&rows)?;
        check_unique(&cols)?;
        Ok(Self::from_parts(rows, cols, self.data.kronecker(&other.data)))
    }

    /// Traces out `labels`, each of which must sit on both sides with equal
    /// dimension. Remaining subsystems keep their order.
    pub fn partial_trace(&self, labels: &[&str]) -> Result<Self> {
        let mut rsel = Vec::new();
        let mut csel = Vec::new();
        for l in labels {
            let (r, c) = (position(&self.rows, l), position(&self.cols, l));
            match (r, c) {
                (Some(r), Some(c)) if self.rows[r].dim == self.cols[c].dim => {
                    if rsel.contains(&r) {
                        return Err(Error::DuplicateLabel((*l).to_owned()));
                    }
                    rsel.push(r);
                    csel.push(c);
                }
                (None, None) => return Err(Error::UnknownLabel((*l).to_owned())),
                _ => return Err(Error::LabelMismatch((*l).to_owned())),
            }
        }
        let rs = Split::new(&self.rows, &rsel);
        let cs = Split::new(&self.cols, &csel);
        let rows: Vec<Subsystem> = (0..self.rows.len())
            .filter(|p| !rsel.contains(p))
            .map(|p| self.rows[p].clone())
            .collect();
        let cols: Vec<Subsystem> = (0..self.cols.len())
            .filter(|p| !csel.contains(p))
            .map(|p| self.cols[p].clone())
            .collect();
        let mut out = CMat::zeros(total_dim(&rows), total_dim(&cols));
        for j in 0..self.data.ncols() {
            for i in 0..self.data.nrows() {
                if rs.sel[i] == cs.sel[j] {
                    out[(rs.kept[i], cs.kept[j])] += self.data[(i, j)];
                }
            }
        }
        Ok(Self::from_parts(rows, cols, out))
    }

    /// Transposes the indices of `labels`, which must sit on both sides with
    /// equal dimension.
    pub fn partial_transpose(&self, labels: &[&str]) -> Result<Self> {
        let mut rsel = Vec::new();
        let mut csel = Vec::new();
        for l in labels {
            let (r, c) = (position(&self.rows, l), position(&self.cols, l));
            match (r, c) {
                (Some(r), Some(c)) if self.rows[r].dim == self.cols[c].dim => {
                    if rsel.contains(&r) {
                        return Err(Error::DuplicateLabel((*l).to_owned()));
                    }
                    rsel.push(r);
                    csel.push(c);
                }
                (None, None) => return Err(Error::UnknownLabel((*l).to_owned())),
                _ => return Err(Error::LabelMismatch((*l).to_owned())),
            }
        }
        let rs = Split::new(&self.rows, &rsel);
        let cs = Split::new(&self.cols, &csel);
        let mut out = CMat::zeros(self.data.nrows(), self.data.ncols());
        for j in 0..self.data.ncols() {
            for i in 0..self.data.nrows() {
                let ni = rs.base[i] + rs.offset[cs.sel[j]];
                let nj = cs.base[j] + cs.offset[rs.sel[i]];
                out[(ni, nj)] = self.data[(i, j)];
            }
        }
        Ok(Self::from_parts(self.rows.clone(), self.cols.clone(), out))
    }

    /// |A⟫ = Σ_j (A|j⟩) ⊗ |j⟩: row subsystems followed by column subsystems.
    pub fn vectorize(&self) -> Result<Self> {
        let mut side = self.rows.clone();
        side.extend(self.cols.iter().cloned());
        check_unique(&side)?;
        let (r, c) = (self.data.nrows(), self.data.ncols());
        let mut v = CMat::zeros(r * c, 1);
        for i in 0..r {
            for j in 0..c {
                v[(i * c + j, 0)] = self.data[(i, j)];
            }
        }
        Ok(Self::from_parts(side, Vec::new(), v))
    }

    /// Inverse of [`vectorize`](Self::vectorize) for the given row/column split.
    pub fn devectorize(&self, rows: Vec<Subsystem>, cols: Vec<Subsystem>) -> Result<Self> {
        if !self.is_vector() {
            return Err(Error::Shape("devectorize expects a column vector".into()));
        }
        let mut side = rows.clone();
        side.extend(cols.iter().cloned());
        let labels: Vec<&str> = side.iter().map(|s| s.label.as_str()).collect();
        let v = self.reorder(&labels, &[])?;
        if v.rows != side {
            return Err(Error::Shape("devectorize: declared dimensions differ".into()));
        }
        let (r, c) = (total_dim(&rows), total_dim(&cols));
        let data = CMat::from_fn(r, c, |i, j| v.data[(i * c + j, 0)]);
        Self::new(rows, cols, data)
    }

    /// Outer product |v⟩⟨w| of two column vectors.
    pub fn outer(v: &Self, w: &Self) -> Result<Self> {
        if !v.is_vector() || !w.is_vector() {
            return Err(Error::Shape("outer product expects column vectors".into()));
        }
        Self::new(v.rows.clone(), w.rows.clone(), &v.data * w.data.adjoint())
    }
}

/// Kronecker product of plain matrices.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Identity matrix of size `d`.
pub fn eye(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// Real-valued complex number.
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}
