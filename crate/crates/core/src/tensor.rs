//! Dense complex tensors.
//!
//! Every tensor stores its entries in row-major order: the last axis varies
//! fastest. Reshaping is therefore free, and every other module relies on
//! this linearization when it groups axes into matrix rows and columns.
//!
//! Contractions are carried out as permute, reshape and a single matrix
//! multiplication, so the GEMM kernel is the only hot path.

use std::borrow::Cow;

use faer::linalg::matmul::matmul;
use faer::{Accum, MatRef, Par};
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one are always dropped.
pub const NOISE_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for ax in (0..shape.len().saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * shape[ax + 1];
    }
    strides
}

fn check_permutation(order: &[usize], rank: usize) -> Result<()> {
    if order.len() != rank {
        return Err(Error::Permutation(order.to_vec()));
    }
    let mut seen = vec![false; rank];
    for &o in order {
        if o >= rank || seen[o] {
            return Err(Error::Permutation(order.to_vec()));
        }
        seen[o] = true;
    }
    Ok(())
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {n} entries but {} were given",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn scalar(value: C64) -> Self {
        Self { shape: Vec::new(), data: vec![value] }
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in row-major order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape: shape.to_vec(), data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_real_matrix(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let data = rows.iter().flat_map(|row| row.iter().map(|&x| C64::new(x, 0.0))).collect();
        Self { shape: vec![r, c], data }
    }

    pub fn eye(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i[0] == i[1] { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    /// Entries with independent real and imaginary parts uniform on [-1, 1).
    pub fn random(shape: &[usize], rng: &mut impl Rng) -> Self {
        Self::from_fn(shape, |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| {
            debug_assert!(i < n);
            acc * n + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, factor: C64) {
        self.data.iter_mut().for_each(|z| *z *= factor);
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    pub fn conj(&self) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    /// `self + factor * other`, shapes must agree.
    pub fn add_scaled(&self, other: &Tensor, factor: C64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!("cannot add {:?} and {:?}", self.shape, other.shape)));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + factor * b).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    /// Distance `‖self − other‖` in Frobenius norm.
    pub fn distance(&self, other: &Tensor) -> Result<f64> {
        Ok(self.add_scaled(other, C64::new(-1.0, 0.0))?.norm())
    }

    pub fn reshape(self, new_shape: &[usize]) -> Result<Self> {
        let n: usize = new_shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} ({} entries) into {new_shape:?}",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Self { shape: new_shape.to_vec(), data: self.data })
    }

    pub fn reshaped(&self, new_shape: &[usize]) -> Result<Self> {
        self.clone().reshape(new_shape)
    }

    /// Reorders axes: axis `i` of the result is axis `order[i]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.rank())?;
        Ok(self.permute_unchecked(order))
    }

    fn permute_unchecked(&self, order: &[usize]) -> Self {
        let rank = self.rank();
        if order.iter().enumerate().all(|(i, &o)| i == o) || self.data.len() <= 1 {
            return self.clone();
        }
        let in_strides = row_major_strides(&self.shape);
        let out_shape: Vec<usize> = order.iter().map(|&o| self.shape[o]).collect();
        let src: Vec<usize> = order.iter().map(|&o| in_strides[o]).collect();
        let n = self.data.len();
        let mut out = Vec::with_capacity(n);
        let inner = out_shape[rank - 1];
        let inner_stride = src[rank - 1];
        let mut idx = vec![0usize; rank - 1];
        let mut base = 0usize;
        'outer: loop {
            if inner_stride == 1 {
                out.extend_from_slice(&self.data[base..base + inner]);
            } else {
                out.extend((0..inner).map(|j| self.data[base + j * inner_stride]));
            }
            let mut ax = rank - 1;
            loop {
                if ax == 0 {
                    break 'outer;
                }
                ax -= 1;
                idx[ax] += 1;
                base += src[ax];
                if idx[ax] < out_shape[ax] {
                    break;
                }
                base -= src[ax] * out_shape[ax];
                idx[ax] = 0;
            }
        }
        Self { shape: out_shape, data: out }
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(Error::Dimension("matmul expects matrices".into()));
        }
        contract(self, &[1], other, &[0])
    }

    /// Conjugate transpose of a matrix.
    pub fn dagger(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(Error::Dimension("dagger expects a matrix".into()));
        }
        Ok(self.permute_unchecked(&[1, 0]).conj())
    }

    /// Kronecker product of two matrices, `self` acting on the major factor.
    pub fn kron(&self, other: &Tensor) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(Error::Dimension("kron expects matrices".into()));
        }
        let (a0, a1) = (self.shape[0], self.shape[1]);
        let (b0, b1) = (other.shape[0], other.shape[1]);
        contract(self, &[], other, &[])?
            .permute_unchecked(&[0, 2, 1, 3])
            .reshape(&[a0 * b0, a1 * b1])
    }

    pub fn trace(&self) -> Result<C64> {
        if self.rank() != 2 || self.shape[0] != self.shape[1] {
            return Err(Error::Dimension("trace expects a square matrix".into()));
        }
        Ok((0..self.shape[0]).map(|i| self.data[i * self.shape[0] + i]).sum())
    }
}

/// Row-major `m×k` times row-major `k×n`.
pub(crate) fn gemm(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); m * n];
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // A row-major m×k buffer is the column-major k×m transpose, so C^T = B^T A^T
    // is evaluated entirely on column-major views of the same memory.
    let lhs = MatRef::from_column_major_slice(b, n, k);
    let rhs = MatRef::from_column_major_slice(a, k, m);
    let dst = faer::MatMut::from_column_major_slice_mut(&mut c, n, m);
    matmul(dst, Accum::Replace, lhs, rhs, C64::new(1.0, 0.0), Par::Seq);
    c
}

/// Sums over paired axes. The result carries the unpaired axes of `a`
/// followed by the unpaired axes of `b`, each in their original order.
pub fn contract(a: &Tensor, axes_a: &[usize], b: &Tensor, axes_b: &[usize]) -> Result<Tensor> {
    if axes_a.len() != axes_b.len() {
        return Err(Error::Dimension(format!(
            "contracting {} axes of a against {} axes of b",
            axes_a.len(),
            axes_b.len()
        )));
    }
    let mut paired_a = vec![false; a.rank()];
    let mut paired_b = vec![false; b.rank()];
    for (&i, &j) in axes_a.iter().zip(axes_b) {
        if i >= a.rank() || j >= b.rank() || paired_a[i] || paired_b[j] {
            return Err(Error::Dimension(format!("invalid contraction axes {axes_a:?} / {axes_b:?}")));
        }
        if a.shape[i] != b.shape[j] {
            return Err(Error::Dimension(format!(
                "axis {i} of a has extent {} but axis {j} of b has extent {}",
                a.shape[i], b.shape[j]
            )));
        }
        paired_a[i] = true;
        paired_b[j] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !paired_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&j| !paired_b[j]).collect();

    let order_a: Vec<usize> = free_a.iter().chain(axes_a).copied().collect();
    let order_b: Vec<usize> = axes_b.iter().chain(&free_b).copied().collect();
    let pa: Cow<'_, Tensor> = if order_a.iter().enumerate().all(|(i, &o)| i == o) {
        Cow::Borrowed(a)
    } else {
        Cow::Owned(a.permute_unchecked(&order_a))
    };
    let pb: Cow<'_, Tensor> = if order_b.iter().enumerate().all(|(i, &o)| i == o) {
        Cow::Borrowed(b)
    } else {
        Cow::Owned(b.permute_unchecked(&order_b))
    };

    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = axes_a.iter().map(|&i| a.shape[i]).product();
    let n: usize = free_b.iter().map(|&j| b.shape[j]).product();
    let data = gemm(pa.data(), pb.data(), m, k, n);
    let shape: Vec<usize> = free_a
        .iter()
        .map(|&i| a.shape[i])
        .chain(free_b.iter().map(|&j| b.shape[j]))
        .collect();
    Ok(Tensor { shape, data })
}

/// Groups `row_axes` into matrix rows and the remaining axes (in order) into
/// columns. Returns the permuted tensor, row extents, column extents.
fn as_matrix(t: &Tensor, row_axes: &[usize]) -> Result<(Tensor, Vec<usize>, Vec<usize>)> {
    let rank = t.rank();
    let mut is_row = vec![false; rank];
    for &ax in row_axes {
        if ax >= rank || is_row[ax] {
            return Err(Error::Dimension(format!("invalid row axes {row_axes:?} for rank {rank}")));
        }
        is_row[ax] = true;
    }
    let col_axes: Vec<usize> = (0..rank).filter(|&ax| !is_row[ax]).collect();
    if row_axes.is_empty() || col_axes.is_empty() {
        return Err(Error::Dimension("split must leave both groups non-empty".into()));
    }
    let order: Vec<usize> = row_axes.iter().chain(&col_axes).copied().collect();
    let row_dims = row_axes.iter().map(|&a| t.shape[a]).collect();
    let col_dims = col_axes.iter().map(|&a| t.shape[a]).collect();
    Ok((t.permute_unchecked(&order), row_dims, col_dims))
}

fn to_row_major(m: MatRef<'_, C64>, cols: usize) -> Vec<C64> {
    let rows = m.nrows();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(m[(i, j)]);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Isometry with the row axes followed by the kept-rank axis.
    pub u: Tensor,
    /// Kept singular values, descending.
    pub s: Vec<f64>,
    /// Isometry with the kept-rank axis followed by the column axes.
    pub vdag: Tensor,
    /// Sum of squares of the dropped singular values.
    pub discarded_weight: f64,
}

impl SvdResult {
    /// `u · diag(s) · vdag`.
    pub fn reconstruct(&self) -> Result<Tensor> {
        let k = self.s.len();
        let mut us = self.u.clone();
        for (i, z) in us.data.iter_mut().enumerate() {
            *z *= self.s[i % k];
        }
        contract(&us, &[us.rank() - 1], &self.vdag, &[0])
    }
}

/// Truncated singular value decomposition across the split `row_axes | rest`.
///
/// Keeps `min(max_rank, #{s_i > cutoff·s_0})` values, where the cutoff is at
/// least [`NOISE_FLOOR`].
pub fn svd_truncate(t: &Tensor, row_axes: &[usize], max_rank: usize, rel_cutoff: f64) -> Result<SvdResult> {
    if max_rank == 0 {
        return Err(Error::InvalidParameter("max_rank must be positive".into()));
    }
    let (p, row_dims, col_dims) = as_matrix(t, row_axes)?;
    let m: usize = row_dims.iter().product();
    let n: usize = col_dims.iter().product();
    if !p.is_finite() {
        return Err(Error::Backend("svd input contains non-finite entries".into()));
    }
    let mat = MatRef::from_row_major_slice(p.data(), m, n);
    let svd = mat.thin_svd().map_err(|e| Error::Backend(format!("svd: {e:?}")))?;
    let s_all: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let s0 = s_all.first().copied().unwrap_or(0.0);
    if !(s0 > 0.0) {
        return Err(Error::ZeroTensor);
    }
    let cutoff = s0 * rel_cutoff.max(NOISE_FLOOR);
    let kept = s_all.iter().take_while(|&&s| s > cutoff).count().clamp(1, max_rank);
    let discarded_weight = s_all[kept..].iter().map(|s| s * s).sum();

    let u_full = svd.U();
    let v_full = svd.V();
    let u_data = to_row_major(u_full, kept);
    let mut vdag_data = Vec::with_capacity(kept * n);
    for j in 0..kept {
        for c in 0..n {
            vdag_data.push(v_full[(c, j)].conj());
        }
    }
    let mut u_shape = row_dims;
    u_shape.push(kept);
    let mut v_shape = vec![kept];
    v_shape.extend(col_dims);
    Ok(SvdResult {
        u: Tensor::new(u_shape, u_data)?,
        s: s_all[..kept].to_vec(),
        vdag: Tensor::new(v_shape, vdag_data)?,
        discarded_weight,
    })
}

/// All singular values of the matrix obtained from the split, descending.
pub fn singular_values(t: &Tensor, row_axes: &[usize]) -> Result<Vec<f64>> {
    let (p, row_dims, col_dims) = as_matrix(t, row_axes)?;
    let m: usize = row_dims.iter().product();
    let n: usize = col_dims.iter().product();
    let mat = MatRef::from_row_major_slice(p.data(), m, n);
    mat.singular_values().map_err(|e| Error::Backend(format!("svd: {e:?}")))
}

/// Thin QR factorization `t = q · r` across the split; `q` is an isometry
/// with the row axes followed by a new bond axis.
pub fn qr(t: &Tensor, row_axes: &[usize]) -> Result<(Tensor, Tensor)> {
    let (p, row_dims, col_dims) = as_matrix(t, row_axes)?;
    let m: usize = row_dims.iter().product();
    let n: usize = col_dims.iter().product();
    let k = m.min(n);
    let mat = MatRef::from_row_major_slice(p.data(), m, n);
    let f = mat.qr();
    let q = f.compute_thin_Q();
    let r = f.thin_R();
    let mut q_shape = row_dims;
    q_shape.push(k);
    let mut r_shape = vec![k];
    r_shape.extend(col_dims);
    Ok((
        Tensor::new(q_shape, to_row_major(q.as_ref(), k))?,
        Tensor::new(r_shape, to_row_major(r, n))?,
    ))
}

/// Thin LQ factorization `t = l · q`; `q` has orthonormal rows and carries
/// a new bond axis followed by the column axes.
pub fn lq(t: &Tensor, row_axes: &[usize]) -> Result<(Tensor, Tensor)> {
    let (p, row_dims, col_dims) = as_matrix(t, row_axes)?;
    let m: usize = row_dims.iter().product();
    let n: usize = col_dims.iter().product();
    let k = m.min(n);
    // t = (t^H)^H = (Q R)^H = R^H Q^H
    let adj = MatRef::from_row_major_slice(p.data(), m, n).adjoint().to_owned();
    let f = adj.qr();
    let q = f.compute_thin_Q(); // n×k
    let r = f.thin_R(); // k×m
    let mut l_data = Vec::with_capacity(m * k);
    for i in 0..m {
        for j in 0..k {
            l_data.push(r[(j, i)].conj());
        }
    }
    let mut q_data = Vec::with_capacity(k * n);
    for j in 0..k {
        for c in 0..n {
            q_data.push(q[(c, j)].conj());
        }
    }
    let mut l_shape = row_dims;
    l_shape.push(k);
    let mut q_shape = vec![k];
    q_shape.extend(col_dims);
    Ok((Tensor::new(l_shape, l_data)?, Tensor::new(q_shape, q_data)?))
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matrix whose columns are the eigenvectors.
pub fn eigh(m: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    if m.rank() != 2 || m.shape[0] != m.shape[1] {
        return Err(Error::Dimension("eigh expects a square matrix".into()));
    }
    let n = m.shape[0];
    let mat = MatRef::from_row_major_slice(m.data(), n, n);
    let e = mat
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Backend(format!("eigh: {e:?}")))?;
    let vals = e.S().column_vector().iter().map(|z| z.re).collect();
    let vecs = Tensor::new(vec![n, n], to_row_major(e.U(), n))?;
    Ok((vals, vecs))
}

/// Eigenvalues and right eigenvectors (as matrix columns) of a general square matrix.
pub fn eig(m: &Tensor) -> Result<(Vec<C64>, Tensor)> {
    if m.rank() != 2 || m.shape[0] != m.shape[1] {
        return Err(Error::Dimension("eig expects a square matrix".into()));
    }
    let n = m.shape[0];
    let mat = MatRef::from_row_major_slice(m.data(), n, n).to_owned();
    let e = mat.eigen().map_err(|e| Error::Backend(format!("eig: {e:?}")))?;
    let vals = e.S().column_vector().iter().copied().collect();
    let vecs = Tensor::new(vec![n, n], to_row_major(e.U(), n))?;
    Ok((vals, vecs))
}

/// `exp(factor · h)` for Hermitian `h`.
pub fn expm_hermitian(h: &Tensor, factor: C64) -> Result<Tensor> {
    let (vals, vecs) = eigh(h)?;
    let n = vals.len();
    let mut scaled = vecs.clone();
    let phases: Vec<C64> = vals.iter().map(|&v| (factor * v).exp()).collect();
    for row in scaled.data.chunks_mut(n) {
        for (x, p) in row.iter_mut().zip(&phases) {
            *x *= p;
        }
    }
    scaled.matmul(&vecs.dagger()?)
}
