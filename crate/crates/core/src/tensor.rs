//! Dense complex tensors in row-major layout.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg;
use crate::C64;

/// Dense multi-dimensional array of complex scalars, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<C64>,
}

fn product(dims: &[usize]) -> usize {
    dims.iter().product()
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

fn check_finite(data: &[C64], what: &'static str) -> Result<()> {
    if data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::DimensionMismatch("axis sizes must be positive".into()));
        }
        if product(&dims) != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "dims {:?} need {} entries, got {}",
                dims,
                product(&dims),
                data.len()
            )));
        }
        check_finite(&data, "Tensor::new")?;
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Tensor {
            dims: dims.to_vec(),
            data: vec![C64::zero(); product(dims)],
        }
    }

    pub fn scalar(c: C64) -> Self {
        Tensor {
            dims: Vec::new(),
            data: vec![c],
        }
    }

    pub fn from_real(dims: &[usize], data: &[f64]) -> Result<Self> {
        Tensor::new(dims.to_vec(), data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let n = product(dims);
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..dims.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < dims[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Tensor {
            dims: dims.to_vec(),
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        Tensor {
            dims: vec![n, n],
            data: linalg::identity(n),
        }
    }

    pub fn vector(data: Vec<C64>) -> Self {
        Tensor {
            dims: vec![data.len()],
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a rank-0 tensor (or the first entry otherwise).
    pub fn to_scalar(&self) -> C64 {
        self.data[0]
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        let s = strides(&self.dims);
        self.data[idx.iter().zip(&s).map(|(i, st)| i * st).sum::<usize>()]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        linalg::vec_norm(&self.data)
    }

    pub fn scale(&self, c: C64) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn conj(&self) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.add(&other.scale(-C64::one()))
    }

    pub fn reshape(&self, dims: &[usize]) -> Result<Tensor> {
        if product(dims) != self.data.len() || dims.iter().any(|&d| d == 0) {
            return Err(Error::DimensionMismatch(format!(
                "cannot reshape {:?} to {:?}",
                self.dims, dims
            )));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data: self.data.clone(),
        })
    }

    /// Reorders axes: axis `k` of the result is axis `order[k]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Result<Tensor> {
        let r = self.rank();
        if order.len() != r {
            return Err(Error::NotAPermutation);
        }
        let mut seen = vec![false; r];
        for &o in order {
            if o >= r || seen[o] {
                return Err(Error::NotAPermutation);
            }
            seen[o] = true;
        }
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return Ok(self.clone());
        }
        let old_strides = strides(&self.dims);
        let new_dims: Vec<usize> = order.iter().map(|&o| self.dims[o]).collect();
        let src_strides: Vec<usize> = order.iter().map(|&o| old_strides[o]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; r];
        let mut src = 0usize;
        for _ in 0..n {
            data.push(self.data[src]);
            for ax in (0..r).rev() {
                idx[ax] += 1;
                src += src_strides[ax];
                if idx[ax] < new_dims[ax] {
                    break;
                }
                src -= src_strides[ax] * new_dims[ax];
                idx[ax] = 0;
            }
        }
        Ok(Tensor { dims: new_dims, data })
    }

    /// Contracts `axes_a` of `self` with `axes_b` of `b` (see [`contract_pair`]).
    pub fn contract(&self, axes_a: &[usize], b: &Tensor, axes_b: &[usize]) -> Result<Tensor> {
        contract_pair(self, axes_a, b, axes_b)
    }

    /// Contracts one axis with a vector, removing that axis.
    pub fn contract_vector(&self, axis: usize, v: &[C64]) -> Result<Tensor> {
        if axis >= self.rank() {
            return Err(Error::AxisOutOfRange {
                axis,
                rank: self.rank(),
            });
        }
        if v.len() != self.dims[axis] {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against axis of size {}",
                v.len(),
                self.dims[axis]
            )));
        }
        let outer: usize = self.dims[..axis].iter().product();
        let inner: usize = self.dims[axis + 1..].iter().product();
        let d = self.dims[axis];
        let mut data = vec![C64::zero(); outer * inner];
        for o in 0..outer {
            let out = &mut data[o * inner..(o + 1) * inner];
            for (k, vk) in v.iter().enumerate() {
                let base = (o * d + k) * inner;
                let src = &self.data[base..base + inner];
                for (x, s) in out.iter_mut().zip(src) {
                    *x += vk * s;
                }
            }
        }
        let mut dims = self.dims.clone();
        dims.remove(axis);
        Ok(Tensor { dims, data })
    }

    /// Applies a matrix `m[i, j]` to one axis: `out[.., j, ..] = sum_i self[.., i, ..] m[i, j]`.
    pub fn apply_matrix(&self, axis: usize, m: &Tensor) -> Result<Tensor> {
        if m.rank() != 2 {
            return Err(Error::DimensionMismatch("expected a matrix".into()));
        }
        let t = contract_pair(self, &[axis], m, &[0])?;
        // contracted axis moved to the end; put it back in place
        let r = self.rank();
        let mut order: Vec<usize> = (0..r - 1).collect();
        order.insert(axis, r - 1);
        t.permute(&order)
    }

    /// Partial trace over two axes of equal size.
    pub fn trace_axes(&self, a1: usize, a2: usize) -> Result<Tensor> {
        let r = self.rank();
        if a1 >= r || a2 >= r {
            return Err(Error::AxisOutOfRange {
                axis: a1.max(a2),
                rank: r,
            });
        }
        if a1 == a2 || self.dims[a1] != self.dims[a2] {
            return Err(Error::DimensionMismatch("trace axes".into()));
        }
        let keep: Vec<usize> = (0..r).filter(|&a| a != a1 && a != a2).collect();
        let mut order = keep.clone();
        order.push(a1);
        order.push(a2);
        let p = self.permute(&order)?;
        let d = self.dims[a1];
        let rest: usize = keep.iter().map(|&a| self.dims[a]).product();
        let mut data = vec![C64::zero(); rest];
        for (i, x) in data.iter_mut().enumerate() {
            for k in 0..d {
                *x += p.data[(i * d + k) * d + k];
            }
        }
        Ok(Tensor {
            dims: keep.iter().map(|&a| self.dims[a]).collect(),
            data,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Sums over paired axes of `a` and `b`.
///
/// The result carries the remaining axes of `a` (in order) followed by the
/// remaining axes of `b`.
pub fn contract_pair(a: &Tensor, axes_a: &[usize], b: &Tensor, axes_b: &[usize]) -> Result<Tensor> {
    if axes_a.len() != axes_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} axes against {} axes",
            axes_a.len(),
            axes_b.len()
        )));
    }
    for &ax in axes_a {
        if ax >= a.rank() {
            return Err(Error::AxisOutOfRange {
                axis: ax,
                rank: a.rank(),
            });
        }
    }
    for &ax in axes_b {
        if ax >= b.rank() {
            return Err(Error::AxisOutOfRange {
                axis: ax,
                rank: b.rank(),
            });
        }
    }
    let distinct = |axes: &[usize]| axes.iter().enumerate().all(|(i, x)| !axes[..i].contains(x));
    if !distinct(axes_a) || !distinct(axes_b) {
        return Err(Error::InvalidArgument("repeated contraction axis".into()));
    }
    for (&x, &y) in axes_a.iter().zip(axes_b) {
        if a.dims[x] != b.dims[y] {
            return Err(Error::DimensionMismatch(format!(
                "axis {} (size {}) against axis {} (size {})",
                x, a.dims[x], y, b.dims[y]
            )));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|x| !axes_a.contains(x)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|x| !axes_b.contains(x)).collect();
    let mut order_a = free_a.clone();
    order_a.extend_from_slice(axes_a);
    let mut order_b = axes_b.to_vec();
    order_b.extend_from_slice(&free_b);
    let pa = a.permute(&order_a)?;
    let pb = b.permute(&order_b)?;
    let m: usize = free_a.iter().map(|&x| a.dims[x]).product();
    let k: usize = axes_a.iter().map(|&x| a.dims[x]).product();
    let n: usize = free_b.iter().map(|&x| b.dims[x]).product();
    let data = linalg::matmul(&pa.data, m, k, &pb.data, n);
    let mut dims: Vec<usize> = free_a.iter().map(|&x| a.dims[x]).collect();
    dims.extend(free_b.iter().map(|&x| b.dims[x]));
    check_finite(&data, "contract_pair")?;
    Ok(Tensor { dims, data })
}

/// Tensor product; result axes are those of `a` followed by those of `b`.
pub fn outer(a: &Tensor, b: &Tensor) -> Tensor {
    let mut data = Vec::with_capacity(a.len() * b.len());
    for x in &a.data {
        for y in &b.data {
            data.push(x * y);
        }
    }
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    Tensor { dims, data }
}

/// Result of a truncated two-way split of a tensor.
#[derive(Clone, Debug)]
pub struct Factorization {
    /// Left axes followed by the new shared axis.
    pub left: Tensor,
    /// New shared axis followed by the right axes.
    pub right: Tensor,
    /// Relative squared norm of the dropped singular values.
    pub discarded_weight: f64,
    pub singular_values: Vec<f64>,
}

/// Splits `t` across a bipartition of its axes by SVD, giving each factor the
/// square root of the singular values.
///
/// Singular values below `1e-14` of the largest are always dropped; beyond
/// that the smallest ones are dropped while their cumulative relative squared
/// weight stays within `cutoff`, and at most `max_rank` are kept.
pub fn factorize(t: &Tensor, left_axes: &[usize], max_rank: Option<usize>, cutoff: f64) -> Result<Factorization> {
    if !(cutoff >= 0.0) {
        return Err(Error::NegativeCutoff(cutoff));
    }
    let r = t.rank();
    if left_axes.is_empty() || left_axes.len() >= r {
        return Err(Error::EmptyPartition);
    }
    for &ax in left_axes {
        if ax >= r {
            return Err(Error::AxisOutOfRange { axis: ax, rank: r });
        }
    }
    if left_axes.iter().enumerate().any(|(i, x)| left_axes[..i].contains(x)) {
        return Err(Error::EmptyPartition);
    }
    let right_axes: Vec<usize> = (0..r).filter(|x| !left_axes.contains(x)).collect();
    let mut order = left_axes.to_vec();
    order.extend_from_slice(&right_axes);
    let p = t.permute(&order)?;
    let m: usize = left_axes.iter().map(|&x| t.dims[x]).product();
    let n: usize = right_axes.iter().map(|&x| t.dims[x]).product();
    let dec = linalg::svd(&p.data, m, n)?;
    let total: f64 = dec.s.iter().map(|s| s * s).sum();
    let smax = dec.s.first().copied().unwrap_or(0.0);
    let mut keep = dec.s.iter().filter(|&&s| s > 1e-14 * smax).count().max(1);
    if let Some(cap) = max_rank {
        keep = keep.min(cap.max(1));
    }
    if total > 0.0 {
        while keep > 1 {
            let tail: f64 = dec.s[keep - 1..].iter().map(|s| s * s).sum::<f64>() / total;
            if tail <= cutoff {
                keep -= 1;
            } else {
                break;
            }
        }
    }
    let discarded = if total > 0.0 {
        dec.s[keep..].iter().map(|s| s * s).sum::<f64>() / total
    } else {
        0.0
    };
    let rank = dec.rank;
    let mut left = vec![C64::zero(); m * keep];
    for i in 0..m {
        for j in 0..keep {
            left[i * keep + j] = dec.u[i * rank + j] * libm::sqrt(dec.s[j]);
        }
    }
    let mut right = vec![C64::zero(); keep * n];
    for j in 0..keep {
        let sq = libm::sqrt(dec.s[j]);
        for k in 0..n {
            right[j * n + k] = dec.vh[j * n + k] * sq;
        }
    }
    let mut ldims: Vec<usize> = left_axes.iter().map(|&x| t.dims[x]).collect();
    ldims.push(keep);
    let mut rdims = vec![keep];
    rdims.extend(right_axes.iter().map(|&x| t.dims[x]));
    Ok(Factorization {
        left: Tensor::new(ldims, left)?,
        right: Tensor::new(rdims, right)?,
        discarded_weight: discarded,
        singular_values: dec.s,
    })
}
