//! Dense complex matrix kernels on row-major buffers.
//!
//! Decompositions are delegated to `nalgebra`; everything here converts to and
//! from the row-major layout used by [`Tensor`](crate::Tensor).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::C64;

/// `a (m x k) * b (k x n)`, row-major.
pub fn matmul(a: &[C64], m: usize, k: usize, b: &[C64], n: usize) -> Vec<C64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![C64::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip.re == 0.0 && aip.im == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

/// Conjugate transpose of an `m x n` matrix.
pub fn adjoint(a: &[C64], m: usize, n: usize) -> Vec<C64> {
    let mut out = vec![C64::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j].conj();
        }
    }
    out
}

pub fn identity(n: usize) -> Vec<C64> {
    let mut out = vec![C64::zero(); n * n];
    for i in 0..n {
        out[i * n + i] = C64::new(1.0, 0.0);
    }
    out
}

pub(crate) fn to_na(a: &[C64], m: usize, n: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(m, n, a)
}

/// Thin singular value decomposition, singular values descending.
pub struct Svd {
    /// `m x r`
    pub u: Vec<C64>,
    pub s: Vec<f64>,
    /// `r x n`
    pub vh: Vec<C64>,
    pub rank: usize,
}

pub fn svd(a: &[C64], m: usize, n: usize) -> Result<Svd> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    let mat = to_na(a, m, n);
    let dec = mat.svd(true, true);
    let u = dec.u.ok_or(Error::NonFinite("svd"))?;
    let vt = dec.v_t.ok_or(Error::NonFinite("svd"))?;
    let r = dec.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| {
        dec.singular_values[j]
            .partial_cmp(&dec.singular_values[i])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut uo = vec![C64::zero(); m * r];
    let mut vo = vec![C64::zero(); r * n];
    let mut so = Vec::with_capacity(r);
    for (new, &old) in order.iter().enumerate() {
        so.push(dec.singular_values[old]);
        for i in 0..m {
            uo[i * r + new] = u[(i, old)];
        }
        for j in 0..n {
            vo[new * n + j] = vt[(old, j)];
        }
    }
    Ok(Svd {
        u: uo,
        s: so,
        vh: vo,
        rank: r,
    })
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues descending,
/// eigenvectors stored as the columns of an `n x n` row-major matrix.
pub fn hermitian_eig(a: &[C64], n: usize) -> (Vec<f64>, Vec<C64>) {
    let mut h = to_na(a, n, n);
    // symmetrize against round-off
    let ht = h.adjoint();
    h = (h + ht) * C64::new(0.5, 0.0);
    let dec = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        dec.eigenvalues[j]
            .partial_cmp(&dec.eigenvalues[i])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut vals = Vec::with_capacity(n);
    let mut vecs = vec![C64::zero(); n * n];
    for (new, &old) in order.iter().enumerate() {
        vals.push(dec.eigenvalues[old]);
        for i in 0..n {
            vecs[i * n + new] = dec.eigenvectors[(i, old)];
        }
    }
    (vals, vecs)
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Negative eigenvalues from round-off are clipped to zero.
pub fn psd_sqrt(a: &[C64], n: usize) -> Vec<C64> {
    let (vals, vecs) = hermitian_eig(a, n);
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let r = if v > 0.0 { libm::sqrt(v) } else { 0.0 };
        for i in 0..n {
            scaled[i * n + j] *= r;
        }
    }
    matmul(&scaled, n, n, &adjoint(&vecs, n, n), n)
}

/// Eigenvalues of a general square matrix (complex Schur form).
pub fn eigenvalues(a: &[C64], n: usize) -> Result<Vec<C64>> {
    let mat = to_na(a, n, n);
    let ev = mat
        .try_schur(1e-15, 2000 * n.max(1))
        .ok_or(Error::Stagnation(f64::NAN))?
        .eigenvalues()
        .ok_or(Error::NonFinite("schur"))?;
    Ok(ev.iter().copied().collect())
}

/// Orthonormalizes the columns of an `m x n` matrix by two passes of modified
/// Gram-Schmidt. Fails if a column is linearly dependent on its predecessors.
pub fn orthonormalize_columns(a: &mut [C64], m: usize, n: usize) -> Result<()> {
    for j in 0..n {
        for _pass in 0..2 {
            for k in 0..j {
                let mut dot = C64::zero();
                for i in 0..m {
                    dot += a[i * n + k].conj() * a[i * n + j];
                }
                for i in 0..m {
                    let v = a[i * n + k];
                    a[i * n + j] -= dot * v;
                }
            }
        }
        let nrm = libm::sqrt((0..m).map(|i| a[i * n + j].norm_sqr()).sum::<f64>());
        if nrm < 1e-10 {
            return Err(Error::InvalidArgument(alloc::format!(
                "column {j} is linearly dependent"
            )));
        }
        for i in 0..m {
            a[i * n + j] /= nrm;
        }
    }
    Ok(())
}

pub fn vec_norm(v: &[C64]) -> f64 {
    libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// Hermitian inner product `<a, b>`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Bilinear product `a . b` without conjugation.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of a matrix-free power iteration.
#[derive(Debug, Clone)]
pub struct Dominant {
    pub value: C64,
    pub vector: Vec<C64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Power iteration for the dominant eigenpair of a linear map.
///
/// Stops when `|A x - lambda x| <= tol |lambda|` for the unit iterate `x`.
pub fn power_iteration<F>(mut apply: F, x0: Vec<C64>, tol: f64, max_iter: usize) -> Result<Dominant>
where
    F: FnMut(&[C64]) -> Vec<C64>,
{
    let mut x = x0;
    let n0 = vec_norm(&x);
    if n0 == 0.0 || !n0.is_finite() {
        return Err(Error::InvalidArgument("power iteration start vector".into()));
    }
    x.iter_mut().for_each(|z| *z /= n0);
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let y = apply(&x);
        let lambda = inner(&x, &y);
        let r = libm::sqrt(
            y.iter()
                .zip(&x)
                .map(|(yi, xi)| (yi - lambda * xi).norm_sqr())
                .sum::<f64>(),
        );
        let ny = vec_norm(&y);
        if ny == 0.0 || !ny.is_finite() {
            return Err(Error::NonFinite("power iteration"));
        }
        residual = r / lambda.norm().max(f64::MIN_POSITIVE);
        let mut next = y;
        next.iter_mut().for_each(|z| *z /= ny);
        if residual <= tol {
            return Ok(Dominant {
                value: lambda,
                vector: next,
                iterations: it,
                residual,
            });
        }
        x = next;
    }
    Err(Error::Stagnation(residual))
}
