//! Independent evaluations of closed and infinite networks: exact patch
//! contraction, periodic tori, infinite strips and boundary MPS.
//!
//! Infinite references work on a square layout. A square cell maps directly;
//! a honeycomb cell becomes one tensor per cell by contracting its A and B
//! sites over the in-cell bond. Layout tensors carry legs `[left, down, up,
//! right]`; `right` of cell `R` meets `left` of `R + e1`, `up` meets `down`
//! of `R + e2`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{boundary_cap, DoubleLayerCell, Geometry};
use crate::linalg::{matmul, power_iteration, psd_sqrt, svd};
use crate::network::{NetworkBuilder, NodeId, TensorNetwork};
use crate::tensor::{contract_pair, Tensor};
use crate::C64;

/// Largest intermediate tensor allowed in exact contractions.
pub const EXACT_SIZE_BOUND: usize = 1 << 24;

/// Discarded weight above which a boundary MPS is rejected.
pub const MAX_DISCARDED_WEIGHT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceMethod {
    ExactPatch,
    Strip,
    BoundaryMps,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceResult {
    /// Free energy per lattice site.
    pub value: f64,
    pub method: ReferenceMethod,
    /// Torus size, strip width or boundary bond dimension.
    pub resolution: usize,
    pub error_estimate: f64,
}

/// Exact value of a closed network.
pub fn exact_contract_patch(net: &TensorNetwork) -> Result<C64> {
    if !net.is_closed() {
        return Err(Error::NotClosed(net.open_edges().len()));
    }
    Ok(net.contract_bounded(EXACT_SIZE_BOUND)?.to_scalar())
}

/// A translation-invariant network as one four-leg tensor per square cell.
#[derive(Clone, Debug)]
pub struct SquareLayout {
    /// `[left, down, up, right]`
    pub tensor: Tensor,
    pub sites_per_cell: usize,
    pub geometry: Geometry,
    /// For honeycomb cells: the A and B tensors, axes `[bond0, left|right,
    /// down|up]`, so that `tensor = sum_k a[k, l, d] b[k, r, u]`.
    pub halves: Option<(Tensor, Tensor)>,
    /// Impurity versions of `halves`, physical `(ket, bra)` axes last.
    pub impurity_halves: Option<(Tensor, Tensor)>,
}

impl SquareLayout {
    pub fn bond_dim(&self) -> usize {
        self.tensor.dims()[0]
    }
}

pub fn square_layout(cell: &DoubleLayerCell) -> Result<SquareLayout> {
    match cell.spec.geometry {
        Geometry::Square => {
            // bulk axes [right, up, left, down]
            let t = cell.bulk[0].permute(&[2, 3, 1, 0])?;
            if t.dims().iter().any(|&x| x != t.dims()[0]) {
                return Err(Error::DimensionMismatch("square layout needs equal legs".into()));
            }
            Ok(SquareLayout {
                tensor: t,
                sites_per_cell: 1,
                geometry: Geometry::Square,
                halves: None,
                impurity_halves: None,
            })
        }
        Geometry::Hexagonal => {
            let (a, b) = (&cell.bulk[0], &cell.bulk[1]);
            // a: [k, l, d]; b: [k, r, u]
            let t = contract_pair(a, &[0], b, &[0])?.permute(&[0, 1, 3, 2])?;
            if t.dims().iter().any(|&x| x != t.dims()[0]) {
                return Err(Error::DimensionMismatch("square layout needs equal legs".into()));
            }
            Ok(SquareLayout {
                tensor: t,
                sites_per_cell: 2,
                geometry: Geometry::Hexagonal,
                halves: Some((a.clone(), b.clone())),
                impurity_halves: cell.impurity.as_ref().map(|v| (v[0].clone(), v[1].clone())),
            })
        }
        Geometry::Kagome => Err(Error::UnsupportedGeometry),
    }
}

/// Ring of `width` layout tensors closed horizontally. Result axes are the
/// `width` down legs followed by the `width` up legs.
fn row_ring(t: &Tensor, width: usize) -> Result<TensorNetwork> {
    let mut b = NetworkBuilder::new();
    for i in 0..width {
        b.add_node(NodeId::plain(i), t.clone())?;
    }
    for i in 0..width {
        b.connect(i, 3, (i + 1) % width, 0)?;
    }
    for i in 0..width {
        b.open(i, 1)?;
    }
    for i in 0..width {
        b.open(i, 2)?;
    }
    b.build()
}

/// Dense periodic row transfer matrix `[down multi-index, up multi-index]`.
pub fn row_transfer_dense(layout: &SquareLayout, width: usize) -> Result<Tensor> {
    if width == 0 {
        return Err(Error::InvalidArgument("width must be positive".into()));
    }
    let d = layout.bond_dim();
    let n = d
        .checked_pow(width as u32)
        .ok_or(Error::SizeBoundExceeded(usize::MAX))?;
    if n.saturating_mul(n) > EXACT_SIZE_BOUND {
        return Err(Error::SizeBoundExceeded(n.saturating_mul(n)));
    }
    row_ring(&layout.tensor, width)?
        .contract_bounded(EXACT_SIZE_BOUND)?
        .reshape(&[n, n])
}

/// Log of `Tr(M^power)` by repeated squaring with rescaling.
fn log_trace_power(m: &Tensor, power: usize) -> Result<C64> {
    let n = m.dims()[0];
    let normalize = |x: Vec<C64>, log: &mut f64| -> Result<Vec<C64>> {
        let s = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if s == 0.0 || !s.is_finite() {
            return Err(Error::NonFinite("transfer power"));
        }
        *log += libm::log(s);
        Ok(x.into_iter().map(|z| z / s).collect())
    };
    let mut base_log = 0.0;
    let mut base = normalize(m.data().to_vec(), &mut base_log)?;
    let mut acc: Option<(Vec<C64>, f64)> = None;
    let mut p = power;
    while p > 0 {
        if p & 1 == 1 {
            acc = Some(match acc {
                None => (base.clone(), base_log),
                Some((a, la)) => {
                    let mut l = la + base_log;
                    let prod = normalize(matmul(&a, n, n, &base, n), &mut l)?;
                    (prod, l)
                }
            });
        }
        p >>= 1;
        if p > 0 {
            let mut l = 2.0 * base_log;
            base = normalize(matmul(&base, n, n, &base, n), &mut l)?;
            base_log = l;
        }
    }
    let (a, la) = acc.ok_or_else(|| Error::InvalidArgument("power must be positive".into()))?;
    let tr: C64 = (0..n).map(|i| a[i * n + i]).sum();
    Ok(tr.ln() + C64::new(la, 0.0))
}

/// Free energy per site of an `N x N` periodic torus.
///
/// Square cells: `N x N` cells. Honeycomb cells: `N/2 x N` cells, i.e. `N^2`
/// sites, so the shortest non-contractible loop has `N` edges.
pub fn periodic_torus_free_energy(cell: &DoubleLayerCell, n: usize) -> Result<ReferenceResult> {
    let layout = square_layout(cell)?;
    let (lx, ly) = match layout.geometry {
        Geometry::Square => (n, n),
        Geometry::Hexagonal => {
            if n % 2 != 0 {
                return Err(Error::InvalidArgument("honeycomb torus size must be even".into()));
            }
            (n / 2, n)
        }
        Geometry::Kagome => return Err(Error::UnsupportedGeometry),
    };
    if lx == 0 || ly < 2 {
        return Err(Error::PatchTooSmall { nx: lx, ny: ly });
    }
    let row = row_transfer_dense(&layout, lx)?;
    let log_z = log_trace_power(&row, ly)?;
    let sites = (lx * ly * layout.sites_per_cell) as f64;
    Ok(ReferenceResult {
        value: -log_z.re / sites,
        method: ReferenceMethod::ExactPatch,
        resolution: n,
        error_estimate: 0.0,
    })
}

/// Applies the periodic row of `width` layout tensors to a vector indexed by
/// the down legs, returning the vector indexed by the up legs.
fn apply_row(t: &Tensor, width: usize, v: &[C64]) -> Result<Vec<C64>> {
    let d = t.dims()[0];
    // state axes: [l0, u_1..u_i, d_{i+1}..d_w, l]
    let mut dims = vec![d; width];
    dims.insert(0, 1);
    dims.push(1);
    let mut s = Tensor::new(dims, v.to_vec())?;
    // open the ring with an explicit identity on the first horizontal bond
    let eye = Tensor::identity(d).reshape(&[d, 1, 1, d])?;
    s = contract_pair(&s, &[0, width + 1], &eye, &[1, 2])?; // [d.., l0, l]
    let mut order = vec![width];
    order.extend(0..width);
    order.push(width + 1);
    s = s.permute(&order)?;
    for i in 0..width {
        // contract d_{i+1} (axis 1 + i) and l (last) with P[l, d, u, r]
        let last = s.rank() - 1;
        let r = contract_pair(&s, &[1 + i, last], t, &[1, 0])?;
        // r axes: [l0, u_1..u_i, d_{i+2}..d_w, u, r]
        let rk = r.rank();
        let mut ord: Vec<usize> = (0..=i).collect();
        ord.push(rk - 2);
        ord.extend(i + 1..rk - 2);
        ord.push(rk - 1);
        s = r.permute(&ord)?;
    }
    Ok(s.trace_axes(0, width + 1)?.into_data())
}

/// Free energy per site of an infinite cylinder `width` cells around, from
/// the dominant eigenvalue of its row transfer operator.
pub fn strip_free_energy(cell: &DoubleLayerCell, width: usize) -> Result<ReferenceResult> {
    let layout = square_layout(cell)?;
    let d = layout.bond_dim();
    let n = d
        .checked_pow(width as u32)
        .ok_or(Error::SizeBoundExceeded(usize::MAX))?;
    if width == 0 || n.saturating_mul(d * d) > EXACT_SIZE_BOUND {
        return Err(Error::SizeBoundExceeded(n.saturating_mul(d * d)));
    }
    let cap = boundary_cap(d);
    let mut x0 = vec![C64::new(1.0, 0.0); n];
    for (i, z) in x0.iter_mut().enumerate() {
        let mut k = i;
        for _ in 0..width {
            *z *= cap[k % d] + C64::new(1e-3, 0.0);
            k /= d;
        }
    }
    let t = &layout.tensor;
    let dom = power_iteration(|v| apply_row(t, width, v).expect("row application"), x0, 1e-12, 20_000)?;
    let sites = (width * layout.sites_per_cell) as f64;
    Ok(ReferenceResult {
        value: -libm::log(dom.value.norm()) / sites,
        method: ReferenceMethod::Strip,
        resolution: width,
        error_estimate: dom.residual,
    })
}

/// Strip value at the larger of two widths. The error estimate is the
/// change between them, which bounds the remaining tail when the width
/// corrections shrink geometrically by at least half per step.
pub fn strip_extrapolated(cell: &DoubleLayerCell, narrow: usize, wide: usize) -> Result<ReferenceResult> {
    if narrow >= wide {
        return Err(Error::InvalidArgument("narrow width must be below the wide one".into()));
    }
    let a = strip_free_energy(cell, narrow)?;
    let b = strip_free_energy(cell, wide)?;
    Ok(ReferenceResult {
        error_estimate: (a.value - b.value).abs() + b.error_estimate,
        ..b
    })
}

/// Uniform infinite MPS `[left, physical, right]`.
#[derive(Clone, Debug)]
pub struct UniformMps {
    pub tensor: Tensor,
}

impl UniformMps {
    pub fn bond(&self) -> usize {
        self.tensor.dims()[0]
    }
}

/// Converged boundary environments of a square layout.
#[derive(Clone, Debug)]
pub struct BoundaryMps {
    pub layout: SquareLayout,
    /// Physical legs meet the `up` legs of the row below.
    pub top: UniformMps,
    /// Physical legs meet the `down` legs of the row above.
    pub bottom: UniformMps,
    pub chi: usize,
    /// Free energy per lattice site.
    pub f: f64,
    pub discarded_weight: f64,
    pub iterations: usize,
    /// Last change of the free-energy estimate.
    pub last_change: f64,
}

const CHANNEL_TOL: f64 = 1e-13;
const CHANNEL_MAX_ITER: usize = 100_000;

/// `sum_s B^s X B^s^dagger` for `B` stored `[a, s, b]`, `X` square on `b`.
fn right_channel(b: &Tensor, x: &[C64]) -> Vec<C64> {
    let (n, s) = (b.dims()[0], b.dims()[1]);
    let m = b.dims()[2];
    let bm = b.data();
    // y[(a, s), b'] = B[(a,s), b] X[b, b']
    let y = matmul(bm, n * s, m, x, m);
    // out[a, a'] = sum_{s, b'} y[a, s, b'] conj(B[a', s, b'])
    let bh = crate::linalg::adjoint(bm, n, s * m);
    matmul(&y, n, s * m, &bh, n)
}

/// `sum_s B^s^dagger X B^s`.
fn left_channel(b: &Tensor, x: &[C64]) -> Vec<C64> {
    let (n, s) = (b.dims()[0], b.dims()[1]);
    let m = b.dims()[2];
    let bm = b.data();
    // y[a', (s, b)] = X[a', a] B[a, (s, b)]
    let y = matmul(x, n, n, bm, s * m);
    // out[b', b] = sum_{a', s} conj(B[a', s, b']) y[a', s, b]
    let mut out = vec![C64::new(0.0, 0.0); m * m];
    for a in 0..n {
        for si in 0..s {
            let brow = &bm[(a * s + si) * m..(a * s + si + 1) * m];
            let yrow = &y[(a * s + si) * m..(a * s + si + 1) * m];
            for (bp, bv) in brow.iter().enumerate() {
                let c = bv.conj();
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                let orow = &mut out[bp * m..(bp + 1) * m];
                for (o, yv) in orow.iter_mut().zip(yrow) {
                    *o += c * yv;
                }
            }
        }
    }
    out
}

fn hermitize(x: &mut [C64], n: usize) {
    for i in 0..n {
        for j in i..n {
            let v = (x[i * n + j] + x[j * n + i].conj()) * 0.5;
            x[i * n + j] = v;
            x[j * n + i] = v.conj();
        }
    }
}

fn channel_fixed_point(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    n: usize,
    warm: Option<&Vec<C64>>,
) -> Result<(C64, Vec<C64>)> {
    let x0 = match warm {
        Some(w) if w.len() == n * n => w.clone(),
        _ => crate::linalg::identity(n),
    };
    let dom = power_iteration(
        |x| {
            let mut y = apply(x);
            hermitize(&mut y, n);
            y
        },
        x0,
        CHANNEL_TOL,
        CHANNEL_MAX_ITER,
    )?;
    let mut v = dom.vector;
    // fix the phase so the fixed point is positive semidefinite
    let tr: C64 = (0..n).map(|i| v[i * n + i]).sum();
    if tr.norm() > 0.0 {
        let ph = tr.norm() / tr;
        v.iter_mut().for_each(|z| *z *= ph);
    }
    Ok((dom.value, v))
}

struct TruncationState {
    left: Option<Vec<C64>>,
    right: Option<Vec<C64>>,
}

/// Applies the row to a boundary MPS and truncates back to `chi` in the
/// canonical gauge. `phys_in` / `phys_out` are the layout legs absorbed and
/// exposed (`2, 1` for the top boundary, `1, 2` for the bottom one).
fn grow_and_truncate(
    mps: &UniformMps,
    t: &Tensor,
    phys_in: usize,
    phys_out: usize,
    chi: usize,
    state: &mut TruncationState,
) -> Result<(UniformMps, f64)> {
    let x = mps.bond();
    let d = t.dims()[0];
    // B[(a, l), s, (b, r)] = sum_u A[a, u, b] P[l, .., u, .., r]
    let b = contract_pair(&mps.tensor, &[1], t, &[phys_in])?; // [a, b, (remaining P axes)]
                                                              // remaining P axes in order: l, phys_out, r (phys_in removed)
    let (pl, po, pr) = {
        let rest: Vec<usize> = (0..4).filter(|&k| k != phys_in).collect();
        (
            rest.iter().position(|&k| k == 0).unwrap(),
            rest.iter().position(|&k| k == phys_out).unwrap(),
            rest.iter().position(|&k| k == 3).unwrap(),
        )
    };
    let b = b
        .permute(&[0, 2 + pl, 2 + po, 1, 2 + pr])?
        .reshape(&[x * d, d, x * d])?;
    let n = x * d;
    let (_, r) = channel_fixed_point(|v| right_channel(&b, v), n, state.right.as_ref())?;
    let (_, l) = channel_fixed_point(|v| left_channel(&b, v), n, state.left.as_ref())?;
    state.right = Some(r.clone());
    state.left = Some(l.clone());
    let xr = psd_sqrt(&r, n);
    let yl = psd_sqrt(&l, n);
    let m = matmul(&yl, n, n, &xr, n);
    let dec = svd(&m, n, n)?;
    let total: f64 = dec.s.iter().map(|s| s * s).sum();
    let smax = dec.s.first().copied().unwrap_or(0.0);
    let mut keep = dec.s.iter().filter(|&&s| s > 1e-14 * smax).count().min(chi).max(1);
    keep = keep.min(dec.rank);
    let discarded: f64 = dec.s[keep..].iter().map(|s| s * s).sum::<f64>() / total.max(f64::MIN_POSITIVE);
    // left map: S^-1/2 U^dagger Y  (keep x n); right map: X V S^-1/2 (n x keep)
    let mut lm = vec![C64::new(0.0, 0.0); keep * n];
    let mut rm = vec![C64::new(0.0, 0.0); n * keep];
    for k in 0..keep {
        let w = 1.0 / libm::sqrt(dec.s[k]);
        for i in 0..n {
            // U^dagger Y: row k = sum_j conj(U[j,k]) Y[j,i]
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += dec.u[j * dec.rank + k].conj() * yl[j * n + i];
            }
            lm[k * n + i] = acc * w;
            // X V: column k = sum_j X[i,j] conj(vh[k,j])
            let mut acc2 = C64::new(0.0, 0.0);
            for j in 0..n {
                acc2 += xr[i * n + j] * dec.vh[k * n + j].conj();
            }
            rm[i * keep + k] = acc2 * w;
        }
    }
    let lt = Tensor::new(vec![keep, n], lm)?;
    let rt = Tensor::new(vec![n, keep], rm)?;
    let a = contract_pair(&lt, &[1], &b, &[0])?; // [k, s, b]
    let mut a = contract_pair(&a, &[2], &rt, &[0])?; // [k, s, k']
    let nrm = a.norm();
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::NonFinite("boundary MPS"));
    }
    a = a.scale(C64::new(1.0 / nrm, 0.0));
    if keep != x {
        state.left = None;
        state.right = None;
    }
    Ok((UniformMps { tensor: a }, discarded))
}

/// Dominant eigenvalue of the channel stacking `top`, optionally one layout
/// row, and `bottom`, with its left and right fixed points.
struct StackedChannel {
    value: C64,
    left: Tensor,
    right: Tensor,
}

fn stacked_channel(top: &UniformMps, row: Option<&Tensor>, bottom: &UniformMps) -> Result<StackedChannel> {
    let (xt, xb) = (top.bond(), bottom.bond());
    let dmid = row.map_or(1, |t| t.dims()[0]);
    let n = xt * dmid * xb;
    // left state [alpha, l, gamma]
    let apply_left = |v: &[C64]| -> Vec<C64> {
        let s = Tensor::new(vec![xt, dmid, xb], v.to_vec()).expect("state dims");
        match row {
            Some(p) => {
                let s1 = contract_pair(&s, &[0], &top.tensor, &[0]).unwrap(); // [l, g, u, b]
                let s2 = contract_pair(&s1, &[0, 2], p, &[0, 2]).unwrap(); // [g, b, d, r]
                let s3 = contract_pair(&s2, &[0, 2], &bottom.tensor, &[0, 1]).unwrap(); // [b, r, delta]
                s3.into_data()
            }
            None => {
                let s = s.reshape(&[xt, xb]).unwrap();
                let s1 = contract_pair(&s, &[0], &top.tensor, &[0]).unwrap(); // [g, x, b]
                let s2 = contract_pair(&s1, &[0, 1], &bottom.tensor, &[0, 1]).unwrap(); // [b, delta]
                s2.into_data()
            }
        }
    };
    let apply_right = |v: &[C64]| -> Vec<C64> {
        let s = Tensor::new(vec![xt, dmid, xb], v.to_vec()).expect("state dims");
        match row {
            Some(p) => {
                let s1 = contract_pair(&top.tensor, &[2], &s, &[0]).unwrap(); // [a, u, r, delta]
                let s2 = contract_pair(&s1, &[1, 2], p, &[2, 3]).unwrap(); // [a, delta, l, d]
                let s3 = contract_pair(&s2, &[1, 3], &bottom.tensor, &[2, 1]).unwrap(); // [a, l, g]
                s3.into_data()
            }
            None => {
                let s = s.reshape(&[xt, xb]).unwrap();
                let s1 = contract_pair(&top.tensor, &[2], &s, &[0]).unwrap(); // [a, x, delta]
                let s2 = contract_pair(&s1, &[1, 2], &bottom.tensor, &[1, 2]).unwrap(); // [a, g]
                s2.into_data()
            }
        }
    };
    let x0 = vec![C64::new(1.0, 0.0); n];
    let l = power_iteration(apply_left, x0.clone(), CHANNEL_TOL, CHANNEL_MAX_ITER)?;
    let r = power_iteration(apply_right, x0, CHANNEL_TOL, CHANNEL_MAX_ITER)?;
    Ok(StackedChannel {
        value: l.value,
        left: Tensor::new(vec![xt, dmid, xb], l.vector)?,
        right: Tensor::new(vec![xt, dmid, xb], r.vector)?,
    })
}

fn layout_free_energy(layout: &SquareLayout, top: &UniformMps, bottom: &UniformMps) -> Result<f64> {
    let three = stacked_channel(top, Some(&layout.tensor), bottom)?;
    let two = stacked_channel(top, None, bottom)?;
    Ok(-libm::log((three.value / two.value).norm()) / layout.sites_per_cell as f64)
}

/// Boundary-MPS contraction of the infinite network at bond dimension `chi`.
pub fn boundary_mps(cell: &DoubleLayerCell, chi: usize) -> Result<BoundaryMps> {
    if chi == 0 {
        return Err(Error::InvalidArgument("chi must be positive".into()));
    }
    let layout = square_layout(cell)?;
    let d = layout.bond_dim();
    let start = Tensor::new(vec![1, d, 1], boundary_cap(d))?;
    let mut top = UniformMps { tensor: start.clone() };
    let mut bottom = UniformMps { tensor: start };
    let mut st_top = TruncationState {
        left: None,
        right: None,
    };
    let mut st_bot = TruncationState {
        left: None,
        right: None,
    };
    let mut f_prev = f64::NAN;
    let mut change = f64::INFINITY;
    let mut discarded = 0.0;
    let max_iter = 2000;
    for it in 1..=max_iter {
        let (t2, w1) = grow_and_truncate(&top, &layout.tensor, 2, 1, chi, &mut st_top)?;
        let (b2, w2) = grow_and_truncate(&bottom, &layout.tensor, 1, 2, chi, &mut st_bot)?;
        top = t2;
        bottom = b2;
        discarded = w1.max(w2);
        if top.bond() < chi.min(d.pow(2)) && it < 3 {
            continue;
        }
        let f = layout_free_energy(&layout, &top, &bottom)?;
        change = (f - f_prev).abs();
        f_prev = f;
        if change < 1e-12 {
            if discarded > MAX_DISCARDED_WEIGHT {
                return Err(Error::ReferenceUnreliable(discarded));
            }
            return Ok(BoundaryMps {
                layout,
                top,
                bottom,
                chi,
                f,
                discarded_weight: discarded,
                iterations: it,
                last_change: change,
            });
        }
    }
    let _ = discarded;
    Err(Error::Stagnation(change))
}

pub fn boundary_mps_free_energy(cell: &DoubleLayerCell, chi: usize) -> Result<ReferenceResult> {
    let b = boundary_mps(cell, chi)?;
    Ok(ReferenceResult {
        value: b.f,
        method: ReferenceMethod::BoundaryMps,
        resolution: chi,
        error_estimate: b.last_change.max(b.discarded_weight),
    })
}

impl BoundaryMps {
    /// Environment of one layout tensor, `[left, down, up, right]`.
    pub fn environment(&self) -> Result<Tensor> {
        let ch = stacked_channel(&self.top, Some(&self.layout.tensor), &self.bottom)?;
        // left [a, l, g], right [b, r, delta]
        let e1 = contract_pair(&ch.left, &[0], &self.top.tensor, &[0])?; // [l, g, u, b]
        let e2 = contract_pair(&e1, &[1], &self.bottom.tensor, &[0])?; // [l, u, b, d, delta]
        let e3 = contract_pair(&e2, &[2, 4], &ch.right, &[0, 2])?; // [l, u, d, r]
        e3.permute(&[0, 2, 1, 3])
    }

    /// Transfer matrix of the honeycomb in-cell bond, `[A index, B index]`,
    /// normalized to unit trace.
    pub fn transfer_matrix(&self) -> Result<Tensor> {
        let (a, b) = self.layout.halves.as_ref().ok_or(Error::UnsupportedGeometry)?;
        let env = self.environment()?;
        // env [l, d, u, r]; a [k, l, d]; b [k', r, u]
        let ea = contract_pair(&env, &[0, 1], a, &[1, 2])?; // [u, r, k]
        let t = contract_pair(&ea, &[1, 0], b, &[1, 2])?; // [k, k']
        unit_trace(&t)
    }

    /// Two-site density matrix of the honeycomb in-cell bond, rows
    /// `(ket A, ket B)`, columns `(bra A, bra B)`, unit trace.
    pub fn density_matrix(&self) -> Result<Tensor> {
        let (a, b) = self.layout.impurity_halves.as_ref().ok_or(Error::UnsupportedGeometry)?;
        let env = self.environment()?;
        let d = a.dims()[3];
        // a [k, l, dn, ka, ba]; b [k, r, up, kb, bb]
        let ea = contract_pair(&env, &[0, 1], a, &[1, 2])?; // [u, r, k, ka, ba]
        let rho = contract_pair(&ea, &[2, 1, 0], b, &[0, 1, 2])?; // [ka, ba, kb, bb]
        let rho = rho.permute(&[0, 2, 1, 3])?.reshape(&[d * d, d * d])?;
        unit_trace(&rho)
    }
}

pub(crate) fn unit_trace(m: &Tensor) -> Result<Tensor> {
    let n = m.dims()[0];
    let tr: C64 = (0..n).map(|i| m.get(&[i, i])).sum();
    if tr.norm() == 0.0 {
        return Err(Error::NonFinite("zero trace"));
    }
    Ok(m.scale(tr.inv()))
}

/// Relative Frobenius distance `|x - y| / |y|`.
pub fn relative_frobenius(x: &Tensor, y: &Tensor) -> Result<f64> {
    Ok(x.sub(y)?.norm() / y.norm())
}

/// Trace norm of `x - y` for Hermitian matrices.
pub fn trace_norm_distance(x: &Tensor, y: &Tensor) -> Result<f64> {
    let d = x.sub(y)?;
    let n = d.dims()[0];
    let (vals, _) = crate::linalg::hermitian_eig(d.data(), n);
    Ok(vals.iter().map(|v| v.abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use crate::linalg::eigenvalues;

    fn ones(dims: &[usize]) -> Tensor {
        Tensor::from_fn(dims, |_| C64::new(1.0, 0.0))
    }

    #[test]
    fn all_ones_torus() {
        let cell = DoubleLayerCell::from_bulk(LatticeSpec::square(), vec![ones(&[2, 2, 2, 2])]).unwrap();
        let net = crate::lattice::build_finite_patch(&cell, 2, 2, true).unwrap();
        let z = exact_contract_patch(&net).unwrap();
        assert!((z - C64::new(256.0, 0.0)).norm() < 1e-10);
        let r = periodic_torus_free_energy(&cell, 2).unwrap();
        assert!((r.value + libm::log(256.0) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn strip_matches_dense_row() {
        let t = Tensor::from_fn(&[2, 2, 2, 2], |i| {
            C64::new(1.0 + 0.1 * (i[0] + 2 * i[3]) as f64 + 0.05 * (i[1] * i[2]) as f64, 0.0)
        });
        // bulk axes [right, up, left, down]
        let bulk = t.permute(&[3, 2, 0, 1]).unwrap();
        let cell = DoubleLayerCell::from_bulk(LatticeSpec::square(), vec![bulk]).unwrap();
        let layout = square_layout(&cell).unwrap();
        assert!(layout.tensor.max_abs_diff(&t) < 1e-15);
        for w in 1..5 {
            let row = row_transfer_dense(&layout, w).unwrap();
            let n = row.dims()[0];
            let top = eigenvalues(row.data(), n)
                .unwrap()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            let s = strip_free_energy(&cell, w).unwrap();
            assert!((s.value + libm::log(top) / w as f64).abs() < 1e-11, "w={w}");
        }
    }
}
