//! Benchmark states: AKLT PEPS, random rotation-symmetric PEPS, and the
//! restructuring of a kagome PEPS onto a decorated honeycomb.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{DoubleLayerCell, Geometry, LatticeSpec, PepsCell};
use crate::linalg::{matmul, orthonormalize_columns};
use crate::tensor::{contract_pair, factorize, outer, Tensor};
use crate::C64;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Maps `z` virtual spin-1/2 onto their symmetric subspace, spin `z/2`.
/// Axes `[p, w1..wz]`; `p` counts down spins, virtual index 0 is up.
pub fn symmetric_projector(z: usize) -> Tensor {
    let mut dims = vec![z + 1];
    dims.extend(core::iter::repeat(2).take(z));
    Tensor::from_fn(&dims, |idx| {
        let downs = idx[1..].iter().filter(|&&w| w == 1).count();
        if downs == idx[0] {
            c(1.0 / libm::sqrt(binomial(z, downs)))
        } else {
            c(0.0)
        }
    })
}

/// AKLT state with one singlet per bond. The antisymmetric matrix is
/// absorbed on the tail slot of every bond.
pub fn aklt_peps(spec: &LatticeSpec) -> Result<PepsCell> {
    spec.validate()?;
    let eps = Tensor::from_real(&[2, 2], &[0.0, 1.0, -1.0, 0.0])?;
    let mut tensors = Vec::with_capacity(spec.sites);
    for s in 0..spec.sites {
        let z = spec.coordination(s);
        let mut t = symmetric_projector(z);
        for slot in 0..z {
            let (_, tail) = spec.slot_bond(s, slot).ok_or(Error::UnsupportedGeometry)?;
            if tail {
                t = t.apply_matrix(slot + 1, &eps)?;
            }
        }
        tensors.push(t);
    }
    PepsCell::new(spec.clone(), tensors)
}

/// Spin operators `(Sz, S+, S-)` for spin `(d-1)/2` in the basis where index
/// `p` has `m = S - p`.
pub fn spin_operators(d: usize) -> (Tensor, Tensor, Tensor) {
    let s = (d as f64 - 1.0) / 2.0;
    let sz = Tensor::from_fn(&[d, d], |i| if i[0] == i[1] { c(s - i[0] as f64) } else { c(0.0) });
    let sp = Tensor::from_fn(&[d, d], |i| {
        // <m+1| S+ |m>, m = s - i[1]
        if i[0] + 1 == i[1] {
            let m = s - i[1] as f64;
            c(libm::sqrt(s * (s + 1.0) - m * (m + 1.0)))
        } else {
            c(0.0)
        }
    });
    let sm = Tensor::from_fn(&[d, d], |i| sp.get(&[i[1], i[0]]).conj());
    (sz, sp, sm)
}

/// Projector onto total spin `2S` of two spin-`S` sites, as a `d^2 x d^2`
/// matrix with row index `p1 * d + p2`.
pub fn max_spin_projector(d: usize) -> Tensor {
    let s = (d as f64 - 1.0) / 2.0;
    let (sz, sp, sm) = spin_operators(d);
    let id = Tensor::identity(d);
    let kron = |a: &Tensor, b: &Tensor| -> Tensor {
        outer(a, b)
            .permute(&[0, 2, 1, 3])
            .and_then(|t| t.reshape(&[d * d, d * d]))
            .expect("kron of square matrices")
    };
    let n = d * d;
    let total = |a: &Tensor| kron(a, &id).add(&kron(&id, a)).expect("same shape");
    let (tz, tp, tm) = (total(&sz), total(&sp), total(&sm));
    let mm = |a: &Tensor, b: &Tensor| Tensor::new(vec![n, n], matmul(a.data(), n, n, b.data(), n)).expect("square");
    // S^2 = Sz^2 + (S+S- + S-S+)/2
    let s2 = mm(&tz, &tz)
        .add(&mm(&tp, &tm).add(&mm(&tm, &tp)).unwrap().scale(c(0.5)))
        .unwrap();
    let jmax = 2.0 * s;
    let target = jmax * (jmax + 1.0);
    let mut proj = Tensor::identity(n);
    let mut j = if libm::fabs(jmax - libm::floor(jmax)) < 1e-9 {
        0.0
    } else {
        0.5
    };
    while j < jmax - 1e-9 {
        let lam = j * (j + 1.0);
        let shifted = s2.sub(&Tensor::identity(n).scale(c(lam))).unwrap();
        proj = mm(&proj, &shifted).scale(c(1.0 / (target - lam)));
        j += 1.0;
    }
    proj
}

/// Random rotation-symmetric isometric PEPS.
///
/// Each site draws an `m^z x d` matrix uniform on `[0, 1)` (site `s` seeded
/// with `seed + s`), averages it over cyclic rotations of the virtual axes
/// and orthonormalizes its columns `U`. The site tensor is
/// `A[p, v] = conj(U[v, p]) * m^(-z/4)`, the factor splitting each bond's
/// maximally entangled pair evenly between its two ends.
pub fn random_peps(spec: &LatticeSpec, d: usize, m: usize, seed: u64) -> Result<PepsCell> {
    spec.validate()?;
    let mut tensors = Vec::with_capacity(spec.sites);
    for s in 0..spec.sites {
        let z = spec.coordination(s);
        let rank = m.pow(z as u32);
        if d > rank {
            return Err(Error::IsometryTooLarge { d, rank });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
        let raw: Vec<C64> = (0..rank * d).map(|_| c(rng.gen::<f64>())).collect();
        let mut dims = vec![m; z];
        dims.push(d);
        let t = Tensor::new(dims, raw)?;
        let mut sym = t.clone();
        let mut rot = t;
        for _ in 1..z {
            // shift virtual axes by one position
            let mut order: Vec<usize> = (1..z).collect();
            order.push(0);
            order.push(z);
            rot = rot.permute(&order)?;
            sym = sym.add(&rot)?;
        }
        let mut u = sym.into_data();
        orthonormalize_columns(&mut u, rank, d)?;
        let scale = libm::pow(m as f64, -(z as f64) / 4.0);
        let mut vd = vec![m; z];
        vd.push(d);
        let ut = Tensor::new(vd, u)?;
        let mut order = vec![z];
        order.extend(0..z);
        tensors.push(ut.permute(&order)?.conj().scale(c(scale)));
    }
    PepsCell::new(spec.clone(), tensors)
}

/// Product state: every site carries the same normalized vector, `m = 1`.
pub fn product_peps(spec: &LatticeSpec, site: &[C64]) -> Result<PepsCell> {
    let nrm = crate::linalg::vec_norm(site);
    let mut tensors = Vec::new();
    for s in 0..spec.sites {
        let mut dims = vec![site.len()];
        dims.extend(core::iter::repeat(1).take(spec.coordination(s)));
        tensors.push(Tensor::new(dims, site.iter().map(|z| z / nrm).collect())?);
    }
    PepsCell::new(spec.clone(), tensors)
}

/// Honeycomb PEPS whose physical legs live on the edges: vertex tensors at
/// triangle centres and one three-index edge tensor `[k, p, l]` per bond type
/// (`k` toward the up-triangle vertex A, `l` toward the down vertex B).
#[derive(Clone, Debug)]
pub struct DecoratedHexCell {
    /// `[A, B]` with axes `[slot0, slot1, slot2]`.
    pub vertices: [Tensor; 2],
    /// Edge tensors by bond type.
    pub edges: [Tensor; 3],
    pub d: usize,
}

impl DecoratedHexCell {
    pub fn bond_dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|t| self.vertices[0].dims()[t])
    }

    /// Norm network as a plain honeycomb double layer; each edge tensor's
    /// double layer is absorbed into the A vertex.
    pub fn double_layer(&self) -> Result<DoubleLayerCell> {
        let merge = |v: &Tensor| -> Result<Tensor> {
            let p = outer(v, &v.conj()).permute(&[0, 3, 1, 4, 2, 5])?;
            let dims: Vec<usize> = v.dims().iter().map(|x| x * x).collect();
            p.reshape(&dims)
        };
        let mut a = merge(&self.vertices[0])?;
        let b = merge(&self.vertices[1])?;
        for (t, y) in self.edges.iter().enumerate() {
            let (k, l) = (y.dims()[0], y.dims()[2]);
            // y2[(k k'), (l l')] = sum_p Y[k,p,l] conj(Y[k',p,l'])
            let y2 = contract_pair(y, &[1], &y.conj(), &[1])?
                .permute(&[0, 2, 1, 3])?
                .reshape(&[k * k, l * l])?;
            a = a.apply_matrix(t, &y2)?;
        }
        DoubleLayerCell::from_bulk(LatticeSpec::hexagonal(), vec![a, b])
    }
}

/// Restructures a kagome PEPS onto the decorated honeycomb.
///
/// Every site `T[p, u0, u1, d0, d1]` is split as `X[u0, u1, k] Y[k, p, l]
/// Z[l, d0, d1]`; the three `X` of an up triangle form vertex A, the three
/// `Z` of a down triangle form vertex B, and site `t` becomes the edge tensor
/// of bond type `t`. `cutoff` is the relative discarded weight allowed in
/// each split.
pub fn kagome_to_hex(cell: &PepsCell, cutoff: f64) -> Result<DecoratedHexCell> {
    if cell.spec.geometry != Geometry::Kagome {
        return Err(Error::UnsupportedGeometry);
    }
    if !(0.0..1.0).contains(&cutoff) {
        return Err(Error::InvalidArgument("cutoff must lie in [0, 1)".into()));
    }
    let mut xs = Vec::with_capacity(3);
    let mut ys = Vec::with_capacity(3);
    let mut zs = Vec::with_capacity(3);
    for t in &cell.tensors {
        // T axes [p, u0, u1, d0, d1]
        let f1 = factorize(t, &[1, 2], None, cutoff)?;
        // f1.right axes [k, p, d0, d1]
        let f2 = factorize(&f1.right, &[0, 1], None, cutoff)?;
        xs.push(f1.left);
        ys.push(f2.left);
        zs.push(f2.right);
    }
    // up triangle: (s0,0)-(s1,1), (s1,0)-(s2,1), (s2,0)-(s0,1)
    // X_s axes [slot0, slot1, k_s]
    let x01 = contract_pair(&xs[0], &[0], &xs[1], &[1])?; // [s0.1, k0, s1.0, k1]
    let up = contract_pair(&x01, &[2, 0], &xs[2], &[1, 0])?; // [k0, k1, k2]
                                                             // down triangle: (s0,2)-(s1,3), (s1,2)-(s2,3), (s2,2)-(s0,3)
                                                             // Z_s axes [l_s, slot2, slot3]
    let z01 = contract_pair(&zs[0], &[1], &zs[1], &[2])?; // [l0, s0.3, l1, s1.2]
    let down = contract_pair(&z01, &[3, 1], &zs[2], &[2, 1])?; // [l0, l1, l2]
    Ok(DecoratedHexCell {
        vertices: [up, down],
        edges: [ys[0].clone(), ys[1].clone(), ys[2].clone()],
        d: cell.d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projector_is_isometry_onto_symmetric() {
        for z in 2..5 {
            let p = symmetric_projector(z);
            let n = 1 << z;
            let pp = contract_pair(
                &p,
                &(1..=z).collect::<Vec<_>>(),
                &p.conj(),
                &(1..=z).collect::<Vec<_>>(),
            )
            .unwrap();
            assert!(pp.max_abs_diff(&Tensor::identity(z + 1)) < 1e-14, "z={z} n={n}");
        }
    }

    #[test]
    fn aklt_dims() {
        let h = aklt_peps(&LatticeSpec::hexagonal()).unwrap();
        assert_eq!(h.tensors[0].dims(), &[4, 2, 2, 2]);
        assert_eq!((h.d, h.m), (4, 2));
        let s = aklt_peps(&LatticeSpec::square()).unwrap();
        assert_eq!(s.tensors[0].dims(), &[5, 2, 2, 2, 2]);
        let k = aklt_peps(&LatticeSpec::kagome()).unwrap();
        assert_eq!(k.d, 5);
    }

    #[test]
    fn max_spin_projector_rank() {
        for d in [2usize, 3, 4, 5] {
            let p = max_spin_projector(d);
            let n = d * d;
            let tr: f64 = (0..n).map(|i| p.get(&[i, i]).re).sum();
            assert!((tr - (2 * d - 1) as f64).abs() < 1e-10, "d={d} tr={tr}");
            let pp = Tensor::new(vec![n, n], matmul(p.data(), n, n, p.data(), n)).unwrap();
            assert!(pp.max_abs_diff(&p) < 1e-10);
        }
    }

    #[test]
    fn random_peps_properties() {
        let spec = LatticeSpec::hexagonal();
        let a = random_peps(&spec, 2, 3, 11).unwrap();
        let b = random_peps(&spec, 2, 3, 11).unwrap();
        assert_eq!(a.tensors, b.tensors);
        assert_ne!(a.tensors[0], a.tensors[1]);
        for t in &a.tensors {
            let rot = t.permute(&[0, 2, 3, 1]).unwrap();
            assert!(rot.max_abs_diff(t) < 1e-13);
            let scale = libm::pow(3.0, 3.0 / 4.0);
            let g = contract_pair(t, &[1, 2, 3], &t.conj(), &[1, 2, 3])
                .unwrap()
                .scale(c(scale * scale));
            assert!(g.max_abs_diff(&Tensor::identity(2)) < 1e-13);
        }
        assert_eq!(
            random_peps(&spec, 9, 2, 0).unwrap_err(),
            Error::IsometryTooLarge { d: 9, rank: 8 }
        );
    }

    #[test]
    fn kagome_product_state_bond_one() {
        let spec = LatticeSpec::kagome();
        let cell = product_peps(&spec, &[c(0.6), c(0.8)]).unwrap();
        let dec = kagome_to_hex(&cell, 0.0).unwrap();
        assert_eq!(dec.bond_dims(), [1, 1, 1]);
        let aklt = kagome_to_hex(&aklt_peps(&spec).unwrap(), 0.0).unwrap();
        assert!(aklt.bond_dims().iter().all(|&k| k <= 4));
    }
}
