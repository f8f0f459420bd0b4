//! Lattice unit cells, PEPS and double-layer cells, and finite patches.
//!
//! Each bond of a [`LatticeSpec`] joins `(site, slot)` in cell `R` to
//! `(site, slot)` in cell `R + offset`; the first endpoint is the tail and
//! fixes the forward orientation of every edge built from the bond.
//!
//! Double-layer virtual axes merge a ket axis `k` and a bra axis `b` into the
//! single index `k * m + b`. Impurity tensors carry the merged virtual axes
//! followed by the open ket and bra physical axes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::{NetworkBuilder, NodeId, TensorNetwork};
use crate::tensor::{outer, Tensor};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Geometry {
    Hexagonal,
    Square,
    Kagome,
}

/// `(site, slot)` within a unit cell.
pub type SiteSlot = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bond {
    pub a: SiteSlot,
    pub b: SiteSlot,
    pub offset: [i32; 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeSpec {
    pub geometry: Geometry,
    pub sites: usize,
    pub bonds: Vec<Bond>,
}

const fn bond(a: SiteSlot, b: SiteSlot, offset: [i32; 2]) -> Bond {
    Bond { a, b, offset }
}

impl LatticeSpec {
    /// Honeycomb: sites A=0, B=1. Bond `t` joins slot `t` of A in cell `R`
    /// to slot `t` of B in `R`, `R - e1`, `R - e2` respectively.
    pub fn hexagonal() -> Self {
        LatticeSpec {
            geometry: Geometry::Hexagonal,
            sites: 2,
            bonds: vec![
                bond((0, 0), (1, 0), [0, 0]),
                bond((0, 1), (1, 1), [-1, 0]),
                bond((0, 2), (1, 2), [0, -1]),
            ],
        }
    }

    /// Square lattice, slots right=0, up=1, left=2, down=3.
    pub fn square() -> Self {
        LatticeSpec {
            geometry: Geometry::Square,
            sites: 1,
            bonds: vec![bond((0, 0), (0, 2), [1, 0]), bond((0, 1), (0, 3), [0, 1])],
        }
    }

    /// Kagome: three sites; slots 0,1 sit on the up triangle of the cell,
    /// slots 2,3 on a down triangle shared with neighbouring cells.
    pub fn kagome() -> Self {
        LatticeSpec {
            geometry: Geometry::Kagome,
            sites: 3,
            bonds: vec![
                bond((0, 0), (1, 1), [0, 0]),
                bond((1, 0), (2, 1), [0, 0]),
                bond((2, 0), (0, 1), [0, 0]),
                bond((0, 2), (1, 3), [1, 0]),
                bond((1, 2), (2, 3), [-1, 1]),
                bond((2, 2), (0, 3), [0, -1]),
            ],
        }
    }

    pub fn from_geometry(g: Geometry) -> Self {
        match g {
            Geometry::Hexagonal => Self::hexagonal(),
            Geometry::Square => Self::square(),
            Geometry::Kagome => Self::kagome(),
        }
    }

    pub fn coordination(&self, site: usize) -> usize {
        self.bonds
            .iter()
            .map(|b| (b.a.0 == site) as usize + (b.b.0 == site) as usize)
            .sum()
    }

    /// Bond index bound to a slot, and whether the slot is the bond's tail.
    pub fn slot_bond(&self, site: usize, slot: usize) -> Option<(usize, bool)> {
        self.bonds.iter().enumerate().find_map(|(k, b)| {
            if b.a == (site, slot) {
                Some((k, true))
            } else if b.b == (site, slot) {
                Some((k, false))
            } else {
                None
            }
        })
    }

    /// Checks that every slot `0..coordination` of every site is used once.
    pub fn validate(&self) -> Result<()> {
        for s in 0..self.sites {
            for slot in 0..self.coordination(s) {
                let uses = self
                    .bonds
                    .iter()
                    .filter(|b| b.a == (s, slot) || b.b == (s, slot))
                    .count();
                if uses != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "slot {slot} of site {s} used {uses} times"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Translation-invariant PEPS. Site tensors have axes `[physical, virtual...]`.
#[derive(Clone, Debug)]
pub struct PepsCell {
    pub spec: LatticeSpec,
    pub tensors: Vec<Tensor>,
    pub d: usize,
    pub m: usize,
}

impl PepsCell {
    pub fn new(spec: LatticeSpec, tensors: Vec<Tensor>) -> Result<Self> {
        spec.validate()?;
        if tensors.len() != spec.sites {
            return Err(Error::DimensionMismatch(format!(
                "{} site tensors for {} sites",
                tensors.len(),
                spec.sites
            )));
        }
        let d = tensors[0].dims()[0];
        let m = tensors[0].dims().get(1).copied().unwrap_or(1);
        for (s, t) in tensors.iter().enumerate() {
            let z = spec.coordination(s);
            if t.rank() != z + 1 || t.dims()[0] != d || t.dims()[1..].iter().any(|&x| x != m) {
                return Err(Error::DimensionMismatch(format!(
                    "site {s} tensor dims {:?}, expected [{d}] + {z} x [{m}]",
                    t.dims()
                )));
            }
        }
        Ok(PepsCell { spec, tensors, d, m })
    }
}

/// Double-layer cell: bulk tensors with merged virtual axes, and optional
/// impurity tensors keeping the physical pair open.
#[derive(Clone, Debug)]
pub struct DoubleLayerCell {
    pub spec: LatticeSpec,
    pub bulk: Vec<Tensor>,
    pub impurity: Option<Vec<Tensor>>,
}

impl DoubleLayerCell {
    /// Cell built directly from bulk tensors (no physical layer).
    pub fn from_bulk(spec: LatticeSpec, bulk: Vec<Tensor>) -> Result<Self> {
        spec.validate()?;
        if bulk.len() != spec.sites {
            return Err(Error::DimensionMismatch("bulk tensor count".into()));
        }
        for (k, b) in spec.bonds.iter().enumerate() {
            let (da, db) = (bulk[b.a.0].dims().get(b.a.1), bulk[b.b.0].dims().get(b.b.1));
            if da.is_none() || da != db {
                return Err(Error::DimensionMismatch(format!("bond {k} sizes differ")));
            }
        }
        for (s, t) in bulk.iter().enumerate() {
            if t.rank() != spec.coordination(s) {
                return Err(Error::DimensionMismatch(format!("site {s} rank")));
            }
        }
        Ok(DoubleLayerCell {
            spec,
            bulk,
            impurity: None,
        })
    }

    pub fn bond_dim(&self, bond: usize) -> usize {
        let b = self.spec.bonds[bond];
        self.bulk[b.a.0].dims()[b.a.1]
    }
}

/// Merges ket and bra layers of each site tensor.
pub fn build_double_layer(cell: &PepsCell) -> Result<DoubleLayerCell> {
    let mut bulk = Vec::with_capacity(cell.tensors.len());
    let mut imp = Vec::with_capacity(cell.tensors.len());
    for t in &cell.tensors {
        let z = t.rank() - 1;
        let m = cell.m;
        // axes: [p, v1..vz, p', v1'..vz']
        let pair = outer(t, &t.conj());
        let mut order = Vec::with_capacity(2 * z + 2);
        for k in 0..z {
            order.push(1 + k);
            order.push(z + 2 + k);
        }
        order.push(0);
        order.push(z + 1);
        let mut dims = vec![m * m; z];
        dims.push(cell.d);
        dims.push(cell.d);
        let i = pair.permute(&order)?.reshape(&dims)?;
        bulk.push(i.trace_axes(z, z + 1)?);
        imp.push(i);
    }
    Ok(DoubleLayerCell {
        spec: cell.spec.clone(),
        bulk,
        impurity: Some(imp),
    })
}

/// Boundary cap for an open patch: the normalized maximally entangled pair
/// `vec(I_m)/sqrt(m)` on an `m^2` axis, or the uniform unit vector otherwise.
pub fn boundary_cap(dim: usize) -> Vec<C64> {
    let m = (libm::sqrt(dim as f64) + 0.5) as usize;
    if m * m == dim {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        let w = 1.0 / libm::sqrt(m as f64);
        for k in 0..m {
            v[k * m + k] = C64::new(w, 0.0);
        }
        v
    } else {
        vec![C64::new(1.0 / libm::sqrt(dim as f64), 0.0); dim]
    }
}

fn wrap(x: i32, n: usize) -> i32 {
    x.rem_euclid(n as i32)
}

/// Cells of an `nx x ny` patch in canonical (x-major) order.
pub fn patch_cells(nx: usize, ny: usize) -> Vec<[i32; 2]> {
    let mut v = Vec::with_capacity(nx * ny);
    for x in 0..nx as i32 {
        for y in 0..ny as i32 {
            v.push([x, y]);
        }
    }
    v
}

/// Index of the edge built from `bond` of `cell` in a periodic patch.
pub fn periodic_edge_index(spec: &LatticeSpec, ny: usize, cell: [i32; 2], bond: usize) -> usize {
    (cell[0] as usize * ny + cell[1] as usize) * spec.bonds.len() + bond
}

struct Link {
    from: (usize, usize),
    to: (usize, usize),
}

/// Bonds realized in a patch, as `(node, slot)` pairs (node = cell * sites + site).
fn patch_links(spec: &LatticeSpec, nx: usize, ny: usize, periodic: bool) -> Vec<Link> {
    let mut links = Vec::new();
    for c in patch_cells(nx, ny) {
        for b in &spec.bonds {
            let mut t = [c[0] + b.offset[0], c[1] + b.offset[1]];
            if periodic {
                t = [wrap(t[0], nx), wrap(t[1], ny)];
            } else if t[0] < 0 || t[1] < 0 || t[0] >= nx as i32 || t[1] >= ny as i32 {
                continue;
            }
            let ci = (c[0] as usize * ny + c[1] as usize) * spec.sites;
            let ti = (t[0] as usize * ny + t[1] as usize) * spec.sites;
            links.push(Link {
                from: (ci + b.a.0, b.a.1),
                to: (ti + b.b.0, b.b.1),
            });
        }
    }
    links
}

fn check_patch(nx: usize, ny: usize, periodic: bool) -> Result<()> {
    if nx == 0 || ny == 0 || (periodic && (nx < 2 || ny < 2)) {
        return Err(Error::PatchTooSmall { nx, ny });
    }
    Ok(())
}

/// Finite `nx x ny` patch of a double-layer cell. Periodic patches are
/// closed; open patches cap unpaired boundary slots with [`boundary_cap`].
pub fn build_finite_patch(cell: &DoubleLayerCell, nx: usize, ny: usize, periodic: bool) -> Result<TensorNetwork> {
    check_patch(nx, ny, periodic)?;
    let spec = &cell.spec;
    let links = patch_links(spec, nx, ny, periodic);
    let cells = patch_cells(nx, ny);
    let nn = cells.len() * spec.sites;
    let mut bound = vec![Vec::new(); nn];
    for n in 0..nn {
        bound[n] = vec![false; cell.bulk[n % spec.sites].rank()];
    }
    for l in &links {
        bound[l.from.0][l.from.1] = true;
        bound[l.to.0][l.to.1] = true;
    }
    // new slot index for each bound slot
    let mut remap = vec![Vec::new(); nn];
    let mut b = NetworkBuilder::new();
    for (ci, c) in cells.iter().enumerate() {
        for s in 0..spec.sites {
            let n = ci * spec.sites + s;
            let mut t = cell.bulk[s].clone();
            let mut map = vec![usize::MAX; t.rank()];
            let mut kept = 0;
            let mut axis = 0;
            for slot in 0..bound[n].len() {
                if bound[n][slot] {
                    map[slot] = kept;
                    kept += 1;
                    axis += 1;
                } else {
                    let cap = boundary_cap(t.dims()[axis]);
                    t = t.contract_vector(axis, &cap)?;
                }
            }
            remap[n] = map;
            b.add_node(NodeId::new(*c, s), t)?;
        }
    }
    for l in &links {
        b.connect(l.from.0, remap[l.from.0][l.from.1], l.to.0, remap[l.to.0][l.to.1])?;
    }
    b.build()
}

/// Single-layer patch of a PEPS. Physical axes become open edges (after all
/// bond edges, in node order). Open patches leave unpaired virtual axes open
/// as well.
pub fn build_peps_patch(cell: &PepsCell, nx: usize, ny: usize, periodic: bool) -> Result<TensorNetwork> {
    check_patch(nx, ny, periodic)?;
    let spec = &cell.spec;
    let links = patch_links(spec, nx, ny, periodic);
    let mut b = NetworkBuilder::new();
    for c in patch_cells(nx, ny) {
        for s in 0..spec.sites {
            b.add_node(NodeId::new(c, s), cell.tensors[s].clone())?;
        }
    }
    let nn = nx * ny * spec.sites;
    let mut bound = vec![Vec::new(); nn];
    for n in 0..nn {
        bound[n] = vec![false; cell.tensors[n % spec.sites].rank() - 1];
    }
    for l in &links {
        b.connect(l.from.0, l.from.1 + 1, l.to.0, l.to.1 + 1)?;
        bound[l.from.0][l.from.1] = true;
        bound[l.to.0][l.to.1] = true;
    }
    for n in 0..nn {
        b.open(n, 0)?;
    }
    for n in 0..nn {
        for (slot, &is_bound) in bound[n].iter().enumerate() {
            if !is_bound {
                b.open(n, slot + 1)?;
            }
        }
    }
    b.build()
}

/// One copy of each site with every bond closed on itself; BP on this
/// network is translation-invariant BP on the infinite lattice. Edge `k` is
/// bond `k`.
pub fn unit_cell_network(cell: &DoubleLayerCell) -> Result<TensorNetwork> {
    let mut b = NetworkBuilder::new();
    for (s, t) in cell.bulk.iter().enumerate() {
        b.add_node(NodeId::new([0, 0], s), t.clone())?;
    }
    for bd in &cell.spec.bonds {
        b.connect(bd.a.0, bd.a.1, bd.b.0, bd.b.1)?;
    }
    b.build()
}

/// Replaces the bulk tensors at `sites` by the cell's impurity tensors.
///
/// New open edges are appended as `(ket, bra)` per site, in the order given.
/// Two sites must share an edge.
pub fn insert_impurity(net: &TensorNetwork, sites: &[NodeId], cell: &DoubleLayerCell) -> Result<TensorNetwork> {
    let imp = cell
        .impurity
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("cell has no impurity tensors".into()))?;
    if sites.is_empty() || sites.len() > 2 {
        return Err(Error::InvalidArgument("one or two impurity sites expected".into()));
    }
    let idx = sites
        .iter()
        .map(|id| net.node_index(id).ok_or_else(|| Error::UnknownNode(format!("{id:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if idx.len() == 2 && (idx[0] == idx[1] || !net.adjacent(idx[0], idx[1])) {
        return Err(Error::NotAdjacent);
    }
    let mut out = net.clone();
    for (&k, id) in idx.iter().zip(sites) {
        let t = imp.get(id.site).ok_or_else(|| Error::UnknownNode(format!("{id:?}")))?;
        out = out.replace_with_open_axes(k, t.clone(), 2)?.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(dims: &[usize]) -> Tensor {
        Tensor::from_fn(dims, |_| C64::new(1.0, 0.0))
    }

    #[test]
    fn coordination_numbers() {
        let h = LatticeSpec::hexagonal();
        assert_eq!((h.coordination(0), h.coordination(1)), (3, 3));
        let s = LatticeSpec::square();
        assert_eq!(s.coordination(0), 4);
        let k = LatticeSpec::kagome();
        assert!((0..3).all(|s| k.coordination(s) == 4));
        for spec in [h, s, k] {
            spec.validate().unwrap();
        }
    }

    #[test]
    fn square_torus_counts() {
        let spec = LatticeSpec::square();
        let cell = DoubleLayerCell::from_bulk(spec, vec![ones(&[2, 2, 2, 2])]).unwrap();
        let net = build_finite_patch(&cell, 2, 2, true).unwrap();
        assert_eq!((net.num_nodes(), net.num_edges()), (4, 8));
        assert!(net.is_closed());
    }

    #[test]
    fn hex_torus_counts() {
        let spec = LatticeSpec::hexagonal();
        let cell = DoubleLayerCell::from_bulk(spec, vec![ones(&[2, 2, 2]), ones(&[2, 2, 2])]).unwrap();
        for n in 2..5 {
            let net = build_finite_patch(&cell, n, n, true).unwrap();
            assert_eq!((net.num_nodes(), net.num_edges()), (2 * n * n, 3 * n * n));
        }
        assert_eq!(
            build_finite_patch(&cell, 1, 3, true).unwrap_err(),
            Error::PatchTooSmall { nx: 1, ny: 3 }
        );
    }

    #[test]
    fn open_patch_caps_boundary() {
        let spec = LatticeSpec::square();
        let cell = DoubleLayerCell::from_bulk(spec, vec![ones(&[4, 4, 4, 4])]).unwrap();
        let net = build_finite_patch(&cell, 2, 3, false).unwrap();
        assert!(net.is_closed());
        assert_eq!(net.num_nodes(), 6);
        assert_eq!(net.num_edges(), 7);
    }
}
