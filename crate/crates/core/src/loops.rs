//! Loop-series expansion around a normalized BP fixed point.
//!
//! Every edge identity splits as `I = P + Q`, with `P = backward (x) forward`
//! the rank-one ground projector and `Q = I - P` its complement. Expanding all
//! edges gives a sum over configurations (sets of excited edges); those with a
//! node touching exactly one excited edge vanish at a fixed point, so the
//! surviving connected pieces are edge sets whose every touched node has at
//! least two excited edges.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::ComplexFloat;

use crate::bp::{find_fixed_point, init_messages, normalize_fixed_point, vacuum_scalar, BpFixedPoint, InitStrategy};
use crate::error::{Error, Result};
use crate::lattice::{unit_cell_network, DoubleLayerCell, LatticeSpec};
use crate::linalg::eigenvalues;
use crate::network::{contract_labeled, Endpoint, NodeId, TensorNetwork};
use crate::tensor::Tensor;
use crate::C64;

/// Brute-force configuration sums are limited to this many edges.
pub const MAX_BRUTE_FORCE_EDGES: usize = 24;

#[derive(Clone, Debug)]
pub struct EdgeProjectors {
    /// `ground[i, j] = backward[i] * forward[j]`, `i` on the tail side.
    pub ground: Tensor,
    pub excited: Tensor,
}

fn projectors_from(forward: &[C64], backward: &[C64]) -> EdgeProjectors {
    let n = forward.len();
    let ground = Tensor::from_fn(&[n, n], |ix| backward[ix[0]] * forward[ix[1]]);
    let excited = Tensor::identity(n).sub(&ground).expect("same shape");
    EdgeProjectors { ground, excited }
}

pub fn edge_projectors(fp: &BpFixedPoint, edge: usize) -> Result<EdgeProjectors> {
    if !fp.normalized {
        return Err(Error::NotNormalized);
    }
    if edge >= fp.messages.forward.len() {
        return Err(Error::UnknownEdge(edge));
    }
    Ok(projectors_from(&fp.messages.forward[edge], &fp.messages.backward[edge]))
}

fn all_projectors(net: &TensorNetwork, fp: &BpFixedPoint) -> Result<Vec<EdgeProjectors>> {
    (0..net.num_edges()).map(|e| edge_projectors(fp, e)).collect()
}

/// Node tensor with ground slots capped by incoming messages and excited
/// slots kept (increasing slot order); the excited projector sits on the
/// tail end of each excited edge.
fn node_variant(
    net: &TensorNetwork,
    fp: &BpFixedPoint,
    projs: &[EdgeProjectors],
    k: usize,
    excited: &[bool],
) -> Result<(Tensor, Vec<usize>)> {
    let node = net.node(k);
    let mut t = node.tensor.clone();
    for slot in (0..node.slots.len()).rev() {
        if !excited[node.slots[slot]] {
            t = t.contract_vector(slot, fp.messages.incoming(net, k, slot))?;
        }
    }
    let mut labels = Vec::new();
    for (slot, &e) in node.slots.iter().enumerate() {
        if excited[e] {
            if net.edges()[e].a == (Endpoint { node: k, slot }) {
                t = t.apply_matrix(labels.len(), &projs[e].excited)?;
            }
            labels.push(e);
        }
    }
    Ok((t, labels))
}

/// Weight of one configuration of a finite network: every edge flagged in
/// `excited` carries the excited projector, every other edge the ground one.
pub fn configuration_weight(net: &TensorNetwork, fp: &BpFixedPoint, excited: &[bool]) -> Result<C64> {
    if excited.len() != net.num_edges() {
        return Err(Error::ExcitationOutsideNetwork);
    }
    let projs = all_projectors(net, fp)?;
    let items = (0..net.num_nodes())
        .map(|k| node_variant(net, fp, &projs, k, excited))
        .collect::<Result<Vec<_>>>()?;
    Ok(contract_labeled(items, usize::MAX)?.0.to_scalar())
}

/// All `2^M` configuration weights (index bit `e` = edge `e` excited) and
/// their sum, which resolves the identity on every edge and so equals the
/// contraction of the (normalized) network.
pub fn brute_force_config_sum(net: &TensorNetwork, fp: &BpFixedPoint) -> Result<(Vec<C64>, C64)> {
    let m = net.num_edges();
    if m > MAX_BRUTE_FORCE_EDGES {
        return Err(Error::TooManyEdges(m));
    }
    if !net.is_closed() {
        return Err(Error::NotClosed(net.open_edges().len()));
    }
    let projs = all_projectors(net, fp)?;
    // per node: variant for every subset of its slots
    let mut variants: Vec<Vec<(Tensor, Vec<usize>)>> = Vec::with_capacity(net.num_nodes());
    for k in 0..net.num_nodes() {
        let slots = &net.node(k).slots;
        let mut distinct: Vec<usize> = slots.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let mut vs = Vec::with_capacity(1 << distinct.len());
        for sub in 0..(1usize << distinct.len()) {
            let mut ex = vec![false; m];
            for (i, &e) in distinct.iter().enumerate() {
                ex[e] = sub >> i & 1 == 1;
            }
            vs.push(node_variant(net, fp, &projs, k, &ex)?);
        }
        variants.push(vs);
    }
    let node_edges: Vec<Vec<usize>> = (0..net.num_nodes())
        .map(|k| {
            let mut d = net.node(k).slots.clone();
            d.sort_unstable();
            d.dedup();
            d
        })
        .collect();
    let mut weights = Vec::with_capacity(1 << m);
    let mut total = C64::new(0.0, 0.0);
    for mask in 0..(1usize << m) {
        let mut scalar = C64::new(1.0, 0.0);
        let mut items = Vec::new();
        for (k, edges) in node_edges.iter().enumerate() {
            let mut sub = 0;
            for (i, &e) in edges.iter().enumerate() {
                sub |= (mask >> e & 1) << i;
            }
            let (t, l) = &variants[k][sub];
            if l.is_empty() {
                scalar *= t.to_scalar();
            } else {
                items.push((t.clone(), l.clone()));
            }
        }
        let w = if items.is_empty() {
            scalar
        } else {
            scalar * contract_labeled(items, usize::MAX)?.0.to_scalar()
        };
        total += w;
        weights.push(w);
    }
    Ok((weights, total))
}

/// Whether a configuration mask leaves some node with exactly one excited
/// edge (counting a self-loop twice).
pub fn is_dangling(net: &TensorNetwork, mask: usize) -> bool {
    (0..net.num_nodes()).any(|k| net.node(k).slots.iter().filter(|&&e| mask >> e & 1 == 1).count() == 1)
}

/// Nodes touched by a set of excited edges of a finite network.
pub fn edge_set_support(net: &TensorNetwork, edges: &[usize]) -> Result<Vec<usize>> {
    let mut nodes = Vec::new();
    for &e in edges {
        let edge = net.edges().get(e).ok_or(Error::ExcitationOutsideNetwork)?;
        nodes.push(edge.a.node);
        if let Some(b) = edge.b {
            nodes.push(b.node);
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    Ok(nodes)
}

/// Product of the weights of node-disjoint excitations on a finite network.
pub fn factorized_weight(excitations: &[Vec<usize>], fp: &BpFixedPoint, net: &TensorNetwork) -> Result<C64> {
    let mut seen: Vec<usize> = Vec::new();
    for exc in excitations {
        for n in edge_set_support(net, exc)? {
            if seen.contains(&n) {
                return Err(Error::OverlappingSupports(n));
            }
            seen.push(n);
        }
    }
    let mut w = C64::new(1.0, 0.0);
    for exc in excitations {
        let mut ex = vec![false; net.num_edges()];
        for &e in exc {
            ex[e] = true;
        }
        w *= configuration_weight(net, fp, &ex)?;
    }
    Ok(w)
}

/// Edge of the infinite lattice: bond `bond` anchored at `cell`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeEdge {
    pub cell: [i32; 2],
    pub bond: usize,
}

impl LatticeEdge {
    pub fn translate(self, by: [i32; 2]) -> Self {
        LatticeEdge {
            cell: [self.cell[0] + by[0], self.cell[1] + by[1]],
            bond: self.bond,
        }
    }

    /// `(tail, head)` nodes.
    pub fn nodes(self, spec: &LatticeSpec) -> (NodeId, NodeId) {
        let b = spec.bonds[self.bond];
        (
            NodeId::new(self.cell, b.a.0),
            NodeId::new([self.cell[0] + b.offset[0], self.cell[1] + b.offset[1]], b.b.0),
        )
    }
}

/// Lattice edge bound to each slot of a node, in slot order.
pub fn node_slot_edges(spec: &LatticeSpec, n: NodeId) -> Vec<LatticeEdge> {
    (0..spec.coordination(n.site))
        .map(|slot| {
            let (k, tail) = spec.slot_bond(n.site, slot).expect("validated spec");
            if tail {
                LatticeEdge { cell: n.cell, bond: k }
            } else {
                let o = spec.bonds[k].offset;
                LatticeEdge {
                    cell: [n.cell[0] - o[0], n.cell[1] - o[1]],
                    bond: k,
                }
            }
        })
        .collect()
}

/// A connected excitation: one representative of a translation orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct Excitation {
    /// Sorted; the smallest edge sits in cell `(0, 0)`.
    pub edges: Vec<LatticeEdge>,
    pub degree: usize,
    /// Number of nodes touched.
    pub support: usize,
    /// Orbit multiplicity per lattice site as `(numerator, denominator)`.
    pub multiplicity: (u32, u32),
    pub weight: Option<C64>,
}

impl Excitation {
    pub fn multiplicity_f64(&self) -> f64 {
        self.multiplicity.0 as f64 / self.multiplicity.1 as f64
    }

    pub fn nodes(&self, spec: &LatticeSpec) -> Vec<NodeId> {
        support_nodes(spec, &self.edges)
    }
}

pub fn support_nodes(spec: &LatticeSpec, edges: &[LatticeEdge]) -> Vec<NodeId> {
    let mut v = Vec::with_capacity(2 * edges.len());
    for e in edges {
        let (a, b) = e.nodes(spec);
        v.push(a);
        v.push(b);
    }
    v.sort_unstable();
    v.dedup();
    v
}

#[derive(Clone, Debug)]
pub struct ExcitationCatalog {
    pub spec: LatticeSpec,
    pub max_degree: usize,
    pub entries: Vec<Excitation>,
}

impl ExcitationCatalog {
    pub fn counts_by_degree(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.degree).or_insert(0) += 1;
        }
        m
    }

    /// Sub-catalog of entries with degree at most `max_degree`.
    pub fn truncated(&self, max_degree: usize) -> Self {
        ExcitationCatalog {
            spec: self.spec.clone(),
            max_degree: max_degree.min(self.max_degree),
            entries: self
                .entries
                .iter()
                .filter(|e| e.degree <= max_degree)
                .cloned()
                .collect(),
        }
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.counts_by_degree().keys().copied().collect()
    }
}

/// Finite window of the lattice around the origin cell, with dense indices
/// ordered like `(cell, bond)` and `(cell, site)`.
struct Window {
    spec: LatticeSpec,
    r: i32,
    side: usize,
    nb: usize,
}

impl Window {
    fn new(spec: &LatticeSpec, r: usize) -> Self {
        Window {
            spec: spec.clone(),
            r: r as i32,
            side: 2 * r + 1,
            nb: spec.bonds.len(),
        }
    }

    fn cell_index(&self, c: [i32; 2]) -> Option<usize> {
        let (x, y) = (c[0] + self.r, c[1] + self.r);
        if x < 0 || y < 0 || x as usize >= self.side || y as usize >= self.side {
            return None;
        }
        Some(x as usize * self.side + y as usize)
    }

    fn edge_index(&self, e: LatticeEdge) -> Option<usize> {
        self.cell_index(e.cell).map(|c| c * self.nb + e.bond)
    }

    fn node_index(&self, n: NodeId) -> Option<usize> {
        self.cell_index(n.cell).map(|c| c * self.spec.sites + n.site)
    }

    fn num_edges(&self) -> usize {
        self.side * self.side * self.nb
    }

    fn num_nodes(&self) -> usize {
        self.side * self.side * self.spec.sites
    }

    fn edge(&self, i: usize) -> LatticeEdge {
        let c = i / self.nb;
        LatticeEdge {
            cell: [(c / self.side) as i32 - self.r, (c % self.side) as i32 - self.r],
            bond: i % self.nb,
        }
    }

    /// For every window edge: its two node indices (if inside) and the
    /// indices of edges sharing a node with it.
    fn adjacency(&self) -> (Vec<[Option<usize>; 2]>, Vec<Vec<usize>>) {
        let ne = self.num_edges();
        let mut ends = Vec::with_capacity(ne);
        let mut nbrs = Vec::with_capacity(ne);
        for i in 0..ne {
            let e = self.edge(i);
            let (a, b) = e.nodes(&self.spec);
            ends.push([self.node_index(a), self.node_index(b)]);
            let mut v = Vec::new();
            for n in [a, b] {
                for f in node_slot_edges(&self.spec, n) {
                    if let Some(j) = self.edge_index(f) {
                        if j != i && !v.contains(&j) {
                            v.push(j);
                        }
                    }
                }
            }
            nbrs.push(v);
        }
        (ends, nbrs)
    }
}

/// Redelmeier growth of connected edge sets inside a window.
struct Grower<'a> {
    ends: &'a [[Option<usize>; 2]],
    nbrs: &'a [Vec<usize>],
    max: usize,
    allowed: &'a dyn Fn(usize) -> bool,
    /// Nodes exempt from the minimum-degree rule.
    exempt: [Option<usize>; 2],
    marked: Vec<bool>,
    degree: Vec<u8>,
    leaves: usize,
    current: Vec<usize>,
    found: Vec<Vec<usize>>,
}

impl<'a> Grower<'a> {
    fn is_exempt(&self, n: usize) -> bool {
        self.exempt.contains(&Some(n))
    }

    fn add(&mut self, e: usize) {
        self.current.push(e);
        for n in self.ends[e].into_iter().flatten() {
            self.degree[n] += 1;
            if !self.is_exempt(n) {
                match self.degree[n] {
                    1 => self.leaves += 1,
                    2 => self.leaves -= 1,
                    _ => {}
                }
            }
        }
    }

    fn remove(&mut self, e: usize) {
        self.current.pop();
        for n in self.ends[e].into_iter().flatten() {
            if !self.is_exempt(n) {
                match self.degree[n] {
                    1 => self.leaves -= 1,
                    2 => self.leaves += 1,
                    _ => {}
                }
            }
            self.degree[n] -= 1;
        }
    }

    fn run(&mut self, root: usize) {
        self.marked[root] = true;
        self.extend(vec![root]);
        self.marked[root] = false;
    }

    fn extend(&mut self, mut untried: Vec<usize>) {
        while let Some(e) = untried.pop() {
            self.add(e);
            if self.leaves == 0 {
                let mut s = self.current.clone();
                s.sort_unstable();
                self.found.push(s);
            }
            let len = self.current.len();
            if len < self.max && self.leaves <= 2 * (self.max - len) {
                let mut next = untried.clone();
                let mut added = Vec::new();
                for &f in &self.nbrs[e] {
                    if !self.marked[f] && (self.allowed)(f) {
                        self.marked[f] = true;
                        next.push(f);
                        added.push(f);
                    }
                }
                self.extend(next);
                for f in added {
                    self.marked[f] = false;
                }
            }
            self.remove(e);
        }
    }
}

/// All translation orbits of connected edge sets of at most `max_degree`
/// edges in which every touched node has at least two edges of the set.
///
/// Each orbit is represented by its translate whose smallest edge (ordered
/// by cell, then bond) lies in cell `(0, 0)`. Entries are sorted by degree,
/// then edge list.
pub fn enumerate_excitations(spec: &LatticeSpec, max_degree: usize) -> Result<ExcitationCatalog> {
    spec.validate()?;
    let mut entries = Vec::new();
    if max_degree > 0 {
        let w = Window::new(spec, max_degree);
        let (ends, nbrs) = w.adjacency();
        for bond in 0..spec.bonds.len() {
            let root = w.edge_index(LatticeEdge { cell: [0, 0], bond }).unwrap();
            let allowed = move |f: usize| f > root;
            let mut g = Grower {
                ends: &ends,
                nbrs: &nbrs,
                max: max_degree,
                allowed: &allowed,
                exempt: [None, None],
                marked: vec![false; w.num_edges()],
                degree: vec![0; w.num_nodes()],
                leaves: 0,
                current: Vec::new(),
                found: Vec::new(),
            };
            g.run(root);
            for set in g.found {
                let edges: Vec<LatticeEdge> = set.iter().map(|&i| w.edge(i)).collect();
                let support = support_nodes(spec, &edges).len();
                entries.push(Excitation {
                    degree: edges.len(),
                    edges,
                    support,
                    multiplicity: (1, spec.sites as u32),
                    weight: None,
                });
            }
        }
    }
    entries.sort_by(|a, b| a.degree.cmp(&b.degree).then_with(|| a.edges.cmp(&b.edges)));
    Ok(ExcitationCatalog {
        spec: spec.clone(),
        max_degree,
        entries,
    })
}

/// Connected edge set attached to a distinguished bond `A - B` (the bond
/// itself excluded): it touches `A` or `B`, and every other touched node
/// carries at least two of its edges.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenExcitation {
    pub edges: Vec<LatticeEdge>,
    /// Degree of the closed excitation this term stands for: `|edges| + 1`
    /// when an end of the bond carries exactly one edge of the set (the bond
    /// must be excited to close it), else `|edges|`.
    pub degree: usize,
    pub touches_tail: bool,
    pub touches_head: bool,
    /// Nodes touched, with `A` and `B` always included.
    pub support_with_bond: usize,
}

/// Open excitations around bond `bond` of cell `(0, 0)` with at most
/// `max_degree` edges, sorted by degree then edge list.
pub fn enumerate_open_excitations(spec: &LatticeSpec, bond: usize, max_degree: usize) -> Result<Vec<OpenExcitation>> {
    spec.validate()?;
    if bond >= spec.bonds.len() {
        return Err(Error::UnknownEdge(bond));
    }
    let mut out = Vec::new();
    if max_degree == 0 {
        return Ok(out);
    }
    let w = Window::new(spec, max_degree + 1);
    let (ends, nbrs) = w.adjacency();
    let cut = LatticeEdge { cell: [0, 0], bond };
    let cut_i = w.edge_index(cut).unwrap();
    let (na, nb) = cut.nodes(spec);
    let (ia, ib) = (w.node_index(na).unwrap(), w.node_index(nb).unwrap());
    let touches = |f: usize| ends[f].contains(&Some(ia)) || ends[f].contains(&Some(ib));
    let mut roots: Vec<usize> = nbrs[cut_i].clone();
    roots.sort_unstable();
    for &root in &roots {
        let allowed = |f: usize| f != cut_i && !(touches(f) && f < root);
        let mut g = Grower {
            ends: &ends,
            nbrs: &nbrs,
            max: max_degree,
            allowed: &allowed,
            exempt: [Some(ia), Some(ib)],
            marked: vec![false; w.num_edges()],
            degree: vec![0; w.num_nodes()],
            leaves: 0,
            current: Vec::new(),
            found: Vec::new(),
        };
        g.run(root);
        for set in g.found {
            let ta = set.iter().any(|&f| ends[f].contains(&Some(ia)));
            let tb = set.iter().any(|&f| ends[f].contains(&Some(ib)));
            let edges: Vec<LatticeEdge> = set.iter().map(|&i| w.edge(i)).collect();
            let mut nodes = support_nodes(spec, &edges);
            nodes.push(na);
            nodes.push(nb);
            nodes.sort_unstable();
            nodes.dedup();
            let da = set.iter().filter(|&&f| ends[f].contains(&Some(ia))).count();
            let db = set.iter().filter(|&&f| ends[f].contains(&Some(ib))).count();
            let degree = edges.len() + (da == 1 || db == 1) as usize;
            if degree > max_degree {
                continue;
            }
            out.push(OpenExcitation {
                degree,
                edges,
                touches_tail: ta,
                touches_head: tb,
                support_with_bond: nodes.len(),
            });
        }
    }
    out.sort_by(|a, b| a.degree.cmp(&b.degree).then_with(|| a.edges.cmp(&b.edges)));
    Ok(out)
}

/// Role of a node slot in a local contraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotRole {
    /// Capped with the incoming fixed-point message.
    Ground,
    /// Kept with the given label; the excited projector is applied if the
    /// node is the tail of the edge.
    Excited { label: usize, tail: bool },
    /// Kept with the given label, no projector.
    Free { label: usize },
}

/// Normalized translation-invariant BP vacuum of a double-layer cell.
#[derive(Clone, Debug)]
pub struct LatticeVacuum {
    pub spec: LatticeSpec,
    /// Unit-cell network with tensors rescaled to unit vacuum.
    pub net: TensorNetwork,
    pub fp: BpFixedPoint,
    /// Per bond.
    pub projectors: Vec<EdgeProjectors>,
    /// Impurity tensors rescaled like the bulk.
    pub impurity: Option<Vec<Tensor>>,
    /// Bethe free energy per lattice site.
    pub bethe_per_site: f64,
}

impl LatticeVacuum {
    /// Runs unit-cell BP and normalizes.
    pub fn solve(
        cell: &DoubleLayerCell,
        init: InitStrategy,
        damping: f64,
        tol: f64,
        max_sweeps: usize,
    ) -> Result<Self> {
        let net = unit_cell_network(cell)?;
        let msgs = init_messages(&net, init)?;
        let fp = find_fixed_point(&net, &msgs, damping, tol, max_sweeps)?;
        Self::from_fixed_point(cell, &fp)
    }

    /// Normalizes a fixed point found on the unit-cell network of `cell`.
    pub fn from_fixed_point(cell: &DoubleLayerCell, fp: &BpFixedPoint) -> Result<Self> {
        let raw = unit_cell_network(cell)?;
        let (net, nfp) = normalize_fixed_point(&raw, fp)?;
        let impurity = match &cell.impurity {
            Some(imp) => {
                let mut v = Vec::with_capacity(imp.len());
                for (k, t) in imp.iter().enumerate() {
                    let s = vacuum_scalar(&raw, &nfp.messages, k)?;
                    v.push(t.scale(s.inv()));
                }
                Some(v)
            }
            None => None,
        };
        let projectors = (0..net.num_edges())
            .map(|e| edge_projectors(&nfp, e))
            .collect::<Result<Vec<_>>>()?;
        let bethe_per_site = crate::bp::bethe_free_energy(&nfp)? / cell.spec.sites as f64;
        Ok(LatticeVacuum {
            spec: cell.spec.clone(),
            net,
            fp: nfp,
            projectors,
            impurity,
            bethe_per_site,
        })
    }

    pub fn incoming(&self, site: usize, slot: usize) -> &[C64] {
        self.fp.messages.incoming(&self.net, site, slot)
    }

    /// Contracts `tensor` (a site tensor whose first `z` axes are the
    /// lattice slots, followed by `extra` further axes) according to the
    /// slot roles. Returns the tensor and labels of the kept axes, extra
    /// axes last with the labels supplied.
    pub fn local_item(
        &self,
        site: usize,
        tensor: &Tensor,
        roles: &[SlotRole],
        extra_labels: &[usize],
    ) -> Result<(Tensor, Vec<usize>)> {
        let mut t = tensor.clone();
        for slot in (0..roles.len()).rev() {
            if roles[slot] == SlotRole::Ground {
                t = t.contract_vector(slot, self.incoming(site, slot))?;
            }
        }
        let mut labels = Vec::new();
        for (slot, role) in roles.iter().enumerate() {
            match *role {
                SlotRole::Ground => {}
                SlotRole::Excited { label, tail } => {
                    if tail {
                        let (bond, _) = self.spec.slot_bond(site, slot).ok_or(Error::UnsupportedGeometry)?;
                        t = t.apply_matrix(labels.len(), &self.projectors[bond].excited)?;
                    }
                    labels.push(label);
                }
                SlotRole::Free { label } => labels.push(label),
            }
        }
        labels.extend_from_slice(extra_labels);
        Ok((t, labels))
    }

    /// Roles of a node's slots given a sorted excited edge set (labels are
    /// positions in the set).
    pub fn roles(&self, n: NodeId, excited: &[LatticeEdge]) -> Vec<SlotRole> {
        node_slot_edges(&self.spec, n)
            .into_iter()
            .enumerate()
            .map(|(slot, e)| match excited.binary_search(&e) {
                Ok(label) => SlotRole::Excited {
                    label,
                    tail: self.spec.bonds[e.bond].a == (n.site, slot),
                },
                Err(_) => SlotRole::Ground,
            })
            .collect()
    }

    /// Weight of a closed excitation: support tensors with excited edges
    /// projected and every other slot capped.
    pub fn excitation_weight(&self, edges: &[LatticeEdge]) -> Result<C64> {
        let mut sorted = edges.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut items = Vec::new();
        for n in support_nodes(&self.spec, &sorted) {
            let roles = self.roles(n, &sorted);
            items.push(self.local_item(n.site, &self.net.node(n.site).tensor, &roles, &[])?);
        }
        Ok(contract_labeled(items, usize::MAX)?.0.to_scalar())
    }

    /// Fills the weight of every catalog entry.
    pub fn evaluate_catalog(&self, catalog: &mut ExcitationCatalog) -> Result<()> {
        if catalog.spec != self.spec {
            return Err(Error::UnsupportedGeometry);
        }
        for e in catalog.entries.iter_mut() {
            e.weight = Some(self.excitation_weight(&e.edges)?);
        }
        Ok(())
    }
}

/// Exponential fit of excitation weights against degree.
#[derive(Clone, Debug, PartialEq)]
pub struct SuppressionFit {
    /// Decay rate: `|W| ~ exp(intercept - k x)`.
    pub k: f64,
    pub intercept: f64,
    /// `|lambda_1 / lambda_0|` of a supplied single-loop transfer matrix.
    pub lambda1: Option<f64>,
    /// Number of eigenvalues sharing the sub-leading magnitude.
    pub degeneracy: Option<usize>,
}

/// Least-squares fit of `log |W|` against degree over all nonzero weights.
pub fn fit_suppression(points: &[(usize, C64)]) -> Result<SuppressionFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, w)| w.abs() > 0.0)
        .map(|&(x, w)| (x as f64, libm::log(w.abs())))
        .collect();
    if pts.is_empty() {
        return Err(Error::AllWeightsZero);
    }
    let x0 = pts[0].0;
    if pts.iter().all(|p| p.0 == x0) {
        return Err(Error::InvalidArgument("need at least two distinct degrees".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    Ok(SuppressionFit {
        k: -slope,
        intercept: my - slope * mx,
        lambda1: None,
        degeneracy: None,
    })
}

/// Weights of a catalog as `(degree, W)` pairs.
pub fn catalog_points(catalog: &ExcitationCatalog) -> Vec<(usize, C64)> {
    catalog
        .entries
        .iter()
        .filter_map(|e| e.weight.map(|w| (e.degree, w)))
        .collect()
}

/// As [`fit_suppression`], adding the sub-leading spectrum of a single-loop
/// transfer matrix (`n x n`, row-major).
pub fn fit_suppression_with_spectrum(points: &[(usize, C64)], transfer: &Tensor) -> Result<SuppressionFit> {
    let mut fit = fit_suppression(points)?;
    let (l1, deg) = subleading_spectrum(transfer)?;
    fit.lambda1 = Some(l1);
    fit.degeneracy = Some(deg);
    Ok(fit)
}

/// `(|lambda_1 / lambda_0|, multiplicity of |lambda_1|)`.
pub fn subleading_spectrum(transfer: &Tensor) -> Result<(f64, usize)> {
    if transfer.rank() != 2 || transfer.dims()[0] != transfer.dims()[1] {
        return Err(Error::DimensionMismatch("transfer matrix must be square".into()));
    }
    let n = transfer.dims()[0];
    let mut mags: Vec<f64> = eigenvalues(transfer.data(), n)?.iter().map(|z| z.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    if n < 2 || mags[0] == 0.0 {
        return Ok((0.0, 0));
    }
    let l1 = mags[1] / mags[0];
    let deg = mags[1..]
        .iter()
        .filter(|&&m| (m / mags[0] - l1).abs() <= 1e-8 * l1.max(1e-300))
        .count();
    Ok((l1, deg))
}
