//! Series-corrected free energy, bond transfer matrix and two-site density
//! matrix on top of a normalized lattice vacuum.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::loops::{
    enumerate_open_excitations, support_nodes, ExcitationCatalog, LatticeEdge, LatticeVacuum, OpenExcitation, SlotRole,
};
use crate::network::{contract_labeled, NodeId};
use crate::reference::unit_trace;
use crate::tensor::Tensor;
use crate::C64;

pub const DEFAULT_SERIES_TOL: f64 = 1e-14;
pub const DEFAULT_SERIES_MAX_ITER: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesMethod {
    Single,
    Multi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreeEnergySeries {
    /// Loop correction per site; add the Bethe value for the full estimate.
    pub f: f64,
    /// Degree -> `-sum L W e^{S f}` over entries of that degree (real part).
    pub per_degree: BTreeMap<usize, f64>,
    pub method: SeriesMethod,
    pub iterations: usize,
    pub self_consistency_residual: f64,
    /// Imaginary part of the summed correction.
    pub imaginary_part: f64,
}

fn weight_of(e: &crate::loops::Excitation) -> Result<C64> {
    e.weight
        .ok_or(Error::InvalidArgument("catalog weights not evaluated".into()))
}

/// First-order series: `f = -sum L Re W`.
pub fn free_energy_single(catalog: &ExcitationCatalog) -> Result<FreeEnergySeries> {
    let mut per_degree = BTreeMap::new();
    let mut total = C64::new(0.0, 0.0);
    for e in &catalog.entries {
        let t = -weight_of(e)? * e.multiplicity_f64();
        *per_degree.entry(e.degree).or_insert(0.0) += t.re;
        total += t;
    }
    Ok(FreeEnergySeries {
        f: total.re,
        per_degree,
        method: SeriesMethod::Single,
        iterations: 1,
        self_consistency_residual: 0.0,
        imaginary_part: total.im,
    })
}

fn multi_rhs(catalog: &ExcitationCatalog, f: f64) -> Result<(C64, BTreeMap<usize, f64>)> {
    let mut per_degree = BTreeMap::new();
    let mut total = C64::new(0.0, 0.0);
    for e in &catalog.entries {
        let t = -weight_of(e)? * (e.multiplicity_f64() * libm::exp(e.support as f64 * f));
        *per_degree.entry(e.degree).or_insert(0.0) += t.re;
        total += t;
    }
    Ok((total, per_degree))
}

/// Self-consistent series `f = -sum L W e^{S f}` iterated from `f = 0`.
pub fn free_energy_multi(catalog: &ExcitationCatalog, tol: f64, max_iter: usize) -> Result<FreeEnergySeries> {
    let mut f = 0.0;
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let (rhs, _) = multi_rhs(catalog, f)?;
        if !rhs.re.is_finite() {
            return Err(Error::NonFinite("free energy series"));
        }
        change = (rhs.re - f).abs();
        f = rhs.re;
        if change < tol {
            let (check, per_degree) = multi_rhs(catalog, f)?;
            return Ok(FreeEnergySeries {
                f,
                per_degree,
                method: SeriesMethod::Multi,
                iterations: it,
                self_consistency_residual: (check.re - f).abs(),
                imaginary_part: check.im,
            });
        }
    }
    Err(Error::SeriesNonConvergence {
        iterations: max_iter,
        change,
    })
}

/// Open excitations around one bond of cell `(0, 0)`.
#[derive(Clone, Debug)]
pub struct OpenCatalog {
    pub bond: usize,
    pub max_degree: usize,
    pub entries: Vec<OpenExcitation>,
}

impl OpenCatalog {
    pub fn new(spec: &LatticeSpec, bond: usize, max_degree: usize) -> Result<Self> {
        Ok(OpenCatalog {
            bond,
            max_degree,
            entries: enumerate_open_excitations(spec, bond, max_degree)?,
        })
    }

    pub fn counts_by_degree(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.degree).or_insert(0) += 1;
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct TransferMatrixResult {
    /// `[tail index, head index]`, unnormalized.
    pub matrix: Tensor,
    /// Degree -> summed contribution; degree 0 is the vacuum term.
    pub per_degree: BTreeMap<usize, Tensor>,
}

#[derive(Clone, Debug)]
pub struct DensityMatrixResult {
    /// Rows `(ket tail, ket head)`, columns `(bra tail, bra head)`; unit trace.
    pub rho: Tensor,
    /// Unnormalized contributions by degree.
    pub per_degree: BTreeMap<usize, Tensor>,
    pub trace_before_normalization: C64,
}

impl TransferMatrixResult {
    /// Sum of contributions up to `max_degree`.
    pub fn up_to(&self, max_degree: usize) -> Result<Tensor> {
        partial_sum(&self.per_degree, max_degree)
    }
}

impl DensityMatrixResult {
    /// Unit-trace density matrix from contributions up to `max_degree`.
    pub fn up_to(&self, max_degree: usize) -> Result<Tensor> {
        unit_trace(&partial_sum(&self.per_degree, max_degree)?)
    }
}

fn partial_sum(parts: &BTreeMap<usize, Tensor>, max_degree: usize) -> Result<Tensor> {
    let mut acc: Option<Tensor> = None;
    for (_, t) in parts.range(..=max_degree) {
        acc = Some(match acc {
            None => t.clone(),
            Some(a) => a.add(t)?,
        });
    }
    acc.ok_or(Error::InvalidArgument("no contributions".into()))
}

fn cut_bond(vac: &LatticeVacuum, bond: usize) -> Result<(LatticeEdge, NodeId, NodeId)> {
    if bond >= vac.spec.bonds.len() {
        return Err(Error::UnknownEdge(bond));
    }
    let cut = LatticeEdge { cell: [0, 0], bond };
    let (a, b) = cut.nodes(&vac.spec);
    if a == b {
        return Err(Error::NotAdjacent);
    }
    Ok((cut, a, b))
}

/// Contraction of the bond ends and the excitation support. Excited edges
/// are projected; the bond slots keep `bond_labels`; with impurities the
/// physical `(ket, bra)` axes of both ends are kept and come last.
fn open_term(
    vac: &LatticeVacuum,
    bond: usize,
    edges: &[LatticeEdge],
    bond_labels: [usize; 2],
    impurity: bool,
) -> Result<Tensor> {
    let (_, na, nb) = cut_bond(vac, bond)?;
    let spec = &vac.spec;
    let mut nodes = support_nodes(spec, edges);
    nodes.push(na);
    nodes.push(nb);
    nodes.sort_unstable();
    nodes.dedup();
    let phys = edges.len() + 2;
    let mut items = Vec::with_capacity(nodes.len());
    for n in nodes {
        let mut roles = vac.roles(n, edges);
        let mut extra: &[usize] = &[];
        let (ka, kb) = ([phys, phys + 1], [phys + 2, phys + 3]);
        if n == na {
            roles[spec.bonds[bond].a.1] = SlotRole::Free { label: bond_labels[0] };
            if impurity {
                extra = &ka;
            }
        }
        if n == nb {
            roles[spec.bonds[bond].b.1] = SlotRole::Free { label: bond_labels[1] };
            if impurity {
                extra = &kb;
            }
        }
        let t = if impurity && !extra.is_empty() {
            let imp = vac
                .impurity
                .as_ref()
                .ok_or(Error::InvalidArgument("no impurity tensors".into()))?;
            &imp[n.site]
        } else {
            &vac.net.node(n.site).tensor
        };
        items.push(vac.local_item(n.site, t, &roles, extra)?);
    }
    Ok(contract_labeled(items, usize::MAX)?.0)
}

fn suppression(e: &OpenExcitation, f: f64) -> f64 {
    libm::exp((e.support_with_bond as f64 - 2.0) * f)
}

/// Environment of bond `bond`: the network with that edge cut, as a matrix
/// indexed by the tail and head slots.
pub fn transfer_matrix_series(vac: &LatticeVacuum, f: f64, open: &OpenCatalog) -> Result<TransferMatrixResult> {
    let bond = open.bond;
    let e = open.entries.iter().map(|x| x.edges.len()).max().unwrap_or(0);
    let labels = [e, e + 1];
    let mut per_degree = BTreeMap::new();
    per_degree.insert(0, open_term(vac, bond, &[], labels, false)?);
    for x in &open.entries {
        let n = x.edges.len();
        let t = open_term(vac, bond, &x.edges, [n, n + 1], false)?.scale(C64::new(suppression(x, f), 0.0));
        accumulate(&mut per_degree, x.degree, t)?;
    }
    let matrix = partial_sum(&per_degree, usize::MAX)?;
    Ok(TransferMatrixResult { matrix, per_degree })
}

/// Two-site reduced density matrix across bond `bond`.
pub fn density_matrix_series(vac: &LatticeVacuum, f: f64, open: &OpenCatalog) -> Result<DensityMatrixResult> {
    let bond = open.bond;
    let d = match &vac.impurity {
        Some(imp) => *imp[0].dims().last().unwrap(),
        None => return Err(Error::InvalidArgument("no impurity tensors".into())),
    };
    let reshape = |t: Tensor| -> Result<Tensor> { t.permute(&[0, 2, 1, 3])?.reshape(&[d * d, d * d]) };
    let mut per_degree = BTreeMap::new();
    per_degree.insert(0, reshape(open_term(vac, bond, &[], [0, 0], true)?)?);
    for x in &open.entries {
        let n = x.edges.len();
        let t = reshape(open_term(vac, bond, &x.edges, [n, n], true)?)?;
        accumulate(&mut per_degree, x.degree, t.scale(C64::new(suppression(x, f), 0.0)))?;
    }
    let raw = partial_sum(&per_degree, usize::MAX)?;
    let trace: C64 = (0..d * d).map(|i| raw.get(&[i, i])).sum();
    Ok(DensityMatrixResult {
        rho: unit_trace(&raw)?,
        per_degree,
        trace_before_normalization: trace,
    })
}

fn accumulate(map: &mut BTreeMap<usize, Tensor>, degree: usize, t: Tensor) -> Result<()> {
    match map.get_mut(&degree) {
        Some(acc) => *acc = acc.add(&t)?,
        None => {
            map.insert(degree, t);
        }
    }
    Ok(())
}

/// `Tr(rho O)` for a matrix observable on the same space.
pub fn expectation(rho: &Tensor, op: &Tensor) -> Result<C64> {
    let n = rho.dims()[0];
    if op.dims() != rho.dims() {
        return Err(Error::DimensionMismatch("observable shape".into()));
    }
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += rho.get(&[i, j]) * op.get(&[j, i]);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::Excitation;
    use alloc::vec;

    fn catalog(entries: Vec<(usize, usize, (u32, u32), f64)>) -> ExcitationCatalog {
        ExcitationCatalog {
            spec: LatticeSpec::hexagonal(),
            max_degree: 12,
            entries: entries
                .into_iter()
                .map(|(degree, support, multiplicity, w)| Excitation {
                    edges: Vec::new(),
                    degree,
                    support,
                    multiplicity,
                    weight: Some(C64::new(w, 0.0)),
                })
                .collect(),
        }
    }

    #[test]
    fn empty_catalog_is_pure_bp() {
        let c = catalog(vec![]);
        assert_eq!(free_energy_single(&c).unwrap().f, 0.0);
        let m = free_energy_multi(&c, 1e-14, 100).unwrap();
        assert_eq!((m.f, m.iterations), (0.0, 1));
    }

    #[test]
    fn single_entry_arithmetic() {
        let c = catalog(vec![(6, 6, (1, 2), 1e-3)]);
        assert!((free_energy_single(&c).unwrap().f + 5e-4).abs() < 1e-18);
    }

    #[test]
    fn zero_weights_converge_at_once() {
        let c = catalog(vec![(6, 6, (1, 2), 0.0), (10, 10, (3, 2), 0.0)]);
        let m = free_energy_multi(&c, 1e-14, 100).unwrap();
        assert_eq!((m.f, m.iterations), (0.0, 1));
    }

    #[test]
    fn divergent_series_reports_failure() {
        let c = catalog(vec![(4, 4, (1, 1), 1.0)]);
        assert!(matches!(
            free_energy_multi(&c, 1e-14, 5),
            Err(Error::SeriesNonConvergence { .. })
        ));
    }
}
