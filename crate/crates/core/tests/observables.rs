use loopseries::bp::*;
use loopseries::lattice::{build_double_layer, LatticeSpec};
use loopseries::loops::*;
use loopseries::models::{aklt_peps, max_spin_projector, product_peps, random_peps};
use loopseries::observables::*;
use loopseries::{Tensor, C64};
use proptest::prelude::*;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn synthetic(entries: &[(u32, u32, usize, f64)]) -> ExcitationCatalog {
    ExcitationCatalog {
        spec: LatticeSpec::hexagonal(),
        max_degree: 12,
        entries: entries
            .iter()
            .map(|&(num, den, support, w)| Excitation {
                edges: Vec::new(),
                degree: support,
                support,
                multiplicity: (num, den),
                weight: Some(c(w)),
            })
            .collect(),
    }
}

fn vacuum(cell: &loopseries::lattice::PepsCell) -> LatticeVacuum {
    let dl = build_double_layer(cell).unwrap();
    LatticeVacuum::solve(
        &dl,
        InitStrategy::Identity,
        DEFAULT_DAMPING,
        DEFAULT_TOL,
        DEFAULT_MAX_SWEEPS,
    )
    .unwrap()
}

fn aklt() -> LatticeVacuum {
    vacuum(&aklt_peps(&LatticeSpec::hexagonal()).unwrap())
}

fn evaluated(vac: &LatticeVacuum, max_degree: usize) -> ExcitationCatalog {
    let mut cat = enumerate_excitations(&vac.spec, max_degree).unwrap();
    vac.evaluate_catalog(&mut cat).unwrap();
    cat
}

fn unit(m: &Tensor) -> Tensor {
    let n = m.dims()[0];
    let tr: C64 = (0..n).map(|i| m.get(&[i, i])).sum();
    m.scale(tr.inv())
}

#[test]
fn empty_catalog_is_pure_bp() {
    let cat = synthetic(&[]);
    assert_eq!(free_energy_single(&cat).unwrap().f, 0.0);
    assert_eq!(free_energy_multi(&cat, 1e-14, 100).unwrap().f, 0.0);
}

#[test]
fn single_entry_arithmetic() {
    let s = free_energy_single(&synthetic(&[(1, 2, 6, 1e-3)])).unwrap();
    assert!((s.f + 5e-4).abs() < 1e-18);
    assert_eq!(s.method, SeriesMethod::Single);
}

#[test]
fn zero_weights_stop_at_once() {
    let s = free_energy_multi(&synthetic(&[(1, 2, 6, 0.0), (3, 1, 10, 0.0)]), 1e-14, 100).unwrap();
    assert_eq!((s.f, s.iterations), (0.0, 1));
}

/// Root of `f + w e^{s f} = 0` by bisection.
fn bisect_root(w: f64, s: f64) -> f64 {
    let g = |f: f64| f + w * (s * f).exp();
    let (mut lo, mut hi) = (-1.0, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn multi_matches_scalar_root() {
    let oracle = bisect_root(1e-3, 4.0);
    let s = free_energy_multi(&synthetic(&[(1, 1, 4, 1e-3)]), 1e-14, 100).unwrap();
    assert!((s.f - oracle).abs() < 1e-16);
    assert!((s.f + 9.960e-4).abs() < 5e-8);
    assert!(s.self_consistency_residual <= 1e-14);
}

#[test]
fn hexagon_only_single_and_multi_agree() {
    let cat = evaluated(&aklt(), 6);
    let single = free_energy_single(&cat).unwrap().f;
    let multi = free_energy_multi(&cat, 1e-14, 100).unwrap().f;
    let w = cat.entries[0].weight.unwrap().norm();
    assert!(single != multi);
    assert!((single - multi).abs() <= 10.0 * multi.abs() * 6.0 * w);
}

#[test]
fn aklt_series_is_self_consistent() {
    let cat = evaluated(&aklt(), 12);
    let s = free_energy_multi(&cat, DEFAULT_SERIES_TOL, DEFAULT_SERIES_MAX_ITER).unwrap();
    assert!(s.self_consistency_residual <= 1e-14);
    assert!(s.iterations < 10);
    let single = free_energy_single(&cat).unwrap().f;
    assert!((single - s.f).abs() <= 10.0 * s.f * s.f * 12.0);
}

#[test]
fn vacuum_transfer_is_message_outer_product() {
    let vac = aklt();
    let open = OpenCatalog::new(&vac.spec, 0, 12).unwrap();
    let t = transfer_matrix_series(&vac, 0.0, &open).unwrap();
    let t0 = &t.per_degree[&0];
    let bond = &vac.spec.bonds[0];
    // what the head sends back to the tail, and what the tail sends forward
    let to_tail = vac.incoming(bond.a.0, bond.a.1);
    let to_head = vac.incoming(bond.b.0, bond.b.1);
    let outer = Tensor::from_fn(&[to_tail.len(), to_head.len()], |i| to_head[i[0]] * to_tail[i[1]]);
    assert!(unit(t0).max_abs_diff(&unit(&outer)) < 1e-12);
}

#[test]
fn product_state_matrices() {
    let v = [c(0.6), C64::new(0.0, 0.8)];
    let vac = vacuum(&product_peps(&LatticeSpec::hexagonal(), &v).unwrap());
    let cat = evaluated(&vac, 12);
    let f = free_energy_multi(&cat, 1e-14, 100).unwrap().f;
    assert_eq!(f, 0.0);
    let open = OpenCatalog::new(&vac.spec, 0, 12).unwrap();
    let t = transfer_matrix_series(&vac, f, &open).unwrap();
    assert_eq!(t.matrix.dims(), &[1, 1]);
    assert!((unit(&t.matrix).to_scalar() - c(1.0)).norm() < 1e-14);
    assert!((t.per_degree[&0].to_scalar() - c(1.0)).norm() < 1e-12);
    let rho = density_matrix_series(&vac, f, &open).unwrap().rho;
    let pair: Vec<C64> = (0..4).map(|k| v[k / 2] * v[k % 2]).collect();
    let pure = Tensor::from_fn(&[4, 4], |i| pair[i[0]] * pair[i[1]].conj());
    assert!(rho.max_abs_diff(&pure) < 1e-12);
}

fn hermitian_psd(m: &Tensor, tol: f64) -> bool {
    let n = m.dims()[0];
    let sym = Tensor::from_fn(&[n, n], |i| 0.5 * (m.get(&[i[0], i[1]]) + m.get(&[i[1], i[0]]).conj()));
    if sym.max_abs_diff(m) > tol {
        return false;
    }
    let flat: Vec<C64> = (0..n * n).map(|k| sym.get(&[k / n, k % n])).collect();
    let (vals, _) = loopseries::linalg::hermitian_eig(&flat, n);
    vals.iter().all(|&x| x > -tol)
}

#[test]
fn aklt_vacuum_density_is_a_state() {
    let vac = aklt();
    let open = OpenCatalog::new(&vac.spec, 0, 12).unwrap();
    let rho = density_matrix_series(&vac, 0.0, &open).unwrap();
    let r0 = rho.up_to(0).unwrap();
    assert!(hermitian_psd(&r0, 1e-10));
    let tr: C64 = (0..r0.dims()[0]).map(|i| r0.get(&[i, i])).sum();
    assert!((tr - c(1.0)).norm() < 1e-12);
}

#[test]
fn aklt_max_spin_weight_vanishes_at_every_degree() {
    let vac = aklt();
    let cat = evaluated(&vac, 12);
    let f = free_energy_multi(&cat, 1e-14, 100).unwrap().f;
    let open = OpenCatalog::new(&vac.spec, 0, 12).unwrap();
    let rho = density_matrix_series(&vac, f, &open).unwrap();
    let proj = max_spin_projector(4);
    let mut prev = f64::INFINITY;
    for &deg in rho.per_degree.keys() {
        let e = expectation(&rho.up_to(deg).unwrap(), &proj).unwrap().norm();
        assert!(e <= prev + 1e-14 && e < 1e-12, "degree {deg}: {e}");
        prev = e;
    }
    assert!(hermitian_psd(&rho.rho, 1e-10));
}

/// A loop far from the cut, added as an explicit disconnected term, only
/// moves the normalized transfer matrix at second order.
#[test]
fn distant_loop_is_accounted_for() {
    let vac = aklt();
    let cat = evaluated(&vac, 12);
    let f = free_energy_multi(&cat, 1e-14, 100).unwrap().f;
    let open = OpenCatalog::new(&vac.spec, 0, 12).unwrap();
    let t = transfer_matrix_series(&vac, f, &open).unwrap();
    let hex = &cat.entries[0];
    let far: Vec<LatticeEdge> = hex.edges.iter().map(|e| e.translate([4, 4])).collect();
    let w = vac.excitation_weight(&far).unwrap();
    let extra = t.per_degree[&0].scale(w * (hex.support as f64 * f).exp());
    let with = unit(&t.matrix.add(&extra).unwrap());
    let base = unit(&t.matrix);
    let diff = with.max_abs_diff(&base);
    assert!(diff <= 10.0 * w.norm() * f.abs() * base.norm(), "{diff}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_and_multi_agree_to_first_order(
        raw in prop::collection::vec((1u32..4, 1u32..3, 4usize..13, 0.0f64..1e-3), 1..12),
        sign in prop::sample::select(vec![1.0, -1.0]),
    ) {
        // one sign throughout, so that |f| sets the scale of the weights
        let entries: Vec<_> = raw.iter().map(|&(n, d, s, w)| (n, d, s, sign * w / n as f64)).collect();
        let cat = synthetic(&entries);
        let single = free_energy_single(&cat).unwrap().f;
        let multi = free_energy_multi(&cat, 1e-14, 100).unwrap();
        let max_s = entries.iter().map(|e| e.2).max().unwrap() as f64;
        prop_assert!((single - multi.f).abs() <= 10.0 * multi.f * multi.f * max_s + 1e-18);
        prop_assert!(multi.self_consistency_residual <= 1e-14);
    }

    #[test]
    fn random_vacuum_density_is_a_state(seed in 0u64..500) {
        let vac = vacuum(&random_peps(&LatticeSpec::hexagonal(), 2, 2, seed).unwrap());
        let open = OpenCatalog::new(&vac.spec, 0, 6).unwrap();
        let rho = density_matrix_series(&vac, 0.0, &open).unwrap();
        prop_assert!(hermitian_psd(&rho.up_to(0).unwrap(), 1e-10));
    }
}
