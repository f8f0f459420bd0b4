mod common;

use common::{c, converge, positive_tensor, random_closed_network, random_tree, rel, rng};
use loopseries::lattice::{build_double_layer, build_finite_patch, DoubleLayerCell, LatticeSpec};
use loopseries::linalg::eigenvalues;
use loopseries::loops::brute_force_config_sum;
use loopseries::models::{aklt_peps, product_peps};
use loopseries::reference::*;
use loopseries::Tensor;
use proptest::prelude::*;

fn aklt_cell() -> DoubleLayerCell {
    build_double_layer(&aklt_peps(&LatticeSpec::hexagonal()).unwrap()).unwrap()
}

fn ones_square() -> DoubleLayerCell {
    DoubleLayerCell::from_bulk(LatticeSpec::square(), vec![Tensor::from_fn(&[2; 4], |_| c(1.0))]).unwrap()
}

#[test]
fn all_ones_torus() {
    let net = build_finite_patch(&ones_square(), 2, 2, true).unwrap();
    assert_eq!(exact_contract_patch(&net).unwrap(), c(256.0));
    let f = periodic_torus_free_energy(&ones_square(), 2).unwrap().value;
    assert!((f + 256f64.ln() / 4.0).abs() < 1e-14);
}

#[test]
fn tree_value_is_bethe_product() {
    let mut r = rng(3);
    for _ in 0..10 {
        let net = random_tree(&mut r, 9, 3);
        let (_, fp) = converge(&net);
        assert!(rel(exact_contract_patch(&net).unwrap(), fp.log_scale.exp()) < 1e-10);
    }
}

#[test]
fn product_state_references_vanish() {
    for spec in [LatticeSpec::hexagonal(), LatticeSpec::square()] {
        let cell = build_double_layer(&product_peps(&spec, &[c(0.6), c(0.8)]).unwrap()).unwrap();
        for n in [2, 4, 6] {
            assert!(periodic_torus_free_energy(&cell, n).unwrap().value.abs() < 1e-14);
        }
        assert!(strip_free_energy(&cell, 4).unwrap().value.abs() < 1e-14);
        for chi in [1, 4, 8] {
            assert!(boundary_mps_free_energy(&cell, chi).unwrap().value.abs() < 1e-14);
        }
    }
}

fn dense_strip(cell: &DoubleLayerCell, width: usize) -> f64 {
    let layout = square_layout(cell).unwrap();
    let row = row_transfer_dense(&layout, width).unwrap();
    let n = row.dims()[0];
    let top = eigenvalues(row.data(), n)
        .unwrap()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    -top.ln() / (width * layout.sites_per_cell) as f64
}

#[test]
fn strip_matches_dense_eigensolver() {
    let mut r = rng(8);
    let random = DoubleLayerCell::from_bulk(LatticeSpec::square(), vec![positive_tensor(&mut r, &[2; 4])]).unwrap();
    for cell in [ones_square(), random] {
        for w in 1..=6 {
            let got = strip_free_energy(&cell, w).unwrap().value;
            let want = dense_strip(&cell, w);
            assert!(
                (got - want).abs() <= 1e-11 * want.abs().max(1.0),
                "w={w}: {got} vs {want}"
            );
        }
    }
    for w in 1..=3 {
        let cell = aklt_cell();
        assert!((strip_free_energy(&cell, w).unwrap().value - dense_strip(&cell, w)).abs() < 1e-11);
    }
}

#[test]
fn aklt_torus_converges_with_size() {
    let f: Vec<f64> = [4, 6, 8]
        .iter()
        .map(|&n| periodic_torus_free_energy(&aklt_cell(), n).unwrap().value)
        .collect();
    assert!((f[0] - f[1]).abs() > (f[1] - f[2]).abs(), "{f:?}");
}

#[test]
fn aklt_strip_widths_agree() {
    let cell = aklt_cell();
    let f6 = strip_free_energy(&cell, 6).unwrap().value;
    let f8 = strip_free_energy(&cell, 8).unwrap().value;
    assert!((f6 - f8).abs() <= 1e-5);
}

#[test]
fn aklt_boundary_mps_matches_strip() {
    let cell = aklt_cell();
    let strip = strip_extrapolated(&cell, 6, 8).unwrap();
    let mps = boundary_mps_free_energy(&cell, 30).unwrap();
    assert!((strip.value - mps.value).abs() <= strip.error_estimate + mps.error_estimate);
    assert!((strip.value - mps.value).abs() <= 1e-7);
}

#[test]
fn aklt_boundary_mps_converges_in_chi() {
    let cell = aklt_cell();
    let f: Vec<f64> = [8, 16, 30]
        .iter()
        .map(|&chi| boundary_mps_free_energy(&cell, chi).unwrap().value)
        .collect();
    assert!((f[1] - f[0]).abs() > (f[2] - f[1]).abs(), "{f:?}");
}

#[test]
fn boundary_mps_environment_is_normalized() {
    let env = boundary_mps(&aklt_cell(), 16).unwrap();
    let rho = env.density_matrix().unwrap();
    let n = rho.dims()[0];
    let tr: loopseries::C64 = (0..n).map(|i| rho.get(&[i, i])).sum();
    assert!((tr - c(1.0)).norm() < 1e-12);
    let t = env.transfer_matrix().unwrap();
    assert_eq!(t.dims(), &[4, 4]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exact_matches_configuration_sum(seed in any::<u64>()) {
        let net = random_closed_network(&mut rng(seed), 12, 3);
        let (nnet, fp) = converge(&net);
        let (_, total) = brute_force_config_sum(&nnet, &fp).unwrap();
        prop_assert!(rel(total * fp.log_scale.exp(), exact_contract_patch(&net).unwrap()) < 1e-10);
    }
}
