mod common;

use common::{c, complex_tensor, naive_contract, rng};
use loopseries::tensor::{contract_pair, factorize, outer};
use loopseries::{Tensor, C64};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn rel_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.sub(b).unwrap().norm() / b.norm().max(1e-300)
}

fn reconstruct(t: &Tensor, left: &[usize], max_rank: Option<usize>, cutoff: f64) -> (Tensor, Tensor, f64) {
    let f = factorize(t, left, max_rank, cutoff).unwrap();
    let k = f.left.rank() - 1;
    let back = contract_pair(&f.left, &[k], &f.right, &[0]).unwrap();
    let mut order = left.to_vec();
    order.extend((0..t.rank()).filter(|x| !left.contains(x)));
    (back, t.permute(&order).unwrap(), f.discarded_weight)
}

#[test]
fn identity_with_identity() {
    let i = Tensor::identity(2);
    assert_eq!(contract_pair(&i, &[1], &i, &[0]).unwrap(), i);
}

#[test]
fn vector_with_itself() {
    let v = Tensor::vector(vec![c(1.0), c(2.0), c(-3.0)]);
    assert_eq!(contract_pair(&v, &[0], &v, &[0]).unwrap().to_scalar(), c(14.0));
}

#[test]
fn random_pair_matches_nested_loops() {
    let mut r = rng(7);
    let a = complex_tensor(&mut r, &[2, 3, 2]);
    let b = complex_tensor(&mut r, &[3, 2]);
    let fast = contract_pair(&a, &[1], &b, &[0]).unwrap();
    let slow = naive_contract(&a, &[1], &b, &[0]);
    assert_eq!(fast.dims(), &[2, 2, 2]);
    assert!(rel_diff(&fast, &slow) < 1e-13);
}

#[test]
fn identity_permutation_is_bitwise() {
    let t = complex_tensor(&mut rng(1), &[2, 3, 4]);
    assert_eq!(t.permute(&[0, 1, 2]).unwrap(), t);
}

#[test]
fn transpose_swaps_entries() {
    let t = Tensor::from_real(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let p = t.permute(&[1, 0]).unwrap();
    assert_eq!(p.dims(), &[3, 2]);
    for i in 0..2 {
        for j in 0..3 {
            assert_eq!(p.get(&[j, i]), t.get(&[i, j]));
        }
    }
}

#[test]
fn permute_then_inverse() {
    let t = complex_tensor(&mut rng(2), &[2, 2, 3]);
    let p = t.permute(&[2, 0, 1]).unwrap();
    assert_eq!(p.permute(&[1, 2, 0]).unwrap(), t);
}

#[test]
fn outer_product_has_rank_one() {
    let u = Tensor::vector(vec![c(1.0), c(2.0)]);
    let v = Tensor::vector(vec![c(3.0), c(-1.0), c(0.5)]);
    let f = factorize(&outer(&u, &v), &[0], None, 0.0).unwrap();
    assert_eq!(f.left.dims(), &[2, 1]);
    assert_eq!(f.right.dims(), &[1, 3]);
    assert_eq!(f.discarded_weight, 0.0);
}

#[test]
fn identity_split_two_two() {
    let t = Tensor::identity(4).reshape(&[2, 2, 2, 2]).unwrap();
    let (back, want, _) = reconstruct(&t, &[0, 1], None, 0.0);
    assert!(back.max_abs_diff(&want) < 1e-13);
}

#[test]
fn random_split_reconstructs() {
    let t = complex_tensor(&mut rng(3), &[2, 2, 2, 2]);
    let (back, want, w) = reconstruct(&t, &[0, 1], None, 0.0);
    assert!(rel_diff(&back, &want) <= 1e-12);
    assert!(w < 1e-24);
}

#[test]
fn rank_cap_reports_discarded_weight() {
    let t = complex_tensor(&mut rng(4), &[3, 3]);
    let f = factorize(&t, &[0], Some(1), 0.0).unwrap();
    let s2: f64 = f.singular_values.iter().map(|s| s * s).sum();
    assert_eq!(f.left.dims(), &[3, 1]);
    assert!(f.discarded_weight > 0.0);
    assert!(f.discarded_weight < 1.0);
    assert!(s2 > 0.0);
}

#[test]
fn scale_and_norm() {
    let t = complex_tensor(&mut rng(5), &[3, 2]);
    assert_eq!(t.scale(c(1.0)), t);
    assert!((Tensor::identity(2).norm() - 2f64.sqrt()).abs() < 1e-15);
    let u = t.scale(c(1.0 / t.norm()));
    assert!((u.norm() - 1.0).abs() < 1e-14);
}

#[test]
fn non_finite_input_rejected() {
    assert!(Tensor::new(vec![2], vec![c(1.0), C64::new(f64::NAN, 0.0)]).is_err());
}

fn pair_case() -> impl Strategy<Value = (u64, usize, usize, usize, Vec<usize>)> {
    (
        any::<u64>(),
        1usize..=3,
        1usize..=3,
        0usize..=3,
        prop::collection::vec(1usize..=3, 6),
    )
        .prop_filter("at most six axes", |(_, ra, rb, k, _)| ra + rb <= 6 && k <= ra.min(rb))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contract_pair_matches_oracle((seed, ra, rb, k, dims) in pair_case()) {
        let mut r = rng(seed);
        let da: Vec<usize> = dims[..ra].to_vec();
        let mut axes_a: Vec<usize> = (0..ra).collect();
        axes_a.shuffle(&mut r);
        axes_a.truncate(k);
        let mut axes_b: Vec<usize> = (0..rb).collect();
        axes_b.shuffle(&mut r);
        axes_b.truncate(k);
        let mut db: Vec<usize> = dims[ra..ra + rb].to_vec();
        for j in 0..k {
            db[axes_b[j]] = da[axes_a[j]];
        }
        let a = complex_tensor(&mut r, &da);
        let b = complex_tensor(&mut r, &db);
        let fast = contract_pair(&a, &axes_a, &b, &axes_b).unwrap();
        let slow = naive_contract(&a, &axes_a, &b, &axes_b);
        prop_assert_eq!(fast.dims(), slow.dims());
        prop_assert!(rel_diff(&fast, &slow) <= 1e-12);
        prop_assert!(fast.is_finite());
    }

    #[test]
    fn factorize_reconstructs(seed in any::<u64>(), dims in prop::collection::vec(1usize..=4, 2..=4), split in 1usize..=3) {
        let split = split.min(dims.len() - 1);
        let t = complex_tensor(&mut rng(seed), &dims);
        let left: Vec<usize> = (0..split).collect();
        let (back, want, _) = reconstruct(&t, &left, None, 0.0);
        prop_assert!(rel_diff(&back, &want) <= 1e-11);
    }

    #[test]
    fn permute_preserves_norm(seed in any::<u64>(), dims in prop::collection::vec(1usize..=3, 1..=4)) {
        let mut r = rng(seed);
        let t = complex_tensor(&mut r, &dims);
        let mut order: Vec<usize> = (0..dims.len()).collect();
        order.shuffle(&mut r);
        let p = t.permute(&order).unwrap();
        let mut a: Vec<f64> = t.data().iter().map(|z| z.norm_sqr()).collect();
        let mut b: Vec<f64> = p.data().iter().map(|z| z.norm_sqr()).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }
}
