mod common;

use common::{library_values, random_space, ThbOracle};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thbez::hierarchy::HierarchicalSpace;
use thbez::spline::{KnotVector, TensorSpace2D};

fn points(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0)))
        .collect();
    pts.extend([(0.0, 0.0), (1.0, 1.0), (0.5, 0.25), (1.0, 0.0)]);
    pts
}

fn compare_with_oracle(hs: &HierarchicalSpace, truncate: bool, seed: u64) -> f64 {
    let oracle = ThbOracle::new(hs, truncate);
    assert_eq!(
        oracle.functions.len(),
        hs.num_functions(),
        "active function count"
    );
    for (id, &(l, i, j)) in oracle.functions.iter().enumerate() {
        let nu = hs.level(l).space().basis_dims().0;
        assert_eq!(hs.function_of(id), (l, i + nu * j), "function {id}");
    }
    let mut worst = 0.0f64;
    for (xi, eta) in points(seed, 60) {
        let lib = library_values(hs, xi, eta);
        for (a, b) in lib.iter().zip(oracle.eval(xi, eta)) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

#[test]
fn corner_refinement_matches_definition() {
    let kv = KnotVector::open_uniform(2, 4, 0.0, 1.0).unwrap();
    let hs = HierarchicalSpace::new(TensorSpace2D::from_knots(kv.clone(), kv), 3).unwrap();
    let hs = hs
        .refine_elements(&[(0, 0), (0, 1), (0, 4), (0, 5)])
        .unwrap();
    let hs = hs
        .refine_elements(&[(1, 0), (1, 1), (1, 8), (1, 9)])
        .unwrap();
    assert!(compare_with_oracle(&hs, true, 1) < 1e-13);
    assert!(compare_with_oracle(&hs.with_truncation(false), false, 2) < 1e-13);
}

#[test]
fn unrefined_space_is_the_tensor_basis() {
    let ku = KnotVector::new(vec![0.0, 0.0, 0.0, 0.25, 0.5, 0.75, 0.75, 1.0, 1.0, 1.0], 2).unwrap();
    let kv = KnotVector::open_uniform(3, 3, 0.0, 1.0).unwrap();
    let hs = HierarchicalSpace::new(TensorSpace2D::from_knots(ku, kv), 2).unwrap();
    assert_eq!(hs.num_functions(), 7 * 6);
    assert!(compare_with_oracle(&hs, true, 3) < 1e-13);
}

#[test]
fn multilevel_operator_rows_are_oracle_expansions() {
    let hs = random_space(11, 3);
    assert_eq!(hs.num_levels_in_use(), 3);
    let oracle = ThbOracle::new(&hs, true);
    let m = hs.global_multilevel_operator(2).unwrap();
    let nu = hs.level(2).space().basis_dims().0;
    for (id, c) in oracle.fine_coeffs.iter().enumerate() {
        for j in 0..c.ncols() {
            for i in 0..c.nrows() {
                assert!((m.matrix[(id, i + nu * j)] - c[(i, j)]).abs() < 1e-14);
            }
        }
    }
    for s in m.column_sums() {
        assert!((s - 1.0).abs() < 1e-13);
    }
}

#[test]
fn truncation_removes_functions_inside_the_finer_subdomain() {
    let hs = random_space(5, 3);
    let oracle = ThbOracle::new(&hs, true);
    let lev1 = &oracle.levels[1];
    let (n1u, n1v) = hs.level(1).space().basis_dims();
    let ones = vec![1.0; n1u * n1v];
    let t = hs.truncate_coefficients(0, &ones).unwrap();
    for j in 0..n1v {
        for i in 0..n1u {
            let expect = if lev1.support_inside(2, 2, i, j) {
                0.0
            } else {
                1.0
            };
            assert_eq!(t[i + n1u * j], expect);
        }
    }
    assert_eq!(
        hs.with_truncation(false)
            .truncate_coefficients(0, &ones)
            .unwrap(),
        ones
    );
    assert!(hs.truncate_coefficients(2, &ones).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn thb_basis_matches_definition(seed in any::<u64>(), levels in 2usize..=4) {
        let hs = random_space(seed, levels);
        let e = compare_with_oracle(&hs, true, seed ^ 0x5eed);
        prop_assert!(e < 1e-12, "max deviation {e}");
    }

    #[test]
    fn hb_basis_matches_definition(seed in any::<u64>(), levels in 2usize..=3) {
        let hs = random_space(seed, levels).with_truncation(false);
        let e = compare_with_oracle(&hs, false, seed);
        prop_assert!(e < 1e-12, "max deviation {e}");
    }

    #[test]
    fn partition_of_unity_and_nonnegativity(seed in any::<u64>(), levels in 1usize..=4) {
        let hs = random_space(seed, levels);
        for (xi, eta) in points(seed, 200) {
            let b = hs.eval_hier_basis(xi, eta).unwrap();
            prop_assert!((b.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(b.values.iter().all(|&v| v >= -1e-15));
            let gsum = b.gradients.iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
            prop_assert!(gsum[0].abs() < 1e-9 && gsum[1].abs() < 1e-9);
        }
    }

    #[test]
    fn element_operators_match_direct_evaluation(seed in any::<u64>(), levels in 2usize..=4) {
        let hs = random_space(seed, levels);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for el in hs.elements() {
            for _ in 0..10 {
                let (xi, eta) = el.to_parametric(rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99));
                let via_c = library_values(&hs, xi, eta);
                let (ids, vals) = hs.eval_direct(xi, eta).unwrap();
                let mut direct = vec![0.0; hs.num_functions()];
                for (i, v) in ids.into_iter().zip(vals) {
                    direct[i] = v;
                }
                for (a, b) in via_c.iter().zip(&direct) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn covering_invariant(seed in any::<u64>(), levels in 1usize..=4) {
        // active cells tile the parameter domain exactly once
        let hs = random_space(seed, levels);
        let area: f64 = hs
            .active_element_list()
            .into_iter()
            .map(|(l, e)| {
                let ((u0, u1), (v0, v1)) = hs.cell_bounds(l, e);
                (u1 - u0) * (v1 - v0)
            })
            .sum();
        prop_assert!((area - 1.0).abs() < 1e-13);
        for (xi, eta) in points(seed, 50) {
            let (l, e) = hs.locate(xi, eta).unwrap();
            let ((u0, u1), (v0, v1)) = hs.cell_bounds(l, e);
            prop_assert!(u0 <= xi && xi <= u1 && v0 <= eta && eta <= v1);
        }
    }
}
