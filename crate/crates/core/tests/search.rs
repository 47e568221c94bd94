mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use sdentropy::linalg::CMatrix;
use sdentropy::model::{Constellation, Ordering};
use sdentropy::search::{
    babai_anchor, bfs_search, complexity_c, dfs_search, full_tree_nodes, k_for_budget, path_cost, zf_anchor,
    DepthFirst, TreeSearch,
};

/// A noisy observation of a random input on a random channel, in the rotated domain.
fn instance(seed: u64, n: usize, c: &Constellation, rho: f64, ordering: Ordering) -> (sdentropy::ChannelInstance, Vec<Complex64>, Vec<Complex64>) {
    let mut r = rng(seed);
    let ch = random_channel(n, ordering, &mut r);
    let alphabet = c.scaled(rho);
    let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..c.size())).collect();
    let mut z = ch.h().mul_vec(&symbols(&alphabet, &idx));
    for (zi, ni) in z.iter_mut().zip(random_vec(n, &mut r)) {
        *zi += ni * std::f64::consts::FRAC_1_SQRT_2;
    }
    let v = ch.rotate(&z);
    (ch, z, v)
}

#[test]
fn dfs_equals_brute_force_in_radius_set() {
    let bin = binary();
    for seed in 0..20 {
        let (ch, _, v) = instance(seed, 6, &bin, 2.0, Ordering::Natural);
        let alphabet = bin.scaled(2.0);
        let anchor = zf_anchor(&v, ch.r(), &alphabet);
        let zeta = 1.5 * path_cost(&v, ch.r(), &alphabet, &anchor);
        let cs = dfs_search(&v, ch.r(), zeta, &alphabet);
        let found: std::collections::HashSet<Vec<usize>> = cs.candidates.iter().map(|c| c.indices.clone()).collect();
        for idx in all_indices(2, 6) {
            let d = direct_distance(&v, ch.r(), &alphabet, &idx);
            if (d - zeta).abs() < 1e-9 {
                continue;
            }
            assert_eq!(found.contains(&idx), d <= zeta, "seed {seed} idx {idx:?} d {d} zeta {zeta}");
        }
        for c in &cs.candidates {
            assert!((c.distance - direct_distance(&v, ch.r(), &alphabet, &c.indices)).abs() < 1e-10);
        }
    }
}

#[test]
fn unitary_invariance_of_distances() {
    let qam = qam4();
    for seed in 0..10 {
        let (ch, z, v) = instance(100 + seed, 4, &qam, 3.0, Ordering::Sorted);
        let alphabet = qam.scaled(3.0);
        for idx in all_indices(4, 4).into_iter().step_by(17) {
            let rotated = direct_distance(&v, ch.r(), &alphabet, &idx);
            // d in factor order maps to channel columns through the permutation
            let col_order = ch.from_factor_order(&symbols(&alphabet, &idx));
            let received = dist(&z, &ch.h().mul_vec(&col_order));
            assert!((rotated - received).abs() <= 1e-8, "{rotated} vs {received}");
        }
    }
}

#[test]
fn babai_matches_per_coordinate_brute_force() {
    let qam = qam4();
    for seed in 0..20 {
        let (ch, z, _) = instance(200 + seed, 5, &qam, 4.0, Ordering::Natural);
        let alphabet = qam.scaled(4.0);
        let got = babai_anchor(&ch, &z, &qam, 4.0).unwrap();
        // unconstrained least squares through an independent solver
        let h = to_nalgebra(ch.h());
        let zz = nalgebra::DVector::from_column_slice(&z);
        let x = h.lu().solve(&zz).unwrap();
        for k in 0..5 {
            let best = (0..4)
                .min_by(|&a, &b| (x[k] - alphabet[a]).norm_sqr().total_cmp(&(x[k] - alphabet[b]).norm_sqr()))
                .unwrap();
            assert_eq!(got[k], best);
        }
    }
}

#[test]
fn babai_identity_examples() {
    let bin = binary();
    let ch = sdentropy::model::fir_channel(&[1.0], 3).unwrap();
    let rho: f64 = 2.0;
    let d = [1usize, 0, 1];
    let z: Vec<Complex64> = symbols(&bin.scaled(rho), &d);
    assert_eq!(babai_anchor(&ch, &z, &bin, rho).unwrap(), d.to_vec());
    let z = vec![Complex64::new(0.1, 0.0); 3];
    assert_eq!(babai_anchor(&ch, &z, &bin, rho).unwrap(), vec![1, 1, 1]);
}

#[test]
fn k1_noiseless_recovers_input() {
    let bin = binary();
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let ch = random_channel(7, Ordering::Natural, &mut r);
        let alphabet = bin.scaled(5.0);
        let idx: Vec<usize> = (0..7).map(|_| r.random_range(0..2)).collect();
        let v = ch.r().mul_vec(&symbols(&alphabet, &idx));
        let cs = bfs_search(&v, ch.r(), 1, &alphabet);
        let best = all_indices(2, 7)
            .into_iter()
            .min_by(|a, b| direct_distance(&v, ch.r(), &alphabet, a).total_cmp(&direct_distance(&v, ch.r(), &alphabet, b)))
            .unwrap();
        assert_eq!(best, idx);
        assert_eq!(cs.candidates[0].indices, idx);
        assert!(cs.candidates[0].distance < 1e-20);
    }
}

#[test]
fn k50_binary_eleven_visits_626() {
    let bin = binary();
    let (ch, _, v) = instance(7, 11, &bin, 1.0, Ordering::Natural);
    let cs = bfs_search(&v, ch.r(), 50, &bin.scaled(1.0));
    assert_eq!(cs.visited_nodes, 626);
    assert_eq!(complexity_c(50, 2, 11), 626);
}

#[test]
fn pruned_mass_soundness() {
    // found + pruned ≥ true total ≥ found, and in DFS mode pruned ≤ (M^N − |found|)·exp(−ζ²)
    let qam = qam4();
    for seed in 0..30 {
        let (ch, _, v) = instance(400 + seed, 4, &qam, 2.0, Ordering::Sorted);
        let alphabet = qam.scaled(2.0);
        let total: f64 = all_indices(4, 4)
            .iter()
            .map(|idx| (-direct_distance(&v, ch.r(), &alphabet, idx)).exp())
            .sum();
        for alpha in [1.0, 1.5, 2.0] {
            let anchor = zf_anchor(&v, ch.r(), &alphabet);
            let cs = DepthFirst::new(alpha).unwrap().search(&v, ch.r(), &alphabet, &anchor);
            let found: f64 = cs.distances().map(|d| (-d).exp()).sum();
            let pruned = cs.pruned_mass();
            assert!(found <= total * (1.0 + 1e-12));
            assert!(found + pruned >= total * (1.0 - 1e-12));
            let tail = (256 - cs.len()) as f64 * (-cs.radius_sq).exp();
            assert!(pruned <= tail * (1.0 + 1e-12), "pruned {pruned} tail {tail}");
            assert!(total <= found + tail + 1e-12 * total);
        }
        for k in [1, 4, 16] {
            let cs = bfs_search(&v, ch.r(), k, &alphabet);
            let found: f64 = cs.distances().map(|d| (-d).exp()).sum();
            assert!(found <= total * (1.0 + 1e-12));
            assert!(found + cs.pruned_mass() >= total * (1.0 - 1e-12));
        }
    }
}

#[test]
fn dfs_sets_grow_with_alpha() {
    let bin = binary();
    for seed in 0..10 {
        let (ch, _, v) = instance(500 + seed, 8, &bin, 1.0, Ordering::Natural);
        let alphabet = bin.scaled(1.0);
        let anchor = zf_anchor(&v, ch.r(), &alphabet);
        let mut prev: Option<std::collections::HashSet<Vec<usize>>> = None;
        for alpha in [1.0, 1.25, 1.5, 2.0, 3.0, f64::INFINITY] {
            let cs = DepthFirst::new(alpha).unwrap().search(&v, ch.r(), &alphabet, &anchor);
            let set: std::collections::HashSet<_> = cs.candidates.into_iter().map(|c| c.indices).collect();
            if let Some(p) = &prev {
                assert!(p.is_subset(&set));
            }
            prev = Some(set);
        }
        assert_eq!(prev.unwrap().len(), 256);
    }
}

#[test]
fn bfs_full_width_matches_full_tree() {
    let qam = qam4();
    let (ch, _, v) = instance(9, 4, &qam, 1.0, Ordering::Natural);
    let alphabet = qam.scaled(1.0);
    let full = bfs_search(&v, ch.r(), 64, &alphabet);
    let inf = dfs_search(&v, ch.r(), f64::INFINITY, &alphabet);
    assert_eq!(full.candidates, inf.candidates);
    assert_eq!(full.visited_nodes as u128, full_tree_nodes(4, 4));
}

fn zero_vec(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); n]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bfs_node_count_matches_formula(m in prop::sample::select(vec![2usize, 4]), n in 1usize..=7, k in 1usize..=80, seed in 0u64..1000) {
        let c = if m == 2 { binary() } else { qam4() };
        let mut r = rng(seed);
        let ch = random_channel(n, Ordering::Natural, &mut r);
        let v = random_vec(n, &mut r);
        let cs = bfs_search(&v, ch.r(), k, &c.scaled(1.0));
        prop_assert_eq!(cs.visited_nodes as u128, complexity_c(k, m, n));
    }

    #[test]
    fn budget_roundtrip(m in prop::sample::select(vec![2usize, 4, 16]), n in 1usize..=20, extra in 0u128..100_000) {
        let c0 = complexity_c(1, m, n) + extra;
        let k = k_for_budget(c0, m, n).unwrap();
        prop_assert!(complexity_c(k, m, n) <= c0);
        // the next K would overspend unless the tree is already full
        if (k as u128) < (m as u128).pow((n - 1) as u32) {
            prop_assert!(complexity_c(k + 1, m, n) > c0);
        }
    }

    #[test]
    fn path_cost_equals_direct_norm(n in 1usize..=8, seed in 0u64..1000) {
        let c = qam4();
        let mut r = rng(seed);
        let ch = random_channel(n, Ordering::Sorted, &mut r);
        let v = random_vec(n, &mut r);
        let alphabet = c.scaled(2.0);
        let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..4)).collect();
        let a = path_cost(&v, ch.r(), &alphabet, &idx);
        let b = direct_distance(&v, ch.r(), &alphabet, &idx);
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b));
        let z = zero_vec(n);
        prop_assert!(path_cost(&z, &CMatrix::identity(n), &alphabet, &idx) > 0.0);
    }
}
