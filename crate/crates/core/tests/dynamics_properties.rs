mod common;

use common::{random_graph, random_opinions};
use nalgebra::DVector;
use opinionlab::dynamics::fj_fixed_point;
use opinionlab::metrics::{global_disagreement, internal_conflict, polarization};
use opinionlab::{fj_equilibrium, fj_step, fj_trajectory, FjSolverConfig, OpinionVector, WeightedGraph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn perturbations(n: usize, count: usize, size: f64, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-size..=size)))
        .collect()
}

#[test]
fn eight_node_equilibrium_matches_iteration() {
    let g = random_graph(8, 0.6, 2.0, 3);
    let s = random_opinions(8, 1.0, 3);
    let cfg = FjSolverConfig::default();
    let direct = fj_equilibrium(&g, &s, &cfg).unwrap();
    let iter = fj_fixed_point(&g, &s, &cfg).unwrap();
    assert!((direct.as_vector() - iter.as_vector()).amax() < 1e-8);
}

#[test]
fn equilibrium_is_a_fixed_point_of_the_step() {
    let g = random_graph(10, 0.5, 3.0, 9);
    let s = random_opinions(10, 1.0, 9);
    let z = fj_equilibrium(&g, &s, &FjSolverConfig::default()).unwrap();
    let next = fj_step(&g, &z, &s).unwrap();
    assert!((next.as_vector() - z.as_vector()).amax() < 1e-10);
}

#[test]
fn two_node_trajectory_contracts() {
    let g = WeightedGraph::from_edges(2, [(0, 1, 1.0)]).unwrap();
    let s = OpinionVector::from_slice(&[1.0, -1.0]).unwrap();
    let target = DVector::from_vec(vec![1.0 / 3.0, -1.0 / 3.0]);
    let traj = fj_trajectory(&g, &s, 40, &FjSolverConfig::default()).unwrap();
    let dist: Vec<f64> = traj.states.iter().map(|z| (z.as_vector() - &target).amax()).collect();
    assert!(dist.windows(2).all(|w| w[1] < w[0] || w[1] == 0.0), "{dist:?}");
}

#[test]
fn iterative_solver_path_matches_direct() {
    // above the dense-solve limit the conjugate-gradient path is used
    let n = 2100;
    let g = random_graph(n, 0.004, 1.0, 21);
    let s = random_opinions(n, 1.0, 21);
    let cfg = FjSolverConfig::default();
    let z = fj_equilibrium(&g, &s, &cfg).unwrap();
    let lz = g.laplacian() * z.as_vector() + z.as_vector();
    assert!((lz - s.as_vector()).amax() <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solve_matches_fixed_point(n in 1usize..=50, density in 0.0..0.5f64, seed in any::<u64>()) {
        let g = random_graph(n, density, 1.0, seed);
        let s = random_opinions(n, 1.0, seed);
        let cfg = FjSolverConfig::default();
        let direct = fj_equilibrium(&g, &s, &cfg).unwrap();
        let iter = fj_fixed_point(&g, &s, &cfg).unwrap();
        prop_assert!((direct.as_vector() - iter.as_vector()).amax() < 1e-8);
    }

    #[test]
    fn equilibrium_minimizes_disagreement_plus_conflict(n in 2usize..20, seed in any::<u64>()) {
        let g = random_graph(n, 0.5, 3.0, seed);
        let s = random_opinions(n, 1.0, seed);
        let z = fj_equilibrium(&g, &s, &FjSolverConfig::default()).unwrap().into_vector();
        let f = |v: &DVector<f64>| global_disagreement(&g, v).unwrap() + internal_conflict(v, s.as_vector()).unwrap();
        let base = f(&z);
        for d in perturbations(n, 100, 0.01, seed) {
            prop_assert!(f(&(&z + d)) >= base - 1e-12);
        }
    }

    #[test]
    fn equilibrium_maximizes_polarization_plus_disagreement(n in 2usize..20, seed in any::<u64>()) {
        // P + D is read through the conservation identity, s̄ᵀs̄ - D - I,
        // which agrees with P + D at z* and is concave everywhere
        let g = random_graph(n, 0.5, 3.0, seed);
        let s = random_opinions(n, 1.0, seed);
        let sbar = s.as_vector().add_scalar(-s.mean());
        let z = fj_equilibrium(&g, &s, &FjSolverConfig::default()).unwrap().into_vector();
        let at_z = polarization(&z) + global_disagreement(&g, &z).unwrap();
        let f = |v: &DVector<f64>| {
            sbar.norm_squared() - global_disagreement(&g, v).unwrap() - internal_conflict(v, s.as_vector()).unwrap()
        };
        prop_assert!((f(&z) - at_z).abs() <= 1e-9 * sbar.norm_squared().max(1.0));
        for d in perturbations(n, 100, 0.01, seed.wrapping_add(1)) {
            prop_assert!(f(&(&z + d)) <= f(&z) + 1e-12);
        }
    }

    #[test]
    fn mean_is_preserved(n in 1usize..40, density in 0.0..1.0f64, seed in any::<u64>()) {
        let g = random_graph(n, density, 3.0, seed);
        let s = random_opinions(n, 1.0, seed);
        let z = fj_equilibrium(&g, &s, &FjSolverConfig::default()).unwrap();
        prop_assert!((z.mean() - s.mean()).abs() < 1e-10);
    }

    #[test]
    fn range_is_preserved(n in 1usize..40, density in 0.0..1.0f64, seed in any::<u64>()) {
        let g = random_graph(n, density, 3.0, seed);
        let s = random_opinions(n, 1.0, seed);
        let z = fj_equilibrium(&g, &s, &FjSolverConfig::default()).unwrap();
        let raw = nalgebra::Cholesky::new(g.laplacian() + nalgebra::DMatrix::identity(n, n))
            .unwrap()
            .solve(s.as_vector());
        prop_assert!(raw.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        prop_assert!(z.as_slice().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn step_stays_in_the_cube(n in 1usize..20, seed in any::<u64>()) {
        let g = random_graph(n, 0.5, 3.0, seed);
        let s = random_opinions(n, 1.0, seed);
        let z0 = random_opinions(n, 1.0, seed.wrapping_mul(3));
        let z1 = fj_step(&g, &z0, &s).unwrap();
        prop_assert!(z1.as_slice().iter().all(|v| v.abs() <= 1.0));
    }
}
