mod common;

use common::{random_graph, random_opinions};
use nalgebra::DVector;
use opinionlab::metrics::{
    centered, conservation_check, equilibrium_polarization_quadform, global_disagreement, internal_conflict,
    local_disagreement, polarization,
};
use opinionlab::{fj_equilibrium, FjSolverConfig};
use proptest::prelude::*;

fn naive_polarization(z: &[f64]) -> f64 {
    let m = z.iter().sum::<f64>() / z.len() as f64;
    z.iter().map(|v| (v - m) * (v - m)).sum()
}

fn edge_sum_disagreement(g: &opinionlab::WeightedGraph, z: &[f64]) -> f64 {
    g.edges().map(|(i, j, w)| w * (z[i] - z[j]).powi(2)).sum()
}

#[test]
fn seven_node_sum_form_matches_quadratic_form() {
    let g = random_graph(7, 0.6, 3.0, 77);
    let z = random_opinions(7, 1.0, 77).into_vector();
    let half_local: f64 = (0..7).map(|i| local_disagreement(&g, &z, i).unwrap()).sum::<f64>() / 2.0;
    let quad = z.dot(&(g.laplacian() * &z));
    assert!((half_local - quad).abs() < 1e-12);
    assert!((global_disagreement(&g, &z).unwrap() - quad).abs() < 1e-12);
}

#[test]
fn conservation_over_seeded_ten_node_graphs() {
    for seed in 0..100 {
        let g = random_graph(10, 0.5, 3.0, seed);
        let s = random_opinions(10, 1.0, seed);
        let r = conservation_check(&g, &s, &FjSolverConfig::default()).unwrap();
        assert!(r.conservation_residual.abs() <= 1e-8, "seed {seed}: {r:?}");
    }
}

#[test]
fn internal_conflict_matches_per_node_terms() {
    let z = random_opinions(9, 1.0, 5).into_vector();
    let s = random_opinions(9, 1.0, 6).into_vector();
    let per_node: f64 = z.iter().zip(s.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    assert!((internal_conflict(&z, &s).unwrap() - per_node).abs() < 1e-12);
}

proptest! {
    #[test]
    fn disagreement_forms_agree(n in 1usize..30, density in 0.0..1.0f64, seed in any::<u64>(), shift in -5.0..5.0f64) {
        let g = random_graph(n, density, 3.0, seed);
        let z = random_opinions(n, 1.0, seed).into_vector();
        let l = g.laplacian();
        let quad = z.dot(&(&l * &z));
        let zc = centered(&z);
        let quad_centered = zc.dot(&(&l * &zc));
        let sum = edge_sum_disagreement(&g, z.as_slice());
        let d = global_disagreement(&g, &z).unwrap();
        let scale = 1.0 + quad.abs();
        prop_assert!((d - sum).abs() <= 1e-12 * scale);
        prop_assert!((d - quad).abs() <= 1e-12 * scale);
        prop_assert!((d - quad_centered).abs() <= 1e-12 * scale);
        let shifted = z.add_scalar(shift);
        prop_assert!((global_disagreement(&g, &shifted).unwrap() - d).abs() <= 1e-11 * scale);
    }

    #[test]
    fn polarization_matches_naive_sum(n in 1usize..40, seed in any::<u64>()) {
        let z = random_opinions(n, 1.0, seed).into_vector();
        prop_assert!((polarization(&z) - naive_polarization(z.as_slice())).abs() < 1e-12);
    }

    #[test]
    fn polarization_translation_invariant_exactly(log_n in 0u32..6, ks in prop::collection::vec(-1024i32..=1024, 32), c in -64i32..=64) {
        // dyadic inputs keep every operation exact
        let n = 1usize << log_n;
        let z = DVector::from_iterator(n, ks.iter().take(n).map(|k| *k as f64 / 1024.0));
        let shifted = z.add_scalar(c as f64 / 8.0);
        prop_assert_eq!(polarization(&shifted), polarization(&z));
    }

    #[test]
    fn polarization_translation_invariant(n in 1usize..40, seed in any::<u64>(), c in -3.0..3.0f64) {
        let z = random_opinions(n, 1.0, seed).into_vector();
        prop_assert!((polarization(&z.add_scalar(c)) - polarization(&z)).abs() < 1e-12);
    }

    #[test]
    fn conservation_law(n in 1usize..60, density in 0.0..1.0f64, seed in any::<u64>()) {
        let g = random_graph(n, density, 3.0, seed);
        let s = random_opinions(n, 1.0, seed);
        let r = conservation_check(&g, &s, &FjSolverConfig::default()).unwrap();
        let sbar = centered(s.as_vector()).norm_squared();
        prop_assert!(r.conservation_residual.abs() <= 1e-8 * sbar.max(1.0));
    }

    #[test]
    fn quadform_matches_equilibrium_polarization(n in 1usize..60, density in 0.0..1.0f64, seed in any::<u64>()) {
        let g = random_graph(n, density, 3.0, seed);
        let s = random_opinions(n, 1.0, seed);
        let cfg = FjSolverConfig::default();
        let z = fj_equilibrium(&g, &s, &cfg).unwrap();
        let q = equilibrium_polarization_quadform(&g, &s, &cfg).unwrap();
        prop_assert!((q - polarization(z.as_vector())).abs() <= 1e-8);
    }
}
