#![allow(dead_code)]

use opinionlab::{OpinionVector, WeightedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Each pair present with probability `density`, weight uniform in `(0, max_w]`.
pub fn random_graph(n: usize, density: f64, max_w: f64, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                edges.push((i, j, max_w * (1.0 - rng.random::<f64>())));
            }
        }
    }
    WeightedGraph::from_edges(n, edges).unwrap()
}

pub fn random_opinions(n: usize, half_width: f64, seed: u64) -> OpinionVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    OpinionVector::from_slice(
        &(0..n)
            .map(|_| rng.random_range(-half_width..=half_width))
            .collect::<Vec<_>>(),
    )
    .unwrap()
}

pub fn cycle4() -> WeightedGraph {
    WeightedGraph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)]).unwrap()
}

pub fn triangle() -> WeightedGraph {
    WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
}

pub fn k4() -> WeightedGraph {
    WeightedGraph::from_edges(4, (0..4).flat_map(|i| ((i + 1)..4).map(move |j| (i, j, 1.0)))).unwrap()
}
