//! Fixtures shared by the benchmarks.

use multiplex::regress::DesignMatrix;
use multiplex::villages::VillageModel;
use multiplex::{stream, MultiGraph, Profile, ProfileDistribution};
use rand::Rng;

/// A synthetic two-layer village of `n` households.
pub fn village(n: usize, seed: u64) -> MultiGraph {
    VillageModel::pair_experiment()
        .generate(n, &mut stream(seed, &[]))
        .expect("village model is valid")
        .select_layers(&["kinship", "advice"])
        .expect("layers exist")
}

/// A mixture of a well-connected profile and a sparse doubly linked one.
pub fn profile_mix() -> ProfileDistribution {
    ProfileDistribution::new([
        (Profile::new(8, 6, 10), 0.3),
        (Profile::new(3, 2, 4), 0.4),
        (Profile::new(1, 0, 1), 0.3),
    ])
    .expect("masses sum to one")
}

/// A `rows x cols` design with uniform entries and a noisy linear response.
pub fn regression(rows: usize, cols: usize, seed: u64) -> (DesignMatrix, Vec<f64>) {
    let mut rng = stream(seed, &[]);
    let columns: Vec<Vec<f64>> = (0..cols)
        .map(|_| (0..rows).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let y = (0..rows)
        .map(|i| columns[0][i] - 0.5 * columns[1 % cols][i] + 0.1 * rng.random::<f64>())
        .collect();
    let names = (0..cols).map(|j| format!("x{j}")).collect();
    (DesignMatrix::new(names, columns).expect("columns have equal length"), y)
}
