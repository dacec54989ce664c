//! Shared fixtures for the benchmarks.

use diffloss::experiment::{generate_synthetic_dataset, Problem};
use diffloss::diffusion::LossSettings;
use diffloss::mesh::DEFAULT_VALUE_FLOOR;

/// The normalized study problem on a synthetic dataset of the given shape.
pub fn problem(shape: &[usize]) -> Problem {
    let (raw, _) = generate_synthetic_dataset(shape, 7).expect("valid synthetic shape");
    Problem::new(&raw, DEFAULT_VALUE_FLOOR, LossSettings::default()).expect("sensors defined on the mesh")
}
