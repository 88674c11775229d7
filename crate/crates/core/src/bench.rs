//! Timing harness for the reconstruction.

use std::time::Instant;

use crate::dissim::{DissimilarityMatrix, Tolerance};
use crate::gen::{generate_instance_with, GenError, Weights};
use crate::reconstruct::reconstruct_unverified;

/// Fraction of objects mapped to single leaves in benchmark instances.
pub const LEAF_FRACTION: f64 = 0.8;

/// Largest image of a non-leaf object in benchmark instances.
pub const MAX_SUBTREE: usize = 16;

/// A benchmark instance on `n` objects: a tree on `3n` vertices, 80% of the
/// objects at distinct leaves and the rest on random subtrees.
pub fn bench_instance(seed: u64, n: usize) -> Result<DissimilarityMatrix, GenError> {
    generate_instance_with(
        seed,
        3 * n.max(1),
        n,
        LEAF_FRACTION,
        Weights::default(),
        MAX_SUBTREE,
    )
    .map(|(d, _)| d)
}

/// Seconds taken by one unverified reconstruction of `d`.
pub fn time_reconstruction(d: &DissimilarityMatrix, tol: &Tolerance) -> f64 {
    let start = Instant::now();
    let result = reconstruct_unverified(d, tol);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(result.is_ok(), "benchmark instances are subtree distances");
    elapsed
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    }
}

/// `(size, median seconds over seeds 0..seeds)` for each size.
pub fn run_bench(sizes: &[usize], seeds: u64) -> Result<Vec<(usize, f64)>, GenError> {
    sizes
        .iter()
        .map(|&n| {
            let mut times = (0..seeds.max(1))
                .map(|s| {
                    bench_instance(s, n).map(|d| time_reconstruction(&d, &Tolerance::default()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((n, median(&mut times)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_bench_runs() {
        let rows = run_bench(&[20, 40], 3).unwrap();
        assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![20, 40]);
        assert!(rows.iter().all(|r| r.1 >= 0.0));
    }
}
