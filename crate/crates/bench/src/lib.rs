//! Shared workloads for the criterion benchmarks.

use mcqmc_core::drivers::iid_driver;
use mcqmc_core::PointSet;

/// `n` seeded uniform points in `[0,1]^d`.
pub fn uniform_points(seed: u64, n: usize, d: usize) -> PointSet {
    let driver = iid_driver(seed, n, d).expect("benchmark sizes are small");
    PointSet::from_flat(d, driver.as_flat().to_vec()).expect("width matches")
}
