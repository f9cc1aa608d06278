//! Fixtures shared by the benchmarks.

use xlab_core::BoundaryParams;

/// Maximal-current parameters at `p = 0.75`.
pub fn max_current() -> BoundaryParams {
    BoundaryParams::new(0.75, 0.5, 0.5, 0.0, 0.0).expect("valid parameters")
}

/// Triple point at `p = 0.75`.
pub fn triple_point() -> BoundaryParams {
    BoundaryParams::new(0.75, 0.25, 0.25, 0.0, 0.0).expect("valid parameters")
}
