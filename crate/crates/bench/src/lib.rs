//! Shared fixtures for the benchmarks.

use hcvlab_core::scenario::{builtin, SET2};
use hcvlab_core::{FieldState, Grid1D, InitialCondition, ModelParams, PointState, Profile};

/// Set-2 parameters on `n_cells` nodes with a mildly inhomogeneous start.
pub fn fixture(n_cells: usize) -> (ModelParams, Grid1D, FieldState) {
    let s = builtin(SET2).expect("built-in scenario");
    let grid = Grid1D::new(s.length, n_cells).expect("valid grid");
    let init = InitialCondition {
        h: Profile::Constant(15.0),
        i: Profile::Cosine {
            base: 5.0,
            amplitude: 1.0,
            mode: 1,
        },
        v: Profile::Constant(5.0),
    };
    (s.params, grid, init.field(&grid))
}

pub fn set2_estar() -> PointState {
    PointState::new(8.9, 110.0, 51.7)
}
