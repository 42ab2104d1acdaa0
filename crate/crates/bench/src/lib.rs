//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;

use clusterflow::{
    AdvectionMode, EllipticSettings, Grid, ModelParams, ReactionModel, ScalarField, StepState, Stepper, VectorField,
};

pub fn square(n: usize) -> Grid {
    Grid::new(1.0, 1.0, n, n).expect("valid grid")
}

pub fn density(g: Grid) -> ScalarField {
    ScalarField::from_fn(g, |x, y| 0.5 + 0.3 * (PI * x).cos() * (PI * y).cos())
}

pub fn forcing(g: Grid) -> VectorField {
    VectorField::from_fns(g, |x, y| (PI * x).sin() * (2.0 * PI * y).cos(), |x, y| (2.0 * PI * x).cos() * (PI * y).sin())
}

pub fn stepper(n: usize, mode: AdvectionMode, elliptic: EllipticSettings) -> (Stepper, StepState) {
    let g = square(n);
    let params = ModelParams::new(0.1, 0.1, 1.0, ReactionModel::bistable(0.25).expect("valid threshold"))
        .expect("valid parameters");
    let s = Stepper::new(g, params, mode, elliptic).expect("valid stepper");
    let state = s.initial_state(density(g)).expect("finite data");
    (s, state)
}
