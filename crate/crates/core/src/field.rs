//! Cell-centred scalar fields and face-based vector fields.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// One value per cell, laid out as described in [`crate::grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.cell_count()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::Grid(format!(
                "scalar field needs {} values, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    /// Samples `f(x, y)` at the cell centres.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cell_count());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.cell(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &ScalarField) -> ScalarField {
        debug_assert!(self.grid.same_as(&other.grid));
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Face-based vector field: `x` on vertical faces, `y` on horizontal faces.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            x: vec![0.0; grid.xface_count()],
            y: vec![0.0; grid.yface_count()],
        }
    }

    pub fn from_components(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.xface_count() || y.len() != grid.yface_count() {
            return Err(Error::Grid(format!(
                "vector field needs {} + {} values, got {} + {}",
                grid.xface_count(),
                grid.yface_count(),
                x.len(),
                y.len()
            )));
        }
        Ok(VectorField { grid, x, y })
    }

    /// Samples the components at their face centres. Boundary-normal entries
    /// are sampled too; call [`VectorField::zero_boundary_normal`] to impose
    /// the no-flux condition.
    pub fn from_fns(grid: Grid, fx: impl Fn(f64, f64) -> f64, fy: impl Fn(f64, f64) -> f64) -> Self {
        let mut x = Vec::with_capacity(grid.xface_count());
        for j in 0..grid.ny() {
            for i in 0..=grid.nx() {
                let (px, py) = grid.xface_center(i, j);
                x.push(fx(px, py));
            }
        }
        let mut y = Vec::with_capacity(grid.yface_count());
        for j in 0..=grid.ny() {
            for i in 0..grid.nx() {
                let (px, py) = grid.yface_center(i, j);
                y.push(fy(px, py));
            }
        }
        VectorField { grid, x, y }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn y_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub fn into_components(self) -> (Vec<f64>, Vec<f64>) {
        (self.x, self.y)
    }

    pub fn zero_boundary_normal(&mut self) {
        let g = self.grid;
        for j in 0..g.ny() {
            self.x[g.xface(0, j)] = 0.0;
            self.x[g.xface(g.nx(), j)] = 0.0;
        }
        for i in 0..g.nx() {
            self.y[g.yface(i, 0)] = 0.0;
            self.y[g.yface(i, g.ny())] = 0.0;
        }
    }

    /// True when every boundary-normal entry is exactly zero (`ω·n = 0`).
    pub fn has_zero_boundary_normal(&self) -> bool {
        let g = self.grid;
        (0..g.ny()).all(|j| self.x[g.xface(0, j)] == 0.0 && self.x[g.xface(g.nx(), j)] == 0.0)
            && (0..g.nx()).all(|i| self.y[g.yface(i, 0)] == 0.0 && self.y[g.yface(i, g.ny())] == 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> VectorField {
        VectorField {
            grid: self.grid,
            x: self.x.iter().map(|&v| f(v)).collect(),
            y: self.y.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Entrywise product.
    pub fn hadamard(&self, other: &VectorField) -> VectorField {
        debug_assert!(self.grid.same_as(&other.grid));
        VectorField {
            grid: self.grid,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a * b).collect(),
            y: self.y.iter().zip(&other.y).map(|(a, b)| a * b).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &VectorField) -> VectorField {
        debug_assert!(self.grid.same_as(&other.grid));
        VectorField {
            grid: self.grid,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a + alpha * b).collect(),
            y: self.y.iter().zip(&other.y).map(|(a, b)| a + alpha * b).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }
}
