//! Uniform staggered grid on an axis-aligned rectangle.
//!
//! Index layouts (all row-major with `y` as the outer index):
//!
//! * cells: `(i, j)` with `i < nx`, `j < ny` at `j * nx + i`, centred at
//!   `((i + ½) hx, (j + ½) hy)`;
//! * vertical faces (x-component): `(i, j)` with `i <= nx`, `j < ny` at
//!   `j * (nx + 1) + i`, located at `(i hx, (j + ½) hy)`;
//! * horizontal faces (y-component): `(i, j)` with `i < nx`, `j <= ny` at
//!   `j * nx + i`, located at `((i + ½) hx, j hy)`.
//!
//! Faces with `i ∈ {0, nx}` (vertical) or `j ∈ {0, ny}` (horizontal) lie on the
//! boundary and carry the boundary-normal component.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Grid {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::Grid(format!(
                "domain extents must be positive and finite, got lx = {lx}, ly = {ly}"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::Grid(format!(
                "need at least 2 cells per axis, got nx = {nx}, ny = {ny}"
            )));
        }
        Ok(Grid {
            lx,
            ly,
            nx,
            ny,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Quadrature weight of one cell (and of one face control volume).
    pub fn cell_measure(&self) -> f64 {
        self.hx * self.hy
    }

    /// `|Ω|`.
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn xface_count(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn yface_count(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    /// Largest spacing, used as the mesh size `h` in error models.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub fn xface_center(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub fn yface_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, j as f64 * self.hy)
    }

    pub fn is_boundary_xface(&self, i: usize) -> bool {
        i == 0 || i == self.nx
    }

    pub fn is_boundary_yface(&self, j: usize) -> bool {
        j == 0 || j == self.ny
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}
