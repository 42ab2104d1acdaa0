//! Discrete differential operators, inner products and norms.
//!
//! The face gradient `G` and cell divergence `D` are built so that
//! `⟨G u, w⟩_faces = −⟨u, D w⟩_cells` whenever `w` has zero boundary-normal
//! entries. Both inner products weight every entry by `hx·hy`. The Neumann
//! Laplacian is the composition `D ∘ G`.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};

/// Face gradient. Boundary-normal faces are set to zero (`∂ₙu = 0`).
pub fn gradient(u: &ScalarField) -> VectorField {
    let g = *u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (rhx, rhy) = (1.0 / g.hx(), 1.0 / g.hy());
    let v = u.values();
    let mut out = VectorField::zeros(g);
    {
        let x = out.x_mut();
        for j in 0..ny {
            for i in 1..nx {
                x[g.xface(i, j)] = (v[g.cell(i, j)] - v[g.cell(i - 1, j)]) * rhx;
            }
        }
    }
    {
        let y = out.y_mut();
        for j in 1..ny {
            for i in 0..nx {
                y[g.yface(i, j)] = (v[g.cell(i, j)] - v[g.cell(i, j - 1)]) * rhy;
            }
        }
    }
    out
}

/// Cell divergence of a face field, including the boundary-normal entries.
pub fn divergence(w: &VectorField) -> ScalarField {
    let g = *w.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (rhx, rhy) = (1.0 / g.hx(), 1.0 / g.hy());
    let (wx, wy) = (w.x(), w.y());
    let mut out = Vec::with_capacity(g.cell_count());
    for j in 0..ny {
        for i in 0..nx {
            let dx = (wx[g.xface(i + 1, j)] - wx[g.xface(i, j)]) * rhx;
            let dy = (wy[g.yface(i, j + 1)] - wy[g.yface(i, j)]) * rhy;
            out.push(dx + dy);
        }
    }
    ScalarField::from_values(g, out).expect("layout matches grid")
}

/// `D(G(u))`: five-point Laplacian with homogeneous Neumann closure.
pub fn laplacian_neumann(u: &ScalarField) -> ScalarField {
    divergence(&gradient(u))
}

/// Face samples of a cell field: arithmetic mean across interior faces, the
/// adjacent cell value on boundary faces.
pub fn face_average(u: &ScalarField) -> VectorField {
    let g = *u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let v = u.values();
    let mut out = VectorField::zeros(g);
    {
        let x = out.x_mut();
        for j in 0..ny {
            x[g.xface(0, j)] = v[g.cell(0, j)];
            for i in 1..nx {
                x[g.xface(i, j)] = 0.5 * (v[g.cell(i - 1, j)] + v[g.cell(i, j)]);
            }
            x[g.xface(nx, j)] = v[g.cell(nx - 1, j)];
        }
    }
    {
        let y = out.y_mut();
        for i in 0..nx {
            y[g.yface(i, 0)] = v[g.cell(i, 0)];
            y[g.yface(i, ny)] = v[g.cell(i, ny - 1)];
        }
        for j in 1..ny {
            for i in 0..nx {
                y[g.yface(i, j)] = 0.5 * (v[g.cell(i, j - 1)] + v[g.cell(i, j)]);
            }
        }
    }
    out
}

/// `⟨u, v⟩` over cells with weight `hx·hy`.
pub fn dot_cells(u: &ScalarField, v: &ScalarField) -> f64 {
    debug_assert!(u.grid().same_as(v.grid()));
    let s: f64 = u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
    s * u.grid().cell_measure()
}

/// `⟨w, z⟩` over all faces with weight `hx·hy`.
pub fn dot_faces(w: &VectorField, z: &VectorField) -> f64 {
    debug_assert!(w.grid().same_as(z.grid()));
    let sx: f64 = w.x().iter().zip(z.x()).map(|(a, b)| a * b).sum();
    let sy: f64 = w.y().iter().zip(z.y()).map(|(a, b)| a * b).sum();
    (sx + sy) * w.grid().cell_measure()
}

pub fn integrate(u: &ScalarField) -> f64 {
    u.values().iter().sum::<f64>() * u.grid().cell_measure()
}

/// `(Σ |uᵢ|ᵖ hx hy)^{1/p}`.
pub fn lp_norm(u: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::param("p", format!("Lp norm needs finite p >= 1, got {p}")));
    }
    let s: f64 = if p == 2.0 {
        u.values().iter().map(|v| v * v).sum()
    } else {
        u.values().iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((s * u.grid().cell_measure()).powf(1.0 / p))
}

pub fn linf_norm(u: &ScalarField) -> f64 {
    u.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Face `L²` norm, `sqrt(⟨w, w⟩_faces)`.
pub fn face_l2(w: &VectorField) -> f64 {
    dot_faces(w, w).sqrt()
}

/// Componentwise face `Lq` norm, `(Σ_faces |wₖ|^q hx hy)^{1/q}`.
pub fn face_lp(w: &VectorField, q: f64) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::param("q", format!("Lq norm needs finite q >= 1, got {q}")));
    }
    let s: f64 = w.x().iter().chain(w.y()).map(|v| v.abs().powf(q)).sum();
    Ok((s * w.grid().cell_measure()).powf(1.0 / q))
}

pub fn face_linf(w: &VectorField) -> f64 {
    w.x().iter().chain(w.y()).fold(0.0, |m, v| m.max(v.abs()))
}
