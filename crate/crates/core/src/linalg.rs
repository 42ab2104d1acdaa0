//! Small dense-band and Krylov solvers for the symmetric positive definite
//! systems that arise on the grid.

use crate::error::{Error, Result};

/// Cholesky factor of a symmetric positive definite band matrix.
///
/// Storage is the lower band: `band[i * (bw + 1) + k]` holds `L[i, i - k]`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandCholesky {
    /// Factorizes the matrix whose lower band entries are produced by
    /// `entry(i, k) = A[i, i - k]` for `k <= min(i, bw)`.
    pub fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for k in 0..=bw.min(i) {
                band[i * w + k] = entry(i, k);
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                // L[i, j] = (A[i, j] - Σ_{m<j} L[i,m] L[j,m]) / L[j,j]
                let mut s = band[i * w + (i - j)];
                let mlo = lo.max(j.saturating_sub(bw));
                for m in mlo..j {
                    s -= band[i * w + (i - m)] * band[j * w + (j - m)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Solver {
                            solver: "band Cholesky",
                            iterations: i,
                            residual: s,
                        });
                    }
                    band[i * w] = s.sqrt();
                } else {
                    band[i * w + (i - j)] = s / band[j * w];
                }
            }
        }
        Ok(BandCholesky { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let w = self.bw + 1;
        for i in 0..self.n {
            let mut s = b[i];
            for m in i.saturating_sub(self.bw)..i {
                s -= self.band[i * w + (i - m)] * b[m];
            }
            b[i] = s / self.band[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for m in (i + 1)..(i + self.bw + 1).min(self.n) {
                s -= self.band[m * w + (m - i)] * b[m];
            }
            b[i] = s / self.band[i * w];
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    /// `‖b − A x‖₂ / ‖b‖₂` (0 when `b = 0`).
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for `A x = b`, starting from the
/// contents of `x`.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = norm2(&r) / bnorm;
    let mut it = 0;
    while rel > rel_tol {
        if it == max_iter {
            return Err(Error::Solver {
                solver: "conjugate gradient",
                iterations: it,
                residual: rel,
            });
        }
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        it += 1;
        rel = norm2(&r) / bnorm;
    }
    // Report the true residual, not the recursively updated one.
    apply(x, &mut ax);
    let true_rel = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt() / bnorm;
    Ok(CgOutcome {
        iterations: it,
        relative_residual: true_rel,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
