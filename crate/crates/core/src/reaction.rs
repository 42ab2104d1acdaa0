//! Reproduction laws and the face-based elliptic forcing `E′(ũ) G u`.

use std::fmt;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::ops;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReactionModel {
    /// `E(u) = (1 − u)(u − a)` with Allee threshold `a ∈ (0, 1)`.
    Bistable { a: f64 },
    /// `E(u) = 1 − u`.
    Monostable,
}

impl ReactionModel {
    pub fn bistable(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::param("a", format!("bistable threshold must satisfy a ∈ (0,1), got {a}")));
        }
        Ok(ReactionModel::Bistable { a })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ReactionModel::Bistable { .. } => "bistable",
            ReactionModel::Monostable => "monostable",
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            ReactionModel::Bistable { a } => Some(a),
            ReactionModel::Monostable => None,
        }
    }

    #[inline]
    pub fn e(&self, u: f64) -> f64 {
        match *self {
            ReactionModel::Bistable { a } => (1.0 - u) * (u - a),
            ReactionModel::Monostable => 1.0 - u,
        }
    }

    #[inline]
    pub fn de(&self, u: f64) -> f64 {
        match *self {
            ReactionModel::Bistable { a } => -2.0 * u + (a + 1.0),
            ReactionModel::Monostable => -1.0,
        }
    }

    /// `d/du (u E(u))`.
    #[inline]
    pub fn d_growth(&self, u: f64) -> f64 {
        match *self {
            ReactionModel::Bistable { a } => -3.0 * u * u + 2.0 * (1.0 + a) * u - a,
            ReactionModel::Monostable => 1.0 - 2.0 * u,
        }
    }

    /// `max |d/du (u E(u))|` over `[lo, hi]`.
    pub fn max_abs_d_growth(&self, lo: f64, hi: f64) -> f64 {
        let mut m = self.d_growth(lo).abs().max(self.d_growth(hi).abs());
        if let ReactionModel::Bistable { a } = *self {
            let vertex = (1.0 + a) / 3.0;
            if vertex > lo && vertex < hi {
                m = m.max(self.d_growth(vertex).abs());
            }
        }
        m
    }
}

impl fmt::Display for ReactionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReactionModel::Bistable { a } => write!(f, "bistable(a = {a})"),
            ReactionModel::Monostable => f.write_str("monostable"),
        }
    }
}

pub fn eval_e(model: &ReactionModel, u: &ScalarField) -> ScalarField {
    u.map(|v| model.e(v))
}

pub fn eval_de(model: &ReactionModel, u: &ScalarField) -> ScalarField {
    u.map(|v| model.de(v))
}

/// `E′(ũ) ⊙ G u`, with `ũ` the face average of `u`.
///
/// For the quadratic bistable law this is exactly `G(E(u))`, since
/// `E′((l + r)/2)(r − l) = E(r) − E(l)`.
pub fn forcing_grad_e(model: &ReactionModel, u: &ScalarField) -> VectorField {
    let slope = ops::face_average(u).map(|v| model.de(v));
    ops::gradient(u).hadamard(&slope)
}

/// `r u E(u)` pointwise.
pub fn reaction_term(model: &ReactionModel, u: &ScalarField, r: f64) -> ScalarField {
    u.map(|v| r * v * model.e(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Horner evaluation from expanded coefficients, independent of the
    /// factored form used by the model.
    fn poly(coeffs: &[f64], x: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn g4() -> Grid {
        Grid::new(1.0, 1.0, 4, 4).unwrap()
    }

    #[test]
    fn bistable_zeros_and_values() {
        let m = ReactionModel::bistable(0.25).unwrap();
        assert_eq!(eval_e(&m, &ScalarField::constant(g4(), 1.0)).max(), 0.0);
        assert_eq!(eval_e(&m, &ScalarField::constant(g4(), 0.25)).max(), 0.0);
        let at_zero = eval_e(&m, &ScalarField::constant(g4(), 0.0)).values()[0];
        // (1-u)(u-a) = -a + (1+a)u - u²
        assert_eq!(at_zero, poly(&[-0.25, 1.25, -1.0], 0.0));
        assert_eq!(at_zero, -0.25);
    }

    #[test]
    fn monostable_values() {
        let m = ReactionModel::Monostable;
        assert_eq!(eval_e(&m, &ScalarField::constant(g4(), 1.0)).max(), 0.0);
        let de = eval_de(&m, &ScalarField::from_fn(g4(), |x, y| x * y + 3.0));
        assert!(de.values().iter().all(|&v| v == -1.0));
        let r = reaction_term(&m, &ScalarField::constant(g4(), 2.0), 1.0);
        assert!(r.values().iter().all(|&v| v == poly(&[0.0, 1.0, -1.0], 2.0)));
        assert!(r.values().iter().all(|&v| v == -2.0));
    }

    #[test]
    fn bistable_derivative_values() {
        let m = ReactionModel::bistable(0.25).unwrap();
        assert_eq!(eval_de(&m, &ScalarField::constant(g4(), 0.625)).values()[0], 0.0);
        assert_eq!(eval_de(&m, &ScalarField::constant(g4(), 0.0)).values()[0], poly(&[1.25, -2.0], 0.0));
        assert_eq!(eval_de(&m, &ScalarField::constant(g4(), 0.0)).values()[0], 1.25);
    }

    #[test]
    fn rejects_threshold_outside_unit_interval() {
        for a in [0.0, 1.0, 1.5, -0.1, f64::NAN] {
            assert!(ReactionModel::bistable(a).is_err(), "{a}");
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-4;
        for m in [ReactionModel::bistable(0.3).unwrap(), ReactionModel::Monostable] {
            for _ in 0..100 {
                let u: f64 = rng.gen_range(-1.0..2.0);
                let fd = (m.e(u + h) - m.e(u - h)) / (2.0 * h);
                assert!((fd - m.de(u)).abs() <= 10.0 * h * h, "{m} at {u}");
                let fdg = ((u + h) * m.e(u + h) - (u - h) * m.e(u - h)) / (2.0 * h);
                assert!((fdg - m.d_growth(u)).abs() <= 10.0 * h * h);
            }
        }
    }

    #[test]
    fn bistable_sign_structure() {
        let a = 0.25;
        let m = ReactionModel::bistable(a).unwrap();
        for k in 0..1000 {
            let u = 1.5 * k as f64 / 999.0;
            let e = m.e(u);
            if u > a && u < 1.0 {
                assert!(e > 0.0);
            } else if u != a && u != 1.0 {
                assert!(e < 0.0);
                // outside (a,1): u² E(u) ≤ 0
                assert!(u * u * e <= 0.0);
            }
        }
    }

    #[test]
    fn forcing_of_constant_is_zero() {
        let m = ReactionModel::bistable(0.4).unwrap();
        let f = forcing_grad_e(&m, &ScalarField::constant(g4(), 0.8));
        assert!(f.x().iter().chain(f.y()).all(|&v| v == 0.0));
    }

    #[test]
    fn monostable_forcing_is_negative_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = ScalarField::from_values(g4(), (0..16).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let f = forcing_grad_e(&ReactionModel::Monostable, &u);
        assert_eq!(f, ops::gradient(&u).map(|v| -v));
    }

    #[test]
    fn bistable_forcing_matches_matrix_oracle() {
        let (a, n) = (0.25, 4);
        let g = g4();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = ScalarField::from_values(g, (0..16).map(|_| rng.gen_range(0.0..1.5)).collect()).unwrap();
        let nxf = (n + 1) * n;
        let rows = nxf + n * (n + 1);
        let mut avg = DMatrix::<f64>::zeros(rows, n * n);
        let mut grad = DMatrix::<f64>::zeros(rows, n * n);
        for j in 0..n {
            for i in 0..=n {
                let row = j * (n + 1) + i;
                avg[(row, j * n + i.saturating_sub(1).min(n - 1))] += 0.5;
                avg[(row, j * n + i.min(n - 1))] += 0.5;
                if i > 0 && i < n {
                    grad[(row, j * n + i)] = 4.0;
                    grad[(row, j * n + i - 1)] = -4.0;
                }
            }
        }
        for j in 0..=n {
            for i in 0..n {
                let row = nxf + j * n + i;
                avg[(row, j.saturating_sub(1).min(n - 1) * n + i)] += 0.5;
                avg[(row, j.min(n - 1) * n + i)] += 0.5;
                if j > 0 && j < n {
                    grad[(row, j * n + i)] = 4.0;
                    grad[(row, (j - 1) * n + i)] = -4.0;
                }
            }
        }
        let uv = DVector::from_column_slice(u.values());
        let slope = (&avg * &uv).map(|v| -2.0 * v + (a + 1.0));
        let expected = slope.component_mul(&(&grad * &uv));
        let f = forcing_grad_e(&ReactionModel::bistable(a).unwrap(), &u);
        let got = DVector::from_iterator(rows, f.x().iter().chain(f.y()).copied());
        assert!((expected - got).amax() < 1e-13);
    }

    #[test]
    fn bistable_forcing_is_gradient_of_reaction_rate() {
        let g = Grid::new(1.0, 1.0, 9, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let m = ReactionModel::bistable(0.35).unwrap();
        let u = ScalarField::from_values(g, (0..63).map(|_| rng.gen_range(0.0..1.2)).collect()).unwrap();
        let a = forcing_grad_e(&m, &u);
        let b = ops::gradient(&eval_e(&m, &u));
        let d = a.add_scaled(-1.0, &b);
        assert!(ops::face_linf(&d) < 1e-12);
    }

    #[test]
    fn forcing_converges_to_chain_rule() {
        let m = ReactionModel::bistable(0.25).unwrap();
        let lx = 1.0;
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid::new(lx, 1.0, n, n).unwrap();
            let u = ScalarField::from_fn(g, |x, _| 0.5 + 0.25 * (PI * x / lx).cos());
            let f = forcing_grad_e(&m, &u);
            let mut exact = VectorField::from_fns(
                g,
                |x, _| {
                    let uu = 0.5 + 0.25 * (PI * x / lx).cos();
                    m.de(uu) * (-0.25 * PI / lx * (PI * x / lx).sin())
                },
                |_, _| 0.0,
            );
            exact.zero_boundary_normal();
            errs.push(ops::face_l2(&f.add_scaled(-1.0, &exact)));
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.15, "order {order}");
        }
    }

    #[test]
    fn growth_derivative_bound_matches_scan() {
        let m = ReactionModel::bistable(0.25).unwrap();
        let scan = (0..=10_000)
            .map(|k| 1.2 * k as f64 / 10_000.0)
            .map(|u| (3.0 * u * u - 2.0 * 1.25 * u + 0.25).abs())
            .fold(0.0, f64::max);
        let bound = m.max_abs_d_growth(0.0, 1.2);
        assert!((bound - scan).abs() < 1e-6);
        assert!(bound >= scan);
    }
}
