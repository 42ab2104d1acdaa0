//! Per-step ledger of the quantities that control global existence, and the
//! discrete inequalities relating them.
//!
//! Time levels: a margin is evaluated on a consecutive row pair
//! `(prev, cur)`. Time derivatives are backward differences; velocity terms
//! come from `prev` (the `ω` that drove the step), gradient dissipation terms
//! from `cur` (the diffusion is implicit) and the remaining right-hand-side
//! norms from `prev`.

use std::fmt;

use crate::elliptic;
use crate::error::{Error, Result};
use crate::evolution::{advective_flux, AdvectionMode, ModelParams, StepState};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::ops;
use crate::reaction::{self, ReactionModel};

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    /// Exponents tracked in `Lᵖ` columns; the margin columns use those `>= 2`.
    pub p_set: Vec<f64>,
    /// `C` in `tol_discr = C (dt + h²) scale`.
    pub tol_c: f64,
    /// Exponent of the `W^{1,q}` guard column.
    pub q: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            p_set: vec![2.0, 4.0, 9.0],
            tol_c: 10.0,
            q: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardConfig {
    pub linf_cap: f64,
    pub w1q_cap: f64,
    pub nan_check: bool,
}

impl Default for GuardConfig {
    fn default() -> Self {
        GuardConfig {
            linf_cap: 1e3,
            w1q_cap: 1e6,
            nan_check: true,
        }
    }
}

/// One ledger row. Columns that do not apply are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    /// `‖u‖₂²`
    pub l2_sq: f64,
    /// `‖G u‖₂²`
    pub grad_sq: f64,
    /// `‖u‖_p` for each configured `p`
    pub lp: Vec<f64>,
    /// `‖G(|u|^{p/2})‖₂²` for each configured `p`
    pub grad_pow_sq: Vec<f64>,
    pub linf: f64,
    /// `‖G u‖_q`
    pub grad_lq: f64,
    /// `‖u‖_q + ‖G u‖_q`
    pub w1q: f64,
    /// `‖u‖₄ / (‖u‖_{W^{1,2}}^{1/2} ‖u‖₂^{1/2})`
    pub gn_ratio: f64,
    pub omega_sq: f64,
    pub div_omega_sq: f64,
    /// componentwise `‖∇ω‖₂²`
    pub omega_grad_sq: f64,
    /// `⟨f, ω⟩ − (ε‖D ω‖² + ‖ω‖²)`
    pub weak_gap: f64,
    pub omega_linf: f64,
    pub regularity_ratio: f64,
    /// `∫ u log u` (with `0 log 0 = 0`); NaN if some `u < 0`
    pub entropy: f64,
    /// `‖G √u‖₂²`; NaN if some `u < 0`
    pub sqrt_grad_sq: f64,
    /// Set when `u <= 0` somewhere, which leaves the entropy margin undefined.
    pub entropy_flag: bool,
    pub cancel_t1: f64,
    pub cancel_t2: f64,
    pub cancel_residual: f64,
    /// trapezoid `∫₀ᵗ ‖G u‖²`
    pub int_grad: f64,
    /// trapezoid `∫₀ᵗ (‖D ω‖² + ‖ω‖²)`
    pub int_omega: f64,
    pub energy_margin: f64,
    pub entropy_margin: f64,
    pub tol_discr: f64,
    pub lp_margin: Vec<f64>,
    pub lp_constant: Vec<f64>,
}

/// Constants shared by the margin formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginContext {
    pub delta: f64,
    pub epsilon: f64,
    pub r: f64,
    /// Bistable threshold; `None` for the monostable law.
    pub a: Option<f64>,
    pub area: f64,
    pub h: f64,
    pub tol_c: f64,
}

impl MarginContext {
    pub fn new(grid: &Grid, params: &ModelParams, tol_c: f64) -> Self {
        MarginContext {
            delta: params.delta,
            epsilon: params.epsilon,
            r: params.r,
            a: params.model.threshold(),
            area: grid.area(),
            h: grid.h(),
            tol_c,
        }
    }

    pub fn tol_discr(&self, dt: f64, scale: f64) -> f64 {
        self.tol_c * (dt + self.h * self.h) * scale
    }
}

/// A margin value with the magnitude of the terms it was formed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub value: f64,
    pub scale: f64,
}

/// Discrete form of
/// `d/dt‖u‖² + (ε/2)‖∇·ω‖² + ‖ω‖² + 2δ‖∇u‖² ≤ ((a+1)²/2ε)‖u‖² + 2|Ω|r(1−a)`,
/// returned as RHS − LHS. `None` for the monostable law.
pub fn bistable_energy_margin(prev: &LedgerRow, cur: &LedgerRow, ctx: &MarginContext) -> Option<Margin> {
    let a = ctx.a?;
    let dt = cur.t - prev.t;
    let ddt = (cur.l2_sq - prev.l2_sq) / dt;
    let lhs_terms = [
        ddt,
        0.5 * ctx.epsilon * prev.div_omega_sq,
        prev.omega_sq,
        2.0 * ctx.delta * cur.grad_sq,
    ];
    let rhs = (a + 1.0).powi(2) / (2.0 * ctx.epsilon) * prev.l2_sq + 2.0 * ctx.area * ctx.r * (1.0 - a);
    let lhs: f64 = lhs_terms.iter().sum();
    let scale = lhs_terms.iter().map(|v| v.abs()).sum::<f64>() + rhs.abs();
    Some(Margin {
        value: rhs - lhs,
        scale,
    })
}

/// Discrete form of
/// `d/dt ∫u log u + ε‖∇·ω‖² + ‖ω‖² ≤ −4δ∫|∇√u|² + |Ω|r`, as RHS − LHS.
pub fn entropy_margin_monostable(prev: &LedgerRow, cur: &LedgerRow, ctx: &MarginContext) -> Result<Margin> {
    if prev.entropy_flag || cur.entropy_flag {
        let cells = usize::from(prev.entropy_flag) + usize::from(cur.entropy_flag);
        return Err(Error::EntropyUndefined { cells });
    }
    let dt = cur.t - prev.t;
    let ddt = (cur.entropy - prev.entropy) / dt;
    let lhs_terms = [ddt, ctx.epsilon * prev.div_omega_sq, prev.omega_sq];
    let rhs_terms = [-4.0 * ctx.delta * cur.sqrt_grad_sq, ctx.area * ctx.r];
    let lhs: f64 = lhs_terms.iter().sum();
    let rhs: f64 = rhs_terms.iter().sum();
    let scale = lhs_terms.iter().chain(&rhs_terms).map(|v| v.abs()).sum();
    Ok(Margin {
        value: rhs - lhs,
        scale,
    })
}

/// Pieces of the `Lᵖ` estimate
/// `d/dt‖u‖ₚᵖ ≤ −(2δ(p−1)/p)‖∇u^{p/2}‖² + C(p)(‖u‖ₚᵖ + ‖∇·ω‖²‖u‖ₚᵖ + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpMargin {
    /// backward difference of `‖u‖ₚᵖ`
    pub ddt: f64,
    /// `‖G(|u|^{p/2})‖²` at the new level
    pub grad_pow_sq: f64,
    /// `‖D ω‖² ‖u‖ₚᵖ` at the old level
    pub coupling: f64,
    /// smallest `C(p) >= 0` that satisfies this row pair
    pub required_constant: f64,
    /// constant actually used (running maximum of `required_constant`)
    pub constant: f64,
    pub margin: f64,
}

/// `running_constant` is the largest constant required so far in the run.
pub fn lp_energy_margin(
    prev: &LedgerRow,
    cur: &LedgerRow,
    p: f64,
    p_set: &[f64],
    running_constant: f64,
    ctx: &MarginContext,
) -> Result<LpMargin> {
    if !(p >= 2.0) {
        return Err(Error::param("p", format!("Lp energy margin needs p >= 2, got {p}")));
    }
    let k = p_set
        .iter()
        .position(|&q| q == p)
        .ok_or_else(|| Error::param("p", format!("p = {p} is not a tracked exponent")))?;
    let dt = cur.t - prev.t;
    let prev_pp = prev.lp[k].powf(p);
    let cur_pp = cur.lp[k].powf(p);
    let ddt = (cur_pp - prev_pp) / dt;
    let diss = 2.0 * ctx.delta * (p - 1.0) / p;
    let coupling = prev.div_omega_sq * prev_pp;
    let weight = prev_pp + coupling + 1.0;
    let required = ((ddt + diss * cur.grad_pow_sq[k]) / weight).max(0.0);
    let constant = running_constant.max(required);
    Ok(LpMargin {
        ddt,
        grad_pow_sq: cur.grad_pow_sq[k],
        coupling,
        required_constant: required,
        constant,
        margin: constant * weight - diss * cur.grad_pow_sq[k] - ddt,
    })
}

/// The two coupling integrals whose cubic parts cancel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cancellation {
    /// `2⟨u, −advective_flux(u, ω)⟩`: the advective term tested with `2u`.
    pub t1: f64,
    /// `⟨E′(ũ)Gu − (a+1)Gu, ω⟩`: the cubic part of the forcing paired with `ω`.
    pub t2: f64,
    /// `|t1 + t2|`; `None` for the monostable law, which has no cubic term.
    pub residual: Option<f64>,
}

impl Cancellation {
    pub fn scale(&self) -> f64 {
        self.t1.abs() + self.t2.abs() + 1.0
    }
}

pub fn cubic_cancellation_residual(
    u: &ScalarField,
    omega: &crate::field::VectorField,
    model: &ReactionModel,
    mode: AdvectionMode,
) -> Cancellation {
    let t1 = -2.0 * ops::dot_cells(u, &advective_flux(u, omega, mode));
    match *model {
        ReactionModel::Bistable { a } => {
            let grad = ops::gradient(u);
            let cubic = reaction::forcing_grad_e(model, u).add_scaled(-(a + 1.0), &grad);
            let t2 = ops::dot_faces(&cubic, omega);
            Cancellation {
                t1,
                t2,
                residual: Some((t1 + t2).abs()),
            }
        }
        ReactionModel::Monostable => Cancellation {
            t1,
            t2: 0.0,
            residual: None,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardBound {
    Linf,
    W1q,
    NotFinite,
}

impl fmt::Display for GuardBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuardBound::Linf => "L-infinity cap on u",
            GuardBound::W1q => "W^{1,q} cap on u",
            GuardBound::NotFinite => "non-finite ledger value",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbortReport {
    pub bound: GuardBound,
    pub value: f64,
    pub cap: f64,
    pub t: f64,
    pub step: usize,
    pub snapshot: Option<std::path::PathBuf>,
}

impl fmt::Display for AbortReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "blow-up guard: {} violated at t = {} (step {}): value {:e} > cap {:e}",
            self.bound, self.t, self.step, self.value, self.cap
        )?;
        if let Some(p) = &self.snapshot {
            write!(f, "; last snapshot {}", p.display())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GuardVerdict {
    Ok,
    Abort(AbortReport),
}

impl GuardVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, GuardVerdict::Ok)
    }
}

pub fn blowup_guard(row: &LedgerRow, guard: &GuardConfig) -> GuardVerdict {
    let abort = |bound, value, cap| {
        GuardVerdict::Abort(AbortReport {
            bound,
            value,
            cap,
            t: row.t,
            step: row.step,
            snapshot: None,
        })
    };
    if guard.nan_check {
        let core = [row.l2_sq, row.grad_sq, row.linf, row.w1q, row.omega_sq, row.div_omega_sq, row.mass];
        if let Some(v) = core.iter().chain(&row.lp).find(|v| !v.is_finite()) {
            return abort(GuardBound::NotFinite, *v, f64::INFINITY);
        }
    }
    if row.linf > guard.linf_cap {
        return abort(GuardBound::Linf, row.linf, guard.linf_cap);
    }
    if row.w1q > guard.w1q_cap {
        return abort(GuardBound::W1q, row.w1q, guard.w1q_cap);
    }
    GuardVerdict::Ok
}

/// Fills the velocity columns of a row: `‖ω‖∞` and the regularity ratio
/// (NaN when the forcing vanishes).
pub fn omega_linf_and_regularity_row(
    omega: &crate::field::VectorField,
    f: &crate::field::VectorField,
    row: &mut LedgerRow,
) {
    row.omega_linf = ops::face_linf(omega);
    row.regularity_ratio = elliptic::regularity_ratio(omega, f).unwrap_or(f64::NAN);
}

/// Instantaneous columns for one state. Cumulative and margin columns are
/// left NaN / zero; [`Monitor::record`] fills them.
pub fn observe(state: &StepState, params: &ModelParams, mode: AdvectionMode, cfg: &MonitorConfig) -> Result<LedgerRow> {
    let u = &state.u;
    let omega = &state.omega;
    let grad = ops::gradient(u);
    let div = ops::divergence(omega);
    let l2_sq = ops::dot_cells(u, u);
    let grad_sq = ops::dot_faces(&grad, &grad);
    let omega_sq = ops::dot_faces(omega, omega);
    let div_omega_sq = ops::dot_cells(&div, &div);
    let omega_grad_sq = elliptic::component_gradient_energy(omega);
    let weak_gap = ops::dot_faces(&state.forcing, omega) - (params.epsilon * div_omega_sq + omega_sq);

    let mut lp = Vec::with_capacity(cfg.p_set.len());
    let mut grad_pow_sq = Vec::with_capacity(cfg.p_set.len());
    for &p in &cfg.p_set {
        lp.push(ops::lp_norm(u, p)?);
        let g = ops::gradient(&u.map(|v| v.abs().powf(0.5 * p)));
        grad_pow_sq.push(ops::dot_faces(&g, &g));
    }
    let grad_lq = ops::face_lp(&grad, cfg.q)?;
    let w1q = ops::lp_norm(u, cfg.q)? + grad_lq;
    let l4 = ops::lp_norm(u, 4.0)?;
    let w12 = (l2_sq + grad_sq).sqrt();
    let gn_ratio = l4 / (w12.sqrt() * l2_sq.sqrt().sqrt());

    let nonneg = u.min() >= 0.0;
    let (entropy, sqrt_grad_sq) = if nonneg {
        let s: f64 = u.values().iter().map(|&v| if v == 0.0 { 0.0 } else { v * v.ln() }).sum();
        let g = ops::gradient(&u.map(f64::sqrt));
        (s * u.grid().cell_measure(), ops::dot_faces(&g, &g))
    } else {
        (f64::NAN, f64::NAN)
    };
    let cancel = cubic_cancellation_residual(u, omega, &params.model, mode);

    let mut row = LedgerRow {
        step: state.step,
        t: state.t,
        dt: state.dt_used,
        mass: ops::integrate(u),
        l2_sq,
        grad_sq,
        lp,
        grad_pow_sq,
        linf: ops::linf_norm(u),
        grad_lq,
        w1q,
        gn_ratio,
        omega_sq,
        div_omega_sq,
        omega_grad_sq,
        weak_gap,
        omega_linf: 0.0,
        regularity_ratio: f64::NAN,
        entropy,
        sqrt_grad_sq,
        entropy_flag: !(u.min() > 0.0),
        cancel_t1: cancel.t1,
        cancel_t2: cancel.t2,
        cancel_residual: cancel.residual.unwrap_or(f64::NAN),
        int_grad: 0.0,
        int_omega: 0.0,
        energy_margin: f64::NAN,
        entropy_margin: f64::NAN,
        tol_discr: f64::NAN,
        lp_margin: vec![f64::NAN; cfg.p_set.len()],
        lp_constant: vec![f64::NAN; cfg.p_set.len()],
    };
    omega_linf_and_regularity_row(omega, &state.forcing, &mut row);
    Ok(row)
}

/// Stateful ledger builder: keeps the previous row, the time integrals and the
/// running `Lᵖ` constants.
#[derive(Debug, Clone)]
pub struct Monitor {
    params: ModelParams,
    mode: AdvectionMode,
    cfg: MonitorConfig,
    ctx: MarginContext,
    prev: Option<LedgerRow>,
    lp_constants: Vec<f64>,
}

impl Monitor {
    pub fn new(grid: Grid, params: ModelParams, mode: AdvectionMode, cfg: MonitorConfig) -> Result<Self> {
        if cfg.p_set.is_empty() || cfg.p_set.iter().any(|&p| !(p >= 1.0)) {
            return Err(Error::param("p_set", "exponents must be >= 1 and the set non-empty"));
        }
        if !(cfg.q >= 1.0) {
            return Err(Error::param("q", "guard exponent must be >= 1"));
        }
        if !(cfg.tol_c > 0.0) {
            return Err(Error::param("tol_c", "must be > 0"));
        }
        let ctx = MarginContext::new(&grid, &params, cfg.tol_c);
        let lp_constants = vec![0.0; cfg.p_set.len()];
        Ok(Monitor {
            params,
            mode,
            cfg,
            ctx,
            prev: None,
            lp_constants,
        })
    }

    pub fn context(&self) -> &MarginContext {
        &self.ctx
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.cfg
    }

    pub fn record(&mut self, state: &StepState) -> Result<LedgerRow> {
        let mut row = observe(state, &self.params, self.mode, &self.cfg)?;
        match &self.prev {
            None => {
                row.tol_discr = self.ctx.tol_discr(0.0, 0.0);
            }
            Some(prev) => {
                let dt = row.t - prev.t;
                row.int_grad = prev.int_grad + 0.5 * dt * (prev.grad_sq + row.grad_sq);
                row.int_omega = prev.int_omega
                    + 0.5 * dt * ((prev.div_omega_sq + prev.omega_sq) + (row.div_omega_sq + row.omega_sq));
                let mut scale = 0.0f64;
                if let Some(m) = bistable_energy_margin(prev, &row, &self.ctx) {
                    row.energy_margin = m.value;
                    scale = scale.max(m.scale);
                }
                if self.params.model == ReactionModel::Monostable {
                    if let Ok(m) = entropy_margin_monostable(prev, &row, &self.ctx) {
                        row.entropy_margin = m.value;
                        scale = scale.max(m.scale);
                    }
                }
                row.tol_discr = self.ctx.tol_discr(dt, scale);
                for (k, &p) in self.cfg.p_set.iter().enumerate() {
                    if p < 2.0 {
                        continue;
                    }
                    let m = lp_energy_margin(prev, &row, p, &self.cfg.p_set, self.lp_constants[k], &self.ctx)?;
                    self.lp_constants[k] = m.constant;
                    row.lp_margin[k] = m.margin;
                    row.lp_constant[k] = m.constant;
                }
            }
        }
        self.prev = Some(row.clone());
        Ok(row)
    }
}
