//! Time stepping for the coupled density / velocity system.
//!
//! One step is a Lie splitting: solve for `ω` from `uₙ`, take an explicit
//! step of advection plus reaction, then an implicit (backward Euler) step of
//! the Neumann diffusion.

use std::fmt;
use std::str::FromStr;

use crate::elliptic::{Backend, HelmholtzOperator, SolveReport};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::linalg;
use crate::monitor::{blowup_guard, AbortReport, GuardConfig, GuardVerdict, LedgerRow, Monitor, MonitorConfig};
use crate::ops;
use crate::reaction::{self, ReactionModel};

/// Default relative tolerance of the implicit diffusion solve.
pub const DIFFUSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub delta: f64,
    pub epsilon: f64,
    pub r: f64,
    pub model: ReactionModel,
}

impl ModelParams {
    pub fn new(delta: f64, epsilon: f64, r: f64, model: ReactionModel) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("delta", format!("must lie in (0,1), got {delta}")));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::param("epsilon", format!("must be > 0, got {epsilon}")));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::param("r", format!("must be >= 0, got {r}")));
        }
        Ok(ModelParams {
            delta,
            epsilon,
            r,
            model,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvectionMode {
    /// Centred face average shared with the forcing; reproduces the discrete
    /// energy cancellation exactly but does not preserve positivity.
    Energy,
    /// Donor-cell upwinding; positivity preserving under the CFL bound.
    Upwind,
}

impl FromStr for AdvectionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "energy" => Ok(AdvectionMode::Energy),
            "upwind" => Ok(AdvectionMode::Upwind),
            other => Err(format!("expected `energy` or `upwind`, got `{other}`")),
        }
    }
}

impl fmt::Display for AdvectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdvectionMode::Energy => "energy",
            AdvectionMode::Upwind => "upwind",
        })
    }
}

/// Diagnostics for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub mass_before: f64,
    pub mass_after: f64,
    /// `dt · ∫ r u E(u)` evaluated at `uₙ`.
    pub reaction_mass: f64,
    /// Minimum of the explicit intermediate `u*`.
    pub explicit_min: f64,
    pub diffusion_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct StepState {
    pub step: usize,
    pub t: f64,
    pub u: ScalarField,
    /// Elliptic forcing `E′(ũ) G u` for this `u`.
    pub forcing: VectorField,
    /// Velocity solved from `forcing`.
    pub omega: VectorField,
    pub solve: SolveReport,
    /// Step size that produced this state (0 for the initial state).
    pub dt_used: f64,
    pub report: Option<StepReport>,
}

/// Face values used by the advective flux.
pub fn advected_face_values(u: &ScalarField, omega: &VectorField, mode: AdvectionMode) -> VectorField {
    match mode {
        AdvectionMode::Energy => ops::face_average(u),
        AdvectionMode::Upwind => {
            let g = *u.grid();
            let (nx, ny) = (g.nx(), g.ny());
            let v = u.values();
            let mut out = ops::face_average(u);
            {
                let (wx, x) = (omega.x(), out.x_mut());
                for j in 0..ny {
                    for i in 1..nx {
                        let f = g.xface(i, j);
                        x[f] = if wx[f] >= 0.0 { v[g.cell(i - 1, j)] } else { v[g.cell(i, j)] };
                    }
                }
            }
            {
                let (wy, y) = (omega.y(), out.y_mut());
                for j in 1..ny {
                    for i in 0..nx {
                        let f = g.yface(i, j);
                        y[f] = if wy[f] >= 0.0 { v[g.cell(i, j - 1)] } else { v[g.cell(i, j)] };
                    }
                }
            }
            out
        }
    }
}

/// `D(û ⊙ ω)`, the divergence of the advective flux.
pub fn advective_flux(u: &ScalarField, omega: &VectorField, mode: AdvectionMode) -> ScalarField {
    ops::divergence(&advected_face_values(u, omega, mode).hadamard(omega))
}

fn neumann_stencil(g: &Grid, v: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let c = v[k];
            let mut s = 0.0;
            if i > 0 {
                s += cx * (v[k - 1] - c);
            }
            if i + 1 < nx {
                s += cx * (v[k + 1] - c);
            }
            if j > 0 {
                s += cy * (v[k - nx] - c);
            }
            if j + 1 < ny {
                s += cy * (v[k + nx] - c);
            }
            out[k] = s;
        }
    }
}

/// Solves `(I − dt·δ·Δ_N) u = rhs`, returning `u` and the CG iteration count.
///
/// The constant mode is split off first (it is an eigenvector with eigenvalue
/// one), so the mass of the result equals the mass of `rhs` to rounding.
pub fn diffusion_solve_with_stats(
    rhs: &ScalarField,
    dt: f64,
    delta: f64,
    tol: f64,
) -> Result<(ScalarField, usize)> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be > 0, got {dt}")));
    }
    if !(delta > 0.0) {
        return Err(Error::param("delta", format!("must be > 0, got {delta}")));
    }
    let g = *rhs.grid();
    let n = g.cell_count();
    if rhs.min() == rhs.max() {
        return Ok((rhs.clone(), 0));
    }
    let mean = rhs.values().iter().sum::<f64>() / n as f64;
    let b: Vec<f64> = rhs.values().iter().map(|v| v - mean).collect();
    if b.iter().all(|&v| v == 0.0) {
        return Ok((ScalarField::constant(g, mean), 0));
    }
    let k = dt * delta;
    let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let diag: Vec<f64> = (0..g.ny())
        .flat_map(|j| (0..g.nx()).map(move |i| (i, j)))
        .map(|(i, j)| {
            let nbx = (i > 0) as u8 + (i + 1 < g.nx()) as u8;
            let nby = (j > 0) as u8 + (j + 1 < g.ny()) as u8;
            1.0 + k * (cx * nbx as f64 + cy * nby as f64)
        })
        .collect();
    let mut x = vec![0.0; n];
    let out = linalg::pcg(
        |v, o| {
            neumann_stencil(&g, v, o);
            for (oi, vi) in o.iter_mut().zip(v) {
                *oi = vi - k * *oi;
            }
        },
        &diag,
        &b,
        &mut x,
        tol,
        20 * n + 100,
    )?;
    let drift = x.iter().sum::<f64>() / n as f64;
    let values = x.into_iter().map(|v| v - drift + mean).collect();
    Ok((ScalarField::from_values(g, values)?, out.iterations))
}

pub fn diffusion_solve(rhs: &ScalarField, dt: f64, delta: f64, tol: f64) -> Result<ScalarField> {
    diffusion_solve_with_stats(rhs, dt, delta, tol).map(|(u, _)| u)
}

/// Largest step allowed by the explicit terms:
/// `safety · min(hx / max|ωx|, hy / max|ωy|, 1 / (r · max|∂ᵤ(uE)|))`.
///
/// The reaction bound is taken over `[min(0, min u), max(0, max u)]`. Terms
/// with a zero denominator are dropped; `f64::INFINITY` means unconstrained.
/// Donor-cell positivity is guaranteed for `safety <= 0.2` (four outflow faces
/// plus the reaction term).
pub fn stable_dt(u: &ScalarField, omega: &VectorField, params: &ModelParams, safety: f64) -> f64 {
    let g = u.grid();
    let mx = omega.x().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let my = omega.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lo = u.min().min(0.0);
    let hi = u.max().max(0.0);
    let mr = params.r * params.model.max_abs_d_growth(lo, hi);
    let mut dt = f64::INFINITY;
    if mx > 0.0 {
        dt = dt.min(g.hx() / mx);
    }
    if my > 0.0 {
        dt = dt.min(g.hy() / my);
    }
    if mr > 0.0 {
        dt = dt.min(1.0 / mr);
    }
    safety * dt
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticSettings {
    pub backend: Backend,
    pub tol: f64,
    pub parallel: bool,
}

impl Default for EllipticSettings {
    fn default() -> Self {
        EllipticSettings {
            backend: Backend::Direct,
            tol: crate::elliptic::DEFAULT_TOL,
            parallel: false,
        }
    }
}

/// Owns the assembled elliptic operator for a fixed grid and parameter set.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: ModelParams,
    mode: AdvectionMode,
    helmholtz: HelmholtzOperator,
    diffusion_tol: f64,
}

impl Stepper {
    pub fn new(grid: Grid, params: ModelParams, mode: AdvectionMode, elliptic: EllipticSettings) -> Result<Self> {
        let helmholtz =
            HelmholtzOperator::new(grid, params.epsilon, elliptic.backend, elliptic.tol)?.with_parallel(elliptic.parallel);
        Ok(Stepper {
            params,
            mode,
            helmholtz,
            diffusion_tol: DIFFUSION_TOL,
        })
    }

    pub fn with_diffusion_tol(mut self, tol: f64) -> Self {
        self.diffusion_tol = tol;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mode(&self) -> AdvectionMode {
        self.mode
    }

    pub fn grid(&self) -> &Grid {
        self.helmholtz.grid()
    }

    pub fn helmholtz(&self) -> &HelmholtzOperator {
        &self.helmholtz
    }

    /// Pairs `u` with its velocity field.
    pub fn state_at(&self, step: usize, t: f64, u: ScalarField, dt_used: f64) -> Result<StepState> {
        if !u.grid().same_as(self.grid()) {
            return Err(Error::GridMismatch);
        }
        let forcing = reaction::forcing_grad_e(&self.params.model, &u);
        let (omega, solve) = self.helmholtz.solve(&forcing)?;
        if !omega.is_finite() {
            return Err(Error::Integrity { stage: "elliptic" });
        }
        Ok(StepState {
            step,
            t,
            u,
            forcing,
            omega,
            solve,
            dt_used,
            report: None,
        })
    }

    pub fn initial_state(&self, u0: ScalarField) -> Result<StepState> {
        if !u0.is_finite() {
            return Err(Error::Integrity { stage: "initial data" });
        }
        self.state_at(0, 0.0, u0, 0.0)
    }

    pub fn stable_dt(&self, state: &StepState, safety: f64) -> f64 {
        stable_dt(&state.u, &state.omega, &self.params, safety)
    }

    pub fn step(&self, state: &StepState, dt: f64) -> Result<StepState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt", format!("must be finite and > 0, got {dt}")));
        }
        let p = &self.params;
        let u = &state.u;
        let flux = advective_flux(u, &state.omega, self.mode);
        let growth = reaction::reaction_term(&p.model, u, p.r);
        let explicit: Vec<f64> = u
            .values()
            .iter()
            .zip(flux.values())
            .zip(growth.values())
            .map(|((&un, &fl), &gr)| un + dt * (gr - fl))
            .collect();
        let u_star = ScalarField::from_values(*u.grid(), explicit)?;
        if !u_star.is_finite() {
            return Err(Error::Integrity { stage: "explicit" });
        }
        let (u_next, iters) = diffusion_solve_with_stats(&u_star, dt, p.delta, self.diffusion_tol)?;
        if !u_next.is_finite() {
            return Err(Error::Integrity { stage: "diffusion" });
        }
        let report = StepReport {
            mass_before: ops::integrate(u),
            mass_after: ops::integrate(&u_next),
            reaction_mass: dt * ops::integrate(&growth),
            explicit_min: u_star.min(),
            diffusion_iterations: iters,
        };
        let mut next = self.state_at(state.step + 1, state.t + dt, u_next, dt)?;
        next.report = Some(report);
        Ok(next)
    }
}

/// Loop controls for [`run`].
#[derive(Debug, Clone)]
pub struct RunControls {
    pub t_end: f64,
    pub dt_max: f64,
    pub safety: f64,
    /// Steps are shortened so that every multiple of this period is hit
    /// exactly; 0 disables the clamp.
    pub output_period: f64,
    pub monitor: MonitorConfig,
    pub guard: GuardConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: StepState,
    pub rows: Vec<LedgerRow>,
    pub abort: Option<AbortReport>,
}

/// Advances `u0` to `t_end`, recording a ledger row per step and stopping
/// early if the blow-up guard trips.
///
/// `observe` sees every state with its row (including the initial one) before
/// the guard is consulted.
pub fn run(
    stepper: &Stepper,
    u0: ScalarField,
    controls: &RunControls,
    mut observe: impl FnMut(&StepState, &LedgerRow) -> Result<()>,
) -> Result<RunOutcome> {
    if u0.min() < 0.0 {
        return Err(Error::param("u0", "initial density must be nonnegative"));
    }
    if !(controls.output_period >= 0.0) {
        return Err(Error::param("output_period", "must be >= 0"));
    }
    if !(controls.t_end >= 0.0) || !(controls.dt_max > 0.0) || !(controls.safety > 0.0 && controls.safety <= 1.0) {
        return Err(Error::param("controls", "need t_end >= 0, dt_max > 0, safety ∈ (0,1]"));
    }
    let mut monitor = Monitor::new(*stepper.grid(), stepper.params, stepper.mode, controls.monitor.clone())?;
    let mut state = stepper.initial_state(u0)?;
    let mut rows = Vec::new();

    let row = monitor.record(&state)?;
    observe(&state, &row)?;
    let mut verdict = blowup_guard(&row, &controls.guard);
    rows.push(row);

    let t_stop = controls.t_end - 1e-12 * controls.t_end.max(1.0);
    while verdict.is_ok() && state.t < t_stop {
        let remaining = controls.t_end - state.t;
        let mut dt = controls.dt_max.min(stepper.stable_dt(&state, controls.safety));
        if dt >= remaining * (1.0 - 1e-9) {
            dt = remaining;
        }
        if controls.output_period > 0.0 {
            let mark = next_mark(state.t, controls.output_period);
            if mark < controls.t_end && dt >= (mark - state.t) * (1.0 - 1e-9) {
                dt = mark - state.t;
            }
        }
        state = stepper.step(&state, dt)?;
        let row = monitor.record(&state)?;
        observe(&state, &row)?;
        verdict = blowup_guard(&row, &controls.guard);
        rows.push(row);
    }
    let abort = match verdict {
        GuardVerdict::Ok => None,
        GuardVerdict::Abort(report) => Some(report),
    };
    Ok(RunOutcome {
        final_state: state,
        rows,
        abort,
    })
}

/// First multiple of `period` strictly after `t` (up to rounding).
pub fn next_mark(t: f64, period: f64) -> f64 {
    ((t / period + 1e-9).floor() + 1.0) * period
}

/// Whether `t` sits on a multiple of `period`.
pub fn on_mark(t: f64, period: f64) -> bool {
    let k = t / period;
    (k - k.round()).abs() <= 1e-9
}
