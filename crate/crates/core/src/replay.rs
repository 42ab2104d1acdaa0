//! Offline re-evaluation of a finished run.
//!
//! The margins, tolerances and time integrals are recomputed from the raw
//! ledger columns and the parameters in the ledger header, and the norm
//! columns are recomputed from every snapshot whose time matches a row. All
//! arithmetic here is written out directly rather than going through the
//! in-run monitor, so agreement is a genuine cross-check.

use std::path::Path;

use crate::error::Result;
use crate::ledger::{read_ledger, LedgerMeta};
use crate::monitor::LedgerRow;
use crate::reaction::ReactionModel;
use crate::snapshot::{list_snapshots, read_snapshot, Snapshot};

pub const REPLAY_TOL: f64 = 1e-12;

/// Largest relative disagreement seen for one quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayCheck {
    pub quantity: String,
    pub compared: usize,
    pub max_rel: f64,
    /// Row (step) where `max_rel` occurred.
    pub worst_step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub rows: usize,
    pub snapshots: usize,
    pub snapshots_matched: usize,
    pub checks: Vec<ReplayCheck>,
}

impl ReplayReport {
    pub fn max_rel(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel() <= REPLAY_TOL && self.snapshots_matched == self.snapshots
    }
}

#[derive(Default)]
struct Tally {
    checks: Vec<ReplayCheck>,
}

impl Tally {
    /// `|a − b| / max(|a|, |b|, scale)`; two NaNs agree, one NaN does not.
    fn compare(&mut self, quantity: &str, step: usize, ledger: f64, replayed: f64, scale: f64) {
        let rel = if ledger.is_nan() && replayed.is_nan() {
            0.0
        } else if ledger.is_nan() || replayed.is_nan() {
            f64::INFINITY
        } else if ledger == replayed {
            0.0
        } else {
            (ledger - replayed).abs() / ledger.abs().max(replayed.abs()).max(scale.abs())
        };
        let check = match self.checks.iter_mut().find(|c| c.quantity == quantity) {
            Some(c) => c,
            None => {
                self.checks.push(ReplayCheck {
                    quantity: quantity.to_string(),
                    compared: 0,
                    max_rel: 0.0,
                    worst_step: step,
                });
                self.checks.last_mut().unwrap()
            }
        };
        check.compared += 1;
        if rel > check.max_rel || rel.is_nan() {
            check.max_rel = rel;
            check.worst_step = step;
        }
    }
}

fn replay_margins(meta: &LedgerMeta, rows: &[LedgerRow], tally: &mut Tally) {
    let p = &meta.params;
    let h = meta.grid.hx().max(meta.grid.hy());
    let area = meta.grid.lx() * meta.grid.ly();
    let tol_c = meta.monitor.tol_c;
    let mut constants = vec![0.0f64; meta.monitor.p_set.len()];
    let (mut int_grad, mut int_omega) = (0.0f64, 0.0f64);

    if let Some(first) = rows.first() {
        tally.compare("int_grad", first.step, first.int_grad, 0.0, 0.0);
        tally.compare("int_omega", first.step, first.int_omega, 0.0, 0.0);
        tally.compare("tol_discr", first.step, first.tol_discr, 0.0, 0.0);
    }
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        tally.compare("dt", b.step, b.dt, dt, b.t);

        let g0 = a.grad_sq;
        let g1 = b.grad_sq;
        int_grad += dt * (g0 + g1) / 2.0;
        let w0 = a.div_omega_sq + a.omega_sq;
        let w1 = b.div_omega_sq + b.omega_sq;
        int_omega += dt * (w0 + w1) / 2.0;
        tally.compare("int_grad", b.step, b.int_grad, int_grad, 0.0);
        tally.compare("int_omega", b.step, b.int_omega, int_omega, 0.0);

        let mut scale = 0.0f64;
        let energy = match p.model {
            ReactionModel::Bistable { a: thr } => {
                let d_l2 = (b.l2_sq - a.l2_sq) / dt;
                let lhs = [d_l2, p.epsilon * a.div_omega_sq / 2.0, a.omega_sq, 2.0 * p.delta * b.grad_sq];
                let rhs = (1.0 + thr) * (1.0 + thr) * a.l2_sq / (2.0 * p.epsilon) + 2.0 * p.r * area * (1.0 - thr);
                let s = lhs.iter().map(|v| v.abs()).sum::<f64>() + rhs.abs();
                scale = scale.max(s);
                tally.compare("energy_margin", b.step, b.energy_margin, rhs - lhs.iter().sum::<f64>(), s);
                tally.compare(
                    "cancel_residual",
                    b.step,
                    b.cancel_residual,
                    (b.cancel_t1 + b.cancel_t2).abs(),
                    b.cancel_t1.abs() + b.cancel_t2.abs(),
                );
                true
            }
            ReactionModel::Monostable => {
                tally.compare("energy_margin", b.step, b.energy_margin, f64::NAN, 0.0);
                tally.compare("cancel_residual", b.step, b.cancel_residual, f64::NAN, 0.0);
                false
            }
        };
        if !energy {
            let replayed = if a.entropy_flag || b.entropy_flag {
                f64::NAN
            } else {
                let d_s = (b.entropy - a.entropy) / dt;
                let lhs = [d_s, p.epsilon * a.div_omega_sq, a.omega_sq];
                let rhs = [-4.0 * p.delta * b.sqrt_grad_sq, p.r * area];
                let s = lhs.iter().chain(&rhs).map(|v| v.abs()).sum::<f64>();
                scale = scale.max(s);
                rhs.iter().sum::<f64>() - lhs.iter().sum::<f64>()
            };
            tally.compare("entropy_margin", b.step, b.entropy_margin, replayed, scale);
        }
        tally.compare("tol_discr", b.step, b.tol_discr, tol_c * (dt + h * h) * scale, 0.0);

        for (k, &pk) in meta.monitor.p_set.iter().enumerate() {
            if pk < 2.0 {
                tally.compare("lp_margin", b.step, b.lp_margin[k], f64::NAN, 0.0);
                continue;
            }
            let m0 = a.lp[k].powf(pk);
            let m1 = b.lp[k].powf(pk);
            let rate = (m1 - m0) / dt;
            let dissipation = 2.0 * p.delta * (pk - 1.0) / pk * b.grad_pow_sq[k];
            let weight = 1.0 + m0 + a.div_omega_sq * m0;
            let need = ((rate + dissipation) / weight).max(0.0);
            constants[k] = constants[k].max(need);
            let margin = constants[k] * weight - dissipation - rate;
            let s = (constants[k] * weight).abs() + dissipation.abs() + rate.abs();
            tally.compare("lp_constant", b.step, b.lp_constant[k], constants[k], 0.0);
            tally.compare("lp_margin", b.step, b.lp_margin[k], margin, s);
        }
    }
}

/// Norm columns recomputed from one snapshot with explicit loops.
fn replay_snapshot(meta: &LedgerMeta, snap: &Snapshot, row: &LedgerRow, tally: &mut Tally) {
    let g = &meta.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let (hx, hy) = (g.hx(), g.hy());
    let cell = hx * hy;
    let u = snap.u.values();
    let step = row.step;

    let grad_sq_of = |v: &[f64]| {
        let mut s = 0.0;
        for j in 0..ny {
            for i in 1..nx {
                let d = (v[j * nx + i] - v[j * nx + i - 1]) / hx;
                s += d * d;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let d = (v[j * nx + i] - v[(j - 1) * nx + i]) / hy;
                s += d * d;
            }
        }
        s * cell
    };

    let mass: f64 = u.iter().sum::<f64>() * cell;
    let l2_sq: f64 = u.iter().map(|v| v * v).sum::<f64>() * cell;
    let linf = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let grad_sq = grad_sq_of(u);
    tally.compare("snapshot:mass", step, row.mass, mass, u.iter().map(|v| v.abs()).sum::<f64>() * cell);
    tally.compare("snapshot:l2_sq", step, row.l2_sq, l2_sq, 0.0);
    tally.compare("snapshot:linf", step, row.linf, linf, 0.0);
    tally.compare("snapshot:grad_sq", step, row.grad_sq, grad_sq, 0.0);
    for (k, &p) in meta.monitor.p_set.iter().enumerate() {
        let s: f64 = u.iter().map(|v| v.abs().powf(p)).sum();
        tally.compare("snapshot:lp", step, row.lp[k], (s * cell).powf(1.0 / p), 0.0);
        let pow: Vec<f64> = u.iter().map(|v| v.abs().powf(p / 2.0)).collect();
        tally.compare("snapshot:grad_pow_sq", step, row.grad_pow_sq[k], grad_sq_of(&pow), 0.0);
    }
    if u.iter().all(|&v| v >= 0.0) {
        let ent: f64 = u.iter().map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 }).sum::<f64>() * cell;
        let ent_scale: f64 = u.iter().map(|&v| if v > 0.0 { (v * v.ln()).abs() } else { 0.0 }).sum::<f64>() * cell;
        tally.compare("snapshot:entropy", step, row.entropy, ent, ent_scale);
        let roots: Vec<f64> = u.iter().map(|v| v.sqrt()).collect();
        tally.compare("snapshot:sqrt_grad_sq", step, row.sqrt_grad_sq, grad_sq_of(&roots), 0.0);
    }

    if let Some(w) = &snap.omega {
        let (wx, wy) = (w.x(), w.y());
        let omega_sq = wx.iter().chain(wy).map(|v| v * v).sum::<f64>() * cell;
        let omega_linf = wx.iter().chain(wy).fold(0.0f64, |m, v| m.max(v.abs()));
        let mut div_sq = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let d = (wx[j * (nx + 1) + i + 1] - wx[j * (nx + 1) + i]) / hx + (wy[(j + 1) * nx + i] - wy[j * nx + i]) / hy;
                div_sq += d * d;
            }
        }
        tally.compare("snapshot:omega_sq", step, row.omega_sq, omega_sq, 0.0);
        tally.compare("snapshot:omega_linf", step, row.omega_linf, omega_linf, 0.0);
        tally.compare("snapshot:div_omega_sq", step, row.div_omega_sq, div_sq * cell, 0.0);
    }
}

pub fn replay(ledger: impl AsRef<Path>, snapshot_dir: impl AsRef<Path>) -> Result<ReplayReport> {
    let (meta, rows) = read_ledger(ledger)?;
    let mut tally = Tally::default();
    replay_margins(&meta, &rows, &mut tally);

    let dir = snapshot_dir.as_ref();
    let files = if dir.exists() { list_snapshots(dir)? } else { Vec::new() };
    let mut matched = 0;
    for path in &files {
        let snap = read_snapshot(path)?;
        if !snap.u.grid().same_as(&meta.grid) {
            continue;
        }
        if let Some(row) = rows.iter().find(|r| r.t == snap.t) {
            replay_snapshot(&meta, &snap, row, &mut tally);
            matched += 1;
        }
    }
    Ok(ReplayReport {
        rows: rows.len(),
        snapshots: files.len(),
        snapshots_matched: matched,
        checks: tally.checks,
    })
}
