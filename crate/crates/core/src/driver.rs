//! Runs a [`SimConfig`] end to end: initial data, stepping, ledger and
//! snapshot output.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{InitSpec, SimConfig};
use crate::error::{Error, Result};
use crate::evolution::{self, on_mark, EllipticSettings, RunControls, StepState, Stepper};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::ledger::{LedgerMeta, LedgerWriter};
use crate::monitor::{AbortReport, LedgerRow};
use crate::snapshot::{read_snapshot, snapshot_file_name, write_snapshot, Snapshot};

pub fn initial_density(spec: &InitSpec, grid: Grid, seed: u64) -> Result<ScalarField> {
    match spec {
        InitSpec::Constant { value } => Ok(ScalarField::constant(grid, *value)),
        InitSpec::Cosine {
            value,
            amplitude,
            mode_x,
            mode_y,
        } => {
            let (kx, ky) = (*mode_x as f64 * PI / grid.lx(), *mode_y as f64 * PI / grid.ly());
            Ok(ScalarField::from_fn(grid, |x, y| value + amplitude * (kx * x).cos() * (ky * y).cos()))
        }
        InitSpec::Noise { lo, hi } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..grid.cell_count()).map(|_| rng.gen_range(*lo..*hi)).collect();
            ScalarField::from_values(grid, values)
        }
        InitSpec::File { path } => {
            let snap = read_snapshot(path)?;
            if !snap.u.grid().same_as(&grid) {
                return Err(Error::config("init.file", "snapshot grid differs from grid.*"));
            }
            if snap.u.min() < 0.0 {
                return Err(Error::config("init.file", "initial density must be >= 0"));
            }
            Ok(snap.u)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub steps: usize,
    pub t_final: f64,
    pub snapshots: Vec<PathBuf>,
    pub ledger: PathBuf,
    pub abort: Option<AbortReport>,
    pub last_row: LedgerRow,
}

pub fn ledger_meta(cfg: &SimConfig) -> LedgerMeta {
    LedgerMeta {
        grid: cfg.grid,
        params: cfg.params,
        mode: cfg.mode,
        monitor: cfg.monitor.clone(),
    }
}

/// `parallel` solves the two velocity components on separate threads.
pub fn run_config(cfg: &SimConfig, parallel: bool) -> Result<SimOutcome> {
    let u0 = initial_density(&cfg.init, cfg.grid, cfg.seed)?;
    let elliptic = EllipticSettings {
        backend: cfg.backend,
        tol: cfg.elliptic_tol,
        parallel,
    };
    let stepper = Stepper::new(cfg.grid, cfg.params, cfg.mode, elliptic)?;
    let controls = RunControls {
        t_end: cfg.time.t_end,
        dt_max: cfg.time.dt_max,
        safety: cfg.time.safety,
        output_period: cfg.output.snapshot_period,
        monitor: cfg.monitor.clone(),
        guard: cfg.guard,
    };

    let mut ledger = LedgerWriter::create(&cfg.output.ledger, &ledger_meta(cfg))?;
    let period = cfg.output.snapshot_period;
    let dir = &cfg.output.snapshot_dir;
    if period > 0.0 {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut snapshots: Vec<PathBuf> = Vec::new();
    let mut last: Option<StepState> = None;
    let write = |state: &StepState, snapshots: &mut Vec<PathBuf>| -> Result<()> {
        let path = dir.join(snapshot_file_name(snapshots.len()));
        write_snapshot(
            &path,
            &Snapshot {
                t: state.t,
                u: state.u.clone(),
                omega: Some(state.omega.clone()),
            },
        )?;
        snapshots.push(path);
        Ok(())
    };

    let outcome = evolution::run(&stepper, u0, &controls, |state, row| {
        ledger.append(row)?;
        if period > 0.0 && on_mark(state.t, period) {
            write(state, &mut snapshots)?;
        }
        last = Some(state.clone());
        Ok(())
    })?;

    let mut abort = outcome.abort;
    if let Some(report) = abort.as_mut() {
        let state = last.as_ref().expect("observer saw at least the initial state");
        let already = period > 0.0 && on_mark(state.t, period);
        if !already {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            write(state, &mut snapshots)?;
        }
        report.snapshot = snapshots.last().cloned();
    }
    let last_row = outcome.rows.last().cloned().expect("at least one ledger row");
    Ok(SimOutcome {
        steps: outcome.final_state.step,
        t_final: outcome.final_state.t,
        snapshots,
        ledger: ledger.path().to_path_buf(),
        abort,
        last_row,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::ledger::read_ledger;

    fn cfg(dir: &std::path::Path, extra: &str) -> SimConfig {
        let text = format!(
            "grid.nx = 8\ngrid.ny = 8\nparams.delta = 0.1\nparams.epsilon = 0.1\nparams.r = 1\n\
             model.kind = bistable\nmodel.a = 0.25\ntime.t_end = 0.2\ntime.dt_max = 0.01\n\
             output.ledger = {}\noutput.snapshot_dir = {}\n{extra}",
            dir.join("ledger.csv").display(),
            dir.join("snaps").display()
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn noise_is_seeded_and_in_range() {
        let g = Grid::new(1.0, 1.0, 8, 8).unwrap();
        let spec = InitSpec::Noise { lo: 0.4, hi: 0.6 };
        let a = initial_density(&spec, g, 7).unwrap();
        assert_eq!(a, initial_density(&spec, g, 7).unwrap());
        assert_ne!(a, initial_density(&spec, g, 8).unwrap());
        assert!(a.min() >= 0.4 && a.max() < 0.6);
    }

    #[test]
    fn cosine_init_has_requested_mean_and_shape() {
        let g = Grid::new(2.0, 1.0, 16, 8).unwrap();
        let spec = InitSpec::Cosine {
            value: 0.5,
            amplitude: 0.1,
            mode_x: 2,
            mode_y: 0,
        };
        let u = initial_density(&spec, g, 0).unwrap();
        assert!((crate::ops::integrate(&u) - 0.5 * g.area()).abs() < 1e-14);
        assert!((u.at(0, 3) - (0.5 + 0.1 * (PI * 0.0625).cos())).abs() < 1e-15);
    }

    #[test]
    fn snapshots_follow_simulated_time() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path(), "init.kind = cosine\ninit.value = 0.3\noutput.snapshot_period = 0.05\n");
        let out = run_config(&c, false).unwrap();
        assert!(out.abort.is_none());
        assert_eq!(out.snapshots.len(), 5);
        for (k, p) in out.snapshots.iter().enumerate() {
            let s = read_snapshot(p).unwrap();
            assert!((s.t - 0.05 * k as f64).abs() < 1e-12);
            assert!(s.omega.is_some());
        }
        let (meta, rows) = read_ledger(&out.ledger).unwrap();
        assert_eq!(meta, ledger_meta(&c));
        assert_eq!(rows.len(), out.steps + 1);
        assert_eq!(format!("{:?}", rows.last().unwrap()), format!("{:?}", out.last_row));
    }

    #[test]
    fn init_file_must_match_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u0.txt");
        let g = Grid::new(1.0, 1.0, 4, 4).unwrap();
        write_snapshot(&path, &Snapshot { t: 0.0, u: ScalarField::constant(g, 0.5), omega: None }).unwrap();
        let c = cfg(dir.path(), &format!("init.kind = file\ninit.file = {}\n", path.display()));
        assert!(matches!(run_config(&c, false), Err(Error::Config { .. })));
    }
}
