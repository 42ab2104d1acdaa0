use clusterflow::elliptic::{Backend, HelmholtzOperator};
use clusterflow::evolution::{advective_flux, diffusion_solve, stable_dt};
use clusterflow::monitor::cubic_cancellation_residual;
use clusterflow::reaction::{eval_e, forcing_grad_e, reaction_term};
use clusterflow::snapshot::{parse_snapshot, write_snapshot, Snapshot};
use clusterflow::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
struct Case {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    seed: u64,
}

impl Case {
    fn grid(&self) -> Grid {
        Grid::new(self.lx, self.ly, self.nx, self.ny).unwrap()
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn cases() -> impl Strategy<Value = Case> {
    (2usize..10, 2usize..10, 0.5f64..3.0, 0.5f64..3.0, any::<u64>()).prop_map(|(nx, ny, lx, ly, seed)| Case {
        nx,
        ny,
        lx,
        ly,
        seed,
    })
}

fn scalar(g: Grid, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField {
    ScalarField::from_values(g, (0..g.cell_count()).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn vector(g: Grid, rng: &mut ChaCha8Rng) -> VectorField {
    let x = (0..g.xface_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y = (0..g.yface_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut w = VectorField::from_components(g, x, y).unwrap();
    w.zero_boundary_normal();
    w
}

fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.max(f64::MIN_POSITIVE)
}

fn fields_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_and_divergence_are_adjoint(c in cases()) {
        let g = c.grid();
        let mut rng = c.rng();
        let u = scalar(g, &mut rng, -1.0, 1.0);
        let w = vector(g, &mut rng);
        let a = ops::dot_faces(&ops::gradient(&u), &w);
        let b = ops::dot_cells(&u, &ops::divergence(&w));
        let scale = ops::face_l2(&ops::gradient(&u)) * ops::face_l2(&w) + ops::lp_norm(&u, 2.0).unwrap() * ops::lp_norm(&ops::divergence(&w), 2.0).unwrap();
        prop_assert!(close(a + b, 0.0, scale, 1e-13));
    }

    #[test]
    fn divergence_of_no_flux_field_has_zero_integral(c in cases()) {
        let g = c.grid();
        let w = vector(g, &mut c.rng());
        let d = ops::divergence(&w);
        let scale: f64 = d.values().iter().map(|v| v.abs()).sum::<f64>() * g.cell_measure();
        prop_assert!(close(ops::integrate(&d), 0.0, scale, 1e-13));
    }

    #[test]
    fn operators_are_linear(c in cases(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let g = c.grid();
        let mut rng = c.rng();
        let (u, v) = (scalar(g, &mut rng, -1.0, 1.0), scalar(g, &mut rng, -1.0, 1.0));
        let (w, z) = (vector(g, &mut rng), vector(g, &mut rng));
        let comb = u.map(|x| alpha * x).add_scaled(beta, &v);
        let wcomb = w.map(|x| alpha * x).add_scaled(beta, &z);

        let lhs = ops::gradient(&comb);
        let rhs = ops::gradient(&u).map(|x| alpha * x).add_scaled(beta, &ops::gradient(&v));
        prop_assert!(fields_close(lhs.x(), rhs.x(), 1e-12) && fields_close(lhs.y(), rhs.y(), 1e-12));

        let lhs = ops::divergence(&wcomb);
        let rhs = ops::divergence(&w).map(|x| alpha * x).add_scaled(beta, &ops::divergence(&z));
        prop_assert!(fields_close(lhs.values(), rhs.values(), 1e-12));

        let lhs = ops::laplacian_neumann(&comb);
        let rhs = ops::laplacian_neumann(&u).map(|x| alpha * x).add_scaled(beta, &ops::laplacian_neumann(&v));
        prop_assert!(fields_close(lhs.values(), rhs.values(), 1e-12));

        let lhs = ops::face_average(&comb);
        let rhs = ops::face_average(&u).map(|x| alpha * x).add_scaled(beta, &ops::face_average(&v));
        prop_assert!(fields_close(lhs.x(), rhs.x(), 1e-13) && fields_close(lhs.y(), rhs.y(), 1e-13));

        let op = HelmholtzOperator::new(g, 0.1, Backend::Iterative, 1e-10).unwrap();
        let lhs = op.apply(&wcomb);
        let rhs = op.apply(&w).map(|x| alpha * x).add_scaled(beta, &op.apply(&z));
        prop_assert!(fields_close(lhs.x(), rhs.x(), 1e-12) && fields_close(lhs.y(), rhs.y(), 1e-12));

        for mode in [AdvectionMode::Energy, AdvectionMode::Upwind] {
            // Both fluxes are linear in u for a fixed velocity; the centred one
            // is also linear in the velocity.
            let lhs = advective_flux(&comb, &w, mode);
            let rhs = advective_flux(&u, &w, mode).map(|x| alpha * x).add_scaled(beta, &advective_flux(&v, &w, mode));
            prop_assert!(fields_close(lhs.values(), rhs.values(), 1e-12));
            if mode == AdvectionMode::Energy {
                let lhs = advective_flux(&u, &wcomb, mode);
                let rhs = advective_flux(&u, &w, mode).map(|x| alpha * x).add_scaled(beta, &advective_flux(&u, &z, mode));
                prop_assert!(fields_close(lhs.values(), rhs.values(), 1e-12));
            }
        }
    }

    #[test]
    fn neumann_laplacian_is_symmetric_nonpositive_with_constant_kernel(c in cases(), k in -5.0f64..5.0) {
        let g = c.grid();
        let mut rng = c.rng();
        let (u, v) = (scalar(g, &mut rng, -1.0, 1.0), scalar(g, &mut rng, -1.0, 1.0));
        let luv = ops::dot_cells(&ops::laplacian_neumann(&u), &v);
        let ulv = ops::dot_cells(&u, &ops::laplacian_neumann(&v));
        prop_assert!(close(luv, ulv, luv.abs().max(ulv.abs()).max(1.0), 1e-12));
        prop_assert!(ops::dot_cells(&ops::laplacian_neumann(&u), &u) <= 1e-12);
        prop_assert!(ops::laplacian_neumann(&ScalarField::constant(g, k)).values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn helmholtz_operator_is_coercive(c in cases(), eps in 0.01f64..1.0) {
        let g = c.grid();
        let v = vector(g, &mut c.rng());
        let op = HelmholtzOperator::new(g, eps, Backend::Direct, 1e-10).unwrap();
        let av = op.apply(&v);
        prop_assert!(ops::dot_faces(&av, &v) >= ops::dot_faces(&v, &v) * (1.0 - 1e-14));
        let (w, _) = op.solve(&v).unwrap();
        prop_assert!(ops::face_l2(&w) <= ops::face_l2(&v) * (1.0 + 1e-12));
        prop_assert!(w.has_zero_boundary_normal());
    }

    #[test]
    fn bistable_forcing_is_the_gradient_of_the_rate(c in cases(), a in 0.05f64..0.95) {
        let g = c.grid();
        let u = scalar(g, &mut c.rng(), 0.0, 2.0);
        let model = ReactionModel::bistable(a).unwrap();
        let f = forcing_grad_e(&model, &u);
        let ge = ops::gradient(&eval_e(&model, &u));
        prop_assert!(fields_close(f.x(), ge.x(), 1e-12) && fields_close(f.y(), ge.y(), 1e-12));
    }

    #[test]
    fn energy_mode_cancellation_is_exact(c in cases(), a in 0.05f64..0.95) {
        let g = c.grid();
        let mut rng = c.rng();
        let u = scalar(g, &mut rng, 0.0, 2.0);
        let w = vector(g, &mut rng);
        let res = cubic_cancellation_residual(&u, &w, &ReactionModel::bistable(a).unwrap(), AdvectionMode::Energy);
        prop_assert!(res.residual.unwrap() <= 1e-12 * res.scale());
    }

    #[test]
    fn diffusion_conserves_mass_and_respects_bounds(c in cases(), dt in 1e-4f64..1.0, delta in 0.01f64..0.99) {
        let g = c.grid();
        let rhs = scalar(g, &mut c.rng(), 0.0, 1.0);
        let u = diffusion_solve(&rhs, dt, delta, 1e-13).unwrap();
        let m = ops::integrate(&rhs);
        prop_assert!(close(ops::integrate(&u), m, m, 1e-12));
        prop_assert!(u.min() >= rhs.min() - 1e-10 && u.max() <= rhs.max() + 1e-10);
    }

    #[test]
    fn snapshot_round_trip_is_exact(c in cases(), t in 0.0f64..100.0) {
        let g = c.grid();
        let mut rng = c.rng();
        let snap = Snapshot { t, u: scalar(g, &mut rng, -1e3, 1e3), omega: Some(vector(g, &mut rng)) };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        write_snapshot(&path, &snap).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        prop_assert_eq!(parse_snapshot(&text, &path).unwrap(), snap);
    }
}

fn model_for(flag: bool, a: f64) -> ReactionModel {
    if flag {
        ReactionModel::bistable(a).unwrap()
    } else {
        ReactionModel::Monostable
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn step_obeys_mass_law_and_upwind_positivity(
        c in cases(),
        bistable in any::<bool>(),
        a in 0.1f64..0.9,
        r in 0.0f64..3.0,
        delta in 0.01f64..0.9,
        eps in 0.02f64..1.0,
        hi in 0.1f64..3.0,
    ) {
        let g = c.grid();
        let params = ModelParams::new(delta, eps, r, model_for(bistable, a)).unwrap();
        let s = Stepper::new(g, params, AdvectionMode::Upwind, EllipticSettings::default()).unwrap().with_diffusion_tol(1e-13);
        let mut st = s.initial_state(scalar(g, &mut c.rng(), 0.0, hi)).unwrap();
        for _ in 0..5 {
            let dt = stable_dt(&st.u, &st.omega, &params, 0.2).min(0.1);
            let before = ops::integrate(&st.u);
            let source = dt * ops::integrate(&reaction_term(&params.model, &st.u, r));
            let next = s.step(&st, dt).unwrap();
            let after = ops::integrate(&next.u);
            let scale = before.abs() + source.abs() + st.u.values().iter().map(|v| v.abs()).sum::<f64>() * g.cell_measure();
            prop_assert!(close(after - before, source, scale, 1e-12));
            prop_assert!(next.u.min() >= 0.0, "min {}", next.u.min());
            prop_assert!(next.omega.has_zero_boundary_normal());
            st = next;
        }
    }

    #[test]
    fn ledger_norms_nonnegative_and_integrals_monotone(c in cases(), bistable in any::<bool>(), mode_energy in any::<bool>()) {
        let g = c.grid();
        let params = ModelParams::new(0.1, 0.1, 1.0, model_for(bistable, 0.3)).unwrap();
        let mode = if mode_energy { AdvectionMode::Energy } else { AdvectionMode::Upwind };
        let s = Stepper::new(g, params, mode, EllipticSettings::default()).unwrap();
        let controls = RunControls {
            t_end: 0.1,
            dt_max: 0.01,
            safety: 0.2,
            output_period: 0.0,
            monitor: MonitorConfig::default(),
            guard: GuardConfig::default(),
        };
        let out = run(&s, scalar(g, &mut c.rng(), 0.1, 1.0), &controls, |_, _| Ok(())).unwrap();
        for row in &out.rows {
            let norms = [row.l2_sq, row.grad_sq, row.linf, row.grad_lq, row.w1q, row.omega_sq, row.div_omega_sq, row.omega_grad_sq, row.omega_linf, row.int_grad, row.int_omega];
            prop_assert!(norms.iter().chain(&row.lp).chain(&row.grad_pow_sq).all(|&v| v >= 0.0));
        }
        for pair in out.rows.windows(2) {
            prop_assert!(pair[1].int_grad >= pair[0].int_grad);
            prop_assert!(pair[1].int_omega >= pair[0].int_omega);
            prop_assert!(pair[1].t > pair[0].t);
        }
    }

    #[test]
    fn config_echo_reparses_identically(
        nx in 2usize..200, ny in 2usize..200, delta in 0.001f64..0.999, eps in 1e-3f64..10.0,
        r in 0.0f64..5.0, a in 0.001f64..0.999, t_end in 0.0f64..10.0, seed in any::<u64>(),
    ) {
        let text = format!(
            "grid.nx = {nx}\ngrid.ny = {ny}\nparams.delta = {delta}\nparams.epsilon = {eps}\nparams.r = {r}\n\
             model.kind = bistable\nmodel.a = {a}\ntime.t_end = {t_end}\ninit.kind = noise\nseed = {seed}\n"
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&cfg.echo()).unwrap(), cfg);
    }
}
