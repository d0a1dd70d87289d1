use fluctlat::cli_harness::{format_number, read_fields_csv, ExperimentConfig};
use fluctlat::empirical::verify_bookkeeping;
use fluctlat::hydro_pde::{solve_hydro, stable_steps, FieldGrid, Grid, HydroProblem};
use fluctlat::profile::{Drift, Profile};
use fluctlat::rate_functional::phi;
use fluctlat::rates::CylinderRate;
use fluctlat::simulator::{run, SimParams};
use proptest::prelude::*;

fn rate_strategy() -> impl Strategy<Value = CylinderRate> {
    prop_oneof![
        Just(CylinderRate::constant()),
        Just(CylinderRate::neighbor_sum()),
        Just(CylinderRate::zero()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_snapshot_balances(
        n in 2usize..12,
        seed in any::<u64>(),
        rate in rate_strategy(),
        beta in (0.0f64..4.0, 0.0f64..4.0),
        g in -1.0f64..1.0,
        h in -1.0f64..1.0,
    ) {
        let mut p = SimParams::new(n, 0.2, rate).uniform_samples(5);
        p.seed = seed;
        p.beta_minus = beta.0;
        p.beta_plus = beta.1;
        p.tilt_g = Drift::Static(Profile::Constant(g));
        p.tilt_h = Drift::Static(Profile::Poly(vec![0.0, h]));
        let out = run(&p).unwrap();
        prop_assert_eq!(out.snapshots.len(), 5);
        for s in &out.snapshots {
            prop_assert!(verify_bookkeeping(s).is_ok());
            prop_assert!(s.occupancy.iter().all(|&e| e <= 1));
        }
    }

    #[test]
    fn hydro_stays_in_range_and_conserves(
        amp in -0.4f64..0.4,
        gs in -0.5f64..0.5,
        hs in -0.5f64..0.5,
        rate in rate_strategy(),
    ) {
        let grid = Grid::new(24, stable_steps(24, 0.1, 0.5), 0.1).unwrap();
        let g = FieldGrid::from_fn(grid, |t, x| gs * (1.0 + t) * x);
        let h = FieldGrid::from_fn(grid, |_, x| hs * (1.0 - x * x));
        let p = HydroProblem::new(grid, rate, |x| 0.5 + amp * (1.0 - x * x), 0.5, 0.5).with_drifts(g, h);
        let traj = solve_hydro(&p).unwrap();
        let (lo, hi) = traj.rho_range();
        prop_assert!(lo >= 0.0 && hi <= 1.0);
        let dx = grid.dx();
        for j in 1..grid.nx {
            let lhs = traj.rho.get(grid.nt, j) - traj.rho.get(0, j);
            let rhs = -(traj.q.get(grid.nt, j) - traj.q.get(grid.nt, j - 1)) / dx + traj.k.get(grid.nt, j);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_is_nonnegative_and_convex(
        c in 1e-3f64..10.0,
        a in 1e-3f64..10.0,
        k1 in -10.0f64..10.0,
        k2 in -10.0f64..10.0,
    ) {
        let (p1, p2) = (phi(c, a, k1).unwrap(), phi(c, a, k2).unwrap());
        let mid = phi(c, a, 0.5 * (k1 + k2)).unwrap();
        prop_assert!(p1 >= 0.0 && p2 >= 0.0);
        prop_assert!(mid <= 0.5 * (p1 + p2) + 1e-10 * (1.0 + p1 + p2));
    }

    #[test]
    fn numbers_round_trip_through_text(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let s = format_number(v);
        prop_assert!(!s.contains('e'));
        prop_assert_eq!(s.parse::<f64>().unwrap(), v);
    }

    #[test]
    fn config_text_is_a_fixpoint(
        n in 1usize..500,
        t in 0.01f64..5.0,
        seed in any::<u64>(),
        replicas in 1usize..100,
        amp in -0.5f64..0.5,
    ) {
        let text = format!(
            "mode = simulate\nsim.n = {n}\nsim.t = {t}\nseed = {seed}\nreplicas = {replicas}\nsim.initial = bump 0.5 {amp}\n"
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        let again = ExperimentConfig::parse(&c.to_text()).unwrap();
        prop_assert_eq!(&again, &c);
        prop_assert_eq!(again.to_text(), c.to_text());
    }
}

#[test]
fn fields_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(
        "mode = hydro\nsim.t = 0.05\ngrid.nx = 16\nsim.initial = bump 0.5 0.3\ntilt.g = poly 0.2\ntilt.h = sine 0.1 2\n",
    )
    .unwrap();
    fluctlat::cli_harness::run_experiment(&cfg, dir.path()).unwrap();
    let (traj, g, h) = read_fields_csv(&dir.path().join("fields.csv")).unwrap();
    let grid = cfg.grid().unwrap();
    let original = solve_hydro(
        &HydroProblem::new(grid, CylinderRate::constant(), |x| 0.5 + 0.3 * (1.0 - x * x), 0.5, 0.5)
            .with_drifts(cfg.drift_field("g", grid).unwrap(), cfg.drift_field("h", grid).unwrap()),
    )
    .unwrap();
    assert_eq!(traj.rho, original.rho);
    assert_eq!(traj.qdot, original.qdot);
    assert_eq!(traj.kdot, original.kdot);
    assert_eq!(traj.q, original.q);
    assert_eq!(g.values(), cfg.drift_field("g", grid).unwrap().values());
    assert_eq!(h.values(), cfg.drift_field("h", grid).unwrap().values());
}
