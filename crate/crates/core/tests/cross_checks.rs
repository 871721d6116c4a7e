use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rothe_hvi::diagnostics::{estimate_report, final_time_errors, tau_ladder_study};
use rothe_hvi::fem1d::{build_problem, ForcingSpec, InitialValue, Mesh1D};
use rothe_hvi::inclusion::{solve_step_inclusion, StepProblem};
use rothe_hvi::oracle::{exact_linear_constant_load, minimize_energy_convex, reference_solution, scan_roots_1d, scan_roots_schur};
use rothe_hvi::potentials::NonconvexParams;
use rothe_hvi::stepper::check_step_coercivity;
use rothe_hvi::{
    run_rothe, BoundaryFunctional, DualVector, GalerkinSpace, Matrix, OperatorConstants, RotheProblem, Scheme,
    ScalarPotential, SolverSettings, StepOperator, TimeGrid, Vector,
};

fn random_step(rng: &mut ChaCha8Rng, dim: usize, pot: &ScalarPotential) -> (StepOperator, DualVector) {
    let b = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let h = &b * b.transpose() + Matrix::identity(dim, dim) * 0.3;
    let k0 = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let k = &k0 * k0.transpose();
    let v = &h + &k;
    let mut trace = Matrix::zeros(1, dim);
    trace[(0, dim - 1)] = 1.0;
    let space = GalerkinSpace::new(h, v, trace, Matrix::identity(1, 1)).unwrap();
    let boundary = BoundaryFunctional::new(pot.clone(), vec![rng.random_range(0.5..1.5)]).unwrap();
    let c = if rng.random_bool(0.5) { 1.0 } else { 2.0 / 3.0 };
    let tau = rng.random_range(0.01..1.0);
    let op = StepOperator::from_parts(&space, &k, &boundary, c, tau).unwrap();
    let rhs = DualVector::new(Vector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0)));
    (op, rhs)
}

fn all_potentials() -> Vec<ScalarPotential> {
    vec![
        ScalarPotential::paper_exponential(1.0).unwrap(),
        ScalarPotential::linear_robin(1.0).unwrap(),
        ScalarPotential::nonconvex(NonconvexParams::default()).unwrap(),
    ]
}

#[test]
fn solver_roots_are_oracle_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let settings = SolverSettings::default();
    for pot in all_potentials() {
        for case in 0..60 {
            let dim = 1 + case % 2;
            let (op, rhs) = random_step(&mut rng, dim, &pot);
            let p = StepProblem { operator: &op, rhs: &rhs };
            let sol = solve_step_inclusion(&p, &Vector::zeros(dim), &settings).unwrap();
            let roots = scan_roots_schur(&p, 4000).unwrap();
            let near = roots.iter().any(|r| (&r.u - &sol.u).amax() <= 1e-7);
            assert!(near, "{pot:?} case {case}: solver {:?}, oracle {:?}", sol.u, roots);
            if dim == 1 {
                let scalar = scan_roots_1d(&p, -50.0, 50.0, 4000).unwrap();
                assert!(scalar.iter().any(|r| (r - sol.u[0]).abs() <= 1e-7));
            }
        }
    }
}

#[test]
fn energy_minimizer_matches_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for pot in [ScalarPotential::paper_exponential(1.0).unwrap(), ScalarPotential::linear_robin(2.0).unwrap()] {
        for case in 0..30 {
            let dim = 1 + case % 2;
            let (op, rhs) = random_step(&mut rng, dim, &pot);
            let p = StepProblem { operator: &op, rhs: &rhs };
            let sol = solve_step_inclusion(&p, &Vector::zeros(dim), &SolverSettings::default()).unwrap();
            let u = minimize_energy_convex(&p, 1e-10).unwrap();
            assert!((&u - &sol.u).amax() <= 1e-6, "{pot:?} case {case}: {u:?} vs {:?}", sol.u);
        }
    }
}

fn robin_problem(n_el: usize) -> RotheProblem {
    build_problem(
        Mesh1D::new(n_el).unwrap(),
        OperatorConstants::default(),
        ScalarPotential::linear_robin(1.0).unwrap(),
        ForcingSpec::constant(1.0, 0.0),
        &InitialValue::function(|_| 0.0),
        SolverSettings::default(),
    )
    .unwrap()
}

fn exponential_problem(n_el: usize) -> RotheProblem {
    build_problem(
        Mesh1D::new(n_el).unwrap(),
        OperatorConstants::default(),
        ScalarPotential::paper_exponential(1.0).unwrap(),
        ForcingSpec::constant(1.0, 0.0),
        &InitialValue::function(|_| 0.0),
        SolverSettings::default(),
    )
    .unwrap()
}

#[test]
fn reference_matches_exact_linear_propagation() {
    let p = robin_problem(16);
    let reference = reference_solution(&p, 1.0, 1.0 / 8192.0, Scheme::Bdf2).unwrap();
    let mut system = p.op.stiffness().clone();
    let n = system.nrows();
    system[(n - 1, n - 1)] += 1.0;
    let load = p.load.load(0.0);
    let exact = exact_linear_constant_load(p.space.gram_h(), &system, &load, &p.u0, 1.0).unwrap();
    let err = p.space.h_norm(&(reference.final_state() - exact)).unwrap();
    assert!(err < 1e-8, "error {err}");
}

#[test]
fn zero_data_reference_is_zero() {
    let p = build_problem(
        Mesh1D::new(8).unwrap(),
        OperatorConstants::default(),
        ScalarPotential::paper_exponential(1.0).unwrap(),
        ForcingSpec::zero(),
        &InitialValue::function(|_| 0.0),
        SolverSettings::default(),
    )
    .unwrap();
    let r = reference_solution(&p, 1.0, 1.0 / 64.0, Scheme::Bdf2).unwrap();
    assert!(r.u.iter().all(|u| u.amax() == 0.0));
    assert!(r.xi.iter().all(|x| x.amax() == 0.0));
}

#[test]
fn nonsmooth_fem_run_is_verified() {
    let p = exponential_problem(32);
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let traj = run_rothe(&p, &grid, Scheme::Bdf2).unwrap();
    assert!(traj.per_step_residuals.iter().all(|r| *r <= 1e-9));
    assert!(traj.membership_slacks.iter().all(|m| *m <= 1e-9));
    let recomputed = rothe_hvi::stepper::equation_residuals(&p, &traj).unwrap();
    assert!(recomputed.iter().all(|r| *r <= 1e-9), "{recomputed:?}");
    for (u, xi) in traj.u[1..].iter().zip(&traj.xi) {
        let s = u[u.len() - 1];
        assert!(p.boundary.potential.membership_slack(s, xi[0], 1e-9) <= 1e-9);
    }
    let again = run_rothe(&p, &grid, Scheme::Bdf2).unwrap();
    assert_eq!(traj, again);
    let rep = estimate_report(&traj, &p.space).unwrap();
    assert!(rep.gap_quadrature <= rep.gap_closed_form * (1.0 + 1e-8));
}

#[test]
fn coercivity_certificate_for_exponential_potential() {
    let p = exponential_problem(16);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<Vector> = (0..500)
        .map(|i| {
            let scale = 10f64.powi(i % 7 - 3);
            Vector::from_fn(17, |_, _| scale * rng.random_range(-1.0..1.0))
        })
        .collect();
    let rep = check_step_coercivity(&p.space, &p.op, &p.boundary, 0.01, &samples).unwrap();
    assert!(!rep.flagged(), "{rep:?}");
}

#[test]
fn first_increment_shrinks_linearly_on_smooth_problem() {
    let p = robin_problem(16);
    let taus = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let study = tau_ladder_study(&p, 1.0, &taus, Scheme::Bdf2).unwrap();
    let trend = study.trend("u1_u0_gap").unwrap();
    for r in &trend.ratios {
        assert!((r - 0.5).abs() < 0.05, "{:?}", trend.ratios);
    }
    let reference = reference_solution(&p, 1.0, 1.0 / 1024.0, Scheme::Bdf2).unwrap();
    let errs = final_time_errors(&p.space, &study, reference.final_state()).unwrap();
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn reference_is_self_consistent() {
    let p = exponential_problem(32);
    let a = reference_solution(&p, 1.0, 1.0 / 512.0, Scheme::Bdf2).unwrap();
    let b = reference_solution(&p, 1.0, 1.0 / 1024.0, Scheme::Bdf2).unwrap();
    let d = p.space.h_norm(&(a.final_state() - b.final_state())).unwrap();
    assert!(d <= 1e-6, "{d}");
}
