//! Acceptance criteria 1–8. Each test prints one `criterion N: PASS|FAIL`
//! line to the real stdout (visible without `--nocapture`) and then asserts.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rothe_hvi::diagnostics::{final_time_errors, fit_observed_order, tau_ladder_study, LadderStudy};
use rothe_hvi::inclusion::{solve_step_inclusion, StepProblem};
use rothe_hvi::oracle::{minimize_energy_convex, reference_solution, scan_roots_1d, scan_roots_schur};
use rothe_hvi::potentials::NonconvexParams;
use rothe_hvi::stepper::FnLoad;
use rothe_hvi::{
    run_rothe, BoundaryFunctional, DualVector, EulerForcing, GalerkinSpace, LinearOperatorA, Matrix, OperatorConstants,
    RotheProblem, ScalarPotential, Scheme, SolverSettings, StepOperator, TimeGrid, Vector,
};
use rothe_hvi_cli::checks::identity_fuzz;
use rothe_hvi_cli::output::read_table;
use rothe_hvi_cli::ExperimentConfig;

fn report(n: u32, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n}: {status} {detail}");
    let _ = out.flush();
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs().join(name)).unwrap()
}

fn halvings(first: u32, count: u32) -> Vec<f64> {
    (0..count).map(|i| 1.0 / f64::from(first << i)).collect()
}

struct LadderRun {
    problem: RotheProblem,
    bdf2: LadderStudy,
    euler: Option<LadderStudy>,
    errors_bdf2: Vec<f64>,
    errors_euler: Vec<f64>,
    elapsed: Duration,
}

fn ladder_run(cfg: &ExperimentConfig, with_euler: bool) -> LadderRun {
    let start = Instant::now();
    let problem = cfg.build_problem().unwrap();
    let t = cfg.problem.t_final;
    let taus = &cfg.scheme.taus;
    let ((bdf2, euler), reference) = rayon::join(
        || {
            rayon::join(
                || tau_ladder_study(&problem, t, taus, Scheme::Bdf2).unwrap(),
                || with_euler.then(|| tau_ladder_study(&problem, t, taus, Scheme::BackwardEuler).unwrap()),
            )
        },
        || reference_solution(&problem, t, cfg.reference_tau(), Scheme::Bdf2).unwrap(),
    );
    let errors_bdf2 = final_time_errors(&problem.space, &bdf2, reference.final_state()).unwrap();
    let errors_euler = euler
        .as_ref()
        .map(|s| final_time_errors(&problem.space, s, reference.final_state()).unwrap())
        .unwrap_or_default();
    LadderRun { problem, bdf2, euler, errors_bdf2, errors_euler, elapsed: start.elapsed() }
}

/// Smooth problem: linear Robin law, n_el = 64, ladder T/{8..128}.
fn robin() -> &'static LadderRun {
    static RUN: OnceLock<LadderRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = load("heat_robin.toml");
        assert_eq!(cfg.problem.n_el, 64);
        assert_eq!(cfg.problem.t_final, 1.0);
        assert_eq!(cfg.scheme.taus, halvings(8, 5));
        assert_eq!(cfg.reference_tau(), 1.0 / 4096.0);
        ladder_run(&cfg, true)
    })
}

/// Nonsmooth problem: exponential potential d = 1, f₀ ≡ 1, f_N ≡ 0, u⁰ ≡ 0,
/// n_el = 64, ladder T/{16..256}.
fn exponential() -> &'static LadderRun {
    static RUN: OnceLock<LadderRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = load("heat_exponential.toml");
        assert_eq!(cfg.problem.n_el, 64);
        assert_eq!(cfg.scheme.taus, halvings(16, 5));
        assert_eq!(cfg.reference_tau(), 1.0 / 4096.0);
        ladder_run(&cfg, false)
    })
}

#[test]
fn criterion_1_algebraic_identities() {
    let start = Instant::now();
    let rep = identity_fuzz(20_240_601, 10_000).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = rep.passed() && rep.triples == 10_000 && secs < 5.0;
    report(
        1,
        pass,
        &format!(
            "triples={} worst gap/scale={:.2e} worst slack/scale={:.2e} violations={} runtime={secs:.2}s",
            rep.triples, rep.worst_gap, rep.worst_slack, rep.violations
        ),
    );
    assert!(pass);
}

fn free_problem(dim: usize, load: impl Fn(f64) -> DualVector + Send + Sync + 'static, u0: Vector) -> RotheProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-0.3..0.3));
    let mass = &b * b.transpose() + Matrix::identity(dim, dim);
    let gram_v = &mass + Matrix::identity(dim, dim);
    let mut trace = Matrix::zeros(1, dim);
    trace[(0, dim - 1)] = 1.0;
    let space = GalerkinSpace::new(mass, gram_v, trace, Matrix::identity(1, 1)).unwrap();
    RotheProblem {
        space,
        op: LinearOperatorA::new(Matrix::zeros(dim, dim), OperatorConstants::default()).unwrap(),
        boundary: BoundaryFunctional::new(ScalarPotential::zero(), vec![1.0]).unwrap(),
        load: Arc::new(FnLoad::new(dim, load)),
        u0,
        settings: SolverSettings::default(),
        euler_forcing: EulerForcing::PointValue,
    }
}

fn max_grid_error(traj: &rothe_hvi::RotheTrajectory, exact: impl Fn(f64) -> Vector) -> f64 {
    traj.u
        .iter()
        .enumerate()
        .map(|(n, u)| (u - exact(traj.grid.time(n))).amax())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_2_exactness() {
    let start = Instant::now();
    let dim = 4;
    let u0 = Vector::from_vec(vec![0.3, -1.0, 0.5, 2.0]);
    let c = Vector::from_vec(vec![1.0, -0.5, 2.0, 0.25]);
    let e = Vector::from_vec(vec![1.0, 0.5, -1.0, 0.75]);

    let linear = {
        let probe = free_problem(dim, |_| DualVector::zeros(4), u0.clone());
        let mc = probe.space.gram_h() * &c;
        let (u0, c) = (u0.clone(), c.clone());
        let p = free_problem(dim, move |_| DualVector::new(mc.clone()), u0.clone());
        (p, move |t: f64| &u0 + &c * t)
    };
    let quadratic = {
        let probe = free_problem(dim, |_| DualVector::zeros(4), u0.clone());
        let me = probe.space.gram_h() * &e;
        let (u0, e) = (u0.clone(), e.clone());
        let p = free_problem(dim, move |t| DualVector::new(&me * t), u0.clone());
        (p, move |t: f64| &u0 + &e * (t * t / 2.0))
    };

    let mut worst = [0.0f64; 4];
    for n in [2, 3, 7, 10, 64] {
        let grid = TimeGrid::new(1.0, n).unwrap();
        for (k, (p, exact)) in [(&linear.0, &linear.1 as &dyn Fn(f64) -> Vector), (&quadratic.0, &quadratic.1)]
            .into_iter()
            .enumerate()
        {
            let b = run_rothe(p, &grid, Scheme::Bdf2).unwrap();
            let be = run_rothe(p, &grid, Scheme::BackwardEuler).unwrap();
            worst[k] = worst[k].max(max_grid_error(&b, exact));
            let be_err = max_grid_error(&be, exact);
            // BE slot: largest error on the linear case, smallest on the quadratic one.
            if k == 0 {
                worst[2] = worst[2].max(be_err);
            } else {
                worst[3] = if worst[3] == 0.0 { be_err } else { worst[3].min(be_err) };
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst[0] <= 1e-12 && worst[1] <= 1e-12 && worst[2] <= 1e-12 && worst[3] > 1e-12 && secs < 1.0;
    report(
        2,
        pass,
        &format!(
            "bdf2 linear={:.1e} quadratic={:.1e}; backward euler linear={:.1e} quadratic(min over grids)={:.1e}; runtime={secs:.3}s",
            worst[0], worst[1], worst[2], worst[3]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_temporal_order() {
    let run = robin();
    let taus = run.bdf2.taus();
    let p2 = fit_observed_order(&taus, &run.errors_bdf2).unwrap();
    let p1 = fit_observed_order(&taus, &run.errors_euler).unwrap();
    let secs = run.elapsed.as_secs_f64();
    let pass = (1.8..=2.2).contains(&p2) && (0.8..=1.2).contains(&p1) && secs < 60.0;
    report(3, pass, &format!("bdf2 order={p2:.3} backward euler order={p1:.3} runtime={secs:.2}s"));
    assert!(run.euler.is_some());
    assert!(pass);
}

#[test]
fn criterion_4_nonsmooth_run() {
    let run = exponential();
    let res = run.bdf2.rows.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    let mem = run.bdf2.rows.iter().map(|r| r.max_membership_slack).fold(0.0, f64::max);
    let ratios: Vec<f64> = run.errors_bdf2.windows(2).map(|w| w[1] / w[0]).collect();

    // Independent membership recheck on the finest ladder run.
    let p = &run.problem;
    let grid = TimeGrid::from_tau(1.0, *run.bdf2.taus().last().unwrap()).unwrap();
    let traj = run_rothe(p, &grid, Scheme::Bdf2).unwrap();
    let recheck = traj.u[1..]
        .iter()
        .zip(&traj.xi)
        .map(|(u, xi)| p.boundary.potential.membership_slack(u[u.len() - 1], xi[0], 1e-9))
        .fold(0.0, f64::max);
    let recomputed = rothe_hvi::stepper::equation_residuals(p, &traj).unwrap().into_iter().fold(0.0, f64::max);

    let secs = run.elapsed.as_secs_f64();
    let pass = res <= 1e-9
        && mem <= 1e-9
        && recheck <= 1e-9
        && recomputed <= 1e-9
        && ratios.iter().all(|r| *r <= 0.75)
        && secs < 120.0;
    report(
        4,
        pass,
        &format!(
            "max residual={res:.1e} (recomputed {recomputed:.1e}) max membership slack={mem:.1e} (recheck {recheck:.1e}) error ratios={ratios:.3?} runtime={secs:.2}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_estimate_stability() {
    let run = exponential();
    let mut pass = true;
    let mut parts = Vec::new();
    for q in ["q3", "q4", "q5", "q6", "q7", "q75"] {
        let t = run.bdf2.trend(q).unwrap();
        let ok = t.max_over_min <= 2.0 && t.values.iter().all(|v| v.is_finite());
        pass &= ok;
        parts.push(format!("{q} max/min={:.3}{}", t.max_over_min, if ok { "" } else { " (over 2)" }));
    }
    let gap = run.bdf2.trend("gap_quadrature").unwrap();
    let gap_ok = gap.decreasing_with_ratio(0.75);
    pass &= gap_ok;
    parts.push(format!("gap_quadrature ratios={:.3?}", gap.ratios));
    report(5, pass, &parts.join("; "));
    assert!(pass, "estimate quantities not uniform across the ladder: {}", parts.join("; "));
}

#[test]
fn criterion_6_first_increment() {
    let r = robin().bdf2.trend("u1_u0_gap").unwrap();
    let e = exponential().bdf2.trend("u1_u0_gap").unwrap();
    let pass = r.decreasing_with_ratio(0.75) && e.decreasing_with_ratio(0.75);
    report(6, pass, &format!("robin ratios={:.3?} exponential ratios={:.3?}", r.ratios, e.ratios));
    assert!(pass);
}

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
    let rhs = DualVector::new(Vector::from_fn(dim, |_, _| rng.random_range(-4.0..4.0)));
    (op, rhs)
}

#[test]
fn criterion_7_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let settings = SolverSettings::default();
    let potentials = [
        ("paper_exponential", ScalarPotential::paper_exponential(1.0).unwrap()),
        ("linear_robin", ScalarPotential::linear_robin(1.0).unwrap()),
        ("nonconvex", ScalarPotential::nonconvex(NonconvexParams::default()).unwrap()),
        ("zero", ScalarPotential::zero()),
    ];
    let mut misses = Vec::new();
    let mut worst_root = 0.0f64;
    for (name, pot) in &potentials {
        for case in 0..200 {
            let dim = 1 + case % 2;
            let (op, rhs) = random_step(&mut rng, dim, pot);
            let p = StepProblem { operator: &op, rhs: &rhs };
            let sol = solve_step_inclusion(&p, &Vector::zeros(dim), &settings).unwrap();
            let roots = scan_roots_schur(&p, 4000).unwrap();
            let mut d = roots.iter().map(|r| (&r.u - &sol.u).amax()).fold(f64::INFINITY, f64::min);
            if dim == 1 {
                let scalar = scan_roots_1d(&p, -50.0, 50.0, 4000).unwrap();
                d = d.max(scalar.iter().map(|r| (r - sol.u[0]).abs()).fold(f64::INFINITY, f64::min));
            }
            worst_root = worst_root.max(d);
            if d > 1e-7 {
                misses.push(format!("{name}#{case}"));
            }
        }
    }
    let convex = [ScalarPotential::paper_exponential(1.0).unwrap(), ScalarPotential::linear_robin(2.0).unwrap()];
    let mut worst_energy = 0.0f64;
    for case in 0..100 {
        let pot = &convex[case % 2];
        let dim = 1 + (case / 2) % 2;
        let (op, rhs) = random_step(&mut rng, dim, pot);
        let p = StepProblem { operator: &op, rhs: &rhs };
        let sol = solve_step_inclusion(&p, &Vector::zeros(dim), &settings).unwrap();
        let u = minimize_energy_convex(&p, 1e-10).unwrap();
        worst_energy = worst_energy.max((&u - &sol.u).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = misses.is_empty() && worst_energy <= 1e-6 && secs < 30.0;
    report(
        7,
        pass,
        &format!(
            "800 inclusions, worst root distance={worst_root:.1e}, misses={misses:?}; 100 convex fixtures, worst minimizer distance={worst_energy:.1e}; runtime={secs:.2}s"
        ),
    );
    assert!(pass);
}

fn run_check(config: &Path, out: &Path) -> (bool, Vec<(String, String)>) {
    let status = Command::new(env!("CARGO_BIN_EXE_rothe-hvi"))
        .args(["check", "--quiet", "--out"])
        .arg(out)
        .arg(config)
        .stderr(Stdio::null())
        .status()
        .unwrap();
    let t = read_table(&out.join("summary.csv")).unwrap();
    let (item, st) = (t.column("item").unwrap(), t.column("status").unwrap());
    let rows = t.rows.iter().map(|r| (r[item].clone(), r[st].clone())).collect();
    (status.success(), rows)
}

#[test]
fn criterion_8_hypothesis_suite() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("heat_exponential.toml");
    assert_eq!(cfg.check.samples, 1000);
    assert!(cfg.check.coercivity_taus.iter().all(|t| *t <= 0.1));
    let (ok, rows) = run_check(&configs().join("heat_exponential.toml"), &dir.path().join("preset"));
    let failures: Vec<&String> = rows.iter().filter(|(_, s)| s != "PASS").map(|(i, _)| i).collect();
    let has = |prefix: &str| rows.iter().any(|(i, _)| i.starts_with(prefix));
    let covered = has("operator_coercivity") && has("growth_paper_exponential") && has("growth_linear_robin") && has("coercivity_");

    let (neg_ok, neg_rows) = run_check(&configs().join("alpha10.toml"), &dir.path().join("alpha10"));
    let violation = neg_rows.iter().any(|(i, s)| i == "operator_coercivity" && s == "FAIL");
    let secs = start.elapsed().as_secs_f64();
    let pass = ok && failures.is_empty() && covered && !neg_ok && violation && secs < 10.0;
    report(
        8,
        pass,
        &format!(
            "preset exit ok={ok} rows={} failures={failures:?}; alpha=10 exit ok={neg_ok} violation row={violation}; runtime={secs:.2}s",
            rows.len()
        ),
    );
    assert!(pass);
}
