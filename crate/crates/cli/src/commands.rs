//! The four subcommands. Each returns a [`Summary`]; the caller writes it.

use std::path::{Path, PathBuf};

use rothe_hvi::diagnostics::{estimate_report, final_time_errors, fit_observed_order, tau_ladder_study, EstimateReport, LadderStudy};
use rothe_hvi::fem1d::Mesh1D;
use rothe_hvi::galerkin::check_hypotheses_a;
use rothe_hvi::oracle::reference_solution;
use rothe_hvi::potentials::{check_growth, NonconvexParams};
use rothe_hvi::stepper::check_step_coercivity;
use rothe_hvi::{run_rothe, RotheProblem, RotheTrajectory, ScalarPotential, Scheme, TimeGrid, Vector};

use crate::checks::{identity_fuzz, sample_scalars, sample_vectors};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{num, write_series, write_text, CsvOut, Summary};

/// Verification threshold for residuals and Clarke membership.
pub const VERIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Context {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Context {
    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn nodes(cfg: &ExperimentConfig) -> Result<Vec<f64>, CliError> {
    let mesh = Mesh1D::new(cfg.problem.n_el)?;
    Ok((0..mesh.n_nodes()).map(|i| mesh.node(i)).collect())
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(0.0, f64::max)
}

fn verify_rows(summary: &mut Summary, cmd: &str, label: &str, residual: f64, membership: f64, tol: f64) {
    let bound = VERIFY_TOL.max(10.0 * tol);
    summary.push(cmd, format!("{label}max_residual"), residual <= bound, residual, format!("bound {bound:e}"));
    summary.push(cmd, format!("{label}max_membership_slack"), membership <= VERIFY_TOL, membership, format!("bound {VERIFY_TOL:e}"));
}

/// Single trajectory at the finest configured step.
pub fn cmd_run(cfg: &ExperimentConfig, ctx: &Context) -> Result<Summary, CliError> {
    let problem = cfg.build_problem()?;
    let tau = *cfg.scheme.taus.last().expect("validated non-empty");
    let grid = TimeGrid::from_tau(cfg.problem.t_final, tau)?;
    let scheme = cfg.scheme();
    ctx.note(&format!("run: {scheme}, tau = {tau}, {} steps", grid.n_steps()));
    let traj = run_rothe(&problem, &grid, scheme)?;
    write_trajectory(&ctx.out_dir, problem.space.dim(), &traj)?;
    let report = estimate_report(&traj, &problem.space)?;
    write_estimates(&ctx.out_dir, &report)?;

    let mut s = Summary::default();
    s.push("run", "steps", true, grid.n_steps() as f64, format!("{scheme} tau {tau}"));
    verify_rows(&mut s, "run", "", max_of(&traj.per_step_residuals), max_of(&traj.membership_slacks), cfg.solver.tol);
    Ok(s)
}

/// One row per step: `step, t, u_0 … u_N, xi_0 …, residual, membership_slack`.
/// Row 0 holds `u⁰` with `NaN` in the step-only columns.
fn write_trajectory(dir: &Path, n_nodes: usize, traj: &RotheTrajectory) -> Result<(), CliError> {
    let n_xi = traj.xi.first().map_or(1, |x| x.len());
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((0..n_nodes).map(|i| format!("u_{i}")));
    header.extend((0..n_xi).map(|i| format!("xi_{i}")));
    header.extend(["residual".to_string(), "membership_slack".to_string()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = CsvOut::create(dir, "trajectory.csv", &header)?;
    for (n, u) in traj.u.iter().enumerate() {
        let mut rec = vec![n.to_string(), num(traj.grid.time(n))];
        rec.extend(u.iter().map(|v| num(*v)));
        if n == 0 {
            rec.extend((0..n_xi + 2).map(|_| num(f64::NAN)));
        } else {
            rec.extend(traj.xi[n - 1].iter().map(|v| num(*v)));
            rec.extend([num(traj.per_step_residuals[n - 1]), num(traj.membership_slacks[n - 1])]);
        }
        out.row(rec)?;
    }
    out.finish()?;
    Ok(())
}

fn write_estimates(dir: &Path, report: &EstimateReport) -> Result<(), CliError> {
    let mut out = CsvOut::create(dir, "estimates.csv", &["quantity", "value"])?;
    out.row(["tau".to_string(), num(report.tau)])?;
    for (name, v) in EstimateReport::FIELDS.iter().zip(report.values()) {
        out.row([name.to_string(), num(v)])?;
    }
    out.finish()?;
    Ok(())
}

/// Errors at `t = T` and the least-squares order for one ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderTable {
    pub taus: Vec<f64>,
    pub errors: Vec<f64>,
    pub fitted: f64,
}

impl OrderTable {
    pub fn new(problem: &RotheProblem, study: &LadderStudy, reference: &Vector) -> Result<Self, CliError> {
        let taus = study.taus();
        let errors = final_time_errors(&problem.space, study, reference)?;
        let fitted = fit_observed_order(&taus, &errors).unwrap_or(f64::NAN);
        Ok(Self { taus, errors, fitted })
    }

    /// A defined fit, or every error exactly zero.
    pub fn ok(&self) -> bool {
        self.fitted.is_finite() || self.errors.iter().all(|e| *e == 0.0)
    }

    pub fn detail(&self) -> &'static str {
        if self.errors.iter().all(|e| *e == 0.0) {
            "all errors vanish"
        } else {
            ""
        }
    }

    pub fn pairwise(&self) -> Vec<f64> {
        let mut out = vec![f64::NAN];
        for i in 1..self.taus.len() {
            out.push((self.errors[i - 1] / self.errors[i]).ln() / (self.taus[i - 1] / self.taus[i]).ln());
        }
        out
    }
}

fn reference_final(problem: &RotheProblem, cfg: &ExperimentConfig, scheme: Scheme) -> Result<Vector, CliError> {
    let r = reference_solution(problem, cfg.problem.t_final, cfg.reference_tau(), scheme)?;
    Ok(r.final_state().clone())
}

/// τ-ladder with estimate quantities, errors against the fine BDF2
/// reference and the fitted order.
pub fn cmd_study(cfg: &ExperimentConfig, ctx: &Context) -> Result<Summary, CliError> {
    let problem = cfg.build_problem()?;
    let scheme = cfg.scheme();
    ctx.note(&format!("study: {scheme}, {} ladder steps, reference tau {}", cfg.scheme.taus.len(), cfg.reference_tau()));
    let (study, reference) = rayon::join(
        || tau_ladder_study(&problem, cfg.problem.t_final, &cfg.scheme.taus, scheme),
        || reference_final(&problem, cfg, Scheme::Bdf2),
    );
    let (study, reference) = (study?, reference?);
    let order = OrderTable::new(&problem, &study, &reference)?;
    let dir = &ctx.out_dir;

    let mut header = vec!["tau", "n_steps"];
    header.extend(EstimateReport::FIELDS);
    header.extend(["max_residual", "max_membership_slack", "error_h"]);
    let mut out = CsvOut::create(dir, "ladder.csv", &header)?;
    for (row, err) in study.rows.iter().zip(&order.errors) {
        let mut rec = vec![num(row.tau), row.n_steps.to_string()];
        rec.extend(row.report.values().iter().map(|v| num(*v)));
        rec.extend([num(row.max_residual), num(row.max_membership_slack), num(*err)]);
        out.row(rec)?;
    }
    out.finish()?;

    let mut out = CsvOut::create(dir, "trends.csv", &["quantity", "max_over_min", "max_ratio"])?;
    for t in study.trends() {
        out.row([t.name.clone(), num(t.max_over_min), num(t.ratios.iter().cloned().fold(f64::NAN, f64::max))])?;
    }
    out.finish()?;

    write_order(dir, "order.csv", &[(scheme, "bdf2", &order)])?;
    write_plots(dir, &[(scheme, &order)], &study)?;

    let mut s = Summary::default();
    let label = format!("{scheme}_");
    let res = study.rows.iter().map(|r| r.max_residual).fold(0.0, f64::max);
    let mem = study.rows.iter().map(|r| r.max_membership_slack).fold(0.0, f64::max);
    verify_rows(&mut s, "study", &label, res, mem, cfg.solver.tol);
    s.push("study", format!("{scheme}_fitted_order"), order.ok(), order.fitted, order.detail());
    Ok(s)
}

fn write_order(dir: &Path, name: &str, tables: &[(Scheme, &str, &OrderTable)]) -> Result<(), CliError> {
    let mut out = CsvOut::create(dir, name, &["scheme", "reference", "tau", "error_h", "pairwise_order", "fitted_order"])?;
    for (scheme, reference, t) in tables {
        for ((tau, e), p) in t.taus.iter().zip(&t.errors).zip(t.pairwise()) {
            out.row([scheme.to_string(), reference.to_string(), num(*tau), num(*e), num(p), num(t.fitted)])?;
        }
    }
    out.finish()?;
    Ok(())
}

fn write_plots(dir: &Path, orders: &[(Scheme, &OrderTable)], study: &LadderStudy) -> Result<(), CliError> {
    let mut script = String::from("set logscale xy\nset xlabel 'tau'\nset key left top\n");
    let mut plots = Vec::new();
    for (scheme, t) in orders {
        let name = format!("error_{scheme}.dat");
        let rows: Vec<(f64, f64)> = t.taus.iter().cloned().zip(t.errors.iter().cloned()).collect();
        write_series(dir, &name, ["tau", "error_h"], &rows)?;
        plots.push(format!("'{name}' using 1:2 with linespoints title '{scheme}'"));
    }
    for q in ["gap_quadrature", "u1_u0_gap"] {
        if let Some(trend) = study.trend(q) {
            let name = format!("{q}.dat");
            let rows: Vec<(f64, f64)> = study.taus().into_iter().zip(trend.values).collect();
            write_series(dir, &name, ["tau", q], &rows)?;
            plots.push(format!("'{name}' using 1:2 with linespoints title '{q}'"));
        }
    }
    script.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    write_text(dir, "plot.gp", &script)?;
    Ok(())
}

/// BDF2 and backward Euler on the same ladder, each measured against the
/// BDF2 and the backward-Euler fine references.
pub fn cmd_compare(cfg: &ExperimentConfig, ctx: &Context) -> Result<Summary, CliError> {
    let problem = cfg.build_problem()?;
    let t_final = cfg.problem.t_final;
    let taus = &cfg.scheme.taus;
    ctx.note(&format!("compare: {} ladder steps, reference tau {}", taus.len(), cfg.reference_tau()));
    let ((bdf2, be), (ref_bdf2, ref_be)) = rayon::join(
        || {
            rayon::join(
                || tau_ladder_study(&problem, t_final, taus, Scheme::Bdf2),
                || tau_ladder_study(&problem, t_final, taus, Scheme::BackwardEuler),
            )
        },
        || {
            rayon::join(
                || reference_final(&problem, cfg, Scheme::Bdf2),
                || reference_final(&problem, cfg, Scheme::BackwardEuler),
            )
        },
    );
    let (bdf2, be, ref_bdf2, ref_be) = (bdf2?, be?, ref_bdf2?, ref_be?);
    let tables = [
        (Scheme::Bdf2, "bdf2", OrderTable::new(&problem, &bdf2, &ref_bdf2)?),
        (Scheme::BackwardEuler, "bdf2", OrderTable::new(&problem, &be, &ref_bdf2)?),
        (Scheme::Bdf2, "backward_euler", OrderTable::new(&problem, &bdf2, &ref_be)?),
        (Scheme::BackwardEuler, "backward_euler", OrderTable::new(&problem, &be, &ref_be)?),
    ];
    let dir = &ctx.out_dir;

    let mut out = CsvOut::create(dir, "compare.csv", &["tau", "error_bdf2", "error_backward_euler", "order_bdf2", "order_backward_euler"])?;
    let (pb, pe) = (tables[0].2.pairwise(), tables[1].2.pairwise());
    for i in 0..taus.len() {
        out.row([num(taus[i]), num(tables[0].2.errors[i]), num(tables[1].2.errors[i]), num(pb[i]), num(pe[i])])?;
    }
    out.finish()?;
    let refs: Vec<(Scheme, &str, &OrderTable)> = tables.iter().map(|(s, r, t)| (*s, *r, t)).collect();
    write_order(dir, "compare_orders.csv", &refs)?;
    write_plots(dir, &[(Scheme::Bdf2, &tables[0].2), (Scheme::BackwardEuler, &tables[1].2)], &bdf2)?;

    let mut s = Summary::default();
    for study in [&bdf2, &be] {
        let res = study.rows.iter().map(|r| r.max_residual).fold(0.0, f64::max);
        let mem = study.rows.iter().map(|r| r.max_membership_slack).fold(0.0, f64::max);
        verify_rows(&mut s, "compare", &format!("{}_", study.scheme), res, mem, cfg.solver.tol);
    }
    for (scheme, reference, t) in &tables {
        s.push("compare", format!("{scheme}_fitted_order_vs_{reference}"), t.ok(), t.fitted, t.detail());
    }
    Ok(s)
}

/// Hypothesis checks: operator bounds, growth of `∂j`, step coercivity and
/// the two-step identities. Any violation yields a FAIL row.
pub fn cmd_check(cfg: &ExperimentConfig, ctx: &Context) -> Result<Summary, CliError> {
    let problem = cfg.build_problem()?;
    let seed = ctx.seed.unwrap_or(cfg.check.seed);
    let n = cfg.check.samples;
    ctx.note(&format!("check: seed {seed}, {n} samples"));
    let vectors = sample_vectors(seed, &nodes(cfg)?, n);
    let mut s = Summary::default();

    let hyp = check_hypotheses_a(&problem.space, &problem.op, &vectors)?;
    let c = problem.op.constants;
    s.push(
        "check",
        "operator_growth",
        hyp.growth_violations.is_empty(),
        hyp.growth_worst_slack,
        format!("a={} b={} violations={}", c.a_growth, c.b_growth, hyp.growth_violations.len()),
    );
    s.push(
        "check",
        "operator_coercivity",
        hyp.coercivity_violations.is_empty(),
        hyp.coercivity_worst_slack,
        format!("alpha={} beta={} violations={}", c.alpha, c.beta, hyp.coercivity_violations.len()),
    );

    let scalars = sample_scalars(seed, n);
    let measure = problem.boundary.measure();
    let potentials = [
        ("configured", problem.boundary.potential.clone()),
        ("paper_exponential_d1", ScalarPotential::paper_exponential(1.0)?),
        ("linear_robin_k1", ScalarPotential::linear_robin(1.0)?),
        ("nonconvex_default", ScalarPotential::nonconvex(NonconvexParams::default())?),
    ];
    for (name, pot) in &potentials {
        let rep = check_growth(pot, &scalars, measure)?;
        s.push("check", format!("growth_{name}"), rep.passed(), rep.worst_slack, format!("violations={}", rep.violations.len()));
    }

    for &tau in &cfg.check.coercivity_taus {
        let rep = check_step_coercivity(&problem.space, &problem.op, &problem.boundary, tau, &vectors)?;
        for (label, fit) in [("first", rep.first_step), ("bdf2", rep.bdf2_step)] {
            s.push(
                "check",
                format!("coercivity_{label}_tau_{tau}"),
                !fit.flagged,
                fit.c1,
                format!("c2={} min_pairing={:e}", fit.c2, fit.min_pairing),
            );
        }
    }

    let fuzz = identity_fuzz(seed, cfg.check.identity_triples)?;
    s.push(
        "check",
        "identity_gap",
        fuzz.worst_gap <= crate::checks::IDENTITY_REL_TOL,
        fuzz.worst_gap,
        format!("triples={}", fuzz.triples),
    );
    s.push(
        "check",
        "inequality_slack",
        fuzz.worst_slack >= -crate::checks::IDENTITY_REL_TOL,
        fuzz.worst_slack,
        format!("triples={}", fuzz.triples),
    );
    Ok(s)
}
