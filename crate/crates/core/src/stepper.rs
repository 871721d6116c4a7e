//! The double-step Rothe scheme and a backward-Euler baseline.
//!
//! Step 1 solves `(u¹ − u⁰)/τ + A u¹ + ι*ξ¹ = f¹_τ` and steps `n ≥ 2` solve
//! `(3/2 uⁿ − 2uⁿ⁻¹ + 1/2 uⁿ⁻²)/τ + A uⁿ + ι*ξⁿ = fⁿ_τ` with `ξⁿ ∈ ∂J(ι uⁿ)`,
//! where `f¹_τ` is the mean of `f` over the first window and
//! `fⁿ_τ = 3/2·mean_n − 1/2·mean_{n−1}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::galerkin::{DualVector, GalerkinSpace, LinearOperatorA, Vector};
use crate::inclusion::{SolverSettings, StepOperator, StepSolution};
use crate::potentials::BoundaryFunctional;
use crate::quadrature::GaussRule;

/// A time-dependent right-hand side `f(t) ∈ V*`.
pub trait LoadSource: Send + Sync {
    fn dim(&self) -> usize;
    fn load(&self, t: f64) -> DualVector;
}

/// [`LoadSource`] from a closure.
pub struct FnLoad<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64) -> DualVector + Send + Sync> FnLoad<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64) -> DualVector + Send + Sync> LoadSource for FnLoad<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn load(&self, t: f64) -> DualVector {
        (self.f)(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidInput(format!("final time must be positive, got {t_final}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidInput("need at least one time step".into()));
        }
        Ok(Self { t_final, n_steps })
    }

    /// Grid with step `tau`, which must divide `t_final`.
    pub fn from_tau(t_final: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
        }
        let n = (t_final / tau).round();
        if n < 1.0 || ((t_final / n) - tau).abs() > 4.0 * f64::EPSILON * tau {
            return Err(Error::InvalidInput(format!("tau = {tau} does not divide T = {t_final}")));
        }
        Self::new(t_final, n as usize)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    /// `t_n = n τ`, exact at `n = N`.
    pub fn time(&self, n: usize) -> f64 {
        self.t_final * n as f64 / self.n_steps as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Bdf2,
    BackwardEuler,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Bdf2 => "bdf2",
            Scheme::BackwardEuler => "backward_euler",
        })
    }
}

/// How the backward-Euler baseline samples the forcing in step `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EulerForcing {
    /// `f(t_n)`.
    #[default]
    PointValue,
    /// `(1/τ) ∫_{t_{n−1}}^{t_n} f`.
    WindowAverage,
}

/// `(1/τ) ∫_{(k−1)τ}^{kτ} f(t) dt` by 5-point Gauss, `k ≥ 1`.
pub fn window_average(source: &dyn LoadSource, grid: &TimeGrid, k: usize) -> DualVector {
    let (a, b) = (grid.time(k - 1), grid.time(k));
    let mut acc = Vector::zeros(source.dim());
    for (t, w) in GaussRule::Five.points(a, b) {
        acc += source.load(t).coeffs * w;
    }
    DualVector::new(acc / grid.tau())
}

/// The averaged forcing `fⁿ_τ` of the two-step scheme.
pub fn average_forcing(source: &dyn LoadSource, n: usize, grid: &TimeGrid) -> Result<DualVector> {
    if n == 0 || n > grid.n_steps() {
        return Err(Error::InvalidInput(format!("step index {n} outside 1..={}", grid.n_steps())));
    }
    let cur = window_average(source, grid, n);
    if n == 1 {
        return Ok(cur);
    }
    let prev = window_average(source, grid, n - 1);
    Ok(DualVector::new(cur.coeffs * 1.5 - prev.coeffs * 0.5))
}

/// Everything needed to run the scheme on one problem instance.
#[derive(Clone)]
pub struct RotheProblem {
    pub space: GalerkinSpace,
    pub op: LinearOperatorA,
    pub boundary: BoundaryFunctional,
    pub load: Arc<dyn LoadSource>,
    pub u0: Vector,
    pub settings: SolverSettings,
    pub euler_forcing: EulerForcing,
}

impl fmt::Debug for RotheProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RotheProblem")
            .field("dim", &self.space.dim())
            .field("boundary", &self.boundary)
            .field("settings", &self.settings)
            .field("euler_forcing", &self.euler_forcing)
            .finish_non_exhaustive()
    }
}

impl RotheProblem {
    pub fn validate(&self) -> Result<()> {
        check_len(self.space.dim(), self.op.dim())?;
        check_len(self.space.dim(), self.u0.len())?;
        check_len(self.space.dim(), self.load.dim())?;
        check_len(self.space.dim_u(), self.boundary.weights().len())?;
        self.settings.validate()
    }

    pub fn step_operator(&self, c_coef: f64, tau: f64) -> Result<StepOperator> {
        StepOperator::new(&self.space, &self.op, &self.boundary, c_coef, tau)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotheTrajectory {
    pub grid: TimeGrid,
    pub scheme: Scheme,
    /// `u⁰ … u^N`.
    pub u: Vec<Vector>,
    /// `ξ¹ … ξ^N`.
    pub xi: Vec<Vector>,
    /// Right-hand sides used in steps `1 … N`.
    pub f_avg: Vec<DualVector>,
    /// `V*` norm of the step equation residual, per step.
    pub per_step_residuals: Vec<f64>,
    /// Largest Clarke membership slack reported by the solver, per step.
    pub membership_slacks: Vec<f64>,
    pub newton_iterations: usize,
}

impl RotheTrajectory {
    pub fn final_state(&self) -> &Vector {
        self.u.last().expect("trajectory holds u⁰")
    }
}

fn step_settings(base: &SolverSettings, op: &StepOperator) -> SolverSettings {
    // The step residual carries a factor cτ relative to the evolution equation.
    SolverSettings { tol: base.tol * op.c_coef() * op.tau(), ..*base }
}

/// First step: `M u¹ + τ K u¹ + τ ιᵀWξ¹ = τ f¹ + M u⁰`. `op` must have `c = 1`.
pub fn initial_step(
    op: &StepOperator,
    u0: &Vector,
    f1: &DualVector,
    settings: &SolverSettings,
) -> Result<StepSolution> {
    euler_type_step(op, u0, f1, u0, settings)
}

fn euler_type_step(
    op: &StepOperator,
    u_prev: &Vector,
    f: &DualVector,
    warm: &Vector,
    settings: &SolverSettings,
) -> Result<StepSolution> {
    if (op.c_coef() - 1.0).abs() > 1e-14 {
        return Err(Error::InvalidInput("Euler-type step needs c = 1".into()));
    }
    let space = op.space();
    let rhs = DualVector::new(&f.coeffs * op.tau() + space.embed_h(u_prev)?.coeffs);
    op.solve(&rhs, warm, &step_settings(settings, op))
}

/// BDF2 step: `M uⁿ + 2/3 τ (K uⁿ + ιᵀWξⁿ) = 2/3 τ fⁿ + M (4/3 uⁿ⁻¹ − 1/3 uⁿ⁻²)`.
/// `op` must have `c = 2/3`.
pub fn bdf2_step(
    op: &StepOperator,
    u_nm1: &Vector,
    u_nm2: &Vector,
    f_n: &DualVector,
    settings: &SolverSettings,
) -> Result<StepSolution> {
    if (op.c_coef() - 2.0 / 3.0).abs() > 1e-14 {
        return Err(Error::InvalidInput("BDF2 step needs c = 2/3".into()));
    }
    let space = op.space();
    let history = u_nm1 * (4.0 / 3.0) - u_nm2 * (1.0 / 3.0);
    let rhs = DualVector::new(&f_n.coeffs * (2.0 / 3.0 * op.tau()) + space.embed_h(&history)?.coeffs);
    let warm = u_nm1 * 2.0 - u_nm2;
    op.solve(&rhs, &warm, &step_settings(settings, op))
}

pub fn run_rothe(problem: &RotheProblem, grid: &TimeGrid, scheme: Scheme) -> Result<RotheTrajectory> {
    problem.validate()?;
    if scheme == Scheme::Bdf2 && grid.n_steps() < 2 {
        return Err(Error::InvalidInput("BDF2 needs at least two steps".into()));
    }
    let tau = grid.tau();
    let n = grid.n_steps();
    let euler = problem.step_operator(1.0, tau)?;
    let bdf = match scheme {
        Scheme::Bdf2 => Some(problem.step_operator(2.0 / 3.0, tau)?),
        Scheme::BackwardEuler => None,
    };
    let load = problem.load.as_ref();

    let mut traj = RotheTrajectory {
        grid: *grid,
        scheme,
        u: Vec::with_capacity(n + 1),
        xi: Vec::with_capacity(n),
        f_avg: Vec::with_capacity(n),
        per_step_residuals: Vec::with_capacity(n),
        membership_slacks: Vec::with_capacity(n),
        newton_iterations: 0,
    };
    traj.u.push(problem.u0.clone());

    let mut prev_window = None;
    for step in 1..=n {
        let window = window_average(load, grid, step);
        let (f, sol, c) = match (scheme, &bdf) {
            (Scheme::Bdf2, Some(op2)) if step >= 2 => {
                let prev: DualVector = prev_window.take().expect("window of the previous step");
                let f = DualVector::new(&window.coeffs * 1.5 - prev.coeffs * 0.5);
                let sol = bdf2_step(op2, &traj.u[step - 1], &traj.u[step - 2], &f, &problem.settings);
                (f, sol, 2.0 / 3.0)
            }
            (Scheme::Bdf2, _) => {
                let sol = initial_step(&euler, &traj.u[0], &window, &problem.settings);
                (window.clone(), sol, 1.0)
            }
            (Scheme::BackwardEuler, _) => {
                let f = match problem.euler_forcing {
                    EulerForcing::PointValue => load.load(grid.time(step)),
                    EulerForcing::WindowAverage => window.clone(),
                };
                let warm = if step >= 2 {
                    &traj.u[step - 1] * 2.0 - &traj.u[step - 2]
                } else {
                    traj.u[0].clone()
                };
                let sol = euler_type_step(&euler, &traj.u[step - 1], &f, &warm, &problem.settings);
                (f, sol, 1.0)
            }
        };
        let sol = sol.map_err(|e| Error::StepFailure { step, source: Box::new(e) })?;
        traj.per_step_residuals.push(sol.report.last_residual() / (c * tau));
        traj.membership_slacks.push(sol.report.membership_slack);
        traj.newton_iterations += sol.report.iterations;
        traj.u.push(sol.u);
        traj.xi.push(sol.xi);
        traj.f_avg.push(f);
        prev_window = Some(window);
    }
    Ok(traj)
}

/// Residual of the evolution form `D_τ uⁿ + A uⁿ + ι*ξⁿ − fⁿ` in `V*`, where
/// `D_τ` is the scheme's difference quotient, recomputed from the stored
/// trajectory.
pub fn equation_residuals(problem: &RotheProblem, traj: &RotheTrajectory) -> Result<Vec<f64>> {
    let tau = traj.grid.tau();
    let space = &problem.space;
    let w = Vector::from_column_slice(problem.boundary.weights());
    let mut out = Vec::with_capacity(traj.xi.len());
    for n in 1..traj.u.len() {
        let diff = match traj.scheme {
            Scheme::Bdf2 if n >= 2 => &traj.u[n] * 1.5 - &traj.u[n - 1] * 2.0 + &traj.u[n - 2] * 0.5,
            _ => &traj.u[n] - &traj.u[n - 1],
        };
        let r = space.embed_h(&diff)?.coeffs / tau
            + problem.op.apply(&traj.u[n])?.coeffs
            + space.trace().transpose() * traj.xi[n - 1].component_mul(&w)
            - &traj.f_avg[n - 1].coeffs;
        out.push(space.dual_norm(&DualVector::new(r))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityFit {
    /// Step coefficient `c` (1 for the first step, 2/3 for BDF2 steps).
    pub c_coef: f64,
    /// Largest `c₁` with `⟨T v, v⟩ ≥ c₁ cτ ‖v‖² − c₂` on every sample.
    pub c1: f64,
    pub c2: f64,
    pub min_pairing: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    pub tau: f64,
    pub first_step: CoercivityFit,
    pub bdf2_step: CoercivityFit,
}

impl CoercivityReport {
    pub fn flagged(&self) -> bool {
        self.first_step.flagged || self.bdf2_step.flagged
    }
}

/// `⟨T v, v⟩ = |v|² + cτ⟨Av, v⟩ + cτ Σ wᵢ ζᵢ (ιv)ᵢ` with the Clarke selection
/// `ζᵢ` minimizing each boundary product.
pub fn worst_case_pairing(
    space: &GalerkinSpace,
    op: &LinearOperatorA,
    boundary: &BoundaryFunctional,
    c_coef: f64,
    tau: f64,
    v: &Vector,
) -> Result<f64> {
    let s = space.apply_trace(v)?;
    let pot = &boundary.potential;
    let boundary_term: f64 = s
        .iter()
        .zip(boundary.weights())
        .map(|(&si, &w)| {
            let iv = pot.clarke_interval(si);
            w * (iv.lo * si).min(iv.hi * si)
        })
        .sum();
    Ok(space.h_norm(v)?.powi(2) + c_coef * tau * (op.pairing(v)? + boundary_term))
}

pub fn check_step_coercivity(
    space: &GalerkinSpace,
    op: &LinearOperatorA,
    boundary: &BoundaryFunctional,
    tau: f64,
    samples: &[Vector],
) -> Result<CoercivityReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty sample list".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    let d = boundary.lifted_growth_constant();
    let c2 = 0.5 * d * d;
    let fit = |c_coef: f64| -> Result<CoercivityFit> {
        let mut c1 = f64::INFINITY;
        let mut min_pairing = f64::INFINITY;
        for v in samples {
            let pairing = worst_case_pairing(space, op, boundary, c_coef, tau, v)?;
            min_pairing = min_pairing.min(pairing);
            let vn2 = space.v_norm(v)?.powi(2);
            if vn2 > 0.0 {
                c1 = c1.min((pairing + c2) / (c_coef * tau * vn2));
            }
        }
        Ok(CoercivityFit { c_coef, c1, c2, min_pairing, flagged: !(c1 > 0.0) })
    };
    Ok(CoercivityReport { tau, first_step: fit(1.0)?, bdf2_step: fit(2.0 / 3.0)? })
}
