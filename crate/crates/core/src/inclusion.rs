//! Per-step inclusion `M u + cτ K u + cτ ιᵀ W ∂j(ι u) ∋ b`.
//!
//! The solver regularizes `∂j` with [`ScalarPotential::regularized_selection`]
//! and runs damped Newton with Armijo backtracking on the `V*` norm of the
//! residual, shrinking the regularization width by a factor of four per
//! level. As soon as an iterate has no boundary node inside a ramp zone it
//! solves the unregularized inclusion and the continuation stops. Nodes that
//! stick to a kink are finished by an active-set Newton iteration on the
//! boundary Schur complement, which pins them to the kink and recovers the
//! multiplier inside the Clarke interval.

use nalgebra::{Cholesky, Dyn};

use crate::error::{check_len, Error, Result};
use crate::galerkin::{DualVector, GalerkinSpace, LinearOperatorA, Matrix, Vector};
use crate::potentials::{BoundaryFunctional, ScalarPotential};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Target for the `V*` norm of the step residual. Values below
    /// `1e-14 · ‖b‖_{V*}` are raised to that floor.
    pub tol: f64,
    pub eps0: f64,
    pub eps_min: f64,
    /// Newton iterations per regularization level.
    pub max_iter: usize,
    pub armijo_slope: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            eps0: 1e-2,
            eps_min: 1e-10,
            max_iter: 100,
            armijo_slope: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 40,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.eps0 > 0.0 && self.eps_min > 0.0 && self.eps_min <= self.eps0) {
            return Err(Error::InvalidInput(format!("invalid solver settings {self:?}")));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub regularization_eps_final: f64,
    pub membership_slack: f64,
    /// Whether the active-set finish pinned nodes to a kink.
    pub polished: bool,
}

impl SolveReport {
    pub fn last_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub u: Vector,
    pub xi: Vector,
    pub report: SolveReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    pub residual: f64,
    pub membership_slack: f64,
    pub membership_ok: bool,
}

/// The step operator `v ↦ M v + cτ K v + cτ ιᵀ W ∂j(ι v)` at fixed `τ`.
///
/// `c = 1` realizes the first (implicit Euler) step and `c = 2/3` the BDF2
/// steps. The factorization of `S = M + cτK` and the boundary Schur data
/// `ιS⁻¹ιᵀ` are computed once.
#[derive(Debug, Clone)]
pub struct StepOperator {
    space: GalerkinSpace,
    trace: Matrix,
    weights: Vector,
    potential: ScalarPotential,
    c_coef: f64,
    tau: f64,
    system: Matrix,
    chol: Cholesky<f64, Dyn>,
    /// `S⁻¹ ιᵀ`
    z: Matrix,
    /// `ι S⁻¹ ιᵀ`
    schur: Matrix,
}

fn is_step_coef(c: f64) -> bool {
    (c - 1.0).abs() < 1e-14 || (c - 2.0 / 3.0).abs() < 1e-14
}

impl StepOperator {
    pub fn new(
        space: &GalerkinSpace,
        op: &LinearOperatorA,
        boundary: &BoundaryFunctional,
        c_coef: f64,
        tau: f64,
    ) -> Result<Self> {
        Self::from_parts(space, op.stiffness(), boundary, c_coef, tau)
    }

    pub fn from_parts(
        space: &GalerkinSpace,
        stiffness: &Matrix,
        boundary: &BoundaryFunctional,
        c_coef: f64,
        tau: f64,
    ) -> Result<Self> {
        if !is_step_coef(c_coef) {
            return Err(Error::InvalidInput(format!("step coefficient must be 1 or 2/3, got {c_coef}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
        }
        check_len(space.dim(), stiffness.nrows())?;
        check_len(space.dim_u(), boundary.weights().len())?;
        let system = space.gram_h() + stiffness * (c_coef * tau);
        let chol = Cholesky::new(system.clone())
            .ok_or_else(|| Error::Factorization("M + cτK is not positive definite".into()))?;
        let trace = space.trace().clone();
        let z = chol.solve(&trace.transpose());
        let schur = &trace * &z;
        Ok(Self {
            space: space.clone(),
            trace,
            weights: Vector::from_column_slice(boundary.weights()),
            potential: boundary.potential.clone(),
            c_coef,
            tau,
            system,
            chol,
            z,
            schur,
        })
    }

    pub fn space(&self) -> &GalerkinSpace {
        &self.space
    }

    pub fn potential(&self) -> &ScalarPotential {
        &self.potential
    }

    pub fn c_coef(&self) -> f64 {
        self.c_coef
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    /// `M + cτK`.
    pub fn system_matrix(&self) -> &Matrix {
        &self.system
    }

    pub fn trace(&self) -> &Matrix {
        &self.trace
    }

    fn scale(&self) -> f64 {
        self.c_coef * self.tau
    }

    /// `cτ ιᵀ W ξ`.
    fn boundary_load(&self, xi: &Vector) -> Vector {
        self.trace.transpose() * xi.component_mul(&self.weights) * self.scale()
    }

    /// `M u + cτ K u + cτ ιᵀ W ξ − b`.
    pub fn residual(&self, u: &Vector, xi: &Vector, rhs: &DualVector) -> Result<DualVector> {
        check_len(self.space.dim(), u.len())?;
        check_len(self.space.dim(), rhs.len())?;
        check_len(self.weights.len(), xi.len())?;
        Ok(DualVector::new(&self.system * u + self.boundary_load(xi) - &rhs.coeffs))
    }

    pub fn verify(&self, u: &Vector, xi: &Vector, rhs: &DualVector, tol: f64) -> Result<Verification> {
        let residual = self.space.dual_norm(&self.residual(u, xi, rhs)?)?;
        let s = &self.trace * u;
        let membership_slack = s
            .iter()
            .zip(xi.iter())
            .map(|(&s, &x)| self.potential.membership_slack(s, x, tol))
            .fold(0.0, f64::max);
        Ok(Verification { residual, membership_slack, membership_ok: membership_slack <= tol })
    }

    fn regularized(&self, s: &Vector, eps: f64) -> Result<(Vector, Vector)> {
        let mut val = Vector::zeros(s.len());
        let mut der = Vector::zeros(s.len());
        for (i, &si) in s.iter().enumerate() {
            let r = self.potential.regularized_selection(si, eps)?;
            val[i] = r.value;
            der[i] = r.derivative;
        }
        Ok((val, der))
    }

    /// Solves `(S + ιᵀ D ι) x = y` for diagonal `D` by the Woodbury identity.
    fn solve_jacobian(&self, diag: &Vector, y: &Vector) -> Result<Vector> {
        let base = self.chol.solve(y);
        if diag.iter().all(|&d| d == 0.0) {
            return Ok(base);
        }
        let m = diag.len();
        let mut small = Matrix::identity(m, m);
        for i in 0..m {
            for j in 0..m {
                small[(i, j)] += diag[i] * self.schur[(i, j)];
            }
        }
        let q = (&self.trace * &base).component_mul(diag);
        let corr = small
            .lu()
            .solve(&q)
            .ok_or_else(|| Error::NumericalFailure("singular Newton matrix".into()))?;
        Ok(base - &self.z * corr)
    }

    fn newton_at_eps(
        &self,
        rhs: &DualVector,
        mut u: Vector,
        eps: f64,
        tol: f64,
        settings: &SolverSettings,
        report: &mut SolveReport,
    ) -> Result<NewtonOutcome> {
        let eval = |u: &Vector| -> Result<(Vector, Vector, f64)> {
            let s = &self.trace * u;
            let (val, der) = self.regularized(&s, eps)?;
            let f = &self.system * u + self.boundary_load(&val) - &rhs.coeffs;
            let norm = self.space.dual_norm(&DualVector::new(f.clone()))?;
            Ok((f, der, norm))
        };
        let (mut f, mut der, mut norm) = eval(&u)?;
        for _ in 0..settings.max_iter {
            if !norm.is_finite() {
                return Err(Error::NumericalFailure("non-finite residual".into()));
            }
            report.residual_history.push(norm);
            if norm <= tol {
                return Ok(NewtonOutcome::Converged(u));
            }
            report.iterations += 1;
            let diag = der.component_mul(&self.weights) * self.scale();
            let dir = -self.solve_jacobian(&diag, &f)?;
            if dir.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericalFailure("non-finite Newton direction".into()));
            }
            let merit = 0.5 * norm * norm;
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..=settings.max_backtracks {
                let trial = &u + &dir * step;
                let (tf, td, tn) = eval(&trial)?;
                if tn.is_finite() && 0.5 * tn * tn <= (1.0 - 2.0 * settings.armijo_slope * step) * merit {
                    accepted = Some((trial, tf, td, tn));
                    break;
                }
                step *= settings.backtrack_factor;
            }
            match accepted {
                Some((nu, nf, nd, nn)) => {
                    u = nu;
                    f = nf;
                    der = nd;
                    norm = nn;
                }
                None => return Ok(NewtonOutcome::Stalled(u)),
            }
        }
        report.residual_history.push(norm);
        if norm <= tol {
            Ok(NewtonOutcome::Converged(u))
        } else {
            Ok(NewtonOutcome::Stalled(u))
        }
    }

    /// Regularized solve at a single width `eps` (no continuation, no finish).
    pub fn solve_regularized(
        &self,
        rhs: &DualVector,
        warm_start: &Vector,
        eps: f64,
        settings: &SolverSettings,
    ) -> Result<(Vector, SolveReport)> {
        settings.validate()?;
        check_len(self.space.dim(), warm_start.len())?;
        check_len(self.space.dim(), rhs.len())?;
        let mut report = SolveReport { regularization_eps_final: eps, ..Default::default() };
        let outcome = self.newton_at_eps(rhs, warm_start.clone(), eps, settings.tol, settings, &mut report)?;
        match self.rescue_stalled(rhs, outcome, eps, settings.tol, &mut report)? {
            NewtonOutcome::Converged(u) => Ok((u, report)),
            NewtonOutcome::Stalled(_) => Err(Error::NonConvergence { report: Box::new(report) }),
        }
    }

    /// Solves the step inclusion to `dual_norm(residual) ≤ settings.tol`.
    pub fn solve(&self, rhs: &DualVector, warm_start: &Vector, settings: &SolverSettings) -> Result<StepSolution> {
        settings.validate()?;
        check_len(self.space.dim(), warm_start.len())?;
        check_len(self.space.dim(), rhs.len())?;
        // Below a few ulps of the load the residual is round-off.
        let tol = settings.tol.max(ROUNDOFF_FLOOR * self.space.dual_norm(rhs)?);
        let mut report = SolveReport::default();
        let mut u = warm_start.clone();
        let mut eps = settings.eps0;
        loop {
            report.regularization_eps_final = eps;
            let outcome = self.newton_at_eps(rhs, u.clone(), eps, tol, settings, &mut report)?;
            let outcome = self.rescue_stalled(rhs, outcome, eps, tol, &mut report)?;
            let converged = matches!(outcome, NewtonOutcome::Converged(_));
            u = outcome.into_inner();
            let s = &self.trace * &u;
            let in_ramp = s.iter().any(|&si| self.potential.in_open_ramp(si, eps).is_some());
            if converged && !in_ramp {
                let (xi, _) = self.regularized(&s, eps)?;
                return self.finish(rhs, u, xi, report, false);
            }
            if let Some((pu, pxi)) = self.active_set_finish(rhs, &s, eps)? {
                let check = self.verify(&pu, &pxi, rhs, tol)?;
                if check.residual <= tol && check.membership_ok {
                    report.residual_history.push(check.residual);
                    return self.finish(rhs, pu, pxi, report, true);
                }
            }
            if eps <= settings.eps_min {
                if converged {
                    // Nodes remain inside a ramp narrower than eps_min; the
                    // regularized flux lies in ∂j over that ramp.
                    let (xi, _) = self.regularized(&s, eps)?;
                    return self.finish(rhs, u, xi, report, false);
                }
                return Err(Error::NonConvergence { report: Box::new(report) });
            }
            eps = (eps / 4.0).max(settings.eps_min);
        }
    }

    /// With a single boundary unknown the regularized equation reduces to
    /// `G(s) = s + κ r_eps(s) − β = 0`, `κ = cτ P w`, which a bracketed
    /// Newton–bisection iteration solves without line-search stagnation.
    fn rescue_stalled(
        &self,
        rhs: &DualVector,
        outcome: NewtonOutcome,
        eps: f64,
        tol: f64,
        report: &mut SolveReport,
    ) -> Result<NewtonOutcome> {
        let u = match outcome {
            NewtonOutcome::Stalled(u) if self.weights.len() == 1 => u,
            other => return Ok(other),
        };
        let beta = (&self.trace * self.chol.solve(&rhs.coeffs))[0];
        let kappa = self.scale() * self.schur[(0, 0)] * self.weights[0];
        let g = |s: f64| -> Result<(f64, f64)> {
            let r = self.potential.regularized_selection(s, eps)?;
            Ok((s + kappa * r.value - beta, 1.0 + kappa * r.derivative))
        };
        let s0 = (&self.trace * &u)[0];
        let (g0, _) = g(s0)?;
        let root = if g0 == 0.0 {
            s0
        } else {
            // G → ±∞ as s → ±∞, so a sign change lies on the side opposite to g0.
            let dir = -g0.signum();
            let mut h = 1e-3 * (1.0 + s0.abs());
            let mut inner = s0;
            let mut outer = s0 + dir * h;
            let mut expansions = 0;
            while g(outer)?.0.signum() == g0.signum() {
                inner = outer;
                h *= 2.0;
                outer = s0 + dir * h;
                expansions += 1;
                if expansions > 200 || !outer.is_finite() {
                    return Ok(NewtonOutcome::Stalled(u));
                }
            }
            let (mut lo, mut hi) = if dir > 0.0 { (inner, outer) } else { (outer, inner) };
            let g_lo_sign = g(lo)?.0.signum();
            let mut x = 0.5 * (lo + hi);
            for _ in 0..200 {
                let (gx, dgx) = g(x)?;
                if gx == 0.0 {
                    break;
                }
                if gx.signum() == g_lo_sign {
                    lo = x;
                } else {
                    hi = x;
                }
                if hi - lo <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
                    break;
                }
                let newton = x - gx / dgx;
                x = if dgx > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            }
            x
        };
        let flux = Vector::from_element(1, self.potential.regularized_selection(root, eps)?.value);
        let u_new = self.chol.solve(&(&rhs.coeffs - self.boundary_load(&flux)));
        let s_new = &self.trace * &u_new;
        let (val, _) = self.regularized(&s_new, eps)?;
        let resid = &self.system * &u_new + self.boundary_load(&val) - &rhs.coeffs;
        let norm = self.space.dual_norm(&DualVector::new(resid))?;
        report.iterations += 1;
        report.residual_history.push(norm);
        Ok(if norm <= tol { NewtonOutcome::Converged(u_new) } else { NewtonOutcome::Stalled(u) })
    }

    fn finish(
        &self,
        rhs: &DualVector,
        u: Vector,
        xi: Vector,
        mut report: SolveReport,
        polished: bool,
    ) -> Result<StepSolution> {
        let s = &self.trace * &u;
        let delta = if polished {
            s.iter().map(|v| 64.0 * f64::EPSILON * (1.0 + v.abs())).fold(0.0, f64::max)
        } else {
            report.regularization_eps_final.min(self.potential.effective_eps(report.regularization_eps_final))
        };
        // Only a ramp zone may need the argument inflation; elsewhere the
        // regularized flux is the exact Clarke element.
        report.membership_slack = s
            .iter()
            .zip(xi.iter())
            .map(|(&si, &x)| self.potential.membership_slack(si, x, delta))
            .fold(0.0, f64::max);
        report.polished = polished;
        if let Some(r) = report.residual_history.last_mut() {
            *r = self.space.dual_norm(&self.residual(&u, &xi, rhs)?)?;
        }
        Ok(StepSolution { u, xi, report })
    }

    /// Active-set Newton on the boundary reduction
    /// `s + cτ P W ξ = β`, `β = ι S⁻¹ b`, `P = ι S⁻¹ ιᵀ`,
    /// starting from the boundary values `s`.
    fn active_set_finish(&self, rhs: &DualVector, s0: &Vector, eps: f64) -> Result<Option<(Vector, Vector)>> {
        let m = s0.len();
        if m == 0 || self.potential.kinks().is_empty() {
            return Ok(None);
        }
        let pot = &self.potential;
        let beta = &self.trace * self.chol.solve(&rhs.coeffs);
        let scale = self.scale();

        // Mode per node: Some(kink index) when pinned, None when on a branch.
        let mut pinned: Vec<Option<usize>> = s0
            .iter()
            .map(|&si| {
                (0..pot.kinks().len()).filter(|&k| pot.has_ramp(k)).find(|&k| {
                    let (a, b) = pot.ramp_zone(k, eps);
                    a <= si && si <= b
                })
            })
            .collect();
        let mut s = s0.clone();
        let mut xi = Vector::zeros(m);

        for _round in 0..(4 + 2 * m) {
            // Branch index for free nodes is frozen during the inner Newton.
            let pieces: Vec<usize> = s
                .iter()
                .map(|&si| pot.piece_of(si))
                .collect();
            for (i, p) in pinned.iter().enumerate() {
                if let Some(k) = p {
                    s[i] = pot.kinks()[*k];
                }
            }
            let mut converged = false;
            for _ in 0..60 {
                let mut dxi = Vector::zeros(m);
                for i in 0..m {
                    if pinned[i].is_none() {
                        let (g, dg) = pot.branch(pieces[i], s[i]);
                        xi[i] = g;
                        dxi[i] = dg;
                    }
                }
                let wxi = xi.component_mul(&self.weights);
                let resid = &s + &self.schur * &wxi * scale - &beta;
                let rnorm = resid.amax();
                if !rnorm.is_finite() {
                    return Ok(None);
                }
                if rnorm <= 1e-15 * (1.0 + beta.amax() + s.amax()) {
                    converged = true;
                    break;
                }
                let mut jac = Matrix::zeros(m, m);
                for j in 0..m {
                    let col_scale = scale * self.weights[j];
                    for i in 0..m {
                        let pij = self.schur[(i, j)] * col_scale;
                        jac[(i, j)] = if pinned[j].is_some() { pij } else { pij * dxi[j] };
                    }
                    if pinned[j].is_none() {
                        jac[(j, j)] += 1.0;
                    }
                }
                let Some(step) = jac.lu().solve(&(-resid)) else {
                    return Ok(None);
                };
                for j in 0..m {
                    if pinned[j].is_some() {
                        xi[j] += step[j];
                    } else {
                        s[j] += step[j];
                    }
                }
                if step.amax() <= 1e-16 * (1.0 + s.amax() + xi.amax()) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Ok(None);
            }
            // Adjust the active set.
            let mut changed = false;
            for i in 0..m {
                match pinned[i] {
                    Some(k) => {
                        let kink = pot.kink(k);
                        let jump = kink.jump();
                        let tol = 1e-12 * (1.0 + jump.hi.abs());
                        if xi[i] > jump.hi + tol || xi[i] < jump.lo - tol {
                            // Leave the kink towards the side whose branch
                            // continues the multiplier.
                            let to_right = (xi[i] > jump.hi) == kink.rises();
                            let w = pot.effective_eps(eps).max(1e-9);
                            s[i] = if to_right { kink.at + w } else { kink.at - w };
                            pinned[i] = None;
                            changed = true;
                        } else {
                            xi[i] = jump.project(xi[i]);
                        }
                    }
                    None => {
                        let p = pieces[i];
                        let lo = if p == 0 { f64::NEG_INFINITY } else { pot.kinks()[p - 1] };
                        let hi = pot.kinks().get(p).copied().unwrap_or(f64::INFINITY);
                        if s[i] < lo {
                            pinned[i] = Some(p - 1);
                            changed = true;
                        } else if s[i] > hi {
                            pinned[i] = Some(p);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                let u = self.chol.solve(&(&rhs.coeffs - self.boundary_load(&xi)));
                return Ok(Some((u, xi)));
            }
        }
        Ok(None)
    }
}

const ROUNDOFF_FLOOR: f64 = 1e-14;

enum NewtonOutcome {
    Converged(Vector),
    Stalled(Vector),
}

impl NewtonOutcome {
    fn into_inner(self) -> Vector {
        match self {
            NewtonOutcome::Converged(u) | NewtonOutcome::Stalled(u) => u,
        }
    }
}

/// A step operator paired with its right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct StepProblem<'a> {
    pub operator: &'a StepOperator,
    pub rhs: &'a DualVector,
}

pub fn solve_step_inclusion(
    p: &StepProblem<'_>,
    warm_start: &Vector,
    settings: &SolverSettings,
) -> Result<StepSolution> {
    p.operator.solve(p.rhs, warm_start, settings)
}

pub fn verify_inclusion(p: &StepProblem<'_>, u: &Vector, xi: &Vector, tol: f64) -> Result<Verification> {
    p.operator.verify(u, xi, p.rhs, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::NonconvexParams;
    use approx::assert_relative_eq;

    fn scalar_space() -> GalerkinSpace {
        let one = Matrix::from_element(1, 1, 1.0);
        GalerkinSpace::new(one.clone(), one.clone(), one.clone(), one).unwrap()
    }

    fn toy(pot: ScalarPotential, c: f64, tau: f64) -> StepOperator {
        let b = BoundaryFunctional::new(pot, vec![1.0]).unwrap();
        StepOperator::from_parts(&scalar_space(), &Matrix::from_element(1, 1, 1.0), &b, c, tau).unwrap()
    }

    fn rhs(x: f64) -> DualVector {
        DualVector::new(Vector::from_element(1, x))
    }

    #[test]
    fn smooth_case_is_one_linear_solve() {
        let op = toy(ScalarPotential::zero(), 1.0, 0.5);
        let sol = op.solve(&rhs(3.0), &Vector::zeros(1), &SolverSettings::default()).unwrap();
        assert_eq!(sol.report.iterations, 1);
        assert!(sol.report.last_residual() <= 1e-12);
        assert_relative_eq!(sol.u[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn exponential_toy_with_known_root() {
        // (1 + 1)·1 + 1·(e⁻¹ + 1) = 3 + e⁻¹
        let b = 3.0 + (-1f64).exp();
        let op = toy(ScalarPotential::paper_exponential(1.0).unwrap(), 1.0, 1.0);
        let sol = op.solve(&rhs(b), &Vector::zeros(1), &SolverSettings::default()).unwrap();
        assert_relative_eq!(sol.u[0], 1.0, epsilon = 1e-9);
        let v = op.verify(&sol.u, &sol.xi, &rhs(b), 1e-10).unwrap();
        assert!(v.residual <= 1e-10 && v.membership_ok);
    }

    #[test]
    fn exponential_toy_sticks_at_kink() {
        let op = toy(ScalarPotential::paper_exponential(1.0).unwrap(), 1.0, 1.0);
        let sol = op.solve(&rhs(0.0), &Vector::from_element(1, -5.0), &SolverSettings::default()).unwrap();
        assert!(sol.u[0].abs() <= 1e-12);
        assert!(sol.xi[0].abs() <= 1e-12);
        // b inside the sticking band (0, cτ·d]
        let sol = op.solve(&rhs(0.4), &Vector::from_element(1, 3.0), &SolverSettings::default()).unwrap();
        assert!(sol.u[0].abs() <= 1e-12);
        assert_relative_eq!(sol.xi[0], 0.4, epsilon = 1e-12);
        assert!(sol.report.polished);
    }

    #[test]
    fn verify_rejects_multiplier_outside_interval() {
        let op = toy(ScalarPotential::paper_exponential(1.0).unwrap(), 1.0, 1.0);
        let tol = 1e-10;
        let u = Vector::zeros(1);
        let xi = Vector::from_element(1, 1.0 + 2.0 * tol);
        let v = op.verify(&u, &xi, &rhs(1.0 + 2.0 * tol), tol).unwrap();
        assert!(v.residual <= 1e-15);
        assert!(!v.membership_ok);
    }

    #[test]
    fn hand_solution_residual_is_tiny() {
        let op = toy(ScalarPotential::paper_exponential(1.0).unwrap(), 1.0, 1.0);
        let b = 3.0 + (-1f64).exp();
        let v = op
            .verify(&Vector::from_element(1, 1.0), &Vector::from_element(1, (-1f64).exp() + 1.0), &rhs(b), 1e-12)
            .unwrap();
        assert!(v.residual <= 1e-12 && v.membership_ok);
    }

    #[test]
    fn rejects_bad_coefficients_and_settings() {
        let b = BoundaryFunctional::new(ScalarPotential::zero(), vec![1.0]).unwrap();
        let k = Matrix::from_element(1, 1, 1.0);
        assert!(StepOperator::from_parts(&scalar_space(), &k, &b, 0.5, 1.0).is_err());
        assert!(StepOperator::from_parts(&scalar_space(), &k, &b, 1.0, 0.0).is_err());
        let op = toy(ScalarPotential::zero(), 1.0, 1.0);
        let bad = SolverSettings { tol: 0.0, ..Default::default() };
        assert!(op.solve(&rhs(1.0), &Vector::zeros(1), &bad).is_err());
    }

    #[test]
    fn nonconvex_root_depends_on_warm_start() {
        // Roots of 2u + g(u) = 1 at u = 1/3, 1 and 11/6.
        let op = toy(ScalarPotential::nonconvex(NonconvexParams::default()).unwrap(), 1.0, 1.0);
        let settings = SolverSettings::default();
        let lo = op.solve(&rhs(1.0), &Vector::from_element(1, 0.0), &settings).unwrap();
        let hi = op.solve(&rhs(1.0), &Vector::from_element(1, 2.5), &settings).unwrap();
        assert_relative_eq!(lo.u[0], 1.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(hi.u[0], 11.0 / 6.0, epsilon = 1e-9);
    }
}
