//! A-priori estimate quantities, time interpolants and the algebraic
//! identities behind the stability argument of the two-step scheme.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::galerkin::{GalerkinSpace, Vector};
use crate::quadrature::GaussRule;
use crate::stepper::{run_rothe, RotheProblem, RotheTrajectory, Scheme, TimeGrid};

/// `|(3/2a − 2b + ½c, a)_H − ¼(|a|² + |2a−b|² − |b|² − |2b−c|² + |a−2b+c|²)|`.
pub fn bdf2_identity_gap(space: &GalerkinSpace, a: &Vector, b: &Vector, c: &Vector) -> Result<f64> {
    check_len(a.len(), b.len())?;
    check_len(a.len(), c.len())?;
    let n2 = |v: &Vector| space.h_inner(v, v);
    let lhs = space.h_inner(&(a * 1.5 - b * 2.0 + c * 0.5), a)?;
    let rhs = 0.25
        * (n2(a)? + n2(&(a * 2.0 - b))? - n2(b)? - n2(&(b * 2.0 - c))? + n2(&(a - b * 2.0 + c))?);
    Ok((lhs - rhs).abs())
}

/// `(3/2a − 2b + ½c, a − 2b + c)_H − ½|a−b|² + ½|b−c|²`, which expands to
/// `|a − 2b + c|²`.
pub fn bdf2_inequality_slack(space: &GalerkinSpace, a: &Vector, b: &Vector, c: &Vector) -> Result<f64> {
    check_len(a.len(), b.len())?;
    check_len(a.len(), c.len())?;
    let lhs = space.h_inner(&(a * 1.5 - b * 2.0 + c * 0.5), &(a - b * 2.0 + c))?;
    let ab = a - b;
    let bc = b - c;
    Ok(lhs - 0.5 * space.h_inner(&ab, &ab)? + 0.5 * space.h_inner(&bc, &bc)?)
}

/// Time reconstructions of a trajectory.
///
/// `ū_τ` is `uⁿ` on `((n−1)τ, nτ]` with `ū_τ(0) = u⁰`. `u_τ` is the
/// continuous piecewise-linear function through `3/2 uⁿ − ½uⁿ⁻¹` at `t = nτ`
/// (and `½(u¹ + u⁰)` at `t = 0`), whose slope is the difference quotient of
/// the two-step scheme.
#[derive(Debug, Clone)]
pub struct Interpolants {
    grid: TimeGrid,
    u: Vec<Vector>,
    xi: Vec<Vector>,
}

pub fn build_interpolants(traj: &RotheTrajectory) -> Result<Interpolants> {
    let n = traj.grid.n_steps();
    if traj.u.len() != n + 1 || traj.xi.len() != n {
        return Err(Error::InvalidInput(format!(
            "incomplete trajectory: {} states and {} multipliers for {n} steps",
            traj.u.len(),
            traj.xi.len()
        )));
    }
    Ok(Interpolants { grid: traj.grid, u: traj.u.clone(), xi: traj.xi.clone() })
}

impl Interpolants {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let t_final = self.grid.t_final();
        if !(t >= 0.0 && t <= t_final * (1.0 + 1e-14)) {
            return Err(Error::Domain { t, t_final });
        }
        Ok(())
    }

    /// Index `n ≥ 1` with `t ∈ ((n−1)τ, nτ]`; `t = 0` maps to 1.
    pub fn interval_of(&self, t: f64) -> Result<usize> {
        self.check_domain(t)?;
        let n = (t / self.grid.tau()).ceil() as usize;
        Ok(n.clamp(1, self.grid.n_steps()))
    }

    /// Increment of `u_τ` over interval `n`.
    pub fn increment(&self, n: usize) -> Vector {
        let u = &self.u;
        if n == 1 {
            &u[1] - &u[0]
        } else {
            &u[n] * 1.5 - &u[n - 1] * 2.0 + &u[n - 2] * 0.5
        }
    }

    /// Node value `3/2 uⁿ − ½ uⁿ⁻¹` of `u_τ` at `t = nτ`.
    fn node_value(&self, n: usize) -> Vector {
        &self.u[n] * 1.5 - &self.u[n - 1] * 0.5
    }

    /// The linear branch of interval `n` evaluated at any `t`, used to
    /// compare one-sided limits at the knots.
    pub fn branch(&self, n: usize, t: f64) -> Vector {
        let tau = self.grid.tau();
        self.node_value(n) + self.increment(n) * ((t - self.grid.time(n)) / tau)
    }

    pub fn piecewise_constant(&self, t: f64) -> Result<Vector> {
        if t == 0.0 {
            return Ok(self.u[0].clone());
        }
        Ok(self.u[self.interval_of(t)?].clone())
    }

    pub fn piecewise_constant_xi(&self, t: f64) -> Result<Vector> {
        Ok(self.xi[self.interval_of(t)? - 1].clone())
    }

    pub fn piecewise_linear(&self, t: f64) -> Result<Vector> {
        let n = self.interval_of(t)?;
        Ok(self.branch(n, t))
    }

    pub fn derivative(&self, t: f64) -> Result<Vector> {
        let n = self.interval_of(t)?;
        Ok(self.increment(n) / self.grid.tau())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimateReport {
    pub tau: f64,
    pub q3: f64,
    pub q4: f64,
    pub q5: f64,
    pub q6: f64,
    pub q7: f64,
    pub q75: f64,
    pub gap_closed_form: f64,
    pub gap_quadrature: f64,
    pub u1_u0_gap: f64,
    /// `τ Σ ‖(uⁱ − uⁱ⁻¹)/τ‖²_{V*}`.
    pub bv_bound: f64,
}

impl EstimateReport {
    pub const FIELDS: [&'static str; 10] = [
        "q3",
        "q4",
        "q5",
        "q6",
        "q7",
        "q75",
        "gap_closed_form",
        "gap_quadrature",
        "u1_u0_gap",
        "bv_bound",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.q3,
            self.q4,
            self.q5,
            self.q6,
            self.q7,
            self.q75,
            self.gap_closed_form,
            self.gap_quadrature,
            self.u1_u0_gap,
            self.bv_bound,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::FIELDS.iter().position(|f| *f == name).map(|i| self.values()[i])
    }
}

pub fn estimate_report(traj: &RotheTrajectory, space: &GalerkinSpace) -> Result<EstimateReport> {
    let interp = build_interpolants(traj)?;
    let tau = traj.grid.tau();
    let n = traj.grid.n_steps();
    let u = &traj.u;

    let mut q3 = 0.0;
    let mut q4: f64 = 0.0;
    for v in u {
        q3 += tau * space.v_norm(v)?.powi(2);
        q4 = q4.max(space.h_norm(v)?);
    }
    let mut q5 = 0.0;
    for xi in &traj.xi {
        q5 += tau * space.u_norm(xi)?.powi(2);
    }
    let first = &u[1] - &u[0];
    let first_dual = space.dual_norm_of_h(&first)?;
    let q6 = tau * (first_dual / tau).powi(2);
    let mut q7 = 0.0;
    let mut q75 = 0.0;
    let mut sum_inc = 0.0;
    let mut sum_second = 0.0;
    for k in 2..=n {
        q7 += tau * (space.dual_norm_of_h(&interp.increment(k))? / tau).powi(2);
        let second = &u[k] - &u[k - 1] * 2.0 + &u[k - 2];
        let s2 = space.h_norm(&second)?.powi(2);
        q75 += s2;
        sum_inc += space.dual_norm_of_h(&interp.increment(k))?.powi(2);
        sum_second += s2;
    }
    let gap_closed_form = tau * first_dual.powi(2) / 12.0
        + tau * sum_inc / 6.0
        + space.trace_norm() * tau * sum_second / 8.0;

    let mut gap_quadrature = 0.0;
    for k in 1..=n {
        let (a, b) = (traj.grid.time(k - 1), traj.grid.time(k));
        for (t, w) in GaussRule::Five.points(a, b) {
            let diff = interp.branch(k, t) - &u[k];
            gap_quadrature += w * space.dual_norm_of_h(&diff)?.powi(2);
        }
    }

    let mut bv_bound = 0.0;
    for k in 1..=n {
        bv_bound += tau * (space.dual_norm_of_h(&(&u[k] - &u[k - 1]))? / tau).powi(2);
    }

    Ok(EstimateReport {
        tau,
        q3,
        q4,
        q5,
        q6,
        q7,
        q75,
        gap_closed_form,
        gap_quadrature,
        u1_u0_gap: space.h_norm(&first)?,
        bv_bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub tau: f64,
    pub n_steps: usize,
    pub report: EstimateReport,
    pub final_state: Vector,
    pub max_residual: f64,
    pub max_membership_slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantityTrend {
    pub name: String,
    pub values: Vec<f64>,
    /// `max/min` over the ladder; 1 when every value is 0.
    pub max_over_min: f64,
    /// `value[i+1] / value[i]` along the ladder.
    pub ratios: Vec<f64>,
}

impl QuantityTrend {
    pub fn new(name: &str, values: Vec<f64>) -> Self {
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_over_min = if max == 0.0 { 1.0 } else { max / min };
        let ratios = values.windows(2).map(|w| w[1] / w[0]).collect();
        Self { name: name.to_string(), values, max_over_min, ratios }
    }

    /// Every successive ratio is `≤ bound`.
    pub fn decreasing_with_ratio(&self, bound: f64) -> bool {
        !self.ratios.is_empty() && self.ratios.iter().all(|r| *r <= bound)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderStudy {
    pub scheme: Scheme,
    pub rows: Vec<LadderRow>,
}

impl LadderStudy {
    pub fn trend(&self, name: &str) -> Option<QuantityTrend> {
        let values: Option<Vec<f64>> = self.rows.iter().map(|r| r.report.get(name)).collect();
        values.map(|v| QuantityTrend::new(name, v))
    }

    pub fn trends(&self) -> Vec<QuantityTrend> {
        EstimateReport::FIELDS.iter().filter_map(|f| self.trend(f)).collect()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.tau).collect()
    }
}

pub fn tau_ladder_study(problem: &RotheProblem, t_final: f64, taus: &[f64], scheme: Scheme) -> Result<LadderStudy> {
    if taus.is_empty() {
        return Err(Error::InvalidInput("empty tau ladder".into()));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("taus must be strictly decreasing".into()));
    }
    let grids = taus.iter().map(|&tau| TimeGrid::from_tau(t_final, tau)).collect::<Result<Vec<_>>>()?;
    let rows = grids
        .par_iter()
        .map(|grid| {
            let traj = run_rothe(problem, grid, scheme)?;
            let report = estimate_report(&traj, &problem.space)?;
            Ok(LadderRow {
                tau: grid.tau(),
                n_steps: grid.n_steps(),
                report,
                final_state: traj.final_state().clone(),
                max_residual: traj.per_step_residuals.iter().cloned().fold(0.0, f64::max),
                max_membership_slack: traj.membership_slacks.iter().cloned().fold(0.0, f64::max),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LadderStudy { scheme, rows })
}

/// `|u − u_ref|_H` for each final state.
pub fn final_time_errors(space: &GalerkinSpace, study: &LadderStudy, reference: &Vector) -> Result<Vec<f64>> {
    study.rows.iter().map(|r| space.h_norm(&(&r.final_state - reference))).collect()
}

/// Least-squares slope of `log e` against `log τ`.
pub fn fit_observed_order(taus: &[f64], errors: &[f64]) -> Result<f64> {
    check_len(taus.len(), errors.len())?;
    if taus.len() < 2 {
        return Err(Error::InvalidInput("order fit needs at least two points".into()));
    }
    if taus.iter().chain(errors).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("order fit needs positive finite taus and errors".into()));
    }
    let x: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
