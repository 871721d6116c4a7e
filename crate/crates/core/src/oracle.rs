//! Brute-force references used to cross-check the solver: grid scans of the
//! scalar step residual, energy minimization for convex potentials, fine-step
//! reference trajectories and exact propagation of linear problems.

use crate::error::{Error, Result};
use crate::galerkin::{DualVector, Matrix, Vector};
use crate::inclusion::{SolverSettings, StepProblem};
use crate::potentials::{check_monotone, Interval, ScalarPotential};
use crate::stepper::{run_rothe, RotheProblem, RotheTrajectory, Scheme, TimeGrid};

const BISECTION_TOL: f64 = 1e-10;
const MIN_GRID: usize = 1000;

/// Set-valued scalar residual `lin·x + kappa·∂j(arg_scale·x) − offset`.
struct ScalarResidual<'a> {
    pot: &'a ScalarPotential,
    lin: f64,
    kappa: f64,
    arg_scale: f64,
    offset: f64,
}

impl ScalarResidual<'_> {
    fn eval(&self, x: f64) -> Interval {
        let z = self.pot.clarke_interval(self.arg_scale * x);
        let (a, b) = (self.kappa * z.lo, self.kappa * z.hi);
        let base = self.lin * x - self.offset;
        Interval { lo: base + a.min(b), hi: base + a.max(b) }
    }

    fn sign(&self, x: f64) -> i8 {
        let r = self.eval(x);
        if r.lo > 0.0 {
            1
        } else if r.hi < 0.0 {
            -1
        } else {
            0
        }
    }

    fn kink_preimages(&self) -> Vec<f64> {
        if self.arg_scale == 0.0 {
            return Vec::new();
        }
        self.pot.kinks().iter().map(|k| k / self.arg_scale).collect()
    }

    fn scan(&self, lo: f64, hi: f64, grid_n: usize) -> Result<Vec<f64>> {
        if grid_n < MIN_GRID {
            return Err(Error::InvalidInput(format!("grid_n must be at least {MIN_GRID}, got {grid_n}")));
        }
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!("empty scan range [{lo}, {hi}]")));
        }
        let mut xs: Vec<f64> = (0..=grid_n).map(|i| lo + (hi - lo) * i as f64 / grid_n as f64).collect();
        xs.extend(self.kink_preimages().into_iter().filter(|k| *k > lo && *k < hi));
        xs.sort_by(f64::total_cmp);
        xs.dedup();

        let mut roots: Vec<f64> = Vec::new();
        let signs: Vec<i8> = xs.iter().map(|&x| self.sign(x)).collect();
        for i in 0..xs.len() {
            if signs[i] == 0 {
                roots.push(xs[i]);
            }
            if i + 1 < xs.len() && signs[i] * signs[i + 1] == -1 {
                roots.push(self.bisect(xs[i], xs[i + 1], signs[i]));
            }
        }
        roots.dedup_by(|a, b| (*a - *b).abs() <= 10.0 * BISECTION_TOL);
        Ok(roots)
    }

    fn bisect(&self, mut a: f64, mut b: f64, sign_a: i8) -> f64 {
        while b - a > BISECTION_TOL * (1.0 + a.abs().max(b.abs())) {
            let m = 0.5 * (a + b);
            match self.sign(m) {
                0 => return m,
                s if s == sign_a => a = m,
                _ => b = m,
            }
        }
        0.5 * (a + b)
    }
}

/// All roots `u` of `(m + cτk) u + cτ t w ∂j(t u) ∋ b` on `[lo, hi]` for a
/// one-dimensional step problem with trace `t`.
pub fn scan_roots_1d(p: &StepProblem<'_>, lo: f64, hi: f64, grid_n: usize) -> Result<Vec<f64>> {
    let op = p.operator;
    if op.space().dim() != 1 || op.space().dim_u() != 1 {
        return Err(Error::InvalidInput("scan_roots_1d needs a one-dimensional problem".into()));
    }
    let t = op.trace()[(0, 0)];
    let res = ScalarResidual {
        pot: op.potential(),
        lin: op.system_matrix()[(0, 0)],
        kappa: op.c_coef() * op.tau() * t * op.weights()[0],
        arg_scale: t,
        offset: p.rhs.coeffs[0],
    };
    res.scan(lo, hi, grid_n)
}

/// A root of the step inclusion recovered from its boundary value.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRoot {
    pub s: f64,
    pub u: Vector,
    pub xi: f64,
}

/// Boundary reduction for a problem with one boundary unknown:
/// `s + cτ P w ∂j(s) ∋ β` with `P = ι S⁻¹ ιᵀ`, `β = ι S⁻¹ b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurReduction {
    pub p: f64,
    pub beta: f64,
    pub kappa: f64,
}

pub fn schur_reduction(p: &StepProblem<'_>) -> Result<SchurReduction> {
    let op = p.operator;
    if op.space().dim_u() != 1 {
        return Err(Error::InvalidInput("boundary reduction needs exactly one boundary unknown".into()));
    }
    let chol = op
        .system_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization("step matrix is not positive definite".into()))?;
    let row = op.trace().row(0).transpose();
    let z = chol.solve(&row);
    let pp = row.dot(&z);
    let beta = z.dot(&p.rhs.coeffs);
    Ok(SchurReduction { p: pp, beta, kappa: op.c_coef() * op.tau() * pp * op.weights()[0] })
}

/// A symmetric range that contains every boundary root of the reduction.
pub fn schur_scan_range(red: &SchurReduction, pot: &ScalarPotential) -> f64 {
    // |s − β| = κ|ζ| and |ζ| ≤ d_j (1 + |s|); the second term covers κ d_j ≥ 1
    // heuristically through the linear tails of the built-in potentials.
    let kd = red.kappa * pot.d_j();
    if kd < 0.5 {
        (red.beta.abs() + kd) / (1.0 - kd) + 1.0
    } else {
        4.0 * (red.beta.abs() + kd + 10.0)
    }
}

/// Every root of a step problem with one boundary unknown and any `dim`,
/// by scanning the boundary reduction.
pub fn scan_roots_schur(p: &StepProblem<'_>, grid_n: usize) -> Result<Vec<OracleRoot>> {
    let op = p.operator;
    let red = schur_reduction(p)?;
    let pot = op.potential();
    if red.kappa == 0.0 {
        let u = op.system_matrix().clone().cholesky().expect("checked above").solve(&p.rhs.coeffs);
        return Ok(vec![OracleRoot { s: red.beta, u, xi: pot.clarke_interval(red.beta).lo }]);
    }
    let r = schur_scan_range(&red, pot);
    let res = ScalarResidual { pot, lin: 1.0, kappa: red.kappa, arg_scale: 1.0, offset: red.beta };
    let chol = op.system_matrix().clone().cholesky().expect("checked above");
    let ss = res.scan(-r, r, grid_n)?;
    Ok(ss
        .into_iter()
        .map(|s| {
            let xi = (red.beta - s) / red.kappa;
            let load = op.trace().transpose() * Vector::from_element(1, xi * op.weights()[0])
                * (op.c_coef() * op.tau());
            let u = chol.solve(&(&p.rhs.coeffs - load));
            OracleRoot { s, u, xi }
        })
        .collect())
}

/// Minimizer of `E(u) = ½uᵀSu + cτ Σ wᵢ j((ιu)ᵢ) − bᵀu` by cyclic
/// coordinate golden-section sweeps. Needs a monotone `∂j` and trace rows
/// that select distinct coordinates.
pub fn minimize_energy_convex(p: &StepProblem<'_>, tol: f64) -> Result<Vector> {
    let op = p.operator;
    let pot = op.potential();
    let mut samples: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.05).collect();
    for k in pot.kinks() {
        samples.extend([k - 1e-6, *k, k + 1e-6]);
    }
    let mono = check_monotone(pot, &samples);
    if !mono.monotone {
        return Err(Error::Precondition(format!(
            "potential is not convex (∂j decreases near s = {:?})",
            mono.first_violation
        )));
    }
    let n = op.space().dim();
    let trace = op.trace();
    let mut owner: Vec<Option<(usize, f64)>> = vec![None; n];
    for i in 0..trace.nrows() {
        let nz: Vec<usize> = (0..n).filter(|&j| trace[(i, j)] != 0.0).collect();
        if nz.len() != 1 || owner[nz[0]].is_some() {
            return Err(Error::Precondition("trace rows must select distinct coordinates".into()));
        }
        owner[nz[0]] = Some((i, trace[(i, nz[0])]));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }

    let s_mat = op.system_matrix();
    let b = &p.rhs.coeffs;
    let scale = op.c_coef() * op.tau();
    let mut u = s_mat.clone().cholesky().expect("step matrix is SPD").solve(b);
    let energy = |u: &Vector| -> f64 {
        let s = trace * u;
        let jv: f64 = s.iter().zip(op.weights().iter()).map(|(&si, &w)| w * pot.value(si)).sum();
        0.5 * u.dot(&(s_mat * u)) + scale * jv - b.dot(u)
    };
    let mut e_prev = energy(&u);
    for _sweep in 0..2000 {
        let mut max_change: f64 = 0.0;
        for k in 0..n {
            let skk = s_mat[(k, k)];
            let r = s_mat.row(k).transpose().dot(&u) - skk * u[k] - b[k];
            let phi = |x: f64| {
                let bnd = owner[k].map_or(0.0, |(i, t)| scale * op.weights()[i] * pot.value(t * x));
                0.5 * skk * x * x + r * x + bnd
            };
            let x_star = -r / skk;
            let x = golden_minimize(&phi, x_star, tol);
            max_change = max_change.max((x - u[k]).abs());
            u[k] = x;
        }
        let e = energy(&u);
        if max_change <= tol * (1.0 + u.amax()) || e >= e_prev {
            break;
        }
        e_prev = e;
    }
    Ok(u)
}

/// Golden-section search for a convex `phi`, expanding the bracket around
/// `center` until the minimizer is interior.
fn golden_minimize(phi: &impl Fn(f64) -> f64, center: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut radius = 1.0 + center.abs();
    loop {
        let (mut a, mut b) = (center - radius, center + radius);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, mut fd) = (phi(c), phi(d));
        while (b - a) > tol * 1e-2 * (1.0 + c.abs()) {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = phi(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = phi(d);
            }
            if b - a < 4.0 * f64::EPSILON * (1.0 + a.abs().max(b.abs())) {
                break;
            }
        }
        let x = 0.5 * (a + b);
        let edge = 1e-6 * radius;
        if (x - (center - radius)).abs() > edge && (center + radius - x).abs() > edge || radius > 1e12 {
            return x;
        }
        radius *= 8.0;
    }
}

/// Fine-step reference: the scheme at `tau_fine` with solver tolerance 1e-12.
pub fn reference_solution(problem: &RotheProblem, t_final: f64, tau_fine: f64, scheme: Scheme) -> Result<RotheTrajectory> {
    let grid = TimeGrid::from_tau(t_final, tau_fine)?;
    let mut tight = problem.clone();
    tight.settings = SolverSettings { tol: 1e-12, ..problem.settings };
    run_rothe(&tight, &grid, scheme)
}

/// Exact solution at time `t` of `M u' + L u = F` with constant `F`, by the
/// generalized eigendecomposition `L v = λ M v`.
pub fn exact_linear_constant_load(mass: &Matrix, system: &Matrix, load: &DualVector, u0: &Vector, t: f64) -> Result<Vector> {
    let chol = mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Factorization("singular Cholesky factor".into()))?;
    // C = L⁻¹ L_sys L⁻ᵀ is symmetric with the same spectrum.
    let c = &l_inv * system * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    // w = Lᵀ u satisfies w' + C w = L⁻¹ F.
    let g = &l_inv * &load.coeffs;
    let w0 = l.transpose() * u0;
    let q = &eig.eigenvectors;
    let g_hat = q.transpose() * g;
    let w0_hat = q.transpose() * w0;
    let mut w_hat = Vector::zeros(u0.len());
    for i in 0..u0.len() {
        let lam = eig.eigenvalues[i];
        w_hat[i] = if lam.abs() < 1e-14 {
            w0_hat[i] + g_hat[i] * t
        } else {
            let e = (-lam * t).exp();
            w0_hat[i] * e + g_hat[i] * (1.0 - e) / lam
        };
    }
    let w = q * w_hat;
    Ok(l_inv.transpose() * w)
}
