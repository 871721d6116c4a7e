//! Finite-dimensional evolution triple `V ⊂ H ⊂ V*`.
//!
//! Elements of `V` and `H` are coefficient vectors in a common basis. Elements
//! of `V*` are stored by their action on the basis functions (assembled load
//! vectors), so the dual pairing is the plain dot product and the dual norm is
//! `sqrt(wᵀ G_V⁻¹ w)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{check_len, Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

const SYMMETRY_TOL: f64 = 1e-12;

/// A functional in `V*`, represented by its action on the basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    pub coeffs: Vector,
}

impl DualVector {
    pub fn new(coeffs: Vector) -> Self {
        Self { coeffs }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { coeffs: Vector::zeros(dim) }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `⟨self, v⟩`.
    pub fn pair(&self, v: &Vector) -> f64 {
        self.coeffs.dot(v)
    }
}

fn check_symmetric(name: &str, m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidInput(format!("{name} is not square")));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::InvalidInput(format!(
            "{name} is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    Ok(())
}

fn factor(name: &str, m: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    check_symmetric(name, m)?;
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::Factorization(format!("{name} is not positive definite")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub h_norm: f64,
    pub v_norm: f64,
    pub u_norm_of_trace: f64,
}

/// Discrete realization of `(V, H, V*)` together with the trace `ι: V → U`.
#[derive(Debug, Clone)]
pub struct GalerkinSpace {
    gram_h: Matrix,
    gram_v: Matrix,
    trace: Matrix,
    gram_u: Matrix,
    chol_h: Cholesky<f64, Dyn>,
    chol_v: Cholesky<f64, Dyn>,
}

impl GalerkinSpace {
    pub fn new(gram_h: Matrix, gram_v: Matrix, trace: Matrix, gram_u: Matrix) -> Result<Self> {
        let dim = gram_h.nrows();
        if dim == 0 {
            return Err(Error::InvalidInput("space dimension must be positive".into()));
        }
        check_len(dim, gram_v.nrows())?;
        check_len(dim, trace.ncols())?;
        check_len(trace.nrows(), gram_u.nrows())?;
        let chol_h = factor("gram_h", &gram_h)?;
        let chol_v = factor("gram_v", &gram_v)?;
        factor("gram_u", &gram_u)?;
        Ok(Self { gram_h, gram_v, trace, gram_u, chol_h, chol_v })
    }

    pub fn dim(&self) -> usize {
        self.gram_h.nrows()
    }

    /// Dimension of the boundary space `U`.
    pub fn dim_u(&self) -> usize {
        self.trace.nrows()
    }

    pub fn gram_h(&self) -> &Matrix {
        &self.gram_h
    }

    pub fn gram_v(&self) -> &Matrix {
        &self.gram_v
    }

    pub fn trace(&self) -> &Matrix {
        &self.trace
    }

    pub fn gram_u(&self) -> &Matrix {
        &self.gram_u
    }

    fn check_dim(&self, v: &Vector) -> Result<()> {
        check_len(self.dim(), v.len())
    }

    pub fn h_inner(&self, a: &Vector, b: &Vector) -> Result<f64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(a.dot(&(&self.gram_h * b)))
    }

    pub fn h_norm(&self, v: &Vector) -> Result<f64> {
        Ok(self.h_inner(v, v)?.max(0.0).sqrt())
    }

    pub fn v_norm(&self, v: &Vector) -> Result<f64> {
        self.check_dim(v)?;
        Ok(v.dot(&(&self.gram_v * v)).max(0.0).sqrt())
    }

    /// `‖ξ‖_U` for a boundary vector (also the `U*` norm under the Riesz map).
    pub fn u_norm(&self, xi: &Vector) -> Result<f64> {
        check_len(self.dim_u(), xi.len())?;
        Ok(xi.dot(&(&self.gram_u * xi)).max(0.0).sqrt())
    }

    pub fn norms(&self, v: &Vector) -> Result<Norms> {
        let h_norm = self.h_norm(v)?;
        let v_norm = self.v_norm(v)?;
        let u_norm_of_trace = self.u_norm(&self.apply_trace(v)?)?;
        Ok(Norms { h_norm, v_norm, u_norm_of_trace })
    }

    /// `sup_{v≠0} ⟨w, v⟩ / ‖v‖_V`, evaluated through a `G_V` solve.
    pub fn dual_norm(&self, w: &DualVector) -> Result<f64> {
        check_len(self.dim(), w.len())?;
        let z = self.chol_v.solve(&w.coeffs);
        Ok(w.coeffs.dot(&z).max(0.0).sqrt())
    }

    /// `V*` norm of an element of `H` embedded through `v ↦ (v, ·)_H`.
    pub fn dual_norm_of_h(&self, v: &Vector) -> Result<f64> {
        self.dual_norm(&self.embed_h(v)?)
    }

    /// The embedding `H → V*`, `v ↦ G_H v`.
    pub fn embed_h(&self, v: &Vector) -> Result<DualVector> {
        self.check_dim(v)?;
        Ok(DualVector::new(&self.gram_h * v))
    }

    /// Solves `G_H x = rhs` (the inverse Riesz map of `H`).
    pub fn solve_h(&self, rhs: &Vector) -> Result<Vector> {
        self.check_dim(rhs)?;
        Ok(self.chol_h.solve(rhs))
    }

    /// Solves `G_V x = rhs` (the inverse Riesz map of `V`).
    pub fn solve_v(&self, rhs: &Vector) -> Result<Vector> {
        self.check_dim(rhs)?;
        Ok(self.chol_v.solve(rhs))
    }

    pub fn apply_trace(&self, v: &Vector) -> Result<Vector> {
        self.check_dim(v)?;
        Ok(&self.trace * v)
    }

    /// `ι*ξ = ιᵀ G_U ξ`.
    pub fn trace_adjoint(&self, xi: &Vector) -> Result<DualVector> {
        check_len(self.dim_u(), xi.len())?;
        Ok(DualVector::new(self.trace.transpose() * (&self.gram_u * xi)))
    }

    /// Operator norm of `ι: V → U`, i.e. the largest generalized singular
    /// value of the trace matrix in the `(G_U, G_V)` geometry.
    pub fn trace_norm(&self) -> f64 {
        if self.dim_u() == 0 {
            return 0.0;
        }
        // ‖ι‖² = λ_max(G_U^{1/2} ι G_V⁻¹ ιᵀ G_U^{1/2}); the congruent form
        // L_Uᵀ ι G_V⁻¹ ιᵀ L_U with G_U = L_U L_Uᵀ has the same spectrum.
        let l_u = Cholesky::new(self.gram_u.clone())
            .expect("gram_u validated at construction")
            .unpack();
        let z = self.chol_v.solve(&self.trace.transpose());
        let inner = &self.trace * z;
        let m = l_u.transpose() * inner * &l_u;
        let sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        eig.eigenvalues.max().max(0.0).sqrt()
    }
}

/// Constants of the growth and coercivity bounds
/// `‖Av‖_{V*} ≤ a + b‖v‖` and `⟨Av,v⟩ ≥ α‖v‖² − β|v|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConstants {
    pub alpha: f64,
    pub beta: f64,
    pub a_growth: f64,
    pub b_growth: f64,
}

impl Default for OperatorConstants {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0, a_growth: 0.0, b_growth: 1.0 }
    }
}

/// The linear elliptic operator `A`, `⟨Au, v⟩ = uᵀ K v`.
#[derive(Debug, Clone)]
pub struct LinearOperatorA {
    stiffness: Matrix,
    pub constants: OperatorConstants,
}

impl LinearOperatorA {
    pub fn new(stiffness: Matrix, constants: OperatorConstants) -> Result<Self> {
        check_symmetric("stiffness", &stiffness)?;
        let OperatorConstants { alpha, beta, a_growth, b_growth } = constants;
        if !(alpha > 0.0 && beta >= 0.0 && a_growth >= 0.0 && b_growth > 0.0) {
            return Err(Error::InvalidInput(format!(
                "operator constants out of range: alpha={alpha}, beta={beta}, a={a_growth}, b={b_growth}"
            )));
        }
        Ok(Self { stiffness, constants })
    }

    pub fn stiffness(&self) -> &Matrix {
        &self.stiffness
    }

    pub fn dim(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn apply(&self, v: &Vector) -> Result<DualVector> {
        check_len(self.dim(), v.len())?;
        Ok(DualVector::new(&self.stiffness * v))
    }

    /// `⟨Av, v⟩`.
    pub fn pairing(&self, v: &Vector) -> Result<f64> {
        Ok(self.apply(v)?.pair(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSlack {
    pub sample: usize,
    pub slack: f64,
}

/// Sampling certificate for the growth and coercivity bounds of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub samples: usize,
    /// Smallest `a + b‖v‖ − ‖Av‖_{V*}` seen.
    pub growth_worst_slack: f64,
    /// Smallest `⟨Av,v⟩ − α‖v‖² + β|v|²` seen.
    pub coercivity_worst_slack: f64,
    pub growth_violations: Vec<SampleSlack>,
    pub coercivity_violations: Vec<SampleSlack>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.growth_violations.is_empty() && self.coercivity_violations.is_empty()
    }
}

/// Relative tolerance below which a negative slack counts as roundoff.
const HYPOTHESIS_REL_TOL: f64 = 1e-10;

pub fn check_hypotheses_a(
    space: &GalerkinSpace,
    op: &LinearOperatorA,
    samples: &[Vector],
) -> Result<HypothesisReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty sample list".into()));
    }
    check_len(space.dim(), op.dim())?;
    let c = op.constants;
    let mut report = HypothesisReport {
        samples: samples.len(),
        growth_worst_slack: f64::INFINITY,
        coercivity_worst_slack: f64::INFINITY,
        growth_violations: Vec::new(),
        coercivity_violations: Vec::new(),
    };
    for (i, v) in samples.iter().enumerate() {
        let norms = space.norms(v)?;
        let av = op.apply(v)?;
        let av_norm = space.dual_norm(&av)?;
        let pairing = av.pair(v);

        let bound = c.a_growth + c.b_growth * norms.v_norm;
        let growth = bound - av_norm;
        let growth_scale = bound.max(av_norm);
        if growth < -HYPOTHESIS_REL_TOL * growth_scale {
            report.growth_violations.push(SampleSlack { sample: i, slack: growth });
        }
        report.growth_worst_slack = report.growth_worst_slack.min(growth);

        let lower = c.alpha * norms.v_norm.powi(2) - c.beta * norms.h_norm.powi(2);
        let coercivity = pairing - lower;
        let coercivity_scale =
            pairing.abs() + c.alpha * norms.v_norm.powi(2) + c.beta * norms.h_norm.powi(2);
        if coercivity < -HYPOTHESIS_REL_TOL * coercivity_scale {
            report
                .coercivity_violations
                .push(SampleSlack { sample: i, slack: coercivity });
        }
        report.coercivity_worst_slack = report.coercivity_worst_slack.min(coercivity);
    }
    Ok(report)
}
