//! P1 finite elements on `Ω = (0, 1)` with the Neumann part `Γ_N = {0}`
//! and the contact part `Γ_C = {1}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::galerkin::{DualVector, GalerkinSpace, LinearOperatorA, Matrix, OperatorConstants, Vector};
use crate::quadrature::GaussRule;
use crate::inclusion::SolverSettings;
use crate::potentials::{BoundaryFunctional, ScalarPotential};
use crate::stepper::{EulerForcing, LoadSource, RotheProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mesh1D {
    n_el: usize,
}

impl Mesh1D {
    pub fn new(n_el: usize) -> Result<Self> {
        if n_el == 0 {
            return Err(Error::InvalidInput("mesh needs at least one element".into()));
        }
        Ok(Self { n_el })
    }

    pub fn n_el(&self) -> usize {
        self.n_el
    }

    pub fn n_nodes(&self) -> usize {
        self.n_el + 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_el as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// Boundary quadrature weights on `Γ_C`: a single point of unit measure.
    pub fn contact_weights(&self) -> Vec<f64> {
        vec![1.0]
    }
}

/// Assembles the mass, stiffness and V-Gram matrices and the trace at `x = 1`.
pub fn assemble_space(mesh: &Mesh1D, constants: OperatorConstants) -> Result<(GalerkinSpace, LinearOperatorA)> {
    let n = mesh.n_nodes();
    let h = mesh.h();
    let mut mass = Matrix::zeros(n, n);
    let mut stiff = Matrix::zeros(n, n);
    let m_loc = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
    let k_loc = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
    for e in 0..mesh.n_el() {
        let dofs = [e, e + 1];
        for (a, &ga) in dofs.iter().enumerate() {
            for (b, &gb) in dofs.iter().enumerate() {
                mass[(ga, gb)] += m_loc[a][b];
                stiff[(ga, gb)] += k_loc[a][b];
            }
        }
    }
    let gram_v = &mass + &stiff;
    let mut trace = Matrix::zeros(1, n);
    trace[(0, n - 1)] = 1.0;
    let gram_u = Matrix::identity(1, 1);
    let space = GalerkinSpace::new(mass, gram_v, trace, gram_u)?;
    let op = LinearOperatorA::new(stiff, constants)?;
    Ok((space, op))
}

pub type VolumeSource = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type NeumannSource = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Volume source `f₀(t, x)` and Neumann datum `f_N(t)` at `x = 0`.
#[derive(Clone)]
pub struct ForcingSpec {
    pub f0: VolumeSource,
    pub f_n: NeumannSource,
}

impl fmt::Debug for ForcingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ForcingSpec { .. }")
    }
}

impl ForcingSpec {
    pub fn new(
        f0: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        f_n: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { f0: Arc::new(f0), f_n: Arc::new(f_n) }
    }

    pub fn zero() -> Self {
        Self::new(|_, _| 0.0, |_| 0.0)
    }

    pub fn constant(f0: f64, f_n: f64) -> Self {
        Self::new(move |_, _| f0, move |_| f_n)
    }
}

/// `ℓ_i = ∫₀¹ f₀(t,x) φ_i(x) dx + f_N(t) φ_i(0)`, 3-point Gauss per element.
pub fn assemble_forcing(mesh: &Mesh1D, spec: &ForcingSpec, t: f64) -> DualVector {
    let mut load = Vector::zeros(mesh.n_nodes());
    let h = mesh.h();
    for e in 0..mesh.n_el() {
        let (x0, x1) = (mesh.node(e), mesh.node(e + 1));
        for (x, w) in GaussRule::Three.points(x0, x1) {
            let f = (spec.f0)(t, x) * w;
            let right = (x - x0) / h;
            load[e] += f * (1.0 - right);
            load[e + 1] += f * right;
        }
    }
    load[0] += (spec.f_n)(t);
    DualVector::new(load)
}

/// [`LoadSource`] backed by FEM assembly of a [`ForcingSpec`].
#[derive(Debug, Clone)]
pub struct FemLoad {
    pub mesh: Mesh1D,
    pub spec: ForcingSpec,
}

impl LoadSource for FemLoad {
    fn dim(&self) -> usize {
        self.mesh.n_nodes()
    }

    fn load(&self, t: f64) -> DualVector {
        assemble_forcing(&self.mesh, &self.spec, t)
    }
}

#[derive(Clone)]
pub enum InitialValue {
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Coefficients(Vector),
}

impl fmt::Debug for InitialValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialValue::Function(_) => f.write_str("Function(..)"),
            InitialValue::Coefficients(c) => f.debug_tuple("Coefficients").field(c).finish(),
        }
    }
}

impl InitialValue {
    pub fn function(u0: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        InitialValue::Function(Arc::new(u0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub coeffs: Vector,
    /// `√τ · ‖u⁰_τ‖_V`, bounded along a τ-ladder when `‖u⁰_τ‖ ≤ c/√τ`.
    pub scaled_v_norm: f64,
}

/// `H`-orthogonal projection of the initial datum onto the P1 space.
pub fn make_initial(mesh: &Mesh1D, space: &GalerkinSpace, u0: &InitialValue, tau: f64) -> Result<InitialData> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    let coeffs = match u0 {
        InitialValue::Coefficients(c) => {
            crate::error::check_len(space.dim(), c.len())?;
            c.clone()
        }
        InitialValue::Function(f) => {
            let spec = ForcingSpec { f0: Arc::new({
                let f = Arc::clone(f);
                move |_, x| f(x)
            }), f_n: Arc::new(|_| 0.0) };
            let rhs = assemble_forcing(mesh, &spec, 0.0);
            space.solve_h(&rhs.coeffs)?
        }
    };
    let scaled_v_norm = tau.sqrt() * space.v_norm(&coeffs)?;
    Ok(InitialData { coeffs, scaled_v_norm })
}

/// Assembles a complete problem on `mesh`: space, operator, boundary
/// functional on `x = 1`, FEM load and projected initial value.
pub fn build_problem(
    mesh: Mesh1D,
    constants: OperatorConstants,
    potential: ScalarPotential,
    forcing: ForcingSpec,
    u0: &InitialValue,
    settings: SolverSettings,
) -> Result<RotheProblem> {
    let (space, op) = assemble_space(&mesh, constants)?;
    let boundary = BoundaryFunctional::new(potential, mesh.contact_weights())?;
    let init = make_initial(&mesh, &space, u0, 1.0)?;
    Ok(RotheProblem {
        space,
        op,
        boundary,
        load: Arc::new(FemLoad { mesh, spec: forcing }),
        u0: init.coeffs,
        settings,
        euler_forcing: EulerForcing::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn space(n: usize) -> (Mesh1D, GalerkinSpace, LinearOperatorA) {
        let mesh = Mesh1D::new(n).unwrap();
        let (s, a) = assemble_space(&mesh, OperatorConstants::default()).unwrap();
        (mesh, s, a)
    }

    #[test]
    fn single_element_matrices() {
        let (_, s, a) = space(1);
        let m = s.gram_h();
        assert_relative_eq!(m[(0, 0)], 1.0 / 3.0);
        assert_relative_eq!(m[(0, 1)], 1.0 / 6.0);
        assert_relative_eq!(m[(1, 1)], 1.0 / 3.0);
        assert_eq!(a.stiffness().as_slice(), &[1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn constants_are_in_the_kernel_and_norms() {
        let (_, s, a) = space(1);
        let one = Vector::from_element(2, 1.0);
        let n = s.norms(&one).unwrap();
        assert_relative_eq!(n.h_norm, 1.0, epsilon = 1e-15);
        assert_relative_eq!(n.v_norm, 1.0, epsilon = 1e-15);
        assert_eq!(n.u_norm_of_trace, 1.0);
        for n_el in [3, 8, 17] {
            let (_, _, a) = space(n_el);
            let kv = a.apply(&Vector::from_element(n_el + 1, 1.0)).unwrap();
            assert!(kv.coeffs.amax() < 1e-12);
        }
        assert_eq!(a.constants, OperatorConstants::default());
    }

    #[test]
    fn mass_sums_to_domain_measure() {
        for n_el in [1, 2, 7, 64] {
            let (_, s, _) = space(n_el);
            assert_relative_eq!(s.gram_h().sum(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn v_gram_is_mass_plus_stiffness() {
        let (_, s, a) = space(9);
        assert_eq!(s.gram_v(), &(s.gram_h() + a.stiffness()));
    }

    #[test]
    fn zero_elements_rejected() {
        assert!(Mesh1D::new(0).is_err());
    }

    #[test]
    fn forcing_loads() {
        let (mesh, _, _) = space(1);
        let l = assemble_forcing(&mesh, &ForcingSpec::constant(1.0, 0.0), 0.3);
        assert_relative_eq!(l.coeffs[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(l.coeffs[1], 0.5, epsilon = 1e-15);
        let mesh = Mesh1D::new(4).unwrap();
        let l = assemble_forcing(&mesh, &ForcingSpec::constant(0.0, 2.5), 0.0);
        assert_eq!(l.coeffs.as_slice(), &[2.5, 0.0, 0.0, 0.0, 0.0]);
        let l = assemble_forcing(&mesh, &ForcingSpec::zero(), 0.0);
        assert_eq!(l.coeffs.amax(), 0.0);
    }

    #[test]
    fn initial_projection() {
        let (mesh, s, _) = space(2);
        let lin = make_initial(&mesh, &s, &InitialValue::function(|x| x), 0.1).unwrap();
        for (c, e) in lin.coeffs.iter().zip([0.0, 0.5, 1.0]) {
            assert_relative_eq!(*c, e, epsilon = 1e-14);
        }
        let (mesh, s, _) = space(5);
        let one = make_initial(&mesh, &s, &InitialValue::function(|_| 1.0), 0.1).unwrap();
        assert!(one.coeffs.iter().all(|c| (c - 1.0).abs() < 1e-13));
        let given = Vector::from_vec(vec![0.3, -1.0, 2.0, 0.0, 1.0, 5.0]);
        let back = make_initial(&mesh, &s, &InitialValue::Coefficients(given.clone()), 0.25).unwrap();
        assert_eq!(back.coeffs, given);
        assert_relative_eq!(back.scaled_v_norm, 0.5 * s.v_norm(&given).unwrap());
        assert!(make_initial(&mesh, &s, &InitialValue::Coefficients(given), 0.0).is_err());
    }

    #[test]
    fn trace_reads_right_endpoint() {
        let (_, s, _) = space(3);
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.apply_trace(&v).unwrap()[0], 4.0);
        // ‖ι‖² = coth(1) in the continuum; the discrete norm approaches it from below
        let (_, s, _) = space(64);
        let cth = 1.0 / 1f64.tanh();
        assert!((s.trace_norm().powi(2) - cth).abs() < 1e-3);
    }
}
