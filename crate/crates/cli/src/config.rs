//! Experiment configuration, read from a TOML file.
//!
//! Every section is a flat table of typed keys; unknown keys are rejected.
//! Serializing a parsed config yields the canonical form (fixed key order),
//! so `serialize → parse → serialize` is byte-identical.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use rothe_hvi::fem1d::{build_problem, ForcingSpec, InitialValue, Mesh1D};
use rothe_hvi::potentials::{NonconvexParams, PotentialKind};
use rothe_hvi::{EulerForcing, OperatorConstants, RotheProblem, ScalarPotential, Scheme, SolverSettings, TimeGrid};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub potential: PotentialSection,
    #[serde(default)]
    pub operator: OperatorSection,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub check: CheckSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingPreset {
    /// `f₀ ≡ 0`, `f_N ≡ 0`.
    Zero,
    /// `f₀ ≡ 1`, `f_N ≡ 0`.
    Unit,
    /// `f₀ = 1 + sin(πt) cos(πx)`, `f_N = ½ sin(πt)`.
    Smooth,
    /// `f₀(t) = Σ f0_coeffs[i] tⁱ`, `f_N(t) = Σ fn_coeffs[i] tⁱ`.
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPreset {
    Zero,
    /// `u⁰ ≡ u0_value`.
    Constant,
    /// `u⁰ = u0_value · cos(πx)`.
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub n_el: usize,
    pub t_final: f64,
    pub forcing: ForcingPreset,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub f0_coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fn_coeffs: Vec<f64>,
    pub u0: InitialPreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0_value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialName {
    PaperExponential,
    LinearRobin,
    Nonconvex,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub kind: PotentialName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub paper_literal_subdiff: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kink_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kink_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for OperatorSection {
    fn default() -> Self {
        let c = OperatorConstants::default();
        Self { alpha: c.alpha, beta: c.beta, a: c.a_growth, b: c.b_growth }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Bdf2,
    BackwardEuler,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Bdf2 => Scheme::Bdf2,
            SchemeName::BackwardEuler => Scheme::BackwardEuler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EulerForcingName {
    #[default]
    Point,
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: SchemeName,
    pub taus: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_tau: Option<f64>,
    #[serde(default)]
    pub euler_forcing: EulerForcingName,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub eps0: f64,
    pub eps_min: f64,
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self { tol: s.tol, eps0: s.eps0, eps_min: s.eps_min, max_iter: s.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub seed: u64,
    pub samples: usize,
    pub coercivity_taus: Vec<f64>,
    pub identity_triples: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self { seed: 0, samples: 1000, coercivity_taus: vec![0.1, 0.05, 0.01, 0.001], identity_triples: 10_000 }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, msg: String| Err(CliError::Config(format!("{key}: {msg}")));
        let p = &self.problem;
        if p.n_el == 0 {
            return bad("problem.n_el", "must be at least 1".into());
        }
        if !(p.t_final > 0.0 && p.t_final.is_finite()) {
            return bad("problem.t_final", format!("must be positive, got {}", p.t_final));
        }
        if p.forcing == ForcingPreset::Polynomial && p.f0_coeffs.is_empty() && p.fn_coeffs.is_empty() {
            return bad("problem.f0_coeffs", "polynomial forcing needs f0_coeffs or fn_coeffs".into());
        }
        if p.forcing != ForcingPreset::Polynomial && !(p.f0_coeffs.is_empty() && p.fn_coeffs.is_empty()) {
            return bad("problem.f0_coeffs", "coefficients are only used with forcing = \"polynomial\"".into());
        }
        if p.u0 != InitialPreset::Zero && p.u0_value.is_none() {
            return bad("problem.u0_value", "required unless u0 = \"zero\"".into());
        }
        if self.scheme.taus.is_empty() {
            return bad("scheme.taus", "at least one step size is required".into());
        }
        for &tau in self.scheme.taus.iter().chain(self.scheme.reference_tau.iter()) {
            TimeGrid::from_tau(p.t_final, tau).map_err(|e| CliError::Config(format!("scheme.taus: {e}")))?;
        }
        if self.scheme.taus.windows(2).any(|w| w[1] >= w[0]) {
            return bad("scheme.taus", "must be strictly decreasing".into());
        }
        if self.check.samples == 0 {
            return bad("check.samples", "must be positive".into());
        }
        self.potential()?;
        self.constants()?;
        self.solver_settings().validate().map_err(|e| CliError::Config(format!("solver: {e}")))?;
        Ok(())
    }

    pub fn potential(&self) -> Result<ScalarPotential, CliError> {
        let s = &self.potential;
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| CliError::Config(format!("potential.{key}: required for kind {:?}", s.kind)))
        };
        let kind = match s.kind {
            PotentialName::PaperExponential => PotentialKind::PaperExponential {
                d: need(s.d, "d")?,
                literal_subdiff: s.paper_literal_subdiff,
            },
            PotentialName::LinearRobin => PotentialKind::LinearRobin { k: need(s.k, "k")? },
            PotentialName::Nonconvex => {
                let d = NonconvexParams::default();
                PotentialKind::NonconvexPiecewise(NonconvexParams {
                    kink_lo: s.kink_lo.unwrap_or(d.kink_lo),
                    kink_hi: s.kink_hi.unwrap_or(d.kink_hi),
                    slope: s.slope.unwrap_or(d.slope),
                    descent: s.descent.unwrap_or(d.descent),
                    jump: s.jump.unwrap_or(d.jump),
                })
            }
            PotentialName::Zero => PotentialKind::Zero,
        };
        ScalarPotential::new(kind).map_err(|e| CliError::Config(format!("potential: {e}")))
    }

    pub fn constants(&self) -> Result<OperatorConstants, CliError> {
        let o = &self.operator;
        let c = OperatorConstants { alpha: o.alpha, beta: o.beta, a_growth: o.a, b_growth: o.b };
        rothe_hvi::LinearOperatorA::new(rothe_hvi::Matrix::zeros(1, 1), c)
            .map_err(|e| CliError::Config(format!("operator: {e}")))?;
        Ok(c)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        let s = &self.solver;
        SolverSettings { tol: s.tol, eps0: s.eps0, eps_min: s.eps_min, max_iter: s.max_iter, ..Default::default() }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme.kind.into()
    }

    pub fn forcing(&self) -> ForcingSpec {
        match self.problem.forcing {
            ForcingPreset::Zero => ForcingSpec::zero(),
            ForcingPreset::Unit => ForcingSpec::constant(1.0, 0.0),
            ForcingPreset::Smooth => {
                use std::f64::consts::PI;
                ForcingSpec::new(|t, x| 1.0 + (PI * t).sin() * (PI * x).cos(), |t| 0.5 * (PI * t).sin())
            }
            ForcingPreset::Polynomial => {
                let f0: Arc<[f64]> = self.problem.f0_coeffs.clone().into();
                let fnc: Arc<[f64]> = self.problem.fn_coeffs.clone().into();
                ForcingSpec::new(move |t, _| horner(&f0, t), move |t| horner(&fnc, t))
            }
        }
    }

    pub fn initial_value(&self) -> InitialValue {
        let v = self.problem.u0_value.unwrap_or(0.0);
        match self.problem.u0 {
            InitialPreset::Zero => InitialValue::function(|_| 0.0),
            InitialPreset::Constant => InitialValue::function(move |_| v),
            InitialPreset::Cosine => InitialValue::function(move |x| v * (std::f64::consts::PI * x).cos()),
        }
    }

    pub fn build_problem(&self) -> Result<RotheProblem, CliError> {
        let mut p = build_problem(
            Mesh1D::new(self.problem.n_el)?,
            self.constants()?,
            self.potential()?,
            self.forcing(),
            &self.initial_value(),
            self.solver_settings(),
        )?;
        p.euler_forcing = match self.scheme.euler_forcing {
            EulerForcingName::Point => EulerForcing::PointValue,
            EulerForcingName::Window => EulerForcing::WindowAverage,
        };
        Ok(p)
    }

    /// Reference step: the configured one, or the smallest ladder step / 32.
    pub fn reference_tau(&self) -> f64 {
        self.scheme.reference_tau.unwrap_or_else(|| {
            let min = self.scheme.taus.iter().cloned().fold(f64::INFINITY, f64::min);
            min / 32.0
        })
    }
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}
