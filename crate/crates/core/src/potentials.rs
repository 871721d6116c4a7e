//! Scalar locally Lipschitz potentials `j: ℝ → ℝ` and their Clarke
//! subdifferentials.
//!
//! Every potential here is piecewise smooth with a finite, explicitly stored
//! kink set. Between kinks `j` is differentiable with derivative given by a
//! smooth branch `g_p`; at a kink the Clarke subdifferential is the closed
//! interval spanned by the two one-sided derivatives.

use crate::error::{Error, Result};

/// Parameters of the nonconvex piecewise-quadratic test potential.
///
/// The derivative is piecewise linear:
///
/// ```text
/// g(s) = slope·s                                   s < kink_lo
/// g(s) = slope·kink_lo + jump − descent·(s − kink_lo)   kink_lo < s < kink_hi
/// g(s) = g(kink_hi⁻) + slope·(s − kink_hi)          s > kink_hi
/// ```
///
/// so `j = ∫₀ g` is continuous and piecewise quadratic, with a descending
/// subdifferential segment on `(kink_lo, kink_hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonconvexParams {
    pub kink_lo: f64,
    pub kink_hi: f64,
    pub slope: f64,
    pub descent: f64,
    pub jump: f64,
}

impl Default for NonconvexParams {
    fn default() -> Self {
        Self { kink_lo: 0.5, kink_hi: 1.5, slope: 1.0, descent: 4.0, jump: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// `j(s) = 0` for `s < 0`, `−d e^{−s} + ½ d s² + d` for `s ≥ 0`.
    ///
    /// With `literal_subdiff` the smooth branch of `∂j` is `d e^{−s} + s`
    /// instead of the true derivative `d e^{−s} + d s`; the two agree for `d = 1`.
    PaperExponential { d: f64, literal_subdiff: bool },
    /// `j(s) = ½ k s²`, a linear Robin condition.
    LinearRobin { k: f64 },
    NonconvexPiecewise(NonconvexParams),
    Zero,
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn hull(self, other: Interval) -> Self {
        Self { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Distance from `x` to the interval.
    pub fn distance(&self, x: f64) -> f64 {
        (self.lo - x).max(x - self.hi).max(0.0)
    }

    pub fn project(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedValue {
    pub value: f64,
    pub derivative: f64,
}

/// A kink `s0` with the one-sided derivative values on either side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kink {
    pub at: f64,
    pub left: f64,
    pub right: f64,
}

impl Kink {
    pub fn jump(&self) -> Interval {
        Interval { lo: self.left.min(self.right), hi: self.left.max(self.right) }
    }

    /// Whether the upper end of the jump is attained on the right side.
    pub fn rises(&self) -> bool {
        self.right >= self.left
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPotential {
    kind: PotentialKind,
    d_j: f64,
    kinks: Vec<f64>,
}

impl ScalarPotential {
    pub fn paper_exponential(d: f64) -> Result<Self> {
        Self::new(PotentialKind::PaperExponential { d, literal_subdiff: false })
    }

    pub fn linear_robin(k: f64) -> Result<Self> {
        Self::new(PotentialKind::LinearRobin { k })
    }

    pub fn nonconvex(params: NonconvexParams) -> Result<Self> {
        Self::new(PotentialKind::NonconvexPiecewise(params))
    }

    pub fn zero() -> Self {
        Self::new(PotentialKind::Zero).expect("zero potential is always valid")
    }

    pub fn new(kind: PotentialKind) -> Result<Self> {
        let (d_j, kinks) = match kind {
            PotentialKind::PaperExponential { d, literal_subdiff } => {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::InvalidInput(format!("exponential potential needs d > 0, got {d}")));
                }
                // d e^{−s} + s ≤ max(d, 1)(1 + s) for the printed branch.
                let d_j = if literal_subdiff { d.max(1.0) } else { d };
                (d_j, vec![0.0])
            }
            PotentialKind::LinearRobin { k } => {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(Error::InvalidInput(format!("Robin coefficient must be >= 0, got {k}")));
                }
                (if k > 0.0 { k } else { 1.0 }, Vec::new())
            }
            PotentialKind::NonconvexPiecewise(p) => {
                let finite = [p.kink_lo, p.kink_hi, p.slope, p.descent, p.jump]
                    .iter()
                    .all(|x| x.is_finite());
                if !finite || p.kink_lo >= p.kink_hi || p.slope < 0.0 || p.descent < 0.0 {
                    return Err(Error::InvalidInput(format!("invalid nonconvex parameters {p:?}")));
                }
                let [_, (a1, b1), (a2, b2)] = nonconvex_pieces(&p);
                let mid = (a1 + b1 * p.kink_lo).abs().max((a1 + b1 * p.kink_hi).abs());
                let d_j = p.slope.max(mid).max(a2.abs()).max(b2.abs());
                (if d_j > 0.0 { d_j } else { 1.0 }, vec![p.kink_lo, p.kink_hi])
            }
            PotentialKind::Zero => (1.0, Vec::new()),
        };
        Ok(Self { kind, d_j, kinks })
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// Growth constant with `|ζ| ≤ d_j (1 + |s|)` for all `ζ ∈ ∂j(s)`.
    pub fn d_j(&self) -> f64 {
        self.d_j
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    /// Index of the smooth piece containing `s` (pieces are separated by
    /// the kinks; a kink itself maps to the piece on its left).
    pub fn piece_of(&self, s: f64) -> usize {
        self.kinks.iter().filter(|&&k| k < s).count()
    }

    /// Smooth branch of piece `piece` (and its derivative) evaluated at `s`,
    /// extended beyond the piece where needed.
    pub fn branch(&self, piece: usize, s: f64) -> (f64, f64) {
        match self.kind {
            PotentialKind::PaperExponential { d, literal_subdiff } => {
                if piece == 0 {
                    (0.0, 0.0)
                } else if literal_subdiff {
                    let e = (-s).exp();
                    (d * e + s, 1.0 - d * e)
                } else {
                    let e = (-s).exp();
                    (d * e + d * s, d - d * e)
                }
            }
            PotentialKind::LinearRobin { k } => (k * s, k),
            PotentialKind::NonconvexPiecewise(p) => {
                let (a, b) = nonconvex_pieces(&p)[piece];
                (a + b * s, b)
            }
            PotentialKind::Zero => (0.0, 0.0),
        }
    }

    pub fn kink(&self, index: usize) -> Kink {
        let at = self.kinks[index];
        Kink { at, left: self.branch(index, at).0, right: self.branch(index + 1, at).0 }
    }

    pub fn value(&self, s: f64) -> f64 {
        match self.kind {
            PotentialKind::PaperExponential { d, .. } => {
                if s < 0.0 {
                    0.0
                } else {
                    -d * (-s).exp() + 0.5 * d * s * s + d
                }
            }
            PotentialKind::LinearRobin { k } => 0.5 * k * s * s,
            PotentialKind::NonconvexPiecewise(p) => nonconvex_value(&p, s),
            PotentialKind::Zero => 0.0,
        }
    }

    pub fn clarke_interval(&self, s: f64) -> Interval {
        if let Some(i) = self.kinks.iter().position(|&k| k == s) {
            return self.kink(i).jump();
        }
        Interval::point(self.branch(self.piece_of(s), s).0)
    }

    /// Width of the ramps actually used: `eps`, shrunk so that ramps of
    /// neighbouring kinks never overlap.
    pub fn effective_eps(&self, eps: f64) -> f64 {
        let min_gap = self
            .kinks
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        eps.min(0.5 * min_gap)
    }

    /// Ramp zone `[a, b]` of kink `index` for regularization width `eps`.
    pub fn ramp_zone(&self, index: usize, eps: f64) -> (f64, f64) {
        let eps = self.effective_eps(eps);
        let k = self.kink(index);
        if k.rises() {
            (k.at, k.at + eps)
        } else {
            (k.at - eps, k.at)
        }
    }

    /// Whether kink `index` carries a jump of `∂j` and hence a ramp; where
    /// `∂j` is continuous no regularization is needed.
    pub fn has_ramp(&self, index: usize) -> bool {
        let k = self.kink(index);
        k.left != k.right
    }

    /// Index of the kink whose open ramp zone contains `s`.
    pub fn in_open_ramp(&self, s: f64, eps: f64) -> Option<usize> {
        (0..self.kinks.len()).filter(|&i| self.has_ramp(i)).find(|&i| {
            let (a, b) = self.ramp_zone(i, eps);
            a < s && s < b
        })
    }

    /// Lipschitz single-valued surrogate of `∂j`.
    ///
    /// Away from the ramp zones it is the unique Clarke element. On the ramp
    /// of a kink it blends the two adjacent branches linearly, so the value
    /// runs from the lower end of the jump at the kink to the upper branch at
    /// the far end of the ramp.
    pub fn regularized_selection(&self, s: f64, eps: f64) -> Result<RegularizedValue> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!("regularization width must be > 0, got {eps}")));
        }
        let width = self.effective_eps(eps);
        for i in (0..self.kinks.len()).filter(|&i| self.has_ramp(i)) {
            let (a, b) = self.ramp_zone(i, eps);
            if a <= s && s <= b {
                let (gl, dgl) = self.branch(i, s);
                let (gr, dgr) = self.branch(i + 1, s);
                let k = self.kink(i);
                return Ok(if k.rises() {
                    let theta = (s - k.at) / width;
                    RegularizedValue {
                        value: (1.0 - theta) * gl + theta * gr,
                        derivative: (gr - gl) / width + (1.0 - theta) * dgl + theta * dgr,
                    }
                } else {
                    let theta = (k.at - s) / width;
                    RegularizedValue {
                        value: (1.0 - theta) * gr + theta * gl,
                        derivative: (gr - gl) / width + (1.0 - theta) * dgr + theta * dgl,
                    }
                });
            }
        }
        let (value, derivative) = self.branch(self.piece_of(s), s);
        Ok(RegularizedValue { value, derivative })
    }

    /// Derivative of the smooth branch active at `s` (`None` at a kink).
    pub fn smooth_derivative(&self, s: f64) -> Option<(f64, f64)> {
        if self.kinks.contains(&s) {
            None
        } else {
            Some(self.branch(self.piece_of(s), s))
        }
    }

    /// Hull of `∂j` over `[s − delta, s + delta]`.
    pub fn clarke_hull(&self, s: f64, delta: f64) -> Interval {
        let mut hull = self
            .clarke_interval(s)
            .hull(self.clarke_interval(s - delta))
            .hull(self.clarke_interval(s + delta));
        for (i, &k) in self.kinks.iter().enumerate() {
            if (k - s).abs() <= delta {
                hull = hull.hull(self.kink(i).jump());
            }
        }
        hull
    }

    /// Distance of `xi` from `∂j` evaluated on `[s − delta, s + delta]`.
    pub fn membership_slack(&self, s: f64, xi: f64, delta: f64) -> f64 {
        self.clarke_hull(s, delta).distance(xi)
    }
}

/// `(a_p, b_p)` with `g = a_p + b_p s` on each of the three pieces.
fn nonconvex_pieces(p: &NonconvexParams) -> [(f64, f64); 3] {
    let a1 = p.slope * p.kink_lo + p.jump + p.descent * p.kink_lo;
    let g_hi = a1 - p.descent * p.kink_hi;
    let a2 = g_hi - p.slope * p.kink_hi;
    [(0.0, p.slope), (a1, -p.descent), (a2, p.slope)]
}

/// `∫₀ˢ g` for the piecewise-linear derivative of the nonconvex potential.
fn nonconvex_value(p: &NonconvexParams, s: f64) -> f64 {
    let pieces = nonconvex_pieces(p);
    let bounds = [f64::NEG_INFINITY, p.kink_lo, p.kink_hi, f64::INFINITY];
    let (lo, hi, sign) = if s >= 0.0 { (0.0, s, 1.0) } else { (s, 0.0, -1.0) };
    let mut total = 0.0;
    for (i, &(a, b)) in pieces.iter().enumerate() {
        let x0 = lo.max(bounds[i]);
        let x1 = hi.min(bounds[i + 1]);
        if x1 > x0 {
            total += a * (x1 - x0) + 0.5 * b * (x1 * x1 - x0 * x0);
        }
    }
    sign * total
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub samples: usize,
    /// Smallest `d_j(1+|s|) − max(|lo|, |hi|)` over the samples.
    pub worst_slack: f64,
    pub violations: Vec<f64>,
    /// `√2 · d_j · max{1, √|Γ_C|}`.
    pub lifted_d: f64,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn lifted_growth_constant(d_j: f64, boundary_measure: f64) -> f64 {
    std::f64::consts::SQRT_2 * d_j * boundary_measure.sqrt().max(1.0)
}

pub fn check_growth(
    pot: &ScalarPotential,
    samples: &[f64],
    boundary_measure: f64,
) -> Result<GrowthReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty sample list".into()));
    }
    let mut worst = f64::INFINITY;
    let mut violations = Vec::new();
    for &s in samples {
        let iv = pot.clarke_interval(s);
        let bound = pot.d_j() * (1.0 + s.abs());
        let slack = bound - iv.lo.abs().max(iv.hi.abs());
        if slack < -1e-12 * bound {
            violations.push(s);
        }
        worst = worst.min(slack);
    }
    Ok(GrowthReport {
        samples: samples.len(),
        worst_slack: worst,
        violations,
        lifted_d: lifted_growth_constant(pot.d_j(), boundary_measure),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub monotone: bool,
    /// First pair `s_a < s_b` with `hi(s_a) > lo(s_b)`.
    pub first_violation: Option<(f64, f64)>,
}

/// Checks on a sample grid (augmented with the kinks) that `∂j` is a
/// nondecreasing set-valued map.
pub fn check_monotone(pot: &ScalarPotential, samples: &[f64]) -> MonotonicityReport {
    let mut grid: Vec<f64> = samples.iter().copied().filter(|s| s.is_finite()).collect();
    grid.extend_from_slice(pot.kinks());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    for w in grid.windows(2) {
        let hi = pot.clarke_interval(w[0]).hi;
        let lo = pot.clarke_interval(w[1]).lo;
        if hi > lo + 1e-12 * (1.0 + hi.abs()) {
            return MonotonicityReport { monotone: false, first_violation: Some((w[0], w[1])) };
        }
    }
    MonotonicityReport { monotone: true, first_violation: None }
}

/// `J(u) = Σ_i w_i j(u_i)` on the boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunctional {
    pub potential: ScalarPotential,
    weights: Vec<f64>,
}

impl BoundaryFunctional {
    pub fn new(potential: ScalarPotential, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("boundary weights must be positive".into()));
        }
        Ok(Self { potential, weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `|Γ_C|` as seen by the quadrature.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn value(&self, boundary_values: &[f64]) -> Result<f64> {
        crate::error::check_len(self.weights.len(), boundary_values.len())?;
        Ok(self
            .weights
            .iter()
            .zip(boundary_values)
            .map(|(w, &s)| w * self.potential.value(s))
            .sum())
    }

    pub fn lifted_growth_constant(&self) -> f64 {
        lifted_growth_constant(self.potential.d_j(), self.measure())
    }
}
