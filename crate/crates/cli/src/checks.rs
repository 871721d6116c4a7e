//! Randomized hypothesis checks shared by `check` and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rothe_hvi::diagnostics::{bdf2_identity_gap, bdf2_inequality_slack};
use rothe_hvi::{GalerkinSpace, Matrix, Vector};

pub const IDENTITY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityFuzzReport {
    pub triples: usize,
    /// Largest `gap / scale`.
    pub worst_gap: f64,
    /// Smallest `slack / scale`.
    pub worst_slack: f64,
    pub violations: usize,
}

impl IdentityFuzzReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> Matrix {
    let b = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + Matrix::identity(dim, dim) * rng.random_range(0.01..1.0)
}

/// Fuzzes the two-step energy identity and inequality on random triples in
/// dimensions 1–16 with random SPD `H`-Gram matrices.
///
/// `scale = 1 + |a|² + |b|² + |c|²`; a triple fails when
/// `gap > 1e-12·scale` or `slack < −1e-12·scale`.
pub fn identity_fuzz(seed: u64, triples: usize) -> rothe_hvi::Result<IdentityFuzzReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = IdentityFuzzReport { triples, worst_gap: 0.0, worst_slack: f64::INFINITY, violations: 0 };
    for _ in 0..triples {
        let dim = rng.random_range(1..=16);
        let h = random_spd(&mut rng, dim);
        let v = &h + Matrix::identity(dim, dim);
        let space = GalerkinSpace::new(h, v, Matrix::identity(dim, dim), Matrix::identity(dim, dim))?;
        let magnitude = 10f64.powi(rng.random_range(-3..=3));
        let mut draw = || Vector::from_fn(dim, |_, _| magnitude * rng.random_range(-1.0..1.0));
        let (a, b, c) = (draw(), draw(), draw());
        let scale = 1.0 + [&a, &b, &c].iter().map(|x| space.h_norm(x).map(|n| n * n)).sum::<rothe_hvi::Result<f64>>()?;
        let gap = bdf2_identity_gap(&space, &a, &b, &c)? / scale;
        let slack = bdf2_inequality_slack(&space, &a, &b, &c)? / scale;
        report.worst_gap = report.worst_gap.max(gap);
        report.worst_slack = report.worst_slack.min(slack);
        if gap > IDENTITY_REL_TOL || slack < -IDENTITY_REL_TOL {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Sample vectors for the operator checks: random coefficients over seven
/// decades plus low cosine modes evaluated at `nodes`.
pub fn sample_vectors(seed: u64, nodes: &[f64], count: usize) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = nodes.len();
    (0..count)
        .map(|i| {
            if i % 10 == 9 {
                let k = (i / 10 % 8) as f64;
                let amp = rng.random_range(-5.0..5.0);
                Vector::from_fn(n, |j, _| amp * (k * std::f64::consts::PI * nodes[j]).cos())
            } else {
                let scale = 10f64.powi(i as i32 % 7 - 3);
                Vector::from_fn(n, |_, _| scale * rng.random_range(-1.0..1.0))
            }
        })
        .collect()
}

/// Scalar samples: a uniform grid on `[-50, 50]` followed by random points
/// on a log scale, `count` in total.
pub fn sample_scalars(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ca1a5);
    let grid = count / 2;
    let mut out: Vec<f64> = (0..grid).map(|i| -50.0 + 100.0 * i as f64 / (grid.max(2) - 1) as f64).collect();
    while out.len() < count {
        let mag = 10f64.powf(rng.random_range(-6.0..3.0));
        out.push(if rng.random_bool(0.5) { mag } else { -mag });
    }
    out
}
