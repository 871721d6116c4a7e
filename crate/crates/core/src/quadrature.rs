//! Gauss–Legendre rules on `[-1, 1]`, mapped to arbitrary intervals.

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussRule {
    Three,
    Five,
}

impl GaussRule {
    fn table(self) -> &'static [(f64, f64)] {
        match self {
            GaussRule::Three => &GAUSS3,
            GaussRule::Five => &GAUSS5,
        }
    }

    /// Nodes and weights on `[a, b]`.
    pub fn points(self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.table().iter().map(move |&(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.points(a, b).map(|(x, w)| w * f(x)).sum()
    }
}
