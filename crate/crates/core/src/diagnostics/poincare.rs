use alloc::vec::Vec;

/// Which sign changes of `P` count as section crossings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// `P` going from positive to non-positive.
    #[default]
    Down,
    /// `P` going from negative to non-negative.
    Up,
    Both,
}

/// Crossings of the plane `P = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoincareSection {
    pub direction: Direction,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
}

impl PoincareSection {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Locates crossings of `P = 0` by linear interpolation between bracketing
/// samples.
pub fn poincare(t: &[f64], x: &[f64], p: &[f64], direction: Direction) -> PoincareSection {
    let n = t.len().min(x.len()).min(p.len());
    let mut out = PoincareSection { direction, t: Vec::new(), x: Vec::new() };
    for i in 0..n.saturating_sub(1) {
        let (p0, p1) = (p[i], p[i + 1]);
        let down = p0 > 0.0 && p1 <= 0.0;
        let up = p0 < 0.0 && p1 >= 0.0;
        let hit = match direction {
            Direction::Down => down,
            Direction::Up => up,
            Direction::Both => down || up,
        };
        if hit {
            let w = p0 / (p0 - p1);
            out.t.push(t[i] + w * (t[i + 1] - t[i]));
            out.x.push(x[i] + w * (x[i + 1] - x[i]));
        }
    }
    out
}

/// Number of single-linkage clusters: sorted values split wherever the gap
/// exceeds `tol`.
pub fn count_clusters(values: &[f64], tol: f64) -> usize {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    1 + v.windows(2).filter(|w| w[1] - w[0] > tol).count()
}

/// Cluster counts above this are read as a scattered (chaotic) section.
pub const SCATTER_THRESHOLD: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Empty,
    Periodic(usize),
    Scattered(usize),
}

impl Regime {
    pub fn classify(values: &[f64], tol: f64) -> Self {
        match count_clusters(values, tol) {
            0 => Regime::Empty,
            n if n > SCATTER_THRESHOLD => Regime::Scattered(n),
            n => Regime::Periodic(n),
        }
    }

    pub fn clusters(&self) -> usize {
        match *self {
            Regime::Empty => 0,
            Regime::Periodic(n) | Regime::Scattered(n) => n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn analytic_circle() {
        let n = 20_000;
        let h = 20.0 * PI / n as f64;
        let t: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let x: Vec<f64> = t.iter().map(|t| libm::sin(*t)).collect();
        let p: Vec<f64> = t.iter().map(|t| libm::cos(*t)).collect();
        let s = poincare(&t, &x, &p, Direction::Down);
        assert_eq!(s.len(), 10);
        for (k, (&tc, &xc)) in s.t.iter().zip(&s.x).enumerate() {
            assert!((tc - (PI / 2.0 + 2.0 * PI * k as f64)).abs() < 1e-6);
            assert!((xc - 1.0).abs() < 1e-6);
        }
        let up = poincare(&t, &x, &p, Direction::Up);
        assert!(up.x.iter().all(|x| (x + 1.0).abs() < 1e-6));
        assert_eq!(poincare(&t, &x, &p, Direction::Both).len(), 20);
    }

    #[test]
    fn midpoint_interpolation() {
        let s = poincare(&[0.0, 1.0], &[0.0, 1.0], &[1.0, -1.0], Direction::Down);
        assert_eq!(s.x, [0.5]);
        assert_eq!(s.t, [0.5]);
    }

    #[test]
    fn interpolation_error_is_second_order() {
        // Worst crossing over many periods with a step incommensurate to 2 pi.
        let err = |n: usize| {
            let h = 2.0 * PI / (n as f64 + 0.318);
            let t: Vec<f64> = (0..50 * n).map(|i| 0.3 + i as f64 * h).collect();
            let x: Vec<f64> = t.iter().map(|t| libm::sin(*t)).collect();
            let p: Vec<f64> = t.iter().map(|t| libm::cos(*t)).collect();
            let s = poincare(&t, &x, &p, Direction::Down);
            s.x.iter().fold(0.0f64, |m, x| m.max((x - 1.0).abs()))
        };
        let r = err(100) / err(200);
        assert!(r > 3.0 && r < 5.0, "ratio {r}");
    }

    #[test]
    fn clusters() {
        assert_eq!(count_clusters(&[], 0.02), 0);
        assert_eq!(count_clusters(&[1.0, 1.01, 1.015, 2.0, 2.005], 0.02), 2);
        assert_eq!(Regime::classify(&[0.1, 0.5, 0.9], 0.02), Regime::Periodic(3));
        let spread: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        assert_eq!(Regime::classify(&spread, 0.02), Regime::Scattered(50));
    }
}
