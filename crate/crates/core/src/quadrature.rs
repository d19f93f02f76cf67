//! Small quadrature toolkit shared by the integrators.
//!
//! Everything here is deterministic: rules are computed once per call, and
//! reductions go through [`pairwise_sum`] so results do not depend on the
//! number of worker threads.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Newton iteration on the three-term recurrence, started from the
/// Tricomi asymptotic guess. Accurate to a few ulps for `n` up to a few
/// thousand.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = ((i as f64 + 0.75) / (nf + 0.5) * PI).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A Gauss-Legendre rule mapped onto `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .collect();
        half * pairwise_sum(&terms)
    }

    /// Nodes and weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }
}

/// Integrate over `(0, b]` with dyadic panels `[b 2^{-j-1}, b 2^{-j}]`
/// graded toward an integrable endpoint singularity at 0. Stops once a
/// panel contributes less than `tol` in absolute value (after at least
/// four panels), or after `max_panels`.
///
/// Returns the integral and the number of panels used, or `None` when the
/// panel contributions never dropped below `tol`.
pub fn dyadic_toward_zero<F: FnMut(f64) -> f64>(
    rule: &GaussRule,
    b: f64,
    tol: f64,
    max_panels: usize,
    mut f: F,
) -> Option<(f64, usize)> {
    let mut parts = Vec::new();
    let mut hi = b;
    for j in 0..max_panels {
        let lo = 0.5 * hi;
        let part = rule.integrate(lo, hi, &mut f);
        parts.push(part);
        hi = lo;
        if j >= 3 && part.abs() < tol {
            parts.reverse();
            return Some((pairwise_sum(&parts), j + 1));
        }
    }
    None
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 64] {
            let rule = GaussRule::new(n);
            let deg = 2 * n - 1;
            let got = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
            assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let (_, w) = gauss_legendre(257);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn dyadic_handles_log_endpoint() {
        let rule = GaussRule::new(16);
        let (v, _) = dyadic_toward_zero(&rule, 1.0, 1e-15, 200, f64::ln).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}
