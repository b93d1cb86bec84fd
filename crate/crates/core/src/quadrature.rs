//! Gauss–Legendre and periodic trapezoid rules.

use std::f64::consts::PI;

/// Nodes and weights of a one-dimensional rule on a finite interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `n`-point Gauss–Legendre rule on `[a, b]`.
///
/// Roots of P_n are found by Newton iteration from the Tricomi initial guess;
/// exact for polynomials up to degree `2n − 1`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Rule {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let half = (b - a) / 2.0;
    let mid = (a + b) / 2.0;
    for i in 0..n.div_ceil(2) {
        let theta = PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
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
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss–Legendre: `panels` equal sub-intervals with `per_panel`
/// nodes each.
pub fn composite_gauss_legendre(per_panel: usize, panels: usize, a: f64, b: f64) -> Rule {
    let base = gauss_legendre(per_panel, -1.0, 1.0);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(per_panel * panels);
    let mut weights = Vec::with_capacity(per_panel * panels);
    for j in 0..panels {
        let lo = a + j as f64 * h;
        for (x, w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(lo + (x + 1.0) * h / 2.0);
            weights.push(w * h / 2.0);
        }
    }
    Rule { nodes, weights }
}

/// Trapezoid rule for a 1-periodic integrand on `[0, 1)`: exact for
/// trigonometric polynomials of degree below `n`.
pub fn periodic_trapezoid(n: usize) -> Rule {
    assert!(n > 0, "trapezoid rule needs at least one node");
    let w = 1.0 / n as f64;
    Rule {
        nodes: (0..n).map(|i| i as f64 * w).collect(),
        weights: vec![w; n],
    }
}
