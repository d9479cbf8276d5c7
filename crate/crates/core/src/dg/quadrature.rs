//! Gauss–Legendre rules on `[-1, 1]` and their tensor products.

use std::f64::consts::PI;

use crate::mesh::MAX_DIM;

/// One-dimensional Gauss–Legendre nodes and weights on `[-1, 1]`, nodes in
/// increasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
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

/// Classical (unnormalized) Legendre polynomial `P_n(x)` and its derivative.
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
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensorized Gauss–Legendre rule on `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    points_per_axis: usize,
    nodes: Vec<[f64; MAX_DIM]>,
    weights: Vec<f64>,
    /// Per-point 1D node indices, axis 0 slowest.
    indices: Vec<[usize; MAX_DIM]>,
}

impl QuadratureRule {
    pub fn gauss(n_points: usize, dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        let (x, w) = gauss_legendre(n_points);
        let total = n_points.pow(dim as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut indices = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut idx = [0usize; MAX_DIM];
            for d in (0..dim).rev() {
                idx[d] = rem % n_points;
                rem /= n_points;
            }
            let mut p = [0.0; MAX_DIM];
            let mut wt = 1.0;
            for d in 0..dim {
                p[d] = x[idx[d]];
                wt *= w[idx[d]];
            }
            nodes.push(p);
            weights.push(wt);
            indices.push(idx);
        }
        Self { dim, points_per_axis: n_points, nodes, weights, indices }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn nodes(&self) -> &[[f64; MAX_DIM]] {
        &self.nodes
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn indices(&self) -> &[[usize; MAX_DIM]] {
        &self.indices
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(&p[..self.dim]))
            .sum()
    }
}

/// Convenience wrapper matching the operation name used throughout the crate.
pub fn gauss_rule(n_points: usize, dim: usize) -> QuadratureRule {
    QuadratureRule::gauss(n_points, dim)
}
