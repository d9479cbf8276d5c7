//! Orthonormal modal basis of the total-degree space `P^k` on `[-1, 1]^d`.
//!
//! Every mode is a product of normalized 1D Legendre polynomials
//! `sqrt((2n+1)/2) P_n`, so the reference mass matrix is the identity.

use crate::mesh::MAX_DIM;

/// Values of the normalized Legendre polynomials `0..=k` at `x`.
pub fn legendre_values(k: usize, x: f64, out: &mut [f64]) {
    let mut p0 = 1.0;
    let mut p1 = x;
    out[0] = std::f64::consts::FRAC_1_SQRT_2;
    if k >= 1 {
        out[1] = x * (1.5f64).sqrt();
    }
    for n in 2..=k {
        let nf = n as f64;
        let p2 = ((2.0 * nf - 1.0) * x * p1 - (nf - 1.0) * p0) / nf;
        p0 = p1;
        p1 = p2;
        out[n] = p2 * ((2.0 * nf + 1.0) / 2.0).sqrt();
    }
}

/// Values and derivatives of the normalized Legendre polynomials `0..=k`.
pub fn legendre_values_and_derivatives(k: usize, x: f64, val: &mut [f64], der: &mut [f64]) {
    // P_n' satisfies P_n' = P_{n-2}' + (2n-1) P_{n-1}.
    let mut p = vec![0.0; k + 1];
    let mut dp = vec![0.0; k + 1];
    p[0] = 1.0;
    if k >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for n in 2..=k {
        let nf = n as f64;
        p[n] = ((2.0 * nf - 1.0) * x * p[n - 1] - (nf - 1.0) * p[n - 2]) / nf;
        dp[n] = dp[n - 2] + (2.0 * nf - 1.0) * p[n - 1];
    }
    for n in 0..=k {
        let s = ((2.0 * n as f64 + 1.0) / 2.0).sqrt();
        val[n] = s * p[n];
        der[n] = s * dp[n];
    }
}

/// Modal basis of total degree `k` in `d` reference coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    degree: usize,
    dim: usize,
    modes: Vec<[usize; MAX_DIM]>,
}

/// Mode values and reference gradients at one point. Gradients are stored
/// mode-major: `gradients[m * dim + axis]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub gradients: Vec<f64>,
}

impl Basis {
    /// Modes are ordered by total degree, then lexicographically with axis 0
    /// varying slowest; mode 0 is always the constant.
    pub fn new(degree: usize, dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "basis dimension must be 1..={MAX_DIM}");
        assert!(degree <= 7, "polynomial degree above 7 is not supported");
        let mut modes = Vec::new();
        for total in 0..=degree {
            let mut idx = [0usize; MAX_DIM];
            collect_modes(dim, 0, total, &mut idx, &mut modes);
        }
        Self { degree, dim, modes }
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    #[inline]
    pub fn modes(&self) -> &[[usize; MAX_DIM]] {
        &self.modes
    }

    /// Index of the mode with the given per-axis degrees, if present.
    pub fn mode_index(&self, degrees: &[usize]) -> Option<usize> {
        self.modes
            .iter()
            .position(|m| m[..self.dim] == degrees[..self.dim])
    }

    /// Evaluates all modes at a reference point.
    pub fn values(&self, xi: &[f64], out: &mut [f64]) {
        let mut table = [[0.0; 8]; MAX_DIM];
        for d in 0..self.dim {
            legendre_values(self.degree, xi[d], &mut table[d]);
        }
        for (o, m) in out.iter_mut().zip(&self.modes) {
            let mut v = 1.0;
            for d in 0..self.dim {
                v *= table[d][m[d]];
            }
            *o = v;
        }
    }

    /// Mode values and reference-coordinate gradients at `xi`.
    pub fn eval(&self, xi: &[f64]) -> BasisEval {
        let mut val = [[0.0; 8]; MAX_DIM];
        let mut der = [[0.0; 8]; MAX_DIM];
        for d in 0..self.dim {
            legendre_values_and_derivatives(self.degree, xi[d], &mut val[d], &mut der[d]);
        }
        let nm = self.n_modes();
        let mut values = vec![0.0; nm];
        let mut gradients = vec![0.0; nm * self.dim];
        for (i, m) in self.modes.iter().enumerate() {
            values[i] = (0..self.dim).map(|d| val[d][m[d]]).product();
            for a in 0..self.dim {
                gradients[i * self.dim + a] = (0..self.dim)
                    .map(|d| if d == a { der[d][m[d]] } else { val[d][m[d]] })
                    .product();
            }
        }
        BasisEval { values, gradients }
    }
}

fn collect_modes(
    dim: usize,
    axis: usize,
    remaining: usize,
    idx: &mut [usize; MAX_DIM],
    out: &mut Vec<[usize; MAX_DIM]>,
) {
    if axis + 1 == dim {
        idx[axis] = remaining;
        out.push(*idx);
        return;
    }
    for p in (0..=remaining).rev() {
        idx[axis] = p;
        collect_modes(dim, axis + 1, remaining - p, idx, out);
    }
    idx[axis] = 0;
}

/// Binomial coefficient for the mode-count invariant.
pub fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}
