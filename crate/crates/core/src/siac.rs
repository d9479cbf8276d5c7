//! Smoothness-increasing accuracy-conserving (SIAC) post-processing.
//!
//! The kernel is a symmetric combination of `2k+1` shifted centered
//! B-splines of order `k+1`, with coefficients chosen so that convolution
//! reproduces polynomials up to degree `2k`. Convolution with a DG field is
//! done exactly: each axis is split at kernel knots and mesh faces and every
//! piece is integrated with a Gauss rule that is exact for the integrand.

use std::io::Write;

use rayon::prelude::*;

use crate::dg::basis::legendre_values;
use crate::dg::{gauss_legendre, DGField};
use crate::error::{Error, Result};
use crate::mesh::{AxisSpec, MAX_DIM};

/// Centered cardinal B-spline of order `n` (degree `n-1`), supported on
/// `[-n/2, n/2]`, evaluated with the Cox–de Boor recurrence. The order-1
/// spline is the indicator of `[-1/2, 1/2)`.
pub fn bspline_eval(order: usize, x: f64) -> f64 {
    assert!(order >= 1, "B-spline order must be positive");
    let n = order;
    let half = n as f64 / 2.0;
    if !(x >= -half && x < half) {
        return 0.0;
    }
    let knot = |j: usize| j as f64 - half;
    let mut b: Vec<f64> = (0..n).map(|j| if x >= knot(j) && x < knot(j + 1) { 1.0 } else { 0.0 }).collect();
    for p in 2..=n {
        let inv = 1.0 / (p - 1) as f64;
        for j in 0..=(n - p) {
            b[j] = ((x - knot(j)) * b[j] + (knot(j + p) - x) * b[j + 1]) * inv;
        }
    }
    b[0]
}

/// Dense Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if a[piv * n + col].abs() < 1e-300 {
            return Err(Error::Internal("singular kernel moment system".into()));
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        for i in col + 1..n {
            let f = a[i * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[i * n + j] -= f * a[col * n + j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i * n + j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    Ok(x)
}

/// `∫ y^i ψ(y - γ) dy` for the order-`order` B-spline, exact by Gauss
/// quadrature on each polynomial piece.
fn bspline_moment(order: usize, i: usize, gamma: f64) -> f64 {
    let (xs, ws) = gauss_legendre((i + order) / 2 + 1);
    let half = order as f64 / 2.0;
    let mut total = 0.0;
    for j in 0..order {
        let a = j as f64 - half;
        let mid = a + 0.5;
        for (x, w) in xs.iter().zip(&ws) {
            let t = mid + 0.5 * x;
            total += 0.5 * w * (t + gamma).powi(i as i32) * bspline_eval(order, t);
        }
    }
    total
}

/// Relative residual `‖A c - e0‖∞ / (‖A‖∞ ‖c‖∞)` of the moment system.
pub fn kernel_residual(degree: usize, coeffs: &[f64]) -> f64 {
    let n = 2 * degree + 1;
    let order = degree + 1;
    let mut worst: f64 = 0.0;
    let mut a_norm: f64 = 0.0;
    for i in 0..n {
        let mut s = if i == 0 { -1.0 } else { 0.0 };
        let mut row = 0.0;
        for (g, c) in coeffs.iter().enumerate() {
            let m = bspline_moment(order, i, g as f64 - degree as f64);
            s += c * m;
            row += m.abs();
        }
        worst = worst.max(s.abs());
        a_norm = a_norm.max(row);
    }
    let c_norm = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    worst / (a_norm * c_norm).max(f64::MIN_POSITIVE)
}

/// Coefficients `c_γ`, `γ = -k..=k`, of the kernel that reproduces
/// polynomials of degree up to `2k`.
pub fn kernel_coefficients(degree: usize) -> Result<Vec<f64>> {
    let n = 2 * degree + 1;
    let order = degree + 1;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for g in 0..n {
            a[i * n + g] = bspline_moment(order, i, g as f64 - degree as f64);
        }
    }
    let mut rhs = vec![0.0; n];
    rhs[0] = 1.0;
    let c = solve_dense(a, rhs)?;
    let res = kernel_residual(degree, &c);
    if !(res <= 1e-12) {
        return Err(Error::Internal(format!("kernel moment system residual {res:e}")));
    }
    Ok(c)
}

/// Symmetric SIAC kernel `K(t) = Σ c_γ ψ(t - γ)` in units of the cell width.
#[derive(Debug, Clone, PartialEq)]
pub struct SiacKernel {
    degree: usize,
    coeffs: Vec<f64>,
}

impl SiacKernel {
    pub fn new(degree: usize) -> Result<Self> {
        Ok(Self { degree, coeffs: kernel_coefficients(degree)? })
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// B-spline order `k + 1`.
    #[inline]
    pub fn order(&self) -> usize {
        self.degree + 1
    }

    #[inline]
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Support is `[-w, w]` with `w = (3k+1)/2` cell widths.
    pub fn half_width(&self) -> f64 {
        (3 * self.degree + 1) as f64 / 2.0
    }

    /// Knots of the piecewise-polynomial kernel, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        let w = self.half_width();
        (0..=(3 * self.degree + 1)).map(|j| j as f64 - w).collect()
    }

    /// Unscaled kernel value at `t` (cell widths).
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.degree as f64;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(g, c)| c * bspline_eval(self.order(), t - (g as f64 - k)))
            .sum()
    }

    /// Kernel scaled to width `h`: `K(x/h)/h`.
    pub fn eval_scaled(&self, x: f64, h: f64) -> f64 {
        self.eval(x / h) / h
    }

    /// `∫ K_h(x - y) g(y) dy` for a function `g` that is polynomial of degree
    /// at most `max_degree` between kernel knots.
    pub fn convolve<F: Fn(f64) -> f64>(&self, g: F, x: f64, h: f64, max_degree: usize) -> f64 {
        let (xs, ws) = gauss_legendre((max_degree + self.degree) / 2 + 1);
        let bp = self.breakpoints();
        let mut total = 0.0;
        for w in bp.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (xi, wi) in xs.iter().zip(&ws) {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                total += 0.5 * (b - a) * wi * self.eval(t) * g(x - t * h);
            }
        }
        total
    }

    /// Per-offset, per-degree weights `∫ K(t) P̂_p(ξ(s - t)) dt` for a point
    /// at reference coordinate `xi` of its cell: `table[o][p]` belongs to
    /// the cell `offset_lo + o` relative to the point's cell.
    pub fn weights_1d(&self, xi: f64) -> OneDimWeights {
        let k = self.degree;
        let s = 0.5 * (xi + 1.0);
        let w = self.half_width();
        let mut cuts = self.breakpoints();
        for m in (s - w).floor() as i64..=(s + w).ceil() as i64 {
            let t = s - m as f64;
            if t > -w && t < w {
                cuts.push(t);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        // Offsets are taken from the pieces themselves so that rounding in
        // `s - t` can never select a cell outside the table.
        let pieces: Vec<(f64, f64, i64)> = cuts
            .windows(2)
            .filter(|p| p[1] > p[0])
            .map(|p| (p[0], p[1], (s - 0.5 * (p[0] + p[1])).floor() as i64))
            .collect();
        let offset_lo = pieces.iter().map(|p| p.2).min().unwrap_or(0);
        let offset_hi = pieces.iter().map(|p| p.2).max().unwrap_or(0) + 1;
        let n_off = (offset_hi - offset_lo) as usize;
        let (gx, gw) = gauss_legendre(k + 2);
        let mut table = vec![0.0; n_off * (k + 1)];
        let mut leg = [0.0; 8];
        for &(a, b, off) in &pieces {
            let tm = 0.5 * (a + b);
            let row = (off - offset_lo) as usize;
            for (x, wq) in gx.iter().zip(&gw) {
                let t = tm + 0.5 * (b - a) * x;
                let y = s - t - off as f64;
                legendre_values(k, 2.0 * y - 1.0, &mut leg);
                let kw = 0.5 * (b - a) * wq * self.eval(t);
                for p in 0..=k {
                    table[row * (k + 1) + p] += kw * leg[p];
                }
            }
        }
        OneDimWeights { degree: k, offset_lo, n_offsets: n_off, table }
    }
}

/// Convolution weights of one sample coordinate against neighbouring cells.
#[derive(Debug, Clone, PartialEq)]
pub struct OneDimWeights {
    degree: usize,
    pub offset_lo: i64,
    pub n_offsets: usize,
    table: Vec<f64>,
}

impl OneDimWeights {
    #[inline]
    pub fn row(&self, o: usize) -> &[f64] {
        &self.table[o * (self.degree + 1)..(o + 1) * (self.degree + 1)]
    }
}

/// Evaluation points for [`postprocess_field`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalGrid {
    /// Tensor Gauss nodes in every element, for error norms.
    Gauss { points_per_axis: usize },
    /// Cell-centered uniform samples, `n` per axis over the whole domain.
    Uniform { per_axis: Vec<usize> },
}

/// One sample coordinate along an axis: the cell it lies in and its weights.
#[derive(Debug, Clone)]
struct AxisSamples {
    coords: Vec<f64>,
    quad_weights: Vec<f64>,
    cells: Vec<usize>,
    /// Index into `tables` for each sample.
    table_of: Vec<usize>,
    tables: Vec<OneDimWeights>,
}

impl AxisSamples {
    fn gauss(axis: &AxisSpec, kernel: &SiacKernel, n: usize) -> Self {
        let (gx, gw) = gauss_legendre(n);
        let tables: Vec<OneDimWeights> = gx.iter().map(|&x| kernel.weights_1d(x)).collect();
        let h = axis.width();
        let mut s = Self { coords: vec![], quad_weights: vec![], cells: vec![], table_of: vec![], tables };
        for i in 0..axis.n_cells {
            for q in 0..n {
                s.coords.push(axis.center(i) + 0.5 * h * gx[q]);
                s.quad_weights.push(0.5 * h * gw[q]);
                s.cells.push(i);
                s.table_of.push(q);
            }
        }
        s
    }

    fn uniform(axis: &AxisSpec, kernel: &SiacKernel, n: usize) -> Self {
        let dx = axis.length() / n as f64;
        let mut s = Self { coords: vec![], quad_weights: vec![], cells: vec![], table_of: vec![], tables: vec![] };
        for j in 0..n {
            let x = axis.lo + (j as f64 + 0.5) * dx;
            let (cell, xi) = axis.locate(x).expect("sample inside axis");
            s.coords.push(x);
            s.quad_weights.push(dx);
            s.cells.push(cell);
            s.table_of.push(j);
            s.tables.push(kernel.weights_1d(xi));
        }
        s
    }

    fn weights(&self, j: usize) -> &OneDimWeights {
        &self.tables[self.table_of[j]]
    }
}

/// Filtered values on a tensor sample grid. Values are row-major over the
/// axes with axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSample {
    pub grid: EvalGrid,
    /// Sample coordinates per axis.
    pub coords: Vec<Vec<f64>>,
    /// Quadrature weight of each coordinate per axis (Gauss weights scaled to
    /// the cell for Gauss grids, the spacing for uniform grids).
    pub weights: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl FilteredSample {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for a in (0..self.dim()).rev() {
            let n = self.coords[a].len();
            idx[a] = flat % n;
            flat /= n;
        }
        idx
    }

    /// Physical coordinates of sample `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        let idx = self.multi_index(i);
        (0..self.dim()).map(|a| self.coords[a][idx[a]]).collect()
    }

    fn weight(&self, i: usize) -> f64 {
        let idx = self.multi_index(i);
        (0..self.dim()).map(|a| self.weights[a][idx[a]]).product()
    }

    /// `(L², L∞)` distance to `reference`. On a Gauss grid the L² value is a
    /// quadrature of the squared error; L∞ is the maximum over samples.
    pub fn error_norms<F: Fn(&[f64]) -> f64 + Sync>(&self, reference: F) -> (f64, f64) {
        let parts: Vec<(f64, f64)> = (0..self.len())
            .into_par_iter()
            .with_min_len(1024)
            .fold(
                || (0.0, 0.0),
                |(s, m), i| {
                    let d = self.values[i] - reference(&self.point(i));
                    (s + self.weight(i) * d * d, f64::max(m, d.abs()))
                },
            )
            .collect();
        let (s, m) = parts.iter().fold((0.0, 0.0f64), |(s, m), &(a, b)| (s + a, m.max(b)));
        (s.sqrt(), m)
    }

    pub fn l2_error<F: Fn(&[f64]) -> f64 + Sync>(&self, reference: F) -> f64 {
        self.error_norms(reference).0
    }

    pub fn linf_error<F: Fn(&[f64]) -> f64 + Sync>(&self, reference: F) -> f64 {
        self.error_norms(reference).1
    }

    /// Whitespace-separated columns: one coordinate column per axis followed
    /// by the value, preceded by a `#` header naming the columns.
    pub fn write_columns<W: Write>(&self, mut out: W, names: &[&str]) -> Result<()> {
        let mut header = String::from("#");
        for a in 0..self.dim() {
            header.push(' ');
            header.push_str(names.get(a).copied().unwrap_or("coord"));
        }
        header.push_str(" value");
        writeln!(out, "{header}")?;
        for i in 0..self.len() {
            let p = self.point(i);
            let cols: Vec<String> = p.iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(out, "{} {:.17e}", cols.join(" "), self.values[i])?;
        }
        Ok(())
    }
}

fn check_kernel(field: &DGField, kernel: &SiacKernel, component: usize) -> Result<()> {
    if kernel.degree() != field.degree() {
        return Err(Error::Config(format!(
            "kernel degree {} does not match field degree {}",
            kernel.degree(),
            field.degree()
        )));
    }
    if component >= field.n_components() {
        return Err(Error::Usage(format!("component {component} out of range")));
    }
    Ok(())
}

/// Sum over neighbouring elements of `c_{e,m} Π_a W_a[o_a][m_a]`, with
/// periodic wrap on every axis.
fn tensor_sum(field: &DGField, component: usize, base: &[usize; MAX_DIM], w: &[&OneDimWeights]) -> f64 {
    let mesh = field.mesh();
    let d = mesh.dim();
    let modes = field.basis().modes();
    let nc = field.n_components();
    let mut counts = [1usize; MAX_DIM];
    for a in 0..d {
        counts[a] = w[a].n_offsets;
    }
    let mut total = 0.0;
    let mut idx = [0usize; MAX_DIM];
    for o0 in 0..counts[0] {
        for o1 in 0..counts[1] {
            for o2 in 0..counts[2] {
                let o = [o0, o1, o2];
                let mut rows: [&[f64]; MAX_DIM] = [&[]; MAX_DIM];
                for a in 0..d {
                    let n = mesh.axis(a).n_cells as i64;
                    let cell = (base[a] as i64 + w[a].offset_lo + o[a] as i64).rem_euclid(n);
                    idx[a] = cell as usize;
                    rows[a] = w[a].row(o[a]);
                }
                let e = mesh.flatten(&idx[..d]);
                let coeffs = field.element(e);
                let mut s = 0.0;
                for (m, md) in modes.iter().enumerate() {
                    let mut p = coeffs[m * nc + component];
                    for a in 0..d {
                        p *= rows[a][md[a]];
                    }
                    s += p;
                }
                total += s;
            }
        }
    }
    total
}

/// Filtered value of one component at a physical point.
pub fn postprocess_point(field: &DGField, component: usize, point: &[f64], kernel: &SiacKernel) -> Result<f64> {
    check_kernel(field, kernel, component)?;
    let mesh = field.mesh();
    let d = mesh.dim();
    let (e, xi) = mesh.locate(point)?;
    let base = mesh.unflatten(e);
    let tables: Vec<OneDimWeights> = (0..d).map(|a| kernel.weights_1d(xi[a])).collect();
    let refs: Vec<&OneDimWeights> = tables.iter().collect();
    Ok(tensor_sum(field, component, &base, &refs))
}

/// Filtered values of one component on a whole sample grid.
pub fn postprocess_field(
    field: &DGField,
    component: usize,
    kernel: &SiacKernel,
    grid: &EvalGrid,
) -> Result<FilteredSample> {
    check_kernel(field, kernel, component)?;
    let mesh = field.mesh();
    let d = mesh.dim();
    let axes: Vec<AxisSamples> = match grid {
        EvalGrid::Gauss { points_per_axis } => {
            if *points_per_axis == 0 {
                return Err(Error::Usage("Gauss grid needs at least one point".into()));
            }
            (0..d).map(|a| AxisSamples::gauss(mesh.axis(a), kernel, *points_per_axis)).collect()
        }
        EvalGrid::Uniform { per_axis } => {
            if per_axis.len() != d || per_axis.contains(&0) {
                return Err(Error::Usage(format!("uniform grid needs {d} positive counts")));
            }
            (0..d).map(|a| AxisSamples::uniform(mesh.axis(a), kernel, per_axis[a])).collect()
        }
    };
    let lens: Vec<usize> = axes.iter().map(|a| a.coords.len()).collect();
    let total: usize = lens.iter().product();
    let inner: usize = lens[1..].iter().product();
    let mut values = vec![0.0; total];
    values.par_chunks_mut(inner).enumerate().for_each(|(j0, out)| {
        for (r, v) in out.iter_mut().enumerate() {
            let mut rem = r;
            let mut j = [0usize; MAX_DIM];
            j[0] = j0;
            for a in (1..d).rev() {
                j[a] = rem % lens[a];
                rem /= lens[a];
            }
            let mut base = [0usize; MAX_DIM];
            let mut w: Vec<&OneDimWeights> = Vec::with_capacity(d);
            for a in 0..d {
                base[a] = axes[a].cells[j[a]];
                w.push(axes[a].weights(j[a]));
            }
            *v = tensor_sum(field, component, &base, &w);
        }
    });
    Ok(FilteredSample {
        grid: grid.clone(),
        coords: axes.iter().map(|a| a.coords.clone()).collect(),
        weights: axes.iter().map(|a| a.quad_weights.clone()).collect(),
        values,
    })
}

fn binomial_f(n: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Central divided difference `∂_h^λ w`, the composition of
/// `(w(x + h/2 e_a) - w(x - h/2 e_a)) / h` taken `λ_a` times along each axis,
/// evaluated in closed form: `Σ_j (-1)^j C(λ, j) w(x + (λ/2 - j) h) / h^λ`
/// per axis, tensorized.
pub fn divided_difference<'a, F>(w: F, lambda: &[usize], h: &[f64]) -> impl Fn(&[f64]) -> f64 + 'a
where
    F: Fn(&[f64]) -> f64 + 'a,
{
    assert_eq!(lambda.len(), h.len(), "one width per multi-index entry");
    let lambda = lambda.to_vec();
    let h = h.to_vec();
    move |x: &[f64]| {
        let d = lambda.len();
        let counts: Vec<usize> = lambda.iter().map(|l| l + 1).collect();
        let total: usize = counts.iter().product();
        let mut p = x.to_vec();
        let mut sum = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            let mut coef = 1.0;
            for a in (0..d).rev() {
                let j = rem % counts[a];
                rem /= counts[a];
                let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
                coef *= sign * binomial_f(lambda[a], j);
                p[a] = x[a] + (lambda[a] as f64 / 2.0 - j as f64) * h[a];
            }
            sum += coef * w(&p);
        }
        let scale: f64 = lambda.iter().zip(&h).map(|(&l, &ha)| ha.powi(l as i32)).product();
        sum / scale
    }
}

/// Single central difference quotient along `axis`.
pub fn central_difference<'a, F>(w: F, axis: usize, h: f64) -> impl Fn(&[f64]) -> f64 + 'a
where
    F: Fn(&[f64]) -> f64 + 'a,
{
    move |x: &[f64]| {
        let mut p = x.to_vec();
        p[axis] = x[axis] + 0.5 * h;
        let a = w(&p);
        p[axis] = x[axis] - 0.5 * h;
        (a - w(&p)) / h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::{l2_project, Basis};
    use crate::mesh::Mesh;
    use proptest::prelude::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn low_order_splines() {
        assert_eq!(bspline_eval(1, 0.0), 1.0);
        assert_eq!(bspline_eval(1, 0.75), 0.0);
        assert_eq!(bspline_eval(2, 0.0), 1.0);
        assert!((bspline_eval(2, 0.5) - 0.5).abs() < 1e-15);
        assert!((bspline_eval(2, -0.5) - 0.5).abs() < 1e-15);
        assert_eq!(bspline_eval(2, 1.0), 0.0);
        // Quadratic: 3/4 - x² in the middle piece.
        assert!((bspline_eval(3, 0.2) - (0.75 - 0.04)).abs() < 1e-15);
    }

    #[test]
    fn spline_mass_is_one() {
        for n in 1..=6 {
            assert!((bspline_moment(n, 0, 0.0) - 1.0).abs() < 1e-14);
            // Second moment of the order-n spline is n/12.
            assert!((bspline_moment(n, 2, 0.0) - n as f64 / 12.0).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in -3.0f64..3.0, n in 1usize..7) {
            let s: f64 = (-10..=10).map(|j| bspline_eval(n, x - j as f64)).sum();
            prop_assert!((s - 1.0).abs() < 1e-13);
        }

        #[test]
        fn spline_nonnegative(x in -4.0f64..4.0, n in 1usize..7) {
            let v = bspline_eval(n, x);
            prop_assert!(v >= 0.0);
            if x.abs() >= n as f64 / 2.0 {
                prop_assert_eq!(v, 0.0);
            }
        }

        #[test]
        fn reproduction_at_random_points(x in -5.0f64..5.0, k in 0usize..4) {
            let ker = SiacKernel::new(k).unwrap();
            for m in 0..=(2 * k) {
                let got = ker.convolve(|y| y.powi(m as i32), x, 0.3, m);
                let want = x.powi(m as i32);
                prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
            }
        }

        #[test]
        fn filter_is_linear(a in -2.0f64..2.0, b in -1.0f64..1.0, x in 0.1f64..6.2) {
            let (field, ker) = periodic_sine(8, 2);
            let mut g = field.clone();
            g.scale(a);
            let shift = l2_project(|_| b, field.mesh().clone(), field.basis().clone()).unwrap();
            g.axpy(1.0, &shift);
            let v = postprocess_point(&field, 0, &[x], &ker).unwrap();
            let w = postprocess_point(&g, 0, &[x], &ker).unwrap();
            prop_assert!((w - (a * v + b)).abs() < 1e-13);
        }
    }

    #[test]
    fn first_degree_coefficients() {
        let c = kernel_coefficients(1).unwrap();
        let want = [-1.0 / 12.0, 7.0 / 6.0, -1.0 / 12.0];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(kernel_coefficients(0).unwrap().len(), 1);
        assert!((kernel_coefficients(0).unwrap()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coefficient_invariants() {
        for k in 0..=3 {
            let c = kernel_coefficients(k).unwrap();
            assert_eq!(c.len(), 2 * k + 1);
            assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for g in 0..c.len() {
                assert!((c[g] - c[c.len() - 1 - g]).abs() < 1e-12);
            }
            assert!(kernel_residual(k, &c) <= 1e-12);
        }
    }

    #[test]
    fn kernel_mass_and_support() {
        for k in 0..=3 {
            let ker = SiacKernel::new(k).unwrap();
            for h in [0.1, 1.0, 3.7] {
                let m = ker.convolve(|_| 1.0, 0.0, h, 0);
                assert!((m - 1.0).abs() < 1e-12);
            }
            let w = ker.half_width();
            assert_eq!(ker.eval(w), 0.0);
            assert_eq!(ker.eval(-w - 1e-12), 0.0);
            assert!(ker.eval(0.0) > 0.0);
        }
    }

    #[test]
    fn weights_sum_to_kernel_mass() {
        // Σ_o W[o][0] / P̂_0 = ∫ K = 1 for any evaluation point.
        for k in 0..=3 {
            let ker = SiacKernel::new(k).unwrap();
            for xi in [-1.0, -0.3, 0.0, 0.77, 1.0] {
                let w = ker.weights_1d(xi);
                let s: f64 = (0..w.n_offsets).map(|o| w.row(o)[0]).sum();
                assert!((s * std::f64::consts::SQRT_2 - 1.0).abs() < 1e-13);
            }
        }
    }

    fn periodic_sine(n: usize, k: usize) -> (DGField, SiacKernel) {
        let mesh = Mesh::build(&[AxisSpec::new(0.0, 2.0 * PI, n, true).unwrap()], &[]).unwrap();
        let f = l2_project(|x| x[0].sin(), Arc::new(mesh), Arc::new(Basis::new(k, 1))).unwrap();
        (f, SiacKernel::new(k).unwrap())
    }

    #[test]
    fn constant_field_is_unchanged() {
        for k in 1..=3 {
            let mesh = Mesh::build(
                &[AxisSpec::new(0.0, 3.0, 7, true).unwrap()],
                &[AxisSpec::new(-2.0, 2.0, 9, false).unwrap()],
            )
            .unwrap();
            let f = l2_project(|_| 2.5, Arc::new(mesh), Arc::new(Basis::new(k, 2))).unwrap();
            let ker = SiacKernel::new(k).unwrap();
            for p in [[0.1, -1.9], [1.5, 0.0], [2.99, 1.3]] {
                let v = postprocess_point(&f, 0, &p, &ker).unwrap();
                assert!((v - 2.5).abs() < 1e-13, "k={k} {v}");
            }
        }
    }

    #[test]
    fn representable_polynomials_are_reproduced_inside() {
        // Non-periodic polynomial on a long mesh, sampled away from the seam.
        for k in 1..=3 {
            let mesh = Mesh::build(&[AxisSpec::new(0.0, 40.0, 40, true).unwrap()], &[]).unwrap();
            let basis = Arc::new(Basis::new(k, 1));
            let ker = SiacKernel::new(k).unwrap();
            for m in 0..=k {
                let f = l2_project(|x| (x[0] / 10.0).powi(m as i32), Arc::new(mesh.clone()), basis.clone()).unwrap();
                for i in 0..20 {
                    let x = 10.0 + i as f64 * 1.013;
                    let want = (x / 10.0).powi(m as i32);
                    let got = postprocess_point(&f, 0, &[x], &ker).unwrap();
                    assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "k={k} m={m}");
                }
            }
        }
    }

    #[test]
    fn grid_matches_pointwise() {
        let mesh = Mesh::build(
            &[AxisSpec::new(0.0, 4.0, 4, true).unwrap()],
            &[AxisSpec::new(-1.0, 1.0, 5, false).unwrap()],
        )
        .unwrap();
        let f = l2_project(
            |x| (x[0] * PI / 2.0).sin() * (1.0 + x[1] * x[1]),
            Arc::new(mesh),
            Arc::new(Basis::new(2, 2)),
        )
        .unwrap();
        let ker = SiacKernel::new(2).unwrap();
        for grid in [EvalGrid::Gauss { points_per_axis: 3 }, EvalGrid::Uniform { per_axis: vec![7, 6] }] {
            let s = postprocess_field(&f, 0, &ker, &grid).unwrap();
            for i in (0..s.len()).step_by(5) {
                let p = s.point(i);
                let v = postprocess_point(&f, 0, &p, &ker).unwrap();
                assert!((v - s.values[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn filtered_sine_superconverges() {
        for k in 1..=2 {
            let mut errs = Vec::new();
            for n in [8, 16, 32] {
                let (f, ker) = periodic_sine(n, k);
                let s = postprocess_field(&f, 0, &ker, &EvalGrid::Gauss { points_per_axis: k + 3 }).unwrap();
                errs.push(s.l2_error(|x| x[0].sin()));
            }
            for w in errs.windows(2) {
                let order = (w[0] / w[1]).log2();
                assert!(order >= (2 * k + 1) as f64 - 0.1, "k={k} order={order} {errs:?}");
            }
        }
    }

    #[test]
    fn gauss_grid_norm_matches_dg_norm() {
        // With the identity kernel replaced by raw values this is just a
        // quadrature check: the sample weights integrate 1 to the volume.
        let (f, ker) = periodic_sine(6, 1);
        let s = postprocess_field(&f, 0, &ker, &EvalGrid::Gauss { points_per_axis: 4 }).unwrap();
        let zero = s.l2_error(|_| 0.0);
        assert!((zero - f.l2_norm()).abs() < 0.05 * f.l2_norm());
        let w: f64 = s.weights[0].iter().sum();
        assert!((w - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn mismatched_degree_is_rejected() {
        let (f, _) = periodic_sine(6, 1);
        let ker = SiacKernel::new(2).unwrap();
        assert!(matches!(postprocess_point(&f, 0, &[1.0], &ker), Err(Error::Config(_))));
        assert!(matches!(
            postprocess_point(&f, 0, &[10.0], &SiacKernel::new(1).unwrap()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn columns_round_trip_values() {
        let (f, ker) = periodic_sine(4, 1);
        let s = postprocess_field(&f, 0, &ker, &EvalGrid::Uniform { per_axis: vec![5] }).unwrap();
        let mut buf = Vec::new();
        s.write_columns(&mut buf, &["x"]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# x value");
        for (i, l) in lines.enumerate() {
            let cols: Vec<f64> = l.split_whitespace().map(|c| c.parse().unwrap()).collect();
            assert_eq!(cols[0], s.coords[0][i]);
            assert_eq!(cols[1], s.values[i]);
        }
    }

    #[test]
    fn divided_difference_examples() {
        let d = divided_difference(|x: &[f64]| x[0], &[1], &[0.3]);
        for x in [-1.0, 0.0, 2.5] {
            assert!((d(&[x]) - 1.0).abs() < 1e-14);
        }
        let d = divided_difference(|x: &[f64]| x[0] * x[0], &[1], &[0.25]);
        for x in [-1.0, 0.0, 2.5] {
            assert!((d(&[x]) - 2.0 * x).abs() < 1e-13);
        }
        let h = 0.2;
        let d = divided_difference(|x: &[f64]| x[0].sin(), &[2], &[h]);
        let factor = ((h / 2.0).sin() / (h / 2.0)).powi(2);
        for x in [0.3, 1.1, 2.0] {
            assert!((d(&[x]) + x.sin() * factor).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_composition() {
        let w = |x: &[f64]| (x[0] * 1.3).sin() * (0.7 * x[1]).exp() + x[0] * x[1] * x[1];
        let h = [0.11, 0.07];
        let closed = divided_difference(w, &[2, 1], &h);
        let c1 = central_difference(w, 0, h[0]);
        let c2 = central_difference(c1, 0, h[0]);
        let c3 = central_difference(c2, 1, h[1]);
        for p in [[0.2, 0.4], [1.0, -0.3], [-0.6, 0.9]] {
            assert!((closed(&p) - c3(&p)).abs() < 1e-9 * c3(&p).abs().max(1.0));
        }
    }
}
