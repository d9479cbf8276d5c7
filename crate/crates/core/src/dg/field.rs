//! Piecewise-polynomial fields: storage, projection, evaluation and norms.

use std::sync::Arc;

use rayon::prelude::*;

use super::basis::Basis;
use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Points per axis used for L² projection of analytic data. Generous so that
/// discrete mass of smooth, narrow initial data is exact to roundoff.
pub fn projection_points(degree: usize) -> usize {
    (degree + 2).max(10)
}

/// Points per axis used for error norms (over-integration by one point).
#[inline]
pub fn norm_points(degree: usize) -> usize {
    degree + 3
}

/// Modal coefficients of a (possibly vector-valued) DG function.
///
/// Coefficients are stored element-major: index `(e * n_modes + m) * n_components + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct DGField {
    mesh: Arc<Mesh>,
    basis: Arc<Basis>,
    n_components: usize,
    coeffs: Vec<f64>,
}

impl DGField {
    pub fn zeros(mesh: Arc<Mesh>, basis: Arc<Basis>, n_components: usize) -> Self {
        assert_eq!(mesh.dim(), basis.dim(), "mesh and basis dimensions differ");
        assert!(n_components >= 1);
        let len = mesh.n_elements() * basis.n_modes() * n_components;
        Self { mesh, basis, n_components, coeffs: vec![0.0; len] }
    }

    pub fn from_coefficients(
        mesh: Arc<Mesh>,
        basis: Arc<Basis>,
        n_components: usize,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        if mesh.dim() != basis.dim() {
            return Err(Error::Config("mesh and basis dimensions differ".into()));
        }
        let want = mesh.n_elements() * basis.n_modes() * n_components;
        if coeffs.len() != want {
            return Err(Error::Input(format!(
                "coefficient array has {} entries, expected {want}",
                coeffs.len()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Input(format!("coefficient {i} is not finite")));
        }
        Ok(Self { mesh, basis, n_components, coeffs })
    }

    #[inline]
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    #[inline]
    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    #[inline]
    pub fn n_components(&self) -> usize {
        self.n_components
    }

    #[inline]
    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    #[inline]
    pub fn coeff(&self, e: usize, m: usize, c: usize) -> f64 {
        self.coeffs[(e * self.n_modes() + m) * self.n_components + c]
    }

    #[inline]
    pub fn set_coeff(&mut self, e: usize, m: usize, c: usize, v: f64) {
        let nm = self.n_modes();
        self.coeffs[(e * nm + m) * self.n_components + c] = v;
    }

    /// All coefficients of one element (`n_modes * n_components` values).
    #[inline]
    pub fn element(&self, e: usize) -> &[f64] {
        let n = self.n_modes() * self.n_components;
        &self.coeffs[e * n..(e + 1) * n]
    }

    /// True when both fields live on the same mesh with the same basis.
    pub fn same_space(&self, other: &DGField) -> bool {
        (Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh)
            && (Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis)
            && self.n_components == other.n_components
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &DGField, b: f64) -> DGField {
        debug_assert!(self.same_space(other));
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        DGField { coeffs, ..self.clone_shape() }
    }

    /// In place `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &DGField) {
        debug_assert!(self.same_space(other));
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.coeffs {
            *x *= a;
        }
    }

    fn clone_shape(&self) -> DGField {
        DGField {
            mesh: self.mesh.clone(),
            basis: self.basis.clone(),
            n_components: self.n_components,
            coeffs: Vec::new(),
        }
    }

    /// Values of all components at reference point `xi` of element `e`.
    pub fn eval_in_element(&self, e: usize, xi: &[f64], out: &mut [f64]) {
        let nm = self.n_modes();
        let mut phi = [0.0; 128];
        self.basis.values(xi, &mut phi[..nm]);
        let coeffs = self.element(e);
        for (c, o) in out.iter_mut().enumerate().take(self.n_components) {
            *o = (0..nm).map(|m| coeffs[m * self.n_components + c] * phi[m]).sum();
        }
    }

    /// Field value at a physical point. Points on interior faces resolve to
    /// the element on the high side; use [`eval_in_element`](Self::eval_in_element)
    /// to pick a side explicitly.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        let (e, xi) = self.mesh.locate(point)?;
        let mut out = vec![0.0; self.n_components];
        self.eval_in_element(e, &xi[..self.mesh.dim()], &mut out);
        Ok(out)
    }

    /// Integral of each component over the whole domain.
    pub fn integral(&self, c: usize) -> f64 {
        let d = self.mesh.dim();
        let jac = self.mesh.element_volume() / 2f64.powi(d as i32);
        let int_phi0 = 2f64.powf(d as f64 / 2.0);
        (0..self.mesh.n_elements())
            .map(|e| self.coeff(e, 0, c))
            .sum::<f64>()
            * jac
            * int_phi0
    }

    /// Mean of component `c` over the domain.
    pub fn mean(&self, c: usize) -> f64 {
        self.integral(c) / self.mesh.volume()
    }

    /// L² norm over all components, exact by orthonormality.
    pub fn l2_norm(&self) -> f64 {
        let d = self.mesh.dim();
        let jac = self.mesh.element_volume() / 2f64.powi(d as i32);
        (jac * self.coeffs.iter().map(|c| c * c).sum::<f64>()).sqrt()
    }

    /// L² norm of a single component.
    pub fn l2_norm_component(&self, c: usize) -> f64 {
        let d = self.mesh.dim();
        let jac = self.mesh.element_volume() / 2f64.powi(d as i32);
        let s: f64 = self.coeffs.iter().skip(c).step_by(self.n_components).map(|v| v * v).sum();
        (jac * s).sqrt()
    }

    /// L² distance of component `c` to a pointwise reference, by (k+3)-point
    /// Gauss quadrature per axis and element.
    pub fn l2_error<F>(&self, c: usize, reference: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let (sq, _) = self.error_sums(c, &reference);
        sq.sqrt()
    }

    /// `(L², L∞)` distance in one pass over the norm quadrature nodes.
    pub fn error_norms<F>(&self, c: usize, reference: F) -> (f64, f64)
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let (sq, mx) = self.error_sums(c, &reference);
        (sq.sqrt(), mx)
    }

    /// Maximum pointwise deviation over the norm quadrature nodes.
    pub fn linf_error<F>(&self, c: usize, reference: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.error_sums(c, &reference).1
    }

    fn error_sums<F>(&self, c: usize, reference: &F) -> (f64, f64)
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let d = self.mesh.dim();
        let rule = QuadratureRule::gauss(norm_points(self.degree()), d);
        let table = ModeTable::new(&self.basis, &rule);
        let jac = self.mesh.element_volume() / 2f64.powi(d as i32);
        let per_element: Vec<(f64, f64)> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|e| {
                let coeffs = self.element(e);
                let mut sq = 0.0;
                let mut mx: f64 = 0.0;
                for (q, (xi, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
                    let uh = table.eval(q, coeffs, self.n_components, c);
                    let p = self.mesh.to_physical(e, &xi[..d]);
                    let diff = uh - reference(&p[..d]);
                    sq += w * diff * diff;
                    mx = mx.max(diff.abs());
                }
                (jac * sq, mx)
            })
            .collect();
        per_element
            .iter()
            .fold((0.0, 0.0), |(s, m), &(a, b)| (s + a, f64::max(m, b)))
    }
}

/// Basis values tabulated at the nodes of a quadrature rule (or any node set).
#[derive(Debug, Clone)]
pub struct ModeTable {
    n_modes: usize,
    values: Vec<f64>,
}

impl ModeTable {
    pub fn new(basis: &Basis, rule: &QuadratureRule) -> Self {
        Self::from_points(basis, rule.nodes().iter().map(|p| &p[..basis.dim()]))
    }

    pub fn from_points<'a>(basis: &Basis, points: impl Iterator<Item = &'a [f64]>) -> Self {
        let nm = basis.n_modes();
        let mut values = Vec::new();
        let mut buf = vec![0.0; nm];
        for p in points {
            basis.values(p, &mut buf);
            values.extend_from_slice(&buf);
        }
        Self { n_modes: nm, values }
    }

    #[inline]
    pub fn row(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_modes..(q + 1) * self.n_modes]
    }

    #[inline]
    pub fn eval(&self, q: usize, coeffs: &[f64], n_components: usize, c: usize) -> f64 {
        self.row(q)
            .iter()
            .enumerate()
            .map(|(m, phi)| phi * coeffs[m * n_components + c])
            .sum()
    }
}

/// L² projection of a scalar function with the default projection rule.
pub fn l2_project<F>(f: F, mesh: Arc<Mesh>, basis: Arc<Basis>) -> Result<DGField>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = projection_points(basis.degree());
    l2_project_with(|p: &[f64], out: &mut [f64]| out[0] = f(p), 1, mesh, basis, n)
}

/// L² projection of a vector-valued function, one component per output slot.
pub fn l2_project_vector<F>(
    f: F,
    n_components: usize,
    mesh: Arc<Mesh>,
    basis: Arc<Basis>,
) -> Result<DGField>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let n = projection_points(basis.degree());
    l2_project_with(f, n_components, mesh, basis, n)
}

/// L² projection using `n_points` Gauss points per axis (at least `k + 2`).
pub fn l2_project_with<F>(
    f: F,
    n_components: usize,
    mesh: Arc<Mesh>,
    basis: Arc<Basis>,
    n_points: usize,
) -> Result<DGField>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    if mesh.dim() != basis.dim() {
        return Err(Error::Config("mesh and basis dimensions differ".into()));
    }
    let d = mesh.dim();
    let n_points = n_points.max(basis.degree() + 2);
    let rule = QuadratureRule::gauss(n_points, d);
    let table = ModeTable::new(&basis, &rule);
    let nm = basis.n_modes();
    let per = nm * n_components;
    let mut coeffs = vec![0.0; mesh.n_elements() * per];
    // Reference mass matrix is the identity, so coefficients are plain
    // quadrature moments.
    coeffs
        .par_chunks_mut(per)
        .enumerate()
        .try_for_each(|(e, out)| -> Result<()> {
            let mut vals = vec![0.0; n_components];
            for (q, (xi, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
                let p = mesh.to_physical(e, &xi[..d]);
                f(&p[..d], &mut vals);
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Input(format!(
                        "projected function is not finite at {:?}",
                        &p[..d]
                    )));
                }
                let phi = table.row(q);
                for m in 0..nm {
                    let wp = w * phi[m];
                    for c in 0..n_components {
                        out[m * n_components + c] += wp * vals[c];
                    }
                }
            }
            Ok(())
        })?;
    DGField::from_coefficients(mesh, basis, n_components, coeffs)
}
