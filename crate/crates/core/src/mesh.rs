//! Uniform tensor-product phase-space meshes.
//!
//! Axis 0 is the (single) physical coordinate and is always periodic. The
//! remaining axes are velocity coordinates truncated by walls. Elements are
//! numbered row-major over `(x, v1, v2)`, so all velocity cells that share an
//! x-cell are contiguous.

use crate::error::{Error, Result};

/// Largest number of axes a mesh may carry (1 space + 2 velocity).
pub const MAX_DIM: usize = 3;

/// Relative tolerance used when checking that explicit breakpoints are uniform.
const UNIFORM_RTOL: f64 = 1e-12;

/// One uniformly partitioned coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub n_cells: usize,
    pub periodic: bool,
}

impl AxisSpec {
    pub fn new(lo: f64, hi: f64, n_cells: usize, periodic: bool) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config(format!("axis bounds must be finite, got [{lo}, {hi}]")));
        }
        if n_cells == 0 {
            return Err(Error::Config("axis needs at least one cell".into()));
        }
        if !(hi > lo) || !((hi - lo) / n_cells as f64 > 0.0) {
            return Err(Error::Config(format!("axis [{lo}, {hi}] has zero or negative width")));
        }
        Ok(Self { lo, hi, n_cells, periodic })
    }

    /// Builds an axis from explicit cell faces, rejecting non-uniform spacing.
    pub fn from_breakpoints(faces: &[f64], periodic: bool) -> Result<Self> {
        if faces.len() < 2 {
            return Err(Error::Config("need at least two breakpoints".into()));
        }
        let n = faces.len() - 1;
        let axis = Self::new(faces[0], faces[n], n, periodic)?;
        let h = axis.width();
        for (i, w) in faces.windows(2).enumerate() {
            let hi = w[1] - w[0];
            if (hi - h).abs() > UNIFORM_RTOL * h.max(axis.length() * f64::EPSILON) {
                return Err(Error::Config(format!(
                    "non-uniform axis: cell {i} has width {hi}, expected {h}"
                )));
            }
        }
        Ok(axis)
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Cell width `(hi - lo) / n_cells`.
    #[inline]
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.n_cells as f64
    }

    #[inline]
    pub fn cell_lo(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.width()
    }

    /// Cell midpoint, written relative to the axis midpoint so that mirrored
    /// cells of a symmetric axis have exactly opposite centers.
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.lo + self.hi) + (i as f64 + 0.5 - 0.5 * self.n_cells as f64) * self.width()
    }

    /// Cell containing `coord`; the upper domain face belongs to the last cell.
    pub fn locate(&self, coord: f64) -> Option<(usize, f64)> {
        if !(coord >= self.lo && coord <= self.hi) {
            return None;
        }
        let h = self.width();
        let i = (((coord - self.lo) / h).floor() as usize).min(self.n_cells - 1);
        let xi = 2.0 * (coord - self.cell_lo(i)) / h - 1.0;
        Some((i, xi.clamp(-1.0, 1.0)))
    }

    /// Largest |coordinate| reached on the axis.
    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Low,
    High,
}

impl Side {
    #[inline]
    pub fn normal(self) -> f64 {
        match self {
            Side::Low => -1.0,
            Side::High => 1.0,
        }
    }

    #[inline]
    pub fn opposite(self) -> Side {
        match self {
            Side::Low => Side::High,
            Side::High => Side::Low,
        }
    }
}

/// Result of a neighbour query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Element(usize),
    Boundary,
}

/// Immutable Cartesian mesh of phase space (or of physical space only).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    axes: Vec<AxisSpec>,
    n_x_axes: usize,
    strides: [usize; MAX_DIM],
    n_elements: usize,
}

impl Mesh {
    /// Phase-space mesh with periodic x axes and walled v axes.
    pub fn build(x_axes: &[AxisSpec], v_axes: &[AxisSpec]) -> Result<Self> {
        if x_axes.len() != 1 {
            return Err(Error::Config(format!(
                "exactly one physical axis is supported, got {}",
                x_axes.len()
            )));
        }
        if v_axes.len() > 2 {
            return Err(Error::Config(format!(
                "at most two velocity axes are supported, got {}",
                v_axes.len()
            )));
        }
        if x_axes.iter().any(|a| !a.periodic) {
            return Err(Error::Config("physical axes must be periodic".into()));
        }
        if v_axes.iter().any(|a| a.periodic) {
            return Err(Error::Config("velocity axes must not be periodic".into()));
        }
        let mut axes = x_axes.to_vec();
        axes.extend_from_slice(v_axes);
        Self::from_axes(axes, x_axes.len())
    }

    fn from_axes(axes: Vec<AxisSpec>, n_x_axes: usize) -> Result<Self> {
        for a in &axes {
            AxisSpec::new(a.lo, a.hi, a.n_cells, a.periodic)?;
        }
        let mut strides = [0usize; MAX_DIM];
        let mut n = 1usize;
        for d in (0..axes.len()).rev() {
            strides[d] = n;
            n = n
                .checked_mul(axes[d].n_cells)
                .ok_or_else(|| Error::Config("element count overflows".into()))?;
        }
        Ok(Self { axes, n_x_axes, strides, n_elements: n })
    }

    /// The physical-space mesh underlying this phase-space mesh.
    pub fn x_mesh(&self) -> Mesh {
        Self::from_axes(self.axes[..self.n_x_axes].to_vec(), self.n_x_axes)
            .expect("sub-mesh of a valid mesh is valid")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn n_x_axes(&self) -> usize {
        self.n_x_axes
    }

    #[inline]
    pub fn n_v_axes(&self) -> usize {
        self.axes.len() - self.n_x_axes
    }

    #[inline]
    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    #[inline]
    pub fn axis(&self, a: usize) -> &AxisSpec {
        &self.axes[a]
    }

    #[inline]
    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    /// Number of velocity cells per x-cell.
    #[inline]
    pub fn n_v_elements(&self) -> usize {
        self.axes[self.n_x_axes..].iter().map(|a| a.n_cells).product()
    }

    #[inline]
    pub fn widths(&self) -> [f64; MAX_DIM] {
        let mut h = [0.0; MAX_DIM];
        for (d, a) in self.axes.iter().enumerate() {
            h[d] = a.width();
        }
        h
    }

    /// Element volume (identical for all elements).
    pub fn element_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.width()).product()
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.length()).product()
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    #[inline]
    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    #[inline]
    pub fn unflatten(&self, mut e: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        for d in 0..self.dim() {
            idx[d] = e / self.strides[d];
            e %= self.strides[d];
        }
        idx
    }

    pub fn center(&self, e: usize) -> [f64; MAX_DIM] {
        let idx = self.unflatten(e);
        let mut c = [0.0; MAX_DIM];
        for d in 0..self.dim() {
            c[d] = self.axes[d].center(idx[d]);
        }
        c
    }

    /// Neighbouring element across a face; periodic axes wrap, walls report
    /// [`Neighbor::Boundary`].
    pub fn neighbor(&self, e: usize, axis: usize, side: Side) -> Neighbor {
        let a = &self.axes[axis];
        let i = (e / self.strides[axis]) % a.n_cells;
        let j = match side {
            Side::High if i + 1 < a.n_cells => i + 1,
            Side::High if a.periodic => 0,
            Side::Low if i > 0 => i - 1,
            Side::Low if a.periodic => a.n_cells - 1,
            _ => return Neighbor::Boundary,
        };
        Neighbor::Element(e - i * self.strides[axis] + j * self.strides[axis])
    }

    /// Element holding a physical point and the point's reference coordinates.
    pub fn locate(&self, point: &[f64]) -> Result<(usize, [f64; MAX_DIM])> {
        if point.len() != self.dim() {
            return Err(Error::Domain(point.to_vec()));
        }
        let mut e = 0;
        let mut xi = [0.0; MAX_DIM];
        for (d, (&p, a)) in point.iter().zip(&self.axes).enumerate() {
            let (i, r) = a.locate(p).ok_or_else(|| Error::Domain(point.to_vec()))?;
            e += i * self.strides[d];
            xi[d] = r;
        }
        Ok((e, xi))
    }

    /// Maps reference coordinates of element `e` to physical coordinates.
    pub fn to_physical(&self, e: usize, xi: &[f64]) -> [f64; MAX_DIM] {
        let idx = self.unflatten(e);
        let mut p = [0.0; MAX_DIM];
        for d in 0..self.dim() {
            let a = &self.axes[d];
            p[d] = a.center(idx[d]) + 0.5 * a.width() * xi[d];
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn va_mesh(nx: usize, nv: usize) -> Mesh {
        Mesh::build(
            &[AxisSpec::new(0.0, 4.0 * PI, nx, true).unwrap()],
            &[AxisSpec::new(-6.0 * PI, 6.0 * PI, nv, false).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn landau_mesh_counts() {
        let m = va_mesh(32, 32);
        assert_eq!(m.n_elements(), 1024);
        assert!((m.axis(0).width() - 4.0 * PI / 32.0).abs() < 1e-15);
    }

    #[test]
    fn single_element_centers() {
        let m = Mesh::build(
            &[AxisSpec::new(0.0, 1.0, 1, true).unwrap()],
            &[AxisSpec::new(-1.0, 1.0, 1, false).unwrap()],
        )
        .unwrap();
        assert_eq!(m.n_elements(), 1);
        let c = m.center(0);
        assert_eq!((c[0], c[1]), (0.5, 0.0));
    }

    #[test]
    fn weibel_mesh_counts() {
        let m = Mesh::build(
            &[AxisSpec::new(0.0, 2.0 * PI / 0.2, 20, true).unwrap()],
            &[
                AxisSpec::new(-1.8, 1.8, 20, false).unwrap(),
                AxisSpec::new(-1.8, 1.8, 20, false).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(m.n_elements(), 8000);
        assert_eq!(m.n_v_elements(), 400);
    }

    #[test]
    fn neighbor_examples() {
        let m = va_mesh(4, 4);
        // x axis wraps
        let e = m.flatten(&[3, 1]);
        assert_eq!(m.neighbor(e, 0, Side::High), Neighbor::Element(m.flatten(&[0, 1])));
        // v axis wall
        let e = m.flatten(&[1, 3]);
        assert_eq!(m.neighbor(e, 1, Side::High), Neighbor::Boundary);
        let e = m.flatten(&[1, 0]);
        assert_eq!(m.neighbor(e, 1, Side::Low), Neighbor::Boundary);
        // interior
        let e = m.flatten(&[1, 2]);
        assert_eq!(m.neighbor(e, 1, Side::High), Neighbor::Element(m.flatten(&[1, 3])));
    }

    #[test]
    fn neighbor_involution_and_bijection() {
        let m = Mesh::build(
            &[AxisSpec::new(0.0, 1.0, 5, true).unwrap()],
            &[AxisSpec::new(-1.0, 1.0, 3, false).unwrap(), AxisSpec::new(-2.0, 2.0, 4, false).unwrap()],
        )
        .unwrap();
        for e in 0..m.n_elements() {
            let idx = m.unflatten(e);
            assert_eq!(m.flatten(&idx[..m.dim()]), e);
            for axis in 0..m.dim() {
                for side in [Side::Low, Side::High] {
                    if let Neighbor::Element(n) = m.neighbor(e, axis, side) {
                        assert_eq!(m.neighbor(n, axis, side.opposite()), Neighbor::Element(e));
                    }
                }
            }
        }
        let total: f64 = (0..m.n_elements()).map(|_| m.element_volume()).sum();
        assert!((total - m.volume()).abs() <= 1e-14 * m.volume());
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(AxisSpec::new(1.0, 1.0, 4, true).is_err());
        assert!(AxisSpec::new(0.0, 1.0, 0, true).is_err());
        assert!(AxisSpec::from_breakpoints(&[0.0, 0.25, 0.6, 1.0], true).is_err());
        assert!(AxisSpec::from_breakpoints(&[0.0, 0.25, 0.5, 0.75, 1.0], true).is_ok());
        let x = AxisSpec::new(0.0, 1.0, 4, false).unwrap();
        let v = AxisSpec::new(-1.0, 1.0, 4, false).unwrap();
        assert!(Mesh::build(&[x], &[v]).is_err());
    }

    #[test]
    fn locate_maps_back() {
        let m = va_mesh(8, 8);
        let p = [1.3, -2.7];
        let (e, xi) = m.locate(&p).unwrap();
        let q = m.to_physical(e, &xi);
        assert!((q[0] - p[0]).abs() < 1e-13 && (q[1] - p[1]).abs() < 1e-13);
        assert!(m.locate(&[-0.1, 0.0]).is_err());
    }
}
