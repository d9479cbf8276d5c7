//! Semi-discrete DG operators for the reduced Vlasov–Ampère (1D1V) and
//! streaming-Weibel Vlasov–Maxwell (1D2V) systems.
//!
//! The distribution `f` lives on the phase-space mesh with the total-degree
//! basis `P^k`; the electromagnetic components live on the x-mesh with the 1D
//! basis of the same degree. All interface terms use upwind fluxes. Velocity
//! walls follow the one-sided convention `[g] = g n`, `{g} = g/2`, which
//! reduces to zero inflow and pure outflow.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dg::basis::legendre_values_and_derivatives;
use crate::dg::{gauss_legendre, Basis, DGField};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Neighbor, Side, MAX_DIM};

/// Which reduced kinetic system is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    /// `f(x, v)` with electric field `E(x)`; no magnetic field.
    VlasovAmpere1D1V,
    /// `f(x2, v1, v2)` with `E1(x2)`, `E2(x2)`, `B3(x2)`.
    StreamingWeibel1D2V,
}

/// Component slots of the field vector.
pub mod component {
    pub const E: usize = 0;
    pub const E1: usize = 0;
    pub const E2: usize = 1;
    pub const B3: usize = 2;
}

impl SystemKind {
    pub fn n_v_axes(self) -> usize {
        match self {
            SystemKind::VlasovAmpere1D1V => 1,
            SystemKind::StreamingWeibel1D2V => 2,
        }
    }

    pub fn n_field_components(self) -> usize {
        match self {
            SystemKind::VlasovAmpere1D1V => 1,
            SystemKind::StreamingWeibel1D2V => 3,
        }
    }

    pub fn field_names(self) -> &'static [&'static str] {
        match self {
            SystemKind::VlasovAmpere1D1V => &["E"],
            SystemKind::StreamingWeibel1D2V => &["E1", "E2", "B3"],
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            SystemKind::VlasovAmpere1D1V => "va1d1v",
            SystemKind::StreamingWeibel1D2V => "sw1d2v",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "va1d1v" => Some(SystemKind::VlasovAmpere1D1V),
            "sw1d2v" => Some(SystemKind::StreamingWeibel1D2V),
            _ => None,
        }
    }

    /// Speed multiplying `∂f/∂x`: `v` for VA, `v2` for SW.
    #[inline]
    pub fn transport_speed(self, v: &[f64]) -> f64 {
        match self {
            SystemKind::VlasovAmpere1D1V => v[0],
            SystemKind::StreamingWeibel1D2V => v[1],
        }
    }

    /// Component `b` of the velocity-space acceleration `E + v × B`.
    #[inline]
    pub fn acceleration(self, fields: &[f64], v: &[f64], b: usize) -> f64 {
        match self {
            SystemKind::VlasovAmpere1D1V => fields[component::E],
            SystemKind::StreamingWeibel1D2V => {
                if b == 0 {
                    fields[component::E1] + v[1] * fields[component::B3]
                } else {
                    fields[component::E2] - v[0] * fields[component::B3]
                }
            }
        }
    }
}

/// Distribution function, field components and time.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub kind: SystemKind,
    pub f: DGField,
    pub fields: DGField,
    pub t: f64,
}

impl SimulationState {
    pub fn new(kind: SystemKind, f: DGField, fields: DGField, t: f64) -> Result<Self> {
        let mesh = f.mesh();
        if mesh.n_v_axes() != kind.n_v_axes() {
            return Err(Error::Config(format!(
                "{:?} needs {} velocity axes, mesh has {}",
                kind,
                kind.n_v_axes(),
                mesh.n_v_axes()
            )));
        }
        if fields.n_components() != kind.n_field_components() {
            return Err(Error::Config(format!(
                "{:?} needs {} field components, got {}",
                kind,
                kind.n_field_components(),
                fields.n_components()
            )));
        }
        if **fields.mesh() != mesh.x_mesh() {
            return Err(Error::Config("field mesh differs from the phase-space x-mesh".into()));
        }
        if fields.degree() != f.degree() {
            return Err(Error::Config("field and distribution degrees differ".into()));
        }
        if f.n_components() != 1 {
            return Err(Error::Config("distribution must be scalar".into()));
        }
        Ok(Self { kind, f, fields, t })
    }

    pub fn lin_comb(&self, a: f64, other: &SimulationState, b: f64) -> SimulationState {
        SimulationState {
            kind: self.kind,
            f: self.f.lin_comb(a, &other.f, b),
            fields: self.fields.lin_comb(a, &other.fields, b),
            t: a * self.t + b * other.t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.f.is_finite() && self.fields.is_finite() && self.t.is_finite()
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.f.degree()
    }
}

/// Velocity moments of `f` on the x-mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub rho: DGField,
    /// One component per velocity axis.
    pub current: DGField,
}

/// Upwind flux `s * f_upwind` through a face with normal speed `s`, where
/// `left` is the trace on the low side and `right` on the high side.
#[inline]
pub fn upwind_flux(speed: f64, left: f64, right: f64) -> f64 {
    if speed >= 0.0 {
        speed * left
    } else {
        speed * right
    }
}

/// Central flux `{s f}`; the upwind flux reduces to this when `left == right`.
#[inline]
pub fn central_flux(speed: f64, left: f64, right: f64) -> f64 {
    0.5 * speed * (left + right)
}

/// Upwind traces `(Ẽ1, B̃3)` for the 1D curl pair `∂t B3 = ∂x E1`,
/// `∂t E1 = ∂x B3`: `Ẽ = {E} + ½[B]_τ`, `B̃ = {B} − ½[E]_τ`.
#[inline]
pub fn maxwell_upwind_flux(e_left: f64, b_left: f64, e_right: f64, b_right: f64) -> (f64, f64) {
    let e = 0.5 * (e_left + e_right) + 0.5 * (b_right - b_left);
    let b = 0.5 * (b_left + b_right) + 0.5 * (e_right - e_left);
    (e, b)
}

#[derive(Debug, Clone)]
struct FaceTable {
    weights: Vec<f64>,
    /// Full reference coordinates of each face node.
    points: Vec<[f64; MAX_DIM]>,
    /// 1D Gauss index of each face node per axis (normal axis entry unused).
    idx: Vec<[usize; MAX_DIM]>,
    /// Mode values at the nodes, `phi[q * n_modes + m]`.
    phi: Vec<f64>,
}

/// Precomputed tables for assembling the Vlasov residual on a fixed mesh.
#[derive(Debug, Clone)]
pub struct KineticOperator {
    kind: SystemKind,
    mesh: Arc<Mesh>,
    x_mesh: Arc<Mesh>,
    basis: Arc<Basis>,
    field_basis: Arc<Basis>,
    nq: usize,
    gauss_w: Vec<f64>,
    vol_weights: Vec<f64>,
    vol_points: Vec<[f64; MAX_DIM]>,
    vol_idx: Vec<[usize; MAX_DIM]>,
    vol_phi: Vec<f64>,
    /// Reference gradients, `vol_dphi[(q * n_modes + m) * dim + axis]`.
    vol_dphi: Vec<f64>,
    /// `faces[axis][side]`, side 0 = low, 1 = high.
    faces: Vec<[FaceTable; 2]>,
    /// 1D field basis at the Gauss nodes, `[q * (k+1) + p]`.
    field_phi: Vec<f64>,
    field_dphi: Vec<f64>,
    /// 1D field basis at ξ = -1 and ξ = +1.
    field_phi_ends: [Vec<f64>; 2],
}

impl KineticOperator {
    pub fn new(kind: SystemKind, mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        if mesh.n_v_axes() != kind.n_v_axes() || mesh.n_x_axes() != 1 {
            return Err(Error::Config(format!(
                "{:?} cannot run on a mesh with {} velocity axes",
                kind,
                mesh.n_v_axes()
            )));
        }
        let d = mesh.dim();
        let basis = Arc::new(Basis::new(degree, d));
        let field_basis = Arc::new(Basis::new(degree, 1));
        let x_mesh = Arc::new(mesh.x_mesh());
        let nq = degree + 2;
        let (gx, gw) = gauss_legendre(nq);
        let nm = basis.n_modes();

        let rule = crate::dg::gauss_rule(nq, d);
        let mut vol_phi = Vec::with_capacity(rule.len() * nm);
        let mut vol_dphi = Vec::with_capacity(rule.len() * nm * d);
        for p in rule.nodes() {
            let ev = basis.eval(&p[..d]);
            vol_phi.extend_from_slice(&ev.values);
            vol_dphi.extend_from_slice(&ev.gradients);
        }

        let mut faces = Vec::with_capacity(d);
        for a in 0..d {
            let tangential: Vec<usize> = (0..d).filter(|&b| b != a).collect();
            let nf = nq.pow(tangential.len() as u32);
            let make = |xi_a: f64| {
                let mut t = FaceTable {
                    weights: Vec::with_capacity(nf),
                    points: Vec::with_capacity(nf),
                    idx: Vec::with_capacity(nf),
                    phi: Vec::with_capacity(nf * nm),
                };
                let mut buf = vec![0.0; nm];
                for flat in 0..nf {
                    let mut rem = flat;
                    let mut idx = [0usize; MAX_DIM];
                    for &b in tangential.iter().rev() {
                        idx[b] = rem % nq;
                        rem /= nq;
                    }
                    let mut p = [0.0; MAX_DIM];
                    let mut w = 1.0;
                    for b in 0..d {
                        if b == a {
                            p[b] = xi_a;
                        } else {
                            p[b] = gx[idx[b]];
                            w *= gw[idx[b]];
                        }
                    }
                    basis.values(&p[..d], &mut buf);
                    t.weights.push(w);
                    t.points.push(p);
                    t.idx.push(idx);
                    t.phi.extend_from_slice(&buf);
                }
                t
            };
            faces.push([make(-1.0), make(1.0)]);
        }

        let nf1 = degree + 1;
        let mut field_phi = vec![0.0; nq * nf1];
        let mut field_dphi = vec![0.0; nq * nf1];
        for (q, &x) in gx.iter().enumerate() {
            legendre_values_and_derivatives(
                degree,
                x,
                &mut field_phi[q * nf1..(q + 1) * nf1],
                &mut field_dphi[q * nf1..(q + 1) * nf1],
            );
        }
        let mut lo = vec![0.0; nf1];
        let mut hi = vec![0.0; nf1];
        field_basis.values(&[-1.0], &mut lo);
        field_basis.values(&[1.0], &mut hi);

        Ok(Self {
            kind,
            mesh,
            x_mesh,
            basis,
            field_basis,
            nq,
            gauss_w: gw,
            vol_weights: rule.weights().to_vec(),
            vol_points: rule.nodes().to_vec(),
            vol_idx: rule.indices().to_vec(),
            vol_phi,
            vol_dphi,
            faces,
            field_phi,
            field_dphi,
            field_phi_ends: [lo, hi],
        })
    }

    #[inline]
    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    #[inline]
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    #[inline]
    pub fn x_mesh(&self) -> &Arc<Mesh> {
        &self.x_mesh
    }

    #[inline]
    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    #[inline]
    pub fn field_basis(&self) -> &Arc<Basis> {
        &self.field_basis
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    /// Zero distribution and zero fields on this operator's spaces.
    pub fn zero_state(&self) -> SimulationState {
        SimulationState {
            kind: self.kind,
            f: DGField::zeros(self.mesh.clone(), self.basis.clone(), 1),
            fields: DGField::zeros(
                self.x_mesh.clone(),
                self.field_basis.clone(),
                self.kind.n_field_components(),
            ),
            t: 0.0,
        }
    }

    fn check_state(&self, state: &SimulationState) -> Result<()> {
        if state.kind != self.kind {
            return Err(Error::Config(format!(
                "operator built for {:?}, state is {:?}",
                self.kind, state.kind
            )));
        }
        if **state.f.mesh() != *self.mesh || **state.f.basis() != *self.basis {
            return Err(Error::Config("distribution mesh or basis mismatch".into()));
        }
        if **state.fields.mesh() != *self.x_mesh
            || **state.fields.basis() != *self.field_basis
            || state.fields.n_components() != self.kind.n_field_components()
        {
            return Err(Error::Config("field mesh or basis mismatch".into()));
        }
        Ok(())
    }

    /// Field components at the x Gauss nodes: `[(ix * nq + q) * ncomp + c]`.
    fn fields_at_nodes(&self, fields: &DGField) -> Vec<f64> {
        let nc = fields.n_components();
        let nf1 = self.degree() + 1;
        let nx = self.x_mesh.n_elements();
        let mut out = vec![0.0; nx * self.nq * nc];
        for ix in 0..nx {
            let coeffs = fields.element(ix);
            for q in 0..self.nq {
                let phi = &self.field_phi[q * nf1..(q + 1) * nf1];
                for c in 0..nc {
                    out[(ix * self.nq + q) * nc + c] =
                        (0..nf1).map(|p| coeffs[p * nc + c] * phi[p]).sum();
                }
            }
        }
        out
    }

    #[inline]
    fn velocity_at(&self, idx: &[usize; MAX_DIM], xi: &[f64; MAX_DIM], v: &mut [f64; 2]) {
        for b in 0..self.kind.n_v_axes() {
            let a = self.mesh.axis(b + 1);
            v[b] = a.center(idx[b + 1]) + 0.5 * a.width() * xi[b + 1];
        }
    }

    /// Normal speed at every node of the face of element `e` on `axis`/`side`.
    fn face_speeds(&self, e: usize, axis: usize, side: Side, fx: &[f64], out: &mut [f64]) {
        let idx = self.mesh.unflatten(e);
        let table = &self.faces[axis][side_slot(side)];
        let nc = self.kind.n_field_components();
        let mut v = [0.0; 2];
        for (q, (p, qi)) in table.points.iter().zip(&table.idx).enumerate() {
            self.velocity_at(&idx, p, &mut v);
            out[q] = if axis == 0 {
                self.kind.transport_speed(&v)
            } else {
                let base = (idx[0] * self.nq + qi[0]) * nc;
                self.kind.acceleration(&fx[base..base + nc], &v, axis - 1)
            };
        }
    }

    #[inline]
    fn trace(&self, coeffs: &[f64], table: &FaceTable, q: usize) -> f64 {
        let nm = self.basis.n_modes();
        table.phi[q * nm..(q + 1) * nm]
            .iter()
            .zip(coeffs)
            .map(|(p, c)| p * c)
            .sum()
    }

    /// Numerical flux (oriented along `+axis`) at each node of a face of `e`.
    fn face_flux_into(
        &self,
        f: &DGField,
        e: usize,
        axis: usize,
        side: Side,
        fx: &[f64],
        speeds: &mut [f64],
        out: &mut [f64],
    ) {
        self.face_speeds(e, axis, side, fx, speeds);
        let lo_table = &self.faces[axis][1];
        let hi_table = &self.faces[axis][0];
        let nb = self.mesh.neighbor(e, axis, side);
        let n = lo_table.weights.len();
        match (nb, side) {
            (Neighbor::Element(other), _) => {
                let (low, high) = match side {
                    Side::High => (e, other),
                    Side::Low => (other, e),
                };
                let cl = f.element(low);
                let ch = f.element(high);
                for q in 0..n {
                    let left = self.trace(cl, lo_table, q);
                    let right = self.trace(ch, hi_table, q);
                    out[q] = upwind_flux(speeds[q], left, right);
                }
            }
            (Neighbor::Boundary, Side::High) => {
                let c = f.element(e);
                for q in 0..n {
                    out[q] = speeds[q].max(0.0) * self.trace(c, lo_table, q);
                }
            }
            (Neighbor::Boundary, Side::Low) => {
                let c = f.element(e);
                for q in 0..n {
                    out[q] = speeds[q].min(0.0) * self.trace(c, hi_table, q);
                }
            }
        }
    }

    /// Flux values at the face nodes of `element` on `axis`/`side`, oriented
    /// along `+axis`, exactly as used during assembly.
    pub fn face_flux(
        &self,
        state: &SimulationState,
        element: usize,
        axis: usize,
        side: Side,
    ) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let fx = self.fields_at_nodes(&state.fields);
        let n = self.faces[axis][0].weights.len();
        let mut speeds = vec![0.0; n];
        let mut out = vec![0.0; n];
        self.face_flux_into(&state.f, element, axis, side, &fx, &mut speeds, &mut out);
        Ok(out)
    }

    /// Time derivative of the distribution coefficients for fixed fields.
    pub fn vlasov_rhs(&self, state: &SimulationState) -> Result<DGField> {
        self.check_state(state)?;
        let fx = self.fields_at_nodes(&state.fields);
        let nm = self.basis.n_modes();
        let d = self.mesh.dim();
        let nc = self.kind.n_field_components();
        let widths = self.mesh.widths();
        let nvol = self.vol_weights.len();
        let max_face = self.faces.iter().map(|t| t[0].weights.len()).max().unwrap_or(1);
        let f = &state.f;

        let mut out = DGField::zeros(self.mesh.clone(), self.basis.clone(), 1);
        out.coeffs_mut()
            .par_chunks_mut(nm)
            .enumerate()
            .for_each_init(
                || (vec![0.0; max_face], vec![0.0; max_face]),
                |(speeds, flux), (e, res)| {
                    let idx = self.mesh.unflatten(e);
                    let coeffs = f.element(e);
                    let mut v = [0.0; 2];
                    // Volume terms: ∫ f v ∂x φ + ∫ f α·∇v φ, scaled by the
                    // inverse (diagonal) mass matrix.
                    for q in 0..nvol {
                        let phi = &self.vol_phi[q * nm..(q + 1) * nm];
                        let fq: f64 = phi.iter().zip(coeffs).map(|(p, c)| p * c).sum();
                        if fq == 0.0 {
                            continue;
                        }
                        let xi = &self.vol_points[q];
                        self.velocity_at(&idx, xi, &mut v);
                        let wf = self.vol_weights[q] * fq;
                        let mut g = [0.0; MAX_DIM];
                        g[0] = wf * self.kind.transport_speed(&v) * 2.0 / widths[0];
                        let base = (idx[0] * self.nq + self.vol_idx[q][0]) * nc;
                        let fields = &fx[base..base + nc];
                        for b in 0..self.kind.n_v_axes() {
                            g[b + 1] = wf * self.kind.acceleration(fields, &v, b) * 2.0 / widths[b + 1];
                        }
                        let dphi = &self.vol_dphi[q * nm * d..(q + 1) * nm * d];
                        for m in 0..nm {
                            let grad = &dphi[m * d..(m + 1) * d];
                            let mut s = 0.0;
                            for a in 0..d {
                                s += g[a] * grad[a];
                            }
                            res[m] += s;
                        }
                    }
                    // Face terms.
                    for a in 0..d {
                        for side in [Side::Low, Side::High] {
                            let table = &self.faces[a][side_slot(side)];
                            let n = table.weights.len();
                            self.face_flux_into(f, e, a, side, &fx, &mut speeds[..n], &mut flux[..n]);
                            let scale = side.normal() * 2.0 / widths[a];
                            for q in 0..n {
                                let wf = scale * table.weights[q] * flux[q];
                                if wf == 0.0 {
                                    continue;
                                }
                                let phi = &table.phi[q * nm..(q + 1) * nm];
                                for m in 0..nm {
                                    res[m] -= wf * phi[m];
                                }
                            }
                        }
                    }
                },
            );
        Ok(out)
    }

    /// Density and current of `f`, integrated exactly in velocity.
    pub fn compute_moments(&self, f: &DGField) -> Moments {
        compute_moments_on(f, self.x_mesh.clone(), self.field_basis.clone())
    }

    /// Full semi-discrete right-hand side for the state's system.
    pub fn rhs(&self, state: &SimulationState) -> Result<SimulationState> {
        let df = self.vlasov_rhs(state)?;
        let moments = self.compute_moments(&state.f);
        let dfields = match self.kind {
            SystemKind::VlasovAmpere1D1V => ampere_rhs(&moments),
            SystemKind::StreamingWeibel1D2V => self.maxwell_rhs(state, &moments)?,
        };
        Ok(SimulationState { kind: self.kind, f: df, fields: dfields, t: 1.0 })
    }

    /// Time derivative of `(E1, E2, B3)` for the streaming-Weibel system.
    pub fn maxwell_rhs(&self, state: &SimulationState, moments: &Moments) -> Result<DGField> {
        if self.kind != SystemKind::StreamingWeibel1D2V {
            return Err(Error::Usage(
                "maxwell_rhs applies to the streaming-Weibel system only".into(),
            ));
        }
        self.check_state(state)?;
        maxwell_rhs_1d(
            &state.fields,
            &moments.current,
            &self.gauss_w,
            &self.field_phi,
            &self.field_dphi,
            &self.field_phi_ends,
        )
    }

    /// Largest acceleration scale over the x Gauss nodes: `|E|` for VA,
    /// `|E1| + |E2| + vmax |B3|` for SW.
    pub fn field_strength(&self, fields: &DGField) -> f64 {
        let fx = self.fields_at_nodes(fields);
        let nc = self.kind.n_field_components();
        let vmax = (1..self.mesh.dim())
            .map(|a| self.mesh.axis(a).max_abs())
            .fold(0.0f64, f64::max);
        fx.chunks(nc)
            .map(|c| match self.kind {
                SystemKind::VlasovAmpere1D1V => c[0].abs(),
                SystemKind::StreamingWeibel1D2V => {
                    c[component::E1].abs() + c[component::E2].abs() + vmax * c[component::B3].abs()
                }
            })
            .fold(0.0f64, f64::max)
    }
}

#[inline]
fn side_slot(side: Side) -> usize {
    match side {
        Side::Low => 0,
        Side::High => 1,
    }
}

/// Velocity moments of `f`: `rho = ∫ f dv` and `J_b = ∫ f v_b dv`.
///
/// Modes factor into x- and v-Legendre parts, so velocity integrals are taken
/// in closed form and the results lie exactly in the x-space of degree k.
pub fn compute_moments(f: &DGField) -> Moments {
    let x_mesh = Arc::new(f.mesh().x_mesh());
    let field_basis = Arc::new(Basis::new(f.degree(), 1));
    compute_moments_on(f, x_mesh, field_basis)
}

fn compute_moments_on(f: &DGField, x_mesh: Arc<Mesh>, field_basis: Arc<Basis>) -> Moments {
    let mesh = f.mesh();
    let nv_axes = mesh.n_v_axes();
    let nvel = mesh.n_v_elements();
    let nx = x_mesh.n_elements();
    let nf1 = field_basis.n_modes();
    let modes = f.basis().modes();
    let nm = modes.len();
    let sqrt2 = std::f64::consts::SQRT_2;
    let sqrt23 = (2.0f64 / 3.0).sqrt();

    let mut rho = DGField::zeros(x_mesh.clone(), field_basis.clone(), 1);
    let mut cur = DGField::zeros(x_mesh, field_basis, nv_axes);
    let per_x: Vec<(Vec<f64>, Vec<f64>)> = (0..nx)
        .into_par_iter()
        .map(|ix| {
            // Per-cell contributions are summed in mirrored pairs (iv with
            // nvel-1-iv) so that reflecting f in v negates J bit for bit.
            let w = nf1 * (1 + nv_axes);
            let mut contrib = vec![0.0; nvel * w];
            for iv in 0..nvel {
                let e = ix * nvel + iv;
                let idx = mesh.unflatten(e);
                // Per-axis ∫ P̂_q dv and ∫ P̂_q v dv over the cell, q = 0, 1.
                let mut i0 = [[0.0; 2]; 2];
                let mut i1 = [[0.0; 2]; 2];
                for b in 0..nv_axes {
                    let a = mesh.axis(b + 1);
                    let hh = 0.5 * a.width();
                    let c = a.center(idx[b + 1]);
                    i0[b] = [hh * sqrt2, 0.0];
                    i1[b] = [hh * c * sqrt2, hh * hh * sqrt23];
                }
                let coeffs = f.element(e);
                let (r, j) = contrib[iv * w..(iv + 1) * w].split_at_mut(nf1);
                for m in 0..nm {
                    let md = &modes[m];
                    let cm = coeffs[m];
                    if md[1..=nv_axes].iter().any(|&q| q > 1) {
                        continue;
                    }
                    let p = md[0];
                    let mut prod0 = 1.0;
                    for b in 0..nv_axes {
                        prod0 *= i0[b][md[b + 1]];
                    }
                    r[p] += cm * prod0;
                    for bb in 0..nv_axes {
                        let mut prod = 1.0;
                        for b in 0..nv_axes {
                            prod *= if b == bb { i1[b][md[b + 1]] } else { i0[b][md[b + 1]] };
                        }
                        j[p * nv_axes + bb] += cm * prod;
                    }
                }
            }
            let mut total = vec![0.0; w];
            for iv in 0..nvel / 2 {
                let (a, b) = (iv * w, (nvel - 1 - iv) * w);
                for t in 0..w {
                    total[t] += contrib[a + t] + contrib[b + t];
                }
            }
            if nvel % 2 == 1 {
                let mid = (nvel / 2) * w;
                for t in 0..w {
                    total[t] += contrib[mid + t];
                }
            }
            let j = total.split_off(nf1);
            let r = total;
            (r, j)
        })
        .collect();
    for (ix, (r, j)) in per_x.into_iter().enumerate() {
        for p in 0..nf1 {
            rho.set_coeff(ix, p, 0, r[p]);
            for b in 0..nv_axes {
                cur.set_coeff(ix, p, b, j[p * nv_axes + b]);
            }
        }
    }
    Moments { rho, current: cur }
}

/// `dE/dt = -(J - mean(J))` for the Vlasov–Ampère system. Removing the mean
/// current keeps the mean electric field fixed.
pub fn ampere_rhs(moments: &Moments) -> DGField {
    let j = &moments.current;
    let nx = j.mesh().n_elements();
    // For a uniform mesh the domain mean of the constant mode is the plain
    // average of the per-element constant coefficients.
    let avg0 = (0..nx).map(|e| j.coeff(e, 0, 0)).sum::<f64>() / nx as f64;
    let mut out = DGField::zeros(j.mesh().clone(), j.basis().clone(), 1);
    for e in 0..nx {
        for m in 0..j.n_modes() {
            let jm = j.coeff(e, m, 0);
            let v = if m == 0 { -(jm - avg0) } else { -jm };
            out.set_coeff(e, m, 0, v);
        }
    }
    out
}

fn maxwell_rhs_1d(
    fields: &DGField,
    current: &DGField,
    gauss_w: &[f64],
    phi: &[f64],
    dphi: &[f64],
    ends: &[Vec<f64>; 2],
) -> Result<DGField> {
    use component::{B3, E1, E2};
    let mesh = fields.mesh();
    let nx = mesh.n_elements();
    let nf1 = fields.n_modes();
    let nq = gauss_w.len();
    let h = mesh.axis(0).width();
    let eval_end = |e: usize, c: usize, end: usize| -> f64 {
        (0..nf1).map(|p| fields.coeff(e, p, c) * ends[end][p]).sum()
    };
    // Upwind traces at face i (between element i-1 and i, periodic).
    let mut e_tilde = vec![0.0; nx];
    let mut b_tilde = vec![0.0; nx];
    for i in 0..nx {
        let l = if i == 0 { nx - 1 } else { i - 1 };
        let (et, bt) = maxwell_upwind_flux(
            eval_end(l, E1, 1),
            eval_end(l, B3, 1),
            eval_end(i, E1, 0),
            eval_end(i, B3, 0),
        );
        e_tilde[i] = et;
        b_tilde[i] = bt;
    }
    let mut out = DGField::zeros(mesh.clone(), fields.basis().clone(), 3);
    let scale = 2.0 / h;
    for e in 0..nx {
        let right = (e + 1) % nx;
        let mut e1q = vec![0.0; nq];
        let mut b3q = vec![0.0; nq];
        for q in 0..nq {
            let row = &phi[q * nf1..(q + 1) * nf1];
            e1q[q] = (0..nf1).map(|p| fields.coeff(e, p, E1) * row[p]).sum();
            b3q[q] = (0..nf1).map(|p| fields.coeff(e, p, B3) * row[p]).sum();
        }
        for p in 0..nf1 {
            let mut vol_e1 = 0.0;
            let mut vol_b3 = 0.0;
            for q in 0..nq {
                let dp = dphi[q * nf1 + p];
                vol_e1 += gauss_w[q] * b3q[q] * dp;
                vol_b3 += gauss_w[q] * e1q[q] * dp;
            }
            let de1 = scale * (-vol_e1 + b_tilde[right] * ends[1][p] - b_tilde[e] * ends[0][p])
                - current.coeff(e, p, 0);
            let db3 = scale * (-vol_b3 + e_tilde[right] * ends[1][p] - e_tilde[e] * ends[0][p]);
            let de2 = -current.coeff(e, p, 1);
            out.set_coeff(e, p, E1, de1);
            out.set_coeff(e, p, E2, de2);
            out.set_coeff(e, p, B3, db3);
        }
    }
    Ok(out)
}

/// Electric field with `dE/dx = rho - background` and zero mean, by exact
/// antidifferentiation of the piecewise polynomial followed by L² projection
/// onto degree k (which just drops the top Legendre coefficient).
pub fn gauss_law_init(rho: &DGField, background: f64) -> Result<DGField> {
    let mesh = rho.mesh();
    if mesh.dim() != 1 || rho.n_components() != 1 {
        return Err(Error::Usage("gauss_law_init expects a scalar field on a 1D mesh".into()));
    }
    let k = rho.degree();
    let nx = mesh.n_elements();
    let h = mesh.axis(0).width();
    let norm = |n: usize| ((2.0 * n as f64 + 1.0) / 2.0).sqrt();

    let mut out = DGField::zeros(mesh.clone(), rho.basis().clone(), 1);
    let mut e_left = 0.0;
    for e in 0..nx {
        // Classical Legendre coefficients of rho - background.
        let mut b = vec![0.0; k + 1];
        for (p, bp) in b.iter_mut().enumerate() {
            *bp = rho.coeff(e, p, 0) * norm(p);
        }
        b[0] -= background;
        let mut c = vec![0.0; k + 2];
        c[0] = e_left;
        let hh = 0.5 * h;
        c[0] += hh * b[0];
        c[1] += hh * b[0];
        for p in 1..=k {
            let s = hh * b[p] / (2.0 * p as f64 + 1.0);
            c[p + 1] += s;
            c[p - 1] -= s;
        }
        e_left = c.iter().sum();
        for p in 0..=k {
            out.set_coeff(e, p, 0, c[p] / norm(p));
        }
    }
    if e_left.abs() > 1e-10 {
        return Err(Error::Input(format!(
            "charge is not neutral: ∫(rho - background) dx = {e_left:e}"
        )));
    }
    let avg0 = (0..nx).map(|e| out.coeff(e, 0, 0)).sum::<f64>() / nx as f64;
    for e in 0..nx {
        let v = out.coeff(e, 0, 0) - avg0;
        out.set_coeff(e, 0, 0, v);
    }
    Ok(out)
}
