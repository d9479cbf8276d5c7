//! SSP-RK3 time stepping, CFL step selection and the velocity-reversal
//! harness used for error measurement.

use crate::diagnostics::{conserved_quantities, ConservedQuantities};
use crate::dg::DGField;
use crate::error::{Error, Result};
use crate::kinetic::{component, KineticOperator, SimulationState, SystemKind};

/// Lower bound applied to the measured field strength when choosing dt.
pub const E_MAX_FLOOR: f64 = 1e-8;

/// Anything the Runge–Kutta stages can combine linearly.
pub trait RkVector: Clone {
    /// `a * self + b * other`.
    fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self;
    fn all_finite(&self) -> bool;
}

impl RkVector for f64 {
    fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        a * self + b * other
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl RkVector for Vec<f64> {
    fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        self.iter().zip(other).map(|(x, y)| a * x + b * y).collect()
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl RkVector for DGField {
    fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        DGField::lin_comb(self, a, other, b)
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl RkVector for SimulationState {
    fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        SimulationState::lin_comb(self, a, other, b)
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

/// One Shu–Osher SSP-RK3 step of `du/dt = L(u)` starting at time `t`.
pub fn ssp_rk3_step<V, L>(u: &V, t: f64, dt: f64, mut rhs: L) -> Result<V>
where
    V: RkVector,
    L: FnMut(&V) -> Result<V>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Usage(format!("time step must be positive, got {dt}")));
    }
    let check = |v: &V| {
        if v.all_finite() {
            Ok(())
        } else {
            Err(Error::Divergence { t, dt })
        }
    };
    let l0 = rhs(u)?;
    let u1 = u.lin_comb(1.0, &l0, dt);
    check(&u1)?;
    let l1 = rhs(&u1)?;
    let u2 = u.lin_comb(0.75, &u1.lin_comb(1.0, &l1, dt), 0.25);
    check(&u2)?;
    let l2 = rhs(&u2)?;
    let u3 = u.lin_comb(1.0 / 3.0, &u2.lin_comb(1.0, &l2, dt), 2.0 / 3.0);
    check(&u3)?;
    Ok(u3)
}

/// How often the step size is recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DtMode {
    /// Re-evaluate the field strength before every step.
    Adaptive,
    /// Use the field strength of the initial state for the whole run.
    Frozen,
}

impl DtMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DtMode::Adaptive => "adaptive",
            DtMode::Frozen => "frozen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adaptive" => Some(DtMode::Adaptive),
            "frozen" => Some(DtMode::Frozen),
            _ => None,
        }
    }
}

/// Which exponent rule ties dt to the mesh size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DtFormula {
    /// Exponent 1, 5/3, 7/3 for k = 1, 2, 3.
    ByDegree,
    /// Exponent 1 for every degree.
    Linear,
}

impl DtFormula {
    pub fn as_str(self) -> &'static str {
        match self {
            DtFormula::ByDegree => "by_degree",
            DtFormula::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "by_degree" => Some(DtFormula::ByDegree),
            "linear" => Some(DtFormula::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeControls {
    pub cfl: f64,
    pub t_final: f64,
    pub dt_formula: DtFormula,
    pub dt_mode: DtMode,
    pub e_max_floor: f64,
}

impl TimeControls {
    pub fn new(cfl: f64, t_final: f64) -> Result<Self> {
        let c = Self {
            cfl,
            t_final,
            dt_formula: DtFormula::ByDegree,
            dt_mode: DtMode::Adaptive,
            e_max_floor: E_MAX_FLOOR,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_mode(mut self, mode: DtMode) -> Self {
        self.dt_mode = mode;
        self
    }

    pub fn with_formula(mut self, formula: DtFormula) -> Self {
        self.dt_formula = formula;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        if !(self.e_max_floor > 0.0) {
            return Err(Error::Config("e_max_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Default CFL number for a system and degree.
pub fn default_cfl(kind: SystemKind, degree: usize) -> Result<f64> {
    dt_exponent(degree, DtFormula::ByDegree)?;
    Ok(match (kind, degree) {
        (SystemKind::VlasovAmpere1D1V, 2) => 0.2,
        _ => 0.1,
    })
}

/// Mesh-size exponent `p` in `dt = CFL / (Vc/Δx^p + Emax/Δv^p)`.
pub fn dt_exponent(degree: usize, formula: DtFormula) -> Result<f64> {
    let p = match degree {
        1 => 1.0,
        2 => 5.0 / 3.0,
        3 => 7.0 / 3.0,
        _ => {
            return Err(Error::Config(format!(
                "no time-step rule for polynomial degree {degree} (supported: 1, 2, 3)"
            )))
        }
    };
    Ok(match formula {
        DtFormula::ByDegree => p,
        DtFormula::Linear => 1.0,
    })
}

/// `CFL / (vc / dx^p + e_max / dv^p)`.
pub fn dt_from_formula(
    degree: usize,
    formula: DtFormula,
    cfl: f64,
    vc: f64,
    dx: f64,
    dv: f64,
    e_max: f64,
) -> Result<f64> {
    let p = dt_exponent(degree, formula)?;
    let dt = cfl / (vc / dx.powf(p) + e_max / dv.powf(p));
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("time-step rule produced dt = {dt}")));
    }
    Ok(dt)
}

/// Step size for the current fields on the operator's mesh.
pub fn select_dt(controls: &TimeControls, op: &KineticOperator, fields: &DGField) -> Result<f64> {
    let mesh = op.mesh();
    let dx = mesh.axis(0).width();
    let dv = (1..mesh.dim()).map(|a| mesh.axis(a).width()).fold(f64::INFINITY, f64::min);
    let vc = (1..mesh.dim()).map(|a| mesh.axis(a).max_abs()).fold(0.0f64, f64::max);
    let e_max = op.field_strength(fields).max(controls.e_max_floor);
    dt_from_formula(op.degree(), controls.dt_formula, controls.cfl, vc, dx, dv, e_max)
}

/// Diagnostics recorded after each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub quantities: ConservedQuantities,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: SimulationState,
    pub steps: usize,
    /// Entry 0 describes the initial state (with `dt = 0`).
    pub history: Vec<StepRecord>,
}

/// Advances `state` to `controls.t_final`, landing exactly on it.
///
/// `observer` sees the state after every step; returning an error aborts the
/// run. The history is only filled when `record` is set.
pub fn integrate<O>(
    op: &KineticOperator,
    mut state: SimulationState,
    controls: &TimeControls,
    record: bool,
    mut observer: O,
) -> Result<RunOutcome>
where
    O: FnMut(&SimulationState, usize) -> Result<()>,
{
    controls.validate()?;
    let t_final = controls.t_final;
    let mut history = Vec::new();
    if record {
        history.push(StepRecord { step: 0, t: state.t, dt: 0.0, quantities: conserved_quantities(&state) });
    }
    let frozen_dt = match controls.dt_mode {
        DtMode::Frozen => Some(select_dt(controls, op, &state.fields)?),
        DtMode::Adaptive => None,
    };
    let mut steps = 0;
    while state.t < t_final {
        let mut dt = match frozen_dt {
            Some(dt) => dt,
            None => select_dt(controls, op, &state.fields)?,
        };
        let last = state.t + dt >= t_final;
        if last {
            dt = t_final - state.t;
        }
        let t0 = state.t;
        let mut next = ssp_rk3_step(&state, t0, dt, |s| op.rhs(s))?;
        next.t = if last { t_final } else { t0 + dt };
        state = next;
        steps += 1;
        if record {
            history.push(StepRecord { step: steps, t: state.t, dt, quantities: conserved_quantities(&state) });
        }
        observer(&state, steps)?;
    }
    Ok(RunOutcome { state, steps, history })
}

/// `g(x, v) -> g(x, -v)` on a velocity-symmetric mesh, done exactly by
/// mirroring velocity cells and flipping the sign of odd velocity modes.
pub fn reflect_field_v(f: &DGField) -> Result<DGField> {
    let mesh = f.mesh();
    for a in mesh.n_x_axes()..mesh.dim() {
        let ax = mesh.axis(a);
        if ax.lo != -ax.hi {
            return Err(Error::Config(format!(
                "velocity axis {a} is not symmetric: [{}, {}]",
                ax.lo, ax.hi
            )));
        }
    }
    let nm = f.n_modes();
    let nc = f.n_components();
    let d = mesh.dim();
    let sign: Vec<f64> = f
        .basis()
        .modes()
        .iter()
        .map(|m| {
            let odd: usize = m[mesh.n_x_axes()..d].iter().sum();
            if odd.is_multiple_of(2) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let mut out = DGField::zeros(mesh.clone(), f.basis().clone(), nc);
    for e in 0..mesh.n_elements() {
        let mut idx = mesh.unflatten(e);
        for a in mesh.n_x_axes()..d {
            idx[a] = mesh.axis(a).n_cells - 1 - idx[a];
        }
        let target = mesh.flatten(&idx[..d]);
        let src = f.element(e);
        let dst = &mut out.coeffs_mut()[target * nm * nc..(target + 1) * nm * nc];
        for m in 0..nm {
            for c in 0..nc {
                dst[m * nc + c] = sign[m] * src[m * nc + c];
            }
        }
    }
    Ok(out)
}

/// Velocity reversal of a full state: `f(x, -v)`, same `E`, negated `B`.
pub fn reflect_v(state: &SimulationState) -> Result<SimulationState> {
    let f = reflect_field_v(&state.f)?;
    let mut fields = state.fields.clone();
    if state.kind == SystemKind::StreamingWeibel1D2V {
        for e in 0..fields.mesh().n_elements() {
            for m in 0..fields.n_modes() {
                let b = fields.coeff(e, m, component::B3);
                fields.set_coeff(e, m, component::B3, -b);
            }
        }
    }
    Ok(SimulationState { kind: state.kind, f, fields, t: state.t })
}

/// Outcome of evolving forward, reversing velocities and evolving again.
#[derive(Debug, Clone)]
pub struct ReversalOutcome {
    /// State after the second leg; ideally the reflected initial state.
    pub returned: SimulationState,
    pub forward_steps: usize,
    pub backward_steps: usize,
    /// Concatenated step history of both legs (when recorded).
    pub history: Vec<StepRecord>,
}

/// Runs `initial` to `t_final`, applies [`reflect_v`], resets the clock and
/// runs to `t_final` again.
pub fn reverse_evolve(
    op: &KineticOperator,
    initial: SimulationState,
    controls: &TimeControls,
    record: bool,
) -> Result<ReversalOutcome> {
    let fwd = integrate(op, initial, controls, record, |_, _| Ok(()))?;
    let mut mid = reflect_v(&fwd.state)?;
    mid.t = 0.0;
    let back = integrate(op, mid, controls, record, |_, _| Ok(()))?;
    let mut history = fwd.history;
    history.extend(back.history.into_iter().skip(usize::from(record)));
    Ok(ReversalOutcome {
        returned: back.state,
        forward_steps: fwd.steps,
        backward_steps: back.steps,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::{l2_project, l2_project_vector};
    use crate::kinetic::compute_moments;
    use crate::mesh::{AxisSpec, Mesh};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn zero_rhs_is_identity_bitwise() {
        let u = vec![1.0, -2.5, 3.25e-7];
        let v = ssp_rk3_step(&u, 0.0, 0.3, |x: &Vec<f64>| Ok(vec![0.0; x.len()])).unwrap();
        assert_eq!(u, v);
    }

    #[test]
    fn decay_one_step() {
        let u = ssp_rk3_step(&1.0f64, 0.0, 0.1, |x| Ok(-x)).unwrap();
        // 1 - z + z²/2 - z³/6 at z = 0.1
        assert!((u - 0.9048333333333334).abs() < 1e-15);
    }

    #[test]
    fn stability_on_negative_axis() {
        for i in 0..=2512 {
            let z = -(i as f64) * 1e-3;
            let g = ssp_rk3_step(&1.0f64, 0.0, 1.0, |x| Ok(z * x)).unwrap();
            assert!(g.abs() <= 1.0 + 1e-12, "z={z} g={g}");
        }
    }

    #[test]
    fn divergence_reports_time() {
        let r = ssp_rk3_step(&1.0f64, 2.0, 0.5, |_| Ok(f64::NAN));
        match r {
            Err(Error::Divergence { t, dt }) => assert_eq!((t, dt), (2.0, 0.5)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dt_formula_examples() {
        let dt = dt_from_formula(1, DtFormula::ByDegree, 0.1, 6.0 * PI, 4.0 * PI / 128.0, 12.0 * PI / 128.0, 0.5)
            .unwrap();
        let want = 0.1 / (192.0 + 0.5 * 128.0 / (12.0 * PI));
        assert!((dt - want).abs() < 1e-18);
        assert!((dt - 5.163e-4).abs() < 1e-6);

        let dt0 = dt_from_formula(1, DtFormula::ByDegree, 0.1, 6.0, 0.2, 0.3, 0.0).unwrap();
        assert!((dt0 - 0.1 * 0.2 / 6.0).abs() < 1e-16);

        let a = dt_from_formula(2, DtFormula::ByDegree, 0.2, 6.0, 0.2, 0.3, 0.0).unwrap();
        let b = dt_from_formula(2, DtFormula::ByDegree, 0.2, 6.0, 0.1, 0.3, 0.0).unwrap();
        assert!((a / b - 2f64.powf(5.0 / 3.0)).abs() < 1e-12);

        let l = dt_from_formula(3, DtFormula::Linear, 0.1, 6.0, 0.2, 0.3, 0.0).unwrap();
        assert!((l - dt0).abs() < 1e-16);

        assert!(matches!(dt_exponent(4, DtFormula::ByDegree), Err(Error::Config(_))));
        assert!(matches!(default_cfl(SystemKind::VlasovAmpere1D1V, 0), Err(Error::Config(_))));
    }

    #[test]
    fn controls_validate() {
        assert!(TimeControls::new(0.0, 1.0).is_err());
        assert!(TimeControls::new(1.5, 1.0).is_err());
        assert!(TimeControls::new(0.1, -1.0).is_err());
        assert!(TimeControls::new(1.0, 0.0).is_ok());
    }

    fn landau_setup(n: usize, k: usize) -> (KineticOperator, SimulationState) {
        let vc = 6.0 * PI;
        let mesh = Mesh::build(
            &[AxisSpec::new(0.0, 4.0 * PI, n, true).unwrap()],
            &[AxisSpec::new(-vc, vc, n, false).unwrap()],
        )
        .unwrap();
        let op = KineticOperator::new(SystemKind::VlasovAmpere1D1V, Arc::new(mesh), k).unwrap();
        let f = l2_project(
            |x| (-x[1] * x[1] / 2.0).exp() / (2.0 * PI).sqrt() * (1.0 + 0.5 * (0.5 * x[0]).cos()),
            op.mesh().clone(),
            op.basis().clone(),
        )
        .unwrap();
        let e = l2_project(|x| (0.5 * x[0]).sin(), op.x_mesh().clone(), op.field_basis().clone()).unwrap();
        let s = SimulationState::new(SystemKind::VlasovAmpere1D1V, f, e, 0.0).unwrap();
        (op, s)
    }

    #[test]
    fn lands_on_final_time() {
        let (op, s) = landau_setup(8, 1);
        let c = TimeControls::new(0.1, 0.05).unwrap();
        let out = integrate(&op, s, &c, true, |_, _| Ok(())).unwrap();
        assert_eq!(out.state.t, 0.05);
        assert_eq!(out.history.len(), out.steps + 1);
        let total: f64 = out.history.iter().map(|h| h.dt).sum();
        assert!((total - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_final_time_takes_no_steps() {
        let (op, s) = landau_setup(4, 1);
        let c = TimeControls::new(0.1, 0.0).unwrap();
        let out = integrate(&op, s.clone(), &c, false, |_, _| Ok(())).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(out.state, s);
    }

    #[test]
    fn reflection_is_an_involution() {
        let (_, s) = landau_setup(6, 2);
        let r = reflect_v(&reflect_v(&s).unwrap()).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn weibel_reflection_flips_b_and_involutes() {
        let mesh = Mesh::build(
            &[AxisSpec::new(0.0, 10.0, 3, true).unwrap()],
            &[AxisSpec::new(-1.8, 1.8, 4, false).unwrap(), AxisSpec::new(-1.8, 1.8, 3, false).unwrap()],
        )
        .unwrap();
        let op = KineticOperator::new(SystemKind::StreamingWeibel1D2V, Arc::new(mesh), 2).unwrap();
        let mut s = op.zero_state();
        s.f = l2_project(|x| x[0].sin() + x[1] * x[2] * x[2] + x[2], op.mesh().clone(), op.basis().clone()).unwrap();
        s.fields = l2_project_vector(
            |x, o| {
                o[0] = x[0].cos();
                o[1] = 0.2;
                o[2] = x[0].sin();
            },
            3,
            op.x_mesh().clone(),
            op.field_basis().clone(),
        )
        .unwrap();
        let r = reflect_v(&s).unwrap();
        for x in [1.0, 4.0, 9.0] {
            let a = s.fields.eval(&[x]).unwrap();
            let b = r.fields.eval(&[x]).unwrap();
            assert_eq!((a[0], a[1], a[2]), (b[0], b[1], -b[2]));
            for (v1, v2) in [(0.3, -1.1), (1.7, 0.2)] {
                let fa = s.f.eval(&[x, v1, v2]).unwrap()[0];
                let fb = r.f.eval(&[x, -v1, -v2]).unwrap()[0];
                assert!((fa - fb).abs() < 1e-14);
            }
        }
        assert_eq!(reflect_v(&r).unwrap(), s);
    }

    #[test]
    fn reflection_negates_current_exactly() {
        let (_, s) = landau_setup(6, 2);
        let f = l2_project(
            |x| (x[0]).cos() * (1.0 + x[1]) * (-x[1] * x[1] / 4.0).exp(),
            s.f.mesh().clone(),
            s.f.basis().clone(),
        )
        .unwrap();
        let a = compute_moments(&f);
        let b = compute_moments(&reflect_field_v(&f).unwrap());
        for (x, y) in a.current.coeffs().iter().zip(b.current.coeffs()) {
            assert_eq!(*x, -*y);
        }
        for (x, y) in a.rho.coeffs().iter().zip(b.rho.coeffs()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn asymmetric_velocity_axis_cannot_reflect() {
        let mesh = Mesh::build(
            &[AxisSpec::new(0.0, 1.0, 2, true).unwrap()],
            &[AxisSpec::new(-1.0, 2.0, 3, false).unwrap()],
        )
        .unwrap();
        let op = KineticOperator::new(SystemKind::VlasovAmpere1D1V, Arc::new(mesh), 1).unwrap();
        assert!(matches!(reflect_v(&op.zero_state()), Err(Error::Config(_))));
    }

    #[test]
    fn frozen_mode_uses_one_step_size() {
        let (op, s) = landau_setup(8, 1);
        let c = TimeControls::new(0.1, 0.03).unwrap().with_mode(DtMode::Frozen);
        let out = integrate(&op, s, &c, true, |_, _| Ok(())).unwrap();
        let dts: Vec<f64> = out.history[1..out.steps].iter().map(|h| h.dt).collect();
        assert!(dts.windows(2).all(|w| w[0] == w[1]));
    }
}
