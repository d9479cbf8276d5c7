//! Benchmark configurations, initial conditions and run orchestration.
//!
//! Configuration files are flat `key = value` text; blank lines and lines
//! starting with `#` are ignored. Recognized keys:
//!
//! | key | meaning |
//! |---|---|
//! | `case` | `landau`, `two_stream` or `weibel` |
//! | `nx` | cells along x |
//! | `nv` | cells per velocity axis, one value or a comma list |
//! | `degree` | polynomial degree 1..=3 |
//! | `cfl` | CFL number (default depends on case and degree) |
//! | `t_final` | reversal time T |
//! | `filter` | `true`/`false`: also report SIAC-filtered errors |
//! | `dt_mode` | `adaptive` or `frozen` |
//! | `dt_formula` | `by_degree` or `linear` |
//! | `out_dir` | directory for tables and snapshots |
//! | `snapshot_every` | steps between snapshots in `run` (0 = none) |
//! | `error_norm` | `absolute` or `rms` (L² divided by sqrt of the domain measure) |
//! | `amplitude`, `wavenumber`, `length`, `vc` | Landau / two-stream data |
//! | `beta`, `b`, `delta`, `omega1`, `omega2`, `kappa0`, `vmax` | Weibel data |

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::diagnostics::{emit_table, ConvergenceTable, ErrorNorms, ErrorReport, ErrorScale};
use crate::dg::{l2_project, l2_project_vector, DGField};
use crate::error::{Error, Result};
use crate::integrator::{
    default_cfl, integrate, reverse_evolve, DtFormula, DtMode, RunOutcome, TimeControls,
};
use crate::kinetic::{gauss_law_init, KineticOperator, SimulationState, SystemKind};
use crate::mesh::{AxisSpec, Mesh};
use crate::siac::{postprocess_field, EvalGrid, SiacKernel};
use crate::snapshot::write_snapshot;

/// Ion background density.
pub const ION_DENSITY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    Landau,
    TwoStream,
    Weibel,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::Landau => "landau",
            Case::TwoStream => "two_stream",
            Case::Weibel => "weibel",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "landau" => Some(Case::Landau),
            "two_stream" | "two-stream" => Some(Case::TwoStream),
            "weibel" => Some(Case::Weibel),
            _ => None,
        }
    }

    pub fn kind(self) -> SystemKind {
        match self {
            Case::Landau | Case::TwoStream => SystemKind::VlasovAmpere1D1V,
            Case::Weibel => SystemKind::StreamingWeibel1D2V,
        }
    }
}

/// Physical parameters of the benchmark problems. Only the fields relevant
/// to the chosen case are used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkParams {
    pub amplitude: f64,
    pub wavenumber: f64,
    pub length: f64,
    pub vc: f64,
    pub beta: f64,
    pub b: f64,
    pub delta: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub kappa0: f64,
    pub vmax: f64,
}

impl BenchmarkParams {
    pub fn defaults(case: Case) -> Self {
        let mut p = Self {
            amplitude: 0.5,
            wavenumber: 0.5,
            length: 4.0 * PI,
            vc: 6.0 * PI,
            beta: 0.01,
            b: 0.001,
            delta: 0.5,
            omega1: 0.3,
            omega2: 0.3,
            kappa0: 0.2,
            vmax: 1.8,
        };
        if case == Case::TwoStream {
            p.amplitude = 0.05;
        }
        p
    }

    fn entries(&self, case: Case) -> Vec<(&'static str, f64)> {
        match case {
            Case::Landau | Case::TwoStream => vec![
                ("amplitude", self.amplitude),
                ("wavenumber", self.wavenumber),
                ("length", self.length),
                ("vc", self.vc),
            ],
            Case::Weibel => vec![
                ("beta", self.beta),
                ("b", self.b),
                ("delta", self.delta),
                ("omega1", self.omega1),
                ("omega2", self.omega2),
                ("kappa0", self.kappa0),
                ("vmax", self.vmax),
            ],
        }
    }

    fn set(&mut self, key: &str, v: f64) -> bool {
        let slot = match key {
            "amplitude" => &mut self.amplitude,
            "wavenumber" => &mut self.wavenumber,
            "length" => &mut self.length,
            "vc" => &mut self.vc,
            "beta" => &mut self.beta,
            "b" => &mut self.b,
            "delta" => &mut self.delta,
            "omega1" => &mut self.omega1,
            "omega2" => &mut self.omega2,
            "kappa0" => &mut self.kappa0,
            "vmax" => &mut self.vmax,
            _ => return false,
        };
        *slot = v;
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: Case,
    pub nx: usize,
    /// Cells per velocity axis (one entry per axis).
    pub nv: Vec<usize>,
    pub degree: usize,
    /// `None` selects the default for the case and degree.
    pub cfl: Option<f64>,
    pub t_final: f64,
    pub filter: bool,
    pub dt_mode: DtMode,
    pub dt_formula: DtFormula,
    pub out_dir: Option<PathBuf>,
    pub snapshot_every: usize,
    pub error_scale: ErrorScale,
    pub params: BenchmarkParams,
}

impl RunConfig {
    /// Defaults for a case: 32 cells per axis, degree 1, T = 1 (T = 5 for
    /// Weibel), filtering on, adaptive steps.
    pub fn new(case: Case) -> Self {
        let nva = case.kind().n_v_axes();
        Self {
            case,
            nx: 32,
            nv: vec![32; nva],
            degree: 1,
            cfl: None,
            t_final: if case == Case::Weibel { 5.0 } else { 1.0 },
            filter: true,
            dt_mode: DtMode::Adaptive,
            dt_formula: DtFormula::ByDegree,
            out_dir: None,
            snapshot_every: 0,
            error_scale: ErrorScale::Absolute,
            params: BenchmarkParams::defaults(case),
        }
    }

    /// Same configuration with `n` cells on every axis.
    pub fn with_mesh(&self, n: usize) -> Self {
        let mut c = self.clone();
        c.nx = n;
        c.nv = vec![n; self.case.kind().n_v_axes()];
        c
    }

    pub fn effective_cfl(&self) -> Result<f64> {
        match self.cfl {
            Some(c) => Ok(c),
            None => default_cfl(self.case.kind(), self.degree),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.nv.contains(&0) {
            return Err(Error::Config("cell counts must be positive".into()));
        }
        if self.nv.len() != self.case.kind().n_v_axes() {
            return Err(Error::Config(format!(
                "case {} needs {} velocity cell counts, got {}",
                self.case.name(),
                self.case.kind().n_v_axes(),
                self.nv.len()
            )));
        }
        if !(1..=3).contains(&self.degree) {
            return Err(Error::Config(format!("degree must be 1, 2 or 3, got {}", self.degree)));
        }
        let p = &self.params;
        let positive = match self.case {
            Case::Landau | Case::TwoStream => vec![("wavenumber", p.wavenumber), ("length", p.length), ("vc", p.vc)],
            Case::Weibel => vec![("beta", p.beta), ("kappa0", p.kappa0), ("vmax", p.vmax)],
        };
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        self.controls()?;
        Ok(())
    }

    pub fn controls(&self) -> Result<TimeControls> {
        Ok(TimeControls::new(self.effective_cfl()?, self.t_final)?
            .with_mode(self.dt_mode)
            .with_formula(self.dt_formula))
    }

    /// Phase-space mesh for the case.
    pub fn mesh(&self) -> Result<Mesh> {
        let p = &self.params;
        match self.case {
            Case::Landau | Case::TwoStream => Mesh::build(
                &[AxisSpec::new(0.0, p.length, self.nx, true)?],
                &[AxisSpec::new(-p.vc, p.vc, self.nv[0], false)?],
            ),
            Case::Weibel => Mesh::build(
                &[AxisSpec::new(0.0, 2.0 * PI / p.kappa0, self.nx, true)?],
                &[
                    AxisSpec::new(-p.vmax, p.vmax, self.nv[0], false)?,
                    AxisSpec::new(-p.vmax, p.vmax, self.nv[1], false)?,
                ],
            ),
        }
    }

    /// All effective values as ordered key/value pairs.
    pub fn entries(&self) -> Result<Vec<(String, String)>> {
        let mut out: Vec<(String, String)> = vec![
            ("case".into(), self.case.name().into()),
            ("nx".into(), self.nx.to_string()),
            ("nv".into(), self.nv.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")),
            ("degree".into(), self.degree.to_string()),
            ("cfl".into(), self.effective_cfl()?.to_string()),
            ("t_final".into(), self.t_final.to_string()),
            ("filter".into(), self.filter.to_string()),
            ("dt_mode".into(), self.dt_mode.as_str().into()),
            ("dt_formula".into(), self.dt_formula.as_str().into()),
        ];
        if let Some(d) = &self.out_dir {
            out.push(("out_dir".into(), d.display().to_string()));
        }
        out.push(("snapshot_every".into(), self.snapshot_every.to_string()));
        out.push(("error_norm".into(), self.error_scale.as_str().into()));
        for (k, v) in self.params.entries(self.case) {
            out.push((k.into(), v.to_string()));
        }
        Ok(out)
    }

    /// Flat `key = value` text holding every effective value.
    pub fn serialize(&self) -> Result<String> {
        let mut s = String::new();
        for (k, v) in self.entries()? {
            let _ = writeln!(s, "{k} = {v}");
        }
        Ok(s)
    }

    /// Parses a configuration file. `case` is read first so that the other
    /// keys override the case defaults regardless of their order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let case = match pairs.iter().find(|p| p.1 == "case") {
            Some((line, _, v)) => Case::parse(v).ok_or_else(|| Error::Parse {
                line: *line,
                msg: format!("unknown case `{v}`"),
            })?,
            None => Case::Landau,
        };
        let mut cfg = RunConfig::new(case);
        for (line, k, v) in &pairs {
            if k == "case" {
                continue;
            }
            cfg.set(k, v).map_err(|msg| Error::Parse { line: *line, msg })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid value `{v}` for `{key}`"))
        }
        match key {
            "case" => {
                let c = Case::parse(value).ok_or_else(|| format!("unknown case `{value}`"))?;
                if c != self.case {
                    let keep = self.clone();
                    *self = RunConfig::new(c);
                    self.nx = keep.nx;
                    self.degree = keep.degree;
                    self.nv = vec![keep.nv[0]; c.kind().n_v_axes()];
                }
            }
            "nx" => self.nx = num(key, value)?,
            "nv" => {
                let parts: Vec<usize> =
                    value.split(',').map(|p| num(key, p.trim())).collect::<std::result::Result<_, _>>()?;
                let nva = self.case.kind().n_v_axes();
                self.nv = match parts.len() {
                    1 => vec![parts[0]; nva],
                    n if n == nva => parts,
                    n => return Err(format!("`nv` has {n} entries, expected 1 or {nva}")),
                };
            }
            "degree" => self.degree = num(key, value)?,
            "cfl" => self.cfl = Some(num(key, value)?),
            "t_final" => self.t_final = num(key, value)?,
            "filter" => self.filter = num(key, value)?,
            "dt_mode" => self.dt_mode = DtMode::parse(value).ok_or_else(|| format!("unknown dt_mode `{value}`"))?,
            "dt_formula" => {
                self.dt_formula = DtFormula::parse(value).ok_or_else(|| format!("unknown dt_formula `{value}`"))?
            }
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "snapshot_every" => self.snapshot_every = num(key, value)?,
            "error_norm" => {
                self.error_scale =
                    ErrorScale::parse(value).ok_or_else(|| format!("unknown error_norm `{value}`"))?
            }
            _ => {
                let v: f64 = num(key, value)?;
                if !self.params.set(key, v) {
                    return Err(format!("unknown key `{key}`"));
                }
            }
        }
        Ok(())
    }
}

/// Pointwise function on phase space or on x.
pub type PointFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Analytic initial data: distribution and field components.
pub struct InitialData {
    pub f: PointFn,
    pub fields: Vec<PointFn>,
}

fn maxwellian(v: f64) -> f64 {
    (-v * v / 2.0).exp() / (2.0 * PI).sqrt()
}

/// `f = f_M(v) (1 + A cos(kx))`, `E = (A/k) sin(kx)`.
pub fn landau_ic(p: &BenchmarkParams) -> InitialData {
    let (a, k) = (p.amplitude, p.wavenumber);
    InitialData {
        f: Box::new(move |x| maxwellian(x[1]) * (1.0 + a * (k * x[0]).cos())),
        fields: vec![Box::new(move |x| a / k * (k * x[0]).sin())],
    }
}

/// `f = v² f_M(v) (1 + A cos(kx))`, `E = (A/k) sin(kx)`.
pub fn two_stream_ic(p: &BenchmarkParams) -> InitialData {
    let (a, k) = (p.amplitude, p.wavenumber);
    InitialData {
        f: Box::new(move |x| x[1] * x[1] * maxwellian(x[1]) * (1.0 + a * (k * x[0]).cos())),
        fields: vec![Box::new(move |x| a / k * (k * x[0]).sin())],
    }
}

/// Counter-streaming beams in `v1`, `E1 = E2 = 0`, `B3 = b sin(κ0 x2)`.
pub fn weibel_ic(p: &BenchmarkParams) -> InitialData {
    let BenchmarkParams { beta, b, delta, omega1, omega2, kappa0, .. } = *p;
    InitialData {
        f: Box::new(move |x| {
            let (v1, v2) = (x[1], x[2]);
            (-v2 * v2 / beta).exp() / (PI * beta)
                * (delta * (-(v1 - omega1).powi(2) / beta).exp()
                    + (1.0 - delta) * (-(v1 + omega2).powi(2) / beta).exp())
        }),
        fields: vec![
            Box::new(|_| 0.0),
            Box::new(|_| 0.0),
            Box::new(move |x| b * (kappa0 * x[0]).sin()),
        ],
    }
}

pub fn initial_data(config: &RunConfig) -> InitialData {
    match config.case {
        Case::Landau => landau_ic(&config.params),
        Case::TwoStream => two_stream_ic(&config.params),
        Case::Weibel => weibel_ic(&config.params),
    }
}

/// Projected initial state. VA fields come from Gauss's law applied to the
/// projected density; Weibel fields are projected directly.
pub fn initial_state(config: &RunConfig, op: &KineticOperator) -> Result<SimulationState> {
    let data = initial_data(config);
    let f = l2_project(&data.f, op.mesh().clone(), op.basis().clone())?;
    let fields = match config.case.kind() {
        SystemKind::VlasovAmpere1D1V => {
            let m = op.compute_moments(&f);
            gauss_law_init(&m.rho, ION_DENSITY)?
        }
        SystemKind::StreamingWeibel1D2V => {
            let n = data.fields.len();
            l2_project_vector(
                |x, out| {
                    for (o, g) in out.iter_mut().zip(&data.fields) {
                        *o = g(x);
                    }
                },
                n,
                op.x_mesh().clone(),
                op.field_basis().clone(),
            )?
        }
    };
    SimulationState::new(config.case.kind(), f, fields, 0.0)
}

pub fn operator_for(config: &RunConfig) -> Result<KineticOperator> {
    config.validate()?;
    KineticOperator::new(config.case.kind(), Arc::new(config.mesh()?), config.degree)
}

/// Forward run to `t_final`, writing snapshots to `out_dir` every
/// `snapshot_every` steps (and at the end) when both are set.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let op = operator_for(config)?;
    let state = initial_state(config, &op)?;
    let controls = config.controls()?;
    let dir = config.out_dir.clone();
    let every = config.snapshot_every;
    if let (Some(d), true) = (&dir, every > 0) {
        std::fs::create_dir_all(d)?;
    }
    let case = config.case.name();
    let out = integrate(&op, state, &controls, true, |s, step| {
        if let (Some(d), true) = (&dir, every > 0) {
            if step % every == 0 {
                write_snapshot(&d.join(format!("snapshot_{step:06}.txt")), case, s)?;
            }
        }
        Ok(())
    })?;
    if let (Some(d), true) = (&dir, every > 0) {
        write_snapshot(&d.join("snapshot_final.txt"), case, &out.state)?;
    }
    Ok(out)
}

/// Errors of a returned state against the reflected initial data:
/// `f0(x, -v)`, `E0`, `-B0`.
pub fn reversal_errors(
    config: &RunConfig,
    state: &SimulationState,
    kernel: Option<&SiacKernel>,
) -> Result<ErrorNorms> {
    let data = initial_data(config);
    let kind = config.case.kind();
    let f_ref = |x: &[f64]| {
        let mut y = [0.0; 3];
        y[..x.len()].copy_from_slice(x);
        for v in y.iter_mut().take(x.len()).skip(1) {
            *v = -*v;
        }
        (data.f)(&y[..x.len()])
    };
    let sign = |c: usize| {
        if kind == SystemKind::StreamingWeibel1D2V && c == crate::kinetic::component::B3 {
            -1.0
        } else {
            1.0
        }
    };
    let nc = kind.n_field_components();
    let mut norms = ErrorNorms::default();
    match kernel {
        None => {
            let (l2, linf) = state.f.error_norms(0, f_ref);
            norms.f_l2 = l2;
            norms.f_linf = linf;
            for c in 0..nc {
                let g = &data.fields[c];
                let (l2, linf) = state.fields.error_norms(c, |x| sign(c) * g(x));
                norms.field_l2.push(l2);
                norms.field_linf.push(linf);
            }
        }
        Some(ker) => {
            let grid = EvalGrid::Gauss { points_per_axis: crate::dg::field::norm_points(state.degree()) };
            let s = postprocess_field(&state.f, 0, ker, &grid)?;
            let (l2, linf) = s.error_norms(f_ref);
            norms.f_l2 = l2;
            norms.f_linf = linf;
            for c in 0..nc {
                let g = &data.fields[c];
                let s = postprocess_field(&state.fields, c, ker, &grid)?;
                let (l2, linf) = s.error_norms(|x| sign(c) * g(x));
                norms.field_l2.push(l2);
                norms.field_linf.push(linf);
            }
        }
    }
    Ok(norms)
}

/// Project the initial data, run to T, reverse velocities (and B), run to T
/// again and measure the distance to the reflected initial data, before and
/// (when `filter` is set) after SIAC filtering.
pub fn reversibility_experiment(config: &RunConfig) -> Result<ErrorReport> {
    let start = Instant::now();
    let op = operator_for(config)?;
    let initial = initial_state(config, &op)?;
    let controls = config.controls()?;
    let out = reverse_evolve(&op, initial, &controls, true)?;
    let mesh = op.mesh();
    let scale = |n: ErrorNorms| match config.error_scale {
        ErrorScale::Absolute => n,
        ErrorScale::Rms => n.rms(mesh.volume(), mesh.x_mesh().volume()),
    };
    let raw = scale(reversal_errors(config, &out.returned, None)?);
    let filtered = if config.filter {
        let ker = SiacKernel::new(config.degree)?;
        Some(scale(reversal_errors(config, &out.returned, Some(&ker))?))
    } else {
        None
    };
    let report = ErrorReport {
        case: config.case.name().into(),
        kind: config.case.kind(),
        nx: config.nx,
        nv: config.nv.clone(),
        degree: config.degree,
        t_final: config.t_final,
        steps: out.forward_steps + out.backward_steps,
        raw,
        filtered,
        runtime_seconds: start.elapsed().as_secs_f64(),
        history: out.history,
    };
    report.validate()?;
    Ok(report)
}

/// Reversibility experiments over a sequence of meshes (`n` cells on every
/// axis, doubling each time). When `table_path` is given the table is rewritten after every
/// mesh, so a failure leaves the completed rows on disk.
pub fn run_convergence_study(
    base: &RunConfig,
    meshes: &[usize],
    table_path: Option<&Path>,
) -> Result<ConvergenceTable> {
    if meshes.is_empty() || meshes.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::Config(format!("meshes must refine by a factor of 2, got {meshes:?}")));
    }
    let meta = base.entries()?;
    let mut table = ConvergenceTable::new();
    for &n in meshes {
        let report = reversibility_experiment(&base.with_mesh(n))?;
        table.push(report);
        if let Some(p) = table_path {
            emit_table(&table, p, &meta)?;
        }
    }
    Ok(table)
}

/// Field values on the x Gauss nodes, for quick inspection.
pub fn field_profile(fields: &DGField, component: usize, n: usize) -> Result<Vec<(f64, f64)>> {
    let ax = fields.mesh().axis(0);
    (0..n)
        .map(|i| {
            let x = ax.lo + (i as f64 + 0.5) * ax.length() / n as f64;
            Ok((x, fields.eval(&[x])?[component]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::gauss_legendre;

    #[test]
    fn landau_values() {
        let p = BenchmarkParams::defaults(Case::Landau);
        let d = landau_ic(&p);
        assert!(((d.f)(&[0.0, 0.0]) - 1.5 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let mut q = p;
        q.amplitude = 0.0;
        let d = landau_ic(&q);
        assert_eq!((d.fields[0])(&[1.3]), 0.0);
        assert_eq!((d.f)(&[2.0, 0.7]), maxwellian(0.7));
    }

    #[test]
    fn two_stream_values() {
        let p = BenchmarkParams::defaults(Case::TwoStream);
        assert_eq!(p.amplitude, 0.05);
        let d = two_stream_ic(&p);
        for x in [0.0, 1.0, 5.0] {
            assert_eq!((d.f)(&[x, 0.0]), 0.0);
        }
        // ∫ v² f_M dv = 1, by Gauss quadrature over [-12, 12].
        let (xs, ws) = gauss_legendre(60);
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| 12.0 * w * (12.0 * x).powi(2) * maxwellian(12.0 * x)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weibel_values() {
        let p = BenchmarkParams::defaults(Case::Weibel);
        let d = weibel_ic(&p);
        let want = 1.0 / (PI * p.beta) * (0.5 + 0.5 * (-0.36f64 / p.beta).exp());
        assert!(((d.f)(&[3.0, 0.3, 0.0]) - want).abs() < 1e-12 * want);
        assert!((want - 0.5 / (PI * p.beta)).abs() < 1e-12);
        // Even in v1 for equal beam weights and speeds.
        assert_eq!((d.f)(&[1.0, 0.41, 0.2]), (d.f)(&[1.0, -0.41, 0.2]));
        let mut q = p;
        q.b = 0.0;
        assert_eq!((weibel_ic(&q).fields[2])(&[7.0]), 0.0);
    }

    #[test]
    fn neutral_projections() {
        for case in [Case::Landau, Case::TwoStream] {
            let cfg = RunConfig::new(case).with_mesh(16);
            let op = operator_for(&cfg).unwrap();
            let s = initial_state(&cfg, &op).unwrap();
            assert!((s.f.integral(0) - cfg.params.length).abs() < 1e-9, "{case:?}");
        }
    }

    #[test]
    fn config_round_trip() {
        let text = "case = weibel\nerror_norm = rms\nnv = 8, 10\nnx = 12\ndegree = 2\nbeta = 0.02\ndt_mode = frozen\nfilter = false\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.nv, vec![8, 10]);
        assert_eq!(c.params.beta, 0.02);
        assert_eq!(c.error_scale, ErrorScale::Rms);
        assert_eq!(c.t_final, 5.0);
        let again = RunConfig::parse(&c.serialize().unwrap()).unwrap();
        assert_eq!(again.serialize().unwrap(), c.serialize().unwrap());
        assert_eq!(again.effective_cfl().unwrap(), c.effective_cfl().unwrap());
        assert_eq!(again.params, c.params);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(RunConfig::parse("nx 3"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(RunConfig::parse("\n# c\nbogus = 1"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(RunConfig::parse("degree = 4"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("case = plasma"), Err(Error::Parse { .. })));
        assert!(matches!(RunConfig::parse("nx = 0"), Err(Error::Config(_))));
    }

    #[test]
    fn zero_time_reversal_is_projection_error() {
        let mut cfg = RunConfig::new(Case::Landau).with_mesh(16);
        cfg.t_final = 0.0;
        cfg.filter = false;
        let r = reversibility_experiment(&cfg).unwrap();
        assert_eq!(r.steps, 0);
        let op = operator_for(&cfg).unwrap();
        let s = initial_state(&cfg, &op).unwrap();
        let d = landau_ic(&cfg.params);
        let proj = s.f.l2_error(0, &d.f);
        assert!((r.raw.f_l2 - proj).abs() < 1e-15);
    }

    #[test]
    fn short_landau_reversal_is_small() {
        let mut cfg = RunConfig::new(Case::Landau).with_mesh(16);
        cfg.t_final = 0.05;
        let r = reversibility_experiment(&cfg).unwrap();
        let mut zero = cfg.clone();
        zero.t_final = 0.0;
        let r0 = reversibility_experiment(&zero).unwrap();
        // A short round trip adds little to the projection error.
        assert!(r.raw.f_l2 < 1.05 * r0.raw.f_l2, "{:?} vs {:?}", r.raw, r0.raw);
        assert!(r.filtered.is_some());
        let first = r.history.first().unwrap().quantities.mass;
        let last = r.history.last().unwrap().quantities.mass;
        assert!(((last - first) / first).abs() < 1e-11);
    }

    #[test]
    fn rms_scaling() {
        let mut cfg = RunConfig::new(Case::Landau).with_mesh(16);
        cfg.t_final = 0.0;
        let a = reversibility_experiment(&cfg).unwrap();
        cfg.error_scale = ErrorScale::Rms;
        let r = reversibility_experiment(&cfg).unwrap();
        let area = cfg.params.length * 2.0 * cfg.params.vc;
        assert!((r.raw.f_l2 * area.sqrt() - a.raw.f_l2).abs() < 1e-14 * a.raw.f_l2.max(1.0));
        assert!((r.raw.field_l2[0] * cfg.params.length.sqrt() - a.raw.field_l2[0]).abs() < 1e-15);
        assert_eq!(r.raw.f_linf, a.raw.f_linf);
    }

    #[test]
    fn refinement_must_increase() {
        let cfg = RunConfig::new(Case::Landau);
        assert!(matches!(run_convergence_study(&cfg, &[16, 8], None), Err(Error::Config(_))));
        assert!(matches!(run_convergence_study(&cfg, &[16, 24], None), Err(Error::Config(_))));
        assert!(matches!(run_convergence_study(&cfg, &[], None), Err(Error::Config(_))));
    }
}
