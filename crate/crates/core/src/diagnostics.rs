//! Conserved-quantity monitors, error reports, convergence orders and table
//! output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dg::{gauss_rule, ModeTable};
use crate::error::{Error, Result};
use crate::integrator::StepRecord;
use crate::kinetic::{SimulationState, SystemKind};

/// Monitored integrals of a state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservedQuantities {
    /// `∫∫ f`.
    pub mass: f64,
    /// `‖f‖₀`.
    pub l2_f: f64,
    /// `½ ∫∫ f |v|²`.
    pub kinetic_energy: f64,
    /// `½ ∫ (|E|² + |B|²)`.
    pub field_energy: f64,
    /// Domain mean of each field component (unused slots are zero).
    pub mean_field: [f64; 3],
}

impl ConservedQuantities {
    pub fn energy(&self) -> f64 {
        self.kinetic_energy + self.field_energy
    }
}

/// Mass, L² norm and energy, exact for the piecewise polynomials.
pub fn conserved_quantities(state: &SimulationState) -> ConservedQuantities {
    let f = &state.f;
    let mesh = f.mesh();
    let d = mesh.dim();
    // f |v|² has degree k + 2 per axis.
    let rule = gauss_rule(f.degree() + 2, d);
    let table = ModeTable::new(f.basis(), &rule);
    let jac = mesh.element_volume() / 2f64.powi(d as i32);
    let per_element: Vec<f64> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let coeffs = f.element(e);
            let mut s = 0.0;
            for (q, (xi, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
                let p = mesh.to_physical(e, &xi[..d]);
                let v2: f64 = p[1..d].iter().map(|v| v * v).sum();
                s += w * table.eval(q, coeffs, 1, 0) * v2;
            }
            s * jac
        })
        .collect();
    let kinetic_energy = 0.5 * per_element.iter().sum::<f64>();

    let fields = &state.fields;
    let field_energy = 0.5 * fields.l2_norm().powi(2);
    let mut mean_field = [0.0; 3];
    for (c, m) in mean_field.iter_mut().enumerate().take(fields.n_components()) {
        *m = fields.mean(c);
    }
    ConservedQuantities {
        mass: f.integral(0),
        l2_f: f.l2_norm(),
        kinetic_energy,
        field_energy,
        mean_field,
    }
}

/// L² and L∞ errors of the distribution and each field component.
///
/// L∞ is the maximum over the norm quadrature nodes (or filter sample
/// points), not the true supremum.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorNorms {
    pub f_l2: f64,
    pub f_linf: f64,
    pub field_l2: Vec<f64>,
    pub field_linf: Vec<f64>,
}

/// How L² errors are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorScale {
    /// Plain `‖e‖₀` over the domain.
    #[default]
    Absolute,
    /// `‖e‖₀ / sqrt(|domain|)`, i.e. the root-mean-square error.
    Rms,
}

impl ErrorScale {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorScale::Absolute => "absolute",
            ErrorScale::Rms => "rms",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "absolute" => Some(ErrorScale::Absolute),
            "rms" => Some(ErrorScale::Rms),
            _ => None,
        }
    }
}

impl ErrorNorms {
    /// Divides the L² entries by the square roots of the phase-space and
    /// x-domain measures. L∞ entries are unchanged.
    pub fn rms(&self, phase_volume: f64, x_volume: f64) -> ErrorNorms {
        let (sf, sx) = (phase_volume.sqrt(), x_volume.sqrt());
        ErrorNorms {
            f_l2: self.f_l2 / sf,
            f_linf: self.f_linf,
            field_l2: self.field_l2.iter().map(|e| e / sx).collect(),
            field_linf: self.field_linf.clone(),
        }
    }

    fn all_valid(&self) -> bool {
        std::iter::once(&self.f_l2)
            .chain(std::iter::once(&self.f_linf))
            .chain(&self.field_l2)
            .chain(&self.field_linf)
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Result of one reversibility run.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub case: String,
    pub kind: SystemKind,
    pub nx: usize,
    pub nv: Vec<usize>,
    pub degree: usize,
    pub t_final: f64,
    pub steps: usize,
    pub raw: ErrorNorms,
    pub filtered: Option<ErrorNorms>,
    pub runtime_seconds: f64,
    pub history: Vec<StepRecord>,
}

impl ErrorReport {
    /// `"64x64"` style mesh descriptor.
    pub fn mesh_label(&self) -> String {
        std::iter::once(self.nx)
            .chain(self.nv.iter().copied())
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("x")
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.raw.all_valid() && self.filtered.as_ref().is_none_or(|n| n.all_valid());
        if ok {
            Ok(())
        } else {
            Err(Error::Internal(format!("error report for {} holds invalid norms", self.mesh_label())))
        }
    }
}

/// Reports over a refinement sequence, coarsest first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ErrorReport>,
}

impl ConvergenceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, report: ErrorReport) {
        self.rows.push(report);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Order of a column entry relative to the previous row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    /// First row: nothing to compare against.
    First,
    /// An error is zero or non-finite.
    NotApplicable,
    Value(f64),
}

impl Order {
    pub fn value(self) -> Option<f64> {
        match self {
            Order::Value(v) => Some(v),
            _ => None,
        }
    }

    fn display(self) -> String {
        match self {
            Order::First => "-".into(),
            Order::NotApplicable => "NA".into(),
            Order::Value(v) => format!("{v:.2}"),
        }
    }

    fn full(self) -> String {
        match self {
            Order::First => "-".into(),
            Order::NotApplicable => "NA".into(),
            Order::Value(v) => format!("{v}"),
        }
    }
}

/// `log(e_coarse / e_fine) / log(refinement)`.
pub fn observed_order(e_coarse: f64, e_fine: f64, refinement: f64) -> Order {
    if !(e_coarse > 0.0 && e_fine > 0.0) || !e_coarse.is_finite() || !e_fine.is_finite() {
        return Order::NotApplicable;
    }
    Order::Value((e_coarse / e_fine).ln() / refinement.ln())
}

/// One error column with its orders.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderColumn {
    pub name: String,
    pub errors: Vec<f64>,
    pub orders: Vec<Order>,
}

/// Table of L² errors and observed orders, one column per quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderTable {
    pub meshes: Vec<String>,
    pub columns: Vec<OrderColumn>,
}

impl OrderTable {
    pub fn column(&self, name: &str) -> Option<&OrderColumn> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Observed L² orders for `f` and each field, before and (if present) after
/// filtering. Mesh ratios come from the x cell counts, so non-halving
/// sequences are handled too.
pub fn convergence_orders(table: &ConvergenceTable) -> Result<OrderTable> {
    let rows = &table.rows;
    if rows.len() < 2 {
        return Err(Error::Usage("convergence orders need at least two meshes".into()));
    }
    for w in rows.windows(2) {
        if w[1].nx <= w[0].nx {
            return Err(Error::Usage(format!(
                "meshes must strictly refine: {} then {}",
                w[0].mesh_label(),
                w[1].mesh_label()
            )));
        }
        if w[1].kind != w[0].kind || w[1].degree != w[0].degree {
            return Err(Error::Usage("rows mix systems or degrees".into()));
        }
    }
    let names = rows[0].kind.field_names();
    let filtered = rows.iter().all(|r| r.filtered.is_some());
    let mut specs: Vec<(String, Box<dyn Fn(&ErrorReport) -> f64>)> = Vec::new();
    specs.push(("f".into(), Box::new(|r: &ErrorReport| r.raw.f_l2)));
    for (c, n) in names.iter().enumerate() {
        specs.push(((*n).into(), Box::new(move |r: &ErrorReport| r.raw.field_l2[c])));
    }
    if filtered {
        specs.push(("f_pp".into(), Box::new(|r: &ErrorReport| r.filtered.as_ref().unwrap().f_l2)));
        for (c, n) in names.iter().enumerate() {
            specs.push((
                format!("{n}_pp"),
                Box::new(move |r: &ErrorReport| r.filtered.as_ref().unwrap().field_l2[c]),
            ));
        }
    }
    let columns = specs
        .into_iter()
        .map(|(name, get)| {
            let errors: Vec<f64> = rows.iter().map(&get).collect();
            let mut orders = vec![Order::First];
            for i in 1..rows.len() {
                let ratio = rows[i].nx as f64 / rows[i - 1].nx as f64;
                orders.push(observed_order(errors[i - 1], errors[i], ratio));
            }
            OrderColumn { name, errors, orders }
        })
        .collect();
    Ok(OrderTable { meshes: rows.iter().map(|r| r.mesh_label()).collect(), columns })
}

/// Three significant digits with a two-digit signed exponent, e.g. `1.42E-02`.
pub fn format_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.2E}");
    let (mant, exp) = s.split_once('E').expect("E format has an exponent");
    let e: i32 = exp.parse().expect("integer exponent");
    let sign = if e < 0 { '-' } else { '+' };
    format!("{mant}E{sign}{:02}", e.abs())
}

/// CSV text with columns `mesh, err_X, ord_X, ...`.
pub fn table_csv(t: &OrderTable) -> String {
    let mut out = String::from("mesh");
    for c in &t.columns {
        let _ = write!(out, ",err_{0},ord_{0}", c.name);
    }
    out.push('\n');
    for (i, mesh) in t.meshes.iter().enumerate() {
        out.push_str(mesh);
        for c in &t.columns {
            let _ = write!(out, ",{},{}", format_sci(c.errors[i]), c.orders[i].display());
        }
        out.push('\n');
    }
    out
}

/// Full-precision `key=value` companion: metadata first, then every error
/// (L² and L∞) and order of every row.
pub fn table_sidecar(table: &ConvergenceTable, orders: &OrderTable, metadata: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in metadata {
        let _ = writeln!(out, "{k}={v}");
    }
    let _ = writeln!(out, "rows={}", table.rows.len());
    for (i, r) in table.rows.iter().enumerate() {
        let p = format!("row.{i}");
        let _ = writeln!(out, "{p}.mesh={}", r.mesh_label());
        let _ = writeln!(out, "{p}.degree={}", r.degree);
        let _ = writeln!(out, "{p}.t_final={}", r.t_final);
        let _ = writeln!(out, "{p}.steps={}", r.steps);
        let _ = writeln!(out, "{p}.runtime_seconds={}", r.runtime_seconds);
        let mut norms = vec![("", &r.raw)];
        if let Some(f) = &r.filtered {
            norms.push(("_pp", f));
        }
        for (suffix, n) in norms {
            let _ = writeln!(out, "{p}.f{suffix}.l2={}", n.f_l2);
            let _ = writeln!(out, "{p}.f{suffix}.linf={}", n.f_linf);
            for (c, name) in r.kind.field_names().iter().enumerate() {
                let _ = writeln!(out, "{p}.{name}{suffix}.l2={}", n.field_l2[c]);
                let _ = writeln!(out, "{p}.{name}{suffix}.linf={}", n.field_linf[c]);
            }
        }
        for c in &orders.columns {
            let _ = writeln!(out, "{p}.{}.order={}", c.name, c.orders[i].full());
        }
    }
    out
}

/// Path of the full-precision companion of a CSV table.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".full.txt");
    PathBuf::from(s)
}

/// Writes the CSV table to `path` and the full-precision companion next to
/// it. With fewer than two rows only the sidecar carries data and the CSV
/// has no order columns filled.
pub fn emit_table(table: &ConvergenceTable, path: &Path, metadata: &[(String, String)]) -> Result<()> {
    let orders = if table.rows.len() >= 2 {
        convergence_orders(table)?
    } else {
        single_row_table(table)
    };
    std::fs::write(path, table_csv(&orders))?;
    std::fs::write(sidecar_path(path), table_sidecar(table, &orders, metadata))?;
    Ok(())
}

fn single_row_table(table: &ConvergenceTable) -> OrderTable {
    let mut columns = Vec::new();
    if let Some(r) = table.rows.first() {
        let mut push = |name: String, e: f64| {
            columns.push(OrderColumn { name, errors: vec![e], orders: vec![Order::First] })
        };
        push("f".into(), r.raw.f_l2);
        for (c, n) in r.kind.field_names().iter().enumerate() {
            push((*n).into(), r.raw.field_l2[c]);
        }
        if let Some(f) = &r.filtered {
            push("f_pp".into(), f.f_l2);
            for (c, n) in r.kind.field_names().iter().enumerate() {
                push(format!("{n}_pp"), f.field_l2[c]);
            }
        }
    }
    OrderTable { meshes: table.rows.iter().map(|r| r.mesh_label()).collect(), columns }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::l2_project;
    use crate::kinetic::KineticOperator;
    use crate::mesh::{AxisSpec, Mesh};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn report(nx: usize, f: f64, e: f64, pp: Option<(f64, f64)>) -> ErrorReport {
        ErrorReport {
            case: "landau".into(),
            kind: SystemKind::VlasovAmpere1D1V,
            nx,
            nv: vec![nx],
            degree: 1,
            t_final: 1.0,
            steps: 10,
            raw: ErrorNorms { f_l2: f, f_linf: 2.0 * f, field_l2: vec![e], field_linf: vec![2.0 * e] },
            filtered: pp.map(|(a, b)| ErrorNorms {
                f_l2: a,
                f_linf: 2.0 * a,
                field_l2: vec![b],
                field_linf: vec![2.0 * b],
            }),
            runtime_seconds: 0.0,
            history: Vec::new(),
        }
    }

    #[test]
    fn published_orders() {
        assert!((observed_order(4e-4, 1e-4, 2.0).value().unwrap() - 2.0).abs() < 1e-12);
        let o = observed_order(1.59e-3, 4.08e-4, 2.0).value().unwrap();
        assert!((o - 1.96).abs() < 5e-3, "{o}");
        let o = observed_order(1.10e-4, 1.37e-5, 2.0).value().unwrap();
        assert!((o - 3.00).abs() < 1e-2, "{o}");
        assert_eq!(observed_order(0.0, 1e-3, 2.0), Order::NotApplicable);
        assert_eq!(observed_order(1e-3, 0.0, 2.0), Order::NotApplicable);
    }

    #[test]
    fn synthetic_power_law() {
        let mut t = ConvergenceTable::new();
        for n in [8, 16, 32, 64] {
            let h = 1.0 / n as f64;
            t.push(report(n, 3.0 * h.powf(2.5), h.powi(3), Some((h.powi(4), 0.0))));
        }
        let o = convergence_orders(&t).unwrap();
        let f = o.column("f").unwrap();
        assert_eq!(f.orders[0], Order::First);
        for ord in &f.orders[1..] {
            assert!((ord.value().unwrap() - 2.5).abs() < 1e-12);
        }
        for ord in &o.column("f_pp").unwrap().orders[1..] {
            assert!((ord.value().unwrap() - 4.0).abs() < 1e-12);
        }
        assert_eq!(o.column("E_pp").unwrap().orders[1], Order::NotApplicable);
    }

    #[test]
    fn non_halving_uses_width_ratio() {
        let mut t = ConvergenceTable::new();
        t.push(report(10, 1.0 / 100.0, 1.0, None));
        t.push(report(30, 1.0 / 900.0, 1.0, None));
        let o = convergence_orders(&t).unwrap();
        assert!((o.column("f").unwrap().orders[1].value().unwrap() - 2.0).abs() < 1e-12);
        assert!(o.column("f_pp").is_none());
    }

    #[test]
    fn orders_need_refining_meshes() {
        let mut t = ConvergenceTable::new();
        t.push(report(32, 1e-3, 1e-3, None));
        assert!(convergence_orders(&t).is_err());
        t.push(report(16, 1e-3, 1e-3, None));
        assert!(convergence_orders(&t).is_err());
    }

    #[test]
    fn scientific_format() {
        assert_eq!(format_sci(1.42e-2), "1.42E-02");
        assert_eq!(format_sci(4.08e-4), "4.08E-04");
        assert_eq!(format_sci(0.0), "0.00E+00");
        assert_eq!(format_sci(123.4), "1.23E+02");
    }

    #[test]
    fn emit_writes_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = ConvergenceTable::new();
        t.push(report(16, 1.59e-3, 2e-3, Some((8.74e-4, 1e-4))));
        t.push(report(32, 4.08e-4, 5e-4, Some((1.10e-4, 1.2e-5))));
        emit_table(&t, &path, &[("case".into(), "landau".into())]).unwrap();
        let csv = std::fs::read_to_string(&path).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "mesh,err_f,ord_f,err_E,ord_E,err_f_pp,ord_f_pp,err_E_pp,ord_E_pp"
        );
        assert!(lines.next().unwrap().starts_with("16x16,1.59E-03,-,"));
        assert!(lines.next().unwrap().starts_with("32x32,4.08E-04,1.96,"));
        let side = std::fs::read_to_string(sidecar_path(&path)).unwrap();
        assert!(side.starts_with("case=landau\n"));
        assert!(side.contains("row.1.f.l2=0.000408\n"));
        assert!(side.contains("row.0.E_pp.linf=0.0002\n"));
    }

    #[test]
    fn emit_to_missing_directory_fails() {
        let mut t = ConvergenceTable::new();
        t.push(report(16, 1e-3, 1e-3, None));
        let r = emit_table(&t, Path::new("/nonexistent/dir/t.csv"), &[]);
        assert!(matches!(r, Err(Error::Io(_))));
    }

    fn va_operator(n: usize, k: usize) -> KineticOperator {
        let mesh = Mesh::build(
            &[AxisSpec::new(0.0, 4.0 * PI, n, true).unwrap()],
            &[AxisSpec::new(-6.0 * PI, 6.0 * PI, n, false).unwrap()],
        )
        .unwrap();
        KineticOperator::new(SystemKind::VlasovAmpere1D1V, Arc::new(mesh), k).unwrap()
    }

    #[test]
    fn maxwellian_mass_and_field_energy() {
        let op = va_operator(16, 2);
        let mut s = op.zero_state();
        let q = conserved_quantities(&s);
        assert_eq!(q, ConservedQuantities::default());

        s.f = l2_project(
            |x| (-x[1] * x[1] / 2.0).exp() / (2.0 * PI).sqrt(),
            op.mesh().clone(),
            op.basis().clone(),
        )
        .unwrap();
        s.fields = l2_project(|x| (0.5 * x[0]).sin(), op.x_mesh().clone(), op.field_basis().clone()).unwrap();
        let q = conserved_quantities(&s);
        assert!((q.mass - 4.0 * PI).abs() < 1e-9, "{}", q.mass);
        // ½ ∫ f_M v² = ½ |Ωx|.
        assert!((q.kinetic_energy - 2.0 * PI).abs() < 1e-6);
        assert!((q.field_energy - PI).abs() < 1e-5, "{}", q.field_energy);
        assert!(q.mean_field[0].abs() < 1e-14);
    }
}
