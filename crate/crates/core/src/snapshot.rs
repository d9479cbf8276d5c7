//! Plain-text snapshots of a simulation state.
//!
//! ```text
//! vlasov-siac-snapshot 1
//! case landau
//! system va1d1v
//! t 0.5
//! degree 2
//! axis 0 12.566370614359172 16 periodic
//! axis -18.84955592153876 18.84955592153876 16 wall
//! block f 1 1536
//! <one coefficient per line>
//! block fields 1 48
//! <one coefficient per line>
//! ```
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! reading a snapshot back reproduces every coefficient bit for bit.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::dg::{Basis, DGField};
use crate::error::{Error, Result};
use crate::kinetic::{SimulationState, SystemKind};
use crate::mesh::{AxisSpec, Mesh};

const MAGIC: &str = "vlasov-siac-snapshot 1";

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub case: String,
    pub state: SimulationState,
}

pub fn format_snapshot(case: &str, state: &SimulationState) -> String {
    let mesh = state.f.mesh();
    let mut s = String::with_capacity(24 * (state.f.coeffs().len() + state.fields.coeffs().len()) + 256);
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "case {case}");
    let _ = writeln!(s, "system {}", state.kind.tag());
    let _ = writeln!(s, "t {:?}", state.t);
    let _ = writeln!(s, "degree {}", state.degree());
    for ax in mesh.axes() {
        let bc = if ax.periodic { "periodic" } else { "wall" };
        let _ = writeln!(s, "axis {:?} {:?} {} {bc}", ax.lo, ax.hi, ax.n_cells);
    }
    for (name, field) in [("f", &state.f), ("fields", &state.fields)] {
        let _ = writeln!(s, "block {name} {} {}", field.n_components(), field.coeffs().len());
        for c in field.coeffs() {
            let _ = writeln!(s, "{c:?}");
        }
    }
    s
}

pub fn write_snapshot(path: &Path, case: &str, state: &SimulationState) -> Result<()> {
    std::fs::write(path, format_snapshot(case, state))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    parse_snapshot(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim())
            }
            None => Err(Error::Parse { line: self.line + 1, msg: "unexpected end of snapshot".into() }),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, msg: msg.into() }
    }

    /// Next line as `keyword rest...`, checking the keyword.
    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let l = self.next()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`, got `{l}`")));
        }
        Ok(parts.collect())
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("invalid number `{s}`")))
    }

    fn block(&mut self, name: &str, mesh: &Arc<Mesh>, basis: &Arc<Basis>) -> Result<DGField> {
        let head = self.keyed("block")?;
        if head.len() != 3 || head[0] != name {
            return Err(self.err(format!("expected `block {name} <components> <count>`")));
        }
        let nc: usize = self.num(head[1])?;
        let count: usize = self.num(head[2])?;
        if nc == 0 || count != mesh.n_elements() * basis.n_modes() * nc {
            return Err(self.err(format!("block {name} size {count} does not match the mesh")));
        }
        let mut coeffs = Vec::with_capacity(count);
        for _ in 0..count {
            let l = self.next()?;
            coeffs.push(self.num::<f64>(l)?);
        }
        DGField::from_coefficients(mesh.clone(), basis.clone(), nc, coeffs).map_err(|e| self.err(e.to_string()))
    }
}

pub fn parse_snapshot(text: &str) -> Result<Snapshot> {
    let mut r = Lines { inner: text.lines().enumerate(), line: 0 };
    if r.next()? != MAGIC {
        return Err(r.err("not a snapshot file"));
    }
    let case = r.keyed("case")?.join(" ");
    let sys = r.keyed("system")?;
    let kind = sys
        .first()
        .and_then(|t| SystemKind::from_tag(t))
        .ok_or_else(|| r.err("unknown system"))?;
    let t_raw = r.keyed("t")?.first().copied().unwrap_or("");
    let t: f64 = r.num(t_raw)?;
    let k_raw = r.keyed("degree")?.first().copied().unwrap_or("");
    let degree: usize = r.num(k_raw)?;
    if degree > 7 {
        return Err(r.err(format!("degree {degree} unsupported")));
    }
    let mut axes = Vec::new();
    for _ in 0..1 + kind.n_v_axes() {
        let a = r.keyed("axis")?;
        if a.len() != 4 {
            return Err(r.err("expected `axis <lo> <hi> <cells> periodic|wall`"));
        }
        let periodic = match a[3] {
            "periodic" => true,
            "wall" => false,
            other => return Err(r.err(format!("unknown boundary `{other}`"))),
        };
        axes.push(AxisSpec::new(r.num(a[0])?, r.num(a[1])?, r.num(a[2])?, periodic).map_err(|e| r.err(e.to_string()))?);
    }
    let mesh = Arc::new(Mesh::build(&axes[..1], &axes[1..]).map_err(|e| r.err(e.to_string()))?);
    let x_mesh = Arc::new(mesh.x_mesh());
    let f = r.block("f", &mesh, &Arc::new(Basis::new(degree, mesh.dim())))?;
    let fields = r.block("fields", &x_mesh, &Arc::new(Basis::new(degree, 1)))?;
    let state = SimulationState::new(kind, f, fields, t)?;
    Ok(Snapshot { case, state })
}
