use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vlasov_siac::bench::{self, Case, RunConfig};
use vlasov_siac::diagnostics::{convergence_orders, emit_table, table_csv, ErrorNorms, ErrorReport, ErrorScale};
use vlasov_siac::integrator::{DtFormula, DtMode};
use vlasov_siac::siac::{postprocess_field, EvalGrid, SiacKernel};
use vlasov_siac::snapshot::{read_snapshot, write_snapshot};
use vlasov_siac::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

/// DG Vlasov–Ampère / streaming Weibel solver with SIAC post-processing.
#[derive(Parser)]
#[command(name = "vlasov-siac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate forward to the final time.
    Run {
        #[command(flatten)]
        common: Common,
        /// Write a snapshot every N steps (requires --out).
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Run to T, reverse velocities, run back and report errors.
    Reverse {
        #[command(flatten)]
        common: Common,
    },
    /// Reversibility runs over a doubling mesh sequence.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Cells per axis, coarsest first, e.g. 16,32,64.
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        meshes: Vec<usize>,
        /// CSV table path (default: <out>/table.csv or ./table.csv).
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Apply the SIAC filter to a saved snapshot and export plot columns.
    Filter {
        /// Snapshot file written by `run` or `reverse`.
        snapshot: PathBuf,
        /// Uniform samples per axis.
        #[arg(long, default_value_t = 64)]
        points: usize,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    nx: Option<usize>,
    /// Cells per velocity axis: one value or a comma list.
    #[arg(long)]
    nv: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    tfinal: Option<f64>,
    #[arg(long, overrides_with = "no_filter")]
    filter: bool,
    #[arg(long)]
    no_filter: bool,
    /// adaptive | frozen
    #[arg(long)]
    dt_mode: Option<String>,
    /// by_degree | linear
    #[arg(long)]
    dt_formula: Option<String>,
    /// absolute | rms
    #[arg(long)]
    error_norm: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> vlasov_siac::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::parse(&std::fs::read_to_string(p)?)?,
            None => RunConfig::new(Case::Landau),
        };
        let mut set = |k: &str, v: String| cfg.set(k, &v).map_err(Error::Usage);
        if let Some(c) = &self.case {
            set("case", c.clone())?;
        }
        if let Some(n) = self.nx {
            set("nx", n.to_string())?;
        }
        if let Some(n) = &self.nv {
            set("nv", n.clone())?;
        }
        if let Some(k) = self.degree {
            set("degree", k.to_string())?;
        }
        if let Some(c) = self.cfl {
            set("cfl", c.to_string())?;
        }
        if let Some(t) = self.tfinal {
            set("t_final", t.to_string())?;
        }
        if self.filter {
            set("filter", "true".into())?;
        }
        if self.no_filter {
            set("filter", "false".into())?;
        }
        if let Some(m) = &self.dt_mode {
            DtMode::parse(m).ok_or_else(|| Error::Usage(format!("unknown dt mode `{m}`")))?;
            set("dt_mode", m.clone())?;
        }
        if let Some(f) = &self.dt_formula {
            DtFormula::parse(f).ok_or_else(|| Error::Usage(format!("unknown dt formula `{f}`")))?;
            set("dt_formula", f.clone())?;
        }
        if let Some(e) = &self.error_norm {
            ErrorScale::parse(e).ok_or_else(|| Error::Usage(format!("unknown error norm `{e}`")))?;
            set("error_norm", e.clone())?;
        }
        if let Some(o) = &self.out {
            set("out_dir", o.display().to_string())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_norms(label: &str, n: &ErrorNorms, names: &[&str]) {
    print!("{label}: f L2 {:.6e} Linf {:.6e}", n.f_l2, n.f_linf);
    for (i, name) in names.iter().enumerate() {
        print!(" | {name} L2 {:.6e} Linf {:.6e}", n.field_l2[i], n.field_linf[i]);
    }
    println!();
}

fn print_report(r: &ErrorReport) {
    let names = r.kind.field_names();
    println!("{} {} P{} T={} steps={} runtime={:.2}s", r.case, r.mesh_label(), r.degree, r.t_final, r.steps, r.runtime_seconds);
    print_norms("raw", &r.raw, names);
    if let Some(f) = &r.filtered {
        print_norms("filtered", f, names);
    }
}

fn ensure_dir(d: &Path) -> vlasov_siac::Result<()> {
    std::fs::create_dir_all(d)?;
    Ok(())
}

fn execute(cli: Cli) -> vlasov_siac::Result<()> {
    match cli.command {
        Command::Run { common, snapshot_every } => {
            let mut cfg = common.config()?;
            if let Some(n) = snapshot_every {
                if cfg.out_dir.is_none() {
                    return Err(Error::Usage("--snapshot-every needs --out".into()));
                }
                cfg.snapshot_every = n;
            }
            let out = bench::run(&cfg)?;
            let last = out.history.last().map(|r| r.quantities);
            println!("{} reached t={} in {} steps", cfg.case.name(), out.state.t, out.steps);
            if let Some(q) = last {
                println!("mass {:.15e} l2_f {:.15e} energy {:.15e}", q.mass, q.l2_f, q.energy());
            }
            if let Some(d) = &cfg.out_dir {
                ensure_dir(d)?;
                write_snapshot(&d.join("final.snapshot"), cfg.case.name(), &out.state)?;
                std::fs::write(d.join("config.txt"), cfg.serialize()?)?;
            }
        }
        Command::Reverse { common } => {
            let cfg = common.config()?;
            let r = bench::reversibility_experiment(&cfg)?;
            print_report(&r);
            if let Some(d) = &cfg.out_dir {
                ensure_dir(d)?;
                let mut t = vlasov_siac::diagnostics::ConvergenceTable::new();
                t.push(r);
                emit_table(&t, &d.join("reverse.csv"), &cfg.entries()?)?;
            }
        }
        Command::Converge { common, meshes, table } => {
            let cfg = common.config()?;
            let path = match (table, &cfg.out_dir) {
                (Some(p), _) => p,
                (None, Some(d)) => {
                    ensure_dir(d)?;
                    d.join("table.csv")
                }
                (None, None) => PathBuf::from("table.csv"),
            };
            let t = bench::run_convergence_study(&cfg, &meshes, Some(&path))?;
            for r in &t.rows {
                print_report(r);
            }
            if t.rows.len() >= 2 {
                print!("{}", table_csv(&convergence_orders(&t)?));
            }
            println!("table written to {}", path.display());
        }
        Command::Filter { snapshot, points, out } => {
            if points == 0 {
                return Err(Error::Usage("--points must be positive".into()));
            }
            let snap = read_snapshot(&snapshot)?;
            let s = &snap.state;
            let kernel = SiacKernel::new(s.degree())?;
            ensure_dir(&out)?;
            let v_names: &[&str] = if s.kind.n_v_axes() == 1 { &["x", "v"] } else { &["x", "v1", "v2"] };
            let grid = EvalGrid::Uniform { per_axis: vec![points; s.f.mesh().dim()] };
            let fs = postprocess_field(&s.f, 0, &kernel, &grid)?;
            fs.write_columns(BufWriter::new(File::create(out.join("f_filtered.dat"))?), v_names)?;
            write_raw(&s.f, 0, &fs.coords, v_names, &out.join("f_raw.dat"))?;
            let xgrid = EvalGrid::Uniform { per_axis: vec![points] };
            for (c, name) in s.kind.field_names().iter().enumerate() {
                let fs = postprocess_field(&s.fields, c, &kernel, &xgrid)?;
                fs.write_columns(BufWriter::new(File::create(out.join(format!("{name}_filtered.dat")))?), &["x"])?;
                write_raw(&s.fields, c, &fs.coords, &["x"], &out.join(format!("{name}_raw.dat")))?;
            }
            println!("{} t={} filtered on {points} points per axis into {}", snap.case, s.t, out.display());
        }
    }
    Ok(())
}

/// Unfiltered DG values on the same tensor grid as a filtered sample.
fn write_raw(
    field: &vlasov_siac::dg::DGField,
    c: usize,
    coords: &[Vec<f64>],
    names: &[&str],
    path: &Path,
) -> vlasov_siac::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# {} value", names.join(" "))?;
    let lens: Vec<usize> = coords.iter().map(|c| c.len()).collect();
    let total: usize = lens.iter().product();
    let mut p = vec![0.0; lens.len()];
    for flat in 0..total {
        let mut rem = flat;
        for a in (0..lens.len()).rev() {
            p[a] = coords[a][rem % lens[a]];
            rem /= lens[a];
        }
        let v = field.eval(&p)?[c];
        for x in &p {
            write!(w, "{x:.17e} ")?;
        }
        writeln!(w, "{v:.17e}")?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Usage(_) | Error::Config(_) | Error::Parse { .. } => EXIT_USAGE,
                Error::Divergence { .. } => EXIT_DIVERGENCE,
                _ => EXIT_FAILURE,
            })
        }
    }
}
