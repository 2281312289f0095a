use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{Map, Value};
use thiserror::Error;

use heatlab_core::feynman_kac::{mc_kernel, FkError};
use heatlab_core::geometry::{self, GeometryError, MetricGrid, Model};
use heatlab_core::heat_solver::{fundamental_solution, kernel_column, SolverError, StepPlan};
use heatlab_core::operator::{assemble_box, OperatorError};
use heatlab_core::verifier::VerifyError;
use heatlab_core::{ComplexField, Grid2D};

use crate::config::{ConfigError, RunConfig, Suite};
use crate::output::{flat_report, sha256_hex, Artifacts};
use crate::suite::{gfield_grid, kernel_scale, run_suite};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Geom,
    Rho,
    Kernel,
    Mc,
    Gfield,
    Verify(Suite),
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Geom => "geom",
            Command::Rho => "rho",
            Command::Kernel => "kernel",
            Command::Mc => "mc",
            Command::Gfield => "gfield",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    MonteCarlo(#[from] FkError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Grid(#[from] heatlab_core::grid::GridError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SCHEDULE: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_OPERATOR: i32 = 5;
pub const EXIT_GEOMETRY: i32 = 6;
pub const EXIT_MC: i32 = 7;
pub const EXIT_VERIFIER: i32 = 8;
pub const EXIT_IO: i32 = 9;

impl RunError {
    pub fn exit_code(&self) -> i32 {
        let solver = |e: &SolverError| match e {
            SolverError::ScheduleUnreachable(_) => EXIT_SCHEDULE,
            SolverError::Operator(_) => EXIT_OPERATOR,
            SolverError::Geometry(_) => EXIT_GEOMETRY,
            _ => EXIT_SOLVER,
        };
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Solver(e) => solver(e),
            RunError::Operator(_) => EXIT_OPERATOR,
            RunError::Geometry(_) => EXIT_GEOMETRY,
            RunError::MonteCarlo(_) => EXIT_MC,
            RunError::Verify(VerifyError::Solver(e)) => solver(e),
            RunError::Verify(VerifyError::Operator(_)) => EXIT_OPERATOR,
            RunError::Verify(VerifyError::Geometry(_)) => EXIT_GEOMETRY,
            RunError::Verify(VerifyError::MonteCarlo(_)) => EXIT_MC,
            RunError::Verify(_) => EXIT_VERIFIER,
            RunError::Grid(_) => EXIT_CONFIG,
            RunError::Io(_) => EXIT_IO,
        }
    }
}

pub struct Outcome {
    pub exit_code: i32,
    /// Text for standard output.
    pub summary: String,
    pub files: Vec<String>,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(cfg.canonical().as_bytes())
}

fn field_rows(f: &ComplexField) -> impl Iterator<Item = Vec<f64>> + '_ {
    let g = *f.grid();
    (0..g.len()).map(move |idx| {
        let x = g.coord_of(idx);
        let v = f.as_slice()[idx];
        vec![x[0], x[1], v.re, v.im, v.norm()]
    })
}

const FIELD_HEADER: [&str; 5] = ["x1", "x2", "re", "im", "abs"];

fn num(m: &mut Map<String, Value>, k: &str, v: f64) {
    m.insert(k.into(), Value::from(v));
}

/// Execute `command` and write its artifacts and `manifest.json` under `out`.
pub fn run(cfg: &RunConfig, command: Command, out: &Path) -> Result<Outcome, RunError> {
    let hash = config_hash(cfg);
    let mut art = Artifacts::new(out, &hash)?;
    let p = &cfg.polynomial;
    let mut summary = String::new();
    let mut exit_code = 0;
    match command {
        Command::Geom => {
            let mut rows = Vec::new();
            for &z in &cfg.geom_points {
                let r_taup = geometry::sobolev_radius(p, cfg.tau, z).unwrap_or(f64::NAN);
                for &d in &cfg.geom_deltas {
                    let q = geometry::SizeQuery::new(p, z, d)?;
                    rows.push(vec![z.re, z.im, d, geometry::lambda_fn(&q), geometry::mu_fn(&q)?, r_taup]);
                }
            }
            writeln!(summary, "{} rows", rows.len()).unwrap();
            art.write_csv("geom.csv", &["z_re", "z_im", "delta", "lambda", "mu", "R_taup"], rows)?;
        }
        Command::Rho => {
            let grid = Grid2D::with_spacing(cfg.rho_half_width, cfg.rho_h)?;
            let mg = MetricGrid::new(p, grid)?;
            let model = model_of(p.label());
            let mut rows = Vec::new();
            for (a, &z) in cfg.rho_points.iter().enumerate() {
                for &w in &cfg.rho_points[a + 1..] {
                    let est = geometry::rho_metric(p, z, w, &mg)?;
                    let closed = match model {
                        Some((m, order)) => geometry::rho_closed_form(m, order, z, w)?,
                        None => f64::NAN,
                    };
                    let size = geometry::size_sum(p, z, w)?;
                    rows.push(vec![z.re, z.im, w.re, w.im, est.grid, est.upper, closed, size, est.grid / closed]);
                }
            }
            writeln!(summary, "{} pairs", rows.len()).unwrap();
            art.write_csv(
                "rho.csv",
                &["z_re", "z_im", "w_re", "w_im", "rho_grid", "rho_upper", "rho_closed", "size_sum", "ratio"],
                rows,
            )?;
        }
        Command::Kernel => {
            let grid = Grid2D::new(cfg.half_width, cfg.n)?;
            let op = assemble_box(p, cfg.tau, grid)?;
            let col = kernel_column(&op, cfg.w0, &cfg.schedule, StepPlan::adaptive(cfg.dt, cfg.dt_max, cfg.step_rho))?;
            for (k, f) in col.snapshots.iter().enumerate() {
                art.write_csv(&format!("kernel_{k:03}.csv"), &FIELD_HEADER, field_rows(f))?;
            }
            let mut m = Map::new();
            let src = col.source.unwrap();
            num(&mut m, "source_x1", grid.coord(src.node.0, src.node.1)[0]);
            num(&mut m, "source_x2", grid.coord(src.node.0, src.node.1)[1]);
            m.insert("times".into(), col.times.iter().map(|t| format!("{t:.16e}")).collect::<Vec<_>>().join(",").into());
            m.insert("steps".into(), col.meta.steps.into());
            num(&mut m, "smallest_step", col.meta.smallest_step);
            num(&mut m, "largest_step", col.meta.largest_step);
            m.insert("max_cg_iterations".into(), col.meta.max_cg_iterations.into());
            num(&mut m, "max_cg_residual", col.meta.max_cg_residual);
            art.write_json("kernel.json", m)?;
            writeln!(summary, "{} snapshots, {} steps", col.times.len(), col.meta.steps).unwrap();
        }
        Command::Mc => {
            let est = mc_kernel(p, cfg.tau, cfg.mc_x, cfg.mc_y, cfg.mc_s, cfg.n_paths, cfg.n_t, cfg.seed)?;
            let mut m = Map::new();
            num(&mut m, "estimate_re", est.estimate.re);
            num(&mut m, "estimate_im", est.estimate.im);
            num(&mut m, "stderr", est.stderr);
            num(&mut m, "free_factor", est.free_factor);
            m.insert("n_paths".into(), est.n_paths.into());
            m.insert("n_t".into(), est.n_t.into());
            m.insert("seed".into(), est.seed.into());
            num(&mut m, "x1", cfg.mc_x[0]);
            num(&mut m, "x2", cfg.mc_x[1]);
            num(&mut m, "y1", cfg.mc_y[0]);
            num(&mut m, "y2", cfg.mc_y[1]);
            num(&mut m, "s", cfg.mc_s);
            num(&mut m, "tau", cfg.tau);
            m.insert("polynomial".into(), p.label().into());
            writeln!(summary, "H = {:.6e} + {:.6e}i ± {:.2e}", est.estimate.re, est.estimate.im, est.stderr).unwrap();
            art.write_json("mc.json", m)?;
        }
        Command::Gfield => {
            let (grid, mu) = if cfg.tau > 0.0 {
                let mu = kernel_scale(cfg)?;
                (gfield_grid(mu)?, mu)
            } else {
                (Grid2D::new(cfg.half_width, cfg.n)?, 1.0)
            };
            let s_max = cfg.gfield_s_max.unwrap_or(10.0 * mu * mu);
            let gf = fundamental_solution(p, cfg.tau, grid, cfg.w0, s_max, cfg.gfield_points)?;
            art.write_csv("gfield.csv", &FIELD_HEADER, field_rows(&gf.field))?;
            let mut m = Map::new();
            num(&mut m, "mu", mu);
            num(&mut m, "s_max", gf.s_max);
            num(&mut m, "tail", gf.tail);
            num(&mut m, "tail_rate", gf.rate);
            num(&mut m, "near_value", gf.near_value);
            num(&mut m, "near_radius", gf.near_radius);
            num(&mut m, "L", grid.half_width());
            m.insert("n".into(), grid.n().into());
            m.insert("schedule_points".into(), gf.times.len().into());
            art.write_json("gfield.json", m)?;
            writeln!(summary, "tail {:.3e}, |G| at radius {:.3} = {:.4e}", gf.tail, gf.near_radius, gf.near_value).unwrap();
        }
        Command::Verify(suite) => {
            let reports = run_suite(cfg, &suite.expand())?;
            writeln!(summary, "{:<12} {:<7} {:>14} {:>14} {:>9}", "check", "verdict", "margin", "threshold", "samples").unwrap();
            for (s, r) in &reports {
                art.write_json(&format!("report_{}.json", s.name()), flat_report(r))?;
                let v = if r.passed() { "pass" } else { "fail" };
                writeln!(summary, "{:<12} {:<7} {:>14.6e} {:>14.6e} {:>9}", s.name(), v, r.worst_margin, r.threshold, r.samples)
                    .unwrap();
                if !r.passed() {
                    exit_code = EXIT_VERIFY_FAILED;
                }
            }
        }
    }
    let mut m = Map::new();
    m.insert("command".into(), command.name().into());
    m.insert("config".into(), cfg.canonical().into());
    m.insert("oracle_mode".into(), cfg.oracle_mode.into());
    m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    m.insert("exit_code".into(), exit_code.into());
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    art.write_manifest(m, created)?;
    let files = art.written().iter().map(|(n, _)| n.clone()).collect();
    Ok(Outcome { exit_code, summary, files })
}

fn model_of(label: &str) -> Option<(Model, u32)> {
    let (fam, m) = label.split_once(':')?;
    let m = m.parse().ok()?;
    match fam {
        "p1" => Some((Model::P1, m)),
        "p2" => Some((Model::P2, m)),
        _ => None,
    }
}
