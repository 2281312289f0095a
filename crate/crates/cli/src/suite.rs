//! The `verify` suites on one configuration.

use num_complex::Complex64;

use heatlab_core::geometry;
use heatlab_core::heat_solver::{fundamental_solution, kernel_column, log_schedule, KernelColumn, StepPlan};
use heatlab_core::operator::assemble_box;
use heatlab_core::report::BoundReport;
use heatlab_core::verifier::{self, AppendixParams, Cylinder, DerivativeWindow, ScalingParams, VerifyError};
use heatlab_core::Grid2D;

use crate::config::{RunConfig, Suite};

/// `μ(w₀, 1/τ)`, or 1 when τ = 0.
pub fn kernel_scale(cfg: &RunConfig) -> Result<f64, VerifyError> {
    if cfg.tau > 0.0 {
        Ok(geometry::mu_at(&cfg.polynomial, cfg.w0, 1.0 / cfg.tau)?)
    } else {
        Ok(1.0)
    }
}

/// Grid for `G`: half-width `5μ` at spacing `μ/32`.
pub fn gfield_grid(mu: f64) -> Result<Grid2D, VerifyError> {
    Ok(Grid2D::with_spacing(5.0 * mu, mu / 32.0)?)
}

fn lin(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

struct Windows {
    derivs: DerivativeWindow,
    gaussian: (f64, f64),
    sub: (f64, f64),
    long: (f64, f64),
}

fn windows(cfg: &RunConfig, grid: &Grid2D, mu2: f64) -> Windows {
    let h = grid.spacing();
    let lo = (0.02 * mu2).max(20.0 * h * h).max(20.0 * cfg.dt);
    Windows {
        derivs: DerivativeWindow { s_min: lo, s_max: 8.0 * lo },
        gaussian: (0.1, 2.0),
        sub: (0.88 * mu2, mu2),
        long: (mu2, 12.0 * mu2),
    }
}

fn main_column(cfg: &RunConfig, grid: Grid2D, w: &Windows) -> Result<KernelColumn, VerifyError> {
    let mut times = log_schedule(w.derivs.s_min, w.derivs.s_max, 10);
    times.extend(log_schedule(w.gaussian.0, w.gaussian.1, 8));
    times.extend(lin(w.sub.0, w.sub.1, 13));
    times.extend(lin(w.long.0, w.long.1, 23));
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    let op = assemble_box(&cfg.polynomial, cfg.tau, grid)?;
    Ok(kernel_column(&op, cfg.w0, &times, StepPlan::adaptive(cfg.dt, cfg.dt_max, cfg.step_rho))?)
}

/// One report per requested suite, in declaration order.
pub fn run_suite(cfg: &RunConfig, suites: &[Suite]) -> Result<Vec<(Suite, BoundReport)>, VerifyError> {
    let p = &cfg.polynomial;
    let grid = Grid2D::new(cfg.half_width, cfg.n)?;
    let mu = kernel_scale(cfg)?;
    let mu2 = mu * mu;
    let w = windows(cfg, &grid, mu2);
    let needs_column = suites
        .iter()
        .any(|s| matches!(s, Suite::Gaussian | Suite::Longtime | Suite::Energy | Suite::Derivs | Suite::Subsolution));
    let col = if needs_column { Some(main_column(cfg, grid, &w)?) } else { None };
    let mut out = Vec::new();
    for &s in suites {
        let r = match s {
            Suite::Gaussian => {
                verifier::check_gaussian(&col.as_ref().unwrap().window(w.gaussian.0, w.gaussian.1))?
            }
            Suite::Longtime => verifier::check_longtime(col.as_ref().unwrap(), p, cfg.tau)?,
            Suite::Energy => verifier::check_energy(&col.as_ref().unwrap().window(w.gaussian.0, w.long.1))?,
            Suite::Derivs => verifier::check_derivatives(col.as_ref().unwrap(), p, cfg.tau, 1, 2, w.derivs)?,
            Suite::Subsolution => {
                let w0 = [cfg.w0.re, cfg.w0.im];
                let cyl: Vec<Cylinder> = [[0.0, 0.0], [0.5, 0.0], [0.0, -0.5], [-0.25, 0.25]]
                    .iter()
                    .map(|o| Cylinder { s0: mu2, x0: [w0[0] + o[0] * mu, w0[1] + o[1] * mu], r: 0.5 * mu })
                    .collect();
                verifier::check_subsolution(&col.as_ref().unwrap().window(w.sub.0, w.sub.1), &cyl)?
            }
            Suite::Scaling => {
                let h = grid.spacing();
                let params = ScalingParams {
                    z0: Complex64::new((mu / h).round().max(1.0) * h, 0.0),
                    lambda: 2.0,
                    plan_dt: cfg.dt,
                };
                verifier::check_scaling(p, cfg.tau, grid, cfg.w0, &[0.25 * mu2, 0.5 * mu2], params)?
            }
            Suite::Gbounds => {
                let s_max = cfg.gfield_s_max.unwrap_or(10.0 * mu2);
                let gf = fundamental_solution(p, cfg.tau, gfield_grid(mu)?, cfg.w0, s_max, cfg.gfield_points)?;
                verifier::check_g_bounds(&gf, p, cfg.tau)?
            }
            Suite::Appendix => {
                verifier::check_appendix_equivalence(&[2, 3], AppendixParams { seed: cfg.seed, ..Default::default() })?
            }
            Suite::All => continue,
        };
        out.push((s, r));
    }
    Ok(out)
}
