//! Crank–Nicolson evolution of `∂_s u + □u = 0`, heat-kernel columns and the
//! fundamental solution `G = ∫ H ds`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit;
use crate::geometry::{self, GeometryError};
use crate::grid::{ComplexField, Grid2D, GridError};
use crate::linalg::{self, CgStats};
use crate::operator::{assemble_box, DiscreteBox, OperatorError, ShiftedBox};
use crate::polynomial::PolynomialSpec;

/// Relative residual for each implicit solve.
pub const CG_TOL: f64 = 1e-10;
const CG_MAX_ITER: usize = 5000;
/// Minimum number of steps between consecutive schedule times.
pub const MIN_STEPS_PER_GAP: usize = 10;
/// Minimum number of constant steps before the first snapshot of a kernel column.
pub const BURN_IN_STEPS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("linear solver stalled at s = {s:.6e} (residual {residual:.3e} after {iterations} iterations)")]
    SolverDiverged { s: f64, residual: f64, iterations: usize },
    #[error("schedule unreachable: {0}")]
    ScheduleUnreachable(String),
    #[error("integral tail not negligible: tail {tail:.3e} vs near-diagonal value {near:.3e} (fitted rate {rate:.3e})")]
    TailNotNegligible { tail: f64, near: f64, rate: f64 },
    #[error("S_max = {s_max} is below 10·mu² = {needed}")]
    HorizonTooShort { s_max: f64, needed: f64 },
    #[error("need at least {need} schedule points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Time-step policy: step `clamp(rho·s, dt, dt_max)`, adjusted so every
/// schedule time is hit exactly with at least [`MIN_STEPS_PER_GAP`] steps per
/// gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub dt: f64,
    pub dt_max: f64,
    pub rho: f64,
}

impl StepPlan {
    pub fn fixed(dt: f64) -> Self {
        Self { dt, dt_max: dt, rho: 0.0 }
    }

    pub fn adaptive(dt: f64, dt_max: f64, rho: f64) -> Self {
        Self { dt, dt_max, rho }
    }

    fn desired(&self, s: f64) -> f64 {
        (self.rho * s).clamp(self.dt, self.dt_max.max(self.dt))
    }

    /// Step sizes covering `[a, b]`.
    fn steps_in(&self, a: f64, b: f64, min_steps: usize) -> (usize, f64) {
        let gap = b - a;
        // ∫ ds / desired(s), integrated coarsely
        let mut s = a;
        let mut count = 0.0;
        while s < b && count < 1e7 {
            let st = self.desired(s).min(b - s);
            count += st / self.desired(s);
            s += st;
        }
        let m = (count - 1e-9).ceil().max(min_steps as f64) as usize;
        (m, gap / m as f64)
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.dt_max >= self.dt && self.rho >= 0.0) {
            return Err(SolverError::ScheduleUnreachable(format!("invalid step plan {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub grid: Grid2D,
    pub tau: f64,
    pub polynomial: String,
    pub plan: StepPlan,
    pub steps: usize,
    pub smallest_step: f64,
    pub largest_step: f64,
    pub max_cg_iterations: usize,
    pub max_cg_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub point: Complex64,
    pub node: (usize, usize),
}

/// Snapshots of one evolution, `H(s, ·, w₀)` when started from a point mass.
#[derive(Clone, Debug)]
pub struct KernelColumn {
    pub source: Option<Source>,
    pub times: Vec<f64>,
    pub snapshots: Vec<ComplexField>,
    pub meta: SolverMeta,
}

impl KernelColumn {
    pub fn grid(&self) -> &Grid2D {
        self.snapshots[0].grid()
    }

    /// Snapshot index of time `s`, if it is on the schedule.
    pub fn index_of(&self, s: f64) -> Option<usize> {
        self.times.iter().position(|&t| (t - s).abs() <= 1e-12 * s.max(1.0))
    }

    pub fn l2_norms(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.norm_l2()).collect()
    }

    /// Coordinates of the source node.
    pub fn source_coord(&self) -> Option<[f64; 2]> {
        self.source.map(|s| self.grid().coord(s.node.0, s.node.1))
    }

    /// Copy of the snapshots with `s_min ≤ s ≤ s_max`.
    pub fn window(&self, s_min: f64, s_max: f64) -> KernelColumn {
        let keep: Vec<usize> = (0..self.times.len())
            .filter(|&k| self.times[k] >= s_min * (1.0 - 1e-12) && self.times[k] <= s_max * (1.0 + 1e-12))
            .collect();
        KernelColumn {
            source: self.source,
            times: keep.iter().map(|&k| self.times[k]).collect(),
            snapshots: keep.iter().map(|&k| self.snapshots[k].clone()).collect(),
            meta: self.meta.clone(),
        }
    }
}

struct Stepper<'a> {
    op: &'a DiscreteBox,
    c: f64,
    inv_diag: Vec<f64>,
    rhs: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    fn new(op: &'a DiscreteBox) -> Self {
        Self { op, c: f64::NAN, inv_diag: Vec::new(), rhs: vec![Complex64::default(); op.grid().len()] }
    }

    fn step(&mut self, u: &mut [Complex64], dt: f64) -> Result<CgStats, CgStats> {
        let c = 0.5 * dt;
        if c != self.c {
            self.c = c;
            self.inv_diag = self.op.shifted_inverse_diagonal(c);
        }
        self.op.apply_affine(1.0, -c, u, &mut self.rhs);
        let a = ShiftedBox { op: self.op, c };
        linalg::pcg(&a, &self.inv_diag, &self.rhs, u, CG_TOL, CG_MAX_ITER)
    }
}

/// Crank–Nicolson evolution from `u0`, snapshotting exactly at each schedule
/// time.
pub fn evolve(op: &DiscreteBox, u0: &ComplexField, schedule: &[f64], plan: StepPlan) -> Result<KernelColumn, SolverError> {
    evolve_inner(op, u0, schedule, plan, 0)
}

fn evolve_inner(
    op: &DiscreteBox,
    u0: &ComplexField,
    schedule: &[f64],
    plan: StepPlan,
    first_gap_min: usize,
) -> Result<KernelColumn, SolverError> {
    plan.validate()?;
    if schedule.is_empty() {
        return Err(SolverError::ScheduleUnreachable("empty schedule".into()));
    }
    if !(schedule[0] > 0.0) || schedule.windows(2).any(|w| !(w[1] > w[0])) || schedule.iter().any(|s| !s.is_finite()) {
        return Err(SolverError::ScheduleUnreachable("schedule must be positive, finite and strictly ascending".into()));
    }
    let mut u = u0.clone();
    u.clear_boundary(1);
    let mut u = u.into_vec();
    let mut stepper = Stepper::new(op);
    let mut snapshots = Vec::with_capacity(schedule.len());
    let mut s = 0.0;
    let mut steps = 0;
    let mut smallest = f64::INFINITY;
    let mut largest: f64 = 0.0;
    let mut max_it = 0;
    let mut max_res: f64 = 0.0;
    for (k, &target) in schedule.iter().enumerate() {
        let mut segments = Vec::with_capacity(2);
        if k == 0 && first_gap_min > 0 {
            let burn = plan.dt * first_gap_min as f64;
            if target < burn * (1.0 - 1e-12) {
                return Err(SolverError::ScheduleUnreachable(format!(
                    "first time {target} precedes the burn-in of {first_gap_min} steps of {}",
                    plan.dt
                )));
            }
            if target <= burn * (1.0 + 1e-12) {
                segments.push((first_gap_min, target / first_gap_min as f64));
            } else {
                segments.push((first_gap_min, plan.dt));
                segments.push(plan.steps_in(burn, target, 1));
            }
        } else {
            segments.push(plan.steps_in(s, target, MIN_STEPS_PER_GAP));
        }
        let mut now = s;
        for (m, dt) in segments {
            for _ in 0..m {
                let stats = stepper.step(&mut u, dt).map_err(|st| SolverError::SolverDiverged {
                    s: now,
                    residual: st.relative_residual,
                    iterations: st.iterations,
                })?;
                now += dt;
                max_it = max_it.max(stats.iterations);
                max_res = max_res.max(stats.relative_residual);
            }
            steps += m;
            smallest = smallest.min(dt);
            largest = largest.max(dt);
        }
        s = target;
        let field = ComplexField::from_vec(*op.grid(), u.clone());
        if !field.is_finite() {
            return Err(SolverError::SolverDiverged { s, residual: f64::NAN, iterations: 0 });
        }
        snapshots.push(field);
    }
    Ok(KernelColumn {
        source: None,
        times: schedule.to_vec(),
        snapshots,
        meta: SolverMeta {
            grid: *op.grid(),
            tau: op.tau(),
            polynomial: op.polynomial().label().to_string(),
            plan,
            steps,
            smallest_step: smallest,
            largest_step: largest,
            max_cg_iterations: max_it,
            max_cg_residual: max_res,
        },
    })
}

/// Column `H(s, ·, w₀)` evolved from the discrete point mass at the node
/// nearest `w0`.
///
/// The first schedule time must allow [`BURN_IN_STEPS`] steps of `plan.dt`.
pub fn kernel_column(op: &DiscreteBox, w0: Complex64, schedule: &[f64], plan: StepPlan) -> Result<KernelColumn, SolverError> {
    let grid = *op.grid();
    let node = grid.nearest_node([w0.re, w0.im])?;
    let u0 = ComplexField::point_mass(grid, node.0, node.1);
    let mut col = evolve_inner(op, &u0, schedule, plan, BURN_IN_STEPS)?;
    col.source = Some(Source { point: w0, node });
    Ok(col)
}

/// Log-spaced times `s_min · q^k`, `k = 0..n`, ending exactly at `s_max`.
pub fn log_schedule(s_min: f64, s_max: f64, n: usize) -> Vec<f64> {
    let r = (s_max / s_min).ln();
    (0..n)
        .map(|k| if k + 1 == n { s_max } else { s_min * (r * k as f64 / (n - 1) as f64).exp() })
        .collect()
}

#[derive(Clone, Debug)]
pub struct FundamentalSolutionField {
    pub source: Source,
    pub field: ComplexField,
    pub s_max: f64,
    /// Schedule used for the s-integral.
    pub times: Vec<f64>,
    /// `|H(S_max, w₀, w₀)| / rate`, the estimated remainder `∫_{S_max}^∞`.
    pub tail: f64,
    /// Late-time decay rate fitted from the on-diagonal value.
    pub rate: f64,
    /// `|G|` at distance `near_radius` from the source.
    pub near_value: f64,
    pub near_radius: f64,
    pub meta: SolverMeta,
}

/// `G(·, w₀) = ∫₀^{S_max} H(s, ·, w₀) ds` by the trapezoid rule over a
/// log-spaced schedule.
pub fn fundamental_solution(
    p: &PolynomialSpec,
    tau: f64,
    grid: Grid2D,
    w0: Complex64,
    s_max: f64,
    n_points: usize,
) -> Result<FundamentalSolutionField, SolverError> {
    if n_points < 60 {
        return Err(SolverError::TooFewPoints { need: 60, got: n_points });
    }
    let near_radius = if tau > 0.0 {
        let mu = geometry::mu_at(p, w0, 1.0 / tau)?;
        if s_max < 10.0 * mu * mu {
            return Err(SolverError::HorizonTooShort { s_max, needed: 10.0 * mu * mu });
        }
        0.25 * mu
    } else {
        0.25 * s_max.sqrt()
    };
    let op = assemble_box(p, tau, grid)?;
    let h = grid.spacing();
    let s0 = 0.5 * h * h;
    let dt = s0 / BURN_IN_STEPS as f64;
    let times = log_schedule(s0, s_max, n_points);
    let plan = StepPlan::adaptive(dt, f64::INFINITY, 0.02);
    let col = kernel_column(&op, w0, &times, plan)?;
    let node = col.source.unwrap().node;

    // ∫₀^{s₀} by one trapezoid panel from the initial point mass
    let mut g = ComplexField::point_mass(grid, node.0, node.1).scaled(0.5 * s0);
    {
        let gs = g.as_mut_slice();
        for (v, h0) in gs.iter_mut().zip(col.snapshots[0].as_slice()) {
            *v += h0 * (0.5 * s0);
        }
        for k in 1..times.len() {
            let w = 0.5 * (times[k] - times[k - 1]);
            let (a, b) = (col.snapshots[k - 1].as_slice(), col.snapshots[k].as_slice());
            for ((v, x), y) in gs.iter_mut().zip(a).zip(b) {
                *v += (x + y) * w;
            }
        }
    }

    // decay rate of |H(s, w₀, w₀)| over the last fifth of the schedule
    let start = times.len() * 4 / 5;
    let xs: Vec<f64> = times[start..].to_vec();
    let ys: Vec<f64> = col.snapshots[start..].iter().map(|f| f.at(node.0, node.1).norm().ln()).collect();
    let rate = -fit::line(&xs, &ys).slope;
    let last = col.snapshots.last().unwrap().at(node.0, node.1).norm();
    let tail = if rate > 0.0 { last / rate } else { f64::INFINITY };
    let ring = (near_radius / h).round().max(1.0) as usize;
    let near_value = g.at(node.0 + ring, node.1).norm();
    let field = FundamentalSolutionField {
        source: col.source.unwrap(),
        field: g,
        s_max,
        times,
        tail,
        rate,
        near_value,
        near_radius: ring as f64 * h,
        meta: col.meta,
    };
    if !(rate > 0.0) || tail > 0.05 * near_value {
        return Err(SolverError::TailNotNegligible { tail, near: near_value, rate });
    }
    Ok(field)
}

/// `Σ_v H(s, z, v) H(s, v, w₀) h²` using `H(s, z, v) = conj(H(s, v, z))`, i.e.
/// `⟨conj(col_z), col_{w₀}⟩`.
pub fn reproduce(col_z: &ComplexField, col_w: &ComplexField) -> Complex64 {
    let h2 = col_z.grid().spacing().powi(2);
    col_z.as_slice().iter().zip(col_w.as_slice()).map(|(a, b)| a * b).sum::<Complex64>() * h2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::model_p1;

    fn free_kernel(s: f64, r2: f64) -> f64 {
        (-r2 / s).exp() / (std::f64::consts::PI * s)
    }

    #[test]
    fn schedule_guards() {
        let g = Grid2D::new(4.0, 65).unwrap();
        let op = assemble_box(&model_p1(1).unwrap(), 1.0, g).unwrap();
        let plan = StepPlan::fixed(1e-3);
        let w0 = Complex64::new(0.0, 0.0);
        assert!(matches!(kernel_column(&op, w0, &[0.01], plan), Err(SolverError::ScheduleUnreachable(_))));
        assert!(matches!(kernel_column(&op, w0, &[0.1, 0.05], plan), Err(SolverError::ScheduleUnreachable(_))));
        assert!(kernel_column(&op, w0, &[0.02], plan).is_ok());
        assert!(matches!(kernel_column(&op, Complex64::new(9.0, 0.0), &[0.1], plan), Err(SolverError::Grid(_))));
    }

    #[test]
    fn step_plan_hits_schedule() {
        let plan = StepPlan::adaptive(1e-3, 0.05, 0.02);
        let (m, dt) = plan.steps_in(1.0, 2.0, 10);
        assert!((m as f64 * dt - 1.0).abs() < 1e-12);
        assert!(m >= 35 && m <= 50, "{m}");
        let (m, _) = StepPlan::fixed(5e-4).steps_in(0.5, 1.0, 10);
        assert_eq!(m, 1000);
    }

    #[test]
    fn free_kernel_centre_value() {
        let g = Grid2D::new(6.0, 193).unwrap();
        let op = assemble_box(&model_p1(1).unwrap(), 0.0, g).unwrap();
        let col = kernel_column(&op, Complex64::new(0.0, 0.0), &[0.5, 1.0], StepPlan::fixed(2.5e-3)).unwrap();
        let c = col.snapshots[1].at(96, 96).re;
        assert!((c - 1.0 / std::f64::consts::PI).abs() < 0.02 / std::f64::consts::PI, "{c}");
        let x = g.coord(110, 90);
        let v = col.snapshots[0].at(110, 90).re;
        let e = free_kernel(0.5, x[0] * x[0] + x[1] * x[1]);
        assert!((v - e).abs() < 0.02 * free_kernel(0.5, 0.0), "{v} vs {e}");
    }

    #[test]
    fn contraction_and_landau_decay() {
        let g = Grid2D::new(4.0, 97).unwrap();
        let op = assemble_box(&model_p1(1).unwrap(), 1.0, g).unwrap();
        let times: Vec<f64> = (1..=12).map(|k| 0.25 * k as f64).collect();
        let col = kernel_column(&op, Complex64::new(0.0, 0.0), &times, StepPlan::adaptive(2e-3, 0.02, 0.02)).unwrap();
        let norms = col.l2_norms();
        assert!(norms.windows(2).all(|w| w[1] < w[0]));
        // log ‖u‖ slope → −2τ (lowest Landau level)
        let xs = &times[6..];
        let ys: Vec<f64> = norms[6..].iter().map(|v| v.ln()).collect();
        let slope = fit::line(xs, &ys).slope;
        assert!((slope + 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn mehler_kernel_for_quadratic_weight() {
        // H(s,x,0) = e^{−τs} τ/(π sinh τs) exp(−τ coth(τs) |x|²)
        let tau = 1.0;
        let g = Grid2D::new(4.0, 129).unwrap();
        let op = assemble_box(&model_p1(1).unwrap(), tau, g).unwrap();
        let col = kernel_column(&op, Complex64::new(0.0, 0.0), &[0.5], StepPlan::fixed(1e-3)).unwrap();
        let s: f64 = 0.5;
        let peak = (-tau * s).exp() * tau / (std::f64::consts::PI * (tau * s).sinh());
        for (i, j) in [(64, 64), (70, 64), (64, 58), (72, 72)] {
            let x = g.coord(i, j);
            let r2 = x[0] * x[0] + x[1] * x[1];
            let e = peak * (-tau * r2 / (tau * s).tanh()).exp();
            let v = col.snapshots[0].at(i, j);
            assert!((v - e).norm() < 0.01 * peak, "({i},{j}) {v} vs {e}");
        }
    }

    #[test]
    fn fundamental_solution_guards() {
        let p = model_p1(1).unwrap();
        let g = Grid2D::new(4.0, 65).unwrap();
        let w0 = Complex64::new(0.0, 0.0);
        assert!(matches!(fundamental_solution(&p, 1.0, g, w0, 5.0, 30), Err(SolverError::TooFewPoints { .. })));
        assert!(matches!(fundamental_solution(&p, 1.0, g, w0, 5.0, 60), Err(SolverError::HorizonTooShort { .. })));
        let r = fundamental_solution(&p, 0.0, g, w0, 4.0, 60);
        assert!(matches!(r, Err(SolverError::TailNotNegligible { .. })), "{:?}", r.map(|f| (f.tail, f.near_value, f.rate)));
    }

    #[test]
    fn fundamental_solution_inverts_box() {
        // □G = δ away from the source
        let p = model_p1(1).unwrap();
        let g = Grid2D::new(4.0, 129).unwrap();
        let gf = fundamental_solution(&p, 1.0, g, Complex64::new(0.0, 0.0), 12.0, 80).unwrap();
        let op = assemble_box(&p, 1.0, g).unwrap();
        let bg = op.apply_field(&gf.field);
        let h = g.spacing();
        let src = bg.at(64, 64).re * h * h;
        assert!((src - 1.0).abs() < 0.02, "{src}");
        let off: f64 = g.interior(4).filter(|&(i, j)| (i, j) != (64, 64)).map(|(i, j)| bg.at(i, j).norm()).fold(0.0, f64::max);
        assert!(off * h * h < 0.02, "{off}");
    }
}
