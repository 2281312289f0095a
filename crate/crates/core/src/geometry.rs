//! Control-geometry size functions and the associated metric.
//!
//! For a recentered Taylor table `A_{jk}(z)`:
//!
//! ```text
//! Λ(z, δ) = Σ_{j,k≥1} |A_{jk}(z)| δ^{j+k}
//! μ(z, δ) = min_{j,k≥1, A_{jk}≠0} |δ / A_{jk}(z)|^{1/(j+k)}
//! ```
//!
//! `ρ` is the length metric `dρ = ds / μ(·, 1)`, computed by Dijkstra on an
//! 8-neighbour grid graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid2D, GridError};
use crate::polynomial::{PolynomialSpec, RecenteredTaylor};
use crate::report::BoundReport;

/// Relative size below which a Taylor coefficient is treated as zero.
pub const VANISH_REL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("delta must be positive and finite, got {0}")]
    BadDelta(f64),
    #[error("tau must be positive and finite, got {0}")]
    BadTau(f64),
    #[error("every mixed Taylor coefficient vanishes at {0}")]
    AllMixedTermsVanish(Complex64),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("grid too coarse: mu(.,1) changes by {change:.3} across one cell near ({x:.4}, {y:.4})")]
    GridTooCoarse { change: f64, x: f64, y: f64 },
    #[error("non-positive or non-finite metric weight at ({0:.4}, {1:.4})")]
    BadWeight(f64, f64),
    #[error("model order must be at least 1")]
    BadOrder,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Copy, Debug)]
pub struct SizeQuery<'a> {
    pub p: &'a PolynomialSpec,
    pub z: Complex64,
    pub delta: f64,
}

impl<'a> SizeQuery<'a> {
    pub fn new(p: &'a PolynomialSpec, z: Complex64, delta: f64) -> Result<Self, GeometryError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(GeometryError::BadDelta(delta));
        }
        Ok(Self { p, z, delta })
    }
}

/// Mixed Taylor data at one centre, reusable across many `δ`.
#[derive(Clone, Debug)]
pub struct SizeFunctions {
    center: Complex64,
    // (j + k, |A_jk|) for the non-vanishing mixed terms
    mixed: Vec<(u32, f64)>,
}

impl SizeFunctions {
    pub fn new(p: &PolynomialSpec, z: Complex64) -> Self {
        Self::from_taylor(&p.recenter(z))
    }

    pub fn from_taylor(t: &RecenteredTaylor) -> Self {
        let scale = t.entries().map(|(_, a)| a.norm()).fold(0.0, f64::max);
        let mixed = t
            .mixed()
            .filter(|(_, a)| a.norm() > VANISH_REL * scale)
            .map(|((j, k), a)| (j + k, a.norm()))
            .collect();
        Self { center: t.center, mixed }
    }

    pub fn lambda(&self, delta: f64) -> f64 {
        self.mixed.iter().map(|&(d, a)| a * delta.powi(d as i32)).sum()
    }

    pub fn mu(&self, delta: f64) -> Result<f64, GeometryError> {
        self.mixed
            .iter()
            .map(|&(d, a)| (delta / a).powf(1.0 / d as f64))
            .min_by(|a, b| a.total_cmp(b))
            .ok_or(GeometryError::AllMixedTermsVanish(self.center))
    }

    /// Number of non-vanishing mixed terms.
    pub fn term_count(&self) -> usize {
        self.mixed.len()
    }
}

pub fn lambda_fn(q: &SizeQuery) -> f64 {
    SizeFunctions::new(q.p, q.z).lambda(q.delta)
}

pub fn mu_fn(q: &SizeQuery) -> Result<f64, GeometryError> {
    SizeFunctions::new(q.p, q.z).mu(q.delta)
}

/// `μ(z, δ)` without building a [`SizeQuery`].
pub fn mu_at(p: &PolynomialSpec, z: Complex64, delta: f64) -> Result<f64, GeometryError> {
    mu_fn(&SizeQuery::new(p, z, delta)?)
}

/// `μ(z,Λ(z,δ))/δ` and `Λ(z,μ(z,δ))/δ` over the samples; pass iff every ratio
/// lies in `[1/c, c]`.
pub fn approx_inverse_check(
    p: &PolynomialSpec,
    samples: &[(Complex64, f64)],
    c: f64,
) -> Result<BoundReport, GeometryError> {
    if samples.len() < 10 {
        return Err(GeometryError::TooFewSamples { need: 10, got: samples.len() });
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut worst_mu_lambda = (1.0f64, 1.0f64);
    let mut worst_lambda_mu = (1.0f64, 1.0f64);
    for &(z, delta) in samples {
        SizeQuery::new(p, z, delta)?;
        let sf = SizeFunctions::new(p, z);
        let r1 = sf.mu(sf.lambda(delta))? / delta;
        let r2 = sf.lambda(sf.mu(delta)?) / delta;
        worst_mu_lambda = (worst_mu_lambda.0.min(r1), worst_mu_lambda.1.max(r1));
        worst_lambda_mu = (worst_lambda_mu.0.min(r2), worst_lambda_mu.1.max(r2));
        lo = lo.min(r1).min(r2);
        hi = hi.max(r1).max(r2);
    }
    let margin = hi.max(1.0 / lo);
    Ok(BoundReport::new("approx_inverse", samples.len(), margin, c)
        .constant("C", c)
        .constant("mu_of_lambda_min", worst_mu_lambda.0)
        .constant("mu_of_lambda_max", worst_mu_lambda.1)
        .constant("lambda_of_mu_min", worst_lambda_mu.0)
        .constant("lambda_of_mu_max", worst_lambda_mu.1)
        .provenance("polynomial", p.label())
        .provenance("degree", p.degree()))
}

/// `inf_{j+k≥1, A_{jk}≠0} |τ A_{jk}(z)|^{−1/(j+k)}`.
pub fn sobolev_radius(p: &PolynomialSpec, tau: f64, z: Complex64) -> Result<f64, GeometryError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(GeometryError::BadTau(tau));
    }
    let t = p.recenter(z);
    let scale = t.entries().map(|(_, a)| a.norm()).fold(0.0, f64::max);
    t.entries()
        .filter(|&((j, k), a)| j + k >= 1 && a.norm() > VANISH_REL * scale)
        .map(|((j, k), a)| (tau * a.norm()).powf(-1.0 / (j + k) as f64))
        .min_by(|a, b| a.total_cmp(b))
        .ok_or(GeometryError::AllMixedTermsVanish(z))
}

/// `T(w, z) = −2 Im Σ_{j≥1} A_{j0}(z) (w − z)^j`.
pub fn twist(p: &PolynomialSpec, w: Complex64, z: Complex64) -> f64 {
    let t = p.recenter(z);
    let u = w - z;
    let mut upow = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 1..=p.degree() {
        upow *= u;
        sum += t.get(j, 0) * upow;
    }
    -2.0 * sum.im
}

/// Grid graph with node weights `1/μ(v, 1)`.
#[derive(Clone, Debug)]
pub struct MetricGrid {
    grid: Grid2D,
    weights: Vec<f64>,
}

impl MetricGrid {
    pub fn new(p: &PolynomialSpec, grid: Grid2D) -> Result<Self, GeometryError> {
        let mut weights = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let x = grid.coord_of(idx);
            let mu = SizeFunctions::new(p, Complex64::new(x[0], x[1])).mu(1.0)?;
            let w = 1.0 / mu;
            if !(w > 0.0 && w.is_finite()) {
                return Err(GeometryError::BadWeight(x[0], x[1]));
            }
            weights.push(w);
        }
        Ok(Self { grid, weights })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[self.grid.index(i, j)]
    }

    /// Shortest-path distances from node `(i, j)` to every node.
    pub fn distances_from(&self, i: usize, j: usize) -> Vec<f64> {
        let n = self.grid.n() as isize;
        let h = self.grid.spacing();
        let mut dist = vec![f64::INFINITY; self.grid.len()];
        let src = self.grid.index(i, j);
        dist[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Entry { d: 0.0, idx: src });
        const STEPS: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        while let Some(Entry { d, idx }) = heap.pop() {
            if d > dist[idx] {
                continue;
            }
            let (ci, cj) = ((idx % n as usize) as isize, (idx / n as usize) as isize);
            for (di, dj) in STEPS {
                let (ni, nj) = (ci + di, cj + dj);
                if ni < 0 || nj < 0 || ni >= n || nj >= n {
                    continue;
                }
                let nidx = (nj * n + ni) as usize;
                let len = if di != 0 && dj != 0 { h * std::f64::consts::SQRT_2 } else { h };
                let nd = d + len * 0.5 * (self.weights[idx] + self.weights[nidx]);
                if nd < dist[nidx] {
                    dist[nidx] = nd;
                    heap.push(Entry { d: nd, idx: nidx });
                }
            }
        }
        dist
    }
}

#[derive(PartialEq)]
struct Entry {
    d: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.d.total_cmp(&self.d).then_with(|| self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    /// Graph distance between the nodes nearest `z` and `w`.
    pub grid: f64,
    /// `∫ ds/μ(·,1)` along the straight segment, an upper bound for `ρ`.
    pub upper: f64,
}

/// Grid metric `ρ(z, w)` with its straight-line upper bound.
pub fn rho_metric(p: &PolynomialSpec, z: Complex64, w: Complex64, mg: &MetricGrid) -> Result<RhoEstimate, GeometryError> {
    let g = mg.grid();
    let (zi, zj) = g.nearest_node([z.re, z.im])?;
    let (wi, wj) = g.nearest_node([w.re, w.im])?;
    let h = g.spacing();
    let len = (w - z).norm();
    let cells = (len / h).ceil().max(1.0) as usize;
    let sub = 4 * cells;
    let mut mus = Vec::with_capacity(sub + 1);
    for k in 0..=sub {
        let x = z + (w - z) * (k as f64 / sub as f64);
        mus.push(SizeFunctions::new(p, x).mu(1.0)?);
    }
    // compare μ one cell apart along the segment
    for k in 0..sub.saturating_sub(3) {
        let change = (mus[k + 4] / mus[k] - 1.0).abs();
        if change > 0.2 {
            let x = z + (w - z) * (k as f64 / sub as f64);
            return Err(GeometryError::GridTooCoarse { change, x: x.re, y: x.im });
        }
    }
    let ds = len / sub as f64;
    let upper = ds * mus.windows(2).map(|m| 0.5 * (1.0 / m[0] + 1.0 / m[1])).sum::<f64>();
    let grid = mg.distances_from(zi, zj)[g.index(wi, wj)];
    Ok(RhoEstimate { grid, upper })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    /// `|z|^{2m}`
    P1,
    /// `(Re z)^{2m}`
    P2,
}

/// Closed-form representative of `ρ` for the model weights.
pub fn rho_closed_form(model: Model, m: u32, z: Complex64, w: Complex64) -> Result<f64, GeometryError> {
    if m < 1 {
        return Err(GeometryError::BadOrder);
    }
    let d = (z - w).norm();
    let e = (m - 1) as i32;
    let s = match model {
        Model::P1 => z.norm().powi(e) + w.norm().powi(e),
        Model::P2 => z.re.abs().powi(e) + w.re.abs().powi(e),
    };
    Ok(d + d * s)
}

/// `|z−w|/μ(w,1) + |z−w|/μ(z,1)`.
pub fn size_sum(p: &PolynomialSpec, z: Complex64, w: Complex64) -> Result<f64, GeometryError> {
    let d = (z - w).norm();
    Ok(d / SizeFunctions::new(p, w).mu(1.0)? + d / SizeFunctions::new(p, z).mu(1.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::{model_p1, model_p2};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lambda_examples() {
        let p = model_p1(1).unwrap();
        for (z, d) in [(c(0.0, 0.0), 0.3), (c(2.0, -1.0), 5.0)] {
            assert_relative_eq!(lambda_fn(&SizeQuery::new(&p, z, d).unwrap()), d * d, max_relative = 1e-14);
        }
        let q = model_p1(2).unwrap();
        assert_relative_eq!(lambda_fn(&SizeQuery::new(&q, c(1.0, 0.0), 1.0).unwrap()), 9.0, max_relative = 1e-14);
        assert_relative_eq!(lambda_fn(&SizeQuery::new(&q, c(0.0, 0.0), 2.0).unwrap()), 16.0, max_relative = 1e-14);
        // Λ = (2|z|δ + δ²)² for |z|⁴
        let z = c(0.3, -1.1);
        let d = 0.7;
        let expect = (2.0 * z.norm() * d + d * d).powi(2);
        assert_relative_eq!(lambda_fn(&SizeQuery::new(&q, z, d).unwrap()), expect, max_relative = 1e-12);
    }

    #[test]
    fn mu_examples() {
        let p = model_p1(1).unwrap();
        assert_relative_eq!(mu_at(&p, c(4.0, 1.0), 0.25).unwrap(), 0.5, max_relative = 1e-14);
        let q = model_p1(2).unwrap();
        assert_relative_eq!(mu_at(&q, c(1.0, 0.0), 1.0).unwrap(), 0.5, max_relative = 1e-14);
        assert!(matches!(SizeQuery::new(&p, c(0.0, 0.0), 0.0), Err(GeometryError::BadDelta(_))));
    }

    #[test]
    fn mu_of_homogeneous_model_tracks_power_law() {
        for m in 2..=3 {
            let p = model_p1(m).unwrap();
            let mut ratios = Vec::new();
            for r in [0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0] {
                let mu = mu_at(&p, c(r * 0.6, r * 0.8), 1.0).unwrap();
                ratios.push(mu / 1f64.min(r.powi(1 - m as i32)));
            }
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().cloned().fold(0.0, f64::max);
            assert!(hi / lo < 10.0, "m={m} {ratios:?}");
        }
    }

    #[test]
    fn quadratic_is_exact_inverse() {
        let p = model_p1(1).unwrap();
        let samples: Vec<_> = (0..12).map(|k| (c(k as f64 * 0.7, -1.0), 10f64.powi(k - 6))).collect();
        let r = approx_inverse_check(&p, &samples, 1.0 + 1e-12).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!((r.worst_margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let p = model_p1(1).unwrap();
        let r = approx_inverse_check(&p, &[(c(0.0, 0.0), 1.0)], 3.0);
        assert!(matches!(r, Err(GeometryError::TooFewSamples { .. })));
    }

    #[test]
    fn sobolev_radius_examples() {
        let p = model_p1(1).unwrap();
        assert_relative_eq!(sobolev_radius(&p, 1.0, c(0.0, 0.0)).unwrap(), 1.0);
        assert_relative_eq!(sobolev_radius(&p, 4.0, c(0.0, 0.0)).unwrap(), 0.5);
        // |z|⁴ at 1: A10=A01=2, A11=4, A20=A02=1, A21=A12=2, A22=1
        let q = model_p1(2).unwrap();
        let expect = [2.0f64.powf(-1.0), 4.0f64.powf(-0.5), 2.0f64.powf(-1.0 / 3.0), 1.0]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(sobolev_radius(&q, 1.0, c(1.0, 0.0)).unwrap(), expect, max_relative = 1e-14);
        // no pure terms at 0: R = μ(0, 1/τ)
        let tau = 3.0;
        assert_relative_eq!(
            sobolev_radius(&q, tau, c(0.0, 0.0)).unwrap(),
            mu_at(&q, c(0.0, 0.0), 1.0 / tau).unwrap(),
            max_relative = 1e-14
        );
        assert!(sobolev_radius(&q, 0.0, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn twist_examples() {
        let p = model_p1(1).unwrap();
        assert_eq!(twist(&p, c(0.4, 0.2), c(0.4, 0.2)), 0.0);
        assert_relative_eq!(twist(&p, c(0.0, 1.0), c(1.0, 0.0)), -2.0);
        assert_eq!(twist(&p, c(3.0, -2.0), c(0.0, 0.0)), 0.0);
    }

    #[test]
    fn rho_closed_form_examples() {
        assert_relative_eq!(rho_closed_form(Model::P1, 2, c(0.0, 0.0), c(1.0, 0.0)).unwrap(), 2.0);
        assert_eq!(rho_closed_form(Model::P1, 3, c(1.0, 1.0), c(1.0, 1.0)).unwrap(), 0.0);
        assert_relative_eq!(rho_closed_form(Model::P2, 3, c(2.0, 0.0), c(2.0, 1.0)).unwrap(), 9.0);
    }

    #[test]
    fn rho_grid_examples() {
        let g = Grid2D::with_spacing(3.0, 1.0 / 64.0).unwrap();
        let p1 = model_p1(2).unwrap();
        let mg = MetricGrid::new(&p1, g).unwrap();
        let r = rho_metric(&p1, c(0.0, 0.0), c(0.0, 0.0), &mg).unwrap();
        assert_eq!(r.grid, 0.0);
        let r = rho_metric(&p1, c(0.0, 0.0), c(2.0, 0.0), &mg).unwrap();
        let cf = rho_closed_form(Model::P1, 2, c(0.0, 0.0), c(2.0, 0.0)).unwrap();
        assert!(r.grid <= r.upper * (1.0 + 1e-9));
        assert!(r.grid / cf > 1.0 / 3.0 && r.grid / cf < 3.0, "{r:?} vs {cf}");

        let p2 = model_p2(2).unwrap();
        let mg = MetricGrid::new(&p2, g).unwrap();
        let r = rho_metric(&p2, c(0.0, 0.0), c(0.0, 2.0), &mg).unwrap();
        let cf = rho_closed_form(Model::P2, 2, c(0.0, 0.0), c(0.0, 2.0)).unwrap();
        assert_relative_eq!(cf, 2.0);
        assert!(r.grid / cf > 1.0 / 3.0 && r.grid / cf < 3.0, "{r:?} vs {cf}");
    }

    #[test]
    fn coarse_grid_detected() {
        let g = Grid2D::new(12.0, 33).unwrap();
        let p = model_p1(3).unwrap();
        let mg = MetricGrid::new(&p, g).unwrap();
        let r = rho_metric(&p, c(0.0, 0.0), c(9.0, 0.0), &mg);
        assert!(matches!(r, Err(GeometryError::GridTooCoarse { .. })), "{r:?}");
    }

    #[test]
    fn graph_metric_axioms() {
        let g = Grid2D::with_spacing(2.0, 1.0 / 16.0).unwrap();
        let p = model_p2(2).unwrap();
        let mg = MetricGrid::new(&p, g).unwrap();
        let pts = [(10, 40), (33, 7), (50, 55)];
        let d: Vec<Vec<f64>> = pts.iter().map(|&(i, j)| mg.distances_from(i, j)).collect();
        let at = |a: usize, b: usize| d[a][g.index(pts[b].0, pts[b].1)];
        for a in 0..3 {
            for b in 0..3 {
                assert_relative_eq!(at(a, b), at(b, a), max_relative = 1e-12);
                for c in 0..3 {
                    assert!(at(a, c) <= at(a, b) + at(b, c) + 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_in_delta(re in -5.0..5.0f64, im in -5.0..5.0f64, d in 1e-3..1e3f64) {
            let p = model_p2(2).unwrap();
            let sf = SizeFunctions::new(&p, c(re, im));
            prop_assert!(sf.lambda(d * 1.1) > sf.lambda(d));
            prop_assert!(sf.mu(d * 1.1).unwrap() >= sf.mu(d).unwrap());
        }

        #[test]
        fn mu_scales_under_dilation(re in -3.0..3.0f64, im in -3.0..3.0f64, d in 1e-2..1e2f64, lam in 0.2..5.0f64) {
            let p = model_p1(2).unwrap();
            let q = p.dilate(lam);
            let z = c(re, im);
            let a = mu_at(&q, z * lam, d).unwrap();
            let b = lam * mu_at(&p, z, d).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * b);
        }
    }
}
