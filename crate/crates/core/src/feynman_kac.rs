//! Monte Carlo heat kernel from the Feynman–Kac–Itô formula.
//!
//! With `2□ = ½(−i∇ − a)² + V`, `a = τ(−p_{x₂}, p_{x₁})`, `V = (τ/2)Δp`, the
//! kernel at absolute time `s` is
//!
//! ```text
//! H(s, x, y) = (1/(πs)) e^{−|x−y|²/s} · E[e^{F(ω)}],
//! F(ω) = −i ∫ a(ω)·dω − ∫ V(ω) dt,
//! ```
//!
//! the expectation taken over standard Brownian bridges from `x` to `y` of
//! duration `s/2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polynomial::PolynomialSpec;

pub const MIN_STEPS: usize = 64;
pub const MIN_PATHS: usize = 1000;
pub const DEFAULT_STEPS: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FkError {
    #[error("need at least {MIN_STEPS} time steps, got {0}")]
    TooFewSteps(usize),
    #[error("need at least {MIN_PATHS} paths, got {0}")]
    TooFewPaths(usize),
    #[error("bridge duration must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("phase has positive real part {0:e}: the potential is negative along the path")]
    PositiveRealPart(f64),
    #[error("vector potential has divergence {0:e}")]
    NonzeroDivergence(f64),
}

/// Discretized Brownian bridge on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BridgePath {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub horizon: f64,
    /// `n_t + 1` positions at uniform times, first `x`, last `y`.
    pub nodes: Vec<[f64; 2]>,
}

fn bridge_with<R: Rng>(x: [f64; 2], y: [f64; 2], horizon: f64, n_t: usize, rng: &mut R) -> BridgePath {
    let dt = horizon / n_t as f64;
    let mut nodes = Vec::with_capacity(n_t + 1);
    let mut w = x;
    nodes.push(w);
    for i in 0..n_t - 1 {
        // remaining time before and after this step
        let rem = horizon - i as f64 * dt;
        let rem_next = rem - dt;
        let var = dt * rem_next / rem;
        let sd = var.sqrt();
        for c in 0..2 {
            let mean = w[c] + (y[c] - w[c]) * dt / rem;
            let g: f64 = rng.sample(StandardNormal);
            w[c] = mean + sd * g;
        }
        nodes.push(w);
    }
    nodes.push(y);
    BridgePath { x, y, horizon, nodes }
}

/// Brownian bridge by sequential conditional sampling, deterministic in `seed`.
pub fn sample_bridge(x: [f64; 2], y: [f64; 2], horizon: f64, n_t: usize, seed: u64) -> Result<BridgePath, FkError> {
    check_bridge(horizon, n_t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(bridge_with(x, y, horizon, n_t, &mut rng))
}

fn check_bridge(horizon: f64, n_t: usize) -> Result<(), FkError> {
    if n_t < MIN_STEPS {
        return Err(FkError::TooFewSteps(n_t));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(FkError::BadHorizon(horizon));
    }
    Ok(())
}

/// `F = −i ∫ a·dω − ∫ V dt`, midpoint rule for the line integral and
/// trapezoid rule for the potential.
pub fn phase(path: &BridgePath, p: &PolynomialSpec, tau: f64) -> Result<Complex64, FkError> {
    if tau == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let nodes = &path.nodes;
    let n_t = nodes.len() - 1;
    let dt = path.horizon / n_t as f64;
    let mut line = 0.0;
    let mut vint = 0.0;
    let mut vscale = 0.0;
    let mut v_prev = 0.5 * tau * p.laplacian(nodes[0]);
    for k in 0..n_t {
        let (a, b) = (nodes[k], nodes[k + 1]);
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let g = p.gradient(mid);
        line += tau * (-g[1] * (b[0] - a[0]) + g[0] * (b[1] - a[1]));
        let v_next = 0.5 * tau * p.laplacian(b);
        vint += 0.5 * (v_prev + v_next) * dt;
        vscale += 0.5 * (v_prev.abs() + v_next.abs()) * dt;
        v_prev = v_next;
    }
    if -vint > 1e-12 * vscale.max(f64::MIN_POSITIVE) {
        return Err(FkError::PositiveRealPart(-vint));
    }
    Ok(Complex64::new(-vint, -line))
}

/// Largest `|∇·a|` at `samples` seeded points of `[-r, r]²`, relative to
/// `τ·max|∇²p|` there, by centred differences of the gradient.
pub fn divergence_defect(p: &PolynomialSpec, tau: f64, r: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = [rng.random_range(-r..r), rng.random_range(-r..r)];
        let e = 1e-4 * (1.0 + x[0].abs().max(x[1].abs()));
        let gx = [p.gradient([x[0] + e, x[1]]), p.gradient([x[0] - e, x[1]])];
        let gy = [p.gradient([x[0], x[1] + e]), p.gradient([x[0], x[1] - e])];
        // a = τ(−p₂, p₁): ∇·a = τ(−∂₁p₂ + ∂₂p₁)
        let d12 = (gx[0][1] - gx[1][1]) / (2.0 * e);
        let d21 = (gy[0][0] - gy[1][0]) / (2.0 * e);
        let d11 = (gx[0][0] - gx[1][0]) / (2.0 * e);
        let d22 = (gy[0][1] - gy[1][1]) / (2.0 * e);
        let scale = d11.abs() + d22.abs() + d12.abs() + 1e-300;
        worst = worst.max((tau * (d21 - d12)).abs() / (tau.abs() * scale).max(1e-300));
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: Complex64,
    pub stderr: f64,
    /// `(1/(πs)) e^{−|x−y|²/s}`.
    pub free_factor: f64,
    pub n_paths: usize,
    pub n_t: usize,
    pub seed: u64,
}

/// Estimate `H(s, x, y)` at absolute time `s` from `n_paths` bridges.
///
/// Path `i` draws from a ChaCha stream `(seed, i)`, so the result does not
/// depend on how paths are distributed over threads.
#[allow(clippy::too_many_arguments)]
pub fn mc_kernel(
    p: &PolynomialSpec,
    tau: f64,
    x: [f64; 2],
    y: [f64; 2],
    s: f64,
    n_paths: usize,
    n_t: usize,
    seed: u64,
) -> Result<McEstimate, FkError> {
    if n_paths < MIN_PATHS {
        return Err(FkError::TooFewPaths(n_paths));
    }
    let horizon = 0.5 * s;
    check_bridge(horizon, n_t)?;
    let reach = 1.0 + x[0].abs().max(x[1].abs()).max(y[0].abs()).max(y[1].abs()) + 3.0 * s.sqrt();
    let div = divergence_defect(p, tau, reach, 100, seed ^ 0xd1f);
    if div > 1e-6 {
        return Err(FkError::NonzeroDivergence(div));
    }
    let r2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
    let free_factor = (-r2 / s).exp() / (PI * s);
    let values: Vec<Complex64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let path = bridge_with(x, y, horizon, n_t, &mut rng);
            phase(&path, p, tau).map(|f| f.exp())
        })
        .collect::<Result<_, _>>()?;
    let n = n_paths as f64;
    let mean: Complex64 = values.iter().sum::<Complex64>() / n;
    let var: f64 = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    Ok(McEstimate {
        estimate: mean * free_factor,
        stderr: (var / n).sqrt() * free_factor,
        free_factor,
        n_paths,
        n_t,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::{model_p1, model_p2};

    #[test]
    fn closed_loop_and_determinism() {
        let a = sample_bridge([0.3, -0.2], [0.3, -0.2], 0.7, 64, 9).unwrap();
        assert_eq!(a.nodes[0], [0.3, -0.2]);
        assert_eq!(*a.nodes.last().unwrap(), [0.3, -0.2]);
        let b = sample_bridge([0.3, -0.2], [0.3, -0.2], 0.7, 64, 9).unwrap();
        assert_eq!(a, b);
        assert!(matches!(sample_bridge([0.0; 2], [0.0; 2], 1.0, 32, 0), Err(FkError::TooFewSteps(32))));
    }

    #[test]
    fn bridge_midpoint_statistics() {
        // over [0, 2s] the midpoint has mean (x+y)/2 and covariance (s/2) I
        let s = 0.8;
        let (x, y) = ([1.0, 0.0], [-0.5, 2.0]);
        let n = 10_000;
        let mids: Vec<[f64; 2]> = (0..n)
            .map(|i| sample_bridge(x, y, 2.0 * s, 64, i).unwrap().nodes[32])
            .collect();
        let nf = n as f64;
        for c in 0..2 {
            let mean = mids.iter().map(|m| m[c]).sum::<f64>() / nf;
            let var = mids.iter().map(|m| (m[c] - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            let expect = 0.5 * (x[c] + y[c]);
            assert!((mean - expect).abs() < 3.0 * (s / 2.0 / nf).sqrt(), "mean {mean}");
            // var of the sample variance is 2σ⁴/(n−1)
            let sd_var = (2.0 * (s / 2.0).powi(2) / (nf - 1.0)).sqrt();
            assert!((var - s / 2.0).abs() < 3.0 * sd_var, "var {var}");
        }
        let cov = mids.iter().map(|m| (m[0] - 0.25) * (m[1] - 1.0)).sum::<f64>() / (nf - 1.0);
        assert!(cov.abs() < 3.0 * (s / 2.0) / nf.sqrt(), "cov {cov}");
    }

    #[test]
    fn phase_examples() {
        let p = model_p1(1).unwrap();
        let path = sample_bridge([0.1, 0.0], [0.0, 0.4], 0.5, 64, 1).unwrap();
        assert_eq!(phase(&path, &p, 0.0).unwrap(), Complex64::new(0.0, 0.0));
        let tau = 1.5;
        let s = 0.3;
        let still = BridgePath { x: [0.0; 2], y: [0.0; 2], horizon: s, nodes: vec![[0.0; 2]; 65] };
        let f = phase(&still, &p, tau).unwrap();
        assert!((f.re + 2.0 * tau * s).abs() < 1e-12 && f.im == 0.0);
        for seed in 0..20 {
            let path = sample_bridge([0.5, -1.0], [1.0, 0.2], 1.0, 128, seed).unwrap();
            assert!(phase(&path, &model_p2(2).unwrap(), 2.0).unwrap().exp().norm() <= 1.0);
        }
    }

    #[test]
    fn negative_potential_detected() {
        let bad = PolynomialSpec::new([((1, 1), Complex64::new(-1.0, 0.0))]).unwrap();
        let path = sample_bridge([0.0; 2], [0.0; 2], 1.0, 64, 3).unwrap();
        assert!(matches!(phase(&path, &bad, 1.0), Err(FkError::PositiveRealPart(_))));
    }

    #[test]
    fn free_limit_is_exact() {
        let p = model_p1(1).unwrap();
        let e = mc_kernel(&p, 0.0, [0.2, 0.1], [-0.3, 0.5], 0.7, 1000, 64, 5).unwrap();
        let r2: f64 = 0.25 + 0.16;
        let expect = (-r2 / 0.7).exp() / (PI * 0.7);
        assert!((e.estimate.re - expect).abs() < 1e-15 && e.estimate.im == 0.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn mehler_on_diagonal() {
        // |z|²: H(s,0,0) = e^{−τs} τ/(π sinh τs)
        let p = model_p1(1).unwrap();
        let (tau, s) = (1.0, 0.5);
        let e = mc_kernel(&p, tau, [0.0; 2], [0.0; 2], s, 20_000, 128, 11).unwrap();
        let exact = (-tau * s).exp() * tau / (PI * (tau * s).sinh());
        assert!((e.estimate - exact).norm() < 3.0 * e.stderr + 2e-3 * exact, "{e:?} vs {exact}");
        assert!(e.estimate.norm() <= e.free_factor + 3.0 * e.stderr);
    }

    #[test]
    fn thread_independent() {
        let p = model_p1(2).unwrap();
        let a = mc_kernel(&p, 1.0, [0.0; 2], [1.0, 0.0], 0.25, 2000, 64, 4).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| mc_kernel(&p, 1.0, [0.0; 2], [1.0, 0.0], 0.25, 2000, 64, 4).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_free() {
        for p in [model_p1(2).unwrap(), model_p2(3).unwrap()] {
            assert!(divergence_defect(&p, 2.0, 3.0, 100, 1) < 1e-6);
        }
    }
}
