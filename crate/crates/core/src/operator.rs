//! Finite-difference discretization of the weighted Laplacian
//!
//! ```text
//! □ = −¼Δ + ¼τΔp + ¼τ²|∇p|² + (i/2)τ(p_{x₁}∂_{x₂} − p_{x₂}∂_{x₁})
//! ```
//!
//! on a Dirichlet-truncated square, and of the first-order fields `Z̄`, `Z`,
//! `X₁`, `X₂`, `U₁`, `U₂`.
//!
//! The drift coefficients are sampled at edge midpoints. With a
//! divergence-free field `(−p_{x₂}, p_{x₁})` this keeps the scheme second
//! order while making the drift stencil exactly antisymmetric, so the
//! assembled matrix is Hermitian to rounding.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{ComplexField, Grid2D};
use crate::linalg::{self, HermitianOperator, LanczosResult};
use crate::polynomial::PolynomialSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("tau must be non-negative and finite, got {0}")]
    BadTau(f64),
    #[error("assembled operator is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("assembled operator is not positive semidefinite (<Au,u> = {0:e})")]
    NotPsd(f64),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Matrix-free five-point discretization of `□_{τp}` with zero Dirichlet data.
#[derive(Clone, Debug)]
pub struct DiscreteBox {
    grid: Grid2D,
    tau: f64,
    p: PolynomialSpec,
    diag: Vec<f64>,
    // coupling u -> u+1 (east) and u -> u+n (north); the reverse couplings
    // are the conjugates
    east: Vec<Complex64>,
    north: Vec<Complex64>,
}

/// Build the operator and verify Hermitian symmetry and positivity on eight
/// random interior vectors.
pub fn assemble_box(p: &PolynomialSpec, tau: f64, grid: Grid2D) -> Result<DiscreteBox, OperatorError> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(OperatorError::BadTau(tau));
    }
    let n = grid.n();
    let h = grid.spacing();
    let lap = 1.0 / (4.0 * h * h);
    let drift = tau / (4.0 * h);
    let mut diag = vec![0.0; grid.len()];
    let mut east = vec![ZERO; grid.len()];
    let mut north = vec![ZERO; grid.len()];
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let u = grid.index(i, j);
            let x = grid.coord(i, j);
            let g = p.gradient(x);
            diag[u] = 4.0 * lap
                + 0.25 * tau * p.laplacian(x)
                + 0.25 * tau * tau * (g[0] * g[0] + g[1] * g[1]);
            if i + 2 < n {
                let gm = p.gradient([x[0] + 0.5 * h, x[1]]);
                east[u] = Complex64::new(-lap, -drift * gm[1]);
            }
            if j + 2 < n {
                let gm = p.gradient([x[0], x[1] + 0.5 * h]);
                north[u] = Complex64::new(-lap, drift * gm[0]);
            }
        }
    }
    let op = DiscreteBox { grid, tau, p: p.clone(), diag, east, north };
    op.verify(8, 0x5eed_b0c5)?;
    Ok(op)
}

impl DiscreteBox {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn polynomial(&self) -> &PolynomialSpec {
        &self.p
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Zeroth-order part `¼τΔp + ¼τ²|∇p|²` at node `(i, j)`.
    pub fn potential_at(&self, i: usize, j: usize) -> f64 {
        let h = self.grid.spacing();
        self.diag[self.grid.index(i, j)] - 1.0 / (h * h)
    }

    pub fn apply_field(&self, f: &ComplexField) -> ComplexField {
        let mut out = ComplexField::zeros(self.grid);
        self.apply(f.as_slice(), out.as_mut_slice());
        out
    }

    fn random_interior(&self, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let n = self.grid.n();
        (0..self.grid.len())
            .map(|idx| {
                let (i, j) = (idx % n, idx / n);
                if self.grid.is_interior(i, j) {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                } else {
                    ZERO
                }
            })
            .collect()
    }

    fn verify(&self, samples: usize, seed: u64) -> Result<(), OperatorError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = self.grid.len();
        let mut au = vec![ZERO; len];
        let mut av = vec![ZERO; len];
        for _ in 0..samples {
            let u = self.random_interior(&mut rng);
            let v = self.random_interior(&mut rng);
            self.apply(&u, &mut au);
            self.apply(&v, &mut av);
            let lhs = linalg::dot(&au, &v);
            let rhs = linalg::dot(&u, &av);
            let scale = linalg::norm_sqr(&au).sqrt() * linalg::norm_sqr(&v).sqrt()
                + linalg::norm_sqr(&u).sqrt() * linalg::norm_sqr(&av).sqrt();
            let defect = (lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE);
            if defect > 1e-12 {
                return Err(OperatorError::NotHermitian(defect));
            }
            let q = linalg::dot(&u, &au).re;
            if q < -1e-10 * linalg::norm_sqr(&u) {
                return Err(OperatorError::NotPsd(q));
            }
        }
        Ok(())
    }

    /// Lanczos estimate of the smallest eigenvalue from a seeded random start.
    pub fn lowest_eigenvalue(&self, steps: usize, seed: u64) -> LanczosResult {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = self.random_interior(&mut rng);
        linalg::lanczos_extremes(self, &start, steps)
    }
}

impl DiscreteBox {
    /// `y = a x + b □x` on interior nodes, zero on the boundary ring.
    pub fn apply_affine(&self, a: f64, b: f64, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.grid.n();
        let (d, e, no) = (&self.diag, &self.east, &self.north);
        for i in 0..n {
            y[i] = ZERO;
            y[(n - 1) * n + i] = ZERO;
        }
        for j in 1..n - 1 {
            let row = j * n;
            y[row] = ZERO;
            y[row + n - 1] = ZERO;
            for u in row + 1..row + n - 1 {
                let au = d[u] * x[u]
                    + e[u] * x[u + 1]
                    + e[u - 1].conj() * x[u - 1]
                    + no[u] * x[u + n]
                    + no[u - n].conj() * x[u - n];
                y[u] = x[u] * a + au * b;
            }
        }
    }

    /// Jacobi weights `1/(1 + c·diag)` for `I + c □`, zero on the boundary.
    pub fn shifted_inverse_diagonal(&self, c: f64) -> Vec<f64> {
        let n = self.grid.n();
        self.diag
            .iter()
            .enumerate()
            .map(|(u, d)| if self.grid.is_interior(u % n, u / n) { 1.0 / (1.0 + c * d) } else { 0.0 })
            .collect()
    }
}

impl HermitianOperator for DiscreteBox {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.apply_affine(0.0, 1.0, x, y);
    }
}

/// `I + c □`, the implicit half of a Crank–Nicolson step.
pub struct ShiftedBox<'a> {
    pub op: &'a DiscreteBox,
    pub c: f64,
}

impl HermitianOperator for ShiftedBox<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.op.apply_affine(1.0, self.c, x, y);
    }
}

/// First-order weighted vector fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldKind {
    /// `∂_z̄ + τ p_z̄`
    Zbar,
    /// `∂_z − τ p_z`
    Z,
    /// `∂_{x₁} + iτ p_{x₂}`
    X1,
    /// `∂_{x₂} − iτ p_{x₁}`
    X2,
    /// `∂_{x₁} − iτ p_{x₂}`
    U1,
    /// `∂_{x₂} + iτ p_{x₁}`
    U2,
}

impl FieldKind {
    pub const ALL: [FieldKind; 6] = [
        FieldKind::Zbar,
        FieldKind::Z,
        FieldKind::X1,
        FieldKind::X2,
        FieldKind::U1,
        FieldKind::U2,
    ];
}

/// Apply a first-order field with centred differences.
///
/// The outermost ring of nodes has no centred stencil; it is set to zero and
/// must not be read.
pub fn apply_field(kind: FieldKind, p: &PolynomialSpec, tau: f64, f: &ComplexField) -> ComplexField {
    let grid = *f.grid();
    let n = grid.n();
    let inv2h = 1.0 / (2.0 * grid.spacing());
    let i_unit = Complex64::new(0.0, 1.0);
    let mut out = ComplexField::zeros(grid);
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let x = grid.coord(i, j);
            let d1 = (f.at(i + 1, j) - f.at(i - 1, j)) * inv2h;
            let d2 = (f.at(i, j + 1) - f.at(i, j - 1)) * inv2h;
            let v = f.at(i, j);
            let g = p.gradient(x);
            // p_z = (p₁ − i p₂)/2, p_z̄ = conj(p_z)
            let pz = Complex64::new(0.5 * g[0], -0.5 * g[1]);
            out[(i, j)] = match kind {
                FieldKind::Zbar => (d1 + i_unit * d2) * 0.5 + v * pz.conj() * tau,
                FieldKind::Z => (d1 - i_unit * d2) * 0.5 - v * pz * tau,
                FieldKind::X1 => d1 + i_unit * v * (tau * g[1]),
                FieldKind::X2 => d2 - i_unit * v * (tau * g[0]),
                FieldKind::U1 => d1 - i_unit * v * (tau * g[1]),
                FieldKind::U2 => d2 + i_unit * v * (tau * g[0]),
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::{model_p1, model_p2};

    #[test]
    fn free_limit_is_quarter_laplacian() {
        let g = Grid2D::new(2.0, 33).unwrap();
        let op = assemble_box(&model_p1(1).unwrap(), 0.0, g).unwrap();
        let h = g.spacing();
        let f = ComplexField::from_fn(g, |x| Complex64::new(x[0] * x[0] * x[1], 0.0));
        let af = op.apply_field(&f);
        // −¼Δ(x²y) = −y/2, exact for the five-point stencil on cubics
        let (i, j) = (20, 11);
        let y = g.coord(i, j)[1];
        assert!((af.at(i, j).re + 0.5 * y).abs() < 1e-10 / h);
    }

    #[test]
    fn harmonic_oscillator_potential() {
        let g = Grid2D::new(4.0, 65).unwrap();
        let op = assemble_box(&model_p1(1).unwrap(), 1.0, g).unwrap();
        for (i, j) in [(32, 32), (40, 20), (10, 50)] {
            let x = g.coord(i, j);
            let expect = 1.0 + x[0] * x[0] + x[1] * x[1];
            assert!((op.potential_at(i, j) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_tau_rejected() {
        let g = Grid2D::new(2.0, 33).unwrap();
        assert!(matches!(assemble_box(&model_p1(1).unwrap(), -1.0, g), Err(OperatorError::BadTau(_))));
    }

    #[test]
    fn hermitian_for_nonsymmetric_weight() {
        let p = model_p2(2).unwrap().translate(Complex64::new(0.3, -0.7));
        let g = Grid2D::new(3.0, 65).unwrap();
        assert!(assemble_box(&p, 2.5, g).is_ok());
    }

    #[test]
    fn zbar_annihilates_weight() {
        let p = model_p1(1).unwrap();
        let tau = 1.0;
        let mut errs = Vec::new();
        for n in [65, 129] {
            let g = Grid2D::new(2.0, n).unwrap();
            let w = ComplexField::from_fn(g, |x| Complex64::new((-tau * p.eval(x)).exp(), 0.0));
            let out = apply_field(FieldKind::Zbar, &p, tau, &w);
            let m = g.interior(2).map(|(i, j)| out.at(i, j).norm()).fold(0.0, f64::max);
            errs.push(m);
        }
        assert!(errs[1] < 0.3 * errs[0], "{errs:?}");
        assert!(errs[1] < 1e-2);
    }

    #[test]
    fn x1_minus_u1_is_multiplication() {
        let p = model_p1(2).unwrap();
        let g = Grid2D::new(1.5, 33).unwrap();
        let f = ComplexField::from_fn(g, |x| Complex64::new(x[0].sin(), x[1] * x[0]));
        let a = apply_field(FieldKind::X1, &p, 1.7, &f);
        let b = apply_field(FieldKind::U1, &p, 1.7, &f);
        for (i, j) in g.interior(1) {
            let x = g.coord(i, j);
            let expect = Complex64::new(0.0, 2.0 * 1.7 * p.gradient(x)[1]) * f.at(i, j);
            assert!((a.at(i, j) - b.at(i, j) - expect).norm() < 1e-10);
        }
    }

    fn bump(g: Grid2D) -> ComplexField {
        ComplexField::from_fn(g, |x| {
            let r2 = (x[0] - 0.2).powi(2) + (x[1] + 0.1).powi(2);
            Complex64::new((-2.0 * r2).exp(), 0.5 * x[0] * (-r2).exp())
        })
    }

    #[test]
    fn box_is_minus_zbar_z() {
        let p = model_p2(2).unwrap();
        let tau = 1.0;
        let mut errs = Vec::new();
        for n in [97, 193] {
            let g = Grid2D::new(3.0, n).unwrap();
            let f = bump(g);
            let op = assemble_box(&p, tau, g).unwrap();
            let a = op.apply_field(&f);
            let zf = apply_field(FieldKind::Z, &p, tau, &f);
            let zzf = apply_field(FieldKind::Zbar, &p, tau, &zf);
            let err = g
                .interior(3)
                .filter(|&(i, j)| {
                    let x = g.coord(i, j);
                    x[0].abs() < 2.0 && x[1].abs() < 2.0
                })
                .map(|(i, j)| (a.at(i, j) + zzf.at(i, j)).norm())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[1] < 0.3 * errs[0], "{errs:?}");
    }

    #[test]
    fn z_is_minus_adjoint_of_zbar() {
        let p = model_p1(2).unwrap();
        let tau = 0.8;
        let mut errs = Vec::new();
        for n in [161, 321] {
            let g = Grid2D::new(5.0, n).unwrap();
            let f = bump(g);
            let gf = ComplexField::from_fn(g, |x| {
                let r2 = x[0] * x[0] + (x[1] - 0.3).powi(2);
                Complex64::new(x[1] * (-1.5 * r2).exp(), (-r2).exp())
            });
            let lhs = apply_field(FieldKind::Z, &p, tau, &f).inner(&gf);
            let rhs = -f.inner(&apply_field(FieldKind::Zbar, &p, tau, &gf));
            errs.push((lhs - rhs).norm());
        }
        // centred differences are skew-adjoint on fields vanishing at the edge
        assert!(errs.iter().all(|e| *e < 1e-12), "{errs:?}");
    }

    #[test]
    fn landau_ground_energy() {
        // lowest Landau level of □ for |z|² sits at 2τ
        let g = Grid2D::new(8.0, 129).unwrap();
        let op = assemble_box(&model_p1(1).unwrap(), 1.0, g).unwrap();
        let res = op.lowest_eigenvalue(150, 7);
        assert!((res.min() - 2.0).abs() < 0.05, "λ_min = {}", res.min());
    }
}
