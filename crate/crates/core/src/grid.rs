//! Uniform origin-centred grids and complex grid functions.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs an odd node count of at least 33, got {0}")]
    BadNodeCount(usize),
    #[error("grid half-width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("point ({0}, {1}) lies outside the grid interior")]
    OutsideInterior(f64, f64),
}

/// `n × n` nodes on `[-L, L]²`, spacing `h = 2L/(n−1)`.
///
/// Node `(i, j)` sits at `(-L + i h, -L + j h)`; storage is row-major with
/// `i` (the `x₁` index) fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    half_width: f64,
    n: usize,
}

impl Grid2D {
    pub fn new(half_width: f64, n: usize) -> Result<Self, GridError> {
        if n < 33 || n.is_multiple_of(2) {
            return Err(GridError::BadNodeCount(n));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(GridError::BadHalfWidth(half_width));
        }
        Ok(Self { half_width, n })
    }

    /// Grid with spacing `h` and at least `half_width` of reach, rounded up to
    /// a whole number of cells.
    pub fn with_spacing(half_width: f64, h: f64) -> Result<Self, GridError> {
        let cells = (half_width / h - 1e-9).ceil() as usize;
        Self::new(cells as f64 * h, 2 * cells + 1)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.spacing();
        [-self.half_width + i as f64 * h, -self.half_width + j as f64 * h]
    }

    pub fn coord_of(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.ij(idx);
        self.coord(i, j)
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.n && j + 1 < self.n
    }

    /// Nearest node to `x`, provided it is an interior node.
    pub fn nearest_node(&self, x: [f64; 2]) -> Result<(usize, usize), GridError> {
        let h = self.spacing();
        let fi = ((x[0] + self.half_width) / h).round();
        let fj = ((x[1] + self.half_width) / h).round();
        if fi < 1.0 || fj < 1.0 || fi > (self.n - 2) as f64 || fj > (self.n - 2) as f64 {
            return Err(GridError::OutsideInterior(x[0], x[1]));
        }
        Ok((fi as usize, fj as usize))
    }

    /// Distance from `x` to its nearest node, in units of `h`.
    pub fn off_node_distance(&self, x: [f64; 2]) -> f64 {
        let h = self.spacing();
        let fi = (x[0] + self.half_width) / h;
        let fj = (x[1] + self.half_width) / h;
        ((fi - fi.round()).powi(2) + (fj - fj.round()).powi(2)).sqrt()
    }

    /// Interior node indices at least `margin` nodes away from the edge.
    pub fn interior(&self, margin: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = margin.max(1);
        let n = self.n;
        (m..n - m).flat_map(move |j| (m..n - m).map(move |i| (i, j)))
    }
}

/// Complex-valued function sampled on a [`Grid2D`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid2D,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn<F>(grid: Grid2D, mut f: F) -> Self
    where
        F: FnMut([f64; 2]) -> Complex64,
    {
        let data = (0..grid.len()).map(|idx| f(grid.coord_of(idx))).collect();
        Self { grid, data }
    }

    pub fn from_vec(grid: Grid2D, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), grid.len(), "field length does not match grid");
        Self { grid, data }
    }

    /// Discrete point mass of weight `1/h²` at node `(i, j)`.
    pub fn point_mass(grid: Grid2D, i: usize, j: usize) -> Self {
        let mut f = Self::zeros(grid);
        let h = grid.spacing();
        f[(i, j)] = Complex64::new(1.0 / (h * h), 0.0);
        f
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[self.grid.index(i, j)]
    }

    /// Zero the outer ring of `width` nodes.
    pub fn clear_boundary(&mut self, width: usize) {
        let n = self.grid.n();
        for j in 0..n {
            for i in 0..n {
                if i < width || j < width || i + width >= n || j + width >= n {
                    self.data[j * n + i] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// `⟨self, other⟩ = Σ conj(self) other h²`.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        let h2 = self.grid.spacing().powi(2);
        crate::linalg::dot(&self.data, &other.data) * h2
    }

    pub fn norm_l2(&self) -> f64 {
        let h2 = self.grid.spacing().powi(2);
        (crate::linalg::norm_sqr(&self.data) * h2).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> ComplexField {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> ComplexField {
        self.map(|z| z * s)
    }

    /// Bilinear interpolation at an arbitrary point inside the grid.
    pub fn interpolate(&self, x: [f64; 2]) -> Option<Complex64> {
        let h = self.grid.spacing();
        let l = self.grid.half_width();
        let fi = (x[0] + l) / h;
        let fj = (x[1] + l) / h;
        let n = self.grid.n();
        if !(fi >= 0.0 && fj >= 0.0 && fi <= (n - 1) as f64 && fj <= (n - 1) as f64) {
            return None;
        }
        let i0 = (fi.floor() as usize).min(n - 2);
        let j0 = (fj.floor() as usize).min(n - 2);
        let tx = fi - i0 as f64;
        let ty = fj - j0 as f64;
        Some(
            self.at(i0, j0) * ((1.0 - tx) * (1.0 - ty))
                + self.at(i0 + 1, j0) * (tx * (1.0 - ty))
                + self.at(i0, j0 + 1) * ((1.0 - tx) * ty)
                + self.at(i0 + 1, j0 + 1) * (tx * ty),
        )
    }
}

impl Index<(usize, usize)> for ComplexField {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[self.grid.index(i, j)]
    }
}

impl IndexMut<(usize, usize)> for ComplexField {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        let idx = self.grid.index(i, j);
        &mut self.data[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid2D::new(8.0, 32).is_err());
        assert!(Grid2D::new(8.0, 34).is_err());
        assert!(Grid2D::new(-1.0, 65).is_err());
        let g = Grid2D::new(8.0, 257).unwrap();
        assert_eq!(g.spacing(), 1.0 / 16.0);
        assert_eq!(g.coord(128, 128), [0.0, 0.0]);
        assert_eq!(g.nearest_node([0.01, -0.02]).unwrap(), (128, 128));
        assert!(g.nearest_node([8.0, 0.0]).is_err());
    }

    #[test]
    fn with_spacing_rounds_up() {
        let g = Grid2D::with_spacing(3.0, 1.0 / 32.0).unwrap();
        assert_eq!(g.n(), 193);
        assert!((g.half_width() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_has_unit_integral() {
        let g = Grid2D::new(2.0, 65).unwrap();
        let f = ComplexField::point_mass(g, 32, 32);
        let total: Complex64 = f.as_slice().iter().sum::<Complex64>() * g.spacing().powi(2);
        assert!((total.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_is_exact_for_bilinear() {
        let g = Grid2D::new(1.0, 33).unwrap();
        let f = ComplexField::from_fn(g, |x| Complex64::new(1.0 + 2.0 * x[0] - x[1] + x[0] * x[1], x[0]));
        let v = f.interpolate([0.013, -0.377]).unwrap();
        let e = Complex64::new(1.0 + 0.026 + 0.377 - 0.013 * 0.377, 0.013);
        assert!((v - e).norm() < 1e-12);
    }
}
