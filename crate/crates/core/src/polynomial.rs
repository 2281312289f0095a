//! Real-valued polynomials on the plane stored as Wirtinger coefficient tables.
//!
//! A polynomial is `p(z) = Σ c_{jk} z^j z̄^k`. Everything downstream (size
//! functions, weighted fields, the operator potential) is expressed through
//! the recentered coefficients `A_{jk}(z) = ∂_z^j ∂_z̄^k p(z) / (j! k!)`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Asymmetry allowed between `c_{jk}` and `conj(c_{kj})` before a table is
/// rejected as not real-valued.
pub const REALITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolynomialError {
    #[error("coefficient table is not real-valued: |c({j},{k}) - conj(c({k},{j}))| = {asymmetry:e}")]
    NotReal { j: u32, k: u32, asymmetry: f64 },
    #[error("polynomial is harmonic: no coefficient c(j,k) with j >= 1 and k >= 1")]
    Harmonic,
    #[error("polynomial degree {0} is below 2")]
    DegreeTooLow(u32),
    #[error("model parameter m must be at least 1, got {0}")]
    BadModelOrder(u32),
    #[error("unrecognised polynomial model `{0}` (expected p1:m or p2:m)")]
    UnknownModel(String),
}

/// Complex-valued polynomial in `z` and `z̄` with no reality constraint.
///
/// Used for Wirtinger derivatives of a real polynomial, which are complex.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WirtingerPoly {
    terms: BTreeMap<(u32, u32), Complex64>,
}

impl WirtingerPoly {
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = ((u32, u32), Complex64)>,
    {
        let mut map: BTreeMap<(u32, u32), Complex64> = BTreeMap::new();
        for (key, c) in terms {
            *map.entry(key).or_default() += c;
        }
        map.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Self { terms: map }
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), Complex64)> + '_ {
        self.terms.iter().map(|(&k, &c)| (k, c))
    }

    pub fn coefficient(&self, j: u32, k: u32) -> Complex64 {
        self.terms.get(&(j, k)).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|&(j, k)| j + k).max().unwrap_or(0)
    }

    /// ∂/∂z, exact on the coefficient table.
    pub fn d_z(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|((j, _), _)| *j > 0)
                .map(|(&(j, k), &c)| ((j - 1, k), c * j as f64)),
        )
    }

    /// ∂/∂z̄, exact on the coefficient table.
    pub fn d_zbar(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|((_, k), _)| *k > 0)
                .map(|(&(j, k), &c)| ((j, k - 1), c * k as f64)),
        )
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let zb = z.conj();
        self.terms.iter().map(|(&(j, k), &c)| c * z.powu(j) * zb.powu(k)).sum()
    }
}

fn powers(z: Complex64, n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..=n {
        out.push(acc);
        acc *= z;
    }
    out
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Validated subharmonic-candidate polynomial: real-valued, nonharmonic,
/// degree at least two.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialSpec {
    poly: WirtingerPoly,
    degree: u32,
    label: String,
    // cached derivatives for pointwise evaluation
    dz: WirtingerPoly,
    dzdzbar: WirtingerPoly,
}

impl PolynomialSpec {
    /// Build and validate from `(j, k) -> c_{jk}` entries.
    ///
    /// Small asymmetries (below [`REALITY_TOLERANCE`]) are symmetrized away.
    pub fn new<I>(coeffs: I) -> Result<Self, PolynomialError>
    where
        I: IntoIterator<Item = ((u32, u32), Complex64)>,
    {
        let raw = WirtingerPoly::from_terms(coeffs);
        let degree = raw.degree();
        if degree < 2 {
            return Err(PolynomialError::DegreeTooLow(degree));
        }
        if !raw.terms.keys().any(|&(j, k)| j >= 1 && k >= 1) {
            return Err(PolynomialError::Harmonic);
        }
        let mut sym = BTreeMap::new();
        for (&(j, k), &c) in &raw.terms {
            let mirror = raw.coefficient(k, j).conj();
            let asymmetry = (c - mirror).norm();
            if asymmetry > REALITY_TOLERANCE * c.norm().max(1.0) {
                return Err(PolynomialError::NotReal { j, k, asymmetry });
            }
            let avg = (c + mirror) * 0.5;
            sym.insert((j, k), avg);
            sym.insert((k, j), avg.conj());
        }
        let poly = WirtingerPoly::from_terms(sym);
        let label = format!("{poly}");
        Ok(Self::from_valid(poly, label))
    }

    fn from_valid(poly: WirtingerPoly, label: String) -> Self {
        let degree = poly.degree();
        let dz = poly.d_z();
        let dzdzbar = dz.d_zbar();
        Self {
            poly,
            degree,
            label,
            dz,
            dzdzbar,
        }
    }

    /// Parse `p1:m` or `p2:m`.
    pub fn from_model_name(name: &str) -> Result<Self, PolynomialError> {
        let unknown = || PolynomialError::UnknownModel(name.to_string());
        let (family, order) = name.trim().split_once(':').ok_or_else(unknown)?;
        let m: u32 = order.trim().parse().map_err(|_| unknown())?;
        match family.trim() {
            "p1" => model_p1(m),
            "p2" => model_p2(m),
            _ => Err(unknown()),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn coefficients(&self) -> &WirtingerPoly {
        &self.poly
    }

    pub fn coefficient(&self, j: u32, k: u32) -> Complex64 {
        self.poly.coefficient(j, k)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.poly.eval(z)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.poly.eval(Complex64::new(x[0], x[1])).re
    }

    /// ∂p/∂z at `x`.
    pub fn dz(&self, x: [f64; 2]) -> Complex64 {
        self.dz.eval(Complex64::new(x[0], x[1]))
    }

    /// `(p_{x₁}, p_{x₂})`, using `∂p/∂z = (p_{x₁} − i p_{x₂})/2` for real `p`.
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let pz = self.dz(x);
        [2.0 * pz.re, -2.0 * pz.im]
    }

    /// `Δp = 4 ∂²p/∂z∂z̄`.
    pub fn laplacian(&self, x: [f64; 2]) -> f64 {
        4.0 * self.dzdzbar.eval(Complex64::new(x[0], x[1])).re
    }

    /// Taylor table `A_{jk}(z)` about `z`, by binomial expansion of each
    /// monomial `(z + u)^j conj(z + u)^k`.
    pub fn recenter(&self, z: Complex64) -> RecenteredTaylor {
        let deg = self.degree as usize;
        let zp = powers(z, deg);
        let zbp = powers(z.conj(), deg);
        let mut table: BTreeMap<(u32, u32), Complex64> = BTreeMap::new();
        for ((j, k), c) in self.poly.terms() {
            for a in 0..=j {
                let ca = c * binomial(j, a) * zp[(j - a) as usize];
                for b in 0..=k {
                    *table.entry((a, b)).or_default() +=
                        ca * binomial(k, b) * zbp[(k - b) as usize];
                }
            }
        }
        RecenteredTaylor {
            center: z,
            degree: self.degree,
            table,
        }
    }

    /// `w ↦ p(w + z0)`.
    pub fn translate(&self, z0: Complex64) -> PolynomialSpec {
        let taylor = self.recenter(z0);
        let poly = WirtingerPoly::from_terms(taylor.table);
        Self::from_valid(poly, format!("{}(w+{})", self.label, fmt_c(z0)))
    }

    /// `w ↦ p(w / λ)`.
    pub fn dilate(&self, lambda: f64) -> PolynomialSpec {
        let poly = WirtingerPoly::from_terms(
            self.poly
                .terms()
                .map(|((j, k), c)| ((j, k), c / lambda.powi((j + k) as i32))),
        );
        Self::from_valid(poly, format!("{}(w/{lambda})", self.label))
    }

    /// The mixed part of `p` about `z0`: `Σ_{j,k≥1} A_{jk}(z0) (w−z0)^j conj(w−z0)^k`,
    /// re-expanded in global coordinates.
    pub fn mixed_part_about(&self, z0: Complex64) -> PolynomialSpec {
        let taylor = self.recenter(z0);
        let local = WirtingerPoly::from_terms(
            taylor
                .table
                .into_iter()
                .filter(|&((j, k), _)| j >= 1 && k >= 1),
        );
        let local = Self::from_valid(local, String::new());
        let global = local.recenter(-z0);
        let poly = WirtingerPoly::from_terms(global.table);
        Self::from_valid(poly, format!("{}[mixed@{}]", self.label, fmt_c(z0)))
    }
}

fn fmt_c(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

impl fmt::Display for WirtingerPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(&(j, k), c)| {
                if c.im == 0.0 {
                    format!("{}*z^{j}zb^{k}", c.re)
                } else {
                    format!("({}{:+}i)*z^{j}zb^{k}", c.re, c.im)
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// `A_{jk}(z)` for `0 ≤ j + k ≤ deg p`, keyed by `(j, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecenteredTaylor {
    pub center: Complex64,
    pub degree: u32,
    table: BTreeMap<(u32, u32), Complex64>,
}

impl RecenteredTaylor {
    pub fn get(&self, j: u32, k: u32) -> Complex64 {
        self.table.get(&(j, k)).copied().unwrap_or_default()
    }

    /// Nonzero entries.
    pub fn entries(&self) -> impl Iterator<Item = ((u32, u32), Complex64)> + '_ {
        self.table.iter().filter(|(_, c)| **c != Complex64::default()).map(|(&k, &c)| (k, c))
    }

    /// Terms with `j ≥ 1` and `k ≥ 1`.
    pub fn mixed(&self) -> impl Iterator<Item = ((u32, u32), Complex64)> + '_ {
        self.entries().filter(|&((j, k), _)| j >= 1 && k >= 1)
    }

    /// `Σ A_{jk} (w−z)^j conj(w−z)^k`, which reproduces `p(w)`.
    pub fn eval(&self, w: Complex64) -> Complex64 {
        let u = w - self.center;
        let zp = powers(u, self.degree as usize);
        let zbp = powers(u.conj(), self.degree as usize);
        self.table
            .iter()
            .map(|(&(j, k), &c)| c * zp[j as usize] * zbp[k as usize])
            .sum()
    }
}

/// `p₁(z) = |z|^{2m}`.
pub fn model_p1(m: u32) -> Result<PolynomialSpec, PolynomialError> {
    if m == 0 {
        return Err(PolynomialError::BadModelOrder(m));
    }
    let poly = WirtingerPoly::from_terms([((m, m), Complex64::new(1.0, 0.0))]);
    Ok(PolynomialSpec::from_valid(poly, format!("p1:{m}")))
}

/// `p₂(x + iy) = x^{2m} = ((z + z̄)/2)^{2m}`.
pub fn model_p2(m: u32) -> Result<PolynomialSpec, PolynomialError> {
    if m == 0 {
        return Err(PolynomialError::BadModelOrder(m));
    }
    let n = 2 * m;
    let scale = 0.5f64.powi(n as i32);
    let poly = WirtingerPoly::from_terms(
        (0..=n).map(|j| ((j, n - j), Complex64::new(binomial(n, j) * scale, 0.0))),
    );
    Ok(PolynomialSpec::from_valid(poly, format!("p2:{m}")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleBox {
    pub center: [f64; 2],
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubharmonicityReport {
    pub min_laplacian: f64,
    pub max_abs_laplacian: f64,
    pub argmin: [f64; 2],
    pub samples: usize,
    pub pass: bool,
}

/// Sample `Δp` on an `n × n` lattice covering `bx`.
///
/// Fails the verdict when the minimum drops below `-1e-10 (1 + max|Δp|)`.
pub fn subharmonicity_check(p: &PolynomialSpec, bx: SampleBox, n: usize) -> SubharmonicityReport {
    assert!(n >= 2, "need at least two samples per side");
    let step = 2.0 * bx.half_width / (n - 1) as f64;
    let mut min_lap = f64::INFINITY;
    let mut max_abs = 0.0f64;
    let mut argmin = bx.center;
    for j in 0..n {
        for i in 0..n {
            let x = [
                bx.center[0] - bx.half_width + i as f64 * step,
                bx.center[1] - bx.half_width + j as f64 * step,
            ];
            let lap = p.laplacian(x);
            max_abs = max_abs.max(lap.abs());
            if lap < min_lap {
                min_lap = lap;
                argmin = x;
            }
        }
    }
    SubharmonicityReport {
        min_laplacian: min_lap,
        max_abs_laplacian: max_abs,
        argmin,
        samples: n * n,
        pass: min_lap >= -1e-10 * (1.0 + max_abs),
    }
}
