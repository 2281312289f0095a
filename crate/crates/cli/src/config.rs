//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! [polynomial]
//! model = p1:2          # or coefficient lines `j k re im`
//! [operator]
//! tau = 1
//! L = 4
//! n = 257
//! [solver]
//! dt = 5e-4
//! schedule = log:0.1:2:8   # or lin:a:b:n, or a comma list
//! w0 = 0, 0
//! ```
//!
//! Keys are case-sensitive. See [`RunConfig::default_text`] for every key and
//! its default.

use std::fmt::{self, Write as _};

use num_complex::Complex64;
use thiserror::Error;

use heatlab_core::heat_solver::log_schedule;
use heatlab_core::PolynomialSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based line, or 0 for a command-line override.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "override: {}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{}", join(.0))]
    Parse(Vec<ParseError>),
    #[error("{}", join(.0))]
    Validation(Vec<String>),
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolySource {
    Model(String),
    Coefficients(Vec<(u32, u32, f64, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gaussian,
    Longtime,
    Energy,
    Derivs,
    Subsolution,
    Scaling,
    Gbounds,
    Appendix,
    All,
}

impl Suite {
    pub const EACH: [Suite; 8] = [
        Suite::Gaussian,
        Suite::Longtime,
        Suite::Energy,
        Suite::Derivs,
        Suite::Subsolution,
        Suite::Scaling,
        Suite::Gbounds,
        Suite::Appendix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gaussian => "gaussian",
            Suite::Longtime => "longtime",
            Suite::Energy => "energy",
            Suite::Derivs => "derivs",
            Suite::Subsolution => "subsolution",
            Suite::Scaling => "scaling",
            Suite::Gbounds => "gbounds",
            Suite::Appendix => "appendix",
            Suite::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::EACH.into_iter().chain([Suite::All]).find(|x| x.name() == s)
    }

    pub fn expand(self) -> Vec<Suite> {
        if self == Suite::All {
            Suite::EACH.to_vec()
        } else {
            vec![self]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub poly_source: PolySource,
    pub polynomial: PolynomialSpec,
    pub tau: f64,
    pub half_width: f64,
    pub n: usize,
    pub dt: f64,
    pub dt_max: f64,
    pub step_rho: f64,
    pub schedule: Vec<f64>,
    pub schedule_text: String,
    pub w0: Complex64,
    pub n_paths: usize,
    pub n_t: usize,
    pub seed: u64,
    pub mc_x: [f64; 2],
    pub mc_y: [f64; 2],
    pub mc_s: f64,
    pub geom_points: Vec<Complex64>,
    pub geom_deltas: Vec<f64>,
    pub rho_points: Vec<Complex64>,
    pub rho_half_width: f64,
    pub rho_h: f64,
    /// `None` selects `10 μ(w₀,1/τ)²`.
    pub gfield_s_max: Option<f64>,
    pub gfield_points: usize,
    pub suite: Suite,
    pub oracle_mode: bool,
}

const SECTIONS: [&str; 8] = ["polynomial", "operator", "solver", "mc", "geom", "rho", "gfield", "verify"];

impl RunConfig {
    /// Every key with its default value; `[polynomial]` has no default.
    pub fn default_text() -> &'static str {
        "[operator]\ntau = 1\nL = 4\nn = 257\n\
         [solver]\ndt = 5e-4\ndt_max = inf\nstep_rho = 0.02\nschedule = log:0.1:2:8\nw0 = 0, 0\n\
         [mc]\nn_paths = 100000\nn_t = 256\nseed = 1\nx = 0.5, 0.25\ny = 0, 0\ns = 0.5\n\
         [geom]\npoints = 0.1, 0; 1, 0; 10, 0; 0.1, 0.1; 1, 1; 10, 10\ndeltas = 0.01, 1, 100\n\
         [rho]\npoints = 0, 0; 1, 0; 0, 1; -1, 0.5; 1.5, -1\nL = 2.5\nh = 0.015625\n\
         [gfield]\ns_max = auto\npoints = 120\n\
         [verify]\nsuite = all\n"
    }

    /// Canonical text; parsing it gives back the same configuration.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let pts = |v: &[Complex64]| v.iter().map(|z| format!("{:?}, {:?}", z.re, z.im)).collect::<Vec<_>>().join("; ");
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        s.push_str("[polynomial]\n");
        match &self.poly_source {
            PolySource::Model(m) => writeln!(s, "model = {m}").unwrap(),
            PolySource::Coefficients(c) => {
                for (j, k, re, im) in c {
                    writeln!(s, "{j} {k} {re:?} {im:?}").unwrap();
                }
            }
        }
        writeln!(s, "[operator]\ntau = {:?}\nL = {:?}\nn = {}", self.tau, self.half_width, self.n).unwrap();
        writeln!(
            s,
            "[solver]\ndt = {:?}\ndt_max = {:?}\nstep_rho = {:?}\nschedule = {}\nw0 = {:?}, {:?}",
            self.dt, self.dt_max, self.step_rho, self.schedule_text, self.w0.re, self.w0.im
        )
        .unwrap();
        writeln!(
            s,
            "[mc]\nn_paths = {}\nn_t = {}\nseed = {}\nx = {:?}, {:?}\ny = {:?}, {:?}\ns = {:?}",
            self.n_paths, self.n_t, self.seed, self.mc_x[0], self.mc_x[1], self.mc_y[0], self.mc_y[1], self.mc_s
        )
        .unwrap();
        writeln!(s, "[geom]\npoints = {}\ndeltas = {}", pts(&self.geom_points), list(&self.geom_deltas)).unwrap();
        writeln!(s, "[rho]\npoints = {}\nL = {:?}\nh = {:?}", pts(&self.rho_points), self.rho_half_width, self.rho_h).unwrap();
        let smax = self.gfield_s_max.map_or("auto".to_string(), |v| format!("{v:?}"));
        writeln!(s, "[gfield]\ns_max = {smax}\npoints = {}", self.gfield_points).unwrap();
        writeln!(s, "[verify]\nsuite = {}", self.suite.name()).unwrap();
        s
    }
}

/// Override of one key, as given on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Override {
    pub section: String,
    pub key: String,
    pub value: String,
}

impl Override {
    /// Parse `section.key=value`.
    pub fn parse(s: &str) -> Option<Override> {
        let (path, value) = s.split_once('=')?;
        let (section, key) = path.trim().split_once('.')?;
        Some(Override { section: section.into(), key: key.into(), value: value.trim().into() })
    }
}

struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

pub fn parse_config(text: &str, oracle_mode: bool) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &[], oracle_mode)
}

/// Parse, apply overrides, fill defaults, and validate.
pub fn parse_config_with(text: &str, overrides: &[Override], oracle_mode: bool) -> Result<RunConfig, ConfigError> {
    let mut errors = Vec::new();
    let mut entries = Vec::new();
    let mut coeffs = Vec::new();
    let mut coeff_line = 0;
    let mut section = String::new();
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            match name.strip_suffix(']') {
                Some(name) if SECTIONS.contains(&name.trim()) => section = name.trim().to_string(),
                _ => errors.push(ParseError { line: ln, message: format!("unknown section header '{line}'") }),
            }
            continue;
        }
        if section.is_empty() {
            errors.push(ParseError { line: ln, message: "entry before any [section] header".into() });
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            entries.push(Entry { section: section.clone(), key: k.trim().into(), value: v.trim().into(), line: ln });
        } else if section == "polynomial" {
            match parse_coefficient(line) {
                Ok(c) => {
                    coeffs.push(c);
                    coeff_line = ln;
                }
                Err(m) => errors.push(ParseError { line: ln, message: m }),
            }
        } else {
            errors.push(ParseError { line: ln, message: format!("expected key = value, got '{line}'") });
        }
    }
    for o in overrides {
        if !SECTIONS.contains(&o.section.as_str()) {
            errors.push(ParseError { line: 0, message: format!("unknown section '{}'", o.section) });
            continue;
        }
        entries.push(Entry { section: o.section.clone(), key: o.key.clone(), value: o.value.clone(), line: 0 });
    }

    let mut b = Builder::default();
    for e in &entries {
        if let Err(m) = b.set(e) {
            errors.push(ParseError { line: e.line, message: m });
        }
    }
    if !errors.is_empty() {
        errors.sort_by_key(|e| (e.line == 0, e.line));
        return Err(ConfigError::Parse(errors));
    }
    b.finish(coeffs, coeff_line, oracle_mode)
}

fn parse_coefficient(line: &str) -> Result<(u32, u32, f64, f64), String> {
    let t: Vec<&str> = line.split_whitespace().collect();
    let bad = || format!("malformed coefficient line '{line}' (expected `j k re im`)");
    if t.len() != 4 {
        return Err(bad());
    }
    let j = t[0].parse().map_err(|_| bad())?;
    let k = t[1].parse().map_err(|_| bad())?;
    let re: f64 = t[2].parse().map_err(|_| bad())?;
    let im: f64 = t[3].parse().map_err(|_| bad())?;
    if !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok((j, k, re, im))
}

fn num(v: &str) -> Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("'{v}' is not a number"))
}

fn int<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse::<T>().map_err(|_| format!("'{v}' is not a non-negative integer"))
}

fn pair(v: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("'{v}' is not a point `a, b`"));
    }
    Ok([num(parts[0])?, num(parts[1])?])
}

fn points(v: &str) -> Result<Vec<Complex64>, String> {
    v.split(';').map(|p| pair(p).map(|[a, b]| Complex64::new(a, b))).collect()
}

fn list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|x| num(x.trim())).collect()
}

fn schedule(v: &str) -> Result<Vec<f64>, String> {
    for (prefix, log) in [("log:", true), ("lin:", false)] {
        if let Some(rest) = v.strip_prefix(prefix) {
            let p: Vec<&str> = rest.split(':').collect();
            if p.len() != 3 {
                return Err(format!("schedule '{v}' must be {prefix}a:b:n"));
            }
            let (a, b, n) = (num(p[0])?, num(p[1])?, int::<usize>(p[2])?);
            if n < 2 || !(a > 0.0 && b > a) {
                return Err(format!("schedule '{v}' needs 0 < a < b and n ≥ 2"));
            }
            return Ok(if log {
                log_schedule(a, b, n)
            } else {
                (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
            });
        }
    }
    list(v)
}

#[derive(Default)]
struct Builder {
    model: Option<String>,
    tau: Option<f64>,
    half_width: Option<f64>,
    n: Option<usize>,
    dt: Option<f64>,
    dt_max: Option<f64>,
    step_rho: Option<f64>,
    schedule: Option<(Vec<f64>, String)>,
    w0: Option<[f64; 2]>,
    n_paths: Option<usize>,
    n_t: Option<usize>,
    seed: Option<u64>,
    mc_x: Option<[f64; 2]>,
    mc_y: Option<[f64; 2]>,
    mc_s: Option<f64>,
    geom_points: Option<Vec<Complex64>>,
    geom_deltas: Option<Vec<f64>>,
    rho_points: Option<Vec<Complex64>>,
    rho_half_width: Option<f64>,
    rho_h: Option<f64>,
    gfield_s_max: Option<Option<f64>>,
    gfield_points: Option<usize>,
    suite: Option<Suite>,
}

impl Builder {
    fn set(&mut self, e: &Entry) -> Result<(), String> {
        let v = e.value.as_str();
        match (e.section.as_str(), e.key.as_str()) {
            ("polynomial", "model") => self.model = Some(v.to_string()),
            ("operator", "tau") => self.tau = Some(num(v)?),
            ("operator", "L") => self.half_width = Some(num(v)?),
            ("operator", "n") => self.n = Some(int(v)?),
            ("solver", "dt") => self.dt = Some(num(v)?),
            ("solver", "dt_max") => self.dt_max = Some(num(v)?),
            ("solver", "step_rho") => self.step_rho = Some(num(v)?),
            ("solver", "schedule") => self.schedule = Some((schedule(v)?, v.to_string())),
            ("solver", "w0") => self.w0 = Some(pair(v)?),
            ("mc", "n_paths") => self.n_paths = Some(int(v)?),
            ("mc", "n_t") => self.n_t = Some(int(v)?),
            ("mc", "seed") => self.seed = Some(int(v)?),
            ("mc", "x") => self.mc_x = Some(pair(v)?),
            ("mc", "y") => self.mc_y = Some(pair(v)?),
            ("mc", "s") => self.mc_s = Some(num(v)?),
            ("geom", "points") => self.geom_points = Some(points(v)?),
            ("geom", "deltas") => self.geom_deltas = Some(list(v)?),
            ("rho", "points") => self.rho_points = Some(points(v)?),
            ("rho", "L") => self.rho_half_width = Some(num(v)?),
            ("rho", "h") => self.rho_h = Some(num(v)?),
            ("gfield", "s_max") => self.gfield_s_max = Some(if v == "auto" { None } else { Some(num(v)?) }),
            ("gfield", "points") => self.gfield_points = Some(int(v)?),
            ("verify", "suite") => {
                self.suite = Some(Suite::parse(v).ok_or_else(|| format!("unknown suite '{v}'"))?);
            }
            (s, k) => return Err(format!("unknown key '{k}' in [{s}]")),
        }
        Ok(())
    }

    fn finish(self, coeffs: Vec<(u32, u32, f64, f64)>, coeff_line: usize, oracle_mode: bool) -> Result<RunConfig, ConfigError> {
        // defaults come from the same text the docs show
        let mut d = Builder::default();
        let mut section = String::new();
        for raw in RunConfig::default_text().lines() {
            if let Some(name) = raw.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                section = name.to_string();
            } else if let Some((k, v)) = raw.split_once('=') {
                d.set(&Entry { section: section.clone(), key: k.trim().into(), value: v.trim().into(), line: 0 })
                    .expect("default config parses");
            }
        }

        let mut errs = Vec::new();
        let poly_source = match (self.model, coeffs.is_empty()) {
            (Some(_), false) => {
                errs.push(format!("[polynomial] has both a model name and coefficient lines (line {coeff_line})"));
                None
            }
            (Some(m), true) => Some(PolySource::Model(m)),
            (None, false) => Some(PolySource::Coefficients(coeffs)),
            (None, true) => {
                errs.push("[polynomial] is required: `model = p1:m` / `p2:m` or lines `j k re im`".into());
                None
            }
        };
        let polynomial = match &poly_source {
            Some(PolySource::Model(m)) => PolynomialSpec::from_model_name(m).map_err(|e| errs.push(format!("polynomial: {e}"))).ok(),
            Some(PolySource::Coefficients(c)) => {
                PolynomialSpec::new(c.iter().map(|&(j, k, re, im)| ((j, k), Complex64::new(re, im))))
                    .map_err(|e| errs.push(format!("polynomial: {e}")))
                    .ok()
            }
            None => None,
        };

        let tau = self.tau.or(d.tau).unwrap();
        if !tau.is_finite() {
            errs.push(format!("tau = {tau} is not finite"));
        } else if tau < 0.0 {
            errs.push(format!("tau = {tau}: tau < 0 is not supported (the operator loses positivity)"));
        } else if tau == 0.0 && !oracle_mode {
            errs.push("tau = 0 violates the hypotheses; allowed only with --oracle-mode".into());
        }
        let half_width = self.half_width.or(d.half_width).unwrap();
        let n = self.n.or(d.n).unwrap();
        if !(half_width > 0.0 && half_width.is_finite()) {
            errs.push(format!("L = {half_width} must be positive"));
        }
        if n < 33 || n.is_multiple_of(2) {
            errs.push(format!("n = {n} must be odd and at least 33"));
        }
        let dt = self.dt.or(d.dt).unwrap();
        let dt_max = self.dt_max.or(d.dt_max).unwrap();
        let step_rho = self.step_rho.or(d.step_rho).unwrap();
        if !(dt > 0.0 && dt.is_finite()) {
            errs.push(format!("dt = {dt} must be positive"));
        }
        if dt_max.is_nan() || dt_max < dt {
            errs.push(format!("dt_max = {dt_max} must be at least dt"));
        }
        if !(step_rho >= 0.0 && step_rho.is_finite()) {
            errs.push(format!("step_rho = {step_rho} must be non-negative"));
        }
        let (schedule, schedule_text) = self.schedule.or(d.schedule).unwrap();
        if schedule.is_empty() || schedule[0] <= 0.0 || schedule.windows(2).any(|w| w[1] <= w[0]) || schedule.iter().any(|s| !s.is_finite()) {
            errs.push("schedule must be positive and strictly increasing".into());
        }
        let w0 = self.w0.or(d.w0).unwrap();
        if w0[0].abs() >= half_width || w0[1].abs() >= half_width {
            errs.push(format!("w0 = ({}, {}) lies outside the grid", w0[0], w0[1]));
        }
        let n_paths = self.n_paths.or(d.n_paths).unwrap();
        let n_t = self.n_t.or(d.n_t).unwrap();
        if n_paths < heatlab_core::feynman_kac::MIN_PATHS {
            errs.push(format!("n_paths = {n_paths} is below {}", heatlab_core::feynman_kac::MIN_PATHS));
        }
        if n_t < heatlab_core::feynman_kac::MIN_STEPS {
            errs.push(format!("n_t = {n_t} is below {}", heatlab_core::feynman_kac::MIN_STEPS));
        }
        let mc_s = self.mc_s.or(d.mc_s).unwrap();
        if !(mc_s > 0.0 && mc_s.is_finite()) {
            errs.push(format!("mc s = {mc_s} must be positive"));
        }
        let geom_deltas = self.geom_deltas.or(d.geom_deltas).unwrap();
        if geom_deltas.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            errs.push("geom deltas must be positive".into());
        }
        let rho_half_width = self.rho_half_width.or(d.rho_half_width).unwrap();
        let rho_h = self.rho_h.or(d.rho_h).unwrap();
        if !(rho_h > 0.0 && rho_half_width > 2.0 * rho_h) {
            errs.push(format!("rho grid L = {rho_half_width}, h = {rho_h} is invalid"));
        }
        let rho_points = self.rho_points.or(d.rho_points).unwrap();
        if rho_points.iter().any(|z| z.re.abs() >= rho_half_width || z.im.abs() >= rho_half_width) {
            errs.push("rho points must lie inside the rho grid".into());
        }
        let gfield_s_max = self.gfield_s_max.unwrap_or(None);
        if let Some(v) = gfield_s_max {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("gfield s_max = {v} must be positive"));
            }
        }
        let gfield_points = self.gfield_points.or(d.gfield_points).unwrap();
        if gfield_points < 60 {
            errs.push(format!("gfield points = {gfield_points} is below 60"));
        }
        if !errs.is_empty() {
            return Err(ConfigError::Validation(errs));
        }
        Ok(RunConfig {
            poly_source: poly_source.unwrap(),
            polynomial: polynomial.unwrap(),
            tau,
            half_width,
            n,
            dt,
            dt_max,
            step_rho,
            schedule,
            schedule_text,
            w0: Complex64::new(w0[0], w0[1]),
            n_paths,
            n_t,
            seed: self.seed.or(d.seed).unwrap(),
            mc_x: self.mc_x.or(d.mc_x).unwrap(),
            mc_y: self.mc_y.or(d.mc_y).unwrap(),
            mc_s,
            geom_points: self.geom_points.or(d.geom_points).unwrap(),
            geom_deltas,
            rho_points,
            rho_half_width,
            rho_h,
            gfield_s_max,
            gfield_points,
            suite: self.suite.or(d.suite).unwrap(),
            oracle_mode,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("[polynomial]\nmodel = p1:1\n[operator]\ntau = 1\n", false).unwrap();
        assert_eq!(c.polynomial.label(), "p1:1");
        assert_eq!((c.half_width, c.n, c.dt), (4.0, 257, 5e-4));
        assert_eq!(c.schedule.len(), 8);
        assert_eq!(c.suite, Suite::All);
        assert!(c.dt_max.is_infinite());
        assert_eq!(c.n_paths, 100_000);
    }

    #[test]
    fn canonical_round_trip() {
        let text = "[polynomial]\n2 2 0.375 0\n3 1 0.25 0\n1 3 0.25 0\n4 0 0.0625 0\n0 4 0.0625 0\n\
                    [solver]\nschedule = 0.1, 0.2\n[gfield]\ns_max = 3\n";
        let c = parse_config(text, false).unwrap();
        let again = parse_config(&c.canonical(), false).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.canonical(), again.canonical());
    }

    #[test]
    fn negative_tau_is_named() {
        let e = parse_config("[polynomial]\nmodel = p1:1\n[operator]\ntau = -1\n", false).unwrap_err();
        let ConfigError::Validation(v) = e else { panic!("{e:?}") };
        assert!(v.iter().any(|m| m.contains("tau < 0")), "{v:?}");
    }

    #[test]
    fn zero_tau_needs_oracle_mode() {
        let t = "[polynomial]\nmodel = p1:1\n[operator]\ntau = 0\n";
        assert!(parse_config(t, false).is_err());
        assert_eq!(parse_config(t, true).unwrap().tau, 0.0);
    }

    #[test]
    fn malformed_coefficient_line_number() {
        let e = parse_config("[polynomial]\n1 1 1 0\n2 x 1 0\n", false).unwrap_err();
        let ConfigError::Parse(v) = e else { panic!("{e:?}") };
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].line, 3);
    }

    #[test]
    fn all_errors_are_reported() {
        let e = parse_config("[polynomial]\nmodel = p1:1\n[operator]\ntau = -1\nn = 100\n[solver]\ndt = 0\n", false).unwrap_err();
        let ConfigError::Validation(v) = e else { panic!("{e:?}") };
        assert_eq!(v.len(), 3, "{v:?}");
        let e = parse_config("[nope]\nx = 1\n[operator]\nfoo = 2\nbar\n", false).unwrap_err();
        let ConfigError::Parse(v) = e else { panic!("{e:?}") };
        assert_eq!(v.iter().map(|p| p.line).collect::<Vec<_>>(), vec![1, 2, 4, 5]);
    }

    #[test]
    fn overrides_apply() {
        let o = [Override::parse("operator.n=129").unwrap(), Override::parse("solver.schedule=lin:0.1:0.5:5").unwrap()];
        let c = parse_config_with("[polynomial]\nmodel = p2:2\n", &o, false).unwrap();
        assert_eq!(c.n, 129);
        assert_eq!(c.schedule.len(), 5);
        assert!((c.schedule[4] - 0.5).abs() < 1e-15);
    }
}
