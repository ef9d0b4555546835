//! Periodized sets `Ω = {x : f(x) ≥ 0}` described by smooth phase functions.
//!
//! A phase function must be odd and flip sign under every unit coordinate
//! shift; then `Ω + v_i = Ω^c` and `-Ω = Ω^c` hold up to the zero set.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Smooth scalar field on `R^n` with its analytic gradient.
#[derive(Clone)]
pub struct PhaseFunction {
    dimension: usize,
    eval: Arc<EvalFn>,
    grad: Arc<GradFn>,
    description: String,
}

impl fmt::Debug for PhaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseFunction")
            .field("dimension", &self.dimension)
            .field("description", &self.description)
            .finish()
    }
}

impl PhaseFunction {
    pub fn new<E, G>(dimension: usize, description: impl Into<String>, eval: E, grad: G) -> Self
    where
        E: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dimension,
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            description: description.into(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dimension];
        (self.grad)(x, &mut g);
        g
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }

    #[inline]
    pub fn membership(&self, x: &[f64]) -> Membership {
        membership(self, x)
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        self.eval(x) >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Outside,
}

/// Closed-set convention: `f(x) = 0` counts as inside.
pub fn membership(f: &PhaseFunction, x: &[f64]) -> Membership {
    if f.eval(x) >= 0.0 {
        Membership::Inside
    } else {
        Membership::Outside
    }
}

/// Signs `ε_1, …, ε_n` of a periodized half space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HalfSpaceSpec {
    signs: Vec<i8>,
}

impl HalfSpaceSpec {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::Parameter(
                "half space needs at least one sign".into(),
            ));
        }
        if let Some(bad) = signs.iter().find(|s| **s != 1 && **s != -1) {
            return Err(Error::Parameter(format!("half-space sign {bad} is not ±1")));
        }
        Ok(Self { signs })
    }

    /// All signs `+1`.
    pub fn positive(n: usize) -> Self {
        Self { signs: vec![1; n] }
    }

    pub fn dimension(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    fn weights(&self) -> Vec<f64> {
        self.signs.iter().map(|&s| s as f64).collect()
    }
}

impl fmt::Display for HalfSpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.signs.iter().map(|s| format!("{s:+}")).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for HalfSpaceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let signs = s
            .split(',')
            .map(|p| match p.trim() {
                "+1" | "1" => Ok(1),
                "-1" => Ok(-1),
                other => Err(Error::Parameter(format!(
                    "half-space sign `{other}` is not ±1"
                ))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::new(signs)
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// `f(x) = sin(π Σ ε_i x_i)`.
pub fn make_half_space(spec: &HalfSpaceSpec) -> PhaseFunction {
    let w = spec.weights();
    let wg = w.clone();
    PhaseFunction::new(
        spec.dimension(),
        format!("halfspace:{spec}"),
        move |x| (PI * dot(&w, x)).sin(),
        move |x, g| {
            let c = PI * (PI * dot(&wg, x)).cos();
            for (gi, wi) in g.iter_mut().zip(&wg) {
                *gi = c * wi;
            }
        },
    )
}

/// Built-in perturbations `h`, each odd and flipping sign under every unit
/// coordinate shift. With `s = Σ ε_i x_i`:
///
/// * `A`: `sin(π(s + 14 ε_1 x_1))`, all coefficients odd (15 on `x_1`)
/// * `B`: `cos(πs) · sin(16π x_1)`
/// * `C`: `cos(πs) · sin(16π x_1) · cos(8π x_2)`, needs `n ≥ 2`
/// * `D`: `cos(πs) · sin(2π x_1)`, low frequency; the boundary stays a graph
///   over every coordinate hyperplane for `|t| < 1/2`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerturbationMode {
    A,
    B,
    C,
    D,
}

impl PerturbationMode {
    pub const ALL: [PerturbationMode; 4] = [Self::A, Self::B, Self::C, Self::D];

    pub fn min_dimension(self) -> usize {
        match self {
            Self::C => 2,
            _ => 1,
        }
    }

    fn value(self, w: &[f64], x: &[f64]) -> f64 {
        let s = dot(w, x);
        match self {
            Self::A => (PI * (s + 14.0 * w[0] * x[0])).sin(),
            Self::B => (PI * s).cos() * (16.0 * PI * x[0]).sin(),
            Self::C => (PI * s).cos() * (16.0 * PI * x[0]).sin() * (8.0 * PI * x[1]).cos(),
            Self::D => (PI * s).cos() * (2.0 * PI * x[0]).sin(),
        }
    }

    /// Adds `t · ∇h(x)` into `g`.
    fn add_gradient(self, w: &[f64], x: &[f64], t: f64, g: &mut [f64]) {
        let s = dot(w, x);
        match self {
            Self::A => {
                let c = t * PI * (PI * (s + 14.0 * w[0] * x[0])).cos();
                for (gi, wi) in g.iter_mut().zip(w) {
                    *gi += c * wi;
                }
                g[0] += c * 14.0 * w[0];
            }
            Self::B | Self::D => {
                let freq = if self == Self::B { 16.0 } else { 2.0 };
                let (sn, cs) = (PI * s).sin_cos();
                let (sx, cx) = (freq * PI * x[0]).sin_cos();
                for (gi, wi) in g.iter_mut().zip(w) {
                    *gi += -t * PI * sn * wi * sx;
                }
                g[0] += t * cs * freq * PI * cx;
            }
            Self::C => {
                let (sn, cs) = (PI * s).sin_cos();
                let (sx, cx) = (16.0 * PI * x[0]).sin_cos();
                let (sy, cy) = (8.0 * PI * x[1]).sin_cos();
                for (gi, wi) in g.iter_mut().zip(w) {
                    *gi += -t * PI * sn * wi * sx * cy;
                }
                g[0] += t * cs * 16.0 * PI * cx * cy;
                g[1] += -t * cs * sx * 8.0 * PI * sy;
            }
        }
    }
}

impl fmt::Display for PerturbationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
            Self::D => "D",
        };
        f.write_str(c)
    }
}

impl FromStr for PerturbationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Self::A),
            "B" | "b" => Ok(Self::B),
            "C" | "c" => Ok(Self::C),
            "D" | "d" => Ok(Self::D),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

/// `f_t = sin(π Σ ε_i x_i) + t · h(x)`.
pub fn make_perturbed(
    base: &HalfSpaceSpec,
    mode: PerturbationMode,
    t: f64,
) -> Result<PhaseFunction> {
    if t.is_nan() || t.abs() > 1.0 {
        return Err(Error::Parameter(format!(
            "perturbation amplitude {t} outside [-1, 1]"
        )));
    }
    if base.dimension() < mode.min_dimension() {
        return Err(Error::Parameter(format!(
            "mode {mode} needs n >= {}, got n = {}",
            mode.min_dimension(),
            base.dimension()
        )));
    }
    let w = base.weights();
    let wg = w.clone();
    Ok(PhaseFunction::new(
        base.dimension(),
        format!("perturbed:{mode}:{t}:{base}"),
        move |x| (PI * dot(&w, x)).sin() + t * mode.value(&w, x),
        move |x, g| {
            let c = PI * (PI * dot(&wg, x)).cos();
            for (gi, wi) in g.iter_mut().zip(&wg) {
                *gi = c * wi;
            }
            mode.add_gradient(&wg, x, t, g);
        },
    ))
}

/// Result of a sampled symmetry check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryReport {
    pub pass: bool,
    pub worst_violation: f64,
}

/// Samples `samples` uniform points of `[0,1]^n` and measures
/// `|f(x + v_i) + f(x)|` for each axis and `|f(-x) + f(x)|`.
pub fn validate_symmetry(f: &PhaseFunction, samples: usize, seed: u64, tol: f64) -> SymmetryReport {
    let n = f.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        for xi in x.iter_mut() {
            *xi = rng.random::<f64>();
        }
        let fx = f.eval(&x);
        for i in 0..n {
            y.copy_from_slice(&x);
            y[i] += 1.0;
            worst = worst.max((f.eval(&y) + fx).abs());
        }
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = -xi;
        }
        worst = worst.max((f.eval(&y) + fx).abs());
    }
    SymmetryReport {
        pass: worst <= tol,
        worst_violation: worst,
    }
}

/// Largest gap between central differences (step `h`) and the analytic
/// gradient over `samples` seeded points.
pub fn gradient_consistency(f: &PhaseFunction, samples: usize, seed: u64, h: f64) -> f64 {
    let n = f.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut x = vec![0.0; n];
    for _ in 0..samples {
        for xi in x.iter_mut() {
            *xi = rng.random::<f64>();
        }
        let g = f.gradient(&x);
        for i in 0..n {
            let mut p = x.clone();
            let mut m = x.clone();
            p[i] += h;
            m[i] -= h;
            let fd = (f.eval(&p) - f.eval(&m)) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs());
        }
    }
    worst
}

/// Parsed family string: `halfspace:±1,…,±1` or
/// `perturbed:<A|B|C|D>[:<t>][:±1,…,±1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    HalfSpace(HalfSpaceSpec),
    Perturbed {
        mode: PerturbationMode,
        t: Option<f64>,
        base: Option<HalfSpaceSpec>,
    },
}

impl FamilySpec {
    /// Phase function in dimension `n`; `t` overrides the amplitude carried
    /// by the string (and is ignored for half spaces).
    pub fn build(&self, n: usize, t: Option<f64>) -> Result<PhaseFunction> {
        match self {
            Self::HalfSpace(spec) => {
                check_dimension(spec, n)?;
                Ok(make_half_space(spec))
            }
            Self::Perturbed { mode, t: own, base } => {
                let base = base.clone().unwrap_or_else(|| HalfSpaceSpec::positive(n));
                check_dimension(&base, n)?;
                make_perturbed(&base, *mode, t.or(*own).unwrap_or(0.0))
            }
        }
    }

    /// Default amplitude carried by the string, if any.
    pub fn amplitude(&self) -> Option<f64> {
        match self {
            Self::HalfSpace(_) => None,
            Self::Perturbed { t, .. } => *t,
        }
    }

    pub fn is_half_space(&self) -> bool {
        matches!(self, Self::HalfSpace(_))
    }

    /// Matching periodized half space (same base signs).
    pub fn base_half_space(&self, n: usize) -> HalfSpaceSpec {
        match self {
            Self::HalfSpace(spec) => spec.clone(),
            Self::Perturbed { base, .. } => {
                base.clone().unwrap_or_else(|| HalfSpaceSpec::positive(n))
            }
        }
    }
}

fn check_dimension(spec: &HalfSpaceSpec, n: usize) -> Result<()> {
    if spec.dimension() != n {
        return Err(Error::Parameter(format!(
            "family has {} signs but dimension is {n}",
            spec.dimension()
        )));
    }
    Ok(())
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::HalfSpace(spec) => write!(f, "halfspace:{spec}"),
            Self::Perturbed { mode, t, base } => {
                write!(f, "perturbed:{mode}")?;
                if let Some(t) = t {
                    write!(f, ":{t}")?;
                }
                if let Some(b) = base {
                    write!(f, ":{b}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for FamilySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let invalid = |reason: &str| Error::InvalidFamily {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let mut parts = s.trim().split(':');
        match parts.next() {
            Some("halfspace") => {
                let signs = parts.next().ok_or_else(|| invalid("missing signs"))?;
                if parts.next().is_some() {
                    return Err(invalid("trailing fields"));
                }
                let spec = signs.parse().map_err(|e: Error| invalid(&e.to_string()))?;
                Ok(Self::HalfSpace(spec))
            }
            Some("perturbed") => {
                let mode = parts
                    .next()
                    .ok_or_else(|| invalid("missing mode"))?
                    .parse::<PerturbationMode>()?;
                let t = parts
                    .next()
                    .map(|field| {
                        field
                            .parse::<f64>()
                            .map_err(|_| invalid(&format!("amplitude `{field}` is not a number")))
                    })
                    .transpose()?;
                let base = parts
                    .next()
                    .map(|field| field.parse().map_err(|e: Error| invalid(&e.to_string())))
                    .transpose()?;
                if parts.next().is_some() {
                    return Err(invalid("trailing fields"));
                }
                Ok(Self::Perturbed { mode, t, base })
            }
            _ => Err(invalid("expected `halfspace:` or `perturbed:`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT1_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn pp() -> HalfSpaceSpec {
        HalfSpaceSpec::new(vec![1, 1]).unwrap()
    }

    #[test]
    fn half_space_values() {
        let f = make_half_space(&pp());
        assert!((f.eval(&[0.25, 0.25]) - 1.0).abs() < 1e-15);
        assert!((f.eval(&[1.25, 0.25]) + 1.0).abs() < 1e-15);
        let g = make_half_space(&HalfSpaceSpec::new(vec![1, -1]).unwrap());
        assert!((g.eval(&[0.5, 0.25]) - SQRT1_2).abs() < 1e-15);
    }

    #[test]
    fn half_space_gradient_is_diagonal() {
        let f = make_half_space(&pp());
        let g = f.gradient(&[0.1, 0.3]);
        let c = PI * (0.4 * PI).cos();
        assert!((g[0] - c).abs() < 1e-15 && (g[1] - c).abs() < 1e-15);
    }

    #[test]
    fn perturbed_examples() {
        let base = pp();
        let f0 = make_half_space(&base);
        let a0 = make_perturbed(&base, PerturbationMode::A, 0.0).unwrap();
        for x in [[0.1, 0.2], [0.77, 0.31], [0.5, 0.9]] {
            assert_eq!(a0.eval(&x), f0.eval(&x));
        }
        let b = make_perturbed(&base, PerturbationMode::B, 0.3).unwrap();
        assert!((b.eval(&[0.25, 0.25]) - 1.0).abs() < 1e-15);
        let a = make_perturbed(&base, PerturbationMode::A, 0.5).unwrap();
        assert!((a.eval(&[1.0 / 6.0, 0.0]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn perturbed_rejects_bad_input() {
        assert_eq!(
            "E".parse::<PerturbationMode>().unwrap_err(),
            Error::UnknownMode("E".into())
        );
        assert!(make_perturbed(&pp(), PerturbationMode::B, 1.5).is_err());
        assert!(make_perturbed(&HalfSpaceSpec::positive(1), PerturbationMode::C, 0.1).is_err());
    }

    #[test]
    fn symmetry_validation() {
        let f = make_half_space(&pp());
        let r = validate_symmetry(&f, 1000, 7, 1e-12);
        assert!(r.pass);
        assert!(r.worst_violation <= 1e-14);

        // Depends on x_1 only, so shifting x_2 leaves it unchanged.
        let bad = PhaseFunction::new(
            2,
            "sin(pi x1)",
            |x| (PI * x[0]).sin(),
            |x, g| {
                g[0] = PI * (PI * x[0]).cos();
                g[1] = 0.0;
            },
        );
        let r = validate_symmetry(&bad, 1000, 7, 1e-3);
        assert!(!r.pass);
        assert!(r.worst_violation > 1.0 && r.worst_violation <= 2.0);
        let at = [0.25, 0.0];
        assert!(((bad.eval(&[0.25, 1.0]) + bad.eval(&at)) - 2.0 * SQRT1_2).abs() < 1e-15);
    }

    #[test]
    fn mode_b_identities_at_hand_picked_points() {
        let f = make_perturbed(&pp(), PerturbationMode::B, 0.7).unwrap();
        let pts = [
            [0.0, 0.0],
            [0.1, 0.2],
            [0.25, 0.25],
            [0.3, 0.9],
            [0.5, 0.5],
            [0.61, 0.07],
            [0.75, 0.125],
            [0.9, 0.45],
            [0.33, 0.66],
            [0.05, 0.95],
        ];
        for x in pts {
            let fx = f.eval(&x);
            assert!((f.eval(&[x[0] + 1.0, x[1]]) + fx).abs() < 1e-12);
            assert!((f.eval(&[x[0], x[1] + 1.0]) + fx).abs() < 1e-12);
            assert!((f.eval(&[-x[0], -x[1]]) + fx).abs() < 1e-12);
        }
        assert!(validate_symmetry(&f, 1000, 3, 1e-12).pass);
    }

    #[test]
    fn every_mode_passes_symmetry_and_gradient_checks() {
        for n in 1..=3 {
            for mode in PerturbationMode::ALL {
                if n < mode.min_dimension() {
                    continue;
                }
                for signs in [
                    vec![1i8; n],
                    (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect(),
                ] {
                    let base = HalfSpaceSpec::new(signs).unwrap();
                    for t in [-0.6, 0.25, 1.0] {
                        let f = make_perturbed(&base, mode, t).unwrap();
                        let r = validate_symmetry(&f, 200, 11, 1e-11);
                        assert!(r.pass, "{f:?}: {}", r.worst_violation);
                        let g = gradient_consistency(&f, 50, 5, 1e-5);
                        assert!(g < 1e-6 * 60.0, "{f:?} gradient gap {g}");
                    }
                }
            }
        }
    }

    #[test]
    fn membership_convention() {
        let f = make_half_space(&pp());
        assert_eq!(f.membership(&[0.25, 0.25]), Membership::Inside);
        assert_eq!(f.membership(&[-0.25, -0.25]), Membership::Outside);
        let zero = PhaseFunction::new(1, "zero", |_| 0.0, |_, g| g[0] = 0.0);
        assert_eq!(zero.membership(&[0.3]), Membership::Inside);
    }

    #[test]
    fn family_grammar() {
        let h: FamilySpec = "halfspace:+1,-1".parse().unwrap();
        assert_eq!(
            h,
            FamilySpec::HalfSpace(HalfSpaceSpec::new(vec![1, -1]).unwrap())
        );
        assert_eq!(h.to_string(), "halfspace:+1,-1");
        let p: FamilySpec = "perturbed:A:0.3".parse().unwrap();
        assert_eq!(
            p,
            FamilySpec::Perturbed {
                mode: PerturbationMode::A,
                t: Some(0.3),
                base: None
            }
        );
        let q: FamilySpec = "perturbed:B".parse().unwrap();
        assert_eq!(q.amplitude(), None);
        let r: FamilySpec = "perturbed:C:0.2:+1,-1,+1".parse().unwrap();
        assert_eq!(r.to_string(), "perturbed:C:0.2:+1,-1,+1");
        assert!(r.build(3, None).is_ok());
        assert!(r.build(2, None).is_err());
        assert!("perturbed:Q:0.1".parse::<FamilySpec>().is_err());
        assert!("halfspace:+1,0".parse::<FamilySpec>().is_err());
        assert!("sphere:1".parse::<FamilySpec>().is_err());
        assert!("perturbed:A:abc".parse::<FamilySpec>().is_err());
    }
}
