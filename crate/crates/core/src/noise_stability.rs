//! Noise stability of periodized sets.
//!
//! Monte Carlo estimators run in fixed-size batches; batch `b` draws from the
//! ChaCha8 stream `b` of the user seed, so an estimate depends only on
//! `(f, parameter, samples, seed)` and never on the thread count. Hit counts
//! are integers, so pooling is exact.
//!
//! For periodized half spaces membership depends only on `S = Σ ε_i x_i`,
//! and `(S, S')` is bivariate normal with variance `n` and covariance `ρn`,
//! which gives a deterministic quadrature oracle.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, normal_cdf, normal_pdf};
use crate::periodic_sets::PhaseFunction;

/// Samples per RNG stream.
pub const BATCH_SIZE: usize = 1 << 14;

/// Default Gauss–Legendre nodes per unit band for the half-space oracle.
pub const DEFAULT_QUAD_POINTS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `X` Gaussian, second point `ρX + √(1-ρ²)Y`.
    GaussianOu,
    /// `X` uniform on `[-1/2, 1/2]^n`, second point `X + εY`.
    UniformHeat,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GaussianOu => "gaussian_ou",
            Self::UniformHeat => "uniform_heat",
        })
    }
}

/// Monte Carlo estimate of a two-point membership probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
    /// `ρ` for the Gaussian variant, `ε` for the uniform one.
    pub parameter: f64,
    pub variant: Variant,
}

impl StabilityEstimate {
    fn from_hits(hits: u64, samples: usize, seed: u64, parameter: f64, variant: Variant) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            probability: p,
            std_error: binomial_std_error(p, samples),
            samples,
            seed,
            parameter,
            variant,
        }
    }
}

pub fn binomial_std_error(p: f64, samples: usize) -> f64 {
    (p * (1.0 - p) / samples as f64).sqrt()
}

/// Combined standard error of a difference of independent estimates.
pub fn combined_std_error(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// Runs `samples` trials in seeded batches and counts successes.
fn count_hits<T>(samples: usize, seed: u64, trial: T) -> u64
where
    T: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let batches = samples.div_ceil(BATCH_SIZE);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BATCH_SIZE.min(samples - b * BATCH_SIZE);
            (0..count).filter(|_| trial(&mut rng)).count() as u64
        })
        .sum()
}

/// Largest dimension the samplers handle (stack buffers).
pub const MAX_DIMENSION: usize = 8;

fn check_dimension(f: &PhaseFunction) -> Result<()> {
    if f.dimension() == 0 || f.dimension() > MAX_DIMENSION {
        return Err(Error::Parameter(format!(
            "dimension {} outside 1..={MAX_DIMENSION}",
            f.dimension()
        )));
    }
    Ok(())
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 10_000 {
        return Err(Error::Parameter(format!("samples {samples} below 1e4")));
    }
    Ok(())
}

/// Estimates `P(X ∈ Ω, ρX + √(1-ρ²)Y ∈ Ω)` for independent standard
/// Gaussians `X, Y`.
pub fn ou_noise_stability_mc(
    f: &PhaseFunction,
    rho: f64,
    samples: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::Parameter(format!("rho {rho} outside (-1, 1)")));
    }
    check_samples(samples)?;
    check_dimension(f)?;
    let hits = correlated_hits(f, rho, (1.0 - rho * rho).sqrt(), samples, seed);
    Ok(StabilityEstimate::from_hits(
        hits,
        samples,
        seed,
        rho,
        Variant::GaussianOu,
    ))
}

/// Hits of `X ∈ Ω` and `aX + bY ∈ Ω`.
fn correlated_hits(f: &PhaseFunction, a: f64, b: f64, samples: usize, seed: u64) -> u64 {
    let n = f.dimension();
    count_hits(samples, seed, |rng| {
        let mut x = [0.0; 8];
        let mut z = [0.0; 8];
        for k in 0..n {
            let xi: f64 = rng.sample(StandardNormal);
            let yi: f64 = rng.sample(StandardNormal);
            x[k] = xi;
            z[k] = a * xi + b * yi;
        }
        f.contains(&x[..n]) && f.contains(&z[..n])
    })
}

/// Estimates `P(X ∈ Ω, X + εY ∈ Ω)` with `X` uniform on `[-1/2, 1/2]^n` and
/// `Y` standard Gaussian.
pub fn uniform_noise_stability_mc(
    f: &PhaseFunction,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Parameter(format!(
            "epsilon {epsilon} outside (0, 1/2)"
        )));
    }
    check_samples(samples)?;
    check_dimension(f)?;
    let hits = uniform_hits(f, epsilon, samples, seed);
    Ok(StabilityEstimate::from_hits(
        hits,
        samples,
        seed,
        epsilon,
        Variant::UniformHeat,
    ))
}

fn uniform_hits(f: &PhaseFunction, epsilon: f64, samples: usize, seed: u64) -> u64 {
    let n = f.dimension();
    count_hits(samples, seed, |rng| {
        let mut x = [0.0; 8];
        let mut z = [0.0; 8];
        for k in 0..n {
            let u: f64 = rng.random::<f64>() - 0.5;
            let y: f64 = rng.sample(StandardNormal);
            x[k] = u;
            z[k] = u + epsilon * y;
        }
        f.contains(&x[..n]) && f.contains(&z[..n])
    })
}

/// Monte Carlo estimate of `P(f(X) ≠ f((1+ε)X))`, the dilation discrepancy
/// that bounds the second-order terms of the small-noise expansion. Logged
/// for information only.
pub fn dilation_discrepancy_mc(
    f: &PhaseFunction,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    check_samples(samples)?;
    check_dimension(f)?;
    let n = f.dimension();
    let hits = count_hits(samples, seed, |rng| {
        let mut x = [0.0; 8];
        let mut z = [0.0; 8];
        for k in 0..n {
            let xi: f64 = rng.sample(StandardNormal);
            x[k] = xi;
            z[k] = (1.0 + epsilon) * xi;
        }
        f.contains(&x[..n]) != f.contains(&z[..n])
    });
    Ok(StabilityEstimate::from_hits(
        hits,
        samples,
        seed,
        epsilon,
        Variant::GaussianOu,
    ))
}

/// Noise stability of `{sin(π Σ ε_i x_i) ≥ 0}` by quadrature.
///
/// `S ~ N(0, n)` and `S' | S ~ N(ρS, n(1-ρ²))`. The inner probability that
/// `S'` lands in `∪_k [2k, 2k+1]` is a sum of normal CDF differences; the
/// outer integral runs over the same bands with `quad_points`
/// Gauss–Legendre nodes per band, out to 12 standard deviations.
pub fn ou_noise_stability_oracle_halfspace(rho: f64, n: usize, quad_points: usize) -> Result<f64> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::Parameter(format!("rho {rho} outside (-1, 1)")));
    }
    if quad_points < 200 {
        return Err(Error::Parameter(format!(
            "quad_points {quad_points} below 200"
        )));
    }
    if n == 0 {
        return Err(Error::Parameter("dimension must be positive".into()));
    }
    let sd = (n as f64).sqrt();
    let cond_sd = (n as f64 * (1.0 - rho * rho)).sqrt();
    let (nodes, weights) = gauss_legendre(quad_points);
    let reach = 12.0 * sd;
    let k_max = (reach / 2.0).ceil() as i64 + 1;

    let band_prob = |mu: f64| -> f64 {
        let lo = ((mu - 12.0 * cond_sd) / 2.0).floor() as i64 - 1;
        let hi = ((mu + 12.0 * cond_sd) / 2.0).ceil() as i64 + 1;
        (lo..=hi)
            .map(|j| {
                let a = (2 * j) as f64;
                band_mass((a - mu) / cond_sd, (a + 1.0 - mu) / cond_sd)
            })
            .sum()
    };

    let mut bands: Vec<f64> = (-k_max..=k_max)
        .map(|k| {
            let a = (2 * k) as f64;
            let half = 0.5;
            let mid = a + half;
            nodes
                .iter()
                .zip(&weights)
                .map(|(t, w)| {
                    let s = mid + half * t;
                    half * w * normal_pdf(s / sd) / sd * band_prob(rho * s)
                })
                .sum::<f64>()
        })
        .collect();
    bands.sort_by(f64::total_cmp);
    Ok(bands.iter().sum())
}

/// `Φ(b) - Φ(a)` for `a < b`, computed on the tail side that avoids
/// cancellation.
fn band_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// `arccos ρ`, switching to the series `√(2(1-ρ)) (1 + (1-ρ)/12 + 3(1-ρ)²/160)`
/// when `1 - ρ < 1e-4`.
pub fn stable_arccos(rho: f64) -> f64 {
    let d = 1.0 - rho;
    if d < 1e-4 {
        (2.0 * d).sqrt() * (1.0 + d / 12.0 + 3.0 * d * d / 160.0)
    } else {
        rho.acos()
    }
}

/// `(√(2π) / arccos ρ) · (1/2 - stability)`, which tends to the Gaussian
/// surface area as `ρ → 1⁻`.
pub fn normalized_deficit(stability: f64, rho: f64) -> f64 {
    (2.0 * PI).sqrt() / stable_arccos(rho) * (0.5 - stability)
}

/// One row of the `ρ → 1⁻` limit table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow {
    pub rho: f64,
    pub estimate: StabilityEstimate,
    pub normalized_deficit: f64,
    /// Standard error of the normalized deficit.
    pub deficit_std_error: f64,
    pub predicted: f64,
}

pub fn surface_limit_check(
    f: &PhaseFunction,
    mesh_perimeter: f64,
    rho_list: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<LimitRow>> {
    rho_list
        .iter()
        .map(|&rho| {
            if !(rho > 0.9 && rho < 1.0) {
                return Err(Error::Parameter(format!("rho {rho} outside (0.9, 1)")));
            }
            let estimate = ou_noise_stability_mc(f, rho, samples, seed)?;
            let scale = (2.0 * PI).sqrt() / stable_arccos(rho);
            Ok(LimitRow {
                rho,
                estimate,
                normalized_deficit: scale * (0.5 - estimate.probability),
                deficit_std_error: scale * estimate.std_error,
                predicted: mesh_perimeter,
            })
        })
        .collect()
}

/// Whether the deficits move toward the prediction as `ρ` grows: for each
/// consecutive pair (sorted by `ρ`) the later error is no larger than the
/// earlier one plus three combined standard errors.
pub fn limit_is_approached(rows: &[LimitRow]) -> bool {
    if rows.iter().all(|r| r.predicted == 0.0) {
        return true;
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    sorted.windows(2).all(|w| {
        let e0 = (w[0].normalized_deficit - w[0].predicted).abs();
        let e1 = (w[1].normalized_deficit - w[1].predicted).abs();
        e1 <= e0 + 3.0 * combined_std_error(w[0].deficit_std_error, w[1].deficit_std_error)
    })
}

/// One rung of a small-noise expansion ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionRow {
    /// `η` or `ε`.
    pub parameter: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `1/2 - (parameter/√(2π)) · perimeter`.
    pub predicted: f64,
    pub residual: f64,
}

impl ExpansionRow {
    fn new(parameter: f64, estimate: f64, std_error: f64, perimeter: f64) -> Self {
        let predicted = 0.5 - parameter / (2.0 * PI).sqrt() * perimeter;
        Self {
            parameter,
            estimate,
            std_error,
            predicted,
            residual: estimate - predicted,
        }
    }

    /// `|r| / parameter` (infinite at parameter 0).
    pub fn normalized_residual(&self) -> f64 {
        self.residual.abs() / self.parameter
    }
}

/// `P(X ∈ Ω, X√(1-η²) + ηY ∈ Ω)` against `1/2 - (η/√(2π)) · perimeter`.
pub fn expansion_check_gaussian(
    f: &PhaseFunction,
    gaussian_perimeter: f64,
    eta_list: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<ExpansionRow>> {
    check_samples(samples)?;
    check_dimension(f)?;
    eta_list
        .iter()
        .map(|&eta| {
            if !(0.0..0.5).contains(&eta) {
                return Err(Error::Parameter(format!("eta {eta} outside [0, 1/2)")));
            }
            let hits = correlated_hits(f, (1.0 - eta * eta).sqrt(), eta, samples, seed);
            let p = hits as f64 / samples as f64;
            Ok(ExpansionRow::new(
                eta,
                p,
                binomial_std_error(p, samples),
                gaussian_perimeter,
            ))
        })
        .collect()
}

/// Uniform-start analogue: `P(X ∈ Ω, X + εY ∈ Ω)` against
/// `1/2 - (ε/√(2π)) · lebesgue_perimeter`.
pub fn expansion_check_uniform(
    f: &PhaseFunction,
    lebesgue_perimeter: f64,
    eps_list: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<ExpansionRow>> {
    eps_list
        .iter()
        .map(|&eps| {
            let est = uniform_noise_stability_mc(f, eps, samples, seed)?;
            Ok(ExpansionRow::new(
                eps,
                est.probability,
                est.std_error,
                lebesgue_perimeter,
            ))
        })
        .collect()
}

/// For every pair `p₁ > p₂` of consecutive rungs (sorted by decreasing
/// parameter): `|r₂|/p₂ < |r₁|/p₁ + 3·SE/p₂` with `SE` the combined error.
pub fn residuals_decreasing(rows: &[ExpansionRow]) -> bool {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| b.parameter.total_cmp(&a.parameter));
    sorted.windows(2).all(|w| {
        let (r1, r2) = (&w[0], &w[1]);
        let se = combined_std_error(r1.std_error, r2.std_error);
        r2.normalized_residual() < r1.normalized_residual() + 3.0 * se / r2.parameter
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic_sets::{make_half_space, HalfSpaceSpec};

    fn half_space(n: usize) -> PhaseFunction {
        make_half_space(&HalfSpaceSpec::positive(n))
    }

    #[test]
    fn parameter_errors() {
        let f = half_space(2);
        assert!(ou_noise_stability_mc(&f, 1.0, 10_000, 1).is_err());
        assert!(ou_noise_stability_mc(&f, -1.5, 10_000, 1).is_err());
        assert!(ou_noise_stability_mc(&f, 0.5, 100, 1).is_err());
        assert!(uniform_noise_stability_mc(&f, 0.0, 10_000, 1).is_err());
        assert!(uniform_noise_stability_mc(&f, 0.5, 10_000, 1).is_err());
        assert!(ou_noise_stability_oracle_halfspace(0.5, 2, 100).is_err());
        assert!(surface_limit_check(&f, 1.4, &[0.5], 1_000_000, 1).is_err());
    }

    #[test]
    fn std_error_is_binomial() {
        let f = half_space(2);
        let e = ou_noise_stability_mc(&f, 0.3, 20_000, 9).unwrap();
        let expect = (e.probability * (1.0 - e.probability) / 20_000.0).sqrt();
        assert!((e.std_error - expect).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&e.probability));
        assert_eq!(e.variant, Variant::GaussianOu);
    }

    #[test]
    fn estimates_are_deterministic() {
        let f = half_space(3);
        let a = ou_noise_stability_mc(&f, 0.7, 50_000, 42).unwrap();
        let b = ou_noise_stability_mc(&f, 0.7, 50_000, 42).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| ou_noise_stability_mc(&f, 0.7, 50_000, 42).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn oracle_at_zero_and_monotone() {
        for n in [1, 2, 3] {
            let v0 = ou_noise_stability_oracle_halfspace(0.0, n, 400).unwrap();
            assert!((v0 - 0.25).abs() < 1e-8, "n={n}: {v0}");
        }
        let grid: Vec<f64> = (0..10).map(|k| k as f64 / 10.0).chain([0.99]).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&r| ou_noise_stability_oracle_halfspace(r, 2, 400).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
        let near_one = ou_noise_stability_oracle_halfspace(0.999_999, 2, 400).unwrap();
        assert!(near_one < 0.5 && near_one > 0.499);
    }

    #[test]
    fn oracle_converges_under_doubling() {
        for rho in [0.5, 0.9, 0.99, 0.999] {
            let a = ou_noise_stability_oracle_halfspace(rho, 2, 400).unwrap();
            let b = ou_noise_stability_oracle_halfspace(rho, 2, 800).unwrap();
            assert!((a - b).abs() <= 1e-6 * b, "rho={rho}: {a} vs {b}");
        }
    }

    #[test]
    fn stable_arccos_matches_acos() {
        for d in [1e-5, 5e-5, 9.9e-5] {
            let rho: f64 = 1.0 - d;
            let d = 1.0 - rho;
            let exact = (2.0 * d).sqrt() * (1.0 + d / 12.0 + 3.0 * d * d / 160.0);
            assert_eq!(stable_arccos(rho), exact);
            assert!((stable_arccos(rho) - rho.acos()).abs() < 1e-10);
        }
        assert_eq!(stable_arccos(0.5), 0.5f64.acos());
    }

    #[test]
    fn residual_ladder_logic() {
        let row = |p: f64, r: f64| ExpansionRow {
            parameter: p,
            estimate: 0.0,
            std_error: 0.0,
            predicted: 0.0,
            residual: r,
        };
        assert!(residuals_decreasing(&[
            row(0.1, 1e-3),
            row(0.05, 2e-4),
            row(0.025, 4e-5)
        ]));
        assert!(!residuals_decreasing(&[row(0.1, 1e-4), row(0.05, 2e-3)]));
    }

    #[test]
    fn degenerate_perimeter_is_vacuous() {
        let f = half_space(2);
        let rows = surface_limit_check(&f, 0.0, &[0.95, 0.99], 1_000_000, 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(limit_is_approached(&rows));
    }

    #[test]
    fn std_error_scales_with_sample_count() {
        let f = half_space(2);
        let a = uniform_noise_stability_mc(&f, 0.1, 100_000, 5).unwrap();
        let b = uniform_noise_stability_mc(&f, 0.1, 200_000, 5).unwrap();
        let ratio = a.std_error / b.std_error;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2);
    }
}
