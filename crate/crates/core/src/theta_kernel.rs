//! Periodized Gaussian density on the unit torus.
//!
//! `p_1(x) = Σ_{z∈Z} γ_1(x + z)` is evaluated through its cosine series
//! `1 + Σ_{k≥1} 2 e^{-2π²k²} cos(2πkx)`, and `p_n` is the product of the
//! one-dimensional factors. The series converges so fast that the default
//! four retained terms leave a tail below 1e-200, and everything runs in
//! plain `f64`: the constants under test (5.4e-9, 6e-9) sit about seven
//! orders of magnitude above machine epsilon, so no extended precision is
//! needed.
//!
//! The lattice-sum form is kept alongside as an independent second route.

use std::f64::consts::PI;

use crate::numerics::{cos_2pi, pairwise_sum, simpson, sin_2pi};

/// Sup-norm bound on `|1 - p_1|`.
pub const P1_DEVIATION_BOUND: f64 = 54e-10;

/// Slack constant in the periodic isoperimetric inequality.
pub const ISOPERIMETRIC_SLACK: f64 = 6e-9;

/// Default number of cosine terms.
pub const DEFAULT_ORDER: usize = 4;

/// Radius of the direct lattice sum used as the second route.
pub const LATTICE_RADIUS: i64 = 10;

/// Standard Gaussian density in `n` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaussianDensity {
    pub dimension: usize,
}

impl GaussianDensity {
    pub fn new(dimension: usize) -> Self {
        Self { dimension }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        let sq: f64 = x.iter().map(|v| v * v).sum();
        (-0.5 * sq).exp() / (2.0 * PI).powf(self.dimension as f64 / 2.0)
    }
}

/// One-dimensional standard Gaussian density.
pub fn gamma1(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Truncated cosine-series evaluator for `p_1` and `p_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaKernel {
    truncation_order: usize,
    truncation_error: f64,
    /// `2 e^{-2π²k²}` for `k = 1..=K`.
    coefficients: Vec<f64>,
}

impl Default for ThetaKernel {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER)
    }
}

impl ThetaKernel {
    /// Kernel retaining `order` cosine terms. Orders below 2 are accepted so
    /// that degraded kernels can be certified (and fail) deliberately.
    pub fn new(order: usize) -> Self {
        let coefficients = (1..=order).map(|k| series_term(k as f64)).collect();
        Self {
            truncation_order: order,
            truncation_error: tail_bound(order),
            coefficients,
        }
    }

    pub fn truncation_order(&self) -> usize {
        self.truncation_order
    }

    /// Certified bound on the discarded tail, `2 Σ_{k>K} e^{-2π²k²}`.
    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    /// `p_1(x) - 1`, computed without forming `1 + small`.
    pub fn p1_deviation(&self, x: f64) -> f64 {
        // Smallest terms first.
        self.coefficients
            .iter()
            .enumerate()
            .rev()
            .map(|(i, c)| c * cos_2pi((i as f64 + 1.0) * x))
            .sum()
    }

    pub fn p1(&self, x: f64) -> f64 {
        1.0 + self.p1_deviation(x)
    }

    /// `d p_1 / dx` from the differentiated series.
    pub fn p1_derivative(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .rev()
            .map(|(i, c)| {
                let k = i as f64 + 1.0;
                -2.0 * PI * k * c * sin_2pi(k * x)
            })
            .sum()
    }

    /// `p_n(x) = Π p_1(x_i)`.
    pub fn pn(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| self.p1(xi)).product()
    }

    /// `Σ_i ∂p_n/∂x_i`.
    pub fn pn_gradient_sum(&self, x: &[f64]) -> f64 {
        let factors: Vec<f64> = x.iter().map(|&xi| self.p1(xi)).collect();
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let others: f64 = factors
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v)
                    .product();
                self.p1_derivative(xi) * others
            })
            .sum()
    }
}

fn series_term(k: f64) -> f64 {
    2.0 * (-2.0 * PI * PI * k * k).exp()
}

/// Geometric majorant of `2 Σ_{k>K} e^{-2π²k²}`: consecutive terms shrink by
/// at least `e^{-2π²(2K+3)}`.
fn tail_bound(order: usize) -> f64 {
    let first = (order + 1) as f64;
    let ratio = (-2.0 * PI * PI * (2.0 * first + 1.0)).exp();
    series_term(first) / (1.0 - ratio)
}

/// `p_1(x)` as the direct lattice sum `Σ_{|z|≤radius} γ_1(x + z)`.
pub fn p1_lattice_sum(x: f64, radius: i64) -> f64 {
    let r = x - x.floor();
    let mut terms: Vec<f64> = (-radius..=radius).map(|z| gamma1(r + z as f64)).collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Outcome of the sup-norm scan of `|1 - p_1|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationCheck {
    pub max_deviation: f64,
    pub argmax: f64,
    pub bound_satisfied: bool,
}

/// Maximum of `|1 - p_1|` over the grid `j / grid_points`, `j = 0..=grid_points`.
pub fn sup_deviation_check(kernel: &ThetaKernel, grid_points: usize) -> DeviationCheck {
    let grid_points = grid_points.max(1);
    let (argmax, max_deviation) = (0..=grid_points)
        .map(|j| {
            let x = j as f64 / grid_points as f64;
            (x, kernel.p1_deviation(x).abs())
        })
        .fold((0.0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    DeviationCheck {
        max_deviation,
        argmax,
        bound_satisfied: max_deviation <= P1_DEVIATION_BOUND,
    }
}

/// Largest gap between the lattice-sum and cosine-series forms of `p_1` on
/// `points` equally spaced points of `[0, 1)`.
pub fn poisson_consistency(kernel: &ThetaKernel, points: usize) -> f64 {
    (0..points)
        .map(|j| {
            let x = j as f64 / points as f64;
            (p1_lattice_sum(x, LATTICE_RADIUS) - kernel.p1(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// `∫_0^1 p_1` by composite Simpson with `panels` panels.
pub fn integrate_p1(kernel: &ThetaKernel, panels: usize) -> f64 {
    simpson(|x| kernel.p1(x), 0.0, 1.0, panels)
}

/// Gaussian surface area of the periodized half space in dimension `n`:
/// `Σ_{k∈Z} γ_1(k/√n)`, summed until the terms drop below 1e-30.
pub fn half_space_perimeter_exact(n: usize) -> f64 {
    let scale = (n as f64).sqrt();
    let mut terms = vec![gamma1(0.0)];
    for k in 1.. {
        let t = gamma1(k as f64 / scale);
        if t < 1e-30 {
            break;
        }
        terms.push(2.0 * t);
    }
    terms.reverse();
    pairwise_sum(&terms)
}

/// The same perimeter from the dual side of Poisson summation:
/// `√n Σ_{z∈√n·Z} e^{-2π²z²}`.
pub fn half_space_perimeter_poisson(n: usize) -> f64 {
    let scale = (n as f64).sqrt();
    let mut terms = vec![1.0];
    for k in 1.. {
        let z = k as f64 * scale;
        let t = (-2.0 * PI * PI * z * z).exp();
        if t < 1e-30 {
            break;
        }
        terms.push(2.0 * t);
    }
    terms.reverse();
    scale * terms.iter().sum::<f64>()
}
