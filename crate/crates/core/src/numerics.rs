//! Small numerical helpers shared by the quadrature and sampling code.

use std::f64::consts::{PI, SQRT_2};

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on thread scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `cos(2πt)` with the argument reduced to a quarter period first, so the
/// result is exact at multiples of 1/4 and symmetric under `t -> -t`.
pub fn cos_2pi(t: f64) -> f64 {
    let r = (t - t.round()).abs(); // r in [0, 1/2]
    if r <= 0.125 {
        (2.0 * PI * r).cos()
    } else if r <= 0.375 {
        (2.0 * PI * (0.25 - r)).sin()
    } else {
        -(2.0 * PI * (0.5 - r)).cos()
    }
}

/// `sin(2πt)` with the same quarter-period reduction as [`cos_2pi`].
pub fn sin_2pi(t: f64) -> f64 {
    let u = t - t.round(); // u in [-1/2, 1/2]
    let (sign, r) = if u < 0.0 { (-1.0, -u) } else { (1.0, u) };
    let v = if r <= 0.125 {
        (2.0 * PI * r).sin()
    } else if r <= 0.375 {
        (2.0 * PI * (0.25 - r)).cos()
    } else {
        (2.0 * PI * (0.5 - r)).sin()
    };
    sign * v
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    let nf = order as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence.
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if order == 1 { z } else { p1 };
            let pm1 = if order == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[order - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Simpson rule with `panels` panels (rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(2).next_multiple_of(2);
    let h = (b - a) / panels as f64;
    let terms: Vec<f64> = (0..=panels)
        .map(|j| {
            let w = if j == 0 || j == panels {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * f(a + h * j as f64)
        })
        .collect();
    pairwise_sum(&terms) * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        let int = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((int(0) - 2.0).abs() < 1e-14);
        assert!((int(8) - 2.0 / 9.0).abs() < 1e-14);
        assert!(int(7).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_high_order_weights_sum_to_two() {
        let (x, w) = gauss_legendre(400);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn reduced_trig_matches_std() {
        for i in -200..200 {
            let t = i as f64 * 0.0137;
            assert!((cos_2pi(t) - (2.0 * PI * t).cos()).abs() < 1e-13);
            assert!((sin_2pi(t) - (2.0 * PI * t).sin()).abs() < 1e-13);
        }
        assert_eq!(cos_2pi(0.25), 0.0);
        assert_eq!(cos_2pi(0.5), -1.0);
        assert_eq!(sin_2pi(0.5), 0.0);
        assert_eq!(sin_2pi(-0.25), -1.0);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 4);
        assert!((v - 2.0).abs() < 1e-14);
    }
}
