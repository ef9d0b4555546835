//! Kernel values against constants from a 40-digit lattice sum (mpmath).

// Constants are kept at the oracle's full printed precision.
#![allow(clippy::excessive_precision, clippy::approx_constant)]

use periso_core::theta_kernel::*;

// p_1(x) - 1 at selected points.
const DEVIATIONS: [(f64, f64); 5] = [
    (0.0, 5.3505759821484793625e-9),
    (0.125, 3.7834285602310614096e-9),
    (0.25, -1.0245004943379819127e-34),
    (0.3, -1.6534189081783054362e-9),
    (0.5, -5.3505759821484793625e-9),
];

const PERIMETERS: [(usize, f64); 3] = [
    (1, 1.0000000053505759821),
    (2, 1.414213562373095069),
    (3, 1.7320508075688772935),
];

#[test]
fn deviation_matches_high_precision_sum() {
    let kernel = ThetaKernel::default();
    for (x, want) in DEVIATIONS {
        let got = kernel.p1_deviation(x);
        assert!(
            (got - want).abs() <= 1e-22 + 1e-12 * want.abs(),
            "x={x}: {got:e} vs {want:e}"
        );
    }
}

#[test]
fn quarter_point_deviation_is_fourth_order_tiny() {
    let d = ThetaKernel::default().p1_deviation(0.25);
    assert!(d < 0.0 && d.abs() < 1e-33, "{d:e}");
}

#[test]
fn perimeters_match_high_precision_sum() {
    for (n, want) in PERIMETERS {
        assert!(
            (half_space_perimeter_exact(n) - want).abs() < 4e-16,
            "n={n}"
        );
        assert!(
            (half_space_perimeter_poisson(n) - want).abs() < 4e-16,
            "n={n}"
        );
    }
}

#[test]
fn lattice_and_series_agree_off_grid() {
    let kernel = ThetaKernel::default();
    for j in 0..997 {
        let x = -3.0 + 7.0 * j as f64 / 997.0;
        assert!(
            (p1_lattice_sum(x, LATTICE_RADIUS) - kernel.p1(x)).abs() < 1e-14,
            "x={x}"
        );
    }
}

#[test]
fn sup_bound_holds_on_both_grid_sizes() {
    let kernel = ThetaKernel::default();
    for grid in [1_000, 100_000] {
        let check = sup_deviation_check(&kernel, grid);
        assert!(check.bound_satisfied);
        assert!((check.max_deviation - 5.3505759821484793625e-9).abs() < 1e-13);
    }
}

#[test]
fn truncated_kernel_is_caught_by_two_form_comparison() {
    let k0 = ThetaKernel::new(0);
    assert!(poisson_consistency(&k0, 1000) > 5e-9);
    assert!(poisson_consistency(&ThetaKernel::default(), 1000) < 1e-14);
}

#[test]
fn pn_is_product_of_factors_and_integrates_to_one() {
    let kernel = ThetaKernel::default();
    let x = [0.1, 0.7, 0.35];
    let product: f64 = x.iter().map(|&xi| kernel.p1(xi)).product();
    assert_eq!(kernel.pn(&x), product);
    assert!((integrate_p1(&kernel, 2000) - 1.0).abs() < 1e-12);
}
