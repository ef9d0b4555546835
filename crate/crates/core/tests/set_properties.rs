//! Randomized invariants of the phase-function families.

use periso_core::periodic_sets::{gradient_consistency, FamilySpec};
use periso_core::{make_half_space, make_perturbed, HalfSpaceSpec, PerturbationMode, ThetaKernel};
use proptest::prelude::*;

fn mode() -> impl Strategy<Value = PerturbationMode> {
    prop::sample::select(PerturbationMode::ALL.to_vec())
}

fn signs(n: usize) -> impl Strategy<Value = HalfSpaceSpec> {
    prop::collection::vec(prop::bool::ANY, n).prop_map(|v| {
        HalfSpaceSpec::new(v.into_iter().map(|b| if b { 1 } else { -1 }).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn perturbed_sets_are_periodized(
        base in signs(3),
        mode in mode(),
        t in -1.0f64..=1.0,
        x in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let f = make_perturbed(&base, mode, t).unwrap();
        let fx = f.eval(&x);
        let neg = [-x[0], -x[1], -x[2]];
        prop_assert!((f.eval(&neg) + fx).abs() < 1e-12);
        for i in 0..3 {
            let mut y = x;
            y[i] += 1.0;
            prop_assert!((f.eval(&y) + fx).abs() < 1e-12);
        }
    }

    #[test]
    fn half_space_membership_depends_on_signed_sum(base in signs(2), x in prop::array::uniform2(-3.0f64..3.0)) {
        let f = make_half_space(&base);
        let s: f64 = base.signs().iter().zip(&x).map(|(&e, &xi)| e as f64 * xi).sum();
        prop_assume!((s - s.round()).abs() > 1e-9);
        prop_assert_eq!(f.contains(&x), s.rem_euclid(2.0) < 1.0);
    }

    #[test]
    fn family_strings_round_trip(mode in mode(), t in -1.0f64..=1.0, base in signs(3)) {
        let spec = FamilySpec::Perturbed { mode, t: Some(t), base: Some(base) };
        let parsed: FamilySpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(parsed, spec);
    }

    #[test]
    fn kernel_is_even_periodic_and_close_to_one(x in -10.0f64..10.0) {
        let k = ThetaKernel::default();
        prop_assert!((k.p1(x) - k.p1(-x)).abs() < 1e-15);
        prop_assert!((k.p1(x) - k.p1(x + 1.0)).abs() < 1e-15);
        prop_assert!((k.p1(x) - 1.0).abs() <= 54e-10);
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for mode in PerturbationMode::ALL {
        for t in [0.1, 0.5, 1.0] {
            let f = make_perturbed(&HalfSpaceSpec::new(vec![1, -1, 1]).unwrap(), mode, t).unwrap();
            let err = gradient_consistency(&f, 200, 3, 1e-6);
            assert!(err < 1e-5, "{mode} t={t}: {err:e}");
        }
    }
}
