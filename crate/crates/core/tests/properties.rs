//! Property tests across modules.

use branchstab::cb::{v_transform, vstable_laplace_closed, yaglom_cb_laplace, FellerParams};
use branchstab::diffusion_branch::{measure_op_dt, spectral_decompose, wrapped_interval_prob, GaussComponent, GaussMixMeasure};
use branchstab::discrete_ops::StableParams;
use branchstab::processes::{Grid, IntensityMeasure, TestFunction, Window};
use branchstab::semigroups::BranchingSemigroup;
use branchstab::stable_pp::{fstable_pp_pgfl_closed, fstable_pp_pgfl_sibuya_form, SpectralMeasureM1};
use branchstab::stattest::{two_sample_counts, two_sample_reals, TestReport};
use proptest::prelude::*;

fn semigroup(which: u8, lambda: f64) -> BranchingSemigroup {
    match which % 2 {
        0 => BranchingSemigroup::pure_death(),
        _ => BranchingSemigroup::linear_birth_death(lambda).unwrap(),
    }
}

fn mixture() -> impl Strategy<Value = GaussMixMeasure> {
    (
        prop::collection::vec((0.01f64..5.0, 0.0f64..3.0, 0.0f64..1.0, 0.0f64..1.0), 1..5),
        prop_oneof![Just(0.0), 0.0f64..2.0],
    )
        .prop_map(|(comps, uniform)| {
            let comps = comps
                .into_iter()
                .map(|(mass, variance, x, y)| GaussComponent { mass, variance, center: vec![x, y] })
                .collect();
            GaussMixMeasure::new(&Window::unit_torus(2), comps, uniform).unwrap()
        })
}

proptest! {
    #[test]
    fn v_transform_is_a_semigroup(b in 0.1f64..5.0, s in 0.0f64..4.0, t in 0.0f64..4.0, z in 0.0f64..20.0) {
        let p = FellerParams::new(b).unwrap();
        let lhs = v_transform(&p, s + t, z).unwrap();
        let rhs = v_transform(&p, t, v_transform(&p, s, z).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        prop_assert!(lhs <= z * (-(s + t)).exp() + 1e-15);
    }

    #[test]
    fn yaglom_laplace_is_a_fixed_point(b in 0.1f64..5.0, t in 0.01f64..5.0, z in 0.0f64..20.0) {
        // V-multiplication of the Yaglom law by e^{-t} is a Bernoulli(e^{-t}) thinning.
        let p = FellerParams::new(b).unwrap();
        let lhs = yaglom_cb_laplace(&p, v_transform(&p, t, z).unwrap());
        let q = (-t).exp();
        let rhs = 1.0 - q + q * yaglom_cb_laplace(&p, z);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn vstable_laplace_is_a_probability_transform(b in 0.1f64..5.0, alpha in 0.05f64..1.0, c in 0.1f64..5.0, z in 0.0f64..50.0) {
        let p = FellerParams::new(b).unwrap();
        let sp = StableParams::new(alpha, c).unwrap();
        let l = vstable_laplace_closed(&p, &sp, z);
        prop_assert!(l <= 1.0 && l >= (-c).exp() - 1e-15);
        prop_assert!(vstable_laplace_closed(&p, &sp, z + 1.0) <= l + 1e-15);
    }

    #[test]
    fn dt_measure_op_composes(mu in mixture(), s in 0.05f64..1.0, t in 0.05f64..1.0) {
        let lhs = measure_op_dt(s * t, &mu).unwrap();
        let rhs = measure_op_dt(s, &measure_op_dt(t, &mu).unwrap()).unwrap();
        prop_assert!(lhs.approx_eq(&rhs, 1e-12 * (1.0 + mu.total_mass())));
        prop_assert!((lhs.total_mass() - s * t * mu.total_mass()).abs() < 1e-12 * (1.0 + mu.total_mass()));
    }

    #[test]
    fn radial_shape_round_trip(mu in mixture(), t in 0.05f64..1.0) {
        let d = spectral_decompose(&mu).unwrap();
        prop_assert!(d.radial > 0.0 && d.radial <= 1.0);
        prop_assert!(d.compose().unwrap().approx_eq(&mu, 1e-12 * (1.0 + mu.total_mass())));
        // Radial part is multiplicative under the operation.
        let e = spectral_decompose(&measure_op_dt(t, &mu).unwrap()).unwrap();
        prop_assert!((e.radial - t * d.radial).abs() < 1e-12);
        prop_assert!(e.shape.approx_eq(&d.shape, 1e-10 * (1.0 + d.shape.total_mass())));
    }

    #[test]
    fn wrapped_normal_is_a_probability(m in 0.0f64..1.0, sd in 0.0f64..2.0, cut in 0.0f64..1.0) {
        let left = wrapped_interval_prob(0.0, cut, m, sd, 1.0);
        let right = wrapped_interval_prob(cut, 1.0, m, sd, 1.0);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&left));
        prop_assert!((left + right - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pgfl_forms_agree(which in 0u8..2, lambda in 0.2f64..3.0, alpha in 0.05f64..1.0, vals in prop::collection::vec(0.0f64..1.0, 4)) {
        let w = Window::unit_torus(2);
        let sg = semigroup(which, lambda);
        let sigma = SpectralMeasureM1::new(vec![
            (0.7, IntensityMeasure::uniform(&w, 1.0).unwrap()),
            (1.3, IntensityMeasure::atom(&w, vec![0.2, 0.8], 1.0).unwrap()),
        ]).unwrap();
        let h = TestFunction::new(Grid::new(&w, &[2, 2]).unwrap(), vals).unwrap();
        let a = fstable_pp_pgfl_closed(&sg, alpha, &sigma, &h).unwrap();
        let b = fstable_pp_pgfl_sibuya_form(&sg, alpha, &sigma, &h).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a > 0.0 && a <= 1.0);
    }

    #[test]
    fn verdict_matches_p_value(stat in 0.0f64..10.0, p in 0.0f64..1.0, level in 0.001f64..0.2) {
        let r = TestReport::new("x", stat, p, 10, 10).with_level(level);
        prop_assert_eq!(r.passed(), p > level);
    }

    #[test]
    fn identical_count_lists_pass(xs in prop::collection::vec(0u64..20, 1000..1500)) {
        let r = two_sample_counts(&xs, &xs).unwrap();
        prop_assert_eq!(r.p_value, 1.0);
        prop_assert!(r.passed());
    }

    #[test]
    fn two_sample_reals_is_symmetric_and_deterministic(
        xs in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], 100..200),
        ys in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], 100..200),
    ) {
        let a = two_sample_reals(&xs, &ys).unwrap();
        let b = two_sample_reals(&ys, &xs).unwrap();
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        prop_assert_eq!(a, two_sample_reals(&xs, &ys).unwrap());
    }
}
