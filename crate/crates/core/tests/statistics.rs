//! Seeded statistical examples: null runs pass, alternatives are rejected.

use branchstab::battery;
use branchstab::cb::{thinning_identity_check_against, FellerParams};
use branchstab::discrete_ops::StableParams;
use branchstab::processes::{IntensityMeasure, Window};
use branchstab::rng::{replicate, SimRng, Streams};
use branchstab::semigroups::BranchingSemigroup;
use branchstab::stable_pp::SpectralMeasureM1;
use branchstab::stattest::{pp_equality_test, two_sample_counts, two_sample_reals, CellPartition};
use rand_distr::{Distribution, Exp, Poisson};

const N: usize = 100_000;

fn poisson_counts(s: &Streams, label: &str, mean: f64, n: usize) -> Vec<u64> {
    let d = Poisson::new(mean).unwrap();
    replicate(s, label, n, |r| d.sample(r) as u64)
}

#[test]
fn counts_null_passes_and_shift_is_rejected() {
    let s = Streams::new(101);
    let a = poisson_counts(&s, "a", 2.0, N);
    assert!(two_sample_counts(&a, &poisson_counts(&s, "b", 2.0, N)).unwrap().passed());
    assert!(two_sample_counts(&a, &poisson_counts(&s, "c", 2.2, N)).unwrap().p_value < 1e-3);
}

#[test]
fn reals_null_passes_and_rate_change_is_rejected() {
    let s = Streams::new(102);
    let e1 = Exp::new(1.0).unwrap();
    let e2 = Exp::new(1.3).unwrap();
    let a = replicate(&s, "a", 20_000, |r| e1.sample(r));
    assert!(two_sample_reals(&a, &replicate(&s, "b", 20_000, |r| e1.sample(r))).unwrap().passed());
    assert!(!two_sample_reals(&a, &replicate(&s, "c", 20_000, |r| e2.sample(r))).unwrap().passed());
}

#[test]
fn poisson_process_is_thinning_stable_with_exponent_one() {
    let w = Window::unit_torus(2);
    let part = CellPartition::default_for(&w).unwrap();
    let mu = IntensityMeasure::uniform(&w, 4.0).unwrap();
    let s = Streams::new(103);
    let direct = |r: &mut SimRng| Ok(mu.poisson(r));
    let split = |r: &mut SimRng| {
        let mut x = mu.poisson(r).thin(0.5, r)?;
        x.superpose(mu.poisson(r).thin(0.5, r)?);
        Ok(x)
    };
    assert!(pp_equality_test(direct, split, &part, 20_000, &s).unwrap().passed());
    let more = IntensityMeasure::uniform(&w, 4.4).unwrap();
    let r = pp_equality_test(direct, |r: &mut SimRng| Ok(more.poisson(r)), &part, 20_000, &s).unwrap();
    assert!(!r.passed(), "{r:?}");
}

#[test]
fn discrete_stable_process_rejects_wrong_exponent() {
    let w = Window::unit_torus(2);
    let part = CellPartition::default_for(&w).unwrap();
    let sigma = SpectralMeasureM1::uniform(&w, 1.0).unwrap();
    let s = Streams::new(104);
    assert!(battery::das_pp_stability_test(0.6, &sigma, 0.5, 0.6, &part, 20_000, &s).unwrap().passed());
    assert!(battery::das_pp_stability_test(0.6, &sigma, 0.5, 0.9, &part, 20_000, &s).unwrap().p_value < 1e-3);
}

#[test]
fn integer_battery_and_pgf_band() {
    let sg = BranchingSemigroup::linear_birth_death(0.5).unwrap();
    let y = sg.yaglom().unwrap();
    let sp = StableParams::new(0.7, 1.5).unwrap();
    let s = Streams::new(105);
    assert!(battery::rv_pgf_band(&sg, &y, &sp, N, &s).unwrap().passed());
    assert!(battery::rv_stability_test(&sg, &y, &sp, 0.3, 0.7, N, &s).unwrap().passed());
    assert!(battery::rv_stability_test(&sg, &y, &sp, 0.3, 0.95, N, &s).unwrap().p_value < 1e-3);
}

#[test]
fn cb_thinning_identity_rejects_mismatched_parameter() {
    let p = FellerParams::new(2.0).unwrap();
    let s = Streams::new(106);
    assert!(thinning_identity_check_against(&p, 0.5, 0.5, N, &s).unwrap().passed());
    assert!(thinning_identity_check_against(&p, 0.5, 0.65, N, &s).unwrap().p_value < 1e-3);
}

#[test]
fn vstable_laplace_band_passes() {
    let p = FellerParams::new(1.0).unwrap();
    let sp = StableParams::new(0.5, 1.0).unwrap();
    assert!(battery::vstable_laplace_band(&p, &sp, N, &Streams::new(107)).unwrap().passed());
}

#[test]
fn dt_process_total_count_band() {
    let w = Window::unit_torus(2);
    assert!(battery::dt_pp_count_band(0.5, 1.0, &w, N, &Streams::new(108)).unwrap().passed());
}
