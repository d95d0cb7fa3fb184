//! Stability and transform test batteries shared by the scenario runner and
//! the acceptance suite.
//!
//! Every stability test compares `X` with `t^{1/a} op X' + (1-t)^{1/a} op X''`
//! for independent copies. `a` is the exponent used in the scaling; passing
//! something other than the true exponent gives a negative control.

use crate::cb::{cb_mult, vstable_laplace_closed, vstable_sample, FellerParams};
use crate::diffusion_branch::{dt_stable_pp_sample, levy_radial_sample, thin_diffuse_config};
use crate::discrete_ops::{branch_count, fstable_rv_sample, pgf_closed, StableParams};
use crate::error::{Error, Result};
use crate::numeric::Estimate;
use crate::processes::{cox_sample, empirical_pgfl, Grid, PointConfig, TestFunction, Window};
use crate::rng::{try_replicate, SimRng, Streams};
use crate::semigroups::{BranchingSemigroup, YaglomLaw};
use crate::stable_pp::{branch_op_pp, das_pp_sample, fstable_pp_pgfl_closed, fstable_pp_sample, SpectralMeasureM1};
use crate::stattest::{pp_equality_test, transform_band_test, two_sample_counts, two_sample_reals, CellPartition, TestReport};

/// Evaluation points for generating-function bands.
pub const PGF_Z: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

fn weights(t: f64, scale_alpha: f64) -> (f64, f64) {
    (t.powf(1.0 / scale_alpha), (1.0 - t).powf(1.0 / scale_alpha))
}

fn label(kind: &str, t: f64, scale_alpha: f64) -> String {
    format!("{kind} t={t} a={scale_alpha}")
}

/// Integer F-stability: `X` vs `t^{1/a} o_F X' + (1-t)^{1/a} o_F X''`.
pub fn rv_stability_test(
    sg: &BranchingSemigroup,
    yaglom: &YaglomLaw,
    sp: &StableParams,
    t: f64,
    scale_alpha: f64,
    n: usize,
    streams: &Streams,
) -> Result<TestReport> {
    let name = label("integer F-stability", t, scale_alpha);
    let s = streams.child(&name);
    let (t1, t2) = weights(t, scale_alpha);
    let a = try_replicate(&s, "x", n, |rng| fstable_rv_sample(yaglom, sp, rng))?;
    let b = try_replicate(&s, "sum", n, |rng| {
        let x1 = branch_count(sg, t1, fstable_rv_sample(yaglom, sp, rng)?, rng)?;
        let x2 = branch_count(sg, t2, fstable_rv_sample(yaglom, sp, rng)?, rng)?;
        Ok::<_, Error>(x1.saturating_add(x2))
    })?;
    Ok(two_sample_counts(&a, &b)?.with_name(name).with_seed(streams.seed()))
}

/// Empirical p.g.f. of the F-stable sampler against `exp(-c A(z)^alpha)`.
pub fn rv_pgf_band(
    sg: &BranchingSemigroup,
    yaglom: &YaglomLaw,
    sp: &StableParams,
    n: usize,
    streams: &Streams,
) -> Result<TestReport> {
    let xs = try_replicate(&streams.child("integer pgf"), "x", n, |rng| fstable_rv_sample(yaglom, sp, rng))?;
    let mut est = Vec::new();
    let mut target = Vec::new();
    for &z in &PGF_Z {
        let v: Vec<f64> = xs.iter().map(|&x| z.powf(x as f64)).collect();
        est.push(Estimate::from_samples(&v));
        target.push(pgf_closed(sg, sp, z)?);
    }
    Ok(transform_band_test(&est, &target)?
        .with_name(format!("integer p.g.f. alpha={} c={}", sp.alpha, sp.c))
        .with_seed(streams.seed()))
}

/// Five test functions on a `2 x ... x 2` grid.
pub fn standard_test_functions(window: &Window) -> Result<Vec<TestFunction>> {
    let grid = Grid::new(window, &vec![2; window.dim()])?;
    let k = grid.n_cells();
    let pattern = |f: &dyn Fn(usize) -> f64| TestFunction::new(grid.clone(), (0..k).map(f).collect());
    Ok(vec![
        TestFunction::constant(window, 0.5)?,
        TestFunction::constant(window, 0.9)?,
        pattern(&|i| if i % 2 == 0 { 0.3 } else { 0.95 })?,
        pattern(&|i| 0.2 + 0.7 * i as f64 / (k - 1).max(1) as f64)?,
        pattern(&|i| if i == 0 { 0.1 } else { 1.0 })?,
    ])
}

/// Empirical p.g.fl. of the F-stable process against its closed form.
pub fn fstable_pp_pgfl_band(
    sg: &BranchingSemigroup,
    yaglom: &YaglomLaw,
    alpha: f64,
    sigma: &SpectralMeasureM1,
    n: usize,
    streams: &Streams,
) -> Result<TestReport> {
    let hs = standard_test_functions(sigma.window())?;
    let s = streams.child("point-process pgfl");
    let mut est = Vec::new();
    let mut target = Vec::new();
    for (i, h) in hs.iter().enumerate() {
        let sampler = |rng: &mut SimRng| fstable_pp_sample(yaglom, alpha, sigma, rng);
        est.push(empirical_pgfl(sampler, h, n, &s.child(&format!("h{i}")))?);
        target.push(fstable_pp_pgfl_closed(sg, alpha, sigma, h)?);
    }
    Ok(transform_band_test(&est, &target)?.with_name(format!("point-process p.g.fl. alpha={alpha}")).with_seed(streams.seed()))
}

/// Thinning stability of the discrete-stable process.
pub fn das_pp_stability_test(
    alpha: f64,
    sigma: &SpectralMeasureM1,
    t: f64,
    scale_alpha: f64,
    partition: &CellPartition,
    n: usize,
    streams: &Streams,
) -> Result<TestReport> {
    let name = label("thinning stability", t, scale_alpha);
    let (t1, t2) = weights(t, scale_alpha);
    let a = |rng: &mut SimRng| das_pp_sample(alpha, sigma, rng);
    let b = |rng: &mut SimRng| {
        let mut x = das_pp_sample(alpha, sigma, rng)?.thin(t1, rng)?;
        x.superpose(das_pp_sample(alpha, sigma, rng)?.thin(t2, rng)?);
        Ok(x)
    };
    Ok(pp_equality_test(a, b, partition, n, &streams.child(&name))?.with_name(name).with_seed(streams.seed()))
}

/// Branching stability of the F-stable process.
#[allow(clippy::too_many_arguments)]
pub fn fstable_pp_stability_test(
    sg: &BranchingSemigroup,
    yaglom: &YaglomLaw,
    alpha: f64,
    sigma: &SpectralMeasureM1,
    t: f64,
    scale_alpha: f64,
    partition: &CellPartition,
    n: usize,
    streams: &Streams,
) -> Result<TestReport> {
    let name = label("F-stability", t, scale_alpha);
    let (t1, t2) = weights(t, scale_alpha);
    let a = |rng: &mut SimRng| fstable_pp_sample(yaglom, alpha, sigma, rng);
    let b = |rng: &mut SimRng| {
        let mut x = branch_op_pp(sg, t1, &fstable_pp_sample(yaglom, alpha, sigma, rng)?, rng)?;
        x.superpose(branch_op_pp(sg, t2, &fstable_pp_sample(yaglom, alpha, sigma, rng)?, rng)?);
        Ok(x)
    };
    Ok(pp_equality_test(a, b, partition, n, &streams.child(&name))?.with_name(name).with_seed(streams.seed()))
}

fn dt_scaled_sum<F>(sampler: &F, t1: f64, t2: f64, rng: &mut SimRng) -> Result<PointConfig>
where
    F: Fn(&mut SimRng) -> Result<PointConfig>,
{
    let mut x = thin_diffuse_config(t1, &sampler(rng)?, rng)?;
    x.superpose(thin_diffuse_config(t2, &sampler(rng)?, rng)?);
    Ok(x)
}

/// Thinning-diffusion stability of the Cox process over `S * Lebesgue`.
#[allow(clippy::too_many_arguments)]
pub fn dt_pp_stability_test(
    alpha: f64,
    total_scale: f64,
    window: &Window,
    t: f64,
    scale_alpha: f64,
    partition: &CellPartition,
    n: usize,
    streams: &Streams,
) -> Result<TestReport> {
    let name = label("thinning-diffusion stability", t, scale_alpha);
    let (t1, t2) = weights(t, scale_alpha);
    let a = |rng: &mut SimRng| dt_stable_pp_sample(alpha, total_scale, window, rng);
    let b = |rng: &mut SimRng| dt_scaled_sum(&a, t1, t2, rng);
    Ok(pp_equality_test(a, b, partition, n, &streams.child(&name))?.with_name(name).with_seed(streams.seed()))
}

/// Total-count p.g.f. of the `S * Lebesgue` Cox process against
/// `exp{-((1-z) scale |W|)^alpha}`.
pub fn dt_pp_count_band(alpha: f64, total_scale: f64, window: &Window, n: usize, streams: &Streams) -> Result<TestReport> {
    let counts = try_replicate(&streams.child("cox total count"), "x", n, |rng| {
        Ok::<_, Error>(dt_stable_pp_sample(alpha, total_scale, window, rng)?.total())
    })?;
    let mut est = Vec::new();
    let mut target = Vec::new();
    for &z in &PGF_Z {
        let v: Vec<f64> = counts.iter().map(|&x| z.powf(x as f64)).collect();
        est.push(Estimate::from_samples(&v));
        target.push((-((1.0 - z) * total_scale * window.volume()).powf(alpha)).exp());
    }
    Ok(transform_band_test(&est, &target)?.with_name(format!("Cox total-count p.g.f. alpha={alpha}")).with_seed(streams.seed()))
}

/// Weighted shape `(weight, center)` for the truncated Lévy probe.
pub type LevyShape = (f64, Vec<f64>);

/// Thinning-diffusion stability of the Cox process driven by a truncated
/// Lévy-radial sample. Reported, not asserted.
#[allow(clippy::too_many_arguments)]
pub fn levy_probe_test(
    alpha: f64,
    shapes: &[LevyShape],
    epsilon: f64,
    window: &Window,
    t: f64,
    scale_alpha: f64,
    partition: &CellPartition,
    n: usize,
    streams: &Streams,
) -> Result<TestReport> {
    let name = label("Levy-radial probe", t, scale_alpha);
    let (t1, t2) = weights(t, scale_alpha);
    let a = |rng: &mut SimRng| cox_sample(|r| levy_radial_sample(alpha, shapes, epsilon, window, r), rng);
    let b = |rng: &mut SimRng| dt_scaled_sum(&a, t1, t2, rng);
    Ok(pp_equality_test(a, b, partition, n, &streams.child(&name))?.with_name(name).with_seed(streams.seed()))
}

/// V-stability: `xi` vs `t^{1/a} ⊙_V xi' + (1-t)^{1/a} ⊙_V xi''`.
pub fn vstable_stability_test(
    p: &FellerParams,
    sp: &StableParams,
    t: f64,
    scale_alpha: f64,
    n: usize,
    streams: &Streams,
) -> Result<TestReport> {
    let name = label("V-stability", t, scale_alpha);
    let s = streams.child(&name);
    let (t1, t2) = weights(t, scale_alpha);
    let a = try_replicate(&s, "x", n, |rng| vstable_sample(p, sp, rng))?;
    let b = try_replicate(&s, "sum", n, |rng| {
        let x1 = cb_mult(p, t1, vstable_sample(p, sp, rng)?, rng)?;
        let x2 = if t2 > 0.0 { cb_mult(p, t2, vstable_sample(p, sp, rng)?, rng)? } else { 0.0 };
        Ok::<_, Error>(x1 + x2)
    })?;
    Ok(two_sample_reals(&a, &b)?.with_name(name).with_seed(streams.seed()))
}

/// Laplace transform of the V-stable sampler at five points, plus `P(xi = 0)`.
pub fn vstable_laplace_band(p: &FellerParams, sp: &StableParams, n: usize, streams: &Streams) -> Result<TestReport> {
    let xs = try_replicate(&streams.child("V-stable laplace"), "x", n, |rng| vstable_sample(p, sp, rng))?;
    let mut est = Vec::new();
    let mut target = Vec::new();
    for z in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let v: Vec<f64> = xs.iter().map(|&x| (-z * x).exp()).collect();
        est.push(Estimate::from_samples(&v));
        target.push(vstable_laplace_closed(p, sp, z));
    }
    let zeros: Vec<f64> = xs.iter().map(|&x| if x == 0.0 { 1.0 } else { 0.0 }).collect();
    est.push(Estimate::from_samples(&zeros));
    target.push((-sp.c).exp());
    Ok(transform_band_test(&est, &target)?.with_name(format!("V-stable Laplace transform alpha={}", sp.alpha)).with_seed(streams.seed()))
}
