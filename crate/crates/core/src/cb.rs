//! Feller branching diffusion with drift `-1`, the `⊙_V` operation, its
//! Yaglom law, V-stable variables and the Cox coupling with birth–death
//! F-stability.
//!
//! `V_t(z) = z e^{-t} / (1 + c_t z)` with `c_t = (b/2)(1 - e^{-t})` is the
//! Laplace exponent of a compound Poisson law with exponential jumps, which
//! gives an exact transition sampler.

use crate::discrete_ops::{branch_count, das_rv_sample, StableParams};
use crate::error::{check_unit_open_left, invalid, Error, Result};
use crate::laws::poisson;
use crate::numeric::Estimate;
use crate::rng::{replicate, try_replicate, SimRng, Streams};
use crate::semigroups::{BranchingSemigroup, SemigroupKind};
use crate::stattest::{transform_band_test, two_sample_counts, two_sample_reals, TestReport};
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};

/// Tolerance of the discrete/continuous generating-function identity.
pub const COUPLING_TOL: f64 = 1e-12;

/// Diffusion coefficient `b`; the drift is fixed at `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FellerParams {
    pub b: f64,
}

impl FellerParams {
    pub fn new(b: f64) -> Result<Self> {
        let p = Self { b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b > 0.0 && self.b.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("diffusion coefficient must be positive, got {}", self.b)))
        }
    }

    fn c(&self, t: f64) -> f64 {
        0.5 * self.b * -(-t).exp_m1()
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// `V_t(z)`.
pub fn v_transform(p: &FellerParams, t: f64, z: f64) -> Result<f64> {
    p.validate()?;
    check_nonneg("time", t)?;
    check_nonneg("argument", z)?;
    if t == 0.0 {
        return Ok(z);
    }
    Ok(z * (-t).exp() / (1.0 + p.c(t) * z))
}

fn gamma_sum<R: Rng + ?Sized>(n: u64, scale: f64, rng: &mut R) -> f64 {
    if n == 0 {
        0.0
    } else {
        Gamma::new(n as f64, scale).expect("valid gamma").sample(rng)
    }
}

/// `Z_t` started from `x`: `Poisson(x e^{-t} / c_t)` exponential jumps of mean `c_t`.
pub fn feller_transition_sample<R: Rng + ?Sized>(p: &FellerParams, x: f64, t: f64, rng: &mut R) -> Result<f64> {
    p.validate()?;
    check_nonneg("starting state", x)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be positive, got {t}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let c = p.c(t);
    let n = poisson(x * (-t).exp() / c, rng);
    Ok(gamma_sum(n, c, rng))
}

/// Zero-truncated Poisson draw.
fn positive_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda > 1.0 {
        loop {
            let n = poisson(lambda, rng);
            if n > 0 {
                return n;
            }
        }
    }
    // inversion: P(N = k | N > 0) = e^{-l} l^k / (k! (1 - e^{-l}))
    let u: f64 = rng.random();
    let mut k = 1u64;
    let mut pk = lambda * (-lambda).exp() / -(-lambda).exp_m1();
    let mut acc = pk;
    while u > acc && pk > 0.0 {
        k += 1;
        pk *= lambda / k as f64;
        acc += pk;
    }
    k
}

/// `Z_t` started from `x`, conditioned on `Z_t > 0`.
pub fn feller_conditioned_sample<R: Rng + ?Sized>(p: &FellerParams, x: f64, t: f64, rng: &mut R) -> Result<f64> {
    p.validate()?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(invalid(format!("conditioning needs a positive start, got {x}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be positive, got {t}")));
    }
    let c = p.c(t);
    let n = positive_poisson(x * (-t).exp() / c, rng);
    Ok(gamma_sum(n, c, rng))
}

/// `t ⊙_V xi`: the process run for time `-ln t` from `xi`.
pub fn cb_mult<R: Rng + ?Sized>(p: &FellerParams, t: f64, xi: f64, rng: &mut R) -> Result<f64> {
    check_unit_open_left("multiplication parameter", t)?;
    if t == 1.0 {
        check_nonneg("starting state", xi)?;
        return Ok(xi);
    }
    feller_transition_sample(p, xi, -t.ln(), rng)
}

/// Exponential with mean `b/2`.
pub fn yaglom_cb_sample<R: Rng + ?Sized>(p: &FellerParams, rng: &mut R) -> f64 {
    Exp::new(2.0 / p.b).expect("valid rate").sample(rng)
}

/// Laplace transform of the Yaglom law, `1 / (1 + b z / 2)`.
pub fn yaglom_cb_laplace(p: &FellerParams, z: f64) -> f64 {
    1.0 / (1.0 + 0.5 * p.b * z)
}

/// Compares `t ⊙_V Z` with `Bernoulli(t_thin) * Z'` for Yaglom `Z, Z'`.
pub fn thinning_identity_check_against(
    p: &FellerParams,
    t: f64,
    t_thin: f64,
    n: usize,
    streams: &Streams,
) -> Result<TestReport> {
    p.validate()?;
    check_unit_open_left("multiplication parameter", t)?;
    check_unit_open_left("thinning parameter", t_thin)?;
    let a = try_replicate(streams, "cb-thinning-a", n, |rng| {
        let z = yaglom_cb_sample(p, rng);
        cb_mult(p, t, z, rng)
    })?;
    let b = replicate(streams, "cb-thinning-b", n, |rng| {
        if rng.random::<f64>() < t_thin {
            yaglom_cb_sample(p, rng)
        } else {
            0.0
        }
    });
    Ok(two_sample_reals(&a, &b)?.with_name(format!("cb thinning identity t={t}")).with_seed(streams.seed()))
}

/// [`thinning_identity_check_against`] with matching parameters.
pub fn thinning_identity_check(p: &FellerParams, t: f64, n: usize, streams: &Streams) -> Result<TestReport> {
    thinning_identity_check_against(p, t, t, n, streams)
}

/// Sum of a discrete-stable number of Yaglom draws.
pub fn vstable_sample<R: Rng + ?Sized>(p: &FellerParams, sp: &StableParams, rng: &mut R) -> Result<f64> {
    p.validate()?;
    let x = das_rv_sample(sp, rng)?;
    Ok(gamma_sum(x, 0.5 * p.b, rng))
}

/// `E exp(-z xi) = exp{-c (1 - L(z))^alpha}`.
pub fn vstable_laplace_closed(p: &FellerParams, sp: &StableParams, z: f64) -> f64 {
    let l = yaglom_cb_laplace(p, z);
    (-sp.c * (1.0 - l).powf(sp.alpha)).exp()
}

fn coupled_lambda(sg: &BranchingSemigroup, p: &FellerParams) -> Result<f64> {
    let SemigroupKind::LinearBirthDeath { lambda } = *sg.kind() else {
        return Err(invalid("the Cox coupling needs a linear birth–death semigroup"));
    };
    if (p.b - 2.0 * lambda).abs() > COUPLING_TOL * p.b.max(1.0) {
        return Err(invalid(format!("coupling requires b = 2 lambda, got b = {} and lambda = {lambda}", p.b)));
    }
    Ok(lambda)
}

/// Largest `|F_s(z) - (1 - V_s(1 - z))|` over the grid.
pub fn coupling_gap(sg: &BranchingSemigroup, p: &FellerParams, s_grid: &[f64], z_grid: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &s in s_grid {
        for &z in z_grid {
            let gap = (sg.f(s, z)? - (1.0 - v_transform(p, s, 1.0 - z)?)).abs();
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}

/// Evaluation points for the generating-function band check.
pub const COUPLING_Z: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 0.9];

/// Checks the Cox coupling `X = Poisson(xi)` with `xi` V-stable:
/// the generating-function identity on a grid, the F-stability identity at
/// `t`, and the p.g.f. of `X` against `exp{-c kappa A(z)^alpha}` with
/// `kappa = (lambda / (1 + lambda))^alpha`.
pub fn cox_coupling_check(
    sg: &BranchingSemigroup,
    p: &FellerParams,
    sp: &StableParams,
    t: f64,
    n: usize,
    streams: &Streams,
) -> Result<Vec<TestReport>> {
    let lambda = coupled_lambda(sg, p)?;
    sp.validate()?;
    check_unit_open_left("stability parameter", t)?;
    let grid: Vec<f64> = (0..10).map(|i| 0.1 + 0.5 * i as f64).collect();
    let zs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let gap = coupling_gap(sg, p, &grid, &zs)?;
    let identity = TestReport::deterministic(
        "cox coupling generating-function identity",
        gap,
        COUPLING_TOL,
        (grid.len() * zs.len()) as u64,
        format!("lambda={lambda} b={}", p.b),
    );

    let cox = |rng: &mut SimRng| -> Result<u64> { Ok(poisson(vstable_sample(p, sp, rng)?, rng)) };
    let lhs = try_replicate(streams, "cox-coupling-x", n, |rng| cox(rng))?;
    let (t1, t2) = (t.powf(1.0 / sp.alpha), (1.0 - t).powf(1.0 / sp.alpha));
    let rhs = try_replicate(streams, "cox-coupling-sum", n, |rng| {
        let a = branch_count(sg, t1, cox(rng)?, rng)?;
        let b = if t2 > 0.0 { branch_count(sg, t2, cox(rng)?, rng)? } else { 0 };
        Ok::<_, Error>(a.saturating_add(b))
    })?;
    let stability = two_sample_counts(&lhs, &rhs)?.with_name(format!("cox coupling F-stability t={t}"));

    let kappa = (lambda / (1.0 + lambda)).powf(sp.alpha);
    let mut est = Vec::with_capacity(COUPLING_Z.len());
    let mut target = Vec::with_capacity(COUPLING_Z.len());
    for &z in &COUPLING_Z {
        let vals: Vec<f64> = lhs.iter().map(|&x| if x == 0 { 1.0 } else { z.powf(x as f64) }).collect();
        est.push(Estimate::from_samples(&vals));
        target.push((-sp.c * kappa * sg.a(z)?.powf(sp.alpha)).exp());
    }
    let band = transform_band_test(&est, &target)?.with_name("cox coupling p.g.f.");
    Ok([identity, stability, band].into_iter().map(|r| r.with_seed(streams.seed())).collect())
}
