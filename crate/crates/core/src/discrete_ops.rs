//! Thinning and branching of counts; Sibuya, discrete-stable and F-stable
//! integer samplers and their p.g.f.s.

use crate::error::{check_unit_closed, check_unit_open_left, invalid, Result};
use crate::laws::{binomial, poisson};
use crate::processes::Count;
use crate::semigroups::{BranchingSemigroup, SemigroupKind, YaglomLaw};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

/// Exponent and scale of a strictly stable law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub c: f64,
}

impl StableParams {
    pub fn new(alpha: f64, c: f64) -> Result<Self> {
        let p = Self { alpha, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid(format!("alpha must lie in (0,1], got {}", self.alpha)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("scale must be positive, got {}", self.c)));
        }
        Ok(())
    }
}

/// Sibuya draws are capped here; the tail beyond has probability of order
/// `2^{-60 alpha}`.
pub const SIBUYA_CAP: u64 = 1 << 60;

/// Binomial thinning `t o x`.
pub fn thin<R: Rng + ?Sized>(x: Count, t: f64, rng: &mut R) -> Result<Count> {
    check_unit_closed("thinning parameter", t)?;
    Ok(binomial(x, t, rng))
}

/// Branching operation `t o_F x`: `x` independent copies of `Y_{-ln t}`.
pub fn branch_count<R: Rng + ?Sized>(sg: &BranchingSemigroup, t: f64, x: Count, rng: &mut R) -> Result<Count> {
    check_unit_open_left("branching parameter", t)?;
    if t == 1.0 || x == 0 {
        return Ok(x);
    }
    let s = -t.ln();
    match sg.kind() {
        SemigroupKind::General(law) => Ok(law.simulate(x, s, rng)),
        _ => Ok(sg.unit_law(s)?.sample_sum(x, rng)),
    }
}

/// Sibuya(alpha): geometric on `{1, 2, ...}` with a Beta(alpha, 1-alpha)
/// success probability.
pub fn sibuya_sample<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<Count> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha must lie in (0,1], got {alpha}")));
    }
    if alpha == 1.0 {
        return Ok(1);
    }
    let p: f64 = Beta::new(alpha, 1.0 - alpha).expect("valid beta").sample(rng);
    Ok(shifted_geometric(p, rng))
}

fn shifted_geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let denom = (-p).ln_1p();
    if denom == 0.0 {
        return SIBUYA_CAP;
    }
    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let k = (u.ln() / denom).floor();
    if k >= SIBUYA_CAP as f64 {
        SIBUYA_CAP
    } else {
        1 + k as u64
    }
}

/// `P(K = k)` for Sibuya(alpha), `k = 0..len`.
pub fn sibuya_pmf(alpha: f64, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    if len > 1 {
        v[1] = alpha;
        for k in 1..len - 1 {
            v[k + 1] = v[k] * (k as f64 - alpha) / (k as f64 + 1.0);
        }
    }
    v
}

/// Discrete stable: `Poisson(c)` many Sibuya(alpha) summands.
pub fn das_rv_sample<R: Rng + ?Sized>(p: &StableParams, rng: &mut R) -> Result<Count> {
    p.validate()?;
    let n = poisson(p.c, rng);
    let mut acc = 0u64;
    for _ in 0..n {
        acc = acc.saturating_add(sibuya_sample(p.alpha, rng)?);
    }
    Ok(acc)
}

/// F-stable: a discrete-stable number of independent Yaglom draws, summed.
pub fn fstable_rv_sample<R: Rng + ?Sized>(yaglom: &YaglomLaw, p: &StableParams, rng: &mut R) -> Result<Count> {
    let d = das_rv_sample(p, rng)?;
    Ok(yaglom.unit_law().sample_sum(d, rng))
}

/// `exp(-c A(z)^alpha)`.
pub fn pgf_closed(sg: &BranchingSemigroup, p: &StableParams, z: f64) -> Result<f64> {
    p.validate()?;
    Ok((-p.c * sg.a(z)?.powf(p.alpha)).exp())
}
