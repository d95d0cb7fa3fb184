//! Per-unit multiplicity laws.
//!
//! A [`UnitLaw`] says what a single unit of multiplicity turns into under a
//! location-preserving operation (thinning, branching, Yaglom replacement).
//! Besides single draws it supports exact sums over many units and
//! tabulated convolution powers, which the point-configuration code uses to
//! transform large groups of sites in one multinomial draw.

use crate::error::{invalid, Result};
use crate::numeric::multinomial;
use crate::semigroups::OffspringLaw;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};
use std::sync::Arc;

/// Entries below this are dropped from the tail of tabulated laws.
const TAIL_EPS: f64 = 1e-17;
/// Hard ceiling on tabulated support length.
const MAX_TABLE_LEN: usize = 1 << 16;

/// Probability table on `0..len` with the mass that was cut off.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfTable {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    tail: f64,
}

impl PmfTable {
    /// Builds a table from (unnormalised) weights; `tail` is the mass known
    /// to lie beyond the last entry, reported but not sampled.
    pub fn new(weights: Vec<f64>, tail: f64) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(invalid("pmf table has a negative or non-finite entry"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("pmf table has zero mass"));
        }
        let pmf: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(Self { pmf, cdf, tail })
    }

    pub fn pmf(&self, k: u64) -> f64 {
        usize::try_from(k).ok().and_then(|i| self.pmf.get(i)).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.pmf
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn pgf(&self, z: f64) -> f64 {
        self.pmf.iter().rev().fold(0.0, |acc, p| acc * z + p)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        self.cdf.partition_point(|&c| c <= u).min(self.pmf.len() - 1) as u64
    }

    /// Sum of `m` independent draws: multinomial over the table.
    pub fn sample_sum<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> u64 {
        if m < 16 {
            return (0..m).map(|_| self.sample(rng)).fold(0, u64::saturating_add);
        }
        multinomial(m, &self.pmf, rng)
            .iter()
            .enumerate()
            .fold(0u64, |acc, (k, &n)| acc.saturating_add(n.saturating_mul(k as u64)))
    }
}

fn trim(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    let mut acc = 0.0;
    let mut cut = v.len();
    while cut > 1 {
        acc += v[cut - 1];
        if acc > TAIL_EPS * total {
            break;
        }
        cut -= 1;
    }
    v.truncate(cut.max(1));
    v.truncate(MAX_TABLE_LEN);
    v
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

/// `m`-fold convolution power of a pmf, truncated where the tail is negligible.
pub fn convolution_power(pmf: &[f64], m: u64) -> Vec<f64> {
    let mut result = vec![1.0];
    let mut base = trim(pmf.to_vec());
    let mut e = m;
    while e > 0 {
        if e & 1 == 1 {
            result = convolve(&result, &base);
        }
        e >>= 1;
        if e > 0 {
            base = convolve(&base, &base);
        }
    }
    result
}

/// What one unit of multiplicity becomes.
#[derive(Debug, Clone)]
pub enum UnitLaw {
    /// Stays a single unit.
    One,
    /// Survives with the given probability.
    Bernoulli(f64),
    /// Zero with probability `1 - survive`, else `1 + Geometric(p)` failures.
    ZeroModifiedGeometric { survive: f64, p: f64 },
    /// Branching population at time `s` from one ancestor, with its table.
    Branching { law: OffspringLaw, s: f64, table: Arc<PmfTable> },
    /// Tabulated law.
    Table(Arc<PmfTable>),
}

const GILLESPIE_MAX_UNITS: u64 = 10_000;

impl UnitLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sample_sum(1, rng)
    }

    /// Sum of `m` independent draws.
    pub fn sample_sum<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> u64 {
        if m == 0 {
            return 0;
        }
        match self {
            UnitLaw::One => m,
            UnitLaw::Bernoulli(t) => binomial(m, *t, rng),
            UnitLaw::ZeroModifiedGeometric { survive, p } => {
                let n = binomial(m, *survive, rng);
                n.saturating_add(negative_binomial(n, *p, rng))
            }
            UnitLaw::Branching { law, s, table } => {
                if m <= GILLESPIE_MAX_UNITS {
                    law.simulate(m, *s, rng)
                } else {
                    table.sample_sum(m, rng)
                }
            }
            UnitLaw::Table(table) => table.sample_sum(m, rng),
        }
    }

    /// Probability table of a single draw.
    pub fn pmf(&self) -> Vec<f64> {
        match self {
            UnitLaw::One => vec![0.0, 1.0],
            UnitLaw::Bernoulli(t) => vec![1.0 - t, *t],
            UnitLaw::ZeroModifiedGeometric { survive, p } => {
                let mut v = vec![1.0 - survive];
                let q = 1.0 - p;
                let mut term = survive * p;
                let mut remaining = *survive;
                while remaining > TAIL_EPS && term > 0.0 && v.len() < MAX_TABLE_LEN {
                    v.push(term);
                    remaining -= term;
                    term *= q;
                }
                v
            }
            UnitLaw::Branching { table, .. } | UnitLaw::Table(table) => table.probs().to_vec(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            UnitLaw::One => 1.0,
            UnitLaw::Bernoulli(t) => *t,
            UnitLaw::ZeroModifiedGeometric { survive, p } => survive / p,
            UnitLaw::Branching { table, .. } | UnitLaw::Table(table) => table.mean(),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            UnitLaw::One => true,
            UnitLaw::Bernoulli(t) => *t == 1.0,
            UnitLaw::ZeroModifiedGeometric { survive, p } => *survive == 1.0 && *p == 1.0,
            _ => false,
        }
    }
}

pub(crate) fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial").sample(rng)
    }
}

/// Number of failures before the `n`-th success.
pub(crate) fn negative_binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p >= 1.0 {
        return 0;
    }
    if n < 16 {
        let g = Geometric::new(p).expect("valid p");
        return (0..n).map(|_| g.sample(rng)).fold(0, u64::saturating_add);
    }
    let lambda = Gamma::new(n as f64, (1.0 - p) / p).expect("valid gamma").sample(rng);
    poisson(lambda, rng)
}

pub(crate) fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda >= Poisson::<f64>::MAX_LAMBDA {
        return u64::MAX;
    }
    let v: f64 = Poisson::new(lambda).expect("valid poisson").sample(rng);
    if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn table_sampling_and_pgf() {
        let t = PmfTable::new(vec![0.0, 0.5, 0.25, 0.25], 0.0).unwrap();
        assert_relative_eq!(t.pgf(0.5), 0.5 * 0.5 + 0.25 * 0.25 + 0.25 * 0.125);
        assert_relative_eq!(t.mean(), 1.75);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let mut counts = [0u64; 4];
        for _ in 0..n {
            counts[t.sample(&mut rng) as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        assert!((counts[1] as f64 / n as f64 - 0.5).abs() < 0.005);
        let s = t.sample_sum(1_000_000, &mut rng) as f64;
        assert!((s / 1e6 - 1.75).abs() < 0.005);
    }

    #[test]
    fn convolution_power_of_bernoulli_is_binomial() {
        let p = 0.3;
        let v = convolution_power(&[1.0 - p, p], 5);
        let binom = |k: i32| {
            let c = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0][k as usize];
            c * p.powi(k) * (1.0 - p).powi(5 - k)
        };
        for k in 0..=5 {
            assert_relative_eq!(v[k as usize], binom(k), epsilon = 1e-15);
        }
        assert_eq!(convolution_power(&[0.2, 0.8], 0), vec![1.0]);
    }

    #[test]
    fn zero_modified_geometric_pmf_and_mean() {
        let law = UnitLaw::ZeroModifiedGeometric { survive: 0.4, p: 0.5 };
        let v = law.pmf();
        assert_relative_eq!(v[0], 0.6);
        assert_relative_eq!(v[1], 0.2);
        assert_relative_eq!(v[2], 0.1);
        assert_relative_eq!(v.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(law.mean(), 0.8);
    }

    #[test]
    fn sums_have_right_mean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let law = UnitLaw::ZeroModifiedGeometric { survive: 0.4, p: 0.5 };
        let m = 1_000_000u64;
        let s = law.sample_sum(m, &mut rng) as f64 / m as f64;
        assert!((s - 0.8).abs() < 0.01, "{s}");
        assert_eq!(UnitLaw::One.sample_sum(17, &mut rng), 17);
        assert_eq!(UnitLaw::Bernoulli(0.0).sample_sum(17, &mut rng), 0);
        assert_eq!(UnitLaw::Bernoulli(1.0).sample_sum(17, &mut rng), 17);
    }

    #[test]
    fn poisson_saturates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        assert_eq!(poisson(0.0, &mut rng), 0);
        assert_eq!(poisson(1e30, &mut rng), u64::MAX);
    }
}
