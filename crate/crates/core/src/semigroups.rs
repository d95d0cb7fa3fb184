//! Subcritical continuous-time Markov branching semigroups on the
//! non-negative integers.
//!
//! A semigroup is described by its one-particle offspring mechanism; time is
//! normalised so that `E[Y_s] = e^{-s}`. Closed forms are used for the pure
//! death and linear birth–death families; everything else is integrated
//! numerically.

use crate::error::{invalid, Error, Result};
use crate::laws::{PmfTable, UnitLaw};
use crate::numeric::{dopri5, integrate, OdeTol};
use crate::stattest::TestReport;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

/// Finite-support offspring distribution with its (normalised) branching rate.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    probs: Vec<(u32, f64)>,
    rate: f64,
    raw_rate: f64,
}

impl OffspringLaw {
    /// Validates the law and rescales the rate to `1 / (1 - mean)`.
    pub fn new(probs: &[(u32, f64)], raw_rate: f64) -> Result<Self> {
        if !(raw_rate > 0.0 && raw_rate.is_finite()) {
            return Err(invalid(format!("branching rate must be positive, got {raw_rate}")));
        }
        if probs.is_empty() {
            return Err(invalid("offspring law is empty"));
        }
        let mut sorted: Vec<(u32, f64)> = Vec::with_capacity(probs.len());
        for &(k, p) in probs {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(invalid(format!("offspring probability p_{k} = {p} is not a probability")));
            }
            if sorted.iter().any(|&(j, _)| j == k) {
                return Err(invalid(format!("offspring value {k} listed twice")));
            }
            sorted.push((k, p));
        }
        sorted.sort_by_key(|&(k, _)| k);
        let total: f64 = sorted.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("offspring probabilities sum to {total}")));
        }
        if let Some(&(_, p1)) = sorted.iter().find(|&&(k, _)| k == 1) {
            if p1 > 0.0 {
                return Err(Error::SingleChildMass { p1 });
            }
        }
        sorted.retain(|&(_, p)| p > 0.0);
        let mean: f64 = sorted.iter().map(|&(k, p)| f64::from(k) * p).sum();
        if mean >= 1.0 {
            return Err(Error::NotSubcritical { mean });
        }
        Ok(Self { probs: sorted, rate: 1.0 / (1.0 - mean), raw_rate })
    }

    pub fn probs(&self) -> &[(u32, f64)] {
        &self.probs
    }

    /// Normalised branching rate.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn raw_rate(&self) -> f64 {
        self.raw_rate
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().map(|&(k, p)| f64::from(k) * p).sum()
    }

    pub fn max_offspring(&self) -> u32 {
        self.probs.last().map_or(0, |&(k, _)| k)
    }

    pub fn pgf(&self, z: f64) -> f64 {
        self.probs.iter().map(|&(k, p)| p * z.powi(k as i32)).sum()
    }

    pub(crate) fn sample_offspring<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(k, p) in &self.probs {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.probs.last().expect("nonempty law").0
    }

    /// Gillespie simulation of the population at time `s` started from `n0`.
    pub fn simulate<R: Rng + ?Sized>(&self, n0: u64, s: f64, rng: &mut R) -> u64 {
        let mut n = n0;
        let mut t = 0.0;
        while n > 0 {
            let e: f64 = rand_distr::Exp1.sample(rng);
            t += e / (self.rate * n as f64);
            if t > s {
                break;
            }
            n = n - 1 + u64::from(self.sample_offspring(rng));
        }
        n
    }

    /// Drift of the complement `w = 1 - F`: `dw/ds = rate * (sum p_k (1-(1-w)^k) - w)`.
    fn complement_drift(&self, w: f64) -> f64 {
        let l = (-w).ln_1p();
        let mut acc = 0.0;
        for &(k, p) in &self.probs {
            if k > 0 {
                acc += p * -(f64::from(k) * l).exp_m1();
            }
        }
        self.rate * (acc - w)
    }

    /// Kolmogorov forward equations on states `1..=k_max` started from one
    /// particle. Mass leaving the range is collected separately.
    /// With `scaled`, probabilities are multiplied by `e^s`.
    fn forward(&self, s_marks: &[f64], k_max: usize, scaled: bool) -> Result<Vec<(Vec<f64>, f64)>> {
        let mut y = vec![0.0; k_max + 1];
        y[0] = 1.0;
        let rate = self.rate;
        let probs = self.probs.clone();
        let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
            for v in dy.iter_mut() {
                *v = 0.0;
            }
            for j in 1..=k_max {
                let pj = y[j - 1];
                if pj == 0.0 {
                    continue;
                }
                let out = rate * j as f64 * pj;
                dy[j - 1] -= out;
                for &(k, p) in &probs {
                    let target = j + k as usize - 1;
                    if target == 0 {
                        continue;
                    }
                    if target <= k_max {
                        dy[target - 1] += out * p;
                    } else {
                        dy[k_max] += out * p;
                    }
                }
            }
            if scaled {
                for (d, v) in dy.iter_mut().zip(y) {
                    *d += v;
                }
            }
        };
        let tol = OdeTol { rtol: 1e-10, atol: 1e-15 };
        let mut out = Vec::with_capacity(s_marks.len());
        let mut t = 0.0;
        for &mark in s_marks {
            dopri5(rhs, t, &mut y, mark, tol)?;
            t = mark;
            let mut states = y[..k_max].to_vec();
            for v in states.iter_mut() {
                *v = v.max(0.0);
            }
            out.push((states, y[k_max].max(0.0)));
        }
        Ok(out)
    }

    /// Law of `Y_s` from one ancestor as a table on `0..=k_max`.
    pub fn transient_pmf(&self, s: f64, k_max: usize) -> Result<PmfTable> {
        let res = self.forward(&[s], k_max, false)?;
        let (states, overflow) = &res[0];
        let alive: f64 = states.iter().sum::<f64>() + overflow;
        let mut pmf = Vec::with_capacity(k_max + 1);
        pmf.push((1.0 - alive).max(0.0));
        pmf.extend_from_slice(states);
        PmfTable::new(pmf, *overflow)
    }
}

/// Configuration-level description of a semigroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SemigroupSpec {
    PureDeath,
    LinearBirthDeath { lambda: f64 },
    General { offspring: Vec<(u32, f64)>, rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SemigroupKind {
    PureDeath,
    LinearBirthDeath { lambda: f64 },
    General(OffspringLaw),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchingSemigroup {
    kind: SemigroupKind,
}

pub const DEFAULT_YAGLOM_CUTOFF: usize = 256;
pub const DEFAULT_YAGLOM_HORIZON: f64 = 12.0;
const YAGLOM_TV_THRESHOLD: f64 = 0.01;
const YAGLOM_TAIL_LIMIT: f64 = 1e-6;

impl BranchingSemigroup {
    pub fn pure_death() -> Self {
        Self { kind: SemigroupKind::PureDeath }
    }

    pub fn linear_birth_death(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("birth rate must be positive, got {lambda}")));
        }
        Ok(Self { kind: SemigroupKind::LinearBirthDeath { lambda } })
    }

    pub fn general(law: OffspringLaw) -> Self {
        Self { kind: SemigroupKind::General(law) }
    }

    pub fn from_spec(spec: &SemigroupSpec) -> Result<Self> {
        match spec {
            SemigroupSpec::PureDeath => Ok(Self::pure_death()),
            SemigroupSpec::LinearBirthDeath { lambda } => Self::linear_birth_death(*lambda),
            SemigroupSpec::General { offspring, rate } => Ok(Self::general(OffspringLaw::new(offspring, *rate)?)),
        }
    }

    pub fn kind(&self) -> &SemigroupKind {
        &self.kind
    }

    /// The offspring mechanism behind this semigroup.
    pub fn offspring(&self) -> OffspringLaw {
        match &self.kind {
            SemigroupKind::PureDeath => OffspringLaw::new(&[(0, 1.0)], 1.0).expect("valid"),
            SemigroupKind::LinearBirthDeath { lambda } => {
                let mu = lambda + 1.0;
                let tot = lambda + mu;
                OffspringLaw::new(&[(0, mu / tot), (2, lambda / tot)], tot).expect("valid")
            }
            SemigroupKind::General(law) => law.clone(),
        }
    }

    /// `1 - F_s(1 - w)`.
    pub fn complement(&self, s: f64, w: f64) -> Result<f64> {
        check_s(s)?;
        if !(0.0..=1.0).contains(&w) {
            return Err(invalid(format!("argument must lie in [0,1], got {}", 1.0 - w)));
        }
        if s == 0.0 || w == 0.0 {
            return Ok(w);
        }
        let e = (-s).exp();
        match &self.kind {
            SemigroupKind::PureDeath => Ok(e * w),
            SemigroupKind::LinearBirthDeath { lambda } => Ok(e * w / (1.0 + lambda * (-(-s).exp_m1()) * w)),
            SemigroupKind::General(law) => {
                let mut y = [w];
                dopri5(
                    |_, y, dy| dy[0] = law.complement_drift(y[0]),
                    0.0,
                    &mut y,
                    s,
                    OdeTol { rtol: 1e-10, atol: 1e-300 },
                )?;
                Ok(y[0].clamp(0.0, 1.0))
            }
        }
    }

    /// `F_s(z)`, the p.g.f. of `Y_s`.
    pub fn f(&self, s: f64, z: f64) -> Result<f64> {
        check_z(z)?;
        if s == 0.0 {
            return Ok(z);
        }
        match &self.kind {
            SemigroupKind::PureDeath => {
                check_s(s)?;
                let e = (-s).exp();
                Ok(1.0 - e + e * z)
            }
            _ => Ok((1.0 - self.complement(s, 1.0 - z)?).clamp(0.0, 1.0)),
        }
    }

    /// Generator `U(z) = rate * (g(z) - z)`.
    pub fn u(&self, z: f64) -> f64 {
        match &self.kind {
            SemigroupKind::PureDeath => 1.0 - z,
            SemigroupKind::LinearBirthDeath { lambda } => {
                let mu = lambda + 1.0;
                mu - (lambda + mu) * z + lambda * z * z
            }
            SemigroupKind::General(law) => law.rate * (law.pgf(z) - z),
        }
    }

    /// `A(z) = exp(-int_0^z dx / U(x))`.
    pub fn a(&self, z: f64) -> Result<f64> {
        check_z(z)?;
        if z == 1.0 {
            return Ok(0.0);
        }
        match &self.kind {
            SemigroupKind::PureDeath => Ok(1.0 - z),
            SemigroupKind::LinearBirthDeath { lambda } => Ok((lambda + 1.0) * (1.0 - z) / (1.0 + lambda * (1.0 - z))),
            SemigroupKind::General(law) => {
                if z == 0.0 {
                    return Ok(1.0);
                }
                // 1/U = 1/(1-x) + r(x) with r smooth on [0,1]; the first
                // term integrates to -ln(1-z) in closed form.
                let integral = integrate(|x| law_remainder(law, x), 0.0, z, 1e-14, 1e-13)?;
                Ok((1.0 - z) * (-integral).exp())
            }
        }
    }

    /// `B(z) = 1 - A(z)`, the p.g.f. of the Yaglom limit.
    pub fn b(&self, z: f64) -> Result<f64> {
        check_z(z)?;
        match &self.kind {
            SemigroupKind::PureDeath => Ok(z),
            SemigroupKind::LinearBirthDeath { lambda } => Ok(z / (1.0 + lambda * (1.0 - z))),
            SemigroupKind::General(_) => Ok(1.0 - self.a(z)?),
        }
    }

    /// One-sided finite-difference estimate of `F'_s(1)`.
    pub fn mean_at(&self, s: f64) -> Result<f64> {
        let h = 1e-4;
        let c1 = self.complement(s, h)?;
        let c2 = self.complement(s, 2.0 * h)?;
        let c3 = self.complement(s, 3.0 * h)?;
        Ok((18.0 * c1 - 9.0 * c2 + 2.0 * c3) / (6.0 * h))
    }

    /// Per-unit law of `Y_s`.
    pub fn unit_law(&self, s: f64) -> Result<UnitLaw> {
        check_s(s)?;
        if s == 0.0 {
            return Ok(UnitLaw::One);
        }
        let e = (-s).exp();
        Ok(match &self.kind {
            SemigroupKind::PureDeath => UnitLaw::Bernoulli(e),
            SemigroupKind::LinearBirthDeath { lambda } => {
                let b = lambda * (-(-s).exp_m1());
                UnitLaw::ZeroModifiedGeometric { survive: e / (1.0 + b), p: 1.0 / (1.0 + b) }
            }
            SemigroupKind::General(law) => {
                let table = law.transient_pmf(s, DEFAULT_YAGLOM_CUTOFF)?;
                UnitLaw::Branching { law: law.clone(), s, table: std::sync::Arc::new(table) }
            }
        })
    }

    /// Limit law of `Y_s` given survival.
    pub fn yaglom_law(&self, cutoff: usize, s_max: f64) -> Result<YaglomLaw> {
        if cutoff == 0 {
            return Err(invalid("Yaglom cutoff must be at least 1"));
        }
        match &self.kind {
            SemigroupKind::PureDeath => Ok(YaglomLaw::Constant),
            SemigroupKind::LinearBirthDeath { lambda } => Ok(YaglomLaw::ShiftedGeometric { p: 1.0 / (1.0 + lambda) }),
            SemigroupKind::General(law) => {
                if !(s_max > 0.0 && s_max.is_finite()) {
                    return Err(invalid(format!("Yaglom horizon must be positive, got {s_max}")));
                }
                let res = law.forward(&[0.5 * s_max, s_max], cutoff, true)?;
                let cond = |(states, overflow): &(Vec<f64>, f64)| {
                    let tot: f64 = states.iter().sum::<f64>() + overflow;
                    (states.iter().map(|v| v / tot).collect::<Vec<_>>(), overflow / tot)
                };
                let (half, half_tail) = cond(&res[0]);
                let (full, tail) = cond(&res[1]);
                let tv = 0.5
                    * (half.iter().zip(&full).map(|(a, b)| (a - b).abs()).sum::<f64>() + (half_tail - tail).abs());
                if tv > YAGLOM_TV_THRESHOLD {
                    return Err(Error::YaglomNotConverged { s_max, tv, threshold: YAGLOM_TV_THRESHOLD });
                }
                if tail > YAGLOM_TAIL_LIMIT {
                    return Err(invalid(format!(
                        "Yaglom tail mass {tail:e} beyond cutoff {cutoff}; increase the cutoff"
                    )));
                }
                let mut pmf = Vec::with_capacity(cutoff + 1);
                pmf.push(0.0);
                pmf.extend(full);
                Ok(YaglomLaw::Empirical { table: std::sync::Arc::new(PmfTable::new(pmf, tail)?), tv })
            }
        }
    }

    /// Yaglom law with the default cutoff and horizon.
    pub fn yaglom(&self) -> Result<YaglomLaw> {
        self.yaglom_law(DEFAULT_YAGLOM_CUTOFF, DEFAULT_YAGLOM_HORIZON)
    }

    /// Checks composition, the mean law and the two boundary limits.
    pub fn validate_conditions(&self, grid: &[(f64, f64, f64)], tol: f64) -> TestReport {
        let mut worst = Worst::default();
        let mut checks = 0u64;
        for &(s, t, z) in grid {
            let lhs = self.f(s + t, z);
            let rhs = self.f(t, z).and_then(|ft| self.f(s, ft));
            worst.record_pair(lhs, rhs, || format!("composition at s={s}, t={t}, z={z}"));
            checks += 1;
        }
        let mut ss: Vec<f64> = grid.iter().flat_map(|&(s, t, _)| [s, t]).collect();
        ss.sort_by(f64::total_cmp);
        ss.dedup();
        for &s in &ss {
            worst.record_pair(self.mean_at(s), Ok((-s).exp()), || format!("mean law at s={s}"));
            checks += 1;
        }
        let mut zs: Vec<f64> = grid.iter().map(|&(_, _, z)| z).collect();
        zs.sort_by(f64::total_cmp);
        zs.dedup();
        for &z in &zs {
            worst.record_pair(self.f(1e-12, z), Ok(z), || format!("small-time limit at z={z}"));
            worst.record_pair(self.f(60.0, z), Ok(1.0), || format!("large-time limit at z={z}"));
            checks += 2;
        }
        worst.report("semigroup conditions", checks, tol)
    }

    /// Checks `A(F_s(z)) = e^{-s} A(z)` and `B(F_s(z)) = 1 - e^{-s} + e^{-s} B(z)`.
    pub fn validate_cocycles(&self, grid: &[(f64, f64, f64)], tol: f64) -> TestReport {
        let mut worst = Worst::default();
        let mut checks = 0u64;
        let mut pairs: Vec<(f64, f64)> = grid.iter().flat_map(|&(s, t, z)| [(s, z), (t, z)]).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pairs.dedup();
        for &(s, z) in &pairs {
            let e = (-s).exp();
            let fz = self.f(s, z);
            let a_lhs = fz.as_ref().map_err(clone_err).and_then(|&v| self.a(v));
            let a_rhs = self.a(z).map(|a| e * a);
            worst.record_pair(a_lhs, a_rhs, || format!("A cocycle at s={s}, z={z}"));
            let b_lhs = fz.and_then(|v| self.b(v));
            let b_rhs = self.b(z).map(|b| 1.0 - e + e * b);
            worst.record_pair(b_lhs, b_rhs, || format!("B cocycle at s={s}, z={z}"));
            checks += 2;
        }
        worst.report("A/B cocycles", checks, tol)
    }
}

fn clone_err(e: &Error) -> Error {
    Error::Config(e.to_string())
}

/// `1/U(x) - 1/(1-x)` written without the removable singularity at 1.
fn law_remainder(law: &OffspringLaw, x: f64) -> f64 {
    // U(x) = (1-x) q(x) with q(x) = rate (1 - sum_k p_k S_k(x)),
    // S_k(x) = 1 + x + ... + x^{k-1}; and
    // (1 - q)/(1 - x) = -rate sum_k p_k sum_{i=1}^{k-1} S_i(x).
    let mut num = 0.0;
    let mut q_sum = 0.0;
    let mut idx = 0;
    let mut s_i = 0.0; // S_i
    let mut t_i = 0.0; // S_1 + ... + S_{i-1}
    let mut x_pow = 1.0;
    for k in 0..=law.max_offspring() {
        if idx < law.probs.len() && law.probs[idx].0 == k {
            let p = law.probs[idx].1;
            q_sum += p * s_i;
            num += p * t_i;
            idx += 1;
        }
        t_i += s_i;
        s_i += x_pow;
        x_pow *= x;
    }
    let q = law.rate * (1.0 - q_sum);
    -law.rate * num / q
}

fn check_s(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("time must be finite and non-negative, got {s}")))
    }
}

fn check_z(z: f64) -> Result<()> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        Err(invalid(format!("argument must lie in [0,1], got {z}")))
    }
}

#[derive(Default)]
struct Worst {
    value: f64,
    at: Option<String>,
    error: Option<String>,
}

impl Worst {
    fn record_pair(&mut self, lhs: Result<f64>, rhs: Result<f64>, at: impl FnOnce() -> String) {
        match (lhs, rhs) {
            (Ok(a), Ok(b)) => {
                let d = (a - b).abs();
                if d > self.value || d.is_nan() {
                    self.value = if d.is_nan() { f64::INFINITY } else { d };
                    self.at = Some(at());
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                if self.error.is_none() {
                    self.error = Some(format!("{}: {e}", at()));
                }
                self.value = f64::INFINITY;
            }
        }
    }

    fn report(self, name: &str, checks: u64, tol: f64) -> TestReport {
        let detail = match (self.error, self.at) {
            (Some(e), _) => e,
            (None, Some(at)) => format!("worst deviation {:e} ({at})", self.value),
            (None, None) => "all deviations zero".to_string(),
        };
        TestReport::deterministic(name, self.value, tol, checks, detail)
    }
}

/// Limiting conditional law `Y_inf` of a semigroup.
#[derive(Debug, Clone, PartialEq)]
pub enum YaglomLaw {
    /// Degenerate at 1.
    Constant,
    /// `P(k) = p (1-p)^{k-1}` on `k >= 1`.
    ShiftedGeometric { p: f64 },
    /// Tabulated law with the drift between horizon and half horizon.
    Empirical { table: std::sync::Arc<PmfTable>, tv: f64 },
}

impl YaglomLaw {
    pub fn pmf(&self, k: u64) -> f64 {
        match self {
            YaglomLaw::Constant => f64::from(u8::from(k == 1)),
            YaglomLaw::ShiftedGeometric { p } => {
                if k == 0 {
                    0.0
                } else {
                    p * (1.0 - p).powf((k - 1) as f64)
                }
            }
            YaglomLaw::Empirical { table, .. } => table.pmf(k),
        }
    }

    pub fn pgf(&self, z: f64) -> f64 {
        match self {
            YaglomLaw::Constant => z,
            YaglomLaw::ShiftedGeometric { p } => p * z / (1.0 - (1.0 - p) * z),
            YaglomLaw::Empirical { table, .. } => table.pgf(z),
        }
    }

    pub fn tail_mass(&self) -> f64 {
        match self {
            YaglomLaw::Empirical { table, .. } => table.tail(),
            _ => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            YaglomLaw::Constant => 1,
            YaglomLaw::ShiftedGeometric { p } => 1 + Geometric::new(*p).expect("valid p").sample(rng),
            YaglomLaw::Empirical { table, .. } => table.sample(rng),
        }
    }

    pub fn unit_law(&self) -> UnitLaw {
        match self {
            YaglomLaw::Constant => UnitLaw::One,
            YaglomLaw::ShiftedGeometric { p } => UnitLaw::ZeroModifiedGeometric { survive: 1.0, p: *p },
            YaglomLaw::Empirical { table, .. } => UnitLaw::Table(table.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lbd(l: f64) -> BranchingSemigroup {
        BranchingSemigroup::linear_birth_death(l).unwrap()
    }

    fn gen_half() -> BranchingSemigroup {
        BranchingSemigroup::general(OffspringLaw::new(&[(0, 0.75), (2, 0.25)], 2.0).unwrap())
    }

    #[test]
    fn constructor_examples() {
        assert_relative_eq!(lbd(1.0).u(0.0), 2.0);
        let law = OffspringLaw::new(&[(0, 0.75), (2, 0.25)], 2.0).unwrap();
        assert_relative_eq!(law.rate(), 2.0);
        assert_relative_eq!(law.rate() * (1.0 - law.mean()), 1.0, epsilon = 1e-12);
        assert!(matches!(
            OffspringLaw::new(&[(0, 0.5), (2, 0.5)], 1.0),
            Err(Error::NotSubcritical { mean }) if mean == 1.0
        ));
        assert!(matches!(
            OffspringLaw::new(&[(0, 0.5), (1, 0.1), (3, 0.4)], 1.0),
            Err(Error::SingleChildMass { .. })
        ));
        assert!(OffspringLaw::new(&[(0, 0.5), (2, 0.4)], 1.0).is_err());
        assert!(OffspringLaw::new(&[(0, 1.0)], 0.0).is_err());
        assert!(BranchingSemigroup::linear_birth_death(-1.0).is_err());
    }

    #[test]
    fn f_examples() {
        let ln2 = 2f64.ln();
        assert_relative_eq!(BranchingSemigroup::pure_death().f(ln2, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(lbd(1.0).f(ln2, 0.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        for z in [0.0, 0.1, 0.37, 1.0] {
            assert_eq!(lbd(2.0).f(0.0, z).unwrap(), z);
            assert_eq!(gen_half().f(0.0, z).unwrap(), z);
        }
        assert!(lbd(1.0).f(-1.0, 0.5).is_err());
        assert!(lbd(1.0).f(1.0, 1.5).is_err());
    }

    // {p_0 = 3/4, p_2 = 1/4} normalised to rate 2 is birth-death with
    // lambda + mu = 2 and mu = lambda + 1, i.e. lambda = 1/2.
    #[test]
    fn general_path_matches_birth_death_closed_form() {
        let g = gen_half();
        let l = lbd(0.5);
        assert_relative_eq!(g.f(0.7, 0.3).unwrap(), l.f(0.7, 0.3).unwrap(), epsilon = 1e-9);
        for &(s, z) in &[(0.01, 0.0), (0.5, 0.9), (3.0, 0.5), (20.0, 0.2)] {
            assert_relative_eq!(g.f(s, z).unwrap(), l.f(s, z).unwrap(), epsilon = 1e-9);
        }
        for z in [0.0, 0.2, 0.5, 0.9, 0.999] {
            assert_relative_eq!(g.a(z).unwrap(), l.a(z).unwrap(), epsilon = 1e-11);
            assert_relative_eq!(g.u(z), l.u(z), epsilon = 1e-14);
        }
        let g1 = BranchingSemigroup::general(OffspringLaw::new(&[(0, 2.0 / 3.0), (2, 1.0 / 3.0)], 1.0).unwrap());
        assert_relative_eq!(g1.f(0.7, 0.3).unwrap(), lbd(1.0).f(0.7, 0.3).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn pure_death_equals_general_p0() {
        let g = BranchingSemigroup::general(OffspringLaw::new(&[(0, 1.0)], 1.0).unwrap());
        let p = BranchingSemigroup::pure_death();
        for &(s, z) in &[(0.1, 0.0), (1.0, 0.5), (5.0, 0.99)] {
            assert_relative_eq!(g.f(s, z).unwrap(), p.f(s, z).unwrap(), epsilon = 1e-9);
            assert_relative_eq!(g.a(z).unwrap(), p.a(z).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn generator_examples() {
        assert_relative_eq!(BranchingSemigroup::pure_death().u(0.3), 0.7);
        assert_relative_eq!(lbd(1.0).u(0.0), 2.0);
        for sg in [BranchingSemigroup::pure_death(), lbd(1.0), gen_half()] {
            assert_eq!(sg.u(1.0), 0.0);
            assert!(sg.u(0.999) > 0.0);
        }
    }

    #[test]
    fn a_and_b_examples() {
        assert_relative_eq!(BranchingSemigroup::pure_death().a(0.3).unwrap(), 0.7);
        assert_relative_eq!(lbd(1.0).a(0.5).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(BranchingSemigroup::pure_death().b(0.4).unwrap(), 0.4);
        assert_relative_eq!(lbd(1.0).b(0.5).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        for sg in [BranchingSemigroup::pure_death(), lbd(1.0), gen_half()] {
            assert_eq!(sg.a(0.0).unwrap(), 1.0);
            assert_eq!(sg.b(1.0).unwrap(), 1.0);
            assert_eq!(sg.a(1.0).unwrap(), 0.0);
        }
    }

    // Oracle: exp(-int_0^z dx/U) by 30-digit quadrature of 1/U directly,
    // frozen here.
    #[test]
    fn a_function_three_types_frozen() {
        let law = OffspringLaw::new(&[(0, 0.6), (2, 0.3), (3, 0.1)], 1.0).unwrap();
        let sg = BranchingSemigroup::general(law);
        let expected = [(0.25, 0.948_458_440_884_514_7), (0.5, 0.862_863_406_917_053_7), (0.8, 0.620_444_382_497_087_4)];
        for (z, a) in expected {
            assert_relative_eq!(sg.a(z).unwrap(), a, epsilon = 1e-9);
        }
    }

    #[test]
    fn mean_identity() {
        for sg in [BranchingSemigroup::pure_death(), lbd(0.5), lbd(2.0), gen_half()] {
            for s in [0.01, 0.5, 2.0, 6.0] {
                assert_relative_eq!(sg.mean_at(s).unwrap(), (-s).exp(), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn yaglom_examples() {
        assert_eq!(BranchingSemigroup::pure_death().yaglom().unwrap(), YaglomLaw::Constant);
        let y = lbd(1.0).yaglom().unwrap();
        for k in 1..8u64 {
            assert_relative_eq!(y.pmf(k), 0.5f64.powi(k as i32), epsilon = 1e-15);
        }
        let g = gen_half().yaglom().unwrap();
        let exact = lbd(0.5).yaglom().unwrap();
        let tv: f64 = 0.5 * (1..200u64).map(|k| (g.pmf(k) - exact.pmf(k)).abs()).sum::<f64>();
        assert!(tv < 1e-4, "tv {tv}");
        assert!(g.tail_mass() < 1e-12);
    }

    #[test]
    fn b_is_yaglom_pgf() {
        for l in [0.5, 1.0, 2.0] {
            let sg = lbd(l);
            let y = sg.yaglom().unwrap();
            for i in 0..=20 {
                let z = f64::from(i) / 20.0;
                assert_relative_eq!(sg.b(z).unwrap(), y.pgf(z), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn yaglom_rejects_short_horizon() {
        let err = gen_half().yaglom_law(64, 0.5).unwrap_err();
        assert!(matches!(err, Error::YaglomNotConverged { .. }));
    }

    #[test]
    fn transient_pmf_matches_birth_death_law() {
        let s = 0.8;
        let t = gen_half().offspring().transient_pmf(s, 200).unwrap();
        let UnitLaw::ZeroModifiedGeometric { survive, p } = lbd(0.5).unit_law(s).unwrap() else {
            panic!()
        };
        assert_relative_eq!(t.pmf(0), 1.0 - survive, epsilon = 1e-10);
        for k in 1..10u64 {
            assert_relative_eq!(t.pmf(k), survive * p * (1.0 - p).powi(k as i32 - 1), epsilon = 1e-10);
        }
    }

    #[test]
    fn validation_reports() {
        let grid: Vec<(f64, f64, f64)> = vec![(0.1, 0.2, 0.3), (1.0, 2.0, 0.0), (0.5, 0.5, 0.99)];
        assert!(BranchingSemigroup::pure_death().validate_conditions(&grid, 1e-9).passed());
        assert!(lbd(2.0).validate_conditions(&grid, 1e-9).passed());
        assert!(gen_half().validate_conditions(&grid, 1e-6).passed());
        assert!(lbd(2.0).validate_cocycles(&grid, 1e-9).passed());
        assert!(gen_half().validate_cocycles(&grid, 1e-6).passed());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn composition_law_closed_forms(l in 0.1f64..4.0, s in 0.0f64..5.0, t in 0.0f64..5.0, z in 0.0f64..=1.0) {
            let sg = lbd(l);
            let lhs = sg.f(s + t, z).unwrap();
            let rhs = sg.f(s, sg.f(t, z).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
            let a = sg.a(sg.f(s, z).unwrap()).unwrap();
            prop_assert!((a - (-s).exp() * sg.a(z).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn f_monotone_in_z(s in 0.0f64..4.0, z1 in 0.0f64..=1.0, z2 in 0.0f64..=1.0) {
            let (lo, hi) = if z1 <= z2 { (z1, z2) } else { (z2, z1) };
            for sg in [BranchingSemigroup::pure_death(), lbd(1.5)] {
                let (a, b) = (sg.f(s, lo).unwrap(), sg.f(s, hi).unwrap());
                prop_assert!(a <= b && (0.0..=1.0).contains(&a) && b <= 1.0);
                prop_assert!(sg.a(lo).unwrap() >= sg.a(hi).unwrap());
            }
        }

        #[test]
        fn general_composition(s in 0.0f64..3.0, t in 0.0f64..3.0, z in 0.0f64..=1.0) {
            let law = OffspringLaw::new(&[(0, 0.6), (2, 0.3), (3, 0.1)], 1.0).unwrap();
            let sg = BranchingSemigroup::general(law);
            let lhs = sg.f(s + t, z).unwrap();
            let rhs = sg.f(s, sg.f(t, z).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-8);
        }
    }
}
