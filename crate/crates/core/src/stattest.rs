//! Two-sample and goodness-of-fit tests used to certify identities in law.
//!
//! All tests return a [`TestReport`]; `verdict` is `Pass` exactly when
//! `p_value > alpha_level`. Combined tests use Bonferroni corrections, so
//! their type-I error is at or below the nominal level.

use crate::error::{Error, Result};
use crate::numeric::{norm_sf, Estimate};
use crate::processes::{Grid, PointConfig, Window};
use crate::rng::{try_replicate, SimRng, Streams};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;
use std::collections::BTreeMap;

pub const DEFAULT_LEVEL: f64 = 0.01;
pub const MIN_COUNT_SAMPLES: usize = 1000;
pub const MIN_REAL_SAMPLES: usize = 100;
pub const MIN_PP_REPLICATES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n_a: u64,
    pub n_b: u64,
    pub seed: Option<u64>,
    pub alpha_level: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, p_value: f64, n_a: u64, n_b: u64) -> Self {
        let p_value = if p_value.is_nan() { 0.0 } else { p_value.clamp(0.0, 1.0) };
        let mut r = Self {
            name: name.into(),
            statistic,
            p_value,
            n_a,
            n_b,
            seed: None,
            alpha_level: DEFAULT_LEVEL,
            verdict: Verdict::Fail,
            detail: String::new(),
        };
        r.set_level(DEFAULT_LEVEL);
        r
    }

    /// Report for an exact numerical check: passes iff `worst <= tol`.
    pub fn deterministic(name: &str, worst: f64, tol: f64, checks: u64, detail: String) -> Self {
        let ok = worst <= tol;
        let mut r = Self::new(name, worst, if ok { 1.0 } else { 0.0 }, checks, 0);
        r.detail = format!("tolerance {tol:e}; {detail}");
        r
    }

    pub fn set_level(&mut self, level: f64) {
        self.alpha_level = level;
        self.verdict = if self.p_value > level { Verdict::Pass } else { Verdict::Fail };
    }

    pub fn with_level(mut self, level: f64) -> Self {
        self.set_level(level);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Rectangular partition of a window into at least two cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    grid: Grid,
}

impl CellPartition {
    pub fn new(window: &Window, shape: &[usize]) -> Result<Self> {
        let grid = Grid::new(window, shape)?;
        if grid.n_cells() < 2 {
            return Err(Error::InvalidParameter("a cell partition needs at least two cells".into()));
        }
        Ok(Self { grid })
    }

    /// The default 4 x 4 (or 4-per-axis) partition.
    pub fn default_for(window: &Window) -> Result<Self> {
        Self::new(window, &vec![4; window.dim()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(0.5 * df, 0.5 * x)
    }
}

/// Kolmogorov limiting survival function `Q(lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for j in 1..=20 {
            let k = f64::from(2 * j - 1);
            s += (-k * k * c).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for j in 1..=100 {
            let jf = f64::from(j);
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            s += if j % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn ks_lambda(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    (sq + 0.12 + 0.11 / sq) * d
}

/// Two-sample Kolmogorov–Smirnov distance on sorted inputs (ties handled).
fn ks_distance<T: PartialOrd + Copy>(a: &[T], b: &[T]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn ks_p(d: f64, na: usize, nb: usize) -> f64 {
    let n_eff = (na as f64 * nb as f64) / (na + nb) as f64;
    kolmogorov_sf(ks_lambda(d, n_eff))
}

/// One-sample KS against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestReport> {
    if sample.len() < MIN_REAL_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_REAL_SAMPLES, got: sample.len() });
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let p = kolmogorov_sf(ks_lambda(d, n));
    Ok(TestReport::new("ks one-sample", d, p, xs.len() as u64, 0))
}

/// Chi-square goodness of fit of counts against a pmf table on `0..pmf.len()`;
/// mass beyond the table forms the last bin.
pub fn chi_square_gof(sample: &[u64], pmf: &[f64]) -> Result<TestReport> {
    if sample.len() < MIN_COUNT_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_COUNT_SAMPLES, got: sample.len() });
    }
    let n = sample.len() as f64;
    let mut observed = vec![0u64; pmf.len() + 1];
    for &x in sample {
        let idx = usize::try_from(x).map_or(pmf.len(), |i| i.min(pmf.len()));
        observed[idx] += 1;
    }
    let tail = (1.0 - pmf.iter().sum::<f64>()).max(0.0);
    let expected: Vec<f64> = pmf.iter().map(|p| n * p).chain(std::iter::once(n * tail)).collect();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut e_acc, mut o_acc) = (0.0, 0.0);
    for (e, o) in expected.iter().zip(&observed) {
        e_acc += e;
        o_acc += *o as f64;
        if e_acc >= 5.0 {
            bins.push((e_acc, o_acc));
            e_acc = 0.0;
            o_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += e_acc;
                last.1 += o_acc;
            }
            None => bins.push((e_acc, o_acc)),
        }
    }
    let stat: f64 = bins
        .iter()
        .map(|&(e, o)| if e > 0.0 { (o - e).powi(2) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let df = bins.len().saturating_sub(1) as f64;
    let p = if df == 0.0 { 1.0 } else { chi_square_sf(stat, df) };
    Ok(TestReport::new("chi-square goodness of fit", stat, p, sample.len() as u64, 0)
        .with_detail(format!("df={df}")))
}

/// Chi-square homogeneity on merged bins combined with KS (Bonferroni).
pub fn two_sample_counts(a: &[u64], b: &[u64]) -> Result<TestReport> {
    for s in [a, b] {
        if s.len() < MIN_COUNT_SAMPLES {
            return Err(Error::InsufficientSamples { needed: MIN_COUNT_SAMPLES, got: s.len() });
        }
    }
    let mut tally: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for &x in a {
        tally.entry(x).or_default().0 += 1;
    }
    for &x in b {
        tally.entry(x).or_default().1 += 1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let frac_a = na / (na + nb);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for &(xa, xb) in tally.values() {
        ca += xa as f64;
        cb += xb as f64;
        let tot = ca + cb;
        if tot * frac_a >= 5.0 && tot * (1.0 - frac_a) >= 5.0 {
            bins.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => bins.push((ca, cb)),
        }
    }
    let mut chi = 0.0;
    for &(oa, ob) in &bins {
        let tot = oa + ob;
        let (ea, eb) = (tot * frac_a, tot * (1.0 - frac_a));
        chi += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let df = bins.len().saturating_sub(1);
    let p_chi = if df == 0 { 1.0 } else { chi_square_sf(chi, df as f64) };

    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable();
    sb.sort_unstable();
    let d = ks_distance(&sa, &sb);
    let p_ks = ks_p(d, sa.len(), sb.len());
    let p = (2.0 * p_chi.min(p_ks)).min(1.0);
    Ok(TestReport::new("two-sample counts", chi, p, a.len() as u64, b.len() as u64)
        .with_detail(format!("chi2={chi:.6} df={df} p_chi={p_chi:.6e} ks_d={d:.6e} p_ks={p_ks:.6e}")))
}

/// KS on positive parts combined with a two-proportion z-test on zeros.
pub fn two_sample_reals(a: &[f64], b: &[f64]) -> Result<TestReport> {
    for s in [a, b] {
        if s.len() < MIN_REAL_SAMPLES {
            return Err(Error::InsufficientSamples { needed: MIN_REAL_SAMPLES, got: s.len() });
        }
        if s.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidParameter("sample contains NaN".into()));
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut pa: Vec<f64> = a.iter().copied().filter(|&x| x != 0.0).collect();
    let mut pb: Vec<f64> = b.iter().copied().filter(|&x| x != 0.0).collect();
    let za = na - pa.len() as f64;
    let zb = nb - pb.len() as f64;
    pa.sort_by(f64::total_cmp);
    pb.sort_by(f64::total_cmp);
    let (d, p_ks) = if pa.is_empty() || pb.is_empty() {
        (0.0, if pa.is_empty() == pb.is_empty() { 1.0 } else { 0.0 })
    } else {
        let d = ks_distance(&pa, &pb);
        (d, ks_p(d, pa.len(), pb.len()))
    };
    if za == 0.0 && zb == 0.0 {
        return Ok(TestReport::new("two-sample reals", d, p_ks, a.len() as u64, b.len() as u64)
            .with_detail(format!("ks_d={d:.6e}")));
    }
    let pool = (za + zb) / (na + nb);
    let p_z = if pool <= 0.0 || pool >= 1.0 {
        1.0
    } else {
        let se = (pool * (1.0 - pool) * (1.0 / na + 1.0 / nb)).sqrt();
        let z = (za / na - zb / nb) / se;
        (2.0 * norm_sf(z.abs())).min(1.0)
    };
    let p = (2.0 * p_z.min(p_ks)).min(1.0);
    Ok(TestReport::new("two-sample reals", d, p, a.len() as u64, b.len() as u64)
        .with_detail(format!("zeros={za}/{zb} p_zero={p_z:.6e} ks_d={d:.6e} p_ks={p_ks:.6e}")))
}

/// Compares two point-process samplers through cell counts and totals.
///
/// The statistic is the smallest unadjusted p-value; the reported p-value is
/// Bonferroni-adjusted over all cells plus the total.
pub fn pp_equality_test<FA, FB>(
    sampler_a: FA,
    sampler_b: FB,
    partition: &CellPartition,
    n: usize,
    streams: &Streams,
) -> Result<TestReport>
where
    FA: Fn(&mut SimRng) -> Result<PointConfig> + Sync,
    FB: Fn(&mut SimRng) -> Result<PointConfig> + Sync,
{
    if n < MIN_PP_REPLICATES {
        return Err(Error::InsufficientSamples { needed: MIN_PP_REPLICATES, got: n });
    }
    let grid = partition.grid();
    let counts = |label: &str, f: &(dyn Fn(&mut SimRng) -> Result<PointConfig> + Sync)| {
        try_replicate(streams, label, n, |rng| {
            let cfg = f(rng)?;
            let cells = cfg.cell_counts(grid, rng)?;
            let total = cells.iter().fold(0u64, |a, &c| a.saturating_add(c));
            Ok::<_, Error>((cells, total))
        })
    };
    let a = counts("pp-equality-a", &sampler_a)?;
    let b = counts("pp-equality-b", &sampler_b)?;
    let k = grid.n_cells();
    let mut worst = (f64::INFINITY, String::new());
    let mut column_a = vec![0u64; n];
    let mut column_b = vec![0u64; n];
    for cell in 0..=k {
        let pick = |x: &(Vec<u64>, u64)| if cell == k { x.1 } else { x.0[cell] };
        for (dst, src) in column_a.iter_mut().zip(&a) {
            *dst = pick(src);
        }
        for (dst, src) in column_b.iter_mut().zip(&b) {
            *dst = pick(src);
        }
        let r = two_sample_counts(&column_a, &column_b)?;
        if r.p_value < worst.0 {
            let label = if cell == k { "total".to_string() } else { format!("cell {cell}") };
            worst = (r.p_value, format!("worst: {label} ({})", r.detail));
        }
    }
    let tests = (k + 1) as f64;
    let p = (tests * worst.0).min(1.0);
    Ok(TestReport::new("point-process equality", worst.0, p, n as u64, n as u64).with_detail(worst.1))
}

/// Two-sided tail probability matching the three-standard-error band.
pub fn band_level() -> f64 {
    2.0 * norm_sf(3.0)
}

/// Passes iff every estimate lies within three standard errors of its target.
pub fn transform_band_test(estimates: &[Estimate], targets: &[f64]) -> Result<TestReport> {
    if estimates.len() != targets.len() {
        return Err(Error::LengthMismatch(estimates.len(), targets.len()));
    }
    if estimates.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut worst = (0.0f64, 0usize);
    for (i, (e, &t)) in estimates.iter().zip(targets).enumerate() {
        let z = e.z_score(t).abs();
        let z = if z.is_nan() { f64::INFINITY } else { z };
        if z > worst.0 {
            worst = (z, i);
        }
    }
    let p = if worst.0 <= 3.0 { (2.0 * norm_sf(worst.0)).max(band_level() * (1.0 + 1e-12)) } else { 2.0 * norm_sf(worst.0) };
    let e = &estimates[worst.1];
    Ok(TestReport::new("transform band", worst.0, p, estimates.len() as u64, 0)
        .with_level(band_level())
        .with_detail(format!(
            "worst point {}: estimate {:.6} se {:.2e} target {:.6}",
            worst.1, e.value, e.se, targets[worst.1]
        )))
}
