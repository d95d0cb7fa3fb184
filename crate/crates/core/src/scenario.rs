//! Named, seeded experiments with JSON reports and CSV sample dumps.
//!
//! A report embeds the fully resolved configuration, so re-running it
//! reproduces the report byte for byte.

use crate::battery::{self, LevyShape};
use crate::cb::{
    cb_mult, cox_coupling_check, feller_conditioned_sample, feller_transition_sample, thinning_identity_check,
    v_transform, vstable_sample, yaglom_cb_sample, FellerParams,
};
use crate::diffusion_branch::dt_stable_pp_sample;
use crate::discrete_ops::{fstable_rv_sample, StableParams};
use crate::error::{invalid, Error, Result};
use crate::numeric::Estimate;
use crate::processes::{PointConfig, Window};
use crate::rng::{replicate, try_replicate, SimRng, Streams};
use crate::semigroups::{BranchingSemigroup, SemigroupKind, SemigroupSpec};
use crate::stable_pp::{das_pp_sample, fstable_pp_sample, SpectralComponentSpec, SpectralMeasureM1};
use crate::stattest::{transform_band_test, two_sample_reals, CellPartition, TestReport, DEFAULT_LEVEL};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "reports.csv";
pub const SAMPLES_FILE: &str = "samples.csv";

pub struct ScenarioInfo {
    pub name: &'static str,
    pub anchor: &'static str,
    /// Whether a failing test fails the run.
    pub gated: bool,
}

/// Registry, in listing order.
pub const SCENARIOS: [ScenarioInfo; 9] = [
    ScenarioInfo { name: "semigroup-validate", anchor: "composition and mean laws of branching p.g.f. semigroups; A/B cocycles", gated: true },
    ScenarioInfo { name: "fstable-rv", anchor: "F-stable integer variables: characterisation exp(-cA(z)^alpha) and F-stability", gated: true },
    ScenarioInfo { name: "das-pp", anchor: "discrete-stable point processes as Poisson-Sibuya clusters; thinning stability", gated: true },
    ScenarioInfo { name: "fstable-pp", anchor: "F-stable point processes as DaS-centred Yaglom clusters; branching stability", gated: true },
    ScenarioInfo { name: "dt-pp", anchor: "Cox process over S * Lebesgue; stability under thinning-diffusion", gated: true },
    ScenarioInfo { name: "dt-levy-probe", anchor: "open question: Cox over a truncated theta_alpha x sigma sample (reported, not gated)", gated: false },
    ScenarioInfo { name: "cb-feller", anchor: "Feller branching diffusion: transition law, Yaglom limit, thinning identity", gated: true },
    ScenarioInfo { name: "cb-vstable", anchor: "V-stable variables as DaS sums of Yaglom draws; V-stability", gated: true },
    ScenarioInfo { name: "cox-coupling", anchor: "Poisson mixture over a V-stable variable is F-stable when b = 2 lambda", gated: true },
];

pub fn scenario_info(name: &str) -> Result<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.name == name).ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

/// One line per scenario: `name  anchor`.
pub fn list_scenarios() -> String {
    let width = SCENARIOS.iter().map(|s| s.name.len()).max().unwrap_or(0);
    SCENARIOS.iter().map(|s| format!("{:width$}  {}\n", s.name, s.anchor)).collect()
}

fn default_seed() -> u64 {
    42
}
fn default_n() -> usize {
    100_000
}
fn default_level() -> f64 {
    DEFAULT_LEVEL
}
fn default_t_grid() -> Vec<f64> {
    vec![0.2, 0.5, 0.8]
}
fn default_csv_rows() -> usize {
    1000
}
fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyShapeSpec {
    pub weight: f64,
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub scenario: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_level")]
    pub alpha_level: f64,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semigroup: Option<SemigroupSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable: Option<StableParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feller: Option<FellerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<Vec<SpectralComponentSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<usize>>,
    /// Added to the exponent in the stability scalings (negative control).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub corrupt_alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levy_shapes: Option<Vec<LevyShapeSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_csv_rows")]
    pub csv_rows: usize,
}

impl ScenarioConfig {
    pub fn new(scenario: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: scenario.to_string(),
            seed: default_seed(),
            n: default_n(),
            alpha_level: default_level(),
            t_grid: default_t_grid(),
            semigroup: None,
            stable: None,
            feller: None,
            window: None,
            spectral: None,
            partition: None,
            corrupt_alpha: 0.0,
            tol: None,
            total_scale: None,
            levy_shapes: None,
            epsilon: None,
            csv_rows: default_csv_rows(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn semigroup(&self) -> Result<BranchingSemigroup> {
        let spec = self.semigroup.as_ref().ok_or_else(|| Error::Config("`semigroup` is required".into()))?;
        BranchingSemigroup::from_spec(spec)
    }

    fn stable(&self) -> Result<StableParams> {
        let sp = self.stable.ok_or_else(|| Error::Config("`stable` is required".into()))?;
        sp.validate()?;
        Ok(sp)
    }

    fn feller(&self) -> Result<FellerParams> {
        let p = self.feller.ok_or_else(|| Error::Config("`feller` is required".into()))?;
        p.validate()?;
        Ok(p)
    }

    fn window(&self) -> Result<Window> {
        let w = self.window.clone().unwrap_or_else(|| Window::unit_torus(2));
        w.validate()?;
        Ok(w)
    }

    fn partition(&self, window: &Window) -> Result<CellPartition> {
        match &self.partition {
            None => CellPartition::default_for(window),
            Some(shape) => CellPartition::new(window, shape),
        }
    }

    fn spectral(&self, window: &Window, sp: &StableParams) -> Result<SpectralMeasureM1> {
        match &self.spectral {
            None => SpectralMeasureM1::uniform(window, sp.c),
            Some(spec) => SpectralMeasureM1::from_spec(window, spec),
        }
    }

    fn scale_alpha(&self, alpha: f64) -> f64 {
        alpha + self.corrupt_alpha
    }

    fn validate_common(&self) -> Result<()> {
        scenario_info(&self.scenario)?;
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(invalid(format!("alpha_level must lie in (0,1), got {}", self.alpha_level)));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(invalid("t_grid must be a non-empty list of values in (0,1)"));
        }
        if !self.corrupt_alpha.is_finite() {
            return Err(invalid("corrupt_alpha must be finite"));
        }
        let corruptible = ["fstable-rv", "das-pp", "fstable-pp", "dt-pp", "dt-levy-probe", "cb-vstable"];
        if self.corrupt_alpha != 0.0 && !corruptible.contains(&self.scenario.as_str()) {
            return Err(invalid(format!("scenario {} has no stability scaling to corrupt", self.scenario)));
        }
        Ok(())
    }
}

/// Full result of a run, as written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub gated: bool,
    pub passed: bool,
    pub config: ScenarioConfig,
    pub reports: Vec<TestReport>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// 0 pass, 1 statistical failure of a gated scenario.
    pub fn exit_code(&self) -> i32 {
        if self.gated && !self.passed {
            1
        } else {
            0
        }
    }
}

/// Tabular sample dump.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Samples {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Samples {
    fn reals(name: &str, xs: &[f64]) -> Self {
        Self {
            header: vec!["replicate".into(), name.into()],
            rows: xs.iter().enumerate().map(|(i, x)| vec![i.to_string(), format!("{x:?}")]).collect(),
        }
    }

    fn counts(name: &str, xs: &[u64]) -> Self {
        Self {
            header: vec!["replicate".into(), name.into()],
            rows: xs.iter().enumerate().map(|(i, x)| vec![i.to_string(), x.to_string()]).collect(),
        }
    }

    fn cells(cells: &[Vec<u64>]) -> Self {
        let k = cells.first().map_or(0, Vec::len);
        let mut header = vec!["replicate".to_string()];
        header.extend((0..k).map(|c| format!("cell_{c}")));
        header.push("total".into());
        let rows = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut row = vec![i.to_string()];
                row.extend(c.iter().map(u64::to_string));
                row.push(c.iter().fold(0u64, |a, &b| a.saturating_add(b)).to_string());
                row
            })
            .collect();
        Self { header, rows }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub struct ScenarioOutput {
    pub report: ScenarioReport,
    pub samples: Samples,
}

impl ScenarioOutput {
    /// Writes `report.json`, `reports.csv` and `samples.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(REPORT_FILE), self.report.to_json()?)?;
        write_summary_csv(&self.report.reports, std::fs::File::create(dir.join(SUMMARY_FILE))?)?;
        self.samples.write_csv(std::fs::File::create(dir.join(SAMPLES_FILE))?)
    }
}

/// One row per test report.
pub fn write_summary_csv<W: Write>(reports: &[TestReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "statistic", "p_value", "n_a", "n_b", "seed", "alpha_level", "verdict", "detail"])?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            format!("{:?}", r.statistic),
            format!("{:?}", r.p_value),
            r.n_a.to_string(),
            r.n_b.to_string(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            format!("{:?}", r.alpha_level),
            if r.passed() { "pass".into() } else { "fail".into() },
            r.detail.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn pp_cells<F>(sampler: F, partition: &CellPartition, rows: usize, streams: &Streams) -> Result<Samples>
where
    F: Fn(&mut SimRng) -> Result<PointConfig> + Sync,
{
    let cells = try_replicate(&streams.child("csv"), "cells", rows, |rng| sampler(rng)?.cell_counts(partition.grid(), rng))?;
    Ok(Samples::cells(&cells))
}

/// Runs a configured scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate_common()?;
    let info = scenario_info(&cfg.scenario)?;
    let streams = Streams::new(cfg.seed).child(&cfg.scenario);
    let (reports, samples) = match info.name {
        "semigroup-validate" => run_semigroup_validate(cfg)?,
        "fstable-rv" => run_fstable_rv(cfg, &streams)?,
        "das-pp" => run_das_pp(cfg, &streams)?,
        "fstable-pp" => run_fstable_pp(cfg, &streams)?,
        "dt-pp" => run_dt_pp(cfg, &streams)?,
        "dt-levy-probe" => run_levy_probe(cfg, &streams)?,
        "cb-feller" => run_cb_feller(cfg, &streams)?,
        "cb-vstable" => run_cb_vstable(cfg, &streams)?,
        "cox-coupling" => run_cox_coupling(cfg, &streams)?,
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    let reports: Vec<TestReport> = reports
        .into_iter()
        .map(|mut r| {
            if r.alpha_level == DEFAULT_LEVEL {
                r.set_level(cfg.alpha_level);
            }
            r.seed = Some(cfg.seed);
            r
        })
        .collect();
    let passed = reports.iter().all(TestReport::passed);
    let report = ScenarioReport {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.scenario.clone(),
        seed: cfg.seed,
        gated: info.gated,
        passed,
        config: cfg.clone(),
        reports,
    };
    Ok(ScenarioOutput { report, samples })
}

/// Outcome of re-running a stored report.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplayOutcome {
    Identical,
    Mismatch { first_difference: usize },
}

/// Re-runs the configuration embedded in a report and compares bytes.
pub fn replay_report(text: &str) -> Result<ReplayOutcome> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let cfg_value = v.get("config").ok_or_else(|| Error::Config("report has no `config`".into()))?;
    let cfg = ScenarioConfig::from_json(&cfg_value.to_string())?;
    let fresh = run_scenario(&cfg)?.report.to_json()?;
    if fresh == text {
        Ok(ReplayOutcome::Identical)
    } else {
        let first = fresh.bytes().zip(text.bytes()).position(|(a, b)| a != b).unwrap_or(fresh.len().min(text.len()));
        Ok(ReplayOutcome::Mismatch { first_difference: first })
    }
}

type Run = Result<(Vec<TestReport>, Samples)>;

/// 10 x 10 x 10 grid of `(s, t, z)`.
pub fn validation_grid() -> Vec<(f64, f64, f64)> {
    let ts: Vec<f64> = (0..10).map(|i| 0.05 + 0.3 * i as f64).collect();
    let zs: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let mut g = Vec::with_capacity(1000);
    for &s in &ts {
        for &t in &ts {
            for &z in &zs {
                g.push((s, t, z));
            }
        }
    }
    g
}

fn run_semigroup_validate(cfg: &ScenarioConfig) -> Run {
    let sg = cfg.semigroup()?;
    let tol = cfg.tol.unwrap_or(match sg.kind() {
        SemigroupKind::General(_) => 1e-6,
        _ => 1e-9,
    });
    let grid = validation_grid();
    let reports = vec![sg.validate_conditions(&grid, tol), sg.validate_cocycles(&grid, tol)];
    for r in &reports {
        if r.statistic.is_nan() {
            return Err(Error::Numerical { what: "semigroup validation", achieved: r.statistic });
        }
    }
    let mut samples = Samples { header: vec!["s".into(), "z".into(), "F".into(), "A".into(), "B".into()], rows: Vec::new() };
    for &(s, _, z) in grid.iter().step_by(10) {
        samples.rows.push(vec![
            format!("{s:?}"),
            format!("{z:?}"),
            format!("{:?}", sg.f(s, z)?),
            format!("{:?}", sg.a(z)?),
            format!("{:?}", sg.b(z)?),
        ]);
    }
    Ok((reports, samples))
}

fn run_fstable_rv(cfg: &ScenarioConfig, streams: &Streams) -> Run {
    let sg = cfg.semigroup()?;
    let sp = cfg.stable()?;
    let y = sg.yaglom()?;
    let mut reports = vec![battery::rv_pgf_band(&sg, &y, &sp, cfg.n, streams)?];
    for &t in &cfg.t_grid {
        reports.push(battery::rv_stability_test(&sg, &y, &sp, t, cfg.scale_alpha(sp.alpha), cfg.n, streams)?);
    }
    let xs = try_replicate(&streams.child("csv"), "x", cfg.csv_rows, |rng| fstable_rv_sample(&y, &sp, rng))?;
    Ok((reports, Samples::counts("count", &xs)))
}

fn run_das_pp(cfg: &ScenarioConfig, streams: &Streams) -> Run {
    let sp = cfg.stable()?;
    let w = cfg.window()?;
    let sigma = cfg.spectral(&w, &sp)?;
    let part = cfg.partition(&w)?;
    let pd = BranchingSemigroup::pure_death();
    let y = pd.yaglom()?;
    let mut reports = vec![battery::fstable_pp_pgfl_band(&pd, &y, sp.alpha, &sigma, cfg.n, streams)?];
    for &t in &cfg.t_grid {
        reports.push(battery::das_pp_stability_test(sp.alpha, &sigma, t, cfg.scale_alpha(sp.alpha), &part, cfg.n, streams)?);
    }
    let samples = pp_cells(|r| das_pp_sample(sp.alpha, &sigma, r), &part, cfg.csv_rows, streams)?;
    Ok((reports, samples))
}

fn run_fstable_pp(cfg: &ScenarioConfig, streams: &Streams) -> Run {
    let sg = cfg.semigroup()?;
    let sp = cfg.stable()?;
    let w = cfg.window()?;
    let sigma = cfg.spectral(&w, &sp)?;
    let part = cfg.partition(&w)?;
    let y = sg.yaglom()?;
    let mut reports = vec![battery::fstable_pp_pgfl_band(&sg, &y, sp.alpha, &sigma, cfg.n, streams)?];
    for &t in &cfg.t_grid {
        reports.push(battery::fstable_pp_stability_test(
            &sg,
            &y,
            sp.alpha,
            &sigma,
            t,
            cfg.scale_alpha(sp.alpha),
            &part,
            cfg.n,
            streams,
        )?);
    }
    let samples = pp_cells(|r| fstable_pp_sample(&y, sp.alpha, &sigma, r), &part, cfg.csv_rows, streams)?;
    Ok((reports, samples))
}

fn open_alpha(sp: &StableParams) -> Result<f64> {
    if sp.alpha < 1.0 {
        Ok(sp.alpha)
    } else {
        Err(invalid("this scenario needs alpha < 1"))
    }
}

fn run_dt_pp(cfg: &ScenarioConfig, streams: &Streams) -> Run {
    let sp = cfg.stable()?;
    let alpha = open_alpha(&sp)?;
    let w = cfg.window()?;
    let part = cfg.partition(&w)?;
    let scale = cfg.total_scale.unwrap_or(1.0);
    let mut reports = vec![battery::dt_pp_count_band(alpha, scale, &w, cfg.n, streams)?];
    for &t in &cfg.t_grid {
        reports.push(battery::dt_pp_stability_test(alpha, scale, &w, t, cfg.scale_alpha(alpha), &part, cfg.n, streams)?);
    }
    let samples = pp_cells(|r| dt_stable_pp_sample(alpha, scale, &w, r), &part, cfg.csv_rows, streams)?;
    Ok((reports, samples))
}

fn run_levy_probe(cfg: &ScenarioConfig, streams: &Streams) -> Run {
    let sp = cfg.stable()?;
    let alpha = open_alpha(&sp)?;
    let w = cfg.window()?;
    let part = cfg.partition(&w)?;
    let eps = cfg.epsilon.unwrap_or(0.25);
    let shapes: Vec<LevyShape> = match &cfg.levy_shapes {
        Some(v) => v.iter().map(|s| (s.weight, s.center.clone())).collect(),
        None => vec![(sp.c, vec![0.5; w.dim()])],
    };
    let mut reports = Vec::new();
    for &t in &cfg.t_grid {
        reports.push(battery::levy_probe_test(alpha, &shapes, eps, &w, t, cfg.scale_alpha(alpha), &part, cfg.n, streams)?);
    }
    let samples = pp_cells(
        |r| crate::processes::cox_sample(|q| crate::diffusion_branch::levy_radial_sample(alpha, &shapes, eps, &w, q), r),
        &part,
        cfg.csv_rows,
        streams,
    )?;
    Ok((reports, samples))
}

/// `(x, t, z)` triples for the transition Laplace check.
pub const FELLER_TRIPLES: [(f64, f64, f64); 5] =
    [(1.0, 1.0, 1.0), (2.0, 1.0, 0.5), (0.5, 0.3, 2.0), (1.0, std::f64::consts::LN_2, 1.0), (3.0, 2.0, 0.2)];

pub fn feller_laplace_band(p: &FellerParams, n: usize, streams: &Streams) -> Result<TestReport> {
    let mut est = Vec::new();
    let mut target = Vec::new();
    for (i, &(x, t, z)) in FELLER_TRIPLES.iter().enumerate() {
        let v = try_replicate(&streams.child(&format!("feller laplace {i}")), "z", n, |rng| {
            Ok::<_, Error>((-z * feller_transition_sample(p, x, t, rng)?).exp())
        })?;
        est.push(Estimate::from_samples(&v));
        target.push((-x * v_transform(p, t, z)?).exp());
    }
    Ok(transform_band_test(&est, &target)?.with_name("Feller transition Laplace transform"))
}

pub fn feller_mean_band(p: &FellerParams, n: usize, streams: &Streams) -> Result<TestReport> {
    let (x, t) = (2.0, 1.0);
    let v = try_replicate(&streams.child("feller mean"), "z", n, |rng| feller_transition_sample(p, x, t, rng))?;
    Ok(transform_band_test(&[Estimate::from_samples(&v)], &[x * (-t).exp()])?.with_name("Feller transition mean"))
}

/// `(Z_t | Z_t > 0)` from `x = 1` at `t = 10` against the Yaglom law.
pub fn feller_yaglom_test(p: &FellerParams, n: usize, streams: &Streams) -> Result<TestReport> {
    let s = streams.child("feller yaglom");
    let a = try_replicate(&s, "conditioned", n, |rng| feller_conditioned_sample(p, 1.0, 10.0, rng))?;
    let b = replicate(&s, "yaglom", n, |rng| yaglom_cb_sample(p, rng));
    Ok(two_sample_reals(&a, &b)?.with_name("Feller conditioned limit vs exponential"))
}

fn run_cb_feller(cfg: &ScenarioConfig, streams: &Streams) -> Run {
    let p = cfg.feller()?;
    let n = cfg.n;
    let mut reports =
        vec![feller_laplace_band(&p, n, streams)?, feller_mean_band(&p, n, streams)?, feller_yaglom_test(&p, n, streams)?];
    for &t in &cfg.t_grid {
        reports.push(thinning_identity_check(&p, t, n, &streams.child(&format!("thinning t={t}")))?);
    }
    let (t1, t2) = (0.5, 0.6);
    let s = streams.child("associativity");
    let a = try_replicate(&s, "nested", n, |rng| {
        let y = cb_mult(&p, t2, 1.0, rng)?;
        cb_mult(&p, t1, y, rng)
    })?;
    let b = try_replicate(&s, "direct", n, |rng| cb_mult(&p, t1 * t2, 1.0, rng))?;
    reports.push(two_sample_reals(&a, &b)?.with_name("V-multiplication associativity"));
    let s = streams.child("branching property");
    let a = try_replicate(&s, "joint", n, |rng| feller_transition_sample(&p, 1.5, 0.7, rng))?;
    let b = try_replicate(&s, "split", n, |rng| {
        Ok::<_, Error>(feller_transition_sample(&p, 0.5, 0.7, rng)? + feller_transition_sample(&p, 1.0, 0.7, rng)?)
    })?;
    reports.push(two_sample_reals(&a, &b)?.with_name("branching property"));
    let xs = try_replicate(&streams.child("csv"), "x", cfg.csv_rows, |rng| feller_transition_sample(&p, 1.0, 1.0, rng))?;
    Ok((reports, Samples::reals("z_1_from_1", &xs)))
}

fn run_cb_vstable(cfg: &ScenarioConfig, streams: &Streams) -> Run {
    let p = cfg.feller()?;
    let sp = cfg.stable()?;
    let mut reports = vec![battery::vstable_laplace_band(&p, &sp, cfg.n, streams)?];
    for &t in &cfg.t_grid {
        reports.push(battery::vstable_stability_test(&p, &sp, t, cfg.scale_alpha(sp.alpha), cfg.n, streams)?);
    }
    let xs = try_replicate(&streams.child("csv"), "x", cfg.csv_rows, |rng| vstable_sample(&p, &sp, rng))?;
    Ok((reports, Samples::reals("xi", &xs)))
}

fn run_cox_coupling(cfg: &ScenarioConfig, streams: &Streams) -> Run {
    let sg = cfg.semigroup()?;
    let p = cfg.feller()?;
    let sp = cfg.stable()?;
    let mut reports = Vec::new();
    for (i, &t) in cfg.t_grid.iter().enumerate() {
        let rs = cox_coupling_check(&sg, &p, &sp, t, cfg.n, &streams.child(&format!("coupling t={t}")))?;
        // the identity and p.g.f. checks do not depend on t
        if i == 0 {
            reports.extend(rs);
        } else {
            reports.extend(rs.into_iter().filter(|r| r.name.contains("F-stability")));
        }
    }
    let xs = try_replicate(&streams.child("csv"), "x", cfg.csv_rows, |rng| {
        Ok::<_, Error>(crate::laws::poisson(vstable_sample(&p, &sp, rng)?, rng))
    })?;
    Ok((reports, Samples::counts("count", &xs)))
}
