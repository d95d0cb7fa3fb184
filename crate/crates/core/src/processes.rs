//! Point configurations on boxes and tori, Poisson/Cox/cluster samplers and
//! Monte Carlo estimators of p.g.fl.s and Laplace functionals.
//!
//! A [`PointConfig`] holds explicit points with multiplicities plus
//! *uniform batches*: groups of sites that are i.i.d. uniform in a box and
//! have not been given coordinates yet. Heavy-tailed constructions can put
//! billions of points into one replicate, and every observable used here
//! (cell counts, products of a cell-wise test function) only needs to know
//! how many sites of each multiplicity fall into each cell, which is a
//! multinomial draw. Batches are realised into explicit points only when a
//! location-dependent operation (diffusion, CSV export) requires it.

use crate::error::{invalid, Error, Result};
use crate::laws::{convolution_power, poisson, UnitLaw};
use crate::numeric::{multinomial, Estimate};
use crate::rng::{try_replicate, SimRng, Streams};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};

pub type Count = u64;

/// Largest number of sites a single realisation may materialise.
pub const REALISE_CAP: u64 = 1 << 24;
/// Batch bins with more sites than this are transformed by one multinomial draw.
const BIN_LOOP_MAX: u64 = 64;
/// Multiplicities above this are never tabulated.
const TABULATE_MAX_MULT: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Box,
    Torus,
}

/// Rectangle `[0, side_1) x ... x [0, side_d)`, optionally with periodic boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub kind: WindowKind,
    pub sides: Vec<f64>,
}

impl Window {
    pub fn new(kind: WindowKind, sides: Vec<f64>) -> Result<Self> {
        if sides.is_empty() || sides.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("window needs at least one positive finite side length"));
        }
        Ok(Self { kind, sides })
    }

    pub fn unit_torus(dim: usize) -> Self {
        Self { kind: WindowKind::Torus, sides: vec![1.0; dim] }
    }

    pub fn unit_box(dim: usize) -> Self {
        Self { kind: WindowKind::Box, sides: vec![1.0; dim] }
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.kind, self.sides.clone()).map(|_| ())
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn volume(&self) -> f64 {
        self.sides.iter().product()
    }

    pub fn is_torus(&self) -> bool {
        self.kind == WindowKind::Torus
    }

    pub fn region(&self) -> Region {
        Region { lo: vec![0.0; self.dim()], hi: self.sides.clone() }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.sides).all(|(v, s)| *v >= 0.0 && v < s)
    }

    /// Reduces a point modulo the side lengths.
    pub fn wrap(&self, x: &mut [f64]) {
        for (v, s) in x.iter_mut().zip(&self.sides) {
            *v = v.rem_euclid(*s);
            if *v >= *s {
                *v = 0.0;
            }
        }
    }
}

/// Half-open box `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| {
                let v = a + (b - a) * rng.random::<f64>();
                if v >= *b {
                    *a
                } else {
                    v
                }
            })
            .collect()
    }
}

/// Regular rectangular grid over a window, cells in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    sides: Vec<f64>,
    shape: Vec<usize>,
}

impl Grid {
    pub fn new(window: &Window, shape: &[usize]) -> Result<Self> {
        if shape.len() != window.dim() || shape.iter().any(|&n| n == 0) {
            return Err(invalid(format!(
                "grid shape {shape:?} does not fit a {}-dimensional window",
                window.dim()
            )));
        }
        Ok(Self { sides: window.sides.clone(), shape: shape.to_vec() })
    }

    pub fn single(window: &Window) -> Self {
        Self { sides: window.sides.clone(), shape: vec![1; window.dim()] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_cells(&self) -> usize {
        self.shape.iter().product()
    }

    fn width(&self, d: usize) -> f64 {
        self.sides[d] / self.shape[d] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.shape.len()).map(|d| self.width(d)).product()
    }

    pub fn cell_of(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for d in 0..self.shape.len() {
            let i = ((x[d] / self.width(d)).floor().max(0.0) as usize).min(self.shape[d] - 1);
            idx = idx * self.shape[d] + i;
        }
        idx
    }

    pub fn cell_region(&self, mut idx: usize) -> Region {
        let dim = self.shape.len();
        let mut lo = vec![0.0; dim];
        let mut hi = vec![0.0; dim];
        for d in (0..dim).rev() {
            let i = idx % self.shape[d];
            idx /= self.shape[d];
            let w = self.width(d);
            lo[d] = i as f64 * w;
            hi[d] = if i + 1 == self.shape[d] { self.sides[d] } else { (i + 1) as f64 * w };
        }
        Region { lo, hi }
    }

    /// Cells meeting `region`, with the fraction of the region's volume in each.
    pub fn overlaps(&self, region: &Region) -> Vec<(usize, f64)> {
        let dim = self.shape.len();
        let mut per_dim: Vec<Vec<(usize, f64)>> = Vec::with_capacity(dim);
        for d in 0..dim {
            let w = self.width(d);
            let (lo, hi) = (region.lo[d], region.hi[d]);
            let len = hi - lo;
            let first = ((lo / w).floor().max(0.0) as usize).min(self.shape[d] - 1);
            let mut v = Vec::new();
            let mut i = first;
            while i < self.shape[d] {
                let a = i as f64 * w;
                if a >= hi {
                    break;
                }
                let b = if i + 1 == self.shape[d] { self.sides[d] } else { (i + 1) as f64 * w };
                let ov = b.min(hi) - a.max(lo);
                if ov > 0.0 {
                    v.push((i, ov / len));
                }
                i += 1;
            }
            per_dim.push(v);
        }
        let mut out = vec![(0usize, 1.0f64)];
        for (d, v) in per_dim.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * v.len());
            for &(idx, f) in &out {
                for &(i, g) in v {
                    next.push((idx * self.shape[d] + i, f * g));
                }
            }
            out = next;
        }
        out
    }
}

/// Piecewise-constant function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::LengthMismatch(values.len(), grid.n_cells()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid function values must be finite"));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(window: &Window, value: f64) -> Self {
        Self { grid: Grid::single(window), values: vec![value] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, x: &[f64]) -> f64 {
        self.values[self.grid.cell_of(x)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn try_map(&self, f: impl Fn(f64) -> Result<f64>) -> Result<GridFunction> {
        let values = self.values.iter().map(|&v| f(v)).collect::<Result<Vec<_>>>()?;
        Ok(GridFunction { grid: self.grid.clone(), values })
    }

    /// Average of the function over a box.
    pub fn mean_over(&self, region: &Region) -> f64 {
        self.grid.overlaps(region).iter().map(|&(c, f)| f * self.values[c]).sum()
    }

    /// Integral against Lebesgue measure over the whole window.
    pub fn lebesgue_integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }
}

/// Test function with values in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction(GridFunction);

impl TestFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
            return Err(invalid("test function values must lie in (0, 1]"));
        }
        Ok(Self(GridFunction::new(grid, values)?))
    }

    pub fn constant(window: &Window, value: f64) -> Result<Self> {
        Self::new(Grid::single(window), vec![value])
    }

    pub fn as_grid_function(&self) -> &GridFunction {
        &self.0
    }

    pub fn grid(&self) -> &Grid {
        self.0.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    /// Smallest box outside which the function equals 1; `None` if `h = 1`.
    pub fn support(&self) -> Option<Region> {
        let grid = self.grid();
        let mut out: Option<Region> = None;
        for (i, &v) in self.values().iter().enumerate() {
            if v < 1.0 {
                let r = grid.cell_region(i);
                out = Some(match out {
                    None => r,
                    Some(o) => Region {
                        lo: o.lo.iter().zip(&r.lo).map(|(a, b)| a.min(*b)).collect(),
                        hi: o.hi.iter().zip(&r.hi).map(|(a, b)| a.max(*b)).collect(),
                    },
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Vec<f64>,
    pub mass: f64,
}

/// Finite measure: atoms plus a piecewise-constant density.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMeasure {
    window: Window,
    atoms: Vec<Atom>,
    density: Option<GridFunction>,
}

/// Serialisable form of [`IntensityMeasure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensitySpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub density: Option<DensitySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl IntensityMeasure {
    pub fn new(window: &Window, atoms: Vec<Atom>, density: Option<GridFunction>) -> Result<Self> {
        for a in &atoms {
            if !window.contains(&a.location) {
                return Err(invalid(format!("atom at {:?} lies outside the window", a.location)));
            }
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(invalid(format!("atom mass must be positive, got {}", a.mass)));
            }
        }
        if let Some(d) = &density {
            if d.grid().sides != window.sides {
                return Err(invalid("density grid does not cover the window"));
            }
            if !d.is_nonnegative() {
                return Err(invalid("density must be non-negative"));
            }
        }
        Ok(Self { window: window.clone(), atoms, density })
    }

    pub fn from_spec(window: &Window, spec: &IntensitySpec) -> Result<Self> {
        let density = match &spec.density {
            None => None,
            Some(d) => Some(GridFunction::new(Grid::new(window, &d.shape)?, d.values.clone())?),
        };
        Self::new(window, spec.atoms.clone(), density)
    }

    pub fn zero(window: &Window) -> Self {
        Self { window: window.clone(), atoms: Vec::new(), density: None }
    }

    /// Uniform density with the given total mass.
    pub fn uniform(window: &Window, total: f64) -> Result<Self> {
        if !(total >= 0.0 && total.is_finite()) {
            return Err(invalid(format!("total mass must be non-negative, got {total}")));
        }
        let d = GridFunction::constant(window, total / window.volume());
        Self::new(window, Vec::new(), Some(d))
    }

    pub fn atom(window: &Window, location: Vec<f64>, mass: f64) -> Result<Self> {
        Self::new(window, vec![Atom { location, mass }], None)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&GridFunction> {
        self.density.as_ref()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            window: self.window.clone(),
            atoms: self.atoms.iter().map(|a| Atom { location: a.location.clone(), mass: a.mass * c }).collect(),
            density: self.density.as_ref().map(|d| d.map(|v| v * c)),
        }
    }

    fn cell_masses(&self) -> Vec<f64> {
        match &self.density {
            None => Vec::new(),
            Some(d) => {
                let vol = d.grid().cell_volume();
                d.values().iter().map(|v| v * vol).collect()
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.cell_masses().iter().sum::<f64>()
    }

    /// `<u, mu>` for a cell function `u`.
    pub fn integrate(&self, u: &GridFunction) -> f64 {
        let mut acc: f64 = self.atoms.iter().map(|a| a.mass * u.at(&a.location)).sum();
        if let Some(d) = &self.density {
            let g = d.grid();
            let vol = g.cell_volume();
            for (c, &v) in d.values().iter().enumerate() {
                if v > 0.0 {
                    acc += v * vol * u.mean_over(&g.cell_region(c));
                }
            }
        }
        acc
    }

    /// Poisson process with this intensity.
    pub fn poisson<R: Rng + ?Sized>(&self, rng: &mut R) -> PointConfig {
        let mut cfg = PointConfig::null(&self.window);
        for a in &self.atoms {
            let n = poisson(a.mass, rng);
            if n > 0 {
                cfg.points.push(Point { loc: a.location.clone(), mult: n });
            }
        }
        if let Some(d) = &self.density {
            let g = d.grid();
            for (c, m) in self.cell_masses().into_iter().enumerate() {
                let n = poisson(m, rng);
                cfg.push_batch(g.cell_region(c), 1, n);
            }
        }
        cfg
    }

    /// `count` points drawn i.i.d. from the normalised measure.
    pub fn scatter<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> Result<PointConfig> {
        let mut cfg = PointConfig::null(&self.window);
        if count == 0 {
            return Ok(cfg);
        }
        let cells = self.cell_masses();
        let weights: Vec<f64> = self.atoms.iter().map(|a| a.mass).chain(cells.iter().copied()).collect();
        if !(weights.iter().sum::<f64>() > 0.0) {
            return Err(Error::ZeroMeasure);
        }
        let split = multinomial(count, &weights, rng);
        let na = self.atoms.len();
        for (i, a) in self.atoms.iter().enumerate() {
            if split[i] > 0 {
                cfg.points.push(Point { loc: a.location.clone(), mult: split[i] });
            }
        }
        if let Some(d) = &self.density {
            for (c, &n) in split[na..].iter().enumerate() {
                cfg.push_batch(d.grid().cell_region(c), 1, n);
            }
        }
        Ok(cfg)
    }
}

/// Random-measure values that can drive a Cox process.
pub trait Intensity {
    fn integrate_fn(&self, u: &GridFunction) -> Result<f64>;
    fn sample_poisson(&self, rng: &mut SimRng) -> Result<PointConfig>;
}

impl Intensity for IntensityMeasure {
    fn integrate_fn(&self, u: &GridFunction) -> Result<f64> {
        Ok(self.integrate(u))
    }

    fn sample_poisson(&self, rng: &mut SimRng) -> Result<PointConfig> {
        Ok(self.poisson(rng))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub loc: Vec<f64>,
    pub mult: u64,
}

/// Sites i.i.d. uniform in `region`, grouped by multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBatch {
    pub region: Region,
    /// multiplicity -> number of sites
    pub sites: BTreeMap<u64, u64>,
}

impl UniformBatch {
    pub fn total(&self) -> u64 {
        self.sites.iter().fold(0u64, |acc, (&m, &s)| acc.saturating_add(m.saturating_mul(s)))
    }

    pub fn n_sites(&self) -> u64 {
        self.sites.values().fold(0u64, |a, &s| a.saturating_add(s))
    }
}

/// Finite counting measure on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    window: Window,
    points: Vec<Point>,
    batches: Vec<UniformBatch>,
}

impl PointConfig {
    pub fn null(window: &Window) -> Self {
        Self { window: window.clone(), points: Vec::new(), batches: Vec::new() }
    }

    pub fn from_points(window: &Window, pts: Vec<(Vec<f64>, u64)>) -> Result<Self> {
        let mut cfg = Self::null(window);
        for (loc, mult) in pts {
            cfg.push_point(loc, mult)?;
        }
        Ok(cfg)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn batches(&self) -> &[UniformBatch] {
        &self.batches
    }

    pub fn push_point(&mut self, loc: Vec<f64>, mult: u64) -> Result<()> {
        if !self.window.contains(&loc) {
            return Err(invalid(format!("point {loc:?} lies outside the window")));
        }
        if mult > 0 {
            self.points.push(Point { loc, mult });
        }
        Ok(())
    }

    /// Adds `sites` sites of multiplicity `mult`, uniform in `region`.
    pub fn push_batch(&mut self, region: Region, mult: u64, sites: u64) {
        if mult == 0 || sites == 0 {
            return;
        }
        if let Some(b) = self.batches.iter_mut().find(|b| b.region == region) {
            let e = b.sites.entry(mult).or_insert(0);
            *e = e.saturating_add(sites);
        } else {
            self.batches.push(UniformBatch { region, sites: BTreeMap::from([(mult, sites)]) });
        }
    }

    /// Total multiplicity (saturating).
    pub fn total(&self) -> u64 {
        let p = self.points.iter().fold(0u64, |a, p| a.saturating_add(p.mult));
        self.batches.iter().fold(p, |a, b| a.saturating_add(b.total()))
    }

    pub fn n_sites(&self) -> u64 {
        self.batches.iter().fold(self.points.len() as u64, |a, b| a.saturating_add(b.n_sites()))
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.batches.is_empty()
    }

    pub fn superpose(&mut self, other: PointConfig) {
        self.points.extend(other.points);
        for b in other.batches {
            for (m, s) in b.sites {
                self.push_batch(b.region.clone(), m, s);
            }
        }
    }

    /// Replaces every unit of multiplicity by an independent `law` draw at
    /// the same site.
    pub fn map_units<R: Rng + ?Sized>(&self, law: &UnitLaw, rng: &mut R) -> PointConfig {
        if law.is_identity() {
            return self.clone();
        }
        let mut out = PointConfig::null(&self.window);
        for p in &self.points {
            let m = law.sample_sum(p.mult, rng);
            if m > 0 {
                out.points.push(Point { loc: p.loc.clone(), mult: m });
            }
        }
        let unit_pmf = law.pmf();
        for b in &self.batches {
            let mut sites: BTreeMap<u64, u64> = BTreeMap::new();
            let mut add = |m: u64, n: u64| {
                if m > 0 && n > 0 {
                    let e = sites.entry(m).or_insert(0);
                    *e = e.saturating_add(n);
                }
            };
            for (&m, &s) in &b.sites {
                if s <= BIN_LOOP_MAX || m > TABULATE_MAX_MULT {
                    for _ in 0..s {
                        add(law.sample_sum(m, rng), 1);
                    }
                } else {
                    let pmf = if m == 1 { unit_pmf.clone() } else { convolution_power(&unit_pmf, m) };
                    for (k, n) in multinomial(s, &pmf, rng).into_iter().enumerate() {
                        add(k as u64, n);
                    }
                }
            }
            if !sites.is_empty() {
                out.batches.push(UniformBatch { region: b.region.clone(), sites });
            }
        }
        out
    }

    /// Independent Bernoulli(t) retention of every unit.
    pub fn thin<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<PointConfig> {
        crate::error::check_unit_closed("thinning parameter", t)?;
        Ok(self.map_units(&UnitLaw::Bernoulli(t), rng))
    }

    /// Gives every batched site explicit coordinates.
    pub fn realise<R: Rng + ?Sized>(&self, rng: &mut R, cap: u64) -> Result<PointConfig> {
        let n = self.n_sites();
        if n > cap {
            return Err(Error::TooLarge { units: n, cap });
        }
        let mut out = PointConfig { window: self.window.clone(), points: self.points.clone(), batches: Vec::new() };
        for b in &self.batches {
            for (&m, &s) in &b.sites {
                for _ in 0..s {
                    out.points.push(Point { loc: b.region.sample(rng), mult: m });
                }
            }
        }
        Ok(out)
    }

    /// Total multiplicity in each cell of `grid`.
    pub fn cell_counts<R: Rng + ?Sized>(&self, grid: &Grid, rng: &mut R) -> Result<Vec<u64>> {
        if grid.sides != self.window.sides {
            return Err(invalid("grid does not match the configuration window"));
        }
        let mut counts = vec![0u64; grid.n_cells()];
        for p in &self.points {
            let c = grid.cell_of(&p.loc);
            counts[c] = counts[c].saturating_add(p.mult);
        }
        for b in &self.batches {
            let ov = grid.overlaps(&b.region);
            let fracs: Vec<f64> = ov.iter().map(|&(_, f)| f).collect();
            for (&m, &s) in &b.sites {
                let split = if ov.len() == 1 { vec![s] } else { multinomial(s, &fracs, rng) };
                for (&(c, _), n) in ov.iter().zip(split) {
                    counts[c] = counts[c].saturating_add(n.saturating_mul(m));
                }
            }
        }
        Ok(counts)
    }

    /// `<log h, phi>`.
    pub fn log_pgfl<R: Rng + ?Sized>(&self, h: &TestFunction, rng: &mut R) -> f64 {
        let grid = h.grid();
        let logs: Vec<f64> = h.values().iter().map(|v| v.ln()).collect();
        let mut acc = 0.0;
        for p in &self.points {
            acc += p.mult as f64 * logs[grid.cell_of(&p.loc)];
        }
        for b in &self.batches {
            let ov = grid.overlaps(&b.region);
            let first = logs[ov[0].0];
            if ov.iter().all(|&(c, _)| logs[c] == first) {
                acc += b.total() as f64 * first;
                continue;
            }
            let fracs: Vec<f64> = ov.iter().map(|&(_, f)| f).collect();
            for (&m, &s) in &b.sites {
                for (&(c, _), n) in ov.iter().zip(multinomial(s, &fracs, rng)) {
                    acc += (n as f64) * (m as f64) * logs[c];
                }
            }
        }
        acc
    }

    /// `prod h(x)^{mult}`.
    pub fn pgfl_term<R: Rng + ?Sized>(&self, h: &TestFunction, rng: &mut R) -> f64 {
        self.log_pgfl(h, rng).exp()
    }

    /// Writes explicit points as CSV rows `x_1, ..., x_d, multiplicity`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        if !self.batches.is_empty() {
            return Err(invalid("realise the configuration before exporting it"));
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.window.dim()).map(|i| format!("x{i}")).collect();
        header.push("multiplicity".into());
        w.write_record(&header)?;
        for p in &self.points {
            let mut row: Vec<String> = p.loc.iter().map(|v| format!("{v:?}")).collect();
            row.push(p.mult.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<Rd: Read>(window: &Window, input: Rd) -> Result<PointConfig> {
        let mut r = csv::Reader::from_reader(input);
        let mut cfg = PointConfig::null(window);
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != window.dim() + 1 {
                return Err(invalid(format!("CSV row has {} fields, expected {}", rec.len(), window.dim() + 1)));
            }
            let loc = (0..window.dim())
                .map(|i| rec[i].trim().parse::<f64>().map_err(|e| invalid(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let mult: u64 = rec[window.dim()].trim().parse().map_err(|e| invalid(format!("{e}")))?;
            if mult == 0 {
                return Err(invalid("multiplicities must be positive"));
            }
            cfg.push_point(loc, mult)?;
        }
        Ok(cfg)
    }
}

/// Poisson process with intensity `mu`.
pub fn poisson_sample<R: Rng + ?Sized>(mu: &IntensityMeasure, rng: &mut R) -> PointConfig {
    mu.poisson(rng)
}

/// Two-stage Cox sample: draw the driving measure, then a Poisson process.
pub fn cox_sample<M, F>(measure_sampler: F, rng: &mut SimRng) -> Result<PointConfig>
where
    M: Intensity,
    F: FnOnce(&mut SimRng) -> Result<M>,
{
    let xi = measure_sampler(rng)?;
    xi.sample_poisson(rng)
}

/// One independent component per unit of centre multiplicity, superposed.
pub fn cluster_compose<F>(center: &PointConfig, mut component: F, rng: &mut SimRng) -> Result<PointConfig>
where
    F: FnMut(&[f64], &mut SimRng) -> Result<PointConfig>,
{
    let centre = center.realise(rng, REALISE_CAP)?;
    let mut out = PointConfig::null(&center.window);
    for p in &centre.points {
        for _ in 0..p.mult {
            out.superpose(component(&p.loc, rng)?);
        }
    }
    Ok(out)
}

pub const MIN_ESTIMATOR_REPLICATES: usize = 1000;

/// Monte Carlo estimate of `G[h] = E prod h(x)`.
pub fn empirical_pgfl<F>(sampler: F, h: &TestFunction, n: usize, streams: &Streams) -> Result<Estimate>
where
    F: Fn(&mut SimRng) -> Result<PointConfig> + Sync,
{
    if n < MIN_ESTIMATOR_REPLICATES {
        return Err(Error::InsufficientSamples { needed: MIN_ESTIMATOR_REPLICATES, got: n });
    }
    let vals = try_replicate(streams, "empirical-pgfl", n, |rng| {
        let cfg = sampler(rng)?;
        Ok::<_, Error>(cfg.pgfl_term(h, rng))
    })?;
    Ok(Estimate::from_samples(&vals))
}

/// Monte Carlo estimate of `L[u] = E exp(-<u, xi>)`.
pub fn empirical_laplace<M, F>(sampler: F, u: &GridFunction, n: usize, streams: &Streams) -> Result<Estimate>
where
    M: Intensity,
    F: Fn(&mut SimRng) -> Result<M> + Sync,
{
    if n < MIN_ESTIMATOR_REPLICATES {
        return Err(Error::InsufficientSamples { needed: MIN_ESTIMATOR_REPLICATES, got: n });
    }
    if !u.is_nonnegative() {
        return Err(invalid("Laplace functional needs a non-negative function"));
    }
    let vals = try_replicate(streams, "empirical-laplace", n, |rng| {
        let xi = sampler(rng)?;
        Ok::<_, Error>((-xi.integrate_fn(u)?).exp())
    })?;
    Ok(Estimate::from_samples(&vals))
}
