//! Diffusion and thinning-diffusion on torus configurations, the measure
//! operation `t ⊙_dt mu = t P*_{-ln t} mu` on wrapped-Gaussian mixtures, the
//! radial/shape decomposition, and `⊙_dt`-stable random measures.
//!
//! The heat kernel uses per-coordinate variance `-ln t`, so variances add
//! under composition and the uniform density is an exact fixed shape.

use crate::error::{check_unit_open_left, invalid, Error, Result};
use crate::laws::{binomial, poisson};
use crate::numeric::norm_cdf;
use crate::processes::{cox_sample, GridFunction, Intensity, PointConfig, Window, REALISE_CAP};
use crate::rng::SimRng;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ROUND_TRIP_TOL: f64 = 1e-12;

/// `mass * nu_v(. - center)`; `variance == 0` is an atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussComponent {
    pub mass: f64,
    pub variance: f64,
    pub center: Vec<f64>,
}

/// Serialisable form of [`GaussMixMeasure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussMixSpec {
    #[serde(default)]
    pub components: Vec<GaussComponent>,
    #[serde(default)]
    pub uniform_mass: f64,
}

/// Finite mixture of wrapped Gaussians and atoms on a torus, plus a
/// uniform part (the infinite-variance limit).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussMixMeasure {
    window: Window,
    components: Vec<GaussComponent>,
    uniform_mass: f64,
}

impl GaussMixMeasure {
    pub fn new(window: &Window, components: Vec<GaussComponent>, uniform_mass: f64) -> Result<Self> {
        window.validate()?;
        if !window.is_torus() {
            return Err(Error::NotTorus);
        }
        for c in &components {
            if !(c.mass > 0.0 && c.mass.is_finite()) {
                return Err(invalid(format!("component mass must be positive, got {}", c.mass)));
            }
            if !(c.variance >= 0.0 && c.variance.is_finite()) {
                return Err(invalid(format!("component variance must be finite and >= 0, got {}", c.variance)));
            }
            if !window.contains(&c.center) {
                return Err(invalid(format!("center {:?} lies outside the window", c.center)));
            }
        }
        if !(uniform_mass >= 0.0 && uniform_mass.is_finite()) {
            return Err(invalid(format!("uniform mass must be finite and >= 0, got {uniform_mass}")));
        }
        Ok(Self { window: window.clone(), components, uniform_mass })
    }

    pub fn from_spec(window: &Window, spec: &GaussMixSpec) -> Result<Self> {
        Self::new(window, spec.components.clone(), spec.uniform_mass)
    }

    pub fn to_spec(&self) -> GaussMixSpec {
        GaussMixSpec { components: self.components.clone(), uniform_mass: self.uniform_mass }
    }

    pub fn zero(window: &Window) -> Result<Self> {
        Self::new(window, Vec::new(), 0.0)
    }

    pub fn atom(window: &Window, center: Vec<f64>, mass: f64) -> Result<Self> {
        Self::new(window, vec![GaussComponent { mass, variance: 0.0, center }], 0.0)
    }

    pub fn uniform(window: &Window, mass: f64) -> Result<Self> {
        Self::new(window, Vec::new(), mass)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn components(&self) -> &[GaussComponent] {
        &self.components
    }

    pub fn uniform_mass(&self) -> f64 {
        self.uniform_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.uniform_mass + self.components.iter().map(|c| c.mass).sum::<f64>()
    }

    /// Sum of two measures on the same torus.
    pub fn superpose(&mut self, other: GaussMixMeasure) -> Result<()> {
        if other.window != self.window {
            return Err(invalid("measures live on different windows"));
        }
        self.components.extend(other.components);
        self.uniform_mass += other.uniform_mass;
        Ok(())
    }

    /// Component-wise comparison within `tol` (absolute on masses,
    /// variances and centres).
    pub fn approx_eq(&self, other: &GaussMixMeasure, tol: f64) -> bool {
        self.window == other.window
            && self.components.len() == other.components.len()
            && (self.uniform_mass - other.uniform_mass).abs() <= tol
            && self.components.iter().zip(&other.components).all(|(a, b)| {
                (a.mass - b.mass).abs() <= tol
                    && (a.variance - b.variance).abs() <= tol
                    && a.center.iter().zip(&b.center).all(|(x, y)| (x - y).abs() <= tol)
            })
    }

    fn component_integral(&self, c: &GaussComponent, u: &GridFunction) -> f64 {
        if c.variance == 0.0 {
            return c.mass * u.at(&c.center);
        }
        let g = u.grid();
        let sd = c.variance.sqrt();
        let dim = self.window.dim();
        let mut acc = 0.0;
        for (cell, &val) in u.values().iter().enumerate() {
            if val == 0.0 {
                continue;
            }
            let r = g.cell_region(cell);
            let mut p = 1.0;
            for d in 0..dim {
                p *= wrapped_interval_prob(r.lo[d], r.hi[d], c.center[d], sd, self.window.sides[d]);
            }
            acc += val * p;
        }
        c.mass * acc
    }
}

/// `P(lo <= X mod L < hi)` for `X ~ N(m, sd^2)`: image sum for narrow
/// kernels, Fourier series for wide ones.
pub fn wrapped_interval_prob(lo: f64, hi: f64, m: f64, sd: f64, period: f64) -> f64 {
    let p = if sd > 0.25 * period {
        let decay = -2.0 * (PI * sd / period).powi(2);
        let mut p = (hi - lo) / period;
        for k in 1..=64 {
            let k = k as f64;
            let damp = (decay * k * k).exp();
            if damp < 1e-18 {
                break;
            }
            let w = 2.0 * PI * k / period;
            p += damp / (PI * k) * ((w * (hi - m)).sin() - (w * (lo - m)).sin());
        }
        p
    } else {
        let k = (8.0 * sd / period).ceil() as i64 + 1;
        let mut p = 0.0;
        for j in -k..=k {
            let shift = j as f64 * period - m;
            p += norm_cdf((hi + shift) / sd) - norm_cdf((lo + shift) / sd);
        }
        p
    };
    p.clamp(0.0, 1.0)
}

impl Intensity for GaussMixMeasure {
    fn integrate_fn(&self, u: &GridFunction) -> Result<f64> {
        if u.grid().shape().len() != self.window.dim() {
            return Err(invalid("function grid does not match the torus"));
        }
        let mut acc = self.uniform_mass * u.lebesgue_integral() / self.window.volume();
        for c in &self.components {
            acc += self.component_integral(c, u);
        }
        Ok(acc)
    }

    fn sample_poisson(&self, rng: &mut SimRng) -> Result<PointConfig> {
        let mut out = PointConfig::null(&self.window);
        out.push_batch(self.window.region(), 1, poisson(self.uniform_mass, rng));
        let mut realised = 0u64;
        for c in &self.components {
            let n = poisson(c.mass, rng);
            if c.variance == 0.0 {
                out.push_point(c.center.clone(), n)?;
                continue;
            }
            realised = realised.saturating_add(n);
            if realised > REALISE_CAP {
                return Err(Error::TooLarge { units: realised, cap: REALISE_CAP });
            }
            let sd = c.variance.sqrt();
            for _ in 0..n {
                out.push_point(displaced(&self.window, &c.center, sd, rng), 1)?;
            }
        }
        Ok(out)
    }
}

fn displaced<R: Rng + ?Sized>(window: &Window, x: &[f64], sd: f64, rng: &mut R) -> Vec<f64> {
    let mut y: Vec<f64> = x
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v + sd * z
        })
        .collect();
    window.wrap(&mut y);
    y
}

/// Keeps each unit with probability `survive`, then displaces it with
/// per-coordinate variance `variance`. Whole-torus uniform batches stay
/// batched since uniform positions are invariant under the displacement.
fn move_units<R: Rng + ?Sized>(phi: &PointConfig, survive: f64, variance: f64, rng: &mut R) -> Result<PointConfig> {
    let window = phi.window();
    if !window.is_torus() {
        return Err(Error::NotTorus);
    }
    let sd = variance.sqrt();
    let whole = window.region();
    let mut out = PointConfig::null(window);
    let mut realised = 0u64;
    let mut budget = |n: u64| -> Result<()> {
        realised = realised.saturating_add(n);
        if realised > REALISE_CAP {
            Err(Error::TooLarge { units: realised, cap: REALISE_CAP })
        } else {
            Ok(())
        }
    };
    for p in phi.points() {
        let k = binomial(p.mult, survive, rng);
        budget(k)?;
        for _ in 0..k {
            out.push_point(displaced(window, &p.loc, sd, rng), 1)?;
        }
    }
    for b in phi.batches() {
        for (&m, &s) in &b.sites {
            if b.region == whole {
                let units = binomial(m.saturating_mul(s), survive, rng);
                out.push_batch(whole.clone(), 1, units);
                continue;
            }
            budget(s)?;
            for _ in 0..s {
                let loc = b.region.sample(rng);
                let k = binomial(m, survive, rng);
                budget(k)?;
                for _ in 0..k {
                    out.push_point(displaced(window, &loc, sd, rng), 1)?;
                }
            }
        }
    }
    Ok(out)
}

/// `t •_d phi`: every unit moves by an independent wrapped Gaussian.
pub fn diffuse_config<R: Rng + ?Sized>(t: f64, phi: &PointConfig, rng: &mut R) -> Result<PointConfig> {
    check_unit_open_left("diffusion parameter", t)?;
    if !phi.window().is_torus() {
        return Err(Error::NotTorus);
    }
    if t == 1.0 {
        return Ok(phi.clone());
    }
    move_units(phi, 1.0, -t.ln(), rng)
}

/// `t •_dt phi`: every unit survives with probability `t`, then moves.
pub fn thin_diffuse_config<R: Rng + ?Sized>(t: f64, phi: &PointConfig, rng: &mut R) -> Result<PointConfig> {
    check_unit_open_left("thinning-diffusion parameter", t)?;
    if !phi.window().is_torus() {
        return Err(Error::NotTorus);
    }
    if t == 1.0 {
        return Ok(phi.clone());
    }
    move_units(phi, t, -t.ln(), rng)
}

/// `t ⊙_dt mu`: masses times `t`, variances plus `-ln t`.
pub fn measure_op_dt(t: f64, mu: &GaussMixMeasure) -> Result<GaussMixMeasure> {
    check_unit_open_left("measure operation parameter", t)?;
    let dv = -t.ln();
    let components = mu
        .components
        .iter()
        .map(|c| GaussComponent { mass: c.mass * t, variance: c.variance + dv, center: c.center.clone() })
        .collect();
    GaussMixMeasure::new(&mu.window, components, mu.uniform_mass * t)
}

/// `mu = radial ⊙_dt shape` with `shape` irreducible.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialShapeDecomp {
    pub radial: f64,
    pub shape: GaussMixMeasure,
}

impl RadialShapeDecomp {
    pub fn compose(&self) -> Result<GaussMixMeasure> {
        measure_op_dt(self.radial, &self.shape)
    }
}

/// Extracts the largest common heat-kernel factor.
pub fn spectral_decompose(mu: &GaussMixMeasure) -> Result<RadialShapeDecomp> {
    if mu.total_mass() == 0.0 {
        return Err(Error::ZeroMeasure);
    }
    let Some(v_min) = mu.components.iter().map(|c| c.variance).min_by(f64::total_cmp) else {
        return Err(invalid("a purely uniform measure has no irreducible shape"));
    };
    let radial = (-v_min).exp();
    let components = mu
        .components
        .iter()
        .map(|c| GaussComponent {
            mass: c.mass / radial,
            variance: if c.variance == v_min { 0.0 } else { c.variance - v_min },
            center: c.center.clone(),
        })
        .collect();
    let shape = GaussMixMeasure::new(&mu.window, components, mu.uniform_mass / radial)?;
    let d = RadialShapeDecomp { radial, shape };
    if !d.compose()?.approx_eq(mu, ROUND_TRIP_TOL * mu.total_mass().max(1.0)) {
        return Err(Error::Numerical { what: "radial/shape round trip", achieved: f64::NAN });
    }
    Ok(d)
}

fn check_open_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

/// Positive stable variable with Laplace transform `exp(-z^alpha)`
/// (Kanter's representation).
pub fn one_sided_stable_sample<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    check_open_alpha(alpha)?;
    let u = loop {
        let u = PI * rng.random::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let e: f64 = Exp1.sample(rng);
    let log_a = (alpha * (alpha * u).sin().ln() + (1.0 - alpha) * ((1.0 - alpha) * u).sin().ln() - u.sin().ln())
        / (1.0 - alpha);
    Ok(((1.0 - alpha) / alpha * (log_a - e.ln())).exp())
}

/// `total_scale * S * Lebesgue` on the torus, `S` one-sided stable.
pub fn stable_measure_sample<R: Rng + ?Sized>(
    alpha: f64,
    total_scale: f64,
    window: &Window,
    rng: &mut R,
) -> Result<GaussMixMeasure> {
    if !(total_scale > 0.0 && total_scale.is_finite()) {
        return Err(invalid(format!("scale must be positive, got {total_scale}")));
    }
    let s = one_sided_stable_sample(alpha, rng)?;
    GaussMixMeasure::uniform(window, total_scale * s * window.volume())
}

/// Cox process driven by [`stable_measure_sample`].
pub fn dt_stable_pp_sample(alpha: f64, total_scale: f64, window: &Window, rng: &mut SimRng) -> Result<PointConfig> {
    cox_sample(|r| stable_measure_sample(alpha, total_scale, window, r), rng)
}

/// Radial draw from `theta_alpha` normalised to `(eps, 1]`.
pub fn levy_radial_draw<R: Rng + ?Sized>(alpha: f64, epsilon: f64, rng: &mut R) -> f64 {
    let top = epsilon.powf(-alpha);
    let u: f64 = rng.random();
    (top - u * (top - 1.0)).powf(-1.0 / alpha)
}

/// Expected mass, per unit weight, of the atoms dropped below `epsilon`.
pub fn levy_truncated_mass(alpha: f64, epsilon: f64) -> f64 {
    alpha * epsilon.powf(1.0 - alpha) / (1.0 - alpha)
}

/// Poisson sample of `theta_alpha ⊗ sigma` restricted to radial `(eps, 1]`,
/// mapped to the measure `sum t ⊙_dt delta_center`.
pub fn levy_radial_sample<R: Rng + ?Sized>(
    alpha: f64,
    sigma_shapes: &[(f64, Vec<f64>)],
    epsilon: f64,
    window: &Window,
    rng: &mut R,
) -> Result<GaussMixMeasure> {
    check_open_alpha(alpha)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("truncation must lie in (0,1), got {epsilon}")));
    }
    let rate = epsilon.powf(-alpha) - 1.0;
    let mut components = Vec::new();
    for (w, center) in sigma_shapes {
        if !(*w > 0.0 && w.is_finite()) {
            return Err(invalid(format!("shape weight must be positive, got {w}")));
        }
        for _ in 0..poisson(w * rate, rng) {
            let t = levy_radial_draw(alpha, epsilon, rng);
            components.push(GaussComponent { mass: t, variance: -t.ln(), center: center.clone() });
        }
    }
    GaussMixMeasure::new(window, components, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{Grid, WindowKind};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus() -> Window {
        Window::unit_torus(2)
    }

    #[test]
    fn wrapped_probabilities_sum_to_one() {
        for sd in [0.01, 0.2, 1.0, 20.0] {
            let p: f64 = (0..5).map(|i| wrapped_interval_prob(i as f64 * 0.2, (i + 1) as f64 * 0.2, 0.93, sd, 1.0)).sum();
            assert_relative_eq!(p, 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(wrapped_interval_prob(0.0, 0.5, 0.25, 0.01, 1.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn measure_op_examples() {
        let w = torus();
        let d = GaussMixMeasure::atom(&w, vec![0.3, 0.6], 1.0).unwrap();
        assert_eq!(measure_op_dt(1.0, &d).unwrap(), d);
        let t = 0.4;
        let m = measure_op_dt(t, &d).unwrap();
        assert_relative_eq!(m.components()[0].mass, t);
        assert_relative_eq!(m.components()[0].variance, -t.ln());
        let u = GaussMixMeasure::uniform(&w, 2.0).unwrap();
        assert_relative_eq!(measure_op_dt(t, &u).unwrap().uniform_mass(), 0.8);
        assert!(matches!(measure_op_dt(0.0, &d), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn measure_op_is_associative() {
        let w = torus();
        let mu = GaussMixMeasure::new(
            &w,
            vec![
                GaussComponent { mass: 0.7, variance: 0.0, center: vec![0.1, 0.2] },
                GaussComponent { mass: 1.3, variance: 0.4, center: vec![0.8, 0.5] },
            ],
            0.25,
        )
        .unwrap();
        for (a, b) in [(0.3, 0.9), (0.5, 0.5), (0.99, 0.01)] {
            let lhs = measure_op_dt(a, &measure_op_dt(b, &mu).unwrap()).unwrap();
            let rhs = measure_op_dt(a * b, &mu).unwrap();
            assert!(lhs.approx_eq(&rhs, 1e-12));
        }
    }

    #[test]
    fn decomposition_examples() {
        let w = torus();
        let d = GaussMixMeasure::atom(&w, vec![0.5, 0.5], 2.0).unwrap();
        let r = spectral_decompose(&d).unwrap();
        assert_eq!(r.radial, 1.0);
        assert_eq!(r.shape, d);

        let shaped = measure_op_dt(0.4, &GaussMixMeasure::atom(&w, vec![0.2, 0.7], 1.0).unwrap()).unwrap();
        let r = spectral_decompose(&shaped).unwrap();
        assert_relative_eq!(r.radial, 0.4, epsilon = 1e-15);
        assert_relative_eq!(r.shape.components()[0].mass, 1.0, epsilon = 1e-15);
        assert_eq!(r.shape.components()[0].variance, 0.0);

        let (m1, m2) = (vec![0.1, 0.1], vec![0.6, 0.3]);
        let mix = GaussMixMeasure::new(
            &w,
            vec![
                GaussComponent { mass: 0.5, variance: -0.5f64.ln(), center: m1 },
                GaussComponent { mass: 0.3, variance: -0.6f64.ln(), center: m2 },
            ],
            0.0,
        )
        .unwrap();
        let r = spectral_decompose(&mix).unwrap();
        assert_relative_eq!(r.radial, 0.6, epsilon = 1e-15);
        let s = r.shape.components();
        assert_relative_eq!(s[0].mass, 0.5 / 0.6, epsilon = 1e-15);
        assert_relative_eq!(s[0].variance, -0.5f64.ln() + 0.6f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(s[1].mass, 0.5, epsilon = 1e-15);
        assert_eq!(s[1].variance, 0.0);

        assert!(matches!(spectral_decompose(&GaussMixMeasure::zero(&w).unwrap()), Err(Error::ZeroMeasure)));
        assert!(spectral_decompose(&GaussMixMeasure::uniform(&w, 1.0).unwrap()).is_err());
    }

    #[test]
    fn box_window_is_rejected() {
        let b = Window::new(WindowKind::Box, vec![1.0]).unwrap();
        let phi = PointConfig::from_points(&b, vec![(vec![0.5], 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(diffuse_config(0.5, &phi, &mut rng), Err(Error::NotTorus)));
        assert!(matches!(thin_diffuse_config(0.5, &phi, &mut rng), Err(Error::NotTorus)));
        assert!(matches!(GaussMixMeasure::zero(&b), Err(Error::NotTorus)));
    }

    #[test]
    fn diffusion_preserves_total() {
        let w = torus();
        let mut phi = PointConfig::from_points(&w, vec![(vec![0.5, 0.5], 7), (vec![0.1, 0.9], 2)]).unwrap();
        phi.push_batch(w.region(), 3, 10);
        phi.push_batch(Grid::new(&w, &[2, 2]).unwrap().cell_region(1), 2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(diffuse_config(1.0, &phi, &mut rng).unwrap(), phi);
        assert_eq!(thin_diffuse_config(1.0, &phi, &mut rng).unwrap(), phi);
        for t in [0.9, 0.5, 0.01] {
            let out = diffuse_config(t, &phi, &mut rng).unwrap();
            assert_eq!(out.total(), phi.total());
            assert!(out.points().iter().all(|p| w.contains(&p.loc)));
        }
    }

    #[test]
    fn integrate_uniform_and_atoms() {
        let w = torus();
        let g = Grid::new(&w, &[2, 2]).unwrap();
        let u = GridFunction::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = GaussMixMeasure::uniform(&w, 2.0).unwrap();
        assert_relative_eq!(m.integrate_fn(&u).unwrap(), 5.0, epsilon = 1e-14);
        let a = GaussMixMeasure::atom(&w, vec![0.75, 0.25], 1.5).unwrap();
        assert_relative_eq!(a.integrate_fn(&u).unwrap(), 4.5);
        let wide = GaussMixMeasure::new(&w, vec![GaussComponent { mass: 1.0, variance: 50.0, center: vec![0.1, 0.1] }], 0.0)
            .unwrap();
        assert_relative_eq!(wide.integrate_fn(&u).unwrap(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn stable_sampler_is_positive_and_levy_at_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 20_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let s = one_sided_stable_sample(0.5, &mut rng).unwrap();
            assert!(s > 0.0);
            sum += (-s).exp();
        }
        let m = sum / n as f64;
        assert!((m - (-1.0f64).exp()).abs() < 0.01, "{m}");
        assert!(one_sided_stable_sample(1.0, &mut rng).is_err());
    }

    #[test]
    fn radial_draw_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let t = levy_radial_draw(0.5, 0.25, &mut rng);
            assert!(t > 0.25 && t <= 1.0);
        }
        let w = torus();
        let m = levy_radial_sample(0.5, &[(1.0, vec![0.5, 0.5])], 1.0 - 1e-12, &w, &mut rng).unwrap();
        assert!(m.components().is_empty());
    }
}
