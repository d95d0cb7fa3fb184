//! Sibuya, discrete-stable and F-stable point processes with discrete
//! spectral measures, and the branching operation on configurations.

use crate::discrete_ops::sibuya_sample;
use crate::error::{check_unit_open_left, invalid, Result};
use crate::laws::poisson;
use crate::numeric::multinomial;
use crate::processes::{IntensityMeasure, IntensitySpec, PointConfig, TestFunction, Window};
use crate::semigroups::{BranchingSemigroup, YaglomLaw};
use rand::Rng;
use serde::{Deserialize, Serialize};

const MASS_TOL: f64 = 1e-12;

/// Finite spectral measure `sum_j w_j delta_{mu_j}` over probability measures.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasureM1 {
    components: Vec<(f64, IntensityMeasure)>,
}

/// Serialisable component: `{weight, measure}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralComponentSpec {
    pub weight: f64,
    pub measure: IntensitySpec,
}

impl SpectralMeasureM1 {
    pub fn new(components: Vec<(f64, IntensityMeasure)>) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(invalid("spectral measure needs at least one component"));
        };
        let window = first.window().clone();
        for (w, mu) in &components {
            if !(*w > 0.0 && w.is_finite()) {
                return Err(invalid(format!("spectral weight must be positive and finite, got {w}")));
            }
            if mu.window() != &window {
                return Err(invalid("spectral components live on different windows"));
            }
            let m = mu.total_mass();
            if (m - 1.0).abs() > MASS_TOL {
                return Err(invalid(format!("spectral component has mass {m}, expected 1")));
            }
        }
        Ok(Self { components })
    }

    /// Single component `w * delta_{uniform}`.
    pub fn uniform(window: &Window, weight: f64) -> Result<Self> {
        Self::new(vec![(weight, IntensityMeasure::uniform(window, 1.0)?)])
    }

    pub fn from_spec(window: &Window, spec: &[SpectralComponentSpec]) -> Result<Self> {
        let comps = spec
            .iter()
            .map(|c| Ok((c.weight, IntensityMeasure::from_spec(window, &c.measure)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn components(&self) -> &[(f64, IntensityMeasure)] {
        &self.components
    }

    pub fn window(&self) -> &Window {
        self.components[0].1.window()
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|(w, _)| w).sum()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.components.iter().map(|(w, mu)| (w * c, mu.clone())).collect())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0,1], got {alpha}")))
    }
}

fn check_probability(mu: &IntensityMeasure) -> Result<()> {
    let m = mu.total_mass();
    if (m - 1.0).abs() > MASS_TOL {
        return Err(invalid(format!("expected a probability measure, got mass {m}")));
    }
    Ok(())
}

/// Sibuya(alpha) many points, i.i.d. from `mu`.
pub fn sibuya_pp_sample<R: Rng + ?Sized>(alpha: f64, mu: &IntensityMeasure, rng: &mut R) -> Result<PointConfig> {
    check_probability(mu)?;
    let k = sibuya_sample(alpha, rng)?;
    mu.scatter(k, rng)
}

/// Poisson cluster process with Sibuya daughters.
///
/// All clusters that picked the same component have i.i.d. points from it,
/// so their sizes are pooled before scattering.
pub fn das_pp_sample<R: Rng + ?Sized>(alpha: f64, sigma: &SpectralMeasureM1, rng: &mut R) -> Result<PointConfig> {
    check_alpha(alpha)?;
    let n = poisson(sigma.total_weight(), rng);
    let weights: Vec<f64> = sigma.components.iter().map(|(w, _)| *w).collect();
    let split = multinomial(n, &weights, rng);
    let mut out = PointConfig::null(sigma.window());
    for ((_, mu), clusters) in sigma.components.iter().zip(split) {
        let mut k = 0u64;
        for _ in 0..clusters {
            k = k.saturating_add(sibuya_sample(alpha, rng)?);
        }
        out.superpose(mu.scatter(k, rng)?);
    }
    Ok(out)
}

/// DαS centre process with every unit replaced by a Yaglom draw.
pub fn fstable_pp_sample<R: Rng + ?Sized>(
    yaglom: &YaglomLaw,
    alpha: f64,
    sigma: &SpectralMeasureM1,
    rng: &mut R,
) -> Result<PointConfig> {
    let centre = das_pp_sample(alpha, sigma, rng)?;
    Ok(centre.map_units(&yaglom.unit_law(), rng))
}

/// `1 - <1-h, mu>^alpha`.
pub fn sibuya_pgfl_closed(alpha: f64, mu: &IntensityMeasure, h: &TestFunction) -> Result<f64> {
    check_alpha(alpha)?;
    let g = h.as_grid_function().map(|v| 1.0 - v);
    Ok(1.0 - mu.integrate(&g).powf(alpha))
}

/// `exp{-sum_j w_j <1 - B(h), mu_j>^alpha}`.
pub fn fstable_pp_pgfl_closed(
    sg: &BranchingSemigroup,
    alpha: f64,
    sigma: &SpectralMeasureM1,
    h: &TestFunction,
) -> Result<f64> {
    check_alpha(alpha)?;
    let one_minus_b = h.as_grid_function().try_map(|v| Ok(1.0 - sg.b(v)?))?;
    let s: f64 = sigma.components.iter().map(|(w, mu)| w * mu.integrate(&one_minus_b).powf(alpha)).sum();
    Ok((-s).exp())
}

/// Cluster form `exp{sum_j w_j (G_Sib(mu_j)[B(h)] - 1)}`.
pub fn fstable_pp_pgfl_sibuya_form(
    sg: &BranchingSemigroup,
    alpha: f64,
    sigma: &SpectralMeasureM1,
    h: &TestFunction,
) -> Result<f64> {
    let bh: Vec<f64> = h.values().iter().map(|&v| sg.b(v)).collect::<Result<_>>()?;
    let bh = TestFunction::new(h.grid().clone(), bh)?;
    let s = sigma
        .components
        .iter()
        .map(|(w, mu)| Ok(w * (sibuya_pgfl_closed(alpha, mu, &bh)? - 1.0)))
        .sum::<Result<f64>>()?;
    Ok(s.exp())
}

/// `t o_F phi`: every unit becomes an independent `Y_{-ln t}` at the same site.
pub fn branch_op_pp<R: Rng + ?Sized>(
    sg: &BranchingSemigroup,
    t: f64,
    phi: &PointConfig,
    rng: &mut R,
) -> Result<PointConfig> {
    check_unit_open_left("branching parameter", t)?;
    if t == 1.0 {
        return Ok(phi.clone());
    }
    Ok(phi.map_units(&sg.unit_law(-t.ln())?, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{Atom, Grid};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn rng() -> crate::rng::SimRng {
        crate::rng::SimRng::seed_from_u64(3)
    }

    #[test]
    fn spectral_measure_validation() {
        let w = Window::unit_torus(2);
        assert!(SpectralMeasureM1::uniform(&w, 1.5).is_ok());
        let half = IntensityMeasure::uniform(&w, 0.5).unwrap();
        assert!(SpectralMeasureM1::new(vec![(1.0, half)]).is_err());
        assert!(SpectralMeasureM1::uniform(&w, 0.0).is_err());
        assert!(SpectralMeasureM1::new(vec![]).is_err());
    }

    #[test]
    fn sibuya_alpha_one_is_a_single_point() {
        let w = Window::unit_torus(2);
        let mu = IntensityMeasure::uniform(&w, 1.0).unwrap();
        let mut r = rng();
        for _ in 0..100 {
            assert_eq!(sibuya_pp_sample(1.0, &mu, &mut r).unwrap().total(), 1);
        }
    }

    #[test]
    fn closed_form_examples() {
        let w = Window::unit_torus(2);
        let sigma = SpectralMeasureM1::uniform(&w, 1.0).unwrap();
        let one = TestFunction::constant(&w, 1.0).unwrap();
        let lbd = BranchingSemigroup::linear_birth_death(1.0).unwrap();
        assert_relative_eq!(fstable_pp_pgfl_closed(&lbd, 0.5, &sigma, &one).unwrap(), 1.0);

        let h = TestFunction::constant(&w, 0.5).unwrap();
        let v = fstable_pp_pgfl_closed(&lbd, 0.5, &sigma, &h).unwrap();
        assert_relative_eq!(v, (-(2.0f64 / 3.0).sqrt()).exp(), epsilon = 1e-12);

        let pd = BranchingSemigroup::pure_death();
        let g = Grid::new(&w, &[2, 2]).unwrap();
        let h = TestFunction::new(g, vec![0.2, 0.9, 0.5, 1.0]).unwrap();
        let mu2 = IntensityMeasure::atom(&w, vec![0.1, 0.1], 1.0).unwrap();
        let s2 = SpectralMeasureM1::new(vec![(0.7, IntensityMeasure::uniform(&w, 1.0).unwrap()), (1.3, mu2)])
            .unwrap();
        let poisson = (-(0.7 * (1.0 - 0.65) + 1.3 * (1.0 - 0.2f64))).exp();
        assert_relative_eq!(fstable_pp_pgfl_closed(&pd, 1.0, &s2, &h).unwrap(), poisson, epsilon = 1e-14);
    }

    #[test]
    fn closed_and_sibuya_forms_agree() {
        let w = Window::unit_torus(2);
        let g = Grid::new(&w, &[2, 2]).unwrap();
        let mu = IntensityMeasure::new(
            &w,
            vec![Atom { location: vec![0.7, 0.2], mass: 0.25 }],
            Some(crate::processes::GridFunction::constant(&w, 0.75)),
        )
        .unwrap();
        let sigma =
            SpectralMeasureM1::new(vec![(2.0, mu), (0.5, IntensityMeasure::uniform(&w, 1.0).unwrap())]).unwrap();
        let h = TestFunction::new(g, vec![0.3, 0.6, 0.95, 0.1]).unwrap();
        for sg in [
            BranchingSemigroup::pure_death(),
            BranchingSemigroup::linear_birth_death(1.0).unwrap(),
            BranchingSemigroup::linear_birth_death(0.5).unwrap(),
        ] {
            for alpha in [0.3, 0.7, 1.0] {
                let a = fstable_pp_pgfl_closed(&sg, alpha, &sigma, &h).unwrap();
                let b = fstable_pp_pgfl_sibuya_form(&sg, alpha, &sigma, &h).unwrap();
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn branch_op_identity_and_mass() {
        let w = Window::unit_torus(1);
        let phi = PointConfig::from_points(&w, vec![(vec![0.5], 3)]).unwrap();
        let sg = BranchingSemigroup::linear_birth_death(1.0).unwrap();
        let mut r = rng();
        assert_eq!(branch_op_pp(&sg, 1.0, &phi, &mut r).unwrap(), phi);
        assert!(branch_op_pp(&sg, 0.0, &phi, &mut r).is_err());
        let out = branch_op_pp(&sg, 0.5, &phi, &mut r).unwrap();
        assert!(out.points().iter().all(|p| p.loc == vec![0.5]));
    }

    #[test]
    fn pure_death_fstable_is_das() {
        let w = Window::unit_torus(2);
        let sigma = SpectralMeasureM1::uniform(&w, 2.0).unwrap();
        let y = BranchingSemigroup::pure_death().yaglom().unwrap();
        let a = fstable_pp_sample(&y, 0.6, &sigma, &mut rng()).unwrap();
        let b = das_pp_sample(0.6, &sigma, &mut rng()).unwrap();
        assert_eq!(a.total(), b.total());
    }
}
