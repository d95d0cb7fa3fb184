//! Numerical building blocks: adaptive ODE and quadrature, normal tails,
//! multinomial draws and Monte Carlo summaries.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
pub struct OdeTol {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for OdeTol {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-14 }
    }
}

const MAX_STEPS: usize = 1_000_000;

/// Dormand–Prince 5(4) with per-component mixed error control.
/// Integrates `y' = f(t, y)` from `t0` to `t1` in place.
pub fn dopri5<F>(mut f: F, t0: f64, y: &mut [f64], t1: f64, tol: OdeTol) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A21: f64 = 1.0 / 5.0;
    const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
    const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
    const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
    const A6: [f64; 5] = [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ];
    const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    let n = y.len();
    let span = t1 - t0;
    if span == 0.0 || n == 0 {
        return Ok(());
    }
    if !(span > 0.0) {
        return Err(Error::InvalidParameter(format!("ODE span must be positive, got {span}")));
    }
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut t = t0;

    f(t, y, &mut k[0]);
    let norm = |v: &[f64], y: &[f64]| -> f64 {
        let s: f64 = v
            .iter()
            .zip(y)
            .map(|(vi, yi)| {
                let sc = tol.atol + tol.rtol * yi.abs();
                (vi / sc).powi(2)
            })
            .sum();
        (s / n as f64).sqrt()
    };
    let d0 = norm(y, y);
    let d1 = norm(&k[0], y);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span);

    let mut last_err = f64::NAN;
    for _ in 0..MAX_STEPS {
        if t >= t1 {
            return Ok(());
        }
        if t + h > t1 {
            h = t1 - t;
        }
        let (k0, rest) = k.split_at_mut(1);
        let k0 = &k0[0];
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k0[i];
        }
        f(t + C[0] * h, &tmp, &mut rest[0]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A3[0] * k0[i] + A3[1] * rest[0][i]);
        }
        f(t + C[1] * h, &tmp, &mut rest[1]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A4[0] * k0[i] + A4[1] * rest[0][i] + A4[2] * rest[1][i]);
        }
        f(t + C[2] * h, &tmp, &mut rest[2]);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A5[0] * k0[i] + A5[1] * rest[0][i] + A5[2] * rest[1][i] + A5[3] * rest[2][i]);
        }
        f(t + C[3] * h, &tmp, &mut rest[3]);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A6[0] * k0[i]
                    + A6[1] * rest[0][i]
                    + A6[2] * rest[1][i]
                    + A6[3] * rest[2][i]
                    + A6[4] * rest[3][i]);
        }
        f(t + C[4] * h, &tmp, &mut rest[4]);
        for i in 0..n {
            ynew[i] = y[i]
                + h * (B[0] * k0[i]
                    + B[2] * rest[1][i]
                    + B[3] * rest[2][i]
                    + B[4] * rest[3][i]
                    + B[5] * rest[4][i]);
        }
        f(t + C[5] * h, &ynew, &mut rest[5]);

        let mut acc = 0.0;
        for i in 0..n {
            let e = h
                * (E[0] * k0[i]
                    + E[2] * rest[1][i]
                    + E[3] * rest[2][i]
                    + E[4] * rest[3][i]
                    + E[5] * rest[4][i]
                    + E[6] * rest[5][i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
            acc += (e / sc).powi(2);
        }
        let err = (acc / n as f64).sqrt();
        last_err = err;
        if !err.is_finite() {
            return Err(Error::Numerical { what: "ODE solve", achieved: err });
        }
        if err <= 1.0 {
            t = if t1 - (t + h) <= 1e-15 * t1.abs().max(1.0) { t1 } else { t + h };
            y.copy_from_slice(&ynew);
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Numerical { what: "ODE step size underflow", achieved: err });
        }
    }
    Err(Error::Numerical { what: "ODE step limit", achieved: last_err })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}
impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive Gauss–Kronrod 7/15 on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, val: v, err: e });
    let (mut total, mut err) = (v, e);
    for _ in 0..1000 {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, val: v2, err: e2 });
    }
    // recompute sums from scratch to shed accumulated rounding
    let total: f64 = heap.iter().map(|p| p.val).sum();
    let err: f64 = heap.iter().map(|p| p.err).sum();
    if err <= abs_tol.max(rel_tol * total.abs()) {
        Ok(total)
    } else {
        Err(Error::Numerical { what: "quadrature", achieved: err })
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Multinomial draw of `n` trials over (not necessarily normalised) weights.
pub fn multinomial<R: Rng + ?Sized>(n: u64, weights: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; weights.len()];
    let mut left = n;
    let mut mass: f64 = weights.iter().sum();
    for (i, &w) in weights.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == weights.len() || w >= mass {
            out[i] = left;
            break;
        }
        let p = (w / mass).clamp(0.0, 1.0);
        let k = if p == 0.0 {
            0
        } else {
            Binomial::new(left, p).expect("valid binomial").sample(rng)
        };
        out[i] = k;
        left -= k;
        mass -= w;
    }
    out
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Estimate { value: f64::NAN, se: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Estimate { value: mean, se: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate { value: mean, se: (var / n).sqrt() }
    }

    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.value - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }
}
