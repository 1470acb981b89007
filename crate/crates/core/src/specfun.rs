//! Mittag-Leffler function, Lamperti law, one-sided stable sampling and
//! the L1 Caputo scheme.

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr, ln_gamma};

use crate::error::{domain, Error, Result};
use crate::quad::{breakpoints, integrate, integrate_vec, QuadratureSpec};

/// Fractional order ν in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FracOrder(f64);

impl FracOrder {
    pub const ONE: FracOrder = FracOrder(1.0);

    pub fn new(nu: f64) -> Result<Self> {
        if nu > 0.0 && nu <= 1.0 {
            Ok(Self(nu))
        } else {
            domain(format!("fractional order must lie in (0, 1], got {nu}"))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_one(self) -> bool {
        self.0 == 1.0
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FracOrder> for f64 {
    fn from(v: FracOrder) -> f64 {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LampertiSample {
    pub value: f64,
    pub nu: FracOrder,
}

/// Power series of M_ν(x). Returns `None` when the largest term exceeds
/// 1e4, where cancellation would eat more than four digits.
pub fn ml_series(nu: FracOrder, x: f64) -> Option<f64> {
    if x == 0.0 {
        return Some(1.0);
    }
    let nu = nu.get();
    let lx = x.abs().ln();
    let neg = x < 0.0;
    let mut sum = 1.0;
    let mut max_term = 1.0f64;
    for k in 1..2000u32 {
        let kf = k as f64;
        let mag = (kf * lx - ln_gamma(1.0 + nu * kf)).exp();
        max_term = max_term.max(mag);
        if max_term > 1e4 {
            return None;
        }
        sum += if neg && k % 2 == 1 { -mag } else { mag };
        // terms are eventually decreasing; stop once past the peak and negligible
        if mag < 1e-17 * sum.abs().max(1e-300) && kf * nu > x.abs() {
            return Some(sum);
        }
    }
    None
}

/// sin(πν), accurate as ν → 1 where πν itself carries a rounding error.
fn sin_pi(nu: f64) -> f64 {
    (PI * (1.0 - nu)).sin()
}

/// 1 + cos(πν), accurate as ν → 1.
fn one_plus_cos(nu: f64) -> f64 {
    2.0 * (0.5 * PI * (1.0 - nu)).sin().powi(2)
}

fn lamperti_u_weight(nu: f64) -> impl Fn(f64) -> f64 {
    let theta = PI * nu;
    let norm = sin_pi(nu) / theta;
    let opc = one_plus_cos(nu);
    move |u: f64| {
        if u > 1e150 {
            norm / (u * u)
        } else {
            // u² + 2u cos θ + 1 without cancellation near u = 1
            norm / ((u - 1.0).powi(2) + 2.0 * u * opc)
        }
    }
}

fn u_breakpoints(nu: f64, l_hints: &[f64]) -> Vec<f64> {
    let mut cands = vec![1.0];
    let eps = sin_pi(nu);
    if eps < 0.2 {
        cands.extend([1.0 - 4.0 * eps, 1.0 - eps, 1.0 + eps, 1.0 + 4.0 * eps]);
    }
    // decades around each hint keep a feature near a hint from falling
    // between the Kronrod nodes of one long segment
    for &l in l_hints {
        if l > 0.0 && l.is_finite() {
            for k in -2..=2 {
                cands.push((l * 10f64.powi(k)).powf(nu));
            }
        }
    }
    breakpoints(0.0, f64::INFINITY, &cands)
}

/// E[f(L)] for L Lamperti(ν), with `l_hints` marking where f varies.
pub fn lamperti_average<F: Fn(f64) -> f64>(nu: FracOrder, f: F, l_hints: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    if nu.is_one() {
        return Ok(f(1.0));
    }
    let v = nu.get();
    let w = lamperti_u_weight(v);
    let inv = 1.0 / v;
    integrate(|u| f(u.powf(inv)) * w(u), &u_breakpoints(v, l_hints), spec)
}

/// Vector-valued version of [`lamperti_average`].
pub fn lamperti_average_vec<F: Fn(f64, &mut [f64])>(
    nu: FracOrder,
    f: F,
    dim: usize,
    l_hints: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    if nu.is_one() {
        let mut out = vec![0.0; dim];
        f(1.0, &mut out);
        return Ok(out);
    }
    let v = nu.get();
    let w = lamperti_u_weight(v);
    let inv = 1.0 / v;
    integrate_vec(
        |u, out| {
            f(u.powf(inv), out);
            let wu = w(u);
            out.iter_mut().for_each(|o| *o *= wu);
        },
        &u_breakpoints(v, l_hints),
        dim,
        spec,
    )
}

/// M_ν(x) for x ≤ 0.
pub fn mittag_leffler(nu: FracOrder, x: f64) -> Result<f64> {
    if x.is_nan() || x > 0.0 {
        return domain(format!("Mittag-Leffler argument must be <= 0, got {x}"));
    }
    if nu.is_one() {
        return Ok(x.exp());
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if x.abs() <= 1.5 {
        if let Some(v) = ml_series(nu, x) {
            return Ok(v);
        }
    }
    ml_quadrature(nu, x, &QuadratureSpec::default())
}

/// M_ν(x) through the Laplace transform of the Lamperti law.
pub fn ml_quadrature(nu: FracOrder, x: f64, spec: &QuadratureSpec) -> Result<f64> {
    let z = (-x).powf(1.0 / nu.get());
    lamperti_average(nu, |l| (-z * l).exp(), &[1.0 / z], spec)
}

fn poisson_hints(n: u64, mean: f64) -> Vec<f64> {
    let peak = (n.max(1) as f64) / mean;
    let w = 1.0 / ((n + 1) as f64).sqrt();
    [0.02, 0.2, 1.0 - 10.0 * w, 1.0 - 4.0 * w, 1.0, 1.0 + 4.0 * w, 1.0 + 10.0 * w, 5.0, 50.0]
        .iter()
        .map(|m| m * peak)
        .collect()
}

/// Mixed Poisson pmf ∫ Poisson(n; mean·l) 𝓁(dl).
pub fn poisson_mixture_pmf(nu: FracOrder, mean: f64, n: u64) -> Result<f64> {
    if !(mean >= 0.0) {
        return domain("mean must be nonnegative");
    }
    if mean == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let lnf = ln_gamma(n as f64 + 1.0);
    let nf = n as f64;
    let f = move |l: f64| {
        if n == 0 {
            (-mean * l).exp()
        } else if l <= 0.0 || !l.is_finite() {
            0.0
        } else {
            (nf * (mean * l).ln() - mean * l - lnf).exp()
        }
    };
    lamperti_average(nu, f, &poisson_hints(n, mean), &QuadratureSpec::relative(1e-11))
}

/// Mixed Poisson tail P(N > n), computed independently of the pmf through
/// the regularized incomplete gamma function.
pub fn poisson_mixture_tail(nu: FracOrder, mean: f64, n: u64) -> Result<f64> {
    if !(mean > 0.0) {
        return domain("mean must be positive");
    }
    let a = n as f64 + 1.0;
    let f = move |l: f64| {
        let x = mean * l;
        if !x.is_finite() {
            1.0
        } else if x <= 0.0 {
            0.0
        } else {
            gamma_lr(a, x)
        }
    };
    lamperti_average(nu, f, &poisson_hints(n, mean), &QuadratureSpec::relative(1e-11))
}

/// ln |(d/dz)^k M_ν(−z^ν)|; the sign is (−1)^k.
pub fn ln_abs_ml_composite_deriv(nu: FracOrder, k: u64, z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return domain(format!("composite derivative needs z >= 0, got {z}"));
    }
    if nu.is_one() {
        return Ok(-z);
    }
    if k == 0 {
        return Ok(mittag_leffler(nu, -z.powf(nu.get()))?.ln());
    }
    if z == 0.0 {
        return Ok(f64::INFINITY);
    }
    let kf = k as f64;
    let pmf = poisson_mixture_pmf(nu, z, k)?;
    Ok(ln_gamma(kf + 1.0) - kf * z.ln() + pmf.ln())
}

/// (d/dz)^k M_ν(−z^ν) via the Lamperti mixture (−1)^k E[L^k e^{−zL}].
pub fn ml_composite_deriv(nu: FracOrder, k: u64, z: f64) -> Result<f64> {
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    if k == 0 && !nu.is_one() {
        return mittag_leffler(nu, -z.powf(nu.get()));
    }
    Ok(sign * ln_abs_ml_composite_deriv(nu, k, z)?.exp())
}

fn require_proper(nu: FracOrder) -> Result<f64> {
    if nu.is_one() {
        return domain("Lamperti law at nu = 1 is a point mass at 1");
    }
    Ok(nu.get())
}

pub fn lamperti_pdf(nu: FracOrder, y: f64) -> Result<f64> {
    let v = require_proper(nu)?;
    if !(y > 0.0) {
        return domain("Lamperti density needs y > 0");
    }
    let s = sin_pi(v);
    let opc = one_plus_cos(v);
    let yn = y.powf(v);
    let val = if yn > 1.0 {
        let r = 1.0 / yn;
        r / (y * ((1.0 - r).powi(2) + 2.0 * opc * r))
    } else {
        yn / (y * ((yn - 1.0).powi(2) + 2.0 * opc * yn))
    };
    Ok(s / PI * val)
}

pub fn lamperti_cdf(nu: FracOrder, y: f64) -> Result<f64> {
    if nu.is_one() {
        return Ok(if y >= 1.0 { 1.0 } else { 0.0 });
    }
    let v = nu.get();
    if y <= 0.0 {
        return Ok(0.0);
    }
    let theta = PI * v;
    let yn = y.powf(v);
    Ok((((yn - 1.0 + one_plus_cos(v)) / sin_pi(v)).atan() - (0.5 * PI - theta)) / theta)
}

pub fn lamperti_quantile(nu: FracOrder, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain("quantile level must lie in (0, 1)");
    }
    if nu.is_one() {
        return Ok(1.0);
    }
    let theta = PI * nu.get();
    Ok(((theta * p).sin() / (theta * (1.0 - p)).sin()).powf(1.0 / nu.get()))
}

/// ln of a one-sided ν-stable draw with Laplace transform e^{−η^ν}
/// (Kanter's representation).
fn ln_stable_sample<R: Rng + ?Sized>(nu: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let e: f64 = rng.sample(Exp1);
    let pu = PI * u;
    (nu * pu).sin().ln() - pu.sin().ln() / nu + (1.0 - nu) / nu * (((1.0 - nu) * pu).sin().ln() - e.ln())
}

pub fn stable_sample<R: Rng + ?Sized>(nu: FracOrder, rng: &mut R) -> Result<f64> {
    let v = require_proper(nu)?;
    Ok(ln_stable_sample(v, rng).exp())
}

/// Lamperti draw as the ratio of two independent stable draws.
pub fn lamperti_sample<R: Rng + ?Sized>(nu: FracOrder, rng: &mut R) -> LampertiSample {
    if nu.is_one() {
        return LampertiSample { value: 1.0, nu };
    }
    let v = nu.get();
    let a = ln_stable_sample(v, rng);
    let b = ln_stable_sample(v, rng);
    LampertiSample { value: (a - b).exp(), nu }
}

/// L1 approximation of the Caputo derivative on a uniform grid; entry 0 is 0.
pub fn caputo_l1(times: &[f64], values: &[f64], nu: FracOrder) -> Result<Vec<f64>> {
    if times.len() != values.len() {
        return Err(Error::Dimension { expected: times.len(), got: values.len() });
    }
    let n = times.len();
    if n < 2 {
        return Ok(vec![0.0; n]);
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::NonUniformGrid);
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(w[1].abs()) {
            return Err(Error::NonUniformGrid);
        }
    }
    let v = nu.get();
    let b: Vec<f64> = (0..n).map(|j| ((j + 1) as f64).powf(1.0 - v) - (j as f64).powf(1.0 - v)).collect();
    let scale = dt.powf(-v) / gamma(2.0 - v);
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let mut out = vec![0.0; n];
    for (m, o) in out.iter_mut().enumerate().skip(1) {
        // sum_{j=0}^{m-1} b_j (g_{m-j} - g_{m-j-1})
        let s: f64 = (0..m).map(|j| b[j] * diffs[m - j - 1]).sum();
        *o = scale * s;
    }
    Ok(out)
}
