//! Poisson and Mittag-Leffler (Cox) point processes on balls and boxes in ℝ³.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::specfun::{lamperti_sample, ln_abs_ml_composite_deriv, mittag_leffler, FracOrder};

pub type Point3 = [f64; 3];

/// Largest configuration a sampler will materialize (about 240 MB of points).
pub const MAX_POINTS: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Ball { center: Point3, radius: f64 },
    Box { min: Point3, max: Point3 },
}

impl Region {
    pub fn ball(center: Point3, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return domain("ball radius must be positive");
        }
        Ok(Region::Ball { center, radius })
    }

    pub fn cuboid(min: Point3, max: Point3) -> Result<Self> {
        if (0..3).any(|i| !(max[i] > min[i])) {
            return domain("box corners must satisfy min < max componentwise");
        }
        Ok(Region::Box { min, max })
    }

    pub fn volume(&self) -> f64 {
        match self {
            Region::Ball { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            Region::Box { min, max } => (0..3).map(|i| max[i] - min[i]).product(),
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        match self {
            Region::Ball { center, radius } => dist2(p, center) <= radius * radius,
            Region::Box { min, max } => (0..3).all(|i| p[i] >= min[i] && p[i] <= max[i]),
        }
    }

    pub fn translated(&self, by: Point3) -> Self {
        let add = |p: &Point3| [p[0] + by[0], p[1] + by[1], p[2] + by[2]];
        match self {
            Region::Ball { center, radius } => Region::Ball { center: add(center), radius: *radius },
            Region::Box { min, max } => Region::Box { min: add(min), max: add(max) },
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point3 {
        match self {
            Region::Box { min, max } => std::array::from_fn(|i| min[i] + (max[i] - min[i]) * rng.random::<f64>()),
            Region::Ball { center, radius } => loop {
                let p: Point3 = std::array::from_fn(|_| 2.0 * rng.random::<f64>() - 1.0);
                if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0 {
                    break std::array::from_fn(|i| center[i] + radius * p[i]);
                }
            },
        }
    }
}

#[inline]
pub(crate) fn dist2(a: &Point3, b: &Point3) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointConfiguration {
    pub region: Region,
    pub points: Vec<Point3>,
    /// The Lamperti value that directed a Cox draw; `None` for plain Poisson.
    pub intensity_draw: Option<f64>,
}

impl PointConfiguration {
    pub fn count_in(&self, region: &Region) -> usize {
        self.points.iter().filter(|p| region.contains(p)).count()
    }
}

/// Poisson count with the global point cap.
pub fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if !(mean >= 0.0) {
        return domain("Poisson mean must be nonnegative");
    }
    if mean == 0.0 {
        return Ok(0);
    }
    if mean > 10.0 * MAX_POINTS {
        return Err(Error::TooManyPoints { count: mean, cap: MAX_POINTS });
    }
    let n: f64 = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?.sample(rng);
    if n > MAX_POINTS {
        return Err(Error::TooManyPoints { count: n, cap: MAX_POINTS });
    }
    Ok(n as u64)
}

fn sample_with_intensity<R: Rng + ?Sized>(intensity: f64, region: &Region, rng: &mut R) -> Result<Vec<Point3>> {
    let n = poisson_count(intensity * region.volume(), rng)?;
    Ok((0..n).map(|_| region.sample_uniform(rng)).collect())
}

pub fn sample_poisson<R: Rng + ?Sized>(rho: f64, region: &Region, rng: &mut R) -> Result<PointConfiguration> {
    if !(rho > 0.0) {
        return domain("intensity must be positive");
    }
    let points = sample_with_intensity(rho, region, rng)?;
    Ok(PointConfiguration { region: region.clone(), points, intensity_draw: None })
}

/// Cox draw directed by Lρ|·| with one Lamperti L for the whole region.
pub fn sample_ml<R: Rng + ?Sized>(rho: f64, nu: FracOrder, region: &Region, rng: &mut R) -> Result<PointConfiguration> {
    if !(rho > 0.0) {
        return domain("intensity must be positive");
    }
    let l = lamperti_sample(nu, rng).value;
    let points = sample_with_intensity(rho * l, region, rng)?;
    Ok(PointConfiguration { region: region.clone(), points, intensity_draw: Some(l) })
}

/// Joint pmf of counts in disjoint sets of the given volumes.
pub fn finite_dim_pmf(nu: FracOrder, rho: f64, volumes: &[f64], counts: &[u64]) -> Result<f64> {
    if volumes.is_empty() || volumes.len() != counts.len() {
        return Err(Error::Dimension { expected: volumes.len().max(1), got: counts.len() });
    }
    if !(rho > 0.0) || volumes.iter().any(|v| !(*v >= 0.0)) {
        return domain("intensity must be positive and volumes nonnegative");
    }
    let total: f64 = volumes.iter().map(|v| rho * v).sum();
    let k: u64 = counts.iter().sum();
    let mut ln_weight = 0.0;
    for (&v, &kj) in volumes.iter().zip(counts) {
        let mu = rho * v;
        if kj > 0 {
            if mu == 0.0 {
                return Ok(0.0);
            }
            ln_weight += kj as f64 * mu.ln() - ln_gamma(kj as f64 + 1.0);
        }
    }
    if total == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    Ok((ln_abs_ml_composite_deriv(nu, k, total)? + ln_weight).exp())
}

/// P(D > x) for the distance D from a fixed point to the nearest point.
pub fn nearest_distance_survival(nu: FracOrder, rho: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !(rho > 0.0) {
        return domain("need x >= 0 and rho > 0");
    }
    let m = rho * 4.0 / 3.0 * PI * x.powi(3);
    mittag_leffler(nu, -m.powf(nu.get()))
}

/// Constant Jánossy density of exactly `n` points in a set of the given
/// volume. `n = 0` returns the void probability.
pub fn janossy_density(nu: FracOrder, rho: f64, volume: f64, n: u64) -> Result<f64> {
    if !(rho > 0.0) || !(volume > 0.0) {
        return domain("need rho > 0 and volume > 0");
    }
    let nf = n as f64;
    let ln = nf * rho.ln() - ln_gamma(nf + 1.0) + ln_abs_ml_composite_deriv(nu, n, rho * volume)?;
    Ok(ln.exp())
}
