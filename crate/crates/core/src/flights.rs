//! Random flights: Markovian, model 1 (one Lamperti rate per path) and
//! model 2 (Lamperti clock / speed), plus their analytic laws.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad::{breakpoints, integrate, QuadratureSpec};
use crate::specfun::{lamperti_sample, mittag_leffler, poisson_mixture_pmf, poisson_mixture_tail, FracOrder};
use crate::stats::{Estimate, Running};

pub const DEFAULT_EVENT_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub nu: FracOrder,
    pub lambda: f64,
    pub c: f64,
    pub d: usize,
    pub t_max: f64,
}

impl SimParams {
    pub fn new(nu: FracOrder, lambda: f64, c: f64, d: usize, t_max: f64) -> Result<Self> {
        let p = Self { nu, lambda, c, d, t_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.lambda) || !pos(self.c) || !pos(self.t_max) || self.d == 0 {
            return domain("lambda, c, t_max must be positive and d >= 1");
        }
        Ok(())
    }
}

/// Fills `out` with a uniform direction on the unit sphere of dimension `out.len()`.
pub fn fill_uniform_direction<R: Rng + ?Sized>(out: &mut [f64], rng: &mut R) {
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut n2 = 0.0;
        for o in out.iter_mut() {
            *o = rng.sample(StandardNormal);
            n2 += *o * *o;
        }
        if n2 > 1e-200 {
            let inv = 1.0 / n2.sqrt();
            out.iter_mut().for_each(|o| *o *= inv);
            return;
        }
    }
}

pub fn uniform_sphere_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let mut v = vec![0.0; d];
    fill_uniform_direction(&mut v, rng);
    v
}

/// Piecewise-linear flight. Times are stored on the path's own clock;
/// `clock` maps the caller's time t to the stored time `clock * t`
/// (1 except for the time-scaled model-2 representation).
#[derive(Debug, Clone, PartialEq)]
pub struct FlightPath {
    pub d: usize,
    pub speed: f64,
    pub clock: f64,
    /// Horizon on the stored clock.
    pub horizon: f64,
    /// 0 followed by the event times, stored clock.
    pub times: Vec<f64>,
    /// Position at each entry of `times`, flattened (len = d * times.len()).
    pub positions: Vec<f64>,
    /// Direction in force after each entry of `times`, flattened.
    pub directions: Vec<f64>,
    pub mixture_draw: Option<f64>,
}

impl FlightPath {
    pub fn start(&self) -> &[f64] {
        &self.positions[..self.d]
    }

    pub fn initial_direction(&self) -> &[f64] {
        &self.directions[..self.d]
    }

    pub fn n_events(&self) -> usize {
        self.times.len() - 1
    }

    /// Event times on the caller's clock.
    pub fn event_times(&self) -> Vec<f64> {
        self.times[1..].iter().map(|s| s / self.clock).collect()
    }

    fn segment(&self, s: f64) -> Result<usize> {
        if !(s >= 0.0) || s > self.horizon * (1.0 + 1e-12) {
            return Err(Error::BeyondHorizon { t: s, horizon: self.horizon });
        }
        Ok(self.times.partition_point(|&x| x <= s).saturating_sub(1))
    }

    /// Position at stored-clock time `s`.
    pub fn position_stored(&self, s: f64) -> Result<Vec<f64>> {
        let i = self.segment(s)?;
        let d = self.d;
        let dt = s - self.times[i];
        Ok((0..d).map(|k| self.positions[i * d + k] + self.speed * dt * self.directions[i * d + k]).collect())
    }

    pub fn position(&self, t: f64) -> Result<Vec<f64>> {
        self.position_stored(self.clock * t)
    }

    pub fn direction(&self, t: f64) -> Result<Vec<f64>> {
        let i = self.segment(self.clock * t)?;
        Ok(self.directions[i * self.d..(i + 1) * self.d].to_vec())
    }

    pub fn counting(&self) -> CountingPath {
        CountingPath { event_times: self.event_times() }
    }
}

/// N_t = number of events up to t.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingPath {
    pub event_times: Vec<f64>,
}

impl CountingPath {
    pub fn count(&self, t: f64) -> usize {
        self.event_times.partition_point(|&x| x <= t)
    }
}

fn check_start(params: &SimParams, x0: &[f64], v0: &[f64]) -> Result<()> {
    params.validate()?;
    for v in [x0, v0] {
        if v.len() != params.d {
            return Err(Error::Dimension { expected: params.d, got: v.len() });
        }
    }
    let n: f64 = v0.iter().map(|x| x * x).sum();
    if (n - 1.0).abs() > 1e-9 {
        return domain("initial direction must be a unit vector");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn markov_path<R: Rng + ?Sized>(
    rate: f64,
    speed: f64,
    horizon: f64,
    clock: f64,
    x0: &[f64],
    v0: &[f64],
    mixture_draw: Option<f64>,
    cap: usize,
    rng: &mut R,
) -> Result<FlightPath> {
    let d = x0.len();
    let mut times = vec![0.0];
    let mut positions = x0.to_vec();
    let mut directions = v0.to_vec();
    let mut t = 0.0;
    let mut dir = v0.to_vec();
    loop {
        let tau: f64 = rng.sample::<f64, _>(Exp1) / rate;
        let next = t + tau;
        if next > horizon {
            break;
        }
        if times.len() > cap {
            return Err(Error::EventCap { cap });
        }
        let base = positions.len() - d;
        for k in 0..d {
            let p = positions[base + k] + speed * tau * dir[k];
            positions.push(p);
        }
        fill_uniform_direction(&mut dir, rng);
        directions.extend_from_slice(&dir);
        times.push(next);
        t = next;
    }
    Ok(FlightPath { d, speed, clock, horizon, times, positions, directions, mixture_draw })
}

pub fn simulate_markov_flight<R: Rng + ?Sized>(
    params: &SimParams,
    x0: &[f64],
    v0: &[f64],
    rng: &mut R,
) -> Result<FlightPath> {
    check_start(params, x0, v0)?;
    markov_path(params.lambda, params.c, params.t_max, 1.0, x0, v0, None, DEFAULT_EVENT_CAP, rng)
}

/// Model 1 conditional on the Lamperti draw `l`.
pub fn simulate_flight_model1_given<R: Rng + ?Sized>(
    params: &SimParams,
    l: f64,
    x0: &[f64],
    v0: &[f64],
    rng: &mut R,
) -> Result<FlightPath> {
    check_start(params, x0, v0)?;
    markov_path(params.lambda * l, params.c, params.t_max, 1.0, x0, v0, Some(l), DEFAULT_EVENT_CAP, rng)
}

pub fn simulate_flight_model1<R: Rng + ?Sized>(
    params: &SimParams,
    x0: &[f64],
    v0: &[f64],
    rng: &mut R,
) -> Result<FlightPath> {
    let l = lamperti_sample(params.nu, rng).value;
    simulate_flight_model1_given(params, l, x0, v0, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model2Repr {
    /// A (c, λ) flight read at time L·t.
    TimeScaled,
    /// Speed cL and rate λL.
    SpeedScaled,
}

pub fn simulate_flight_model2_given<R: Rng + ?Sized>(
    params: &SimParams,
    l: f64,
    x0: &[f64],
    v0: &[f64],
    repr: Model2Repr,
    rng: &mut R,
) -> Result<FlightPath> {
    check_start(params, x0, v0)?;
    let (p, t) = (params, params.t_max);
    match repr {
        Model2Repr::TimeScaled => markov_path(p.lambda, p.c, l * t, l, x0, v0, Some(l), DEFAULT_EVENT_CAP, rng),
        Model2Repr::SpeedScaled => markov_path(p.lambda * l, p.c * l, t, 1.0, x0, v0, Some(l), DEFAULT_EVENT_CAP, rng),
    }
}

pub fn simulate_flight_model2<R: Rng + ?Sized>(
    params: &SimParams,
    x0: &[f64],
    v0: &[f64],
    rng: &mut R,
    repr: Model2Repr,
) -> Result<FlightPath> {
    let l = lamperti_sample(params.nu, rng).value;
    simulate_flight_model2_given(params, l, x0, v0, repr, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlightModel {
    Markov,
    Model1,
    Model2,
}

/// Positions and directions of one flight at a list of times.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightStates {
    /// Flattened (times × d).
    pub positions: Vec<f64>,
    pub directions: Vec<f64>,
    pub mixture_draw: Option<f64>,
    pub n_events: usize,
    /// True when the Gaussian shortcut replaced exact event simulation.
    pub shortcut: bool,
}

/// Mean squared displacement of a Markov flight with rate `rate`, speed `c`.
pub fn msd_markov(rate: f64, c: f64, t: f64) -> f64 {
    let x = rate * t;
    if x < 1e-4 {
        // series of x - 1 + e^{-x}
        return c * c * t * t * (1.0 - x / 3.0 + x * x / 12.0);
    }
    2.0 * c * c / (rate * rate) * (x - 1.0 + (-x).exp())
}

/// Samples flight states at increasing `times` without storing the path.
///
/// When `shortcut` is `Some(k)` and the expected number of events up to
/// the last time exceeds `k`, each inter-time increment is replaced by a
/// Gaussian with the exact conditional mean and the exact mean squared
/// displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSampler {
    pub model: FlightModel,
    pub params: SimParams,
    pub shortcut: Option<f64>,
    pub event_cap: usize,
    /// Model 2 only: draws above this are rejected and redrawn.
    pub l_max: Option<f64>,
}

impl StateSampler {
    pub fn new(model: FlightModel, params: SimParams) -> Self {
        Self { model, params, shortcut: Some(1e5), event_cap: DEFAULT_EVENT_CAP, l_max: None }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x0: &[f64], v0: &[f64], times: &[f64], rng: &mut R) -> Result<FlightStates> {
        let l = match self.model {
            FlightModel::Markov => None,
            _ => Some(loop {
                let l = lamperti_sample(self.params.nu, rng).value;
                if self.l_max.is_none_or(|m| l <= m) {
                    break l;
                }
            }),
        };
        self.sample_given(l, x0, v0, times, rng)
    }

    pub fn sample_given<R: Rng + ?Sized>(
        &self,
        l: Option<f64>,
        x0: &[f64],
        v0: &[f64],
        times: &[f64],
        rng: &mut R,
    ) -> Result<FlightStates> {
        let p = &self.params;
        check_start(p, x0, v0)?;
        if times.windows(2).any(|w| !(w[1] >= w[0])) || times.first().is_some_and(|&t| t < 0.0) {
            return domain("sample times must be nonnegative and nondecreasing");
        }
        let lv = l.unwrap_or(1.0);
        let (rate, speed) = match self.model {
            FlightModel::Markov => (p.lambda, p.c),
            FlightModel::Model1 => (p.lambda * lv, p.c),
            FlightModel::Model2 => (p.lambda * lv, p.c * lv),
        };
        let d = p.d;
        let t_last = times.last().copied().unwrap_or(0.0);
        let use_shortcut = self.shortcut.is_some_and(|k| rate * t_last > k);
        let mut pos = x0.to_vec();
        let mut dir = v0.to_vec();
        let mut positions = Vec::with_capacity(times.len() * d);
        let mut directions = Vec::with_capacity(times.len() * d);
        let mut n_events = 0usize;
        let mut t = 0.0;
        if use_shortcut {
            let mut fresh = vec![0.0; d];
            for &tau in times {
                let dt = tau - t;
                let keep = (-rate * dt).exp();
                let drift = speed * (-(-rate * dt).exp_m1()) / rate;
                let var = ((msd_markov(rate, speed, dt) - drift * drift) / d as f64).max(0.0);
                let sd = var.sqrt();
                for k in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    pos[k] += drift * dir[k] + sd * z;
                }
                if rng.random::<f64>() >= keep {
                    fill_uniform_direction(&mut fresh, rng);
                    dir.copy_from_slice(&fresh);
                }
                t = tau;
                positions.extend_from_slice(&pos);
                directions.extend_from_slice(&dir);
            }
        } else {
            let mut next = rng.sample::<f64, _>(Exp1) / rate;
            for &tau in times {
                while next <= tau {
                    for k in 0..d {
                        pos[k] += speed * (next - t) * dir[k];
                    }
                    t = next;
                    fill_uniform_direction(&mut dir, rng);
                    n_events += 1;
                    if n_events > self.event_cap {
                        return Err(Error::EventCap { cap: self.event_cap });
                    }
                    next = t + rng.sample::<f64, _>(Exp1) / rate;
                }
                for k in 0..d {
                    positions.push(pos[k] + speed * (tau - t) * dir[k]);
                }
                directions.extend_from_slice(&dir);
            }
        }
        Ok(FlightStates { positions, directions, mixture_draw: l, n_events, shortcut: use_shortcut })
    }
}

/// P(N_t = n) for the exchangeable fractional Poisson process.
pub fn efpp_pmf(nu: FracOrder, lambda: f64, t: f64, n: u64) -> Result<f64> {
    if !(t >= 0.0) || !(lambda > 0.0) {
        return domain("need t >= 0 and lambda > 0");
    }
    poisson_mixture_pmf(nu, lambda * t, n)
}

/// P(N_t > n), evaluated independently of [`efpp_pmf`].
pub fn efpp_tail(nu: FracOrder, lambda: f64, t: f64, n: u64) -> Result<f64> {
    if !(t > 0.0) || !(lambda > 0.0) {
        return domain("need t > 0 and lambda > 0");
    }
    poisson_mixture_tail(nu, lambda * t, n)
}

/// P(N_{dt} ≥ 1) = 1 − M_ν(−(λ dt)^ν).
pub fn small_interval_jump_prob(nu: FracOrder, lambda: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) || !(lambda > 0.0) {
        return domain("need dt > 0 and lambda > 0");
    }
    if nu.is_one() {
        return Ok(-(-lambda * dt).exp_m1());
    }
    Ok(1.0 - mittag_leffler(nu, -(lambda * dt).powf(nu.get()))?)
}

/// Model-1 mean squared displacement, 2c² ∫₀ᵗ ∫₀^{w₁} M_ν(−(λw₂)^ν) dw₂ dw₁,
/// evaluated as 2c² ∫₀ᵗ (t − w) M_ν(−(λw)^ν) dw.
pub fn msd_model1(nu: FracOrder, lambda: f64, c: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !(lambda > 0.0) || !(c > 0.0) {
        return domain("need t >= 0, lambda > 0, c > 0");
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let scale = 1.0 / lambda;
    let cands: Vec<f64> = (-3..=8).map(|k| scale * 10f64.powi(k)).collect();
    let pts = breakpoints(0.0, t, &cands);
    let v = nu.get();
    let mut failure = None;
    let integral = integrate(
        |w| match mittag_leffler(nu, -(lambda * w).powf(v)) {
            Ok(m) => (t - w) * m,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        &pts,
        &QuadratureSpec::new(1e-300, 1e-10, 4000)?,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(2.0 * c * c * integral)
}

/// L h(x) = ∫ h(x, v') μ(dv') by Monte Carlo over uniform directions.
pub fn scattering_average<H, R>(h: H, x: &[f64], n_mc: usize, rng: &mut R) -> Result<Estimate>
where
    H: Fn(&[f64], &[f64]) -> f64,
    R: Rng + ?Sized,
{
    if x.is_empty() || n_mc == 0 {
        return domain("need d >= 1 and n_mc >= 1");
    }
    let mut v = vec![0.0; x.len()];
    let mut acc = Running::default();
    for _ in 0..n_mc {
        fill_uniform_direction(&mut v, rng);
        acc.push(h(x, &v));
    }
    Ok(acc.estimate())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuhamelTerm {
    pub n: u64,
    pub weight: f64,
    pub conditional: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuhamelEstimate {
    pub value: f64,
    pub se: f64,
    /// Probability mass of more than N events, bounding the truncation
    /// error by sup|h| times this value.
    pub tail_bound: f64,
    pub terms: Vec<DuhamelTerm>,
}

impl DuhamelEstimate {
    pub fn tail_exceeds(&self, tol: f64) -> bool {
        self.tail_bound > tol
    }
}

/// Truncated Duhamel series of the model-1 semigroup applied to `h`
/// at (x, v) and time `params.t_max`.
#[allow(clippy::too_many_arguments)]
pub fn duhamel_model1<H, R>(
    h: H,
    x: &[f64],
    v: &[f64],
    params: &SimParams,
    truncation: u64,
    n_mc: usize,
    rng: &mut R,
) -> Result<DuhamelEstimate>
where
    H: Fn(&[f64], &[f64]) -> f64,
    R: Rng + ?Sized,
{
    check_start(params, x, v)?;
    if truncation > 8 || n_mc == 0 {
        return domain("truncation must be at most 8 and n_mc positive");
    }
    let (d, t, c) = (params.d, params.t_max, params.c);
    let mut terms = Vec::new();
    let mut value = 0.0;
    let mut var = 0.0;
    let mut pos = vec![0.0; d];
    let mut dir = vec![0.0; d];
    let mut times = vec![0.0; truncation as usize];
    for n in 0..=truncation {
        let weight = efpp_pmf(params.nu, params.lambda, t, n)?;
        let conditional = if n == 0 {
            for k in 0..d {
                pos[k] = x[k] + c * t * v[k];
            }
            Estimate { mean: h(&pos, v), se: 0.0 }
        } else {
            let mut acc = Running::default();
            let ts = &mut times[..n as usize];
            for _ in 0..n_mc {
                ts.iter_mut().for_each(|s| *s = t * rng.random::<f64>());
                ts.sort_by(f64::total_cmp);
                pos.copy_from_slice(x);
                dir.copy_from_slice(v);
                let mut last = 0.0;
                for &s in ts.iter() {
                    for k in 0..d {
                        pos[k] += c * (s - last) * dir[k];
                    }
                    fill_uniform_direction(&mut dir, rng);
                    last = s;
                }
                for k in 0..d {
                    pos[k] += c * (t - last) * dir[k];
                }
                acc.push(h(&pos, &dir));
            }
            acc.estimate()
        };
        value += weight * conditional.mean;
        var += (weight * conditional.se).powi(2);
        terms.push(DuhamelTerm { n, weight, conditional });
    }
    let tail_bound = efpp_tail(params.nu, params.lambda, t, truncation)?;
    Ok(DuhamelEstimate { value, se: var.sqrt(), tail_bound, terms })
}
