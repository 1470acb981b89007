//! Lamperti-averaged semigroups: Fourier multipliers, finite-state
//! para-Markov chains, fractional powers of generators and the fractional
//! Cauchy problem they solve.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};
use crate::quad::{integrate_vec, QuadratureSpec};
use crate::specfun::{
    caputo_l1, lamperti_average_vec, lamperti_quantile, lamperti_sample, mittag_leffler, stable_sample, FracOrder,
};
use crate::stats::{ks_two_sample, KsResult};

/// Conservative Q-matrix: nonnegative off-diagonals and zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix(DMatrix<f64>);

impl GeneratorMatrix {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        if !g.is_square() || g.nrows() == 0 {
            return domain("generator must be a nonempty square matrix");
        }
        let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..g.nrows() {
            let mut sum = 0.0;
            for j in 0..g.ncols() {
                let v = g[(i, j)];
                if !v.is_finite() || (i != j && v < 0.0) {
                    return domain("generator off-diagonal entries must be finite and nonnegative");
                }
                sum += v;
            }
            if sum.abs() > 1e-12 * scale {
                return domain(format!("generator row {i} sums to {sum}, not 0"));
            }
        }
        Ok(Self(g))
    }

    /// Random conservative generator with off-diagonal rates uniform in (0, max_rate).
    pub fn random<R: Rng + ?Sized>(m: usize, max_rate: f64, rng: &mut R) -> Self {
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            let mut total = 0.0;
            for j in 0..m {
                if i != j {
                    let r = max_rate * rng.random::<f64>();
                    g[(i, j)] = r;
                    total += r;
                }
            }
            g[(i, i)] = -total;
        }
        Self(g)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    fn max_rate(&self) -> f64 {
        (0..self.size()).map(|i| -self.0[(i, i)]).fold(0.0, f64::max)
    }

    fn min_rate(&self) -> f64 {
        (0..self.size()).map(|i| -self.0[(i, i)]).filter(|&q| q > 0.0).fold(f64::INFINITY, f64::min)
    }
}

/// Matrix exponential by scaling and squaring with the degree-13 Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    expm_scaled(a, 1.0)
}

/// e^{s·A} without forming s·A, so huge |s| (up to 1e300; larger is
/// clamped) does not overflow the entries.
pub fn expm_scaled(a: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    expm_impl(a, s, false)
}

/// e^{s·G} for a conservative generator G, s ≥ 0. Rows are renormalized
/// after every squaring; otherwise a row-sum error ε grows like
/// (1+ε)^(2^k) over the k squarings that a large s needs.
pub fn generator_exp(g: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    expm_impl(g, s, true)
}

fn expm_impl(a: &DMatrix<f64>, s: f64, stochastic: bool) -> DMatrix<f64> {
    const B: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371_920_351_148_152;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let norm1 = (0..n).map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let t = s.abs().min(1e300);
    if norm1 == 0.0 || t == 0.0 {
        return id;
    }
    // squarings k with t·‖A‖/2^k ≤ θ13, worked in log2 to stay finite
    let lg = t.log2() + norm1.log2() - THETA13.log2();
    let squarings = if lg > 0.0 { lg.ceil() as i32 } else { 0 };
    let a = a * (t.log2() - f64::from(squarings)).exp2().copysign(s);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9]) + &a6 * B[7] + &a4 * B[5] + &a2 * B[3] + &id * B[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8]) + &a6 * B[6] + &a4 * B[4] + &a2 * B[2] + &id * B[0];
    let mut r = (&v - &u).lu().solve(&(&v + &u)).expect("Padé denominator is nonsingular for scaled input");
    let renormalize = |r: &mut DMatrix<f64>| {
        for mut row in r.row_iter_mut() {
            let sum = row.sum();
            row /= sum;
        }
    };
    if stochastic {
        renormalize(&mut r);
    }
    for _ in 0..squarings {
        r = &r * &r;
        if stochastic {
            renormalize(&mut r);
        }
    }
    r
}

/// ∫ e^{tψy} 𝓁(dy) = M_ν(−(t(−ψ))^ν).
pub fn averaged_multiplier(nu: FracOrder, t: f64, psi: f64) -> Result<f64> {
    if !(psi <= 0.0) || !(t >= 0.0) {
        return domain("need psi <= 0 and t >= 0");
    }
    mittag_leffler(nu, -(t * -psi).powf(nu.get()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualLevel {
    pub dt: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub levels: Vec<ResidualLevel>,
    /// log2 of successive residual ratios.
    pub orders: Vec<f64>,
    pub monotone: bool,
}

impl ResidualReport {
    fn from_levels(levels: Vec<ResidualLevel>) -> Self {
        let orders: Vec<f64> = levels.windows(2).map(|w| (w[0].max_residual / w[1].max_residual).log2()).collect();
        let monotone = levels.windows(2).all(|w| w[1].max_residual < w[0].max_residual);
        Self { levels, orders, monotone }
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Grid refinement schedule: `dt0 / 2^k` for k = 0..=refinements on [0, t_end].
/// The residual is measured on t ∈ [t_end/2, t_end]; the L1 scheme loses
/// accuracy next to t = 0 for solutions with a t^ν term.
fn refinement_grid(t_end: f64, dt0: f64, refinements: u32) -> Result<Vec<(f64, usize)>> {
    if !(t_end > 0.0 && dt0 > 0.0 && dt0 < t_end) {
        return domain("need 0 < dt0 < t_end");
    }
    let steps0 = (t_end / dt0).round() as usize;
    if ((steps0 as f64) * dt0 - t_end).abs() > 1e-9 * t_end {
        return domain("t_end must be a multiple of dt0");
    }
    Ok((0..=refinements).map(|k| (dt0 / 2f64.powi(k as i32), steps0 << k)).collect())
}

/// Residual of ∂^ν g = −(−ψ)^ν g for g(t) = averaged_multiplier(ν, t, ψ).
pub fn verify_fractional_cauchy_symbol(
    nu: FracOrder,
    psi: f64,
    t_end: f64,
    dt0: f64,
    refinements: u32,
) -> Result<ResidualReport> {
    let rate = (-psi).powf(nu.get());
    let mut levels = Vec::new();
    for (dt, steps) in refinement_grid(t_end, dt0, refinements)? {
        let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        let g = times.iter().map(|&t| averaged_multiplier(nu, t, psi)).collect::<Result<Vec<_>>>()?;
        let d = caputo_l1(&times, &g, nu)?;
        let max_residual = (steps / 2..=steps).map(|i| (d[i] + rate * g[i]).abs()).fold(0.0, f64::max);
        levels.push(ResidualLevel { dt, max_residual });
    }
    Ok(ResidualReport::from_levels(levels))
}

/// −(−G)^ν through the Phillips integral
/// ∫₀^∞ (e^{Gs} − I) ν s^{−ν−1}/Γ(1−ν) ds.
///
/// (0, s₀] with s₀ = min(1, 1/max rate) uses the termwise-integrated
/// exponential series; [s₀, 1] is integrated directly; (1, ∞) is mapped to
/// (0, 1) by s = w^{−1/ν}, under which ν s^{−ν−1} ds becomes dw.
pub fn phillips_fractional_power(g: &GeneratorMatrix, nu: FracOrder, quad: &QuadratureSpec) -> Result<DMatrix<f64>> {
    if nu.is_one() {
        return Ok(g.matrix().clone());
    }
    let v = nu.get();
    let m = g.size();
    let gm = g.matrix();
    let c = 1.0 / gamma(1.0 - v);
    let s0 = (1.0 / g.max_rate().max(1e-300)).min(1.0);

    let mut near = DMatrix::<f64>::zeros(m, m);
    let mut term = DMatrix::<f64>::identity(m, m);
    for k in 1..400 {
        let kf = k as f64;
        term = &term * gm * (s0 / kf);
        // term = (G s0)^k / k!
        let add = &term * (v * s0.powf(-v) / (kf - v));
        near += &add;
        if k > 2 && add.amax() < 1e-18 * near.amax().max(1e-300) {
            break;
        }
    }

    let flat = |mat: &DMatrix<f64>, out: &mut [f64]| out.copy_from_slice(mat.as_slice());
    let id = DMatrix::<f64>::identity(m, m);
    let mid = if s0 < 1.0 {
        integrate_vec(
            |s, out| {
                let e = generator_exp(gm, s) - &id;
                flat(&(e * (v * s.powf(-v - 1.0))), out);
            },
            &[s0, 1.0],
            m * m,
            quad,
        )?
    } else {
        vec![0.0; m * m]
    };
    let tail = integrate_vec(
        |w, out| {
            if w <= 0.0 {
                out.fill(0.0);
                return;
            }
            flat(&generator_exp(gm, w.powf(-1.0 / v)), out);
        },
        &[0.0, 0.25, 1.0],
        m * m,
        quad,
    )?;
    let mut out = near;
    for (k, o) in out.iter_mut().enumerate() {
        *o += mid[k];
        *o = c * (*o + tail[k]);
    }
    out -= &id * c;
    Ok(out)
}

/// −(−G)^ν for symmetric G via its eigendecomposition.
pub fn fractional_power_symmetric(g: &GeneratorMatrix, nu: FracOrder) -> Result<DMatrix<f64>> {
    let gm = g.matrix();
    if (gm - gm.transpose()).amax() > 1e-12 * gm.amax().max(1.0) {
        return domain("eigen route needs a symmetric generator");
    }
    let eig = gm.clone().symmetric_eigen();
    // the zero eigenvalue comes back as ±1e-16, and (1e-16)^ν is not small
    // for small ν
    let floor = 8.0 * f64::EPSILON * gm.nrows() as f64 * gm.amax();
    let p: Vec<f64> = eig.eigenvalues.iter().map(|&l| if l > -floor { 0.0 } else { -(-l).powf(nu.get()) }).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(p));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// P(t) = ∫ e^{Gty} 𝓁(dy).
pub fn para_markov_transition(
    g: &GeneratorMatrix,
    nu: FracOrder,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return domain("time must be nonnegative");
    }
    let m = g.size();
    if t == 0.0 {
        return Ok(DMatrix::identity(m, m));
    }
    let gm = g.matrix();
    if nu.is_one() {
        return Ok(expm(&(gm * t)));
    }
    let hints = [1.0 / (t * g.max_rate().max(1e-300)), 1.0 / (t * g.min_rate())];
    let v = lamperti_average_vec(
        nu,
        |y, out| out.copy_from_slice(generator_exp(gm, t * y).as_slice()),
        m * m,
        &hints,
        quad,
    )?;
    Ok(DMatrix::from_column_slice(m, m, &v))
}

/// Monte Carlo P(t) = E[exp(A·E_t)] with A = −(−G)^ν and the inverse-stable
/// time E_t = (t/S)^ν. Returns the entrywise mean and standard error.
pub fn para_markov_transition_subordinated<R: Rng + ?Sized>(
    g: &GeneratorMatrix,
    nu: FracOrder,
    t: f64,
    n_mc: usize,
    quad: &QuadratureSpec,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let a = phillips_fractional_power(g, nu, quad)?;
    let m = g.size();
    let mut sum = DMatrix::<f64>::zeros(m, m);
    let mut sum2 = DMatrix::<f64>::zeros(m, m);
    for _ in 0..n_mc {
        let e = if nu.is_one() { t } else { (t / stable_sample(nu, rng)?).powf(nu.get()) };
        let p = generator_exp(&a, e);
        sum2 += p.component_mul(&p);
        sum += p;
    }
    let n = n_mc as f64;
    let mean = &sum / n;
    let var = (&sum2 / n - mean.component_mul(&mean)) * (n / (n - 1.0));
    let se = var.map(|x| (x.max(0.0) / n).sqrt());
    Ok((mean, se))
}

/// Residual of ∂^ν P = −(−G)^ν P entrywise, with P from Lamperti quadrature.
pub fn verify_para_markov_equation(
    g: &GeneratorMatrix,
    nu: FracOrder,
    t_end: f64,
    dt0: f64,
    refinements: u32,
    quad: &QuadratureSpec,
) -> Result<ResidualReport> {
    let grids = refinement_grid(t_end, dt0, refinements)?;
    let (_, finest) = *grids.last().expect("at least one level");
    let dt_f = t_end / finest as f64;
    let m = g.size();
    let a = phillips_fractional_power(g, nu, quad)?;
    // every coarse grid is a subset of the finest
    let p: Vec<DMatrix<f64>> =
        (0..=finest).map(|i| para_markov_transition(g, nu, i as f64 * dt_f, quad)).collect::<Result<_>>()?;
    let mut levels = Vec::new();
    for (dt, steps) in grids {
        let stride = finest / steps;
        let idx: Vec<usize> = (0..=steps).map(|i| i * stride).collect();
        let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        let mut max_residual = 0.0f64;
        let rhs: Vec<DMatrix<f64>> = idx.iter().map(|&i| &a * &p[i]).collect();
        for r in 0..m {
            for c in 0..m {
                let vals: Vec<f64> = idx.iter().map(|&i| p[i][(r, c)]).collect();
                let d = caputo_l1(&times, &vals, nu)?;
                for i in steps / 2..=steps {
                    max_residual = max_residual.max((d[i] - rhs[i][(r, c)]).abs());
                }
            }
        }
        levels.push(ResidualLevel { dt, max_residual });
    }
    Ok(ResidualReport::from_levels(levels))
}

/// Piecewise-constant state path.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub jump_times: Vec<f64>,
    /// states[0] is the initial state; states[k] holds after jump k.
    pub states: Vec<usize>,
    pub horizon: f64,
    pub mixture_draw: f64,
}

impl StatePath {
    pub fn state_at(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || t > self.horizon {
            return Err(Error::BeyondHorizon { t, horizon: self.horizon });
        }
        Ok(self.states[self.jump_times.partition_point(|&x| x <= t)])
    }

    pub fn first_holding_time(&self) -> Option<f64> {
        self.jump_times.first().copied()
    }
}

fn next_state<R: Rng + ?Sized>(gm: &DMatrix<f64>, i: usize, rng: &mut R) -> usize {
    let q = -gm[(i, i)];
    let mut u = rng.random::<f64>() * q;
    let mut last = i;
    for j in 0..gm.ncols() {
        if j == i || gm[(i, j)] <= 0.0 {
            continue;
        }
        last = j;
        u -= gm[(i, j)];
        if u < 0.0 {
            return j;
        }
    }
    last
}

/// Para-Markov path: one Lamperti L, then the chain with all rates times L.
pub fn para_markov_sample<R: Rng + ?Sized>(
    g: &GeneratorMatrix,
    nu: FracOrder,
    initial: usize,
    t_max: f64,
    event_cap: usize,
    rng: &mut R,
) -> Result<StatePath> {
    if initial >= g.size() {
        return Err(Error::Dimension { expected: g.size(), got: initial });
    }
    let l = lamperti_sample(nu, rng).value;
    let gm = g.matrix();
    let mut path = StatePath { jump_times: Vec::new(), states: vec![initial], horizon: t_max, mixture_draw: l };
    let mut t = 0.0;
    let mut s = initial;
    loop {
        let q = -gm[(s, s)] * l;
        if q <= 0.0 {
            break;
        }
        t += rng.sample::<f64, _>(Exp1) / q;
        if t > t_max {
            break;
        }
        if path.jump_times.len() >= event_cap {
            return Err(Error::EventCap { cap: event_cap });
        }
        s = next_state(gm, s, rng);
        path.jump_times.push(t);
        path.states.push(s);
    }
    Ok(path)
}

/// State at time t of a para-Markov chain, drawn exactly from the row of
/// e^{G L t} without simulating jumps.
pub fn para_markov_state_at<R: Rng + ?Sized>(
    g: &GeneratorMatrix,
    nu: FracOrder,
    initial: usize,
    t: f64,
    rng: &mut R,
) -> Result<usize> {
    if initial >= g.size() {
        return Err(Error::Dimension { expected: g.size(), got: initial });
    }
    let l = lamperti_sample(nu, rng).value;
    let p = generator_exp(g.matrix(), l * t);
    let mut u = rng.random::<f64>();
    for j in 0..g.size() {
        u -= p[(initial, j)];
        if u < 0.0 {
            return Ok(j);
        }
    }
    Ok(g.size() - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeChangeReport {
    pub t: f64,
    pub n: usize,
    pub ks: KsResult,
}

/// Two-sample comparison of t·L (Lamperti quantile transform) against
/// H₁(L₂(t)) with L₂(t) = (t/H₂(1))^ν and H₁(s) = s^{1/ν} H₁(1).
pub fn check_time_change_identity<R: Rng + ?Sized>(
    nu: FracOrder,
    t: f64,
    n_mc: usize,
    rng: &mut R,
) -> Result<TimeChangeReport> {
    if nu.is_one() || !(t > 0.0) || n_mc == 0 {
        return domain("time-change check needs nu < 1, t > 0, n > 0");
    }
    let v = nu.get();
    let mut a = Vec::with_capacity(n_mc);
    let mut b = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let u: f64 = rng.sample(rand::distr::Open01);
        a.push(t * lamperti_quantile(nu, u)?);
        let inverse_time = (t / stable_sample(nu, rng)?).powf(v);
        b.push(inverse_time.powf(1.0 / v) * stable_sample(nu, rng)?);
    }
    Ok(TimeChangeReport { t, n: n_mc, ks: ks_two_sample(&a, &b)? })
}
