//! Mittag-Leffler anomalous diffusion W_t = B_{Lt}: finite-dimensional
//! sampling and characteristic functions.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::quad::QuadratureSpec;
use crate::specfun::{lamperti_average, lamperti_sample, mittag_leffler, FracOrder};
use crate::stats::{Estimate, Running};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("time grid must be nonempty, nonnegative and strictly increasing");
        }
        Ok(Self(times))
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, a: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|t| a * t).collect())
    }
}

/// Block-diagonal covariance with d copies of [min(t_h, t_k)].
/// Index convention for vectors in ℝ^{nd}: coordinate j, time h ↦ j·n + h.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBlock {
    pub n: usize,
    pub d: usize,
    pub q: DMatrix<f64>,
}

pub fn build_q(grid: &TimeGrid, d: usize) -> CovarianceBlock {
    let t = grid.times();
    let n = t.len();
    let mut q = DMatrix::zeros(n * d, n * d);
    for j in 0..d {
        for h in 0..n {
            for k in 0..n {
                q[(j * n + h, j * n + k)] = t[h].min(t[k]);
            }
        }
    }
    CovarianceBlock { n, d, q }
}

/// One draw of W on the grid, flattened time-major (time i, coordinate k ↦ i·d + k).
#[derive(Debug, Clone, PartialEq)]
pub struct WSample {
    pub positions: Vec<f64>,
    pub mixture_draw: f64,
}

pub fn sample_w_given<R: Rng + ?Sized>(l: f64, grid: &TimeGrid, d: usize, rng: &mut R) -> WSample {
    let mut positions = Vec::with_capacity(grid.len() * d);
    let mut cur = vec![0.0; d];
    let mut prev = 0.0;
    for &t in grid.times() {
        let sd = (l * (t - prev)).sqrt();
        for c in cur.iter_mut() {
            *c += sd * rng.sample::<f64, _>(StandardNormal);
        }
        positions.extend_from_slice(&cur);
        prev = t;
    }
    WSample { positions, mixture_draw: l }
}

pub fn sample_w<R: Rng + ?Sized>(nu: FracOrder, grid: &TimeGrid, d: usize, rng: &mut R) -> WSample {
    let l = lamperti_sample(nu, rng).value;
    sample_w_given(l, grid, d, rng)
}

/// E[e^{i⟨u, W_t⟩}] = M_ν(−(|u|² t/2)^ν).
pub fn charfun_w(nu: FracOrder, u: &[f64], t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return domain("time must be nonnegative");
    }
    let u2: f64 = u.iter().map(|x| x * x).sum();
    mittag_leffler(nu, -(0.5 * u2 * t).powf(nu.get()))
}

/// E[e^{i⟨u, (W_{t_1},…,W_{t_n})⟩}] = M_ν(−(½⟨u, Qu⟩)^ν), u in coordinate-major order.
pub fn charfun_w_multi(nu: FracOrder, u: &[f64], grid: &TimeGrid, d: usize) -> Result<f64> {
    let n = grid.len();
    if u.len() != n * d {
        return Err(Error::Dimension { expected: n * d, got: u.len() });
    }
    let q = build_q(grid, d).q;
    let uv = nalgebra::DVector::from_column_slice(u);
    let quad = uv.dot(&(&q * &uv)).max(0.0);
    mittag_leffler(nu, -(0.5 * quad).powf(nu.get()))
}

/// Monte Carlo estimate of E[cos⟨u, W⟩] on the grid (u coordinate-major).
pub fn charfun_w_mc<R: Rng + ?Sized>(
    nu: FracOrder,
    u: &[f64],
    grid: &TimeGrid,
    d: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let n = grid.len();
    if u.len() != n * d {
        return Err(Error::Dimension { expected: n * d, got: u.len() });
    }
    let mut acc = Running::default();
    for _ in 0..n_mc {
        let w = sample_w(nu, grid, d, rng);
        let mut phase = 0.0;
        for h in 0..n {
            for j in 0..d {
                phase += u[j * n + h] * w.positions[h * d + j];
            }
        }
        acc.push(phase.cos());
    }
    Ok(acc.estimate())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarityReport {
    pub analytic_gap: f64,
    /// (scaled grid with u, original grid with √a·u), when requested.
    pub empirical: Option<(Estimate, Estimate)>,
    pub passed: bool,
}

/// Checks W_{a·} =_d √a W_· through characteristic functions.
pub fn self_similarity_check<R: Rng + ?Sized>(
    nu: FracOrder,
    a: f64,
    grid: &TimeGrid,
    u: &[f64],
    d: usize,
    empirical: Option<(usize, &mut R)>,
) -> Result<SelfSimilarityReport> {
    if !(a > 0.0) {
        return domain("scale must be positive");
    }
    let scaled = grid.scaled(a)?;
    let su: Vec<f64> = u.iter().map(|x| a.sqrt() * x).collect();
    let lhs = charfun_w_multi(nu, u, &scaled, d)?;
    let rhs = charfun_w_multi(nu, &su, grid, d)?;
    let analytic_gap = (lhs - rhs).abs();
    let mut passed = analytic_gap < 1e-12;
    let empirical = match empirical {
        None => None,
        Some((n_mc, rng)) => {
            let e1 = charfun_w_mc(nu, u, &scaled, d, n_mc, rng)?;
            let e2 = charfun_w_mc(nu, &su, grid, d, n_mc, rng)?;
            passed &= (e1.mean - e2.mean).abs() < 3.0 * (e1.se.powi(2) + e2.se.powi(2)).sqrt();
            Some((e1, e2))
        }
    };
    Ok(SelfSimilarityReport { analytic_gap, empirical, passed })
}

/// Density of W_t at x (d ≤ 3) as a Lamperti mixture of Gaussians.
pub fn density_w(nu: FracOrder, x: &[f64], t: f64) -> Result<f64> {
    let d = x.len();
    if d == 0 || d > 3 || !(t > 0.0) {
        return domain("density needs 1 <= d <= 3 and t > 0");
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let g = move |l: f64| {
        let s = l * t;
        if s <= 0.0 || !s.is_finite() {
            return 0.0;
        }
        (-(r2 / (2.0 * s))).exp() / (2.0 * PI * s).powf(d as f64 / 2.0)
    };
    let hint = if r2 > 0.0 { r2 / (d as f64 * t) } else { 1.0 / t };
    lamperti_average(nu, g, &[hint, 1.0], &QuadratureSpec::relative(1e-10))
}
