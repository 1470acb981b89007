//! Two-sample tests and summaries: Kolmogorov–Smirnov, chi-square,
//! energy distance with permutation p-values, and an isotonic trend test.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{domain, Error, Result};

/// Monte Carlo mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// |mean − target| in units of standard error (∞ for se = 0 and a mismatch).
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.se
        }
    }
}

/// Running mean/variance (Welford); a constant stream yields that constant exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Running) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { mean: self.mean, se: (self.variance() / self.n.max(1) as f64).sqrt() }
    }
}

pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let mut r = Running::default();
    xs.iter().for_each(|&x| r.push(x));
    r.estimate()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov tail with the Stephens small-sample correction.
pub fn kolmogorov_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return domain("sample must be nonempty");
    }
    if xs.iter().any(|x| x.is_nan()) {
        return domain("sample contains NaN");
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample KS against a CDF, which may have atoms (it is evaluated
/// both at and just below each sample point).
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<KsResult> {
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < v.len() {
        let x = v[i];
        let mut j = i;
        while j < v.len() && v[j] == x {
            j += 1;
        }
        let f = cdf(x);
        let f_below = if x.is_finite() { cdf(x - 1e-12 * x.abs().max(1e-300)) } else { f };
        d = d.max((j as f64 / n - f).abs()).max((f_below - i as f64 / n).abs());
        i = j;
    }
    Ok(KsResult { statistic: d, p_value: kolmogorov_p_value(d, n) })
}

fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let (sa, sb) = (sorted(a)?, sorted(b)?);
    let d = ks_statistic_sorted(&sa, &sb);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    Ok(KsResult { statistic: d, p_value: kolmogorov_p_value(d, na * nb / (na + nb)) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit. `probs` must cover the whole outcome space
/// (add a remainder bin); adjacent bins are merged until every expected
/// count is at least 5.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(Error::Dimension { expected: probs.len(), got: observed.len() });
    }
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        o_acc += o as f64;
        e_acc += p * nf;
        if e_acc >= 5.0 {
            bins.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => bins.push((o_acc, e_acc)),
        }
    }
    if bins.len() < 2 {
        return domain("chi-square needs at least two bins with expected count >= 5");
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(ChiSquareResult { statistic, dof, p_value: dist.sf(statistic) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    KsScalar,
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationSettings {
    pub shuffles: usize,
    /// Per-cloud cap on the points entering the permutation null in
    /// dimension > 1 (the first points of each cloud are used).
    pub max_points: usize,
}

impl Default for PermutationSettings {
    fn default() -> Self {
        Self { shuffles: 200, max_points: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Σ_{i,j} |x_i − x_j| for sorted 1-D data.
fn pair_sum_sorted(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    v.iter().enumerate().map(|(i, &x)| x * (2.0 * i as f64 - n + 1.0)).sum::<f64>() * 2.0
}

/// 1-D energy distance in O(n log n) through sorted pair sums.
fn energy_1d(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let mut pooled = [sa.as_slice(), sb.as_slice()].concat();
    pooled.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let saa = pair_sum_sorted(&sa);
    let sbb = pair_sum_sorted(&sb);
    let sab = 0.5 * (pair_sum_sorted(&pooled) - saa - sbb);
    2.0 * sab / (na * nb) - saa / (na * na) - sbb / (nb * nb)
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Row sums of cross distances, parallel over rows, summed in row order.
fn cross_sum(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let rows: Vec<f64> = a.par_chunks(dim).map(|x| b.chunks(dim).map(|y| dist(x, y)).sum::<f64>()).collect();
    rows.iter().sum()
}

/// V-statistic energy distance 2E|X−Y| − E|X−X′| − E|Y−Y′|.
pub fn energy_distance(a: &[f64], b: &[f64], dim: usize) -> Result<f64> {
    check_clouds(a, b, dim)?;
    if dim == 1 {
        return Ok(energy_1d(a, b));
    }
    let (na, nb) = ((a.len() / dim) as f64, (b.len() / dim) as f64);
    let sab = cross_sum(a, b, dim);
    let saa = cross_sum(a, a, dim);
    let sbb = cross_sum(b, b, dim);
    Ok(2.0 * sab / (na * nb) - saa / (na * na) - sbb / (nb * nb))
}

fn check_clouds(a: &[f64], b: &[f64], dim: usize) -> Result<()> {
    if dim == 0 || a.is_empty() || b.is_empty() {
        return domain("clouds must be nonempty with dim >= 1");
    }
    for c in [a, b] {
        if c.len() % dim != 0 {
            return Err(Error::Dimension { expected: dim, got: c.len() % dim });
        }
        if c.iter().any(|x| x.is_nan()) {
            return domain("cloud contains NaN");
        }
    }
    Ok(())
}

/// Energy distance of a labelled split from a packed upper-triangular distance matrix.
fn split_energy(tri: &[f32], n: usize, in_a: &[bool], na: usize) -> f64 {
    let nb = n - na;
    let (mut saa, mut sbb, mut sab) = (0.0f64, 0.0f64, 0.0f64);
    let mut k = 0;
    for i in 0..n {
        let (mut raa, mut rbb, mut rab) = (0.0f64, 0.0f64, 0.0f64);
        for j in (i + 1)..n {
            let d = tri[k] as f64;
            k += 1;
            match (in_a[i], in_a[j]) {
                (true, true) => raa += d,
                (false, false) => rbb += d,
                _ => rab += d,
            }
        }
        saa += raa;
        sbb += rbb;
        sab += rab;
    }
    let (na, nb) = (na as f64, nb as f64);
    2.0 * sab / (na * nb) - 2.0 * saa / (na * na) - 2.0 * sbb / (nb * nb)
}

/// Distance between two clouds with a permutation p-value.
pub fn two_sample_distance<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    dim: usize,
    metric: Metric,
    settings: &PermutationSettings,
    rng: &mut R,
) -> Result<DistanceResult> {
    check_clouds(a, b, dim)?;
    if metric == Metric::KsScalar && dim != 1 {
        return Err(Error::Dimension { expected: 1, got: dim });
    }
    let statistic = match metric {
        Metric::KsScalar => ks_two_sample(a, b)?.statistic,
        Metric::Energy => energy_distance(a, b, dim)?,
    };
    let shuffles = settings.shuffles;
    if dim == 1 {
        let na = a.len();
        let mut pooled = [a, b].concat();
        let mut exceed = 0usize;
        for _ in 0..shuffles {
            pooled.shuffle(rng);
            let (x, y) = pooled.split_at(na);
            let s = match metric {
                Metric::KsScalar => ks_two_sample(x, y)?.statistic,
                Metric::Energy => energy_1d(x, y),
            };
            if s >= statistic {
                exceed += 1;
            }
        }
        return Ok(DistanceResult { statistic, p_value: (1 + exceed) as f64 / (1 + shuffles) as f64 });
    }
    let ka = (a.len() / dim).min(settings.max_points);
    let kb = (b.len() / dim).min(settings.max_points);
    let pts: Vec<&[f64]> = a.chunks(dim).take(ka).chain(b.chunks(dim).take(kb)).collect();
    let n = pts.len();
    let tri: Vec<f32> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| dist(pts[i], pts[j]) as f32).collect::<Vec<f32>>())
        .collect::<Vec<_>>()
        .concat();
    let mut labels: Vec<bool> = (0..n).map(|i| i < ka).collect();
    let observed = split_energy(&tri, n, &labels, ka);
    let mut exceed = 0usize;
    for _ in 0..shuffles {
        labels.shuffle(rng);
        if split_energy(&tri, n, &labels, ka) >= observed {
            exceed += 1;
        }
    }
    Ok(DistanceResult { statistic, p_value: (1 + exceed) as f64 / (1 + shuffles) as f64 })
}

/// Weighted least-squares nonincreasing fit (pool adjacent violators).
pub fn antitonic_fit(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let k = blocks.len();
            if blocks[k - 2].0 >= blocks[k - 1].0 {
                break;
            }
            let (v2, w2, c2) = blocks.pop().expect("len > 1");
            let (v1, w1, c1) = blocks.pop().expect("len > 1");
            blocks.push(((v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, c1 + c2));
        }
    }
    blocks.iter().flat_map(|&(v, _, c)| std::iter::repeat_n(v, c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendResult {
    /// SSE of the best constant fit minus SSE of the best nonincreasing fit.
    pub statistic: f64,
    pub p_value: f64,
    pub level_means: Vec<f64>,
}

fn trend_statistic(groups: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let weights: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
    let total_w: f64 = weights.iter().sum();
    let grand = means.iter().zip(&weights).map(|(m, w)| m * w).sum::<f64>() / total_w;
    let fit = antitonic_fit(&means, &weights);
    // within-group SSE is common to both fits and cancels
    let sse_const: f64 = means.iter().zip(&weights).map(|(m, w)| w * (m - grand).powi(2)).sum();
    let sse_iso: f64 = means.iter().zip(&weights).zip(&fit).map(|((m, w), f)| w * (m - f).powi(2)).sum();
    (sse_const - sse_iso, means)
}

/// Permutation test of "nonincreasing across levels" against "constant":
/// replicate values are shuffled across levels.
pub fn decreasing_trend_test<R: Rng + ?Sized>(
    groups: &[Vec<f64>],
    shuffles: usize,
    rng: &mut R,
) -> Result<TrendResult> {
    if groups.len() < 2 || groups.iter().any(|g| g.is_empty()) {
        return domain("trend test needs at least two nonempty levels");
    }
    let (statistic, level_means) = trend_statistic(groups);
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let mut pooled: Vec<f64> = groups.concat();
    let mut exceed = 0usize;
    let mut buf: Vec<Vec<f64>> = Vec::with_capacity(groups.len());
    for _ in 0..shuffles {
        pooled.shuffle(rng);
        buf.clear();
        let mut off = 0;
        for &s in &sizes {
            buf.push(pooled[off..off + s].to_vec());
            off += s;
        }
        if trend_statistic(&buf).0 >= statistic {
            exceed += 1;
        }
    }
    Ok(TrendResult { statistic, p_value: (1 + exceed) as f64 / (1 + shuffles) as f64, level_means })
}
