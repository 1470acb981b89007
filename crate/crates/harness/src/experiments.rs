//! Boltzmann-Grad and diffusive-limit experiments.

use mlz_core::anomdiff::{sample_w, TimeGrid};
use mlz_core::flights::{FlightModel, SimParams, StateSampler};
use mlz_core::lorentz::{simulate_lorentz_model1, simulate_lorentz_model2_given, LorentzParams};
use mlz_core::specfun::lamperti_sample;
use mlz_core::stats::{
    decreasing_trend_test, energy_distance, ks_two_sample, mean_estimate, two_sample_distance, Estimate, Metric,
    PermutationSettings, TrendResult,
};
use mlz_core::streams::stream;
use mlz_core::FracOrder;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{config_error, Result};
use crate::exec::{map_batches, stream_index, DEFAULT_BATCH};

const ROLE_SAMPLE: u64 = 0;
const ROLE_REFERENCE: u64 = 1;
const ROLE_PERMUTATION: u64 = 2;
const ROLE_TREND: u64 = 3;

/// Per-point cap of the permutation null in the multivariate energy test.
pub const ENERGY_PERMUTATION_POINTS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    /// (R, rho) or (c, lambda).
    pub scale: [f64; 2],
    pub n: usize,
    pub distance: f64,
    pub p_value: f64,
    pub components: Vec<Component>,
    /// Distance recomputed on each replicate batch.
    pub batch_distances: Vec<f64>,
    /// Lorentz runs only.
    pub recollision_fraction: Option<Estimate>,
    /// Collisions (Lorentz) or scattering events (flights) per sample.
    pub mean_events: Estimate,
    pub reference_mean_events: Option<Estimate>,
}

/// Sample and reference clouds of one level, row-major with `dim` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelClouds {
    pub dim: usize,
    pub sample: Vec<f64>,
    pub reference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSummary {
    pub kind: ExperimentKind,
    pub levels: Vec<LevelSummary>,
    pub trend: TrendResult,
    #[serde(skip)]
    pub clouds: Vec<LevelClouds>,
}

impl EmpiricalSummary {
    pub fn distances(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.distance).collect()
    }
}

/// Componentwise x/(1+|x|): a bijection onto (−1, 1) that gives heavy-tailed
/// clouds finite moments without changing whether two laws agree.
pub fn squash(x: f64) -> f64 {
    x / (1.0 + x.abs())
}

fn truncated_lamperti<R: Rng + ?Sized>(nu: FracOrder, l_max: Option<f64>, rng: &mut R) -> f64 {
    loop {
        let l = lamperti_sample(nu, rng).value;
        if l_max.is_none_or(|m| l <= m) {
            return l;
        }
    }
}

struct BgObservation {
    displacement: [f64; 3],
    direction: [f64; 3],
    recollided: bool,
    events: usize,
}

const X0: [f64; 3] = [0.0; 3];
const V0: [f64; 3] = [0.0, 0.0, 1.0];

fn scalars(obs: &[BgObservation]) -> (Vec<f64>, Vec<f64>) {
    let r = obs.iter().map(|o| o.displacement.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let cos = obs.iter().map(|o| o.direction[2]).collect();
    (r, cos)
}

fn bg_level(cfg: &ExperimentConfig, level: usize, radius: f64, rho: f64) -> Result<(LevelSummary, LevelClouds)> {
    let p = cfg.params;
    let n = cfg.samples_per_level;
    let lp = LorentzParams::new(p.nu, rho, radius, p.c, p.t_max)?;
    let kind = cfg.kind;
    let lorentz = map_batches(cfg.seed, level, ROLE_SAMPLE, n, DEFAULT_BATCH, |rng| {
        let traj = match kind {
            ExperimentKind::BgModel2 => {
                let l = truncated_lamperti(p.nu, cfg.l_max, rng);
                simulate_lorentz_model2_given(X0, V0, &lp, l, rng)?
            }
            _ => simulate_lorentz_model1(X0, V0, &lp, rng)?,
        };
        Ok(BgObservation {
            displacement: traj.final_position(),
            direction: traj.final_direction(),
            recollided: traj.has_recollision(),
            events: traj.n_collisions(),
        })
    })?;
    let model = if kind == ExperimentKind::BgModel2 { FlightModel::Model2 } else { FlightModel::Model1 };
    let mut sampler = StateSampler::new(model, SimParams::new(p.nu, p.lambda, p.c, 3, p.t_max)?);
    if model == FlightModel::Model2 {
        sampler.l_max = cfg.l_max;
    }
    let flights = map_batches(cfg.seed, level, ROLE_REFERENCE, n, DEFAULT_BATCH, |rng| {
        let s = sampler.sample(&X0, &V0, &[p.t_max], rng)?;
        Ok(BgObservation {
            displacement: [s.positions[0], s.positions[1], s.positions[2]],
            direction: [s.directions[0], s.directions[1], s.directions[2]],
            recollided: false,
            events: s.n_events,
        })
    })?;
    let (r_a, cos_a) = scalars(&lorentz);
    let (r_b, cos_b) = scalars(&flights);
    let settings = PermutationSettings { shuffles: cfg.shuffles, max_points: ENERGY_PERMUTATION_POINTS };
    let mut rng = stream(cfg.seed, stream_index(level, ROLE_PERMUTATION, 0));
    let ks_r = two_sample_distance(&r_a, &r_b, 1, Metric::KsScalar, &settings, &mut rng)?;
    let ks_cos = two_sample_distance(&cos_a, &cos_b, 1, Metric::KsScalar, &settings, &mut rng)?;
    let mut components = vec![
        Component { name: "ks_displacement".into(), statistic: ks_r.statistic, p_value: ks_r.p_value },
        Component { name: "ks_direction_cosine".into(), statistic: ks_cos.statistic, p_value: ks_cos.p_value },
    ];
    if cfg.full_energy {
        let cloud = |obs: &[BgObservation]| -> Vec<f64> {
            obs.iter()
                .flat_map(|o| o.displacement.iter().map(|&x| squash(x)).chain(o.direction.iter().copied()))
                .collect()
        };
        let e = two_sample_distance(&cloud(&lorentz), &cloud(&flights), 6, Metric::Energy, &settings, &mut rng)?;
        components.push(Component { name: "energy_6d".into(), statistic: e.statistic, p_value: e.p_value });
    }
    let distance = ks_r.statistic.max(ks_cos.statistic);
    // Bonferroni over the two scalar functionals
    let p_value = (2.0 * ks_r.p_value.min(ks_cos.p_value)).min(1.0);
    let batch_distances = chunks(n, cfg.batches)
        .map(|(lo, hi)| {
            let a = ks_two_sample(&r_a[lo..hi], &r_b[lo..hi])?.statistic;
            let b = ks_two_sample(&cos_a[lo..hi], &cos_b[lo..hi])?.statistic;
            Ok(a.max(b))
        })
        .collect::<mlz_core::Result<Vec<f64>>>()?;
    let recollided: Vec<f64> = lorentz.iter().map(|o| f64::from(u8::from(o.recollided))).collect();
    let events = |obs: &[BgObservation]| mean_estimate(&obs.iter().map(|o| o.events as f64).collect::<Vec<_>>());
    let interleave = |r: &[f64], c: &[f64]| r.iter().zip(c).flat_map(|(&a, &b)| [a, b]).collect::<Vec<f64>>();
    let summary = LevelSummary {
        level,
        scale: [radius, rho],
        n,
        distance,
        p_value,
        components,
        batch_distances,
        recollision_fraction: Some(mean_estimate(&recollided)),
        mean_events: events(&lorentz),
        reference_mean_events: Some(events(&flights)),
    };
    let clouds = LevelClouds { dim: 2, sample: interleave(&r_a, &cos_a), reference: interleave(&r_b, &cos_b) };
    Ok((summary, clouds))
}

fn chunks(n: usize, batches: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..batches).map(move |b| (b * n / batches, (b + 1) * n / batches))
}

fn finish(cfg: &ExperimentConfig, levels: Vec<LevelSummary>, clouds: Vec<LevelClouds>) -> Result<EmpiricalSummary> {
    let groups: Vec<Vec<f64>> = levels.iter().map(|l| l.batch_distances.clone()).collect();
    let mut rng = stream(cfg.seed, stream_index(levels.len(), ROLE_TREND, 0));
    let trend = decreasing_trend_test(&groups, cfg.shuffles, &mut rng)?;
    Ok(EmpiricalSummary { kind: cfg.kind, levels, trend, clouds })
}

/// Lorentz gas against its limit flight along a Boltzmann-Grad schedule,
/// compared through the single-time laws of |X_t − x0| and V_t·v0.
pub fn run_bg_experiment(cfg: &ExperimentConfig) -> Result<EmpiricalSummary> {
    cfg.validate()?;
    if !cfg.kind.is_bg() {
        return config_error("not a Boltzmann-Grad experiment");
    }
    let mut levels = Vec::new();
    let mut clouds = Vec::new();
    for (i, &[r, rho]) in cfg.schedule.iter().enumerate() {
        let (s, c) = bg_level(cfg, i, r, rho)?;
        levels.push(s);
        clouds.push(c);
    }
    finish(cfg, levels, clouds)
}

fn diffusive_level(cfg: &ExperimentConfig, level: usize, c: f64, lambda: f64) -> Result<(LevelSummary, LevelClouds)> {
    let p = cfg.params;
    let n = cfg.samples_per_level;
    let d = p.d;
    let times = &cfg.times;
    let t_last = *times.last().expect("validated nonempty");
    let model = if cfg.kind == ExperimentKind::DiffusiveFlight2 { FlightModel::Model2 } else { FlightModel::Model1 };
    let mut sampler = StateSampler::new(model, SimParams::new(p.nu, lambda, c, d, t_last)?);
    if model == FlightModel::Model2 {
        sampler.l_max = cfg.l_max;
    }
    let x0 = vec![0.0; d];
    let mut v0 = vec![0.0; d];
    v0[d - 1] = 1.0;
    let rows = map_batches(cfg.seed, level, ROLE_SAMPLE, n, DEFAULT_BATCH, |rng| {
        let s = sampler.sample(&x0, &v0, times, rng)?;
        Ok((s.positions.iter().map(|&x| squash(x)).collect::<Vec<f64>>(), s.n_events))
    })?;
    let grid = TimeGrid::new(times.clone())?;
    // per-coordinate variance of the flight limit is (2/d)(c²/λ)t
    let scale = (2.0 / d as f64).sqrt();
    let reference: Vec<f64> = map_batches(cfg.seed, level, ROLE_REFERENCE, n, DEFAULT_BATCH, |rng| {
        Ok(sample_w(p.nu, &grid, d, rng).positions.iter().map(|&x| squash(scale * x)).collect::<Vec<f64>>())
    })?
    .concat();
    let events = mean_estimate(&rows.iter().map(|r| r.1 as f64).collect::<Vec<_>>());
    let sample: Vec<f64> = rows.into_iter().flat_map(|r| r.0).collect();
    let dim = times.len() * d;
    let settings = PermutationSettings { shuffles: cfg.shuffles, max_points: ENERGY_PERMUTATION_POINTS };
    let mut rng = stream(cfg.seed, stream_index(level, ROLE_PERMUTATION, 0));
    let e = two_sample_distance(&sample, &reference, dim, Metric::Energy, &settings, &mut rng)?;
    let batch_distances = chunks(n, cfg.batches)
        .map(|(lo, hi)| energy_distance(&sample[lo * dim..hi * dim], &reference[lo * dim..hi * dim], dim))
        .collect::<mlz_core::Result<Vec<f64>>>()?;
    let summary = LevelSummary {
        level,
        scale: [c, lambda],
        n,
        distance: e.statistic,
        p_value: e.p_value,
        components: vec![Component { name: "energy".into(), statistic: e.statistic, p_value: e.p_value }],
        batch_distances,
        recollision_fraction: None,
        mean_events: events,
        reference_mean_events: None,
    };
    Ok((summary, LevelClouds { dim, sample, reference }))
}

/// Flight fdds at `cfg.times` against the Mittag-Leffler anomalous
/// diffusion, along a c² = λ schedule, by energy distance.
pub fn run_diffusive_experiment(cfg: &ExperimentConfig) -> Result<EmpiricalSummary> {
    cfg.validate()?;
    if !cfg.kind.is_diffusive() {
        return config_error("not a diffusive experiment");
    }
    let mut levels = Vec::new();
    let mut clouds = Vec::new();
    for (i, &[c, lambda]) in cfg.schedule.iter().enumerate() {
        let (s, cl) = diffusive_level(cfg, i, c, lambda)?;
        levels.push(s);
        clouds.push(cl);
    }
    finish(cfg, levels, clouds)
}
