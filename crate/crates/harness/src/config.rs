//! Experiment configuration, read from JSON with unknown keys rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use mlz_core::flights::SimParams;
use mlz_core::FracOrder;
use serde::{Deserialize, Serialize};

use crate::error::{config_error, Result};

/// Relative tolerance of the scaling constraints.
pub const SCALING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BgModel1,
    BgModel2,
    DiffusiveFlight1,
    DiffusiveFlight2,
    LawCheck,
}

impl ExperimentKind {
    pub fn is_bg(self) -> bool {
        matches!(self, Self::BgModel1 | Self::BgModel2)
    }

    pub fn is_diffusive(self) -> bool {
        matches!(self, Self::DiffusiveFlight1 | Self::DiffusiveFlight2)
    }
}

fn default_times() -> Vec<f64> {
    vec![0.5, 1.0]
}

fn default_batches() -> usize {
    10
}

fn default_shuffles() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Law-check suite id (law-check only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    pub params: SimParams,
    /// (R, rho) pairs for BG experiments, (c, lambda) pairs for diffusive ones.
    #[serde(default)]
    pub schedule: Vec<[f64; 2]>,
    #[serde(default)]
    pub samples_per_level: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Observation times of the diffusive experiments.
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    /// Replicate batches per level for the trend test.
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default = "default_shuffles")]
    pub shuffles: usize,
    /// Model-2 truncation L <= l_max, applied to both compared processes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<f64>,
    /// BG only: also report the 6-dimensional energy distance of (X_t − x0, V_t).
    #[serde(default)]
    pub full_energy: bool,
}

impl ExperimentConfig {
    /// BG schedule over `radii` with λ = c = 1 and t = 1 unless changed afterwards.
    pub fn bg(kind: ExperimentKind, nu: FracOrder, radii: &[f64], n: usize, seed: u64) -> Result<Self> {
        let params = SimParams::new(nu, 1.0, 1.0, 3, 1.0)?;
        let schedule = radii.iter().map(|&r| [r, params.lambda / (params.c * PI * r * r)]).collect();
        let l_max = (kind == ExperimentKind::BgModel2).then_some(1e3);
        let cfg = Self::base(kind, params, schedule, n, seed, l_max);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Diffusive schedule c² = λ over `lambdas`, in dimension 3.
    pub fn diffusive(kind: ExperimentKind, nu: FracOrder, lambdas: &[f64], n: usize, seed: u64) -> Result<Self> {
        let params = SimParams::new(nu, 1.0, 1.0, 3, 1.0)?;
        let schedule = lambdas.iter().map(|&l| [l.sqrt(), l]).collect();
        let cfg = Self::base(kind, params, schedule, n, seed, None);
        cfg.validate()?;
        Ok(cfg)
    }

    fn base(
        kind: ExperimentKind,
        params: SimParams,
        schedule: Vec<[f64; 2]>,
        n: usize,
        seed: u64,
        l_max: Option<f64>,
    ) -> Self {
        Self {
            kind,
            suite: None,
            params,
            schedule,
            samples_per_level: n,
            seed,
            output: None,
            times: default_times(),
            batches: default_batches(),
            shuffles: default_shuffles(),
            l_max,
            full_energy: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks the scaling constraints and sizes; run before any simulation.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.kind == ExperimentKind::LawCheck {
            if self.suite.as_deref().is_none_or(str::is_empty) {
                return config_error("law-check needs a suite id");
            }
            return Ok(());
        }
        if self.schedule.is_empty() {
            return config_error("schedule must not be empty");
        }
        if self.samples_per_level < 2 || self.batches == 0 || self.samples_per_level < self.batches {
            return config_error("need samples_per_level >= batches >= 1 and samples_per_level >= 2");
        }
        if self.l_max.is_some_and(|m| m.is_nan() || m <= 0.0) {
            return config_error("l_max must be positive");
        }
        let p = &self.params;
        for (i, &[a, b]) in self.schedule.iter().enumerate() {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return config_error(format!("schedule level {i}: entries must be positive"));
            }
            if self.kind.is_bg() {
                if p.d != 3 {
                    return config_error("BG experiments run in d = 3");
                }
                let rate = b * p.c * PI * a * a;
                if (rate - p.lambda).abs() > SCALING_TOL * p.lambda {
                    return config_error(format!(
                        "schedule level {i}: rho c pi R^2 = {rate} differs from lambda = {}",
                        p.lambda
                    ));
                }
            } else if (a * a - b).abs() > SCALING_TOL * b {
                return config_error(format!("schedule level {i}: c^2 = {} differs from lambda = {b}", a * a));
            }
        }
        if self.kind.is_diffusive() {
            let ok = !self.times.is_empty()
                && self.times[0] > 0.0
                && self.times.windows(2).all(|w| w[1] > w[0])
                && self.times.iter().all(|t| t.is_finite());
            if !ok {
                return config_error("times must be positive and increasing");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> FracOrder {
        FracOrder::new(0.5).unwrap()
    }

    #[test]
    fn builders_satisfy_constraints() {
        ExperimentConfig::bg(ExperimentKind::BgModel1, half(), &[0.2, 0.1, 0.05, 0.025], 100, 1).unwrap();
        ExperimentConfig::diffusive(ExperimentKind::DiffusiveFlight2, half(), &[1e2, 1e3, 1e4], 100, 1).unwrap();
    }

    #[test]
    fn violated_scaling_is_rejected() {
        let mut cfg = ExperimentConfig::bg(ExperimentKind::BgModel1, half(), &[0.1], 100, 1).unwrap();
        cfg.schedule[0][1] *= 1.0 + 1e-9;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::diffusive(ExperimentKind::DiffusiveFlight1, half(), &[100.0], 100, 1).unwrap();
        cfg.schedule[0][0] = 10.001;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let cfg = ExperimentConfig::bg(ExperimentKind::BgModel2, half(), &[0.2, 0.1], 50, 7).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        let bad = text.replacen("\"seed\"", "\"sed\":1,\"seed\"", 1);
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad_params = text.replacen("\"lambda\"", "\"lamda\":1,\"lambda\"", 1);
        assert!(ExperimentConfig::from_json(&bad_params).is_err());
    }
}
