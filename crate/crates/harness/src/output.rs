//! CSV tables and JSON sidecars.
//!
//! Level table columns, in order: `level, scale_a, scale_b, n, distance,
//! p_value`, then `<component>, <component>_p` for each distance
//! component, then `recollision_fraction, recollision_se, mean_events,
//! mean_events_se, reference_mean_events, reference_mean_events_se,
//! batch_distance_mean, batch_distance_se`. Missing values are empty.
//! `scale_a, scale_b` are (R, rho) for BG runs and (c, lambda) for
//! diffusive runs. Floats use the shortest round-trip representation, so
//! identical results give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mlz_core::stats::{mean_estimate, Estimate};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiments::EmpiricalSummary;

/// `v<crate version>-g<git describe>` when built inside a git checkout.
pub const VERSION: &str = env!("MLZ_VERSION");

pub fn csv_table<I>(header: &[String], rows: I) -> String
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn opt_pair(e: Option<Estimate>) -> [String; 2] {
    match e {
        Some(e) => [fmt_f64(e.mean), fmt_f64(e.se)],
        None => [String::new(), String::new()],
    }
}

pub fn levels_csv(summary: &EmpiricalSummary) -> String {
    let mut header: Vec<String> =
        ["level", "scale_a", "scale_b", "n", "distance", "p_value"].iter().map(|s| s.to_string()).collect();
    if let Some(first) = summary.levels.first() {
        for c in &first.components {
            header.push(c.name.clone());
            header.push(format!("{}_p", c.name));
        }
    }
    header.extend(
        [
            "recollision_fraction",
            "recollision_se",
            "mean_events",
            "mean_events_se",
            "reference_mean_events",
            "reference_mean_events_se",
            "batch_distance_mean",
            "batch_distance_se",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let rows = summary.levels.iter().map(|l| {
        let mut row = vec![
            l.level.to_string(),
            fmt_f64(l.scale[0]),
            fmt_f64(l.scale[1]),
            l.n.to_string(),
            fmt_f64(l.distance),
            fmt_f64(l.p_value),
        ];
        for c in &l.components {
            row.push(fmt_f64(c.statistic));
            row.push(fmt_f64(c.p_value));
        }
        row.extend(opt_pair(l.recollision_fraction));
        row.extend(opt_pair(Some(l.mean_events)));
        row.extend(opt_pair(l.reference_mean_events));
        row.extend(opt_pair(Some(mean_estimate(&l.batch_distances))));
        row
    });
    csv_table(&header, rows)
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    version: &'static str,
    config: &'a ExperimentConfig,
    result: &'a T,
}

pub fn sidecar_json<T: Serialize>(cfg: &ExperimentConfig, result: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Sidecar { version: VERSION, config: cfg, result })?;
    s.push('\n');
    Ok(s)
}

/// Writes `path` (CSV) and `path` with a `.json` extension (sidecar).
pub fn write_experiment(path: &Path, cfg: &ExperimentConfig, summary: &EmpiricalSummary) -> Result<(PathBuf, PathBuf)> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, levels_csv(summary))?;
    let side = path.with_extension("json");
    std::fs::write(&side, sidecar_json(cfg, summary)?)?;
    Ok((path.to_path_buf(), side))
}

/// Row-major samples as CSV with the given column names.
pub fn samples_csv(columns: &[&str], values: &[f64]) -> String {
    let k = columns.len().max(1);
    let mut out = columns.join(",");
    out.push('\n');
    for row in values.chunks(k) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}
