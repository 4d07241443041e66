//! Run-directory persistence: trajectory and metrics CSVs, the resolved
//! configuration, and the summary document.
//!
//! CSV layout is normative: ASCII, `.` decimal separator, 17 significant
//! digits, LF line endings. `trajectory.csv` has columns
//! `t, xhat_i, x_i, mu_i, z_i, a_i, n_i, cost_i` grouped per agent in agent
//! order (1-based numbering). Export is a pure function of its inputs, so
//! re-exporting the same run is byte-identical.

use super::config::ExperimentConfig;
use super::metrics::MetricsRow;
use super::runner::Summary;
use super::HarnessError;
use crate::integrate::Trajectory;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn fmt_float(value: f64) -> String {
    // 17 significant digits round-trip any f64 exactly
    format!("{value:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn trajectory_csv(trajectory: &Trajectory) -> String {
    let n = trajectory.states[0].len();
    let mut out = String::new();
    out.push('t');
    for i in 1..=n {
        let _ = write!(out, ",xhat_{i},x_{i},mu_{i},z_{i},a_{i},n_{i},cost_{i}");
    }
    out.push('\n');
    for (((t, state), played), costs) in trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .zip(&trajectory.played)
        .zip(&trajectory.costs)
    {
        out.push_str(&fmt_float(*t));
        for i in 0..n {
            let a = &state[i];
            for v in [a.xhat, played[i], a.mu, a.z, a.amp, a.nlow, costs[i]] {
                out.push(',');
                out.push_str(&fmt_float(v));
            }
        }
        out.push('\n');
    }
    out
}

fn metrics_csv(metrics: &[MetricsRow]) -> String {
    let with_oracle = metrics.first().is_some_and(|m| m.dist_to_oracle.is_some());
    let mut out = String::new();
    if with_oracle {
        out.push_str("t,dist_to_oracle,constraint_violation,mu_spread,max_amp,z_sum\n");
    } else {
        out.push_str("t,constraint_violation,mu_spread,max_amp,z_sum\n");
    }
    for m in metrics {
        out.push_str(&fmt_float(m.t));
        if let Some(d) = m.dist_to_oracle {
            out.push(',');
            out.push_str(&fmt_float(d));
        }
        for v in [m.constraint_violation, m.mu_spread, m.max_amp, m.z_sum] {
            out.push(',');
            out.push_str(&fmt_float(v));
        }
        out.push('\n');
    }
    out
}

fn tail_csv(trajectory: &Trajectory) -> String {
    let n = trajectory.states[0].len();
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",x_{i}");
    }
    out.push('\n');
    for (t, played) in trajectory.tail_times.iter().zip(&trajectory.tail_played) {
        out.push_str(&fmt_float(*t));
        for v in played {
            out.push(',');
            out.push_str(&fmt_float(*v));
        }
        out.push('\n');
    }
    out
}

/// Writes the run artifacts into `dir` and returns the written paths.
///
/// - `trajectory.csv`, `metrics.csv`, and `tail.csv` (dense played-strategy
///   samples, when recorded) under the `csv` format;
/// - `summary.json` under the `json` format;
/// - `config.resolved.json` always, so the directory is self-describing.
pub fn export(
    trajectory: &Trajectory,
    metrics: &[MetricsRow],
    config: &ExperimentConfig,
    summary: &Summary,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<(), HarnessError> {
        let path = dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    let csv = config.outputs.formats.iter().any(|f| f == "csv");
    let json = config.outputs.formats.iter().any(|f| f == "json");
    if csv {
        emit("trajectory.csv", trajectory_csv(trajectory))?;
        emit("metrics.csv", metrics_csv(metrics))?;
        if !trajectory.tail_times.is_empty() {
            emit("tail.csv", tail_csv(trajectory))?;
        }
    }
    if json {
        let mut summary_text = serde_json::to_string_pretty(summary).expect("summary serializes");
        summary_text.push('\n');
        emit("summary.json", summary_text)?;
    }
    let mut config_text = serde_json::to_string_pretty(config).expect("config serializes");
    config_text.push('\n');
    emit("config.resolved.json", config_text)?;
    Ok(written)
}
