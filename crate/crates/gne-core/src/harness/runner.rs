//! Run orchestration: build the runtime objects from a config, integrate,
//! re-insert stubborn players, compute metrics and the condition report, and
//! fan out parameter sweeps.

use super::config::{validate, ExperimentConfig, Prepared};
use super::metrics::{compute_metrics, MetricsRow};
use super::HarnessError;
use crate::integrate::{integrate, Trajectory};
use crate::oracle::{
    best_response_stubborn, check_frequencies, check_gains, check_quadratic_conditions,
    solve_quadratic_gne, BestResponse, FreqViolation, GainReport, GneSolution, MuBarPolicy,
    QuadraticConditions,
};
use crate::seeker::AgentState;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Closed-form target the run is measured against.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSummary {
    Gne(GneSolution),
    BestResponse(BestResponse),
}

impl OracleSummary {
    pub fn target(&self) -> &[f64] {
        match self {
            OracleSummary::Gne(g) => &g.x_star,
            OracleSummary::BestResponse(b) => &b.x,
        }
    }

    pub fn multiplier(&self) -> Option<f64> {
        match self {
            OracleSummary::Gne(g) => Some(g.mu_bar),
            OracleSummary::BestResponse(b) => b.mu_bar,
        }
    }
}

/// Parameter-condition checks evaluated at the initial amplitudes.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub freq_ok: bool,
    pub freq_violations: Vec<FreqViolation>,
    pub gains: GainReport,
    pub quadratic: QuadraticConditions,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub preset: Option<String>,
    pub n_players: usize,
    pub n_seekers: usize,
    pub t_end: f64,
    pub final_metrics: MetricsRow,
    pub oracle: Option<OracleSummary>,
    pub conditions: ConditionReport,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct RunOutput {
    /// Resolved configuration the run was built from.
    pub config: ExperimentConfig,
    /// Full-profile trajectory; stubborn players appear as constant columns.
    pub trajectory: Trajectory,
    /// Metrics of the seeking subsystem (for stubborn runs: the seekers
    /// against their residual demand, which coincides with the full-profile
    /// view under the equal-split convention).
    pub metrics: Vec<MetricsRow>,
    pub summary: Summary,
    pub warnings: Vec<String>,
}

/// Builds the condition report for a prepared run.
pub fn condition_report(prepared: &Prepared) -> ConditionReport {
    let freq_violations = check_frequencies(&prepared.params.frequencies(), 1e-9);
    let lambda2 = if prepared.stubborn.is_empty() {
        prepared.graph.laplacian().lambda2
    } else {
        let seekers: Vec<usize> = (0..prepared.quadratic.n_players())
            .filter(|i| !prepared.stubborn.iter().any(|(s, _)| s == i))
            .collect();
        prepared
            .graph
            .induced_subgraph(&seekers)
            .map(|g| g.laplacian().lambda2)
            .unwrap_or(0.0)
    };
    let amps: Vec<f64> = prepared.initial.agents.iter().map(|a| a.amp).collect();
    let gains = check_gains(&prepared.params, &amps, lambda2);
    let quadratic =
        check_quadratic_conditions(&prepared.quadratic, &prepared.params, &amps, lambda2);
    ConditionReport {
        freq_ok: freq_violations.is_empty(),
        freq_violations,
        gains,
        quadratic,
    }
}

/// Solves the oracle target for a prepared run: the variational equilibrium,
/// or the seekers' best response when stubborn players are present.
pub fn solve_oracle(prepared: &Prepared) -> Result<OracleSummary, HarnessError> {
    if prepared.stubborn.is_empty() {
        Ok(OracleSummary::Gne(solve_quadratic_gne(
            &prepared.quadratic,
        )?))
    } else {
        Ok(OracleSummary::BestResponse(best_response_stubborn(
            &prepared.quadratic,
            &prepared.stubborn,
            MuBarPolicy::SolveJointly,
        )?))
    }
}

/// Expands a reduced (seekers-only) trajectory back to the full player set:
/// stubborn players hold their fixed strategy with zeroed protocol states,
/// and their actual costs are evaluated along the way.
fn expand_trajectory(
    reduced: Trajectory,
    prepared: &Prepared,
    seekers: &[usize],
) -> Result<Trajectory, HarnessError> {
    if prepared.stubborn.is_empty() {
        return Ok(reduced);
    }
    let n = prepared.quadratic.n_players();
    let mut template = vec![0.0; n];
    for &(idx, value) in &prepared.stubborn {
        template[idx] = value;
    }
    let splice = |xs: &[f64]| -> Vec<f64> {
        let mut full = template.clone();
        for (r, &p) in seekers.iter().enumerate() {
            full[p] = xs[r];
        }
        full
    };
    let mut states = Vec::with_capacity(reduced.states.len());
    let mut played = Vec::with_capacity(reduced.played.len());
    let mut costs = Vec::with_capacity(reduced.costs.len());
    for ((reduced_state, reduced_played), reduced_costs) in reduced
        .states
        .iter()
        .zip(&reduced.played)
        .zip(&reduced.costs)
    {
        let full_played = splice(reduced_played);
        let mut full_state = vec![
            AgentState {
                xhat: 0.0,
                mu: 0.0,
                z: 0.0,
                amp: 0.0,
                nlow: 0.0,
            };
            n
        ];
        let mut full_costs = vec![0.0; n];
        for &(idx, value) in &prepared.stubborn {
            full_state[idx].xhat = value;
            full_costs[idx] = prepared.spec.auxiliary_cost(idx, &full_played)?;
        }
        for (r, &p) in seekers.iter().enumerate() {
            full_state[p] = reduced_state[r];
            full_costs[p] = reduced_costs[r];
        }
        states.push(full_state);
        played.push(full_played);
        costs.push(full_costs);
    }
    let tail_played = reduced.tail_played.iter().map(|xs| splice(xs)).collect();
    Ok(Trajectory {
        times: reduced.times,
        states,
        played,
        costs,
        tail_times: reduced.tail_times,
        tail_played,
    })
}

/// Runs one experiment end to end (no filesystem output).
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let prepared = validate(config)?;
    let (spec, graph, params, initial, seekers) = prepared.reduced_for_seekers()?;
    let reduced_traj = integrate(&initial, &params, &graph, &spec, &config.integrator)?;

    let oracle = solve_oracle(&prepared)?;
    let reduced_target: Vec<f64> = seekers.iter().map(|&i| oracle.target()[i]).collect();
    let metrics = compute_metrics(&reduced_traj, Some(&reduced_target), spec.demand_total());
    let trajectory = expand_trajectory(reduced_traj, &prepared, &seekers)?;
    let conditions = condition_report(&prepared);
    let final_metrics = metrics.last().expect("trajectory never empty").clone();
    let warnings = prepared.warnings.clone();
    let summary = Summary {
        preset: config.preset.clone(),
        n_players: prepared.quadratic.n_players(),
        n_seekers: seekers.len(),
        t_end: trajectory.final_time(),
        final_metrics,
        oracle: Some(oracle),
        conditions,
        warnings: warnings.clone(),
    };
    Ok(RunOutput {
        config: config.clone(),
        trajectory,
        metrics,
        summary,
        warnings,
    })
}

/// Runs one experiment and writes its artifacts into `dir` (defaulting to
/// the config's output directory).
pub fn run_and_export(
    config: &ExperimentConfig,
    dir: Option<&Path>,
) -> Result<(RunOutput, Vec<PathBuf>), HarnessError> {
    let output = run(config)?;
    let default_dir = PathBuf::from(&config.outputs.dir);
    let dir = dir.unwrap_or(&default_dir);
    let written = super::export(
        &output.trajectory,
        &output.metrics,
        &output.config,
        &output.summary,
        dir,
    )?;
    Ok((output, written))
}

/// A parameter a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Frequency scale `w`; the step size is rescaled to keep the same
    /// number of steps per fastest dither period.
    FreqScale,
    /// Amplitude timescale ratio `delta`.
    AmpTimescale,
    /// Consensus gain `alpha`.
    ConsensusGain,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "w" => Ok(Self::FreqScale),
            "delta" => Ok(Self::AmpTimescale),
            "alpha" => Ok(Self::ConsensusGain),
            other => Err(format!(
                "unknown sweep parameter `{other}`; expected w, delta, or alpha"
            )),
        }
    }
}

impl SweepParam {
    pub fn key(&self) -> &'static str {
        match self {
            Self::FreqScale => "w",
            Self::AmpTimescale => "delta",
            Self::ConsensusGain => "alpha",
        }
    }

    fn apply(&self, config: &mut ExperimentConfig, value: f64) {
        match self {
            Self::FreqScale => {
                let old = config.params.w;
                config.params.w = value;
                config.integrator.dt *= old / value;
            }
            Self::AmpTimescale => config.params.delta = value,
            Self::ConsensusGain => config.params.alpha = value,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub dir: PathBuf,
    pub final_metrics: MetricsRow,
}

/// Runs independent value-isolated experiments in parallel, one output
/// directory per value, and writes an aggregate `sweep_summary.json`.
pub fn sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    out_root: &Path,
) -> Result<Vec<SweepRow>, HarnessError> {
    let runs: Vec<(f64, ExperimentConfig, PathBuf)> = values
        .iter()
        .map(|&value| {
            let mut config = base.clone();
            param.apply(&mut config, value);
            let dir = out_root.join(format!("{}={}", param.key(), value));
            config.outputs.dir = dir.to_string_lossy().into_owned();
            (value, config, dir)
        })
        .collect();

    let results: Vec<Result<(), HarnessError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|(_, config, dir)| {
                scope.spawn(move || run_and_export(config, Some(dir)).map(|_| ()))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    results.into_iter().collect::<Result<Vec<()>, _>>()?;

    // aggregate from the completed run directories, not from shared state
    let rows: Vec<SweepRow> = runs
        .iter()
        .map(|(value, _, dir)| {
            let path = dir.join("summary.json");
            let text = std::fs::read_to_string(&path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            #[derive(serde::Deserialize)]
            struct SummaryTail {
                final_metrics: MetricsRow,
            }
            let tail: SummaryTail = serde_json::from_str(&text).map_err(|e| {
                HarnessError::Config(super::ConfigError::Schema {
                    path: path.display().to_string(),
                    detail: e.to_string(),
                })
            })?;
            Ok(SweepRow {
                param: param.key().to_string(),
                value: *value,
                dir: dir.clone(),
                final_metrics: tail.final_metrics,
            })
        })
        .collect::<Result<_, HarnessError>>()?;

    std::fs::create_dir_all(out_root).map_err(|source| HarnessError::Io {
        path: out_root.to_path_buf(),
        source,
    })?;
    let path = out_root.join("sweep_summary.json");
    let mut text = serde_json::to_string_pretty(&rows).expect("rows serialize");
    text.push('\n');
    std::fs::write(&path, text).map_err(|source| HarnessError::Io { path, source })?;
    Ok(rows)
}
