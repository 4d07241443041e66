//! Per-sample run metrics: distance to the analytic equilibrium, coupled
//! constraint violation, multiplier disagreement, dither amplitude, and the
//! conserved auxiliary total.

use crate::integrate::Trajectory;
use serde::{Deserialize, Serialize};

/// One recorded sample. Norms are max-norms over agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: f64,
    /// Max-norm distance of the nominal strategies to the oracle target;
    /// absent when no closed-form target exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_to_oracle: Option<f64>,
    /// |sum(xhat) - sum(d)|.
    pub constraint_violation: f64,
    /// max(mu) - min(mu).
    pub mu_spread: f64,
    /// max |a_i|.
    pub max_amp: f64,
    /// sum(z); conserved by the flow.
    pub z_sum: f64,
}

/// Computes one row per recorded sample. `target` is the oracle strategy
/// profile matched against the nominal strategies.
pub fn compute_metrics(
    trajectory: &Trajectory,
    target: Option<&[f64]>,
    demand_total: f64,
) -> Vec<MetricsRow> {
    trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .map(|(&t, agents)| {
            let dist_to_oracle = target.map(|x_star| {
                agents
                    .iter()
                    .zip(x_star)
                    .map(|(a, want)| (a.xhat - want).abs())
                    .fold(0.0f64, f64::max)
            });
            let xhat_sum: f64 = agents.iter().map(|a| a.xhat).sum();
            let mu_max = agents
                .iter()
                .map(|a| a.mu)
                .fold(f64::NEG_INFINITY, f64::max);
            let mu_min = agents.iter().map(|a| a.mu).fold(f64::INFINITY, f64::min);
            MetricsRow {
                t,
                dist_to_oracle,
                constraint_violation: (xhat_sum - demand_total).abs(),
                mu_spread: mu_max - mu_min,
                max_amp: agents.iter().map(|a| a.amp.abs()).fold(0.0f64, f64::max),
                z_sum: agents.iter().map(|a| a.z).sum(),
            }
        })
        .collect()
}
