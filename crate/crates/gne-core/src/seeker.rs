//! Right-hand side of the distributed seeking dynamics: sinusoidal
//! perturbation of each nominal strategy, demodulated cost feedback,
//! Lagrange-multiplier consensus with an auxiliary conservation variable,
//! adaptive dither amplitude, and a washout filter on the measured cost.
//!
//! Per agent `i` the flow is
//!
//! ```text
//! x_i      = xhat_i + a_i sin(w_i t)                  (played strategy)
//! dxhat_i  = -k_i J_i a_i sin(w_i t) - (k_i a_i^2 / 2) mu_i
//! dmu_i    = xhat_i - d_i - alpha * sum_{j ~ i} (mu_i - mu_j) - z_i
//! dz_i     = alpha * sum_{j ~ i} (mu_i - mu_j)
//! da_i     = -delta wl_i a_i + delta b_i wl_i (J_i - n_i)
//! dn_i     = -wh_i n_i + wh_i J_i
//! ```
//!
//! where `J_i` is the measured auxiliary cost at the full played profile.
//! Each agent measures its cost exactly once per evaluation of the field.
//!
//! [`averaged_rhs`] is the dither-free averaged model used only to verify the
//! demodulation: the strategy feedback becomes `-(k_i a_i^2 / 2)(F_i + mu_i)`
//! with `F_i` the analytic auxiliary-cost gradient and amplitudes frozen.

use crate::game::{GameError, GameSpec};
use crate::graph::CommGraph;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeekerError {
    #[error("cost evaluation failed for agent {agent} at t = {t}: {source}")]
    Evaluation {
        agent: usize,
        t: f64,
        #[source]
        source: GameError,
    },
    #[error("parameter `{name}`{} must be positive, got {value}", index.map(|i| format!(" [{i}]")).unwrap_or_default())]
    NonPositiveParam {
        name: &'static str,
        index: Option<usize>,
        value: f64,
    },
    #[error("amplitude timescale ratio must satisfy 0 < delta < 1, got {0}")]
    BadTimescale(f64),
    #[error("dither frequencies {i} and {j} coincide at {value}")]
    DuplicateFrequency { i: usize, j: usize, value: f64 },
    #[error("per-agent parameter `{field}` has length {got}, expected {expected}")]
    FieldLength {
        field: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("agent count mismatch: state has {state}, graph has {graph}, game has {game}")]
    SizeMismatch {
        state: usize,
        graph: usize,
        game: usize,
    },
    #[error(
        "dither frequencies admit no common period (ratio {ratio} has no rational \
         approximation with denominator <= {max_denominator} at tolerance {tolerance})"
    )]
    NoCommonPeriod {
        ratio: f64,
        max_denominator: u64,
        tolerance: f64,
    },
}

/// Extremum-seeking state of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    /// Nominal strategy.
    pub xhat: f64,
    /// Local Lagrange multiplier for the coupled constraint.
    pub mu: f64,
    /// Auxiliary conservation variable; the swarm total is a flow invariant.
    pub z: f64,
    /// Dither amplitude.
    pub amp: f64,
    /// Washout-filter state tracking the low-frequency cost component.
    pub nlow: f64,
}

impl AgentState {
    pub fn is_finite(&self) -> bool {
        self.xhat.is_finite()
            && self.mu.is_finite()
            && self.z.is_finite()
            && self.amp.is_finite()
            && self.nlow.is_finite()
    }
}

/// Stacked swarm state at a time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub agents: Vec<AgentState>,
    pub t: f64,
}

impl SwarmState {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn z_sum(&self) -> f64 {
        self.agents.iter().map(|a| a.z).sum()
    }

    pub fn xhat(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.xhat).collect()
    }

    /// Played strategies x_i = xhat_i + a_i sin(w_i t).
    pub fn played(&self, params: &SeekerParams) -> Vec<f64> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| a.xhat + dither(params, i, self.t, a.amp))
            .collect()
    }
}

/// Number of scalar fields per agent in the flat state layout
/// `[xhat, mu, z, amp, nlow]`.
pub const STATE_FIELDS: usize = 5;

pub fn pack(agents: &[AgentState]) -> Vec<f64> {
    let mut y = Vec::with_capacity(agents.len() * STATE_FIELDS);
    for a in agents {
        y.extend_from_slice(&[a.xhat, a.mu, a.z, a.amp, a.nlow]);
    }
    y
}

pub fn unpack(y: &[f64]) -> Vec<AgentState> {
    debug_assert_eq!(y.len() % STATE_FIELDS, 0);
    y.chunks_exact(STATE_FIELDS)
        .map(|c| AgentState {
            xhat: c[0],
            mu: c[1],
            z: c[2],
            amp: c[3],
            nlow: c[4],
        })
        .collect()
}

/// All tuning constants of the seeking flow plus the two analysis constants
/// consumed by the gain checkers.
#[derive(Debug, Clone, PartialEq)]
pub struct SeekerParams {
    /// Demodulation gains k_i.
    pub gain: Vec<f64>,
    /// Amplitude-loop gains b_i.
    pub amp_gain: Vec<f64>,
    /// Low-pass cutoffs wl_i driving the amplitude dynamics.
    pub low_pass: Vec<f64>,
    /// Washout (high-pass) cutoffs wh_i.
    pub high_pass: Vec<f64>,
    /// Base dither frequencies; the actual frequency is `freq_scale * base`.
    pub base_freq: Vec<f64>,
    /// Common frequency scale.
    pub freq_scale: f64,
    /// Timescale ratio of the amplitude dynamics, 0 < delta < 1.
    pub amp_timescale: f64,
    /// Consensus gain alpha on the multiplier disagreement.
    pub consensus_gain: f64,
    /// Assumed strong-monotonicity constant of the pseudo-gradient (condition
    /// checks only; the flow never uses it).
    pub monotonicity: f64,
    /// Lyapunov weighting constant phi > 1/(2 m) (condition checks only).
    pub lyapunov_weight: f64,
    /// Optional floor on the dither amplitude; `None` leaves the amplitude
    /// free to cross zero (a sign flip only flips the dither phase).
    pub amp_floor: Option<f64>,
    /// Freezes the amplitude dynamics (control experiments).
    pub freeze_amp: bool,
}

impl SeekerParams {
    pub fn n_agents(&self) -> usize {
        self.gain.len()
    }

    /// Dither frequency of agent i.
    pub fn frequency(&self, i: usize) -> f64 {
        self.freq_scale * self.base_freq[i]
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_agents()).map(|i| self.frequency(i)).collect()
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequencies().into_iter().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), SeekerError> {
        let n = self.n_agents();
        for (field, len) in [
            ("amp_gain", self.amp_gain.len()),
            ("low_pass", self.low_pass.len()),
            ("high_pass", self.high_pass.len()),
            ("base_freq", self.base_freq.len()),
        ] {
            if len != n {
                return Err(SeekerError::FieldLength {
                    field,
                    got: len,
                    expected: n,
                });
            }
        }
        let positives: [(&'static str, &[f64]); 5] = [
            ("k", &self.gain),
            ("b", &self.amp_gain),
            ("wl", &self.low_pass),
            ("wh", &self.high_pass),
            ("wbar", &self.base_freq),
        ];
        for (name, values) in positives {
            for (i, &v) in values.iter().enumerate() {
                if !(v > 0.0) {
                    return Err(SeekerError::NonPositiveParam {
                        name,
                        index: Some(i),
                        value: v,
                    });
                }
            }
        }
        for (name, v) in [
            ("w", self.freq_scale),
            ("alpha", self.consensus_gain),
            ("m", self.monotonicity),
            ("phi", self.lyapunov_weight),
        ] {
            if !(v > 0.0) {
                return Err(SeekerError::NonPositiveParam {
                    name,
                    index: None,
                    value: v,
                });
            }
        }
        if !(self.amp_timescale > 0.0 && self.amp_timescale < 1.0) {
            return Err(SeekerError::BadTimescale(self.amp_timescale));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.frequency(i) == self.frequency(j) {
                    return Err(SeekerError::DuplicateFrequency {
                        i,
                        j,
                        value: self.frequency(i),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Probing signal a_i sin(w_i t).
pub fn dither(params: &SeekerParams, i: usize, t: f64, amp: f64) -> f64 {
    amp * (params.frequency(i) * t).sin()
}

/// Reusable buffers for the flat field evaluation.
#[derive(Debug, Default)]
pub struct RhsWorkspace {
    played: Vec<f64>,
    sines: Vec<f64>,
}

impl RhsWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            played: vec![0.0; n],
            sines: vec![0.0; n],
        }
    }

    fn resize(&mut self, n: usize) {
        self.played.resize(n, 0.0);
        self.sines.resize(n, 0.0);
    }
}

fn check_sizes(
    n_state: usize,
    params: &SeekerParams,
    graph: &CommGraph,
    game: &GameSpec,
) -> Result<usize, SeekerError> {
    let n = params.n_agents();
    if n_state != n || graph.node_count() != n || game.n_players() != n {
        return Err(SeekerError::SizeMismatch {
            state: n_state,
            graph: graph.node_count(),
            game: game.n_players(),
        });
    }
    Ok(n)
}

/// Writes the flow derivative into `dy` for the flat state layout. Exactly
/// one auxiliary-cost measurement per agent.
pub fn rhs_flat(
    t: f64,
    y: &[f64],
    dy: &mut [f64],
    params: &SeekerParams,
    graph: &CommGraph,
    game: &GameSpec,
    ws: &mut RhsWorkspace,
) -> Result<(), SeekerError> {
    let n = check_sizes(y.len() / STATE_FIELDS, params, graph, game)?;
    ws.resize(n);
    for j in 0..n {
        let s = (params.frequency(j) * t).sin();
        ws.sines[j] = s;
        ws.played[j] = y[STATE_FIELDS * j] + y[STATE_FIELDS * j + 3] * s;
    }
    let alpha = params.consensus_gain;
    let delta = params.amp_timescale;
    for i in 0..n {
        let base = STATE_FIELDS * i;
        let (xhat, mu, z, amp, nlow) =
            (y[base], y[base + 1], y[base + 2], y[base + 3], y[base + 4]);
        let cost =
            game.auxiliary_cost(i, &ws.played)
                .map_err(|source| SeekerError::Evaluation {
                    agent: i,
                    t,
                    source,
                })?;
        let mut disagreement = 0.0;
        for &j in graph.neighbors(i).expect("size checked") {
            disagreement += mu - y[STATE_FIELDS * j + 1];
        }
        let k = params.gain[i];
        dy[base] = -k * cost * amp * ws.sines[i] - 0.5 * k * amp * amp * mu;
        dy[base + 1] = xhat - game.demands()[i] - alpha * disagreement - z;
        dy[base + 2] = alpha * disagreement;
        dy[base + 3] = if params.freeze_amp {
            0.0
        } else {
            let wl = params.low_pass[i];
            let mut da = -delta * wl * amp + delta * params.amp_gain[i] * wl * (cost - nlow);
            if let Some(floor) = params.amp_floor {
                if amp <= floor && da < 0.0 {
                    da = 0.0;
                }
            }
            da
        };
        dy[base + 4] = params.high_pass[i] * (cost - nlow);
    }
    Ok(())
}

/// Flow derivative as per-agent states.
pub fn rhs(
    state: &SwarmState,
    t: f64,
    params: &SeekerParams,
    graph: &CommGraph,
    game: &GameSpec,
) -> Result<Vec<AgentState>, SeekerError> {
    let y = pack(&state.agents);
    let mut dy = vec![0.0; y.len()];
    let mut ws = RhsWorkspace::new(state.n_agents());
    rhs_flat(t, &y, &mut dy, params, graph, game, &mut ws)?;
    Ok(unpack(&dy))
}

/// Dither-free averaged model: the strategy feedback uses the analytic
/// auxiliary-cost gradient scaled by `k_i a_i^2 / 2`, amplitudes are frozen,
/// and the remaining states flow as in [`rhs_flat`] with the nominal
/// strategies in place of the played ones.
pub fn averaged_rhs_flat(
    y: &[f64],
    dy: &mut [f64],
    params: &SeekerParams,
    graph: &CommGraph,
    game: &GameSpec,
    ws: &mut RhsWorkspace,
) -> Result<(), SeekerError> {
    let n = check_sizes(y.len() / STATE_FIELDS, params, graph, game)?;
    ws.resize(n);
    for j in 0..n {
        ws.played[j] = y[STATE_FIELDS * j];
    }
    let alpha = params.consensus_gain;
    for i in 0..n {
        let base = STATE_FIELDS * i;
        let (xhat, mu, z, amp, nlow) =
            (y[base], y[base + 1], y[base + 2], y[base + 3], y[base + 4]);
        let gradient =
            game.penalty_gradient(i, &ws.played)
                .map_err(|source| SeekerError::Evaluation {
                    agent: i,
                    t: f64::NAN,
                    source,
                })?;
        let cost =
            game.auxiliary_cost(i, &ws.played)
                .map_err(|source| SeekerError::Evaluation {
                    agent: i,
                    t: f64::NAN,
                    source,
                })?;
        let mut disagreement = 0.0;
        for &j in graph.neighbors(i).expect("size checked") {
            disagreement += mu - y[STATE_FIELDS * j + 1];
        }
        let half_gain = 0.5 * params.gain[i] * amp * amp;
        dy[base] = -half_gain * (gradient + mu);
        dy[base + 1] = xhat - game.demands()[i] - alpha * disagreement - z;
        dy[base + 2] = alpha * disagreement;
        dy[base + 3] = 0.0;
        dy[base + 4] = params.high_pass[i] * (cost - nlow);
    }
    Ok(())
}

/// Averaged-model derivative as per-agent states.
pub fn averaged_rhs(
    state: &SwarmState,
    params: &SeekerParams,
    graph: &CommGraph,
    game: &GameSpec,
) -> Result<Vec<AgentState>, SeekerError> {
    let y = pack(&state.agents);
    let mut dy = vec![0.0; y.len()];
    let mut ws = RhsWorkspace::new(state.n_agents());
    averaged_rhs_flat(&y, &mut dy, params, graph, game, &mut ws)?;
    Ok(unpack(&dy))
}

/// Best rational approximation p/q of `x` with q <= max_denominator, by
/// continued fractions.
fn rational_approx(x: f64, rel_tol: f64, max_denominator: u64) -> Option<(u64, u64)> {
    debug_assert!(x > 0.0);
    let (mut p0, mut q0, mut p1, mut q1) = (1u64, 0u64, x.floor() as u64, 1u64);
    let mut frac = x - x.floor();
    for _ in 0..64 {
        let approx = p1 as f64 / q1 as f64;
        if (approx - x).abs() <= rel_tol * x {
            return Some((p1, q1));
        }
        if frac == 0.0 {
            break;
        }
        let inv = 1.0 / frac;
        let digit = inv.floor();
        frac = inv - digit;
        let digit = digit as u64;
        let p2 = digit.checked_mul(p1)?.checked_add(p0)?;
        let q2 = digit.checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_denominator {
            return None;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    let approx = p1 as f64 / q1 as f64;
    ((approx - x).abs() <= rel_tol * x).then_some((p1, q1))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Common dither period and the per-agent integer harmonic counts.
fn common_period(params: &SeekerParams) -> Result<(f64, Vec<u64>), SeekerError> {
    const REL_TOL: f64 = 1e-9;
    const MAX_DEN: u64 = 4096;
    let freqs = params.frequencies();
    let w0 = freqs[0];
    let mut numerators = Vec::with_capacity(freqs.len());
    let mut lcm_q: u64 = 1;
    let mut ratios = Vec::with_capacity(freqs.len());
    for &w in &freqs {
        let ratio = w / w0;
        let (p, q) =
            rational_approx(ratio, REL_TOL, MAX_DEN).ok_or(SeekerError::NoCommonPeriod {
                ratio,
                max_denominator: MAX_DEN,
                tolerance: REL_TOL,
            })?;
        lcm_q = lcm_q / gcd(lcm_q, q) * q;
        if lcm_q > 1 << 22 {
            return Err(SeekerError::NoCommonPeriod {
                ratio,
                max_denominator: MAX_DEN,
                tolerance: REL_TOL,
            });
        }
        numerators.push((p, q));
        ratios.push(ratio);
    }
    let period = 2.0 * std::f64::consts::PI * lcm_q as f64 / w0;
    let harmonics = numerators.iter().map(|&(p, q)| p * (lcm_q / q)).collect();
    Ok((period, harmonics))
}

/// Numerically time-averages the strategy component of [`rhs_flat`] over one
/// full common dither period at frozen state and returns the maximum absolute
/// deviation from [`averaged_rhs_flat`].
///
/// The deviation is the averaging defect: third- and higher-order dither
/// terms plus any residue of nearly-commensurable frequencies. Frequencies
/// must be rationally related; irrational ratios are rejected.
pub fn average_consistency_probe(
    state: &SwarmState,
    params: &SeekerParams,
    graph: &CommGraph,
    game: &GameSpec,
) -> Result<f64, SeekerError> {
    let n = check_sizes(state.n_agents(), params, graph, game)?;
    let (period, harmonics) = common_period(params)?;
    let max_harmonic = harmonics.iter().copied().max().unwrap_or(1);
    let samples = (16 * max_harmonic as usize).next_power_of_two().max(1024);

    let y = pack(&state.agents);
    let mut dy = vec![0.0; y.len()];
    let mut ws = RhsWorkspace::new(n);
    let mut mean = vec![0.0; n];
    for j in 0..samples {
        let t = state.t + period * j as f64 / samples as f64;
        rhs_flat(t, &y, &mut dy, params, graph, game, &mut ws)?;
        for i in 0..n {
            mean[i] += dy[STATE_FIELDS * i];
        }
    }
    for v in &mut mean {
        *v /= samples as f64;
    }
    averaged_rhs_flat(&y, &mut dy, params, graph, game, &mut ws)?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        worst = worst.max((mean[i] - dy[STATE_FIELDS * i]).abs());
    }
    Ok(worst)
}
