//! Deterministic fixed-step integration of the seeking flow, with trajectory
//! recording and step-size validation.
//!
//! The dither forces a resolved fast timescale no matter what, so a classic
//! fixed-step fourth-order Runge-Kutta scheme is the default; forward Euler
//! is kept for order comparisons. Identical inputs produce bit-identical
//! trajectories.

use crate::game::GameSpec;
use crate::graph::CommGraph;
use crate::seeker::{
    self, AgentState, RhsWorkspace, SeekerError, SeekerParams, SwarmState, STATE_FIELDS,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error(
        "step size {dt} resolves the fastest dither period {period} with only \
         {steps_per_period:.2} steps; at least 8 are required"
    )]
    StepTooLarge {
        dt: f64,
        period: f64,
        steps_per_period: f64,
    },
    #[error("integrator config invalid: {0}")]
    BadConfig(String),
    #[error("state diverged (non-finite) at t = {t}, agent {agent}")]
    Diverged { t: f64, agent: usize },
    #[error(transparent)]
    Seeker(#[from] SeekerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Euler,
}

/// Fixed-step integration plan. `record_every` keeps every k-th step in the
/// trajectory; `dense_tail` additionally records the played strategies at
/// every step over the final seconds (for oscillation measurements).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    pub record_every: usize,
    #[serde(default)]
    pub dense_tail: Option<f64>,
}

/// Warning issued when the step resolves the fastest dither more coarsely
/// than 20 steps per period (hard failure below 8).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepWarning {
    pub steps_per_period: f64,
    pub recommended_dt: f64,
}

impl IntegratorConfig {
    pub fn validate(&self, max_frequency: f64) -> Result<Option<StepWarning>, IntegrateError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(IntegrateError::BadConfig(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        if !(self.t_end > self.dt) {
            return Err(IntegrateError::BadConfig(format!(
                "t_end ({}) must exceed dt ({})",
                self.t_end, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(IntegrateError::BadConfig(
                "record_every must be at least 1".into(),
            ));
        }
        if let Some(tail) = self.dense_tail {
            if !(tail >= 0.0) {
                return Err(IntegrateError::BadConfig(format!(
                    "dense_tail must be non-negative, got {tail}"
                )));
            }
        }
        if max_frequency > 0.0 {
            let period = 2.0 * std::f64::consts::PI / max_frequency;
            let steps_per_period = period / self.dt;
            if steps_per_period < 8.0 {
                return Err(IntegrateError::StepTooLarge {
                    dt: self.dt,
                    period,
                    steps_per_period,
                });
            }
            if steps_per_period < 20.0 {
                return Ok(Some(StepWarning {
                    steps_per_period,
                    recommended_dt: period / 20.0,
                }));
            }
        }
        Ok(None)
    }

    /// Number of steps: the horizon rounded to steps, then up to a whole
    /// number of recording intervals so the final state is always recorded.
    fn step_count(&self) -> usize {
        let raw = (self.t_end / self.dt).round().max(1.0) as usize;
        raw.div_ceil(self.record_every) * self.record_every
    }
}

/// Recorded simulation output. `times` advance by `record_every * dt`;
/// `played` holds the dithered strategies and `costs` the measured auxiliary
/// costs at the recorded instants.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<AgentState>>,
    pub played: Vec<Vec<f64>>,
    pub costs: Vec<Vec<f64>>,
    /// Dense every-step samples of (t, played) over the final `dense_tail`
    /// seconds, empty unless requested.
    pub tail_times: Vec<f64>,
    pub tail_played: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[AgentState] {
        self.states.last().expect("trajectory never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory never empty")
    }

    pub fn final_xhat(&self) -> Vec<f64> {
        self.final_state().iter().map(|a| a.xhat).collect()
    }
}

/// One explicit step of the classic fourth-order Runge-Kutta scheme.
fn rk4_step<E>(
    f: &mut impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    t: f64,
    dt: f64,
    y: &mut [f64],
    stages: &mut [Vec<f64>; 4],
    scratch: &mut Vec<f64>,
) -> Result<(), E> {
    let dim = y.len();
    scratch.resize(dim, 0.0);
    let [k1, k2, k3, k4] = stages;
    f(t, y, k1)?;
    for i in 0..dim {
        scratch[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, scratch, k2)?;
    for i in 0..dim {
        scratch[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, scratch, k3)?;
    for i in 0..dim {
        scratch[i] = y[i] + dt * k3[i];
    }
    f(t + dt, scratch, k4)?;
    for i in 0..dim {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

fn euler_step<E>(
    f: &mut impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    t: f64,
    dt: f64,
    y: &mut [f64],
    k: &mut [f64],
) -> Result<(), E> {
    f(t, y, k)?;
    for (yi, ki) in y.iter_mut().zip(k.iter()) {
        *yi += dt * ki;
    }
    Ok(())
}

/// Fixed-step integration of an arbitrary field; returns the final state.
/// Time is always computed as `step * dt` from the origin, never
/// accumulated.
pub fn run_fixed_step<E>(
    mut f: impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    y0: &[f64],
    dt: f64,
    n_steps: usize,
    method: Method,
) -> Result<Vec<f64>, E> {
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut stages = [
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    ];
    let mut scratch = vec![0.0; dim];
    for step in 0..n_steps {
        let t = step as f64 * dt;
        match method {
            Method::Rk4 => rk4_step(&mut f, t, dt, &mut y, &mut stages, &mut scratch)?,
            Method::Euler => euler_step(&mut f, t, dt, &mut y, &mut stages[0])?,
        }
    }
    Ok(y)
}

fn first_nonfinite_agent(y: &[f64]) -> Option<usize> {
    y.iter()
        .position(|v| !v.is_finite())
        .map(|slot| slot / STATE_FIELDS)
}

struct Recorder<'a> {
    traj: Trajectory,
    params: &'a SeekerParams,
    game: &'a GameSpec,
    dithered: bool,
}

impl<'a> Recorder<'a> {
    fn new(params: &'a SeekerParams, game: &'a GameSpec, dithered: bool) -> Self {
        Self {
            traj: Trajectory {
                times: Vec::new(),
                states: Vec::new(),
                played: Vec::new(),
                costs: Vec::new(),
                tail_times: Vec::new(),
                tail_played: Vec::new(),
            },
            params,
            game,
            dithered,
        }
    }

    fn played_at(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let n = y.len() / STATE_FIELDS;
        (0..n)
            .map(|j| {
                let xhat = y[STATE_FIELDS * j];
                if self.dithered {
                    xhat + seeker::dither(self.params, j, t, y[STATE_FIELDS * j + 3])
                } else {
                    xhat
                }
            })
            .collect()
    }

    fn record(&mut self, t: f64, y: &[f64]) -> Result<(), SeekerError> {
        let played = self.played_at(t, y);
        let costs = (0..self.game.n_players())
            .map(|i| {
                self.game
                    .auxiliary_cost(i, &played)
                    .map_err(|source| SeekerError::Evaluation {
                        agent: i,
                        t,
                        source,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.traj.times.push(t);
        self.traj.states.push(seeker::unpack(y));
        self.traj.played.push(played);
        self.traj.costs.push(costs);
        Ok(())
    }

    fn record_tail(&mut self, t: f64, y: &[f64]) {
        let played = self.played_at(t, y);
        self.traj.tail_times.push(t);
        self.traj.tail_played.push(played);
    }
}

fn integrate_inner(
    initial: &SwarmState,
    params: &SeekerParams,
    graph: &CommGraph,
    game: &GameSpec,
    cfg: &IntegratorConfig,
    averaged: bool,
) -> Result<Trajectory, IntegrateError> {
    params.validate()?;
    cfg.validate(if averaged {
        0.0
    } else {
        params.max_frequency()
    })?;
    let n_steps = cfg.step_count();
    let dt = cfg.dt;
    let mut y = seeker::pack(&initial.agents);
    let dim = y.len();
    let mut ws = RhsWorkspace::new(initial.n_agents());
    let mut stages = [
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    ];
    let mut scratch = vec![0.0; dim];
    let mut recorder = Recorder::new(params, game, !averaged);
    recorder.record(0.0, &y)?;
    let tail_start = cfg
        .dense_tail
        .map(|tail| n_steps as f64 * dt - tail - 0.5 * dt);
    // a non-finite stage input is a blow-up of the flow, not an evaluator
    // defect; classify it as divergence with the offending agent
    enum StepFailure {
        Diverged { t: f64, agent: usize },
        Seeker(SeekerError),
    }
    let mut f = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), StepFailure> {
        if let Some(agent) = first_nonfinite_agent(y) {
            return Err(StepFailure::Diverged { t, agent });
        }
        if averaged {
            seeker::averaged_rhs_flat(y, dy, params, graph, game, &mut ws)
        } else {
            seeker::rhs_flat(t, y, dy, params, graph, game, &mut ws)
        }
        .map_err(StepFailure::Seeker)
    };
    for step in 0..n_steps {
        let t = step as f64 * dt;
        let stepped = match cfg.method {
            Method::Rk4 => rk4_step(&mut f, t, dt, &mut y, &mut stages, &mut scratch),
            Method::Euler => euler_step(&mut f, t, dt, &mut y, &mut stages[0]),
        };
        if let Err(failure) = stepped {
            return Err(match failure {
                StepFailure::Diverged { t, agent } => IntegrateError::Diverged { t, agent },
                StepFailure::Seeker(e) => IntegrateError::Seeker(e),
            });
        }
        let t_next = (step + 1) as f64 * dt;
        if let Some(agent) = first_nonfinite_agent(&y) {
            return Err(IntegrateError::Diverged { t: t_next, agent });
        }
        if (step + 1) % cfg.record_every == 0 {
            recorder.record(t_next, &y)?;
        }
        if let Some(start) = tail_start {
            if t_next >= start {
                recorder.record_tail(t_next, &y);
            }
        }
    }
    Ok(recorder.traj)
}

/// Integrates the dithered seeking flow.
pub fn integrate(
    initial: &SwarmState,
    params: &SeekerParams,
    graph: &CommGraph,
    game: &GameSpec,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    integrate_inner(initial, params, graph, game, cfg, false)
}

/// Integrates the dither-free averaged model (frozen amplitudes, analytic
/// gradients). The `played` channel records the nominal strategies.
pub fn integrate_averaged(
    initial: &SwarmState,
    params: &SeekerParams,
    graph: &CommGraph,
    game: &GameSpec,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    integrate_inner(initial, params, graph, game, cfg, true)
}
