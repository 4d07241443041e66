//! Experiment configuration: JSON ingestion, preset expansion, defaults,
//! and semantic validation with named rules.
//!
//! Player and node indices are 1-based in every external surface (JSON
//! documents, CLI arguments, CSV headers) and 0-based internally.

use crate::game::{CostFn, GameSpec, QuadraticGame, ScalarFn};
use crate::graph::CommGraph;
use crate::integrate::IntegratorConfig;
use crate::seeker::{AgentState, SeekerParams, SwarmState};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config schema violation at `{path}`: {detail}")]
    Schema { path: String, detail: String },
    #[error("config rule `{rule}` violated: {detail}")]
    Rule { rule: &'static str, detail: String },
    #[error("unknown preset `{0}`; known presets: {1}")]
    UnknownPreset(String, String),
}

fn rule(rule: &'static str, detail: impl Into<String>) -> ConfigError {
    ConfigError::Rule {
        rule,
        detail: detail.into(),
    }
}

/// Fully resolved experiment description. Serializing and re-loading this
/// reproduces the identical configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub game: GameConfig,
    pub graph: GraphConfig,
    pub params: ParamsConfig,
    pub integrator: IntegratorConfig,
    pub initial: InitialConfig,
    /// Fixed strategies of stubborn players, keyed by 1-based player number.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stubborn: BTreeMap<usize, f64>,
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub seed: u64,
}

/// Quadratic game payload: per-player symmetric matrices, linear terms,
/// constant offsets, demands, interval bounds, penalty coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub quadratic: Vec<Vec<Vec<f64>>>,
    pub linear: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub demands: Vec<f64>,
    pub bounds: Vec<Option<(f64, f64)>>,
    pub penalties: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub n: usize,
    /// Undirected edges over 1-based node numbers.
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub k: Vec<f64>,
    pub b: Vec<f64>,
    pub wl: Vec<f64>,
    pub wh: Vec<f64>,
    pub wbar: Vec<f64>,
    pub w: f64,
    pub delta: f64,
    pub alpha: f64,
    pub m: f64,
    pub phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amp_min: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub freeze_amp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub xhat: Vec<f64>,
    pub mu: Vec<f64>,
    pub z: Vec<f64>,
    pub amp: Vec<f64>,
    pub nlow: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

/// Default run-output directory: `GNE_ESC_OUT` or `./runs`.
pub fn default_output_dir() -> String {
    std::env::var("GNE_ESC_OUT").unwrap_or_else(|_| "runs".into())
}

// ---------------------------------------------------------------------------
// raw (user-facing) document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    game: RawGame,
    #[serde(default)]
    graph: Option<RawGraph>,
    #[serde(default)]
    params: Option<RawParams>,
    #[serde(default)]
    integrator: Option<RawIntegrator>,
    #[serde(default)]
    initial: Option<RawInitial>,
    #[serde(default)]
    stubborn: BTreeMap<usize, f64>,
    #[serde(default)]
    outputs: Option<RawOutputs>,
    #[serde(default)]
    seed: Option<u64>,
    /// Present when re-loading a resolved config; informational only.
    #[serde(default)]
    preset: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawGame {
    Preset { preset: String },
    Nested { quadratic: RawQuadratic },
    Resolved(GameConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuadratic {
    quadratic: Vec<Vec<Vec<f64>>>,
    linear: Vec<Vec<f64>>,
    #[serde(default)]
    offset: Option<Vec<f64>>,
    demands: Vec<f64>,
    #[serde(default)]
    bounds: Option<Vec<Option<(f64, f64)>>>,
    #[serde(default)]
    penalties: Option<ScalarOrVec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawGraph {
    Named(String),
    Generator {
        generator: String,
        #[serde(default)]
        n: Option<usize>,
    },
    Edges {
        n: usize,
        edges: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ScalarOrVec {
    fn broadcast(&self, n: usize) -> Vec<f64> {
        match self {
            ScalarOrVec::Scalar(v) => vec![*v; n],
            ScalarOrVec::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(default)]
    k: Option<ScalarOrVec>,
    #[serde(default)]
    b: Option<ScalarOrVec>,
    #[serde(default)]
    wl: Option<ScalarOrVec>,
    #[serde(default)]
    wh: Option<ScalarOrVec>,
    #[serde(default)]
    wbar: Option<Vec<f64>>,
    #[serde(default)]
    w: Option<f64>,
    #[serde(default)]
    delta: Option<f64>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    m: Option<f64>,
    #[serde(default)]
    phi: Option<f64>,
    #[serde(default)]
    amp_min: Option<f64>,
    #[serde(default)]
    freeze_amp: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    t_end: Option<f64>,
    #[serde(default)]
    method: Option<crate::integrate::Method>,
    #[serde(default)]
    record_every: Option<usize>,
    #[serde(default)]
    dense_tail: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum InitSpec {
    Scalar(f64),
    Vector(Vec<f64>),
    Uniform {
        uniform: (f64, f64),
    },
    /// For `nlow` only: evaluate each agent's auxiliary cost at the initial
    /// strategies.
    Keyword(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    #[serde(default)]
    xhat: Option<InitSpec>,
    #[serde(default)]
    mu: Option<InitSpec>,
    #[serde(default)]
    z: Option<InitSpec>,
    #[serde(default)]
    amp: Option<InitSpec>,
    #[serde(default)]
    nlow: Option<InitSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    #[serde(default)]
    dir: Option<String>,
    #[serde(default)]
    formats: Option<Vec<String>>,
}

// ---------------------------------------------------------------------------
// loading and resolution
// ---------------------------------------------------------------------------

/// Loads, resolves, and validates a JSON experiment document.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    load_config_str(&text)
}

/// Same as [`load_config`], from an in-memory JSON document.
pub fn load_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        detail: e.inner().to_string(),
    })?;
    let resolved = resolve(raw)?;
    validate(&resolved)?;
    Ok(resolved)
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let (base, preset_name) = match &raw.game {
        RawGame::Preset { preset: name } => {
            let preset = super::presets::preset(name).ok_or_else(|| {
                ConfigError::UnknownPreset(name.clone(), super::presets::preset_names().join(", "))
            })?;
            (Some(preset), Some(name.clone()))
        }
        _ => (None, raw.preset.clone()),
    };

    let game = match &raw.game {
        RawGame::Preset { .. } => base.as_ref().unwrap().game.clone(),
        RawGame::Resolved(g) => g.clone(),
        RawGame::Nested { quadratic: q } => {
            let n = q.quadratic.len();
            GameConfig {
                quadratic: q.quadratic.clone(),
                linear: q.linear.clone(),
                offset: q.offset.clone().unwrap_or_else(|| vec![0.0; n]),
                demands: q.demands.clone(),
                bounds: q.bounds.clone().unwrap_or_else(|| vec![None; n]),
                penalties: q
                    .penalties
                    .clone()
                    .unwrap_or(ScalarOrVec::Scalar(10.0))
                    .broadcast(n),
            }
        }
    };
    let n = game.demands.len();

    let graph = match raw.graph {
        None => match &base {
            Some(b) => b.graph.clone(),
            None => generated_graph("complete", n)?,
        },
        Some(RawGraph::Named(name)) => generated_graph(&name, n)?,
        Some(RawGraph::Generator { generator, n: gn }) => {
            generated_graph(&generator, gn.unwrap_or(n))?
        }
        Some(RawGraph::Edges { n, edges }) => GraphConfig { n, edges },
    };

    let base_params = base.as_ref().map(|b| b.params.clone());
    let params = resolve_params(raw.params, base_params, n)?;

    let base_integrator = base.as_ref().map(|b| b.integrator.clone());
    let integrator = resolve_integrator(raw.integrator, base_integrator, &params)?;

    let seed = raw
        .seed
        .unwrap_or_else(|| base.as_ref().map(|b| b.seed).unwrap_or(0));

    let base_initial = base.as_ref().map(|b| b.initial.clone());
    let initial = resolve_initial(raw.initial, base_initial, &game, n, seed)?;

    let stubborn = if raw.stubborn.is_empty() {
        base.as_ref()
            .map(|b| b.stubborn.clone())
            .unwrap_or_default()
    } else {
        raw.stubborn
    };

    let outputs = match raw.outputs {
        None => base.as_ref().map(|b| b.outputs.clone()).unwrap_or_default(),
        Some(o) => OutputsConfig {
            dir: o.dir.unwrap_or_else(default_output_dir),
            formats: o
                .formats
                .unwrap_or_else(|| vec!["csv".into(), "json".into()]),
        },
    };

    Ok(ExperimentConfig {
        preset: preset_name,
        game,
        graph,
        params,
        integrator,
        initial,
        stubborn,
        outputs,
        seed,
    })
}

fn generated_graph(name: &str, n: usize) -> Result<GraphConfig, ConfigError> {
    let graph = match name {
        "ring" => CommGraph::ring(n),
        "complete" => CommGraph::complete(n),
        "path" => CommGraph::path(n),
        "star" => CommGraph::star(n),
        other => {
            return Err(rule(
                "graph-generator",
                format!("unknown generator `{other}`; expected ring, complete, path, or star"),
            ))
        }
    }
    .map_err(|e| rule("graph-generator", e.to_string()))?;
    Ok(GraphConfig {
        n,
        edges: graph.edges().map(|(a, b)| (a + 1, b + 1)).collect(),
    })
}

fn resolve_params(
    raw: Option<RawParams>,
    base: Option<ParamsConfig>,
    n: usize,
) -> Result<ParamsConfig, ConfigError> {
    let raw = raw.unwrap_or(RawParams {
        k: None,
        b: None,
        wl: None,
        wh: None,
        wbar: None,
        w: None,
        delta: None,
        alpha: None,
        m: None,
        phi: None,
        amp_min: None,
        freeze_amp: None,
    });
    let missing = |field: &'static str| {
        rule(
            "params-required",
            format!("params.{field} is required when no preset supplies it"),
        )
    };
    let vec_field = |user: &Option<ScalarOrVec>, from_base: Option<&Vec<f64>>, field| match user {
        Some(v) => Ok(v.broadcast(n)),
        None => from_base.cloned().ok_or_else(|| missing(field)),
    };
    let k = vec_field(&raw.k, base.as_ref().map(|b| &b.k), "k")?;
    let b_gain = vec_field(&raw.b, base.as_ref().map(|b| &b.b), "b")?;
    let wl = vec_field(&raw.wl, base.as_ref().map(|b| &b.wl), "wl")?;
    let wh = vec_field(&raw.wh, base.as_ref().map(|b| &b.wh), "wh")?;
    let wbar = match raw.wbar {
        Some(v) => v,
        None => base
            .as_ref()
            .map(|b| b.wbar.clone())
            .ok_or_else(|| missing("wbar"))?,
    };
    let scalar = |user: Option<f64>, from_base: Option<f64>, field| {
        user.or(from_base).ok_or_else(|| missing(field))
    };
    Ok(ParamsConfig {
        k,
        b: b_gain,
        wl,
        wh,
        wbar,
        w: scalar(raw.w, base.as_ref().map(|b| b.w), "w")?,
        delta: scalar(raw.delta, base.as_ref().map(|b| b.delta), "delta")?,
        alpha: scalar(raw.alpha, base.as_ref().map(|b| b.alpha), "alpha")?,
        m: scalar(raw.m, base.as_ref().map(|b| b.m), "m")?,
        phi: scalar(raw.phi, base.as_ref().map(|b| b.phi), "phi")?,
        amp_min: raw.amp_min.or(base.as_ref().and_then(|b| b.amp_min)),
        freeze_amp: raw
            .freeze_amp
            .unwrap_or_else(|| base.as_ref().map(|b| b.freeze_amp).unwrap_or(false)),
    })
}

fn resolve_integrator(
    raw: Option<RawIntegrator>,
    base: Option<IntegratorConfig>,
    params: &ParamsConfig,
) -> Result<IntegratorConfig, ConfigError> {
    let raw = raw.unwrap_or(RawIntegrator {
        dt: None,
        t_end: None,
        method: None,
        record_every: None,
        dense_tail: None,
    });
    // default step: 1/40 of the fastest dither period
    let w_max = params
        .wbar
        .iter()
        .map(|wb| wb * params.w)
        .fold(0.0f64, f64::max);
    let default_dt = if w_max > 0.0 {
        Some(2.0 * std::f64::consts::PI / (w_max * 40.0))
    } else {
        None
    };
    let dt = raw
        .dt
        .or(base.as_ref().map(|b| b.dt))
        .or(default_dt)
        .ok_or_else(|| rule("params-required", "integrator.dt is required"))?;
    let t_end = raw
        .t_end
        .or(base.as_ref().map(|b| b.t_end))
        .ok_or_else(|| rule("params-required", "integrator.t_end is required"))?;
    Ok(IntegratorConfig {
        dt,
        t_end,
        method: raw
            .method
            .or(base.as_ref().map(|b| b.method))
            .unwrap_or(crate::integrate::Method::Rk4),
        record_every: raw
            .record_every
            .or(base.as_ref().map(|b| b.record_every))
            .unwrap_or(1),
        dense_tail: raw.dense_tail.or(base.as_ref().and_then(|b| b.dense_tail)),
    })
}

fn resolve_initial(
    raw: Option<RawInitial>,
    base: Option<InitialConfig>,
    game: &GameConfig,
    n: usize,
    seed: u64,
) -> Result<InitialConfig, ConfigError> {
    let raw = raw.unwrap_or(RawInitial {
        xhat: None,
        mu: None,
        z: None,
        amp: None,
        nlow: None,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = |spec: &Option<InitSpec>,
                     from_base: Option<&Vec<f64>>,
                     default: Option<Vec<f64>>,
                     name: &'static str|
     -> Result<Vec<f64>, ConfigError> {
        match spec {
            Some(InitSpec::Scalar(v)) => Ok(vec![*v; n]),
            Some(InitSpec::Vector(v)) => Ok(v.clone()),
            Some(InitSpec::Uniform { uniform: (lo, hi) }) => {
                if !(hi > lo) {
                    return Err(rule(
                        "initial-uniform",
                        format!("initial.{name}: uniform range [{lo}, {hi}] is empty"),
                    ));
                }
                Ok((0..n).map(|_| rng.gen_range(*lo..*hi)).collect())
            }
            Some(InitSpec::Keyword(word)) => Err(rule(
                "initial-keyword",
                format!("initial.{name}: unsupported keyword `{word}`"),
            )),
            None => match from_base {
                Some(v) => Ok(v.clone()),
                None => default.ok_or_else(|| {
                    rule(
                        "params-required",
                        format!("initial.{name} is required when no preset supplies it"),
                    )
                }),
            },
        }
    };
    let xhat = field(
        &raw.xhat,
        base.as_ref().map(|b| &b.xhat),
        Some(game.demands.clone()),
        "xhat",
    )?;
    let mu = field(
        &raw.mu,
        base.as_ref().map(|b| &b.mu),
        Some(vec![0.0; n]),
        "mu",
    )?;
    let z = field(&raw.z, base.as_ref().map(|b| &b.z), Some(vec![0.0; n]), "z")?;
    let amp = field(
        &raw.amp,
        base.as_ref().map(|b| &b.amp),
        Some(vec![0.2; n]),
        "amp",
    )?;
    // nlow: "warm" evaluates the auxiliary cost at the initial strategies
    let nlow = match &raw.nlow {
        Some(InitSpec::Keyword(word)) if word == "warm" => warm_nlow(game, &xhat)?,
        Some(InitSpec::Keyword(word)) => {
            return Err(rule(
                "initial-keyword",
                format!("initial.nlow: unsupported keyword `{word}` (try \"warm\")"),
            ))
        }
        other => field(
            other,
            base.as_ref().map(|b| &b.nlow),
            Some(warm_nlow(game, &xhat)?),
            "nlow",
        )?,
    };
    Ok(InitialConfig {
        xhat,
        mu,
        z,
        amp,
        nlow,
    })
}

fn warm_nlow(game: &GameConfig, xhat: &[f64]) -> Result<Vec<f64>, ConfigError> {
    let built = build_game(game)?;
    (0..xhat.len())
        .map(|i| {
            built
                .spec
                .auxiliary_cost(i, xhat)
                .map_err(|e| rule("initial-warm", e.to_string()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// validation and runtime construction
// ---------------------------------------------------------------------------

/// Runtime objects built from a validated configuration.
#[derive(Debug)]
pub struct Prepared {
    pub quadratic: QuadraticGame,
    pub spec: GameSpec,
    pub graph: CommGraph,
    pub params: SeekerParams,
    pub initial: SwarmState,
    /// 0-based stubborn assignments, ascending by player.
    pub stubborn: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
}

struct BuiltGame {
    quadratic: QuadraticGame,
    spec: GameSpec,
}

fn build_game(game: &GameConfig) -> Result<BuiltGame, ConfigError> {
    let n = game.demands.len();
    for (field, got) in [
        ("quadratic", game.quadratic.len()),
        ("linear", game.linear.len()),
        ("offset", game.offset.len()),
        ("bounds", game.bounds.len()),
        ("penalties", game.penalties.len()),
    ] {
        if got != n {
            return Err(rule(
                "lengths",
                format!("game.{field} has length {got}, expected {n} (one entry per player)"),
            ));
        }
    }
    let mut quadratic = Vec::with_capacity(n);
    for (i, rows) in game.quadratic.iter().enumerate() {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(rule(
                "game-shape",
                format!("game.quadratic[{}] must be a {n}x{n} matrix", i + 1),
            ));
        }
        quadratic.push(DMatrix::from_fn(n, n, |r, c| rows[r][c]));
    }
    let linear = game
        .linear
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if l.len() != n {
                Err(rule(
                    "game-shape",
                    format!("game.linear[{}] must have {n} entries", i + 1),
                ))
            } else {
                Ok(DVector::from_column_slice(l))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let qg = QuadraticGame::new(quadratic, linear, game.offset.clone(), game.demands.clone())
        .map_err(|e| rule("game-shape", e.to_string()))?;
    let spec = qg
        .to_game_spec(Some(&game.bounds), &game.penalties)
        .map_err(|e| rule("penalty-positive", e.to_string()))?;
    Ok(BuiltGame {
        quadratic: qg,
        spec,
    })
}

fn build_graph(graph: &GraphConfig) -> Result<CommGraph, ConfigError> {
    for &(a, b) in &graph.edges {
        if a == 0 || b == 0 {
            return Err(rule(
                "graph-index",
                format!("edge ({a}, {b}) uses node 0; nodes are numbered from 1"),
            ));
        }
    }
    CommGraph::new(graph.n, graph.edges.iter().map(|&(a, b)| (a - 1, b - 1)))
        .map_err(|e| rule("graph-index", e.to_string()))
}

fn build_params(params: &ParamsConfig) -> SeekerParams {
    SeekerParams {
        gain: params.k.clone(),
        amp_gain: params.b.clone(),
        low_pass: params.wl.clone(),
        high_pass: params.wh.clone(),
        base_freq: params.wbar.clone(),
        freq_scale: params.w,
        amp_timescale: params.delta,
        consensus_gain: params.alpha,
        monotonicity: params.m,
        lyapunov_weight: params.phi,
        amp_floor: params.amp_min,
        freeze_amp: params.freeze_amp,
    }
}

/// Semantic validation; every failure names its rule. Returns the runtime
/// objects and any non-fatal warnings.
pub fn validate(config: &ExperimentConfig) -> Result<Prepared, ConfigError> {
    let mut warnings = Vec::new();
    let built = build_game(&config.game)?;
    let n = built.quadratic.n_players();

    let graph = build_graph(&config.graph)?;
    if graph.node_count() != n {
        return Err(rule(
            "graph-nodes",
            format!(
                "graph has {} nodes but the game has {n} players",
                graph.node_count()
            ),
        ));
    }
    if !graph.is_connected() {
        return Err(rule(
            "graph-connected",
            "the communication graph must be connected so the multiplier consensus can agree",
        ));
    }

    for (field, len) in [
        ("params.k", config.params.k.len()),
        ("params.b", config.params.b.len()),
        ("params.wl", config.params.wl.len()),
        ("params.wh", config.params.wh.len()),
        ("params.wbar", config.params.wbar.len()),
        ("initial.xhat", config.initial.xhat.len()),
        ("initial.mu", config.initial.mu.len()),
        ("initial.z", config.initial.z.len()),
        ("initial.amp", config.initial.amp.len()),
        ("initial.nlow", config.initial.nlow.len()),
    ] {
        if len != n {
            return Err(rule(
                "lengths",
                format!("{field} has length {len}, expected {n} (one entry per player)"),
            ));
        }
    }

    let params = build_params(&config.params);
    params.validate().map_err(|e| {
        let name = match &e {
            crate::seeker::SeekerError::DuplicateFrequency { .. } => "freq-distinct",
            crate::seeker::SeekerError::BadTimescale(_) => "param-timescale",
            _ => "param-positive",
        };
        rule(name, e.to_string())
    })?;
    if let Some(floor) = config.params.amp_min {
        if floor < 0.0 {
            return Err(rule(
                "amp-floor",
                format!("params.amp_min must be non-negative, got {floor}"),
            ));
        }
    }

    // stubborn assignments: 1-based keys, valid range, at least one seeker,
    // and a connected seeker subgraph
    let mut stubborn = Vec::new();
    for (&player, &value) in &config.stubborn {
        if player == 0 || player > n {
            return Err(rule(
                "stubborn-index",
                format!("stubborn player {player} out of range 1..={n}"),
            ));
        }
        if !value.is_finite() {
            return Err(rule(
                "stubborn-index",
                format!("stubborn strategy for player {player} must be finite, got {value}"),
            ));
        }
        stubborn.push((player - 1, value));
    }
    if stubborn.len() == n {
        return Err(rule(
            "stubborn-all",
            "at least one player must keep seeking; use the oracle for all-fixed profiles",
        ));
    }
    if !stubborn.is_empty() {
        let seekers: Vec<usize> = (0..n)
            .filter(|i| !stubborn.iter().any(|(s, _)| s == i))
            .collect();
        let sub = graph
            .induced_subgraph(&seekers)
            .map_err(|e| rule("seeker-subgraph-connected", e.to_string()))?;
        if !sub.is_connected() {
            return Err(rule(
                "seeker-subgraph-connected",
                "removing the stubborn players must leave a connected graph among the seekers",
            ));
        }
    }

    // initial state rules
    let z_sum: f64 = config.initial.z.iter().sum();
    if z_sum.abs() > 1e-12 {
        return Err(rule(
            "z-sum-zero",
            format!(
                "initial auxiliary variables must sum to zero for the coupled constraint \
                 to be enforceable; got sum(z) = {z_sum}"
            ),
        ));
    }
    for (i, &a) in config.initial.amp.iter().enumerate() {
        let is_seeker = !stubborn.iter().any(|&(s, _)| s == i);
        if is_seeker && !(a > 0.0) {
            return Err(rule(
                "amp-positive",
                format!(
                    "initial dither amplitude of player {} must be positive, got {a}",
                    i + 1
                ),
            ));
        }
    }

    // step size against the fastest dither
    match config.integrator.validate(params.max_frequency()) {
        Err(crate::integrate::IntegrateError::StepTooLarge {
            dt,
            period,
            steps_per_period,
        }) => {
            return Err(rule(
                "step-size",
                format!(
                    "dt = {dt} gives {steps_per_period:.2} steps per fastest dither period \
                     {period:.6}; need at least 8 (20 recommended)"
                ),
            ));
        }
        Err(e) => return Err(rule("integrator", e.to_string())),
        Ok(Some(w)) => warnings.push(format!(
            "step-size: {:.1} steps per fastest dither period is coarse; consider dt <= {:.3e}",
            w.steps_per_period, w.recommended_dt
        )),
        Ok(None) => {}
    }

    for format in &config.outputs.formats {
        if format != "csv" && format != "json" {
            return Err(rule(
                "output-format",
                format!("unknown output format `{format}`; expected csv or json"),
            ));
        }
    }

    let initial = SwarmState {
        agents: (0..n)
            .map(|i| AgentState {
                xhat: config.initial.xhat[i],
                mu: config.initial.mu[i],
                z: config.initial.z[i],
                amp: config.initial.amp[i],
                nlow: config.initial.nlow[i],
            })
            .collect(),
        t: 0.0,
    };

    Ok(Prepared {
        quadratic: built.quadratic,
        spec: built.spec,
        graph,
        params,
        initial,
        stubborn,
        warnings,
    })
}

impl Prepared {
    /// Wraps the full game as the seekers' reduced game: stubborn strategies
    /// are frozen inside the evaluators and the seekers' demands absorb the
    /// stubborn players' residual demand in equal shares.
    pub fn reduced_for_seekers(
        &self,
    ) -> Result<(GameSpec, CommGraph, SeekerParams, SwarmState, Vec<usize>), ConfigError> {
        let n = self.quadratic.n_players();
        let seekers: Vec<usize> = (0..n)
            .filter(|i| !self.stubborn.iter().any(|(s, _)| s == i))
            .collect();
        if self.stubborn.is_empty() {
            return Ok((
                self.spec.clone(),
                self.graph.clone(),
                self.params.clone(),
                self.initial.clone(),
                seekers,
            ));
        }
        let s = seekers.len();
        let mut template = vec![0.0; n];
        for &(idx, value) in &self.stubborn {
            template[idx] = value;
        }
        let demand_shift: f64 = self
            .stubborn
            .iter()
            .map(|&(idx, value)| self.spec.demands()[idx] - value)
            .sum::<f64>()
            / s as f64;

        let mut costs: Vec<CostFn> = Vec::with_capacity(s);
        let mut constraints: Vec<Vec<ScalarFn>> = Vec::with_capacity(s);
        let mut penalties = Vec::with_capacity(s);
        let mut demands = Vec::with_capacity(s);
        for &player in &seekers {
            let quadratic = self.quadratic.clone();
            let template = template.clone();
            let seekers = seekers.clone();
            costs.push(Arc::new(move |xs: &[f64]| {
                let mut full = template.clone();
                for (r, &p) in seekers.iter().enumerate() {
                    full[p] = xs[r];
                }
                quadratic.cost(player, &full).expect("validated game")
            }));
            constraints.push(
                self.spec
                    .constraint_evaluators(player)
                    .expect("player index validated")
                    .to_vec(),
            );
            penalties.push(self.spec.penalties()[player]);
            demands.push(self.spec.demands()[player] + demand_shift);
        }
        let spec = GameSpec::new(costs, constraints, penalties, demands)
            .map_err(|e| rule("stubborn-reduction", e.to_string()))?;

        let graph = self
            .graph
            .induced_subgraph(&seekers)
            .map_err(|e| rule("seeker-subgraph-connected", e.to_string()))?;

        let pick = |v: &[f64]| -> Vec<f64> { seekers.iter().map(|&i| v[i]).collect() };
        let params = SeekerParams {
            gain: pick(&self.params.gain),
            amp_gain: pick(&self.params.amp_gain),
            low_pass: pick(&self.params.low_pass),
            high_pass: pick(&self.params.high_pass),
            base_freq: pick(&self.params.base_freq),
            ..self.params.clone()
        };
        let initial = SwarmState {
            agents: seekers.iter().map(|&i| self.initial.agents[i]).collect(),
            t: self.initial.t,
        };
        Ok((spec, graph, params, initial, seekers))
    }
}
