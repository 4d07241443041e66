//! Built-in experiment presets.
//!
//! `cournot4` is the four-company Cournot market on a ring: production cost
//! `x_i^2 + a_i x_i + beta_i` with `a = (2, 4, 6, 8)`, `beta = (7.5, 9, 12,
//! 15)`, inverse demand `5 - 0.04 * total`, bounds `[1,7] [2,6] [2,5] [0,4]`,
//! total demand 16 split evenly, filters `wl = 0.5`, `wh = 5`, gains
//! `k = 3`, `b = 1`, base dither frequencies `(100, 101, 103, 98)`, and
//! initial state `xhat = (1, 2, 3, 4)`, `a = 0.2`, `mu = z = n = 0`.
//!
//! Two operating points are shipped:
//!
//! - `cournot4`: frequency scale 20 and amplitude-timescale ratio
//!   `delta = 0.01`. The demodulation residue scales like 1/w and the slow
//!   aggregate multiplier mode needs the gain alive long enough to settle, so
//!   this operating point converges tightly to the KKT oracle before the
//!   dither amplitude dies.
//! - `cournot4_w1`: frequency scale 1 and `delta = 0.05`. The dither
//!   frequencies are then the literal `(100, 101, 103, 98)` rad/s. The
//!   amplitude dies before the slow aggregate mode settles and the
//!   demodulation residue is O(1/w), so strategies land only within ~0.1-0.3
//!   of the equilibrium and the common multiplier drifts; kept for
//!   comparison studies.

use super::config::{
    ExperimentConfig, GameConfig, GraphConfig, InitialConfig, OutputsConfig, ParamsConfig,
};
use crate::game::CournotMarket;
use crate::integrate::{IntegratorConfig, Method};

pub fn preset_names() -> Vec<String> {
    vec!["cournot4".into(), "cournot4_w1".into()]
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let mut config = match name {
        "cournot4" => cournot4(20.0, 0.01, 1250.0),
        "cournot4_w1" => cournot4(1.0, 0.05, 260.0),
        _ => return None,
    };
    config.preset = Some(name.to_string());
    Some(config)
}

fn cournot4(freq_scale: f64, delta: f64, t_end: f64) -> ExperimentConfig {
    let market = CournotMarket::default();
    let game = market
        .quadratic_game(vec![4.0; 4])
        .expect("cournot constants are valid");
    let n = 4;
    let quadratic = (0..n)
        .map(|i| {
            let q = game.quadratic_term(i);
            (0..n)
                .map(|r| (0..n).map(|c| q[(r, c)]).collect())
                .collect()
        })
        .collect();
    let linear = (0..n)
        .map(|i| game.linear_term(i).iter().copied().collect())
        .collect();
    let wbar = vec![100.0, 101.0, 103.0, 98.0];
    let w_max = 103.0 * freq_scale;
    let dt = 2.0 * std::f64::consts::PI / (w_max * 40.0);
    // record roughly every 0.1 s
    let record_every = (0.1 / dt).round().max(1.0) as usize;
    ExperimentConfig {
        preset: None,
        game: GameConfig {
            quadratic,
            linear,
            offset: market.cost_offset.to_vec(),
            demands: vec![4.0; 4],
            bounds: market.bounds.iter().map(|&b| Some(b)).collect(),
            penalties: vec![10.0; 4],
        },
        graph: GraphConfig {
            n: 4,
            edges: vec![(1, 2), (2, 3), (3, 4), (1, 4)],
        },
        params: ParamsConfig {
            k: vec![3.0; 4],
            b: vec![1.0; 4],
            wl: vec![0.5; 4],
            wh: vec![5.0; 4],
            wbar,
            w: freq_scale,
            delta,
            alpha: 10.0,
            m: 2.04,
            phi: 0.7,
            amp_min: None,
            freeze_amp: false,
        },
        integrator: IntegratorConfig {
            dt,
            t_end,
            method: Method::Rk4,
            record_every,
            dense_tail: Some(5.0),
        },
        initial: InitialConfig {
            xhat: vec![1.0, 2.0, 3.0, 4.0],
            mu: vec![0.0; 4],
            z: vec![0.0; 4],
            amp: vec![0.2; 4],
            nlow: vec![0.0; 4],
        },
        stubborn: Default::default(),
        outputs: OutputsConfig::default(),
        seed: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::validate;

    #[test]
    fn cournot4_payload_constants() {
        let config = preset("cournot4").unwrap();
        // market constants
        for i in 0..4 {
            assert_eq!(config.game.quadratic[i][i][i], 2.08);
            for j in 0..4 {
                if j != i {
                    assert_eq!(config.game.quadratic[i][i][j], 0.04);
                }
            }
            assert_eq!(config.game.linear[i][i], [2.0, 4.0, 6.0, 8.0][i] - 5.0);
            assert_eq!(config.game.offset[i], [7.5, 9.0, 12.0, 15.0][i]);
        }
        assert_eq!(
            config.game.bounds,
            vec![
                Some((1.0, 7.0)),
                Some((2.0, 6.0)),
                Some((2.0, 5.0)),
                Some((0.0, 4.0))
            ]
        );
        assert_eq!(config.game.demands.iter().sum::<f64>(), 16.0);
        // seeker constants
        assert_eq!(config.params.k, vec![3.0; 4]);
        assert_eq!(config.params.b, vec![1.0; 4]);
        assert_eq!(config.params.wl, vec![0.5; 4]);
        assert_eq!(config.params.wh, vec![5.0; 4]);
        assert_eq!(config.params.wbar, vec![100.0, 101.0, 103.0, 98.0]);
        // initial state
        assert_eq!(config.initial.xhat, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(config.initial.amp, vec![0.2; 4]);
        assert_eq!(config.initial.mu, vec![0.0; 4]);
        assert_eq!(config.initial.z, vec![0.0; 4]);
        assert_eq!(config.initial.nlow, vec![0.0; 4]);
        validate(&config).unwrap();
    }

    #[test]
    fn literal_frequency_preset() {
        let config = preset("cournot4_w1").unwrap();
        assert_eq!(config.params.w, 1.0);
        assert_eq!(config.params.delta, 0.05);
        let freqs: Vec<f64> = config
            .params
            .wbar
            .iter()
            .map(|w| w * config.params.w)
            .collect();
        assert_eq!(freqs, vec![100.0, 101.0, 103.0, 98.0]);
        validate(&config).unwrap();
    }

    #[test]
    fn preset_step_size_satisfies_the_rule_with_margin() {
        for name in preset_names() {
            let config = preset(&name).unwrap();
            let prepared = validate(&config).unwrap();
            assert!(
                prepared.warnings.is_empty(),
                "{name}: {:?}",
                prepared.warnings
            );
        }
    }
}
