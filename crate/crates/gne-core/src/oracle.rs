//! Ground truth and condition checking for quadratic games: the bordered KKT
//! solver, stubborn-player best responses, dither-frequency checks, gain
//! margins, the Lyapunov-equation solve, and the monotonicity probe.
//!
//! Everything here is independent of the seeker; the simulation is verified
//! against these closed-form solutions, never the other way around.

use crate::game::QuadraticGame;
use crate::seeker::SeekerParams;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("KKT system is singular; the game has no unique variational equilibrium")]
    SingularKkt,
    #[error("KKT residual {residual} exceeds tolerance {tolerance}; system too ill-conditioned")]
    IllConditioned { residual: f64, tolerance: f64 },
    #[error("stubborn index {index} out of range for {n} players")]
    StubbornOutOfRange { index: usize, n: usize },
    #[error("seeker block of the reduced matrix is singular")]
    SingularSeekerBlock,
    #[error("Lyapunov system is singular")]
    LyapunovSingular,
}

const KKT_TOLERANCE: f64 = 1e-10;

/// Variational equilibrium of a quadratic game under the coupled equality
/// constraint: strategies, the common multiplier, and the achieved residual.
#[derive(Debug, Clone, Serialize)]
pub struct GneSolution {
    pub x_star: Vec<f64>,
    pub mu_bar: f64,
    pub kkt_residual: f64,
}

/// Solves the stationarity-plus-demand linear system
/// `M x + mu 1 = -l_diag, sum(x) = sum(d)` by dense LU.
pub fn solve_quadratic_gne(game: &QuadraticGame) -> Result<GneSolution, OracleError> {
    let n = game.n_players();
    let m = game.reduced_matrix();
    let l_diag = game.linear_diagonal();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(&m.0);
    for i in 0..n {
        a[(i, n)] = 1.0;
        a[(n, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(n + 1);
    for i in 0..n {
        rhs[i] = -l_diag[i];
    }
    rhs[n] = game.demand_total();
    let solution = a.lu().solve(&rhs).ok_or(OracleError::SingularKkt)?;
    let x_star: Vec<f64> = solution.as_slice()[..n].to_vec();
    let mu_bar = solution[n];
    let residual = kkt_residual(game, &x_star, mu_bar);
    if !residual.is_finite() || residual > KKT_TOLERANCE {
        return Err(OracleError::IllConditioned {
            residual,
            tolerance: KKT_TOLERANCE,
        });
    }
    Ok(GneSolution {
        x_star,
        mu_bar,
        kkt_residual: residual,
    })
}

/// Max-norm residual of the stationarity rows and the demand row.
pub fn kkt_residual(game: &QuadraticGame, x: &[f64], mu: f64) -> f64 {
    let f = match game.pseudo_gradient(x) {
        Ok(f) => f,
        Err(_) => return f64::INFINITY,
    };
    let mut worst = (x.iter().sum::<f64>() - game.demand_total()).abs();
    for i in 0..game.n_players() {
        worst = worst.max((f[i] + mu).abs());
    }
    worst
}

/// How the common multiplier is treated when solving a best response against
/// stubborn players.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuBarPolicy {
    /// Solve the multiplier jointly with the seekers' strategies, restricting
    /// the coupled constraint to the seekers' residual demand
    /// `sum(d) - sum(fixed)`.
    SolveJointly,
    /// Use a caller-supplied multiplier and drop the demand row (the seekers'
    /// stationarity block alone).
    Fixed(f64),
}

/// Best response of the non-stubborn players, as a full-length profile with
/// stubborn entries held at their fixed values.
#[derive(Debug, Clone, Serialize)]
pub struct BestResponse {
    pub x: Vec<f64>,
    /// Common multiplier of the seeker block; `None` when every player is
    /// stubborn.
    pub mu_bar: Option<f64>,
    pub kkt_residual: f64,
}

/// Joint best response of the seekers against players held fixed. `stubborn`
/// pairs player indices with their frozen strategies.
pub fn best_response_stubborn(
    game: &QuadraticGame,
    stubborn: &[(usize, f64)],
    policy: MuBarPolicy,
) -> Result<BestResponse, OracleError> {
    let n = game.n_players();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for &(idx, value) in stubborn {
        if idx >= n {
            return Err(OracleError::StubbornOutOfRange { index: idx, n });
        }
        fixed[idx] = Some(value);
    }
    let seekers: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    if seekers.is_empty() {
        let x: Vec<f64> = fixed.iter().map(|v| v.unwrap()).collect();
        return Ok(BestResponse {
            x,
            mu_bar: None,
            kkt_residual: 0.0,
        });
    }
    let s = seekers.len();
    let m = game.reduced_matrix();
    let l_diag = game.linear_diagonal();

    // stationarity rows restricted to seekers, with fixed entries moved to
    // the right-hand side
    let mut fixed_load = DVector::zeros(s);
    for (row, &i) in seekers.iter().enumerate() {
        let mut acc = 0.0;
        for (j, v) in fixed.iter().enumerate() {
            if let Some(xj) = v {
                acc += m.0[(i, j)] * xj;
            }
        }
        fixed_load[row] = acc;
    }

    let (solution, mu_bar) = match policy {
        MuBarPolicy::SolveJointly => {
            let mut a = DMatrix::zeros(s + 1, s + 1);
            for (row, &i) in seekers.iter().enumerate() {
                for (col, &j) in seekers.iter().enumerate() {
                    a[(row, col)] = m.0[(i, j)];
                }
                a[(row, s)] = 1.0;
                a[(s, row)] = 1.0;
            }
            let mut rhs = DVector::zeros(s + 1);
            for (row, &i) in seekers.iter().enumerate() {
                rhs[row] = -l_diag[i] - fixed_load[row];
            }
            let residual_demand: f64 = game.demand_total() - fixed.iter().flatten().sum::<f64>();
            rhs[s] = residual_demand;
            let sol = a.lu().solve(&rhs).ok_or(OracleError::SingularSeekerBlock)?;
            let mu = sol[s];
            (sol.rows(0, s).into_owned(), Some(mu))
        }
        MuBarPolicy::Fixed(mu) => {
            let mut a = DMatrix::zeros(s, s);
            for (row, &i) in seekers.iter().enumerate() {
                for (col, &j) in seekers.iter().enumerate() {
                    a[(row, col)] = m.0[(i, j)];
                }
            }
            let mut rhs = DVector::zeros(s);
            for (row, &i) in seekers.iter().enumerate() {
                rhs[row] = -l_diag[i] - fixed_load[row] - mu;
            }
            let sol = a.lu().solve(&rhs).ok_or(OracleError::SingularSeekerBlock)?;
            (sol, Some(mu))
        }
    };

    let mut x: Vec<f64> = vec![0.0; n];
    for (j, v) in fixed.iter().enumerate() {
        if let Some(xj) = v {
            x[j] = *xj;
        }
    }
    for (row, &i) in seekers.iter().enumerate() {
        x[i] = solution[row];
    }

    // residual over the seeker rows only (stubborn rows are not stationary)
    let f = game
        .pseudo_gradient(&x)
        .map_err(|_| OracleError::SingularSeekerBlock)?;
    let mut residual: f64 = 0.0;
    if let Some(mu) = mu_bar {
        for &i in &seekers {
            residual = residual.max((f[i] + mu).abs());
        }
        if matches!(policy, MuBarPolicy::SolveJointly) {
            let residual_demand: f64 = game.demand_total() - fixed.iter().flatten().sum::<f64>();
            let seeker_sum: f64 = seekers.iter().map(|&i| x[i]).sum();
            residual = residual.max((seeker_sum - residual_demand).abs());
        }
    }
    if !residual.is_finite() || residual > KKT_TOLERANCE {
        return Err(OracleError::IllConditioned {
            residual,
            tolerance: KKT_TOLERANCE,
        });
    }
    Ok(BestResponse {
        x,
        mu_bar,
        kkt_residual: residual,
    })
}

/// A flagged resonance among dither frequencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreqViolation {
    pub relation: FreqRelation,
    pub indices: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

/// The resonance families that break first- and second-order averaging of the
/// demodulated cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FreqRelation {
    /// w_i = w_j
    Equal,
    /// w_i = 2 w_j
    TwiceOther,
    /// w_i = w_j + w_k
    SumOfPair,
    /// 2 w_i = w_j + w_k
    DoubleEqualsSum,
    /// w_i = 2 w_j + w_k
    TwicePlusOther,
}

fn close(lhs: f64, rhs: f64, tol: f64) -> bool {
    (lhs - rhs).abs() <= tol * lhs.abs().max(rhs.abs())
}

/// Flags every resonance `w_i = w_j`, `w_i = 2 w_j`, `w_i = w_j + w_k`,
/// `2 w_i = w_j + w_k`, `w_i = 2 w_j + w_k` over distinct indices, using a
/// relative tolerance.
pub fn check_frequencies(freqs: &[f64], rel_tol: f64) -> Vec<FreqViolation> {
    let n = freqs.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if i < j && close(freqs[i], freqs[j], rel_tol) {
                out.push(FreqViolation {
                    relation: FreqRelation::Equal,
                    indices: vec![i, j],
                    lhs: freqs[i],
                    rhs: freqs[j],
                });
            }
            if close(freqs[i], 2.0 * freqs[j], rel_tol) {
                out.push(FreqViolation {
                    relation: FreqRelation::TwiceOther,
                    indices: vec![i, j],
                    lhs: freqs[i],
                    rhs: 2.0 * freqs[j],
                });
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                if j < k && close(freqs[i], freqs[j] + freqs[k], rel_tol) {
                    out.push(FreqViolation {
                        relation: FreqRelation::SumOfPair,
                        indices: vec![i, j, k],
                        lhs: freqs[i],
                        rhs: freqs[j] + freqs[k],
                    });
                }
                if j < k && close(2.0 * freqs[i], freqs[j] + freqs[k], rel_tol) {
                    out.push(FreqViolation {
                        relation: FreqRelation::DoubleEqualsSum,
                        indices: vec![i, j, k],
                        lhs: 2.0 * freqs[i],
                        rhs: freqs[j] + freqs[k],
                    });
                }
                if close(freqs[i], 2.0 * freqs[j] + freqs[k], rel_tol) {
                    out.push(FreqViolation {
                        relation: FreqRelation::TwicePlusOther,
                        indices: vec![i, j, k],
                        lhs: freqs[i],
                        rhs: 2.0 * freqs[j] + freqs[k],
                    });
                }
            }
        }
    }
    out
}

/// Gain-condition margins: the dither-squared gain floor
/// `K = min_i k_i a_i^2` against `1/(2 phi m - 1)`, and the consensus gain
/// against `(4 + phi^2 m) / (2 lambda2)`.
#[derive(Debug, Clone, Serialize)]
pub struct GainReport {
    pub k_floor: f64,
    pub k_floor_required: f64,
    pub k_floor_margin: f64,
    pub consensus_gain: f64,
    pub consensus_required: f64,
    pub consensus_margin: f64,
    /// phi > 1/(2 m); the other bounds are meaningless when this fails.
    pub phi_precondition_ok: bool,
    pub ok: bool,
}

/// Evaluates the convergence gain conditions at the supplied (initial)
/// amplitudes. Reports margins; never blocks a run.
pub fn check_gains(params: &SeekerParams, amps_at_start: &[f64], lambda2: f64) -> GainReport {
    let m = params.monotonicity;
    let phi = params.lyapunov_weight;
    let phi_precondition_ok = phi > 1.0 / (2.0 * m);
    let k_floor = params
        .gain
        .iter()
        .zip(amps_at_start)
        .map(|(k, a)| k * a * a)
        .fold(f64::INFINITY, f64::min);
    let k_floor_required = if phi_precondition_ok {
        1.0 / (2.0 * phi * m - 1.0)
    } else {
        f64::INFINITY
    };
    let consensus_required = (4.0 + phi * phi * m) / (2.0 * lambda2);
    let k_floor_margin = k_floor - k_floor_required;
    let consensus_margin = params.consensus_gain - consensus_required;
    GainReport {
        k_floor,
        k_floor_required,
        k_floor_margin,
        consensus_gain: params.consensus_gain,
        consensus_required,
        consensus_margin,
        phi_precondition_ok,
        ok: phi_precondition_ok && k_floor_margin > 0.0 && consensus_margin > 0.0,
    }
}

/// Solves `A' P + P A = -Q` by the Kronecker-vectorized dense linear system.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, OracleError> {
    let n = a.nrows();
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(A'P) = (I kron A') vec(P); vec(PA) = (A' kron I) vec(P)
    let system = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let p_vec = system
        .lu()
        .solve(&rhs)
        .ok_or(OracleError::LyapunovSingular)?;
    let p = DMatrix::from_iterator(n, n, p_vec.iter().copied());
    // symmetrize away roundoff
    Ok((&p + p.transpose()) * 0.5)
}

/// Quadratic-game stability margins built from the Lyapunov solve with Q = I.
#[derive(Debug, Clone, Serialize)]
pub struct QuadraticGainReport {
    pub q_min_eigenvalue: f64,
    pub kp_norm: f64,
    /// lambda_min(Q) - (1/2 + |k'P|)
    pub stationarity_margin: f64,
    /// alpha * lambda2 - (2 + |k'P|)
    pub consensus_margin: f64,
    pub lyapunov_residual: f64,
    pub p_positive_definite: bool,
    pub ok: bool,
}

/// Outcome of the quadratic-game condition check.
#[derive(Debug, Clone, Serialize)]
pub struct QuadraticConditions {
    pub diag_dominant: bool,
    pub hurwitz: bool,
    /// Present when the scaled reduced matrix is Hurwitz and the Lyapunov
    /// solve succeeded.
    pub report: Option<QuadraticGainReport>,
}

/// Checks strict diagonal dominance of the reduced matrix, forms the scaled
/// matrix `A = -1/2 diag(k_i a_i) M`, solves `A'P + PA = -I`, and reports the
/// margins `lambda_min(Q) > 1/2 + |k'P|` and `alpha lambda2 > 2 + |k'P|`
/// with `k = 1/2 diag(k_i a_i^2)`.
pub fn check_quadratic_conditions(
    game: &QuadraticGame,
    params: &SeekerParams,
    amps: &[f64],
    lambda2: f64,
) -> QuadraticConditions {
    let m = game.reduced_matrix();
    let diag_dominant = m.is_strictly_diagonally_dominant();
    let n = game.n_players();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = -0.5 * params.gain[i] * amps[i] * m.0[(i, j)];
        }
    }
    let hurwitz = a.complex_eigenvalues().iter().all(|eig| eig.re < 0.0);
    if !hurwitz {
        return QuadraticConditions {
            diag_dominant,
            hurwitz,
            report: None,
        };
    }
    let q = DMatrix::<f64>::identity(n, n);
    let p = match solve_lyapunov(&a, &q) {
        Ok(p) => p,
        Err(_) => {
            return QuadraticConditions {
                diag_dominant,
                hurwitz,
                report: None,
            }
        }
    };
    let residual = (&a.transpose() * &p + &p * &a + &q)
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let p_positive_definite = p
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .all(|&e| e > 0.0);
    let mut k_diag = DMatrix::zeros(n, n);
    for i in 0..n {
        k_diag[(i, i)] = 0.5 * params.gain[i] * amps[i] * amps[i];
    }
    let kp = k_diag.transpose() * &p;
    let kp_norm = kp
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    let q_min_eigenvalue = 1.0; // Q = I
    let stationarity_margin = q_min_eigenvalue - (0.5 + kp_norm);
    let consensus_margin = params.consensus_gain * lambda2 - (2.0 + kp_norm);
    let ok = p_positive_definite
        && residual <= KKT_TOLERANCE
        && stationarity_margin > 0.0
        && consensus_margin > 0.0;
    QuadraticConditions {
        diag_dominant,
        hurwitz,
        report: Some(QuadraticGainReport {
            q_min_eigenvalue,
            kp_norm,
            stationarity_margin,
            consensus_margin,
            lyapunov_residual: residual,
            p_positive_definite,
            ok,
        }),
    }
}

/// Result of probing `(x-y)'(F(x)-F(y)) >= m |x-y|^2`.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub holds: bool,
    /// Smallest sampled Rayleigh quotient of the symmetric part.
    pub worst_ratio: f64,
    /// Exact smallest eigenvalue of (M + M')/2.
    pub symmetric_min_eigenvalue: f64,
}

/// Checks strong monotonicity of the pseudo-gradient both exactly (smallest
/// eigenvalue of the symmetrized reduced matrix) and on random strategy
/// pairs.
pub fn monotonicity_probe(
    game: &QuadraticGame,
    m_claimed: f64,
    trials: usize,
    seed: u64,
) -> MonotonicityReport {
    let m = game.reduced_matrix();
    let exact = m.symmetric_part_min_eigenvalue();
    let n = game.n_players();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..trials.max(1) {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let mut y: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        if x == y {
            y[0] += 1.0;
        }
        let fx = game.pseudo_gradient(&x).expect("valid profile");
        let fy = game.pseudo_gradient(&y).expect("valid profile");
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let norm2: f64 = diff.iter().map(|v| v * v).sum();
        let inner: f64 = diff
            .iter()
            .zip(fx.iter().zip(fy.iter()))
            .map(|(d, (fa, fb))| d * (fa - fb))
            .sum();
        worst = worst.min(inner / norm2);
    }
    // sample tolerance: the exact eigenvalue is authoritative
    let holds = exact >= m_claimed && worst >= m_claimed - 1e-9;
    MonotonicityReport {
        holds,
        worst_ratio: worst,
        symmetric_min_eigenvalue: exact,
    }
}
