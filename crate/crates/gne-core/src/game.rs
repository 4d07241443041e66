//! Game definitions: black-box cost/constraint value oracles, the quadratic
//! specialization with closed-form gradients, and the exact-penalty auxiliary
//! cost built from measured values only.
//!
//! A [`GameSpec`] exposes each player's cost `J_i(x)` and local constraints
//! `g_ij(x_i) <= 0` purely through value evaluators. The auxiliary cost adds
//! the exact penalty `p_i * sum_j max(0, g_ij(x_i))`, so a seeker can respect
//! local constraints from measurements alone. Gradient oracles are optional
//! and exist only for analytic games (quadratic or hand-built test games);
//! the seeker never calls them.

use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Cost evaluator over the full strategy profile.
pub type CostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Scalar evaluator of one player's own strategy (local constraints and their
/// derivatives).
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("player index {index} out of range for {n} players")]
    PlayerOutOfRange { index: usize, n: usize },
    #[error("strategy vector has length {got}, expected {expected}")]
    ProfileLength { got: usize, expected: usize },
    #[error("evaluator for player {player} returned non-finite value {value} at {point}")]
    NonFinite {
        player: usize,
        value: f64,
        point: Point,
    },
    #[error("player {player} has no gradient oracle; only value evaluators are available")]
    MissingGradient { player: usize },
    #[error("game must have at least two players, got {0}")]
    TooFewPlayers(usize),
    #[error("penalty coefficient for player {player} must be positive, got {value}")]
    NonPositivePenalty { player: usize, value: f64 },
    #[error("per-player sequence `{field}` has length {got}, expected {expected}")]
    FieldLength {
        field: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("cost matrix for player {player} is not symmetric at ({row},{col})")]
    Asymmetric {
        player: usize,
        row: usize,
        col: usize,
    },
    #[error("cost matrix for player {player} has non-positive own-strategy curvature {value}")]
    NonPositiveCurvature { player: usize, value: f64 },
}

/// Evaluation point attached to evaluation errors.
#[derive(Debug, Clone)]
pub struct Point(pub Vec<f64>);

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// N-player game described by value evaluators, penalty coefficients, and the
/// per-player demands of the coupled equality constraint.
///
/// Immutable after construction; evaluators must be pure, so a `GameSpec` can
/// be shared freely across parallel simulation runs.
#[derive(Clone)]
pub struct GameSpec {
    n: usize,
    costs: Vec<CostFn>,
    constraints: Vec<Vec<ScalarFn>>,
    penalties: Vec<f64>,
    demands: Vec<f64>,
    cost_gradients: Option<Vec<CostFn>>,
    constraint_gradients: Option<Vec<Vec<ScalarFn>>>,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("n", &self.n)
            .field("penalties", &self.penalties)
            .field("demands", &self.demands)
            .field("has_gradients", &self.cost_gradients.is_some())
            .finish()
    }
}

impl GameSpec {
    pub fn new(
        costs: Vec<CostFn>,
        constraints: Vec<Vec<ScalarFn>>,
        penalties: Vec<f64>,
        demands: Vec<f64>,
    ) -> Result<Self, GameError> {
        let n = costs.len();
        if n < 2 {
            return Err(GameError::TooFewPlayers(n));
        }
        for (field, got) in [
            ("constraints", constraints.len()),
            ("penalties", penalties.len()),
            ("demands", demands.len()),
        ] {
            if got != n {
                return Err(GameError::FieldLength {
                    field,
                    got,
                    expected: n,
                });
            }
        }
        for (player, &p) in penalties.iter().enumerate() {
            if !(p > 0.0) {
                return Err(GameError::NonPositivePenalty { player, value: p });
            }
        }
        Ok(Self {
            n,
            costs,
            constraints,
            penalties,
            demands,
            cost_gradients: None,
            constraint_gradients: None,
        })
    }

    /// Attaches analytic gradient oracles: `cost_gradients[i]` evaluates
    /// dJ_i/dx_i over the full profile, `constraint_gradients[i][j]` evaluates
    /// dg_ij/dx_i.
    pub fn with_gradients(
        mut self,
        cost_gradients: Vec<CostFn>,
        constraint_gradients: Vec<Vec<ScalarFn>>,
    ) -> Result<Self, GameError> {
        if cost_gradients.len() != self.n {
            return Err(GameError::FieldLength {
                field: "cost_gradients",
                got: cost_gradients.len(),
                expected: self.n,
            });
        }
        if constraint_gradients.len() != self.n {
            return Err(GameError::FieldLength {
                field: "constraint_gradients",
                got: constraint_gradients.len(),
                expected: self.n,
            });
        }
        for (i, (gs, cs)) in constraint_gradients
            .iter()
            .zip(self.constraints.iter())
            .enumerate()
        {
            if gs.len() != cs.len() {
                return Err(GameError::FieldLength {
                    field: "constraint_gradients",
                    got: gs.len(),
                    expected: self.constraints[i].len(),
                });
            }
        }
        self.cost_gradients = Some(cost_gradients);
        self.constraint_gradients = Some(constraint_gradients);
        Ok(self)
    }

    pub fn n_players(&self) -> usize {
        self.n
    }

    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    pub fn demand_total(&self) -> f64 {
        self.demands.iter().sum()
    }

    pub fn penalties(&self) -> &[f64] {
        &self.penalties
    }

    pub fn has_gradients(&self) -> bool {
        self.cost_gradients.is_some()
    }

    pub fn constraint_count(&self, i: usize) -> Result<usize, GameError> {
        self.check_player(i)?;
        Ok(self.constraints[i].len())
    }

    fn check_player(&self, i: usize) -> Result<(), GameError> {
        if i >= self.n {
            return Err(GameError::PlayerOutOfRange {
                index: i,
                n: self.n,
            });
        }
        Ok(())
    }

    fn check_profile(&self, x: &[f64]) -> Result<(), GameError> {
        if x.len() != self.n {
            return Err(GameError::ProfileLength {
                got: x.len(),
                expected: self.n,
            });
        }
        Ok(())
    }

    fn finite(&self, player: usize, value: f64, x: &[f64]) -> Result<f64, GameError> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(GameError::NonFinite {
                player,
                value,
                point: Point(x.to_vec()),
            })
        }
    }

    /// Raw cost J_i(x).
    pub fn cost(&self, i: usize, x: &[f64]) -> Result<f64, GameError> {
        self.check_player(i)?;
        self.check_profile(x)?;
        let value = (self.costs[i])(x);
        self.finite(i, value, x)
    }

    /// Local constraint values g_ij(x_i) for j = 0..m_i.
    pub fn constraint_values(&self, i: usize, x_i: f64) -> Result<Vec<f64>, GameError> {
        self.check_player(i)?;
        self.constraints[i]
            .iter()
            .map(|g| self.finite(i, g(x_i), &[x_i]))
            .collect()
    }

    /// Player i's local-constraint evaluators.
    pub fn constraint_evaluators(&self, i: usize) -> Result<&[ScalarFn], GameError> {
        self.check_player(i)?;
        Ok(&self.constraints[i])
    }

    /// Auxiliary cost J_i(x) + p_i * sum_j max(0, g_ij(x_i)), computed from
    /// evaluator values only.
    pub fn auxiliary_cost(&self, i: usize, x: &[f64]) -> Result<f64, GameError> {
        let base = self.cost(i, x)?;
        let mut penalty = 0.0;
        for g in &self.constraints[i] {
            let v = self.finite(i, g(x[i]), x)?;
            if v > 0.0 {
                penalty += v;
            }
        }
        Ok(base + self.penalties[i] * penalty)
    }

    /// Analytic gradient of the auxiliary cost with respect to x_i. Strictly
    /// violated constraints contribute `p_i * dg_ij`; a constraint exactly at
    /// its boundary contributes nothing (one-sided derivative from the
    /// feasible side).
    pub fn penalty_gradient(&self, i: usize, x: &[f64]) -> Result<f64, GameError> {
        self.check_player(i)?;
        self.check_profile(x)?;
        let (cost_grads, constraint_grads) =
            match (&self.cost_gradients, &self.constraint_gradients) {
                (Some(c), Some(g)) => (c, g),
                _ => return Err(GameError::MissingGradient { player: i }),
            };
        let mut grad = self.finite(i, (cost_grads[i])(x), x)?;
        for (g, dg) in self.constraints[i].iter().zip(constraint_grads[i].iter()) {
            if self.finite(i, g(x[i]), x)? > 0.0 {
                grad += self.penalties[i] * self.finite(i, dg(x[i]), x)?;
            }
        }
        Ok(grad)
    }
}

/// Quadratic game: J_i(x) = 1/2 x' Q_i x + l_i' x + c_i with Q_i symmetric and
/// positive own-strategy curvature.
#[derive(Debug, Clone)]
pub struct QuadraticGame {
    quadratic: Vec<DMatrix<f64>>,
    linear: Vec<DVector<f64>>,
    offset: Vec<f64>,
    demands: Vec<f64>,
}

impl QuadraticGame {
    pub fn new(
        quadratic: Vec<DMatrix<f64>>,
        linear: Vec<DVector<f64>>,
        offset: Vec<f64>,
        demands: Vec<f64>,
    ) -> Result<Self, GameError> {
        let n = quadratic.len();
        if n < 2 {
            return Err(GameError::TooFewPlayers(n));
        }
        for (field, got) in [
            ("linear", linear.len()),
            ("offset", offset.len()),
            ("demands", demands.len()),
        ] {
            if got != n {
                return Err(GameError::FieldLength {
                    field,
                    got,
                    expected: n,
                });
            }
        }
        for (i, q) in quadratic.iter().enumerate() {
            if q.nrows() != n || q.ncols() != n {
                return Err(GameError::FieldLength {
                    field: "quadratic",
                    got: q.nrows(),
                    expected: n,
                });
            }
            if linear[i].len() != n {
                return Err(GameError::FieldLength {
                    field: "linear",
                    got: linear[i].len(),
                    expected: n,
                });
            }
            for r in 0..n {
                for col in (r + 1)..n {
                    let scale = q[(r, col)].abs().max(q[(col, r)].abs()).max(1.0);
                    if (q[(r, col)] - q[(col, r)]).abs() > 1e-12 * scale {
                        return Err(GameError::Asymmetric {
                            player: i,
                            row: r,
                            col,
                        });
                    }
                }
            }
            if !(q[(i, i)] > 0.0) {
                return Err(GameError::NonPositiveCurvature {
                    player: i,
                    value: q[(i, i)],
                });
            }
        }
        Ok(Self {
            quadratic,
            linear,
            offset,
            demands,
        })
    }

    pub fn n_players(&self) -> usize {
        self.quadratic.len()
    }

    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    pub fn demand_total(&self) -> f64 {
        self.demands.iter().sum()
    }

    pub fn quadratic_term(&self, i: usize) -> &DMatrix<f64> {
        &self.quadratic[i]
    }

    pub fn linear_term(&self, i: usize) -> &DVector<f64> {
        &self.linear[i]
    }

    pub fn offset_term(&self, i: usize) -> f64 {
        self.offset[i]
    }

    /// Shifts the constant term of every player's cost (does not move the
    /// equilibrium or any gradient).
    pub fn with_offsets(mut self, offset: Vec<f64>) -> Result<Self, GameError> {
        if offset.len() != self.n_players() {
            return Err(GameError::FieldLength {
                field: "offset",
                got: offset.len(),
                expected: self.n_players(),
            });
        }
        self.offset = offset;
        Ok(self)
    }

    pub fn cost(&self, i: usize, x: &[f64]) -> Result<f64, GameError> {
        let n = self.n_players();
        if i >= n {
            return Err(GameError::PlayerOutOfRange { index: i, n });
        }
        if x.len() != n {
            return Err(GameError::ProfileLength {
                got: x.len(),
                expected: n,
            });
        }
        // allocation-free: this sits on the simulation hot path
        let q = &self.quadratic[i];
        let l = &self.linear[i];
        let mut acc = self.offset[i];
        for (j, &xj) in x.iter().enumerate() {
            let mut row = 0.0;
            for (k, &xk) in x.iter().enumerate() {
                row += q[(j, k)] * xk;
            }
            acc += 0.5 * xj * row + l[j] * xj;
        }
        Ok(acc)
    }

    /// dJ_i/dx_i at the profile x: row i of Q_i times x, plus the i-th own
    /// linear coefficient.
    pub fn own_gradient(&self, i: usize, x: &[f64]) -> Result<f64, GameError> {
        let n = self.n_players();
        if i >= n {
            return Err(GameError::PlayerOutOfRange { index: i, n });
        }
        if x.len() != n {
            return Err(GameError::ProfileLength {
                got: x.len(),
                expected: n,
            });
        }
        let mut acc = self.linear[i][i];
        for (j, &xj) in x.iter().enumerate() {
            acc += self.quadratic[i][(i, j)] * xj;
        }
        Ok(acc)
    }

    /// Stacked own-strategy gradients F(x) = M x + l_diag.
    pub fn pseudo_gradient(&self, x: &[f64]) -> Result<DVector<f64>, GameError> {
        (0..self.n_players())
            .map(|i| self.own_gradient(i, x))
            .collect::<Result<Vec<_>, _>>()
            .map(DVector::from_vec)
    }

    /// Matrix whose row i is row i of Q_i; the linear map behind the
    /// pseudo-gradient.
    pub fn reduced_matrix(&self) -> ReducedMatrix {
        let n = self.n_players();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.quadratic[i][(i, j)];
            }
        }
        ReducedMatrix(m)
    }

    /// Diagonal entries of the pseudo-gradient offset: each player's own
    /// linear coefficient.
    pub fn linear_diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n_players(),
            self.linear.iter().enumerate().map(|(i, l)| l[i]),
        )
    }

    /// Wraps this game as a black-box [`GameSpec`] with interval bounds
    /// encoded as two affine constraints each, and analytic gradient oracles
    /// attached.
    pub fn to_game_spec(
        &self,
        bounds: Option<&[Option<(f64, f64)>]>,
        penalties: &[f64],
    ) -> Result<GameSpec, GameError> {
        let n = self.n_players();
        if let Some(b) = bounds {
            if b.len() != n {
                return Err(GameError::FieldLength {
                    field: "bounds",
                    got: b.len(),
                    expected: n,
                });
            }
        }
        if penalties.len() != n {
            return Err(GameError::FieldLength {
                field: "penalties",
                got: penalties.len(),
                expected: n,
            });
        }
        let mut costs: Vec<CostFn> = Vec::with_capacity(n);
        let mut grads: Vec<CostFn> = Vec::with_capacity(n);
        for i in 0..n {
            let game = self.clone();
            costs.push(Arc::new(move |x: &[f64]| {
                game.cost(i, x).expect("validated quadratic game")
            }));
            let game = self.clone();
            grads.push(Arc::new(move |x: &[f64]| {
                game.own_gradient(i, x).expect("validated quadratic game")
            }));
        }
        let mut constraints: Vec<Vec<ScalarFn>> = Vec::with_capacity(n);
        let mut constraint_grads: Vec<Vec<ScalarFn>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut cs: Vec<ScalarFn> = Vec::new();
            let mut gs: Vec<ScalarFn> = Vec::new();
            if let Some(Some((lo, hi))) = bounds.map(|b| b[i]) {
                cs.push(Arc::new(move |v: f64| v - hi));
                gs.push(Arc::new(|_| 1.0));
                cs.push(Arc::new(move |v: f64| lo - v));
                gs.push(Arc::new(|_| -1.0));
            }
            constraints.push(cs);
            constraint_grads.push(gs);
        }
        GameSpec::new(costs, constraints, penalties.to_vec(), self.demands.clone())?
            .with_gradients(grads, constraint_grads)
    }
}

/// Row-i-of-Q_i matrix of a quadratic game.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMatrix(pub DMatrix<f64>);

impl ReducedMatrix {
    /// Every diagonal magnitude strictly exceeds the sum of off-diagonal
    /// magnitudes in its row.
    pub fn is_strictly_diagonally_dominant(&self) -> bool {
        let n = self.0.nrows();
        (0..n).all(|i| {
            let off: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| self.0[(i, j)].abs())
                .sum();
            self.0[(i, i)].abs() > off
        })
    }

    /// Smallest eigenvalue of the symmetric part (M + M')/2; the largest
    /// valid strong-monotonicity constant of the pseudo-gradient.
    pub fn symmetric_part_min_eigenvalue(&self) -> f64 {
        let sym = (&self.0 + self.0.transpose()) * 0.5;
        sym.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-player constants of the four-company Cournot market: production cost
/// x_i^2 + a_i x_i + beta_i, inverse demand p0 - c * total supply.
pub struct CournotMarket {
    pub cost_linear: [f64; 4],
    pub cost_offset: [f64; 4],
    pub price_intercept: f64,
    pub price_slope: f64,
    pub bounds: [(f64, f64); 4],
    pub demand_total: f64,
}

impl Default for CournotMarket {
    fn default() -> Self {
        Self {
            cost_linear: [2.0, 4.0, 6.0, 8.0],
            cost_offset: [7.5, 9.0, 12.0, 15.0],
            price_intercept: 5.0,
            price_slope: 0.04,
            bounds: [(1.0, 7.0), (2.0, 6.0), (2.0, 5.0), (0.0, 4.0)],
            demand_total: 16.0,
        }
    }
}

impl CournotMarket {
    /// Expands company i's cost
    /// `x_i^2 + a_i x_i + beta_i - (p0 - c * sum(x)) * x_i`
    /// into the general quadratic form.
    pub fn quadratic_game(&self, demands: Vec<f64>) -> Result<QuadraticGame, GameError> {
        let n = 4;
        let c = self.price_slope;
        let mut quadratic = Vec::with_capacity(n);
        let mut linear = Vec::with_capacity(n);
        for i in 0..n {
            let mut q = DMatrix::zeros(n, n);
            q[(i, i)] = 2.0 * (1.0 + c);
            for j in 0..n {
                if j != i {
                    q[(i, j)] = c;
                    q[(j, i)] = c;
                }
            }
            quadratic.push(q);
            let mut l = DVector::zeros(n);
            l[i] = self.cost_linear[i] - self.price_intercept;
            linear.push(l);
        }
        QuadraticGame::new(quadratic, linear, self.cost_offset.to_vec(), demands)
    }
}

/// The four-company Cournot game with equal demand split and the default
/// production bounds, as a black-box spec with penalty coefficient `penalty`
/// for every company.
pub fn cournot4_game_spec(penalty: f64) -> GameSpec {
    let market = CournotMarket::default();
    let qg = market
        .quadratic_game(vec![4.0; 4])
        .expect("cournot constants are valid");
    qg.to_game_spec(Some(&market.bounds.map(Some)), &[penalty; 4])
        .expect("cournot constants are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn cournot_quadratic() -> QuadraticGame {
        CournotMarket::default()
            .quadratic_game(vec![4.0; 4])
            .unwrap()
    }

    /// Direct evaluation of the Cournot cost expression, independent of the
    /// quadratic expansion.
    fn cournot_cost_direct(i: usize, x: &[f64]) -> f64 {
        let m = CournotMarket::default();
        let total: f64 = x.iter().sum();
        x[i] * x[i] + m.cost_linear[i] * x[i] + m.cost_offset[i]
            - (m.price_intercept - m.price_slope * total) * x[i]
    }

    #[test]
    fn cournot_cost_at_uniform_profile() {
        let spec = cournot4_game_spec(10.0);
        let x = [4.0, 4.0, 4.0, 4.0];
        assert_relative_eq!(spec.cost(0, &x).unwrap(), 14.06, epsilon = 1e-12);
    }

    #[test]
    fn constant_game_cost() {
        let n = 3;
        let qg = QuadraticGame::new(
            (0..n)
                .map(|i| {
                    let mut q = DMatrix::zeros(n, n);
                    q[(i, i)] = 1e-9; // curvature must be positive
                    q
                })
                .collect(),
            vec![DVector::zeros(n); n],
            vec![3.0; n],
            vec![0.0; n],
        )
        .unwrap();
        let x = [11.0, -2.0, 0.5];
        let got = qg.cost(1, &x).unwrap();
        assert_relative_eq!(got, 3.0, epsilon = 1e-6);
    }

    #[test]
    fn quadratic_cost_matches_term_by_term_summation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 3;
        let mut quadratic = Vec::new();
        let mut linear = Vec::new();
        for i in 0..n {
            let mut q = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            q = (&q + q.transpose()) * 0.5;
            q[(i, i)] = rng.gen_range(0.5..2.0);
            quadratic.push(q);
            linear.push(DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)));
        }
        let offset = vec![0.3, -1.0, 2.0];
        let qg = QuadraticGame::new(
            quadratic.clone(),
            linear.clone(),
            offset.clone(),
            vec![1.0; n],
        )
        .unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let i = 1;
            let mut direct = offset[i];
            for j in 0..n {
                direct += linear[i][j] * x[j];
                for k in 0..n {
                    direct += 0.5 * quadratic[i][(j, k)] * x[j] * x[k];
                }
            }
            assert_relative_eq!(qg.cost(i, &x).unwrap(), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn auxiliary_cost_adds_scaled_violation() {
        let spec = cournot4_game_spec(10.0);
        let x = [8.0, 4.0, 4.0, 4.0];
        let base = spec.cost(0, &x).unwrap();
        // upper bound 7 violated by 1
        assert_relative_eq!(
            spec.auxiliary_cost(0, &x).unwrap(),
            base + 10.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(base, cournot_cost_direct(0, &x), epsilon = 1e-12);
    }

    #[test]
    fn auxiliary_cost_equals_cost_when_feasible() {
        let spec = cournot4_game_spec(10.0);
        let x = [4.0, 4.0, 4.0, 2.0];
        assert_eq!(
            spec.auxiliary_cost(1, &x).unwrap(),
            spec.cost(1, &x).unwrap()
        );
    }

    #[test]
    fn auxiliary_cost_without_constraints_is_cost() {
        let qg = cournot_quadratic();
        let spec = qg.to_game_spec(None, &[10.0; 4]).unwrap();
        let x = [9.0, -3.0, 2.0, 11.0];
        assert_eq!(
            spec.auxiliary_cost(2, &x).unwrap(),
            spec.cost(2, &x).unwrap()
        );
        assert_eq!(spec.constraint_count(2).unwrap(), 0);
    }

    #[test]
    fn penalty_gradient_with_violated_bound() {
        let spec = cournot4_game_spec(10.0);
        let x = [8.0, 4.0, 4.0, 4.0];
        assert_relative_eq!(
            spec.penalty_gradient(0, &x).unwrap(),
            24.12,
            epsilon = 1e-12
        );
    }

    #[test]
    fn penalty_gradient_feasible_equals_cost_gradient() {
        let qg = cournot_quadratic();
        let market = CournotMarket::default();
        let spec = qg
            .to_game_spec(Some(&market.bounds.map(Some)), &[10.0; 4])
            .unwrap();
        let x = [4.0, 4.0, 4.0, 2.0];
        assert_relative_eq!(
            spec.penalty_gradient(0, &x).unwrap(),
            qg.own_gradient(0, &x).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn scalar_penalty_gradient_hand_value() {
        // J = x0^2 (player 0 of 2), g = x0 - 1, p = 5, at x0 = 2: 2*2 + 5*1 = 9.
        let costs: Vec<CostFn> = vec![
            Arc::new(|x: &[f64]| x[0] * x[0]),
            Arc::new(|x: &[f64]| x[1] * x[1]),
        ];
        let constraints: Vec<Vec<ScalarFn>> = vec![vec![Arc::new(|v: f64| v - 1.0)], vec![]];
        let grads: Vec<CostFn> = vec![
            Arc::new(|x: &[f64]| 2.0 * x[0]),
            Arc::new(|x: &[f64]| 2.0 * x[1]),
        ];
        let cgrads: Vec<Vec<ScalarFn>> = vec![vec![Arc::new(|_| 1.0)], vec![]];
        let spec = GameSpec::new(costs, constraints, vec![5.0, 5.0], vec![0.0, 0.0])
            .unwrap()
            .with_gradients(grads, cgrads)
            .unwrap();
        let x = [2.0, 0.0];
        assert_relative_eq!(spec.penalty_gradient(0, &x).unwrap(), 9.0, epsilon = 1e-12);
        // finite-difference cross-check away from the kink
        let h = 1e-6;
        let mut xp = x;
        let mut xm = x;
        xp[0] += h;
        xm[0] -= h;
        let fd = (spec.auxiliary_cost(0, &xp).unwrap() - spec.auxiliary_cost(0, &xm).unwrap())
            / (2.0 * h);
        assert_relative_eq!(spec.penalty_gradient(0, &x).unwrap(), fd, epsilon = 1e-6);
    }

    #[test]
    fn missing_gradient_is_a_capability_error() {
        let costs: Vec<CostFn> = vec![Arc::new(|x: &[f64]| x[0]), Arc::new(|x: &[f64]| x[1])];
        let spec =
            GameSpec::new(costs, vec![vec![], vec![]], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            spec.penalty_gradient(0, &[0.0, 0.0]),
            Err(GameError::MissingGradient { player: 0 })
        ));
    }

    #[test]
    fn evaluation_errors_carry_player_and_point() {
        let costs: Vec<CostFn> = vec![Arc::new(|x: &[f64]| 1.0 / x[0]), Arc::new(|x: &[f64]| x[1])];
        let spec =
            GameSpec::new(costs, vec![vec![], vec![]], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let err = spec.cost(0, &[0.0, 1.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("player 0"), "{msg}");
        assert!(msg.contains("[0, 1]"), "{msg}");
        assert!(matches!(
            spec.cost(5, &[0.0, 1.0]),
            Err(GameError::PlayerOutOfRange { index: 5, n: 2 })
        ));
        assert!(matches!(
            spec.cost(1, &[0.0]),
            Err(GameError::ProfileLength {
                got: 1,
                expected: 2
            })
        ));
    }

    #[test]
    fn cournot_expansion_constants() {
        let qg = cournot_quadratic();
        let m = qg.reduced_matrix();
        for i in 0..4 {
            assert_relative_eq!(m.0[(i, i)], 2.08, epsilon = 1e-15);
            for j in 0..4 {
                if j != i {
                    assert_relative_eq!(m.0[(i, j)], 0.04, epsilon = 1e-15);
                }
            }
            assert_relative_eq!(
                qg.linear_term(i)[i],
                [2.0, 4.0, 6.0, 8.0][i] - 5.0,
                epsilon = 1e-15
            );
            assert_relative_eq!(
                qg.offset_term(i),
                [7.5, 9.0, 12.0, 15.0][i],
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn cournot_expansion_matches_direct_expression_at_random_points() {
        let qg = cournot_quadratic();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect();
            for i in 0..4 {
                assert_relative_eq!(
                    qg.cost(i, &x).unwrap(),
                    cournot_cost_direct(i, &x),
                    epsilon = 1e-10,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn diagonal_game_cost_is_half_square() {
        let n = 2;
        let qg = QuadraticGame::new(
            vec![DMatrix::identity(n, n); n],
            vec![DVector::zeros(n); n],
            vec![0.0; n],
            vec![1.0; n],
        )
        .unwrap();
        let x = [3.0, -2.0];
        // J_i = 1/2 * x' I x = 1/2 (x_0^2 + x_1^2) for both players here
        assert_relative_eq!(qg.cost(0, &x).unwrap(), 6.5, epsilon = 1e-15);
        assert_relative_eq!(qg.own_gradient(0, &x).unwrap(), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn pseudo_gradient_is_reduced_matrix_action() {
        let qg = cournot_quadratic();
        let m = qg.reduced_matrix();
        let bdiag = qg.linear_diagonal();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let f = qg.pseudo_gradient(&x).unwrap();
            let xv = DVector::from_column_slice(&x);
            let expect = &m.0 * xv + &bdiag;
            assert_relative_eq!((f - expect).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn penalty_gradient_matches_finite_differences_away_from_kinks() {
        let market = CournotMarket::default();
        let qg = cournot_quadratic();
        let spec = qg
            .to_game_spec(Some(&market.bounds.map(Some)), &[10.0; 4])
            .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let h = 1e-6;
        let mut tested = 0;
        while tested < 100 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..9.0)).collect();
            let i = rng.gen_range(0..4);
            let near_kink = spec
                .constraint_values(i, x[i])
                .unwrap()
                .iter()
                .any(|g| g.abs() < 1e-3);
            if near_kink {
                continue;
            }
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (spec.auxiliary_cost(i, &xp).unwrap() - spec.auxiliary_cost(i, &xm).unwrap())
                / (2.0 * h);
            let grad = spec.penalty_gradient(i, &x).unwrap();
            let scale = grad.abs().max(1.0);
            assert!(
                (grad - fd).abs() / scale <= 1e-6,
                "grad {grad} vs fd {fd} at {x:?} player {i}"
            );
            tested += 1;
        }
    }

    #[test]
    fn auxiliary_cost_dominates_cost() {
        let spec = cournot4_game_spec(10.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..12.0)).collect();
            for i in 0..4 {
                let j = spec.cost(i, &x).unwrap();
                let aux = spec.auxiliary_cost(i, &x).unwrap();
                assert!(aux >= j - 1e-15);
                let feasible = spec
                    .constraint_values(i, x[i])
                    .unwrap()
                    .iter()
                    .all(|&g| g <= 0.0);
                if feasible {
                    assert_eq!(aux, j);
                } else {
                    assert!(aux > j);
                }
            }
        }
    }

    #[test]
    fn rejects_invalid_construction() {
        assert!(matches!(
            GameSpec::new(
                vec![Arc::new(|x: &[f64]| x[0]) as CostFn],
                vec![vec![]],
                vec![1.0],
                vec![0.0]
            ),
            Err(GameError::TooFewPlayers(1))
        ));
        let costs: Vec<CostFn> = vec![Arc::new(|x: &[f64]| x[0]), Arc::new(|x: &[f64]| x[1])];
        assert!(matches!(
            GameSpec::new(costs, vec![vec![], vec![]], vec![1.0, 0.0], vec![0.0, 0.0]),
            Err(GameError::NonPositivePenalty { player: 1, .. })
        ));
        let mut q = DMatrix::identity(2, 2);
        q[(0, 1)] = 0.3; // asymmetric
        assert!(QuadraticGame::new(
            vec![q, DMatrix::identity(2, 2)],
            vec![DVector::zeros(2); 2],
            vec![0.0; 2],
            vec![0.0; 2],
        )
        .is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arbitrary_cournot_point() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-10.0..15.0f64, 4)
        }

        proptest! {
            #[test]
            fn auxiliary_cost_dominates_cost_everywhere(x in arbitrary_cournot_point(), i in 0usize..4) {
                let spec = cournot4_game_spec(10.0);
                let cost = spec.cost(i, &x).unwrap();
                let aux = spec.auxiliary_cost(i, &x).unwrap();
                prop_assert!(aux >= cost);
                let feasible = spec
                    .constraint_values(i, x[i])
                    .unwrap()
                    .iter()
                    .all(|&g| g <= 0.0);
                if feasible {
                    prop_assert_eq!(aux, cost);
                } else {
                    prop_assert!(aux > cost);
                }
            }

            #[test]
            fn penalty_gradient_differentiates_auxiliary_cost(
                x in arbitrary_cournot_point(),
                i in 0usize..4,
            ) {
                let spec = cournot4_game_spec(10.0);
                // skip points near a constraint kink, where the one-sided
                // derivative convention makes finite differences meaningless
                let near_kink = spec
                    .constraint_values(i, x[i])
                    .unwrap()
                    .iter()
                    .any(|g| g.abs() < 1e-3);
                prop_assume!(!near_kink);
                let h = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (spec.auxiliary_cost(i, &xp).unwrap()
                    - spec.auxiliary_cost(i, &xm).unwrap())
                    / (2.0 * h);
                let grad = spec.penalty_gradient(i, &x).unwrap();
                prop_assert!((grad - fd).abs() <= 1e-6 * grad.abs().max(1.0));
            }

            #[test]
            fn pseudo_gradient_is_affine_in_the_profile(x in arbitrary_cournot_point()) {
                let qg = cournot_quadratic();
                let m = qg.reduced_matrix();
                let f = qg.pseudo_gradient(&x).unwrap();
                let expect = &m.0 * DVector::from_column_slice(&x) + qg.linear_diagonal();
                prop_assert!((f - expect).norm() < 1e-10);
            }
        }
    }
}
