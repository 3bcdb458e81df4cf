//! Problem and policy types: the bandit instance (features + rewards), the
//! softmax map, exact expected reward and its gradient, and the two
//! covariance forms used by the ordering arguments.

use std::fmt;

use crate::linalg::{dot, LinalgError, Matrix, Vector, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, PartialEq)]
pub enum BanditError {
    /// Feature dimension is zero or exceeds the number of actions.
    BadShape {
        actions: usize,
        dim: usize,
    },
    /// Feature matrix does not have full column rank; 0-based column index.
    RankDeficient {
        column: usize,
    },
    /// Fewer than two actions.
    TooFewActions {
        actions: usize,
    },
    /// Parameter or probability length does not match the instance.
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    /// Probability vector is not a strictly positive distribution.
    NotADistribution,
    Linalg(LinalgError),
}

impl fmt::Display for BanditError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BanditError::BadShape { actions, dim } => {
                write!(
                    f,
                    "feature dimension {dim} not usable with {actions} actions"
                )
            }
            BanditError::RankDeficient { column } => {
                write!(f, "rank-deficient feature matrix, column {}", column + 1)
            }
            BanditError::TooFewActions { actions } => {
                write!(f, "need at least two actions, got {actions}")
            }
            BanditError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            BanditError::NotADistribution => {
                write!(f, "probabilities must be strictly positive and sum to 1")
            }
            BanditError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for BanditError {}

impl From<LinalgError> for BanditError {
    fn from(e: LinalgError) -> Self {
        BanditError::Linalg(e)
    }
}

/// A finite-arm bandit with linear action features.
///
/// `features` is `K x d` (one row per action) with full column rank, and
/// `rewards` has length `K`. The function-approximation regime of interest
/// has `d < K` and a non-constant reward vector; instance files enforce both
/// (see [`crate::instances`]). The constructor itself also accepts the
/// degenerate cases (tabular `d == K` features, constant rewards) since
/// every operation remains well defined on them.
#[derive(Debug, Clone)]
pub struct BanditInstance {
    features: Matrix,
    rewards: Vector,
    best_action: usize,
    unique_optimum: bool,
}

impl BanditInstance {
    pub fn new(features: Matrix, rewards: Vector) -> Result<Self, BanditError> {
        let actions = features.rows();
        let dim = features.cols();
        if actions < 2 {
            return Err(BanditError::TooFewActions { actions });
        }
        if dim == 0 || dim > actions {
            return Err(BanditError::BadShape { actions, dim });
        }
        if rewards.len() != actions {
            return Err(BanditError::DimensionMismatch {
                expected: actions,
                found: rewards.len(),
            });
        }
        let (rank, dep) = features.column_rank_detail(DEFAULT_RANK_TOL);
        if rank < dim {
            return Err(BanditError::RankDeficient {
                column: dep.unwrap_or(dim - 1),
            });
        }
        let best_action = argmax(rewards.as_slice());
        let best = rewards[best_action];
        let unique_optimum = rewards.iter().filter(|&&r| r == best).count() == 1;
        Ok(BanditInstance {
            features,
            rewards,
            best_action,
            unique_optimum,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn rewards(&self) -> &Vector {
        &self.rewards
    }

    pub fn feature_row(&self, action: usize) -> &[f64] {
        self.features.row(action)
    }

    /// First action attaining the maximal reward (0-based).
    pub fn best_action(&self) -> usize {
        self.best_action
    }

    pub fn best_reward(&self) -> f64 {
        self.rewards[self.best_action]
    }

    /// Whether the maximal reward is attained by exactly one action.
    pub fn has_unique_optimum(&self) -> bool {
        self.unique_optimum
    }

    pub fn reward_inf_norm(&self) -> f64 {
        self.rewards.max_abs()
    }

    /// The log-linear policy `softmax(X theta)`.
    pub fn policy(&self, params: &Params) -> Result<Policy, BanditError> {
        self.check_params(params)?;
        let mut scores = vec![0.0; self.num_actions()];
        self.features
            .matvec_into(params.theta.as_slice(), &mut scores);
        softmax_in_place(&mut scores);
        Ok(Policy {
            probs: Vector::from_vec_unchecked(scores),
        })
    }

    /// Exact expected reward `pi^T r`.
    pub fn expected_reward(&self, policy: &Policy) -> f64 {
        assert_eq!(
            policy.num_actions(),
            self.num_actions(),
            "policy/instance mismatch"
        );
        dot(policy.probs.as_slice(), self.rewards.as_slice())
    }

    /// Gradient of the expected reward in parameter space,
    /// `X^T (diag(pi) - pi pi^T) r`.
    pub fn pg_gradient(&self, params: &Params) -> Result<Vector, BanditError> {
        self.check_params(params)?;
        let mut scores = vec![0.0; self.num_actions()];
        self.features
            .matvec_into(params.theta.as_slice(), &mut scores);
        softmax_in_place(&mut scores);
        let value = dot(&scores, self.rewards.as_slice());
        let mut grad = vec![0.0; self.feature_dim()];
        self.gradient_into(&scores, value, &mut grad);
        Ok(Vector::from_vec_unchecked(grad))
    }

    /// Smoothness constant of the expected-reward map,
    /// `(9/2) * ||r||_inf * lambda_max(X^T X)`.
    pub fn smoothness_beta(&self) -> f64 {
        let lam = self
            .features
            .gram()
            .lambda_max()
            .expect("gram matrix is square");
        4.5 * self.reward_inf_norm() * lam
    }

    /// Step-size bound `4 / (9 * ||r||_inf * lambda_max(X^T X))`; any
    /// constant step size below it makes gradient ascent monotone.
    pub fn safe_step_size(&self) -> f64 {
        let lam = self
            .features
            .gram()
            .lambda_max()
            .expect("gram matrix is square");
        4.0 / (9.0 * self.reward_inf_norm() * lam)
    }

    fn check_params(&self, params: &Params) -> Result<(), BanditError> {
        if params.theta.len() != self.feature_dim() {
            return Err(BanditError::DimensionMismatch {
                expected: self.feature_dim(),
                found: params.theta.len(),
            });
        }
        Ok(())
    }

    /// Scores `X theta` without allocating.
    pub(crate) fn scores_into(&self, theta: &[f64], out: &mut [f64]) {
        self.features.matvec_into(theta, out);
    }

    /// Value and sub-optimality gap of a probability vector. The gap is
    /// accumulated as `sum_a pi(a) (r(a*) - r(a))`, which stays accurate
    /// long after `r(a*) - pi^T r` has lost every significant digit to
    /// cancellation.
    pub(crate) fn value_and_gap(&self, probs: &[f64]) -> (f64, f64) {
        let r = self.rewards.as_slice();
        let best = self.best_reward();
        let mut value = 0.0;
        let mut gap = 0.0;
        for (p, ri) in probs.iter().zip(r) {
            value += p * ri;
            gap += p * (best - ri);
        }
        (value, gap)
    }

    /// Gradient accumulated from a probability vector and its value.
    pub(crate) fn gradient_into(&self, probs: &[f64], value: f64, out: &mut [f64]) {
        out.fill(0.0);
        for (a, p) in probs.iter().enumerate() {
            let coef = p * (self.rewards[a] - value);
            for (o, x) in out.iter_mut().zip(self.feature_row(a)) {
                *o += coef * x;
            }
        }
    }
}

/// Policy parameter `theta` (length `d`, all entries finite).
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    theta: Vector,
}

impl Params {
    pub fn new(theta: Vector) -> Self {
        Params { theta }
    }

    pub fn theta(&self) -> &Vector {
        &self.theta
    }
}

/// A strictly positive probability vector over the actions.
#[derive(Debug, Clone)]
pub struct Policy {
    probs: Vector,
}

impl Policy {
    /// Validates strict positivity and normalization (sum within 1e-12 of 1).
    pub fn new(probs: Vector) -> Result<Self, BanditError> {
        if probs.is_empty() || probs.iter().any(|&p| p <= 0.0) {
            return Err(BanditError::NotADistribution);
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(BanditError::NotADistribution);
        }
        Ok(Policy { probs })
    }

    pub(crate) fn from_probs_unchecked(probs: Vec<f64>) -> Self {
        Policy {
            probs: Vector::from_vec_unchecked(probs),
        }
    }

    pub fn num_actions(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &Vector {
        &self.probs
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.probs[action]
    }

    /// Most probable action and its probability.
    pub fn top(&self) -> (usize, f64) {
        let a = argmax(self.probs.as_slice());
        (a, self.probs[a])
    }
}

/// Index of the first maximal entry.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax: subtracts the max score before
/// exponentiating, so arbitrarily large spreads cannot overflow. Entries
/// that underflow are clamped to the smallest positive normal so the result
/// stays strictly positive.
pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp().max(f64::MIN_POSITIVE);
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Covariance of `x` and `y` under `pi`: `x^T (diag(pi) - pi pi^T) y`.
pub fn covariance(policy: &Policy, x: &Vector, y: &Vector) -> f64 {
    let k = policy.num_actions();
    assert_eq!(x.len(), k, "covariance: x length mismatch");
    assert_eq!(y.len(), k, "covariance: y length mismatch");
    let p = policy.probs.as_slice();
    let mut exy = 0.0;
    let mut ex = 0.0;
    let mut ey = 0.0;
    for i in 0..k {
        exy += p[i] * x[i] * y[i];
        ex += p[i] * x[i];
        ey += p[i] * y[i];
    }
    exy - ex * ey
}

/// The same covariance as a pairwise double sum,
/// `sum_i pi(i) sum_{j>i} pi(j) (x(i)-x(j)) (y(i)-y(j))`.
///
/// Algebraically identical to [`covariance`]; kept as an independent route
/// because the sign structure of the summands carries the ordering
/// argument.
pub fn covariance_pairwise(policy: &Policy, x: &Vector, y: &Vector) -> f64 {
    let k = policy.num_actions();
    assert_eq!(x.len(), k, "covariance: x length mismatch");
    assert_eq!(y.len(), k, "covariance: y length mismatch");
    let p = policy.probs.as_slice();
    let mut total = 0.0;
    for i in 0..k {
        let mut inner = 0.0;
        for j in (i + 1)..k {
            inner += p[j] * (x[i] - x[j]) * (y[i] - y[j]);
        }
        total += p[i] * inner;
    }
    total
}
