//! Iterative runners for the two updates, with trajectory recording,
//! stopping rules, and limit classification.
//!
//! The gradient runner ascends `theta <- theta + eta * X^T (diag(pi) -
//! pi pi^T) r`. The natural-gradient runner adds `eta * (X^T X)^{-1} X^T r`
//! every step; that direction does not depend on `theta`, so it is computed
//! once up front.

use std::fmt;
use std::str::FromStr;

use crate::bandit::{argmax, BanditInstance, Params, Policy};
use crate::linalg::Vector;

/// A policy counts as converged to an action once that action's
/// probability exceeds `1 - ONE_HOT_TOL`.
pub const ONE_HOT_TOL: f64 = 1e-3;
/// Parameter magnitudes beyond this report a numerical failure instead of
/// drifting into float overflow (successful runs diverge in norm by
/// design, so the cap is a classification, not a rescue).
pub const THETA_CAP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Pg,
    Npg,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Pg => write!(f, "pg"),
            Algorithm::Npg => write!(f, "npg"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pg" => Ok(Algorithm::Pg),
            "npg" => Ok(Algorithm::Npg),
            other => Err(format!("unknown algorithm '{other}' (expected pg or npg)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimError {
    InvalidConfig(String),
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    /// `enforce_safe_eta` was set and the step size exceeds the monotone
    /// ascent bound.
    UnsafeEta {
        eta: f64,
        bound: f64,
    },
    /// A single step produced a non-finite parameter.
    NumericalFailure,
}

impl fmt::Display for OptimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimError::InvalidConfig(msg) => write!(f, "invalid run config: {msg}"),
            OptimError::DimensionMismatch { expected, found } => {
                write!(
                    f,
                    "theta1 length {found} does not match feature dimension {expected}"
                )
            }
            OptimError::UnsafeEta { eta, bound } => {
                write!(f, "eta {eta} exceeds the monotone-ascent bound {bound}")
            }
            OptimError::NumericalFailure => write!(f, "step produced non-finite parameters"),
        }
    }
}

impl std::error::Error for OptimError {}

/// Runner configuration. `record_stride` keeps every n-th iterate (the
/// final iterate is always kept).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    pub theta1: Vector,
    pub max_iters: u64,
    pub gap_tol: f64,
    pub record_stride: u64,
    pub enforce_safe_eta: bool,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, eta: f64, theta1: Vector, max_iters: u64) -> Self {
        RunConfig {
            algorithm,
            eta,
            theta1,
            max_iters,
            gap_tol: 0.0,
            record_stride: default_stride(max_iters),
            enforce_safe_eta: false,
        }
    }

    fn validate(&self) -> Result<(), OptimError> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(OptimError::InvalidConfig(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.max_iters == 0 {
            return Err(OptimError::InvalidConfig(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.gap_tol.is_finite() && self.gap_tol >= 0.0) {
            return Err(OptimError::InvalidConfig(format!(
                "gap_tol must be non-negative, got {}",
                self.gap_tol
            )));
        }
        if self.record_stride == 0 {
            return Err(OptimError::InvalidConfig(
                "record_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Stride that keeps at most ~10^4 samples: 1 up to 10^4 iterations, then
/// `ceil(max_iters / 10^4)`.
pub fn default_stride(max_iters: u64) -> u64 {
    if max_iters <= 10_000 {
        1
    } else {
        max_iters.div_ceil(10_000)
    }
}

/// One recorded iterate. `t` is 1-based: `t = 1` is the initial parameter
/// and each step increments it.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: u64,
    pub theta: Vector,
    pub value: f64,
    pub gap: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    ReachedGapTol,
    MaxIters,
    NumericalFailure,
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Terminal::ReachedGapTol => write!(f, "reached-gap-tol"),
            Terminal::MaxIters => write!(f, "max-iters"),
            Terminal::NumericalFailure => write!(f, "numerical-failure"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub terminal: Terminal,
    pub final_policy: Policy,
    /// Set iff the final policy puts more than `1 - ONE_HOT_TOL` mass on a
    /// single action (0-based).
    pub limit_action: Option<usize>,
}

impl Trajectory {
    pub fn final_sample(&self) -> &Sample {
        self.samples
            .last()
            .expect("a trajectory records at least its initial iterate")
    }

    /// When no single action dominates but a group of equally rewarded
    /// actions jointly holds `1 - ONE_HOT_TOL` of the mass, report that
    /// group (0-based, ascending). Runs on tied-reward instances settle on
    /// such generalized one-hot policies without a unique limit action.
    pub fn tied_limit_support(&self, inst: &BanditInstance) -> Option<Vec<usize>> {
        if self.limit_action.is_some() {
            return None;
        }
        let probs = self.final_policy.probs();
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).expect("probs are finite"));
        let mut mass = 0.0;
        let mut group = Vec::new();
        for &a in &order {
            group.push(a);
            mass += probs[a];
            if mass > 1.0 - ONE_HOT_TOL {
                break;
            }
        }
        if mass <= 1.0 - ONE_HOT_TOL || group.len() < 2 {
            return None;
        }
        let r0 = inst.rewards()[group[0]];
        if group.iter().any(|&a| inst.rewards()[a] != r0) {
            return None;
        }
        group.sort_unstable();
        Some(group)
    }
}

/// The (parameter-independent) natural-gradient ascent direction.
#[derive(Debug, Clone)]
pub struct NpgDirection {
    /// `(X^T X)^{-1} X^T r`, the regression coefficients.
    pub w_star: Vector,
    /// `X w_star`, the projected reward; every step adds `eta * r_hat` to
    /// the scores.
    pub r_hat: Vector,
    /// `r_hat(a*) - max_{a != a*} r_hat(a)` for the (first) best action of
    /// `r`; positive iff the projection keeps that action strictly on top.
    pub delta_hat: f64,
}

pub fn npg_direction(inst: &BanditInstance) -> NpgDirection {
    let fit = inst
        .features()
        .least_squares(inst.rewards())
        .expect("instance guarantees full column rank");
    let star = inst.best_action();
    let rival = (0..inst.num_actions())
        .filter(|&a| a != star)
        .map(|a| fit.projection[a])
        .fold(f64::NEG_INFINITY, f64::max);
    let delta_hat = fit.projection[star] - rival;
    NpgDirection {
        w_star: fit.coeffs,
        r_hat: fit.projection,
        delta_hat,
    }
}

/// One gradient ascent step.
pub fn step_pg(inst: &BanditInstance, params: &Params, eta: f64) -> Result<Params, OptimError> {
    assert!(eta > 0.0, "step size must be positive");
    let grad = inst
        .pg_gradient(params)
        .map_err(|_| OptimError::DimensionMismatch {
            expected: inst.feature_dim(),
            found: params.theta().len(),
        })?;
    let theta: Vec<f64> = params
        .theta()
        .iter()
        .zip(grad.iter())
        .map(|(t, g)| t + eta * g)
        .collect();
    if theta.iter().any(|x| !x.is_finite()) {
        return Err(OptimError::NumericalFailure);
    }
    Ok(Params::new(Vector::from_vec_unchecked(theta)))
}

/// One natural-gradient step `theta + eta * w_star`.
pub fn step_npg(
    inst: &BanditInstance,
    params: &Params,
    dir: &NpgDirection,
    eta: f64,
) -> Result<Params, OptimError> {
    assert!(eta >= 0.0, "step size must be non-negative");
    if params.theta().len() != inst.feature_dim() {
        return Err(OptimError::DimensionMismatch {
            expected: inst.feature_dim(),
            found: params.theta().len(),
        });
    }
    let theta: Vec<f64> = params
        .theta()
        .iter()
        .zip(dir.w_star.iter())
        .map(|(t, w)| t + eta * w)
        .collect();
    if theta.iter().any(|x| !x.is_finite()) {
        return Err(OptimError::NumericalFailure);
    }
    Ok(Params::new(Vector::from_vec_unchecked(theta)))
}

/// Run the configured algorithm, recording every `record_stride`-th
/// iterate plus the final one. `t = 1` is the initial parameter; the run
/// performs up to `max_iters` steps.
pub fn run(inst: &BanditInstance, cfg: &RunConfig) -> Result<Trajectory, OptimError> {
    cfg.validate()?;
    let d = inst.feature_dim();
    let k = inst.num_actions();
    if cfg.theta1.len() != d {
        return Err(OptimError::DimensionMismatch {
            expected: d,
            found: cfg.theta1.len(),
        });
    }
    if cfg.enforce_safe_eta {
        let bound = inst.safe_step_size();
        if cfg.eta >= bound {
            return Err(OptimError::UnsafeEta {
                eta: cfg.eta,
                bound,
            });
        }
    }
    let npg = match cfg.algorithm {
        Algorithm::Npg => Some(npg_direction(inst)),
        Algorithm::Pg => None,
    };

    let mut theta: Vec<f64> = cfg.theta1.as_slice().to_vec();
    let mut prev_theta = theta.clone();
    let mut probs = vec![0.0; k];
    let mut grad = vec![0.0; d];

    // evaluate the current iterate into (probs, value, gap); the gradient
    // is refreshed every step for PG and on demand for NPG samples
    let evaluate = |inst: &BanditInstance, theta: &[f64], probs: &mut Vec<f64>| -> (f64, f64) {
        inst.scores_into(theta, probs);
        crate::bandit::softmax_in_place(probs);
        inst.value_and_gap(probs)
    };

    let (mut value, mut gap) = evaluate(inst, &theta, &mut probs);
    if npg.is_none() {
        inst.gradient_into(&probs, value, &mut grad);
    }

    let mut samples: Vec<Sample> = Vec::new();
    let mut t: u64 = 1;
    let terminal;

    loop {
        if (t - 1).is_multiple_of(cfg.record_stride) {
            let grad_norm = match &npg {
                None => crate::linalg::dot(&grad, &grad).sqrt(),
                Some(_) => {
                    inst.gradient_into(&probs, value, &mut grad);
                    crate::linalg::dot(&grad, &grad).sqrt()
                }
            };
            samples.push(Sample {
                t,
                theta: Vector::from_vec_unchecked(theta.clone()),
                value,
                gap,
                grad_norm,
            });
        }
        if gap < cfg.gap_tol {
            terminal = Terminal::ReachedGapTol;
            break;
        }
        if t > cfg.max_iters {
            terminal = Terminal::MaxIters;
            break;
        }
        prev_theta.copy_from_slice(&theta);
        match &npg {
            None => {
                for (th, g) in theta.iter_mut().zip(&grad) {
                    *th += cfg.eta * g;
                }
            }
            Some(dir) => {
                for (th, w) in theta.iter_mut().zip(dir.w_star.iter()) {
                    *th += cfg.eta * w;
                }
            }
        }
        t += 1;
        if theta.iter().any(|x| !x.is_finite() || x.abs() > THETA_CAP) {
            // classify and report the last finite iterate
            theta.copy_from_slice(&prev_theta);
            t -= 1;
            let (v, g) = evaluate(inst, &theta, &mut probs);
            value = v;
            gap = g;
            terminal = Terminal::NumericalFailure;
            break;
        }
        let (v, g) = evaluate(inst, &theta, &mut probs);
        value = v;
        gap = g;
        if npg.is_none() {
            inst.gradient_into(&probs, value, &mut grad);
        }
    }

    if samples.last().map(|s| s.t) != Some(t) {
        inst.gradient_into(&probs, value, &mut grad);
        let grad_norm = crate::linalg::dot(&grad, &grad).sqrt();
        samples.push(Sample {
            t,
            theta: Vector::from_vec_unchecked(theta.clone()),
            value,
            gap,
            grad_norm,
        });
    }

    let final_policy = Policy::from_probs_unchecked(probs);
    let (top, top_prob) = {
        let a = argmax(final_policy.probs().as_slice());
        (a, final_policy.prob(a))
    };
    let limit_action = (top_prob > 1.0 - ONE_HOT_TOL).then_some(top);
    Ok(Trajectory {
        samples,
        terminal,
        final_policy,
        limit_action,
    })
}
