//! Checkers for the representation conditions that decide global
//! convergence of the two runners:
//!
//! - **non-domination**: every feature row has a larger inner product with
//!   itself than with any other row (`x_i^T x_i > x_i^T x_j`);
//! - **reward-order preservation**: some `w` makes `Xw` rank all actions
//!   exactly as `r` does, decided by a small max-margin linear program;
//! - **optimal-action preservation**: the least-squares projection of `r`
//!   onto the feature columns keeps the best action as its unique argmax.
//!
//! Non-domination plus order preservation is sufficient for the gradient
//! runner to reach the optimal action; optimal-action preservation is
//! necessary and sufficient for the natural-gradient runner.

use std::fmt;

use crate::bandit::BanditInstance;
use crate::linalg::Vector;
use crate::simplex::{self, Constraint, Relation, SimplexError};

/// Strictness slack for the Gram-matrix comparison.
pub const NON_DOMINATION_TOL: f64 = 1e-10;
/// An LP margin above this counts as strictly feasible.
pub const LP_MARGIN_TOL: f64 = 1e-9;
/// Tie tolerance when validating score equality on a witness.
pub const TIE_TOL: f64 = 1e-9;
/// Strictness slack for comparing projected rewards.
pub const OPTIMAL_ACTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConditionsError {
    /// The feasibility LP exceeded its pivot cap.
    DegenerateLp,
}

impl fmt::Display for ConditionsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionsError::DegenerateLp => write!(f, "degenerate LP"),
        }
    }
}

impl std::error::Error for ConditionsError {}

/// Outcome of the reward-order feasibility check.
#[derive(Debug, Clone)]
pub struct OrderPreservation {
    pub feasible: bool,
    /// A max-margin witness `w` (box-normalized, `||w||_inf <= 1`) when
    /// feasible.
    pub witness: Option<Vector>,
    /// Optimal LP margin: the smallest score drop across any strict reward
    /// drop, maximized over the unit box.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimalActionStatus {
    /// Projection keeps the optimal action strictly on top.
    Preserved,
    /// The reward argmax is unique but the projection demotes or ties it.
    NotPreserved,
    /// The reward vector itself has a tied optimum; the criterion does not
    /// apply and no claim is made.
    TiedOptimum,
}

/// Outcome of the optimal-action preservation check, carrying the
/// projected reward vector.
#[derive(Debug, Clone)]
pub struct OptimalActionCheck {
    pub status: OptimalActionStatus,
    pub r_hat: Vector,
}

impl OptimalActionCheck {
    /// `Some(true/false)` when the criterion applies, `None` on a tied
    /// optimum.
    pub fn preserved(&self) -> Option<bool> {
        match self.status {
            OptimalActionStatus::Preserved => Some(true),
            OptimalActionStatus::NotPreserved => Some(false),
            OptimalActionStatus::TiedOptimum => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgPrediction {
    /// Non-domination and order preservation both hold; convergence to the
    /// optimal action is guaranteed.
    GuaranteedGlobal,
    /// The sufficient conditions fail; no claim either way.
    Unknown,
}

impl fmt::Display for PgPrediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PgPrediction::GuaranteedGlobal => write!(f, "guaranteed-global"),
            PgPrediction::Unknown => write!(f, "unknown"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpgPrediction {
    Global,
    NotGlobal,
    UnsupportedTiedOptimum,
}

impl fmt::Display for NpgPrediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NpgPrediction::Global => write!(f, "global"),
            NpgPrediction::NotGlobal => write!(f, "not-global"),
            NpgPrediction::UnsupportedTiedOptimum => write!(f, "unsupported-tied-optimum"),
        }
    }
}

/// Combined outcome of all three checkers plus the approximation error.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub non_domination: bool,
    /// First `(i, j)` with `x_i^T x_i <= x_i^T x_j` (0-based), if any.
    pub violating_pair: Option<(usize, usize)>,
    pub order: OrderPreservation,
    pub optimal_action: OptimalActionCheck,
    /// `min_w ||Xw - r||_2`, the least-squares residual.
    pub eps_approx: f64,
    pub pg: PgPrediction,
    pub npg: NpgPrediction,
}

/// Check `x_i^T x_i > x_i^T x_j + tol` for all `j != i` on the row Gram
/// matrix; on failure returns the first violating `(i, j)`.
pub fn check_non_domination(inst: &BanditInstance) -> (bool, Option<(usize, usize)>) {
    let g = inst.features().row_gram();
    let k = inst.num_actions();
    for i in 0..k {
        let own = g.get(i, i);
        for j in 0..k {
            if j != i && own <= g.get(i, j) + NON_DOMINATION_TOL {
                return (false, Some((i, j)));
            }
        }
    }
    (true, None)
}

/// Decide whether some `w` makes `Xw` preserve the order of `r`, by
/// maximizing the worst consecutive margin over the box `||w||_inf <= 1`.
///
/// Actions are sorted by descending reward; each strict drop contributes
/// `(x_i - x_j)^T w >= eps` and each tie contributes an equality. Strict
/// order is transitive, so the consecutive constraints imply every pair.
/// The system is homogeneous in `w`, hence strict feasibility is equivalent
/// to a positive margin on the unit box.
pub fn check_order_preservation(
    inst: &BanditInstance,
) -> Result<OrderPreservation, ConditionsError> {
    let k = inst.num_actions();
    let d = inst.feature_dim();
    let r = inst.rewards();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| r[b].partial_cmp(&r[a]).expect("rewards are finite"));

    let mut constraints = Vec::new();
    let mut any_strict = false;
    for pair in order.windows(2) {
        let (hi, lo) = (pair[0], pair[1]);
        let diff: Vec<f64> = inst
            .feature_row(hi)
            .iter()
            .zip(inst.feature_row(lo))
            .map(|(a, b)| a - b)
            .collect();
        let shift: f64 = diff.iter().sum();
        // variables are u = w + 1 (so u >= 0) followed by the margin.
        let mut coeffs = diff;
        let strict = r[hi] > r[lo];
        coeffs.push(if strict { -1.0 } else { 0.0 });
        constraints.push(Constraint::new(
            coeffs,
            if strict { Relation::Ge } else { Relation::Eq },
            shift,
        ));
        any_strict |= strict;
    }
    if !any_strict {
        // Constant rewards: every pair is a tie and w = 0 preserves them.
        return Ok(OrderPreservation {
            feasible: true,
            witness: Some(Vector::zeros(d)),
            margin: 0.0,
        });
    }
    for k_var in 0..d {
        let mut coeffs = vec![0.0; d + 1];
        coeffs[k_var] = 1.0;
        constraints.push(Constraint::new(coeffs, Relation::Le, 2.0));
    }
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;

    let max_pivots = 10 * (d + k) * (d + k);
    let sol = match simplex::maximize(&objective, &constraints, max_pivots) {
        Ok(sol) => sol,
        Err(SimplexError::IterationLimit) => return Err(ConditionsError::DegenerateLp),
        // u = 1, eps = 0 is always feasible and the margin is bounded by
        // the strict constraints, so the solver cannot report otherwise.
        Err(e) => unreachable!("order LP cannot be {e}"),
    };
    let margin = sol.objective;
    let feasible = margin > LP_MARGIN_TOL;
    let witness = if feasible {
        Some(Vector::from_vec_unchecked(
            sol.x[..d].iter().map(|u| u - 1.0).collect(),
        ))
    } else {
        None
    };
    Ok(OrderPreservation {
        feasible,
        witness,
        margin,
    })
}

/// Definitional all-pairs check that `Xw` ranks actions exactly as `r`
/// does: strict drops stay strict and ties stay ties (within [`TIE_TOL`]).
pub fn order_preserved_by(inst: &BanditInstance, w: &Vector) -> bool {
    let scores = match inst.features().matvec(w) {
        Ok(s) => s,
        Err(_) => return false,
    };
    let r = inst.rewards();
    let k = inst.num_actions();
    for i in 0..k {
        for j in 0..k {
            if r[i] > r[j] && scores[i] - scores[j] <= 0.0 {
                return false;
            }
            if r[i] == r[j] && (scores[i] - scores[j]).abs() > TIE_TOL {
                return false;
            }
        }
    }
    true
}

/// Project `r` onto the feature columns and test whether the best action
/// keeps a strictly largest projected reward.
pub fn check_optimal_action_preservation(inst: &BanditInstance) -> OptimalActionCheck {
    let fit = inst
        .features()
        .least_squares(inst.rewards())
        .expect("instance guarantees full column rank");
    optimal_action_from_projection(inst, fit.projection)
}

fn optimal_action_from_projection(inst: &BanditInstance, r_hat: Vector) -> OptimalActionCheck {
    if !inst.has_unique_optimum() {
        return OptimalActionCheck {
            status: OptimalActionStatus::TiedOptimum,
            r_hat,
        };
    }
    let star = inst.best_action();
    let preserved = (0..inst.num_actions())
        .filter(|&a| a != star)
        .all(|a| r_hat[star] > r_hat[a] + OPTIMAL_ACTION_TOL);
    let status = if preserved {
        OptimalActionStatus::Preserved
    } else {
        OptimalActionStatus::NotPreserved
    };
    OptimalActionCheck { status, r_hat }
}

/// Run all three checkers and combine them into convergence predictions.
///
/// The gradient-runner side is sufficient-only: `Unknown` means the
/// guarantee does not apply, not that the run will fail. The
/// natural-gradient side is an if-and-only-if whenever the reward argmax is
/// unique.
pub fn predict(inst: &BanditInstance) -> Result<ConditionReport, ConditionsError> {
    let (non_domination, violating_pair) = check_non_domination(inst);
    let order = check_order_preservation(inst)?;
    let fit = inst
        .features()
        .least_squares(inst.rewards())
        .expect("instance guarantees full column rank");
    let eps_approx = fit.residual_norm;
    let optimal_action = optimal_action_from_projection(inst, fit.projection);

    let pg = if non_domination && order.feasible {
        PgPrediction::GuaranteedGlobal
    } else {
        PgPrediction::Unknown
    };
    let npg = match optimal_action.status {
        OptimalActionStatus::Preserved => NpgPrediction::Global,
        OptimalActionStatus::NotPreserved => NpgPrediction::NotGlobal,
        OptimalActionStatus::TiedOptimum => NpgPrediction::UnsupportedTiedOptimum,
    };
    Ok(ConditionReport {
        non_domination,
        violating_pair,
        order,
        optimal_action,
        eps_approx,
        pg,
        npg,
    })
}
