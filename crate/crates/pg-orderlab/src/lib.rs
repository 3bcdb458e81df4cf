//! Exact policy optimization on finite-arm bandits with log-linear policies.
//!
//! A bandit instance is a feature matrix `X ∈ R^{K×d}` (one row per action,
//! full column rank) together with a reward vector `r ∈ R^K`. Policies are
//! `softmax(Xθ)` for a parameter `θ ∈ R^d`, and the objective is the exact
//! expected reward `π_θᵀ r` — no sampling anywhere.
//!
//! The crate provides:
//!
//! - [`optim`]: iterative runners for softmax policy gradient (gradient
//!   ascent through the softmax) and natural policy gradient (whose update
//!   direction is the least-squares regression of `r` onto the features and
//!   therefore parameter-independent), with trajectory recording.
//! - [`conditions`]: mechanical checkers for the ordering properties that
//!   decide whether those runners reach the globally optimal action:
//!   feature non-domination, reward-order preservation (a small linear
//!   program), and optimal-action preservation under least-squares
//!   projection.
//! - [`analysis`]: convergence-rate fitting and landscape grid sampling.
//! - [`instances`]: a registry of built-in instances plus a plain-text file
//!   format for user-supplied ones.
//! - [`verify`]: the reproduction suite behind `pg-orderlab verify`.
//!
//! Everything is deterministic: the only randomized internal (the power
//! iteration start vector) uses a fixed seed.

pub mod analysis;
pub mod bandit;
pub mod conditions;
pub mod instances;
pub mod linalg;
pub mod optim;
pub mod simplex;
pub mod verify;

pub(crate) mod rng;

pub use bandit::{BanditError, BanditInstance, Params, Policy};
pub use linalg::{LinalgError, Matrix, Vector};
