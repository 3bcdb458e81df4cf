//! Post-hoc diagnostics: decay-rate fitting on trajectory gaps, expected
//! reward landscapes on a 2-D parameter slice, and the trajectory-dependent
//! one-sided approximation error.

use std::fmt;
use std::str::FromStr;

use crate::bandit::{BanditInstance, Params};
use crate::linalg::{Matrix, Vector};
use crate::optim::Trajectory;

/// Gap values at or below this are float noise after the log transform and
/// are dropped from fits.
pub const GAP_FLOOR: f64 = 1e-14;
/// A fit window must retain at least this many usable samples.
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateModel {
    /// `log gap` regressed on `t`: a linear fit means `gap ~ e^{slope * t}`.
    ExpLinear,
    /// `log gap` regressed on `log t`: a linear fit means `gap ~ t^{slope}`.
    PowerLaw,
}

impl fmt::Display for RateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateModel::ExpLinear => write!(f, "exp"),
            RateModel::PowerLaw => write!(f, "power"),
        }
    }
}

impl FromStr for RateModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exp" => Ok(RateModel::ExpLinear),
            "power" => Ok(RateModel::PowerLaw),
            other => Err(format!(
                "unknown rate model '{other}' (expected exp or power)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    /// Fewer positive-gap samples in the window than a fit needs.
    TooFewSamples {
        needed: usize,
        found: usize,
    },
    BadWindowFraction(f64),
    /// All abscissae coincide; no line is identifiable.
    DegenerateAbscissa,
    BadDims {
        dims: (usize, usize),
        dim: usize,
    },
    GridTooSmall(usize),
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    BadHalfWidth(f64),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::TooFewSamples { needed, found } => {
                write!(
                    f,
                    "too few positive-gap samples for a rate fit: need {needed}, found {found}"
                )
            }
            AnalysisError::BadWindowFraction(w) => {
                write!(f, "window fraction must be in (0, 1], got {w}")
            }
            AnalysisError::DegenerateAbscissa => {
                write!(f, "all samples share one abscissa; cannot fit a line")
            }
            AnalysisError::BadDims { dims, dim } => {
                write!(
                    f,
                    "grid dims ({}, {}) must be distinct and below {dim}",
                    dims.0, dims.1
                )
            }
            AnalysisError::GridTooSmall(n) => write!(f, "grid needs at least 2 points, got {n}"),
            AnalysisError::DimensionMismatch { expected, found } => {
                write!(
                    f,
                    "center length {found} does not match dimension {expected}"
                )
            }
            AnalysisError::BadHalfWidth(h) => write!(f, "half width must be positive, got {h}"),
        }
    }
}

impl std::error::Error for AnalysisError {}

/// A fitted decay line on transformed coordinates.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub model: RateModel,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(t_lo, t_hi)` actually used after windowing and gap filtering.
    pub window: (f64, f64),
}

/// Fit the tail of a trajectory's gap decay. The window keeps the last
/// `window_fraction` of samples (by count); within it, only samples with
/// gap above [`GAP_FLOOR`] enter the regression.
pub fn fit_rate(
    traj: &Trajectory,
    model: RateModel,
    window_fraction: f64,
) -> Result<RateFit, AnalysisError> {
    let points: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t as f64, s.gap)).collect();
    fit_rate_points(&points, model, window_fraction)
}

/// Same fit on raw `(t, gap)` pairs (for data read back from files).
pub fn fit_rate_points(
    points: &[(f64, f64)],
    model: RateModel,
    window_fraction: f64,
) -> Result<RateFit, AnalysisError> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(AnalysisError::BadWindowFraction(window_fraction));
    }
    let keep = ((points.len() as f64) * window_fraction).ceil() as usize;
    let start = points.len().saturating_sub(keep.max(1));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut t_lo = f64::INFINITY;
    let mut t_hi = f64::NEG_INFINITY;
    for &(t, gap) in &points[start..] {
        if gap <= GAP_FLOOR {
            continue;
        }
        let x = match model {
            RateModel::ExpLinear => t,
            RateModel::PowerLaw => {
                if t <= 0.0 {
                    continue;
                }
                t.ln()
            }
        };
        xs.push(x);
        ys.push(gap.ln());
        t_lo = t_lo.min(t);
        t_hi = t_hi.max(t);
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            found: xs.len(),
        });
    }

    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(AnalysisError::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let fitted = intercept + slope * x;
        ss_res += (y - fitted) * (y - fitted);
        ss_tot += (y - y_mean) * (y - y_mean);
    }
    let r_squared = if ss_tot == 0.0 {
        if ss_res < 1e-24 {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        model,
        slope,
        intercept,
        r_squared,
        window: (t_lo, t_hi),
    })
}

/// Expected-reward values on an `n x n` grid over a 2-D parameter slice.
/// `values(i, j)` is the expected reward at `theta[dims.0] = axis1[i]`,
/// `theta[dims.1] = axis2[j]`, remaining coordinates pinned at `center`.
#[derive(Debug, Clone)]
pub struct LandscapeGrid {
    pub axis1: Vector,
    pub axis2: Vector,
    pub values: Matrix,
}

/// Sample the objective on a square grid spanning
/// `[center - half_width, center + half_width]` in coordinates `dims`.
pub fn sample_landscape(
    inst: &BanditInstance,
    center: &Vector,
    half_width: f64,
    n: usize,
    dims: (usize, usize),
) -> Result<LandscapeGrid, AnalysisError> {
    let d = inst.feature_dim();
    if center.len() != d {
        return Err(AnalysisError::DimensionMismatch {
            expected: d,
            found: center.len(),
        });
    }
    if n < 2 {
        return Err(AnalysisError::GridTooSmall(n));
    }
    if dims.0 == dims.1 || dims.0 >= d || dims.1 >= d {
        return Err(AnalysisError::BadDims { dims, dim: d });
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(AnalysisError::BadHalfWidth(half_width));
    }
    let line = |c: f64| -> Vec<f64> {
        (0..n)
            .map(|k| c - half_width + 2.0 * half_width * k as f64 / (n - 1) as f64)
            .collect()
    };
    let axis1 = line(center[dims.0]);
    let axis2 = line(center[dims.1]);
    let mut values = Matrix::zeros(n, n);
    let mut theta = center.as_slice().to_vec();
    let mut scores = vec![0.0; inst.num_actions()];
    for (i, &a) in axis1.iter().enumerate() {
        for (j, &b) in axis2.iter().enumerate() {
            theta[dims.0] = a;
            theta[dims.1] = b;
            inst.scores_into(&theta, &mut scores);
            crate::bandit::softmax_in_place(&mut scores);
            let (value, _) = inst.value_and_gap(&scores);
            values.set(i, j, value);
        }
    }
    Ok(LandscapeGrid {
        axis1: Vector::from_vec_unchecked(axis1),
        axis2: Vector::from_vec_unchecked(axis2),
        values,
    })
}

/// One-sided approximation error at `theta`:
/// `(r(a*) - pi^T r) - (r_hat(a*) - pi^T r_hat)` with `r_hat` the
/// least-squares projection of `r`. Identically zero when `r` is
/// representable; sign and size track how the projection distorts the
/// optimal action's advantage along the trajectory.
pub fn one_sided_error(inst: &BanditInstance, params: &Params) -> f64 {
    let fit = inst
        .features()
        .least_squares(inst.rewards())
        .expect("instance guarantees full column rank");
    let policy = inst.policy(params).expect("params validated by caller");
    let star = inst.best_action();
    let true_advantage = inst.rewards()[star] - inst.expected_reward(&policy);
    let projected_advantage = fit.projection[star]
        - crate::linalg::dot(policy.probs().as_slice(), fit.projection.as_slice());
    true_advantage - projected_advantage
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::optim::{run, Algorithm, RunConfig};

    fn v(s: &[f64]) -> Vector {
        Vector::from_slice(s).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn exact_exponential_recovers_its_slope() {
        let points: Vec<(f64, f64)> = (1..=100)
            .map(|t| (t as f64, (-0.3 * t as f64).exp()))
            .collect();
        let fit = fit_rate_points(&points, RateModel::ExpLinear, 1.0).unwrap();
        assert_close(fit.slope, -0.3, 1e-9);
        assert!(fit.r_squared >= 1.0 - 1e-12);
        assert_eq!(fit.window, (1.0, 100.0));
    }

    #[test]
    fn exact_power_law_recovers_its_slope() {
        let points: Vec<(f64, f64)> = (1..=1000).map(|t| (t as f64, 5.0 / t as f64)).collect();
        let fit = fit_rate_points(&points, RateModel::PowerLaw, 0.5).unwrap();
        assert_close(fit.slope, -1.0, 1e-9);
        assert_close(fit.intercept, 5.0_f64.ln(), 1e-9);
        assert!(fit.r_squared >= 1.0 - 1e-12);
    }

    #[test]
    fn window_excludes_the_head() {
        // head is junk, tail is exact; the tail-half fit must not see the head
        let mut points: Vec<(f64, f64)> = (1..=50).map(|t| (t as f64, 1.0)).collect();
        points.extend((51..=100).map(|t| (t as f64, (-0.25 * t as f64).exp())));
        let fit = fit_rate_points(&points, RateModel::ExpLinear, 0.5).unwrap();
        assert_close(fit.slope, -0.25, 1e-9);
        assert!(fit.window.0 >= 51.0);
    }

    #[test]
    fn sub_floor_gaps_are_dropped() {
        let points: Vec<(f64, f64)> = (1..=200)
            .map(|t| {
                (
                    t as f64,
                    if t <= 20 {
                        (-0.5 * t as f64).exp()
                    } else {
                        1e-16
                    },
                )
            })
            .collect();
        // the window keeps everything, but only the first 20 survive the
        // floor; 20 >= 10 so this still fits, on (1, 20)
        let fit = fit_rate_points(&points, RateModel::ExpLinear, 1.0).unwrap();
        assert_close(fit.slope, -0.5, 1e-9);
        assert_eq!(fit.window, (1.0, 20.0));
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let points: Vec<(f64, f64)> = (1..=5).map(|t| (t as f64, 0.5)).collect();
        assert!(matches!(
            fit_rate_points(&points, RateModel::ExpLinear, 1.0),
            Err(AnalysisError::TooFewSamples {
                needed: 10,
                found: 5
            })
        ));
    }

    #[test]
    fn bad_window_fraction_is_an_error() {
        let points: Vec<(f64, f64)> = (1..=50).map(|t| (t as f64, 0.5)).collect();
        assert!(matches!(
            fit_rate_points(&points, RateModel::ExpLinear, 0.0),
            Err(AnalysisError::BadWindowFraction(_))
        ));
    }

    #[test]
    fn npg_tail_fit_matches_projected_gap_rate() {
        let named = instances::builtin("example1").unwrap();
        let cfg = RunConfig::new(Algorithm::Npg, 0.2, named.theta1.unwrap(), 150);
        let traj = run(&named.instance, &cfg).unwrap();
        let fit = fit_rate(&traj, RateModel::ExpLinear, 0.5).unwrap();
        // the slowest surviving score gap is eta * delta_hat = 0.2 * 2.8
        assert!(
            (fit.slope + 0.56).abs() <= 0.1 * 0.56,
            "slope {}",
            fit.slope
        );
        assert!(fit.r_squared > 0.999, "r^2 {}", fit.r_squared);
    }

    #[test]
    fn degenerate_two_point_grid_evaluates_corners() {
        let named = instances::builtin("example1").unwrap();
        let inst = &named.instance;
        let grid = sample_landscape(inst, &v(&[0.0, 0.0]), 12.0, 2, (0, 1)).unwrap();
        assert_eq!(grid.axis1.as_slice(), &[-12.0, 12.0]);
        for (i, &a) in [-12.0, 12.0].iter().enumerate() {
            for (j, &b) in [-12.0, 12.0].iter().enumerate() {
                let pol = inst.policy(&Params::new(v(&[a, b]))).unwrap();
                assert_close(grid.values.get(i, j), inst.expected_reward(&pol), 1e-12);
            }
        }
    }

    #[test]
    fn landscape_values_stay_inside_reward_range() {
        let named = instances::builtin("example1").unwrap();
        let grid = sample_landscape(&named.instance, &v(&[0.0, 0.0]), 12.0, 101, (0, 1)).unwrap();
        let mut max_seen = f64::NEG_INFINITY;
        for i in 0..101 {
            for j in 0..101 {
                let val = grid.values.get(i, j);
                assert!((6.0..=9.0).contains(&val), "value {val} outside [6, 9]");
                max_seen = max_seen.max(val);
            }
        }
        // the optimal plateau is inside this window
        assert!(max_seen >= 8.99, "max {max_seen}");
    }

    #[test]
    fn six_action_landscape_respects_its_reward_range() {
        let named = instances::builtin("example5").unwrap();
        let grid = sample_landscape(&named.instance, &v(&[0.0, 0.0]), 12.0, 41, (0, 1)).unwrap();
        for i in 0..41 {
            for j in 0..41 {
                let val = grid.values.get(i, j);
                assert!((4.0..=9.0).contains(&val), "value {val} outside [4, 9]");
            }
        }
    }

    #[test]
    fn flat_rewards_give_a_constant_grid() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let flat = BanditInstance::new(x, v(&[2.0, 2.0, 2.0])).unwrap();
        let grid = sample_landscape(&flat, &v(&[0.0, 0.0]), 3.0, 5, (0, 1)).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_close(grid.values.get(i, j), 2.0, 1e-12);
            }
        }
    }

    #[test]
    fn landscape_rejects_bad_arguments() {
        let named = instances::builtin("example1").unwrap();
        let inst = &named.instance;
        assert!(matches!(
            sample_landscape(inst, &v(&[0.0, 0.0]), 1.0, 1, (0, 1)),
            Err(AnalysisError::GridTooSmall(1))
        ));
        assert!(matches!(
            sample_landscape(inst, &v(&[0.0, 0.0]), 1.0, 3, (0, 0)),
            Err(AnalysisError::BadDims { .. })
        ));
        assert!(matches!(
            sample_landscape(inst, &v(&[0.0]), 1.0, 3, (0, 1)),
            Err(AnalysisError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn one_sided_error_reference_points() {
        let e1 = instances::builtin("example1").unwrap().instance;
        let at_zero = one_sided_error(&e1, &Params::new(v(&[0.0, 0.0])));
        // (9 - 7.5) - (22/5 - 0.75) = 1.5 - 3.65
        assert_close(at_zero, -2.15, 1e-12);

        let e4 = instances::builtin("example4").unwrap().instance;
        let at_zero = one_sided_error(&e4, &Params::new(v(&[0.0, 0.0])));
        // (9 - 7.5) - (1 - 0)
        assert_close(at_zero, 0.5, 1e-12);
    }

    #[test]
    fn representable_rewards_zero_the_error_everywhere() {
        let p2 = instances::builtin("prop2").unwrap().instance;
        for theta in [[0.0, 0.0], [1.0, -2.0], [-3.5, 0.25], [10.0, 10.0]] {
            let err = one_sided_error(&p2, &Params::new(v(&theta)));
            assert!(err.abs() < 1e-9, "theta {theta:?}: {err}");
        }

        // replacing r by its own projection zeroes the error for any theta
        let e1 = instances::builtin("example1").unwrap().instance;
        let r_hat = e1
            .features()
            .least_squares(e1.rewards())
            .unwrap()
            .projection;
        let projected = BanditInstance::new(e1.features().clone(), r_hat).unwrap();
        for theta in [[0.0, 0.0], [6.0, 8.0], [-1.0, 2.0]] {
            let err = one_sided_error(&projected, &Params::new(v(&theta)));
            assert!(err.abs() < 1e-9, "theta {theta:?}: {err}");
        }
    }
}
