//! Built-in registry of the study instances plus a flat text format for
//! user-supplied ones.
//!
//! The file format (UTF-8, LF, `#` starts a comment line):
//!
//! ```text
//! K 4
//! d 2
//! X
//! 0 -2
//! -1 0
//! 0 1
//! 2 0
//! r 9 8 7 6
//! theta1 6 8        # optional
//! eta 0.2           # optional
//! ```
//!
//! `X` is row-major, one action per line with `d` whitespace-separated
//! numbers (decimal or scientific). Files must satisfy `d < K`, a full-rank
//! feature matrix, and a reward vector with at least two distinct entries.

use std::f64::consts::LN_2;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::bandit::{BanditError, BanditInstance};
use crate::linalg::{Matrix, Vector};

pub const BUILTIN_NAMES: [&str; 6] = [
    "example1", "example2", "example3", "example4", "example5", "prop2",
];

/// Reference values for a built-in instance, consumed by the verify suite.
/// Action indices are 0-based.
#[derive(Debug, Clone)]
pub struct KnownFacts {
    /// Least-squares residual `min_w ||Xw - r||_2`.
    pub eps_approx: f64,
    /// Projected reward vector.
    pub r_hat: Vec<f64>,
    pub non_domination: bool,
    pub violating_pair: Option<(usize, usize)>,
    pub order_feasible: bool,
    /// `None` when the reward optimum is tied.
    pub optimal_action_preserved: Option<bool>,
}

/// A registry entry: the instance plus its canonical run settings.
#[derive(Debug, Clone)]
pub struct NamedInstance {
    pub name: &'static str,
    pub instance: BanditInstance,
    pub theta1: Option<Vector>,
    pub eta: Option<f64>,
    /// True when `eta` is a repo-chosen default rather than part of the
    /// instance's source definition.
    pub eta_is_default: bool,
    pub facts: KnownFacts,
}

/// Contents of a parsed instance file.
#[derive(Debug, Clone)]
pub struct InstanceFile {
    pub instance: BanditInstance,
    pub theta1: Option<Vector>,
    pub eta: Option<f64>,
}

#[derive(Debug)]
pub enum InstanceError {
    UnknownName {
        name: String,
    },
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Parse {
        line: usize,
        message: String,
    },
    MissingField {
        field: &'static str,
    },
    Invariant {
        message: String,
    },
}

impl fmt::Display for InstanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceError::UnknownName { name } => write!(
                f,
                "unknown instance '{name}'; valid names: {}",
                BUILTIN_NAMES.join(", ")
            ),
            InstanceError::Io { path, source } => {
                write!(f, "{}: {source}", path.display())
            }
            InstanceError::Parse { line, message } => {
                write!(f, "parse error at line {line}: {message}")
            }
            InstanceError::MissingField { field } => {
                write!(f, "missing required field '{field}'")
            }
            InstanceError::Invariant { message } => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for InstanceError {}

impl From<BanditError> for InstanceError {
    fn from(e: BanditError) -> Self {
        InstanceError::Invariant {
            message: e.to_string(),
        }
    }
}

fn build(rows: &[[f64; 2]], rewards: &[f64]) -> BanditInstance {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    BanditInstance::new(
        Matrix::from_rows(&rows).expect("builtin feature data is well formed"),
        Vector::from_slice(rewards).expect("builtin rewards are finite"),
    )
    .expect("builtin instances satisfy the constructor invariants")
}

/// Look up a built-in instance by name.
pub fn builtin(name: &str) -> Result<NamedInstance, InstanceError> {
    let theta_ex123 = Vector::from_slice(&[6.0, 8.0]).unwrap();
    match name {
        "example1" => Ok(NamedInstance {
            name: "example1",
            instance: build(
                &[[0.0, -2.0], [-1.0, 0.0], [0.0, 1.0], [2.0, 0.0]],
                &[9.0, 8.0, 7.0, 6.0],
            ),
            theta1: Some(theta_ex123),
            eta: Some(0.2),
            eta_is_default: false,
            facts: KnownFacts {
                eps_approx: 202.6_f64.sqrt(),
                r_hat: vec![22.0 / 5.0, -4.0 / 5.0, -11.0 / 5.0, 8.0 / 5.0],
                non_domination: true,
                violating_pair: None,
                order_feasible: true,
                optimal_action_preserved: Some(true),
            },
        }),
        "example2" => Ok(NamedInstance {
            name: "example2",
            instance: build(
                &[[0.0, -2.0], [0.0, 1.0], [-1.0, 0.0], [2.0, 0.0]],
                &[9.0, 8.0, 7.0, 6.0],
            ),
            theta1: Some(theta_ex123),
            eta: Some(0.2),
            eta_is_default: false,
            facts: KnownFacts {
                eps_approx: 205.0_f64.sqrt(),
                r_hat: vec![4.0, -2.0, -1.0, 2.0],
                non_domination: true,
                violating_pair: None,
                order_feasible: false,
                optimal_action_preserved: Some(true),
            },
        }),
        "example3" => Ok(NamedInstance {
            name: "example3",
            instance: build(
                &[[-1.0, 0.0], [0.0, -2.0], [0.0, 1.0], [2.0, 0.0]],
                &[9.0, 8.0, 7.0, 6.0],
            ),
            theta1: Some(theta_ex123),
            eta: Some(0.2),
            eta_is_default: false,
            facts: KnownFacts {
                eps_approx: 212.0_f64.sqrt(),
                r_hat: vec![-3.0 / 5.0, 18.0 / 5.0, -9.0 / 5.0, 6.0 / 5.0],
                non_domination: true,
                violating_pair: None,
                order_feasible: true,
                optimal_action_preserved: Some(false),
            },
        }),
        "example4" => Ok(NamedInstance {
            name: "example4",
            instance: build(
                &[[0.0, -1.0], [-1.0, 0.0], [0.0, 1.0], [1.0, 0.0]],
                &[9.0, 8.0, 7.0, 6.0],
            ),
            theta1: Some(Vector::from_slice(&[4.0, 10.0]).unwrap()),
            eta: Some(0.2),
            eta_is_default: false,
            facts: KnownFacts {
                eps_approx: 226.0_f64.sqrt(),
                r_hat: vec![1.0, 1.0, -1.0, -1.0],
                non_domination: true,
                violating_pair: None,
                order_feasible: false,
                optimal_action_preserved: Some(false),
            },
        }),
        "example5" => Ok(NamedInstance {
            name: "example5",
            instance: build(
                &[
                    [0.0, -1.0],
                    [-1.0, 0.0],
                    [-1.0, 1.0],
                    [0.0, 1.0],
                    [1.0, 0.0],
                    [1.0, -1.0],
                ],
                &[9.0, 8.0, 7.0, 6.0, 5.0, 4.0],
            ),
            theta1: Some(Vector::from_slice(&[10.0, -2.0]).unwrap()),
            eta: Some(0.2),
            eta_is_default: false,
            facts: KnownFacts {
                eps_approx: 259.0_f64.sqrt(),
                r_hat: vec![1.0, 2.0, 1.0, -1.0, -2.0, -1.0],
                non_domination: false,
                violating_pair: Some((0, 5)),
                order_feasible: false,
                optimal_action_preserved: Some(false),
            },
        }),
        "prop2" => Ok(NamedInstance {
            name: "prop2",
            instance: build(&[[0.0, -2.0], [-10.0, 4.0], [0.0, 1.0]], &[4.0, 2.0, -2.0]),
            theta1: Some(Vector::from_slice(&[-LN_2, LN_2]).unwrap()),
            // The source construction fixes theta1 but not a step size;
            // 0.1 is this repo's convention for reproducibility.
            eta: Some(0.1),
            eta_is_default: true,
            facts: KnownFacts {
                eps_approx: 0.0,
                r_hat: vec![4.0, 2.0, -2.0],
                non_domination: false,
                violating_pair: Some((2, 1)),
                order_feasible: true,
                optimal_action_preserved: Some(true),
            },
        }),
        other => Err(InstanceError::UnknownName {
            name: other.to_string(),
        }),
    }
}

/// Parse an instance file. Enforces the function-approximation regime
/// (`d < K`, full-rank features, non-constant rewards) with named
/// diagnostics.
pub fn load(path: impl AsRef<Path>) -> Result<InstanceFile, InstanceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text)
}

fn parse(text: &str) -> Result<InstanceFile, InstanceError> {
    // logical lines: (1-based number, content), comments and blanks removed
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();

    let mut k: Option<usize> = None;
    let mut d: Option<usize> = None;
    let mut x_rows: Option<Vec<Vec<f64>>> = None;
    let mut r: Option<Vec<f64>> = None;
    let mut theta1: Option<Vec<f64>> = None;
    let mut eta: Option<f64> = None;

    let parse_count = |line: usize, tok: &str, field: &str| -> Result<usize, InstanceError> {
        tok.parse::<usize>().map_err(|_| InstanceError::Parse {
            line,
            message: format!("field '{field}' expects a positive integer, got '{tok}'"),
        })
    };
    let parse_nums = |line: usize, toks: &[&str], field: &str| -> Result<Vec<f64>, InstanceError> {
        toks.iter()
            .map(|t| {
                t.parse::<f64>().map_err(|_| InstanceError::Parse {
                    line,
                    message: format!("field '{field}' expects numbers, got '{t}'"),
                })
            })
            .collect()
    };

    let mut idx = 0;
    while idx < lines.len() {
        let (line_no, line) = lines[idx];
        let toks: Vec<&str> = line.split_whitespace().collect();
        let field = toks[0];
        let dup = |present: bool| -> Result<(), InstanceError> {
            if present {
                Err(InstanceError::Parse {
                    line: line_no,
                    message: format!("duplicate field '{field}'"),
                })
            } else {
                Ok(())
            }
        };
        match field {
            "K" => {
                dup(k.is_some())?;
                if toks.len() != 2 {
                    return Err(InstanceError::Parse {
                        line: line_no,
                        message: "field 'K' expects exactly one value".into(),
                    });
                }
                k = Some(parse_count(line_no, toks[1], "K")?);
            }
            "d" => {
                dup(d.is_some())?;
                if toks.len() != 2 {
                    return Err(InstanceError::Parse {
                        line: line_no,
                        message: "field 'd' expects exactly one value".into(),
                    });
                }
                d = Some(parse_count(line_no, toks[1], "d")?);
            }
            "X" => {
                dup(x_rows.is_some())?;
                let (kk, dd) = match (k, d) {
                    (Some(kk), Some(dd)) => (kk, dd),
                    _ => {
                        return Err(InstanceError::Parse {
                            line: line_no,
                            message: "'X' must come after 'K' and 'd'".into(),
                        })
                    }
                };
                let mut rows = Vec::with_capacity(kk);
                for row_i in 0..kk {
                    idx += 1;
                    let Some(&(row_line, row)) = lines.get(idx) else {
                        return Err(InstanceError::Parse {
                            line: line_no,
                            message: format!("'X' expects {kk} rows, found {row_i}"),
                        });
                    };
                    let row_toks: Vec<&str> = row.split_whitespace().collect();
                    if row_toks.len() != dd {
                        return Err(InstanceError::Parse {
                            line: row_line,
                            message: format!(
                                "'X' row expects {dd} numbers, got {}",
                                row_toks.len()
                            ),
                        });
                    }
                    rows.push(parse_nums(row_line, &row_toks, "X")?);
                }
                x_rows = Some(rows);
            }
            "r" => {
                dup(r.is_some())?;
                let kk = k.ok_or(InstanceError::Parse {
                    line: line_no,
                    message: "'r' must come after 'K'".into(),
                })?;
                if toks.len() - 1 != kk {
                    return Err(InstanceError::Parse {
                        line: line_no,
                        message: format!("'r' expects {kk} numbers, got {}", toks.len() - 1),
                    });
                }
                r = Some(parse_nums(line_no, &toks[1..], "r")?);
            }
            "theta1" => {
                dup(theta1.is_some())?;
                let dd = d.ok_or(InstanceError::Parse {
                    line: line_no,
                    message: "'theta1' must come after 'd'".into(),
                })?;
                if toks.len() - 1 != dd {
                    return Err(InstanceError::Parse {
                        line: line_no,
                        message: format!("'theta1' expects {dd} numbers, got {}", toks.len() - 1),
                    });
                }
                theta1 = Some(parse_nums(line_no, &toks[1..], "theta1")?);
            }
            "eta" => {
                dup(eta.is_some())?;
                if toks.len() != 2 {
                    return Err(InstanceError::Parse {
                        line: line_no,
                        message: "field 'eta' expects exactly one value".into(),
                    });
                }
                eta = Some(parse_nums(line_no, &toks[1..], "eta")?[0]);
            }
            other => {
                return Err(InstanceError::Parse {
                    line: line_no,
                    message: format!("unknown field '{other}'"),
                });
            }
        }
        idx += 1;
    }

    let k = k.ok_or(InstanceError::MissingField { field: "K" })?;
    let d = d.ok_or(InstanceError::MissingField { field: "d" })?;
    let x_rows = x_rows.ok_or(InstanceError::MissingField { field: "X" })?;
    let r = r.ok_or(InstanceError::MissingField { field: "r" })?;

    if d >= k {
        return Err(InstanceError::Invariant {
            message: "requires d < K".into(),
        });
    }
    let features = Matrix::from_rows(&x_rows).map_err(|e| InstanceError::Invariant {
        message: e.to_string(),
    })?;
    let rewards = Vector::new(r).map_err(|e| InstanceError::Invariant {
        message: e.to_string(),
    })?;
    if rewards.iter().all(|&x| x == rewards[0]) {
        return Err(InstanceError::Invariant {
            message: "reward vector must have at least two distinct entries".into(),
        });
    }
    let instance = BanditInstance::new(features, rewards)?;
    let theta1 = match theta1 {
        Some(t) => Some(Vector::new(t).map_err(|e| InstanceError::Invariant {
            message: e.to_string(),
        })?),
        None => None,
    };
    if let Some(e) = eta {
        if !(e.is_finite() && e > 0.0) {
            return Err(InstanceError::Invariant {
                message: "eta must be positive".into(),
            });
        }
    }
    Ok(InstanceFile {
        instance,
        theta1,
        eta,
    })
}

/// Write an instance in the documented format. Floats use shortest
/// round-trip rendering, so `load . save` is the identity bit for bit.
pub fn save(inst: &BanditInstance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    let path = path.as_ref();
    let io_err = |source| InstanceError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::new();
    out.push_str(&format!("K {}\n", inst.num_actions()));
    out.push_str(&format!("d {}\n", inst.feature_dim()));
    out.push_str("X\n");
    for a in 0..inst.num_actions() {
        let row: Vec<String> = inst.feature_row(a).iter().map(|x| format!("{x}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    let r: Vec<String> = inst.rewards().iter().map(|x| format!("{x}")).collect();
    out.push_str(&format!("r {}\n", r.join(" ")));
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(out.as_bytes()).map_err(io_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DEFAULT_RANK_TOL;

    fn temp_path(tag: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("pg-orderlab-test-{}-{tag}.txt", std::process::id()));
        p
    }

    #[test]
    fn every_builtin_satisfies_the_regime_invariants() {
        for name in BUILTIN_NAMES {
            let named = builtin(name).unwrap();
            let inst = &named.instance;
            assert!(inst.feature_dim() < inst.num_actions(), "{name}: d < K");
            assert_eq!(
                inst.features().column_rank(DEFAULT_RANK_TOL),
                inst.feature_dim(),
                "{name}: full column rank"
            );
            let r0 = inst.rewards()[0];
            assert!(
                inst.rewards().iter().any(|&x| x != r0),
                "{name}: non-constant rewards"
            );
        }
    }

    #[test]
    fn builtins_reproduce_reference_approximation_errors() {
        for (name, expected) in [
            ("example1", 202.6_f64.sqrt()),
            ("example2", 205.0_f64.sqrt()),
            ("example3", 212.0_f64.sqrt()),
        ] {
            let named = builtin(name).unwrap();
            let fit = named
                .instance
                .features()
                .least_squares(named.instance.rewards())
                .unwrap();
            assert!(
                (fit.residual_norm - expected).abs() < 1e-9,
                "{name}: residual {} vs {expected}",
                fit.residual_norm
            );
            assert_eq!(named.facts.eps_approx, expected);
        }
    }

    #[test]
    fn known_facts_match_fresh_projections() {
        for name in BUILTIN_NAMES {
            let named = builtin(name).unwrap();
            let fit = named
                .instance
                .features()
                .least_squares(named.instance.rewards())
                .unwrap();
            assert!(
                (fit.residual_norm - named.facts.eps_approx).abs() < 1e-9,
                "{name}"
            );
            for (got, want) in fit.projection.iter().zip(&named.facts.r_hat) {
                assert!((got - want).abs() < 1e-10, "{name}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn builtin_registry_metadata() {
        let e5 = builtin("example5").unwrap();
        assert_eq!(e5.instance.num_actions(), 6);
        assert_eq!(e5.instance.feature_dim(), 2);
        assert_eq!(
            e5.instance.rewards().as_slice(),
            &[9.0, 8.0, 7.0, 6.0, 5.0, 4.0]
        );
        assert_eq!(e5.theta1.unwrap().as_slice(), &[10.0, -2.0]);
        assert_eq!(e5.eta, Some(0.2));
        assert!(!e5.eta_is_default);

        let p2 = builtin("prop2").unwrap();
        assert_eq!(p2.instance.num_actions(), 3);
        assert_eq!(p2.instance.rewards().as_slice(), &[4.0, 2.0, -2.0]);
        let t = p2.theta1.unwrap();
        assert!((t[0] + LN_2).abs() < 1e-15 && (t[1] - LN_2).abs() < 1e-15);
        assert!(p2.eta_is_default);

        let err = builtin("example9").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("example9") && msg.contains("example1") && msg.contains("prop2"));
    }

    #[test]
    fn file_encoding_example1_round_trips() {
        let text = "# the first study instance\nK 4\nd 2\nX\n0 -2\n-1 0\n0 1\n2 0\nr 9 8 7 6\ntheta1 6 8\neta 0.2\n";
        let parsed = parse(text).unwrap();
        let reference = builtin("example1").unwrap();
        assert_eq!(parsed.instance.features(), reference.instance.features());
        assert_eq!(parsed.instance.rewards(), reference.instance.rewards());
        assert_eq!(parsed.theta1.unwrap().as_slice(), &[6.0, 8.0]);
        assert_eq!(parsed.eta, Some(0.2));
    }

    #[test]
    fn save_then_load_is_identity() {
        let path = temp_path("roundtrip");
        let original = builtin("example2").unwrap().instance;
        save(&original, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.instance.features(), original.features());
        assert_eq!(loaded.instance.rewards(), original.rewards());
        assert!(loaded.theta1.is_none());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn save_preserves_full_precision() {
        let path = temp_path("precision");
        let x = Matrix::from_rows(&[vec![0.1 + 0.2, -2.0], vec![-1.0, 1.0 / 3.0], vec![0.0, 1.0]])
            .unwrap();
        let inst =
            BanditInstance::new(x, Vector::from_slice(&[1e-17, 2.5, -3.125]).unwrap()).unwrap();
        save(&inst, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.instance.features(), inst.features());
        assert_eq!(loaded.instance.rewards(), inst.rewards());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn load_rejects_square_feature_matrix() {
        let text = "K 2\nd 2\nX\n1 0\n0 1\nr 1 2\n";
        let err = parse(text).unwrap_err();
        assert!(err.to_string().contains("requires d < K"), "{err}");
    }

    #[test]
    fn load_rejects_rank_deficient_features() {
        let text = "K 3\nd 2\nX\n1 2\n2 4\n3 6\nr 1 2 3\n";
        let err = parse(text).unwrap_err();
        assert!(
            err.to_string()
                .contains("rank-deficient feature matrix, column 2"),
            "{err}"
        );
    }

    #[test]
    fn load_rejects_constant_rewards() {
        let text = "K 3\nd 1\nX\n1\n2\n3\nr 5 5 5\n";
        let err = parse(text).unwrap_err();
        assert!(
            err.to_string().contains("at least two distinct entries"),
            "{err}"
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "K 4\nd 2\nX\n0 -2\n-1 zebra\n0 1\n2 0\nr 9 8 7 6\n";
        match parse(text).unwrap_err() {
            InstanceError::Parse { line, message } => {
                assert_eq!(line, 5);
                assert!(message.contains("zebra"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_fields_are_named() {
        let err = parse("K 4\nd 2\n").unwrap_err();
        assert!(err.to_string().contains("'X'"), "{err}");
    }

    #[test]
    fn save_to_unwritable_path_is_io_error() {
        let inst = builtin("example1").unwrap().instance;
        let err = save(&inst, "/nonexistent-dir-pg-orderlab/x.txt").unwrap_err();
        assert!(matches!(err, InstanceError::Io { .. }));
    }
}
