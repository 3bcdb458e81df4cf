//! Command-line surface: condition checking, trajectory runs, landscape
//! export, rate fitting, the builtin listing, and the reproduction suite.
//!
//! Exit codes: 0 success, 1 usage or load error, 2 numerical failure,
//! 3 verify fact failure.

use std::fmt::Write as _;
use std::path::Path;

use pg_orderlab::analysis::{self, RateModel};
use pg_orderlab::bandit::BanditInstance;
use pg_orderlab::conditions;
use pg_orderlab::instances::{self, BUILTIN_NAMES};
use pg_orderlab::linalg::Vector;
use pg_orderlab::optim::{self, Algorithm, RunConfig, Terminal};
use pg_orderlab::verify;

const USAGE: &str = "\
pg-orderlab: softmax policy gradient and natural policy gradient on
finite-arm bandits with log-linear policies, plus checkers for the ordering
conditions that decide global convergence.

usage: pg-orderlab <command> [flags]

commands:
  check      --example NAME | --file PATH
             run the condition checkers and print the convergence verdicts
  run        --example NAME | --file PATH --alg pg|npg --max-iters N
             [--eta F] [--theta1 a,b,...] [--gap-tol F] [--stride N]
             [--enforce-safe-eta] [--out PATH]
             iterate the chosen update and report the limit behavior
  landscape  --example NAME | --file PATH --half-width F --out PATH
             [--center a,b,...] [--grid N]
             sample the expected reward on a 2-D parameter grid
  rate       FILE --model exp|power [--window F]
             fit a decay model to a trajectory file's gap column
  examples   list the built-in instances
  verify     [--fast]
             run the reproduction suite (--fast skips the full-length
             gradient runs)

exit codes: 0 ok, 1 usage/load error, 2 numerical failure, 3 verify failure
";

enum CliError {
    Usage(String),
    Load(String),
}

impl CliError {
    fn report(&self) -> i32 {
        match self {
            CliError::Usage(msg) | CliError::Load(msg) => {
                eprintln!("error: {msg}");
                1
            }
        }
    }
}

pub fn run(args: &[String]) -> i32 {
    let Some(command) = args.first() else {
        eprint!("{USAGE}");
        return 1;
    };
    let rest = &args[1..];
    let result = match command.as_str() {
        "-h" | "--help" | "help" => {
            print!("{USAGE}");
            return 0;
        }
        "check" => cmd_check(rest),
        "run" => cmd_run(rest),
        "landscape" => cmd_landscape(rest),
        "rate" => cmd_rate(rest),
        "examples" => cmd_examples(rest),
        "verify" => cmd_verify(rest),
        other => Err(CliError::Usage(format!(
            "unknown command '{other}'; see --help"
        ))),
    };
    match result {
        Ok(code) => code,
        Err(e) => e.report(),
    }
}

/// Minimal flag cursor: `--name value` pairs plus bare positionals.
struct Flags<'a> {
    named: Vec<(String, Option<String>)>,
    positional: Vec<String>,
    command: &'a str,
}

impl<'a> Flags<'a> {
    fn parse(command: &'a str, args: &[String], boolean: &[&str]) -> Result<Self, CliError> {
        let mut named = Vec::new();
        let mut positional = Vec::new();
        let mut it = args.iter().peekable();
        while let Some(arg) = it.next() {
            if let Some(name) = arg.strip_prefix("--") {
                if named.iter().any(|(n, _)| n == name) {
                    return Err(CliError::Usage(format!("duplicate flag --{name}")));
                }
                if boolean.contains(&name) {
                    named.push((name.to_string(), None));
                } else {
                    let value = it
                        .next()
                        .ok_or_else(|| CliError::Usage(format!("flag --{name} expects a value")))?;
                    named.push((name.to_string(), Some(value.clone())));
                }
            } else {
                positional.push(arg.clone());
            }
        }
        Ok(Flags {
            named,
            positional,
            command,
        })
    }

    fn take(&mut self, name: &str) -> Option<String> {
        let idx = self.named.iter().position(|(n, _)| n == name)?;
        let (_, value) = self.named.remove(idx);
        value
    }

    fn take_bool(&mut self, name: &str) -> bool {
        let idx = self.named.iter().position(|(n, _)| n == name);
        match idx {
            Some(i) => {
                self.named.remove(i);
                true
            }
            None => false,
        }
    }

    /// Everything must have been consumed by now.
    fn finish(self, expected_positional: usize) -> Result<Vec<String>, CliError> {
        if let Some((name, _)) = self.named.first() {
            return Err(CliError::Usage(format!(
                "unknown flag --{name} for '{}'",
                self.command
            )));
        }
        if self.positional.len() != expected_positional {
            return Err(CliError::Usage(format!(
                "'{}' expects {expected_positional} positional argument(s), got {}",
                self.command,
                self.positional.len()
            )));
        }
        Ok(self.positional)
    }
}

fn parse_f64(name: &str, value: &str) -> Result<f64, CliError> {
    value
        .parse::<f64>()
        .map_err(|_| CliError::Usage(format!("--{name} expects a number, got '{value}'")))
}

fn parse_u64(name: &str, value: &str) -> Result<u64, CliError> {
    value
        .parse::<u64>()
        .map_err(|_| CliError::Usage(format!("--{name} expects an integer, got '{value}'")))
}

fn parse_vector(name: &str, value: &str) -> Result<Vector, CliError> {
    let entries: Result<Vec<f64>, _> = value
        .split(',')
        .map(|tok| tok.trim().parse::<f64>())
        .collect();
    let entries = entries.map_err(|_| {
        CliError::Usage(format!(
            "--{name} expects comma-separated numbers, got '{value}'"
        ))
    })?;
    Vector::new(entries).map_err(|e| CliError::Usage(format!("--{name}: {e}")))
}

/// An instance plus wherever it came from and any bundled run defaults.
struct Source {
    label: String,
    instance: BanditInstance,
    theta1: Option<Vector>,
    eta: Option<f64>,
}

fn take_source(flags: &mut Flags) -> Result<Source, CliError> {
    let example = flags.take("example");
    let file = flags.take("file");
    match (example, file) {
        (Some(name), None) => {
            let named = instances::builtin(&name).map_err(|e| CliError::Load(e.to_string()))?;
            Ok(Source {
                label: named.name.to_string(),
                instance: named.instance,
                theta1: named.theta1,
                eta: named.eta,
            })
        }
        (None, Some(path)) => {
            let loaded = instances::load(&path).map_err(|e| CliError::Load(e.to_string()))?;
            Ok(Source {
                label: path,
                instance: loaded.instance,
                theta1: loaded.theta1,
                eta: loaded.eta,
            })
        }
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--example and --file are mutually exclusive".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "one of --example or --file is required".into(),
        )),
    }
}

fn fmt_vector(v: &Vector) -> String {
    let entries: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", entries.join(", "))
}

// ---------------------------------------------------------------------------
// check

fn cmd_check(args: &[String]) -> Result<i32, CliError> {
    let mut flags = Flags::parse("check", args, &[])?;
    let source = take_source(&mut flags)?;
    flags.finish(0)?;

    let inst = &source.instance;
    let report = conditions::predict(inst).map_err(|e| CliError::Load(e.to_string()))?;

    println!(
        "instance: {} (K={}, d={})",
        source.label,
        inst.num_actions(),
        inst.feature_dim()
    );
    match report.violating_pair {
        None => println!("non-domination: satisfied"),
        Some((i, j)) => println!("non-domination: violated by pair ({}, {})", i + 1, j + 1),
    }
    if report.order.feasible {
        println!(
            "order-preservation: feasible (margin {}, witness {})",
            report.order.margin,
            fmt_vector(
                report
                    .order
                    .witness
                    .as_ref()
                    .expect("feasible carries a witness")
            )
        );
    } else {
        println!(
            "order-preservation: infeasible (best margin {})",
            report.order.margin
        );
    }
    let r_hat = &report.optimal_action.r_hat;
    let argmax_note = if inst.has_unique_optimum() {
        format!(
            "argmax action {}",
            pg_orderlab::bandit::argmax(r_hat.as_slice()) + 1
        )
    } else {
        "reward optimum tied".to_string()
    };
    println!("r_hat: {}, {argmax_note}", fmt_vector(r_hat));
    println!("eps_approx: {}", report.eps_approx);
    println!("pg prediction: {}", report.pg);
    println!("npg prediction: {}", report.npg);
    Ok(0)
}

// ---------------------------------------------------------------------------
// run

fn cmd_run(args: &[String]) -> Result<i32, CliError> {
    let mut flags = Flags::parse("run", args, &["enforce-safe-eta"])?;
    let source = take_source(&mut flags)?;
    let alg: Algorithm = flags
        .take("alg")
        .ok_or_else(|| CliError::Usage("--alg is required (pg or npg)".into()))?
        .parse()
        .map_err(CliError::Usage)?;
    let max_iters = parse_u64(
        "max-iters",
        &flags
            .take("max-iters")
            .ok_or_else(|| CliError::Usage("--max-iters is required".into()))?,
    )?;
    let eta = match flags.take("eta") {
        Some(v) => parse_f64("eta", &v)?,
        None => source.eta.ok_or_else(|| {
            CliError::Usage("--eta is required (this source carries no default)".into())
        })?,
    };
    let theta1 = match flags.take("theta1") {
        Some(v) => parse_vector("theta1", &v)?,
        None => source.theta1.clone().ok_or_else(|| {
            CliError::Usage("--theta1 is required (this source carries no default)".into())
        })?,
    };
    let gap_tol = match flags.take("gap-tol") {
        Some(v) => parse_f64("gap-tol", &v)?,
        None => 0.0,
    };
    let stride = match flags.take("stride") {
        Some(v) => Some(parse_u64("stride", &v)?),
        None => None,
    };
    let enforce = flags.take_bool("enforce-safe-eta");
    let out = flags.take("out");
    flags.finish(0)?;

    let inst = &source.instance;
    let mut cfg = RunConfig::new(alg, eta, theta1, max_iters);
    cfg.gap_tol = gap_tol;
    if let Some(s) = stride {
        cfg.record_stride = s;
    }
    cfg.enforce_safe_eta = enforce;

    let bound = inst.safe_step_size();
    if !enforce && eta >= bound {
        eprintln!(
            "warning: eta {eta} is at or above the monotone-ascent bound {bound}; \
             ascent may be non-monotone"
        );
    }

    let traj = run_to_cli(inst, &cfg)?;

    println!(
        "instance: {} (K={}, d={})",
        source.label,
        inst.num_actions(),
        inst.feature_dim()
    );
    println!(
        "algorithm: {alg}, eta: {eta}, theta1: {}, max iters: {max_iters}",
        fmt_vector(&cfg.theta1)
    );
    let last = traj.final_sample();
    println!(
        "terminal: {} ({} steps, final t {})",
        traj.terminal,
        last.t - 1,
        last.t
    );
    println!(
        "final: value {}, gap {:e}, grad norm {:e}, theta {}",
        last.value,
        last.gap,
        last.grad_norm,
        fmt_vector(&last.theta)
    );
    match traj.limit_action {
        Some(a) => println!(
            "limit action: {} (probability {})",
            a + 1,
            traj.final_policy.prob(a)
        ),
        None => {
            let (top, p) = traj.final_policy.top();
            println!(
                "limit action: none (top action {} at probability {p})",
                top + 1
            );
            if let Some(group) = traj.tied_limit_support(inst) {
                let shown: Vec<String> = group.iter().map(|a| (a + 1).to_string()).collect();
                println!(
                    "limit support: actions {{{}}} (tied rewards)",
                    shown.join(", ")
                );
            }
        }
    }
    if alg == Algorithm::Npg {
        let dir = optim::npg_direction(inst);
        let star = inst.best_action();
        let rival = (0..inst.num_actions())
            .filter(|&a| a != star)
            .max_by(|&a, &b| dir.r_hat[a].partial_cmp(&dir.r_hat[b]).expect("finite"))
            .expect("at least two actions");
        let first = &traj.samples[0];
        let pol0 = inst
            .policy(&pg_orderlab::Params::new(first.theta.clone()))
            .expect("recorded theta is valid");
        println!(
            "probability ratio pi({})/pi({}): initial {:e}, final {:e}",
            star + 1,
            rival + 1,
            pol0.prob(star) / pol0.prob(rival),
            traj.final_policy.prob(star) / traj.final_policy.prob(rival)
        );
    }

    if let Some(path) = out {
        let body = render_trajectory(&traj);
        std::fs::write(&path, body).map_err(|e| CliError::Load(format!("{path}: {e}")))?;
        println!(
            "wrote trajectory ({} samples) to {path}",
            traj.samples.len()
        );
    }
    Ok(if traj.terminal == Terminal::NumericalFailure {
        2
    } else {
        0
    })
}

fn run_to_cli(inst: &BanditInstance, cfg: &RunConfig) -> Result<optim::Trajectory, CliError> {
    optim::run(inst, cfg).map_err(|e| CliError::Usage(e.to_string()))
}

fn render_trajectory(traj: &optim::Trajectory) -> String {
    let d = traj.final_sample().theta.len();
    let mut out = String::from("# t value gap grad_norm");
    for j in 0..d {
        let _ = write!(out, " theta_{j}");
    }
    out.push('\n');
    for s in &traj.samples {
        let _ = write!(out, "{} {} {} {}", s.t, s.value, s.gap, s.grad_norm);
        for x in s.theta.iter() {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// landscape

fn cmd_landscape(args: &[String]) -> Result<i32, CliError> {
    let mut flags = Flags::parse("landscape", args, &[])?;
    let source = take_source(&mut flags)?;
    let half_width = parse_f64(
        "half-width",
        &flags
            .take("half-width")
            .ok_or_else(|| CliError::Usage("--half-width is required".into()))?,
    )?;
    let grid = match flags.take("grid") {
        Some(v) => parse_u64("grid", &v)? as usize,
        None => 101,
    };
    let center = match flags.take("center") {
        Some(v) => parse_vector("center", &v)?,
        None => Vector::zeros(source.instance.feature_dim()),
    };
    let out = flags
        .take("out")
        .ok_or_else(|| CliError::Usage("--out is required".into()))?;
    flags.finish(0)?;

    let inst = &source.instance;
    if inst.feature_dim() < 2 {
        return Err(CliError::Usage(format!(
            "landscape needs a feature dimension of at least 2, this instance has {}",
            inst.feature_dim()
        )));
    }
    let grid_data = analysis::sample_landscape(inst, &center, half_width, grid, (0, 1))
        .map_err(|e| CliError::Usage(e.to_string()))?;

    // gnuplot-style nonuniform matrix: first row holds the axis-1
    // coordinates, each following row is one axis-2 coordinate and its
    // values
    let n = grid_data.axis1.len();
    let mut body =
        String::from("# expected-reward landscape; columns: theta_0 axis, rows: theta_1 axis\n");
    let _ = write!(body, "{n}");
    for x in grid_data.axis1.iter() {
        let _ = write!(body, " {x}");
    }
    body.push('\n');
    for j in 0..n {
        let _ = write!(body, "{}", grid_data.axis2[j]);
        for i in 0..n {
            let _ = write!(body, " {}", grid_data.values.get(i, j));
        }
        body.push('\n');
    }
    std::fs::write(&out, body).map_err(|e| CliError::Load(format!("{out}: {e}")))?;
    println!("wrote {n}x{n} landscape for {} to {out}", source.label);
    Ok(0)
}

// ---------------------------------------------------------------------------
// rate

fn cmd_rate(args: &[String]) -> Result<i32, CliError> {
    let mut flags = Flags::parse("rate", args, &[])?;
    let model: RateModel = flags
        .take("model")
        .ok_or_else(|| CliError::Usage("--model is required (exp or power)".into()))?
        .parse()
        .map_err(CliError::Usage)?;
    let window = match flags.take("window") {
        Some(v) => parse_f64("window", &v)?,
        None => 0.5,
    };
    let positional = flags.finish(1)?;
    let path = &positional[0];

    let points = read_trajectory_points(path)?;
    let fit = analysis::fit_rate_points(&points, model, window)
        .map_err(|e| CliError::Load(e.to_string()))?;
    println!("model: {}", fit.model);
    println!("slope: {}", fit.slope);
    println!("intercept: {}", fit.intercept);
    println!("r_squared: {}", fit.r_squared);
    println!("window: t in [{}, {}]", fit.window.0, fit.window.1);
    Ok(0)
}

/// Read `(t, gap)` pairs from a trajectory file (columns
/// `t value gap ...`, `#` comments).
fn read_trajectory_points(path: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(Path::new(path))
        .map_err(|e| CliError::Load(format!("{path}: {e}")))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 3 {
            return Err(CliError::Load(format!(
                "{path}: line {}: expected at least 3 columns (t value gap)",
                i + 1
            )));
        }
        let t = cols[0]
            .parse::<f64>()
            .map_err(|_| CliError::Load(format!("{path}: line {}: bad t '{}'", i + 1, cols[0])))?;
        let gap = cols[2].parse::<f64>().map_err(|_| {
            CliError::Load(format!("{path}: line {}: bad gap '{}'", i + 1, cols[2]))
        })?;
        points.push((t, gap));
    }
    Ok(points)
}

// ---------------------------------------------------------------------------
// examples / verify

fn cmd_examples(args: &[String]) -> Result<i32, CliError> {
    let flags = Flags::parse("examples", args, &[])?;
    flags.finish(0)?;
    for name in BUILTIN_NAMES {
        let named = instances::builtin(name).expect("builtin");
        let inst = &named.instance;
        let theta = named
            .theta1
            .as_ref()
            .map(fmt_vector)
            .unwrap_or_else(|| "-".into());
        let eta = match named.eta {
            Some(e) if named.eta_is_default => format!("{e} (repo default)"),
            Some(e) => format!("{e}"),
            None => "-".into(),
        };
        println!(
            "{name}: K={} d={} r={} theta1={theta} eta={eta}",
            inst.num_actions(),
            inst.feature_dim(),
            fmt_vector(inst.rewards()),
        );
    }
    Ok(0)
}

fn cmd_verify(args: &[String]) -> Result<i32, CliError> {
    let mut flags = Flags::parse("verify", args, &["fast"])?;
    let fast = flags.take_bool("fast");
    flags.finish(0)?;

    let threads = match std::env::var("PG_ORDERLAB_THREADS") {
        Ok(v) => v.parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(|| {
            CliError::Usage(format!(
                "PG_ORDERLAB_THREADS must be a positive integer, got '{v}'"
            ))
        })?,
        Err(_) => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    };

    let reports = verify::run_all(fast, threads);
    let mut passed = 0;
    let mut failed = 0;
    let mut skipped = 0;
    for rep in &reports {
        let tag = match rep.outcome {
            verify::Outcome::Pass => {
                passed += 1;
                "PASS"
            }
            verify::Outcome::Fail => {
                failed += 1;
                "FAIL"
            }
            verify::Outcome::Skipped => {
                skipped += 1;
                "SKIP"
            }
        };
        println!("{tag} {} ({}): {}", rep.id, rep.label, rep.detail);
    }
    println!("verify: {passed} passed, {failed} failed, {skipped} skipped");
    Ok(if failed > 0 { 3 } else { 0 })
}
