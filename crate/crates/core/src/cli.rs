//! Command-line front end. Exit codes: 0 success, 1 usage or model error,
//! 2 solver failure, 3 verified negative.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::exprdsl::{untagged, TaggedReal};
use crate::fixtures::{fixture_by_name, fixture_catalog};
use crate::gnep::{
    brute_force_gne, check_gnep, check_gnep_tagged, format_tagged, nonexistence_probe, parse_point, CheckConfig,
    GnepProblem,
};
use crate::io::{load_problem, to_canonical, ProblemFile};
use crate::normal::{closedness_probe, lsc_probe, t_of_tagged, ConeConfig, ProbeConfig, ProbeReport};
use crate::vi::{solve_vi, SolveOutcome, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;
pub const EXIT_NEGATIVE: i32 = 3;

pub const CLOSEDNESS_FAILURE: &str = "no certified point; T-closedness probe failed";

#[derive(Parser, Debug)]
#[command(
    name = "gnep",
    version,
    about = "Solve and verify jointly convex generalized Nash equilibrium problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the VI solver and check the certified point.
    Solve {
        path: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-player regret at a point, e.g. `--point 0.5,0.5` or `0.7,0.3:I`.
    Verify {
        path: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Print the D sets at a point.
    Inspect {
        path: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// 1-based; all players when omitted.
        #[arg(long)]
        player: Option<usize>,
    },
    /// Grid search for approximate equilibria (n <= 4).
    Bruteforce {
        path: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        resolution: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
    },
    /// Closedness, lower-semicontinuity or best-response probes.
    Probe {
        path: PathBuf,
        #[arg(long, value_enum)]
        kind: ProbeKind,
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long)]
        player: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        sequences: usize,
        #[arg(long, default_value_t = 20)]
        iterations: usize,
    },
    /// Write a built-in problem as a problem file.
    ExportFixture {
        /// Fixture name, or `list`.
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProbeKind {
    Closedness,
    Lsc,
    Nonexistence,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Cone(_) | Error::CertificateInvalid(_) => EXIT_FAILURE,
        _ => EXIT_USAGE,
    }
}

/// Runs one command; `args` excludes the program name.
pub fn run<S: AsRef<str>>(args: &[S], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let argv = std::iter::once("gnep").chain(args.iter().map(AsRef::as_ref));
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(out: &mut dyn Write, file: Option<&Path>, text: &str) -> Result<()> {
    match file {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn point_for(problem: &GnepProblem, s: &str) -> Result<Vec<TaggedReal>> {
    let x = parse_point(s).map_err(|m| Error::usage("cli", m))?;
    if x.len() != problem.n() {
        return Err(Error::usage(
            "cli",
            format!("point has {} coordinates, expected {}", x.len(), problem.n()),
        ));
    }
    Ok(x)
}

fn player_arg(problem: &GnepProblem, p: Option<usize>) -> Result<Vec<usize>> {
    match p {
        None => Ok((0..problem.num_players()).collect()),
        Some(k) if k >= 1 && k <= problem.num_players() => Ok(vec![k - 1]),
        Some(k) => Err(Error::usage(
            "cli",
            format!("player {k} out of range 1..={}", problem.num_players()),
        )),
    }
}

#[derive(Serialize)]
struct ProbeOut {
    kind: &'static str,
    player: usize,
    base: Vec<f64>,
    sequences: usize,
    checked: usize,
    violations: usize,
    passed: bool,
}

impl From<&ProbeReport> for ProbeOut {
    fn from(r: &ProbeReport) -> Self {
        ProbeOut {
            kind: r.kind,
            player: r.player + 1,
            base: r.base.clone(),
            sequences: r.sequences,
            checked: r.checked,
            violations: r.violations.len(),
            passed: r.passed,
        }
    }
}

/// Closedness probes with flipped rival tags around a failed solve.
fn failure_probes(problem: &GnepProblem, best: &[f64], seed: u64) -> Result<Vec<ProbeReport>> {
    let (lo, hi) = problem.set.bounding_box()?;
    let mut bases = vec![best.to_vec(), lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bbox = (lo, hi);
    for _ in 0..3 {
        bases.push(problem.set.sample(&bbox, &mut rng, 64)?);
    }
    let cfg = ProbeConfig {
        flip_tags: true,
        sequences: 10,
        seed,
        ..ProbeConfig::default()
    };
    let mut reports = Vec::new();
    for b in bases.iter().filter(|b| !b.is_empty()) {
        for p in 0..problem.num_players() {
            reports.push(closedness_probe(
                problem,
                p,
                &untagged(b),
                &ConeConfig::default(),
                &cfg,
            )?);
        }
    }
    Ok(reports)
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Solve {
            path,
            seed,
            max_iters,
            tol,
            out: file,
        } => {
            let problem = load_problem(&path)?;
            let mut cfg = SolverConfig {
                seed,
                residual_tol: problem.tolerances.residual_tol,
                ..SolverConfig::default()
            };
            if let Some(m) = max_iters {
                cfg.max_iters = m;
            }
            if let Some(t) = tol {
                cfg.residual_tol = t;
            }
            let eps = problem.tolerances.eps;
            match solve_vi(&problem, &cfg)? {
                SolveOutcome::Certified(c) => {
                    let regret = check_gnep(&problem, &c.x, &CheckConfig::default())?;
                    let ok = regret.max_regret <= eps;
                    let report = json!({
                        "problem": problem.name,
                        "status": if ok { "certified" } else { "certificate_rejected" },
                        "message": if ok { "certified equilibrium" } else { "certified point fails the regret check" },
                        "seed": seed,
                        "cone_seed": cfg.cone.seed,
                        "certificate": c,
                        "regret": regret,
                        "eps": eps,
                    });
                    emit(out, file.as_deref(), &to_canonical(&report))?;
                    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
                }
                SolveOutcome::Failure(f) => {
                    let probes = if problem.is_tagged() {
                        failure_probes(&problem, &f.best_x, seed)?
                    } else {
                        Vec::new()
                    };
                    let probe_failed = probes.iter().any(|p| !p.passed);
                    let message = if probe_failed {
                        CLOSEDNESS_FAILURE
                    } else {
                        "no certified point"
                    };
                    let report = json!({
                        "problem": problem.name,
                        "status": "failure",
                        "message": message,
                        "seed": seed,
                        "cone_seed": cfg.cone.seed,
                        "failure": f,
                        "probes": probes.iter().map(ProbeOut::from).collect::<Vec<_>>(),
                    });
                    emit(out, file.as_deref(), &to_canonical(&report))?;
                    Ok(EXIT_FAILURE)
                }
            }
        }
        Command::Verify { path, point, eps, json } => {
            let problem = load_problem(&path)?;
            let x = point_for(&problem, &point)?;
            let eps = eps.unwrap_or(problem.tolerances.eps);
            let report = check_gnep_tagged(&problem, &x, &CheckConfig::default())?;
            let ok = report.is_eps_gne(eps);
            if json {
                let v = json!({"point": format_tagged(&x), "eps": eps, "equilibrium": ok, "report": report});
                emit(out, None, &to_canonical(&v))?;
            } else {
                emit(out, None, &report.table())?;
                emit(
                    out,
                    None,
                    &format!(
                        "{} at eps {eps:e}\n",
                        if ok { "equilibrium" } else { "not an equilibrium" }
                    ),
                )?;
            }
            Ok(if ok { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Inspect { path, point, player } => {
            let problem = load_problem(&path)?;
            let x = point_for(&problem, &point)?;
            let values: Vec<f64> = x.iter().map(|t| t.value).collect();
            if !problem.set.contains(&values, 1e-7)? {
                return Err(Error::usage("cli", "point is not in the shared set"));
            }
            let players = player_arg(&problem, player)?;
            let d = t_of_tagged(&problem, &x, &ConeConfig::default())?;
            let blocks: Vec<_> = players
                .iter()
                .map(|&p| {
                    json!({
                        "player": p + 1,
                        "full_ball": d[p].full_ball,
                        "generators": d[p].generators,
                    })
                })
                .collect();
            emit(
                out,
                None,
                &to_canonical(&json!({"point": format_tagged(&x), "d": blocks})),
            )?;
            Ok(EXIT_OK)
        }
        Command::Bruteforce { path, resolution, eps } => {
            if !(resolution > 0.0) || !(eps >= 0.0) {
                return Err(Error::usage("cli", "resolution must be positive and eps nonnegative"));
            }
            let problem = load_problem(&path)?;
            let r = brute_force_gne(&problem, resolution, eps)?;
            emit(out, None, &to_canonical(&r))?;
            Ok(if r.equilibria.is_empty() {
                EXIT_NEGATIVE
            } else {
                EXIT_OK
            })
        }
        Command::Probe {
            path,
            kind,
            point,
            player,
            seed,
            sequences,
            iterations,
        } => {
            let problem = load_problem(&path)?;
            if let ProbeKind::Nonexistence = kind {
                let r = nonexistence_probe(&problem, iterations)?;
                emit(out, None, &to_canonical(&r))?;
                return Ok(if r.fixed_point_exists { EXIT_OK } else { EXIT_NEGATIVE });
            }
            let point = point.ok_or_else(|| Error::usage("cli", "--point is required for this probe"))?;
            let x = point_for(&problem, &point)?;
            let cfg = ProbeConfig {
                seed,
                sequences,
                ..ProbeConfig::default()
            };
            let mut reports = Vec::new();
            for p in player_arg(&problem, player)? {
                reports.push(match kind {
                    ProbeKind::Closedness => closedness_probe(&problem, p, &x, &ConeConfig::default(), &cfg)?,
                    _ => lsc_probe(&problem, p, &x, &cfg)?,
                });
            }
            let passed = reports.iter().all(|r| r.passed);
            let v: Vec<ProbeOut> = reports.iter().map(ProbeOut::from).collect();
            emit(out, None, &to_canonical(&v))?;
            Ok(if passed { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::ExportFixture { name, out: file } => {
            if name == "list" {
                let names: String = fixture_catalog()
                    .iter()
                    .map(|f| format!("{:<26} {}\n", f.name, f.summary))
                    .collect();
                emit(out, None, &names)?;
                return Ok(EXIT_OK);
            }
            let f = fixture_by_name(&name).ok_or_else(|| Error::usage("cli", format!("unknown fixture '{name}'")))?;
            emit(
                out,
                file.as_deref(),
                &ProblemFile::from_problem(&f.problem).to_canonical_json(),
            )?;
            Ok(EXIT_OK)
        }
    }
}

/// Sizes the global worker pool from `GNEP_THREADS`.
pub fn init_threads() {
    if let Some(n) = std::env::var("GNEP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}
