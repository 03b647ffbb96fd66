//! Acceptance criteria 1-10. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gnep::cli;
use gnep::exprdsl::untagged;
use gnep::fixtures::{self, fixture_catalog, random_convex_quadratic};
use gnep::geometry::{BlockStructure, ConvexBody};
use gnep::gnep::{brute_force_gne, check_gnep, nonexistence_probe, CheckConfig};
use gnep::io::ProblemFile;
use gnep::linalg::{dot, norm, norm_inf, sub};
use gnep::losses::PlayerView;
use gnep::normal::{
    closedness_probe, cone_at, lsc_probe, sample_strict_sublevel, t_of, ConeConfig, ConeRoute, ProbeConfig,
    SublevelQuery,
};
use gnep::vi::{solve_vi, vi_residual, SolveOutcome, SolverConfig};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_sign_switch() -> Outcome {
    let start = Instant::now();
    let p = fixtures::e1_bifunction().problem;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut on_branch = 0;
    for k in 0..100 {
        let x: f64 = rng.gen_range(-2.0..=2.0);
        let y: f64 = if k % 4 == 0 { 1.0 } else { rng.gen_range(-2.0..=2.0) };
        on_branch += usize::from(y == 1.0);
        let profile = [x, y];
        let view = PlayerView::new(&p.losses[0], &p.blocks, 0, &profile);
        let q = SublevelQuery::new(view.clone(), &[x], true).map_err(|e| e.to_string())?;
        // L = (-inf, x) off the branch, (x, inf) on it
        for d in [1e-3, 0.5, 1.9] {
            let below = q.contains(&[x - d]).map_err(|e| e.to_string())?;
            let above = q.contains(&[x + d]).map_err(|e| e.to_string())?;
            ensure(below == (y != 1.0) && above == (y == 1.0), || {
                format!("sublevel membership wrong at ({x}, {y}), offset {d}")
            })?;
        }
        ensure(!q.contains(&[x]).map_err(|e| e.to_string())?, || {
            format!("base in own strict sublevel at ({x},{y})")
        })?;
        let cone = cone_at(&view, &[x], p.own_domain(0), &ConeConfig::default()).map_err(|e| e.to_string())?;
        let expect = if y == 1.0 { -1.0 } else { 1.0 };
        ensure(!cone.full_space && cone.generators == vec![vec![expect]], || {
            format!("cone at ({x}, {y}) is {:?}", cone.generators)
        })?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 1.0, || format!("took {elapsed:.3} s"))?;
    Ok(format!("100 points ({on_branch} on y = 1), {elapsed:.3} s"))
}

fn c2_probes() -> Outcome {
    let cfg = ProbeConfig::default();
    let cc = ConeConfig::default();
    let switch = fixtures::e1_bifunction().problem;
    let base = untagged(&[0.0, 1.0]);
    let lsc = lsc_probe(&switch, 0, &base, &cfg).map_err(|e| e.to_string())?;
    let closed = closedness_probe(&switch, 0, &base, &cc, &cfg).map_err(|e| e.to_string())?;
    ensure(!lsc.passed && !closed.passed, || {
        "sign-switching probes did not fail at (0,1)".into()
    })?;
    let mut passes = 0;
    for (f, bases) in [
        (
            fixtures::product_paraboloid(),
            vec![[0.5, 0.5], [0.0, 1.0], [-0.3, 0.2]],
        ),
        (fixtures::quadratic_nep(), vec![[0.3, 0.6], [0.0, 0.0], [1.0, 0.5]]),
    ] {
        for b in bases {
            for player in 0..f.problem.num_players() {
                let base = untagged(&b);
                let l = lsc_probe(&f.problem, player, &base, &cfg).map_err(|e| e.to_string())?;
                let c = closedness_probe(&f.problem, player, &base, &cc, &cfg).map_err(|e| e.to_string())?;
                ensure(l.passed && c.passed, || {
                    format!("{} probe failed at {b:?} for player {}", f.name, player + 1)
                })?;
                ensure(l.sequences == 50 && c.sequences == 50, || "wrong sequence count".into())?;
                passes += 2;
            }
        }
    }
    Ok(format!(
        "sign switch at (0,1): lsc {} / closedness {} violations; {passes} probes passed on smooth fixtures",
        lsc.violations.len(),
        closed.violations.len()
    ))
}

fn c3_empty_sublevel() -> Outcome {
    let p = fixtures::product_paraboloid().problem;
    let x = [0.0, 1.0];
    let d = t_of(&p, &x, &ConeConfig::default()).map_err(|e| e.to_string())?;
    ensure(d[0].full_ball && d[0].contains_zero(), || format!("D_1 = {:?}", d[0]))?;
    let r = vi_residual(&p, &x, &[0.0, 0.0], &ConeConfig::default()).map_err(|e| e.to_string())?;
    ensure(r == 0.0, || format!("residual {r}"))?;
    Ok("D_1(0,1) is the unit ball, residual of w = 0 is exactly 0".into())
}

fn c4_d_jump() -> Outcome {
    let p = fixtures::two_player_nonclosed_t().problem;
    let pts: Vec<[f64; 2]> = vec![
        [0.0, 0.0],
        [0.5, 0.5],
        [1.5, 0.25],
        [2.0, 2.0],
        [0.999, 1.001],
        [1.0, 1.0],
        [1.0, 0.0],
        [0.0, 1.0],
        [1.0, 2.0],
        [2.0, 1.0],
        [0.3, 1.0],
        [1.0, 0.7],
        [1.0, 1.5],
        [1.25, 1.0],
        [0.1, 1.9],
        [1.7, 0.4],
        [1.0 + 1e-9, 1.0],
        [1.0, 1.0 - 1e-9],
        [0.75, 1.25],
        [1.0, 0.999999],
    ];
    for x in &pts {
        let d = t_of(&p, x, &ConeConfig::default()).map_err(|e| e.to_string())?;
        for v in 0..2 {
            let rival = x[1 - v];
            let expect = if rival == 1.0 { -1.0 } else { 1.0 };
            ensure(!d[v].full_ball && d[v].generators == vec![vec![expect]], || {
                format!("D_{} at {x:?} = {:?}", v + 1, d[v].generators)
            })?;
        }
    }
    Ok(format!("{} points", pts.len()))
}

fn c5_soundness() -> Outcome {
    let start = Instant::now();
    let check = CheckConfig {
        slice_grid: Some(129),
        ..CheckConfig::default()
    };
    let (mut certified, mut worst) = (0, 0.0f64);
    for seed in 0..25 {
        let p = random_convex_quadratic(seed);
        let cfg = SolverConfig {
            seed,
            ..SolverConfig::default()
        };
        if let SolveOutcome::Certified(c) = solve_vi(&p, &cfg).map_err(|e| e.to_string())? {
            certified += 1;
            let r = check_gnep(&p, &c.x, &check).map_err(|e| e.to_string())?;
            worst = worst.max(r.max_regret);
            ensure(r.max_regret <= 1e-4, || {
                format!("instance {seed}: regret {:e}", r.max_regret)
            })?;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 60.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!(
        "{certified}/25 certified, worst regret {worst:.2e}, {elapsed:.1} s"
    ))
}

fn c6_existence() -> Outcome {
    let mut notes = Vec::new();
    for f in [fixtures::quadratic_nep(), fixtures::shared_resource()] {
        let c = match solve_vi(&f.problem, &SolverConfig::default()).map_err(|e| e.to_string())? {
            SolveOutcome::Certified(c) => c,
            SolveOutcome::Failure(r) => return Err(format!("{}: no certificate ({:e})", f.name, r.best_residual)),
        };
        ensure(c.residual >= -1e-6, || format!("{}: residual {}", f.name, c.residual))?;
        let bf = brute_force_gne(&f.problem, 0.01, 1e-3).map_err(|e| e.to_string())?;
        let nearest = bf
            .equilibria
            .iter()
            .map(|e| norm_inf(&sub(e, &c.x)))
            .fold(f64::INFINITY, f64::min);
        ensure(nearest <= 0.01 + 1e-12, || {
            format!("{}: certified {:?} is {nearest} from the grid equilibria", f.name, c.x)
        })?;
        notes.push(format!("{} x = {:?} (grid distance {nearest:.1e})", f.name, c.x));
    }
    Ok(notes.join("; "))
}

fn c7_nonexistence() -> Outcome {
    let f = fixtures::rational_counterexample();
    let bf = brute_force_gne(&f.problem, 0.01, 1e-3).map_err(|e| e.to_string())?;
    ensure(bf.equilibria.is_empty(), || {
        format!("grid equilibria {:?}", bf.equilibria)
    })?;
    let probe = nonexistence_probe(&f.problem, 20).map_err(|e| e.to_string())?;
    ensure(!probe.fixed_point_exists, || {
        format!("fixed points {:?}", probe.fixed_points)
    })?;
    let alternates = probe.trace.iter().any(|s| s.contains(":Q")) && probe.trace.iter().any(|s| s.contains(":I"));
    ensure(alternates, || {
        format!("trace without Q/I alternation: {:?}", probe.trace)
    })?;
    ensure(
        probe.cases.len() == 4 && probe.cases.iter().all(|c| !c.consistent),
        || "case analysis incomplete".into(),
    )?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("rational.json");
    std::fs::write(&path, ProblemFile::from_problem(&f.problem).to_canonical_json()).map_err(|e| e.to_string())?;
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(&["solve", path.to_str().unwrap()], &mut out, &mut err);
    let text = String::from_utf8_lossy(&out);
    ensure(code == cli::EXIT_FAILURE, || format!("solve exited {code}"))?;
    ensure(text.contains(cli::CLOSEDNESS_FAILURE), || {
        "missing closedness message".into()
    })?;
    Ok(format!(
        "{} grid points, no equilibrium; {} starts, no fixed point; solve exit {code}",
        bf.feasible_points, probe.starts
    ))
}

fn c8_cone_invariants() -> Outcome {
    let mut checked = 0;
    let mut interior = 0;
    for f in fixture_catalog() {
        let p = &f.problem;
        let bbox = p.set.bounding_box().map_err(|e| e.to_string())?;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = ConeConfig {
                seed,
                ..ConeConfig::default()
            };
            let mut points = vec![p.set.sample(&bbox, &mut rng, 64).map_err(|e| e.to_string())?];
            points.push(p.set.sample(&bbox, &mut rng, 64).map_err(|e| e.to_string())?);
            points.push(bbox.0.clone());
            for x in points {
                for player in 0..p.num_players() {
                    let view = PlayerView::new(&p.losses[player], &p.blocks, player, &x);
                    let own = p.blocks.own(player, &x).to_vec();
                    let cone =
                        cone_at(&view, &own, p.own_domain(player), &cfg).map_err(|e| format!("{}: {e}", f.name))?;
                    checked += 1;
                    ensure(!cone.generators.is_empty(), || {
                        format!("{}: empty cone at {x:?}", f.name)
                    })?;
                    ensure(cone.generators.iter().all(|g| (norm(g) - 1.0).abs() < 1e-9), || {
                        format!("{}: non-unit generator at {x:?}", f.name)
                    })?;
                    if cone.route == ConeRoute::EmptySublevel {
                        continue;
                    }
                    interior += 1;
                    ensure(!cone.has_antipodal_pair(1e-6), || {
                        format!("{}: antipodal generators at {x:?}", f.name)
                    })?;
                    let q = SublevelQuery::new(view.clone(), &own, true).map_err(|e| e.to_string())?;
                    let pts =
                        sample_strict_sublevel(&q, p.own_domain(player), 64, seed ^ 0xA5).map_err(|e| e.to_string())?;
                    for z in &pts {
                        for g in &cone.generators {
                            let v = dot(g, &sub(z, &own));
                            ensure(v < 0.0, || {
                                format!("{}: <w, z - x> = {v:e} at {x:?}, z = {z:?}", f.name)
                            })?;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{checked} cones ({interior} with nonempty sublevel)"))
}

fn random_body(rng: &mut ChaCha8Rng, n: usize) -> ConvexBody {
    let mut r = |a: f64, b: f64| rng.gen_range(a..b);
    let lower: Vec<f64> = (0..n).map(|_| -r(0.5, 2.0)).collect();
    let upper: Vec<f64> = (0..n).map(|_| r(0.5, 2.0)).collect();
    let boxed = ConvexBody::new_box(lower.clone(), upper.clone()).unwrap();
    let cuts = |r: &mut dyn FnMut(f64, f64) -> f64| {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for _ in 0..3 {
            a.push((0..n).map(|_| r(-1.0, 1.0)).collect::<Vec<f64>>());
            b.push(r(0.2, 1.0));
        }
        (a, b)
    };
    match r(0.0, 5.0) as usize {
        0 => boxed,
        1 => ConvexBody::new_ball((0..n).map(|_| r(-0.5, 0.5)).collect(), r(0.5, 1.5)).unwrap(),
        2 => {
            let (mut a, mut b) = cuts(&mut r);
            for i in 0..n {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                a.push(row.clone());
                b.push(upper[i]);
                row[i] = -1.0;
                a.push(row);
                b.push(-lower[i]);
            }
            ConvexBody::new_hpolytope(a, b, n).unwrap()
        }
        3 => ConvexBody::new_intersection(vec![
            boxed,
            ConvexBody::new_ball((0..n).map(|_| r(-0.3, 0.3)).collect(), r(0.8, 1.5)).unwrap(),
        ])
        .unwrap(),
        _ => {
            let (a, b) = cuts(&mut r);
            ConvexBody::new_intersection(vec![boxed, ConvexBody::new_hpolytope(a, b, n).unwrap()]).unwrap()
        }
    }
}

/// Closed-form linear minimum where one exists.
fn closed_form_linmin(body: &ConvexBody, c: &[f64]) -> Option<f64> {
    match body {
        ConvexBody::Box { lower, upper } => Some(
            c.iter()
                .zip(lower.iter().zip(upper))
                .map(|(ci, (l, u))| (ci * l).min(ci * u))
                .sum(),
        ),
        ConvexBody::Ball { center, radius } => Some(dot(c, center) - radius * norm(c)),
        _ => None,
    }
}

fn closed_form_projection(body: &ConvexBody, z: &[f64]) -> Option<Vec<f64>> {
    match body {
        ConvexBody::Box { lower, upper } => Some(
            z.iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
        ),
        ConvexBody::Ball { center, radius } => {
            let d = sub(z, center);
            let m = norm(&d);
            Some(if m <= *radius {
                z.to_vec()
            } else {
                center.iter().zip(&d).map(|(c, di)| c + di * radius / m).collect()
            })
        }
        _ => None,
    }
}

fn c9_geometry() -> Outcome {
    let tol = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_proj = 0.0f64;
    let mut worst_lin = 0.0f64;
    for case in 0..1000 {
        let n = rng.gen_range(1..=4);
        let body = random_body(&mut rng, n);
        let bbox = body.bounding_box().map_err(|e| e.to_string())?;
        let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let p = body.project(&z).map_err(|e| format!("case {case}: {e}"))?;
        ensure(body.violation(&p) <= tol, || {
            format!("case {case}: projection infeasible")
        })?;
        if let Some(e) = closed_form_projection(&body, &z) {
            ensure(norm_inf(&sub(&e, &p)) <= tol, || {
                format!("case {case}: projection {p:?} vs {e:?}")
            })?;
        }
        // <z - p, y - p> <= 0 for all y: the worst y is a linear minimizer
        let r = sub(&z, &p);
        let (y, _) = body
            .linmin(&r.iter().map(|v| -v).collect::<Vec<_>>())
            .map_err(|e| e.to_string())?;
        let gap = dot(&r, &sub(&y, &p));
        worst_proj = worst_proj.max(gap);
        ensure(gap <= tol * (1.0 + norm(&r)), || {
            format!("case {case}: projection VI gap {gap:e}")
        })?;
        for _ in 0..20 {
            let s = body.sample(&bbox, &mut rng, 64).map_err(|e| e.to_string())?;
            if body.violation(&s) <= 0.0 {
                let g = dot(&r, &sub(&s, &p));
                ensure(g <= tol * (1.0 + norm(&r)), || {
                    format!("case {case}: sampled VI gap {g:e}")
                })?;
            }
        }

        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (y, v) = body.linmin(&c).map_err(|e| e.to_string())?;
        ensure(body.violation(&y) <= tol, || {
            format!("case {case}: linmin point infeasible")
        })?;
        ensure((dot(&c, &y) - v).abs() <= tol, || {
            format!("case {case}: linmin value mismatch")
        })?;
        if let Some(e) = closed_form_linmin(&body, &c) {
            worst_lin = worst_lin.max((e - v).abs());
            ensure((e - v).abs() <= tol, || format!("case {case}: linmin {v} vs {e}"))?;
        }
        for _ in 0..20 {
            let s = body.sample(&bbox, &mut rng, 64).map_err(|e| e.to_string())?;
            if body.violation(&s) <= 0.0 {
                ensure(dot(&c, &s) >= v - tol, || format!("case {case}: sample beats linmin"))?;
            }
        }
    }

    let mut slice_checks = 0;
    for case in 0..1000 {
        let n = rng.gen_range(2..=4);
        let body = random_body(&mut rng, n);
        let split = rng.gen_range(1..n);
        let blocks = BlockStructure::new(vec![split, n - split]).unwrap();
        let bbox = body.bounding_box().map_err(|e| e.to_string())?;
        let x = body.sample(&bbox, &mut rng, 64).map_err(|e| e.to_string())?;
        let player = rng.gen_range(0..2);
        let rivals = blocks.rivals(player, &x);
        let slice = body.slice(&blocks, player, &rivals).map_err(|e| e.to_string())?;
        let own = blocks.own(player, &x).to_vec();
        ensure(slice.violation(&own) <= tol, || {
            format!("slice case {case}: own block not in slice")
        })?;
        let z: Vec<f64> = (0..own.len()).map(|_| rng.gen_range(-2.5..2.5)).collect();
        let full = blocks.assemble(player, &z, &rivals);
        let (a, b) = (slice.violation(&z), body.violation(&full));
        ensure((a <= 0.0) == (b <= 0.0) || a.max(b) < 1e-12, || {
            format!("slice case {case}: membership {a:e} vs {b:e}")
        })?;
        slice_checks += 1;
    }
    Ok(format!(
        "1000 projections (worst VI gap {worst_proj:.1e}), 1000 linmins (worst closed-form error {worst_lin:.1e}), {slice_checks} slices"
    ))
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = 0;
    for name in ["shared_resource", "quadratic_nep", "e1_bifunction"] {
        let f = fixtures::fixture_by_name(name).unwrap();
        let path = dir.path().join(format!("{name}.json"));
        std::fs::write(&path, ProblemFile::from_problem(&f.problem).to_canonical_json()).map_err(|e| e.to_string())?;
        let p = path.to_str().unwrap().to_string();
        let commands: Vec<Vec<&str>> = vec![
            vec!["solve", &p, "--seed", "5"],
            vec!["verify", &p, "--point", "0.5,0.5", "--json"],
            vec!["inspect", &p, "--point", "0.25,0.5"],
            vec!["bruteforce", &p, "--resolution", "0.1"],
            vec!["probe", &p, "--kind", "closedness", "--point", "0.5,0.5", "--seed", "3"],
        ];
        for args in commands {
            let once = || {
                let (mut out, mut err) = (Vec::new(), Vec::new());
                let code = cli::run(&args, &mut out, &mut err);
                (code, out, err)
            };
            let (a, b) = (once(), once());
            ensure(a == b, || format!("{name}: {:?} differs between runs", args[0]))?;
            runs += 1;
        }
    }
    let bin = env!("CARGO_BIN_EXE_gnep");
    let path = dir.path().join("shared_resource.json");
    let spawn = || {
        std::process::Command::new(bin)
            .args(["solve", path.to_str().unwrap()])
            .output()
    };
    let (a, b) = (spawn().map_err(|e| e.to_string())?, spawn().map_err(|e| e.to_string())?);
    ensure(a.stdout == b.stdout && a.status.code() == Some(0), || {
        "binary output differs".into()
    })?;
    Ok(format!(
        "{runs} in-process command pairs and one process pair byte-identical"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("sign-switching example reproduction", c1_sign_switch),
        ("non-lsc / non-closed detection", c2_probes),
        ("empty-sublevel convention", c3_empty_sublevel),
        ("D-jump reproduction", c4_d_jump),
        ("soundness on random quadratic games", c5_soundness),
        ("existence on control problems", c6_existence),
        ("nonexistence on the tagged counterexample", c7_nonexistence),
        ("cone invariants", c8_cone_invariants),
        ("geometry oracles", c9_geometry),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
