//! The variational inequality over the shared set: find `x` and `w in T(x)`
//! with `<w, y - x> >= 0` for every `y` in the set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, GeometryError};
use crate::gnep::GnepProblem;
use crate::linalg::{axpy, dot, norm, norm_inf, solve_dense, sub};
use crate::losses::PlayerView;
use crate::lp::{LinearProgram, LpOutcome, Relation, VarKind};
use crate::normal::{hull_distance, t_of, ConeConfig, DSet};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub alpha0: f64,
    pub decay: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub grid_dim_cap: usize,
    pub grid_per_axis: usize,
    pub grid_point_cap: usize,
    /// Iterations between Newton polishing attempts; 0 disables polishing.
    pub polish_every: usize,
    /// Restart after this many iterations without residual improvement.
    pub stall_window: usize,
    pub cone: ConeConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha0: 0.1,
            decay: 0.01,
            max_iters: 5000,
            residual_tol: 1e-6,
            restarts: 10,
            seed: 0,
            grid_dim_cap: 4,
            grid_per_axis: 41,
            grid_point_cap: 4096,
            polish_every: 250,
            stall_window: 600,
            cone: ConeConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0) || !(self.residual_tol > 0.0) || !(self.decay >= 0.0) {
            return Err(Error::usage(
                "vi",
                "alpha0 and residual_tol must be positive, decay nonnegative",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Selection {
    pub w: Vec<f64>,
    /// Per-player convex weights over that player's generator list
    /// (for full-ball blocks: over the signed axes and cut directions used).
    pub weights: Vec<Vec<f64>>,
    pub residual: f64,
    pub cuts: usize,
}

struct Block {
    start: usize,
    gens: Vec<Vec<f64>>,
    ball: bool,
}

fn blocks_of(dsets: &[DSet]) -> Vec<Block> {
    let mut start = 0;
    dsets
        .iter()
        .map(|d| {
            let b = Block {
                start,
                gens: d.generators.clone(),
                ball: d.full_ball,
            };
            start += d.dim;
            b
        })
        .collect()
}

fn assemble_w(blocks: &[Block], n: usize, lambda: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut w = vec![0.0; n];
    let mut weights = Vec::with_capacity(blocks.len());
    let mut k = 0;
    for b in blocks {
        let mut wt = Vec::with_capacity(b.gens.len());
        for g in &b.gens {
            let l = lambda[k].max(0.0);
            for (i, gi) in g.iter().enumerate() {
                w[b.start + i] += l * gi;
            }
            wt.push(l);
            k += 1;
        }
        weights.push(wt);
    }
    (w, weights)
}

/// Chooses `w` in the product of the `D` sets maximizing the certified
/// residual `min_y <w, y - x>`, by a cutting-plane LP over convex weights.
pub fn select_w(
    dsets: &[DSet],
    x: &[f64],
    set: &ConvexBody,
    residual_tol: f64,
) -> std::result::Result<Selection, GeometryError> {
    let n = x.len();
    let mut blocks = blocks_of(dsets);
    let mut cuts: Vec<Vec<f64>> = vec![vec![0.0; n]];
    let mut best: Option<Selection> = None;
    for _ in 0..100 {
        let nv: usize = blocks.iter().map(|b| b.gens.len()).sum::<usize>() + 1;
        let mut obj = vec![0.0; nv];
        obj[nv - 1] = 1.0;
        let mut kinds = vec![VarKind::NonNegative; nv];
        kinds[nv - 1] = VarKind::Free;
        let mut lp = LinearProgram::new(obj, kinds);
        let mut k = 0;
        for b in &blocks {
            let mut row = vec![0.0; nv];
            row[k..k + b.gens.len()].iter_mut().for_each(|v| *v = 1.0);
            lp.add_row(row, if b.ball { Relation::Le } else { Relation::Eq }, 1.0);
            k += b.gens.len();
        }
        for d in &cuts {
            let mut row = vec![0.0; nv];
            let mut k = 0;
            for b in &blocks {
                for g in &b.gens {
                    row[k] = -dot(g, &d[b.start..b.start + g.len()]);
                    k += 1;
                }
            }
            row[nv - 1] = 1.0;
            lp.add_row(row, Relation::Le, 0.0);
        }
        let (lambda, upper) = match lp.maximize() {
            LpOutcome::Optimal { x, value } => (x, value),
            _ => break,
        };
        let (w, weights) = assemble_w(&blocks, n, &lambda);
        let (y, v) = set.linmin(&w)?;
        let residual = v - dot(&w, x);
        if best.as_ref().is_none_or(|b| residual > b.residual) {
            best = Some(Selection {
                w: w.clone(),
                weights,
                residual,
                cuts: cuts.len(),
            });
        }
        let r = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.residual);
        if upper - r <= residual_tol / 10.0 {
            break;
        }
        let d = sub(&y, x);
        if cuts.iter().any(|c| norm_inf(&sub(c, &d)) <= 1e-14) {
            break;
        }
        for b in blocks.iter_mut().filter(|b| b.ball) {
            let dim = b.gens[0].len();
            let part = &d[b.start..b.start + dim];
            let m = norm(part);
            if m > 1e-12 {
                let u: Vec<f64> = part.iter().map(|v| v / m).collect();
                if b.gens.iter().all(|g| norm_inf(&sub(g, &u)) > 1e-12) {
                    b.gens.push(u);
                }
            }
        }
        cuts.push(d);
    }
    Ok(best.unwrap_or_else(|| {
        let (w, weights) = assemble_w(&blocks, n, &vec![0.0; blocks.iter().map(|b| b.gens.len()).sum()]);
        Selection {
            w,
            weights,
            residual: f64::NEG_INFINITY,
            cuts: cuts.len(),
        }
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateSource {
    Iteration,
    Polish,
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViCertificate {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub residual: f64,
    pub weights: Vec<Vec<f64>>,
    pub full_ball: Vec<bool>,
    pub iterations: usize,
    pub restart: usize,
    pub seed: u64,
    pub source: CertificateSource,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureReport {
    pub best_residual: f64,
    pub best_x: Vec<f64>,
    pub restarts: usize,
    pub iterations: usize,
    /// Best residual of each restart, then of the grid scan.
    pub residual_trace: Vec<f64>,
    pub tag_rejections: usize,
    pub grid_points: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum SolveOutcome {
    Certified(ViCertificate),
    Failure(FailureReport),
}

/// `min_y <w, y - x>` over the shared set, after checking `x` lies in the
/// set and `w` lies in freshly computed `T(x)`.
pub fn vi_residual(problem: &GnepProblem, x: &[f64], w: &[f64], cone: &ConeConfig) -> Result<f64> {
    let n = problem.n();
    if x.len() != n || w.len() != n {
        return Err(Error::usage("vi", format!("expected {n} coordinates")));
    }
    if !problem.set.contains(x, 1e-7)? {
        return Err(Error::usage("vi", "point is not in the shared set"));
    }
    let dsets = t_of(problem, x, cone)?;
    let mut start = 0;
    for (p, d) in dsets.iter().enumerate() {
        let part = &w[start..start + d.dim];
        start += d.dim;
        let ok = if d.full_ball {
            norm(part) <= 1.0 + 1e-12
        } else {
            hull_distance(&d.generators, part).is_some_and(|r| r <= 1e-9)
        };
        if !ok {
            return Err(Error::CertificateInvalid(format!(
                "block {} of w is not in D_{}(x)",
                p + 1,
                p + 1
            )));
        }
    }
    Ok(residual_value(&problem.set, x, w)?)
}

fn residual_value(set: &ConvexBody, x: &[f64], w: &[f64]) -> std::result::Result<f64, GeometryError> {
    Ok(set.linmin(w)?.1 - dot(w, x))
}

struct Attempt {
    selection: Selection,
    full_ball: Vec<bool>,
}

fn attempt(problem: &GnepProblem, x: &[f64], cfg: &SolverConfig) -> Result<Attempt> {
    let dsets = t_of(problem, x, &cfg.cone)?;
    let selection = select_w(&dsets, x, &problem.set, cfg.residual_tol)?;
    Ok(Attempt {
        selection,
        full_ball: dsets.iter().map(|d| d.full_ball).collect(),
    })
}

struct Search<'a> {
    problem: &'a GnepProblem,
    cfg: &'a SolverConfig,
    best_residual: f64,
    best_x: Vec<f64>,
    tag_rejections: usize,
}

impl Search<'_> {
    /// Certifies `x` or records it as the best failure so far.
    fn certify(
        &mut self,
        x: &[f64],
        iterations: usize,
        restart: usize,
        source: CertificateSource,
    ) -> Result<Option<ViCertificate>> {
        let a = attempt(self.problem, x, self.cfg)?;
        let r = a.selection.residual;
        if r >= -self.cfg.residual_tol {
            if self.problem.tag_consistent_at_optimum(x, &a.full_ball) {
                let residual = residual_value(&self.problem.set, x, &a.selection.w)?;
                return Ok(Some(ViCertificate {
                    x: x.to_vec(),
                    w: a.selection.w,
                    residual,
                    weights: a.selection.weights,
                    full_ball: a.full_ball,
                    iterations,
                    restart,
                    seed: self.cfg.seed,
                    source,
                }));
            }
            self.tag_rejections += 1;
        }
        if r > self.best_residual || self.best_x.is_empty() {
            self.best_residual = r;
            self.best_x = x.to_vec();
        }
        Ok(None)
    }
}

fn start_point(problem: &GnepProblem, cfg: &SolverConfig, restart: usize) -> Result<Vec<f64>> {
    let (lo, hi) = problem.set.bounding_box()?;
    let z: Vec<f64> = if restart == 0 {
        lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (restart as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { rng.gen_range(*l..=*h) } else { *l })
            .collect()
    };
    Ok(problem.set.project(&z)?)
}

/// Projected iteration `x <- P(x - a_k w_k)` with `a_k = a0 / (1 + k decay)`,
/// periodic Newton polishing, seeded restarts and a grid fallback for small
/// `n`. Every accepted point carries a residual certificate.
pub fn solve_vi(problem: &GnepProblem, cfg: &SolverConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let n = problem.n();
    let mut search = Search {
        problem,
        cfg,
        best_residual: f64::NEG_INFINITY,
        best_x: Vec::new(),
        tag_rejections: 0,
    };
    let mut trace = Vec::new();
    let mut total_iters = 0;
    for restart in 0..cfg.restarts.max(1) {
        let mut x = start_point(problem, cfg, restart)?;
        let mut restart_best = f64::NEG_INFINITY;
        let mut last_gain = 0;
        let mut avg = vec![0.0; n];
        let mut avg_count = 0usize;
        for k in 0..cfg.max_iters {
            total_iters += 1;
            let a = attempt(problem, &x, cfg)?;
            if a.selection.residual >= -cfg.residual_tol {
                if let Some(c) = search.certify(&x, k, restart, CertificateSource::Iteration)? {
                    return Ok(SolveOutcome::Certified(c));
                }
            } else if a.selection.residual > search.best_residual {
                search.best_residual = a.selection.residual;
                search.best_x = x.clone();
            }
            if a.selection.residual > restart_best + 1e-9 {
                restart_best = a.selection.residual;
                last_gain = k;
            }
            for (s, v) in avg.iter_mut().zip(&x) {
                *s += v;
            }
            avg_count += 1;
            if cfg.polish_every > 0 && (k + 1) % cfg.polish_every == 0 {
                let mean: Vec<f64> = avg.iter().map(|s| s / avg_count as f64).collect();
                for cand in polish_candidates(problem, &[mean, x.clone()]) {
                    if let Some(c) = search.certify(&cand, k, restart, CertificateSource::Polish)? {
                        return Ok(SolveOutcome::Certified(c));
                    }
                }
                avg.iter_mut().for_each(|s| *s = 0.0);
                avg_count = 0;
            }
            if k - last_gain > cfg.stall_window {
                break;
            }
            let alpha = cfg.alpha0 / (1.0 + k as f64 * cfg.decay);
            x = problem.set.project(&axpy(&x, -alpha, &a.selection.w))?;
        }
        trace.push(restart_best);
    }
    let mut grid_points = 0;
    if n <= cfg.grid_dim_cap {
        let (lo, hi) = problem.set.bounding_box()?;
        let mut k = cfg.grid_per_axis.max(2);
        while k > 2 && (k as f64).powi(n as i32) > cfg.grid_point_cap as f64 {
            k -= 1;
        }
        let mut idx = vec![0usize; n];
        let mut grid_best = f64::NEG_INFINITY;
        'grid: loop {
            let z: Vec<f64> = (0..n)
                .map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (k - 1) as f64)
                .collect();
            if problem.set.contains(&z, 1e-12)? {
                grid_points += 1;
                let before = search.best_residual;
                if let Some(c) = search.certify(&z, grid_points, cfg.restarts, CertificateSource::Grid)? {
                    return Ok(SolveOutcome::Certified(c));
                }
                grid_best = grid_best.max(search.best_residual.max(before));
            }
            let mut i = n;
            loop {
                if i == 0 {
                    break 'grid;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < k {
                    break;
                }
                idx[i] = 0;
            }
        }
        trace.push(grid_best);
    }
    Ok(SolveOutcome::Failure(FailureReport {
        best_residual: search.best_residual,
        best_x: search.best_x,
        restarts: cfg.restarts.max(1),
        iterations: total_iters,
        residual_trace: trace,
        tag_rejections: search.tag_rejections,
        grid_points,
        seed: cfg.seed,
    }))
}

enum Active {
    Half(Vec<f64>, f64),
    Ball(Vec<f64>, f64),
}

impl Active {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Active::Half(a, b) => dot(a, x) - b,
            Active::Ball(c, r) => {
                let d = sub(x, c);
                0.5 * (dot(&d, &d) - r * r)
            }
        }
    }

    fn normal(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Active::Half(a, _) => a.clone(),
            Active::Ball(c, _) => sub(x, c),
        }
    }

    /// Distance-like slack at `x`.
    fn slack(&self, x: &[f64]) -> f64 {
        match self {
            Active::Half(a, b) => (b - dot(a, x)) / norm(a).max(1e-300),
            Active::Ball(c, r) => r - norm(&sub(x, c)),
        }
    }
}

fn own_grad(problem: &GnepProblem, p: usize, x: &[f64]) -> Option<Vec<f64>> {
    let view = PlayerView::new(&problem.losses[p], &problem.blocks, p, x);
    let own = problem.blocks.own(p, x);
    view.own_gradient(own, 1e-6, 1e-4).ok().map(|g| g.vector().to_vec())
}

/// Independent active rows (Gram-Schmidt on the normals at `x`).
fn independent(rows: Vec<Active>, x: &[f64]) -> Vec<Active> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    for r in rows {
        let mut v = r.normal(x);
        let n0 = norm(&v);
        if n0 < 1e-12 {
            continue;
        }
        for b in &basis {
            let c = dot(&v, b);
            v = axpy(&v, -c, b);
        }
        let n1 = norm(&v);
        if n1 > 1e-8 * n0 {
            basis.push(v.iter().map(|t| t / n1).collect());
            kept.push(r);
        }
    }
    kept
}

/// Newton (Levenberg-Marquardt) polishing of an approximate solution over
/// guessed active sets: unknowns are `x`, multipliers of the active
/// constraints and the selection for players at an own optimum.
fn polish_candidates(problem: &GnepProblem, starts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (a, b, balls) = problem.set.constraints();
    let np = problem.num_players();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for start in starts {
        let Ok(x0) = problem.set.project(start) else { continue };
        let grads: Vec<Option<Vec<f64>>> = (0..np).map(|p| own_grad(problem, p, &x0)).collect();
        if grads.iter().any(Option::is_none) {
            continue;
        }
        let gnorm: Vec<f64> = grads.iter().map(|g| norm(g.as_ref().unwrap())).collect();
        let mut combos: Vec<(Vec<usize>, Vec<bool>)> = Vec::new();
        let all: Vec<Active> = a
            .iter()
            .zip(&b)
            .map(|(r, bi)| Active::Half(r.clone(), *bi))
            .chain(balls.iter().map(|(c, r)| Active::Ball(c.clone(), *r)))
            .collect();
        for delta in [1e-4, 1e-3, 1e-2, 5e-2] {
            let act: Vec<usize> = (0..all.len()).filter(|&i| all[i].slack(&x0) <= delta).collect();
            for zeta in [1e-3, 1e-2, 1e-1, 0.5] {
                let z: Vec<bool> = gnorm.iter().map(|g| *g <= zeta).collect();
                if !combos.iter().any(|(u, v)| *u == act && *v == z) {
                    combos.push((act.clone(), z));
                }
            }
        }
        for (act, zero) in combos {
            let rows = independent(act.iter().map(|&i| clone_active(&all[i])).collect(), &x0);
            if let Some(x) = newton(problem, &x0, &rows, &zero) {
                if let Ok(p) = problem.set.project(&x) {
                    if !out.iter().any(|o| norm_inf(&sub(o, &p)) <= 1e-12) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

fn clone_active(a: &Active) -> Active {
    match a {
        Active::Half(r, b) => Active::Half(r.clone(), *b),
        Active::Ball(c, r) => Active::Ball(c.clone(), *r),
    }
}

fn newton(problem: &GnepProblem, x0: &[f64], rows: &[Active], zero: &[bool]) -> Option<Vec<f64>> {
    let n = problem.n();
    let blocks = &problem.blocks;
    let m = rows.len();
    let zdims: Vec<usize> = (0..zero.len()).filter(|&p| zero[p]).map(|p| blocks.dim(p)).collect();
    let nz: usize = zdims.iter().sum();
    let nu = n + m + nz;

    let residual = |u: &[f64]| -> Option<Vec<f64>> {
        let x = &u[..n];
        let mu = &u[n..n + m];
        let wz = &u[n + m..];
        let mut f = Vec::with_capacity(nu);
        for r in rows {
            f.push(r.value(x));
        }
        let mut w = vec![0.0; n];
        let mut zoff = 0;
        let mut tail = Vec::new();
        for p in 0..zero.len() {
            let g = own_grad(problem, p, x)?;
            let range = blocks.range(p);
            if zero[p] {
                for (i, gi) in range.clone().zip(&g) {
                    w[i] = wz[zoff + i - range.start];
                    tail.push(*gi);
                }
                zoff += range.len();
            } else {
                let gn = norm(&g);
                if gn < 1e-10 {
                    return None;
                }
                for (i, gi) in range.zip(&g) {
                    w[i] = gi / gn;
                }
            }
        }
        for (r, &mu_r) in rows.iter().zip(mu) {
            let nr = r.normal(x);
            for i in 0..n {
                w[i] += mu_r * nr[i];
            }
        }
        f.extend(w);
        f.extend(tail);
        Some(f)
    };

    // initial multipliers and selections by least squares on the linear part
    let mut u = x0.to_vec();
    u.extend(vec![0.0; m + nz]);
    let mut f = residual(&u)?;
    let mut lambda = 1e-8;
    for _ in 0..60 {
        let fn0 = norm(&f);
        if fn0 <= 1e-13 {
            break;
        }
        let mut jac = vec![vec![0.0; nu]; nu];
        for j in 0..nu {
            let h = 1e-7 * (1.0 + u[j].abs());
            let mut up = u.clone();
            up[j] += h;
            let fp = residual(&up)?;
            for i in 0..nu {
                jac[i][j] = (fp[i] - f[i]) / h;
            }
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut jtj = vec![vec![0.0; nu]; nu];
            let mut jtf = vec![0.0; nu];
            for i in 0..nu {
                for k in 0..nu {
                    jtf[k] += jac[i][k] * f[i];
                    for l in 0..nu {
                        jtj[k][l] += jac[i][k] * jac[i][l];
                    }
                }
            }
            for k in 0..nu {
                jtj[k][k] += lambda * (1.0 + jtj[k][k]);
            }
            let step = solve_dense(jtj, jtf.iter().map(|v| -v).collect())?;
            let cand: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a + b).collect();
            if let Some(fc) = residual(&cand) {
                if norm(&fc) < fn0 {
                    u = cand;
                    f = fc;
                    lambda = (lambda * 0.1).max(1e-15);
                    improved = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if norm(&f) > 1e-9 {
        return None;
    }
    let mu = &u[n..n + m];
    if mu.iter().any(|v| *v < -1e-9) {
        return None;
    }
    let wz = &u[n + m..];
    let mut off = 0;
    for d in zdims {
        if norm(&wz[off..off + d]) > 1.0 + 1e-9 {
            return None;
        }
        off += d;
    }
    Some(u[..n].to_vec())
}
