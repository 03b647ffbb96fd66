//! Strict sublevel sets, their normal cones, the sets `D` and the operator `T`.
//!
//! Cones are estimated from point evaluations only. At a smooth point with a
//! usable gradient the normalized gradient is the generator; otherwise a
//! separating direction is computed by LP against sampled sublevel points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exprdsl::{EvalError, Tag, TaggedReal};
use crate::geometry::{ConvexBody, GeometryError};
use crate::gnep::GnepProblem;
use crate::linalg::{axpy, dot, norm, sub, unit};
use crate::losses::PlayerView;
use crate::lp::{LinearProgram, LpOutcome, Relation};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeConfig {
    pub budget: usize,
    pub n_restarts: usize,
    pub grad_tol: f64,
    pub sep_tol: f64,
    /// Radians.
    pub dedup_angle: f64,
    pub empty_check_grid: usize,
    /// Sublevel membership requires `f(z) < level - level_slack * max(1, |level|)`.
    pub level_slack: f64,
    pub nonsmooth_tol: f64,
    pub fd_step: f64,
    pub pointed_tol: f64,
    pub seed: u64,
}

impl Default for ConeConfig {
    fn default() -> Self {
        ConeConfig {
            budget: 256,
            n_restarts: 8,
            grad_tol: 1e-8,
            sep_tol: 1e-9,
            dedup_angle: 1e-3,
            empty_check_grid: 33,
            level_slack: 1e-10,
            nonsmooth_tol: 1e-4,
            fd_step: 1e-6,
            pointed_tol: 1e-6,
            seed: 0x5EED_C0DE,
        }
    }
}

const GRID_POINT_CAP: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeRoute {
    Gradient,
    Separation,
    EmptySublevel,
}

/// Unit generators of the cone intersected with the unit sphere, or the
/// whole space when the strict sublevel set is empty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeApprox {
    pub generators: Vec<Vec<f64>>,
    pub full_space: bool,
    pub route: ConeRoute,
}

impl ConeApprox {
    pub fn full(dim: usize) -> Self {
        let mut generators = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            generators.push(unit(dim, i, 1.0));
            generators.push(unit(dim, i, -1.0));
        }
        sort_lex(&mut generators);
        ConeApprox {
            generators,
            full_space: true,
            route: ConeRoute::EmptySublevel,
        }
    }

    /// Some pair of generators within `tol` of antipodal.
    pub fn has_antipodal_pair(&self, tol: f64) -> bool {
        let g = &self.generators;
        (0..g.len()).any(|i| (i + 1..g.len()).any(|j| dot(&g[i], &g[j]) < -1.0 + tol))
    }
}

fn sort_lex(v: &mut [Vec<f64>]) {
    v.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeEstimationError {
    #[error("player {}: loss does not claim quasiconvexity in its own variables", .player + 1)]
    NotQuasiconvex { player: usize },
    #[error("player {}: no separating direction (margin {margin:e}, {} evidence points)", .player + 1, .evidence.len())]
    Separation {
        player: usize,
        margin: f64,
        evidence: Vec<Vec<f64>>,
    },
    #[error("player {}: {source}", .player + 1)]
    Eval { player: usize, source: EvalError },
    #[error("player {}: {source}", .player + 1)]
    Geometry { player: usize, source: GeometryError },
}

/// `{ z : f(z, rivals) < level }` (or `<=`) with `level = f(base, rivals)`.
#[derive(Clone, Debug)]
pub struct SublevelQuery<'a> {
    pub view: PlayerView<'a>,
    pub base: Vec<f64>,
    pub level: f64,
    pub strict: bool,
}

impl<'a> SublevelQuery<'a> {
    pub fn new(view: PlayerView<'a>, base: &[f64], strict: bool) -> Result<Self, EvalError> {
        let level = view.eval_own(base)?;
        Ok(SublevelQuery {
            view,
            base: base.to_vec(),
            level,
            strict,
        })
    }

    /// Exact comparison against the level.
    pub fn contains(&self, z: &[f64]) -> Result<bool, EvalError> {
        let v = self.view.eval_own(z)?;
        Ok(if self.strict { v < self.level } else { v <= self.level })
    }

    fn below(&self, z: &[f64], margin: f64) -> bool {
        matches!(self.view.eval_own(z), Ok(v) if v < self.level - margin)
    }
}

fn slack_for(level: f64, rel: f64) -> f64 {
    rel * level.abs().max(1.0)
}

fn domain_scale(bbox: &(Vec<f64>, Vec<f64>)) -> f64 {
    bbox.0
        .iter()
        .zip(&bbox.1)
        .map(|(l, h)| h - l)
        .fold(0.0, f64::max)
        .max(1e-12)
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let n = norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn sample_below(
    q: &SublevelQuery<'_>,
    domain: &ConvexBody,
    budget: usize,
    seed: u64,
    margin: f64,
) -> Result<Vec<Vec<f64>>, GeometryError> {
    let d = q.base.len();
    let bbox = domain.bounding_box()?;
    let scale = domain_scale(&bbox);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        dirs.push(unit(d, i, 1.0));
        dirs.push(unit(d, i, -1.0));
    }
    for _ in 0..2 * d {
        dirs.push(random_unit(&mut rng, d));
    }
    for dir in &dirs {
        if out.len() >= budget {
            break;
        }
        for j in 0..40 {
            let z = axpy(&q.base, scale * 0.5f64.powi(j), dir);
            if domain.contains(&z, 0.0)? && q.below(&z, margin) {
                out.push(z);
                break;
            }
        }
    }
    let mut tries = 0;
    while out.len() < budget && tries < 4 * budget {
        tries += 1;
        let z = domain.sample(&bbox, &mut rng, 16)?;
        if q.below(&z, margin) {
            out.push(z);
        }
    }
    Ok(out)
}

/// Points of the strict sublevel set inside `domain`, from line searches
/// out of the base point and uniform sampling. May be empty.
pub fn sample_strict_sublevel(
    q: &SublevelQuery<'_>,
    domain: &ConvexBody,
    budget: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, GeometryError> {
    let margin = slack_for(q.level, ConeConfig::default().level_slack);
    sample_below(q, domain, budget, seed, margin)
}

/// Regular grid over the bounding box of `domain`; returns up to `cap`
/// points strictly below the level.
fn grid_below(
    q: &SublevelQuery<'_>,
    domain: &ConvexBody,
    per_axis: usize,
    margin: f64,
    cap: usize,
) -> Result<Vec<Vec<f64>>, GeometryError> {
    let (lo, hi) = domain.bounding_box()?;
    let d = lo.len();
    let mut k = per_axis.max(2);
    while d > 0 && k > 2 && (k as f64).powi(d as i32) > GRID_POINT_CAP as f64 {
        k -= 1;
    }
    let mut idx = vec![0usize; d];
    let mut out = Vec::new();
    loop {
        let z: Vec<f64> = (0..d)
            .map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (k - 1) as f64)
            .collect();
        if domain.contains(&z, 1e-12)? && q.below(&z, margin) {
            out.push(z);
            if out.len() >= cap {
                return Ok(out);
            }
        }
        let mut i = 0;
        loop {
            if i == d {
                return Ok(out);
            }
            idx[i] += 1;
            if idx[i] < k {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Largest step along `dir` (halving from `scale`) giving a strict decrease.
fn descent_witness(q: &SublevelQuery<'_>, dir: &[f64], scale: f64, margin: f64) -> Option<Vec<f64>> {
    (0..48)
        .map(|j| axpy(&q.base, scale * 0.5f64.powi(j), dir))
        .find(|z| q.below(z, margin))
}

/// `max t` s.t. `t <= <w, x - z>` for all evidence, `|w_i| <= 1`.
fn separation_lp(x: &[f64], evidence: &[Vec<f64>]) -> Option<(Vec<f64>, f64)> {
    let d = x.len();
    let mut obj = vec![0.0; d + 1];
    obj[d] = 1.0;
    let mut lp = LinearProgram::free(obj);
    for i in 0..d {
        let mut r = vec![0.0; d + 1];
        r[i] = 1.0;
        lp.add_row(r.clone(), Relation::Le, 1.0);
        r[i] = -1.0;
        lp.add_row(r, Relation::Le, 1.0);
    }
    for z in evidence {
        let mut r: Vec<f64> = sub(z, x);
        r.push(1.0);
        lp.add_row(r, Relation::Le, 0.0);
    }
    let (sol, t) = lp.maximize().optimal()?;
    Some((sol[..d].to_vec(), t))
}

/// `max <c, w>` keeping margin `m` on every evidence point.
fn restart_lp(x: &[f64], evidence: &[Vec<f64>], c: &[f64], m: f64) -> Option<Vec<f64>> {
    let d = x.len();
    let mut lp = LinearProgram::free(c.to_vec());
    for i in 0..d {
        lp.add_row(unit(d, i, 1.0), Relation::Le, 1.0);
        lp.add_row(unit(d, i, -1.0), Relation::Le, 1.0);
    }
    for z in evidence {
        lp.add_row(sub(z, x), Relation::Le, -m);
    }
    lp.maximize().optimal().map(|(w, _)| w)
}

fn normalized(w: &[f64]) -> Option<Vec<f64>> {
    let n = norm(w);
    (n > 1e-14).then(|| w.iter().map(|v| v / n).collect())
}

/// Estimates the normal cone of the strict sublevel set of the view's loss at `x_own`.
pub fn cone_at(
    view: &PlayerView<'_>,
    x_own: &[f64],
    domain_own: &ConvexBody,
    cfg: &ConeConfig,
) -> Result<ConeApprox, ConeEstimationError> {
    let player = view.player;
    let eval = |source| ConeEstimationError::Eval { player, source };
    let geom = |source| ConeEstimationError::Geometry { player, source };
    if !view.loss.flags.claims_quasiconvex_own {
        return Err(ConeEstimationError::NotQuasiconvex { player });
    }
    let d = x_own.len();
    let q = SublevelQuery::new(view.clone(), x_own, true).map_err(eval)?;
    let margin = slack_for(q.level, cfg.level_slack);
    let bbox = domain_own.bounding_box().map_err(geom)?;
    let scale = domain_scale(&bbox);

    let grad = view.own_gradient(x_own, cfg.fd_step, cfg.nonsmooth_tol).map_err(eval)?;
    let g = grad.vector();
    if grad.is_smooth() && norm(g) > cfg.grad_tol {
        let u = normalized(g).expect("nonzero gradient");
        let down: Vec<f64> = u.iter().map(|v| -v).collect();
        if descent_witness(&q, &down, scale, margin).is_some() {
            return Ok(ConeApprox {
                generators: vec![u],
                full_space: false,
                route: ConeRoute::Gradient,
            });
        }
    }

    let seed = cfg.seed ^ (player as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut evidence = sample_below(&q, domain_own, cfg.budget, seed, margin).map_err(geom)?;
    if evidence.is_empty() {
        evidence = grid_below(&q, domain_own, cfg.empty_check_grid, margin, cfg.budget).map_err(geom)?;
    }
    if evidence.is_empty() {
        return Ok(ConeApprox::full(d));
    }

    let Some((w, t)) = separation_lp(x_own, &evidence) else {
        return Err(ConeEstimationError::Separation {
            player,
            margin: f64::NAN,
            evidence,
        });
    };
    let first = normalized(&w).filter(|_| t > cfg.sep_tol);
    let Some(first) = first else {
        return Err(ConeEstimationError::Separation {
            player,
            margin: t,
            evidence,
        });
    };
    let verified = |u: &[f64]| evidence.iter().all(|z| dot(u, &sub(z, x_own)) <= cfg.sep_tol);
    if !verified(&first) {
        return Err(ConeEstimationError::Separation {
            player,
            margin: t,
            evidence,
        });
    }
    let mut generators = vec![first];
    let cos_dup = cfg.dedup_angle.cos();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    for _ in 0..cfg.n_restarts {
        let c = random_unit(&mut rng, d);
        let Some(u) = restart_lp(x_own, &evidence, &c, 0.5 * t).and_then(|w| normalized(&w)) else {
            continue;
        };
        if verified(&u) && generators.iter().all(|g| dot(g, &u) < cos_dup) {
            generators.push(u);
        }
    }
    sort_lex(&mut generators);
    Ok(ConeApprox {
        generators,
        full_space: false,
        route: ConeRoute::Separation,
    })
}

/// Convex hull of the unit generators, or the closed unit ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DSet {
    pub dim: usize,
    pub generators: Vec<Vec<f64>>,
    pub full_ball: bool,
}

pub fn build_d(cone: &ConeApprox) -> DSet {
    DSet {
        dim: cone.generators.first().map_or(0, |g| g.len()),
        generators: cone.generators.clone(),
        full_ball: cone.full_space,
    }
}

impl DSet {
    pub fn full(dim: usize) -> Self {
        build_d(&ConeApprox::full(dim))
    }

    /// Membership up to `tol` in the 1-norm of the hull residual.
    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        if w.len() != self.dim {
            return false;
        }
        if self.full_ball {
            return norm(w) <= 1.0 + tol;
        }
        hull_distance(&self.generators, w).is_some_and(|r| r <= tol)
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(&vec![0.0; self.dim], 1e-12)
    }
}

/// `min ||sum l_j g_j - w||_1` over the simplex.
pub(crate) fn hull_distance(gens: &[Vec<f64>], w: &[f64]) -> Option<f64> {
    let (k, d) = (gens.len(), w.len());
    if k == 0 {
        return None;
    }
    let nv = k + 2 * d;
    let mut obj = vec![0.0; nv];
    obj[k..].iter_mut().for_each(|v| *v = 1.0);
    let mut lp = LinearProgram::new(obj, vec![crate::lp::VarKind::NonNegative; nv]);
    let mut simplex = vec![0.0; nv];
    simplex[..k].iter_mut().for_each(|v| *v = 1.0);
    lp.add_row(simplex, Relation::Eq, 1.0);
    for i in 0..d {
        let mut r = vec![0.0; nv];
        for (j, g) in gens.iter().enumerate() {
            r[j] = g[i];
        }
        r[k + 2 * i] = -1.0;
        r[k + 2 * i + 1] = 1.0;
        lp.add_row(r, Relation::Eq, w[i]);
    }
    match lp.minimize() {
        LpOutcome::Optimal { value, .. } => Some(value.max(0.0)),
        _ => None,
    }
}

fn player_seed(cfg: &ConeConfig, player: usize) -> ConeConfig {
    ConeConfig {
        seed: cfg
            .seed
            .wrapping_add((player as u64 + 1).wrapping_mul(0x2545_F491_4F6C_DD1D)),
        ..cfg.clone()
    }
}

/// Per-player cones at a tagged profile.
pub fn cones_at_tagged(
    problem: &GnepProblem,
    x: &[TaggedReal],
    cfg: &ConeConfig,
) -> Result<Vec<ConeApprox>, ConeEstimationError> {
    let blocks = &problem.blocks;
    (0..blocks.num_players())
        .map(|p| {
            let view = PlayerView::tagged(&problem.losses[p], blocks, p, x);
            let own: Vec<f64> = blocks.own(p, x).iter().map(|t| t.value).collect();
            cone_at(&view, &own, problem.own_domain(p), &player_seed(cfg, p))
        })
        .collect()
}

pub fn cones_at(problem: &GnepProblem, x: &[f64], cfg: &ConeConfig) -> Result<Vec<ConeApprox>, ConeEstimationError> {
    cones_at_tagged(problem, &crate::exprdsl::untagged(x), cfg)
}

/// `T(x)` as one `D` set per player.
pub fn t_of(problem: &GnepProblem, x: &[f64], cfg: &ConeConfig) -> Result<Vec<DSet>, ConeEstimationError> {
    Ok(cones_at(problem, x, cfg)?.iter().map(build_d).collect())
}

pub fn t_of_tagged(
    problem: &GnepProblem,
    x: &[TaggedReal],
    cfg: &ConeConfig,
) -> Result<Vec<DSet>, ConeEstimationError> {
    Ok(cones_at_tagged(problem, x, cfg)?.iter().map(build_d).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub sequences: usize,
    pub terms: usize,
    pub tol: f64,
    pub seed: u64,
    /// Give the sequence terms the opposite rival tags from the limit.
    pub flip_tags: bool,
    pub evidence: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            sequences: 50,
            terms: 10,
            tol: 1e-6,
            seed: 7,
            flip_tags: false,
            evidence: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeViolation {
    pub sequence: usize,
    pub term: Vec<f64>,
    pub witness: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub kind: &'static str,
    pub player: usize,
    pub base: Vec<f64>,
    pub sequences: usize,
    pub checked: usize,
    pub violations: Vec<ProbeViolation>,
    pub passed: bool,
}

struct Sequence {
    terms: Vec<Vec<TaggedReal>>,
    last_radius: f64,
}

fn sequences(problem: &GnepProblem, base: &[TaggedReal], player: usize, cfg: &ProbeConfig) -> Vec<Sequence> {
    let n = base.len();
    let bbox = problem.set.bounding_box().ok();
    let scale = bbox.as_ref().map_or(1.0, domain_scale).max(1e-6);
    let range = problem.blocks.range(player);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.sequences)
        .map(|_| {
            let d = random_unit(&mut rng, n);
            let mut last_radius = scale;
            let terms = (0..cfg.terms)
                .map(|j| {
                    let r = scale * 0.25f64.powi(j as i32 + 1);
                    last_radius = r;
                    base.iter()
                        .enumerate()
                        .map(|(i, t)| {
                            let tag = if cfg.flip_tags && !range.contains(&i) {
                                t.tag.flip()
                            } else {
                                t.tag
                            };
                            TaggedReal::new(t.value + r * d[i], tag)
                        })
                        .collect()
                })
                .collect();
            Sequence { terms, last_radius }
        })
        .collect()
}

fn limit_evidence(
    problem: &GnepProblem,
    base: &[TaggedReal],
    player: usize,
    cfg: &ProbeConfig,
    rel_margin: f64,
) -> Result<Vec<Vec<f64>>, ConeEstimationError> {
    let view = PlayerView::tagged(&problem.losses[player], &problem.blocks, player, base);
    let own: Vec<f64> = problem.blocks.own(player, base).iter().map(|t| t.value).collect();
    let q = SublevelQuery::new(view, &own, true).map_err(|source| ConeEstimationError::Eval { player, source })?;
    let margin = slack_for(q.level, rel_margin);
    sample_below(&q, problem.own_domain(player), cfg.evidence, cfg.seed ^ 0x11, margin)
        .map_err(|source| ConeEstimationError::Geometry { player, source })
}

fn same_cone(a: &ConeApprox, b: &ConeApprox, tol: f64) -> bool {
    a.full_space == b.full_space
        && a.generators.len() == b.generators.len()
        && a.generators
            .iter()
            .zip(&b.generators)
            .all(|(u, v)| u.iter().zip(v).all(|(x, y)| (x - y).abs() <= tol))
}

/// Closedness of the cone map along sequences converging to `base`:
/// limits of generators must stay normal to the strict sublevel set at `base`.
pub fn closedness_probe(
    problem: &GnepProblem,
    player: usize,
    base: &[TaggedReal],
    cone_cfg: &ConeConfig,
    cfg: &ProbeConfig,
) -> Result<ProbeReport, ConeEstimationError> {
    let evidence = limit_evidence(problem, base, player, cfg, 1e-9)?;
    let x0: Vec<f64> = problem.blocks.own(player, base).iter().map(|t| t.value).collect();
    let mut checked = 0;
    let mut violations = Vec::new();
    for (s, seq) in sequences(problem, base, player, cfg).iter().enumerate() {
        let k = seq.terms.len();
        if k < 2 {
            continue;
        }
        let cone = |x: &[TaggedReal]| -> Result<ConeApprox, ConeEstimationError> {
            cones_at_tagged_player(problem, x, player, cone_cfg)
        };
        let (a, b) = (cone(&seq.terms[k - 2])?, cone(&seq.terms[k - 1])?);
        if !same_cone(&a, &b, cfg.tol) {
            continue;
        }
        checked += 1;
        'outer: for w in &b.generators {
            for z in &evidence {
                let v = dot(w, &sub(z, &x0));
                if v > cfg.tol {
                    violations.push(ProbeViolation {
                        sequence: s,
                        term: seq.terms[k - 1].iter().map(|t| t.value).collect(),
                        witness: z.clone(),
                        value: v,
                    });
                    break 'outer;
                }
            }
        }
    }
    Ok(ProbeReport {
        kind: "closedness",
        player,
        base: base.iter().map(|t| t.value).collect(),
        sequences: cfg.sequences,
        checked,
        passed: violations.is_empty(),
        violations,
    })
}

fn cones_at_tagged_player(
    problem: &GnepProblem,
    x: &[TaggedReal],
    player: usize,
    cfg: &ConeConfig,
) -> Result<ConeApprox, ConeEstimationError> {
    let view = PlayerView::tagged(&problem.losses[player], &problem.blocks, player, x);
    let own: Vec<f64> = problem.blocks.own(player, x).iter().map(|t| t.value).collect();
    cone_at(&view, &own, problem.own_domain(player), &player_seed(cfg, player))
}

/// Lower semicontinuity of the strict sublevel map: each point below the
/// level at `base` must be approximable by points below the level along
/// every sampled sequence.
pub fn lsc_probe(
    problem: &GnepProblem,
    player: usize,
    base: &[TaggedReal],
    cfg: &ProbeConfig,
) -> Result<ProbeReport, ConeEstimationError> {
    let evidence = limit_evidence(problem, base, player, cfg, 1e-3)?;
    let d = problem.blocks.dim(player);
    let mut violations = Vec::new();
    let seqs = sequences(problem, base, player, cfg);
    for (s, seq) in seqs.iter().enumerate() {
        let Some(last) = seq.terms.last() else { continue };
        let view = PlayerView::tagged(&problem.losses[player], &problem.blocks, player, last);
        let own: Vec<f64> = problem.blocks.own(player, last).iter().map(|t| t.value).collect();
        let q = SublevelQuery::new(view, &own, true).map_err(|source| ConeEstimationError::Eval { player, source })?;
        let rho = cfg.tol.max(10.0 * seq.last_radius);
        for z in &evidence {
            let mut near = vec![z.clone()];
            for i in 0..d {
                near.push(axpy(z, rho, &unit(d, i, 1.0)));
                near.push(axpy(z, rho, &unit(d, i, -1.0)));
            }
            if !near.iter().any(|p| q.below(p, 0.0)) {
                violations.push(ProbeViolation {
                    sequence: s,
                    term: last.iter().map(|t| t.value).collect(),
                    witness: z.clone(),
                    value: rho,
                });
                break;
            }
        }
    }
    Ok(ProbeReport {
        kind: "lower_semicontinuity",
        player,
        base: base.iter().map(|t| t.value).collect(),
        sequences: cfg.sequences,
        checked: seqs.len(),
        passed: violations.is_empty(),
        violations,
    })
}

/// Whether every tag in `x` is `Q`.
pub fn all_rational(x: &[TaggedReal]) -> bool {
    x.iter().all(|t| t.tag == Tag::Q)
}
