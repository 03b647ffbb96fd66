//! Problem model, equilibrium verification by regret, best responses,
//! the grid oracle and the best-response nonexistence probe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exprdsl::{self, finite_diff_with, untagged, EvalError, Expr, Tag, TaggedReal};
use crate::geometry::{BlockStructure, ConvexBody};
use crate::linalg::{axpy, dot, norm_inf, sub};
use crate::losses::{LossFunction, PlayerView};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Regret tolerance for accepting an equilibrium.
    pub eps: f64,
    pub residual_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps: 1e-6,
            residual_tol: 1e-6,
        }
    }
}

/// When player `player`'s rivals carry `rivals` tags, its best response is
/// `value` (one expression per own coordinate) with tag `tag`.
#[derive(Clone, Debug, PartialEq)]
pub struct TagRule {
    pub player: usize,
    pub rivals: Vec<Tag>,
    pub value: Vec<(Expr, String)>,
    pub tag: Tag,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TagTable {
    pub rules: Vec<TagRule>,
    /// Values that carry the `I` tag when they appear as coordinates.
    pub irrational_constants: Vec<f64>,
}

impl TagTable {
    /// Tag a limit value would really carry: `I` only for declared constants.
    pub fn classify(&self, v: f64) -> Tag {
        if self.irrational_constants.iter().any(|c| (c - v).abs() <= 1e-12) {
            Tag::I
        } else {
            Tag::Q
        }
    }
}

#[derive(Clone, Debug)]
pub struct GnepProblem {
    pub name: String,
    pub blocks: BlockStructure,
    pub losses: Vec<LossFunction>,
    pub set: ConvexBody,
    pub tolerances: Tolerances,
    pub tags: Option<TagTable>,
    own_domains: Vec<ConvexBody>,
}

impl GnepProblem {
    pub fn new(name: &str, blocks: BlockStructure, losses: Vec<LossFunction>, set: ConvexBody) -> Result<Self> {
        if losses.len() != blocks.num_players() {
            return Err(Error::model(
                "gnep",
                format!("{} losses for {} players", losses.len(), blocks.num_players()),
            ));
        }
        let n = blocks.n();
        if let Some((p, l)) = losses.iter().enumerate().find(|(_, l)| l.n() != n) {
            return Err(Error::model(
                "gnep",
                format!("loss of player {} is over {} variables, expected {n}", p + 1, l.n()),
            ));
        }
        if set.dim() != n {
            return Err(Error::model(
                "gnep",
                format!("shared set has dimension {}, expected {n}", set.dim()),
            ));
        }
        set.validate()?;
        let (lo, hi) = set.bounding_box()?;
        let own_domains = (0..blocks.num_players())
            .map(|p| {
                let (l, h) = (blocks.own(p, &lo), blocks.own(p, &hi));
                let pad: Vec<f64> = l.iter().zip(h).map(|(a, b)| (b - a).max(1.0)).collect();
                ConvexBody::new_box(
                    l.iter().zip(&pad).map(|(a, d)| a - d).collect(),
                    h.iter().zip(&pad).map(|(b, d)| b + d).collect(),
                )
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(GnepProblem {
            name: name.to_string(),
            blocks,
            losses,
            set,
            tolerances: Tolerances::default(),
            tags: None,
            own_domains,
        })
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn with_tags(mut self, table: TagTable) -> Result<Self> {
        for r in &table.rules {
            self.blocks
                .check_player(r.player)
                .map_err(|_| Error::model("gnep", format!("tag rule for unknown player {}", r.player + 1)))?;
            let riv = self.n() - self.blocks.dim(r.player);
            if r.rivals.len() != riv || r.value.len() != self.blocks.dim(r.player) {
                return Err(Error::model(
                    "gnep",
                    format!("tag rule for player {} has wrong arity", r.player + 1),
                ));
            }
        }
        self.tags = Some(table);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.blocks.n()
    }

    pub fn num_players(&self) -> usize {
        self.blocks.num_players()
    }

    /// Box around the projection of the shared set on the player's coordinates,
    /// padded on each side; sampling region for sublevel sets.
    pub fn own_domain(&self, player: usize) -> &ConvexBody {
        &self.own_domains[player]
    }

    pub fn is_tagged(&self) -> bool {
        self.tags.is_some()
    }

    pub fn response_rule(&self, player: usize, x: &[TaggedReal]) -> Option<&TagRule> {
        let rivals: Vec<Tag> = self.blocks.rivals(player, x).iter().map(|t| t.tag).collect();
        self.tags
            .as_ref()?
            .rules
            .iter()
            .find(|r| r.player == player && r.rivals == rivals)
    }

    /// Best response given by the tag table, when a rule applies.
    pub fn tabled_response(
        &self,
        player: usize,
        x: &[TaggedReal],
    ) -> Option<std::result::Result<Vec<TaggedReal>, EvalError>> {
        let rule = self.response_rule(player, x)?;
        Some(
            rule.value
                .iter()
                .map(|(e, _)| e.evaluate(x).map(|v| TaggedReal::new(v, rule.tag)))
                .collect(),
        )
    }

    /// On tagged problems: a block sitting at its own unconstrained optimum
    /// (full-ball `D`) must carry the tag the table assigns to that optimum.
    pub fn tag_consistent_at_optimum(&self, x: &[f64], full_ball: &[bool]) -> bool {
        if self.tags.is_none() {
            return true;
        }
        let tx = untagged(x);
        full_ball.iter().enumerate().all(|(p, &fb)| {
            !fb || self
                .response_rule(p, &tx)
                .is_none_or(|r| self.blocks.own(p, &tx).iter().all(|t| t.tag == r.tag))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckConfig {
    /// Grid points per axis; `None` picks by block dimension.
    pub slice_grid: Option<usize>,
    pub seeds: usize,
    pub refine_iters: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            slice_grid: None,
            seeds: 8,
            refine_iters: 200,
        }
    }
}

const SLICE_GRID_CAP: usize = 200_000;

pub fn default_slice_grid(own_dim: usize) -> usize {
    match own_dim {
        0..=2 => 65,
        3 => 17,
        4 => 9,
        _ => 5,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlayerRegret {
    /// One-based.
    pub player: usize,
    pub current: f64,
    pub best: f64,
    pub regret: f64,
    pub witness: Vec<f64>,
    pub grid_per_axis: usize,
    pub grid_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegretReport {
    pub players: Vec<PlayerRegret>,
    pub max_regret: f64,
}

impl RegretReport {
    pub fn is_eps_gne(&self, eps: f64) -> bool {
        self.max_regret <= eps
    }

    pub fn table(&self) -> String {
        let mut s = String::from("player  current                best                   regret\n");
        for p in &self.players {
            s += &format!(
                "{:<7} {:<22.15e} {:<22.15e} {:.6e}\n",
                p.player, p.current, p.best, p.regret
            );
        }
        s += &format!("max regret {:.6e}\n", self.max_regret);
        s
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Witnesses must satisfy the slice constraints to this accuracy.
const SLICE_FEAS_TOL: f64 = 1e-14;

struct SliceSearch<'a> {
    view: PlayerView<'a>,
    slice: ConvexBody,
    scale: f64,
}

impl SliceSearch<'_> {
    fn value(&self, z: &[f64]) -> f64 {
        self.view.eval_own(z).unwrap_or(f64::INFINITY)
    }

    fn project(&self, z: &[f64]) -> Option<Vec<f64>> {
        let p = self.slice.project(z).ok()?;
        self.slice.contains(&p, SLICE_FEAS_TOL).ok()?.then_some(p)
    }

    fn refine(&self, start: Vec<f64>, iters: usize) -> (Vec<f64>, f64) {
        let mut z = start;
        let mut fz = self.value(&z);
        for _ in 0..iters {
            let Ok((g, _)) = finite_diff_with(|p| self.view.eval_own(p), &z, 1e-7, 1e-4) else {
                break;
            };
            let mut step = self.scale;
            let mut moved = false;
            for _ in 0..50 {
                let Some(c) = self.project(&axpy(&z, -step, &g)) else {
                    break;
                };
                let fc = self.value(&c);
                if fc < fz - 1e-4 * dot(&g, &sub(&z, &c)).max(0.0) && fc < fz {
                    z = c;
                    fz = fc;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let d = z.len();
        let mut h = 0.125 * self.scale;
        let floor = 1e-13 * self.scale.max(1.0);
        let mut evals = 0;
        while h > floor && evals < 4000 {
            let mut improved = false;
            for i in 0..d {
                for s in [1.0, -1.0] {
                    let mut c = z.clone();
                    c[i] += s * h;
                    let Some(c) = self.project(&c) else { continue };
                    evals += 1;
                    let fc = self.value(&c);
                    if fc < fz {
                        z = c;
                        fz = fc;
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        (z, fz)
    }
}

fn grid_axis(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if hi <= lo || k < 2 {
        return vec![0.5 * (lo + hi)];
    }
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

fn for_each_grid_point<F: FnMut(&[f64])>(axes: &[Vec<f64>], mut f: F) {
    let d = axes.len();
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; d];
    let mut z: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        f(&z);
        let mut i = d;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < axes[i].len() {
                z[i] = axes[i][idx[i]];
                break;
            }
            idx[i] = 0;
            z[i] = axes[i][0];
        }
    }
}

fn best_in_slice(problem: &GnepProblem, player: usize, x: &[TaggedReal], cfg: &CheckConfig) -> Result<PlayerRegret> {
    let blocks = &problem.blocks;
    let rivals: Vec<f64> = blocks.rivals(player, x).iter().map(|t| t.value).collect();
    let slice = problem.set.slice(blocks, player, &rivals)?;
    if slice.is_empty()? {
        return Err(Error::model("gnep", format!("empty slice for player {}", player + 1)));
    }
    let (lo, hi) = slice.bounding_box()?;
    let d = lo.len();
    let mut k = cfg.slice_grid.unwrap_or_else(|| default_slice_grid(d)).max(2);
    while d > 0 && k > 2 && (k as f64).powi(d as i32) > SLICE_GRID_CAP as f64 {
        k -= 1;
    }
    let axes: Vec<Vec<f64>> = (0..d).map(|i| grid_axis(lo[i], hi[i], k)).collect();
    let scale = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max).max(1e-9);
    let view = PlayerView::tagged(&problem.losses[player], blocks, player, x);
    let search = SliceSearch { view, slice, scale };

    let own: Vec<f64> = blocks.own(player, x).iter().map(|t| t.value).collect();
    let current = problem.losses[player].eval_tagged(x).map_err(Error::from)?;
    let mut grid: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut grid_points = 0;
    for_each_grid_point(&axes, |z| {
        if search.slice.contains(z, 1e-12).unwrap_or(false) {
            grid_points += 1;
            grid.push((search.value(z), z.to_vec()));
        }
    });
    let mut seeds: Vec<Vec<f64>> = {
        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.sort_by(|&a, &b| grid[a].0.total_cmp(&grid[b].0).then(a.cmp(&b)));
        order.iter().take(cfg.seeds).map(|&i| grid[i].1.clone()).collect()
    };
    if let Some(p) = search.project(&own) {
        seeds.push(p);
    }
    if grid.is_empty() {
        if let Some(p) = search.project(&grid_axis_center(&lo, &hi)) {
            seeds.push(p);
        }
    }
    let mut cands = grid;
    for s in seeds {
        let (z, v) = search.refine(s, cfg.refine_iters);
        cands.push((v, z));
    }
    let mut best = (current, own.clone());
    for (v, z) in cands {
        let tie = (v - best.0).abs() <= 1e-15 * (1.0 + best.0.abs());
        if v < best.0 && !tie || tie && lex_less(&z, &best.1) {
            best = (v, z);
        }
    }
    Ok(PlayerRegret {
        player: player + 1,
        current,
        best: best.0.min(current),
        regret: (current - best.0).max(0.0),
        witness: best.1,
        grid_per_axis: k,
        grid_points,
    })
}

fn grid_axis_center(lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect()
}

fn check_point(problem: &GnepProblem, x: &[f64]) -> Result<()> {
    if x.len() != problem.n() {
        return Err(Error::usage(
            "gnep",
            format!("point has {} coordinates, expected {}", x.len(), problem.n()),
        ));
    }
    if !problem.set.contains(x, 1e-7)? {
        return Err(Error::usage("gnep", "point is not in the shared set"));
    }
    Ok(())
}

/// Per-player regret of a tagged profile against its slice of the shared set.
pub fn check_gnep_tagged(problem: &GnepProblem, x: &[TaggedReal], cfg: &CheckConfig) -> Result<RegretReport> {
    let values: Vec<f64> = x.iter().map(|t| t.value).collect();
    check_point(problem, &values)?;
    let players = (0..problem.num_players())
        .map(|p| best_in_slice(problem, p, x, cfg))
        .collect::<Result<Vec<_>>>()?;
    let max_regret = players.iter().map(|p| p.regret).fold(0.0, f64::max);
    Ok(RegretReport { players, max_regret })
}

pub fn check_gnep(problem: &GnepProblem, x: &[f64], cfg: &CheckConfig) -> Result<RegretReport> {
    check_gnep_tagged(problem, &untagged(x), cfg)
}

/// Simultaneous best response; ties go to the lexicographically smallest minimizer.
pub fn best_response_map(problem: &GnepProblem, x: &[f64]) -> Result<Vec<f64>> {
    check_point(problem, x)?;
    let tx = untagged(x);
    let cfg = CheckConfig::default();
    let mut out = Vec::with_capacity(x.len());
    for p in 0..problem.num_players() {
        out.extend(best_in_slice(problem, p, &tx, &cfg)?.witness);
    }
    Ok(out)
}

/// Tagged best response: tabled responses where a rule applies, numeric
/// minimizers tagged `Q` elsewhere.
pub fn best_response_map_tagged(problem: &GnepProblem, x: &[TaggedReal]) -> Result<Vec<TaggedReal>> {
    let cfg = CheckConfig::default();
    let mut out = Vec::with_capacity(x.len());
    for p in 0..problem.num_players() {
        match problem.tabled_response(p, x) {
            Some(r) => out.extend(r?),
            None => {
                let values: Vec<f64> = x.iter().map(|t| t.value).collect();
                check_point(problem, &values)?;
                out.extend(
                    best_in_slice(problem, p, x, &cfg)?
                        .witness
                        .into_iter()
                        .map(TaggedReal::q),
                );
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BruteForceReport {
    pub resolution: f64,
    pub eps: f64,
    pub grid_points: usize,
    pub feasible_points: usize,
    pub equilibria: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium_tags: Option<Vec<Vec<Tag>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub const BRUTE_FORCE_MAX_DIM: usize = 4;

fn axis_candidates(lo: f64, hi: f64, res: f64, table: Option<&TagTable>) -> Vec<TaggedReal> {
    let k = ((hi - lo) / res + 1e-9).floor() as usize;
    let mut v: Vec<TaggedReal> = (0..=k).map(|i| TaggedReal::q(lo + i as f64 * res)).collect();
    if hi - (lo + k as f64 * res) > 1e-9 * res {
        v.push(TaggedReal::q(hi));
    }
    if let Some(t) = table {
        for &c in &t.irrational_constants {
            if c >= lo && c <= hi {
                v.push(TaggedReal::i(c));
            }
        }
        v.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.tag.cmp(&b.tag)));
    }
    v
}

fn cartesian(axes: &[&Vec<TaggedReal>]) -> Vec<Vec<TaggedReal>> {
    let mut out: Vec<Vec<TaggedReal>> = vec![Vec::new()];
    for a in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                a.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out
}

/// All grid points of the shared set whose grid-restricted regret is at most
/// `eps`. On tagged problems the grid carries declared irrational constants
/// tagged `I`, and each block must carry the tag the table assigns to its
/// best response.
pub fn brute_force_gne(problem: &GnepProblem, resolution: f64, eps: f64) -> Result<BruteForceReport> {
    let n = problem.n();
    if n > BRUTE_FORCE_MAX_DIM {
        return Err(Error::usage(
            "gnep",
            format!("brute force limited to n <= {BRUTE_FORCE_MAX_DIM}, got {n}"),
        ));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::usage("gnep", "resolution must be positive"));
    }
    let (lo, hi) = problem.set.bounding_box()?;
    let table = problem.tags.as_ref();
    let axes: Vec<Vec<TaggedReal>> = (0..n)
        .map(|i| axis_candidates(lo[i], hi[i], resolution, table))
        .collect();
    let grid_points = axes.iter().map(Vec::len).product();
    let all = cartesian(&axes.iter().collect::<Vec<_>>());
    let blocks = &problem.blocks;
    let feasible: Vec<&Vec<TaggedReal>> = all
        .iter()
        .filter(|p| {
            let v: Vec<f64> = p.iter().map(|t| t.value).collect();
            problem.set.contains(&v, 1e-9).unwrap_or(false)
        })
        .collect();
    let own_grids: Vec<Vec<Vec<TaggedReal>>> = (0..problem.num_players())
        .map(|p| cartesian(&blocks.range(p).map(|i| &axes[i]).collect::<Vec<_>>()))
        .collect();

    let accepted: Vec<Option<Vec<TaggedReal>>> = feasible
        .par_iter()
        .map(|x| -> Result<Option<Vec<TaggedReal>>> {
            for p in 0..problem.num_players() {
                if let Some(rule) = problem.response_rule(p, x) {
                    if blocks.own(p, x).iter().any(|t| t.tag != rule.tag) {
                        return Ok(None);
                    }
                }
                let loss = &problem.losses[p];
                let current = loss.eval_tagged(x)?;
                let rivals = blocks.rivals(p, x);
                let mut best = current;
                for z in &own_grids[p] {
                    let y = blocks.assemble(p, z, &rivals);
                    let yv: Vec<f64> = y.iter().map(|t| t.value).collect();
                    if !problem.set.contains(&yv, 1e-9)? {
                        continue;
                    }
                    if let Ok(v) = loss.eval_tagged(&y) {
                        best = best.min(v);
                    }
                }
                if current - best > eps {
                    return Ok(None);
                }
            }
            Ok(Some((*x).clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let eqs: Vec<Vec<TaggedReal>> = accepted.into_iter().flatten().collect();
    Ok(BruteForceReport {
        resolution,
        eps,
        grid_points,
        feasible_points: feasible.len(),
        equilibria: eqs.iter().map(|p| p.iter().map(|t| t.value).collect()).collect(),
        equilibrium_tags: table.map(|_| eqs.iter().map(|p| p.iter().map(|t| t.tag).collect()).collect()),
        warning: feasible
            .is_empty()
            .then(|| "resolution too coarse: no grid point lies in the shared set".to_string()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseLine {
    pub pattern: Vec<Tag>,
    pub consistent: bool,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonexistenceReport {
    pub tagged: bool,
    pub starts: usize,
    pub iterations: usize,
    pub fixed_points: Vec<Vec<f64>>,
    pub fixed_point_tags: Vec<Vec<Tag>>,
    pub trace: Vec<String>,
    pub cases: Vec<CaseLine>,
    pub fixed_point_exists: bool,
    pub verdict: String,
}

pub fn format_tagged(x: &[TaggedReal]) -> String {
    let parts: Vec<String> = x.iter().map(|t| format!("{:.6}:{}", t.value, t.tag)).collect();
    format!("({})", parts.join(", "))
}

fn same_bits(a: &[TaggedReal], b: &[TaggedReal]) -> bool {
    a.iter()
        .zip(b)
        .all(|(u, v)| u.tag == v.tag && u.value.to_bits() == v.value.to_bits())
}

fn case_analysis(problem: &GnepProblem, table: &TagTable) -> Vec<CaseLine> {
    let n = problem.n();
    let blocks = &problem.blocks;
    let (lo, hi) = problem.set.bounding_box().unwrap_or((vec![0.0; n], vec![1.0; n]));
    (0..1usize << n.min(16))
        .map(|mask| {
            let pattern: Vec<Tag> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { Tag::I } else { Tag::Q })
                .collect();
            let line = |consistent: bool, reason: String| CaseLine {
                pattern: pattern.clone(),
                consistent,
                reason,
            };
            let probe: Vec<TaggedReal> = pattern.iter().map(|&t| TaggedReal::new(0.0, t)).collect();
            for p in 0..problem.num_players() {
                let Some(rule) = problem.response_rule(p, &probe) else {
                    return line(true, format!("player {} has no tabled response; case left open", p + 1));
                };
                if let Some(i) = blocks.range(p).find(|&i| pattern[i] != rule.tag) {
                    return line(
                        false,
                        format!(
                            "player {}'s response is tagged {} but x{} is tagged {}",
                            p + 1,
                            rule.tag,
                            i + 1,
                            pattern[i]
                        ),
                    );
                }
            }
            let mut x: Vec<TaggedReal> = (0..n)
                .map(|i| TaggedReal::new(0.5 * (lo[i] + hi[i]), pattern[i]))
                .collect();
            let mut converged = false;
            for _ in 0..2000 {
                let mut next = Vec::with_capacity(n);
                for p in 0..problem.num_players() {
                    match problem.tabled_response(p, &x) {
                        Some(Ok(v)) => next.extend(v),
                        _ => return line(false, format!("player {}'s tabled response is undefined", p + 1)),
                    }
                }
                let step = norm_inf(&sub(
                    &next.iter().map(|t| t.value).collect::<Vec<_>>(),
                    &x.iter().map(|t| t.value).collect::<Vec<_>>(),
                ));
                x = next;
                if step == 0.0 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return line(
                    false,
                    "tabled responses do not settle; no fixed point in this case".into(),
                );
            }
            let values: Vec<String> = x.iter().map(|t| format!("{:.6}", t.value)).collect();
            if let Some(i) = (0..n).find(|&i| table.classify(x[i].value) != pattern[i]) {
                return line(
                    false,
                    format!(
                        "responses force x = ({}) but x{} = {:.6} is {} while the case requires {}",
                        values.join(", "),
                        i + 1,
                        x[i].value,
                        if table.classify(x[i].value) == Tag::Q {
                            "rational"
                        } else {
                            "irrational"
                        },
                        pattern[i]
                    ),
                );
            }
            line(true, format!("fixed point ({})", values.join(", ")))
        })
        .collect()
}

/// Iterates the best-response map from grid starts and reports fixed points.
/// Tagged problems get an exact, tag-aware iteration plus a case split over
/// all tag patterns; untagged ones use `|BR(x) - x|_inf <= 1e-6`.
pub fn nonexistence_probe(problem: &GnepProblem, iterations: usize) -> Result<NonexistenceReport> {
    let n = problem.n();
    let (lo, hi) = problem.set.bounding_box()?;
    let tagged = problem.is_tagged();
    let table = problem.tags.clone().unwrap_or_default();
    let res = if tagged { 0.125 } else { 0.5 };
    let axes: Vec<Vec<TaggedReal>> = (0..n)
        .map(|i| axis_candidates(lo[i], hi[i], (hi[i] - lo[i]).max(1e-9) * res, tagged.then_some(&table)))
        .collect();
    let starts: Vec<Vec<TaggedReal>> = cartesian(&axes.iter().collect::<Vec<_>>())
        .into_iter()
        .filter(|p| {
            let v: Vec<f64> = p.iter().map(|t| t.value).collect();
            problem.set.contains(&v, 1e-9).unwrap_or(false)
        })
        .collect();
    let mut fixed: Vec<Vec<TaggedReal>> = Vec::new();
    let mut trace = Vec::new();
    for (s, start) in starts.iter().enumerate() {
        let mut x = start.clone();
        if s == 0 {
            trace.push(format_tagged(&x));
        }
        for _ in 0..iterations {
            let values: Vec<f64> = x.iter().map(|t| t.value).collect();
            if !problem.set.contains(&values, 1e-7)? {
                break;
            }
            let next = if tagged {
                best_response_map_tagged(problem, &x)?
            } else {
                untagged(&best_response_map(problem, &values)?)
            };
            if s == 0 && trace.len() < 12 {
                trace.push(format_tagged(&next));
            }
            let is_fixed = if tagged {
                same_bits(&next, &x) && x.iter().all(|t| table.classify(t.value) == t.tag)
            } else {
                let nv: Vec<f64> = next.iter().map(|t| t.value).collect();
                norm_inf(&sub(&nv, &values)) <= 1e-6
            };
            if is_fixed {
                if !fixed.iter().any(|f| {
                    f.iter()
                        .zip(&x)
                        .all(|(a, b)| a.tag == b.tag && (a.value - b.value).abs() <= 1e-6)
                }) {
                    fixed.push(x.clone());
                }
                break;
            }
            x = next;
        }
    }
    let cases = if tagged {
        case_analysis(problem, &table)
    } else {
        Vec::new()
    };
    let exists = !fixed.is_empty();
    Ok(NonexistenceReport {
        tagged,
        starts: starts.len(),
        iterations,
        fixed_points: fixed.iter().map(|f| f.iter().map(|t| t.value).collect()).collect(),
        fixed_point_tags: fixed.iter().map(|f| f.iter().map(|t| t.tag).collect()).collect(),
        trace,
        cases,
        fixed_point_exists: exists,
        verdict: if exists { "fixed point exists" } else { "no fixed point" }.to_string(),
    })
}

/// Parses `"0.5,0.25:I"` into a tagged point (default tag `Q`).
pub fn parse_point(s: &str) -> std::result::Result<Vec<TaggedReal>, String> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            let (num, tag) = match part.rsplit_once(':') {
                Some((v, "Q")) => (v, Tag::Q),
                Some((v, "I")) => (v, Tag::I),
                Some((_, t)) => return Err(format!("unknown tag '{t}'")),
                None => (part, Tag::Q),
            };
            let v: f64 = num
                .trim()
                .parse()
                .map_err(|_| format!("malformed coordinate '{num}'"))?;
            if !v.is_finite() {
                return Err(format!("non-finite coordinate '{num}'"));
            }
            Ok(TaggedReal::new(v, tag))
        })
        .collect()
}

pub(crate) fn parse_expr_list(srcs: &[String], n: usize) -> Result<Vec<(Expr, String)>> {
    srcs.iter().map(|s| Ok((exprdsl::parse(s, n)?, s.clone()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn shared_resource_regrets() {
        let p = fixtures::shared_resource().problem;
        let r = check_gnep(&p, &[0.5, 0.5], &CheckConfig::default()).unwrap();
        assert!(r.max_regret <= 1e-12, "{r:?}");
        let r = check_gnep(&p, &[0.3, 0.3], &CheckConfig::default()).unwrap();
        assert!((r.players[0].regret - 0.4).abs() < 1e-9);
        assert!((r.players[0].best + 0.7).abs() < 1e-9);
    }

    #[test]
    fn quadratic_nep_best_responses() {
        let p = fixtures::quadratic_nep().problem;
        assert!(check_gnep(&p, &[0.0, 0.0], &CheckConfig::default()).unwrap().max_regret <= 1e-12);
        let br = best_response_map(&p, &[1.0, 1.0]).unwrap();
        assert!((br[0] - 1.0).abs() < 1e-6 && br[1].abs() < 1e-9, "{br:?}");
        let br = best_response_map(&p, &[0.0, 0.0]).unwrap();
        assert!(br.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn tagged_best_response() {
        let p = fixtures::rational_counterexample().problem;
        let br = best_response_map_tagged(&p, &[TaggedReal::q(0.4), TaggedReal::q(0.3)]).unwrap();
        assert_eq!(br[0], TaggedReal::i(std::f64::consts::FRAC_1_SQRT_2));
        assert_eq!(br[1], TaggedReal::q(0.2));
    }

    #[test]
    fn point_outside_set_is_rejected() {
        let p = fixtures::shared_resource().problem;
        assert!(matches!(
            check_gnep(&p, &[0.8, 0.8], &CheckConfig::default()),
            Err(Error::Usage { .. })
        ));
    }

    #[test]
    fn parse_points() {
        let x = parse_point("0.5, 0.25:I").unwrap();
        assert_eq!(x, vec![TaggedReal::q(0.5), TaggedReal::i(0.25)]);
        assert!(parse_point("0.5:X").is_err());
        assert!(parse_point("a").is_err());
    }

    #[test]
    fn controls_have_fixed_points() {
        let q = nonexistence_probe(&fixtures::quadratic_nep().problem, 30).unwrap();
        assert!(q.fixed_point_exists);
        assert!(q.fixed_points.iter().any(|f| f.iter().all(|v| v.abs() < 1e-6)));
        let s = nonexistence_probe(&fixtures::shared_resource().problem, 30).unwrap();
        assert!(s.fixed_point_exists);
    }
}
