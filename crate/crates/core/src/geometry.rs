//! Compact convex sets in R^d and the four oracles the rest of the crate
//! consumes: membership, Euclidean projection, linear minimization and
//! per-player slicing.
//!
//! Polyhedral pieces (boxes and H-polytopes) are projected exactly through
//! a least-distance program. A single ball on top of a polyhedron is
//! handled by a one-dimensional search on its multiplier; with several
//! balls the projection falls back to Dykstra's alternating scheme and
//! linear minimization to a cutting-plane loop.

use std::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::linalg::{axpy, dist, dot, norm, sub, unit};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::nnls::{ldp, Ldp};

pub const DYKSTRA_MAX_ITERS: usize = 10_000;
pub const DYKSTRA_STEP_TOL: f64 = 1e-12;
/// Containment slack accepted after an iterative projection.
pub const PROJ_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid body: {0}")]
    InvalidBody(String),
    #[error("set is empty")]
    Empty,
    #[error("set is unbounded along {direction:?}")]
    Unbounded { direction: Vec<f64> },
    #[error("projection did not converge after {iterations} iterations (constraint violation {residual:.3e})")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("player index {0} out of range")]
    BadPlayer(usize),
}

type GResult<T> = Result<T, GeometryError>;

/// A closed convex subset of R^d.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvexBody {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `{ y : a y <= b }` with `a` stored row-major.
    HPolytope {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        dim: usize,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Intersection(Vec<ConvexBody>),
}

/// Per-player block layout of a strategy profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockStructure {
    pub fn new(dims: Vec<usize>) -> GResult<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(GeometryError::InvalidBody(
                "block structure needs at least one player and positive dimensions".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut acc = 0;
        for &d in &dims {
            offsets.push(acc);
            acc += d;
        }
        Ok(BlockStructure { dims, offsets })
    }

    pub fn num_players(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, player: usize) -> usize {
        self.dims[player]
    }

    pub fn n(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn range(&self, player: usize) -> Range<usize> {
        self.offsets[player]..self.offsets[player] + self.dims[player]
    }

    pub fn own<'a, T>(&self, player: usize, x: &'a [T]) -> &'a [T] {
        &x[self.range(player)]
    }

    /// Rival coordinates in ascending index order.
    pub fn rivals<T: Clone>(&self, player: usize, x: &[T]) -> Vec<T> {
        let r = self.range(player);
        x.iter()
            .enumerate()
            .filter(|(i, _)| !r.contains(i))
            .map(|(_, v)| v.clone())
            .collect()
    }

    /// Inverse of the `(own, rivals)` split.
    pub fn assemble<T: Clone>(&self, player: usize, own: &[T], rivals: &[T]) -> Vec<T> {
        let r = self.range(player);
        let mut out = Vec::with_capacity(self.n());
        out.extend_from_slice(&rivals[..r.start]);
        out.extend_from_slice(own);
        out.extend_from_slice(&rivals[r.start..]);
        out
    }

    pub fn check_player(&self, player: usize) -> GResult<()> {
        if player < self.num_players() {
            Ok(())
        } else {
            Err(GeometryError::BadPlayer(player))
        }
    }
}

fn check_dim(expected: usize, found: usize) -> GResult<()> {
    if expected == found {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, found })
    }
}

/// Halfspace rows plus balls.
struct Flat {
    dim: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    balls: Vec<(Vec<f64>, f64)>,
}

impl Flat {
    fn proj_poly(&self, z: &[f64]) -> GResult<Vec<f64>> {
        project_polyhedron(&self.a, &self.b, z)
    }
}

/// Exact projection onto `{ y : a y <= b }`.
pub fn project_polyhedron(a: &[Vec<f64>], b: &[f64], z: &[f64]) -> GResult<Vec<f64>> {
    if a.is_empty() {
        return Ok(z.to_vec());
    }
    // y = z + x with -a x >= a z - b
    let g: Vec<Vec<f64>> = a.iter().map(|row| row.iter().map(|v| -v).collect()).collect();
    let h: Vec<f64> = a.iter().zip(b).map(|(row, bi)| dot(row, z) - bi).collect();
    if h.iter().all(|&v| v <= 0.0) {
        return Ok(z.to_vec());
    }
    match ldp(&g, &h, z.len()) {
        Ldp::Solution(x) => Ok(z.iter().zip(&x).map(|(a, b)| a + b).collect()),
        Ldp::Infeasible => Err(GeometryError::Empty),
        Ldp::Failed => dykstra_halfspaces(a, b, z),
    }
}

fn project_halfspace(row: &[f64], bi: f64, z: &[f64]) -> Vec<f64> {
    let v = dot(row, z) - bi;
    if v <= 0.0 {
        return z.to_vec();
    }
    let nn = dot(row, row);
    if nn == 0.0 {
        return z.to_vec();
    }
    axpy(z, -v / nn, row)
}

fn project_ball(center: &[f64], radius: f64, z: &[f64]) -> Vec<f64> {
    let d = dist(z, center);
    if d <= radius {
        return z.to_vec();
    }
    center.iter().zip(z).map(|(c, zi)| c + (zi - c) * radius / d).collect()
}

fn dykstra<F>(z: &[f64], projections: &[F]) -> (Vec<f64>, usize)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = z.to_vec();
    let mut incr = vec![vec![0.0; z.len()]; projections.len()];
    for it in 0..DYKSTRA_MAX_ITERS {
        let prev = x.clone();
        for (p, inc) in projections.iter().zip(incr.iter_mut()) {
            let shifted: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
            let y = p(&shifted);
            *inc = sub(&shifted, &y);
            x = y;
        }
        if dist(&x, &prev) < DYKSTRA_STEP_TOL * (1.0 + norm(&x)) {
            return (x, it + 1);
        }
    }
    (x, DYKSTRA_MAX_ITERS)
}

fn dykstra_halfspaces(a: &[Vec<f64>], b: &[f64], z: &[f64]) -> GResult<Vec<f64>> {
    let projs: Vec<Box<dyn Fn(&[f64]) -> Vec<f64> + '_>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| Box::new(move |p: &[f64]| project_halfspace(row, bi, p)) as Box<dyn Fn(&[f64]) -> Vec<f64>>)
        .collect();
    let (x, iters) = dykstra(z, &projs);
    let viol = a
        .iter()
        .zip(b)
        .map(|(row, bi)| (dot(row, &x) - bi) / norm(row).max(1e-300))
        .fold(0.0_f64, f64::max);
    if viol > PROJ_TOL {
        return Err(GeometryError::NoConvergence {
            residual: viol,
            iterations: iters,
        });
    }
    Ok(x)
}

impl ConvexBody {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> GResult<Self> {
        let b = ConvexBody::Box { lower, upper };
        b.check_invariants()?;
        Ok(b)
    }

    pub fn new_hpolytope(a: Vec<Vec<f64>>, b: Vec<f64>, dim: usize) -> GResult<Self> {
        let p = ConvexBody::HPolytope { a, b, dim };
        p.check_invariants()?;
        Ok(p)
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> GResult<Self> {
        let b = ConvexBody::Ball { center, radius };
        b.check_invariants()?;
        Ok(b)
    }

    pub fn new_intersection(members: Vec<ConvexBody>) -> GResult<Self> {
        let b = ConvexBody::Intersection(members);
        b.check_invariants()?;
        Ok(b)
    }

    /// The empty subset of R^d, written as an infeasible polytope.
    pub fn empty(dim: usize) -> Self {
        ConvexBody::HPolytope {
            a: vec![vec![0.0; dim]],
            b: vec![-1.0],
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Box { lower, .. } => lower.len(),
            ConvexBody::HPolytope { dim, .. } => *dim,
            ConvexBody::Ball { center, .. } => center.len(),
            ConvexBody::Intersection(members) => members.first().map_or(0, |m| m.dim()),
        }
    }

    pub fn check_invariants(&self) -> GResult<()> {
        let bad = |s: &str| Err(GeometryError::InvalidBody(s.to_string()));
        match self {
            ConvexBody::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return bad("box bounds must be non-empty and of equal length");
                }
                if lower.iter().chain(upper).any(|v| !v.is_finite()) {
                    return bad("box bounds must be finite");
                }
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return bad("box requires lower <= upper componentwise");
                }
            }
            ConvexBody::HPolytope { a, b, dim } => {
                if *dim == 0 || a.len() != b.len() {
                    return bad("polytope needs dim > 0 and one rhs per row");
                }
                if a.iter().any(|row| row.len() != *dim) {
                    return bad("polytope rows must have length dim");
                }
                if a.iter().flatten().chain(b).any(|v| !v.is_finite()) {
                    return bad("polytope data must be finite");
                }
            }
            ConvexBody::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
                    return bad("ball center must be finite and non-empty");
                }
                if !(radius.is_finite() && *radius >= 0.0) {
                    return bad("ball radius must be finite and >= 0");
                }
            }
            ConvexBody::Intersection(members) => {
                if members.is_empty() {
                    return bad("intersection needs at least one member");
                }
                let d = members[0].dim();
                for m in members {
                    m.check_invariants()?;
                    if m.dim() != d {
                        return bad("intersection members must share a dimension");
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks invariants, non-emptiness and boundedness (2d axis linmins).
    pub fn validate(&self) -> GResult<()> {
        self.check_invariants()?;
        let d = self.dim();
        for i in 0..d {
            for s in [1.0, -1.0] {
                let c = unit(d, i, s);
                match self.linmin(&c) {
                    Ok(_) => {}
                    Err(GeometryError::Unbounded { .. }) => {
                        return Err(GeometryError::Unbounded {
                            direction: unit(d, i, -s),
                        })
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        self.project(&vec![0.0; d]).map(|_| ())
    }

    fn flatten_into(&self, flat: &mut Flat) {
        match self {
            ConvexBody::Box { lower, upper } => {
                for i in 0..lower.len() {
                    flat.a.push(unit(flat.dim, i, 1.0));
                    flat.b.push(upper[i]);
                    flat.a.push(unit(flat.dim, i, -1.0));
                    flat.b.push(-lower[i]);
                }
            }
            ConvexBody::HPolytope { a, b, .. } => {
                flat.a.extend(a.iter().cloned());
                flat.b.extend(b.iter().cloned());
            }
            ConvexBody::Ball { center, radius } => flat.balls.push((center.clone(), *radius)),
            ConvexBody::Intersection(ms) => ms.iter().for_each(|m| m.flatten_into(flat)),
        }
    }

    fn flatten(&self) -> Flat {
        let mut flat = Flat {
            dim: self.dim(),
            a: Vec::new(),
            b: Vec::new(),
            balls: Vec::new(),
        };
        self.flatten_into(&mut flat);
        flat
    }

    /// True when every constraint is linear.
    pub fn is_polyhedral(&self) -> bool {
        match self {
            ConvexBody::Ball { .. } => false,
            ConvexBody::Intersection(ms) => ms.iter().all(|m| m.is_polyhedral()),
            _ => true,
        }
    }

    /// Halfspace description `(a, b)` of a polyhedral body.
    pub fn halfspaces(&self) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        if !self.is_polyhedral() {
            return None;
        }
        let f = self.flatten();
        Some((f.a, f.b))
    }

    /// Flattened description: rows of `a y <= b` plus `(center, radius)` balls.
    pub fn constraints(&self) -> (Vec<Vec<f64>>, Vec<f64>, Vec<(Vec<f64>, f64)>) {
        let f = self.flatten();
        (f.a, f.b, f.balls)
    }

    /// Membership with every constraint relaxed by `tol` (in distance).
    pub fn contains(&self, z: &[f64], tol: f64) -> GResult<bool> {
        check_dim(self.dim(), z.len())?;
        Ok(self.contains_unchecked(z, tol))
    }

    fn contains_unchecked(&self, z: &[f64], tol: f64) -> bool {
        match self {
            ConvexBody::Box { lower, upper } => z
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            ConvexBody::HPolytope { a, b, .. } => a.iter().zip(b).all(|(row, bi)| dot(row, z) <= bi + tol * norm(row)),
            ConvexBody::Ball { center, radius } => dist(z, center) <= radius + tol,
            ConvexBody::Intersection(ms) => ms.iter().all(|m| m.contains_unchecked(z, tol)),
        }
    }

    /// Largest constraint violation of `z`, measured as a distance.
    pub fn violation(&self, z: &[f64]) -> f64 {
        match self {
            ConvexBody::Box { lower, upper } => z
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| (l - v).max(v - u))
                .fold(0.0_f64, f64::max),
            ConvexBody::HPolytope { a, b, .. } => a
                .iter()
                .zip(b)
                .map(|(row, bi)| {
                    let n = norm(row);
                    if n == 0.0 {
                        if *bi < 0.0 {
                            f64::INFINITY
                        } else {
                            0.0
                        }
                    } else {
                        (dot(row, z) - bi) / n
                    }
                })
                .fold(0.0_f64, f64::max),
            ConvexBody::Ball { center, radius } => (dist(z, center) - radius).max(0.0),
            ConvexBody::Intersection(ms) => ms.iter().map(|m| m.violation(z)).fold(0.0, f64::max),
        }
    }

    /// Euclidean projection of `z`.
    pub fn project(&self, z: &[f64]) -> GResult<Vec<f64>> {
        check_dim(self.dim(), z.len())?;
        match self {
            ConvexBody::Box { lower, upper } => Ok(z
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect()),
            ConvexBody::Ball { center, radius } => Ok(project_ball(center, *radius, z)),
            _ => {
                let flat = self.flatten();
                match flat.balls.len() {
                    0 => flat.proj_poly(z),
                    1 => project_poly_ball(&flat, z),
                    _ => self.project_dykstra(&flat, z),
                }
            }
        }
    }

    fn project_dykstra(&self, flat: &Flat, z: &[f64]) -> GResult<Vec<f64>> {
        let mut projs: Vec<Box<dyn Fn(&[f64]) -> Vec<f64> + '_>> = Vec::new();
        if !flat.a.is_empty() {
            // infeasible polyhedral part reported separately below
            projs.push(Box::new(move |p: &[f64]| {
                flat.proj_poly(p).unwrap_or_else(|_| p.to_vec())
            }));
            flat.proj_poly(z)?;
        }
        for (c, r) in &flat.balls {
            projs.push(Box::new(move |p: &[f64]| project_ball(c, *r, p)));
        }
        let (x, iters) = dykstra(z, &projs);
        let viol = self.violation(&x);
        if viol > PROJ_TOL {
            return Err(GeometryError::NoConvergence {
                residual: viol,
                iterations: iters,
            });
        }
        Ok(x)
    }

    /// Minimizer and minimum of `<c, y>` over the body.
    pub fn linmin(&self, c: &[f64]) -> GResult<(Vec<f64>, f64)> {
        check_dim(self.dim(), c.len())?;
        match self {
            ConvexBody::Box { lower, upper } => {
                let y: Vec<f64> = c
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(ci, (l, u))| {
                        if *ci > 0.0 {
                            *l
                        } else if *ci < 0.0 {
                            *u
                        } else {
                            *l
                        }
                    })
                    .collect();
                let v = dot(c, &y);
                Ok((y, v))
            }
            ConvexBody::Ball { center, radius } => {
                let n = norm(c);
                let y = if n == 0.0 {
                    center.clone()
                } else {
                    axpy(center, -radius / n, c)
                };
                let v = dot(c, &y);
                Ok((y, v))
            }
            _ => {
                let flat = self.flatten();
                match flat.balls.len() {
                    0 => linmin_poly(&flat.a, &flat.b, c, flat.dim),
                    1 => linmin_poly_ball(&flat, c),
                    _ => self.linmin_cutting_plane(&flat, c),
                }
            }
        }
    }

    fn linmin_cutting_plane(&self, flat: &Flat, c: &[f64]) -> GResult<(Vec<f64>, f64)> {
        let d = flat.dim;
        let mut a = flat.a.clone();
        let mut b = flat.b.clone();
        let (c0, r0) = &flat.balls[0];
        for i in 0..d {
            a.push(unit(d, i, 1.0));
            b.push(c0[i] + r0);
            a.push(unit(d, i, -1.0));
            b.push(-(c0[i] - r0));
        }
        let mut y = linmin_poly(&a, &b, c, d)?.0;
        for _ in 0..2000 {
            let (k, viol) = flat
                .balls
                .iter()
                .enumerate()
                .map(|(k, (bc, br))| (k, dist(&y, bc) - br))
                .max_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            if viol <= 1e-11 * (1.0 + norm(&y)) {
                break;
            }
            let (bc, br) = &flat.balls[k];
            let u = sub(&y, bc);
            let un = norm(&u);
            let u: Vec<f64> = u.iter().map(|v| v / un).collect();
            b.push(dot(&u, bc) + br);
            a.push(u);
            y = linmin_poly(&a, &b, c, d)?.0;
        }
        let y = self.project(&y)?;
        let v = dot(c, &y);
        Ok((y, v))
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> GResult<(Vec<f64>, Vec<f64>)> {
        match self {
            ConvexBody::Box { lower, upper } => Ok((lower.clone(), upper.clone())),
            ConvexBody::Ball { center, radius } => Ok((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            _ => {
                let d = self.dim();
                let mut lo = vec![0.0; d];
                let mut hi = vec![0.0; d];
                for i in 0..d {
                    lo[i] = self.linmin(&unit(d, i, 1.0))?.1;
                    hi[i] = -self.linmin(&unit(d, i, -1.0))?.1;
                }
                Ok((lo, hi))
            }
        }
    }

    pub fn is_empty(&self) -> GResult<bool> {
        match self.project(&vec![0.0; self.dim()]) {
            Ok(_) => Ok(false),
            Err(GeometryError::Empty) => Ok(true),
            Err(e) => Err(e),
        }
    }

    /// The set `{ x_own : (x_own, rivals) in self }` in R^{n_player}.
    pub fn slice(&self, blocks: &BlockStructure, player: usize, rivals: &[f64]) -> GResult<ConvexBody> {
        blocks.check_player(player)?;
        check_dim(blocks.n(), self.dim())?;
        check_dim(blocks.n() - blocks.dim(player), rivals.len())?;
        Ok(self.slice_unchecked(blocks, player, rivals))
    }

    fn slice_unchecked(&self, blocks: &BlockStructure, player: usize, rivals: &[f64]) -> ConvexBody {
        let own_dim = blocks.dim(player);
        match self {
            ConvexBody::Box { lower, upper } => {
                let rl = blocks.rivals(player, lower);
                let ru = blocks.rivals(player, upper);
                let inside = rivals
                    .iter()
                    .zip(rl.iter().zip(&ru))
                    .all(|(v, (l, u))| *v >= *l && *v <= *u);
                if !inside {
                    return ConvexBody::empty(own_dim);
                }
                ConvexBody::Box {
                    lower: blocks.own(player, lower).to_vec(),
                    upper: blocks.own(player, upper).to_vec(),
                }
            }
            ConvexBody::HPolytope { a, b, .. } => {
                let mut na = Vec::with_capacity(a.len());
                let mut nb = Vec::with_capacity(b.len());
                for (row, bi) in a.iter().zip(b) {
                    let own = blocks.own(player, row).to_vec();
                    let riv = blocks.rivals(player, row);
                    nb.push(bi - dot(&riv, rivals));
                    na.push(own);
                }
                ConvexBody::HPolytope {
                    a: na,
                    b: nb,
                    dim: own_dim,
                }
            }
            ConvexBody::Ball { center, radius } => {
                let rc = blocks.rivals(player, center);
                let d2 = rc.iter().zip(rivals).map(|(c, v)| (c - v) * (c - v)).sum::<f64>();
                let r2 = radius * radius - d2;
                if r2 < -1e-12 * radius.max(1.0) * radius.max(1.0) {
                    return ConvexBody::empty(own_dim);
                }
                ConvexBody::Ball {
                    center: blocks.own(player, center).to_vec(),
                    radius: r2.max(0.0).sqrt(),
                }
            }
            ConvexBody::Intersection(ms) => {
                ConvexBody::Intersection(ms.iter().map(|m| m.slice_unchecked(blocks, player, rivals)).collect())
            }
        }
    }

    /// Rejection sample from the bounding box; falls back to projecting a
    /// box sample when the body has (near) zero volume.
    pub fn sample<R: Rng + ?Sized>(&self, bbox: &(Vec<f64>, Vec<f64>), rng: &mut R, tries: usize) -> GResult<Vec<f64>> {
        let (lo, hi) = bbox;
        let mut last = Vec::new();
        for _ in 0..tries.max(1) {
            let z: Vec<f64> = lo
                .iter()
                .zip(hi)
                .map(|(l, h)| if h > l { rng.gen_range(*l..=*h) } else { *l })
                .collect();
            if self.contains_unchecked(&z, 0.0) {
                return Ok(z);
            }
            last = z;
        }
        self.project(&last)
    }
}

fn linmin_poly(a: &[Vec<f64>], b: &[f64], c: &[f64], dim: usize) -> GResult<(Vec<f64>, f64)> {
    let mut lp = LinearProgram::free(c.to_vec());
    for (row, bi) in a.iter().zip(b) {
        lp.add_row(row.clone(), Relation::Le, *bi);
    }
    match lp.minimize() {
        LpOutcome::Optimal { x, value } => Ok((x, value)),
        LpOutcome::Infeasible => Err(GeometryError::Empty),
        LpOutcome::Unbounded => Err(GeometryError::Unbounded {
            direction: c.iter().map(|v| -v).collect(),
        }),
        LpOutcome::Stalled => Err(GeometryError::NoConvergence {
            residual: f64::NAN,
            iterations: dim,
        }),
    }
}

/// Projection onto a polyhedron intersected with one ball: the ball
/// multiplier is found by bisection along `(1 - s) z + s c`.
fn project_poly_ball(flat: &Flat, z: &[f64]) -> GResult<Vec<f64>> {
    let (c, r) = (&flat.balls[0].0, flat.balls[0].1);
    let p0 = flat.proj_poly(z)?;
    if dist(&p0, c) <= r {
        return Ok(p0);
    }
    let pc = flat.proj_poly(c)?;
    if dist(&pc, c) > r * (1.0 + 1e-12) + 1e-14 {
        return Err(GeometryError::Empty);
    }
    let at = |s: f64| -> GResult<Vec<f64>> {
        let q: Vec<f64> = z.iter().zip(c).map(|(zi, ci)| (1.0 - s) * zi + s * ci).collect();
        flat.proj_poly(&q)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut best = pc;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let y = at(mid)?;
        if dist(&y, c) <= r {
            hi = mid;
            best = y;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

/// Linear minimization over a polyhedron intersected with one ball.
fn linmin_poly_ball(flat: &Flat, c: &[f64]) -> GResult<(Vec<f64>, f64)> {
    let d = flat.dim;
    let (c0, r) = (&flat.balls[0].0, flat.balls[0].1);
    let cn = norm(c);
    if cn == 0.0 {
        let y = project_poly_ball(flat, c0)?;
        return Ok((y, 0.0));
    }
    let mut a = flat.a.clone();
    let mut b = flat.b.clone();
    for i in 0..d {
        a.push(unit(d, i, 1.0));
        b.push(c0[i] + r);
        a.push(unit(d, i, -1.0));
        b.push(r - c0[i]);
    }
    let (y_lp, _) = linmin_poly(&a, &b, c, d)?;
    if dist(&y_lp, c0) <= r {
        let v = dot(c, &y_lp);
        return Ok((y_lp, v));
    }
    let pc = flat.proj_poly(c0)?;
    if dist(&pc, c0) > r * (1.0 + 1e-12) + 1e-14 {
        return Err(GeometryError::Empty);
    }
    // y(mu) = P(c0 - c / (2 mu)); ||y(mu) - c0|| is nonincreasing in mu
    let at = |mu: f64| flat.proj_poly(&axpy(c0, -0.5 / mu, c));
    let mu0 = cn / (2.0 * r.max(1e-300));
    let mut hi = mu0;
    let mut y_hi = at(hi)?;
    let mut k = 0;
    while dist(&y_hi, c0) > r {
        hi *= 4.0;
        y_hi = at(hi)?;
        k += 1;
        if k > 40 {
            y_hi = pc.clone();
            break;
        }
    }
    let mut lo = mu0;
    let mut k = 0;
    loop {
        let y = at(lo)?;
        if dist(&y, c0) > r {
            break;
        }
        hi = lo;
        y_hi = y;
        lo *= 0.25;
        k += 1;
        if k > 10 {
            let v = dot(c, &y_hi);
            return Ok((y_hi, v));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let y = at(mid)?;
        if dist(&y, c0) <= r {
            hi = mid;
            y_hi = y;
        } else {
            lo = mid;
        }
    }
    let v = dot(c, &y_hi);
    Ok((y_hi, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> ConvexBody {
        ConvexBody::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    fn simplex_corner() -> ConvexBody {
        ConvexBody::new_intersection(vec![
            ConvexBody::new_hpolytope(vec![vec![1.0, 1.0]], vec![1.0], 2).unwrap(),
            unit_square(),
        ])
        .unwrap()
    }

    fn disk() -> ConvexBody {
        ConvexBody::new_ball(vec![0.0, 0.0], 1.0).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn contains_examples() {
        assert!(unit_square().contains(&[0.5, 0.5], 0.0).unwrap());
        assert!(!simplex_corner().contains(&[0.7, 0.7], 0.0).unwrap());
        assert!(disk().contains(&[1.0, 0.0], 0.0).unwrap());
    }

    #[test]
    fn contains_rejects_wrong_dimension() {
        assert!(matches!(
            unit_square().contains(&[0.5], 0.0),
            Err(GeometryError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn project_examples() {
        assert_eq!(unit_square().project(&[2.0, 2.0]).unwrap(), vec![1.0, 1.0]);
        assert!(close(
            &simplex_corner().project(&[1.0, 1.0]).unwrap(),
            &[0.5, 0.5],
            1e-12
        ));
        assert!(close(&disk().project(&[3.0, 4.0]).unwrap(), &[0.6, 0.8], 1e-15));
    }

    #[test]
    fn linmin_examples() {
        let (y, v) = unit_square().linmin(&[-1.0, -1.0]).unwrap();
        assert_eq!((y, v), (vec![1.0, 1.0], -2.0));
        let (y, v) = simplex_corner().linmin(&[-1.0, -1.0]).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
        assert!(close(&y, &[1.0, 0.0], 1e-12) || close(&y, &[0.0, 1.0], 1e-12));
        let (y, v) = disk().linmin(&[0.0, 3.0]).unwrap();
        assert!(close(&y, &[0.0, -1.0], 1e-15) && (v + 3.0).abs() < 1e-15);
    }

    #[test]
    fn slice_examples() {
        let blocks = BlockStructure::new(vec![1, 1]).unwrap();
        let s = simplex_corner().slice(&blocks, 0, &[0.25]).unwrap();
        let (lo, hi) = s.bounding_box().unwrap();
        assert!((lo[0]).abs() < 1e-12 && (hi[0] - 0.75).abs() < 1e-12);

        let s = unit_square().slice(&blocks, 1, &[0.9]).unwrap();
        assert_eq!(
            s,
            ConvexBody::Box {
                lower: vec![0.0],
                upper: vec![1.0]
            }
        );

        let s = disk().slice(&blocks, 0, &[1.0]).unwrap();
        assert_eq!(
            s,
            ConvexBody::Ball {
                center: vec![0.0],
                radius: 0.0
            }
        );
        assert!(s.contains(&[0.0], 0.0).unwrap() && !s.contains(&[1e-9], 0.0).unwrap());
    }

    #[test]
    fn slice_can_be_empty() {
        let blocks = BlockStructure::new(vec![1, 1]).unwrap();
        let s = unit_square().slice(&blocks, 0, &[1.5]).unwrap();
        assert!(s.is_empty().unwrap());
        let s = simplex_corner().slice(&blocks, 0, &[1.5]).unwrap();
        assert!(s.is_empty().unwrap());
    }

    #[test]
    fn unbounded_polytope_rejected() {
        let p = ConvexBody::new_hpolytope(vec![vec![1.0, 1.0]], vec![1.0], 2).unwrap();
        assert!(matches!(p.validate(), Err(GeometryError::Unbounded { .. })));
    }

    #[test]
    fn empty_polytope_rejected() {
        let p = ConvexBody::new_intersection(vec![
            unit_square(),
            ConvexBody::new_hpolytope(vec![vec![1.0, 1.0]], vec![-1.0], 2).unwrap(),
        ])
        .unwrap();
        assert_eq!(p.validate(), Err(GeometryError::Empty));
    }

    #[test]
    fn invariants_enforced() {
        assert!(ConvexBody::new_box(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexBody::new_ball(vec![0.0], -1.0).is_err());
        assert!(ConvexBody::new_intersection(vec![
            unit_square(),
            disk(),
            ConvexBody::new_ball(vec![0.0], 1.0).unwrap()
        ])
        .is_err());
    }

    #[test]
    fn ball_and_halfspace_projection() {
        // disk cut by x1 >= 0.5: projecting (-1, 0) lands on (0.5, 0)
        let body = ConvexBody::new_intersection(vec![
            disk(),
            ConvexBody::new_hpolytope(vec![vec![-1.0, 0.0]], vec![-0.5], 2).unwrap(),
        ])
        .unwrap();
        assert!(close(&body.project(&[-1.0, 0.0]).unwrap(), &[0.5, 0.0], 1e-12));
        // (2, 2) lands on the arc
        let p = body.project(&[2.0, 2.0]).unwrap();
        let s = 0.5_f64.sqrt();
        assert!(close(&p, &[s, s], 1e-10));
        let (y, v) = body.linmin(&[1.0, 0.0]).unwrap();
        assert!((v - 0.5).abs() < 1e-10 && (y[0] - 0.5).abs() < 1e-10);
        let (y, v) = body.linmin(&[0.0, 1.0]).unwrap();
        assert!((v + 0.75_f64.sqrt()).abs() < 1e-9 && (y[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn two_balls_use_dykstra_and_cutting_planes() {
        let lens = ConvexBody::new_intersection(vec![
            ConvexBody::new_ball(vec![-0.5, 0.0], 1.0).unwrap(),
            ConvexBody::new_ball(vec![0.5, 0.0], 1.0).unwrap(),
        ])
        .unwrap();
        let p = lens.project(&[0.0, 2.0]).unwrap();
        let top = 0.75_f64.sqrt();
        assert!(close(&p, &[0.0, top], 1e-6));
        let (_, v) = lens.linmin(&[0.0, -1.0]).unwrap();
        assert!((v + top).abs() < 1e-6);
    }

    #[test]
    fn block_structure_roundtrip() {
        let b = BlockStructure::new(vec![2, 1, 3]).unwrap();
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        for p in 0..3 {
            let own = b.own(p, &x).to_vec();
            let riv = b.rivals(p, &x);
            assert_eq!(b.assemble(p, &own, &riv), x);
        }
        assert_eq!(b.range(2), 3..6);
    }
}
