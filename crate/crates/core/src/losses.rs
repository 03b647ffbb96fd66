//! Player loss functions and partial evaluation with frozen rivals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exprdsl::{self, finite_diff_with, EvalError, Expr, ParseError, Tag, TaggedReal};
use crate::geometry::{BlockStructure, ConvexBody, GeometryError};
use crate::linalg::{dot, mat_vec, norm};

pub const DEFAULT_SAMPLE_SEED: u64 = 0x5EED_0001;
pub const QC_TOL: f64 = 1e-9;
pub const SS_GAP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossFlags {
    pub claims_quasiconvex_own: bool,
    pub claims_continuous_rivals: bool,
    pub claims_pseudocontinuous_own: bool,
}

impl LossFlags {
    pub fn all() -> Self {
        LossFlags {
            claims_quasiconvex_own: true,
            claims_continuous_rivals: true,
            claims_pseudocontinuous_own: true,
        }
    }

    /// Quasiconvex and pseudocontinuous in own variables, discontinuous in rivals.
    pub fn own_only() -> Self {
        LossFlags {
            claims_continuous_rivals: false,
            ..Self::all()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LossBody {
    Expr {
        expr: Expr,
        source: String,
    },
    /// `x' Q x + q' x + c` over the full profile.
    Quadratic {
        q: Vec<Vec<f64>>,
        lin: Vec<f64>,
        c: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossFunction {
    n: usize,
    pub body: LossBody,
    pub gradient: Option<Vec<(Expr, String)>>,
    pub flags: LossFlags,
}

impl LossFunction {
    pub fn expr(source: &str, n: usize) -> Result<Self, ParseError> {
        let expr = exprdsl::parse(source, n)?;
        Ok(LossFunction {
            n,
            body: LossBody::Expr {
                expr,
                source: source.to_string(),
            },
            gradient: None,
            flags: LossFlags::default(),
        })
    }

    pub fn quadratic(q: Vec<Vec<f64>>, lin: Vec<f64>, c: f64) -> Result<Self, String> {
        let n = lin.len();
        if q.len() != n || q.iter().any(|r| r.len() != n) {
            return Err(format!("quadratic form must be {n}x{n}"));
        }
        for i in 0..n {
            for j in 0..i {
                if (q[i][j] - q[j][i]).abs() > 1e-12 * (1.0 + q[i][j].abs()) {
                    return Err(format!("quadratic form not symmetric at ({}, {})", i + 1, j + 1));
                }
            }
        }
        Ok(LossFunction {
            n,
            body: LossBody::Quadratic { q, lin, c },
            gradient: None,
            flags: LossFlags::default(),
        })
    }

    pub fn with_flags(mut self, flags: LossFlags) -> Self {
        self.flags = flags;
        self
    }

    /// Attaches an analytic gradient, one expression per coordinate.
    pub fn with_gradient(mut self, sources: &[&str]) -> Result<Self, ParseError> {
        if sources.len() != self.n {
            return Err(ParseError {
                line: 1,
                col: 1,
                message: format!("gradient needs {} components, got {}", self.n, sources.len()),
            });
        }
        let g = sources
            .iter()
            .map(|s| Ok((exprdsl::parse(s, self.n)?, s.to_string())))
            .collect::<Result<Vec<_>, ParseError>>()?;
        self.gradient = Some(g);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn uses_tags(&self) -> bool {
        matches!(&self.body, LossBody::Expr { expr, .. } if expr.has_tag_condition())
    }

    fn check_len(&self, found: usize) -> Result<(), EvalError> {
        if found != self.n {
            return Err(EvalError::Dimension {
                expected: self.n,
                found,
            });
        }
        Ok(())
    }

    pub fn eval_full(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.check_len(x.len())?;
        match &self.body {
            LossBody::Expr { expr, .. } => expr.evaluate_plain(x),
            LossBody::Quadratic { q, lin, c } => Ok(dot(x, &mat_vec(q, x)) + dot(lin, x) + c),
        }
    }

    pub fn eval_tagged(&self, x: &[TaggedReal]) -> Result<f64, EvalError> {
        self.check_len(x.len())?;
        match &self.body {
            LossBody::Expr { expr, .. } => expr.evaluate(x),
            LossBody::Quadratic { .. } => {
                let v: Vec<f64> = x.iter().map(|t| t.value).collect();
                self.eval_full(&v)
            }
        }
    }

    /// Full analytic gradient, when one is known.
    pub fn analytic_gradient(&self, x: &[f64]) -> Option<Result<Vec<f64>, EvalError>> {
        if let LossBody::Quadratic { q, lin, .. } = &self.body {
            let qx = mat_vec(q, x);
            return Some(Ok(qx.iter().zip(lin).map(|(a, b)| 2.0 * a + b).collect()));
        }
        let g = self.gradient.as_ref()?;
        Some(g.iter().map(|(e, _)| e.evaluate_plain(x)).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OwnGradient {
    Smooth(Vec<f64>),
    /// Central estimate at a point where one-sided slopes disagree.
    Nonsmooth(Vec<f64>),
}

impl OwnGradient {
    pub fn vector(&self) -> &[f64] {
        match self {
            OwnGradient::Smooth(g) | OwnGradient::Nonsmooth(g) => g,
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, OwnGradient::Smooth(_))
    }
}

/// `theta_player(., rivals)` with the rivals frozen.
#[derive(Clone, Debug)]
pub struct PlayerView<'a> {
    pub player: usize,
    pub blocks: &'a BlockStructure,
    pub loss: &'a LossFunction,
    pub rivals: Vec<f64>,
    pub rival_tags: Vec<Tag>,
}

impl<'a> PlayerView<'a> {
    /// Freezes the rival blocks of the full profile `x`.
    pub fn new(loss: &'a LossFunction, blocks: &'a BlockStructure, player: usize, x: &[f64]) -> Self {
        let rivals = blocks.rivals(player, x);
        let rival_tags = vec![Tag::Q; rivals.len()];
        PlayerView {
            player,
            blocks,
            loss,
            rivals,
            rival_tags,
        }
    }

    pub fn tagged(loss: &'a LossFunction, blocks: &'a BlockStructure, player: usize, x: &[TaggedReal]) -> Self {
        let r = blocks.rivals(player, x);
        PlayerView {
            player,
            blocks,
            loss,
            rivals: r.iter().map(|t| t.value).collect(),
            rival_tags: r.iter().map(|t| t.tag).collect(),
        }
    }

    pub fn own_dim(&self) -> usize {
        self.blocks.dim(self.player)
    }

    pub fn assemble(&self, z: &[f64]) -> Vec<f64> {
        self.blocks.assemble(self.player, z, &self.rivals)
    }

    fn assemble_tagged(&self, z: &[f64]) -> Vec<TaggedReal> {
        let own: Vec<TaggedReal> = z.iter().map(|&v| TaggedReal::q(v)).collect();
        let riv: Vec<TaggedReal> = self
            .rivals
            .iter()
            .zip(&self.rival_tags)
            .map(|(&v, &t)| TaggedReal::new(v, t))
            .collect();
        self.blocks.assemble(self.player, &own, &riv)
    }

    pub fn eval_own(&self, z: &[f64]) -> Result<f64, EvalError> {
        if z.len() != self.own_dim() {
            return Err(EvalError::Dimension {
                expected: self.own_dim(),
                found: z.len(),
            });
        }
        if self.rival_tags.iter().all(|t| *t == Tag::Q) {
            self.loss.eval_full(&self.assemble(z))
        } else {
            self.loss.eval_tagged(&self.assemble_tagged(z))
        }
    }

    /// Analytic own-block gradient if available, else central differences
    /// with step `h * (1 + |z_i|)`.
    pub fn own_gradient(&self, z: &[f64], h: f64, nonsmooth_tol: f64) -> Result<OwnGradient, EvalError> {
        let tags_plain = self.rival_tags.iter().all(|t| *t == Tag::Q);
        if tags_plain {
            if let Some(g) = self.loss.analytic_gradient(&self.assemble(z)) {
                return Ok(OwnGradient::Smooth(self.blocks.own(self.player, &g?).to_vec()));
            }
        }
        let (g, nonsmooth) = finite_diff_with(|p| self.eval_own(p), z, h, nonsmooth_tol)?;
        Ok(if nonsmooth {
            OwnGradient::Nonsmooth(g)
        } else {
            OwnGradient::Smooth(g)
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SampleCheck {
    Pass { trials: usize, seed: u64 },
    Counterexample { x: Vec<f64>, y: Vec<f64>, t: f64 },
}

impl SampleCheck {
    pub fn passed(&self) -> bool {
        matches!(self, SampleCheck::Pass { .. })
    }
}

/// Center and corners of the bounding box that lie in the domain.
fn anchors(domain: &ConvexBody, bbox: &(Vec<f64>, Vec<f64>)) -> Vec<Vec<f64>> {
    let (lo, hi) = bbox;
    let d = lo.len();
    let mut out = vec![lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect::<Vec<f64>>()];
    if d <= 10 {
        for mask in 0..(1usize << d) {
            out.push((0..d).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect());
        }
    }
    out.retain(|p| domain.contains(p, 1e-12).unwrap_or(false));
    out
}

fn draw(
    domain: &ConvexBody,
    bbox: &(Vec<f64>, Vec<f64>),
    anchors: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, GeometryError> {
    if !anchors.is_empty() && rng.gen_range(0..8) == 0 {
        return Ok(anchors[rng.gen_range(0..anchors.len())].clone());
    }
    domain.sample(bbox, rng, 64)
}

#[derive(Debug, thiserror::Error)]
pub enum SampleError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn triple_check<F>(
    view: &PlayerView<'_>,
    domain: &ConvexBody,
    trials: usize,
    seed: u64,
    mut violated: F,
) -> Result<SampleCheck, SampleError>
where
    F: FnMut(f64, f64, f64) -> bool,
{
    let bbox = domain.bounding_box()?;
    let anchors = anchors(domain, &bbox);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let x = draw(domain, &bbox, &anchors, &mut rng)?;
        let y = draw(domain, &bbox, &anchors, &mut rng)?;
        let t = if rng.gen_range(0..8) == 0 {
            0.5
        } else {
            rng.gen_range(0.01..=0.99)
        };
        let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let (hx, hy, hm) = (view.eval_own(&x)?, view.eval_own(&y)?, view.eval_own(&m)?);
        if violated(hx, hy, hm) {
            return Ok(SampleCheck::Counterexample { x, y, t });
        }
    }
    Ok(SampleCheck::Pass { trials, seed })
}

/// Looks for `h(t x + (1-t) y) > max(h(x), h(y)) + QC_TOL` on sampled triples.
pub fn check_quasiconvex_sample(
    view: &PlayerView<'_>,
    domain: &ConvexBody,
    trials: usize,
    seed: u64,
) -> Result<SampleCheck, SampleError> {
    triple_check(view, domain, trials, seed, |hx, hy, hm| hm > hx.max(hy) + QC_TOL)
}

/// Looks for `h(x) != h(y)` (gap above `SS_GAP`) with `h(t x + (1-t) y) >= max(h(x), h(y))`.
pub fn check_semistrict_sample(
    view: &PlayerView<'_>,
    domain: &ConvexBody,
    trials: usize,
    seed: u64,
) -> Result<SampleCheck, SampleError> {
    triple_check(view, domain, trials, seed, |hx, hy, hm| {
        (hx - hy).abs() > SS_GAP && hm >= hx.max(hy)
    })
}

/// Relative agreement of two gradients, for tests and diagnostics.
pub fn gradient_gap(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / (1.0 + norm(a).max(norm(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sign_switch() -> (LossFunction, BlockStructure) {
        let theta = LossFunction::expr("if x2 == 1 then -x1 else x1", 2)
            .unwrap()
            .with_flags(LossFlags::own_only());
        (theta, BlockStructure::new(vec![1, 1]).unwrap())
    }

    fn one_dim(src: &str) -> (LossFunction, BlockStructure) {
        (
            LossFunction::expr(src, 1).unwrap(),
            BlockStructure::new(vec![1]).unwrap(),
        )
    }

    #[test]
    fn sign_switch_values() {
        let (theta, blocks) = sign_switch();
        assert_eq!(theta.eval_full(&[2.0, 0.0]).unwrap(), 2.0);
        assert_eq!(theta.eval_full(&[2.0, 1.0]).unwrap(), -2.0);
        assert_eq!(
            PlayerView::new(&theta, &blocks, 0, &[0.0, 0.0])
                .eval_own(&[5.0])
                .unwrap(),
            5.0
        );
        assert_eq!(
            PlayerView::new(&theta, &blocks, 0, &[0.0, 1.0])
                .eval_own(&[5.0])
                .unwrap(),
            -5.0
        );
    }

    #[test]
    fn paraboloid_quadratic_form() {
        let f = LossFunction::quadratic(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(f.eval_full(&[0.0, 1.0]).unwrap(), 1.0);
        let blocks = BlockStructure::new(vec![1, 1]).unwrap();
        let g = PlayerView::new(&f, &blocks, 0, &[2.0, 1.0])
            .own_gradient(&[2.0], 1e-6, 1e-4)
            .unwrap();
        assert_eq!(g, OwnGradient::Smooth(vec![4.0]));
        assert!(LossFunction::quadratic(vec![vec![1.0, 2.0], vec![0.0, 1.0]], vec![0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn own_gradient_cases() {
        let f = LossFunction::expr("(x1 - x2)^2", 2).unwrap();
        let blocks = BlockStructure::new(vec![1, 1]).unwrap();
        let v = PlayerView::new(&f, &blocks, 0, &[1.0, 0.0]);
        let g = v.own_gradient(&[1.0], 1e-6, 1e-4).unwrap();
        assert!(g.is_smooth() && (g.vector()[0] - 2.0).abs() < 1e-6);
        assert_eq!(
            PlayerView::new(&f, &blocks, 0, &[0.0, 0.4]).eval_own(&[0.4]).unwrap(),
            0.0
        );
        let (a, b1) = one_dim("abs(x1)");
        let g = PlayerView::new(&a, &b1, 0, &[0.0])
            .own_gradient(&[0.0], 1e-6, 1e-4)
            .unwrap();
        assert!(!g.is_smooth());
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let f = LossFunction::expr("x1^2 * x2 + 3 * x2", 2)
            .unwrap()
            .with_gradient(&["2 * x1 * x2", "x1^2 + 3"])
            .unwrap();
        let blocks = BlockStructure::new(vec![2]).unwrap();
        for p in [[0.3, -1.2], [2.0, 0.5], [-1.0, 4.0]] {
            let v = PlayerView::new(&f, &blocks, 0, &p);
            let analytic = v.own_gradient(&p, 1e-6, 1e-4).unwrap();
            let (fd, _) = finite_diff_with(|z| v.eval_own(z), &p, 1e-6, 1e-4).unwrap();
            assert!(gradient_gap(analytic.vector(), &fd) < 1e-5);
        }
    }

    #[test]
    fn quasiconvex_sampling() {
        let (sq, b) = one_dim("x1^2");
        let unit = ConvexBody::new_box(vec![-1.0], vec![1.0]).unwrap();
        let v = PlayerView::new(&sq, &b, 0, &[0.0]);
        assert!(check_quasiconvex_sample(&v, &unit, 1000, 1).unwrap().passed());

        let (bump, b) = one_dim("min(x1, 2 - x1)");
        let dom = ConvexBody::new_box(vec![0.0], vec![2.0]).unwrap();
        let v = PlayerView::new(&bump, &b, 0, &[0.0]);
        assert!(!check_quasiconvex_sample(&v, &dom, 1000, 1).unwrap().passed());
        // the triple from the worked example: h(0) = h(2) = 0 < h(1) = 1
        assert!(v.eval_own(&[1.0]).unwrap() > v.eval_own(&[0.0]).unwrap().max(v.eval_own(&[2.0]).unwrap()));

        let (theta, blocks) = sign_switch();
        let v = PlayerView::new(&theta, &blocks, 0, &[0.0, 1.0]);
        assert!(check_quasiconvex_sample(&v, &unit, 1000, 1).unwrap().passed());
    }

    #[test]
    fn semistrict_sampling() {
        let unit = ConvexBody::new_box(vec![-1.0], vec![1.0]).unwrap();
        let (sq, b) = one_dim("x1^2");
        assert!(
            check_semistrict_sample(&PlayerView::new(&sq, &b, 0, &[0.0]), &unit, 1000, 3)
                .unwrap()
                .passed()
        );
        let (zero, b) = one_dim("0");
        assert!(
            check_semistrict_sample(&PlayerView::new(&zero, &b, 0, &[0.0]), &unit, 1000, 3)
                .unwrap()
                .passed()
        );
        let (step, b) = one_dim("if x1 == 0 then 0 else 1");
        let v = PlayerView::new(&step, &b, 0, &[0.0]);
        assert!(!check_semistrict_sample(&v, &unit, 1000, 3).unwrap().passed());
        // x = 0, y = 1, t = 0.5: h(0.5) = 1 = max(h(0), h(1))
        assert_eq!(v.eval_own(&[0.5]).unwrap(), 1.0);
    }
}
