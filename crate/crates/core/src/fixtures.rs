//! Worked examples and control problems shared by tests, the CLI and docs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exprdsl::{self, Tag};
use crate::geometry::{BlockStructure, ConvexBody};
use crate::gnep::{GnepProblem, TagRule, TagTable};
use crate::losses::{LossFlags, LossFunction};

/// What a fixture is expected to reproduce.
#[derive(Clone, Debug, PartialEq)]
pub enum Expectation {
    /// `D_player(x)` is the convex hull of `generators`, or the unit ball.
    DSet {
        player: usize,
        x: Vec<f64>,
        generators: Vec<Vec<f64>>,
        full_ball: bool,
    },
    /// An equilibrium within `tol` of `x` (or on the listed facet).
    Equilibrium {
        x: Vec<f64>,
        tol: f64,
    },
    /// Equilibria fill `{ y : <a, y> = b }` inside the shared set.
    EquilibriumFacet {
        a: Vec<f64>,
        b: f64,
    },
    NoEquilibrium,
    /// The lower-semicontinuity probe for `player` fails at `x`.
    NotLsc {
        player: usize,
        x: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub summary: &'static str,
    pub problem: GnepProblem,
    pub expected: Vec<Expectation>,
}

fn unit_box(lo: f64, hi: f64, n: usize) -> ConvexBody {
    ConvexBody::new_box(vec![lo; n], vec![hi; n]).expect("valid box")
}

fn expr(src: &str) -> LossFunction {
    LossFunction::expr(src, 2).expect("fixture expression parses")
}

fn two_scalar_players() -> BlockStructure {
    BlockStructure::new(vec![1, 1]).expect("valid blocks")
}

fn build(name: &str, losses: Vec<LossFunction>, set: ConvexBody) -> GnepProblem {
    GnepProblem::new(name, two_scalar_players(), losses, set).expect("fixture is well formed")
}

/// `Theta(x, y) = x` for `y != 1`, `-x` for `y = 1`, as player 1's loss; the
/// second player is idle.
pub fn e1_bifunction() -> Fixture {
    let problem = build(
        "e1_bifunction",
        vec![
            expr("if x2 == 1 then -x1 else x1").with_flags(LossFlags::own_only()),
            expr("0").with_flags(LossFlags::all()),
        ],
        unit_box(-3.0, 3.0, 2),
    );
    Fixture {
        name: "e1_bifunction",
        summary: "sign-switching bifunction; sublevel map not lsc at (0,1)",
        problem,
        expected: vec![
            Expectation::DSet {
                player: 0,
                x: vec![0.0, 0.0],
                generators: vec![vec![1.0]],
                full_ball: false,
            },
            Expectation::DSet {
                player: 0,
                x: vec![0.0, 1.0],
                generators: vec![vec![-1.0]],
                full_ball: false,
            },
            Expectation::NotLsc {
                player: 0,
                x: vec![0.0, 1.0],
            },
        ],
    }
}

/// `f(x, y) = x^2 + y^2` for player 1 on `[-1,1] x [0,1]`.
pub fn product_paraboloid() -> Fixture {
    let q = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let problem = build(
        "product_paraboloid",
        vec![
            LossFunction::quadratic(q, vec![0.0, 0.0], 0.0)
                .expect("symmetric")
                .with_flags(LossFlags::all()),
            expr("0").with_flags(LossFlags::all()),
        ],
        ConvexBody::new_box(vec![-1.0, 0.0], vec![1.0, 1.0]).expect("valid box"),
    );
    Fixture {
        name: "product_paraboloid",
        summary: "x^2 + y^2; strict sublevel at the slice minimizer is empty",
        problem,
        expected: vec![
            Expectation::DSet {
                player: 0,
                x: vec![0.0, 1.0],
                generators: Vec::new(),
                full_ball: true,
            },
            Expectation::Equilibrium {
                x: vec![0.0, 0.0],
                tol: 1e-6,
            },
        ],
    }
}

/// Both players use the sign-switching loss against each other on `[0,2]^2`.
pub fn two_player_nonclosed_t() -> Fixture {
    let problem = build(
        "two_player_nonclosed_t",
        vec![
            expr("if x2 == 1 then -x1 else x1").with_flags(LossFlags::own_only()),
            expr("if x1 == 1 then -x2 else x2").with_flags(LossFlags::own_only()),
        ],
        unit_box(0.0, 2.0, 2),
    );
    let d = |x: [f64; 2], g: [f64; 2]| {
        (0..2).map(move |p| Expectation::DSet {
            player: p,
            x: x.to_vec(),
            generators: vec![vec![g[p]]],
            full_ball: false,
        })
    };
    Fixture {
        name: "two_player_nonclosed_t",
        summary: "D jumps from {+1} to {-1} when the rival hits 1",
        problem,
        expected: d([0.5, 0.5], [1.0, 1.0])
            .chain(d([1.0, 1.0], [-1.0, -1.0]))
            .chain([Expectation::Equilibrium {
                x: vec![0.0, 0.0],
                tol: 1e-9,
            }])
            .collect(),
    }
}

pub const SQRT2_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Losses branching on whether the rival is rational; equilibria do not
/// exist once tags are respected.
pub fn rational_counterexample() -> Fixture {
    let flags = LossFlags::own_only();
    let losses = vec![
        expr("if tag(x2) == Q then (x1 - 0.7071067811865476)^2 else (2*x1 - x2)^2").with_flags(flags),
        expr("if tag(x1) == I then (x2 - x1)^2 else (2*x2 - x1)^2").with_flags(flags),
    ];
    let rule = |player: usize, rival: Tag, src: &str, tag: Tag| TagRule {
        player,
        rivals: vec![rival],
        value: vec![(exprdsl::parse(src, 2).expect("rule parses"), src.to_string())],
        tag,
    };
    let table = TagTable {
        rules: vec![
            rule(0, Tag::Q, "0.7071067811865476", Tag::I),
            rule(0, Tag::I, "x2 / 2", Tag::I),
            rule(1, Tag::I, "x1", Tag::I),
            rule(1, Tag::Q, "x1 / 2", Tag::Q),
        ],
        irrational_constants: vec![SQRT2_HALF, SQRT2_HALF / 2.0],
    };
    let problem = build("rational_counterexample", losses, unit_box(0.0, 1.0, 2))
        .with_tags(table)
        .expect("rules match blocks");
    Fixture {
        name: "rational_counterexample",
        summary: "tag-dependent losses; best responses alternate Q/I without a fixed point",
        problem,
        expected: vec![Expectation::NoEquilibrium],
    }
}

/// `theta1 = (x1 - x2)^2`, `theta2 = (x2 + x1/2)^2` on `[0,1]^2`; unique
/// equilibrium at the origin.
pub fn quadratic_nep() -> Fixture {
    let q = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
    let problem = build(
        "quadratic_nep",
        vec![
            LossFunction::quadratic(q, vec![0.0, 0.0], 0.0)
                .expect("symmetric")
                .with_flags(LossFlags::all()),
            expr("(x2 + x1/2)^2").with_flags(LossFlags::all()),
        ],
        unit_box(0.0, 1.0, 2),
    );
    Fixture {
        name: "quadratic_nep",
        summary: "smooth convex control problem",
        problem,
        expected: vec![Expectation::Equilibrium {
            x: vec![0.0, 0.0],
            tol: 1e-6,
        }],
    }
}

/// Two players maximizing their share of a unit resource.
pub fn shared_resource() -> Fixture {
    let set = ConvexBody::new_intersection(vec![
        ConvexBody::new_hpolytope(vec![vec![1.0, 1.0]], vec![1.0], 2).expect("valid"),
        unit_box(0.0, 1.0, 2),
    ])
    .expect("valid intersection");
    let problem = build(
        "shared_resource",
        vec![
            expr("-x1").with_flags(LossFlags::all()),
            expr("-x2").with_flags(LossFlags::all()),
        ],
        set,
    );
    Fixture {
        name: "shared_resource",
        summary: "linear losses on a shared budget; equilibria fill the facet x1 + x2 = 1",
        problem,
        expected: vec![Expectation::EquilibriumFacet {
            a: vec![1.0, 1.0],
            b: 1.0,
        }],
    }
}

pub fn fixture_catalog() -> Vec<Fixture> {
    vec![
        e1_bifunction(),
        product_paraboloid(),
        two_player_nonclosed_t(),
        rational_counterexample(),
        quadratic_nep(),
        shared_resource(),
    ]
}

pub fn fixture_by_name(name: &str) -> Option<Fixture> {
    fixture_catalog().into_iter().find(|f| f.name == name)
}

/// Random jointly convex quadratic game: PSD own curvature for every player,
/// and a bounded polytope made of a box plus random cuts keeping the origin
/// strictly inside.
pub fn random_convex_quadratic(seed: u64) -> GnepProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let players = rng.gen_range(2..=3);
    let dims: Vec<usize> = (0..players).map(|_| rng.gen_range(1..=2)).collect();
    let n: usize = dims.iter().sum();
    let blocks = BlockStructure::new(dims).expect("positive dims");
    let losses = (0..players)
        .map(|_| {
            let m: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let mut q = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    q[i][j] = (0..n).map(|k| m[k][i] * m[k][j]).sum::<f64>() + if i == j { 0.1 } else { 0.0 };
                }
            }
            let lin: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            LossFunction::quadratic(q, lin, 0.0)
                .expect("symmetric")
                .with_flags(LossFlags::all())
        })
        .collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut row = vec![0.0; n];
            row[i] = s;
            a.push(row);
            b.push(rng.gen_range(0.5..1.5));
        }
    }
    for _ in 0..rng.gen_range(1..=3) {
        a.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        b.push(rng.gen_range(0.3..1.0));
    }
    let set = ConvexBody::new_hpolytope(a, b, n).expect("valid polytope");
    GnepProblem::new(&format!("random_quadratic_{seed}"), blocks, losses, set).expect("well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnep::{brute_force_gne, check_gnep, CheckConfig};
    use crate::normal::{t_of, ConeConfig};

    #[test]
    fn catalog_names_unique() {
        let c = fixture_catalog();
        let mut names: Vec<_> = c.iter().map(|f| f.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), c.len());
        assert!(fixture_by_name("quadratic_nep").is_some());
    }

    #[test]
    fn d_set_expectations_hold() {
        for f in fixture_catalog() {
            for e in &f.expected {
                if let Expectation::DSet {
                    player,
                    x,
                    generators,
                    full_ball,
                } = e
                {
                    let d = t_of(&f.problem, x, &ConeConfig::default()).unwrap();
                    assert_eq!(d[*player].full_ball, *full_ball, "{}", f.name);
                    if !full_ball {
                        assert_eq!(&d[*player].generators, generators, "{} at {x:?}", f.name);
                    }
                }
            }
        }
    }

    #[test]
    fn equilibrium_expectations_hold() {
        for f in fixture_catalog() {
            for e in &f.expected {
                match e {
                    Expectation::Equilibrium { x, tol } => {
                        let r = check_gnep(&f.problem, x, &CheckConfig::default()).unwrap();
                        assert!(r.max_regret <= *tol, "{}: {r:?}", f.name);
                    }
                    Expectation::EquilibriumFacet { a, b } => {
                        let r = brute_force_gne(&f.problem, 0.1, 1e-3).unwrap();
                        assert!(!r.equilibria.is_empty());
                        for x in &r.equilibria {
                            let v: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                            assert!((v - b).abs() < 1e-9, "{x:?}");
                        }
                    }
                    Expectation::NoEquilibrium => {
                        let r = brute_force_gne(&f.problem, 0.05, 1e-3).unwrap();
                        assert!(r.equilibria.is_empty(), "{:?}", r.equilibria);
                    }
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn random_instances_are_bounded_and_contain_origin() {
        for s in 0..10 {
            let p = random_convex_quadratic(s);
            assert!(p.n() <= 6);
            assert!(p.set.contains(&vec![0.0; p.n()], 0.0).unwrap());
            p.set.bounding_box().unwrap();
        }
    }
}
