use proptest::prelude::*;

use gnep::exprdsl::parse;
use gnep::fixtures::random_convex_quadratic;
use gnep::geometry::ConvexBody;
use gnep::gnep::{best_response_map, check_gnep, CheckConfig};
use gnep::io::format_g17;
use gnep::linalg::{dist, dot, norm, sub};
use gnep::normal::{cones_at, ConeConfig};
use gnep::vi::{solve_vi, SolveOutcome, SolverConfig};

fn arb_expr(depth: u32) -> BoxedStrategy<String> {
    let leaf = prop_oneof![
        (0u32..20).prop_map(|k| format!("{}", k as f64 / 4.0)),
        (1usize..=3).prop_map(|i| format!("x{i}")),
    ];
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            (
                inner.clone(),
                inner.clone(),
                prop_oneof![Just("+"), Just("-"), Just("*")]
            )
                .prop_map(|(a, b, op)| format!("({a} {op} {b})")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("abs({a})")),
            (inner.clone(), 1u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("if x1 == 0.5 then {a} else {b}")),
        ]
    })
    .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g17_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_g17(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn expression_display_round_trips(src in arb_expr(4), x in prop::collection::vec(-2.0f64..2.0, 3)) {
        let e = parse(&src, 3).unwrap();
        let again = parse(&e.to_string(), 3).unwrap();
        prop_assert_eq!(e.to_string(), again.to_string());
        let (a, b) = (e.evaluate_plain(&x), again.evaluate_plain(&x));
        prop_assert_eq!(a.map(f64::to_bits).ok(), b.map(f64::to_bits).ok());
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive(
        a in prop::collection::vec(-3.0f64..3.0, 3),
        b in prop::collection::vec(-3.0f64..3.0, 3),
        r in 0.3f64..1.5,
    ) {
        let body = ConvexBody::new_intersection(vec![
            ConvexBody::new_box(vec![-1.0; 3], vec![1.0; 3]).unwrap(),
            ConvexBody::new_ball(vec![0.2, 0.0, -0.1], r).unwrap(),
        ]).unwrap();
        let (pa, pb) = (body.project(&a).unwrap(), body.project(&b).unwrap());
        prop_assert!(dist(&body.project(&pa).unwrap(), &pa) <= 1e-9);
        prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-9);
        // firm nonexpansiveness
        prop_assert!(dot(&sub(&pa, &pb), &sub(&a, &b)) >= dot(&sub(&pa, &pb), &sub(&pa, &pb)) - 1e-9);
    }

    #[test]
    fn cones_have_unit_generators(seed in 0u64..500, t in prop::collection::vec(0.0f64..1.0, 6)) {
        let p = random_convex_quadratic(seed);
        let bbox = p.set.bounding_box().unwrap();
        let z: Vec<f64> = (0..p.n()).map(|i| bbox.0[i] + t[i] * (bbox.1[i] - bbox.0[i])).collect();
        let x = p.set.project(&z).unwrap();
        for c in cones_at(&p, &x, &ConeConfig::default()).unwrap() {
            prop_assert!(!c.generators.is_empty());
            for g in &c.generators {
                prop_assert!((norm(g) - 1.0).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn certificates_are_equilibria(seed in 1000u64..5000) {
        let p = random_convex_quadratic(seed);
        let cfg = SolverConfig { seed, ..SolverConfig::default() };
        if let SolveOutcome::Certified(c) = solve_vi(&p, &cfg).unwrap() {
            prop_assert!(c.residual >= -1e-6);
            let r = check_gnep(&p, &c.x, &CheckConfig::default()).unwrap();
            prop_assert!(r.max_regret <= 1e-4, "regret {}", r.max_regret);
            // a certified point is a fixed point of the best-response map
            let br = best_response_map(&p, &c.x).unwrap();
            let gap: f64 = p.losses.iter().enumerate().map(|(k, l)| {
                let mut y = c.x.clone();
                y[p.blocks.range(k)].copy_from_slice(&br[p.blocks.range(k)]);
                l.eval_full(&c.x).unwrap() - l.eval_full(&y).unwrap()
            }).fold(0.0, f64::max);
            prop_assert!(gap <= 1e-4);
        }
    }
}
