use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sipcert_core::checks::{five_point_gradient, random_smooth_expr};
use sipcert_core::exprlang::{BinOp, EvalError, Expr, ExprFn, Func, Func2, ParseError};

fn any_expr(p: usize) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0..p).prop_map(Expr::X),
        (0.0f64..10.0).prop_map(Expr::Const),
        Just(Expr::T(0)),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow),
        ];
        let func = prop_oneof![
            Just(Func::Sin),
            Just(Func::Cos),
            Just(Func::Exp),
            Just(Func::Log),
            Just(Func::Sqrt),
            Just(Func::Abs),
        ];
        let func2 = prop_oneof![Just(Func2::Min), Just(Func2::Max)];
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (op, inner.clone(), inner.clone())
                .prop_map(|(o, a, b)| Expr::Binary(o, Box::new(a), Box::new(b))),
            (func, inner.clone()).prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
            (func2, inner.clone(), inner).prop_map(|(f, a, b)| Expr::Call2(f, Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(e in any_expr(3)) {
        let f = ExprFn::from_ast(e.clone(), 3, 1).unwrap();
        let back = ExprFn::parse(&f.to_string(), 3, 1).unwrap();
        prop_assert_eq!(back.ast(), &e);
    }

    #[test]
    fn evaluation_is_finite_or_an_error(
        e in any_expr(2),
        x in prop::collection::vec(-3.0f64..3.0, 2),
        t in -3.0f64..3.0,
    ) {
        let f = ExprFn::from_ast(e, 2, 1).unwrap();
        if let Ok(v) = f.eval(&x, &[t]) {
            prop_assert!(v.is_finite());
        }
        if let Ok((v, g)) = f.value_and_grad(&x, &[t]) {
            prop_assert!(v.is_finite() && g.iter().all(|d| d.is_finite()));
        }
    }

    #[test]
    fn smooth_gradients_match_differences(seed in any::<u64>(), x in prop::collection::vec(-1.0f64..1.0, 3)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = ExprFn::from_ast(random_smooth_expr(&mut rng, 3, 3), 3, 0).unwrap();
        let g = f.grad(&x, &[]).unwrap();
        let d = five_point_gradient(|y| f.eval(y, &[]).ok(), &x, 1e-3).unwrap();
        let scale = 1.0 + g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in g.iter().zip(&d) {
            prop_assert!((a - b).abs() <= 1e-6 * scale, "{} at {:?}: {:?} vs {:?}", f, x, g, d);
        }
    }
}

#[test]
fn counterexample_functions() {
    let f = ExprFn::parse("-x1^2 - x2", 2, 0).unwrap();
    assert_eq!(f.eval(&[0.0, 0.0], &[]).unwrap(), 0.0);
    assert_eq!(f.grad(&[0.0, 0.0], &[]).unwrap(), vec![0.0, -1.0]);
    let phi0 = ExprFn::parse("x1", 2, 0).unwrap();
    assert_eq!(phi0.grad(&[3.0, -2.0], &[]).unwrap(), vec![1.0, 0.0]);
    let phi3 = ExprFn::parse("x2 + 1/3", 2, 0).unwrap();
    assert_eq!(phi3.eval(&[0.0, 0.0], &[]).unwrap(), 1.0 / 3.0);
}

#[test]
fn sip_constraint_gradient() {
    let h = ExprFn::parse("1 - t1*x1 - (1-t1)*x2", 2, 1).unwrap();
    let g = h.grad(&[1.0, 1.0], &[0.3]).unwrap();
    assert!((g[0] + 0.3).abs() < 1e-15 && (g[1] + 0.7).abs() < 1e-15);
    let d = five_point_gradient(|y| h.eval(y, &[0.3]).ok(), &[1.0, 1.0], 1e-6).unwrap();
    assert!(g.iter().zip(&d).all(|(a, b)| (a - b).abs() <= 1e-8));
}

#[test]
fn unknown_identifier_is_reported_at_its_offset() {
    let err = ExprFn::parse("y + 1/k", 2, 0).unwrap_err();
    assert_eq!(err, ParseError::UnknownIdentifier { name: "y".into(), offset: 0 });
}

#[test]
fn kinks_and_domains() {
    let f = ExprFn::parse("abs(x1)", 1, 0).unwrap();
    assert_eq!(f.eval(&[0.0], &[]).unwrap(), 0.0);
    assert!(matches!(f.grad(&[0.0], &[]), Err(EvalError::Kink { .. })));
    assert_eq!(f.grad(&[-2.0], &[]).unwrap(), vec![-1.0]);
    let g = ExprFn::parse("log(x1) + sqrt(x1) + 1/x1", 1, 0).unwrap();
    for x in [0.0, -1.0] {
        assert!(g.eval(&[x], &[]).is_err());
    }
}
