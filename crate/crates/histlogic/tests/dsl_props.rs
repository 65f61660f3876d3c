use std::path::Path;

use histlogic::dsl::ast::*;
use histlogic::dsl::{format_model, parse_model, parse_syntax};
use proptest::prelude::*;

fn name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["p", "q", "X+", "Z-", "psi1", "t1.5", "alpha_2"])
        .prop_map(str::to_owned)
}

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![
        (0u32..100).prop_map(f64::from),
        (0.0f64..1e6),
        Just(1e-20),
        Just(0.1)
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        number().prop_map(Expr::Real),
        number().prop_map(Expr::Imag),
        name().prop_map(|n| Expr::Name(n, Span::default())),
        prop::collection::vec(number(), 1..4).prop_map(|d| Expr::Diag(d, None, Span::default())),
        prop::collection::vec(name(), 0..3).prop_map(|on| Expr::Identity(on, Span::default())),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        let op = prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]);
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            inner.clone().prop_map(|e| Expr::Not(Box::new(e))),
            inner.clone().prop_map(|e| Expr::Sqrt(Box::new(e))),
            inner.clone().prop_map(|e| Expr::Ket(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::Bin(
                o,
                Box::new(a),
                Box::new(b)
            )),
            prop::collection::vec(inner.clone(), 1..3)
                .prop_map(|v| Expr::SpanOf(v, Span::default())),
            prop::collection::vec(inner.clone(), 1..3)
                .prop_map(|v| Expr::Tensor(v, Span::default())),
            (
                prop::collection::vec(prop::collection::vec(inner.clone(), 1..3), 1..3),
                prop::collection::vec(name(), 0..2)
            )
                .prop_map(|(rows, on)| Expr::Matrix(rows, on, Span::default())),
            prop::collection::vec((inner.clone(), inner), 0..3)
                .prop_map(|p| Expr::Map(p, Span::default())),
        ]
    })
}

fn events() -> impl Strategy<Value = Events> {
    prop::collection::vec((expr(), name()), 1..3)
}

fn hexpr() -> impl Strategy<Value = HExpr> {
    let leaf = prop_oneof![
        name().prop_map(|n| HExpr::Name(n, Span::default())),
        events().prop_map(|e| HExpr::Events(e, Span::default())),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|h| HExpr::Not(Box::new(h))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| HExpr::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| HExpr::Or(Box::new(a), Box::new(b))),
        ]
    })
}

fn query() -> impl Strategy<Value = Query> {
    let pairs = || prop::collection::vec((name(), hexpr()), 0..3);
    prop_oneof![
        (hexpr(), hexpr(), name()).prop_map(|(target, given, family)| Query::Prob {
            target,
            given,
            family
        }),
        (hexpr(), name()).prop_map(|(target, family)| Query::Weight { target, family }),
        name().prop_map(|family| Query::Consistent { family }),
        (pairs(), pairs()).prop_map(|(assumptions, conclusions)| Query::Infer {
            assumptions,
            conclusions
        }),
        prop::collection::vec(name(), 0..3).prop_map(|families| Query::Compatible { families }),
    ]
}

fn item() -> impl Strategy<Value = Item> {
    let s = Span::default();
    prop_oneof![
        (name(), 1usize..5).prop_map(move |(name, dim)| Item::Space {
            name,
            dim,
            basis: vec![],
            span: s
        }),
        (name(), expr()).prop_map(move |(name, expr)| Item::State {
            name,
            expr,
            span: s
        }),
        (name(), expr()).prop_map(move |(name, expr)| Item::Projector {
            name,
            expr,
            span: s
        }),
        (name(), expr()).prop_map(move |(name, expr)| Item::Operator {
            name,
            expr,
            span: s
        }),
        prop::collection::vec((name(), prop::option::of(-10.0f64..10.0)), 1..4)
            .prop_map(move |entries| Item::Times { entries, span: s }),
        expr().prop_map(move |expr| Item::Hamiltonian { expr, span: s }),
        (name(), name(), expr()).prop_map(move |(from, to, expr)| Item::Step {
            from,
            to,
            expr,
            span: s
        }),
        (name(), events()).prop_map(move |(name, e)| Item::History {
            name,
            body: HistoryBody::Events(e),
            span: s
        }),
        (name(), expr()).prop_map(move |(name, e)| Item::History {
            name,
            body: HistoryBody::Generalized(e),
            span: s
        }),
        (
            name(),
            prop::collection::vec(
                prop_oneof![
                    name().prop_map(|n| FamilyMember::Name(n, Span::default())),
                    events().prop_map(|e| FamilyMember::Events(e, Span::default())),
                ],
                0..3
            )
        )
            .prop_map(move |(name, members)| Item::Family {
                name,
                members,
                span: s
            }),
        (
            query(),
            prop::option::of(prop_oneof![
                expr().prop_map(Expect::Value),
                prop::sample::select(EXPECT_WORDS.to_vec())
                    .prop_map(|w| Expect::Word(w.to_owned())),
            ])
        )
            .prop_map(move |(query, expect)| Item::Query {
                query,
                expect,
                span: s
            }),
    ]
}

fn reparse(text: &str) -> Model {
    parse_syntax(text).unwrap_or_else(|e| {
        panic!(
            "{e}
{text}"
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn format_then_parse_is_identity(it in item()) {
        let model = Model { items: vec![it] };
        let text = format_model(&model);
        let reparsed = reparse(&text);
        prop_assert_eq!(&reparsed, &model, "{}", text);
        prop_assert_eq!(format_model(&reparsed), text);
    }
}

#[test]
fn corpus_round_trips() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let model = parse_model(&text).unwrap();
        let formatted = format_model(&model);
        assert_eq!(
            parse_model(&formatted).unwrap(),
            model,
            "{}",
            path.display()
        );
        count += 1;
    }
    assert!(count >= 4);
}
