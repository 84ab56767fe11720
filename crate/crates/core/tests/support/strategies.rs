//! Random program strategies shared by the property and acceptance suites.

use proptest::prelude::*;
use vpdistill_core::ast::{ArithOp, BoolOpKind, CmpOp, Comprehension, WithItem};
use vpdistill_core::{AssignTarget, Expr, Program, Stmt};

const KEYWORDS: &[&str] = &[
    "and", "or", "not", "if", "else", "for", "in", "while", "with", "as", "True", "False", "None", "is",
    "lambda", "def", "return", "pass", "break", "continue", "import", "from", "class", "del", "global",
    "try", "except", "finally", "raise", "yield", "elif", "assert", "async", "await", "nonlocal",
];

fn ident() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_]{0,6}".prop_filter("keyword", |s| !KEYWORDS.contains(&s.as_str()))
}

fn target() -> impl Strategy<Value = AssignTarget> {
    prop_oneof![
        3 => ident().prop_map(AssignTarget::Name),
        1 => prop::collection::vec(ident().prop_map(AssignTarget::Name), 2..4).prop_map(AssignTarget::Tuple),
    ]
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop_oneof![
        Just(CmpOp::Eq),
        Just(CmpOp::NotEq),
        Just(CmpOp::Lt),
        Just(CmpOp::LtE),
        Just(CmpOp::Gt),
        Just(CmpOp::GtE)
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        ident().prop_map(Expr::Name),
        "[ -~\\n\\t]{0,8}".prop_map(Expr::Str),
        (0i64..100_000).prop_map(Expr::Int),
        any::<bool>().prop_map(Expr::Bool),
    ];
    leaf.prop_recursive(4, 48, 4, |inner| {
        let receiver = prop_oneof![
            ident().prop_map(Expr::Name),
            (ident(), prop::collection::vec(inner.clone(), 0..3)).prop_map(|(c, a)| Expr::call(c, a)),
        ]
        .boxed();
        let comp = (target(), inner.clone(), prop::collection::vec(inner.clone(), 0..2)).prop_map(|(target, iter, conditions)| {
            Comprehension { target, iter, conditions }
        }).boxed();
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Expr::List),
            (ident(), prop::collection::vec(inner.clone(), 0..3)).prop_map(|(c, a)| Expr::call(c, a)),
            (receiver.clone(), ident(), prop::collection::vec(inner.clone(), 0..3))
                .prop_map(|(r, m, a)| Expr::method(r, m, a)),
            (receiver.clone(), ident()).prop_map(|(r, name)| Expr::Attribute { receiver: Box::new(r), name }),
            (receiver, inner.clone()).prop_map(|(r, i)| Expr::Index { receiver: Box::new(r), index: Box::new(i) }),
            (inner.clone(), cmp_op(), inner.clone()).prop_map(|(l, op, r)| Expr::compare(l, op, r)),
            (inner.clone(), prop_oneof![Just(ArithOp::Add), Just(ArithOp::Sub)], inner.clone())
                .prop_map(|(l, op, r)| Expr::arith(l, op, r)),
            (prop_oneof![Just(BoolOpKind::And), Just(BoolOpKind::Or)], prop::collection::vec(inner.clone(), 2..4))
                .prop_map(|(op, operands)| Expr::BoolOp { op, operands }),
            inner.clone().prop_map(|e| Expr::Not(Box::new(e))),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(t, c, o)| Expr::Conditional {
                then: Box::new(t),
                test: Box::new(c),
                otherwise: Box::new(o)
            }),
            (inner.clone(), prop::collection::vec(comp.clone(), 1..3))
                .prop_map(|(e, generators)| Expr::ListComp { element: Box::new(e), generators }),
            (inner, prop::collection::vec(comp, 1..3))
                .prop_map(|(e, generators)| Expr::GenExp { element: Box::new(e), generators }),
        ]
    })
}

fn stmt() -> impl Strategy<Value = Stmt> {
    let simple = prop_oneof![
        3 => (prop::collection::vec(target(), 1..3), expr()).prop_map(|(targets, value)| Stmt::Assign { targets, value }),
        1 => expr().prop_map(Stmt::Expr),
    ];
    simple.prop_recursive(2, 12, 3, |inner| {
        let body = prop::collection::vec(inner, 1..3).boxed();
        prop_oneof![
            (target(), expr(), body.clone(), prop::option::of(body.clone())).prop_map(|(target, iter, body, orelse)| {
                Stmt::For { target, iter, body, orelse: orelse.unwrap_or_default() }
            }),
            (expr(), body.clone(), prop::option::of(body.clone())).prop_map(|(test, body, orelse)| Stmt::While {
                test,
                body,
                orelse: orelse.unwrap_or_default()
            }),
            (prop::collection::vec((expr(), prop::option::of(target())), 1..3), body).prop_map(|(items, body)| {
                Stmt::With {
                    items: items.into_iter().map(|(context, bound)| WithItem { context, bound }).collect(),
                    body,
                }
            }),
        ]
    })
}

pub fn program() -> impl Strategy<Value = Program> {
    prop::collection::vec(stmt(), 1..6).prop_map(Program::new)
}
