use paraquat_core::expr::{BinOp, Expr, Func};
use proptest::prelude::*;

fn symbol() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_]{0,4}".prop_filter("reserved", |s| {
        s != "pow" && Func::ALL.iter().all(|f| f.name() != s)
    })
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0_f64..1e6).prop_map(Expr::Num),
        symbol().prop_map(Expr::Sym)
    ]
}

fn op() -> impl Strategy<Value = BinOp> {
    prop_oneof![
        Just(BinOp::Add),
        Just(BinOp::Sub),
        Just(BinOp::Mul),
        Just(BinOp::Div),
        Just(BinOp::Pow)
    ]
}

/// Random expression trees of depth at most 6.
pub fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op(), inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::Bin(
                o,
                Box::new(a),
                Box::new(b)
            )),
            (prop::sample::select(Func::ALL.to_vec()), inner)
                .prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
        ]
    })
}

pub fn depth(e: &Expr) -> usize {
    match e {
        Expr::Num(_) | Expr::Sym(_) => 0,
        Expr::Neg(a) | Expr::Call(_, a) => 1 + depth(a),
        Expr::Bin(_, a, b) => 1 + depth(a).max(depth(b)),
    }
}
