//! Expression language for scenario-defined components.
//!
//! Grammar, loosest to tightest: `+ -`, `* /`, unary `-`, `^` (right
//! associative). Calls: `sin cos exp sinh cosh` with one argument and
//! `pow(a, b)`, which parses to `a ^ b`.

use std::fmt;

use thiserror::Error;

/// Divisors smaller than this in magnitude are rejected at evaluation.
pub const DIVISION_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown symbol `{name}`")]
    UnknownSymbol { name: String },
    #[error("evaluation failed: {0}")]
    Evaluation(String),
}

impl ExprError {
    pub fn name(&self) -> &'static str {
        match self {
            ExprError::Syntax { .. } => "SyntaxError",
            ExprError::UnknownSymbol { .. } => "UnknownSymbol",
            ExprError::Evaluation(_) => "EvaluationError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sinh,
    Cosh,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Exp, Func::Sinh, Func::Cosh];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
        }
    }
}

/// Expression tree. Literals are non-negative; negation is explicit.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Sym(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Sym(s) => f.write_str(s),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl Expr {
    /// Resolves symbols against coordinate names.
    pub fn bind(&self, coords: &[String]) -> Result<BoundExpr, ExprError> {
        Ok(BoundExpr {
            node: bind_node(self, coords)?,
            source: self.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

fn bind_node(e: &Expr, coords: &[String]) -> Result<Node, ExprError> {
    Ok(match e {
        Expr::Num(v) => Node::Num(*v),
        Expr::Sym(s) => Node::Var(
            coords
                .iter()
                .position(|c| c == s)
                .ok_or_else(|| ExprError::UnknownSymbol { name: s.clone() })?,
        ),
        Expr::Neg(a) => Node::Neg(Box::new(bind_node(a, coords)?)),
        Expr::Bin(op, a, b) => Node::Bin(
            *op,
            Box::new(bind_node(a, coords)?),
            Box::new(bind_node(b, coords)?),
        ),
        Expr::Call(f, a) => Node::Call(*f, Box::new(bind_node(a, coords)?)),
    })
}

/// An expression whose symbols are coordinate indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundExpr {
    node: Node,
    source: String,
}

impl BoundExpr {
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Guarded evaluation: tiny divisors and non-finite results are errors.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        let v = eval_node(&self.node, x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::Evaluation(format!(
                "`{}` is not finite",
                self.source
            )))
        }
    }
}

fn eval_node(n: &Node, x: &[f64]) -> Result<f64, ExprError> {
    let v = match n {
        Node::Num(v) => *v,
        Node::Var(i) => *x
            .get(*i)
            .ok_or_else(|| ExprError::Evaluation(format!("coordinate {i} missing")))?,
        Node::Neg(a) => -eval_node(a, x)?,
        Node::Call(f, a) => f.apply(eval_node(a, x)?),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval_node(a, x)?, eval_node(b, x)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b.abs() < DIVISION_GUARD {
                        return Err(ExprError::Evaluation(format!("division by {b:e}")));
                    }
                    a / b
                }
                BinOp::Pow => a.powf(b),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::Evaluation(
            "non-finite intermediate value".into(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                pos: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(ExprError::Syntax {
                        pos: i,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push((i, tok));
            i += c.len_utf8();
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.at += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.at += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.at += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.at += 1;
            // right operand may carry its own sign: 2^-x
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.at += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let e = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                if self.peek() != Some(&Tok::LParen) {
                    return Ok(Expr::Sym(name));
                }
                self.at += 1;
                if name == "pow" {
                    let a = self.sum()?;
                    self.expect(Tok::Comma, "`,` in pow(a, b)")?;
                    let b = self.sum()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b)));
                }
                let Some(func) = Func::from_name(&name) else {
                    self.at -= 2;
                    return self.error(format!("unknown function `{name}`"));
                };
                let a = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Call(func, Box::new(a)))
            }
            Some(_) => self.error("expected a number, symbol or `(`"),
            None => self.error("unexpected end of input"),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, ExprError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        at: 0,
        end: src.len(),
    };
    let e = p.sum()?;
    if p.at != p.toks.len() {
        return p.error("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords() -> Vec<String> {
        (1..=4).map(|i| format!("x{i}")).collect()
    }

    fn eval(src: &str, x: &[f64]) -> Result<f64, ExprError> {
        parse_expr(src)?.bind(&coords())?.eval(x)
    }

    #[test]
    fn exponential_of_coordinate() {
        let v = eval("exp(2*x1)", &[0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!((v - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn guarded_division() {
        assert!(matches!(
            eval("1/(x1)", &[0.0; 4]),
            Err(ExprError::Evaluation(_))
        ));
    }

    #[test]
    fn unknown_symbol_at_bind_time() {
        let e = parse_expr("cos(x1)*J").unwrap();
        assert_eq!(
            e.bind(&coords()),
            Err(ExprError::UnknownSymbol { name: "J".into() })
        );
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("-x1^2", &[3.0, 0.0, 0.0, 0.0]).unwrap(), -9.0);
        assert_eq!(eval("2^3^2", &[0.0; 4]).unwrap(), 512.0);
        assert_eq!(eval("1 - 2 - 3", &[0.0; 4]).unwrap(), -4.0);
        assert_eq!(eval("8 / 4 / 2", &[0.0; 4]).unwrap(), 1.0);
        assert_eq!(eval("1 + 2 * 3", &[0.0; 4]).unwrap(), 7.0);
        assert_eq!(eval("2^-1", &[0.0; 4]).unwrap(), 0.5);
        assert_eq!(
            eval("pow(x2, 2) + sinh(0) + cosh(0)", &[0.0, 3.0, 0.0, 0.0]).unwrap(),
            10.0
        );
        assert_eq!(eval("1.5e1", &[0.0; 4]).unwrap(), 15.0);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert!(matches!(
            parse_expr("1 + "),
            Err(ExprError::Syntax { pos: 4, .. })
        ));
        assert!(matches!(
            parse_expr("(x1"),
            Err(ExprError::Syntax { pos: 3, .. })
        ));
        assert!(matches!(
            parse_expr("x1 $ 2"),
            Err(ExprError::Syntax { pos: 3, .. })
        ));
        assert!(matches!(
            parse_expr("tan(x1)"),
            Err(ExprError::Syntax { pos: 0, .. })
        ));
        assert!(matches!(
            parse_expr("1 2"),
            Err(ExprError::Syntax { pos: 2, .. })
        ));
    }

    #[test]
    fn printing_is_fully_parenthesized() {
        let e = parse_expr("-x1 + 2*sin(x2)^2").unwrap();
        assert_eq!(e.to_string(), "((-x1) + (2 * (sin(x2) ^ 2)))");
        assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn non_finite_results_are_errors() {
        assert!(eval("(0-1)^0.5", &[0.0; 4]).is_err());
        assert!(eval("exp(1000)", &[0.0; 4]).is_err());
    }
}
