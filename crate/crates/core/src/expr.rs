//! Coefficient expressions: a small arithmetic language over the variables
//! `x, t, y, c, delta`.
//!
//! Precedence, loosest first: `+ -`, `* /`, unary `-`, `^` (right associative).
//! So `-x^2` is `-(x^2)` and `2^3^2` is `2^(3^2)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    T,
    Y,
    C,
    Delta,
}

impl Var {
    fn from_name(s: &str) -> Option<Var> {
        Some(match s {
            "x" => Var::X,
            "t" => Var::T,
            "y" => Var::Y,
            "c" => Var::C,
            "delta" => Var::Delta,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::T => "t",
            Var::Y => "y",
            Var::C => "c",
            Var::Delta => "delta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tanh,
    Min,
    Max,
    Abs,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "min" => Func::Min,
            "max" => Func::Max,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
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
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {offset}: {message} (expected {})", expected.join(", "))]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
    pub expected: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{func} of {arg} is undefined at {at}")]
    Domain { func: &'static str, arg: f64, at: String },
    #[error("division by zero at {at}")]
    DivisionByZero { at: String },
    #[error("non-finite result {value} at {at}")]
    NonFinite { value: f64, at: String },
    #[error("variable {0} is not bound here")]
    Unbound(&'static str),
}

/// Variable values; unset variables are unbound.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Env {
    pub x: Option<f64>,
    pub t: Option<f64>,
    pub y: Option<f64>,
    pub c: Option<f64>,
    pub delta: Option<f64>,
}

impl Env {
    pub fn xt(x: f64, t: f64) -> Self {
        Self { x: Some(x), t: Some(t), ..Self::default() }
    }

    pub fn get(&self, v: Var) -> Option<f64> {
        match v {
            Var::X => self.x,
            Var::T => self.t,
            Var::Y => self.y,
            Var::C => self.c,
            Var::Delta => self.delta,
        }
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = [Var::X, Var::T, Var::Y, Var::C, Var::Delta]
            .into_iter()
            .filter_map(|v| self.get(v).map(|val| format!("{}={}", v.name(), val)))
            .collect();
        format!("({})", parts.join(", "))
    }
}

const MAX_DEPTH: usize = 200;

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(u8),
    End,
}

impl<'a> Parser<'a> {
    fn err(&self, offset: usize, message: impl Into<String>, expected: &[&'static str]) -> ParseError {
        ParseError { offset, message: message.into(), expected: expected.to_vec() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Returns the next token and its start offset without consuming it.
    fn peek(&mut self) -> Result<(Tok, usize, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(&b) = self.src.get(start) else {
            return Ok((Tok::End, start, start));
        };
        if b.is_ascii_digit() || b == b'.' {
            let mut end = start;
            while end < self.src.len() && (self.src[end].is_ascii_digit() || self.src[end] == b'.') {
                end += 1;
            }
            if end < self.src.len() && (self.src[end] == b'e' || self.src[end] == b'E') {
                let mut k = end + 1;
                if k < self.src.len() && (self.src[k] == b'+' || self.src[k] == b'-') {
                    k += 1;
                }
                if k < self.src.len() && self.src[k].is_ascii_digit() {
                    while k < self.src.len() && self.src[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            // the slice is ASCII by construction
            let text = std::str::from_utf8(&self.src[start..end]).unwrap_or("");
            return match text.parse::<f64>() {
                Ok(v) => Ok((Tok::Num(v), start, end)),
                Err(_) => Err(self.err(start, format!("malformed number '{text}'"), &["number"])),
            };
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let mut end = start;
            while end < self.src.len() && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_') {
                end += 1;
            }
            let text = std::str::from_utf8(&self.src[start..end]).unwrap_or("");
            return Ok((Tok::Ident(text.to_string()), start, end));
        }
        if b"+-*/^(),".contains(&b) {
            return Ok((Tok::Op(b), start, start + 1));
        }
        Err(self.err(start, format!("unexpected byte 0x{b:02x}"), &["expression"]))
    }

    fn eat_op(&mut self, op: u8) -> Result<bool, ParseError> {
        let (tok, _, end) = self.peek()?;
        if tok == Tok::Op(op) {
            self.pos = end;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn expect_op(&mut self, op: u8, expected: &[&'static str]) -> Result<(), ParseError> {
        let (tok, start, end) = self.peek()?;
        if tok == Tok::Op(op) {
            self.pos = end;
            Ok(())
        } else {
            Err(self.err(start, "unexpected token", expected))
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err(self.pos, "expression nested too deeply", &[]));
        }
        Ok(())
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.product()?;
        loop {
            let op = if self.eat_op(b'+')? {
                BinOp::Add
            } else if self.eat_op(b'-')? {
                BinOp::Sub
            } else {
                break;
            };
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat_op(b'*')? {
                BinOp::Mul
            } else if self.eat_op(b'/')? {
                BinOp::Div
            } else {
                break;
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op(b'-')? {
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat_op(b'^')? {
            self.enter()?;
            // the exponent may carry its own sign: 2^-1
            let exp = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        const EXPECTED: &[&str] = &["number", "variable", "function", "'('", "'-'"];
        let (tok, start, end) = self.peek()?;
        match tok {
            Tok::Num(v) => {
                self.pos = end;
                Ok(Expr::Num(v))
            }
            Tok::Op(b'(') => {
                self.pos = end;
                let inner = self.sum()?;
                self.expect_op(b')', &["')'", "operator"])?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.pos = end;
                if let Some(v) = Var::from_name(&name) {
                    return Ok(Expr::Var(v));
                }
                let Some(f) = Func::from_name(&name) else {
                    return Err(self.err(
                        start,
                        format!("unknown identifier '{name}'"),
                        &["x", "t", "y", "c", "delta", "function"],
                    ));
                };
                self.expect_op(b'(', &["'('"])?;
                let mut args = vec![self.sum()?];
                while args.len() < f.arity() {
                    self.expect_op(b',', &["','"])?;
                    args.push(self.sum()?);
                }
                let (tok, at, _) = self.peek()?;
                if tok == Tok::Op(b',') {
                    return Err(self.err(at, format!("{} takes {} argument(s)", f.name(), f.arity()), &["')'"]));
                }
                self.expect_op(b')', &["')'", "operator"])?;
                Ok(Expr::Call(f, args))
            }
            Tok::End => Err(self.err(start, "unexpected end of input", EXPECTED)),
            Tok::Op(_) => Err(self.err(start, "unexpected token", EXPECTED)),
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, depth: 0 };
    let e = p.sum()?;
    let (tok, start, _) = p.peek()?;
    if tok != Tok::End {
        return Err(p.err(start, "trailing input", &["operator", "end of input"]));
    }
    Ok(e)
}

impl Expr {
    pub fn eval(&self, env: &Env) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(v) => env.get(*v).ok_or(EvalError::Unbound(v.name()))?,
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Bin(op, a, b) => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero { at: env.describe() });
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(EvalError::Domain { func: "^", arg: a, at: env.describe() });
                        }
                        if a == 0.0 && b < 0.0 {
                            return Err(EvalError::DivisionByZero { at: env.describe() });
                        }
                        a.powf(b)
                    }
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(env)?;
                match f {
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(EvalError::Domain { func: "log", arg: a, at: env.describe() });
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::Domain { func: "sqrt", arg: a, at: env.describe() });
                        }
                        a.sqrt()
                    }
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tanh => a.tanh(),
                    Func::Abs => a.abs(),
                    Func::Min => a.min(args[1].eval(env)?),
                    Func::Max => a.max(args[1].eval(env)?),
                }
            }
        };
        if !v.is_finite() {
            return Err(EvalError::NonFinite { value: v, at: env.describe() });
        }
        Ok(v)
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) => e.uses(var),
            Expr::Bin(_, a, b) => a.uses(var) || b.uses(var),
            Expr::Call(_, args) => args.iter().any(|a| a.uses(var)),
        }
    }

    /// Evaluates with only `x` and `t` bound.
    pub fn eval_xt(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        self.eval(&Env::xt(x, t))
    }
}

impl fmt::Display for Expr {
    // fully parenthesised, so printing never depends on precedence
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(text: &str, env: Env) -> f64 {
        parse_expr(text).unwrap().eval(&env).unwrap()
    }

    #[test]
    fn literals_and_precedence() {
        assert_eq!(parse_expr("0").unwrap(), Expr::Num(0.0));
        assert_eq!(at("1 + 2*x", Env::xt(3.0, 0.0)), 7.0);
        assert_eq!(at("-2^2", Env::default()), -4.0);
        assert_eq!(at("2^3^2", Env::default()), 512.0);
        assert_eq!(at("2^-1", Env::default()), 0.5);
        assert_eq!(at("8/4/2", Env::default()), 1.0);
        assert_eq!(at("1 - 2 - 3", Env::default()), -4.0);
        assert_eq!(at("1.5e1 + .5", Env::default()), 15.5);
    }

    #[test]
    fn clipped_square_root() {
        let env = Env { c: Some(9.0), ..Env::default() };
        let v = at("max(0, min(c, 2))^0.5", env);
        assert_eq!(v, 2f64.sqrt());
    }

    #[test]
    fn errors_are_located() {
        let e = parse_expr("1 + * 2").unwrap_err();
        assert_eq!(e.offset, 4);
        let e = parse_expr("foo(x)").unwrap_err();
        assert!(e.message.contains("foo"));
        let e = parse_expr("max(1)").unwrap_err();
        assert_eq!(e.offset, 5);
        assert!(parse_expr("(1 + 2").is_err());
        assert!(parse_expr("1 2").is_err());
        assert!(parse_expr("").is_err());
        assert!(parse_expr(&"(".repeat(10_000)).is_err());
        assert!(parse_expr(&"-".repeat(10_000)).is_err());
    }

    #[test]
    fn evaluation_errors_name_the_point() {
        let e = parse_expr("log(x)").unwrap().eval_xt(-1.0, 0.5).unwrap_err();
        assert!(matches!(e, EvalError::Domain { func: "log", .. }));
        assert!(e.to_string().contains("x=-1"));
        assert!(parse_expr("1/x").unwrap().eval_xt(0.0, 0.0).is_err());
        assert!(matches!(parse_expr("y").unwrap().eval_xt(0.0, 0.0), Err(EvalError::Unbound("y"))));
        assert!(parse_expr("exp(1000)").unwrap().eval_xt(0.0, 0.0).is_err());
    }

    // independent reference: a shunting-yard evaluator over the same grammar
    fn reference_eval(text: &str, env: &Env) -> f64 {
        #[derive(Clone, Copy, PartialEq, Debug)]
        enum Op {
            Add,
            Sub,
            Mul,
            Div,
            Pow,
            Neg,
            Paren,
            Call(&'static str),
        }
        fn prec(op: Op) -> (u8, bool) {
            match op {
                Op::Add | Op::Sub => (1, false),
                Op::Mul | Op::Div => (2, false),
                Op::Neg => (3, true),
                Op::Pow => (4, true),
                _ => (0, false),
            }
        }
        fn apply(op: Op, vals: &mut Vec<f64>) {
            if op == Op::Neg {
                let a = vals.pop().unwrap();
                vals.push(-a);
                return;
            }
            if let Op::Call(name) = op {
                let r = match name {
                    "min" | "max" => {
                        let b = vals.pop().unwrap();
                        let a = vals.pop().unwrap();
                        if name == "min" {
                            a.min(b)
                        } else {
                            a.max(b)
                        }
                    }
                    _ => {
                        let a = vals.pop().unwrap();
                        match name {
                            "exp" => a.exp(),
                            "log" => a.ln(),
                            "sqrt" => a.sqrt(),
                            "sin" => a.sin(),
                            "cos" => a.cos(),
                            "tanh" => a.tanh(),
                            _ => a.abs(),
                        }
                    }
                };
                vals.push(r);
                return;
            }
            let b = vals.pop().unwrap();
            let a = vals.pop().unwrap();
            vals.push(match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                _ => a.powf(b),
            });
        }
        let chars: Vec<char> = text.chars().collect();
        let mut vals: Vec<f64> = Vec::new();
        let mut ops: Vec<Op> = Vec::new();
        let mut k = 0;
        let mut expect_operand = true;
        while k < chars.len() {
            let ch = chars[k];
            if ch.is_whitespace() {
                k += 1;
            } else if ch.is_ascii_digit() || ch == '.' {
                let s = k;
                while k < chars.len() && (chars[k].is_ascii_digit() || chars[k] == '.') {
                    k += 1;
                }
                vals.push(chars[s..k].iter().collect::<String>().parse().unwrap());
                expect_operand = false;
            } else if ch.is_ascii_alphabetic() {
                let s = k;
                while k < chars.len() && chars[k].is_ascii_alphabetic() {
                    k += 1;
                }
                let name: String = chars[s..k].iter().collect();
                let v = match name.as_str() {
                    "x" => env.x,
                    "t" => env.t,
                    "y" => env.y,
                    "c" => env.c,
                    "delta" => env.delta,
                    _ => None,
                };
                match v {
                    Some(v) => {
                        vals.push(v);
                        expect_operand = false;
                    }
                    None => {
                        let f: &'static str = ["exp", "log", "sqrt", "sin", "cos", "tanh", "min", "max", "abs"]
                            .into_iter()
                            .find(|n| *n == name)
                            .unwrap();
                        ops.push(Op::Call(f));
                    }
                }
            } else if ch == '(' {
                ops.push(Op::Paren);
                k += 1;
                expect_operand = true;
            } else if ch == ')' || ch == ',' {
                while *ops.last().unwrap() != Op::Paren {
                    apply(ops.pop().unwrap(), &mut vals);
                }
                if ch == ')' {
                    ops.pop();
                    if let Some(Op::Call(_)) = ops.last() {
                        apply(ops.pop().unwrap(), &mut vals);
                    }
                    expect_operand = false;
                } else {
                    expect_operand = true;
                }
                k += 1;
            } else {
                let op = match (ch, expect_operand) {
                    ('-', true) => Op::Neg,
                    ('+', _) => Op::Add,
                    ('-', _) => Op::Sub,
                    ('*', _) => Op::Mul,
                    ('/', _) => Op::Div,
                    _ => Op::Pow,
                };
                let (p, right) = prec(op);
                if op != Op::Neg {
                    while let Some(&top) = ops.last() {
                        let (tp, _) = prec(top);
                        if top == Op::Paren || matches!(top, Op::Call(_)) {
                            break;
                        }
                        if tp > p || (tp == p && !right) {
                            apply(ops.pop().unwrap(), &mut vals);
                        } else {
                            break;
                        }
                    }
                }
                ops.push(op);
                k += 1;
                expect_operand = true;
            }
        }
        while let Some(op) = ops.pop() {
            apply(op, &mut vals);
        }
        vals.pop().unwrap()
    }

    #[test]
    fn reference_evaluator_agrees() {
        let env = Env { x: Some(1.3), t: Some(0.4), y: Some(2.0), c: Some(9.0), delta: Some(0.25) };
        for text in [
            "max(0, min(c, 2))^0.5",
            "1 + 2*x",
            "-x^2 + 3*t - y/4",
            "2^3^0.5 - -delta",
            "exp(-x) * sin(t) + cos(y)^2",
            "sqrt(abs(x - y)) / (1 + tanh(delta*c))",
            "log(c) - 4/2/0.5 + (x - t) * (y + c)",
            "min(x, t*y) ^ 2 ^ 0.5",
        ] {
            let want = reference_eval(text, &env);
            let got = at(text, env);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{text}: {got} vs {want}");
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-1e3..1e3f64).prop_map(Expr::Num),
            prop_oneof![Just(Var::X), Just(Var::T), Just(Var::Y), Just(Var::C), Just(Var::Delta)].prop_map(Expr::Var),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
                inner.prop_map(|a| Expr::Call(Func::Tanh, vec![a])),
            ]
        })
    }

    fn normalise(e: Expr) -> Expr {
        // negative literals print as a negation of their magnitude
        match e {
            Expr::Num(v) if v < 0.0 || (v == 0.0 && v.is_sign_negative()) => Expr::Neg(Box::new(Expr::Num(-v))),
            Expr::Num(v) => Expr::Num(v),
            Expr::Var(v) => Expr::Var(v),
            Expr::Neg(a) => Expr::Neg(Box::new(normalise(*a))),
            Expr::Bin(op, a, b) => Expr::Bin(op, Box::new(normalise(*a)), Box::new(normalise(*b))),
            Expr::Call(f, args) => Expr::Call(f, args.into_iter().map(normalise).collect()),
        }
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let e = normalise(e);
            let printed = e.to_string();
            let back = parse_expr(&printed).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(parse_expr(&back.to_string()).unwrap(), back);
        }

        #[test]
        fn parser_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let text = String::from_utf8_lossy(&bytes);
            let _ = parse_expr(&text);
        }

        #[test]
        fn parser_never_panics_on_grammar_soup(
            parts in proptest::collection::vec(
                prop_oneof![Just("x"), Just("("), Just(")"), Just("+"), Just("-"), Just("^"), Just("max("), Just(","), Just("1.5"), Just("e"), Just(" ")],
                0..40,
            )
        ) {
            let text: String = parts.concat();
            if let Err(e) = parse_expr(&text) {
                prop_assert!(e.offset <= text.len());
            }
        }
    }
}
