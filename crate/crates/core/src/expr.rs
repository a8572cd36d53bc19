//! Scalar surface expressions: `0.5*(u^2 + v^2)`, `1/(u*v)`, `sqrt(1 - u1^2 - u2^2)`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := unary ('^' factor)?
//! unary  := '-' unary | atom
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Unary minus binds tighter than `^`, so `-u^2` is `(-u)^2`. Error offsets
//! count characters from the start of the input.

use std::fmt;

use crate::error::{Error, Result};
use crate::jet::{Analytic, Jet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn analytic(self) -> Analytic {
        match self {
            Func::Sqrt => Analytic::Sqrt,
            Func::Exp => Analytic::Exp,
            Func::Log => Analytic::Log,
            Func::Sin => Analytic::Sin,
            Func::Cos => Analytic::Cos,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sqrt => x.sqrt(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based parameter index.
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse { offset, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match ch {
            '+' | '*' | '/' | '^' => {
                i += 1;
                Tok::Op(ch)
            }
            '-' | '\u{2212}' => {
                i += 1;
                Tok::Op('-')
            }
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            ',' => {
                i += 1;
                Tok::Comma
            }
            c if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s.parse().map_err(|_| err(start, format!("malformed number `{s}`")))?;
                if !v.is_finite() {
                    return Err(err(start, format!("number `{s}` is out of range")));
                }
                Tok::Num(v)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                Tok::Ident(chars[start..i].iter().collect())
            }
            other => return Err(err(start, format!("unexpected character `{other}`"))),
        };
        out.push(Token { tok, offset: start });
    }
    out.push(Token { tok: Tok::End, offset: chars.len() });
    Ok(out)
}

fn variable_index(name: &str) -> Option<usize> {
    match name {
        "u" => Some(0),
        "v" => Some(1),
        _ => {
            let digits = name.strip_prefix('u')?;
            if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            digits.parse::<usize>().ok().map(|k| k - 1)
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> Error {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        };
        err(t.offset, format!("expected {wanted}, found {found}"))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.factor()?));
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.unary()?;
        if self.peek().tok == Tok::Op('^') {
            self.bump();
            let exp = self.factor()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if self.peek().tok != Tok::RParen {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(f) = Func::from_name(&name) {
                    if self.peek().tok != Tok::LParen {
                        return Err(self.unexpected(&format!("`(` after function `{name}`")));
                    }
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while self.peek().tok == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    if self.peek().tok != Tok::RParen {
                        return Err(self.unexpected("`)` or `,`"));
                    }
                    self.bump();
                    if args.len() != 1 {
                        return Err(err(t.offset, format!("function `{name}` takes 1 argument, got {}", args.len())));
                    }
                    return Ok(Expr::Call(f, Box::new(args.pop().expect("one argument"))));
                }
                match variable_index(&name) {
                    Some(k) => Ok(Expr::Var(k)),
                    None => Err(err(t.offset, format!("unknown identifier `{name}`"))),
                }
            }
            _ => Err(self.unexpected("a number, variable, function or `(`")),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

/// Integer exponents up to this magnitude use repeated multiplication.
const MAX_INTEGER_POWER: f64 = 64.0;

impl Expr {
    /// Number of parameters the expression refers to (highest index + 1).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(k) => k + 1,
            Expr::Neg(e) | Expr::Call(_, e) => e.arity(),
            Expr::Bin(_, a, b) => a.arity().max(b.arity()),
        }
    }

    fn constant_value(&self) -> Option<f64> {
        (self.arity() == 0).then(|| self.eval_f64(&[]).ok()).flatten()
    }

    pub fn eval_f64(&self, u: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(k) => *u.get(*k).ok_or_else(|| Error::Config(format!("variable u{} not supplied", k + 1)))?,
            Expr::Neg(e) => -e.eval_f64(u)?,
            Expr::Call(f, e) => f.apply(e.eval_f64(u)?),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval_f64(u)?, b.eval_f64(u)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                }
            }
        })
    }

    /// Evaluate over the jet ring; `u` holds one jet per parameter.
    pub fn eval(&self, u: &[Jet]) -> Result<Jet> {
        match self {
            Expr::Num(v) => Ok(u[0].lift(*v)),
            Expr::Var(k) => u.get(*k).cloned().ok_or_else(|| {
                Error::Config(format!("expression uses u{} but only {} parameters exist", k + 1, u.len()))
            }),
            Expr::Neg(e) => Ok(-&e.eval(u)?),
            Expr::Call(f, e) => e.eval(u)?.analytic(f.analytic()),
            Expr::Bin(BinOp::Pow, a, b) => {
                let base = a.eval(u)?;
                match b.constant_value() {
                    Some(p) if p.fract() == 0.0 && p.abs() <= MAX_INTEGER_POWER => base.powi(p as i32),
                    Some(p) => base.powf(p),
                    None => (&b.eval(u)? * &base.analytic(Analytic::Log)?).analytic(Analytic::Exp),
                }
            }
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(u)?, b.eval(u)?);
                match op {
                    BinOp::Add => Ok(&x + &y),
                    BinOp::Sub => Ok(&x - &y),
                    BinOp::Mul => Ok(&x * &y),
                    BinOp::Div => x.checked_div(&y),
                    BinOp::Pow => unreachable!("handled above"),
                }
            }
        }
    }
}

/// Fully parenthesized form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(k) => write!(f, "u{}", k + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(e: &Expr, u: f64, v: f64) -> f64 {
        e.eval_f64(&[u, v]).unwrap()
    }

    #[test]
    fn catalog_style_expressions() {
        assert_eq!(at(&parse("0.5*(u^2 + v^2)").unwrap(), 1.0, 1.0), 1.0);
        assert_eq!(at(&parse("1/(u*v)").unwrap(), 2.0, 0.5), 1.0);
        let s = parse("sqrt(1 - u1^2 - u2^2)").unwrap();
        assert!((at(&s, 0.6, 0.0) - 0.8).abs() < 1e-15);
        assert!((at(&parse("0.5*(u^2+v^2) + 0.1*u^3").unwrap(), 1.0, 0.0) - 0.6).abs() < 1e-15);
        assert_eq!(at(&parse("exp(0)+log(1)+sin(0)+cos(0)").unwrap(), 0.0, 0.0), 2.0);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(at(&parse("2^3^2").unwrap(), 0.0, 0.0), 512.0);
        assert_eq!(at(&parse("-u^2").unwrap(), 3.0, 0.0), 9.0);
        assert_eq!(at(&parse("1 - 2 - 3").unwrap(), 0.0, 0.0), -4.0);
        assert_eq!(at(&parse("8 / 4 / 2").unwrap(), 0.0, 0.0), 1.0);
        assert_eq!(at(&parse("1 + 2 * 3").unwrap(), 0.0, 0.0), 7.0);
        assert_eq!(at(&parse("2^-1").unwrap(), 0.0, 0.0), 0.5);
        assert_eq!(at(&parse("1.5e1 \u{2212} 5").unwrap(), 0.0, 0.0), 10.0);
    }

    #[test]
    fn unbalanced_parenthesis_reports_end_offset() {
        match parse("0.5*(u^2 +") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_inputs_have_positions() {
        let cases = [
            ("", 0),
            ("u +* v", 3),
            ("sin u", 4),
            ("foo(u)", 0),
            ("w + 1", 0),
            ("(u", 2),
            ("u)", 1),
            ("1..2", 0),
            ("sqrt(u, v)", 0),
            ("u ^", 3),
            ("3 $ 4", 2),
            ("u0 + 1", 0),
        ];
        for (text, expected) in cases {
            match parse(text) {
                Err(Error::Parse { offset, message }) => assert_eq!(offset, expected, "{text}: {message}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn jet_evaluation_uses_integer_powers() {
        let e = parse("(u - 1)^2 + v^0.5 + u^v").unwrap();
        let u = Jet::variable(1.0, 0, 2, 3).unwrap();
        let v = Jet::variable(4.0, 1, 2, 3).unwrap();
        let j = e.eval(&[u, v]).unwrap();
        assert!((j.value() - 3.0).abs() < 1e-14);
        // ∂²/∂u² of (u-1)^2 + u^v at (1, 4) = 2 + v(v-1) = 14
        assert!((j.partial(&[2, 0]).unwrap() - 14.0).abs() < 1e-12);
        assert_eq!(e.arity(), 2);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![(0u32..1000).prop_map(|k| Expr::Num(k as f64 / 8.0)), (0usize..3).prop_map(Expr::Var),];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone(), 0..5u8).prop_map(|(a, b, k)| {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][k as usize];
                    Expr::Bin(op, Box::new(a), Box::new(b))
                }),
                (inner, 0..5u8).prop_map(|(e, k)| {
                    let f = [Func::Sqrt, Func::Exp, Func::Log, Func::Sin, Func::Cos][k as usize];
                    Expr::Call(f, Box::new(e))
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn pretty_print_round_trips(e in arb_expr()) {
            let text = e.to_string();
            prop_assert_eq!(parse(&text).unwrap(), e);
        }
    }
}
