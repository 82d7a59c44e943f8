//! A small expression language for right-hand sides.
//!
//! Grammar (standard precedence, `+ - * /` left-associative, `^` right-associative):
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" unary)?
//! atom   := number | "t" | "x"k | "u"k | func "(" expr ")" | "(" expr ")"
//! func   := "sin" | "cos" | "exp" | "abs"
//! ```
//!
//! Variables are 1-based: `x1..xn`, `u1..um`. Printing an expression emits
//! the minimal parenthesization, so `parse(print(e)) == e` for every parsed `e`.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Time,
    /// State component, 1-based.
    X(usize),
    /// Control component, 1-based.
    U(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn x(i: usize) -> Expr {
        Expr::Var(Var::X(i))
    }

    pub fn u(i: usize) -> Expr {
        Expr::Var(Var::U(i))
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    /// Evaluate at `(t, x, u)`. Indices were checked at parse time; an
    /// out-of-range variable in a hand-built tree panics.
    pub fn eval(&self, t: f64, x: &[f64], u: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::Time) => t,
            Expr::Var(Var::X(i)) => x[i - 1],
            Expr::Var(Var::U(i)) => u[i - 1],
            Expr::Neg(e) => -e.eval(t, x, u),
            Expr::Call(f, e) => f.apply(e.eval(t, x, u)),
            Expr::Bin(op, a, b) => {
                let a = a.eval(t, x, u);
                let b = b.eval(t, x, u);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
        }
    }

    /// Largest state and control indices referenced.
    pub fn max_indices(&self) -> (usize, usize) {
        match self {
            Expr::Num(_) | Expr::Var(Var::Time) => (0, 0),
            Expr::Var(Var::X(i)) => (*i, 0),
            Expr::Var(Var::U(i)) => (0, *i),
            Expr::Neg(e) | Expr::Call(_, e) => e.max_indices(),
            Expr::Bin(_, a, b) => {
                let (xa, ua) = a.max_indices();
                let (xb, ub) = b.max_indices();
                (xa.max(xb), ua.max(ub))
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if v.is_sign_negative() => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

/// Integer exponents go through `powi` so `x^3` of a negative base is exact.
fn pow(base: f64, exp: f64) -> f64 {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if v.is_sign_negative() => write!(f, "-{}", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::Time) => write!(f, "t"),
            Expr::Var(Var::X(i)) => write!(f, "x{i}"),
            Expr::Var(Var::U(i)) => write!(f, "u{i}"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Neg(e) => {
                write!(f, "-")?;
                write_operand(f, e, e.precedence() < 3)
            }
            Expr::Bin(op, a, b) => {
                let (left_parens, right_parens) = match op {
                    BinOp::Add | BinOp::Sub => (false, b.precedence() <= 1),
                    BinOp::Mul | BinOp::Div => (a.precedence() < 2, b.precedence() <= 2),
                    BinOp::Pow => (a.precedence() < 5, b.precedence() < 3),
                };
                write_operand(f, a, left_parens)?;
                write!(f, "{}", op.symbol())?;
                write_operand(f, b, right_parens)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParseErrorKind {
    Syntax,
    UnknownIdentifier,
    Arity,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[error("{kind:?} error at position {position}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Character offset into the source.
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

fn syntax(position: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        kind: ParseErrorKind::Syntax,
        position,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let tok = match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
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
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), start));
                continue;
            }
            other => return Err(syntax(start, format!("unexpected character `{other}`"))),
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    n: usize,
    m: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.offset(),
                format!(
                    "expected {}, found {}",
                    describe(&want),
                    describe(self.peek())
                ),
            ))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => self.identifier(&name, at),
            other => Err(syntax(at, format!("unexpected {}", describe(&other)))),
        }
    }

    fn identifier(&mut self, name: &str, at: usize) -> Result<Expr, ParseError> {
        if let Some(func) = Func::from_name(name) {
            if *self.peek() != Tok::LParen {
                return Err(ParseError {
                    kind: ParseErrorKind::Arity,
                    position: at,
                    message: format!("function `{name}` takes exactly 1 argument"),
                });
            }
            self.bump();
            let mut args = Vec::new();
            if *self.peek() != Tok::RParen {
                args.push(self.expr()?);
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
            }
            self.expect(Tok::RParen)?;
            if args.len() != 1 {
                return Err(ParseError {
                    kind: ParseErrorKind::Arity,
                    position: at,
                    message: format!(
                        "function `{name}` takes exactly 1 argument, got {}",
                        args.len()
                    ),
                });
            }
            return Ok(Expr::Call(func, Box::new(args.pop().unwrap())));
        }
        let var = self.variable(name).ok_or_else(|| ParseError {
            kind: ParseErrorKind::UnknownIdentifier,
            position: at,
            message: format!(
                "unknown identifier `{name}` (expected t, x1..x{}, u1..u{}, sin, cos, exp, abs)",
                self.n, self.m
            ),
        })?;
        Ok(Expr::Var(var))
    }

    fn variable(&self, name: &str) -> Option<Var> {
        if name == "t" {
            return Some(Var::Time);
        }
        let (head, digits) = name.split_at(1);
        if digits.is_empty()
            || !digits.chars().all(|c| c.is_ascii_digit())
            || digits.starts_with('0')
        {
            return None;
        }
        let idx: usize = digits.parse().ok()?;
        match head {
            "x" if idx <= self.n => Some(Var::X(idx)),
            "u" if idx <= self.m => Some(Var::U(idx)),
            _ => None,
        }
    }
}

/// Parse one right-hand-side component over `t`, `x1..xn`, `u1..um`.
pub fn parse_expr(source: &str, n: usize, m: usize) -> Result<Expr, ParseError> {
    if source.trim().is_empty() {
        return Err(syntax(0, "empty expression"));
    }
    let mut p = Parser {
        toks: tokenize(source)?,
        pos: 0,
        n,
        m,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(
            p.offset(),
            format!("unexpected {}", describe(p.peek())),
        ));
    }
    Ok(e)
}

/// Per-component expression trees of a right-hand side `f: (t, x, u) -> R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsExpr {
    pub n: usize,
    pub m: usize,
    pub components: Vec<Expr>,
}

impl DynamicsExpr {
    /// Parse one source string per state component.
    pub fn parse<S: AsRef<str>>(sources: &[S], n: usize, m: usize) -> Result<Self, crate::Error> {
        if sources.len() != n {
            return Err(crate::Error::input(format!(
                "expected {n} right-hand-side components, got {}",
                sources.len()
            )));
        }
        let components = sources
            .iter()
            .map(|s| parse_expr(s.as_ref(), n, m))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DynamicsExpr { n, m, components })
    }

    pub fn sources(&self) -> Vec<String> {
        self.components.iter().map(|e| e.to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_control() {
        assert_eq!(parse_expr("u1", 1, 1).unwrap(), Expr::u(1));
    }

    #[test]
    fn parses_sum() {
        assert_eq!(
            parse_expr("x1 + u1", 1, 1).unwrap(),
            Expr::bin(BinOp::Add, Expr::x(1), Expr::u(1))
        );
    }

    #[test]
    fn evaluates_mixed_expression() {
        let e = parse_expr("sin(x2)*u1 - x1^3", 2, 1).unwrap();
        assert_eq!(e.eval(0.0, &[1.0, 0.0], &[3.0]), -1.0);
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expr("2^3^2", 0, 0).unwrap();
        assert_eq!(e.eval(0.0, &[], &[]), 512.0);
        let e = parse_expr("8 - 4 - 2", 0, 0).unwrap();
        assert_eq!(e.eval(0.0, &[], &[]), 2.0);
        let e = parse_expr("-2^2", 0, 0).unwrap();
        assert_eq!(e.eval(0.0, &[], &[]), -4.0);
        let e = parse_expr("1 + 2*3/4", 0, 0).unwrap();
        assert_eq!(e.eval(0.0, &[], &[]), 2.5);
    }

    #[test]
    fn print_keeps_required_parens() {
        for src in [
            "x1 - (x2 - u1)",
            "(x1 + 1)*u1",
            "x1/(x2*u1)",
            "(x1^2)^3",
            "x1^-2",
            "-(x1 + 1)",
            "--x1",
            "exp(-t)*abs(x1)",
            "2.5e-3*x1",
            "cos(t)^2 + sin(t)^2",
        ] {
            let e = parse_expr(src, 2, 1).unwrap();
            let printed = e.to_string();
            assert_eq!(parse_expr(&printed, 2, 1).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn reports_syntax_position() {
        let err = parse_expr("x1 + * u1", 1, 1).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert_eq!(err.position, 5);
        let err = parse_expr("(x1 + u1", 1, 1).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert_eq!(err.position, 8);
        assert!(parse_expr("   ", 1, 1).is_err());
        assert!(parse_expr("x1 u1", 1, 1).is_err());
    }

    #[test]
    fn rejects_unknown_identifiers() {
        for src in ["y", "x2", "u0", "x01", "tan(x1)"] {
            let err = parse_expr(src, 1, 1).unwrap_err();
            assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier, "{src}");
        }
    }

    #[test]
    fn rejects_bad_arity() {
        for src in ["sin(x1, u1)", "cos()", "exp + 1"] {
            let err = parse_expr(src, 1, 1).unwrap_err();
            assert_eq!(err.kind, ParseErrorKind::Arity, "{src}");
        }
    }

    #[test]
    fn dynamics_requires_one_component_per_state() {
        assert!(DynamicsExpr::parse(&["x2", "-x1"], 2, 0).is_ok());
        assert!(DynamicsExpr::parse(&["x1"], 2, 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                (0u32..1000).prop_map(|v| Expr::Num(v as f64 / 8.0)),
                Just(Expr::Var(Var::Time)),
                (1usize..=2).prop_map(Expr::x),
                Just(Expr::u(1)),
            ];
            leaf.prop_recursive(5, 48, 2, |inner| {
                prop_oneof![
                    inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                    (
                        inner.clone(),
                        prop_oneof![
                            Just(Func::Sin),
                            Just(Func::Cos),
                            Just(Func::Exp),
                            Just(Func::Abs)
                        ]
                    )
                        .prop_map(|(e, f)| Expr::Call(f, Box::new(e))),
                    (
                        prop_oneof![
                            Just(BinOp::Add),
                            Just(BinOp::Sub),
                            Just(BinOp::Mul),
                            Just(BinOp::Div),
                            Just(BinOp::Pow)
                        ],
                        inner.clone(),
                        inner
                    )
                        .prop_map(|(op, a, b)| Expr::bin(op, a, b)),
                ]
            })
        }

        proptest! {
            #[test]
            fn print_parse_roundtrip(e in arb_expr()) {
                let printed = e.to_string();
                let reparsed = parse_expr(&printed, 2, 1).unwrap();
                prop_assert_eq!(&reparsed, &e);
                prop_assert_eq!(reparsed.to_string(), printed);
            }
        }
    }
}
