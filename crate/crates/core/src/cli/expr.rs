//! Scenario expression grammar.
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := "-" unary | power
//! power := atom ("^" unary)?
//! atom  := number | "t" | "x" | "pi" | func "(" expr ")" | "(" expr ")"
//! func  := "sin" | "cos" | "exp" | "bump"
//! ```
//!
//! A minus sign directly applied to a literal folds into the literal.
//! Evaluation treats an exact zero factor or numerator as absorbing, so
//! derivatives of `bump` vanish identically off the open support even where
//! their rational factor is singular.

use crate::error::Error;
use crate::kernels::bump;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Bump,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Bump => "bump",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "bump" => Some(Func::Bump),
            _ => None,
        }
    }
}

/// Expression syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Var(Var),
    Pi,
    Neg(Box<Expression>),
    Bin(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Box<Expression>),
}

/// Parses `source`, or returns a positioned [`Error::Syntax`].
pub fn parse_expression(source: &str) -> Result<Expression, Error> {
    Expression::parse(source)
}

/// Symbolic derivative of order 1 or 2 with respect to `var`.
pub fn differentiate(e: &Expression, var: Var, order: u32) -> Expression {
    let mut d = e.clone();
    for _ in 0..order {
        d = d.derivative(var);
    }
    d
}

// ---------------------------------------------------------------- lexer

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

fn syntax(position: usize, message: impl Into<String>) -> Error {
    Error::Syntax { position, message: message.into() }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, Error> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
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
                let v: f64 = text.parse().map_err(|_| syntax(start, format!("malformed number '{text}'")))?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), start));
                continue;
            }
            other => return Err(syntax(start, format!("unexpected character '{other}'"))),
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

// ---------------------------------------------------------------- parser

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump_tok(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expression, Error> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump_tok();
            let rhs = self.term()?;
            lhs = Expression::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expression, Error> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump_tok();
            let rhs = self.unary()?;
            lhs = Expression::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expression, Error> {
        if *self.peek() == Tok::Minus {
            self.bump_tok();
            let inner = self.unary()?;
            return Ok(match inner {
                Expression::Num(v) => Expression::Num(-v),
                other => Expression::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, Error> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump_tok();
            let exp = self.unary()?;
            return Ok(Expression::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression, Error> {
        let at = self.at();
        match self.bump_tok() {
            Tok::Num(v) => Ok(Expression::Num(v)),
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Expression::Var(Var::T)),
                "x" => Ok(Expression::Var(Var::X)),
                "pi" => Ok(Expression::Pi),
                _ => {
                    let f = Func::from_name(&name).ok_or_else(|| syntax(at, format!("unknown identifier '{name}'")))?;
                    if *self.peek() != Tok::LParen {
                        return Err(syntax(self.at(), format!("expected '(' after '{name}'")));
                    }
                    let open = self.at();
                    self.bump_tok();
                    if *self.peek() == Tok::RParen {
                        return Err(syntax(self.at(), format!("'{name}' takes exactly one argument, got 0")));
                    }
                    let arg = self.expr()?;
                    let mut count = 1;
                    while *self.peek() == Tok::Comma {
                        self.bump_tok();
                        self.expr()?;
                        count += 1;
                    }
                    if count != 1 {
                        return Err(syntax(at, format!("'{name}' takes exactly one argument, got {count}")));
                    }
                    if *self.peek() != Tok::RParen {
                        return Err(syntax(self.at(), format!("unbalanced parenthesis opened at {open}")));
                    }
                    self.bump_tok();
                    Ok(Expression::Call(f, Box::new(arg)))
                }
            },
            Tok::LParen => {
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(syntax(self.at(), format!("unbalanced parenthesis opened at {at}")));
                }
                self.bump_tok();
                Ok(inner)
            }
            Tok::RParen => Err(syntax(at, "unbalanced ')'")),
            Tok::End => Err(syntax(at, "unexpected end of expression")),
            Tok::Comma => Err(syntax(at, "unexpected ','")),
            _ => Err(syntax(at, "expected a number, variable, function or '('")),
        }
    }
}

// ---------------------------------------------------------------- builders

fn num(v: f64) -> Expression {
    Expression::Num(v)
}

fn is_num(e: &Expression, v: f64) -> bool {
    matches!(e, Expression::Num(c) if *c == v)
}

fn folded(v: f64) -> Option<Expression> {
    v.is_finite().then_some(Expression::Num(v))
}

fn neg(a: Expression) -> Expression {
    match a {
        Expression::Num(v) => num(-v),
        Expression::Neg(inner) => *inner,
        other => Expression::Neg(Box::new(other)),
    }
}

fn add(a: Expression, b: Expression) -> Expression {
    if is_num(&a, 0.0) {
        return b;
    }
    if is_num(&b, 0.0) {
        return a;
    }
    if let (Expression::Num(x), Expression::Num(y)) = (&a, &b) {
        if let Some(e) = folded(x + y) {
            return e;
        }
    }
    Expression::Bin(BinOp::Add, Box::new(a), Box::new(b))
}

fn sub(a: Expression, b: Expression) -> Expression {
    if is_num(&b, 0.0) {
        return a;
    }
    if is_num(&a, 0.0) {
        return neg(b);
    }
    if let (Expression::Num(x), Expression::Num(y)) = (&a, &b) {
        if let Some(e) = folded(x - y) {
            return e;
        }
    }
    Expression::Bin(BinOp::Sub, Box::new(a), Box::new(b))
}

fn mul(a: Expression, b: Expression) -> Expression {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        return num(0.0);
    }
    if is_num(&a, 1.0) {
        return b;
    }
    if is_num(&b, 1.0) {
        return a;
    }
    if let (Expression::Num(x), Expression::Num(y)) = (&a, &b) {
        if let Some(e) = folded(x * y) {
            return e;
        }
    }
    Expression::Bin(BinOp::Mul, Box::new(a), Box::new(b))
}

fn div(a: Expression, b: Expression) -> Expression {
    if is_num(&a, 0.0) {
        return num(0.0);
    }
    if is_num(&b, 1.0) {
        return a;
    }
    if let (Expression::Num(x), Expression::Num(y)) = (&a, &b) {
        if let Some(e) = folded(x / y) {
            return e;
        }
    }
    Expression::Bin(BinOp::Div, Box::new(a), Box::new(b))
}

fn pow(a: Expression, b: Expression) -> Expression {
    if is_num(&b, 1.0) {
        return a;
    }
    if is_num(&b, 0.0) {
        return num(1.0);
    }
    if let (Expression::Num(x), Expression::Num(y)) = (&a, &b) {
        if let Some(e) = folded(x.powf(*y)) {
            return e;
        }
    }
    Expression::Bin(BinOp::Pow, Box::new(a), Box::new(b))
}

fn call(f: Func, a: Expression) -> Expression {
    Expression::Call(f, Box::new(a))
}

// ---------------------------------------------------------------- semantics

impl Expression {
    /// Parses `source`; see the module docs for the grammar.
    pub fn parse(source: &str) -> Result<Self, Error> {
        let mut p = Parser { toks: lex(source)?, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            Tok::End => {}
            Tok::RParen => return Err(syntax(p.at(), "unbalanced ')'")),
            _ => return Err(syntax(p.at(), "unexpected trailing input")),
        }
        e.check_powers()?;
        Ok(e)
    }

    /// Exponents that vary need a positive constant base so the derivative
    /// stays inside the grammar.
    fn check_powers(&self) -> Result<(), Error> {
        match self {
            Expression::Bin(op, a, b) => {
                if *op == BinOp::Pow && b.has_vars() {
                    let ok = !a.has_vars() && a.eval(0.0, 0.0) > 0.0;
                    if !ok {
                        return Err(syntax(0, format!("variable exponent in '{self}' needs a positive constant base")));
                    }
                }
                a.check_powers()?;
                b.check_powers()
            }
            Expression::Neg(a) | Expression::Call(_, a) => a.check_powers(),
            _ => Ok(()),
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expression::Var(v) => *v == var,
            Expression::Num(_) | Expression::Pi => false,
            Expression::Neg(a) | Expression::Call(_, a) => a.depends_on(var),
            Expression::Bin(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    fn has_vars(&self) -> bool {
        self.depends_on(Var::T) || self.depends_on(Var::X)
    }

    /// True for the literal `0`.
    pub fn is_zero(&self) -> bool {
        is_num(self, 0.0)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Expression::Num(v) => *v,
            Expression::Pi => std::f64::consts::PI,
            Expression::Var(Var::T) => t,
            Expression::Var(Var::X) => x,
            Expression::Neg(a) => -a.eval(t, x),
            Expression::Call(f, a) => {
                let y = a.eval(t, x);
                match f {
                    Func::Sin => y.sin(),
                    Func::Cos => y.cos(),
                    Func::Exp => y.exp(),
                    Func::Bump => bump(y),
                }
            }
            Expression::Bin(op, a, b) => {
                let l = a.eval(t, x);
                match op {
                    BinOp::Mul => {
                        if l == 0.0 {
                            return 0.0;
                        }
                        let r = b.eval(t, x);
                        if r == 0.0 {
                            0.0
                        } else {
                            l * r
                        }
                    }
                    BinOp::Div => {
                        if l == 0.0 {
                            0.0
                        } else {
                            l / b.eval(t, x)
                        }
                    }
                    BinOp::Add => l + b.eval(t, x),
                    BinOp::Sub => l - b.eval(t, x),
                    BinOp::Pow => l.powf(b.eval(t, x)),
                }
            }
        }
    }

    /// First symbolic derivative with respect to `var`.
    pub fn derivative(&self, var: Var) -> Expression {
        use Expression as E;
        match self {
            E::Num(_) | E::Pi => num(0.0),
            E::Var(v) => num(if *v == var { 1.0 } else { 0.0 }),
            E::Neg(a) => neg(a.derivative(var)),
            E::Call(f, a) => {
                let da = a.derivative(var);
                if da.is_zero() {
                    return num(0.0);
                }
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, a),
                    Func::Cos => neg(call(Func::Sin, a)),
                    Func::Exp => call(Func::Exp, a),
                    Func::Bump => div(
                        mul(call(Func::Bump, a.clone()), mul(num(-2.0), a.clone())),
                        pow(sub(num(1.0), pow(a, num(2.0))), num(2.0)),
                    ),
                };
                mul(outer, da)
            }
            E::Bin(op, a, b) => {
                let (a, b) = (&**a, &**b);
                match op {
                    BinOp::Add => add(a.derivative(var), b.derivative(var)),
                    BinOp::Sub => sub(a.derivative(var), b.derivative(var)),
                    BinOp::Mul => add(mul(a.derivative(var), b.clone()), mul(a.clone(), b.derivative(var))),
                    BinOp::Div => div(
                        sub(mul(a.derivative(var), b.clone()), mul(a.clone(), b.derivative(var))),
                        pow(b.clone(), num(2.0)),
                    ),
                    BinOp::Pow => {
                        if !b.has_vars() || !b.depends_on(var) {
                            let da = a.derivative(var);
                            if da.is_zero() {
                                return num(0.0);
                            }
                            let lowered = match b {
                                E::Num(c) => num(c - 1.0),
                                other => sub(other.clone(), num(1.0)),
                            };
                            mul(mul(b.clone(), pow(a.clone(), lowered)), da)
                        } else {
                            // constant positive base, checked at parse time
                            let ln_a = a.eval(0.0, 0.0).ln();
                            mul(mul(self.clone(), num(ln_a)), b.derivative(var))
                        }
                    }
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expression::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expression::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expression::Neg(_) => 3,
            Expression::Num(v) if v.is_sign_negative() => 3,
            Expression::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let paren = self.precedence() < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expression::Num(v) => write!(f, "{v:?}")?,
            Expression::Pi => f.write_str("pi")?,
            Expression::Var(Var::T) => f.write_str("t")?,
            Expression::Var(Var::X) => f.write_str("x")?,
            Expression::Neg(a) => {
                f.write_str("-")?;
                a.write_at(f, 3)?;
            }
            Expression::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_at(f, 0)?;
                f.write_str(")")?;
            }
            Expression::Bin(op, a, b) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => (" + ", 1, 2),
                    BinOp::Sub => (" - ", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                    BinOp::Pow => ("^", 5, 3),
                };
                a.write_at(f, lp)?;
                f.write_str(sym)?;
                b.write_at(f, rp)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}
