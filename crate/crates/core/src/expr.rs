//! Small analytic expressions in `x` and `y` for user-defined problems.
//!
//! Supports `+ - * / ^`, unary minus, numeric literals, `pi`, and the
//! functions `exp`, `ln`, `sqrt`, `sin`, `cos`, `tan`, `abs`. Derivatives are
//! taken symbolically so a custom exact solution also yields its source term.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Abs,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

// constructors that fold the trivial cases, keeping derivative trees small
fn add(a: Expr, c: Expr) -> Expr {
    match (&a, &c) {
        (Expr::Num(x), _) if *x == 0.0 => c,
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (Expr::Num(x), Expr::Num(y)) => num(x + y),
        _ => Expr::Add(b(a), b(c)),
    }
}

fn sub(a: Expr, c: Expr) -> Expr {
    match (&a, &c) {
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (Expr::Num(x), _) if *x == 0.0 => neg(c),
        (Expr::Num(x), Expr::Num(y)) => num(x - y),
        _ => Expr::Sub(b(a), b(c)),
    }
}

fn mul(a: Expr, c: Expr) -> Expr {
    match (&a, &c) {
        (Expr::Num(x), _) | (_, Expr::Num(x)) if *x == 0.0 => num(0.0),
        (Expr::Num(x), _) if *x == 1.0 => c,
        (_, Expr::Num(y)) if *y == 1.0 => a,
        (Expr::Num(x), Expr::Num(y)) => num(x * y),
        _ => Expr::Mul(b(a), b(c)),
    }
}

fn div(a: Expr, c: Expr) -> Expr {
    match (&a, &c) {
        (Expr::Num(x), _) if *x == 0.0 => num(0.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        _ => Expr::Div(b(a), b(c)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(b(other)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, b(a))
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Config(format!("unexpected `{}` in expression `{src}`", p.tokens[p.pos])));
        }
        Ok(e)
    }

    pub fn eval(&self, p: Point) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => p.x,
            Expr::Y => p.y,
            Expr::Neg(a) => -a.eval(p),
            Expr::Add(a, c) => a.eval(p) + c.eval(p),
            Expr::Sub(a, c) => a.eval(p) - c.eval(p),
            Expr::Mul(a, c) => a.eval(p) * c.eval(p),
            Expr::Div(a, c) => a.eval(p) / c.eval(p),
            Expr::Pow(a, c) => {
                let base = a.eval(p);
                match **c {
                    Expr::Num(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(e as i32),
                    _ => base.powf(c.eval(p)),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(p);
                match f {
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                    Func::Sqrt => v.sqrt(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tan => v.tan(),
                    Func::Abs => v.abs(),
                }
            }
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::X | Expr::Y => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Add(a, c) | Expr::Sub(a, c) | Expr::Mul(a, c) | Expr::Div(a, c) | Expr::Pow(a, c) => {
                a.is_constant() && c.is_constant()
            }
        }
    }

    /// Partial derivative with respect to `var`.
    pub fn derivative(&self, var: Var) -> Expr {
        match self {
            Expr::Num(_) => num(0.0),
            Expr::X => num(if var == Var::X { 1.0 } else { 0.0 }),
            Expr::Y => num(if var == Var::Y { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derivative(var)),
            Expr::Add(a, c) => add(a.derivative(var), c.derivative(var)),
            Expr::Sub(a, c) => sub(a.derivative(var), c.derivative(var)),
            Expr::Mul(a, c) => add(mul(a.derivative(var), (**c).clone()), mul((**a).clone(), c.derivative(var))),
            Expr::Div(a, c) => div(
                sub(mul(a.derivative(var), (**c).clone()), mul((**a).clone(), c.derivative(var))),
                Expr::Pow(c.clone(), b(num(2.0))),
            ),
            Expr::Pow(a, c) if c.is_constant() => {
                let e = c.eval(Point::zeros());
                mul(mul(num(e), Expr::Pow(a.clone(), b(num(e - 1.0)))), a.derivative(var))
            }
            Expr::Pow(a, c) => {
                // d(a^c) = a^c (c' ln a + c a'/a)
                let lhs = mul(c.derivative(var), call(Func::Ln, (**a).clone()));
                let rhs = div(mul((**c).clone(), a.derivative(var)), (**a).clone());
                mul(self.clone(), add(lhs, rhs))
            }
            Expr::Call(f, a) => {
                let inner = (**a).clone();
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Ln => div(num(1.0), inner),
                    Func::Sqrt => div(num(0.5), self.clone()),
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Tan => div(num(1.0), Expr::Pow(b(call(Func::Cos, inner)), b(num(2.0)))),
                    Func::Abs => div(inner.clone(), call(Func::Abs, inner)),
                };
                mul(outer, a.derivative(var))
            }
        }
    }

    pub fn gradient(&self) -> [Expr; 2] {
        [self.derivative(Var::X), self.derivative(Var::Y)]
    }

    pub fn laplacian(&self) -> Expr {
        let [dx, dy] = self.gradient();
        add(dx.derivative(Var::X), dy.derivative(Var::Y))
    }

    pub fn into_fn(self) -> Arc<dyn Fn(Point) -> f64 + Send + Sync> {
        Arc::new(move |p| self.eval(p))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => write!(f, "x"),
            Expr::Y => write!(f, "y"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, c) => write!(f, "({a} + {c})"),
            Expr::Sub(a, c) => write!(f, "({a} - {c})"),
            Expr::Mul(a, c) => write!(f, "({a} * {c})"),
            Expr::Div(a, c) => write!(f, "({a} / {c})"),
            Expr::Pow(a, c) => write!(f, "({a} ^ {c})"),
            Expr::Call(func, a) => write!(f, "{}({a})", format!("{func:?}").to_lowercase()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "{v}"),
            Token::Ident(s) => write!(f, "{s}"),
            Token::Op(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Config(format!("bad number `{text}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Config(format!("unexpected character `{c}` in expression `{src}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Config(format!("expected `{op}` in expression")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' { Expr::Add(b(lhs), b(rhs)) } else { Expr::Sub(b(lhs), b(rhs)) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { Expr::Mul(b(lhs), b(rhs)) } else { Expr::Div(b(lhs), b(rhs)) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(b(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            // right associative, and -x^2 binds as -(x^2)
            let exp = self.unary()?;
            return Ok(Expr::Pow(b(base), b(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.tokens.get(self.pos).cloned().ok_or_else(|| Error::Config("expression ends early".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Token::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::X),
                "y" => Ok(Expr::Y),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                _ => {
                    let f = match name.as_str() {
                        "exp" => Func::Exp,
                        "ln" | "log" => Func::Ln,
                        "sqrt" => Func::Sqrt,
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "tan" => Func::Tan,
                        "abs" => Func::Abs,
                        other => return Err(Error::Config(format!("unknown name `{other}` in expression"))),
                    };
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(Expr::Call(f, b(arg)))
                }
            },
            Token::Op(c) => Err(Error::Config(format!("unexpected `{c}` in expression"))),
        }
    }
}
