//! Tiny expression language for coefficient fields in experiment configs.
//!
//! Grammar: `+ - * / ^`, parentheses, unary minus, the constant `pi`, numeric
//! literals, the functions sin/cos/exp/sqrt/log/abs, and the variables
//! `y1..yN`, `z1..zN`. Parsed once at config time; evaluation is a tree walk.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    VarY(usize),
    VarZ(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Log,
    Abs,
}

impl Expr {
    /// Parse and validate variable indices against the space dimension.
    pub fn parse(src: &str, space_dim: usize) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            space_dim,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Config(format!(
                "trailing input in expression {src:?} at token {}",
                p.pos
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, y: &[f64], z: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::VarY(i) => y[*i],
            Expr::VarZ(i) => z[*i],
            Expr::Neg(e) => -e.eval(y, z),
            Expr::Add(a, b) => a.eval(y, z) + b.eval(y, z),
            Expr::Sub(a, b) => a.eval(y, z) - b.eval(y, z),
            Expr::Mul(a, b) => a.eval(y, z) * b.eval(y, z),
            Expr::Div(a, b) => a.eval(y, z) / b.eval(y, z),
            Expr::Pow(a, b) => a.eval(y, z).powf(b.eval(y, z)),
            Expr::Call(f, e) => {
                let v = e.eval(y, z);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => v.sqrt(),
                    Func::Log => v.ln(),
                    Func::Abs => v.abs(),
                }
            }
        }
    }

    pub fn uses_z(&self) -> bool {
        match self {
            Expr::VarZ(_) => true,
            Expr::VarY(_) | Expr::Const(_) => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses_z(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.uses_z() || b.uses_z(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || bytes[i] == 'e'
                        || bytes[i] == 'E'
                        || ((bytes[i] == '+' || bytes[i] == '-')
                            && i > start
                            && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let v = text
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number {text:?}")))?;
                out.push(Token::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(bytes[start..i].iter().collect()));
            }
            other => {
                return Err(Error::Config(format!(
                    "unexpected character {other:?} in expression"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    space_dim: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(e),
                    _ => Err(Error::Config("missing closing parenthesis".into())),
                }
            }
            Some(Token::Ident(name)) => self.ident(name),
            other => Err(Error::Config(format!("unexpected token {other:?}"))),
        }
    }

    fn ident(&mut self, name: String) -> Result<Expr> {
        if name == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        let func = match name.as_str() {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            "log" => Some(Func::Log),
            "abs" => Some(Func::Abs),
            _ => None,
        };
        if let Some(f) = func {
            if !matches!(self.bump(), Some(Token::LParen)) {
                return Err(Error::Config(format!("function {name} needs parentheses")));
            }
            let arg = self.expr()?;
            if !matches!(self.bump(), Some(Token::RParen)) {
                return Err(Error::Config(format!("unclosed call to {name}")));
            }
            return Ok(Expr::Call(f, Box::new(arg)));
        }
        let (kind, idx_str) = name.split_at(1);
        let idx: usize = idx_str
            .parse()
            .map_err(|_| Error::Config(format!("unknown identifier {name:?}")))?;
        if idx == 0 || idx > self.space_dim {
            return Err(Error::Config(format!(
                "variable {name} out of range for space dimension {}",
                self.space_dim
            )));
        }
        match kind {
            "y" => Ok(Expr::VarY(idx - 1)),
            "z" => Ok(Expr::VarZ(idx - 1)),
            _ => Err(Error::Config(format!("unknown identifier {name:?}"))),
        }
    }
}
