//! Text syntax for [`Expr`].
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" unary)?
//! atom   := number | name | name "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Names: `y1..yn`, `xi1..xin`, `h`, the constants `pi`, `tau`, `e`, `i`,
//! and the functions `exp ln sin cos sqrt pow`.

use std::str::FromStr;

use super::expr::{Expr, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Name(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
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
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("bad number '{text}' at column {}", start + 1)))?;
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Token::Name(chars[start..i].iter().collect())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Token::Op(c)));
            i += 1;
        } else {
            return Err(Error::Schema(format!("unexpected character '{c}' at column {}", i + 1)));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|t| &t.1)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.src.chars().count(), |t| t.0) + 1
    }

    fn fail<T>(&self, what: &str) -> Result<T> {
        Err(Error::Schema(format!(
            "{what} at column {} of '{}'",
            self.column(),
            self.src
        )))
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = lhs + self.term()?;
            } else if self.eat('-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = lhs * self.unary()?;
            } else if self.eat('/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(base.pow(self.unary()?));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::c(v))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.fail("expected ')'");
                }
                Ok(e)
            }
            Some(Token::Name(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(')') {
                        return self.fail("expected ')'");
                    }
                    self.call(&name, args)
                } else {
                    self.name(&name)
                }
            }
            _ => self.fail("expected a number, name or '('"),
        }
    }

    fn call(&self, name: &str, mut args: Vec<Expr>) -> Result<Expr> {
        let arity = if name == "pow" { 2 } else { 1 };
        if args.len() != arity {
            return Err(Error::Schema(format!(
                "{name} takes {arity} argument(s), got {} in '{}'",
                args.len(),
                self.src
            )));
        }
        let a = args.remove(0);
        Ok(match name {
            "exp" => a.exp(),
            "ln" => Expr::Ln(Box::new(a)),
            "sin" => a.sin(),
            "cos" => a.cos(),
            "sqrt" => Expr::Sqrt(Box::new(a)),
            "pow" => a.pow(args.remove(0)),
            _ => return Err(Error::Schema(format!("unknown function '{name}' in '{}'", self.src))),
        })
    }

    fn name(&self, name: &str) -> Result<Expr> {
        let index = |rest: &str| rest.parse::<usize>().ok().filter(|k| *k >= 1).map(|k| k - 1);
        Ok(match name {
            "h" => Expr::Var(Var::H),
            "pi" => Expr::c(std::f64::consts::PI),
            "tau" => Expr::c(std::f64::consts::TAU),
            "e" => Expr::c(std::f64::consts::E),
            "i" => Expr::Const(0.0, 1.0),
            _ => {
                if let Some(k) = name.strip_prefix("xi").and_then(index) {
                    Expr::Var(Var::Xi(k))
                } else if let Some(k) = name.strip_prefix('y').and_then(index) {
                    Expr::Var(Var::Y(k))
                } else {
                    return Err(Error::Schema(format!("unknown name '{name}' in '{}'", self.src)));
                }
            }
        })
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            src,
            tokens: tokenize(src)?,
            pos: 0,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return p.fail("unexpected trailing input");
        }
        Ok(e)
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, y: &[f64], xi: &[f64], h: f64) -> num_complex::Complex<f64> {
        Expr::parse(src).unwrap().value(y, xi, h)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[], &[], 0.0).re, 7.0);
        assert!((eval("2 ^ 3 ^ 2", &[], &[], 0.0).re - 512.0).abs() < 1e-12);
        assert!((eval("-2 ^ 2", &[], &[], 0.0).re + 4.0).abs() < 1e-12);
        assert_eq!(eval("8 / 4 / 2", &[], &[], 0.0).re, 1.0);
        assert_eq!(eval("1.5e-1 * 2", &[], &[], 0.0).re, 0.3);
    }

    #[test]
    fn variables_functions_and_constants() {
        let v = eval("xi1^2 + y2 * h - cos(pi) + pow(y1, 2)", &[3.0, 2.0], &[0.5], 0.1);
        assert!((v.re - (0.25 + 0.2 + 1.0 + 9.0)).abs() < 1e-14);
        let z = eval("xi1 - 1.5 * i", &[], &[2.0], 0.0);
        assert_eq!((z.re, z.im), (2.0, -1.5));
        assert!((eval("2 + cos(y1)", &[std::f64::consts::PI], &[], 0.0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors_name_the_column() {
        let err = Expr::parse("1 + * 2").unwrap_err().to_string();
        assert!(err.contains("column 5"), "{err}");
        assert!(Expr::parse("y0").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 $ 2").is_err());
        assert!(Expr::parse("pow(1)").is_err());
    }
}
