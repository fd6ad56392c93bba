//! Arithmetic on exponent expressions such as `2/p-1` or `(1+sqrt(17))/4`.
//!
//! Grammar: numbers, the variables `p` and `q`, `inf`, `sqrt(..)`, unary
//! signs, `+ - * /` and parentheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An exponent given either as a number or as an expression in `p` and `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Value(f64),
    Symbolic(String),
}

impl Exponent {
    pub fn resolve(&self, p: f64, q: f64) -> Result<f64> {
        match self {
            Exponent::Value(v) => Ok(*v),
            Exponent::Symbolic(s) => evaluate(s, p, q),
        }
    }
}

impl From<f64> for Exponent {
    fn from(v: f64) -> Self {
        Exponent::Value(v)
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().parse::<f64>() {
            Ok(v) => Ok(Exponent::Value(v)),
            Err(_) => {
                evaluate(s, 2.0, 2.0)?;
                Ok(Exponent::Symbolic(s.trim().to_string()))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(Var),
    Op(char),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Var {
    P,
    Q,
    Inf,
    Sqrt,
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let bad = |msg: String| Error::Exponent(format!("`{s}`: {msg}"));
    let chars: Vec<char> = s.chars().collect();
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
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse()
                .map_err(|_| bad(format!("bad number `{text}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let var = match word.as_str() {
                "p" => Var::P,
                "q" => Var::Q,
                "inf" => Var::Inf,
                "sqrt" => Var::Sqrt,
                _ => return Err(bad(format!("unknown name `{word}`"))),
            };
            out.push(Token::Ident(var));
        } else if "+-*/()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(bad(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    p: f64,
    q: f64,
    src: &'a str,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Exponent(format!("`{}`: {msg}", self.src))
    }

    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(Token::Op(c)) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<f64> {
        let mut v = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            self.pos += 1;
            let r = self.term()?;
            v = if c == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<f64> {
        let mut v = self.factor()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            self.pos += 1;
            let r = self.factor()?;
            v = if c == '*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn factor(&mut self) -> Result<f64> {
        let t = self.peek().ok_or_else(|| self.err("unexpected end"))?;
        self.pos += 1;
        match t {
            Token::Num(v) => Ok(v),
            Token::Ident(Var::P) => Ok(self.p),
            Token::Ident(Var::Q) => Ok(self.q),
            Token::Ident(Var::Inf) => Ok(f64::INFINITY),
            Token::Ident(Var::Sqrt) => {
                self.expect('(')?;
                let v = self.expr()?;
                self.expect(')')?;
                Ok(v.sqrt())
            }
            Token::Op('-') => Ok(-self.factor()?),
            Token::Op('+') => self.factor(),
            Token::Op('(') => {
                let v = self.expr()?;
                self.expect(')')?;
                Ok(v)
            }
            Token::Op(c) => Err(self.err(&format!("unexpected `{c}`"))),
        }
    }
}

/// Evaluates an exponent expression at the given `p` and `q`.
pub fn evaluate(src: &str, p: f64, q: f64) -> Result<f64> {
    let mut parser = Parser {
        tokens: tokenize(src)?,
        pos: 0,
        p,
        q,
        src,
    };
    let v = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.err("trailing input"));
    }
    if v.is_nan() {
        return Err(parser.err("evaluates to NaN"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_exponents() {
        assert_eq!(evaluate("2/p-1", 3.0, 0.0).unwrap(), 2.0 / 3.0 - 1.0);
        assert_eq!(evaluate("2/p + 1", 2.0, 0.0).unwrap(), 2.0);
        assert_eq!(evaluate("-(1/q)*2", 0.0, 4.0).unwrap(), -0.5);
        assert_eq!(
            evaluate("(1+sqrt(17))/4", 0.0, 0.0).unwrap(),
            (1.0 + 17f64.sqrt()) / 4.0
        );
        assert_eq!(evaluate("inf", 0.0, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(evaluate("1.5e0", 0.0, 0.0).unwrap(), 1.5);
    }

    #[test]
    fn malformed() {
        for s in ["2/", "x+1", "(1", "1 2", "", "2$"] {
            assert!(evaluate(s, 2.0, 2.0).is_err(), "{s}");
        }
    }

    #[test]
    fn parse_exponent() {
        assert_eq!("0.5".parse::<Exponent>().unwrap(), Exponent::Value(0.5));
        let e: Exponent = "2/p".parse().unwrap();
        assert_eq!(e.resolve(4.0, 1.0).unwrap(), 0.5);
    }
}
