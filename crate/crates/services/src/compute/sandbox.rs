//! Arithmetic and string expression sandbox.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/' | '%') unary)*
//! unary  := '-' unary | atom
//! atom   := number | string | ident '(' args? ')' | '(' expr ')'
//! ```
//!
//! Strings are single- or double-quoted. Errors name the byte offset where
//! they were detected.

use serde_json::Value;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Num(f64),
    Str(String),
}

impl Scalar {
    pub fn to_json(&self) -> Value {
        match self {
            Scalar::Str(s) => Value::String(s.clone()),
            Scalar::Num(n) if n.fract() == 0.0 && n.abs() < 9.0e15 => Value::from(*n as i64),
            Scalar::Num(n) => serde_json::Number::from_f64(*n)
                .map(Value::Number)
                .unwrap_or(Value::Null),
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            Scalar::Num(_) => "number",
            Scalar::Str(_) => "string",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandboxError {
    pub kind: &'static str,
    pub position: usize,
    pub message: String,
}

impl fmt::Display for SandboxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at position {}: {}", self.kind, self.position, self.message)
    }
}

impl std::error::Error for SandboxError {}

fn parse_err(position: usize, message: impl Into<String>) -> SandboxError {
    SandboxError {
        kind: "parse error",
        position,
        message: message.into(),
    }
}

fn eval_err(position: usize, message: impl Into<String>) -> SandboxError {
    SandboxError {
        kind: "evaluation error",
        position,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, SandboxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let save = i;
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                        i += 1;
                    }
                    if i < bytes.len() && bytes[i].is_ascii_digit() {
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        i = save;
                    }
                }
                let text = &src[start..i];
                let n: f64 = text
                    .parse()
                    .map_err(|_| parse_err(start, format!("malformed number {text:?}")))?;
                out.push((start, Tok::Num(n)));
            }
            '"' | '\'' => {
                let start = i;
                i += 1;
                let mut s = String::new();
                loop {
                    let Some(ch) = src[i..].chars().next() else {
                        return Err(parse_err(start, "unterminated string literal"));
                    };
                    i += ch.len_utf8();
                    if ch == c {
                        break;
                    }
                    if ch == '\\' {
                        let Some(esc) = src[i..].chars().next() else {
                            return Err(parse_err(start, "unterminated string literal"));
                        };
                        i += esc.len_utf8();
                        s.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                    } else {
                        s.push(ch);
                    }
                }
                out.push((start, Tok::Str(s)));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            '+' | '-' | '*' | '/' | '%' => {
                out.push((i, Tok::Op(c)));
                i += 1;
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            ',' => {
                out.push((i, Tok::Comma));
                i += 1;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or(c);
                return Err(parse_err(i, format!("unexpected character {ch:?}")));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Lit(Scalar),
    Neg(usize, Box<Expr>),
    Bin(usize, char, Box<Expr>, Box<Expr>),
    Call(usize, String, Vec<Expr>),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn bump(&mut self) -> Option<(usize, Tok)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr, SandboxError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            let at = self.offset();
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(at, op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, SandboxError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/' | '%'))) = self.peek().cloned() {
            let at = self.offset();
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(at, op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SandboxError> {
        if let Some(Tok::Op('-')) = self.peek() {
            let at = self.offset();
            self.bump();
            return Ok(Expr::Neg(at, Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, SandboxError> {
        let at = self.offset();
        match self.bump() {
            Some((_, Tok::Num(n))) => Ok(Expr::Lit(Scalar::Num(n))),
            Some((_, Tok::Str(s))) => Ok(Expr::Lit(Scalar::Str(s))),
            Some((_, Tok::LParen)) => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some((_, Tok::Ident(name))) => {
                if self.peek() != Some(&Tok::LParen) {
                    return Err(parse_err(self.offset(), format!("expected '(' after {name}")));
                }
                self.bump();
                let mut args = Vec::new();
                if self.peek() == Some(&Tok::RParen) {
                    self.bump();
                    return Ok(Expr::Call(at, name, args));
                }
                loop {
                    args.push(self.expr()?);
                    match self.peek() {
                        Some(Tok::Comma) => {
                            self.bump();
                        }
                        _ => break,
                    }
                }
                self.expect_rparen()?;
                Ok(Expr::Call(at, name, args))
            }
            Some((_, tok)) => Err(parse_err(at, format!("unexpected token {}", describe(&tok)))),
            None => Err(parse_err(at, "unexpected end of input, expected an expression")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), SandboxError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.bump();
                Ok(())
            }
            Some(tok) => Err(parse_err(
                self.offset(),
                format!("expected ')', found {}", describe(tok)),
            )),
            None => Err(parse_err(self.offset(), "unexpected end of input, expected ')'")),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(n) => format!("number {n}"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Ident(i) => format!("identifier {i}"),
        Tok::Op(c) => format!("'{c}'"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
    }
}

fn parse(src: &str) -> Result<Expr, SandboxError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        end: src.len(),
    };
    let e = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(parse_err(p.offset(), format!("unexpected trailing {}", describe(tok))));
    }
    Ok(e)
}

fn num(at: usize, v: &Scalar, what: &str) -> Result<f64, SandboxError> {
    match v {
        Scalar::Num(n) => Ok(*n),
        other => Err(eval_err(
            at,
            format!("{what} expects a number, got {}", other.type_name()),
        )),
    }
}

fn eval_expr(e: &Expr) -> Result<Scalar, SandboxError> {
    match e {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Neg(at, inner) => Ok(Scalar::Num(-num(*at, &eval_expr(inner)?, "unary '-'")?)),
        Expr::Bin(at, op, l, r) => {
            let (l, r) = (eval_expr(l)?, eval_expr(r)?);
            if *op == '+' && (matches!(l, Scalar::Str(_)) || matches!(r, Scalar::Str(_))) {
                return Ok(Scalar::Str(scalar_text(&l) + &scalar_text(&r)));
            }
            let what = format!("'{op}'");
            let (a, b) = (num(*at, &l, &what)?, num(*at, &r, &what)?);
            let v = match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' | '%' if b == 0.0 => return Err(eval_err(*at, "division by zero")),
                '/' => a / b,
                '%' => a % b,
                _ => unreachable!("parser only emits arithmetic operators"),
            };
            Ok(Scalar::Num(v))
        }
        Expr::Call(at, name, args) => {
            let vals = args.iter().map(eval_expr).collect::<Result<Vec<_>, _>>()?;
            call(*at, name, &vals)
        }
    }
}

fn scalar_text(v: &Scalar) -> String {
    match v.to_json() {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn call(at: usize, name: &str, args: &[Scalar]) -> Result<Scalar, SandboxError> {
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(eval_err(
                at,
                format!("{name} takes {n} argument(s), got {}", args.len()),
            ))
        }
    };
    let text = |v: &Scalar| match v {
        Scalar::Str(s) => Ok(s.clone()),
        other => Err(eval_err(
            at,
            format!("{name} expects a string, got {}", other.type_name()),
        )),
    };
    match name {
        "len" => {
            arity(1)?;
            Ok(Scalar::Num(text(&args[0])?.chars().count() as f64))
        }
        "upper" => {
            arity(1)?;
            Ok(Scalar::Str(text(&args[0])?.to_uppercase()))
        }
        "lower" => {
            arity(1)?;
            Ok(Scalar::Str(text(&args[0])?.to_lowercase()))
        }
        "str" => {
            arity(1)?;
            Ok(Scalar::Str(scalar_text(&args[0])))
        }
        "abs" => {
            arity(1)?;
            Ok(Scalar::Num(num(at, &args[0], name)?.abs()))
        }
        "round" => {
            arity(1)?;
            Ok(Scalar::Num(num(at, &args[0], name)?.round()))
        }
        "sqrt" => {
            arity(1)?;
            let x = num(at, &args[0], name)?;
            if x < 0.0 {
                return Err(eval_err(at, "sqrt of a negative number"));
            }
            Ok(Scalar::Num(x.sqrt()))
        }
        "min" | "max" => {
            if args.is_empty() {
                return Err(eval_err(at, format!("{name} needs at least one argument")));
            }
            let nums = args.iter().map(|a| num(at, a, name)).collect::<Result<Vec<_>, _>>()?;
            let pick = if name == "min" { f64::min } else { f64::max };
            Ok(Scalar::Num(nums.into_iter().reduce(pick).expect("non-empty")))
        }
        _ => Err(eval_err(at, format!("unknown function {name}"))),
    }
}

pub fn eval(src: &str) -> Result<Scalar, SandboxError> {
    let e = parse(src)?;
    let v = eval_expr(&e)?;
    if let Scalar::Num(n) = v {
        if !n.is_finite() {
            return Err(eval_err(0, "result is not a finite number"));
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(src: &str) -> Value {
        eval(src).unwrap().to_json()
    }

    #[test]
    fn arithmetic() {
        assert_eq!(ok("2*(3+4)"), Value::from(14));
        assert_eq!(ok("1 + 2 * 3 - 4 / 2"), Value::from(5));
        assert_eq!(ok("-(2 - 5) % 2"), Value::from(1));
        assert_eq!(ok("7 / 2"), serde_json::json!(3.5));
        assert_eq!(ok("1.5e2"), Value::from(150));
    }

    #[test]
    fn strings_and_functions() {
        assert_eq!(ok("upper('ab') + \"c\""), Value::from("ABc"));
        assert_eq!(ok("len('héllo')"), Value::from(5));
        assert_eq!(ok("max(1, 9, 3) + min(4, 2)"), Value::from(11));
        assert_eq!(ok("'n=' + 3"), Value::from("n=3"));
        assert_eq!(ok("round(sqrt(10))"), Value::from(3));
    }

    #[test]
    fn parse_diagnostics_name_position() {
        let e = eval("2*(").unwrap_err();
        assert_eq!(e.kind, "parse error");
        assert_eq!(e.position, 3);
        assert!(e.to_string().contains("position 3"));
        assert_eq!(eval("1 + $").unwrap_err().position, 4);
        assert_eq!(eval("(1 + 2").unwrap_err().position, 6);
        assert_eq!(eval("1 2").unwrap_err().position, 2);
    }

    #[test]
    fn evaluation_errors() {
        assert_eq!(eval("1 / (2 - 2)").unwrap_err().message, "division by zero");
        assert!(eval("'a' * 2").is_err());
        assert!(eval("nope(1)").unwrap_err().message.contains("unknown function"));
        assert!(eval("len(1, 2)").is_err());
    }
}
