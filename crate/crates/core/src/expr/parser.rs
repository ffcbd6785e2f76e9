//! Recursive-descent parser for the expression dialect.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary (('**' | '^') unary)?
//! primary := number | 'x' | 'pi' | 'e' | func '(' sum ')' | '(' sum ')'
//! ```
//!
//! `**` binds tighter than unary minus and is right-associative, so
//! `-2**2 == -4` and `2^3^2 == 512`. Function and constant names may carry a
//! `np.`, `numpy.` or `math.` qualifier.

use std::f64::consts;
use std::fmt;

use super::{BinOp, Expr, Func};

/// Largest accepted input.
pub const MAX_INPUT_BYTES: usize = 64 * 1024;

const MAX_NESTING: usize = 200;

const MODULE_PREFIXES: [&str; 3] = ["np.", "numpy.", "math."];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
    pub fragment: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.fragment.is_empty() {
            write!(f, "{} at byte {}", self.message, self.offset)
        } else {
            write!(f, "{} at byte {} near `{}`", self.message, self.offset, self.fragment)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Pow,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
}

/// Parses `text` into an [`Expr`].
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    if text.len() > MAX_INPUT_BYTES {
        return Err(ParseError {
            offset: MAX_INPUT_BYTES - 1,
            message: format!("input exceeds {MAX_INPUT_BYTES} bytes"),
            fragment: String::new(),
        });
    }
    let tokens = lex(text)?;
    if tokens.len() == 1 {
        return Err(ParseError {
            offset: 0,
            message: "empty expression".into(),
            fragment: String::new(),
        });
    }
    let mut parser = Parser { text, tokens, pos: 0, depth: 0 };
    let expr = parser.sum()?;
    let trailing = parser.peek().clone();
    match trailing.tok {
        Tok::End => Ok(expr),
        Tok::RParen => Err(parser.error_at(&trailing, "unbalanced closing parenthesis")),
        _ => Err(parser.error_at(&trailing, "unexpected token (implicit multiplication is not supported)")),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'/' => Tok::Slash,
            b'^' => Tok::Pow,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'*' if bytes.get(i + 1) == Some(&b'*') => {
                i += 1;
                Tok::Pow
            }
            b'*' => Tok::Star,
            b'0'..=b'9' | b'.' => {
                i = scan_number(bytes, i);
                let lexeme = &text[start..i];
                let value: f64 = lexeme.parse().map_err(|_| ParseError {
                    offset: start,
                    message: "malformed number".into(),
                    fragment: lexeme.to_string(),
                })?;
                if !value.is_finite() {
                    return Err(ParseError {
                        offset: start,
                        message: "numeric literal is not finite".into(),
                        fragment: lexeme.to_string(),
                    });
                }
                tokens.push(Token { tok: Tok::Num(value), start, end: i });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
                {
                    i += 1;
                }
                tokens.push(Token { tok: Tok::Ident(text[start..i].to_string()), start, end: i });
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: start,
                    message: "unexpected character".into(),
                    fragment: ch.to_string(),
                });
            }
        };
        i += 1;
        tokens.push(Token { tok, start, end: i });
    }
    tokens.push(Token { tok: Tok::End, start: text.len(), end: text.len() });
    Ok(tokens)
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    // Exponent only if digits follow; otherwise `2e` leaves `e` as an identifier.
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
    i
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if !matches!(t.tok, Tok::End) {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, token: &Token, message: &str) -> ParseError {
        // End-of-input errors point at the last byte so the offset stays inside the text.
        let offset = token.start.min(self.text.len().saturating_sub(1));
        ParseError {
            offset,
            message: message.to_string(),
            fragment: self.text[token.start..token.end].to_string(),
        }
    }

    fn enter(&mut self, token: &Token) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(self.error_at(token, "expression nested too deeply"));
        }
        Ok(())
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.product()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let token = self.peek().clone();
        match token.tok {
            Tok::Minus | Tok::Plus => {
                self.advance();
                self.enter(&token)?;
                let inner = self.unary()?;
                self.depth -= 1;
                Ok(if token.tok == Tok::Minus { -inner } else { inner })
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Pow {
            let token = self.advance();
            self.enter(&token)?;
            let exponent = self.unary()?;
            self.depth -= 1;
            return Ok(base.pow(exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let token = self.advance();
        match &token.tok {
            Tok::Num(v) => Ok(Expr::Const(*v)),
            Tok::LParen => {
                self.enter(&token)?;
                let inner = self.sum()?;
                self.depth -= 1;
                self.expect_close(&token)?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(&token, name),
            Tok::End => Err(self.error_at(&token, "unexpected end of expression")),
            Tok::RParen => Err(self.error_at(&token, "unbalanced closing parenthesis")),
            _ => Err(self.error_at(&token, "expected a number, `x`, a function call or `(`")),
        }
    }

    fn identifier(&mut self, token: &Token, raw: &str) -> Result<Expr, ParseError> {
        let name = MODULE_PREFIXES
            .iter()
            .find_map(|p| raw.strip_prefix(p))
            .unwrap_or(raw);
        let is_call = self.peek().tok == Tok::LParen;
        if !is_call {
            return match name {
                "x" if name == raw => Ok(Expr::Var),
                "pi" => Ok(Expr::Const(consts::PI)),
                "e" => Ok(Expr::Const(consts::E)),
                _ if Func::from_name(name).is_some() => {
                    Err(self.error_at(token, "function name used without arguments"))
                }
                _ => Err(self.error_at(token, "unknown identifier (the only unknown is `x`)")),
            };
        }
        let Some(func) = Func::from_name(name) else {
            return Err(self.error_at(token, "unknown function"));
        };
        let open = self.advance();
        if self.peek().tok == Tok::RParen {
            let close = self.peek().clone();
            return Err(self.error_at(&close, &format!("`{}` takes exactly one argument", func.name())));
        }
        self.enter(&open)?;
        let arg = self.sum()?;
        self.depth -= 1;
        if self.peek().tok == Tok::Comma {
            let comma = self.peek().clone();
            return Err(self.error_at(&comma, &format!("`{}` takes exactly one argument", func.name())));
        }
        self.expect_close(&open)?;
        Ok(Expr::call(func, arg))
    }

    fn expect_close(&mut self, open: &Token) -> Result<(), ParseError> {
        let next = self.peek().clone();
        match next.tok {
            Tok::RParen => {
                self.advance();
                Ok(())
            }
            Tok::End => Err(self.error_at(open, "unclosed parenthesis")),
            _ => Err(self.error_at(&next, "expected `)`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COLEBROOK: &str =
        "1/sqrt(x) + 2.0*log10((0.000045/0.15)/3.7 + 2.51/(100000*sqrt(x)))";

    #[test]
    fn colebrook_example_structure() {
        let e = parse(COLEBROOK).unwrap();
        assert_eq!(e.count_calls(Func::Sqrt), 2);
        assert_eq!(e.count_calls(Func::Log10), 1);
        assert!(matches!(e, Expr::Binary(BinOp::Add, _, _)));
    }

    #[test]
    fn bare_variable() {
        assert_eq!(parse("x").unwrap(), Expr::Var);
        assert_eq!(parse("  x \n").unwrap(), Expr::Var);
    }

    #[test]
    fn kepler_is_left_associative() {
        let e = parse("x - 0.6*sin(x) - 0.6").unwrap();
        let expected = Expr::binary(
            BinOp::Sub,
            Expr::binary(BinOp::Sub, Expr::Var, Expr::binary(BinOp::Mul, Expr::Const(0.6), Expr::Var.sin())),
            Expr::Const(0.6),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse("2+3*4").unwrap().eval(0.7), 14.0);
        assert_eq!(parse("2^3^2").unwrap().eval(0.0), 512.0);
        assert_eq!(parse("2**3**2").unwrap().eval(0.0), 512.0);
        assert_eq!(parse("-2**2").unwrap().eval(0.0), -4.0);
        assert_eq!(parse("2**-1").unwrap().eval(0.0), 0.5);
        assert_eq!(parse("8/4/2").unwrap().eval(0.0), 1.0);
        assert_eq!(parse("1 - 2 - 3").unwrap().eval(0.0), -4.0);
    }

    #[test]
    fn literals_and_constants() {
        assert_eq!(parse("1.5e3").unwrap(), Expr::Const(1500.0));
        assert_eq!(parse("2E-2").unwrap(), Expr::Const(0.02));
        assert_eq!(parse(".5").unwrap(), Expr::Const(0.5));
        assert_eq!(parse("pi").unwrap(), Expr::Const(consts::PI));
        assert_eq!(parse("e").unwrap(), Expr::Const(consts::E));
        assert_eq!(parse("np.exp(x)").unwrap(), Expr::Var.exp());
        assert_eq!(parse("math.pi").unwrap(), Expr::Const(consts::PI));
    }

    #[test]
    fn rejects_implicit_multiplication() {
        let err = parse("2x").unwrap_err();
        assert_eq!(err.offset, 1);
        assert_eq!(err.fragment, "x");
        assert!(parse("2 (x)").is_err());
        assert!(parse("2e").is_err());
    }

    #[test]
    fn rejects_unknown_names() {
        let err = parse("x + y").unwrap_err();
        assert_eq!(err.offset, 4);
        assert_eq!(err.fragment, "y");
        let err = parse("tanh(x)").unwrap_err();
        assert!(err.message.contains("unknown function"));
        assert!(parse("garbage(").is_err());
        assert!(parse("np.x").is_err());
        assert!(parse("sqrt").is_err());
    }

    #[test]
    fn rejects_arity_mismatch() {
        let err = parse("sqrt(x, 2)").unwrap_err();
        assert!(err.message.contains("exactly one argument"));
        assert_eq!(err.offset, 6);
        assert!(parse("exp()").is_err());
    }

    #[test]
    fn rejects_unbalanced_parens() {
        let err = parse("(x + 1").unwrap_err();
        assert_eq!(err.offset, 0);
        assert!(err.message.contains("unclosed"));
        let err = parse("x + 1)").unwrap_err();
        assert_eq!(err.offset, 5);
        assert!(parse("sqrt(x").is_err());
    }

    #[test]
    fn rejects_empty_input() {
        for s in ["", "   ", "\n"] {
            let err = parse(s).unwrap_err();
            assert_eq!(err.offset, 0);
            assert!(!err.message.is_empty());
        }
    }

    #[test]
    fn rejects_non_finite_literals() {
        assert!(parse("1e400").is_err());
    }

    #[test]
    fn rejects_oversized_input() {
        let big = "x+".repeat(MAX_INPUT_BYTES / 2) + "x";
        let err = parse(&big).unwrap_err();
        assert!(err.offset < big.len());
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let s = "(".repeat(5000) + "x" + &")".repeat(5000);
        assert!(parse(&s).unwrap_err().message.contains("nested"));
        let s = "-".repeat(5000) + "x";
        assert!(parse(&s).is_err());
    }

    #[test]
    fn error_offsets_stay_inside_input() {
        for s in ["x +", "x *", "(", "sqrt(", "x $ 2", "é"] {
            let err = parse(s).unwrap_err();
            assert!(err.offset < s.len(), "{s:?} -> {err:?}");
            assert!(!err.message.is_empty());
        }
    }
}
