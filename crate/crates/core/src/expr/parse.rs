//! Pratt parser for scalar expressions.
//!
//! Binding powers, loosest first: `+ -` (left), `* /` (left), prefix `-`,
//! `^` (right, constant exponent only). Functions are applied by name with
//! parentheses and take exactly one argument.

use super::ast::{BinaryOp, Node, UnaryOp};
use super::{eval_node_f64, ParseError, ScalarExpr};

#[derive(Clone, Debug, PartialEq)]
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
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, offset: start });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
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
            let lexeme = &text[start..i];
            let value: f64 = lexeme.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                found: lexeme.to_string(),
                expected: vec!["number".into()],
            })?;
            out.push(Token { tok: Tok::Num(value), offset: start });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(text[start..i].to_string()), offset: start });
            continue;
        }
        let ch = text[start..].chars().next().unwrap_or('?');
        return Err(ParseError::Syntax {
            offset: start,
            found: ch.to_string(),
            expected: operand_expected(),
        });
    }
    out.push(Token { tok: Tok::Eof, offset: text.len() });
    Ok(out)
}

fn operand_expected() -> Vec<String> {
    ["number", "identifier", "(", "-"].iter().map(|s| s.to_string()).collect()
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("{v}"),
        Tok::Ident(s) => s.clone(),
        Tok::Plus => "+".into(),
        Tok::Minus => "-".into(),
        Tok::Star => "*".into(),
        Tok::Slash => "/".into(),
        Tok::Caret => "^".into(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
        Tok::Eof => "end of input".into(),
    }
}

const PREFIX_NEG_BP: u8 = 5;
const POW_LEFT_BP: u8 = 8;
const POW_RIGHT_BP: u8 = 7;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
    time_dependent: bool,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: Vec<String>) -> ParseError {
        let t = self.peek();
        ParseError::Syntax { offset: t.offset, found: describe(&t.tok), expected }
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, ParseError> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            Err(self.unexpected(vec![describe(&tok)]))
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Node, ParseError> {
        self.depth += 1;
        if self.depth > 256 {
            return Err(ParseError::TooDeep { offset: self.peek().offset });
        }
        let mut lhs = self.prefix()?;
        loop {
            let (op, lbp, rbp) = match self.peek().tok {
                Tok::Plus => (Some(BinaryOp::Add), 1, 2),
                Tok::Minus => (Some(BinaryOp::Sub), 1, 2),
                Tok::Star => (Some(BinaryOp::Mul), 3, 4),
                Tok::Slash => (Some(BinaryOp::Div), 3, 4),
                Tok::Caret => (None, POW_LEFT_BP, POW_RIGHT_BP),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.bump();
            match op {
                Some(op) => {
                    let rhs = self.expr(rbp)?;
                    lhs = Node::binary(op, lhs, rhs);
                }
                None => {
                    let offset = self.peek().offset;
                    let exponent = self.expr(rbp)?;
                    if !exponent.is_constant() {
                        return Err(ParseError::NonConstantExponent { offset });
                    }
                    let value = eval_node_f64(&exponent, &[], None).map_err(|_| {
                        ParseError::NonConstantExponent { offset }
                    })?;
                    lhs = Node::pow(lhs, value);
                }
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Node, ParseError> {
        let token = self.peek().clone();
        match token.tok {
            Tok::Minus => {
                self.bump();
                let arg = self.expr(PREFIX_NEG_BP)?;
                Ok(Node::unary(UnaryOp::Neg, arg))
            }
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr(0)?;
                if self.peek().tok != Tok::RParen {
                    return Err(self.unexpected(vec![")".into(), "operator".into()]));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                self.identifier(&name, token.offset)
            }
            _ => Err(self.unexpected(operand_expected())),
        }
    }

    fn identifier(&mut self, name: &str, offset: usize) -> Result<Node, ParseError> {
        if let Some(op) = UnaryOp::from_name(name) {
            self.expect(Tok::LParen)?;
            let mut args = Vec::new();
            if self.peek().tok != Tok::RParen {
                args.push(self.expr(0)?);
                while self.peek().tok == Tok::Comma {
                    self.bump();
                    args.push(self.expr(0)?);
                }
            }
            if self.peek().tok != Tok::RParen {
                return Err(self.unexpected(vec![")".into(), ",".into(), "operator".into()]));
            }
            self.bump();
            if args.len() != 1 {
                return Err(ParseError::Arity {
                    name: name.to_string(),
                    offset,
                    expected: 1,
                    found: args.len(),
                });
            }
            return Ok(Node::unary(op, args.pop().expect("one argument")));
        }
        if name == "t" && self.time_dependent {
            return Ok(Node::Time);
        }
        if name == "pi" {
            return Ok(Node::Const(std::f64::consts::PI));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if let Ok(k) = digits.parse::<usize>() {
                if k >= 1 && k <= self.dim && !digits.starts_with('0') {
                    return Ok(Node::Var(k - 1));
                }
            }
        }
        Err(ParseError::UnknownIdentifier { name: name.to_string(), offset })
    }
}

pub(super) fn parse(text: &str, dim: usize, time_dependent: bool) -> Result<ScalarExpr, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0, dim, time_dependent, depth: 0 };
    let root = parser.expr(0)?;
    if parser.peek().tok != Tok::Eof {
        return Err(parser.unexpected(vec!["operator".into(), "end of input".into()]));
    }
    Ok(ScalarExpr::from_parts(root, dim, time_dependent))
}
