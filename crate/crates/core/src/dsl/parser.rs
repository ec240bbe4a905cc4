//! Recursive-descent parser for the rule language. See `docs/GRAMMAR.md`.

use super::ast::{ArithOp, BoolExpr, CmpOp, IntExpr};
use super::lexer::{tokenize, Spanned, Tok};
use super::ParseError;

/// Builtin function names accepted by the parser.
pub const BUILTINS: [&str; 5] = ["is_prime", "is_cube", "abs", "last_digit", "distinct_count"];

enum Typed {
    Int(IntExpr),
    Bool(BoolExpr),
}

impl Typed {
    fn into_int(self) -> IntExpr {
        match self {
            Typed::Int(e) => e,
            Typed::Bool(b) => IntExpr::FromBool(Box::new(b)),
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

pub(crate) fn parse(src: &str) -> Result<BoolExpr, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let start = p.offset();
    let expr = p.or_expr()?;
    p.expect(Tok::Eof, &["`and`", "`or`", "operator", "end of input"])?;
    p.require_bool(expr, start)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].offset
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &[&str]) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn require_bool(&self, e: Typed, offset: usize) -> Result<BoolExpr, ParseError> {
        match e {
            Typed::Bool(b) => Ok(b),
            Typed::Int(_) => Err(ParseError::Type {
                offset,
                message: "expected a boolean expression, found an integer".into(),
            }),
        }
    }

    fn or_expr(&mut self) -> Result<Typed, ParseError> {
        let start = self.offset();
        let first = self.and_expr()?;
        if self.peek() != &Tok::Or {
            return Ok(first);
        }
        let mut items = vec![self.require_bool(first, start)?];
        while self.eat(&Tok::Or) {
            let at = self.offset();
            let rhs = self.and_expr()?;
            items.push(self.require_bool(rhs, at)?);
        }
        Ok(Typed::Bool(BoolExpr::Or(items)))
    }

    fn and_expr(&mut self) -> Result<Typed, ParseError> {
        let start = self.offset();
        let first = self.not_expr()?;
        if self.peek() != &Tok::And {
            return Ok(first);
        }
        let mut items = vec![self.require_bool(first, start)?];
        while self.eat(&Tok::And) {
            let at = self.offset();
            let rhs = self.not_expr()?;
            items.push(self.require_bool(rhs, at)?);
        }
        Ok(Typed::Bool(BoolExpr::And(items)))
    }

    fn not_expr(&mut self) -> Result<Typed, ParseError> {
        if self.eat(&Tok::Not) {
            let at = self.offset();
            let inner = self.not_expr()?;
            return Ok(Typed::Bool(BoolExpr::Not(Box::new(self.require_bool(inner, at)?))));
        }
        self.comparison()
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        Some(match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return None,
        })
    }

    fn comparison(&mut self) -> Result<Typed, ParseError> {
        let first = self.sum()?;
        if self.eat(&Tok::In) {
            self.expect(Tok::LBrace, &["`{`"])?;
            let mut set = vec![self.signed_int()?];
            while self.eat(&Tok::Comma) {
                set.push(self.signed_int()?);
            }
            self.expect(Tok::RBrace, &["`,`", "`}`"])?;
            return Ok(Typed::Bool(BoolExpr::In(first.into_int(), set)));
        }
        let mut rest = Vec::new();
        while let Some(op) = self.cmp_op() {
            self.bump();
            rest.push((op, self.sum()?.into_int()));
        }
        if rest.is_empty() {
            Ok(first)
        } else {
            Ok(Typed::Bool(BoolExpr::Compare(first.into_int(), rest)))
        }
    }

    fn signed_int(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.unexpected(&["integer"])),
        }
    }

    fn sum(&mut self) -> Result<Typed, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Typed::Int(IntExpr::Arith(
                op,
                Box::new(lhs.into_int()),
                Box::new(rhs.into_int()),
            ));
        }
    }

    fn term(&mut self) -> Result<Typed, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                Tok::Percent => ArithOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Typed::Int(IntExpr::Arith(
                op,
                Box::new(lhs.into_int()),
                Box::new(rhs.into_int()),
            ));
        }
    }

    fn unary(&mut self) -> Result<Typed, ParseError> {
        if self.eat(&Tok::Minus) {
            let inner = self.unary()?.into_int();
            return Ok(Typed::Int(match inner {
                IntExpr::Lit(v) => IntExpr::Lit(-v),
                other => IntExpr::Neg(Box::new(other)),
            }));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Typed, ParseError> {
        let start = self.offset();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Typed::Int(IntExpr::Lit(v)))
            }
            Tok::True => {
                self.bump();
                Ok(Typed::Bool(BoolExpr::Lit(true)))
            }
            Tok::False => {
                self.bump();
                Ok(Typed::Bool(BoolExpr::Lit(false)))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.or_expr()?;
                self.expect(Tok::RParen, &["`)`", "operator"])?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "a" => return Ok(Typed::Int(IntExpr::Var(0))),
                    "b" => return Ok(Typed::Int(IntExpr::Var(1))),
                    "c" => return Ok(Typed::Int(IntExpr::Var(2))),
                    _ => {}
                }
                if !BUILTINS.contains(&name.as_str()) {
                    return Err(ParseError::UnknownIdentifier {
                        offset: start,
                        name,
                    });
                }
                self.call(&name, start)
            }
            _ => Err(self.unexpected(&["integer", "`a`", "`b`", "`c`", "`(`", "`-`", "`not`", "builtin call"])),
        }
    }

    fn call(&mut self, name: &str, start: usize) -> Result<Typed, ParseError> {
        self.expect(Tok::LParen, &["`(`"])?;
        let mut args = Vec::new();
        if self.peek() != &Tok::RParen {
            args.push(self.or_expr()?.into_int());
            while self.eat(&Tok::Comma) {
                args.push(self.or_expr()?.into_int());
            }
        }
        self.expect(Tok::RParen, &["`,`", "`)`"])?;
        let arity_error = |want: &str| ParseError::Type {
            offset: start,
            message: format!("`{name}` takes {want}, got {}", args.len()),
        };
        if name == "distinct_count" {
            if args.is_empty() {
                return Err(arity_error("at least one argument"));
            }
            return Ok(Typed::Int(IntExpr::DistinctCount(args)));
        }
        if args.len() != 1 {
            return Err(arity_error("exactly one argument"));
        }
        let arg = args.pop().expect("one argument");
        Ok(match name {
            "is_prime" => Typed::Bool(BoolExpr::IsPrime(arg)),
            "is_cube" => Typed::Bool(BoolExpr::IsCube(arg)),
            "abs" => Typed::Int(IntExpr::Abs(Box::new(arg))),
            "last_digit" => Typed::Int(IntExpr::LastDigit(Box::new(arg))),
            _ => unreachable!("builtin list and dispatch disagree on `{name}`"),
        })
    }
}
