//! Recursive-descent parser for the constraint concrete syntax.
//!
//! ```text
//! expr       := and ( "||" and )*
//! and        := prim ( "&&" prim )*
//! prim       := "(" expr ")" | comparison
//! comparison := IDENT OP VALUE
//! OP         := "=" | "<" | ">"
//! VALUE      := run of characters up to the next unquoted ")", "&", "|",
//!               or end of input, trimmed; or a double-quoted string
//! IDENT      := [A-Za-z_][A-Za-z0-9_.-]*
//! ```
//!
//! `&&` binds tighter than `||`; whitespace is insignificant outside
//! quotes.

use thiserror::Error;

use super::{CompareOp, ConstraintExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("syntax error at byte {pos}: {message}")]
pub struct SyntaxError {
    pub pos: usize,
    pub message: String,
}

pub fn parse_constraint(text: &str) -> Result<ConstraintExpr, SyntaxError> {
    let mut parser = Parser {
        bytes: text.as_bytes(),
        pos: 0,
    };
    parser.skip_ws();
    if parser.at_end() {
        return Err(parser.error("empty constraint"));
    }
    let expr = parser.expr()?;
    parser.skip_ws();
    if !parser.at_end() {
        return Err(parser.error("trailing input after expression"));
    }
    Ok(expr)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> SyntaxError {
        SyntaxError {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.bytes[self.pos..].starts_with(token.as_bytes()) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<ConstraintExpr, SyntaxError> {
        let mut children = vec![self.and()?];
        loop {
            self.skip_ws();
            if self.eat("||") {
                self.skip_ws();
                children.push(self.and()?);
            } else {
                break;
            }
        }
        Ok(ConstraintExpr::or(children))
    }

    fn and(&mut self) -> Result<ConstraintExpr, SyntaxError> {
        let mut children = vec![self.prim()?];
        loop {
            self.skip_ws();
            // A single '&' or '|' is never valid here; catching it early
            // gives a better message than "expected identifier".
            match self.peek() {
                Some(b'&') => {
                    if !self.eat("&&") {
                        return Err(self.error("expected '&&'"));
                    }
                    self.skip_ws();
                    children.push(self.prim()?);
                }
                _ => break,
            }
        }
        Ok(ConstraintExpr::and(children))
    }

    fn prim(&mut self) -> Result<ConstraintExpr, SyntaxError> {
        self.skip_ws();
        if self.eat("(") {
            let inner = self.expr()?;
            self.skip_ws();
            if !self.eat(")") {
                return Err(self.error("expected ')'"));
            }
            Ok(inner)
        } else {
            self.comparison()
        }
    }

    fn comparison(&mut self) -> Result<ConstraintExpr, SyntaxError> {
        let name = self.ident()?;
        self.skip_ws();
        let op = match self.peek() {
            Some(b'=') => CompareOp::Eq,
            Some(b'<') => CompareOp::Lt,
            Some(b'>') => CompareOp::Gt,
            _ => return Err(self.error("expected comparison operator '=', '<', or '>'")),
        };
        self.pos += 1;
        self.skip_ws();
        let value = self.value()?;
        Ok(ConstraintExpr::Compare { name, op, value })
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        let start = self.pos;
        match self.peek() {
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => self.pos += 1,
            _ => return Err(self.error("expected identifier")),
        }
        while self
            .peek()
            .is_some_and(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
        {
            self.pos += 1;
        }
        Ok(String::from_utf8(self.bytes[start..self.pos].to_vec()).unwrap())
    }

    fn value(&mut self) -> Result<String, SyntaxError> {
        if self.eat("\"") {
            let start = self.pos;
            while self.peek().is_some_and(|b| b != b'"') {
                self.pos += 1;
            }
            if self.at_end() {
                return Err(self.error("unterminated quoted value"));
            }
            let value = String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned();
            self.pos += 1; // closing quote
            Ok(value)
        } else {
            let start = self.pos;
            while self.peek().is_some_and(|b| !matches!(b, b')' | b'&' | b'|')) {
                self.pos += 1;
            }
            let raw = String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned();
            let value = raw.trim().to_string();
            if value.is_empty() {
                self.pos = start;
                return Err(self.error("expected value"));
            }
            Ok(value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::ConstraintExpr as E;

    fn cmp(name: &str, op: CompareOp, value: &str) -> E {
        E::compare(name, op, value)
    }

    #[test]
    fn single_comparison() {
        assert_eq!(
            parse_constraint("group = clients").unwrap(),
            cmp("group", CompareOp::Eq, "clients")
        );
    }

    #[test]
    fn dn_value_with_spaces_and_equals() {
        assert_eq!(
            parse_constraint("DN=/O=DOEGrids/OU=People/CN=Jane Doe").unwrap(),
            cmp("DN", CompareOp::Eq, "/O=DOEGrids/OU=People/CN=Jane Doe")
        );
    }

    #[test]
    fn full_three_way_disjunction() {
        let text = "(DN=/O=DOEGrids/OU=People/CN=Jane Doe) ||\n\
                    (role=developer && (time>5pm) && (time<8am)) ||\n\
                    (group=clients && executable=TRANSP)";
        let expected = E::Or(vec![
            cmp("DN", CompareOp::Eq, "/O=DOEGrids/OU=People/CN=Jane Doe"),
            E::And(vec![
                cmp("role", CompareOp::Eq, "developer"),
                cmp("time", CompareOp::Gt, "5pm"),
                cmp("time", CompareOp::Lt, "8am"),
            ]),
            E::And(vec![
                cmp("group", CompareOp::Eq, "clients"),
                cmp("executable", CompareOp::Eq, "TRANSP"),
            ]),
        ]);
        assert_eq!(parse_constraint(text).unwrap(), expected);
    }

    #[test]
    fn and_binds_tighter_than_or() {
        assert_eq!(
            parse_constraint("a=1 || b=2 && c=3").unwrap(),
            E::Or(vec![
                cmp("a", CompareOp::Eq, "1"),
                E::And(vec![cmp("b", CompareOp::Eq, "2"), cmp("c", CompareOp::Eq, "3")]),
            ])
        );
    }

    #[test]
    fn quoted_values() {
        assert_eq!(
            parse_constraint("name = \"a && b\"").unwrap(),
            cmp("name", CompareOp::Eq, "a && b")
        );
        assert!(parse_constraint("name = \"open").is_err());
    }

    #[test]
    fn syntax_errors_with_position() {
        let err = parse_constraint("((").unwrap_err();
        assert_eq!(err.pos, 2);
        assert!(parse_constraint("").is_err());
        assert!(parse_constraint("a").is_err());
        assert!(parse_constraint("a = b & c = d").is_err());
        assert!(parse_constraint("a = b | c = d").is_err());
        assert!(parse_constraint("(a=b").is_err());
        assert!(parse_constraint("a=b)").is_err());
        assert!(parse_constraint("= b").is_err());
        assert!(parse_constraint("a =").is_err());
        assert!(parse_constraint("1a = b").is_err());
    }

    #[test]
    fn parens_collapse_to_child() {
        assert_eq!(
            parse_constraint("((group = clients))").unwrap(),
            cmp("group", CompareOp::Eq, "clients")
        );
    }
}
