//! The use-condition constraint language: a Boolean expression over
//! X509, AKENTI, and SYSTEM attributes with `=`, `<`, `>` comparisons
//! combined by `&&` and `||`. There is no negation, so evaluation is
//! monotone in the attributes a subject holds.

mod eval;
mod parse;

pub use eval::{evaluate, AttributeContext, EvalError, EvalOutcome};
pub use parse::{parse_constraint, SyntaxError};

use std::fmt;

/// Comparison operators. Attribute certificates assert discrete values,
/// so AKENTI and X509 names only ever use `=`; the ordered operators
/// exist for SYSTEM attributes such as `time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CompareOp {
    Eq,
    Lt,
    Gt,
}

impl CompareOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
        }
    }
}

/// Parsed constraint. `Or` and `And` always have at least two children.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ConstraintExpr {
    Or(Vec<ConstraintExpr>),
    And(Vec<ConstraintExpr>),
    Compare {
        name: String,
        op: CompareOp,
        value: String,
    },
}

impl ConstraintExpr {
    pub fn compare(name: &str, op: CompareOp, value: &str) -> Self {
        ConstraintExpr::Compare {
            name: name.to_string(),
            op,
            value: value.to_string(),
        }
    }

    /// Builds an n-ary conjunction, flattening the degenerate cases so the
    /// arity invariant holds.
    pub fn and(mut children: Vec<ConstraintExpr>) -> Self {
        match children.len() {
            0 => panic!("empty conjunction"),
            1 => children.pop().unwrap(),
            _ => ConstraintExpr::And(children),
        }
    }

    pub fn or(mut children: Vec<ConstraintExpr>) -> Self {
        match children.len() {
            0 => panic!("empty disjunction"),
            1 => children.pop().unwrap(),
            _ => ConstraintExpr::Or(children),
        }
    }

    /// Every attribute name referenced anywhere in the expression.
    pub fn attribute_names(&self) -> Vec<&str> {
        let mut names = Vec::new();
        self.collect_names(&mut names);
        names
    }

    fn collect_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ConstraintExpr::Or(cs) | ConstraintExpr::And(cs) => {
                for c in cs {
                    c.collect_names(out);
                }
            }
            ConstraintExpr::Compare { name, .. } => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
        }
    }

    /// Renders the expression in the concrete syntax; `parse_constraint`
    /// of the result reproduces the expression.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        self.pretty_into(&mut out, 0);
        out
    }

    // prec: 0 = or context, 1 = and context
    fn pretty_into(&self, out: &mut String, prec: u8) {
        match self {
            ConstraintExpr::Or(cs) => {
                let parens = prec > 0;
                if parens {
                    out.push('(');
                }
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" || ");
                    }
                    c.pretty_into(out, 0);
                }
                if parens {
                    out.push(')');
                }
            }
            ConstraintExpr::And(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" && ");
                    }
                    c.pretty_into(out, 1);
                }
            }
            ConstraintExpr::Compare { name, op, value } => {
                out.push_str(name);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                if needs_quoting(value) {
                    out.push('"');
                    out.push_str(value);
                    out.push('"');
                } else {
                    out.push_str(value);
                }
            }
        }
    }
}

fn needs_quoting(value: &str) -> bool {
    value.is_empty()
        || value.starts_with('"')
        || value.contains(|c| matches!(c, ')' | '(' | '&' | '|'))
        || value.starts_with(char::is_whitespace)
        || value.ends_with(char::is_whitespace)
}

impl fmt::Display for ConstraintExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}
