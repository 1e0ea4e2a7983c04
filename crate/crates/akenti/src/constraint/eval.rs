//! Three-valued evaluation of constraints against the attributes a
//! subject holds, producing true, false, or a residual expression over
//! the SYSTEM attributes the caller could not supply.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::time::parse_time_of_day;

use super::{CompareOp, ConstraintExpr};

/// Keys that resolve in the X509 namespace: DN components plus the whole
/// name under `DN`.
pub const X509_KEYS: [&str; 9] = ["DN", "O", "OU", "CN", "DC", "C", "L", "ST", "EMAIL"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("ordered comparison '{name} {op} {value}' on non-comparable values")]
    TypeError {
        name: String,
        op: String,
        value: String,
    },
}

/// Attribute bindings visible to one evaluation.
///
/// A name resolves as X509 if it is a reserved component key, else AKENTI
/// if the governing use-condition declared it, else SYSTEM.
#[derive(Debug, Clone, Default)]
pub struct AttributeContext {
    /// DN component key -> values, plus the full name under `DN`.
    pub x509: BTreeMap<String, Vec<String>>,
    /// Attribute name -> values the subject provably holds.
    pub akenti: BTreeMap<String, BTreeSet<String>>,
    /// SYSTEM attribute values the caller already knows.
    pub system: BTreeMap<String, String>,
    /// Names declared AKENTI by the governing use-condition.
    pub declared_akenti: BTreeSet<String>,
}

impl AttributeContext {
    pub fn for_subject_dn(dn: &crate::principal::Dn) -> Self {
        AttributeContext {
            x509: dn.component_map(),
            ..Default::default()
        }
    }

    pub fn with_system(mut self, name: &str, value: &str) -> Self {
        self.system.insert(name.to_string(), value.to_string());
        self
    }

    pub fn with_akenti(mut self, name: &str, value: &str) -> Self {
        self.declared_akenti.insert(name.to_string());
        self.akenti
            .entry(name.to_string())
            .or_default()
            .insert(value.to_string());
        self
    }

    /// Declares a name AKENTI without granting any value for it.
    pub fn declare_akenti(mut self, name: &str) -> Self {
        self.declared_akenti.insert(name.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalOutcome {
    True,
    False,
    /// Undecided; the expression contains only SYSTEM comparisons that
    /// the context could not resolve.
    Residual(ConstraintExpr),
}

impl EvalOutcome {
    pub fn is_true(&self) -> bool {
        matches!(self, EvalOutcome::True)
    }
}

enum Partial {
    Known(bool),
    Unknown(ConstraintExpr),
}

/// Evaluates `expr` under `ctx` with Kleene logic: `And` is false if any
/// child is false, `Or` true if any child is true, otherwise unknown
/// children survive into the residual.
pub fn evaluate(expr: &ConstraintExpr, ctx: &AttributeContext) -> Result<EvalOutcome, EvalError> {
    Ok(match eval_node(expr, ctx)? {
        Partial::Known(true) => EvalOutcome::True,
        Partial::Known(false) => EvalOutcome::False,
        Partial::Unknown(residual) => EvalOutcome::Residual(residual),
    })
}

fn eval_node(expr: &ConstraintExpr, ctx: &AttributeContext) -> Result<Partial, EvalError> {
    match expr {
        ConstraintExpr::And(children) => {
            let mut unknown = Vec::new();
            for child in children {
                match eval_node(child, ctx)? {
                    Partial::Known(false) => return Ok(Partial::Known(false)),
                    Partial::Known(true) => {}
                    Partial::Unknown(r) => unknown.push(r),
                }
            }
            Ok(if unknown.is_empty() {
                Partial::Known(true)
            } else {
                Partial::Unknown(ConstraintExpr::and(unknown))
            })
        }
        ConstraintExpr::Or(children) => {
            let mut unknown = Vec::new();
            for child in children {
                match eval_node(child, ctx)? {
                    Partial::Known(true) => return Ok(Partial::Known(true)),
                    Partial::Known(false) => {}
                    Partial::Unknown(r) => unknown.push(r),
                }
            }
            Ok(if unknown.is_empty() {
                Partial::Known(false)
            } else {
                Partial::Unknown(ConstraintExpr::or(unknown))
            })
        }
        ConstraintExpr::Compare { name, op, value } => eval_compare(name, *op, value, ctx, expr),
    }
}

fn eval_compare(
    name: &str,
    op: CompareOp,
    value: &str,
    ctx: &AttributeContext,
    node: &ConstraintExpr,
) -> Result<Partial, EvalError> {
    let type_error = || EvalError::TypeError {
        name: name.to_string(),
        op: op.symbol().to_string(),
        value: value.to_string(),
    };
    if X509_KEYS.contains(&name) {
        // DN components: only equality is meaningful.
        if op != CompareOp::Eq {
            return Err(type_error());
        }
        let held = ctx
            .x509
            .get(name)
            .is_some_and(|values| values.iter().any(|v| v == value));
        Ok(Partial::Known(held))
    } else if ctx.declared_akenti.contains(name) {
        if op != CompareOp::Eq {
            return Err(type_error());
        }
        // Attribute values compare case-insensitively; a declared name
        // with no proven value is false, never unknown.
        let held = ctx
            .akenti
            .get(name)
            .is_some_and(|values| values.iter().any(|v| v.eq_ignore_ascii_case(value)));
        Ok(Partial::Known(held))
    } else {
        let Some(actual) = ctx.system.get(name) else {
            return Ok(Partial::Unknown(node.clone()));
        };
        let ordering = if let (Ok(a), Ok(b)) = (parse_time_of_day(actual), parse_time_of_day(value))
        {
            Some(a.cmp(&b))
        } else if let (Ok(a), Ok(b)) = (actual.trim().parse::<i64>(), value.trim().parse::<i64>()) {
            Some(a.cmp(&b))
        } else {
            None
        };
        let result = match (op, ordering) {
            (CompareOp::Eq, Some(ord)) => ord.is_eq(),
            (CompareOp::Eq, None) => actual == value,
            (CompareOp::Lt, Some(ord)) => ord.is_lt(),
            (CompareOp::Gt, Some(ord)) => ord.is_gt(),
            (CompareOp::Lt | CompareOp::Gt, None) => return Err(type_error()),
        };
        Ok(Partial::Known(result))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::parse_constraint;
    use crate::principal::Dn;

    fn jane_doe_expr() -> ConstraintExpr {
        parse_constraint(
            "(DN=/O=DOEGrids/OU=People/CN=Jane Doe) || \
             (role=developer && (time>5pm) && (time<8am)) || \
             (group=clients && executable=TRANSP)",
        )
        .unwrap()
    }

    #[test]
    fn figure_constraint_true_for_client() {
        let expr = parse_constraint("group = clients").unwrap();
        let ctx = AttributeContext::default().with_akenti("group", "clients");
        assert_eq!(evaluate(&expr, &ctx).unwrap(), EvalOutcome::True);
    }

    #[test]
    fn attribute_value_match_is_case_insensitive() {
        let expr = parse_constraint("group = clients").unwrap();
        let ctx = AttributeContext::default().with_akenti("group", "Clients");
        assert_eq!(evaluate(&expr, &ctx).unwrap(), EvalOutcome::True);
    }

    #[test]
    fn dn_disjunct_grants_jane() {
        let dn = Dn::parse("/O=DOEGrids/OU=People/CN=Jane Doe").unwrap();
        let mut ctx = AttributeContext::for_subject_dn(&dn);
        ctx.declared_akenti.insert("role".into());
        ctx.declared_akenti.insert("group".into());
        assert_eq!(evaluate(&jane_doe_expr(), &ctx).unwrap(), EvalOutcome::True);
    }

    #[test]
    fn developer_leaves_time_residual() {
        let dn = Dn::parse("/O=DOEGrids/OU=People/CN=Someone Else").unwrap();
        let mut ctx = AttributeContext::for_subject_dn(&dn).with_akenti("role", "developer");
        ctx.declared_akenti.insert("group".into());
        let outcome = evaluate(&jane_doe_expr(), &ctx).unwrap();
        let expected = parse_constraint("time>5pm && time<8am").unwrap();
        assert_eq!(outcome, EvalOutcome::Residual(expected));
    }

    #[test]
    fn time_comparison_normalizes() {
        let expr = parse_constraint("time > 5pm").unwrap();
        let ctx = AttributeContext::default().with_system("time", "18:30");
        assert_eq!(evaluate(&expr, &ctx).unwrap(), EvalOutcome::True);
        let ctx = AttributeContext::default().with_system("time", "16:59");
        assert_eq!(evaluate(&expr, &ctx).unwrap(), EvalOutcome::False);
    }

    #[test]
    fn integer_comparison() {
        let expr = parse_constraint("count < 8").unwrap();
        let ctx = AttributeContext::default().with_system("count", "4");
        assert_eq!(evaluate(&expr, &ctx).unwrap(), EvalOutcome::True);
    }

    #[test]
    fn ordered_comparison_on_strings_is_type_error() {
        let expr = parse_constraint("executable > TRANSP").unwrap();
        let ctx = AttributeContext::default().with_system("executable", "TRANSP");
        assert!(evaluate(&expr, &ctx).is_err());
    }

    #[test]
    fn undeclared_name_is_system_and_residual() {
        let expr = parse_constraint("loadfactor < 5").unwrap();
        let ctx = AttributeContext::default();
        assert_eq!(
            evaluate(&expr, &ctx).unwrap(),
            EvalOutcome::Residual(expr.clone())
        );
    }

    #[test]
    fn declared_akenti_without_cert_is_false() {
        let expr = parse_constraint("group = staff").unwrap();
        let ctx = AttributeContext::default().declare_akenti("group");
        assert_eq!(evaluate(&expr, &ctx).unwrap(), EvalOutcome::False);
    }

    #[test]
    fn residual_prunes_known_branches() {
        let expr = parse_constraint("(group=clients && time>5pm) || (group=staff && time<8am)")
            .unwrap();
        let ctx = AttributeContext::default()
            .with_akenti("group", "clients")
            .declare_akenti("group");
        let outcome = evaluate(&expr, &ctx).unwrap();
        assert_eq!(
            outcome,
            EvalOutcome::Residual(parse_constraint("time>5pm").unwrap())
        );
    }
}
