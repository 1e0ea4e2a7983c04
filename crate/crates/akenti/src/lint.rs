//! Static policy analysis over a certificate corpus: unsatisfiable time
//! windows under linear time semantics, attribute authorities that no
//! trust chain can reach, use-conditions from non-stakeholders, and
//! rights nothing grants.

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;

use crate::cert::{AkentiCertificate, AttrType, CertBody, PolicyCert, STANDARD_ACTIONS};
use crate::constraint::{CompareOp, ConstraintExpr};
use crate::time::parse_time_of_day;

#[derive(Debug, Error)]
pub enum LintError {
    #[error("corpus directory {path}: {detail}")]
    Unreadable { path: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl Severity {
    pub fn name(&self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub cert_uid: Option<String>,
}

impl Diagnostic {
    fn new(severity: Severity, code: &'static str, message: String, uid: Option<&str>) -> Self {
        Diagnostic {
            severity,
            code,
            message,
            cert_uid: uid.map(str::to_string),
        }
    }
}

pub const UNSATISFIABLE_TIME_WINDOW: &str = "UNSATISFIABLE_TIME_WINDOW";
pub const UNTRUSTED_ISSUER: &str = "UNTRUSTED_ISSUER";
pub const NO_REACHABLE_AUTHORITY: &str = "NO_REACHABLE_AUTHORITY";
pub const RIGHT_NEVER_GRANTED: &str = "RIGHT_NEVER_GRANTED";
pub const UNPARSABLE_FILE: &str = "UNPARSABLE_FILE";
pub const NO_GOVERNING_POLICY: &str = "NO_GOVERNING_POLICY";

/// Lints every certificate found under `dir` (recursively).
pub fn lint_corpus_dir(dir: &Path) -> Result<Vec<Diagnostic>, LintError> {
    let mut certs = Vec::new();
    let mut diagnostics = Vec::new();
    collect_certs(dir, &mut certs, &mut diagnostics)?;
    diagnostics.extend(lint_certs(&certs));
    Ok(diagnostics)
}

fn collect_certs(
    dir: &Path,
    certs: &mut Vec<AkentiCertificate>,
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<(), LintError> {
    let entries = std::fs::read_dir(dir).map_err(|e| LintError::Unreadable {
        path: dir.display().to_string(),
        detail: e.to_string(),
    })?;
    let mut paths: Vec<_> = entries.filter_map(|e| e.ok()).map(|e| e.path()).collect();
    paths.sort();
    for path in paths {
        if path.is_dir() {
            collect_certs(&path, certs, diagnostics)?;
        } else if path.extension().is_some_and(|ext| ext == "xml") {
            let text = std::fs::read_to_string(&path).map_err(|e| LintError::Unreadable {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
            match crate::cert::parse_certificate(&text) {
                Ok(cert) => certs.push(cert),
                Err(e) => diagnostics.push(Diagnostic::new(
                    Severity::Warning,
                    UNPARSABLE_FILE,
                    format!("{}: {e}", path.display()),
                    None,
                )),
            }
        }
    }
    Ok(())
}

/// Lints an in-memory corpus.
pub fn lint_certs(certs: &[AkentiCertificate]) -> Vec<Diagnostic> {
    let mut diagnostics = Vec::new();
    let policies: Vec<(&AkentiCertificate, &PolicyCert)> = certs
        .iter()
        .filter_map(|c| c.as_policy().map(|p| (c, p)))
        .collect();
    let governing = |resource_root: &str| {
        policies
            .iter()
            .find(|(_, p)| p.resource_name.root_segment() == resource_root)
            .map(|(_, p)| *p)
    };

    let mut all_rights: BTreeSet<&str> = BTreeSet::new();
    for cert in certs {
        let CertBody::UseCondition(uc) = &cert.body else { continue };
        all_rights.extend(uc.rights.iter().map(String::as_str));
        let uid = Some(cert.uid());

        for window in unsatisfiable_time_windows(&uc.constraint) {
            diagnostics.push(Diagnostic::new(
                Severity::Warning,
                UNSATISFIABLE_TIME_WINDOW,
                format!(
                    "no time of day satisfies `{window}` under linear time semantics; \
                     overnight windows must be written with `||`"
                ),
                uid,
            ));
        }

        match governing(uc.resource_name.root_segment()) {
            None => diagnostics.push(Diagnostic::new(
                Severity::Warning,
                NO_GOVERNING_POLICY,
                format!("no policy certificate in the corpus governs {}", uc.resource_name),
                uid,
            )),
            Some(policy) => {
                if !policy.uc_issuers.contains(&cert.header.issuer) {
                    diagnostics.push(Diagnostic::new(
                        Severity::Error,
                        UNTRUSTED_ISSUER,
                        format!(
                            "use-condition for {} issued by {}, who is not a stakeholder",
                            uc.resource_name, cert.header.issuer
                        ),
                        uid,
                    ));
                }
                for info in &uc.attribute_infos {
                    if info.attr_type != AttrType::Akenti {
                        continue;
                    }
                    let reachable = info.authorities.iter().any(|authority| {
                        policy.ca_infos.iter().any(|ca| ca.ca_dn == authority.ca_dn)
                    });
                    if !reachable {
                        diagnostics.push(Diagnostic::new(
                            Severity::Warning,
                            NO_REACHABLE_AUTHORITY,
                            format!(
                                "attribute {:?} of use-condition for {}: no authority is \
                                 certified by a CA the policy trusts",
                                info.attr_name, uc.resource_name
                            ),
                            uid,
                        ));
                    }
                }
            }
        }
    }

    for action in STANDARD_ACTIONS {
        if !all_rights.contains(action) {
            diagnostics.push(Diagnostic::new(
                Severity::Info,
                RIGHT_NEVER_GRANTED,
                format!("no use-condition in the corpus grants the {action:?} right"),
                None,
            ));
        }
    }
    diagnostics
}

/// Conjunctions of `time` comparisons no minute of the day satisfies.
/// Checked by brute force over all 1440 minutes.
pub fn unsatisfiable_time_windows(expr: &ConstraintExpr) -> Vec<String> {
    let mut found = Vec::new();
    walk(expr, &mut found);
    return found;

    fn walk(expr: &ConstraintExpr, found: &mut Vec<String>) {
        match expr {
            ConstraintExpr::And(children) => {
                let time_leaves: Vec<&ConstraintExpr> = children
                    .iter()
                    .filter(|c| is_time_compare(c))
                    .collect();
                check_group(&time_leaves, found);
                for child in children {
                    if !is_time_compare(child) {
                        walk(child, found);
                    }
                }
            }
            ConstraintExpr::Or(children) => {
                for child in children {
                    walk(child, found);
                }
            }
            compare if is_time_compare(compare) => check_group(&[compare], found),
            ConstraintExpr::Compare { .. } => {}
        }
    }

    fn is_time_compare(expr: &ConstraintExpr) -> bool {
        matches!(expr, ConstraintExpr::Compare { name, .. } if name == "time")
    }

    fn check_group(leaves: &[&ConstraintExpr], found: &mut Vec<String>) {
        if leaves.is_empty() {
            return;
        }
        let mut bounds = Vec::new();
        for leaf in leaves {
            let ConstraintExpr::Compare { op, value, .. } = leaf else { return };
            match parse_time_of_day(value) {
                Ok(minutes) => bounds.push((*op, minutes)),
                // A value that is not a time of day is outside this
                // check's model; stay silent rather than guess.
                Err(_) => return,
            }
        }
        let satisfiable = (0u32..1440).any(|minute| {
            bounds.iter().all(|(op, bound)| match op {
                CompareOp::Eq => minute == *bound,
                CompareOp::Lt => minute < *bound,
                CompareOp::Gt => minute > *bound,
            })
        });
        if !satisfiable {
            let rendered: Vec<String> = leaves.iter().map(|l| l.pretty()).collect();
            found.push(rendered.join(" && "));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::parse_constraint;

    #[test]
    fn flags_overnight_and_window() {
        let expr = parse_constraint("role=developer && (time>5pm) && (time<8am)").unwrap();
        let windows = unsatisfiable_time_windows(&expr);
        assert_eq!(windows.len(), 1);
        assert!(windows[0].contains("time > 5pm"));
    }

    #[test]
    fn accepts_rewritten_window() {
        let expr = parse_constraint("role=developer && (time>5pm || time<8am)").unwrap();
        assert!(unsatisfiable_time_windows(&expr).is_empty());
        let expr = parse_constraint("time>8am && time<5pm").unwrap();
        assert!(unsatisfiable_time_windows(&expr).is_empty());
    }

    #[test]
    fn flags_degenerate_single_bound() {
        let expr = parse_constraint("time>23:59").unwrap();
        assert_eq!(unsatisfiable_time_windows(&expr).len(), 1);
        let expr = parse_constraint("time<0:00").unwrap();
        assert_eq!(unsatisfiable_time_windows(&expr).len(), 1);
    }

    #[test]
    fn non_time_values_are_ignored() {
        let expr = parse_constraint("time>banana && time<8am").unwrap();
        assert!(unsatisfiable_time_windows(&expr).is_empty());
    }
}
