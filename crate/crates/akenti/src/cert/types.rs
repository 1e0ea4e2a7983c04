//! Certificate data types.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::constraint::ConstraintExpr;
use crate::keys::{SignatureValue, VerifyingKey};
use crate::principal::Principal;
use crate::resource::ResourcePath;
use crate::time::CompactTime;

/// The canonicalization algorithm identifier written into every header.
pub const CANON_ALG: &str = "Ak1CanAlg";

/// Actions named throughout the job-management policy examples. Rights
/// sets may also carry custom action names.
pub const STANDARD_ACTIONS: [&str; 6] = ["start", "cancel", "query", "signal", "suspend", "resume"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CertKind {
    Policy,
    UseCondition,
    Attribute,
    Capability,
    Identity,
    /// Revocation lists travel in the same signed envelope.
    Crl,
}

impl CertKind {
    pub fn name(&self) -> &'static str {
        match self {
            CertKind::Policy => "Policy",
            CertKind::UseCondition => "UseCondition",
            CertKind::Attribute => "Attribute",
            CertKind::Capability => "Capability",
            CertKind::Identity => "Identity",
            CertKind::Crl => "CRL",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "Policy" => CertKind::Policy,
            "UseCondition" => CertKind::UseCondition,
            "Attribute" => CertKind::Attribute,
            "Capability" => CertKind::Capability,
            "Identity" => CertKind::Identity,
            "CRL" => CertKind::Crl,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertHeader {
    pub kind: CertKind,
    pub signature_alg: String,
    pub canon_alg: String,
    pub version: String,
    /// `<host>#<hex>#<timestamp>`, unique per issued certificate.
    pub uid: String,
    pub issuer: Principal,
    pub validity_begin: CompactTime,
    pub validity_end: CompactTime,
}

/// Trusted certification authority named by a policy certificate: its DN,
/// verification key, and where it publishes identities and revocations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaInfo {
    pub ca_dn: crate::principal::Dn,
    pub ca_public_key: VerifyingKey,
    pub id_dirs: Vec<String>,
    pub crl_dirs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyCert {
    pub resource_name: ResourcePath,
    pub ca_infos: Vec<CaInfo>,
    /// Stakeholders trusted to issue use-conditions for this subtree.
    pub uc_issuers: Vec<Principal>,
    /// Where those stakeholders publish their use-conditions.
    pub uc_dirs: Vec<String>,
    pub attr_dirs: Vec<String>,
    pub cache_time: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Local,
    SubTree,
}

impl Scope {
    pub fn name(&self) -> &'static str {
        match self {
            Scope::Local => "local",
            Scope::SubTree => "sub-tree",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "local" => Some(Scope::Local),
            "sub-tree" => Some(Scope::SubTree),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrType {
    Akenti,
    System,
    X509,
}

impl AttrType {
    pub fn name(&self) -> &'static str {
        match self {
            AttrType::Akenti => "AKENTI",
            AttrType::System => "SYSTEM",
            AttrType::X509 => "X509",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "AKENTI" => Some(AttrType::Akenti),
            "SYSTEM" => Some(AttrType::System),
            "X509" => Some(AttrType::X509),
            _ => None,
        }
    }
}

/// Declares an attribute used by a use-condition constraint and, for
/// AKENTI attributes, the authorities allowed to assert it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeInfo {
    pub attr_type: AttrType,
    pub attr_name: String,
    pub attr_value: String,
    pub authorities: Vec<Principal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UseConditionCert {
    pub critical: bool,
    pub scope: Scope,
    pub resource_name: ResourcePath,
    /// Constraint source exactly as written by the stakeholder; the
    /// canonical bytes cover this text, not the parsed form.
    pub constraint_text: String,
    pub constraint: ConstraintExpr,
    pub attribute_infos: Vec<AttributeInfo>,
    /// Additional attribute-certificate directories, searched together
    /// with the policy-level ones.
    pub attr_dirs: Vec<String>,
    pub rights: BTreeSet<String>,
}

impl UseConditionCert {
    /// Names the constraint resolves in the AKENTI namespace.
    pub fn declared_akenti(&self) -> BTreeSet<String> {
        self.attribute_infos
            .iter()
            .filter(|i| i.attr_type == AttrType::Akenti)
            .map(|i| i.attr_name.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeCert {
    pub subject: Principal,
    pub attr_name: String,
    pub attr_value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapabilityCert {
    pub subject: Principal,
    pub subject_public_key: VerifyingKey,
    pub resource_name: ResourcePath,
    pub granted_actions: BTreeSet<String>,
    /// Actions usable only if the paired residual constraint holds when
    /// the enforcement point evaluates it.
    pub conditional_actions: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityCert {
    pub subject: Principal,
    pub public_key: VerifyingKey,
}

/// Signed list of revoked certificate UIDs and subject DNs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RevocationList {
    pub revoked_uids: Vec<String>,
    pub revoked_dns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CertBody {
    Policy(PolicyCert),
    UseCondition(UseConditionCert),
    Attribute(AttributeCert),
    Capability(CapabilityCert),
    Identity(IdentityCert),
    Revocation(RevocationList),
}

impl CertBody {
    pub fn kind(&self) -> CertKind {
        match self {
            CertBody::Policy(_) => CertKind::Policy,
            CertBody::UseCondition(_) => CertKind::UseCondition,
            CertBody::Attribute(_) => CertKind::Attribute,
            CertBody::Capability(_) => CertKind::Capability,
            CertBody::Identity(_) => CertKind::Identity,
            CertBody::Revocation(_) => CertKind::Crl,
        }
    }
}

/// A complete certificate: header, body, and (once signed) the signature
/// over their canonical bytes. The signature is absent only on authoring
/// intermediates that have not been through `sign_certificate` yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AkentiCertificate {
    pub header: CertHeader,
    pub body: CertBody,
    pub signature: Option<SignatureValue>,
}

impl AkentiCertificate {
    pub fn uid(&self) -> &str {
        &self.header.uid
    }

    pub fn as_policy(&self) -> Option<&PolicyCert> {
        match &self.body {
            CertBody::Policy(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_use_condition(&self) -> Option<&UseConditionCert> {
        match &self.body {
            CertBody::UseCondition(u) => Some(u),
            _ => None,
        }
    }

    pub fn as_attribute(&self) -> Option<&AttributeCert> {
        match &self.body {
            CertBody::Attribute(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_capability(&self) -> Option<&CapabilityCert> {
        match &self.body {
            CertBody::Capability(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_identity(&self) -> Option<&IdentityCert> {
        match &self.body {
            CertBody::Identity(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_revocation(&self) -> Option<&RevocationList> {
        match &self.body {
            CertBody::Revocation(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvalidBody {
    #[error("header kind {header:?} does not match body kind {body:?}")]
    KindMismatch { header: String, body: String },
    #[error("validity_begin must precede validity_end")]
    EmptyValidity,
    #[error("uid {0:?} is not of the form host#hex#timestamp")]
    BadUid(String),
    #[error("policy certificate needs at least one CA and one stakeholder")]
    PolicyMissingAuthority,
    #[error("stakeholder {0} is certified by a CA not listed in the policy")]
    StakeholderCaUnlisted(String),
    #[error("use-condition rights set is empty")]
    EmptyRights,
    #[error("bad action name {0:?}")]
    BadActionName(String),
    #[error("duplicate AttributeInfo entry for {0:?} = {1:?}")]
    DuplicateAttributeInfo(String, String),
    #[error("AKENTI attribute {0:?} declares no authorities")]
    NoAuthorities(String),
}

/// Structural invariants checked before canonicalization and after parse.
pub fn validate(header: &CertHeader, body: &CertBody) -> Result<(), InvalidBody> {
    if header.kind != body.kind() {
        return Err(InvalidBody::KindMismatch {
            header: header.kind.name().to_string(),
            body: body.kind().name().to_string(),
        });
    }
    if header.validity_begin >= header.validity_end {
        return Err(InvalidBody::EmptyValidity);
    }
    let uid_parts: Vec<&str> = header.uid.splitn(3, '#').collect();
    if uid_parts.len() != 3 || uid_parts.iter().any(|p| p.is_empty()) || header.uid.contains('\n') {
        return Err(InvalidBody::BadUid(header.uid.clone()));
    }
    match body {
        CertBody::Policy(p) => {
            if p.ca_infos.is_empty() || p.uc_issuers.is_empty() {
                return Err(InvalidBody::PolicyMissingAuthority);
            }
            for issuer in &p.uc_issuers {
                if !p.ca_infos.iter().any(|ca| ca.ca_dn == issuer.ca_dn) {
                    return Err(InvalidBody::StakeholderCaUnlisted(issuer.to_string()));
                }
            }
        }
        CertBody::UseCondition(u) => {
            if u.rights.is_empty() {
                return Err(InvalidBody::EmptyRights);
            }
            for right in &u.rights {
                validate_action_name(right)?;
            }
            let mut seen_pairs = Vec::new();
            for info in &u.attribute_infos {
                if info.attr_type != AttrType::Akenti {
                    continue;
                }
                if info.authorities.is_empty() {
                    return Err(InvalidBody::NoAuthorities(info.attr_name.clone()));
                }
                let pair = (info.attr_name.clone(), info.attr_value.to_ascii_lowercase());
                if seen_pairs.contains(&pair) {
                    return Err(InvalidBody::DuplicateAttributeInfo(
                        info.attr_name.clone(),
                        info.attr_value.clone(),
                    ));
                }
                seen_pairs.push(pair);
            }
        }
        CertBody::Capability(c) => {
            for (action, _) in &c.conditional_actions {
                validate_action_name(action)?;
            }
            for action in &c.granted_actions {
                validate_action_name(action)?;
            }
        }
        CertBody::Attribute(_) | CertBody::Identity(_) | CertBody::Revocation(_) => {}
    }
    Ok(())
}

fn validate_action_name(name: &str) -> Result<(), InvalidBody> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == '\n') {
        return Err(InvalidBody::BadActionName(name.to_string()));
    }
    Ok(())
}
