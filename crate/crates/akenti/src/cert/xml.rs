//! Certificate text format: XML with the element vocabulary of the
//! policy, use-condition, and attribute certificate examples, extended
//! with `CapabilityCert`, `IdentityCert`, and `RevocationList` bodies.
//!
//! Parsing is strict: unknown elements are rejected and missing required
//! fields are schema errors with element context.

use std::collections::BTreeSet;

use roxmltree::{Document, Node};
use thiserror::Error;

use crate::constraint::parse_constraint;
use crate::keys::{SignatureValue, VerifyingKey};
use crate::principal::{Dn, Principal};
use crate::resource::ResourcePath;
use crate::time::CompactTime;

use super::types::*;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum XmlError {
    #[error("parse error at {line}:{col}: {detail}")]
    Parse { line: u32, col: u32, detail: String },
    #[error("schema error in <{element}>: {detail}")]
    Schema { element: String, detail: String },
}

impl XmlError {
    fn schema(element: &str, detail: impl Into<String>) -> Self {
        XmlError::Schema {
            element: element.to_string(),
            detail: detail.into(),
        }
    }
}

/// Parses one certificate document.
pub fn parse_certificate(text: &str) -> Result<AkentiCertificate, XmlError> {
    let doc = Document::parse(text).map_err(|e| XmlError::Parse {
        line: e.pos().row,
        col: e.pos().col,
        detail: e.to_string(),
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "AkentiCertificate" {
        return Err(XmlError::schema(
            root.tag_name().name(),
            "expected root element AkentiCertificate",
        ));
    }
    let mut signable = None;
    let mut signature = None;
    for child in element_children(&root)? {
        match child.tag_name().name() {
            "SignablePart" => signable = Some(child),
            "Signature" => {
                let text = text_content(&child)?;
                if !text.is_empty() {
                    signature = Some(SignatureValue::from_base64(&text).map_err(|e| {
                        XmlError::schema("Signature", e.to_string())
                    })?);
                }
            }
            other => return Err(unknown_element(&child, other, "AkentiCertificate")),
        }
    }
    let signable =
        signable.ok_or_else(|| XmlError::schema("AkentiCertificate", "missing SignablePart"))?;

    let mut header = None;
    let mut body = None;
    for child in element_children(&signable)? {
        match child.tag_name().name() {
            "Header" => header = Some(parse_header(&child)?),
            name => {
                if body.is_some() {
                    return Err(XmlError::schema("SignablePart", "multiple body elements"));
                }
                body = Some(parse_body(&child, name)?);
            }
        }
    }
    let header = header.ok_or_else(|| XmlError::schema("SignablePart", "missing Header"))?;
    let body = body.ok_or_else(|| XmlError::schema("SignablePart", "missing certificate body"))?;
    validate(&header, &body)
        .map_err(|e| XmlError::schema(body_element_name(body.kind()), e.to_string()))?;
    Ok(AkentiCertificate {
        header,
        body,
        signature,
    })
}

fn parse_header(node: &Node) -> Result<CertHeader, XmlError> {
    let kind_name = require_attr(node, "Type")?;
    let kind = CertKind::from_name(&kind_name)
        .ok_or_else(|| XmlError::schema("Header", format!("unknown certificate type {kind_name:?}")))?;
    let signature_alg = require_attr(node, "SignatureDigestAlg")?;
    let canon_alg = require_attr(node, "CanonAlg")?;
    let version = require_attr(node, "Version")?;

    let mut uid = None;
    let mut issuer = None;
    let mut validity = None;
    for child in element_children(node)? {
        match child.tag_name().name() {
            "UID" => {
                let raw = text_content(&child)?;
                // Older certificates wrap the UID in literal quotes.
                let trimmed = raw.trim_matches('"').to_string();
                uid = Some(trimmed);
            }
            "Issuer" => issuer = Some(parse_principal(&child)?),
            "ValidityPeriod" => {
                let begin = require_attr(&child, "Begin")?;
                let end = require_attr(&child, "End")?;
                let begin = CompactTime::parse(&begin)
                    .map_err(|e| XmlError::schema("ValidityPeriod", e.to_string()))?;
                let end = CompactTime::parse(&end)
                    .map_err(|e| XmlError::schema("ValidityPeriod", e.to_string()))?;
                validity = Some((begin, end));
            }
            other => return Err(unknown_element(&child, other, "Header")),
        }
    }
    let uid = uid.ok_or_else(|| XmlError::schema("Header", "missing UID"))?;
    let issuer = issuer.ok_or_else(|| XmlError::schema("Header", "missing Issuer"))?;
    let (validity_begin, validity_end) =
        validity.ok_or_else(|| XmlError::schema("Header", "missing ValidityPeriod"))?;
    Ok(CertHeader {
        kind,
        signature_alg,
        canon_alg,
        version,
        uid,
        issuer,
        validity_begin,
        validity_end,
    })
}

fn parse_body(node: &Node, name: &str) -> Result<CertBody, XmlError> {
    match name {
        "PolicyCert" => parse_policy(node).map(CertBody::Policy),
        "UseConditionCert" => parse_use_condition(node).map(CertBody::UseCondition),
        "AttributeCert" => parse_attribute(node).map(CertBody::Attribute),
        "CapabilityCert" => parse_capability(node).map(CertBody::Capability),
        "IdentityCert" => parse_identity(node).map(CertBody::Identity),
        "RevocationList" => parse_revocation(node).map(CertBody::Revocation),
        other => Err(unknown_element(node, other, "SignablePart")),
    }
}

fn parse_policy(node: &Node) -> Result<PolicyCert, XmlError> {
    let mut resource_name = None;
    let mut ca_infos = Vec::new();
    let mut uc_issuers = Vec::new();
    let mut uc_dirs = Vec::new();
    let mut attr_dirs = Vec::new();
    let mut cache_time = None;
    for child in element_children(node)? {
        match child.tag_name().name() {
            "ResourceName" => resource_name = Some(parse_resource(&child)?),
            "CAInfo" => ca_infos.push(parse_ca_info(&child)?),
            "UseCondIssuerGroup" => {
                for member in element_children(&child)? {
                    match member.tag_name().name() {
                        "Principal" => uc_issuers.push(parse_principal(&member)?),
                        "URL" => uc_dirs.push(text_content(&member)?),
                        other => return Err(unknown_element(&member, other, "UseCondIssuerGroup")),
                    }
                }
            }
            "AttrDirs" => attr_dirs.extend(parse_url_list(&child)?),
            "CacheTime" => {
                let text = text_content(&child)?;
                cache_time = Some(text.parse::<u64>().map_err(|_| {
                    XmlError::schema("CacheTime", format!("not a nonnegative integer: {text:?}"))
                })?);
            }
            other => return Err(unknown_element(&child, other, "PolicyCert")),
        }
    }
    Ok(PolicyCert {
        resource_name: resource_name
            .ok_or_else(|| XmlError::schema("PolicyCert", "missing ResourceName"))?,
        ca_infos,
        uc_issuers,
        uc_dirs,
        attr_dirs,
        cache_time: cache_time.ok_or_else(|| XmlError::schema("PolicyCert", "missing CacheTime"))?,
    })
}

fn parse_ca_info(node: &Node) -> Result<CaInfo, XmlError> {
    let mut ca_dn = None;
    let mut key = None;
    let mut id_dirs = Vec::new();
    let mut crl_dirs = Vec::new();
    for child in element_children(node)? {
        match child.tag_name().name() {
            "CADN" => ca_dn = Some(parse_dn(&child)?),
            "X509Certificate" => {
                let text = text_content(&child)?;
                key = Some(VerifyingKey::from_base64(&text).map_err(|e| {
                    XmlError::schema("X509Certificate", e.to_string())
                })?);
            }
            "IdDirs" => id_dirs.extend(parse_url_list(&child)?),
            "CRLDirs" => crl_dirs.extend(parse_url_list(&child)?),
            other => return Err(unknown_element(&child, other, "CAInfo")),
        }
    }
    Ok(CaInfo {
        ca_dn: ca_dn.ok_or_else(|| XmlError::schema("CAInfo", "missing CADN"))?,
        ca_public_key: key.ok_or_else(|| XmlError::schema("CAInfo", "missing X509Certificate"))?,
        id_dirs,
        crl_dirs,
    })
}

fn parse_use_condition(node: &Node) -> Result<UseConditionCert, XmlError> {
    let critical = match require_attr(node, "critical")?.as_str() {
        "true" => true,
        "false" => false,
        other => {
            return Err(XmlError::schema(
                "UseConditionCert",
                format!("critical must be true or false, got {other:?}"),
            ))
        }
    };
    let scope_name = require_attr(node, "scope")?;
    let scope = Scope::from_name(&scope_name).ok_or_else(|| {
        XmlError::schema("UseConditionCert", format!("unknown scope {scope_name:?}"))
    })?;
    let mut resource_name = None;
    let mut constraint_text = None;
    let mut attribute_infos = Vec::new();
    let mut attr_dirs = Vec::new();
    let mut rights = None;
    for child in element_children(node)? {
        match child.tag_name().name() {
            "ResourceName" => resource_name = Some(parse_resource(&child)?),
            "Condition" => {
                for part in element_children(&child)? {
                    match part.tag_name().name() {
                        "Constraint" => constraint_text = Some(text_content(&part)?),
                        "AttributeInfo" => attribute_infos.push(parse_attribute_info(&part)?),
                        other => return Err(unknown_element(&part, other, "Condition")),
                    }
                }
            }
            "AttrDirs" => attr_dirs.extend(parse_url_list(&child)?),
            "Rights" => {
                let text = text_content(&child)?;
                let set: BTreeSet<String> =
                    text.split_whitespace().map(|s| s.to_string()).collect();
                rights = Some(set);
            }
            other => return Err(unknown_element(&child, other, "UseConditionCert")),
        }
    }
    let constraint_text =
        constraint_text.ok_or_else(|| XmlError::schema("UseConditionCert", "missing Constraint"))?;
    let constraint = parse_constraint(&constraint_text)
        .map_err(|e| XmlError::schema("Constraint", e.to_string()))?;
    Ok(UseConditionCert {
        critical,
        scope,
        resource_name: resource_name
            .ok_or_else(|| XmlError::schema("UseConditionCert", "missing ResourceName"))?,
        constraint_text,
        constraint,
        attribute_infos,
        attr_dirs,
        rights: rights.ok_or_else(|| XmlError::schema("UseConditionCert", "missing Rights"))?,
    })
}

fn parse_attribute_info(node: &Node) -> Result<AttributeInfo, XmlError> {
    let type_name = require_attr(node, "type")?;
    let attr_type = AttrType::from_name(&type_name).ok_or_else(|| {
        XmlError::schema("AttributeInfo", format!("unknown attribute type {type_name:?}"))
    })?;
    let mut attr_name = None;
    let mut attr_value = None;
    let mut authorities = Vec::new();
    for child in element_children(node)? {
        match child.tag_name().name() {
            "AttrName" => attr_name = Some(text_content(&child)?),
            "AttrValue" => attr_value = Some(text_content(&child)?),
            "Principal" => authorities.push(parse_principal(&child)?),
            other => return Err(unknown_element(&child, other, "AttributeInfo")),
        }
    }
    Ok(AttributeInfo {
        attr_type,
        attr_name: attr_name.ok_or_else(|| XmlError::schema("AttributeInfo", "missing AttrName"))?,
        attr_value: attr_value
            .ok_or_else(|| XmlError::schema("AttributeInfo", "missing AttrValue"))?,
        authorities,
    })
}

fn parse_attribute(node: &Node) -> Result<AttributeCert, XmlError> {
    let mut subject = None;
    let mut attr_name = None;
    let mut attr_value = None;
    for child in element_children(node)? {
        match child.tag_name().name() {
            "SubjectAndCA" => subject = Some(parse_principal(&child)?),
            "AttrName" => attr_name = Some(text_content(&child)?),
            "AttrValue" => attr_value = Some(text_content(&child)?),
            other => return Err(unknown_element(&child, other, "AttributeCert")),
        }
    }
    Ok(AttributeCert {
        subject: subject.ok_or_else(|| XmlError::schema("AttributeCert", "missing SubjectAndCA"))?,
        attr_name: attr_name.ok_or_else(|| XmlError::schema("AttributeCert", "missing AttrName"))?,
        attr_value: attr_value
            .ok_or_else(|| XmlError::schema("AttributeCert", "missing AttrValue"))?,
    })
}

fn parse_capability(node: &Node) -> Result<CapabilityCert, XmlError> {
    let mut subject = None;
    let mut key = None;
    let mut resource_name = None;
    let mut granted = BTreeSet::new();
    let mut conditional = Vec::new();
    for child in element_children(node)? {
        match child.tag_name().name() {
            "SubjectAndCA" => subject = Some(parse_principal(&child)?),
            "SubjectPublicKey" => {
                let text = text_content(&child)?;
                key = Some(VerifyingKey::from_base64(&text).map_err(|e| {
                    XmlError::schema("SubjectPublicKey", e.to_string())
                })?);
            }
            "ResourceName" => resource_name = Some(parse_resource(&child)?),
            "GrantedActions" => {
                granted.extend(text_content(&child)?.split_whitespace().map(String::from));
            }
            "ConditionalAction" => {
                let action = require_attr(&child, "action")?;
                let mut residual = None;
                for part in element_children(&child)? {
                    match part.tag_name().name() {
                        "Constraint" => residual = Some(text_content(&part)?),
                        other => return Err(unknown_element(&part, other, "ConditionalAction")),
                    }
                }
                let residual = residual
                    .ok_or_else(|| XmlError::schema("ConditionalAction", "missing Constraint"))?;
                conditional.push((action, residual));
            }
            other => return Err(unknown_element(&child, other, "CapabilityCert")),
        }
    }
    Ok(CapabilityCert {
        subject: subject
            .ok_or_else(|| XmlError::schema("CapabilityCert", "missing SubjectAndCA"))?,
        subject_public_key: key
            .ok_or_else(|| XmlError::schema("CapabilityCert", "missing SubjectPublicKey"))?,
        resource_name: resource_name
            .ok_or_else(|| XmlError::schema("CapabilityCert", "missing ResourceName"))?,
        granted_actions: granted,
        conditional_actions: conditional,
    })
}

fn parse_identity(node: &Node) -> Result<IdentityCert, XmlError> {
    let mut subject = None;
    let mut key = None;
    for child in element_children(node)? {
        match child.tag_name().name() {
            "SubjectAndCA" => subject = Some(parse_principal(&child)?),
            "PublicKey" => {
                let text = text_content(&child)?;
                key = Some(
                    VerifyingKey::from_base64(&text)
                        .map_err(|e| XmlError::schema("PublicKey", e.to_string()))?,
                );
            }
            other => return Err(unknown_element(&child, other, "IdentityCert")),
        }
    }
    Ok(IdentityCert {
        subject: subject.ok_or_else(|| XmlError::schema("IdentityCert", "missing SubjectAndCA"))?,
        public_key: key.ok_or_else(|| XmlError::schema("IdentityCert", "missing PublicKey"))?,
    })
}

fn parse_revocation(node: &Node) -> Result<RevocationList, XmlError> {
    let mut list = RevocationList::default();
    for child in element_children(node)? {
        match child.tag_name().name() {
            "RevokedUID" => list.revoked_uids.push(text_content(&child)?),
            "RevokedDN" => list.revoked_dns.push(text_content(&child)?),
            other => return Err(unknown_element(&child, other, "RevocationList")),
        }
    }
    Ok(list)
}

fn parse_principal(node: &Node) -> Result<Principal, XmlError> {
    let context = node.tag_name().name().to_string();
    let mut user_dn = None;
    let mut ca_dn = None;
    for child in element_children(node)? {
        match child.tag_name().name() {
            "UserDN" => user_dn = Some(parse_dn(&child)?),
            "CADN" => ca_dn = Some(parse_dn(&child)?),
            other => return Err(unknown_element(&child, other, &context)),
        }
    }
    Ok(Principal {
        user_dn: user_dn.ok_or_else(|| XmlError::schema(&context, "missing UserDN"))?,
        ca_dn: ca_dn.ok_or_else(|| XmlError::schema(&context, "missing CADN"))?,
    })
}

fn parse_dn(node: &Node) -> Result<Dn, XmlError> {
    let text = text_content(node)?;
    Dn::parse(&text).map_err(|e| XmlError::schema(node.tag_name().name(), e.to_string()))
}

fn parse_resource(node: &Node) -> Result<ResourcePath, XmlError> {
    let text = text_content(node)?;
    ResourcePath::parse(&text).map_err(|e| XmlError::schema("ResourceName", e.to_string()))
}

fn parse_url_list(node: &Node) -> Result<Vec<String>, XmlError> {
    let mut urls = Vec::new();
    for child in element_children(node)? {
        match child.tag_name().name() {
            "URL" => urls.push(text_content(&child)?),
            other => return Err(unknown_element(&child, other, node.tag_name().name())),
        }
    }
    Ok(urls)
}

fn element_children<'a, 'input>(
    node: &Node<'a, 'input>,
) -> Result<Vec<Node<'a, 'input>>, XmlError> {
    let mut out = Vec::new();
    for child in node.children() {
        if child.is_element() {
            out.push(child);
        } else if child.is_text() {
            let text = child.text().unwrap_or_default();
            if !text.trim().is_empty() && node.children().any(|c| c.is_element()) {
                return Err(XmlError::schema(
                    node.tag_name().name(),
                    "unexpected text content between elements",
                ));
            }
        }
    }
    Ok(out)
}

fn text_content(node: &Node) -> Result<String, XmlError> {
    if node.children().any(|c| c.is_element()) {
        return Err(XmlError::schema(
            node.tag_name().name(),
            "expected text content, found child elements",
        ));
    }
    Ok(node.text().unwrap_or_default().trim().to_string())
}

fn require_attr(node: &Node, name: &str) -> Result<String, XmlError> {
    node.attribute(name)
        .map(|v| v.to_string())
        .ok_or_else(|| {
            XmlError::schema(
                node.tag_name().name(),
                format!("missing attribute {name:?}"),
            )
        })
}

fn unknown_element(node: &Node, name: &str, parent: &str) -> XmlError {
    let pos = node.document().text_pos_at(node.range().start);
    XmlError::Parse {
        line: pos.row,
        col: pos.col,
        detail: format!("unknown element <{name}> in <{parent}>"),
    }
}

fn body_element_name(kind: CertKind) -> &'static str {
    match kind {
        CertKind::Policy => "PolicyCert",
        CertKind::UseCondition => "UseConditionCert",
        CertKind::Attribute => "AttributeCert",
        CertKind::Capability => "CapabilityCert",
        CertKind::Identity => "IdentityCert",
        CertKind::Crl => "RevocationList",
    }
}

/// Renders a certificate to its XML text form.
pub fn serialize_certificate(cert: &AkentiCertificate) -> String {
    let mut w = XmlWriter::default();
    w.open_line("<AkentiCertificate>");
    w.open_line("<SignablePart>");
    w.line(&format!(
        "<Header Type=\"{}\" SignatureDigestAlg=\"{}\" CanonAlg=\"{}\" Version=\"{}\">",
        esc_attr(cert.header.kind.name()),
        esc_attr(&cert.header.signature_alg),
        esc_attr(&cert.header.canon_alg),
        esc_attr(&cert.header.version),
    ));
    w.indent += 1;
    w.leaf("UID", &cert.header.uid);
    w.principal("Issuer", &cert.header.issuer);
    w.line(&format!(
        "<ValidityPeriod Begin=\"{}\" End=\"{}\"/>",
        cert.header.validity_begin.format(),
        cert.header.validity_end.format()
    ));
    w.indent -= 1;
    w.line("</Header>");
    match &cert.body {
        CertBody::Policy(p) => {
            w.open_line("<PolicyCert>");
            w.leaf("ResourceName", p.resource_name.as_str());
            for ca in &p.ca_infos {
                w.open_line("<CAInfo>");
                w.leaf("CADN", ca.ca_dn.as_str());
                w.leaf("X509Certificate", &ca.ca_public_key.to_base64());
                w.url_list("IdDirs", &ca.id_dirs);
                w.url_list("CRLDirs", &ca.crl_dirs);
                w.close_line("</CAInfo>");
            }
            w.open_line("<UseCondIssuerGroup>");
            for principal in &p.uc_issuers {
                w.principal("Principal", principal);
            }
            for url in &p.uc_dirs {
                w.leaf("URL", url);
            }
            w.close_line("</UseCondIssuerGroup>");
            w.url_list("AttrDirs", &p.attr_dirs);
            w.leaf("CacheTime", &p.cache_time.to_string());
            w.close_line("</PolicyCert>");
        }
        CertBody::UseCondition(u) => {
            w.line(&format!(
                "<UseConditionCert critical=\"{}\" scope=\"{}\">",
                u.critical,
                u.scope.name()
            ));
            w.indent += 1;
            w.leaf("ResourceName", u.resource_name.as_str());
            w.open_line("<Condition>");
            w.leaf("Constraint", &u.constraint_text);
            for info in &u.attribute_infos {
                w.line(&format!("<AttributeInfo type=\"{}\">", info.attr_type.name()));
                w.indent += 1;
                w.leaf("AttrName", &info.attr_name);
                w.leaf("AttrValue", &info.attr_value);
                for authority in &info.authorities {
                    w.principal("Principal", authority);
                }
                w.indent -= 1;
                w.line("</AttributeInfo>");
            }
            w.close_line("</Condition>");
            w.url_list("AttrDirs", &u.attr_dirs);
            let rights: Vec<&str> = u.rights.iter().map(String::as_str).collect();
            w.leaf("Rights", &rights.join(" "));
            w.indent -= 1;
            w.line("</UseConditionCert>");
        }
        CertBody::Attribute(a) => {
            w.open_line("<AttributeCert>");
            w.principal("SubjectAndCA", &a.subject);
            w.leaf("AttrName", &a.attr_name);
            w.leaf("AttrValue", &a.attr_value);
            w.close_line("</AttributeCert>");
        }
        CertBody::Capability(c) => {
            w.open_line("<CapabilityCert>");
            w.principal("SubjectAndCA", &c.subject);
            w.leaf("SubjectPublicKey", &c.subject_public_key.to_base64());
            w.leaf("ResourceName", c.resource_name.as_str());
            if !c.granted_actions.is_empty() {
                let actions: Vec<&str> = c.granted_actions.iter().map(String::as_str).collect();
                w.leaf("GrantedActions", &actions.join(" "));
            }
            for (action, residual) in &c.conditional_actions {
                w.line(&format!("<ConditionalAction action=\"{}\">", esc_attr(action)));
                w.indent += 1;
                w.leaf("Constraint", residual);
                w.indent -= 1;
                w.line("</ConditionalAction>");
            }
            w.close_line("</CapabilityCert>");
        }
        CertBody::Identity(id) => {
            w.open_line("<IdentityCert>");
            w.principal("SubjectAndCA", &id.subject);
            w.leaf("PublicKey", &id.public_key.to_base64());
            w.close_line("</IdentityCert>");
        }
        CertBody::Revocation(r) => {
            w.open_line("<RevocationList>");
            for uid in &r.revoked_uids {
                w.leaf("RevokedUID", uid);
            }
            for dn in &r.revoked_dns {
                w.leaf("RevokedDN", dn);
            }
            w.close_line("</RevocationList>");
        }
    }
    w.close_line("</SignablePart>");
    if let Some(sig) = &cert.signature {
        w.leaf("Signature", &sig.to_base64());
    }
    w.close_line("</AkentiCertificate>");
    w.out
}

#[derive(Default)]
struct XmlWriter {
    out: String,
    indent: usize,
}

impl XmlWriter {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn open_line(&mut self, text: &str) {
        self.line(text);
        self.indent += 1;
    }

    fn close_line(&mut self, text: &str) {
        self.indent -= 1;
        self.line(text);
    }

    fn leaf(&mut self, name: &str, value: &str) {
        self.line(&format!("<{name}>{}</{name}>", esc_text(value)));
    }

    fn principal(&mut self, element: &str, principal: &Principal) {
        self.open_line(&format!("<{element}>"));
        self.leaf("UserDN", principal.user_dn.as_str());
        self.leaf("CADN", principal.ca_dn.as_str());
        self.close_line(&format!("</{element}>"));
    }

    fn url_list(&mut self, element: &str, urls: &[String]) {
        if urls.is_empty() {
            return;
        }
        self.open_line(&format!("<{element}>"));
        for url in urls {
            self.leaf("URL", url);
        }
        self.close_line(&format!("</{element}>"));
    }
}

fn esc_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
    out
}

fn esc_attr(text: &str) -> String {
    esc_text(text).replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::super::tests::{mary, sample_attr_body, sample_header};
    use super::*;
    use crate::keys::Credential;

    #[test]
    fn round_trip_attribute_cert() {
        let cred = Credential::generate(mary());
        let cert = super::super::sign_certificate(
            sample_header(CertKind::Attribute, mary()),
            sample_attr_body(),
            &cred,
        )
        .unwrap();
        let text = serialize_certificate(&cert);
        let parsed = parse_certificate(&text).unwrap();
        assert_eq!(parsed, cert);
    }

    #[test]
    fn unsigned_cert_round_trips() {
        let cert = AkentiCertificate {
            header: sample_header(CertKind::Attribute, mary()),
            body: sample_attr_body(),
            signature: None,
        };
        let text = serialize_certificate(&cert);
        let parsed = parse_certificate(&text).unwrap();
        assert_eq!(parsed, cert);
    }

    #[test]
    fn missing_rights_is_schema_error() {
        let text = r#"<AkentiCertificate>
  <SignablePart>
    <Header Type="UseCondition" SignatureDigestAlg="ed25519" CanonAlg="Ak1CanAlg" Version="2">
      <UID>h#a1#010101000000Z</UID>
      <Issuer>
        <UserDN>/O=x.org/CN=Someone</UserDN>
        <CADN>/O=x.org/CN=ca</CADN>
      </Issuer>
      <ValidityPeriod Begin="010504001529Z" End="050504001529Z"/>
    </Header>
    <UseConditionCert critical="false" scope="sub-tree">
      <ResourceName>TRANSP/production</ResourceName>
      <Condition>
        <Constraint>group = clients</Constraint>
      </Condition>
    </UseConditionCert>
  </SignablePart>
</AkentiCertificate>"#;
        let err = parse_certificate(text).unwrap_err();
        assert!(matches!(err, XmlError::Schema { .. }), "{err}");
        assert!(err.to_string().contains("Rights"), "{err}");
    }

    #[test]
    fn unknown_element_rejected() {
        let text = r#"<AkentiCertificate>
  <SignablePart>
    <Header Type="Attribute" SignatureDigestAlg="ed25519" CanonAlg="Ak1CanAlg" Version="2">
      <UID>h#a1#010101000000Z</UID>
      <Issuer>
        <UserDN>/O=x.org/CN=Someone</UserDN>
        <CADN>/O=x.org/CN=ca</CADN>
      </Issuer>
      <ValidityPeriod Begin="010504001529Z" End="050504001529Z"/>
      <Surprise>boo</Surprise>
    </Header>
    <AttributeCert>
      <SubjectAndCA>
        <UserDN>/O=x.org/CN=Someone</UserDN>
        <CADN>/O=x.org/CN=ca</CADN>
      </SubjectAndCA>
      <AttrName>group</AttrName>
      <AttrValue>clients</AttrValue>
    </AttributeCert>
  </SignablePart>
</AkentiCertificate>"#;
        let err = parse_certificate(text).unwrap_err();
        assert!(err.to_string().contains("Surprise"), "{err}");
    }

    #[test]
    fn not_xml_is_parse_error() {
        assert!(matches!(
            parse_certificate("not xml at all").unwrap_err(),
            XmlError::Parse { .. }
        ));
        assert!(parse_certificate("<AkentiCertificate>").is_err());
    }
}
