//! Deterministic byte serialization signed by every certificate.
//!
//! One `name=value` line per field, fields in declaration order, list
//! elements indexed in stored order, UTF-8. Backslashes, newlines, and
//! carriage returns inside values are escaped so distinct structured
//! values always yield distinct byte sequences.

use super::types::*;

/// Serializes header and body to the canonical byte sequence. Fails if a
/// structural invariant of the body does not hold.
pub fn canonicalize(header: &CertHeader, body: &CertBody) -> Result<Vec<u8>, InvalidBody> {
    validate(header, body)?;
    let mut w = Writer::default();
    w.field("type", header.kind.name());
    w.field("signature_alg", &header.signature_alg);
    w.field("canon_alg", &header.canon_alg);
    w.field("version", &header.version);
    w.field("uid", &header.uid);
    w.field("issuer.user_dn", header.issuer.user_dn.as_str());
    w.field("issuer.ca_dn", header.issuer.ca_dn.as_str());
    w.field("validity_begin", &header.validity_begin.format());
    w.field("validity_end", &header.validity_end.format());
    match body {
        CertBody::Policy(p) => {
            w.field("resource_name", p.resource_name.as_str());
            for (i, ca) in p.ca_infos.iter().enumerate() {
                w.field(&format!("ca_info.{i}.ca_dn"), ca.ca_dn.as_str());
                w.field(&format!("ca_info.{i}.public_key"), &ca.ca_public_key.to_base64());
                for (j, url) in ca.id_dirs.iter().enumerate() {
                    w.field(&format!("ca_info.{i}.id_dir.{j}"), url);
                }
                for (j, url) in ca.crl_dirs.iter().enumerate() {
                    w.field(&format!("ca_info.{i}.crl_dir.{j}"), url);
                }
            }
            for (i, p) in p.uc_issuers.iter().enumerate() {
                w.field(&format!("uc_issuer.{i}.user_dn"), p.user_dn.as_str());
                w.field(&format!("uc_issuer.{i}.ca_dn"), p.ca_dn.as_str());
            }
            for (i, url) in p.uc_dirs.iter().enumerate() {
                w.field(&format!("uc_dir.{i}"), url);
            }
            for (i, url) in p.attr_dirs.iter().enumerate() {
                w.field(&format!("attr_dir.{i}"), url);
            }
            w.field("cache_time", &p.cache_time.to_string());
        }
        CertBody::UseCondition(u) => {
            w.field("critical", if u.critical { "true" } else { "false" });
            w.field("scope", u.scope.name());
            w.field("resource_name", u.resource_name.as_str());
            w.field("constraint", &u.constraint_text);
            for (i, info) in u.attribute_infos.iter().enumerate() {
                w.field(&format!("attribute_info.{i}.type"), info.attr_type.name());
                w.field(&format!("attribute_info.{i}.name"), &info.attr_name);
                w.field(&format!("attribute_info.{i}.value"), &info.attr_value);
                for (j, a) in info.authorities.iter().enumerate() {
                    w.field(&format!("attribute_info.{i}.authority.{j}.user_dn"), a.user_dn.as_str());
                    w.field(&format!("attribute_info.{i}.authority.{j}.ca_dn"), a.ca_dn.as_str());
                }
            }
            for (i, url) in u.attr_dirs.iter().enumerate() {
                w.field(&format!("attr_dir.{i}"), url);
            }
            for (i, right) in u.rights.iter().enumerate() {
                w.field(&format!("right.{i}"), right);
            }
        }
        CertBody::Attribute(a) => {
            w.field("subject.user_dn", a.subject.user_dn.as_str());
            w.field("subject.ca_dn", a.subject.ca_dn.as_str());
            w.field("attr_name", &a.attr_name);
            w.field("attr_value", &a.attr_value);
        }
        CertBody::Capability(c) => {
            w.field("subject.user_dn", c.subject.user_dn.as_str());
            w.field("subject.ca_dn", c.subject.ca_dn.as_str());
            w.field("subject_public_key", &c.subject_public_key.to_base64());
            w.field("resource_name", c.resource_name.as_str());
            for (i, action) in c.granted_actions.iter().enumerate() {
                w.field(&format!("granted.{i}"), action);
            }
            for (i, (action, residual)) in c.conditional_actions.iter().enumerate() {
                w.field(&format!("conditional.{i}.action"), action);
                w.field(&format!("conditional.{i}.constraint"), residual);
            }
        }
        CertBody::Identity(id) => {
            w.field("subject.user_dn", id.subject.user_dn.as_str());
            w.field("subject.ca_dn", id.subject.ca_dn.as_str());
            w.field("public_key", &id.public_key.to_base64());
        }
        CertBody::Revocation(r) => {
            for (i, uid) in r.revoked_uids.iter().enumerate() {
                w.field(&format!("revoked_uid.{i}"), uid);
            }
            for (i, dn) in r.revoked_dns.iter().enumerate() {
                w.field(&format!("revoked_dn.{i}"), dn);
            }
        }
    }
    Ok(w.out.into_bytes())
}

#[derive(Default)]
struct Writer {
    out: String,
}

impl Writer {
    fn field(&mut self, name: &str, value: &str) {
        self.out.push_str(name);
        self.out.push('=');
        for c in value.chars() {
            match c {
                '\\' => self.out.push_str("\\\\"),
                '\n' => self.out.push_str("\\n"),
                '\r' => self.out.push_str("\\r"),
                c => self.out.push(c),
            }
        }
        self.out.push('\n');
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{mary, sample_attr_body, sample_header};
    use super::*;
    use crate::keys::VerifyingKey;
    use crate::principal::Dn;
    use crate::resource::ResourcePath;

    fn sample_policy_body(cache_time: u64) -> CertBody {
        let ca_dn =
            Dn::parse("/DC=net/DC=es/OU=Certificate Authorities/OU=DOE Science Grid/CN=pk1")
                .unwrap();
        let key = crate::keys::Credential::generate(mary()).verifying_key();
        CertBody::Policy(PolicyCert {
            resource_name: ResourcePath::parse("TRANSP").unwrap(),
            ca_infos: vec![CaInfo {
                ca_dn,
                ca_public_key: VerifyingKey::from_base64(&key.to_base64()).unwrap(),
                id_dirs: vec!["file:/p/fusiongrid/idCerts".to_string()],
                crl_dirs: vec!["file:/p/fusiongrid/crl".to_string()],
            }],
            uc_issuers: vec![mary()],
            uc_dirs: vec!["file:/p/fusiongrid/certs".to_string()],
            attr_dirs: vec!["file:/p/fusiongrid/certs".to_string()],
            cache_time,
        })
    }

    #[test]
    fn identical_inputs_identical_bytes() {
        let header = sample_header(CertKind::Policy, mary());
        let body = sample_policy_body(3600);
        let a = canonicalize(&header, &body).unwrap();
        let b = canonicalize(&header, &body.clone()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cache_time_difference_changes_bytes() {
        let header = sample_header(CertKind::Policy, mary());
        let a = canonicalize(&header, &sample_policy_body(3600)).unwrap();
        let b = canonicalize(&header, &sample_policy_body(3601)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn newlines_in_values_escape() {
        let mut body = sample_attr_body();
        if let CertBody::Attribute(a) = &mut body {
            a.attr_value = "line1\nline2=x".to_string();
        }
        let header = sample_header(CertKind::Attribute, mary());
        let bytes = canonicalize(&header, &body).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("attr_value=line1\\nline2=x\n"));
    }

    #[test]
    fn invalid_body_refused() {
        let header = sample_header(CertKind::Policy, mary());
        let body = CertBody::Policy(PolicyCert {
            resource_name: ResourcePath::parse("TRANSP").unwrap(),
            ca_infos: vec![],
            uc_issuers: vec![],
            uc_dirs: vec![],
            attr_dirs: vec![],
            cache_time: 0,
        });
        assert!(canonicalize(&header, &body).is_err());
        let kind_mismatch = canonicalize(&header, &sample_attr_body());
        assert!(kind_mismatch.is_err());
    }
}
