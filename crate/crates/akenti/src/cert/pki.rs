//! Mini-PKI standing in for X.509 identities: certification authorities
//! issue identity certificates in the same envelope format, and
//! verification checks CA trust, validity, and revocation.

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::keys::{Credential, CryptoPolicy, VerifyingKey};
use crate::principal::{Dn, Principal};
use crate::time::CompactTime;

use super::{
    new_uid, sign_certificate, validate_period, verify_signature, AkentiCertificate, CertBody,
    CertHeader, CertKind, IdentityCert, PeriodStatus, RevocationList, SignError, CANON_ALG,
};

#[derive(Debug, Error)]
pub enum PkiError {
    #[error("credential is not a CA root: subject {subject} differs from CA {ca}")]
    NotSelfRooted { subject: Dn, ca: Dn },
    #[error("unknown CA {0} for subject")]
    UnknownCa(Dn),
    #[error(transparent)]
    Sign(#[from] SignError),
}

/// A CA DN paired with its verification key, as extracted from policy
/// `CAInfo` entries or configured directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustedCa {
    pub dn: Dn,
    pub key: VerifyingKey,
}

/// Why identity verification failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdentityRejection {
    NotAnIdentity,
    UntrustedCa(String),
    BadSignature,
    Expired,
    NotYetValid,
    Revoked(String),
    UnsupportedAlgorithm(String),
}

impl std::fmt::Display for IdentityRejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IdentityRejection::NotAnIdentity => write!(f, "certificate is not an identity"),
            IdentityRejection::UntrustedCa(dn) => write!(f, "issuing CA {dn} is not trusted"),
            IdentityRejection::BadSignature => write!(f, "signature does not verify"),
            IdentityRejection::Expired => write!(f, "identity has expired"),
            IdentityRejection::NotYetValid => write!(f, "identity is not yet valid"),
            IdentityRejection::Revoked(what) => write!(f, "revoked: {what}"),
            IdentityRejection::UnsupportedAlgorithm(alg) => {
                write!(f, "unsupported signature algorithm {alg:?}")
            }
        }
    }
}

/// A certification authority: a credential whose subject DN and CA DN are
/// the same, registered as a trust root.
pub struct CertAuthority {
    credential: Credential,
    host: String,
}

impl CertAuthority {
    pub fn new(credential: Credential, host: &str) -> Result<Self, PkiError> {
        if credential.principal.user_dn != credential.principal.ca_dn {
            return Err(PkiError::NotSelfRooted {
                subject: credential.principal.user_dn.clone(),
                ca: credential.principal.ca_dn.clone(),
            });
        }
        Ok(CertAuthority {
            credential,
            host: host.to_string(),
        })
    }

    pub fn dn(&self) -> &Dn {
        &self.credential.principal.user_dn
    }

    pub fn trusted_ca(&self) -> TrustedCa {
        TrustedCa {
            dn: self.dn().clone(),
            key: self.credential.verifying_key(),
        }
    }

    /// Issues an identity certificate binding `subject` to `public_key`.
    /// The subject's CA DN must name this CA.
    pub fn issue_identity(
        &self,
        subject: Principal,
        public_key: VerifyingKey,
        begin: CompactTime,
        end: CompactTime,
    ) -> Result<AkentiCertificate, PkiError> {
        if subject.ca_dn != *self.dn() {
            return Err(PkiError::UnknownCa(subject.ca_dn));
        }
        let header = self.header(CertKind::Identity, begin, end);
        let body = CertBody::Identity(IdentityCert {
            subject,
            public_key,
        });
        Ok(sign_certificate(header, body, &self.credential)?)
    }

    /// The CA's own self-signed identity.
    pub fn self_identity(
        &self,
        begin: CompactTime,
        end: CompactTime,
    ) -> Result<AkentiCertificate, PkiError> {
        self.issue_identity(
            self.credential.principal.clone(),
            self.credential.verifying_key(),
            begin,
            end,
        )
    }

    /// Signs a revocation list naming certificate UIDs and subject DNs.
    pub fn issue_revocation_list(
        &self,
        list: RevocationList,
        begin: CompactTime,
        end: CompactTime,
    ) -> Result<AkentiCertificate, PkiError> {
        let header = self.header(CertKind::Crl, begin, end);
        Ok(sign_certificate(header, CertBody::Revocation(list), &self.credential)?)
    }

    fn header(&self, kind: CertKind, begin: CompactTime, end: CompactTime) -> CertHeader {
        CertHeader {
            kind,
            signature_alg: crate::keys::DEFAULT_SIGNATURE_ALG.to_string(),
            canon_alg: CANON_ALG.to_string(),
            version: "2".to_string(),
            uid: new_uid(&self.host, begin),
            issuer: self.credential.principal.clone(),
            validity_begin: begin,
            validity_end: end,
        }
    }
}

/// Verifies an identity certificate: trusted CA, valid signature, valid
/// period, and not named by any of the supplied (already CA-verified)
/// revocation lists.
pub fn pki_verify(
    identity: &AkentiCertificate,
    trusted: &[TrustedCa],
    crls: &[RevocationList],
    now: DateTime<Utc>,
    policy: &CryptoPolicy,
) -> Result<(), IdentityRejection> {
    let Some(body) = identity.as_identity() else {
        return Err(IdentityRejection::NotAnIdentity);
    };
    let issuer_dn = &identity.header.issuer.user_dn;
    let Some(ca) = trusted.iter().find(|ca| ca.dn == *issuer_dn) else {
        return Err(IdentityRejection::UntrustedCa(issuer_dn.to_string()));
    };
    match verify_signature(identity, &ca.key, policy) {
        Ok(true) => {}
        Ok(false) => return Err(IdentityRejection::BadSignature),
        Err(e) => return Err(IdentityRejection::UnsupportedAlgorithm(e.to_string())),
    }
    match validate_period(identity, now) {
        PeriodStatus::Valid => {}
        PeriodStatus::Expired => return Err(IdentityRejection::Expired),
        PeriodStatus::NotYetValid => return Err(IdentityRejection::NotYetValid),
    }
    for crl in crls {
        if crl.revoked_uids.iter().any(|uid| uid == identity.uid()) {
            return Err(IdentityRejection::Revoked(format!("uid {}", identity.uid())));
        }
        if crl
            .revoked_dns
            .iter()
            .any(|dn| dn == body.subject.user_dn.as_str())
        {
            return Err(IdentityRejection::Revoked(format!("dn {}", body.subject.user_dn)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ca_principal(cn: &str) -> Principal {
        let dn = format!("/O=test.org/CN={cn}");
        Principal::parse(&dn, &dn).unwrap()
    }

    fn window() -> (CompactTime, CompactTime) {
        (
            CompactTime::parse("020101000000Z").unwrap(),
            CompactTime::parse("100101000000Z").unwrap(),
        )
    }

    fn now() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2003, 6, 1, 12, 0, 0).unwrap()
    }

    #[test]
    fn issue_and_verify() {
        let ca = CertAuthority::new(Credential::generate(ca_principal("ca1")), "host").unwrap();
        let jane = Principal::parse("/O=test.org/CN=Jane Doe", "/O=test.org/CN=ca1").unwrap();
        let jane_key = Credential::generate(jane.clone()).verifying_key();
        let (begin, end) = window();
        let identity = ca.issue_identity(jane, jane_key, begin, end).unwrap();
        assert!(pki_verify(&identity, &[ca.trusted_ca()], &[], now(), &CryptoPolicy::default())
            .is_ok());
    }

    #[test]
    fn other_ca_not_trusted() {
        let ca = CertAuthority::new(Credential::generate(ca_principal("ca1")), "host").unwrap();
        let other = CertAuthority::new(Credential::generate(ca_principal("ca2")), "host").unwrap();
        let jane = Principal::parse("/O=test.org/CN=Jane Doe", "/O=test.org/CN=ca1").unwrap();
        let jane_key = Credential::generate(jane.clone()).verifying_key();
        let (begin, end) = window();
        let identity = ca.issue_identity(jane, jane_key, begin, end).unwrap();
        let err = pki_verify(&identity, &[other.trusted_ca()], &[], now(), &CryptoPolicy::default())
            .unwrap_err();
        assert!(matches!(err, IdentityRejection::UntrustedCa(_)));
    }

    #[test]
    fn revoked_uid_rejected() {
        let ca = CertAuthority::new(Credential::generate(ca_principal("ca1")), "host").unwrap();
        let jane = Principal::parse("/O=test.org/CN=Jane Doe", "/O=test.org/CN=ca1").unwrap();
        let jane_key = Credential::generate(jane.clone()).verifying_key();
        let (begin, end) = window();
        let identity = ca.issue_identity(jane, jane_key, begin, end).unwrap();
        let crl = RevocationList {
            revoked_uids: vec![identity.uid().to_string()],
            revoked_dns: vec![],
        };
        let err = pki_verify(&identity, &[ca.trusted_ca()], &[crl], now(), &CryptoPolicy::default())
            .unwrap_err();
        assert!(matches!(err, IdentityRejection::Revoked(_)));
    }

    #[test]
    fn subject_under_foreign_ca_refused() {
        let ca = CertAuthority::new(Credential::generate(ca_principal("ca1")), "host").unwrap();
        let jane = Principal::parse("/O=test.org/CN=Jane Doe", "/O=test.org/CN=ca9").unwrap();
        let jane_key = Credential::generate(jane.clone()).verifying_key();
        let (begin, end) = window();
        assert!(matches!(
            ca.issue_identity(jane, jane_key, begin, end),
            Err(PkiError::UnknownCa(_))
        ));
    }
}
