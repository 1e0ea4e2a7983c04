//! Certificate model: the signed envelope, the five body kinds plus
//! revocation lists, canonical serialization, signing/verification, and
//! the mini-PKI that stands in for X.509 identities.

mod canonical;
mod pki;
mod types;
mod xml;

pub use canonical::canonicalize;
pub use pki::{pki_verify, CertAuthority, IdentityRejection, PkiError, TrustedCa};
pub use types::*;
pub use xml::{parse_certificate, serialize_certificate, XmlError};

use rand::RngCore;
use thiserror::Error;

use crate::keys::{Credential, CryptoPolicy, KeyError, VerifyingKey};
use crate::time::CompactTime;

#[derive(Debug, Error)]
pub enum SignError {
    #[error("supplied key belongs to {key_owner}, header issuer is {issuer}")]
    KeyMismatch { key_owner: String, issuer: String },
    #[error(transparent)]
    InvalidBody(#[from] InvalidBody),
    #[error(transparent)]
    Key(#[from] KeyError),
}

/// Signs `header`+`body` with `signer`, producing a complete envelope.
///
/// The signer's principal must equal the header issuer; a key registered
/// to anyone else is refused.
pub fn sign_certificate(
    header: CertHeader,
    body: CertBody,
    signer: &Credential,
) -> Result<AkentiCertificate, SignError> {
    if signer.principal != header.issuer {
        return Err(SignError::KeyMismatch {
            key_owner: signer.principal.to_string(),
            issuer: header.issuer.to_string(),
        });
    }
    let policy = CryptoPolicy { allow_legacy_names: true };
    policy.check_algorithm(&header.signature_alg)?;
    let bytes = canonicalize(&header, &body)?;
    let signature = signer.sign(&bytes);
    Ok(AkentiCertificate {
        header,
        body,
        signature: Some(signature),
    })
}

/// True iff the envelope carries a signature that validates over the
/// canonical bytes of its header and body. Validity periods are checked
/// separately by [`validate_period`].
pub fn verify_signature(
    cert: &AkentiCertificate,
    issuer_key: &VerifyingKey,
    policy: &CryptoPolicy,
) -> Result<bool, VerifyError> {
    let Some(signature) = &cert.signature else {
        return Ok(false);
    };
    let bytes = canonicalize(&cert.header, &cert.body)?;
    Ok(issuer_key.verify(&cert.header.signature_alg, &bytes, signature, policy)?)
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    InvalidBody(#[from] InvalidBody),
    #[error(transparent)]
    Key(#[from] KeyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodStatus {
    Valid,
    Expired,
    NotYetValid,
}

/// Checks `now` against the header validity window. Both bounds are
/// inclusive.
pub fn validate_period(cert: &AkentiCertificate, now: chrono::DateTime<chrono::Utc>) -> PeriodStatus {
    let begin = cert.header.validity_begin.datetime();
    let end = cert.header.validity_end.datetime();
    if now < begin {
        PeriodStatus::NotYetValid
    } else if now > end {
        PeriodStatus::Expired
    } else {
        PeriodStatus::Valid
    }
}

/// Builds a fresh header UID: `<host>#<hex>#<timestamp>`.
pub fn new_uid(host: &str, issued_at: CompactTime) -> String {
    let mut bytes = [0u8; 4];
    rand::rngs::OsRng.fill_bytes(&mut bytes);
    format!("{host}#{}#{}", hex::encode(bytes), issued_at.format())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::principal::{Dn, Principal};
    use chrono::TimeZone;

    pub(crate) fn mary() -> Principal {
        Principal::parse(
            "/O=doesciencegrid.org/OU=People/CN=Mary R. Thompson",
            "/DC=net/DC=es/OU=Certificate Authorities/OU=DOE Science Grid/CN=pk1",
        )
        .unwrap()
    }

    pub(crate) fn sample_header(kind: CertKind, issuer: Principal) -> CertHeader {
        CertHeader {
            kind,
            signature_alg: crate::keys::DEFAULT_SIGNATURE_ALG.to_string(),
            canon_alg: CANON_ALG.to_string(),
            version: "2".to_string(),
            uid: "rocky.lbl.gov#104b8965#010504001529Z".to_string(),
            issuer,
            validity_begin: CompactTime::parse("010504001529Z").unwrap(),
            validity_end: CompactTime::parse("050504001529Z").unwrap(),
        }
    }

    pub(crate) fn sample_attr_body() -> CertBody {
        CertBody::Attribute(AttributeCert {
            subject: mary(),
            attr_name: "group".to_string(),
            attr_value: "Clients".to_string(),
        })
    }

    #[test]
    fn sign_and_verify_round_trip() {
        let cred = Credential::generate(mary());
        let cert =
            sign_certificate(sample_header(CertKind::Attribute, mary()), sample_attr_body(), &cred)
                .unwrap();
        let ok = verify_signature(&cert, &cred.verifying_key(), &CryptoPolicy::default()).unwrap();
        assert!(ok);
    }

    #[test]
    fn tampered_body_fails_verification() {
        let cred = Credential::generate(mary());
        let mut cert =
            sign_certificate(sample_header(CertKind::Attribute, mary()), sample_attr_body(), &cred)
                .unwrap();
        if let CertBody::Attribute(attr) = &mut cert.body {
            attr.attr_value = "Staff".to_string();
        }
        let ok = verify_signature(&cert, &cred.verifying_key(), &CryptoPolicy::default()).unwrap();
        assert!(!ok);
    }

    #[test]
    fn unrelated_key_fails_verification() {
        let cred = Credential::generate(mary());
        let other = Credential::generate(mary());
        let cert =
            sign_certificate(sample_header(CertKind::Attribute, mary()), sample_attr_body(), &cred)
                .unwrap();
        let ok = verify_signature(&cert, &other.verifying_key(), &CryptoPolicy::default()).unwrap();
        assert!(!ok);
    }

    #[test]
    fn key_mismatch_refused() {
        let lew = Principal::parse(
            "/O=doesciencegrid.org/OU=People/CN=Lew Randerson",
            "/DC=net/DC=es/OU=Certificate Authorities/OU=DOE Science Grid/CN=pk1",
        )
        .unwrap();
        let cred = Credential::generate(lew);
        let err = sign_certificate(sample_header(CertKind::Attribute, mary()), sample_attr_body(), &cred)
            .unwrap_err();
        assert!(matches!(err, SignError::KeyMismatch { .. }));
    }

    #[test]
    fn legacy_algorithm_name_rejected_without_flag() {
        let cred = Credential::generate(mary());
        let mut header = sample_header(CertKind::Attribute, mary());
        header.signature_alg = crate::keys::LEGACY_SIGNATURE_ALG.to_string();
        let cert = sign_certificate(header, sample_attr_body(), &cred).unwrap();
        let err = verify_signature(&cert, &cred.verifying_key(), &CryptoPolicy::default());
        assert!(matches!(err, Err(VerifyError::Key(KeyError::UnsupportedAlgorithm(_)))));
        let ok = verify_signature(
            &cert,
            &cred.verifying_key(),
            &CryptoPolicy { allow_legacy_names: true },
        )
        .unwrap();
        assert!(ok);
    }

    #[test]
    fn period_bounds_inclusive() {
        let cred = Credential::generate(mary());
        let cert =
            sign_certificate(sample_header(CertKind::Attribute, mary()), sample_attr_body(), &cred)
                .unwrap();
        let mid = chrono::Utc.with_ymd_and_hms(2003, 1, 1, 0, 0, 0).unwrap();
        assert_eq!(validate_period(&cert, mid), PeriodStatus::Valid);
        let end = cert.header.validity_end.datetime();
        assert_eq!(validate_period(&cert, end), PeriodStatus::Valid);
        assert_eq!(
            validate_period(&cert, end + chrono::Duration::seconds(1)),
            PeriodStatus::Expired
        );
        let begin = cert.header.validity_begin.datetime();
        assert_eq!(validate_period(&cert, begin), PeriodStatus::Valid);
        assert_eq!(
            validate_period(&cert, begin - chrono::Duration::seconds(1)),
            PeriodStatus::NotYetValid
        );
        // Expired but untampered still verifies; the checks are separate.
        let ok = verify_signature(&cert, &cred.verifying_key(), &CryptoPolicy::default()).unwrap();
        assert!(ok);
    }
}
