//! Certificate retrieval: fetches certificate directories over `file:`
//! and `http:` sources, caches them under the governing policy's cache
//! time, filters use-conditions and attribute certificates by trust
//! rules, and applies revocation lists.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::cert::{
    parse_certificate, pki_verify, validate_period, verify_signature, AkentiCertificate, CaInfo,
    PeriodStatus, RevocationList, Scope, TrustedCa, UseConditionCert,
};
use crate::engine::PolicyChain;
use crate::httpio::http_get;
use crate::keys::{CryptoPolicy, VerifyingKey};
use crate::principal::Principal;
use crate::resource::ResourcePath;
use crate::time::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    UseConditionDir,
    AttrDir,
    IdDir,
    CrlDir,
}

/// A certificate publication point. Only `file:` and `http:` schemes are
/// fetchable; anything else (the historical `ldap:` URLs) is reported as
/// unavailable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertSource {
    pub url: String,
    pub kind: SourceKind,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("source unavailable: {url}: {detail}")]
    SourceUnavailable { url: String, detail: String },
}

/// Raw directory access, injectable so tests can count and fail fetches.
pub trait Fetcher: Send + Sync {
    /// Returns (file name, file text) pairs for every certificate file in
    /// the directory behind `url`.
    fn fetch_dir(&self, url: &str) -> Result<Vec<(String, String)>, String>;
}

/// Production fetcher: `file:` directories of `*.xml` files and `http:`
/// endpoints speaking the name-list contract.
pub struct StdFetcher;

impl Fetcher for StdFetcher {
    fn fetch_dir(&self, url: &str) -> Result<Vec<(String, String)>, String> {
        if let Some(path) = url.strip_prefix("file:") {
            let path = normalize_file_path(path);
            let mut names = Vec::new();
            let entries = std::fs::read_dir(&path).map_err(|e| e.to_string())?;
            for entry in entries {
                let entry = entry.map_err(|e| e.to_string())?;
                let name = entry.file_name().to_string_lossy().into_owned();
                if name.ends_with(".xml") && entry.path().is_file() {
                    names.push(name);
                }
            }
            names.sort();
            let mut out = Vec::new();
            for name in names {
                let text = std::fs::read_to_string(std::path::Path::new(&path).join(&name))
                    .map_err(|e| e.to_string())?;
                out.push((name, text));
            }
            Ok(out)
        } else if url.starts_with("http://") {
            let base = url.trim_end_matches('/');
            let listing = http_get(&format!("{base}/")).map_err(|e| e.to_string())?;
            let mut out = Vec::new();
            for name in listing.lines().map(str::trim).filter(|l| !l.is_empty()) {
                let text = http_get(&format!("{base}/{name}")).map_err(|e| e.to_string())?;
                out.push((name.to_string(), text));
            }
            Ok(out)
        } else {
            Err(format!("unsupported url scheme: {url}"))
        }
    }
}

/// `file:/x`, `file://x`, and `file:///x` all name the local path `/x`.
fn normalize_file_path(rest: &str) -> String {
    let trimmed = rest.trim_start_matches('/');
    format!("/{trimmed}")
}

/// Wraps a fetcher and counts the fetches that reach it, so cache
/// behavior is observable.
pub struct CountingFetcher<F> {
    inner: F,
    count: AtomicU64,
}

impl<F> CountingFetcher<F> {
    pub fn new(inner: F) -> Self {
        CountingFetcher {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

impl<F: Fetcher> Fetcher for CountingFetcher<F> {
    fn fetch_dir(&self, url: &str) -> Result<Vec<(String, String)>, String> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.fetch_dir(url)
    }
}

impl<F: Fetcher> Fetcher for Arc<F> {
    fn fetch_dir(&self, url: &str) -> Result<Vec<(String, String)>, String> {
        (**self).fetch_dir(url)
    }
}

/// In-memory fetcher for tests: url -> files, with per-url failure
/// injection.
#[derive(Default)]
pub struct MemFetcher {
    dirs: RwLock<HashMap<String, Vec<(String, String)>>>,
    unavailable: RwLock<Vec<String>>,
}

impl MemFetcher {
    pub fn insert(&self, url: &str, files: Vec<(String, String)>) {
        self.dirs.write().unwrap().insert(url.to_string(), files);
    }

    pub fn add_file(&self, url: &str, name: &str, text: &str) {
        self.dirs
            .write()
            .unwrap()
            .entry(url.to_string())
            .or_default()
            .push((name.to_string(), text.to_string()));
    }

    pub fn mark_unavailable(&self, url: &str) {
        self.unavailable.write().unwrap().push(url.to_string());
    }
}

impl Fetcher for MemFetcher {
    fn fetch_dir(&self, url: &str) -> Result<Vec<(String, String)>, String> {
        if self.unavailable.read().unwrap().iter().any(|u| u == url) {
            return Err("marked unavailable".to_string());
        }
        self.dirs
            .read()
            .unwrap()
            .get(url)
            .cloned()
            .ok_or_else(|| "no such directory".to_string())
    }
}

/// Parsed certificates from one directory fetch plus warnings for every
/// file that was skipped.
#[derive(Debug, Clone, Default)]
pub struct FetchOutcome {
    pub certs: Vec<Arc<AkentiCertificate>>,
    pub warnings: Vec<String>,
}

struct CacheEntry {
    outcome: FetchOutcome,
    fetched_at: DateTime<Utc>,
    ttl: u64,
}

/// Use-conditions applicable to one decision, plus the certificates that
/// were fetched but excluded and why.
#[derive(Debug, Clone, Default)]
pub struct UcSelection {
    pub included: Vec<Arc<AkentiCertificate>>,
    pub excluded: Vec<(String, String)>,
}

/// Evidence that a subject holds an attribute: the matching attribute
/// certificate UID and the authority identity used to verify it.
#[derive(Debug, Clone)]
pub struct AttrEvidence {
    pub attr_cert_uid: String,
    pub authority_identity_uid: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RevocationSubject<'a> {
    Dn(&'a str),
    Uid(&'a str),
}

/// Shared certificate store with one cache entry per directory URL.
/// Concurrent readers are fine; a refetch replaces the entry atomically.
pub struct CertStore {
    fetcher: Arc<dyn Fetcher>,
    clock: Arc<dyn Clock>,
    crypto: CryptoPolicy,
    cache: RwLock<HashMap<String, CacheEntry>>,
}

impl CertStore {
    pub fn new(fetcher: Arc<dyn Fetcher>, clock: Arc<dyn Clock>) -> Self {
        CertStore {
            fetcher,
            clock,
            crypto: CryptoPolicy::default(),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_crypto(mut self, crypto: CryptoPolicy) -> Self {
        self.crypto = crypto;
        self
    }

    pub fn crypto(&self) -> &CryptoPolicy {
        &self.crypto
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        self.clock.clone()
    }

    /// Fetches (or serves from cache) every certificate in the directory.
    /// Unparsable files are skipped with a warning; an unreachable source
    /// is an error even when a stale cache entry exists.
    pub fn fetch_directory(&self, url: &str, ttl: u64) -> Result<FetchOutcome, StoreError> {
        let now = self.clock.now();
        {
            let cache = self.cache.read().unwrap();
            if let Some(entry) = cache.get(url) {
                let age = (now - entry.fetched_at).num_seconds();
                if age >= 0 && (age as u64) < entry.ttl.min(ttl) {
                    return Ok(entry.outcome.clone());
                }
            }
        }
        let files = self
            .fetcher
            .fetch_dir(url)
            .map_err(|detail| StoreError::SourceUnavailable {
                url: url.to_string(),
                detail,
            })?;
        let mut outcome = FetchOutcome::default();
        for (name, text) in files {
            match parse_certificate(&text) {
                Ok(cert) => outcome.certs.push(Arc::new(cert)),
                Err(e) => {
                    let warning = format!("skipping {url}/{name}: {e}");
                    log::warn!("{warning}");
                    outcome.warnings.push(warning);
                }
            }
        }
        self.cache.write().unwrap().insert(
            url.to_string(),
            CacheEntry {
                outcome: outcome.clone(),
                fetched_at: now,
                ttl,
            },
        );
        Ok(outcome)
    }

    /// Finds the identity certificate for `principal` through the CA
    /// trust data in `ca_infos` and returns its verified public key and
    /// the identity UID. The outer error is a source failure; the inner
    /// error is a trust failure with its reason.
    pub fn resolve_principal_key(
        &self,
        principal: &Principal,
        ca_infos: &[CaInfo],
        ttl: u64,
    ) -> Result<Result<(VerifyingKey, String), String>, StoreError> {
        let Some(ca) = ca_infos.iter().find(|ca| ca.ca_dn == principal.ca_dn) else {
            return Ok(Err(format!(
                "no trusted CA {} for {}",
                principal.ca_dn, principal.user_dn
            )));
        };
        let trusted = [TrustedCa {
            dn: ca.ca_dn.clone(),
            key: ca.ca_public_key.clone(),
        }];
        let (crls, _) = self.fetch_verified_crls(&ca.crl_dirs, &trusted, ttl);
        let now = self.clock.now();
        for dir in &ca.id_dirs {
            let outcome = self.fetch_directory(dir, ttl)?;
            for cert in &outcome.certs {
                let Some(identity) = cert.as_identity() else { continue };
                if identity.subject != *principal {
                    continue;
                }
                match pki_verify(cert, &trusted, &crls, now, &self.crypto) {
                    Ok(()) => {
                        return Ok(Ok((identity.public_key.clone(), cert.uid().to_string())))
                    }
                    Err(e) => {
                        log::warn!("identity {} for {} rejected: {e}", cert.uid(), principal);
                    }
                }
            }
        }
        Ok(Err(format!("no valid identity certificate for {principal}")))
    }

    /// Fetches revocation lists, keeping only those signed by a trusted
    /// CA and currently valid. Unreachable CRL sources degrade to a
    /// warning rather than an error.
    pub fn fetch_verified_crls(
        &self,
        crl_dirs: &[String],
        trusted: &[TrustedCa],
        ttl: u64,
    ) -> (Vec<RevocationList>, Vec<String>) {
        let mut lists = Vec::new();
        let mut warnings = Vec::new();
        let now = self.clock.now();
        for dir in crl_dirs {
            let outcome = match self.fetch_directory(dir, ttl) {
                Ok(o) => o,
                Err(e) => {
                    let warning = format!("revocation source unavailable, proceeding: {e}");
                    log::warn!("{warning}");
                    warnings.push(warning);
                    continue;
                }
            };
            warnings.extend(outcome.warnings);
            for cert in &outcome.certs {
                let Some(list) = cert.as_revocation() else { continue };
                let issuer_dn = &cert.header.issuer.user_dn;
                let Some(ca) = trusted.iter().find(|ca| ca.dn == *issuer_dn) else {
                    warnings.push(format!(
                        "ignoring revocation list {} from untrusted issuer {issuer_dn}",
                        cert.uid()
                    ));
                    continue;
                };
                let signed = verify_signature(cert, &ca.key, &self.crypto).unwrap_or(false);
                if !signed {
                    warnings.push(format!(
                        "ignoring revocation list {}: signature does not verify",
                        cert.uid()
                    ));
                    continue;
                }
                if validate_period(cert, now) != PeriodStatus::Valid {
                    warnings.push(format!(
                        "ignoring revocation list {}: outside validity period",
                        cert.uid()
                    ));
                    continue;
                }
                lists.push(list.clone());
            }
        }
        (lists, warnings)
    }

    /// True iff the subject is named in any valid, CA-signed revocation
    /// list reachable through `crl_dirs`.
    pub fn check_revocation(
        &self,
        subject: RevocationSubject<'_>,
        crl_dirs: &[String],
        trusted: &[TrustedCa],
        ttl: u64,
    ) -> (bool, Vec<String>) {
        let (lists, warnings) = self.fetch_verified_crls(crl_dirs, trusted, ttl);
        let revoked = lists.iter().any(|list| match subject {
            RevocationSubject::Dn(dn) => list.revoked_dns.iter().any(|d| d == dn),
            RevocationSubject::Uid(uid) => list.revoked_uids.iter().any(|u| u == uid),
        });
        (revoked, warnings)
    }

    /// Collects every use-condition that applies at `resource` through
    /// the policy chain: published in a stakeholder directory, signed by
    /// a stakeholder of its level, valid now, and in scope.
    pub fn find_use_conditions(
        &self,
        resource: &ResourcePath,
        chain: &PolicyChain,
        now: DateTime<Utc>,
    ) -> Result<UcSelection, StoreError> {
        let mut selection = UcSelection::default();
        let mut seen = Vec::new();
        for (index, level) in chain.levels.iter().enumerate() {
            let policy_cert = chain.effective_policy(index);
            let policy = policy_cert
                .as_policy()
                .expect("chain levels hold policy bodies");
            let ttl = policy.cache_time;
            for dir in &policy.uc_dirs {
                let outcome = self.fetch_directory(dir, ttl)?;
                for cert in &outcome.certs {
                    let Some(uc) = cert.as_use_condition() else { continue };
                    if uc.resource_name != level.path || seen.contains(&cert.header.uid) {
                        continue;
                    }
                    seen.push(cert.header.uid.clone());
                    match self.screen_use_condition(cert, uc, resource, policy, ttl, now)? {
                        Ok(()) => selection.included.push(cert.clone()),
                        Err(reason) => {
                            log::warn!("use-condition {} excluded: {reason}", cert.uid());
                            selection.excluded.push((cert.uid().to_string(), reason));
                        }
                    }
                }
            }
        }
        Ok(selection)
    }

    fn screen_use_condition(
        &self,
        cert: &AkentiCertificate,
        uc: &UseConditionCert,
        resource: &ResourcePath,
        policy: &crate::cert::PolicyCert,
        ttl: u64,
        now: DateTime<Utc>,
    ) -> Result<Result<(), String>, StoreError> {
        let applies = uc.resource_name == *resource
            || (uc.scope == Scope::SubTree && uc.resource_name.is_proper_ancestor_of(resource));
        if !applies {
            return Ok(Err(format!(
                "scope {} at {} does not cover {resource}",
                uc.scope.name(),
                uc.resource_name
            )));
        }
        let issuer = &cert.header.issuer;
        if !policy.uc_issuers.contains(issuer) {
            return Ok(Err(format!("issuer {issuer} is not a stakeholder")));
        }
        let key = match self.resolve_principal_key(issuer, &policy.ca_infos, ttl)? {
            Ok((key, _uid)) => key,
            Err(reason) => return Ok(Err(reason)),
        };
        match verify_signature(cert, &key, &self.crypto) {
            Ok(true) => {}
            Ok(false) => return Ok(Err("signature does not verify".to_string())),
            Err(e) => return Ok(Err(e.to_string())),
        }
        if validate_period(cert, now) != PeriodStatus::Valid {
            return Ok(Err("outside validity period".to_string()));
        }
        Ok(Ok(()))
    }

    /// True iff some valid attribute certificate asserts
    /// `attr_name=attr_value` for `subject`, signed by one of
    /// `authorities`. Attribute values compare case-insensitively,
    /// names case-sensitively.
    #[allow(clippy::too_many_arguments)]
    pub fn find_attribute_certs(
        &self,
        subject: &Principal,
        attr_name: &str,
        attr_value: &str,
        attr_dirs: &[String],
        authorities: &[Principal],
        ca_infos: &[CaInfo],
        ttl: u64,
        now: DateTime<Utc>,
    ) -> Result<Option<AttrEvidence>, StoreError> {
        for dir in attr_dirs {
            let outcome = self.fetch_directory(dir, ttl)?;
            for cert in &outcome.certs {
                let Some(attr) = cert.as_attribute() else { continue };
                if attr.subject != *subject
                    || attr.attr_name != attr_name
                    || !attr.attr_value.eq_ignore_ascii_case(attr_value)
                {
                    continue;
                }
                if validate_period(cert, now) != PeriodStatus::Valid {
                    continue;
                }
                let issuer = &cert.header.issuer;
                if !authorities.contains(issuer) {
                    continue;
                }
                let Ok((key, identity_uid)) = self.resolve_principal_key(issuer, ca_infos, ttl)?
                else {
                    continue;
                };
                if verify_signature(cert, &key, &self.crypto).unwrap_or(false) {
                    return Ok(Some(AttrEvidence {
                        attr_cert_uid: cert.uid().to_string(),
                        authority_identity_uid: identity_uid,
                    }));
                }
            }
        }
        Ok(None)
    }
}
