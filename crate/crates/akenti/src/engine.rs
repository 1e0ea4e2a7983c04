//! The decision engine: assembles the policy chain for a resource,
//! evaluates every applicable use-condition for a subject, aggregates
//! rights additively with critical overrides, and issues or verifies
//! capability certificates for the push model.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::cert::{
    new_uid, pki_verify, sign_certificate, validate_period, verify_signature, AkentiCertificate,
    CaInfo, CapabilityCert, CertBody, CertHeader, CertKind, PeriodStatus, PolicyCert, TrustedCa,
    CANON_ALG,
};
use crate::constraint::{evaluate, AttributeContext, ConstraintExpr, EvalOutcome};
use crate::keys::{Credential, VerifyingKey};
use crate::principal::Principal;
use crate::resource::ResourcePath;
use crate::store::{CertStore, StoreError};
use crate::time::CompactTime;

/// Default and maximum lifetimes for issued capabilities, in seconds.
pub const DEFAULT_CAPABILITY_LIFETIME: u64 = 300;
pub const DEFAULT_MAX_CAPABILITY_LIFETIME: u64 = 900;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no root policy for {0:?} in the trusted directory")]
    NoRootPolicy(String),
    #[error("untrusted policy certificate for {path}: {reason}")]
    UntrustedPolicy { path: String, reason: String },
    #[error("trusted root directory {path}: {detail}")]
    TrustedRootUnreadable { path: String, detail: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// One level of the resource hierarchy: its path and, when a policy
/// certificate was published for exactly this level, that certificate.
/// Levels without one inherit the nearest ancestor's policy.
#[derive(Debug, Clone)]
pub struct ChainLevel {
    pub path: ResourcePath,
    pub explicit: Option<Arc<AkentiCertificate>>,
}

#[derive(Debug, Clone)]
pub struct PolicyChain {
    pub levels: Vec<ChainLevel>,
}

impl PolicyChain {
    /// The nearest explicit policy at or above `index`. The root level is
    /// always explicit.
    pub fn effective_policy(&self, index: usize) -> &Arc<AkentiCertificate> {
        self.levels[..=index]
            .iter()
            .rev()
            .find_map(|level| level.explicit.as_ref())
            .expect("root level carries an explicit policy")
    }

    pub fn target(&self) -> &ResourcePath {
        &self.levels.last().expect("chain is never empty").path
    }

    pub fn target_policy(&self) -> &PolicyCert {
        self.effective_policy(self.levels.len() - 1)
            .as_policy()
            .expect("chain levels hold policy bodies")
    }

    /// UIDs of the explicit policy certificates, root first.
    pub fn policy_uids(&self) -> Vec<String> {
        self.levels
            .iter()
            .filter_map(|l| l.explicit.as_ref())
            .map(|c| c.uid().to_string())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DenialReason {
    IdentityRejected(String),
    NoApplicablePolicy,
    CriticalUnsatisfied,
    ConstraintsUnsatisfied,
}

impl std::fmt::Display for DenialReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DenialReason::IdentityRejected(detail) => write!(f, "IdentityRejected: {detail}"),
            DenialReason::NoApplicablePolicy => write!(f, "NoApplicablePolicy"),
            DenialReason::CriticalUnsatisfied => write!(f, "CriticalUnsatisfied"),
            DenialReason::ConstraintsUnsatisfied => write!(f, "ConstraintsUnsatisfied"),
        }
    }
}

/// Per-action verdicts for one subject and resource, with the reasons and
/// the certificate UIDs the decision rests on.
#[derive(Debug, Clone)]
pub struct AuthorizationDecision {
    pub subject: Principal,
    pub resource: ResourcePath,
    pub granted: BTreeSet<String>,
    /// Actions usable only if the residual SYSTEM constraint holds when
    /// the enforcement point evaluates it.
    pub conditional: BTreeMap<String, ConstraintExpr>,
    pub denied_reason: Option<DenialReason>,
    pub diagnostics: Vec<String>,
    pub evidence: Vec<String>,
}

impl AuthorizationDecision {
    pub fn is_denied(&self) -> bool {
        self.granted.is_empty() && self.conditional.is_empty()
    }

    fn denied(
        subject: Principal,
        resource: ResourcePath,
        reason: DenialReason,
        diagnostics: Vec<String>,
        evidence: Vec<String>,
    ) -> Self {
        AuthorizationDecision {
            subject,
            resource,
            granted: BTreeSet::new(),
            conditional: BTreeMap::new(),
            denied_reason: Some(reason),
            diagnostics,
            evidence,
        }
    }
}

/// What the caller wants decided: everything the subject could do, or a
/// specific action set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestedActions {
    All,
    Only(BTreeSet<String>),
}

impl RequestedActions {
    pub fn one(action: &str) -> Self {
        RequestedActions::Only(std::iter::once(action.to_string()).collect())
    }
}

/// Why capability verification yielded no usable actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CapabilityReject {
    NotACapability,
    UntrustedSignature,
    Expired,
    NotYetValid,
    SubjectMismatch,
}

impl std::fmt::Display for CapabilityReject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let text = match self {
            CapabilityReject::NotACapability => "not a capability certificate",
            CapabilityReject::UntrustedSignature => {
                "signature does not verify under any trusted engine key"
            }
            CapabilityReject::Expired => "capability has expired",
            CapabilityReject::NotYetValid => "capability is not yet valid",
            CapabilityReject::SubjectMismatch => "presented subject does not match the capability",
        };
        f.write_str(text)
    }
}

/// Result of checking a presented capability.
#[derive(Debug, Clone)]
pub struct CapabilityCheck {
    pub granted: BTreeSet<String>,
    /// Conditional actions with their residual constraint text, for the
    /// enforcement point to evaluate.
    pub conditional: Vec<(String, String)>,
    pub reject: Option<CapabilityReject>,
}

#[derive(Debug, Error)]
pub enum CapabilityError {
    #[error("decision carries no granted or conditional actions")]
    EmptyDecision,
    #[error("requested lifetime {requested}s exceeds maximum {max}s")]
    LifetimeTooLong { requested: u64, max: u64 },
    #[error("signing failed: {0}")]
    Sign(String),
}

pub struct PolicyEngine {
    store: Arc<CertStore>,
    trusted_root_dir: PathBuf,
    max_capability_lifetime: u64,
    host: String,
}

impl PolicyEngine {
    pub fn new(store: Arc<CertStore>, trusted_root_dir: impl Into<PathBuf>) -> Self {
        PolicyEngine {
            store,
            trusted_root_dir: trusted_root_dir.into(),
            max_capability_lifetime: DEFAULT_MAX_CAPABILITY_LIFETIME,
            host: "localhost".to_string(),
        }
    }

    pub fn with_host(mut self, host: &str) -> Self {
        self.host = host.to_string();
        self
    }

    pub fn with_max_capability_lifetime(mut self, seconds: u64) -> Self {
        self.max_capability_lifetime = seconds;
        self
    }

    pub fn store(&self) -> &Arc<CertStore> {
        &self.store
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.store.clock().now()
    }

    /// Loads the root policy for the path's first segment from the local
    /// trusted directory and resolves explicit subordinate policies
    /// published in the parent level's directories.
    pub fn load_policy_chain(&self, resource: &ResourcePath) -> Result<PolicyChain, EngineError> {
        let root_segment = resource.root_segment().to_string();
        let root = self.load_root_policy(&root_segment)?;
        self.screen_policy_cert(&root, root.as_policy().unwrap(), None)?;

        let mut levels = vec![ChainLevel {
            path: ResourcePath::parse(&root_segment).expect("segment is a valid path"),
            explicit: Some(root),
        }];
        for path in resource.ancestry().into_iter().skip(1) {
            let parent_effective = levels
                .iter()
                .rev()
                .find_map(|l: &ChainLevel| l.explicit.clone())
                .expect("root is explicit");
            let parent_policy = parent_effective.as_policy().unwrap();
            let explicit = self.find_subordinate_policy(&path, parent_policy)?;
            levels.push(ChainLevel { path, explicit });
        }
        Ok(PolicyChain { levels })
    }

    fn load_root_policy(&self, root_segment: &str) -> Result<Arc<AkentiCertificate>, EngineError> {
        let dir = &self.trusted_root_dir;
        let entries = std::fs::read_dir(dir).map_err(|e| EngineError::TrustedRootUnreadable {
            path: dir.display().to_string(),
            detail: e.to_string(),
        })?;
        let mut names: Vec<PathBuf> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "xml"))
            .collect();
        names.sort();
        for path in names {
            let Ok(text) = std::fs::read_to_string(&path) else { continue };
            let Ok(cert) = crate::cert::parse_certificate(&text) else {
                log::warn!("skipping unparsable trusted file {}", path.display());
                continue;
            };
            if cert
                .as_policy()
                .is_some_and(|p| p.resource_name.as_str() == root_segment)
            {
                return Ok(Arc::new(cert));
            }
        }
        Err(EngineError::NoRootPolicy(root_segment.to_string()))
    }

    /// Verifies a policy certificate: its issuer must be resolvable and
    /// the signature and period valid. For subordinate levels the issuer
    /// must additionally be a stakeholder of the parent policy, which
    /// also supplies the trust data for key resolution.
    fn screen_policy_cert(
        &self,
        cert: &AkentiCertificate,
        own_body: &PolicyCert,
        parent: Option<&PolicyCert>,
    ) -> Result<(), EngineError> {
        let path = own_body.resource_name.to_string();
        let untrusted = |reason: String| EngineError::UntrustedPolicy {
            path: path.clone(),
            reason,
        };
        let issuer = &cert.header.issuer;
        let trust_source = parent.unwrap_or(own_body);
        if let Some(parent_policy) = parent {
            if !parent_policy.uc_issuers.contains(issuer) {
                return Err(untrusted(format!(
                    "issuer {issuer} is not a stakeholder of the parent level"
                )));
            }
        }
        let (key, _identity_uid) = self
            .store
            .resolve_principal_key(issuer, &trust_source.ca_infos, trust_source.cache_time)?
            .map_err(untrusted)?;
        match verify_signature(cert, &key, self.store.crypto()) {
            Ok(true) => {}
            Ok(false) => return Err(untrusted("signature does not verify".to_string())),
            Err(e) => return Err(untrusted(e.to_string())),
        }
        if validate_period(cert, self.now()) != PeriodStatus::Valid {
            return Err(untrusted("outside validity period".to_string()));
        }
        Ok(())
    }

    fn find_subordinate_policy(
        &self,
        path: &ResourcePath,
        parent: &PolicyCert,
    ) -> Result<Option<Arc<AkentiCertificate>>, EngineError> {
        let ttl = parent.cache_time;
        for dir in parent
            .uc_dirs
            .iter()
            .chain(parent.ca_infos.iter().flat_map(|ca| &ca.id_dirs))
        {
            let outcome = self.store.fetch_directory(dir, ttl)?;
            for cert in &outcome.certs {
                let Some(policy) = cert.as_policy() else { continue };
                if policy.resource_name == *path {
                    self.screen_policy_cert(cert, policy, Some(parent))?;
                    return Ok(Some(cert.clone()));
                }
            }
        }
        Ok(None)
    }

    /// CA trust anchors and revocation sources for a resource, as its
    /// governing policy declares them.
    pub fn trust_anchors(
        &self,
        resource: &ResourcePath,
    ) -> Result<(Vec<TrustedCa>, Vec<String>, u64), EngineError> {
        let chain = self.load_policy_chain(resource)?;
        let policy = chain.target_policy();
        Ok((
            trusted_cas(&policy.ca_infos),
            policy
                .ca_infos
                .iter()
                .flat_map(|ca| ca.crl_dirs.iter().cloned())
                .collect(),
            policy.cache_time,
        ))
    }

    /// Union of the rights any trust-screened use-condition in scope at
    /// `resource` could grant, regardless of subject. Tells enforcement
    /// points whether a resource's policy governs an action at all.
    pub fn rights_in_scope(
        &self,
        resource: &ResourcePath,
    ) -> Result<BTreeSet<String>, EngineError> {
        let chain = self.load_policy_chain(resource)?;
        let selection = self.store.find_use_conditions(resource, &chain, self.now())?;
        let mut rights = BTreeSet::new();
        for cert in &selection.included {
            rights.extend(cert.as_use_condition().unwrap().rights.iter().cloned());
        }
        Ok(rights)
    }

    /// Full decision for one subject on one resource.
    pub fn authorize(
        &self,
        subject: &Principal,
        subject_identity: &AkentiCertificate,
        resource: &ResourcePath,
        requested: &RequestedActions,
        system_ctx: &BTreeMap<String, String>,
    ) -> Result<AuthorizationDecision, EngineError> {
        let now = self.now();
        let chain = self.load_policy_chain(resource)?;
        let policy = chain.target_policy();
        let ttl = policy.cache_time;
        let mut evidence = chain.policy_uids();
        let mut diagnostics = Vec::new();

        // Identity first: an unverifiable subject gets nothing.
        let cas = trusted_cas(&policy.ca_infos);
        let mut crls = Vec::new();
        for ca in &policy.ca_infos {
            let (lists, warnings) = self.store.fetch_verified_crls(&ca.crl_dirs, &cas, ttl);
            crls.extend(lists);
            diagnostics.extend(warnings);
        }
        if subject_identity.as_identity().map(|id| &id.subject) != Some(subject) {
            return Ok(AuthorizationDecision::denied(
                subject.clone(),
                resource.clone(),
                DenialReason::IdentityRejected(
                    "identity certificate does not bind the subject".to_string(),
                ),
                diagnostics,
                evidence,
            ));
        }
        if let Err(rejection) = pki_verify(subject_identity, &cas, &crls, now, self.store.crypto())
        {
            return Ok(AuthorizationDecision::denied(
                subject.clone(),
                resource.clone(),
                DenialReason::IdentityRejected(rejection.to_string()),
                diagnostics,
                evidence,
            ));
        }
        evidence.push(subject_identity.uid().to_string());

        let selection = self.store.find_use_conditions(resource, &chain, now)?;
        for (uid, reason) in &selection.excluded {
            diagnostics.push(format!("use-condition {uid} excluded: {reason}"));
        }
        if selection.included.is_empty() {
            return Ok(AuthorizationDecision::denied(
                subject.clone(),
                resource.clone(),
                DenialReason::NoApplicablePolicy,
                diagnostics,
                evidence,
            ));
        }

        // Evaluate every applicable use-condition.
        let mut outcomes = Vec::new();
        for cert in &selection.included {
            let uc = cert.as_use_condition().unwrap();
            let mut ctx = AttributeContext::for_subject_dn(&subject.user_dn);
            ctx.system = system_ctx.clone();
            ctx.declared_akenti = uc.declared_akenti();
            for info in &uc.attribute_infos {
                if info.attr_type != crate::cert::AttrType::Akenti {
                    continue;
                }
                let mut dirs = policy.attr_dirs.clone();
                for dir in &uc.attr_dirs {
                    if !dirs.contains(dir) {
                        dirs.push(dir.clone());
                    }
                }
                let found = self.store.find_attribute_certs(
                    subject,
                    &info.attr_name,
                    &info.attr_value,
                    &dirs,
                    &info.authorities,
                    &policy.ca_infos,
                    ttl,
                    now,
                )?;
                if let Some(proof) = found {
                    ctx.akenti
                        .entry(info.attr_name.clone())
                        .or_default()
                        .insert(info.attr_value.clone());
                    evidence.push(proof.attr_cert_uid);
                    evidence.push(proof.authority_identity_uid);
                }
            }
            let outcome = match evaluate(&uc.constraint, &ctx) {
                Ok(o) => o,
                Err(e) => {
                    // Malformed policy never grants; report and move on.
                    diagnostics.push(format!("use-condition {}: {e}", cert.uid()));
                    EvalOutcome::False
                }
            };
            if matches!(outcome, EvalOutcome::False) {
                diagnostics.push(format!(
                    "use-condition {} unsatisfied: {}",
                    cert.uid(),
                    uc.constraint_text
                ));
            }
            evidence.push(cert.uid().to_string());
            outcomes.push((uc.clone(), outcome));
        }

        let mut decision = aggregate_outcomes(subject, resource, &outcomes);
        decision.diagnostics.splice(0..0, diagnostics);
        dedup_preserving_order(&mut evidence);
        decision.evidence = evidence;

        if let RequestedActions::Only(wanted) = requested {
            decision.granted.retain(|a| wanted.contains(a));
            decision.conditional.retain(|a, _| wanted.contains(a));
            if decision.is_denied() && decision.denied_reason.is_none() {
                decision.denied_reason = Some(DenialReason::ConstraintsUnsatisfied);
            }
        }
        Ok(decision)
    }

    /// Packages a decision as a signed, short-lived capability.
    pub fn issue_capability(
        &self,
        decision: &AuthorizationDecision,
        subject_public_key: VerifyingKey,
        engine_credential: &Credential,
        lifetime_s: u64,
    ) -> Result<AkentiCertificate, CapabilityError> {
        if decision.is_denied() {
            return Err(CapabilityError::EmptyDecision);
        }
        if lifetime_s > self.max_capability_lifetime {
            return Err(CapabilityError::LifetimeTooLong {
                requested: lifetime_s,
                max: self.max_capability_lifetime,
            });
        }
        let begin = CompactTime::from_datetime(self.now());
        let end = begin.plus_seconds(lifetime_s as i64);
        let header = CertHeader {
            kind: CertKind::Capability,
            signature_alg: crate::keys::DEFAULT_SIGNATURE_ALG.to_string(),
            canon_alg: CANON_ALG.to_string(),
            version: "2".to_string(),
            uid: new_uid(&self.host, begin),
            issuer: engine_credential.principal.clone(),
            validity_begin: begin,
            validity_end: end,
        };
        let body = CertBody::Capability(CapabilityCert {
            subject: decision.subject.clone(),
            subject_public_key,
            resource_name: decision.resource.clone(),
            granted_actions: decision.granted.clone(),
            conditional_actions: decision
                .conditional
                .iter()
                .map(|(action, residual)| (action.clone(), residual.pretty()))
                .collect(),
        });
        sign_certificate(header, body, engine_credential)
            .map_err(|e| CapabilityError::Sign(e.to_string()))
    }

    pub fn max_capability_lifetime(&self) -> u64 {
        self.max_capability_lifetime
    }
}

/// Checks a presented capability against the engine keys a gateway
/// trusts. An empty result carries the reason.
pub fn verify_capability(
    cap: &AkentiCertificate,
    trusted_engine_keys: &[VerifyingKey],
    presented_subject: &Principal,
    now: DateTime<Utc>,
    crypto: &crate::keys::CryptoPolicy,
) -> CapabilityCheck {
    let reject = |reject: CapabilityReject| CapabilityCheck {
        granted: BTreeSet::new(),
        conditional: Vec::new(),
        reject: Some(reject),
    };
    let Some(body) = cap.as_capability() else {
        return reject(CapabilityReject::NotACapability);
    };
    let trusted = trusted_engine_keys
        .iter()
        .any(|key| verify_signature(cap, key, crypto).unwrap_or(false));
    if !trusted {
        return reject(CapabilityReject::UntrustedSignature);
    }
    match validate_period(cap, now) {
        PeriodStatus::Valid => {}
        PeriodStatus::Expired => return reject(CapabilityReject::Expired),
        PeriodStatus::NotYetValid => return reject(CapabilityReject::NotYetValid),
    }
    if body.subject != *presented_subject {
        return reject(CapabilityReject::SubjectMismatch);
    }
    CapabilityCheck {
        granted: body.granted_actions.clone(),
        conditional: body.conditional_actions.clone(),
        reject: None,
    }
}

pub fn trusted_cas(ca_infos: &[CaInfo]) -> Vec<TrustedCa> {
    ca_infos
        .iter()
        .map(|ca| TrustedCa {
            dn: ca.ca_dn.clone(),
            key: ca.ca_public_key.clone(),
        })
        .collect()
}

/// Additive aggregation with critical overrides, applied to the outcome
/// of every applicable use-condition.
pub fn aggregate_outcomes(
    subject: &Principal,
    resource: &ResourcePath,
    outcomes: &[(crate::cert::UseConditionCert, EvalOutcome)],
) -> AuthorizationDecision {
    let mut decision = AuthorizationDecision {
        subject: subject.clone(),
        resource: resource.clone(),
        granted: BTreeSet::new(),
        conditional: BTreeMap::new(),
        denied_reason: None,
        diagnostics: Vec::new(),
        evidence: Vec::new(),
    };

    // Critical override: one unsatisfied critical condition denies all.
    if let Some((uc, _)) = outcomes
        .iter()
        .find(|(uc, outcome)| uc.critical && matches!(outcome, EvalOutcome::False))
    {
        decision.denied_reason = Some(DenialReason::CriticalUnsatisfied);
        decision.diagnostics.push(format!(
            "critical use-condition unsatisfied: {}",
            uc.constraint_text
        ));
        return decision;
    }

    // Additive grants from satisfied conditions.
    for (uc, outcome) in outcomes {
        if matches!(outcome, EvalOutcome::True) {
            decision.granted.extend(uc.rights.iter().cloned());
        }
    }

    // Conditional actions: any one satisfiable residual suffices, so
    // residuals for the same action combine with Or.
    let mut conditional: BTreeMap<String, Vec<ConstraintExpr>> = BTreeMap::new();
    for (uc, outcome) in outcomes {
        if uc.critical {
            continue;
        }
        if let EvalOutcome::Residual(residual) = outcome {
            for action in &uc.rights {
                if !decision.granted.contains(action) {
                    conditional
                        .entry(action.clone())
                        .or_default()
                        .push(residual.clone());
                }
            }
        }
    }
    for (action, residuals) in conditional {
        decision
            .conditional
            .insert(action, ConstraintExpr::or(residuals));
    }

    // A critical condition decidable only at the enforcement point turns
    // every grant into a conditional grant under that residual.
    let critical_residuals: Vec<ConstraintExpr> = outcomes
        .iter()
        .filter_map(|(uc, outcome)| match (uc.critical, outcome) {
            (true, EvalOutcome::Residual(r)) => Some(r.clone()),
            _ => None,
        })
        .collect();
    if !critical_residuals.is_empty() {
        let gate = ConstraintExpr::and(critical_residuals);
        let granted = std::mem::take(&mut decision.granted);
        let existing = std::mem::take(&mut decision.conditional);
        for action in granted {
            decision.conditional.insert(action, gate.clone());
        }
        for (action, residual) in existing {
            decision
                .conditional
                .insert(action, ConstraintExpr::and(vec![residual, gate.clone()]));
        }
        // The critical condition's own rights become conditional on it.
        for (uc, outcome) in outcomes {
            if uc.critical && matches!(outcome, EvalOutcome::Residual(_)) {
                for action in &uc.rights {
                    decision
                        .conditional
                        .entry(action.clone())
                        .or_insert_with(|| gate.clone());
                }
            }
        }
    }

    if decision.is_denied() && decision.denied_reason.is_none() {
        decision.denied_reason = Some(DenialReason::ConstraintsUnsatisfied);
    }
    decision
}

fn dedup_preserving_order(items: &mut Vec<String>) {
    let mut seen = BTreeSet::new();
    items.retain(|item| seen.insert(item.clone()));
}
