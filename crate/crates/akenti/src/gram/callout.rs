//! The authorization callout seam: an abstract callout name resolves
//! through a configuration file to either the in-process decision engine
//! or a remote decision service, so the enforcement side never hardwires
//! its decision function.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::cert::AkentiCertificate;
use crate::constraint::{parse_constraint, ConstraintExpr};
use crate::engine::{
    AuthorizationDecision, DenialReason, PolicyEngine, RequestedActions,
};
use crate::principal::Principal;
use crate::resource::ResourcePath;
use crate::wire;

use super::mapfile::ExecMap;
use super::rsl::RslRequest;
use super::JobAction;

/// The abstract callout name the job manager invokes for every
/// authorization.
pub const GRAM_CALLOUT: &str = "gram_authorization";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CalloutConfigError {
    #[error("callout config line {line}: {detail}")]
    Bad { line: usize, detail: String },
    #[error("callout {0:?} configured more than once")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CalloutTarget {
    /// In-process implementation selected by identifier.
    Builtin(String),
    /// Remote decision service endpoint.
    Remote { host: String, port: u16 },
}

/// Map from abstract callout name to implementation descriptor, loaded
/// from `callout <name> <descriptor>` lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CalloutRegistry {
    entries: BTreeMap<String, CalloutTarget>,
}

impl CalloutRegistry {
    pub fn builtin(name: &str, id: &str) -> Self {
        let mut registry = CalloutRegistry::default();
        registry
            .entries
            .insert(name.to_string(), CalloutTarget::Builtin(id.to_string()));
        registry
    }

    pub fn remote(name: &str, host: &str, port: u16) -> Self {
        let mut registry = CalloutRegistry::default();
        registry.entries.insert(
            name.to_string(),
            CalloutTarget::Remote {
                host: host.to_string(),
                port,
            },
        );
        registry
    }

    pub fn parse(text: &str) -> Result<Self, CalloutConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |detail: String| CalloutConfigError::Bad {
                line: i + 1,
                detail,
            };
            let columns: Vec<&str> = line.split_whitespace().collect();
            let ["callout", name, descriptor] = columns.as_slice() else {
                return Err(err("expected: callout <abstract-name> <descriptor>".to_string()));
            };
            let target = if let Some(id) = descriptor.strip_prefix("builtin:") {
                CalloutTarget::Builtin(id.to_string())
            } else if let Some(endpoint) = descriptor.strip_prefix("remote:") {
                let (host, port) = endpoint
                    .rsplit_once(':')
                    .ok_or_else(|| err(format!("bad remote descriptor {descriptor:?}")))?;
                let port: u16 = port
                    .parse()
                    .map_err(|_| err(format!("bad port in {descriptor:?}")))?;
                CalloutTarget::Remote {
                    host: host.to_string(),
                    port,
                }
            } else {
                return Err(err(format!("unknown descriptor {descriptor:?}")));
            };
            if entries.insert(name.to_string(), target).is_some() {
                return Err(CalloutConfigError::Duplicate(name.to_string()));
            }
        }
        Ok(CalloutRegistry { entries })
    }

    pub fn resolve(&self, name: &str) -> Option<&CalloutTarget> {
        self.entries.get(name)
    }
}

/// Exactly the information the enforcement point hands the decision
/// function: both credentials, the action, the job id, and the RSL.
#[derive(Debug, Clone)]
pub struct CalloutRequest {
    pub requesting_user: Principal,
    pub requesting_identity: Arc<AkentiCertificate>,
    pub job_owner: Principal,
    pub action: JobAction,
    pub job_id: String,
    pub rsl: RslRequest,
}

#[derive(Debug, Error)]
pub enum CalloutError {
    #[error("callout {0:?} is not configured")]
    NotConfigured(String),
    #[error("no resource mapping for executable {0:?}")]
    NoMapping(String),
    #[error("authorization system failure: {0}")]
    SystemFailure(String),
}

/// Resolves callout requests to decisions. Derives the resources to
/// consult from the RSL and the executable mapping table, then asks the
/// configured decision function; a start must be allowed both for the
/// executable's resource and, when a job class is configured, for the
/// job-class resource.
pub struct CalloutDispatcher {
    registry: CalloutRegistry,
    exec_map: ExecMap,
    engine: Option<Arc<PolicyEngine>>,
    calls: AtomicU64,
}

impl CalloutDispatcher {
    pub fn new(registry: CalloutRegistry, exec_map: ExecMap, engine: Option<Arc<PolicyEngine>>) -> Self {
        CalloutDispatcher {
            registry,
            exec_map,
            engine,
            calls: AtomicU64::new(0),
        }
    }

    pub fn exec_map(&self) -> &ExecMap {
        &self.exec_map
    }

    /// Number of dispatched callouts, for observing the owner fast path.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn dispatch(
        &self,
        name: &str,
        request: &CalloutRequest,
    ) -> Result<AuthorizationDecision, CalloutError> {
        let target = self
            .registry
            .resolve(name)
            .ok_or_else(|| CalloutError::NotConfigured(name.to_string()))?;
        self.calls.fetch_add(1, Ordering::Relaxed);

        let resources = self.resources_for(request)?;
        let system_ctx = system_context(&request.rsl);
        let mut combined: Option<AuthorizationDecision> = None;
        for consultation in resources {
            let decision = self.decide(target, request, &consultation.resource, &system_ctx)?;
            if !consultation.binding && start_not_governed(target, self.engine.as_deref(), &consultation.resource, &decision)? {
                continue;
            }
            combined = Some(match combined {
                None => decision,
                Some(previous) => intersect_decisions(previous, decision),
            });
        }
        combined.ok_or_else(|| {
            CalloutError::SystemFailure("no resource to authorize against".to_string())
        })
    }

    /// Start consults the executable's resource and, when configured, the
    /// job-class resource; management actions consult the job-class
    /// resource only. The job-class consultation for start is marked
    /// non-binding: it only restricts submission when the class policy
    /// actually governs the start action.
    fn resources_for(&self, request: &CalloutRequest) -> Result<Vec<Consultation>, CalloutError> {
        let jobtag = request.rsl.jobtag().unwrap_or(super::DEFAULT_JOBTAG);
        let jobclass = match self.exec_map.jobclass_root() {
            Some(root) => Some(root.child(jobtag).map_err(|e| {
                CalloutError::SystemFailure(format!("bad jobtag {jobtag:?}: {e}"))
            })?),
            None => None,
        };
        match request.action {
            JobAction::Start => {
                let executable = request
                    .rsl
                    .executable()
                    .ok_or_else(|| CalloutError::NoMapping("<missing executable>".to_string()))?;
                let resource = self
                    .exec_map
                    .lookup(executable)
                    .ok_or_else(|| CalloutError::NoMapping(executable.to_string()))?
                    .clone();
                let mut resources = vec![Consultation {
                    resource,
                    binding: true,
                }];
                resources.extend(jobclass.map(|resource| Consultation {
                    resource,
                    binding: false,
                }));
                Ok(resources)
            }
            _ => match jobclass {
                Some(resource) => Ok(vec![Consultation {
                    resource,
                    binding: true,
                }]),
                None => Ok(Vec::new()),
            },
        }
    }

    fn decide(
        &self,
        target: &CalloutTarget,
        request: &CalloutRequest,
        resource: &ResourcePath,
        system_ctx: &BTreeMap<String, String>,
    ) -> Result<AuthorizationDecision, CalloutError> {
        let actions = RequestedActions::one(request.action.name());
        match target {
            CalloutTarget::Builtin(id) => {
                if id != "akenti" {
                    return Err(CalloutError::SystemFailure(format!(
                        "unknown builtin callout {id:?}"
                    )));
                }
                let engine = self.engine.as_ref().ok_or_else(|| {
                    CalloutError::SystemFailure("builtin callout with no engine".to_string())
                })?;
                engine
                    .authorize(
                        &request.requesting_user,
                        &request.requesting_identity,
                        resource,
                        &actions,
                        system_ctx,
                    )
                    .map_err(|e| CalloutError::SystemFailure(e.to_string()))
            }
            CalloutTarget::Remote { host, port } => {
                let wire_request = wire::Request {
                    subject_dn: request.requesting_user.user_dn.to_string(),
                    subject_ca_dn: request.requesting_user.ca_dn.to_string(),
                    identity_cert: crate::cert::serialize_certificate(&request.requesting_identity),
                    resource: resource.to_string(),
                    actions: wire::Actions::List(vec![request.action.name().to_string()]),
                    system: system_ctx.clone(),
                    want_capability: false,
                };
                let response = wire::call_service(host, *port, &wire_request)
                    .map_err(|e| CalloutError::SystemFailure(e.to_string()))?;
                decision_from_wire(request, resource, response)
            }
        }
    }
}

struct Consultation {
    resource: ResourcePath,
    binding: bool,
}

/// Decides whether a non-binding (job-class) consultation should drop out
/// of the start decision. With an in-process engine, the class governs
/// start only when some use-condition in scope there carries the start
/// right. Over the wire that question cannot be asked, so a plain
/// constraint denial is treated as non-governing while critical and
/// identity denials always bind.
fn start_not_governed(
    target: &CalloutTarget,
    engine: Option<&PolicyEngine>,
    resource: &ResourcePath,
    decision: &AuthorizationDecision,
) -> Result<bool, CalloutError> {
    match (target, engine) {
        (CalloutTarget::Builtin(_), Some(engine)) => {
            let rights = engine
                .rights_in_scope(resource)
                .map_err(|e| CalloutError::SystemFailure(e.to_string()))?;
            Ok(!rights.contains(JobAction::Start.name()))
        }
        _ => Ok(matches!(
            decision.denied_reason,
            Some(DenialReason::ConstraintsUnsatisfied) | Some(DenialReason::NoApplicablePolicy)
        ) && decision.is_denied()),
    }
}

/// SYSTEM attributes the enforcement point hands the engine on every
/// consultation: the executable and the numeric job parameters. Time of
/// day is deliberately absent so time windows come back as conditional
/// actions and are enforced at this side's clock.
pub fn system_context(rsl: &RslRequest) -> BTreeMap<String, String> {
    let mut ctx = BTreeMap::new();
    if let Some(executable) = rsl.executable() {
        ctx.insert("executable".to_string(), executable.to_string());
    }
    for (key, canonical) in [("count", "count"), ("maxmemory", "maxMemory"), ("queue", "queue")] {
        if let Some(value) = rsl.get(key) {
            ctx.insert(canonical.to_string(), value.to_string());
        }
    }
    ctx
}

/// Both consultations must allow an action for it to be allowed; an
/// action granted on one side and conditional on the other stays
/// conditional under the residual, and two residuals combine with And.
fn intersect_decisions(
    a: AuthorizationDecision,
    b: AuthorizationDecision,
) -> AuthorizationDecision {
    let mut out = AuthorizationDecision {
        subject: a.subject.clone(),
        resource: a.resource.clone(),
        granted: Default::default(),
        conditional: Default::default(),
        denied_reason: None,
        diagnostics: Vec::new(),
        evidence: Vec::new(),
    };
    let allowed = |d: &AuthorizationDecision, action: &str| {
        d.granted.contains(action) || d.conditional.contains_key(action)
    };
    let mut actions: Vec<String> = a.granted.iter().chain(a.conditional.keys()).cloned().collect();
    actions.retain(|action| allowed(&b, action));
    for action in actions {
        let residuals: Vec<ConstraintExpr> = [&a, &b]
            .iter()
            .filter_map(|d| d.conditional.get(&action).cloned())
            .collect();
        if residuals.is_empty() {
            out.granted.insert(action);
        } else {
            out.conditional.insert(action, ConstraintExpr::and(residuals));
        }
    }
    if out.is_denied() {
        out.denied_reason = a
            .denied_reason
            .clone()
            .or_else(|| b.denied_reason.clone())
            .or(Some(DenialReason::ConstraintsUnsatisfied));
    }
    out.diagnostics.extend(a.diagnostics);
    out.diagnostics.extend(b.diagnostics);
    out.evidence.extend(a.evidence);
    for uid in b.evidence {
        if !out.evidence.contains(&uid) {
            out.evidence.push(uid);
        }
    }
    out
}

fn decision_from_wire(
    request: &CalloutRequest,
    resource: &ResourcePath,
    response: wire::Response,
) -> Result<AuthorizationDecision, CalloutError> {
    if let Some(error) = &response.error {
        if error.kind == wire::ErrorKind::System {
            return Err(CalloutError::SystemFailure(error.detail.clone()));
        }
    }
    let mut conditional = BTreeMap::new();
    for (action, text) in &response.conditional {
        let expr = parse_constraint(text).map_err(|e| {
            CalloutError::SystemFailure(format!("bad residual in service response: {e}"))
        })?;
        conditional.insert(action.clone(), expr);
    }
    let denied_reason = response.denied_reason.as_deref().map(DenialReason::from_wire);
    Ok(AuthorizationDecision {
        subject: request.requesting_user.clone(),
        resource: resource.clone(),
        granted: response.granted.into_iter().collect(),
        conditional,
        denied_reason,
        diagnostics: Vec::new(),
        evidence: response.evidence,
    })
}

impl DenialReason {
    /// Inverse of `Display`, for decisions that crossed the wire.
    pub fn from_wire(text: &str) -> DenialReason {
        match text {
            "NoApplicablePolicy" => DenialReason::NoApplicablePolicy,
            "CriticalUnsatisfied" => DenialReason::CriticalUnsatisfied,
            "ConstraintsUnsatisfied" => DenialReason::ConstraintsUnsatisfied,
            other => match other.strip_prefix("IdentityRejected: ") {
                Some(detail) => DenialReason::IdentityRejected(detail.to_string()),
                None => DenialReason::ConstraintsUnsatisfied,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_config() {
        let registry = CalloutRegistry::parse(
            "# callouts\ncallout gram_authorization builtin:akenti\ncallout other remote:adf.example.org:7468\n",
        )
        .unwrap();
        assert_eq!(
            registry.resolve(GRAM_CALLOUT),
            Some(&CalloutTarget::Builtin("akenti".to_string()))
        );
        assert_eq!(
            registry.resolve("other"),
            Some(&CalloutTarget::Remote {
                host: "adf.example.org".to_string(),
                port: 7468
            })
        );
        assert_eq!(registry.resolve("missing"), None);
    }

    #[test]
    fn config_errors() {
        assert!(CalloutRegistry::parse("callout x").is_err());
        assert!(CalloutRegistry::parse("callout x nonsense:1").is_err());
        assert!(CalloutRegistry::parse("callout x remote:h:notaport").is_err());
        assert!(matches!(
            CalloutRegistry::parse("callout x builtin:a\ncallout x builtin:b"),
            Err(CalloutConfigError::Duplicate(_))
        ));
    }
}
