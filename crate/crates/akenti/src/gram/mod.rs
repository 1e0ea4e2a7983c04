//! The enforcement side: a simulated gatekeeper and job manager.
//!
//! The gatekeeper admits a verified grid identity through the site
//! grid-mapfile. The job manager parses job requests, consults the
//! configured authorization callout before starting or managing a job,
//! evaluates residual conditions against its own clock, and drives the
//! job lifecycle state machine. Jobs are simulated: an Active job runs
//! until canceled, or completes after a configured duration.

mod callout;
mod mapfile;
mod rsl;

pub use callout::{
    system_context, CalloutConfigError, CalloutDispatcher, CalloutError, CalloutRegistry,
    CalloutRequest, CalloutTarget, GRAM_CALLOUT,
};
pub use mapfile::{ExecMap, GridMap, MapfileError};
pub use rsl::{parse_rsl, RslError, RslRequest};

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::cert::{pki_verify, AkentiCertificate, TrustedCa};
use crate::constraint::{evaluate, AttributeContext, ConstraintExpr, EvalOutcome};
use crate::engine::AuthorizationDecision;
use crate::principal::Principal;
use crate::store::CertStore;
use crate::time::{format_time_of_day, Clock};

/// Job tag assigned when a start request names none.
pub const DEFAULT_JOBTAG: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobAction {
    Start,
    Cancel,
    Query,
    Signal,
    Suspend,
    Resume,
}

impl JobAction {
    pub fn name(&self) -> &'static str {
        match self {
            JobAction::Start => "start",
            JobAction::Cancel => "cancel",
            JobAction::Query => "query",
            JobAction::Signal => "signal",
            JobAction::Suspend => "suspend",
            JobAction::Resume => "resume",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "start" => JobAction::Start,
            "cancel" => JobAction::Cancel,
            "query" => JobAction::Query,
            "signal" => JobAction::Signal,
            "suspend" => JobAction::Suspend,
            "resume" => JobAction::Resume,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobState {
    Pending,
    Active,
    Suspended,
    Done,
    Failed,
    Canceled,
}

impl JobState {
    pub fn name(&self) -> &'static str {
        match self {
            JobState::Pending => "Pending",
            JobState::Active => "Active",
            JobState::Suspended => "Suspended",
            JobState::Done => "Done",
            JobState::Failed => "Failed",
            JobState::Canceled => "Canceled",
        }
    }
}

/// The lifecycle table. `Ok(None)` means the action is observation only.
pub fn transition(state: JobState, action: JobAction) -> Result<Option<JobState>, ()> {
    use JobAction::*;
    use JobState::*;
    match (state, action) {
        (_, Query) => Ok(None),
        (Pending | Active | Suspended, Cancel) => Ok(Some(Canceled)),
        (Active, Suspend) => Ok(Some(Suspended)),
        (Suspended, Resume) => Ok(Some(Active)),
        (Active, Signal) => Ok(Some(Active)),
        _ => Err(()),
    }
}

#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub at: DateTime<Utc>,
    pub action: String,
    pub actor: Principal,
    pub outcome: String,
}

#[derive(Debug, Clone)]
pub struct JobRecord {
    pub handle: String,
    pub owner: Principal,
    pub local_userid: String,
    pub jobtag: String,
    pub rsl: RslRequest,
    pub state: JobState,
    pub started_at: DateTime<Utc>,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("identity rejected: {0}")]
    IdentityRejected(String),
    #[error("grid identity {0:?} not in grid-mapfile")]
    NotInMapfile(String),
    #[error(transparent)]
    Rsl(#[from] RslError),
    #[error("no resource mapping for executable {0:?}")]
    NoMapping(String),
    #[error("authorization denied: {reason}")]
    AuthzDenied { reason: String, evidence: Vec<String> },
    #[error("authorization system error: {0}")]
    AuthzSystemError(String),
}

#[derive(Debug, Error)]
pub enum ManageError {
    #[error("unknown job handle {0:?}")]
    UnknownHandle(String),
    #[error("identity rejected: {0}")]
    IdentityRejected(String),
    #[error("authorization denied: {reason}")]
    AuthzDenied { reason: String, evidence: Vec<String> },
    #[error("authorization system error: {0}")]
    AuthzSystemError(String),
    #[error("invalid transition: {action} in state {state}")]
    InvalidTransition { state: String, action: String },
}

/// Result of an allowed management action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManageOutcome {
    pub state: JobState,
}

/// Whether a residual condition held, with the reason when it did not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualCheck {
    pub satisfied: bool,
    pub reason: Option<String>,
}

/// Evaluates a residual (SYSTEM-only) constraint at the enforcement
/// point, with `time` supplied from the local clock. A condition naming
/// a SYSTEM attribute nobody can supply is unsatisfiable, never a grant.
pub fn evaluate_residuals(
    residual: &ConstraintExpr,
    system_ctx: &BTreeMap<String, String>,
    clock: &dyn Clock,
) -> ResidualCheck {
    let mut ctx = AttributeContext {
        system: system_ctx.clone(),
        ..Default::default()
    };
    ctx.system
        .entry("time".to_string())
        .or_insert_with(|| format_time_of_day(clock.time_of_day()));
    match evaluate(residual, &ctx) {
        Ok(EvalOutcome::True) => ResidualCheck {
            satisfied: true,
            reason: None,
        },
        Ok(EvalOutcome::False) => ResidualCheck {
            satisfied: false,
            reason: Some(format!("condition not satisfied: {}", residual.pretty())),
        },
        Ok(EvalOutcome::Residual(rest)) => ResidualCheck {
            satisfied: false,
            reason: Some(format!("UnsatisfiableCondition: {}", rest.pretty())),
        },
        Err(e) => ResidualCheck {
            satisfied: false,
            reason: Some(format!("condition not evaluable: {e}")),
        },
    }
}

pub struct JobManagerConfig {
    pub grid_map: GridMap,
    pub dispatcher: Arc<CalloutDispatcher>,
    pub store: Arc<CertStore>,
    pub trusted_cas: Vec<TrustedCa>,
    pub crl_dirs: Vec<String>,
    pub cache_ttl: u64,
    pub clock: Arc<dyn Clock>,
    pub host: String,
    /// Active jobs complete on their own after this many seconds.
    pub simulated_duration_s: Option<i64>,
}

/// The simulated gatekeeper plus job manager.
pub struct JobManager {
    config: JobManagerConfig,
    jobs: RwLock<HashMap<String, Arc<Mutex<JobRecord>>>>,
    seq: AtomicU64,
}

impl JobManager {
    pub fn new(config: JobManagerConfig) -> Self {
        JobManager {
            config,
            jobs: RwLock::new(HashMap::new()),
            seq: AtomicU64::new(1),
        }
    }

    pub fn dispatcher(&self) -> &Arc<CalloutDispatcher> {
        &self.config.dispatcher
    }

    fn verify_identity(&self, identity: &AkentiCertificate) -> Result<Principal, String> {
        let subject = identity
            .as_identity()
            .map(|body| body.subject.clone())
            .ok_or_else(|| "not an identity certificate".to_string())?;
        let (crls, _) = self.config.store.fetch_verified_crls(
            &self.config.crl_dirs,
            &self.config.trusted_cas,
            self.config.cache_ttl,
        );
        pki_verify(
            identity,
            &self.config.trusted_cas,
            &crls,
            self.config.clock.now(),
            self.config.store.crypto(),
        )
        .map_err(|e| e.to_string())?;
        Ok(subject)
    }

    /// Gatekeeper admission: verified identity mapped to a local userid.
    pub fn gatekeeper_admit(
        &self,
        identity: &AkentiCertificate,
    ) -> Result<(Principal, String), SubmitError> {
        let subject = self
            .verify_identity(identity)
            .map_err(SubmitError::IdentityRejected)?;
        let userid = self
            .config
            .grid_map
            .lookup(subject.user_dn.as_str())
            .ok_or_else(|| SubmitError::NotInMapfile(subject.user_dn.to_string()))?;
        Ok((subject, userid.to_string()))
    }

    /// Full submission pipeline: admission, RSL parse, jobtag default,
    /// executable mapping, authorization callout, residual evaluation,
    /// then job creation.
    pub fn submit_job(
        &self,
        identity: &AkentiCertificate,
        rsl_text: &str,
    ) -> Result<String, SubmitError> {
        let (subject, local_userid) = self.gatekeeper_admit(identity)?;
        let mut rsl = parse_rsl(rsl_text)?;
        let executable = rsl
            .executable()
            .ok_or(RslError::MissingExecutable)?
            .to_string();
        if rsl.jobtag().is_none() {
            rsl.set("jobtag", DEFAULT_JOBTAG);
        }
        let jobtag = rsl.jobtag().unwrap().to_string();
        if self.config.dispatcher.exec_map().lookup(&executable).is_none() {
            return Err(SubmitError::NoMapping(executable));
        }

        let handle = format!(
            "job://{}/{}",
            self.config.host,
            self.seq.fetch_add(1, Ordering::Relaxed)
        );
        let request = CalloutRequest {
            requesting_user: subject.clone(),
            requesting_identity: Arc::new(identity.clone()),
            job_owner: subject.clone(),
            action: JobAction::Start,
            job_id: handle.clone(),
            rsl: rsl.clone(),
        };
        let decision = match self.config.dispatcher.dispatch(GRAM_CALLOUT, &request) {
            Ok(decision) => decision,
            Err(CalloutError::NoMapping(executable)) => {
                return Err(SubmitError::NoMapping(executable))
            }
            Err(e) => return Err(SubmitError::AuthzSystemError(e.to_string())),
        };
        self.require_allowed(&decision, JobAction::Start, &rsl)
            .map_err(|(reason, evidence)| SubmitError::AuthzDenied { reason, evidence })?;

        let now = self.config.clock.now();
        let record = JobRecord {
            handle: handle.clone(),
            owner: subject.clone(),
            local_userid,
            jobtag,
            rsl,
            state: JobState::Active,
            started_at: now,
            history: vec![HistoryEntry {
                at: now,
                action: "start".to_string(),
                actor: subject,
                outcome: "Active".to_string(),
            }],
        };
        self.jobs
            .write()
            .unwrap()
            .insert(handle.clone(), Arc::new(Mutex::new(record)));
        Ok(handle)
    }

    /// Checks a decision for one action, evaluating any residual against
    /// this side's clock and system context.
    fn require_allowed(
        &self,
        decision: &AuthorizationDecision,
        action: JobAction,
        rsl: &RslRequest,
    ) -> Result<(), (String, Vec<String>)> {
        let name = action.name();
        if decision.granted.contains(name) {
            return Ok(());
        }
        if let Some(residual) = decision.conditional.get(name) {
            let check = evaluate_residuals(residual, &system_context(rsl), &*self.config.clock);
            if check.satisfied {
                return Ok(());
            }
            return Err((
                check
                    .reason
                    .unwrap_or_else(|| format!("condition not satisfied: {}", residual.pretty())),
                decision.evidence.clone(),
            ));
        }
        let reason = decision
            .denied_reason
            .as_ref()
            .map(|r| r.to_string())
            .unwrap_or_else(|| "denied".to_string());
        let detail = decision
            .diagnostics
            .iter()
            .find(|d| d.contains("unsatisfied"))
            .cloned();
        Err((
            match detail {
                Some(detail) => format!("{reason} ({detail})"),
                None => reason,
            },
            decision.evidence.clone(),
        ))
    }

    /// Management request on an existing job. The owner may always act
    /// without an authorization callout; anyone else needs policy on the
    /// job-class resource.
    pub fn manage_job(
        &self,
        identity: &AkentiCertificate,
        handle: &str,
        action: JobAction,
    ) -> Result<ManageOutcome, ManageError> {
        if action == JobAction::Start {
            return Err(ManageError::InvalidTransition {
                state: "-".to_string(),
                action: "start".to_string(),
            });
        }
        let record = self
            .jobs
            .read()
            .unwrap()
            .get(handle)
            .cloned()
            .ok_or_else(|| ManageError::UnknownHandle(handle.to_string()))?;
        let mut record = record.lock().unwrap();
        let now = self.config.clock.now();
        self.tick_completion(&mut record, now);

        let requester = match self.verify_identity(identity) {
            Ok(subject) => subject,
            Err(reason) => {
                let actor = identity
                    .as_identity()
                    .map(|body| body.subject.clone())
                    .unwrap_or_else(|| record.owner.clone());
                record.history.push(HistoryEntry {
                    at: now,
                    action: action.name().to_string(),
                    actor,
                    outcome: "identity-rejected".to_string(),
                });
                return Err(ManageError::IdentityRejected(reason));
            }
        };

        if requester != record.owner {
            let request = CalloutRequest {
                requesting_user: requester.clone(),
                requesting_identity: Arc::new(identity.clone()),
                job_owner: record.owner.clone(),
                action,
                job_id: handle.to_string(),
                rsl: record.rsl.clone(),
            };
            let authz = match self.config.dispatcher.dispatch(GRAM_CALLOUT, &request) {
                Ok(decision) => self.require_allowed(&decision, action, &record.rsl),
                Err(e) => {
                    record.history.push(HistoryEntry {
                        at: now,
                        action: action.name().to_string(),
                        actor: requester,
                        outcome: "system-error".to_string(),
                    });
                    return Err(ManageError::AuthzSystemError(e.to_string()));
                }
            };
            if let Err((reason, evidence)) = authz {
                record.history.push(HistoryEntry {
                    at: now,
                    action: action.name().to_string(),
                    actor: requester,
                    outcome: format!("denied: {reason}"),
                });
                return Err(ManageError::AuthzDenied { reason, evidence });
            }
        }

        match transition(record.state, action) {
            Ok(next) => {
                if let Some(next) = next {
                    record.state = next;
                }
                let state = record.state;
                record.history.push(HistoryEntry {
                    at: now,
                    action: action.name().to_string(),
                    actor: requester,
                    outcome: state.name().to_string(),
                });
                Ok(ManageOutcome { state })
            }
            Err(()) => {
                let state = record.state;
                record.history.push(HistoryEntry {
                    at: now,
                    action: action.name().to_string(),
                    actor: requester,
                    outcome: "invalid-transition".to_string(),
                });
                Err(ManageError::InvalidTransition {
                    state: state.name().to_string(),
                    action: action.name().to_string(),
                })
            }
        }
    }

    /// Simulated completion: an Active job whose configured duration has
    /// elapsed is Done.
    fn tick_completion(&self, record: &mut JobRecord, now: DateTime<Utc>) {
        if let Some(duration) = self.config.simulated_duration_s {
            if record.state == JobState::Active
                && (now - record.started_at).num_seconds() >= duration
            {
                record.state = JobState::Done;
                let owner = record.owner.clone();
                record.history.push(HistoryEntry {
                    at: now,
                    action: "complete".to_string(),
                    actor: owner,
                    outcome: "Done".to_string(),
                });
            }
        }
    }

    pub fn job_snapshot(&self, handle: &str) -> Option<JobRecord> {
        let record = self.jobs.read().unwrap().get(handle).cloned()?;
        let mut record = record.lock().unwrap();
        let now = self.config.clock.now();
        self.tick_completion(&mut record, now);
        Some(record.clone())
    }

    pub fn job_count(&self) -> usize {
        self.jobs.read().unwrap().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_table_is_exact() {
        use JobAction::*;
        use JobState::*;
        let states = [Pending, Active, Suspended, Done, Failed, Canceled];
        let actions = [Cancel, Query, Signal, Suspend, Resume];
        for state in states {
            for action in actions {
                let result = transition(state, action);
                let expected_ok = match (state, action) {
                    (_, Query) => true,
                    (Pending | Active | Suspended, Cancel) => true,
                    (Active, Suspend) => true,
                    (Suspended, Resume) => true,
                    (Active, Signal) => true,
                    _ => false,
                };
                assert_eq!(result.is_ok(), expected_ok, "{state:?} {action:?}");
            }
        }
        assert_eq!(transition(Active, Cancel), Ok(Some(Canceled)));
        assert_eq!(transition(Active, Query), Ok(None));
        assert_eq!(transition(Suspended, Resume), Ok(Some(Active)));
        assert_eq!(transition(Active, Resume), Err(()));
    }

    #[test]
    fn residual_evaluation_with_clock_time() {
        use crate::constraint::parse_constraint;
        use crate::time::FixedClock;
        let clock = FixedClock::at_compact("030615180000Z").unwrap();
        let residual = parse_constraint("time>5pm").unwrap();
        let check = evaluate_residuals(&residual, &BTreeMap::new(), &clock);
        assert!(check.satisfied);

        let residual = parse_constraint("loadfactor < 5").unwrap();
        let check = evaluate_residuals(&residual, &BTreeMap::new(), &clock);
        assert!(!check.satisfied);
        assert!(check.reason.unwrap().contains("UnsatisfiableCondition"));

        let residual = parse_constraint("executable=TRANSP").unwrap();
        let mut ctx = BTreeMap::new();
        ctx.insert("executable".to_string(), "TRANSP".to_string());
        assert!(evaluate_residuals(&residual, &ctx, &clock).satisfied);
    }
}
