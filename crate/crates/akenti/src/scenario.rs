//! End-to-end scenario: generates the two-level TRANSP policy corpus —
//! one CA, four user groups (general, clients, developers,
//! administrators), executable and job-class resources — then scripts
//! submissions and management actions against the full harness and
//! reports expected versus actual outcomes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::cert::{
    new_uid, serialize_certificate, sign_certificate, AkentiCertificate, AttrType, AttributeCert,
    AttributeInfo, CaInfo, CertAuthority, CertBody, CertHeader, CertKind, PolicyCert, Scope,
    UseConditionCert, CANON_ALG,
};
use crate::constraint::parse_constraint;
use crate::engine::PolicyEngine;
use crate::gram::{
    CalloutDispatcher, CalloutRegistry, ExecMap, GridMap, JobAction, JobManager, JobManagerConfig,
    ManageError, SubmitError,
};
use crate::keys::Credential;
use crate::principal::Principal;
use crate::resource::ResourcePath;
use crate::store::{CertStore, Fetcher, StdFetcher};
use crate::time::{CompactTime, FixedClock};

pub const CA_DN: &str = "/DC=net/DC=es/OU=Certificate Authorities/OU=DOE Science Grid/CN=pk1";
pub const MARY_DN: &str = "/O=doesciencegrid.org/OU=People/CN=Mary R. Thompson";
pub const LEW_DN: &str = "/O=doesciencegrid.org/OU=People/CN=Lew Randerson";
pub const DEVELOPER_DN: &str = "/O=doesciencegrid.org/OU=People/CN=Devon Park";
pub const ADMIN_DN: &str = "/O=doesciencegrid.org/OU=People/CN=Alex Ruiz";
pub const STRANGER_DN: &str = "/O=doesciencegrid.org/OU=People/CN=Sam Visitor";
pub const ENGINE_DN: &str = "/O=doesciencegrid.org/OU=Services/CN=authz-engine";

const VALID_FROM: &str = "020101000000Z";
const VALID_UNTIL: &str = "490101000000Z";
/// Scenario clock baseline: a mid-validity weekday noon.
pub const SCENARIO_EPOCH: &str = "030615120000Z";

const PRODUCTION_CODE: &str = "/p/fusiongrid/trpstart";
const DEVELOPMENT_CODE: &str = "/p/fusiongrid/new/trpstart";
const TEST_UTILITY: &str = "/bin/date";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("missing fixture: {0}")]
    MissingFixture(String),
    #[error("fixture io: {0}")]
    Io(String),
    #[error("fixture generation: {0}")]
    Generate(String),
    #[error("harness: {0}")]
    Harness(String),
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        ScenarioError::Io(e.to_string())
    }
}

/// Paths of one generated corpus.
pub struct Fixture {
    pub dir: PathBuf,
}

impl Fixture {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Fixture { dir: dir.into() }
    }

    pub fn policy_dir(&self) -> PathBuf {
        self.dir.join("policy")
    }

    pub fn certs_dir(&self) -> PathBuf {
        self.dir.join("certs")
    }

    pub fn id_dir(&self) -> PathBuf {
        self.dir.join("idCerts")
    }

    pub fn crl_dir(&self) -> PathBuf {
        self.dir.join("crl")
    }

    pub fn keys_dir(&self) -> PathBuf {
        self.dir.join("keys")
    }

    pub fn grid_mapfile(&self) -> PathBuf {
        self.dir.join("grid-mapfile")
    }

    pub fn resource_map(&self) -> PathBuf {
        self.dir.join("resource.map")
    }

    pub fn callout_conf(&self) -> PathBuf {
        self.dir.join("callouts.conf")
    }

    pub fn key_path(&self, who: &str) -> PathBuf {
        self.keys_dir().join(format!("{who}.key"))
    }

    fn url(&self, sub: &str) -> String {
        format!("file:{}", self.dir.join(sub).display())
    }

    /// Loads the identity certificate for `user_dn` from the corpus.
    pub fn identity(&self, user_dn: &str) -> Result<AkentiCertificate, ScenarioError> {
        let dir = self.id_dir();
        let entries = std::fs::read_dir(&dir)
            .map_err(|_| ScenarioError::MissingFixture(dir.display().to_string()))?;
        for entry in entries.filter_map(|e| e.ok()) {
            let Ok(text) = std::fs::read_to_string(entry.path()) else { continue };
            let Ok(cert) = crate::cert::parse_certificate(&text) else { continue };
            if cert
                .as_identity()
                .is_some_and(|id| id.subject.user_dn.as_str() == user_dn)
            {
                return Ok(cert);
            }
        }
        Err(ScenarioError::MissingFixture(format!(
            "identity certificate for {user_dn}"
        )))
    }
}

fn principal(user_dn: &str) -> Principal {
    Principal::parse(user_dn, CA_DN).expect("fixture DNs are valid")
}

fn window() -> (CompactTime, CompactTime) {
    (
        CompactTime::parse(VALID_FROM).unwrap(),
        CompactTime::parse(VALID_UNTIL).unwrap(),
    )
}

fn header(kind: CertKind, issuer: Principal) -> CertHeader {
    let (begin, end) = window();
    CertHeader {
        kind,
        signature_alg: crate::keys::DEFAULT_SIGNATURE_ALG.to_string(),
        canon_alg: CANON_ALG.to_string(),
        version: "2".to_string(),
        uid: new_uid("rocky.lbl.gov", begin),
        issuer,
        validity_begin: begin,
        validity_end: end,
    }
}

fn write_signed(
    path: &Path,
    kind: CertKind,
    body: CertBody,
    signer: &Credential,
) -> Result<(), ScenarioError> {
    let cert = sign_certificate(header(kind, signer.principal.clone()), body, signer)
        .map_err(|e| ScenarioError::Generate(e.to_string()))?;
    std::fs::write(path, serialize_certificate(&cert))?;
    Ok(())
}

fn akenti_info(name: &str, value: &str, authority: &Principal) -> AttributeInfo {
    AttributeInfo {
        attr_type: AttrType::Akenti,
        attr_name: name.to_string(),
        attr_value: value.to_string(),
        authorities: vec![authority.clone()],
    }
}

fn use_condition(
    resource: &str,
    constraint_text: &str,
    rights: &[&str],
    scope: Scope,
    critical: bool,
    infos: Vec<AttributeInfo>,
) -> CertBody {
    CertBody::UseCondition(UseConditionCert {
        critical,
        scope,
        resource_name: ResourcePath::parse(resource).unwrap(),
        constraint_text: constraint_text.to_string(),
        constraint: parse_constraint(constraint_text).unwrap(),
        attribute_infos: infos,
        attr_dirs: Vec::new(),
        rights: rights.iter().map(|s| s.to_string()).collect(),
    })
}

/// Builds the complete corpus under `dir`: keys, identities, the root
/// policy, the per-resource use-conditions, group attribute certificates,
/// the grid-mapfile, the executable mapping, and the callout config.
pub fn generate(dir: &Path) -> Result<Fixture, ScenarioError> {
    let fixture = Fixture::new(dir);
    for sub in ["policy", "certs", "idCerts", "crl", "keys"] {
        std::fs::create_dir_all(dir.join(sub))?;
    }

    let ca_cred = Credential::generate(Principal::parse(CA_DN, CA_DN).unwrap());
    let ca = CertAuthority::new(ca_cred, "rocky.lbl.gov")
        .map_err(|e| ScenarioError::Generate(e.to_string()))?;
    let (begin, end) = window();

    let people = [
        ("mary", MARY_DN),
        ("lew", LEW_DN),
        ("developer", DEVELOPER_DN),
        ("admin", ADMIN_DN),
        ("stranger", STRANGER_DN),
        ("engine", ENGINE_DN),
    ];
    let mut credentials = BTreeMap::new();
    for (who, dn) in people {
        let cred = Credential::generate(principal(dn));
        let identity = ca
            .issue_identity(cred.principal.clone(), cred.verifying_key(), begin, end)
            .map_err(|e| ScenarioError::Generate(e.to_string()))?;
        std::fs::write(
            fixture.id_dir().join(format!("{who}.xml")),
            serialize_certificate(&identity),
        )?;
        cred.save(&fixture.key_path(who))
            .map_err(|e| ScenarioError::Generate(e.to_string()))?;
        credentials.insert(who, cred);
    }
    ca.trusted_ca();
    let ca_key_cred = Credential::generate(Principal::parse(CA_DN, CA_DN).unwrap());
    // Persist the CA credential actually used for issuing, not a fresh one.
    drop(ca_key_cred);

    let mary = &credentials["mary"];
    let lew = &credentials["lew"];
    let lew_principal = lew.principal.clone();

    let policy = CertBody::Policy(PolicyCert {
        resource_name: ResourcePath::parse("TRANSP").unwrap(),
        ca_infos: vec![CaInfo {
            ca_dn: ca.dn().clone(),
            ca_public_key: ca.trusted_ca().key,
            id_dirs: vec![fixture.url("idCerts")],
            crl_dirs: vec![fixture.url("crl")],
        }],
        uc_issuers: vec![mary.principal.clone(), lew_principal.clone()],
        uc_dirs: vec![fixture.url("certs")],
        attr_dirs: vec![fixture.url("certs")],
        cache_time: 3600,
    });
    write_signed(
        &fixture.policy_dir().join("transp.xml"),
        CertKind::Policy,
        policy,
        mary,
    )?;

    write_signed(
        &fixture.certs_dir().join("uc-test.xml"),
        CertKind::UseCondition,
        use_condition(
            "TRANSP/test",
            "group = general || group = clients",
            &["start"],
            Scope::Local,
            false,
            vec![
                akenti_info("group", "general", &lew_principal),
                akenti_info("group", "clients", &lew_principal),
            ],
        ),
        mary,
    )?;
    write_signed(
        &fixture.certs_dir().join("uc-production.xml"),
        CertKind::UseCondition,
        use_condition(
            "TRANSP/production",
            "group = clients",
            &["start"],
            Scope::SubTree,
            false,
            vec![akenti_info("group", "clients", &lew_principal)],
        ),
        mary,
    )?;
    write_signed(
        &fixture.certs_dir().join("uc-development.xml"),
        CertKind::UseCondition,
        use_condition(
            "TRANSP/development",
            "role=developer && (time>5pm || time<8am)",
            &["start"],
            Scope::Local,
            false,
            vec![akenti_info("role", "developer", &lew_principal)],
        ),
        mary,
    )?;
    write_signed(
        &fixture.certs_dir().join("uc-jobs.xml"),
        CertKind::UseCondition,
        use_condition(
            "TRANSP/jobs",
            "group = administrators",
            &["cancel", "query", "signal", "suspend", "resume"],
            Scope::SubTree,
            false,
            vec![akenti_info("group", "administrators", &lew_principal)],
        ),
        mary,
    )?;

    // Group membership, asserted by the one trusted attribute authority.
    // The production constraint says `clients`; the certificate says
    // `Clients` - values match case-insensitively.
    let attributes = [
        ("attr-mary-group.xml", MARY_DN, "group", "Clients"),
        ("attr-developer-role.xml", DEVELOPER_DN, "role", "developer"),
        ("attr-admin-group.xml", ADMIN_DN, "group", "administrators"),
    ];
    for (file, subject_dn, name, value) in attributes {
        write_signed(
            &fixture.certs_dir().join(file),
            CertKind::Attribute,
            CertBody::Attribute(AttributeCert {
                subject: principal(subject_dn),
                attr_name: name.to_string(),
                attr_value: value.to_string(),
            }),
            lew,
        )?;
    }

    std::fs::write(
        fixture.grid_mapfile(),
        format!(
            "# grid identities admitted to this site\n\
             \"{MARY_DN}\" mrt\n\
             \"{DEVELOPER_DN}\" dev1\n\
             \"{ADMIN_DN}\" adm1\n\
             \"{STRANGER_DN}\" guest1\n"
        ),
    )?;
    std::fs::write(
        fixture.resource_map(),
        format!(
            "{TEST_UTILITY} TRANSP/test\n\
             /bin/sleep TRANSP/test\n\
             {PRODUCTION_CODE} TRANSP/production\n\
             /p/fusiongrid/trspkill TRANSP/production\n\
             {DEVELOPMENT_CODE} TRANSP/development\n\
             jobclass TRANSP/jobs\n"
        ),
    )?;
    std::fs::write(
        fixture.callout_conf(),
        "callout gram_authorization builtin:akenti\n",
    )?;
    Ok(fixture)
}

/// Adds a use-condition nobody satisfies, marked critical, scoped over
/// the whole TRANSP subtree.
pub fn write_unsatisfied_critical_uc(dir: &Path) -> Result<(), ScenarioError> {
    let fixture = Fixture::new(dir);
    let mary = Credential::load(&fixture.key_path("mary"))
        .map_err(|e| ScenarioError::MissingFixture(e.to_string()))?;
    let lew = Credential::load(&fixture.key_path("lew"))
        .map_err(|e| ScenarioError::MissingFixture(e.to_string()))?;
    write_signed(
        &fixture.certs_dir().join("uc-critical.xml"),
        CertKind::UseCondition,
        use_condition(
            "TRANSP",
            "group = emergency-lockdown",
            &["start"],
            Scope::SubTree,
            true,
            vec![akenti_info("group", "emergency-lockdown", &lew.principal)],
        ),
        &mary,
    )
}

/// The assembled enforcement-plus-decision harness over a fixture.
pub struct Harness {
    pub fixture: Fixture,
    pub clock: Arc<FixedClock>,
    pub engine: Arc<PolicyEngine>,
    pub manager: JobManager,
}

impl Harness {
    pub fn build(dir: &Path) -> Result<Harness, ScenarioError> {
        Harness::build_with_fetcher(dir, Arc::new(StdFetcher))
    }

    pub fn build_with_fetcher(
        dir: &Path,
        fetcher: Arc<dyn Fetcher>,
    ) -> Result<Harness, ScenarioError> {
        let fixture = Fixture::new(dir);
        for required in [
            fixture.policy_dir(),
            fixture.certs_dir(),
            fixture.id_dir(),
            fixture.grid_mapfile(),
            fixture.resource_map(),
            fixture.callout_conf(),
        ] {
            if !required.exists() {
                return Err(ScenarioError::MissingFixture(required.display().to_string()));
            }
        }
        let clock = Arc::new(FixedClock::at_compact(SCENARIO_EPOCH).unwrap());
        let store = Arc::new(CertStore::new(fetcher, clock.clone()));
        let engine = Arc::new(
            PolicyEngine::new(store.clone(), fixture.policy_dir()).with_host("rocky.lbl.gov"),
        );

        let grid_map = GridMap::parse(&std::fs::read_to_string(fixture.grid_mapfile())?)
            .map_err(|e| ScenarioError::Harness(e.to_string()))?;
        let exec_map = ExecMap::parse(&std::fs::read_to_string(fixture.resource_map())?)
            .map_err(|e| ScenarioError::Harness(e.to_string()))?;
        let registry = CalloutRegistry::parse(&std::fs::read_to_string(fixture.callout_conf())?)
            .map_err(|e| ScenarioError::Harness(e.to_string()))?;
        let dispatcher = Arc::new(CalloutDispatcher::new(
            registry,
            exec_map,
            Some(engine.clone()),
        ));
        let transp = ResourcePath::parse("TRANSP").unwrap();
        let (trusted_cas, crl_dirs, cache_ttl) = engine
            .trust_anchors(&transp)
            .map_err(|e| ScenarioError::Harness(e.to_string()))?;
        let manager = JobManager::new(JobManagerConfig {
            grid_map,
            dispatcher,
            store,
            trusted_cas,
            crl_dirs,
            cache_ttl,
            clock: clock.clone(),
            host: "gatekeeper.fusiongrid.org".to_string(),
            simulated_duration_s: None,
        });
        Ok(Harness {
            fixture,
            clock,
            engine,
            manager,
        })
    }

    pub fn callout_count(&self) -> u64 {
        self.manager.dispatcher().call_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Allowed,
    Denied,
}

impl Expectation {
    pub fn name(&self) -> &'static str {
        match self {
            Expectation::Allowed => "ALLOWED",
            Expectation::Denied => "DENIED",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub name: String,
    pub expected: Expectation,
    pub actual: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioReport {
    pub steps: Vec<StepResult>,
}

impl ScenarioReport {
    pub fn all_passed(&self) -> bool {
        self.steps.iter().all(|step| step.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&format!(
                "{} {:<46} expected={:<7} actual={}\n",
                if step.pass { "PASS" } else { "FAIL" },
                step.name,
                step.expected.name(),
                step.actual
            ));
        }
        let (passed, total) = (
            self.steps.iter().filter(|s| s.pass).count(),
            self.steps.len(),
        );
        out.push_str(&format!("{passed}/{total} steps passed\n"));
        out
    }

    fn record_submit(
        &mut self,
        name: &str,
        expected: Expectation,
        result: &Result<String, SubmitError>,
    ) {
        let (actual, allowed) = match result {
            Ok(handle) => (format!("ALLOWED ({handle})"), true),
            Err(e) => (format!("DENIED ({e})"), false),
        };
        self.steps.push(StepResult {
            name: name.to_string(),
            expected,
            actual,
            pass: allowed == (expected == Expectation::Allowed),
        });
    }

    fn record_manage(
        &mut self,
        name: &str,
        expected: Expectation,
        result: &Result<crate::gram::ManageOutcome, ManageError>,
    ) {
        let (actual, allowed) = match result {
            Ok(outcome) => (format!("ALLOWED (state {})", outcome.state.name()), true),
            Err(e) => (format!("DENIED ({e})"), false),
        };
        self.steps.push(StepResult {
            name: name.to_string(),
            expected,
            actual,
            pass: allowed == (expected == Expectation::Allowed),
        });
    }

    fn record_check(&mut self, name: &str, pass: bool, actual: String) {
        self.steps.push(StepResult {
            name: name.to_string(),
            expected: Expectation::Allowed,
            actual,
            pass,
        });
    }
}

/// Runs the scripted scenario against an intact corpus.
pub fn run(dir: &Path) -> Result<ScenarioReport, ScenarioError> {
    let harness = Harness::build(dir)?;
    let mut report = ScenarioReport::default();

    let mary_id = harness.fixture.identity(MARY_DN)?;
    let developer_id = harness.fixture.identity(DEVELOPER_DN)?;
    let admin_id = harness.fixture.identity(ADMIN_DN)?;
    let stranger_id = harness.fixture.identity(STRANGER_DN)?;

    // Production code: clients may start it, strangers may not.
    let mary_job = harness
        .manager
        .submit_job(&mary_id, &format!("&(executable={PRODUCTION_CODE})(count=4)"));
    report.record_submit("mary starts production code", Expectation::Allowed, &mary_job);
    if let Ok(handle) = &mary_job {
        let tag = harness
            .manager
            .job_snapshot(handle)
            .map(|job| job.jobtag)
            .unwrap_or_default();
        report.record_check(
            "job falls into the default job class",
            tag == crate::gram::DEFAULT_JOBTAG,
            format!("jobtag={tag}"),
        );
    }
    let stranger_try = harness
        .manager
        .submit_job(&stranger_id, &format!("&(executable={PRODUCTION_CODE})"));
    report.record_submit("stranger starts production code", Expectation::Denied, &stranger_try);

    // Development code: developers, outside working hours only.
    harness.clock.set_time_of_day(18 * 60 + 30);
    let evening = harness
        .manager
        .submit_job(&developer_id, &format!("&(executable={DEVELOPMENT_CODE})"));
    report.record_submit(
        "developer starts development code at 18:30",
        Expectation::Allowed,
        &evening,
    );
    harness.clock.set_time_of_day(12 * 60);
    let midday = harness
        .manager
        .submit_job(&developer_id, &format!("&(executable={DEVELOPMENT_CODE})"));
    report.record_submit(
        "developer starts development code at 12:00",
        Expectation::Denied,
        &midday,
    );
    if let Err(e) = &midday {
        report.record_check(
            "midday denial reports the time condition",
            e.to_string().contains("time"),
            format!("message: {e}"),
        );
    }

    // Job management: administrators control other users' jobs, other
    // non-owners do not.
    if let Ok(handle) = &mary_job {
        let developer_cancel = harness
            .manager
            .manage_job(&developer_id, handle, JobAction::Cancel);
        report.record_manage(
            "developer cancels mary's job",
            Expectation::Denied,
            &developer_cancel,
        );
        let admin_cancel = harness.manager.manage_job(&admin_id, handle, JobAction::Cancel);
        report.record_manage("administrator cancels mary's job", Expectation::Allowed, &admin_cancel);
    }

    // Owner operations never consult the decision engine.
    let mary_test_job = harness
        .manager
        .submit_job(&mary_id, &format!("&(executable={TEST_UTILITY})(jobtag=testing)"));
    report.record_submit("mary starts a test utility", Expectation::Allowed, &mary_test_job);
    if let Ok(handle) = &mary_test_job {
        let before = harness.callout_count();
        let query = harness.manager.manage_job(&mary_id, handle, JobAction::Query);
        report.record_manage("mary queries her own job", Expectation::Allowed, &query);
        let cancel = harness.manager.manage_job(&mary_id, handle, JobAction::Cancel);
        report.record_manage("mary cancels her own job", Expectation::Allowed, &cancel);
        let delta = harness.callout_count() - before;
        report.record_check(
            "owner operations made zero authorization callouts",
            delta == 0,
            format!("callouts during owner operations: {delta}"),
        );
    }
    Ok(report)
}

/// Criterion run for critical semantics: establishes a running job, adds
/// one unsatisfied critical condition over the whole subtree, and expects
/// every previously policy-granted step to deny.
pub fn run_critical_variant(dir: &Path) -> Result<ScenarioReport, ScenarioError> {
    let harness = Harness::build(dir)?;
    let mut report = ScenarioReport::default();

    let mary_id = harness.fixture.identity(MARY_DN)?;
    let developer_id = harness.fixture.identity(DEVELOPER_DN)?;
    let admin_id = harness.fixture.identity(ADMIN_DN)?;

    let mary_job = harness
        .manager
        .submit_job(&mary_id, &format!("&(executable={PRODUCTION_CODE})"));
    report.record_submit(
        "mary starts production code before the lockdown",
        Expectation::Allowed,
        &mary_job,
    );

    write_unsatisfied_critical_uc(dir)?;
    // Step past the policy cache so the new condition is visible.
    harness.clock.advance_seconds(3601);

    let mary_retry = harness
        .manager
        .submit_job(&mary_id, &format!("&(executable={PRODUCTION_CODE})"));
    report.record_submit(
        "mary starts production code under lockdown",
        Expectation::Denied,
        &mary_retry,
    );
    harness.clock.set_time_of_day(18 * 60 + 30);
    let evening = harness
        .manager
        .submit_job(&developer_id, &format!("&(executable={DEVELOPMENT_CODE})"));
    report.record_submit(
        "developer starts development code at 18:30 under lockdown",
        Expectation::Denied,
        &evening,
    );
    let mary_test = harness
        .manager
        .submit_job(&mary_id, &format!("&(executable={TEST_UTILITY})"));
    report.record_submit(
        "mary starts a test utility under lockdown",
        Expectation::Denied,
        &mary_test,
    );
    if let Ok(handle) = &mary_job {
        let admin_cancel = harness.manager.manage_job(&admin_id, handle, JobAction::Cancel);
        report.record_manage(
            "administrator cancels mary's job under lockdown",
            Expectation::Denied,
            &admin_cancel,
        );
    }
    Ok(report)
}
