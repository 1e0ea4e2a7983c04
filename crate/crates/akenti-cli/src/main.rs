//! Command-line front end: certificate authoring and inspection, one-shot
//! authorization queries, the decision-service daemon, the scripted
//! scenario runner, and the policy linter.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use akenti::cert::{
    new_uid, parse_certificate, serialize_certificate, sign_certificate, validate_period,
    verify_signature, AkentiCertificate, AttrType, AttributeCert, AttributeInfo, CaInfo,
    CertAuthority, CertBody, CertHeader, CertKind, PeriodStatus, PolicyCert, Scope,
    UseConditionCert, CANON_ALG,
};
use akenti::config::{ServiceConfig, TRUSTED_ROOT_ENV};
use akenti::constraint::parse_constraint;
use akenti::engine::{PolicyEngine, RequestedActions};
use akenti::keys::{Credential, CryptoPolicy, DEFAULT_SIGNATURE_ALG};
use akenti::principal::Principal;
use akenti::resource::ResourcePath;
use akenti::service::{DecisionService, ServiceState};
use akenti::store::{CertStore, StdFetcher};
use akenti::time::{CompactTime, SystemClock};

#[derive(Parser)]
#[command(
    name = "akenti",
    version,
    about = "certificate-based authorization engine and grid job-management harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create, sign, inspect, and verify certificates.
    Cert {
        #[command(subcommand)]
        command: CertCommand,
    },
    /// Ask the decision engine what access a subject has.
    Authz(AuthzArgs),
    /// Run the decision-service daemon.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the scripted policy scenario against a fixture corpus.
    Scenario {
        dir: PathBuf,
        /// Generate the fixture corpus into the directory first.
        #[arg(long)]
        generate: bool,
    },
    /// Lint a certificate corpus for policy mistakes.
    Lint { dir: PathBuf },
}

#[derive(Subcommand)]
enum CertCommand {
    /// Generate a key pair bound to a principal.
    Keygen(KeygenArgs),
    /// Author a policy certificate.
    CreatePolicy(CreatePolicyArgs),
    /// Author a use-condition certificate.
    CreateUsecond(CreateUsecondArgs),
    /// Author an attribute certificate.
    CreateAttr(CreateAttrArgs),
    /// Issue an identity certificate from a CA key.
    CreateIdentity(CreateIdentityArgs),
    /// Sign a certificate file with a key file.
    Sign(SignArgs),
    /// Pretty-print a certificate file.
    Show { cert: PathBuf },
    /// Check signature and validity period.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct KeygenArgs {
    #[arg(long)]
    user_dn: String,
    #[arg(long)]
    ca_dn: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidityArgs {
    /// Validity start, YYMMDDHHMMSSZ; defaults to now.
    #[arg(long)]
    begin: Option<String>,
    /// Validity end, YYMMDDHHMMSSZ; defaults to begin + 10 years.
    #[arg(long)]
    end: Option<String>,
}

impl ValidityArgs {
    fn window(&self) -> Result<(CompactTime, CompactTime), String> {
        let begin = match &self.begin {
            Some(text) => CompactTime::parse(text).map_err(|e| e.to_string())?,
            None => CompactTime::from_datetime(chrono::Utc::now()),
        };
        let end = match &self.end {
            Some(text) => CompactTime::parse(text).map_err(|e| e.to_string())?,
            None => begin.plus_seconds(10 * 365 * 24 * 3600),
        };
        Ok((begin, end))
    }
}

#[derive(Args)]
struct IssuerArgs {
    /// Key file of the issuer; when present the certificate is signed.
    #[arg(long)]
    issuer_key: Option<PathBuf>,
    /// Issuer subject DN, for unsigned output without a key file.
    #[arg(long)]
    issuer_dn: Option<String>,
    /// Issuer CA DN, for unsigned output without a key file.
    #[arg(long)]
    issuer_ca_dn: Option<String>,
}

impl IssuerArgs {
    fn resolve(&self) -> Result<(Principal, Option<Credential>), String> {
        if let Some(path) = &self.issuer_key {
            let credential = Credential::load(path).map_err(|e| e.to_string())?;
            return Ok((credential.principal.clone(), Some(credential)));
        }
        match (&self.issuer_dn, &self.issuer_ca_dn) {
            (Some(dn), Some(ca)) => {
                Ok((Principal::parse(dn, ca).map_err(|e| e.to_string())?, None))
            }
            _ => Err("need --issuer-key, or --issuer-dn with --issuer-ca-dn".to_string()),
        }
    }
}

#[derive(Args)]
struct CreatePolicyArgs {
    #[arg(long)]
    resource: String,
    /// CA key file; its public half becomes the trusted CA key.
    #[arg(long)]
    ca_key: PathBuf,
    #[arg(long = "id-dir")]
    id_dirs: Vec<String>,
    #[arg(long = "crl-dir")]
    crl_dirs: Vec<String>,
    /// Stakeholder subject DN (certified by the same CA); repeatable.
    #[arg(long = "stakeholder", required = true)]
    stakeholders: Vec<String>,
    #[arg(long = "uc-dir")]
    uc_dirs: Vec<String>,
    #[arg(long = "attr-dir")]
    attr_dirs: Vec<String>,
    #[arg(long, default_value_t = 3600)]
    cache_time: u64,
    #[command(flatten)]
    validity: ValidityArgs,
    #[command(flatten)]
    issuer: IssuerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CreateUsecondArgs {
    #[arg(long)]
    resource: String,
    #[arg(long)]
    constraint: String,
    #[arg(long = "right", required = true)]
    rights: Vec<String>,
    /// `local` or `sub-tree`.
    #[arg(long, default_value = "local")]
    scope: String,
    #[arg(long)]
    critical: bool,
    /// AKENTI attribute declaration `name=value@<authority-dn>|<authority-ca-dn>`; repeatable.
    #[arg(long = "attr-info")]
    attr_infos: Vec<String>,
    #[arg(long = "attr-dir")]
    attr_dirs: Vec<String>,
    #[command(flatten)]
    validity: ValidityArgs,
    #[command(flatten)]
    issuer: IssuerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CreateAttrArgs {
    #[arg(long)]
    subject_dn: String,
    /// CA DN of the subject.
    #[arg(long)]
    ca_dn: String,
    #[arg(long)]
    name: String,
    #[arg(long)]
    value: String,
    #[command(flatten)]
    validity: ValidityArgs,
    #[command(flatten)]
    issuer: IssuerArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CreateIdentityArgs {
    #[arg(long)]
    subject_dn: String,
    /// Key file whose public half is certified.
    #[arg(long)]
    subject_key: PathBuf,
    /// CA key file that signs the identity.
    #[arg(long)]
    ca_key: PathBuf,
    #[command(flatten)]
    validity: ValidityArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SignArgs {
    cert: PathBuf,
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    cert: PathBuf,
    /// Key file of the expected signer.
    #[arg(long)]
    key: Option<PathBuf>,
    /// Identity certificate of the expected signer.
    #[arg(long)]
    identity: Option<PathBuf>,
    /// Evaluation instant, YYMMDDHHMMSSZ; defaults to now.
    #[arg(long)]
    now: Option<String>,
    /// Accept historical signature algorithm names.
    #[arg(long)]
    allow_legacy: bool,
}

#[derive(Args)]
struct AuthzArgs {
    /// Identity certificate of the subject.
    #[arg(long)]
    subject_identity: PathBuf,
    #[arg(long)]
    resource: String,
    /// Action to decide; repeatable. Without it every action is reported.
    #[arg(long = "action")]
    actions: Vec<String>,
    /// SYSTEM attribute `name=value`; repeatable.
    #[arg(long = "system")]
    system: Vec<String>,
    /// Directory holding the trusted root policy certificates; falls
    /// back to the AKENTI_TRUSTED_ROOT environment variable.
    #[arg(long)]
    root_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Cert { command } => cert_command(command),
        Command::Authz(args) => authz(args),
        Command::Serve { config } => serve(&config),
        Command::Scenario { dir, generate } => scenario(&dir, generate),
        Command::Lint { dir } => lint(&dir),
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| e.to_string()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn header_for(
    kind: CertKind,
    issuer: Principal,
    begin: CompactTime,
    end: CompactTime,
) -> CertHeader {
    let host = std::env::var("HOSTNAME").unwrap_or_else(|_| "localhost".to_string());
    CertHeader {
        kind,
        signature_alg: DEFAULT_SIGNATURE_ALG.to_string(),
        canon_alg: CANON_ALG.to_string(),
        version: "2".to_string(),
        uid: new_uid(&host, begin),
        issuer,
        validity_begin: begin,
        validity_end: end,
    }
}

fn emit_cert(
    kind: CertKind,
    body: CertBody,
    issuer: Principal,
    credential: Option<Credential>,
    begin: CompactTime,
    end: CompactTime,
    out: Option<&Path>,
) -> Result<ExitCode, String> {
    let header = header_for(kind, issuer, begin, end);
    let cert = match credential {
        Some(credential) => {
            sign_certificate(header, body, &credential).map_err(|e| e.to_string())?
        }
        None => {
            akenti::cert::validate(&header, &body).map_err(|e| e.to_string())?;
            AkentiCertificate {
                header,
                body,
                signature: None,
            }
        }
    };
    write_or_print(out, &serialize_certificate(&cert))?;
    Ok(ExitCode::SUCCESS)
}

fn cert_command(command: CertCommand) -> Result<ExitCode, String> {
    match command {
        CertCommand::Keygen(args) => {
            let principal =
                Principal::parse(&args.user_dn, &args.ca_dn).map_err(|e| e.to_string())?;
            let credential = Credential::generate(principal);
            credential.save(&args.out).map_err(|e| e.to_string())?;
            println!("wrote {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
        CertCommand::CreatePolicy(args) => {
            let ca = Credential::load(&args.ca_key).map_err(|e| e.to_string())?;
            let ca_dn = ca.principal.ca_dn.clone();
            let stakeholders: Vec<Principal> = args
                .stakeholders
                .iter()
                .map(|dn| Principal::parse(dn, ca_dn.as_str()))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let (issuer, credential) = args.issuer.resolve()?;
            let (begin, end) = args.validity.window()?;
            let body = CertBody::Policy(PolicyCert {
                resource_name: ResourcePath::parse(&args.resource).map_err(|e| e.to_string())?,
                ca_infos: vec![CaInfo {
                    ca_dn,
                    ca_public_key: ca.verifying_key(),
                    id_dirs: args.id_dirs,
                    crl_dirs: args.crl_dirs,
                }],
                uc_issuers: stakeholders,
                uc_dirs: args.uc_dirs,
                attr_dirs: args.attr_dirs,
                cache_time: args.cache_time,
            });
            emit_cert(
                CertKind::Policy,
                body,
                issuer,
                credential,
                begin,
                end,
                args.out.as_deref(),
            )
        }
        CertCommand::CreateUsecond(args) => {
            let scope = Scope::from_name(&args.scope)
                .ok_or_else(|| format!("scope must be local or sub-tree, got {:?}", args.scope))?;
            let constraint = parse_constraint(&args.constraint).map_err(|e| e.to_string())?;
            let mut infos = Vec::new();
            for spec in &args.attr_infos {
                infos.push(parse_attr_info(spec)?);
            }
            let (issuer, credential) = args.issuer.resolve()?;
            let (begin, end) = args.validity.window()?;
            let body = CertBody::UseCondition(UseConditionCert {
                critical: args.critical,
                scope,
                resource_name: ResourcePath::parse(&args.resource).map_err(|e| e.to_string())?,
                constraint_text: args.constraint.clone(),
                constraint,
                attribute_infos: infos,
                attr_dirs: args.attr_dirs,
                rights: args.rights.iter().cloned().collect(),
            });
            emit_cert(
                CertKind::UseCondition,
                body,
                issuer,
                credential,
                begin,
                end,
                args.out.as_deref(),
            )
        }
        CertCommand::CreateAttr(args) => {
            let subject =
                Principal::parse(&args.subject_dn, &args.ca_dn).map_err(|e| e.to_string())?;
            let (issuer, credential) = args.issuer.resolve()?;
            let (begin, end) = args.validity.window()?;
            let body = CertBody::Attribute(AttributeCert {
                subject,
                attr_name: args.name.clone(),
                attr_value: args.value.clone(),
            });
            emit_cert(
                CertKind::Attribute,
                body,
                issuer,
                credential,
                begin,
                end,
                args.out.as_deref(),
            )
        }
        CertCommand::CreateIdentity(args) => {
            let ca_cred = Credential::load(&args.ca_key).map_err(|e| e.to_string())?;
            let host = std::env::var("HOSTNAME").unwrap_or_else(|_| "localhost".to_string());
            let ca = CertAuthority::new(ca_cred, &host).map_err(|e| e.to_string())?;
            let subject =
                Principal::parse(&args.subject_dn, ca.dn().as_str()).map_err(|e| e.to_string())?;
            let subject_key = Credential::load(&args.subject_key)
                .map_err(|e| e.to_string())?
                .verifying_key();
            let (begin, end) = args.validity.window()?;
            let identity = ca
                .issue_identity(subject, subject_key, begin, end)
                .map_err(|e| e.to_string())?;
            write_or_print(args.out.as_deref(), &serialize_certificate(&identity))?;
            Ok(ExitCode::SUCCESS)
        }
        CertCommand::Sign(args) => {
            let text = std::fs::read_to_string(&args.cert).map_err(|e| e.to_string())?;
            let cert = parse_certificate(&text).map_err(|e| e.to_string())?;
            let credential = Credential::load(&args.key).map_err(|e| e.to_string())?;
            let signed =
                sign_certificate(cert.header, cert.body, &credential).map_err(|e| e.to_string())?;
            let out = args.out.as_deref().or(Some(args.cert.as_path()));
            write_or_print(out, &serialize_certificate(&signed))?;
            eprintln!("signed as {}", credential.principal);
            Ok(ExitCode::SUCCESS)
        }
        CertCommand::Show { cert } => {
            let text = std::fs::read_to_string(&cert).map_err(|e| e.to_string())?;
            let cert = parse_certificate(&text).map_err(|e| e.to_string())?;
            print!("{}", render_cert(&cert));
            Ok(ExitCode::SUCCESS)
        }
        CertCommand::Verify(args) => {
            let text = std::fs::read_to_string(&args.cert).map_err(|e| e.to_string())?;
            let cert = parse_certificate(&text).map_err(|e| e.to_string())?;
            let key = match (&args.key, &args.identity) {
                (Some(path), _) => Credential::load(path)
                    .map_err(|e| e.to_string())?
                    .verifying_key(),
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
                    let identity = parse_certificate(&text).map_err(|e| e.to_string())?;
                    identity
                        .as_identity()
                        .ok_or("--identity file is not an identity certificate")?
                        .public_key
                        .clone()
                }
                (None, None) => return Err("need --key or --identity for the signer".to_string()),
            };
            let crypto = CryptoPolicy {
                allow_legacy_names: args.allow_legacy,
            };
            let signature_ok = verify_signature(&cert, &key, &crypto).map_err(|e| e.to_string())?;
            if !signature_ok {
                println!("INVALID: signature");
                return Ok(ExitCode::from(1));
            }
            let now = match &args.now {
                Some(text) => CompactTime::parse(text).map_err(|e| e.to_string())?.datetime(),
                None => chrono::Utc::now(),
            };
            match validate_period(&cert, now) {
                PeriodStatus::Valid => {
                    println!("VALID");
                    Ok(ExitCode::SUCCESS)
                }
                PeriodStatus::Expired => {
                    println!("INVALID: expired");
                    Ok(ExitCode::from(1))
                }
                PeriodStatus::NotYetValid => {
                    println!("INVALID: not yet valid");
                    Ok(ExitCode::from(1))
                }
            }
        }
    }
}

/// `name=value@<authority-dn>|<authority-ca-dn>`
fn parse_attr_info(spec: &str) -> Result<AttributeInfo, String> {
    let (pair, authority) = spec
        .split_once('@')
        .ok_or_else(|| format!("bad --attr-info {spec:?}: missing @authority"))?;
    let (name, value) = pair
        .split_once('=')
        .ok_or_else(|| format!("bad --attr-info {spec:?}: missing name=value"))?;
    let (user_dn, ca_dn) = authority
        .split_once('|')
        .ok_or_else(|| format!("bad --attr-info {spec:?}: authority must be <dn>|<ca-dn>"))?;
    Ok(AttributeInfo {
        attr_type: AttrType::Akenti,
        attr_name: name.to_string(),
        attr_value: value.to_string(),
        authorities: vec![Principal::parse(user_dn, ca_dn).map_err(|e| e.to_string())?],
    })
}

fn render_cert(cert: &AkentiCertificate) -> String {
    let mut out = String::new();
    let header = &cert.header;
    out.push_str(&format!("Type:      {}\n", header.kind.name()));
    out.push_str(&format!("UID:       {}\n", header.uid));
    out.push_str(&format!("Issuer:    {}\n", header.issuer));
    out.push_str(&format!(
        "Validity:  {} .. {}\n",
        header.validity_begin, header.validity_end
    ));
    out.push_str(&format!(
        "Signature: {} ({})\n",
        if cert.signature.is_some() {
            "present"
        } else {
            "absent"
        },
        header.signature_alg
    ));
    match &cert.body {
        CertBody::Policy(p) => {
            out.push_str(&format!("Resource:  {}\n", p.resource_name));
            out.push_str(&format!("CacheTime: {}\n", p.cache_time));
            for ca in &p.ca_infos {
                out.push_str(&format!("CA:        {}\n", ca.ca_dn));
                for dir in &ca.id_dirs {
                    out.push_str(&format!("  id dir:  {dir}\n"));
                }
                for dir in &ca.crl_dirs {
                    out.push_str(&format!("  crl dir: {dir}\n"));
                }
            }
            for stakeholder in &p.uc_issuers {
                out.push_str(&format!("Stakeholder: {stakeholder}\n"));
            }
            for dir in &p.uc_dirs {
                out.push_str(&format!("UC dir:    {dir}\n"));
            }
            for dir in &p.attr_dirs {
                out.push_str(&format!("Attr dir:  {dir}\n"));
            }
        }
        CertBody::UseCondition(u) => {
            out.push_str(&format!("Resource:  {}\n", u.resource_name));
            out.push_str(&format!(
                "Scope:     {}{}\n",
                u.scope.name(),
                if u.critical { " (critical)" } else { "" }
            ));
            out.push_str(&format!("Constraint: {}\n", u.constraint_text));
            for info in &u.attribute_infos {
                out.push_str(&format!(
                    "Attribute: [{}] {} = {}\n",
                    info.attr_type.name(),
                    info.attr_name,
                    info.attr_value
                ));
                for authority in &info.authorities {
                    out.push_str(&format!("  authority: {authority}\n"));
                }
            }
            let rights: Vec<&str> = u.rights.iter().map(String::as_str).collect();
            out.push_str(&format!("Rights:    {}\n", rights.join(" ")));
        }
        CertBody::Attribute(a) => {
            out.push_str(&format!("Subject:   {}\n", a.subject));
            out.push_str(&format!("Attribute: {} = {}\n", a.attr_name, a.attr_value));
        }
        CertBody::Capability(c) => {
            out.push_str(&format!("Subject:   {}\n", c.subject));
            out.push_str(&format!("Resource:  {}\n", c.resource_name));
            let granted: Vec<&str> = c.granted_actions.iter().map(String::as_str).collect();
            out.push_str(&format!("Granted:   {}\n", granted.join(" ")));
            for (action, residual) in &c.conditional_actions {
                out.push_str(&format!("Conditional: {action} if {residual}\n"));
            }
        }
        CertBody::Identity(id) => {
            out.push_str(&format!("Subject:   {}\n", id.subject));
            out.push_str(&format!("PublicKey: {}\n", id.public_key.to_base64()));
        }
        CertBody::Revocation(r) => {
            for uid in &r.revoked_uids {
                out.push_str(&format!("Revoked UID: {uid}\n"));
            }
            for dn in &r.revoked_dns {
                out.push_str(&format!("Revoked DN:  {dn}\n"));
            }
        }
    }
    out
}

fn authz(args: AuthzArgs) -> Result<ExitCode, String> {
    let identity_text =
        std::fs::read_to_string(&args.subject_identity).map_err(|e| e.to_string())?;
    let identity = match parse_certificate(&identity_text) {
        Ok(identity) => identity,
        Err(e) => {
            eprintln!("system failure: {e}");
            return Ok(ExitCode::from(3));
        }
    };
    let Some(subject) = identity.as_identity().map(|id| id.subject.clone()) else {
        eprintln!("system failure: not an identity certificate");
        return Ok(ExitCode::from(3));
    };
    let resource = ResourcePath::parse(&args.resource).map_err(|e| e.to_string())?;
    let requested = if args.actions.is_empty() {
        RequestedActions::All
    } else {
        RequestedActions::Only(args.actions.iter().cloned().collect())
    };
    let mut system = BTreeMap::new();
    for pair in &args.system {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| format!("bad --system {pair:?}: expected name=value"))?;
        system.insert(k.to_string(), v.to_string());
    }

    let root_dir = args
        .root_dir
        .clone()
        .or_else(|| std::env::var(TRUSTED_ROOT_ENV).ok().map(PathBuf::from))
        .ok_or_else(|| format!("need --root-dir or {TRUSTED_ROOT_ENV}"))?;
    let store = Arc::new(CertStore::new(Arc::new(StdFetcher), Arc::new(SystemClock)));
    let engine = PolicyEngine::new(store, &root_dir);
    let decision = match engine.authorize(&subject, &identity, &resource, &requested, &system) {
        Ok(decision) => decision,
        Err(e) => {
            eprintln!("system failure: {e}");
            return Ok(ExitCode::from(3));
        }
    };
    for action in &decision.granted {
        println!("GRANTED {action}");
    }
    for (action, residual) in &decision.conditional {
        println!("CONDITIONAL {action}: {}", residual.pretty());
    }
    if decision.is_denied() {
        let reason = decision
            .denied_reason
            .as_ref()
            .map(|r| r.to_string())
            .unwrap_or_else(|| "denied".to_string());
        match &requested {
            RequestedActions::Only(actions) => {
                for action in actions {
                    println!("DENIED {action}: {reason}");
                }
            }
            RequestedActions::All => println!("DENIED: {reason}"),
        }
    }
    if !decision.evidence.is_empty() {
        println!("evidence: {}", decision.evidence.join(" "));
    }
    if decision.is_denied() {
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn serve(config_path: &Path) -> Result<ExitCode, String> {
    let config = ServiceConfig::load(config_path).map_err(|e| e.to_string())?;
    config.validate_trusted_root().map_err(|e| e.to_string())?;
    let credential = Arc::new(Credential::load(&config.engine_key).map_err(|e| e.to_string())?);
    let store = Arc::new(CertStore::new(Arc::new(StdFetcher), Arc::new(SystemClock)));
    let engine = Arc::new(PolicyEngine::new(store, &config.trusted_root_dir));
    let state =
        ServiceState::new(engine, credential).with_capability_lifetime(config.capability_lifetime_s);
    let service = DecisionService::spawn(&config.listen, state).map_err(|e| e.to_string())?;
    println!("listening on {}", service.addr());
    loop {
        std::thread::sleep(std::time::Duration::from_secs(3600));
    }
}

fn scenario(dir: &Path, generate: bool) -> Result<ExitCode, String> {
    if generate {
        akenti::scenario::generate(dir).map_err(|e| e.to_string())?;
        println!("generated fixture corpus in {}", dir.display());
    }
    let report = akenti::scenario::run(dir).map_err(|e| e.to_string())?;
    print!("{}", report.render());
    if report.all_passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn lint(dir: &Path) -> Result<ExitCode, String> {
    let diagnostics = akenti::lint::lint_corpus_dir(dir).map_err(|e| e.to_string())?;
    if diagnostics.is_empty() {
        println!("no findings");
        return Ok(ExitCode::SUCCESS);
    }
    for diagnostic in &diagnostics {
        let uid = diagnostic
            .cert_uid
            .as_deref()
            .map(|uid| format!(" [{uid}]"))
            .unwrap_or_default();
        println!(
            "{}: {}{}: {}",
            diagnostic.severity.name(),
            diagnostic.code,
            uid,
            diagnostic.message
        );
    }
    Ok(ExitCode::SUCCESS)
}
