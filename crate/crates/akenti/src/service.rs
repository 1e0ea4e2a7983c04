//! The decision-service daemon: accepts connections, answers one JSON
//! response line per JSON request line, and optionally packages grants
//! as capability certificates. A malformed line gets an error response
//! and the connection stays open.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crate::cert::{parse_certificate, serialize_certificate};
use crate::engine::{PolicyEngine, RequestedActions, DEFAULT_CAPABILITY_LIFETIME};
use crate::keys::Credential;
use crate::principal::Principal;
use crate::resource::ResourcePath;
use crate::wire::{Actions, Request, Response};

/// Everything one request needs besides the request itself.
pub struct ServiceState {
    pub engine: Arc<PolicyEngine>,
    pub credential: Arc<Credential>,
    pub capability_lifetime_s: u64,
}

impl ServiceState {
    pub fn new(engine: Arc<PolicyEngine>, credential: Arc<Credential>) -> Self {
        ServiceState {
            engine,
            credential,
            capability_lifetime_s: DEFAULT_CAPABILITY_LIFETIME,
        }
    }

    pub fn with_capability_lifetime(mut self, seconds: u64) -> Self {
        self.capability_lifetime_s = seconds;
        self
    }
}

/// Decides one request line. Never panics on input: every failure maps
/// to a response with an error field.
pub fn handle_request_line(line: &str, state: &ServiceState) -> Response {
    let request: Request = match serde_json::from_str(line) {
        Ok(request) => request,
        Err(_) => return Response::system_error("parse"),
    };
    handle_request(&request, state)
}

pub fn handle_request(request: &Request, state: &ServiceState) -> Response {
    let subject = match Principal::parse(&request.subject_dn, &request.subject_ca_dn) {
        Ok(subject) => subject,
        Err(e) => return Response::system_error(format!("bad subject: {e}")),
    };
    let identity = match parse_certificate(&request.identity_cert) {
        Ok(identity) => identity,
        Err(e) => return Response::system_error(format!("bad identity certificate: {e}")),
    };
    let resource = match ResourcePath::parse(&request.resource) {
        Ok(resource) => resource,
        Err(e) => return Response::system_error(e.to_string()),
    };
    let actions = match &request.actions {
        Actions::All(_) => RequestedActions::All,
        Actions::List(list) => RequestedActions::Only(list.iter().cloned().collect()),
    };
    let decision = match state
        .engine
        .authorize(&subject, &identity, &resource, &actions, &request.system)
    {
        Ok(decision) => decision,
        Err(e) => return Response::system_error(e.to_string()),
    };
    let mut response = Response::from_decision(&decision);
    if request.want_capability && !decision.is_denied() {
        let subject_key = identity
            .as_identity()
            .map(|body| body.public_key.clone())
            .expect("authorize verified the identity body");
        match state.engine.issue_capability(
            &decision,
            subject_key,
            &state.credential,
            state.capability_lifetime_s,
        ) {
            Ok(capability) => response.capability = Some(serialize_certificate(&capability)),
            Err(e) => return Response::system_error(format!("capability issuance failed: {e}")),
        }
    }
    response
}

/// A running decision service bound to a local address. Dropping the
/// handle stops the accept loop.
pub struct DecisionService {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl DecisionService {
    pub fn spawn(listen: &str, state: ServiceState) -> std::io::Result<Self> {
        let listener = TcpListener::bind(listen)?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let stop = Arc::new(AtomicBool::new(false));
        let stop2 = stop.clone();
        let state = Arc::new(state);
        let handle = std::thread::spawn(move || {
            let mut workers = Vec::new();
            while !stop2.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let state = state.clone();
                        workers.push(std::thread::spawn(move || serve_connection(stream, &state)));
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(5));
                    }
                    Err(e) => {
                        log::error!("accept failed: {e}");
                        break;
                    }
                }
            }
            for worker in workers {
                let _ = worker.join();
            }
        });
        log::info!("decision service listening on {addr}");
        Ok(DecisionService {
            addr,
            stop,
            handle: Some(handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for DecisionService {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn serve_connection(stream: TcpStream, state: &ServiceState) {
    let Ok(peer) = stream.peer_addr() else { return };
    let reader = match stream.try_clone() {
        Ok(clone) => BufReader::new(clone),
        Err(_) => return,
    };
    let mut writer = stream;
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let response = handle_request_line(&line, state);
        let Ok(mut text) = serde_json::to_string(&response) else { break };
        text.push('\n');
        if writer.write_all(text.as_bytes()).is_err() {
            break;
        }
    }
    log::debug!("connection from {peer} closed");
}
