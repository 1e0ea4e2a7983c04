//! Decision-service wire protocol: one JSON request per line, one JSON
//! response per line, over a plain TCP stream.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::AuthorizationDecision;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Request {
    pub subject_dn: String,
    pub subject_ca_dn: String,
    /// Certificate text of the subject's identity.
    pub identity_cert: String,
    pub resource: String,
    pub actions: Actions,
    #[serde(default)]
    pub system: BTreeMap<String, String>,
    #[serde(default)]
    pub want_capability: bool,
}

/// Either the literal string `"all"` or a list of action names.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum Actions {
    All(AllTag),
    List(Vec<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub enum AllTag {
    #[serde(rename = "all")]
    All,
}

impl Actions {
    pub fn all() -> Self {
        Actions::All(AllTag::All)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq, Default)]
pub struct Response {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub granted: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub conditional: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denied_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evidence: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capability: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct WireError {
    pub kind: ErrorKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum ErrorKind {
    #[serde(rename = "denial")]
    Denial,
    #[serde(rename = "system")]
    System,
}

impl Response {
    pub fn from_decision(decision: &AuthorizationDecision) -> Self {
        let mut response = Response {
            granted: decision.granted.iter().cloned().collect(),
            conditional: decision
                .conditional
                .iter()
                .map(|(action, residual)| (action.clone(), residual.pretty()))
                .collect(),
            denied_reason: decision.denied_reason.as_ref().map(|r| r.to_string()),
            evidence: decision.evidence.clone(),
            capability: None,
            error: None,
        };
        if decision.is_denied() {
            response.error = Some(WireError {
                kind: ErrorKind::Denial,
                detail: decision
                    .denied_reason
                    .as_ref()
                    .map(|r| r.to_string())
                    .unwrap_or_else(|| "denied".to_string()),
            });
        }
        response
    }

    pub fn system_error(detail: impl Into<String>) -> Self {
        Response {
            error: Some(WireError {
                kind: ErrorKind::System,
                detail: detail.into(),
            }),
            ..Response::default()
        }
    }
}

/// One request/response exchange with a decision service.
pub fn call_service(host: &str, port: u16, request: &Request) -> std::io::Result<Response> {
    let mut stream = TcpStream::connect((host, port))?;
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut line = serde_json::to_string(request)?;
    line.push('\n');
    stream.write_all(line.as_bytes())?;
    let mut reader = BufReader::new(stream);
    let mut response_line = String::new();
    reader.read_line(&mut response_line)?;
    if response_line.is_empty() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            "service closed the connection without responding",
        ));
    }
    let response = serde_json::from_str(&response_line)?;
    Ok(response)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn actions_field_forms() {
        let all: Actions = serde_json::from_str("\"all\"").unwrap();
        assert_eq!(all, Actions::all());
        let list: Actions = serde_json::from_str("[\"start\",\"cancel\"]").unwrap();
        assert_eq!(
            list,
            Actions::List(vec!["start".to_string(), "cancel".to_string()])
        );
        assert_eq!(serde_json::to_string(&Actions::all()).unwrap(), "\"all\"");
        assert!(serde_json::from_str::<Actions>("\"some\"").is_err());
    }

    #[test]
    fn empty_fields_are_omitted() {
        let response = Response::system_error("parse");
        let text = serde_json::to_string(&response).unwrap();
        assert_eq!(text, "{\"error\":{\"kind\":\"system\",\"detail\":\"parse\"}}");
    }

    #[test]
    fn request_round_trip() {
        let request = Request {
            subject_dn: "/O=x.org/CN=a".to_string(),
            subject_ca_dn: "/O=x.org/CN=ca".to_string(),
            identity_cert: "<xml/>".to_string(),
            resource: "TRANSP/test".to_string(),
            actions: Actions::List(vec!["start".to_string()]),
            system: BTreeMap::new(),
            want_capability: true,
        };
        let text = serde_json::to_string(&request).unwrap();
        let parsed: Request = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, request);
    }
}
