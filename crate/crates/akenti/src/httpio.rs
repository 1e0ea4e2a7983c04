//! Minimal HTTP/1.0 GET support for `http:` certificate sources.
//!
//! The directory contract is deliberately small: `GET <url>/` returns a
//! newline-separated list of file names, `GET <url>/<name>` returns the
//! file text. A plain blocking client is all that is needed; test suites
//! and the scenario fixtures host directories with [`DirServer`].

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("bad url {0:?}")]
    BadUrl(String),
    #[error("connect to {0} failed: {1}")]
    Connect(String, String),
    #[error("http exchange with {0} failed: {1}")]
    Io(String, String),
    #[error("{url} returned status {status}")]
    Status { url: String, status: u16 },
}

/// Splits `http://host:port/path` into authority and path.
fn split_url(url: &str) -> Result<(String, String), HttpError> {
    let rest = url
        .strip_prefix("http://")
        .ok_or_else(|| HttpError::BadUrl(url.to_string()))?;
    let (authority, path) = match rest.find('/') {
        Some(i) => (&rest[..i], &rest[i..]),
        None => (rest, "/"),
    };
    if authority.is_empty() {
        return Err(HttpError::BadUrl(url.to_string()));
    }
    let authority = if authority.contains(':') {
        authority.to_string()
    } else {
        format!("{authority}:80")
    };
    Ok((authority, path.to_string()))
}

/// Performs one GET and returns the response body.
pub fn http_get(url: &str) -> Result<String, HttpError> {
    let (authority, path) = split_url(url)?;
    let mut stream = TcpStream::connect(&authority)
        .map_err(|e| HttpError::Connect(authority.clone(), e.to_string()))?;
    stream.set_read_timeout(Some(Duration::from_secs(10))).ok();
    let io_err = |e: std::io::Error| HttpError::Io(url.to_string(), e.to_string());
    write!(
        stream,
        "GET {path} HTTP/1.0\r\nHost: {authority}\r\nConnection: close\r\n\r\n"
    )
    .map_err(io_err)?;
    let mut reader = BufReader::new(stream);
    let mut status_line = String::new();
    reader.read_line(&mut status_line).map_err(io_err)?;
    let status: u16 = status_line
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| HttpError::Io(url.to_string(), format!("bad status line {status_line:?}")))?;
    // Skip headers.
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(io_err)?;
        if n == 0 || line == "\r\n" || line == "\n" {
            break;
        }
    }
    let mut body = String::new();
    reader.read_to_string(&mut body).map_err(io_err)?;
    if status != 200 {
        return Err(HttpError::Status {
            url: url.to_string(),
            status,
        });
    }
    Ok(body)
}

/// Serves a set of named text files over the directory GET contract.
/// Intended for tests and the scenario harness.
pub struct DirServer {
    addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl DirServer {
    pub fn serve(files: Vec<(String, String)>) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let stop = Arc::new(AtomicBool::new(false));
        let stop2 = stop.clone();
        let handle = std::thread::spawn(move || {
            while !stop2.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let _ = handle_conn(stream, &files);
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(5));
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(DirServer {
            addr,
            stop,
            handle: Some(handle),
        })
    }

    /// Base URL of the served directory, without trailing slash.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for DirServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_conn(mut stream: TcpStream, files: &[(String, String)]) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line)?;
        if n == 0 || line == "\r\n" || line == "\n" {
            break;
        }
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("/");
    let response = if path == "/" {
        let listing: String = files.iter().map(|(name, _)| format!("{name}\n")).collect();
        Some(listing)
    } else {
        let name = path.trim_start_matches('/');
        files.iter().find(|(n, _)| n == name).map(|(_, text)| text.clone())
    };
    match response {
        Some(body) => write!(
            stream,
            "HTTP/1.0 200 OK\r\nContent-Length: {}\r\n\r\n{body}",
            body.len()
        ),
        None => write!(stream, "HTTP/1.0 404 Not Found\r\n\r\n"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn get_listing_and_files() {
        let server = DirServer::serve(vec![
            ("a.xml".to_string(), "<a/>".to_string()),
            ("b.xml".to_string(), "<b/>".to_string()),
        ])
        .unwrap();
        let listing = http_get(&format!("{}/", server.url())).unwrap();
        assert_eq!(listing, "a.xml\nb.xml\n");
        let body = http_get(&format!("{}/a.xml", server.url())).unwrap();
        assert_eq!(body, "<a/>");
        let missing = http_get(&format!("{}/zzz", server.url()));
        assert!(matches!(missing, Err(HttpError::Status { status: 404, .. })));
    }

    #[test]
    fn connect_failure_reported() {
        // Port 9 on localhost: nothing listens there in the test env.
        let err = http_get("http://127.0.0.1:9/").unwrap_err();
        assert!(matches!(err, HttpError::Connect(..)));
    }
}
