//! The mock services over HTTP on a local port.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Response, Server};
use tracing::{debug, warn};

use crate::service::MockServices;

#[derive(Debug, thiserror::Error)]
#[error("cannot bind mock server to {addr}: {message}")]
pub struct BindError {
    pub addr: String,
    pub message: String,
}

/// Running mock server; stops when dropped.
pub struct MockServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
    pub services: Arc<MockServices>,
}

impl MockServer {
    /// Bind `addr` (use port 0 for a free port) and serve with `threads`
    /// workers.
    pub fn start(services: Arc<MockServices>, addr: &str, threads: usize) -> Result<Self, BindError> {
        let server = Server::http(addr).map_err(|e| BindError {
            addr: addr.to_string(),
            message: e.to_string(),
        })?;
        let local = server.server_addr().to_ip().ok_or_else(|| BindError {
            addr: addr.to_string(),
            message: "not an IP socket".into(),
        })?;
        let server = Arc::new(server);
        let workers = (0..threads.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let services = Arc::clone(&services);
                std::thread::spawn(move || serve(&server, &services))
            })
            .collect();
        Ok(MockServer {
            server,
            addr: local,
            workers,
            services,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Block until the server is stopped from another thread.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn serve(server: &Server, services: &MockServices) {
    let json = Header::from_bytes("Content-Type", "application/json").expect("static header");
    loop {
        let mut request = match server.recv() {
            Ok(r) => r,
            Err(e) => {
                debug!("mock server stopping: {e}");
                return;
            }
        };
        let mut body = String::new();
        let (status, payload) = if request.as_reader().read_to_string(&mut body).is_err() {
            (400, r#"{"error":"body is not UTF-8"}"#.to_string())
        } else if *request.method() != tiny_http::Method::Post {
            (405, r#"{"error":"only POST is served"}"#.to_string())
        } else {
            services.handle(request.url(), &body)
        };
        debug!(url = request.url(), status, "mock request");
        let response = Response::from_string(payload)
            .with_status_code(status)
            .with_header(json.clone());
        if let Err(e) = request.respond(response) {
            warn!("mock server response failed: {e}");
        }
    }
}
