//! Remote annealer adapter.
//!
//! Real annealing hardware sits behind a job-submission seam: the QUBO
//! travels in the exchange format, the answer comes back as a topology
//! batch. Two transports are supported:
//!
//! * HTTP: POST the request to `{endpoint}/solve`, parse the JSON response.
//! * Job directory: write `request.json` into the directory and poll for
//!   `response.json` until a worker answers.
//!
//! The bundled [`stub`] server implements the same protocol by running the
//! local SA sampler, so the full pipeline can be exercised end to end
//! without hardware.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::net::Topology;
use crate::qubo::{QuboExchange, QuboMatrix};

use super::{sa_sample, SampleBatch, Sampler, SamplerConfig, SamplerError};

/// Default remote solve timeout.
pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(120);

/// Wire request: the QUBO exchange payload plus the sampling config the
/// solver should honor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    pub qubo: QuboExchange,
    pub config: SamplerConfig,
}

/// Wire response: one bit vector and one energy per requested sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveResponse {
    pub topologies: Vec<Vec<u8>>,
    pub energies: Vec<f64>,
}

enum Endpoint<'a> {
    Http(&'a str),
    JobDir(PathBuf),
}

fn parse_endpoint(endpoint: &str) -> Endpoint<'_> {
    if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
        Endpoint::Http(endpoint)
    } else {
        Endpoint::JobDir(PathBuf::from(endpoint))
    }
}

/// Validates a wire response against the submitted instance and converts it
/// into a batch. Energies must match independent re-evaluation.
fn validate_response(
    q: &QuboMatrix,
    cfg: &SamplerConfig,
    response: SolveResponse,
    wall_time_s: f64,
) -> Result<SampleBatch, SamplerError> {
    if response.topologies.len() != cfg.num_samples {
        return Err(SamplerError::Protocol(format!(
            "expected {} topologies, got {}",
            cfg.num_samples,
            response.topologies.len()
        )));
    }
    if response.energies.len() != response.topologies.len() {
        return Err(SamplerError::Protocol(format!(
            "expected {} energies, got {}",
            response.topologies.len(),
            response.energies.len()
        )));
    }
    let mut topologies = Vec::with_capacity(response.topologies.len());
    let mut energies = Vec::with_capacity(response.energies.len());
    for (bits, reported) in response.topologies.into_iter().zip(response.energies) {
        if bits.len() != q.dim() {
            return Err(SamplerError::Protocol(format!(
                "topology length {} does not match instance dimension {}",
                bits.len(),
                q.dim()
            )));
        }
        let topo = Topology::from_bits(bits)
            .map_err(|e| SamplerError::Protocol(format!("invalid bits: {e}")))?;
        let actual = q.objective(&topo)?;
        if !reported.is_finite() || (reported - actual).abs() > 1e-9 * (1.0 + actual.abs()) {
            return Err(SamplerError::Protocol(format!(
                "reported energy {reported} disagrees with re-evaluation {actual}"
            )));
        }
        topologies.push(topo);
        energies.push(reported);
    }
    Ok(SampleBatch {
        topologies,
        energies,
        wall_time_s,
    })
}

fn submit_http(
    q: &QuboMatrix,
    cfg: &SamplerConfig,
    endpoint: &str,
    timeout: Duration,
) -> Result<SampleBatch, SamplerError> {
    let request = SolveRequest {
        qubo: q.to_exchange(),
        config: cfg.clone(),
    };
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into();
    let url = format!("{}/solve", endpoint.trim_end_matches('/'));
    let start = Instant::now();
    let mut response = agent.post(&url).send_json(&request).map_err(|e| match e {
        ureq::Error::StatusCode(code) => {
            SamplerError::Protocol(format!("server answered HTTP {code}"))
        }
        ureq::Error::Timeout(_) => SamplerError::Timeout {
            seconds: timeout.as_secs_f64(),
        },
        other => SamplerError::Transport(other.to_string()),
    })?;
    let parsed: SolveResponse = response
        .body_mut()
        .read_json()
        .map_err(|e| SamplerError::Protocol(format!("malformed response body: {e}")))?;
    validate_response(q, cfg, parsed, start.elapsed().as_secs_f64())
}

fn submit_job_dir(
    q: &QuboMatrix,
    cfg: &SamplerConfig,
    dir: &Path,
    timeout: Duration,
) -> Result<SampleBatch, SamplerError> {
    fs::create_dir_all(dir)
        .map_err(|e| SamplerError::Transport(format!("cannot create job dir: {e}")))?;
    let request_path = dir.join("request.json");
    let response_path = dir.join("response.json");
    // A stale answer from a previous job must not be mistaken for ours.
    if response_path.exists() {
        fs::remove_file(&response_path)
            .map_err(|e| SamplerError::Transport(format!("cannot clear stale response: {e}")))?;
    }
    let request = SolveRequest {
        qubo: q.to_exchange(),
        config: cfg.clone(),
    };
    let body = serde_json::to_string(&request)
        .map_err(|e| SamplerError::Protocol(format!("cannot encode request: {e}")))?;
    let tmp = dir.join("request.json.tmp");
    fs::write(&tmp, body)
        .map_err(|e| SamplerError::Transport(format!("cannot write request: {e}")))?;
    fs::rename(&tmp, &request_path)
        .map_err(|e| SamplerError::Transport(format!("cannot publish request: {e}")))?;

    let start = Instant::now();
    loop {
        if response_path.exists() {
            let text = fs::read_to_string(&response_path)
                .map_err(|e| SamplerError::Transport(format!("cannot read response: {e}")))?;
            let parsed: SolveResponse = serde_json::from_str(&text)
                .map_err(|e| SamplerError::Protocol(format!("malformed response file: {e}")))?;
            return validate_response(q, cfg, parsed, start.elapsed().as_secs_f64());
        }
        if start.elapsed() > timeout {
            return Err(SamplerError::Timeout {
                seconds: timeout.as_secs_f64(),
            });
        }
        thread::sleep(Duration::from_millis(25));
    }
}

/// Submits the instance to a remote solver. `endpoint` is either an
/// `http(s)://` URL or a job-directory path.
pub fn remote_submit(
    q: &QuboMatrix,
    cfg: &SamplerConfig,
    endpoint: &str,
    timeout: Duration,
) -> Result<SampleBatch, SamplerError> {
    cfg.validate()?;
    match parse_endpoint(endpoint) {
        Endpoint::Http(url) => submit_http(q, cfg, url, timeout),
        Endpoint::JobDir(dir) => submit_job_dir(q, cfg, &dir, timeout),
    }
}

/// Trait adapter around [`remote_submit`].
#[derive(Debug, Clone)]
pub struct RemoteSampler {
    endpoint: String,
    timeout: Duration,
}

impl RemoteSampler {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: DEFAULT_REMOTE_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl Sampler for RemoteSampler {
    fn sample(&self, q: &QuboMatrix, cfg: &SamplerConfig) -> Result<SampleBatch, SamplerError> {
        remote_submit(q, cfg, &self.endpoint, self.timeout)
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}

/// Stub solver answering the remote protocol with the local SA sampler.
pub mod stub {
    use super::*;

    fn solve(request: &SolveRequest) -> Result<SolveResponse, SamplerError> {
        let q = QuboMatrix::from_exchange(&request.qubo)?;
        let batch = sa_sample(&q, &request.config)?;
        Ok(SolveResponse {
            topologies: batch
                .topologies
                .iter()
                .map(|t| t.bits().to_vec())
                .collect(),
            energies: batch.energies,
        })
    }

    /// In-process HTTP stub bound to an ephemeral loopback port. Shuts down
    /// when dropped.
    pub struct StubServer {
        addr: SocketAddr,
        server: Arc<tiny_http::Server>,
        worker: Option<JoinHandle<()>>,
    }

    impl StubServer {
        pub fn spawn() -> Result<Self, SamplerError> {
            let server = tiny_http::Server::http("127.0.0.1:0")
                .map_err(|e| SamplerError::Transport(format!("cannot bind stub server: {e}")))?;
            let addr = server
                .server_addr()
                .to_ip()
                .expect("loopback listener has an IP address");
            let server = Arc::new(server);
            let worker_server = Arc::clone(&server);
            let worker = thread::spawn(move || {
                while let Ok(Some(request)) = worker_server.recv_timeout(Duration::from_millis(200))
                {
                    handle(request);
                }
            });
            Ok(Self {
                addr,
                server,
                worker: Some(worker),
            })
        }

        /// Base URL of the stub, e.g. `http://127.0.0.1:41234`.
        pub fn url(&self) -> String {
            format!("http://{}", self.addr)
        }
    }

    impl Drop for StubServer {
        fn drop(&mut self) {
            self.server.unblock();
            if let Some(worker) = self.worker.take() {
                let _ = worker.join();
            }
        }
    }

    fn respond_json(request: tiny_http::Request, status: u32, body: String) {
        let header = tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
            .expect("static header");
        let response = tiny_http::Response::from_string(body)
            .with_status_code(status as u16)
            .with_header(header);
        let _ = request.respond(response);
    }

    fn handle(mut request: tiny_http::Request) {
        if request.method() != &tiny_http::Method::Post || request.url() != "/solve" {
            respond_json(request, 404, "{\"error\": \"unknown endpoint\"}".into());
            return;
        }
        let mut body = String::new();
        if request.as_reader().read_to_string(&mut body).is_err() {
            respond_json(request, 400, "{\"error\": \"unreadable body\"}".into());
            return;
        }
        let parsed: Result<SolveRequest, _> = serde_json::from_str(&body);
        match parsed {
            Ok(req) => match solve(&req) {
                Ok(resp) => {
                    let text = serde_json::to_string(&resp).expect("response serializes");
                    respond_json(request, 200, text);
                }
                Err(e) => respond_json(request, 400, format!("{{\"error\": \"{e}\"}}")),
            },
            Err(e) => respond_json(request, 400, format!("{{\"error\": \"bad request: {e}\"}}")),
        }
    }

    /// File-mode stub: answers the `request.json` sitting in `dir` by
    /// writing `response.json`.
    pub fn answer_job_dir(dir: &Path) -> Result<(), SamplerError> {
        let text = fs::read_to_string(dir.join("request.json"))
            .map_err(|e| SamplerError::Transport(format!("cannot read request: {e}")))?;
        let request: SolveRequest = serde_json::from_str(&text)
            .map_err(|e| SamplerError::Protocol(format!("malformed request: {e}")))?;
        let response = solve(&request)?;
        let body = serde_json::to_string(&response)
            .map_err(|e| SamplerError::Protocol(format!("cannot encode response: {e}")))?;
        let tmp = dir.join("response.json.tmp");
        fs::write(&tmp, body)
            .map_err(|e| SamplerError::Transport(format!("cannot write response: {e}")))?;
        fs::rename(&tmp, dir.join("response.json"))
            .map_err(|e| SamplerError::Transport(format!("cannot publish response: {e}")))?;
        Ok(())
    }
}
