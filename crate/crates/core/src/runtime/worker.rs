//! Worker side of the protocol: holds one shard and answers requests.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use super::codec::{self, CodecError, FrameHeader, HEADER_LEN};
use super::messages::{error_code, Message, WorkerRequest, WorkerResponse};
use crate::error::Error;
use crate::glm::{derivatives, fit_mle, fit_mle_restricted, log_lik_kernel, DataShard, GlmFamily, SolverConfig};
use crate::inference::Hypothesis;
use crate::sharding::srswor;

#[derive(Debug, Clone)]
pub struct Worker {
    family: GlmFamily,
    shard: Arc<DataShard>,
    max_halvings: u32,
}

fn error_response(code: u16, message: impl Into<String>) -> WorkerResponse {
    WorkerResponse::Error { code, message: message.into() }
}

fn error_code_of(e: &Error) -> u16 {
    match e {
        Error::Shape(_) => error_code::DIMENSION_MISMATCH,
        Error::Domain(_) => error_code::DOMAIN,
        Error::SingularInformation { .. } | Error::NotPositiveDefinite { .. } => error_code::SOLVER_FAILURE,
        Error::Config(_) | Error::Allocation { .. } => error_code::SAMPLING_FAILURE,
        _ => error_code::MALFORMED_REQUEST,
    }
}

impl Worker {
    pub fn new(family: GlmFamily, shard: DataShard) -> Self {
        Self { family, shard: Arc::new(shard), max_halvings: SolverConfig::default().max_halvings }
    }

    pub fn family(&self) -> GlmFamily {
        self.family
    }

    pub fn shard(&self) -> &DataShard {
        &self.shard
    }

    fn check_dim(&self, len: usize) -> Result<(), WorkerResponse> {
        if len != self.shard.dim() {
            return Err(error_response(
                error_code::DIMENSION_MISMATCH,
                format!("coefficient vector has length {len}, shard has d={}", self.shard.dim()),
            ));
        }
        Ok(())
    }

    pub fn handle(&self, req: &WorkerRequest) -> WorkerResponse {
        match self.try_handle(req) {
            Ok(r) | Err(r) => r,
        }
    }

    fn try_handle(&self, req: &WorkerRequest) -> Result<WorkerResponse, WorkerResponse> {
        let as_resp = |e: Error| error_response(error_code_of(&e), e.to_string());
        Ok(match req {
            WorkerRequest::ShardInfo => {
                WorkerResponse::ShardInfo { count: self.shard.len() as u64, dim: self.shard.dim() as u32 }
            }
            WorkerRequest::PilotDraw { n_k, seed } => {
                let picks = srswor(self.shard.len(), *n_k as usize, *seed).map_err(as_resp)?;
                let rows = self.shard.select(&picks);
                WorkerResponse::PilotRows {
                    row_ids: rows.row_ids().to_vec(),
                    y: rows.y().to_vec(),
                    x: rows.x().to_vec(),
                    dim: rows.dim() as u32,
                }
            }
            WorkerRequest::Derivatives { beta } => {
                self.check_dim(beta.len())?;
                WorkerResponse::Derivatives(derivatives(self.family, &self.shard, beta).map_err(as_resp)?)
            }
            WorkerRequest::LogLik { beta } => {
                self.check_dim(beta.len())?;
                WorkerResponse::LogLik(log_lik_kernel(self.family, &self.shard, beta).map_err(as_resp)?)
            }
            WorkerRequest::LocalFit { init, tol, max_iter, fixed } => {
                self.check_dim(init.len())?;
                let cfg = SolverConfig { tol: *tol, max_iter: *max_iter, max_halvings: self.max_halvings };
                let fit = if fixed.is_empty() {
                    fit_mle(self.family, &self.shard, init, &cfg)
                } else {
                    Hypothesis::new(fixed.iter().map(|&(j, v)| (j as usize, v)).collect())
                        .and_then(|h| fit_mle_restricted(self.family, &self.shard, &h, init, &cfg))
                };
                WorkerResponse::LocalFit(fit.map_err(as_resp)?)
            }
        })
    }

    /// Decodes one frame, answers it, and encodes the reply. Undecodable
    /// input yields an encoded error response.
    pub fn handle_frame(&self, frame: &[u8]) -> Vec<u8> {
        let resp = match codec::decode_frame(frame) {
            Ok((Message::Request(req), _)) => {
                log::info!("{} request", req.name());
                self.handle(&req)
            }
            Ok((Message::Response(r), _)) => {
                error_response(error_code::MALFORMED_REQUEST, format!("unexpected {} response frame", r.name()))
            }
            Err(e) => error_response(protocol_code(&e), e.to_string()),
        };
        codec::encode_response(&resp)
    }
}

fn protocol_code(e: &CodecError) -> u16 {
    if e.is_fatal() {
        error_code::PROTOCOL
    } else {
        error_code::MALFORMED_REQUEST
    }
}

/// Reads one whole frame. `Ok(None)` on a clean end of stream before the
/// first header byte.
pub(crate) fn read_frame(stream: &mut impl Read) -> io::Result<Option<(FrameHeader, Vec<u8>)>> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match stream.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let parsed = FrameHeader::parse(&header).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let mut payload = vec![0u8; parsed.payload_len as usize];
    stream.read_exact(&mut payload)?;
    Ok(Some((parsed, payload)))
}

fn serve_connection(worker: &Worker, mut stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    loop {
        let mut header = [0u8; HEADER_LEN];
        match stream.read_exact(&mut header) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        }
        let parsed = match FrameHeader::parse(&header) {
            Ok(h) => h,
            Err(e) => {
                log::warn!("closing connection: {e}");
                let resp = error_response(protocol_code(&e), e.to_string());
                stream.write_all(&codec::encode_response(&resp))?;
                return Ok(());
            }
        };
        let mut payload = vec![0u8; parsed.payload_len as usize];
        stream.read_exact(&mut payload)?;
        let resp = match codec::decode_payload(parsed.msg_type, &payload) {
            Ok(Message::Request(req)) => {
                log::info!("{} request", req.name());
                worker.handle(&req)
            }
            Ok(Message::Response(r)) => {
                error_response(error_code::MALFORMED_REQUEST, format!("unexpected {} response frame", r.name()))
            }
            Err(e) => {
                log::warn!("malformed request: {e}");
                error_response(protocol_code(&e), e.to_string())
            }
        };
        stream.write_all(&codec::encode_response(&resp))?;
    }
}

/// Accepts connections until `shutdown` is set, one thread per connection.
/// Requests on a connection are answered strictly in arrival order.
pub fn serve(listener: TcpListener, worker: Arc<Worker>, shutdown: Arc<AtomicBool>) -> io::Result<()> {
    listener.set_nonblocking(true)?;
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                stream.set_nonblocking(false)?;
                log::info!("connection from {peer}");
                let worker = Arc::clone(&worker);
                std::thread::spawn(move || {
                    if let Err(e) = serve_connection(&worker, stream) {
                        log::warn!("connection from {peer} ended: {e}");
                    }
                });
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(10)),
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// A worker serving on a background thread; stops when dropped.
pub struct SpawnedWorker {
    pub addr: std::net::SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: Option<std::thread::JoinHandle<io::Result<()>>>,
}

impl SpawnedWorker {
    pub fn spawn(worker: Worker, bind: &str) -> io::Result<Self> {
        let listener = TcpListener::bind(bind)?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let worker = Arc::new(worker);
        let handle = std::thread::spawn(move || serve(listener, worker, flag));
        Ok(Self { addr, shutdown, handle: Some(handle) })
    }
}

impl Drop for SpawnedWorker {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worker() -> Worker {
        let shard = DataShard::from_rows(vec![0.0, 1.0, 0.0, 1.0], vec![-1.0, -1.0, 1.0, 1.0], 1).unwrap();
        Worker::new(GlmFamily::Logistic, shard)
    }

    #[test]
    fn derivatives_delegate_to_glm() {
        let w = worker();
        let resp = w.handle(&WorkerRequest::Derivatives { beta: vec![0.3] });
        let want = derivatives(GlmFamily::Logistic, w.shard(), &[0.3]).unwrap();
        assert_eq!(resp, WorkerResponse::Derivatives(want));
    }

    #[test]
    fn census_pilot_returns_whole_shard() {
        let w = worker();
        match w.handle(&WorkerRequest::PilotDraw { n_k: 4, seed: 3 }) {
            WorkerResponse::PilotRows { row_ids, y, x, dim } => {
                assert_eq!(row_ids, vec![0, 1, 2, 3]);
                assert_eq!(y, w.shard().y());
                assert_eq!(x, w.shard().x());
                assert_eq!(dim, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            w.handle(&WorkerRequest::PilotDraw { n_k: 5, seed: 3 }),
            WorkerResponse::Error { code: error_code::SAMPLING_FAILURE, .. }
        ));
    }

    #[test]
    fn identical_requests_identical_bytes() {
        let w = worker();
        let req = codec::encode_request(&WorkerRequest::Derivatives { beta: vec![0.7] });
        assert_eq!(w.handle_frame(&req), w.handle_frame(&req));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let w = worker();
        let resp = w.handle(&WorkerRequest::LogLik { beta: vec![0.0, 1.0] });
        assert!(matches!(resp, WorkerResponse::Error { code: error_code::DIMENSION_MISMATCH, .. }));
    }

    #[test]
    fn garbage_frame_gets_error_reply() {
        let w = worker();
        let out = w.handle_frame(b"XXXX\x01\x05\0\0\0\0");
        let (msg, _) = codec::decode_frame(&out).unwrap();
        assert!(matches!(msg, Message::Response(WorkerResponse::Error { code: error_code::PROTOCOL, .. })));
    }

    #[test]
    fn local_fit_with_and_without_restriction() {
        let w = worker();
        let resp = w.handle(&WorkerRequest::LocalFit { init: vec![0.0], tol: 1e-10, max_iter: 50, fixed: vec![] });
        match resp {
            WorkerResponse::LocalFit(r) => assert!(r.converged && r.beta[0].abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let resp = w.handle(&WorkerRequest::LocalFit {
            init: vec![0.0],
            tol: 1e-10,
            max_iter: 50,
            fixed: vec![(0, 0.5)],
        });
        match resp {
            WorkerResponse::LocalFit(r) => assert_eq!(r.beta, vec![0.5]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
