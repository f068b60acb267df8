//! Length-prefixed binary framing.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "OGLM"
//! 4       1     version (1)
//! 5       1     message type
//! 6       4     payload length, u32 little-endian
//! 10      n     payload
//! ```
//!
//! Reals are IEEE-754 binary64 little-endian, integers little-endian,
//! matrices row-major.

use thiserror::Error;

use super::messages::{Message, WorkerRequest, WorkerResponse};
use crate::estimators::EstimatorKind;
use crate::glm::{DerivativeBundle, EstimateResult};
use crate::linalg::Matrix;

pub const MAGIC: [u8; 4] = *b"OGLM";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 10;
/// Frames announcing a larger payload are rejected before allocation.
pub const MAX_PAYLOAD: u32 = 1 << 30;

pub mod msg_type {
    pub const REQ_PILOT_DRAW: u8 = 0x01;
    pub const REQ_DERIVATIVES: u8 = 0x02;
    pub const REQ_LOG_LIK: u8 = 0x03;
    pub const REQ_LOCAL_FIT: u8 = 0x04;
    pub const REQ_SHARD_INFO: u8 = 0x05;
    pub const RESP_PILOT_ROWS: u8 = 0x81;
    pub const RESP_DERIVATIVES: u8 = 0x82;
    pub const RESP_LOG_LIK: u8 = 0x83;
    pub const RESP_LOCAL_FIT: u8 = 0x84;
    pub const RESP_SHARD_INFO: u8 = 0x85;
    pub const RESP_ERROR: u8 = 0xFF;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("incomplete frame: {needed} more bytes needed")]
    Incomplete { needed: usize },
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("payload of {0} bytes exceeds the frame limit")]
    TooLarge(u32),
    #[error("malformed payload: {0}")]
    Malformed(String),
}

impl CodecError {
    /// Header-level errors leave the stream unsynchronized; the connection
    /// must be closed after reporting them.
    pub fn is_fatal(&self) -> bool {
        matches!(self, CodecError::BadMagic(_) | CodecError::BadVersion(_) | CodecError::TooLarge(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub msg_type: u8,
    pub payload_len: u32,
}

impl FrameHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < HEADER_LEN {
            return Err(CodecError::Incomplete { needed: HEADER_LEN - bytes.len() });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(CodecError::BadMagic(magic));
        }
        if bytes[4] != VERSION {
            return Err(CodecError::BadVersion(bytes[4]));
        }
        let payload_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
        if payload_len > MAX_PAYLOAD {
            return Err(CodecError::TooLarge(payload_len));
        }
        Ok(Self { msg_type: bytes[5], payload_len })
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.0.reserve(v.len() * 8);
        v.iter().for_each(|x| self.f64(*x));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() - self.pos < n {
            return Err(CodecError::Malformed(format!(
                "payload ends after {} bytes, {} more expected",
                self.buf.len(),
                n - (self.buf.len() - self.pos)
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CodecError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| CodecError::Malformed("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn bool(&mut self) -> Result<bool, CodecError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(CodecError::Malformed(format!("invalid boolean byte {b}"))),
        }
    }
    fn finish(&self) -> Result<(), CodecError> {
        if self.pos != self.buf.len() {
            return Err(CodecError::Malformed(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn frame(msg_type: u8, payload: Vec<u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg_type);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

fn kind_code(kind: Option<EstimatorKind>) -> u8 {
    match kind {
        None => 0xFF,
        Some(EstimatorKind::Global) => 0,
        Some(EstimatorKind::Pilot) => 1,
        Some(EstimatorKind::OneStep) => 2,
        Some(EstimatorKind::OneShot) => 3,
        Some(EstimatorKind::Csl) => 4,
    }
}

fn kind_from_code(code: u8) -> Result<Option<EstimatorKind>, CodecError> {
    Ok(match code {
        0xFF => None,
        0 => Some(EstimatorKind::Global),
        1 => Some(EstimatorKind::Pilot),
        2 => Some(EstimatorKind::OneStep),
        3 => Some(EstimatorKind::OneShot),
        4 => Some(EstimatorKind::Csl),
        c => return Err(CodecError::Malformed(format!("unknown estimator tag {c}"))),
    })
}

pub fn encode_request(req: &WorkerRequest) -> Vec<u8> {
    use msg_type::*;
    let mut w = Writer(Vec::new());
    let t = match req {
        WorkerRequest::PilotDraw { n_k, seed } => {
            w.u32(*n_k);
            w.u64(*seed);
            REQ_PILOT_DRAW
        }
        WorkerRequest::Derivatives { beta } => {
            w.f64s(beta);
            REQ_DERIVATIVES
        }
        WorkerRequest::LogLik { beta } => {
            w.f64s(beta);
            REQ_LOG_LIK
        }
        WorkerRequest::LocalFit { init, tol, max_iter, fixed } => {
            w.u32(init.len() as u32);
            w.f64s(init);
            w.f64(*tol);
            w.u32(*max_iter);
            w.u32(fixed.len() as u32);
            for &(j, v) in fixed {
                w.u32(j);
                w.f64(v);
            }
            REQ_LOCAL_FIT
        }
        WorkerRequest::ShardInfo => REQ_SHARD_INFO,
    };
    frame(t, w.0)
}

pub fn encode_response(resp: &WorkerResponse) -> Vec<u8> {
    use msg_type::*;
    let mut w = Writer(Vec::new());
    let t = match resp {
        WorkerResponse::PilotRows { row_ids, y, x, dim } => {
            w.u64(row_ids.len() as u64);
            w.u32(*dim);
            row_ids.iter().for_each(|id| w.u64(*id));
            w.f64s(y);
            w.f64s(x);
            RESP_PILOT_ROWS
        }
        WorkerResponse::Derivatives(b) => {
            w.f64s(&b.score);
            w.f64s(b.info.as_slice());
            w.f64(b.log_lik);
            w.u64(b.count);
            RESP_DERIVATIVES
        }
        WorkerResponse::LogLik(v) => {
            w.f64(*v);
            RESP_LOG_LIK
        }
        WorkerResponse::LocalFit(r) => {
            w.u32(r.beta.len() as u32);
            w.f64s(&r.beta);
            w.u8(r.log_lik.is_some() as u8);
            w.f64(r.log_lik.unwrap_or(0.0));
            w.u32(r.iterations);
            w.u8(r.converged as u8);
            w.f64(r.final_step_norm);
            w.u8(kind_code(r.method));
            w.u64(r.capped_evaluations);
            RESP_LOCAL_FIT
        }
        WorkerResponse::ShardInfo { count, dim } => {
            w.u64(*count);
            w.u32(*dim);
            RESP_SHARD_INFO
        }
        WorkerResponse::Error { code, message } => {
            w.u16(*code);
            w.u32(message.len() as u32);
            w.0.extend_from_slice(message.as_bytes());
            RESP_ERROR
        }
    };
    frame(t, w.0)
}

pub fn encode_frame(msg: &Message) -> Vec<u8> {
    match msg {
        Message::Request(r) => encode_request(r),
        Message::Response(r) => encode_response(r),
    }
}

fn beta_payload(payload: &[u8]) -> Result<Vec<f64>, CodecError> {
    if payload.is_empty() || !payload.len().is_multiple_of(8) {
        return Err(CodecError::Malformed(format!("coefficient payload of {} bytes", payload.len())));
    }
    Reader { buf: payload, pos: 0 }.f64s(payload.len() / 8)
}

/// Recovers d from a derivative payload of 8(d + d² + 2) bytes.
fn bundle_dim(len: usize) -> Result<usize, CodecError> {
    if len.is_multiple_of(8) && len >= 32 {
        let words = len / 8 - 2;
        let d = ((((4 * words + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
        if d >= 1 && d * d + d == words {
            return Ok(d);
        }
    }
    Err(CodecError::Malformed(format!("derivative payload of {len} bytes")))
}

/// Decodes the payload of a frame whose header has already been parsed.
pub fn decode_payload(msg_type: u8, payload: &[u8]) -> Result<Message, CodecError> {
    use msg_type::*;
    let mut r = Reader { buf: payload, pos: 0 };
    let msg = match msg_type {
        REQ_PILOT_DRAW => Message::Request(WorkerRequest::PilotDraw { n_k: r.u32()?, seed: r.u64()? }),
        REQ_DERIVATIVES => return Ok(Message::Request(WorkerRequest::Derivatives { beta: beta_payload(payload)? })),
        REQ_LOG_LIK => return Ok(Message::Request(WorkerRequest::LogLik { beta: beta_payload(payload)? })),
        REQ_LOCAL_FIT => {
            let d = r.u32()? as usize;
            let init = r.f64s(d)?;
            let tol = r.f64()?;
            let max_iter = r.u32()?;
            let n_fixed = r.u32()? as usize;
            let mut fixed = Vec::with_capacity(n_fixed.min(1024));
            for _ in 0..n_fixed {
                fixed.push((r.u32()?, r.f64()?));
            }
            Message::Request(WorkerRequest::LocalFit { init, tol, max_iter, fixed })
        }
        REQ_SHARD_INFO => Message::Request(WorkerRequest::ShardInfo),
        RESP_PILOT_ROWS => {
            let m = r.u64()? as usize;
            let dim = r.u32()?;
            let mut row_ids = Vec::with_capacity(m.min(1 << 20));
            for _ in 0..m {
                row_ids.push(r.u64()?);
            }
            let y = r.f64s(m)?;
            let x = r.f64s(m.checked_mul(dim as usize).ok_or_else(|| CodecError::Malformed("size overflow".into()))?)?;
            Message::Response(WorkerResponse::PilotRows { row_ids, y, x, dim })
        }
        RESP_DERIVATIVES => {
            let d = bundle_dim(payload.len())?;
            let score = r.f64s(d)?;
            let info = Matrix::from_row_major(d, r.f64s(d * d)?)
                .map_err(|e| CodecError::Malformed(e.to_string()))?;
            let log_lik = r.f64()?;
            let count = r.u64()?;
            Message::Response(WorkerResponse::Derivatives(DerivativeBundle { score, info, log_lik, count }))
        }
        RESP_LOG_LIK => Message::Response(WorkerResponse::LogLik(r.f64()?)),
        RESP_LOCAL_FIT => {
            let d = r.u32()? as usize;
            let beta = r.f64s(d)?;
            let has_ll = r.bool()?;
            let ll = r.f64()?;
            let iterations = r.u32()?;
            let converged = r.bool()?;
            let final_step_norm = r.f64()?;
            let method = kind_from_code(r.u8()?)?;
            let capped_evaluations = r.u64()?;
            Message::Response(WorkerResponse::LocalFit(EstimateResult {
                beta,
                log_lik: has_ll.then_some(ll),
                iterations,
                converged,
                final_step_norm,
                method,
                capped_evaluations,
            }))
        }
        RESP_SHARD_INFO => Message::Response(WorkerResponse::ShardInfo { count: r.u64()?, dim: r.u32()? }),
        RESP_ERROR => {
            let code = r.u16()?;
            let len = r.u32()? as usize;
            let message = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| CodecError::Malformed("error message is not UTF-8".into()))?;
            Message::Response(WorkerResponse::Error { code, message })
        }
        other => return Err(CodecError::UnknownType(other)),
    };
    r.finish()?;
    Ok(msg)
}

/// Decodes one frame from the front of `bytes`, returning the message and the
/// number of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Message, usize), CodecError> {
    let header = FrameHeader::parse(bytes)?;
    let total = HEADER_LEN + header.payload_len as usize;
    if bytes.len() < total {
        return Err(CodecError::Incomplete { needed: total - bytes.len() });
    }
    let msg = decode_payload(header.msg_type, &bytes[HEADER_LEN..total])?;
    Ok((msg, total))
}
