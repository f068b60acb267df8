use std::io::{self, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use super::codec::HEADER_LEN;
use super::worker::{read_frame, Worker};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Carries one encoded request frame to a worker and returns its encoded
/// reply.
pub trait Transport: Send {
    fn exchange(&mut self, frame: &[u8]) -> io::Result<Vec<u8>>;

    fn describe(&self) -> String;
}

/// Calls a worker living in the same process. Frames are still encoded
/// and decoded so byte accounting and results match the TCP path.
pub struct InProcess {
    worker: Arc<Worker>,
}

impl InProcess {
    pub fn new(worker: Worker) -> Self {
        Self { worker: Arc::new(worker) }
    }

    pub fn shared(worker: Arc<Worker>) -> Self {
        Self { worker }
    }
}

impl Transport for InProcess {
    fn exchange(&mut self, frame: &[u8]) -> io::Result<Vec<u8>> {
        Ok(self.worker.handle_frame(frame))
    }

    fn describe(&self) -> String {
        "in-process".into()
    }
}

/// One persistent TCP connection; requests are serialized on it.
pub struct Tcp {
    stream: TcpStream,
    peer: String,
}

impl Tcp {
    pub fn connect(addr: &str, timeout: Duration) -> io::Result<Self> {
        let sock = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, format!("cannot resolve {addr}")))?;
        let stream = TcpStream::connect_timeout(&sock, timeout)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        Ok(Self { stream, peer: addr.to_string() })
    }
}

impl Transport for Tcp {
    fn exchange(&mut self, frame: &[u8]) -> io::Result<Vec<u8>> {
        self.stream.write_all(frame)?;
        let (header, payload) = read_frame(&mut self.stream)?
            .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "worker closed the connection"))?;
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(b"OGLM");
        out.push(super::codec::VERSION);
        out.push(header.msg_type);
        out.extend_from_slice(&header.payload_len.to_le_bytes());
        out.extend_from_slice(&payload);
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("tcp://{}", self.peer)
    }
}
