//! Master side: fans requests out to workers and reduces the replies in
//! ascending worker order.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::codec;
use super::messages::{Message, WorkerRequest, WorkerResponse};
use super::transport::{InProcess, Tcp, Transport};
use super::worker::Worker;
use crate::error::{Error, Result};
use crate::glm::{DataShard, DerivativeBundle, EstimateResult, GlmFamily, SolverConfig};
use crate::inference::Hypothesis;

/// Replies of one worker in a round, with bytes sent and received.
type Exchange = (Vec<WorkerResponse>, u64, u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundKind {
    Metadata,
    PilotDraw,
    Derivatives,
    LogLik,
    LocalFit,
}

/// Traffic of one broadcast round, per worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub kind: RoundKind,
    pub requests_per_worker: usize,
    /// Bytes master → worker.
    pub bytes_sent: Vec<u64>,
    /// Bytes worker → master.
    pub bytes_received: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub rounds: Vec<RoundRecord>,
}

impl Transcript {
    pub fn count(&self, kind: RoundKind) -> usize {
        self.rounds.iter().filter(|r| r.kind == kind).count()
    }

    /// Rounds that move data or derivatives, i.e. everything but metadata.
    pub fn heavy_rounds(&self) -> usize {
        self.rounds.len() - self.count(RoundKind::Metadata)
    }

    pub fn total_bytes(&self) -> u64 {
        self.rounds.iter().map(|r| r.bytes_sent.iter().sum::<u64>() + r.bytes_received.iter().sum::<u64>()).sum()
    }

    /// Rounds recorded after `mark` (a prior `rounds.len()`).
    pub fn since(&self, mark: usize) -> Transcript {
        Transcript { rounds: self.rounds[mark.min(self.rounds.len())..].to_vec() }
    }
}

/// A local fit that a worker could not produce.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerFailure {
    pub worker: usize,
    pub code: u16,
    pub message: String,
}

pub struct Master {
    workers: Vec<Box<dyn Transport>>,
    concurrent: bool,
    transcript: Transcript,
    dim: Option<usize>,
}

impl Master {
    pub fn new(workers: Vec<Box<dyn Transport>>) -> Result<Self> {
        if workers.is_empty() {
            return Err(Error::Config("a session needs at least one worker".into()));
        }
        Ok(Self { workers, concurrent: false, transcript: Transcript::default(), dim: None })
    }

    /// Workers in this process, one per shard.
    pub fn in_process(family: GlmFamily, shards: Vec<DataShard>) -> Result<Self> {
        Self::new(
            shards
                .into_iter()
                .map(|s| Box::new(InProcess::new(Worker::new(family, s))) as Box<dyn Transport>)
                .collect(),
        )
    }

    /// One TCP connection per address, fanned out concurrently.
    pub fn connect(addrs: &[String], timeout: Duration) -> Result<Self> {
        let workers = addrs
            .iter()
            .enumerate()
            .map(|(k, a)| {
                Tcp::connect(a, timeout)
                    .map(|t| Box::new(t) as Box<dyn Transport>)
                    .map_err(|e| Error::Aggregation { worker: k, reason: format!("cannot connect to {a}: {e}") })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(workers)?.with_concurrency(true))
    }

    pub fn with_concurrency(mut self, concurrent: bool) -> Self {
        self.concurrent = concurrent;
        self
    }

    pub fn workers(&self) -> usize {
        self.workers.len()
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn describe_workers(&self) -> Vec<String> {
        self.workers.iter().map(|w| w.describe()).collect()
    }

    /// Sends each worker its request list and collects the replies. Any
    /// transport failure or error reply fails the whole round unless
    /// `tolerate_errors` is set, in which case error replies are returned.
    fn round(
        &mut self,
        kind: RoundKind,
        requests: Vec<Vec<WorkerRequest>>,
        tolerate_errors: bool,
    ) -> Result<Vec<Vec<WorkerResponse>>> {
        debug_assert_eq!(requests.len(), self.workers.len());
        let per_worker = requests.first().map_or(0, Vec::len);

        fn run(transport: &mut dyn Transport, reqs: &[WorkerRequest]) -> std::result::Result<(Vec<WorkerResponse>, u64, u64), String> {
            let (mut sent, mut recv) = (0u64, 0u64);
            let mut out = Vec::with_capacity(reqs.len());
            for req in reqs {
                let frame = codec::encode_request(req);
                sent += frame.len() as u64;
                let reply = transport.exchange(&frame).map_err(|e| format!("{}: {e}", transport.describe()))?;
                recv += reply.len() as u64;
                match codec::decode_frame(&reply).map_err(|e| format!("bad reply: {e}"))? {
                    (Message::Response(r), _) => out.push(r),
                    (Message::Request(_), _) => return Err("worker sent a request frame".into()),
                }
            }
            Ok((out, sent, recv))
        }

        let results: Vec<std::result::Result<Exchange, String>> = if self.concurrent {
            std::thread::scope(|s| {
                let handles: Vec<_> = self
                    .workers
                    .iter_mut()
                    .zip(&requests)
                    .map(|(w, reqs)| s.spawn(move || run(w.as_mut(), reqs)))
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("worker thread panicked".into()))).collect()
            })
        } else {
            self.workers.iter_mut().zip(&requests).map(|(w, reqs)| run(w.as_mut(), reqs)).collect()
        };

        let mut record = RoundRecord {
            kind,
            requests_per_worker: per_worker,
            bytes_sent: Vec::with_capacity(results.len()),
            bytes_received: Vec::with_capacity(results.len()),
        };
        let mut replies = Vec::with_capacity(results.len());
        let mut first_error = None;
        for (k, r) in results.into_iter().enumerate() {
            match r {
                Ok((resps, sent, recv)) => {
                    record.bytes_sent.push(sent);
                    record.bytes_received.push(recv);
                    if !tolerate_errors && first_error.is_none() {
                        if let Some(WorkerResponse::Error { code, message }) =
                            resps.iter().find(|r| matches!(r, WorkerResponse::Error { .. }))
                        {
                            first_error = Some(Error::Aggregation {
                                worker: k,
                                reason: format!("error {code}: {message}"),
                            });
                        }
                    }
                    replies.push(resps);
                }
                Err(reason) => {
                    record.bytes_sent.push(0);
                    record.bytes_received.push(0);
                    first_error.get_or_insert(Error::Aggregation { worker: k, reason });
                    replies.push(Vec::new());
                }
            }
        }
        self.transcript.rounds.push(record);
        match first_error {
            Some(e) => Err(e),
            None => Ok(replies),
        }
    }

    fn same_for_all(&self, req: WorkerRequest) -> Vec<Vec<WorkerRequest>> {
        vec![vec![req]; self.workers.len()]
    }

    fn unexpected(worker: usize, got: &WorkerResponse, want: &str) -> Error {
        Error::Aggregation { worker, reason: format!("expected a {want} reply, got {}", got.name()) }
    }

    /// Shard sizes per worker; also fixes the session dimension.
    pub fn shard_info(&mut self) -> Result<Vec<usize>> {
        let replies = self.round(RoundKind::Metadata, self.same_for_all(WorkerRequest::ShardInfo), false)?;
        let mut sizes = Vec::with_capacity(replies.len());
        let mut dim = None;
        for (k, r) in replies.iter().enumerate() {
            match &r[0] {
                WorkerResponse::ShardInfo { count, dim: d } => {
                    let d = *d as usize;
                    if *dim.get_or_insert(d) != d {
                        return Err(Error::Aggregation {
                            worker: k,
                            reason: format!("worker has d={d}, expected d={}", dim.unwrap()),
                        });
                    }
                    sizes.push(*count as usize);
                }
                other => return Err(Self::unexpected(k, other, "shard-info")),
            }
        }
        self.dim = dim;
        Ok(sizes)
    }

    /// Session dimension, asking the workers if not yet known.
    pub fn dim(&mut self) -> Result<usize> {
        match self.dim {
            Some(d) => Ok(d),
            None => {
                self.shard_info()?;
                Ok(self.dim.expect("shard_info sets the dimension"))
            }
        }
    }

    fn check_len(&mut self, beta: &[f64]) -> Result<()> {
        let d = self.dim()?;
        if beta.len() != d {
            return Err(Error::Shape(format!("coefficient vector has length {}, session has d={d}", beta.len())));
        }
        Ok(())
    }

    /// Collects `n_k` SRSWOR rows from each worker `k`, pooled in worker order.
    pub fn pilot_draw(&mut self, allocation: &[usize], seeds: &[u64]) -> Result<DataShard> {
        let d = self.dim()?;
        let requests = allocation
            .iter()
            .zip(seeds)
            .map(|(&n_k, &seed)| vec![WorkerRequest::PilotDraw { n_k: n_k as u32, seed }])
            .collect();
        let replies = self.round(RoundKind::PilotDraw, requests, false)?;
        let mut parts = Vec::with_capacity(replies.len());
        for (k, r) in replies.into_iter().enumerate() {
            match r.into_iter().next() {
                Some(WorkerResponse::PilotRows { row_ids, y, x, dim }) => {
                    let shard = DataShard::new(y, x, dim as usize, row_ids)
                        .map_err(|e| Error::Aggregation { worker: k, reason: e.to_string() })?;
                    parts.push(shard);
                }
                Some(other) => return Err(Self::unexpected(k, &other, "pilot-rows")),
                None => return Err(Self::unexpected(k, &WorkerResponse::LogLik(0.0), "pilot-rows")),
            }
        }
        DataShard::concat(d, &parts)
    }

    /// Broadcasts `beta` and sums the derivative bundles in ascending worker
    /// order. No partial result is returned if any worker fails.
    pub fn aggregate(&mut self, beta: &[f64]) -> Result<DerivativeBundle> {
        self.check_len(beta)?;
        let d = beta.len();
        let replies =
            self.round(RoundKind::Derivatives, self.same_for_all(WorkerRequest::Derivatives { beta: beta.to_vec() }), false)?;
        let mut total = DerivativeBundle::zeros(d);
        for (k, r) in replies.iter().enumerate() {
            match &r[0] {
                WorkerResponse::Derivatives(b) => total
                    .add_assign(b)
                    .map_err(|e| Error::Aggregation { worker: k, reason: e.to_string() })?,
                other => return Err(Self::unexpected(k, other, "derivatives")),
            }
        }
        Ok(total)
    }

    /// Full-data log-likelihood kernels at each of `betas`, in one round.
    pub fn log_liks(&mut self, betas: &[Vec<f64>]) -> Result<Vec<f64>> {
        for b in betas {
            self.check_len(b)?;
        }
        let reqs: Vec<WorkerRequest> = betas.iter().map(|b| WorkerRequest::LogLik { beta: b.clone() }).collect();
        let replies = self.round(RoundKind::LogLik, vec![reqs; self.workers.len()], false)?;
        let mut totals = vec![0.0; betas.len()];
        for (k, r) in replies.iter().enumerate() {
            for (t, resp) in totals.iter_mut().zip(r) {
                match resp {
                    WorkerResponse::LogLik(v) => *t += v,
                    other => return Err(Self::unexpected(k, other, "log-lik")),
                }
            }
        }
        Ok(totals)
    }

    /// Per-worker local fits; solver failures are reported per worker rather
    /// than failing the round. Each entry of `restrictions` adds one fit per
    /// worker (`None` = unrestricted).
    pub fn local_fits(
        &mut self,
        init: &[f64],
        cfg: &SolverConfig,
        restrictions: &[Option<&Hypothesis>],
    ) -> Result<Vec<Vec<std::result::Result<EstimateResult, WorkerFailure>>>> {
        self.check_len(init)?;
        let reqs: Vec<WorkerRequest> = restrictions
            .iter()
            .map(|h| WorkerRequest::LocalFit {
                init: h.map_or_else(|| init.to_vec(), |h| h.apply(init)),
                tol: cfg.tol,
                max_iter: cfg.max_iter,
                fixed: h.map_or_else(Vec::new, |h| h.restricted().iter().map(|&(j, v)| (j as u32, v)).collect()),
            })
            .collect();
        let replies = self.round(RoundKind::LocalFit, vec![reqs; self.workers.len()], true)?;
        replies
            .into_iter()
            .enumerate()
            .map(|(k, r)| {
                r.into_iter()
                    .map(|resp| match resp {
                        WorkerResponse::LocalFit(fit) => Ok(Ok(fit)),
                        WorkerResponse::Error { code, message } => Ok(Err(WorkerFailure { worker: k, code, message })),
                        other => Err(Self::unexpected(k, &other, "local-fit")),
                    })
                    .collect()
            })
            .collect()
    }
}
