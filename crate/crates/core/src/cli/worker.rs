use std::io::Write;
use std::net::TcpListener;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use super::dataset::CsvDataset;
use super::{CliError, WorkerArgs};
use crate::runtime::{serve, Worker};

pub(super) fn cmd_worker(a: WorkerArgs) -> Result<(), CliError> {
    let spec = CsvDataset { response: a.response, covariates: a.covariates, add_intercept: a.add_intercept };
    let data = spec.load(&a.data, a.family)?;
    let listener = TcpListener::bind(&a.listen).map_err(|e| CliError::Io(format!("cannot listen on {}: {e}", a.listen)))?;
    let addr = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;

    let shutdown = Arc::new(AtomicBool::new(false));
    for sig in [signal_hook::consts::SIGTERM, signal_hook::consts::SIGINT] {
        signal_hook::flag::register(sig, Arc::clone(&shutdown)).map_err(|e| CliError::Io(format!("signal handler: {e}")))?;
    }
    log::info!("serving {} rows (d={}) from {}", data.shard.len(), data.shard.dim(), a.data.display());
    // The bound address goes to stdout so callers can use port 0.
    println!("listening on {addr}");
    std::io::stdout().flush().map_err(|e| CliError::Io(e.to_string()))?;
    serve(listener, Arc::new(Worker::new(a.family, data.shard)), shutdown)
        .map_err(|e| CliError::Io(format!("serving: {e}")))?;
    log::info!("shutting down");
    Ok(())
}
