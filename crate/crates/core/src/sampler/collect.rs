//! Concurrent, resumable collection of samples into the store.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::backend::{ChatBackend, ChatRequest};
use super::parse::{parse_response, FailureReason};
use super::prompt::render_prompt;
use super::store::{load_store, StoreRecord, StoreWriter, StoredParsed, TupleKey};
use super::{SamplerConfig, SamplerError, Task};
use crate::corpus::TextRecord;
use crate::labels::LabelSpace;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    /// Tuples in the plan.
    pub planned: usize,
    /// Tuples already complete in the store.
    pub skipped: usize,
    /// Tuples attempted this run.
    pub attempted: usize,
    pub backend_calls: usize,
    pub succeeded: usize,
    pub parse_failures: BTreeMap<FailureReason, usize>,
    /// Tuples still without a response after all retries.
    pub backend_failures: usize,
    /// Share of attempted tuples that produced no usable sample.
    pub failure_rate: f64,
}

struct Job<'a> {
    text: &'a TextRecord,
    temperature: f64,
    sample_index: u32,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Query `backend` for every `(text, temperature, sample)` tuple not yet
/// complete in `store`, appending one record per tuple.
///
/// Backend errors are retried up to `max_retries` times; a tuple that never
/// gets a response is recorded as a `backend_error` failure and retried on
/// the next run. Records are written in plan order whatever the completion
/// order, so reruns produce identical files.
pub fn collect(
    texts: &[TextRecord],
    task: Task,
    model: &str,
    backend: &dyn ChatBackend,
    config: &SamplerConfig,
    space: &LabelSpace,
    store: &Path,
) -> Result<RunSummary, SamplerError> {
    config.validate()?;
    let complete: HashSet<TupleKey> = load_store(store)?
        .into_iter()
        .filter(|r| r.is_complete())
        .map(|r| r.key())
        .collect();

    let mut jobs = Vec::new();
    let mut summary = RunSummary {
        model: model.to_string(),
        ..RunSummary::default()
    };
    for text in texts {
        for &temperature in &config.temperatures {
            for sample_index in 0..config.samples_per_temperature {
                summary.planned += 1;
                let key = (text.text_id.clone(), model.to_string(), temperature.to_bits(), sample_index);
                if complete.contains(&key) {
                    summary.skipped += 1;
                } else {
                    jobs.push(Job { text, temperature, sample_index });
                }
            }
        }
    }
    summary.attempted = jobs.len();
    if jobs.is_empty() {
        return Ok(summary);
    }

    let mut writer = StoreWriter::append_to(store)?;
    let next = AtomicUsize::new(0);
    let calls = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = config.concurrency_limit.clamp(1, jobs.len());

    let result: Result<(), SamplerError> = std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, StoreRecord)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next, calls, abort) = (&jobs, &next, &calls, &abort);
            scope.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let record = attempt(job, task, model, backend, config, space, calls);
                if tx.send((i, record)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Single writer; a reorder buffer keeps plan order on disk.
        let mut pending: BTreeMap<usize, StoreRecord> = BTreeMap::new();
        let mut expected = 0;
        for (i, record) in rx {
            pending.insert(i, record);
            while let Some(record) = pending.remove(&expected) {
                match record.parsed.failure() {
                    None => summary.succeeded += 1,
                    Some(FailureReason::BackendError) => summary.backend_failures += 1,
                    Some(reason) => *summary.parse_failures.entry(reason).or_default() += 1,
                }
                if let Err(e) = writer.append(&record) {
                    abort.store(true, Ordering::SeqCst);
                    return Err(e);
                }
                expected += 1;
            }
        }
        Ok(())
    });
    result?;

    summary.backend_calls = calls.load(Ordering::SeqCst);
    let failed = summary.backend_failures + summary.parse_failures.values().sum::<usize>();
    summary.failure_rate = failed as f64 / summary.attempted as f64;
    log::info!(
        "{model}: {} attempted, {} skipped, failure rate {:.4}",
        summary.attempted,
        summary.skipped,
        summary.failure_rate
    );
    Ok(summary)
}

fn attempt(
    job: &Job<'_>,
    task: Task,
    model: &str,
    backend: &dyn ChatBackend,
    config: &SamplerConfig,
    space: &LabelSpace,
    calls: &AtomicUsize,
) -> StoreRecord {
    let prompt = render_prompt(&job.text.text, task);
    let request = ChatRequest {
        model: model.to_string(),
        system: prompt.system,
        user: prompt.user,
        temperature: job.temperature,
        text_id: job.text.text_id.clone(),
        sample_index: job.sample_index,
    };
    let mut last_error = None;
    let mut raw = None;
    for _ in 0..=config.max_retries {
        calls.fetch_add(1, Ordering::SeqCst);
        match backend.complete(&request) {
            Ok(text) => {
                raw = Some(text);
                break;
            }
            Err(e) => {
                log::debug!("{} t={} #{}: {e}", request.text_id, request.temperature, request.sample_index);
                last_error = Some(e.to_string());
            }
        }
    }
    let parsed = match &raw {
        Some(text) => StoredParsed::from_parsed(&parse_response(text, task, space), space),
        None => StoredParsed::Failure(FailureReason::BackendError),
    };
    StoreRecord {
        text_id: request.text_id,
        model: request.model,
        temperature: request.temperature,
        sample_index: request.sample_index,
        error: if raw.is_none() { last_error } else { None },
        raw,
        parsed,
        timestamp: config.record_timestamps.then(now),
    }
}
