use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dramaturg_core::llm::BackendSpec;
use dramaturg_core::script::ScriptSetting;
use dramaturg_core::session::{EngineConfig, PlayRecord, SessionBuilder, SessionError, SessionStatus};
use thiserror::Error;

use crate::stats::RunStats;

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("at least one run is required")]
    NoRuns,
    #[error("cannot start a session: {0}")]
    Session(#[from] SessionError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchOptions {
    pub n_runs: usize,
    /// Run `i` uses seed `seed + i`.
    pub seed: u64,
    /// Runs executed in parallel.
    pub workers: usize,
    /// A run that has not finished after this many ticks counts as failed.
    pub max_ticks: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            n_runs: 10,
            seed: 0,
            workers: 1,
            max_ticks: 5_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run_id: String,
    pub seed: u64,
    /// The play as far as it got.
    pub record: PlayRecord,
    pub error: Option<String>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub runs: Vec<RunOutcome>,
    pub stats: RunStats,
}

pub fn run_id(index: usize) -> String {
    format!("run-{index:03}")
}

/// Play `n_runs` complete plays with no player and aggregate their
/// decision logs. A run that fails to generate is kept, marked failed, and
/// left out of the statistics.
pub fn run_batch(
    setting: &ScriptSetting,
    config: &EngineConfig,
    backend: &BackendSpec,
    options: &BatchOptions,
) -> Result<BatchOutput, BatchError> {
    if options.n_runs == 0 {
        return Err(BatchError::NoRuns);
    }
    config.validate().map_err(SessionError::from)?;
    let slots: Mutex<Vec<Option<Result<RunOutcome, BatchError>>>> =
        Mutex::new((0..options.n_runs).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = options.workers.clamp(1, options.n_runs);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= options.n_runs {
                    break;
                }
                let outcome = play_one(setting, config, backend, options, i);
                slots.lock().expect("slots lock")[i] = Some(outcome);
            });
        }
    });
    let runs = slots
        .into_inner()
        .expect("slots lock")
        .into_iter()
        .map(|r| r.expect("every run was played"))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = RunStats::from_decisions(runs.iter().map(|r| &r.record));
    Ok(BatchOutput { runs, stats })
}

fn play_one(
    setting: &ScriptSetting,
    config: &EngineConfig,
    backend: &BackendSpec,
    options: &BatchOptions,
    index: usize,
) -> Result<RunOutcome, BatchError> {
    let seed = options.seed.wrapping_add(index as u64);
    let run_id = run_id(index);
    let mut session = SessionBuilder::new(setting.clone(), backend.build(seed))
        .id(run_id.clone())
        .config(config.clone())
        .seed(seed)
        .build()?;
    let error = match session.run_to_end(options.max_ticks) {
        Err(e) => Some(e.to_string()),
        Ok(_) if session.status() != SessionStatus::Finished => {
            Some(format!("did not finish within {} ticks", options.max_ticks))
        }
        Ok(_) => None,
    };
    if let Some(e) = &error {
        log::warn!("{run_id} failed: {e}");
    }
    Ok(RunOutcome {
        run_id,
        seed,
        record: session.export_play(),
        error,
    })
}
