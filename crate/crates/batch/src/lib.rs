//! Batch evaluation of generated plays: run many complete plays without a
//! player, aggregate objective-completion statistics, score the director's
//! objective checks against human labels, and ask a judge model to rate
//! storylines.

pub mod ablate;
pub mod judge;
pub mod metrics;
pub mod run;
pub mod stats;

pub use ablate::{ablate, ablation_configs, AblationGroup, AblationReport, GroupRuns};
pub use judge::{judge_storylines, DimensionMeans, JudgeReport, RunJudgement};
pub use metrics::{
    annotation_sheet, check_event_id, read_annotations, score_checks, to_jsonl, CheckAnnotation, Confusion,
    CorrectnessReport, MetricsError, SheetEntry,
};
pub use run::{run_batch, BatchError, BatchOptions, BatchOutput, RunOutcome};
pub use stats::{ObjectiveStats, RunStats};
