//! Configuration, the generational loop, persistence, and metric export.

mod checkpoint;
mod config;
mod export;
mod learner;
mod replay;
mod run;

pub use checkpoint::{checkpoint_name, list_checkpoints, Checkpoint, FORMAT_VERSION};
pub use config::{RunConfig, RunSettings};
pub use export::{export_metrics, load_run_checkpoints, METRICS_DIR};
pub use learner::{FormOracle, LifetimeLearner, PpoLearner};
pub use replay::{replay_verify, Mismatch, ReplayReport, REPLAY_TOLERANCE};
pub use run::{
    latest_checkpoint, read_events, read_generations, read_jsonl, run_evolution, AgentRecord, GenerationRecord,
    RunControl, RunOutcome, CHECKPOINT_DIR, CONFIG_FILE, DIAGNOSTIC_DIR, EVENTS_FILE, GENERATIONS_FILE,
};
