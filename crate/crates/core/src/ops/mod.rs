//! Scheduling, online retraining, grid search and configuration.

mod config;
mod grid_search;
mod runlog;
mod runtime;
mod schedule;

pub use config::{GatewayConfig, LoadcastConfig};
pub use grid_search::{expand_grid, grid_search, GridReport, GridRow};
pub use runlog::{replay_versions, Outcome, RecordKind, RunLog, RunRecord};
pub use runtime::{clean_and_align, FaultStage, Runtime, RuntimeConfig, ALERT_AFTER};
pub use schedule::{tick, Action, ActionKind, Clock, PointBinding, ScheduleConfig, ScheduleState, SimClock, SystemClock};
