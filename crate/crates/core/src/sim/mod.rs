//! Discrete-event simulation of many nodes sharing one lossy broadcast
//! medium: event queue, unit-disk radio with collisions, random-direction
//! mobility, metrics and trace output.

mod metrics;
mod mobility;
mod scenario;
mod trace;
mod world;

pub use metrics::{median, percentile, MetricsReport, NodeMetrics, NodeRole, TxCounts};
pub use mobility::{MobilityParams, MobilityState, Mover, Position};
pub use scenario::{CollectionSpec, ConfigError, MediumParams, NodeCounts, RunParams, ScenarioConfig};
pub use trace::TraceSink;
pub use world::{run_scenario, run_scenario_traced, synthetic_file, World};
