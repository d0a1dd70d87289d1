//! Event-driven simulation of the exclusion process with Glauber flips and
//! boundary reservoirs, optionally tilted by drifts `G` and `H`.

mod engine;
mod event_log;
mod likelihood;
mod run;
mod state;
mod tree;

pub use engine::{channel_count, jump_rates, Channel, RateCatalogue};
pub use event_log::{Event, EventLog, RECORD_BYTES};
pub use likelihood::{exact_tilted_moment, log_radon_nikodym, MAX_EXACT_N};
pub use run::{run, run_replicas, SimOutput};
pub use state::{sample_initial, LatticeState, SimParams, DEFAULT_EVENT_CAP};
