//! Deterministic discrete-event simulator for an LTE-VANET routing scheme in
//! which dual-interface vehicles elect themselves as mobile Internet gateways,
//! advertise routes a bounded number of hops into the vehicular network, answer
//! bounded-hop route solicitations, and hand flows over to a fresh gateway
//! shortly before the route in use is predicted to break.
//!
//! Layout:
//! - [`metrics`]  pure link/route/contention formulas (no state, no RNG)
//! - [`mobility`] synthetic highway traces, trace import, interpolation
//! - [`radio`]    fading channel, coverage tests, transmission delays
//! - [`engine`]   event queue, simulation clock, named RNG streams
//! - [`protocol`] message types, routing table, role/eligibility logic
//! - [`sim`]      the event-driven simulation wiring all of the above
//! - [`measure`]  run statistics and derived performance metrics
//! - [`config`]   scenario description, file/override parsing, validation

pub mod config;
pub mod engine;
pub mod measure;
pub mod metrics;
pub mod mobility;
pub mod protocol;
pub mod radio;
pub mod sim;

pub use config::{ConfigError, ConfigLoader, ParamSource, ResolvedParam, ScenarioConfig, Variant};
pub use measure::{ControlKind, DerivedMetrics, DropCause, RunStats};
pub use metrics::{ChannelParams, ContentionWeights, Kinematics, NakagamiShape, SpeedWindow};
pub use mobility::{Trace, TraceBuilder, VehicleId, VehicleSpec};
pub use protocol::{AdvMessage, NodeRole, RouteEntry, RoutingTable, SolMessage};
pub use radio::RadioConfig;
pub use sim::{LogEvent, LogRecord, RunOutcome, SimError, Simulation};
