//! Embedded engine for big active data: continuous push channels over
//! ingested datasets, with grouped subscriptions, ingestion-maintained
//! partial indexes and broker delivery.
//!
//! The crate is organized along the data path:
//!
//! - [`dsl`]: channel definition language and predicate classification
//! - [`subs`]: subscription groups and the UserParameters view
//! - [`ingest`]: datasets, conditions lists and index maintenance
//! - [`engine`]: periodic channel execution under six plan modes
//! - [`broker`]: result delivery and the wire format
//! - [`system`]: the facade tying the pieces together

pub mod broker;
pub mod dsl;
pub mod engine;
pub mod eval;
pub mod frame;
pub mod generator;
pub mod ingest;
pub mod subs;
pub mod system;
pub mod value;

pub use broker::{BrokerRegistry, DeliveryReport, Endpoint};
pub use dsl::{classify_predicates, parse_channel_ddl, parse_subscribe, ChannelDefinition};
pub use engine::{
    run_periodic, ChannelResultBatch, ChannelRuntime, EngineError, ExecContext, ExecutionStats,
    GroupResult, PlanMode,
};
pub use ingest::{feed, Dataset, Record};
pub use subs::{
    acceptable_group_size, ChannelSubscriptions, GroupCapacityPolicy, Subscription,
    SubscriptionGroup,
};
pub use system::BadSystem;
pub use value::{CmpOp, Micros, Value};
