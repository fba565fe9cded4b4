//! `BadSystem`: the embedded facade tying datasets, channels, subscriptions
//! and brokers together behind one single-writer API.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::broker::{BrokerError, BrokerRegistry, DeliveryReport, Endpoint};
use crate::dsl::{classify_predicates, parse_channel_ddl, parse_subscribe, print_channel_ddl, DslError};
use crate::engine::{
    run_periodic, ChannelResultBatch, ChannelRuntime, EngineError, ExecContext, ExecutionStats,
    OverrunWarning, PlanMode,
};
use crate::eval::Fields;
use crate::ingest::{Dataset, IngestError};
use crate::subs::{ChannelSubscriptions, GroupCapacityPolicy, SubsError, Subscription};
use crate::value::{Micros, Value, ValueKind};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("unknown dataset {0}")]
    UnknownDataset(String),
    #[error("dataset {0} already exists")]
    DuplicateDataset(String),
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error("channel {0} already exists")]
    DuplicateChannel(String),
    #[error("unknown broker {0}")]
    UnknownBroker(String),
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Subs(#[from] SubsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Broker(#[from] BrokerError),
}

struct Channel {
    runtime: ChannelRuntime,
    subs: ChannelSubscriptions,
}

/// Outcome of a delivered periodic run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub stats: Vec<ExecutionStats>,
    pub deliveries: Vec<DeliveryReport>,
    pub overruns: Vec<OverrunWarning>,
}

pub const DEFAULT_POLICY: GroupCapacityPolicy =
    GroupCapacityPolicy { frame_size: 40_960, per_entry_bytes: 40, header_bytes: 0 };

/// An embedded big-active-data instance. One logical writer mutates it;
/// executions read consistent snapshots of its state.
pub struct BadSystem {
    policy: GroupCapacityPolicy,
    partitions: usize,
    datasets: HashMap<String, Dataset>,
    channels: HashMap<String, Channel>,
    brokers: BrokerRegistry,
    sub_channel: HashMap<u64, String>,
    next_sub_id: u64,
}

impl BadSystem {
    pub fn new() -> Self {
        Self::with_policy(DEFAULT_POLICY, 4)
    }

    pub fn with_policy(policy: GroupCapacityPolicy, partitions: usize) -> Self {
        BadSystem {
            policy,
            partitions,
            datasets: HashMap::new(),
            channels: HashMap::new(),
            brokers: BrokerRegistry::new(),
            sub_channel: HashMap::new(),
            next_sub_id: 0,
        }
    }

    pub fn policy(&self) -> &GroupCapacityPolicy {
        &self.policy
    }

    // ---- datasets -------------------------------------------------------

    pub fn create_dataset(&mut self, name: &str) -> Result<(), SystemError> {
        if self.datasets.contains_key(name) {
            return Err(SystemError::DuplicateDataset(name.to_string()));
        }
        self.datasets.insert(name.to_string(), Dataset::new(name));
        Ok(())
    }

    pub fn create_dataset_with_schema(
        &mut self,
        name: &str,
        schema: BTreeMap<String, ValueKind>,
    ) -> Result<(), SystemError> {
        if self.datasets.contains_key(name) {
            return Err(SystemError::DuplicateDataset(name.to_string()));
        }
        self.datasets.insert(name.to_string(), Dataset::with_schema(name, schema));
        Ok(())
    }

    pub fn dataset(&self, name: &str) -> Option<&Dataset> {
        self.datasets.get(name)
    }

    pub fn dataset_mut(&mut self, name: &str) -> Option<&mut Dataset> {
        self.datasets.get_mut(name)
    }

    pub fn create_value_index(&mut self, dataset: &str, field: &str) -> Result<(), SystemError> {
        self.datasets
            .get_mut(dataset)
            .ok_or_else(|| SystemError::UnknownDataset(dataset.to_string()))?
            .create_value_index(field);
        Ok(())
    }

    /// Inserts one record with an engine-assigned arrival timestamp right
    /// after the dataset's current high-water mark.
    pub fn insert(&mut self, dataset: &str, pk: u64, fields: Fields) -> Result<(), SystemError> {
        let ds = self
            .datasets
            .get_mut(dataset)
            .ok_or_else(|| SystemError::UnknownDataset(dataset.to_string()))?;
        let ts = ds.last_ts() + 1;
        ds.insert_record(pk, fields, ts)?;
        Ok(())
    }

    pub fn insert_at(
        &mut self,
        dataset: &str,
        pk: u64,
        fields: Fields,
        ts: Micros,
    ) -> Result<(), SystemError> {
        self.datasets
            .get_mut(dataset)
            .ok_or_else(|| SystemError::UnknownDataset(dataset.to_string()))?
            .insert_record(pk, fields, ts)?;
        Ok(())
    }

    /// Ingests newline-delimited JSON records of the form
    /// `{"pk": 1, "fields": {"a": 1, "b": "x", "c": [1.0, 2.0]}}`.
    /// Returns the number of records ingested.
    pub fn ingest_ndjson(&mut self, dataset: &str, input: &str) -> Result<u64, SystemError> {
        let mut count = 0;
        for line in input.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parsed: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| SystemError::MalformedRecord(e.to_string()))?;
            let pk = parsed
                .get("pk")
                .and_then(serde_json::Value::as_u64)
                .ok_or_else(|| SystemError::MalformedRecord("missing numeric pk".into()))?;
            let raw = parsed
                .get("fields")
                .and_then(serde_json::Value::as_object)
                .ok_or_else(|| SystemError::MalformedRecord("missing fields object".into()))?;
            let mut fields = Fields::new();
            for (name, v) in raw {
                let value = value_from_json(v).ok_or_else(|| {
                    SystemError::MalformedRecord(format!("unsupported value for field {name}"))
                })?;
                fields.insert(name.clone(), value);
            }
            self.insert(dataset, pk, fields)?;
            count += 1;
        }
        Ok(count)
    }

    // ---- brokers --------------------------------------------------------

    pub fn register_broker(
        &mut self,
        name: &str,
        endpoint: Endpoint,
    ) -> Result<(), SystemError> {
        self.brokers.register(name, endpoint)?;
        Ok(())
    }

    // ---- channels -------------------------------------------------------

    /// Parses and deploys a channel: classifies its predicates, registers
    /// the fixed groups on the referenced datasets (which must exist) and
    /// opens an empty subscription registry.
    pub fn define_channel(&mut self, ddl: &str, mode: PlanMode) -> Result<String, SystemError> {
        let def = parse_channel_ddl(ddl)?;
        if self.channels.contains_key(&def.name) {
            return Err(SystemError::DuplicateChannel(def.name.clone()));
        }
        let classified = classify_predicates(&def)?;
        for ds_ref in &def.datasets {
            if !self.datasets.contains_key(&ds_ref.name) {
                return Err(SystemError::UnknownDataset(ds_ref.name.clone()));
            }
        }
        for ds_ref in &def.datasets {
            let fixed = classified.fixed_for(&ds_ref.alias);
            self.datasets
                .get_mut(&ds_ref.name)
                .expect("checked above")
                .register_channel_conditions(&def.name, &ds_ref.alias, fixed)?;
        }
        let subs = ChannelSubscriptions::new(def.params.len(), self.policy)?;
        let name = def.name.clone();
        let runtime = ChannelRuntime::new(def, mode, self.partitions, self.policy.frame_size)?;
        self.channels.insert(name.clone(), Channel { runtime, subs });
        Ok(name)
    }

    pub fn drop_channel(&mut self, name: &str) -> Result<(), SystemError> {
        let channel = self
            .channels
            .remove(name)
            .ok_or_else(|| SystemError::UnknownChannel(name.to_string()))?;
        for ds_ref in &channel.runtime.def.datasets {
            if let Some(ds) = self.datasets.get_mut(&ds_ref.name) {
                // Channels without fixed predicates never registered a group.
                let _ = ds.drop_channel_conditions(name);
            }
        }
        self.sub_channel.retain(|_, ch| ch != name);
        Ok(())
    }

    pub fn channel_runtime(&self, name: &str) -> Option<&ChannelRuntime> {
        self.channels.get(name).map(|c| &c.runtime)
    }

    pub fn channel_runtime_mut(&mut self, name: &str) -> Option<&mut ChannelRuntime> {
        self.channels.get_mut(name).map(|c| &mut c.runtime)
    }

    pub fn subscriptions(&self, channel: &str) -> Option<&ChannelSubscriptions> {
        self.channels.get(channel).map(|c| &c.subs)
    }

    // ---- subscriptions --------------------------------------------------

    /// Executes a `SUBSCRIBE TO channel(args) ON broker` statement and
    /// returns the new subscription id.
    pub fn subscribe(&mut self, statement: &str) -> Result<u64, SystemError> {
        let stmt = parse_subscribe(statement)?;
        self.subscribe_values(&stmt.channel_name, stmt.arg_values, &stmt.broker_name)
    }

    pub fn subscribe_values(
        &mut self,
        channel: &str,
        params: Vec<Value>,
        broker: &str,
    ) -> Result<u64, SystemError> {
        if !self.brokers.contains(broker) {
            return Err(SystemError::UnknownBroker(broker.to_string()));
        }
        let ch = self
            .channels
            .get_mut(channel)
            .ok_or_else(|| SystemError::UnknownChannel(channel.to_string()))?;
        let id = self.next_sub_id;
        ch.subs.add_subscription(Subscription { id, params, broker: broker.to_string() })?;
        self.next_sub_id += 1;
        self.sub_channel.insert(id, channel.to_string());
        Ok(id)
    }

    pub fn unsubscribe(&mut self, sub_id: u64) -> Result<(), SystemError> {
        let channel = self
            .sub_channel
            .remove(&sub_id)
            .ok_or(SystemError::Subs(SubsError::UnknownSubscription(sub_id)))?;
        self.channels
            .get_mut(&channel)
            .expect("subscription maps to a live channel")
            .subs
            .remove_subscription(sub_id)?;
        Ok(())
    }

    // ---- execution ------------------------------------------------------

    /// Executes one channel over the window ending at `now`, without
    /// delivering the results.
    pub fn execute_channel(
        &mut self,
        name: &str,
        now: Micros,
    ) -> Result<(ChannelResultBatch, ExecutionStats), SystemError> {
        let ch = self
            .channels
            .get_mut(name)
            .ok_or_else(|| SystemError::UnknownChannel(name.to_string()))?;
        let ctx = ExecContext { datasets: &self.datasets, subs: &ch.subs };
        Ok(ch.runtime.execute(&ctx, now)?)
    }

    /// Runs `executions` periodic windows of a channel, delivering each
    /// batch to the registered brokers.
    pub fn run_channel(&mut self, name: &str, executions: usize) -> Result<RunReport, SystemError> {
        let ch = self
            .channels
            .get_mut(name)
            .ok_or_else(|| SystemError::UnknownChannel(name.to_string()))?;
        let Channel { runtime, subs } = ch;
        let ctx = ExecContext { datasets: &self.datasets, subs };
        let brokers = &mut self.brokers;
        let mut deliveries = Vec::new();
        let mut delivery_error: Option<BrokerError> = None;
        let periodic = run_periodic(runtime, &ctx, executions, |batch| {
            if delivery_error.is_some() {
                return;
            }
            match brokers.deliver_batch(&batch) {
                Ok(report) => deliveries.push(report),
                Err(e) => delivery_error = Some(e),
            }
        })?;
        if let Some(e) = delivery_error {
            return Err(e.into());
        }
        Ok(RunReport { stats: periodic.stats, deliveries, overruns: periodic.overruns })
    }

    /// JSON snapshot of the deployed state, for inspection and dumps.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut datasets: Vec<_> = self
            .datasets
            .values()
            .map(|ds| {
                json!({
                    "name": ds.name,
                    "records": ds.len(),
                    "lastTs": ds.last_ts(),
                    "conditions": ds.conditions_list().iter().map(|c| json!({
                        "channel": c.channel,
                        "predicates": c.predicates.len(),
                        "indexSize": ds.bad_index(&c.channel).map(|i| i.len()),
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        datasets.sort_by_key(|d| d["name"].as_str().unwrap_or_default().to_string());
        let mut channels: Vec<_> = self
            .channels
            .values()
            .map(|c| {
                json!({
                    "name": c.runtime.def.name,
                    "ddl": print_channel_ddl(&c.runtime.def),
                    "mode": c.runtime.mode.name(),
                    "periodSecs": c.runtime.def.period_secs,
                    "subscriptions": c.subs.len(),
                    "groups": c.subs.iter_groups().count(),
                    "lastExecTs": c.runtime.last_exec_ts,
                })
            })
            .collect();
        channels.sort_by_key(|c| c["name"].as_str().unwrap_or_default().to_string());
        json!({
            "datasets": datasets,
            "channels": channels,
            "brokers": self.brokers.names(),
        })
    }
}

impl Default for BadSystem {
    fn default() -> Self {
        Self::new()
    }
}

/// Maps plain JSON values onto engine values: strings, integers, booleans
/// and two-element numeric arrays as points.
pub fn value_from_json(v: &serde_json::Value) -> Option<Value> {
    match v {
        serde_json::Value::String(s) => Some(Value::Str(s.clone())),
        serde_json::Value::Number(n) => n.as_i64().map(Value::Int),
        serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
        serde_json::Value::Array(items) => match items.as_slice() {
            [x, y] => Some(Value::Point(x.as_f64()?, y.as_f64()?)),
            _ => None,
        },
        _ => None,
    }
}
