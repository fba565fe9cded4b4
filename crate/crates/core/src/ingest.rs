//! Record ingestion: per-dataset storage, the per-channel conditions lists,
//! and ingestion-maintained BAD indexes with arrival-time ordering.
//!
//! A newly registered channel's index covers only subsequent arrivals;
//! pre-existing records are not back-filled (`is_new` restricts channels to
//! new data anyway). Arrival timestamps are engine-assigned at insert and
//! non-decreasing, so every index is sorted by construction.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::PredicateAtom;
use crate::eval::{check_conditions, Fields};
use crate::value::{CmpOp, Micros, Value, ValueKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("channel {0} already registered on this dataset")]
    ChannelAlreadyRegistered(String),
    #[error("dataset {0} is not active")]
    InactiveDataset(String),
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error("duplicate primary key {0}")]
    DuplicatePrimaryKey(u64),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub pk: u64,
    pub fields: Fields,
    pub arrival_ts: Micros,
}

/// One channel's fixed-predicate group in a dataset's conditionsList.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionGroup {
    pub channel: String,
    /// The alias under which the channel refers to this dataset.
    pub alias: String,
    pub predicates: Vec<PredicateAtom>,
}

/// Per-channel ordered (arrival ts, pk) entries for records that passed all
/// the channel's fixed predicates at insertion time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BadIndex {
    entries: Vec<(Micros, u64)>,
}

impl BadIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Micros, u64)] {
        &self.entries
    }

    /// Pks with `since < ts <= until`, in arrival order.
    fn scan(&self, since: Micros, until: Micros) -> Vec<u64> {
        let lo = self.entries.partition_point(|(ts, _)| *ts <= since);
        let hi = self.entries.partition_point(|(ts, _)| *ts <= until);
        self.entries[lo..hi].iter().map(|(_, pk)| *pk).collect()
    }
}

/// Traditional secondary index over one field: every record is indexed,
/// relevant or not. Backs the engine's TraditionalIndex plan mode.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValueIndex {
    map: BTreeMap<Value, Vec<u64>>,
}

impl ValueIndex {
    fn insert(&mut self, value: Value, pk: u64) {
        self.map.entry(value).or_default().push(pk);
    }

    /// Pks whose indexed value satisfies `value <op> rhs`. Output order is
    /// index order, not arrival order.
    pub fn scan(&self, op: CmpOp, rhs: &Value) -> Vec<u64> {
        use std::ops::Bound::*;
        let range: Vec<&Vec<u64>> = match op {
            CmpOp::Eq => self.map.get(rhs).into_iter().collect(),
            CmpOp::Lt => self.map.range((Unbounded, Excluded(rhs.clone()))).map(|(_, v)| v).collect(),
            CmpOp::Le => self.map.range((Unbounded, Included(rhs.clone()))).map(|(_, v)| v).collect(),
            CmpOp::Gt => self.map.range((Excluded(rhs.clone()), Unbounded)).map(|(_, v)| v).collect(),
            CmpOp::Ge => self.map.range((Included(rhs.clone()), Unbounded)).map(|(_, v)| v).collect(),
        };
        range.into_iter().flatten().copied().collect()
    }

    /// Match count without materializing, for selectivity probing.
    pub fn count(&self, op: CmpOp, rhs: &Value) -> usize {
        self.scan(op, rhs).len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub active: bool,
    schema: Option<BTreeMap<String, ValueKind>>,
    /// Records in arrival order: an arena the scan operators stream over as
    /// contiguous memory.
    records: Vec<Record>,
    /// pk -> position in `records`.
    by_pk: HashMap<u64, usize>,
    conditions: Vec<ConditionGroup>,
    bad_indexes: HashMap<String, BadIndex>,
    value_indexes: BTreeMap<String, ValueIndex>,
    last_ts: Micros,
}

impl Dataset {
    pub fn new(name: impl Into<String>) -> Self {
        Dataset {
            name: name.into(),
            active: true,
            schema: None,
            records: Vec::new(),
            by_pk: HashMap::new(),
            conditions: Vec::new(),
            bad_indexes: HashMap::new(),
            value_indexes: BTreeMap::new(),
            last_ts: 0,
        }
    }

    pub fn with_schema(name: impl Into<String>, schema: BTreeMap<String, ValueKind>) -> Self {
        let mut ds = Dataset::new(name);
        ds.schema = Some(schema);
        ds
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_ts(&self) -> Micros {
        self.last_ts
    }

    pub fn record(&self, pk: u64) -> Option<&Record> {
        self.by_pk.get(&pk).map(|i| &self.records[*i])
    }

    /// Records in arrival order.
    pub fn iter_arrival(&self) -> impl Iterator<Item = &Record> {
        self.records.iter()
    }

    pub fn conditions_list(&self) -> &[ConditionGroup] {
        &self.conditions
    }

    pub fn bad_index(&self, channel: &str) -> Option<&BadIndex> {
        self.bad_indexes.get(channel)
    }

    pub fn value_index(&self, field: &str) -> Option<&ValueIndex> {
        self.value_indexes.get(field)
    }

    /// Adds a channel's fixed-condition group to the conditionsList and
    /// creates its (empty) BAD index. No-op when the group is empty: such
    /// channels execute by scan or parameter plans.
    pub fn register_channel_conditions(
        &mut self,
        channel: &str,
        alias: &str,
        fixed: &[PredicateAtom],
    ) -> Result<(), IngestError> {
        if !self.active {
            return Err(IngestError::InactiveDataset(self.name.clone()));
        }
        if fixed.is_empty() {
            return Ok(());
        }
        if self.bad_indexes.contains_key(channel) {
            return Err(IngestError::ChannelAlreadyRegistered(channel.to_string()));
        }
        self.conditions.push(ConditionGroup {
            channel: channel.to_string(),
            alias: alias.to_string(),
            predicates: fixed.to_vec(),
        });
        self.bad_indexes.insert(channel.to_string(), BadIndex::default());
        Ok(())
    }

    pub fn drop_channel_conditions(&mut self, channel: &str) -> Result<(), IngestError> {
        if self.bad_indexes.remove(channel).is_none() {
            return Err(IngestError::UnknownChannel(channel.to_string()));
        }
        self.conditions.retain(|c| c.channel != channel);
        Ok(())
    }

    /// Maintains a traditional value index over `field`, back-filled over
    /// existing records in arrival order.
    pub fn create_value_index(&mut self, field: &str) {
        if self.value_indexes.contains_key(field) {
            return;
        }
        let mut index = ValueIndex::default();
        for rec in &self.records {
            if let Some(v) = rec.fields.get(field) {
                index.insert(v.clone(), rec.pk);
            }
        }
        self.value_indexes.insert(field.to_string(), index);
    }

    /// Stores a record, checks it against every conditionsList group and
    /// appends (ts, pk) to each satisfied channel's BAD index. Returns the
    /// affected channel names in conditionsList order.
    pub fn insert_record(
        &mut self,
        pk: u64,
        fields: Fields,
        arrival_ts: Micros,
    ) -> Result<Vec<String>, IngestError> {
        if self.by_pk.contains_key(&pk) {
            return Err(IngestError::DuplicatePrimaryKey(pk));
        }
        if let Some(schema) = &self.schema {
            for (name, kind) in schema {
                match fields.get(name) {
                    None => {
                        return Err(IngestError::SchemaViolation(format!(
                            "missing required field {name}"
                        )))
                    }
                    Some(v) if v.kind() != *kind => {
                        return Err(IngestError::SchemaViolation(format!(
                            "field {name} has kind {:?}, expected {kind:?}",
                            v.kind()
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        debug_assert!(arrival_ts >= self.last_ts, "arrival timestamps must be non-decreasing");
        let ts = arrival_ts.max(self.last_ts);
        self.last_ts = ts;

        let mut touched = Vec::new();
        for group in &self.conditions {
            if check_conditions(&group.alias, &fields, &group.predicates) {
                self.bad_indexes
                    .get_mut(&group.channel)
                    .expect("index exists for every conditions entry")
                    .entries
                    .push((ts, pk));
                touched.push(group.channel.clone());
            }
        }
        for (field, index) in self.value_indexes.iter_mut() {
            if let Some(v) = fields.get(field) {
                index.insert(v.clone(), pk);
            }
        }
        self.by_pk.insert(pk, self.records.len());
        self.records.push(Record { pk, fields, arrival_ts: ts });
        Ok(touched)
    }

    /// Time-filtered BAD index lookup: pks with `since < ts <= until` in
    /// arrival order.
    pub fn index_scan(
        &self,
        channel: &str,
        since: Micros,
        until: Micros,
    ) -> Result<Vec<u64>, IngestError> {
        let index = self
            .bad_indexes
            .get(channel)
            .ok_or_else(|| IngestError::UnknownChannel(channel.to_string()))?;
        Ok(index.scan(since, until))
    }
}

/// Outcome of a [`feed`] run. When an insert fails the feed stops and the
/// report covers what was ingested, with the error attached.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedReport {
    pub count: u64,
    pub min_ts: Micros,
    pub max_ts: Micros,
    pub aborted: Option<IngestError>,
}

/// Ingests `rate_per_sec * duration_secs` records from the generator with
/// arrival timestamps spread uniformly across the interval starting right
/// after `start_ts`.
pub fn feed<G>(
    ds: &mut Dataset,
    mut generator: G,
    rate_per_sec: u64,
    duration_secs: u64,
    start_ts: Micros,
) -> FeedReport
where
    G: FnMut(u64) -> (u64, Fields),
{
    let total = rate_per_sec * duration_secs;
    let mut report = FeedReport { count: 0, min_ts: 0, max_ts: 0, aborted: None };
    for i in 0..total {
        let ts = start_ts + ((i + 1) * 1_000_000) / rate_per_sec;
        let (pk, fields) = generator(i);
        match ds.insert_record(pk, fields, ts) {
            Ok(_) => {
                if report.count == 0 {
                    report.min_ts = ts;
                }
                report.max_ts = ts;
                report.count += 1;
            }
            Err(e) => {
                report.aborted = Some(e);
                break;
            }
        }
    }
    report
}
