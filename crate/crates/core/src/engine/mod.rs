//! Periodic channel execution over a frame-based, partition-parallel
//! pipeline.
//!
//! Partitions emulate cluster nodes: phase work runs on one thread per
//! partition and the reported wall time is the critical path (coordinator
//! busy time plus the slowest partition of each phase), measured with
//! per-thread CPU clocks so it is independent of host core count and load.
//! All data movement between phases goes through fixed-capacity frames.

mod exec;
mod timing;
mod wire;

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{classify_predicates, ChannelDefinition, ClassifiedPredicates, DslError};
use crate::eval::Fields;
use crate::ingest::Dataset;
use crate::subs::ChannelSubscriptions;
use crate::value::Micros;

pub use timing::thread_cpu_ns;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown dataset {0}")]
    UnknownDataset(String),
    #[error("plan mode {mode} unavailable: {reason}")]
    ModeUnavailable { mode: PlanMode, reason: String },
    #[error("parallelism must be at least 1")]
    InvalidParallelism,
    #[error(transparent)]
    Definition(#[from] DslError),
}

/// The six execution strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlanMode {
    /// Per-subscription evaluation over a full dataset scan.
    Original,
    /// Grouped subscriptions over a full scan.
    AggregatedSubs,
    /// UserParameters joined against the filtered data before the
    /// subscription side is touched.
    ParamJoin,
    /// Grouped subscriptions over the channel's ingestion-maintained index.
    BadIndexMode,
    /// Grouped subscriptions over a secondary value index on the most
    /// selective fixed predicate.
    TraditionalIndex,
    /// Parameter join over the ingestion-maintained index.
    FullyOptimized,
}

impl PlanMode {
    pub const ALL: [PlanMode; 6] = [
        PlanMode::Original,
        PlanMode::AggregatedSubs,
        PlanMode::ParamJoin,
        PlanMode::BadIndexMode,
        PlanMode::TraditionalIndex,
        PlanMode::FullyOptimized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlanMode::Original => "original",
            PlanMode::AggregatedSubs => "aggregated-subs",
            PlanMode::ParamJoin => "param-join",
            PlanMode::BadIndexMode => "bad-index",
            PlanMode::TraditionalIndex => "traditional-index",
            PlanMode::FullyOptimized => "fully-optimized",
        }
    }
}

impl std::fmt::Display for PlanMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PlanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlanMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown plan mode {s:?}"))
    }
}

/// Read view of the state one execution runs against.
pub struct ExecContext<'a> {
    pub datasets: &'a HashMap<String, Dataset>,
    pub subs: &'a ChannelSubscriptions,
}

/// Per-execution measurements.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionStats {
    /// Simulated critical-path wall time across partitions.
    pub wall_time_ms: f64,
    /// Primary-side records fetched or visited during data access.
    pub records_scanned: u64,
    /// Frames produced on the data and subscription sides combined.
    pub frames_produced: u64,
    /// Matched rows at the subscription-matching operator.
    pub join_rows: u64,
    /// Result records across all delivered groups.
    pub results_count: u64,
}

/// One projected result record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub pk: u64,
    pub fields: Fields,
}

/// Results for one subscription group with at least one match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub group_id: u64,
    pub broker: String,
    pub sub_ids: Vec<u64>,
    pub delivery_time: Micros,
    pub payload: Vec<ResultRecord>,
}

/// Everything one execution produced, in deterministic group order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelResultBatch {
    pub channel: String,
    pub execution_ts: Micros,
    pub groups: Vec<GroupResult>,
}

impl ChannelResultBatch {
    /// Flattens the batch to (subscription id, result pk) pairs. This is the
    /// plan-invariant delivery set: every mode must produce the same pairs.
    pub fn delivered_pairs(&self) -> HashSet<(u64, u64)> {
        let mut out = HashSet::new();
        for group in &self.groups {
            for sub in &group.sub_ids {
                for rec in &group.payload {
                    out.insert((*sub, rec.pk));
                }
            }
        }
        out
    }

    pub fn total_results(&self) -> u64 {
        self.groups.iter().map(|g| g.payload.len() as u64).sum()
    }
}

/// A deployed channel: its definition, classified predicates and execution
/// configuration, plus the high-water mark of the last execution.
#[derive(Debug, Clone)]
pub struct ChannelRuntime {
    pub def: ChannelDefinition,
    pub classified: ClassifiedPredicates,
    pub mode: PlanMode,
    partitions: usize,
    pub frame_size: usize,
    pub last_exec_ts: Micros,
    /// Field to drive the TraditionalIndex plan; probed from index
    /// statistics when unset.
    pub selective_field_hint: Option<String>,
}

impl ChannelRuntime {
    pub fn new(
        def: ChannelDefinition,
        mode: PlanMode,
        partitions: usize,
        frame_size: usize,
    ) -> Result<Self, EngineError> {
        if partitions == 0 {
            return Err(EngineError::InvalidParallelism);
        }
        let classified = classify_predicates(&def)?;
        Ok(ChannelRuntime {
            def,
            classified,
            mode,
            partitions,
            frame_size,
            last_exec_ts: 0,
            selective_field_hint: None,
        })
    }

    pub fn partitions(&self) -> usize {
        self.partitions
    }

    /// Changes the number of emulated partitions for subsequent executions.
    pub fn set_parallelism(&mut self, partitions: usize) -> Result<(), EngineError> {
        if partitions == 0 {
            return Err(EngineError::InvalidParallelism);
        }
        self.partitions = partitions;
        Ok(())
    }

    pub fn period_micros(&self) -> Micros {
        self.def.period_secs * 1_000_000
    }

    /// Executes the channel once over the window `(last_exec_ts, now]` and
    /// advances the high-water mark.
    pub fn execute(
        &mut self,
        ctx: &ExecContext,
        now: Micros,
    ) -> Result<(ChannelResultBatch, ExecutionStats), EngineError> {
        exec::execute_channel(self, ctx, now)
    }
}

/// A periodic execution that took longer (host wall clock, including the
/// sink) than the channel period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrunWarning {
    pub execution_index: usize,
    pub elapsed_ms: f64,
    pub period_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PeriodicReport {
    pub stats: Vec<ExecutionStats>,
    pub overruns: Vec<OverrunWarning>,
}

/// Runs `executions` back-to-back periodic windows, handing each batch to
/// the sink and flagging executions that overran the period.
pub fn run_periodic(
    rt: &mut ChannelRuntime,
    ctx: &ExecContext,
    executions: usize,
    mut sink: impl FnMut(ChannelResultBatch),
) -> Result<PeriodicReport, EngineError> {
    let period = rt.period_micros();
    let period_ms = period as f64 / 1_000.0;
    let mut report = PeriodicReport::default();
    for index in 0..executions {
        let now = rt.last_exec_ts + period;
        let started = Instant::now();
        let (batch, stats) = rt.execute(ctx, now)?;
        sink(batch);
        let elapsed_ms = started.elapsed().as_secs_f64() * 1_000.0;
        if elapsed_ms > period_ms {
            report.overruns.push(OverrunWarning { execution_index: index, elapsed_ms, period_ms });
        }
        report.stats.push(stats);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_channel_ddl;
    use crate::eval::Bindings;
    use crate::subs::{GroupCapacityPolicy, Subscription};
    use crate::value::Value;

    const POLICY: GroupCapacityPolicy =
        GroupCapacityPolicy { frame_size: 4096, per_entry_bytes: 40, header_bytes: 0 };

    fn hot_topics() -> ChannelDefinition {
        parse_channel_ddl(
            r#"CREATE CONTINUOUS PUSH CHANNEL HotTopics(MyState)
               PERIOD duration("PT10S") {
                 SELECT t.text FROM Tweets t
                 WHERE t.state=MyState AND t.retweet_count>100 AND is_new(t)}"#,
        )
        .unwrap()
    }

    fn tweet(state: &str, retweets: i64, text: &str) -> Fields {
        [
            ("state".to_string(), Value::Str(state.into())),
            ("retweet_count".to_string(), Value::Int(retweets)),
            ("text".to_string(), Value::Str(text.into())),
        ]
        .into_iter()
        .collect()
    }

    /// Tweets dataset with the channel registered, 200 records over 10s,
    /// plus a value index on state for the TraditionalIndex plan.
    fn tweets_dataset() -> Dataset {
        let def = hot_topics();
        let classified = classify_predicates(&def).unwrap();
        let mut ds = Dataset::new("Tweets");
        ds.create_value_index("state");
        ds.create_value_index("retweet_count");
        ds.register_channel_conditions(&def.name, "t", classified.fixed_for("t")).unwrap();
        for pk in 0..200u64 {
            let state = ["CA", "TX", "WY"][(pk % 3) as usize];
            let retweets = (pk * 7 % 300) as i64;
            ds.insert_record(pk, tweet(state, retweets, &format!("tweet {pk}")), pk * 50_000 + 1)
                .unwrap();
        }
        ds
    }

    fn subs_for(def: &ChannelDefinition) -> ChannelSubscriptions {
        let mut subs = ChannelSubscriptions::with_capacity(def.params.len(), POLICY, 4);
        for id in 0..30u64 {
            let state = ["CA", "TX", "OR"][(id % 3) as usize];
            let broker = if id % 5 == 0 { "brokerB" } else { "brokerA" };
            subs.add_subscription(Subscription {
                id,
                params: vec![Value::Str(state.into())],
                broker: broker.into(),
            })
            .unwrap();
        }
        subs
    }

    /// Independent oracle: nested loops over subscriptions and records.
    fn brute_force(
        def: &ChannelDefinition,
        ds: &Dataset,
        subs: &ChannelSubscriptions,
        since: Micros,
        now: Micros,
    ) -> HashSet<(u64, u64)> {
        let mut expected = HashSet::new();
        for group in subs.iter_groups() {
            let params: Vec<(String, Value)> =
                def.params.iter().cloned().zip(group.params.iter().cloned()).collect();
            for rec in ds.iter_arrival() {
                if rec.arrival_ts <= since || rec.arrival_ts > now {
                    continue;
                }
                let bindings = Bindings::new(vec![("t", &rec.fields)], &params);
                if bindings.eval_all(&def.predicates) {
                    for sub in &group.sub_ids {
                        expected.insert((*sub, rec.pk));
                    }
                }
            }
        }
        expected
    }

    #[test]
    fn all_modes_agree_with_brute_force() {
        let def = hot_topics();
        let ds = tweets_dataset();
        let subs = subs_for(&def);
        let expected = brute_force(&def, &ds, &subs, 0, 10_000_000);
        assert!(!expected.is_empty(), "test fixture must produce matches");
        let datasets: HashMap<String, Dataset> = [("Tweets".to_string(), ds)].into();
        let ctx = ExecContext { datasets: &datasets, subs: &subs };
        for mode in PlanMode::ALL {
            let mut rt = ChannelRuntime::new(def.clone(), mode, 2, 1024).unwrap();
            let (batch, stats) = rt.execute(&ctx, 10_000_000).unwrap();
            assert_eq!(batch.delivered_pairs(), expected, "mode {mode} diverged");
            assert!(stats.results_count > 0);
            assert!(stats.frames_produced > 0);
        }
    }

    #[test]
    fn output_independent_of_partition_count() {
        let def = hot_topics();
        let ds = tweets_dataset();
        let subs = subs_for(&def);
        let datasets: HashMap<String, Dataset> = [("Tweets".to_string(), ds)].into();
        let ctx = ExecContext { datasets: &datasets, subs: &subs };
        // Candidate order inside a payload follows data-partition order and
        // is not part of the contract; normalize it before comparing.
        let normalize = |mut batch: ChannelResultBatch| {
            for g in &mut batch.groups {
                g.payload.sort_by_key(|r| r.pk);
            }
            batch
        };
        let mut rt1 = ChannelRuntime::new(def.clone(), PlanMode::AggregatedSubs, 1, 1024).unwrap();
        let base = normalize(rt1.execute(&ctx, 10_000_000).unwrap().0);
        for p in [2, 3, 7] {
            let mut rt = ChannelRuntime::new(def.clone(), PlanMode::AggregatedSubs, p, 1024).unwrap();
            let batch = normalize(rt.execute(&ctx, 10_000_000).unwrap().0);
            assert_eq!(batch, base, "partition count {p} changed the output");
        }
    }

    #[test]
    fn windows_partition_the_stream() {
        let def = hot_topics();
        let ds = tweets_dataset();
        let subs = subs_for(&def);
        let datasets: HashMap<String, Dataset> = [("Tweets".to_string(), ds)].into();
        let ctx = ExecContext { datasets: &datasets, subs: &subs };
        let mut rt = ChannelRuntime::new(def.clone(), PlanMode::BadIndexMode, 2, 1024).unwrap();
        let mut windowed = HashSet::new();
        let report = run_periodic(&mut rt, &ctx, 2, |batch| {
            for pair in batch.delivered_pairs() {
                assert!(windowed.insert(pair), "pair delivered twice across windows");
            }
        })
        .unwrap();
        assert_eq!(report.stats.len(), 2);
        assert_eq!(rt.last_exec_ts, 20_000_000);
        let expected = brute_force(&def, &datasets["Tweets"], &subs, 0, 20_000_000);
        assert_eq!(windowed, expected);
    }

    #[test]
    fn original_mode_delivers_singleton_groups() {
        let def = hot_topics();
        let ds = tweets_dataset();
        let subs = subs_for(&def);
        let datasets: HashMap<String, Dataset> = [("Tweets".to_string(), ds)].into();
        let ctx = ExecContext { datasets: &datasets, subs: &subs };
        let mut rt = ChannelRuntime::new(def, PlanMode::Original, 2, 1024).unwrap();
        let (batch, _) = rt.execute(&ctx, 10_000_000).unwrap();
        assert!(!batch.groups.is_empty());
        assert!(batch.groups.iter().all(|g| g.sub_ids.len() == 1));
    }

    #[test]
    fn grouped_modes_share_payload_per_group() {
        let def = hot_topics();
        let ds = tweets_dataset();
        let subs = subs_for(&def);
        let datasets: HashMap<String, Dataset> = [("Tweets".to_string(), ds)].into();
        let ctx = ExecContext { datasets: &datasets, subs: &subs };
        let mut rt = ChannelRuntime::new(def, PlanMode::AggregatedSubs, 2, 1024).unwrap();
        let (batch, _) = rt.execute(&ctx, 10_000_000).unwrap();
        assert!(batch.groups.iter().any(|g| g.sub_ids.len() > 1));
        // Projection keeps only the selected field.
        for group in &batch.groups {
            for rec in &group.payload {
                assert_eq!(rec.fields.keys().collect::<Vec<_>>(), vec!["text"]);
            }
        }
    }

    #[test]
    fn index_mode_scans_fewer_records() {
        let def = hot_topics();
        let ds = tweets_dataset();
        let subs = subs_for(&def);
        let datasets: HashMap<String, Dataset> = [("Tweets".to_string(), ds)].into();
        let ctx = ExecContext { datasets: &datasets, subs: &subs };
        let mut scan_rt = ChannelRuntime::new(def.clone(), PlanMode::AggregatedSubs, 2, 1024).unwrap();
        let (_, scan_stats) = scan_rt.execute(&ctx, 10_000_000).unwrap();
        let mut idx_rt = ChannelRuntime::new(def, PlanMode::BadIndexMode, 2, 1024).unwrap();
        let (_, idx_stats) = idx_rt.execute(&ctx, 10_000_000).unwrap();
        assert_eq!(scan_stats.records_scanned, 200);
        assert!(idx_stats.records_scanned < scan_stats.records_scanned);
        // The ingestion-maintained index holds exactly the fixed-predicate
        // survivors, so the fetch count equals the index window size.
        let expected = datasets["Tweets"].index_scan("HotTopics", 0, 10_000_000).unwrap().len();
        assert_eq!(idx_stats.records_scanned as usize, expected);
    }

    #[test]
    fn bad_index_mode_requires_fixed_predicates() {
        let def = parse_channel_ddl(
            r#"CREATE CONTINUOUS PUSH CHANNEL AllByState(MyState)
               PERIOD duration("PT10S") {
                 SELECT t.text FROM Tweets t WHERE t.state=MyState AND is_new(t)}"#,
        )
        .unwrap();
        let ds = tweets_dataset();
        let subs = subs_for(&def);
        let datasets: HashMap<String, Dataset> = [("Tweets".to_string(), ds)].into();
        let ctx = ExecContext { datasets: &datasets, subs: &subs };
        let mut rt = ChannelRuntime::new(def, PlanMode::BadIndexMode, 2, 1024).unwrap();
        assert!(matches!(
            rt.execute(&ctx, 10_000_000),
            Err(EngineError::ModeUnavailable { .. })
        ));
    }

    #[test]
    fn two_dataset_channel_joins_existentially() {
        let def = parse_channel_ddl(
            r#"CREATE CONTINUOUS PUSH CHANNEL NearbyLoud(MyUserName)
               PERIOD duration("PT10S") {
                 SELECT t.text FROM Tweets t, Users u
                 WHERE spatial_distance(u.location,t.location)<5 AND u.username=MyUserName
                   AND t.retweet_count>100 AND is_new(t)}"#,
        )
        .unwrap();
        let classified = classify_predicates(&def).unwrap();
        let mut tweets = Dataset::new("Tweets");
        tweets.register_channel_conditions(&def.name, "t", classified.fixed_for("t")).unwrap();
        for pk in 0..50u64 {
            let fields: Fields = [
                ("retweet_count".to_string(), Value::Int((pk as i64 * 13) % 300)),
                ("location".to_string(), Value::Point(pk as f64 % 10.0, 0.0)),
                ("text".to_string(), Value::Str(format!("t{pk}"))),
            ]
            .into_iter()
            .collect();
            tweets.insert_record(pk, fields, pk * 100_000 + 1).unwrap();
        }
        let mut users = Dataset::new("Users");
        for (pk, (name, x)) in [("ann", 1.0), ("bob", 8.0)].iter().enumerate() {
            let fields: Fields = [
                ("username".to_string(), Value::Str((*name).into())),
                ("location".to_string(), Value::Point(*x, 0.0)),
            ]
            .into_iter()
            .collect();
            users.insert_record(pk as u64, fields, 1).unwrap();
        }
        let mut subs = ChannelSubscriptions::with_capacity(1, POLICY, 4);
        for (id, name) in [(0u64, "ann"), (1, "bob"), (2, "ann")] {
            subs.add_subscription(Subscription {
                id,
                params: vec![Value::Str(name.into())],
                broker: "brokerA".into(),
            })
            .unwrap();
        }
        let datasets: HashMap<String, Dataset> =
            [("Tweets".to_string(), tweets), ("Users".to_string(), users)].into();
        let ctx = ExecContext { datasets: &datasets, subs: &subs };

        // Oracle: nested loops over subs, tweets and users.
        let mut expected = HashSet::new();
        for group in subs.iter_groups() {
            let params: Vec<(String, Value)> =
                def.params.iter().cloned().zip(group.params.iter().cloned()).collect();
            for t in datasets["Tweets"].iter_arrival() {
                if t.arrival_ts > 10_000_000 {
                    continue;
                }
                let hit = datasets["Users"].iter_arrival().any(|u| {
                    let b = Bindings::new(vec![("t", &t.fields), ("u", &u.fields)], &params);
                    b.eval_all(&def.predicates)
                });
                if hit {
                    for sub in &group.sub_ids {
                        expected.insert((*sub, t.pk));
                    }
                }
            }
        }
        assert!(!expected.is_empty());

        for mode in PlanMode::ALL {
            if mode == PlanMode::TraditionalIndex {
                continue; // no value index in this fixture
            }
            let mut rt = ChannelRuntime::new(def.clone(), mode, 2, 1024).unwrap();
            let (batch, _) = rt.execute(&ctx, 10_000_000).unwrap();
            assert_eq!(batch.delivered_pairs(), expected, "mode {mode} diverged");
        }
    }

    #[test]
    fn traditional_index_picks_most_selective_field() {
        let def = hot_topics();
        let ds = tweets_dataset();
        let subs = subs_for(&def);
        let expected = brute_force(&def, &ds, &subs, 0, 10_000_000);
        let datasets: HashMap<String, Dataset> = [("Tweets".to_string(), ds)].into();
        let ctx = ExecContext { datasets: &datasets, subs: &subs };
        // Probed choice and an explicit hint must both be correct.
        for hint in [None, Some("state".to_string()), Some("retweet_count".to_string())] {
            let mut rt =
                ChannelRuntime::new(def.clone(), PlanMode::TraditionalIndex, 2, 1024).unwrap();
            rt.selective_field_hint = hint;
            let (batch, stats) = rt.execute(&ctx, 10_000_000).unwrap();
            assert_eq!(batch.delivered_pairs(), expected);
            assert!(stats.records_scanned <= 200);
        }
    }

    #[test]
    fn plan_mode_round_trips_names() {
        for mode in PlanMode::ALL {
            assert_eq!(mode.name().parse::<PlanMode>().unwrap(), mode);
        }
        assert!("bogus".parse::<PlanMode>().is_err());
    }
}
