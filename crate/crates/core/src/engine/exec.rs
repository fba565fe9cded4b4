//! One channel execution: data access, subscription matching and result
//! grouping, pipelined over frames across emulated partitions.
//!
//! Phase A produces candidate frames per partition (full scan, BAD index
//! lookup or value-index probe depending on the plan mode). The coordinator
//! then serializes the subscription side into frames — whole groups, per-
//! subscription singletons, or only parameter-matched groups when the
//! UserParameters join runs first. Phase B deals sub frames to partitions
//! round-robin; each partition matches its groups against the broadcast
//! candidates. Merging by frame sequence makes the output order independent
//! of the partition count.

use std::collections::HashMap;

use crate::dsl::{Operand, PredicateAtom};
use crate::eval::{check_conditions, Bindings, Fields};
use crate::frame::{pack_frames, Frame};
use crate::ingest::{Dataset, Record};
use crate::subs::SubscriptionGroup;
use crate::value::{CmpOp, Micros, Value};

use super::timing::{run_partitioned, BusyClock};
use super::wire;
use super::{
    ChannelResultBatch, ChannelRuntime, EngineError, ExecContext, ExecutionStats, GroupResult,
    PlanMode, ResultRecord,
};

enum DataAccess {
    Scan,
    BadIndex,
    Traditional,
}

impl PlanMode {
    fn data_access(self) -> DataAccess {
        match self {
            PlanMode::Original | PlanMode::AggregatedSubs | PlanMode::ParamJoin => DataAccess::Scan,
            PlanMode::BadIndexMode | PlanMode::FullyOptimized => DataAccess::BadIndex,
            PlanMode::TraditionalIndex => DataAccess::Traditional,
        }
    }

    fn param_join(self) -> bool {
        matches!(self, PlanMode::ParamJoin | PlanMode::FullyOptimized)
    }

    fn singleton_subs(self) -> bool {
        matches!(self, PlanMode::Original)
    }
}

/// Secondary-dataset context for two-dataset channels: records that already
/// passed the secondary's fixed predicates, plus the atoms (joins and
/// secondary parameterized predicates) that still need both sides bound.
struct SecondaryCtx<'a> {
    alias: &'a str,
    records: Vec<&'a Fields>,
    atoms: Vec<&'a PredicateAtom>,
}

/// Evaluates the non-fixed predicates of one candidate under one parameter
/// binding. A two-dataset channel matches when some secondary record
/// satisfies every join and secondary predicate (existential semantics).
struct Matcher<'a> {
    primary_alias: &'a str,
    param_atoms: &'a [PredicateAtom],
    secondary: Option<&'a SecondaryCtx<'a>>,
}

impl Matcher<'_> {
    fn matches(&self, cand: &Fields, params: &[(String, Value)]) -> bool {
        let bindings = Bindings::new(vec![(self.primary_alias, cand)], params);
        if !self.param_atoms.iter().all(|a| bindings.eval(a)) {
            return false;
        }
        match self.secondary {
            None => true,
            Some(sec) => sec.records.iter().any(|sf| {
                let both =
                    Bindings::new(vec![(self.primary_alias, cand), (sec.alias, sf)], params);
                sec.atoms.iter().all(|a| both.eval(a))
            }),
        }
    }
}

fn project(fields: &Fields, proj: &[&str]) -> Fields {
    proj.iter()
        .filter_map(|name| fields.get(*name).map(|v| ((*name).to_string(), v.clone())))
        .collect()
}

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Eq => CmpOp::Eq,
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Ge => CmpOp::Le,
    }
}

#[derive(Clone)]
struct ChosenPred {
    atom_idx: usize,
    field: String,
    op: CmpOp,
    rhs: Value,
}

/// Picks the fixed predicate to drive the TraditionalIndex plan: the hinted
/// field when set and indexed, otherwise the indexed predicate with the
/// fewest index matches.
fn choose_traditional(
    rt: &ChannelRuntime,
    ds: &Dataset,
    fixed: &[PredicateAtom],
) -> Result<ChosenPred, EngineError> {
    let unavailable = |reason: &str| EngineError::ModeUnavailable {
        mode: PlanMode::TraditionalIndex,
        reason: reason.to_string(),
    };
    let mut options = Vec::new();
    for (atom_idx, atom) in fixed.iter().enumerate() {
        if let PredicateAtom::Compare { lhs, op, rhs } = atom {
            let chosen = match (lhs, rhs) {
                (Operand::Field(fr), Operand::Literal(v)) => {
                    ChosenPred { atom_idx, field: fr.field.clone(), op: *op, rhs: v.clone() }
                }
                (Operand::Literal(v), Operand::Field(fr)) => {
                    ChosenPred { atom_idx, field: fr.field.clone(), op: flip(*op), rhs: v.clone() }
                }
                _ => continue,
            };
            if ds.value_index(&chosen.field).is_some() {
                options.push(chosen);
            }
        }
    }
    if options.is_empty() {
        return Err(unavailable("no fixed predicate has a value index"));
    }
    if let Some(hint) = &rt.selective_field_hint {
        if let Some(c) = options.iter().find(|c| &c.field == hint) {
            return Ok(c.clone());
        }
    }
    options
        .into_iter()
        .min_by_key(|c| ds.value_index(&c.field).expect("retained above").count(c.op, &c.rhs))
        .ok_or_else(|| unavailable("no usable predicate"))
}

/// Full dataset scan, one task per partition over that partition's records.
fn scan_access(
    ds: &Dataset,
    alias: &str,
    fixed: &[PredicateAtom],
    since: Micros,
    now: Micros,
    partitions: usize,
    frame_size: usize,
) -> (Vec<Vec<Frame>>, u64, u64) {
    // Contiguous arrival-order ownership: each partition's working set is a
    // compact slice of the dataset, as it would be on a real storage node.
    let all: Vec<&Record> = ds.iter_arrival().collect();
    let tasks: Vec<_> = chunk_evenly(all, partitions)
        .into_iter()
        .map(|recs| {
            move || {
                let mut scanned = 0u64;
                let mut cands = Vec::new();
                for rec in recs {
                    scanned += 1;
                    if rec.arrival_ts <= since || rec.arrival_ts > now {
                        continue;
                    }
                    if !check_conditions(alias, &rec.fields, fixed) {
                        continue;
                    }
                    cands.push(wire::encode_candidate(rec.pk, &rec.fields));
                }
                (scanned, pack_frames(cands.iter().map(Vec::as_slice), frame_size))
            }
        })
        .collect();
    collect_access(run_partitioned(tasks))
}

/// Window and residual predicates re-applied after a value-index probe.
struct Refetch<'a> {
    alias: &'a str,
    remaining: Vec<PredicateAtom>,
    since: Micros,
    now: Micros,
}

/// Splits `items` into `n` contiguous chunks whose sizes differ by at most
/// one, preserving order.
fn chunk_evenly<T>(items: Vec<T>, n: usize) -> Vec<Vec<T>> {
    let total = items.len();
    let base = total / n;
    let extra = total % n;
    let mut out = Vec::with_capacity(n);
    let mut iter = items.into_iter();
    for w in 0..n {
        let take = base + usize::from(w < extra);
        out.push(iter.by_ref().take(take).collect());
    }
    out
}

/// Point fetches of index-produced pks, partitioned by key.
fn fetch_access(
    ds: &Dataset,
    pks: Vec<u64>,
    partitions: usize,
    frame_size: usize,
    refetch: Option<&Refetch<'_>>,
) -> (Vec<Vec<Frame>>, u64, u64) {
    let tasks: Vec<_> = chunk_evenly(pks, partitions)
        .into_iter()
        .map(|pks| {
            move || {
                let mut scanned = 0u64;
                let mut cands = Vec::new();
                for pk in pks {
                    let rec = ds.record(pk).expect("index entries reference live records");
                    scanned += 1;
                    if let Some(f) = refetch {
                        if rec.arrival_ts <= f.since || rec.arrival_ts > f.now {
                            continue;
                        }
                        if !check_conditions(f.alias, &rec.fields, &f.remaining) {
                            continue;
                        }
                    }
                    cands.push(wire::encode_candidate(rec.pk, &rec.fields));
                }
                (scanned, pack_frames(cands.iter().map(Vec::as_slice), frame_size))
            }
        })
        .collect();
    collect_access(run_partitioned(tasks))
}

fn collect_access(
    (results, busy): (Vec<(u64, Vec<Frame>)>, u64),
) -> (Vec<Vec<Frame>>, u64, u64) {
    let mut frames = Vec::new();
    let mut scanned = 0;
    for (n, f) in results {
        scanned += n;
        frames.push(f);
    }
    (frames, scanned, busy)
}

pub(super) fn execute_channel(
    rt: &mut ChannelRuntime,
    ctx: &ExecContext,
    now: Micros,
) -> Result<(ChannelResultBatch, ExecutionStats), EngineError> {
    let partitions = rt.partitions;
    let frame_size = rt.frame_size;
    let primary_alias = rt.def.primary_alias();
    let primary_name =
        &rt.def.dataset_for_alias(primary_alias).expect("primary alias resolves").name;
    let ds = ctx
        .datasets
        .get(primary_name)
        .ok_or_else(|| EngineError::UnknownDataset(primary_name.clone()))?;
    let since = rt.last_exec_ts;
    let fixed = rt.classified.fixed_for(primary_alias);

    let mut coord = BusyClock::default();
    let mut stats = ExecutionStats::default();

    // Phase A: data access. One candidate-frame stream per partition.
    let (per_part_frames, scanned, access_busy) = match rt.mode.data_access() {
        DataAccess::Scan => {
            scan_access(ds, primary_alias, fixed, since, now, partitions, frame_size)
        }
        DataAccess::BadIndex => {
            if ds.bad_index(&rt.def.name).is_none() {
                return Err(EngineError::ModeUnavailable {
                    mode: rt.mode,
                    reason: "channel has no fixed predicates on its windowed dataset".into(),
                });
            }
            let pks = coord
                .time(|| ds.index_scan(&rt.def.name, since, now))
                .expect("index checked above");
            fetch_access(ds, pks, partitions, frame_size, None)
        }
        DataAccess::Traditional => {
            let chosen = coord.time(|| choose_traditional(rt, ds, fixed))?;
            let pks = coord.time(|| {
                ds.value_index(&chosen.field).expect("chosen field indexed").scan(chosen.op, &chosen.rhs)
            });
            let remaining: Vec<PredicateAtom> = fixed
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != chosen.atom_idx)
                .map(|(_, a)| a.clone())
                .collect();
            let refetch = Refetch { alias: primary_alias, remaining, since, now };
            fetch_access(ds, pks, partitions, frame_size, Some(&refetch))
        }
    };
    stats.records_scanned = scanned;
    let mut data_frames: Vec<Frame> = Vec::new();
    for frames in per_part_frames {
        data_frames.extend(frames);
    }
    stats.frames_produced += data_frames.len() as u64;

    // Secondary context and matcher, shared by the coordinator and workers.
    let secondary_ctx: Option<SecondaryCtx> = match rt.def.secondary() {
        None => None,
        Some(sec_ref) => {
            let sec_ds = ctx
                .datasets
                .get(&sec_ref.name)
                .ok_or_else(|| EngineError::UnknownDataset(sec_ref.name.clone()))?;
            let sec_alias = sec_ref.alias.as_str();
            let sec_fixed = rt.classified.fixed_for(sec_alias);
            let records = coord.time(|| {
                sec_ds
                    .iter_arrival()
                    .filter(|r| check_conditions(sec_alias, &r.fields, sec_fixed))
                    .map(|r| &r.fields)
                    .collect::<Vec<_>>()
            });
            let mut atoms = rt.classified.joins();
            if let Some(ap) = rt.classified.alias(sec_alias) {
                atoms.extend(ap.parameterized.iter());
            }
            Some(SecondaryCtx { alias: sec_alias, records, atoms })
        }
    };
    let param_atoms = rt
        .classified
        .alias(primary_alias)
        .map(|a| a.parameterized.as_slice())
        .unwrap_or(&[]);
    let matcher = Matcher { primary_alias, param_atoms, secondary: secondary_ctx.as_ref() };
    let proj: Vec<&str> = rt
        .def
        .projection
        .iter()
        .filter(|fr| fr.alias == primary_alias)
        .map(|fr| fr.field.as_str())
        .collect();

    // Early parameter join: match each distinct parameter tuple against the
    // candidates once, so workers only look up precomputed payloads.
    let param_payloads: Option<HashMap<Vec<Value>, Vec<ResultRecord>>> = if rt.mode.param_join() {
        let (map, join_rows) = coord.time(|| {
            let candidates: Vec<(u64, Fields)> = data_frames
                .iter()
                .flat_map(|f| f.records().map(wire::decode_candidate))
                .collect();
            let mut map = HashMap::new();
            let mut join_rows = 0u64;
            for entry in ctx.subs.user_parameters() {
                let params: Vec<(String, Value)> = rt
                    .def
                    .params
                    .iter()
                    .cloned()
                    .zip(entry.params.iter().cloned())
                    .collect();
                let payload: Vec<ResultRecord> = candidates
                    .iter()
                    .filter(|(_, fields)| matcher.matches(fields, &params))
                    .map(|(pk, fields)| ResultRecord { pk: *pk, fields: project(fields, &proj) })
                    .collect();
                if !payload.is_empty() {
                    join_rows += payload.len() as u64;
                    map.insert(entry.params, payload);
                }
            }
            (map, join_rows)
        });
        stats.join_rows = join_rows;
        Some(map)
    } else {
        None
    };

    // Subscription side serialized into frames by the coordinator.
    let per_entry = ctx.subs.policy().per_entry_bytes;
    let sub_frames: Vec<Frame> = coord.time(|| {
        let mut encoded: Vec<Vec<u8>> = Vec::new();
        if rt.mode.singleton_subs() {
            for g in ctx.subs.iter_groups() {
                for id in &g.sub_ids {
                    let single = SubscriptionGroup {
                        group_id: *id,
                        params: g.params.clone(),
                        broker: g.broker.clone(),
                        sub_ids: vec![*id],
                    };
                    encoded.push(wire::encode_group(&single, per_entry));
                }
            }
        } else if let Some(map) = &param_payloads {
            for g in ctx.subs.iter_groups() {
                if map.contains_key(&g.params) {
                    encoded.push(wire::encode_group(g, per_entry));
                }
            }
        } else {
            for g in ctx.subs.iter_groups() {
                encoded.push(wire::encode_group(g, per_entry));
            }
        }
        pack_frames(encoded.iter().map(Vec::as_slice), frame_size)
    });
    stats.frames_produced += sub_frames.len() as u64;

    // Phase B: sub frames round-robin across partitions, candidates
    // broadcast; merge by frame sequence for partition-count-independent
    // output order.
    let def_params = &rt.def.params;
    let tasks: Vec<_> = (0..partitions)
        .map(|w| {
            let sub_frames = &sub_frames;
            let data_frames = &data_frames;
            let matcher = &matcher;
            let proj = &proj;
            let param_payloads = param_payloads.as_ref();
            move || {
                let mut out: Vec<(usize, Vec<GroupResult>)> = Vec::new();
                let mut join_rows = 0u64;
                let candidates: Vec<(u64, Fields, Fields)> = if param_payloads.is_some() {
                    Vec::new()
                } else {
                    data_frames
                        .iter()
                        .flat_map(|f| f.records())
                        .map(|bytes| {
                            let (pk, fields) = wire::decode_candidate(bytes);
                            let projected = project(&fields, proj);
                            (pk, fields, projected)
                        })
                        .collect()
                };
                for (seq, frame) in sub_frames.iter().enumerate() {
                    if seq % partitions != w {
                        continue;
                    }
                    let mut results = Vec::new();
                    for rec in frame.records() {
                        let group = wire::decode_group(rec);
                        if let Some(map) = param_payloads {
                            if let Some(payload) = map.get(&group.params) {
                                results.push(GroupResult {
                                    group_id: group.group_id,
                                    broker: group.broker,
                                    sub_ids: group.sub_ids,
                                    delivery_time: now,
                                    payload: payload.clone(),
                                });
                            }
                        } else {
                            let params: Vec<(String, Value)> = def_params
                                .iter()
                                .cloned()
                                .zip(group.params.iter().cloned())
                                .collect();
                            let payload: Vec<ResultRecord> = candidates
                                .iter()
                                .filter(|(_, fields, _)| matcher.matches(fields, &params))
                                .map(|(pk, _, projected)| ResultRecord {
                                    pk: *pk,
                                    fields: projected.clone(),
                                })
                                .collect();
                            if !payload.is_empty() {
                                join_rows += payload.len() as u64;
                                results.push(GroupResult {
                                    group_id: group.group_id,
                                    broker: group.broker,
                                    sub_ids: group.sub_ids,
                                    delivery_time: now,
                                    payload,
                                });
                            }
                        }
                    }
                    if !results.is_empty() {
                        out.push((seq, results));
                    }
                }
                (out, join_rows)
            }
        })
        .collect();
    let (worker_out, match_busy) = run_partitioned(tasks);

    let mut tagged: Vec<(usize, Vec<GroupResult>)> = Vec::new();
    for (chunk, join_rows) in worker_out {
        stats.join_rows += join_rows;
        tagged.extend(chunk);
    }
    tagged.sort_by_key(|(seq, _)| *seq);
    let groups: Vec<GroupResult> = tagged.into_iter().flat_map(|(_, g)| g).collect();
    stats.results_count = groups.iter().map(|g| g.payload.len() as u64).sum();
    stats.wall_time_ms = (coord.total_ns() + access_busy + match_busy) as f64 / 1e6;

    rt.last_exec_ts = now;
    Ok((
        ChannelResultBatch { channel: rt.def.name.clone(), execution_ts: now, groups },
        stats,
    ))
}
