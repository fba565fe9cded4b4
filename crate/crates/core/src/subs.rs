//! Subscription storage: parameter/broker groups with a frame-size-derived
//! capacity, and the per-channel UserParameters view.
//!
//! A single logical writer mutates this state; channel executions read
//! point-in-time snapshots via [`ChannelSubscriptions::groups`]. The
//! capacity policy is fixed for the lifetime of a registry; live
//! re-splitting after a frame-size change is unsupported.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubsError {
    #[error("invalid capacity policy: {0}")]
    InvalidPolicy(String),
    #[error("subscription {0} already registered")]
    DuplicateSubscription(u64),
    #[error("unknown subscription {0}")]
    UnknownSubscription(u64),
    #[error("subscription arity {got} does not match channel arity {want}")]
    ArityMismatch { got: usize, want: usize },
}

/// Frame-size-derived sizing policy for subscription groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCapacityPolicy {
    /// Frame size in bytes.
    pub frame_size: usize,
    /// Serialized bytes per subscription id entry.
    pub per_entry_bytes: usize,
    /// Fixed per-group overhead: params, broker and envelope.
    pub header_bytes: usize,
}

/// Maximum member count so a full group's serialized record fits one frame:
/// `max(1, floor((frame - header) / per_entry))`.
pub fn acceptable_group_size(policy: &GroupCapacityPolicy) -> Result<usize, SubsError> {
    if policy.per_entry_bytes == 0 {
        return Err(SubsError::InvalidPolicy("per_entry_bytes must be nonzero".into()));
    }
    if policy.frame_size <= policy.header_bytes {
        return Err(SubsError::InvalidPolicy(format!(
            "frame_size {} must exceed header_bytes {}",
            policy.frame_size, policy.header_bytes
        )));
    }
    Ok(((policy.frame_size - policy.header_bytes) / policy.per_entry_bytes).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subscription {
    pub id: u64,
    pub params: Vec<Value>,
    pub broker: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscriptionGroup {
    pub group_id: u64,
    pub params: Vec<Value>,
    pub broker: String,
    pub sub_ids: Vec<u64>,
}

impl SubscriptionGroup {
    /// Serialized record size in bytes under the given policy.
    pub fn serialized_size(&self, policy: &GroupCapacityPolicy) -> usize {
        policy.header_bytes + policy.per_entry_bytes * self.sub_ids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserParametersEntry {
    pub params: Vec<Value>,
    pub subscriber_count: u64,
}

/// All subscription state for one channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSubscriptions {
    arity: usize,
    capacity: usize,
    policy: GroupCapacityPolicy,
    next_group_id: u64,
    /// Keyed by group id; ids increase in creation order.
    groups: BTreeMap<u64, SubscriptionGroup>,
    /// (params, broker) -> ids of groups with free capacity, ascending (so
    /// the earliest-created open group fills first).
    #[serde(skip)]
    open: HashMap<(Vec<Value>, String), Vec<u64>>,
    /// subscription id -> group id.
    #[serde(skip)]
    location: HashMap<u64, u64>,
    /// params -> live subscriber count (the UserParameters dataset).
    #[serde(skip)]
    user_params: HashMap<Vec<Value>, u64>,
}

impl ChannelSubscriptions {
    pub fn new(arity: usize, policy: GroupCapacityPolicy) -> Result<Self, SubsError> {
        let capacity = acceptable_group_size(&policy)?;
        Ok(Self::with_capacity(arity, policy, capacity))
    }

    /// Registry with an explicit capacity, bypassing the policy derivation.
    /// Used by group-size sweeps.
    pub fn with_capacity(arity: usize, policy: GroupCapacityPolicy, capacity: usize) -> Self {
        ChannelSubscriptions {
            arity,
            capacity: capacity.max(1),
            policy,
            next_group_id: 0,
            groups: BTreeMap::new(),
            open: HashMap::new(),
            location: HashMap::new(),
            user_params: HashMap::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn policy(&self) -> &GroupCapacityPolicy {
        &self.policy
    }

    pub fn len(&self) -> usize {
        self.location.len()
    }

    pub fn is_empty(&self) -> bool {
        self.location.is_empty()
    }

    /// Adds a subscription per the grouping algorithm: append to the first
    /// existing (params, broker) group with free capacity, else open a new
    /// group. Returns the group id the subscription landed in.
    pub fn add_subscription(&mut self, sub: Subscription) -> Result<u64, SubsError> {
        if sub.params.len() != self.arity {
            return Err(SubsError::ArityMismatch { got: sub.params.len(), want: self.arity });
        }
        if self.location.contains_key(&sub.id) {
            return Err(SubsError::DuplicateSubscription(sub.id));
        }
        let key = (sub.params.clone(), sub.broker.clone());
        let target = self.open.get(&key).and_then(|gids| gids.first().copied());
        let gid = match target {
            Some(gid) => {
                let group = self.groups.get_mut(&gid).expect("open list tracks live groups");
                group.sub_ids.push(sub.id);
                if group.sub_ids.len() >= self.capacity {
                    let gids = self.open.get_mut(&key).expect("entry exists");
                    gids.remove(0);
                    if gids.is_empty() {
                        self.open.remove(&key);
                    }
                }
                gid
            }
            None => {
                let gid = self.next_group_id;
                self.next_group_id += 1;
                self.groups.insert(
                    gid,
                    SubscriptionGroup {
                        group_id: gid,
                        params: sub.params.clone(),
                        broker: sub.broker.clone(),
                        sub_ids: vec![sub.id],
                    },
                );
                if self.capacity > 1 {
                    self.open.entry(key).or_default().push(gid);
                }
                gid
            }
        };
        self.location.insert(sub.id, gid);
        *self.user_params.entry(sub.params).or_insert(0) += 1;
        Ok(gid)
    }

    /// Removes a subscription; empty groups and zero-count UserParameters
    /// entries are deleted.
    pub fn remove_subscription(&mut self, sub_id: u64) -> Result<(), SubsError> {
        let gid = self.location.remove(&sub_id).ok_or(SubsError::UnknownSubscription(sub_id))?;
        let group = self.groups.get_mut(&gid).expect("location points at live group");
        let was_full = group.sub_ids.len() >= self.capacity;
        group.sub_ids.retain(|id| *id != sub_id);
        let params = group.params.clone();
        let key = (group.params.clone(), group.broker.clone());
        if group.sub_ids.is_empty() {
            self.groups.remove(&gid);
            if !was_full {
                if let Some(gids) = self.open.get_mut(&key) {
                    gids.retain(|g| *g != gid);
                    if gids.is_empty() {
                        self.open.remove(&key);
                    }
                }
            }
        } else if was_full {
            // The group regained capacity; reopen it in creation order.
            let gids = self.open.entry(key).or_default();
            let at = gids.partition_point(|g| *g < gid);
            gids.insert(at, gid);
        }
        let count = self.user_params.get_mut(&params).expect("entry exists while members do");
        *count -= 1;
        if *count == 0 {
            self.user_params.remove(&params);
        }
        Ok(())
    }

    /// Snapshot of all groups in creation order.
    pub fn groups(&self) -> Vec<SubscriptionGroup> {
        self.groups.values().cloned().collect()
    }

    pub fn iter_groups(&self) -> impl Iterator<Item = &SubscriptionGroup> {
        self.groups.values()
    }

    /// UserParameters view: one entry per distinct live param tuple, sorted
    /// by params for deterministic output.
    pub fn user_parameters(&self) -> Vec<UserParametersEntry> {
        let mut entries: Vec<_> = self
            .user_params
            .iter()
            .map(|(params, count)| UserParametersEntry {
                params: params.clone(),
                subscriber_count: *count,
            })
            .collect();
        entries.sort_by(|a, b| a.params.cmp(&b.params));
        entries
    }

    /// Rebuilds the derived maps after deserialization.
    pub fn rebuild_indexes(&mut self) {
        self.open.clear();
        self.location.clear();
        self.user_params.clear();
        for (gid, group) in &self.groups {
            if group.sub_ids.len() < self.capacity {
                // BTreeMap iteration keeps the open lists ascending.
                self.open
                    .entry((group.params.clone(), group.broker.clone()))
                    .or_default()
                    .push(*gid);
            }
            for id in &group.sub_ids {
                self.location.insert(*id, *gid);
                *self.user_params.entry(group.params.clone()).or_insert(0) += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(frame: usize, entry: usize, header: usize) -> GroupCapacityPolicy {
        GroupCapacityPolicy { frame_size: frame, per_entry_bytes: entry, header_bytes: header }
    }

    fn sub(id: u64, state: &str, broker: &str) -> Subscription {
        Subscription { id, params: vec![Value::Str(state.into())], broker: broker.into() }
    }

    #[test]
    fn group_size_from_frame_size() {
        // 1M 40-byte subscriptions against a 40 KB frame: 1024 per group.
        assert_eq!(acceptable_group_size(&policy(40960, 40, 0)).unwrap(), 1024);
        assert_eq!(acceptable_group_size(&policy(81920, 40, 0)).unwrap(), 2048);
        // Floor would give 0; clamped to 1.
        assert_eq!(acceptable_group_size(&policy(100, 40, 90)).unwrap(), 1);
    }

    #[test]
    fn zero_entry_bytes_is_invalid() {
        assert!(matches!(
            acceptable_group_size(&policy(100, 0, 0)),
            Err(SubsError::InvalidPolicy(_))
        ));
    }

    #[test]
    fn first_subscription_opens_group() {
        let mut subs = ChannelSubscriptions::new(1, policy(80, 40, 0)).unwrap();
        let gid = subs.add_subscription(sub(1, "CA", "A")).unwrap();
        let groups = subs.groups();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].group_id, gid);
        assert_eq!(groups[0].sub_ids, vec![1]);
    }

    #[test]
    fn full_group_spills_into_new_group() {
        let mut subs = ChannelSubscriptions::new(1, policy(80, 40, 0)).unwrap();
        assert_eq!(subs.capacity(), 2);
        for id in 0..3 {
            subs.add_subscription(sub(id, "CA", "A")).unwrap();
        }
        let groups = subs.groups();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].sub_ids.len(), 2);
        assert_eq!(groups[1].sub_ids.len(), 1);
    }

    #[test]
    fn different_broker_never_shares_group() {
        let mut subs = ChannelSubscriptions::new(1, policy(800, 40, 0)).unwrap();
        subs.add_subscription(sub(1, "CA", "A")).unwrap();
        subs.add_subscription(sub(2, "CA", "B")).unwrap();
        assert_eq!(subs.groups().len(), 2);
    }

    #[test]
    fn removal_deletes_empty_group_and_entry() {
        let mut subs = ChannelSubscriptions::new(1, policy(800, 40, 0)).unwrap();
        subs.add_subscription(sub(1, "CA", "A")).unwrap();
        subs.remove_subscription(1).unwrap();
        assert!(subs.groups().is_empty());
        assert!(subs.user_parameters().is_empty());
    }

    #[test]
    fn removal_keeps_partial_group() {
        let mut subs = ChannelSubscriptions::new(1, policy(800, 40, 0)).unwrap();
        subs.add_subscription(sub(1, "CA", "A")).unwrap();
        subs.add_subscription(sub(2, "CA", "A")).unwrap();
        subs.remove_subscription(1).unwrap();
        let groups = subs.groups();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].sub_ids, vec![2]);
        assert_eq!(subs.user_parameters()[0].subscriber_count, 1);
    }

    #[test]
    fn unknown_removal_errors() {
        let mut subs = ChannelSubscriptions::new(1, policy(800, 40, 0)).unwrap();
        assert!(matches!(subs.remove_subscription(9), Err(SubsError::UnknownSubscription(9))));
    }

    #[test]
    fn arity_checked() {
        let mut subs = ChannelSubscriptions::new(2, policy(800, 40, 0)).unwrap();
        assert!(matches!(
            subs.add_subscription(sub(1, "CA", "A")),
            Err(SubsError::ArityMismatch { got: 1, want: 2 })
        ));
    }

    #[test]
    fn user_parameters_counts_distinct_tuples() {
        let mut subs = ChannelSubscriptions::new(1, policy(800, 40, 0)).unwrap();
        subs.add_subscription(sub(1, "CA", "A")).unwrap();
        subs.add_subscription(sub(2, "CA", "B")).unwrap();
        subs.add_subscription(sub(3, "TX", "A")).unwrap();
        let entries = subs.user_parameters();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].params, vec![Value::Str("CA".into())]);
        assert_eq!(entries[0].subscriber_count, 2);
        assert_eq!(entries[1].subscriber_count, 1);
    }

    #[test]
    fn ca_population_splits_into_116_groups() {
        // 118,118 CA subscriptions at capacity 1024 -> 116 groups.
        let mut subs = ChannelSubscriptions::new(1, policy(40960, 40, 0)).unwrap();
        for id in 0..118_118 {
            subs.add_subscription(sub(id, "CA", "A")).unwrap();
        }
        assert_eq!(subs.groups().len(), 116);
    }
}
