use serde::{Deserialize, Serialize};

use crate::value::{CmpOp, FieldRef, Value};

/// One side of a comparison predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Field(FieldRef),
    Param(String),
    Literal(Value),
}

/// A single WHERE-clause conjunct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PredicateAtom {
    Compare { lhs: Operand, op: CmpOp, rhs: Operand },
    /// `spatial_distance(left, right) < bound`
    SpatialDistance { left: FieldRef, right: FieldRef, bound: f64 },
    /// `is_new(alias)`
    Freshness { alias: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredicateClass {
    Fixed,
    Parameterized,
    Join,
    Freshness,
}

/// A dataset named in the FROM clause, with its binding alias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub name: String,
    pub alias: String,
}

/// A parsed `CREATE CONTINUOUS PUSH CHANNEL` statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDefinition {
    pub name: String,
    pub params: Vec<String>,
    pub period_secs: u64,
    pub projection: Vec<FieldRef>,
    pub datasets: Vec<DatasetRef>,
    pub predicates: Vec<PredicateAtom>,
}

impl ChannelDefinition {
    pub fn dataset_for_alias(&self, alias: &str) -> Option<&DatasetRef> {
        self.datasets.iter().find(|d| d.alias == alias)
    }

    /// The alias carrying the `is_new` predicate, if any. This is the
    /// dataset whose arrivals drive the channel window.
    pub fn freshness_alias(&self) -> Option<&str> {
        self.predicates.iter().find_map(|p| match p {
            PredicateAtom::Freshness { alias } => Some(alias.as_str()),
            _ => None,
        })
    }

    /// The dataset the channel windows over: the freshness alias when
    /// present, otherwise the first FROM entry.
    pub fn primary_alias(&self) -> &str {
        self.freshness_alias()
            .unwrap_or_else(|| self.datasets[0].alias.as_str())
    }

    pub fn secondary(&self) -> Option<&DatasetRef> {
        let primary = self.primary_alias().to_string();
        self.datasets.iter().find(|d| d.alias != primary)
    }
}

/// A parsed `SUBSCRIBE TO channel(args) ON broker` statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscribeStatement {
    pub channel_name: String,
    pub arg_values: Vec<Value>,
    pub broker_name: String,
}
