//! Literal values, field references and comparison primitives shared by the
//! DSL, the ingest path and the engine.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// Ingestion timestamp in microseconds on the engine's (virtual) clock.
pub type Micros = u64;

/// A literal value carried by records, channel arguments and predicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Str(String),
    Int(i64),
    Bool(bool),
    /// 2-D point, (x, y).
    Point(f64, f64),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Str(_) => ValueKind::Str,
            Value::Int(_) => ValueKind::Int,
            Value::Bool(_) => ValueKind::Bool,
            Value::Point(..) => ValueKind::Point,
        }
    }

    /// Applies a comparison operator. Type mismatches evaluate to false
    /// rather than erroring: a predicate over the wrong type simply does
    /// not select the record.
    pub fn compare(&self, op: CmpOp, other: &Value) -> bool {
        let ord = match (self, other) {
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Point(..), Value::Point(..)) => {
                // Points only support equality.
                return matches!(op, CmpOp::Eq) && self == other;
            }
            _ => return false,
        };
        match op {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Point(ax, ay), Value::Point(bx, by)) => {
                ax.to_bits() == bx.to_bits() && ay.to_bits() == by.to_bits()
            }
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        core::mem::discriminant(self).hash(state);
        match self {
            Value::Str(s) => s.hash(state),
            Value::Int(i) => i.hash(state),
            Value::Bool(b) => b.hash(state),
            Value::Point(x, y) => {
                x.to_bits().hash(state);
                y.to_bits().hash(state);
            }
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order for index keys: values of different kinds order by kind.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Point(ax, ay), Value::Point(bx, by)) => (ax.to_bits(), ay.to_bits())
                .cmp(&(bx.to_bits(), by.to_bits())),
            _ => (self.kind() as u8).cmp(&(other.kind() as u8)),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Point(x, y) => write!(f, "point({x},{y})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueKind {
    Str = 0,
    Int = 1,
    Bool = 2,
    Point = 3,
}

/// `alias.field` reference into a dataset bound by a FROM clause.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldRef {
    pub alias: String,
    pub field: String,
}

impl FieldRef {
    pub fn new(alias: impl Into<String>, field: impl Into<String>) -> Self {
        FieldRef { alias: alias.into(), field: field.into() }
    }
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.alias, self.field)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        })
    }
}

/// Euclidean distance between two 2-D points. The sole built-in function of
/// the channel DSL.
pub fn spatial_distance(a: &Value, b: &Value) -> Option<f64> {
    match (a, b) {
        (Value::Point(ax, ay), Value::Point(bx, by)) => {
            Some(((ax - bx).powi(2) + (ay - by).powi(2)).sqrt())
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compare_ints() {
        assert!(Value::Int(7).compare(CmpOp::Gt, &Value::Int(5)));
        assert!(Value::Int(5).compare(CmpOp::Le, &Value::Int(5)));
        assert!(!Value::Int(5).compare(CmpOp::Gt, &Value::Int(5)));
    }

    #[test]
    fn type_mismatch_is_false() {
        assert!(!Value::Str("5".into()).compare(CmpOp::Eq, &Value::Int(5)));
    }

    #[test]
    fn spatial_distance_euclidean() {
        let d = spatial_distance(&Value::Point(0.0, 0.0), &Value::Point(3.0, 4.0)).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
    }
}
