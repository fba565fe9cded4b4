//! Predicate evaluation against record field maps and parameter bindings.

use std::collections::BTreeMap;

use crate::dsl::{Operand, PredicateAtom};
use crate::value::{spatial_distance, Value};

pub type Fields = BTreeMap<String, Value>;

/// Alias-to-record and parameter bindings for evaluating one atom.
pub struct Bindings<'a> {
    aliases: Vec<(&'a str, &'a Fields)>,
    params: &'a [(String, Value)],
}

impl<'a> Bindings<'a> {
    pub fn single(alias: &'a str, fields: &'a Fields) -> Self {
        Bindings { aliases: vec![(alias, fields)], params: &[] }
    }

    pub fn new(aliases: Vec<(&'a str, &'a Fields)>, params: &'a [(String, Value)]) -> Self {
        Bindings { aliases, params }
    }

    fn field(&self, alias: &str, field: &str) -> Option<&Value> {
        self.aliases
            .iter()
            .find(|(a, _)| *a == alias)
            .and_then(|(_, fields)| fields.get(field))
    }

    fn operand(&self, op: &'a Operand) -> Option<&Value> {
        match op {
            Operand::Field(fr) => self.field(&fr.alias, &fr.field),
            Operand::Param(name) => {
                self.params.iter().find(|(p, _)| p == name).map(|(_, v)| v)
            }
            Operand::Literal(v) => Some(v),
        }
    }

    /// Evaluates one atom; freshness atoms are window predicates and always
    /// hold here (the caller applies the time window). Missing fields or
    /// unbound parameters evaluate to false.
    pub fn eval(&self, atom: &PredicateAtom) -> bool {
        match atom {
            PredicateAtom::Freshness { .. } => true,
            PredicateAtom::SpatialDistance { left, right, bound } => {
                let (Some(a), Some(b)) =
                    (self.field(&left.alias, &left.field), self.field(&right.alias, &right.field))
                else {
                    return false;
                };
                spatial_distance(a, b).is_some_and(|d| d < *bound)
            }
            PredicateAtom::Compare { lhs, op, rhs } => {
                let (Some(l), Some(r)) = (self.operand(lhs), self.operand(rhs)) else {
                    return false;
                };
                l.compare(*op, r)
            }
        }
    }

    /// Short-circuit conjunction in textual order.
    pub fn eval_all(&self, atoms: &[PredicateAtom]) -> bool {
        atoms.iter().all(|a| self.eval(a))
    }
}

/// Evaluates a fixed-predicate group against a single record's fields. The
/// atoms must reference only the given alias.
pub fn check_conditions(alias: &str, fields: &Fields, group: &[PredicateAtom]) -> bool {
    Bindings::single(alias, fields).eval_all(group)
}
