use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::DslError;

/// Per-alias partition of a channel's predicates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AliasPredicates {
    /// Dataset field vs. literal, in textual order.
    pub fixed: Vec<PredicateAtom>,
    /// Dataset field vs. channel parameter.
    pub parameterized: Vec<PredicateAtom>,
    /// Predicates spanning two aliases, bucketed under the left-hand alias.
    pub join: Vec<PredicateAtom>,
    pub freshness: bool,
}

/// Classification result for a whole channel, keyed by FROM alias.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedPredicates {
    pub per_alias: BTreeMap<String, AliasPredicates>,
}

impl ClassifiedPredicates {
    pub fn alias(&self, alias: &str) -> Option<&AliasPredicates> {
        self.per_alias.get(alias)
    }

    pub fn fixed_for(&self, alias: &str) -> &[PredicateAtom] {
        self.per_alias.get(alias).map(|a| a.fixed.as_slice()).unwrap_or(&[])
    }

    pub fn total_predicates(&self) -> usize {
        self.per_alias
            .values()
            .map(|a| {
                a.fixed.len() + a.parameterized.len() + a.join.len() + usize::from(a.freshness)
            })
            .sum()
    }

    /// All join predicates, across aliases.
    pub fn joins(&self) -> Vec<&PredicateAtom> {
        self.per_alias.values().flat_map(|a| a.join.iter()).collect()
    }
}

fn operand_alias<'a>(def: &ChannelDefinition, op: &'a Operand) -> Result<Option<&'a str>, DslError> {
    match op {
        Operand::Field(fr) => {
            if def.dataset_for_alias(&fr.alias).is_none() {
                return Err(DslError::Unclassifiable(format!("unknown alias {}", fr.alias)));
            }
            Ok(Some(fr.alias.as_str()))
        }
        Operand::Param(name) => {
            if !def.params.contains(name) {
                return Err(DslError::Unclassifiable(format!("unknown parameter {name}")));
            }
            Ok(None)
        }
        Operand::Literal(_) => Ok(None),
    }
}

/// Determines the single class of one predicate atom.
pub fn classify_atom(def: &ChannelDefinition, atom: &PredicateAtom) -> Result<PredicateClass, DslError> {
    match atom {
        PredicateAtom::Freshness { alias } => {
            if def.dataset_for_alias(alias).is_none() {
                return Err(DslError::Unclassifiable(format!("unknown alias {alias}")));
            }
            Ok(PredicateClass::Freshness)
        }
        PredicateAtom::SpatialDistance { left, right, .. } => {
            for fr in [left, right] {
                if def.dataset_for_alias(&fr.alias).is_none() {
                    return Err(DslError::Unclassifiable(format!("unknown alias {}", fr.alias)));
                }
            }
            if left.alias != right.alias {
                Ok(PredicateClass::Join)
            } else {
                Ok(PredicateClass::Fixed)
            }
        }
        PredicateAtom::Compare { lhs, rhs, .. } => {
            let la = operand_alias(def, lhs)?;
            let ra = operand_alias(def, rhs)?;
            let has_param =
                matches!(lhs, Operand::Param(_)) || matches!(rhs, Operand::Param(_));
            let has_literal =
                matches!(lhs, Operand::Literal(_)) || matches!(rhs, Operand::Literal(_));
            match (la, ra) {
                (Some(a), Some(b)) if a != b => Ok(PredicateClass::Join),
                (Some(_), Some(_)) => Err(DslError::Unclassifiable(
                    "field-to-field comparison within one dataset".into(),
                )),
                (Some(_), None) | (None, Some(_)) => {
                    if has_param {
                        Ok(PredicateClass::Parameterized)
                    } else if has_literal {
                        Ok(PredicateClass::Fixed)
                    } else {
                        Err(DslError::Unclassifiable("predicate without a field side".into()))
                    }
                }
                (None, None) => {
                    Err(DslError::Unclassifiable("predicate references no dataset field".into()))
                }
            }
        }
    }
}

/// Partitions all predicates of a parsed channel by alias and class.
/// The partition is total: every atom lands in exactly one bucket and FIXED
/// lists preserve textual order.
pub fn classify_predicates(def: &ChannelDefinition) -> Result<ClassifiedPredicates, DslError> {
    let mut out = ClassifiedPredicates::default();
    for ds in &def.datasets {
        out.per_alias.insert(ds.alias.clone(), AliasPredicates::default());
    }
    for atom in &def.predicates {
        let class = classify_atom(def, atom)?;
        let alias = match atom {
            PredicateAtom::Freshness { alias } => alias.clone(),
            PredicateAtom::SpatialDistance { left, .. } => left.alias.clone(),
            PredicateAtom::Compare { lhs, rhs, .. } => match (lhs, rhs) {
                (Operand::Field(fr), _) => fr.alias.clone(),
                (_, Operand::Field(fr)) => fr.alias.clone(),
                _ => unreachable!("classified predicate has a field side"),
            },
        };
        let bucket = out.per_alias.get_mut(&alias).expect("alias checked by classify_atom");
        match class {
            PredicateClass::Fixed => bucket.fixed.push(atom.clone()),
            PredicateClass::Parameterized => bucket.parameterized.push(atom.clone()),
            PredicateClass::Join => bucket.join.push(atom.clone()),
            PredicateClass::Freshness => bucket.freshness = true,
        }
    }
    Ok(out)
}
