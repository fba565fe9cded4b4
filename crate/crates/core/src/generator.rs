//! Seeded synthetic record generation with controllable per-field
//! selectivity and recorded ground truth.
//!
//! Each field draws from a distribution; a field may additionally carry a
//! selectivity target tied to a predicate `field <op> rhs`. For targeted
//! fields the generator first flips a coin with the target probability and
//! then draws a value from the satisfying or violating side, so the truth
//! assignment is known from the coin itself rather than from re-evaluating
//! the predicate. Fields are drawn independently; joint selectivities are
//! products of the per-field targets.
//!
//! Draws are addressed by record index: record `i` under seed `s` is the
//! same regardless of how the stream is partitioned or resumed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::Fields;
use crate::value::{CmpOp, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldDist {
    /// Weighted categorical draw over string values.
    Categorical { options: Vec<(String, f64)> },
    UniformInt { lo: i64, hi: i64 },
    Bernoulli { p: f64 },
    /// Uniform 2-D point in a bounding box.
    UniformPoint { x_min: f64, y_min: f64, x_max: f64, y_max: f64 },
}

/// Selectivity target for one field: the fraction of records for which
/// `field <op> rhs` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectivityTarget {
    pub selectivity: f64,
    pub op: CmpOp,
    pub rhs: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGen {
    pub name: String,
    pub dist: FieldDist,
    pub target: Option<SelectivityTarget>,
}

impl FieldGen {
    pub fn plain(name: impl Into<String>, dist: FieldDist) -> Self {
        FieldGen { name: name.into(), dist, target: None }
    }

    pub fn targeted(name: impl Into<String>, dist: FieldDist, target: SelectivityTarget) -> Self {
        FieldGen { name: name.into(), dist, target: Some(target) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub fields: Vec<FieldGen>,
}

/// One generated record: fields plus the truth bit of every targeted field.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordDraw {
    pub fields: Fields,
    /// (field name, predicate satisfied) for each targeted field.
    pub truth: Vec<(String, bool)>,
}

#[derive(Debug, Clone)]
pub struct RecordGenerator {
    spec: GeneratorSpec,
    seed: u64,
}

fn draw_plain(dist: &FieldDist, rng: &mut ChaCha8Rng) -> Value {
    match dist {
        FieldDist::Categorical { options } => {
            let total: f64 = options.iter().map(|(_, w)| w).sum();
            let mut x = rng.gen::<f64>() * total;
            for (v, w) in options {
                if x < *w {
                    return Value::Str(v.clone());
                }
                x -= w;
            }
            Value::Str(options.last().expect("nonempty categorical").0.clone())
        }
        FieldDist::UniformInt { lo, hi } => Value::Int(rng.gen_range(*lo..=*hi)),
        FieldDist::Bernoulli { p } => Value::Bool(rng.gen_bool(*p)),
        FieldDist::UniformPoint { x_min, y_min, x_max, y_max } => {
            Value::Point(rng.gen_range(*x_min..=*x_max), rng.gen_range(*y_min..=*y_max))
        }
    }
}

/// Draws a value on the satisfying (pass=true) or violating side of the
/// target predicate, uniform within that side of the distribution's domain.
fn draw_conditioned(dist: &FieldDist, target: &SelectivityTarget, pass: bool, rng: &mut ChaCha8Rng) -> Value {
    match (dist, &target.rhs) {
        (FieldDist::UniformInt { lo, hi }, Value::Int(rhs)) => {
            // Split [lo, hi] into the side satisfying `x <op> rhs` and its complement.
            let (sat_lo, sat_hi) = match target.op {
                CmpOp::Eq => (*rhs, *rhs),
                CmpOp::Lt => (*lo, rhs - 1),
                CmpOp::Le => (*lo, *rhs),
                CmpOp::Gt => (rhs + 1, *hi),
                CmpOp::Ge => (*rhs, *hi),
            };
            let ranges_violating: Vec<(i64, i64)> = match target.op {
                CmpOp::Eq => vec![(*lo, rhs - 1), (rhs + 1, *hi)],
                CmpOp::Lt | CmpOp::Le => vec![(sat_hi + 1, *hi)],
                CmpOp::Gt | CmpOp::Ge => vec![(*lo, sat_lo - 1)],
            };
            if pass {
                assert!(sat_lo <= sat_hi, "target predicate unsatisfiable in [{lo},{hi}]");
                Value::Int(rng.gen_range(sat_lo..=sat_hi))
            } else {
                let valid: Vec<(i64, i64)> =
                    ranges_violating.into_iter().filter(|(a, b)| a <= b).collect();
                let total: i64 = valid.iter().map(|(a, b)| b - a + 1).sum();
                assert!(total > 0, "target predicate tautological in [{lo},{hi}]");
                let mut pick = rng.gen_range(0..total);
                for (a, b) in valid {
                    let span = b - a + 1;
                    if pick < span {
                        return Value::Int(a + pick);
                    }
                    pick -= span;
                }
                unreachable!()
            }
        }
        (FieldDist::Categorical { options }, Value::Str(rhs)) => {
            assert_eq!(target.op, CmpOp::Eq, "categorical targets support equality only");
            if pass {
                Value::Str(rhs.clone())
            } else {
                let others: Vec<_> =
                    options.iter().filter(|(v, _)| v != rhs).cloned().collect();
                assert!(!others.is_empty(), "no violating categorical value");
                draw_plain(&FieldDist::Categorical { options: others }, rng)
            }
        }
        (FieldDist::Bernoulli { .. }, Value::Bool(rhs)) => {
            assert_eq!(target.op, CmpOp::Eq);
            Value::Bool(if pass { *rhs } else { !*rhs })
        }
        other => panic!("unsupported target combination: {other:?}"),
    }
}

fn mix(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RecordGenerator {
    pub fn new(spec: GeneratorSpec, seed: u64) -> Self {
        RecordGenerator { spec, seed }
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    /// Generates record `index`. Deterministic in (seed, index).
    pub fn draw(&self, index: u64) -> RecordDraw {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, index));
        let mut fields = Fields::new();
        let mut truth = Vec::new();
        for fg in &self.spec.fields {
            let value = match &fg.target {
                None => draw_plain(&fg.dist, &mut rng),
                Some(target) => {
                    let pass = rng.gen_bool(target.selectivity);
                    truth.push((fg.name.clone(), pass));
                    draw_conditioned(&fg.dist, target, pass, &mut rng)
                }
            };
            fields.insert(fg.name.clone(), value);
        }
        RecordDraw { fields, truth }
    }

    /// Fraction of the first `n` records whose every targeted field passes.
    pub fn matched_fraction(&self, n: u64) -> f64 {
        let mut matched = 0u64;
        for i in 0..n {
            if self.draw(i).truth.iter().all(|(_, pass)| *pass) {
                matched += 1;
            }
        }
        matched as f64 / n as f64
    }
}
