//! Workload configuration and shared fixture builders.

use serde::{Deserialize, Serialize};

use bad_core::generator::{FieldDist, FieldGen, GeneratorSpec, RecordGenerator, SelectivityTarget};
use bad_core::{CmpOp, Value};

use crate::BenchError;

/// 2010 census resident population by state, in millions. Drives the
/// population-weighted subscription parameter distribution.
pub const US_STATE_POPULATION: [(&str, f64); 50] = [
    ("AL", 4.78), ("AK", 0.71), ("AZ", 6.39), ("AR", 2.92), ("CA", 37.25),
    ("CO", 5.03), ("CT", 3.57), ("DE", 0.90), ("FL", 18.80), ("GA", 9.69),
    ("HI", 1.36), ("ID", 1.57), ("IL", 12.83), ("IN", 6.48), ("IA", 3.05),
    ("KS", 2.85), ("KY", 4.34), ("LA", 4.53), ("ME", 1.33), ("MD", 5.77),
    ("MA", 6.55), ("MI", 9.88), ("MN", 5.30), ("MS", 2.97), ("MO", 5.99),
    ("MT", 0.99), ("NE", 1.83), ("NV", 2.70), ("NH", 1.32), ("NJ", 8.79),
    ("NM", 2.06), ("NY", 19.38), ("NC", 9.54), ("ND", 0.67), ("OH", 11.54),
    ("OK", 3.75), ("OR", 3.83), ("PA", 12.70), ("RI", 1.05), ("SC", 4.63),
    ("SD", 0.81), ("TN", 6.35), ("TX", 25.15), ("UT", 2.76), ("VT", 0.63),
    ("VA", 8.00), ("WA", 6.72), ("WV", 1.85), ("WI", 5.69), ("WY", 0.56),
];

/// Knobs shared by all experiments, loadable from TOML. Every field has a
/// desk-scale default, so an empty config is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub seed: u64,
    /// Emulated cluster partitions for experiments that do not sweep them.
    pub partitions: usize,
    /// Frame size in bytes.
    pub frame_size: usize,
    /// Serialized bytes per subscription entry.
    pub per_entry_bytes: usize,
    pub subscriptions: usize,
    pub records_per_sec: u64,
    pub duration_secs: u64,
    /// Timing repetitions per experiment point.
    pub reps: usize,
    /// Capacity probe: an execution is "supported" when its wall time stays
    /// under this deadline.
    pub deadline_ms: f64,
    /// Capacity probe search ceiling.
    pub max_subscriptions: usize,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            seed: 42,
            partitions: 4,
            frame_size: 40_960,
            per_entry_bytes: 40,
            subscriptions: 100_000,
            records_per_sec: 2_000,
            duration_secs: 10,
            reps: 5,
            deadline_ms: 30.0,
            max_subscriptions: 1 << 17,
        }
    }
}

impl WorkloadSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn record_count(&self) -> u64 {
        self.records_per_sec * self.duration_secs
    }
}

/// Population-weighted categorical distribution over state abbreviations.
pub fn state_distribution() -> FieldDist {
    FieldDist::Categorical {
        options: US_STATE_POPULATION.iter().map(|(s, w)| (s.to_string(), *w)).collect(),
    }
}

/// Generator whose records carry a population-weighted `state` plus the
/// standard five condition fields `c1..c5` with independent selectivities
/// 0.5, 0.5, 0.5, 0.2, 0.2 under the predicates `cN > threshold`.
pub fn standard_generator(seed: u64) -> RecordGenerator {
    let mut fields = vec![FieldGen::plain("state", state_distribution())];
    for (i, (selectivity, threshold)) in
        [(0.5, 49), (0.5, 49), (0.5, 49), (0.2, 79), (0.2, 79)].iter().enumerate()
    {
        fields.push(FieldGen::targeted(
            format!("c{}", i + 1),
            FieldDist::UniformInt { lo: 0, hi: 99 },
            SelectivityTarget {
                selectivity: *selectivity,
                op: CmpOp::Gt,
                rhs: Value::Int(*threshold),
            },
        ));
    }
    RecordGenerator::new(GeneratorSpec { fields }, seed)
}

/// Deterministic population-weighted state draws for subscription params.
pub fn draw_states(seed: u64, n: usize) -> Vec<String> {
    let gen = RecordGenerator::new(
        GeneratorSpec { fields: vec![FieldGen::plain("state", state_distribution())] },
        seed,
    );
    (0..n as u64)
        .map(|i| match &gen.draw(i).fields["state"] {
            Value::Str(s) => s.clone(),
            other => unreachable!("state draws are strings, got {other:?}"),
        })
        .collect()
}

/// DDL for a single-dataset channel with the first `n_fixed` of the
/// standard conditions plus a state parameter.
pub fn standard_channel_ddl(name: &str, dataset: &str, n_fixed: usize) -> String {
    assert!(n_fixed <= 5, "at most five standard conditions");
    let thresholds = [49, 49, 49, 79, 79];
    let mut conjuncts: Vec<String> =
        (0..n_fixed).map(|i| format!("t.c{}>{}", i + 1, thresholds[i])).collect();
    conjuncts.push("t.state=TargetState".to_string());
    conjuncts.push("is_new(t)".to_string());
    format!(
        "CREATE CONTINUOUS PUSH CHANNEL {name}(TargetState) PERIOD duration(\"PT{period}S\") {{\n  SELECT t.state FROM {dataset} t WHERE {preds}}}",
        period = 10,
        preds = conjuncts.join(" AND "),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let spec = WorkloadSpec::default();
        let text = toml::to_string(&spec).unwrap();
        assert_eq!(WorkloadSpec::from_toml_str(&text).unwrap(), spec);
        // An empty config is all defaults.
        assert_eq!(WorkloadSpec::from_toml_str("").unwrap(), spec);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(WorkloadSpec::from_toml_str("frame_sise = 100").is_err());
    }

    #[test]
    fn standard_generator_matches_targets() {
        let gen = standard_generator(7);
        // Joint selectivity of all five conditions: 0.5^3 * 0.2^2 = 0.5%.
        let frac = gen.matched_fraction(20_000);
        assert!((frac - 0.005).abs() < 0.002, "joint fraction {frac}");
    }

    #[test]
    fn standard_channel_parses() {
        for n in 0..=5 {
            let ddl = standard_channel_ddl("C", "D", n);
            let def = bad_core::parse_channel_ddl(&ddl).unwrap();
            let classified = bad_core::classify_predicates(&def).unwrap();
            assert_eq!(classified.fixed_for("t").len(), n);
        }
    }

    #[test]
    fn state_weights_population_ranked() {
        let heaviest = US_STATE_POPULATION
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(heaviest.0, "CA");
        assert_eq!(US_STATE_POPULATION.len(), 50);
    }
}
