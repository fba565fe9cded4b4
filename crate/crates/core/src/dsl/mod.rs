//! The channel definition language: a restricted DDL subset covering
//! continuous push channels with a single SELECT, one or two datasets in
//! FROM, and an AND-conjunction of predicate atoms in WHERE.
//!
//! Parsing is pure: the same text always yields the same value.

mod ast;
mod classify;
mod lexer;
mod parser;
mod printer;

pub use ast::{
    ChannelDefinition, DatasetRef, Operand, PredicateAtom, PredicateClass, SubscribeStatement,
};
pub use classify::{classify_atom, classify_predicates, AliasPredicates, ClassifiedPredicates};
pub use parser::{parse_channel_ddl, parse_iso_duration, parse_subscribe};
pub use printer::{print_channel_ddl, print_subscribe};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DslError {
    #[error("syntax error at offset {pos}: expected {expected}")]
    Syntax { pos: usize, expected: String },
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("unclassifiable predicate: {0}")]
    Unclassifiable(String),
    #[error("invalid channel definition: {0}")]
    InvalidDefinition(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{CmpOp, Value};

    const FIG5_DDL: &str = r#"
CREATE CONTINUOUS PUSH CHANNEL
TweetsAboutDrugs(Mystate)
PERIOD duration ("PT10M") {
 SELECT t.text
 FROM EnrichedTweets t
 WHERE t.state=Mystate
       AND t.threatening_rate=10
       AND t.drug_activity="Manufacturing Drugs"
       AND is_new(t)};
"#;

    const FIG2_DDL: &str = r#"
CREATE CONTINUOUS PUSH CHANNEL
TweetsAboutCrime(MyUserName)
PERIOD duration ("PT10M") {
 SELECT t.text
 FROM EnrichedTweets t, UserLocations u
 WHERE spatial_distance(u.location,t.location)<10
       AND u.username=MyUserName
       AND t.about_country="US"
       AND t.retweet_count>10000
       AND t.threatening_rate>5
       AND is_new(t)};
"#;

    #[test]
    fn parses_tweets_about_drugs() {
        let def = parse_channel_ddl(FIG5_DDL).unwrap();
        assert_eq!(def.name, "TweetsAboutDrugs");
        assert_eq!(def.params, vec!["Mystate"]);
        assert_eq!(def.period_secs, 600);
        let classes = classify_predicates(&def).unwrap();
        let t = classes.alias("t").unwrap();
        assert_eq!(t.fixed.len(), 2);
        assert_eq!(t.parameterized.len(), 1);
        assert!(t.freshness);
        // FIXED preserve textual order: threatening_rate first.
        match &t.fixed[0] {
            PredicateAtom::Compare { lhs: Operand::Field(fr), op, rhs } => {
                assert_eq!(fr.field, "threatening_rate");
                assert_eq!(*op, CmpOp::Eq);
                assert_eq!(*rhs, Operand::Literal(Value::Int(10)));
            }
            other => panic!("unexpected atom {other:?}"),
        }
        match &t.fixed[1] {
            PredicateAtom::Compare { lhs: Operand::Field(fr), rhs, .. } => {
                assert_eq!(fr.field, "drug_activity");
                assert_eq!(*rhs, Operand::Literal(Value::Str("Manufacturing Drugs".into())));
            }
            other => panic!("unexpected atom {other:?}"),
        }
    }

    #[test]
    fn parses_tweets_about_crime() {
        let def = parse_channel_ddl(FIG2_DDL).unwrap();
        let classes = classify_predicates(&def).unwrap();
        let t = classes.alias("t").unwrap();
        assert_eq!(t.fixed.len(), 3);
        let u = classes.alias("u").unwrap();
        assert_eq!(u.parameterized.len(), 1);
        assert_eq!(classes.joins().len(), 1);
        assert_eq!(classes.total_predicates(), def.predicates.len());
        assert_eq!(def.primary_alias(), "t");
        assert_eq!(def.secondary().unwrap().name, "UserLocations");
    }

    #[test]
    fn minimal_channel_has_no_fixed_predicates() {
        let def = parse_channel_ddl(
            r#"CREATE CONTINUOUS PUSH CHANNEL C(p) PERIOD duration("PT1S") { SELECT t.x FROM D t WHERE t.x=p AND is_new(t)}"#,
        )
        .unwrap();
        let classes = classify_predicates(&def).unwrap();
        assert!(classes.fixed_for("t").is_empty());
        assert!(classes.alias("t").unwrap().freshness);
        assert_eq!(def.period_secs, 1);
    }

    #[test]
    fn rejects_pull_channels() {
        let err = parse_channel_ddl(
            r#"CREATE CONTINUOUS PULL CHANNEL C(p) PERIOD duration("PT1S") { SELECT t.x FROM D t WHERE t.x=p }"#,
        )
        .unwrap_err();
        assert!(matches!(err, DslError::Unsupported(_)));
    }

    #[test]
    fn rejects_or_predicates() {
        let err = parse_channel_ddl(
            r#"CREATE CONTINUOUS PUSH CHANNEL C(p) PERIOD duration("PT1S") { SELECT t.x FROM D t WHERE t.x=p OR t.y=1 }"#,
        )
        .unwrap_err();
        assert!(matches!(err, DslError::Unsupported(_)));
    }

    #[test]
    fn rejects_unreferenced_param() {
        let err = parse_channel_ddl(
            r#"CREATE CONTINUOUS PUSH CHANNEL C(p,q) PERIOD duration("PT1S") { SELECT t.x FROM D t WHERE t.x=p }"#,
        )
        .unwrap_err();
        assert!(matches!(err, DslError::InvalidDefinition(_)));
    }

    #[test]
    fn rejects_zero_period() {
        let err = parse_channel_ddl(
            r#"CREATE CONTINUOUS PUSH CHANNEL C(p) PERIOD duration("PT0S") { SELECT t.x FROM D t WHERE t.x=p }"#,
        )
        .unwrap_err();
        assert!(matches!(err, DslError::InvalidDefinition(_)));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_channel_ddl("CREATE CONTINUOUS PUSH PIPE").unwrap_err();
        match err {
            DslError::Syntax { pos, .. } => assert_eq!(pos, 23),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_subscribe_fig3() {
        let stmt = parse_subscribe(r#"SUBSCRIBE TO TweetsAboutCrime("user123") ON BrokerA;"#).unwrap();
        assert_eq!(stmt.channel_name, "TweetsAboutCrime");
        assert_eq!(stmt.arg_values, vec![Value::Str("user123".into())]);
        assert_eq!(stmt.broker_name, "BrokerA");
    }

    #[test]
    fn parses_zero_arg_subscribe() {
        let stmt = parse_subscribe("SUBSCRIBE TO C() ON B;").unwrap();
        assert!(stmt.arg_values.is_empty());
    }

    #[test]
    fn subscribe_grammar_permits_any_literal_arity() {
        // Arity is checked at registration, not here.
        let stmt = parse_subscribe(r#"SUBSCRIBE TO TweetsAboutDrugs("CA","TX") ON B;"#).unwrap();
        assert_eq!(stmt.arg_values.len(), 2);
    }

    #[test]
    fn ddl_round_trips_through_printer() {
        for text in [FIG5_DDL, FIG2_DDL] {
            let def = parse_channel_ddl(text).unwrap();
            let printed = print_channel_ddl(&def);
            let reparsed = parse_channel_ddl(&printed).unwrap();
            assert_eq!(def, reparsed, "round trip failed for {printed}");
        }
    }

    #[test]
    fn iso_durations() {
        assert_eq!(parse_iso_duration("PT10M").unwrap(), 600);
        assert_eq!(parse_iso_duration("PT1H30M5S").unwrap(), 5405);
        assert!(parse_iso_duration("10M").is_err());
    }
}
