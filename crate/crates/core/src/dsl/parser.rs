use super::ast::*;
use super::lexer::{lex, Spanned, Tok};
use super::{classify_atom, DslError};
use crate::value::{CmpOp, FieldRef, Value};

struct Parser {
    toks: Vec<Spanned>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|s| &s.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map(|s| s.pos).unwrap_or(usize::MAX)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.i).map(|s| s.tok.clone());
        self.i += 1;
        t
    }

    fn err(&self, expected: &str) -> DslError {
        DslError::Syntax { pos: self.pos(), expected: expected.into() }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), DslError> {
        if self.peek() == Some(&tok) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err(what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, DslError> {
        match self.peek() {
            Some(Tok::Ident(_)) => match self.bump() {
                Some(Tok::Ident(s)) => Ok(s),
                _ => unreachable!(),
            },
            _ => Err(self.err(what)),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw) => {
                self.i += 1;
                Ok(())
            }
            _ => Err(self.err(&format!("keyword {kw}"))),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn literal(&mut self) -> Result<Value, DslError> {
        match self.bump() {
            Some(Tok::Str(s)) => Ok(Value::Str(s)),
            Some(Tok::Int(i)) => Ok(Value::Int(i)),
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("true") => Ok(Value::Bool(true)),
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("false") => Ok(Value::Bool(false)),
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("point") => {
                self.expect(Tok::LParen, "'('")?;
                let x = self.number()?;
                self.expect(Tok::Comma, "','")?;
                let y = self.number()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Value::Point(x, y))
            }
            _ => {
                self.i -= 1;
                Err(self.err("literal"))
            }
        }
    }

    fn number(&mut self) -> Result<f64, DslError> {
        match self.bump() {
            Some(Tok::Int(i)) => Ok(i as f64),
            Some(Tok::Float(f)) => Ok(f),
            _ => {
                self.i -= 1;
                Err(self.err("number"))
            }
        }
    }

    /// `alias.field`
    fn field_ref(&mut self) -> Result<FieldRef, DslError> {
        let alias = self.ident("identifier")?;
        self.expect(Tok::Dot, "'.'")?;
        let field = self.ident("field name")?;
        Ok(FieldRef { alias, field })
    }

    fn operand(&mut self) -> Result<Operand, DslError> {
        match self.peek() {
            Some(Tok::Ident(s))
                if !s.eq_ignore_ascii_case("true") && !s.eq_ignore_ascii_case("false") && !s.eq_ignore_ascii_case("point") =>
            {
                let name = self.ident("identifier")?;
                if self.peek() == Some(&Tok::Dot) {
                    self.i += 1;
                    let field = self.ident("field name")?;
                    Ok(Operand::Field(FieldRef { alias: name, field }))
                } else {
                    Ok(Operand::Param(name))
                }
            }
            _ => Ok(Operand::Literal(self.literal()?)),
        }
    }

    fn cmp_op(&mut self) -> Result<CmpOp, DslError> {
        match self.bump() {
            Some(Tok::Eq) => Ok(CmpOp::Eq),
            Some(Tok::Lt) => Ok(CmpOp::Lt),
            Some(Tok::Gt) => Ok(CmpOp::Gt),
            Some(Tok::Le) => Ok(CmpOp::Le),
            Some(Tok::Ge) => Ok(CmpOp::Ge),
            _ => {
                self.i -= 1;
                Err(self.err("comparison operator"))
            }
        }
    }

    fn atom(&mut self) -> Result<PredicateAtom, DslError> {
        if self.at_keyword("is_new") {
            self.i += 1;
            self.expect(Tok::LParen, "'('")?;
            let alias = self.ident("dataset alias")?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(PredicateAtom::Freshness { alias });
        }
        if self.at_keyword("spatial_distance") {
            self.i += 1;
            self.expect(Tok::LParen, "'('")?;
            let left = self.field_ref()?;
            self.expect(Tok::Comma, "','")?;
            let right = self.field_ref()?;
            self.expect(Tok::RParen, "')'")?;
            self.expect(Tok::Lt, "'<'")?;
            let bound = self.number()?;
            return Ok(PredicateAtom::SpatialDistance { left, right, bound });
        }
        if self.at_keyword("select") {
            return Err(DslError::Unsupported("nested SELECT".into()));
        }
        let lhs = self.operand()?;
        let op = self.cmp_op()?;
        let rhs = self.operand()?;
        Ok(PredicateAtom::Compare { lhs, op, rhs })
    }

    fn conjunction(&mut self) -> Result<Vec<PredicateAtom>, DslError> {
        let mut atoms = vec![self.atom()?];
        loop {
            if self.at_keyword("and") {
                self.i += 1;
                atoms.push(self.atom()?);
            } else if self.at_keyword("or") {
                return Err(DslError::Unsupported("OR predicates".into()));
            } else {
                break;
            }
        }
        Ok(atoms)
    }
}

/// Parses an ISO-8601 duration of the form `PTnHnMnS` into whole seconds.
pub fn parse_iso_duration(s: &str) -> Result<u64, DslError> {
    let bad = || DslError::Syntax { pos: 0, expected: format!("ISO-8601 duration, got {s:?}") };
    let rest = s.strip_prefix("PT").ok_or_else(bad)?;
    if rest.is_empty() {
        return Err(bad());
    }
    let mut secs: u64 = 0;
    let mut num = String::new();
    for c in rest.chars() {
        if c.is_ascii_digit() {
            num.push(c);
        } else {
            let n: u64 = num.parse().map_err(|_| bad())?;
            num.clear();
            secs += match c {
                'H' => n * 3600,
                'M' => n * 60,
                'S' => n,
                _ => return Err(bad()),
            };
        }
    }
    if !num.is_empty() {
        return Err(bad());
    }
    Ok(secs)
}

/// Parses a single `CREATE CONTINUOUS PUSH CHANNEL` statement.
pub fn parse_channel_ddl(text: &str) -> Result<ChannelDefinition, DslError> {
    let mut p = Parser { toks: lex(text)?, i: 0 };
    p.keyword("create")?;
    p.keyword("continuous")?;
    if p.at_keyword("pull") {
        return Err(DslError::Unsupported("PULL channels".into()));
    }
    p.keyword("push")?;
    p.keyword("channel")?;
    let name = p.ident("channel name")?;
    p.expect(Tok::LParen, "'('")?;
    let mut params = Vec::new();
    if p.peek() != Some(&Tok::RParen) {
        loop {
            params.push(p.ident("parameter name")?);
            if p.peek() == Some(&Tok::Comma) {
                p.i += 1;
            } else {
                break;
            }
        }
    }
    p.expect(Tok::RParen, "')'")?;
    p.keyword("period")?;
    p.keyword("duration")?;
    p.expect(Tok::LParen, "'('")?;
    let period_secs = match p.bump() {
        Some(Tok::Str(s)) => parse_iso_duration(&s)?,
        _ => return Err(p.err("quoted ISO-8601 duration")),
    };
    p.expect(Tok::RParen, "')'")?;
    p.expect(Tok::LBrace, "'{'")?;
    p.keyword("select")?;
    let mut projection = vec![p.field_ref()?];
    while p.peek() == Some(&Tok::Comma) {
        p.i += 1;
        projection.push(p.field_ref()?);
    }
    p.keyword("from")?;
    let mut datasets = Vec::new();
    loop {
        let ds_name = p.ident("dataset name")?;
        let alias = match p.peek() {
            Some(Tok::Ident(s))
                if !s.eq_ignore_ascii_case("where") && !s.eq_ignore_ascii_case("and") =>
            {
                p.ident("alias")?
            }
            _ => ds_name.clone(),
        };
        datasets.push(DatasetRef { name: ds_name, alias });
        if p.peek() == Some(&Tok::Comma) {
            p.i += 1;
        } else {
            break;
        }
    }
    if datasets.len() > 2 {
        return Err(DslError::Unsupported("more than two datasets in FROM".into()));
    }
    let predicates = if p.at_keyword("where") {
        p.i += 1;
        p.conjunction()?
    } else {
        Vec::new()
    };
    p.expect(Tok::RBrace, "'}'")?;
    if p.peek() == Some(&Tok::Semi) {
        p.i += 1;
    }
    if p.peek().is_some() {
        return Err(p.err("end of statement"));
    }

    let def = ChannelDefinition { name, params, period_secs, projection, datasets, predicates };
    validate(&def)?;
    Ok(def)
}

fn validate(def: &ChannelDefinition) -> Result<(), DslError> {
    if def.period_secs == 0 {
        return Err(DslError::InvalidDefinition("period must be positive".into()));
    }
    // Every predicate must classify cleanly.
    let mut freshness_aliases = Vec::new();
    let mut referenced_params = Vec::new();
    for atom in &def.predicates {
        classify_atom(def, atom)?;
        match atom {
            PredicateAtom::Freshness { alias } => {
                if freshness_aliases.contains(alias) {
                    return Err(DslError::InvalidDefinition(format!(
                        "duplicate is_new on alias {alias}"
                    )));
                }
                freshness_aliases.push(alias.clone());
            }
            PredicateAtom::Compare { lhs, rhs, .. } => {
                for side in [lhs, rhs] {
                    if let Operand::Param(name) = side {
                        referenced_params.push(name.clone());
                    }
                }
            }
            _ => {}
        }
    }
    for param in &def.params {
        if !referenced_params.contains(param) {
            return Err(DslError::InvalidDefinition(format!(
                "parameter {param} is not referenced by any predicate"
            )));
        }
    }
    for fr in &def.projection {
        if def.dataset_for_alias(&fr.alias).is_none() {
            return Err(DslError::Unclassifiable(format!(
                "projection references unknown alias {}",
                fr.alias
            )));
        }
    }
    Ok(())
}

/// Parses a `SUBSCRIBE TO channel(args) ON broker;` statement.
pub fn parse_subscribe(text: &str) -> Result<SubscribeStatement, DslError> {
    let mut p = Parser { toks: lex(text)?, i: 0 };
    p.keyword("subscribe")?;
    p.keyword("to")?;
    let channel_name = p.ident("channel name")?;
    p.expect(Tok::LParen, "'('")?;
    let mut arg_values = Vec::new();
    if p.peek() != Some(&Tok::RParen) {
        loop {
            arg_values.push(p.literal()?);
            if p.peek() == Some(&Tok::Comma) {
                p.i += 1;
            } else {
                break;
            }
        }
    }
    p.expect(Tok::RParen, "')'")?;
    p.keyword("on")?;
    let broker_name = p.ident("broker name")?;
    if p.peek() == Some(&Tok::Semi) {
        p.i += 1;
    }
    if p.peek().is_some() {
        return Err(p.err("end of statement"));
    }
    Ok(SubscribeStatement { channel_name, arg_values, broker_name })
}
