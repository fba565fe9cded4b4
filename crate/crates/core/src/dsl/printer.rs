use std::fmt::Write;

use super::ast::*;

fn fmt_duration(secs: u64) -> String {
    let mut out = String::from("PT");
    let mut rest = secs;
    if rest >= 3600 && rest % 3600 == 0 {
        return format!("PT{}H", rest / 3600);
    }
    if rest >= 3600 {
        write!(out, "{}H", rest / 3600).unwrap();
        rest %= 3600;
    }
    if rest >= 60 {
        write!(out, "{}M", rest / 60).unwrap();
        rest %= 60;
    }
    if rest > 0 || secs == 0 {
        write!(out, "{rest}S").unwrap();
    }
    out
}

fn fmt_operand(op: &Operand) -> String {
    match op {
        Operand::Field(fr) => fr.to_string(),
        Operand::Param(p) => p.clone(),
        Operand::Literal(v) => v.to_string(),
    }
}

fn fmt_atom(atom: &PredicateAtom) -> String {
    match atom {
        PredicateAtom::Compare { lhs, op, rhs } => {
            format!("{}{}{}", fmt_operand(lhs), op, fmt_operand(rhs))
        }
        PredicateAtom::SpatialDistance { left, right, bound } => {
            format!("spatial_distance({left},{right})<{bound}")
        }
        PredicateAtom::Freshness { alias } => format!("is_new({alias})"),
    }
}

/// Renders a definition back to canonical DDL text. Re-parsing the output
/// yields a structurally equal definition.
pub fn print_channel_ddl(def: &ChannelDefinition) -> String {
    let params = def.params.join(", ");
    let projection = def
        .projection
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let datasets = def
        .datasets
        .iter()
        .map(|d| {
            if d.name == d.alias {
                d.name.clone()
            } else {
                format!("{} {}", d.name, d.alias)
            }
        })
        .collect::<Vec<_>>()
        .join(", ");
    let mut out = format!(
        "CREATE CONTINUOUS PUSH CHANNEL {}({})\nPERIOD duration(\"{}\") {{\n SELECT {}\n FROM {}",
        def.name,
        params,
        fmt_duration(def.period_secs),
        projection,
        datasets
    );
    if !def.predicates.is_empty() {
        let preds = def
            .predicates
            .iter()
            .map(fmt_atom)
            .collect::<Vec<_>>()
            .join("\n       AND ");
        write!(out, "\n WHERE {preds}").unwrap();
    }
    out.push_str("};\n");
    out
}

/// Renders a subscribe statement back to canonical text.
pub fn print_subscribe(stmt: &SubscribeStatement) -> String {
    let args = stmt
        .arg_values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    format!("SUBSCRIBE TO {}({}) ON {};", stmt.channel_name, args, stmt.broker_name)
}
