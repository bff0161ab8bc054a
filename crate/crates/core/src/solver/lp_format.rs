//! CPLEX LP text export.

use std::fmt::Write as _;

use crate::model::{LinearModel, Relation, VarKind};

/// LP identifiers may not contain brackets; `s[0,1,2,3]` becomes `s(0,1,2,3)`.
fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| match c {
            '[' => '(',
            ']' => ')',
            c if c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c) => c,
            _ => '_',
        })
        .collect();
    if out.starts_with(|c: char| c.is_ascii_digit() || c == '.') || out.is_empty() {
        out.insert(0, '_');
    }
    out
}

fn num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn write_terms(out: &mut String, names: &[String], terms: &[(crate::model::VarId, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names[0]);
        return;
    }
    let mut col = 0;
    for (k, &(v, c)) in terms.iter().enumerate() {
        let sign = if c < 0.0 { "-" } else { "+" };
        let mag = c.abs();
        let piece = if mag == 1.0 {
            format!(" {sign} {}", names[v.0])
        } else {
            format!(" {sign} {} {}", num(mag), names[v.0])
        };
        let piece = if k == 0 && c >= 0.0 {
            piece.replacen(" + ", " ", 1)
        } else {
            piece
        };
        // keep lines comfortably below the 510 character limit
        if col + piece.len() > 240 {
            out.push_str("\n  ");
            col = 0;
        }
        col += piece.len();
        out.push_str(&piece);
    }
}

/// Renders `model` in CPLEX LP format.
pub fn write_lp(model: &LinearModel) -> String {
    let names: Vec<String> = if model.variables.is_empty() {
        vec!["_none".to_string()]
    } else {
        model.variables.iter().map(|v| sanitize(&v.name)).collect()
    };
    let mut out = String::new();
    out.push_str("\\ surgeflow model\n");
    out.push_str("Minimize\n obj:");
    let mut obj = model.objective.clone();
    obj.compact();
    write_terms(&mut out, &names, &obj.terms);
    if obj.constant != 0.0 {
        // constant offsets are carried as a comment; not all readers accept them
        let _ = write!(out, "\n\\ objective constant {}", num(obj.constant));
    }
    out.push_str("\nSubject To\n");
    for (k, con) in model.constraints.iter().enumerate() {
        let label = if con.name.is_empty() {
            format!("c{k}")
        } else {
            sanitize(&con.name)
        };
        let _ = write!(out, " {label}:");
        write_terms(&mut out, &names, &con.terms);
        let rel = match con.relation {
            Relation::LessEq => "<=",
            Relation::Eq => "=",
            Relation::GreaterEq => ">=",
        };
        let _ = writeln!(out, " {rel} {}", num(con.rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables.iter().zip(&names) {
        if matches!(v.kind, VarKind::Binary) {
            continue;
        }
        let (l, u) = (v.lower, v.upper);
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else if l == u {
            let _ = writeln!(out, " {name} = {}", num(l));
        } else {
            let lo = if l == f64::NEG_INFINITY { "-inf".to_string() } else { num(l) };
            let hi = if u == f64::INFINITY { "+inf".to_string() } else { num(u) };
            let _ = writeln!(out, " {lo} <= {name} <= {hi}");
        }
    }
    let section = |out: &mut String, title: &str, pick: &dyn Fn(&VarKind) -> bool| {
        let chosen: Vec<&String> = model
            .variables
            .iter()
            .zip(&names)
            .filter(|(v, _)| pick(&v.kind))
            .map(|(_, n)| n)
            .collect();
        if chosen.is_empty() {
            return;
        }
        out.push_str(title);
        out.push('\n');
        for n in chosen {
            let _ = writeln!(out, " {n}");
        }
    };
    section(&mut out, "Generals", &|k| matches!(k, VarKind::Integer));
    section(&mut out, "Binaries", &|k| matches!(k, VarKind::Binary));
    section(&mut out, "Semi-Continuous", &|k| matches!(k, VarKind::SemiContinuous { .. }));
    out.push_str("End\n");
    out
}
