//! Canonical source printer. `parse_library(&print_library(lib)) == lib` for
//! every library the parser can produce.

use std::fmt::Write;

use super::ast::*;

pub fn print_library(lib: &Library) -> String {
    let mut out = String::new();
    writeln!(out, "library {} version {}", lib.name, quote_str(&lib.version)).unwrap();

    if let Some(v) = &lib.fhir_version {
        writeln!(out, "\nusing FHIR version {}", quote_str(v)).unwrap();
    }
    if !lib.includes.is_empty() {
        out.push('\n');
        for inc in &lib.includes {
            writeln!(out, "include {} version {} called {}", inc.name, quote_str(&inc.version), inc.alias).unwrap();
        }
    }
    if !lib.codesystems.is_empty() {
        out.push('\n');
        for cs in &lib.codesystems {
            writeln!(out, "codesystem {}: {}", quote_name(&cs.name), quote_str(&cs.uri)).unwrap();
        }
    }
    if !lib.codes.is_empty() {
        out.push('\n');
        for c in &lib.codes {
            write!(out, "code {}: {} from {}", quote_name(&c.name), quote_str(&c.code), quote_name(&c.codesystem)).unwrap();
            if let Some(d) = &c.display {
                write!(out, " display {}", quote_str(d)).unwrap();
            }
            out.push('\n');
        }
    }
    for d in &lib.defines {
        out.push('\n');
        print_define(&mut out, d);
    }
    out
}

fn print_define(out: &mut String, d: &Define) {
    if let Some(comment) = &d.leading_comment {
        for line in comment.split('\n') {
            if line.is_empty() {
                out.push_str("//\n");
            } else {
                writeln!(out, "// {line}").unwrap();
            }
        }
    }
    if let Some(node) = &d.node_binding {
        writeln!(out, "// node: {node}").unwrap();
    }
    writeln!(out, "define {}:", quote_name(&d.name)).unwrap();
    match &d.expression {
        Expr::If { .. } => {
            let mut e = &d.expression;
            let mut first = true;
            while let Expr::If { cond, then, otherwise } = e {
                let lead = if first { "  if" } else { "  else if" };
                writeln!(out, "{lead} {} then {}", branch(cond), branch(then)).unwrap();
                first = false;
                e = otherwise;
            }
            writeln!(out, "  else {}", print_expr(e, 0)).unwrap();
        }
        Expr::And(..) => {
            let mut spine = Vec::new();
            let mut e = &d.expression;
            while let Expr::And(l, r) = e {
                spine.push(r.as_ref());
                e = l;
            }
            spine.push(e);
            spine.reverse();
            writeln!(out, "  {}", print_expr(spine[0], 3)).unwrap();
            for item in &spine[1..] {
                writeln!(out, "    and {}", print_expr(item, 3)).unwrap();
            }
        }
        e => writeln!(out, "  {}", print_expr(e, 0)).unwrap(),
    }
}

/// Condition and then-branch of an if: nested ifs get parentheses.
fn branch(e: &Expr) -> String {
    print_expr(e, 1)
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::If { .. } => 0,
        Expr::Or(..) => 1,
        Expr::And(..) => 2,
        Expr::Not(_) => 3,
        Expr::Compare { .. } => 4,
        _ => 5,
    }
}

pub fn print_expr(e: &Expr, min_prec: u8) -> String {
    let body = match e {
        Expr::Bool(b) => b.to_string(),
        Expr::Str(s) => quote_str(s),
        Expr::Ref { alias: None, name } => quote_name(name),
        Expr::Ref { alias: Some(a), name } => format!("{a}.{}", quote_name(name)),
        Expr::Or(l, r) => format!("{} or {}", print_expr(l, 1), print_expr(r, 2)),
        Expr::And(l, r) => format!("{} and {}", print_expr(l, 2), print_expr(r, 3)),
        Expr::Not(inner) => format!("not {}", print_expr(inner, 3)),
        Expr::Exists(r) => format!("exists({})", print_retrieve(r)),
        Expr::If { cond, then, otherwise } => {
            format!("if {} then {} else {}", branch(cond), branch(then), print_expr(otherwise, 0))
        }
        Expr::Compare { left, op, right } => format!("{} {} {}", print_expr(left, 5), op.symbol(), print_literal(right)),
        Expr::AgeInYears => "AgeInYears()".to_string(),
    };
    if precedence(e) < min_prec {
        format!("({body})")
    } else {
        body
    }
}

fn print_retrieve(r: &Retrieve) -> String {
    let mut s = format!("[{}", r.resource);
    if let Some(code) = &r.code_ref {
        write!(s, ": {}", quote_name(code)).unwrap();
    }
    s.push(']');
    for (i, f) in r.filters.iter().enumerate() {
        s.push_str(if i == 0 { " R where " } else { " and " });
        write!(s, "R.{} {} {}", f.path, f.op.symbol(), print_literal(&f.value)).unwrap();
    }
    s
}

pub fn print_literal(l: &Literal) -> String {
    match l {
        Literal::Bool(b) => b.to_string(),
        Literal::Number(n) if n.is_sign_negative() => format!("-{}", -n),
        Literal::Number(n) => n.to_string(),
        Literal::Text(s) => quote_str(s),
        Literal::Date(d) => format!("@{}", d.format("%Y-%m-%d")),
    }
}

pub fn quote_str(s: &str) -> String {
    quote(s, '\'')
}

pub fn quote_name(s: &str) -> String {
    quote(s, '"')
}

fn quote(s: &str, q: char) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push(q);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == q => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(q);
    out
}

#[cfg(test)]
mod tests {
    use super::super::parser::{parse_expression, parse_library};
    use super::*;

    #[test]
    fn journey_layout() {
        let mut lib = Library::new("R", "1.0.0");
        lib.includes.push(IncludeDecl {
            name: "D".into(),
            version: "1.0.0".into(),
            alias: "Defs".into(),
            location: Location::default(),
        });
        lib.defines.push(Define::new(
            "Journey_1",
            Expr::conjunction([Expr::aliased("Defs", "S_Action"), Expr::aliased("Defs", "A_Criteria")]).unwrap(),
        ));
        let text = print_library(&lib);
        assert_eq!(
            text,
            "library R version '1.0.0'\n\nusing FHIR version '4.0.1'\n\n\
             include D version '1.0.0' called Defs\n\n\
             define \"Journey_1\":\n  Defs.\"S_Action\"\n    and Defs.\"A_Criteria\"\n"
        );
        assert_eq!(parse_library(&text).unwrap(), lib);
    }

    #[test]
    fn parenthesizes_by_precedence() {
        for src in [
            "a.\"x\" and (a.\"y\" and a.\"z\")",
            "not (\"a\" or \"b\")",
            "(if true then false else true) and \"c\"",
            "if (if \"a\" then true else false) then 'x' else 'y'",
            "\"a\" or \"b\" and not not \"c\"",
            "AgeInYears() < -0.5",
            "exists([Patient] R where R.birthDate < @2000-01-01 and R.gender != 'it\\'s')",
        ] {
            let e = parse_expression(src).unwrap();
            let printed = print_expr(&e, 0);
            assert_eq!(parse_expression(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn comments_round_trip() {
        let mut d = Define::new("X", Expr::Bool(false));
        d.leading_comment = Some("UNCOMPUTABLE\n\nsecond".into());
        d.node_binding = Some("N1".into());
        let mut lib = Library::new("L", "1");
        lib.defines.push(d);
        assert_eq!(parse_library(&print_library(&lib)).unwrap(), lib);
    }
}
