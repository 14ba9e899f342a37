use std::fmt::Write;

use super::ast::{Expr, ExprKind, Literal, Program};

/// Binding strength of infix operators, higher binds tighter.
fn infix_level(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "==" | "!=" => 3,
        "<" | "<=" | ">" | ">=" => 4,
        "+" | "-" => 5,
        "*" | "/" => 6,
        _ => return None,
    })
}

const UNARY_LEVEL: u8 = 7;

fn level_of(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Lambda(_) => 0,
        ExprKind::Apply { target, args } => match &target.kind {
            ExprKind::BuiltinRef(op) if args.len() == 2 => infix_level(op).unwrap_or(u8::MAX),
            ExprKind::BuiltinRef(op) if args.len() == 1 && (&**op == "!" || &**op == "neg") => UNARY_LEVEL,
            _ => u8::MAX,
        },
        _ => u8::MAX,
    }
}

pub fn format_number(n: f64) -> String {
    if n == f64::INFINITY {
        "infinity".to_string()
    } else if n == f64::NEG_INFINITY {
        "-infinity".to_string()
    } else {
        format!("{n}")
    }
}

/// Renders a program back to source text. Re-parsing the output yields a
/// structurally identical program.
pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for def in program.defs.values() {
        let _ = writeln!(out, "def {}({}) {{", def.name, def.params.join(", "));
        let _ = writeln!(out, "    {}", pretty_expr(&def.body));
        out.push_str("}\n\n");
    }
    if let Some(main) = &program.main {
        out.push_str(&pretty_expr(main));
        out.push('\n');
    }
    out
}

pub fn pretty_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn write_operand(out: &mut String, e: &Expr, min_level: u8) {
    if level_of(e) < min_level {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_list(out: &mut String, items: &[Expr]) {
    for (i, a) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, a);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Literal(Literal::Bool(b)) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Literal(Literal::Num(n)) => out.push_str(&format_number(*n)),
        ExprKind::Literal(Literal::Sensor(name)) => out.push_str(name),
        ExprKind::Var(name) | ExprKind::BuiltinRef(name) | ExprKind::DefRef(name) => out.push_str(name),
        ExprKind::Lambda(lambda) => {
            let _ = write!(out, "({}) => ", lambda.params.join(", "));
            write_expr(out, &lambda.body);
        }
        ExprKind::Rep { init, update } => {
            out.push_str("rep(");
            write_expr(out, init);
            out.push_str(") { ");
            write_expr(out, update);
            out.push_str(" }");
        }
        ExprKind::Nbr(body) => {
            out.push_str("nbr{");
            write_expr(out, body);
            out.push('}');
        }
        ExprKind::Apply { target, args } => {
            if let ExprKind::BuiltinRef(op) = &target.kind {
                if let (Some(level), 2) = (infix_level(op), args.len()) {
                    write_operand(out, &args[0], level);
                    let _ = write!(out, " {op} ");
                    write_operand(out, &args[1], level + 1);
                    return;
                }
                if args.len() == 1 && (&**op == "!" || &**op == "neg") {
                    out.push_str(if &**op == "!" { "!" } else { "-" });
                    // `- 3` must not fold into the literal -3 on reparse.
                    let literal = matches!(args[0].kind, ExprKind::Literal(Literal::Num(_)));
                    if literal {
                        out.push('(');
                        write_expr(out, &args[0]);
                        out.push(')');
                    } else {
                        write_operand(out, &args[0], UNARY_LEVEL);
                    }
                    return;
                }
            }
            match target.kind {
                ExprKind::Var(_) | ExprKind::BuiltinRef(_) | ExprKind::DefRef(_) => write_expr(out, target),
                _ => {
                    out.push('(');
                    write_expr(out, target);
                    out.push(')');
                }
            }
            out.push('(');
            write_list(out, args);
            out.push(')');
        }
    }
}
