//! Canonical program printer.
//!
//! Single-name assignments print as `name=value` (no spaces around `=`);
//! everything else uses standard spacing. Blocks indent by four spaces and
//! lines are joined with `\n` without a trailing newline.

use alloc::string::String;

use crate::ast::{AssignTarget, BoolOpKind, Comprehension, Expr, Program, Stmt};

const INDENT: &str = "    ";

pub fn print_canonical(program: &Program) -> String {
    let mut out = String::new();
    print_block(&program.statements, 0, &mut out);
    out
}

pub fn print_expr(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(expr, PREC_CONDITIONAL, &mut out);
    out
}

fn print_block(stmts: &[Stmt], depth: usize, out: &mut String) {
    for stmt in stmts {
        print_stmt(stmt, depth, out);
    }
}

fn line_start(depth: usize, out: &mut String) {
    if !out.is_empty() {
        out.push('\n');
    }
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn print_stmt(stmt: &Stmt, depth: usize, out: &mut String) {
    line_start(depth, out);
    match stmt {
        Stmt::Assign { targets, value } => {
            let compact = targets.iter().all(|t| matches!(t, AssignTarget::Name(_)));
            let sep = if compact { "=" } else { " = " };
            for target in targets {
                write_target(target, false, out);
                out.push_str(sep);
            }
            write_expr(value, PREC_CONDITIONAL, out);
        }
        Stmt::For {
            target,
            iter,
            body,
            orelse,
        } => {
            out.push_str("for ");
            write_target(target, false, out);
            out.push_str(" in ");
            write_expr(iter, PREC_CONDITIONAL, out);
            out.push(':');
            print_block(body, depth + 1, out);
            print_else(orelse, depth, out);
        }
        Stmt::While { test, body, orelse } => {
            out.push_str("while ");
            write_expr(test, PREC_CONDITIONAL, out);
            out.push(':');
            print_block(body, depth + 1, out);
            print_else(orelse, depth, out);
        }
        Stmt::With { items, body } => {
            out.push_str("with ");
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(&item.context, PREC_CONDITIONAL, out);
                if let Some(bound) = &item.bound {
                    out.push_str(" as ");
                    write_target(bound, true, out);
                }
            }
            out.push(':');
            print_block(body, depth + 1, out);
        }
        Stmt::Expr(expr) => write_expr(expr, PREC_CONDITIONAL, out),
    }
}

fn print_else(orelse: &[Stmt], depth: usize, out: &mut String) {
    if orelse.is_empty() {
        return;
    }
    line_start(depth, out);
    out.push_str("else:");
    print_block(orelse, depth + 1, out);
}

fn write_target(target: &AssignTarget, parenthesize: bool, out: &mut String) {
    match target {
        AssignTarget::Name(id) => out.push_str(id),
        AssignTarget::Tuple(elements) => {
            if parenthesize {
                out.push('(');
            }
            for (i, el) in elements.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_target(el, true, out);
            }
            if parenthesize {
                out.push(')');
            }
        }
    }
}

const PREC_CONDITIONAL: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_NOT: u8 = 4;
const PREC_COMPARE: u8 = 5;
const PREC_ARITH: u8 = 6;
const PREC_POSTFIX: u8 = 7;

fn precedence(expr: &Expr) -> u8 {
    match expr {
        Expr::Conditional { .. } => PREC_CONDITIONAL,
        Expr::BoolOp {
            op: BoolOpKind::Or, ..
        } => PREC_OR,
        Expr::BoolOp {
            op: BoolOpKind::And,
            ..
        } => PREC_AND,
        Expr::Not(_) => PREC_NOT,
        Expr::Compare { .. } => PREC_COMPARE,
        Expr::Arith { .. } => PREC_ARITH,
        _ => PREC_POSTFIX,
    }
}

fn write_expr(expr: &Expr, min_prec: u8, out: &mut String) {
    let parens = precedence(expr) < min_prec;
    if parens {
        out.push('(');
    }
    match expr {
        Expr::Name(id) => out.push_str(id),
        Expr::Str(value) => write_str(value, out),
        Expr::Int(value) => {
            use core::fmt::Write;
            let _ = write!(out, "{value}");
        }
        Expr::Bool(true) => out.push_str("True"),
        Expr::Bool(false) => out.push_str("False"),
        Expr::List(elements) => {
            out.push('[');
            write_list(elements, out);
            out.push(']');
        }
        Expr::Call { callee, args } => {
            out.push_str(callee);
            out.push('(');
            write_list(args, out);
            out.push(')');
        }
        Expr::MethodCall {
            receiver,
            method,
            args,
        } => {
            write_expr(receiver, PREC_POSTFIX, out);
            out.push('.');
            out.push_str(method);
            out.push('(');
            write_list(args, out);
            out.push(')');
        }
        Expr::Attribute { receiver, name } => {
            write_expr(receiver, PREC_POSTFIX, out);
            out.push('.');
            out.push_str(name);
        }
        Expr::Index { receiver, index } => {
            write_expr(receiver, PREC_POSTFIX, out);
            out.push('[');
            write_expr(index, PREC_CONDITIONAL, out);
            out.push(']');
        }
        Expr::Compare { left, op, right } => {
            write_expr(left, PREC_ARITH, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_expr(right, PREC_ARITH, out);
        }
        Expr::Arith { left, op, right } => {
            write_expr(left, PREC_ARITH, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_expr(right, PREC_POSTFIX, out);
        }
        Expr::BoolOp { op, operands } => {
            let operand_prec = precedence(expr) + 1;
            for (i, operand) in operands.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                    out.push_str(op.keyword());
                    out.push(' ');
                }
                write_expr(operand, operand_prec, out);
            }
        }
        Expr::Not(operand) => {
            out.push_str("not ");
            write_expr(operand, PREC_NOT, out);
        }
        Expr::Conditional {
            then,
            test,
            otherwise,
        } => {
            write_expr(then, PREC_OR, out);
            out.push_str(" if ");
            write_expr(test, PREC_OR, out);
            out.push_str(" else ");
            write_expr(otherwise, PREC_CONDITIONAL, out);
        }
        Expr::ListComp {
            element,
            generators,
        } => {
            out.push('[');
            write_comprehension(element, generators, out);
            out.push(']');
        }
        Expr::GenExp {
            element,
            generators,
        } => {
            out.push('(');
            write_comprehension(element, generators, out);
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
}

fn write_list(items: &[Expr], out: &mut String) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(item, PREC_CONDITIONAL, out);
    }
}

fn write_comprehension(element: &Expr, generators: &[Comprehension], out: &mut String) {
    write_expr(element, PREC_CONDITIONAL, out);
    for generator in generators {
        out.push_str(" for ");
        write_target(&generator.target, false, out);
        out.push_str(" in ");
        write_expr(&generator.iter, PREC_OR, out);
        for condition in &generator.conditions {
            out.push_str(" if ");
            write_expr(condition, PREC_OR, out);
        }
    }
}

fn write_str(value: &str, out: &mut String) {
    out.push('\'');
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('\'');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::CmpOp;
    use crate::parser::parse;
    use alloc::vec;

    #[test]
    fn compact_assignment() {
        let program = Program::new(vec![Stmt::assign(
            "answer",
            Expr::call(
                "bool_to_yesno",
                vec![Expr::compare(Expr::name("var2"), CmpOp::Eq, Expr::name("var4"))],
            ),
        )]);
        assert_eq!(print_canonical(&program), "answer=bool_to_yesno(var2 == var4)");
    }

    #[test]
    fn empty_program_prints_nothing() {
        assert_eq!(print_canonical(&Program::default()), "");
    }

    #[test]
    fn blocks_indent_four_spaces() {
        let p = parse("for  x  in  xs :\n  y = x\n  while y:\n     y = y - 1\nelse:\n  z = 0").unwrap();
        assert_eq!(
            print_canonical(&p),
            "for x in xs:\n    y=x\n    while y:\n        y=y - 1\nelse:\n    z=0"
        );
    }

    #[test]
    fn tuple_targets_keep_spaces() {
        let p = parse("a,b=x\nwith f(x) as (c, d), g(y):\n    e = c").unwrap();
        assert_eq!(
            print_canonical(&p),
            "a, b = x\nwith f(x) as (c, d), g(y):\n    e=c"
        );
    }

    #[test]
    fn parenthesizes_by_precedence() {
        for src in [
            "x=(a or b) and c",
            "x=a or b and c",
            "x=(a if b else c) if d else e",
            "x=not a == b",
            "x=(not a) == b",
            "x=a - (b - c)",
            "x=(a == b) == c",
            "x=[y for y in (a if b else c) if (d if e else f)]",
            "x=f((p for p in ps))",
            "x=(a and b) and c",
        ] {
            let p = parse(src).unwrap();
            assert_eq!(print_canonical(&p), src);
        }
    }

    #[test]
    fn string_escapes_round_trip() {
        let p = Program::new(vec![Stmt::Expr(Expr::str("it's a \\ \"quote\"\n"))]);
        let text = print_canonical(&p);
        assert_eq!(text, r#"'it\'s a \\ "quote"\n'"#);
        assert_eq!(parse(&text).unwrap(), p);
    }
}
