//! String-literal argument slots.
//!
//! A slot is a string literal passed to a call or method call, either
//! directly or nested inside a list literal argument (`classify(['red',
//! 'blue'])` has two slots). Slots are enumerated in left-to-right source
//! order.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ast::{Comprehension, Expr, Program, Stmt};

/// Child-index path from the program root to a string literal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotPath(pub Vec<u32>);

impl fmt::Display for SlotPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub path: SlotPath,
    pub value: String,
    /// Name of the function or method receiving the literal.
    pub function: String,
    /// Argument position within that call.
    pub position: usize,
}

pub fn string_literal_slots(program: &Program) -> Vec<Slot> {
    let mut copy = program.clone();
    let mut slots = Vec::new();
    walk_slots(&mut copy, &mut |path, function, position, value| {
        slots.push(Slot {
            path: path.clone(),
            value: value.clone(),
            function: String::from(function),
            position,
        });
    });
    slots
}

/// Calls `f` with the ordinal of each slot and a mutable handle to its value.
pub fn rewrite_slots(program: &mut Program, mut f: impl FnMut(usize, &mut String)) {
    let mut ordinal = 0;
    walk_slots(program, &mut |_, _, _, value| {
        f(ordinal, value);
        ordinal += 1;
    });
}

/// Replaces the literal at `path`. Returns false when no slot has that path.
pub fn substitute_at(program: &mut Program, path: &SlotPath, replacement: &str) -> bool {
    let mut hit = false;
    walk_slots(program, &mut |p, _, _, value| {
        if p == path {
            *value = String::from(replacement);
            hit = true;
        }
    });
    hit
}

type Visit<'a> = dyn FnMut(&SlotPath, &str, usize, &mut String) + 'a;

struct Walker<'a, 'f> {
    path: SlotPath,
    visit: &'f mut Visit<'a>,
}

fn walk_slots(program: &mut Program, visit: &mut Visit<'_>) {
    let mut walker = Walker {
        path: SlotPath(Vec::new()),
        visit,
    };
    walker.block(&mut program.statements, 0);
}

impl Walker<'_, '_> {
    fn enter<R>(&mut self, step: u32, f: impl FnOnce(&mut Self) -> R) -> R {
        self.path.0.push(step);
        let r = f(self);
        self.path.0.pop();
        r
    }

    fn block(&mut self, stmts: &mut [Stmt], offset: u32) {
        for (i, stmt) in stmts.iter_mut().enumerate() {
            self.enter(offset + i as u32, |w| w.stmt(stmt));
        }
    }

    fn stmt(&mut self, stmt: &mut Stmt) {
        match stmt {
            Stmt::Assign { value, .. } => self.enter(0, |w| w.expr(value)),
            Stmt::For {
                iter, body, orelse, ..
            } => {
                self.enter(0, |w| w.expr(iter));
                let n = body.len() as u32;
                self.block(body, 1);
                self.block(orelse, 1 + n);
            }
            Stmt::While { test, body, orelse } => {
                self.enter(0, |w| w.expr(test));
                let n = body.len() as u32;
                self.block(body, 1);
                self.block(orelse, 1 + n);
            }
            Stmt::With { items, body } => {
                let n = items.len() as u32;
                for (i, item) in items.iter_mut().enumerate() {
                    self.enter(i as u32, |w| w.expr(&mut item.context));
                }
                self.block(body, n);
            }
            Stmt::Expr(expr) => self.enter(0, |w| w.expr(expr)),
        }
    }

    fn args(&mut self, function: &str, args: &mut [Expr], offset: u32) {
        for (i, arg) in args.iter_mut().enumerate() {
            self.enter(offset + i as u32, |w| w.argument(function, i, arg));
        }
    }

    fn argument(&mut self, function: &str, position: usize, arg: &mut Expr) {
        match arg {
            Expr::Str(value) => (self.visit)(&self.path, function, position, value),
            Expr::List(elements) => {
                for (i, el) in elements.iter_mut().enumerate() {
                    self.enter(i as u32, |w| w.argument(function, position, el));
                }
            }
            other => self.expr(other),
        }
    }

    fn expr(&mut self, expr: &mut Expr) {
        match expr {
            Expr::Name(_) | Expr::Str(_) | Expr::Int(_) | Expr::Bool(_) => {}
            Expr::List(elements) => {
                for (i, el) in elements.iter_mut().enumerate() {
                    self.enter(i as u32, |w| w.expr(el));
                }
            }
            Expr::Call { callee, args } => {
                let callee = callee.clone();
                self.args(&callee, args, 0);
            }
            Expr::MethodCall {
                receiver,
                method,
                args,
            } => {
                self.enter(0, |w| w.expr(receiver));
                let method = method.clone();
                self.args(&method, args, 1);
            }
            Expr::Attribute { receiver, .. } | Expr::Not(receiver) => {
                self.enter(0, |w| w.expr(receiver))
            }
            Expr::Index { receiver, index } => {
                self.enter(0, |w| w.expr(receiver));
                self.enter(1, |w| w.expr(index));
            }
            Expr::Compare { left, right, .. } | Expr::Arith { left, right, .. } => {
                self.enter(0, |w| w.expr(left));
                self.enter(1, |w| w.expr(right));
            }
            Expr::BoolOp { operands, .. } => {
                for (i, operand) in operands.iter_mut().enumerate() {
                    self.enter(i as u32, |w| w.expr(operand));
                }
            }
            Expr::Conditional {
                then,
                test,
                otherwise,
            } => {
                self.enter(0, |w| w.expr(then));
                self.enter(1, |w| w.expr(test));
                self.enter(2, |w| w.expr(otherwise));
            }
            Expr::ListComp {
                element,
                generators,
            }
            | Expr::GenExp {
                element,
                generators,
            } => {
                self.enter(0, |w| w.expr(element));
                for (i, generator) in generators.iter_mut().enumerate() {
                    self.enter(1 + i as u32, |w| w.comprehension(generator));
                }
            }
        }
    }

    fn comprehension(&mut self, generator: &mut Comprehension) {
        self.enter(0, |w| w.expr(&mut generator.iter));
        for (i, condition) in generator.conditions.iter_mut().enumerate() {
            self.enter(1 + i as u32, |w| w.expr(condition));
        }
    }
}

/// Called function and method names in source order.
pub fn call_signature(program: &Program) -> Vec<String> {
    let mut names = Vec::new();
    for stmt in &program.statements {
        signature_stmt(stmt, &mut names);
    }
    names
}

fn signature_stmt(stmt: &Stmt, names: &mut Vec<String>) {
    match stmt {
        Stmt::Assign { value, .. } | Stmt::Expr(value) => signature_expr(value, names),
        Stmt::For {
            iter, body, orelse, ..
        } => {
            signature_expr(iter, names);
            body.iter().chain(orelse).for_each(|s| signature_stmt(s, names));
        }
        Stmt::While { test, body, orelse } => {
            signature_expr(test, names);
            body.iter().chain(orelse).for_each(|s| signature_stmt(s, names));
        }
        Stmt::With { items, body } => {
            items.iter().for_each(|i| signature_expr(&i.context, names));
            body.iter().for_each(|s| signature_stmt(s, names));
        }
    }
}

fn signature_expr(expr: &Expr, names: &mut Vec<String>) {
    match expr {
        Expr::Name(_) | Expr::Str(_) | Expr::Int(_) | Expr::Bool(_) => {}
        Expr::List(items) | Expr::BoolOp { operands: items, .. } => {
            items.iter().for_each(|e| signature_expr(e, names))
        }
        Expr::Call { callee, args } => {
            names.push(callee.clone());
            args.iter().for_each(|e| signature_expr(e, names));
        }
        Expr::MethodCall {
            receiver,
            method,
            args,
        } => {
            signature_expr(receiver, names);
            names.push(method.clone());
            args.iter().for_each(|e| signature_expr(e, names));
        }
        Expr::Attribute { receiver, .. } | Expr::Not(receiver) => signature_expr(receiver, names),
        Expr::Index { receiver, index } => {
            signature_expr(receiver, names);
            signature_expr(index, names);
        }
        Expr::Compare { left, right, .. } | Expr::Arith { left, right, .. } => {
            signature_expr(left, names);
            signature_expr(right, names);
        }
        Expr::Conditional {
            then,
            test,
            otherwise,
        } => {
            signature_expr(then, names);
            signature_expr(test, names);
            signature_expr(otherwise, names);
        }
        Expr::ListComp {
            element,
            generators,
        }
        | Expr::GenExp {
            element,
            generators,
        } => {
            signature_expr(element, names);
            for g in generators {
                signature_expr(&g.iter, names);
                g.conditions.iter().for_each(|e| signature_expr(e, names));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::printer::print_canonical;

    const SAME_COLOR: &str = "image_patch = ImagePatch(image)\nvar1 = image_patch.find('cat')\nvar2 = var1.classify('color')\nvar3 = image_patch.find('tshirt')\nvar4 = var3.classify('color')\nanswer = bool_to_yesno(var2 == var4)";

    fn values(src: &str) -> Vec<String> {
        string_literal_slots(&parse(src).unwrap())
            .into_iter()
            .map(|s| s.value)
            .collect()
    }

    #[test]
    fn dog_program_slots() {
        let slots = string_literal_slots(
            &parse("image_patch = ImagePatch(image)\ndog = image_patch.find('dog')\nanswer = dog.classify('color')")
                .unwrap(),
        );
        assert_eq!(slots.len(), 2);
        assert_eq!((slots[0].value.as_str(), slots[0].function.as_str(), slots[0].position), ("dog", "find", 0));
        assert_eq!((slots[1].value.as_str(), slots[1].function.as_str()), ("color", "classify"));
        assert_ne!(slots[0].path, slots[1].path);
    }

    #[test]
    fn same_color_slot_order() {
        assert_eq!(values(SAME_COLOR), ["cat", "color", "tshirt", "color"]);
    }

    #[test]
    fn no_literals_no_slots() {
        assert!(values("image_patch = ImagePatch(image)\nanswer = str(len(x))").is_empty());
    }

    #[test]
    fn list_arguments_are_expanded_and_non_argument_strings_skipped() {
        assert_eq!(
            values("x = 'free'\ny = choose_relationship(a, b, ['left', 'right'])\nz = f(g('inner'), 'outer')"),
            ["left", "right", "inner", "outer"]
        );
    }

    #[test]
    fn substitute_by_path() {
        let mut p = parse(SAME_COLOR).unwrap();
        let path = string_literal_slots(&p)[2].path.clone();
        assert!(substitute_at(&mut p, &path, "vase"));
        assert!(print_canonical(&p).contains("find('vase')"));
        assert!(!substitute_at(&mut p, &SlotPath(alloc::vec![99]), "x"));
    }

    #[test]
    fn same_color_signature() {
        assert_eq!(
            call_signature(&parse(SAME_COLOR).unwrap()),
            ["ImagePatch", "find", "classify", "find", "classify", "bool_to_yesno"]
        );
    }
}
