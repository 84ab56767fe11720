//! Canonical variable renaming.
//!
//! Assignment targets become `var1`, `var2`, ... in visit order (right-hand
//! side before target). Loop, comprehension, and `with` targets become
//! `temp_var_1`, `temp_var_2`, ... and are substituted throughout their
//! scope. Names in the skip set are never touched. Both counters are global
//! to one program and never reset.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ast::{AssignTarget, Comprehension, Expr, Program, Stmt};

pub const DEFAULT_SKIP: [&str; 2] = ["image_patch", "answer"];

pub fn default_skip() -> BTreeSet<String> {
    DEFAULT_SKIP.iter().map(|s| String::from(*s)).collect()
}

/// Renames with the default skip set `{image_patch, answer}`.
pub fn rename_variables(program: &Program) -> Program {
    rename_variables_with(program, &default_skip())
}

pub fn rename_variables_with(program: &Program, skip: &BTreeSet<String>) -> Program {
    let mut renamer = Renamer {
        counter: 1,
        temp_counter: 1,
        name_map: BTreeMap::new(),
        skip,
        scopes: Vec::new(),
    };
    let mut out = program.clone();
    renamer.block(&mut out.statements);
    out
}

struct Renamer<'s> {
    counter: usize,
    temp_counter: usize,
    name_map: BTreeMap<String, String>,
    skip: &'s BTreeSet<String>,
    /// Innermost-last stack of (original, temp) bindings.
    scopes: Vec<(String, String)>,
}

impl Renamer<'_> {
    fn new_name(&mut self) -> String {
        let name = format!("var{}", self.counter);
        self.counter += 1;
        name
    }

    fn new_temp(&mut self) -> String {
        let name = format!("temp_var_{}", self.temp_counter);
        self.temp_counter += 1;
        name
    }

    fn scoped(&self, id: &str) -> Option<&String> {
        self.scopes
            .iter()
            .rev()
            .find(|(old, _)| old == id)
            .map(|(_, new)| new)
    }

    fn lookup(&self, id: &str) -> Option<String> {
        if self.skip.contains(id) {
            return None;
        }
        self.scoped(id)
            .or_else(|| self.name_map.get(id))
            .cloned()
    }

    fn rename_target(&mut self, target: &mut AssignTarget) {
        match target {
            AssignTarget::Name(id) => {
                if self.skip.contains(id.as_str()) {
                    return;
                }
                if let Some(new) = self.scoped(id) {
                    *id = new.clone();
                    return;
                }
                if !self.name_map.contains_key(id.as_str()) {
                    let new = self.new_name();
                    self.name_map.insert(id.clone(), new);
                }
                *id = self.name_map[id.as_str()].clone();
            }
            AssignTarget::Tuple(elements) => {
                for el in elements {
                    self.rename_target(el);
                }
            }
        }
    }

    /// Gives a plain-name binder a fresh temp name and returns the scope
    /// entry to push; other binders are renamed like assignment targets.
    fn bind_temp(&mut self, target: &mut AssignTarget) -> Option<(String, String)> {
        match target {
            AssignTarget::Name(id) if !self.skip.contains(id.as_str()) => {
                let new = self.new_temp();
                let old = core::mem::replace(id, new.clone());
                Some((old, new))
            }
            other => {
                self.rename_target(other);
                None
            }
        }
    }

    fn block(&mut self, stmts: &mut [Stmt]) {
        for stmt in stmts {
            self.stmt(stmt);
        }
    }

    fn stmt(&mut self, stmt: &mut Stmt) {
        match stmt {
            Stmt::Assign { targets, value } => {
                self.expr(value);
                for target in targets {
                    self.rename_target(target);
                }
            }
            Stmt::For {
                target,
                iter,
                body,
                orelse,
            } => {
                let binding = self.bind_temp(target);
                self.expr(iter);
                let depth = self.scopes.len();
                self.scopes.extend(binding);
                self.block(body);
                self.block(orelse);
                self.scopes.truncate(depth);
            }
            Stmt::While { test, body, orelse } => {
                self.expr(test);
                self.block(body);
                self.block(orelse);
            }
            Stmt::With { items, body } => {
                let depth = self.scopes.len();
                for item in items.iter_mut() {
                    let binding = item.bound.as_mut().and_then(|b| self.bind_temp(b));
                    self.expr(&mut item.context);
                    self.scopes.extend(binding);
                }
                self.block(body);
                self.scopes.truncate(depth);
            }
            Stmt::Expr(expr) => self.expr(expr),
        }
    }

    fn comprehension(&mut self, element: &mut Expr, generators: &mut [Comprehension]) {
        let depth = self.scopes.len();
        let mut scope_after = Vec::with_capacity(generators.len());
        for generator in generators.iter_mut() {
            let binding = self.bind_temp(&mut generator.target);
            self.expr(&mut generator.iter);
            self.scopes.extend(binding);
            scope_after.push(self.scopes.len());
        }
        self.expr(element);
        for (generator, visible) in generators.iter_mut().zip(scope_after) {
            let hidden = self.scopes.split_off(visible);
            for condition in &mut generator.conditions {
                self.expr(condition);
            }
            self.scopes.extend(hidden);
        }
        self.scopes.truncate(depth);
    }

    fn expr(&mut self, expr: &mut Expr) {
        match expr {
            Expr::Name(id) => {
                if let Some(new) = self.lookup(id) {
                    *id = new;
                }
            }
            Expr::Str(_) | Expr::Int(_) | Expr::Bool(_) => {}
            Expr::List(items) | Expr::BoolOp { operands: items, .. } => {
                items.iter_mut().for_each(|e| self.expr(e))
            }
            Expr::Call { args, .. } => args.iter_mut().for_each(|e| self.expr(e)),
            Expr::MethodCall { receiver, args, .. } => {
                self.expr(receiver);
                args.iter_mut().for_each(|e| self.expr(e));
            }
            Expr::Attribute { receiver, .. } | Expr::Not(receiver) => self.expr(receiver),
            Expr::Index { receiver, index } => {
                self.expr(receiver);
                self.expr(index);
            }
            Expr::Compare { left, right, .. } | Expr::Arith { left, right, .. } => {
                self.expr(left);
                self.expr(right);
            }
            Expr::Conditional {
                then,
                test,
                otherwise,
            } => {
                self.expr(then);
                self.expr(test);
                self.expr(otherwise);
            }
            Expr::ListComp {
                element,
                generators,
            }
            | Expr::GenExp {
                element,
                generators,
            } => self.comprehension(element, generators),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::printer::print_canonical;

    fn renamed(src: &str) -> String {
        print_canonical(&rename_variables(&parse(src).unwrap()))
    }

    #[test]
    fn dog_program() {
        assert_eq!(
            renamed("image_patch = ImagePatch(image)\ndog = image_patch.find('dog')\nanswer = dog.classify('color')"),
            "image_patch=ImagePatch(image)\nvar1=image_patch.find('dog')\nanswer=var1.classify('color')"
        );
    }

    #[test]
    fn skip_only_program_is_unchanged() {
        let src = "image_patch=ImagePatch(image)\nanswer=image_patch.simple_query('Who is riding?')";
        assert_eq!(renamed(src), src);
    }

    #[test]
    fn right_hand_side_is_visited_before_target() {
        assert_eq!(renamed("total = total + 1\nx = total"), "var1=total + 1\nvar2=var1");
    }

    #[test]
    fn loop_target_in_single_line_suite() {
        assert_eq!(
            renamed("for patch in patches: total = total + patch.left"),
            "for temp_var_1 in patches:\n    var1=total + temp_var_1.left"
        );
    }

    #[test]
    fn loop_scope_ends_with_loop() {
        assert_eq!(
            renamed("for p in ps:\n    q = p\nr = p"),
            "for temp_var_1 in ps:\n    var1=temp_var_1\nvar2=p"
        );
    }

    #[test]
    fn tuple_loop_targets_use_var_names() {
        assert_eq!(
            renamed("for a, b in pairs:\n    c = a"),
            "for var1, var2 in pairs:\n    var3=var1"
        );
    }

    #[test]
    fn nested_generators_see_outer_targets() {
        assert_eq!(
            renamed("x = [y for row in rows for y in row if y if row]"),
            "var1=[temp_var_2 for temp_var_1 in rows for temp_var_2 in temp_var_1 if temp_var_2 if temp_var_1]"
        );
    }

    #[test]
    fn condition_does_not_see_later_generator() {
        assert_eq!(
            renamed("x = [a for a in xs if b for b in ys]"),
            "var1=[temp_var_1 for temp_var_1 in xs if b for temp_var_2 in ys]"
        );
    }

    #[test]
    fn skip_names_are_never_bound_as_temps() {
        assert_eq!(
            renamed("for answer in xs:\n    y = answer"),
            "for answer in xs:\n    var1=answer"
        );
    }

    #[test]
    fn idempotent_on_examples() {
        for src in [
            "image_patch = ImagePatch(image)\ncups = image_patch.find('cup')\nred = [c for c in cups if c.verify_property('red')]\nanswer = bool_to_yesno(exists(red))",
            "with f(x) as y, g(y) as z:\n    w = y + z",
            "a, b = pair\nfor i in a:\n    b = b + i",
        ] {
            let once = rename_variables(&parse(src).unwrap());
            assert_eq!(rename_variables(&once), once, "{src}");
        }
    }
}
