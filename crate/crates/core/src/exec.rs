//! Deterministic interpreter for visual programs over a [`SceneGraph`].
//!
//! Programs start with `image` (the scene) and `image_patch` (the whole
//! image) bound. Detection never comes back empty: when `find` matches
//! nothing it returns a single fallback patch covering the image, which
//! `exists`, `count`, and `filter_img` treat as absent.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::{ArithOp, AssignTarget, BoolOpKind, CmpOp, Comprehension, Expr, Program, Stmt};
use crate::parser::parse;
use crate::scene::{BBox, SceneGraph, SceneObject};
use crate::text::normalize_answer;

/// Free functions callable from programs.
pub const API_FUNCTIONS: [&str; 9] = [
    "ImagePatch",
    "bool_to_yesno",
    "choose_relationship",
    "count",
    "exists",
    "filter_img",
    "len",
    "str",
    "verify_relationship",
];

/// Methods callable on image patches.
pub const API_METHODS: [&str; 5] = ["find", "crop_position", "verify_property", "classify", "simple_query"];

/// Directions accepted by `crop_position`.
pub const DIRECTIONS: [&str; 9] = [
    "left", "right", "above", "below", "on", "in front", "behind", "next to", "near",
];

/// Returned by `classify`, `simple_query`, and `choose_relationship` when
/// nothing in the scene decides the answer.
pub const UNKNOWN: &str = "unknown";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub step_budget: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { step_budget: 10_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureKind {
    SyntaxError,
    NameError,
    TypeError,
    ArityError,
    DomainError,
    StepLimit,
    NoAnswer,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
    /// Index of the top-level statement that failed.
    pub statement: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum ExecOutcome {
    Answer { text: String },
    Failure(Failure),
}

impl ExecOutcome {
    pub fn answer(&self) -> Option<&str> {
        match self {
            ExecOutcome::Answer { text } => Some(text),
            ExecOutcome::Failure(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&Failure> {
        match self {
            ExecOutcome::Failure(f) => Some(f),
            ExecOutcome::Answer { .. } => None,
        }
    }

    /// True when the outcome is an answer equal to `gold` after
    /// normalization.
    pub fn matches(&self, gold: &str) -> bool {
        self.answer()
            .is_some_and(|a| normalize_answer(a) == normalize_answer(gold))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchValue {
    pub region: BBox,
    /// Index into the scene's object list.
    pub bound_object: Option<usize>,
    pub is_fallback: bool,
}

impl PatchValue {
    pub fn whole(scene: &SceneGraph) -> Self {
        PatchValue {
            region: scene.full_box(),
            bound_object: None,
            is_fallback: false,
        }
    }

    pub fn fallback(scene: &SceneGraph) -> Self {
        PatchValue {
            region: scene.full_box(),
            bound_object: None,
            is_fallback: true,
        }
    }

    fn of_object(index: usize, object: &SceneObject) -> Self {
        PatchValue {
            region: object.bbox,
            bound_object: Some(index),
            is_fallback: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Str(String),
    Int(i64),
    Bool(bool),
    List(Vec<Value>),
    Patch(PatchValue),
    Image,
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Str(_) => "str",
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::List(_) => "list",
            Value::Patch(_) => "ImagePatch",
            Value::Image => "image",
        }
    }

    fn truthy(&self) -> bool {
        match self {
            Value::Str(s) => !s.is_empty(),
            Value::Int(i) => *i != 0,
            Value::Bool(b) => *b,
            Value::List(l) => !l.is_empty(),
            Value::Patch(_) | Value::Image => true,
        }
    }
}

struct Fail {
    kind: FailureKind,
    message: String,
}

type R<T> = Result<T, Fail>;

fn fail<T>(kind: FailureKind, message: impl Into<String>) -> R<T> {
    Err(Fail {
        kind,
        message: message.into(),
    })
}

fn type_error<T>(message: impl Into<String>) -> R<T> {
    fail(FailureKind::TypeError, message)
}

/// Parses and runs a program source.
pub fn run_source(source: &str, scene: &SceneGraph, limits: Limits) -> ExecOutcome {
    match parse(source) {
        Ok(program) => run(&program, scene, limits),
        Err(e) => ExecOutcome::Failure(Failure {
            kind: FailureKind::SyntaxError,
            message: e.to_string(),
            statement: e.line.saturating_sub(1),
        }),
    }
}

pub fn run(program: &Program, scene: &SceneGraph, limits: Limits) -> ExecOutcome {
    let mut interp = Interpreter {
        scene,
        steps: 0,
        budget: limits.step_budget.max(1),
        env: BTreeMap::new(),
    };
    interp.env.insert("image".to_owned(), Value::Image);
    interp
        .env
        .insert("image_patch".to_owned(), Value::Patch(PatchValue::whole(scene)));
    for (index, stmt) in program.statements.iter().enumerate() {
        if let Err(f) = interp.stmt(stmt) {
            return ExecOutcome::Failure(Failure {
                kind: f.kind,
                message: f.message,
                statement: index,
            });
        }
    }
    let last = program.statements.len().saturating_sub(1);
    let finish = |kind, message: String| {
        ExecOutcome::Failure(Failure {
            kind,
            message,
            statement: last,
        })
    };
    match interp.env.get("answer") {
        None => finish(FailureKind::NoAnswer, "`answer` was never assigned".to_owned()),
        Some(value) => match stringify(value) {
            Ok(text) => ExecOutcome::Answer { text },
            Err(f) => finish(f.kind, f.message),
        },
    }
}

fn stringify(value: &Value) -> R<String> {
    match value {
        Value::Str(s) => Ok(s.clone()),
        Value::Int(i) => Ok(i.to_string()),
        Value::Bool(true) => Ok("True".to_owned()),
        Value::Bool(false) => Ok("False".to_owned()),
        other => type_error(format!("cannot convert {} to an answer string", other.type_name())),
    }
}

struct Interpreter<'s> {
    scene: &'s SceneGraph,
    steps: u64,
    budget: u64,
    env: BTreeMap<String, Value>,
}

impl<'s> Interpreter<'s> {
    fn tick(&mut self) -> R<()> {
        self.steps += 1;
        if self.steps > self.budget {
            return fail(
                FailureKind::StepLimit,
                format!("exceeded {} evaluation steps", self.budget),
            );
        }
        Ok(())
    }

    fn block(&mut self, stmts: &[Stmt]) -> R<()> {
        stmts.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, stmt: &Stmt) -> R<()> {
        self.tick()?;
        match stmt {
            Stmt::Assign { targets, value } => {
                let value = self.expr(value)?;
                for target in targets {
                    self.bind(target, value.clone())?;
                }
                Ok(())
            }
            Stmt::For {
                target,
                iter,
                body,
                orelse,
            } => {
                let items = match self.expr(iter)? {
                    Value::List(items) => items,
                    other => return type_error(format!("cannot iterate over {}", other.type_name())),
                };
                for item in items {
                    self.tick()?;
                    self.bind(target, item)?;
                    self.block(body)?;
                }
                self.block(orelse)
            }
            Stmt::While { test, body, orelse } => {
                while self.expr(test)?.truthy() {
                    self.block(body)?;
                }
                self.block(orelse)
            }
            Stmt::With { items, body } => {
                for item in items {
                    let value = self.expr(&item.context)?;
                    if let Some(bound) = &item.bound {
                        self.bind(bound, value)?;
                    }
                }
                self.block(body)
            }
            Stmt::Expr(e) => self.expr(e).map(drop),
        }
    }

    fn bind(&mut self, target: &AssignTarget, value: Value) -> R<()> {
        match target {
            AssignTarget::Name(id) => {
                self.env.insert(id.clone(), value);
                Ok(())
            }
            AssignTarget::Tuple(elements) => match value {
                Value::List(items) if items.len() == elements.len() => {
                    for (t, v) in elements.iter().zip(items) {
                        self.bind(t, v)?;
                    }
                    Ok(())
                }
                Value::List(items) => fail(
                    FailureKind::ArityError,
                    format!("cannot unpack {} values into {} names", items.len(), elements.len()),
                ),
                other => type_error(format!("cannot unpack {}", other.type_name())),
            },
        }
    }

    fn expr(&mut self, expr: &Expr) -> R<Value> {
        self.tick()?;
        match expr {
            Expr::Name(id) => match self.env.get(id) {
                Some(v) => Ok(v.clone()),
                None => fail(FailureKind::NameError, format!("name {id:?} is not defined")),
            },
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Int(i) => Ok(Value::Int(*i)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::List(items) => Ok(Value::List(
                items.iter().map(|e| self.expr(e)).collect::<R<_>>()?,
            )),
            Expr::Call { callee, args } => {
                let args = args.iter().map(|e| self.expr(e)).collect::<R<Vec<_>>>()?;
                self.call(callee, args)
            }
            Expr::MethodCall {
                receiver,
                method,
                args,
            } => {
                let receiver = self.expr(receiver)?;
                let args = args.iter().map(|e| self.expr(e)).collect::<R<Vec<_>>>()?;
                let patch = self.receiver_patch(receiver, method)?;
                self.method(patch, method, args)
            }
            Expr::Attribute { receiver, name } => {
                let receiver = self.expr(receiver)?;
                let patch = self.receiver_patch(receiver, name)?;
                match name.as_str() {
                    "left" => Ok(Value::Int(patch.region.left)),
                    "lower" => Ok(Value::Int(patch.region.lower)),
                    "right" => Ok(Value::Int(patch.region.right)),
                    "upper" => Ok(Value::Int(patch.region.upper)),
                    "cropped_image" => fail(
                        FailureKind::DomainError,
                        "pixel data is not available for symbolic scenes",
                    ),
                    other => type_error(format!("ImagePatch has no attribute {other:?}")),
                }
            }
            Expr::Index { receiver, index } => {
                let receiver = self.expr(receiver)?;
                let index = self.expr(index)?;
                index_value(receiver, index)
            }
            Expr::Compare { left, op, right } => {
                let l = self.expr(left)?;
                let r = self.expr(right)?;
                compare(&l, *op, &r).map(Value::Bool)
            }
            Expr::Arith { left, op, right } => {
                let l = self.expr(left)?;
                let r = self.expr(right)?;
                arith(l, *op, r)
            }
            Expr::BoolOp { op, operands } => {
                let mut last = Value::Bool(matches!(op, BoolOpKind::And));
                for operand in operands {
                    last = self.expr(operand)?;
                    let t = last.truthy();
                    if (*op == BoolOpKind::And && !t) || (*op == BoolOpKind::Or && t) {
                        break;
                    }
                }
                Ok(last)
            }
            Expr::Not(inner) => Ok(Value::Bool(!self.expr(inner)?.truthy())),
            Expr::Conditional {
                then,
                test,
                otherwise,
            } => {
                if self.expr(test)?.truthy() {
                    self.expr(then)
                } else {
                    self.expr(otherwise)
                }
            }
            Expr::ListComp {
                element,
                generators,
            }
            | Expr::GenExp {
                element,
                generators,
            } => {
                let saved = self.env.clone();
                let mut out = Vec::new();
                let result = self.comprehension(element, generators, &mut out);
                self.env = saved;
                result.map(|()| Value::List(out))
            }
        }
    }

    fn comprehension(&mut self, element: &Expr, generators: &[Comprehension], out: &mut Vec<Value>) -> R<()> {
        let Some((first, rest)) = generators.split_first() else {
            out.push(self.expr(element)?);
            return Ok(());
        };
        let items = match self.expr(&first.iter)? {
            Value::List(items) => items,
            other => return type_error(format!("cannot iterate over {}", other.type_name())),
        };
        'items: for item in items {
            self.tick()?;
            self.bind(&first.target, item)?;
            for condition in &first.conditions {
                if !self.expr(condition)?.truthy() {
                    continue 'items;
                }
            }
            self.comprehension(element, rest, out)?;
        }
        Ok(())
    }

    /// Methods called on a list act on its first element.
    fn receiver_patch(&self, receiver: Value, member: &str) -> R<PatchValue> {
        match receiver {
            Value::Patch(p) => Ok(p),
            Value::List(items) => match items.into_iter().next() {
                Some(Value::Patch(p)) => Ok(p),
                Some(other) => type_error(format!("{member}: list element is {}, not ImagePatch", other.type_name())),
                None => fail(FailureKind::DomainError, format!("{member} called on an empty list")),
            },
            other => type_error(format!("{} has no member {member:?}", other.type_name())),
        }
    }

    fn objects_in(&self, patch: &PatchValue) -> Vec<usize> {
        if patch.is_fallback {
            return Vec::new();
        }
        if let Some(i) = patch.bound_object {
            return alloc::vec![i];
        }
        let mut found: Vec<usize> = (0..self.scene.objects.len())
            .filter(|&i| patch.region.contains_center2(self.scene.objects[i].bbox.center2()))
            .collect();
        found.sort_by_key(|&i| self.order_key(i));
        found
    }

    fn order_key(&self, i: usize) -> (i64, i64, &str) {
        let o = &self.scene.objects[i];
        (o.bbox.left, o.bbox.lower, o.id.as_str())
    }

    fn find(&self, patch: &PatchValue, name: &str) -> Vec<Value> {
        let mut found: Vec<usize> = (0..self.scene.objects.len())
            .filter(|&i| {
                let o = &self.scene.objects[i];
                o.answers_to(name) && patch.region.contains_center2(o.bbox.center2())
            })
            .collect();
        if found.is_empty() {
            return alloc::vec![Value::Patch(PatchValue::fallback(self.scene))];
        }
        found.sort_by_key(|&i| self.order_key(i));
        found
            .into_iter()
            .map(|i| Value::Patch(PatchValue::of_object(i, &self.scene.objects[i])))
            .collect()
    }

    fn method(&mut self, patch: PatchValue, method: &str, args: Vec<Value>) -> R<Value> {
        match method {
            "find" => {
                let [name] = arity::<1>(method, args)?;
                let name = string_arg(method, name)?;
                Ok(Value::List(self.find(&patch, &name)))
            }
            "crop_position" => {
                let [direction, reference] = arity::<2>(method, args)?;
                let direction = string_arg(method, direction)?;
                let reference = self.representative(reference, method)?;
                self.crop(&direction, &reference).map(Value::Patch)
            }
            "verify_property" => {
                let [property] = arity::<1>(method, args)?;
                let property = string_arg(method, property)?;
                let held = self
                    .objects_in(&patch)
                    .into_iter()
                    .any(|i| self.scene.objects[i].has_attribute(&property));
                Ok(Value::Bool(held))
            }
            "classify" => {
                let [options] = arity::<1>(method, args)?;
                self.classify(&patch, options).map(Value::Str)
            }
            "simple_query" => {
                let [question] = arity::<1>(method, args)?;
                let question = string_arg(method, question)?;
                Ok(Value::Str(
                    self.scene.lookup_qa(&question).unwrap_or(UNKNOWN).to_owned(),
                ))
            }
            other => fail(FailureKind::NameError, format!("ImagePatch has no method {other:?}")),
        }
    }

    fn classify(&self, patch: &PatchValue, options: Value) -> R<String> {
        let objects = self.objects_in(patch);
        match options {
            Value::Str(category) => {
                if category.trim().eq_ignore_ascii_case("object") {
                    return fail(FailureKind::DomainError, "classify input must not be 'object'");
                }
                Ok(objects
                    .iter()
                    .find_map(|&i| self.scene.objects[i].attribute_in(&category))
                    .unwrap_or(UNKNOWN)
                    .to_owned())
            }
            Value::List(items) => {
                let options = items
                    .into_iter()
                    .map(|v| string_arg("classify", v))
                    .collect::<R<Vec<_>>>()?;
                Ok(options
                    .into_iter()
                    .find(|opt| objects.iter().any(|&i| self.scene.objects[i].has_attribute(opt)))
                    .unwrap_or_else(|| UNKNOWN.to_owned()))
            }
            other => type_error(format!("classify expects str or list, got {}", other.type_name())),
        }
    }

    fn crop(&self, direction: &str, reference: &PatchValue) -> R<PatchValue> {
        let d = normalize_answer(direction);
        if !DIRECTIONS.contains(&d.as_str()) {
            return fail(FailureKind::DomainError, format!("{direction:?} is not a valid direction"));
        }
        let full = self.scene.full_box();
        let r = reference.region;
        let region = match d.as_str() {
            "left" => BBox::new(0, 0, r.left, full.upper),
            "right" => BBox::new(r.right, 0, full.right, full.upper),
            "above" => BBox::new(0, r.upper, full.right, full.upper),
            "below" => BBox::new(0, 0, full.right, r.lower),
            _ => self.related_region(&d, reference).unwrap_or(full),
        };
        Ok(PatchValue {
            region,
            bound_object: None,
            is_fallback: false,
        })
    }

    /// Union of boxes of objects standing in relation `predicate` to the
    /// reference object.
    fn related_region(&self, predicate: &str, reference: &PatchValue) -> Option<BBox> {
        let target = &self.scene.objects[reference.bound_object?].id;
        let accepts = |p: &str| {
            let p = normalize_answer(p);
            p == predicate
                || p.strip_prefix(predicate)
                    .is_some_and(|rest| rest == " of" || rest == " to")
        };
        self.scene
            .relations
            .iter()
            .filter(|rel| rel.object == *target && accepts(&rel.predicate))
            .filter_map(|rel| self.scene.index_of(&rel.subject))
            .map(|i| self.scene.objects[i].bbox)
            .reduce(|a, b| a.union(&b))
    }

    /// First non-fallback patch of a list, else its first patch.
    fn representative(&self, value: Value, function: &str) -> R<PatchValue> {
        match value {
            Value::Patch(p) => Ok(p),
            Value::List(items) => {
                let mut patches = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Patch(p) => patches.push(p),
                        other => {
                            return type_error(format!(
                                "{function}: expected ImagePatch, got {}",
                                other.type_name()
                            ))
                        }
                    }
                }
                patches
                    .iter()
                    .find(|p| !p.is_fallback)
                    .or(patches.first())
                    .copied()
                    .map_or_else(
                        || fail(FailureKind::DomainError, format!("{function}: empty patch list")),
                        Ok,
                    )
            }
            other => type_error(format!("{function}: expected ImagePatch, got {}", other.type_name())),
        }
    }

    fn patches(&self, value: Value, function: &str) -> R<Vec<PatchValue>> {
        match value {
            Value::Patch(p) => Ok(alloc::vec![p]),
            Value::List(items) => items
                .into_iter()
                .map(|v| match v {
                    Value::Patch(p) => Ok(p),
                    other => type_error(format!("{function}: expected ImagePatch, got {}", other.type_name())),
                })
                .collect(),
            other => type_error(format!("{function}: expected patches, got {}", other.type_name())),
        }
    }

    fn relation_holds(&self, a: &PatchValue, b: &PatchValue, relation: &str) -> bool {
        let (ax, ay) = a.region.center2();
        let (bx, by) = b.region.center2();
        match normalize_answer(relation).as_str() {
            "left" => ax < bx,
            "right" => ax > bx,
            "above" => ay > by,
            "below" => ay < by,
            other => match (a.bound_object, b.bound_object) {
                (Some(i), Some(j)) => {
                    self.scene
                        .related(&self.scene.objects[i].id, other, &self.scene.objects[j].id)
                }
                _ => false,
            },
        }
    }

    fn call(&mut self, callee: &str, args: Vec<Value>) -> R<Value> {
        match callee {
            "ImagePatch" => match arity::<1>(callee, args)? {
                [Value::Image] => Ok(Value::Patch(PatchValue::whole(self.scene))),
                [other] => type_error(format!("ImagePatch expects the image, got {}", other.type_name())),
            },
            "bool_to_yesno" => match arity::<1>(callee, args)? {
                [Value::Bool(b)] => Ok(Value::Str(if b { "yes" } else { "no" }.to_owned())),
                [other] => type_error(format!("bool_to_yesno expects bool, got {}", other.type_name())),
            },
            "exists" => {
                let [patches] = arity::<1>(callee, args)?;
                let patches = self.patches(patches, callee)?;
                Ok(Value::Bool(patches.iter().any(|p| !p.is_fallback)))
            }
            "count" => {
                let [patches] = arity::<1>(callee, args)?;
                let patches = self.patches(patches, callee)?;
                Ok(Value::Int(patches.iter().filter(|p| !p.is_fallback).count() as i64))
            }
            "filter_img" => {
                let [patches, criteria] = arity::<2>(callee, args)?;
                let patches = self.patches(patches, callee)?;
                let criteria = string_arg(callee, criteria)?;
                let kept = patches
                    .into_iter()
                    .filter(|p| {
                        self.objects_in(p).into_iter().any(|i| {
                            let o = &self.scene.objects[i];
                            o.answers_to(&criteria) || o.has_attribute(&criteria)
                        })
                    })
                    .map(Value::Patch)
                    .collect();
                Ok(Value::List(kept))
            }
            "choose_relationship" => {
                let [a, b, options] = arity::<3>(callee, args)?;
                let options = match options {
                    Value::List(items) => items
                        .into_iter()
                        .map(|v| string_arg(callee, v))
                        .collect::<R<Vec<_>>>()?,
                    other => {
                        return type_error(format!(
                            "choose_relationship requires a list of options, got {}",
                            other.type_name()
                        ))
                    }
                };
                let a = self.representative(a, callee)?;
                let b = self.representative(b, callee)?;
                Ok(Value::Str(
                    options
                        .into_iter()
                        .find(|o| self.relation_holds(&a, &b, o))
                        .unwrap_or_else(|| UNKNOWN.to_owned()),
                ))
            }
            "verify_relationship" => {
                let [a, b, relation] = arity::<3>(callee, args)?;
                let relation = string_arg(callee, relation)?;
                let a = self.representative(a, callee)?;
                let b = self.representative(b, callee)?;
                let held = self.relation_holds(&a, &b, &relation);
                Ok(Value::Str(if held { "yes" } else { "no" }.to_owned()))
            }
            "len" => match arity::<1>(callee, args)? {
                [Value::List(items)] => Ok(Value::Int(items.len() as i64)),
                [Value::Str(s)] => Ok(Value::Int(s.chars().count() as i64)),
                [other] => type_error(format!("len() of {}", other.type_name())),
            },
            "str" => {
                let [value] = arity::<1>(callee, args)?;
                stringify(&value).map(Value::Str)
            }
            other => fail(FailureKind::NameError, format!("function {other:?} is not defined")),
        }
    }
}

fn arity<const N: usize>(function: &str, args: Vec<Value>) -> R<[Value; N]> {
    let got = args.len();
    args.try_into().or_else(|_| {
        fail(
            FailureKind::ArityError,
            format!("{function} takes {N} argument(s), got {got}"),
        )
    })
}

fn string_arg(function: &str, value: Value) -> R<String> {
    match value {
        Value::Str(s) => Ok(s),
        other => type_error(format!("{function} expects str, got {}", other.type_name())),
    }
}

fn index_value(receiver: Value, index: Value) -> R<Value> {
    let Value::Int(i) = index else {
        return type_error(format!("indices must be int, not {}", index.type_name()));
    };
    let items: Vec<Value> = match receiver {
        Value::List(items) => items,
        Value::Str(s) => s.chars().map(|c| Value::Str(c.to_string())).collect(),
        other => return type_error(format!("{} is not subscriptable", other.type_name())),
    };
    let len = items.len() as i64;
    let at = if i < 0 { i + len } else { i };
    if at < 0 || at >= len {
        return fail(FailureKind::DomainError, format!("index {i} out of range for length {len}"));
    }
    Ok(items.into_iter().nth(at as usize).expect("bounds checked"))
}

fn compare(l: &Value, op: CmpOp, r: &Value) -> R<bool> {
    match op {
        CmpOp::Eq => return Ok(l == r),
        CmpOp::NotEq => return Ok(l != r),
        _ => {}
    }
    let ord = match (l, r) {
        (Value::Int(a), Value::Int(b)) => a.cmp(b),
        (Value::Str(a), Value::Str(b)) => a.cmp(b),
        _ => {
            return type_error(format!(
                "cannot order {} and {}",
                l.type_name(),
                r.type_name()
            ))
        }
    };
    Ok(match op {
        CmpOp::Lt => ord.is_lt(),
        CmpOp::LtE => ord.is_le(),
        CmpOp::Gt => ord.is_gt(),
        CmpOp::GtE => ord.is_ge(),
        CmpOp::Eq | CmpOp::NotEq => unreachable!(),
    })
}

fn arith(l: Value, op: ArithOp, r: Value) -> R<Value> {
    let overflow = || Fail {
        kind: FailureKind::DomainError,
        message: "integer overflow".to_owned(),
    };
    match (l, op, r) {
        (Value::Int(a), ArithOp::Add, Value::Int(b)) => a.checked_add(b).map(Value::Int).ok_or_else(overflow),
        (Value::Int(a), ArithOp::Sub, Value::Int(b)) => a.checked_sub(b).map(Value::Int).ok_or_else(overflow),
        (Value::Str(a), ArithOp::Add, Value::Str(b)) => Ok(Value::Str(a + &b)),
        (Value::List(mut a), ArithOp::Add, Value::List(b)) => {
            a.extend(b);
            Ok(Value::List(a))
        }
        (l, op, r) => type_error(format!(
            "unsupported operand types for {}: {} and {}",
            op.symbol(),
            l.type_name(),
            r.type_name()
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SceneObject;

    fn chairs() -> SceneGraph {
        SceneGraph::new("chairs", 100, 100)
            .with_object(SceneObject::new("chair#1", "chair", BBox::new(10, 10, 20, 20)).with_attribute("red", "color"))
            .with_object(SceneObject::new("chair#2", "chair", BBox::new(60, 10, 70, 20)).with_attribute("blue", "color"))
            .with_object(
                SceneObject::new("table#1", "table", BBox::new(30, 40, 50, 60))
                    .with_attribute("wood", "material")
                    .with_attribute("brown", "color"),
            )
            .with_relation("chair#1", "next to", "table#1")
            .with_qa("Who is riding?", "nobody")
    }

    fn answer(src: &str, scene: &SceneGraph) -> ExecOutcome {
        run_source(src, scene, Limits::default())
    }

    fn text(src: &str, scene: &SceneGraph) -> String {
        match answer(src, scene) {
            ExecOutcome::Answer { text } => text,
            ExecOutcome::Failure(f) => panic!("{src}: {f:?}"),
        }
    }

    fn kind(src: &str, scene: &SceneGraph) -> FailureKind {
        answer(src, scene).failure().expect("expected a failure").kind
    }

    #[test]
    fn counting_chairs() {
        let src = "image_patch=ImagePatch(image)\nvar1=image_patch.find('chair')\nanswer=str(len(var1))";
        assert_eq!(text(src, &chairs()), "2");
    }

    #[test]
    fn yes_no_conversion() {
        assert_eq!(text("answer=bool_to_yesno(True)", &chairs()), "yes");
        assert_eq!(text("answer=bool_to_yesno(False)", &chairs()), "no");
        assert_eq!(kind("answer=bool_to_yesno('x')", &chairs()), FailureKind::TypeError);
    }

    #[test]
    fn answer_stringification() {
        assert_eq!(text("answer=True", &chairs()), "True");
        assert_eq!(text("answer=3", &chairs()), "3");
        assert_eq!(kind("answer=[1]", &chairs()), FailureKind::TypeError);
        assert_eq!(kind("x=1", &chairs()), FailureKind::NoAnswer);
    }

    #[test]
    fn find_falls_back_to_whole_image() {
        let s = chairs();
        assert_eq!(text("z=image_patch.find('zebra')\nanswer=str(len(z))", &s), "1");
        assert_eq!(text("z=image_patch.find('zebra')\nanswer=bool_to_yesno(exists(z))", &s), "no");
        assert_eq!(text("z=image_patch.find('')\nanswer=str(count(z))", &s), "0");
        assert_eq!(kind("z=image_patch.find(3)", &s), FailureKind::TypeError);
    }

    #[test]
    fn nested_find_is_restricted_to_region() {
        let s = chairs();
        let src = "t=image_patch.find('table')\nleft=image_patch.crop_position('left', t)\nc=left.find('chair')\nanswer=c[0].classify('color') + str(len(c))";
        assert_eq!(text(src, &s), "red1");
    }

    #[test]
    fn crop_rejects_unknown_directions() {
        let src = "p=image_patch.crop_position('running left', image_patch)\nanswer='x'";
        assert_eq!(kind(src, &chairs()), FailureKind::DomainError);
    }

    #[test]
    fn relation_backed_crop() {
        let src = "t=image_patch.find('table')\nn=image_patch.crop_position('next to', t)\nanswer=n.find('chair')[0].classify('color')";
        assert_eq!(text(src, &chairs()), "red");
    }

    #[test]
    fn classify_rules() {
        let s = chairs();
        assert_eq!(text("t=image_patch.find('table')\nanswer=t[0].classify('material')", &s), "wood");
        assert_eq!(text("t=image_patch.find('table')\nanswer=t[0].classify('shape')", &s), "unknown");
        assert_eq!(text("t=image_patch.find('table')\nanswer=t.classify(['red', 'brown'])", &s), "brown");
        assert_eq!(kind("answer=image_patch.classify('object')", &s), FailureKind::DomainError);
    }

    #[test]
    fn simple_query_uses_scene_answers() {
        let s = chairs();
        assert_eq!(text("answer=image_patch.simple_query('who is riding')", &s), "nobody");
        assert_eq!(text("answer=image_patch.simple_query('why')", &s), "unknown");
    }

    #[test]
    fn choose_relationship_requires_a_list() {
        let s = chairs();
        let ok = "a=image_patch.find('chair')\nb=image_patch.find('table')\nanswer=choose_relationship(a, b, ['left', 'right'])";
        assert_eq!(text(ok, &s), "left");
        let bad = "a=image_patch.find('chair')\nb=image_patch.find('table')\nanswer=choose_relationship(a, b, 'left or right')";
        let f = answer(bad, &s).failure().cloned().unwrap();
        assert_eq!(f.kind, FailureKind::TypeError);
        assert_eq!(f.statement, 2);
        let rel = "a=image_patch.find('chair')\nb=image_patch.find('table')\nanswer=verify_relationship(a, b, 'next to')";
        assert_eq!(text(rel, &s), "yes");
    }

    #[test]
    fn filter_and_comprehension() {
        let s = chairs();
        let src = "c=image_patch.find('chair')\nred=filter_img(c, 'red')\nblue=[p for p in c if p.verify_property('blue')]\nanswer=str(len(red)) + str(len(blue))";
        assert_eq!(text(src, &s), "11");
    }

    #[test]
    fn loops_and_arithmetic() {
        let s = chairs();
        let src = "n=0\nfor p in image_patch.find('chair'):\n    n=n + p.right - p.left\nanswer=str(n)";
        assert_eq!(text(src, &s), "20");
        assert_eq!(kind("while True:\n    x=1", &s), FailureKind::StepLimit);
    }

    #[test]
    fn unknown_names() {
        let s = chairs();
        assert_eq!(kind("answer=foo(1)", &s), FailureKind::NameError);
        assert_eq!(kind("answer=missing", &s), FailureKind::NameError);
        assert_eq!(kind("answer=image_patch.zoom()", &s), FailureKind::NameError);
        assert_eq!(kind("answer=len(1, 2)", &s), FailureKind::ArityError);
        assert_eq!(kind("answer = (", &s), FailureKind::SyntaxError);
    }

    #[test]
    fn empty_list_receiver_is_a_domain_error() {
        let s = chairs();
        let src = "c=filter_img(image_patch.find('chair'), 'green')\nanswer=c.classify('color')";
        assert_eq!(kind(src, &s), FailureKind::DomainError);
    }

    #[test]
    fn runs_are_deterministic() {
        let s = chairs();
        let src = "c=image_patch.find('chair')\nanswer=choose_relationship(c[1], c[0], ['left', 'right'])";
        assert_eq!(answer(src, &s), answer(src, &s));
        assert_eq!(text(src, &s), "right");
    }
}
