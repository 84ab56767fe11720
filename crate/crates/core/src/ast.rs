//! Syntax tree for the visual-program mini-language.
//!
//! The language is a strict subset of Python: assignments, `for`, `while`,
//! `with`, expression statements, and the expression forms that appear in
//! vision-API programs (calls, method calls, comparisons, comprehensions).

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

/// A parsed program: an ordered list of top-level statements.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub statements: Vec<Stmt>,
}

impl Program {
    pub fn new(statements: Vec<Stmt>) -> Self {
        Program { statements }
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    /// `a = b = value`; always at least one target.
    Assign { targets: Vec<AssignTarget>, value: Expr },
    For {
        target: AssignTarget,
        iter: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    While {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    With { items: Vec<WithItem>, body: Vec<Stmt> },
    Expr(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WithItem {
    pub context: Expr,
    pub bound: Option<AssignTarget>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AssignTarget {
    Name(String),
    /// Destructuring target; never fewer than two elements.
    Tuple(Vec<AssignTarget>),
}

impl AssignTarget {
    pub fn name(id: impl Into<String>) -> Self {
        AssignTarget::Name(id.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::LtE => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtE => ">=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoolOpKind {
    And,
    Or,
}

impl BoolOpKind {
    pub fn keyword(self) -> &'static str {
        match self {
            BoolOpKind::And => "and",
            BoolOpKind::Or => "or",
        }
    }
}

/// One `for target in iter if cond...` clause of a comprehension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comprehension {
    pub target: AssignTarget,
    pub iter: Expr,
    pub conditions: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Name(String),
    Str(String),
    Int(i64),
    Bool(bool),
    List(Vec<Expr>),
    Call {
        callee: String,
        args: Vec<Expr>,
    },
    MethodCall {
        receiver: Box<Expr>,
        method: String,
        args: Vec<Expr>,
    },
    Attribute {
        receiver: Box<Expr>,
        name: String,
    },
    Index {
        receiver: Box<Expr>,
        index: Box<Expr>,
    },
    Compare {
        left: Box<Expr>,
        op: CmpOp,
        right: Box<Expr>,
    },
    Arith {
        left: Box<Expr>,
        op: ArithOp,
        right: Box<Expr>,
    },
    /// Two or more operands joined by the same boolean operator.
    BoolOp {
        op: BoolOpKind,
        operands: Vec<Expr>,
    },
    Not(Box<Expr>),
    Conditional {
        then: Box<Expr>,
        test: Box<Expr>,
        otherwise: Box<Expr>,
    },
    ListComp {
        element: Box<Expr>,
        generators: Vec<Comprehension>,
    },
    GenExp {
        element: Box<Expr>,
        generators: Vec<Comprehension>,
    },
}

impl Expr {
    pub fn name(id: impl Into<String>) -> Self {
        Expr::Name(id.into())
    }

    pub fn str(value: impl Into<String>) -> Self {
        Expr::Str(value.into())
    }

    pub fn call(callee: impl Into<String>, args: Vec<Expr>) -> Self {
        Expr::Call {
            callee: callee.into(),
            args,
        }
    }

    pub fn method(receiver: Expr, method: impl Into<String>, args: Vec<Expr>) -> Self {
        Expr::MethodCall {
            receiver: Box::new(receiver),
            method: method.into(),
            args,
        }
    }

    pub fn compare(left: Expr, op: CmpOp, right: Expr) -> Self {
        Expr::Compare {
            left: Box::new(left),
            op,
            right: Box::new(right),
        }
    }

    pub fn arith(left: Expr, op: ArithOp, right: Expr) -> Self {
        Expr::Arith {
            left: Box::new(left),
            op,
            right: Box::new(right),
        }
    }
}

impl Stmt {
    /// Single-name assignment `id = value`.
    pub fn assign(id: impl Into<String>, value: Expr) -> Self {
        Stmt::Assign {
            targets: alloc::vec![AssignTarget::Name(id.into())],
            value,
        }
    }
}
