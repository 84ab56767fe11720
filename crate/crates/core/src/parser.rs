//! Recursive-descent parser for the program mini-language.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ast::{
    ArithOp, AssignTarget, BoolOpKind, CmpOp, Comprehension, Expr, Program, Stmt, WithItem,
};
use crate::error::SyntaxError;
use crate::lexer::{tokenize, Tok, Token};

const KEYWORDS: &[&str] = &[
    "for", "in", "while", "with", "as", "else", "if", "and", "or", "not", "True", "False", "None",
    "def", "class", "import", "from", "try", "except", "finally", "return", "elif", "lambda",
    "global", "nonlocal", "del", "pass", "break", "continue", "raise", "assert", "yield", "async",
    "await", "is",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

/// Parses program text into a [`Program`].
pub fn parse(source: &str) -> Result<Program, SyntaxError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut statements = Vec::new();
    while !parser.at(&Tok::Eof) {
        statements.push(parser.statement()?);
    }
    Ok(Program { statements })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_tok(&self) -> &Tok {
        &self.peek().tok
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek_tok() == tok
    }

    fn at_op(&self, op: &str) -> bool {
        matches!(self.peek_tok(), Tok::Op(o) if *o == op)
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek_tok(), Tok::Name(n) if n == kw)
    }

    fn advance(&mut self) -> Token {
        let tok = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: impl Into<String>) -> SyntaxError {
        let tok = self.peek();
        let expected = expected.into();
        SyntaxError::new(
            tok.line,
            tok.column,
            format!("{expected}, found {}", tok.tok.describe()),
        )
    }

    fn expect_op(&mut self, op: &str) -> Result<(), SyntaxError> {
        if self.at_op(op) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("'{op}'")))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.at_keyword(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("'{kw}'")))
        }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn identifier(&mut self) -> Result<String, SyntaxError> {
        match self.peek_tok() {
            Tok::Name(n) if !is_keyword(n) => {
                let n = n.clone();
                self.advance();
                Ok(n)
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn statement(&mut self) -> Result<Stmt, SyntaxError> {
        if let Tok::Name(word) = self.peek_tok() {
            match word.as_str() {
                "for" => return self.for_stmt(),
                "while" => return self.while_stmt(),
                "with" => return self.with_stmt(),
                "not" | "True" | "False" => {}
                w if is_keyword(w) => {
                    return Err(self.error(format!(
                        "a statement (the '{w}' construct is not part of the language)"
                    )))
                }
                _ => {}
            }
        }
        if matches!(self.peek_tok(), Tok::Indent) {
            return Err(self.error("a statement at the enclosing indentation"));
        }
        let stmt = self.simple_statement()?;
        self.end_of_line()?;
        Ok(stmt)
    }

    fn end_of_line(&mut self) -> Result<(), SyntaxError> {
        match self.peek_tok() {
            Tok::Newline => {
                self.advance();
                Ok(())
            }
            Tok::Eof => Ok(()),
            _ => Err(self.error("end of line")),
        }
    }

    fn simple_statement(&mut self) -> Result<Stmt, SyntaxError> {
        let mut targets = Vec::new();
        loop {
            let save = self.pos;
            match self.target_list() {
                Ok(target) if self.at_op("=") => {
                    self.advance();
                    targets.push(target);
                }
                _ => {
                    self.pos = save;
                    break;
                }
            }
        }
        let value = self.expr()?;
        if self.at_op("=") {
            return Err(self.error("end of statement (invalid assignment target)"));
        }
        if targets.is_empty() {
            Ok(Stmt::Expr(value))
        } else {
            Ok(Stmt::Assign { targets, value })
        }
    }

    fn suite(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect_op(":")?;
        if matches!(self.peek_tok(), Tok::Newline) {
            self.advance();
            if !matches!(self.peek_tok(), Tok::Indent) {
                return Err(self.error("an indented block"));
            }
            self.advance();
            let mut body = Vec::new();
            while !matches!(self.peek_tok(), Tok::Dedent | Tok::Eof) {
                body.push(self.statement()?);
            }
            if matches!(self.peek_tok(), Tok::Dedent) {
                self.advance();
            }
            Ok(body)
        } else {
            let stmt = self.simple_statement()?;
            self.end_of_line()?;
            Ok(alloc::vec![stmt])
        }
    }

    fn else_suite(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        if self.eat_keyword("else") {
            self.suite()
        } else {
            Ok(Vec::new())
        }
    }

    fn for_stmt(&mut self) -> Result<Stmt, SyntaxError> {
        self.expect_keyword("for")?;
        let target = self.target_list()?;
        self.expect_keyword("in")?;
        let iter = self.expr()?;
        let body = self.suite()?;
        let orelse = self.else_suite()?;
        Ok(Stmt::For {
            target,
            iter,
            body,
            orelse,
        })
    }

    fn while_stmt(&mut self) -> Result<Stmt, SyntaxError> {
        self.expect_keyword("while")?;
        let test = self.expr()?;
        let body = self.suite()?;
        let orelse = self.else_suite()?;
        Ok(Stmt::While { test, body, orelse })
    }

    fn with_stmt(&mut self) -> Result<Stmt, SyntaxError> {
        self.expect_keyword("with")?;
        let mut items = Vec::new();
        loop {
            let context = self.expr()?;
            let bound = if self.eat_keyword("as") {
                Some(self.target()?)
            } else {
                None
            };
            items.push(WithItem { context, bound });
            if !self.eat_op(",") {
                break;
            }
        }
        let body = self.suite()?;
        Ok(Stmt::With { items, body })
    }

    fn target_list(&mut self) -> Result<AssignTarget, SyntaxError> {
        let first = self.target()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut elements = alloc::vec![first];
        while self.eat_op(",") {
            elements.push(self.target()?);
        }
        Ok(AssignTarget::Tuple(elements))
    }

    fn target(&mut self) -> Result<AssignTarget, SyntaxError> {
        if self.eat_op("(") {
            let inner = self.target_list()?;
            self.expect_op(")")?;
            return Ok(inner);
        }
        Ok(AssignTarget::Name(self.identifier()?))
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let then = self.or_expr()?;
        if self.eat_keyword("if") {
            let test = self.or_expr()?;
            self.expect_keyword("else")?;
            let otherwise = self.expr()?;
            return Ok(Expr::Conditional {
                then: Box::new(then),
                test: Box::new(test),
                otherwise: Box::new(otherwise),
            });
        }
        Ok(then)
    }

    fn or_expr(&mut self) -> Result<Expr, SyntaxError> {
        self.bool_chain(BoolOpKind::Or)
    }

    fn bool_chain(&mut self, op: BoolOpKind) -> Result<Expr, SyntaxError> {
        let operand = |p: &mut Self| match op {
            BoolOpKind::Or => p.bool_chain(BoolOpKind::And),
            BoolOpKind::And => p.not_expr(),
        };
        let first = operand(self)?;
        if !self.at_keyword(op.keyword()) {
            return Ok(first);
        }
        let mut operands = alloc::vec![first];
        while self.eat_keyword(op.keyword()) {
            operands.push(operand(self)?);
        }
        Ok(Expr::BoolOp { op, operands })
    }

    fn not_expr(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_keyword("not") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        match self.peek_tok() {
            Tok::Op("==") => Some(CmpOp::Eq),
            Tok::Op("!=") => Some(CmpOp::NotEq),
            Tok::Op("<") => Some(CmpOp::Lt),
            Tok::Op("<=") => Some(CmpOp::LtE),
            Tok::Op(">") => Some(CmpOp::Gt),
            Tok::Op(">=") => Some(CmpOp::GtE),
            _ => None,
        }
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let left = self.arith()?;
        let Some(op) = self.cmp_op() else {
            return Ok(left);
        };
        self.advance();
        let right = self.arith()?;
        if self.cmp_op().is_some() {
            return Err(self.error("end of comparison (chained comparisons are not supported)"));
        }
        Ok(Expr::compare(left, op, right))
    }

    fn arith(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.unary()?;
        loop {
            let op = if self.at_op("+") {
                ArithOp::Add
            } else if self.at_op("-") {
                ArithOp::Sub
            } else {
                return Ok(left);
            };
            self.advance();
            let right = self.unary()?;
            left = Expr::arith(left, op, right);
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.at_op("-") {
            self.advance();
            let Tok::Int(digits) = self.peek_tok().clone() else {
                return Err(self.error("integer literal after '-'"));
            };
            let value = format!("-{digits}")
                .parse::<i64>()
                .map_err(|_| self.error("integer literal in 64-bit range"))?;
            self.advance();
            return self.postfix(Expr::Int(value));
        }
        let atom = self.atom()?;
        self.postfix(atom)
    }

    fn postfix(&mut self, mut expr: Expr) -> Result<Expr, SyntaxError> {
        loop {
            if self.eat_op(".") {
                let name = self.identifier()?;
                if self.at_op("(") {
                    let args = self.call_args()?;
                    expr = Expr::MethodCall {
                        receiver: Box::new(expr),
                        method: name,
                        args,
                    };
                } else {
                    expr = Expr::Attribute {
                        receiver: Box::new(expr),
                        name,
                    };
                }
            } else if self.at_op("[") {
                self.advance();
                let index = self.expr()?;
                self.expect_op("]")?;
                expr = Expr::Index {
                    receiver: Box::new(expr),
                    index: Box::new(index),
                };
            } else if self.at_op("(") {
                let Expr::Name(callee) = expr else {
                    return Err(self.error("end of expression (only names and methods can be called)"));
                };
                let args = self.call_args()?;
                expr = Expr::Call { callee, args };
            } else {
                return Ok(expr);
            }
        }
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, SyntaxError> {
        self.expect_op("(")?;
        let mut args = Vec::new();
        if self.eat_op(")") {
            return Ok(args);
        }
        let first = self.expr()?;
        if self.at_keyword("for") {
            let generators = self.comprehension_clauses()?;
            self.expect_op(")")?;
            return Ok(alloc::vec![Expr::GenExp {
                element: Box::new(first),
                generators,
            }]);
        }
        args.push(first);
        while self.eat_op(",") {
            if self.at_op(")") {
                break;
            }
            args.push(self.expr()?);
        }
        self.expect_op(")")?;
        Ok(args)
    }

    fn comprehension_clauses(&mut self) -> Result<Vec<Comprehension>, SyntaxError> {
        let mut generators = Vec::new();
        while self.eat_keyword("for") {
            let target = self.target_list()?;
            self.expect_keyword("in")?;
            let iter = self.or_expr()?;
            let mut conditions = Vec::new();
            while self.eat_keyword("if") {
                conditions.push(self.or_expr()?);
            }
            generators.push(Comprehension {
                target,
                iter,
                conditions,
            });
        }
        Ok(generators)
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let token = self.peek().clone();
        match token.tok {
            Tok::Name(ref n) if n == "True" => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            Tok::Name(ref n) if n == "False" => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            Tok::Name(ref n) if is_keyword(n) => Err(self.error("expression")),
            Tok::Name(n) => {
                self.advance();
                Ok(Expr::Name(n))
            }
            Tok::Int(digits) => {
                let value = digits
                    .parse::<i64>()
                    .map_err(|_| self.error("integer literal in 64-bit range"))?;
                self.advance();
                Ok(Expr::Int(value))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Str(s))
            }
            Tok::Op("[") => {
                self.advance();
                if self.eat_op("]") {
                    return Ok(Expr::List(Vec::new()));
                }
                let first = self.expr()?;
                if self.at_keyword("for") {
                    let generators = self.comprehension_clauses()?;
                    self.expect_op("]")?;
                    return Ok(Expr::ListComp {
                        element: Box::new(first),
                        generators,
                    });
                }
                let mut elements = alloc::vec![first];
                while self.eat_op(",") {
                    if self.at_op("]") {
                        break;
                    }
                    elements.push(self.expr()?);
                }
                self.expect_op("]")?;
                Ok(Expr::List(elements))
            }
            Tok::Op("(") => {
                self.advance();
                let inner = self.expr()?;
                if self.at_keyword("for") {
                    let generators = self.comprehension_clauses()?;
                    self.expect_op(")")?;
                    return Ok(Expr::GenExp {
                        element: Box::new(inner),
                        generators,
                    });
                }
                if self.at_op(",") {
                    return Err(self.error("')' (tuple expressions are not supported)"));
                }
                self.expect_op(")")?;
                Ok(inner)
            }
            _ => Err(self.error("expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn empty_source_is_empty_program() {
        assert_eq!(parse("").unwrap(), Program::default());
        assert_eq!(parse("\n\n   \n# note\n").unwrap(), Program::default());
    }

    #[test]
    fn dog_program_has_three_assignments() {
        let p = parse("image_patch = ImagePatch(image)\ndog = image_patch.find('dog')\nanswer = dog.classify('color')")
            .unwrap();
        assert_eq!(
            p.statements,
            vec![
                Stmt::assign("image_patch", Expr::call("ImagePatch", vec![Expr::name("image")])),
                Stmt::assign(
                    "dog",
                    Expr::method(Expr::name("image_patch"), "find", vec![Expr::str("dog")])
                ),
                Stmt::assign(
                    "answer",
                    Expr::method(Expr::name("dog"), "classify", vec![Expr::str("color")])
                ),
            ]
        );
    }

    #[test]
    fn rejects_function_definitions_and_imports() {
        for src in ["def f():\n    x = 1", "import os", "if x:\n    y = 1", "return x"] {
            let err = parse(src).unwrap_err();
            assert_eq!(err.line, 1, "{src}");
            assert!(err.expected.contains("not part of the language"), "{err}");
        }
    }

    #[test]
    fn rejects_tabs_and_fstrings() {
        assert!(parse("for x in y:\n\tz = x").is_err());
        let err = parse("x = f'{y}'").unwrap_err();
        assert_eq!((err.line, err.column), (1, 5));
    }

    #[test]
    fn reports_position_of_unexpected_token() {
        let err = parse("a = 1\nb = (2 + )").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.column, 10);
        assert!(err.expected.starts_with("expression"));
    }

    #[test]
    fn chained_comparison_is_rejected() {
        assert!(parse("x = a < b < c").is_err());
    }

    #[test]
    fn single_line_suite() {
        let p = parse("for patch in patches: total = total + 1").unwrap();
        let Stmt::For { body, .. } = &p.statements[0] else {
            panic!()
        };
        assert_eq!(body.len(), 1);
    }

    #[test]
    fn bracket_continuation_spans_lines() {
        let p = parse("x = choose_relationship(a,\n    b,\n    ['left', 'right'])\ny = x").unwrap();
        assert_eq!(p.statements.len(), 2);
    }

    #[test]
    fn negative_literals_and_subtraction() {
        let p = parse("x = a - -5").unwrap();
        assert_eq!(
            p.statements[0],
            Stmt::assign(
                "x",
                Expr::arith(Expr::name("a"), ArithOp::Sub, Expr::Int(-5))
            )
        );
        assert!(parse("x = -y").is_err());
        assert_eq!(
            parse("x = -9223372036854775808").unwrap().statements[0],
            Stmt::assign("x", Expr::Int(i64::MIN))
        );
    }

    #[test]
    fn generator_argument_without_parentheses() {
        let p = parse("x = exists(p for p in ps if p)").unwrap();
        let Stmt::Assign { value: Expr::Call { args, .. }, .. } = &p.statements[0] else {
            panic!()
        };
        assert!(matches!(args[0], Expr::GenExp { .. }));
    }

    #[test]
    fn tuple_targets() {
        let p = parse("a, (b, c) = x").unwrap();
        assert_eq!(
            p.statements[0],
            Stmt::Assign {
                targets: vec![AssignTarget::Tuple(vec![
                    AssignTarget::name("a"),
                    AssignTarget::Tuple(vec![AssignTarget::name("b"), AssignTarget::name("c")]),
                ])],
                value: Expr::name("x"),
            }
        );
        assert!(parse("(a,) = x").is_err());
    }

    #[test]
    fn unterminated_block_and_bad_dedent() {
        assert!(parse("for x in y:\n").is_err());
        assert!(parse("for x in y:\n        a = 1\n    b = 2").is_err());
    }

    #[test]
    fn error_messages_mention_keywords_as_strings() {
        let err = parse("x = (a for b)").unwrap_err();
        assert!(err.expected.contains("'in'"));
    }
}
