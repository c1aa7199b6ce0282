//! Recursive-descent parser producing the MiniLang [`Program`] tree.
//!
//! Errors carry line and column of the offending token. The same grammar
//! backs both static scoring and interpretation, so accept/reject decisions
//! are identical on both paths.

use super::ast::*;
use super::lexer::{tokenize, Kw, Tok, Token};
use crate::error::ZfuzzError;

pub fn parse(source: &str) -> Result<Program, ZfuzzError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        depth: 0,
    };
    let stmts = p.block_until_eof()?;
    Ok(Program { stmts })
}

/// Model output is untrusted; expressions nested beyond this are rejected
/// instead of exhausting the native stack.
const MAX_EXPR_DEPTH: usize = 100;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn check(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.check(tok) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ZfuzzError> {
        if self.check(&tok) {
            Ok(self.advance())
        } else {
            Err(self.err_here(&format!("expected {what}")))
        }
    }

    fn err_here(&self, message: &str) -> ZfuzzError {
        let t = self.peek();
        ZfuzzError::Parse {
            line: t.line,
            column: t.col,
            message: format!("{message}, found {}", describe(&t.tok)),
        }
    }

    fn block_until_eof(&mut self) -> Result<Vec<Stmt>, ZfuzzError> {
        let mut stmts = Vec::new();
        while !self.check(&Tok::Eof) {
            stmts.push(self.statement()?);
        }
        Ok(stmts)
    }

    /// An indented block: NEWLINE INDENT statement+ DEDENT.
    fn block(&mut self) -> Result<Vec<Stmt>, ZfuzzError> {
        self.expect(Tok::Op(":"), "':'")?;
        self.expect(Tok::Newline, "end of line after ':'")?;
        self.expect(Tok::Indent, "an indented block")?;
        self.depth += 1;
        if self.depth > MAX_EXPR_DEPTH {
            self.depth -= 1;
            return Err(self.err_here("block nesting too deep"));
        }
        let mut stmts = Vec::new();
        let mut failed = None;
        while !self.check(&Tok::Dedent) && !self.check(&Tok::Eof) {
            match self.statement() {
                Ok(s) => stmts.push(s),
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        self.depth -= 1;
        if let Some(e) = failed {
            return Err(e);
        }
        self.expect(Tok::Dedent, "dedent to close block")?;
        if stmts.is_empty() {
            return Err(self.err_here("empty block"));
        }
        Ok(stmts)
    }

    fn statement(&mut self) -> Result<Stmt, ZfuzzError> {
        let line = self.peek().line;
        match self.peek().tok.clone() {
            Tok::Keyword(Kw::If) => self.if_stmt(),
            Tok::Keyword(Kw::While) => {
                self.advance();
                let cond = self.expression()?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body })
            }
            Tok::Keyword(Kw::For) => self.for_stmt(),
            Tok::Keyword(Kw::Def) => self.def_stmt(),
            Tok::Keyword(Kw::Return) => {
                self.advance();
                let value = if self.check(&Tok::Newline) {
                    None
                } else {
                    Some(self.expression()?)
                };
                self.expect(Tok::Newline, "end of line")?;
                Ok(Stmt::Return { value, line })
            }
            Tok::Keyword(Kw::Break) => {
                self.advance();
                self.expect(Tok::Newline, "end of line")?;
                Ok(Stmt::Break(line))
            }
            Tok::Keyword(Kw::Continue) => {
                self.advance();
                self.expect(Tok::Newline, "end of line")?;
                Ok(Stmt::Continue(line))
            }
            Tok::Keyword(Kw::Pass) => {
                self.advance();
                self.expect(Tok::Newline, "end of line")?;
                Ok(Stmt::Pass)
            }
            Tok::Keyword(Kw::Print) => {
                self.advance();
                self.expect(Tok::Op("("), "'(' after print")?;
                let args = self.call_args()?;
                self.expect(Tok::Newline, "end of line")?;
                Ok(Stmt::Print { args, line })
            }
            Tok::Keyword(Kw::From) => {
                self.advance();
                let module = self.name("module name after 'from'")?;
                self.expect(Tok::Keyword(Kw::Import), "'import'")?;
                let item = self.name("imported name")?;
                self.expect(Tok::Newline, "end of line")?;
                Ok(Stmt::ImportShim { module, item })
            }
            Tok::Name(name) => {
                // Lookahead distinguishes assignment targets from bare calls.
                let save = self.pos;
                self.advance();
                if self.eat(&Tok::Op("=")) {
                    let value = self.expression()?;
                    self.expect(Tok::Newline, "end of line")?;
                    return Ok(Stmt::Assign {
                        target: Target::Name(name),
                        value,
                        line,
                    });
                }
                if self.check(&Tok::Op("[")) {
                    // Could be `name[i] = v` or an expression like `name[i] + 1`.
                    self.advance();
                    let index = self.expression()?;
                    self.expect(Tok::Op("]"), "']'")?;
                    if self.eat(&Tok::Op("=")) {
                        let value = self.expression()?;
                        self.expect(Tok::Newline, "end of line")?;
                        return Ok(Stmt::Assign {
                            target: Target::Index(name, index),
                            value,
                            line,
                        });
                    }
                }
                self.pos = save;
                let expr = self.expression()?;
                self.expect(Tok::Newline, "end of line")?;
                Ok(Stmt::Expr(expr))
            }
            _ => {
                let expr = self.expression()?;
                self.expect(Tok::Newline, "end of line")?;
                Ok(Stmt::Expr(expr))
            }
        }
    }

    fn if_stmt(&mut self) -> Result<Stmt, ZfuzzError> {
        self.expect(Tok::Keyword(Kw::If), "'if'")?;
        let mut arms = Vec::new();
        let cond = self.expression()?;
        let body = self.block()?;
        arms.push((cond, body));
        let mut else_body = None;
        loop {
            if self.eat(&Tok::Keyword(Kw::Elif)) {
                let cond = self.expression()?;
                let body = self.block()?;
                arms.push((cond, body));
            } else if self.eat(&Tok::Keyword(Kw::Else)) {
                else_body = Some(self.block()?);
                break;
            } else {
                break;
            }
        }
        Ok(Stmt::If { arms, else_body })
    }

    fn for_stmt(&mut self) -> Result<Stmt, ZfuzzError> {
        let line = self.peek().line;
        self.expect(Tok::Keyword(Kw::For), "'for'")?;
        let var = self.name("loop variable")?;
        self.expect(Tok::Keyword(Kw::In), "'in'")?;
        self.expect(Tok::Keyword(Kw::Range), "'range'")?;
        self.expect(Tok::Op("("), "'(' after range")?;
        let args = self.call_args()?;
        if args.is_empty() || args.len() > 3 {
            return Err(self.err_here("range takes one to three arguments"));
        }
        let body = self.block()?;
        Ok(Stmt::ForRange {
            var,
            args,
            body,
            line,
        })
    }

    fn def_stmt(&mut self) -> Result<Stmt, ZfuzzError> {
        self.expect(Tok::Keyword(Kw::Def), "'def'")?;
        let name = self.name("function name")?;
        self.expect(Tok::Op("("), "'('")?;
        let mut params = Vec::new();
        if !self.check(&Tok::Op(")")) {
            loop {
                params.push(self.name("parameter name")?);
                if !self.eat(&Tok::Op(",")) {
                    break;
                }
            }
        }
        self.expect(Tok::Op(")"), "')'")?;
        let body = self.block()?;
        Ok(Stmt::FuncDef { name, params, body })
    }

    fn name(&mut self, what: &str) -> Result<String, ZfuzzError> {
        match self.peek().tok.clone() {
            Tok::Name(n) => {
                self.advance();
                Ok(n)
            }
            _ => Err(self.err_here(what)),
        }
    }

    /// Comma-separated expressions up to a closing `)`.
    fn call_args(&mut self) -> Result<Vec<Expr>, ZfuzzError> {
        let mut args = Vec::new();
        if self.eat(&Tok::Op(")")) {
            return Ok(args);
        }
        loop {
            args.push(self.expression()?);
            if self.eat(&Tok::Op(",")) {
                continue;
            }
            self.expect(Tok::Op(")"), "')'")?;
            break;
        }
        Ok(args)
    }

    fn expression(&mut self) -> Result<Expr, ZfuzzError> {
        self.depth += 1;
        if self.depth > MAX_EXPR_DEPTH {
            self.depth -= 1;
            return Err(self.err_here("expression nesting too deep"));
        }
        let result = self.or_expr();
        self.depth -= 1;
        result
    }

    fn or_expr(&mut self) -> Result<Expr, ZfuzzError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::Keyword(Kw::Or)) {
            let rhs = self.and_expr()?;
            lhs = Expr::BoolOp {
                op: BoolOp::Or,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ZfuzzError> {
        let mut lhs = self.not_expr()?;
        while self.eat(&Tok::Keyword(Kw::And)) {
            let rhs = self.not_expr()?;
            lhs = Expr::BoolOp {
                op: BoolOp::And,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, ZfuzzError> {
        let line = self.peek().line;
        if self.eat(&Tok::Keyword(Kw::Not)) {
            self.depth += 1;
            if self.depth > MAX_EXPR_DEPTH {
                self.depth -= 1;
                return Err(self.err_here("expression nesting too deep"));
            }
            let operand = self.not_expr();
            self.depth -= 1;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                operand: Box::new(operand?),
                line,
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ZfuzzError> {
        let lhs = self.arith()?;
        let line = self.peek().line;
        let op = match self.peek().tok {
            Tok::Op("==") => Some(CmpOp::Eq),
            Tok::Op("!=") => Some(CmpOp::Ne),
            Tok::Op("<") => Some(CmpOp::Lt),
            Tok::Op("<=") => Some(CmpOp::Le),
            Tok::Op(">") => Some(CmpOp::Gt),
            Tok::Op(">=") => Some(CmpOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let rhs = self.arith()?;
            return Ok(Expr::Compare {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                line,
            });
        }
        Ok(lhs)
    }

    fn arith(&mut self) -> Result<Expr, ZfuzzError> {
        let mut lhs = self.term()?;
        loop {
            let line = self.peek().line;
            let op = match self.peek().tok {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                line,
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ZfuzzError> {
        let mut lhs = self.factor()?;
        loop {
            let line = self.peek().line;
            let op = match self.peek().tok {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                _ => break,
            };
            self.advance();
            let rhs = self.factor()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                line,
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ZfuzzError> {
        let line = self.peek().line;
        let op = if self.check(&Tok::Op("-")) {
            Some(UnaryOp::Neg)
        } else if self.check(&Tok::Op("+")) {
            Some(UnaryOp::Pos)
        } else {
            None
        };
        if let Some(op) = op {
            self.advance();
            self.depth += 1;
            if self.depth > MAX_EXPR_DEPTH {
                self.depth -= 1;
                return Err(self.err_here("expression nesting too deep"));
            }
            let operand = self.factor();
            self.depth -= 1;
            return Ok(Expr::Unary {
                op,
                operand: Box::new(operand?),
                line,
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ZfuzzError> {
        let mut expr = self.atom()?;
        loop {
            let line = self.peek().line;
            if self.eat(&Tok::Op("[")) {
                let index = self.expression()?;
                self.expect(Tok::Op("]"), "']'")?;
                expr = Expr::Index {
                    base: Box::new(expr),
                    index: Box::new(index),
                    line,
                };
            } else {
                break;
            }
        }
        Ok(expr)
    }

    fn atom(&mut self) -> Result<Expr, ZfuzzError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::Int(v))
            }
            Tok::Float(v) => {
                self.advance();
                Ok(Expr::Float(v))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Str(s))
            }
            Tok::Keyword(Kw::True) => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            Tok::Keyword(Kw::False) => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            Tok::Keyword(Kw::None) => {
                self.advance();
                Ok(Expr::NoneLit)
            }
            Tok::Name(name) => {
                self.advance();
                if self.eat(&Tok::Op("(")) {
                    let args = self.call_args()?;
                    Ok(Expr::Call {
                        callee: name,
                        args,
                        line: t.line,
                    })
                } else {
                    Ok(Expr::Name(name, t.line))
                }
            }
            Tok::Op("(") => {
                self.advance();
                let inner = self.expression()?;
                self.expect(Tok::Op(")"), "')'")?;
                Ok(inner)
            }
            Tok::Op("[") => {
                self.advance();
                let mut items = Vec::new();
                if !self.check(&Tok::Op("]")) {
                    loop {
                        items.push(self.expression()?);
                        if !self.eat(&Tok::Op(",")) {
                            break;
                        }
                    }
                }
                self.expect(Tok::Op("]"), "']'")?;
                Ok(Expr::List(items))
            }
            _ => Err(self.err_here("an expression")),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Int(v) => format!("integer {v}"),
        Tok::Float(v) => format!("float {v}"),
        Tok::Str(_) => "string literal".to_string(),
        Tok::Name(n) => format!("name '{n}'"),
        Tok::Keyword(k) => format!("keyword '{k:?}'").to_lowercase(),
        Tok::Op(o) => format!("'{o}'"),
        Tok::Newline => "end of line".to_string(),
        Tok::Indent => "indent".to_string(),
        Tok::Dedent => "dedent".to_string(),
        Tok::Eof => "end of input".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_assignment() {
        let p = parse("x = 1 + 2").unwrap();
        assert_eq!(p.stmts.len(), 1);
        assert!(matches!(p.stmts[0], Stmt::Assign { .. }));
    }

    #[test]
    fn rejects_malformed_def() {
        let err = parse("def f(:").unwrap_err();
        match err {
            ZfuzzError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parses_nested_function_defs() {
        let src = "def outer():\n    def inner():\n        return 1\n    return inner()\n";
        let p = parse(src).unwrap();
        assert_eq!(p.stmts.len(), 1);
    }

    #[test]
    fn parses_if_elif_else() {
        let src = "if x > 0:\n    print(1)\nelif x < 0:\n    print(2)\nelse:\n    print(3)\n";
        let p = parse(src).unwrap();
        match &p.stmts[0] {
            Stmt::If { arms, else_body } => {
                assert_eq!(arms.len(), 2);
                assert!(else_body.is_some());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_for_range_variants() {
        assert!(parse("for i in range(5):\n    print(i)\n").is_ok());
        assert!(parse("for i in range(1, 5):\n    print(i)\n").is_ok());
        assert!(parse("for i in range(0, 10, 2):\n    print(i)\n").is_ok());
        assert!(parse("for i in range():\n    print(i)\n").is_err());
    }

    #[test]
    fn parses_import_shim() {
        let p = parse("from python import Python\n").unwrap();
        assert!(matches!(p.stmts[0], Stmt::ImportShim { .. }));
    }

    #[test]
    fn parses_index_assignment_and_read() {
        let p = parse("xs[0] = 5\ny = xs[1] + 1\n").unwrap();
        assert_eq!(p.stmts.len(), 2);
        assert!(matches!(
            p.stmts[0],
            Stmt::Assign {
                target: Target::Index(..),
                ..
            }
        ));
    }

    #[test]
    fn error_carries_line_and_column() {
        let err = parse("x = 1\ny = (2\n").unwrap_err();
        match err {
            ZfuzzError::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column >= 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_source_parses_to_empty_program() {
        let p = parse("").unwrap();
        assert!(p.stmts.is_empty());
    }
}
