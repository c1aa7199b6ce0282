//! Syntax tree for the MiniLang surface: a small Python-like language with
//! assignments, arithmetic, comparisons, `if`/`elif`/`else`, `while`,
//! `for`-over-`range`, function definitions, calls, and `print`.

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign {
        target: Target,
        value: Expr,
        line: u32,
    },
    /// Bare expression evaluated for effect (typically a call).
    Expr(Expr),
    Print {
        args: Vec<Expr>,
        line: u32,
    },
    If {
        /// `if` plus any `elif` arms, in order.
        arms: Vec<(Expr, Vec<Stmt>)>,
        else_body: Option<Vec<Stmt>>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    /// `for <var> in range(<args>):` — range is part of the loop syntax,
    /// not a callable name.
    ForRange {
        var: String,
        args: Vec<Expr>,
        body: Vec<Stmt>,
        line: u32,
    },
    FuncDef {
        name: String,
        params: Vec<String>,
        body: Vec<Stmt>,
    },
    Return {
        value: Option<Expr>,
        line: u32,
    },
    Break(u32),
    Continue(u32),
    Pass,
    /// `from <module> import <item>` — accepted as an interop shim; binds
    /// nothing and has no runtime effect.
    ImportShim {
        module: String,
        item: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Name(String),
    /// `name[index] = value`
    Index(String, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    NoneLit,
    Name(String, u32),
    List(Vec<Expr>),
    Call {
        callee: String,
        args: Vec<Expr>,
        line: u32,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
        line: u32,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        line: u32,
    },
    Compare {
        op: CmpOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        line: u32,
    },
    BoolOp {
        op: BoolOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
        line: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Pos,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    /// True division; always produces a float on numbers.
    Div,
    /// Floor division on integers.
    FloorDiv,
    Mod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
}

impl Program {
    /// Visit every statement in the tree, depth first, including nested
    /// function bodies and loop bodies.
    pub fn walk_stmts<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        fn go<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
            for s in stmts {
                f(s);
                match s {
                    Stmt::If { arms, else_body } => {
                        for (_, body) in arms {
                            go(body, f);
                        }
                        if let Some(e) = else_body {
                            go(e, f);
                        }
                    }
                    Stmt::While { body, .. }
                    | Stmt::ForRange { body, .. }
                    | Stmt::FuncDef { body, .. } => go(body, f),
                    _ => {}
                }
            }
        }
        go(&self.stmts, f);
    }
}
