//! Tree-walking evaluator for MiniLang.
//!
//! Semantics are the obvious Python-like ones; `random_*` builtins honor the
//! RNG seed so every healthy run is deterministic. Planted bugs fire
//! deterministically on their trigger inputs (see `bugs.rs`).

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bugs::{BugConfig, PlantedBug};
use crate::lang::ast::*;

/// Maximum user-call depth; exceeding it is a runtime error rather than a
/// native stack overflow, so runaway recursion classifies as RuntimeError.
/// Kept small enough that the interpreter also fits a 2 MiB thread stack.
const MAX_CALL_DEPTH: usize = 64;

#[derive(Debug, Clone)]
pub struct ExecError {
    pub message: String,
}

impl ExecError {
    fn new(msg: impl Into<String>) -> Self {
        ExecError {
            message: msg.into(),
        }
    }
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type EResult<T> = Result<T, ExecError>;

#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    None,
    List(Rc<RefCell<Vec<Value>>>),
    /// Foreign-array shim backing the np_* builtins.
    Array(Rc<Vec<f64>>),
    /// Handle returned by py_import.
    Module(String),
    Func(Rc<FuncData>),
}

#[derive(Debug)]
pub struct FuncData {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::Bool(_) => "bool",
            Value::None => "none",
            Value::List(_) => "list",
            Value::Array(_) => "array",
            Value::Module(_) => "module",
            Value::Func(_) => "function",
        }
    }

    fn truthy(&self) -> bool {
        match self {
            Value::Int(v) => *v != 0,
            Value::Float(v) => *v != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::Bool(b) => *b,
            Value::None => false,
            Value::List(xs) => !xs.borrow().is_empty(),
            Value::Array(a) => !a.is_empty(),
            Value::Module(_) | Value::Func(_) => true,
        }
    }

    fn new_list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(RefCell::new(items)))
    }

    /// Display form used by `print` (strings bare).
    fn display(&self) -> String {
        match self {
            Value::Str(s) => s.clone(),
            other => other.repr(),
        }
    }

    /// Repr form used inside containers (strings quoted).
    fn repr(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Float(v) => format_float(*v),
            Value::Str(s) => format!("'{s}'"),
            Value::Bool(true) => "True".to_string(),
            Value::Bool(false) => "False".to_string(),
            Value::None => "None".to_string(),
            Value::List(xs) => {
                let inner: Vec<String> = xs.borrow().iter().map(|v| v.repr()).collect();
                format!("[{}]", inner.join(", "))
            }
            Value::Array(a) => {
                let inner: Vec<String> = a.iter().map(|v| format_float(*v)).collect();
                format!("array([{}])", inner.join(", "))
            }
            Value::Module(name) => format!("<module '{name}'>"),
            Value::Func(f) => format!("<function '{}'>", f.name),
        }
    }
}

fn format_float(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(Value),
}

pub struct Interpreter<'a> {
    globals: HashMap<String, Value>,
    frames: Vec<HashMap<String, Value>>,
    rng: ChaCha8Rng,
    bugs: BugConfig,
    out: &'a mut dyn std::io::Write,
}

/// Evaluate a parsed program to completion, writing `print` output to `out`.
pub fn run_program(
    program: &Program,
    bug_config: &BugConfig,
    rng_seed: u64,
    out: &mut dyn std::io::Write,
) -> EResult<()> {
    let mut interp = Interpreter {
        globals: HashMap::new(),
        frames: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(rng_seed),
        bugs: bug_config.clone(),
        out,
    };
    match interp.exec_block(&program.stmts)? {
        Flow::Normal => Ok(()),
        Flow::Return(_) => Err(ExecError::new("return outside function")),
        Flow::Break => Err(ExecError::new("break outside loop")),
        Flow::Continue => Err(ExecError::new("continue outside loop")),
    }
}

impl<'a> Interpreter<'a> {
    fn exec_block(&mut self, stmts: &[Stmt]) -> EResult<Flow> {
        for stmt in stmts {
            match self.exec_stmt(stmt)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_stmt(&mut self, stmt: &Stmt) -> EResult<Flow> {
        match stmt {
            Stmt::Assign { target, value, .. } => {
                let v = self.eval(value)?;
                match target {
                    Target::Name(name) => self.assign(name, v),
                    Target::Index(name, index_expr) => {
                        let idx = self.eval(index_expr)?;
                        let base = self
                            .lookup(name)
                            .ok_or_else(|| ExecError::new(format!("undefined name '{name}'")))?;
                        match base {
                            Value::List(xs) => {
                                let mut xs = xs.borrow_mut();
                                let i = resolve_index(&idx, xs.len())?;
                                xs[i] = v;
                            }
                            other => {
                                return Err(ExecError::new(format!(
                                    "cannot index-assign into {}",
                                    other.type_name()
                                )))
                            }
                        }
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::Expr(e) => {
                self.eval(e)?;
                Ok(Flow::Normal)
            }
            Stmt::Print { args, .. } => {
                let mut parts = Vec::with_capacity(args.len());
                for a in args {
                    parts.push(self.eval(a)?.display());
                }
                writeln!(self.out, "{}", parts.join(" "))
                    .map_err(|e| ExecError::new(format!("write failed: {e}")))?;
                Ok(Flow::Normal)
            }
            Stmt::If { arms, else_body } => {
                for (cond, body) in arms {
                    if self.eval(cond)?.truthy() {
                        return self.exec_block(body);
                    }
                }
                if let Some(body) = else_body {
                    return self.exec_block(body);
                }
                Ok(Flow::Normal)
            }
            Stmt::While { cond, body } => {
                while self.eval(cond)?.truthy() {
                    match self.exec_block(body)? {
                        Flow::Normal | Flow::Continue => {}
                        Flow::Break => break,
                        ret @ Flow::Return(_) => return Ok(ret),
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::ForRange {
                var, args, body, ..
            } => {
                let bounds: Vec<i64> = args
                    .iter()
                    .map(|a| self.eval_int(a))
                    .collect::<EResult<_>>()?;
                let (start, stop, step) = match bounds.as_slice() {
                    [stop] => (0, *stop, 1),
                    [start, stop] => (*start, *stop, 1),
                    [start, stop, step] => (*start, *stop, *step),
                    _ => unreachable!("parser bounds range arity"),
                };
                if step == 0 {
                    return Err(ExecError::new("range step must not be zero"));
                }
                let mut i = start;
                while (step > 0 && i < stop) || (step < 0 && i > stop) {
                    self.assign(var, Value::Int(i));
                    match self.exec_block(body)? {
                        Flow::Normal | Flow::Continue => {}
                        Flow::Break => break,
                        ret @ Flow::Return(_) => return Ok(ret),
                    }
                    i = i
                        .checked_add(step)
                        .ok_or_else(|| ExecError::new("integer overflow"))?;
                }
                Ok(Flow::Normal)
            }
            Stmt::FuncDef { name, params, body } => {
                let func = Value::Func(Rc::new(FuncData {
                    name: name.clone(),
                    params: params.clone(),
                    body: body.clone(),
                }));
                self.assign(name, func);
                Ok(Flow::Normal)
            }
            Stmt::Return { value, .. } => {
                let v = match value {
                    Some(e) => self.eval(e)?,
                    None => Value::None,
                };
                Ok(Flow::Return(v))
            }
            Stmt::Break(_) => Ok(Flow::Break),
            Stmt::Continue(_) => Ok(Flow::Continue),
            Stmt::Pass | Stmt::ImportShim { .. } => Ok(Flow::Normal),
        }
    }

    fn assign(&mut self, name: &str, value: Value) {
        if let Some(frame) = self.frames.last_mut() {
            frame.insert(name.to_string(), value);
        } else {
            self.globals.insert(name.to_string(), value);
        }
    }

    fn lookup(&self, name: &str) -> Option<Value> {
        if let Some(frame) = self.frames.last() {
            if let Some(v) = frame.get(name) {
                return Some(v.clone());
            }
        }
        self.globals.get(name).cloned()
    }

    fn eval_int(&mut self, expr: &Expr) -> EResult<i64> {
        match self.eval(expr)? {
            Value::Int(v) => Ok(v),
            other => Err(ExecError::new(format!(
                "expected an integer, got {}",
                other.type_name()
            ))),
        }
    }

    fn eval(&mut self, expr: &Expr) -> EResult<Value> {
        match expr {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Float(v) => Ok(Value::Float(*v)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::NoneLit => Ok(Value::None),
            Expr::Name(name, _) => self
                .lookup(name)
                .ok_or_else(|| ExecError::new(format!("undefined name '{name}'"))),
            Expr::List(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval(item)?);
                }
                Ok(Value::new_list(out))
            }
            Expr::Call { callee, args, .. } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a)?);
                }
                self.call(callee, vals)
            }
            Expr::Unary { op, operand, .. } => {
                let v = self.eval(operand)?;
                match op {
                    UnaryOp::Not => Ok(Value::Bool(!v.truthy())),
                    UnaryOp::Neg => match v {
                        Value::Int(i) => i
                            .checked_neg()
                            .map(Value::Int)
                            .ok_or_else(|| ExecError::new("integer overflow")),
                        Value::Float(f) => Ok(Value::Float(-f)),
                        other => Err(ExecError::new(format!(
                            "cannot negate {}",
                            other.type_name()
                        ))),
                    },
                    UnaryOp::Pos => match v {
                        Value::Int(_) | Value::Float(_) => Ok(v),
                        other => Err(ExecError::new(format!(
                            "unary '+' needs a number, got {}",
                            other.type_name()
                        ))),
                    },
                }
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                binary_op(*op, l, r)
            }
            Expr::Compare { op, lhs, rhs, .. } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                compare_op(*op, &l, &r)
            }
            Expr::BoolOp { op, lhs, rhs } => {
                let l = self.eval(lhs)?;
                match op {
                    BoolOp::And => {
                        if !l.truthy() {
                            Ok(l)
                        } else {
                            self.eval(rhs)
                        }
                    }
                    BoolOp::Or => {
                        if l.truthy() {
                            Ok(l)
                        } else {
                            self.eval(rhs)
                        }
                    }
                }
            }
            Expr::Index { base, index, .. } => {
                let b = self.eval(base)?;
                let i = self.eval(index)?;
                match b {
                    Value::List(xs) => {
                        let xs = xs.borrow();
                        let idx = resolve_index(&i, xs.len())?;
                        Ok(xs[idx].clone())
                    }
                    Value::Str(s) => {
                        let chars: Vec<char> = s.chars().collect();
                        let idx = resolve_index(&i, chars.len())?;
                        Ok(Value::Str(chars[idx].to_string()))
                    }
                    Value::Array(a) => {
                        let idx = resolve_index(&i, a.len())?;
                        Ok(Value::Float(a[idx]))
                    }
                    other => Err(ExecError::new(format!(
                        "cannot index {}",
                        other.type_name()
                    ))),
                }
            }
        }
    }

    fn call(&mut self, name: &str, args: Vec<Value>) -> EResult<Value> {
        // User definitions shadow builtins.
        if let Some(Value::Func(func)) = self.lookup(name) {
            return self.call_user(func, args);
        }
        if let Some(v) = self.lookup(name) {
            if !matches!(v, Value::Func(_)) {
                return Err(ExecError::new(format!(
                    "'{name}' is not callable (it is a {})",
                    v.type_name()
                )));
            }
        }
        self.call_builtin(name, args)
    }

    fn call_user(&mut self, func: Rc<FuncData>, args: Vec<Value>) -> EResult<Value> {
        if func.params.len() != args.len() {
            return Err(ExecError::new(format!(
                "function '{}' expects {} arguments, got {}",
                func.name,
                func.params.len(),
                args.len()
            )));
        }
        if self.frames.len() >= MAX_CALL_DEPTH {
            return Err(ExecError::new("maximum recursion depth exceeded"));
        }
        let mut frame = HashMap::new();
        for (p, a) in func.params.iter().zip(args) {
            frame.insert(p.clone(), a);
        }
        self.frames.push(frame);
        let result = self.exec_block(&func.body);
        self.frames.pop();
        match result? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(Value::None),
            Flow::Break => Err(ExecError::new("break outside loop")),
            Flow::Continue => Err(ExecError::new("continue outside loop")),
        }
    }

    fn call_builtin(&mut self, name: &str, args: Vec<Value>) -> EResult<Value> {
        match name {
            "seed" => {
                let n = one_int(name, &args)?;
                self.rng = ChaCha8Rng::seed_from_u64(n as u64);
                Ok(Value::None)
            }
            "random_si64" => {
                let (lo, hi) = two_ints(name, &args)?;
                if lo > hi {
                    return Err(ExecError::new("empty random range"));
                }
                if self.bugs.is_enabled(PlantedBug::B1FixedRandom) {
                    return Ok(Value::Int(lo));
                }
                Ok(Value::Int(self.rng.gen_range(lo..=hi)))
            }
            "random_ui64" => {
                let (lo, hi) = two_ints(name, &args)?;
                if lo < 0 || hi < 0 {
                    return Err(ExecError::new("random_ui64 bounds must be non-negative"));
                }
                if lo > hi {
                    return Err(ExecError::new("empty random range"));
                }
                Ok(Value::Int(self.rng.gen_range(lo..=hi)))
            }
            "random_float64" => {
                if !args.is_empty() {
                    return Err(arity(name, 0, args.len()));
                }
                Ok(Value::Float(self.rng.gen_range(0.0..1.0)))
            }
            "randint" => {
                let (lo, hi) = two_ints(name, &args)?;
                if lo > hi {
                    return Err(ExecError::new("empty random range"));
                }
                Ok(Value::Int(self.rng.gen_range(lo..=hi)))
            }
            "rand" => {
                if !args.is_empty() {
                    return Err(arity(name, 0, args.len()));
                }
                Ok(Value::Float(self.rng.gen_range(0.0..1.0)))
            }
            "sort" => {
                let xs = one_list(name, &args)?;
                self.builtin_sort(xs)
            }
            "sum" => {
                let xs = one_list(name, &args)?;
                let items = xs.borrow();
                let mut int_acc: i64 = 0;
                let mut float_acc = 0.0;
                let mut is_float = false;
                for v in items.iter() {
                    match v {
                        Value::Int(i) => {
                            int_acc = int_acc
                                .checked_add(*i)
                                .ok_or_else(|| ExecError::new("integer overflow"))?;
                            float_acc += *i as f64;
                        }
                        Value::Float(f) => {
                            is_float = true;
                            float_acc += f;
                        }
                        other => {
                            return Err(ExecError::new(format!(
                                "sum needs numbers, got {}",
                                other.type_name()
                            )))
                        }
                    }
                }
                if is_float {
                    Ok(Value::Float(float_acc))
                } else {
                    Ok(Value::Int(int_acc))
                }
            }
            "min" | "max" => {
                let items: Vec<Value> = if args.len() == 1 {
                    match &args[0] {
                        Value::List(xs) => xs.borrow().clone(),
                        other => {
                            return Err(ExecError::new(format!(
                                "{name} needs a list or several values, got {}",
                                other.type_name()
                            )))
                        }
                    }
                } else {
                    args
                };
                if items.is_empty() {
                    return Err(ExecError::new(format!("{name} of empty sequence")));
                }
                let mut best = items[0].clone();
                for v in &items[1..] {
                    let take = match compare_values(v, &best)? {
                        std::cmp::Ordering::Less => name == "min",
                        std::cmp::Ordering::Greater => name == "max",
                        std::cmp::Ordering::Equal => false,
                    };
                    if take {
                        best = v.clone();
                    }
                }
                Ok(best)
            }
            "abs" => match args.as_slice() {
                [Value::Int(i)] => i
                    .checked_abs()
                    .map(Value::Int)
                    .ok_or_else(|| ExecError::new("integer overflow")),
                [Value::Float(f)] => Ok(Value::Float(f.abs())),
                [other] => Err(ExecError::new(format!(
                    "abs needs a number, got {}",
                    other.type_name()
                ))),
                _ => Err(arity(name, 1, args.len())),
            },
            "len" => match args.as_slice() {
                [Value::List(xs)] => Ok(Value::Int(xs.borrow().len() as i64)),
                [Value::Str(s)] => Ok(Value::Int(s.chars().count() as i64)),
                [Value::Array(a)] => Ok(Value::Int(a.len() as i64)),
                [other] => Err(ExecError::new(format!(
                    "len needs a list, string, or array, got {}",
                    other.type_name()
                ))),
                _ => Err(arity(name, 1, args.len())),
            },
            "append" => {
                if args.len() != 2 {
                    return Err(arity(name, 2, args.len()));
                }
                match &args[0] {
                    Value::List(xs) => {
                        xs.borrow_mut().push(args[1].clone());
                        Ok(Value::None)
                    }
                    other => Err(ExecError::new(format!(
                        "append needs a list, got {}",
                        other.type_name()
                    ))),
                }
            }
            "pop" => {
                let xs = one_list(name, &args)?;
                let popped = xs.borrow_mut().pop();
                popped.ok_or_else(|| ExecError::new("pop from empty list"))
            }
            "parse_int" => match args.as_slice() {
                [Value::Str(s)] => self.builtin_parse_int(s),
                [other] => Err(ExecError::new(format!(
                    "parse_int needs a string, got {}",
                    other.type_name()
                ))),
                _ => Err(arity(name, 1, args.len())),
            },
            "sqrt" => {
                let x = one_number(name, &args)?;
                if x < 0.0 {
                    return Err(ExecError::new("sqrt of a negative number"));
                }
                Ok(Value::Float(x.sqrt()))
            }
            "pow" => self.builtin_pow(&args),
            "clamp" => {
                if args.len() != 3 {
                    return Err(arity(name, 3, args.len()));
                }
                let lo = &args[1];
                let hi = &args[2];
                let v = &args[0];
                if compare_values(lo, hi)? == std::cmp::Ordering::Greater {
                    return Err(ExecError::new("clamp lower bound exceeds upper bound"));
                }
                if compare_values(v, lo)? == std::cmp::Ordering::Less {
                    return Ok(lo.clone());
                }
                if compare_values(v, hi)? == std::cmp::Ordering::Greater {
                    return Ok(hi.clone());
                }
                Ok(v.clone())
            }
            "py_import" => match args.as_slice() {
                [Value::Str(s)] => Ok(Value::Module(s.clone())),
                [other] => Err(ExecError::new(format!(
                    "py_import needs a module name string, got {}",
                    other.type_name()
                ))),
                _ => Err(arity(name, 1, args.len())),
            },
            "np_array" => {
                let xs = one_list(name, &args)?;
                let items = xs.borrow();
                let mut out = Vec::with_capacity(items.len());
                for v in items.iter() {
                    match v {
                        Value::Int(i) => out.push(*i as f64),
                        Value::Float(f) => out.push(*f),
                        other => {
                            return Err(ExecError::new(format!(
                                "np_array needs numbers, got {}",
                                other.type_name()
                            )))
                        }
                    }
                }
                Ok(Value::Array(Rc::new(out)))
            }
            "np_add" | "np_sub" => {
                if args.len() != 2 {
                    return Err(arity(name, 2, args.len()));
                }
                let (a, b) = match (&args[0], &args[1]) {
                    (Value::Array(a), Value::Array(b)) => (a, b),
                    (l, r) => {
                        return Err(ExecError::new(format!(
                            "{name} needs two arrays, got {} and {}",
                            l.type_name(),
                            r.type_name()
                        )))
                    }
                };
                if name == "np_add" && self.bugs.is_enabled(PlantedBug::B2ArrayInterop) {
                    return Err(ExecError::new("extension call failed"));
                }
                if a.len() != b.len() {
                    return Err(ExecError::new("array length mismatch"));
                }
                let combined: Vec<f64> = a
                    .iter()
                    .zip(b.iter())
                    .map(|(x, y)| if name == "np_add" { x + y } else { x - y })
                    .collect();
                Ok(Value::Array(Rc::new(combined)))
            }
            _ => Err(ExecError::new(format!("unknown function '{name}'"))),
        }
    }

    fn builtin_sort(&mut self, xs: Rc<RefCell<Vec<Value>>>) -> EResult<Value> {
        if self.bugs.is_enabled(PlantedBug::B4SortHang) {
            let items = xs.borrow();
            let mut has_duplicate = false;
            for i in 0..items.len() {
                for j in (i + 1)..items.len() {
                    if compare_values(&items[i], &items[j])? == std::cmp::Ordering::Equal {
                        has_duplicate = true;
                    }
                }
            }
            drop(items);
            if has_duplicate && xs.borrow().len() >= 2 {
                // The planted defect: the "optimized" path never terminates.
                loop {
                    std::thread::sleep(std::time::Duration::from_millis(25));
                }
            }
        }
        // Insertion sort so element comparisons can fail cleanly.
        let mut items = xs.borrow_mut();
        for i in 1..items.len() {
            let mut j = i;
            while j > 0
                && compare_values(&items[j - 1], &items[j])? == std::cmp::Ordering::Greater
            {
                items.swap(j - 1, j);
                j -= 1;
            }
        }
        Ok(Value::None)
    }

    fn builtin_parse_int(&self, raw: &str) -> EResult<Value> {
        let t = raw.trim();
        if self.bugs.is_enabled(PlantedBug::B3ParseSign) && t.starts_with('+') {
            return Err(ExecError::new(format!(
                "unexpected sign in integer literal '{t}'"
            )));
        }
        let cleaned = t.strip_prefix('+').unwrap_or(t);
        cleaned
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| ExecError::new(format!("invalid integer literal '{t}'")))
    }

    fn builtin_pow(&self, args: &[Value]) -> EResult<Value> {
        if args.len() != 2 {
            return Err(arity("pow", 2, args.len()));
        }
        if let (Value::Int(0), Value::Int(0)) = (&args[0], &args[1]) {
            if self.bugs.is_enabled(PlantedBug::B5PowAbort) {
                // The planted defect: the exponent fast path aborts.
                std::process::abort();
            }
        }
        match (&args[0], &args[1]) {
            (Value::Int(base), Value::Int(exp)) => {
                if *exp >= 0 {
                    let e = u32::try_from(*exp)
                        .map_err(|_| ExecError::new("integer overflow"))?;
                    base.checked_pow(e)
                        .map(Value::Int)
                        .ok_or_else(|| ExecError::new("integer overflow"))
                } else {
                    Ok(Value::Float((*base as f64).powi(*exp as i32)))
                }
            }
            (l, r) => {
                let lf = as_number(l).ok_or_else(|| type_err("pow", l))?;
                let rf = as_number(r).ok_or_else(|| type_err("pow", r))?;
                Ok(Value::Float(lf.powf(rf)))
            }
        }
    }
}

fn arity(name: &str, want: usize, got: usize) -> ExecError {
    ExecError::new(format!("{name} expects {want} arguments, got {got}"))
}

fn type_err(name: &str, v: &Value) -> ExecError {
    ExecError::new(format!("{name} needs a number, got {}", v.type_name()))
}

fn one_int(name: &str, args: &[Value]) -> EResult<i64> {
    match args {
        [Value::Int(v)] => Ok(*v),
        [other] => Err(ExecError::new(format!(
            "{name} needs an integer, got {}",
            other.type_name()
        ))),
        _ => Err(arity(name, 1, args.len())),
    }
}

fn two_ints(name: &str, args: &[Value]) -> EResult<(i64, i64)> {
    match args {
        [Value::Int(a), Value::Int(b)] => Ok((*a, *b)),
        [_, _] => Err(ExecError::new(format!("{name} needs two integers"))),
        _ => Err(arity(name, 2, args.len())),
    }
}

fn one_list(name: &str, args: &[Value]) -> EResult<Rc<RefCell<Vec<Value>>>> {
    match args {
        [Value::List(xs)] => Ok(xs.clone()),
        [other] => Err(ExecError::new(format!(
            "{name} needs a list, got {}",
            other.type_name()
        ))),
        _ => Err(arity(name, 1, args.len())),
    }
}

fn one_number(name: &str, args: &[Value]) -> EResult<f64> {
    match args {
        [v] => as_number(v).ok_or_else(|| type_err(name, v)),
        _ => Err(arity(name, 1, args.len())),
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

fn resolve_index(idx: &Value, len: usize) -> EResult<usize> {
    let i = match idx {
        Value::Int(i) => *i,
        other => {
            return Err(ExecError::new(format!(
                "index must be an integer, got {}",
                other.type_name()
            )))
        }
    };
    let adjusted = if i < 0 { i + len as i64 } else { i };
    if adjusted < 0 || adjusted as usize >= len {
        return Err(ExecError::new(format!("index {i} out of range")));
    }
    Ok(adjusted as usize)
}

fn binary_op(op: BinOp, l: Value, r: Value) -> EResult<Value> {
    use BinOp::*;
    match (&l, &r) {
        (Value::Int(a), Value::Int(b)) => {
            let (a, b) = (*a, *b);
            return match op {
                Add => a
                    .checked_add(b)
                    .map(Value::Int)
                    .ok_or_else(|| ExecError::new("integer overflow")),
                Sub => a
                    .checked_sub(b)
                    .map(Value::Int)
                    .ok_or_else(|| ExecError::new("integer overflow")),
                Mul => a
                    .checked_mul(b)
                    .map(Value::Int)
                    .ok_or_else(|| ExecError::new("integer overflow")),
                Div => {
                    if b == 0 {
                        Err(ExecError::new("division by zero"))
                    } else {
                        Ok(Value::Float(a as f64 / b as f64))
                    }
                }
                FloorDiv => {
                    if b == 0 {
                        Err(ExecError::new("division by zero"))
                    } else {
                        let q = a / b;
                        let rem = a % b;
                        Ok(Value::Int(if rem != 0 && (rem < 0) != (b < 0) {
                            q - 1
                        } else {
                            q
                        }))
                    }
                }
                Mod => {
                    if b == 0 {
                        Err(ExecError::new("division by zero"))
                    } else {
                        let rem = a % b;
                        Ok(Value::Int(if rem != 0 && (rem < 0) != (b < 0) {
                            rem + b
                        } else {
                            rem
                        }))
                    }
                }
            };
        }
        (Value::Str(a), Value::Str(b)) if op == Add => {
            return Ok(Value::Str(format!("{a}{b}")));
        }
        (Value::List(a), Value::List(b)) if op == Add => {
            let mut out = a.borrow().clone();
            out.extend(b.borrow().iter().cloned());
            return Ok(Value::new_list(out));
        }
        _ => {}
    }
    let (lf, rf) = match (as_number(&l), as_number(&r)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(ExecError::new(format!(
                "unsupported operand types {} and {}",
                l.type_name(),
                r.type_name()
            )))
        }
    };
    let out = match op {
        BinOp::Add => lf + rf,
        BinOp::Sub => lf - rf,
        BinOp::Mul => lf * rf,
        BinOp::Div => {
            if rf == 0.0 {
                return Err(ExecError::new("division by zero"));
            }
            lf / rf
        }
        BinOp::FloorDiv => {
            if rf == 0.0 {
                return Err(ExecError::new("division by zero"));
            }
            (lf / rf).floor()
        }
        BinOp::Mod => {
            if rf == 0.0 {
                return Err(ExecError::new("division by zero"));
            }
            lf - rf * (lf / rf).floor()
        }
    };
    Ok(Value::Float(out))
}

fn compare_values(l: &Value, r: &Value) -> EResult<std::cmp::Ordering> {
    use std::cmp::Ordering;
    match (l, r) {
        (Value::Str(a), Value::Str(b)) => Ok(a.cmp(b)),
        (Value::Bool(a), Value::Bool(b)) => Ok(a.cmp(b)),
        (Value::List(a), Value::List(b)) => {
            let (a, b) = (a.borrow(), b.borrow());
            for (x, y) in a.iter().zip(b.iter()) {
                match compare_values(x, y)? {
                    Ordering::Equal => continue,
                    other => return Ok(other),
                }
            }
            Ok(a.len().cmp(&b.len()))
        }
        (Value::None, Value::None) => Ok(Ordering::Equal),
        _ => match (as_number(l), as_number(r)) {
            (Some(a), Some(b)) => a
                .partial_cmp(&b)
                .ok_or_else(|| ExecError::new("cannot compare NaN")),
            _ => Err(ExecError::new(format!(
                "unsupported comparison between {} and {}",
                l.type_name(),
                r.type_name()
            ))),
        },
    }
}

fn compare_op(op: CmpOp, l: &Value, r: &Value) -> EResult<Value> {
    use std::cmp::Ordering;
    // Equality across incomparable types is False rather than an error.
    if matches!(op, CmpOp::Eq | CmpOp::Ne) {
        let equal = match compare_values(l, r) {
            Ok(Ordering::Equal) => true,
            Ok(_) => false,
            Err(_) => false,
        };
        return Ok(Value::Bool(if op == CmpOp::Eq { equal } else { !equal }));
    }
    let ord = compare_values(l, r)?;
    let out = match op {
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
        CmpOp::Eq | CmpOp::Ne => unreachable!(),
    };
    Ok(Value::Bool(out))
}
