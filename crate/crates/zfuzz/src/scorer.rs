//! Static analysis of seed programs: API call counting against a manifest,
//! asymptotic-complexity classification, and the mutation score that drives
//! campaign branching.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZfuzzError};
use crate::lang::ast::{Expr, Program, Stmt, Target};
use crate::lang::parse;

/// The set of API functions the target toolchain exposes, with optional
/// aliases and `sortlike` tags.
///
/// File format: one API name per line, optional `alias=canonical` lines,
/// optional `#sortlike` tag suffix after a name. `#`-only lines are comments.
#[derive(Debug, Clone, Default)]
pub struct ApiManifest {
    names: BTreeSet<String>,
    aliases: BTreeMap<String, String>,
    sortlike: BTreeSet<String>,
}

impl ApiManifest {
    pub fn new(names: impl IntoIterator<Item = String>) -> Self {
        ApiManifest {
            names: names.into_iter().collect(),
            aliases: BTreeMap::new(),
            sortlike: BTreeSet::new(),
        }
    }

    /// The default manifest shipped with the bundled MiniLang interpreter.
    pub fn minilang_default() -> Self {
        Self::parse(include_str!("../data/manifest.txt"))
            .expect("bundled manifest must be well formed")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ZfuzzError::config(format!("cannot read manifest {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = ApiManifest::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((alias, canonical)) = line.split_once('=') {
                m.aliases
                    .insert(alias.trim().to_string(), canonical.trim().to_string());
                continue;
            }
            let (name, tag) = match line.split_once('#') {
                Some((n, t)) => (n.trim(), Some(t.trim())),
                None => (line, None),
            };
            if name.is_empty() {
                return Err(ZfuzzError::config(format!(
                    "manifest line {}: empty API name",
                    lineno + 1
                )));
            }
            m.names.insert(name.to_string());
            match tag {
                Some("sortlike") => {
                    m.sortlike.insert(name.to_string());
                }
                Some(other) if !other.is_empty() => {
                    return Err(ZfuzzError::config(format!(
                        "manifest line {}: unknown tag '{other}'",
                        lineno + 1
                    )));
                }
                _ => {}
            }
        }
        if m.names.is_empty() {
            return Err(ZfuzzError::config("manifest contains no API names"));
        }
        for (alias, canonical) in &m.aliases {
            if !m.names.contains(canonical) {
                return Err(ZfuzzError::config(format!(
                    "alias '{alias}' maps to unknown API '{canonical}'"
                )));
            }
        }
        Ok(m)
    }

    pub fn add_alias(&mut self, alias: &str, canonical: &str) -> Result<()> {
        if !self.names.contains(canonical) {
            return Err(ZfuzzError::config(format!(
                "alias '{alias}' maps to unknown API '{canonical}'"
            )));
        }
        self.aliases.insert(alias.to_string(), canonical.to_string());
        Ok(())
    }

    pub fn tag_sortlike(&mut self, name: &str) {
        self.sortlike.insert(name.to_string());
    }

    /// Alias-resolve a call-site name to its canonical manifest name, if any.
    pub fn resolve(&self, name: &str) -> Option<&str> {
        if self.names.contains(name) {
            return Some(self.names.get(name).unwrap().as_str());
        }
        self.aliases
            .get(name)
            .map(|c| c.as_str())
            .filter(|c| self.names.contains(*c))
    }

    pub fn is_sortlike(&self, canonical: &str) -> bool {
        self.sortlike.contains(canonical)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(|s| s.as_str())
    }
}

/// Complexity classes with their fixed scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComplexityClass {
    O1,
    On,
    OnLogn,
    On2,
    On3Plus,
}

impl ComplexityClass {
    pub fn score(&self) -> i64 {
        match self {
            ComplexityClass::O1 => 1,
            ComplexityClass::On => 2,
            ComplexityClass::OnLogn => 3,
            ComplexityClass::On2 => 4,
            ComplexityClass::On3Plus => 5,
        }
    }

    fn from_depth(d: u32) -> Self {
        match d {
            0 => ComplexityClass::O1,
            1 => ComplexityClass::On,
            2 => ComplexityClass::On2,
            _ => ComplexityClass::On3Plus,
        }
    }
}

impl fmt::Display for ComplexityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ComplexityClass::O1 => "O(1)",
            ComplexityClass::On => "O(n)",
            ComplexityClass::OnLogn => "O(n log n)",
            ComplexityClass::On2 => "O(n^2)",
            ComplexityClass::On3Plus => "O(n^3+)",
        };
        f.write_str(s)
    }
}

/// Result of counting manifest API call sites in a program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiCallCount {
    /// Every call site whose alias-resolved callee is in the manifest.
    pub n_api: i64,
    /// Distinct canonical manifest names invoked.
    pub distinct_apis: BTreeSet<String>,
    /// Callees that are neither user-defined nor in the manifest —
    /// hallucination evidence.
    pub unknown_calls: BTreeSet<String>,
    /// Per-canonical-name call-site counts (feeds the distribution report).
    pub per_api: BTreeMap<String, i64>,
}

/// The branching score: call count plus complexity-class score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationScore {
    pub n_api: i64,
    pub complexity: ComplexityClass,
    pub total: i64,
}

/// Count manifest API call sites. User-defined function names shadow the
/// manifest; calls to them count in neither bucket.
pub fn count_api_calls(source: &str, manifest: &ApiManifest) -> Result<ApiCallCount> {
    let program = parse(source)?;
    Ok(count_api_calls_in(&program, manifest))
}

pub fn count_api_calls_in(program: &Program, manifest: &ApiManifest) -> ApiCallCount {
    let user_defined = collect_user_functions(program);
    let mut out = ApiCallCount {
        n_api: 0,
        distinct_apis: BTreeSet::new(),
        unknown_calls: BTreeSet::new(),
        per_api: BTreeMap::new(),
    };
    for_each_call(program, &mut |callee, _| {
        if user_defined.contains(callee) {
            return;
        }
        match manifest.resolve(callee) {
            Some(canonical) => {
                out.n_api += 1;
                out.distinct_apis.insert(canonical.to_string());
                *out.per_api.entry(canonical.to_string()).or_insert(0) += 1;
            }
            None => {
                out.unknown_calls.insert(callee.to_string());
            }
        }
    });
    out
}

/// Classify a program's asymptotic complexity with a deterministic
/// heuristic over the syntax tree:
///
/// - `d` is the maximum lexical loop-nesting depth (`while`/`for`);
/// - presence of self- or mutual recursion forces `d >= 1`, and a call to a
///   recursive function at loop depth `k` contributes `k + 1`;
/// - a call to a `sortlike` manifest member at loop depth `k` contributes an
///   effective depth of `k + 1`, with an `O(n log n)` floor at `k = 0`;
/// - classes map `0 -> O(1)`, `1 -> O(n)`, `2 -> O(n^2)`, `>= 3 -> O(n^3+)`.
pub fn estimate_complexity(source: &str, manifest: &ApiManifest) -> Result<ComplexityClass> {
    let program = parse(source)?;
    Ok(estimate_complexity_in(&program, manifest))
}

pub fn estimate_complexity_in(program: &Program, manifest: &ApiManifest) -> ComplexityClass {
    let user_defined = collect_user_functions(program);
    let recursive = recursive_functions(program, &user_defined);

    let mut max_depth = loop_nesting_depth(&program.stmts, 0);
    let mut sortlike_floor = false;

    for_each_call_with_depth(&program.stmts, 0, &mut |callee, depth| {
        if recursive.contains(callee) {
            max_depth = max_depth.max(depth + 1);
        }
        if !user_defined.contains(callee) {
            if let Some(canonical) = manifest.resolve(callee) {
                if manifest.is_sortlike(canonical) {
                    if depth == 0 {
                        sortlike_floor = true;
                    } else {
                        max_depth = max_depth.max(depth + 1);
                    }
                }
            }
        }
    });

    let mut class = ComplexityClass::from_depth(max_depth);
    if sortlike_floor && class < ComplexityClass::OnLogn {
        class = ComplexityClass::OnLogn;
    }
    class
}

/// The branching score of a seed: `total = n_api + complexity score`.
pub fn mutation_score(source: &str, manifest: &ApiManifest) -> Result<MutationScore> {
    let program = parse(source)?;
    let calls = count_api_calls_in(&program, manifest);
    let complexity = estimate_complexity_in(&program, manifest);
    Ok(MutationScore {
        n_api: calls.n_api,
        total: calls.n_api + complexity.score(),
        complexity,
    })
}

/// Report-only weighted score: `lambda * complexity_score + mu * accuracy`.
/// Never used for campaign branching.
pub fn weighted_report_score(
    complexity_score: i64,
    accuracy: f64,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    if lambda < 0.0 || mu < 0.0 {
        return Err(ZfuzzError::config(
            "weighted score factors must be non-negative",
        ));
    }
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(ZfuzzError::config("accuracy must lie in [0, 1]"));
    }
    Ok(lambda * complexity_score as f64 + mu * accuracy)
}

fn collect_user_functions(program: &Program) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    program.walk_stmts(&mut |s| {
        if let Stmt::FuncDef { name, .. } = s {
            names.insert(name.clone());
        }
    });
    names
}

/// Functions on a cycle of the user call graph (self-loops included).
fn recursive_functions(program: &Program, user_defined: &BTreeSet<String>) -> BTreeSet<String> {
    // Edges: function body -> called user functions.
    let mut edges: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    program.walk_stmts(&mut |s| {
        if let Stmt::FuncDef { name, body, .. } = s {
            let mut callees = BTreeSet::new();
            for_each_call_in_stmts(body, &mut |callee| {
                if user_defined.contains(callee) {
                    callees.insert(callee.to_string());
                }
            });
            edges.entry(name.clone()).or_default().extend(callees);
        }
    });

    // A function is recursive when it can reach itself.
    let mut recursive = BTreeSet::new();
    for start in edges.keys() {
        let mut stack: Vec<&str> = edges[start].iter().map(|s| s.as_str()).collect();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        while let Some(cur) = stack.pop() {
            if cur == start {
                recursive.insert(start.clone());
                break;
            }
            if !seen.insert(cur) {
                continue;
            }
            if let Some(next) = edges.get(cur) {
                stack.extend(next.iter().map(|s| s.as_str()));
            }
        }
    }
    recursive
}

/// Maximum lexical loop-nesting depth. Function definitions do not reset the
/// depth: nesting is purely lexical, which keeps the measure monotone under
/// wrapping a program in an extra loop.
fn loop_nesting_depth(stmts: &[Stmt], depth: u32) -> u32 {
    let mut max = depth;
    for s in stmts {
        let here = match s {
            Stmt::While { body, .. } | Stmt::ForRange { body, .. } => {
                loop_nesting_depth(body, depth + 1)
            }
            Stmt::If { arms, else_body } => {
                let mut m = depth;
                for (_, body) in arms {
                    m = m.max(loop_nesting_depth(body, depth));
                }
                if let Some(body) = else_body {
                    m = m.max(loop_nesting_depth(body, depth));
                }
                m
            }
            Stmt::FuncDef { body, .. } => loop_nesting_depth(body, depth),
            _ => depth,
        };
        max = max.max(here);
    }
    max
}

fn for_each_call(program: &Program, f: &mut impl FnMut(&str, u32)) {
    for_each_call_with_depth(&program.stmts, 0, f);
}

fn for_each_call_with_depth(stmts: &[Stmt], depth: u32, f: &mut impl FnMut(&str, u32)) {
    for s in stmts {
        match s {
            Stmt::Assign { target, value, .. } => {
                if let Target::Index(_, idx) = target {
                    walk_expr(idx, depth, f);
                }
                walk_expr(value, depth, f);
            }
            Stmt::Expr(e) => walk_expr(e, depth, f),
            Stmt::Print { args, .. } => {
                for a in args {
                    walk_expr(a, depth, f);
                }
            }
            Stmt::If { arms, else_body } => {
                for (cond, body) in arms {
                    walk_expr(cond, depth, f);
                    for_each_call_with_depth(body, depth, f);
                }
                if let Some(body) = else_body {
                    for_each_call_with_depth(body, depth, f);
                }
            }
            Stmt::While { cond, body } => {
                walk_expr(cond, depth + 1, f);
                for_each_call_with_depth(body, depth + 1, f);
            }
            Stmt::ForRange { args, body, .. } => {
                for a in args {
                    walk_expr(a, depth, f);
                }
                for_each_call_with_depth(body, depth + 1, f);
            }
            Stmt::FuncDef { body, .. } => for_each_call_with_depth(body, depth, f),
            Stmt::Return { value, .. } => {
                if let Some(e) = value {
                    walk_expr(e, depth, f);
                }
            }
            Stmt::Break(_) | Stmt::Continue(_) | Stmt::Pass | Stmt::ImportShim { .. } => {}
        }
    }
}

fn for_each_call_in_stmts(stmts: &[Stmt], f: &mut impl FnMut(&str)) {
    for_each_call_with_depth(stmts, 0, &mut |name, _| f(name));
}

fn walk_expr(expr: &Expr, depth: u32, f: &mut impl FnMut(&str, u32)) {
    match expr {
        Expr::Call { callee, args, .. } => {
            f(callee, depth);
            for a in args {
                walk_expr(a, depth, f);
            }
        }
        Expr::List(items) => {
            for i in items {
                walk_expr(i, depth, f);
            }
        }
        Expr::Unary { operand, .. } => walk_expr(operand, depth, f),
        Expr::Binary { lhs, rhs, .. }
        | Expr::Compare { lhs, rhs, .. }
        | Expr::BoolOp { lhs, rhs, .. } => {
            walk_expr(lhs, depth, f);
            walk_expr(rhs, depth, f);
        }
        Expr::Index { base, index, .. } => {
            walk_expr(base, depth, f);
            walk_expr(index, depth, f);
        }
        _ => {}
    }
}
