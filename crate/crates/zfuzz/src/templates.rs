//! Prompt template storage and rendering.
//!
//! Templates live in external text files under a directory given by
//! `--templates`; the defaults ship with the crate and are embedded so every
//! command works without the flag. Structured templates are split into named
//! components with `[Component Name]` section headers; bodies use `{name}`
//! placeholders. The prompt-engineering ablation swaps the structured
//! seed-generation template for a one-line minimal one without code changes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZfuzzError};

/// Component names required of an analysis template, in order.
pub const ANALYSIS_COMPONENTS: [&str; 5] = [
    "Syntax Analysis",
    "Role-Based Framing",
    "Automated Data Filtering",
    "Content Summarization",
    "Prompt Seeds Generation",
];

/// Component names required of a seed-generation template, in order.
pub const SEEDGEN_COMPONENTS: [&str; 5] = [
    "Problem Description",
    "Test Objective",
    "Test Case Generation",
    "System Environment Specification",
    "Execution and Verification",
];

/// Default cap on rendered prompt length, in characters.
pub const DEFAULT_PROMPT_BUDGET: usize = 4_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Analysis,
    Seedgen,
    HalfMutation,
    FullMutation,
}

/// A structured prompt template: ordered named components with placeholder
/// bodies.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub kind: TemplateKind,
    pub components: Vec<(String, String)>,
}

impl PromptTemplate {
    /// Parse the `[Section]` file format and validate the component list
    /// expected for `kind`.
    pub fn parse(kind: TemplateKind, text: &str, expect: Option<&[&str]>) -> Result<Self> {
        let mut components: Vec<(String, String)> = Vec::new();
        let mut current: Option<(String, String)> = None;
        for line in text.lines() {
            let trimmed = line.trim_end();
            if trimmed.starts_with('[') && trimmed.ends_with(']') && trimmed.len() > 2 {
                if let Some((name, body)) = current.take() {
                    components.push((name, body.trim().to_string()));
                }
                current = Some((trimmed[1..trimmed.len() - 1].to_string(), String::new()));
            } else if let Some((_, body)) = current.as_mut() {
                body.push_str(line);
                body.push('\n');
            } else if !trimmed.trim().is_empty() {
                return Err(ZfuzzError::Template(format!(
                    "text before first [Component] header: {trimmed:?}"
                )));
            }
        }
        if let Some((name, body)) = current.take() {
            components.push((name, body.trim().to_string()));
        }
        if let Some(expected) = expect {
            let got: Vec<&str> = components.iter().map(|(n, _)| n.as_str()).collect();
            if got != expected {
                return Err(ZfuzzError::Template(format!(
                    "template components must be exactly {expected:?}, got {got:?}"
                )));
            }
        }
        Ok(PromptTemplate { kind, components })
    }

    /// Substitute placeholders and assemble the full prompt. Every `{name}`
    /// must resolve; rendering fails rather than emitting a partial prompt,
    /// and fails when the result exceeds `budget` characters.
    pub fn render(&self, vars: &BTreeMap<&str, String>, budget: usize) -> Result<String> {
        let mut out = String::new();
        for (name, body) in &self.components {
            out.push_str("### ");
            out.push_str(name);
            out.push('\n');
            out.push_str(&substitute(body, vars)?);
            out.push_str("\n\n");
        }
        let rendered = out.trim_end().to_string();
        if rendered.chars().count() > budget {
            return Err(ZfuzzError::Template(format!(
                "rendered prompt is {} characters, budget is {budget}",
                rendered.chars().count()
            )));
        }
        Ok(rendered)
    }
}

/// Replace `{name}` placeholders from `vars`; an unresolved placeholder is a
/// template error.
pub fn substitute(body: &str, vars: &BTreeMap<&str, String>) -> Result<String> {
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '{' {
            out.push(c);
            continue;
        }
        let mut name = String::new();
        let mut closed = false;
        for n in chars.by_ref() {
            if n == '}' {
                closed = true;
                break;
            }
            name.push(n);
        }
        if !closed {
            return Err(ZfuzzError::Template(format!(
                "unterminated placeholder '{{{name}'"
            )));
        }
        match vars.get(name.as_str()) {
            Some(value) => out.push_str(value),
            None => {
                return Err(ZfuzzError::Template(format!(
                    "placeholder '{{{name}}}' has no source field"
                )))
            }
        }
    }
    Ok(out)
}

/// All template resources: structured templates, the minimal ablation
/// template, half-mutation instruction texts, and the full-mutation lexicon,
/// constraint, and defect-pattern lists.
#[derive(Debug, Clone)]
pub struct TemplateStore {
    analysis: PromptTemplate,
    seedgen: PromptTemplate,
    seedgen_minimal: String,
    half_instructions: BTreeMap<String, String>,
    lexicon: Vec<(String, Vec<String>)>,
    constraints: Vec<String>,
    defect_patterns: Vec<String>,
    pub prompt_budget: usize,
}

const DEFAULT_ANALYSIS: &str = include_str!("../templates/analysis.txt");
const DEFAULT_SEEDGEN: &str = include_str!("../templates/seedgen.txt");
const DEFAULT_SEEDGEN_MINIMAL: &str = include_str!("../templates/seedgen_minimal.txt");
const DEFAULT_HALF_METHOD_AUGMENTATION: &str =
    include_str!("../templates/half_method_augmentation.txt");
const DEFAULT_HALF_PARAM_SUBSTITUTION: &str =
    include_str!("../templates/half_param_substitution.txt");
const DEFAULT_HALF_OPTIMIZE_REFINE: &str = include_str!("../templates/half_optimize_refine.txt");
const DEFAULT_HALF_COMPREHENSIVE: &str = include_str!("../templates/half_comprehensive.txt");
const DEFAULT_LEXICON: &str = include_str!("../templates/lexicon.txt");
const DEFAULT_CONSTRAINTS: &str = include_str!("../templates/constraints.txt");
const DEFAULT_DEFECT_PATTERNS: &str = include_str!("../templates/defect_patterns.txt");

pub const HALF_TEMPLATE_FILES: [&str; 4] = [
    "half_method_augmentation",
    "half_param_substitution",
    "half_optimize_refine",
    "half_comprehensive",
];

impl TemplateStore {
    /// Embedded defaults only.
    pub fn embedded() -> Self {
        Self::from_loader(|_| None).expect("embedded templates must be well formed")
    }

    /// Load from a directory, falling back to the embedded default for any
    /// missing file. Files are named `<key>.txt`.
    pub fn load(dir: Option<&Path>) -> Result<Self> {
        match dir {
            None => Ok(Self::embedded()),
            Some(d) => {
                if !d.is_dir() {
                    return Err(ZfuzzError::config(format!(
                        "template directory {} does not exist",
                        d.display()
                    )));
                }
                Self::from_loader(|key| {
                    let path = d.join(format!("{key}.txt"));
                    std::fs::read_to_string(path).ok()
                })
            }
        }
    }

    fn from_loader(load: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let text = |key: &str, default: &str| load(key).unwrap_or_else(|| default.to_string());

        let analysis = PromptTemplate::parse(
            TemplateKind::Analysis,
            &text("analysis", DEFAULT_ANALYSIS),
            Some(&ANALYSIS_COMPONENTS),
        )?;
        let seedgen = PromptTemplate::parse(
            TemplateKind::Seedgen,
            &text("seedgen", DEFAULT_SEEDGEN),
            Some(&SEEDGEN_COMPONENTS),
        )?;
        let seedgen_minimal = text("seedgen_minimal", DEFAULT_SEEDGEN_MINIMAL)
            .trim()
            .to_string();
        if seedgen_minimal.is_empty() {
            return Err(ZfuzzError::Template("minimal template is empty".into()));
        }

        let mut half_instructions = BTreeMap::new();
        for (key, default) in [
            ("half_method_augmentation", DEFAULT_HALF_METHOD_AUGMENTATION),
            ("half_param_substitution", DEFAULT_HALF_PARAM_SUBSTITUTION),
            ("half_optimize_refine", DEFAULT_HALF_OPTIMIZE_REFINE),
            ("half_comprehensive", DEFAULT_HALF_COMPREHENSIVE),
        ] {
            let body = text(key, default).trim().to_string();
            if body.is_empty() {
                return Err(ZfuzzError::Template(format!("{key} template is empty")));
            }
            half_instructions.insert(key.to_string(), body);
        }

        let lexicon = parse_lexicon(&text("lexicon", DEFAULT_LEXICON))?;
        let constraints = parse_list(&text("constraints", DEFAULT_CONSTRAINTS));
        let defect_patterns = parse_list(&text("defect_patterns", DEFAULT_DEFECT_PATTERNS));
        if constraints.is_empty() {
            return Err(ZfuzzError::Template("constraint list is empty".into()));
        }
        if defect_patterns.is_empty() {
            return Err(ZfuzzError::Template("defect pattern list is empty".into()));
        }

        Ok(TemplateStore {
            analysis,
            seedgen,
            seedgen_minimal,
            half_instructions,
            lexicon,
            constraints,
            defect_patterns,
            prompt_budget: DEFAULT_PROMPT_BUDGET,
        })
    }

    pub fn analysis(&self) -> &PromptTemplate {
        &self.analysis
    }

    pub fn seedgen(&self) -> &PromptTemplate {
        &self.seedgen
    }

    /// One-line template used when prompt engineering is ablated off.
    pub fn seedgen_minimal(&self) -> &str {
        &self.seedgen_minimal
    }

    pub fn half_instruction(&self, key: &str) -> Result<&str> {
        self.half_instructions
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| ZfuzzError::Template(format!("no half-mutation template '{key}'")))
    }

    pub fn lexicon(&self) -> &[(String, Vec<String>)] {
        &self.lexicon
    }

    pub fn constraints(&self) -> &[String] {
        &self.constraints
    }

    pub fn defect_patterns(&self) -> &[String] {
        &self.defect_patterns
    }
}

/// Lexicon lines are `keyword -> replacement | replacement | ...`.
fn parse_lexicon(text: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (kw, rest) = line.split_once("->").ok_or_else(|| {
            ZfuzzError::Template(format!("lexicon line missing '->': {line:?}"))
        })?;
        let keyword = kw.trim().to_string();
        let replacements: Vec<String> = rest
            .split('|')
            .map(|r| r.trim().to_string())
            .filter(|r| !r.is_empty() && *r != keyword)
            .collect();
        if keyword.is_empty() || replacements.is_empty() {
            return Err(ZfuzzError::Template(format!(
                "lexicon line needs a keyword and at least one distinct replacement: {line:?}"
            )));
        }
        out.push((keyword, replacements));
    }
    if out.is_empty() {
        return Err(ZfuzzError::Template("lexicon is empty".into()));
    }
    Ok(out)
}

fn parse_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_string())
        .collect()
}
