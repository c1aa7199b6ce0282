//! Deterministic offline backend.
//!
//! Plain generation requests pick a program from a fixed table by hashing
//! (prompt text, rng seed); half-mutation requests embed `@directive` lines
//! that the stub applies mechanically to the fenced input program, so
//! code-level mutation is byte-reproducible without a live model.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{extract_code, GenerationRequest, GenerationResult, ModelBackend};
use crate::error::{Result, ZfuzzError};

pub const DIRECTIVE_PREFIX: &str = "@directive ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubEntry {
    pub program: String,
    /// Whether the program parses under the target grammar.
    pub valid: bool,
    #[serde(default)]
    pub apis: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct StubBackend {
    table: Vec<StubEntry>,
    default_seed: u64,
}

impl StubBackend {
    pub fn new(table: Vec<StubEntry>, default_seed: u64) -> Result<Self> {
        if table.is_empty() {
            return Err(ZfuzzError::config("stub program table is empty"));
        }
        Ok(StubBackend {
            table,
            default_seed,
        })
    }

    /// The program table shipped with the repository.
    pub fn with_shipped_table(default_seed: u64) -> Result<Self> {
        Self::from_table_str(include_str!("../../data/stub_table.jsonl"), default_seed)
    }

    pub fn from_table_str(text: &str, default_seed: u64) -> Result<Self> {
        let mut table = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: StubEntry = serde_json::from_str(line).map_err(|e| {
                ZfuzzError::config(format!("stub table line {}: {e}", lineno + 1))
            })?;
            table.push(entry);
        }
        Self::new(table, default_seed)
    }

    pub fn from_file(path: &Path, default_seed: u64) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| {
            ZfuzzError::config(format!("cannot open stub table {}: {e}", path.display()))
        })?;
        let mut text = String::new();
        for line in std::io::BufReader::new(f).lines() {
            text.push_str(&line?);
            text.push('\n');
        }
        Self::from_table_str(&text, default_seed)
    }

    pub fn table(&self) -> &[StubEntry] {
        &self.table
    }

    /// The table index a given (prompt, seed) pair selects. Exposed so tests
    /// can recompute the schedule independently.
    pub fn table_index(&self, prompt_text: &str, rng_seed: u64) -> usize {
        (fnv1a64(prompt_text, rng_seed) % self.table.len() as u64) as usize
    }
}

impl ModelBackend for StubBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult> {
        let seed = request.rng_seed.unwrap_or(self.default_seed);
        let directives = parse_directives(&request.prompt_text);
        let raw_text = if directives.is_empty() {
            let entry = &self.table[self.table_index(&request.prompt_text, seed)];
            format!("Candidate test program:\n```\n{}\n```", entry.program)
        } else {
            let input = extract_code(&request.prompt_text).ok_or_else(|| {
                ZfuzzError::Backend(
                    "directive request carries no fenced input program".to_string(),
                )
            })?;
            let mut program = input;
            for d in &directives {
                program = apply_directive(&program, d);
            }
            format!("Mutated program:\n```\n{}\n```", program.trim_end())
        };
        let extracted_code = extract_code(&raw_text);
        Ok(GenerationResult {
            raw_text,
            extracted_code,
            latency_ms: 0,
            backend_id: self.id().to_string(),
        })
    }

    fn id(&self) -> &str {
        "stub"
    }

    fn supports_directives(&self) -> bool {
        true
    }
}

/// Stable 64-bit FNV-1a over the prompt bytes and the seed, so stub picks
/// are identical across runs and platforms.
fn fnv1a64(prompt_text: &str, rng_seed: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for byte in prompt_text.bytes().chain(rng_seed.to_le_bytes()) {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Directive {
    /// Append a new function wrapping a canned call to the API, plus one
    /// call site of that function.
    AddMethod(String),
    /// Append a canned call block for the API.
    AddApiCall(String),
    /// Replace the first call site of `old` with `new`.
    SwapApi { old: String, new: String },
    /// Consistently rename user identifiers (suffix `_r`).
    RenameLocals,
}

pub fn parse_directives(prompt: &str) -> Vec<Directive> {
    let mut out = Vec::new();
    for line in prompt.lines() {
        let Some(spec) = line.trim().strip_prefix(DIRECTIVE_PREFIX.trim_end()) else {
            continue;
        };
        let spec = spec.trim();
        let mut parts = spec.split(':');
        match parts.next() {
            Some("add_method") => {
                if let Some(api) = parts.next() {
                    out.push(Directive::AddMethod(api.trim().to_string()));
                }
            }
            Some("add_api_call") => {
                if let Some(api) = parts.next() {
                    out.push(Directive::AddApiCall(api.trim().to_string()));
                }
            }
            Some("swap_api") => {
                if let (Some(old), Some(new)) = (parts.next(), parts.next()) {
                    out.push(Directive::SwapApi {
                        old: old.trim().to_string(),
                        new: new.trim().to_string(),
                    });
                }
            }
            Some("rename_locals") => out.push(Directive::RenameLocals),
            _ => {}
        }
    }
    out
}

/// Render a directive line for embedding in a half-mutation prompt.
pub fn directive_line(directive: &Directive) -> String {
    match directive {
        Directive::AddMethod(api) => format!("{DIRECTIVE_PREFIX}add_method:{api}"),
        Directive::AddApiCall(api) => format!("{DIRECTIVE_PREFIX}add_api_call:{api}"),
        Directive::SwapApi { old, new } => {
            format!("{DIRECTIVE_PREFIX}swap_api:{old}:{new}")
        }
        Directive::RenameLocals => format!("{DIRECTIVE_PREFIX}rename_locals"),
    }
}

pub fn apply_directive(program: &str, directive: &Directive) -> String {
    match directive {
        Directive::AddApiCall(api) => {
            let (setup, call) = canned_call(api);
            let mut out = ensure_trailing_newline(program);
            for line in setup {
                out.push_str(&line);
                out.push('\n');
            }
            out.push_str(&format!("probe_{api} = {call}\n"));
            out
        }
        Directive::AddMethod(api) => {
            let (setup, call) = canned_call(api);
            let mut out = ensure_trailing_newline(program);
            out.push_str(&format!("def extra_{api}():\n"));
            for line in setup {
                out.push_str("    ");
                out.push_str(&line);
                out.push('\n');
            }
            out.push_str(&format!("    return {call}\n"));
            out.push_str(&format!("probe_{api} = extra_{api}()\n"));
            out
        }
        Directive::SwapApi { old, new } => swap_first_call(program, old, new),
        Directive::RenameLocals => rename_locals(program),
    }
}

/// Self-contained snippet exercising one API: setup lines plus a call
/// expression. Arguments are chosen so no planted bug other than the
/// interop one can fire from an appended snippet.
fn canned_call(api: &str) -> (Vec<String>, String) {
    match api {
        "seed" => (vec![], "seed(1)".into()),
        "random_si64" => (vec![], "random_si64(1, 5)".into()),
        "random_float64" => (vec![], "random_float64()".into()),
        "random_ui64" => (vec![], "random_ui64(1, 5)".into()),
        "randint" => (vec![], "randint(1, 5)".into()),
        "rand" => (vec![], "rand()".into()),
        "sort" => (vec!["sortable = [3, 1, 2]".into()], "sort(sortable)".into()),
        "sum" => (vec![], "sum([1, 2, 3])".into()),
        "min" => (vec![], "min(1, 2)".into()),
        "max" => (vec![], "max(1, 2)".into()),
        "abs" => (vec![], "abs(-5)".into()),
        "len" => (vec![], "len([1, 2, 3])".into()),
        "append" => (
            vec!["growable = [1, 2]".into()],
            "append(growable, 3)".into(),
        ),
        "pop" => (vec!["shrinkable = [1, 2]".into()], "pop(shrinkable)".into()),
        "parse_int" => (vec![], "parse_int(\"7\")".into()),
        "sqrt" => (vec![], "sqrt(4)".into()),
        "pow" => (vec![], "pow(2, 3)".into()),
        "clamp" => (vec![], "clamp(5, 1, 3)".into()),
        "py_import" => (vec![], "py_import(\"numpy\")".into()),
        "np_array" => (vec![], "np_array([1, 2])".into()),
        "np_add" => (
            vec![],
            "np_add(np_array([1, 2]), np_array([3, 4]))".into(),
        ),
        "np_sub" => (
            vec![],
            "np_sub(np_array([5, 6]), np_array([1, 2]))".into(),
        ),
        other => (vec![], format!("{other}()")),
    }
}

fn ensure_trailing_newline(program: &str) -> String {
    let mut out = program.to_string();
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out
}

/// Replace the first call site `old(` with `new(`, respecting identifier
/// boundaries. A program without such a call is returned unchanged.
fn swap_first_call(program: &str, old: &str, new: &str) -> String {
    let bytes: Vec<char> = program.chars().collect();
    let pattern: Vec<char> = old.chars().collect();
    let mut i = 0;
    while i + pattern.len() < bytes.len() {
        let matches = bytes[i..i + pattern.len()] == pattern[..]
            && bytes.get(i + pattern.len()) == Some(&'(')
            && (i == 0 || (!bytes[i - 1].is_ascii_alphanumeric() && bytes[i - 1] != '_'));
        if matches {
            let mut out: String = bytes[..i].iter().collect();
            out.push_str(new);
            out.extend(&bytes[i + pattern.len()..]);
            return out;
        }
        i += 1;
    }
    program.to_string()
}

const KEYWORDS: [&str; 21] = [
    "def", "if", "elif", "else", "while", "for", "in", "range", "return", "break", "continue",
    "pass", "and", "or", "not", "True", "False", "None", "print", "from", "import",
];

const BUILTINS: [&str; 22] = [
    "seed",
    "random_si64",
    "random_float64",
    "random_ui64",
    "randint",
    "rand",
    "sort",
    "sum",
    "min",
    "max",
    "abs",
    "len",
    "append",
    "pop",
    "parse_int",
    "sqrt",
    "pow",
    "clamp",
    "py_import",
    "np_array",
    "np_add",
    "np_sub",
];

/// Suffix every user identifier with `_r`, consistently, leaving keywords,
/// builtins, strings, and comments untouched. Semantics-preserving because
/// the rename is total over user names.
fn rename_locals(program: &str) -> String {
    let keywords: BTreeSet<&str> = KEYWORDS.iter().copied().collect();
    let builtins: BTreeSet<&str> = BUILTINS.iter().copied().collect();
    let mut out = String::with_capacity(program.len() + 16);
    let chars: Vec<char> = program.chars().collect();
    let mut i = 0;
    let mut quote: Option<char> = None;
    let mut in_comment = false;
    while i < chars.len() {
        let c = chars[i];
        if in_comment {
            out.push(c);
            if c == '\n' {
                in_comment = false;
            }
            i += 1;
            continue;
        }
        if let Some(q) = quote {
            out.push(c);
            if c == '\\' && i + 1 < chars.len() {
                out.push(chars[i + 1]);
                i += 2;
                continue;
            }
            if c == q {
                quote = None;
            }
            i += 1;
            continue;
        }
        match c {
            '#' => {
                in_comment = true;
                out.push(c);
                i += 1;
            }
            '"' | '\'' => {
                quote = Some(c);
                out.push(c);
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                out.push_str(&word);
                if !keywords.contains(word.as_str())
                    && !builtins.contains(word.as_str())
                    && !word.ends_with("_r")
                {
                    out.push_str("_r");
                }
            }
            c => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_table() -> Vec<StubEntry> {
        (0..10)
            .map(|i| StubEntry {
                program: format!("x = {i}\nprint(x)"),
                valid: true,
                apis: vec![],
            })
            .collect()
    }

    #[test]
    fn empty_table_is_fatal() {
        assert!(StubBackend::new(vec![], 7).is_err());
    }

    #[test]
    fn same_prompt_same_seed_same_output() {
        let stub = StubBackend::new(tiny_table(), 7).unwrap();
        let req = GenerationRequest {
            prompt_text: "P".into(),
            rng_seed: Some(7),
            ..Default::default()
        };
        let a = stub.generate(&req).unwrap();
        let b = stub.generate(&req).unwrap();
        assert_eq!(a.raw_text, b.raw_text);
        assert!(a.extracted_code.is_some());
    }

    #[test]
    fn ten_distinct_prompts_give_reproducible_multiset() {
        let stub = StubBackend::new(tiny_table(), 7).unwrap();
        let run = || -> Vec<String> {
            (0..10)
                .map(|i| {
                    let req = GenerationRequest {
                        prompt_text: format!("prompt {i}"),
                        rng_seed: Some(7),
                        ..Default::default()
                    };
                    stub.generate(&req).unwrap().extracted_code.unwrap()
                })
                .collect()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn table_index_schedule_is_table_driven() {
        // Independent recomputation of the documented hash schedule matches
        // what generate() serves.
        let stub = StubBackend::new(tiny_table(), 7).unwrap();
        for i in 0..50 {
            let prompt = format!("schedule probe {i}");
            let idx = stub.table_index(&prompt, 7);
            let req = GenerationRequest {
                prompt_text: prompt,
                rng_seed: Some(7),
                ..Default::default()
            };
            let got = stub.generate(&req).unwrap().extracted_code.unwrap();
            assert_eq!(got, stub.table()[idx].program);
        }
    }

    #[test]
    fn invalid_rate_over_thousand_calls_matches_schedule_count() {
        // Table with 1 invalid entry in 50 (2%). The count of invalid
        // outputs over 1000 distinct prompts at a fixed seed is dictated by
        // the hash schedule; recompute it independently and compare.
        let mut table = Vec::new();
        for i in 0..50 {
            table.push(StubEntry {
                program: if i == 13 {
                    "def broken(:".to_string()
                } else {
                    format!("v = {i}")
                },
                valid: i != 13,
                apis: vec![],
            });
        }
        let stub = StubBackend::new(table, 42).unwrap();
        let mut expected = 0usize;
        let mut observed = 0usize;
        for i in 0..1000 {
            let prompt = format!("invalid-rate probe {i}");
            if !stub.table()[stub.table_index(&prompt, 42)].valid {
                expected += 1;
            }
            let req = GenerationRequest {
                prompt_text: prompt,
                rng_seed: Some(42),
                ..Default::default()
            };
            let code = stub.generate(&req).unwrap().extracted_code.unwrap();
            if crate::lang::parse(&code).is_err() {
                observed += 1;
            }
        }
        assert_eq!(observed, expected);
        // Frozen from the schedule itself: this seed and prompt family hit
        // the invalid entry 24 times out of 1000.
        assert_eq!(observed, 24);
    }

    #[test]
    fn add_api_call_directive_appends_one_call() {
        let stub = StubBackend::new(tiny_table(), 7).unwrap();
        let prompt = format!(
            "instruction\n{}\n```\nx = 1\n```\n",
            directive_line(&Directive::AddApiCall("sort".into()))
        );
        let req = GenerationRequest {
            prompt_text: prompt,
            rng_seed: Some(7),
            ..Default::default()
        };
        let code = stub.generate(&req).unwrap().extracted_code.unwrap();
        assert!(code.starts_with("x = 1\n"));
        assert!(code.contains("sort(sortable)"));
        crate::lang::parse(&code).unwrap();
    }

    #[test]
    fn add_method_directive_adds_function_and_call() {
        let program = "x = 1";
        let out = apply_directive(program, &Directive::AddMethod("len".into()));
        assert!(out.contains("def extra_len():"));
        assert!(out.contains("probe_len = extra_len()"));
        crate::lang::parse(&out).unwrap();
    }

    #[test]
    fn swap_api_replaces_first_call_only() {
        let program = "a = len([1])\nb = len([2])\n";
        let out = apply_directive(
            program,
            &Directive::SwapApi {
                old: "len".into(),
                new: "sum".into(),
            },
        );
        assert_eq!(out, "a = sum([1])\nb = len([2])\n");
    }

    #[test]
    fn swap_api_respects_identifier_boundaries() {
        let program = "varlen(1)\nx = len([1])\n";
        let out = apply_directive(
            program,
            &Directive::SwapApi {
                old: "len".into(),
                new: "sum".into(),
            },
        );
        assert_eq!(out, "varlen(1)\nx = sum([1])\n");
    }

    #[test]
    fn swap_api_without_match_returns_program_unchanged() {
        let program = "x = 1\n";
        let out = apply_directive(
            program,
            &Directive::SwapApi {
                old: "sort".into(),
                new: "sum".into(),
            },
        );
        assert_eq!(out, program);
    }

    #[test]
    fn rename_locals_is_consistent_and_preserves_builtins() {
        let program = "total = 0\nfor i in range(3):\n    total = total + len([i])\nprint(total)\n";
        let out = apply_directive(program, &Directive::RenameLocals);
        assert!(out.contains("total_r = 0"));
        assert!(out.contains("total_r = total_r + len([i_r])"));
        assert!(out.contains("print(total_r)"));
        assert!(!out.contains("len_r"));
        crate::lang::parse(&out).unwrap();
    }

    #[test]
    fn rename_locals_leaves_strings_alone() {
        let out = apply_directive("s = \"total\"\n", &Directive::RenameLocals);
        assert_eq!(out, "s_r = \"total\"\n");
    }

    #[test]
    fn directive_without_input_program_is_backend_error() {
        let stub = StubBackend::new(tiny_table(), 7).unwrap();
        let req = GenerationRequest {
            prompt_text: format!("{}", directive_line(&Directive::RenameLocals)),
            ..Default::default()
        };
        assert!(matches!(
            stub.generate(&req),
            Err(ZfuzzError::Backend(_))
        ));
    }

    #[test]
    fn canned_calls_all_parse() {
        for api in BUILTINS {
            let out = apply_directive("x = 1", &Directive::AddApiCall(api.into()));
            crate::lang::parse(&out)
                .unwrap_or_else(|e| panic!("canned call for {api} must parse: {e}"));
        }
    }
}
