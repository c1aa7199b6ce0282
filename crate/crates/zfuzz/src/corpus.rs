//! Corpus ingestion: loads pre-fetched bug reports and syntax documentation,
//! applies the cleaning rules, and exports the two fine-tune dataset files.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZfuzzError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugReportRecord {
    pub id: String,
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub code_blocks: Vec<String>,
    #[serde(default)]
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxRecord {
    pub api_name: String,
    pub description: String,
    pub snippet: String,
    /// Set when the snippet is known to parse under the target grammar.
    #[serde(default)]
    pub validated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Grammar,
    Bug,
}

/// One fine-tune training sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneSample {
    pub kind: SampleKind,
    pub prompt_text: String,
    pub completion_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Bugs,
    Syntax,
}

/// Either record stream, depending on the requested kind.
#[derive(Debug)]
pub enum LoadedRecords {
    Bugs(Vec<BugReportRecord>),
    Syntax(Vec<SyntaxRecord>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadSummary {
    pub loaded: usize,
    pub skipped: usize,
}

/// Load line-delimited records. Malformed lines are counted and skipped;
/// a missing file or zero parseable records is fatal.
pub fn load_records(path: &Path, kind: RecordKind) -> Result<(LoadedRecords, LoadSummary)> {
    let file = std::fs::File::open(path).map_err(|e| {
        ZfuzzError::config(format!("cannot open corpus file {}: {e}", path.display()))
    })?;
    let mut summary = LoadSummary::default();
    let mut bugs = Vec::new();
    let mut syntax = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ok = match kind {
            RecordKind::Bugs => match serde_json::from_str::<BugReportRecord>(&line) {
                Ok(r) => {
                    bugs.push(r);
                    true
                }
                Err(_) => false,
            },
            RecordKind::Syntax => match serde_json::from_str::<SyntaxRecord>(&line) {
                Ok(r) => {
                    syntax.push(r);
                    true
                }
                Err(_) => false,
            },
        };
        if ok {
            summary.loaded += 1;
        } else {
            summary.skipped += 1;
        }
    }
    if summary.loaded == 0 {
        return Err(ZfuzzError::config(format!(
            "zero parseable records in {}",
            path.display()
        )));
    }
    let records = match kind {
        RecordKind::Bugs => LoadedRecords::Bugs(bugs),
        RecordKind::Syntax => LoadedRecords::Syntax(syntax),
    };
    Ok((records, summary))
}

/// Cleaning configuration. The relevance filter keeps records whose labels
/// or body mention at least one keyword (case-insensitive); the default
/// list is the target language's name plus its file extension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningConfig {
    pub keywords: Vec<String>,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            keywords: vec!["minilang".to_string(), ".ml".to_string()],
        }
    }
}

impl CleaningConfig {
    pub fn for_language(name: &str, extension: &str) -> Self {
        CleaningConfig {
            keywords: vec![name.to_string(), extension.to_string()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionRule {
    Relevance,
    NoCode,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub record_id: String,
    pub rule: RejectionRule,
}

/// Clean bug reports: drop irrelevant records, records without an
/// extractable code block, and duplicates by normalized body. Never fails;
/// each removal is logged with the rule that fired.
pub fn clean_records(
    records: &[BugReportRecord],
    config: &CleaningConfig,
) -> (Vec<BugReportRecord>, Vec<Rejection>) {
    let mut kept = Vec::new();
    let mut rejections = Vec::new();
    let mut seen_bodies: BTreeSet<String> = BTreeSet::new();
    for record in records {
        if !is_relevant(record, config) {
            rejections.push(Rejection {
                record_id: record.id.clone(),
                rule: RejectionRule::Relevance,
            });
            continue;
        }
        let mut cleaned = record.clone();
        cleaned.code_blocks.retain(|b| !b.trim().is_empty());
        if cleaned.code_blocks.is_empty() {
            rejections.push(Rejection {
                record_id: record.id.clone(),
                rule: RejectionRule::NoCode,
            });
            continue;
        }
        let body_key = normalize_body(&record.body);
        if !seen_bodies.insert(body_key) {
            rejections.push(Rejection {
                record_id: record.id.clone(),
                rule: RejectionRule::Duplicate,
            });
            continue;
        }
        kept.push(cleaned);
    }
    if kept.is_empty() {
        log::warn!("cleaning rejected every record");
    }
    (kept, rejections)
}

/// Clean syntax records: drop entries with an empty API name or snippet,
/// then deduplicate by snippet text.
pub fn clean_syntax_records(records: &[SyntaxRecord]) -> (Vec<SyntaxRecord>, Vec<Rejection>) {
    let mut kept = Vec::new();
    let mut rejections = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for record in records {
        if record.api_name.trim().is_empty() || record.snippet.trim().is_empty() {
            rejections.push(Rejection {
                record_id: record.api_name.clone(),
                rule: RejectionRule::NoCode,
            });
            continue;
        }
        if !seen.insert(normalize_body(&record.snippet)) {
            rejections.push(Rejection {
                record_id: record.api_name.clone(),
                rule: RejectionRule::Duplicate,
            });
            continue;
        }
        kept.push(record.clone());
    }
    (kept, rejections)
}

fn is_relevant(record: &BugReportRecord, config: &CleaningConfig) -> bool {
    let haystacks: Vec<String> = record
        .labels
        .iter()
        .cloned()
        .chain([record.body.clone(), record.title.clone()])
        .map(|s| s.to_lowercase())
        .collect();
    config.keywords.iter().any(|kw| {
        let kw = kw.to_lowercase();
        haystacks.iter().any(|h| h.contains(&kw))
    })
}

/// Duplicate-detection key: body with whitespace collapsed and case folded.
fn normalize_body(body: &str) -> String {
    body.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExportSummary {
    pub grammar_samples: usize,
    pub bug_samples: usize,
}

/// Export the two fine-tune dataset files: `grammar.jsonl` (one sample per
/// syntax record: API name plus grammar description in the prompt, snippet
/// as the completion) and `bugs.jsonl` (bug description plus triggering API
/// in the prompt, code block as the completion).
pub fn export_finetune_sets(
    syntax: &[SyntaxRecord],
    bugs: &[BugReportRecord],
    out_dir: &Path,
) -> Result<ExportSummary> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| ZfuzzError::config(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut summary = ExportSummary::default();

    let grammar_path = out_dir.join("grammar.jsonl");
    let mut grammar_file = std::fs::File::create(&grammar_path)
        .map_err(|e| ZfuzzError::config(format!("cannot write {}: {e}", grammar_path.display())))?;
    for record in syntax {
        let sample = FinetuneSample {
            kind: SampleKind::Grammar,
            prompt_text: format!(
                "API: {}\nGrammar: {}\nWrite a program exercising this API.",
                record.api_name, record.description
            ),
            completion_text: record.snippet.clone(),
        };
        serde_json::to_writer(&mut grammar_file, &sample)?;
        grammar_file.write_all(b"\n")?;
        summary.grammar_samples += 1;
    }

    let bugs_path = out_dir.join("bugs.jsonl");
    let mut bugs_file = std::fs::File::create(&bugs_path)
        .map_err(|e| ZfuzzError::config(format!("cannot write {}: {e}", bugs_path.display())))?;
    for record in bugs {
        let Some(snippet) = record.code_blocks.first() else {
            continue;
        };
        let api = match triggering_api(snippet) {
            Some(api) => api,
            None => {
                log::warn!(
                    "bug record {} has no call-like token; skipped from the bug dataset",
                    record.id
                );
                continue;
            }
        };
        let sample = FinetuneSample {
            kind: SampleKind::Bug,
            prompt_text: format!(
                "Bug: {}\nTriggering API: {}\nWrite a program reproducing this defect.",
                record.title, api
            ),
            completion_text: snippet.clone(),
        };
        serde_json::to_writer(&mut bugs_file, &sample)?;
        bugs_file.write_all(b"\n")?;
        summary.bug_samples += 1;
    }
    if summary.bug_samples == 0 {
        log::warn!("bug dataset written with zero samples");
    }
    Ok(summary)
}

/// First identifier that is immediately followed by `(` — the API a bug
/// snippet exercises. Lexical, so it works on snippets that do not parse.
fn triggering_api(snippet: &str) -> Option<String> {
    let chars: Vec<char> = snippet.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_ascii_alphabetic() || chars[i] == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            if chars.get(i) == Some(&'(') {
                let word: String = chars[start..i].iter().collect();
                const NON_API: [&str; 4] = ["print", "range", "if", "while"];
                if !NON_API.contains(&word.as_str()) {
                    return Some(word);
                }
            }
        } else {
            i += 1;
        }
    }
    None
}

/// Parse an exported dataset file back into samples (round-trip check and
/// downstream consumers).
pub fn load_finetune_samples(path: &Path) -> Result<Vec<FinetuneSample>> {
    let file = std::fs::File::open(path)
        .map_err(|e| ZfuzzError::config(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: FinetuneSample = serde_json::from_str(&line).map_err(|e| {
            ZfuzzError::config(format!(
                "{}:{}: malformed sample: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        out.push(sample);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bug(id: &str, body: &str, labels: &[&str], code: &[&str]) -> BugReportRecord {
        BugReportRecord {
            id: id.into(),
            title: format!("issue {id}"),
            body: body.into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            code_blocks: code.iter().map(|s| s.to_string()).collect(),
            version: "v1".into(),
        }
    }

    fn write_lines(dir: &Path, name: &str, lines: &[String]) -> std::path::PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, lines.join("\n")).unwrap();
        path
    }

    #[test]
    fn load_three_well_formed_bug_lines() {
        let dir = tempfile::tempdir().unwrap();
        let lines: Vec<String> = (0..3)
            .map(|i| {
                serde_json::to_string(&bug(
                    &format!("r{i}"),
                    "minilang sort bug",
                    &["minilang"],
                    &["sort([2, 1])"],
                ))
                .unwrap()
            })
            .collect();
        let path = write_lines(dir.path(), "bugs.jsonl", &lines);
        let (records, summary) = load_records(&path, RecordKind::Bugs).unwrap();
        assert_eq!(summary.loaded, 3);
        assert_eq!(summary.skipped, 0);
        match records {
            LoadedRecords::Bugs(v) => assert_eq!(v.len(), 3),
            _ => panic!("wrong record kind"),
        }
    }

    #[test]
    fn truncated_line_is_skipped_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let good = serde_json::to_string(&bug("r1", "minilang", &[], &["x = 1"])).unwrap();
        let lines = vec![
            good.clone(),
            good[..good.len() / 2].to_string(),
            serde_json::to_string(&bug("r2", "minilang", &[], &["y = 2"])).unwrap(),
        ];
        let path = write_lines(dir.path(), "bugs.jsonl", &lines);
        let (_, summary) = load_records(&path, RecordKind::Bugs).unwrap();
        assert_eq!(summary.loaded, 2);
        assert_eq!(summary.skipped, 1);
    }

    #[test]
    fn empty_file_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(dir.path(), "bugs.jsonl", &[]);
        let err = load_records(&path, RecordKind::Bugs).unwrap_err();
        assert!(matches!(err, ZfuzzError::Config(_)));
    }

    #[test]
    fn missing_file_is_fatal() {
        let err = load_records(Path::new("/no/such/file.jsonl"), RecordKind::Bugs).unwrap_err();
        assert!(matches!(err, ZfuzzError::Config(_)));
    }

    #[test]
    fn relevance_filter_rejects_off_topic_records() {
        let records = vec![
            bug("keep", "minilang crash on sort", &[], &["sort([1, 1])"]),
            bug("drop", "python only problem", &["python only"], &["x = 1"]),
        ];
        let (kept, rejected) = clean_records(&records, &CleaningConfig::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "keep");
        assert_eq!(rejected.len(), 1);
        assert_eq!(rejected[0].record_id, "drop");
        assert_eq!(rejected[0].rule, RejectionRule::Relevance);
    }

    #[test]
    fn record_without_code_block_is_rejected() {
        let records = vec![bug("r1", "minilang bug", &[], &[])];
        let (kept, rejected) = clean_records(&records, &CleaningConfig::default());
        assert!(kept.is_empty());
        assert_eq!(rejected[0].rule, RejectionRule::NoCode);
    }

    #[test]
    fn byte_identical_bodies_deduplicate() {
        let records = vec![
            bug("r1", "minilang sort bug", &[], &["sort([1])"]),
            bug("r2", "minilang sort bug", &[], &["sort([2])"]),
        ];
        let (kept, rejected) = clean_records(&records, &CleaningConfig::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(rejected[0].rule, RejectionRule::Duplicate);
    }

    #[test]
    fn dedup_key_collapses_whitespace_and_case() {
        let records = vec![
            bug("r1", "MiniLang  Sort   Bug", &[], &["sort([1])"]),
            bug("r2", "minilang sort bug", &[], &["sort([2])"]),
        ];
        let (kept, _) = clean_records(&records, &CleaningConfig::default());
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn cleaning_is_idempotent() {
        let records = vec![
            bug("r1", "minilang a", &[], &["x = 1"]),
            bug("r2", "irrelevant", &[], &["y = 2"]),
            bug("r3", "minilang a", &[], &["z = 3"]),
            bug("r4", "minilang b", &[], &[]),
        ];
        let config = CleaningConfig::default();
        let (once, log1) = clean_records(&records, &config);
        let (twice, log2) = clean_records(&once, &config);
        assert_eq!(once, twice);
        assert!(log2.is_empty());
        assert_eq!(log1.len() + once.len(), records.len());
    }

    #[test]
    fn export_counts_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let syntax = vec![
            SyntaxRecord {
                api_name: "sort".into(),
                description: "sorts a list in place".into(),
                snippet: "xs = [2, 1]\nsort(xs)".into(),
                validated: true,
            },
            SyntaxRecord {
                api_name: "len".into(),
                description: "length of a collection".into(),
                snippet: "n = len([1, 2])".into(),
                validated: true,
            },
        ];
        let bugs = vec![bug(
            "r1",
            "minilang sort hangs",
            &["minilang"],
            &["sort([2, 2])"],
        )];
        let summary = export_finetune_sets(&syntax, &bugs, dir.path()).unwrap();
        assert_eq!(summary.grammar_samples, 2);
        assert_eq!(summary.bug_samples, 1);

        let grammar = load_finetune_samples(&dir.path().join("grammar.jsonl")).unwrap();
        assert_eq!(grammar.len(), 2);
        assert!(grammar[0].prompt_text.contains("sort"));
        assert_eq!(grammar[0].completion_text, "xs = [2, 1]\nsort(xs)");

        let bug_samples = load_finetune_samples(&dir.path().join("bugs.jsonl")).unwrap();
        assert_eq!(bug_samples.len(), 1);
        assert!(bug_samples[0].prompt_text.contains("sort"));
    }

    #[test]
    fn export_zero_bug_records_writes_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let syntax = vec![SyntaxRecord {
            api_name: "abs".into(),
            description: "absolute value".into(),
            snippet: "x = abs(-1)".into(),
            validated: true,
        }];
        let summary = export_finetune_sets(&syntax, &[], dir.path()).unwrap();
        assert_eq!(summary.bug_samples, 0);
        let samples = load_finetune_samples(&dir.path().join("bugs.jsonl")).unwrap();
        assert!(samples.is_empty());
    }

    #[test]
    fn triggering_api_picks_first_call() {
        assert_eq!(
            triggering_api("x = 1\ny = parse_int(\"+1\")\nsort(xs)"),
            Some("parse_int".to_string())
        );
        assert_eq!(triggering_api("x = 1"), None);
        // print is language syntax, not an API.
        assert_eq!(triggering_api("print(sort(xs))"), Some("sort".to_string()));
    }

    #[test]
    fn syntax_cleaning_drops_empty_and_duplicate_snippets() {
        let records = vec![
            SyntaxRecord {
                api_name: "sort".into(),
                description: "d".into(),
                snippet: "sort([2, 1])".into(),
                validated: false,
            },
            SyntaxRecord {
                api_name: "".into(),
                description: "d".into(),
                snippet: "x = 1".into(),
                validated: false,
            },
            SyntaxRecord {
                api_name: "sort2".into(),
                description: "d".into(),
                snippet: "sort([2,  1])".into(),
                validated: false,
            },
        ];
        let (kept, rejected) = clean_syntax_records(&records);
        assert_eq!(kept.len(), 1);
        assert_eq!(rejected.len(), 2);
        assert_eq!(rejected[0].rule, RejectionRule::NoCode);
        assert_eq!(rejected[1].rule, RejectionRule::Duplicate);
    }
}
