//! Seed bank: stores code seeds with status and round counters, deduplicates
//! by canonical source, and schedules seeds success-first / FIFO-within-class.
//!
//! `next_seed` consumes from the scheduling queue; drawn seeds stay in the
//! bank as records (for lineage and the transcript archive) and re-enter the
//! queue only when the campaign explicitly requeues them.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::backend::{GenerationRequest, ModelBackend};
use crate::error::{Result, ZfuzzError};
use crate::prompt_bank::{PromptBank, PromptId, SeedId};
use crate::scorer::MutationScore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStatus {
    Fresh,
    Success,
    Failed,
    Retired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSeed {
    pub id: SeedId,
    pub source: String,
    pub prompt_id: PromptId,
    pub mutation_round: u32,
    pub consecutive_failures: u32,
    pub status: SeedStatus,
    pub score: Option<MutationScore>,
}

/// Anomalous-outcome registry entry (Alg. 2's SuccessSeeds).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessEntry {
    pub prompt_id: PromptId,
    pub seed_id: SeedId,
    pub outcome_signature: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AddOutcome {
    Added(SeedId),
    /// Canonical source already stored; carries the existing seed's id.
    Duplicate(SeedId),
}

impl AddOutcome {
    pub fn added_id(&self) -> Option<&SeedId> {
        match self {
            AddOutcome::Added(id) => Some(id),
            AddOutcome::Duplicate(_) => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BankEntry {
    seed: CodeSeed,
    superseded: bool,
}

/// Canonical form used for duplicate detection: comments stripped
/// (string-quoting aware), every line trimmed, whitespace runs collapsed to
/// single spaces, blank lines dropped. Deterministic and idempotent; not
/// meant to be parseable.
pub fn normalize_source(source: &str) -> String {
    let mut lines = Vec::new();
    for raw in source.lines() {
        let no_comment = strip_comment_outside_strings(raw);
        let collapsed = no_comment.split_whitespace().collect::<Vec<_>>().join(" ");
        if !collapsed.is_empty() {
            lines.push(collapsed);
        }
    }
    lines.join("\n")
}

fn strip_comment_outside_strings(line: &str) -> String {
    let mut out = String::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in line.chars() {
        match quote {
            Some(q) => {
                out.push(c);
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
            }
            None => {
                if c == '#' {
                    break;
                }
                if c == '"' || c == '\'' {
                    quote = Some(c);
                }
                out.push(c);
            }
        }
    }
    out
}

#[derive(Debug, Default)]
pub struct SeedBank {
    entries: IndexMap<SeedId, BankEntry>,
    canonical: BTreeMap<String, SeedId>,
    success_queue: VecDeque<SeedId>,
    normal_queue: VecDeque<SeedId>,
    next_id: u64,
    pub duplicate_count: u64,
}

/// Fields of a seed being inserted; the bank assigns the id.
#[derive(Debug, Clone)]
pub struct NewSeed {
    pub source: String,
    pub prompt_id: PromptId,
    pub mutation_round: u32,
    pub consecutive_failures: u32,
    pub status: SeedStatus,
}

impl NewSeed {
    pub fn fresh(source: String, prompt_id: PromptId) -> Self {
        NewSeed {
            source,
            prompt_id,
            mutation_round: 0,
            consecutive_failures: 0,
            status: SeedStatus::Fresh,
        }
    }
}

impl SeedBank {
    pub fn new() -> Self {
        Self::default()
    }

    fn mint_id(&mut self) -> SeedId {
        self.next_id += 1;
        SeedId(format!("s{:06}", self.next_id))
    }

    /// Store a seed unless its canonical source is already present.
    /// Duplicates bump the duplicate counter and leave the bank unchanged.
    pub fn add_seed(&mut self, new: NewSeed) -> Result<AddOutcome> {
        self.add_seed_inner(new, true)
    }

    /// Store without scheduling; the caller queues (or retires) after it has
    /// settled the seed's status.
    pub fn add_seed_unqueued(&mut self, new: NewSeed) -> Result<AddOutcome> {
        self.add_seed_inner(new, false)
    }

    fn add_seed_inner(&mut self, new: NewSeed, enqueue: bool) -> Result<AddOutcome> {
        if new.source.trim().is_empty() {
            return Err(ZfuzzError::invariant("seed source must be non-empty"));
        }
        let key = normalize_source(&new.source);
        if let Some(existing) = self.canonical.get(&key) {
            self.duplicate_count += 1;
            return Ok(AddOutcome::Duplicate(existing.clone()));
        }
        let id = self.mint_id();
        let seed = CodeSeed {
            id: id.clone(),
            source: new.source,
            prompt_id: new.prompt_id,
            mutation_round: new.mutation_round,
            consecutive_failures: new.consecutive_failures,
            status: new.status,
            score: None,
        };
        self.canonical.insert(key, id.clone());
        let schedulable = seed.status != SeedStatus::Retired;
        let success = seed.status == SeedStatus::Success;
        self.entries.insert(
            id.clone(),
            BankEntry {
                seed,
                superseded: false,
            },
        );
        if enqueue && schedulable {
            if success {
                self.success_queue.push_back(id.clone());
            } else {
                self.normal_queue.push_back(id.clone());
            }
        }
        Ok(AddOutcome::Added(id))
    }

    /// Pop the highest-priority schedulable seed: success-status seeds before
    /// fresh/failed ones, FIFO within each class. Retired and superseded
    /// seeds never come back.
    pub fn next_seed(&mut self) -> Option<CodeSeed> {
        for queue in [&mut self.success_queue, &mut self.normal_queue] {
            while let Some(id) = queue.pop_front() {
                if let Some(entry) = self.entries.get(&id) {
                    if !entry.superseded && entry.seed.status != SeedStatus::Retired {
                        return Some(entry.seed.clone());
                    }
                }
            }
        }
        None
    }

    /// Put a drawn seed back into scheduling (lineage continues after a
    /// fruitless mutation attempt).
    pub fn requeue(&mut self, id: &SeedId) -> Result<()> {
        let entry = self
            .entries
            .get(id)
            .ok_or_else(|| ZfuzzError::invariant(format!("requeue of unknown seed {id}")))?;
        if entry.superseded || entry.seed.status == SeedStatus::Retired {
            return Ok(());
        }
        if entry.seed.status == SeedStatus::Success {
            self.success_queue.push_back(id.clone());
        } else {
            self.normal_queue.push_back(id.clone());
        }
        Ok(())
    }

    /// Replace `old_id` with a mutated successor: the old seed is kept for
    /// the transcript but marked superseded; the new seed inherits the
    /// failure counter and advances the mutation round. A duplicate
    /// successor leaves the old seed in place. The successor is stored
    /// unqueued; schedule it with [`SeedBank::requeue`] once its status is
    /// settled.
    pub fn update_seed(
        &mut self,
        old_id: &SeedId,
        source: String,
        prompt_id: PromptId,
        status: SeedStatus,
        consecutive_failures: u32,
    ) -> Result<AddOutcome> {
        let old = self
            .entries
            .get(old_id)
            .ok_or_else(|| ZfuzzError::invariant(format!("update of unknown seed {old_id}")))?;
        let round = old.seed.mutation_round + 1;
        let outcome = self.add_seed_inner(
            NewSeed {
                source,
                prompt_id,
                mutation_round: round,
                consecutive_failures,
                status,
            },
            false,
        )?;
        if outcome.added_id().is_some() {
            self.entries.get_mut(old_id).unwrap().superseded = true;
        }
        Ok(outcome)
    }

    pub fn get(&self, id: &SeedId) -> Option<&CodeSeed> {
        self.entries.get(id).map(|e| &e.seed)
    }

    pub fn set_status(&mut self, id: &SeedId, status: SeedStatus) -> Result<()> {
        let entry = self
            .entries
            .get_mut(id)
            .ok_or_else(|| ZfuzzError::invariant(format!("unknown seed {id}")))?;
        entry.seed.status = status;
        Ok(())
    }

    pub fn set_consecutive_failures(&mut self, id: &SeedId, value: u32) -> Result<()> {
        let entry = self
            .entries
            .get_mut(id)
            .ok_or_else(|| ZfuzzError::invariant(format!("unknown seed {id}")))?;
        entry.seed.consecutive_failures = value;
        Ok(())
    }

    pub fn set_score(&mut self, id: &SeedId, score: Option<MutationScore>) -> Result<()> {
        let entry = self
            .entries
            .get_mut(id)
            .ok_or_else(|| ZfuzzError::invariant(format!("unknown seed {id}")))?;
        entry.seed.score = score;
        Ok(())
    }

    pub fn mark_retired(&mut self, id: &SeedId) -> Result<()> {
        self.set_status(id, SeedStatus::Retired)
    }

    pub fn is_superseded(&self, id: &SeedId) -> bool {
        self.entries.get(id).map(|e| e.superseded).unwrap_or(false)
    }

    /// Every stored seed, in insertion order (including consumed ones).
    pub fn all_seeds(&self) -> impl Iterator<Item = &CodeSeed> {
        self.entries.values().map(|e| &e.seed)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Count of seeds currently waiting in the scheduling queues.
    pub fn schedulable_len(&self) -> usize {
        let live = |id: &SeedId| {
            self.entries
                .get(id)
                .map(|e| !e.superseded && e.seed.status != SeedStatus::Retired)
                .unwrap_or(false)
        };
        self.success_queue.iter().filter(|id| live(id)).count()
            + self.normal_queue.iter().filter(|id| live(id)).count()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.canonical.clear();
        self.success_queue.clear();
        self.normal_queue.clear();
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        for entry in self.entries.values() {
            serde_json::to_writer(&mut f, &entry.seed)?;
            f.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Load seeds saved with [`save`]; non-retired seeds become schedulable.
    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| {
            ZfuzzError::config(format!("cannot open seed bank {}: {e}", path.display()))
        })?;
        let mut bank = SeedBank::new();
        for (lineno, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let seed: CodeSeed = serde_json::from_str(&line).map_err(|e| {
                ZfuzzError::config(format!(
                    "{}:{}: malformed seed record: {e}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let numeric: u64 = seed
                .id
                .0
                .trim_start_matches('s')
                .parse()
                .unwrap_or(bank.next_id + 1);
            bank.next_id = bank.next_id.max(numeric);
            bank.canonical
                .insert(normalize_source(&seed.source), seed.id.clone());
            if seed.status != SeedStatus::Retired {
                if seed.status == SeedStatus::Success {
                    bank.success_queue.push_back(seed.id.clone());
                } else {
                    bank.normal_queue.push_back(seed.id.clone());
                }
            }
            bank.entries.insert(
                seed.id.clone(),
                BankEntry {
                    seed,
                    superseded: false,
                },
            );
        }
        Ok(bank)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerationStats {
    pub attempted: usize,
    pub added: usize,
    pub duplicates: usize,
    pub failures: usize,
}

/// One initial-generation attempt, for the transcript archive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationLogEntry {
    pub prompt_id: PromptId,
    pub extracted: bool,
    /// Newly added seed or the duplicate's existing id.
    pub seed_id: Option<crate::prompt_bank::SeedId>,
    pub duplicate: bool,
}

/// Populate the seed bank: one generation attempt per stored prompt, code
/// extracted and deduplicated, lineage linked. Generation attempts that
/// yield no code are logged and skipped; a backend transport failure (after
/// its retries) is fatal.
pub fn generate_seeds(
    prompt_bank: &mut PromptBank,
    seed_bank: &mut SeedBank,
    backend: &dyn ModelBackend,
    request_defaults: &GenerationRequest,
) -> Result<(GenerationStats, Vec<GenerationLogEntry>)> {
    let prompts = prompt_bank.get_all_prompts();
    let mut stats = GenerationStats::default();
    let mut log_entries = Vec::with_capacity(prompts.len());
    if prompts.is_empty() {
        log::warn!("prompt bank is empty; nothing to generate");
        return Ok((stats, log_entries));
    }
    for prompt in prompts {
        stats.attempted += 1;
        let request = GenerationRequest {
            prompt_text: prompt.rendered_text.clone(),
            ..request_defaults.clone()
        };
        let result = backend.generate(&request)?;
        let Some(code) = result.extracted_code else {
            log::warn!("prompt {}: no code in model output; skipped", prompt.id);
            stats.failures += 1;
            log_entries.push(GenerationLogEntry {
                prompt_id: prompt.id.clone(),
                extracted: false,
                seed_id: None,
                duplicate: false,
            });
            continue;
        };
        match seed_bank.add_seed(NewSeed::fresh(code, prompt.id.clone()))? {
            AddOutcome::Added(seed_id) => {
                prompt_bank.link_lineage(&prompt.id, &seed_id)?;
                stats.added += 1;
                log_entries.push(GenerationLogEntry {
                    prompt_id: prompt.id.clone(),
                    extracted: true,
                    seed_id: Some(seed_id),
                    duplicate: false,
                });
            }
            AddOutcome::Duplicate(existing) => {
                stats.duplicates += 1;
                log_entries.push(GenerationLogEntry {
                    prompt_id: prompt.id.clone(),
                    extracted: true,
                    seed_id: Some(existing),
                    duplicate: true,
                });
            }
        }
    }
    Ok((stats, log_entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pid(n: u32) -> PromptId {
        PromptId(format!("p{n:06}"))
    }

    #[test]
    fn normalize_strips_comments_and_whitespace() {
        assert_eq!(normalize_source("x=1  # c\n\n"), "x=1");
        assert_eq!(normalize_source("  x = 1\n"), "x = 1");
    }

    #[test]
    fn normalize_equates_indentation_widths() {
        let a = "if x:\n    y = 1\n";
        let b = "if x:\n        y = 1\n";
        assert_eq!(normalize_source(a), normalize_source(b));
    }

    #[test]
    fn normalize_is_idempotent() {
        let src = "x = 1   # comment\n\n\ny    =    2\n";
        let once = normalize_source(src);
        assert_eq!(normalize_source(&once), once);
    }

    #[test]
    fn normalize_keeps_hash_inside_strings() {
        let src = "s = \"a#b\"  # real comment\n";
        assert_eq!(normalize_source(src), "s = \"a#b\"");
    }

    #[test]
    fn add_unique_then_duplicate() {
        let mut bank = SeedBank::new();
        let out = bank
            .add_seed(NewSeed::fresh("x = 1\n".into(), pid(1)))
            .unwrap();
        assert!(matches!(out, AddOutcome::Added(_)));
        let dup = bank
            .add_seed(NewSeed::fresh("x = 1\n".into(), pid(1)))
            .unwrap();
        assert!(matches!(dup, AddOutcome::Duplicate(_)));
        assert_eq!(bank.len(), 1);
        assert_eq!(bank.duplicate_count, 1);
    }

    #[test]
    fn duplicate_after_normalization_only() {
        let mut bank = SeedBank::new();
        bank.add_seed(NewSeed::fresh("x = 1  # one\n".into(), pid(1)))
            .unwrap();
        let dup = bank
            .add_seed(NewSeed::fresh("x   =   1\n".into(), pid(1)))
            .unwrap();
        assert!(matches!(dup, AddOutcome::Duplicate(_)));
    }

    #[test]
    fn success_seeds_drawn_before_fresh() {
        let mut bank = SeedBank::new();
        bank.add_seed(NewSeed::fresh("f = 1\n".into(), pid(1)))
            .unwrap();
        let s = NewSeed {
            source: "s = 1\n".into(),
            prompt_id: pid(1),
            mutation_round: 1,
            consecutive_failures: 0,
            status: SeedStatus::Success,
        };
        let success_id = match bank.add_seed(s).unwrap() {
            AddOutcome::Added(id) => id,
            _ => panic!("expected add"),
        };
        assert_eq!(bank.next_seed().unwrap().id, success_id);
    }

    #[test]
    fn fresh_seeds_fifo_within_class() {
        let mut bank = SeedBank::new();
        let a = bank
            .add_seed(NewSeed::fresh("a = 1\n".into(), pid(1)))
            .unwrap();
        let b = bank
            .add_seed(NewSeed::fresh("b = 1\n".into(), pid(1)))
            .unwrap();
        assert_eq!(&bank.next_seed().unwrap().id, a.added_id().unwrap());
        assert_eq!(&bank.next_seed().unwrap().id, b.added_id().unwrap());
    }

    #[test]
    fn all_retired_yields_empty() {
        let mut bank = SeedBank::new();
        let id = match bank
            .add_seed(NewSeed::fresh("a = 1\n".into(), pid(1)))
            .unwrap()
        {
            AddOutcome::Added(id) => id,
            _ => unreachable!(),
        };
        bank.mark_retired(&id).unwrap();
        assert!(bank.next_seed().is_none());
    }

    #[test]
    fn update_seed_increments_round_and_supersedes() {
        let mut bank = SeedBank::new();
        let old = match bank
            .add_seed(NewSeed::fresh("a = 1\n".into(), pid(1)))
            .unwrap()
        {
            AddOutcome::Added(id) => id,
            _ => unreachable!(),
        };
        let out = bank
            .update_seed(&old, "a = 2\n".into(), pid(2), SeedStatus::Failed, 3)
            .unwrap();
        let new_id = out.added_id().unwrap().clone();
        assert!(bank.is_superseded(&old));
        let new_seed = bank.get(&new_id).unwrap();
        assert_eq!(new_seed.mutation_round, 1);
        assert_eq!(new_seed.consecutive_failures, 3);
        assert_eq!(new_seed.prompt_id, pid(2));
    }

    #[test]
    fn update_unknown_seed_is_fatal() {
        let mut bank = SeedBank::new();
        let err = bank
            .update_seed(
                &SeedId("s999999".into()),
                "x = 1\n".into(),
                pid(1),
                SeedStatus::Fresh,
                0,
            )
            .unwrap_err();
        assert!(matches!(err, ZfuzzError::Invariant(_)));
    }

    #[test]
    fn update_to_duplicate_keeps_old_seed_live() {
        let mut bank = SeedBank::new();
        let old = match bank
            .add_seed(NewSeed::fresh("a = 1\n".into(), pid(1)))
            .unwrap()
        {
            AddOutcome::Added(id) => id,
            _ => unreachable!(),
        };
        let out = bank
            .update_seed(&old, "a = 1\n".into(), pid(1), SeedStatus::Fresh, 0)
            .unwrap();
        assert!(matches!(out, AddOutcome::Duplicate(_)));
        assert!(!bank.is_superseded(&old));
    }

    #[test]
    fn save_load_round_trip_preserves_order_and_counters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seeds.jsonl");
        let mut bank = SeedBank::new();
        for i in 0..4 {
            bank.add_seed(NewSeed::fresh(format!("x = {i}\n"), pid(1)))
                .unwrap();
        }
        bank.save(&path).unwrap();
        let mut loaded = SeedBank::load(&path).unwrap();
        assert_eq!(loaded.len(), 4);
        let first = loaded.next_seed().unwrap();
        assert_eq!(first.source, "x = 0\n");
        // Ids continue from the loaded maximum.
        let next = loaded
            .add_seed(NewSeed::fresh("fresh = 1\n".into(), pid(1)))
            .unwrap();
        assert_eq!(next.added_id().unwrap().0, "s000005");
    }
}
