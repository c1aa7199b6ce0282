//! Replayable campaign transcript: a line-delimited event log carrying
//! everything metrics need (generations, executions, mutations, bugs, and
//! the final bank contents).
//!
//! Events carry a logical sequence number rather than wall-clock time so two
//! runs of the same configuration produce byte-identical files. For the same
//! reason the recorded outcome omits the measured duration.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZfuzzError};
use crate::executor::{ExecutionOutcome, OutcomeKind};
use crate::mutation::MutationLevel;
use crate::prompt_bank::{PromptId, PromptSeed, SeedId};
use crate::scorer::MutationScore;
use crate::seed_bank::CodeSeed;

/// Campaign action decided per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    RegisterBug,
    HalfMutate,
    FullMutate,
    Retire,
    None,
}

/// Execution result as recorded in the transcript: deterministic fields
/// only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub kind: OutcomeKind,
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
    pub signature: String,
    pub stdout_excerpt: String,
    pub stderr_excerpt: String,
}

impl From<&ExecutionOutcome> for OutcomeRecord {
    fn from(o: &ExecutionOutcome) -> Self {
        OutcomeRecord {
            kind: o.kind,
            exit_code: o.exit_code,
            signal: o.signal,
            signature: o.signature.clone(),
            stdout_excerpt: o.stdout_excerpt.clone(),
            stderr_excerpt: o.stderr_excerpt.clone(),
        }
    }
}

/// What role a generation request played.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationRole {
    Seedgen,
    HalfMutation,
    FullMutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    /// Run header: configuration echo for replay.
    Meta {
        seq: u64,
        config_summary: String,
        rng_seed: u64,
        sut_command: String,
        manifest_size: usize,
    },
    /// One backend call that was supposed to produce code.
    Generation {
        seq: u64,
        role: GenerationRole,
        prompt_id: Option<PromptId>,
        parent_seed_id: Option<SeedId>,
        backend_id: String,
        extracted: bool,
        /// Seed the code landed in: newly added or the duplicate target.
        seed_id: Option<SeedId>,
        duplicate: bool,
    },
    /// A stored seed (emitted on creation and again in the final flush).
    Seed { seq: u64, seed: CodeSeed },
    /// A stored prompt (same emission points as Seed).
    Prompt { seq: u64, prompt: PromptSeed },
    /// One main-loop iteration: draw, execute, score, decide.
    Iteration {
        seq: u64,
        iteration: u64,
        prompt_id: PromptId,
        seed_id: SeedId,
        outcome: OutcomeRecord,
        anomalous: bool,
        score: Option<MutationScore>,
        action: Action,
        child_ids: Vec<SeedId>,
    },
    /// Immediate re-test of a mutation child.
    ChildTest {
        seq: u64,
        parent_seed_id: SeedId,
        child_seed_id: SeedId,
        outcome: OutcomeRecord,
        anomalous: bool,
    },
    /// A mutation attempt (half or full), successful or not.
    Mutation {
        seq: u64,
        level: MutationLevel,
        strategy: String,
        parent_id: String,
        child_id: Option<String>,
        round: u32,
        /// Why no child exists, when it does not.
        failure: Option<String>,
    },
    /// Bug registry change.
    Bug {
        seq: u64,
        signature: String,
        status: super::TriageStatus,
        new_record: bool,
        occurrences: u64,
        seed_id: SeedId,
        prompt_id: PromptId,
        reproduction_command: String,
    },
    /// A seed left scheduling permanently.
    Retire {
        seq: u64,
        seed_id: SeedId,
        consecutive_failures: u32,
    },
    /// Anomalous execution appended to the success-seed registry.
    Success {
        seq: u64,
        prompt_id: PromptId,
        seed_id: SeedId,
        outcome_signature: String,
    },
    /// End of run: banks persisted then cleared.
    BankFlush {
        seq: u64,
        prompts: usize,
        seeds: usize,
        duplicates: u64,
    },
}

impl Event {
    pub fn seq(&self) -> u64 {
        match self {
            Event::Meta { seq, .. }
            | Event::Generation { seq, .. }
            | Event::Seed { seq, .. }
            | Event::Prompt { seq, .. }
            | Event::Iteration { seq, .. }
            | Event::ChildTest { seq, .. }
            | Event::Mutation { seq, .. }
            | Event::Bug { seq, .. }
            | Event::Retire { seq, .. }
            | Event::Success { seq, .. }
            | Event::BankFlush { seq, .. } => *seq,
        }
    }
}

/// Serializes events as JSON lines and hands out logical sequence numbers.
pub struct TranscriptWriter<W: Write> {
    sink: W,
    next_seq: u64,
}

impl<W: Write> TranscriptWriter<W> {
    pub fn new(sink: W) -> Self {
        TranscriptWriter { sink, next_seq: 0 }
    }

    pub fn next_seq(&mut self) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        seq
    }

    pub fn write(&mut self, event: &Event) -> Result<()> {
        serde_json::to_writer(&mut self.sink, event)?;
        self.sink.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.sink.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

/// Parse a transcript file; malformed lines are fatal with their line
/// number.
pub fn read_transcript(path: &Path) -> Result<Vec<Event>> {
    let f = std::fs::File::open(path).map_err(|e| {
        ZfuzzError::config(format!("cannot open transcript {}: {e}", path.display()))
    })?;
    let mut events = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line).map_err(|e| {
            ZfuzzError::config(format!(
                "{}:{}: malformed transcript line: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        events.push(event);
    }
    Ok(events)
}

pub fn parse_transcript_str(text: &str) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(line).map_err(|e| {
            ZfuzzError::config(format!("line {}: malformed transcript line: {e}", lineno + 1))
        })?;
        events.push(event);
    }
    Ok(events)
}
