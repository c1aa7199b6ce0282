//! The campaign loop: draw a seed, resolve its prompt through lineage,
//! execute, score, and branch into bug registration, code-level mutation, or
//! prompt-level mutation; enforce the retirement rule; emit a replayable
//! transcript.

pub mod transcript;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

use indexmap::IndexMap;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{GenerationRequest, ModelBackend, FULL_MUTATION_TEMPERATURE};
use crate::error::{Result, ZfuzzError};
use crate::executor::{ExecutionOutcome, Executor, OutcomeKind};
use crate::mutation::{
    full_mutate_prompt, half_mutate, half_strategy_library, pick_full_strategy,
    pick_half_strategy, MutationLevel,
};
use crate::prompt_bank::{PromptBank, PromptId, SeedId};
use crate::scorer::{mutation_score, ApiManifest, MutationScore};
use crate::seed_bank::{AddOutcome, CodeSeed, NewSeed, SeedBank, SeedStatus, SuccessEntry};
use crate::templates::TemplateStore;
use transcript::{Action, Event, GenerationRole, OutcomeRecord, TranscriptWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchPolicy {
    /// High score mutates the code, low score mutates the prompt.
    Prose,
    /// The inverse failure branch (low score mutates the code).
    Algorithm2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    pub prompt_engineering_on: bool,
    pub half_mutation_on: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags {
            prompt_engineering_on: true,
            half_mutation_on: true,
        }
    }
}

fn default_anomaly_set() -> BTreeSet<OutcomeKind> {
    BTreeSet::from([
        OutcomeKind::RuntimeError,
        OutcomeKind::Crash,
        OutcomeKind::Hang,
        OutcomeKind::Unknown,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub max_iterations: u64,
    pub score_threshold: i64,
    pub retirement_rounds: u32,
    pub branch_policy: BranchPolicy,
    /// Outcome kinds treated as "the fuzzing test fired".
    pub anomaly_set: BTreeSet<OutcomeKind>,
    pub ablation: AblationFlags,
    pub rng_seed: u64,
    pub worker_count: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            max_iterations: 10,
            score_threshold: 50,
            retirement_rounds: 20,
            branch_policy: BranchPolicy::Prose,
            anomaly_set: default_anomaly_set(),
            ablation: AblationFlags::default(),
            rng_seed: 0,
            worker_count: 1,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.retirement_rounds < 1 {
            return Err(ZfuzzError::config("retirement_rounds must be at least 1"));
        }
        if self.score_threshold < 0 {
            return Err(ZfuzzError::config("score_threshold must be non-negative"));
        }
        if self.worker_count < 1 {
            return Err(ZfuzzError::config("worker_count must be at least 1"));
        }
        Ok(())
    }
}

/// Branch decision for one executed seed.
///
/// A missing score means the seed failed to parse: such code cannot be
/// code-mutated meaningfully, so the prompt is mutated instead.
pub fn decide_action(
    anomalous: bool,
    score_total: Option<i64>,
    config: &CampaignConfig,
) -> Action {
    let threshold = config.score_threshold;
    let action = match score_total {
        None => Action::FullMutate,
        Some(total) => {
            let high = total > threshold;
            if anomalous {
                if high {
                    Action::RegisterBug
                } else {
                    Action::HalfMutate
                }
            } else {
                match (config.branch_policy, high) {
                    (BranchPolicy::Prose, true) => Action::HalfMutate,
                    (BranchPolicy::Prose, false) => Action::FullMutate,
                    (BranchPolicy::Algorithm2, true) => Action::FullMutate,
                    (BranchPolicy::Algorithm2, false) => Action::HalfMutate,
                }
            }
        }
    };
    if action == Action::HalfMutate && !config.ablation.half_mutation_on {
        return Action::FullMutate;
    }
    action
}

/// Retirement rule: a seed whose lineage has accumulated `retirement_rounds`
/// consecutive fruitless mutation rounds leaves scheduling permanently.
pub fn should_retire(seed: &CodeSeed, config: &CampaignConfig) -> bool {
    seed.consecutive_failures >= config.retirement_rounds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriageStatus {
    New,
    Suspect,
    Confirmed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRecord {
    pub signature: String,
    pub first_seed_id: SeedId,
    pub prompt_id: PromptId,
    pub reproduction_command: String,
    pub occurrences: u64,
    pub triage_status: TriageStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterOutcome {
    New,
    Duplicate,
}

/// One record per distinct signature.
#[derive(Debug, Default)]
pub struct BugRegistry {
    records: IndexMap<String, BugRecord>,
}

impl BugRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        outcome: &ExecutionOutcome,
        seed_id: &SeedId,
        prompt_id: &PromptId,
        reproduction_command: String,
        suspect: bool,
    ) -> RegisterOutcome {
        debug_assert!(outcome.kind != OutcomeKind::Pass);
        match self.records.get_mut(&outcome.signature) {
            Some(existing) => {
                existing.occurrences += 1;
                RegisterOutcome::Duplicate
            }
            None => {
                self.records.insert(
                    outcome.signature.clone(),
                    BugRecord {
                        signature: outcome.signature.clone(),
                        first_seed_id: seed_id.clone(),
                        prompt_id: prompt_id.clone(),
                        reproduction_command,
                        occurrences: 1,
                        triage_status: if suspect {
                            TriageStatus::Suspect
                        } else {
                            TriageStatus::New
                        },
                    },
                );
                RegisterOutcome::New
            }
        }
    }

    pub fn get(&self, signature: &str) -> Option<&BugRecord> {
        self.records.get(signature)
    }

    pub fn records(&self) -> impl Iterator<Item = &BugRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Signatures counted by the detected-bugs metric.
    pub fn detected_signatures(&self) -> BTreeSet<String> {
        self.records
            .values()
            .filter(|r| matches!(r.triage_status, TriageStatus::New | TriageStatus::Confirmed))
            .map(|r| r.signature.clone())
            .collect()
    }
}

/// Everything a campaign run needs besides the banks.
pub struct CampaignEnv<'a> {
    pub config: &'a CampaignConfig,
    pub templates: &'a TemplateStore,
    pub manifest: &'a ApiManifest,
    pub backend: &'a dyn ModelBackend,
    pub executor: &'a Executor,
    /// Directory where triggering seeds are persisted for reproduction
    /// commands; omitted in throwaway runs.
    pub repro_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CampaignResult {
    pub success_seeds: Vec<SuccessEntry>,
    pub registry: BugRegistry,
    pub iterations: u64,
}

pub fn run_campaign<W: Write>(
    env: &CampaignEnv,
    prompt_bank: &mut PromptBank,
    seed_bank: &mut SeedBank,
    pregen: &[crate::seed_bank::GenerationLogEntry],
    out: &mut TranscriptWriter<W>,
) -> Result<CampaignResult> {
    env.config.validate()?;
    let mut run = CampaignRun {
        env,
        rng: ChaCha8Rng::seed_from_u64(env.config.rng_seed),
        half_library: half_strategy_library(env.templates)?,
        success_seeds: Vec::new(),
        success_pairs: BTreeSet::new(),
        registry: BugRegistry::new(),
        prompt_bank,
        seed_bank,
        out,
        iterations: 0,
    };
    let result = run.run(pregen);
    // Fatal errors still flush a partial transcript.
    if result.is_err() {
        let _ = run.flush_banks();
    }
    let iterations = run.iterations;
    let success_seeds = std::mem::take(&mut run.success_seeds);
    let registry = std::mem::take(&mut run.registry);
    result?;
    Ok(CampaignResult {
        success_seeds,
        registry,
        iterations,
    })
}

struct CampaignRun<'a, 'w, W: Write> {
    env: &'a CampaignEnv<'a>,
    rng: ChaCha8Rng,
    half_library: Vec<crate::mutation::HalfStrategy>,
    success_seeds: Vec<SuccessEntry>,
    success_pairs: BTreeSet<(PromptId, SeedId)>,
    registry: BugRegistry,
    prompt_bank: &'a mut PromptBank,
    seed_bank: &'a mut SeedBank,
    out: &'w mut TranscriptWriter<W>,
    iterations: u64,
}

impl<W: Write> CampaignRun<'_, '_, W> {
    fn run(&mut self, pregen: &[crate::seed_bank::GenerationLogEntry]) -> Result<()> {
        let config = self.env.config;
        let seq = self.out.next_seq();
        self.out.write(&Event::Meta {
            seq,
            config_summary: serde_json::to_string(config)?,
            rng_seed: config.rng_seed,
            sut_command: self.env.executor.config().command_template.clone(),
            manifest_size: self.env.manifest.len(),
        })?;
        // Archive the initial (Alg. 1) generation attempts when the caller
        // ran them.
        for entry in pregen {
            self.write_generation(
                GenerationRole::Seedgen,
                Some(entry.prompt_id.clone()),
                None,
                entry.extracted,
                entry.seed_id.clone(),
                entry.duplicate,
            )?;
        }

        while self.iterations < config.max_iterations {
            let remaining = (config.max_iterations - self.iterations) as usize;
            let batch_size = config.worker_count.min(remaining);
            let batch: Vec<CodeSeed> = (0..batch_size)
                .filter_map(|_| self.seed_bank.next_seed())
                .collect();
            if batch.is_empty() {
                break;
            }
            let results = self.execute_batch(&batch)?;
            for (seed, (outcome, score)) in batch.into_iter().zip(results) {
                self.iterations += 1;
                self.process_iteration(seed, outcome, score)?;
            }
        }

        self.flush_banks()?;
        self.out.flush()?;
        Ok(())
    }

    /// Execute and score a batch of seeds. With one worker this is inline;
    /// otherwise execute+score fan out while every bank mutation stays on
    /// this thread.
    fn execute_batch(
        &self,
        batch: &[CodeSeed],
    ) -> Result<Vec<(ExecutionOutcome, Option<MutationScore>)>> {
        let executor = self.env.executor;
        let manifest = self.env.manifest;
        if batch.len() == 1 {
            let outcome = executor.run_seed(&batch[0].source)?;
            let score = mutation_score(&batch[0].source, manifest).ok();
            return Ok(vec![(outcome, score)]);
        }
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|seed| {
                    scope.spawn(move || {
                        let outcome = executor.run_seed(&seed.source)?;
                        let score = mutation_score(&seed.source, manifest).ok();
                        Ok::<_, ZfuzzError>((outcome, score))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("executor worker panicked"))
                .collect()
        })
    }

    fn process_iteration(
        &mut self,
        seed: CodeSeed,
        outcome: ExecutionOutcome,
        score: Option<MutationScore>,
    ) -> Result<()> {
        let config = self.env.config;
        let anomalous = config.anomaly_set.contains(&outcome.kind);
        let prompt_id = seed.prompt_id.clone();

        self.seed_bank.set_score(&seed.id, score.clone())?;
        if anomalous {
            self.seed_bank.set_status(&seed.id, SeedStatus::Success)?;
            self.seed_bank.set_consecutive_failures(&seed.id, 0)?;
            self.record_success(&prompt_id, &seed.id, &outcome.signature)?;
        } else {
            self.seed_bank.set_status(&seed.id, SeedStatus::Failed)?;
        }

        // Compile errors outside the anomaly set are suspects pending
        // triage; inside it they register as ordinary bugs.
        if outcome.kind == OutcomeKind::CompileError {
            self.register_bug(&outcome, &seed, &prompt_id, !anomalous)?;
        }

        let action = decide_action(anomalous, score.as_ref().map(|s| s.total), config);
        // Snapshot the seed as updated above for mutation bookkeeping.
        let seed = self
            .seed_bank
            .get(&seed.id)
            .cloned()
            .ok_or_else(|| ZfuzzError::invariant("drawn seed vanished from the bank"))?;

        let mut child_ids = Vec::new();
        match action {
            Action::RegisterBug => {
                self.register_bug(&outcome, &seed, &prompt_id, false)?;
            }
            Action::HalfMutate => {
                if let Some(child) = self.do_half_mutation(&seed)? {
                    child_ids.push(child);
                }
            }
            Action::FullMutate => {
                if let Some(child) = self.do_full_mutation(&seed)? {
                    child_ids.push(child);
                }
            }
            Action::Retire | Action::None => {}
        }

        let seq = self.out.next_seq();
        self.out.write(&Event::Iteration {
            seq,
            iteration: self.iterations,
            prompt_id,
            seed_id: seed.id.clone(),
            outcome: OutcomeRecord::from(&outcome),
            anomalous,
            score,
            action,
            child_ids,
        })?;
        Ok(())
    }

    fn record_success(
        &mut self,
        prompt_id: &PromptId,
        seed_id: &SeedId,
        signature: &str,
    ) -> Result<()> {
        if !self
            .success_pairs
            .insert((prompt_id.clone(), seed_id.clone()))
        {
            return Ok(());
        }
        self.success_seeds.push(SuccessEntry {
            prompt_id: prompt_id.clone(),
            seed_id: seed_id.clone(),
            outcome_signature: signature.to_string(),
        });
        let seq = self.out.next_seq();
        self.out.write(&Event::Success {
            seq,
            prompt_id: prompt_id.clone(),
            seed_id: seed_id.clone(),
            outcome_signature: signature.to_string(),
        })?;
        Ok(())
    }

    fn register_bug(
        &mut self,
        outcome: &ExecutionOutcome,
        seed: &CodeSeed,
        prompt_id: &PromptId,
        suspect: bool,
    ) -> Result<()> {
        let repro = self.persist_reproduction(seed)?;
        let registered = self
            .registry
            .register(outcome, &seed.id, prompt_id, repro, suspect);
        let record = self
            .registry
            .get(&outcome.signature)
            .expect("record just registered");
        let seq = self.out.next_seq();
        self.out.write(&Event::Bug {
            seq,
            signature: outcome.signature.clone(),
            status: record.triage_status,
            new_record: registered == RegisterOutcome::New,
            occurrences: record.occurrences,
            seed_id: seed.id.clone(),
            prompt_id: prompt_id.clone(),
            reproduction_command: record.reproduction_command.clone(),
        })?;
        Ok(())
    }

    /// Persist the triggering seed so the reproduction command points at a
    /// stable file.
    fn persist_reproduction(&mut self, seed: &CodeSeed) -> Result<String> {
        match &self.env.repro_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("{}.ml", seed.id));
                std::fs::write(&path, &seed.source)?;
                Ok(self
                    .env
                    .executor
                    .reproduction_command(&path.to_string_lossy()))
            }
            None => Ok(self
                .env
                .executor
                .reproduction_command(&format!("<{}>", seed.id))),
        }
    }

    /// Code-level mutation of the drawn seed; returns the child id when one
    /// entered the bank.
    fn do_half_mutation(&mut self, parent: &CodeSeed) -> Result<Option<SeedId>> {
        let strategy = pick_half_strategy(&mut self.rng, &self.half_library)?.clone();
        let strategy_name = format!("{:?}", strategy.id);
        let request = GenerationRequest {
            rng_seed: Some(self.env.config.rng_seed),
            ..GenerationRequest::default()
        };
        let mutated = match half_mutate(
            parent,
            &strategy,
            self.env.backend,
            self.env.manifest,
            &mut self.rng,
            &request,
        ) {
            Ok(m) => m,
            Err(ZfuzzError::Backend(msg)) => {
                self.write_generation(
                    GenerationRole::HalfMutation,
                    Some(parent.prompt_id.clone()),
                    Some(parent.id.clone()),
                    false,
                    None,
                    false,
                )?;
                self.write_mutation(
                    MutationLevel::Code,
                    &strategy_name,
                    &parent.id.0,
                    None,
                    parent.mutation_round + 1,
                    Some(format!("backend error: {msg}")),
                )?;
                self.bump_failures(parent)?;
                return Ok(None);
            }
            Err(other) => return Err(other),
        };

        let extracted = mutated.child_source.is_some();
        let Some(child_source) = mutated.child_source else {
            self.write_generation(
                GenerationRole::HalfMutation,
                Some(parent.prompt_id.clone()),
                Some(parent.id.clone()),
                false,
                None,
                false,
            )?;
            self.write_mutation(
                MutationLevel::Code,
                &strategy_name,
                &parent.id.0,
                None,
                parent.mutation_round + 1,
                Some("no code extracted".to_string()),
            )?;
            self.bump_failures(parent)?;
            return Ok(None);
        };

        let added = self.seed_bank.add_seed_unqueued(NewSeed {
            source: child_source,
            prompt_id: parent.prompt_id.clone(),
            mutation_round: parent.mutation_round + 1,
            consecutive_failures: parent.consecutive_failures,
            status: SeedStatus::Fresh,
        })?;
        match added {
            AddOutcome::Duplicate(existing) => {
                self.write_generation(
                    GenerationRole::HalfMutation,
                    Some(parent.prompt_id.clone()),
                    Some(parent.id.clone()),
                    extracted,
                    Some(existing.clone()),
                    true,
                )?;
                self.write_mutation(
                    MutationLevel::Code,
                    &strategy_name,
                    &parent.id.0,
                    None,
                    parent.mutation_round + 1,
                    Some(format!("duplicate of {existing}")),
                )?;
                self.bump_failures(parent)?;
                Ok(None)
            }
            AddOutcome::Added(child_id) => {
                self.prompt_bank
                    .link_lineage(&parent.prompt_id, &child_id)?;
                self.write_generation(
                    GenerationRole::HalfMutation,
                    Some(parent.prompt_id.clone()),
                    Some(parent.id.clone()),
                    extracted,
                    Some(child_id.clone()),
                    false,
                )?;
                self.write_mutation(
                    MutationLevel::Code,
                    &strategy_name,
                    &parent.id.0,
                    Some(child_id.0.clone()),
                    parent.mutation_round + 1,
                    None,
                )?;
                self.retest_child(parent, &child_id)?;
                Ok(Some(child_id))
            }
        }
    }

    /// Prompt-level mutation: rewrite the originating prompt, regenerate,
    /// and replace the drawn seed with the regenerated one.
    fn do_full_mutation(&mut self, parent: &CodeSeed) -> Result<Option<SeedId>> {
        let prompt = self
            .prompt_bank
            .get(&parent.prompt_id)
            .cloned()
            .ok_or_else(|| {
                ZfuzzError::invariant(format!(
                    "seed {} has no resolvable prompt {}",
                    parent.id, parent.prompt_id
                ))
            })?;
        let strategy = pick_full_strategy(&mut self.rng);
        let mutated = full_mutate_prompt(&prompt, strategy, self.env.templates, &mut self.rng)?;
        let child_prompt = self.prompt_bank.add_mutated_prompt(&prompt, mutated.text)?;
        let seq = self.out.next_seq();
        self.out.write(&Event::Prompt {
            seq,
            prompt: child_prompt.clone(),
        })?;
        self.write_mutation(
            MutationLevel::Prompt,
            &format!("{:?}", mutated.requested),
            &prompt.id.0,
            Some(child_prompt.id.0.clone()),
            child_prompt.mutation_round,
            None,
        )?;

        let request = GenerationRequest {
            prompt_text: child_prompt.rendered_text.clone(),
            temperature: FULL_MUTATION_TEMPERATURE,
            rng_seed: Some(self.env.config.rng_seed),
            ..GenerationRequest::default()
        };
        let generation = match self.env.backend.generate(&request) {
            Ok(g) => g,
            Err(ZfuzzError::Backend(msg)) => {
                log::warn!("regeneration failed: {msg}");
                self.write_generation(
                    GenerationRole::FullMutation,
                    Some(child_prompt.id.clone()),
                    Some(parent.id.clone()),
                    false,
                    None,
                    false,
                )?;
                self.bump_failures(parent)?;
                return Ok(None);
            }
            Err(other) => return Err(other),
        };
        let Some(code) = generation.extracted_code else {
            self.write_generation(
                GenerationRole::FullMutation,
                Some(child_prompt.id.clone()),
                Some(parent.id.clone()),
                false,
                None,
                false,
            )?;
            self.bump_failures(parent)?;
            return Ok(None);
        };

        let updated = self.seed_bank.update_seed(
            &parent.id,
            code,
            child_prompt.id.clone(),
            SeedStatus::Fresh,
            parent.consecutive_failures,
        )?;
        match updated {
            AddOutcome::Duplicate(existing) => {
                self.write_generation(
                    GenerationRole::FullMutation,
                    Some(child_prompt.id.clone()),
                    Some(parent.id.clone()),
                    true,
                    Some(existing),
                    true,
                )?;
                self.bump_failures(parent)?;
                Ok(None)
            }
            AddOutcome::Added(child_id) => {
                self.prompt_bank
                    .link_lineage(&child_prompt.id, &child_id)?;
                self.write_generation(
                    GenerationRole::FullMutation,
                    Some(child_prompt.id.clone()),
                    Some(parent.id.clone()),
                    true,
                    Some(child_id.clone()),
                    false,
                )?;
                self.retest_child(parent, &child_id)?;
                Ok(Some(child_id))
            }
        }
    }

    /// Immediate re-test of a freshly created child: sets its status and
    /// failure counter, then queues or retires it.
    fn retest_child(&mut self, parent: &CodeSeed, child_id: &SeedId) -> Result<()> {
        let child = self
            .seed_bank
            .get(child_id)
            .cloned()
            .ok_or_else(|| ZfuzzError::invariant("child seed missing after insert"))?;
        let outcome = self.env.executor.run_seed(&child.source)?;
        let anomalous = self.env.config.anomaly_set.contains(&outcome.kind);
        let seq = self.out.next_seq();
        self.out.write(&Event::ChildTest {
            seq,
            parent_seed_id: parent.id.clone(),
            child_seed_id: child_id.clone(),
            outcome: OutcomeRecord::from(&outcome),
            anomalous,
        })?;

        if anomalous {
            self.seed_bank.set_status(child_id, SeedStatus::Success)?;
            self.seed_bank.set_consecutive_failures(child_id, 0)?;
            self.record_success(&child.prompt_id, child_id, &outcome.signature)?;
        } else {
            self.seed_bank.set_status(child_id, SeedStatus::Failed)?;
            self.seed_bank
                .set_consecutive_failures(child_id, parent.consecutive_failures + 1)?;
        }
        if outcome.kind == OutcomeKind::CompileError && !anomalous {
            let child = self.seed_bank.get(child_id).cloned().unwrap();
            self.register_bug(&outcome, &child, &child.prompt_id.clone(), true)?;
        }

        let child = self
            .seed_bank
            .get(child_id)
            .cloned()
            .expect("child still present");
        // A seed emitted once on creation; the final flush emits it again
        // with its settled state.
        let seq = self.out.next_seq();
        self.out.write(&Event::Seed {
            seq,
            seed: child.clone(),
        })?;
        if should_retire(&child, self.env.config) {
            self.seed_bank.mark_retired(child_id)?;
            let seq = self.out.next_seq();
            self.out.write(&Event::Retire {
                seq,
                seed_id: child_id.clone(),
                consecutive_failures: child.consecutive_failures,
            })?;
        } else {
            self.seed_bank.requeue(child_id)?;
        }
        Ok(())
    }

    /// A mutation round produced nothing; the parent keeps cycling until the
    /// retirement cap.
    fn bump_failures(&mut self, parent: &CodeSeed) -> Result<()> {
        let bumped = parent.consecutive_failures + 1;
        self.seed_bank
            .set_consecutive_failures(&parent.id, bumped)?;
        let updated = self.seed_bank.get(&parent.id).cloned().unwrap();
        if should_retire(&updated, self.env.config) {
            self.seed_bank.mark_retired(&parent.id)?;
            let seq = self.out.next_seq();
            self.out.write(&Event::Retire {
                seq,
                seed_id: parent.id.clone(),
                consecutive_failures: bumped,
            })?;
        } else {
            self.seed_bank.requeue(&parent.id)?;
        }
        Ok(())
    }

    fn write_generation(
        &mut self,
        role: GenerationRole,
        prompt_id: Option<PromptId>,
        parent_seed_id: Option<SeedId>,
        extracted: bool,
        seed_id: Option<SeedId>,
        duplicate: bool,
    ) -> Result<()> {
        let seq = self.out.next_seq();
        self.out.write(&Event::Generation {
            seq,
            role,
            prompt_id,
            parent_seed_id,
            backend_id: self.env.backend.id().to_string(),
            extracted,
            seed_id,
            duplicate,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn write_mutation(
        &mut self,
        level: MutationLevel,
        strategy: &str,
        parent_id: &str,
        child_id: Option<String>,
        round: u32,
        failure: Option<String>,
    ) -> Result<()> {
        let seq = self.out.next_seq();
        self.out.write(&Event::Mutation {
            seq,
            level,
            strategy: strategy.to_string(),
            parent_id: parent_id.to_string(),
            child_id,
            round,
            failure,
        })
    }

    /// Persist final bank contents into the transcript archive, then clear
    /// both banks.
    fn flush_banks(&mut self) -> Result<()> {
        for prompt in self.prompt_bank.get_all_prompts() {
            let seq = self.out.next_seq();
            self.out.write(&Event::Prompt { seq, prompt })?;
        }
        let seeds: Vec<CodeSeed> = self.seed_bank.all_seeds().cloned().collect();
        for seed in seeds {
            let seq = self.out.next_seq();
            self.out.write(&Event::Seed { seq, seed })?;
        }
        let seq = self.out.next_seq();
        self.out.write(&Event::BankFlush {
            seq,
            prompts: self.prompt_bank.len(),
            seeds: self.seed_bank.len(),
            duplicates: self.seed_bank.duplicate_count,
        })?;
        self.prompt_bank.clear();
        self.seed_bank.clear();
        self.out.flush()?;
        Ok(())
    }
}
