//! Prompt bank: renders structured prompts, stores prompt seeds in FIFO
//! order, and maintains the prompt-to-seed lineage index.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::BugReportRecord;
use crate::error::{Result, ZfuzzError};
use crate::templates::{TemplateKind, TemplateStore};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PromptId(pub String);

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeedId(pub String);

impl fmt::Display for SeedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A stored generation instruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSeed {
    pub id: PromptId,
    pub kind: TemplateKind,
    pub rendered_text: String,
    /// Set when this prompt was produced by full mutation.
    pub parent_prompt_id: Option<PromptId>,
    /// Corpus record this prompt was derived from, when known.
    pub origin_record_id: Option<String>,
    pub mutation_round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageLink {
    pub prompt_id: PromptId,
    pub seed_id: SeedId,
}

/// FIFO store of prompt seeds plus the seed-to-prompt lineage index.
#[derive(Debug, Default)]
pub struct PromptBank {
    all: IndexMap<PromptId, PromptSeed>,
    pending: VecDeque<PromptId>,
    lineage: BTreeMap<SeedId, PromptId>,
    next_id: u64,
}

impl PromptBank {
    pub fn new() -> Self {
        Self::default()
    }

    fn mint_id(&mut self) -> PromptId {
        self.next_id += 1;
        PromptId(format!("p{:06}", self.next_id))
    }

    /// Store a prompt built elsewhere. Enforces the round/parent invariant.
    pub fn add_prompt(&mut self, mut prompt: PromptSeed) -> Result<PromptId> {
        if prompt.rendered_text.is_empty() {
            return Err(ZfuzzError::invariant("prompt text must be non-empty"));
        }
        if (prompt.mutation_round == 0) != prompt.parent_prompt_id.is_none() {
            return Err(ZfuzzError::invariant(
                "mutation_round is 0 exactly when there is no parent prompt",
            ));
        }
        let id = self.mint_id();
        prompt.id = id.clone();
        self.all.insert(id.clone(), prompt);
        self.pending.push_back(id.clone());
        Ok(id)
    }

    /// Pop the next pending prompt, FIFO. Empty bank yields `None`.
    pub fn next_prompt(&mut self) -> Option<PromptSeed> {
        let id = self.pending.pop_front()?;
        self.all.get(&id).cloned()
    }

    /// Snapshot of every stored prompt in insertion order.
    pub fn get_all_prompts(&self) -> Vec<PromptSeed> {
        self.all.values().cloned().collect()
    }

    pub fn get(&self, id: &PromptId) -> Option<&PromptSeed> {
        self.all.get(id)
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Record that `seed_id` was generated from `prompt_id`. A seed links to
    /// exactly one prompt; a second link is an invariant violation.
    pub fn link_lineage(&mut self, prompt_id: &PromptId, seed_id: &SeedId) -> Result<LineageLink> {
        if !self.all.contains_key(prompt_id) {
            return Err(ZfuzzError::invariant(format!(
                "lineage link references unknown prompt {prompt_id}"
            )));
        }
        if let Some(existing) = self.lineage.get(seed_id) {
            return Err(ZfuzzError::invariant(format!(
                "seed {seed_id} is already linked to prompt {existing}"
            )));
        }
        self.lineage.insert(seed_id.clone(), prompt_id.clone());
        Ok(LineageLink {
            prompt_id: prompt_id.clone(),
            seed_id: seed_id.clone(),
        })
    }

    /// Total over stored seed ids: every linked seed resolves to its prompt.
    pub fn prompt_for_seed(&self, seed_id: &SeedId) -> Option<&PromptId> {
        self.lineage.get(seed_id)
    }

    pub fn lineage_links(&self) -> impl Iterator<Item = LineageLink> + '_ {
        self.lineage.iter().map(|(s, p)| LineageLink {
            prompt_id: p.clone(),
            seed_id: s.clone(),
        })
    }

    /// Render a seed-generation prompt and store it (mutation round 0).
    ///
    /// With prompt engineering on, all five components are rendered; the
    /// environment component carries `environment` verbatim and component
    /// three appends concrete reproduction steps when given. With prompt
    /// engineering off, the one-line minimal template is used instead.
    pub fn render_seedgen_prompt(
        &mut self,
        store: &TemplateStore,
        prompt_engineering_on: bool,
        problem: &str,
        reproduction: &str,
        environment: &str,
        origin_record_id: Option<String>,
    ) -> Result<PromptSeed> {
        if problem.trim().is_empty() {
            return Err(ZfuzzError::Template(
                "seed-generation prompt needs a non-empty problem".into(),
            ));
        }
        let rendered_text = if prompt_engineering_on {
            let reproduction_block = if reproduction.trim().is_empty() {
                String::new()
            } else {
                format!("\n\nReproduction steps:\n{reproduction}")
            };
            let vars = BTreeMap::from([
                ("problem", problem.to_string()),
                ("reproduction_block", reproduction_block),
                ("environment", environment.to_string()),
            ]);
            store.seedgen().render(&vars, store.prompt_budget)?
        } else {
            let vars = BTreeMap::from([("problem", problem.to_string())]);
            crate::templates::substitute(store.seedgen_minimal(), &vars)?
        };
        let prompt = PromptSeed {
            id: PromptId(String::new()),
            kind: TemplateKind::Seedgen,
            rendered_text,
            parent_prompt_id: None,
            origin_record_id,
            mutation_round: 0,
        };
        let id = self.add_prompt(prompt)?;
        Ok(self.all[&id].clone())
    }

    /// Store a full-mutation child of `parent`.
    pub fn add_mutated_prompt(
        &mut self,
        parent: &PromptSeed,
        rendered_text: String,
    ) -> Result<PromptSeed> {
        let prompt = PromptSeed {
            id: PromptId(String::new()),
            kind: parent.kind,
            rendered_text,
            parent_prompt_id: Some(parent.id.clone()),
            origin_record_id: parent.origin_record_id.clone(),
            mutation_round: parent.mutation_round + 1,
        };
        let id = self.add_prompt(prompt)?;
        Ok(self.all[&id].clone())
    }

    /// Drop all stored prompts and lineage (end-of-campaign clear).
    pub fn clear(&mut self) {
        self.all.clear();
        self.pending.clear();
        self.lineage.clear();
    }

    /// Persist prompts as line-delimited records.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        for prompt in self.all.values() {
            serde_json::to_writer(&mut f, prompt)?;
            f.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Load a bank saved with [`save`]; all prompts become pending again.
    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| {
            ZfuzzError::config(format!("cannot open prompt bank {}: {e}", path.display()))
        })?;
        let mut bank = PromptBank::new();
        for (lineno, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let prompt: PromptSeed = serde_json::from_str(&line).map_err(|e| {
                ZfuzzError::config(format!(
                    "{}:{}: malformed prompt record: {e}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let numeric: u64 = prompt
                .id
                .0
                .trim_start_matches('p')
                .parse()
                .unwrap_or(bank.next_id + 1);
            bank.next_id = bank.next_id.max(numeric);
            bank.pending.push_back(prompt.id.clone());
            bank.all.insert(prompt.id.clone(), prompt);
        }
        Ok(bank)
    }
}

/// Render the five-component analysis prompt for a cleaned bug report.
/// Fails fast on any placeholder without a source field (for example a
/// record with no code blocks) rather than emitting a partial prompt.
pub fn render_analysis_prompt(
    store: &TemplateStore,
    record: &BugReportRecord,
) -> Result<String> {
    let mut vars: BTreeMap<&str, String> = BTreeMap::new();
    if !record.title.trim().is_empty() {
        vars.insert("title", record.title.clone());
    }
    if !record.body.trim().is_empty() {
        vars.insert("body", record.body.clone());
    }
    if !record.code_blocks.is_empty() {
        vars.insert("code_blocks", record.code_blocks.join("\n---\n"));
    }
    vars.insert(
        "version",
        if record.version.trim().is_empty() {
            "unspecified".to_string()
        } else {
            record.version.clone()
        },
    );
    store.analysis().render(&vars, store.prompt_budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::TemplateStore;

    fn store() -> TemplateStore {
        TemplateStore::embedded()
    }

    fn record() -> BugReportRecord {
        BugReportRecord {
            id: "r1".into(),
            title: "def coercion bug".into(),
            body: "calling sort on duplicates stalls the interpreter".into(),
            labels: vec!["minilang".into()],
            code_blocks: vec!["xs = [2, 2]\nsort(xs)".into()],
            version: "v24.1/linux".into(),
        }
    }

    #[test]
    fn analysis_prompt_contains_all_five_components_and_body() {
        let text = render_analysis_prompt(&store(), &record()).unwrap();
        for name in crate::templates::ANALYSIS_COMPONENTS {
            assert!(text.contains(name), "missing component {name}");
        }
        assert!(text.contains("calling sort on duplicates"));
        assert!(text.contains("xs = [2, 2]"));
    }

    #[test]
    fn analysis_prompt_without_code_blocks_is_template_error() {
        let mut r = record();
        r.code_blocks.clear();
        let err = render_analysis_prompt(&store(), &r).unwrap_err();
        assert!(matches!(err, ZfuzzError::Template(_)));
    }

    #[test]
    fn analysis_prompt_render_is_deterministic() {
        let a = render_analysis_prompt(&store(), &record()).unwrap();
        let b = render_analysis_prompt(&store(), &record()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seedgen_prompt_contains_inputs_verbatim() {
        let mut bank = PromptBank::new();
        let p = bank
            .render_seedgen_prompt(
                &store(),
                true,
                "def coercion bug",
                "run the snippet twice",
                "v24.1/linux",
                None,
            )
            .unwrap();
        assert!(p.rendered_text.contains("def coercion bug"));
        assert!(p.rendered_text.contains("v24.1/linux"));
        assert!(p.rendered_text.contains("run the snippet twice"));
        assert_eq!(p.mutation_round, 0);
        assert!(p.parent_prompt_id.is_none());
    }

    #[test]
    fn seedgen_prompt_empty_reproduction_keeps_generic_block() {
        let mut bank = PromptBank::new();
        let p = bank
            .render_seedgen_prompt(&store(), true, "def coercion bug", "", "v24.1", None)
            .unwrap();
        assert!(p
            .rendered_text
            .contains("boundary values, invalid type coercions"));
        assert!(!p.rendered_text.contains("Reproduction steps:"));
    }

    #[test]
    fn seedgen_same_inputs_twice_equal_texts_distinct_ids() {
        let mut bank = PromptBank::new();
        let a = bank
            .render_seedgen_prompt(&store(), true, "p", "", "e", None)
            .unwrap();
        let b = bank
            .render_seedgen_prompt(&store(), true, "p", "", "e", None)
            .unwrap();
        assert_eq!(a.rendered_text, b.rendered_text);
        assert_ne!(a.id, b.id);
    }

    #[test]
    fn minimal_template_used_when_prompt_engineering_off() {
        let mut bank = PromptBank::new();
        let p = bank
            .render_seedgen_prompt(&store(), false, "def coercion bug", "", "e", None)
            .unwrap();
        assert!(p.rendered_text.contains("def coercion bug"));
        assert!(!p.rendered_text.contains("### Problem Description"));
    }

    #[test]
    fn fifo_ordering_and_empty_marker() {
        let mut bank = PromptBank::new();
        assert!(bank.next_prompt().is_none());
        let a = bank
            .render_seedgen_prompt(&store(), true, "first", "", "e", None)
            .unwrap();
        let b = bank
            .render_seedgen_prompt(&store(), true, "second", "", "e", None)
            .unwrap();
        assert_eq!(bank.next_prompt().unwrap().id, a.id);
        assert_eq!(bank.next_prompt().unwrap().id, b.id);
        assert!(bank.next_prompt().is_none());
    }

    #[test]
    fn drain_hundred_prompts_in_insertion_order() {
        let mut bank = PromptBank::new();
        let mut expected = Vec::new();
        for i in 0..100 {
            let p = bank
                .render_seedgen_prompt(&store(), true, &format!("problem {i}"), "", "e", None)
                .unwrap();
            expected.push(p.id);
        }
        let mut drained = Vec::new();
        while let Some(p) = bank.next_prompt() {
            drained.push(p.id);
        }
        assert_eq!(drained, expected);
        let unique: std::collections::BTreeSet<_> = drained.iter().collect();
        assert_eq!(unique.len(), 100);
    }

    #[test]
    fn lineage_lookup_and_uniqueness() {
        let mut bank = PromptBank::new();
        let p1 = bank
            .render_seedgen_prompt(&store(), true, "a", "", "e", None)
            .unwrap();
        let p2 = bank
            .render_seedgen_prompt(&store(), true, "b", "", "e", None)
            .unwrap();
        let s1 = SeedId("s000001".into());
        let s2 = SeedId("s000002".into());
        bank.link_lineage(&p1.id, &s1).unwrap();
        bank.link_lineage(&p1.id, &s2).unwrap();
        assert_eq!(bank.prompt_for_seed(&s1), Some(&p1.id));
        assert_eq!(bank.prompt_for_seed(&s2), Some(&p1.id));
        let err = bank.link_lineage(&p2.id, &s1).unwrap_err();
        assert!(matches!(err, ZfuzzError::Invariant(_)));
    }

    #[test]
    fn mutated_prompt_round_increments() {
        let mut bank = PromptBank::new();
        let p = bank
            .render_seedgen_prompt(&store(), true, "a", "", "e", None)
            .unwrap();
        let child = bank
            .add_mutated_prompt(&p, format!("{} mutated", p.rendered_text))
            .unwrap();
        assert_eq!(child.mutation_round, p.mutation_round + 1);
        assert_eq!(child.parent_prompt_id.as_ref(), Some(&p.id));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prompts.jsonl");
        let mut bank = PromptBank::new();
        for i in 0..5 {
            bank.render_seedgen_prompt(&store(), true, &format!("p{i}"), "", "e", None)
                .unwrap();
        }
        bank.save(&path).unwrap();
        let loaded = PromptBank::load(&path).unwrap();
        assert_eq!(loaded.len(), 5);
        assert_eq!(loaded.get_all_prompts(), bank.get_all_prompts());
        assert_eq!(loaded.pending_len(), 5);
    }
}
