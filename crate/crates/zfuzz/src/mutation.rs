//! Seed mutation: code-level "half" mutation driven through the generation
//! backend, and prompt-level "full" mutation that rewrites the originating
//! prompt before regeneration.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{
    directive_line, GenerationRequest, GenerationResult, ModelBackend, StubBackend,
};
use crate::error::{Result, ZfuzzError};
use crate::prompt_bank::PromptSeed;
use crate::scorer::{count_api_calls, ApiManifest};
use crate::seed_bank::CodeSeed;
use crate::templates::TemplateStore;

pub use crate::backend::Directive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HalfStrategyId {
    MethodAugmentation,
    MethodParamSubstitution,
    OptimizeRefine,
    Comprehensive,
}

impl HalfStrategyId {
    pub const ALL: [HalfStrategyId; 4] = [
        HalfStrategyId::MethodAugmentation,
        HalfStrategyId::MethodParamSubstitution,
        HalfStrategyId::OptimizeRefine,
        HalfStrategyId::Comprehensive,
    ];

    pub fn template_key(&self) -> &'static str {
        match self {
            HalfStrategyId::MethodAugmentation => "half_method_augmentation",
            HalfStrategyId::MethodParamSubstitution => "half_param_substitution",
            HalfStrategyId::OptimizeRefine => "half_optimize_refine",
            HalfStrategyId::Comprehensive => "half_comprehensive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct HalfStrategy {
    pub id: HalfStrategyId,
    pub instruction_template: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FullStrategyId {
    KeywordReplacement,
    ConstraintAugmentation,
    DefectPatternIntroduction,
    Composite,
}

impl FullStrategyId {
    pub const ALL: [FullStrategyId; 4] = [
        FullStrategyId::KeywordReplacement,
        FullStrategyId::ConstraintAugmentation,
        FullStrategyId::DefectPatternIntroduction,
        FullStrategyId::Composite,
    ];
}

/// Where a mutation acted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationLevel {
    Code,
    Prompt,
}

/// Transcript record of one mutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationEvent {
    pub parent_id: String,
    pub child_id: Option<String>,
    pub strategy_id: String,
    pub level: MutationLevel,
    pub round: u32,
}

/// The four code-level strategies with their instruction texts.
pub fn half_strategy_library(store: &TemplateStore) -> Result<Vec<HalfStrategy>> {
    let mut lib = Vec::with_capacity(4);
    for id in HalfStrategyId::ALL {
        lib.push(HalfStrategy {
            id,
            instruction_template: store.half_instruction(id.template_key())?.to_string(),
        });
    }
    Ok(lib)
}

/// Uniform pick; deterministic given the RNG state.
pub fn pick_half_strategy<'a>(
    rng: &mut ChaCha8Rng,
    library: &'a [HalfStrategy],
) -> Result<&'a HalfStrategy> {
    library
        .choose(rng)
        .ok_or_else(|| ZfuzzError::config("half-mutation strategy library is empty"))
}

pub fn pick_full_strategy(rng: &mut ChaCha8Rng) -> FullStrategyId {
    *FullStrategyId::ALL
        .choose(rng)
        .expect("strategy list is non-empty")
}

/// Outcome of one half-mutation attempt. The caller owns bank insertion and
/// failure-counter bookkeeping.
#[derive(Debug, Clone)]
pub struct HalfMutationOutcome {
    pub strategy_id: HalfStrategyId,
    pub prompt_sent: String,
    pub generation: GenerationResult,
    /// Extracted child source, when the backend produced code.
    pub child_source: Option<String>,
}

/// Mutate a code seed: the strategy's instruction text is combined with the
/// seed source into one prompt and sent through the backend. When the
/// backend applies directives mechanically (the stub), a machine-readable
/// directive line chosen for the strategy is embedded so the transformation
/// is deterministic.
pub fn half_mutate(
    seed: &CodeSeed,
    strategy: &HalfStrategy,
    backend: &dyn ModelBackend,
    manifest: &ApiManifest,
    rng: &mut ChaCha8Rng,
    request_defaults: &GenerationRequest,
) -> Result<HalfMutationOutcome> {
    let mut prompt = strategy.instruction_template.clone();
    if backend.supports_directives() {
        for directive in strategy_directives(strategy.id, seed, manifest, rng) {
            prompt.push('\n');
            prompt.push_str(&directive_line(&directive));
        }
    }
    prompt.push_str("\n```\n");
    prompt.push_str(seed.source.trim_end());
    prompt.push_str("\n```\n");

    let request = GenerationRequest {
        prompt_text: prompt.clone(),
        ..request_defaults.clone()
    };
    let generation = backend.generate(&request)?;
    Ok(HalfMutationOutcome {
        strategy_id: strategy.id,
        prompt_sent: prompt,
        child_source: generation.extracted_code.clone(),
        generation,
    })
}

/// Map a strategy to concrete directives for the deterministic backend.
fn strategy_directives(
    id: HalfStrategyId,
    seed: &CodeSeed,
    manifest: &ApiManifest,
    rng: &mut ChaCha8Rng,
) -> Vec<Directive> {
    let manifest_names: Vec<&str> = manifest.names().collect();
    let pick_api = |rng: &mut ChaCha8Rng| -> String {
        manifest_names
            .choose(rng)
            .map(|s| s.to_string())
            .unwrap_or_else(|| "len".to_string())
    };
    match id {
        HalfStrategyId::MethodAugmentation => vec![Directive::AddMethod(pick_api(rng))],
        HalfStrategyId::MethodParamSubstitution => {
            // Swap a call the seed actually makes when possible.
            let present: Vec<String> = count_api_calls(&seed.source, manifest)
                .map(|c| c.distinct_apis.into_iter().collect())
                .unwrap_or_default();
            let old = present
                .choose(rng)
                .cloned()
                .unwrap_or_else(|| pick_api(rng));
            let mut new = pick_api(rng);
            while new == old && manifest_names.len() > 1 {
                new = pick_api(rng);
            }
            vec![Directive::SwapApi { old, new }]
        }
        HalfStrategyId::OptimizeRefine => vec![Directive::RenameLocals],
        HalfStrategyId::Comprehensive => vec![
            Directive::AddMethod(pick_api(rng)),
            Directive::RenameLocals,
        ],
    }
}

/// Which strategy a full mutation actually applied (keyword replacement
/// falls back to constraint augmentation when no lexicon keyword occurs).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullMutationText {
    pub requested: FullStrategyId,
    pub applied: Vec<FullStrategyId>,
    pub text: String,
}

/// Rewrite a seed-generation prompt. Keyword replacement substitutes one
/// lexicon keyword inside the Test Objective component; constraint
/// augmentation appends a constraint clause; defect-pattern introduction
/// appends a defect phrase; composite applies a random subset of size >= 2
/// in fixed order (replace, constrain, defect).
pub fn full_mutate_prompt(
    prompt: &PromptSeed,
    strategy: FullStrategyId,
    store: &TemplateStore,
    rng: &mut ChaCha8Rng,
) -> Result<FullMutationText> {
    let mut applied = Vec::new();
    let mut text = prompt.rendered_text.clone();
    match strategy {
        FullStrategyId::KeywordReplacement => {
            match replace_keyword(&text, store, rng) {
                Some(new_text) => {
                    text = new_text;
                    applied.push(FullStrategyId::KeywordReplacement);
                }
                None => {
                    // No lexicon keyword present; fall back.
                    log::info!(
                        "prompt {}: no lexicon keyword found, falling back to constraint augmentation",
                        prompt.id
                    );
                    text = append_constraint(&text, store, rng);
                    applied.push(FullStrategyId::ConstraintAugmentation);
                }
            }
        }
        FullStrategyId::ConstraintAugmentation => {
            text = append_constraint(&text, store, rng);
            applied.push(FullStrategyId::ConstraintAugmentation);
        }
        FullStrategyId::DefectPatternIntroduction => {
            text = append_defect_pattern(&text, store, rng);
            applied.push(FullStrategyId::DefectPatternIntroduction);
        }
        FullStrategyId::Composite => {
            // Subsets of {replace, constrain, defect} with at least two
            // members, in fixed application order.
            let subsets: [(bool, bool, bool); 4] = [
                (true, true, false),
                (true, false, true),
                (false, true, true),
                (true, true, true),
            ];
            let (replace, constrain, defect) = *subsets.choose(rng).unwrap();
            if replace {
                if let Some(new_text) = replace_keyword(&text, store, rng) {
                    text = new_text;
                    applied.push(FullStrategyId::KeywordReplacement);
                }
            }
            if constrain || applied.is_empty() {
                text = append_constraint(&text, store, rng);
                applied.push(FullStrategyId::ConstraintAugmentation);
            }
            if defect {
                text = append_defect_pattern(&text, store, rng);
                applied.push(FullStrategyId::DefectPatternIntroduction);
            }
        }
    }
    if text == prompt.rendered_text {
        return Err(ZfuzzError::invariant(
            "full mutation left the prompt unchanged",
        ));
    }
    Ok(FullMutationText {
        requested: strategy,
        applied,
        text,
    })
}

/// The slice of the prompt that keyword replacement operates on: the Test
/// Objective component when present, otherwise the whole prompt.
fn objective_bounds(text: &str) -> (usize, usize) {
    let header = "### Test Objective";
    let Some(start) = text.find(header) else {
        return (0, text.len());
    };
    let body_start = start + header.len();
    let end = text[body_start..]
        .find("### ")
        .map(|o| body_start + o)
        .unwrap_or(text.len());
    (body_start, end)
}

fn replace_keyword(text: &str, store: &TemplateStore, rng: &mut ChaCha8Rng) -> Option<String> {
    let (lo, hi) = objective_bounds(text);
    let slice = &text[lo..hi];
    let slice_lower = slice.to_lowercase();
    let present: Vec<&(String, Vec<String>)> = store
        .lexicon()
        .iter()
        .filter(|(kw, _)| slice_lower.contains(&kw.to_lowercase()))
        .collect();
    let (keyword, replacements) = present.choose(rng)?;
    let replacement = replacements.choose(rng)?;
    let replaced = replace_all_case_insensitive(slice, keyword, replacement);
    if replaced == slice {
        return None;
    }
    Some(format!("{}{}{}", &text[..lo], replaced, &text[hi..]))
}

fn replace_all_case_insensitive(haystack: &str, needle: &str, replacement: &str) -> String {
    let lower = haystack.to_lowercase();
    let needle_lower = needle.to_lowercase();
    let mut out = String::with_capacity(haystack.len());
    let mut cursor = 0;
    while let Some(found) = lower[cursor..].find(&needle_lower) {
        let at = cursor + found;
        out.push_str(&haystack[cursor..at]);
        out.push_str(replacement);
        cursor = at + needle.len();
    }
    out.push_str(&haystack[cursor..]);
    out
}

fn append_constraint(text: &str, store: &TemplateStore, rng: &mut ChaCha8Rng) -> String {
    let clause = store
        .constraints()
        .choose(rng)
        .cloned()
        .unwrap_or_default();
    format!("{text}\n\nConstraint: the generated program must be {clause}.")
}

fn append_defect_pattern(text: &str, store: &TemplateStore, rng: &mut ChaCha8Rng) -> String {
    let phrase = store
        .defect_patterns()
        .choose(rng)
        .cloned()
        .unwrap_or_default();
    format!("{text}\n\nTarget defect: produce code containing {phrase}.")
}

/// Convenience used by retirement tests: does this stub backend apply
/// directives (and therefore mutate deterministically)?
pub fn backend_is_deterministic(backend: &dyn ModelBackend) -> bool {
    backend.supports_directives()
}

#[allow(dead_code)]
fn _assert_object_safe(_: &dyn ModelBackend, _: &StubBackend) {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt_bank::{PromptBank, PromptId};
    use crate::seed_bank::SeedStatus;
    use rand_chacha::rand_core::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn store() -> TemplateStore {
        TemplateStore::embedded()
    }

    fn manifest() -> ApiManifest {
        ApiManifest::minilang_default()
    }

    fn seed(source: &str) -> CodeSeed {
        CodeSeed {
            id: crate::prompt_bank::SeedId("s000001".into()),
            source: source.to_string(),
            prompt_id: PromptId("p000001".into()),
            mutation_round: 0,
            consecutive_failures: 0,
            status: SeedStatus::Fresh,
            score: None,
        }
    }

    fn seedgen_prompt(problem: &str) -> PromptSeed {
        let mut bank = PromptBank::new();
        bank.render_seedgen_prompt(&store(), true, problem, "", "v1/linux", None)
            .unwrap()
    }

    #[test]
    fn strategy_pick_is_reproducible() {
        let lib = half_strategy_library(&store()).unwrap();
        let seq_a: Vec<_> = {
            let mut r = rng(9);
            (0..20).map(|_| pick_half_strategy(&mut r, &lib).unwrap().id).collect()
        };
        let seq_b: Vec<_> = {
            let mut r = rng(9);
            (0..20).map(|_| pick_half_strategy(&mut r, &lib).unwrap().id).collect()
        };
        assert_eq!(seq_a, seq_b);
    }

    #[test]
    fn empty_library_is_fatal() {
        let mut r = rng(1);
        assert!(pick_half_strategy(&mut r, &[]).is_err());
    }

    #[test]
    fn four_thousand_draws_are_near_uniform() {
        // Precomputed at this fixed seed: each strategy lands within
        // 25% +/- 3% of 4000 draws.
        let lib = half_strategy_library(&store()).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        let mut r = rng(4242);
        for _ in 0..4000 {
            let s = pick_half_strategy(&mut r, &lib).unwrap();
            *counts.entry(format!("{:?}", s.id)).or_insert(0usize) += 1;
        }
        for (id, n) in &counts {
            assert!(
                (880..=1120).contains(n),
                "strategy {id} drawn {n} times, outside 1000 +/- 120"
            );
        }
        let full_counts = {
            let mut r = rng(4242);
            let mut counts = std::collections::BTreeMap::new();
            for _ in 0..4000 {
                *counts.entry(format!("{:?}", pick_full_strategy(&mut r))).or_insert(0usize) += 1;
            }
            counts
        };
        for (id, n) in &full_counts {
            assert!(
                (880..=1120).contains(n),
                "full strategy {id} drawn {n} times, outside 1000 +/- 120"
            );
        }
    }

    #[test]
    fn half_mutation_via_stub_augments_program() {
        let stub = StubBackend::new(
            vec![crate::backend::StubEntry {
                program: "unused".into(),
                valid: true,
                apis: vec![],
            }],
            7,
        )
        .unwrap();
        let lib = half_strategy_library(&store()).unwrap();
        let strategy = lib
            .iter()
            .find(|s| s.id == HalfStrategyId::MethodAugmentation)
            .unwrap();
        let parent = seed("x = 1\nprint(x)\n");
        let mut r = rng(3);
        let out = half_mutate(
            &parent,
            strategy,
            &stub,
            &manifest(),
            &mut r,
            &GenerationRequest::default(),
        )
        .unwrap();
        let child = out.child_source.expect("stub always yields code");
        assert!(child.starts_with("x = 1"));
        assert!(child.contains("def extra_"));
        // One new function and one new call site.
        crate::lang::parse(&child).unwrap();
        assert!(out.prompt_sent.contains("augment the following code snippet"));
        assert!(out.prompt_sent.contains("@directive"));
    }

    #[test]
    fn half_mutation_prompt_embeds_parent_source() {
        let stub = StubBackend::new(
            vec![crate::backend::StubEntry {
                program: "unused".into(),
                valid: true,
                apis: vec![],
            }],
            7,
        )
        .unwrap();
        let lib = half_strategy_library(&store()).unwrap();
        let parent = seed("marker_variable = 42\n");
        let mut r = rng(5);
        let out = half_mutate(
            &parent,
            &lib[2],
            &stub,
            &manifest(),
            &mut r,
            &GenerationRequest::default(),
        )
        .unwrap();
        assert!(out.prompt_sent.contains("marker_variable = 42"));
    }

    #[test]
    fn keyword_replacement_rewrites_objective() {
        let prompt = seedgen_prompt("a sorting algorithm misbehaves");
        let mut r = rng(11);
        let out = full_mutate_prompt(
            &prompt,
            FullStrategyId::KeywordReplacement,
            &store(),
            &mut r,
        )
        .unwrap();
        assert_eq!(out.applied, vec![FullStrategyId::KeywordReplacement]);
        assert_ne!(out.text, prompt.rendered_text);
        // The Problem Description component keeps the original wording; only
        // the Test Objective slice changes.
        let (lo, _) = objective_bounds(&prompt.rendered_text);
        assert_eq!(out.text[..lo], prompt.rendered_text[..lo]);
    }

    #[test]
    fn keyword_replacement_without_keyword_falls_back() {
        // A minimal-template prompt whose text carries no lexicon keyword.
        let mut bank = PromptBank::new();
        let prompt = bank
            .render_seedgen_prompt(&store(), false, "zzqy xkcd glyph", "", "env", None)
            .unwrap();
        let mut r = rng(11);
        let out = full_mutate_prompt(
            &prompt,
            FullStrategyId::KeywordReplacement,
            &store(),
            &mut r,
        )
        .unwrap();
        assert_eq!(out.applied, vec![FullStrategyId::ConstraintAugmentation]);
        assert!(out.text.contains("Constraint: the generated program must be"));
    }

    #[test]
    fn constraint_augmentation_appends_clause() {
        let prompt = seedgen_prompt("sorting bug");
        // Draw until the recursion clause appears; list order is fixed so a
        // known seed suffices.
        let mut found = false;
        for s in 0..200 {
            let mut r = rng(s);
            let out = full_mutate_prompt(
                &prompt,
                FullStrategyId::ConstraintAugmentation,
                &store(),
                &mut r,
            )
            .unwrap();
            if out.text.contains("implemented using recursion") {
                found = true;
                break;
            }
        }
        assert!(found, "recursion constraint never drawn in 200 seeds");
    }

    #[test]
    fn defect_pattern_appends_phrase() {
        let prompt = seedgen_prompt("sorting bug");
        let mut found = false;
        for s in 0..200 {
            let mut r = rng(s);
            let out = full_mutate_prompt(
                &prompt,
                FullStrategyId::DefectPatternIntroduction,
                &store(),
                &mut r,
            )
            .unwrap();
            if out.text.contains("boundary condition errors") {
                found = true;
                break;
            }
        }
        assert!(found, "boundary-condition pattern never drawn in 200 seeds");
    }

    #[test]
    fn composite_applies_at_least_two() {
        let prompt = seedgen_prompt("a sorting algorithm misbehaves");
        for s in 0..20 {
            let mut r = rng(s);
            let out =
                full_mutate_prompt(&prompt, FullStrategyId::Composite, &store(), &mut r).unwrap();
            assert!(
                out.applied.len() >= 2,
                "composite applied only {:?}",
                out.applied
            );
            assert_ne!(out.text, prompt.rendered_text);
        }
    }

    #[test]
    fn child_prompt_always_differs_from_parent() {
        let prompt = seedgen_prompt("list handling bug");
        for s in 0..50 {
            let mut r = rng(s);
            let strat = pick_full_strategy(&mut r);
            let out = full_mutate_prompt(&prompt, strat, &store(), &mut r).unwrap();
            assert_ne!(out.text, prompt.rendered_text);
        }
    }
}
