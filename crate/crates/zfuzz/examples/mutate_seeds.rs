//! Both mutation levels: half mutation rewrites the code seed through the
//! backend (deterministic directives under the stub), full mutation rewrites
//! the originating prompt before regeneration.
//!
//! Run with: cargo run -p zfuzz --example mutate_seeds

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zfuzz::backend::{GenerationRequest, StubBackend};
use zfuzz::mutation::{
    full_mutate_prompt, half_mutate, half_strategy_library, pick_full_strategy,
    pick_half_strategy,
};
use zfuzz::prompt_bank::{PromptBank, PromptId};
use zfuzz::scorer::ApiManifest;
use zfuzz::seed_bank::{CodeSeed, SeedStatus};
use zfuzz::templates::TemplateStore;

fn main() -> zfuzz::Result<()> {
    let store = TemplateStore::embedded();
    let manifest = ApiManifest::minilang_default();
    let stub = StubBackend::with_shipped_table(7)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let parent = CodeSeed {
        id: zfuzz::prompt_bank::SeedId("s000001".into()),
        source: "xs = [3, 1, 2]\nsort(xs)\ntotal = sum(xs)\nprint(total)\n".to_string(),
        prompt_id: PromptId("p000001".into()),
        mutation_round: 0,
        consecutive_failures: 0,
        status: SeedStatus::Fresh,
        score: None,
    };

    println!("==== half mutation (code level) ====");
    println!("parent:\n{}", indent(&parent.source));
    let library = half_strategy_library(&store)?;
    for _ in 0..3 {
        let strategy = pick_half_strategy(&mut rng, &library)?;
        let outcome = half_mutate(
            &parent,
            strategy,
            &stub,
            &manifest,
            &mut rng,
            &GenerationRequest::default(),
        )?;
        println!("\nstrategy {:?}:", strategy.id);
        match outcome.child_source {
            Some(child) => println!("{}", indent(&child)),
            None => println!("    (no code extracted)"),
        }
    }

    println!("\n==== full mutation (prompt level) ====");
    let mut bank = PromptBank::new();
    let prompt = bank.render_seedgen_prompt(
        &store,
        true,
        "a sorting algorithm misbehaves on duplicate values",
        "",
        "v0.3.1/linux",
        None,
    )?;
    for _ in 0..3 {
        let strategy = pick_full_strategy(&mut rng);
        let mutated = full_mutate_prompt(&prompt, strategy, &store, &mut rng)?;
        println!("\nrequested {:?}, applied {:?}:", mutated.requested, mutated.applied);
        // Show what changed: the tail of the mutated prompt.
        let tail: Vec<&str> = mutated.text.lines().rev().take(3).collect();
        for line in tail.iter().rev() {
            println!("    {line}");
        }
    }
    Ok(())
}

fn indent(text: &str) -> String {
    text.lines()
        .map(|l| format!("    {l}"))
        .collect::<Vec<_>>()
        .join("\n")
}
