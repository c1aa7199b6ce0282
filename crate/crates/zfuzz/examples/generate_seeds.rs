//! Seed-bank population: one generation attempt per prompt through the
//! deterministic stub backend, with deduplication and lineage links.
//!
//! Run with: cargo run -p zfuzz --example generate_seeds

use zfuzz::backend::{GenerationRequest, StubBackend};
use zfuzz::prompt_bank::PromptBank;
use zfuzz::seed_bank::{generate_seeds, SeedBank};
use zfuzz::templates::TemplateStore;

fn main() -> zfuzz::Result<()> {
    let store = TemplateStore::embedded();
    let stub = StubBackend::with_shipped_table(42)?;

    let mut prompt_bank = PromptBank::new();
    for (problem, environment) in [
        ("random integer generator returns a fixed value", "v0.3.0/linux"),
        ("array addition through the python bridge fails", "v0.3.1/linux"),
        ("parsing a signed integer string raises an error", "v0.3.1/linux"),
        ("integer overflow on repeated multiplication", "v0.3.1/linux"),
        ("list index arithmetic near the boundary", "v0.3.0/linux"),
    ] {
        prompt_bank.render_seedgen_prompt(&store, true, problem, "", environment, None)?;
    }

    let mut seed_bank = SeedBank::new();
    let request = GenerationRequest {
        rng_seed: Some(42),
        ..Default::default()
    };
    let (stats, _) = generate_seeds(&mut prompt_bank, &mut seed_bank, &stub, &request)?;
    println!(
        "{} prompts -> {} seeds added, {} duplicates, {} failures",
        stats.attempted, stats.added, stats.duplicates, stats.failures
    );

    for seed in seed_bank.all_seeds() {
        let first_line = seed.source.lines().next().unwrap_or("");
        println!(
            "  {} (from {}): {}",
            seed.id, seed.prompt_id, first_line
        );
    }

    println!("\nscheduling order (success seeds would come first):");
    while let Some(seed) = seed_bank.next_seed() {
        println!("  drew {} [{:?}]", seed.id, seed.status);
    }
    Ok(())
}
