//! Campaign metrics from a transcript: unique valid programs, API coverage,
//! hallucination rate, detected bugs, per-lineage score trajectories, and
//! the API call distribution — plus the SVG trajectory chart.
//!
//! Needs the `zfuzz` binary (a small campaign runs first to produce a
//! transcript):
//!     cargo build -p zfuzz && cargo run -p zfuzz --example report_metrics

use std::path::PathBuf;

use zfuzz::backend::{GenerationRequest, StubBackend};
use zfuzz::campaign::transcript::{parse_transcript_str, TranscriptWriter};
use zfuzz::campaign::{run_campaign, CampaignConfig, CampaignEnv};
use zfuzz::executor::{Executor, SutConfig};
use zfuzz::prompt_bank::PromptBank;
use zfuzz::report::{compute_metrics, emit_reports, render_trajectory_chart};
use zfuzz::scorer::ApiManifest;
use zfuzz::seed_bank::{generate_seeds, SeedBank};
use zfuzz::templates::TemplateStore;

fn zfuzz_binary() -> PathBuf {
    let exe = std::env::current_exe().expect("current exe");
    let candidate = exe
        .parent()
        .and_then(|p| p.parent())
        .map(|p| p.join("zfuzz"))
        .filter(|p| p.exists());
    candidate.unwrap_or_else(|| {
        eprintln!("the zfuzz binary is missing; run `cargo build -p zfuzz` first");
        std::process::exit(1);
    })
}

fn main() -> zfuzz::Result<()> {
    // A small campaign first, to have something to report on.
    let store = TemplateStore::embedded();
    let manifest = ApiManifest::minilang_default();
    let stub = StubBackend::with_shipped_table(42)?;
    let mut prompt_bank = PromptBank::new();
    for k in 0..12 {
        prompt_bank.render_seedgen_prompt(
            &store,
            true,
            &format!("library probe number {k}"),
            "",
            "v0.3.1/linux",
            None,
        )?;
    }
    let mut seed_bank = SeedBank::new();
    let request = GenerationRequest {
        rng_seed: Some(42),
        ..Default::default()
    };
    let (_, pregen) = generate_seeds(&mut prompt_bank, &mut seed_bank, &stub, &request)?;
    let config = CampaignConfig {
        max_iterations: 80,
        score_threshold: 8,
        rng_seed: 42,
        ..Default::default()
    };
    let sut = format!(
        "{} minilang run {{file}} --bugs B1,B3 --rng-seed 7",
        zfuzz_binary().display()
    );
    let executor = Executor::new(SutConfig::new(sut, 2_000)?)?;
    let env = CampaignEnv {
        config: &config,
        templates: &store,
        manifest: &manifest,
        backend: &stub,
        executor: &executor,
        repro_dir: None,
    };
    let mut writer = TranscriptWriter::new(Vec::new());
    let result = run_campaign(&env, &mut prompt_bank, &mut seed_bank, &pregen, &mut writer)?;
    let transcript = String::from_utf8(writer.into_inner()).expect("utf8 transcript");
    let events = parse_transcript_str(&transcript)?;
    println!(
        "campaign done: {} iterations, {} registry records",
        result.iterations,
        result.registry.len()
    );

    // The metrics pass.
    let metrics = compute_metrics(&events, &manifest, 1.0, 1.0)?;
    println!("\ntotal generations:   {}", metrics.total_generations);
    println!("unique valid:        {} (rate {:.3})", metrics.unique_valid_count, metrics.unique_valid_rate);
    println!("api coverage:        {:.3}", metrics.api_coverage);
    println!("hallucination rate:  {:.3}", metrics.hallucination_rate);
    println!("detected bugs:       {}", metrics.detected_bugs);

    println!("\napi call distribution:");
    for (api, count) in &metrics.api_call_distribution {
        println!("  {api:<16} {count}");
    }

    println!("\nscore trajectories (round, total):");
    for lineage in metrics.mutation_efficiency.iter().take(6) {
        println!(
            "  {} -> {:?} (weighted {:.2})",
            lineage.root_seed_id, lineage.trajectory, lineage.weighted_score
        );
    }

    // Emit report files plus one trajectory chart.
    let out_dir = std::env::temp_dir().join("zfuzz_example_report");
    let bugs: Vec<_> = result.registry.records().cloned().collect();
    emit_reports(&metrics, &bugs, &out_dir)?;
    if let Some(lineage) = metrics.mutation_efficiency.first() {
        let svg = render_trajectory_chart(&events, &lineage.root_seed_id)?;
        std::fs::write(out_dir.join("trajectory.svg"), svg)?;
    }
    println!("\nreports written to {}", out_dir.display());
    Ok(())
}
