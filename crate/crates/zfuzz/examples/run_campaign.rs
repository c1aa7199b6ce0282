//! End-to-end offline campaign: prompts from the bundled sample corpus,
//! seeds through the stub backend, execution against the bundled MiniLang
//! interpreter with four planted bugs enabled.
//!
//! Needs the `zfuzz` binary (the SUT runs as a subprocess):
//!     cargo build -p zfuzz && cargo run -p zfuzz --example run_campaign

use std::path::PathBuf;

use zfuzz::backend::{GenerationRequest, StubBackend};
use zfuzz::campaign::transcript::TranscriptWriter;
use zfuzz::campaign::{run_campaign, BranchPolicy, CampaignConfig, CampaignEnv};
use zfuzz::corpus::{clean_records, load_records, CleaningConfig, LoadedRecords, RecordKind};
use zfuzz::executor::{Executor, SutConfig};
use zfuzz::prompt_bank::PromptBank;
use zfuzz::scorer::ApiManifest;
use zfuzz::seed_bank::{generate_seeds, SeedBank};
use zfuzz::templates::TemplateStore;

/// The sibling `zfuzz` binary; examples live under target/<profile>/examples.
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
    let store = TemplateStore::embedded();
    let manifest = ApiManifest::minilang_default();
    let stub = StubBackend::with_shipped_table(42)?;

    // Prompts from the shipped sample corpus.
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/corpus/bug_reports.jsonl");
    let (records, _) = load_records(&corpus, RecordKind::Bugs)?;
    let LoadedRecords::Bugs(bugs) = records else {
        unreachable!()
    };
    let (cleaned, _) = clean_records(&bugs, &CleaningConfig::default());
    let mut prompt_bank = PromptBank::new();
    for record in &cleaned {
        let repro = record.code_blocks.first().cloned().unwrap_or_default();
        prompt_bank.render_seedgen_prompt(
            &store,
            true,
            &record.title,
            &repro,
            &record.version,
            Some(record.id.clone()),
        )?;
    }
    println!("{} prompts rendered from the sample corpus", prompt_bank.len());

    // Alg. 1: populate the seed bank.
    let mut seed_bank = SeedBank::new();
    let request = GenerationRequest {
        rng_seed: Some(42),
        ..Default::default()
    };
    let (stats, pregen) = generate_seeds(&mut prompt_bank, &mut seed_bank, &stub, &request)?;
    println!(
        "initial generation: {} seeds, {} duplicates, {} failures",
        stats.added, stats.duplicates, stats.failures
    );

    // Campaign against MiniLang with four planted bugs enabled.
    let config = CampaignConfig {
        max_iterations: 200,
        score_threshold: 8,
        branch_policy: BranchPolicy::Prose,
        rng_seed: 42,
        ..Default::default()
    };
    let sut = format!(
        "{} minilang run {{file}} --bugs B1,B2,B3,B5 --rng-seed 7",
        zfuzz_binary().display()
    );
    let executor = Executor::new(SutConfig::new(sut, 2_000)?)?;
    let out_dir = std::env::temp_dir().join("zfuzz_example_campaign");
    std::fs::create_dir_all(&out_dir)?;
    let transcript_path = out_dir.join("transcript.jsonl");
    let env = CampaignEnv {
        config: &config,
        templates: &store,
        manifest: &manifest,
        backend: &stub,
        executor: &executor,
        repro_dir: Some(out_dir.join("repro")),
    };
    let mut writer =
        TranscriptWriter::new(std::io::BufWriter::new(std::fs::File::create(&transcript_path)?));
    let result = run_campaign(&env, &mut prompt_bank, &mut seed_bank, &pregen, &mut writer)?;

    println!(
        "\ncampaign: {} iterations, {} anomalous executions",
        result.iterations,
        result.success_seeds.len()
    );
    println!("bug registry:");
    for record in result.registry.records() {
        println!(
            "  [{:?}] {} (seen {}x)",
            record.triage_status, record.signature, record.occurrences
        );
        println!("      reproduce: {}", record.reproduction_command);
    }
    println!("\ntranscript: {}", transcript_path.display());
    println!("replay it with: zfuzz report --transcript {}", transcript_path.display());
    Ok(())
}
