//! Corpus ingestion: load the bundled bug reports and syntax docs, apply the
//! cleaning rules, and export the two fine-tune dataset files.
//!
//! Run with: cargo run -p zfuzz --example ingest_corpus

use std::path::Path;

use zfuzz::corpus::{
    clean_records, clean_syntax_records, export_finetune_sets, load_finetune_samples,
    load_records, CleaningConfig, LoadedRecords, RecordKind,
};

fn main() -> zfuzz::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/corpus");

    let (records, summary) = load_records(&data.join("bug_reports.jsonl"), RecordKind::Bugs)?;
    let LoadedRecords::Bugs(bugs) = records else {
        unreachable!()
    };
    println!("loaded {} bug reports ({} skipped)", summary.loaded, summary.skipped);

    let (cleaned, rejections) = clean_records(&bugs, &CleaningConfig::default());
    println!("cleaning kept {} records; rejections:", cleaned.len());
    for rejection in &rejections {
        println!("  {} -> {:?}", rejection.record_id, rejection.rule);
    }

    let (records, _) = load_records(&data.join("syntax.jsonl"), RecordKind::Syntax)?;
    let LoadedRecords::Syntax(syntax) = records else {
        unreachable!()
    };
    let (clean_syntax, _) = clean_syntax_records(&syntax);
    println!("{} syntax records after cleaning", clean_syntax.len());

    let out_dir = std::env::temp_dir().join("zfuzz_example_finetune");
    let export = export_finetune_sets(&clean_syntax, &cleaned, &out_dir)?;
    println!(
        "exported {} grammar samples and {} bug samples to {}",
        export.grammar_samples,
        export.bug_samples,
        out_dir.display()
    );

    let grammar = load_finetune_samples(&out_dir.join("grammar.jsonl"))?;
    println!("\nfirst grammar sample:");
    println!("  prompt:     {}", grammar[0].prompt_text.replace('\n', " | "));
    println!("  completion: {}", grammar[0].completion_text.replace('\n', " | "));
    Ok(())
}
