//! Structured prompt rendering: the five-component analysis prompt, the
//! five-component seed-generation prompt, and the minimal ablation template.
//!
//! Run with: cargo run -p zfuzz --example render_prompts

use zfuzz::corpus::BugReportRecord;
use zfuzz::prompt_bank::{render_analysis_prompt, PromptBank};
use zfuzz::templates::TemplateStore;

fn main() -> zfuzz::Result<()> {
    let store = TemplateStore::embedded();
    let record = BugReportRecord {
        id: "example-1".into(),
        title: "sorting a list with duplicate values stalls the interpreter".into(),
        body: "sort never returns when the input list contains repeated numbers".into(),
        labels: vec!["minilang".into()],
        code_blocks: vec!["values = [4, 2, 4, 1]\nsort(values)".into()],
        version: "v0.3.1/linux".into(),
    };

    println!("==== analysis prompt ====\n");
    println!("{}\n", render_analysis_prompt(&store, &record)?);

    let mut bank = PromptBank::new();
    let structured = bank.render_seedgen_prompt(
        &store,
        true,
        &record.title,
        &record.code_blocks[0],
        &record.version,
        Some(record.id.clone()),
    )?;
    println!("==== seed-generation prompt ({}) ====\n", structured.id);
    println!("{}\n", structured.rendered_text);

    let minimal = bank.render_seedgen_prompt(
        &store,
        false,
        &record.title,
        "",
        &record.version,
        Some(record.id),
    )?;
    println!("==== minimal (prompt-engineering ablated) ====\n");
    println!("{}", minimal.rendered_text);

    println!("\nbank now holds {} prompts, drained FIFO:", bank.len());
    while let Some(prompt) = bank.next_prompt() {
        println!("  {} (round {})", prompt.id, prompt.mutation_round);
    }
    Ok(())
}
