//! CLI front end. The binary is a thin shell over this module.
//!
//! Exit codes: 0 success, 1 fatal configuration, 2 backend failure,
//! 3 internal invariant violation.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::backend::{GenerationRequest, HttpBackend, ModelBackend, StubBackend};
use crate::campaign::transcript::TranscriptWriter;
use crate::campaign::{run_campaign, CampaignConfig, CampaignEnv};
use crate::corpus::{
    clean_records, clean_syntax_records, export_finetune_sets, load_records, CleaningConfig,
    LoadedRecords, RecordKind,
};
use crate::error::{Result, ZfuzzError};
use crate::executor::{Executor, SutConfig};
use crate::minilang::BugConfig;
use crate::prompt_bank::{render_analysis_prompt, PromptBank, SeedId};
use crate::scorer::ApiManifest;
use crate::seed_bank::{generate_seeds, SeedBank};
use crate::templates::TemplateStore;

#[derive(Parser)]
#[command(
    name = "zfuzz",
    version,
    about = "Adaptive model-driven fuzzing orchestrator with a bundled MiniLang interpreter"
)]
struct Cli {
    /// Seed for campaign randomness and the reference interpreter.
    #[arg(long, global = true)]
    rng_seed: Option<u64>,

    /// Output path (transcript file or report directory, per subcommand).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Template directory; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    templates: Option<PathBuf>,

    /// API manifest file; the bundled MiniLang manifest is used when
    /// omitted.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest bug reports and syntax docs, clean them, and export the
    /// fine-tune dataset files.
    Ingest(IngestArgs),
    /// Render seed-generation prompts from cleaned bug reports into a
    /// prompt bank file.
    GenPrompts(GenPromptsArgs),
    /// Populate a seed bank: one generation attempt per stored prompt.
    GenSeeds(GenSeedsArgs),
    /// Run the campaign loop and write a replayable transcript.
    Run(RunArgs),
    /// Compute metrics and reports from a transcript.
    Report(ReportArgs),
    /// The bundled MiniLang reference interpreter.
    Minilang(MinilangArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Bug-report records, one JSON object per line.
    #[arg(long)]
    bugs: PathBuf,
    /// Syntax records, one JSON object per line.
    #[arg(long)]
    syntax: PathBuf,
    /// Relevance keywords (default: the target language name and
    /// extension).
    #[arg(long, value_delimiter = ',')]
    keywords: Vec<String>,
}

#[derive(Args)]
struct GenPromptsArgs {
    /// Cleaned or raw bug-report records (cleaning is applied here too).
    #[arg(long)]
    bugs: PathBuf,
    /// Where to write the prompt bank.
    #[arg(long)]
    prompts: PathBuf,
    #[arg(long, value_delimiter = ',')]
    keywords: Vec<String>,
    /// Ablation: use the one-line minimal template instead of the
    /// five-component one.
    #[arg(long)]
    no_prompt_engineering: bool,
    /// Also render the five-component analysis prompt per record to
    /// `<prompts>.analysis.txt`.
    #[arg(long)]
    emit_analysis: bool,
}

#[derive(Args)]
struct GenSeedsArgs {
    /// Prompt bank produced by gen-prompts.
    #[arg(long)]
    prompts: PathBuf,
    /// Where to write the seed bank.
    #[arg(long)]
    seeds: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct BackendArgs {
    /// Generation backend.
    #[arg(long, default_value = "stub", value_parser = ["stub", "http"])]
    backend: String,
    /// Program table for the stub backend (bundled table when omitted).
    #[arg(long)]
    stub_table: Option<PathBuf>,
}

impl BackendArgs {
    fn build(&self, rng_seed: u64) -> Result<Box<dyn ModelBackend>> {
        match self.backend.as_str() {
            "stub" => {
                let stub = match &self.stub_table {
                    Some(path) => StubBackend::from_file(path, rng_seed)?,
                    None => StubBackend::with_shipped_table(rng_seed)?,
                };
                Ok(Box::new(stub))
            }
            "http" => Ok(Box::new(HttpBackend::from_env()?)),
            other => Err(ZfuzzError::config(format!("unknown backend '{other}'"))),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Campaign configuration file (TOML mirroring the campaign config
    /// field names).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prompt bank file.
    #[arg(long)]
    prompts: PathBuf,
    /// Seed bank file; omitted means seeds are generated inline from the
    /// prompts.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// SUT command template, e.g. "zfuzz minilang run {file} --bugs B1".
    #[arg(long)]
    sut: String,
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
    /// Directory where triggering seeds are persisted for reproduction.
    #[arg(long)]
    repro_dir: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    transcript: PathBuf,
    /// Render the score-trajectory chart for this lineage root seed id.
    #[arg(long)]
    chart: Option<String>,
    /// Weight on the complexity term of the report-only weighted score.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Weight on the accuracy term of the report-only weighted score.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
}

#[derive(Args)]
struct MinilangArgs {
    #[command(subcommand)]
    command: MinilangCommand,
}

#[derive(Subcommand)]
enum MinilangCommand {
    /// Parse and evaluate a program file.
    Run {
        file: PathBuf,
        /// Planted bugs to enable, e.g. B1,B4.
        #[arg(long, default_value = "")]
        bugs: String,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("zfuzz: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let rng_seed = cli.rng_seed.unwrap_or(0);
    let templates = TemplateStore::load(cli.templates.as_deref())?;
    let manifest = match &cli.manifest {
        Some(path) => ApiManifest::load(path)?,
        None => ApiManifest::minilang_default(),
    };

    match cli.command {
        Command::Ingest(args) => {
            let out_dir = cli.out.unwrap_or_else(|| PathBuf::from("finetune"));
            ingest(&args, &out_dir)
        }
        Command::GenPrompts(args) => gen_prompts(&args, &templates),
        Command::GenSeeds(args) => gen_seeds(&args, rng_seed),
        Command::Run(args) => run(&args, &templates, &manifest, cli.rng_seed, cli.out),
        Command::Report(args) => {
            let out_dir = cli.out.unwrap_or_else(|| PathBuf::from("report"));
            report(&args, &manifest, &out_dir)
        }
        Command::Minilang(args) => minilang(&args, rng_seed),
    }
}

fn cleaning_config(keywords: &[String]) -> CleaningConfig {
    if keywords.is_empty() {
        CleaningConfig::default()
    } else {
        CleaningConfig {
            keywords: keywords.to_vec(),
        }
    }
}

fn ingest(args: &IngestArgs, out_dir: &Path) -> Result<i32> {
    let (bug_records, bug_summary) = load_records(&args.bugs, RecordKind::Bugs)?;
    let (syntax_records, syntax_summary) = load_records(&args.syntax, RecordKind::Syntax)?;
    let LoadedRecords::Bugs(bugs) = bug_records else {
        unreachable!()
    };
    let LoadedRecords::Syntax(syntax) = syntax_records else {
        unreachable!()
    };
    println!(
        "loaded {} bug records ({} skipped), {} syntax records ({} skipped)",
        bug_summary.loaded, bug_summary.skipped, syntax_summary.loaded, syntax_summary.skipped
    );

    let (clean_bugs, bug_rejections) = clean_records(&bugs, &cleaning_config(&args.keywords));
    let (clean_syntax, syntax_rejections) = clean_syntax_records(&syntax);
    println!(
        "cleaned: {} bug records kept ({} rejected), {} syntax records kept ({} rejected)",
        clean_bugs.len(),
        bug_rejections.len(),
        clean_syntax.len(),
        syntax_rejections.len()
    );

    std::fs::create_dir_all(out_dir)?;
    let rejection_path = out_dir.join("rejections.jsonl");
    let mut log = String::new();
    for rejection in bug_rejections.iter().chain(syntax_rejections.iter()) {
        log.push_str(&serde_json::to_string(rejection)?);
        log.push('\n');
    }
    std::fs::write(&rejection_path, log)?;

    let summary = export_finetune_sets(&clean_syntax, &clean_bugs, out_dir)?;
    println!(
        "exported {} grammar samples and {} bug samples to {}",
        summary.grammar_samples,
        summary.bug_samples,
        out_dir.display()
    );
    Ok(0)
}

fn gen_prompts(args: &GenPromptsArgs, templates: &TemplateStore) -> Result<i32> {
    let (records, _) = load_records(&args.bugs, RecordKind::Bugs)?;
    let LoadedRecords::Bugs(bugs) = records else {
        unreachable!()
    };
    let (cleaned, _) = clean_records(&bugs, &cleaning_config(&args.keywords));
    if cleaned.is_empty() {
        return Err(ZfuzzError::config(
            "no bug records survived cleaning; nothing to render",
        ));
    }

    let mut bank = PromptBank::new();
    let mut analysis_dump = String::new();
    for record in &cleaned {
        if args.emit_analysis {
            let text = render_analysis_prompt(templates, record)?;
            analysis_dump.push_str(&text);
            analysis_dump.push_str("\n\n====\n\n");
        }
        let reproduction = record.code_blocks.first().cloned().unwrap_or_default();
        let environment = if record.version.trim().is_empty() {
            "unspecified".to_string()
        } else {
            record.version.clone()
        };
        bank.render_seedgen_prompt(
            templates,
            !args.no_prompt_engineering,
            &record.title,
            &reproduction,
            &environment,
            Some(record.id.clone()),
        )?;
    }
    bank.save(&args.prompts)?;
    if args.emit_analysis {
        let analysis_path = args.prompts.with_extension("analysis.txt");
        std::fs::write(&analysis_path, analysis_dump)?;
        println!("analysis prompts written to {}", analysis_path.display());
    }
    println!(
        "{} prompts written to {}",
        bank.len(),
        args.prompts.display()
    );
    Ok(0)
}

fn gen_seeds(args: &GenSeedsArgs, rng_seed: u64) -> Result<i32> {
    let mut prompt_bank = PromptBank::load(&args.prompts)?;
    let mut seed_bank = SeedBank::new();
    let backend = args.backend.build(rng_seed)?;
    let request = GenerationRequest {
        rng_seed: Some(rng_seed),
        ..Default::default()
    };
    let (stats, _) = generate_seeds(&mut prompt_bank, &mut seed_bank, backend.as_ref(), &request)?;
    seed_bank.save(&args.seeds)?;
    println!(
        "{} prompts -> {} seeds ({} duplicates, {} failures) written to {}",
        stats.attempted,
        stats.added,
        stats.duplicates,
        stats.failures,
        args.seeds.display()
    );
    Ok(0)
}

fn run(
    args: &RunArgs,
    templates: &TemplateStore,
    manifest: &ApiManifest,
    rng_seed_flag: Option<u64>,
    out: Option<PathBuf>,
) -> Result<i32> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                ZfuzzError::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str::<CampaignConfig>(&text)
                .map_err(|e| ZfuzzError::config(format!("bad config {}: {e}", path.display())))?
        }
        None => CampaignConfig::default(),
    };
    if let Some(seed) = rng_seed_flag {
        config.rng_seed = seed;
    }
    config.validate()?;

    let mut prompt_bank = PromptBank::load(&args.prompts)?;
    let backend = args.backend.build(config.rng_seed)?;
    let request = GenerationRequest {
        rng_seed: Some(config.rng_seed),
        ..Default::default()
    };
    let (mut seed_bank, pregen) = match &args.seeds {
        Some(path) => {
            let bank = SeedBank::load(path)?;
            // Rebuild lineage from the loaded seeds.
            for seed in bank.all_seeds() {
                prompt_bank.link_lineage(&seed.prompt_id, &seed.id)?;
            }
            (bank, Vec::new())
        }
        None => {
            let mut bank = SeedBank::new();
            let (stats, log) =
                generate_seeds(&mut prompt_bank, &mut bank, backend.as_ref(), &request)?;
            println!(
                "inline generation: {} prompts -> {} seeds ({} duplicates, {} failures)",
                stats.attempted, stats.added, stats.duplicates, stats.failures
            );
            (bank, log)
        }
    };

    let sut = SutConfig::new(args.sut.clone(), args.timeout_ms)?;
    let executor = Executor::new(sut)?;
    let transcript_path = out.unwrap_or_else(|| PathBuf::from("transcript.jsonl"));
    if let Some(parent) = transcript_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let repro_dir = args.repro_dir.clone().or_else(|| {
        transcript_path
            .parent()
            .map(|p| p.join("repro"))
            .filter(|p| !p.as_os_str().is_empty())
    });

    let env = CampaignEnv {
        config: &config,
        templates,
        manifest,
        backend: backend.as_ref(),
        executor: &executor,
        repro_dir,
    };
    let file = std::fs::File::create(&transcript_path)?;
    let mut writer = TranscriptWriter::new(std::io::BufWriter::new(file));
    let result = run_campaign(&env, &mut prompt_bank, &mut seed_bank, &pregen, &mut writer)?;

    if executor.leaked_process_groups() > 0 {
        return Err(ZfuzzError::invariant(format!(
            "{} process groups leaked",
            executor.leaked_process_groups()
        )));
    }
    let detected = result.registry.detected_signatures();
    println!(
        "campaign finished: {} iterations, {} anomalous executions, {} distinct signatures ({} detected)",
        result.iterations,
        result.success_seeds.len(),
        result.registry.len(),
        detected.len()
    );
    for signature in &detected {
        println!("  bug: {signature}");
    }
    println!("transcript written to {}", transcript_path.display());
    Ok(0)
}

fn report(args: &ReportArgs, manifest: &ApiManifest, out_dir: &Path) -> Result<i32> {
    let events = crate::campaign::transcript::read_transcript(&args.transcript)?;
    let metrics = crate::report::compute_metrics(&events, manifest, args.lambda, args.mu)?;

    // Rebuild the registry view from the transcript's bug events.
    let mut bugs: indexmap::IndexMap<String, crate::campaign::BugRecord> =
        indexmap::IndexMap::new();
    for event in &events {
        if let crate::campaign::transcript::Event::Bug {
            signature,
            status,
            occurrences,
            seed_id,
            prompt_id,
            reproduction_command,
            ..
        } = event
        {
            bugs.insert(
                signature.clone(),
                crate::campaign::BugRecord {
                    signature: signature.clone(),
                    first_seed_id: seed_id.clone(),
                    prompt_id: prompt_id.clone(),
                    reproduction_command: reproduction_command.clone(),
                    occurrences: *occurrences,
                    triage_status: *status,
                },
            );
        }
    }
    let bug_records: Vec<crate::campaign::BugRecord> = bugs.into_values().collect();
    crate::report::emit_reports(&metrics, &bug_records, out_dir)?;

    if let Some(lineage) = &args.chart {
        let svg =
            crate::report::render_trajectory_chart(&events, &SeedId(lineage.clone()))?;
        let chart_path = out_dir.join(format!("trajectory_{lineage}.svg"));
        std::fs::write(&chart_path, svg)?;
        println!("chart written to {}", chart_path.display());
    }
    println!(
        "unique valid: {} ({:.3}), coverage: {:.3}, detected bugs: {}, hallucination rate: {:.3}",
        metrics.unique_valid_count,
        metrics.unique_valid_rate,
        metrics.api_coverage,
        metrics.detected_bugs,
        metrics.hallucination_rate
    );
    println!("reports written to {}", out_dir.display());
    Ok(0)
}

fn minilang(args: &MinilangArgs, rng_seed: u64) -> Result<i32> {
    match &args.command {
        MinilangCommand::Run { file, bugs } => {
            let source = std::fs::read_to_string(file).map_err(|e| {
                ZfuzzError::config(format!("cannot read {}: {e}", file.display()))
            })?;
            let bug_config = BugConfig::parse_list(bugs)?;
            let mut stdout = std::io::stdout().lock();
            let mut stderr = std::io::stderr().lock();
            Ok(crate::minilang::run_source(
                &source,
                &bug_config,
                rng_seed,
                &mut stdout,
                &mut stderr,
            ))
        }
    }
}
