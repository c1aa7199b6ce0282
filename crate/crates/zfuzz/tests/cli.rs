//! End-to-end exercise of the `zfuzz` binary surface: every subcommand, the
//! documented exit codes, and the file formats the commands exchange.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_zfuzz")
}

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(file)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary launches")
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let prompts = dir.path().join("prompts.jsonl");
    let seeds = dir.path().join("seeds.jsonl");
    let transcript = dir.path().join("transcript.jsonl");
    let report_dir = dir.path().join("report");
    let finetune_dir = dir.path().join("finetune");

    // ingest
    let out = run(&[
        "--out",
        &path_str(&finetune_dir),
        "ingest",
        "--bugs",
        &path_str(&data("corpus/bug_reports.jsonl")),
        "--syntax",
        &path_str(&data("corpus/syntax.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(finetune_dir.join("grammar.jsonl").exists());
    assert!(finetune_dir.join("bugs.jsonl").exists());
    assert!(finetune_dir.join("rejections.jsonl").exists());

    // gen-prompts
    let out = run(&[
        "gen-prompts",
        "--bugs",
        &path_str(&data("corpus/bug_reports.jsonl")),
        "--prompts",
        &path_str(&prompts),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let prompt_lines = std::fs::read_to_string(&prompts).unwrap().lines().count();
    assert!(prompt_lines >= 10, "expected a bank, got {prompt_lines} prompts");

    // gen-seeds
    let out = run(&[
        "--rng-seed",
        "42",
        "gen-seeds",
        "--prompts",
        &path_str(&prompts),
        "--seeds",
        &path_str(&seeds),
        "--backend",
        "stub",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(seeds.exists());

    // run (with pre-generated seeds this time)
    let config = dir.path().join("campaign.toml");
    std::fs::write(
        &config,
        "max_iterations = 60\nscore_threshold = 8\nrng_seed = 42\n",
    )
    .unwrap();
    let sut = format!("{} minilang run {{file}} --bugs B1,B3 --rng-seed 7", bin());
    let out = run(&[
        "--out",
        &path_str(&transcript),
        "run",
        "--config",
        &path_str(&config),
        "--prompts",
        &path_str(&prompts),
        "--seeds",
        &path_str(&seeds),
        "--sut",
        &sut,
        "--timeout-ms",
        "2000",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("campaign finished"), "{stdout}");
    assert!(transcript.exists());

    // report (+ chart for the first seed lineage)
    let out = run(&[
        "--out",
        &path_str(&report_dir),
        "report",
        "--transcript",
        &path_str(&transcript),
        "--chart",
        "s000001",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report_dir.join("metrics.json").exists());
    assert!(report_dir.join("bug_registry.tsv").exists());
    assert!(report_dir.join("triage_summary.txt").exists());
    assert!(report_dir.join("trajectory_s000001.svg").exists());
}

#[test]
fn missing_corpus_file_exits_one() {
    let out = run(&[
        "ingest",
        "--bugs",
        "/no/such/bugs.jsonl",
        "--syntax",
        "/no/such/syntax.jsonl",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn unreachable_http_backend_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let prompts = dir.path().join("prompts.jsonl");
    run(&[
        "gen-prompts",
        "--bugs",
        &path_str(&data("corpus/bug_reports.jsonl")),
        "--prompts",
        &path_str(&prompts),
    ]);
    let out = Command::new(bin())
        .args([
            "gen-seeds",
            "--prompts",
            &path_str(&prompts),
            "--seeds",
            &path_str(&dir.path().join("seeds.jsonl")),
            "--backend",
            "http",
        ])
        .env("ZFUZZ_BACKEND_URL", "http://127.0.0.1:1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("backend error"));
}

#[test]
fn bad_sut_template_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let prompts = dir.path().join("prompts.jsonl");
    run(&[
        "gen-prompts",
        "--bugs",
        &path_str(&data("corpus/bug_reports.jsonl")),
        "--prompts",
        &path_str(&prompts),
    ]);
    let out = run(&[
        "run",
        "--prompts",
        &path_str(&prompts),
        "--sut",
        "no placeholder here",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn templates_flag_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("seedgen_minimal.txt"),
        "customized probe for {problem}\n",
    )
    .unwrap();
    let prompts = dir.path().join("prompts.jsonl");
    let out = run(&[
        "--templates",
        &path_str(dir.path()),
        "gen-prompts",
        "--bugs",
        &path_str(&data("corpus/bug_reports.jsonl")),
        "--prompts",
        &path_str(&prompts),
        "--no-prompt-engineering",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&prompts).unwrap();
    assert!(text.contains("customized probe for"));
}

#[test]
fn manifest_flag_loads_custom_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("apis.txt");
    std::fs::write(&manifest, "len\nsum\nsorted=sum\n").unwrap();
    let transcript = dir.path().join("t.jsonl");
    let prompts = dir.path().join("prompts.jsonl");
    run(&[
        "gen-prompts",
        "--bugs",
        &path_str(&data("corpus/bug_reports.jsonl")),
        "--prompts",
        &path_str(&prompts),
    ]);
    let sut = format!("{} minilang run {{file}} --rng-seed 7", bin());
    let out = run(&[
        "--manifest",
        &path_str(&manifest),
        "--out",
        &path_str(&transcript),
        "run",
        "--prompts",
        &path_str(&prompts),
        "--sut",
        &sut,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn minilang_subcommand_honors_bug_flags() {
    let dir = tempfile::tempdir().unwrap();
    let program = dir.path().join("probe.ml");
    std::fs::write(&program, "print(pow(0, 0))\n").unwrap();

    let healthy = run(&["minilang", "run", &path_str(&program)]);
    assert_eq!(healthy.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&healthy.stdout), "1\n");

    use std::os::unix::process::ExitStatusExt;
    let buggy = run(&["minilang", "run", &path_str(&program), "--bugs", "B5"]);
    assert_eq!(buggy.status.signal(), Some(libc::SIGABRT));
}

#[test]
fn unknown_bug_id_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let program = dir.path().join("p.ml");
    std::fs::write(&program, "print(1)\n").unwrap();
    let out = run(&["minilang", "run", &path_str(&program), "--bugs", "B9"]);
    assert_eq!(out.status.code(), Some(1));
}
