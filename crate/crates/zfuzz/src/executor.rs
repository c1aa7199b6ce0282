//! Subprocess sandbox: runs a seed against the system under test with a
//! timeout and process-group cleanup, classifies the outcome, and computes a
//! deduplication signature.

use std::collections::BTreeMap;
use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZfuzzError};

/// Excerpt cap for captured output.
const EXCERPT_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeKind {
    Pass,
    CompileError,
    RuntimeError,
    Crash,
    Hang,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub kind: OutcomeKind,
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
    pub stdout_excerpt: String,
    pub stderr_excerpt: String,
    pub duration_ms: u64,
    /// Empty for Pass; stable across reruns of the same fault otherwise.
    pub signature: String,
}

/// How to invoke the system under test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SutConfig {
    /// Command line with a `{file}` placeholder for the seed path,
    /// e.g. `mojo run {file}` or `zfuzz minilang run {file} --bugs B1`.
    pub command_template: String,
    pub timeout_ms: u64,
    #[serde(default)]
    pub working_dir: Option<PathBuf>,
    #[serde(default)]
    pub env_overrides: BTreeMap<String, String>,
}

impl SutConfig {
    pub fn new(command_template: impl Into<String>, timeout_ms: u64) -> Result<Self> {
        let config = SutConfig {
            command_template: command_template.into(),
            timeout_ms,
            working_dir: None,
            env_overrides: BTreeMap::new(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let placeholders = self.command_template.matches("{file}").count();
        if placeholders != 1 {
            return Err(ZfuzzError::config(format!(
                "command template must contain {{file}} exactly once, found {placeholders}"
            )));
        }
        if self.timeout_ms < 100 {
            return Err(ZfuzzError::config("timeout must be at least 100 ms"));
        }
        Ok(())
    }
}

/// Classification rule table, applied in order: timeout, signal, stderr
/// prefix, exit status. Total: exactly one kind per raw result.
pub fn classify_outcome(
    exit_code: Option<i32>,
    signal: Option<i32>,
    stderr: &str,
    duration_ms: u64,
    timeout_ms: u64,
) -> OutcomeKind {
    if duration_ms >= timeout_ms {
        return OutcomeKind::Hang;
    }
    if signal.is_some() {
        return OutcomeKind::Crash;
    }
    let first_line = stderr.lines().next().unwrap_or("");
    if first_line.starts_with("CompileError:") {
        return OutcomeKind::CompileError;
    }
    if first_line.starts_with("RuntimeError:") {
        return OutcomeKind::RuntimeError;
    }
    if exit_code == Some(0) {
        return OutcomeKind::Pass;
    }
    OutcomeKind::Unknown
}

/// Deduplication signature: kind, normalized first stderr line, and the
/// killing signal for crashes. Digits become `<N>`, quoted literals `<S>`,
/// path-like tokens `<PATH>`; the kind prefix is dropped from the line.
pub fn error_signature(
    kind: OutcomeKind,
    stderr: &str,
    signal: Option<i32>,
) -> String {
    debug_assert!(kind != OutcomeKind::Pass);
    let first_line = stderr.lines().next().unwrap_or("");
    let mut line = first_line.trim();
    for prefix in ["CompileError:", "RuntimeError:"] {
        if let Some(rest) = line.strip_prefix(prefix) {
            line = rest.trim_start();
            break;
        }
    }
    let normalized = normalize_error_line(line);
    let body = if normalized.is_empty() {
        if kind == OutcomeKind::Hang {
            "<timeout>".to_string()
        } else {
            "<no output>".to_string()
        }
    } else {
        normalized
    };
    let kind_name = format!("{kind:?}");
    match (kind, signal) {
        (OutcomeKind::Crash, Some(sig)) => format!("{kind_name}|{body}|{sig}"),
        _ => format!("{kind_name}|{body}"),
    }
}

fn normalize_error_line(line: &str) -> String {
    // Quoted literals first so digits inside them collapse to one token.
    let mut out = String::new();
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\'' || c == '"' {
            let quote = c;
            let mut closed = false;
            for n in chars.by_ref() {
                if n == quote {
                    closed = true;
                    break;
                }
            }
            out.push_str(if closed { "<S>" } else { "" });
        } else {
            out.push(c);
        }
    }
    // Path-like tokens, then digit runs.
    let tokens: Vec<String> = out
        .split_whitespace()
        .map(|tok| {
            if tok.contains('/') && tok.len() > 1 {
                "<PATH>".to_string()
            } else {
                replace_digit_runs(tok)
            }
        })
        .collect();
    tokens.join(" ")
}

fn replace_digit_runs(token: &str) -> String {
    let mut out = String::new();
    let mut in_digits = false;
    for c in token.chars() {
        if c.is_ascii_digit() {
            if !in_digits {
                out.push_str("<N>");
                in_digits = true;
            }
        } else {
            in_digits = false;
            out.push(c);
        }
    }
    out
}

/// Splits a command template into argv words, honoring single and double
/// quotes.
pub fn split_command(template: &str) -> Result<Vec<String>> {
    let mut words = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut had_any = false;
    for c in template.chars() {
        match quote {
            Some(q) => {
                if c == q {
                    quote = None;
                } else {
                    current.push(c);
                }
            }
            None => match c {
                '\'' | '"' => {
                    quote = Some(c);
                    had_any = true;
                }
                c if c.is_whitespace() => {
                    if !current.is_empty() || had_any {
                        words.push(std::mem::take(&mut current));
                        had_any = false;
                    }
                }
                c => current.push(c),
            },
        }
    }
    if quote.is_some() {
        return Err(ZfuzzError::config("unterminated quote in command template"));
    }
    if !current.is_empty() || had_any {
        words.push(current);
    }
    if words.is_empty() {
        return Err(ZfuzzError::config("empty command template"));
    }
    Ok(words)
}

/// Runs seeds in isolated temp directories under a process-group sandbox.
pub struct Executor {
    config: SutConfig,
    /// Process groups that survived the post-run cleanup check.
    leaked_groups: AtomicU64,
}

impl Executor {
    pub fn new(config: SutConfig) -> Result<Self> {
        config.validate()?;
        // Adopt orphaned grandchildren so the post-run group check can reap
        // them instead of leaving zombies on inits that never do.
        unsafe {
            libc::prctl(libc::PR_SET_CHILD_SUBREAPER, 1);
        }
        Ok(Executor {
            config,
            leaked_groups: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &SutConfig {
        &self.config
    }

    /// Process groups left behind by runs so far; the campaign asserts this
    /// stays zero.
    pub fn leaked_process_groups(&self) -> u64 {
        self.leaked_groups.load(Ordering::SeqCst)
    }

    /// The exact invocation used for a given persisted seed file, suitable
    /// for a reproduction command.
    pub fn reproduction_command(&self, seed_path: &str) -> String {
        self.config.command_template.replace("{file}", seed_path)
    }

    /// Write `source` to a temp file, run the SUT on it with the timeout
    /// enforced, terminate the whole process tree on expiry, and classify.
    pub fn run_seed(&self, source: &str) -> Result<ExecutionOutcome> {
        let dir = tempfile::TempDir::new()?;
        let file_path = dir.path().join("seed.ml");
        std::fs::write(&file_path, source)?;

        let words = split_command(&self.config.command_template)?;
        let argv: Vec<String> = words
            .into_iter()
            .map(|w| w.replace("{file}", &file_path.to_string_lossy()))
            .collect();

        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0);
        if let Some(wd) = &self.config.working_dir {
            cmd.current_dir(wd);
        } else {
            cmd.current_dir(dir.path());
        }
        for (k, v) in &self.config.env_overrides {
            cmd.env(k, v);
        }

        let start = Instant::now();
        let mut child = cmd.spawn().map_err(|e| {
            ZfuzzError::config(format!("cannot launch SUT '{}': {e}", argv[0]))
        })?;
        let pid = child.id() as i32;

        let mut stdout_pipe = child.stdout.take().expect("stdout piped");
        let mut stderr_pipe = child.stderr.take().expect("stderr piped");
        let out_reader = std::thread::spawn(move || read_capped(&mut stdout_pipe));
        let err_reader = std::thread::spawn(move || read_capped(&mut stderr_pipe));

        let timeout = Duration::from_millis(self.config.timeout_ms);
        let mut timed_out = false;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if start.elapsed() >= timeout {
                timed_out = true;
                kill_group(pid);
                let status = child.wait()?;
                break status;
            }
            std::thread::sleep(Duration::from_millis(2));
        };
        let duration = start.elapsed();

        let stdout_excerpt = out_reader.join().unwrap_or_default();
        let stderr_excerpt = err_reader.join().unwrap_or_default();

        // The child is reaped; probe the group for stragglers.
        if !self.group_is_clean(pid) {
            self.leaked_groups.fetch_add(1, Ordering::SeqCst);
            log::error!("process group {pid} still has members after cleanup");
        }

        let exit_code = status.code();
        let signal = status.signal();
        // Clamp so the reported duration agrees with the Hang decision even
        // when a process exits right at the deadline.
        let duration_ms = if timed_out {
            duration.as_millis().max(self.config.timeout_ms as u128) as u64
        } else {
            (duration.as_millis() as u64).min(self.config.timeout_ms - 1)
        };
        let kind = classify_outcome(
            exit_code,
            signal,
            &stderr_excerpt,
            duration_ms,
            self.config.timeout_ms,
        );
        let signature = if kind == OutcomeKind::Pass {
            String::new()
        } else {
            error_signature(kind, &stderr_excerpt, signal)
        };
        Ok(ExecutionOutcome {
            kind,
            exit_code,
            signal,
            stdout_excerpt,
            stderr_excerpt,
            duration_ms,
            signature,
        })
    }

    /// After killing, confirm the process group is gone. Reaps adopted
    /// orphans and retries briefly to absorb signal-delivery latency.
    fn group_is_clean(&self, pgid: i32) -> bool {
        for _ in 0..200 {
            // Reap any group members reparented to us by the subreaper.
            loop {
                let reaped = unsafe { libc::waitpid(-pgid, std::ptr::null_mut(), libc::WNOHANG) };
                if reaped <= 0 {
                    break;
                }
            }
            // killpg(pgid, 0) probes for any remaining member.
            let alive = unsafe { libc::killpg(pgid, 0) } == 0;
            if !alive {
                return true;
            }
            kill_group(pgid);
            std::thread::sleep(Duration::from_millis(2));
        }
        false
    }
}

fn kill_group(pgid: i32) {
    unsafe {
        libc::killpg(pgid, libc::SIGKILL);
    }
}

fn read_capped(pipe: &mut impl Read) -> String {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    loop {
        match pipe.read(&mut chunk) {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                if buf.len() < EXCERPT_LIMIT {
                    let take = n.min(EXCERPT_LIMIT - buf.len());
                    buf.extend_from_slice(&chunk[..take]);
                }
                // Keep draining past the cap so the child never blocks on a
                // full pipe.
            }
        }
    }
    String::from_utf8_lossy(&buf).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_rule_table() {
        use OutcomeKind::*;
        assert_eq!(
            classify_outcome(Some(1), None, "RuntimeError: div by zero", 12, 1000),
            RuntimeError
        );
        assert_eq!(classify_outcome(None, Some(6), "", 5, 1000), Crash);
        assert_eq!(classify_outcome(Some(0), None, "", 3, 1000), Pass);
        assert_eq!(
            classify_outcome(Some(1), None, "CompileError: bad token", 3, 1000),
            CompileError
        );
        assert_eq!(classify_outcome(None, Some(9), "", 1000, 1000), Hang);
        assert_eq!(classify_outcome(Some(3), None, "garbled", 5, 1000), Unknown);
    }

    #[test]
    fn classification_is_total_and_single_valued() {
        // Every cell of the rule table yields exactly one kind; spot-check
        // precedence: timeout beats signal beats stderr beats exit code.
        assert_eq!(
            classify_outcome(Some(0), Some(9), "CompileError: x", 999, 500),
            OutcomeKind::Hang
        );
        assert_eq!(
            classify_outcome(Some(0), Some(9), "CompileError: x", 10, 500),
            OutcomeKind::Crash
        );
        assert_eq!(
            classify_outcome(Some(0), None, "CompileError: x", 10, 500),
            OutcomeKind::CompileError
        );
    }

    #[test]
    fn signature_normalizes_digits() {
        let sig = error_signature(
            OutcomeKind::RuntimeError,
            "RuntimeError: index 17 out of range",
            None,
        );
        assert_eq!(sig, "RuntimeError|index <N> out of range");
    }

    #[test]
    fn signature_normalizes_quoted_literals() {
        let sig = error_signature(
            OutcomeKind::RuntimeError,
            "RuntimeError: unexpected sign in integer literal '+42'",
            None,
        );
        assert_eq!(sig, "RuntimeError|unexpected sign in integer literal <S>");
    }

    #[test]
    fn signature_strips_paths() {
        let sig = error_signature(
            OutcomeKind::RuntimeError,
            "RuntimeError: cannot open /tmp/xyz123/seed.ml here",
            None,
        );
        assert_eq!(sig, "RuntimeError|cannot open <PATH> here");
    }

    #[test]
    fn hang_with_empty_stderr() {
        assert_eq!(error_signature(OutcomeKind::Hang, "", None), "Hang|<timeout>");
    }

    #[test]
    fn crash_includes_signal() {
        assert_eq!(
            error_signature(OutcomeKind::Crash, "", Some(6)),
            "Crash|<no output>|6"
        );
    }

    #[test]
    fn equal_faults_equal_signatures() {
        let a = error_signature(OutcomeKind::Crash, "boom at 17", Some(11));
        let b = error_signature(OutcomeKind::Crash, "boom at 99", Some(11));
        assert_eq!(a, b);
    }

    #[test]
    fn template_validation() {
        assert!(SutConfig::new("run {file}", 1000).is_ok());
        assert!(SutConfig::new("run nothing", 1000).is_err());
        assert!(SutConfig::new("run {file} {file}", 1000).is_err());
        assert!(SutConfig::new("run {file}", 50).is_err());
    }

    #[test]
    fn split_command_handles_quotes() {
        assert_eq!(
            split_command("mojo run {file}").unwrap(),
            vec!["mojo", "run", "{file}"]
        );
        assert_eq!(
            split_command("sh -c 'echo hi there'").unwrap(),
            vec!["sh", "-c", "echo hi there"]
        );
        assert!(split_command("broken 'quote").is_err());
        assert!(split_command("   ").is_err());
    }

    #[test]
    fn missing_binary_is_config_error_not_outcome() {
        let exec = Executor::new(
            SutConfig::new("/no/such/binary-zfuzz {file}", 1000).unwrap(),
        )
        .unwrap();
        let err = exec.run_seed("x = 1\n").unwrap_err();
        assert!(matches!(err, ZfuzzError::Config(_)));
    }

    #[test]
    fn runs_true_as_pass() {
        // `sh -c "exit 0"` with the file substituted into an ignored arg.
        let exec = Executor::new(SutConfig::new("sh -c 'exit 0' sh {file}", 1000).unwrap())
            .unwrap();
        let out = exec.run_seed("ignored").unwrap();
        assert_eq!(out.kind, OutcomeKind::Pass);
        assert!(out.signature.is_empty());
        assert_eq!(exec.leaked_process_groups(), 0);
    }

    #[test]
    fn hang_detection_and_group_cleanup() {
        let exec = Executor::new(
            SutConfig::new("sh -c 'sleep 30' sh {file}", 300).unwrap(),
        )
        .unwrap();
        let start = Instant::now();
        let out = exec.run_seed("ignored").unwrap();
        assert_eq!(out.kind, OutcomeKind::Hang);
        assert!(start.elapsed() < Duration::from_secs(5));
        assert_eq!(out.signature, "Hang|<timeout>");
        assert_eq!(exec.leaked_process_groups(), 0);
    }

    #[test]
    fn child_spawning_grandchildren_is_fully_reaped() {
        // The SUT spawns a long-lived grandchild; group kill must take it too.
        let exec = Executor::new(
            SutConfig::new("sh -c 'sleep 30 & sleep 30' sh {file}", 300).unwrap(),
        )
        .unwrap();
        let out = exec.run_seed("ignored").unwrap();
        assert_eq!(out.kind, OutcomeKind::Hang);
        assert_eq!(exec.leaked_process_groups(), 0);
    }

    #[test]
    fn excerpts_are_capped_at_4k() {
        let exec = Executor::new(
            SutConfig::new(
                "sh -c 'yes abcdefghijklmnop | head -c 100000' sh {file}",
                2000,
            )
            .unwrap(),
        )
        .unwrap();
        let out = exec.run_seed("ignored").unwrap();
        assert_eq!(out.kind, OutcomeKind::Pass);
        assert!(out.stdout_excerpt.len() <= EXCERPT_LIMIT);
    }
}
