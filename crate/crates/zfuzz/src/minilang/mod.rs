//! Bundled reference system under test: a tree-walking interpreter for
//! MiniLang with configurable planted bugs.
//!
//! The interpreter is invoked as a standalone executable per seed
//! (`zfuzz minilang run <file> [--bugs B1,B4] [--rng-seed N]`) and follows a
//! bit-exact stderr contract with the executor: parse failures print
//! `CompileError: <reason> at line L`, runtime faults print
//! `RuntimeError: <reason>`, both exiting nonzero. Bug B5 aborts the process
//! and B4 hangs; all other behavior is deterministic given the RNG seed.

mod bugs;
mod interp;

pub use bugs::{bug_oracle, canonical_trigger, BugConfig, PlantedBug};
pub use interp::{run_program, ExecError, Interpreter, Value};

use crate::error::ZfuzzError;
use crate::lang;

/// Exit code for programs rejected by the parser.
pub const EXIT_COMPILE_ERROR: i32 = 65;
/// Exit code for programs that fault at runtime.
pub const EXIT_RUNTIME_ERROR: i32 = 70;

/// Run `source` the way the standalone executable does: parse, evaluate,
/// and map failures to the stderr contract. Returns the process exit code;
/// output goes to the given writers.
pub fn run_source(
    source: &str,
    bug_config: &BugConfig,
    rng_seed: u64,
    stdout: &mut dyn std::io::Write,
    stderr: &mut dyn std::io::Write,
) -> i32 {
    let program = match lang::parse(source) {
        Ok(p) => p,
        Err(ZfuzzError::Parse { line, message, .. }) => {
            let _ = writeln!(stderr, "CompileError: {message} at line {line}");
            return EXIT_COMPILE_ERROR;
        }
        Err(other) => {
            let _ = writeln!(stderr, "CompileError: {other} at line 0");
            return EXIT_COMPILE_ERROR;
        }
    };
    match run_program(&program, bug_config, rng_seed, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "RuntimeError: {}", e.message);
            EXIT_RUNTIME_ERROR
        }
    }
}
