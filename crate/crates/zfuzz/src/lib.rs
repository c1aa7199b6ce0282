//! zfuzz: an adaptive, model-driven fuzzing orchestrator for compilers and
//! interpreters of emerging languages.
//!
//! The pipeline ingests bug reports and syntax documentation into a cleaned
//! corpus, renders structured prompts into a prompt bank, asks a generation
//! backend (an HTTP chat-completion endpoint or a deterministic offline stub)
//! for candidate test programs, and runs a campaign loop that executes each
//! seed against the system under test, scores it (API call count plus an
//! asymptotic-complexity class), and branches into bug registration,
//! code-level "half" mutation, or prompt-level "full" mutation. A bundled
//! tree-walking interpreter for MiniLang with five configurable planted bugs
//! makes the whole loop runnable fully offline.
//!
//! Every major capability has a runnable example under `examples/`:
//!
//! - `ingest_corpus` — corpus cleaning and fine-tune dataset export
//! - `render_prompts` — five-component analysis and seed-generation prompts
//! - `generate_seeds` — populating the seed bank through the stub backend
//! - `score_programs` — API counting, complexity classes, mutation scores
//! - `minilang_bugs` — the reference interpreter and its planted bugs
//! - `mutate_seeds` — half (code-level) and full (prompt-level) mutation
//! - `run_campaign` — the end-to-end campaign loop
//! - `report_metrics` — campaign metrics, bug tables, score trajectories
//!
//! The `zfuzz` binary is a thin front end over this library; see the README
//! for the subcommand surface.

pub mod backend;
pub mod campaign;
pub mod corpus;
pub mod error;
pub mod executor;
pub mod lang;
pub mod minilang;
pub mod mutation;
pub mod prompt_bank;
pub mod report;
pub mod scorer;
pub mod seed_bank;
pub mod templates;

pub mod cli;

pub use error::{Result, ZfuzzError};
