//! Generation backends: the contract that turns a prompt into candidate
//! code, with an HTTP chat-completion client for live models and a
//! deterministic table-driven stub for offline runs and tests.

mod http;
mod stub;

pub use http::{HttpBackend, HttpBackendConfig, ENV_API_KEY, ENV_BACKEND_URL, ENV_MODEL};
pub use stub::{
    apply_directive, directive_line, parse_directives, Directive, StubBackend, StubEntry,
    DIRECTIVE_PREFIX,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lang;

/// Default sampling temperature for initial generation.
pub const DEFAULT_TEMPERATURE: f64 = 0.8;
/// Temperature used when regenerating after a full (prompt-level) mutation.
pub const FULL_MUTATION_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt_text: String,
    /// In [0, 2].
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_name: String,
    /// Stub only; ignored by live backends.
    pub rng_seed: Option<u64>,
}

impl Default for GenerationRequest {
    fn default() -> Self {
        GenerationRequest {
            prompt_text: String::new(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: 1024,
            model_name: "default".to_string(),
            rng_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub raw_text: String,
    /// Present exactly when `raw_text` contains a code region.
    pub extracted_code: Option<String>,
    pub latency_ms: u64,
    pub backend_id: String,
}

/// A generation backend. Implementations never fail on empty or garbage
/// model output — that is a measured outcome; errors are reserved for
/// transport and configuration problems.
pub trait ModelBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult>;

    fn id(&self) -> &str;

    /// Whether half-mutation prompts should embed machine-readable
    /// directives this backend applies mechanically.
    fn supports_directives(&self) -> bool {
        false
    }
}

/// Pull the test program out of a model response: the first fenced code
/// region if any fence exists; otherwise the whole response when it parses
/// under the target grammar; otherwise nothing. Never returns an empty
/// string.
pub fn extract_code(raw_text: &str) -> Option<String> {
    let mut in_fence = false;
    let mut body = String::new();
    let mut saw_fence = false;
    for line in raw_text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") {
            if in_fence {
                // First fenced region complete.
                let code = body.trim_end().to_string();
                return if code.trim().is_empty() { None } else { Some(code) };
            }
            saw_fence = true;
            in_fence = true;
            continue;
        }
        if in_fence {
            body.push_str(line);
            body.push('\n');
        }
    }
    if saw_fence {
        // Unterminated fence: take what was collected.
        let code = body.trim_end().to_string();
        return if code.trim().is_empty() { None } else { Some(code) };
    }
    let whole = raw_text.trim();
    if whole.is_empty() {
        return None;
    }
    if lang::parse(raw_text).is_ok() {
        return Some(raw_text.trim_end().to_string());
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_first_fenced_block() {
        let raw = "Here you go:\n```\nx = 1\nprint(x)\n```\nand another\n```\ny = 2\n```\n";
        assert_eq!(extract_code(raw), Some("x = 1\nprint(x)".to_string()));
    }

    #[test]
    fn fence_with_language_tag() {
        let raw = "```mojo\nx = 1\n```\n";
        assert_eq!(extract_code(raw), Some("x = 1".to_string()));
    }

    #[test]
    fn prose_only_is_absent() {
        assert_eq!(extract_code("I cannot help with that request."), None);
    }

    #[test]
    fn unfenced_response_that_parses_is_whole_response() {
        let raw = "x = 1\nprint(x)\n";
        assert_eq!(extract_code(raw), Some("x = 1\nprint(x)".to_string()));
    }

    #[test]
    fn empty_fence_is_absent_not_empty_string() {
        assert_eq!(extract_code("```\n\n```\n"), None);
        assert_eq!(extract_code(""), None);
    }
}
