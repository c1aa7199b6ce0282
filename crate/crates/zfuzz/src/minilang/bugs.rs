//! Planted-bug configuration, canonical trigger programs, and the signature
//! oracle used by the acceptance suite.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ZfuzzError;

/// The five planted defects. Each is deterministic given its trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlantedBug {
    /// `random_si64(a, b)` always returns `a`.
    B1FixedRandom,
    /// `np_add` on two arrays fails with "extension call failed".
    B2ArrayInterop,
    /// `parse_int` rejects explicitly signed positives like `"+42"`.
    B3ParseSign,
    /// `sort` loops forever on lists of length >= 2 containing duplicates.
    B4SortHang,
    /// `pow(0, 0)` aborts the process.
    B5PowAbort,
}

impl PlantedBug {
    pub const ALL: [PlantedBug; 5] = [
        PlantedBug::B1FixedRandom,
        PlantedBug::B2ArrayInterop,
        PlantedBug::B3ParseSign,
        PlantedBug::B4SortHang,
        PlantedBug::B5PowAbort,
    ];

    pub fn short_id(&self) -> &'static str {
        match self {
            PlantedBug::B1FixedRandom => "B1",
            PlantedBug::B2ArrayInterop => "B2",
            PlantedBug::B3ParseSign => "B3",
            PlantedBug::B4SortHang => "B4",
            PlantedBug::B5PowAbort => "B5",
        }
    }

    pub fn long_id(&self) -> &'static str {
        match self {
            PlantedBug::B1FixedRandom => "B1_fixed_random",
            PlantedBug::B2ArrayInterop => "B2_array_interop",
            PlantedBug::B3ParseSign => "B3_parse_sign",
            PlantedBug::B4SortHang => "B4_sort_hang",
            PlantedBug::B5PowAbort => "B5_pow_abort",
        }
    }

    /// The error signature the executor computes for this bug's canonical
    /// trigger. Verified against live runs by the interpreter tests and the
    /// acceptance suite.
    pub fn signature(&self) -> &'static str {
        match self {
            PlantedBug::B1FixedRandom => "RuntimeError|division by zero",
            PlantedBug::B2ArrayInterop => "RuntimeError|extension call failed",
            PlantedBug::B3ParseSign => "RuntimeError|unexpected sign in integer literal <S>",
            PlantedBug::B4SortHang => "Hang|<timeout>",
            PlantedBug::B5PowAbort => "Crash|<no output>|6",
        }
    }
}

impl fmt::Display for PlantedBug {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_id())
    }
}

impl FromStr for PlantedBug {
    type Err = ZfuzzError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        for bug in PlantedBug::ALL {
            if t.eq_ignore_ascii_case(bug.short_id()) || t.eq_ignore_ascii_case(bug.long_id()) {
                return Ok(bug);
            }
        }
        Err(ZfuzzError::config(format!(
            "unknown bug id '{s}' (expected B1..B5)"
        )))
    }
}

/// Which planted bugs are active for a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugConfig {
    enabled: BTreeSet<PlantedBug>,
}

impl BugConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with(bugs: impl IntoIterator<Item = PlantedBug>) -> Self {
        BugConfig {
            enabled: bugs.into_iter().collect(),
        }
    }

    /// Parse a comma-separated list like `B1,B4`.
    pub fn parse_list(list: &str) -> Result<Self, ZfuzzError> {
        let mut enabled = BTreeSet::new();
        for part in list.split(',').filter(|p| !p.trim().is_empty()) {
            enabled.insert(part.parse()?);
        }
        Ok(BugConfig { enabled })
    }

    pub fn is_enabled(&self, bug: PlantedBug) -> bool {
        self.enabled.contains(&bug)
    }

    pub fn enabled(&self) -> impl Iterator<Item = PlantedBug> + '_ {
        self.enabled.iter().copied()
    }

    /// Render back to the `--bugs` flag form.
    pub fn to_flag(&self) -> String {
        self.enabled
            .iter()
            .map(|b| b.short_id())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Canonical trigger program for a bug. These ship with the repository under
/// `data/triggers/` and are embedded so the oracle works anywhere.
pub fn canonical_trigger(bug: PlantedBug) -> &'static str {
    match bug {
        PlantedBug::B1FixedRandom => include_str!("../../data/triggers/b1_fixed_random.ml"),
        PlantedBug::B2ArrayInterop => include_str!("../../data/triggers/b2_array_interop.ml"),
        PlantedBug::B3ParseSign => include_str!("../../data/triggers/b3_parse_sign.ml"),
        PlantedBug::B4SortHang => include_str!("../../data/triggers/b4_sort_hang.ml"),
        PlantedBug::B5PowAbort => include_str!("../../data/triggers/b5_pow_abort.ml"),
    }
}

/// Ground truth for acceptance tests: the exact executor signature reachable
/// from each enabled bug's canonical trigger.
pub fn bug_oracle(config: &BugConfig) -> BTreeSet<String> {
    config
        .enabled()
        .map(|b| b.signature().to_string())
        .collect()
}
