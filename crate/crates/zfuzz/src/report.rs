//! Campaign metrics, charts, and report files computed from transcripts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::campaign::transcript::{Event, GenerationRole};
use crate::campaign::{BugRecord, TriageStatus};
use crate::error::{Result, ZfuzzError};
use crate::prompt_bank::SeedId;
use crate::scorer::{count_api_calls_in, estimate_complexity_in, ApiManifest};
use crate::seed_bank::{normalize_source, CodeSeed};

/// Per-lineage mutation-efficiency record: the score trajectory across
/// mutation rounds plus the report-only weighted score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageEfficiency {
    pub root_seed_id: SeedId,
    /// (mutation round, score total) for each scoreable seed in the chain.
    pub trajectory: Vec<(u32, i64)>,
    /// Fraction of this lineage's generations that produced parseable code.
    pub valid_fraction: f64,
    /// lambda * final complexity score + mu * valid_fraction.
    pub weighted_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub total_generations: u64,
    pub unique_valid_count: u64,
    pub unique_valid_rate: f64,
    /// Distinct manifest APIs invoked by executed valid seeds over manifest
    /// size.
    pub api_coverage: f64,
    pub detected_bugs: u64,
    /// Fraction of generations that hallucinated: no code, unparseable code,
    /// or calls to names outside the manifest.
    pub hallucination_rate: f64,
    pub mutation_efficiency: Vec<LineageEfficiency>,
    /// Canonical API name to total call-site count over scored seeds.
    pub api_call_distribution: BTreeMap<String, i64>,
}

/// Compute the campaign metrics from a transcript.
///
/// Validity is judged statically (the scorer's grammar is the interpreter's
/// grammar, so parse failure and CompileError coincide); every number here
/// is recomputable by an independent brute-force pass over the same events.
pub fn compute_metrics(
    events: &[Event],
    manifest: &ApiManifest,
    lambda: f64,
    mu: f64,
) -> Result<MetricsSummary> {
    if lambda < 0.0 || mu < 0.0 {
        return Err(ZfuzzError::config(
            "weighted score factors must be non-negative",
        ));
    }
    let view = TranscriptView::build(events);

    // Unique valid programs: normalized sources of executed seeds whose
    // outcome was not a compile error.
    let mut valid_sources: BTreeSet<String> = BTreeSet::new();
    for (seed_id, compile_error) in &view.executions {
        if *compile_error {
            continue;
        }
        if let Some(seed) = view.seeds.get(seed_id) {
            valid_sources.insert(normalize_source(&seed.source));
        }
    }
    let unique_valid_count = valid_sources.len() as u64;
    let total_generations = view.generations.len() as u64;
    let unique_valid_rate = if total_generations == 0 {
        log::warn!("transcript has no generations; rates reported as 0");
        0.0
    } else {
        unique_valid_count as f64 / total_generations as f64
    };

    // API coverage over executed valid seeds.
    let mut covered: BTreeSet<String> = BTreeSet::new();
    for (seed_id, compile_error) in &view.executions {
        if *compile_error {
            continue;
        }
        if let Some(program) = view.parsed(seed_id) {
            covered.extend(count_api_calls_in(&program, manifest).distinct_apis);
        }
    }
    let api_coverage = if manifest.is_empty() {
        0.0
    } else {
        covered.len() as f64 / manifest.len() as f64
    };

    // Hallucination rate over generations.
    let mut hallucinated = 0u64;
    for generation in &view.generations {
        if generation_hallucinated(generation, &view, manifest) {
            hallucinated += 1;
        }
    }
    let hallucination_rate = if total_generations == 0 {
        0.0
    } else {
        hallucinated as f64 / total_generations as f64
    };

    // Detected bugs: final status per signature.
    let detected_bugs = view
        .bug_status
        .values()
        .filter(|s| matches!(s, TriageStatus::New | TriageStatus::Confirmed))
        .count() as u64;

    // API call distribution over scored seeds.
    let mut api_call_distribution: BTreeMap<String, i64> = BTreeMap::new();
    for seed_id in &view.scored_seeds {
        if let Some(program) = view.parsed(seed_id) {
            for (name, count) in count_api_calls_in(&program, manifest).per_api {
                *api_call_distribution.entry(name).or_insert(0) += count;
            }
        }
    }

    let mutation_efficiency = lineage_efficiency(&view, manifest, lambda, mu);

    Ok(MetricsSummary {
        total_generations,
        unique_valid_count,
        unique_valid_rate,
        api_coverage,
        detected_bugs,
        hallucination_rate,
        mutation_efficiency,
        api_call_distribution,
    })
}

#[derive(Debug, Clone)]
pub struct GenerationView {
    pub role: GenerationRole,
    pub extracted: bool,
    pub seed_id: Option<SeedId>,
    pub parent_seed_id: Option<SeedId>,
}

/// Indexed view over a transcript's events.
pub struct TranscriptView {
    pub seeds: BTreeMap<SeedId, CodeSeed>,
    parsed: std::cell::RefCell<BTreeMap<SeedId, Option<std::rc::Rc<crate::lang::ast::Program>>>>,
    /// (seed id, was a compile error) per execution event.
    pub executions: Vec<(SeedId, bool)>,
    pub generations: Vec<GenerationView>,
    pub scored_seeds: BTreeSet<SeedId>,
    pub bug_status: BTreeMap<String, TriageStatus>,
    /// Child seed id to parent seed id, over both mutation levels.
    pub seed_parent: BTreeMap<SeedId, SeedId>,
}

impl TranscriptView {
    pub fn build(events: &[Event]) -> Self {
        let mut view = TranscriptView {
            seeds: BTreeMap::new(),
            parsed: Default::default(),
            executions: Vec::new(),
            generations: Vec::new(),
            scored_seeds: BTreeSet::new(),
            bug_status: BTreeMap::new(),
            seed_parent: BTreeMap::new(),
        };
        for event in events {
            match event {
                Event::Seed { seed, .. } => {
                    view.seeds.insert(seed.id.clone(), seed.clone());
                }
                Event::Iteration {
                    seed_id,
                    outcome,
                    score,
                    ..
                } => {
                    view.executions.push((
                        seed_id.clone(),
                        outcome.kind == crate::executor::OutcomeKind::CompileError,
                    ));
                    if score.is_some() {
                        view.scored_seeds.insert(seed_id.clone());
                    }
                }
                Event::ChildTest {
                    child_seed_id,
                    outcome,
                    ..
                } => {
                    view.executions.push((
                        child_seed_id.clone(),
                        outcome.kind == crate::executor::OutcomeKind::CompileError,
                    ));
                }
                Event::Generation {
                    role,
                    extracted,
                    seed_id,
                    parent_seed_id,
                    duplicate,
                    ..
                } => {
                    view.generations.push(GenerationView {
                        role: *role,
                        extracted: *extracted,
                        seed_id: seed_id.clone(),
                        parent_seed_id: parent_seed_id.clone(),
                    });
                    if *role == GenerationRole::FullMutation && !duplicate {
                        if let (Some(parent), Some(child)) = (parent_seed_id, seed_id) {
                            view.seed_parent.insert(child.clone(), parent.clone());
                        }
                    }
                }
                Event::Mutation {
                    level: crate::mutation::MutationLevel::Code,
                    parent_id,
                    child_id: Some(child),
                    ..
                } => {
                    view.seed_parent
                        .insert(SeedId(child.clone()), SeedId(parent_id.clone()));
                }
                Event::Bug {
                    signature, status, ..
                } => {
                    view.bug_status.insert(signature.clone(), *status);
                }
                _ => {}
            }
        }
        view
    }

    /// Parse-on-demand cache of stored seed sources.
    pub fn parsed(&self, id: &SeedId) -> Option<std::rc::Rc<crate::lang::ast::Program>> {
        let mut cache = self.parsed.borrow_mut();
        if let Some(entry) = cache.get(id) {
            return entry.clone();
        }
        let parsed = self
            .seeds
            .get(id)
            .and_then(|s| crate::lang::parse(&s.source).ok())
            .map(std::rc::Rc::new);
        cache.insert(id.clone(), parsed.clone());
        parsed
    }

    pub fn seed_parses(&self, id: &SeedId) -> bool {
        self.parsed(id).is_some()
    }

    /// Root of the lineage containing `id`.
    pub fn lineage_root(&self, id: &SeedId) -> SeedId {
        let mut cur = id.clone();
        let mut hops = 0;
        while let Some(parent) = self.seed_parent.get(&cur) {
            cur = parent.clone();
            hops += 1;
            if hops > self.seed_parent.len() {
                break; // defensively bail on a cycle
            }
        }
        cur
    }
}

fn generation_hallucinated(
    generation: &GenerationView,
    view: &TranscriptView,
    manifest: &ApiManifest,
) -> bool {
    if !generation.extracted {
        return true;
    }
    let Some(seed_id) = &generation.seed_id else {
        return true;
    };
    match view.parsed(seed_id) {
        None => true,
        Some(program) => !count_api_calls_in(&program, manifest)
            .unknown_calls
            .is_empty(),
    }
}

fn lineage_efficiency(
    view: &TranscriptView,
    manifest: &ApiManifest,
    lambda: f64,
    mu: f64,
) -> Vec<LineageEfficiency> {
    // Group seeds by lineage root.
    let mut members: BTreeMap<SeedId, Vec<&CodeSeed>> = BTreeMap::new();
    for seed in view.seeds.values() {
        members
            .entry(view.lineage_root(&seed.id))
            .or_default()
            .push(seed);
    }
    let mut out = Vec::new();
    for (root, mut seeds) in members {
        seeds.sort_by_key(|s| (s.mutation_round, s.id.clone()));
        let mut trajectory = Vec::new();
        let mut final_complexity = None;
        for seed in &seeds {
            if let Some(program) = view.parsed(&seed.id) {
                let calls = count_api_calls_in(&program, manifest);
                let complexity = estimate_complexity_in(&program, manifest);
                trajectory.push((seed.mutation_round, calls.n_api + complexity.score()));
                final_complexity = Some(complexity.score());
            }
        }
        // Valid fraction over this lineage's generations.
        let ids: BTreeSet<&SeedId> = seeds.iter().map(|s| &s.id).collect();
        let mut attempts = 0u64;
        let mut valid = 0u64;
        for generation in &view.generations {
            let in_lineage = generation
                .seed_id
                .as_ref()
                .map(|id| ids.contains(id))
                .unwrap_or(false)
                || generation
                    .parent_seed_id
                    .as_ref()
                    .map(|id| ids.contains(id))
                    .unwrap_or(false);
            if !in_lineage {
                continue;
            }
            attempts += 1;
            if let Some(id) = &generation.seed_id {
                if generation.extracted && view.seed_parses(id) {
                    valid += 1;
                }
            }
        }
        let valid_fraction = if attempts == 0 {
            if view.seed_parses(&root) {
                1.0
            } else {
                0.0
            }
        } else {
            valid as f64 / attempts as f64
        };
        let weighted_score = lambda * final_complexity.unwrap_or(0) as f64 + mu * valid_fraction;
        out.push(LineageEfficiency {
            root_seed_id: root,
            trajectory,
            valid_fraction,
            weighted_score,
        });
    }
    out
}

/// Render a lineage's score trajectory as a standalone SVG polyline.
/// Deterministic bytes for a given transcript.
pub fn render_trajectory_chart(events: &[Event], lineage_root: &SeedId) -> Result<String> {
    let manifest = ApiManifest::minilang_default();
    let view = TranscriptView::build(events);
    let efficiency = lineage_efficiency(&view, &manifest, 1.0, 1.0);
    let Some(lineage) = efficiency.iter().find(|l| &l.root_seed_id == lineage_root) else {
        let available: Vec<String> = efficiency
            .iter()
            .map(|l| l.root_seed_id.0.clone())
            .collect();
        return Err(ZfuzzError::config(format!(
            "unknown lineage '{lineage_root}'; available roots: {}",
            available.join(", ")
        )));
    };
    Ok(svg_polyline(&lineage.trajectory, &lineage.root_seed_id.0))
}

fn svg_polyline(points: &[(u32, i64)], title: &str) -> String {
    const W: i64 = 640;
    const H: i64 = 400;
    const MARGIN: i64 = 48;
    let max_round = points.iter().map(|(r, _)| *r as i64).max().unwrap_or(0).max(1);
    let max_score = points.iter().map(|(_, s)| *s).max().unwrap_or(0).max(1);
    let px = |round: i64, score: i64| -> (i64, i64) {
        let x = MARGIN + round * (W - 2 * MARGIN) / max_round;
        let y = H - MARGIN - score * (H - 2 * MARGIN) / max_score;
        (x, y)
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{MARGIN}\" y=\"24\" font-family=\"monospace\" font-size=\"14\">mutation score trajectory: {title}</text>"
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{MARGIN}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
        H - MARGIN,
        W - MARGIN
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{}\" stroke=\"black\"/>",
        H - MARGIN
    );
    if !points.is_empty() {
        let coords: Vec<String> = points
            .iter()
            .map(|(r, s)| {
                let (x, y) = px(*r as i64, *s);
                format!("{x},{y}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "  <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{}\"/>",
            coords.join(" ")
        );
        for (r, s) in points {
            let (x, y) = px(*r as i64, *s);
            let _ = writeln!(svg, "  <circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"steelblue\"/>");
            let _ = writeln!(
                svg,
                "  <text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\">r{r}:{s}</text>",
                x + 5,
                y - 5
            );
        }
    }
    let _ = writeln!(svg, "</svg>");
    svg
}

/// Write the metrics document, the bug table, and a plain-text triage
/// summary into `out_dir`.
pub fn emit_reports(
    metrics: &MetricsSummary,
    bugs: &[BugRecord],
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| ZfuzzError::config(format!("cannot create {}: {e}", out_dir.display())))?;

    let metrics_path = out_dir.join("metrics.json");
    std::fs::write(&metrics_path, serde_json::to_string_pretty(metrics)?)?;

    let mut sorted: Vec<&BugRecord> = bugs.iter().collect();
    sorted.sort_by(|a, b| {
        b.occurrences
            .cmp(&a.occurrences)
            .then_with(|| a.signature.cmp(&b.signature))
    });
    let mut table = String::from("signature\toccurrences\treproduction_command\ttriage_status\n");
    for record in &sorted {
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{:?}",
            record.signature, record.occurrences, record.reproduction_command,
            record.triage_status
        );
    }
    std::fs::write(out_dir.join("bug_registry.tsv"), table)?;

    let mut summary = String::new();
    if sorted.is_empty() {
        summary.push_str("no anomalies registered\n");
    } else {
        let detected = sorted
            .iter()
            .filter(|r| matches!(r.triage_status, TriageStatus::New | TriageStatus::Confirmed))
            .count();
        let suspects = sorted
            .iter()
            .filter(|r| r.triage_status == TriageStatus::Suspect)
            .count();
        let _ = writeln!(
            summary,
            "{} distinct signatures ({} detected, {} suspect)",
            sorted.len(),
            detected,
            suspects
        );
        for record in &sorted {
            let _ = writeln!(
                summary,
                "- [{:?}] {} (seen {}x)\n  reproduce: {}",
                record.triage_status, record.signature, record.occurrences,
                record.reproduction_command
            );
        }
    }
    std::fs::write(out_dir.join("triage_summary.txt"), summary)?;
    Ok(())
}

/// Parse an emitted metrics file back (round-trip checks and downstream
/// consumers).
pub fn load_metrics(path: &Path) -> Result<MetricsSummary> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ZfuzzError::config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}
