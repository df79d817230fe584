//! JSON migration report.

use std::path::Path;

use serde::Serialize;

use crate::matching::MatchMode;
use crate::orchestrator::{LineStatus, Migration, MigrationConfig};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConfigSummary {
    pub mode: &'static str,
    pub top_k: usize,
    pub max_sketch_size: usize,
    pub use_spec_constraints: bool,
    pub use_error_learning: bool,
    pub global_timeout_secs: f64,
    pub enumeration_budget: usize,
    pub seed: u64,
    pub seed_pool: Vec<i64>,
    pub backend: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LineReport {
    pub line: usize,
    pub source: String,
    /// `migrated`, `failed` or `skipped`.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snippet: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sketch: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sketch_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment_index: Option<usize>,
    pub candidates_tested: usize,
    pub probe_evaluations: usize,
    pub apis_tried: usize,
    pub sketches_tried: usize,
    pub learned_constraints: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_secs: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Totals {
    pub lines: usize,
    pub lines_migrated: usize,
    pub candidates_tested: usize,
    pub probe_evaluations: usize,
    pub cache_hits: u64,
    pub cache_entries: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_secs: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MigrationReport {
    /// `migrated` or `partial`.
    pub status: &'static str,
    pub verified: bool,
    pub config: ConfigSummary,
    pub lines: Vec<LineReport>,
    pub totals: Totals,
}

fn mode_name(mode: MatchMode) -> &'static str {
    match mode {
        MatchMode::Tfidf => "tfidf",
        MatchMode::TfidfEmbedding => "tfidf-embedding",
    }
}

impl MigrationReport {
    /// Builds the report. With `timings` off, wall-clock fields are omitted so
    /// that reports of identical runs are byte-identical.
    pub fn new(migration: &Migration, config: &MigrationConfig, backend: &str, timings: bool) -> MigrationReport {
        let secs = |d: std::time::Duration| timings.then_some(d.as_secs_f64());
        let lines = migration
            .lines
            .iter()
            .map(|l| {
                let mut r = LineReport {
                    line: l.line_index,
                    source: l.source.clone(),
                    status: "migrated",
                    reason: None,
                    snippet: None,
                    api: None,
                    api_rank: None,
                    sketch: None,
                    sketch_index: None,
                    assignment_index: None,
                    candidates_tested: l.stats.candidates_tested,
                    probe_evaluations: l.stats.probe_evaluations,
                    apis_tried: l.stats.apis_tried,
                    sketches_tried: l.stats.sketches_tried,
                    learned_constraints: l.stats.learned.clone(),
                    elapsed_secs: secs(l.stats.elapsed),
                };
                match &l.status {
                    LineStatus::Migrated(m) => {
                        r.snippet = Some(m.code.clone());
                        r.api = Some(m.api.clone());
                        r.api_rank = Some(m.api_rank);
                        r.sketch = Some(m.sketch.clone());
                        r.sketch_index = Some(m.sketch_index);
                        r.assignment_index = Some(m.assignment_index);
                    }
                    LineStatus::Failed(reason) => {
                        r.status = "failed";
                        r.reason = Some(reason.clone());
                    }
                    LineStatus::Skipped => {
                        r.status = "skipped";
                        r.reason = Some("an earlier line was not migrated".into());
                        r.elapsed_secs = None;
                    }
                }
                r
            })
            .collect();
        MigrationReport {
            status: if migration.complete { "migrated" } else { "partial" },
            verified: migration.verified,
            config: ConfigSummary {
                mode: mode_name(config.mode),
                top_k: config.top_k,
                max_sketch_size: config.max_sketch_size,
                use_spec_constraints: config.use_spec_constraints,
                use_error_learning: config.use_error_learning,
                global_timeout_secs: config.global_timeout.as_secs_f64(),
                enumeration_budget: config.enumeration_budget,
                seed: config.seed,
                seed_pool: config.seed_pool.clone(),
                backend: backend.to_string(),
            },
            lines,
            totals: Totals {
                lines: migration.lines.len(),
                lines_migrated: migration.migrated_lines(),
                candidates_tested: migration.candidates_tested(),
                probe_evaluations: migration.probe_evaluations(),
                cache_hits: migration.cache_hits,
                cache_entries: migration.cache_entries,
                elapsed_secs: secs(migration.elapsed),
            },
        }
    }

    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{benchmarks, run_benchmark};

    #[test]
    fn counters_match_migration() {
        let config = MigrationConfig::default();
        let b = &benchmarks()[1];
        let m = run_benchmark(b, &config, None).unwrap();
        let r = MigrationReport::new(&m, &config, "mock", false);
        assert_eq!(r.totals.candidates_tested, m.candidates_tested());
        assert_eq!(r.status, "migrated");
        assert!(r.lines.iter().all(|l| l.candidates_tested >= 1 && l.api_rank.is_some()));
        let json: serde_json::Value = serde_json::from_str(&r.to_json_string()).unwrap();
        assert!(json["totals"].get("elapsed_secs").is_none());
        let timed = MigrationReport::new(&m, &config, "mock", true);
        assert!(timed.totals.elapsed_secs.is_some());
    }
}
