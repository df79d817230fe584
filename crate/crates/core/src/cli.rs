//! Command-line front end for `migrate`.
//!
//! Exit codes: 0 when every line migrated and the result passes the tests,
//! 2 for a partial migration, 1 for usage, configuration or runtime errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, ValueEnum};
use serde::Deserialize;

use crate::corpus::load_corpus;
use crate::matching::{EmbeddingTable, MatchMode, Weighting};
use crate::orchestrator::{migrate, MigrationConfig};
use crate::program::{load_tests, parse_program};
use crate::report::MigrationReport;
use crate::runtime::{spawn_external, ExternalConfig, MockRuntime, Runtime};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Tfidf,
    TfidfEmbedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingArg {
    CorpusFrequency,
    Classical,
}

#[derive(Debug, Parser)]
#[command(name = "migrate", about = "Migrate a straight-line program between libraries using their documentation and tests")]
pub struct Args {
    /// JSON run manifest; command-line flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub source_docs: Option<PathBuf>,
    #[arg(long)]
    pub target_docs: Option<PathBuf>,
    #[arg(long)]
    pub program: Option<PathBuf>,
    #[arg(long)]
    pub tests: Option<PathBuf>,
    /// Directory receiving `migrated.src` and `report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
    /// Word vectors, one `word v1 v2 ...` per line.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub max_sketch_size: Option<usize>,
    #[arg(long)]
    pub no_spec_constraints: bool,
    #[arg(long)]
    pub no_error_learning: bool,
    /// Global time limit in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Per-evaluation limit in seconds for an external adapter.
    #[arg(long)]
    pub eval_timeout: Option<f64>,
    /// Candidates per sketch.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Integer seed pool, e.g. `-1,0,1,2,3`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub seed_pool: Option<Vec<i64>>,
    /// Shell command starting an external adapter.
    #[arg(long, conflicts_with = "mock")]
    pub adapter: Option<String>,
    /// Evaluate with the in-process mock libraries (the default).
    #[arg(long)]
    pub mock: bool,
    /// Omit wall-clock timings from the report.
    #[arg(long)]
    pub reproducible: bool,
}

/// File form of the run settings. Paths are relative to the manifest.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub source_docs: Option<PathBuf>,
    pub target_docs: Option<PathBuf>,
    pub program: Option<PathBuf>,
    pub tests: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub mode: Option<ModeArg>,
    pub weighting: Option<WeightingArg>,
    pub top_k: Option<usize>,
    pub max_sketch_size: Option<usize>,
    pub use_spec_constraints: Option<bool>,
    pub use_error_learning: Option<bool>,
    pub timeout: Option<f64>,
    pub eval_timeout: Option<f64>,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    pub seed_pool: Option<Vec<i64>>,
    pub adapter: Option<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut m: RunManifest = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut m.source_docs, &mut m.target_docs, &mut m.program, &mut m.tests, &mut m.embeddings, &mut m.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }
}

fn seconds(name: &str, v: f64) -> Result<Duration, String> {
    if v.is_finite() && v > 0.0 {
        Ok(Duration::from_secs_f64(v))
    } else {
        Err(format!("--{name} must be a positive number of seconds"))
    }
}

struct Resolved {
    source_docs: PathBuf,
    target_docs: PathBuf,
    program: PathBuf,
    tests: PathBuf,
    embeddings: Option<PathBuf>,
    out: PathBuf,
    adapter: Option<String>,
    eval_timeout: Duration,
    config: MigrationConfig,
}

fn resolve(args: Args) -> Result<Resolved, String> {
    let m = match &args.config {
        Some(p) => RunManifest::load(p)?,
        None => RunManifest::default(),
    };
    let need = |flag: &str, v: Option<PathBuf>| v.ok_or_else(|| format!("missing required --{flag}"));
    let mut config = MigrationConfig::default();
    let mode = args.mode.or(m.mode).unwrap_or(ModeArg::Tfidf);
    config.mode = match mode {
        ModeArg::Tfidf => MatchMode::Tfidf,
        ModeArg::TfidfEmbedding => MatchMode::TfidfEmbedding,
    };
    config.weighting = match args.weighting.or(m.weighting).unwrap_or(WeightingArg::CorpusFrequency) {
        WeightingArg::CorpusFrequency => Weighting::CorpusFrequency,
        WeightingArg::Classical => Weighting::Classical,
    };
    if let Some(k) = args.top_k.or(m.top_k) {
        if k == 0 {
            return Err("--top-k must be at least 1".into());
        }
        config.top_k = k;
    }
    if let Some(s) = args.max_sketch_size.or(m.max_sketch_size) {
        if s == 0 {
            return Err("--max-sketch-size must be at least 1".into());
        }
        config.max_sketch_size = s;
    }
    config.use_spec_constraints = !args.no_spec_constraints && m.use_spec_constraints.unwrap_or(true);
    config.use_error_learning = !args.no_error_learning && m.use_error_learning.unwrap_or(true);
    if let Some(t) = args.timeout.or(m.timeout) {
        config.global_timeout = seconds("timeout", t)?;
    }
    let eval_timeout = match args.eval_timeout.or(m.eval_timeout) {
        Some(t) => seconds("eval-timeout", t)?,
        None => Duration::from_secs(10),
    };
    if let Some(b) = args.budget.or(m.budget) {
        if b == 0 {
            return Err("--budget must be at least 1".into());
        }
        config.enumeration_budget = b;
    }
    if let Some(s) = args.seed.or(m.seed) {
        config.seed = s;
    }
    if let Some(pool) = args.seed_pool.or(m.seed_pool) {
        config.seed_pool = pool;
    }
    let embeddings = args.embeddings.or(m.embeddings);
    if config.mode == MatchMode::TfidfEmbedding && embeddings.is_none() {
        return Err("--mode tfidf-embedding requires --embeddings".into());
    }
    let adapter = if args.mock { None } else { args.adapter.or(m.adapter) };
    Ok(Resolved {
        source_docs: need("source-docs", args.source_docs.or(m.source_docs))?,
        target_docs: need("target-docs", args.target_docs.or(m.target_docs))?,
        program: need("program", args.program.or(m.program))?,
        tests: need("tests", args.tests.or(m.tests))?,
        embeddings,
        out: args.out.or(m.out).unwrap_or_else(|| PathBuf::from(".")),
        adapter,
        eval_timeout,
        config,
    })
}

/// Runs the tool; diagnostics go to `err`.
pub fn run_with(argv: &[String], err: &mut dyn Write) -> i32 {
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = write!(err, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
        }
    };
    let reproducible = args.reproducible;
    let r = match resolve(args) {
        Ok(r) => r,
        Err(m) => {
            let _ = writeln!(err, "error: {m}\n\n{}", <Args as clap::CommandFactory>::command().render_usage());
            return EXIT_ERROR;
        }
    };
    match execute(&r, reproducible, err) {
        Ok(code) => code,
        Err(m) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_ERROR
        }
    }
}

pub fn run(argv: &[String]) -> i32 {
    run_with(argv, &mut std::io::stderr())
}

fn execute(r: &Resolved, reproducible: bool, err: &mut dyn Write) -> Result<i32, String> {
    let source = load_corpus(&r.source_docs).map_err(|e| e.to_string())?;
    let target = load_corpus(&r.target_docs).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&r.program).map_err(|e| format!("cannot read {}: {e}", r.program.display()))?;
    let program = parse_program(&text, &source).map_err(|e| e.to_string())?;
    let tests = load_tests(&r.tests).map_err(|e| e.to_string())?;
    let table = match &r.embeddings {
        Some(p) => Some(EmbeddingTable::load(p).map_err(|e| e.to_string())?),
        None => None,
    };
    let external;
    let runtime: &dyn Runtime = match &r.adapter {
        Some(cmd) => {
            let mut cfg = ExternalConfig::new(cmd.clone());
            cfg.libraries = vec![source.library_id.clone(), target.library_id.clone()];
            cfg.eval_timeout = r.eval_timeout;
            external = spawn_external(cfg).map_err(|e| e.to_string())?;
            &external
        }
        None => &MockRuntime,
    };
    let migration = migrate(&program, &tests, &source, &target, runtime, runtime, table.as_ref(), &r.config)
        .map_err(|e| e.to_string())?;
    let report = MigrationReport::new(&migration, &r.config, runtime.backend(), !reproducible);
    std::fs::create_dir_all(&r.out).map_err(|e| format!("cannot create {}: {e}", r.out.display()))?;
    let program_path = r.out.join("migrated.src");
    let report_path = r.out.join("report.json");
    std::fs::write(&program_path, &migration.program).map_err(|e| format!("cannot write {}: {e}", program_path.display()))?;
    report.write(&report_path).map_err(|e| format!("cannot write {}: {e}", report_path.display()))?;
    if migration.complete && migration.verified {
        Ok(EXIT_OK)
    } else {
        let failed = migration.lines.iter().find(|l| l.line_index == migration.migrated_lines());
        if let Some(l) = failed {
            let _ = writeln!(err, "partial migration: line {} (`{}`) was not migrated", l.line_index + 1, l.source);
        } else {
            let _ = writeln!(err, "partial migration: the migrated program does not pass the tests");
        }
        Ok(EXIT_PARTIAL)
    }
}
