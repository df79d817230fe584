//! Line-by-line migration: rank target APIs, enumerate sketch completions
//! under documentation constraints, learn from runtime errors, and keep the
//! first completion that passes every line test.

use std::time::{Duration, Instant};

use crate::constraints::{compile_spec_constraints, Assignment, Constraint, Enumeration, ShapeContext};
use crate::corpus::{DocCorpus, DEFAULT_SEED_POOL};
use crate::errmsg::probe::probe;
use crate::errmsg::{classify, hypothesize};
use crate::matching::{build_similarity_weighted, EmbeddingTable, MatchError, MatchMode, SimilarityMatrix, Weighting};
use crate::program::{generate_line_tests, operand_env, CallSite, Environment, ProgramError, SourceProgram, TestCase, Value};
use crate::runtime::{EvalCache, Runtime, RuntimeError};
use crate::sketch::{default_reshaping_vocab, generate_sketches, hole_domains, realize, ReshapingOp, Sketch};

#[derive(Debug, Clone)]
pub struct MigrationConfig {
    pub mode: MatchMode,
    pub weighting: Weighting,
    pub top_k: usize,
    pub max_sketch_size: usize,
    pub use_spec_constraints: bool,
    pub use_error_learning: bool,
    pub global_timeout: Duration,
    /// Candidates emitted per sketch before moving on.
    pub enumeration_budget: usize,
    /// Recorded in the report; the search itself is deterministic.
    pub seed: u64,
    pub seed_pool: Vec<i64>,
    pub reshaping_vocab: Vec<ReshapingOp>,
    /// Hypotheses probed per failing candidate.
    pub max_hypotheses: usize,
}

impl Default for MigrationConfig {
    fn default() -> Self {
        MigrationConfig {
            mode: MatchMode::Tfidf,
            weighting: Weighting::CorpusFrequency,
            top_k: 200,
            max_sketch_size: 2,
            use_spec_constraints: true,
            use_error_learning: true,
            global_timeout: Duration::from_secs(3600),
            enumeration_budget: 10_000,
            seed: 0,
            seed_pool: DEFAULT_SEED_POOL.to_vec(),
            reshaping_vocab: default_reshaping_vocab(),
            max_hypotheses: 8,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MigrationError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Matching(#[from] MatchError),
    #[error("line {line}: source API `{callee}` is not documented")]
    Undocumented { line: usize, callee: String },
    #[error("target runtime failed: {0}")]
    Runtime(String),
}

/// Search statistics for one line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LineStats {
    pub candidates_tested: usize,
    pub probe_evaluations: usize,
    pub apis_tried: usize,
    pub sketches_tried: usize,
    /// Learned constraints in the order they were added, rendered.
    pub learned: Vec<String>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineMigration {
    pub api: String,
    /// 1-based position of `api` in the ranking.
    pub api_rank: usize,
    pub sketch: String,
    pub sketch_index: usize,
    /// 1-based position of the winning assignment in its enumeration.
    pub assignment_index: usize,
    pub compact: String,
    pub code: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LineStatus {
    Migrated(LineMigration),
    Failed(String),
    /// Not attempted because an earlier line failed.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineOutcome {
    pub line_index: usize,
    pub source: String,
    pub status: LineStatus,
    pub stats: LineStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Migration {
    pub program: String,
    pub lines: Vec<LineOutcome>,
    pub complete: bool,
    /// Whole-program tests pass on the migrated program.
    pub verified: bool,
    pub cache_hits: u64,
    pub cache_entries: usize,
    pub elapsed: Duration,
}

impl Migration {
    pub fn candidates_tested(&self) -> usize {
        self.lines.iter().map(|l| l.stats.candidates_tested).sum()
    }

    pub fn probe_evaluations(&self) -> usize {
        self.lines.iter().map(|l| l.stats.probe_evaluations).sum()
    }

    pub fn migrated_lines(&self) -> usize {
        self.lines.iter().filter(|l| matches!(l.status, LineStatus::Migrated(_))).count()
    }
}

/// Inputs shared by every line of one migration.
pub struct Session<'a> {
    pub source: &'a DocCorpus,
    pub target: &'a DocCorpus,
    pub source_runtime: &'a dyn Runtime,
    pub target_runtime: &'a dyn Runtime,
    pub embeddings: Option<&'a EmbeddingTable>,
    pub config: &'a MigrationConfig,
}

/// Migrates `program` line by line. Lines after the first failure are left
/// as `# unmigrated:` comments.
pub fn synthesize(session: &Session, program: &SourceProgram, tests: &[TestCase]) -> Result<Migration, MigrationError> {
    let start = Instant::now();
    let deadline = start + session.config.global_timeout;
    for l in &program.lines {
        if session.source.get(&l.callee).is_none() {
            return Err(MigrationError::Undocumented { line: l.line_index, callee: l.callee.clone() });
        }
    }
    let line_tests = generate_line_tests(program, tests, session.source_runtime)?;
    let similarity = build_similarity_weighted(
        session.source,
        session.target,
        session.config.mode,
        session.embeddings,
        session.config.weighting,
    )?;
    let cache = EvalCache::default();
    let mut envs: Vec<Environment> = tests.iter().map(|t| t.inputs.clone()).collect();
    let mut outcomes = Vec::with_capacity(program.lines.len());
    let mut failed = false;
    let mut body = Vec::new();
    for (k, line) in program.lines.iter().enumerate() {
        if failed {
            outcomes.push(LineOutcome { line_index: k, source: line.render(), status: LineStatus::Skipped, stats: LineStats::default() });
            body.push(format!("# unmigrated: {}", line.render()));
            continue;
        }
        let searcher = LineSearch { session, similarity: &similarity, cache: &cache, deadline, line, line_no: k, tests: &line_tests[k], envs: &envs };
        let (status, stats, outputs) = searcher.run()?;
        match &status {
            LineStatus::Migrated(m) => {
                body.extend(m.code.iter().cloned());
                for (env, out) in envs.iter_mut().zip(outputs) {
                    env.insert(line.binds.clone(), out);
                }
            }
            _ => {
                failed = true;
                body.push(format!("# unmigrated: {}", line.render()));
            }
        }
        outcomes.push(LineOutcome { line_index: k, source: line.render(), status, stats });
    }
    let mut text = String::new();
    if !program.input_vars.is_empty() {
        text.push_str(&format!("input {}\n", program.input_vars.join(", ")));
    }
    for l in &body {
        text.push_str(l);
        text.push('\n');
    }
    let verified = !failed && verify(session.target_runtime, &body, program, tests)?;
    Ok(Migration {
        program: text,
        lines: outcomes,
        complete: !failed,
        verified,
        cache_hits: cache.hits(),
        cache_entries: cache.len(),
        elapsed: start.elapsed(),
    })
}

/// Runs the migrated lines as one program against the whole-program tests.
fn verify(runtime: &dyn Runtime, body: &[String], program: &SourceProgram, tests: &[TestCase]) -> Result<bool, MigrationError> {
    if body.is_empty() || program.output_var().is_none() {
        return Ok(true);
    }
    let code = body.join("\n");
    for t in tests {
        match runtime.eval(&code, &t.inputs) {
            Ok(v) if v.approx_eq(&t.expected_output) => {}
            Ok(_) | Err(RuntimeError::Raised(_)) | Err(RuntimeError::Timeout(_)) => return Ok(false),
            Err(RuntimeError::Adapter(m)) => return Err(MigrationError::Runtime(m)),
        }
    }
    Ok(true)
}

/// Outcome of running one candidate against the line tests.
enum Trial {
    Pass(Vec<Value>),
    Mismatch,
    /// First failing test and its message.
    Raised(usize, String),
}

struct LineSearch<'s, 'a> {
    session: &'s Session<'a>,
    similarity: &'s SimilarityMatrix,
    cache: &'s EvalCache,
    deadline: Instant,
    line: &'s CallSite,
    line_no: usize,
    tests: &'s [TestCase],
    envs: &'s [Environment],
}

impl LineSearch<'_, '_> {
    fn run(&self) -> Result<(LineStatus, LineStats, Vec<Value>), MigrationError> {
        let start = Instant::now();
        let config = self.session.config;
        let mut stats = LineStats::default();
        let ranking = self.similarity.rank_targets(&self.line.callee, config.top_k)?;
        let operand_envs: Vec<Environment> = self.envs.iter().map(|e| operand_env(self.line, e)).collect();
        let first_operand = |env: &Environment| self.line.operands.first().and_then(|o| env.get(o)).cloned();
        let contexts: Vec<ShapeContext> = operand_envs
            .iter()
            .zip(self.tests)
            .map(|(env, t)| ShapeContext::from_values(first_operand(env).as_ref(), &t.expected_output))
            .collect();
        let mut observed_dims: Vec<i64> = contexts
            .iter()
            .flat_map(|c| c.in_shape.clone().unwrap_or_default())
            .collect();
        observed_dims.sort_unstable();
        observed_dims.dedup();
        let operand = self.line.operands.first().cloned().unwrap_or_default();

        for (rank0, (api, _)) in ranking.iter().enumerate() {
            let Some(entry) = self.session.target.get(api) else { continue };
            stats.apis_tried += 1;
            for (si, sketch) in generate_sketches(entry, config.max_sketch_size, &config.reshaping_vocab).iter().enumerate() {
                if Instant::now() >= self.deadline {
                    stats.elapsed = start.elapsed();
                    return Ok((LineStatus::Failed("global timeout".into()), stats, vec![]));
                }
                let sketch = hole_domains(sketch, self.line, entry, &config.seed_pool, &observed_dims);
                if !sketch.feasible {
                    continue;
                }
                stats.sketches_tried += 1;
                let set = compile_spec_constraints(entry, &sketch, &contexts, config.use_spec_constraints);
                let mut enumeration = Enumeration::new(set, config.enumeration_budget);
                while let Some(a) = enumeration.next_assignment() {
                    if Instant::now() >= self.deadline {
                        stats.elapsed = start.elapsed();
                        return Ok((LineStatus::Failed("global timeout".into()), stats, vec![]));
                    }
                    stats.candidates_tested += 1;
                    let candidate = realize(&sketch, &a);
                    let code = candidate.code(&operand, &self.line.binds);
                    match self.trial(&code, &operand_envs)? {
                        Trial::Pass(outputs) => {
                            stats.elapsed = start.elapsed();
                            let m = LineMigration {
                                api: api.clone(),
                                api_rank: rank0 + 1,
                                sketch: sketch.to_string(),
                                sketch_index: si,
                                assignment_index: enumeration.emitted(),
                                compact: candidate.compact(),
                                code: candidate.code_lines(&operand, &self.line.binds),
                            };
                            return Ok((LineStatus::Migrated(m), stats, outputs));
                        }
                        Trial::Mismatch => {}
                        Trial::Raised(ti, message) => {
                            if config.use_error_learning {
                                for c in self.learn(&sketch, &enumeration, &a, ti, &message, &operand, &operand_envs, &mut stats)? {
                                    stats.learned.push(c.render());
                                    enumeration.add_learned(c);
                                }
                            }
                        }
                    }
                }
            }
        }
        stats.elapsed = start.elapsed();
        Ok((LineStatus::Failed(format!("no candidate among {} ranked APIs passed the line tests", ranking.len())), stats, vec![]))
    }

    fn eval(&self, test: usize, code: &str, env: &Environment) -> Result<Result<Value, RuntimeError>, MigrationError> {
        match self.cache.get_or_eval((self.line_no, test, code), || self.session.target_runtime.eval(code, env)) {
            Err(RuntimeError::Adapter(m)) => Err(MigrationError::Runtime(m)),
            outcome => Ok(outcome),
        }
    }

    fn trial(&self, code: &str, envs: &[Environment]) -> Result<Trial, MigrationError> {
        let mut outputs = Vec::with_capacity(self.tests.len());
        for (ti, (test, env)) in self.tests.iter().zip(envs).enumerate() {
            match self.eval(ti, code, env)? {
                Ok(v) if v.approx_eq(&test.expected_output) => outputs.push(v),
                Ok(_) => return Ok(Trial::Mismatch),
                Err(e) => return Ok(Trial::Raised(ti, e.message().to_string())),
            }
        }
        Ok(Trial::Pass(outputs))
    }

    /// Classifies the error, probes each hypothesis on the failing test and
    /// returns the constraints that survive. Every returned constraint
    /// excludes `failing`.
    #[allow(clippy::too_many_arguments)]
    fn learn(
        &self,
        sketch: &Sketch,
        enumeration: &Enumeration,
        failing: &Assignment,
        test: usize,
        message: &str,
        operand: &str,
        envs: &[Environment],
        stats: &mut LineStats,
    ) -> Result<Vec<Constraint>, MigrationError> {
        let Some(classification) = classify(message) else { return Ok(vec![]) };
        let hypotheses = hypothesize(&classification, sketch, failing, self.session.embeddings);
        let mut learned: Vec<Constraint> = Vec::new();
        for h in hypotheses.iter().take(self.session.config.max_hypotheses) {
            let domain = enumeration.domain(h.hole).unwrap_or(&[]).to_vec();
            let mut known = enumeration.constraint_set().constraints.clone();
            known.extend(learned.iter().cloned());
            let mut adapter_failure = None;
            let mut run = |a: &Assignment| -> Result<Option<String>, RuntimeError> {
                stats.probe_evaluations += 1;
                let code = realize(sketch, a).code(operand, &self.line.binds);
                match self.eval(test, &code, &envs[test]) {
                    Ok(Ok(_)) => Ok(None),
                    Ok(Err(e)) => Ok(Some(e.message().to_string())),
                    Err(MigrationError::Runtime(m)) => {
                        adapter_failure = Some(m.clone());
                        Err(RuntimeError::Adapter(m))
                    }
                    Err(other) => Err(RuntimeError::Adapter(other.to_string())),
                }
            };
            let result = probe(h, failing, message, &domain, &known, &mut run);
            if let Some(m) = adapter_failure {
                return Err(MigrationError::Runtime(m));
            }
            let result = result.map_err(|e| MigrationError::Runtime(e.message().to_string()))?;
            if let Some(c) = result.outcome.constraint() {
                if !c.holds(failing) && !learned.iter().any(|l| l.expr == c.expr) {
                    learned.push(c.clone());
                }
            }
        }
        Ok(learned)
    }
}

/// Convenience wrapper for callers holding owned corpora and runtimes.
#[allow(clippy::too_many_arguments)]
pub fn migrate(
    program: &SourceProgram,
    tests: &[TestCase],
    source: &DocCorpus,
    target: &DocCorpus,
    source_runtime: &dyn Runtime,
    target_runtime: &dyn Runtime,
    embeddings: Option<&EmbeddingTable>,
    config: &MigrationConfig,
) -> Result<Migration, MigrationError> {
    let session = Session { source, target, source_runtime, target_runtime, embeddings, config };
    synthesize(&session, program, tests)
}
