//! Runs the bundled mock benchmarks and prints one summary line each.

use std::process::ExitCode;

use apimorph::bench::{ablation_scenarios, benchmarks, embeddings, generate_tests, run_benchmark, source_corpus};
use apimorph::program::tests_to_json;
use apimorph::runtime::MockRuntime;
use apimorph::matching::MatchMode;
use apimorph::orchestrator::{LineStatus, MigrationConfig};
use clap::Parser;

#[derive(Parser)]
#[command(about = "Migrate the bundled mock benchmarks")]
struct Args {
    /// Run only benchmarks whose name contains this text.
    #[arg(long)]
    only: Option<String>,
    /// Include the single-line ablation scenarios.
    #[arg(long)]
    ablation: bool,
    #[arg(long)]
    no_spec_constraints: bool,
    #[arg(long)]
    no_error_learning: bool,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rank with embedding-augmented vectors.
    #[arg(long)]
    embeddings: bool,
    /// Write each benchmark's program and tests into this directory instead
    /// of migrating.
    #[arg(long)]
    export: Option<std::path::PathBuf>,
    /// Print the chosen rewrite of every line.
    #[arg(long, short)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut config = MigrationConfig {
        use_spec_constraints: !args.no_spec_constraints,
        use_error_learning: !args.no_error_learning,
        seed: args.seed,
        ..MigrationConfig::default()
    };
    if let Some(b) = args.budget {
        config.enumeration_budget = b;
    }
    let table = embeddings();
    let table = if args.embeddings {
        config.mode = MatchMode::TfidfEmbedding;
        Some(&table)
    } else {
        None
    };
    let mut suite = benchmarks();
    if args.ablation {
        suite.extend(ablation_scenarios());
    }
    if let Some(dir) = &args.export {
        let source = source_corpus();
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("cannot create {}: {e}", dir.display());
            return ExitCode::FAILURE;
        }
        for b in &suite {
            let program = b.parse(&source);
            let tests = generate_tests(b, &program, &MockRuntime, args.seed);
            let tests_text = serde_json::to_string_pretty(&tests_to_json(&tests)).expect("tests serialize");
            let written = std::fs::write(dir.join(format!("{}.src", b.name)), b.program)
                .and_then(|_| std::fs::write(dir.join(format!("{}.tests.json", b.name)), tests_text + "\n"));
            if let Err(e) = written {
                eprintln!("cannot write {}: {e}", b.name);
                return ExitCode::FAILURE;
            }
        }
        return ExitCode::SUCCESS;
    }
    let mut failures = 0;
    for b in suite.iter().filter(|b| args.only.as_ref().is_none_or(|o| b.name.contains(o.as_str()))) {
        match run_benchmark(b, &config, table) {
            Ok(m) => {
                let ok = m.complete && m.verified;
                failures += usize::from(!ok);
                println!(
                    "{:<18} {:<4} lines={:>2} candidates={:>7} probes={:>4} time={:.3}s",
                    b.name,
                    if ok { "ok" } else { "FAIL" },
                    m.migrated_lines(),
                    m.candidates_tested(),
                    m.probe_evaluations(),
                    m.elapsed.as_secs_f64()
                );
                if args.verbose {
                    for l in &m.lines {
                        match &l.status {
                            LineStatus::Migrated(x) => println!(
                                "    {} -> {} (api rank {}, {} candidates, learned {:?})",
                                l.source, x.compact, x.api_rank, l.stats.candidates_tested, l.stats.learned
                            ),
                            other => println!("    {} -> {other:?}", l.source),
                        }
                    }
                }
            }
            Err(e) => {
                failures += 1;
                println!("{:<18} error: {e}", b.name);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
