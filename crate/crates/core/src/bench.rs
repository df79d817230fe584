//! Bundled mock corpora and a benchmark suite of short programs for the mock
//! library pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::DocCorpus;
use crate::matching::EmbeddingTable;
use crate::orchestrator::{migrate, Migration, MigrationConfig, MigrationError};
use crate::program::{parse_program, Column, ColumnData, Environment, SourceProgram, Table, Tensor, TestCase, Value};
use crate::runtime::{MockRuntime, Runtime};

pub const SOURCE_CORPUS_JSON: &str = include_str!("../data/mock_source.json");
pub const TARGET_CORPUS_JSON: &str = include_str!("../data/mock_target.json");
pub const EMBEDDINGS_TXT: &str = include_str!("../data/mock_embeddings.txt");

pub fn source_corpus() -> DocCorpus {
    DocCorpus::from_json_str(SOURCE_CORPUS_JSON).expect("bundled source corpus is valid")
}

pub fn target_corpus() -> DocCorpus {
    DocCorpus::from_json_str(TARGET_CORPUS_JSON).expect("bundled target corpus is valid")
}

pub fn embeddings() -> EmbeddingTable {
    EmbeddingTable::from_text(EMBEDDINGS_TXT).expect("bundled embeddings are valid")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputKind {
    /// Tensor of the given shape with entries in [-1, 1].
    Tensor(&'static [usize]),
    /// People table with `age` and `score` columns.
    Table,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: &'static str,
    pub program: &'static str,
    pub input: InputKind,
    /// Number of whole-program tests generated.
    pub tests: usize,
}

impl Benchmark {
    pub fn parse(&self, corpus: &DocCorpus) -> SourceProgram {
        parse_program(self.program, corpus).expect("benchmark program parses")
    }

    pub fn lines(&self) -> usize {
        self.program.lines().filter(|l| !l.trim().is_empty() && !l.starts_with("input")).count()
    }

    /// Whether migrating the program needs a permutation before some call.
    pub fn needs_permute(&self) -> bool {
        self.program.contains("GlobalAveragePooling2D") || self.program.contains("GlobalMaxPooling2D")
    }
}

pub fn benchmarks() -> Vec<Benchmark> {
    vec![
        Benchmark {
            name: "image_classifier",
            program: "input x\n\
                h1 = mf.layers.Conv2D(x, filters=4, kernel_size=3)\n\
                h2 = mf.layers.ReLU(h1)\n\
                h3 = mf.layers.GlobalAveragePooling2D(h2)\n\
                h4 = mf.layers.Dense(h3, units=3)\n\
                y = mf.layers.Softmax(h4, axis=-1)\n",
            input: InputKind::Tensor(&[2, 1, 6, 6]),
            tests: 2,
        },
        Benchmark {
            name: "pooled_head",
            program: "input x\n\
                h1 = mf.layers.GlobalMaxPooling2D(x)\n\
                h2 = mf.layers.Dense(h1, units=4)\n\
                y = mf.layers.ReLU(h2)\n",
            input: InputKind::Tensor(&[3, 5, 4, 2]),
            tests: 2,
        },
        Benchmark {
            name: "strided_conv",
            program: "input x\n\
                h1 = mf.layers.Conv2D(x, filters=3, kernel_size=3, strides=(2, 2))\n\
                h2 = mf.layers.ReLU(h1)\n\
                h3 = mf.layers.Flatten(h2)\n\
                y = mf.layers.Dense(h3, units=2)\n",
            input: InputKind::Tensor(&[1, 2, 7, 7]),
            tests: 2,
        },
        Benchmark {
            name: "upsample_pool",
            program: "input x\n\
                h1 = mf.layers.UpSampling2D(x, size=(2, 2))\n\
                h2 = mf.layers.Conv2D(h1, filters=2, kernel_size=3, padding=\"same\")\n\
                y = mf.layers.GlobalAveragePooling2D(h2)\n",
            input: InputKind::Tensor(&[1, 1, 3, 3]),
            tests: 2,
        },
        Benchmark {
            name: "tensor_math",
            program: "input x\n\
                h1 = mf.math.scale(x, factor=2.0)\n\
                h2 = mf.math.shift(h1, offset=-1.0)\n\
                h3 = mf.math.abs(h2)\n\
                h4 = mf.math.clip(h3, min_value=0.5, max_value=2.5)\n\
                y = mf.math.reduce_sum(h4, axis=1)\n",
            input: InputKind::Tensor(&[3, 4]),
            tests: 2,
        },
        Benchmark {
            name: "normalized_rows",
            program: "input x\n\
                h1 = mf.math.negate(x)\n\
                h2 = mf.layers.Softmax(h1, axis=1)\n\
                y = mf.math.reduce_mean(h2, axis=0)\n",
            input: InputKind::Tensor(&[4, 5]),
            tests: 2,
        },
        Benchmark {
            name: "table_top",
            program: "input t\n\
                t1 = mf.dplyr.filter(t, column=\"age\", threshold=30)\n\
                t2 = mf.dplyr.arrange(t1, column=\"score\", desc=true)\n\
                y = mf.dplyr.slice_head(t2, n=3)\n",
            input: InputKind::Table,
            tests: 2,
        },
        Benchmark {
            name: "table_dedup",
            program: "input t\n\
                t1 = mf.dplyr.distinct(t)\n\
                t2 = mf.dplyr.arrange(t1, column=\"age\")\n\
                t3 = mf.dplyr.filter(t2, column=\"score\", threshold=50)\n\
                y = mf.dplyr.slice_head(t3, n=2)\n",
            input: InputKind::Table,
            tests: 2,
        },
        Benchmark {
            name: "deep_stack",
            program: "input x\n\
                h1 = mf.layers.Conv2D(x, filters=4, kernel_size=3)\n\
                h2 = mf.layers.ReLU(h1)\n\
                h3 = mf.layers.Conv2D(h2, filters=4, kernel_size=3, strides=(2, 2))\n\
                h4 = mf.layers.ReLU(h3)\n\
                h5 = mf.layers.UpSampling2D(h4, size=(2, 2))\n\
                h6 = mf.layers.Dropout(h5, rate=0.25)\n\
                h7 = mf.layers.GlobalMaxPooling2D(h6)\n\
                h8 = mf.layers.Dense(h7, units=6)\n\
                h9 = mf.layers.ReLU(h8)\n\
                y = mf.layers.Dense(h9, units=2)\n",
            input: InputKind::Tensor(&[2, 3, 8, 8]),
            tests: 2,
        },
        Benchmark {
            name: "mlp_dropout",
            program: "input x\n\
                h1 = mf.layers.Dense(x, units=6)\n\
                h2 = mf.layers.Dropout(h1, rate=0.5)\n\
                h3 = mf.layers.ReLU(h2)\n\
                h4 = mf.layers.Dense(h3, units=4)\n\
                h5 = mf.layers.Softmax(h4, axis=-1)\n\
                y = mf.math.reduce_sum(h5, axis=1)\n",
            input: InputKind::Tensor(&[5, 8]),
            tests: 2,
        },
    ]
}

/// Single-line programs used to measure the effect of error learning and of
/// documented relations on the number of candidates tried.
pub fn ablation_scenarios() -> Vec<Benchmark> {
    vec![
        Benchmark {
            name: "negative_dimension",
            program: "input x\ny = mf.layers.Conv2D(x, filters=1, kernel_size=2)\n",
            input: InputKind::Tensor(&[1, 1, 3, 3]),
            tests: 1,
        },
        Benchmark {
            name: "shape_relations",
            program: "input x\ny = mf.layers.Conv2D(x, filters=2, kernel_size=3, strides=(2, 2))\n",
            input: InputKind::Tensor(&[1, 1, 7, 7]),
            tests: 1,
        },
    ]
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    // two decimals keep test files short and readable
    let data = (0..n).map(|_| (rng.gen_range(-100..=100) as f64) / 100.0).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

pub fn random_table(rng: &mut impl Rng, rows: usize) -> Table {
    let mut ages: Vec<i64> = (0..rows).map(|_| rng.gen_range(18..60)).collect();
    let mut scores: Vec<i64> = (0..rows).map(|_| rng.gen_range(0..100)).collect();
    let mut ids: Vec<i64> = (0..rows as i64).collect();
    // one duplicated row so de-duplication matters
    if rows >= 2 {
        ages[rows - 1] = ages[0];
        scores[rows - 1] = scores[0];
        ids[rows - 1] = ids[0];
    }
    Table::new(vec![
        Column { name: "id".into(), data: ColumnData::Int(ids) },
        Column { name: "age".into(), data: ColumnData::Int(ages) },
        Column { name: "score".into(), data: ColumnData::Int(scores) },
    ])
    .expect("columns have equal length")
}

/// Whole-program tests with seeded inputs; expected outputs come from
/// running the source program.
pub fn generate_tests(bench: &Benchmark, program: &SourceProgram, runtime: &dyn Runtime, seed: u64) -> Vec<TestCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let var = program.input_vars.first().cloned().unwrap_or_else(|| "x".into());
    (0..bench.tests)
        .map(|_| {
            let value = match bench.input {
                InputKind::Tensor(shape) => Value::Tensor(random_tensor(&mut rng, shape)),
                InputKind::Table => Value::Table(random_table(&mut rng, 8)),
            };
            let inputs: Environment = [(var.clone(), value)].into_iter().collect();
            let code: Vec<String> = program.lines.iter().map(|l| l.render()).collect();
            let expected_output = runtime
                .eval(&code.join("\n"), &inputs)
                .unwrap_or_else(|e| panic!("benchmark {} fails on its own input: {e}", bench.name));
            TestCase { inputs, expected_output, line_scope: None }
        })
        .collect()
}

/// Migrates one benchmark with the in-process mock runtime.
pub fn run_benchmark(bench: &Benchmark, config: &MigrationConfig, embeddings: Option<&EmbeddingTable>) -> Result<Migration, MigrationError> {
    let source = source_corpus();
    let target = target_corpus();
    let runtime = MockRuntime;
    let program = bench.parse(&source);
    let tests = generate_tests(bench, &program, &runtime, config.seed);
    migrate(&program, &tests, &source, &target, &runtime, &runtime, embeddings, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_shape() {
        let all = benchmarks();
        assert_eq!(all.len(), 10);
        assert!(all.iter().all(|b| (3..=10).contains(&b.lines())), "line counts");
        assert!(all.iter().filter(|b| b.needs_permute()).count() >= 3);
        let source = source_corpus();
        for b in &all {
            let p = b.parse(&source);
            let t1 = generate_tests(b, &p, &MockRuntime, 7);
            let t2 = generate_tests(b, &p, &MockRuntime, 7);
            assert_eq!(t1, t2, "{}", b.name);
        }
    }

    #[test]
    fn bundled_data_loads() {
        assert!(source_corpus().entries.len() >= 12);
        assert!(target_corpus().entries.len() >= 12);
        assert!(embeddings().len() > 100);
    }
}
