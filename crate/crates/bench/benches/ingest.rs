use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lakelet_bench::lakelet_core::catalog::classify_format;
use lakelet_bench::lakelet_core::experiment::{gen_corpus, run_rq1, BenchEnv, Composition, CorpusSpec};
use lakelet_bench::lakelet_core::store::FormatClass;

fn classify(c: &mut Criterion) {
    let corpus = gen_corpus(&CorpusSpec::new(300, 42)).expect("corpus");
    let mut group = c.benchmark_group("classify_format");
    for class in [FormatClass::Structured, FormatClass::SemiStructured, FormatClass::Unstructured] {
        let sample = corpus
            .records
            .iter()
            .find(|r| r.format == class)
            .map(|r| r.record.payload.clone())
            .expect("corpus holds every class");
        group.bench_with_input(BenchmarkId::from_parameter(class), &sample, |b, payload| {
            b.iter(|| classify_format(black_box(payload)))
        });
    }
    group.finish();
}

/// Wall-clock cost of one paired run: every record through the lake and
/// through the warehouse ETL, each as a scheduled job.
fn paired_ingest(c: &mut Criterion) {
    let mut group = c.benchmark_group("paired_ingest");
    group.sample_size(10);
    for (name, composition) in [
        ("mixed", Composition::default()),
        ("structured", Composition::new(1.0, 0.0, 0.0).unwrap()),
    ] {
        let corpus = gen_corpus(&CorpusSpec::new(500, 42).composition(composition)).expect("corpus");
        group.bench_function(name, |b| {
            b.iter(|| {
                let env = BenchEnv::standard(corpus.warehouse_schema(false));
                run_rq1(&env, black_box(&corpus)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, classify, paired_ingest);
criterion_main!(benches);
