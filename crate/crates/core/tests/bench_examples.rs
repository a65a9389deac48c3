//! Paired benchmark runs: the same corpus through both pipelines under
//! controlled cost models.

use lakelet_core::clock::WorkModel;
use lakelet_core::experiment::{
    gen_corpus, rq1_report_tsv, rq1_series_tsv, rq2_report_tsv, run_rq1, run_rq2, BenchEnv,
    Composition, Corpus, CorpusSpec, Rq1Report, DEFAULT_NODES,
};
use lakelet_core::scheduler::NodeSpec;

fn rq1(corpus: &Corpus, model: WorkModel) -> Rq1Report {
    let env = BenchEnv::new(
        corpus.warehouse_schema(false),
        model,
        NodeSpec::parse_list(DEFAULT_NODES).unwrap(),
    );
    run_rq1(&env, corpus).unwrap()
}

fn means(r: &Rq1Report) -> (f64, f64) {
    let all = r.overall();
    (all.mean_it_lake.unwrap(), all.mean_it_dw.unwrap())
}

#[test]
fn transform_cost_slows_only_the_warehouse() {
    let corpus = gen_corpus(&CorpusSpec::new(300, 5)).unwrap();
    let base = rq1(&corpus, WorkModel::default());
    let costly = rq1(
        &corpus,
        WorkModel {
            transform_per_field_us: 200,
            ..WorkModel::default()
        },
    );
    let (lake0, dw0) = means(&base);
    let (lake1, dw1) = means(&costly);
    assert!(dw1 > lake1, "warehouse {dw1} vs lake {lake1}");
    assert!(
        dw1 > dw0,
        "transform cost did not reach the warehouse: {dw0} -> {dw1}"
    );
    assert_eq!(lake0, lake1, "transform cost leaked into the lake");
}

#[test]
fn structured_corpus_without_transform_cost_still_favours_the_lake() {
    let spec = CorpusSpec::new(300, 6).composition(Composition::new(1.0, 0.0, 0.0).unwrap());
    let corpus = gen_corpus(&spec).unwrap();
    let r = rq1(&corpus, WorkModel::default());
    assert_eq!(r.overall().dw_accepted, corpus.len());
    let ratio = r.ratio().unwrap();
    assert!(ratio < 1.0, "ratio {ratio}");
}

#[test]
fn unstructured_share_is_rejected_by_the_warehouse_only() {
    for (composition, rejected) in [
        (Composition::new(0.5, 0.5, 0.0).unwrap(), 0),
        (Composition::new(0.2, 0.5, 0.3).unwrap(), 60),
    ] {
        let corpus = gen_corpus(&CorpusSpec::new(200, 7).composition(composition)).unwrap();
        let r = rq1(&corpus, WorkModel::default());
        assert_eq!(r.overall().lake_ingested, 200);
        assert_eq!(r.overall().records - r.overall().dw_accepted, rejected);
    }
}

#[test]
fn top_clusters_recover_planted_groups() {
    let spec = CorpusSpec::new(1_000, 42).composition(Composition::new(0.0, 0.6, 0.4).unwrap());
    let corpus = gen_corpus(&spec).unwrap();
    let env = BenchEnv::standard(corpus.warehouse_schema(false));
    run_rq1(&env, &corpus).unwrap();
    let r = run_rq2(&env, 8, 42).unwrap();
    let groups = corpus.groups();
    let members = r.lake_model.members();
    for row in &r.rows {
        let mut counts = [0usize; 8];
        for &i in &members[row.lake.cluster_index] {
            counts[groups[&r.lake_ids[i]]] += 1;
        }
        let total: usize = counts.iter().sum();
        let purity = *counts.iter().max().unwrap() as f64 / total as f64;
        assert!(
            purity >= 0.9,
            "cluster {} purity {purity} ({counts:?})",
            row.rank
        );
    }
}

#[test]
fn reports_are_reproducible() {
    let corpus = gen_corpus(&CorpusSpec::new(300, 8)).unwrap();
    let run = || {
        let env = BenchEnv::standard(corpus.warehouse_schema(false));
        let a = run_rq1(&env, &corpus).unwrap();
        let b = run_rq2(&env, 8, 8).unwrap();
        [rq1_report_tsv(&a), rq1_series_tsv(&a), rq2_report_tsv(&b)]
    };
    assert_eq!(run(), run());
}
