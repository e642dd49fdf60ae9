use preimage_gc::bench::{run_benchmark, BenchmarkPlan, MethodSpec};
use preimage_gc::synthgen::{generate, GeneratorId, GeneratorParams, Sidecar};
use preimage_gc::Config;

fn plan() -> BenchmarkPlan {
    BenchmarkPlan {
        generators: vec![GeneratorId::Fanin3, GeneratorId::Logistic2],
        methods: vec![
            MethodSpec {
                id: "ours".into(),
                config: Config::default(),
            },
            MethodSpec {
                id: "linear_gc".into(),
                config: Config::linear_baseline(1),
            },
        ],
        t_grid: vec![60, 120],
        seeds: vec![0, 1, 2],
        params: vec![],
    }
}

#[test]
fn sidecar_round_trips() {
    let data = generate(GeneratorId::Nonlinear5, 80, 3, None).unwrap();
    let text = serde_json::to_string(&data.sidecar()).unwrap();
    let back: Sidecar = serde_json::from_str(&text).unwrap();
    assert_eq!(back, data.sidecar());
    assert_eq!(back.ground_truth_matrix().unwrap(), GeneratorId::Nonlinear5.ground_truth());
    assert_eq!(back.params, GeneratorParams::defaults(GeneratorId::Nonlinear5));
}

#[test]
fn benchmark_is_ordered_and_repeatable() {
    let plan = plan();
    let a = run_benchmark(&plan, Some(1), |_, _, _| {}).unwrap();
    let b = run_benchmark(&plan, Some(3), |_, _, _| {}).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), plan.cell_count());
    assert_eq!(a.summaries.len(), 2 * 2 * 2);
    assert!(a.records.iter().all(|r| r.failure.is_none()));
    assert_eq!(a.records_csv(), b.records_csv());

    let s = a.summary(GeneratorId::Logistic2, "ours", 120).unwrap();
    assert_eq!((s.n, s.failed, s.insufficient), (3, 0, false));
    assert!(s.q25.unwrap() <= s.median.unwrap() && s.median.unwrap() <= s.q75.unwrap());
}

#[test]
fn progress_sees_every_cell() {
    let plan = plan();
    let seen = std::sync::Mutex::new(Vec::new());
    run_benchmark(&plan, Some(2), |done, total, _| seen.lock().unwrap().push((done, total))).unwrap();
    let mut seen = seen.into_inner().unwrap();
    seen.sort();
    let total = plan.cell_count();
    assert_eq!(seen, (1..=total).map(|d| (d, total)).collect::<Vec<_>>());
}
