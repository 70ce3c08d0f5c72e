use super::*;
use crate::scenario::ScenarioConfig;
use proptest::prelude::*;

fn link(rate: f64) -> Link {
    Link {
        rate,
        prop_delay: Duration::from_millis(10),
        buffer_capacity: 50,
    }
}

fn flow(id: u32, connection: u32, path: Vec<usize>) -> FlowSpec {
    FlowSpec {
        id,
        connection,
        path,
        start: Duration::ZERO,
        stop: None,
        message_bytes: 1250,
        send_rate: None,
    }
}

fn set_of(members: Vec<usize>) -> SharedBottleneckSet {
    SharedBottleneckSet {
        set_id: 0,
        members,
        bottleneck_link: 0,
    }
}

fn bw(values: &[f64]) -> BTreeMap<usize, f64> {
    values.iter().copied().enumerate().collect()
}

#[test]
fn grouping_splits_by_bottleneck() {
    // links: 0 = L1 (slow), 1 = L2 (slow), 2 = fast access
    let links = vec![link(1e6), link(1e6), link(1e7)];
    let flows = vec![
        flow(1, 0, vec![2, 0]),
        flow(2, 0, vec![0]),
        flow(3, 0, vec![2, 1]),
    ];
    let g = group_shared_bottlenecks(&links, &flows).unwrap();
    assert_eq!(g.sets.len(), 1);
    assert_eq!(g.sets[0].members, vec![0, 1]);
    assert_eq!(g.sets[0].bottleneck_link, 0);
    assert_eq!(g.sets[0].initial_alpha(), 0.5);
    assert_eq!(g.independent, vec![2]);
}

#[test]
fn grouping_three_on_one_link() {
    let links = vec![link(1e6)];
    let flows = (0..3).map(|i| flow(i, 7, vec![0])).collect::<Vec<_>>();
    let g = group_shared_bottlenecks(&links, &flows).unwrap();
    assert_eq!(g.sets[0].n(), 3);
    assert!((g.sets[0].initial_alpha() - 1.0 / 3.0).abs() < 1e-15);
    assert!(g.independent.is_empty());
}

#[test]
fn grouping_separates_connections() {
    let links = vec![link(1e6)];
    let flows = vec![flow(1, 0, vec![0]), flow(2, 1, vec![0])];
    let g = group_shared_bottlenecks(&links, &flows).unwrap();
    assert!(g.sets.is_empty());
    assert_eq!(g.independent, vec![0, 1]);
}

#[test]
fn grouping_rejects_unknown_link() {
    let links = vec![link(1e6)];
    let flows = vec![flow(9, 0, vec![3])];
    assert_eq!(
        group_shared_bottlenecks(&links, &flows),
        Err(FairnessError::Unroutable(9))
    );
}

#[test]
fn default_fairness_scenario_forms_one_set() {
    let cfg = ScenarioConfig::default_fairness();
    let g = group_shared_bottlenecks(&cfg.build_links(), &cfg.build_flows().unwrap()).unwrap();
    assert_eq!(g.sets.len(), 1);
    assert_eq!(g.sets[0].n(), 2);
}

#[test]
fn alpha_equal_members() {
    let a = compute_alpha(&set_of(vec![0, 1]), &bw(&[1e6, 1e6]), AlphaMode::AsPrinted).unwrap();
    assert_eq!(a[&0], 0.5);
    assert_eq!(a[&1], 0.5);
}

#[test]
fn alpha_as_printed_uneven() {
    let a = compute_alpha(
        &set_of(vec![0, 1, 2]),
        &bw(&[2e6, 1e6, 1e6]),
        AlphaMode::AsPrinted,
    )
    .unwrap();
    for r in 0..3 {
        assert_eq!(a[&r], 2.0 / 4.0);
    }
}

#[test]
fn alpha_per_subflow_uneven() {
    let a = compute_alpha(
        &set_of(vec![0, 1, 2]),
        &bw(&[2e6, 1e6, 1e6]),
        AlphaMode::PerSubflow,
    )
    .unwrap();
    assert_eq!(a[&0], 0.5);
    assert_eq!(a[&1], 0.25);
    assert_eq!(a[&2], 0.25);
}

#[test]
fn alpha_errors() {
    assert_eq!(
        compute_alpha(&set_of(vec![]), &bw(&[]), AlphaMode::AsPrinted),
        Err(FairnessError::EmptySet)
    );
    assert_eq!(
        compute_alpha(&set_of(vec![0, 1]), &bw(&[1e6, 0.0]), AlphaMode::AsPrinted),
        Err(FairnessError::NonPositiveBandwidth(1))
    );
    assert_eq!(
        compute_alpha(&set_of(vec![0, 5]), &bw(&[1e6]), AlphaMode::PerSubflow),
        Err(FairnessError::NonPositiveBandwidth(5))
    );
}

#[test]
fn bdp_examples() {
    let bits = 10_000.0;
    assert_eq!(compute_bdp(100.0 * bits, Duration::from_millis(200), bits), Ok(20));
    assert_eq!(compute_bdp(0.0, Duration::from_millis(200), bits), Ok(0));
    assert_eq!(compute_bdp(10e6, Duration::from_millis(50), bits), Ok(50));
    assert_eq!(compute_bdp(10e6, Duration::from_micros(50_001), bits), Ok(51));
    assert_eq!(
        compute_bdp(1e6, Duration::ZERO, bits),
        Err(FairnessError::InvalidRtt)
    );
}

#[test]
fn pacing_gate() {
    let unit = 10_000.0;
    assert_eq!(coupled_pacing_rate(1.25, 100.0 * unit, 10, 20), 125.0 * unit);
    assert_eq!(coupled_pacing_rate(1.25, 100.0 * unit, 20, 20), 125.0 * unit);
    assert_eq!(coupled_pacing_rate(1.25, 100.0 * unit, 21, 20), 0.0);
}

#[test]
fn gain_vector_examples() {
    assert_eq!(
        gain_vector(0.5).unwrap(),
        [1.25, 0.75, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]
    );
    assert_eq!(gain_vector(1.0).unwrap(), crate::bbr::BASELINE_GAIN_VECTOR);
    assert_eq!(gain_vector(0.0), Err(FairnessError::AlphaOutOfRange(0.0)));
    assert!(gain_vector(1.01).is_err());
    assert!(gain_vector(f64::NAN).is_err());
}

#[test]
fn jain_examples() {
    assert_eq!(jain_index(&[5.0, 5.0]).unwrap(), 1.0);
    assert_eq!(jain_index(&[1.0, 0.0]).unwrap(), 0.5);
    assert!((jain_index(&[3.0, 1.0]).unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(jain_index(&[]), Err(FairnessError::EmptyInput));
    assert_eq!(jain_index(&[0.0, 0.0]), Err(FairnessError::AllZero));
    assert_eq!(
        jain_index(&[1.0, -1.0]),
        Err(FairnessError::InvalidThroughput(-1.0))
    );
}

fn preds(classes: &[LatencyClass]) -> BTreeMap<usize, LatencyClass> {
    classes.iter().copied().enumerate().collect()
}

#[test]
fn advise_examples() {
    let alphas = bw(&[0.5, 0.5]);
    let same = ml_advise_alpha(
        &alphas,
        &preds(&[LatencyClass::Low, LatencyClass::Low]),
        &bw(&[0.5, 0.5]),
    )
    .unwrap();
    assert_eq!(same, alphas);

    let raised = ml_advise_alpha(
        &alphas,
        &preds(&[LatencyClass::High, LatencyClass::Low]),
        &bw(&[0.2, 0.8]),
    )
    .unwrap();
    assert!((raised[&0] - 0.55).abs() < 1e-12);
    assert!((raised[&1] - 0.45).abs() < 1e-12);

    let capped = ml_advise_alpha(
        &bw(&[1.0, 1.0]),
        &preds(&[LatencyClass::High, LatencyClass::High]),
        &bw(&[0.1, 0.9]),
    )
    .unwrap();
    assert_eq!(capped[&0], 1.0);

    let floored = ml_advise_alpha(
        &bw(&[0.05, 0.05]),
        &preds(&[LatencyClass::Low, LatencyClass::Low]),
        &bw(&[0.9, 0.1]),
    )
    .unwrap();
    assert_eq!(floored[&0], ALPHA_MIN);

    assert_eq!(
        ml_advise_alpha(&alphas, &preds(&[LatencyClass::Low]), &bw(&[0.5, 0.5])),
        Err(FairnessError::MissingPrediction(1))
    );
}

#[test]
fn serde_names() {
    assert_eq!(
        serde_json::to_string(&AlphaMode::PerSubflow).unwrap(),
        "\"per_subflow\""
    );
    assert_eq!(
        serde_json::from_str::<AlphaMode>("\"as_printed\"").unwrap(),
        AlphaMode::AsPrinted
    );
    assert_eq!(
        serde_json::from_str::<RttPrime>("\"min\"").unwrap(),
        RttPrime::Min
    );
    assert_eq!(AlphaMode::default(), AlphaMode::AsPrinted);
    assert_eq!(RttPrime::default(), RttPrime::Max);
}

fn class_strategy() -> impl Strategy<Value = LatencyClass> {
    prop_oneof![Just(LatencyClass::Low), Just(LatencyClass::High)]
}

proptest! {
    #[test]
    fn gain_vector_structure(alpha in 1e-9f64..=1.0) {
        let g = gain_vector(alpha).unwrap();
        prop_assert_eq!(g[0], 1.25);
        prop_assert_eq!(g[1], 0.75);
        for &x in &g[2..] {
            prop_assert_eq!(x, alpha);
        }
    }

    #[test]
    fn alpha_mode_invariants(values in prop::collection::vec(1.0f64..1e9, 1..12)) {
        let set = set_of((0..values.len()).collect());
        let printed = compute_alpha(&set, &bw(&values), AlphaMode::AsPrinted).unwrap();
        let first = printed[&0];
        for a in printed.values() {
            prop_assert_eq!(*a, first);
            prop_assert!(*a > 0.0 && *a <= 1.0);
        }
        let per = compute_alpha(&set, &bw(&values), AlphaMode::PerSubflow).unwrap();
        let sum: f64 = per.values().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pacing_monotone(
        g1 in 0.0f64..2.0, g2 in 0.0f64..2.0,
        r1 in 0.0f64..1e8, r2 in 0.0f64..1e8,
        inflight in 0u64..200, bdp in 0u64..200,
    ) {
        let (glo, ghi) = (g1.min(g2), g1.max(g2));
        let (rlo, rhi) = (r1.min(r2), r1.max(r2));
        prop_assert!(coupled_pacing_rate(glo, rlo, inflight, bdp) <= coupled_pacing_rate(ghi, rlo, inflight, bdp));
        prop_assert!(coupled_pacing_rate(glo, rlo, inflight, bdp) <= coupled_pacing_rate(glo, rhi, inflight, bdp));
        let expected = if inflight <= bdp { glo * rlo } else { 0.0 };
        prop_assert_eq!(coupled_pacing_rate(glo, rlo, inflight, bdp), expected);
    }

    #[test]
    fn jain_bounds_and_scale(values in prop::collection::vec(0.0f64..1e6, 1..20), k in 1e-3f64..1e3) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let j = jain_index(&values).unwrap();
        let n = values.len() as f64;
        prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0);
        let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
        prop_assert!((jain_index(&scaled).unwrap() - j).abs() < 1e-9);
    }

    #[test]
    fn jain_equal_is_one(v in 1e-3f64..1e6, n in 1usize..30) {
        prop_assert!((jain_index(&vec![v; n]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn advise_stays_in_bounds(
        alphas in prop::collection::vec(0.05f64..=1.0, 1..8),
        classes in prop::collection::vec(class_strategy(), 8),
        raw in prop::collection::vec(0.0f64..1.0, 8),
    ) {
        let n = alphas.len();
        let total: f64 = raw[..n].iter().sum::<f64>().max(1e-9);
        let shares: BTreeMap<usize, f64> = (0..n).map(|i| (i, raw[i] / total)).collect();
        let p: BTreeMap<usize, LatencyClass> = (0..n).map(|i| (i, classes[i])).collect();
        let out = ml_advise_alpha(&bw(&alphas), &p, &shares).unwrap();
        for a in out.values() {
            prop_assert!(*a >= ALPHA_MIN && *a <= ALPHA_MAX);
        }
    }

    #[test]
    fn advise_fixed_point(alphas in prop::collection::vec(0.05f64..=1.0, 1..8)) {
        let n = alphas.len();
        let shares: BTreeMap<usize, f64> = (0..n).map(|i| (i, 1.0 / n as f64)).collect();
        let p: BTreeMap<usize, LatencyClass> = (0..n).map(|i| (i, LatencyClass::Low)).collect();
        let once = ml_advise_alpha(&bw(&alphas), &p, &shares).unwrap();
        let twice = ml_advise_alpha(&once, &p, &shares).unwrap();
        prop_assert_eq!(&once, &bw(&alphas));
        prop_assert_eq!(once, twice);
    }
}
