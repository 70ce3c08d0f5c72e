use fairbbr_core::experiment::{build_controller, mean_throughput_bps, run_scenario};
use fairbbr_core::fairness::{jain_index, LatencyPredictor};
use fairbbr_core::measurement::LatencyClass;
use fairbbr_core::scenario::{Algorithm, ScenarioConfig};
use fairbbr_core::simcore::{SimTime, Simulation};

struct AlwaysLow;

impl LatencyPredictor for AlwaysLow {
    fn predict(&self, _block_size: f64, _throughput: f64) -> LatencyClass {
        LatencyClass::Low
    }
}

fn tail_jain(cfg: &ScenarioConfig, predictor: Option<Box<dyn LatencyPredictor>>) -> f64 {
    let out = run_scenario(cfg, predictor).unwrap();
    let from = cfg.duration_s * 2.0 / 3.0;
    let shares: Vec<f64> = mean_throughput_bps(&out.rows, &out.flows, from)
        .into_iter()
        .map(|(_, bps)| bps)
        .collect();
    jain_index(&shares).unwrap()
}

#[test]
fn coupled_two_subflows_share_fairly() {
    let mut cfg = ScenarioConfig::default_fairness();
    cfg.algorithm = Algorithm::Bbr;
    let bbr = tail_jain(&cfg, None);
    cfg.algorithm = Algorithm::Coupled;
    let coupled = tail_jain(&cfg, None);
    cfg.algorithm = Algorithm::CoupledMl;
    let ml = tail_jain(&cfg, Some(Box::new(AlwaysLow)));
    assert!(coupled >= 0.95, "coupled {coupled}");
    assert!(coupled >= bbr, "coupled {coupled} < bbr {bbr}");
    assert!(ml >= coupled - 0.02, "coupled_ml {ml} vs coupled {coupled}");
}

fn traced(cfg: &ScenarioConfig) -> Simulation {
    let controller = build_controller(cfg, None).unwrap();
    let mut sim = Simulation::new(cfg, controller).unwrap();
    sim.enable_trace();
    sim.run(SimTime::ZERO + cfg.duration()).unwrap();
    sim
}

fn assert_same_run(cfg: &ScenarioConfig) {
    let mut bbr_cfg = cfg.clone();
    bbr_cfg.algorithm = Algorithm::Bbr;
    let mut coupled_cfg = cfg.clone();
    coupled_cfg.algorithm = Algorithm::Coupled;
    let a = traced(&bbr_cfg);
    let b = traced(&coupled_cfg);
    assert!(!a.trace().unwrap().is_empty());
    assert!(a.trace() == b.trace(), "event traces differ");
    assert_eq!(a.rows(), b.rows());
    assert_eq!(a.stats(), b.stats());
}

#[test]
fn single_member_coupled_run_matches_bbr() {
    let mut cfg = ScenarioConfig::default_fairness();
    cfg.flows.truncate(1);
    cfg.duration_s = 20.0;
    assert_same_run(&cfg);
}

#[test]
fn subflows_of_different_connections_are_not_coupled() {
    let mut cfg = ScenarioConfig::default_fairness();
    cfg.flows[1].connection = cfg.flows[0].connection + 1;
    cfg.duration_s = 20.0;
    assert_same_run(&cfg);
}
