//! Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if
//! any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fairbbr_cli::fairness::{compare, PredictorSource};
use fairbbr_cli::sweep::{run_sweep, CellSummary, SweepSpec};
use fairbbr_cli::train::{train, TrainOptions};
use fairbbr_core::bbr::{Extremum, WindowedFilter};
use fairbbr_core::experiment::build_controller;
use fairbbr_core::fairness::jain_index;
use fairbbr_core::measurement::{Dataset, DatasetRow, LatencyClass, MetricsRow, Provenance};
use fairbbr_core::ml::{
    fit_mlp_regressor, repeated_cv, Adam, LossKind, Mlp, MlpParams, ModelSpec, Standardizer, TraceLine,
};
use fairbbr_core::rng::rng_for;
use fairbbr_core::scenario::{Algorithm, ScenarioConfig};
use fairbbr_core::simcore::{SimTime, Simulation};
use rand::seq::SliceRandom;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn within(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (
        elapsed <= Duration::from_secs(limit_s),
        format!("{:.1}s of {limit_s}s", elapsed.as_secs_f64()),
    )
}

/// Ranks starting at 1, ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

struct SweepRun {
    capacity: f64,
    primary: Vec<CellSummary>,
    all: Vec<CellSummary>,
    rows: Vec<MetricsRow>,
    primary_time: Duration,
    total_time: Duration,
}

fn sweep() -> Result<SweepRun, String> {
    let grid = SweepSpec::default_grid();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let primary_buffer = grid.primary_buffer();
    let bottleneck = &grid.base.links[1];
    let capacity = bottleneck.rate_bps / (f64::from(grid.base.flows[0].message_bytes) * 8.0);
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    let mut run = |buffers: Vec<i64>| -> Result<(), String> {
        let spec = SweepSpec::new(grid.base.clone(), grid.send_rates.clone(), buffers).map_err(|e| e.to_string())?;
        for (_, result) in run_sweep(&spec, jobs).map_err(|e| e.to_string())? {
            let cell = result.map_err(|e| e.to_string())?;
            rows.extend(cell.rows);
            summaries.push(cell.summary);
        }
        Ok(())
    };
    let start = Instant::now();
    run(vec![primary_buffer])?;
    let primary_time = start.elapsed();
    run(grid.buffers.iter().copied().filter(|&b| b != primary_buffer).collect())?;
    let total_time = start.elapsed();
    let primary = summaries.iter().filter(|s| s.cell.buffer == primary_buffer).cloned().collect();
    Ok(SweepRun {
        capacity,
        primary,
        all: summaries,
        rows,
        primary_time,
        total_time,
    })
}

fn criterion_1(s: &SweepRun) -> Verdict {
    let (rates, lat): (Vec<f64>, Vec<f64>) = s
        .primary
        .iter()
        .map(|c| (c.cell.send_rate, c.avg_latency.unwrap_or(f64::INFINITY)))
        .unzip();
    let rho = spearman(&rates, &lat);
    let (fast, t) = within(s.primary_time, 120);
    verdict(
        rho >= 0.9 && fast && rates.len() == 10,
        format!("spearman rho {rho:.4} (need >= 0.9) over {} rates, {t}", rates.len()),
    )
}

fn criterion_2(s: &SweepRun) -> Verdict {
    let cap = s.capacity;
    let thr: Vec<f64> = s.primary.iter().map(|c| c.throughput).collect();
    let rates: Vec<f64> = s.primary.iter().map(|c| c.cell.send_rate).collect();
    // onset: first rate from which every cell stays within 5% of capacity
    let onset = (0..thr.len()).find(|&i| thr[i..].iter().all(|&t| (t - cap).abs() <= 0.05 * cap));
    let Some(onset) = onset else {
        return verdict(false, format!("no plateau within 5% of capacity {cap}; throughput {thr:?}"));
    };
    let plateau = thr[onset..].iter().sum::<f64>() / (thr.len() - onset) as f64;
    let rising = thr[..=onset].windows(2).all(|w| w[1] >= w[0] - 0.01 * cap);
    let bounded = thr.iter().all(|&t| t <= cap * 1.01);
    let pass = rising && bounded && rates[onset] >= cap && (plateau - cap).abs() <= 0.05 * cap;
    verdict(
        pass,
        format!(
            "plateau {plateau:.2} msg/s vs capacity {cap} (within 5%), onset at rate {} (need >= {cap}), non-decreasing before onset {rising}, never above capacity {bounded}",
            rates[onset]
        ),
    )
}

fn criterion_3(s: &SweepRun) -> Verdict {
    let cell = |rate: f64, buffer: i64| s.all.iter().find(|c| c.cell.send_rate == rate && c.cell.buffer == buffer);
    let mut rates: Vec<f64> = s.primary.iter().map(|c| c.cell.send_rate).collect();
    rates.sort_by(f64::total_cmp);
    let mut pass = true;
    let mut parts = Vec::new();
    for &rate in &rates[rates.len() - 2..] {
        let (Some(big), Some(small)) = (cell(rate, 100), cell(rate, 10)) else {
            return verdict(false, format!("missing cells at rate {rate}"));
        };
        let (lb, ls) = (big.avg_latency.unwrap_or(f64::INFINITY), small.avg_latency.unwrap_or(0.0));
        pass &= lb <= ls;
        parts.push(format!("rate {rate}: latency buf100 {lb:.3} <= buf10 {ls:.3}"));
    }
    let max_thr = |b: i64| s.all.iter().filter(|c| c.cell.buffer == b).map(|c| c.throughput).fold(0.0, f64::max);
    let (t10, t50, t100) = (max_thr(10), max_thr(50), max_thr(100));
    pass &= t100 >= t50 * 0.99 && t50 >= t10 * 0.99;
    let (fast, t) = within(s.total_time, 300);
    parts.push(format!("max throughput 100/50/10: {t100:.2} >= {t50:.2} >= {t10:.2} (1% ties), {t}"));
    verdict(pass && fast, parts.join("; "))
}

/// Labels are exactly `throughput > median`.
fn separable_dataset() -> Dataset {
    let mut rng = rng_for(4242, 0);
    let n = 600;
    let throughputs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..200.0)).collect();
    let mut sorted = throughputs.clone();
    sorted.sort_by(f64::total_cmp);
    let median = (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
    let rows = throughputs
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let high = t > median;
            DatasetRow {
                send_rate: t,
                block_size: [10.0, 50.0, 100.0][i % 3],
                throughput: t,
                avg_latency: if high { 2.0 } else { 0.5 },
                class: LatencyClass::from_high(high),
            }
        })
        .collect();
    Dataset {
        rows,
        provenance: Provenance::Simulator,
    }
}

fn criterion_4(sim_data: &Dataset) -> (Verdict, Option<Vec<TraceLine>>) {
    let start = Instant::now();
    let sep = separable_dataset();
    let (x, y) = (sep.features(), sep.labels());
    let mut parts = Vec::new();
    let mut pass = true;
    for spec in ModelSpec::defaults() {
        match repeated_cv(&spec, &x, &y, 5, 1, 7, true) {
            Ok(cv) => {
                pass &= cv.mean >= 0.95;
                parts.push(format!("separable {} {:.4}", spec.name(), cv.mean));
            }
            Err(e) => return (verdict(false, format!("separable {}: {e}", spec.name())), None),
        }
    }
    if sim_data.len() < 500 {
        return (verdict(false, format!("simulator dataset has {} rows, need >= 500", sim_data.len())), None);
    }
    let outcome = match train(sim_data, TrainOptions::default()) {
        Ok(o) => o,
        Err(e) => return (verdict(false, format!("training failed: {e}")), None),
    };
    parts.push(format!("{} rows, majority {:.4}", sim_data.len(), outcome.majority));
    for (spec, cv) in &outcome.cv {
        pass &= cv.mean >= outcome.majority + 0.10 && cv.std < 0.05 && cv.runs.len() == 10;
        parts.push(format!("{} {:.4} (std over 10 runs {:.4})", spec.name(), cv.mean, cv.std));
    }
    let (fast, t) = within(start.elapsed(), 120);
    parts.push(t);
    (verdict(pass && fast, parts.join("; ")), Some(outcome.trace))
}

/// `Epoch {n}, Loss: {v}` where `v` prints back to the same float.
fn trace_line_ok(line: &str) -> bool {
    let Some(rest) = line.strip_prefix("Epoch ") else {
        return false;
    };
    let Some((epoch, loss)) = rest.split_once(", Loss: ") else {
        return false;
    };
    let epoch_ok = !epoch.is_empty() && epoch.bytes().all(|b| b.is_ascii_digit());
    epoch_ok && loss.parse::<f64>().is_ok_and(|v| v.is_finite() && v.to_string() == loss)
}

fn criterion_5(sim_data: &Dataset) -> Verdict {
    let start = Instant::now();
    let x = sim_data.regression_features();
    let y = sim_data.throughputs();
    let (Ok(xs), Ok(ys)) = (Standardizer::fit(&x), Standardizer::fit_column(&y)) else {
        return verdict(false, "cannot standardize the simulator dataset".into());
    };
    let yz: Vec<f64> = y.iter().map(|&v| ys.transform_row(&[v])[0]).collect();
    let fit = match fit_mlp_regressor(&xs.transform(&x), &yz, MlpParams::regressor(), 0) {
        Ok(f) => f,
        Err(e) => return verdict(false, format!("regressor failed: {e}")),
    };
    let lines: Vec<String> = fit.trace.iter().map(|l| l.to_string()).collect();
    let epochs: Vec<usize> = fit.trace.iter().map(|l| l.epoch).collect();
    let format_ok = lines.iter().all(|l| trace_line_ok(l)) && epochs == (0..10).map(|i| i * 100).collect::<Vec<_>>();
    let (l0, l900) = (fit.trace[0].loss, fit.trace[9].loss);
    let (fast, t) = within(start.elapsed(), 30);
    verdict(
        format_ok && l900 <= 0.2 * l0 && fast,
        format!(
            "loss {l0:.4} -> {l900:.4} at epoch 900 (ratio {:.4}, need <= 0.2), trace format ok {format_ok}, {t}",
            l900 / l0
        ),
    )
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let cfg = ScenarioConfig::default_fairness();
    let report = match compare(&cfg, PredictorSource::Bootstrap) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("fairness run failed: {e}")),
    };
    let j = |a| report.jain_of(a).unwrap_or(0.0);
    let (bbr, coupled, ml) = (j(Algorithm::Bbr), j(Algorithm::Coupled), j(Algorithm::CoupledMl));
    let (fast, t) = within(start.elapsed(), 60);
    verdict(
        coupled >= bbr && coupled >= 0.95 && ml >= coupled - 0.02 && fast,
        format!("jain bbr {bbr:.4}, coupled {coupled:.4}, coupled_ml {ml:.4}, {t}"),
    )
}

fn brute_force(log: &[(u64, f64)], latest: u64, window: u64, kind: Extremum) -> Option<f64> {
    let inside = log.iter().filter(|(k, _)| latest - k < window).map(|&(_, v)| v);
    match kind {
        Extremum::Max => inside.reduce(f64::max),
        Extremum::Min => inside.reduce(f64::min),
    }
}

fn filter_oracle() -> Result<(), String> {
    let mut rng = rng_for(7, 0);
    for case in 0..10_000 {
        let kind = if case % 2 == 0 { Extremum::Max } else { Extremum::Min };
        let window = rng.gen_range(1..20u64);
        let mut filter = WindowedFilter::new(kind, window);
        let mut log = Vec::new();
        let mut key = 0u64;
        for _ in 0..rng.gen_range(1..60) {
            key += rng.gen_range(0..4u64);
            if rng.gen_bool(0.2) {
                filter.advance(key);
            } else {
                // coarse values so ties are common
                let value = f64::from(rng.gen_range(0..20u8));
                filter.update(key, value);
                log.push((key, value));
            }
            let want = brute_force(&log, key, window, kind);
            if filter.estimate() != want {
                return Err(format!(
                    "case {case}: estimate {:?} but brute force {want:?} at key {key}",
                    filter.estimate()
                ));
            }
        }
    }
    Ok(())
}

fn traced(cfg: &ScenarioConfig) -> Result<Simulation, String> {
    let controller = build_controller(cfg, None).map_err(|e| e.to_string())?;
    let mut sim = Simulation::new(cfg, controller).map_err(|e| e.to_string())?;
    sim.enable_trace();
    sim.run(SimTime::ZERO + cfg.duration()).map_err(|e| e.to_string())?;
    Ok(sim)
}

fn single_member_identity() -> Result<usize, String> {
    let mut cfg = ScenarioConfig::default_fairness();
    cfg.flows.truncate(1);
    cfg.duration_s = 20.0;
    cfg.algorithm = Algorithm::Bbr;
    let a = traced(&cfg)?;
    cfg.algorithm = Algorithm::Coupled;
    let b = traced(&cfg)?;
    let (ta, tb) = (a.trace().unwrap_or_default(), b.trace().unwrap_or_default());
    if ta.is_empty() || ta != tb || a.rows() != b.rows() {
        return Err(format!("traces differ ({} vs {} events)", ta.len(), tb.len()));
    }
    Ok(ta.len())
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let filters = filter_oracle();
    let identity = single_member_identity();
    let (fast, t) = within(start.elapsed(), 30);
    let detail = format!(
        "filter oracle on 10^4 logs: {}; alpha=1 single-member trace identity: {}; {t}",
        filters.as_ref().map_or_else(|e| e.clone(), |_| "exact".into()),
        identity.as_ref().map_or_else(|e| e.clone(), |n| format!("identical over {n} events")),
    );
    verdict(filters.is_ok() && identity.is_ok() && fast, detail)
}

fn gradient_check() -> Result<f64, String> {
    let mut worst = 0.0f64;
    for point in 0..20u64 {
        let mut rng = rng_for(900 + point, 0);
        let mut mlp = Mlp::new(2, 16, point);
        for p in mlp.params.iter_mut() {
            *p += rng.gen_range(-0.5..0.5);
        }
        let x: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
        for kind in [LossKind::BinaryCrossEntropy, LossKind::MeanSquaredError] {
            let y: Vec<f64> = match kind {
                LossKind::BinaryCrossEntropy => (0..8).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect(),
                LossKind::MeanSquaredError => (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let (_, grad) = mlp.loss_and_grad(&x, &y, kind);
            let h = 1e-6;
            for (i, &analytic) in grad.iter().enumerate() {
                let mut plus = mlp.clone();
                plus.params[i] += h;
                let mut minus = mlp.clone();
                minus.params[i] -= h;
                let numeric = (plus.loss(&x, &y, kind) - minus.loss(&x, &y, kind)) / (2.0 * h);
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(err);
            }
        }
    }
    if worst < 1e-4 {
        Ok(worst)
    } else {
        Err(format!("worst relative error {worst:e}"))
    }
}

fn adam_trace() -> Result<(), String> {
    // minimizing theta^2 from theta = 1 with lr 0.1, worked by hand:
    // step 1: m = 0.2, v = 0.004, bias-corrected m/sqrt(v) = 1 / (1 + 5e-9)
    let expected = [0.9000000005, 0.8004122286917928, 0.7015862729460303];
    let mut theta = [1.0];
    let mut adam = Adam::new(1, 0.1);
    for (step, want) in expected.iter().enumerate() {
        let g = [2.0 * theta[0]];
        adam.step(&mut theta, &g);
        if (theta[0] - want).abs() >= 1e-12 {
            return Err(format!("step {}: {} vs {want}", step + 1, theta[0]));
        }
    }
    Ok(())
}

fn jain_invariance() -> Result<(), String> {
    let mut rng = rng_for(31, 0);
    for case in 0..1000 {
        let n = rng.gen_range(1..30);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1e6)).collect();
        let base = jain_index(&v).map_err(|e| format!("case {case}: {e}"))?;
        let mut shuffled = v.clone();
        shuffled.shuffle(&mut rng);
        let c = 10f64.powf(rng.gen_range(-6.0..6.0));
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        let p = jain_index(&shuffled).map_err(|e| e.to_string())?;
        let s = jain_index(&scaled).map_err(|e| e.to_string())?;
        let in_bounds = base >= 1.0 / n as f64 - 1e-12 && base <= 1.0 + 1e-12;
        if (p - base).abs() > 1e-12 || (s - base).abs() > 1e-12 || !in_bounds {
            return Err(format!("case {case}: {base} permuted {p} scaled {s}"));
        }
    }
    Ok(())
}

fn criterion_8() -> Verdict {
    let grad = gradient_check();
    let adam = adam_trace();
    let jain = jain_invariance();
    let detail = format!(
        "gradient check on 20 points: {}; Adam 3-step trace: {}; Jain invariance on 10^3 vectors: {}",
        grad.as_ref().map_or_else(|e| e.clone(), |w| format!("worst rel err {w:.2e}")),
        adam.as_ref().map_or_else(|e| e.clone(), |_| "match to 1e-12".into()),
        jain.as_ref().map_or_else(|e| e.clone(), |_| "holds".into()),
    );
    verdict(grad.is_ok() && adam.is_ok() && jain.is_ok(), detail)
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    match sweep() {
        Ok(s) => {
            results.push((1, "latency rises with send rate", criterion_1(&s)));
            results.push((2, "throughput saturates at capacity", criterion_2(&s)));
            results.push((3, "buffer size effects", criterion_3(&s)));
            match Dataset::from_metrics(&s.rows, 1.0, Provenance::Simulator) {
                Ok(data) => {
                    let (v4, _) = criterion_4(&data);
                    results.push((4, "classifier accuracy", v4));
                    results.push((5, "regressor loss trace", criterion_5(&data)));
                }
                Err(e) => {
                    results.push((4, "classifier accuracy", verdict(false, e.to_string())));
                    results.push((5, "regressor loss trace", verdict(false, e.to_string())));
                }
            }
        }
        Err(e) => {
            for (id, name) in [
                (1, "latency rises with send rate"),
                (2, "throughput saturates at capacity"),
                (3, "buffer size effects"),
                (4, "classifier accuracy"),
                (5, "regressor loss trace"),
            ] {
                results.push((id, name, verdict(false, format!("sweep failed: {e}"))));
            }
        }
    }
    results.push((6, "coupled fairness", criterion_6()));
    results.push((7, "oracle equivalence", criterion_7()));
    results.push((8, "numerical checks", criterion_8()));

    let mut failed = 0;
    for (id, name, v) in &results {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id} ({name}): {}", v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
