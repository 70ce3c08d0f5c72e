//! Send-rate by buffer-size sweeps over a base scenario.

use std::fs;
use std::path::Path;

use fairbbr_core::experiment::run_scenario;
use fairbbr_core::measurement::{write_csv, MetricsRow};
use fairbbr_core::scenario::ScenarioConfig;
use fairbbr_core::simcore::RunStats;
use rayon::prelude::*;

use crate::error::CliError;
use crate::plot::{self, PlotData, PlotPoint};

/// Windows before this time are excluded from cell summaries so the
/// startup transient does not dominate short runs.
pub const WARMUP_S: f64 = 5.0;

pub const DEFAULT_RATES: [f64; 10] = [20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 160.0, 180.0, 200.0];
pub const DEFAULT_BUFFERS: [i64; 3] = [10, 50, 100];

/// Plot-data file names, in figure order.
pub const LATENCY_VS_RATE: &str = "latency_vs_send_rate.csv";
pub const THROUGHPUT_VS_RATE: &str = "throughput_vs_send_rate.csv";
pub const LATENCY_BY_BUFFER: &str = "latency_by_buffer.csv";
pub const THROUGHPUT_BY_BUFFER: &str = "throughput_by_buffer.csv";

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub send_rates: Vec<f64>,
    pub buffers: Vec<i64>,
}

impl SweepSpec {
    pub fn new(base: ScenarioConfig, send_rates: Vec<f64>, buffers: Vec<i64>) -> Result<Self, CliError> {
        if send_rates.is_empty() || buffers.is_empty() {
            return Err(CliError::Invalid("sweep needs at least one send rate and one buffer size".into()));
        }
        if base.flows.is_empty() {
            return Err(CliError::Invalid("sweep base config has no flows".into()));
        }
        base.validate()?;
        Ok(Self {
            base,
            send_rates,
            buffers,
        })
    }

    pub fn default_grid() -> Self {
        Self {
            base: ScenarioConfig::default_sweep(),
            send_rates: DEFAULT_RATES.to_vec(),
            buffers: DEFAULT_BUFFERS.to_vec(),
        }
    }

    /// Cells in buffer-major order.
    pub fn cells(&self) -> Vec<Cell> {
        self.buffers
            .iter()
            .flat_map(|&buffer| self.send_rates.iter().map(move |&send_rate| Cell { send_rate, buffer }))
            .collect()
    }

    /// The base scenario with every flow offering `send_rate` and every
    /// flow's bottleneck holding `buffer` packets.
    pub fn cell_config(&self, cell: Cell) -> Result<ScenarioConfig, CliError> {
        let mut cfg = self.base.clone();
        let links = cfg.build_links();
        let flows = cfg.build_flows()?;
        for flow in &flows {
            if let Some(l) = flow.bottleneck(&links) {
                cfg.links[l].buffer_pkts = cell.buffer;
            }
        }
        for flow in &mut cfg.flows {
            flow.send_rate_msgs = Some(cell.send_rate);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Buffer size plotted in the single-buffer figures: the base
    /// scenario's own bottleneck buffer when it is on the grid.
    pub fn primary_buffer(&self) -> i64 {
        let links = self.base.build_links();
        let own = self
            .base
            .build_flows()
            .ok()
            .and_then(|f| f.first().and_then(|f| f.bottleneck(&links)))
            .map(|l| self.base.links[l].buffer_pkts);
        match own {
            Some(b) if self.buffers.contains(&b) => b,
            _ => self.buffers[0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub send_rate: f64,
    pub buffer: i64,
}

impl Cell {
    pub fn file_name(&self) -> String {
        format!("rate_{}_buffer_{}.csv", self.send_rate, self.buffer)
    }
}

/// Steady-state averages of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    /// Mean delivered messages/s per flow over post-warmup windows.
    pub throughput: f64,
    /// Mean of post-warmup window latencies, absent if nothing arrived.
    pub avg_latency: Option<f64>,
    pub stats: RunStats,
}

#[derive(Clone, Debug)]
pub struct CellRun {
    pub rows: Vec<MetricsRow>,
    pub summary: CellSummary,
}

/// A cell and what running it produced.
pub type CellOutcome = (Cell, Result<CellRun, CliError>);

pub fn summarize(cell: Cell, rows: &[MetricsRow], stats: RunStats) -> CellSummary {
    let steady: Vec<&MetricsRow> = rows.iter().filter(|r| r.window_start >= WARMUP_S).collect();
    let throughput = if steady.is_empty() {
        0.0
    } else {
        steady.iter().map(|r| r.throughput).sum::<f64>() / steady.len() as f64
    };
    let latencies: Vec<f64> = steady.iter().filter_map(|r| r.avg_latency).collect();
    let avg_latency = (!latencies.is_empty()).then(|| latencies.iter().sum::<f64>() / latencies.len() as f64);
    CellSummary {
        cell,
        throughput,
        avg_latency,
        stats,
    }
}

pub fn run_cell(spec: &SweepSpec, cell: Cell) -> Result<CellRun, CliError> {
    let cfg = spec.cell_config(cell)?;
    let out = run_scenario(&cfg, None)?;
    let summary = summarize(cell, &out.rows, out.stats);
    Ok(CellRun {
        rows: out.rows,
        summary,
    })
}

/// Runs every cell on up to `jobs` threads. Results come back in cell
/// order whatever the schedule.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<CellOutcome>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    let cells = spec.cells();
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| {
                log::info!("cell rate {} buffer {}", cell.send_rate, cell.buffer);
                (cell, run_cell(spec, cell))
            })
            .collect()
    }))
}

/// The four figure data sets built from cell summaries.
pub fn plot_data(spec: &SweepSpec, summaries: &[CellSummary]) -> Vec<(&'static str, PlotData)> {
    let primary = spec.primary_buffer();
    let series = |s: &CellSummary| format!("buffer_{}", s.cell.buffer);
    let build = |title: &str, y_label: &str, only_primary: bool, value: &dyn Fn(&CellSummary) -> Option<f64>| {
        let points = summaries
            .iter()
            .filter(|s| !only_primary || s.cell.buffer == primary)
            .filter_map(|s| {
                value(s).map(|v| PlotPoint {
                    send_rate: s.cell.send_rate,
                    series: series(s),
                    value: v,
                })
            })
            .collect();
        PlotData {
            title: title.to_string(),
            y_label: y_label.to_string(),
            points,
        }
    };
    vec![
        (LATENCY_VS_RATE, build("Latency vs send rate", "avg latency (s)", true, &|s| s.avg_latency)),
        (THROUGHPUT_VS_RATE, build("Throughput vs send rate", "throughput (msg/s)", true, &|s| Some(s.throughput))),
        (LATENCY_BY_BUFFER, build("Latency by buffer size", "avg latency (s)", false, &|s| s.avg_latency)),
        (THROUGHPUT_BY_BUFFER, build("Throughput by buffer size", "throughput (msg/s)", false, &|s| Some(s.throughput))),
    ]
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn cells_csv(summaries: &[CellSummary]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record([
        "send_rate",
        "block_size",
        "throughput",
        "avg_latency",
        "sent",
        "delivered",
        "dropped",
        "retransmitted",
    ])
    .map_err(io)?;
    for s in summaries {
        w.write_record([
            s.cell.send_rate.to_string(),
            s.cell.buffer.to_string(),
            s.throughput.to_string(),
            s.avg_latency.map(|v| v.to_string()).unwrap_or_default(),
            s.stats.sent.to_string(),
            s.stats.delivered.to_string(),
            s.stats.dropped.to_string(),
            s.stats.retransmitted.to_string(),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

/// Writes per-cell metrics under `cells/`, then, once every cell is in,
/// the cell summary table and the four plot-data files. Failed cells are
/// listed in `failures.txt`; the first failure is returned after all
/// successful output has been written.
pub fn write_sweep(
    spec: &SweepSpec,
    results: Vec<CellOutcome>,
    out_dir: &Path,
    svg: bool,
) -> Result<Vec<CellSummary>, CliError> {
    let cell_dir = out_dir.join("cells");
    fs::create_dir_all(&cell_dir).map_err(|e| CliError::io(&cell_dir, e))?;
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (cell, result) in results {
        match result {
            Ok(run) => {
                let mut buf = Vec::new();
                write_csv(&run.rows, &mut buf).map_err(|e| CliError::Internal(e.to_string()))?;
                write_file(&cell_dir.join(cell.file_name()), &buf)?;
                summaries.push(run.summary);
            }
            Err(e) => failures.push((cell, e)),
        }
    }
    write_file(&out_dir.join("cells.csv"), &cells_csv(&summaries)?)?;
    for (name, data) in plot_data(spec, &summaries) {
        let path = out_dir.join(name);
        write_file(&path, &plot::to_csv(&data)?)?;
        if svg {
            write_file(&path.with_extension("svg"), plot::render_svg(&data).as_bytes())?;
        }
    }
    let failure_path = out_dir.join("failures.txt");
    if failures.is_empty() {
        if failure_path.exists() {
            fs::remove_file(&failure_path).map_err(|e| CliError::io(&failure_path, e))?;
        }
        return Ok(summaries);
    }
    let listing: String = failures
        .iter()
        .map(|(c, e)| format!("rate {} buffer {}: {e}\n", c.send_rate, c.buffer))
        .collect();
    write_file(&failure_path, listing.as_bytes())?;
    Err(failures.into_iter().next().map(|(_, e)| e).expect("non-empty"))
}
