//! One function per subcommand. Each returns a [`Report`]; writing it out is
//! the caller's job.

use serde_json::{json, Value};

use rddce::channel::{quantize_profile, ProfileName, TapProfile};
use rddce::estimators::{Method, Metric};
use rddce::sim::{
    run_monte_carlo, scatter_experiment, sweep, MonteCarloSummary, ScatterStage, SimConfig, SimError, SweepCell,
    SweepGrid,
};

use crate::output::{float, json_float, json_floats, Report};
use crate::CliError;

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Config(m) => CliError::Config(m),
        aborted @ SimError::Aborted { .. } => CliError::Runtime(aborted.to_string()),
    }
}

fn summary_json(s: &MonteCarloSummary) -> Value {
    json!({
        "mean_acc": json_float(s.mean_acc),
        "std_acc": json_float(s.std_acc),
        "samples_ok": s.samples_ok,
        "samples_aborted": s.samples_aborted,
        "abort_reasons": s.abort_reasons,
        "dropped_groups": s.dropped_groups,
        "episode_mean_acc": json_floats(&s.episode_mean_acc),
        "per_frame_acc": json_floats(&s.per_frame_acc),
        "per_frame_channel_mse": json_floats(&s.per_frame_channel_mse),
    })
}

/// Per-frame accuracy and channel MSE, averaged over samples, for each
/// method. Methods default to the configured one.
pub fn cmd_run(cfg: &SimConfig, methods: &[Method]) -> Result<Report, CliError> {
    let methods = if methods.is_empty() { vec![cfg.method] } else { methods.to_vec() };
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &method in &methods {
        let c = SimConfig { method, ..cfg.clone() };
        let s = run_monte_carlo(&c).map_err(sim_error)?;
        for (frame, (acc, mse)) in s.per_frame_acc.iter().zip(&s.per_frame_channel_mse).enumerate() {
            rows.push(vec![method.to_string(), frame.to_string(), float(*acc), float(*mse)]);
        }
        let mut entry = summary_json(&s);
        entry["method"] = json!(method.as_str());
        results.push(entry);
    }
    Ok(Report {
        columns: vec!["method", "frame", "acc", "channel_mse"],
        rows,
        json: Value::Array(results),
        failed_cells: 0,
    })
}

/// Axes left empty fall back to the configured value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridArgs {
    pub snr_db: Vec<f64>,
    pub lambda: Vec<f64>,
    pub methods: Vec<Method>,
    pub channels: Vec<ProfileName>,
}

impl GridArgs {
    fn resolve(&self, cfg: &SimConfig) -> SweepGrid {
        fn or<T: Clone>(v: &[T], d: T) -> Vec<T> {
            if v.is_empty() {
                vec![d]
            } else {
                v.to_vec()
            }
        }
        SweepGrid {
            snr_db: or(&self.snr_db, cfg.snr_db),
            lambda: or(&self.lambda, cfg.lambda),
            methods: or(&self.methods, cfg.method),
            channels: or(&self.channels, cfg.channel),
        }
    }
}

/// Rejects grid values that make an invalid configuration before anything
/// runs.
fn validate_grid(grid: &SweepGrid, base: &SimConfig) -> Result<(), CliError> {
    for &channel in &grid.channels {
        for &lambda in &grid.lambda {
            for &snr_db in &grid.snr_db {
                SimConfig {
                    channel,
                    lambda,
                    snr_db,
                    ..base.clone()
                }
                .validate()
                .map_err(sim_error)?;
            }
        }
    }
    Ok(())
}

const CELL_COLUMNS: [&str; 6] = ["mean_acc", "std_acc", "samples_ok", "samples_aborted", "dropped_groups", "error"];

fn cell_fields(cell: &SweepCell) -> Vec<String> {
    match &cell.outcome {
        Ok(s) => vec![
            float(s.mean_acc),
            float(s.std_acc),
            s.samples_ok.to_string(),
            s.samples_aborted.to_string(),
            s.dropped_groups.to_string(),
            String::new(),
        ],
        Err(e) => vec![String::new(), String::new(), String::new(), String::new(), String::new(), e.clone()],
    }
}

fn cell_json(cell: &SweepCell) -> Value {
    let mut v = match &cell.outcome {
        Ok(s) => summary_json(s),
        Err(e) => json!({ "error": e }),
    };
    v["channel"] = json!(cell.channel.to_string());
    v["method"] = json!(cell.method.as_str());
    v["lambda"] = json_float(cell.lambda);
    v["snr_db"] = json_float(cell.snr_db);
    v
}

/// Aggregate accuracy for every cell of channel x method x lambda x SNR.
pub fn cmd_sweep(cfg: &SimConfig, args: &GridArgs) -> Result<Report, CliError> {
    let grid = args.resolve(cfg);
    validate_grid(&grid, cfg)?;
    let cells = sweep(&grid, cfg).map_err(sim_error)?;
    let mut columns = vec!["channel", "method", "lambda", "snr_db"];
    columns.extend(CELL_COLUMNS);
    let rows = cells
        .iter()
        .map(|c| {
            let mut row = vec![c.channel.to_string(), c.method.to_string(), float(c.lambda), float(c.snr_db)];
            row.extend(cell_fields(c));
            row
        })
        .collect();
    Ok(Report {
        columns,
        rows,
        json: Value::Array(cells.iter().map(cell_json).collect()),
        failed_cells: cells.iter().filter(|c| c.outcome.is_err()).count(),
    })
}

pub const DEFAULT_METRIC_SNRS: [f64; 11] = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0];

/// RDDCE accuracy against SNR under each selection metric.
pub fn cmd_compare_metrics(cfg: &SimConfig, snr_db: &[f64]) -> Result<Report, CliError> {
    let snrs = if snr_db.is_empty() { DEFAULT_METRIC_SNRS.to_vec() } else { snr_db.to_vec() };
    let mut columns = vec!["metric", "snr_db"];
    columns.extend(CELL_COLUMNS);
    let (mut rows, mut results, mut failed) = (Vec::new(), Vec::new(), 0);
    for metric in [Metric::M, Metric::Alpha] {
        let mut base = SimConfig {
            method: Method::Rddce,
            ..cfg.clone()
        };
        base.rddce.metric = metric;
        let grid = SweepGrid {
            snr_db: snrs.clone(),
            lambda: vec![cfg.lambda],
            methods: vec![Method::Rddce],
            channels: vec![cfg.channel],
        };
        validate_grid(&grid, &base)?;
        for cell in sweep(&grid, &base).map_err(sim_error)? {
            let mut row = vec![metric.to_string(), float(cell.snr_db)];
            row.extend(cell_fields(&cell));
            rows.push(row);
            failed += usize::from(cell.outcome.is_err());
            let mut v = cell_json(&cell);
            v["metric"] = json!(metric.to_string());
            results.push(v);
        }
    }
    Ok(Report {
        columns,
        rows,
        json: Value::Array(results),
        failed_cells: failed,
    })
}

pub const DEFAULT_SCATTER_SNRS: [f64; 2] = [20.0, 10.0];

/// Group markers before and after noise compensation on one frozen
/// channel. The noiseless level is always included first.
pub fn cmd_scatter(cfg: &SimConfig, snr_db: &[f64], groups: usize) -> Result<Report, CliError> {
    let mut levels = vec![f64::INFINITY];
    let listed = if snr_db.is_empty() { &DEFAULT_SCATTER_SNRS[..] } else { snr_db };
    levels.extend(listed.iter().copied().filter(|s| *s != f64::INFINITY));
    let report = scatter_experiment(cfg, &levels, groups).map_err(sim_error)?;
    let stage = |s: ScatterStage| match s {
        ScatterStage::Raw => "raw",
        ScatterStage::Denoised => "denoised",
    };
    let mut rows = vec![vec![
        String::new(),
        String::new(),
        "actual".to_string(),
        float(report.actual_marker.re),
        float(report.actual_marker.im),
        float(0.0),
    ]];
    rows.extend(report.points.iter().map(|p| {
        vec![
            float(p.snr_db),
            p.group_id.to_string(),
            stage(p.stage).to_string(),
            float(p.marker.re),
            float(p.marker.im),
            float(p.distance),
        ]
    }));
    let points: Vec<Value> = report
        .points
        .iter()
        .map(|p| {
            json!({
                "snr_db": json_float(p.snr_db),
                "group_id": p.group_id,
                "stage": stage(p.stage),
                "marker_re": json_float(p.marker.re),
                "marker_im": json_float(p.marker.im),
                "distance": json_float(p.distance),
            })
        })
        .collect();
    Ok(Report {
        columns: vec!["snr_db", "group_id", "stage", "marker_re", "marker_im", "distance"],
        rows,
        json: json!({
            "actual": { "marker_re": json_float(report.actual_marker.re), "marker_im": json_float(report.actual_marker.im) },
            "points": points,
        }),
        failed_cells: 0,
    })
}

/// Built-in power-delay profiles (plus the configured custom one) and their
/// placement on the sample grid.
pub fn cmd_profiles(cfg: &SimConfig) -> Result<Report, CliError> {
    let mut profiles = vec![
        TapProfile::eva(cfg.sample_period_ns),
        TapProfile::etu(cfg.sample_period_ns),
    ];
    if cfg.channel == ProfileName::Custom {
        profiles.push(cfg.profile().map_err(sim_error)?);
    }
    let (mut rows, mut results) = (Vec::new(), Vec::new());
    for p in &profiles {
        let q = quantize_profile(p, cfg.rddce.n_taps).map_err(|e| CliError::Config(e.to_string()))?;
        for (path, ((delay, power), &tap)) in p.delays_ns.iter().zip(&p.powers_db).zip(&q.path_indices).enumerate() {
            rows.push(vec![
                p.name.to_string(),
                path.to_string(),
                float(*delay),
                float(*power),
                tap.to_string(),
                float(q.variances[tap]),
            ]);
        }
        results.push(json!({
            "channel": p.name.to_string(),
            "delays_ns": json_floats(&p.delays_ns),
            "powers_db": json_floats(&p.powers_db),
            "tap_indices": q.path_indices,
            "tap_variances": json_floats(&q.variances),
        }));
    }
    Ok(Report {
        columns: vec!["channel", "path", "delay_ns", "power_db", "tap_index", "tap_variance"],
        rows,
        json: Value::Array(results),
        failed_cells: 0,
    })
}
