//! The subcommands. Each returns the directory or text it produced so
//! that tests can drive them in-process.

use std::path::{Path, PathBuf};

use nanol::metrics::{aggregate_reports, metric_report, MetricReport, NavState};
use nanol::sim::{
    generate_ground_truth, log_init, run_monte_carlo, run_trial, synthesize_legged, synthesize_sensors,
    McConfig, SensorLog, SensorSetup, TrialOptions,
};

use crate::bundle::{read_json, write_json, Documents, Metrics, SummaryDoc, TimingDoc};
use crate::config::{load_config, Mode, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{
    interpolate_states, parse_sensor_log, read_states, write_sensor_log, write_states, Hardware, LOG_LEGS,
};
use crate::plot;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub filters: Option<Vec<String>>,
    pub max_iters: Option<usize>,
}

/// Loads `path` (or the defaults) and applies `ov`.
pub fn resolve_config(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig> {
    let (mut cfg, file) = match path {
        Some(p) => (load_config(p)?, p.display().to_string()),
        None => (RunConfig::default(), "<defaults>".to_string()),
    };
    if let Some(o) = &ov.out {
        cfg.out_dir = o.clone();
    }
    if let Some(n) = ov.trials {
        cfg.trials = n;
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(f) = &ov.filters {
        cfg.filters = f.clone();
    }
    if let Some(n) = ov.max_iters {
        cfg.nano.max_iters = n;
    }
    cfg.validate(&format!("{file} with command-line overrides"))?;
    Ok(cfg)
}

fn bundle_dir(cfg: &RunConfig, default_id: &str) -> Result<(PathBuf, String)> {
    let id = cfg.run_id.clone().unwrap_or_else(|| default_id.to_string());
    let dir = cfg.out_dir.join(&id);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok((dir, id))
}

fn hardware(cfg: &RunConfig) -> Hardware {
    Hardware {
        landmarks: cfg.landmark_points(),
        legs: cfg.leg_geometry(),
    }
}

fn clamp_window(window: f64, truth: &[NavState]) -> f64 {
    match (truth.first(), truth.last()) {
        (Some(a), Some(b)) if b.t > a.t => window.min(b.t - a.t),
        _ => window,
    }
}

/// Runs the configured filters over `log` from the truth at its first row
/// and writes estimates, documents, plots and the config into `dir`.
fn run_log(cfg: &RunConfig, log: &SensorLog, truth: &[NavState], dir: &Path, id: &str, command: &str) -> Result<Documents> {
    let init = log_init(&truth[0], log, cfg.init_rot_var, cfg.init_other_var)?;
    let runs = run_trial(
        log,
        &cfg.filter_specs(),
        &init,
        &cfg.filter_model(),
        TrialOptions {
            record_cost: cfg.record_cost,
        },
    )?;
    for run in &runs {
        write_states(&dir.join(format!("est_{}.csv", run.name)), &run.estimates)?;
    }
    let docs = Documents::from_runs(id, command, truth, &runs, clamp_window(cfg.re_window, truth))?;
    docs.write(dir)?;
    write_json(&dir.join("config.json"), cfg)?;
    plot::render(&docs.summary, &dir.join("plots"))?;
    Ok(docs)
}

/// One simulated run. Writes `sensors.csv` and `gt.csv` next to the usual
/// bundle files so the run can be replayed.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf> {
    let gt = generate_ground_truth(&cfg.profile())?;
    let (noise, cam) = cfg.sim_noise();
    let log = match cfg.mode {
        Mode::Landmark => synthesize_sensors(&gt, &cfg.landmark_points(), &noise, cam, cfg.seed)?,
        Mode::Legged => synthesize_legged(&gt, &cfg.leg_geometry(), cfg.gait_period, &noise, cfg.seed)?,
    };
    let (dir, id) = bundle_dir(cfg, "simulate")?;
    let writable = match &log.setup {
        SensorSetup::Legged(legs) => legs.len() == LOG_LEGS,
        SensorSetup::Landmarks(_) => true,
    };
    if writable {
        write_sensor_log(&dir.join("sensors.csv"), &log)?;
    }
    let truth = gt.nav_states();
    write_states(&dir.join("gt.csv"), &truth)?;
    run_log(cfg, &log, &truth, &dir, &id, "simulate")?;
    Ok(dir)
}

/// Runs the filters over a recorded sensor log against a ground-truth
/// trajectory, interpolated to the sensor times when the clocks differ.
pub fn cmd_replay(cfg: &RunConfig) -> Result<PathBuf> {
    let need = |p: &Option<PathBuf>, at: &str| {
        p.clone()
            .ok_or_else(|| CliError::config("<config>", at, "replay needs this path"))
    };
    let log_path = need(&cfg.sensor_log, "sensor_log")?;
    let gt_path = need(&cfg.ground_truth, "ground_truth")?;
    let log = parse_sensor_log(&log_path, &hardware(cfg))?;
    if log.is_empty() {
        return Err(CliError::Parse {
            file: log_path.display().to_string(),
            line: 1,
            column: String::new(),
            reason: "the log has no data rows".into(),
        });
    }
    let gt = read_states(&gt_path)?;
    let times: Vec<f64> = log.rows.iter().map(|r| r.t()).collect();
    let truth = if gt.len() == times.len() && gt.iter().zip(&times).all(|(s, t)| s.t == *t) {
        gt
    } else {
        interpolate_states(&gt, &times)?
    };
    let (dir, id) = bundle_dir(cfg, "replay")?;
    write_states(&dir.join("gt.csv"), &truth)?;
    run_log(cfg, &log, &truth, &dir, &id, "replay")?;
    Ok(dir)
}

pub fn campaign_config(cfg: &RunConfig) -> McConfig {
    let (sim_noise, sim_sigma_cam) = cfg.sim_noise();
    McConfig {
        trials: cfg.trials,
        profile: cfg.profile(),
        landmarks: cfg.landmark_points(),
        sim_noise,
        sim_sigma_cam,
        model: cfg.filter_model(),
        filters: cfg.filter_specs(),
        base_seed: cfg.seed,
        init_rot_var: cfg.init_rot_var,
        init_other_var: cfg.init_other_var,
        re_window: cfg.re_window,
        record_cost: cfg.record_cost,
    }
}

/// A landmark Monte-Carlo campaign on the current rayon pool. The estimate
/// CSVs hold the first completed trial.
pub fn cmd_montecarlo(cfg: &RunConfig) -> Result<PathBuf> {
    if cfg.mode != Mode::Landmark {
        return Err(CliError::config("<config>", "mode", "montecarlo runs the landmark scenario"));
    }
    let summary = run_monte_carlo(&campaign_config(cfg))?;
    let (dir, id) = bundle_dir(cfg, "montecarlo")?;
    let docs = Documents::from_campaign(&id, &summary);
    docs.write(&dir)?;
    write_json(&dir.join("config.json"), cfg)?;
    if summary.trials.is_empty() {
        let first = summary.failures.first().map(|f| f.message.clone()).unwrap_or_default();
        return Err(CliError::TrialsFailed {
            count: summary.failures.len(),
            first,
        });
    }
    let gt = generate_ground_truth(&cfg.profile())?;
    write_states(&dir.join("gt.csv"), &gt.nav_states())?;
    for f in &summary.filters {
        write_states(&dir.join(format!("est_{}.csv", f.name)), &f.first_trial)?;
    }
    plot::render(&docs.summary, &dir.join("plots"))?;
    for f in &summary.failures {
        eprintln!("warning: {}", f.message);
    }
    Ok(dir)
}

/// Re-renders `plots/` of a bundle from its `summary.json`.
pub fn cmd_plot(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let summary: SummaryDoc = read_json(&run_dir.join("summary.json"))?;
    plot::render(&summary, &run_dir.join("plots"))
}

/// Metrics of every filter over a set of datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub datasets: Vec<String>,
    pub filters: Vec<CompareRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub name: String,
    /// One report per dataset.
    pub reports: Vec<Metrics>,
    pub mean: Metrics,
    pub std: Metrics,
    /// Mean seconds per measurement update, when the datasets carry timing.
    pub mean_update: Option<f64>,
}

fn filter_names(dir: &Path) -> Result<Vec<String>> {
    let summary = dir.join("summary.json");
    if summary.is_file() {
        let s: SummaryDoc = read_json(&summary)?;
        return Ok(s.filters.into_iter().map(|f| f.name).collect());
    }
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let name = entry.map_err(|e| CliError::io(dir, e))?.file_name().to_string_lossy().into_owned();
        if let Some(f) = name.strip_prefix("est_").and_then(|n| n.strip_suffix(".csv")) {
            names.push(f.to_string());
        }
    }
    names.sort();
    Ok(names)
}

fn to_report(m: &Metrics) -> MetricReport {
    let c = |c: &crate::bundle::Channels| nanol::metrics::ChannelErrors {
        pos: c.pos,
        vel: c.vel,
        ori: c.ori,
    };
    MetricReport {
        ate: c(&m.ate),
        re: c(&m.re),
    }
}

/// Computes ATE and RE of each `est_<filter>.csv` against `gt.csv` in each
/// dataset directory. Filters are ordered as in the first dataset.
pub fn compare_datasets(dirs: &[PathBuf], re_window: f64) -> Result<CompareTable> {
    let Some(first) = dirs.first() else {
        return Err(CliError::Other("compare needs at least one dataset directory".into()));
    };
    let names = filter_names(first)?;
    if names.is_empty() {
        return Err(CliError::Other(format!("{}: no est_<filter>.csv files", first.display())));
    }
    let mut rows: Vec<CompareRow> = names
        .iter()
        .map(|n| CompareRow {
            name: n.clone(),
            reports: Vec::new(),
            mean: Metrics::default(),
            std: Metrics::default(),
            mean_update: None,
        })
        .collect();
    let mut timing_sums = vec![(0.0, 0usize); names.len()];
    for dir in dirs {
        let gt = read_states(&dir.join("gt.csv"))?;
        let timing: Option<TimingDoc> = {
            let p = dir.join("timing.json");
            if p.is_file() {
                Some(read_json(&p)?)
            } else {
                None
            }
        };
        for (row, sums) in rows.iter_mut().zip(timing_sums.iter_mut()) {
            let est = read_states(&dir.join(format!("est_{}.csv", row.name)))?;
            let same_clock = est.len() == gt.len() && est.iter().zip(&gt).all(|(a, b)| a.t == b.t);
            let times: Vec<f64> = est.iter().map(|s| s.t).collect();
            let truth = if same_clock { gt.clone() } else { interpolate_states(&gt, &times)? };
            let report = metric_report(&est, &truth, clamp_window(re_window, &truth))?;
            row.reports.push(report.into());
            if let Some(f) = timing.as_ref().and_then(|t| t.filters.iter().find(|f| f.name == row.name)) {
                sums.0 += f.update_seconds.mean * f.update_seconds.count as f64;
                sums.1 += f.update_seconds.count;
            }
        }
    }
    for (row, (sum, count)) in rows.iter_mut().zip(timing_sums) {
        let reps: Vec<MetricReport> = row.reports.iter().map(to_report).collect();
        let (mean, std) = aggregate_reports(&reps);
        row.mean = mean.into();
        row.std = std.into();
        row.mean_update = (count > 0).then(|| sum / count as f64);
    }
    Ok(CompareTable {
        datasets: dirs.iter().map(|d| d.display().to_string()).collect(),
        filters: rows,
    })
}

fn fields(m: &Metrics) -> [f64; 6] {
    [m.ate.pos, m.ate.vel, m.ate.ori, m.re.pos, m.re.vel, m.re.ori]
}

const HEADERS: [&str; 6] = [
    "ATE pos [m]",
    "ATE vel [m/s]",
    "ATE ori [rad]",
    "RE pos [m]",
    "RE vel [m/s]",
    "RE ori [rad]",
];

/// Percent difference of `x` relative to `reference`.
pub fn percent_difference(x: f64, reference: f64) -> Option<f64> {
    if x == reference {
        Some(0.0)
    } else if reference == 0.0 {
        None
    } else {
        Some(100.0 * (x - reference) / reference)
    }
}

impl CompareTable {
    /// Percent differences of each filter's mean metrics against the first
    /// filter, in [`HEADERS`] order.
    pub fn relative(&self) -> Vec<(String, [Option<f64>; 6])> {
        let Some(reference) = self.filters.first() else {
            return Vec::new();
        };
        let r = fields(&reference.mean);
        self.filters
            .iter()
            .skip(1)
            .map(|row| {
                let v = fields(&row.mean);
                (row.name.clone(), std::array::from_fn(|i| percent_difference(v[i], r[i])))
            })
            .collect()
    }

    pub fn render(&self, re_window: f64) -> String {
        let mut out = String::new();
        let name_w = self.filters.iter().map(|f| f.name.len()).max().unwrap_or(6).max(6);
        out.push_str(&format!(
            "{} dataset(s), mean (std) across datasets, RE window {re_window} s\n\n",
            self.datasets.len()
        ));
        out.push_str(&format!("{:name_w$}", "filter"));
        for h in HEADERS {
            out.push_str(&format!("  {h:>21}"));
        }
        out.push_str(&format!("  {:>12}\n", "update [ms]"));
        for row in &self.filters {
            out.push_str(&format!("{:name_w$}", row.name));
            for (m, s) in fields(&row.mean).iter().zip(fields(&row.std)) {
                out.push_str(&format!("  {:>21}", format!("{m:.4e} ({s:.1e})")));
            }
            match row.mean_update {
                Some(t) => out.push_str(&format!("  {:>12.4}\n", t * 1e3)),
                None => out.push_str(&format!("  {:>12}\n", "n/a")),
            }
        }
        let rel = self.relative();
        if !rel.is_empty() {
            out.push_str(&format!("\ndifference vs {} [%]\n", self.filters[0].name));
            for (name, vals) in rel {
                out.push_str(&format!("{name:name_w$}"));
                for v in vals {
                    match v {
                        Some(p) => out.push_str(&format!("  {:>21}", format!("{p:+.2}"))),
                        None => out.push_str(&format!("  {:>21}", "n/a")),
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

pub fn cmd_compare(dirs: &[PathBuf], re_window: f64) -> Result<String> {
    let table = compare_datasets(dirs, re_window)?;
    Ok(table.render(re_window))
}
