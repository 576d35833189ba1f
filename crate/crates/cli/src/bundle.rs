//! Result bundles: the JSON documents written next to the estimate CSVs.
//!
//! `summary.json` and `metrics.json` are pure functions of the
//! configuration. Wall-clock measurements go to `timing.json` so that the
//! other two stay byte-identical across runs and thread counts.

use std::io::Write;
use std::path::Path;

use nanol::metrics::{aggregate_reports, metric_report, rms, ChannelErrors, MetricReport, NavState};
use nanol::sim::{FilterRun, McSummary, TimingStats};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Other(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let column = e.path().to_string();
        let inner = e.into_inner();
        CliError::Parse {
            file: path.display().to_string(),
            line: inner.line() as u64,
            column,
            reason: inner.to_string(),
        }
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Channels {
    pub pos: f64,
    pub vel: f64,
    pub ori: f64,
}

impl From<ChannelErrors> for Channels {
    fn from(c: ChannelErrors) -> Self {
        Channels {
            pos: c.pos,
            vel: c.vel,
            ori: c.ori,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ate: Channels,
    pub re: Channels,
}

impl From<MetricReport> for Metrics {
    fn from(r: MetricReport) -> Self {
        Metrics {
            ate: r.ate.into(),
            re: r.re.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureDoc {
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummaryDoc {
    pub name: String,
    /// Mean over trials of each trial's RMS error.
    pub mean_rmse: Channels,
    pub mean_cost: Option<f64>,
    /// Per-step RMSE across trials, aligned with `t`.
    pub rmse_pos: Vec<f64>,
    pub rmse_vel: Vec<f64>,
    pub rmse_ori: Vec<f64>,
    /// RMS error of each completed trial, aligned with `trials`.
    pub trial_rmse: Vec<Channels>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub schema_version: u32,
    pub run_id: String,
    pub command: String,
    pub t: Vec<f64>,
    pub trials: Vec<usize>,
    pub failures: Vec<FailureDoc>,
    pub filters: Vec<FilterSummaryDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub id: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterMetricsDoc {
    pub name: String,
    pub datasets: Vec<DatasetMetrics>,
    pub mean: Metrics,
    pub std: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub schema_version: u32,
    pub run_id: String,
    pub re_window: f64,
    pub filters: Vec<FilterMetricsDoc>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingDocStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl From<TimingStats> for TimingDocStats {
    fn from(s: TimingStats) -> Self {
        TimingDocStats {
            count: s.count,
            mean: s.mean,
            median: s.median,
            p95: s.p95,
            max: s.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterTimingDoc {
    pub name: String,
    /// Seconds per measurement update.
    pub update_seconds: TimingDocStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingDoc {
    pub schema_version: u32,
    pub run_id: String,
    pub filters: Vec<FilterTimingDoc>,
}

/// The three documents of a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Documents {
    pub summary: SummaryDoc,
    pub metrics: MetricsDoc,
    pub timing: TimingDoc,
}

fn metrics_doc(run_id: &str, re_window: f64, names: &[String], ids: &[String], reports: &[Vec<MetricReport>]) -> MetricsDoc {
    let filters = names
        .iter()
        .zip(reports)
        .map(|(name, reps)| {
            let (mean, std) = aggregate_reports(reps);
            FilterMetricsDoc {
                name: name.clone(),
                datasets: ids
                    .iter()
                    .zip(reps)
                    .map(|(id, r)| DatasetMetrics {
                        id: id.clone(),
                        metrics: (*r).into(),
                    })
                    .collect(),
                mean: mean.into(),
                std: std.into(),
            }
        })
        .collect();
    MetricsDoc {
        schema_version: SCHEMA_VERSION,
        run_id: run_id.into(),
        re_window,
        filters,
    }
}

impl Documents {
    pub fn from_campaign(run_id: &str, s: &McSummary) -> Self {
        let names: Vec<String> = s.filters.iter().map(|f| f.name.clone()).collect();
        let ids: Vec<String> = s.trials.iter().map(|i| format!("trial-{i}")).collect();
        let reports: Vec<Vec<MetricReport>> = s.filters.iter().map(|f| f.reports.clone()).collect();
        let summary = SummaryDoc {
            schema_version: SCHEMA_VERSION,
            run_id: run_id.into(),
            command: "montecarlo".into(),
            t: s.t.clone(),
            trials: s.trials.clone(),
            failures: s
                .failures
                .iter()
                .map(|f| FailureDoc {
                    trial: f.trial,
                    message: f.message.clone(),
                })
                .collect(),
            filters: s
                .filters
                .iter()
                .map(|f| FilterSummaryDoc {
                    name: f.name.clone(),
                    mean_rmse: f.mean_rmse.into(),
                    mean_cost: f.mean_cost,
                    rmse_pos: f.rmse_pos.clone(),
                    rmse_vel: f.rmse_vel.clone(),
                    rmse_ori: f.rmse_ori.clone(),
                    trial_rmse: (0..f.pos_err.len())
                        .map(|i| Channels {
                            pos: rms(&f.pos_err[i]),
                            vel: rms(&f.vel_err[i]),
                            ori: rms(&f.ori_err[i]),
                        })
                        .collect(),
                })
                .collect(),
        };
        let timing = TimingDoc {
            schema_version: SCHEMA_VERSION,
            run_id: run_id.into(),
            filters: s
                .filters
                .iter()
                .map(|f| FilterTimingDoc {
                    name: f.name.clone(),
                    update_seconds: f.timing.into(),
                })
                .collect(),
        };
        Documents {
            summary,
            metrics: metrics_doc(run_id, s.re_window, &names, &ids, &reports),
            timing,
        }
    }

    /// Documents for a single run of several filters over one log, treated
    /// as a campaign of one trial.
    pub fn from_runs(run_id: &str, command: &str, truth: &[NavState], runs: &[FilterRun], re_window: f64) -> Result<Self> {
        let names: Vec<String> = runs.iter().map(|r| r.name.clone()).collect();
        let mut reports = Vec::new();
        let mut filters = Vec::new();
        for run in runs {
            let e = nanol::metrics::error_series(&run.estimates, truth)?;
            let costs = &run.costs;
            let rmse = ChannelErrors {
                pos: rms(&e.pos),
                vel: rms(&e.vel),
                ori: rms(&e.ori),
            };
            reports.push(vec![metric_report(&run.estimates, truth, re_window)?]);
            filters.push(FilterSummaryDoc {
                name: run.name.clone(),
                mean_rmse: rmse.into(),
                mean_cost: (!costs.is_empty()).then(|| costs.iter().sum::<f64>() / costs.len() as f64),
                rmse_pos: e.pos,
                rmse_vel: e.vel,
                rmse_ori: e.ori,
                trial_rmse: vec![rmse.into()],
            });
        }
        let summary = SummaryDoc {
            schema_version: SCHEMA_VERSION,
            run_id: run_id.into(),
            command: command.into(),
            t: truth.iter().map(|s| s.t).collect(),
            trials: vec![0],
            failures: Vec::new(),
            filters,
        };
        let timing = TimingDoc {
            schema_version: SCHEMA_VERSION,
            run_id: run_id.into(),
            filters: runs
                .iter()
                .map(|r| FilterTimingDoc {
                    name: r.name.clone(),
                    update_seconds: TimingStats::from_samples(&r.update_times).into(),
                })
                .collect(),
        };
        Ok(Documents {
            summary,
            metrics: metrics_doc(run_id, re_window, &names, &[command.to_string()], &reports),
            timing,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("summary.json"), &self.summary)?;
        write_json(&dir.join("metrics.json"), &self.metrics)?;
        write_json(&dir.join("timing.json"), &self.timing)
    }
}
