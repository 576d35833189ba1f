//! Runs filters over sensor logs and aggregates Monte-Carlo campaigns.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;
use std::time::Instant;

use rayon::prelude::*;

use super::sensors::{default_landmarks, synthesize_sensors, SensorLog, SensorSetup, DEFAULT_SIGMA_CAM};
use super::trajectory::{generate_ground_truth, GroundTruth, TrajectoryProfile};
use crate::error::{Error, Result};
use crate::filter::{
    cost_j, inekf_update, nano_update_detailed, predict, reset_contact, FilterState, NanoConfig,
};
use crate::lie::Vec3;
use crate::metrics::{
    ate, error_series, relative_error, rms, rmse_over_trials, ChannelErrors, MetricReport, NavState,
    DEFAULT_RE_WINDOW,
};
use crate::models::{
    assemble_process_noise, fk_jacobian, forward_kinematics, make_landmark_measurement,
    make_leg_measurement, InvariantMeasurement, NoiseConfig, StateLayout,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Nano(NanoConfig),
    InEkf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub name: String,
    pub kind: FilterKind,
}

impl FilterSpec {
    pub fn nano(cfg: NanoConfig) -> Self {
        FilterSpec {
            name: "nano".into(),
            kind: FilterKind::Nano(cfg),
        }
    }

    pub fn inekf() -> Self {
        FilterSpec {
            name: "inekf".into(),
            kind: FilterKind::InEkf,
        }
    }
}

/// Noise levels the filters assume, which may differ from the simulated
/// ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterModel {
    pub noise: NoiseConfig,
    pub sigma_cam: f64,
}

impl Default for FilterModel {
    fn default() -> Self {
        FilterModel {
            noise: NoiseConfig::default(),
            sigma_cam: DEFAULT_SIGMA_CAM,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialOptions {
    /// Evaluate the variational cost after every NANO-L update.
    pub record_cost: bool,
}

/// Output of one filter over one log.
#[derive(Debug, Clone)]
pub struct FilterRun {
    pub name: String,
    /// One estimate per log row.
    pub estimates: Vec<NavState>,
    /// Wall-clock seconds of every measurement update call.
    pub update_times: Vec<f64>,
    /// Variational cost after each update, when requested.
    pub costs: Vec<f64>,
    /// Hash of every input value the filter consumed.
    pub input_digest: u64,
}

/// Layout matching a log's sensor setup.
pub fn layout_for(log: &SensorLog) -> StateLayout {
    match &log.setup {
        SensorSetup::Landmarks(_) => StateLayout::inertial(),
        SensorSetup::Legged(legs) => StateLayout::legged(legs.len()),
    }
}

/// Truth-initialized filter state from the first row of `gt`. Contact
/// points of a legged layout are taken from `contacts`.
pub fn truth_init(
    gt: &GroundTruth,
    layout: &StateLayout,
    contacts: &[Vec3],
    rot_var: f64,
    other_var: f64,
) -> Result<FilterState> {
    let x = &gt.states[0];
    let mean = layout.compose_state(
        *x.rotation(),
        *x.col(gt.layout.velocity_col()),
        *x.col(gt.layout.position_col()),
        contacts,
    );
    FilterState::new(mean, FilterState::initial_covariance(layout, rot_var, other_var), layout.clone())
}

/// Filter state at the first row of `log` with orientation, velocity and
/// position taken from `truth`. Contact points are placed from the first
/// row's joint angles; legs in swing are re-initialized at touchdown
/// anyway.
pub fn log_init(truth: &NavState, log: &SensorLog, rot_var: f64, other_var: f64) -> Result<FilterState> {
    let layout = layout_for(log);
    let contacts: Vec<Vec3> = match (&log.setup, log.rows.first()) {
        (SensorSetup::Legged(legs), Some(row)) => legs
            .iter()
            .zip(&row.joints)
            .map(|(g, j)| truth.pos + truth.rot.act(&forward_kinematics(j, g)))
            .collect(),
        _ => Vec::new(),
    };
    let mean = layout.compose_state(truth.rot, truth.vel, truth.pos, &contacts);
    FilterState::new(mean, FilterState::initial_covariance(&layout, rot_var, other_var), layout)
}

fn hash_vec(h: &mut DefaultHasher, v: &Vec3) {
    for x in v.iter() {
        h.write_u64(x.to_bits());
    }
}

struct Runner<'a> {
    spec: &'a FilterSpec,
    opts: TrialOptions,
    update_times: Vec<f64>,
    costs: Vec<f64>,
}

impl Runner<'_> {
    fn update(&mut self, fs: FilterState, meas: &InvariantMeasurement) -> Result<FilterState> {
        let start = Instant::now();
        let out = match &self.spec.kind {
            FilterKind::Nano(cfg) => {
                let up = nano_update_detailed(&fs, meas, cfg)?;
                self.update_times.push(start.elapsed().as_secs_f64());
                if self.opts.record_cost {
                    self.costs
                        .push(cost_j(&up.posterior, &up.prior, &fs.mean, meas)?);
                }
                up.state
            }
            FilterKind::InEkf => {
                let s = inekf_update(&fs, meas)?;
                self.update_times.push(start.elapsed().as_secs_f64());
                s
            }
        };
        Ok(out)
    }
}

fn run_one(
    log: &SensorLog,
    spec: &FilterSpec,
    init: &FilterState,
    model: &FilterModel,
    opts: TrialOptions,
) -> Result<FilterRun> {
    let layout = &init.layout;
    let mut runner = Runner {
        spec,
        opts,
        update_times: Vec::new(),
        costs: Vec::new(),
    };
    let mut hasher = DefaultHasher::new();
    let mut fs = init.clone();
    let mut estimates = Vec::with_capacity(log.len());
    estimates.push(NavState::from_state(log.rows[0].t(), &fs.mean, layout));

    let enc_var = model.noise.sigma_encoder * model.noise.sigma_encoder;
    for k in 1..log.rows.len() {
        let prev = &log.rows[k - 1];
        let row = &log.rows[k];
        let at_step = |e: Error| Error::AtStep {
            filter: spec.name.clone(),
            step: k,
            t: row.t(),
            source: Box::new(e),
        };
        let dt = row.t() - prev.t();
        let q = assemble_process_noise(&model.noise, layout, &prev.contacts);
        hasher.write_u64(dt.to_bits());
        hash_vec(&mut hasher, &prev.imu.omega);
        hash_vec(&mut hasher, &prev.imu.accel);
        fs = predict(&fs, &prev.imu, dt, &q).map_err(at_step)?;

        match &log.setup {
            SensorSetup::Landmarks(landmarks) => {
                for (obs, m) in row.landmark_obs.iter().zip(landmarks) {
                    hash_vec(&mut hasher, obs);
                    let meas = make_landmark_measurement(obs, m, model.sigma_cam, layout);
                    fs = runner.update(fs, &meas).map_err(at_step)?;
                }
            }
            SensorSetup::Legged(legs) => {
                for (leg, geom) in legs.iter().enumerate() {
                    if !row.contacts[leg] {
                        continue;
                    }
                    let Some(col) = layout.contact_col(leg) else {
                        continue;
                    };
                    let joints = &row.joints[leg];
                    hash_vec(&mut hasher, joints);
                    if !prev.contacts[leg] {
                        let j = fk_jacobian(joints, geom);
                        let r_cov = j * j.transpose() * enc_var;
                        fs = reset_contact(&fs, col, &forward_kinematics(joints, geom), &r_cov);
                    } else {
                        let meas = make_leg_measurement(joints, &model.noise, geom, layout, col)
                            .map_err(at_step)?;
                        fs = runner.update(fs, &meas).map_err(at_step)?;
                    }
                }
            }
        }
        estimates.push(NavState::from_state(row.t(), &fs.mean, layout));
    }
    Ok(FilterRun {
        name: spec.name.clone(),
        estimates,
        update_times: runner.update_times,
        costs: runner.costs,
        input_digest: hasher.finish(),
    })
}

/// Runs every filter in `filters` over the same log from the same initial
/// state. Each row is predicted from the previous row's IMU sample and then
/// updated with the row's observations; the first row only provides the
/// initial estimate.
pub fn run_trial(
    log: &SensorLog,
    filters: &[FilterSpec],
    init: &FilterState,
    model: &FilterModel,
    opts: TrialOptions,
) -> Result<Vec<FilterRun>> {
    log.validate()?;
    if log.is_empty() {
        return Err(Error::InvalidArgument("sensor log is empty".into()));
    }
    if layout_for(log).m() != init.layout.m() {
        return Err(Error::Dimension(format!(
            "initial state has m = {}, the log needs m = {}",
            init.layout.m(),
            layout_for(log).m()
        )));
    }
    filters
        .iter()
        .map(|spec| run_one(log, spec, init, model, opts))
        .collect()
}

/// A landmark-scenario Monte-Carlo campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub trials: usize,
    pub profile: TrajectoryProfile,
    pub landmarks: Vec<Vec3>,
    /// Noise injected into the simulated sensors.
    pub sim_noise: NoiseConfig,
    pub sim_sigma_cam: f64,
    /// Noise the filters assume.
    pub model: FilterModel,
    pub filters: Vec<FilterSpec>,
    /// Trial `i` draws its sensor noise from seed `base_seed + i`.
    pub base_seed: u64,
    pub init_rot_var: f64,
    pub init_other_var: f64,
    pub re_window: f64,
    pub record_cost: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            trials: 100,
            profile: TrajectoryProfile::default(),
            landmarks: default_landmarks(),
            sim_noise: NoiseConfig::default(),
            sim_sigma_cam: DEFAULT_SIGMA_CAM,
            model: FilterModel::default(),
            filters: vec![FilterSpec::nano(NanoConfig::default()), FilterSpec::inekf()],
            base_seed: 0,
            init_rot_var: 1e-4,
            init_other_var: 1e-2,
            re_window: DEFAULT_RE_WINDOW,
            record_cost: false,
        }
    }
}

/// Camera noise the filters assume in [`McConfig::without_noise`]. The
/// measurement covariance must stay invertible, so it cannot be zero.
pub const NOISELESS_MODEL_SIGMA_CAM: f64 = 1e-3;

impl McConfig {
    /// Zeroes every simulated noise source and lowers the camera noise the
    /// filters assume to [`NOISELESS_MODEL_SIGMA_CAM`]. The assumed IMU
    /// noise is kept; it covers the gap between the filters' single Euler
    /// step and the substepped ground truth.
    pub fn without_noise(mut self) -> Self {
        self.sim_noise = NoiseConfig {
            sigma_accel: 0.0,
            sigma_gyro: 0.0,
            sigma_encoder: 0.0,
            sigma_slip: 0.0,
        };
        self.sim_sigma_cam = 0.0;
        self.model.sigma_cam = NOISELESS_MODEL_SIGMA_CAM;
        self
    }
}

/// Summary statistics of a set of durations, seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimingStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl TimingStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return TimingStats::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let at = |q: f64| s[((s.len() - 1) as f64 * q).round() as usize];
        TimingStats {
            count: s.len(),
            mean: s.iter().sum::<f64>() / s.len() as f64,
            median: at(0.5),
            p95: at(0.95),
            max: s[s.len() - 1],
        }
    }
}

/// Per-filter results of a campaign. Everything except `timing` is a
/// deterministic function of the configuration.
#[derive(Debug, Clone)]
pub struct FilterSummary {
    pub name: String,
    /// `[trial][step]` error magnitudes.
    pub pos_err: Vec<Vec<f64>>,
    pub vel_err: Vec<Vec<f64>>,
    pub ori_err: Vec<Vec<f64>>,
    /// Per-step RMSE across trials.
    pub rmse_pos: Vec<f64>,
    pub rmse_vel: Vec<f64>,
    pub rmse_ori: Vec<f64>,
    /// Mean over trials of each trial's RMS error.
    pub mean_rmse: ChannelErrors,
    /// ATE and RE of each trial.
    pub reports: Vec<MetricReport>,
    /// Mean variational cost per update, when recorded.
    pub mean_cost: Option<f64>,
    /// Estimates of the first completed trial.
    pub first_trial: Vec<NavState>,
    pub timing: TimingStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct McSummary {
    pub t: Vec<f64>,
    /// Indices of the trials that completed, ascending.
    pub trials: Vec<usize>,
    pub failures: Vec<TrialFailure>,
    pub filters: Vec<FilterSummary>,
    pub re_window: f64,
}

struct TrialResult {
    series: Vec<(crate::metrics::ErrorSeries, MetricReport)>,
    estimates: Vec<Vec<NavState>>,
    update_times: Vec<Vec<f64>>,
    costs: Vec<Vec<f64>>,
}

fn run_mc_trial(cfg: &McConfig, gt: &GroundTruth, gt_nav: &[NavState], trial: usize) -> Result<TrialResult> {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let log = synthesize_sensors(gt, &cfg.landmarks, &cfg.sim_noise, cfg.sim_sigma_cam, seed)?;
    let init = truth_init(gt, &gt.layout, &[], cfg.init_rot_var, cfg.init_other_var)?;
    let runs = run_trial(
        &log,
        &cfg.filters,
        &init,
        &cfg.model,
        TrialOptions {
            record_cost: cfg.record_cost,
        },
    )?;
    let mut out = TrialResult {
        series: Vec::new(),
        estimates: Vec::new(),
        update_times: Vec::new(),
        costs: Vec::new(),
    };
    for run in runs {
        let e = error_series(&run.estimates, gt_nav)?;
        let report = MetricReport {
            ate: ate(&run.estimates, gt_nav)?,
            re: relative_error(&run.estimates, gt_nav, cfg.re_window)?,
        };
        out.series.push((e, report));
        out.update_times.push(run.update_times);
        out.costs.push(run.costs);
        out.estimates.push(run.estimates);
    }
    Ok(out)
}

/// Runs `cfg.trials` independent trials over one ground-truth trajectory,
/// in parallel on the current rayon pool.
///
/// A failing trial is recorded in [`McSummary::failures`] and left out of
/// every aggregate. Results do not depend on the thread count.
pub fn run_monte_carlo(cfg: &McConfig) -> Result<McSummary> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    if cfg.filters.is_empty() {
        return Err(Error::InvalidArgument("no filters selected".into()));
    }
    let gt = generate_ground_truth(&cfg.profile)?;
    let duration = gt.t[gt.len() - 1] - gt.t[0];
    let window = cfg.re_window.min(duration);
    let cfg = McConfig {
        re_window: window,
        ..cfg.clone()
    };
    let gt_nav = gt.nav_states();

    let results: Vec<Result<TrialResult>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            run_mc_trial(&cfg, &gt, &gt_nav, i).map_err(|e| Error::InTrial {
                trial: i,
                source: Box::new(e),
            })
        })
        .collect();

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(r) => {
                trials.push(i);
                ok.push(r);
            }
            Err(e) => failures.push(TrialFailure {
                trial: i,
                message: e.to_string(),
            }),
        }
    }

    let firsts: Vec<Vec<NavState>> = match ok.first_mut() {
        Some(r) => std::mem::take(&mut r.estimates),
        None => vec![Vec::new(); cfg.filters.len()],
    };
    for r in ok.iter_mut() {
        r.estimates.clear();
    }

    let filters = cfg
        .filters
        .iter()
        .enumerate()
        .map(|(f, spec)| {
            let pick = |g: fn(&crate::metrics::ErrorSeries) -> &Vec<f64>| -> Vec<Vec<f64>> {
                ok.iter().map(|r| g(&r.series[f].0).clone()).collect()
            };
            let pos_err = pick(|e| &e.pos);
            let vel_err = pick(|e| &e.vel);
            let ori_err = pick(|e| &e.ori);
            let curve = |s: &[Vec<f64>]| -> Result<Vec<f64>> {
                let refs: Vec<&[f64]> = s.iter().map(Vec::as_slice).collect();
                rmse_over_trials(&refs)
            };
            let n = ok.len().max(1) as f64;
            let mean_of = |s: &[Vec<f64>]| s.iter().map(|e| rms(e)).sum::<f64>() / n;
            let costs: Vec<f64> = ok.iter().flat_map(|r| r.costs[f].iter().copied()).collect();
            let times: Vec<f64> = ok
                .iter()
                .flat_map(|r| r.update_times[f].iter().copied())
                .collect();
            Ok(FilterSummary {
                name: spec.name.clone(),
                rmse_pos: curve(&pos_err)?,
                rmse_vel: curve(&vel_err)?,
                rmse_ori: curve(&ori_err)?,
                mean_rmse: ChannelErrors {
                    pos: mean_of(&pos_err),
                    vel: mean_of(&vel_err),
                    ori: mean_of(&ori_err),
                },
                pos_err,
                vel_err,
                ori_err,
                reports: ok.iter().map(|r| r.series[f].1).collect(),
                mean_cost: (!costs.is_empty()).then(|| costs.iter().sum::<f64>() / costs.len() as f64),
                first_trial: firsts[f].clone(),
                timing: TimingStats::from_samples(&times),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(McSummary {
        t: gt.t.clone(),
        trials,
        failures,
        filters,
        re_window: window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_campaign() -> McConfig {
        McConfig {
            trials: 3,
            profile: TrajectoryProfile {
                duration: 2.0,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn filters_see_identical_inputs() {
        let cfg = short_campaign();
        let gt = generate_ground_truth(&cfg.profile).unwrap();
        let log = synthesize_sensors(&gt, &cfg.landmarks, &cfg.sim_noise, 0.1, 1).unwrap();
        let init = truth_init(&gt, &gt.layout, &[], 1e-4, 1e-2).unwrap();
        let runs = run_trial(&log, &cfg.filters, &init, &cfg.model, TrialOptions::default()).unwrap();
        assert_eq!(runs[0].input_digest, runs[1].input_digest);
        for r in &runs {
            assert_eq!(r.estimates.len(), log.len());
            assert_eq!(r.update_times.len(), 3 * (log.len() - 1));
        }
    }

    #[test]
    fn campaign_is_repeatable() {
        let cfg = short_campaign();
        let a = run_monte_carlo(&cfg).unwrap();
        let b = run_monte_carlo(&cfg).unwrap();
        assert_eq!(a.trials, vec![0, 1, 2]);
        assert!(a.failures.is_empty());
        for (fa, fb) in a.filters.iter().zip(&b.filters) {
            assert_eq!(fa.pos_err, fb.pos_err);
            assert_eq!(fa.rmse_ori, fb.rmse_ori);
        }
    }

    #[test]
    fn timing_stats() {
        let s = TimingStats::from_samples(&[3.0, 1.0, 2.0]);
        assert_eq!(s.count, 3);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.median, 2.0);
        assert_eq!(s.max, 3.0);
    }
}
