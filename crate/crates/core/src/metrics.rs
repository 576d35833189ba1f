//! Trajectory error metrics: per-step errors, RMSE across trials, absolute
//! trajectory error and relative error over fixed time windows.
//!
//! No alignment is applied before any metric; estimates are expected to
//! start from the ground-truth state.

use crate::error::{Error, Result};
use crate::lie::{vee, SEm3, Vec3, SO3};
use crate::models::StateLayout;

/// Orientation, velocity and position at one timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub t: f64,
    pub rot: SO3,
    pub vel: Vec3,
    pub pos: Vec3,
}

impl NavState {
    pub fn from_state(t: f64, x: &SEm3, layout: &StateLayout) -> Self {
        NavState {
            t,
            rot: *x.rotation(),
            vel: *x.col(layout.velocity_col()),
            pos: *x.col(layout.position_col()),
        }
    }

    /// The SE_2(3) element `[R | v p]`.
    pub fn as_extended_pose(&self) -> SEm3 {
        SEm3::new(self.rot, vec![self.vel, self.pos])
    }
}

/// Rotation angle of `R`, valid up to and including π.
pub fn rotation_angle(r: &SO3) -> f64 {
    let m = r.matrix();
    let s = 0.5 * vee(&(m - m.transpose())).norm();
    let c = 0.5 * (m.trace() - 1.0);
    s.atan2(c)
}

/// Per-step error magnitudes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorSeries {
    pub t: Vec<f64>,
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
    pub ori: Vec<f64>,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn check_lengths(est: &[NavState], gt: &[NavState]) -> Result<()> {
    if est.len() != gt.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            found: est.len(),
        });
    }
    Ok(())
}

/// Position and velocity errors are Euclidean norms; orientation error is
/// `‖Log(R_gtᵀ R_est)‖`.
pub fn error_series(est: &[NavState], gt: &[NavState]) -> Result<ErrorSeries> {
    check_lengths(est, gt)?;
    let mut out = ErrorSeries::default();
    for (e, g) in est.iter().zip(gt) {
        out.t.push(g.t);
        out.pos.push((e.pos - g.pos).norm());
        out.vel.push((e.vel - g.vel).norm());
        out.ori.push(rotation_angle(&g.rot.inverse().compose(&e.rot)));
    }
    Ok(out)
}

/// Pointwise `sqrt(mean_i e_i(k)²)` across trials.
pub fn rmse_over_trials(series: &[&[f64]]) -> Result<Vec<f64>> {
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    for s in series {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: s.len(),
            });
        }
    }
    let count = series.len() as f64;
    Ok((0..n)
        .map(|k| (series.iter().map(|s| s[k] * s[k]).sum::<f64>() / count).sqrt())
        .collect())
}

/// Root mean square of a sequence; zero for an empty one.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// One scalar per error channel.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChannelErrors {
    pub pos: f64,
    pub vel: f64,
    pub ori: f64,
}

impl ChannelErrors {
    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        ChannelErrors {
            pos: f(self.pos),
            vel: f(self.vel),
            ori: f(self.ori),
        }
    }
}

/// Absolute trajectory error: RMS of each error channel over the whole
/// trajectory.
pub fn ate(est: &[NavState], gt: &[NavState]) -> Result<ChannelErrors> {
    let e = error_series(est, gt)?;
    Ok(ChannelErrors {
        pos: rms(&e.pos),
        vel: rms(&e.vel),
        ori: rms(&e.ori),
    })
}

/// Default relative-error window, seconds.
pub const DEFAULT_RE_WINDOW: f64 = 3.0;

/// Relative error over sliding windows of `window` seconds (stride one
/// sample).
///
/// For each start `i` and end `j = i + w` the relative motions
/// `ΔT = T_iᵀ T_j` of estimate and truth are compared as
/// `E = ΔT_gt⁻¹ ΔT_est` in SE_2(3); the channels are the norms of the
/// velocity and position columns of `E` and its rotation angle. The RMS
/// over all starts is returned.
pub fn relative_error(est: &[NavState], gt: &[NavState], window: f64) -> Result<ChannelErrors> {
    check_lengths(est, gt)?;
    let n = gt.len();
    let duration = if n >= 2 { gt[n - 1].t - gt[0].t } else { 0.0 };
    if n < 2 || !(window > 0.0) || window > duration * (1.0 + 1e-9) {
        return Err(Error::WindowTooLong { window, duration });
    }
    let dt = duration / (n - 1) as f64;
    let w = ((window / dt).round() as usize).clamp(1, n - 1);
    let mut sq = ChannelErrors::default();
    let starts = n - w;
    for i in 0..starts {
        let j = i + w;
        let rel = |a: &NavState, b: &NavState| a.as_extended_pose().inverse().compose(&b.as_extended_pose());
        let e = rel(&gt[i], &gt[j]).inverse().compose(&rel(&est[i], &est[j]));
        sq.vel += e.col(0).norm_squared();
        sq.pos += e.col(1).norm_squared();
        sq.ori += rotation_angle(e.rotation()).powi(2);
    }
    Ok(sq.map(|v| (v / starts as f64).sqrt()))
}

/// ATE and RE for one dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricReport {
    pub ate: ChannelErrors,
    pub re: ChannelErrors,
}

pub fn metric_report(est: &[NavState], gt: &[NavState], window: f64) -> Result<MetricReport> {
    Ok(MetricReport {
        ate: ate(est, gt)?,
        re: relative_error(est, gt, window)?,
    })
}

/// Mean and (population) standard deviation of each entry across datasets.
pub fn aggregate_reports(reports: &[MetricReport]) -> (MetricReport, MetricReport) {
    let n = reports.len().max(1) as f64;
    let fields = |r: &MetricReport| {
        [
            r.ate.pos, r.ate.vel, r.ate.ori, r.re.pos, r.re.vel, r.re.ori,
        ]
    };
    let mut mean = [0.0; 6];
    for r in reports {
        for (m, v) in mean.iter_mut().zip(fields(r)) {
            *m += v / n;
        }
    }
    let mut var = [0.0; 6];
    for r in reports {
        for ((s, v), m) in var.iter_mut().zip(fields(r)).zip(mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let build = |a: [f64; 6]| MetricReport {
        ate: ChannelErrors {
            pos: a[0],
            vel: a[1],
            ori: a[2],
        },
        re: ChannelErrors {
            pos: a[3],
            vel: a[4],
            ori: a[5],
        },
    };
    (build(mean), build(var.map(f64::sqrt)))
}
