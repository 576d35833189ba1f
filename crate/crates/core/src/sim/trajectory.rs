//! Ground-truth trajectories driven by sinusoidal body rates and world-frame
//! accelerations.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lie::{SEm3, Vec3, SO3};
use crate::models::{imu_mean_propagate, ImuSample, StateLayout};

/// Integration substeps per output sample.
pub const SUBSTEPS: usize = 10;

/// Input profile of a synthetic trajectory.
///
/// Each axis of the body rate is `amp · sin(2π f t + φ)` and each axis of
/// the world-frame acceleration likewise, with phases `φ` drawn from
/// `seed`. The specific force is `Rᵀ(a_world − g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryProfile {
    /// Seconds.
    pub duration: f64,
    /// Samples per second.
    pub rate: f64,
    pub gyro_amp: Vec3,
    pub gyro_freq: Vec3,
    pub accel_amp: Vec3,
    pub accel_freq: Vec3,
    /// Starting velocity. `None` picks the value that makes the mean
    /// velocity of the sinusoidal acceleration zero, so the body stays near
    /// the origin.
    pub initial_velocity: Option<Vec3>,
    pub seed: u64,
}

impl Default for TrajectoryProfile {
    fn default() -> Self {
        TrajectoryProfile {
            duration: 30.0,
            rate: 100.0,
            gyro_amp: Vec3::from_element(0.5),
            gyro_freq: Vec3::new(0.2, 0.3, 0.1),
            accel_amp: Vec3::from_element(0.5),
            accel_freq: Vec3::new(0.15, 0.25, 0.2),
            initial_velocity: None,
            seed: 0,
        }
    }
}

impl TrajectoryProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.duration) || !positive(self.rate) {
            return Err(Error::InvalidArgument(format!(
                "duration and rate must be positive, got {} s at {} Hz",
                self.duration, self.rate
            )));
        }
        let vecs = [
            self.gyro_amp,
            self.gyro_freq,
            self.accel_amp,
            self.accel_freq,
        ];
        if vecs.iter().any(|v| v.iter().any(|x| !x.is_finite() || *x < 0.0)) {
            return Err(Error::InvalidArgument(
                "amplitudes and frequencies must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Number of samples, including `t = 0`.
    pub fn samples(&self) -> usize {
        (self.duration * self.rate).round() as usize + 1
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate
    }

    fn phases(&self) -> (Vec3, Vec3) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut draw = || Vec3::from_fn(|_, _| rng.random::<f64>() * TAU);
        let gyro = draw();
        let accel = draw();
        (gyro, accel)
    }
}

fn sinusoid(amp: &Vec3, freq: &Vec3, phase: &Vec3, t: f64) -> Vec3 {
    Vec3::from_fn(|i, _| amp[i] * (TAU * freq[i] * t + phase[i]).sin())
}

/// Sampled true states and the noise-free IMU inputs that produced them.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub t: Vec<f64>,
    /// SE_2(3) states `[R | v p]`.
    pub states: Vec<SEm3>,
    /// `imu[k]` is held over `[t_k, t_{k+1})`.
    pub imu: Vec<ImuSample>,
    pub layout: StateLayout,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.t.len() < 2 {
            return 0.0;
        }
        (self.t[self.t.len() - 1] - self.t[0]) / (self.t.len() - 1) as f64
    }

    pub fn nav_states(&self) -> Vec<crate::metrics::NavState> {
        self.t
            .iter()
            .zip(&self.states)
            .map(|(t, x)| crate::metrics::NavState::from_state(*t, x, &self.layout))
            .collect()
    }
}

/// Integrates `imu` from `x0` with [`SUBSTEPS`] Euler substeps per
/// interval, holding each sample constant over its interval.
pub fn integrate_substepped(x0: &SEm3, imu: &[ImuSample], dt: f64, layout: &StateLayout) -> Vec<SEm3> {
    let h = dt / SUBSTEPS as f64;
    let mut out = Vec::with_capacity(imu.len() + 1);
    let mut x = x0.clone();
    out.push(x.clone());
    for u in imu {
        for _ in 0..SUBSTEPS {
            x = imu_mean_propagate(&x, u, h, layout);
        }
        out.push(x.clone());
    }
    out
}

/// Generates the ground truth for `profile`, starting at the identity
/// attitude and the origin.
///
/// The inputs at sample `k` are evaluated from the current true state and
/// held for [`SUBSTEPS`] Euler substeps, so re-integrating the emitted
/// samples reproduces the states exactly.
pub fn generate_ground_truth(profile: &TrajectoryProfile) -> Result<GroundTruth> {
    profile.validate()?;
    let layout = StateLayout::inertial();
    let (gyro_phase, accel_phase) = profile.phases();
    let v0 = profile.initial_velocity.unwrap_or_else(|| {
        Vec3::from_fn(|i, _| {
            let w = TAU * profile.accel_freq[i];
            if w > 0.0 {
                -profile.accel_amp[i] * accel_phase[i].cos() / w
            } else {
                0.0
            }
        })
    });

    let n = profile.samples();
    let dt = profile.dt();
    let h = dt / SUBSTEPS as f64;
    let mut x = layout.compose_state(SO3::identity(), v0, Vec3::zeros(), &[]);
    let mut t = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut imu = Vec::with_capacity(n);
    for k in 0..n {
        let tk = k as f64 * dt;
        let a_world = sinusoid(&profile.accel_amp, &profile.accel_freq, &accel_phase, tk);
        let u = ImuSample {
            t: tk,
            omega: sinusoid(&profile.gyro_amp, &profile.gyro_freq, &gyro_phase, tk),
            accel: x.rotation().inverse().act(&(a_world - layout.gravity)),
        };
        t.push(tk);
        states.push(x.clone());
        imu.push(u);
        if k + 1 < n {
            for _ in 0..SUBSTEPS {
                x = imu_mean_propagate(&x, &u, h, &layout);
            }
        }
    }
    Ok(GroundTruth {
        t,
        states,
        imu,
        layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitudes_hover() {
        let profile = TrajectoryProfile {
            duration: 2.0,
            gyro_amp: Vec3::zeros(),
            accel_amp: Vec3::zeros(),
            initial_velocity: Some(Vec3::zeros()),
            ..Default::default()
        };
        let gt = generate_ground_truth(&profile).unwrap();
        assert_eq!(gt.len(), 201);
        for x in &gt.states {
            assert_eq!(*x, SEm3::identity(2));
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let profile = TrajectoryProfile {
            duration: 1.0,
            ..Default::default()
        };
        let a = generate_ground_truth(&profile).unwrap();
        let b = generate_ground_truth(&profile).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.imu, b.imu);
        let c = generate_ground_truth(&TrajectoryProfile { seed: 1, ..profile }).unwrap();
        assert_ne!(a.imu, c.imu);
    }

    #[test]
    fn rejects_bad_profiles() {
        let bad = TrajectoryProfile {
            rate: 0.0,
            ..Default::default()
        };
        assert!(generate_ground_truth(&bad).is_err());
    }
}
