//! Noisy IMU, landmark and joint-encoder readings sampled along a ground
//! truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::trajectory::GroundTruth;
use crate::error::{Error, Result};
use crate::lie::Vec3;
use crate::models::legs::solve_joint_angles;
use crate::models::{forward_kinematics, ImuSample, LegGeometry, NoiseConfig, STANCE_ANGLES};

/// The three static landmarks of the reference landmark scenario.
pub fn default_landmarks() -> Vec<Vec3> {
    vec![
        Vec3::new(0.0, 2.0, 2.0),
        Vec3::new(-2.0, -2.0, -2.0),
        Vec3::new(2.0, -2.0, -2.0),
    ]
}

/// Default camera noise, m.
pub const DEFAULT_SIGMA_CAM: f64 = 0.1;

/// Default gait period of the legged scenario, s.
pub const DEFAULT_GAIT_PERIOD: f64 = 0.5;

// Stream ids keep the noise sources independent of each other.
const IMU_STREAM: u64 = 0;
const CAMERA_STREAM: u64 = 1;
const ENCODER_STREAM: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian3(rng: &mut ChaCha8Rng, sigma: f64) -> Vec3 {
    Vec3::from_fn(|_, _| {
        let n: f64 = StandardNormal.sample(rng);
        sigma * n
    })
}

/// Which exteroceptive sensors a log carries.
#[derive(Debug, Clone, PartialEq)]
pub enum SensorSetup {
    /// One body-frame observation per landmark per row, in this order.
    Landmarks(Vec<Vec3>),
    /// One joint triple and contact flag per leg per row.
    Legged(Vec<LegGeometry>),
}

/// Readings at one IMU timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRow {
    /// Held over the interval to the next row.
    pub imu: ImuSample,
    pub landmark_obs: Vec<Vec3>,
    /// Hip, thigh and calf angles per leg.
    pub joints: Vec<Vec3>,
    pub contacts: Vec<bool>,
}

impl SensorRow {
    pub fn t(&self) -> f64 {
        self.imu.t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorLog {
    pub setup: SensorSetup,
    pub rows: Vec<SensorRow>,
    /// Stance samples dropped because the foot could not be reached.
    pub ik_failures: usize,
    /// World contact points per row and leg, when synthesized. Not
    /// serialized.
    pub true_contacts: Option<Vec<Vec<Vec3>>>,
}

impl SensorLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Checks that timestamps strictly increase and row widths match the
    /// setup.
    pub fn validate(&self) -> Result<()> {
        let (n_obs, n_legs) = match &self.setup {
            SensorSetup::Landmarks(l) => (l.len(), 0),
            SensorSetup::Legged(g) => (0, g.len()),
        };
        for (k, row) in self.rows.iter().enumerate() {
            if row.landmark_obs.len() != n_obs || row.joints.len() != n_legs || row.contacts.len() != n_legs {
                return Err(Error::InvalidArgument(format!(
                    "row {k} does not match the sensor setup"
                )));
            }
            if k > 0 && !(row.t() > self.rows[k - 1].t()) {
                return Err(Error::InvalidArgument(format!(
                    "timestamps must strictly increase (row {k})"
                )));
            }
        }
        Ok(())
    }
}

fn noisy_imu(u: &ImuSample, noise: &NoiseConfig, rng: &mut ChaCha8Rng) -> ImuSample {
    let omega = u.omega + gaussian3(rng, noise.sigma_gyro);
    let accel = u.accel + gaussian3(rng, noise.sigma_accel);
    ImuSample {
        t: u.t,
        omega,
        accel,
    }
}

/// IMU readings plus one noisy body-frame observation `Rᵀ(m − p)` of each
/// landmark at every step.
pub fn synthesize_sensors(
    gt: &GroundTruth,
    landmarks: &[Vec3],
    noise: &NoiseConfig,
    sigma_cam: f64,
    seed: u64,
) -> Result<SensorLog> {
    if gt.is_empty() {
        return Err(Error::InvalidArgument("ground truth is empty".into()));
    }
    let mut imu_rng = stream(seed, IMU_STREAM);
    let mut cam_rng = stream(seed, CAMERA_STREAM);
    let p_col = gt.layout.position_col();
    let rows = gt
        .imu
        .iter()
        .zip(&gt.states)
        .map(|(u, x)| {
            let imu = noisy_imu(u, noise, &mut imu_rng);
            let landmark_obs = landmarks
                .iter()
                .map(|m| x.rotation().inverse().act(&(m - x.col(p_col))) + gaussian3(&mut cam_rng, sigma_cam))
                .collect();
            SensorRow {
                imu,
                landmark_obs,
                joints: Vec::new(),
                contacts: Vec::new(),
            }
        })
        .collect();
    Ok(SensorLog {
        setup: SensorSetup::Landmarks(landmarks.to_vec()),
        rows,
        ik_failures: 0,
        true_contacts: None,
    })
}

/// Trot schedule: legs 0 and 3 share a phase, legs 1 and 2 the opposite
/// one. Stance occupies the first half of each period.
pub fn in_stance(leg: usize, step: usize, period_samples: usize) -> bool {
    let half = period_samples / 2;
    let offset = if (leg % 2) ^ ((leg / 2) % 2) == 1 { half } else { 0 };
    (step + offset) % period_samples < half
}

/// IMU readings plus encoder angles and contact flags for the legs in
/// `legs`.
///
/// At touchdown the foot is placed where the nominal stance posture puts
/// it; during stance the foot stays fixed in the world and the joint angles
/// come from inverting the leg kinematics on `Rᵀ(s − p)`. Stance samples
/// that cannot be inverted are reported as swing and counted in
/// [`SensorLog::ik_failures`].
pub fn synthesize_legged(
    gt: &GroundTruth,
    legs: &[LegGeometry],
    gait_period: f64,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<SensorLog> {
    if gt.is_empty() {
        return Err(Error::InvalidArgument("ground truth is empty".into()));
    }
    let dt = gt.dt();
    let period_samples = if dt > 0.0 { (gait_period / dt).round() as usize } else { 0 };
    if !(gait_period > 0.0) || period_samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "gait period {gait_period} s must span at least two samples"
        )));
    }
    let stance = Vec3::from(STANCE_ANGLES);
    let mut imu_rng = stream(seed, IMU_STREAM);
    let mut enc_rng = stream(seed, ENCODER_STREAM);
    let p_col = gt.layout.position_col();

    let mut feet: Vec<Vec3> = vec![Vec3::zeros(); legs.len()];
    let mut guesses: Vec<Vec3> = vec![stance; legs.len()];
    let mut rows = Vec::with_capacity(gt.len());
    let mut truth = Vec::with_capacity(gt.len());
    let mut ik_failures = 0;
    for (k, (u, x)) in gt.imu.iter().zip(&gt.states).enumerate() {
        let imu = noisy_imu(u, noise, &mut imu_rng);
        let rot = x.rotation();
        let p = x.col(p_col);
        let mut joints = Vec::with_capacity(legs.len());
        let mut contacts = Vec::with_capacity(legs.len());
        for (leg, geom) in legs.iter().enumerate() {
            let down = in_stance(leg, k, period_samples);
            let touchdown = down && (k == 0 || !in_stance(leg, k - 1, period_samples));
            if touchdown || !down {
                feet[leg] = p + rot.act(&forward_kinematics(&stance, geom));
                guesses[leg] = stance;
            }
            let mut angles = stance;
            let mut contact = false;
            if down {
                let target = rot.inverse().act(&(feet[leg] - p));
                match solve_joint_angles(&target, geom, &guesses[leg]) {
                    Some(a) => {
                        angles = a;
                        guesses[leg] = a;
                        contact = true;
                    }
                    None => ik_failures += 1,
                }
            }
            joints.push(angles + gaussian3(&mut enc_rng, noise.sigma_encoder));
            contacts.push(contact);
        }
        truth.push(feet.clone());
        rows.push(SensorRow {
            imu,
            landmark_obs: Vec::new(),
            joints,
            contacts,
        });
    }
    Ok(SensorLog {
        setup: SensorSetup::Legged(legs.to_vec()),
        rows,
        ik_failures,
        true_contacts: Some(truth),
    })
}
