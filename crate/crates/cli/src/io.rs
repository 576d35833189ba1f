//! CSV interchange for sensor logs and state trajectories.
//!
//! Numbers are written with 17 significant digits so that every `f64`
//! survives a write/parse roundtrip unchanged. Orientations are stored as
//! unit quaternions `(w, x, y, z)` with `w ≥ 0` and converted back to
//! rotation matrices on ingest.

use std::path::Path;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion};
use nanol::lie::{Vec3, SO3};
use nanol::metrics::NavState;
use nanol::models::{ImuSample, LegGeometry};
use nanol::sim::{SensorLog, SensorRow, SensorSetup};

use crate::bundle::write_atomic;
use crate::error::{CliError, Result};

pub const IMU_COLUMNS: [&str; 7] = ["t", "wx", "wy", "wz", "ax", "ay", "az"];
pub const CONTACT_COLUMNS: [&str; 4] = ["c_fl", "c_fr", "c_rl", "c_rr"];
pub const STATE_COLUMNS: [&str; 11] = ["t", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "px", "py", "pz"];

/// Legs a legged log carries, in FL, FR, RL, RR order.
pub const LOG_LEGS: usize = 4;

pub fn legged_header() -> Vec<String> {
    let mut h: Vec<String> = IMU_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.extend((0..3 * LOG_LEGS).map(|i| format!("q{i}")));
    h.extend(CONTACT_COLUMNS.iter().map(|s| s.to_string()));
    h
}

pub fn landmark_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = IMU_COLUMNS.iter().map(|s| s.to_string()).collect();
    for i in 0..n {
        h.extend(["x", "y", "z"].iter().map(|a| format!("l{i}{a}")));
    }
    h
}

/// Sensor hardware a log is interpreted against.
#[derive(Debug, Clone, PartialEq)]
pub struct Hardware {
    pub landmarks: Vec<Vec3>,
    pub legs: Vec<LegGeometry>,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_vec(rec: &mut Vec<String>, v: &Vec3) {
    rec.extend(v.iter().map(|x| fmt_f64(*x)));
}

fn to_csv(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let other = |e: csv::Error| CliError::Other(e.to_string());
    w.write_record(header).map_err(other)?;
    for r in rows {
        w.write_record(&r).map_err(other)?;
    }
    w.into_inner().map_err(|e| CliError::Other(e.to_string()))
}

pub fn write_sensor_log(path: &Path, log: &SensorLog) -> Result<()> {
    let header = match &log.setup {
        SensorSetup::Landmarks(l) => landmark_header(l.len()),
        SensorSetup::Legged(legs) if legs.len() == LOG_LEGS => legged_header(),
        SensorSetup::Legged(legs) => {
            return Err(CliError::Other(format!(
                "the sensor log format holds {LOG_LEGS} legs, this log has {}",
                legs.len()
            )))
        }
    };
    let rows = log.rows.iter().map(|row| {
        let mut rec = vec![fmt_f64(row.t())];
        push_vec(&mut rec, &row.imu.omega);
        push_vec(&mut rec, &row.imu.accel);
        for v in row.landmark_obs.iter().chain(&row.joints) {
            push_vec(&mut rec, v);
        }
        rec.extend(row.contacts.iter().map(|c| if *c { "1" } else { "0" }.to_string()));
        rec
    });
    write_atomic(path, &to_csv(&header, rows)?)
}

struct Fields<'a> {
    file: &'a str,
    header: &'a [String],
    record: &'a csv::StringRecord,
    line: u64,
}

impl Fields<'_> {
    fn err(&self, col: usize, reason: impl Into<String>) -> CliError {
        CliError::Parse {
            file: self.file.to_string(),
            line: self.line,
            column: self.header.get(col).cloned().unwrap_or_else(|| format!("#{}", col + 1)),
            reason: reason.into(),
        }
    }

    fn check_width(&self) -> Result<()> {
        let n = self.record.len();
        if n < self.header.len() {
            return Err(self.err(n, format!("missing value ({n} of {} columns present)", self.header.len())));
        }
        if n > self.header.len() {
            return Err(self.err(self.header.len(), "unexpected extra value"));
        }
        Ok(())
    }

    fn f64(&self, col: usize) -> Result<f64> {
        let s = &self.record[col];
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(self.err(col, format!("non-finite value `{s}`"))),
            Err(_) => Err(self.err(col, format!("`{s}` is not a number"))),
        }
    }

    fn vec3(&self, col: usize) -> Result<Vec3> {
        Ok(Vec3::new(self.f64(col)?, self.f64(col + 1)?, self.f64(col + 2)?))
    }

    fn flag(&self, col: usize) -> Result<bool> {
        match &self.record[col] {
            "0" => Ok(false),
            "1" => Ok(true),
            s => Err(self.err(col, format!("contact flag must be 0 or 1, got `{s}`"))),
        }
    }
}

fn reader(path: &Path) -> Result<(csv::Reader<std::fs::File>, Vec<String>)> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = rdr
        .headers()
        .map_err(|e| parse_error(path, 1, "", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    Ok((rdr, header))
}

fn parse_error(path: &Path, line: u64, column: &str, reason: impl Into<String>) -> CliError {
    CliError::Parse {
        file: path.display().to_string(),
        line,
        column: column.to_string(),
        reason: reason.into(),
    }
}

fn check_header(path: &Path, found: &[String], expected: &[String]) -> Result<()> {
    for (i, want) in expected.iter().enumerate() {
        match found.get(i) {
            Some(h) if h == want => {}
            Some(h) => return Err(parse_error(path, 1, want, format!("expected header `{want}`, found `{h}`"))),
            None => return Err(parse_error(path, 1, want, "header column missing")),
        }
    }
    if found.len() > expected.len() {
        return Err(parse_error(path, 1, &found[expected.len()], "unexpected header column"));
    }
    Ok(())
}

/// Reads a sensor log. The header decides between the legged schema
/// (`t, wx..az, q0..q11, c_fl, c_fr, c_rl, c_rr`) and the landmark schema
/// (`t, wx..az, l0x, l0y, l0z, ...`); `hw` supplies the geometry the
/// columns refer to.
pub fn parse_sensor_log(path: &Path, hw: &Hardware) -> Result<SensorLog> {
    let (mut rdr, header) = reader(path)?;
    let file = path.display().to_string();
    let legged = header.len() > IMU_COLUMNS.len() && header[IMU_COLUMNS.len()] == "q0";
    let setup = if legged {
        check_header(path, &header, &legged_header())?;
        if hw.legs.len() != LOG_LEGS {
            return Err(CliError::Other(format!(
                "{file}: a legged log needs {LOG_LEGS} leg geometries, the config has {}",
                hw.legs.len()
            )));
        }
        SensorSetup::Legged(hw.legs.clone())
    } else {
        check_header(path, &header, &landmark_header(hw.landmarks.len()))?;
        SensorSetup::Landmarks(hw.landmarks.clone())
    };

    let mut rows: Vec<SensorRow> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(parse_error(path, line, "", e.to_string()));
            }
        }
        let line = record.position().map_or(0, |p| p.line());
        let f = Fields {
            file: &file,
            header: &header,
            record: &record,
            line,
        };
        f.check_width()?;
        let imu = ImuSample {
            t: f.f64(0)?,
            omega: f.vec3(1)?,
            accel: f.vec3(4)?,
        };
        let mut row = SensorRow {
            imu,
            landmark_obs: Vec::new(),
            joints: Vec::new(),
            contacts: Vec::new(),
        };
        if legged {
            for leg in 0..LOG_LEGS {
                row.joints.push(f.vec3(7 + 3 * leg)?);
                row.contacts.push(f.flag(7 + 3 * LOG_LEGS + leg)?);
            }
        } else {
            for i in 0..hw.landmarks.len() {
                row.landmark_obs.push(f.vec3(7 + 3 * i)?);
            }
        }
        if let Some(prev) = rows.last() {
            if !(row.t() > prev.t()) {
                return Err(CliError::NonMonotonicTime {
                    file,
                    line,
                    t: row.t(),
                });
            }
        }
        rows.push(row);
    }
    let log = SensorLog {
        setup,
        rows,
        ik_failures: 0,
        true_contacts: None,
    };
    log.validate()?;
    Ok(log)
}

pub fn quaternion_from_rotation(r: &SO3) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r.matrix()));
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    [s * q.w, s * q.i, s * q.j, s * q.k]
}

pub fn rotation_from_quaternion(q: [f64; 4]) -> SO3 {
    let u = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    SO3::from_matrix_unchecked(*u.to_rotation_matrix().matrix())
}

/// Writes a trajectory as `t, qw, qx, qy, qz, vx, vy, vz, px, py, pz`.
pub fn write_states(path: &Path, states: &[NavState]) -> Result<()> {
    let header: Vec<String> = STATE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let rows = states.iter().map(|s| {
        let mut rec = vec![fmt_f64(s.t)];
        rec.extend(quaternion_from_rotation(&s.rot).iter().map(|x| fmt_f64(*x)));
        push_vec(&mut rec, &s.vel);
        push_vec(&mut rec, &s.pos);
        rec
    });
    write_atomic(path, &to_csv(&header, rows)?)
}

pub fn read_states(path: &Path) -> Result<Vec<NavState>> {
    let (mut rdr, header) = reader(path)?;
    let expected: Vec<String> = STATE_COLUMNS.iter().map(|s| s.to_string()).collect();
    check_header(path, &header, &expected)?;
    let file = path.display().to_string();
    let mut out: Vec<NavState> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(parse_error(path, line, "", e.to_string()));
            }
        }
        let line = record.position().map_or(0, |p| p.line());
        let f = Fields {
            file: &file,
            header: &header,
            record: &record,
            line,
        };
        f.check_width()?;
        let q = [f.f64(1)?, f.f64(2)?, f.f64(3)?, f.f64(4)?];
        let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 1e-6) {
            return Err(f.err(1, "quaternion has zero norm"));
        }
        let s = NavState {
            t: f.f64(0)?,
            rot: rotation_from_quaternion(q),
            vel: f.vec3(5)?,
            pos: f.vec3(8)?,
        };
        if let Some(prev) = out.last() {
            if !(s.t > prev.t) {
                return Err(CliError::NonMonotonicTime { file, line, t: s.t });
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// Samples `states` at `times`. Rotations are interpolated along the
/// geodesic (slerp), velocity and position linearly; a time that matches a
/// sample exactly returns that sample unchanged.
pub fn interpolate_states(states: &[NavState], times: &[f64]) -> Result<Vec<NavState>> {
    let (Some(first), Some(last)) = (states.first(), states.last()) else {
        return Err(CliError::Other("ground truth is empty".into()));
    };
    let mut out = Vec::with_capacity(times.len());
    let mut k = 0;
    for &t in times {
        if t < first.t || t > last.t {
            return Err(CliError::Other(format!(
                "ground truth covers [{}, {}] s, sensor time {t} s is outside",
                first.t, last.t
            )));
        }
        while k + 1 < states.len() && states[k + 1].t <= t {
            k += 1;
        }
        let a = &states[k];
        if a.t == t || k + 1 == states.len() {
            out.push(NavState { t, ..*a });
            continue;
        }
        let b = &states[k + 1];
        let s = (t - a.t) / (b.t - a.t);
        let delta = a.rot.inverse().compose(&b.rot).log()?;
        out.push(NavState {
            t,
            rot: a.rot.compose(&SO3::exp(&(delta * s))),
            vel: a.vel + (b.vel - a.vel) * s,
            pos: a.pos + (b.pos - a.pos) * s,
        });
    }
    Ok(out)
}
