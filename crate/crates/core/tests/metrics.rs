mod common;

use common::*;
use nanol::error::Error;
use nanol::lie::{Vec3, SO3};
use nanol::metrics::*;
use proptest::prelude::*;

fn wavy(n: usize, dt: f64, t0: f64) -> Vec<NavState> {
    (0..n)
        .map(|k| {
            let s = k as f64 * dt;
            NavState {
                t: t0 + s,
                rot: SO3::exp(&Vec3::new(0.2 * s.sin(), 0.1 * s, -0.3 * (0.5 * s).cos())),
                vel: Vec3::new(s.cos(), -s.sin(), 0.2),
                pos: Vec3::new(s.sin(), s.cos(), 0.2 * s),
            }
        })
        .collect()
}

#[test]
fn constant_offset_has_zero_relative_error() {
    let gt = wavy(1001, 0.01, 0.0);
    let c = Vec3::new(0.3, -0.4, 1.2);
    let est: Vec<_> = gt.iter().map(|g| NavState { pos: g.pos + c, ..*g }).collect();
    let re = relative_error(&est, &gt, 3.0).unwrap();
    assert!(re.pos < 1e-9 && re.vel < 1e-9 && re.ori < 1e-9);
    let a = ate(&est, &gt).unwrap();
    assert!((a.pos - c.norm()).abs() < 1e-9);
    assert_eq!(a.vel, 0.0);
}

#[test]
fn linear_drift_gives_rate_times_window() {
    let gt = wavy(1001, 0.01, 0.0);
    let rate = 0.05;
    let dir = Vec3::new(1.0, 2.0, -2.0).normalize();
    let est: Vec<_> = gt
        .iter()
        .map(|g| NavState {
            pos: g.pos + dir * (rate * g.t),
            ..*g
        })
        .collect();
    let re = relative_error(&est, &gt, 3.0).unwrap();
    assert!((re.pos - 3.0 * rate).abs() < 1e-9, "{}", re.pos);
}

#[test]
fn error_series_matches_brute_force() {
    let mut r = rng(50);
    let gt = wavy(10, 0.1, 0.0);
    let est: Vec<_> = gt
        .iter()
        .map(|g| NavState {
            t: g.t,
            rot: g.rot.compose(&SO3::exp(&(normal3(&mut r) * 0.1))),
            vel: g.vel + normal3(&mut r),
            pos: g.pos + normal3(&mut r),
        })
        .collect();
    let e = error_series(&est, &gt).unwrap();
    for k in 0..10 {
        let dp = est[k].pos - gt[k].pos;
        assert!((e.pos[k] - (dp.x * dp.x + dp.y * dp.y + dp.z * dp.z).sqrt()).abs() < 1e-15);
        let rel = gt[k].rot.inverse().compose(&est[k].rot).log().unwrap();
        assert!((e.ori[k] - rel.norm()).abs() < 1e-12);
    }
    let a = ate(&est, &gt).unwrap();
    let brute = (e.pos.iter().map(|v| v * v).sum::<f64>() / 10.0).sqrt();
    assert!((a.pos - brute).abs() < 1e-15);
}

#[test]
fn metrics_ignore_a_shared_time_offset() {
    let mut r = rng(51);
    let gt = wavy(500, 0.01, 0.0);
    let est: Vec<_> = gt
        .iter()
        .map(|g| NavState {
            pos: g.pos + normal3(&mut r) * 0.01,
            ..*g
        })
        .collect();
    let shift = |s: &[NavState]| -> Vec<NavState> { s.iter().map(|x| NavState { t: x.t + 1234.5, ..*x }).collect() };
    let a = metric_report(&est, &gt, 3.0).unwrap();
    let b = metric_report(&shift(&est), &shift(&gt), 3.0).unwrap();
    assert!((a.re.pos - b.re.pos).abs() < 1e-15);
    assert_eq!(a.ate, b.ate);
}

#[test]
fn mismatched_lengths_are_rejected() {
    let gt = wavy(10, 0.1, 0.0);
    assert!(matches!(error_series(&gt[..9], &gt), Err(Error::LengthMismatch { .. })));
    assert!(matches!(ate(&gt[..9], &gt), Err(Error::LengthMismatch { .. })));
    assert!(matches!(relative_error(&gt, &gt, 5.0), Err(Error::WindowTooLong { .. })));
}

proptest! {
    #[test]
    fn rmse_is_permutation_invariant(rows in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 8), 2..6)) {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let mut rev = refs.clone();
        rev.reverse();
        let a = rmse_over_trials(&refs).unwrap();
        let b = rmse_over_trials(&rev).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }
}
