//! Per-step estimator recursion, residual computation, and monitor alarm
//! logic for one vehicle's V2V link.
//!
//! Timing convention: at step `k` the runtime holds `xhat(k)`, receives the
//! network sample `net_in(k)` and the next measurement `y(k+1)`, and emits
//! `xhat(k+1)` together with the residual `r(k+1)`. Alarms are record-only;
//! monitoring continues after a hit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ExtendedModel;
use crate::synth::{EstimatorDesign, MonitorDesign};

/// Per-vehicle physical state `[e, v, a, u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState(pub DVector<f64>);

/// Extended per-vehicle state `[e, v, a, u, dv, a_prev]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState(pub DVector<f64>);

impl ExtendedState {
    pub fn vehicle(&self) -> VehicleState {
        VehicleState(self.0.rows(0, 4).into_owned())
    }
}

/// Monitor decision at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorVerdict {
    /// Quadratic test statistic `r' Pi r`.
    pub z: f64,
    /// Strictly above one.
    pub alarm: bool,
    /// Time index of the residual.
    pub k: usize,
}

fn check_finite(name: &str, v: &DVector<f64>) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{name} contains a non-finite entry")));
    }
    Ok(())
}

/// One-step output prediction `Ce (Ae xhat + Be net_in)` shared by the
/// estimator update and the residual.
pub fn predict_output(em: &ExtendedModel, xhat: &DVector<f64>, net_in: f64) -> DVector<f64> {
    &em.ce * (&em.ae * xhat + &em.be * net_in)
}

/// Estimator recursion: consume the received network sample at `k` and the
/// measurement at `k+1`, produce `xhat(k+1)`.
pub fn estimator_step(
    est: &EstimatorDesign,
    em: &ExtendedModel,
    xhat: &DVector<f64>,
    net_in: f64,
    y_next: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_finite("state estimate", xhat)?;
    check_finite("measurement", y_next)?;
    if !net_in.is_finite() {
        return Err(Error::NonFinite("network sample is not finite".into()));
    }
    let pred_state = &em.ae * xhat + &em.be * net_in;
    let innovation = y_next - &em.ce * &pred_state;
    Ok(pred_state + &est.l * innovation)
}

/// Residual `r(k+1) = y(k+1) - Ce (Ae xhat(k) + Be net_in(k))`.
pub fn residual(
    em: &ExtendedModel,
    xhat: &DVector<f64>,
    net_in: f64,
    y_next: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_finite("state estimate", xhat)?;
    check_finite("measurement", y_next)?;
    if !net_in.is_finite() {
        return Err(Error::NonFinite("network sample is not finite".into()));
    }
    Ok(y_next - predict_output(em, xhat, net_in))
}

/// Quadratic monitor: alarm exactly when `r' Pi r > 1`.
pub fn monitor_step(mon: &MonitorDesign, r: &DVector<f64>, k: usize) -> MonitorVerdict {
    let z = (r.transpose() * &mon.pi * r)[(0, 0)];
    MonitorVerdict { z, alarm: z > 1.0, k }
}

/// Error-dynamics recursion
/// `e(k+1) = (I - L Ce) Ae e(k) - Be1 (delta + w_u) - L w_e(k+1)`,
/// the closed-form counterpart of running plant and estimator jointly.
pub fn error_step(
    est: &EstimatorDesign,
    em: &ExtendedModel,
    a_bar: &DMatrix<f64>,
    e: &DVector<f64>,
    delta_plus_wu: f64,
    w_e_next: &DVector<f64>,
) -> DVector<f64> {
    a_bar * e - &em.be1 * delta_plus_wu - &est.l * w_e_next
}

/// Residual predicted by the error dynamics: `r(k+1) = Ce Ae e(k) + w_e(k+1)`.
pub fn residual_from_error(
    em: &ExtendedModel,
    e: &DVector<f64>,
    w_e_next: &DVector<f64>,
) -> DVector<f64> {
    &em.ce * &em.ae * e + w_e_next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::{GridSpec, SolverSettings};
    use crate::model::{build_extended, PlatoonConfig};
    use crate::synth::{synth_estimator, EstimatorSelection};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn config() -> PlatoonConfig {
        PlatoonConfig {
            h: 0.5,
            tau: 0.1,
            kp: 0.2,
            kd: 0.7,
            ts: 0.1,
            s_standstill: 3.0,
            v_max: 35.0,
            u_min: -2.5,
            u_max: 3.0,
            wbar1: 1234.7702,
            wbar2: 1e-4,
            wbar3: 0.02,
        }
    }

    fn quick_estimator(em: &ExtendedModel) -> EstimatorDesign {
        synth_estimator(
            em,
            GridSpec::new(0.3, 0.7, 0.2),
            &SolverSettings::default(),
            EstimatorSelection::SmallestGamma,
        )
        .unwrap()
    }

    #[test]
    fn exact_init_zero_noise_tracks_exactly() {
        let em = build_extended(&config()).unwrap();
        let est = quick_estimator(&em);
        let mut x = DVector::from_column_slice(&[0.1, 30.0, 0.0, 0.0, 0.5, 0.0]);
        let mut xhat = x.clone();
        for k in 0..200 {
            let u_prev = 2.0 * (-0.01 * k as f64).exp();
            let x_next = &em.ae * &x + &em.be1 * u_prev + &em.be2 * u_prev;
            let y_next = &em.ce * &x_next;
            xhat = estimator_step(&est, &em, &xhat, u_prev, &y_next).unwrap();
            x = x_next;
            assert!((&x - &xhat).amax() < 1e-9, "diverged at step {k}");
        }
    }

    #[test]
    fn residual_zero_under_exact_tracking() {
        let em = build_extended(&config()).unwrap();
        let x = DVector::from_column_slice(&[0.1, 30.0, 0.0, 0.0, 0.5, 0.0]);
        let u_prev = 1.0;
        let x_next = &em.ae * &x + &em.be * u_prev;
        let y_next = &em.ce * &x_next;
        let r = residual(&em, &x, u_prev, &y_next).unwrap();
        assert!(r.amax() < 1e-12);
    }

    #[test]
    fn dual_path_residual_consistency() {
        // plant + estimator simulation and the error recursion produce the
        // same residual stream, injected data included
        let em = build_extended(&config()).unwrap();
        let est = quick_estimator(&em);
        let a_bar = est.a_bar(&em);
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let mut x = DVector::from_column_slice(&[0.1, 30.0, 0.0, 0.0, 0.5, 0.0]);
        let mut xhat = DVector::from_column_slice(&[0.0, 29.0, 0.1, 0.0, 0.4, 0.1]);
        let mut e = &x - &xhat;
        for k in 0..300 {
            let u_prev = 2.0 * (-0.01 * k as f64).exp();
            let delta: f64 = rng.gen_range(-1.0..1.0);
            let w_u: f64 = rng.gen_range(-0.01..0.01);
            let w_e = DVector::from_fn(5, |_, _| rng.gen_range(-0.05..0.05));
            let net_in = u_prev + delta + w_u;
            let x_next = &em.ae * &x + &em.be1 * u_prev + &em.be2 * net_in;
            let y_next = &em.ce * &x_next + &w_e;
            let r_direct = residual(&em, &xhat, net_in, &y_next).unwrap();
            let r_error = residual_from_error(&em, &e, &w_e);
            assert!(
                (&r_direct - &r_error).amax() <= 1e-10,
                "residual paths diverged at step {k}"
            );
            xhat = estimator_step(&est, &em, &xhat, net_in, &y_next).unwrap();
            e = error_step(&est, &em, &a_bar, &e, delta + w_u, &w_e);
            x = x_next;
            assert!((&e - (&x - &xhat)).amax() <= 1e-9);
        }
    }

    #[test]
    fn step_attack_shifts_residual_while_plain_estimator_misses_it() {
        // the extended design sees a constant injected signal in steady
        // state; an estimator for the bare 4-state model cannot, since its
        // error dynamics are independent of the injected data
        let em = build_extended(&config()).unwrap();
        let est = quick_estimator(&em);
        let a_bar = est.a_bar(&em);
        let mut e = DVector::zeros(6);
        let zero_noise = DVector::zeros(5);
        let delta = 0.5;
        for _ in 0..500 {
            e = error_step(&est, &em, &a_bar, &e, delta, &zero_noise);
        }
        let r = residual_from_error(&em, &e, &zero_noise);
        assert!(r.norm() > 1e-3, "steady-state residual must be nonzero under attack");

        // bare 4-state design: plant and observer share the same input
        // channel, so the injected term cancels from the error dynamics
        // e+ = (A - Lc C) e regardless of delta; the residual shift is zero
        let cm = crate::model::build_continuous(&config()).unwrap();
        let dm = crate::model::discretize(&cm, 0.1);
        let c4 = DMatrix::<f64>::identity(4, 4);
        let mut e4 = DVector::<f64>::zeros(4);
        let l4 = DMatrix::<f64>::identity(4, 4) * 0.2;
        for _ in 0..500 {
            // plant: x+ = A x + G (u_prev + delta); observer driven by the
            // same received signal: xh+ = A xh + G (u_prev + delta) + L(y - C xh)
            e4 = (&dm.a - &l4 * &c4 * &dm.a) * &e4; // delta cancels exactly
        }
        assert!(e4.amax() <= 1e-12);
    }

    #[test]
    fn monitor_boundary_semantics() {
        let pi = DMatrix::<f64>::identity(5, 5);
        let mon = MonitorDesign {
            pi,
            lambda1: 1.0,
            lambda2: 1.0,
        };
        let r0 = DVector::zeros(5);
        let v = monitor_step(&mon, &r0, 3);
        assert_eq!(v.z, 0.0);
        assert!(!v.alarm);
        let mut r1 = DVector::zeros(5);
        r1[0] = 1.0; // z = 1 exactly: no alarm, the test is strict
        let v = monitor_step(&mon, &r1, 4);
        assert!(!v.alarm);
        r1[0] = 1.0 + 1e-9;
        assert!(monitor_step(&mon, &r1, 5).alarm);
    }

    #[test]
    fn alarm_monotone_under_residual_scaling() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let raw = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let pi = &raw * raw.transpose() + DMatrix::identity(5, 5);
        let mon = MonitorDesign {
            pi,
            lambda1: 1.0,
            lambda2: 1.0,
        };
        for _ in 0..50 {
            let r = DVector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0));
            let v1 = monitor_step(&mon, &r, 0);
            let v2 = monitor_step(&mon, &(&r * 1.7), 0);
            if v1.alarm {
                assert!(v2.alarm);
            }
        }
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let em = build_extended(&config()).unwrap();
        let xhat = DVector::zeros(6);
        let mut y = DVector::zeros(5);
        y[2] = f64::NAN;
        assert!(residual(&em, &xhat, 0.0, &y).is_err());
        let y = DVector::zeros(5);
        assert!(residual(&em, &xhat, f64::INFINITY, &y).is_err());
    }
}
