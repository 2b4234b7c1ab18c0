//! Platoon and extended estimator models: continuous-time construction from
//! physical parameters and exact zero-order-hold discretization.
//!
//! Per-vehicle state is `x = [e, v, a, u]` (spacing error, velocity,
//! acceleration, desired acceleration). The extended state appends the
//! measured relative velocity and the preceding vehicle's acceleration,
//! `x_e = [e, v, a, u, dv, a_prev]`, so that false data injected on the V2V
//! link shows up in the estimator's error dynamics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, zoh};

/// Physical and controller parameters of a homogeneous platoon. One config
/// applies to every vehicle in the string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonConfig {
    /// Time-headway constant of the spacing policy (s).
    pub h: f64,
    /// Driveline dynamics constant (s).
    pub tau: f64,
    /// Proportional spacing-error gain.
    pub kp: f64,
    /// Derivative spacing-error gain.
    pub kd: f64,
    /// Sampling interval (s).
    pub ts: f64,
    /// Desired standstill distance (m).
    pub s_standstill: f64,
    /// Maximum allowed velocity (m/s).
    pub v_max: f64,
    /// Lower bound of the desired-acceleration envelope (m/s^2).
    pub u_min: f64,
    /// Upper bound of the desired-acceleration envelope (m/s^2).
    pub u_max: f64,
    /// Squared peak bound on the lumped plant disturbance vector.
    pub wbar1: f64,
    /// Squared peak bound on the V2V channel noise.
    pub wbar2: f64,
    /// Squared peak bound on the measurement noise vector.
    pub wbar3: f64,
}

impl PlatoonConfig {
    /// Check every invariant, naming the offending field on failure.
    pub fn validate(&self) -> Result<()> {
        fn pos(field: &'static str, v: f64) -> Result<()> {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig {
                    field,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
            Ok(())
        }
        pos("h", self.h)?;
        pos("tau", self.tau)?;
        pos("ts", self.ts)?;
        pos("kp", self.kp)?;
        pos("kd", self.kd)?;
        pos("v_max", self.v_max)?;
        pos("s_standstill", self.s_standstill)?;
        pos("wbar1", self.wbar1)?;
        pos("wbar2", self.wbar2)?;
        pos("wbar3", self.wbar3)?;
        if self.kd <= self.kp * self.tau {
            return Err(Error::InvalidConfig {
                field: "kd",
                reason: format!(
                    "string stability requires kd > kp*tau ({} <= {} * {})",
                    self.kd, self.kp, self.tau
                ),
            });
        }
        if self.u_min >= self.u_max {
            return Err(Error::InvalidConfig {
                field: "u_min",
                reason: format!("u_min must be below u_max ({} >= {})", self.u_min, self.u_max),
            });
        }
        Ok(())
    }
}

/// Continuous-time closed-loop model of one following vehicle,
/// `xdot = Ac x + Bc w + Gc delta`.
#[derive(Debug, Clone)]
pub struct ContinuousModel {
    pub ac: DMatrix<f64>,
    pub bc: DMatrix<f64>,
    pub gc: DVector<f64>,
}

/// Discrete-time model under zero-order hold,
/// `x(k+1) = A x(k) + B w(k) + G delta(k)`.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub g: DVector<f64>,
    pub ts: f64,
}

/// Discretized extended estimator-design model.
///
/// `x_e(k+1) = Ae x_e(k) + Be1 u_prev(k) + Be2 (u_prev + delta + w_u)(k)`,
/// `y_e(k) = Ce x_e(k) + w_e(k)`, with `Be = Be1 + Be2` the combined channel
/// the implementable estimator drives with the received signal.
///
/// `Be1` is built so the measured rows vanish identically (`Ce Be1 = 0`),
/// which the residual construction and the attack-elimination rewrite both
/// rely on; the discarded coupling is second order in the sampling interval.
#[derive(Debug, Clone)]
pub struct ExtendedModel {
    pub ae: DMatrix<f64>,
    pub be1: DVector<f64>,
    pub be2: DVector<f64>,
    pub be: DVector<f64>,
    pub ce: DMatrix<f64>,
}

impl ExtendedModel {
    /// Extended state dimension.
    pub const NX: usize = 6;
    /// Measured output dimension.
    pub const NY: usize = 5;

    /// `Ce Ae Be1`, the column through which injected data reaches the
    /// residual one step later.
    pub fn residual_gain(&self) -> DVector<f64> {
        DVector::from_iterator(
            Self::NY,
            (&self.ce * &self.ae * &self.be1).iter().copied(),
        )
    }
}

/// Continuous-time closed-loop matrices of one following vehicle.
pub fn build_continuous(cfg: &PlatoonConfig) -> Result<ContinuousModel> {
    cfg.validate()?;
    let (h, tau, kp, kd) = (cfg.h, cfg.tau, cfg.kp, cfg.kd);
    let ac = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, -1.0, -h, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, -1.0 / tau, 1.0 / tau, //
            kp / h, -kd / h, -kd, -1.0 / h,
        ],
    );
    let bc = DMatrix::from_row_slice(
        4,
        3,
        &[
            0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, //
            kp / h, kd / h, 1.0 / h,
        ],
    );
    let gc = DVector::from_column_slice(&[0.0, 0.0, 0.0, 1.0 / h]);
    Ok(ContinuousModel { ac, bc, gc })
}

/// Exact zero-order-hold discretization of a continuous model through the
/// augmented block exponential.
pub fn discretize(cm: &ContinuousModel, ts: f64) -> DiscreteModel {
    assert!(ts > 0.0, "sampling interval must be positive");
    let n_in = cm.bc.ncols();
    let mut u = DMatrix::<f64>::zeros(4, n_in + 1);
    u.view_mut((0, 0), (4, n_in)).copy_from(&cm.bc);
    u.view_mut((0, n_in), (4, 1)).copy_from(&cm.gc);
    let (a, ud) = zoh(&cm.ac, &u, ts);
    DiscreteModel {
        a,
        b: ud.view((0, 0), (4, n_in)).into_owned(),
        g: DVector::from_iterator(4, ud.view((0, n_in), (4, 1)).iter().copied()),
        ts,
    }
}

/// Continuous-time extended dynamics `(Ace, Bce1, Bce2, Ce)`.
pub fn extended_continuous(cfg: &PlatoonConfig) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, DMatrix<f64>) {
    let (h, tau, kp, kd) = (cfg.h, cfg.tau, cfg.kp, cfg.kd);
    let ace = DMatrix::from_row_slice(
        6,
        6,
        &[
            0.0, 0.0, -h, 0.0, 1.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, -1.0 / tau, 1.0 / tau, 0.0, 0.0, //
            kp / h, 0.0, -kd, -1.0 / h, kd / h, 0.0, //
            0.0, 0.0, -1.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 0.0, 0.0, 0.0, -1.0 / tau,
        ],
    );
    let bce1 = DVector::from_column_slice(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / tau]);
    let bce2 = DVector::from_column_slice(&[0.0, 0.0, 0.0, 1.0 / h, 0.0, 0.0]);
    let mut ce = DMatrix::<f64>::zeros(5, 6);
    for i in 0..5 {
        ce[(i, i)] = 1.0;
    }
    (ace, bce1, bce2, ce)
}

/// Discretize the extended dynamics and enforce the structural identities
/// the detector design depends on.
///
/// The exact hold integral of the feedforward channel leaks into the
/// measured rows at second order in `ts`; the discrete model keeps only its
/// unmeasured component so `Ce Be1 = 0` holds identically, and folds the
/// remainder into `Be2` so `Be1 + Be2` stays the exact hold integral of the
/// combined channel.
pub fn build_extended(cfg: &PlatoonConfig) -> Result<ExtendedModel> {
    cfg.validate()?;
    let (ace, bce1, bce2, ce) = extended_continuous(cfg);
    let bce = &bce1 + &bce2;
    let mut u = DMatrix::<f64>::zeros(6, 3);
    u.set_column(0, &bce1);
    u.set_column(1, &bce2);
    u.set_column(2, &bce);
    let (ae, ud) = zoh(&ace, &u, cfg.ts);
    let be1_exact = ud.column(0).into_owned();
    let be2_exact = ud.column(1).into_owned();
    let be = ud.column(2).into_owned();

    // exactness of the augmented-exponential integrals (linearity check)
    let sum_gap = (&be - (&be1_exact + &be2_exact)).amax();
    if sum_gap > 1e-10 * be.amax().max(1.0) {
        return Err(Error::ModelStructure(format!(
            "hold integrals violate linearity by {sum_gap:.3e}"
        )));
    }

    let mut be1 = DVector::zeros(6);
    be1[5] = be1_exact[5];
    let be2 = &be - &be1;

    let em = ExtendedModel { ae, be1, be2, be, ce };
    let ce_be1 = &em.ce * &em.be1;
    if ce_be1.amax() > 1e-12 {
        return Err(Error::ModelStructure(format!(
            "measured rows of the feedforward channel do not vanish: {:.3e}",
            ce_be1.amax()
        )));
    }
    let gain = em.residual_gain();
    if gain.norm() < 1e-6 {
        return Err(Error::ModelStructure(format!(
            "residual gain column is numerically zero ({:.3e}); injected data would be \
             invisible to the detector",
            gain.norm()
        )));
    }
    Ok(em)
}

/// Virtual reference vehicle the platoon leader follows, discretized like
/// the followers. Its single input is the external drive signal; the
/// returned `b` is 4x1 and `g` is zero.
pub fn build_lead_model(cfg: &PlatoonConfig) -> Result<DiscreteModel> {
    cfg.validate()?;
    let (h, tau) = (cfg.h, cfg.tau);
    let ac = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, -1.0 / tau, 1.0 / tau, //
            0.0, 0.0, 0.0, -1.0 / h,
        ],
    );
    let bc = DMatrix::from_row_slice(4, 1, &[0.0, 0.0, 0.0, 1.0 / h]);
    let (a, b) = zoh(&ac, &bc, cfg.ts);
    Ok(DiscreteModel {
        a,
        b,
        g: DVector::zeros(4),
        ts: cfg.ts,
    })
}

/// Convenience bundle: discrete per-vehicle model plus extended model.
pub fn build_all(cfg: &PlatoonConfig) -> Result<(DiscreteModel, ExtendedModel)> {
    let cm = build_continuous(cfg)?;
    let dm = discretize(&cm, cfg.ts);
    let em = build_extended(cfg)?;
    Ok((dm, em))
}

/// Spectral radius of the extended plant matrix; the extended model carries
/// a pure velocity integrator, so this is exactly 1 for any valid config.
pub fn extended_spectral_radius(em: &ExtendedModel) -> f64 {
    spectral_radius(&em.ae)
}
