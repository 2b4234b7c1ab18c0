//! Shared fixtures and independent oracles for the integration suites.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use platoon_risk::lmi::{GridSpec, SolverSettings};
use platoon_risk::model::{build_all, DiscreteModel, ExtendedModel, PlatoonConfig};
use platoon_risk::reach::{build_closed_loop, ClosedLoopModel};
use platoon_risk::synth::{
    synth_estimator, synth_monitor, synth_reach_shape, EstimatorDesign, EstimatorSelection,
    MonitorDesign, ReachShape,
};

/// Two-vehicle design-study parameters with configurable gains and
/// sampling.
pub fn study_config(kp: f64, kd: f64, ts: f64) -> PlatoonConfig {
    PlatoonConfig {
        h: 0.5,
        tau: 0.1,
        kp,
        kd,
        ts,
        s_standstill: 3.0,
        v_max: 35.0,
        u_min: -2.5,
        u_max: 3.0,
        wbar1: 1234.7702,
        wbar2: 1e-4,
        wbar3: 0.02,
    }
}

pub fn settings() -> SolverSettings {
    SolverSettings::default()
}

/// Fully synthesized pipeline for one configuration.
pub struct Pipeline {
    pub cfg: PlatoonConfig,
    pub dm: DiscreteModel,
    pub em: ExtendedModel,
    pub est: EstimatorDesign,
    pub mon: MonitorDesign,
    pub closed: ClosedLoopModel,
    pub shape: ReachShape,
}

pub fn synth_pipeline(cfg: PlatoonConfig) -> Pipeline {
    let (dm, em) = build_all(&cfg).expect("model construction");
    let est = synth_estimator(
        &em,
        GridSpec::default_unit(),
        &settings(),
        EstimatorSelection::SmallestGamma,
    )
    .expect("estimator synthesis");
    let mon = synth_monitor(&em, &est, cfg.wbar2, cfg.wbar3, &settings()).expect("monitor");
    let closed = build_closed_loop(&dm, &em, &est).expect("closed loop");
    let shape = synth_reach_shape(
        &closed,
        &mon,
        (cfg.wbar1, cfg.wbar2, cfg.wbar3),
        None,
        &settings(),
    )
    .expect("reach shape");
    Pipeline {
        cfg,
        dm,
        em,
        est,
        mon,
        closed,
        shape,
    }
}

static SAFE: OnceLock<Pipeline> = OnceLock::new();
static RISKY: OnceLock<Pipeline> = OnceLock::new();

/// Well-tuned two-vehicle pipeline at the 10 ms sampling interval, shared
/// across the acceptance checks.
pub fn safe_pipeline() -> &'static Pipeline {
    SAFE.get_or_init(|| synth_pipeline(study_config(0.2, 0.7, 0.01)))
}

/// De-tuned (barely string-stable) pipeline at the same sampling interval.
pub fn risky_pipeline() -> &'static Pipeline {
    RISKY.get_or_init(|| synth_pipeline(study_config(0.9, 0.1, 0.01)))
}

/// Independent discretization oracle: truncated Taylor series of the
/// augmented block exponential, with its own scaling-and-squaring so the
/// 30-term truncation is always evaluated at a sub-unit argument.
pub fn taylor_zoh(
    a: &DMatrix<f64>,
    u: &DMatrix<f64>,
    ts: f64,
    terms: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = u.ncols();
    let mut aug = DMatrix::<f64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, m)).copy_from(u);
    aug *= ts;
    let norm = aug.iter().map(|v| v.abs()).fold(0.0_f64, f64::max) * (n + m) as f64;
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    aug /= 2f64.powi(s as i32);
    let mut sum = DMatrix::<f64>::identity(n + m, n + m);
    let mut term = DMatrix::<f64>::identity(n + m, n + m);
    for k in 1..=terms {
        term = &term * &aug / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    (
        sum.view((0, 0), (n, n)).into_owned(),
        sum.view((0, n), (n, m)).into_owned(),
    )
}
