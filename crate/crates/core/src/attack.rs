//! Admissible noise generation and constructive stealthy attackers for
//! empirical validation of the reachable-set bound.
//!
//! Sampling is counter-based: every draw is a pure function of
//! `(seed, stream, step)`, so runs are reproducible under any scheduling
//! and policies never share or consume each other's randomness.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiscreteModel, ExtendedModel};
use crate::synth::{EstimatorDesign, MonitorDesign};

/// How noise samples are placed inside their bounding balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Uniform over the solid ball.
    UniformBall,
    /// Uniform over the boundary sphere (bounds met with equality).
    Boundary,
    /// Deterministic extreme point: the all-ones direction scaled to the
    /// boundary, the same at every step.
    WorstCorner,
}

/// Bounded-noise source for the three disturbance channels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoisePolicy {
    pub kind: NoiseKind,
    /// Squared peak bounds `(wbar1, wbar2, wbar3)`.
    pub bounds: (f64, f64, f64),
    pub seed: u64,
}

impl NoisePolicy {
    pub fn new(kind: NoiseKind, bounds: (f64, f64, f64), seed: u64) -> Result<Self> {
        let (w1, w2, w3) = bounds;
        if !(w1 > 0.0 && w2 > 0.0 && w3 > 0.0) {
            return Err(Error::InvalidConfig {
                field: "bounds",
                reason: format!(
                    "noise bounds must be strictly positive, got ({w1}, {w2}, {w3}); a zero \
                     bound collapses the admissible set"
                ),
            });
        }
        Ok(Self { kind, bounds, seed })
    }
}

/// SplitMix64 step, used to derive independent sub-seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic RNG for a `(seed, stream, step)` triple.
pub fn step_rng(seed: u64, stream: u64, k: usize) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(mix(seed ^ mix(stream) ^ mix(k as u64 ^ 0xa076_1d64_78bd_642f)))
}

fn gaussian(rng: &mut ChaCha12Rng) -> f64 {
    // Box-Muller; the counter-based scheme draws fresh uniforms per call
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn ball_sample(rng: &mut ChaCha12Rng, dim: usize, radius: f64, surface: bool) -> DVector<f64> {
    let mut v = DVector::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    if n == 0.0 {
        v[0] = 1.0;
    } else {
        v /= n;
    }
    let r = if surface {
        radius
    } else {
        radius * rng.gen_range(0.0f64..=1.0).powf(1.0 / dim as f64)
    };
    v * r
}

/// Noise draw for one step: `(w_tilde, w_u, w_e)` satisfying the quadratic
/// bounds, with equality for the boundary kinds.
pub fn gen_noise(policy: &NoisePolicy, stream: u64, k: usize) -> (DVector<f64>, f64, DVector<f64>) {
    let (w1, w2, w3) = policy.bounds;
    match policy.kind {
        NoiseKind::WorstCorner => {
            let dir3 = DVector::from_element(3, 1.0 / 3f64.sqrt());
            let dir5 = DVector::from_element(5, 1.0 / 5f64.sqrt());
            (dir3 * w1.sqrt(), w2.sqrt(), dir5 * w3.sqrt())
        }
        kind => {
            let surface = kind == NoiseKind::Boundary;
            let mut rng = step_rng(policy.seed, stream, k);
            let wt = ball_sample(&mut rng, 3, w1.sqrt(), surface);
            let wu = {
                let s: f64 = if surface {
                    1.0
                } else {
                    rng.gen_range(0.0f64..=1.0)
                };
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                sign * s * w2.sqrt()
            };
            let we = ball_sample(&mut rng, 5, w3.sqrt(), surface);
            (wt, wu, we)
        }
    }
}

/// What the stealthy attacker assumes about noise it cannot observe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseAssumption {
    /// Target residuals up to the margin and let realized noise spill over
    /// it occasionally.
    Zero,
    /// Shrink the target set by the worst-case noise reach so realized
    /// residuals never exceed the margin.
    Robust,
}

/// Attacker behavior on one V2V link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackPolicy {
    pub kind: AttackKind,
    /// State direction a greedy attacker pushes toward; defaults to the
    /// collision direction when absent.
    pub target_direction: Option<[f64; 4]>,
    /// Fraction of the monitor ellipsoid the attacker aims inside, in (0, 1].
    pub margin: f64,
    pub noise_assumption: NoiseAssumption,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    RandomStealthy,
    GreedyDirection,
}

impl AttackPolicy {
    pub fn none() -> Self {
        Self {
            kind: AttackKind::None,
            target_direction: None,
            margin: 1.0,
            noise_assumption: NoiseAssumption::Robust,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin <= 1.0) {
            return Err(Error::InvalidConfig {
                field: "margin",
                reason: format!("margin must lie in (0, 1], got {}", self.margin),
            });
        }
        Ok(())
    }
}

/// Precomputed data for a model-aware stealthy attacker on one link. The
/// attacker carries its own copy of the estimation-error state; callers
/// feed back the realized noises so the copy tracks the true error exactly
/// (a worst-case adversary for validation purposes).
#[derive(Debug, Clone)]
pub struct StealthyAttacker {
    policy: AttackPolicy,
    /// Monitor shape.
    pi: DMatrix<f64>,
    /// `Ce Ae (I - L Ce) Ae`: error state to two-step residual.
    ca_abar: DMatrix<f64>,
    /// `Ce Ae Be1`: injected data to two-step residual.
    gain: DVector<f64>,
    /// `gain' Pi gain`.
    qa: f64,
    /// Radius of the targetable residual set in the monitor metric.
    r_det: f64,
    /// Inverse upper Cholesky factor of Pi, for target sampling.
    pi_chol_inv: DMatrix<f64>,
    /// Which interval endpoint the greedy policy takes.
    greedy_sign: f64,
    /// Attacker-side copy of the estimation error.
    e_copy: DVector<f64>,
    /// RNG stream decoupling this attacker from every other draw source.
    stream: u64,
}

impl StealthyAttacker {
    pub fn new(
        policy: &AttackPolicy,
        mon: &MonitorDesign,
        est: &EstimatorDesign,
        em: &ExtendedModel,
        dm: &DiscreteModel,
        e_init: DVector<f64>,
    ) -> Result<Self> {
        policy.validate()?;
        let a_bar = est.a_bar(em);
        let ca = &em.ce * &em.ae;
        let gain = em.residual_gain();
        let qa = (gain.transpose() * &mon.pi * &gain)[(0, 0)];
        if qa <= 0.0 {
            return Err(Error::ModelStructure(
                "residual gain is null in the monitor metric".into(),
            ));
        }
        let pi_chol = crate::linalg::chol_upper(&mon.pi)?;
        let pi_chol_inv = pi_chol
            .lu()
            .solve(&DMatrix::identity(5, 5))
            .ok_or_else(|| Error::NumericalFailure("monitor factor not invertible".into()))?;

        // greedy direction: steady-state gain from injected data to the
        // target direction decides which interval end to take
        let dir = policy
            .target_direction
            .map(|d| DVector::from_column_slice(&d))
            .unwrap_or_else(|| DVector::from_column_slice(&[-1.0, -0.5, 0.0, 0.0]));
        let eye4 = DMatrix::<f64>::identity(4, 4);
        let dc = (&eye4 - &dm.a)
            .lu()
            .solve(&DMatrix::from_fn(4, 1, |i, _| dm.g[i]))
            .map(|x| (dir.transpose() * x)[(0, 0)])
            .unwrap_or(1.0);
        Ok(Self {
            policy: policy.clone(),
            pi: mon.pi.clone(),
            ca_abar: &ca * &a_bar,
            gain,
            qa,
            r_det: policy.margin.sqrt(),
            pi_chol_inv,
            greedy_sign: if dc >= 0.0 { 1.0 } else { -1.0 },
            e_copy: e_init,
            stream: 0,
        })
    }

    /// Pin the RNG stream for this attacker instance (one per run/link).
    pub fn set_stream(&mut self, stream: u64) {
        self.stream = stream;
    }

    /// Shrink the targetable set by the worst-case monitor-metric reach of
    /// the noise the attacker cannot observe, for robust stealthiness.
    pub fn apply_robust_shrink(
        &mut self,
        est: &EstimatorDesign,
        em: &ExtendedModel,
        wbar2: f64,
        wbar3: f64,
    ) -> Result<()> {
        if self.policy.noise_assumption != NoiseAssumption::Robust {
            return Ok(());
        }
        let pi_sqrt = crate::linalg::chol_upper(&self.pi)?;
        let ca = &em.ce * &em.ae;
        let smax = |m: &DMatrix<f64>| -> f64 {
            m.clone().svd(false, false).singular_values[0]
        };
        let rho = wbar3.sqrt() * smax(&pi_sqrt)
            + wbar3.sqrt() * smax(&(&pi_sqrt * &ca * &est.l))
            + wbar2.sqrt() * {
                let g = &ca * DMatrix::from_fn(6, 1, |i, _| em.be1[i]);
                smax(&(&pi_sqrt * g))
            };
        self.r_det = (self.policy.margin.sqrt() - rho).max(0.0);
        Ok(())
    }

    /// Residual-space radius the attacker currently targets.
    pub fn target_radius(&self) -> f64 {
        self.r_det
    }

    /// Choose the injected value for step `k` from the attacker's error
    /// copy. Returns `(delta, feasible)`; an infeasible step falls back to
    /// the residual-centering value and is flagged.
    pub fn delta(&self, k: usize) -> (f64, bool) {
        match self.policy.kind {
            AttackKind::None => (0.0, true),
            kind => {
                let v = &self.ca_abar * &self.e_copy;
                let qb = -2.0 * (self.gain.transpose() * &self.pi * &v)[(0, 0)];
                let qc = (v.transpose() * &self.pi * &v)[(0, 0)] - self.r_det * self.r_det;
                let center = -qb / (2.0 * self.qa);
                let disc = qb * qb - 4.0 * self.qa * qc;
                if disc <= 0.0 || self.r_det <= 0.0 {
                    return (center, false);
                }
                let half = disc.sqrt() / (2.0 * self.qa);
                let (lo, hi) = (center - half, center + half);
                let delta = match kind {
                    AttackKind::GreedyDirection => {
                        if self.greedy_sign > 0.0 {
                            hi
                        } else {
                            lo
                        }
                    }
                    AttackKind::RandomStealthy => {
                        let mut rng =
                            step_rng(self.policy.seed, self.stream ^ 0x5eed_a77a, k);
                        let ball = ball_sample(&mut rng, 5, self.r_det, false);
                        let target = &self.pi_chol_inv * ball;
                        let raw = (self.gain.transpose() * &self.pi * (&v - &target))[(0, 0)]
                            / self.qa;
                        raw.clamp(lo, hi)
                    }
                    AttackKind::None => unreachable!(),
                };
                (delta, true)
            }
        }
    }

    /// Advance the attacker's error copy with the realized inputs (the
    /// validation adversary observes the noise after the fact, so the copy
    /// equals the true error).
    pub fn observe(
        &mut self,
        est: &EstimatorDesign,
        em: &ExtendedModel,
        a_bar: &DMatrix<f64>,
        delta: f64,
        w_u: f64,
        w_e_next: &DVector<f64>,
    ) {
        self.e_copy =
            crate::runtime::error_step(est, em, a_bar, &self.e_copy, delta + w_u, w_e_next);
    }

    /// Overwrite the attacker's error copy (used when the simulator grants
    /// exact state knowledge).
    pub fn sync_error(&mut self, e: &DVector<f64>) {
        self.e_copy = e.clone();
    }

    pub fn kind(&self) -> AttackKind {
        self.policy.kind
    }
}
