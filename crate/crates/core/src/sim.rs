//! Monte-Carlo simulation of platoon, estimator, and monitor under noise
//! and attack policies, plus the link-level batches used to validate the
//! reachable-set bound empirically.
//!
//! Runs are embarrassingly parallel; per-run randomness is counter-based
//! (seed, run, vehicle, purpose, step), so a log is bit-identical for a
//! given scenario and seed no matter how work is scheduled, and noise
//! streams never depend on the attack policy (paired comparisons reuse the
//! exact same disturbances).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::attack::{gen_noise, AttackKind, AttackPolicy, NoisePolicy, StealthyAttacker};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, map_indexed_seq};
use crate::model::{build_all, build_lead_model, DiscreteModel, ExtendedModel, PlatoonConfig};
use crate::reach::{alpha_schedule, schur_project};
use crate::runtime::{estimator_step, monitor_step, residual};
use crate::synth::{EstimatorDesign, MonitorDesign, ReachShape};

/// Sampled exogenous signal templates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SignalSpec {
    Constant { value: f64 },
    Step { value: f64, at: usize },
    DecayExp { amplitude: f64, rate: f64 },
    Piecewise { points: Vec<(usize, f64)> },
}

impl SignalSpec {
    pub fn sample(&self, k: usize) -> f64 {
        match self {
            SignalSpec::Constant { value } => *value,
            SignalSpec::Step { value, at } => {
                if k >= *at {
                    *value
                } else {
                    0.0
                }
            }
            SignalSpec::DecayExp { amplitude, rate } => amplitude * (-rate * k as f64).exp(),
            SignalSpec::Piecewise { points } => points
                .iter()
                .rev()
                .find(|(t, _)| k >= *t)
                .map_or(0.0, |(_, v)| *v),
        }
    }
}

/// How the head of the string is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadMode {
    /// The signal is the external drive of a virtual reference vehicle;
    /// vehicle 1 follows it like any other link.
    ViaLeadModel,
    /// The signal *is* the first vehicle's desired acceleration; vehicle 1
    /// is a source and simulation starts at vehicle 2.
    DirectSignal,
}

/// How the estimator state is initialized relative to the true state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EstimatorInit {
    Exact,
    Zero,
    /// True state plus a uniform perturbation of the given half-width.
    Perturbed { scale: f64 },
}

/// Monte-Carlo scenario description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub cfg: PlatoonConfig,
    pub n_vehicles: usize,
    pub horizon: usize,
    pub lead_input: SignalSpec,
    pub lead_mode: LeadMode,
    /// Initial `[e, v, a, u]` per vehicle (vehicle 1 first).
    pub init: Vec<[f64; 4]>,
    pub estimator_init: EstimatorInit,
    pub noise: NoisePolicy,
    /// One policy per monitored link (vehicle `i >= 2`); shorter lists are
    /// padded with no-attack.
    pub attack: Vec<AttackPolicy>,
    pub runs: usize,
    pub seed: u64,
    /// Steps discarded before steady-state statistics.
    pub burn_in: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if self.n_vehicles < 2 {
            return Err(Error::InvalidConfig {
                field: "n_vehicles",
                reason: format!("need at least 2 vehicles, got {}", self.n_vehicles),
            });
        }
        if self.horizon < 1 {
            return Err(Error::InvalidConfig {
                field: "horizon",
                reason: "horizon must be at least 1".into(),
            });
        }
        if self.runs < 1 {
            return Err(Error::InvalidConfig {
                field: "runs",
                reason: "need at least one run".into(),
            });
        }
        if self.init.len() != self.n_vehicles {
            return Err(Error::InvalidConfig {
                field: "init",
                reason: format!(
                    "{} initial states for {} vehicles",
                    self.init.len(),
                    self.n_vehicles
                ),
            });
        }
        for (i, x) in self.init.iter().enumerate() {
            if x[1] < 0.0 || x[1] > self.cfg.v_max {
                return Err(Error::InvalidConfig {
                    field: "init",
                    reason: format!(
                        "vehicle {} initial velocity {} outside [0, {}]",
                        i + 1,
                        x[1],
                        self.cfg.v_max
                    ),
                });
            }
        }
        for a in &self.attack {
            a.validate()?;
        }
        if self.burn_in >= self.horizon {
            return Err(Error::InvalidConfig {
                field: "burn_in",
                reason: format!(
                    "burn-in {} must be below the horizon {}",
                    self.burn_in, self.horizon
                ),
            });
        }
        Ok(())
    }
}

/// One logged step of one monitored vehicle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub run: usize,
    pub vehicle: usize,
    pub k: usize,
    pub x: [f64; 4],
    pub xhat: Vec<f64>,
    pub r: Vec<f64>,
    pub z: f64,
    pub alarm: bool,
    pub delta: f64,
}

/// Whether per-step records are retained or only aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    Full,
    SummaryOnly,
}

/// Aggregated statistics of a platoon batch.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct PlatoonSummary {
    pub runs: usize,
    pub horizon: usize,
    pub monitored_vehicles: usize,
    /// Alarm statistics after burn-in.
    pub post_burnin_steps: usize,
    pub post_burnin_alarms: usize,
    pub max_z_post_burnin: f64,
    /// Residual pairs (first two coordinates) outside the projected
    /// monitor ellipse, after burn-in.
    pub proj_ellipse_violations: usize,
    /// Estimation-error ISS envelope violations (attack-free links only).
    pub iss_envelope_violations: usize,
    /// Greatest estimation-error norm seen after burn-in.
    pub max_error_post_burnin: f64,
    /// Greatest vehicle-state norm over the batch.
    pub max_state_norm: f64,
    /// Stealthy-attack bookkeeping.
    pub attack_steps: usize,
    pub attack_infeasible_steps: usize,
}

impl PlatoonSummary {
    pub fn alarm_rate(&self) -> f64 {
        if self.post_burnin_steps == 0 {
            0.0
        } else {
            self.post_burnin_alarms as f64 / self.post_burnin_steps as f64
        }
    }

    fn merge(&mut self, o: &PlatoonSummary) {
        self.post_burnin_steps += o.post_burnin_steps;
        self.post_burnin_alarms += o.post_burnin_alarms;
        self.max_z_post_burnin = self.max_z_post_burnin.max(o.max_z_post_burnin);
        self.proj_ellipse_violations += o.proj_ellipse_violations;
        self.iss_envelope_violations += o.iss_envelope_violations;
        self.max_error_post_burnin = self.max_error_post_burnin.max(o.max_error_post_burnin);
        self.max_state_norm = self.max_state_norm.max(o.max_state_norm);
        self.attack_steps += o.attack_steps;
        self.attack_infeasible_steps += o.attack_infeasible_steps;
    }
}

/// Full batch output: optional per-step records plus aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub records: Vec<StepRecord>,
    pub summary: PlatoonSummary,
    pub seed: u64,
}

/// Per-vehicle synthesized designs used by the runtime.
#[derive(Debug, Clone)]
pub struct LinkDesign {
    pub estimator: EstimatorDesign,
    pub monitor: MonitorDesign,
}

/// RNG stream ids, combined as `run * STRIDE + vehicle * 8 + purpose`.
mod purpose {
    pub const MEAS_NOISE: u64 = 0;
    pub const CHAN_NOISE: u64 = 1;
    pub const EST_INIT: u64 = 2;
    pub const ATTACK: u64 = 3;
    pub const STRIDE: u64 = 1 << 20;
}

fn stream_id(run: usize, vehicle: usize, p: u64) -> u64 {
    run as u64 * purpose::STRIDE + vehicle as u64 * 8 + p
}

/// Precomputed per-batch data shared by every run.
struct PlatoonCtx {
    dm: DiscreteModel,
    em: ExtendedModel,
    lead: DiscreteModel,
    pi_proj: DMatrix<f64>,
    /// ISS envelope constants `c`, `lambda` from the Lyapunov certificate.
    c_env: f64,
    lam_env: f64,
}

impl PlatoonCtx {
    fn new(s: &Scenario, design: &LinkDesign) -> Result<Self> {
        let (dm, em) = build_all(&s.cfg)?;
        let lead = build_lead_model(&s.cfg)?;
        let pi_proj = schur_project(&design.monitor.pi, 2)?;
        let lam_max = crate::linalg::max_eig_sym(&design.estimator.p_lyap);
        Ok(Self {
            dm,
            em,
            lead,
            pi_proj,
            c_env: (design.estimator.mu2 * lam_max).sqrt(),
            lam_env: (1.0 - design.estimator.alpha_decay).sqrt(),
        })
    }
}

/// Simulate the scenario and aggregate. The one design applies to every
/// monitored link (the platoon is homogeneous).
pub fn run_scenario(s: &Scenario, design: &LinkDesign, mode: RecordMode) -> Result<TrajectoryLog> {
    s.validate()?;
    let ctx = PlatoonCtx::new(s, design)?;
    let per_run = map_indexed(s.runs, |run| simulate_platoon_run(s, design, &ctx, run, mode));
    reduce_platoon(s, per_run)
}

/// Single-threaded reference path for [`run_scenario`]; both paths produce
/// identical logs.
pub fn run_scenario_seq(
    s: &Scenario,
    design: &LinkDesign,
    mode: RecordMode,
) -> Result<TrajectoryLog> {
    s.validate()?;
    let ctx = PlatoonCtx::new(s, design)?;
    let per_run = map_indexed_seq(s.runs, |run| simulate_platoon_run(s, design, &ctx, run, mode));
    reduce_platoon(s, per_run)
}

fn reduce_platoon(
    s: &Scenario,
    per_run: Vec<Result<(Vec<StepRecord>, PlatoonSummary)>>,
) -> Result<TrajectoryLog> {
    let mut records = Vec::new();
    let mut summary = PlatoonSummary {
        runs: s.runs,
        horizon: s.horizon,
        monitored_vehicles: s.n_vehicles - 1,
        ..Default::default()
    };
    for r in per_run {
        let (recs, sm) = r?;
        records.extend(recs);
        summary.merge(&sm);
    }
    Ok(TrajectoryLog {
        records,
        summary,
        seed: s.seed,
    })
}

fn simulate_platoon_run(
    s: &Scenario,
    design: &LinkDesign,
    ctx: &PlatoonCtx,
    run: usize,
    mode: RecordMode,
) -> Result<(Vec<StepRecord>, PlatoonSummary)> {
    let m = s.n_vehicles;
    let em = &ctx.em;
    let first_sim = match s.lead_mode {
        LeadMode::ViaLeadModel => 0,
        LeadMode::DirectSignal => 1,
    };
    let first_mon = 1usize;

    let mut lead_state = DVector::<f64>::zeros(4);
    if s.lead_mode == LeadMode::ViaLeadModel {
        lead_state[1] = s.init[0][1]; // co-moving virtual reference
    }
    let mut xe: Vec<DVector<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let x = s.init[i];
        let (v_prev, a_prev) = if i == 0 {
            match s.lead_mode {
                LeadMode::ViaLeadModel => (lead_state[1], lead_state[2]),
                LeadMode::DirectSignal => (x[1], 0.0),
            }
        } else {
            (s.init[i - 1][1], s.init[i - 1][2])
        };
        xe.push(DVector::from_column_slice(&[
            x[0],
            x[1],
            x[2],
            x[3],
            v_prev - x[1],
            a_prev,
        ]));
    }

    let mut xhat: Vec<DVector<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let h = match s.estimator_init {
            EstimatorInit::Exact => xe[i].clone(),
            EstimatorInit::Zero => DVector::zeros(6),
            EstimatorInit::Perturbed { scale } => {
                use rand::Rng;
                let mut rng =
                    crate::attack::step_rng(s.seed, stream_id(run, i, purpose::EST_INIT), 0);
                &xe[i] + DVector::from_fn(6, |_, _| rng.gen_range(-scale..scale))
            }
        };
        xhat.push(h);
    }

    let mut attackers: Vec<Option<StealthyAttacker>> = Vec::with_capacity(m);
    for i in 0..m {
        let atk = if i >= first_mon {
            let link = i - first_mon;
            let pol = s.attack.get(link).cloned().unwrap_or_else(AttackPolicy::none);
            if pol.kind != AttackKind::None {
                let e0 = &xe[i] - &xhat[i];
                let mut a = StealthyAttacker::new(
                    &pol,
                    &design.monitor,
                    &design.estimator,
                    em,
                    &ctx.dm,
                    e0,
                )?;
                a.apply_robust_shrink(&design.estimator, em, s.cfg.wbar2, s.cfg.wbar3)?;
                a.set_stream(stream_id(run, i, purpose::ATTACK));
                Some(a)
            } else {
                None
            }
        } else {
            None
        };
        attackers.push(atk);
    }

    // ISS envelope bookkeeping (attack-free links only)
    let e0_norm: Vec<f64> = (0..m).map(|i| (&xe[i] - &xhat[i]).norm()).collect();
    let mut sup_wu = vec![0.0f64; m];
    let mut sup_we = vec![0.0f64; m];

    let mut records = Vec::new();
    let mut sm = PlatoonSummary::default();
    for k in 0..s.horizon {
        let u_head = match s.lead_mode {
            LeadMode::ViaLeadModel => {
                let eps0 = s.lead_input.sample(k);
                let u0 = lead_state[3];
                lead_state =
                    &ctx.lead.a * &lead_state + &ctx.lead.b * DVector::from_column_slice(&[eps0]);
                u0
            }
            LeadMode::DirectSignal => s.lead_input.sample(k),
        };

        let mut u_prev = vec![0.0; m];
        for i in first_sim..m {
            u_prev[i] = if i == 0 || (i == 1 && s.lead_mode == LeadMode::DirectSignal) {
                u_head
            } else {
                xe[i - 1][3]
            };
        }

        for i in first_sim..m {
            let monitored = i >= first_mon;
            let (w_u, w_e_next) = if monitored {
                let (_, _, we) =
                    gen_noise(&s.noise, stream_id(run, i, purpose::MEAS_NOISE), k);
                let (_, wu, _) = gen_noise(&s.noise, stream_id(run, i, purpose::CHAN_NOISE), k);
                (wu, we)
            } else {
                (0.0, DVector::zeros(5))
            };

            let delta = match attackers[i].as_mut() {
                Some(atk) => {
                    atk.sync_error(&(&xe[i] - &xhat[i]));
                    let (d, feasible) = atk.delta(k);
                    sm.attack_steps += 1;
                    if !feasible {
                        sm.attack_infeasible_steps += 1;
                    }
                    d
                }
                None => 0.0,
            };

            let net_in = u_prev[i] + delta + w_u;
            let x_next = &em.ae * &xe[i] + &em.be1 * u_prev[i] + &em.be2 * net_in;
            if x_next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Simulation(format!(
                    "state blew up at run {run}, vehicle {}, step {k}",
                    i + 1
                )));
            }
            let y_next = &em.ce * &x_next + &w_e_next;

            if monitored {
                let r = residual(em, &xhat[i], net_in, &y_next)?;
                let verdict = monitor_step(&design.monitor, &r, k + 1);
                let post_burnin = k >= s.burn_in;
                if post_burnin {
                    sm.post_burnin_steps += 1;
                    if verdict.alarm {
                        sm.post_burnin_alarms += 1;
                    }
                    sm.max_z_post_burnin = sm.max_z_post_burnin.max(verdict.z);
                    let r2 = DVector::from_column_slice(&[r[0], r[1]]);
                    if (r2.transpose() * &ctx.pi_proj * &r2)[(0, 0)] > 1.0 {
                        sm.proj_ellipse_violations += 1;
                    }
                }
                let xhat_next = estimator_step(&design.estimator, em, &xhat[i], net_in, &y_next)?;
                let e_norm = (&x_next - &xhat_next).norm();
                if post_burnin {
                    sm.max_error_post_burnin = sm.max_error_post_burnin.max(e_norm);
                }
                if attackers[i].is_none() {
                    sup_wu[i] = sup_wu[i].max(w_u.abs());
                    sup_we[i] = sup_we[i].max(w_e_next.norm());
                    let bound = ctx.c_env * ctx.lam_env.powi((k + 1) as i32) * e0_norm[i]
                        + design.estimator.gamma * (sup_wu[i] + sup_we[i]);
                    if e_norm > bound + 1e-9 {
                        sm.iss_envelope_violations += 1;
                    }
                }
                if mode == RecordMode::Full {
                    records.push(StepRecord {
                        run,
                        vehicle: i + 1,
                        k: k + 1,
                        x: [x_next[0], x_next[1], x_next[2], x_next[3]],
                        xhat: xhat_next.iter().copied().collect(),
                        r: r.iter().copied().collect(),
                        z: verdict.z,
                        alarm: verdict.alarm,
                        delta,
                    });
                }
                xhat[i] = xhat_next;
            }
            sm.max_state_norm = sm.max_state_norm.max(x_next.rows(0, 4).norm());
            xe[i] = x_next;
        }
    }
    Ok((records, sm))
}

/// Per-step containment aggregates of a reach-validation batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReachBatchLog {
    /// Per step `k` (1-based): fraction of runs with the joint state inside
    /// the bound, and the same for the projected state.
    pub zeta_containment: Vec<f64>,
    pub x_containment: Vec<f64>,
    /// Largest normalized levels across the batch.
    pub max_zeta_level: f64,
    pub max_x_level: f64,
    /// Stealth bookkeeping: steps whose realized statistic exceeded one,
    /// and steps above the attacker's own margin.
    pub monitor_hits: usize,
    pub margin_hits: usize,
    pub attack_infeasible_steps: usize,
    pub total_steps: usize,
    /// Largest vehicle-state norm over the batch (attack-effect
    /// comparisons).
    pub max_state_norm: f64,
    pub runs: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl ReachBatchLog {
    fn empty(runs: usize, horizon: usize, seed: u64) -> Self {
        Self {
            zeta_containment: vec![0.0; horizon],
            x_containment: vec![0.0; horizon],
            max_zeta_level: 0.0,
            max_x_level: 0.0,
            monitor_hits: 0,
            margin_hits: 0,
            attack_infeasible_steps: 0,
            total_steps: 0,
            max_state_norm: 0.0,
            runs,
            horizon,
            seed,
        }
    }
}

/// Simulate the attacked closed loop (vehicle state plus estimation error)
/// under a noise policy and a stealthy attack policy, checking the reach
/// bound at every step of every run.
#[allow(clippy::too_many_arguments)]
pub fn run_reach_batch(
    dm: &DiscreteModel,
    em: &ExtendedModel,
    est: &EstimatorDesign,
    mon: &MonitorDesign,
    shape: &ReachShape,
    noise: &NoisePolicy,
    attack: &AttackPolicy,
    x1: &DVector<f64>,
    runs: usize,
    horizon: usize,
    seed: u64,
) -> Result<ReachBatchLog> {
    attack.validate()?;
    let a_bar = est.a_bar(em);
    let mut zeta1 = DVector::zeros(10);
    zeta1.rows_mut(0, 4).copy_from(x1);
    let alphas = alpha_schedule(shape, &zeta1, horizon);
    let margin = attack.margin;

    let per_run = map_indexed(runs, |run| -> Result<ReachBatchLog> {
        let mut x = x1.clone();
        let mut e = DVector::<f64>::zeros(6);
        let mut atk = StealthyAttacker::new(attack, mon, est, em, dm, e.clone())?;
        atk.apply_robust_shrink(est, em, noise.bounds.1, noise.bounds.2)?;
        atk.set_stream(stream_id(run, 1, purpose::ATTACK));

        let mut log = ReachBatchLog::empty(1, horizon, seed);
        for k in 0..horizon {
            let mut zeta = DVector::zeros(10);
            zeta.rows_mut(0, 4).copy_from(&x);
            zeta.rows_mut(4, 6).copy_from(&e);
            let alpha = alphas[k];
            if alpha > 0.0 {
                let zn = (zeta.transpose() * &shape.p_zeta * &zeta)[(0, 0)] / alpha;
                let xn = (x.transpose() * &shape.p_x * &x)[(0, 0)] / alpha;
                log.max_zeta_level = log.max_zeta_level.max(zn);
                log.max_x_level = log.max_x_level.max(xn);
                if zn <= 1.0 + 1e-9 {
                    log.zeta_containment[k] = 1.0;
                }
                if xn <= 1.0 + 1e-9 {
                    log.x_containment[k] = 1.0;
                }
            } else {
                log.zeta_containment[k] = 1.0;
                log.x_containment[k] = 1.0;
            }
            log.max_state_norm = log.max_state_norm.max(x.norm());

            let (wt, wu, we_next) =
                gen_noise(noise, stream_id(run, 1, purpose::MEAS_NOISE), k);
            atk.sync_error(&e);
            let (delta, feasible) = atk.delta(k);
            log.total_steps += 1;
            if !feasible {
                log.attack_infeasible_steps += 1;
            }
            let r_next = crate::runtime::residual_from_error(em, &e, &we_next);
            let z = (r_next.transpose() * &mon.pi * &r_next)[(0, 0)];
            if z > 1.0 {
                log.monitor_hits += 1;
            }
            if z > margin + 1e-9 {
                log.margin_hits += 1;
            }
            x = &dm.a * &x + &dm.b * &wt + &dm.g * delta;
            e = crate::runtime::error_step(est, em, &a_bar, &e, delta + wu, &we_next);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Simulation(format!(
                    "closed-loop state blew up at run {run}, step {k}"
                )));
            }
        }
        Ok(log)
    });

    let mut total = ReachBatchLog::empty(runs, horizon, seed);
    for r in per_run {
        let l = r?;
        for k in 0..horizon {
            total.zeta_containment[k] += l.zeta_containment[k];
            total.x_containment[k] += l.x_containment[k];
        }
        total.max_zeta_level = total.max_zeta_level.max(l.max_zeta_level);
        total.max_x_level = total.max_x_level.max(l.max_x_level);
        total.monitor_hits += l.monitor_hits;
        total.margin_hits += l.margin_hits;
        total.attack_infeasible_steps += l.attack_infeasible_steps;
        total.total_steps += l.total_steps;
        total.max_state_norm = total.max_state_norm.max(l.max_state_norm);
    }
    for k in 0..horizon {
        total.zeta_containment[k] /= runs as f64;
        total.x_containment[k] /= runs as f64;
    }
    Ok(total)
}

/// Containment report over a finished reach batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub min_zeta_containment: f64,
    pub min_x_containment: f64,
    pub max_zeta_level: f64,
    pub max_x_level: f64,
    pub stealth_violation_rate: f64,
}

/// Reduce a reach batch into the containment report used by the acceptance
/// checks.
pub fn empirical_reach(log: &ReachBatchLog) -> ContainmentReport {
    ContainmentReport {
        min_zeta_containment: log
            .zeta_containment
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
        min_x_containment: log
            .x_containment
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
        max_zeta_level: log.max_zeta_level,
        max_x_level: log.max_x_level,
        stealth_violation_rate: if log.total_steps == 0 {
            0.0
        } else {
            log.monitor_hits as f64 / log.total_steps as f64
        },
    }
}

/// Projection of the monitor ellipsoid onto a residual coordinate pair.
pub fn project_monitor_ellipse(mon: &MonitorDesign, dims: (usize, usize)) -> Result<DMatrix<f64>> {
    let n = mon.pi.nrows();
    let (i, j) = dims;
    if i >= n || j >= n || i == j {
        return Err(Error::InvalidConfig {
            field: "dims",
            reason: format!("projection pair ({i}, {j}) invalid for a {n}-dim residual"),
        });
    }
    let mut order = vec![i, j];
    order.extend((0..n).filter(|c| *c != i && *c != j));
    let perm = DMatrix::from_fn(n, n, |r, c| if order[r] == c { 1.0 } else { 0.0 });
    let permuted = &perm * &mon.pi * perm.transpose();
    schur_project(&permuted, 2)
}
