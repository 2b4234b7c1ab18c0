//! Run configuration: one TOML file describing the platoon, the synthesis
//! options, and the simulation scenario.

use platoon_risk::attack::{AttackKind, AttackPolicy, NoiseKind, NoisePolicy, NoiseAssumption};
use platoon_risk::lmi::GridSpec;
use platoon_risk::model::PlatoonConfig;
use platoon_risk::sim::{EstimatorInit, LeadMode, Scenario, SignalSpec};
use platoon_risk::synth::EstimatorSelection;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub platoon: PlatoonConfig,
    #[serde(default)]
    pub synthesis: SynthesisSection,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub assess: AssessSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisSection {
    /// Decay-parameter grid of the estimator stage.
    pub estimator_grid: GridSpec,
    /// Explicit contraction grid for the reach stage; empty selects the
    /// adaptive grid anchored at the closed loop's spectral radius.
    pub reach_grid: Vec<f64>,
    pub select: EstimatorSelection,
    pub tol_feas: f64,
    pub tol_opt: f64,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        Self {
            estimator_grid: GridSpec::default_unit(),
            reach_grid: Vec::new(),
            select: EstimatorSelection::SmallestGamma,
            tol_feas: 1e-7,
            tol_opt: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub n_vehicles: usize,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub lead_mode: LeadMode,
    pub lead_input: SignalSpec,
    pub init: Vec<[f64; 4]>,
    pub estimator_init: EstimatorInit,
    /// Retain per-step records (trajectory files) when runs are small.
    #[serde(default)]
    pub full_records: bool,
}

fn default_burn_in() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            kind: NoiseKind::UniformBall,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackSection {
    pub kind: AttackKind,
    pub margin: f64,
    pub noise_assumption: NoiseAssumption,
    pub target_direction: Option<[f64; 4]>,
    pub seed: u64,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            margin: 0.8,
            noise_assumption: NoiseAssumption::Robust,
            target_direction: None,
            seed: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AssessSection {
    /// Distance-schedule horizon.
    pub horizon: usize,
    /// Joint initial state override; defaults to the monitored vehicle's
    /// initial state with zero estimation error.
    pub zeta1: Option<Vec<f64>>,
}

impl Default for AssessSection {
    fn default() -> Self {
        Self {
            horizon: 1000,
            zeta1: None,
        }
    }
}

impl RunConfig {
    pub fn noise_policy(&self) -> platoon_risk::error::Result<NoisePolicy> {
        NoisePolicy::new(
            self.noise.kind,
            (
                self.platoon.wbar1,
                self.platoon.wbar2,
                self.platoon.wbar3,
            ),
            self.noise.seed,
        )
    }

    pub fn attack_policy(&self) -> AttackPolicy {
        AttackPolicy {
            kind: self.attack.kind,
            target_direction: self.attack.target_direction,
            margin: self.attack.margin,
            noise_assumption: self.attack.noise_assumption,
            seed: self.attack.seed,
        }
    }

    pub fn scenario(&self) -> platoon_risk::error::Result<Scenario> {
        let noise = self.noise_policy()?;
        let attack = match self.attack.kind {
            AttackKind::None => vec![],
            _ => vec![self.attack_policy(); self.scenario.n_vehicles.saturating_sub(1)],
        };
        let s = Scenario {
            cfg: self.platoon.clone(),
            n_vehicles: self.scenario.n_vehicles,
            horizon: self.scenario.horizon,
            lead_input: self.scenario.lead_input.clone(),
            lead_mode: self.scenario.lead_mode,
            init: self.scenario.init.clone(),
            estimator_init: self.scenario.estimator_init,
            noise,
            attack,
            runs: self.scenario.runs,
            seed: self.scenario.seed,
            burn_in: self.scenario.burn_in,
        };
        s.validate()?;
        Ok(s)
    }
}
