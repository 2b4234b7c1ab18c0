//! Command-line pipeline: synthesize detector designs, assess stealthy
//! attack risk, and validate by Monte-Carlo simulation.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use platoon_risk::attack::AttackKind;
use platoon_risk::error::Error as CoreError;
use platoon_risk::lmi::SolverSettings;
use platoon_risk::model::build_all;
use platoon_risk::reach::{assess_risk, build_closed_loop, CriticalSet};
use platoon_risk::sim::{
    empirical_reach, run_reach_batch, run_scenario, LinkDesign, RecordMode, TrajectoryLog,
};
use platoon_risk::synth::{synth_estimator, synth_monitor, synth_reach_shape, SynthesisResult};

use config::RunConfig;

const EXIT_VALIDATION: i32 = 2;
const EXIT_INFEASIBLE: i32 = 3;
const EXIT_NUMERICAL: i32 = 4;
const EXIT_MISMATCH: i32 = 5;

#[derive(Parser)]
#[command(
    name = "platoon-risk",
    about = "Detector synthesis and stealthy-attack risk assessment for CACC platoons",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output root; each run writes into a fresh subdirectory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the estimator grid step.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Override the simulation horizon.
    #[arg(long)]
    horizon: Option<usize>,
    /// Override the Monte-Carlo run count.
    #[arg(long)]
    runs: Option<usize>,
    /// Solver feasibility tolerance.
    #[arg(long)]
    tol_feas: Option<f64>,
    /// Solver optimality tolerance.
    #[arg(long)]
    tol_opt: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize estimator gain, monitor shape, and reach-set shape.
    Synth(CommonOpts),
    /// Evaluate the distance-to-critical-states schedule and verdict.
    Assess {
        #[command(flatten)]
        common: CommonOpts,
        /// Directory holding a previous `synth` run's artifacts.
        #[arg(long)]
        artifacts: PathBuf,
    },
    /// Monte-Carlo validation of monitor and reach bounds.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Directory holding a previous `synth` run's artifacts.
        #[arg(long)]
        artifacts: PathBuf,
    },
    /// Synth, assess, and simulate in one run directory.
    Full(CommonOpts),
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Manifest {
    toolkit_version: String,
    config_path: String,
    config_sha256: String,
    tol_feas: f64,
    tol_opt: f64,
    scenario_seed: u64,
    noise_seed: u64,
    attack_seed: u64,
    stages: Vec<StageInfo>,
    artifacts: Vec<ArtifactInfo>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct StageInfo {
    name: String,
    wall_clock_s: f64,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ArtifactInfo {
    name: String,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::InvalidConfig { .. }) | Some(CoreError::CriticalSet(..)) => EXIT_VALIDATION,
        Some(CoreError::Infeasible(..)) | Some(CoreError::AllGridPointsFailed(..)) => {
            EXIT_INFEASIBLE
        }
        Some(CoreError::NumericalFailure(..))
        | Some(CoreError::ModelStructure(..))
        | Some(CoreError::Projection(..))
        | Some(CoreError::SynthesisPostCheck(..)) => EXIT_NUMERICAL,
        _ => {
            if err.to_string().contains("artifact mismatch") {
                EXIT_MISMATCH
            } else if err.to_string().contains("config parse error") {
                EXIT_VALIDATION
            } else {
                1
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(c) => cmd_synth(&c).map(|_| ()),
        Command::Assess { common, artifacts } => cmd_assess(&common, &artifacts),
        Command::Simulate { common, artifacts } => cmd_simulate(&common, &artifacts),
        Command::Full(c) => cmd_full(&c),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code_for(&e));
    }
}

struct LoadedConfig {
    cfg: RunConfig,
    raw: Vec<u8>,
    hash: String,
    path: PathBuf,
}

fn load_config(common: &CommonOpts) -> anyhow::Result<LoadedConfig> {
    let raw = fs::read(&common.config)
        .with_context(|| format!("reading config {}", common.config.display()))?;
    let mut cfg: RunConfig = toml::from_str(std::str::from_utf8(&raw)?)
        .map_err(|e| anyhow!("config parse error: {e}"))?;
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(step) = common.grid_step {
        cfg.synthesis.estimator_grid.step = step;
    }
    if let Some(h) = common.horizon {
        cfg.scenario.horizon = h;
        cfg.assess.horizon = h;
    }
    if let Some(r) = common.runs {
        cfg.scenario.runs = r;
    }
    if let Some(t) = common.tol_feas {
        cfg.synthesis.tol_feas = t;
    }
    if let Some(t) = common.tol_opt {
        cfg.synthesis.tol_opt = t;
    }
    cfg.platoon.validate().map_err(anyhow::Error::from)?;
    let hash = sha256_hex(&raw);
    Ok(LoadedConfig {
        cfg,
        raw,
        hash,
        path: common.config.clone(),
    })
}

fn make_run_dir(out_root: &Path, config_hash: &str) -> anyhow::Result<PathBuf> {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH)?.as_nanos();
    let dir = out_root.join(format!("{}-{}", &config_hash[..12], nanos));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

struct RunContext {
    loaded: LoadedConfig,
    dir: PathBuf,
    manifest: Manifest,
}

impl RunContext {
    fn new(common: &CommonOpts) -> anyhow::Result<Self> {
        let loaded = load_config(common)?;
        let dir = make_run_dir(&common.out, &loaded.hash)?;
        // keep a copy of the exact config the run used
        fs::write(dir.join("config.toml"), &loaded.raw)?;
        let manifest = Manifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config_path: loaded.path.display().to_string(),
            config_sha256: loaded.hash.clone(),
            tol_feas: loaded.cfg.synthesis.tol_feas,
            tol_opt: loaded.cfg.synthesis.tol_opt,
            scenario_seed: loaded.cfg.scenario.seed,
            noise_seed: loaded.cfg.noise.seed,
            attack_seed: loaded.cfg.attack.seed,
            stages: Vec::new(),
            artifacts: Vec::new(),
        };
        Ok(Self {
            loaded,
            dir,
            manifest,
        })
    }

    fn settings(&self) -> SolverSettings {
        SolverSettings {
            feas_tol: self.loaded.cfg.synthesis.tol_feas,
            opt_tol: self.loaded.cfg.synthesis.tol_opt,
            max_iter: 400,
        }
    }

    fn write_artifact(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.manifest.artifacts.push(ArtifactInfo {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> anyhow::Result<T>,
    ) -> anyhow::Result<T> {
        let t0 = Instant::now();
        let out = f(self)?;
        self.manifest.stages.push(StageInfo {
            name: name.to_string(),
            wall_clock_s: t0.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    fn finish(&mut self) -> anyhow::Result<()> {
        let manifest = serde_json::to_vec_pretty(&self.manifest)?;
        fs::write(self.dir.join("manifest.json"), manifest)?;
        println!("run directory: {}", self.dir.display());
        Ok(())
    }
}

fn synthesize(ctx: &mut RunContext) -> anyhow::Result<SynthesisResult> {
    let cfg = ctx.loaded.cfg.clone();
    let settings = ctx.settings();
    let (dm, em) = build_all(&cfg.platoon)?;
    let est = synth_estimator(
        &em,
        cfg.synthesis.estimator_grid,
        &settings,
        cfg.synthesis.select,
    )?;
    println!(
        "estimator: gamma = {:.4} at decay {:.2}",
        est.gamma, est.alpha_decay
    );
    let mon = synth_monitor(&em, &est, cfg.platoon.wbar2, cfg.platoon.wbar3, &settings)?;
    let closed = build_closed_loop(&dm, &em, &est)?;
    let grid = if cfg.synthesis.reach_grid.is_empty() {
        None
    } else {
        Some(cfg.synthesis.reach_grid.clone())
    };
    let shape = synth_reach_shape(
        &closed,
        &mon,
        (cfg.platoon.wbar1, cfg.platoon.wbar2, cfg.platoon.wbar3),
        grid,
        &settings,
    )?;
    println!(
        "reach shape: contraction {:.6}, -logdet {:.3}",
        shape.a, shape.objective
    );
    Ok(SynthesisResult::bundle(&est, &mon, &shape))
}

fn cmd_synth(common: &CommonOpts) -> anyhow::Result<PathBuf> {
    let mut ctx = RunContext::new(common)?;
    let design = ctx.stage("synth", synthesize)?;
    ctx.write_artifact("design.json", &serde_json::to_vec_pretty(&design)?)?;
    ctx.finish()?;
    Ok(ctx.dir)
}

fn load_artifacts(dir: &Path, config_hash: &str) -> anyhow::Result<SynthesisResult> {
    let manifest_raw = fs::read(dir.join("manifest.json"))
        .with_context(|| format!("reading {}/manifest.json", dir.display()))?;
    let manifest: Manifest = serde_json::from_slice(&manifest_raw)?;
    if manifest.config_sha256 != config_hash {
        return Err(anyhow!(
            "artifact mismatch: artifacts were produced for config {} but the supplied \
             config hashes to {}",
            manifest.config_sha256,
            config_hash
        ));
    }
    let design_raw = fs::read(dir.join("design.json"))?;
    let recorded = manifest
        .artifacts
        .iter()
        .find(|a| a.name == "design.json")
        .ok_or_else(|| anyhow!("artifact mismatch: design.json missing from manifest"))?;
    if recorded.sha256 != sha256_hex(&design_raw) {
        return Err(anyhow!(
            "artifact mismatch: design.json does not match its manifest hash"
        ));
    }
    Ok(serde_json::from_slice(&design_raw)?)
}

fn assess(ctx: &mut RunContext, design: &SynthesisResult) -> anyhow::Result<()> {
    let cfg = ctx.loaded.cfg.clone();
    let shape = design.reach_shape();
    let crit = CriticalSet::collision_and_overspeed(
        cfg.platoon.h,
        cfg.platoon.s_standstill,
        cfg.platoon.v_max,
    );
    let zeta1 = match &cfg.assess.zeta1 {
        Some(z) => {
            if z.len() != 10 {
                return Err(CoreError::InvalidConfig {
                    field: "zeta1",
                    reason: format!("expected 10 entries, got {}", z.len()),
                }
                .into());
            }
            nalgebra::DVector::from_column_slice(z)
        }
        None => {
            let x1 = cfg.scenario.init.get(1).copied().unwrap_or([0.0; 4]);
            let mut z = nalgebra::DVector::zeros(10);
            for (i, v) in x1.iter().enumerate() {
                z[i] = *v;
            }
            z
        }
    };
    let report = assess_risk(&shape, &zeta1, &crit, cfg.assess.horizon)?;
    println!(
        "risk verdict: {:?}{}",
        report.verdict,
        report
            .first_violation_k
            .map(|k| format!(" (first violation at k = {k})"))
            .unwrap_or_default()
    );
    let mut csv = String::from("k,alpha_k,d1_k,d2_k,d_k\n");
    for row in &report.schedule {
        csv.push_str(&format!(
            "{},{:.9},{:.9},{:.9},{:.9}\n",
            row.k,
            row.alpha,
            row.per_halfspace.first().copied().unwrap_or(f64::NAN),
            row.per_halfspace.get(1).copied().unwrap_or(f64::NAN),
            row.min_distance
        ));
    }
    ctx.write_artifact("dk_schedule.csv", csv.as_bytes())?;
    ctx.write_artifact("risk_report.json", &serde_json::to_vec_pretty(&report)?)?;
    Ok(())
}

fn simulate(ctx: &mut RunContext, design: &SynthesisResult) -> anyhow::Result<()> {
    let cfg = ctx.loaded.cfg.clone();
    let scenario = cfg.scenario()?;
    let link = LinkDesign {
        estimator: design.estimator(),
        monitor: design.monitor(),
    };
    let mode = if cfg.scenario.full_records {
        RecordMode::Full
    } else {
        RecordMode::SummaryOnly
    };
    let log = run_scenario(&scenario, &link, mode)?;
    println!(
        "platoon batch: {} runs x {} steps, alarm rate {:.3e} after burn-in",
        log.summary.runs,
        log.summary.horizon,
        log.summary.alarm_rate()
    );
    ctx.write_artifact("summary.json", &serde_json::to_vec_pretty(&log.summary)?)?;
    if mode == RecordMode::Full {
        write_trajectories(ctx, &log)?;
        write_plot_data(ctx, &log)?;
    }

    if cfg.attack.kind != AttackKind::None {
        let (dm, em) = build_all(&cfg.platoon)?;
        let noise = cfg.noise_policy()?;
        let attack = cfg.attack_policy();
        let shape = design.reach_shape();
        let x1 = cfg.scenario.init.get(1).copied().unwrap_or([0.0; 4]);
        let x1 = nalgebra::DVector::from_column_slice(&x1);
        let batch = run_reach_batch(
            &dm,
            &em,
            &design.estimator(),
            &design.monitor(),
            &shape,
            &noise,
            &attack,
            &x1,
            scenario.runs,
            scenario.horizon,
            scenario.seed,
        )?;
        let report = empirical_reach(&batch);
        println!(
            "reach batch: min containment {:.4}, max normalized level {:.4}, stealth \
             violation rate {:.3e}",
            report.min_zeta_containment, report.max_zeta_level, report.stealth_violation_rate
        );
        ctx.write_artifact("containment.json", &serde_json::to_vec_pretty(&report)?)?;
        ctx.write_artifact("reach_batch.json", &serde_json::to_vec_pretty(&batch)?)?;
    }
    Ok(())
}

fn write_trajectories(ctx: &mut RunContext, log: &TrajectoryLog) -> anyhow::Result<()> {
    let mut out = String::new();
    for rec in &log.records {
        out.push_str(&serde_json::to_string(rec)?);
        out.push('\n');
    }
    ctx.write_artifact("trajectories.jsonl", out.as_bytes())
}

fn write_plot_data(ctx: &mut RunContext, log: &TrajectoryLog) -> anyhow::Result<()> {
    const SCATTER_CAP: usize = 20_000;
    let burn_in = ctx.loaded.cfg.scenario.burn_in;
    let mut scatter = String::from("r1,r2\n");
    for rec in log
        .records
        .iter()
        .filter(|r| r.k > burn_in)
        .take(SCATTER_CAP)
    {
        scatter.push_str(&format!("{:.9},{:.9}\n", rec.r[0], rec.r[1]));
    }
    ctx.write_artifact("residual_scatter.csv", scatter.as_bytes())?;

    // per-step mean and max estimation-error norm over the vehicle state
    let horizon = ctx.loaded.cfg.scenario.horizon;
    let mut sum = vec![0.0f64; horizon + 1];
    let mut max = vec![0.0f64; horizon + 1];
    let mut count = vec![0usize; horizon + 1];
    for rec in &log.records {
        let e: f64 = rec
            .x
            .iter()
            .zip(rec.xhat.iter())
            .map(|(x, h)| (x - h) * (x - h))
            .sum::<f64>()
            .sqrt();
        if rec.k <= horizon {
            sum[rec.k] += e;
            count[rec.k] += 1;
            max[rec.k] = max[rec.k].max(e);
        }
    }
    let mut csv = String::from("k,mean_err,max_err\n");
    for k in 1..=horizon {
        if count[k] > 0 {
            csv.push_str(&format!(
                "{},{:.9},{:.9}\n",
                k,
                sum[k] / count[k] as f64,
                max[k]
            ));
        }
    }
    ctx.write_artifact("error_norms.csv", csv.as_bytes())
}

fn cmd_assess(common: &CommonOpts, artifacts: &Path) -> anyhow::Result<()> {
    let mut ctx = RunContext::new(common)?;
    let design = load_artifacts(artifacts, &ctx.loaded.hash)?;
    ctx.stage("assess", |ctx| assess(ctx, &design))?;
    ctx.finish()
}

fn cmd_simulate(common: &CommonOpts, artifacts: &Path) -> anyhow::Result<()> {
    let mut ctx = RunContext::new(common)?;
    let design = load_artifacts(artifacts, &ctx.loaded.hash)?;
    ctx.stage("simulate", |ctx| simulate(ctx, &design))?;
    ctx.finish()
}

fn cmd_full(common: &CommonOpts) -> anyhow::Result<()> {
    let mut ctx = RunContext::new(common)?;
    let design = ctx.stage("synth", synthesize)?;
    ctx.write_artifact("design.json", &serde_json::to_vec_pretty(&design)?)?;
    ctx.stage("assess", |ctx| assess(ctx, &design))?;
    ctx.stage("simulate", |ctx| simulate(ctx, &design))?;
    ctx.finish()
}
