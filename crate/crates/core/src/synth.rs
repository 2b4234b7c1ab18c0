//! The three synthesis stages: estimator gain (ISS-optimal observer),
//! monitor shape (tightest residual ellipsoid), and reach-set shape
//! (minimum-volume outer bound on the stealthy-attack closed loop).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::linalg::{chol_upper, dlyap, inv_sqrt_spd, min_eig_sym, spectral_radius};
use crate::lmi::{
    line_search_scalar, BlockLmi, GridSpec, MatExpr, Objective, SdpProblem, SdpSolution,
    SdpStatus, Sense, SolverSettings, VarKind,
};
use crate::model::ExtendedModel;
use crate::reach::{schur_project, ClosedLoopModel};

/// Strict-inequality slack used when encoding `P > 0` and positive scalars.
const PD_EPS: f64 = 1e-8;
/// Lower bound standing in for strict positivity of scalar multipliers.
const SCALAR_EPS: f64 = 1e-9;
/// Margin keeping the convex-combination weights inside the open interval.
const WEIGHT_EPS: f64 = 1e-6;

/// Which statistic the estimator grid search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorSelection {
    /// Smallest ISS gain `sqrt(mu1 mu2)` over the grid (default).
    SmallestGamma,
    /// Smallest program objective `mu1 + mu2` over the grid.
    SmallestObjective,
}

/// Synthesized ISS estimator.
#[derive(Debug, Clone)]
pub struct EstimatorDesign {
    /// Observer gain, `6 x 5`.
    pub l: DMatrix<f64>,
    /// Lyapunov certificate.
    pub p_lyap: DMatrix<f64>,
    pub mu1: f64,
    pub mu2: f64,
    /// Decay grid point the design was selected at.
    pub alpha_decay: f64,
    /// ISS gain `sqrt(mu1 mu2)`.
    pub gamma: f64,
}

impl EstimatorDesign {
    /// Error-dynamics state map `(I - L Ce) Ae`.
    pub fn a_bar(&self, em: &ExtendedModel) -> DMatrix<f64> {
        (DMatrix::identity(6, 6) - &self.l * &em.ce) * &em.ae
    }
}

/// Synthesized monitor ellipsoid `r' Pi r <= 1`.
#[derive(Debug, Clone)]
pub struct MonitorDesign {
    pub pi: DMatrix<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Synthesized reach-set shape with its contraction point.
#[derive(Debug, Clone)]
pub struct ReachShape {
    /// Shape of the joint (state, estimation-error) ellipsoid, `10 x 10`.
    pub p_zeta: DMatrix<f64>,
    /// Contraction grid point the shape was selected at.
    pub a: f64,
    /// Convex-combination weights of the five disturbance channels.
    pub a_weights: [f64; 5],
    /// Schur-complement projection onto the vehicle state, `4 x 4`.
    pub p_x: DMatrix<f64>,
    /// Model objective `-logdet` at the solution (whitened coordinates).
    pub objective: f64,
}

/// Build the fixed-decay estimator program. Exposed for structural tests;
/// use [`synth_estimator`] to run the grid search.
pub fn estimator_problem(
    em: &ExtendedModel,
    alpha: f64,
) -> (SdpProblem, [crate::lmi::VarId; 4]) {
    let (nx, ny) = (ExtendedModel::NX, ExtendedModel::NY);
    let eye_x = DMatrix::<f64>::identity(nx, nx);
    let eye_y = DMatrix::<f64>::identity(ny, ny);
    let one = DMatrix::<f64>::identity(1, 1);

    let mut prob = SdpProblem::new();
    let p = prob.var("P", VarKind::Sym(nx));
    let y = prob.var("Y", VarKind::Rect(nx, ny));
    let mu1 = prob.var("mu1", VarKind::Scalar);
    let mu2 = prob.var("mu2", VarKind::Scalar);

    let ae_t = em.ae.transpose();
    let ce_t = em.ce.transpose();
    let be1_t = DMatrix::from_fn(1, nx, |_, j| em.be1[j]);

    // dissipation LMI (negative semidefinite), block rows:
    //   [ -P                                          ]
    //   [ Ae'(P - Ce'Y')        (alpha-1) P           ]
    //   [ Be1' P                0       -alpha mu1    ]
    //   [ Y'                    0        0   -a mu1 I ]
    let b10 = MatExpr::sandwich(ae_t.clone(), p, eye_x.clone(), 1.0).add(MatExpr::sandwich_t(
        &ae_t * &ce_t,
        y,
        eye_x.clone(),
        -1.0,
    ));
    let lmi1 = BlockLmi::from_lower(
        vec![nx, nx, 1, ny],
        vec![
            vec![Some(MatExpr::sandwich(eye_x.clone(), p, eye_x.clone(), -1.0))],
            vec![
                Some(b10),
                Some(MatExpr::sandwich(eye_x.clone(), p, eye_x.clone(), alpha - 1.0)),
            ],
            vec![
                Some(MatExpr::sandwich(be1_t.clone(), p, eye_x.clone(), 1.0)),
                None,
                Some(MatExpr::scalar_times(mu1, -alpha * &one)),
            ],
            vec![
                Some(MatExpr::sandwich_t(eye_y.clone(), y, eye_x.clone(), 1.0)),
                None,
                None,
                Some(MatExpr::scalar_times(mu1, -alpha * &eye_y)),
            ],
        ],
        Sense::Nsd,
    );
    prob.add_lmi(lmi1);

    // conditioning bound [[P, I],[I, mu2 I]] >= 0
    prob.add_lmi(BlockLmi::from_lower(
        vec![nx, nx],
        vec![
            vec![Some(MatExpr::sandwich(eye_x.clone(), p, eye_x.clone(), 1.0))],
            vec![
                Some(MatExpr::constant(eye_x.clone())),
                Some(MatExpr::scalar_times(mu2, eye_x.clone())),
            ],
        ],
        Sense::Psd,
    ));

    // P >= eps I
    prob.add_lmi(BlockLmi::from_lower(
        vec![nx],
        vec![vec![Some(
            MatExpr::sandwich(eye_x.clone(), p, eye_x.clone(), 1.0)
                .add_constant(&(-PD_EPS * &eye_x)),
        )]],
        Sense::Psd,
    ));
    prob.add_lower_bound(mu1, SCALAR_EPS);
    prob.add_lower_bound(mu2, SCALAR_EPS);
    prob.set_objective(Objective::MinimizeLinear(vec![(mu1, 1.0), (mu2, 1.0)]));
    (prob, [p, y, mu1, mu2])
}

/// Grid-search the decay parameter and return the estimator minimizing the
/// selected statistic. The gain is recovered as `L = P^{-1} Y` and the
/// error map `(I - L Ce) Ae` is re-checked for Schur stability.
pub fn synth_estimator(
    em: &ExtendedModel,
    grid: GridSpec,
    settings: &SolverSettings,
    select: EstimatorSelection,
) -> Result<EstimatorDesign> {
    let pts = grid.points();
    let sols = map_indexed(pts.len(), |i| {
        let (prob, ids) = estimator_problem(em, pts[i]);
        (prob.solve(settings), ids)
    });

    let mut best: Option<(f64, EstimatorDesign)> = None;
    let mut statuses = Vec::new();
    for (alpha, (sol, [p, y, mu1, mu2])) in pts.iter().zip(sols.iter()) {
        statuses.push(format!("{alpha:.4}:{:?}", sol.status));
        if sol.status != SdpStatus::Optimal {
            continue;
        }
        let pv = sol.matrix(*p).clone();
        let yv = sol.matrix(*y).clone();
        let m1 = sol.scalar(*mu1);
        let m2 = sol.scalar(*mu2);
        let Some(l) = pv.clone().lu().solve(&yv) else {
            continue;
        };
        let design = EstimatorDesign {
            l,
            p_lyap: pv,
            mu1: m1,
            mu2: m2,
            alpha_decay: *alpha,
            gamma: (m1 * m2).sqrt(),
        };
        let key = match select {
            EstimatorSelection::SmallestGamma => design.gamma,
            EstimatorSelection::SmallestObjective => m1 + m2,
        };
        if best.as_ref().map_or(true, |(k, _)| key < *k - 1e-12) {
            best = Some((key, design));
        }
    }
    let (_, design) =
        best.ok_or_else(|| Error::AllGridPointsFailed(pts.len(), statuses.join(", ")))?;

    let rho = spectral_radius(&design.a_bar(em));
    if rho >= 1.0 {
        return Err(Error::SynthesisPostCheck(format!(
            "estimator error map is not Schur stable (spectral radius {rho:.6})"
        )));
    }
    debug_assert!(design.gamma <= 0.5 * (design.mu1 + design.mu2) + 1e-9);
    Ok(design)
}

/// Build the monitor program for a fixed ISS gain. Exposed for structural
/// tests; use [`synth_monitor`] to solve it.
pub fn monitor_problem(
    em: &ExtendedModel,
    gamma: f64,
    wbar2: f64,
    wbar3: f64,
) -> (SdpProblem, [crate::lmi::VarId; 3]) {
    let (nx, ny) = (ExtendedModel::NX, ExtendedModel::NY);
    let eye_x = DMatrix::<f64>::identity(nx, nx);
    let eye_y = DMatrix::<f64>::identity(ny, ny);
    let one = DMatrix::<f64>::identity(1, 1);
    let ca = &em.ce * &em.ae; // 5 x 6

    let mut prob = SdpProblem::new();
    let pi = prob.var("Pi", VarKind::Sym(ny));
    let l1 = prob.var("lambda1", VarKind::Scalar);
    let l2 = prob.var("lambda2", VarKind::Scalar);

    // S-procedure certificate (positive semidefinite):
    //   [ l1 I - (Ce Ae)' Pi (Ce Ae)                          ]
    //   [ Pi Ce Ae                    l2 I - Pi               ]
    //   [ 0                           0       f3             ]
    // with f3 = 1 - l1 g^2 (w2 + w3) - l2 w3
    let f1 = MatExpr::scalar_times(l1, eye_x.clone()).add(MatExpr::sandwich(
        ca.transpose(),
        pi,
        ca.clone(),
        -1.0,
    ));
    let f2 = MatExpr::scalar_times(l2, eye_y.clone()).add(MatExpr::sandwich(
        eye_y.clone(),
        pi,
        eye_y.clone(),
        -1.0,
    ));
    let f3 = MatExpr::constant(one.clone())
        .add(MatExpr::scalar_times(l1, -gamma * gamma * (wbar2 + wbar3) * &one))
        .add(MatExpr::scalar_times(l2, -wbar3 * &one));
    prob.add_lmi(BlockLmi::from_lower(
        vec![nx, ny, 1],
        vec![
            vec![Some(f1)],
            vec![Some(MatExpr::sandwich(eye_y.clone(), pi, ca.clone(), 1.0)), Some(f2)],
            vec![None, None, Some(f3)],
        ],
        Sense::Psd,
    ));
    // Pi >= eps I
    prob.add_lmi(BlockLmi::from_lower(
        vec![ny],
        vec![vec![Some(
            MatExpr::sandwich(eye_y.clone(), pi, eye_y.clone(), 1.0)
                .add_constant(&(-PD_EPS * &eye_y)),
        )]],
        Sense::Psd,
    ));
    prob.add_lower_bound(l1, SCALAR_EPS);
    prob.add_lower_bound(l2, SCALAR_EPS);
    prob.set_objective(Objective::MinimizeNegLogDet(pi));
    (prob, [pi, l1, l2])
}

/// Maximize the monitor ellipsoid's tightness (log-determinant) subject to
/// the steady-state S-procedure containment certificate.
pub fn synth_monitor(
    em: &ExtendedModel,
    est: &EstimatorDesign,
    wbar2: f64,
    wbar3: f64,
    settings: &SolverSettings,
) -> Result<MonitorDesign> {
    if !(wbar2 > 0.0 && wbar3 > 0.0) {
        return Err(Error::InvalidConfig {
            field: "wbar2",
            reason: format!(
                "noise bounds must be strictly positive (got wbar2={wbar2}, wbar3={wbar3}); \
                 a zero bound collapses the residual set to a point and the monitor \
                 ellipsoid is unbounded"
            ),
        });
    }
    if !est.gamma.is_finite() {
        return Err(Error::InvalidConfig {
            field: "gamma",
            reason: "estimator ISS gain must be finite".into(),
        });
    }
    let (prob, [pi, l1, l2]) = monitor_problem(em, est.gamma, wbar2, wbar3);
    let sol = prob.solve(settings);
    match sol.status {
        SdpStatus::Optimal => Ok(MonitorDesign {
            pi: sol.matrix(pi).clone(),
            lambda1: sol.scalar(l1),
            lambda2: sol.scalar(l2),
        }),
        SdpStatus::Infeasible => Err(Error::Infeasible(format!(
            "monitor program (gamma={:.4}, wbar2={wbar2:.3e}, wbar3={wbar3:.3e})",
            est.gamma
        ))),
        SdpStatus::NumericalFailure => Err(Error::NumericalFailure(sol.detail)),
    }
}

/// Exact change of coordinates that conditions the reach-set program: every
/// disturbance channel is normalized to the unit ball and the joint state is
/// whitened by the noise-driven Lyapunov Gramian of the closed loop.
struct ReachScaling {
    /// Whitener `D`; the program is solved in `zeta_w = D zeta`.
    d: DMatrix<f64>,
    d_inv: DMatrix<f64>,
    /// Whitened state map.
    a_w: DMatrix<f64>,
    /// Whitened, unit-ball-normalized input map (10 x 19).
    b_w: DMatrix<f64>,
}

/// Disturbance channel widths of the stacked input map.
const CHANNEL_DIMS: [usize; 5] = [3, 1, 5, 5, 5];

fn reach_scaling(
    closed: &ClosedLoopModel,
    mon: &MonitorDesign,
    bounds: (f64, f64, f64),
) -> Result<ReachScaling> {
    let (w1, w2, w3) = bounds;
    let n = closed.acal.nrows();
    // stack and normalize inputs: w'Ww <= 1 becomes unit-ball after B R^{-1}
    // with W = R'R; ball bounds use R = I/sqrt(wbar)
    let pi_chol = chol_upper(&mon.pi)?;
    let pi_chol_inv = pi_chol
        .clone()
        .lu()
        .solve(&DMatrix::identity(5, 5))
        .ok_or_else(|| Error::NumericalFailure("monitor shape is singular".into()))?;
    let bn_blocks: [DMatrix<f64>; 5] = [
        &closed.b1 * w1.sqrt(),
        &closed.b2 * w2.sqrt(),
        &closed.b3 * w3.sqrt(),
        &closed.b4 * w3.sqrt(),
        &closed.b5 * pi_chol_inv,
    ];
    let total: usize = CHANNEL_DIMS.iter().sum();
    let mut bn = DMatrix::<f64>::zeros(n, total);
    let mut off = 0;
    for (blk, dim) in bn_blocks.iter().zip(CHANNEL_DIMS) {
        bn.view_mut((0, off), (n, dim)).copy_from(blk);
        off += dim;
    }
    // state whitener from the noise-driven Gramian
    let gram = dlyap(&closed.acal, &(&bn * bn.transpose() + DMatrix::identity(n, n) * 1e-9))?;
    let d = inv_sqrt_spd(&gram)?;
    let d_inv = d
        .clone()
        .lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::NumericalFailure("whitener is singular".into()))?;
    Ok(ReachScaling {
        a_w: &d * &closed.acal * &d_inv,
        b_w: &d * bn,
        d,
        d_inv,
    })
}

/// Build the fixed-contraction reach program in whitened coordinates.
/// Exposed for structural tests; use [`synth_reach_shape`] to run the grid.
pub fn reach_problem(
    a_w: &DMatrix<f64>,
    b_w: &DMatrix<f64>,
    a: f64,
) -> (SdpProblem, crate::lmi::VarId, [crate::lmi::VarId; 5]) {
    let n = a_w.nrows();
    let total = b_w.ncols();
    let eye = DMatrix::<f64>::identity(n, n);

    let mut prob = SdpProblem::new();
    let p = prob.var("P", VarKind::Sym(n));
    let weights: [crate::lmi::VarId; 5] = std::array::from_fn(|i| {
        prob.var(&format!("a{}", i + 1), VarKind::Scalar)
    });

    // W_a = diag((1 - a_i) I_{dim_i}) over normalized channels
    let mut wa = MatExpr::constant(DMatrix::identity(total, total));
    let mut off = 0;
    for (i, dim) in CHANNEL_DIMS.iter().enumerate() {
        let mut sel = DMatrix::<f64>::zeros(total, total);
        for k in 0..*dim {
            sel[(off + k, off + k)] = 1.0;
        }
        wa = wa.add(MatExpr::scalar_times(weights[i], -sel));
        off += dim;
    }

    // invariance certificate (positive semidefinite):
    //   [ a P      A' P      0   ]
    //   [ P A      P         P B ]
    //   [ 0        B' P      W_a ]
    prob.add_lmi(BlockLmi::from_lower(
        vec![n, n, total],
        vec![
            vec![Some(MatExpr::sandwich(eye.clone(), p, eye.clone(), a))],
            vec![
                Some(MatExpr::sandwich(eye.clone(), p, a_w.clone(), 1.0)),
                Some(MatExpr::sandwich(eye.clone(), p, eye.clone(), 1.0)),
            ],
            vec![
                None,
                Some(MatExpr::sandwich(b_w.transpose(), p, eye.clone(), 1.0)),
                Some(wa),
            ],
        ],
        Sense::Psd,
    ));
    // P >= eps I
    prob.add_lmi(BlockLmi::from_lower(
        vec![n],
        vec![vec![Some(
            MatExpr::sandwich(eye.clone(), p, eye.clone(), 1.0).add_constant(&(-1e-9 * &eye)),
        )]],
        Sense::Psd,
    ));
    for w in &weights {
        prob.add_lower_bound(*w, WEIGHT_EPS);
        prob.add_upper_bound(*w, 1.0 - WEIGHT_EPS);
    }
    prob.add_lin_ineq(weights.iter().map(|w| (*w, 1.0)).collect(), -a);
    prob.set_objective(Objective::MinimizeNegLogDet(p));
    (prob, p, weights)
}

/// Contraction grid for the reach program. The certificate needs
/// `a > rho(Acal)^2`, which for slow platoon poles sits above 0.99, so a
/// fixed coarse grid is useless; instead span the feasible interval
/// relative to the spectral radius.
pub fn adaptive_contraction_grid(closed: &ClosedLoopModel, points: usize) -> Vec<f64> {
    let rho2 = spectral_radius(&closed.acal).powi(2);
    let lo_frac = 0.05;
    let hi_frac = 0.95;
    (0..points)
        .map(|i| {
            let t = lo_frac + (hi_frac - lo_frac) * i as f64 / (points - 1).max(1) as f64;
            rho2 + t * (1.0 - rho2)
        })
        .collect()
}

/// Solve the reach-shape program over a contraction grid, keep the point
/// with the smallest `-logdet`, and project the winning shape onto the
/// vehicle state by Schur complement.
///
/// `grid`: explicit contraction points, or `None` for the adaptive grid.
pub fn synth_reach_shape(
    closed: &ClosedLoopModel,
    mon: &MonitorDesign,
    bounds: (f64, f64, f64),
    grid: Option<Vec<f64>>,
    settings: &SolverSettings,
) -> Result<ReachShape> {
    let (w1, w2, w3) = bounds;
    if !(w1 > 0.0 && w2 > 0.0 && w3 > 0.0) {
        return Err(Error::InvalidConfig {
            field: "wbar1",
            reason: format!("noise bounds must be strictly positive, got ({w1}, {w2}, {w3})"),
        });
    }
    let scaling = reach_scaling(closed, mon, bounds)?;
    let pts = grid.unwrap_or_else(|| adaptive_contraction_grid(closed, 14));
    if pts.is_empty() {
        return Err(Error::InvalidConfig {
            field: "grid",
            reason: "contraction grid is empty".into(),
        });
    }

    let solve_at = |a: f64| -> SdpSolution {
        let (prob, _, _) = reach_problem(&scaling.a_w, &scaling.b_w, a);
        prob.solve(settings)
    };
    // reuse the generic line search over an explicit grid by solving each
    // point; tie-break toward smaller contraction
    let sols = map_indexed(pts.len(), |i| solve_at(pts[i]));
    let mut best: Option<(f64, &SdpSolution)> = None;
    for (a, sol) in pts.iter().zip(sols.iter()) {
        if sol.status != SdpStatus::Optimal {
            continue;
        }
        if best
            .as_ref()
            .map_or(true, |(_, b)| sol.objective_value < b.objective_value - 1e-12)
        {
            best = Some((*a, sol));
        }
    }
    let (a, sol) = best.ok_or_else(|| {
        let detail = pts
            .iter()
            .zip(sols.iter())
            .map(|(p, s)| format!("{p:.6}:{:?}", s.status))
            .collect::<Vec<_>>()
            .join(", ");
        Error::AllGridPointsFailed(pts.len(), detail)
    })?;

    // recover variables from the winning grid point
    let (prob, p_id, w_ids) = reach_problem(&scaling.a_w, &scaling.b_w, a);
    let _ = prob; // ids are positional; the solution carries the values
    let p_w = sol.matrix(p_id).clone();
    let a_weights = std::array::from_fn(|i| sol.scalar(w_ids[i]));
    // undo the whitening: zeta' (D' P_w D) zeta = zeta_w' P_w zeta_w
    let p_zeta = scaling.d.transpose() * &p_w * &scaling.d;
    let p_zeta = (&p_zeta + p_zeta.transpose()) * 0.5;
    let p_x = schur_project(&p_zeta, 4)?;
    if min_eig_sym(&p_x) <= 0.0 {
        return Err(Error::SynthesisPostCheck(
            "projected state shape is not positive definite".into(),
        ));
    }
    let _ = &scaling.d_inv;
    Ok(ReachShape {
        p_zeta,
        a,
        a_weights,
        p_x,
        objective: sol.objective_value,
    })
}

/// Generic scalar line search on an SDP family, re-exported at the synth
/// level for pipelines that grid over a single parameter with the plain
/// smallest-objective rule.
pub fn grid_minimize<F>(solve_at: F, grid: GridSpec) -> Result<(f64, SdpSolution)>
where
    F: Fn(f64) -> SdpSolution + Sync + Send,
{
    line_search_scalar(solve_at, grid)
}

/// Serializable bundle of everything the synthesis pipeline produced.
/// Matrices are row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub gamma: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub alpha_decay: f64,
    pub l: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub p_zeta: Vec<Vec<f64>>,
    pub p_x: Vec<Vec<f64>>,
    pub contraction: f64,
    pub a_weights: [f64; 5],
    pub reach_objective: f64,
    pub solver_status: String,
}

/// Row-major serialization helper.
pub fn mat_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Row-major deserialization helper.
pub fn rows_mat(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(nr, nc, |i, j| rows[i][j])
}

impl SynthesisResult {
    pub fn bundle(est: &EstimatorDesign, mon: &MonitorDesign, shape: &ReachShape) -> Self {
        Self {
            gamma: est.gamma,
            mu1: est.mu1,
            mu2: est.mu2,
            alpha_decay: est.alpha_decay,
            l: mat_rows(&est.l),
            pi: mat_rows(&mon.pi),
            lambda1: mon.lambda1,
            lambda2: mon.lambda2,
            p_zeta: mat_rows(&shape.p_zeta),
            p_x: mat_rows(&shape.p_x),
            contraction: shape.a,
            a_weights: shape.a_weights,
            reach_objective: shape.objective,
            solver_status: "optimal".into(),
        }
    }

    pub fn estimator(&self) -> EstimatorDesign {
        EstimatorDesign {
            l: rows_mat(&self.l),
            p_lyap: DMatrix::identity(6, 6),
            mu1: self.mu1,
            mu2: self.mu2,
            alpha_decay: self.alpha_decay,
            gamma: self.gamma,
        }
    }

    pub fn monitor(&self) -> MonitorDesign {
        MonitorDesign {
            pi: rows_mat(&self.pi),
            lambda1: self.lambda1,
            lambda2: self.lambda2,
        }
    }

    pub fn reach_shape(&self) -> ReachShape {
        ReachShape {
            p_zeta: rows_mat(&self.p_zeta),
            a: self.contraction,
            a_weights: self.a_weights,
            p_x: rows_mat(&self.p_x),
            objective: self.reach_objective,
        }
    }
}

