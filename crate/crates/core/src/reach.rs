//! Stealthy-attack reachability: the residual-driven closed-loop rewrite,
//! ellipsoid level schedules, state-space projection, and the distance to
//! critical states.
//!
//! Eliminating the injected signal through the pseudo-inverse of the
//! residual gain turns the attacked closed loop into an LTI system driven
//! only by peak-bounded inputs; the monitor constraint bounds the residual
//! channel, so an invariant-ellipsoid certificate bounds everything a
//! stealthy attacker can reach.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::model::{DiscreteModel, ExtendedModel};
use crate::synth::{EstimatorDesign, ReachShape};

/// Joint (vehicle state, estimation error) closed loop driven by the five
/// bounded inputs: lumped plant disturbance, channel noise, two shifted
/// copies of the measurement noise, and the future residual.
#[derive(Debug, Clone)]
pub struct ClosedLoopModel {
    pub acal: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub b3: DMatrix<f64>,
    pub b4: DMatrix<f64>,
    pub b5: DMatrix<f64>,
}

impl ClosedLoopModel {
    /// Advance `zeta = [x; e]` one step under the five inputs.
    pub fn step(
        &self,
        zeta: &DVector<f64>,
        w_tilde: &DVector<f64>,
        w_u: f64,
        w_e_next: &DVector<f64>,
        w_e_next2: &DVector<f64>,
        r_next2: &DVector<f64>,
    ) -> DVector<f64> {
        &self.acal * zeta
            + &self.b1 * w_tilde
            + &self.b2 * w_u
            + &self.b3 * w_e_next
            + &self.b4 * w_e_next2
            + &self.b5 * r_next2
    }
}

/// Quadratic-form set `{ x : x' P x <= alpha }`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    pub p: DMatrix<f64>,
    pub alpha: f64,
}

impl Ellipsoid {
    pub fn new(p: DMatrix<f64>, alpha: f64) -> Result<Self> {
        if crate::linalg::min_eig_sym(&p) <= 0.0 {
            return Err(Error::Projection("ellipsoid shape must be positive definite".into()));
        }
        if !(alpha > 0.0) {
            return Err(Error::Projection(format!("ellipsoid level must be positive, got {alpha}")));
        }
        Ok(Self { p, alpha })
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.level(x) <= self.alpha
    }

    pub fn level(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.p * x)[(0, 0)]
    }
}

/// Union of critical half-spaces `c' x > b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalSet {
    pub halfspaces: Vec<(Vec<f64>, f64)>,
}

impl CriticalSet {
    /// Collision and overspeed half-spaces of the spacing policy:
    /// `-e - h v > s` (gap below standstill) and `v > v_max`.
    pub fn collision_and_overspeed(h: f64, s_standstill: f64, v_max: f64) -> Self {
        Self {
            halfspaces: vec![
                (vec![-1.0, -h, 0.0, 0.0], s_standstill),
                (vec![0.0, 1.0, 0.0, 0.0], v_max),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.halfspaces.is_empty() {
            return Err(Error::CriticalSet("at least one half-space is required".into()));
        }
        for (c, b) in &self.halfspaces {
            if c.iter().all(|v| *v == 0.0) {
                return Err(Error::CriticalSet("half-space normal must be nonzero".into()));
            }
            if *b < 0.0 {
                return Err(Error::CriticalSet(format!(
                    "half-space offset {b} is negative; the origin-centered distance \
                     formula has no stated sign convention there"
                )));
            }
        }
        Ok(())
    }
}

/// Per-step distance verdict over an analysis horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskReport {
    /// `(k, alpha_k, per-halfspace distances, min distance)` per step.
    pub schedule: Vec<DistanceRow>,
    /// Distances at the asymptotic level.
    pub at_limit: DistanceRow,
    pub verdict: Verdict,
    pub first_violation_k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceRow {
    pub k: usize,
    pub alpha: f64,
    pub per_halfspace: Vec<f64>,
    pub min_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    RiskFree,
    AtRisk,
}

/// Assemble the residual-driven closed loop from the vehicle model, the
/// extended model, and a synthesized estimator.
pub fn build_closed_loop(
    dm: &DiscreteModel,
    em: &ExtendedModel,
    est: &EstimatorDesign,
) -> Result<ClosedLoopModel> {
    let v = em.residual_gain(); // Ce Ae Be1, a 5-vector
    let nv = v.norm_squared();
    if nv.sqrt() < 1e-10 {
        return Err(Error::ModelStructure(format!(
            "residual gain norm {:.3e} is too small to invert",
            nv.sqrt()
        )));
    }
    // Moore-Penrose inverse of a full-column-rank column vector: v'/(v'v)
    let pinv = DMatrix::from_fn(1, 5, |_, j| v[j] / nv);

    let a_bar = est.a_bar(em);
    let ca = &em.ce * &em.ae; // 5 x 6
    let g = DMatrix::from_fn(4, 1, |i, _| dm.g[i]);
    let be1 = DMatrix::from_fn(6, 1, |i, _| em.be1[i]);
    let eye6 = DMatrix::<f64>::identity(6, 6);

    let top_right = &g * &pinv * &ca * &a_bar; // 4 x 6
    let bottom_right = (&eye6 - &be1 * &pinv * &ca) * &a_bar; // 6 x 6

    let mut acal = DMatrix::<f64>::zeros(10, 10);
    acal.view_mut((0, 0), (4, 4)).copy_from(&dm.a);
    acal.view_mut((0, 4), (4, 6)).copy_from(&top_right);
    acal.view_mut((4, 4), (6, 6)).copy_from(&bottom_right);

    let stack = |top: DMatrix<f64>, bottom: DMatrix<f64>| -> DMatrix<f64> {
        let cols = top.ncols();
        let mut m = DMatrix::<f64>::zeros(10, cols);
        m.view_mut((0, 0), (4, cols)).copy_from(&top);
        m.view_mut((4, 0), (6, cols)).copy_from(&bottom);
        m
    };

    let b1 = stack(dm.b.clone(), DMatrix::zeros(6, 3));
    let b2 = stack(-&g, DMatrix::zeros(6, 1));
    let b3 = stack(
        -(&g * &pinv * &ca * &est.l),
        (&be1 * &pinv * &ca - &eye6) * &est.l,
    );
    let b4 = stack(&g * &pinv, -(&be1 * &pinv));
    let b5 = stack(-(&g * &pinv), &be1 * &pinv);

    Ok(ClosedLoopModel { acal, b1, b2, b3, b4, b5 })
}

/// Level schedule `alpha_k = a^{k-1} zeta(1)' P zeta(1)
/// + (N - a)(1 - a^{k-1}) / (1 - a)` with `N = 5` input channels, for
/// `k = 1..=horizon`.
pub fn alpha_schedule(shape: &ReachShape, zeta1: &DVector<f64>, horizon: usize) -> Vec<f64> {
    let alpha1 = (zeta1.transpose() * &shape.p_zeta * zeta1)[(0, 0)];
    let a = shape.a;
    (1..=horizon)
        .map(|k| {
            let ak1 = a.powi((k - 1) as i32);
            ak1 * alpha1 + (5.0 - a) * (1.0 - ak1) / (1.0 - a)
        })
        .collect()
}

/// Asymptotic level `(5 - a) / (1 - a)`.
pub fn alpha_limit(shape: &ReachShape) -> f64 {
    (5.0 - shape.a) / (1.0 - shape.a)
}

/// Schur complement of the trailing block: projection of
/// `{ z : z' P z <= alpha }` onto its leading `keep` coordinates.
pub fn schur_project(p: &DMatrix<f64>, keep: usize) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    assert!(keep < n, "projection must drop at least one coordinate");
    let p1 = p.view((0, 0), (keep, keep)).into_owned();
    let p2 = p.view((0, keep), (keep, n - keep)).into_owned();
    let p3 = p.view((keep, keep), (n - keep, n - keep)).into_owned();
    let p3_lu = p3.clone().lu();
    let sol = p3_lu
        .solve(&p2.transpose())
        .ok_or_else(|| Error::Projection("trailing block is singular".into()))?;
    let out = &p1 - &p2 * sol;
    Ok((&out + out.transpose()) * 0.5)
}

/// Projection of a reach shape onto the vehicle state.
pub fn project(shape: &ReachShape) -> Result<DMatrix<f64>> {
    schur_project(&shape.p_zeta, 4)
}

/// A level this small collapses the ellipsoid to the origin (it only occurs
/// at the first step of a zero initial condition).
const LEVEL_FLOOR: f64 = 1e-12;

/// Distance from the origin-centered ellipsoid `{x : x' P x <= alpha}` to
/// each critical half-space `c' x > b`, using the level-scaled quadratic
/// `sqrt(c' P^{-1} c / alpha)` as the reach term. Negative distance flags a
/// nonempty intersection with that half-space. A zero level collapses the
/// set to the origin and the plain point-to-hyperplane distance is
/// reported.
pub fn distance_to_critical(
    p_x: &DMatrix<f64>,
    alpha_k: f64,
    crit: &CriticalSet,
) -> Result<Vec<f64>> {
    crit.validate()?;
    if alpha_k < 0.0 {
        return Err(Error::CriticalSet(format!("level must be nonnegative, got {alpha_k}")));
    }
    let p_inv = spd_inverse(p_x)?;
    crit.halfspaces
        .iter()
        .map(|(c, b)| {
            let cv = DVector::from_column_slice(c);
            let cc = cv.norm_squared();
            if alpha_k <= LEVEL_FLOOR {
                return Ok(b.abs() / cc);
            }
            let q = (cv.transpose() * &p_inv * &cv)[(0, 0)];
            Ok((b.abs() - (q / alpha_k).sqrt()) / cc)
        })
        .collect()
}

/// Evaluate the distance schedule over a horizon plus the asymptotic level
/// and return the risk verdict: at-risk iff any per-step minimum distance
/// is negative.
pub fn assess_risk(
    shape: &ReachShape,
    zeta1: &DVector<f64>,
    crit: &CriticalSet,
    horizon: usize,
) -> Result<RiskReport> {
    crit.validate()?;
    let alphas = alpha_schedule(shape, zeta1, horizon);
    let mut schedule = Vec::with_capacity(horizon);
    let mut first_violation = None;
    for (i, alpha) in alphas.iter().enumerate() {
        let k = i + 1;
        let per = distance_to_critical(&shape.p_x, *alpha, crit)?;
        let min = per.iter().copied().fold(f64::INFINITY, f64::min);
        if min < 0.0 && first_violation.is_none() {
            first_violation = Some(k);
        }
        schedule.push(DistanceRow {
            k,
            alpha: *alpha,
            per_halfspace: per,
            min_distance: min,
        });
    }
    let alpha_inf = alpha_limit(shape);
    let per_inf = distance_to_critical(&shape.p_x, alpha_inf, crit)?;
    let min_inf = per_inf.iter().copied().fold(f64::INFINITY, f64::min);
    let at_limit = DistanceRow {
        k: usize::MAX,
        alpha: alpha_inf,
        per_halfspace: per_inf,
        min_distance: min_inf,
    };
    let verdict = if first_violation.is_some() || min_inf < 0.0 {
        Verdict::AtRisk
    } else {
        Verdict::RiskFree
    };
    Ok(RiskReport {
        schedule,
        at_limit,
        verdict,
        first_violation_k: first_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn schur_projection_matches_hand_computed_case() {
        // P = [[2,0,1],[0,2,0],[1,0,2]], keep 2 -> [[1.5, 0],[0, 2]]
        let p = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 1.0, 0.0, 2.0, 0.0, 1.0, 0.0, 2.0]);
        let px = schur_project(&p, 2).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 2.0]);
        assert!((px - expect).amax() <= 1e-10);
    }

    #[test]
    fn block_diagonal_projection_is_leading_block() {
        let mut p = DMatrix::<f64>::identity(5, 5) * 3.0;
        p[(0, 1)] = 0.4;
        p[(1, 0)] = 0.4;
        let px = schur_project(&p, 2).unwrap();
        assert_abs_diff_eq!(px, p.view((0, 0), (2, 2)).into_owned(), epsilon = 1e-12);
    }

    #[test]
    fn projection_lift_point_attains_level() {
        // every boundary point of the projection lifts to a boundary point
        // of the full ellipsoid at e = -P3^{-1} P2' x
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let raw = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
            let p = &raw * raw.transpose() + DMatrix::identity(6, 6) * 0.5;
            let px = schur_project(&p, 3).unwrap();
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let level_x = (x.transpose() * &px * &x)[(0, 0)];
            let p2 = p.view((0, 3), (3, 3)).into_owned();
            let p3 = p.view((3, 3), (3, 3)).into_owned();
            let e = -(p3.lu().solve(&(p2.transpose() * &x)).unwrap());
            let mut z = DVector::zeros(6);
            z.rows_mut(0, 3).copy_from(&x);
            z.rows_mut(3, 3).copy_from(&e);
            let level_z = (z.transpose() * &p * &z)[(0, 0)];
            assert_abs_diff_eq!(level_x, level_z, epsilon = 1e-8);
        }
    }

    #[test]
    fn circle_to_line_distances() {
        let p = DMatrix::<f64>::identity(2, 2);
        let crit = CriticalSet {
            halfspaces: vec![(vec![1.0, 0.0], 2.0)],
        };
        let d = distance_to_critical(&p, 1.0, &crit).unwrap();
        assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-12);
        let crit = CriticalSet {
            halfspaces: vec![(vec![1.0, 0.0], 0.5)],
        };
        let d = distance_to_critical(&p, 1.0, &crit).unwrap();
        assert_abs_diff_eq!(d[0], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn critical_set_rejects_degenerates() {
        assert!(CriticalSet { halfspaces: vec![] }.validate().is_err());
        assert!(CriticalSet {
            halfspaces: vec![(vec![0.0, 0.0], 1.0)]
        }
        .validate()
        .is_err());
        assert!(CriticalSet {
            halfspaces: vec![(vec![1.0, 0.0], -1.0)]
        }
        .validate()
        .is_err());
    }

    fn toy_shape(a: f64, p: DMatrix<f64>) -> ReachShape {
        let p_x = schur_project(&p, 4).unwrap();
        ReachShape {
            p_zeta: p,
            a,
            a_weights: [0.2; 5],
            p_x,
            objective: 0.0,
        }
    }

    #[test]
    fn alpha_schedule_closed_form() {
        let p = DMatrix::<f64>::identity(10, 10);
        let shape = toy_shape(0.5, p);
        // zeta(1) = 0: alpha_1 = 0, alpha_2 = 5 - a
        let z = DVector::zeros(10);
        let alphas = alpha_schedule(&shape, &z, 3);
        assert_abs_diff_eq!(alphas[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(alphas[1], 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(alphas[2], 4.5 * 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha_limit(&shape), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn alpha_schedule_monotone_convergence() {
        let p = DMatrix::<f64>::identity(10, 10);
        let shape = toy_shape(0.9, p);
        let mut z = DVector::zeros(10);
        z[0] = 1.0; // alpha_1 = 1 < limit = 41
        let alphas = alpha_schedule(&shape, &z, 4000);
        let lim = alpha_limit(&shape);
        for w in alphas.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        assert_abs_diff_eq!(alphas[3999], lim, epsilon = 1e-6);
    }

    #[test]
    fn distance_sign_matches_support_crossing() {
        // for the printed level-scaled form, d < 0 exactly when
        // sqrt(c'P^{-1}c / alpha) exceeds |b|
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.8]);
        let crit = CriticalSet {
            halfspaces: vec![(vec![1.0, 0.5], 2.0)],
        };
        for alpha in [0.1, 0.5, 1.0, 5.0] {
            let d = distance_to_critical(&p, alpha, &crit).unwrap()[0];
            let p_inv = spd_inverse(&p).unwrap();
            let c = DVector::from_column_slice(&[1.0, 0.5]);
            let q = (c.transpose() * &p_inv * &c)[(0, 0)];
            let crossing = (q / alpha).sqrt() > 2.0;
            assert_eq!(d < 0.0, crossing);
        }
    }

    #[test]
    fn assess_risk_flags_first_violation() {
        // zero initial state: alpha_1 = 0 uses the origin rule (safe), and a
        // wide shape makes every later level critical
        let p = DMatrix::<f64>::identity(10, 10) * 1e-4;
        let shape = toy_shape(0.5, p);
        let crit = CriticalSet {
            halfspaces: vec![(vec![1.0, 0.0, 0.0, 0.0], 3.0)],
        };
        let z = DVector::zeros(10);
        let report = assess_risk(&shape, &z, &crit, 50).unwrap();
        assert!(report.schedule[0].min_distance > 0.0, "origin step is safe");
        assert!(report.schedule[1].min_distance < 0.0);
        assert_eq!(report.first_violation_k, Some(2));
        assert_eq!(report.verdict, Verdict::AtRisk);
        assert!(report.at_limit.min_distance < 0.0);
    }

    #[test]
    fn assess_risk_clean_case_is_risk_free() {
        // tight shape, far half-spaces: positive distance everywhere
        let p = DMatrix::<f64>::identity(10, 10) * 100.0;
        let shape = toy_shape(0.5, p);
        let crit = CriticalSet {
            halfspaces: vec![(vec![1.0, 0.0, 0.0, 0.0], 3.0)],
        };
        let mut z = DVector::zeros(10);
        z[0] = 0.05;
        let report = assess_risk(&shape, &z, &crit, 100).unwrap();
        assert_eq!(report.verdict, Verdict::RiskFree);
        assert_eq!(report.first_violation_k, None);
    }
}
