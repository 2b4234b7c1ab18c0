//! Conic interior-point backend for [`SdpProblem`](super::SdpProblem),
//! built on Clarabel.
//!
//! Block LMIs become scaled-triangle PSD cones. A `-logdet(V)` objective is
//! lowered through the determinant hypograph: with a lower-triangular slack
//! `Z` and `t_i <= log Z_ii`,
//!
//! ```text
//!   [ V    Z       ]
//!   [ Z'   diag(Z) ]  >= 0,   maximize sum_i t_i
//! ```
//!
//! bounds `sum_i t_i <= logdet(V)` with equality achievable from the
//! Cholesky factor of `V`, so the reduction is tight. Each `t_i <= log Z_ii`
//! is one exponential cone.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;

use super::{Assignment, Objective, SdpProblem, SdpSolution, SdpStatus, Value, VarKind};

/// Backend tolerances and iteration limits.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolverSettings {
    /// Feasibility tolerance on constraint residuals.
    pub feas_tol: f64,
    /// Optimality (duality-gap) tolerance.
    pub opt_tol: f64,
    /// Interior-point iteration cap.
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            max_iter: 400,
        }
    }
}

/// Flattened variable layout: offset of each declared variable in the
/// stacked unknown vector.
struct Layout {
    offsets: Vec<usize>,
    total: usize,
}

impl Layout {
    fn new(vars: &[(String, VarKind)]) -> Self {
        let mut offsets = Vec::with_capacity(vars.len());
        let mut total = 0usize;
        for (_, k) in vars {
            offsets.push(total);
            total += k.flat_len();
        }
        Self { offsets, total }
    }
}

/// Lower-triangle flat index within a symmetric `n x n` variable, column
/// major: `(r, c)` with `r >= c`.
fn sym_flat_index(n: usize, r: usize, c: usize) -> usize {
    debug_assert!(r >= c && r < n);
    // entries before column c: n + (n-1) + ... + (n-c+1)
    c * (2 * n - c + 1) / 2 + (r - c)
}

fn sym_flat_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Assignment with every variable zero except one flattened unknown set to
/// one (symmetric variables get both mirrored entries).
fn unit_assignment(vars: &[(String, VarKind)], layout: &Layout, flat: usize) -> Assignment {
    let values = vars
        .iter()
        .enumerate()
        .map(|(vi, (_, k))| {
            let off = layout.offsets[vi];
            let len = k.flat_len();
            let local = flat.checked_sub(off).filter(|l| *l < len);
            match k {
                VarKind::Scalar => Value::Scalar(if local.is_some() { 1.0 } else { 0.0 }),
                VarKind::Rect(r, c) => {
                    let mut m = DMatrix::zeros(*r, *c);
                    if let Some(l) = local {
                        m[(l % r, l / r)] = 1.0;
                    }
                    Value::Mat(m)
                }
                VarKind::Sym(n) => {
                    let mut m = DMatrix::zeros(*n, *n);
                    if let Some(l) = local {
                        // invert column-major lower-triangle indexing
                        let mut c = 0usize;
                        let mut rem = l;
                        while rem >= n - c {
                            rem -= n - c;
                            c += 1;
                        }
                        let r = c + rem;
                        m[(r, c)] = 1.0;
                        m[(c, r)] = 1.0;
                    }
                    Value::Mat(m)
                }
            }
        })
        .collect();
    Assignment { values }
}

fn zero_assignment(vars: &[(String, VarKind)]) -> Assignment {
    let values = vars
        .iter()
        .map(|(_, k)| match k {
            VarKind::Scalar => Value::Scalar(0.0),
            VarKind::Rect(r, c) => Value::Mat(DMatrix::zeros(*r, *c)),
            VarKind::Sym(n) => Value::Mat(DMatrix::zeros(*n, *n)),
        })
        .collect();
    Assignment { values }
}

/// Scaled svec of a symmetric matrix: upper triangle column by column with
/// off-diagonals multiplied by sqrt(2) (Clarabel's PSD triangle layout).
fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let rt2 = 2f64.sqrt();
    let mut out = Vec::with_capacity(sym_flat_len(n));
    for j in 0..n {
        for i in 0..=j {
            let v = (m[(i, j)] + m[(j, i)]) * 0.5;
            out.push(if i == j { v } else { rt2 * v });
        }
    }
    out
}

/// Sparse triplet accumulator for the constraint matrix.
struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    nrows: usize,
}

impl Triplets {
    fn new() -> Self {
        Self {
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
            nrows: 0,
        }
    }

    fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.rows.push(r);
            self.cols.push(c);
            self.vals.push(v);
        }
    }

    fn into_csc(self, ncols: usize) -> CscMatrix<f64> {
        let nnz = self.vals.len();
        let mut order: Vec<usize> = (0..nnz).collect();
        order.sort_by_key(|&k| (self.cols[k], self.rows[k]));
        let mut colptr = vec![0usize; ncols + 1];
        for &c in &self.cols {
            colptr[c + 1] += 1;
        }
        for i in 0..ncols {
            colptr[i + 1] += colptr[i];
        }
        let mut rowval = Vec::with_capacity(nnz);
        let mut nzval = Vec::with_capacity(nnz);
        for k in order {
            rowval.push(self.rows[k]);
            nzval.push(self.vals[k]);
        }
        CscMatrix::new(self.nrows, ncols, colptr, rowval, nzval)
    }
}

pub(super) fn solve(problem: &SdpProblem, settings: &SolverSettings) -> SdpSolution {
    let (vars, lmis, lin_ineqs, objective) = problem.parts();
    let layout = Layout::new(vars);
    let n_model = layout.total;

    // -logdet lowering introduces a lower-triangular slack and one scalar
    // per row of the target variable
    let logdet = match objective {
        Objective::MinimizeNegLogDet(v) => {
            let VarKind::Sym(n) = vars[v.0].1 else {
                unreachable!("checked at set_objective")
            };
            Some((*v, n))
        }
        Objective::MinimizeLinear(_) => None,
    };
    let (z_off, t_off, n_total) = match logdet {
        Some((_, n)) => (n_model, n_model + sym_flat_len(n), n_model + sym_flat_len(n) + n),
        None => (n_model, n_model, n_model),
    };

    let mut q = vec![0.0; n_total];
    match objective {
        Objective::MinimizeLinear(terms) => {
            for (v, c) in terms {
                q[layout.offsets[v.0]] += *c;
            }
        }
        Objective::MinimizeNegLogDet(_) => {
            let (_, n) = logdet.unwrap();
            for i in 0..n {
                q[t_off + i] = -1.0;
            }
        }
    }

    let mut tri = Triplets::new();
    let mut b: Vec<f64> = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    // linear inequalities: sum(c x) + const >= 0  ->  s = const + c x >= 0
    if !lin_ineqs.is_empty() {
        for ineq in lin_ineqs {
            let r = tri.nrows;
            tri.nrows += 1;
            for (v, c) in &ineq.terms {
                tri.push(r, layout.offsets[v.0], -c);
            }
            b.push(ineq.constant);
        }
        cones.push(SupportedConeT::NonnegativeConeT(lin_ineqs.len()));
    }

    // block LMIs: coefficient matrices by basis evaluation
    let zero_asg = zero_assignment(vars);
    for lmi in lmis {
        let dim = lmi.dim();
        let c0 = lmi.eval_psd_form(&zero_asg);
        let mut coeff_cols: Vec<(usize, Vec<f64>)> = Vec::new();
        for flat in 0..n_model {
            let asg = unit_assignment(vars, &layout, flat);
            let ck = lmi.eval_psd_form(&asg) - &c0;
            if ck.amax() > 0.0 {
                coeff_cols.push((flat, svec(&ck)));
            }
        }
        // balance the constraint by its largest coefficient magnitude
        let mut scale = c0.amax();
        for (_, col) in &coeff_cols {
            scale = scale.max(col.iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
        let scale = if scale > 1e-12 { 1.0 / scale } else { 1.0 };

        let base = tri.nrows;
        let sv_len = sym_flat_len(dim);
        tri.nrows += sv_len;
        for (flat, col) in &coeff_cols {
            for (k, v) in col.iter().enumerate() {
                tri.push(base + k, *flat, -v * scale);
            }
        }
        for (k, v) in svec(&c0).iter().enumerate() {
            b.push(v * scale);
            let _ = k;
        }
        cones.push(SupportedConeT::PSDTriangleConeT(dim));
    }

    // logdet hypograph: [[V, Z],[Z', diag(Z)]] >= 0 plus exponential cones
    if let Some((v, n)) = logdet {
        let VarKind::Sym(_) = vars[v.0].1 else { unreachable!() };
        let v_off = layout.offsets[v.0];
        let dim = 2 * n;
        let base = tri.nrows;
        tri.nrows += sym_flat_len(dim);
        let rt2 = 2f64.sqrt();
        // svec row index of entry (i, j), i <= j, within the 2n block
        let sv_idx = |i: usize, j: usize| j * (j + 1) / 2 + i;
        // top-left: V entries
        for j in 0..n {
            for i in 0..=j {
                let flat = v_off + sym_flat_index(n, j, i);
                let w = if i == j { 1.0 } else { rt2 };
                tri.push(base + sv_idx(i, j), flat, -w);
            }
        }
        // top-right: Z (lower triangular), entry (i, n + j) = Z[i][j] for i >= j
        for j in 0..n {
            for i in j..n {
                let flat = z_off + sym_flat_index(n, i, j);
                tri.push(base + sv_idx(i, n + j), flat, -rt2);
            }
        }
        // bottom-right: diag(Z)
        for j in 0..n {
            let flat = z_off + sym_flat_index(n, j, j);
            tri.push(base + sv_idx(n + j, n + j), flat, -1.0);
        }
        for _ in 0..sym_flat_len(dim) {
            b.push(0.0);
        }
        cones.push(SupportedConeT::PSDTriangleConeT(dim));

        // (t_i, 1, Z_ii) in K_exp  <=>  t_i <= log Z_ii
        for i in 0..n {
            let r = tri.nrows;
            tri.nrows += 3;
            tri.push(r, t_off + i, -1.0);
            b.push(0.0);
            b.push(1.0);
            tri.push(r + 2, z_off + sym_flat_index(n, i, i), -1.0);
            b.push(0.0);
            cones.push(SupportedConeT::ExponentialConeT());
        }
    }

    let a = tri.into_csc(n_total);
    let p = CscMatrix::<f64>::zeros((n_total, n_total));

    let clarabel_settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(settings.max_iter)
        .tol_feas(settings.feas_tol)
        .tol_gap_abs(settings.opt_tol)
        .tol_gap_rel(settings.opt_tol)
        .reduced_tol_feas(settings.feas_tol.max(1e-6))
        .reduced_tol_gap_abs(settings.opt_tol.max(1e-5))
        .reduced_tol_gap_rel(settings.opt_tol.max(1e-5))
        .build()
        .expect("static solver settings are valid");

    let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, clarabel_settings) {
        Ok(s) => s,
        Err(e) => {
            return SdpSolution::failed(
                SdpStatus::NumericalFailure,
                format!("solver rejected problem data: {e:?}"),
            )
        }
    };
    solver.solve();

    let status = match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SdpStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SdpStatus::Infeasible
        }
        _ => SdpStatus::NumericalFailure,
    };
    if status != SdpStatus::Optimal {
        return SdpSolution::failed(status, format!("{:?}", solver.solution.status));
    }

    let x = &solver.solution.x;
    let values = vars
        .iter()
        .enumerate()
        .map(|(vi, (_, k))| {
            let off = layout.offsets[vi];
            match k {
                VarKind::Scalar => Value::Scalar(x[off]),
                VarKind::Rect(r, c) => {
                    Value::Mat(DMatrix::from_fn(*r, *c, |i, j| x[off + j * r + i]))
                }
                VarKind::Sym(n) => Value::Mat(DMatrix::from_fn(*n, *n, |i, j| {
                    let (r, c) = if i >= j { (i, j) } else { (j, i) };
                    x[off + sym_flat_index(*n, r, c)]
                })),
            }
        })
        .collect::<Vec<_>>();

    // report the model objective, not the lowered one: for -logdet recompute
    // from the recovered matrix so the reduction slack never leaks out
    let objective_value = match objective {
        Objective::MinimizeLinear(_) => solver.solution.obj_val,
        Objective::MinimizeNegLogDet(v) => match &values[v.0] {
            Value::Mat(m) => {
                let sym = (m + m.transpose()) * 0.5;
                match sym.cholesky() {
                    Some(c) => -2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
                    None => f64::INFINITY,
                }
            }
            Value::Scalar(_) => unreachable!(),
        },
    };

    SdpSolution {
        status,
        objective_value,
        values,
        names: vars.iter().map(|(n, _)| n.clone()).collect(),
        detail: format!("{:?}", solver.solution.status),
    }
}

/// Sparse SDPA (`.dat-s`) dump of the LMI structure for external
/// cross-checking. Linear objectives carry over; `-logdet` problems are
/// written as feasibility problems.
pub(super) fn dump_sdpa(problem: &SdpProblem) -> String {
    let (vars, lmis, lin_ineqs, objective) = problem.parts();
    let layout = Layout::new(vars);
    let n_model = layout.total;

    let mut c = vec![0.0; n_model];
    if let Objective::MinimizeLinear(terms) = objective {
        for (v, coeff) in terms {
            c[layout.offsets[v.0]] += *coeff;
        }
    }

    let mut block_sizes: Vec<i64> = lmis.iter().map(|l| l.dim() as i64).collect();
    if !lin_ineqs.is_empty() {
        block_sizes.push(-(lin_ineqs.len() as i64));
    }

    let mut out = String::new();
    out.push_str(&format!("{}\n{}\n", n_model, block_sizes.len()));
    out.push_str(
        &block_sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    out.push('\n');
    // SDPA minimizes c'x with F(x) = sum F_i x_i - F0 >= 0
    out.push_str(
        &c.iter()
            .map(|v| format!("{v:.17e}"))
            .collect::<Vec<_>>()
            .join(" "),
    );
    out.push('\n');

    let zero_asg = zero_assignment(vars);
    let emit = |mat_no: usize, blk: usize, m: &DMatrix<f64>, out: &mut String| {
        for j in 0..m.ncols() {
            for i in 0..=j {
                let v = (m[(i, j)] + m[(j, i)]) * 0.5;
                if v != 0.0 {
                    out.push_str(&format!("{mat_no} {blk} {} {} {v:.17e}\n", i + 1, j + 1));
                }
            }
        }
    };

    for (bi, lmi) in lmis.iter().enumerate() {
        let c0 = lmi.eval_psd_form(&zero_asg);
        emit(0, bi + 1, &(-&c0), &mut out);
        for flat in 0..n_model {
            let asg = unit_assignment(vars, &layout, flat);
            let ck = lmi.eval_psd_form(&asg) - &c0;
            if ck.amax() > 0.0 {
                emit(flat + 1, bi + 1, &ck, &mut out);
            }
        }
    }
    if !lin_ineqs.is_empty() {
        let blk = lmis.len() + 1;
        for (ri, ineq) in lin_ineqs.iter().enumerate() {
            if ineq.constant != 0.0 {
                out.push_str(&format!(
                    "0 {blk} {} {} {:.17e}\n",
                    ri + 1,
                    ri + 1,
                    -ineq.constant
                ));
            }
            for (v, coeff) in &ineq.terms {
                out.push_str(&format!(
                    "{} {blk} {} {} {coeff:.17e}\n",
                    layout.offsets[v.0] + 1,
                    ri + 1,
                    ri + 1
                ));
            }
        }
    }
    out
}
