//! Clarabel bridge: lowers a [`ConeProgram`] to the sparse `Ax + s = b`
//! form, maps cone blocks (with the Hermitian-to-real embedding and the
//! rotated-to-plain second-order rewrite), solves, and re-verifies the
//! returned point with the independent evaluator in the parent module.

use super::{
    variable_bounds, Assignment, Cone, ConeProgram, LinExpr, Sense, SolveInfo, SolveStatus,
    verify,
};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

const SQRT2: f64 = std::f64::consts::SQRT_2;

struct RowBuilder {
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl RowBuilder {
    fn new() -> Self {
        RowBuilder {
            triplets: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
        }
    }

    /// Append one row `expr(x) = s_row`, i.e. `-a x + s = c`.
    fn push_row(&mut self, expr: &LinExpr, scale: f64) {
        let row = self.b.len();
        for (i, c) in &expr.terms {
            self.triplets.push((row, *i, -c * scale));
        }
        self.b.push(expr.constant * scale);
    }

    fn block_scale(rows: &[LinExpr]) -> f64 {
        let mag = rows
            .iter()
            .flat_map(|r| {
                r.terms
                    .iter()
                    .map(|(_, c)| c.abs())
                    .chain(std::iter::once(r.constant.abs()))
            })
            .fold(0.0f64, f64::max);
        if mag > 0.0 && mag.is_finite() {
            1.0 / mag.clamp(1e-10, 1e12)
        } else {
            1.0
        }
    }
}

/// Column-sorted CSC assembly from triplets.
fn csc_from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> CscMatrix {
    let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
    for (r, c, v) in triplets {
        per_col[*c].push((*r, *v));
    }
    let mut colptr = Vec::with_capacity(ncols + 1);
    let mut rowval = Vec::with_capacity(triplets.len());
    let mut nzval = Vec::with_capacity(triplets.len());
    colptr.push(0);
    for col in per_col.iter_mut() {
        col.sort_by_key(|(r, _)| *r);
        // merge duplicates defensively
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
        for (r, v) in col.drain(..) {
            match merged.last_mut() {
                Some((pr, pv)) if *pr == r => *pv += v,
                _ => merged.push((r, v)),
            }
        }
        for (r, v) in merged {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(nrows, ncols, colptr, rowval, nzval)
}

/// svec index of entry (p, q), p <= q, in Clarabel's upper-triangular
/// column-major PSD packing.
fn svec_index(p: usize, q: usize) -> usize {
    q * (q + 1) / 2 + p
}

/// Emit the 2n x 2n real symmetric embedding of a Hermitian expression
/// block as svec rows. `rows` holds the dof-ordered Hermitian entries.
fn emit_psd_embedding(rb: &mut RowBuilder, rows: &[LinExpr], dim: usize, scale: f64) {
    let n = dim;
    let two_n = 2 * n;
    let svec_len = two_n * (two_n + 1) / 2;
    let base = rb.b.len();
    for _ in 0..svec_len {
        rb.b.push(0.0);
    }
    // dof layout of `rows`: diag entries 0..n, then (re, im) pairs for i<j
    let off_index = |i: usize, j: usize| -> usize {
        let pair = i * n - i * (i + 1) / 2 + (j - i - 1);
        n + 2 * pair
    };
    let mut add = |p: usize, q: usize, expr: &LinExpr, sign: f64| {
        let sv = base + svec_index(p.min(q), p.max(q));
        let w = if p == q { 1.0 } else { SQRT2 } * sign * scale;
        for (i, c) in &expr.terms {
            rb.triplets.push((sv, *i, -c * w));
        }
        rb.b[sv] += expr.constant * w;
    };
    for i in 0..n {
        // top-left and bottom-right blocks: Re H
        add(i, i, &rows[i], 1.0);
        add(n + i, n + i, &rows[i], 1.0);
        for j in (i + 1)..n {
            let re = &rows[off_index(i, j)];
            let im = &rows[off_index(i, j) + 1];
            add(i, j, re, 1.0);
            add(n + i, n + j, re, 1.0);
            // top-right block is -Im H (entry (i, n+j) = -Im H_ij and
            // (j, n+i) = -Im H_ji = +Im H_ij)
            add(i, n + j, im, -1.0);
            add(j, n + i, im, 1.0);
        }
    }
    rb.cones.push(SupportedConeT::PSDTriangleConeT(two_n));
}

pub(super) fn solve_clarabel(
    program: &ConeProgram,
    tol: f64,
    max_iter: u32,
) -> (SolveInfo, Option<Assignment>) {
    let nvars = program.num_vars();
    let mut rb = RowBuilder::new();

    for blk in &program.constraints {
        let scale = RowBuilder::block_scale(&blk.rows);
        match &blk.cone {
            // products of one-dimensional cones scale row by row
            Cone::Zero => {
                for r in &blk.rows {
                    rb.push_row(r, RowBuilder::block_scale(std::slice::from_ref(r)));
                }
                rb.cones.push(SupportedConeT::ZeroConeT(blk.rows.len()));
            }
            Cone::NonNeg => {
                for r in &blk.rows {
                    rb.push_row(r, RowBuilder::block_scale(std::slice::from_ref(r)));
                }
                rb.cones
                    .push(SupportedConeT::NonnegativeConeT(blk.rows.len()));
            }
            Cone::Soc => {
                for r in &blk.rows {
                    rb.push_row(r, scale);
                }
                rb.cones
                    .push(SupportedConeT::SecondOrderConeT(blk.rows.len()));
            }
            Cone::RotatedSoc => {
                // [u, v, w..] with 2uv >= |w|^2 becomes the plain cone
                // [(u+v)/sqrt2, (u-v)/sqrt2, w..]
                let u = &blk.rows[0];
                let v = &blk.rows[1];
                let mut t = u.clone();
                t.add(v);
                t.scale(1.0 / SQRT2);
                let mut d = u.clone();
                d.add_scaled(v, -1.0);
                d.scale(1.0 / SQRT2);
                rb.push_row(&t, scale);
                rb.push_row(&d, scale);
                for r in &blk.rows[2..] {
                    rb.push_row(r, scale);
                }
                rb.cones
                    .push(SupportedConeT::SecondOrderConeT(blk.rows.len()));
            }
            Cone::Exp => {
                for r in &blk.rows {
                    rb.push_row(r, scale);
                }
                rb.cones.push(SupportedConeT::ExponentialConeT());
            }
            Cone::PsdHermitian { dim } => {
                emit_psd_embedding(&mut rb, &blk.rows, *dim, scale);
            }
        }
    }

    // variable bounds as an extra nonnegative block, one scale per row
    let (lbs, ubs) = variable_bounds(program);
    let mut bound_rows = 0usize;
    for (i, (lb, ub)) in lbs.iter().zip(&ubs).enumerate() {
        if let Some(l) = lb {
            let row = rb.b.len();
            let s = 1.0 / l.abs().max(1.0);
            rb.triplets.push((row, i, -s));
            rb.b.push(-l * s);
            bound_rows += 1;
        }
        if let Some(u) = ub {
            let row = rb.b.len();
            let s = 1.0 / u.abs().max(1.0);
            rb.triplets.push((row, i, s));
            rb.b.push(*u * s);
            bound_rows += 1;
        }
    }
    if bound_rows > 0 {
        rb.cones.push(SupportedConeT::NonnegativeConeT(bound_rows));
    }

    let a = csc_from_triplets(rb.b.len(), nvars, &rb.triplets);
    let p = CscMatrix::zeros((nvars, nvars));
    let mut q = vec![0.0; nvars];
    if let Some((obj, sense)) = program.objective() {
        let obj_sign = match sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };
        for (i, c) in &obj.terms {
            q[*i] += obj_sign * c;
        }
    }

    let verbose = std::env::var_os("ISACOPT_CONIC_VERBOSE").is_some();
    let settings = DefaultSettingsBuilder::default()
        .verbose(verbose)
        .max_iter(max_iter)
        .tol_feas(tol.min(1e-8).max(1e-9))
        .tol_gap_abs(1e-8)
        .tol_gap_rel(1e-8)
        .static_regularization_constant(1e-7)
        .reduced_tol_gap_abs(1e-4)
        .reduced_tol_gap_rel(1e-4)
        .reduced_tol_feas(1e-7)
        .build()
        .expect("static solver settings");

    let mut solver = match DefaultSolver::new(&p, &q, &a, &rb.b, &rb.cones, settings) {
        Ok(s) => s,
        Err(_) => {
            return (
                SolveInfo {
                    status: SolveStatus::IllPosed,
                    max_violation: f64::INFINITY,
                    objective: None,
                    iterations: 0,
                },
                None,
            )
        }
    };
    solver.solve();
    let sol = &solver.solution;
    let assignment = Assignment { x: sol.x.clone() };
    let iterations = sol.iterations;
    let feas_mode = program.objective().is_none();

    let finish = |status: SolveStatus, viol: f64, with_witness: bool| {
        let objective = program
            .objective()
            .filter(|_| with_witness)
            .map(|(o, _)| o.eval(&assignment.x));
        (
            SolveInfo {
                status,
                max_violation: viol,
                objective,
                iterations,
            },
            if with_witness { Some(assignment.clone()) } else { None },
        )
    };

    match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let viol = verify(program, &assignment.x);
            if feas_mode {
                // near-boundary points are conservatively rejected
                if viol <= tol {
                    finish(SolveStatus::Feasible, viol, true)
                } else {
                    finish(SolveStatus::Infeasible, viol, false)
                }
            } else if viol <= 10.0 * tol.max(1e-8) || sol.status == SolverStatus::Solved {
                finish(SolveStatus::Optimal, viol, true)
            } else {
                finish(SolveStatus::MaxIter, viol, true)
            }
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            finish(SolveStatus::Infeasible, f64::INFINITY, false)
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            // unbounded objective direction; for feasibility mode the
            // iterate may still satisfy the cones
            let viol = verify(program, &assignment.x);
            if feas_mode && viol <= tol {
                finish(SolveStatus::Feasible, viol, true)
            } else {
                finish(SolveStatus::IllPosed, viol, false)
            }
        }
        SolverStatus::MaxIterations
        | SolverStatus::MaxTime
        | SolverStatus::InsufficientProgress
        | SolverStatus::NumericalError => {
            let viol = verify(program, &assignment.x);
            if feas_mode {
                if viol <= tol {
                    finish(SolveStatus::Feasible, viol, true)
                } else {
                    finish(SolveStatus::Infeasible, viol, false)
                }
            } else {
                finish(SolveStatus::MaxIter, viol, true)
            }
        }
        _ => finish(SolveStatus::IllPosed, f64::INFINITY, false),
    }
}
