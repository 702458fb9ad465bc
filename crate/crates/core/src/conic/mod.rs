//! Self-contained interface for the convex cone programs the artifact
//! emits: linear objectives (plus log-of-affine terms via exponential
//! cones) over nonnegative, second-order, rotated second-order, PSD, and
//! exponential cones, in optimize and feasibility-check modes.
//!
//! Programs are stated over scalar variables and complex Hermitian matrix
//! variables. Hermitian PSD blocks are realified through the standard
//! `[Re, -Im; Im, Re]` symmetric embedding when handed to the numerical
//! backend, so witnesses map back to complex matrices exactly. Every
//! witness returned by [`solve`] or [`check_feasible`] is re-verified
//! against the original (unscaled) constraints by an evaluator that is
//! independent of the backend; near-boundary points that fail the
//! verification tolerance are reported infeasible to keep bisection
//! searches conservative.

mod backend;

use crate::{C64, CMat};
use std::fmt::Write as _;

/// Handle to a scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarVar {
    pub(crate) index: usize,
}

/// Handle to a complex Hermitian matrix variable of dimension `dim`.
///
/// Degrees of freedom are stored flat: `dim` real diagonal entries first,
/// then `(re, im)` pairs of the strict upper triangle in lexicographic
/// `(i, j)` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermVar {
    pub(crate) offset: usize,
    pub(crate) dim: usize,
}

impl HermVar {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn dof_diag(&self, i: usize) -> usize {
        self.offset + i
    }

    /// Flat indices of the real and imaginary parts of entry (i, j), i < j.
    fn dof_off(&self, i: usize, j: usize) -> (usize, usize) {
        debug_assert!(i < j && j < self.dim);
        let n = self.dim;
        let pair = i * n - i * (i + 1) / 2 + (j - i - 1);
        let base = self.offset + n + 2 * pair;
        (base, base + 1)
    }
}

/// Affine expression over the flat variable vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: ScalarVar) -> Self {
        LinExpr {
            terms: vec![(v.index, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(v: ScalarVar, coeff: f64) -> Self {
        LinExpr {
            terms: vec![(v.index, coeff)],
            constant: 0.0,
        }
    }

    pub fn add(&mut self, other: &LinExpr) {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
    }

    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        for (i, c) in &other.terms {
            self.terms.push((*i, c * s));
        }
        self.constant += other.constant * s;
    }

    pub fn add_term(&mut self, v: ScalarVar, coeff: f64) {
        self.terms.push((v.index, coeff));
    }

    pub fn scale(&mut self, s: f64) {
        for (_, c) in self.terms.iter_mut() {
            *c *= s;
        }
        self.constant *= s;
    }

    /// Merge duplicate indices and drop exact zeros.
    pub fn canonicalize(&mut self) {
        self.terms.sort_by_key(|(i, _)| *i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (i, c) in self.terms.drain(..) {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|(_, c)| *c != 0.0);
        self.terms = out;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(i, c)| c * x[*i]).sum::<f64>()
    }

    fn max_abs_coeff(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, c)| c.abs())
            .fold(self.constant.abs(), f64::max)
    }
}

/// Cone tag of a constraint block. Row semantics:
///
/// * `Zero` / `NonNeg` — each row `== 0` / `>= 0`;
/// * `Soc` — rows `[t, x...]` with `t >= ||x||`;
/// * `RotatedSoc` — rows `[u, v, w...]` with `2 u v >= ||w||^2`, `u, v >= 0`;
/// * `Exp` — rows `[x, y, z]` with `y e^{x/y} <= z`, `y > 0`;
/// * `PsdHermitian` — `dim^2` rows holding a Hermitian matrix in dof order
///   (diagonal first, then `(re, im)` upper-triangle pairs), `>= 0` in the
///   Loewner order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cone {
    Zero,
    NonNeg,
    Soc,
    RotatedSoc,
    Exp,
    PsdHermitian { dim: usize },
}

#[derive(Debug, Clone)]
pub struct ConstraintBlock {
    pub cone: Cone,
    pub rows: Vec<LinExpr>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Description of a convex problem over linear, second-order, PSD, and
/// exponential cones. Feasibility-mode programs carry no objective.
#[derive(Debug, Clone, Default)]
pub struct ConeProgram {
    names: Vec<String>,
    herm_dims: Vec<(usize, usize)>, // (offset, dim) per hermitian block
    lb: Vec<Option<f64>>,
    ub: Vec<Option<f64>>,
    nflat: usize,
    objective: Option<(LinExpr, Sense)>,
    pub constraints: Vec<ConstraintBlock>,
}

impl ConeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.nflat
    }

    pub fn var_name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn scalar(&mut self, name: &str, lb: Option<f64>, ub: Option<f64>) -> ScalarVar {
        let index = self.nflat;
        self.nflat += 1;
        self.names.push(name.to_string());
        self.lb.push(lb);
        self.ub.push(ub);
        ScalarVar { index }
    }

    pub fn hermitian(&mut self, name: &str, dim: usize) -> HermVar {
        let offset = self.nflat;
        self.nflat += dim * dim;
        for i in 0..dim * dim {
            self.names.push(format!("{name}[{i}]"));
            self.lb.push(None);
            self.ub.push(None);
        }
        self.herm_dims.push((offset, dim));
        HermVar { offset, dim }
    }

    /// Expression for the real trace `Tr(A H)` with Hermitian constant `A`.
    pub fn trace_expr(&self, hv: &HermVar, a: &CMat) -> LinExpr {
        self.block_trace_expr(hv, a, 0)
    }

    /// `Tr(A H_sub)` where `H_sub` is the diagonal sub-block of `H`
    /// starting at row/column `r0`, of the same dimension as `A`.
    pub fn block_trace_expr(&self, hv: &HermVar, a: &CMat, r0: usize) -> LinExpr {
        let m = a.nrows();
        debug_assert!(r0 + m <= hv.dim);
        let mut e = LinExpr::default();
        for i in 0..m {
            let aii = a[(i, i)].re;
            if aii != 0.0 {
                e.terms.push((hv.dof_diag(r0 + i), aii));
            }
            for j in (i + 1)..m {
                let aij = a[(i, j)];
                let (re, im) = hv.dof_off(r0 + i, r0 + j);
                if aij.re != 0.0 {
                    e.terms.push((re, 2.0 * aij.re));
                }
                if aij.im != 0.0 {
                    e.terms.push((im, 2.0 * aij.im));
                }
            }
        }
        e.canonicalize();
        e
    }

    /// Expression for the plain trace of a Hermitian variable.
    pub fn trace_of(&self, hv: &HermVar) -> LinExpr {
        let mut e = LinExpr::default();
        for i in 0..hv.dim {
            e.terms.push((hv.dof_diag(i), 1.0));
        }
        e
    }

    fn push_block(&mut self, cone: Cone, mut rows: Vec<LinExpr>, label: &str) {
        for r in rows.iter_mut() {
            r.canonicalize();
        }
        self.constraints.push(ConstraintBlock {
            cone,
            rows,
            label: label.to_string(),
        });
    }

    pub fn zero(&mut self, rows: Vec<LinExpr>, label: &str) {
        self.push_block(Cone::Zero, rows, label);
    }

    pub fn nonneg(&mut self, rows: Vec<LinExpr>, label: &str) {
        self.push_block(Cone::NonNeg, rows, label);
    }

    pub fn soc(&mut self, rows: Vec<LinExpr>, label: &str) {
        self.push_block(Cone::Soc, rows, label);
    }

    pub fn rotated_soc(&mut self, rows: Vec<LinExpr>, label: &str) {
        self.push_block(Cone::RotatedSoc, rows, label);
    }

    pub fn exp(&mut self, rows: [LinExpr; 3], label: &str) {
        self.push_block(Cone::Exp, rows.to_vec(), label);
    }

    /// Constrain a Hermitian matrix variable to the PSD cone.
    pub fn psd(&mut self, hv: &HermVar, label: &str) {
        let rows = (0..hv.dim * hv.dim)
            .map(|d| LinExpr {
                terms: vec![(hv.offset + d, 1.0)],
                constant: 0.0,
            })
            .collect();
        self.push_block(Cone::PsdHermitian { dim: hv.dim }, rows, label);
    }

    pub fn maximize(&mut self, obj: LinExpr) {
        let mut o = obj;
        o.canonicalize();
        self.objective = Some((o, Sense::Maximize));
    }

    pub fn minimize(&mut self, obj: LinExpr) {
        let mut o = obj;
        o.canonicalize();
        self.objective = Some((o, Sense::Minimize));
    }

    pub fn objective(&self) -> Option<&(LinExpr, Sense)> {
        self.objective.as_ref()
    }

    /// A constraint row with no variables and an unsatisfiable constant
    /// makes the whole program infeasible regardless of the solver.
    pub fn constant_infeasible(&self) -> Option<String> {
        for blk in &self.constraints {
            for row in &blk.rows {
                if row.terms.is_empty() {
                    let bad = match blk.cone {
                        Cone::Zero => row.constant.abs() > 1e-12,
                        Cone::NonNeg => row.constant < -1e-12,
                        _ => false,
                    };
                    if bad {
                        return Some(blk.label.clone());
                    }
                }
            }
        }
        None
    }

    /// Plain-text dump of the program for offline cross-checking.
    ///
    /// Format: one `var` line per scalar slot (with bounds), one
    /// `objective` line, then one block per constraint with the cone name
    /// and its rows written as `c + a1*x[i1] + ...`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vars {}", self.nflat);
        for i in 0..self.nflat {
            let _ = writeln!(
                s,
                "var {} {} lb={:?} ub={:?}",
                i, self.names[i], self.lb[i], self.ub[i]
            );
        }
        match &self.objective {
            Some((o, sense)) => {
                let _ = writeln!(s, "objective {:?} {}", sense, fmt_expr(o));
            }
            None => {
                let _ = writeln!(s, "objective feasibility");
            }
        }
        for blk in &self.constraints {
            let _ = writeln!(s, "block {:?} '{}' rows={}", blk.cone, blk.label, blk.rows.len());
            for r in &blk.rows {
                let _ = writeln!(s, "  {}", fmt_expr(r));
            }
        }
        s
    }
}

fn fmt_expr(e: &LinExpr) -> String {
    let mut s = format!("{:+.17e}", e.constant);
    for (i, c) in &e.terms {
        let _ = write!(s, " {c:+.17e}*x[{i}]");
    }
    s
}

/// Witness returned by the backend, indexed like the program variables.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub x: Vec<f64>,
}

impl Assignment {
    pub fn scalar(&self, v: ScalarVar) -> f64 {
        self.x[v.index]
    }

    /// Reconstruct a complex Hermitian matrix variable.
    pub fn hermitian(&self, hv: &HermVar) -> CMat {
        let n = hv.dim;
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(self.x[hv.dof_diag(i)], 0.0);
            for j in (i + 1)..n {
                let (re, im) = hv.dof_off(i, j);
                let v = C64::new(self.x[re], self.x[im]);
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        m
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    MaxIter,
    IllPosed,
}

/// Solve outcome: status, residual of the independent re-verification,
/// objective value (optimize mode), and backend iteration count.
#[derive(Debug, Clone)]
pub struct SolveInfo {
    pub status: SolveStatus,
    pub max_violation: f64,
    pub objective: Option<f64>,
    pub iterations: u32,
}

/// Default residual tolerance for feasibility verdicts.
pub const DEFAULT_FEAS_TOL: f64 = 1e-7;
/// Default backend iteration cap.
pub const DEFAULT_MAX_ITER: u32 = 200;

/// Solve a cone program. In optimize mode the witness attains the reported
/// objective up to the backend tolerance; in feasibility mode the verdict
/// is [`SolveStatus::Feasible`] only when the independent evaluator
/// certifies the witness within `tol`.
pub fn solve(program: &ConeProgram, tol: f64, max_iter: u32) -> (SolveInfo, Option<Assignment>) {
    if program.constant_infeasible().is_some() {
        return (
            SolveInfo {
                status: SolveStatus::Infeasible,
                max_violation: f64::INFINITY,
                objective: None,
                iterations: 0,
            },
            None,
        );
    }
    backend::solve_clarabel(program, tol, max_iter)
}

/// Feasibility check with a verified witness on success.
pub fn check_feasible(program: &ConeProgram, tol: f64) -> (bool, Option<Assignment>) {
    let (info, witness) = solve(program, tol, DEFAULT_MAX_ITER);
    match info.status {
        SolveStatus::Feasible | SolveStatus::Optimal => (true, witness),
        _ => (false, None),
    }
}

/// Normalized violation of every constraint (and variable bound) at `x`.
/// Rows are scaled by `max(1, |constant|, max |coeff|)` of their block so
/// the tolerance is meaningful across badly scaled data.
pub fn verify(program: &ConeProgram, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, (lb, ub)) in program.lb.iter().zip(&program.ub).enumerate() {
        if let Some(l) = lb {
            worst = worst.max((l - x[i]) / l.abs().max(1.0));
        }
        if let Some(u) = ub {
            worst = worst.max((x[i] - u) / u.abs().max(1.0));
        }
    }
    for blk in &program.constraints {
        worst = worst.max(block_violation(blk, x));
    }
    worst
}

fn block_violation(blk: &ConstraintBlock, x: &[f64]) -> f64 {
    let scale = blk
        .rows
        .iter()
        .map(|r| r.max_abs_coeff())
        .fold(1.0f64, f64::max);
    let vals: Vec<f64> = blk.rows.iter().map(|r| r.eval(x)).collect();
    match &blk.cone {
        Cone::Zero => vals.iter().map(|v| v.abs()).fold(0.0, f64::max) / scale,
        Cone::NonNeg => vals.iter().map(|v| -v).fold(0.0f64, f64::max) / scale,
        Cone::Soc => {
            let t = vals[0];
            let norm = vals[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm - t) / scale
        }
        Cone::RotatedSoc => {
            let (u, v) = (vals[0], vals[1]);
            let w2 = vals[2..].iter().map(|v| v * v).sum::<f64>();
            let geo = (w2 - 2.0 * u * v) / (scale * scale).max(w2.max((2.0 * u * v).abs()));
            geo.max(-u / scale).max(-v / scale)
        }
        Cone::Exp => {
            let (xx, yy, zz) = (vals[0], vals[1], vals[2]);
            if yy > 1e-300 {
                let lhs = yy * (xx / yy).exp();
                ((lhs - zz) / scale).max(-yy / scale)
            } else {
                // closure of the cone: y -> 0+ needs x <= 0 and z >= 0
                (xx / scale).max(-zz / scale).max(-yy / scale)
            }
        }
        Cone::PsdHermitian { dim } => {
            let n = *dim;
            let mut m = CMat::zeros(n, n);
            let mut mag: f64 = 1.0;
            for i in 0..n {
                m[(i, i)] = C64::new(vals[i], 0.0);
                mag = mag.max(vals[i].abs());
            }
            let mut p = n;
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = C64::new(vals[p], vals[p + 1]);
                    m[(i, j)] = v;
                    m[(j, i)] = v.conj();
                    mag = mag.max(v.norm());
                    p += 2;
                }
            }
            let eig = m.symmetric_eigen();
            let min_ev = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            -min_ev / mag
        }
    }
}

pub(crate) fn variable_bounds(program: &ConeProgram) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    (program.lb.clone(), program.ub.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sdp_eigenvalue_maximization() {
        // max Tr(CX), Tr(X) = 1, X psd, C = diag(1, 2) -> 2 at X = diag(0, 1)
        let mut p = ConeProgram::new();
        let x = p.hermitian("X", 2);
        p.psd(&x, "X psd");
        let c = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        let mut tr = p.trace_of(&x);
        tr.constant = -1.0;
        p.zero(vec![tr], "Tr(X)=1");
        let obj = p.trace_expr(&x, &c);
        p.maximize(obj);
        let (info, w) = solve(&p, 1e-8, 200);
        assert_eq!(info.status, SolveStatus::Optimal);
        assert_relative_eq!(info.objective.unwrap(), 2.0, max_relative = 1e-6);
        let m = w.unwrap().hermitian(&x);
        assert_relative_eq!(m[(1, 1)].re, 1.0, max_relative = 1e-5);
        assert!(m[(0, 0)].re.abs() < 1e-5);
    }

    #[test]
    fn rotated_cone_quadratic_over_linear() {
        // minimize t subject to t >= x^2 / y at x = 2, y = 1 -> t = 4
        let mut p = ConeProgram::new();
        let t = p.scalar("t", None, None);
        p.rotated_soc(
            vec![
                LinExpr::var(t),
                LinExpr::constant(1.0),
                LinExpr::constant(std::f64::consts::SQRT_2 * 2.0),
            ],
            "t >= x^2/y",
        );
        p.minimize(LinExpr::var(t));
        let (info, w) = solve(&p, 1e-8, 200);
        assert_eq!(info.status, SolveStatus::Optimal);
        assert_relative_eq!(w.unwrap().scalar(t), 4.0, max_relative = 1e-6);
    }

    #[test]
    fn exponential_cone_log_bound() {
        // maximize u subject to u <= ln(v) at v = e -> u = 1
        let mut p = ConeProgram::new();
        let u = p.scalar("u", None, None);
        p.exp(
            [
                LinExpr::var(u),
                LinExpr::constant(1.0),
                LinExpr::constant(std::f64::consts::E),
            ],
            "u <= ln v",
        );
        p.maximize(LinExpr::var(u));
        let (info, w) = solve(&p, 1e-8, 200);
        assert_eq!(info.status, SolveStatus::Optimal);
        assert_relative_eq!(w.unwrap().scalar(u), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut p = ConeProgram::new();
        let x = p.scalar("x", None, None);
        p.nonneg(
            vec![
                LinExpr {
                    terms: vec![(x.index, 1.0)],
                    constant: -1.0,
                },
                LinExpr {
                    terms: vec![(x.index, -1.0)],
                    constant: 0.0,
                },
            ],
            "x >= 1 and x <= 0",
        );
        let (ok, w) = check_feasible(&p, 1e-7);
        assert!(!ok);
        assert!(w.is_none());
    }

    #[test]
    fn psd_with_trace_cap_feasible() {
        let mut p = ConeProgram::new();
        let x = p.hermitian("X", 3);
        p.psd(&x, "X psd");
        let mut tr = p.trace_of(&x);
        tr.scale(-1.0);
        tr.constant += 1.0;
        p.nonneg(vec![tr], "Tr(X) <= 1");
        let (ok, w) = check_feasible(&p, 1e-7);
        assert!(ok);
        let wit = w.unwrap();
        assert!(verify(&p, &wit.x) <= 1e-7);
    }

    #[test]
    fn constant_false_row_reported_infeasible() {
        let mut p = ConeProgram::new();
        let _x = p.scalar("x", Some(0.0), Some(1.0));
        p.nonneg(vec![LinExpr::constant(-1.0)], "0 >= 1");
        let (ok, _) = check_feasible(&p, 1e-7);
        assert!(!ok);
    }

    #[test]
    fn planted_interior_points_are_found_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..25 {
            let mut p = ConeProgram::new();
            let ns = rng.random_range(2..6usize);
            let scalars: Vec<ScalarVar> =
                (0..ns).map(|i| p.scalar(&format!("s{i}"), None, None)).collect();
            let x0: Vec<f64> = (0..ns).map(|_| rng.random_range(-2.0..2.0)).collect();
            // linear rows with planted slack
            for r in 0..rng.random_range(1..5usize) {
                let mut e = LinExpr::default();
                for (v, _) in scalars.iter().zip(&x0) {
                    e.add_term(*v, rng.random_range(-1.0..1.0));
                }
                let val: f64 = e
                    .terms
                    .iter()
                    .map(|(i, c)| c * x0[*i])
                    .sum();
                e.constant = -val + rng.random_range(0.1..1.0);
                p.nonneg(vec![e], &format!("lin{r}"));
            }
            // SOC anchored at the planted point
            let mut w_rows = Vec::new();
            let mut norm2: f64 = 0.0;
            for _ in 0..2 {
                let mut e = LinExpr::default();
                for v in &scalars {
                    e.add_term(*v, rng.random_range(-1.0..1.0));
                }
                let val: f64 = e.terms.iter().map(|(i, c)| c * x0[*i]).sum::<f64>();
                e.constant = rng.random_range(-0.5..0.5);
                norm2 += (val + e.constant).powi(2);
                w_rows.push(e);
            }
            let mut rows = vec![LinExpr::constant(norm2.sqrt() + 0.3)];
            rows.extend(w_rows);
            p.soc(rows, "soc");
            // Hermitian block with an interior PSD point satisfies psd + cap
            let h = p.hermitian("H", 2);
            p.psd(&h, "H psd");
            let mut cap = p.trace_of(&h);
            cap.scale(-1.0);
            cap.constant = 10.0;
            p.nonneg(vec![cap], "Tr(H) <= 10");
            let (ok, w) = check_feasible(&p, 1e-7);
            assert!(ok, "trial {trial} should be feasible");
            assert!(verify(&p, &w.unwrap().x) <= 1e-7);
        }
    }

    #[test]
    fn verdict_invariant_to_row_scaling() {
        let build = |s: f64| {
            let mut p = ConeProgram::new();
            let x = p.scalar("x", Some(0.0), None);
            let y = p.scalar("y", Some(0.0), None);
            let mut r1 = LinExpr {
                terms: vec![(x.index, 1.0), (y.index, 1.0)],
                constant: -1.0,
            };
            let mut r2 = LinExpr {
                terms: vec![(x.index, -1.0), (y.index, 1.0)],
                constant: 0.5,
            };
            r1.scale(s);
            r2.scale(s);
            p.nonneg(vec![r1], "r1");
            p.nonneg(vec![r2], "r2");
            p
        };
        for s in [1.0, 1e-4, 37.0, 1e5] {
            let (ok, _) = check_feasible(&build(s), 1e-7);
            assert!(ok, "scale {s}");
        }
        // and an infeasible one stays infeasible
        let build_bad = |s: f64| {
            let mut p = ConeProgram::new();
            let x = p.scalar("x", Some(0.0), Some(1.0));
            let mut r = LinExpr {
                terms: vec![(x.index, 1.0)],
                constant: -2.0,
            };
            r.scale(s);
            p.nonneg(vec![r], "x >= 2");
            p
        };
        for s in [1.0, 1e-4, 1e5] {
            let (ok, _) = check_feasible(&build_bad(s), 1e-7);
            assert!(!ok, "scale {s}");
        }
    }

    #[test]
    fn hermitian_embedding_roundtrip() {
        let mut p = ConeProgram::new();
        let h = p.hermitian("H", 3);
        let x: Vec<f64> = (0..p.num_vars()).map(|i| i as f64 * 0.1 - 0.3).collect();
        let a = Assignment { x };
        let m = a.hermitian(&h);
        assert_eq!(m.adjoint(), m);
        // trace expression agrees with the dense trace
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = crate::CVec::from_fn(3, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let ga = crate::metrics::outer(&g);
        let e = p.trace_expr(&h, &ga);
        assert_relative_eq!(
            e.eval(&a.x),
            crate::metrics::Lifting::trace(&ga, &m),
            max_relative = 1e-12
        );
    }

    #[test]
    fn dump_is_parseable_text() {
        let mut p = ConeProgram::new();
        let x = p.scalar("x", Some(0.0), Some(1.0));
        p.nonneg(vec![LinExpr::var(x)], "x >= 0");
        p.maximize(LinExpr::var(x));
        let text = p.dump();
        assert!(text.contains("block NonNeg"));
        assert!(text.contains("objective Maximize"));
    }
}
