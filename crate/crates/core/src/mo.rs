//! Outer polyblock monotonic optimization with bisection projection.
//!
//! Maximizes an increasing objective over a normal (downward-closed) feasible
//! set known only through a membership oracle. The polyblock vertex set
//! outer-approximates the feasible region; each iteration projects the best
//! vertex onto the feasible boundary along the ray from the lower vertex and
//! replaces it with up to N trimmed vertices.
//!
//! The bisection keeps two points per projection: the last feasible point
//! (valid lower bound and witness carrier) and the first infeasible point
//! (used for the vertex cut, which keeps the feasible set inside the shrunk
//! polyblock).

use crate::report::TracePoint;

/// Membership oracle of a normal closed feasible set.
pub trait MonotoneFeasibility {
    type Witness: Clone;
    /// Return a witness when `z` is feasible.
    fn check(&self, z: &[f64]) -> Option<Self::Witness>;
}

/// Options of the outer polyblock loop.
#[derive(Debug, Clone, Copy)]
pub struct MoOptions {
    /// Relative termination tolerance: stop once ub <= (1 + rho) lb.
    pub rho: f64,
    /// Bisection interval tolerance for the projection.
    pub rho_bisect: f64,
    /// Vertex budget; exceeding it returns with valid bounds.
    pub max_vertices: usize,
    /// Lower bound inherited from an incumbent (linear domain).
    pub incumbent: f64,
}

impl Default for MoOptions {
    fn default() -> Self {
        MoOptions {
            rho: 0.05,
            rho_bisect: 1e-2,
            max_vertices: 5000,
            incumbent: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoStatus {
    /// ub <= (1 + rho) lb or the vertex set is exhausted.
    Converged,
    /// Vertex budget reached; bounds are still valid.
    VertexBudget,
    /// The lower vertex itself is infeasible.
    Infeasible,
}

/// Result of one monotonic-optimization run (linear-domain values).
#[derive(Debug, Clone)]
pub struct MoOutcome<W> {
    pub status: MoStatus,
    /// Sound upper bound on the optimum over the feasible set.
    pub upper_bound: f64,
    /// Objective of the best feasible point found.
    pub best_value: f64,
    pub best_z: Option<Vec<f64>>,
    pub witness: Option<W>,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
}

/// Projection of `z_star` onto the feasible boundary along the segment from
/// `z_min`, by bisection on the scale factor.
#[derive(Debug, Clone)]
pub struct Projection<W> {
    /// Largest scale factor verified feasible.
    pub delta_feasible: f64,
    /// Feasible point `z_min + delta_feasible (z_star - z_min)`.
    pub proj_feasible: Vec<f64>,
    /// Cut point from the first infeasible scale (equals `proj_feasible`
    /// when `z_star` itself is feasible).
    pub proj_cut: Vec<f64>,
    /// Witness at the feasible point, when any interior point was found.
    pub witness: Option<W>,
}

fn lerp(z_min: &[f64], z_star: &[f64], delta: f64) -> Vec<f64> {
    z_min
        .iter()
        .zip(z_star)
        .map(|(lo, hi)| lo + delta * (hi - lo))
        .collect()
}

/// Bisection projection (pre: `z_min` feasible, checked by the caller).
pub fn project<F: MonotoneFeasibility>(
    z_min: &[f64],
    z_star: &[f64],
    feas: &F,
    rho_bisect: f64,
) -> Projection<F::Witness> {
    if let Some(w) = feas.check(z_star) {
        return Projection {
            delta_feasible: 1.0,
            proj_feasible: z_star.to_vec(),
            proj_cut: z_star.to_vec(),
            witness: Some(w),
        };
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut witness = None;
    while hi - lo >= rho_bisect {
        let mid = 0.5 * (lo + hi);
        match feas.check(&lerp(z_min, z_star, mid)) {
            Some(w) => {
                lo = mid;
                witness = Some(w);
            }
            None => hi = mid,
        }
    }
    Projection {
        delta_feasible: lo,
        proj_feasible: lerp(z_min, z_star, lo),
        proj_cut: lerp(z_min, z_star, hi),
        witness,
    }
}

/// Vertex update: replace `z_star` by up to N vertices
/// `z_star - (z_star - proj)_n e_n`. Coordinates that did not move are
/// skipped (duplicates of `z_star`), and vertices whose trimmed coordinate
/// comes within `drop_tol` of the lower vertex are dropped for convergence.
pub fn split_vertex(z_star: &[f64], proj: &[f64], z_min: &[f64], drop_tol: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for n in 0..z_star.len() {
        let cut = z_star[n] - proj[n];
        if cut <= 0.0 {
            continue;
        }
        if proj[n] - z_min[n] <= drop_tol {
            continue;
        }
        let mut v = z_star.to_vec();
        v[n] = proj[n];
        out.push(v);
    }
    out
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| *x >= *y - 1e-12)
}

/// Maximize the increasing `objective` (linear domain, nonnegative) over
/// the feasible set described by `feas`, inside the box `[z_min, z_max]`.
pub fn solve_mo<F, O>(
    z_min: &[f64],
    z_max: &[f64],
    objective: O,
    feas: &F,
    opts: &MoOptions,
) -> MoOutcome<F::Witness>
where
    F: MonotoneFeasibility,
    O: Fn(&[f64]) -> f64,
{
    let Some(base_witness) = feas.check(z_min) else {
        return MoOutcome {
            status: MoStatus::Infeasible,
            upper_bound: f64::NEG_INFINITY,
            best_value: f64::NEG_INFINITY,
            best_z: None,
            witness: None,
            iterations: 0,
            trace: Vec::new(),
        };
    };

    let mut best_value = objective(z_min);
    let mut best_z = z_min.to_vec();
    let mut witness = Some(base_witness);
    let mut lb = best_value.max(opts.incumbent);
    let mut vertices: Vec<Vec<f64>> = vec![z_max.to_vec()];
    let mut ub;
    let mut trace = Vec::new();
    let mut status = MoStatus::Converged;
    let mut iterations = 0;

    loop {
        if vertices.is_empty() {
            ub = lb;
            break;
        }
        // best vertex, ties broken lexicographically
        let mut best_idx = 0;
        let mut best_obj = f64::NEG_INFINITY;
        for (i, v) in vertices.iter().enumerate() {
            let o = objective(v);
            let better =
                o > best_obj || (o == best_obj && v.as_slice() < vertices[best_idx].as_slice());
            if better {
                best_obj = o;
                best_idx = i;
            }
        }
        ub = best_obj;
        iterations += 1;
        trace.push(TracePoint {
            iteration: iterations,
            lower: lb,
            upper: ub,
        });
        if ub <= (1.0 + opts.rho) * lb {
            break;
        }
        let z_star = vertices.swap_remove(best_idx);
        let proj = project(z_min, &z_star, feas, opts.rho_bisect);
        if proj.witness.is_some() {
            let val = objective(&proj.proj_feasible);
            if val > best_value {
                best_value = val;
                best_z = proj.proj_feasible.clone();
                witness = proj.witness;
            }
            lb = lb.max(best_value);
        }
        if proj.delta_feasible >= 1.0 {
            // the vertex is feasible: it is optimal within its own box
            ub = objective(&z_star);
            break;
        }
        let fresh = split_vertex(&z_star, &proj.proj_cut, z_min, opts.rho_bisect);
        for cand in fresh {
            let dup = vertices
                .iter()
                .any(|v| v.iter().zip(&cand).all(|(a, b)| (a - b).abs() <= 1e-9));
            if dup {
                continue;
            }
            if vertices.iter().any(|v| dominates(v, &cand)) {
                continue;
            }
            vertices.retain(|v| !dominates(&cand, v));
            vertices.push(cand);
        }
        if vertices.len() > opts.max_vertices {
            status = MoStatus::VertexBudget;
            break;
        }
    }

    MoOutcome {
        status,
        upper_bound: ub.max(lb),
        best_value,
        best_z: Some(best_z),
        witness,
        iterations,
        trace,
    }
}
