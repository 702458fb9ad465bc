//! Branch-and-bound over binary BS activations, bounding each branch with
//! the inner monotonic-optimization solver on the relaxed domain.
//!
//! The tree works on [`BranchDomain`]s. Each processed node is split on one
//! relaxed coordinate; both children are bounded; branches whose bound
//! falls below the incumbent are pruned. A branch solve that returns an
//! integral activation witness updates the incumbent immediately and the
//! child is re-inserted as the fully fixed domain, so the loop terminates
//! as soon as an integer domain carries the best remaining bound.

use crate::conic;
use crate::metrics::Lifting;
use crate::mo::{self, MoOptions, MoStatus, MonotoneFeasibility};
use crate::problem::{
    self, box_bounds, objective_eval, AuxVector, BranchDomain, FeasObjective, Witness,
};
use crate::report::{SolveOutcome, SolveReport, TracePoint};
use crate::scenario::{ChannelSet, ScenarioConfig};
use crate::{Error, Result};

/// Result of bounding one branch domain.
#[derive(Debug, Clone)]
pub struct BranchSolve<W> {
    /// Sound upper bound on the branch optimum (-inf when infeasible).
    pub upper: f64,
    /// Objective of the best feasible point found in the branch.
    pub best_value: f64,
    /// Activation values at the best feasible point.
    pub best_a: Option<Vec<f64>>,
    pub best_z: Option<Vec<f64>>,
    pub witness: Option<W>,
}

/// Inner-stage solver interface; the production implementation runs the
/// polyblock algorithm, tests may stub it.
pub trait BranchBounder {
    type W: Clone;
    fn bound_branch(&self, domain: &BranchDomain, incumbent: f64) -> BranchSolve<Self::W>;
}

/// Split a domain on one relaxed coordinate into the two fixed children.
pub fn branch(domain: &BranchDomain, b: usize) -> Result<(BranchDomain, BranchDomain)> {
    if !matches!(domain.0.get(b), Some(problem::BsDomain::Relaxed)) {
        return Err(Error::Contract(format!(
            "cannot branch on coordinate {b}: not relaxed"
        )));
    }
    Ok((domain.child(b, false), domain.child(b, true)))
}

/// Best integer-feasible solution found by the tree search.
#[derive(Debug, Clone)]
pub struct Incumbent<W> {
    pub value: f64,
    pub activation: Vec<bool>,
    pub z: Vec<f64>,
    pub witness: W,
}

/// One row of the branch trace.
#[derive(Debug, Clone)]
pub struct BranchRecord {
    /// Domain encoding per BS: 0, 1, or -1 for relaxed.
    pub domain: Vec<i8>,
    pub bound: f64,
    pub pruned: bool,
}

#[derive(Debug, Clone)]
pub struct BrbOutcome<W> {
    pub incumbent: Option<Incumbent<W>>,
    /// Global upper bound at termination.
    pub upper_bound: f64,
    pub iterations: usize,
    pub records: Vec<BranchRecord>,
}

struct Node {
    domain: BranchDomain,
    bound: f64,
    frac_a: Option<Vec<f64>>,
}

fn encode_domain(d: &BranchDomain) -> Vec<i8> {
    d.0.iter()
        .map(|s| match s {
            problem::BsDomain::Fixed(false) => 0,
            problem::BsDomain::Fixed(true) => 1,
            problem::BsDomain::Relaxed => -1,
        })
        .collect()
}

fn is_integral(a: &[f64]) -> bool {
    a.iter().all(|v| (v - v.round()).abs() <= 1e-6)
}

/// Run the branch-and-bound loop. `cap` is the active-count ceiling used
/// for infeasibility screening; the iteration budget is 2^B.
pub fn brb_solve<B: BranchBounder>(
    num_bs: usize,
    cap: usize,
    bounder: &B,
) -> BrbOutcome<B::W> {
    let max_iters = 1usize << num_bs;
    let mut live: Vec<Node> = vec![Node {
        domain: BranchDomain::relaxed(num_bs),
        bound: f64::INFINITY,
        frac_a: None,
    }];
    let mut incumbent: Option<Incumbent<B::W>> = None;
    let mut q_lb = f64::NEG_INFINITY;
    let mut records = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iters {
        if live.is_empty() {
            break;
        }
        iterations += 1;
        // current best branch
        let (sel, _) = live
            .iter()
            .enumerate()
            .map(|(i, n)| (i, n.bound))
            .fold((0, f64::NEG_INFINITY), |acc, (i, b)| {
                if b > acc.1 {
                    (i, b)
                } else {
                    acc
                }
            });
        if live[sel].domain.is_integer() {
            // the best remaining branch is integral: the incumbent from its
            // solve is optimal within tolerance
            break;
        }
        let node = live.swap_remove(sel);
        // branch variable: most fractional coordinate of the branch witness
        let relaxed = node.domain.relaxed_indices();
        let pick = node
            .frac_a
            .as_ref()
            .and_then(|a| {
                relaxed
                    .iter()
                    .copied()
                    .min_by(|&i, &j| {
                        let di = (a[i] - 0.5).abs();
                        let dj = (a[j] - 0.5).abs();
                        di.total_cmp(&dj).then(i.cmp(&j))
                    })
            })
            .unwrap_or_else(|| relaxed[0]);
        let (child0, child1) = branch(&node.domain, pick).expect("picked a relaxed coordinate");

        for child in [child0, child1] {
            if !child.admits_feasible_count(cap) {
                records.push(BranchRecord {
                    domain: encode_domain(&child),
                    bound: f64::NEG_INFINITY,
                    pruned: true,
                });
                continue;
            }
            let solve = bounder.bound_branch(&child, q_lb.max(0.0));
            let bound = solve.upper.min(node.bound);
            let mut inserted_domain = child.clone();
            if let (Some(a), Some(z), Some(w)) = (&solve.best_a, &solve.best_z, &solve.witness) {
                if is_integral(a) && solve.best_value > q_lb && solve.best_value.is_finite() {
                    let activation: Vec<bool> = a.iter().map(|v| v.round() > 0.5).collect();
                    q_lb = solve.best_value;
                    incumbent = Some(Incumbent {
                        value: solve.best_value,
                        activation: activation.clone(),
                        z: z.clone(),
                        witness: w.clone(),
                    });
                    // the integer witness dominates every sub-branch
                    inserted_domain = BranchDomain::fixed(&activation);
                }
            }
            let prune = bound <= q_lb && !inserted_domain.is_integer();
            records.push(BranchRecord {
                domain: encode_domain(&inserted_domain),
                bound,
                pruned: prune,
            });
            if !prune && bound.is_finite() {
                live.push(Node {
                    domain: inserted_domain,
                    bound,
                    frac_a: solve.best_a,
                });
            }
        }
        // prune stale branches against the updated incumbent
        for n in &live {
            if n.bound < q_lb {
                records.push(BranchRecord {
                    domain: encode_domain(&n.domain),
                    bound: n.bound,
                    pruned: true,
                });
            }
        }
        live.retain(|n| n.bound >= q_lb);
    }

    let upper = live
        .iter()
        .map(|n| n.bound)
        .fold(q_lb, f64::max)
        .max(q_lb);
    BrbOutcome {
        incumbent,
        upper_bound: upper,
        iterations,
        records,
    }
}

/// Membership oracle of the fixed-domain feasible z-set, backed by the
/// conic feasibility solver.
pub struct IsacFeasibility<'a> {
    pub cfg: &'a ScenarioConfig,
    pub lift: &'a Lifting,
    pub domain: BranchDomain,
    pub tol: f64,
}

impl MonotoneFeasibility for IsacFeasibility<'_> {
    type Witness = Witness;

    fn check(&self, z: &[f64]) -> Option<Witness> {
        let fp = problem::build_feasibility(
            self.cfg,
            self.lift,
            &self.domain,
            &AuxVector(z.to_vec()),
            FeasObjective::None,
        );
        let (ok, asn) = conic::check_feasible(&fp.program, self.tol);
        match (ok, asn) {
            (true, Some(a)) => Some(fp.decode(&a)),
            _ => None,
        }
    }
}

/// Production bounder: polyblock monotonic optimization per branch.
pub struct IsacBounder<'a> {
    pub cfg: &'a ScenarioConfig,
    pub lift: &'a Lifting,
    pub mo_opts: MoOptions,
    pub conic_tol: f64,
}

impl BranchBounder for IsacBounder<'_> {
    type W = Witness;

    fn bound_branch(&self, domain: &BranchDomain, incumbent: f64) -> BranchSolve<Witness> {
        let (lo, hi) = box_bounds(self.cfg, self.lift);
        let feas = IsacFeasibility {
            cfg: self.cfg,
            lift: self.lift,
            domain: domain.clone(),
            tol: self.conic_tol,
        };
        let opts = MoOptions {
            incumbent,
            ..self.mo_opts
        };
        let out = mo::solve_mo(
            &lo.0,
            &hi.0,
            |z| objective_eval(z, self.cfg).1,
            &feas,
            &opts,
        );
        if out.status == MoStatus::Infeasible {
            return BranchSolve {
                upper: f64::NEG_INFINITY,
                best_value: f64::NEG_INFINITY,
                best_a: None,
                best_z: None,
                witness: None,
            };
        }
        let best_a = out.witness.as_ref().map(|w| w.solution.a.clone());
        BranchSolve {
            upper: out.upper_bound,
            best_value: out.best_value,
            best_a,
            best_z: out.best_z,
            witness: out.witness,
        }
    }
}

/// Options of the full MO-BRB pipeline.
#[derive(Debug, Clone, Copy)]
pub struct MoBrbOptions {
    pub mo: MoOptions,
    pub conic_tol: f64,
}

impl Default for MoBrbOptions {
    fn default() -> Self {
        MoBrbOptions {
            mo: MoOptions::default(),
            conic_tol: 1e-7,
        }
    }
}

/// Optimal joint activation and beamforming: branch-and-bound over
/// activations with monotonic optimization bounding, then witness
/// refinement, rank-one extraction, and exact metric evaluation.
pub fn mo_brb_solve(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    opts: &MoBrbOptions,
) -> Result<SolveReport> {
    let start = std::time::Instant::now();
    let lift = Lifting::build(cfg, channels)?;
    let bounder = IsacBounder {
        cfg,
        lift: &lift,
        mo_opts: opts.mo,
        conic_tol: opts.conic_tol,
    };
    let out = brb_solve(cfg.num_bs, cfg.max_active_bs, &bounder);
    let Some(inc) = out.incumbent else {
        return Ok(SolveReport::outage(
            "mobrb",
            cfg.num_bs,
            start.elapsed().as_secs_f64(),
        ));
    };
    let mut report = problem::finalize_solution(
        cfg,
        &lift,
        "mobrb",
        &inc.activation,
        &AuxVector(inc.z.clone()),
        &inc.witness.solution,
        opts.conic_tol,
    );
    report.upper_bound = Some(out.upper_bound);
    report.outcome = match report.outcome {
        SolveOutcome::Feasible => SolveOutcome::Optimal,
        other => other,
    };
    report.iterations = out.iterations;
    report.trace = out
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| TracePoint {
            iteration: i + 1,
            lower: if r.pruned { f64::NAN } else { r.bound },
            upper: r.bound,
        })
        .collect();
    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}
