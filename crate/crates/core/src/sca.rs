//! Low-complexity solver: penalty relaxation of the binary activations,
//! successive convexification of the rate and cost-cap constraints, and a
//! rounding pass with one final convex solve at the fixed binary pattern.

use crate::metrics::{self, LiftedSolution, Lifting};
use crate::problem::{
    self, achieved_aux, AuxVector, BranchDomain, ScaExpansion,
};
use crate::report::{SolveOutcome, SolveReport, TracePoint};
use crate::scenario::{ChannelSet, ScenarioConfig};
use crate::{conic, C64, CMat, Result};
use rand::{Rng, RngExt};

/// Options of the SCA loop.
#[derive(Debug, Clone, Copy)]
pub struct ScaOptions {
    /// Penalty factor on non-binary activations.
    pub eta: f64,
    /// Stop once the surrogate objective moves less than this.
    pub conv_tol: f64,
    pub max_iters: usize,
    /// Random restarts before declaring the initialization infeasible.
    pub restarts: usize,
    pub conic_tol: f64,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            eta: 15.0,
            conv_tol: 1e-2,
            max_iters: 50,
            restarts: 5,
            conic_tol: 1e-7,
        }
    }
}

/// One SCA iterate.
#[derive(Debug, Clone)]
pub struct ScaState {
    pub iteration: usize,
    pub activation: Vec<f64>,
    pub solution: LiftedSolution,
    pub z: AuxVector,
    /// Penalized surrogate objective (log domain).
    pub objective: f64,
}

/// Concave minorant of the rate ln(1 + F/H) around the expansion point
/// `at`, evaluated at `sol`.
pub fn minorant_rate(
    sol: &LiftedSolution,
    at: &LiftedSolution,
    k: usize,
    lift: &Lifting,
    sigma: f64,
) -> f64 {
    let f_i = lift.signal_power(k, at);
    let h_i = lift.interference(k, at, sigma);
    let f = lift.signal_power(k, sol);
    let h = lift.interference(k, sol, sigma);
    (1.0 + f_i / h_i).ln() - f_i / h_i + 2.0 * (f_i * f).sqrt() / h_i
        - f_i * (f + h) / (h_i * (f_i + h_i))
}

/// Affine minorant of `sum_b a_b^2` around `a_i`.
pub fn minorant_ghat(a: &[f64], a_i: &[f64]) -> f64 {
    let ghat_i: f64 = a_i.iter().map(|v| v * v).sum();
    let lin: f64 = a_i.iter().zip(a).map(|(ai, av)| 2.0 * ai * (av - ai)).sum();
    ghat_i + lin
}

/// Affine minorant of the cost cap Upsilon(z) = e^{o_max - z^A} around
/// `z_a_i`.
pub fn minorant_upsilon(z_a: f64, z_a_i: f64, o_max: f64) -> f64 {
    let v = (o_max - z_a_i).exp();
    v - v * (z_a - z_a_i)
}

/// Penalized surrogate objective (log domain).
fn p6_objective(z: &AuxVector, a: &[f64], eta: f64, cfg: &ScenarioConfig) -> f64 {
    let (log, _) = problem::objective_eval(&z.0, cfg);
    let gap: f64 = a.iter().map(|v| v - v * v).sum();
    log - eta * gap
}

/// Build an initial solution on a fixed active set: per-user maximum-ratio
/// beams and an isotropic sensing covariance, power-split by `rho`, scaled
/// to clear the radiation mask with margin.
fn initialize(
    cfg: &ScenarioConfig,
    lift: &Lifting,
    active: &[bool],
    rho: f64,
) -> (LiftedSolution, crate::metrics::UtilityBreakdown) {
    let n = cfg.num_tx_antennas;
    let nb = cfg.num_bs;
    let nk = cfg.num_users;
    let mut w_comm = Vec::with_capacity(nk);
    for k in 0..nk {
        let mut w = crate::CVec::zeros(nb * n);
        for b in 0..nb {
            if !active[b] {
                continue;
            }
            let slice = lift.g_comm[k].rows(b * n, n).into_owned();
            let norm = slice.norm();
            if norm > 0.0 {
                let p_share = (rho * cfg.max_power_w[b] / nk as f64).sqrt();
                let scaled = slice * C64::new(p_share / norm, 0.0);
                w.rows_mut(b * n, n).copy_from(&scaled);
            }
        }
        w_comm.push(w);
    }
    let w_radar: Vec<CMat> = (0..nb)
        .map(|b| {
            if active[b] {
                CMat::identity(n, n)
                    * C64::new(((1.0 - rho) * cfg.max_power_w[b] / n as f64).sqrt(), 0.0)
            } else {
                CMat::zeros(n, n)
            }
        })
        .collect();
    let bf = metrics::Beamformers {
        active: active.to_vec(),
        w_comm,
        w_radar,
    };
    let mut sol = LiftedSolution::from_beamformers(&bf);
    // scale down to clear the radiation mask and the power budget with margin
    let mut worst = 0.0f64;
    for entry in &lift.radiation {
        let i = metrics::radiation_of_entry(entry, &sol) * cfg.num_subcarriers as f64;
        worst = worst.max(i / entry.mask_w);
    }
    let t = (0.95 / worst).min(0.999);
    if t < 1.0 {
        for v in sol.v_comm.iter_mut().chain(sol.v_radar.iter_mut()) {
            *v *= C64::new(t, 0.0);
        }
    }
    let breakdown = metrics::utilities(&sol, lift, cfg);
    (sol, breakdown)
}

/// Guard against a degenerate expansion point: any user whose own-signal
/// trace vanished gets a small maximum-ratio component re-injected.
fn prepare_expansion(
    cfg: &ScenarioConfig,
    lift: &Lifting,
    mut sol: LiftedSolution,
) -> LiftedSolution {
    let floor = 1e-9
        * cfg
            .max_power_w
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
    for k in 0..cfg.num_users {
        if lift.signal_power(k, &sol) <= 0.0 {
            let g = &lift.g_comm[k];
            let nrm = g.norm_squared();
            if nrm > 0.0 {
                sol.v_comm[k] += metrics::outer(g) * C64::new(floor / nrm, 0.0);
            }
        }
    }
    sol
}

/// Round a relaxed activation to binary, repairing the active count into
/// `[1, cap]` by fractional-value order.
pub fn round_activation(a: &[f64], cap: usize) -> Vec<bool> {
    let mut on: Vec<bool> = a.iter().map(|v| *v >= 0.5).collect();
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[j].total_cmp(&a[i]));
    let mut count = on.iter().filter(|&&b| b).count();
    // too many: drop the weakest actives
    for &i in order.iter().rev() {
        if count <= cap {
            break;
        }
        if on[i] {
            on[i] = false;
            count -= 1;
        }
    }
    // none: bring in the strongest
    if count == 0 {
        on[order[0]] = true;
    }
    on
}

/// Zero the matrix blocks of deactivated BSs so a rounded-down activation
/// stays power-consistent.
fn zero_inactive(sol: &mut LiftedSolution, active: &[bool], n: usize) {
    for (b, &on) in active.iter().enumerate() {
        if on {
            continue;
        }
        for v in sol.v_comm.iter_mut() {
            for r in 0..v.nrows() {
                for c in 0..n {
                    v[(r, b * n + c)] = C64::new(0.0, 0.0);
                    v[(b * n + c, r)] = C64::new(0.0, 0.0);
                }
            }
        }
        sol.v_radar[b].fill(C64::new(0.0, 0.0));
    }
}

/// SCA pipeline. `fixed_activation` freezes the activation pattern (the
/// baseline schemes use this) and drops the penalty term.
pub fn sca_solve(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    opts: &ScaOptions,
    fixed_activation: Option<&[bool]>,
    rng: &mut impl Rng,
) -> Result<SolveReport> {
    let start = std::time::Instant::now();
    let lift = Lifting::build(cfg, channels)?;

    for attempt in 0..=opts.restarts {
        // initial activation: fixed pattern, or all BSs capped by priority
        let active: Vec<bool> = match fixed_activation {
            Some(a) => a.to_vec(),
            None => {
                let scores = crate::baselines::priority_scores(channels, cfg);
                let mut order: Vec<usize> = (0..cfg.num_bs).collect();
                order.sort_by(|&i, &j| scores.0[j].total_cmp(&scores.0[i]));
                let mut on = vec![false; cfg.num_bs];
                for &b in order.iter().take(cfg.max_active_bs) {
                    on[b] = true;
                }
                on
            }
        };
        let rho = if attempt == 0 {
            0.5
        } else {
            rng.random_range(0.15..0.85)
        };
        let (sol0, breakdown0) = initialize(cfg, &lift, &active, rho);
        if !breakdown0.feasible {
            continue;
        }

        let domain = match fixed_activation {
            Some(a) => BranchDomain::fixed(a),
            None => BranchDomain::relaxed(cfg.num_bs),
        };
        let eta = if fixed_activation.is_some() { 0.0 } else { opts.eta };

        let mut state = ScaState {
            iteration: 0,
            activation: active.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            z: achieved_aux(&sol0, &lift, cfg),
            objective: 0.0,
            solution: sol0,
        };
        state.objective = p6_objective(&state.z, &state.activation, eta, cfg);
        let mut trace = vec![TracePoint {
            iteration: 0,
            lower: state.objective,
            upper: f64::INFINITY,
        }];
        let mut solved_once = false;

        for it in 1..=opts.max_iters {
            let exp_pt = ScaExpansion {
                a: state.activation.clone(),
                solution: prepare_expansion(cfg, &lift, state.solution.clone()),
                z: state.z.clone(),
            };
            let Ok(prog) = problem::build_sca_subproblem(cfg, &lift, &domain, &exp_pt, eta)
            else {
                break;
            };
            let (info, asn) = conic::solve(&prog.program, opts.conic_tol, 200);
            let witness = match (info.status, asn) {
                (conic::SolveStatus::Optimal, Some(w)) => w,
                (conic::SolveStatus::MaxIter, Some(w)) if solved_once => w,
                _ => break,
            };
            let (w, z_new) = prog.decode(&witness);
            solved_once = true;
            let objective = p6_objective(&z_new, &w.solution.a, eta, cfg);
            let delta = (objective - state.objective).abs();
            state = ScaState {
                iteration: it,
                activation: w.solution.a.clone(),
                solution: w.solution,
                z: z_new,
                objective,
            };
            trace.push(TracePoint {
                iteration: it,
                lower: objective,
                upper: delta,
            });
            if delta < opts.conv_tol {
                break;
            }
        }
        if !solved_once {
            continue;
        }

        // rounding and one final convex solve at the fixed binary pattern
        let binary = match fixed_activation {
            Some(a) => a.to_vec(),
            None => round_activation(&state.activation, cfg.max_active_bs),
        };
        let mut final_sol = state.solution.clone();
        zero_inactive(&mut final_sol, &binary, cfg.num_tx_antennas);
        final_sol.a = binary.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let mut final_z = achieved_aux(&final_sol, &lift, cfg);
        let fixed_domain = BranchDomain::fixed(&binary);
        let refine_pt = ScaExpansion {
            a: final_sol.a.clone(),
            solution: prepare_expansion(cfg, &lift, final_sol.clone()),
            z: final_z.clone(),
        };
        if let Ok(prog) = problem::build_sca_subproblem(cfg, &lift, &fixed_domain, &refine_pt, 0.0)
        {
            let (info, asn) = conic::solve(&prog.program, opts.conic_tol, 200);
            if let (conic::SolveStatus::Optimal | conic::SolveStatus::MaxIter, Some(w)) =
                (info.status, asn)
            {
                let (wit, z_ref) = prog.decode(&w);
                final_sol = wit.solution;
                final_z = z_ref;
            }
        }

        let mut report = problem::finalize_solution(
            cfg,
            &lift,
            "sca",
            &binary,
            &final_z,
            &final_sol,
            opts.conic_tol,
        );
        if report.outcome != SolveOutcome::Infeasible {
            report.iterations = state.iteration;
            report.trace = trace;
            report.runtime_s = start.elapsed().as_secs_f64();
            return Ok(report);
        }
    }
    Ok(SolveReport::outage(
        "sca",
        cfg.num_bs,
        start.elapsed().as_secs_f64(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::cost_log_range;
    use crate::scenario::{sample_channels, ScenarioSpec};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn setup(seed: u64) -> (ScenarioConfig, ChannelSet, Lifting) {
        let mut spec = ScenarioSpec::desk_default();
        spec.num_bs = 2;
        spec.num_users = 2;
        spec.num_targets = 1;
        spec.num_tx_antennas = 2;
        spec.max_active_bs = 2;
        spec.min_rate_bps_hz = 0.3;
        spec.max_crb_position = 60.0;
        spec.max_crb_velocity = 100.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = spec.resolve(&mut rng).unwrap();
        let ch = sample_channels(&cfg, &mut rng).unwrap();
        let lift = Lifting::build(&cfg, &ch).unwrap();
        (cfg, ch, lift)
    }

    fn random_solution(rng: &mut impl Rng, cfg: &ScenarioConfig, scale: f64) -> LiftedSolution {
        let n = cfg.num_tx_antennas;
        let nb = cfg.num_bs;
        let herm = |rng: &mut dyn rand::Rng, d: usize| {
            let m = CMat::from_fn(d, d, |_, _| {
                C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
            });
            &m * m.adjoint() * C64::new(scale, 0.0)
        };
        LiftedSolution {
            a: vec![1.0; nb],
            v_comm: (0..cfg.num_users).map(|_| herm(rng, nb * n)).collect(),
            v_radar: (0..nb).map(|_| herm(rng, n)).collect(),
        }
    }

    #[test]
    fn rate_minorant_tangent_at_expansion() {
        let (cfg, _ch, lift) = setup(100);
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        for _ in 0..50 {
            let v = random_solution(&mut rng, &cfg, 1e-3);
            for k in 0..cfg.num_users {
                let f = lift.signal_power(k, &v);
                let h = lift.interference(k, &v, cfg.noise_variance);
                let truth = (1.0 + f / h).ln();
                let m = minorant_rate(&v, &v, k, &lift, cfg.noise_variance);
                assert_relative_eq!(m, truth, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn rate_minorant_dominated_by_truth() {
        let (cfg, _ch, lift) = setup(101);
        let mut rng = ChaCha8Rng::seed_from_u64(1010);
        for _ in 0..1000 {
            let s1 = 10f64.powf(rng.random_range(-5.0..-2.0));
            let s2 = 10f64.powf(rng.random_range(-5.0..-2.0));
            let v = random_solution(&mut rng, &cfg, s1);
            let vi = random_solution(&mut rng, &cfg, s2);
            let k = rng.random_range(0..cfg.num_users);
            let f = lift.signal_power(k, &v);
            let h = lift.interference(k, &v, cfg.noise_variance);
            let truth = (1.0 + f / h).ln();
            let m = minorant_rate(&v, &vi, k, &lift, cfg.noise_variance);
            assert!(
                m <= truth + 1e-9,
                "minorant {m} exceeds true value {truth}"
            );
        }
    }

    #[test]
    fn rate_minorant_concave_in_scale() {
        // midpoint concavity along t -> minorant(t V_k) with interference fixed
        let (cfg, _ch, lift) = setup(102);
        let mut rng = ChaCha8Rng::seed_from_u64(1020);
        let vi = random_solution(&mut rng, &cfg, 1e-3);
        let base = random_solution(&mut rng, &cfg, 1e-3);
        let eval = |t: f64| {
            let mut v = base.clone();
            v.v_comm[0] *= C64::new(t, 0.0);
            minorant_rate(&v, &vi, 0, &lift, cfg.noise_variance)
        };
        for _ in 0..100 {
            let t1: f64 = rng.random_range(0.01..1.0);
            let t2: f64 = rng.random_range(0.01..1.0);
            let mid = 0.5 * (t1 + t2);
            assert!(eval(mid) >= 0.5 * (eval(t1) + eval(t2)) - 1e-10);
        }
    }

    #[test]
    fn ghat_minorant_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for _ in 0..1000 {
            let n = rng.random_range(1..6);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let ai: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let truth: f64 = a.iter().map(|v| v * v).sum();
            assert!(minorant_ghat(&a, &ai) <= truth + 1e-12);
            assert_relative_eq!(minorant_ghat(&a, &a), truth, max_relative = 1e-12);
        }
        // expansion at zero lower-bounds by zero
        assert_eq!(minorant_ghat(&[0.3, 0.9], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn upsilon_minorant_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let o_max = 2.3;
        for _ in 0..1000 {
            let z: f64 = rng.random_range(0.0..2.0);
            let zi: f64 = rng.random_range(0.0..2.0);
            let truth = (o_max - z).exp();
            assert!(minorant_upsilon(z, zi, o_max) <= truth + 1e-9);
        }
        let z = 1.234;
        assert_relative_eq!(
            minorant_upsilon(z, z, o_max),
            (o_max - z).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn penalty_vanishes_at_binary_points() {
        let a = [1.0, 0.0, 1.0];
        let gap: f64 = a.iter().map(|v| v - v * v).sum();
        assert_eq!(gap, 0.0);
        assert_relative_eq!(
            minorant_ghat(&a, &a),
            a.iter().map(|v| v * v).sum::<f64>(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn round_activation_repairs_count() {
        assert_eq!(round_activation(&[0.9, 0.8, 0.7], 2), vec![true, true, false]);
        assert_eq!(round_activation(&[0.1, 0.2], 2), vec![false, true]);
        assert_eq!(round_activation(&[0.6, 0.7, 0.9], 3), vec![true, true, true]);
    }

    #[test]
    fn sca_converges_and_audits_on_small_instance() {
        let (cfg, ch, lift) = setup(105);
        let mut rng = ChaCha8Rng::seed_from_u64(1050);
        let report = sca_solve(&cfg, &ch, &ScaOptions::default(), None, &mut rng).unwrap();
        assert_ne!(report.outcome, SolveOutcome::Infeasible, "{:?}", report.breakdown);
        assert!(report.utility > 0.0);
        // objective trace nondecreasing within tolerance
        let objs: Vec<f64> = report.trace.iter().map(|t| t.lower).collect();
        for w in objs.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "objective decreased: {w:?}");
        }
        for s in &report.slacks {
            assert!(s.slack >= -1e-6, "violated {}: {}", s.name, s.slack);
        }
        let _ = (lift, cost_log_range(&cfg));
    }

    #[test]
    fn sca_with_fixed_activation() {
        let (cfg, ch, _lift) = setup(106);
        let mut rng = ChaCha8Rng::seed_from_u64(1060);
        let fixed = vec![true, false];
        let report =
            sca_solve(&cfg, &ch, &ScaOptions::default(), Some(&fixed), &mut rng).unwrap();
        if report.outcome != SolveOutcome::Infeasible {
            assert_eq!(report.activation, fixed);
        }
    }
}
