//! Conic encodings of the transformed coordination problem: the auxiliary
//! z-space box, the monotone objective, the fixed-z feasibility program
//! used by the bisection projection, the convexified SCA subproblem, and
//! the rank-one extraction that turns relaxed SDR matrices into
//! beamformers without losing utility.

use crate::conic::{Assignment, ConeProgram, HermVar, LinExpr, ScalarVar};
use crate::metrics::{self, Beamformers, LiftedSolution, Lifting};
use crate::report::ConstraintSlack;
use crate::scenario::ScenarioConfig;
use crate::sensing::SensingAccuracy;
use crate::{C64, CMat, Error, Result};

/// Auxiliary optimization vector `z = [z^C (K entries, nats), z^R, z^A]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxVector(pub Vec<f64>);

impl AuxVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn comm(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn radar(&self) -> f64 {
        self.0[self.0.len() - 2]
    }

    pub fn active(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

/// Per-BS branching state of the activation variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsDomain {
    Fixed(bool),
    Relaxed,
}

/// Branch domain: cartesian product of per-BS sub-domains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchDomain(pub Vec<BsDomain>);

impl BranchDomain {
    pub fn relaxed(num_bs: usize) -> Self {
        BranchDomain(vec![BsDomain::Relaxed; num_bs])
    }

    pub fn fixed(pattern: &[bool]) -> Self {
        BranchDomain(pattern.iter().map(|&b| BsDomain::Fixed(b)).collect())
    }

    pub fn is_integer(&self) -> bool {
        self.0.iter().all(|d| matches!(d, BsDomain::Fixed(_)))
    }

    pub fn min_active(&self) -> usize {
        self.0
            .iter()
            .filter(|d| matches!(d, BsDomain::Fixed(true)))
            .count()
    }

    pub fn max_active(&self) -> usize {
        self.0
            .iter()
            .filter(|d| !matches!(d, BsDomain::Fixed(false)))
            .count()
    }

    /// Whether any activation pattern in the domain can satisfy
    /// `1 <= sum a_b <= cap`.
    pub fn admits_feasible_count(&self, cap: usize) -> bool {
        self.max_active() >= 1 && self.min_active() <= cap
    }

    pub fn relaxed_indices(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, d)| matches!(d, BsDomain::Relaxed).then_some(i))
            .collect()
    }

    pub fn child(&self, b: usize, value: bool) -> Self {
        let mut d = self.clone();
        d.0[b] = BsDomain::Fixed(value);
        d
    }
}

/// `(o_min, o_max) = (ln min_b o_b, ln sum_b o_b)`.
pub fn cost_log_range(cfg: &ScenarioConfig) -> (f64, f64) {
    let min = cfg
        .operation_costs
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let sum: f64 = cfg.operation_costs.iter().sum();
    (min.ln(), sum.ln())
}

/// Box `[z_min, z_max]` containing the feasible z-set: rate floors and
/// single-BS capacity caps on the z^C entries, the total sensing weight on
/// z^R, and the log-cost range width on z^A.
pub fn box_bounds(cfg: &ScenarioConfig, lift: &Lifting) -> (AuxVector, AuxVector) {
    let k = cfg.num_users;
    let mut lower = Vec::with_capacity(k + 2);
    let mut upper = Vec::with_capacity(k + 2);
    let p_max = cfg.max_power_w.iter().cloned().fold(0.0f64, f64::max);
    for i in 0..k {
        lower.push(cfg.min_rate[i] * std::f64::consts::LN_2);
        let gain = lift.g_comm[i].norm_squared();
        upper.push((1.0 + p_max * gain / cfg.noise_variance).ln());
    }
    lower.push(0.0);
    upper.push(cfg.radar_weights.iter().sum());
    let (o_min, o_max) = cost_log_range(cfg);
    lower.push(0.0);
    upper.push(o_max - o_min);
    (AuxVector(lower), AuxVector(upper))
}

/// Monotone objective over z. Returns `(log-domain value, linear value)`;
/// nonpositive log arguments yield `(-inf, 0)`.
pub fn objective_eval(z: &[f64], cfg: &ScenarioConfig) -> (f64, f64) {
    let k = cfg.num_users;
    let uc = comm_utility_of_z(&z[..k], cfg);
    let zr = z[k];
    let za = z[k + 1];
    let (_, o_max) = cost_log_range(cfg);
    if uc <= 0.0 || zr <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    let log =
        cfg.alpha_comm * uc.ln() + cfg.alpha_radar * zr.ln() + cfg.alpha_active * (za - o_max);
    (log, log.exp())
}

/// `U_C(z^C) = sum_k w_k z_k / (C_k^min ln 2)`.
pub fn comm_utility_of_z(z_comm: &[f64], cfg: &ScenarioConfig) -> f64 {
    z_comm
        .iter()
        .zip(&cfg.comm_weights)
        .zip(&cfg.min_rate)
        .map(|((z, w), cmin)| w * z / (cmin * std::f64::consts::LN_2))
        .sum()
}

/// The z-vector actually achieved by a solution (rates in nats, sensing
/// utility, log-cost headroom), used for cross-checks and SCA starts.
pub fn achieved_aux(sol: &LiftedSolution, lift: &Lifting, cfg: &ScenarioConfig) -> AuxVector {
    let b = metrics::utilities(sol, lift, cfg);
    let mut z = Vec::with_capacity(cfg.num_users + 2);
    for c in &b.rates {
        z.push(c * std::f64::consts::LN_2);
    }
    z.push(b.utility_radar);
    let (_, o_max) = cost_log_range(cfg);
    z.push(o_max - b.active_cost.ln());
    AuxVector(z)
}

/// Objective selector for the fixed-z program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasObjective {
    /// Pure feasibility check (bisection step).
    None,
    /// Minimize the total communication trace; promotes low-rank witnesses
    /// ahead of the extraction step.
    MinCommTrace,
}

enum AVar {
    Fixed(f64),
    Var(ScalarVar),
}

impl AVar {
    fn expr(&self) -> LinExpr {
        match self {
            AVar::Fixed(v) => LinExpr::constant(*v),
            AVar::Var(s) => LinExpr::var(*s),
        }
    }

    fn value(&self, asn: &Assignment) -> f64 {
        match self {
            AVar::Fixed(v) => *v,
            AVar::Var(s) => asn.scalar(*s),
        }
    }
}

/// Variable handles shared by the fixed-z and SCA programs.
struct WitnessHandles {
    a: Vec<AVar>,
    v_comm: Vec<HermVar>,
    v_radar: Vec<HermVar>,
    eps_r: Vec<ScalarVar>,
    eps_d: Vec<ScalarVar>,
    eps_v: Vec<ScalarVar>,
    /// Per-target scaling of the C17 blocks, [distance, velocity]; read by
    /// the witness-encoding test oracle.
    #[cfg_attr(not(test), allow(dead_code))]
    c17_scales: Vec<[f64; 2]>,
}

impl WitnessHandles {
    fn decode(&self, asn: &Assignment) -> Witness {
        let a: Vec<f64> = self.a.iter().map(|v| v.value(asn)).collect();
        let v_comm = self.v_comm.iter().map(|h| asn.hermitian(h)).collect();
        let v_radar = self.v_radar.iter().map(|h| asn.hermitian(h)).collect();
        Witness {
            solution: LiftedSolution { a, v_comm, v_radar },
            eps_position: self.eps_d.iter().map(|s| asn.scalar(*s)).collect(),
            eps_velocity: self.eps_v.iter().map(|s| asn.scalar(*s)).collect(),
            eps_radar: self.eps_r.iter().map(|s| asn.scalar(*s)).collect(),
        }
    }
}

/// Decoded witness of a fixed-z or SCA subproblem solve.
#[derive(Debug, Clone)]
pub struct Witness {
    pub solution: LiftedSolution,
    pub eps_position: Vec<f64>,
    pub eps_velocity: Vec<f64>,
    pub eps_radar: Vec<f64>,
}

/// A built conic program plus the handles needed to decode witnesses.
pub struct FeasibilityProgram {
    pub program: ConeProgram,
    handles: WitnessHandles,
}

impl FeasibilityProgram {
    pub fn decode(&self, asn: &Assignment) -> Witness {
        self.handles.decode(asn)
    }
}

fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Emit the variables and constraints common to the fixed-z and SCA
/// programs: PSD matrix variables, activation bounds, the active-count
/// window (C7), per-BS power coupling (C11), sensing-error linking
/// (C12/C13 as variable bounds), the CRB cone constraints (C17), and the
/// radiation mask (C18).
fn build_core(
    p: &mut ConeProgram,
    cfg: &ScenarioConfig,
    lift: &Lifting,
    domain: &BranchDomain,
) -> WitnessHandles {
    let nb = cfg.num_bs;
    let nk = cfg.num_users;
    let nq = cfg.num_targets;
    let n = cfg.num_tx_antennas;

    let a: Vec<AVar> = (0..nb)
        .map(|b| match domain.0[b] {
            BsDomain::Fixed(v) => AVar::Fixed(if v { 1.0 } else { 0.0 }),
            BsDomain::Relaxed => AVar::Var(p.scalar(&format!("a{b}"), Some(0.0), Some(1.0))),
        })
        .collect();
    let v_comm: Vec<HermVar> = (0..nk)
        .map(|k| p.hermitian(&format!("Vc{k}"), nb * n))
        .collect();
    let v_radar: Vec<HermVar> = (0..nb).map(|b| p.hermitian(&format!("Vr{b}"), n)).collect();
    for (k, h) in v_comm.iter().enumerate() {
        p.psd(h, &format!("V_comm[{k}] psd"));
    }
    for (b, h) in v_radar.iter().enumerate() {
        p.psd(h, &format!("V_radar[{b}] psd"));
    }

    let eps_r: Vec<ScalarVar> = (0..nq)
        .map(|q| p.scalar(&format!("eps_r{q}"), None, None))
        .collect();
    let eps_d: Vec<ScalarVar> = (0..nq)
        .map(|q| p.scalar(&format!("eps_d{q}"), Some(0.0), Some(cfg.max_crb_position[q])))
        .collect();
    let eps_v: Vec<ScalarVar> = (0..nq)
        .map(|q| p.scalar(&format!("eps_v{q}"), Some(0.0), Some(cfg.max_crb_velocity[q])))
        .collect();

    // C7: active-count window over the branch domain
    let mut count = LinExpr::default();
    for av in &a {
        count.add(&av.expr());
    }
    let mut lo = count.clone();
    lo.constant -= 1.0;
    let mut hi = count;
    hi.scale(-1.0);
    hi.constant += cfg.max_active_bs as f64;
    p.nonneg(vec![lo, hi], "C7 active-count window");

    // C11: P_b(V) <= a_b p_b^max
    for b in 0..nb {
        let mut row = a[b].expr();
        row.scale(cfg.max_power_w[b]);
        for h in &v_comm {
            row.add_scaled(&p.block_trace_expr(h, &eye(n), b * n), -1.0);
        }
        row.add_scaled(&p.trace_of(&v_radar[b]), -1.0);
        p.nonneg(vec![row], &format!("C11 power of BS {b}"));
    }

    // C12: eps_r <= 1 - eps_d / cap and eps_r <= 1 - eps_v / cap
    for q in 0..nq {
        let mut r1 = LinExpr::constant(1.0);
        r1.add_term(eps_d[q], -1.0 / cfg.max_crb_position[q]);
        r1.add_term(eps_r[q], -1.0);
        let mut r2 = LinExpr::constant(1.0);
        r2.add_term(eps_v[q], -1.0 / cfg.max_crb_velocity[q]);
        r2.add_term(eps_r[q], -1.0);
        p.nonneg(vec![r1, r2], &format!("C12 sensing link target {q}"));
    }

    // lambda expressions per (b, q)
    let mut lambda = vec![Vec::with_capacity(nq); nb];
    for b in 0..nb {
        for q in 0..nq {
            let ghat = &lift.ghat_radar[b][q];
            let mut e = LinExpr::default();
            for h in &v_comm {
                e.add(&p.block_trace_expr(h, ghat, b * n));
            }
            e.add(&p.trace_expr(&v_radar[b], ghat));
            e.canonicalize();
            lambda[b].push(e);
        }
    }

    let mut c17_scales = vec![[1.0f64; 2]; nq];
    // C17: CRB bounds through the 2x2-inverse identity; one rotated cone
    // for the reciprocal and one quadratic-over-linear cone per diagonal.
    // Each target block is divided by its largest coefficient so the
    // helper variables live at unit scale:
    //   1/(s eps) + (J12/s)^2 / (J_ll/s) <= J_jj/s.
    for q in 0..nq {
        for (tag, eps_var, blocks) in [
            ("D", eps_d[q], &lift.fim.h_dist),
            ("V", eps_v[q], &lift.fim.h_vel),
        ] {
            let entry = |i: usize, j: usize| -> LinExpr {
                let mut e = LinExpr::default();
                for b in 0..nb {
                    e.add_scaled(&lambda[b][q], blocks[q][b][(i, j)]);
                }
                e.canonicalize();
                e
            };
            let mut j11 = entry(0, 0);
            let mut j22 = entry(1, 1);
            let mut j12 = entry(0, 1);
            let jscale = [&j11, &j22, &j12]
                .iter()
                .flat_map(|e| e.terms.iter().map(|(_, c)| c.abs()))
                .fold(0.0f64, f64::max)
                .max(1e-300);
            for e in [&mut j11, &mut j22, &mut j12] {
                e.scale(1.0 / jscale);
            }
            c17_scales[q][if tag == "D" { 0 } else { 1 }] = jscale;
            let inv = p.scalar(&format!("inv_{tag}{q}"), Some(0.0), None);
            p.rotated_soc(
                vec![
                    LinExpr::var(inv),
                    LinExpr::var(eps_var),
                    LinExpr::constant((2.0 / jscale).sqrt()),
                ],
                &format!("C17 reciprocal {tag} target {q}"),
            );
            for (jj, ll, name) in [(&j11, &j22, "11"), (&j22, &j11, "22")] {
                let s = p.scalar(&format!("qol_{tag}{q}_{name}"), Some(0.0), None);
                let mut sq = j12.clone();
                sq.scale(std::f64::consts::SQRT_2);
                p.rotated_soc(
                    vec![LinExpr::var(s), ll.clone(), sq],
                    &format!("C17 qol {tag}{name} target {q}"),
                );
                let mut row = jj.clone();
                row.add_term(inv, -1.0);
                row.add_term(s, -1.0);
                p.nonneg(vec![row], &format!("C17 diag {tag}{name} target {q}"));
            }
        }
    }

    // C18: radiation mask on every open sub-region
    let m_sub = cfg.num_subcarriers as f64;
    let mut rows = Vec::with_capacity(lift.radiation.len());
    for entry in &lift.radiation {
        let mut row = LinExpr::constant(entry.mask_w);
        for h in &v_comm {
            row.add_scaled(&p.trace_expr(h, &entry.comm_matrix), -m_sub);
        }
        for (b, h) in v_radar.iter().enumerate() {
            row.add_scaled(&p.trace_expr(h, &entry.radar_matrices[b]), -m_sub);
        }
        rows.push(row);
    }
    if !rows.is_empty() {
        p.nonneg(rows, "C18 radiation mask");
    }

    WitnessHandles {
        a,
        v_comm,
        v_radar,
        eps_r,
        eps_d,
        eps_v,
        c17_scales,
    }
}

/// Build the fixed-z program used by the bisection projection: rate floors
/// with the exponential term frozen at `zhat` (C21), the sensing-utility
/// floor (C22), the activation-cost cap (C23), and the shared core.
/// `objective` optionally turns the program into a trace-minimizing
/// refinement at the same `zhat`.
pub fn build_feasibility(
    cfg: &ScenarioConfig,
    lift: &Lifting,
    domain: &BranchDomain,
    zhat: &AuxVector,
    objective: FeasObjective,
) -> FeasibilityProgram {
    let mut p = ConeProgram::new();
    let handles = build_core(&mut p, cfg, lift, domain);
    let nk = cfg.num_users;

    // C21: F_k >= (e^{z_k} - 1) H_k with the exponential constant frozen
    for k in 0..nk {
        let gain = zhat.comm(k).exp() - 1.0;
        let mut row = p.trace_expr(&handles.v_comm[k], &lift.big_g_comm[k]);
        for (kp, h) in handles.v_comm.iter().enumerate() {
            if kp != k {
                row.add_scaled(&p.trace_expr(h, &lift.big_g_comm[k]), -gain);
            }
        }
        row.constant -= gain * cfg.noise_variance;
        p.nonneg(vec![row], &format!("C21 rate floor user {k}"));
    }

    // C22: sum_q w_q eps_r >= zhat^R
    let mut c22 = LinExpr::constant(-zhat.radar());
    for (q, w) in cfg.radar_weights.iter().enumerate() {
        c22.add_term(handles.eps_r[q], *w);
    }
    p.nonneg(vec![c22], "C22 sensing utility floor");

    // C23: sum_b a_b o_b <= exp(o_max - zhat^A); C19 bounds zhat^A itself
    let (o_min, o_max) = cost_log_range(cfg);
    let za = zhat.active();
    if !(-1e-9..=o_max - o_min + 1e-9).contains(&za) {
        p.nonneg(vec![LinExpr::constant(-1.0)], "C19 z^A out of range");
    }
    let mut c23 = LinExpr::constant((o_max - za).exp());
    for (b, o) in cfg.operation_costs.iter().enumerate() {
        c23.add_scaled(&handles.a[b].expr(), -o);
    }
    p.nonneg(vec![c23], "C23 activation cost cap");

    match objective {
        FeasObjective::None => {}
        FeasObjective::MinCommTrace => {
            let mut obj = LinExpr::default();
            for h in &handles.v_comm {
                obj.add(&p.trace_of(h));
            }
            p.minimize(obj);
        }
    }

    FeasibilityProgram { program: p, handles }
}

/// Expansion point of one SCA iteration.
#[derive(Debug, Clone)]
pub struct ScaExpansion {
    pub a: Vec<f64>,
    pub solution: LiftedSolution,
    pub z: AuxVector,
}

/// The convexified SCA subproblem and its decode handles.
pub struct ScaProgram {
    pub program: ConeProgram,
    handles: WitnessHandles,
    z_comm: Vec<ScalarVar>,
    z_radar: ScalarVar,
    z_active: ScalarVar,
    /// Constant part of the surrogate objective not handed to the solver.
    pub objective_constant: f64,
}

impl ScaProgram {
    pub fn decode(&self, asn: &Assignment) -> (Witness, AuxVector) {
        let w = self.handles.decode(asn);
        let mut z: Vec<f64> = self.z_comm.iter().map(|v| asn.scalar(*v)).collect();
        z.push(asn.scalar(self.z_radar));
        z.push(asn.scalar(self.z_active));
        (w, AuxVector(z))
    }
}

/// Build the convexified SCA subproblem at `exp_pt`: concave rate
/// minorants (C26), the linearized cost cap (C27), the sensing floor in
/// variable z (C14), z bounds (C9/C19), the shared core, and the penalized
/// epigraph objective with exponential cones for the two logarithms.
/// A fixed domain turns the penalty into a constant.
pub fn build_sca_subproblem(
    cfg: &ScenarioConfig,
    lift: &Lifting,
    domain: &BranchDomain,
    exp_pt: &ScaExpansion,
    penalty: f64,
) -> Result<ScaProgram> {
    let mut p = ConeProgram::new();
    let handles = build_core(&mut p, cfg, lift, domain);
    let nk = cfg.num_users;
    let (lower, upper) = box_bounds(cfg, lift);
    let (o_min, o_max) = cost_log_range(cfg);

    let z_comm: Vec<ScalarVar> = (0..nk)
        .map(|k| {
            p.scalar(
                &format!("z{k}"),
                Some(lower.0[k]),
                Some(upper.0[k].max(lower.0[k]) + 1e-9),
            )
        })
        .collect();
    let z_radar = p.scalar("zR", Some(0.0), Some(upper.radar()));
    let z_active = p.scalar("zA", Some(0.0), Some(o_max - o_min));

    // C26: z_k <= rate minorant around (F_i, H_i). Traces are normalized by
    // the expansion-point interference power so the cone sees SINR-scale
    // values: with Ft = F/H_i and xt = x/sqrt(H_i),
    //   z_k <= const + 2 sqrt(sinr_i) xt - sinr_i/(1+sinr_i) (Ft + Ht).
    for k in 0..nk {
        let f_i = lift.signal_power(k, &exp_pt.solution);
        let h_i = lift.interference(k, &exp_pt.solution, cfg.noise_variance);
        if !(f_i > 0.0) || !(h_i > 0.0) {
            return Err(Error::Domain(format!(
                "SCA expansion point has no signal for user {k}"
            )));
        }
        let sinr_i = f_i / h_i;
        let const_k = (1.0 + sinr_i).ln() - sinr_i;
        let xt_k = p.scalar(&format!("sqrtF{k}"), Some(0.0), None);
        // xt_k^2 <= F_k(V) / H_i
        let mut f_expr = p.trace_expr(&handles.v_comm[k], &lift.big_g_comm[k]);
        f_expr.scale(1.0 / h_i);
        p.rotated_soc(
            vec![f_expr, LinExpr::constant(0.5), LinExpr::var(xt_k)],
            &format!("C26 sqrt gain user {k}"),
        );
        // const + 2 sqrt(sinr_i) xt - (sinr_i/(1+sinr_i)) (Ft + Ht) - z_k >= 0
        let shrink = sinr_i / (1.0 + sinr_i);
        let mut row = LinExpr::constant(const_k - shrink * cfg.noise_variance / h_i);
        row.add_term(xt_k, 2.0 * sinr_i.sqrt());
        for h in &handles.v_comm {
            let mut tr = p.trace_expr(h, &lift.big_g_comm[k]);
            tr.scale(1.0 / h_i);
            row.add_scaled(&tr, -shrink);
        }
        row.add_term(z_comm[k], -1.0);
        p.nonneg(vec![row], &format!("C26 rate minorant user {k}"));
    }

    // C14: z^R <= sum_q w_q eps_r
    let mut c14 = LinExpr::term(z_radar, -1.0);
    for (q, w) in cfg.radar_weights.iter().enumerate() {
        c14.add_term(handles.eps_r[q], *w);
    }
    p.nonneg(vec![c14], "C14 sensing utility floor");

    // C27: sum_b a_b o_b <= Upsilon(z_i) + grad (z^A - z_i^A)
    let za_i = exp_pt.z.active();
    let grad = -((o_max - za_i).exp());
    let mut c27 = LinExpr::constant((o_max - za_i).exp() - grad * za_i);
    c27.add_term(z_active, grad);
    for (b, o) in cfg.operation_costs.iter().enumerate() {
        c27.add_scaled(&handles.a[b].expr(), -o);
    }
    p.nonneg(vec![c27], "C27 linearized cost cap");

    // objective epigraph: alpha_C tC + alpha_R tR + alpha_A (z^A - o_max)
    // minus the linearized binary penalty
    let t_c = p.scalar("tC", None, None);
    let t_r = p.scalar("tR", None, None);
    let mut uc = LinExpr::default();
    for (k, z) in z_comm.iter().enumerate() {
        uc.add_term(
            *z,
            cfg.comm_weights[k] / (cfg.min_rate[k] * std::f64::consts::LN_2),
        );
    }
    p.exp(
        [LinExpr::var(t_c), LinExpr::constant(1.0), uc],
        "tC <= ln U_C(z)",
    );
    p.exp(
        [
            LinExpr::var(t_r),
            LinExpr::constant(1.0),
            LinExpr::var(z_radar),
        ],
        "tR <= ln z^R",
    );

    let mut obj = LinExpr::default();
    obj.add_term(t_c, cfg.alpha_comm);
    obj.add_term(t_r, cfg.alpha_radar);
    obj.add_term(z_active, cfg.alpha_active);
    let mut constant = -cfg.alpha_active * o_max;
    // -eta (sum_b a_b - Ghat(a_i) - 2 a_i^T (a - a_i)) folded per BS
    let ghat_i: f64 = exp_pt.a.iter().map(|v| v * v).sum();
    constant -= penalty * ghat_i;
    for (b, av) in handles.a.iter().enumerate() {
        let coeff = penalty * (2.0 * exp_pt.a[b] - 1.0);
        match av {
            AVar::Fixed(v) => constant += coeff * v,
            AVar::Var(s) => obj.add_term(*s, coeff),
        }
    }
    p.maximize(obj);

    Ok(ScaProgram {
        program: p,
        handles,
        z_comm,
        z_radar,
        z_active,
        objective_constant: constant,
    })
}

/// Rank-one extraction: project each communication matrix onto the
/// direction that preserves its own-channel gain exactly, and absorb the
/// discarded PSD remainder into the per-BS sensing covariances, which
/// preserves per-BS power and the sensing weights.
pub fn rank_one_extract(sol: &LiftedSolution, lift: &Lifting) -> LiftedSolution {
    let nb = lift.num_bs;
    let n = lift.n_tx;
    let mut v_comm_star = Vec::with_capacity(sol.v_comm.len());
    let mut residual = CMat::zeros(nb * n, nb * n);
    for (k, v) in sol.v_comm.iter().enumerate() {
        let g = &lift.g_comm[k];
        let vg = v * g;
        let denom = g.dotc(&vg).re;
        if denom <= 1e-300 {
            // zero-gain user: nothing to extract
            v_comm_star.push(v.clone());
            continue;
        }
        let w = vg / C64::new(denom.sqrt(), 0.0);
        let star = metrics::outer(&w);
        residual += v - &star;
        v_comm_star.push(star);
    }
    let mut v_radar_star = sol.v_radar.clone();
    for (b, vr) in v_radar_star.iter_mut().enumerate() {
        let block = residual.view((b * n, b * n), (n, n)).into_owned();
        // re-hermitianize to scrub rounding
        let sym = (&block + block.adjoint()) * C64::new(0.5, 0.0);
        *vr += sym;
    }
    LiftedSolution {
        a: sol.a.clone(),
        v_comm: v_comm_star,
        v_radar: v_radar_star,
    }
}

/// Recover explicit beamformers from a rank-one lifted solution. The
/// communication matrices must have numerical rank at most one; the
/// sensing covariances are factored through their Hermitian square roots.
pub fn recover_beamformers(sol: &LiftedSolution, rank_tol: f64) -> Result<Beamformers> {
    let active: Vec<bool> = sol.a.iter().map(|a| *a > 0.5).collect();
    let mut w_comm = Vec::with_capacity(sol.v_comm.len());
    for (k, v) in sol.v_comm.iter().enumerate() {
        if v.norm() == 0.0 {
            w_comm.push(crate::CVec::zeros(v.nrows()));
            continue;
        }
        let eig = v.clone().symmetric_eigen();
        let mut idx = 0;
        let mut best = f64::NEG_INFINITY;
        for (i, ev) in eig.eigenvalues.iter().enumerate() {
            if *ev > best {
                best = *ev;
                idx = i;
            }
        }
        let spill: f64 = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, ev)| ev.abs())
            .fold(0.0, f64::max);
        if spill > rank_tol * best.max(1e-300) {
            return Err(Error::Contract(format!(
                "communication matrix {k} is not rank-one (spill {spill:.3e} vs top {best:.3e})"
            )));
        }
        let mut w =
            eig.eigenvectors.column(idx).into_owned() * C64::new(best.max(0.0).sqrt(), 0.0);
        // deterministic phase: largest entry real nonnegative
        if let Some(pivot) = w
            .iter()
            .cloned()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        {
            if pivot.norm() > 0.0 {
                let phase = pivot / C64::new(pivot.norm(), 0.0);
                w /= phase;
            }
        }
        w_comm.push(w);
    }
    let mut w_radar = Vec::with_capacity(sol.v_radar.len());
    for v in &sol.v_radar {
        let eig = v.clone().symmetric_eigen();
        let mut m = CMat::zeros(v.nrows(), v.ncols());
        for (i, ev) in eig.eigenvalues.iter().enumerate() {
            let s = ev.max(0.0).sqrt();
            let col = eig.eigenvectors.column(i);
            for r in 0..v.nrows() {
                for c in 0..v.ncols() {
                    m[(r, c)] += col[r] * col[c].conj() * C64::new(s, 0.0);
                }
            }
        }
        w_radar.push(m);
    }
    Ok(Beamformers {
        active,
        w_comm,
        w_radar,
    })
}

/// Turn an integer-feasible branch solution into a final report: re-solve
/// the fixed-z program at the binary activation with a trace-minimizing
/// objective (pushes the communication matrices toward rank one), apply
/// the rank-one extraction, recover beamformers, and evaluate the exact
/// metrics. Falls back to the unrefined witness if the refinement solve or
/// its audit fails; an infeasible audit on both paths yields an outage.
#[allow(clippy::too_many_arguments)]
pub fn finalize_solution(
    cfg: &ScenarioConfig,
    lift: &Lifting,
    algorithm: &str,
    activation: &[bool],
    zhat: &AuxVector,
    fallback: &LiftedSolution,
    conic_tol: f64,
) -> crate::report::SolveReport {
    use crate::report::{SolveOutcome, SolveReport};
    let start = std::time::Instant::now();
    let a_float: Vec<f64> = activation.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    // re-anchor the cost coordinate at the binary activation
    let (_, o_max) = cost_log_range(cfg);
    let cost: f64 = activation
        .iter()
        .zip(&cfg.operation_costs)
        .map(|(&on, o)| if on { *o } else { 0.0 })
        .sum();
    let mut z = zhat.clone();
    let dim = z.dim();
    z.0[dim - 1] = (o_max - cost.ln()).max(0.0);

    let domain = BranchDomain::fixed(activation);
    let fp = build_feasibility(cfg, lift, &domain, &z, FeasObjective::MinCommTrace);
    let (info, asn) = crate::conic::solve(&fp.program, conic_tol, crate::conic::DEFAULT_MAX_ITER);
    let refined = match (info.status, asn) {
        (crate::conic::SolveStatus::Optimal | crate::conic::SolveStatus::Feasible, Some(w))
        | (crate::conic::SolveStatus::MaxIter, Some(w)) => Some(fp.decode(&w).solution),
        _ => None,
    };

    let mut candidates = Vec::new();
    if let Some(mut r) = refined {
        r.a = a_float.clone();
        candidates.push(r);
    }
    let mut fb = fallback.clone();
    fb.a = a_float.clone();
    candidates.push(fb);

    let mut best_report: Option<SolveReport> = None;
    for cand in candidates {
        let extracted = rank_one_extract(&cand, lift);
        let breakdown = metrics::utilities(&extracted, lift, cfg);
        let feasible = breakdown.feasible;
        let beamformers = recover_beamformers(&extracted, 1e-5).ok();
        let report = SolveReport {
            algorithm: algorithm.to_string(),
            outcome: if feasible {
                SolveOutcome::Feasible
            } else {
                SolveOutcome::Infeasible
            },
            utility: breakdown.utility,
            upper_bound: None,
            activation: activation.to_vec(),
            slacks: audit(&extracted, lift, cfg),
            breakdown: Some(breakdown),
            iterations: 0,
            trace: Vec::new(),
            runtime_s: start.elapsed().as_secs_f64(),
            solution: Some(extracted),
            beamformers,
        };
        if feasible {
            return report;
        }
        if best_report.is_none() {
            best_report = Some(report);
        }
    }
    best_report.expect("at least one candidate evaluated")
}

/// Normalized slacks of the original constraints C1-C5 and C7 at a
/// solution; negative slack means violated.
pub fn audit(sol: &LiftedSolution, lift: &Lifting, cfg: &ScenarioConfig) -> Vec<ConstraintSlack> {
    let mut out = Vec::new();
    let sigma = cfg.noise_variance;
    for k in 0..cfg.num_users {
        let c = metrics::rate(k, sol, lift, sigma);
        out.push(ConstraintSlack {
            name: format!("C1 rate user {k}"),
            slack: (c - cfg.min_rate[k]) / cfg.min_rate[k],
        });
    }
    let lambda = lift.lambda(sol);
    for q in 0..cfg.num_targets {
        let per_bs: Vec<f64> = (0..cfg.num_bs).map(|b| lambda[b][q]).collect();
        let fim = lift.fim.assemble_fim(q, &per_bs);
        let (sd, sv) = match crate::sensing::crb(&fim) {
            SensingAccuracy::Observable { position, velocity } => (
                (cfg.max_crb_position[q] - position) / cfg.max_crb_position[q],
                (cfg.max_crb_velocity[q] - velocity) / cfg.max_crb_velocity[q],
            ),
            SensingAccuracy::Unobservable => (-1.0, -1.0),
        };
        out.push(ConstraintSlack {
            name: format!("C2 position CRB target {q}"),
            slack: sd,
        });
        out.push(ConstraintSlack {
            name: format!("C3 velocity CRB target {q}"),
            slack: sv,
        });
    }
    for entry in &lift.radiation {
        let i = metrics::radiation_of_entry(entry, sol) * cfg.num_subcarriers as f64;
        out.push(ConstraintSlack {
            name: format!("C4 radiation ({}, {})", entry.region.x, entry.region.y),
            slack: (entry.mask_w - i) / entry.mask_w,
        });
    }
    for b in 0..cfg.num_bs {
        let pb = metrics::bs_power(b, sol, cfg.num_tx_antennas);
        out.push(ConstraintSlack {
            name: format!("C5 power BS {b}"),
            slack: (sol.a[b] * cfg.max_power_w[b] - pb) / cfg.max_power_w[b],
        });
    }
    let count: f64 = sol.a.iter().sum();
    out.push(ConstraintSlack {
        name: "C7 at least one active".into(),
        slack: count - 1.0,
    });
    out.push(ConstraintSlack {
        name: "C7 active cap".into(),
        slack: (cfg.max_active_bs as f64 - count) / cfg.max_active_bs as f64,
    });
    out
}
