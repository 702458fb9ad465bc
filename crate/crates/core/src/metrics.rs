//! Per-user rate, per-BS power, radiation footprint, and the combined
//! sensing-and-communication utility for candidate solutions.
//!
//! Solutions are carried in lifted (SDR) form: an activation vector plus
//! one PSD matrix per user over the stacked BS array and one PSD covariance
//! per BS for the sensing signal. All quadratic metrics become traces
//! against precomputed channel outer products, cached in [`Lifting`].

use crate::scenario::{ChannelSet, ScenarioConfig, SubRegion};
use crate::sensing::{self, FimIngredients, SensingAccuracy};
use crate::{C64, CMat, CVec, Error, Result};
use serde::{Deserialize, Serialize};

/// Activation vector plus lifted PSD beamforming matrices.
#[derive(Debug, Clone)]
pub struct LiftedSolution {
    /// Relaxed activation values in [0, 1], length B.
    pub a: Vec<f64>,
    /// Per-user communication matrices, B*N_tx x B*N_tx Hermitian PSD.
    pub v_comm: Vec<CMat>,
    /// Per-BS sensing covariances, N_tx x N_tx Hermitian PSD.
    pub v_radar: Vec<CMat>,
}

impl LiftedSolution {
    /// All-zero solution of matching dimensions.
    pub fn zeros(num_bs: usize, num_users: usize, n_tx: usize) -> Self {
        LiftedSolution {
            a: vec![0.0; num_bs],
            v_comm: vec![CMat::zeros(num_bs * n_tx, num_bs * n_tx); num_users],
            v_radar: vec![CMat::zeros(n_tx, n_tx); num_bs],
        }
    }

    /// Rank-one lift of explicit beamformers: `V_k = w_k w_k^H` on the
    /// stacked array and `V_b^R = W_b W_b^H`.
    pub fn from_beamformers(bf: &Beamformers) -> Self {
        LiftedSolution {
            a: bf.active.iter().map(|&on| if on { 1.0 } else { 0.0 }).collect(),
            v_comm: bf.w_comm.iter().map(outer).collect(),
            v_radar: bf.w_radar.iter().map(|w| w * w.adjoint()).collect(),
        }
    }

    /// Largest Hermitian-PSD violation over all matrices (most negative
    /// eigenvalue, clamped at zero).
    pub fn psd_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in self.v_comm.iter().chain(self.v_radar.iter()) {
            let eig = m.clone().symmetric_eigen();
            for ev in eig.eigenvalues.iter() {
                worst = worst.max(-ev);
            }
        }
        worst
    }
}

/// Outer product g g^H.
pub fn outer(g: &CVec) -> CMat {
    CMat::from_fn(g.len(), g.len(), |i, j| g[i] * g[j].conj())
}

/// Explicit per-BS beamformers recovered from a rank-one lifted solution.
#[derive(Debug, Clone)]
pub struct Beamformers {
    pub active: Vec<bool>,
    /// Stacked communication beamformers, length B*N_tx (zero on inactive BSs).
    pub w_comm: Vec<CVec>,
    /// Per-BS sensing beamforming matrices, N_tx x N_tx.
    pub w_radar: Vec<CMat>,
}

/// Channel outer products shared by the metric evaluators and the conic
/// problem builders.
#[derive(Debug, Clone)]
pub struct Lifting {
    pub num_bs: usize,
    pub num_users: usize,
    pub num_targets: usize,
    pub n_tx: usize,
    /// Stacked user channels g_k, length B*N_tx.
    pub g_comm: Vec<CVec>,
    /// G_k = g_k g_k^H over the stacked array.
    pub big_g_comm: Vec<CMat>,
    /// Per-(b,q) sensing outer products g_bq g_bq^H (N_tx x N_tx).
    pub ghat_radar: Vec<Vec<CMat>>,
    /// Radiation trace matrices per open sub-region.
    pub radiation: Vec<RadiationEntry>,
    /// FIM geometry blocks for the sensing constraints.
    pub fim: FimIngredients,
}

/// Radiation trace matrices for one open sub-region. The expected
/// per-subcarrier radiation power is
/// `sum_k Tr(comm_matrix V_k) + sum_b Tr(radar_matrices[b] V_b^R)`.
#[derive(Debug, Clone)]
pub struct RadiationEntry {
    pub region: SubRegion,
    /// Threshold in linear watts for the whole-band radiation M * I_xy.
    pub mask_w: f64,
    /// Stacked-array matrix G_xy + sum_b kappa_bar_bxy B_b.
    pub comm_matrix: CMat,
    /// Per-BS matrices ghat_bxy + kappa_bar_bxy I.
    pub radar_matrices: Vec<CMat>,
}

impl Lifting {
    pub fn build(cfg: &ScenarioConfig, channels: &ChannelSet) -> Result<Self> {
        let nb = cfg.num_bs;
        let n = cfg.num_tx_antennas;
        let g_comm: Vec<CVec> = (0..cfg.num_users).map(|k| channels.stacked_comm(k)).collect();
        let big_g_comm = g_comm.iter().map(outer).collect();
        let ghat_radar = (0..nb)
            .map(|b| {
                (0..cfg.num_targets)
                    .map(|q| outer(&channels.sensing[b][q]))
                    .collect()
            })
            .collect();
        let mut radiation = Vec::with_capacity(channels.regions.open.len());
        for r in &channels.regions.open {
            let flat = channels.regions.flat_index(*r);
            let mut comm_matrix = outer(&channels.stacked_los(*r));
            for b in 0..nb {
                let kap = channels.kappa_bar[b][flat];
                for i in 0..n {
                    let d = b * n + i;
                    comm_matrix[(d, d)] += C64::new(kap, 0.0);
                }
            }
            let radar_matrices = (0..nb)
                .map(|b| {
                    let mut m = outer(&channels.prop_los[b][flat]);
                    let kap = channels.kappa_bar[b][flat];
                    for i in 0..n {
                        m[(i, i)] += C64::new(kap, 0.0);
                    }
                    m
                })
                .collect();
            radiation.push(RadiationEntry {
                region: *r,
                mask_w: cfg.mask_at(*r),
                comm_matrix,
                radar_matrices,
            });
        }
        Ok(Lifting {
            num_bs: nb,
            num_users: cfg.num_users,
            num_targets: cfg.num_targets,
            n_tx: n,
            g_comm,
            big_g_comm,
            ghat_radar,
            radiation,
            fim: FimIngredients::build(cfg, channels)?,
        })
    }

    /// Real trace `Tr(A V)` of two Hermitian matrices.
    pub fn trace(a: &CMat, v: &CMat) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                acc += a[(i, j)] * v[(j, i)];
            }
        }
        acc.re
    }

    /// Real trace over one diagonal BS block of a stacked matrix.
    pub fn block_trace(&self, a: &CMat, v: &CMat, b: usize) -> f64 {
        let n = self.n_tx;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += a[(i, j)] * v[(b * n + j, b * n + i)];
            }
        }
        acc.re
    }

    /// Signal-power trace F_k(V) = Tr(G_k V_k).
    pub fn signal_power(&self, k: usize, sol: &LiftedSolution) -> f64 {
        Self::trace(&self.big_g_comm[k], &sol.v_comm[k])
    }

    /// Interference-plus-noise H_k(V) = sum_{k' != k} Tr(G_k V_k') + sigma.
    pub fn interference(&self, k: usize, sol: &LiftedSolution, sigma: f64) -> f64 {
        let mut acc = sigma;
        for (kp, v) in sol.v_comm.iter().enumerate() {
            if kp != k {
                acc += Self::trace(&self.big_g_comm[k], v);
            }
        }
        acc
    }

    /// Transmit-side FIM weights of the lifted solution:
    /// `lambda[b][q] = sum_k Tr(Ghat_bq [V_k]_bb) + Tr(Ghat_bq V_b^R)`.
    pub fn lambda(&self, sol: &LiftedSolution) -> Vec<Vec<f64>> {
        let n = self.n_tx;
        let mut out = vec![vec![0.0; self.num_targets]; self.num_bs];
        for b in 0..self.num_bs {
            for q in 0..self.num_targets {
                let ghat = &self.ghat_radar[b][q];
                let mut acc = 0.0;
                for vk in &sol.v_comm {
                    acc += self.block_trace(ghat, vk, b);
                }
                acc += Self::trace(ghat, &sol.v_radar[b]);
                out[b][q] = acc;
                let _ = n;
            }
        }
        out
    }
}

/// Transmission rate of user `k` in bits/s/Hz. Sensing-signal interference
/// is excluded (the users cancel the known sensing sequences).
pub fn rate(k: usize, sol: &LiftedSolution, lift: &Lifting, sigma: f64) -> f64 {
    let f = lift.signal_power(k, sol).max(0.0);
    let h = lift.interference(k, sol, sigma);
    (1.0 + f / h).log2()
}

/// Expected radiation power across all subcarriers in open sub-region `r`
/// (the per-subcarrier expectation times M), watts.
pub fn radiation(
    r: SubRegion,
    sol: &LiftedSolution,
    lift: &Lifting,
    num_subcarriers: usize,
) -> Result<f64> {
    let entry = lift
        .radiation
        .iter()
        .find(|e| e.region == r)
        .ok_or_else(|| Error::Domain(format!("sub-region {r:?} is not in S_o")))?;
    Ok(radiation_of_entry(entry, sol) * num_subcarriers as f64)
}

/// Per-subcarrier expected radiation of one open sub-region.
pub fn radiation_of_entry(entry: &RadiationEntry, sol: &LiftedSolution) -> f64 {
    let mut acc = 0.0;
    for v in &sol.v_comm {
        acc += Lifting::trace(&entry.comm_matrix, v);
    }
    for (b, v) in sol.v_radar.iter().enumerate() {
        acc += Lifting::trace(&entry.radar_matrices[b], v);
    }
    acc
}

/// Transmit power of BS `b`: sum_k Tr(B_b V_k) + Tr(V_b^R), watts.
pub fn bs_power(b: usize, sol: &LiftedSolution, n_tx: usize) -> f64 {
    let mut acc = 0.0;
    for v in &sol.v_comm {
        for i in 0..n_tx {
            acc += v[(b * n_tx + i, b * n_tx + i)].re;
        }
    }
    for i in 0..n_tx {
        acc += sol.v_radar[b][(i, i)].re;
    }
    acc
}

/// Utility components of one candidate solution, plus the feasibility
/// verdict under the outage convention (infeasible trials score zero).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityBreakdown {
    pub rates: Vec<f64>,
    pub crb_position: Vec<f64>,
    pub crb_velocity: Vec<f64>,
    pub utility_comm: f64,
    pub utility_radar: f64,
    pub active_cost: f64,
    /// Overall utility U; zero when infeasible.
    pub utility: f64,
    pub feasible: bool,
    /// Human-readable reasons for infeasibility, empty when feasible.
    pub violations: Vec<String>,
}

/// Relative slack tolerance used when classifying a solution as feasible.
pub const FEASIBILITY_RTOL: f64 = 1e-6;

/// Combine the utility components into U = U_C^aC * U_R^aR / cost^aA.
pub fn combine_utility(uc: f64, ur: f64, cost: f64, cfg: &ScenarioConfig) -> f64 {
    if uc <= 0.0 || ur <= 0.0 || cost <= 0.0 {
        return 0.0;
    }
    uc.powf(cfg.alpha_comm) * ur.powf(cfg.alpha_radar) / cost.powf(cfg.alpha_active)
}

/// Evaluate rates, CRBs, radiation, power, and the proportional
/// cost-efficient utility of a solution.
pub fn utilities(sol: &LiftedSolution, lift: &Lifting, cfg: &ScenarioConfig) -> UtilityBreakdown {
    let sigma = cfg.noise_variance;
    let mut violations = Vec::new();

    let rates: Vec<f64> = (0..cfg.num_users).map(|k| rate(k, sol, lift, sigma)).collect();
    for (k, c) in rates.iter().enumerate() {
        if *c < cfg.min_rate[k] * (1.0 - FEASIBILITY_RTOL) {
            violations.push(format!("rate of user {k} below minimum: {c:.4}"));
        }
    }

    let lambda = lift.lambda(sol);
    let mut crb_position = Vec::with_capacity(cfg.num_targets);
    let mut crb_velocity = Vec::with_capacity(cfg.num_targets);
    for q in 0..cfg.num_targets {
        let per_bs: Vec<f64> = (0..cfg.num_bs).map(|b| lambda[b][q]).collect();
        let fim = lift.fim.assemble_fim(q, &per_bs);
        match sensing::crb(&fim) {
            SensingAccuracy::Observable { position, velocity } => {
                if position > cfg.max_crb_position[q] * (1.0 + FEASIBILITY_RTOL) {
                    violations.push(format!("position CRB of target {q} above cap: {position:.4}"));
                }
                if velocity > cfg.max_crb_velocity[q] * (1.0 + FEASIBILITY_RTOL) {
                    violations.push(format!("velocity CRB of target {q} above cap: {velocity:.4}"));
                }
                crb_position.push(position);
                crb_velocity.push(velocity);
            }
            SensingAccuracy::Unobservable => {
                violations.push(format!("target {q} unobservable"));
                crb_position.push(f64::INFINITY);
                crb_velocity.push(f64::INFINITY);
            }
        }
    }

    for entry in &lift.radiation {
        let i = radiation_of_entry(entry, sol) * cfg.num_subcarriers as f64;
        if i > entry.mask_w * (1.0 + FEASIBILITY_RTOL) {
            violations.push(format!(
                "radiation mask exceeded in sub-region ({}, {}): {:.3e} > {:.3e}",
                entry.region.x, entry.region.y, i, entry.mask_w
            ));
        }
    }

    for b in 0..cfg.num_bs {
        let p = bs_power(b, sol, cfg.num_tx_antennas);
        let budget = sol.a[b] * cfg.max_power_w[b];
        if p > budget + FEASIBILITY_RTOL * cfg.max_power_w[b] {
            violations.push(format!("BS {b} power {p:.3e} exceeds budget {budget:.3e}"));
        }
    }

    let n_active: f64 = sol.a.iter().sum();
    if n_active < 1.0 - FEASIBILITY_RTOL || n_active > cfg.max_active_bs as f64 + FEASIBILITY_RTOL {
        violations.push(format!(
            "active BS count {n_active} outside [1, {}]",
            cfg.max_active_bs
        ));
    }

    let utility_comm: f64 = rates
        .iter()
        .zip(&cfg.comm_weights)
        .zip(&cfg.min_rate)
        .map(|((c, w), cmin)| w * c / cmin)
        .sum();
    let utility_radar: f64 = (0..cfg.num_targets)
        .map(|q| {
            let ratio = (crb_position[q] / cfg.max_crb_position[q])
                .max(crb_velocity[q] / cfg.max_crb_velocity[q]);
            cfg.radar_weights[q] * (1.0 - ratio)
        })
        .sum();
    let active_cost: f64 = sol.a.iter().zip(&cfg.operation_costs).map(|(a, o)| a * o).sum();

    let feasible = violations.is_empty();
    UtilityBreakdown {
        rates,
        crb_position,
        crb_velocity,
        utility_comm,
        utility_radar,
        active_cost,
        utility: if feasible {
            combine_utility(utility_comm, utility_radar, active_cost, cfg)
        } else {
            0.0
        },
        feasible,
        violations,
    }
}
