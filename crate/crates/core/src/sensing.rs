//! Fisher-information assembly and Cramér-Rao bounds for target position
//! and velocity estimation.
//!
//! The approximate FIM of each target is block-diagonal: a 2x2 distance
//! block and a 2x2 velocity block, each a lambda-weighted sum of per-BS
//! geometry blocks. The lambda weights carry the transmit-side beam gains
//! toward the target; the geometry blocks carry delay/Doppler Jacobians and
//! the waveform constants (the beta coefficients).

use crate::metrics::LiftedSolution;
use crate::scenario::{ChannelSet, ScenarioConfig};
use crate::{C64, CMat, CVec, Error, Result};
use nalgebra::{DMatrix, Matrix2, Matrix4, Vector2};

/// Zero-forcing receive combiners for one BS: unit-norm columns of
/// `G (G^H G)^{-1}` with `G = [g_1, ..., g_Q]`. Combiner `q` nulls the
/// echoes of every other target.
pub fn zf_receive_weights(columns: &[CVec]) -> Result<Vec<CVec>> {
    let q = columns.len();
    let n = columns[0].len();
    if q > n {
        return Err(Error::Singular(format!(
            "ZF combiner needs at most {n} targets, got {q}"
        )));
    }
    let mut g = CMat::zeros(n, q);
    for (j, col) in columns.iter().enumerate() {
        g.column_mut(j).copy_from(col);
    }
    let gram = g.adjoint() * &g;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Singular("rank-deficient sensing channel matrix".into()))?;
    let w = g * inv;
    let mut out = Vec::with_capacity(q);
    for j in 0..q {
        let col = w.column(j);
        let norm = col.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Singular("ZF combiner column has zero norm".into()));
        }
        out.push(col.map(|c| c / C64::new(norm, 0.0)).into_owned());
    }
    Ok(out)
}

/// Waveform-dependent FIM coefficients for one (receive BS, target) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaCoefficients {
    pub tau_tau: f64,
    pub ff: f64,
    pub tau_f: f64,
}

/// Closed forms of the delay/Doppler information coefficients:
///
/// * beta_tt = 4 (M-1) M (2M-1) L pi^2 df^2 xi^2 / (3 sigma)
/// * beta_ff = 4 (L-1) L (2L-1) M pi^2 T^2 xi^2 / (3 sigma)
/// * beta_tf = 2 M L (M-1) (L-1) pi^2 T df xi^2 / sigma
pub fn beta_coefficients(
    m: usize,
    l: usize,
    symbol_duration: f64,
    delta_f: f64,
    sigma: f64,
    xi_bar: f64,
) -> BetaCoefficients {
    let pi2 = std::f64::consts::PI.powi(2);
    let (mf, lf) = (m as f64, l as f64);
    let x2 = xi_bar * xi_bar;
    BetaCoefficients {
        tau_tau: 4.0 * (mf - 1.0) * mf * (2.0 * mf - 1.0) * lf / (3.0 * sigma)
            * pi2
            * delta_f
            * delta_f
            * x2,
        ff: 4.0 * (lf - 1.0) * lf * (2.0 * lf - 1.0) * mf / (3.0 * sigma)
            * pi2
            * symbol_duration
            * symbol_duration
            * x2,
        tau_f: 2.0 * mf * lf * (mf - 1.0) * (lf - 1.0) / sigma
            * pi2
            * symbol_duration
            * delta_f
            * x2,
    }
}

/// Partial derivatives of the round-trip delay and Doppler of one
/// (transmit BS, receive BS, target) triple with respect to the target
/// position and velocity. The delay does not depend on velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDopplerJacobian {
    pub dtau_dx: f64,
    pub dtau_dy: f64,
    pub df_dx: f64,
    pub df_dy: f64,
    pub df_dvx: f64,
    pub df_dvy: f64,
}

/// Analytic Jacobian of the delay/Doppler pair.
pub fn delay_doppler_jacobian(
    d_b: &Vector2<f64>,
    d_b2: &Vector2<f64>,
    d_q: &Vector2<f64>,
    v_q: &Vector2<f64>,
    wavelength: f64,
) -> Result<DelayDopplerJacobian> {
    let legs = [d_b - d_q, d_b2 - d_q];
    let mut jac = DelayDopplerJacobian {
        dtau_dx: 0.0,
        dtau_dy: 0.0,
        df_dx: 0.0,
        df_dy: 0.0,
        df_dvx: 0.0,
        df_dvy: 0.0,
    };
    for w in legs {
        let r = w.norm();
        if r < 1e-9 {
            return Err(Error::Domain("target colocated with a BS".into()));
        }
        let u = w / r;
        jac.dtau_dx += -u.x / crate::SPEED_OF_LIGHT;
        jac.dtau_dy += -u.y / crate::SPEED_OF_LIGHT;
        let vu = v_q.dot(&u);
        // d(v.u)/dx_q = (-v_x + (v.u) u_x) / r, and likewise for y
        jac.df_dx += (-v_q.x + vu * u.x) / r / wavelength;
        jac.df_dy += (-v_q.y + vu * u.y) / r / wavelength;
        jac.df_dvx += u.x / wavelength;
        jac.df_dvy += u.y / wavelength;
    }
    Ok(jac)
}

/// Geometry blocks and receive-side constants of the approximate FIM,
/// independent of the transmit covariances.
#[derive(Debug, Clone)]
pub struct FimIngredients {
    /// Distance blocks `h_dist[q][b]` (2x2, PSD).
    pub h_dist: Vec<Vec<Matrix2<f64>>>,
    /// Velocity blocks `h_vel[q][b]` (2x2, PSD).
    pub h_vel: Vec<Vec<Matrix2<f64>>>,
    /// ZF receive gain magnitudes `xi_bar[q][b']`.
    pub xi_bar: Vec<Vec<f64>>,
    /// Beta coefficients `betas[q][b']`.
    pub betas: Vec<Vec<BetaCoefficients>>,
}

impl FimIngredients {
    /// Build the geometry blocks for every (target, transmit BS) pair.
    pub fn build(cfg: &ScenarioConfig, channels: &ChannelSet) -> Result<Self> {
        let nb = cfg.num_bs;
        let nq = cfg.num_targets;
        // receive combiners per BS
        let mut combiners = Vec::with_capacity(nb);
        for b in 0..nb {
            combiners.push(zf_receive_weights(&channels.sensing[b])?);
        }
        let mut xi_bar = vec![vec![0.0; nb]; nq];
        let mut betas = vec![Vec::with_capacity(nb); nq];
        for q in 0..nq {
            for b2 in 0..nb {
                let gain = combiners[b2][q].dotc(&channels.sensing[b2][q]);
                let xb = cfg.radar_cross_sections[q] * gain.norm();
                xi_bar[q][b2] = xb;
                betas[q].push(beta_coefficients(
                    cfg.num_subcarriers,
                    cfg.num_symbols,
                    cfg.symbol_duration,
                    cfg.subcarrier_spacing,
                    cfg.noise_variance,
                    xb,
                ));
            }
        }
        let mut h_dist = vec![vec![Matrix2::zeros(); nb]; nq];
        let mut h_vel = vec![vec![Matrix2::zeros(); nb]; nq];
        for q in 0..nq {
            for b in 0..nb {
                let mut hd = Matrix2::zeros();
                let mut hv = Matrix2::zeros();
                for b2 in 0..nb {
                    let j = delay_doppler_jacobian(
                        &cfg.bs_positions[b],
                        &cfg.bs_positions[b2],
                        &cfg.target_positions[q],
                        &cfg.target_velocities[q],
                        cfg.wavelength,
                    )?;
                    let bt = &betas[q][b2];
                    hd[(0, 0)] += j.dtau_dx * j.dtau_dx * bt.tau_tau
                        + j.df_dx * j.df_dx * bt.ff
                        - 2.0 * j.df_dx * j.dtau_dx * bt.tau_f;
                    hd[(1, 1)] += j.dtau_dy * j.dtau_dy * bt.tau_tau
                        + j.df_dy * j.df_dy * bt.ff
                        - 2.0 * j.df_dy * j.dtau_dy * bt.tau_f;
                    let off = j.dtau_dx * j.dtau_dy * bt.tau_tau
                        + j.df_dx * j.df_dy * bt.ff
                        - (j.df_dx * j.dtau_dy + j.df_dy * j.dtau_dx) * bt.tau_f;
                    hd[(0, 1)] += off;
                    hd[(1, 0)] += off;
                    hv[(0, 0)] += j.df_dvx * j.df_dvx * bt.ff;
                    hv[(1, 1)] += j.df_dvy * j.df_dvy * bt.ff;
                    let voff = j.df_dvx * j.df_dvy * bt.ff;
                    hv[(0, 1)] += voff;
                    hv[(1, 0)] += voff;
                }
                h_dist[q][b] = hd;
                h_vel[q][b] = hv;
            }
        }
        Ok(FimIngredients {
            h_dist,
            h_vel,
            xi_bar,
            betas,
        })
    }

    /// Approximate FIM of target `q` for given per-BS weights `lambda`:
    /// blockdiag(sum_b lambda_b H_bq^D, sum_b lambda_b H_bq^V).
    pub fn assemble_fim(&self, q: usize, lambda: &[f64]) -> Matrix4<f64> {
        let mut d = Matrix2::zeros();
        let mut v = Matrix2::zeros();
        for (b, lam) in lambda.iter().enumerate() {
            d += self.h_dist[q][b] * *lam;
            v += self.h_vel[q][b] * *lam;
        }
        let mut j = Matrix4::zeros();
        j.fixed_view_mut::<2, 2>(0, 0).copy_from(&d);
        j.fixed_view_mut::<2, 2>(2, 2).copy_from(&v);
        j
    }
}

/// Transmit-side FIM weights from a lifted solution:
/// `lambda_bq = sum_k Tr(B_b G_q B_b V_k) + Tr(Ghat_bq V_b^R)`, where the
/// first term reads the b-th diagonal block of each communication matrix.
pub fn lambda_sensing(sol: &LiftedSolution, channels: &ChannelSet) -> Vec<Vec<f64>> {
    let nb = channels.sensing.len();
    let nq = channels.sensing[0].len();
    let n = channels.sensing[0][0].len();
    let mut out = vec![vec![0.0; nq]; nb];
    for b in 0..nb {
        for q in 0..nq {
            let g = &channels.sensing[b][q];
            let mut acc = 0.0;
            for vk in &sol.v_comm {
                let block = vk.view((b * n, b * n), (n, n));
                acc += quad_form(g, &block.into_owned());
            }
            acc += quad_form(g, &sol.v_radar[b]);
            out[b][q] = acc;
        }
    }
    out
}

/// Transmit-side FIM weights evaluated from explicit beamformers:
/// `lambda_bq = a_b (sum_k |g_bq^H w_bk|^2 + ||g_bq^H W_b||^2)`.
pub fn lambda_beamformed(
    active: &[bool],
    w_comm: &[CVec],
    w_radar: &[CMat],
    channels: &ChannelSet,
) -> Vec<Vec<f64>> {
    let nb = channels.sensing.len();
    let nq = channels.sensing[0].len();
    let n = channels.sensing[0][0].len();
    let mut out = vec![vec![0.0; nq]; nb];
    for b in 0..nb {
        if !active[b] {
            continue;
        }
        for q in 0..nq {
            let g = &channels.sensing[b][q];
            let mut acc = 0.0;
            for wk in w_comm {
                let slice = wk.rows(b * n, n);
                acc += g.dotc(&slice.into_owned()).norm_sqr();
            }
            let resp = w_radar[b].adjoint() * g;
            acc += resp.norm_squared();
            out[b][q] = acc;
        }
    }
    out
}

/// `g^H A g` for Hermitian `A` (real by construction).
pub fn quad_form(g: &CVec, a: &CMat) -> f64 {
    let ag = a * g;
    g.dotc(&ag).re
}

/// Position/velocity CRB extracted from a block-diagonal 4x4 FIM, or an
/// unobservable verdict when either 2x2 block is singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensingAccuracy {
    Observable { position: f64, velocity: f64 },
    Unobservable,
}

fn inv_diag_2x2(m: &Matrix2<f64>) -> Option<(f64, f64)> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det > 0.0) || !det.is_finite() || m[(0, 0)] <= 0.0 || m[(1, 1)] <= 0.0 {
        return None;
    }
    Some((m[(1, 1)] / det, m[(0, 0)] / det))
}

/// CRBs are the worst diagonal entries of each inverted 2x2 block.
pub fn crb(fim: &Matrix4<f64>) -> SensingAccuracy {
    let d = fim.fixed_view::<2, 2>(0, 0).into_owned();
    let v = fim.fixed_view::<2, 2>(2, 2).into_owned();
    match (inv_diag_2x2(&d), inv_diag_2x2(&v)) {
        (Some((d1, d2)), Some((v1, v2))) => SensingAccuracy::Observable {
            position: d1.max(d2),
            velocity: v1.max(v2),
        },
        _ => SensingAccuracy::Unobservable,
    }
}

/// Full FIM over the delay/Doppler vector, used as an independent oracle:
/// assembles `(d omega / d eta) J_omega (d omega / d eta)^T` with the
/// diagonal J_omega blocks and then drops the distance-velocity coupling.
pub fn fim_via_parameter_chain(
    cfg: &ScenarioConfig,
    ingredients: &FimIngredients,
    q: usize,
    lambda: &[f64],
) -> Result<Matrix4<f64>> {
    let nb = cfg.num_bs;
    let np = nb * nb;
    // d omega / d eta: 4 x 2*np, ordered tau_{11}..tau_{BB}, f_{11}..f_{BB}
    let mut chain = DMatrix::<f64>::zeros(4, 2 * np);
    let mut jtt = DMatrix::<f64>::zeros(np, np);
    let mut jff = DMatrix::<f64>::zeros(np, np);
    let mut jtf = DMatrix::<f64>::zeros(np, np);
    for b in 0..nb {
        for b2 in 0..nb {
            let i = b * nb + b2;
            let j = delay_doppler_jacobian(
                &cfg.bs_positions[b],
                &cfg.bs_positions[b2],
                &cfg.target_positions[q],
                &cfg.target_velocities[q],
                cfg.wavelength,
            )?;
            chain[(0, i)] = j.dtau_dx;
            chain[(1, i)] = j.dtau_dy;
            chain[(0, np + i)] = j.df_dx;
            chain[(1, np + i)] = j.df_dy;
            chain[(2, np + i)] = j.df_dvx;
            chain[(3, np + i)] = j.df_dvy;
            let bt = &ingredients.betas[q][b2];
            jtt[(i, i)] = bt.tau_tau * lambda[b];
            jff[(i, i)] = bt.ff * lambda[b];
            jtf[(i, i)] = -bt.tau_f * lambda[b];
        }
    }
    let mut j_omega = DMatrix::<f64>::zeros(2 * np, 2 * np);
    j_omega.view_mut((0, 0), (np, np)).copy_from(&jtt);
    j_omega.view_mut((np, np), (np, np)).copy_from(&jff);
    j_omega.view_mut((0, np), (np, np)).copy_from(&jtf);
    j_omega.view_mut((np, 0), (np, np)).copy_from(&jtf);
    let full = &chain * j_omega * chain.transpose();
    let mut out = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = full[(i, j)];
            out[(i + 2, j + 2)] = full[(i + 2, j + 2)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_cvec(rng: &mut impl Rng, n: usize) -> CVec {
        CVec::from_fn(n, |_, _| {
            C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        })
    }

    #[test]
    fn zf_single_target_is_matched_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_cvec(&mut rng, 4);
        let w = zf_receive_weights(std::slice::from_ref(&g)).unwrap();
        let expected = &g / C64::new(g.norm(), 0.0);
        assert!((&w[0] - expected).norm() < 1e-12);
    }

    #[test]
    fn zf_orthonormal_columns_passthrough() {
        let e1 = CVec::from_fn(3, |i, _| C64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0));
        let e2 = CVec::from_fn(3, |i, _| C64::new(if i == 1 { 1.0 } else { 0.0 }, 0.0));
        let w = zf_receive_weights(&[e1.clone(), e2.clone()]).unwrap();
        assert!((&w[0] - e1).norm() < 1e-12);
        assert!((&w[1] - e2).norm() < 1e-12);
    }

    #[test]
    fn zf_nulls_other_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let g1 = random_cvec(&mut rng, 4);
            let g2 = random_cvec(&mut rng, 4);
            let w = zf_receive_weights(&[g1.clone(), g2.clone()]).unwrap();
            assert!(w[0].dotc(&g2).norm() < 1e-10);
            assert!(w[1].dotc(&g1).norm() < 1e-10);
            assert_relative_eq!(w[0].norm(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn zf_rejects_rank_deficiency() {
        let g = CVec::from_element(4, C64::new(1.0, 0.0));
        assert!(zf_receive_weights(&[g.clone(), g]).is_err());
    }

    #[test]
    fn beta_closed_forms_match_brute_force() {
        // brute force: beta_tt = 8 pi^2 df^2 xi^2 sum_{m,l} m^2 / sigma, etc.
        let pi2 = std::f64::consts::PI.powi(2);
        let (t, df, sigma, xi) = (8e-6, 156.25e3, 3.7e-16, 2.4e-3);
        for m in 2..=8usize {
            for l in 1..=8usize {
                let mut s_m2 = 0.0;
                let mut s_l2 = 0.0;
                let mut s_ml = 0.0;
                for mi in 0..m {
                    for li in 0..l {
                        s_m2 += (mi * mi) as f64;
                        s_l2 += (li * li) as f64;
                        s_ml += (mi * li) as f64;
                    }
                }
                let want_tt = 8.0 * pi2 * df * df * xi * xi * s_m2 / sigma;
                let want_ff = 8.0 * pi2 * t * t * xi * xi * s_l2 / sigma;
                let want_tf = 8.0 * pi2 * t * df * xi * xi * s_ml / sigma;
                let got = beta_coefficients(m, l, t, df, sigma, xi);
                assert_relative_eq!(got.tau_tau, want_tt, max_relative = 1e-12);
                assert_relative_eq!(got.ff, want_ff, max_relative = 1e-12);
                assert_relative_eq!(got.tau_f, want_tf, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn beta_two_subcarriers_single_symbol() {
        let pi2 = std::f64::consts::PI.powi(2);
        let got = beta_coefficients(2, 1, 8e-6, 156.25e3, 1.0, 1.0);
        assert_relative_eq!(got.tau_tau, 8.0 * pi2 * 156.25e3f64.powi(2), max_relative = 1e-12);
        assert_eq!(got.ff, 0.0);
        assert_eq!(got.tau_f, 0.0);
    }

    #[test]
    fn beta_degenerate_factors() {
        let b = beta_coefficients(1, 5, 8e-6, 156.25e3, 1.0, 1.0);
        assert_eq!(b.tau_tau, 0.0);
        assert_eq!(b.tau_f, 0.0);
        let b = beta_coefficients(5, 1, 8e-6, 156.25e3, 1.0, 1.0);
        assert_eq!(b.ff, 0.0);
        assert_eq!(b.tau_f, 0.0);
    }

    #[test]
    fn jacobian_radial_geometry() {
        let j = delay_doppler_jacobian(
            &Vector2::new(0.0, 0.0),
            &Vector2::new(0.0, 0.0),
            &Vector2::new(150.0, 0.0),
            &Vector2::new(10.0, 0.0),
            0.05,
        )
        .unwrap();
        assert_relative_eq!(j.dtau_dx, 2.0 / crate::SPEED_OF_LIGHT, max_relative = 1e-12);
        assert_relative_eq!(j.dtau_dy, 0.0, epsilon = 1e-18);
    }

    #[test]
    fn jacobian_velocity_partial_aligned_legs() {
        // both unit LoS directions +x: df/dvx = 2/lambda
        let j = delay_doppler_jacobian(
            &Vector2::new(200.0, 0.0),
            &Vector2::new(300.0, 0.0),
            &Vector2::new(100.0, 0.0),
            &Vector2::new(3.0, 4.0),
            0.05,
        )
        .unwrap();
        assert_relative_eq!(j.df_dvx, 2.0 / 0.05, max_relative = 1e-12);
        assert_relative_eq!(j.df_dvy, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let lambda = 0.0509;
        let h = 1e-4;
        for _ in 0..100 {
            let d_b = Vector2::new(rng.random_range(0.0..1400.0), rng.random_range(0.0..1400.0));
            let d_b2 = Vector2::new(rng.random_range(0.0..1400.0), rng.random_range(0.0..1400.0));
            let d_q = Vector2::new(rng.random_range(0.0..1400.0), rng.random_range(0.0..1400.0));
            if (d_b - d_q).norm() < 1.0 || (d_b2 - d_q).norm() < 1.0 {
                continue;
            }
            let v = Vector2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
            let j = delay_doppler_jacobian(&d_b, &d_b2, &d_q, &v, lambda).unwrap();
            let eval = |dq: Vector2<f64>, vv: Vector2<f64>| {
                crate::scenario::delay_doppler(&d_b, &d_b2, &dq, &vv, lambda).unwrap()
            };
            let ex = Vector2::new(h, 0.0);
            let ey = Vector2::new(0.0, h);
            let fd = [
                ((eval(d_q + ex, v).0 - eval(d_q - ex, v).0) / (2.0 * h), j.dtau_dx),
                ((eval(d_q + ey, v).0 - eval(d_q - ey, v).0) / (2.0 * h), j.dtau_dy),
                ((eval(d_q + ex, v).1 - eval(d_q - ex, v).1) / (2.0 * h), j.df_dx),
                ((eval(d_q + ey, v).1 - eval(d_q - ey, v).1) / (2.0 * h), j.df_dy),
                ((eval(d_q, v + ex).1 - eval(d_q, v - ex).1) / (2.0 * h), j.df_dvx),
                ((eval(d_q, v + ey).1 - eval(d_q, v - ey).1) / (2.0 * h), j.df_dvy),
            ];
            let scale = fd
                .iter()
                .map(|(_, a)| a.abs())
                .fold(0.0f64, f64::max)
                .max(1e-12);
            for (num, ana) in fd {
                let denom = num.abs().max(ana.abs()).max(1e-9 * scale);
                assert!(
                    ((num - ana) / denom).abs() < 1e-5,
                    "fd {num} vs analytic {ana}"
                );
            }
        }
    }

    fn test_cfg(seed: u64) -> (ScenarioConfig, ChannelSet) {
        let mut spec = crate::scenario::ScenarioSpec::desk_default();
        spec.num_bs = 3;
        spec.num_users = 1;
        spec.num_targets = 2;
        spec.num_tx_antennas = 3;
        spec.max_active_bs = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = spec.resolve(&mut rng).unwrap();
        let ch = crate::scenario::sample_channels(&cfg, &mut rng).unwrap();
        (cfg, ch)
    }

    #[test]
    fn fim_zero_lambda_gives_zero_matrix() {
        let (cfg, ch) = test_cfg(31);
        let ing = FimIngredients::build(&cfg, &ch).unwrap();
        let j = ing.assemble_fim(0, &vec![0.0; cfg.num_bs]);
        assert_eq!(j, Matrix4::zeros());
    }

    #[test]
    fn fim_blocks_are_psd() {
        let (cfg, ch) = test_cfg(32);
        let ing = FimIngredients::build(&cfg, &ch).unwrap();
        for q in 0..cfg.num_targets {
            for b in 0..cfg.num_bs {
                for m in [&ing.h_dist[q][b], &ing.h_vel[q][b]] {
                    let tr = m[(0, 0)] + m[(1, 1)];
                    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
                    assert!(tr >= -1e-9 && det >= -1e-9 * tr.abs().max(1.0));
                    assert_relative_eq!(m[(0, 1)], m[(1, 0)], max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn fim_matches_parameter_chain_oracle() {
        let (cfg, ch) = test_cfg(33);
        let ing = FimIngredients::build(&cfg, &ch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for q in 0..cfg.num_targets {
            let lambda: Vec<f64> = (0..cfg.num_bs).map(|_| rng.random_range(0.0..2.0)).collect();
            let fast = ing.assemble_fim(q, &lambda);
            let oracle = fim_via_parameter_chain(&cfg, &ing, q, &lambda).unwrap();
            let scale = oracle.amax().max(1e-30);
            assert!(
                (fast - oracle).amax() / scale < 1e-10,
                "fim mismatch: {fast} vs {oracle}"
            );
        }
    }

    #[test]
    fn crb_diagonal_fim() {
        let j = Matrix4::from_diagonal(&nalgebra::Vector4::new(4.0, 1.0, 0.25, 0.0625));
        match crb(&j) {
            SensingAccuracy::Observable { position, velocity } => {
                assert_relative_eq!(position, 1.0);
                assert_relative_eq!(velocity, 16.0);
            }
            _ => panic!("expected observable"),
        }
    }

    #[test]
    fn crb_coupled_block() {
        let mut j = Matrix4::zeros();
        j.fixed_view_mut::<2, 2>(0, 0)
            .copy_from(&Matrix2::new(2.0, 1.0, 1.0, 2.0));
        j.fixed_view_mut::<2, 2>(2, 2)
            .copy_from(&Matrix2::identity());
        match crb(&j) {
            SensingAccuracy::Observable { position, .. } => {
                assert_relative_eq!(position, 2.0 / 3.0, max_relative = 1e-12);
            }
            _ => panic!("expected observable"),
        }
    }

    #[test]
    fn crb_position_block_independent_of_velocity_scaling() {
        let mut j = Matrix4::zeros();
        j.fixed_view_mut::<2, 2>(0, 0)
            .copy_from(&Matrix2::new(3.0, 0.5, 0.5, 4.0));
        j.fixed_view_mut::<2, 2>(2, 2)
            .copy_from(&Matrix2::identity());
        let p1 = match crb(&j) {
            SensingAccuracy::Observable { position, .. } => position,
            _ => panic!(),
        };
        j.fixed_view_mut::<2, 2>(2, 2)
            .copy_from(&(Matrix2::identity() * 100.0));
        let p2 = match crb(&j) {
            SensingAccuracy::Observable { position, .. } => position,
            _ => panic!(),
        };
        assert_relative_eq!(p1, p2, max_relative = 1e-14);
    }

    #[test]
    fn crb_singular_block_is_unobservable() {
        let mut j = Matrix4::zeros();
        j.fixed_view_mut::<2, 2>(0, 0)
            .copy_from(&Matrix2::new(1.0, 1.0, 1.0, 1.0));
        j.fixed_view_mut::<2, 2>(2, 2)
            .copy_from(&Matrix2::identity());
        assert_eq!(crb(&j), SensingAccuracy::Unobservable);
    }

    #[test]
    fn crb_monotone_in_lambda() {
        // more transmit gain toward the target never worsens the bound
        let (cfg, ch) = test_cfg(35);
        let ing = FimIngredients::build(&cfg, &ch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        for _ in 0..50 {
            let lambda: Vec<f64> =
                (0..cfg.num_bs).map(|_| rng.random_range(0.1..2.0)).collect();
            let mut bumped = lambda.clone();
            let which = rng.random_range(0..cfg.num_bs);
            bumped[which] += rng.random_range(0.0..1.0);
            let j0 = ing.assemble_fim(0, &lambda);
            let j1 = ing.assemble_fim(0, &bumped);
            if let (
                SensingAccuracy::Observable { position: p0, velocity: v0 },
                SensingAccuracy::Observable { position: p1, velocity: v1 },
            ) = (crb(&j0), crb(&j1))
            {
                assert!(p1 <= p0 * (1.0 + 1e-9));
                assert!(v1 <= v0 * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn footnote_inverse_bound_equivalence() {
        // [X^{-1}]_{jj} <= eps  <=>  1/eps + x12^2/x_ll <= x_jj, X psd 2x2
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(0.05..5.0);
            let c: f64 = rng.random_range(0.05..5.0);
            let b: f64 = rng.random_range(-1.0..1.0) * (a * c).sqrt() * 0.999;
            let x = Matrix2::new(a, b, b, c);
            let eps: f64 = rng.random_range(0.05..10.0);
            let (i11, i22) = inv_diag_2x2(&x).unwrap();
            for (j, ll, inv_jj) in [(a, c, i11), (c, a, i22)] {
                let lhs_holds = 1.0 / eps + b * b / ll <= j + 1e-9;
                let inv_holds = inv_jj <= eps + 1e-9;
                assert_eq!(lhs_holds, inv_holds, "x={x:?} eps={eps}");
            }
        }
    }
}
