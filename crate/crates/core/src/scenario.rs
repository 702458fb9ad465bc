//! Deterministic construction of the network geometry, sub-region grid,
//! channel realizations, and target kinematics from a seeded configuration.
//!
//! A [`ScenarioSpec`] mirrors the JSON scenario file (powers in dBm, lengths
//! in meters, rates in bits/s/Hz). Resolving a spec against an RNG fills in
//! any unspecified placements and yields a fully concrete
//! [`ScenarioConfig`]; [`sample_channels`] then draws one channel
//! realization. Both steps are deterministic for a fixed seed.

use crate::{dbm_to_watts, C64, CVec, Error, Result, SPEED_OF_LIGHT};
use nalgebra::Vector2;
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Rectangular service area partitioned into sub-regions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AreaGrid {
    /// Area extent along x, meters.
    pub dx_m: f64,
    /// Area extent along y, meters.
    pub dy_m: f64,
    /// Sub-region side length along x, meters.
    pub grid_dx_m: f64,
    /// Sub-region side length along y, meters.
    pub grid_dy_m: f64,
}

impl AreaGrid {
    /// Number of sub-regions along x.
    pub fn x_count(&self) -> usize {
        (self.dx_m / self.grid_dx_m).ceil() as usize
    }

    /// Number of sub-regions along y.
    pub fn y_count(&self) -> usize {
        (self.dy_m / self.grid_dy_m).ceil() as usize
    }

    /// Central point of sub-region `(x, y)` (1-based indices).
    pub fn region_center(&self, x: usize, y: usize) -> Vector2<f64> {
        Vector2::new(
            (x as f64 - 0.5) * self.grid_dx_m,
            (y as f64 - 0.5) * self.grid_dy_m,
        )
    }

    /// Sub-region containing a point. Coordinates exactly on a grid line use
    /// the ceiling convention, with coordinate 0 mapping to index 1.
    pub fn region_of(&self, p: &Vector2<f64>) -> SubRegion {
        let ix = ((p.x / self.grid_dx_m).ceil() as usize).max(1);
        let iy = ((p.y / self.grid_dy_m).ceil() as usize).max(1);
        SubRegion { x: ix, y: iy }
    }
}

/// 1-based sub-region index pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubRegion {
    pub x: usize,
    pub y: usize,
}

/// Index sets over the sub-region grid: all regions `S`, regions holding a
/// user or target `S_RC`, and the open regions `S_o = S \ S_RC` where the
/// radiation footprint is constrained.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSets {
    pub x_count: usize,
    pub y_count: usize,
    pub all: Vec<SubRegion>,
    pub occupied: Vec<SubRegion>,
    pub open: Vec<SubRegion>,
}

impl RegionSets {
    /// Flat row-major index of a sub-region (x fastest).
    pub fn flat_index(&self, r: SubRegion) -> usize {
        (r.y - 1) * self.x_count + (r.x - 1)
    }
}

/// Radiation mask description in the scenario file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskSpec {
    /// Two quadrant blocks (lower-left and upper-right) at `base_dbm`, the
    /// rest tightened by `offset_db` (negative).
    Split { base_dbm: f64, offset_db: f64 },
    /// Explicit per-sub-region thresholds in dBm, row-major with x fastest.
    Grid { values_dbm: Vec<f64> },
}

impl Default for MaskSpec {
    fn default() -> Self {
        MaskSpec::Split {
            base_dbm: -23.01,
            offset_db: -10.0,
        }
    }
}

fn default_seed() -> u64 {
    1
}

/// Scenario description as read from a JSON file. Optional placement fields
/// trigger seeded random placement on [`ScenarioSpec::resolve`]. Units in
/// the file: dBm for powers and PSD, meters, Hz, seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub area: AreaGrid,
    pub num_bs: usize,
    pub num_users: usize,
    pub num_targets: usize,
    pub num_tx_antennas: usize,
    /// Upper limit on the number of simultaneously active BSs.
    pub max_active_bs: usize,
    #[serde(default)]
    pub bs_positions_m: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub user_positions_m: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub target_positions_m: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub target_velocities_mps: Option<Vec<[f64; 2]>>,
    pub rician_kappa: f64,
    pub path_loss_exponent: f64,
    pub carrier_wavelength_m: f64,
    pub num_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub num_symbols: usize,
    pub symbol_duration_s: f64,
    pub cyclic_prefix_s: f64,
    pub noise_psd_dbm_per_hz: f64,
    /// Radar cross-section per target; a single value applies to all.
    #[serde(default = "ScenarioSpec::default_rcs")]
    pub radar_cross_sections: Vec<f64>,
    pub max_power_dbm: f64,
    /// Per-BS operation costs; omitted costs are drawn uniformly in [1, 4].
    #[serde(default)]
    pub operation_costs: Option<Vec<f64>>,
    /// Per-user rate weights; default 1/K.
    #[serde(default)]
    pub comm_weights: Option<Vec<f64>>,
    /// Per-target sensing weights; default 1/Q.
    #[serde(default)]
    pub radar_weights: Option<Vec<f64>>,
    pub alpha_comm: f64,
    pub alpha_radar: f64,
    pub alpha_active: f64,
    pub min_rate_bps_hz: f64,
    pub max_crb_position: f64,
    pub max_crb_velocity: f64,
    #[serde(default)]
    pub radiation_mask: MaskSpec,
    #[serde(default = "default_seed")]
    pub rng_seed: u64,
}

impl ScenarioSpec {
    fn default_rcs() -> Vec<f64> {
        vec![1.0]
    }

    /// Desk-scale default: 1.4 km x 1.4 km area on a 200 m grid with
    /// B=4, K=2, Q=2, N_bs=3, N_tx=4 and the standard OFDM numerology
    /// (64 subcarriers of 156.25 kHz, 50 symbols, 8 us symbols).
    pub fn desk_default() -> Self {
        ScenarioSpec {
            area: AreaGrid {
                dx_m: 1400.0,
                dy_m: 1400.0,
                grid_dx_m: 200.0,
                grid_dy_m: 200.0,
            },
            num_bs: 4,
            num_users: 2,
            num_targets: 2,
            num_tx_antennas: 4,
            max_active_bs: 3,
            bs_positions_m: None,
            user_positions_m: None,
            target_positions_m: None,
            target_velocities_mps: None,
            rician_kappa: 2.0,
            path_loss_exponent: 2.3,
            carrier_wavelength_m: SPEED_OF_LIGHT / 5.89e9,
            num_subcarriers: 64,
            subcarrier_spacing_hz: 156.25e3,
            num_symbols: 50,
            symbol_duration_s: 8e-6,
            cyclic_prefix_s: 1.6e-6,
            noise_psd_dbm_per_hz: -174.0,
            radar_cross_sections: vec![1.0],
            max_power_dbm: 15.0,
            operation_costs: None,
            comm_weights: None,
            radar_weights: None,
            alpha_comm: 0.3,
            alpha_radar: 0.3,
            alpha_active: 0.4,
            min_rate_bps_hz: 1.5,
            max_crb_position: 15.0,
            max_crb_velocity: 1.5,
            radiation_mask: MaskSpec::default(),
            rng_seed: 1,
        }
    }

    /// Parse a scenario file.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fill in unspecified placements, velocities, and costs using `rng`,
    /// returning a fully concrete configuration.
    ///
    /// Draw order is fixed: BS positions, user positions, target positions
    /// (resampled until every target occupies a distinct sub-region),
    /// target velocities, operation costs.
    pub fn resolve(&self, rng: &mut impl Rng) -> Result<ScenarioConfig> {
        let b = self.num_bs;
        let k = self.num_users;
        let q = self.num_targets;
        let area = self.area;

        let place = |rng: &mut dyn Rng| -> Vector2<f64> {
            Vector2::new(
                rng.random_range(0.0..area.dx_m),
                rng.random_range(0.0..area.dy_m),
            )
        };

        let bs_positions: Vec<Vector2<f64>> = match &self.bs_positions_m {
            Some(v) => v.iter().map(|p| Vector2::new(p[0], p[1])).collect(),
            None => (0..b).map(|_| place(rng)).collect(),
        };
        let user_positions: Vec<Vector2<f64>> = match &self.user_positions_m {
            Some(v) => v.iter().map(|p| Vector2::new(p[0], p[1])).collect(),
            None => (0..k).map(|_| place(rng)).collect(),
        };
        let target_positions: Vec<Vector2<f64>> = match &self.target_positions_m {
            Some(v) => v.iter().map(|p| Vector2::new(p[0], p[1])).collect(),
            None => {
                let mut out: Vec<Vector2<f64>> = Vec::with_capacity(q);
                let mut used: Vec<SubRegion> = Vec::with_capacity(q);
                for _ in 0..q {
                    let mut tries = 0;
                    loop {
                        let p = place(rng);
                        let r = area.region_of(&p);
                        if !used.contains(&r) {
                            used.push(r);
                            out.push(p);
                            break;
                        }
                        tries += 1;
                        if tries > 10_000 {
                            return Err(Error::Config(
                                "cannot place targets in distinct sub-regions".into(),
                            ));
                        }
                    }
                }
                out
            }
        };
        let target_velocities: Vec<Vector2<f64>> = match &self.target_velocities_mps {
            Some(v) => v.iter().map(|p| Vector2::new(p[0], p[1])).collect(),
            None => (0..q)
                .map(|_| {
                    // uniform magnitude in [30, 50] m/s per axis, random sign
                    let mx: f64 = rng.random_range(30.0..50.0);
                    let sx = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    let my: f64 = rng.random_range(30.0..50.0);
                    let sy = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    Vector2::new(mx * sx, my * sy)
                })
                .collect(),
        };
        let operation_costs: Vec<f64> = match &self.operation_costs {
            Some(v) => v.clone(),
            None => (0..b).map(|_| rng.random_range(1.0..4.0)).collect(),
        };

        let rcs = if self.radar_cross_sections.len() == 1 {
            vec![self.radar_cross_sections[0]; q]
        } else {
            self.radar_cross_sections.clone()
        };
        let comm_weights = match &self.comm_weights {
            Some(v) => v.clone(),
            None => vec![1.0 / k.max(1) as f64; k],
        };
        let radar_weights = match &self.radar_weights {
            Some(v) => v.clone(),
            None => vec![1.0 / q.max(1) as f64; q],
        };

        let x_count = area.x_count();
        let y_count = area.y_count();
        let base_mask = match &self.radiation_mask {
            MaskSpec::Split { base_dbm, offset_db } => {
                let xh = x_count.div_ceil(2);
                let yh = y_count.div_ceil(2);
                let mut mask = Vec::with_capacity(x_count * y_count);
                for y in 1..=y_count {
                    for x in 1..=x_count {
                        let in_low = x <= xh && y <= yh;
                        let in_high = x >= xh && y >= yh;
                        let dbm = if in_low || in_high {
                            *base_dbm
                        } else {
                            *base_dbm + *offset_db
                        };
                        mask.push(dbm_to_watts(dbm));
                    }
                }
                mask
            }
            MaskSpec::Grid { values_dbm } => {
                if values_dbm.len() != x_count * y_count {
                    return Err(Error::Config(format!(
                        "radiation mask has {} entries, grid is {}x{}",
                        values_dbm.len(),
                        x_count,
                        y_count
                    )));
                }
                values_dbm.iter().map(|d| dbm_to_watts(*d)).collect()
            }
        };

        let sigma = self.subcarrier_spacing_hz * dbm_to_watts(self.noise_psd_dbm_per_hz);
        let cfg = ScenarioConfig {
            area,
            num_bs: b,
            num_users: k,
            num_targets: q,
            num_tx_antennas: self.num_tx_antennas,
            max_active_bs: self.max_active_bs,
            bs_positions,
            user_positions,
            target_positions,
            target_velocities,
            rician_kappa: self.rician_kappa,
            path_loss_exponent: self.path_loss_exponent,
            wavelength: self.carrier_wavelength_m,
            num_subcarriers: self.num_subcarriers,
            subcarrier_spacing: self.subcarrier_spacing_hz,
            num_symbols: self.num_symbols,
            symbol_duration: self.symbol_duration_s,
            cyclic_prefix: self.cyclic_prefix_s,
            elementary_symbol: self.symbol_duration_s - self.cyclic_prefix_s,
            noise_variance: sigma,
            radar_cross_sections: rcs,
            max_power_w: vec![dbm_to_watts(self.max_power_dbm); b],
            operation_costs,
            comm_weights,
            radar_weights,
            alpha_comm: self.alpha_comm,
            alpha_radar: self.alpha_radar,
            alpha_active: self.alpha_active,
            min_rate: vec![self.min_rate_bps_hz; k],
            max_crb_position: vec![self.max_crb_position; q],
            max_crb_velocity: vec![self.max_crb_velocity; q],
            radiation_mask_w: base_mask,
            rng_seed: self.rng_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fully resolved, immutable scenario: geometry, devices, OFDM numerology,
/// weights, thresholds. All powers are linear watts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub area: AreaGrid,
    pub num_bs: usize,
    pub num_users: usize,
    pub num_targets: usize,
    pub num_tx_antennas: usize,
    pub max_active_bs: usize,
    pub bs_positions: Vec<Vector2<f64>>,
    pub user_positions: Vec<Vector2<f64>>,
    pub target_positions: Vec<Vector2<f64>>,
    pub target_velocities: Vec<Vector2<f64>>,
    pub rician_kappa: f64,
    pub path_loss_exponent: f64,
    pub wavelength: f64,
    pub num_subcarriers: usize,
    pub subcarrier_spacing: f64,
    pub num_symbols: usize,
    pub symbol_duration: f64,
    pub cyclic_prefix: f64,
    pub elementary_symbol: f64,
    /// Per-subcarrier noise variance, sigma = delta_f * N0, watts.
    pub noise_variance: f64,
    pub radar_cross_sections: Vec<f64>,
    pub max_power_w: Vec<f64>,
    pub operation_costs: Vec<f64>,
    pub comm_weights: Vec<f64>,
    pub radar_weights: Vec<f64>,
    pub alpha_comm: f64,
    pub alpha_radar: f64,
    pub alpha_active: f64,
    /// Minimum rate per user, bits/s/Hz.
    pub min_rate: Vec<f64>,
    pub max_crb_position: Vec<f64>,
    pub max_crb_velocity: Vec<f64>,
    /// Per-sub-region radiation threshold, linear watts, row-major (x fastest).
    pub radiation_mask_w: Vec<f64>,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Validate the structural invariants of the configuration.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_bs == 0 || self.num_users == 0 {
            return fail("need at least one BS and one user".into());
        }
        if self.max_active_bs == 0 || self.max_active_bs > self.num_bs {
            return fail(format!(
                "max_active_bs must be in [1, {}], got {}",
                self.num_bs, self.max_active_bs
            ));
        }
        if self.num_targets > self.num_tx_antennas {
            return fail(format!(
                "ZF sensing combiner needs num_targets <= num_tx_antennas ({} > {})",
                self.num_targets, self.num_tx_antennas
            ));
        }
        let t_sum = self.elementary_symbol + self.cyclic_prefix;
        if (t_sum - self.symbol_duration).abs() > 1e-9 * self.symbol_duration {
            return fail("symbol duration must equal elementary symbol + cyclic prefix".into());
        }
        if (self.subcarrier_spacing * self.elementary_symbol - 1.0).abs() > 1e-6 {
            return fail("subcarrier spacing must equal 1 / elementary symbol duration".into());
        }
        for (name, n, len) in [
            ("bs_positions", self.num_bs, self.bs_positions.len()),
            ("user_positions", self.num_users, self.user_positions.len()),
            ("target_positions", self.num_targets, self.target_positions.len()),
            ("target_velocities", self.num_targets, self.target_velocities.len()),
            ("max_power_w", self.num_bs, self.max_power_w.len()),
            ("operation_costs", self.num_bs, self.operation_costs.len()),
            ("comm_weights", self.num_users, self.comm_weights.len()),
            ("radar_weights", self.num_targets, self.radar_weights.len()),
            ("min_rate", self.num_users, self.min_rate.len()),
            ("radar_cross_sections", self.num_targets, self.radar_cross_sections.len()),
            ("max_crb_position", self.num_targets, self.max_crb_position.len()),
            ("max_crb_velocity", self.num_targets, self.max_crb_velocity.len()),
        ] {
            if len != n {
                return fail(format!("{name} has {len} entries, expected {n}"));
            }
        }
        let inside = |p: &Vector2<f64>| {
            p.x >= 0.0 && p.x <= self.area.dx_m && p.y >= 0.0 && p.y <= self.area.dy_m
        };
        if !self
            .bs_positions
            .iter()
            .chain(&self.user_positions)
            .chain(&self.target_positions)
            .all(inside)
        {
            return fail("every device must lie inside the service area".into());
        }
        for v in self
            .max_power_w
            .iter()
            .chain(&self.comm_weights)
            .chain(&self.radar_weights)
            .chain(&self.min_rate)
            .chain(&self.max_crb_position)
            .chain(&self.max_crb_velocity)
            .chain(&self.radiation_mask_w)
            .chain(&self.radar_cross_sections)
        {
            if !(*v > 0.0) {
                return fail("weights, powers, and thresholds must be strictly positive".into());
            }
        }
        if self.operation_costs.iter().any(|o| *o < 1.0) {
            return fail("operation costs must be >= 1".into());
        }
        if !(self.alpha_comm > 0.0 && self.alpha_radar > 0.0 && self.alpha_active > 0.0) {
            return fail("trade-off exponents must be strictly positive".into());
        }
        if self.noise_variance <= 0.0 {
            return fail("noise variance must be positive".into());
        }
        let xy = self.area.x_count() * self.area.y_count();
        if self.radiation_mask_w.len() != xy {
            return fail(format!(
                "radiation mask has {} entries, grid is {}",
                self.radiation_mask_w.len(),
                xy
            ));
        }
        for (b, p) in self.bs_positions.iter().enumerate() {
            let r = self.area.region_of(p);
            if (p - self.area.region_center(r.x, r.y)).norm() < 1e-9 {
                return fail(format!(
                    "BS {b} sits exactly on a sub-region center; propagation undefined"
                ));
            }
        }
        let mut regions: Vec<SubRegion> = self
            .target_positions
            .iter()
            .map(|p| self.area.region_of(p))
            .collect();
        regions.sort();
        regions.dedup();
        if regions.len() != self.num_targets {
            return fail("targets must occupy pairwise distinct sub-regions".into());
        }
        Ok(())
    }

    /// Index sets S, S_RC, S_o of the sub-region grid.
    pub fn region_sets(&self) -> RegionSets {
        let x_count = self.area.x_count();
        let y_count = self.area.y_count();
        let mut all = Vec::with_capacity(x_count * y_count);
        for y in 1..=y_count {
            for x in 1..=x_count {
                all.push(SubRegion { x, y });
            }
        }
        let mut occupied: Vec<SubRegion> = self
            .user_positions
            .iter()
            .chain(&self.target_positions)
            .map(|p| self.area.region_of(p))
            .collect();
        occupied.sort();
        occupied.dedup();
        let open = all
            .iter()
            .copied()
            .filter(|r| !occupied.contains(r))
            .collect();
        RegionSets {
            x_count,
            y_count,
            all,
            occupied,
            open,
        }
    }

    /// Radiation threshold for a sub-region, linear watts.
    pub fn mask_at(&self, r: SubRegion) -> f64 {
        self.radiation_mask_w[(r.y - 1) * self.area.x_count() + (r.x - 1)]
    }
}

/// Line-of-sight steering vector of a half-wavelength ULA with Rician and
/// path-loss scaling: element n equals
/// sqrt(kappa / ((kappa+1) r^xi)) * exp(-j pi (n-1) sin(theta)).
pub fn steering_vector(
    d_from: &Vector2<f64>,
    d_to: &Vector2<f64>,
    n_tx: usize,
    kappa: f64,
    xi: f64,
) -> Result<CVec> {
    let diff = d_from - d_to;
    let r = diff.norm();
    if r < 1e-9 {
        return Err(Error::Domain(
            "steering vector undefined for coincident points".into(),
        ));
    }
    let theta = (diff.y / diff.x).atan();
    let amp = (kappa / ((kappa + 1.0) * r.powf(xi))).sqrt();
    let s = theta.sin();
    Ok(CVec::from_fn(n_tx, |n, _| {
        let phase = -std::f64::consts::PI * n as f64 * s;
        C64::from_polar(amp, phase)
    }))
}

/// NLoS per-antenna variance for a link of length `r`.
pub fn nlos_variance(r: f64, kappa: f64, xi: f64) -> f64 {
    r.powf(-xi) / (kappa + 1.0)
}

/// Round-trip delay (s) and Doppler shift (Hz) of the cascaded channel from
/// BS `b` via target at `d_q` (velocity `v_q`) to BS `b2`.
pub fn delay_doppler(
    d_b: &Vector2<f64>,
    d_b2: &Vector2<f64>,
    d_q: &Vector2<f64>,
    v_q: &Vector2<f64>,
    wavelength: f64,
) -> Result<(f64, f64)> {
    let w1 = d_b - d_q;
    let w2 = d_b2 - d_q;
    let r1 = w1.norm();
    let r2 = w2.norm();
    if r1 < 1e-9 || r2 < 1e-9 {
        return Err(Error::Domain("target colocated with a BS".into()));
    }
    let tau = (r1 + r2) / SPEED_OF_LIGHT;
    let f = (v_q.dot(&w1) / r1 + v_q.dot(&w2) / r2) / wavelength;
    Ok((tau, f))
}

/// Realized channels and per-sub-region propagation statistics for one
/// Monte Carlo trial. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// Communication channels `comm[b][k]`, length N_tx each.
    pub comm: Vec<Vec<CVec>>,
    /// Pure LoS sensing channels `sensing[b][q]`.
    pub sensing: Vec<Vec<CVec>>,
    /// LoS propagation vectors to sub-region centers, `prop_los[b][flat]`.
    pub prop_los: Vec<Vec<CVec>>,
    /// NLoS per-antenna variance to sub-region centers, `kappa_bar[b][flat]`.
    pub kappa_bar: Vec<Vec<f64>>,
    pub regions: RegionSets,
}

impl ChannelSet {
    /// Stacked communication channel of user `k` across all BSs (length B*N_tx).
    pub fn stacked_comm(&self, k: usize) -> CVec {
        let b = self.comm.len();
        let n = self.comm[0][k].len();
        let mut out = CVec::zeros(b * n);
        for (bi, per_bs) in self.comm.iter().enumerate() {
            out.rows_mut(bi * n, n).copy_from(&per_bs[k]);
        }
        out
    }

    /// Stacked LoS propagation vector to sub-region `r` across all BSs.
    pub fn stacked_los(&self, r: SubRegion) -> CVec {
        let flat = self.regions.flat_index(r);
        let b = self.prop_los.len();
        let n = self.prop_los[0][flat].len();
        let mut out = CVec::zeros(b * n);
        for (bi, per_bs) in self.prop_los.iter().enumerate() {
            out.rows_mut(bi * n, n).copy_from(&per_bs[flat]);
        }
        out
    }
}

/// Draw one channel realization. Communication channels are Rician
/// (LoS steering plus a complex-normal NLoS part); sensing channels are pure
/// LoS; propagation statistics per sub-region store only the LoS vector and
/// the NLoS per-antenna variance.
///
/// The NLoS draw order is fixed: for each BS `b`, for each user `k`,
/// `N_tx` complex entries (real part then imaginary part).
pub fn sample_channels(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<ChannelSet> {
    let n = cfg.num_tx_antennas;
    let kappa = cfg.rician_kappa;
    let xi = cfg.path_loss_exponent;
    let regions = cfg.region_sets();

    let mut comm = Vec::with_capacity(cfg.num_bs);
    for b in 0..cfg.num_bs {
        let mut per_bs = Vec::with_capacity(cfg.num_users);
        for k in 0..cfg.num_users {
            let los = steering_vector(&cfg.bs_positions[b], &cfg.user_positions[k], n, kappa, xi)?;
            let r = (cfg.bs_positions[b] - cfg.user_positions[k]).norm();
            let var = nlos_variance(r, kappa, xi);
            let sd = (var / 2.0).sqrt();
            let nlos = CVec::from_fn(n, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re * sd, im * sd)
            });
            per_bs.push(los + nlos);
        }
        comm.push(per_bs);
    }

    let mut sensing = Vec::with_capacity(cfg.num_bs);
    for b in 0..cfg.num_bs {
        let mut per_bs = Vec::with_capacity(cfg.num_targets);
        for q in 0..cfg.num_targets {
            per_bs.push(steering_vector(
                &cfg.bs_positions[b],
                &cfg.target_positions[q],
                n,
                kappa,
                xi,
            )?);
        }
        sensing.push(per_bs);
    }

    let mut prop_los = Vec::with_capacity(cfg.num_bs);
    let mut kappa_bar = Vec::with_capacity(cfg.num_bs);
    for b in 0..cfg.num_bs {
        let mut per_bs = Vec::with_capacity(regions.all.len());
        let mut per_bs_k = Vec::with_capacity(regions.all.len());
        for r in &regions.all {
            let center = cfg.area.region_center(r.x, r.y);
            per_bs.push(steering_vector(&cfg.bs_positions[b], &center, n, kappa, xi)?);
            per_bs_k.push(nlos_variance(
                (cfg.bs_positions[b] - center).norm(),
                kappa,
                xi,
            ));
        }
        prop_los.push(per_bs);
        kappa_bar.push(per_bs_k);
    }

    Ok(ChannelSet {
        comm,
        sensing,
        prop_los,
        kappa_bar,
        regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> ScenarioConfig {
        let mut spec = ScenarioSpec::desk_default();
        spec.bs_positions_m = Some(vec![[90.0, 110.0], [1290.0, 130.0], [110.0, 1280.0], [700.0, 660.0]]);
        spec.user_positions_m = Some(vec![[300.0, 300.0], [1100.0, 1100.0]]);
        spec.target_positions_m = Some(vec![[500.0, 900.0], [900.0, 500.0]]);
        spec.target_velocities_mps = Some(vec![[40.0, 0.0], [0.0, -35.0]]);
        spec.operation_costs = Some(vec![1.5, 2.0, 2.5, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        spec.resolve(&mut rng).unwrap()
    }

    #[test]
    fn steering_magnitude_and_phase() {
        // single element of magnitude sqrt((2/3) * 100^{-2.3}), phase 0
        let v = steering_vector(
            &Vector2::new(0.0, 0.0),
            &Vector2::new(100.0, 0.0),
            1,
            2.0,
            2.3,
        )
        .unwrap();
        let expect = (2.0 / 3.0 * 100f64.powf(-2.3)).sqrt();
        assert_relative_eq!(v[0].re, expect, max_relative = 1e-12);
        assert_relative_eq!(v[0].im, 0.0, epsilon = 1e-15);
        assert_relative_eq!(expect, 4.0922e-3, max_relative = 1e-4);
    }

    #[test]
    fn steering_broadside_constant_phase() {
        // d_to broadside (theta = 0) kills the phase ramp
        let v = steering_vector(
            &Vector2::new(0.0, 50.0),
            &Vector2::new(200.0, 50.0),
            6,
            3.0,
            2.0,
        )
        .unwrap();
        for n in 1..6 {
            assert_relative_eq!(v[n].re, v[0].re, max_relative = 1e-12);
            assert_relative_eq!(v[n].im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn steering_large_kappa_limit() {
        // kappa/(kappa+1) -> 1 at r = 1, xi = 2
        let v = steering_vector(
            &Vector2::new(0.0, 0.0),
            &Vector2::new(0.6, 0.8),
            4,
            1e12,
            2.0,
        )
        .unwrap();
        for n in 0..4 {
            assert_relative_eq!(v[n].norm(), 1.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn steering_rejects_coincident_points() {
        let p = Vector2::new(10.0, 20.0);
        assert!(steering_vector(&p, &p, 4, 2.0, 2.3).is_err());
    }

    #[test]
    fn delay_monostatic() {
        let (tau, _) = delay_doppler(
            &Vector2::new(0.0, 0.0),
            &Vector2::new(0.0, 0.0),
            &Vector2::new(150.0, 0.0),
            &Vector2::new(0.0, 0.0),
            0.05,
        )
        .unwrap();
        assert_relative_eq!(tau, 300.0 / SPEED_OF_LIGHT, max_relative = 1e-14);
        assert_relative_eq!(tau, 1.0007e-6, max_relative = 1e-4);
    }

    #[test]
    fn doppler_orthogonal_velocity_is_zero() {
        let (_, f) = delay_doppler(
            &Vector2::new(0.0, 0.0),
            &Vector2::new(0.0, 0.0),
            &Vector2::new(150.0, 0.0),
            &Vector2::new(0.0, 25.0),
            0.05,
        )
        .unwrap();
        assert_relative_eq!(f, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn doppler_opposed_radial_components_cancel() {
        // +40 m/s toward one BS is -40 m/s from the other; terms cancel
        let lambda = SPEED_OF_LIGHT / 5.89e9;
        let (_, f) = delay_doppler(
            &Vector2::new(0.0, 0.0),
            &Vector2::new(300.0, 0.0),
            &Vector2::new(150.0, 0.0),
            &Vector2::new(40.0, 0.0),
            lambda,
        )
        .unwrap();
        assert_relative_eq!(f, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn delay_doppler_symmetric_in_bs_pair() {
        let b1 = Vector2::new(10.0, 40.0);
        let b2 = Vector2::new(900.0, 200.0);
        let t = Vector2::new(400.0, 700.0);
        let v = Vector2::new(33.0, -47.0);
        let (tau_a, f_a) = delay_doppler(&b1, &b2, &t, &v, 0.05).unwrap();
        let (tau_b, f_b) = delay_doppler(&b2, &b1, &t, &v, 0.05).unwrap();
        assert_relative_eq!(tau_a, tau_b, max_relative = 1e-14);
        assert_relative_eq!(f_a, f_b, max_relative = 1e-14);
    }

    #[test]
    fn delay_doppler_rejects_colocation() {
        let p = Vector2::new(5.0, 5.0);
        assert!(delay_doppler(&p, &Vector2::new(9.0, 9.0), &p, &Vector2::zeros(), 0.05).is_err());
    }

    #[test]
    fn region_sets_ceiling_convention() {
        let mut spec = ScenarioSpec::desk_default();
        spec.num_users = 1;
        spec.num_targets = 1;
        spec.user_positions_m = Some(vec![[150.0, 150.0]]);
        spec.target_positions_m = Some(vec![[900.0, 500.0]]);
        spec.target_velocities_mps = Some(vec![[40.0, 40.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = spec.resolve(&mut rng).unwrap();
        let sets = cfg.region_sets();
        assert_eq!(sets.all.len(), 49);
        assert!(sets.occupied.contains(&SubRegion { x: 1, y: 1 }));
        assert!(sets.occupied.contains(&SubRegion { x: 5, y: 3 }));
        assert_eq!(sets.open.len(), 47);
        // boundary coordinate x = 200 stays in sub-region 1
        assert_eq!(
            cfg.area.region_of(&Vector2::new(200.0, 10.0)),
            SubRegion { x: 1, y: 1 }
        );
        // coordinate 0 maps to sub-region 1, not 0
        assert_eq!(
            cfg.area.region_of(&Vector2::new(0.0, 0.0)),
            SubRegion { x: 1, y: 1 }
        );
    }

    #[test]
    fn channels_deterministic_replay() {
        let cfg = small_cfg();
        let a = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        for bi in 0..cfg.num_bs {
            for k in 0..cfg.num_users {
                assert_eq!(a.comm[bi][k], b.comm[bi][k]);
            }
        }
    }

    #[test]
    fn sensing_channel_is_pure_los() {
        let cfg = small_cfg();
        let ch = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for b in 0..cfg.num_bs {
            for q in 0..cfg.num_targets {
                let los = steering_vector(
                    &cfg.bs_positions[b],
                    &cfg.target_positions[q],
                    cfg.num_tx_antennas,
                    cfg.rician_kappa,
                    cfg.path_loss_exponent,
                )
                .unwrap();
                assert_eq!(ch.sensing[b][q], los);
            }
        }
    }

    #[test]
    fn nlos_empirical_variance_matches_model() {
        // Monte Carlo moment check at r = 200 m, kappa = 2, xi = 2.3
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let var = nlos_variance(200.0, 2.0, 2.3);
        let n = 100_000usize;
        let sd = (var / 2.0).sqrt();
        let mut acc = 0.0;
        for _ in 0..n {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            acc += (re * sd).powi(2) + (im * sd).powi(2);
        }
        let emp = acc / n as f64;
        let se = var / (n as f64).sqrt();
        assert!(
            (emp - var).abs() <= 3.0 * se,
            "empirical {emp} vs model {var} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn kappa_bar_decreases_with_distance() {
        let cfg = small_cfg();
        let mut prev = f64::INFINITY;
        for r in [50.0, 120.0, 400.0, 900.0] {
            let k = nlos_variance(r, cfg.rician_kappa, cfg.path_loss_exponent);
            assert!(k > 0.0 && k < prev);
            prev = k;
        }
    }

    #[test]
    fn spec_roundtrip_json() {
        let spec = ScenarioSpec::desk_default();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back = ScenarioSpec::from_json(&text).unwrap();
        assert_eq!(spec.num_bs, back.num_bs);
        assert_eq!(spec.radiation_mask, back.radiation_mask);
    }

    #[test]
    fn resolve_rejects_too_many_targets_for_zf() {
        let mut spec = ScenarioSpec::desk_default();
        spec.num_targets = 5;
        spec.num_tx_antennas = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(spec.resolve(&mut rng).is_err());
    }

    #[test]
    fn split_mask_levels() {
        let cfg = small_cfg();
        // lower-left and upper-right quadrant blocks at the base level
        let base = dbm_to_watts(-23.01);
        let tight = dbm_to_watts(-33.01);
        assert_relative_eq!(cfg.mask_at(SubRegion { x: 1, y: 1 }), base);
        assert_relative_eq!(cfg.mask_at(SubRegion { x: 7, y: 7 }), base);
        assert_relative_eq!(cfg.mask_at(SubRegion { x: 4, y: 4 }), base);
        assert_relative_eq!(cfg.mask_at(SubRegion { x: 7, y: 1 }), tight);
        assert_relative_eq!(cfg.mask_at(SubRegion { x: 1, y: 7 }), tight);
    }
}
