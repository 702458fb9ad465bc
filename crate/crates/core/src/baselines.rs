//! Comparison schemes that fix the activation pattern up front and then
//! optimize beamforming with the SCA machinery at the fixed pattern.

use crate::report::SolveReport;
use crate::sca::{sca_solve, ScaOptions};
use crate::scenario::{ChannelSet, ScenarioConfig};
use crate::Result;
use rand::{Rng, RngExt};

/// Per-BS activation priority: channel energy toward every user and target,
/// discounted by the operation cost.
#[derive(Debug, Clone)]
pub struct PriorityScore(pub Vec<f64>);

pub fn priority_scores(channels: &ChannelSet, cfg: &ScenarioConfig) -> PriorityScore {
    let mut out = Vec::with_capacity(cfg.num_bs);
    for b in 0..cfg.num_bs {
        let mut acc = 0.0;
        for k in 0..cfg.num_users {
            acc += channels.comm[b][k].norm_squared();
        }
        for q in 0..cfg.num_targets {
            acc += channels.sensing[b][q].norm_squared();
        }
        out.push(acc / cfg.operation_costs[b]);
    }
    PriorityScore(out)
}

/// Baseline activation schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Uniformly random N_bs-subset, all active.
    Maximum,
    /// Each BS active with probability 1/2, trimmed uniformly to N_bs
    /// (resampled if the draw comes up empty).
    Random,
    /// Top-N_bs by priority score.
    PriorityMax,
    /// Top-floor(N_bs/2) by priority score.
    PriorityHalf,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Maximum => "maximum",
            Scheme::Random => "random",
            Scheme::PriorityMax => "priomax",
            Scheme::PriorityHalf => "priohalf",
        }
    }
}

fn top_by_priority(scores: &PriorityScore, count: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..scores.0.len()).collect();
    // ties broken by BS index
    order.sort_by(|&i, &j| scores.0[j].total_cmp(&scores.0[i]).then(i.cmp(&j)));
    let mut on = vec![false; scores.0.len()];
    for &b in order.iter().take(count.max(1)) {
        on[b] = true;
    }
    on
}

fn random_subset(rng: &mut impl Rng, num_bs: usize, count: usize) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..num_bs).collect();
    // Fisher-Yates prefix
    for i in 0..count.min(num_bs) {
        let j = rng.random_range(i..num_bs);
        idx.swap(i, j);
    }
    let mut on = vec![false; num_bs];
    for &b in idx.iter().take(count) {
        on[b] = true;
    }
    on
}

/// Produce the activation pattern of a baseline scheme. Every returned
/// pattern satisfies `1 <= active count <= N_bs`.
pub fn select_activation(
    scheme: Scheme,
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    rng: &mut impl Rng,
) -> Vec<bool> {
    match scheme {
        Scheme::Maximum => random_subset(rng, cfg.num_bs, cfg.max_active_bs),
        Scheme::Random => loop {
            let mut on: Vec<bool> = (0..cfg.num_bs).map(|_| rng.random_bool(0.5)).collect();
            let count = on.iter().filter(|&&b| b).count();
            if count == 0 {
                continue;
            }
            if count > cfg.max_active_bs {
                // trim uniformly down to the cap
                let actives: Vec<usize> = (0..cfg.num_bs).filter(|&b| on[b]).collect();
                let mut keep = vec![false; cfg.num_bs];
                let mut idx = sample_prefix(rng, &actives, cfg.max_active_bs);
                for b in idx.drain(..) {
                    keep[b] = true;
                }
                on = keep;
            }
            break on;
        },
        Scheme::PriorityMax => top_by_priority(&priority_scores(channels, cfg), cfg.max_active_bs),
        Scheme::PriorityHalf => {
            top_by_priority(&priority_scores(channels, cfg), cfg.max_active_bs / 2)
        }
    }
}

fn sample_prefix(rng: &mut impl Rng, actives: &[usize], count: usize) -> Vec<usize> {
    let mut pool = actives.to_vec();
    for i in 0..count.min(pool.len()) {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}

/// Run one baseline: select the pattern, then SCA beamforming at fixed
/// activation.
pub fn run_baseline(
    scheme: Scheme,
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    opts: &ScaOptions,
    rng: &mut impl Rng,
) -> Result<SolveReport> {
    let pattern = select_activation(scheme, cfg, channels, rng);
    let mut report = sca_solve(cfg, channels, opts, Some(&pattern), rng)?;
    report.algorithm = scheme.name().to_string();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{sample_channels, ScenarioSpec};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (ScenarioConfig, ChannelSet) {
        let mut spec = ScenarioSpec::desk_default();
        spec.num_bs = 5;
        spec.max_active_bs = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = spec.resolve(&mut rng).unwrap();
        let ch = sample_channels(&cfg, &mut rng).unwrap();
        (cfg, ch)
    }

    #[test]
    fn priority_scales_inversely_with_cost() {
        let (mut cfg, ch) = setup(1);
        cfg.operation_costs = vec![1.0; 5];
        let base = priority_scores(&ch, &cfg);
        cfg.operation_costs = vec![2.0; 5];
        let halved = priority_scores(&ch, &cfg);
        for b in 0..5 {
            assert_relative_eq!(halved.0[b], base.0[b] / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn priority_matches_direct_summation() {
        let (cfg, ch) = setup(2);
        let scores = priority_scores(&ch, &cfg);
        for b in 0..cfg.num_bs {
            let mut want = 0.0;
            for k in 0..cfg.num_users {
                want += ch.comm[b][k].iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
            for q in 0..cfg.num_targets {
                want += ch.sensing[b][q].iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
            want /= cfg.operation_costs[b];
            assert_relative_eq!(scores.0[b], want, max_relative = 1e-12);
        }
    }

    #[test]
    fn priority_half_activates_floor_half() {
        let (cfg, ch) = setup(3);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let on = select_activation(Scheme::PriorityHalf, &cfg, &ch, &mut rng);
        assert_eq!(on.iter().filter(|&&b| b).count(), 2); // floor(5/2)
    }

    #[test]
    fn priority_max_is_deterministic() {
        let (cfg, ch) = setup(4);
        let mut r1 = ChaCha8Rng::seed_from_u64(40);
        let mut r2 = ChaCha8Rng::seed_from_u64(41);
        let a = select_activation(Scheme::PriorityMax, &cfg, &ch, &mut r1);
        let b = select_activation(Scheme::PriorityMax, &cfg, &ch, &mut r2);
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|&&x| x).count(), cfg.max_active_bs);
    }

    #[test]
    fn random_scheme_reproducible_and_bounded() {
        let (mut cfg, ch) = setup(5);
        cfg.max_active_bs = 3;
        let a = select_activation(Scheme::Random, &cfg, &ch, &mut ChaCha8Rng::seed_from_u64(50));
        let b = select_activation(Scheme::Random, &cfg, &ch, &mut ChaCha8Rng::seed_from_u64(50));
        assert_eq!(a, b);
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for scheme in [Scheme::Maximum, Scheme::Random, Scheme::PriorityMax, Scheme::PriorityHalf] {
                let on = select_activation(scheme, &cfg, &ch, &mut rng);
                let count = on.iter().filter(|&&x| x).count();
                assert!(count >= 1 && count <= cfg.max_active_bs.max(1), "{scheme:?} gave {count}");
            }
        }
    }
}
