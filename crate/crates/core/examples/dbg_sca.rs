use isacopt::metrics::{self, Lifting};
use isacopt::scenario::{sample_channels, ScenarioSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut spec = ScenarioSpec::desk_default();
    spec.num_bs = 2;
    spec.num_users = 2;
    spec.num_targets = 1;
    spec.num_tx_antennas = 2;
    spec.max_active_bs = 2;
    spec.min_rate_bps_hz = 0.3;
    spec.max_crb_position = 60.0;
    spec.max_crb_velocity = 100.0;
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let cfg = spec.resolve(&mut rng).unwrap();
    let ch = sample_channels(&cfg, &mut rng).unwrap();
    let lift = Lifting::build(&cfg, &ch).unwrap();

    // replicate the sca initialize() logic
    let n = cfg.num_tx_antennas;
    let nb = cfg.num_bs;
    let nk = cfg.num_users;
    let rho = 0.5;
    let active = vec![true, true];
    let mut w_comm = Vec::new();
    for k in 0..nk {
        let mut w = isacopt::CVec::zeros(nb * n);
        for b in 0..nb {
            if !active[b] { continue; }
            let slice = lift.g_comm[k].rows(b * n, n).into_owned();
            let norm = slice.norm();
            if norm > 0.0 {
                let p_share = (rho * cfg.max_power_w[b] / nk as f64).sqrt();
                let scaled = slice * isacopt::C64::new(p_share / norm, 0.0);
                w.rows_mut(b * n, n).copy_from(&scaled);
            }
        }
        w_comm.push(w);
    }
    let w_radar: Vec<isacopt::CMat> = (0..nb).map(|b| {
        isacopt::CMat::identity(n, n) * isacopt::C64::new(((1.0 - rho) * cfg.max_power_w[b] / n as f64).sqrt(), 0.0)
    }).collect();
    let bf = metrics::Beamformers { active, w_comm, w_radar };
    let mut sol = metrics::LiftedSolution::from_beamformers(&bf);
    let mut worst = 0.0f64;
    for e in &lift.radiation {
        let i = metrics::radiation_of_entry(e, &sol) * cfg.num_subcarriers as f64;
        worst = worst.max(i / e.mask_w);
    }
    println!("worst radiation ratio before scaling: {worst}");
    let t = (0.95 / worst).min(0.999);
    println!("scale t = {t}");
    for v in sol.v_comm.iter_mut().chain(sol.v_radar.iter_mut()) {
        *v *= isacopt::C64::new(t, 0.0);
    }
    let b = metrics::utilities(&sol, &lift, &cfg);
    println!("feasible: {} violations: {:#?}", b.feasible, b.violations);
    println!("rates: {:?} crbD {:?} crbV {:?}", b.rates, b.crb_position, b.crb_velocity);

    // one P7 solve at the feasible initialization
    use isacopt::problem::{self, BranchDomain, ScaExpansion};
    let z0 = problem::achieved_aux(&sol, &lift, &cfg);
    println!("z0 = {:?}", z0.0);
    let exp_pt = ScaExpansion { a: vec![1.0, 1.0], solution: sol.clone(), z: z0.clone() };
    let domain = BranchDomain::relaxed(cfg.num_bs);
    let prog = problem::build_sca_subproblem(&cfg, &lift, &domain, &exp_pt, 15.0).unwrap();
    let (info, asn) = isacopt::conic::solve(&prog.program, 1e-7, 200);
    println!("P7 status {:?} viol {:.3e} obj {:?} iters {}", info.status, info.max_violation, info.objective, info.iterations);
    for drop in ["C17", "C18", "C12", "C26", "ln"] {
        let mut reduced = prog.program.clone();
        reduced.constraints.retain(|b| !b.label.contains(drop));
        let (i2, _) = isacopt::conic::solve(&reduced, 1e-7, 200);
        println!("  drop '{drop}': {:?} viol {:.3e} iters {}", i2.status, i2.max_violation, i2.iterations);
    }
    if let Some(w) = asn {
        let (wit, z1) = prog.decode(&w);
        println!("a = {:?}", wit.solution.a);
        println!("z1 = {:?}", z1.0);
        let b1 = metrics::utilities(&wit.solution, &lift, &cfg);
        println!("iterate feasible {} violations {:?}", b1.feasible, b1.violations);
        let (log, _lin) = problem::objective_eval(&z1.0, &cfg);
        println!("obj(z1) = {log}");
    }
}
// second stage appended: drive one P7 solve
