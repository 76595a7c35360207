mod common;

use ssep_hydro::harness::presets;
use ssep_hydro::kmc::{
    ensemble_density, ensemble_stats, ensemble_with_seeds, simulate, time_averaged_occupancy,
    Simulator,
};
use ssep_hydro::model::sample_initial;
use ssep_hydro::{Configuration, InitialProfile, ModelSpec, StructuredBoundary};

fn linear() -> InitialProfile {
    InitialProfile::Linear {
        left: 0.3,
        right: 0.6,
    }
}

#[test]
fn ensemble_matches_the_naive_master_equation() {
    let spec = presets::mixed(8);
    let times = [0.02, 0.1, 0.3];
    let stats = ensemble_stats(&spec, &linear(), &times, 100_000, 11).unwrap();
    let (mut inside, mut total) = (0, 0);
    for (ti, &t) in times.iter().enumerate() {
        let law = common::naive_law(&spec, &linear(), t);
        for k in 1..=7 {
            total += 1;
            inside += stats.rho(ti, k).within(common::density_of(&law, k), 4.0) as usize;
            for l in k + 1..=7 {
                total += 1;
                inside += stats.phi(ti, k, l).within(common::phi_of(&law, k, l), 4.0) as usize;
            }
        }
    }
    let frac = inside as f64 / total as f64;
    assert!(frac >= 0.95, "{inside}/{total} within four standard errors");
}

#[test]
fn anticopy_ensemble_matches_the_oracle() {
    let spec = presets::anticopy_only(7);
    let stats = ensemble_density(&spec, &linear(), &[0.05], 40_000, 3).unwrap();
    let law = common::naive_law(&spec, &linear(), 0.05);
    let inside = (1..=6)
        .filter(|&k| stats.rho(0, k).within(common::density_of(&law, k), 4.0))
        .count();
    assert!(inside >= 5, "{inside}/6");
}

#[test]
fn same_seed_same_trajectory() {
    let spec = presets::copy_only(32);
    let t = [0.01, 0.05, 0.1];
    let a = simulate(&spec, &linear(), &t, 42).unwrap();
    let b = simulate(&spec, &linear(), &t, 42).unwrap();
    assert_eq!(a.checkpoints, b.checkpoints);
    assert_eq!(a.event_count, b.event_count);
    let c = simulate(&spec, &linear(), &t, 43).unwrap();
    assert_ne!(a.checkpoints, c.checkpoints);
    assert_eq!(
        ensemble_stats(&spec, &linear(), &t, 50, 5).unwrap(),
        ensemble_stats(&spec, &linear(), &t, 50, 5).unwrap()
    );
}

#[test]
fn absorbing_configuration_never_moves() {
    let b = StructuredBoundary::reservoirs(vec![1.0, 1.0], vec![0.0, 0.0]);
    let spec = ModelSpec::structured(10, 0.0, b).unwrap();
    let tr = simulate(&spec, &InitialProfile::constant(0.0), &[0.1, 1.0], 1).unwrap();
    assert_eq!(tr.event_count, 0);
    for (_, cfg) in &tr.checkpoints {
        assert_eq!(*cfg, Configuration::empty(9));
    }
}

#[test]
fn half_filled_state_stays_half_filled() {
    let b = StructuredBoundary::reservoirs(vec![1.0], vec![0.5]);
    let spec = ModelSpec::structured(16, 0.5, b).unwrap();
    let stats = ensemble_stats(&spec, &InitialProfile::constant(0.5), &[0.2], 1000, 9).unwrap();
    let occupied: u64 = stats.ones[0].iter().sum();
    let cells = 1000.0 * 15.0;
    let m = occupied as f64 / cells;
    // sites are independent under the stationary product law
    assert!((m - 0.5).abs() <= 4.0 * (0.25 / cells).sqrt(), "{m}");
    let outside = (1..15)
        .flat_map(|k| (k + 1..16).map(move |l| (k, l)))
        .filter(|&(k, l)| !stats.phi(0, k, l).within(0.0, 4.0))
        .count();
    assert!(outside <= 5, "{outside} of 105 pairs");
}

#[test]
fn identical_seeds_give_zero_variance() {
    let spec = presets::mixed(12);
    let s = ensemble_with_seeds(&spec, &linear(), &[0.05], &[7, 7], true).unwrap();
    for k in 1..12 {
        assert_eq!(s.rho(0, k).stderr, 0.0);
    }
}

#[test]
fn closed_dynamics_conserve_particles() {
    let spec = presets::mixed(48);
    let cfg = sample_initial(&linear(), spec.lattice, 3);
    let count = cfg.particles();
    let rng = rand::SeedableRng::seed_from_u64(5);
    let mut sim = Simulator::new(&spec, cfg, rng).unwrap();
    sim.close_boundaries();
    for step in 1..=20 {
        sim.run_until(step as f64 * 100.0);
        assert_eq!(sim.configuration().particles(), count);
        assert!(sim.occupancy().iter().all(|&x| x <= 1));
    }
    assert!(sim.events() > 0);
}

#[test]
fn time_average_reaches_stationary_density() {
    let spec = presets::matched_stationary(16);
    let e = time_averaged_occupancy(&spec, &InitialProfile::constant(0.9), 3, 0.5, 1.0, 400, 1)
        .unwrap();
    assert!(e.within(0.35, 4.0), "{} +- {}", e.value, e.stderr);
}
