mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use ssep_hydro::field::{
    build_density_system, build_moment_system, gradient, pair_index, solve_correlation,
    solve_density, solve_density_expm, solve_density_with, SolverOptions,
};
use ssep_hydro::harness::presets;
use ssep_hydro::{Error, InitialProfile, LeftBoundary, ModelSpec, StructuredBoundary};

const TIMES: [f64; 3] = [0.01, 0.1, 1.0];

fn linear(a: f64, b: f64) -> InitialProfile {
    InitialProfile::Linear { left: a, right: b }
}

#[test]
fn battery_matches_the_naive_master_equation() {
    for (name, spec, profile) in presets::battery(8) {
        if matches!(spec.left, LeftBoundary::Table(_)) {
            assert!(matches!(
                solve_correlation(&spec, &profile, &TIMES),
                Err(Error::Unsupported(_))
            ));
            continue;
        }
        let field = solve_correlation(&spec, &profile, &TIMES).unwrap();
        for (ti, &t) in TIMES.iter().enumerate() {
            let law = common::naive_law(&spec, &profile, t);
            for k in 1..=7 {
                let want = common::density_of(&law, k);
                let got = field.density.at(ti, k);
                assert!(
                    (got - want).abs() < 1e-8,
                    "{name} t={t} k={k}: {got} vs {want}"
                );
                for l in k + 1..=7 {
                    let want = common::phi_of(&law, k, l);
                    let got = field.phi(ti, k, l);
                    assert!((got - want).abs() < 1e-8, "{name} t={t} ({k},{l})");
                    assert_eq!(field.phi(ti, l, k), got);
                }
                assert_eq!(field.phi(ti, k, 8), 0.0);
            }
        }
    }
}

fn moments(law: &DVector<f64>, sites: usize) -> (Vec<f64>, Vec<f64>) {
    let y: Vec<f64> = (1..=sites).map(|k| common::density_of(law, k)).collect();
    let mut z = vec![0.0; sites * (sites - 1) / 2];
    for l in 2..=sites {
        for k in 1..l {
            z[pair_index(k, l)] = common::pair_of(law, k, l);
        }
    }
    (y, z)
}

fn structured_spec() -> impl Strategy<Value = ModelSpec> {
    (1usize..=3, 0.0..=1.0f64).prop_flat_map(|(p, beta)| {
        (
            prop::collection::vec(0.0..2.0f64, p),
            prop::collection::vec(0.0..=1.0f64, p),
            prop::collection::vec(prop::collection::vec(0.0..1.5f64, p), p),
            prop::collection::vec(prop::collection::vec(0.0..1.5f64, p), p),
        )
            .prop_map(move |(r, alpha, mut c, mut a)| {
                for j in 0..p {
                    c[j][j] = 0.0;
                    a[j][j] = 0.0;
                }
                let b = StructuredBoundary {
                    r,
                    alpha,
                    copy: c,
                    anticopy: a,
                };
                ModelSpec::structured(p + 4, beta, b).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The assembled system applied to the moments of any law equals the
    /// moments of the generator applied to that law.
    #[test]
    fn moment_system_is_the_generator_action(
        spec in structured_spec(),
        raw in prop::collection::vec(0.0..1.0f64, 1 << 6),
    ) {
        let sites = spec.sites();
        let states = 1usize << sites;
        let mut law = DVector::from_column_slice(&raw[..states]);
        law /= law.sum();
        let q = common::naive_generator(&spec);
        let dlaw = q.transpose() * &law;
        let (y, z) = moments(&law, sites);
        let (dy_want, dz_want) = moments(&dlaw, sites);
        let sys = build_moment_system(&spec).unwrap();
        let (dy, dz) = sys.apply(&y, Some(&z));
        let dz = dz.unwrap();
        let scale = spec.lattice.clock();
        for (a, b) in dy.iter().zip(&dy_want) {
            prop_assert!((a - b).abs() < 1e-10 * scale);
        }
        for (a, b) in dz.iter().zip(&dz_want) {
            prop_assert!((a - b).abs() < 1e-10 * scale);
        }
    }
}

#[test]
fn copy_rows_pull_towards_the_copied_site() {
    let spec = presets::copy_only(8);
    let sys = build_density_system(&spec).unwrap();
    let c = spec.lattice.clock();
    // stirring plus c12 = 1
    assert!((sys.a11.get(0, 0) + 2.0 * c).abs() < 1e-9);
    assert!((sys.a11.get(0, 1) - 2.0 * c).abs() < 1e-9);
    // stirring on both sides plus c21 = 0.5
    assert!((sys.a11.get(1, 0) - 1.5 * c).abs() < 1e-9);
    assert!((sys.a11.get(1, 1) + 2.5 * c).abs() < 1e-9);
    assert!((sys.a11.get(1, 2) - c).abs() < 1e-9);
    assert!(sys.b1[0].abs() < 1e-12 && sys.b1[1].abs() < 1e-12);
}

#[test]
fn half_filled_stationary_state() {
    let b = StructuredBoundary::reservoirs(vec![1.0, 2.0], vec![0.5, 0.5]);
    let spec = ModelSpec::structured(20, 0.5, b).unwrap();
    let f = solve_correlation(&spec, &InitialProfile::constant(0.5), &[0.0, 0.1]).unwrap();
    for ti in 0..2 {
        for k in 1..20 {
            assert!((f.density.at(ti, k) - 0.5).abs() < 1e-12);
            for l in k + 1..20 {
                assert!(f.phi(ti, k, l).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn equal_densities_keep_the_product_form() {
    let b = StructuredBoundary::reservoirs(vec![0.4, 1.3, 0.9], vec![0.3, 0.3, 0.3]);
    let spec = ModelSpec::structured(16, 0.3, b).unwrap();
    let f = solve_correlation(&spec, &InitialProfile::constant(0.3), &TIMES).unwrap();
    assert!(f.phi.iter().flatten().all(|v| v.abs() < 1e-10));
}

#[test]
fn long_time_limit_is_linear() {
    let b = StructuredBoundary::reservoirs(vec![1.0], vec![0.2]);
    let spec = ModelSpec::structured(16, 0.8, b).unwrap();
    let profile = InitialProfile::constant(0.5);
    let expm = solve_density_expm(&spec, &profile, &[50.0]).unwrap();
    let steps = solve_density_with(&spec, &profile, &[50.0], &SolverOptions::coarse(1e-3)).unwrap();
    for k in 1..16 {
        let want = 0.2 + 0.6 * k as f64 / 16.0;
        assert!((expm.at(0, k) - want).abs() < 1e-6);
        assert!((steps.at(0, k) - want).abs() < 1e-6);
    }
}

#[test]
fn time_step_halving_is_below_1e9() {
    let spec = presets::mixed(32);
    let profile = linear(0.3, 0.6);
    let grid = [0.01, 0.05];
    let base = solve_density(&spec, &profile, &grid).unwrap();
    let half = solve_density_with(
        &spec,
        &profile,
        &grid,
        &SolverOptions {
            dt: 5e-6,
            ..SolverOptions::default()
        },
    )
    .unwrap();
    for (a, b) in base.rho.iter().flatten().zip(half.rho.iter().flatten()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn stepping_agrees_with_the_exponential() {
    let spec = presets::anticopy_only(64);
    let profile = linear(0.1, 0.9);
    let grid = [0.001, 0.02, 0.2];
    let a = solve_density(&spec, &profile, &grid).unwrap();
    let b = solve_density_expm(&spec, &profile, &grid).unwrap();
    for (x, y) in a.rho.iter().flatten().zip(b.rho.iter().flatten()) {
        assert!((x - y).abs() < 1e-9);
    }
    assert_eq!(a.cemetery(1), 0.5);
    assert_eq!(a.at(0, 64), spec.beta);
}

#[test]
fn correlation_rows_are_the_literal_stencils() {
    let f = solve_correlation(&presets::mixed(24), &linear(0.3, 0.6), &TIMES).unwrap();
    assert!(f.stencil_defect < 1e-12, "{}", f.stencil_defect);
}

#[test]
fn tables_are_rejected() {
    let spec = presets::rate_table(8);
    let p = linear(0.3, 0.6);
    assert!(matches!(
        build_moment_system(&spec),
        Err(Error::Unsupported(_))
    ));
    assert!(matches!(
        solve_density(&spec, &p, &TIMES),
        Err(Error::Unsupported(_))
    ));
    assert!(matches!(
        solve_density_expm(&spec, &p, &TIMES),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn gradient_examples() {
    let b = StructuredBoundary::reservoirs(vec![1.0], vec![0.4]);
    let flat = ModelSpec::structured(10, 0.4, b).unwrap();
    let g = gradient(&solve_density(&flat, &InitialProfile::constant(0.4), &[0.1]).unwrap());
    assert!(g.g[0].iter().all(|v| v.abs() < 1e-12));
    assert!(g.m[0].iter().all(|v| v.abs() < 1e-20));

    let b = StructuredBoundary::reservoirs(vec![1.0], vec![0.2]);
    let spec = ModelSpec::structured(10, 0.7, b).unwrap();
    let f = solve_density_expm(&spec, &linear(0.2, 0.7), &[0.0, 0.3]).unwrap();
    let g = gradient(&f);
    for row in 0..2 {
        assert_eq!(g.g[row].len(), 9);
        for (gk, mk) in g.g[row].iter().zip(&g.m[row]) {
            assert!((gk - 0.05).abs() < 1e-12);
            assert_eq!(*mk, gk * gk);
        }
    }
}

#[test]
fn grid_contract() {
    let spec = presets::mixed(8);
    assert!(matches!(
        solve_density(&spec, &linear(0.3, 0.6), &[0.2, 0.1]),
        Err(Error::Contract(_))
    ));
}
