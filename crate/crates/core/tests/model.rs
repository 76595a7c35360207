mod common;

use proptest::prelude::*;
use ssep_hydro::model::{sample_initial, transitions, RateTableBoundary};
use ssep_hydro::{
    Configuration, Error, InitialProfile, LatticeSpec, LeftBoundary, ModelSpec, StructuredBoundary,
};

fn structured_spec() -> impl Strategy<Value = ModelSpec> {
    (1usize..=3, 0usize..4, 0.0..=1.0f64).prop_flat_map(|(p, extra, beta)| {
        let n = p + 3 + extra;
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
                ModelSpec::structured(n, beta, b).unwrap()
            })
    })
}

fn table_spec() -> impl Strategy<Value = ModelSpec> {
    (1usize..=3, 0usize..3, 0.0..=1.0f64).prop_flat_map(|(p, extra, beta)| {
        prop::collection::vec(0.0..3.0f64, 1 << p).prop_map(move |rates| {
            ModelSpec::table(
                p + 3 + extra,
                beta,
                RateTableBoundary::new(p, rates).unwrap(),
            )
            .unwrap()
        })
    })
}

fn merged(cfg: &Configuration, spec: &ModelSpec) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for (mv, r) in transitions(cfg, spec).unwrap() {
        let to = mv.apply_to(cfg).index();
        match out.iter_mut().find(|e| e.0 == to) {
            Some(e) => e.1 += r,
            None => out.push((to, r)),
        }
    }
    out.sort_by_key(|e| e.0);
    out
}

fn assert_same_rates(spec: &ModelSpec) {
    for s in 0..1usize << spec.sites() {
        let cfg = Configuration::from_index(s, spec.sites());
        let got = merged(&cfg, spec);
        let mut want = common::naive_rates(spec, s);
        want.sort_by_key(|e| e.0);
        assert_eq!(got.len(), want.len(), "state {s}");
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.0, w.0);
            assert!((g.1 - w.1).abs() < 1e-12, "state {s}: {} vs {}", g.1, w.1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn structured_transitions_match_definition(spec in structured_spec()) {
        assert_same_rates(&spec);
    }

    #[test]
    fn table_transitions_match_definition(spec in table_spec()) {
        assert_same_rates(&spec);
    }

    #[test]
    fn json_roundtrip(spec in structured_spec()) {
        let back = ModelSpec::from_json(&spec.to_json()).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn transitions_preserve_particles_or_change_by_one(spec in structured_spec(), s in 0usize..64) {
        let cfg = Configuration::from_index(s % (1 << spec.sites()), spec.sites());
        for (mv, r) in transitions(&cfg, &spec).unwrap() {
            prop_assert!(r > 0.0);
            let d = mv.apply_to(&cfg).particles() as i64 - cfg.particles() as i64;
            prop_assert!(d.abs() <= 1);
        }
    }
}

#[test]
fn table_json_roundtrip() {
    let spec = ModelSpec::table(
        8,
        0.3,
        RateTableBoundary::from_fn(2, |b| 0.5 + b[0] as f64 + 2.0 * b[1] as f64).unwrap(),
    )
    .unwrap();
    assert_eq!(ModelSpec::from_json(&spec.to_json()).unwrap(), spec);
}

#[test]
fn json_input_format() {
    let text = r#"{"N": 10, "p": 2, "beta": 0.4,
        "left": {"kind": "table", "table": {"00": 1.0, "10": 2.0, "01": 3.0, "11": 4.0}}}"#;
    let spec = ModelSpec::from_json(text).unwrap();
    let LeftBoundary::Table(t) = &spec.left else {
        panic!("expected a table")
    };
    // key "10" means site 1 occupied, site 2 empty
    assert_eq!(t.rate(&[1, 0]), 2.0);
    assert_eq!(t.rate(&[0, 1]), 3.0);
}

#[test]
fn invalid_models_are_rejected() {
    assert!(matches!(
        LatticeSpec::new(4, 2),
        Err(Error::InvalidModel(_))
    ));
    assert!(matches!(
        LatticeSpec::new(8, 0),
        Err(Error::InvalidModel(_))
    ));
    let b = StructuredBoundary::reservoirs(vec![1.0], vec![1.5]);
    assert!(matches!(
        ModelSpec::structured(8, 0.5, b),
        Err(Error::InvalidModel(_))
    ));
    let b = StructuredBoundary::reservoirs(vec![-1.0], vec![0.5]);
    assert!(ModelSpec::structured(8, 0.5, b).is_err());
    let b = StructuredBoundary::reservoirs(vec![1.0], vec![0.5]);
    assert!(ModelSpec::structured(8, 1.5, b).is_err());
    assert!(RateTableBoundary::new(2, vec![1.0; 3]).is_err());
    assert!(RateTableBoundary::new(1, vec![1.0, f64::NAN]).is_err());
    let missing =
        r#"{"N": 10, "p": 1, "beta": 0.4, "left": {"kind": "table", "table": {"0": 1.0}}}"#;
    assert!(ModelSpec::from_json(missing).is_err());
    let small = r#"{"N": 3, "p": 2, "beta": 0.4, "left": {"kind": "structured", "r": [1, 1], "alpha": [0.5, 0.5]}}"#;
    assert!(matches!(
        ModelSpec::from_json(small),
        Err(Error::InvalidModel(_))
    ));
    assert!(matches!(ModelSpec::from_json("{"), Err(Error::Json(_))));
    let unknown = r#"{"N": 10, "p": 1, "beta": 0.4, "left": {"kind": "other"}}"#;
    assert!(ModelSpec::from_json(unknown).is_err());
}

#[test]
fn wrong_configuration_size_is_a_contract_error() {
    let spec = ModelSpec::structured(8, 0.5, StructuredBoundary::reservoirs(vec![1.0], vec![0.5]))
        .unwrap();
    let cfg = Configuration::empty(3);
    assert!(matches!(transitions(&cfg, &spec), Err(Error::Contract(_))));
}

#[test]
fn initial_sampling_matches_marginals() {
    let lattice = LatticeSpec::new(10, 1).unwrap();
    let profile = InitialProfile::Linear {
        left: 0.1,
        right: 0.9,
    };
    let draws = 4000;
    let mut counts = [0usize; 9];
    for seed in 0..draws {
        let cfg = sample_initial(&profile, lattice, seed);
        for k in 1..=9 {
            counts[k - 1] += cfg.get(k) as usize;
        }
    }
    for k in 1..=9 {
        let m = profile.eval(k as f64 / 10.0);
        let sd = (m * (1.0 - m) / draws as f64).sqrt();
        let got = counts[k - 1] as f64 / draws as f64;
        assert!((got - m).abs() < 5.0 * sd, "site {k}: {got} vs {m}");
    }
    assert_eq!(
        sample_initial(&profile, lattice, 7),
        sample_initial(&profile, lattice, 7)
    );
}
