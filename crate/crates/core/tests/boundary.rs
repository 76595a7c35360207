use nalgebra::DMatrix;
use proptest::prelude::*;
use ssep_hydro::boundary::{
    boundary_report, build_chain, check_a1, check_a2, invariant_measure, invariant_measure_pinned,
    left_density,
};
use ssep_hydro::model::{block_bits, RateTableBoundary};
use ssep_hydro::{Error, ModelSpec, StructuredBoundary};

/// Block generator written out from the per-site flip formula.
fn naive_block_generator(b: &StructuredBoundary) -> DMatrix<f64> {
    let p = b.p();
    let m = 1usize << p;
    let mut q = DMatrix::zeros(m, m);
    for s in 0..m {
        let eta = block_bits(p, s);
        for j in 0..p {
            let x = eta[j] as f64;
            let mut r = b.r[j] * (b.alpha[j] * (1.0 - x) + (1.0 - b.alpha[j]) * x);
            for k in 0..p {
                if k != j && eta[k] != eta[j] {
                    r += b.copy[j][k];
                }
                if k != j && eta[k] == eta[j] {
                    r += b.anticopy[j][k];
                }
            }
            q[(s, s ^ (1 << j))] += r;
        }
        for k in 0..p.saturating_sub(1) {
            if eta[k] != eta[k + 1] {
                q[(s, s ^ (0b11 << k))] += 1.0;
            }
        }
        q[(s, s)] = 0.0;
        let out: f64 = q.row(s).sum();
        q[(s, s)] = -out;
    }
    q
}

/// Stationary law by power iteration on the uniformised chain.
fn power_iteration(q: &DMatrix<f64>) -> Vec<f64> {
    let m = q.nrows();
    let lam = (0..m).map(|i| -q[(i, i)]).fold(0.0, f64::max) * 1.5 + 1.0;
    let step = DMatrix::identity(m, m) + q / lam;
    let mut pt = step.transpose();
    // squaring reaches very long horizons quickly
    for _ in 0..40 {
        pt = &pt * &pt;
    }
    let x = pt * nalgebra::DVector::from_element(m, 1.0 / m as f64);
    let s = x.sum();
    x.iter().map(|v| v / s).collect()
}

fn spec2(b: StructuredBoundary) -> ModelSpec {
    ModelSpec::structured(b.p() + 5, 0.5, b).unwrap()
}

fn structured_block() -> impl Strategy<Value = StructuredBoundary> {
    (1usize..=4).prop_flat_map(|p| {
        (
            prop::collection::vec(0.1..2.0f64, p),
            prop::collection::vec(0.0..=1.0f64, p),
            prop::collection::vec(prop::collection::vec(0.0..1.0f64, p), p),
            prop::collection::vec(prop::collection::vec(0.0..1.0f64, p), p),
        )
            .prop_map(move |(r, alpha, mut c, mut a)| {
                for j in 0..p {
                    c[j][j] = 0.0;
                    a[j][j] = 0.0;
                }
                StructuredBoundary {
                    r,
                    alpha,
                    copy: c,
                    anticopy: a,
                }
            })
    })
}

#[test]
fn single_site_chain() {
    let chain = build_chain(&spec2(StructuredBoundary::reservoirs(vec![1.0], vec![0.3])));
    assert_eq!(chain.states(), 2);
    assert!((chain.rate(0, 1) - 0.3).abs() < 1e-15);
    assert!((chain.rate(1, 0) - 0.7).abs() < 1e-15);
    let mu = invariant_measure(&chain).unwrap();
    assert!((mu.weight(0) - 0.7).abs() < 1e-12 && (mu.weight(1) - 0.3).abs() < 1e-12);
}

#[test]
fn stirring_only_chain() {
    let b = StructuredBoundary::reservoirs(vec![0.0, 0.0], vec![0.5, 0.5]);
    let chain = build_chain(&spec2(b));
    let g = chain.generator();
    for i in 0..4 {
        for j in 0..4 {
            let swap = (i == 1 && j == 2) || (i == 2 && j == 1);
            if i != j {
                assert_eq!(g[(i, j)], if swap { 1.0 } else { 0.0 });
            }
        }
    }
}

#[test]
fn worked_two_site_chain() {
    let spec = spec2(StructuredBoundary::reservoirs(
        vec![1.0, 1.0],
        vec![1.0, 0.0],
    ));
    let chain = build_chain(&spec);
    // states by index: 0 = "00", 1 = "10", 2 = "01", 3 = "11"
    let out = [1.0, 1.0, 3.0, 1.0];
    for (s, &o) in out.iter().enumerate() {
        assert!((chain.out_rate(s) - o).abs() < 1e-15, "state {s}");
    }
    let mu = invariant_measure(&chain).unwrap();
    let by_key = mu.by_key();
    let want = [
        ("00", 1.0 / 6.0),
        ("01", 1.0 / 6.0),
        ("10", 0.5),
        ("11", 1.0 / 6.0),
    ];
    for (k, w) in want {
        assert!((by_key[k] - w).abs() < 1e-12, "{k}");
    }
    assert!((left_density(&spec).unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn uniform_measure_at_half() {
    let spec = spec2(StructuredBoundary::reservoirs(
        vec![1.0, 1.0],
        vec![0.5, 0.5],
    ));
    let mu = invariant_measure(&build_chain(&spec)).unwrap();
    assert!(mu.weights().iter().all(|w| (w - 0.25).abs() < 1e-12));
}

#[test]
fn copy_only_block_is_degenerate() {
    let b = StructuredBoundary::reservoirs(vec![0.0, 0.0], vec![0.5, 0.5]).with_copy(1, 2, 5.0);
    let spec = spec2(b);
    assert!(matches!(
        invariant_measure(&build_chain(&spec)),
        Err(Error::NonUniqueStationary(2))
    ));
    assert!(matches!(
        left_density(&spec),
        Err(Error::NonUniqueStationary(_))
    ));
    let report = boundary_report(&spec).unwrap();
    assert!(!report.unique && report.alpha.is_none());
    assert_eq!(report.a1, Some(false));
}

#[test]
fn a1_examples() {
    let with = |b: StructuredBoundary| check_a1(&spec2(b)).unwrap();
    assert!(with(StructuredBoundary::reservoirs(
        vec![1.0, 0.0],
        vec![0.5, 0.5]
    )));
    assert!(!with(
        StructuredBoundary::reservoirs(vec![0.0, 0.0], vec![0.5, 0.5]).with_copy(1, 2, 5.0)
    ));
    assert!(with(
        StructuredBoundary::reservoirs(vec![0.0, 0.0], vec![0.5, 0.5]).with_anticopy(1, 2, 0.1)
    ));
    let table =
        ModelSpec::table(6, 0.5, RateTableBoundary::new(1, vec![1.0, 1.0]).unwrap()).unwrap();
    assert!(matches!(check_a1(&table), Err(Error::Unsupported(_))));
}

fn table2(c00: f64, c01: f64, c10: f64, c11: f64) -> RateTableBoundary {
    // c(x, y): x = site 1, y = site 2; index = x + 2 y
    RateTableBoundary::new(2, vec![c00, c10, c01, c11]).unwrap()
}

#[test]
fn a2_examples() {
    let r = check_a2(&table2(1.0, 1.0, 1.0, 1.0));
    assert_eq!((r.a, r.b, r.lambda_sum, r.holds), (1.0, 1.0, 0.0, true));
    let r = check_a2(&table2(1.0, 3.0, 1.0, 1.0));
    assert_eq!((r.a, r.b, r.lambda_sum, r.holds), (1.0, 1.0, 2.0, true));
    let r = check_a2(&table2(1.0, 4.0, 1.0, 1.0));
    assert_eq!(r.lambda_sum, 3.0);
    assert!(!r.holds);
    assert!(check_a2(&RateTableBoundary::new(1, vec![0.2, 5.0]).unwrap()).holds);
}

#[test]
fn table_chain_flips_only_site_one() {
    let t = RateTableBoundary::from_fn(3, |b| 1.0 + b[1] as f64 + 0.5 * b[2] as f64).unwrap();
    let spec = ModelSpec::table(8, 0.4, t.clone()).unwrap();
    let chain = build_chain(&spec);
    for s in 0..8 {
        assert!((chain.rate(s, s ^ 1) - t.rate_of_state(s)).abs() < 1e-15);
        for j in [1, 2] {
            assert_eq!(chain.rate(s, s ^ (1 << j)), 0.0);
        }
    }
    let mu = invariant_measure(&chain).unwrap();
    let oracle = power_iteration(chain.generator());
    for (a, b) in mu.weights().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn chain_matches_definition(b in structured_block()) {
        let chain = build_chain(&spec2(b.clone()));
        let want = naive_block_generator(&b);
        prop_assert!((chain.generator() - &want).amax() < 1e-13);
        for s in 0..chain.states() {
            prop_assert!(chain.generator().row(s).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn measure_matches_power_iteration(b in structured_block()) {
        let chain = build_chain(&spec2(b));
        let mu = invariant_measure(&chain).unwrap();
        prop_assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(mu.residual(&chain) < 1e-10);
        let oracle = power_iteration(chain.generator());
        for (a, o) in mu.weights().iter().zip(&oracle) {
            prop_assert!((a - o).abs() < 1e-9, "{} vs {}", a, o);
        }
        for pin in 1..chain.states() {
            let other = invariant_measure_pinned(&chain, pin).unwrap();
            for (a, o) in mu.weights().iter().zip(other.weights()) {
                prop_assert!((a - o).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn density_is_invariant_under_time_change(b in structured_block(), lam in 0.01..50.0f64) {
        // the stirring rate is fixed at 1, so a pure time change needs no swaps
        let mut b = b;
        if b.p() > 1 {
            b.alpha = vec![b.alpha[0]; b.p()];
            b.copy.iter_mut().flatten().for_each(|v| *v = 0.0);
            b.anticopy.iter_mut().flatten().for_each(|v| *v = 0.0);
        }
        let base = left_density(&spec2(b.clone())).unwrap();
        let scale = |m: &mut Vec<Vec<f64>>| m.iter_mut().flatten().for_each(|v| *v *= lam);
        let mut s = b;
        s.r.iter_mut().for_each(|v| *v *= lam);
        scale(&mut s.copy);
        scale(&mut s.anticopy);
        let scaled = left_density(&spec2(s)).unwrap();
        prop_assert!((base - scaled).abs() < 1e-10);
    }

    #[test]
    fn common_density_gives_product_measure(p in 1usize..=4, rho in 0.0..=1.0f64,
                                            r in prop::collection::vec(0.1..3.0f64, 4)) {
        let b = StructuredBoundary::reservoirs(r[..p].to_vec(), vec![rho; p]);
        let mu = invariant_measure(&build_chain(&spec2(b))).unwrap();
        for (s, w) in mu.weights().iter().enumerate() {
            let ones = (s as u32).count_ones() as i32;
            let want = rho.powi(ones) * (1.0 - rho).powi(p as i32 - ones);
            prop_assert!((w - want).abs() < 1e-12);
        }
    }
}
