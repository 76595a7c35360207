//! Named models used by the default study configurations and the test battery.

use crate::model::{ModelSpec, RateTableBoundary, StructuredBoundary};
use crate::profile::InitialProfile;

pub fn pure_reservoir(n: usize) -> ModelSpec {
    let left = StructuredBoundary::reservoirs(vec![1.0, 0.5], vec![0.7, 0.2]);
    ModelSpec::structured(n, 0.4, left).expect("valid preset")
}

pub fn copy_only(n: usize) -> ModelSpec {
    let left = StructuredBoundary::reservoirs(vec![0.0, 0.0], vec![0.5, 0.5])
        .with_copy(1, 2, 1.0)
        .with_copy(2, 1, 0.5);
    ModelSpec::structured(n, 0.6, left).expect("valid preset")
}

pub fn anticopy_only(n: usize) -> ModelSpec {
    let left = StructuredBoundary::reservoirs(vec![0.0, 0.0], vec![0.5, 0.5])
        .with_anticopy(1, 2, 0.8)
        .with_anticopy(2, 1, 0.3);
    ModelSpec::structured(n, 0.3, left).expect("valid preset")
}

/// Reservoirs on both block sites plus copy of site 2 onto site 1.
pub fn mixed(n: usize) -> ModelSpec {
    let left = StructuredBoundary::reservoirs(vec![1.0, 0.3], vec![0.9, 0.2]).with_copy(1, 2, 0.6);
    ModelSpec::structured(n, 0.4, left).expect("valid preset")
}

pub fn rate_table(n: usize) -> ModelSpec {
    let t = RateTableBoundary::from_fn(2, |b| 0.8 + 0.5 * b[0] as f64 + 0.7 * b[1] as f64)
        .expect("valid preset");
    ModelSpec::table(n, 0.5, t).expect("valid preset")
}

/// All reservoir densities equal to `beta`: Bernoulli(beta) is stationary.
pub fn matched_stationary(n: usize) -> ModelSpec {
    let left = StructuredBoundary::reservoirs(vec![1.0, 0.7], vec![0.35, 0.35]);
    ModelSpec::structured(n, 0.35, left).expect("valid preset")
}

/// Single reservoir at 0.2 on the left, 0.8 on the right.
pub fn mismatched(n: usize) -> ModelSpec {
    let left = StructuredBoundary::reservoirs(vec![1.0], vec![0.2]);
    ModelSpec::structured(n, 0.8, left).expect("valid preset")
}

/// Right density 0.4 sits near the left value, so the stationary slope is small.
/// Three-site table with `c(0, xi) = [1, 1.2, 1.3, 1]`, `c(1, xi) = [1.5, 1.5, 1.8, 1.9]`
/// for `xi = 00, 01, 10, 11` (sites 2, 3).
pub fn table_p3(n: usize) -> ModelSpec {
    let c0 = [1.0, 1.2, 1.3, 1.0];
    let c1 = [1.5, 1.5, 1.8, 1.9];
    let t = RateTableBoundary::from_fn(3, |b| {
        let xi = 2 * b[1] as usize + b[2] as usize;
        if b[0] == 0 {
            c0[xi]
        } else {
            c1[xi]
        }
    })
    .expect("valid preset");
    ModelSpec::table(n, 0.4, t).expect("valid preset")
}

/// The oracle battery with an initial profile for each entry.
pub fn battery(n: usize) -> Vec<(&'static str, ModelSpec, InitialProfile)> {
    let tilted = InitialProfile::Linear {
        left: 0.3,
        right: 0.6,
    };
    vec![
        ("pure_reservoir", pure_reservoir(n), tilted.clone()),
        ("copy_only", copy_only(n), tilted.clone()),
        ("anticopy_only", anticopy_only(n), tilted.clone()),
        ("mixed", mixed(n), tilted.clone()),
        ("rate_table", rate_table(n), tilted),
        (
            "matched_stationary",
            matched_stationary(n),
            InitialProfile::constant(0.35),
        ),
    ]
}
