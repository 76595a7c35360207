//! Independent reference implementations shared by the integration tests.
//! Rates are written out from the model definition, not taken from the crate.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ssep_hydro::{InitialProfile, LeftBoundary, ModelSpec};

pub fn bit(state: usize, k: usize) -> u8 {
    ((state >> (k - 1)) & 1) as u8
}

pub fn flip_bit(state: usize, k: usize) -> usize {
    state ^ (1 << (k - 1))
}

/// Out-transitions `(target, rate)` of `state`, merged per target.
pub fn naive_rates(spec: &ModelSpec, state: usize) -> Vec<(usize, f64)> {
    let n1 = spec.sites();
    let mut out: Vec<(usize, f64)> = Vec::new();
    let mut add = |to: usize, r: f64| {
        if r == 0.0 {
            return;
        }
        match out.iter_mut().find(|e| e.0 == to) {
            Some(e) => e.1 += r,
            None => out.push((to, r)),
        }
    };
    for k in 1..n1 {
        if bit(state, k) != bit(state, k + 1) {
            add(flip_bit(flip_bit(state, k), k + 1), 1.0);
        }
    }
    let last = bit(state, n1) as f64;
    add(
        flip_bit(state, n1),
        spec.beta * (1.0 - last) + (1.0 - spec.beta) * last,
    );
    match &spec.left {
        LeftBoundary::Structured(b) => {
            for j in 1..=b.p() {
                let e = bit(state, j) as f64;
                let mut r = b.r[j - 1] * (b.alpha[j - 1] * (1.0 - e) + (1.0 - b.alpha[j - 1]) * e);
                for k in 1..=b.p() {
                    let same = bit(state, j) == bit(state, k);
                    if !same {
                        r += b.copy[j - 1][k - 1];
                    }
                    if same && j != k {
                        r += b.anticopy[j - 1][k - 1];
                    }
                }
                add(flip_bit(state, j), r);
            }
        }
        LeftBoundary::Table(t) => {
            let block = state & ((1 << t.p()) - 1);
            add(flip_bit(state, 1), t.rate_of_state(block));
        }
    }
    out
}

/// Dense generator `N^2 Q` over all `2^{N-1}` states.
pub fn naive_generator(spec: &ModelSpec) -> DMatrix<f64> {
    let states = 1usize << spec.sites();
    let clock = (spec.n() * spec.n()) as f64;
    let mut q = DMatrix::zeros(states, states);
    for s in 0..states {
        for (to, r) in naive_rates(spec, s) {
            q[(s, to)] += clock * r;
            q[(s, s)] -= clock * r;
        }
    }
    q
}

pub fn product_law(spec: &ModelSpec, profile: &InitialProfile) -> DVector<f64> {
    let n1 = spec.sites();
    let n = spec.n() as f64;
    DVector::from_fn(1 << n1, |s, _| {
        (1..=n1)
            .map(|k| {
                let m = profile.eval(k as f64 / n);
                if bit(s, k) == 1 {
                    m
                } else {
                    1.0 - m
                }
            })
            .product()
    })
}

/// Law at time `t` by the dense exponential of the naive generator.
pub fn naive_law(spec: &ModelSpec, profile: &InitialProfile, t: f64) -> DVector<f64> {
    let q = naive_generator(spec);
    let p0 = product_law(spec, profile);
    (q.transpose() * t).exp() * p0
}

pub fn density_of(law: &DVector<f64>, k: usize) -> f64 {
    law.iter()
        .enumerate()
        .filter(|(s, _)| bit(*s, k) == 1)
        .map(|(_, w)| w)
        .sum()
}

pub fn pair_of(law: &DVector<f64>, k: usize, l: usize) -> f64 {
    law.iter()
        .enumerate()
        .filter(|(s, _)| bit(*s, k) == 1 && bit(*s, l) == 1)
        .map(|(_, w)| w)
        .sum()
}

pub fn phi_of(law: &DVector<f64>, k: usize, l: usize) -> f64 {
    pair_of(law, k, l) - density_of(law, k) * density_of(law, l)
}
