//! Walks on `Z^2` reflected at, or symmetrized across, the line `l = k + 1`,
//! and the region geometry of the correlation system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{contract, Result};
use crate::model::LatticeSpec;
use crate::stats::Estimate;

pub type Point = (i64, i64);

/// Default trimming exponent for the truncated diagonal.
pub const DEFAULT_EPS: f64 = 1.0 / 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Walk2dMode {
    /// Off the diagonal line the four neighbours at rate 1; on it
    /// `(k-1, l)` and `(k, l+1)` at rate 1.
    Reflected,
    /// Off the line as above; on it the four neighbours at rate 1/2.
    Symmetrized,
}

fn on_diagonal(p: Point) -> bool {
    p.1 == p.0 + 1
}

/// Unscaled jump rates out of `pos`.
pub fn walk2d_step(pos: Point, mode: Walk2dMode) -> Vec<(Point, f64)> {
    let (k, l) = pos;
    let four = [(k - 1, l), (k + 1, l), (k, l - 1), (k, l + 1)];
    if !on_diagonal(pos) {
        return four.iter().map(|&q| (q, 1.0)).collect();
    }
    match mode {
        Walk2dMode::Reflected => vec![((k - 1, l), 1.0), ((k, l + 1), 1.0)],
        Walk2dMode::Symmetrized => four.iter().map(|&q| (q, 0.5)).collect(),
    }
}

/// Reflection across the diagonal line: `(k, l) -> (l - 1, k + 1)`.
pub fn mirror(pos: Point) -> Point {
    (pos.1 - 1, pos.0 + 1)
}

/// Uniform pick among the (equal-rate) moves out of `pos`.
fn jump<R: Rng>(pos: Point, mode: Walk2dMode, rng: &mut R) -> Point {
    let (k, l) = pos;
    if on_diagonal(pos) && mode == Walk2dMode::Reflected {
        return if rng.random::<bool>() {
            (k - 1, l)
        } else {
            (k, l + 1)
        };
    }
    match rng.random_range(0..4u8) {
        0 => (k - 1, l),
        1 => (k + 1, l),
        2 => (k, l - 1),
        _ => (k, l + 1),
    }
}

fn out_rate(pos: Point) -> f64 {
    if on_diagonal(pos) {
        2.0
    } else {
        4.0
    }
}

/// Hitting time (unscaled clock) of `target` from `start`, up to `max_steps`
/// jumps; `INFINITY` if not reached.
pub fn sample_hitting_time<R: Rng>(
    start: Point,
    mode: Walk2dMode,
    target: impl Fn(Point) -> bool,
    max_steps: u64,
    rng: &mut R,
) -> f64 {
    let mut pos = start;
    let mut t = 0.0;
    for _ in 0..max_steps {
        if target(pos) {
            return t;
        }
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / out_rate(pos);
        pos = jump(pos, mode, rng);
    }
    if target(pos) {
        t
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region2D {
    Bulk,
    Diagonal,
    TruncatedDiagonal,
    Vertical,
    LowerHorizontal,
    UpperHorizontal,
    Outside,
}

/// Integer cutoff `floor(N^{3/4})`.
pub fn lower_cutoff(n: usize) -> i64 {
    let m = (n as f64).powf(0.75).floor() as i64;
    // guard against pow rounding just below an exact integer
    if ((m + 1) as f64).powi(4) <= (n as f64).powi(3) {
        m + 1
    } else {
        m
    }
}

/// Region tag of `pos` for the lattice `(N, p)`; `eps` sets the truncated
/// diagonal `k <= N^{1-eps/4}` or `k >= N - N^{1-eps/4}`.
pub fn region_classify(pos: Point, lattice: LatticeSpec, eps: f64) -> Region2D {
    let (k, l) = pos;
    let n = lattice.n() as i64;
    let p1 = lattice.p() as i64 + 1;
    let m = lower_cutoff(lattice.n());
    if l == n && p1 <= k && k <= n - 2 {
        return Region2D::UpperHorizontal;
    }
    if l == k + 1 && m <= k && k <= n - 2 {
        let x = (n as f64).powf(1.0 - eps / 4.0);
        if (k as f64) <= x || (k as f64) >= n as f64 - x {
            return Region2D::TruncatedDiagonal;
        }
        return Region2D::Diagonal;
    }
    if k == p1 && m < l && l < n {
        return Region2D::Vertical;
    }
    if l == m && p1 <= k && k < m {
        return Region2D::LowerHorizontal;
    }
    if p1 < k && k < l - 1 && m < l && l < n {
        return Region2D::Bulk;
    }
    Region2D::Outside
}

fn max_norm(p: Point) -> i64 {
    p.0.abs().max(p.1.abs())
}

fn in_diagonal_region(pos: Point, n: i64, m: i64) -> bool {
    on_diagonal(pos) && m <= pos.0 && pos.0 <= n - 2
}

/// `E[ int_0^{H(dE_2N)} 1{X(s) in D_N} ds ]` for the symmetrized walk on the
/// `N^2` clock, with `E_2N = { max(|k|,|l|) < 2N }`.
///
/// Each visit to `D_N` contributes its mean holding time `1/(2N^2)`.
pub fn diagonal_occupation(start: Point, n: usize, walks: usize, seed: u64) -> Result<Estimate> {
    contract!(walks >= 2, "need at least two walks");
    let edge = 2 * n as i64;
    contract!(
        max_norm(start) <= edge,
        "start outside the closed box of size 2N"
    );
    if max_norm(start) == edge {
        return Ok(Estimate::exact(0.0));
    }
    let m = lower_cutoff(n);
    let ni = n as i64;
    let hold = 1.0 / (2.0 * (n as f64).powi(2));
    let samples: Vec<f64> = (0..walks as u64)
        .into_par_iter()
        .map(|w| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(w);
            let mut pos = start;
            let mut visits = 0u64;
            while max_norm(pos) < edge {
                if in_diagonal_region(pos, ni, m) {
                    visits += 1;
                }
                pos = jump(pos, Walk2dMode::Symmetrized, &mut rng);
            }
            visits as f64 * hold
        })
        .collect();
    Ok(Estimate::from_samples(&samples))
}
