//! Dual random walks: the absorbed walk on the lattice plus cemeteries that
//! represents the density, walks on `Z` for hitting windows, and the
//! diagonally reflected / symmetrized walks on `Z^2`.

mod walk1d;
mod walk2d;

pub use walk1d::{
    hitting_times, hitting_window_prob, reflection_window_prob, single_barrier_window_prob,
    window_fraction,
};
pub use walk2d::{
    diagonal_occupation, lower_cutoff, mirror, region_classify, sample_hitting_time, walk2d_step,
    Point, Region2D, Walk2dMode, DEFAULT_EPS,
};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{contract, Error, Result};
use crate::model::{LeftBoundary, ModelSpec, StructuredBoundary};
use crate::profile::InitialProfile;
use crate::stats::Estimate;

/// A state of the dual lattice: a site of `{1..N-1}` or a cemetery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DualSite {
    Site(usize),
    /// Cemetery attached to the reservoir of block site `j`.
    Reservoir(usize),
    /// The right reservoir, position `N`.
    Right,
}

impl DualSite {
    pub fn is_cemetery(&self) -> bool {
        !matches!(self, DualSite::Site(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualityMethod {
    MonteCarlo { walks: usize, seed: u64 },
    LinearSolve,
}

/// Largest `N` accepted by the dense transient solve.
pub const MAX_LINEAR_SOLVE_N: usize = 256;

fn dual_boundary(spec: &ModelSpec) -> Result<&StructuredBoundary> {
    match &spec.left {
        LeftBoundary::Structured(b) if b.has_anticopy() => Err(Error::Unsupported(
            "anticopy dynamics need a signed dual, which is not implemented".into(),
        )),
        LeftBoundary::Structured(b) => Ok(b),
        LeftBoundary::Table(_) => Err(Error::Unsupported(
            "rate-table boundaries have no walk dual".into(),
        )),
    }
}

fn check_state(spec: &ModelSpec, j: DualSite) -> Result<()> {
    match j {
        DualSite::Site(k) => spec.lattice.check_site(k),
        DualSite::Reservoir(r) => {
            contract!(
                (1..=spec.p()).contains(&r),
                "no reservoir cemetery for site {r}"
            );
            Ok(())
        }
        DualSite::Right => Ok(()),
    }
}

fn push_merged(out: &mut Vec<(DualSite, f64)>, to: DualSite, rate: f64) {
    if rate <= 0.0 {
        return;
    }
    match out.iter_mut().find(|(t, _)| *t == to) {
        Some(e) => e.1 += rate,
        None => out.push((to, rate)),
    }
}

/// Microscopic jump rates of the dual walk out of `j`; cemeteries absorb.
pub fn dual_rates(j: DualSite, spec: &ModelSpec) -> Result<Vec<(DualSite, f64)>> {
    let b = dual_boundary(spec)?;
    check_state(spec, j)?;
    let mut out = Vec::new();
    let DualSite::Site(k) = j else {
        return Ok(out);
    };
    let n1 = spec.sites();
    if k > 1 {
        push_merged(&mut out, DualSite::Site(k - 1), 1.0);
    }
    if k < n1 {
        push_merged(&mut out, DualSite::Site(k + 1), 1.0);
    } else {
        push_merged(&mut out, DualSite::Right, 1.0);
    }
    if k <= spec.p() {
        push_merged(&mut out, DualSite::Reservoir(k), b.r[k - 1]);
        for (i, &c) in b.copy[k - 1].iter().enumerate() {
            push_merged(&mut out, DualSite::Site(i + 1), c);
        }
    }
    Ok(out)
}

/// As [`dual_rates`], with every cemetery sending the walk back to `p+1` at rate 1.
pub fn augmented_dual_rates(j: DualSite, spec: &ModelSpec) -> Result<Vec<(DualSite, f64)>> {
    if j.is_cemetery() {
        dual_boundary(spec)?;
        check_state(spec, j)?;
        return Ok(vec![(DualSite::Site(spec.p() + 1), 1.0)]);
    }
    dual_rates(j, spec)
}

struct DualIndex {
    n1: usize,
    p: usize,
}

impl DualIndex {
    fn len(&self) -> usize {
        self.n1 + self.p + 1
    }

    fn of(&self, s: DualSite) -> usize {
        match s {
            DualSite::Site(k) => k - 1,
            DualSite::Reservoir(j) => self.n1 + j - 1,
            DualSite::Right => self.n1 + self.p,
        }
    }

    fn site(&self, i: usize) -> DualSite {
        if i < self.n1 {
            DualSite::Site(i + 1)
        } else if i < self.n1 + self.p {
            DualSite::Reservoir(i - self.n1 + 1)
        } else {
            DualSite::Right
        }
    }
}

/// `b_N(0, .)`: the initial profile on sites, frozen reservoir values at cemeteries.
fn boundary_values(
    spec: &ModelSpec,
    b: &StructuredBoundary,
    profile: &InitialProfile,
    idx: &DualIndex,
) -> Vec<f64> {
    let n = spec.n() as f64;
    (0..idx.len())
        .map(|i| match idx.site(i) {
            DualSite::Site(k) => profile.eval(k as f64 / n).clamp(0.0, 1.0),
            DualSite::Reservoir(j) => b.alpha[j - 1],
            DualSite::Right => spec.beta,
        })
        .collect()
}

/// `rho_N(t, j)` through the dual walk, for every `t` in `t_grid`.
pub fn duality_density_grid(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t_grid: &[f64],
    j: DualSite,
    method: DualityMethod,
) -> Result<Vec<Estimate>> {
    let b = dual_boundary(spec)?;
    check_state(spec, j)?;
    contract!(
        t_grid.iter().all(|&t| t >= 0.0),
        "times must be non-negative"
    );
    contract!(
        t_grid.windows(2).all(|w| w[0] <= w[1]),
        "time grid must be ascending"
    );
    let idx = DualIndex {
        n1: spec.sites(),
        p: spec.p(),
    };
    let values = boundary_values(spec, b, profile, &idx);
    if j.is_cemetery() {
        return Ok(vec![Estimate::exact(values[idx.of(j)]); t_grid.len()]);
    }
    match method {
        DualityMethod::LinearSolve => {
            if spec.n() > MAX_LINEAR_SOLVE_N {
                return Err(Error::SizeLimit(format!(
                    "dense dual solve needs N <= {MAX_LINEAR_SOLVE_N}"
                )));
            }
            let m = idx.len();
            let mut q = DMatrix::zeros(m, m);
            for i in 0..m {
                for (to, rate) in dual_rates(idx.site(i), spec)? {
                    q[(i, idx.of(to))] += rate;
                    q[(i, i)] -= rate;
                }
            }
            q *= spec.lattice.clock();
            let v = DVector::from_vec(values);
            let row = idx.of(j);
            Ok(t_grid
                .iter()
                .map(|&t| Estimate::exact(((&q * t).exp() * &v)[row]))
                .collect())
        }
        DualityMethod::MonteCarlo { walks, seed } => {
            contract!(walks >= 2, "need at least two walks");
            let tables = jump_tables(spec, &idx)?;
            let clock = spec.lattice.clock();
            let t_max = t_grid.last().copied().unwrap_or(0.0);
            let start = idx.of(j);
            let per_walk: Vec<Vec<f64>> = (0..walks as u64)
                .into_par_iter()
                .map(|w| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(w);
                    let mut out = Vec::with_capacity(t_grid.len());
                    let mut pos = start;
                    let mut time = 0.0;
                    let mut next = 0;
                    loop {
                        let (total, ref targets) = tables[pos];
                        let hold = if total > 0.0 {
                            rng.sample::<f64, _>(Exp1) / (total * clock)
                        } else {
                            f64::INFINITY
                        };
                        let leave = time + hold;
                        while next < t_grid.len() && t_grid[next] < leave {
                            out.push(values[pos]);
                            next += 1;
                        }
                        if next == t_grid.len() || leave > t_max {
                            while out.len() < t_grid.len() {
                                out.push(values[pos]);
                            }
                            break;
                        }
                        time = leave;
                        let mut u = rng.random::<f64>() * total;
                        let mut to = targets.last().expect("non-empty jump table").0;
                        for &(t, r) in targets {
                            if u < r {
                                to = t;
                                break;
                            }
                            u -= r;
                        }
                        pos = to;
                    }
                    out
                })
                .collect();
            Ok((0..t_grid.len())
                .map(|ti| {
                    let xs: Vec<f64> = per_walk.iter().map(|w| w[ti]).collect();
                    Estimate::from_samples(&xs)
                })
                .collect())
        }
    }
}

type JumpTable = (f64, Vec<(usize, f64)>);

fn jump_tables(spec: &ModelSpec, idx: &DualIndex) -> Result<Vec<JumpTable>> {
    (0..idx.len())
        .map(|i| {
            let rates = dual_rates(idx.site(i), spec)?;
            let total = rates.iter().map(|r| r.1).sum();
            Ok((
                total,
                rates.into_iter().map(|(t, r)| (idx.of(t), r)).collect(),
            ))
        })
        .collect()
}

/// `rho_N(t, j) = E_j[ b_N(t - H_t, X(H_t)) ]`.
pub fn duality_density(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t: f64,
    j: DualSite,
    method: DualityMethod,
) -> Result<Estimate> {
    Ok(duality_density_grid(spec, profile, &[t], j, method)?[0])
}

/// Monte Carlo estimate of `P_p[ walk hits a cemetery before site p+1 ]`.
pub fn estimate_pi(spec: &ModelSpec, walks: usize, seed: u64) -> Result<Estimate> {
    dual_boundary(spec)?;
    contract!(walks >= 1, "need at least one walk");
    let idx = DualIndex {
        n1: spec.sites(),
        p: spec.p(),
    };
    let tables = jump_tables(spec, &idx)?;
    let start = idx.of(DualSite::Site(spec.p()));
    let stop = idx.of(DualSite::Site(spec.p() + 1));
    let hits: u64 = (0..walks as u64)
        .into_par_iter()
        .map(|w| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(w);
            let mut pos = start;
            loop {
                if pos == stop {
                    return 0;
                }
                if pos >= idx.n1 {
                    return 1;
                }
                let (total, ref targets) = tables[pos];
                let mut u = rng.random::<f64>() * total;
                let mut to = targets.last().expect("non-empty jump table").0;
                for &(t, r) in targets {
                    if u < r {
                        to = t;
                        break;
                    }
                    u -= r;
                }
                pos = to;
            }
        })
        .sum();
    Ok(Estimate::proportion(hits, walks as u64))
}
