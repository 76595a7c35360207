//! Exact forward evolution of the full law on `{0,1}^{N-1}` for small `N`.
//!
//! A configuration is stored as the integer with site 1 as least
//! significant bit.

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Error, Result};
use crate::linalg::Csr;
use crate::model::{transitions, Configuration, ModelSpec};
use crate::profile::InitialProfile;

/// Largest lattice (in sites) the oracle accepts.
pub const MAX_SITES: usize = 16;
/// Largest lattice for which the dense matrix exponential is allowed.
pub const MAX_DENSE_SITES: usize = 10;
/// `Auto` switches from the matrix exponential to adaptive stepping above this.
pub const AUTO_DENSE_SITES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    Auto,
    DenseExpm,
    /// Dormand-Prince 5(4) with the given relative tolerance.
    Adaptive {
        rtol: f64,
    },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Auto
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullDistribution {
    pub sites: usize,
    pub time: f64,
    pub weights: Vec<f64>,
}

impl FullDistribution {
    pub fn point_mass(cfg: &Configuration) -> Self {
        let sites = cfg.sites();
        let mut weights = vec![0.0; 1 << sites];
        weights[cfg.index()] = 1.0;
        Self {
            sites,
            time: 0.0,
            weights,
        }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Density and pair correlations of a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub rho: Vec<f64>,
    second: DMatrix<f64>,
}

impl Moments {
    pub fn sites(&self) -> usize {
        self.rho.len()
    }

    /// `E[eta_k]`, `k` 1-based.
    pub fn density(&self, k: usize) -> f64 {
        self.rho[k - 1]
    }

    /// `E[eta_k eta_l]` for `k != l`.
    pub fn second(&self, k: usize, l: usize) -> f64 {
        self.second[(k - 1, l - 1)]
    }

    /// `E[(eta_k - rho_k)(eta_l - rho_l)]`, symmetric in `k, l`.
    pub fn phi(&self, k: usize, l: usize) -> f64 {
        self.second(k, l) - self.density(k) * self.density(l)
    }
}

fn check_size(spec: &ModelSpec) -> Result<usize> {
    let sites = spec.sites();
    if sites > MAX_SITES {
        return Err(Error::SizeLimit(format!(
            "master equation needs N-1 <= {MAX_SITES}, got {sites}"
        )));
    }
    Ok(sites)
}

/// The microscopic generator `Q` (row = from-state), unscaled.
pub fn generator(spec: &ModelSpec) -> Result<Csr> {
    let sites = check_size(spec)?;
    let n = 1usize << sites;
    let mut triplets = Vec::with_capacity(n * (sites + spec.p() + 1));
    for s in 0..n {
        let cfg = Configuration::from_index(s, sites);
        let mut out = 0.0;
        for (mv, rate) in transitions(&cfg, spec)? {
            triplets.push((s, mv.apply_to(&cfg).index(), rate));
            out += rate;
        }
        triplets.push((s, s, -out));
    }
    Ok(Csr::from_triplets(n, n, triplets))
}

/// The product measure `nu_N` with marginals `rho_0(k/N)`.
pub fn initial_distribution(
    spec: &ModelSpec,
    profile: &InitialProfile,
) -> Result<FullDistribution> {
    let sites = check_size(spec)?;
    let n = spec.n() as f64;
    let marg: Vec<f64> = (1..=sites)
        .map(|k| profile.eval(k as f64 / n).clamp(0.0, 1.0))
        .collect();
    let weights = (0..1usize << sites)
        .map(|s| {
            marg.iter()
                .enumerate()
                .map(|(i, &m)| if (s >> i) & 1 == 1 { m } else { 1.0 - m })
                .product()
        })
        .collect();
    Ok(FullDistribution {
        sites,
        time: 0.0,
        weights,
    })
}

/// Laws at each macroscopic time of `t_grid`, evolving `dP/dt = N^2 P Q`.
pub fn evolve_exact(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t_grid: &[f64],
) -> Result<Vec<FullDistribution>> {
    evolve_with(spec, profile, t_grid, Integrator::Auto)
}

pub fn evolve_with(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t_grid: &[f64],
    method: Integrator,
) -> Result<Vec<FullDistribution>> {
    let start = initial_distribution(spec, profile)?;
    evolve_from(spec, start, t_grid, method)
}

/// Evolves an arbitrary starting law (taken at time `start.time`).
pub fn evolve_from(
    spec: &ModelSpec,
    start: FullDistribution,
    t_grid: &[f64],
    method: Integrator,
) -> Result<Vec<FullDistribution>> {
    contract!(
        t_grid.windows(2).all(|w| w[0] <= w[1]),
        "time grid must be ascending"
    );
    contract!(
        t_grid.first().is_none_or(|&t| t >= start.time),
        "time grid starts before the initial law"
    );
    let sites = check_size(spec)?;
    contract!(
        start.sites == sites,
        "initial law has the wrong number of sites"
    );
    let q = generator(spec)?;
    let clock = spec.lattice.clock();
    let method = match method {
        Integrator::Auto if sites <= AUTO_DENSE_SITES => Integrator::DenseExpm,
        Integrator::Auto => Integrator::Adaptive { rtol: 1e-12 },
        m => m,
    };
    let mut out = Vec::with_capacity(t_grid.len());
    let mut p = start.weights;
    let mut t = start.time;
    match method {
        Integrator::DenseExpm => {
            if sites > MAX_DENSE_SITES {
                return Err(Error::SizeLimit(format!(
                    "dense exponential needs N-1 <= {MAX_DENSE_SITES}, got {sites}"
                )));
            }
            let qt = q.transpose().to_dense() * clock;
            let mut cache: Vec<(f64, DMatrix<f64>)> = Vec::new();
            for &target in t_grid {
                let dt = target - t;
                if dt > 0.0 {
                    let idx = match cache.iter().position(|(h, _)| *h == dt) {
                        Some(i) => i,
                        None => {
                            cache.push((dt, (&qt * dt).exp()));
                            cache.len() - 1
                        }
                    };
                    let v = &cache[idx].1 * DVector::from_vec(p);
                    p = v.iter().copied().collect();
                }
                t = target;
                out.push(FullDistribution {
                    sites,
                    time: t,
                    weights: p.clone(),
                });
            }
        }
        Integrator::Adaptive { rtol } => {
            let qt = q.transpose();
            let mut h = 0.0;
            for &target in t_grid {
                if target > t {
                    h = dormand_prince(&qt, clock, &mut p, target - t, rtol, h)?;
                }
                t = target;
                out.push(FullDistribution {
                    sites,
                    time: t,
                    weights: p.clone(),
                });
            }
        }
        Integrator::Auto => unreachable!(),
    }
    Ok(out)
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = scale * M y` over `span`; returns the last accepted step.
fn dormand_prince(
    m: &Csr,
    scale: f64,
    y: &mut Vec<f64>,
    span: f64,
    rtol: f64,
    h0: f64,
) -> Result<f64> {
    let n = y.len();
    let atol = rtol * 1e-3;
    let rho = m.gershgorin() * scale;
    let mut h = if h0 > 0.0 {
        h0
    } else {
        (1.0 / rho.max(1e-300)).min(span)
    };
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut t = 0.0;
    let mut last = h;
    m.mul_vec(y, &mut k[0]);
    k[0].iter_mut().for_each(|v| *v *= scale);
    let mut steps = 0usize;
    while t < span {
        let step = h.min(span - t);
        for s in 1..7 {
            let (done, rest) = k.split_at_mut(s);
            stage.copy_from_slice(y);
            for (r, kr) in done.iter().enumerate() {
                let a = A[s][r];
                if a != 0.0 {
                    for (st, kv) in stage.iter_mut().zip(kr) {
                        *st += step * a * kv;
                    }
                }
            }
            m.mul_vec(&stage, &mut rest[0]);
            rest[0].iter_mut().for_each(|v| *v *= scale);
        }
        // the 7th stage is evaluated at the 5th-order solution (FSAL)
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut acc5 = 0.0;
            let mut acc4 = 0.0;
            for s in 0..7 {
                acc5 += B5[s] * k[s][i];
                acc4 += B4[s] * k[s][i];
            }
            y5[i] = y[i] + step * acc5;
            let e = step * (acc5 - acc4);
            let tol = atol + rtol * y[i].abs().max(y5[i].abs());
            err = err.max(e.abs() / tol);
        }
        if err <= 1.0 {
            t += step;
            std::mem::swap(y, &mut y5);
            k.swap(0, 6);
            last = step;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = step * factor;
        steps += 1;
        if steps > 50_000_000 {
            return Err(Error::Numerical(
                "adaptive integrator exceeded step budget".into(),
            ));
        }
    }
    Ok(last)
}

/// Density vector and pair correlations of `dist`.
pub fn exact_moments(dist: &FullDistribution) -> Moments {
    let n = dist.sites;
    let mut rho = vec![0.0; n];
    let mut second = DMatrix::zeros(n, n);
    for (s, &w) in dist.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let occupied: Vec<usize> = (0..n).filter(|i| (s >> i) & 1 == 1).collect();
        for (a, &i) in occupied.iter().enumerate() {
            rho[i] += w;
            for &j in &occupied[a + 1..] {
                second[(i, j)] += w;
            }
        }
    }
    for i in 0..n {
        second[(i, i)] = rho[i];
        for j in 0..i {
            second[(i, j)] = second[(j, i)];
        }
    }
    Moments { rho, second }
}
