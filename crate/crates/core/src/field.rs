//! Closed first- and second-moment systems and their time integration.
//!
//! The generator maps every monomial of degree at most two to a polynomial
//! of degree at most two for structured boundaries, so the vector
//! `(E eta_k ; E eta_k eta_l)` obeys a linear affine ODE. The coefficients are
//! not hand-derived: each row is obtained by evaluating `L f` on every local
//! assignment of the sites `f` can see and Mobius-inverting the result.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Error, Result};
use crate::linalg::{BandedLu, Csr};
use crate::model::{transitions_touching, Configuration, LatticeSpec, LeftBoundary, ModelSpec};
use crate::profile::InitialProfile;

/// Largest `N` for which the correlation solver runs unless overridden.
pub const DEFAULT_MAX_CORRELATION_N: usize = 256;
/// Largest `N` for the dense exponential density cross-check.
pub const MAX_EXPM_N: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target time step (macroscopic units); steps are shortened to land on the grid.
    pub dt: f64,
    /// Richardson extrapolation from steps `dt` and `dt/2`.
    pub extrapolate: bool,
    pub max_correlation_n: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dt: 1e-5,
            extrapolate: true,
            max_correlation_n: DEFAULT_MAX_CORRELATION_N,
        }
    }
}

impl SolverOptions {
    pub fn coarse(dt: f64) -> Self {
        Self {
            dt,
            extrapolate: false,
            ..Self::default()
        }
    }
}

/// Index of `E[eta_k eta_l]`, `1 <= k < l`, among the second moments.
pub fn pair_index(k: usize, l: usize) -> usize {
    debug_assert!(k < l);
    (l - 1) * (l - 2) / 2 + (k - 1)
}

fn pair_count(sites: usize) -> usize {
    sites * (sites - 1) / 2
}

/// `d/dt y = A11 y + b1`, `d/dt z = A21 y + A22 z + b2` with `y` the first and
/// `z` the second moments; all coefficients include the `N^2` clock.
#[derive(Debug, Clone)]
pub struct MomentSystem {
    lattice: LatticeSpec,
    pub a11: Csr,
    pub b1: Vec<f64>,
    pub second: Option<SecondBlock>,
}

#[derive(Debug, Clone)]
pub struct SecondBlock {
    pub a21: Csr,
    pub a22: Csr,
    pub b2: Vec<f64>,
}

impl MomentSystem {
    pub fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    pub fn first_len(&self) -> usize {
        self.lattice.sites()
    }

    pub fn second_len(&self) -> usize {
        pair_count(self.lattice.sites())
    }

    /// Right-hand side of the system at `(y, z)`.
    pub fn apply(&self, y: &[f64], z: Option<&[f64]>) -> (Vec<f64>, Option<Vec<f64>>) {
        let mut dy = self.b1.clone();
        self.a11.mul_vec_add(1.0, y, &mut dy);
        let dz = match (&self.second, z) {
            (Some(s), Some(z)) => {
                let mut dz = s.b2.clone();
                s.a21.mul_vec_add(1.0, y, &mut dz);
                s.a22.mul_vec_add(1.0, z, &mut dz);
                Some(dz)
            }
            _ => None,
        };
        (dy, dz)
    }
}

/// Coefficients of `L f` for a monomial `f = prod_{i in support} eta_i`,
/// as `(monomial, coefficient)` pairs with monomials of degree <= 2.
fn monomial_image(
    spec: &ModelSpec,
    scratch: &mut Configuration,
    support: &[usize],
) -> Result<Vec<(Vec<usize>, f64)>> {
    let sites = spec.sites();
    let p = spec.p();
    let mut vars: Vec<usize> = Vec::with_capacity(6 + p);
    for &s in support {
        vars.extend(
            [s.saturating_sub(1), s, s + 1]
                .into_iter()
                .filter(|&v| v >= 1 && v <= sites),
        );
    }
    if support.iter().any(|&s| s <= p) {
        vars.extend(1..=p);
    }
    vars.sort_unstable();
    vars.dedup();
    let nv = vars.len();
    let f = |c: &Configuration| support.iter().all(|&s| c.get(s) == 1) as u8 as f64;
    let mut g = vec![0.0; 1 << nv];
    for (mask, gm) in g.iter_mut().enumerate() {
        for (i, &v) in vars.iter().enumerate() {
            scratch.set(v, ((mask >> i) & 1) as u8);
        }
        let before = f(scratch);
        let mut acc = 0.0;
        for (mv, rate) in transitions_touching(scratch, spec, support)? {
            scratch.apply(mv);
            acc += rate * (f(scratch) - before);
            scratch.apply(mv);
        }
        *gm = acc;
    }
    for &v in &vars {
        scratch.set(v, 0);
    }
    for i in 0..nv {
        let bit = 1 << i;
        for mask in 0..1usize << nv {
            if mask & bit != 0 {
                g[mask] -= g[mask ^ bit];
            }
        }
    }
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut out = Vec::new();
    for (mask, &c) in g.iter().enumerate() {
        if c.abs() <= 1e-13 * scale {
            continue;
        }
        let mono: Vec<usize> = (0..nv)
            .filter(|i| (mask >> i) & 1 == 1)
            .map(|i| vars[i])
            .collect();
        if mono.len() > 2 {
            return Err(Error::NotClosed(format!(
                "L applied to {support:?} has a term of degree {} on sites {mono:?}",
                mono.len()
            )));
        }
        out.push((mono, c));
    }
    Ok(out)
}

fn require_structured(spec: &ModelSpec) -> Result<()> {
    if let LeftBoundary::Table(_) = spec.left {
        return Err(Error::Unsupported(
            "rate-table boundaries have no closed moment system".into(),
        ));
    }
    Ok(())
}

/// First-moment system only.
pub fn build_density_system(spec: &ModelSpec) -> Result<MomentSystem> {
    build(spec, false)
}

/// First- and second-moment system.
pub fn build_moment_system(spec: &ModelSpec) -> Result<MomentSystem> {
    build(spec, true)
}

fn build(spec: &ModelSpec, with_second: bool) -> Result<MomentSystem> {
    require_structured(spec)?;
    let sites = spec.sites();
    let clock = spec.lattice.clock();
    let mut scratch = Configuration::empty(sites);
    let mut t11 = Vec::new();
    let mut b1 = vec![0.0; sites];
    for k in 1..=sites {
        for (mono, c) in monomial_image(spec, &mut scratch, &[k])? {
            match mono.as_slice() {
                [] => b1[k - 1] += clock * c,
                [i] => t11.push((k - 1, i - 1, clock * c)),
                _ => {
                    return Err(Error::NotClosed(format!(
                        "density row {k} depends on pair moments"
                    )))
                }
            }
        }
    }
    let a11 = Csr::from_triplets(sites, sites, t11);
    let second = if with_second {
        let n2 = pair_count(sites);
        let mut t21 = Vec::new();
        let mut t22 = Vec::new();
        let mut b2 = vec![0.0; n2];
        for l in 2..=sites {
            for k in 1..l {
                let row = pair_index(k, l);
                for (mono, c) in monomial_image(spec, &mut scratch, &[k, l])? {
                    match mono.as_slice() {
                        [] => b2[row] += clock * c,
                        [i] => t21.push((row, i - 1, clock * c)),
                        [i, j] => t22.push((row, pair_index(*i, *j), clock * c)),
                        _ => unreachable!(),
                    }
                }
            }
        }
        Some(SecondBlock {
            a21: Csr::from_triplets(n2, sites, t21),
            a22: Csr::from_triplets(n2, n2, t22),
            b2,
        })
    } else {
        None
    };
    Ok(MomentSystem {
        lattice: spec.lattice,
        a11,
        b1,
        second,
    })
}

/// `rho_N(t, k)` on `{1..N-1}` plus the frozen cemetery values.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub lattice: LatticeSpec,
    pub times: Vec<f64>,
    /// `rho[i][k-1]` at `times[i]`.
    pub rho: Vec<Vec<f64>>,
    /// Reservoir densities `alpha_j` of the block sites.
    pub reservoirs: Vec<f64>,
    pub beta: f64,
}

impl DensityField {
    /// Value at lattice site `k in 1..=N`; `k = N` is the right reservoir.
    pub fn at(&self, ti: usize, k: usize) -> f64 {
        if k == self.lattice.n() {
            self.beta
        } else {
            self.rho[ti][k - 1]
        }
    }

    /// Frozen value at the cemetery of block site `j`.
    pub fn cemetery(&self, j: usize) -> f64 {
        self.reservoirs[j - 1]
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "k", "rho"]).map_err(csv_err)?;
        for (ti, &t) in self.times.iter().enumerate() {
            for (i, &r) in self.rho[ti].iter().enumerate() {
                out.serialize((t, i + 1, r)).map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// `phi_N(t, k, l)` for `1 <= k < l <= N`, zero on `l = N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationField {
    pub lattice: LatticeSpec,
    pub times: Vec<f64>,
    pub density: DensityField,
    /// `phi[i][pair_index(k, l)]`.
    pub phi: Vec<Vec<f64>>,
    /// Largest deviation seen between the integrated right-hand side and the
    /// literal Laplacian / diagonal-gradient stencils with source `-m`.
    pub stencil_defect: f64,
}

impl CorrelationField {
    /// Symmetric lookup; any argument equal to `N` gives zero.
    pub fn phi(&self, ti: usize, k: usize, l: usize) -> f64 {
        let n = self.lattice.n();
        if k == l {
            panic!("phi is defined off the diagonal only (k = l = {k})");
        }
        let (k, l) = if k < l { (k, l) } else { (l, k) };
        if l == n {
            0.0
        } else {
            self.phi[ti][pair_index(k, l)]
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "k", "l", "phi"]).map_err(csv_err)?;
        let n1 = self.lattice.sites();
        for (ti, &t) in self.times.iter().enumerate() {
            for l in 2..=n1 {
                for k in 1..l {
                    out.serialize((t, k, l, self.phi(ti, k, l)))
                        .map_err(csv_err)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn initial_density(spec: &ModelSpec, profile: &InitialProfile) -> Vec<f64> {
    let n = spec.n() as f64;
    (1..=spec.sites())
        .map(|k| profile.eval(k as f64 / n).clamp(0.0, 1.0))
        .collect()
}

fn initial_pairs(y: &[f64]) -> Vec<f64> {
    let n1 = y.len();
    let mut z = vec![0.0; pair_count(n1)];
    for l in 2..=n1 {
        for k in 1..l {
            z[pair_index(k, l)] = y[k - 1] * y[l - 1];
        }
    }
    z
}

fn reservoirs(spec: &ModelSpec) -> Vec<f64> {
    spec.left
        .structured()
        .map(|b| b.alpha.clone())
        .unwrap_or_default()
}

struct Factors {
    h: f64,
    first: BandedLu,
    second: Option<BandedLu>,
}

struct Integrator<'a> {
    sys: &'a MomentSystem,
    rho_a11: f64,
    rho_a22: f64,
    cache: Vec<Factors>,
}

impl<'a> Integrator<'a> {
    fn new(sys: &'a MomentSystem) -> Self {
        Self {
            sys,
            rho_a11: sys.a11.gershgorin(),
            rho_a22: sys.second.as_ref().map_or(0.0, |s| s.a22.gershgorin()),
            cache: Vec::new(),
        }
    }

    fn factors(&mut self, h: f64) -> Result<usize> {
        if let Some(i) = self.cache.iter().position(|f| f.h == h) {
            return Ok(i);
        }
        if self.cache.len() >= 3 {
            self.cache.remove(0);
        }
        let first = BandedLu::factor_shifted(&self.sys.a11, 1.0, -0.5 * h)?;
        let second = match &self.sys.second {
            Some(s) => Some(BandedLu::factor_shifted(&s.a22, 1.0, -0.5 * h)?),
            None => None,
        };
        self.cache.push(Factors { h, first, second });
        Ok(self.cache.len() - 1)
    }

    /// Backward Euler over `h/2`; shares the trapezoidal left-hand side.
    fn euler_half(&self, f: &Factors, y: &mut Vec<f64>, z: &mut Option<Vec<f64>>) {
        let h2 = 0.5 * f.h;
        let sys = self.sys;
        for (yi, bi) in y.iter_mut().zip(&sys.b1) {
            *yi += h2 * bi;
        }
        f.first.solve(y);
        if let (Some(s), Some(z), Some(lu)) = (&sys.second, z.as_mut(), &f.second) {
            for (zi, bi) in z.iter_mut().zip(&s.b2) {
                *zi += h2 * bi;
            }
            s.a21.mul_vec_add(h2, y, z);
            lu.solve(z);
        }
    }

    fn trapezoid(&self, f: &Factors, y: &mut Vec<f64>, z: &mut Option<Vec<f64>>) {
        let h = f.h;
        let sys = self.sys;
        let y_old = y.clone();
        for (yi, bi) in y.iter_mut().zip(&sys.b1) {
            *yi += h * bi;
        }
        sys.a11.mul_vec_add(0.5 * h, &y_old, y);
        f.first.solve(y);
        if let (Some(s), Some(z), Some(lu)) = (&sys.second, z.as_mut(), &f.second) {
            let z_old = z.clone();
            for (zi, bi) in z.iter_mut().zip(&s.b2) {
                *zi += h * bi;
            }
            s.a22.mul_vec_add(0.5 * h, &z_old, z);
            s.a21.mul_vec_add(0.5 * h, &y_old, z);
            s.a21.mul_vec_add(0.5 * h, y, z);
            lu.solve(z);
        }
    }

    fn run(
        &mut self,
        y0: &[f64],
        z0: Option<&[f64]>,
        grid: &[f64],
        dt: f64,
    ) -> Result<Vec<(Vec<f64>, Option<Vec<f64>>)>> {
        let mut y = y0.to_vec();
        let mut z = z0.map(|z| z.to_vec());
        let mut t = 0.0;
        let mut startup = 2usize;
        let mut out = Vec::with_capacity(grid.len());
        for &target in grid {
            let span = target - t;
            if span > 0.0 {
                let m = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
                let h = span / m as f64;
                let fi = self.factors(h)?;
                let stiff = h * self.rho_a11.max(self.rho_a22) > 1.0;
                let f = &self.cache[fi];
                for _ in 0..m {
                    if stiff && startup > 0 {
                        self.euler_half(f, &mut y, &mut z);
                        self.euler_half(f, &mut y, &mut z);
                        startup -= 1;
                    } else {
                        self.trapezoid(f, &mut y, &mut z);
                    }
                }
            }
            t = target;
            out.push((y.clone(), z.clone()));
        }
        Ok(out)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    contract!(!grid.is_empty(), "time grid is empty");
    contract!(grid[0] >= 0.0, "time grid must be non-negative");
    contract!(
        grid.windows(2).all(|w| w[0] <= w[1]),
        "time grid must be ascending"
    );
    Ok(())
}

fn integrate(
    sys: &MomentSystem,
    y0: &[f64],
    z0: Option<&[f64]>,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<(Vec<f64>, Option<Vec<f64>>)>> {
    contract!(opts.dt > 0.0, "time step must be positive");
    let mut integ = Integrator::new(sys);
    let coarse = integ.run(y0, z0, grid, opts.dt)?;
    if !opts.extrapolate {
        return Ok(coarse);
    }
    let fine = integ.run(y0, z0, grid, 0.5 * opts.dt)?;
    let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
    };
    Ok(coarse
        .iter()
        .zip(&fine)
        .map(|((yc, zc), (yf, zf))| {
            let z = match (zc, zf) {
                (Some(c), Some(f)) => Some(mix(c, f)),
                _ => None,
            };
            (mix(yc, yf), z)
        })
        .collect())
}

pub fn solve_density(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t_grid: &[f64],
) -> Result<DensityField> {
    solve_density_with(spec, profile, t_grid, &SolverOptions::default())
}

pub fn solve_density_with(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t_grid: &[f64],
    opts: &SolverOptions,
) -> Result<DensityField> {
    check_grid(t_grid)?;
    let sys = build_density_system(spec)?;
    let y0 = initial_density(spec, profile);
    let states = integrate(&sys, &y0, None, t_grid, opts)?;
    Ok(DensityField {
        lattice: spec.lattice,
        times: t_grid.to_vec(),
        rho: states.into_iter().map(|(y, _)| y).collect(),
        reservoirs: reservoirs(spec),
        beta: spec.beta,
    })
}

/// Density by the exponential of the affine generator (cross-check, `N <= 128`).
pub fn solve_density_expm(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t_grid: &[f64],
) -> Result<DensityField> {
    check_grid(t_grid)?;
    if spec.n() > MAX_EXPM_N {
        return Err(Error::SizeLimit(format!(
            "dense exponential needs N <= {MAX_EXPM_N}"
        )));
    }
    let sys = build_density_system(spec)?;
    let n1 = spec.sites();
    let mut aug = DMatrix::zeros(n1 + 1, n1 + 1);
    for i in 0..n1 {
        for (j, v) in sys.a11.row(i) {
            aug[(i, j)] = v;
        }
        aug[(i, n1)] = sys.b1[i];
    }
    let mut x0 = DVector::zeros(n1 + 1);
    for (i, v) in initial_density(spec, profile).into_iter().enumerate() {
        x0[i] = v;
    }
    x0[n1] = 1.0;
    let rho = t_grid
        .iter()
        .map(|&t| {
            let x = (&aug * t).exp() * &x0;
            x.rows(0, n1).iter().copied().collect()
        })
        .collect();
    Ok(DensityField {
        lattice: spec.lattice,
        times: t_grid.to_vec(),
        rho,
        reservoirs: reservoirs(spec),
        beta: spec.beta,
    })
}

pub fn solve_correlation(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t_grid: &[f64],
) -> Result<CorrelationField> {
    solve_correlation_with(spec, profile, t_grid, &SolverOptions::default())
}

pub fn solve_correlation_with(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t_grid: &[f64],
    opts: &SolverOptions,
) -> Result<CorrelationField> {
    check_grid(t_grid)?;
    if spec.n() > opts.max_correlation_n {
        return Err(Error::SizeLimit(format!(
            "correlation solver capped at N <= {}, got {}",
            opts.max_correlation_n,
            spec.n()
        )));
    }
    let sys = build_moment_system(spec)?;
    let y0 = initial_density(spec, profile);
    let z0 = initial_pairs(&y0);
    let states = integrate(&sys, &y0, Some(&z0), t_grid, opts)?;
    let mut rho = Vec::with_capacity(states.len());
    let mut phi = Vec::with_capacity(states.len());
    let mut defect: f64 = 0.0;
    for (y, z) in states {
        let z = z.expect("second moments integrated");
        defect = defect.max(stencil_defect(&sys, &y, &z));
        phi.push(pairs_to_phi(&y, &z));
        rho.push(y);
    }
    Ok(CorrelationField {
        lattice: spec.lattice,
        times: t_grid.to_vec(),
        density: DensityField {
            lattice: spec.lattice,
            times: t_grid.to_vec(),
            rho,
            reservoirs: reservoirs(spec),
            beta: spec.beta,
        },
        phi,
        stencil_defect: defect,
    })
}

fn pairs_to_phi(y: &[f64], z: &[f64]) -> Vec<f64> {
    let n1 = y.len();
    let mut phi = vec![0.0; z.len()];
    for l in 2..=n1 {
        for k in 1..l {
            let i = pair_index(k, l);
            phi[i] = z[i] - y[k - 1] * y[l - 1];
        }
    }
    phi
}

/// Compares `d phi / dt` implied by the system at state `(y, z)` with the
/// literal stencils: `N^2 Laplacian phi` off the diagonal and
/// `N^2 grad phi - N^2 m` on it, over rows `p+1 <= k < l <= N-1`.
/// Returns the max absolute deviation relative to `N^2`.
pub fn stencil_defect(sys: &MomentSystem, y: &[f64], z: &[f64]) -> f64 {
    let lat = sys.lattice;
    let (n, p, n1) = (lat.n(), lat.p(), lat.sites());
    let clock = lat.clock();
    let (dy, dz) = sys.apply(y, Some(z));
    let dz = dz.expect("second-moment block");
    let phi = |k: usize, l: usize| -> f64 {
        if l == n {
            0.0
        } else {
            z[pair_index(k, l)] - y[k - 1] * y[l - 1]
        }
    };
    let mut worst: f64 = 0.0;
    for l in (p + 2)..=n1 {
        for k in (p + 1)..l {
            let i = pair_index(k, l);
            // d/dt (z - y_k y_l)
            let dphi = dz[i] - dy[k - 1] * y[l - 1] - y[k - 1] * dy[l - 1];
            let expect = if l == k + 1 {
                let g = y[k] - y[k - 1];
                clock * (phi(k - 1, l) + phi(k, l + 1) - 2.0 * phi(k, l)) - clock * g * g
            } else {
                clock
                    * (phi(k - 1, l) + phi(k + 1, l) + phi(k, l - 1) + phi(k, l + 1)
                        - 4.0 * phi(k, l))
            };
            worst = worst.max((dphi - expect).abs() / clock);
        }
    }
    worst
}

/// Forward differences `g(t,k) = rho(t,k+1) - rho(t,k)`, `k = 1..N-1`, and
/// the diagonal source `m = g^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub times: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
}

impl GradientField {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "k", "g", "m"]).map_err(csv_err)?;
        for (ti, &t) in self.times.iter().enumerate() {
            for (i, (&g, &m)) in self.g[ti].iter().zip(&self.m[ti]).enumerate() {
                out.serialize((t, i + 1, g, m)).map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn gradient(field: &DensityField) -> GradientField {
    let n = field.lattice.n();
    let g: Vec<Vec<f64>> = (0..field.times.len())
        .map(|ti| {
            (1..n)
                .map(|k| field.at(ti, k + 1) - field.at(ti, k))
                .collect()
        })
        .collect();
    let m = g
        .iter()
        .map(|row| row.iter().map(|v| v * v).collect())
        .collect();
    GradientField {
        times: field.times.clone(),
        g,
        m,
    }
}
