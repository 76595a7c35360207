//! Rejection-free kinetic Monte Carlo on the microscopic clock.
//!
//! Each replica is driven by `ChaCha8Rng::seed_from_u64(seed)` (rand_chacha
//! 0.9); the same stream first samples the initial configuration and then
//! the dynamics. Ensemble reductions accumulate integer counts, so results
//! do not depend on how replicas are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{contract, Result};
use crate::field::{csv_err, pair_index};
use crate::model::{sample_initial_with, Configuration, ModelSpec};
use crate::profile::InitialProfile;
use crate::stats::Estimate;

const NONE: usize = usize::MAX;

/// Event-driven state of one replica.
pub struct Simulator<'a> {
    spec: &'a ModelSpec,
    occ: Vec<u8>,
    /// Bonds `k` (between sites `k` and `k+1`, stored 0-based) whose sites differ.
    active: Vec<usize>,
    slot: Vec<usize>,
    right: f64,
    left: Vec<f64>,
    left_sum: f64,
    /// Microscopic time.
    time: f64,
    events: u64,
    closed: bool,
    rng: ChaCha8Rng,
}

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a ModelSpec, cfg: Configuration, rng: ChaCha8Rng) -> Result<Self> {
        contract!(
            cfg.sites() == spec.sites(),
            "configuration does not fit the lattice"
        );
        let n1 = spec.sites();
        let mut sim = Self {
            spec,
            occ: cfg.as_slice().to_vec(),
            active: Vec::with_capacity(n1),
            slot: vec![NONE; n1.saturating_sub(1)],
            right: 0.0,
            left: vec![0.0; spec.p()],
            left_sum: 0.0,
            time: 0.0,
            events: 0,
            closed: false,
            rng,
        };
        for b in 0..n1 - 1 {
            sim.refresh_bond(b);
        }
        sim.refresh_right();
        sim.refresh_left();
        Ok(sim)
    }

    /// Samples the initial configuration from `profile` with the same stream.
    pub fn from_profile(spec: &'a ModelSpec, profile: &InitialProfile, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = sample_initial_with(profile, spec.lattice, &mut rng);
        Self::new(spec, cfg, rng)
    }

    fn refresh_bond(&mut self, b: usize) {
        let on = self.occ[b] != self.occ[b + 1];
        let s = self.slot[b];
        if on && s == NONE {
            self.slot[b] = self.active.len();
            self.active.push(b);
        } else if !on && s != NONE {
            let last = self.active.pop().expect("active list out of sync");
            if last != b {
                self.active[s] = last;
                self.slot[last] = s;
            }
            self.slot[b] = NONE;
        }
    }

    /// Switches off both boundary mechanisms, leaving the closed stirring dynamics.
    pub fn close_boundaries(&mut self) {
        self.closed = true;
        self.refresh_right();
        self.refresh_left();
    }

    fn refresh_right(&mut self) {
        self.right = if self.closed {
            0.0
        } else {
            self.spec.right_flip_rate(*self.occ.last().unwrap())
        };
    }

    fn refresh_left(&mut self) {
        if self.closed {
            self.left.iter_mut().for_each(|r| *r = 0.0);
            self.left_sum = 0.0;
            return;
        }
        let p = self.spec.p();
        let block = &self.occ[..p];
        let mut sum = 0.0;
        for j in 1..=p {
            let r = self.spec.left.flip_rate(block, j);
            self.left[j - 1] = r;
            sum += r;
        }
        self.left_sum = sum;
    }

    pub fn total_rate(&self) -> f64 {
        self.active.len() as f64 + self.right + self.left_sum
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occ
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::from_occupancy(self.occ.clone()).expect("occupancies are bits")
    }

    fn flip(&mut self, site0: usize) {
        let n1 = self.occ.len();
        self.occ[site0] ^= 1;
        if site0 > 0 {
            self.refresh_bond(site0 - 1);
        }
        if site0 + 1 < n1 {
            self.refresh_bond(site0);
        }
        if site0 + 1 == n1 {
            self.refresh_right();
        }
        if site0 < self.spec.p() {
            self.refresh_left();
        }
    }

    fn swap(&mut self, b: usize) {
        let n1 = self.occ.len();
        self.occ.swap(b, b + 1);
        if b > 0 {
            self.refresh_bond(b - 1);
        }
        if b + 2 < n1 {
            self.refresh_bond(b + 1);
        }
        if b + 2 == n1 {
            self.refresh_right();
        }
        if b < self.spec.p() {
            self.refresh_left();
        }
    }

    /// Advances to the next event if it happens at or before `until`
    /// (microscopic time). Returns `false` and sets the clock to `until`
    /// when it does not.
    pub fn step_until(&mut self, until: f64) -> bool {
        let total = self.total_rate();
        if total <= 0.0 {
            self.time = until;
            return false;
        }
        let wait: f64 = self.rng.sample::<f64, _>(Exp1) / total;
        if self.time + wait > until {
            // memorylessness: the residual wait is redrawn on the next call
            self.time = until;
            return false;
        }
        self.time += wait;
        let mut u = self.rng.random::<f64>() * total;
        let na = self.active.len() as f64;
        if u < na {
            let b = self.active[u as usize];
            self.swap(b);
        } else {
            u -= na;
            if u < self.right {
                let last = self.occ.len() - 1;
                self.flip(last);
            } else {
                u -= self.right;
                let p = self.left.len();
                let mut j = p - 1;
                for (i, &r) in self.left.iter().enumerate() {
                    if u < r {
                        j = i;
                        break;
                    }
                    u -= r;
                }
                self.flip(j);
            }
        }
        self.events += 1;
        true
    }

    /// Runs all events up to microscopic time `until`.
    pub fn run_until(&mut self, until: f64) {
        while self.step_until(until) {}
    }

    /// Runs to `until`, returning the time integral of `occ[site-1]`.
    pub fn integrate_site(&mut self, site: usize, until: f64) -> f64 {
        let mut acc = 0.0;
        loop {
            let t0 = self.time;
            let v = self.occ[site - 1] as f64;
            let more = self.step_until(until);
            acc += v * (self.time - t0);
            if !more {
                return acc;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(macro time, snapshot)`.
    pub checkpoints: Vec<(f64, Configuration)>,
    pub seed: u64,
    pub event_count: u64,
}

fn check_checkpoints(t: &[f64]) -> Result<()> {
    contract!(
        t.iter().all(|&x| x >= 0.0 && x.is_finite()),
        "checkpoints must be finite and >= 0"
    );
    contract!(
        t.windows(2).all(|w| w[0] <= w[1]),
        "checkpoints must be ascending"
    );
    Ok(())
}

/// One sample path; checkpoint `t` is the state at the last event at or
/// before microscopic time `t N^2`.
pub fn simulate(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t_checkpoints: &[f64],
    seed: u64,
) -> Result<Trajectory> {
    check_checkpoints(t_checkpoints)?;
    let mut sim = Simulator::from_profile(spec, profile, seed)?;
    let clock = spec.lattice.clock();
    let mut checkpoints = Vec::with_capacity(t_checkpoints.len());
    for &t in t_checkpoints {
        sim.run_until(t * clock);
        checkpoints.push((t, sim.configuration()));
    }
    Ok(Trajectory {
        checkpoints,
        seed,
        event_count: sim.events(),
    })
}

/// Empirical density and pair covariance over independent replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub replicas: usize,
    pub sites: usize,
    /// `ones[i][k-1]`: replicas with site `k` occupied at `times[i]`.
    pub ones: Vec<Vec<u64>>,
    /// `pairs[i][pair_index(k, l)]` when pair statistics were requested.
    pub pairs: Option<Vec<Vec<u64>>>,
}

impl EnsembleStats {
    pub fn rho(&self, ti: usize, k: usize) -> Estimate {
        let r = self.replicas as f64;
        let m = self.ones[ti][k - 1] as f64 / r;
        let var = m * (1.0 - m) * r / (r - 1.0);
        Estimate {
            value: m,
            stderr: (var / r).sqrt(),
        }
    }

    /// Sample covariance of `eta_k, eta_l` with a plug-in standard error.
    pub fn phi(&self, ti: usize, k: usize, l: usize) -> Estimate {
        let pairs = self
            .pairs
            .as_ref()
            .expect("ensemble run without pair statistics");
        let (k, l) = if k < l { (k, l) } else { (l, k) };
        let r = self.replicas as f64;
        let mx = self.ones[ti][k - 1] as f64 / r;
        let my = self.ones[ti][l - 1] as f64 / r;
        let p11 = pairs[ti][pair_index(k, l)] as f64 / r;
        let cov = p11 - mx * my;
        let cells = [
            (p11, 1.0, 1.0),
            (mx - p11, 1.0, 0.0),
            (my - p11, 0.0, 1.0),
            (1.0 - mx - my + p11, 0.0, 0.0),
        ];
        let second: f64 = cells
            .iter()
            .map(|&(w, a, b)| w * ((a - mx) * (b - my)).powi(2))
            .sum();
        let var = (second - cov * cov).max(0.0);
        Estimate {
            value: cov * r / (r - 1.0),
            stderr: (var / r).sqrt(),
        }
    }

    pub fn write_density_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "k", "rho_hat", "stderr"])
            .map_err(csv_err)?;
        for (ti, &t) in self.times.iter().enumerate() {
            for k in 1..=self.sites {
                let e = self.rho(ti, k);
                out.serialize((t, k, e.value, e.stderr)).map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_correlation_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "k", "l", "phi_hat", "stderr"])
            .map_err(csv_err)?;
        for (ti, &t) in self.times.iter().enumerate() {
            for l in 2..=self.sites {
                for k in 1..l {
                    let e = self.phi(ti, k, l);
                    out.serialize((t, k, l, e.value, e.stderr))
                        .map_err(csv_err)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

struct Counts {
    ones: Vec<Vec<u64>>,
    pairs: Option<Vec<Vec<u64>>>,
}

impl Counts {
    fn zero(times: usize, sites: usize, with_pairs: bool) -> Self {
        Self {
            ones: vec![vec![0; sites]; times],
            pairs: with_pairs.then(|| vec![vec![0; sites * (sites - 1) / 2]; times]),
        }
    }

    fn add(mut self, other: Counts) -> Self {
        for (a, b) in self.ones.iter_mut().zip(other.ones) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        if let (Some(pa), Some(pb)) = (self.pairs.as_mut(), other.pairs) {
            for (a, b) in pa.iter_mut().zip(pb) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
        }
        self
    }
}

/// Densities and pair covariances from replicas seeded `seed_base + i`.
pub fn ensemble_stats(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t_checkpoints: &[f64],
    replicas: usize,
    seed_base: u64,
) -> Result<EnsembleStats> {
    contract!(replicas >= 2, "an ensemble needs at least two replicas");
    let seeds: Vec<u64> = (0..replicas as u64)
        .map(|i| seed_base.wrapping_add(i))
        .collect();
    ensemble_with_seeds(spec, profile, t_checkpoints, &seeds, true)
}

/// As [`ensemble_stats`] without pair statistics.
pub fn ensemble_density(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t_checkpoints: &[f64],
    replicas: usize,
    seed_base: u64,
) -> Result<EnsembleStats> {
    contract!(replicas >= 2, "an ensemble needs at least two replicas");
    let seeds: Vec<u64> = (0..replicas as u64)
        .map(|i| seed_base.wrapping_add(i))
        .collect();
    ensemble_with_seeds(spec, profile, t_checkpoints, &seeds, false)
}

/// Ensemble over an explicit list of replica seeds.
pub fn ensemble_with_seeds(
    spec: &ModelSpec,
    profile: &InitialProfile,
    times: &[f64],
    seeds: &[u64],
    with_pairs: bool,
) -> Result<EnsembleStats> {
    contract!(seeds.len() >= 2, "an ensemble needs at least two replicas");
    check_checkpoints(times)?;
    let replicas = seeds.len();
    let sites = spec.sites();
    let clock = spec.lattice.clock();
    let counts = seeds
        .par_iter()
        .try_fold(
            || Counts::zero(times.len(), sites, with_pairs),
            |mut acc, &seed| -> Result<Counts> {
                let mut sim = Simulator::from_profile(spec, profile, seed)?;
                let mut occupied = Vec::with_capacity(sites);
                for (ti, &t) in times.iter().enumerate() {
                    sim.run_until(t * clock);
                    occupied.clear();
                    occupied.extend((1..=sites).filter(|&k| sim.occupancy()[k - 1] == 1));
                    for &k in &occupied {
                        acc.ones[ti][k - 1] += 1;
                    }
                    if let Some(pairs) = acc.pairs.as_mut() {
                        for (a, &k) in occupied.iter().enumerate() {
                            for &l in &occupied[a + 1..] {
                                pairs[ti][pair_index(k, l)] += 1;
                            }
                        }
                    }
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || Counts::zero(times.len(), sites, with_pairs),
            |a, b| Ok(a.add(b)),
        )?;
    Ok(EnsembleStats {
        times: times.to_vec(),
        replicas,
        sites,
        ones: counts.ones,
        pairs: counts.pairs,
    })
}

/// Mean over replicas of `sum_k weights[k-1] eta_k(t)`.
pub fn ensemble_functional(
    spec: &ModelSpec,
    profile: &InitialProfile,
    t: f64,
    weights: &[f64],
    replicas: usize,
    seed_base: u64,
) -> Result<Estimate> {
    contract!(
        weights.len() == spec.sites(),
        "one weight per site required"
    );
    contract!(replicas >= 2, "an ensemble needs at least two replicas");
    let clock = spec.lattice.clock();
    let samples = (0..replicas)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut sim = Simulator::from_profile(spec, profile, seed_base.wrapping_add(i as u64))?;
            sim.run_until(t * clock);
            Ok(sim
                .occupancy()
                .iter()
                .zip(weights)
                .map(|(&o, w)| o as f64 * w)
                .sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&samples))
}

/// Replica mean of `(1/(t1-t0)) int_{t0}^{t1} eta_site(s) ds` (macro times).
pub fn time_averaged_occupancy(
    spec: &ModelSpec,
    profile: &InitialProfile,
    site: usize,
    t0: f64,
    t1: f64,
    replicas: usize,
    seed_base: u64,
) -> Result<Estimate> {
    spec.lattice.check_site(site)?;
    contract!(0.0 <= t0 && t0 < t1, "need 0 <= t0 < t1");
    contract!(replicas >= 2, "an ensemble needs at least two replicas");
    let clock = spec.lattice.clock();
    let samples = (0..replicas)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut sim = Simulator::from_profile(spec, profile, seed_base.wrapping_add(i as u64))?;
            sim.run_until(t0 * clock);
            Ok(sim.integrate_site(site, t1 * clock) / ((t1 - t0) * clock))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&samples))
}
