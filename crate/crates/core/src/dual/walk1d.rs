//! Simple random walk on `Z` jumping at rate `N^2` in each direction.
//!
//! The embedded ±1 steps are drawn 64 at a time from random bits; the time of
//! the `m`-th step is `Gamma(m, 1/(2N^2))`, so time is only sampled when the
//! walk hits or after a block of steps, which is exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use statrs::distribution::{Binomial, Discrete, DiscreteCDF, Poisson};

use crate::error::{contract, Result};
use crate::stats::Estimate;

fn gamma_time(steps: u64, rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    Gamma::new(steps as f64, 1.0 / rate)
        .expect("positive shape")
        .sample(rng)
}

/// Hitting times of `{lower, upper}` from `start`; `INFINITY` when the walk
/// has not hit by macro time `t_max`.
pub fn hitting_times(
    start: i64,
    lower: Option<i64>,
    upper: i64,
    n: usize,
    t_max: f64,
    walks: usize,
    seed: u64,
) -> Vec<f64> {
    let rate = 2.0 * (n as f64).powi(2);
    let block = ((rate * t_max).ceil() as u64).max(64);
    (0..walks as u64)
        .into_par_iter()
        .map(|w| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(w);
            let hit = |x: i64| x == upper || lower == Some(x);
            if hit(start) {
                return 0.0;
            }
            let mut pos = start;
            let mut elapsed = 0.0;
            loop {
                let mut taken = 0u64;
                while taken < block {
                    let bits: u64 = rng.random();
                    let n_bits = (block - taken).min(64);
                    for b in 0..n_bits {
                        pos += if (bits >> b) & 1 == 1 { 1 } else { -1 };
                        taken += 1;
                        if hit(pos) {
                            let t = elapsed + gamma_time(taken, rate, &mut rng);
                            return if t <= t_max { t } else { f64::INFINITY };
                        }
                    }
                }
                elapsed += gamma_time(block, rate, &mut rng);
                if elapsed > t_max {
                    return f64::INFINITY;
                }
            }
        })
        .collect()
}

/// Fraction of `times` inside `[t - s, t]`.
pub fn window_fraction(times: &[f64], t: f64, s: f64) -> Estimate {
    let hits = times.iter().filter(|&&h| h >= t - s && h <= t).count();
    Estimate::proportion(hits as u64, times.len() as u64)
}

fn check_window(t: f64, s: f64) -> Result<()> {
    contract!(
        t > 0.0 && s > 0.0 && s <= t,
        "need 0 < s <= t, got s = {s}, t = {t}"
    );
    Ok(())
}

/// `P_k[ H({p+1, N-1}) in [t-s, t] ]` by Monte Carlo.
pub fn hitting_window_prob(
    k: usize,
    n: usize,
    p: usize,
    t: f64,
    s: f64,
    walks: usize,
    seed: u64,
) -> Result<Estimate> {
    contract!(p + 1 <= k && k < n, "start {k} outside [p+1, N-1]");
    check_window(t, s)?;
    let times = hitting_times(
        k as i64,
        Some(p as i64 + 1),
        n as i64 - 1,
        n,
        t,
        walks,
        seed,
    );
    Ok(window_fraction(&times, t, s))
}

/// As [`hitting_window_prob`] with the barrier `N-1` only.
pub fn single_barrier_window_prob(
    k: usize,
    n: usize,
    t: f64,
    s: f64,
    walks: usize,
    seed: u64,
) -> Result<Estimate> {
    contract!(k < n, "start {k} beyond the barrier N-1");
    check_window(t, s)?;
    let times = hitting_times(k as i64, None, n as i64 - 1, n, t, walks, seed);
    Ok(window_fraction(&times, t, s))
}

/// `P_0[Y(u) >= a]` with `Y(u)` the difference of two Poisson(`N^2 u`) counts.
fn upper_tail(a: i64, n: usize, u: f64) -> f64 {
    if u <= 0.0 {
        return if a <= 0 { 1.0 } else { 0.0 };
    }
    let lambda = 2.0 * (n as f64).powi(2) * u;
    let jumps = Poisson::new(lambda).expect("positive mean");
    let spread = 12.0 * lambda.sqrt() + 20.0;
    let lo = (lambda - spread).max(0.0) as u64;
    let hi = (lambda + spread).ceil() as u64;
    let mut total = 0.0;
    for m in lo..=hi {
        // Y = 2B - m with B ~ Bin(m, 1/2) up-steps
        let need = (m as i64 + a + 1).div_euclid(2);
        let tail = if need <= 0 {
            1.0
        } else if need as u64 > m {
            0.0
        } else {
            Binomial::new(0.5, m)
                .expect("valid binomial")
                .sf(need as u64 - 1)
        };
        total += jumps.pmf(m) * tail;
    }
    total
}

/// Reflection identity for the barrier at distance `a`:
/// `P(H <= u) = P(Y(u) >= a) + P(Y(u) > a)`, evaluated over `[t-s, t]`.
pub fn reflection_window_prob(a: usize, n: usize, t: f64, s: f64) -> f64 {
    if a == 0 {
        // hit at time zero
        return if t - s <= 0.0 { 1.0 } else { 0.0 };
    }
    let a = a as i64;
    let cdf = |u: f64| upper_tail(a, n, u) + upper_tail(a + 1, n, u);
    cdf(t) - cdf(t - s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_on_barrier_hits_at_zero() {
        let e = hitting_window_prob(63, 64, 2, 0.1, 0.1, 100, 1).unwrap();
        assert_eq!(e.value, 1.0);
        let e = hitting_window_prob(63, 64, 2, 0.1, 0.05, 100, 1).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn reflection_tail_sanity() {
        // a = 0: the walk starts on the barrier
        assert!((reflection_window_prob(0, 32, 0.1, 0.1) - 1.0).abs() < 1e-12);
        let p = reflection_window_prob(8, 32, 0.1, 0.05);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn bad_windows_are_rejected() {
        assert!(hitting_window_prob(10, 64, 2, 0.1, 0.2, 10, 1).is_err());
        assert!(hitting_window_prob(2, 64, 2, 0.1, 0.05, 10, 1).is_err());
    }
}
