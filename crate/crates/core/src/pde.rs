//! Heat equation on `[0,1]` with Dirichlet data `(alpha, beta)`, as a sine
//! series around the linear stationary profile.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{contract, Result};
use crate::field::{csv_err, DensityField};
use crate::profile::InitialProfile;

pub const DEFAULT_MODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct HeatSolution {
    pub alpha: f64,
    pub beta: f64,
    /// Sine coefficient of mode `m` at `coeffs[m-1]`.
    pub coeffs: Vec<f64>,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson over `panels` equal pieces of `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = simpson(x0, x1, f0, fm, f1);
            adaptive(f, x0, x1, f0, fm, f1, whole, tol / panels as f64, 40)
        })
        .sum()
}

pub fn solve_heat(
    profile: &InitialProfile,
    alpha: f64,
    beta: f64,
    modes: usize,
) -> Result<HeatSolution> {
    contract!(modes >= 1, "need at least one mode");
    let coeffs = (1..=modes)
        .map(|m| {
            let w = m as f64 * PI;
            let f = |u: f64| (profile.eval(u) - alpha - (beta - alpha) * u) * (w * u).sin();
            // a few panels per half-wave keeps the integrand smooth per panel
            2.0 * integrate(&f, 0.0, 1.0, 4 * m, 1e-14)
        })
        .collect();
    Ok(HeatSolution {
        alpha,
        beta,
        coeffs,
    })
}

impl HeatSolution {
    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        let mut v = self.alpha + (self.beta - self.alpha) * u;
        for (i, c) in self.coeffs.iter().enumerate() {
            let w = (i + 1) as f64 * PI;
            let decay = (-w * w * t).exp();
            if decay == 0.0 {
                break;
            }
            v += c * decay * (w * u).sin();
        }
        v
    }

    /// `c_m^2 e^{-2 (m pi)^2 t}`.
    pub fn mode_energies(&self, t: f64) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let w = (i + 1) as f64 * PI;
                c * c * (-2.0 * w * w * t).exp()
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W, times: &[f64], points: usize) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "u", "rho_bar"]).map_err(csv_err)?;
        for &t in times {
            for i in 0..=points {
                let u = i as f64 / points as f64;
                out.serialize((t, u, self.eval(t, u))).map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `rho_N(t, k) - rho_bar(t, k/N)`; `t` must be on the field's grid.
pub fn theta(field: &DensityField, sol: &HeatSolution, t: f64, k: usize) -> Result<f64> {
    contract!(t > 0.0, "theta needs t > 0");
    let n = field.lattice.n();
    contract!((1..=n).contains(&k), "site {k} outside 1..=N");
    let ti = field.time_index(t);
    contract!(ti.is_some(), "t = {t} is not on the field's time grid");
    Ok(field.at(ti.unwrap(), k) - sol.eval(t, k as f64 / n as f64))
}

/// `(1/N) sum_k theta(t,k)^2` and `sup_k |theta(t,k)|` over `k = 1..N-1`.
pub fn theta_norms(field: &DensityField, sol: &HeatSolution, t: f64) -> Result<(f64, f64)> {
    let n = field.lattice.n();
    let mut sq = 0.0;
    let mut sup: f64 = 0.0;
    for k in 1..n {
        let d = theta(field, sol, t, k)?;
        sq += d * d;
        sup = sup.max(d.abs());
    }
    Ok((sq / n as f64, sup))
}
