//! Study configuration files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::profile::InitialProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Hydro,
    LeftDensity,
    Gradient,
    Correlation,
    Duality,
}

impl StudyKind {
    pub const ALL: [StudyKind; 5] = [
        StudyKind::Hydro,
        StudyKind::LeftDensity,
        StudyKind::Gradient,
        StudyKind::Correlation,
        StudyKind::Duality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Hydro => "hydro",
            StudyKind::LeftDensity => "left_density",
            StudyKind::Gradient => "gradient",
            StudyKind::Correlation => "correlation",
            StudyKind::Duality => "duality",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            StudyKind::Hydro => "discrete density against the heat equation, plus a KMC functional",
            StudyKind::LeftDensity => "boundary densities against the effective reservoir value",
            StudyKind::Gradient => "late and early time density gradients, hitting windows",
            StudyKind::Correlation => {
                "decay of two-point correlations in the bulk and near the left edge"
            }
            StudyKind::Duality => {
                "master equation, moment solvers, KMC and dual walks on small lattices"
            }
        }
    }

    fn default_sweep(self) -> Vec<usize> {
        match self {
            StudyKind::Correlation => vec![32, 64, 128, 256],
            StudyKind::Duality => vec![8],
            _ => vec![64, 128, 256, 512],
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StudyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown study `{s}`")))
    }
}

/// One study run. Unset fields take the study defaults from [`StudyConfig::resolve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudyKind,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub profile: Option<InitialProfile>,
    #[serde(default)]
    pub n_sweep: Option<Vec<usize>>,
    /// Final macroscopic time.
    #[serde(default)]
    pub t_final: Option<f64>,
    /// Start of the supremum window for boundary densities.
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    /// Solver time step.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub replicas: Option<usize>,
    #[serde(default)]
    pub walks: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_seed() -> u64 {
    1
}

/// A configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub study: StudyKind,
    /// `None` when the study uses its built-in battery.
    pub model: Option<ModelSpec>,
    pub profile: InitialProfile,
    pub n_sweep: Vec<usize>,
    pub t_final: f64,
    pub s: f64,
    pub delta: f64,
    pub eps: f64,
    pub dt: Option<f64>,
    pub replicas: usize,
    pub walks: usize,
    pub seed: u64,
}

impl StudyConfig {
    pub fn new(study: StudyKind) -> Self {
        StudyConfig {
            study,
            model: None,
            profile: None,
            n_sweep: None,
            t_final: None,
            s: None,
            delta: None,
            eps: None,
            dt: None,
            replicas: None,
            walks: None,
            seed: default_seed(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let kind = self.study;
        let n_sweep = self.n_sweep.clone().unwrap_or_else(|| kind.default_sweep());
        if n_sweep.is_empty() {
            return Err(Error::Config("n_sweep is empty".into()));
        }
        if !n_sweep.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("n_sweep must be strictly ascending".into()));
        }
        let fits = matches!(kind, StudyKind::LeftDensity | StudyKind::Correlation);
        if fits && n_sweep.len() < 3 {
            return Err(Error::Config(
                "decay fits need at least three sweep points".into(),
            ));
        }
        if kind != StudyKind::Duality && n_sweep.len() < 2 {
            return Err(Error::Config("a sweep needs at least two sizes".into()));
        }
        if kind == StudyKind::Duality && n_sweep.iter().any(|&n| n - 1 > crate::master::MAX_SITES) {
            return Err(Error::Config(
                "the duality triangle needs N - 1 <= 16".into(),
            ));
        }
        let (replicas, walks) = match kind {
            StudyKind::Hydro => (1000, 0),
            StudyKind::LeftDensity => (80, 0),
            StudyKind::Gradient => (0, 100_000),
            StudyKind::Correlation => (0, 0),
            StudyKind::Duality => (100_000, 100_000),
        };
        let replicas = self.replicas.unwrap_or(replicas);
        let walks = self.walks.unwrap_or(walks);
        if matches!(
            kind,
            StudyKind::Hydro | StudyKind::LeftDensity | StudyKind::Duality
        ) && replicas < 2
        {
            return Err(Error::Config("replica counts must be at least 2".into()));
        }
        if matches!(kind, StudyKind::Gradient | StudyKind::Duality) && walks < 2 {
            return Err(Error::Config("walk counts must be at least 2".into()));
        }
        let t_final = self.t_final.unwrap_or(if kind == StudyKind::Gradient {
            1.0
        } else {
            0.25
        });
        let s = self.s.unwrap_or(0.05);
        let delta = self.delta.unwrap_or(0.1);
        let eps = self.eps.unwrap_or(crate::dual::DEFAULT_EPS);
        if !(t_final > 0.0 && s > 0.0 && s < t_final) {
            return Err(Error::Config("need 0 < s < t_final".into()));
        }
        if !(0.0 < delta && delta < 0.5) || !(0.0 < eps && eps <= 1.0) {
            return Err(Error::Config(
                "need 0 < delta < 1/2 and 0 < eps <= 1".into(),
            ));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt < t_final) {
                return Err(Error::Config("dt must lie in (0, t_final)".into()));
            }
        }
        let profile = self
            .profile
            .clone()
            .unwrap_or_else(|| InitialProfile::constant(0.5));
        profile
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(m) = &self.model {
            for &n in &n_sweep {
                m.with_n(n)
                    .map_err(|e| Error::Config(format!("model at N = {n}: {e}")))?;
            }
        }
        Ok(Resolved {
            study: kind,
            model: self.model.clone(),
            profile,
            n_sweep,
            t_final,
            s,
            delta,
            eps,
            dt: self.dt,
            replicas,
            walks,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = StudyConfig::from_json(r#"{"study": "correlation"}"#).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.n_sweep, vec![32, 64, 128, 256]);
        assert_eq!(r.delta, 0.1);
        let c = StudyConfig::from_json(r#"{"study": "hydro", "n_sweep": [16, 32], "seed": 9}"#)
            .unwrap();
        let r = c.resolve().unwrap();
        assert_eq!((r.n_sweep.len(), r.seed, r.replicas), (2, 9, 1000));
    }

    #[test]
    fn bad_configs() {
        assert!(StudyConfig::from_json(r#"{"study": "nope"}"#).is_err());
        assert!(StudyConfig::from_json(r#"{"study": "hydro", "bogus": 1}"#).is_err());
        let c = StudyConfig::from_json(r#"{"study": "hydro", "n_sweep": [64, 32]}"#).unwrap();
        assert!(c.resolve().is_err());
        let c = StudyConfig::from_json(r#"{"study": "hydro", "replicas": 1}"#).unwrap();
        assert!(c.resolve().is_err());
        let c = StudyConfig::from_json(r#"{"study": "duality", "n_sweep": [20]}"#).unwrap();
        assert!(c.resolve().is_err());
    }
}
