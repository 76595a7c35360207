//! Macroscopic initial density profiles `rho_0 : [0,1] -> [0,1]`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    Constant {
        value: f64,
    },
    /// `left + (right - left) u`.
    Linear {
        left: f64,
        right: f64,
    },
    /// Linear part plus `sum amp * sin(m pi u)` over `(m, amp)`.
    Sines {
        left: f64,
        right: f64,
        modes: Vec<(usize, f64)>,
    },
    #[serde(skip)]
    Custom(ProfileFn),
}

impl InitialProfile {
    pub fn constant(value: f64) -> Self {
        InitialProfile::Constant { value }
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        InitialProfile::Custom(Arc::new(f))
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            InitialProfile::Constant { value } => *value,
            InitialProfile::Linear { left, right } => left + (right - left) * u,
            InitialProfile::Sines { left, right, modes } => {
                let mut v = left + (right - left) * u;
                for &(m, amp) in modes {
                    v += amp * (m as f64 * std::f64::consts::PI * u).sin();
                }
                v
            }
            InitialProfile::Custom(f) => f(u),
        }
    }

    /// Checks the range on a fine grid; closed forms are only range-checked here.
    pub fn validate(&self) -> Result<()> {
        for i in 0..=1024 {
            let u = i as f64 / 1024.0;
            let v = self.eval(u);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidModel(format!(
                    "initial profile takes value {v} at u = {u}, outside [0,1]"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialProfile::Constant { value } => write!(f, "Constant({value})"),
            InitialProfile::Linear { left, right } => write!(f, "Linear({left} -> {right})"),
            InitialProfile::Sines { left, right, modes } => {
                write!(f, "Sines({left} -> {right}, {modes:?})")
            }
            InitialProfile::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}
