use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Law for the kinetic prefactor `a(t)`.
#[derive(Clone)]
pub enum ScaleLaw {
    /// `a(t) = e^{2γt}`.
    Exponential,
    Constant(f64),
    Custom(TimeFn),
}

/// Law for the potential coefficient `η(t)`.
#[derive(Clone)]
pub enum EtaLaw {
    Constant(f64),
    Custom(TimeFn),
}

impl fmt::Debug for ScaleLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleLaw::Exponential => write!(f, "Exponential"),
            ScaleLaw::Constant(a) => write!(f, "Constant({a})"),
            ScaleLaw::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl fmt::Debug for EtaLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaLaw::Constant(e) => write!(f, "Constant({e})"),
            EtaLaw::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Time-dependent coefficients of the Hamiltonian plus the integration window.
#[derive(Clone, Debug)]
pub struct Schedule {
    scale: ScaleLaw,
    eta: EtaLaw,
    gamma: f64,
    t_end: f64,
    dt: f64,
}

impl Schedule {
    pub fn new(scale: ScaleLaw, eta: EtaLaw, gamma: f64, t_end: f64, dt: f64) -> Result<Self> {
        let s = Schedule {
            scale,
            eta,
            gamma,
            t_end,
            dt,
        };
        s.validate()?;
        Ok(s)
    }

    /// `a = e^{2γt}`, constant `η`.
    pub fn exponential(gamma: f64, eta: f64, t_end: f64, dt: f64) -> Result<Self> {
        Schedule::new(ScaleLaw::Exponential, EtaLaw::Constant(eta), gamma, t_end, dt)
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Schedule(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Schedule(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::Schedule(format!(
                "t_end must be at least dt (t_end = {}, dt = {})",
                self.t_end, self.dt
            )));
        }
        let a0 = self.a(0.0);
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(Error::Schedule(format!("a(0) must be positive, got {a0}")));
        }
        if let EtaLaw::Constant(e) = self.eta {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::Schedule(format!("eta must be >= 0, got {e}")));
            }
        }
        Ok(())
    }

    pub fn a(&self, t: f64) -> f64 {
        match &self.scale {
            ScaleLaw::Exponential => (2.0 * self.gamma * t).exp(),
            ScaleLaw::Constant(a) => *a,
            ScaleLaw::Custom(f) => f(t),
        }
    }

    /// `a(t)`, failing when it is not strictly positive.
    pub fn a_checked(&self, t: f64) -> Result<f64> {
        let a = self.a(t);
        if a > 0.0 && a.is_finite() {
            Ok(a)
        } else {
            Err(Error::Schedule(format!("a({t}) = {a} is not positive")))
        }
    }

    pub fn eta(&self, t: f64) -> f64 {
        match &self.eta {
            EtaLaw::Constant(e) => *e,
            EtaLaw::Custom(f) => f(t),
        }
    }

    /// `ȧ/a`; `2γ` for the exponential law.
    pub fn friction(&self, t: f64) -> f64 {
        match &self.scale {
            ScaleLaw::Exponential => 2.0 * self.gamma,
            ScaleLaw::Constant(_) => 0.0,
            ScaleLaw::Custom(f) => {
                let h = 1e-6 * t.abs().max(1.0);
                (f(t + h).ln() - f(t - h).ln()) / (2.0 * h)
            }
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scale_law(&self) -> &ScaleLaw {
        &self.scale
    }

    pub fn eta_law(&self) -> &EtaLaw {
        &self.eta
    }

    /// Constant `η` when the schedule has one.
    pub fn constant_eta(&self) -> Option<f64> {
        match self.eta {
            EtaLaw::Constant(e) => Some(e),
            EtaLaw::Custom(_) => None,
        }
    }

    pub fn with_window(&self, t_end: f64, dt: f64) -> Result<Self> {
        Schedule::new(self.scale.clone(), self.eta.clone(), self.gamma, t_end, dt)
    }

    /// Number of steps of size at most `dt` that reach `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}
