//! Parameter bundle shared by the estimators, the simulator and the CLI.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Which reactive-listening primitive a cell or trial uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Desync,
    Pco,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Desync => "desync",
            Protocol::Pco => "pco",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desync" => Ok(Protocol::Desync),
            "pco" => Ok(Protocol::Pco),
            other => Err(format!(
                "unknown protocol '{other}' (expected desync or pco)"
            )),
        }
    }
}

/// Measurement noise from 0.34 ms at T = 1 s.
pub const DEFAULT_SIGMA_DELTA_S: f64 = 0.34e-3;
pub const DEFAULT_C_CONF: f64 = 0.9999;
pub const DEFAULT_MISFIRE_PROB: f64 = 0.004;

/// One experiment cell's worth of protocol parameters.
///
/// Phase-domain code should read the noise through [`ProtocolParams::sigma_delta`],
/// which normalizes the measured time jitter by the firing period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub w: usize,
    pub alpha: f64,
    pub b_thres: f64,
    pub c_conf: f64,
    pub period_s: f64,
    pub sigma_delta_s: f64,
    pub misfire_prob: f64,
}

impl ProtocolParams {
    /// Parameters with the default confidence, noise, period and misfire rate.
    pub fn new(w: usize, alpha: f64, b_thres: f64) -> Self {
        ProtocolParams {
            w,
            alpha,
            b_thres,
            c_conf: DEFAULT_C_CONF,
            period_s: 1.0,
            sigma_delta_s: DEFAULT_SIGMA_DELTA_S,
            misfire_prob: DEFAULT_MISFIRE_PROB,
        }
    }

    pub fn with_c_conf(mut self, c_conf: f64) -> Self {
        self.c_conf = c_conf;
        self
    }

    pub fn with_period(mut self, period_s: f64) -> Self {
        self.period_s = period_s;
        self
    }

    pub fn with_sigma_delta_s(mut self, sigma_delta_s: f64) -> Self {
        self.sigma_delta_s = sigma_delta_s;
        self
    }

    pub fn with_misfire_prob(mut self, misfire_prob: f64) -> Self {
        self.misfire_prob = misfire_prob;
        self
    }

    /// Noise standard deviation as a fraction of the period.
    #[inline]
    pub fn sigma_delta(&self) -> f64 {
        self.sigma_delta_s / self.period_s
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel::uniform(self.sigma_delta())
    }

    pub fn validate(&self) -> Result<()> {
        if self.w < 2 {
            return Err(Error::OutOfRange {
                name: "W",
                value: self.w as f64,
                range: "[2, inf)",
            });
        }
        check_open(self.alpha, "alpha", 0.0, 1.0, "(0,1)")?;
        check_open(self.b_thres, "b_thres", 0.0, 0.5, "(0,0.5)")?;
        check_open(self.c_conf, "c_conf", 0.0, 1.0, "(0,1)")?;
        if !(self.period_s > 0.0 && self.period_s.is_finite()) {
            return Err(Error::OutOfRange {
                name: "T",
                value: self.period_s,
                range: "(0, inf)",
            });
        }
        if !(self.sigma_delta_s >= 0.0 && self.sigma_delta_s.is_finite()) {
            return Err(Error::OutOfRange {
                name: "sigma_delta",
                value: self.sigma_delta_s,
                range: "[0, inf)",
            });
        }
        if !(0.0..1.0).contains(&self.misfire_prob) {
            return Err(Error::OutOfRange {
                name: "misfire_prob",
                value: self.misfire_prob,
                range: "[0,1)",
            });
        }
        let limit = (1.0 / self.b_thres).floor() as usize;
        if self.w >= limit {
            return Err(Error::SlotCapacity { w: self.w, limit });
        }
        Ok(())
    }
}

fn check_open(v: f64, name: &'static str, lo: f64, hi: f64, range: &'static str) -> Result<()> {
    if v > lo && v < hi {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: v,
            range,
        })
    }
}

/// Additive, zero-mean, uniformly distributed phase noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn uniform(sigma: f64) -> Self {
        NoiseModel {
            sigma: sigma.max(0.0),
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Half-width of the support, sigma * sqrt(3).
    pub fn half_width(&self) -> f64 {
        self.sigma * 3f64.sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            // still consume a draw so noisy and noise-free runs share RNG streams
            let _: f64 = rng.random();
            return 0.0;
        }
        let h = self.half_width();
        rng.random_range(-h..h)
    }
}
