//! Physical constants, thermal photon statistics and the bosonic entropy function.
//!
//! All quadrature variances in this crate are in shot-noise units: `q = a + a^dagger`,
//! so the zero-temperature vacuum has variance 1 and a thermal vacuum at mean photon
//! number `n` has variance `2n + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA-2018 exact SI values. Every module reads constants from here.
pub mod constants {
    /// Planck constant, J s.
    pub const PLANCK: f64 = 6.626_070_15e-34;
    /// Boltzmann constant, J/K.
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    /// Speed of light in vacuum, m/s.
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    /// Tag written into output metadata.
    pub const VERSION: &str = "CODATA-2018";
}

/// Width of the window below 1 that [`bosonic_entropy`] clamps to 1.
pub const ENTROPY_CLAMP_TOL: f64 = 1e-9;

/// Operating environment of the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentParams {
    pub carrier_frequency_hz: f64,
    pub temperature_k: f64,
    /// Gaussian modulation variance `V_s` (SNU).
    pub signal_variance: f64,
    /// Variance `W` of the mode Eve injects (SNU); 1 is pure vacuum.
    pub eve_noise: f64,
}

impl EnvironmentParams {
    pub fn new(carrier_frequency_hz: f64, temperature_k: f64, signal_variance: f64, eve_noise: f64) -> Result<Self> {
        let env = EnvironmentParams { carrier_frequency_hz, temperature_k, signal_variance, eve_noise };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        positive("carrier_frequency_hz", self.carrier_frequency_hz)?;
        positive("temperature_k", self.temperature_k)?;
        positive("signal_variance", self.signal_variance)?;
        if !(self.eve_noise >= 1.0 && self.eve_noise.is_finite()) {
            return Err(Error::domain("eve_noise", self.eve_noise, "must be >= 1"));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        constants::SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    /// `V_a = V_s + V_0`, the variance of Alice's transmitted mode.
    pub fn alice_variance(&self) -> f64 {
        self.signal_variance + vacuum_variance(self)
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, value, "must be finite and > 0"))
    }
}

/// Planck occupation `1 / (exp(h f / k T) - 1)` at the carrier frequency.
pub fn mean_thermal_photons(env: &EnvironmentParams) -> f64 {
    thermal_occupation(env.carrier_frequency_hz, env.temperature_k)
}

pub(crate) fn thermal_occupation(frequency_hz: f64, temperature_k: f64) -> f64 {
    let x = constants::PLANCK * frequency_hz / (constants::BOLTZMANN * temperature_k);
    let denom = x.exp_m1();
    if denom.is_finite() {
        1.0 / denom
    } else {
        0.0
    }
}

/// Thermal vacuum variance `V_0 = 2 n + 1`.
pub fn vacuum_variance(env: &EnvironmentParams) -> f64 {
    2.0 * mean_thermal_photons(env) + 1.0
}

/// Entropy in bits of a single-mode thermal state with symplectic eigenvalue `x`:
/// `g((x+1)/2) - g((x-1)/2)` with `g(y) = y log2 y` and `g(0) = 0`.
///
/// Values within [`ENTROPY_CLAMP_TOL`] below 1 are treated as 1.
pub fn bosonic_entropy(x: f64) -> Result<f64> {
    if x.is_nan() || x < 1.0 - ENTROPY_CLAMP_TOL {
        return Err(Error::domain("symplectic eigenvalue", x, "must be >= 1"));
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let x = x.max(1.0);
    let minus = 0.5 * (x - 1.0);
    if minus == 0.0 {
        return Ok(0.0);
    }
    // Both forms avoid subtracting two large or two nearly equal logarithms.
    let h = if minus < 1.0 {
        (1.0 + minus) * minus.ln_1p() - minus * minus.ln()
    } else {
        minus.ln() + (1.0 + minus) * minus.recip().ln_1p()
    };
    Ok(h / std::f64::consts::LN_2)
}

/// `T x + (1 - T) y`.
pub fn lambda_mix(t: f64, x: f64, y: f64) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&t) {
        return Err(Error::domain("transmittance", t, "must lie in [0, 1]"));
    }
    let t = t.clamp(0.0, 1.0);
    Ok(t * x + (1.0 - t) * y)
}
