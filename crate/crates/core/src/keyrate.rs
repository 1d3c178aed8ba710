//! Reverse-reconciliation secret key rates per parallel channel and for the
//! MIMO link, in bits per channel use.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelDecomposition;
use crate::error::{Error, Result};
use crate::gaussian::holevo_exact;
use crate::physics::{bosonic_entropy, lambda_mix, vacuum_variance, EnvironmentParams};

const DISCRIMINANT_TOL: f64 = 1e-8;

/// How Eve's Holevo information is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    /// Covariance-matrix computation of the entangling-cloner attack.
    Exact,
    /// Closed-form symplectic eigenvalues valid for large modulation.
    #[default]
    LargeModulation,
    /// First order in the transmittances: `zeta * T - h(W)` per channel.
    Taylor,
}

impl RateMethod {
    pub const ALL: [RateMethod; 3] = [RateMethod::Exact, RateMethod::LargeModulation, RateMethod::Taylor];

    pub fn as_str(self) -> &'static str {
        match self {
            RateMethod::Exact => "exact",
            RateMethod::LargeModulation => "large_modulation",
            RateMethod::Taylor => "taylor",
        }
    }
}

impl fmt::Display for RateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "exact" => Ok(RateMethod::Exact),
            "large_modulation" | "lm" => Ok(RateMethod::LargeModulation),
            "taylor" => Ok(RateMethod::Taylor),
            other => Err(Error::config(
                "method",
                format!("unknown method '{other}' (expected exact, large_modulation or taylor)"),
            )),
        }
    }
}

/// Prefactor of the small-transmittance coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaConstant {
    /// The rounded value 0.72.
    #[default]
    Rounded,
    /// `1 / (2 ln 2) = 0.7213...`
    Analytic,
}

impl ZetaConstant {
    pub fn value(self) -> f64 {
        match self {
            ZetaConstant::Rounded => 0.72,
            ZetaConstant::Analytic => 0.5 / std::f64::consts::LN_2,
        }
    }
}

impl FromStr for ZetaConstant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rounded" => Ok(ZetaConstant::Rounded),
            "analytic" => Ok(ZetaConstant::Analytic),
            other => Err(Error::config(
                "zeta_constant",
                format!("unknown zeta constant '{other}' (expected rounded or analytic)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RateOptions {
    /// Sum `max(0, R_i)` instead of the signed per-channel rates.
    pub clamp_negative_channels: bool,
    pub zeta_constant: ZetaConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRate {
    pub transmittance: f64,
    pub mutual_info_bits: f64,
    /// For the Taylor method this is the value implied by `mutual_info - rate`.
    pub holevo_bits: f64,
    pub rate_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub per_channel: Vec<ChannelRate>,
    pub total_rate_bits: f64,
    pub method: RateMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxEigs {
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
    pub nu4: f64,
    pub delta: f64,
    pub upsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub alpha: f64,
    pub zeta: f64,
    pub feasible: bool,
}

fn check_transmittance(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::domain("transmittance", t, "must lie in [0, 1]"))
    }
}

fn check_at_least_one(name: &'static str, x: f64) -> Result<()> {
    if x >= 1.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, x, "must be finite and >= 1"))
    }
}

/// `I = 1/2 log2(1 + T V_s / Lambda(T, V_0, W))`.
pub fn mutual_information(t: f64, vs: f64, v0: f64, w: f64) -> Result<f64> {
    check_transmittance(t)?;
    if !(vs > 0.0 && vs.is_finite()) {
        return Err(Error::domain("signal_variance", vs, "must be finite and > 0"));
    }
    check_at_least_one("vacuum_variance", v0)?;
    check_at_least_one("eve_noise", w)?;
    Ok(0.5 * (t * vs / lambda_mix(t, v0, w)?).ln_1p() / std::f64::consts::LN_2)
}

/// Closed-form symplectic eigenvalues of Eve's state before (`nu1`, `nu2`) and
/// after (`nu3`, `nu4`) conditioning on Bob's homodyne outcome.
pub fn approx_symplectic_eigs(t: f64, va: f64, w: f64) -> Result<ApproxEigs> {
    check_transmittance(t)?;
    check_at_least_one("alice_variance", va)?;
    check_at_least_one("eve_noise", w)?;
    let l_w_va = lambda_mix(t, w, va)?;
    let l_wva_1 = lambda_mix(t, w * va, 1.0)?;
    let l_va_w = lambda_mix(t, va, w)?;
    let delta = (va * w * l_w_va + w * l_wva_1) / l_va_w;
    let upsilon = va * w * w * l_wva_1 * l_w_va / (l_va_w * l_va_w);
    let mut disc = delta * delta - 4.0 * upsilon;
    if disc < 0.0 {
        if disc < -DISCRIMINANT_TOL * delta * delta {
            return Err(Error::NegativeDiscriminant(disc));
        }
        disc = 0.0;
    }
    let root = disc.sqrt();
    let nu3 = (0.5 * (delta + root)).sqrt();
    // Cancellation-free smaller root from the product nu3^2 nu4^2 = Upsilon.
    let nu4 = if nu3 > 0.0 { upsilon.sqrt() / nu3 } else { 0.0 };
    Ok(ApproxEigs { nu1: l_w_va, nu2: w, nu3, nu4, delta, upsilon })
}

/// `h(nu1) + h(nu2) - h(nu3) - h(nu4)` with the closed-form eigenvalues.
pub fn holevo_large_modulation(t: f64, va: f64, w: f64) -> Result<f64> {
    let e = approx_symplectic_eigs(t, va, w)?;
    Ok(bosonic_entropy(e.nu1)? + bosonic_entropy(e.nu2)? - bosonic_entropy(e.nu3)? - bosonic_entropy(e.nu4)?)
}

/// `c [V_s/W - ln((V_a+1)/(V_a-1)) ((V_a^2 - W^2)/(2W) - V_a)]`.
pub fn zeta_coefficient_with(vs: f64, v0: f64, w: f64, constant: ZetaConstant) -> Result<f64> {
    check_at_least_one("eve_noise", w)?;
    let va = vs + v0;
    if !(va > 1.0 && va.is_finite()) {
        return Err(Error::domain("alice_variance", va, "must be finite and > 1"));
    }
    // ln((V_a+1)/(V_a-1)) = ln(1 + 2/(V_a-1)), accurate for large V_a.
    let log_ratio = (2.0 / (va - 1.0)).ln_1p();
    Ok(constant.value() * (vs / w - log_ratio * ((va * va - w * w) / (2.0 * w) - va)))
}

/// [`zeta_coefficient_with`] using the constant 0.72.
pub fn zeta_coefficient(vs: f64, v0: f64, w: f64) -> Result<f64> {
    zeta_coefficient_with(vs, v0, w, ZetaConstant::Rounded)
}

/// Rate of one parallel channel with all parts reported.
pub fn channel_rate(
    t: f64,
    vs: f64,
    v0: f64,
    w: f64,
    method: RateMethod,
    zeta_constant: ZetaConstant,
) -> Result<ChannelRate> {
    let mutual_info_bits = mutual_information(t, vs, v0, w)?;
    let va = vs + v0;
    let (holevo_bits, rate_bits) = match method {
        RateMethod::Exact => {
            let chi = holevo_exact(t, va, w)?;
            (chi, mutual_info_bits - chi)
        }
        RateMethod::LargeModulation => {
            let chi = holevo_large_modulation(t, va, w)?;
            (chi, mutual_info_bits - chi)
        }
        RateMethod::Taylor => {
            let rate = zeta_coefficient_with(vs, v0, w, zeta_constant)? * t - bosonic_entropy(w)?;
            (mutual_info_bits - rate, rate)
        }
    };
    Ok(ChannelRate { transmittance: t, mutual_info_bits, holevo_bits, rate_bits })
}

/// `R = I(A:B) - chi(B:E)` for one parallel channel; negative values are kept.
pub fn rate_per_channel(t: f64, vs: f64, v0: f64, w: f64, method: RateMethod) -> Result<f64> {
    Ok(channel_rate(t, vs, v0, w, method, ZetaConstant::Rounded)?.rate_bits)
}

/// Sum of per-channel rates over the given transmittances.
pub fn rate_from_transmittances(
    transmittances: &[f64],
    env: &EnvironmentParams,
    method: RateMethod,
    options: &RateOptions,
) -> Result<RateBreakdown> {
    env.validate()?;
    let v0 = vacuum_variance(env);
    let per_channel = transmittances
        .iter()
        .map(|&t| channel_rate(t, env.signal_variance, v0, env.eve_noise, method, options.zeta_constant))
        .collect::<Result<Vec<_>>>()?;
    let total_rate_bits = per_channel
        .iter()
        .map(|c| if options.clamp_negative_channels { c.rate_bits.max(0.0) } else { c.rate_bits })
        .sum();
    Ok(RateBreakdown { per_channel, total_rate_bits, method })
}

/// MIMO rate: the sum over the `r` eigenmode channels of the decomposition.
pub fn rate_mimo(
    dec: &ChannelDecomposition,
    env: &EnvironmentParams,
    method: RateMethod,
    options: &RateOptions,
) -> Result<RateBreakdown> {
    rate_from_transmittances(&dec.transmittances, env, method, options)
}

/// `zeta tr(H^dagger H) - r h(W)`.
pub fn rate_taylor(
    dec: &ChannelDecomposition,
    env: &EnvironmentParams,
    options: &RateOptions,
) -> Result<RateBreakdown> {
    rate_mimo(dec, env, RateMethod::Taylor, options)
}

/// `alpha = r h(W) / sum T_i`; a positive rate needs `zeta > alpha`.
pub fn feasibility_from_transmittances(
    transmittances: &[f64],
    env: &EnvironmentParams,
    zeta_constant: ZetaConstant,
) -> Result<Feasibility> {
    env.validate()?;
    let zeta = zeta_coefficient_with(env.signal_variance, vacuum_variance(env), env.eve_noise, zeta_constant)?;
    let trace: f64 = transmittances.iter().sum();
    let hw = bosonic_entropy(env.eve_noise)?;
    let alpha = if hw == 0.0 { 0.0 } else { transmittances.len() as f64 * hw / trace };
    Ok(Feasibility { alpha, zeta, feasible: zeta > alpha })
}

pub fn feasibility_threshold(
    dec: &ChannelDecomposition,
    env: &EnvironmentParams,
    zeta_constant: ZetaConstant,
) -> Result<Feasibility> {
    feasibility_from_transmittances(&dec.transmittances, env, zeta_constant)
}
