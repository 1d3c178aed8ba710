//! TOML scenario files.
//!
//! ```toml
//! [environment]
//! carrier_frequency_thz = 15.0    # or carrier_frequency_hz
//! temperature_k = 296.0
//! signal_variance = 1000.0
//! eve_noise = 1.0
//!
//! [arrays]
//! n_tx = 32
//! n_rx = 32
//! element_gain_dbi = 30.0         # or element_gain (linear)
//! element_spacing_over_lambda = 0.5
//!
//! [[paths]]
//! kind = "los"                    # or "nlos"
//! length_m = 10.0
//! aod_deg = 0.0                   # or aod_rad; likewise aoa
//! aoa_deg = 0.0
//!
//! [absorption]
//! csv = "delta.csv"               # or [[absorption.bands]] entries
//!
//! [options]
//! method = "large_modulation"
//! clamp_negative_channels = false
//! fresnel_mode = "power"
//! rank_tolerance = 1e-12
//! zeta_constant = "rounded"
//! ```
//!
//! Angles may be given in degrees or radians but not both. Relative CSV paths are
//! resolved against the config file's directory.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::channel::{AbsorptionTable, ArrayConfig, Band, FresnelMode, PathSpec};
use crate::error::{Error, Result};
use crate::keyrate::{RateMethod, ZetaConstant};
use crate::physics::{constants, EnvironmentParams};
use crate::scenario::{Scenario, ScenarioOptions};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    environment: RawEnvironment,
    arrays: RawArrays,
    paths: Vec<RawPath>,
    absorption: Option<RawAbsorption>,
    #[serde(default)]
    options: RawOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    carrier_frequency_hz: Option<f64>,
    carrier_frequency_thz: Option<f64>,
    temperature_k: f64,
    signal_variance: f64,
    eve_noise: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArrays {
    n_tx: i64,
    n_rx: i64,
    element_gain: Option<f64>,
    element_gain_dbi: Option<f64>,
    element_spacing_over_lambda: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum PathKind {
    Los,
    Nlos,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPath {
    kind: Option<PathKind>,
    length_m: f64,
    aod_deg: Option<f64>,
    aod_rad: Option<f64>,
    aoa_deg: Option<f64>,
    aoa_rad: Option<f64>,
    delay_s: Option<f64>,
    roughness: Option<f64>,
    fresnel_re: Option<f64>,
    fresnel_im: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAbsorption {
    csv: Option<PathBuf>,
    bands: Option<Vec<RawBand>>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Closure {
    Left,
    Right,
    Both,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBand {
    lo_hz: f64,
    hi_hz: f64,
    delta_db_per_km: f64,
    closed: Option<Closure>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    method: Option<String>,
    clamp_negative_channels: Option<bool>,
    fresnel_mode: Option<FresnelMode>,
    rank_tolerance: Option<f64>,
    zeta_constant: Option<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn requirement(field: &str, ok: bool, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

fn one_of(field: &str, a: Option<f64>, b: Option<f64>, a_name: &str, b_name: &str) -> Result<Option<f64>> {
    match (a, b) {
        (Some(_), Some(_)) => Err(Error::config(field, format!("give either {a_name} or {b_name}, not both"))),
        (x, None) => Ok(x),
        (None, y) => Ok(y),
    }
}

fn finite_positive(field: &str, x: f64) -> Result<f64> {
    requirement(field, x > 0.0 && x.is_finite(), "must be finite and > 0")?;
    Ok(x)
}

fn environment(raw: &RawEnvironment) -> Result<EnvironmentParams> {
    let f = match (raw.carrier_frequency_hz, raw.carrier_frequency_thz) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "environment.carrier_frequency_hz",
                "give either carrier_frequency_hz or carrier_frequency_thz, not both",
            ))
        }
        (Some(hz), None) => finite_positive("environment.carrier_frequency_hz", hz)?,
        (None, Some(thz)) => finite_positive("environment.carrier_frequency_thz", thz)? * 1e12,
        (None, None) => return Err(Error::config("environment.carrier_frequency_hz", "missing carrier frequency")),
    };
    let t = finite_positive("environment.temperature_k", raw.temperature_k)?;
    let vs = finite_positive("environment.signal_variance", raw.signal_variance)?;
    requirement("environment.eve_noise", raw.eve_noise >= 1.0 && raw.eve_noise.is_finite(), "must be finite and >= 1")?;
    Ok(EnvironmentParams { carrier_frequency_hz: f, temperature_k: t, signal_variance: vs, eve_noise: raw.eve_noise })
}

fn arrays(raw: &RawArrays) -> Result<ArrayConfig> {
    requirement("arrays.n_tx", raw.n_tx >= 1, "must be >= 1")?;
    requirement("arrays.n_rx", raw.n_rx >= 1, "must be >= 1")?;
    let gain = match (raw.element_gain, raw.element_gain_dbi) {
        (Some(_), Some(_)) => {
            return Err(Error::config("arrays.element_gain", "give either element_gain or element_gain_dbi, not both"))
        }
        (Some(g), None) => finite_positive("arrays.element_gain", g)?,
        (None, Some(dbi)) => {
            requirement("arrays.element_gain_dbi", dbi.is_finite(), "must be finite")?;
            10f64.powf(dbi / 10.0)
        }
        (None, None) => 1.0,
    };
    let spacing = match raw.element_spacing_over_lambda {
        Some(s) => finite_positive("arrays.element_spacing_over_lambda", s)?,
        None => 0.5,
    };
    Ok(ArrayConfig {
        n_tx: raw.n_tx as usize,
        n_rx: raw.n_rx as usize,
        element_gain: gain,
        element_spacing_over_lambda: spacing,
    })
}

fn path(i: usize, raw: &RawPath) -> Result<PathSpec> {
    let field = |name: &str| format!("paths[{i}].{name}");
    let length = finite_positive(&field("length_m"), raw.length_m)?;
    let aod =
        one_of(&field("aod_deg"), raw.aod_deg.map(f64::to_radians), raw.aod_rad, "aod_deg", "aod_rad")?.unwrap_or(0.0);
    let aoa =
        one_of(&field("aoa_deg"), raw.aoa_deg.map(f64::to_radians), raw.aoa_rad, "aoa_deg", "aoa_rad")?.unwrap_or(0.0);
    for (name, theta) in [("aod", aod), ("aoa", aoa)] {
        requirement(
            &field(name),
            theta.abs() < std::f64::consts::FRAC_PI_2,
            "angle must lie strictly between -90 and 90 degrees",
        )?;
    }
    let mut p = match raw.kind.as_ref().unwrap_or(&PathKind::Los) {
        PathKind::Los => {
            for (name, v) in
                [("roughness", raw.roughness), ("fresnel_re", raw.fresnel_re), ("fresnel_im", raw.fresnel_im)]
            {
                requirement(&field(name), v.is_none(), "only applies to nlos paths")?;
            }
            PathSpec::los(length, aod, aoa)
        }
        PathKind::Nlos => {
            let rough = raw.roughness.unwrap_or(1.0);
            requirement(&field("roughness"), (0.0..=1.0).contains(&rough), "must lie in [0, 1]")?;
            let r = Complex64::new(raw.fresnel_re.unwrap_or(1.0), raw.fresnel_im.unwrap_or(0.0));
            requirement(&field("fresnel_re"), r.norm() <= 1.0, "|fresnel| must be <= 1")?;
            PathSpec::nlos(length, aod, aoa, rough, r)
        }
    };
    if let Some(d) = raw.delay_s {
        requirement(&field("delay_s"), d >= 0.0 && d.is_finite(), "must be finite and >= 0")?;
        p.delay_s = d;
    } else {
        p.delay_s = length / constants::SPEED_OF_LIGHT;
    }
    Ok(p)
}

fn absorption(raw: Option<&RawAbsorption>, base_dir: Option<&Path>) -> Result<AbsorptionTable> {
    let Some(raw) = raw else {
        return Ok(AbsorptionTable::default_thz());
    };
    let wrap = |field: &str, e: Error| match e {
        Error::Io { .. } => e,
        other => Error::config(field, other.to_string()),
    };
    match (&raw.csv, &raw.bands) {
        (Some(_), Some(_)) => Err(Error::config("absorption", "give either csv or bands, not both")),
        (Some(csv), None) => {
            let path = match base_dir {
                Some(dir) if csv.is_relative() => dir.join(csv),
                _ => csv.clone(),
            };
            AbsorptionTable::load_csv(&path).map_err(|e| wrap("absorption.csv", e))
        }
        (None, Some(bands)) => {
            let bands = bands
                .iter()
                .map(|b| match b.closed.as_ref().unwrap_or(&Closure::Left) {
                    Closure::Left => Band::left_closed(b.lo_hz, b.hi_hz, b.delta_db_per_km),
                    Closure::Right => Band::right_closed(b.lo_hz, b.hi_hz, b.delta_db_per_km),
                    Closure::Both => Band {
                        lo_hz: b.lo_hz,
                        hi_hz: b.hi_hz,
                        lo_inclusive: true,
                        hi_inclusive: true,
                        delta_db_per_km: b.delta_db_per_km,
                    },
                })
                .collect();
            AbsorptionTable::new(bands).map_err(|e| wrap("absorption.bands", e))
        }
        (None, None) => Ok(AbsorptionTable::default_thz()),
    }
}

fn options(raw: &RawOptions) -> Result<ScenarioOptions> {
    let mut o = ScenarioOptions::default();
    if let Some(m) = &raw.method {
        o.method = m.parse::<RateMethod>().map_err(|e| Error::config("options.method", e.to_string()))?;
    }
    if let Some(c) = raw.clamp_negative_channels {
        o.clamp_negative_channels = c;
    }
    if let Some(f) = raw.fresnel_mode {
        o.fresnel_mode = f;
    }
    if let Some(r) = raw.rank_tolerance {
        requirement("options.rank_tolerance", r > 0.0 && r < 1.0, "must lie in (0, 1)")?;
        o.rank_tolerance = r;
    }
    if let Some(z) = &raw.zeta_constant {
        o.zeta_constant =
            z.parse::<ZetaConstant>().map_err(|e| Error::config("options.zeta_constant", e.to_string()))?;
    }
    Ok(o)
}

/// Parses and validates a scenario. `base_dir` resolves relative CSV paths.
pub fn parse_config_in(text: &str, base_dir: Option<&Path>) -> Result<Scenario> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let env = environment(&raw.environment)?;
    let arrays = arrays(&raw.arrays)?;
    requirement("paths", !raw.paths.is_empty(), "at least one path is required")?;
    let paths = raw.paths.iter().enumerate().map(|(i, p)| path(i, p)).collect::<Result<Vec<_>>>()?;
    let table = absorption(raw.absorption.as_ref(), base_dir)?;
    let opts = options(&raw.options)?;
    Scenario::new(env, arrays, paths, table, opts).map_err(|e| match e {
        Error::InvalidGeometry(m) => Error::config("paths", m),
        other => other,
    })
}

/// Parses a scenario; relative CSV paths resolve against the working directory.
pub fn parse_config(text: &str) -> Result<Scenario> {
    parse_config_in(text, None)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_in(&text, path.parent())
}
