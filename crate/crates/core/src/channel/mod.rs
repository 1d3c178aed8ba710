//! Terahertz MIMO channel: ULA steering vectors, LoS/NLoS path loss with
//! molecular absorption, the multipath channel matrix and its SVD.

mod absorption;
mod decomposition;

pub use absorption::{AbsorptionTable, Band};
pub use decomposition::{
    decompose, effective_parallel_channels, ChannelDecomposition, DEFAULT_RANK_TOLERANCE, OPAQUE_FLOOR,
};

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{constants, EnvironmentParams};

/// Transmit and receive uniform linear arrays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Per-element gain `G_a`, linear.
    pub element_gain: f64,
    /// Inter-element spacing in wavelengths.
    pub element_spacing_over_lambda: f64,
}

impl ArrayConfig {
    pub fn new(n_tx: usize, n_rx: usize, element_gain: f64) -> Result<Self> {
        let a = ArrayConfig { n_tx, n_rx, element_gain, element_spacing_over_lambda: 0.5 };
        a.validate()?;
        Ok(a)
    }

    pub fn square(n: usize, element_gain: f64) -> Result<Self> {
        ArrayConfig::new(n, n, element_gain)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 {
            return Err(Error::InvalidGeometry("n_tx must be >= 1".into()));
        }
        if self.n_rx == 0 {
            return Err(Error::InvalidGeometry("n_rx must be >= 1".into()));
        }
        if !(self.element_gain > 0.0 && self.element_gain.is_finite()) {
            return Err(Error::InvalidGeometry(format!("element gain must be > 0, got {}", self.element_gain)));
        }
        if !(self.element_spacing_over_lambda > 0.0 && self.element_spacing_over_lambda.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "element spacing must be > 0, got {}",
                self.element_spacing_over_lambda
            )));
        }
        Ok(())
    }

    /// Array gains `(G_t, G_r) = (N_t G_a, N_r G_a)`.
    pub fn gains(&self) -> (f64, f64) {
        (self.n_tx as f64 * self.element_gain, self.n_rx as f64 * self.element_gain)
    }
}

/// How the Fresnel coefficient of an NLoS path enters its power gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FresnelMode {
    /// `|r|^2`: the coefficient is an amplitude reflection coefficient.
    #[default]
    Power,
    /// `r` taken literally; must be real.
    Raw,
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub length_m: f64,
    pub aod_rad: f64,
    pub aoa_rad: f64,
    pub delay_s: f64,
    pub is_los: bool,
    /// Rayleigh roughness factor, NLoS only.
    pub roughness: f64,
    /// Fresnel reflection coefficient, NLoS only.
    pub fresnel: Complex64,
}

impl PathSpec {
    /// Line-of-sight path with delay `length / c`.
    pub fn los(length_m: f64, aod_rad: f64, aoa_rad: f64) -> Self {
        PathSpec {
            length_m,
            aod_rad,
            aoa_rad,
            delay_s: length_m / constants::SPEED_OF_LIGHT,
            is_los: true,
            roughness: 1.0,
            fresnel: Complex64::new(1.0, 0.0),
        }
    }

    /// Reflected path with delay `length / c`.
    pub fn nlos(length_m: f64, aod_rad: f64, aoa_rad: f64, roughness: f64, fresnel: Complex64) -> Self {
        PathSpec {
            length_m,
            aod_rad,
            aoa_rad,
            delay_s: length_m / constants::SPEED_OF_LIGHT,
            is_los: false,
            roughness,
            fresnel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        if !(self.length_m > 0.0 && self.length_m.is_finite()) {
            return bad(format!("path length must be > 0, got {}", self.length_m));
        }
        for (name, angle) in [("aod", self.aod_rad), ("aoa", self.aoa_rad)] {
            if !(angle.abs() < FRAC_PI_2) {
                return bad(format!("{name} must lie in (-pi/2, pi/2), got {angle}"));
            }
        }
        if !(self.delay_s >= 0.0 && self.delay_s.is_finite()) {
            return bad(format!("delay must be >= 0, got {}", self.delay_s));
        }
        if !self.is_los {
            if !(0.0..=1.0).contains(&self.roughness) {
                return bad(format!("roughness must lie in [0, 1], got {}", self.roughness));
            }
            if !(self.fresnel.norm() <= 1.0) {
                return bad(format!("|fresnel| must be <= 1, got {}", self.fresnel.norm()));
            }
        }
        Ok(())
    }
}

/// Checks that exactly one path is LoS and that it is the shortest.
pub fn validate_paths(paths: &[PathSpec]) -> Result<()> {
    if paths.is_empty() {
        return Err(Error::InvalidGeometry("at least one path is required".into()));
    }
    for p in paths {
        p.validate()?;
    }
    let los: Vec<&PathSpec> = paths.iter().filter(|p| p.is_los).collect();
    if los.len() != 1 {
        return Err(Error::InvalidGeometry(format!("exactly one LoS path is required, found {}", los.len())));
    }
    let shortest = paths.iter().map(|p| p.length_m).fold(f64::INFINITY, f64::min);
    if los[0].length_m > shortest {
        return Err(Error::InvalidGeometry("the LoS path must be the shortest path".into()));
    }
    Ok(())
}

/// ULA response `(1/sqrt(k)) exp(j 2 pi s m sin(theta))`, `m = 0..k`, with `s` the
/// element spacing in wavelengths.
pub fn steering_vector(k: usize, theta_rad: f64, spacing_over_lambda: f64) -> DVector<Complex64> {
    let norm = 1.0 / (k as f64).sqrt();
    let step = 2.0 * PI * spacing_over_lambda * theta_rad.sin();
    DVector::from_fn(k, |m, _| Complex64::from_polar(norm, step * m as f64))
}

/// Power gain `gamma` of one path, including array gains and absorption.
pub fn path_loss(
    path: &PathSpec,
    env: &EnvironmentParams,
    arrays: &ArrayConfig,
    absorption: &AbsorptionTable,
    fresnel_mode: FresnelMode,
) -> Result<f64> {
    let delta = absorption.lookup(env.carrier_frequency_hz)?;
    let lambda = env.wavelength_m();
    let (g_t, g_r) = arrays.gains();
    let spreading = (lambda / (4.0 * PI * path.length_m)).powi(2);
    let distance_km = path.length_m / 1000.0;
    let absorbed = 10f64.powf(-0.1 * delta * distance_km);
    let los_gain = spreading * g_t * g_r * absorbed;
    if path.is_los {
        return Ok(los_gain);
    }
    let reflection = match fresnel_mode {
        FresnelMode::Power => path.fresnel.norm_sqr(),
        FresnelMode::Raw => {
            if path.fresnel.im != 0.0 {
                return Err(Error::InvalidGeometry("raw Fresnel mode needs a real reflection coefficient".into()));
            }
            path.fresnel.re
        }
    };
    Ok(path.roughness * reflection * los_gain)
}

fn carrier_phase(frequency_hz: f64, delay_s: f64) -> Complex64 {
    // Reduce the cycle count first; f * tau reaches 1e6 cycles at metre scale.
    let cycles = (frequency_hz * delay_s).fract();
    Complex64::from_polar(1.0, 2.0 * PI * cycles)
}

/// `(sqrt(gamma) e^{j 2 pi f tau}, psi_rx, psi_tx)` for one path.
pub(crate) type PathTerm = (Complex64, DVector<Complex64>, DVector<Complex64>);

pub(crate) fn path_terms(
    paths: &[PathSpec],
    env: &EnvironmentParams,
    arrays: &ArrayConfig,
    absorption: &AbsorptionTable,
    fresnel_mode: FresnelMode,
) -> Result<Vec<PathTerm>> {
    validate_paths(paths)?;
    arrays.validate()?;
    let s = arrays.element_spacing_over_lambda;
    paths
        .iter()
        .map(|p| {
            let gamma = path_loss(p, env, arrays, absorption, fresnel_mode)?;
            let coeff = carrier_phase(env.carrier_frequency_hz, p.delay_s) * gamma.sqrt();
            Ok((coeff, steering_vector(arrays.n_rx, p.aoa_rad, s), steering_vector(arrays.n_tx, p.aod_rad, s)))
        })
        .collect()
}

/// `H = sum_l sqrt(gamma_l) e^{j 2 pi f tau_l} psi_rx(aoa_l) psi_tx(aod_l)^dagger`.
///
/// Array gains are applied once, inside `gamma_l`.
pub fn build_channel(
    paths: &[PathSpec],
    env: &EnvironmentParams,
    arrays: &ArrayConfig,
    absorption: &AbsorptionTable,
    fresnel_mode: FresnelMode,
) -> Result<DMatrix<Complex64>> {
    let terms = path_terms(paths, env, arrays, absorption, fresnel_mode)?;
    let mut h = DMatrix::<Complex64>::zeros(arrays.n_rx, arrays.n_tx);
    for (coeff, psi_r, psi_t) in &terms {
        h += (psi_r * psi_t.adjoint()) * *coeff;
    }
    if h.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidGeometry("channel matrix is not finite".into()));
    }
    Ok(h)
}

/// Transmittances of the channel computed from the path factors without forming
/// `H`: with `H = A D B^dagger` and thin QR factors `A = Q_a R_a`, `B = Q_b R_b`,
/// the singular values of `H` are those of the `L x L` core `R_a D R_b^dagger`.
pub fn transmittances_low_rank(
    paths: &[PathSpec],
    env: &EnvironmentParams,
    arrays: &ArrayConfig,
    absorption: &AbsorptionTable,
    fresnel_mode: FresnelMode,
    rank_tolerance: f64,
) -> Result<Vec<f64>> {
    let terms = path_terms(paths, env, arrays, absorption, fresnel_mode)?;
    let l = terms.len();
    let a = DMatrix::from_columns(&terms.iter().map(|t| t.1.clone()).collect::<Vec<_>>());
    let b = DMatrix::from_columns(&terms.iter().map(|t| t.2.clone()).collect::<Vec<_>>());
    let d = DMatrix::from_diagonal(&DVector::from_iterator(l, terms.iter().map(|t| t.0)));
    let r_a = a.qr().r();
    let r_b = b.qr().r();
    let core = r_a * d * r_b.adjoint();
    let singular = core.singular_values();
    let (t, _) = decomposition::transmittances_from_singular_values(singular.as_slice(), rank_tolerance)?;
    Ok(t)
}
