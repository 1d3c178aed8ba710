//! A complete link description: environment, arrays, propagation paths,
//! absorption table and evaluation options.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{
    build_channel, decompose, transmittances_low_rank, validate_paths, AbsorptionTable, ArrayConfig,
    ChannelDecomposition, FresnelMode, PathSpec, DEFAULT_RANK_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::keyrate::{
    feasibility_from_transmittances, rate_from_transmittances, zeta_coefficient_with, Feasibility, RateBreakdown,
    RateMethod, RateOptions, ZetaConstant,
};
use crate::physics::{constants, vacuum_variance, EnvironmentParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioOptions {
    pub method: RateMethod,
    pub clamp_negative_channels: bool,
    pub fresnel_mode: FresnelMode,
    pub rank_tolerance: f64,
    pub zeta_constant: ZetaConstant,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            method: RateMethod::LargeModulation,
            clamp_negative_channels: false,
            fresnel_mode: FresnelMode::Power,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            zeta_constant: ZetaConstant::Rounded,
        }
    }
}

impl ScenarioOptions {
    pub fn rate_options(&self) -> RateOptions {
        RateOptions { clamp_negative_channels: self.clamp_negative_channels, zeta_constant: self.zeta_constant }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub environment: EnvironmentParams,
    pub arrays: ArrayConfig,
    pub paths: Vec<PathSpec>,
    pub absorption: AbsorptionTable,
    pub options: ScenarioOptions,
}

impl Scenario {
    pub fn new(
        environment: EnvironmentParams,
        arrays: ArrayConfig,
        paths: Vec<PathSpec>,
        absorption: AbsorptionTable,
        options: ScenarioOptions,
    ) -> Result<Self> {
        let s = Scenario { environment, arrays, paths, absorption, options };
        s.validate()?;
        Ok(s)
    }

    /// Single broadside LoS path of length `distance_m` with the default
    /// absorption table and options.
    pub fn los(environment: EnvironmentParams, arrays: ArrayConfig, distance_m: f64) -> Result<Self> {
        Scenario::new(
            environment,
            arrays,
            vec![PathSpec::los(distance_m, 0.0, 0.0)],
            AbsorptionTable::default_thz(),
            ScenarioOptions::default(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        self.arrays.validate()?;
        validate_paths(&self.paths)?;
        if !(self.options.rank_tolerance > 0.0 && self.options.rank_tolerance < 1.0) {
            return Err(Error::domain("rank_tolerance", self.options.rank_tolerance, "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Length of the LoS path.
    pub fn distance_m(&self) -> f64 {
        self.paths.iter().find(|p| p.is_los).map_or(f64::NAN, |p| p.length_m)
    }

    /// Scales the whole geometry so that the LoS path has length `distance_m`.
    /// Angles are unchanged; delays scale with the lengths.
    pub fn with_distance(&self, distance_m: f64) -> Result<Scenario> {
        if !(distance_m > 0.0 && distance_m.is_finite()) {
            return Err(Error::domain("distance_m", distance_m, "must be finite and > 0"));
        }
        let factor = distance_m / self.distance_m();
        let mut s = self.clone();
        for p in &mut s.paths {
            if p.is_los {
                p.length_m = distance_m;
                p.delay_s = distance_m / constants::SPEED_OF_LIGHT;
            } else {
                p.length_m *= factor;
                p.delay_s *= factor;
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn with_frequency(&self, frequency_hz: f64) -> Result<Scenario> {
        let mut s = self.clone();
        s.environment.carrier_frequency_hz = frequency_hz;
        s.validate()?;
        Ok(s)
    }

    pub fn with_temperature(&self, temperature_k: f64) -> Result<Scenario> {
        let mut s = self.clone();
        s.environment.temperature_k = temperature_k;
        s.validate()?;
        Ok(s)
    }

    /// Both arrays set to `n` elements.
    pub fn with_array_size(&self, n: usize) -> Result<Scenario> {
        let mut s = self.clone();
        s.arrays.n_tx = n;
        s.arrays.n_rx = n;
        s.validate()?;
        Ok(s)
    }

    pub fn with_method(&self, method: RateMethod) -> Scenario {
        let mut s = self.clone();
        s.options.method = method;
        s
    }

    pub fn vacuum_variance(&self) -> f64 {
        vacuum_variance(&self.environment)
    }

    pub fn channel_matrix(&self) -> Result<DMatrix<Complex64>> {
        build_channel(&self.paths, &self.environment, &self.arrays, &self.absorption, self.options.fresnel_mode)
    }

    /// Full SVD of the channel matrix with completed unitaries.
    pub fn decompose(&self) -> Result<ChannelDecomposition> {
        decompose(&self.channel_matrix()?, self.options.rank_tolerance)
    }

    /// Eigenmode transmittances, computed from the `L x L` path core so the cost
    /// does not grow with the array sizes beyond forming the steering vectors.
    pub fn transmittances(&self) -> Result<Vec<f64>> {
        transmittances_low_rank(
            &self.paths,
            &self.environment,
            &self.arrays,
            &self.absorption,
            self.options.fresnel_mode,
            self.options.rank_tolerance,
        )
    }

    pub fn rate_with(&self, method: RateMethod) -> Result<RateBreakdown> {
        let t = self.transmittances()?;
        rate_from_transmittances(&t, &self.environment, method, &self.options.rate_options())
    }

    /// Rate with the configured method.
    pub fn rate(&self) -> Result<RateBreakdown> {
        self.rate_with(self.options.method)
    }

    pub fn zeta(&self) -> Result<f64> {
        zeta_coefficient_with(
            self.environment.signal_variance,
            self.vacuum_variance(),
            self.environment.eve_noise,
            self.options.zeta_constant,
        )
    }

    pub fn feasibility(&self) -> Result<Feasibility> {
        let t = self.transmittances()?;
        feasibility_from_transmittances(&t, &self.environment, self.options.zeta_constant)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::rate_mimo;
    use approx::assert_relative_eq;

    fn link(n: usize, d: f64) -> Scenario {
        let env = EnvironmentParams::new(15e12, 296.0, 1000.0, 1.0).unwrap();
        Scenario::los(env, ArrayConfig::square(n, 1000.0).unwrap(), d).unwrap()
    }

    fn multipath() -> Scenario {
        let mut s = link(16, 5.0);
        s.paths.push(PathSpec::nlos(7.0, 0.4, -0.3, 0.8, Complex64::new(0.5, 0.2)));
        s.paths.push(PathSpec::nlos(9.5, -0.6, 0.7, 0.6, Complex64::new(-0.3, 0.1)));
        s.validate().unwrap();
        s
    }

    #[test]
    fn low_rank_and_full_routes_agree() {
        for s in [link(32, 10.0), multipath()] {
            let full = s.decompose().unwrap().transmittances;
            let fast = s.transmittances().unwrap();
            assert_eq!(full.len(), fast.len());
            for (a, b) in full.iter().zip(&fast) {
                assert_relative_eq!(a, b, max_relative = 1e-9);
            }
            let via_dec = rate_mimo(
                &s.decompose().unwrap(),
                &s.environment,
                RateMethod::LargeModulation,
                &RateOptions::default(),
            )
            .unwrap();
            assert_relative_eq!(via_dec.total_rate_bits, s.rate().unwrap().total_rate_bits, max_relative = 1e-9);
        }
    }

    #[test]
    fn with_distance_scales_geometry() {
        let s = multipath().with_distance(10.0).unwrap();
        assert_eq!(s.distance_m(), 10.0);
        assert_relative_eq!(s.paths[1].length_m, 14.0, max_relative = 1e-15);
        assert_relative_eq!(s.paths[2].delay_s, 19.0 / constants::SPEED_OF_LIGHT, max_relative = 1e-15);
        assert!(link(4, 1.0).with_distance(0.0).is_err());
    }

    #[test]
    fn link_operating_point_rate() {
        let r = link(32, 10.0).rate().unwrap();
        assert_eq!(r.per_channel.len(), 1);
        assert!(r.total_rate_bits > 1e-5 && r.total_rate_bits < 1e-4, "{}", r.total_rate_bits);
    }

    #[test]
    fn rate_decreases_with_distance() {
        let s = link(32, 1.0);
        let mut last = f64::INFINITY;
        for d in [2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            let r = s.with_distance(d).unwrap().rate().unwrap().total_rate_bits;
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn modifiers_validate() {
        let s = link(8, 3.0);
        assert!(s.with_array_size(0).is_err());
        assert!(s.with_temperature(-1.0).is_err());
        assert_eq!(s.with_frequency(20e12).unwrap().environment.carrier_frequency_hz, 20e12);
        assert!(matches!(s.with_frequency(5e12).unwrap().rate(), Err(Error::FrequencyNotCovered(_))));
        assert!(s.with_distance(1e-3).unwrap().rate().is_err());
    }

    #[test]
    fn feasibility_at_room_temperature() {
        assert!(link(32, 10.0).feasibility().unwrap().feasible);
        let mut noisy = link(32, 10.0);
        noisy.environment.eve_noise = 3.0;
        assert!(!noisy.feasibility().unwrap().feasible);
    }
}
