//! Parameter sweeps and the max-distance solver.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::{zeta_coefficient_with, RateMethod, ZetaConstant};
use crate::physics::{thermal_occupation, EnvironmentParams};
use crate::scenario::Scenario;

/// Bisection stops when `(d_hi - d_lo) / d_hi` falls below this.
pub const BISECTION_REL_WIDTH: f64 = 1e-4;

const AUTO_BRACKET_START_M: f64 = 1e-3;
const AUTO_BRACKET_MAX_M: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    DistanceM,
    FrequencyHz,
    TemperatureK,
    ArraySize,
}

impl SweepParameter {
    pub fn column_name(self) -> &'static str {
        match self {
            SweepParameter::DistanceM => "distance_m",
            SweepParameter::FrequencyHz => "frequency_hz",
            SweepParameter::TemperatureK => "temperature_k",
            SweepParameter::ArraySize => "array_size",
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column_name())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "distance_m" | "distance" => Ok(SweepParameter::DistanceM),
            "frequency_hz" | "frequency" => Ok(SweepParameter::FrequencyHz),
            "temperature_k" | "temperature" => Ok(SweepParameter::TemperatureK),
            "array_size" => Ok(SweepParameter::ArraySize),
            other => Err(Error::InvalidSweep(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub scenario: Scenario,
    pub methods: Vec<RateMethod>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidSweep("grid is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidSweep("no methods selected".into()));
        }
        if self.grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSweep("grid has non-finite values".into()));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSweep("grid must be strictly increasing".into()));
        }
        if self.parameter == SweepParameter::ArraySize && self.grid.iter().any(|&n| n < 1.0 || n.fract() != 0.0) {
            return Err(Error::InvalidSweep("array sizes must be positive integers".into()));
        }
        self.scenario.validate()
    }

    fn scenario_at(&self, value: f64) -> Result<Scenario> {
        match self.parameter {
            SweepParameter::DistanceM => self.scenario.with_distance(value),
            SweepParameter::FrequencyHz => self.scenario.with_frequency(value),
            SweepParameter::TemperatureK => self.scenario.with_temperature(value),
            SweepParameter::ArraySize => self.scenario.with_array_size(value as usize),
        }
    }
}

/// One `(grid point, method)` result. Failed points carry the error message and
/// NaN in the numeric fields they could not compute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter_value: f64,
    pub method: RateMethod,
    pub total_rate_bits: f64,
    pub per_channel_rates: Vec<f64>,
    pub zeta: f64,
    pub alpha: f64,
    pub feasible: bool,
    pub error: Option<String>,
}

fn sweep_point(spec: &SweepSpec, value: f64) -> Vec<SweepRow> {
    let failed = |method: RateMethod, zeta: f64, alpha: f64, e: &Error| SweepRow {
        parameter_value: value,
        method,
        total_rate_bits: f64::NAN,
        per_channel_rates: Vec::new(),
        zeta,
        alpha,
        feasible: false,
        error: Some(e.to_string()),
    };
    let prepared = spec.scenario_at(value).and_then(|s| {
        let t = s.transmittances()?;
        let f = crate::keyrate::feasibility_from_transmittances(&t, &s.environment, s.options.zeta_constant)?;
        Ok((s, t, f))
    });
    let (scenario, transmittances, feas) = match prepared {
        Ok(p) => p,
        Err(e) => {
            let zeta = spec.scenario_at(value).and_then(|s| s.zeta()).unwrap_or(f64::NAN);
            return spec.methods.iter().map(|&m| failed(m, zeta, f64::NAN, &e)).collect();
        }
    };
    spec.methods
        .iter()
        .map(|&method| {
            match crate::keyrate::rate_from_transmittances(
                &transmittances,
                &scenario.environment,
                method,
                &scenario.options.rate_options(),
            ) {
                Ok(r) => SweepRow {
                    parameter_value: value,
                    method,
                    total_rate_bits: r.total_rate_bits,
                    per_channel_rates: r.per_channel.iter().map(|c| c.rate_bits).collect(),
                    zeta: feas.zeta,
                    alpha: feas.alpha,
                    feasible: feas.feasible,
                    error: None,
                },
                Err(e) => failed(method, feas.zeta, feas.alpha, &e),
            }
        })
        .collect()
}

/// Evaluates every grid point for every method. Points run concurrently; rows come
/// back in grid order, methods in the order given.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let rows: Vec<Vec<SweepRow>> = spec.grid.par_iter().map(|&v| sweep_point(spec, v)).collect();
    Ok(rows.into_iter().flatten().collect())
}

/// `n` points spaced evenly in `log10` from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|k| match k {
                    0 => lo,
                    k if k == n - 1 => hi,
                    k => 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64),
                })
                .collect()
        }
    }
}

/// `lo, lo + step, ...` up to `hi` (inclusive within half a step), computed as
/// `lo + k step` to avoid drift.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 0.5).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

/// 0.01 m to 1000 m, ten points per decade.
pub fn default_distance_grid() -> Vec<f64> {
    log_space(0.01, 1000.0, 51)
}

/// 10 THz to 30 THz in 0.1 THz steps.
pub fn default_frequency_grid() -> Vec<f64> {
    (100..=300).map(|k| k as f64 * 1e11).collect()
}

/// 100 K to 400 K in 5 K steps.
pub fn default_temperature_grid() -> Vec<f64> {
    linear_grid(100.0, 400.0, 5.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxDistance {
    pub distance_m: f64,
    /// Rate at `distance_m`.
    pub rate_bits: f64,
    /// Final bracket.
    pub d_lo: f64,
    pub d_hi: f64,
    pub iterations: usize,
    /// `|rate - target|` divided by `|local slope| * bracket width`; at most about 1
    /// for a converged, well-behaved solve.
    pub posterior_ratio: f64,
}

fn rate_at(scenario: &Scenario, method: RateMethod, d: f64) -> Result<f64> {
    Ok(scenario.with_distance(d)?.rate_with(method)?.total_rate_bits)
}

/// Distance at which the total rate falls to `target_rate`, by bisection on a
/// bracket with `rate(d_lo) > target > rate(d_hi)`. Every midpoint is checked to
/// sit between its neighbours so a non-monotone rate is reported, not hidden.
///
/// The carrier frequency is fixed during the solve, so the absorption coefficient
/// is constant across the bracket and no band-edge splitting is needed.
pub fn max_distance(
    scenario: &Scenario,
    target_rate: f64,
    method: RateMethod,
    d_lo: f64,
    d_hi: f64,
) -> Result<MaxDistance> {
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(Error::domain("target_rate", target_rate, "must be finite and > 0"));
    }
    if !(d_lo > 0.0 && d_hi > d_lo && d_hi.is_finite()) {
        return Err(Error::InvalidSweep(format!("distance bracket [{d_lo}, {d_hi}] must satisfy 0 < d_lo < d_hi")));
    }
    let (mut lo, mut hi) = (d_lo, d_hi);
    let mut r_lo = rate_at(scenario, method, lo)?;
    let mut r_hi = rate_at(scenario, method, hi)?;
    if !(r_lo > target_rate && target_rate > r_hi) {
        return Err(Error::Bracketing { target: target_rate, d_lo: lo, d_hi: hi, rate_lo: r_lo, rate_hi: r_hi });
    }
    let mut iterations = 0;
    while (hi - lo) / hi > BISECTION_REL_WIDTH {
        let mid = 0.5 * (lo + hi);
        let r_mid = rate_at(scenario, method, mid)?;
        if !(r_mid <= r_lo && r_mid >= r_hi) {
            return Err(Error::NonMonotone { d_a: lo, d_b: hi });
        }
        if r_mid > target_rate {
            lo = mid;
            r_lo = r_mid;
        } else {
            hi = mid;
            r_hi = r_mid;
        }
        iterations += 1;
    }
    let d = 0.5 * (lo + hi);
    let rate = rate_at(scenario, method, d)?;
    let slope = (r_hi - r_lo) / (hi - lo);
    let posterior_ratio = (rate - target_rate).abs() / (slope.abs() * (hi - lo));
    Ok(MaxDistance { distance_m: d, rate_bits: rate, d_lo: lo, d_hi: hi, iterations, posterior_ratio })
}

/// Finds a bracket automatically: `d_lo` doubles from 1 mm until the channel is
/// physical (all transmittances at most 1), then `d_hi` doubles until the rate
/// drops below the target.
pub fn auto_bracket(scenario: &Scenario, target_rate: f64, method: RateMethod) -> Result<(f64, f64)> {
    let mut d_lo = AUTO_BRACKET_START_M;
    let r_lo = loop {
        match rate_at(scenario, method, d_lo) {
            Ok(r) => break r,
            Err(Error::NonPhysicalTransmittance(_)) if d_lo < AUTO_BRACKET_MAX_M => d_lo *= 2.0,
            Err(e) => return Err(e),
        }
    };
    let bracket_error =
        |d_hi: f64, rate_hi: f64| Error::Bracketing { target: target_rate, d_lo, d_hi, rate_lo: r_lo, rate_hi };
    if !(r_lo > target_rate) {
        return Err(bracket_error(d_lo, r_lo));
    }
    let mut d_hi = d_lo;
    loop {
        d_hi *= 2.0;
        let r = match rate_at(scenario, method, d_hi) {
            Ok(r) => r,
            // Beyond the opaque floor the rate is certainly below any positive target.
            Err(Error::OpaqueChannel(_)) => return Ok((d_lo, d_hi)),
            Err(e) => return Err(e),
        };
        if r < target_rate {
            return Ok((d_lo, d_hi));
        }
        if d_hi > AUTO_BRACKET_MAX_M {
            return Err(bracket_error(d_hi, r));
        }
    }
}

/// [`max_distance`] on a bracket from [`auto_bracket`].
pub fn max_distance_auto(scenario: &Scenario, target_rate: f64, method: RateMethod) -> Result<MaxDistance> {
    let (lo, hi) = auto_bracket(scenario, target_rate, method)?;
    max_distance(scenario, target_rate, method, lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub frequency_hz: f64,
    pub zeta: f64,
    /// `None` when the point is infeasible or failed.
    pub max_distance_m: Option<f64>,
    pub feasible: bool,
    pub error: Option<String>,
}

fn profile_point(scenario: &Scenario, target_rate: f64, method: RateMethod, f: f64) -> ProfileRow {
    let mut row = ProfileRow { frequency_hz: f, zeta: f64::NAN, max_distance_m: None, feasible: false, error: None };
    let result = (|| -> Result<()> {
        let s = scenario.with_frequency(f)?;
        row.zeta = s.zeta()?;
        let bracket = auto_bracket(&s, target_rate, method);
        let d_lo = match &bracket {
            Ok((lo, _)) => *lo,
            Err(Error::Bracketing { d_lo, .. }) => *d_lo,
            Err(_) => return bracket.map(|_| ()),
        };
        // alpha only grows with distance, so the shortest physical distance decides.
        let feas = s.with_distance(d_lo)?.feasibility()?;
        if !feas.feasible {
            return Ok(());
        }
        row.feasible = true;
        let (lo, hi) = bracket?;
        row.max_distance_m = Some(max_distance(&s, target_rate, method, lo, hi)?.distance_m);
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// Max distance at each carrier frequency. Points with `zeta <= alpha` are marked
/// infeasible; other failures are recorded in the row.
pub fn frequency_profile(
    scenario: &Scenario,
    target_rate: f64,
    freq_grid: &[f64],
    method: RateMethod,
) -> Result<Vec<ProfileRow>> {
    scenario.validate()?;
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(Error::domain("target_rate", target_rate, "must be finite and > 0"));
    }
    if freq_grid.is_empty() || freq_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSweep("frequency grid must be nonempty and strictly increasing".into()));
    }
    Ok(freq_grid.par_iter().map(|&f| profile_point(scenario, target_rate, method, f)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaRow {
    pub temperature_k: f64,
    pub frequency_hz: f64,
    pub vacuum_variance: f64,
    pub zeta: f64,
}

/// `zeta` on a temperature-by-frequency grid; rows ordered by frequency, then
/// temperature.
pub fn zeta_vs_temperature(
    frequencies_hz: &[f64],
    temperatures_k: &[f64],
    signal_variance: f64,
    eve_noise: f64,
    constant: ZetaConstant,
) -> Result<Vec<ZetaRow>> {
    let mut rows = Vec::with_capacity(frequencies_hz.len() * temperatures_k.len());
    for &f in frequencies_hz {
        for &t in temperatures_k {
            EnvironmentParams::new(f, t, signal_variance, eve_noise)?;
            let v0 = 2.0 * thermal_occupation(f, t) + 1.0;
            rows.push(ZetaRow {
                temperature_k: t,
                frequency_hz: f,
                vacuum_variance: v0,
                zeta: zeta_coefficient_with(signal_variance, v0, eve_noise, constant)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ArrayConfig;
    use approx::assert_relative_eq;

    fn scenario(n: usize, f: f64) -> Scenario {
        let env = EnvironmentParams::new(f, 296.0, 1000.0, 1.0).unwrap();
        Scenario::los(env, ArrayConfig::square(n, 1000.0).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn grids() {
        let g = default_distance_grid();
        assert_eq!(g.first(), Some(&0.01));
        assert_eq!(g.last(), Some(&1000.0));
        assert_relative_eq!(g[10], 0.1, max_relative = 1e-12);
        let f = default_frequency_grid();
        assert_eq!(f.len(), 201);
        assert_eq!(f[40], 14e12);
        let t = default_temperature_grid();
        assert_eq!((t[0], *t.last().unwrap(), t.len()), (100.0, 400.0, 61));
    }

    #[test]
    fn distance_sweep_is_ordered_and_decreasing() {
        let spec = SweepSpec {
            parameter: SweepParameter::DistanceM,
            grid: log_space(1.0, 100.0, 21),
            scenario: scenario(32, 15e12),
            methods: vec![RateMethod::LargeModulation, RateMethod::Taylor],
        };
        let rows = sweep(&spec).unwrap();
        assert_eq!(rows.len(), 42);
        for (k, pair) in rows.chunks(2).enumerate() {
            assert_eq!(pair[0].parameter_value, spec.grid[k]);
            assert_eq!(pair[0].method, RateMethod::LargeModulation);
            assert_eq!(pair[1].method, RateMethod::Taylor);
        }
        let lm: Vec<f64> = rows.iter().step_by(2).map(|r| r.total_rate_bits).collect();
        assert!(lm.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(sweep(&spec).unwrap(), rows);
    }

    #[test]
    fn sweep_records_point_errors() {
        let spec = SweepSpec {
            parameter: SweepParameter::FrequencyHz,
            grid: vec![5e12, 15e12],
            scenario: scenario(8, 15e12).with_distance(3.0).unwrap(),
            methods: vec![RateMethod::Exact],
        };
        let rows = sweep(&spec).unwrap();
        assert!(rows[0].error.as_deref().unwrap().contains("not covered"));
        assert!(rows[0].total_rate_bits.is_nan());
        assert!(rows[1].error.is_none() && rows[1].total_rate_bits > 0.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = SweepSpec {
            parameter: SweepParameter::ArraySize,
            grid: vec![4.0, 8.0],
            scenario: scenario(8, 15e12),
            methods: vec![RateMethod::Taylor],
        };
        assert!(sweep(&base).is_ok());
        let mut s = base.clone();
        s.grid = vec![8.0, 4.0];
        assert!(matches!(sweep(&s), Err(Error::InvalidSweep(_))));
        s.grid = vec![2.5];
        assert!(sweep(&s).is_err());
        s.grid = vec![];
        assert!(sweep(&s).is_err());
        let mut s = base;
        s.methods.clear();
        assert!(sweep(&s).is_err());
    }

    #[test]
    fn max_distance_hits_target() {
        let s = scenario(32, 15e12);
        let m = max_distance(&s, 1e-5, RateMethod::LargeModulation, 1.0, 100.0).unwrap();
        assert!((m.d_hi - m.d_lo) / m.d_hi <= BISECTION_REL_WIDTH);
        assert_relative_eq!(m.rate_bits, 1e-5, max_relative = 1e-3);
        assert!(m.posterior_ratio <= 1.0);
        let auto = max_distance_auto(&s, 1e-5, RateMethod::LargeModulation).unwrap();
        assert_relative_eq!(auto.distance_m, m.distance_m, max_relative = 2e-4);
    }

    #[test]
    fn bracketing_failure_reports_rates() {
        let s = scenario(32, 15e12);
        match max_distance(&s, 1e-5, RateMethod::LargeModulation, 50.0, 100.0) {
            Err(Error::Bracketing { rate_lo, rate_hi, .. }) => assert!(rate_lo < 1e-5 && rate_hi < rate_lo),
            other => panic!("expected a bracketing error, got {other:?}"),
        }
        assert!(max_distance(&s, 1e-5, RateMethod::LargeModulation, 10.0, 5.0).is_err());
        assert!(max_distance(&s, -1.0, RateMethod::LargeModulation, 1.0, 5.0).is_err());
    }

    #[test]
    fn profile_jumps_at_band_edge() {
        let rows =
            frequency_profile(&scenario(32, 15e12), 1e-5, &[13.9e12, 14e12, 14.1e12], RateMethod::LargeModulation)
                .unwrap();
        let d: Vec<f64> = rows.iter().map(|r| r.max_distance_m.unwrap()).collect();
        assert!(d[1] < d[0]);
        assert!(d[2] > 1.02 * d[1]);
    }

    #[test]
    fn profile_flags_infeasible_and_uncovered_points() {
        let mut s = scenario(32, 15e12);
        s.absorption = crate::channel::AbsorptionTable::uniform(0.5e12, 30e12, 50.0).unwrap();
        let rows = frequency_profile(&s, 1e-5, &[1e12, 15e12, 31e12], RateMethod::LargeModulation).unwrap();
        assert!(!rows[0].feasible && rows[0].max_distance_m.is_none() && rows[0].error.is_none());
        assert!(rows[0].zeta < 0.0);
        assert!(rows[1].feasible && rows[1].max_distance_m.unwrap() > 1.0);
        assert!(rows[2].error.is_some());
    }

    #[test]
    fn zeta_temperature_table() {
        let rows = zeta_vs_temperature(&[1e12, 15e12], &[100.0, 296.0], 1000.0, 1.0, ZetaConstant::Rounded).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[1].zeta < 0.0);
        assert!(rows[3].zeta > 0.0);
        assert!(rows[2].zeta > rows[3].zeta);
    }
}
