//! Python bindings: scenarios, key rates, experiments and the Gaussian-state
//! primitives.
//!
//! ```python
//! import thz_qkd
//! s = thz_qkd.Scenario.link(32, 15e12, 10.0)
//! s.rate(), s.max_distance(1e-5)
//! ```

use std::collections::HashMap;
use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use thz_qkd::channel::ArrayConfig;
use thz_qkd::cli::mc_validate_table;
use thz_qkd::config::{load_config, parse_config_in};
use thz_qkd::experiments::{frequency_profile, max_distance, max_distance_auto};
use thz_qkd::gaussian::{self, GaussianState};
use thz_qkd::keyrate::{self, RateMethod, ZetaConstant};
use thz_qkd::output::scenario_hash;
use thz_qkd::physics::{self, EnvironmentParams};
use thz_qkd::protocol::{empirical_mutual_information, sample_variance, simulate_transmittances};
use thz_qkd::Error;

create_exception!(thz_qkd, QkdError, PyValueError);

fn err(e: Error) -> PyErr {
    QkdError::new_err(e.to_string())
}

fn method(name: Option<&str>, default: RateMethod) -> PyResult<RateMethod> {
    name.map_or(Ok(default), |m| m.parse().map_err(err))
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("covariance matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// A link: environment, arrays, paths, absorption table and options.
#[pyclass(name = "Scenario", module = "thz_qkd", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: thz_qkd::scenario::Scenario,
}

#[pymethods]
impl PyScenario {
    /// Scenario from TOML text; relative CSV paths resolve against `base_dir`.
    #[staticmethod]
    #[pyo3(signature = (text, base_dir=None))]
    fn from_toml(text: &str, base_dir: Option<PathBuf>) -> PyResult<Self> {
        let inner = parse_config_in(text, base_dir.as_deref()).map_err(err)?;
        Ok(PyScenario { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyScenario { inner: load_config(path).map_err(err)? })
    }

    /// Broadside LoS link with square arrays and the default absorption table.
    #[staticmethod]
    #[pyo3(signature = (n, frequency_hz, distance_m, temperature_k=296.0, signal_variance=1e3, eve_noise=1.0, element_gain=1000.0))]
    fn link(
        n: usize,
        frequency_hz: f64,
        distance_m: f64,
        temperature_k: f64,
        signal_variance: f64,
        eve_noise: f64,
        element_gain: f64,
    ) -> PyResult<Self> {
        let env = EnvironmentParams::new(frequency_hz, temperature_k, signal_variance, eve_noise).map_err(err)?;
        let arrays = ArrayConfig::square(n, element_gain).map_err(err)?;
        let inner = thz_qkd::scenario::Scenario::los(env, arrays, distance_m).map_err(err)?;
        Ok(PyScenario { inner })
    }

    #[getter]
    fn distance_m(&self) -> f64 {
        self.inner.distance_m()
    }

    #[getter]
    fn frequency_hz(&self) -> f64 {
        self.inner.environment.carrier_frequency_hz
    }

    #[getter]
    fn temperature_k(&self) -> f64 {
        self.inner.environment.temperature_k
    }

    #[getter]
    fn n_tx(&self) -> usize {
        self.inner.arrays.n_tx
    }

    #[getter]
    fn n_rx(&self) -> usize {
        self.inner.arrays.n_rx
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.options.method.as_str()
    }

    /// SHA-256 of the canonical serialization.
    #[getter]
    fn sha256(&self) -> String {
        scenario_hash(&self.inner)
    }

    fn with_distance(&self, distance_m: f64) -> PyResult<Self> {
        Ok(PyScenario { inner: self.inner.with_distance(distance_m).map_err(err)? })
    }

    fn with_frequency(&self, frequency_hz: f64) -> PyResult<Self> {
        Ok(PyScenario { inner: self.inner.with_frequency(frequency_hz).map_err(err)? })
    }

    fn with_temperature(&self, temperature_k: f64) -> PyResult<Self> {
        Ok(PyScenario { inner: self.inner.with_temperature(temperature_k).map_err(err)? })
    }

    fn with_array_size(&self, n: usize) -> PyResult<Self> {
        Ok(PyScenario { inner: self.inner.with_array_size(n).map_err(err)? })
    }

    fn vacuum_variance(&self) -> f64 {
        self.inner.vacuum_variance()
    }

    fn transmittances(&self) -> PyResult<Vec<f64>> {
        self.inner.transmittances().map_err(err)
    }

    /// Total key rate in bits per channel use.
    #[pyo3(signature = (method=None))]
    fn rate(&self, method: Option<&str>) -> PyResult<f64> {
        let m = self::method(method, self.inner.options.method)?;
        Ok(self.inner.rate_with(m).map_err(err)?.total_rate_bits)
    }

    /// Per-channel `transmittance`, `mutual_info_bits`, `holevo_bits`, `rate_bits`.
    #[pyo3(signature = (method=None))]
    fn rate_breakdown(&self, method: Option<&str>) -> PyResult<Vec<HashMap<&'static str, f64>>> {
        let m = self::method(method, self.inner.options.method)?;
        let r = self.inner.rate_with(m).map_err(err)?;
        Ok(r.per_channel
            .iter()
            .map(|c| {
                HashMap::from([
                    ("transmittance", c.transmittance),
                    ("mutual_info_bits", c.mutual_info_bits),
                    ("holevo_bits", c.holevo_bits),
                    ("rate_bits", c.rate_bits),
                ])
            })
            .collect())
    }

    fn zeta(&self) -> PyResult<f64> {
        self.inner.zeta().map_err(err)
    }

    /// `(alpha, zeta, feasible)`.
    fn feasibility(&self) -> PyResult<(f64, f64, bool)> {
        let f = self.inner.feasibility().map_err(err)?;
        Ok((f.alpha, f.zeta, f.feasible))
    }

    /// Rates on a distance grid; failed points are NaN.
    #[pyo3(signature = (distances_m, method=None))]
    fn sweep_distance(&self, py: Python<'_>, distances_m: Vec<f64>, method: Option<&str>) -> PyResult<Vec<f64>> {
        let m = self::method(method, self.inner.options.method)?;
        let s = &self.inner;
        Ok(py.detach(|| {
            distances_m
                .iter()
                .map(|&d| s.with_distance(d).and_then(|s| s.rate_with(m)).map_or(f64::NAN, |r| r.total_rate_bits))
                .collect()
        }))
    }

    /// Distance at which the rate falls to `target_rate`; the bracket is found
    /// automatically unless both ends are given.
    #[pyo3(signature = (target_rate=1e-5, method=None, d_lo=None, d_hi=None))]
    fn max_distance(
        &self,
        py: Python<'_>,
        target_rate: f64,
        method: Option<&str>,
        d_lo: Option<f64>,
        d_hi: Option<f64>,
    ) -> PyResult<f64> {
        let m = self::method(method, self.inner.options.method)?;
        let s = &self.inner;
        let result = py.detach(|| match (d_lo, d_hi) {
            (Some(lo), Some(hi)) => max_distance(s, target_rate, m, lo, hi),
            _ => max_distance_auto(s, target_rate, m),
        });
        Ok(result.map_err(err)?.distance_m)
    }

    /// Max distance per frequency; `None` where the point is infeasible or failed.
    #[pyo3(signature = (target_rate, frequencies_hz, method=None))]
    fn frequency_profile(
        &self,
        py: Python<'_>,
        target_rate: f64,
        frequencies_hz: Vec<f64>,
        method: Option<&str>,
    ) -> PyResult<Vec<Option<f64>>> {
        let m = self::method(method, self.inner.options.method)?;
        let s = &self.inner;
        let rows = py.detach(|| frequency_profile(s, target_rate, &frequencies_hz, m)).map_err(err)?;
        Ok(rows.into_iter().map(|r| r.max_distance_m).collect())
    }

    /// Monte Carlo check per channel, as in the `mc-validate` command.
    #[pyo3(signature = (rounds=1_000_000, seed=0))]
    fn mc_validate(&self, py: Python<'_>, rounds: usize, seed: u64) -> PyResult<Vec<HashMap<String, f64>>> {
        let s = &self.inner;
        let table = py.detach(|| mc_validate_table(s, rounds, seed, None)).map_err(err)?;
        Ok(table
            .rows
            .iter()
            .map(|row| table.columns.iter().zip(row).map(|(c, v)| (c.clone(), v.parse().unwrap_or(f64::NAN))).collect())
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario({}x{}, {} THz, {} K, {} m, method={})",
            self.inner.arrays.n_tx,
            self.inner.arrays.n_rx,
            self.inner.environment.carrier_frequency_hz / 1e12,
            self.inner.environment.temperature_k,
            self.inner.distance_m(),
            self.inner.options.method
        )
    }
}

#[pyfunction]
fn vacuum_variance(frequency_hz: f64, temperature_k: f64) -> PyResult<f64> {
    let env = EnvironmentParams::new(frequency_hz, temperature_k, 1.0, 1.0).map_err(err)?;
    Ok(physics::vacuum_variance(&env))
}

#[pyfunction]
fn bosonic_entropy(x: f64) -> PyResult<f64> {
    physics::bosonic_entropy(x).map_err(err)
}

#[pyfunction]
fn mutual_information(t: f64, signal_variance: f64, vacuum_variance: f64, eve_noise: f64) -> PyResult<f64> {
    keyrate::mutual_information(t, signal_variance, vacuum_variance, eve_noise).map_err(err)
}

#[pyfunction]
fn holevo_exact(t: f64, alice_variance: f64, eve_noise: f64) -> PyResult<f64> {
    gaussian::holevo_exact(t, alice_variance, eve_noise).map_err(err)
}

#[pyfunction]
fn holevo_large_modulation(t: f64, alice_variance: f64, eve_noise: f64) -> PyResult<f64> {
    keyrate::holevo_large_modulation(t, alice_variance, eve_noise).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (signal_variance, vacuum_variance, eve_noise, constant="rounded"))]
fn zeta_coefficient(signal_variance: f64, vacuum_variance: f64, eve_noise: f64, constant: &str) -> PyResult<f64> {
    let c: ZetaConstant = constant.parse().map_err(err)?;
    keyrate::zeta_coefficient_with(signal_variance, vacuum_variance, eve_noise, c).map_err(err)
}

/// Rate of one parallel channel.
#[pyfunction]
#[pyo3(signature = (t, signal_variance, vacuum_variance, eve_noise, method="large-modulation"))]
fn rate_per_channel(t: f64, signal_variance: f64, vacuum_variance: f64, eve_noise: f64, method: &str) -> PyResult<f64> {
    let m = self::method(Some(method), RateMethod::LargeModulation)?;
    keyrate::rate_per_channel(t, signal_variance, vacuum_variance, eve_noise, m).map_err(err)
}

/// Symplectic eigenvalues of a covariance matrix in (q1, p1, q2, p2, ...) order.
#[pyfunction]
fn symplectic_eigenvalues(cov: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let state = GaussianState::new(matrix(cov)?).map_err(err)?;
    state.symplectic_eigenvalues().map_err(err)
}

#[pyfunction]
fn von_neumann_entropy(cov: Vec<Vec<f64>>) -> PyResult<f64> {
    let state = GaussianState::new(matrix(cov)?).map_err(err)?;
    state.entropy().map_err(err)
}

#[pyfunction]
fn two_mode_squeezed(w: f64) -> PyResult<Vec<Vec<f64>>> {
    let cov = gaussian::two_mode_squeezed(w).map_err(err)?.cov().clone();
    Ok(cov.row_iter().map(|r| r.iter().copied().collect()).collect())
}

/// Simulates the protocol on the given transmittances and returns, per channel,
/// Bob's sample variance and the empirical mutual information with its standard error.
#[pyfunction]
#[pyo3(signature = (transmittances, frequency_hz, temperature_k, signal_variance, eve_noise, rounds, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    transmittances: Vec<f64>,
    frequency_hz: f64,
    temperature_k: f64,
    signal_variance: f64,
    eve_noise: f64,
    rounds: usize,
    seed: u64,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let env = EnvironmentParams::new(frequency_hz, temperature_k, signal_variance, eve_noise).map_err(err)?;
    py.detach(|| {
        let run = simulate_transmittances(&transmittances, &env, rounds, seed)?;
        let mi = empirical_mutual_information(&run)?;
        Ok(run.channels.iter().zip(mi).map(|(c, m)| (sample_variance(&c.x_bob).value, m.value, m.std_error)).collect())
    })
    .map_err(err)
}

#[pymodule(name = "thz_qkd")]
fn thz_qkd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QkdError", m.py().get_type::<QkdError>())?;
    m.add("RATE_METHODS", RateMethod::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>())?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(vacuum_variance, m)?)?;
    m.add_function(wrap_pyfunction!(bosonic_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_information, m)?)?;
    m.add_function(wrap_pyfunction!(holevo_exact, m)?)?;
    m.add_function(wrap_pyfunction!(holevo_large_modulation, m)?)?;
    m.add_function(wrap_pyfunction!(zeta_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(rate_per_channel, m)?)?;
    m.add_function(wrap_pyfunction!(symplectic_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(von_neumann_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(two_mode_squeezed, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
