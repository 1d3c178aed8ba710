//! Sample-level simulation of Gaussian-modulated coherent states sent over the
//! parallel eigenmode channels with an entangling-cloner eavesdropper.
//!
//! Every state and measurement is Gaussian, so homodyne outcomes are drawn as
//! classical Gaussian variables with the right covariances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelDecomposition;
use crate::error::{Error, Result};
use crate::gaussian::Quadrature;
use crate::physics::{vacuum_variance, EnvironmentParams};

/// Generator identity written into output metadata. Channel `i` uses stream `i`
/// of a ChaCha20 generator keyed by the seed.
pub const RNG_ID: &str = "ChaCha20Rng/rand_chacha-0.9;stream=channel;normal=rand_distr-0.5";

/// Minimum rounds for the mutual-information estimator.
pub const MIN_MI_ROUNDS: usize = 10_000;

const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Samples of one parallel channel, one entry per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSamples {
    pub transmittance: f64,
    pub quadrature: Vec<Quadrature>,
    pub x_alice: Vec<f64>,
    pub x_bob: Vec<f64>,
    /// Eve's stored beam-splitter output for the measured quadrature.
    pub x_eve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub n_rounds: usize,
    pub seed: u64,
    pub channels: Vec<ChannelSamples>,
}

fn simulate_channel(t: f64, vs: f64, v0: f64, w: f64, n_rounds: usize, seed: u64, stream: u64) -> ChannelSamples {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let signal = Normal::new(0.0, vs.sqrt()).expect("validated variance");
    let prep = Normal::new(0.0, v0.sqrt()).expect("validated variance");
    let eve = Normal::new(0.0, w.sqrt()).expect("validated variance");
    let (st, sr) = (t.sqrt(), (1.0 - t).sqrt());
    let mut out = ChannelSamples {
        transmittance: t,
        quadrature: Vec::with_capacity(n_rounds),
        x_alice: Vec::with_capacity(n_rounds),
        x_bob: Vec::with_capacity(n_rounds),
        x_eve: Vec::with_capacity(n_rounds),
    };
    for _ in 0..n_rounds {
        let q = if rng.random::<bool>() { Quadrature::P } else { Quadrature::Q };
        let s = signal.sample(&mut rng);
        let v = prep.sample(&mut rng);
        let e = eve.sample(&mut rng);
        let a = s + v;
        out.quadrature.push(q);
        out.x_alice.push(s);
        out.x_bob.push(st * a + sr * e);
        out.x_eve.push(-sr * a + st * e);
    }
    out
}

/// Runs the protocol on explicit transmittances. Channels run in parallel on
/// independent streams, so the result depends only on the inputs and seed.
pub fn simulate_transmittances(
    transmittances: &[f64],
    env: &EnvironmentParams,
    n_rounds: usize,
    seed: u64,
) -> Result<ProtocolRun> {
    env.validate()?;
    if n_rounds == 0 {
        return Err(Error::domain("n_rounds", 0.0, "must be >= 1"));
    }
    if let Some(&t) = transmittances.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::domain("transmittance", t, "must lie in [0, 1]"));
    }
    let v0 = vacuum_variance(env);
    let channels = transmittances
        .par_iter()
        .enumerate()
        .map(|(i, &t)| simulate_channel(t, env.signal_variance, v0, env.eve_noise, n_rounds, seed, i as u64))
        .collect();
    Ok(ProtocolRun { n_rounds, seed, channels })
}

pub fn simulate(
    dec: &ChannelDecomposition,
    env: &EnvironmentParams,
    n_rounds: usize,
    seed: u64,
) -> Result<ProtocolRun> {
    simulate_transmittances(&dec.transmittances, env, n_rounds, seed)
}

/// Eve's stored-quadrature samples per channel.
pub fn eve_ancilla_samples(run: &ProtocolRun) -> Vec<&[f64]> {
    run.channels.iter().map(|c| c.x_eve.as_slice()).collect()
}

/// A sample statistic with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `|value - expected|` in units of the standard error.
    pub fn z_score(&self, expected: f64) -> f64 {
        (self.value - expected).abs() / self.std_error
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; the standard error is `s^2 sqrt(2/(n-1))`.
pub fn sample_variance(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n < 2 {
        return Estimate { value: f64::NAN, std_error: f64::NAN };
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    Estimate { value: var, std_error: var * (2.0 / (n - 1) as f64).sqrt() }
}

/// Sample covariance (unbiased).
pub fn sample_covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (xs.len().min(ys.len()) - 1) as f64
}

/// Pearson correlation.
pub fn sample_correlation(xs: &[f64], ys: &[f64]) -> f64 {
    sample_covariance(xs, ys) / (sample_variance(xs).value * sample_variance(ys).value).sqrt()
}

/// Gaussian plug-in estimate `1/2 log2(Var(b) / Var(b | a))`, where the
/// conditional variance is the residual of the least-squares fit of `b` on `a`.
/// This equals `-1/2 log2(1 - rho^2)`; the standard error follows from the
/// delta method, `|rho| / (ln 2 sqrt(n))`, floored at the estimator's bias scale.
pub fn gaussian_mutual_information(a: &[f64], b: &[f64]) -> Result<Estimate> {
    let n = a.len().min(b.len());
    if n < MIN_MI_ROUNDS {
        return Err(Error::DegenerateSamples(format!("{n} rounds, the estimator needs at least {MIN_MI_ROUNDS}")));
    }
    let (a, b) = (&a[..n], &b[..n]);
    let va = sample_variance(a).value;
    if !(va >= DEGENERATE_VARIANCE) {
        return Err(Error::DegenerateSamples(format!("Alice's sample variance is {va:e}")));
    }
    let vb = sample_variance(b).value;
    if !(vb >= DEGENERATE_VARIANCE) {
        return Err(Error::DegenerateSamples(format!("Bob's sample variance is {vb:e}")));
    }
    let cov = sample_covariance(a, b);
    let slope = cov / va;
    let residual = vb - slope * cov;
    let rho = cov / (va * vb).sqrt();
    let ln2 = std::f64::consts::LN_2;
    Ok(Estimate {
        value: 0.5 * (vb / residual).log2(),
        std_error: (rho.abs() / (ln2 * (n as f64).sqrt())).max(1.0 / (n as f64 * ln2)),
    })
}

/// Per-channel mutual information between Alice's encoded value and Bob's outcome.
pub fn empirical_mutual_information(run: &ProtocolRun) -> Result<Vec<Estimate>> {
    run.channels.iter().map(|c| gaussian_mutual_information(&c.x_alice, &c.x_bob)).collect()
}

/// Mutual information restricted to rounds in which `quadrature` was chosen.
pub fn mutual_information_for_quadrature(samples: &ChannelSamples, quadrature: Quadrature) -> Result<Estimate> {
    let (a, b): (Vec<f64>, Vec<f64>) = samples
        .quadrature
        .iter()
        .zip(samples.x_alice.iter().zip(&samples.x_bob))
        .filter(|(q, _)| **q == quadrature)
        .map(|(_, (a, b))| (*a, *b))
        .unzip();
    gaussian_mutual_information(&a, &b)
}
