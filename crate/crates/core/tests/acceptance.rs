//! Acceptance suite. Prints one PASS/FAIL line per criterion, with detail lines
//! under failures, and exits nonzero if any criterion fails.
//!
//! Run: cargo test -p thz-qkd --test acceptance

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use thz_qkd::channel::{AbsorptionTable, ArrayConfig, Band};
use thz_qkd::cli::{mc_validate_table, run_cli};
use thz_qkd::experiments::{frequency_profile, linear_grid, log_space, max_distance_auto};
use thz_qkd::gaussian::{
    beam_splitter, purified_cloner_state, symplectic_form, two_mode_squeezed, Quadrature, SymplecticTransform,
};
use thz_qkd::keyrate::{channel_rate, zeta_coefficient, RateMethod, ZetaConstant};
use thz_qkd::physics::{vacuum_variance, EnvironmentParams};
use thz_qkd::scenario::Scenario;

const TEMPERATURE_K: f64 = 296.0;
const SIGNAL_VARIANCE: f64 = 1e3;
const EVE_NOISE: f64 = 1.0;
const ELEMENT_GAIN: f64 = 1000.0; // 30 dBi
const TARGET_RATE: f64 = 1e-5;
/// Smallest rate, in bits, that is compared in relative terms. Entropies of order
/// 10 bits cancel down to the rate and leave an absolute noise near 1e-14 bits.
const RESOLUTION_BITS: f64 = 1e-12;

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.pass = false;
            self.details.push(msg.into());
        }
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.details.push(msg.into());
    }
}

fn env(f_hz: f64) -> EnvironmentParams {
    EnvironmentParams::new(f_hz, TEMPERATURE_K, SIGNAL_VARIANCE, EVE_NOISE).unwrap()
}

fn link(n: usize, f_hz: f64, d: f64) -> Scenario {
    Scenario::los(env(f_hz), ArrayConfig::square(n, ELEMENT_GAIN).unwrap(), d).unwrap()
}

fn rate(s: &Scenario, method: RateMethod) -> f64 {
    s.rate_with(method).unwrap().total_rate_bits
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
}

fn feasibility_window() -> Outcome {
    let mut out = Outcome::new();
    // The default table starts at 10 THz; a flat band below it lets 1 THz be evaluated.
    let mut bands = AbsorptionTable::default_thz().bands().to_vec();
    bands.insert(0, Band::left_closed(0.5e12, 10e12, 50.0));
    let table = AbsorptionTable::new(bands).unwrap();
    for (f_thz, expect) in [(1.0, false), (10.0, true), (15.0, true), (30.0, true)] {
        let mut s = link(32, f_thz * 1e12, 10.0);
        s.absorption = table.clone();
        let feas = s.feasibility().unwrap();
        out.check(
            feas.feasible == expect,
            format!(
                "{f_thz} THz: zeta = {:.4}, alpha = {:.3e}, feasible = {}, expected {expect}",
                feas.zeta, feas.alpha, feas.feasible
            ),
        );
    }
    out
}

fn rate_distance_shape() -> Outcome {
    let mut out = Outcome::new();
    let grid = log_space(1.0, 100.0, 41);
    for f_thz in [10.0, 15.0, 30.0] {
        let base = link(32, f_thz * 1e12, 1.0);
        let rates: Vec<f64> =
            grid.iter().map(|&d| rate(&base.with_distance(d).unwrap(), RateMethod::LargeModulation)).collect();
        let resolved = rates.iter().position(|&r| r < RESOLUTION_BITS).unwrap_or(rates.len());
        if let Some(i) = rates[..resolved].windows(2).position(|w| !(w[1] < w[0])) {
            out.check(
                false,
                format!("32x32 at {f_thz} THz: rate not decreasing between {} and {} m", grid[i], grid[i + 1]),
            );
        }
        if let Some(r) = rates[resolved..].iter().find(|r| r.abs() >= RESOLUTION_BITS) {
            out.check(false, format!("32x32 at {f_thz} THz: rate {r:e} beyond the resolved range"));
        }
        let reach = if resolved == 0 { 0.0 } else { grid[resolved - 1] };
        out.check(reach >= 10.0, format!("32x32 at {f_thz} THz: positive rate only up to {reach:.2} m"));
        if resolved < rates.len() {
            out.note(format!("32x32 at {f_thz} THz: rate below {RESOLUTION_BITS:e} bits beyond {reach:.1} m"));
        }
        // Positive-rate range: distances where the rate reaches the reference target.
        let siso = max_distance_auto(&link(1, f_thz * 1e12, 0.1), TARGET_RATE, RateMethod::LargeModulation);
        let mimo = max_distance_auto(&base, TARGET_RATE, RateMethod::LargeModulation);
        match (siso, mimo) {
            (Ok(s), Ok(m)) => {
                out.check(s.distance_m < 1.0, format!("SISO at {f_thz} THz reaches {:.3} m", s.distance_m));
                out.check(m.distance_m >= 1.0, format!("32x32 at {f_thz} THz reaches only {:.3} m", m.distance_m));
            }
            (s, m) => out.check(false, format!("{f_thz} THz: max distance failed: {s:?} / {m:?}")),
        }
    }
    out
}

fn max_distance_anchors() -> Outcome {
    let mut out = Outcome::new();
    for (n, expected) in [(1024, 160.0), (32, 10.0)] {
        match max_distance_auto(&link(n, 15e12, 1.0), TARGET_RATE, RateMethod::LargeModulation) {
            Ok(m) => out.check(
                rel(m.distance_m, expected) <= 0.2,
                format!("{n}x{n}: {:.3} m, expected {expected} m +/- 20%", m.distance_m),
            ),
            Err(e) => out.check(false, format!("{n}x{n}: {e}")),
        }
    }
    out
}

fn approximation_hierarchy() -> Outcome {
    let mut out = Outcome::new();
    let freqs = [10e12, 15e12, 30e12];
    let mut points = Vec::new();
    for &f in &freqs {
        for n in [8, 16, 32] {
            for d in log_space(1.0, 100.0, 9) {
                points.push(link(n, f, d));
            }
        }
    }
    for &f in &[15e12, 30e12] {
        for d in log_space(0.01, 1.0, 9) {
            points.push(link(1, f, d));
        }
    }
    let (mut n_eval, mut n_unresolved, mut worst_lm, mut worst_taylor) = (0, 0, 0.0f64, 0.0f64);
    for s in &points {
        // Distances where some eigenmode has T > 1 are outside the model.
        let Ok(exact) = s.rate_with(RateMethod::Exact) else { continue };
        let exact = exact.total_rate_bits;
        if !(exact > 0.0) {
            continue;
        }
        if exact < RESOLUTION_BITS {
            n_unresolved += 1;
            continue;
        }
        n_eval += 1;
        let lm = rate(s, RateMethod::LargeModulation);
        let taylor = rate(s, RateMethod::Taylor);
        let (e_lm, e_taylor) = (rel(lm, exact), rel(taylor, lm));
        worst_lm = worst_lm.max(e_lm);
        worst_taylor = worst_taylor.max(e_taylor);
        let at = format!(
            "{}x{} at {} THz, {:.3} m",
            s.arrays.n_tx,
            s.arrays.n_rx,
            s.environment.carrier_frequency_hz / 1e12,
            s.distance_m()
        );
        out.check(e_lm <= 0.05, format!("{at}: |lm - exact|/exact = {e_lm:.3e}"));
        out.check(e_taylor <= 0.05, format!("{at}: |taylor - lm|/lm = {e_taylor:.3e}"));
    }
    out.check(n_eval > 0, "no operating point with positive rate");

    // With W = 1 the two Holevo routes coincide, so the gap may sit at the resolution.
    for &f in &freqs {
        let v0 = vacuum_variance(&env(f));
        for t in [1e-2, 1e-4, 1e-6] {
            let gaps: Vec<f64> = [1e2, 1e3, 1e4]
                .iter()
                .map(|&vs| {
                    let ex = channel_rate(t, vs, v0, EVE_NOISE, RateMethod::Exact, ZetaConstant::Rounded).unwrap();
                    let lm =
                        channel_rate(t, vs, v0, EVE_NOISE, RateMethod::LargeModulation, ZetaConstant::Rounded).unwrap();
                    (lm.holevo_bits - ex.holevo_bits).abs()
                })
                .collect();
            let ok = gaps.iter().all(|&g| g <= RESOLUTION_BITS) || gaps.windows(2).all(|w| w[1] <= w[0]);
            out.check(ok, format!("{} THz, T = {t:e}: |lm - exact| over V_s = [{}] bits", f / 1e12, sci(&gaps)));
        }
    }

    let taylor_errors = |v0: f64, constant: ZetaConstant| -> Vec<f64> {
        [1e-3, 1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&t| {
                let at = |m| channel_rate(t, SIGNAL_VARIANCE, v0, EVE_NOISE, m, constant).unwrap().rate_bits;
                rel(at(RateMethod::Taylor), at(RateMethod::LargeModulation))
            })
            .collect()
    };
    for &f in &freqs {
        let v0 = vacuum_variance(&env(f));
        let errs = taylor_errors(v0, ZetaConstant::Rounded);
        let shrinking = errs.windows(2).all(|w| w[1] < w[0]);
        out.check(shrinking, format!("{} THz: taylor error over T = 1e-3..1e-6 is [{}]", f / 1e12, sci(&errs)));
        if !shrinking {
            let t = 1e-9;
            let slope =
                channel_rate(t, SIGNAL_VARIANCE, v0, EVE_NOISE, RateMethod::LargeModulation, ZetaConstant::Rounded)
                    .unwrap()
                    .rate_bits
                    / t;
            out.note(format!(
                "{} THz: lm slope at T = 1e-9 is {slope:.6}, zeta is {:.6}; with 1/(2 ln 2) the error is [{}]",
                f / 1e12,
                zeta_coefficient(SIGNAL_VARIANCE, v0, EVE_NOISE).unwrap(),
                sci(&taylor_errors(v0, ZetaConstant::Analytic))
            ));
        }
    }
    out.note(format!("{n_eval} points, worst lm {worst_lm:.2e}, worst taylor {worst_taylor:.2e}"));
    out.note(format!("{n_unresolved} positive-rate points below {RESOLUTION_BITS:e} bits skipped"));
    out
}

/// Symplectic spectrum from the eigenvalues of `Omega V`, which come in `+-i nu` pairs.
fn spectrum_oracle(v: &DMatrix<f64>) -> Vec<f64> {
    let n = v.nrows() / 2;
    let mut nu: Vec<f64> = (symplectic_form(n) * v).complex_eigenvalues().iter().map(|z| z.norm()).collect();
    nu.sort_by(|a, b| b.total_cmp(a));
    nu.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

fn gaussian_invariants() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha20Rng::seed_from_u64(7);

    for _ in 0..100 {
        let eta = rng.random_range(0.0..=1.0);
        let s = beam_splitter(eta).unwrap().matrix().clone();
        let omega = symplectic_form(2);
        let defect = (&s * &omega * s.transpose() - &omega).abs().max();
        out.check(defect < 1e-12, format!("beam splitter eta = {eta}: S Omega S^T defect {defect:e}"));
    }
    let mut x = DMatrix::zeros(4, 4);
    x[(0, 0)] = 2.0;
    x[(1, 1)] = 0.5;
    x[(2, 2)] = 1.0;
    x[(3, 3)] = 1.0;
    out.check(SymplecticTransform::new(x.clone() * 1.1).is_err(), "non-symplectic matrix accepted");

    // The smallest covariance eigenvalue is about 1/(2W) and carries an absolute
    // error of order eps W, so the purity check is meaningful up to W of about 1e3.
    for w in [1.0, 1.5, 10.0, 1e2, 1e3] {
        let nu = two_mode_squeezed(w).unwrap().symplectic_eigenvalues().unwrap();
        out.check(nu.iter().all(|&v| (v - 1.0).abs() <= 1e-8), format!("TMSV W = {w}: symplectic eigenvalues {nu:?}"));
    }

    for w in [1.0, 2.0, 37.5, 1e3] {
        let cond = two_mode_squeezed(w).unwrap().homodyne_condition(0, Quadrature::Q).unwrap();
        let c = cond.cov();
        let ok = (c[(0, 0)] - 1.0 / w).abs() <= 1e-9 * (1.0 / w) + 1e-12
            && (c[(1, 1)] - w).abs() <= 1e-9 * w
            && c[(0, 1)].abs() <= 1e-9;
        out.check(ok, format!("homodyne on TMSV W = {w}: conditional covariance {c}"));
    }

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let t = rng.random_range(0.0..=1.0);
        let va = 10f64.powf(rng.random_range(0.0..4.0));
        let w = 10f64.powf(rng.random_range(0.0..2.0));
        let state = purified_cloner_state(t, va, w).unwrap();
        let bob_side = state.partial_trace(&[0, 1]).unwrap();
        let eve_side = state.partial_trace(&[2, 3]).unwrap();
        let gap = (bob_side.entropy().unwrap() - eve_side.entropy().unwrap()).abs();
        worst = worst.max(gap);
        out.check(gap <= 1e-6, format!("T = {t}, V_a = {va}, W = {w}: S(AB) - S(E) = {gap:e} bits"));

        for reduced in [&bob_side, &eve_side] {
            let nu = reduced.symplectic_eigenvalues().unwrap();
            let oracle = spectrum_oracle(reduced.cov());
            let spread = nu.iter().zip(&oracle).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
            out.check(spread <= 1e-8, format!("spectrum vs oracle: {nu:?} / {oracle:?}"));
        }
    }
    if out.pass {
        out.note(format!("worst purity-balance gap {worst:.2e} bits"));
    }
    out
}

fn write_scenario(dir: &Path, name: &str, n: usize, f_hz: f64, d: f64) -> PathBuf {
    let text = format!(
        "[environment]\ncarrier_frequency_hz = {f_hz:e}\ntemperature_k = {TEMPERATURE_K}\n\
         signal_variance = {SIGNAL_VARIANCE}\neve_noise = {EVE_NOISE}\n\n\
         [arrays]\nn_tx = {n}\nn_rx = {n}\nelement_gain = {ELEMENT_GAIN}\n\n\
         [[paths]]\nlength_m = {d}\n"
    );
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn monte_carlo_consistency() -> Outcome {
    let mut out = Outcome::new();
    const ROUNDS: usize = 1_000_000;
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let n = 1usize << rng.random_range(0..6);
        let f = rng.random_range(10.5e12..30e12);
        let d = 10f64.powf(rng.random_range(-1.0..1.5));
        let seed = rng.random::<u64>();
        let mut s = link(n, f, d);
        while s.transmittances().is_err() {
            s = s.with_distance(2.0 * s.distance_m()).unwrap();
        }
        let at = format!("{n}x{n} at {:.2} THz, {:.3} m, seed {seed}", f / 1e12, s.distance_m());
        let table = match mc_validate_table(&s, ROUNDS, seed, None) {
            Ok(t) => t,
            Err(e) => {
                out.check(false, format!("{at}: {e}"));
                continue;
            }
        };
        for col in ["var_bob_z", "mi_z"] {
            for z in table.numbers(col).unwrap().into_iter().flatten() {
                worst = worst.max(z.abs());
                out.check(z.abs() <= 3.0, format!("{at}: {col} = {z:.3}"));
            }
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "mc.toml", 4, 15e12, 2.0);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let csv = dir.path().join(format!("mc_{run}.csv"));
        let dump = dir.path().join(format!("samples_{run}.csv"));
        let code = run_cli([
            "thz-qkd",
            "mc-validate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "99",
            "--rounds",
            "20000",
            "--out",
            csv.to_str().unwrap(),
            "--dump-samples",
            dump.to_str().unwrap(),
        ]);
        out.check(code == 0, format!("mc-validate exited with {code}"));
        outputs.push((std::fs::read(&csv).unwrap_or_default(), std::fs::read(&dump).unwrap_or_default()));
    }
    out.check(!outputs[0].0.is_empty() && outputs[0] == outputs[1], "identical seeds gave different bytes");
    if out.pass {
        out.note(format!("worst |z| {worst:.2}"));
    }
    out
}

fn beamforming_gain_law() -> Outcome {
    let mut out = Outcome::new();
    let t1 = |n: usize| link(n, 15e12, 10.0).decompose().unwrap().transmittances[0];
    let reference = t1(1);
    for n in [1, 2, 4, 8, 16, 32, 64] {
        let gain = t1(n) / reference;
        let expected = (n * n) as f64;
        let err = rel(gain, expected);
        out.check(err <= 1e-12, format!("N = {n}: T1 / T1(SISO) = {gain}, relative error {err:e}"));
    }
    out
}

fn band_edge_jump() -> Outcome {
    let mut out = Outcome::new();
    let grid = linear_grid(13.0e12, 15.0e12, 0.1e12);
    let rows = frequency_profile(&link(1024, 15e12, 100.0), TARGET_RATE, &grid, RateMethod::LargeModulation).unwrap();
    let d: Vec<f64> = rows.iter().map(|r| r.max_distance_m.unwrap_or(f64::NAN)).collect();
    if let Some(r) = rows.iter().find(|r| r.max_distance_m.is_none()) {
        out.check(false, format!("{} THz: no max distance ({:?})", r.frequency_hz / 1e12, r.error));
        return out;
    }
    let edge = grid.iter().position(|&f| f > 14e12).unwrap();
    let jump = d[edge] / d[edge - 1];
    let other = d.windows(2).enumerate().filter(|&(i, _)| i + 1 != edge).map(|(_, w)| w[1] / w[0]).fold(0.0, f64::max);
    out.check(
        jump > 1.2 && jump > other,
        format!(
            "{:.1} -> {:.1} THz: {:.2} -> {:.2} m (ratio {jump:.3}); largest other step ratio {other:.3}",
            grid[edge - 1] / 1e12,
            grid[edge] / 1e12,
            d[edge - 1],
            d[edge]
        ),
    );
    if out.pass {
        out.note(format!("{:.2} m -> {:.2} m across 14 THz", d[edge - 1], d[edge]));
    }
    out
}

type Criterion = (&'static str, fn() -> Outcome, u64);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("feasibility window", feasibility_window, 1),
        ("rate versus distance shape", rate_distance_shape, 10),
        ("max distance anchors", max_distance_anchors, 30),
        ("approximation hierarchy", approximation_hierarchy, 60),
        ("gaussian core invariants", gaussian_invariants, 10),
        ("monte carlo consistency", monte_carlo_consistency, 60),
        ("beamforming gain law", beamforming_gain_law, 1),
        ("band edge jump", band_edge_jump, 30),
    ];
    let mut failed = 0;
    for (name, run, budget_s) in criteria {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        outcome.check(
            elapsed <= Duration::from_secs(budget_s),
            format!("took {:.2} s, budget {budget_s} s", elapsed.as_secs_f64()),
        );
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{tag} {name} ({:.2} s / {budget_s} s)", elapsed.as_secs_f64());
        for d in &outcome.details {
            println!("    {d}");
        }
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
