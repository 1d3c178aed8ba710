//! Command-line front end. Every subcommand is a thin wrapper over library calls.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::load_config;
use crate::error::{Error, Result};
use crate::experiments::{
    default_frequency_grid, frequency_profile, linear_grid, log_space, max_distance, max_distance_auto, sweep,
    zeta_vs_temperature, SweepParameter, SweepSpec,
};
use crate::keyrate::{mutual_information, RateMethod};
use crate::output::{
    emit_plot_script, format_number, max_distance_table, profile_table, rate_table, sweep_table, write_csv,
    write_samples, zeta_table, Metadata, PlotSpec, Table,
};
use crate::protocol::{empirical_mutual_information, sample_variance, simulate_transmittances, RNG_ID};
use crate::scenario::Scenario;

/// Directory for outputs when `--out` is not given.
pub const OUTPUT_DIR_ENV: &str = "THZ_QKD_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "thz-qkd", version, about = "CV-QKD key rates over terahertz MIMO channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; defaults to `<subcommand>.csv` in $THZ_QKD_OUTPUT_DIR or the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a matplotlib script that plots the CSV.
    #[arg(long)]
    emit_plot_script: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Key rate of the configured scenario.
    Rate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: Option<RateMethod>,
        /// Override the LoS distance (m).
        #[arg(long)]
        distance: Option<f64>,
    },
    /// Rate versus LoS distance on a log-spaced grid.
    SweepDistance {
        #[command(flatten)]
        common: Common,
        /// Comma-separated methods; defaults to the configured one.
        #[arg(long, value_delimiter = ',')]
        method: Vec<RateMethod>,
        #[arg(long, default_value_t = 0.01)]
        min: f64,
        #[arg(long, default_value_t = 1000.0)]
        max: f64,
        #[arg(long, default_value_t = 51)]
        points: usize,
    },
    /// Rate versus carrier frequency, or max distance versus frequency with --target-rate.
    SweepFrequency {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        method: Vec<RateMethod>,
        #[arg(long, default_value_t = 10.0)]
        min_thz: f64,
        #[arg(long, default_value_t = 30.0)]
        max_thz: f64,
        #[arg(long, default_value_t = 0.1)]
        step_thz: f64,
        #[arg(long)]
        target_rate: Option<f64>,
    },
    /// The small-transmittance coefficient zeta versus temperature.
    SweepTemperatureZeta {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 10.0, 15.0, 30.0])]
        frequencies_thz: Vec<f64>,
        #[arg(long, default_value_t = 100.0)]
        t_min: f64,
        #[arg(long, default_value_t = 400.0)]
        t_max: f64,
        #[arg(long, default_value_t = 5.0)]
        t_step: f64,
    },
    /// Distance at which the rate falls to the target.
    MaxDistance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: Option<RateMethod>,
        #[arg(long, default_value_t = 1e-5)]
        target_rate: f64,
        #[arg(long, requires = "d_hi")]
        d_lo: Option<f64>,
        #[arg(long, requires = "d_lo")]
        d_hi: Option<f64>,
    },
    /// Monte Carlo check of Bob's variance and the mutual information.
    McValidate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        rounds: usize,
        #[arg(long)]
        distance: Option<f64>,
        /// Write every sample (round, channel, quadrature, x_alice, x_bob).
        #[arg(long)]
        dump_samples: Option<PathBuf>,
    },
}

fn out_path(common: &Common, name: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| {
        let dir = std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
        dir.join(format!("{name}.csv"))
    })
}

fn finish(common: &Common, name: &str, table: &Table, meta: &Metadata, plot: PlotSpec) -> Result<PathBuf> {
    let path = out_path(common, name);
    write_csv(&path, table, meta)?;
    if let Some(script) = &common.emit_plot_script {
        emit_plot_script(script, &path, &plot)?;
    }
    Ok(path)
}

fn methods_or_default(methods: Vec<RateMethod>, scenario: &Scenario) -> Vec<RateMethod> {
    if methods.is_empty() {
        vec![scenario.options.method]
    } else {
        methods
    }
}

fn plot(x: &str, y: &str, group: Option<&str>, log_x: bool, log_y: bool, title: &str) -> PlotSpec {
    PlotSpec { x: x.into(), y: y.into(), group_by: group.map(Into::into), log_x, log_y, title: title.into() }
}

fn run(command: Command) -> Result<String> {
    match command {
        Command::Rate { common, method, distance } => {
            let mut s = load_config(&common.config)?;
            if let Some(d) = distance {
                s = s.with_distance(d)?;
            }
            let method = method.unwrap_or(s.options.method);
            let r = s.rate_with(method)?;
            let meta = Metadata::for_scenario(&s)
                .with("distance_m", format_number(s.distance_m()))
                .with("total_rate_bits", format_number(r.total_rate_bits));
            let path = finish(
                &common,
                "rate",
                &rate_table(&r),
                &meta,
                plot("channel", "rate_bits", None, false, false, "per-channel rate"),
            )?;
            let shown: Vec<String> = r.per_channel.iter().take(8).map(|c| format_number(c.rate_bits)).collect();
            let more = if r.per_channel.len() > 8 { ", ..." } else { "" };
            Ok(format!(
                "total_rate_bits={} method={} channels={} per_channel=[{}{more}] csv={}",
                format_number(r.total_rate_bits),
                method,
                r.per_channel.len(),
                shown.join(", "),
                path.display()
            ))
        }
        Command::SweepDistance { common, method, min, max, points } => {
            let s = load_config(&common.config)?;
            if !(min > 0.0 && max > min && points >= 1) {
                return Err(Error::InvalidSweep("need 0 < min < max and points >= 1".into()));
            }
            let spec = SweepSpec {
                parameter: SweepParameter::DistanceM,
                grid: log_space(min, max, points),
                methods: methods_or_default(method, &s),
                scenario: s,
            };
            let rows = sweep(&spec)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            let meta = Metadata::for_scenario(&spec.scenario);
            let path = finish(
                &common,
                "sweep-distance",
                &sweep_table(spec.parameter, &rows),
                &meta,
                plot("distance_m", "total_rate_bits", Some("method"), true, true, "rate versus distance"),
            )?;
            Ok(format!("rows={} failed_points={failed} csv={}", rows.len(), path.display()))
        }
        Command::SweepFrequency { common, method, min_thz, max_thz, step_thz, target_rate } => {
            let s = load_config(&common.config)?;
            if !(min_thz > 0.0 && max_thz >= min_thz && step_thz > 0.0) {
                return Err(Error::InvalidSweep("need 0 < min_thz <= max_thz and step_thz > 0".into()));
            }
            let grid = if (min_thz, max_thz, step_thz) == (10.0, 30.0, 0.1) {
                default_frequency_grid()
            } else {
                linear_grid(min_thz, max_thz, step_thz).into_iter().map(|f| f * 1e12).collect()
            };
            let meta = Metadata::for_scenario(&s);
            if let Some(target) = target_rate {
                let m = *methods_or_default(method, &s).first().expect("nonempty");
                let rows = frequency_profile(&s, target, &grid, m)?;
                let feasible = rows.iter().filter(|r| r.max_distance_m.is_some()).count();
                let meta = meta.with("target_rate_bits", format_number(target)).with("method", m.as_str());
                let path = finish(
                    &common,
                    "sweep-frequency",
                    &profile_table(&rows),
                    &meta,
                    plot("frequency_hz", "max_distance_m", None, false, true, "max distance versus frequency"),
                )?;
                Ok(format!("points={} feasible={feasible} csv={}", rows.len(), path.display()))
            } else {
                let spec = SweepSpec {
                    parameter: SweepParameter::FrequencyHz,
                    grid,
                    methods: methods_or_default(method, &s),
                    scenario: s,
                };
                let rows = sweep(&spec)?;
                let failed = rows.iter().filter(|r| r.error.is_some()).count();
                let path = finish(
                    &common,
                    "sweep-frequency",
                    &sweep_table(spec.parameter, &rows),
                    &meta,
                    plot("frequency_hz", "total_rate_bits", Some("method"), false, true, "rate versus frequency"),
                )?;
                Ok(format!("rows={} failed_points={failed} csv={}", rows.len(), path.display()))
            }
        }
        Command::SweepTemperatureZeta { common, frequencies_thz, t_min, t_max, t_step } => {
            let s = load_config(&common.config)?;
            if !(t_min > 0.0 && t_max >= t_min && t_step > 0.0) {
                return Err(Error::InvalidSweep("need 0 < t_min <= t_max and t_step > 0".into()));
            }
            let freqs: Vec<f64> = frequencies_thz.iter().map(|f| f * 1e12).collect();
            let rows = zeta_vs_temperature(
                &freqs,
                &linear_grid(t_min, t_max, t_step),
                s.environment.signal_variance,
                s.environment.eve_noise,
                s.options.zeta_constant,
            )?;
            let meta = Metadata::for_scenario(&s);
            let path = finish(
                &common,
                "sweep-temperature-zeta",
                &zeta_table(&rows),
                &meta,
                plot("temperature_k", "zeta", Some("frequency_hz"), false, false, "zeta versus temperature"),
            )?;
            let at_room: Vec<String> = freqs
                .iter()
                .map(|&f| {
                    let z = crate::keyrate::zeta_coefficient_with(
                        s.environment.signal_variance,
                        2.0 * crate::physics::thermal_occupation(f, 296.0) + 1.0,
                        s.environment.eve_noise,
                        s.options.zeta_constant,
                    )
                    .map_or("NaN".into(), format_number);
                    format!("{}THz:{z}", f / 1e12)
                })
                .collect();
            Ok(format!("rows={} zeta_296K=[{}] csv={}", rows.len(), at_room.join(", "), path.display()))
        }
        Command::MaxDistance { common, method, target_rate, d_lo, d_hi } => {
            let s = load_config(&common.config)?;
            let method = method.unwrap_or(s.options.method);
            let m = match (d_lo, d_hi) {
                (Some(lo), Some(hi)) => max_distance(&s, target_rate, method, lo, hi)?,
                _ => max_distance_auto(&s, target_rate, method)?,
            };
            let meta = Metadata::for_scenario(&s);
            let path = finish(
                &common,
                "max-distance",
                &max_distance_table(target_rate, method, &m),
                &meta,
                plot("target_rate_bits", "distance_m", None, false, false, "max distance"),
            )?;
            Ok(format!(
                "max_distance_m={} target_rate_bits={} method={method} csv={}",
                format_number(m.distance_m),
                format_number(target_rate),
                path.display()
            ))
        }
        Command::McValidate { common, seed, rounds, distance, dump_samples } => {
            let mut s = load_config(&common.config)?;
            if let Some(d) = distance {
                s = s.with_distance(d)?;
            }
            let table = mc_validate_table(&s, rounds, seed, dump_samples.as_deref())?;
            let meta = Metadata::for_scenario(&s)
                .with("rng", RNG_ID)
                .with("seed", seed.to_string())
                .with("rounds", rounds.to_string());
            let worst = table
                .numbers("mi_z")?
                .into_iter()
                .chain(table.numbers("var_bob_z")?)
                .flatten()
                .map(f64::abs)
                .fold(0.0, f64::max);
            let path = finish(
                &common,
                "mc-validate",
                &table,
                &meta,
                plot("channel", "mi_bits", None, false, false, "empirical mutual information"),
            )?;
            Ok(format!(
                "channels={} rounds={rounds} max_z={} csv={}",
                table.rows.len(),
                format_number(worst),
                path.display()
            ))
        }
    }
}

/// Monte Carlo comparison table: per channel, Bob's sample variance and the
/// empirical mutual information against their analytic values, with z-scores.
pub fn mc_validate_table(scenario: &Scenario, rounds: usize, seed: u64, dump: Option<&Path>) -> Result<Table> {
    let t = scenario.transmittances()?;
    let env = &scenario.environment;
    let run = simulate_transmittances(&t, env, rounds, seed)?;
    if let Some(path) = dump {
        let meta = Metadata::for_scenario(scenario).with("rng", RNG_ID).with("seed", seed.to_string());
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        write_samples(&mut w, &run, &meta).map_err(|e| Error::io(path, e))?;
    }
    let mi = empirical_mutual_information(&run)?;
    let (va, v0, w) = (env.alice_variance(), scenario.vacuum_variance(), env.eve_noise);
    let mut table = Table::new(&[
        "channel",
        "transmittance",
        "var_bob",
        "var_bob_expected",
        "var_bob_z",
        "mi_bits",
        "mi_expected",
        "mi_std_error",
        "mi_z",
    ]);
    for (i, (c, m)) in run.channels.iter().zip(&mi).enumerate() {
        let var = sample_variance(&c.x_bob);
        let var_expected = c.transmittance * va + (1.0 - c.transmittance) * w;
        let mi_expected = mutual_information(c.transmittance, env.signal_variance, v0, w)?;
        table.push(vec![
            i.to_string(),
            format_number(c.transmittance),
            format_number(var.value),
            format_number(var_expected),
            format_number(var.z_score(var_expected)),
            format_number(m.value),
            format_number(mi_expected),
            format_number(m.std_error),
            format_number(m.z_score(mi_expected)),
        ]);
    }
    Ok(table)
}

/// Parses `args` (program name first), runs the subcommand and returns the exit
/// code: 0 on success, 1 for usage, configuration or I/O errors, 2 for numerical
/// failures.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}
