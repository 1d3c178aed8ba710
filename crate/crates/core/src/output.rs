//! CSV tables with `#` metadata lines, and matplotlib plot scripts.

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{MaxDistance, ProfileRow, SweepParameter, SweepRow, ZetaRow};
use crate::keyrate::{RateBreakdown, RateMethod};
use crate::physics::constants;
use crate::protocol::ProtocolRun;
use crate::scenario::Scenario;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Formats a number so that parsing it back gives the same `f64`. Magnitudes
/// below `1e-3` use scientific notation.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

/// SHA-256 of the scenario's canonical TOML serialization.
pub fn scenario_hash(scenario: &Scenario) -> String {
    let text = toml::to_string(scenario).expect("scenario serializes to TOML");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Leading `# key: value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    pub entries: Vec<(String, String)>,
}

impl Metadata {
    /// Scenario hash, tool version and constants version.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        Metadata::default()
            .with("scenario_sha256", scenario_hash(scenario))
            .with("tool_version", TOOL_VERSION)
            .with("constants", constants::VERSION)
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    /// Numeric column; empty cells become `None`.
    pub fn numbers(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let col = self.column(name).ok_or_else(|| Error::InvalidSweep(format!("no column '{name}'")))?;
        col.into_iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::InvalidSweep(format!("'{s}' in column '{name}' is not a number")))
                }
            })
            .collect()
    }
}

pub fn write_table(out: &mut impl Write, table: &Table, meta: &Metadata) -> std::io::Result<()> {
    for (k, v) in &meta.entries {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()
}

pub fn write_csv(path: impl AsRef<Path>, table: &Table, meta: &Metadata) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    write_table(&mut buf, table, meta).and_then(|_| buf.flush()).map_err(|e| Error::io(path, e))
}

/// Parses text written by [`write_table`].
pub fn parse_table(text: &str) -> Result<(Metadata, Table)> {
    let mut meta = Metadata::default();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once(": ").unwrap_or((rest, ""));
            meta.entries.push((k.to_string(), v.to_string()));
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let bad = |e: csv::Error| Error::InvalidSweep(format!("malformed table: {e}"));
    let columns = reader.headers().map_err(bad)?.iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()).map_err(bad))
        .collect::<Result<Vec<Vec<String>>>>()?;
    Ok((meta, Table { columns, rows }))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<(Metadata, Table)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text)
}

/// Columns: `<parameter>, method, total_rate_bits, zeta, alpha, feasible, error`.
pub fn sweep_table(parameter: SweepParameter, rows: &[SweepRow]) -> Table {
    let mut t =
        Table::new(&[parameter.column_name(), "method", "total_rate_bits", "zeta", "alpha", "feasible", "error"]);
    for r in rows {
        t.push(vec![
            format_number(r.parameter_value),
            r.method.to_string(),
            format_number(r.total_rate_bits),
            format_number(r.zeta),
            format_number(r.alpha),
            r.feasible.to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

pub fn rate_table(rate: &RateBreakdown) -> Table {
    let mut t = Table::new(&["channel", "transmittance", "mutual_info_bits", "holevo_bits", "rate_bits", "method"]);
    for (i, c) in rate.per_channel.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            format_number(c.transmittance),
            format_number(c.mutual_info_bits),
            format_number(c.holevo_bits),
            format_number(c.rate_bits),
            rate.method.to_string(),
        ]);
    }
    t
}

pub fn profile_table(rows: &[ProfileRow]) -> Table {
    let mut t = Table::new(&["frequency_hz", "zeta", "feasible", "max_distance_m", "error"]);
    for r in rows {
        t.push(vec![
            format_number(r.frequency_hz),
            format_number(r.zeta),
            r.feasible.to_string(),
            format_opt(r.max_distance_m),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

pub fn zeta_table(rows: &[ZetaRow]) -> Table {
    let mut t = Table::new(&["frequency_hz", "temperature_k", "vacuum_variance", "zeta"]);
    for r in rows {
        t.push(vec![
            format_number(r.frequency_hz),
            format_number(r.temperature_k),
            format_number(r.vacuum_variance),
            format_number(r.zeta),
        ]);
    }
    t
}

pub fn max_distance_table(target_rate: f64, method: RateMethod, m: &MaxDistance) -> Table {
    let mut t = Table::new(&[
        "target_rate_bits",
        "method",
        "distance_m",
        "rate_bits",
        "d_lo",
        "d_hi",
        "iterations",
        "posterior_ratio",
    ]);
    t.push(vec![
        format_number(target_rate),
        method.to_string(),
        format_number(m.distance_m),
        format_number(m.rate_bits),
        format_number(m.d_lo),
        format_number(m.d_hi),
        m.iterations.to_string(),
        format_number(m.posterior_ratio),
    ]);
    t
}

/// Raw samples: `round, channel, quadrature, x_alice, x_bob`.
pub fn write_samples(out: &mut impl Write, run: &ProtocolRun, meta: &Metadata) -> std::io::Result<()> {
    for (k, v) in &meta.entries {
        writeln!(out, "# {k}: {v}")?;
    }
    writeln!(out, "round,channel,quadrature,x_alice,x_bob")?;
    for n in 0..run.n_rounds {
        for (i, c) in run.channels.iter().enumerate() {
            let q = match c.quadrature[n] {
                crate::gaussian::Quadrature::Q => "q",
                crate::gaussian::Quadrature::P => "p",
            };
            writeln!(out, "{n},{i},{q},{},{}", format_number(c.x_alice[n]), format_number(c.x_bob[n]))?;
        }
    }
    Ok(())
}

/// Axes of a generated plot.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: String,
    /// Column whose distinct values become separate curves.
    pub group_by: Option<String>,
    pub log_x: bool,
    pub log_y: bool,
    pub title: String,
}

fn py_str(s: &str) -> String {
    format!("{s:?}")
}

/// A standalone Python/matplotlib program that plots `csv_path` by column name.
pub fn plot_script(csv_path: &Path, spec: &PlotSpec) -> String {
    let csv = csv_path.to_string_lossy();
    let png = csv_path.with_extension("png");
    let group = spec.group_by.as_deref().map_or("None".to_string(), py_str);
    format!(
        r##"#!/usr/bin/env python3
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV = sys.argv[1] if len(sys.argv) > 1 else {csv}
OUT = sys.argv[2] if len(sys.argv) > 2 else {png}
X, Y, GROUP = {x}, {y}, {group}

with open(CSV, newline="") as fh:
    rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))

curves = {{}}
for row in rows:
    try:
        x, y = float(row[X]), float(row[Y])
    except ValueError:
        continue
    if y != y:
        continue
    curves.setdefault(row[GROUP] if GROUP else Y, []).append((x, y))

fig, ax = plt.subplots(figsize=(6, 4))
for label, pts in curves.items():
    pts.sort()
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=".", label=label)
if {log_x}:
    ax.set_xscale("log")
if {log_y} and all(p[1] > 0 for pts in curves.values() for p in pts):
    ax.set_yscale("log")
ax.set_xlabel(X)
ax.set_ylabel(Y)
ax.set_title({title})
ax.grid(True, which="both", alpha=0.3)
if len(curves) > 1:
    ax.legend()
fig.tight_layout()
fig.savefig(OUT, dpi=150)
"##,
        csv = py_str(&csv),
        png = py_str(&png.to_string_lossy()),
        x = py_str(&spec.x),
        y = py_str(&spec.y),
        log_x = if spec.log_x { "True" } else { "False" },
        log_y = if spec.log_y { "True" } else { "False" },
        title = py_str(&spec.title),
    )
}

pub fn emit_plot_script(path: impl AsRef<Path>, csv_path: &Path, spec: &PlotSpec) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, plot_script(csv_path, spec)).map_err(|e| Error::io(path, e))
}
