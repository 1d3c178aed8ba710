use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One frequency band of constant molecular absorption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub lo_inclusive: bool,
    pub hi_inclusive: bool,
    pub delta_db_per_km: f64,
}

impl Band {
    /// `[lo, hi)`
    pub fn left_closed(lo_hz: f64, hi_hz: f64, delta_db_per_km: f64) -> Self {
        Band { lo_hz, hi_hz, lo_inclusive: true, hi_inclusive: false, delta_db_per_km }
    }

    /// `(lo, hi]`
    pub fn right_closed(lo_hz: f64, hi_hz: f64, delta_db_per_km: f64) -> Self {
        Band { lo_hz, hi_hz, lo_inclusive: false, hi_inclusive: true, delta_db_per_km }
    }

    /// The single frequency `[f, f]`.
    pub fn point(f_hz: f64, delta_db_per_km: f64) -> Self {
        Band { lo_hz: f_hz, hi_hz: f_hz, lo_inclusive: true, hi_inclusive: true, delta_db_per_km }
    }

    pub fn contains(&self, f: f64) -> bool {
        let above = if self.lo_inclusive { f >= self.lo_hz } else { f > self.lo_hz };
        let below = if self.hi_inclusive { f <= self.hi_hz } else { f < self.hi_hz };
        above && below
    }
}

/// Piecewise-constant atmospheric absorption `delta(f)` in dB/km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionTable {
    bands: Vec<Band>,
}

impl AbsorptionTable {
    pub fn new(mut bands: Vec<Band>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidAbsorptionTable("no bands".into()));
        }
        for b in &bands {
            if !(b.lo_hz.is_finite() && b.hi_hz.is_finite() && b.lo_hz > 0.0) {
                return Err(Error::InvalidAbsorptionTable(format!(
                    "band edges must be finite and positive, got [{}, {}]",
                    b.lo_hz, b.hi_hz
                )));
            }
            if b.hi_hz < b.lo_hz || (b.hi_hz == b.lo_hz && !(b.lo_inclusive && b.hi_inclusive)) {
                return Err(Error::InvalidAbsorptionTable(format!("empty band [{}, {}]", b.lo_hz, b.hi_hz)));
            }
            if !(b.delta_db_per_km >= 0.0 && b.delta_db_per_km.is_finite()) {
                return Err(Error::InvalidAbsorptionTable(format!(
                    "absorption must be finite and >= 0, got {}",
                    b.delta_db_per_km
                )));
            }
        }
        bands.sort_by(|a, b| a.lo_hz.total_cmp(&b.lo_hz));
        for pair in bands.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let overlap = a.hi_hz > b.lo_hz || (a.hi_hz == b.lo_hz && a.hi_inclusive && b.lo_inclusive);
            if overlap {
                return Err(Error::InvalidAbsorptionTable(format!(
                    "bands starting at {} Hz and {} Hz overlap",
                    a.lo_hz, b.lo_hz
                )));
            }
        }
        Ok(AbsorptionTable { bands })
    }

    /// 1000 dB/km at exactly 10 THz, 100 dB/km on (10, 14] THz and
    /// 50 dB/km on (14, 30] THz.
    pub fn default_thz() -> Self {
        AbsorptionTable {
            bands: vec![
                Band::point(10e12, 1000.0),
                Band::right_closed(10e12, 14e12, 100.0),
                Band::right_closed(14e12, 30e12, 50.0),
            ],
        }
    }

    /// Same absorption at every frequency in `[lo, hi]`.
    pub fn uniform(lo_hz: f64, hi_hz: f64, delta_db_per_km: f64) -> Result<Self> {
        AbsorptionTable::new(vec![Band { lo_hz, hi_hz, lo_inclusive: true, hi_inclusive: true, delta_db_per_km }])
    }

    /// Parses two-column CSV rows `frequency_hz,delta_db_per_km`.
    ///
    /// Row `i` covers `[f_i, f_{i+1})`; the last row covers only its own frequency.
    /// A non-numeric first row is taken as a header; `#` lines are comments.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::InvalidAbsorptionTable(e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::InvalidAbsorptionTable(format!(
                    "row {}: expected 2 columns, found {}",
                    i + 1,
                    record.len()
                )));
            }
            let f = record[0].parse::<f64>();
            let d = record[1].parse::<f64>();
            match (f, d) {
                (Ok(f), Ok(d)) => rows.push((f, d)),
                _ if i == 0 => continue,
                _ => return Err(Error::InvalidAbsorptionTable(format!("row {}: non-numeric value", i + 1))),
            }
        }
        if rows.is_empty() {
            return Err(Error::InvalidAbsorptionTable("no data rows".into()));
        }
        if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidAbsorptionTable("frequencies must be strictly increasing".into()));
        }
        let mut bands: Vec<Band> = rows.windows(2).map(|w| Band::left_closed(w[0].0, w[1].0, w[0].1)).collect();
        let (f_last, d_last) = rows[rows.len() - 1];
        bands.push(Band::point(f_last, d_last));
        AbsorptionTable::new(bands)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        AbsorptionTable::from_csv_str(&text)
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn lookup(&self, frequency_hz: f64) -> Result<f64> {
        self.bands
            .iter()
            .find(|b| b.contains(frequency_hz))
            .map(|b| b.delta_db_per_km)
            .ok_or(Error::FrequencyNotCovered(frequency_hz))
    }

    pub fn covers(&self, frequency_hz: f64) -> bool {
        self.lookup(frequency_hz).is_ok()
    }

    /// Interior frequencies where `delta` may jump.
    pub fn band_edges(&self) -> Vec<f64> {
        let mut edges: Vec<f64> = self
            .bands
            .windows(2)
            .filter(|w| w[0].hi_hz == w[1].lo_hz && w[0].delta_db_per_km != w[1].delta_db_per_km)
            .map(|w| w[0].hi_hz)
            .collect();
        edges.dedup();
        edges
    }
}

impl Default for AbsorptionTable {
    fn default() -> Self {
        AbsorptionTable::default_thz()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_matches_band_definition() {
        let t = AbsorptionTable::default_thz();
        assert_eq!(t.lookup(10e12).unwrap(), 1000.0);
        assert_eq!(t.lookup(10.05e12).unwrap(), 100.0);
        assert_eq!(t.lookup(14e12).unwrap(), 100.0);
        assert_eq!(t.lookup(14.000001e12).unwrap(), 50.0);
        assert_eq!(t.lookup(15e12).unwrap(), 50.0);
        assert_eq!(t.lookup(30e12).unwrap(), 50.0);
        assert!(matches!(t.lookup(9.99e12), Err(Error::FrequencyNotCovered(_))));
        assert!(t.lookup(30.01e12).is_err());
        assert!(t.lookup(1e12).is_err());
        assert_eq!(t.band_edges(), vec![10e12, 14e12]);
    }

    #[test]
    fn overlapping_bands_rejected() {
        let r = AbsorptionTable::new(vec![Band::left_closed(1.0, 3.0, 1.0), Band::left_closed(2.0, 4.0, 1.0)]);
        assert!(r.is_err());
        let r = AbsorptionTable::new(vec![Band::right_closed(1.0, 3.0, 1.0), Band::left_closed(3.0, 4.0, 1.0)]);
        assert!(r.is_err());
        let ok = AbsorptionTable::new(vec![Band::left_closed(1.0, 3.0, 1.0), Band::left_closed(3.0, 4.0, 2.0)]);
        assert!(ok.is_ok());
    }

    #[test]
    fn csv_rows_become_left_closed_bands() {
        let t =
            AbsorptionTable::from_csv_str("frequency_hz,delta_db_per_km\n# comment\n1e13,1000\n1.2e13, 80\n2e13,40\n")
                .unwrap();
        assert_eq!(t.lookup(1e13).unwrap(), 1000.0);
        assert_eq!(t.lookup(1.19e13).unwrap(), 1000.0);
        assert_eq!(t.lookup(1.2e13).unwrap(), 80.0);
        assert_eq!(t.lookup(2e13).unwrap(), 40.0);
        assert!(t.lookup(2.01e13).is_err());
        assert!(t.lookup(0.9e13).is_err());
    }

    #[test]
    fn csv_errors() {
        assert!(AbsorptionTable::from_csv_str("").is_err());
        assert!(AbsorptionTable::from_csv_str("1e13,5\n1e12,4\n").is_err());
        assert!(AbsorptionTable::from_csv_str("1e13,5\n2e13,x\n").is_err());
        assert!(AbsorptionTable::from_csv_str("1e13,5,6\n").is_err());
        assert!(AbsorptionTable::from_csv_str("1e13,-5\n").is_err());
    }
}
