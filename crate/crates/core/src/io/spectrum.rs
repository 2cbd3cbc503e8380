//! Emission-spectrum files: two numeric columns `wavelength_nm, intensity`,
//! `#` comments and an optional header row.

use std::path::Path;

use crate::merit::{MeritError, Spectrum, SPECTRAL_WINDOW};

const SYNTHETIC_SNV: &str = include_str!("../../data/snv_synthetic.csv");

#[derive(Debug, thiserror::Error)]
pub enum SpectrumError {
    #[error("cannot read spectrum {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("spectrum line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Invalid(#[from] MeritError),
}

/// Parses CSV text and clips it to `window` (nm).
pub fn parse_spectrum(text: &str, window: (f64, f64)) -> Result<Spectrum, SpectrumError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut samples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| SpectrumError::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(SpectrumError::Parse { line, message: format!("expected 2 columns, found {}", rec.len()) });
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(l), Ok(v)) => samples.push((l, v)),
            _ if i == 0 => continue,
            _ => return Err(SpectrumError::Parse { line, message: format!("non-numeric values `{}`, `{}`", &rec[0], &rec[1]) }),
        }
    }
    Ok(Spectrum::new(samples)?.clipped(window.0, window.1)?)
}

pub fn load_spectrum(path: &Path, window: (f64, f64)) -> Result<Spectrum, SpectrumError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpectrumError::Io { path: path.display().to_string(), source })?;
    parse_spectrum(&text, window)
}

/// The bundled synthetic SnV-like spectrum over the default window. It is
/// a stand-in with a 619 nm zero-phonon line and a phonon sideband, not
/// measured data.
pub fn synthetic_snv() -> Spectrum {
    parse_spectrum(SYNTHETIC_SNV, SPECTRAL_WINDOW).expect("bundled spectrum is valid")
}
