//! Windowed magnitude spectra, in-band SNR measurement and CSV export.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Clamp for log-of-zero in spectra.
pub const SPECTRUM_FLOOR_DB: f64 = -400.0;

/// Lowest FFT length accepted by [`spectrum`].
pub const MIN_FFT_LEN: usize = 256;

/// Bins at and next to DC that never count as noise.
const DC_EXCLUDED_BINS: usize = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    /// Periodic window of length `n`, so an on-bin tone occupies exactly
    /// one (rectangular) or three (Hann) bins.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            other => Err(Error::Config(format!("unknown window '{other}'"))),
        }
    }
}

/// One-sided amplitude spectrum in dB relative to a full-scale amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub fs: f64,
    pub length: usize,
    pub window: Window,
    /// Mean of the window; amplitudes are divided by it.
    pub coherent_gain: f64,
    pub full_scale: f64,
    pub bin_freqs: Vec<f64>,
    pub mags_db: Vec<f64>,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        self.fs / self.length as f64
    }

    /// Nearest bin to `freq`.
    pub fn bin_of(&self, freq: f64) -> usize {
        ((freq / self.bin_width()).round() as usize).min(self.mags_db.len() - 1)
    }

    /// Linear power per bin in full-scale units (sinusoid of amplitude `A`
    /// on an interior bin reads `A²/2`).
    ///
    /// With the rectangular window these sum to the mean-square of the
    /// signal.
    pub fn bin_powers(&self) -> Vec<f64> {
        let last = self.mags_db.len() - 1;
        self.mags_db
            .iter()
            .enumerate()
            .map(|(k, db)| {
                let amp = self.full_scale * 10f64.powf(db / 20.0);
                if k == 0 || k == last {
                    amp * amp
                } else {
                    amp * amp / 2.0
                }
            })
            .collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.bin_freqs
            .iter()
            .copied()
            .zip(self.mags_db.iter().copied())
    }
}

pub fn amplitude_db(amp: f64, full_scale: f64, floor_db: f64) -> f64 {
    let db = 20.0 * (amp / full_scale).log10();
    if db.is_nan() || db < floor_db {
        floor_db
    } else {
        db
    }
}

/// Windowed one-sided magnitude spectrum of `signal`.
///
/// Amplitudes are corrected by the window's coherent gain, so a sinusoid of
/// amplitude `A` centred on a bin reads `20·log10(A / full_scale)`.
pub fn spectrum(signal: &[f64], fs: f64, window: Window, full_scale: f64) -> Result<Spectrum> {
    let n = signal.len();
    if n < MIN_FFT_LEN || !n.is_power_of_two() {
        return Err(Error::Contract(format!(
            "spectrum length must be a power of two >= {MIN_FFT_LEN}, got {n}"
        )));
    }
    if fs.is_nan() || fs <= 0.0 || full_scale.is_nan() || full_scale <= 0.0 {
        return Err(Error::Config(
            "sample rate and full scale must be positive".into(),
        ));
    }
    let w = window.coefficients(n);
    let coherent_gain = w.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = signal
        .iter()
        .zip(&w)
        .map(|(x, w)| Complex64::new(x * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let half = n / 2;
    let norm = n as f64 * coherent_gain;
    let mags_db = buf[..=half]
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let scale = if k == 0 || k == half { 1.0 } else { 2.0 };
            amplitude_db(scale * x.norm() / norm, full_scale, SPECTRUM_FLOOR_DB)
        })
        .collect();
    Ok(Spectrum {
        fs,
        length: n,
        window,
        coherent_gain,
        full_scale,
        bin_freqs: (0..=half).map(|k| k as f64 * fs / n as f64).collect(),
        mags_db,
    })
}

/// In-band SNR in dB.
///
/// Signal power is the sum over the bin nearest `f_signal` and
/// `leakage_bins` neighbours on each side; noise is every other bin in
/// `[band.0, band.1]`, excluding DC and its first neighbour.
pub fn measure_snr(
    spec: &Spectrum,
    f_signal: f64,
    band: (f64, f64),
    leakage_bins: usize,
) -> Result<f64> {
    let (lo, hi) = band;
    let nyquist = spec.fs / 2.0;
    if !(0.0 <= lo && lo <= hi && hi <= nyquist) {
        return Err(Error::Measurement(format!(
            "band [{lo}, {hi}] Hz is not within [0, {nyquist}] Hz"
        )));
    }
    if !(lo <= f_signal && f_signal <= hi) {
        return Err(Error::Measurement(format!(
            "signal at {f_signal} Hz lies outside the band [{lo}, {hi}] Hz"
        )));
    }
    let k_sig = spec.bin_of(f_signal);
    let powers = spec.bin_powers();
    let mut signal = 0.0;
    let mut noise = 0.0;
    let mut noise_bins = 0usize;
    for (k, p) in powers.iter().enumerate() {
        if k.abs_diff(k_sig) <= leakage_bins {
            signal += p;
            continue;
        }
        let f = spec.bin_freqs[k];
        if k < DC_EXCLUDED_BINS || f < lo || f > hi {
            continue;
        }
        noise += p;
        noise_bins += 1;
    }
    if noise_bins == 0 {
        return Err(Error::Measurement(
            "no noise bins left in band after signal and DC exclusion".into(),
        ));
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Writes `freq_hz,mag_db` rows with 9 significant digits.
pub fn export_csv(rows: impl IntoIterator<Item = (f64, f64)>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_csv(rows, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_csv(
    rows: impl IntoIterator<Item = (f64, f64)>,
    out: &mut impl Write,
) -> std::io::Result<()> {
    out.write_all(b"freq_hz,mag_db\n")?;
    for (f, m) in rows {
        writeln!(out, "{f:.8e},{m:.8e}")?;
    }
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 {
            if line != "freq_hz,mag_db" {
                return Err(Error::Config(format!(
                    "{}: unexpected CSV header",
                    path.display()
                )));
            }
            continue;
        }
        let parsed = line
            .split_once(',')
            .and_then(|(f, m)| Some((f.parse().ok()?, m.parse().ok()?)));
        rows.push(parsed.ok_or_else(|| {
            Error::Config(format!("{}:{}: malformed row", path.display(), i + 1))
        })?);
    }
    Ok(rows)
}
