//! FIR prototypes for the post-CIC stages: Kaiser-windowed half-band
//! lowpass filters and a least-squares CIC droop corrector.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;

use crate::cic::{frequency_response_mag, register_growth, CicParams};
use crate::error::{Error, Result};

const STRUCTURE_TOL: f64 = 1e-12;

/// Longest half-band the designer will try before giving up.
pub const MAX_HALFBAND_TAPS: usize = 1024;

/// Start of the droop corrector's stopband, in cycles per sample at its
/// input rate. `[f_pass, DROOP_STOP_EDGE]` is left unconstrained.
pub const DROOP_STOP_EDGE: f64 = 0.3;

#[derive(Clone, Debug, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub symmetric: bool,
    pub halfband: bool,
}

impl FirFilter {
    /// Wraps `taps`, detecting symmetry and half-band structure.
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() || taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Design(
                "FIR taps must be finite and non-empty".into(),
            ));
        }
        let n = taps.len();
        let symmetric = (0..n / 2).all(|k| (taps[k] - taps[n - 1 - k]).abs() <= STRUCTURE_TOL);
        let halfband = symmetric && n % 2 == 1 && n >= 3 && {
            let c = n / 2;
            let dc: f64 = taps.iter().sum();
            let zeros = (0..n)
                .filter(|&k| k != c && (k as isize - c as isize) % 2 == 0)
                .all(|k| taps[k].abs() <= STRUCTURE_TOL);
            zeros && (taps[c] - 0.5 * dc).abs() <= 1e-6 * dc.abs().max(1.0)
        };
        Ok(FirFilter {
            taps,
            symmetric,
            halfband,
        })
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// `H(e^{j2πf})` with `f` in cycles per sample.
    pub fn response(&self, f: f64) -> Complex64 {
        self.taps
            .iter()
            .enumerate()
            .map(|(k, &h)| Complex64::from_polar(h, -2.0 * PI * f * k as f64))
            .sum()
    }

    pub fn magnitude(&self, f: f64) -> f64 {
        self.response(f).norm()
    }

    /// Rounds taps to `frac_bits` fractional bits, nudging the centre tap so
    /// the integer taps sum to exactly `round(dc_gain · 2^frac_bits)`.
    pub fn quantize(&self, frac_bits: u32) -> Result<QuantizedFir> {
        if !(1..=30).contains(&frac_bits) {
            return Err(Error::Config(format!(
                "coefficient fractional bits must be in 1..=30 (got {frac_bits})"
            )));
        }
        let one = (1i64 << frac_bits) as f64;
        let mut coeffs: Vec<i64> = self.taps.iter().map(|t| (t * one).round() as i64).collect();
        let target = (self.dc_gain() * one).round() as i64;
        let centre = coeffs.len() / 2;
        coeffs[centre] += target - coeffs.iter().sum::<i64>();
        Ok(QuantizedFir { coeffs, frac_bits })
    }
}

/// Integer taps with an implied scale of `2^-frac_bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedFir {
    pub coeffs: Vec<i64>,
    pub frac_bits: u32,
}

impl QuantizedFir {
    pub fn to_filter(&self) -> FirFilter {
        let scale = (1i64 << self.frac_bits) as f64;
        FirFilter::new(self.coeffs.iter().map(|&c| c as f64 / scale).collect())
            .expect("quantized taps are finite")
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser's empirical shape parameter for a stopband attenuation in dB.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Kaiser's length estimate for a transition width in cycles per sample.
pub fn kaiser_length(atten_db: f64, transition: f64) -> usize {
    ((atten_db - 7.95) / (14.36 * transition)).ceil().max(0.0) as usize + 1
}

pub fn kaiser_window(n: usize, beta: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = bessel_i0(beta);
    (0..n)
        .map(|i| {
            let r = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

/// Peak of `20·log10|H(f)|` over `[lo, hi]` on a dense grid.
pub fn peak_db(filter: &FirFilter, lo: f64, hi: f64, points: usize) -> f64 {
    (0..=points)
        .map(|i| lo + (hi - lo) * i as f64 / points as f64)
        .map(|f| 20.0 * filter.magnitude(f).log10())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn halfband_taps(len: usize, beta: f64) -> Vec<f64> {
    let c = (len / 2) as isize;
    let w = kaiser_window(len, beta);
    let mut taps: Vec<f64> = (0..len)
        .map(|n| {
            let m = n as isize - c;
            if m == 0 {
                0.5
            } else if m % 2 == 0 {
                0.0
            } else {
                let x = PI * m as f64 / 2.0;
                0.5 * x.sin() / x * w[n]
            }
        })
        .collect();
    // Pin the off-centre taps to sum to exactly 0.5: DC gain 1 and the
    // quarter-rate point at exactly 0.5.
    let off: f64 = taps.iter().sum::<f64>() - 0.5;
    for (n, t) in taps.iter_mut().enumerate() {
        if n as isize != c {
            *t *= 0.5 / off;
        }
    }
    taps
}

/// Kaiser-windowed half-band lowpass, length `4k + 3`, DC gain 1.
///
/// `f_pass_norm` is the passband edge in cycles per input sample; the
/// stopband starts at its mirror `0.5 − f_pass_norm`. The Kaiser estimate
/// seeds the length, which then grows until the measured stopband peak
/// meets `stop_atten_db`.
pub fn design_halfband(f_pass_norm: f64, stop_atten_db: f64) -> Result<FirFilter> {
    if !(f_pass_norm > 0.0 && f_pass_norm < 0.25) {
        return Err(Error::Config(format!(
            "half-band passband edge {f_pass_norm} must lie in (0, 0.25)"
        )));
    }
    if stop_atten_db.is_nan() || stop_atten_db <= 0.0 {
        return Err(Error::Config(
            "stopband attenuation must be positive".into(),
        ));
    }
    let stop_edge = 0.5 - f_pass_norm;
    let beta = kaiser_beta(stop_atten_db);
    let est = kaiser_length(stop_atten_db, stop_edge - f_pass_norm).max(3);
    let mut len = est + (4 - (est + 1) % 4) % 4;
    while len <= MAX_HALFBAND_TAPS {
        let filter = FirFilter::new(halfband_taps(len, beta))?;
        if peak_db(&filter, stop_edge, 0.5, 4096) <= -stop_atten_db {
            return Ok(filter);
        }
        len += 4;
    }
    Err(Error::Design(format!(
        "no half-band up to {MAX_HALFBAND_TAPS} taps reaches {stop_atten_db} dB with passband edge {f_pass_norm}"
    )))
}

/// CIC magnitude normalized to 1 at DC, seen from a stage whose input rate
/// is the CIC input rate divided by `rate_divisor`.
pub fn cic_droop(cic: &CicParams, rate_divisor: f64) -> impl Fn(f64) -> f64 + '_ {
    let dc: f64 = register_growth(cic)
        .to_string()
        .parse()
        .expect("finite growth");
    move |f| frequency_response_mag(cic, f / rate_divisor) / dc
}

/// Linear-phase corrector whose passband magnitude approximates
/// `1 / droop(f)` over `[0, f_pass_norm]`.
///
/// Least squares on a dense grid, unit weight in the passband. With
/// `stop_edge = Some(fs)` the band `[fs, 0.5]` is fitted to zero and the
/// gap in between is left free. The result is scaled to DC gain 1.
pub fn fit_corrector(
    droop: impl Fn(f64) -> f64,
    f_pass_norm: f64,
    length: usize,
    stop_edge: Option<f64>,
) -> Result<FirFilter> {
    if length < 7 || length.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "corrector length must be odd and >= 7 (got {length})"
        )));
    }
    let stop = stop_edge.unwrap_or(0.5);
    if !(f_pass_norm > 0.0 && f_pass_norm < stop && stop <= 0.5) {
        return Err(Error::Config(format!(
            "corrector passband edge {f_pass_norm} must lie in (0, {stop})"
        )));
    }
    let half = length / 2;
    let per_band = 32 * length;
    let mut grid: Vec<(f64, f64)> = (0..=per_band)
        .map(|i| {
            let f = f_pass_norm * i as f64 / per_band as f64;
            (f, 1.0 / droop(f))
        })
        .collect();
    if stop_edge.is_some() {
        grid.extend(
            (0..=per_band).map(|i| (stop + (0.5 - stop) * i as f64 / per_band as f64, 0.0)),
        );
    }
    if grid.iter().any(|(_, d)| !d.is_finite()) {
        return Err(Error::Design(
            "droop reaches zero inside the passband".into(),
        ));
    }

    // zero-phase amplitude A(f) = a0 + 2 Σ a_k cos(2π f k)
    let basis = DMatrix::from_fn(grid.len(), half + 1, |r, k| {
        let scale = if k == 0 { 1.0 } else { 2.0 };
        scale * (2.0 * PI * grid[r].0 * k as f64).cos()
    });
    let target = DVector::from_iterator(grid.len(), grid.iter().map(|(_, d)| *d));
    let a = basis
        .svd(true, true)
        .solve(&target, 1e-12)
        .map_err(|e| Error::Design(format!("least-squares solve failed: {e}")))?;

    let mut taps = vec![0.0; length];
    for k in 0..=half {
        taps[half + k] = a[k];
        taps[half - k] = a[k];
    }
    let dc: f64 = taps.iter().sum();
    if dc.abs() < 1e-9 {
        return Err(Error::Design("corrector has no DC gain".into()));
    }
    taps.iter_mut().for_each(|t| *t /= dc);
    FirFilter::new(taps)
}

/// Droop corrector for a CIC, running at `1 / rate_divisor` of the CIC input
/// rate (`2R` when it follows the CIC and one half-band).
pub fn design_droop_corrector(
    cic: &CicParams,
    f_pass_norm: f64,
    length: usize,
    rate_divisor: f64,
) -> Result<FirFilter> {
    cic.validate()?;
    fit_corrector(
        cic_droop(cic, rate_divisor),
        f_pass_norm,
        length,
        Some(DROOP_STOP_EDGE),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cic::reference_params;

    #[test]
    fn structure_detection() {
        let f = FirFilter::new(vec![0.25, 0.5, 0.25]).unwrap();
        assert!(f.symmetric && f.halfband);
        let f = FirFilter::new(vec![0.1, 0.2, 0.3]).unwrap();
        assert!(!f.symmetric && !f.halfband);
        assert!(FirFilter::new(vec![]).is_err());
        assert!(FirFilter::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn kaiser_window_is_symmetric_and_peaks_at_one() {
        let w = kaiser_window(31, 7.0);
        assert!((w[15] - 1.0).abs() < 1e-15);
        for k in 0..15 {
            assert!((w[k] - w[30 - k]).abs() < 1e-15);
        }
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        // I0(1) = 1.2660658777520082
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_2).abs() < 1e-14);
    }

    #[test]
    fn halfband_invariants() {
        for (fp, atten) in [
            (0.05, 80.0),
            (0.1, 60.0),
            (0.2, 80.0),
            (0.22, 80.0),
            (0.2083, 90.0),
        ] {
            let h = design_halfband(fp, atten).unwrap();
            assert!(h.symmetric && h.halfband, "{fp} {atten}");
            assert_eq!(h.len() % 4, 3);
            assert!((h.magnitude(0.0) - 1.0).abs() <= 1e-9);
            assert!((h.magnitude(0.25) - 0.5).abs() <= 1e-6);
            assert!(peak_db(&h, 0.5 - fp, 0.5, 8192) <= -atten + 0.01);
        }
    }

    #[test]
    fn halfband_80db_at_0_22() {
        let h = design_halfband(0.22, 80.0).unwrap();
        assert!(peak_db(&h, 0.28, 0.5, 20000) <= -80.0);
    }

    #[test]
    fn halfband_errors() {
        assert!(design_halfband(0.25, 80.0).is_err());
        assert!(design_halfband(0.0, 80.0).is_err());
        assert!(matches!(
            design_halfband(0.2499, 200.0),
            Err(Error::Design(_))
        ));
    }

    #[test]
    fn flat_droop_gives_identity() {
        let c = fit_corrector(|_| 1.0, 0.1, 15, None).unwrap();
        for (k, t) in c.taps.iter().enumerate() {
            let expect = if k == 7 { 1.0 } else { 0.0 };
            assert!((t - expect).abs() < 1e-3, "{k}: {t}");
        }
    }

    #[test]
    fn droop_corrector_flattens_cic() {
        let cic = reference_params();
        // corrector after CIC (÷16) and one half-band (÷2): 192 kHz input
        let fs_corr = 6.144e6 / 32.0;
        let fp = 20e3 / fs_corr;
        let c = design_droop_corrector(&cic, fp, 15, 32.0).unwrap();
        assert!(c.symmetric);
        assert!((c.dc_gain() - 1.0).abs() < 1e-12);
        let droop = cic_droop(&cic, 32.0);
        assert!(c.magnitude(fp) >= 1.0);

        let edge_droop_db = -20.0 * droop(fp).log10();
        let comp: Vec<f64> = (0..=200)
            .map(|i| fp * i as f64 / 200.0)
            .map(|f| 20.0 * (droop(f) * c.magnitude(f)).log10())
            .collect();
        let ripple = comp.iter().cloned().fold(f64::MIN, f64::max)
            - comp.iter().cloned().fold(f64::MAX, f64::min);
        assert!(ripple < edge_droop_db, "{ripple} vs {edge_droop_db}");
    }

    #[test]
    fn corrector_errors() {
        assert!(fit_corrector(|_| 1.0, 0.1, 6, None).is_err());
        assert!(fit_corrector(|_| 1.0, 0.1, 5, None).is_err());
        assert!(fit_corrector(|_| 1.0, 0.35, 15, Some(0.3)).is_err());
    }

    #[test]
    fn quantization_preserves_dc() {
        let h = design_halfband(0.2, 80.0).unwrap();
        let q = h.quantize(16).unwrap();
        assert_eq!(q.coeffs.iter().sum::<i64>(), 1 << 16);
        let back = q.to_filter();
        assert!(back.symmetric);
        let lsb = 1.0 / 65536.0;
        let centre = h.len() / 2;
        for (k, (a, b)) in h.taps.iter().zip(&back.taps).enumerate() {
            // the centre tap absorbs the rounding residue of all the others
            let tol = if k == centre {
                h.len() as f64 * lsb
            } else {
                0.5 * lsb
            };
            assert!((a - b).abs() <= tol, "{k}");
        }
        assert!(h.quantize(0).is_err());
    }
}
