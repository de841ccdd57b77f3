//! Test signal generators and a behavioral second-order sigma-delta
//! modulator used as the high-rate input for the decimation chain.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fixed_point::FixedWord;

/// The project-wide PRNG: ChaCha with 8 rounds, seeded from a `u64`.
/// Its output stream is fixed across platforms.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest positive code of a `width`-bit word.
fn full_scale(width: u32) -> f64 {
    FixedWord::max_value(width) as f64
}

/// Quantized sine, `round(amp · full_scale · sin(2π f t + phase))`, rounding
/// half away from zero.
pub fn gen_sine_phase(
    amp: f64,
    f: f64,
    fs: f64,
    phase: f64,
    n: usize,
    width: u32,
) -> Result<Vec<FixedWord>> {
    if !(0.0..=1.0).contains(&amp) {
        return Err(Error::Config(format!(
            "sine amplitude {amp} outside [0, 1]"
        )));
    }
    if !(f >= 0.0 && f < fs / 2.0) {
        return Err(Error::Config(format!(
            "sine frequency {f} Hz must be below fs/2 = {} Hz",
            fs / 2.0
        )));
    }
    let scale = amp * full_scale(width);
    sine_samples(1.0, f, fs, phase, n)
        .into_iter()
        .map(|s| FixedWord::new((scale * s).round() as i64, width))
        .collect()
}

pub fn gen_sine(amp: f64, f: f64, fs: f64, n: usize, width: u32) -> Result<Vec<FixedWord>> {
    gen_sine_phase(amp, f, fs, 0.0, n, width)
}

/// Unquantized `amp · sin(2π f t + phase)`.
pub fn sine_samples(amp: f64, f: f64, fs: f64, phase: f64, n: usize) -> Vec<f64> {
    let w = 2.0 * PI * f / fs;
    (0..n).map(|i| amp * (w * i as f64 + phase).sin()).collect()
}

pub fn gen_impulse(value: i64, n: usize, width: u32) -> Result<Vec<FixedWord>> {
    let mut out = vec![FixedWord::zero(width)?; n];
    if let Some(first) = out.first_mut() {
        *first = FixedWord::new(value, width)?;
    }
    Ok(out)
}

pub fn gen_dc(value: i64, n: usize, width: u32) -> Result<Vec<FixedWord>> {
    Ok(vec![FixedWord::new(value, width)?; n])
}

/// Uniform random codes in `[lo, hi]`.
pub fn gen_uniform(
    rng: &mut impl Rng,
    lo: i64,
    hi: i64,
    n: usize,
    width: u32,
) -> Result<Vec<FixedWord>> {
    if lo > hi || lo < FixedWord::min_value(width) || hi > FixedWord::max_value(width) {
        return Err(Error::Config(format!(
            "range [{lo}, {hi}] does not fit a {width}-bit word"
        )));
    }
    (0..n)
        .map(|_| FixedWord::new(rng.random_range(lo..=hi), width))
        .collect()
}

/// Uniform random codes over the full `width`-bit range.
pub fn gen_noise(rng: &mut impl Rng, n: usize, width: u32) -> Result<Vec<FixedWord>> {
    gen_uniform(
        rng,
        FixedWord::min_value(width),
        FixedWord::max_value(width),
        n,
        width,
    )
}

/// Second-order, single-bit, error-feedback sigma-delta modulator.
///
/// Per sample: `y = sign(int2)`, then `int1 += x − y; int2 += int1 − y`.
/// This gives `Y = z⁻¹X + (1 − z⁻¹)²E`. Arithmetic is in `f64`; only the
/// ±1 output matters downstream and that is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct SdmState {
    pub int1: f64,
    pub int2: f64,
    pub clip_limit: f64,
    /// Number of accumulator clamps so far.
    pub saturations: u64,
}

impl Default for SdmState {
    fn default() -> Self {
        SdmState::new(64.0)
    }
}

/// Keeps a second-order loop stable.
pub const SDM_INPUT_LIMIT: f64 = 0.9;

impl SdmState {
    pub fn new(clip_limit: f64) -> Self {
        SdmState {
            int1: 0.0,
            int2: 0.0,
            clip_limit,
            saturations: 0,
        }
    }

    fn clamp(&mut self, v: f64) -> f64 {
        if v.abs() > self.clip_limit {
            self.saturations += 1;
            v.clamp(-self.clip_limit, self.clip_limit)
        } else {
            v
        }
    }

    /// Emits the next ±1 decision.
    pub fn step(&mut self, x: f64) -> i64 {
        let y = if self.int2 >= 0.0 { 1 } else { -1 };
        let yf = y as f64;
        let i1 = self.int1 + x - yf;
        self.int1 = self.clamp(i1);
        let i2 = self.int2 + self.int1 - yf;
        self.int2 = self.clamp(i2);
        y
    }

    /// Modulates `input` to ±1 codes in a `width`-bit word.
    pub fn modulate(&mut self, input: &[f64], width: u32) -> Result<Vec<FixedWord>> {
        if width < 2 {
            return Err(Error::Config(
                "sigma-delta output needs at least 2 bits to hold +1 and -1".into(),
            ));
        }
        if let Some(x) = input
            .iter()
            .find(|x| x.is_nan() || x.abs() > SDM_INPUT_LIMIT)
        {
            return Err(Error::Config(format!(
                "modulator input {x} outside [-{SDM_INPUT_LIMIT}, {SDM_INPUT_LIMIT}]"
            )));
        }
        input
            .iter()
            .map(|&x| FixedWord::new(self.step(x), width))
            .collect()
    }
}

pub fn sdm_modulate(state: &mut SdmState, input: &[f64], width: u32) -> Result<Vec<FixedWord>> {
    state.modulate(input, width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{spectrum, Window};

    fn values(w: &[FixedWord]) -> Vec<i64> {
        w.iter().map(|x| x.value()).collect()
    }

    #[test]
    fn sine_examples() {
        let z = gen_sine(0.0, 1000.0, 48000.0, 64, 16).unwrap();
        assert!(z.iter().all(|x| x.value() == 0));

        let q = gen_sine(1.0, 12000.0, 48000.0, 8, 16).unwrap();
        assert_eq!(values(&q), [0, 32767, 0, -32767, 0, 32767, 0, -32767]);

        let period = gen_sine(0.7, 1000.0, 48000.0, 48, 12).unwrap();
        let mean = values(&period).iter().sum::<i64>() as f64 / 48.0;
        assert!(mean.abs() <= 1.0);

        assert!(gen_sine(1.5, 1.0, 10.0, 4, 8).is_err());
        assert!(gen_sine(0.5, 6.0, 10.0, 4, 8).is_err());
    }

    #[test]
    fn impulse_dc_noise() {
        assert_eq!(values(&gen_impulse(1, 4, 3).unwrap()), [1, 0, 0, 0]);
        assert!(gen_impulse(1, 0, 3).unwrap().is_empty());
        assert_eq!(values(&gen_dc(-3, 3, 3).unwrap()), [-3, -3, -3]);
        assert!(gen_dc(4, 3, 3).is_err());
        let mut a = seeded_rng(5);
        let mut b = seeded_rng(5);
        let x = gen_noise(&mut a, 1000, 4).unwrap();
        assert_eq!(x, gen_noise(&mut b, 1000, 4).unwrap());
        assert!(x.iter().all(|w| (-8..8).contains(&w.value())));
        assert!(x.iter().any(|w| w.value() == -8) && x.iter().any(|w| w.value() == 7));
    }

    #[test]
    fn zero_input_idles_with_zero_mean() {
        let mut s = SdmState::default();
        let y = values(&s.modulate(&[0.0; 256], 2).unwrap());
        assert!(y.iter().all(|v| *v == 1 || *v == -1));
        for len in [4usize, 8, 16, 64] {
            for start in 0..(256 - len) {
                assert_eq!(y[start..start + len].iter().sum::<i64>(), 0);
            }
        }
    }

    #[test]
    fn dc_input_tracks_mean() {
        let mut s = SdmState::default();
        let y = s.modulate(&vec![0.5; 1 << 16], 6).unwrap();
        let mean = values(&y).iter().sum::<i64>() as f64 / y.len() as f64;
        assert!((mean - 0.5).abs() <= 0.01, "{mean}");

        for dc in [-0.8, -0.3, 0.0, 0.25, 0.8] {
            let mut s = SdmState::default();
            let y = s.modulate(&vec![dc; 1 << 15], 2).unwrap();
            let mean = values(&y).iter().sum::<i64>() as f64 / y.len() as f64;
            assert!((mean - dc).abs() <= 0.01, "{dc}: {mean}");
            assert_eq!(s.saturations, 0);
        }
    }

    #[test]
    fn rejects_unstable_inputs() {
        let mut s = SdmState::default();
        assert!(s.modulate(&[0.95], 2).is_err());
        assert!(s.modulate(&[f64::NAN], 2).is_err());
        assert!(s.modulate(&[0.1], 1).is_err());
    }

    #[test]
    fn deterministic() {
        let x = sine_samples(0.5, 1000.0, 6.144e6, 0.3, 4096);
        let a = SdmState::default().modulate(&x, 2).unwrap();
        let b = SdmState::default().modulate(&x, 2).unwrap();
        assert_eq!(a, b);
    }

    // Shaped noise should climb at about 40 dB/decade below fs/4.
    #[test]
    fn noise_shaping_slope() {
        let n = 1 << 16;
        let fs = 6.144e6;
        let bin = 11.0;
        let x = sine_samples(0.5, bin * fs / n as f64, fs, 0.0, n);
        let y: Vec<f64> = SdmState::default()
            .modulate(&x, 2)
            .unwrap()
            .iter()
            .map(|w| w.value() as f64)
            .collect();
        let s = spectrum(&y, fs, Window::Hann, 1.0).unwrap();
        let p = s.bin_powers();
        // average power over octave-wide windows, then fit log-log slope
        let mut pts = Vec::new();
        let mut lo = 64usize;
        while lo * 2 <= n / 16 {
            let avg = p[lo..lo * 2].iter().sum::<f64>() / lo as f64;
            let centre = (lo as f64 * 1.5).log10();
            pts.push((centre, 10.0 * avg.log10()));
            lo *= 2;
        }
        let k = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / k, sy / k);
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = num / den;
        assert!((32.0..=48.0).contains(&slope), "slope {slope} dB/decade");
    }
}
