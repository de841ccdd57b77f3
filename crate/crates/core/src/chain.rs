//! The four-stage decimator: CIC ÷R, half-band ÷2, droop corrector ÷2,
//! half-band ÷2.
//!
//! FIR stages run on exact integers. Taps are quantized to `F` fractional
//! bits and products accumulate in `i128` without intermediate rounding, so
//! after the three stages a sample carries `3F` fractional bits. A single
//! round-half-away-from-zero brings it back to CIC output LSBs.

use std::collections::VecDeque;

use crate::cic::{self, design, CicDesign, CicParams, CicState, Schedule};
use crate::error::{Error, Result};
use crate::fir::{design_droop_corrector, design_halfband, peak_db, FirFilter, QuantizedFir};
use crate::fixed_point::{FixedWord, MAX_WIDTH};

/// Composite responses are clamped here instead of reaching −∞ at nulls.
pub const RESPONSE_FLOOR_DB: f64 = -300.0;

/// Each FIR stage halves the rate.
pub const FIR_STAGES: usize = 3;

/// Everything needed to build a [`ChainConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSpec {
    pub cic: CicParams,
    pub schedule: Option<Schedule>,
    /// Input sample rate in Hz.
    pub fs_in: f64,
    /// Passband edge in Hz.
    pub f_pass: f64,
    /// Half-band stopband attenuation in dB.
    pub halfband_atten_db: f64,
    pub droop_taps: usize,
    pub frac_bits: u32,
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec {
            cic: cic::reference_params(),
            schedule: None,
            fs_in: 6.144e6,
            f_pass: 20e3,
            halfband_atten_db: 80.0,
            droop_taps: 15,
            frac_bits: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub cic: CicDesign,
    pub hb1: FirFilter,
    pub droop: FirFilter,
    pub hb2: FirFilter,
    pub fs_in: f64,
    pub f_pass: f64,
    pub fixed_point_frac_bits: u32,
    /// Quantized hb1, droop, hb2 in processing order.
    pub quantized: [QuantizedFir; FIR_STAGES],
    /// Width of the output word; covers the worst-case FIR overshoot.
    pub output_width: u32,
}

impl ChainConfig {
    pub fn total_decimation(&self) -> u32 {
        self.cic.params.decimation << FIR_STAGES
    }

    /// Per-stage rate reduction factors, CIC first.
    pub fn stage_factors(&self) -> [u32; FIR_STAGES + 1] {
        [self.cic.params.decimation, 2, 2, 2]
    }

    pub fn output_rate(&self) -> f64 {
        self.fs_in / self.total_decimation() as f64
    }

    /// Input rate of each FIR stage, in processing order.
    pub fn fir_input_rates(&self) -> [f64; FIR_STAGES] {
        let r = self.cic.params.decimation as f64;
        [
            self.fs_in / r,
            self.fs_in / (2.0 * r),
            self.fs_in / (4.0 * r),
        ]
    }

    pub fn filters(&self) -> [&FirFilter; FIR_STAGES] {
        [&self.hb1, &self.droop, &self.hb2]
    }

    /// Worst attenuation, in dB, that any stage applies over the band that
    /// its own ÷2 folds onto the passband.
    pub fn alias_rejection_db(&self) -> f64 {
        self.quantized
            .iter()
            .zip(self.fir_input_rates())
            .map(|(q, fs)| -peak_db(&q.to_filter(), 0.5 - self.f_pass / fs, 0.5, 2048))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Designs the three FIR stages around a CIC and checks rates and word
/// growth.
pub fn design_chain(spec: &ChainSpec) -> Result<ChainConfig> {
    let cic = design(spec.cic, spec.schedule.clone())?;
    if !(spec.fs_in > 0.0 && spec.fs_in.is_finite()) {
        return Err(Error::Config(format!(
            "input rate {} Hz must be positive",
            spec.fs_in
        )));
    }
    let r = spec.cic.decimation as f64;
    let out_rate = spec.fs_in / (r * 8.0);
    if !(spec.f_pass > 0.0 && spec.f_pass < out_rate / 2.0) {
        return Err(Error::Config(format!(
            "passband edge {} Hz must lie in (0, {}) Hz, half the output rate",
            spec.f_pass,
            out_rate / 2.0
        )));
    }
    let hb1 = design_halfband(spec.f_pass * r / spec.fs_in, spec.halfband_atten_db)?;
    let droop = design_droop_corrector(
        &spec.cic,
        spec.f_pass * 2.0 * r / spec.fs_in,
        spec.droop_taps,
        2.0 * r,
    )?;
    let hb2 = design_halfband(spec.f_pass * 4.0 * r / spec.fs_in, spec.halfband_atten_db)?;
    let quantized = [
        hb1.quantize(spec.frac_bits)?,
        droop.quantize(spec.frac_bits)?,
        hb2.quantize(spec.frac_bits)?,
    ];

    let gain: f64 = quantized
        .iter()
        .map(|q| {
            q.coeffs
                .iter()
                .map(|c| c.unsigned_abs() as f64)
                .sum::<f64>()
                / (1u64 << q.frac_bits) as f64
        })
        .product();
    let headroom = gain.log2().ceil().max(0.0) as u32;
    let output_width = cic.output_width() + headroom;
    if output_width > MAX_WIDTH {
        return Err(Error::Config(format!(
            "chain output needs {output_width} bits, above the {MAX_WIDTH}-bit limit"
        )));
    }
    // accumulator: input word, 3F fractional bits, worst-case gain, sign
    let acc_bits = cic.output_width() + 3 * spec.frac_bits + headroom + 1;
    if acc_bits > 127 {
        return Err(Error::Config(format!(
            "FIR accumulators need {acc_bits} bits; reduce fractional bits"
        )));
    }

    Ok(ChainConfig {
        cic,
        hb1,
        droop,
        hb2,
        fs_in: spec.fs_in,
        f_pass: spec.f_pass,
        fixed_point_frac_bits: spec.frac_bits,
        quantized,
        output_width,
    })
}

#[derive(Clone, Debug)]
struct FirStage {
    coeffs: Vec<i128>,
    history: VecDeque<i128>,
    keep_next: bool,
}

impl FirStage {
    fn new(q: &QuantizedFir) -> Self {
        FirStage {
            coeffs: q.coeffs.iter().map(|&c| c as i128).collect(),
            history: VecDeque::from(vec![0; q.coeffs.len()]),
            keep_next: true,
        }
    }

    /// Shifts `x` in; on retained phases returns the filtered sample.
    fn push(&mut self, x: i128) -> Option<i128> {
        self.history.pop_back();
        self.history.push_front(x);
        let keep = self.keep_next;
        self.keep_next = !keep;
        keep.then(|| {
            self.coeffs
                .iter()
                .zip(&self.history)
                .map(|(c, h)| c * h)
                .sum()
        })
    }
}

/// Running state of one stream through the chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub cic: CicState,
    stages: Vec<FirStage>,
}

impl ChainState {
    pub fn new(cfg: &ChainConfig) -> Self {
        ChainState {
            cic: CicState::new(&cfg.cic),
            stages: cfg.quantized.iter().map(FirStage::new).collect(),
        }
    }
}

/// Output samples before the final rounding, scaled by `2^(3F)`.
pub fn chain_process_exact(
    cfg: &ChainConfig,
    state: &mut ChainState,
    input: &[FixedWord],
) -> Result<Vec<i128>> {
    let mid = cic::process(&cfg.cic, &mut state.cic, input)?;
    let mut out = Vec::with_capacity(mid.len() / 8 + 1);
    for y in mid {
        let mut v = Some(y.value() as i128);
        for stage in &mut state.stages {
            v = v.and_then(|x| stage.push(x));
        }
        if let Some(v) = v {
            out.push(v);
        }
    }
    Ok(out)
}

/// `v / 2^shift` rounded half away from zero.
pub fn round_shift(v: i128, shift: u32) -> i128 {
    if shift == 0 {
        return v;
    }
    let half = 1i128 << (shift - 1);
    if v >= 0 {
        (v + half) >> shift
    } else {
        -((-v + half) >> shift)
    }
}

/// Runs the full chain, one output per `8R` inputs, in CIC output LSBs.
pub fn chain_process(
    cfg: &ChainConfig,
    state: &mut ChainState,
    input: &[FixedWord],
) -> Result<Vec<FixedWord>> {
    let shift = FIR_STAGES as u32 * cfg.fixed_point_frac_bits;
    chain_process_exact(cfg, state, input)?
        .into_iter()
        .map(|v| {
            let r = round_shift(v, shift);
            i64::try_from(r)
                .map_err(|_| Error::Contract(format!("chain output {r} exceeds 64 bits")))
                .and_then(|r| FixedWord::new(r, cfg.output_width))
        })
        .collect()
}

/// Magnitude of the whole chain at each frequency in `grid` (Hz at the
/// input rate), in dB relative to DC and clamped at [`RESPONSE_FLOOR_DB`].
/// FIR stages use their quantized taps.
pub fn chain_response(cfg: &ChainConfig, grid: &[f64]) -> Result<Vec<f64>> {
    if let Some(f) = grid
        .iter()
        .find(|f| !(**f >= 0.0 && **f <= cfg.fs_in / 2.0))
    {
        return Err(Error::Config(format!(
            "frequency {f} Hz outside [0, {}] Hz",
            cfg.fs_in / 2.0
        )));
    }
    let firs: Vec<FirFilter> = cfg.quantized.iter().map(QuantizedFir::to_filter).collect();
    let rates = cfg.fir_input_rates();
    let mag = |f: f64| {
        let c = cic::frequency_response_mag(&cfg.cic.params, f / cfg.fs_in);
        firs.iter()
            .zip(rates)
            .fold(c, |acc, (h, fs)| acc * h.magnitude(f / fs))
    };
    let dc = mag(0.0);
    Ok(grid
        .iter()
        .map(|&f| {
            let db = 20.0 * (mag(f) / dc).log10();
            if db.is_finite() {
                db.max(RESPONSE_FLOOR_DB)
            } else {
                RESPONSE_FLOOR_DB
            }
        })
        .collect())
}
