//! Cascaded integrator-comb decimator: register sizing, the bit-accurate
//! fixed-point datapath (direct and pipelined integrator cascades), closed
//! form responses and the truncation error bound.
//!
//! Datapath for `N` stages, differential delay `M`, rate change `R`:
//!
//! ```text
//! x ─▶ ∫ ─▶ ∫ ─▶ … ─▶ ∫ ─▶ ↓R ─▶ comb ─▶ … ─▶ comb ─▶ y
//!      w0    w1         wN-1       c0            cN-1
//! ```
//!
//! Each arrow into a narrower register drops LSBs with [`truncate_lsb`].
//! Adders are the gate-level [`mcla_add`]; comb subtraction adds the bitwise
//! complement with carry-in 1.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::fixed_point::{resize_extend, truncate_lsb, FixedWord, MAX_WIDTH};
use crate::mcla::mcla_add;

/// Limit on `R·M·N` for the expanded-coefficient routines.
pub const EXPANSION_GUARD: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CicParams {
    /// Number of integrator (and comb) stages, `N`.
    pub stages: u32,
    /// Differential delay of each comb, `M`.
    pub delay: u32,
    /// Decimation factor, `R`.
    pub decimation: u32,
    /// Input word width in bits.
    pub input_width: u32,
}

impl CicParams {
    pub fn new(stages: u32, delay: u32, decimation: u32, input_width: u32) -> Result<Self> {
        let p = CicParams {
            stages,
            delay,
            decimation,
            input_width,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages < 1 {
            return Err(Error::Config("stage count N must be >= 1".into()));
        }
        if self.delay < 1 {
            return Err(Error::Config("differential delay M must be >= 1".into()));
        }
        if self.decimation < 2 {
            return Err(Error::Config(format!(
                "decimation factor R must be >= 2 (got {})",
                self.decimation
            )));
        }
        if !(1..=32).contains(&self.input_width) {
            return Err(Error::Config(format!(
                "input width must be in 1..=32 bits (got {})",
                self.input_width
            )));
        }
        Ok(())
    }

    /// `R·M`, the length of each boxcar section.
    pub fn boxcar_len(&self) -> u64 {
        self.decimation as u64 * self.delay as u64
    }

    fn check_expansion_guard(&self) -> Result<()> {
        let size = self.boxcar_len() as u128 * self.stages as u128;
        if size > EXPANSION_GUARD as u128 {
            return Err(Error::Config(format!(
                "R*M*N = {size} exceeds the coefficient expansion limit {EXPANSION_GUARD}"
            )));
        }
        Ok(())
    }
}

/// Five stages, unit differential delay, decimation by 16, 6-bit input:
/// the front end of a 6.144 MHz, OSR-128 audio decimator.
pub fn reference_params() -> CicParams {
    CicParams {
        stages: 5,
        delay: 1,
        decimation: 16,
        input_width: 6,
    }
}

/// Hand-pruned schedule for [`reference_params`]: integrators narrowing
/// 25/22/20/18/16 bits, combs at a constant 16 bits.
pub fn reference_schedule() -> Schedule {
    Schedule {
        integrator_widths: vec![25, 22, 20, 18, 16],
        comb_widths: vec![16; 5],
    }
}

/// Maximum register growth `(R·M)^N`.
pub fn register_growth(params: &CicParams) -> BigUint {
    BigUint::from(params.boxcar_len()).pow(params.stages)
}

/// MSB position of the output, `ceil(N·log2(R·M) + B_in − 1)`.
///
/// Computed exactly as the bit length of `(R·M)^N · 2^(B_in−1) − 1`.
pub fn output_msb(params: &CicParams) -> u32 {
    let full_scale = register_growth(params) << (params.input_width - 1);
    (full_scale - BigUint::one()).bits() as u32
}

/// Smallest register width that holds every output for every input,
/// including the most negative full-scale input: `output_msb + 1`.
pub fn lossless_width(params: &CicParams) -> u32 {
    output_msb(params) + 1
}

/// Register widths per stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub integrator_widths: Vec<u32>,
    pub comb_widths: Vec<u32>,
}

impl Schedule {
    pub fn uniform(stages: u32, width: u32) -> Self {
        Schedule {
            integrator_widths: vec![width; stages as usize],
            comb_widths: vec![width; stages as usize],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CicDesign {
    pub params: CicParams,
    pub g_max: BigUint,
    pub b_max: u32,
    pub integrator_widths: Vec<u32>,
    pub comb_widths: Vec<u32>,
}

/// Sizes a CIC. Without a schedule every register gets [`lossless_width`].
pub fn design(params: CicParams, schedule: Option<Schedule>) -> Result<CicDesign> {
    params.validate()?;
    let b_max = output_msb(&params);
    let schedule = match schedule {
        Some(s) => s,
        None => {
            let width = b_max + 1;
            if width > MAX_WIDTH {
                return Err(Error::Config(format!(
                    "lossless register width {width} exceeds {MAX_WIDTH} bits"
                )));
            }
            Schedule::uniform(params.stages, width)
        }
    };
    check_schedule(&params, b_max, &schedule)?;
    Ok(CicDesign {
        params,
        g_max: register_growth(&params),
        b_max,
        integrator_widths: schedule.integrator_widths,
        comb_widths: schedule.comb_widths,
    })
}

fn check_schedule(params: &CicParams, b_max: u32, s: &Schedule) -> Result<()> {
    let n = params.stages as usize;
    if s.integrator_widths.len() != n || s.comb_widths.len() != n {
        return Err(Error::Config(format!(
            "schedule needs {n} integrator and {n} comb widths"
        )));
    }
    let chain: Vec<u32> = s
        .integrator_widths
        .iter()
        .chain(&s.comb_widths)
        .copied()
        .collect();
    if let Some(pair) = chain.windows(2).find(|p| p[1] > p[0]) {
        return Err(Error::Config(format!(
            "schedule must be non-increasing from the first integrator to the last comb ({} -> {})",
            pair[0], pair[1]
        )));
    }
    if chain[0] < b_max {
        return Err(Error::Config(format!(
            "first-stage width {} is below the output MSB {b_max}; MSBs would be lost",
            chain[0]
        )));
    }
    if chain[0] > MAX_WIDTH {
        return Err(Error::Config(format!(
            "first-stage width {} exceeds {MAX_WIDTH} bits",
            chain[0]
        )));
    }
    if *chain.last().unwrap() < 1 {
        return Err(Error::Config("register widths must be >= 1".into()));
    }
    Ok(())
}

impl CicDesign {
    pub fn stages(&self) -> usize {
        self.params.stages as usize
    }

    pub fn output_width(&self) -> u32 {
        *self.comb_widths.last().expect("N >= 1")
    }

    /// Width of the word entering comb `j`.
    fn comb_input_width(&self, j: usize) -> u32 {
        if j == 0 {
            self.comb_widths[0]
        } else {
            self.comb_widths[j - 1]
        }
    }

    /// Total LSBs dropped between input and output; the output LSB weighs
    /// `2^dropped_bits()` input LSBs.
    pub fn dropped_bits(&self) -> u32 {
        self.integrator_widths[0] - self.output_width()
    }

    pub fn is_full_width(&self) -> bool {
        self.dropped_bits() == 0
    }

    /// Every place where a narrower register drops LSBs.
    pub fn truncation_sites(&self) -> Vec<TruncationSite> {
        let n = self.stages();
        let w = &self.integrator_widths;
        let c = &self.comb_widths;
        let mut sites = Vec::new();
        let mut scale = 0;
        for j in 1..n {
            let dropped = w[j - 1] - w[j];
            if dropped > 0 {
                sites.push(TruncationSite {
                    location: SiteLocation::IntegratorInput(j),
                    dropped_bits: dropped,
                    scale_bits: scale,
                });
            }
            scale += dropped;
        }
        let dropped = w[n - 1] - c[0];
        if dropped > 0 {
            sites.push(TruncationSite {
                location: SiteLocation::CombInput,
                dropped_bits: dropped,
                scale_bits: scale,
            });
        }
        scale += dropped;
        for (j, &width) in c.iter().enumerate() {
            let dropped = self.comb_input_width(j) - width;
            if dropped > 0 {
                sites.push(TruncationSite {
                    location: SiteLocation::CombOutput(j),
                    dropped_bits: dropped,
                    scale_bits: scale,
                });
            }
            scale += dropped;
        }
        sites
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteLocation {
    /// Between integrator `j-1` and integrator `j`.
    IntegratorInput(usize),
    /// Last integrator output entering the first comb.
    CombInput,
    CombOutput(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruncationSite {
    pub location: SiteLocation,
    pub dropped_bits: u32,
    /// log2 of the LSB weight (in input LSBs) of the word being truncated.
    pub scale_bits: u32,
}

fn convolve(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Raises the length-`len` all-ones boxcar to the `power` by running sums.
fn boxcar_power(len: usize, power: u32) -> Vec<BigUint> {
    let mut h = vec![BigUint::one()];
    for _ in 0..power {
        let mut next = vec![BigUint::zero(); h.len() + len - 1];
        let mut running = BigUint::zero();
        for (k, slot) in next.iter_mut().enumerate() {
            if k < h.len() {
                running += &h[k];
            }
            if k >= len {
                running -= &h[k - len];
            }
            *slot = running.clone();
        }
        h = next;
    }
    h
}

/// Coefficients of `(Σ_{k<RM} z^-k)^N`.
pub fn impulse_response(params: &CicParams) -> Result<Vec<BigUint>> {
    params.validate()?;
    params.check_expansion_guard()?;
    Ok(boxcar_power(params.boxcar_len() as usize, params.stages))
}

/// `|sin(π f R M) / sin(π f)|^N` for `f` in cycles per high-rate sample;
/// the removable singularity at DC evaluates to `(R·M)^N`.
pub fn frequency_response_mag(params: &CicParams, f: f64) -> f64 {
    let rm = params.boxcar_len() as f64;
    let n = params.stages as i32;
    let den = (PI * f).sin();
    if den == 0.0 {
        return rm.powi(n);
    }
    ((PI * f * rm).sin() / den).abs().powi(n)
}

/// Worst-case `|full-width output − truncated output|` in LSBs of the
/// truncated design's output word.
///
/// Each site dropping `d` bits removes an amount in `[0, 2^d − 1]` of its own
/// LSBs per sample. That error reaches the output through the rest of the
/// filter, whose high-rate equivalent impulse response `h` has both signs;
/// the bound is `max(Σ_s E_s·Σh⁺_s, Σ_s E_s·Σ|h⁻_s|)` rounded up to output
/// LSBs.
pub fn truncation_error_bound(design: &CicDesign) -> Result<BigUint> {
    let sites = design.truncation_sites();
    if sites.is_empty() {
        return Ok(BigUint::zero());
    }
    design.params.check_expansion_guard()?;
    let n = design.params.stages;
    let rm = design.params.boxcar_len() as usize;
    let m = design.params.delay as usize;

    let mut pos_total = BigInt::zero();
    let mut neg_total = BigInt::zero();
    for site in &sites {
        let h: Vec<BigInt> = match site.location {
            SiteLocation::IntegratorInput(j) => {
                let boxcar: Vec<BigInt> = boxcar_power(rm, n - j as u32)
                    .into_iter()
                    .map(BigInt::from)
                    .collect();
                convolve(&boxcar, &differencer_power(rm, j as u32))
            }
            SiteLocation::CombInput => differencer_power(m, n),
            SiteLocation::CombOutput(j) => differencer_power(m, n - 1 - j as u32),
        };
        let per_sample = (BigInt::one() << site.dropped_bits) - 1;
        let per_sample = per_sample << site.scale_bits;
        let pos: BigInt = h.iter().filter(|c| c.is_positive()).sum();
        let neg: BigInt = h.iter().filter(|c| c.is_negative()).map(|c| -c).sum();
        pos_total += &per_sample * pos;
        neg_total += &per_sample * neg;
    }
    let worst = pos_total.max(neg_total).to_biguint().expect("non-negative");
    let unit = BigUint::one() << design.dropped_bits();
    Ok((worst + &unit - BigUint::one()) / unit)
}

/// Coefficients of `(1 − z^-delay)^power`.
fn differencer_power(delay: usize, power: u32) -> Vec<BigInt> {
    let mut diff = vec![BigInt::zero(); delay + 1];
    diff[0] = BigInt::one();
    diff[delay] = -BigInt::one();
    let mut h = vec![BigInt::one()];
    for _ in 0..power {
        h = convolve(&h, &diff);
    }
    h
}

/// Integrator cascade evaluation order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Architecture {
    #[default]
    Direct,
    /// Each integrator consumes the previous stage's register from the prior
    /// clock, so the integrator registers double as pipeline registers. The
    /// output is the direct output delayed by `N − 1` input samples.
    Pipelined,
}

/// Running state of one CIC stream.
#[derive(Clone, Debug)]
pub struct CicState {
    integrators: Vec<FixedWord>,
    comb_delays: Vec<VecDeque<FixedWord>>,
    /// Input index modulo R.
    phase: u32,
    /// Phase on which the downsampler emits.
    emit_phase: u32,
    pub stats: CicStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CicStats {
    pub inputs: u64,
    pub outputs: u64,
    /// Integrator additions whose exact sum left the register range.
    pub integrator_wraps: u64,
}

impl CicState {
    /// All-zero state emitting on phase 0.
    pub fn new(design: &CicDesign) -> Self {
        Self::with_phase(design, 0).expect("phase 0 is always valid")
    }

    pub fn with_phase(design: &CicDesign, emit_phase: u32) -> Result<Self> {
        if emit_phase >= design.params.decimation {
            return Err(Error::Config(format!(
                "decimation phase {emit_phase} must be below R = {}",
                design.params.decimation
            )));
        }
        let integrators = design
            .integrator_widths
            .iter()
            .map(|&w| FixedWord::zero(w))
            .collect::<Result<_>>()?;
        let comb_delays = (0..design.stages())
            .map(|j| {
                let zero = FixedWord::zero(design.comb_input_width(j))?;
                Ok(VecDeque::from(vec![zero; design.params.delay as usize]))
            })
            .collect::<Result<_>>()?;
        Ok(CicState {
            integrators,
            comb_delays,
            phase: 0,
            emit_phase,
            stats: CicStats::default(),
        })
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    fn check_matches(&self, design: &CicDesign) -> Result<()> {
        let n = design.stages();
        let widths_match = self.integrators.len() == n
            && self.comb_delays.len() == n
            && self
                .integrators
                .iter()
                .zip(&design.integrator_widths)
                .all(|(a, &w)| a.width() == w)
            && self.comb_delays.iter().enumerate().all(|(j, d)| {
                d.len() == design.params.delay as usize
                    && d.iter().all(|x| x.width() == design.comb_input_width(j))
            });
        if !widths_match || self.phase >= design.params.decimation {
            return Err(Error::Contract(
                "CIC state was not initialized for this design".into(),
            ));
        }
        Ok(())
    }

    fn integrate(&mut self, design: &CicDesign, x: FixedWord, arch: Architecture) -> Result<()> {
        let w = &design.integrator_widths;
        let x = resize_extend(x, w[0])?;
        let mut step = |acc: &mut FixedWord, input: FixedWord| -> Result<()> {
            let sum = mcla_add(*acc, input, false)?.sum;
            if acc.value() as i128 + input.value() as i128 != sum.value() as i128 {
                self.stats.integrator_wraps += 1;
            }
            *acc = sum;
            Ok(())
        };
        // The pipelined cascade updates the last stage first, so each stage
        // reads its predecessor's value from the previous clock.
        let n = self.integrators.len();
        for k in 0..n {
            let j = match arch {
                Architecture::Direct => k,
                Architecture::Pipelined => n - 1 - k,
            };
            let input = if j == 0 {
                x
            } else {
                truncate_lsb(self.integrators[j - 1], w[j])?
            };
            step(&mut self.integrators[j], input)?;
        }
        Ok(())
    }

    fn comb(&mut self, design: &CicDesign) -> Result<FixedWord> {
        let last = *self.integrators.last().expect("N >= 1");
        let mut v = truncate_lsb(last, design.comb_widths[0])?;
        for (j, line) in self.comb_delays.iter_mut().enumerate() {
            let delayed = line.pop_front().expect("delay line holds M words");
            line.push_back(v);
            let diff = mcla_add(v, !delayed, true)?.sum;
            v = truncate_lsb(diff, design.comb_widths[j])?;
        }
        Ok(v)
    }

    fn push(
        &mut self,
        design: &CicDesign,
        x: FixedWord,
        arch: Architecture,
    ) -> Result<Option<FixedWord>> {
        if x.width() != design.params.input_width {
            return Err(Error::WidthMismatch {
                expected: design.params.input_width,
                found: x.width(),
            });
        }
        self.integrate(design, x, arch)?;
        self.stats.inputs += 1;
        let emit = self.phase == self.emit_phase;
        self.phase = (self.phase + 1) % design.params.decimation;
        if emit {
            self.stats.outputs += 1;
            Ok(Some(self.comb(design)?))
        } else {
            Ok(None)
        }
    }
}

fn run(
    design: &CicDesign,
    state: &mut CicState,
    input: &[FixedWord],
    arch: Architecture,
) -> Result<Vec<FixedWord>> {
    state.check_matches(design)?;
    let mut out = Vec::with_capacity(input.len() / design.params.decimation as usize + 1);
    for &x in input {
        if let Some(y) = state.push(design, x, arch)? {
            out.push(y);
        }
    }
    Ok(out)
}

/// Runs the direct (non-pipelined) datapath over `input`, continuing from
/// `state`. Emits one sample per R inputs.
pub fn process(
    design: &CicDesign,
    state: &mut CicState,
    input: &[FixedWord],
) -> Result<Vec<FixedWord>> {
    run(design, state, input, Architecture::Direct)
}

/// Pipelined integrator cascade; the comb section is unchanged.
pub fn process_pipelined(
    design: &CicDesign,
    state: &mut CicState,
    input: &[FixedWord],
) -> Result<Vec<FixedWord>> {
    run(design, state, input, Architecture::Pipelined)
}

pub fn process_with(
    design: &CicDesign,
    state: &mut CicState,
    input: &[FixedWord],
    arch: Architecture,
) -> Result<Vec<FixedWord>> {
    run(design, state, input, arch)
}
