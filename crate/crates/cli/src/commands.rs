//! Subcommand implementations. Each returns a `key = value` report that is
//! also written next to its other outputs.

use std::f64::consts::PI;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use cicsim::analysis::{export_csv, measure_snr, spectrum, Spectrum, Window};
use cicsim::chain::{
    self, chain_process, design_chain, ChainConfig, ChainState, RESPONSE_FLOOR_DB,
};
use cicsim::cic::{self, design, process_with, Architecture, CicDesign, CicState};
use cicsim::fixed_point::wrap;
use cicsim::mcla::mcla_add;
use cicsim::netlist::emit_netlist;
use cicsim::samplefile::{read_samples, write_samples, SampleFile};
use cicsim::sources::{self, seeded_rng, SdmState, SeededRng};
use cicsim::FixedWord;
use rand::Rng;

use crate::config::{AdderMode, ResponseMode, RunConfig, SnrSource, SourceKind};
use crate::CliError;

/// Widest adder the exhaustive mode will enumerate.
pub const EXHAUSTIVE_WIDTH_CAP: u32 = 10;
pub const NETLIST_VECTORS: usize = 10_000;

#[derive(Default)]
pub struct Report(String);

impl Report {
    pub fn add(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.0.push_str(&format!("{key} = {value}\n"));
        self
    }

    fn write(&self, path: &Path) -> Result<String, CliError> {
        std::fs::write(path, &self.0).map_err(|e| CliError::io(path, e))?;
        Ok(self.0.clone())
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output.dir.join(name)
}

/// Name of an output file as shown in reports, relative to the output
/// directory so reports do not depend on where a run was written.
fn shown(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn cic_design(cfg: &RunConfig) -> Result<CicDesign, CliError> {
    Ok(design(cfg.cic.params(), cfg.cic.schedule()?)?)
}

pub fn cmd_design(cfg: &RunConfig) -> Result<String, CliError> {
    let d = cic_design(cfg)?;
    let p = d.params;
    let mut r = Report::default();
    r.add("command", "design")
        .add("stages", p.stages)
        .add("delay", p.delay)
        .add("decimation", p.decimation)
        .add("input_width", p.input_width)
        .add("g_max", &d.g_max)
        .add("b_max", d.b_max)
        .add("lossless_width", cic::lossless_width(&p))
        .add("integrator_widths", join(&d.integrator_widths))
        .add("comb_widths", join(&d.comb_widths))
        .add("output_width", d.output_width())
        .add("dropped_bits", d.dropped_bits())
        .add("truncation_error_bound", cic::truncation_error_bound(&d)?);
    r.write(&out_path(cfg, "design.txt"))
}

/// Generates (or reads) the configured source as `width`-bit words.
pub fn make_source(cfg: &RunConfig, width: u32, fs: f64) -> Result<Vec<FixedWord>, CliError> {
    let s = &cfg.source;
    let mut rng = seeded_rng(cfg.seed);
    let words = match s.kind {
        SourceKind::Sine => sources::gen_sine(s.amplitude, s.frequency, fs, s.samples, width)?,
        SourceKind::Impulse => sources::gen_impulse(s.value, s.samples, width)?,
        SourceKind::Dc => sources::gen_dc(s.value, s.samples, width)?,
        SourceKind::Noise => sources::gen_noise(&mut rng, s.samples, width)?,
        SourceKind::Sdm => {
            let x = sources::sine_samples(s.amplitude, s.frequency, fs, 0.0, s.samples);
            SdmState::default().modulate(&x, width)?
        }
        SourceKind::File => {
            let path = s
                .path
                .as_ref()
                .ok_or_else(|| CliError::Config("[source] kind = \"file\" needs a path".into()))?;
            let file = read_samples(path)?;
            if file.width != width {
                return Err(cicsim::Error::WidthMismatch {
                    expected: width,
                    found: file.width,
                }
                .into());
            }
            file.samples
        }
    };
    Ok(words)
}

fn rate_hz(fs: f64) -> u64 {
    fs.round() as u64
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<String, CliError> {
    let d = cic_design(cfg)?;
    let fs = cfg.chain.fs_in as f64;
    let input = make_source(cfg, d.params.input_width, fs)?;
    let arch = if cfg.cic.pipelined {
        Architecture::Pipelined
    } else {
        Architecture::Direct
    };
    let mut state = CicState::new(&d);
    let out = process_with(&d, &mut state, &input, arch)?;
    let fs_out = fs / d.params.decimation as f64;
    let file = SampleFile::new(d.output_width(), rate_hz(fs_out), out)?;
    let path = out_path(cfg, "simulate.bin");
    write_samples(&path, &file)?;

    let mut r = Report::default();
    r.add("command", "simulate")
        .add(
            "architecture",
            if cfg.cic.pipelined {
                "pipelined"
            } else {
                "direct"
            },
        )
        .add(
            "latency_input_samples",
            if cfg.cic.pipelined { d.stages() - 1 } else { 0 },
        )
        .add("input_samples", state.stats.inputs)
        .add("output_samples", state.stats.outputs)
        .add("input_width", d.params.input_width)
        .add("output_width", d.output_width())
        .add("dropped_bits", d.dropped_bits())
        .add("integrator_wraps", state.stats.integrator_wraps)
        .add("output_rate_hz", rate_hz(fs_out))
        .add("output_file", shown(&path));
    r.write(&out_path(cfg, "simulate.txt"))
}

fn response_grid(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let nyquist = cfg.chain.fs_in as f64 / 2.0;
    let f_max = cfg.response.f_max.unwrap_or(nyquist);
    let n = cfg.response.points;
    if n == 0 {
        return Err(CliError::Config(
            "[response] points must be at least 1".into(),
        ));
    }
    if !(f_max > 0.0 && f_max <= nyquist) {
        return Err(CliError::Config(format!(
            "response grid top {f_max} Hz must lie in (0, {nyquist}] Hz"
        )));
    }
    Ok((0..=n).map(|i| f_max * i as f64 / n as f64).collect())
}

/// CIC magnitude in dB relative to DC, clamped at the response floor.
pub fn cic_response_db(d: &CicDesign, fs: f64, grid: &[f64]) -> Vec<f64> {
    let dc = cic::frequency_response_mag(&d.params, 0.0);
    grid.iter()
        .map(|&f| {
            let db = 20.0 * (cic::frequency_response_mag(&d.params, f / fs) / dc).log10();
            if db.is_finite() {
                db.max(RESPONSE_FLOOR_DB)
            } else {
                RESPONSE_FLOOR_DB
            }
        })
        .collect()
}

pub fn cmd_response(cfg: &RunConfig) -> Result<String, CliError> {
    let grid = response_grid(cfg)?;
    let fs = cfg.chain.fs_in as f64;
    let mut r = Report::default();
    r.add("command", "response");
    let db = match cfg.response.mode {
        ResponseMode::Cic => {
            r.add("mode", "cic");
            cic_response_db(&cic_design(cfg)?, fs, &grid)
        }
        ResponseMode::Chain => {
            r.add("mode", "chain");
            let c = design_chain(&cfg.chain_spec()?)?;
            let db = chain::chain_response(&c, &grid)?;
            let pass: Vec<f64> = grid
                .iter()
                .zip(&db)
                .filter(|(f, _)| **f <= c.f_pass)
                .map(|(_, d)| *d)
                .collect();
            let hi = pass.iter().cloned().fold(f64::MIN, f64::max);
            let lo = pass.iter().cloned().fold(f64::MAX, f64::min);
            let droop = cic_response_db(&c.cic, fs, &[c.f_pass])[0];
            r.add("f_pass_hz", c.f_pass)
                .add("passband_ripple_db", format!("{:.6}", hi - lo))
                .add("cic_droop_at_f_pass_db", format!("{:.6}", -droop));
            db
        }
    };
    let path = out_path(cfg, "response.csv");
    export_csv(grid.iter().copied().zip(db.iter().copied()), &path)?;
    r.add("rows", grid.len())
        .add("f_max_hz", grid.last().copied().unwrap_or(0.0))
        .add(
            "min_db",
            format!("{:.6}", db.iter().cloned().fold(f64::MAX, f64::min)),
        )
        .add("csv", shown(&path));
    r.write(&out_path(cfg, "response.txt"))
}

fn chain_config(cfg: &RunConfig) -> Result<ChainConfig, CliError> {
    Ok(design_chain(&cfg.chain_spec()?)?)
}

pub fn cmd_chain(cfg: &RunConfig) -> Result<String, CliError> {
    let c = chain_config(cfg)?;
    let input = make_source(cfg, c.cic.params.input_width, c.fs_in)?;
    let mut state = ChainState::new(&c);
    let out = chain_process(&c, &mut state, &input)?;
    let n_out = out.len();
    let file = SampleFile::new(c.output_width, rate_hz(c.output_rate()), out)?;
    let path = out_path(cfg, "chain.bin");
    write_samples(&path, &file)?;

    let mut r = Report::default();
    r.add("command", "chain")
        .add("stage_factors", join(&c.stage_factors()))
        .add("total_decimation", c.total_decimation())
        .add("output_rate_hz", rate_hz(c.output_rate()))
        .add("f_pass_hz", c.f_pass)
        .add("halfband1_taps", c.hb1.len())
        .add("droop_taps", c.droop.len())
        .add("halfband2_taps", c.hb2.len())
        .add("frac_bits", c.fixed_point_frac_bits)
        .add(
            "alias_rejection_db",
            format!("{:.3}", c.alias_rejection_db()),
        )
        .add("input_samples", input.len())
        .add("output_samples", n_out)
        .add("output_width", c.output_width)
        .add("output_file", shown(&path));
    r.write(&out_path(cfg, "chain.txt"))
}

/// Result of one SNR experiment.
#[derive(Clone, Debug)]
pub struct SnrRun {
    pub tone_hz: f64,
    pub before: Spectrum,
    pub before_db: f64,
    pub after: Option<(Spectrum, f64)>,
    pub modulator_saturations: u64,
}

/// Tone (optionally modulated) → optional chain → windowed spectra → SNR.
///
/// The source FFT spans `fft_len · D` input samples and the output FFT
/// `fft_len` output samples, `D` being the chain's total decimation, so both
/// spectra share one bin width and the tone sits on a bin of each. The seed
/// picks the tone phase and the dither sequence.
pub fn snr_run(cfg: &RunConfig) -> Result<SnrRun, CliError> {
    let s = &cfg.snr;
    let params = cfg.cic.params();
    params.validate()?;
    let fs = cfg.chain.fs_in as f64;
    let decim = params.decimation as usize * 8;
    let n_before = s.fft_len * decim;
    let tone_hz = s.tone_bin as f64 * fs / n_before as f64;
    let total = (s.settle + s.fft_len) * decim;

    let mut rng: SeededRng = seeded_rng(cfg.seed);
    let phase = 2.0 * PI * rng.random::<f64>();
    let clean = sources::sine_samples(s.amplitude, tone_hz, fs, phase, total);
    let width = params.input_width;

    let mut saturations = 0;
    let (words, before_sig, full_scale): (Option<Vec<FixedWord>>, Vec<f64>, f64) = match s.source {
        SnrSource::Sdm => {
            let x: Vec<f64> = clean
                .iter()
                .map(|v| v + s.dither * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let mut sdm = SdmState::default();
            let y = sdm.modulate(&x, width)?;
            saturations = sdm.saturations;
            let sig = y[total - n_before..]
                .iter()
                .map(|w| w.value() as f64)
                .collect();
            (Some(y), sig, 1.0)
        }
        SnrSource::Sine if s.chain => {
            let fsc = FixedWord::max_value(width) as f64;
            let y = clean
                .iter()
                .map(|v| FixedWord::new((v * fsc).round() as i64, width))
                .collect::<cicsim::Result<Vec<_>>>()?;
            let sig = y[total - n_before..]
                .iter()
                .map(|w| w.value() as f64)
                .collect();
            (Some(y), sig, fsc)
        }
        SnrSource::Sine => (None, clean[total - n_before..].to_vec(), 1.0),
    };

    let band = (s.band_lo, s.band_hi);
    let before = spectrum(&before_sig, fs, Window::Hann, full_scale)?;
    let before_db = measure_snr(&before, tone_hz, band, s.leakage_bins)?;

    let after = if s.chain {
        let c = chain_config(cfg)?;
        let words = words.expect("chain runs on quantized words");
        let out = chain_process(&c, &mut ChainState::new(&c), &words)?;
        let sig: Vec<f64> = out[out.len() - s.fft_len..]
            .iter()
            .map(|w| w.value() as f64)
            .collect();
        let gain = cic::frequency_response_mag(&c.cic.params, 0.0)
            / 2f64.powi(c.cic.dropped_bits() as i32);
        let spec = spectrum(&sig, c.output_rate(), Window::Hann, full_scale * gain)?;
        let db = measure_snr(&spec, tone_hz, band, s.leakage_bins)?;
        Some((spec, db))
    } else {
        None
    };

    Ok(SnrRun {
        tone_hz,
        before,
        before_db,
        after,
        modulator_saturations: saturations,
    })
}

pub fn cmd_snr(cfg: &RunConfig) -> Result<String, CliError> {
    let run = snr_run(cfg)?;
    let s = &cfg.snr;
    let nyq_out = cfg.chain.fs_in as f64 / (cfg.cic.decimation as f64 * 16.0);
    let before_csv = out_path(cfg, "snr_before.csv");
    export_csv(
        run.before.rows().filter(|(f, _)| *f <= nyq_out),
        &before_csv,
    )?;

    let mut r = Report::default();
    r.add("command", "snr")
        .add("seed", cfg.seed)
        .add(
            "source",
            match s.source {
                SnrSource::Sdm => "sdm",
                SnrSource::Sine => "sine",
            },
        )
        .add("tone_hz", format!("{:.6}", run.tone_hz))
        .add("band_hz", format!("{}..{}", s.band_lo, s.band_hi))
        .add("window", run.before.window.name())
        .add("leakage_bins", s.leakage_bins)
        .add("bin_width_hz", format!("{:.6}", run.before.bin_width()))
        .add("before_rate_hz", cfg.chain.fs_in)
        .add("before_samples", run.before.length)
        .add("before_snr_db", format!("{:.6}", run.before_db))
        .add("modulator_saturations", run.modulator_saturations)
        .add("before_csv", shown(&before_csv));
    if let Some((spec, db)) = &run.after {
        let after_csv = out_path(cfg, "snr_after.csv");
        export_csv(spec.rows(), &after_csv)?;
        r.add("after_rate_hz", rate_hz(spec.fs))
            .add("after_samples", spec.length)
            .add("after_snr_db", format!("{db:.6}"))
            .add("snr_change_db", format!("{:.6}", db - run.before_db))
            .add("after_csv", shown(&after_csv));
    }
    r.write(&out_path(cfg, "snr.txt"))
}

/// Behavioral reference: `wrap(a + b + c0)` and bit `W` of the unsigned sum.
pub fn reference_add(a: FixedWord, b: FixedWord, c0: bool) -> (FixedWord, bool) {
    let w = a.width();
    let raw = a.to_bits() as u128 + b.to_bits() as u128 + c0 as u128;
    let sum = wrap(a.value() as i128 + b.value() as i128 + c0 as i128, w).expect("valid width");
    (sum, (raw >> w) & 1 == 1)
}

pub fn cmd_adder_verify(cfg: &RunConfig) -> Result<String, CliError> {
    let a = &cfg.adder;
    let w = a.width;
    if !(1..=64).contains(&w) {
        return Err(cicsim::Error::InvalidWidth(w).into());
    }
    let mut cases = 0u64;
    let mut failures = 0u64;
    let mut first_failure = None;
    let mut check = |x: u64, y: u64, c: bool| -> Result<(), CliError> {
        let (xa, yb) = (FixedWord::from_bits(x, w)?, FixedWord::from_bits(y, w)?);
        let got = mcla_add(xa, yb, c)?;
        let (sum, carry) = reference_add(xa, yb, c);
        cases += 1;
        if got.sum != sum || got.carry_out != carry {
            failures += 1;
            first_failure.get_or_insert(format!("a={} b={} c0={}", xa, yb, c as u8));
        }
        Ok(())
    };
    let mode = match a.mode {
        AdderMode::Exhaustive => {
            if w > EXHAUSTIVE_WIDTH_CAP {
                return Err(CliError::Config(format!(
                    "exhaustive verification is limited to width <= {EXHAUSTIVE_WIDTH_CAP} (got {w}); use random mode"
                )));
            }
            for x in 0..1u64 << w {
                for y in 0..1u64 << w {
                    check(x, y, false)?;
                    check(x, y, true)?;
                }
            }
            "exhaustive"
        }
        AdderMode::Random => {
            let mut rng = seeded_rng(cfg.seed);
            for _ in 0..a.count {
                check(rng.random(), rng.random(), rng.random())?;
            }
            "random"
        }
    };
    let mut r = Report::default();
    r.add("command", "adder-verify")
        .add("width", w)
        .add("mode", mode)
        .add("cases", cases)
        .add("failures", failures);
    if let Some(f) = first_failure {
        r.add("first_failure", f);
    }
    r.add("result", if failures == 0 { "pass" } else { "fail" });
    let text = r.write(&out_path(cfg, "adder_verify.txt"))?;
    if failures > 0 {
        return Err(CliError::Verification(text));
    }
    Ok(text)
}

pub fn cmd_netlist(cfg: &RunConfig) -> Result<String, CliError> {
    let w = cfg.netlist.width;
    let netlist = emit_netlist(w)?;
    let compiled = netlist.compile()?;
    let mut rng = seeded_rng(cfg.seed);
    let mut mismatches = 0usize;
    for _ in 0..NETLIST_VECTORS {
        let a = FixedWord::from_bits(rng.random(), w)?;
        let b = FixedWord::from_bits(rng.random(), w)?;
        let c: bool = rng.random();
        if compiled.add(a, b, c)? != mcla_add(a, b, c)? {
            mismatches += 1;
        }
    }
    let path = cfg
        .netlist
        .path
        .clone()
        .unwrap_or_else(|| out_path(cfg, &format!("netlist_w{w}.txt")));
    let mut r = Report::default();
    r.add("command", "netlist")
        .add("width", w)
        .add("gates", netlist.gates.len())
        .add("group_blocks", netlist.group_block_count())
        .add("verified_vectors", NETLIST_VECTORS)
        .add("mismatches", mismatches);
    if mismatches > 0 {
        r.add("result", "fail");
        return Err(CliError::Verification(r.0));
    }
    std::fs::write(&path, netlist.to_text()).map_err(|e| CliError::io(&path, e))?;
    r.add("result", "pass").add("path", shown(&path));
    r.write(&out_path(cfg, "netlist.txt"))
}
