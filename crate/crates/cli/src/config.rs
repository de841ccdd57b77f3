//! Run configuration: a TOML file of sections, each field optional.

use std::path::{Path, PathBuf};

use cicsim::chain::ChainSpec;
use cicsim::cic::{CicParams, Schedule};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub cic: CicSection,
    pub chain: ChainSection,
    pub source: SourceSection,
    pub response: ResponseSection,
    pub snr: SnrSection,
    pub adder: AdderSection,
    pub netlist: NetlistSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CicSection {
    pub stages: u32,
    pub delay: u32,
    pub decimation: u32,
    pub input_width: u32,
    /// Omit both lists for full-width registers.
    pub integrator_widths: Option<Vec<u32>>,
    pub comb_widths: Option<Vec<u32>>,
    pub pipelined: bool,
}

impl Default for CicSection {
    fn default() -> Self {
        CicSection {
            stages: 5,
            delay: 1,
            decimation: 16,
            input_width: 6,
            integrator_widths: None,
            comb_widths: None,
            pipelined: false,
        }
    }
}

impl CicSection {
    pub fn params(&self) -> CicParams {
        CicParams {
            stages: self.stages,
            delay: self.delay,
            decimation: self.decimation,
            input_width: self.input_width,
        }
    }

    pub fn schedule(&self) -> Result<Option<Schedule>, CliError> {
        match (&self.integrator_widths, &self.comb_widths) {
            (None, None) => Ok(None),
            (Some(i), Some(c)) => Ok(Some(Schedule {
                integrator_widths: i.clone(),
                comb_widths: c.clone(),
            })),
            _ => Err(CliError::Config(
                "[cic] integrator_widths and comb_widths must be given together".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    /// Input sample rate in Hz.
    pub fs_in: u64,
    pub f_pass: f64,
    pub halfband_atten_db: f64,
    pub droop_taps: usize,
    pub frac_bits: u32,
}

impl Default for ChainSection {
    fn default() -> Self {
        let d = ChainSpec::default();
        ChainSection {
            fs_in: d.fs_in as u64,
            f_pass: d.f_pass,
            halfband_atten_db: d.halfband_atten_db,
            droop_taps: d.droop_taps,
            frac_bits: d.frac_bits,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Sine,
    Impulse,
    Dc,
    Noise,
    /// Sine through the second-order sigma-delta modulator.
    Sdm,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub kind: SourceKind,
    pub samples: usize,
    /// Fraction of full scale for sine and sdm sources.
    pub amplitude: f64,
    pub frequency: f64,
    /// Code for impulse and dc sources.
    pub value: i64,
    /// Input file for `kind = "file"`.
    pub path: Option<PathBuf>,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            kind: SourceKind::Impulse,
            samples: 4096,
            amplitude: 0.5,
            frequency: 1000.0,
            value: 1,
            path: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseMode {
    Cic,
    Chain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseSection {
    pub mode: ResponseMode,
    /// Grid intervals; the CSV has `points + 1` rows.
    pub points: usize,
    /// Top of the grid in Hz; defaults to half the input rate.
    pub f_max: Option<f64>,
}

impl Default for ResponseSection {
    fn default() -> Self {
        ResponseSection {
            mode: ResponseMode::Cic,
            points: 4096,
            f_max: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SnrSource {
    /// Modulated sine, the chain's intended input.
    Sdm,
    /// Unquantized sine with no noise at all.
    Sine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrSection {
    pub source: SnrSource,
    /// Run the decimation chain and measure after it as well.
    pub chain: bool,
    pub amplitude: f64,
    /// FFT length at the output rate; the input-rate FFT is this times the
    /// total decimation, so both share one bin width.
    pub fft_len: usize,
    /// Tone position in bins of that shared grid.
    pub tone_bin: usize,
    pub band_lo: f64,
    pub band_hi: f64,
    pub leakage_bins: usize,
    /// Output-rate samples discarded while the chain settles.
    pub settle: usize,
    /// Peak amplitude of the uniform dither added to the modulator input.
    pub dither: f64,
}

impl Default for SnrSection {
    fn default() -> Self {
        SnrSection {
            source: SnrSource::Sdm,
            chain: true,
            amplitude: 0.5,
            fft_len: 8192,
            tone_bin: 171,
            band_lo: 0.0,
            band_hi: 20_000.0,
            leakage_bins: 3,
            settle: 256,
            dither: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AdderMode {
    Exhaustive,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdderSection {
    pub width: u32,
    pub mode: AdderMode,
    /// Case count in random mode.
    pub count: u64,
}

impl Default for AdderSection {
    fn default() -> Self {
        AdderSection {
            width: 8,
            mode: AdderMode::Exhaustive,
            count: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetlistSection {
    pub width: u32,
    /// Defaults to `netlist_w<width>.txt` in the output directory.
    pub path: Option<PathBuf>,
}

impl Default for NetlistSection {
    fn default() -> Self {
        NetlistSection {
            width: 8,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn chain_spec(&self) -> Result<ChainSpec, CliError> {
        Ok(ChainSpec {
            cic: self.cic.params(),
            schedule: self.cic.schedule()?,
            fs_in: self.chain.fs_in as f64,
            f_pass: self.chain.f_pass,
            halfband_atten_db: self.chain.halfband_atten_db,
            droop_taps: self.chain.droop_taps,
            frac_bits: self.chain.frac_bits,
        })
    }
}
