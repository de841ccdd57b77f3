//! Command-line front end: argument parsing, run configuration and the
//! subcommands. `main.rs` only maps the outcome to an exit code.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;

use config::{AdderMode, ResponseMode, RunConfig, SnrSource, SourceKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cicsim::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A self-check ran and found mismatches; the payload is the report.
    #[error("verification failed\n{0}")]
    Verification(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(cicsim::Error::Io { .. }) | CliError::Io { .. } => EXIT_IO,
            CliError::Core(_) | CliError::Config(_) => EXIT_CONFIG,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cicsim",
    version,
    about = "Bit-accurate CIC decimation filter simulator"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for reports, CSVs and sample files.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct CicArgs {
    #[arg(long)]
    pub stages: Option<u32>,
    #[arg(long)]
    pub delay: Option<u32>,
    #[arg(long)]
    pub decimation: Option<u32>,
    #[arg(long)]
    pub input_width: Option<u32>,
    /// Comma-separated integrator register widths.
    #[arg(long, value_delimiter = ',')]
    pub integrator_widths: Option<Vec<u32>>,
    /// Comma-separated comb register widths.
    #[arg(long, value_delimiter = ',')]
    pub comb_widths: Option<Vec<u32>>,
}

#[derive(Debug, Args, Default)]
pub struct SourceArgs {
    #[arg(long = "source")]
    pub kind: Option<SourceKind>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub frequency: Option<f64>,
    #[arg(long)]
    pub value: Option<i64>,
    /// Read input samples from a file instead of generating them.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Size a CIC and report growth, widths and the truncation bound.
    Design {
        #[command(flatten)]
        cic: CicArgs,
    },
    /// Run the fixed-point CIC over a source and write its output.
    Simulate {
        #[command(flatten)]
        cic: CicArgs,
        #[command(flatten)]
        source: SourceArgs,
        /// Use the pipelined integrator cascade.
        #[arg(long)]
        pipelined: bool,
    },
    /// Tabulate the CIC or whole-chain magnitude response as CSV.
    Response {
        #[command(flatten)]
        cic: CicArgs,
        #[arg(long)]
        mode: Option<ResponseMode>,
        /// Grid intervals; the CSV has one more row.
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        f_max: Option<f64>,
        #[arg(long)]
        f_pass: Option<f64>,
    },
    /// Run the full decimation chain over a source.
    Chain {
        #[command(flatten)]
        cic: CicArgs,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        f_pass: Option<f64>,
    },
    /// Measure in-band SNR before and after decimation.
    Snr {
        #[command(flatten)]
        cic: CicArgs,
        #[arg(long = "source")]
        source: Option<SnrSource>,
        /// Measure the source only.
        #[arg(long)]
        no_chain: bool,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        tone_bin: Option<usize>,
        #[arg(long)]
        fft_len: Option<usize>,
    },
    /// Check the lookahead adder against a behavioral adder.
    AdderVerify {
        #[arg(long)]
        width: Option<u32>,
        #[arg(long, conflicts_with = "random")]
        exhaustive: bool,
        /// Number of random cases.
        #[arg(long)]
        random: Option<u64>,
    },
    /// Emit, self-check and write the adder's gate netlist.
    Netlist {
        #[arg(long)]
        width: Option<u32>,
        #[arg(long)]
        path: Option<PathBuf>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl CicArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.cic.stages, self.stages);
        set(&mut cfg.cic.delay, self.delay);
        set(&mut cfg.cic.decimation, self.decimation);
        set(&mut cfg.cic.input_width, self.input_width);
        if self.integrator_widths.is_some() {
            cfg.cic.integrator_widths = self.integrator_widths;
        }
        if self.comb_widths.is_some() {
            cfg.cic.comb_widths = self.comb_widths;
        }
    }
}

impl SourceArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.source.kind, self.kind);
        set(&mut cfg.source.samples, self.samples);
        set(&mut cfg.source.amplitude, self.amplitude);
        set(&mut cfg.source.frequency, self.frequency);
        set(&mut cfg.source.value, self.value);
        if let Some(p) = self.input {
            cfg.source.kind = SourceKind::File;
            cfg.source.path = Some(p);
        }
    }
}

/// Which subcommand to run once flags are folded into the config.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Design,
    Simulate,
    Response,
    Chain,
    Snr,
    AdderVerify,
    Netlist,
}

/// Loads the config file (if any) and applies flag overrides.
pub fn resolve(cli: Cli) -> Result<(Action, RunConfig), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.output.dir, cli.out_dir);
    let action = match cli.command {
        Command::Design { cic } => {
            cic.apply(&mut cfg);
            Action::Design
        }
        Command::Simulate {
            cic,
            source,
            pipelined,
        } => {
            cic.apply(&mut cfg);
            source.apply(&mut cfg);
            cfg.cic.pipelined |= pipelined;
            Action::Simulate
        }
        Command::Response {
            cic,
            mode,
            points,
            f_max,
            f_pass,
        } => {
            cic.apply(&mut cfg);
            set(&mut cfg.response.mode, mode);
            set(&mut cfg.response.points, points);
            if f_max.is_some() {
                cfg.response.f_max = f_max;
            }
            set(&mut cfg.chain.f_pass, f_pass);
            Action::Response
        }
        Command::Chain {
            cic,
            source,
            f_pass,
        } => {
            cic.apply(&mut cfg);
            source.apply(&mut cfg);
            set(&mut cfg.chain.f_pass, f_pass);
            Action::Chain
        }
        Command::Snr {
            cic,
            source,
            no_chain,
            amplitude,
            tone_bin,
            fft_len,
        } => {
            cic.apply(&mut cfg);
            set(&mut cfg.snr.source, source);
            if no_chain {
                cfg.snr.chain = false;
            }
            set(&mut cfg.snr.amplitude, amplitude);
            set(&mut cfg.snr.tone_bin, tone_bin);
            set(&mut cfg.snr.fft_len, fft_len);
            Action::Snr
        }
        Command::AdderVerify {
            width,
            exhaustive,
            random,
        } => {
            set(&mut cfg.adder.width, width);
            if exhaustive {
                cfg.adder.mode = AdderMode::Exhaustive;
            }
            if let Some(n) = random {
                cfg.adder.mode = AdderMode::Random;
                cfg.adder.count = n;
            }
            Action::AdderVerify
        }
        Command::Netlist { width, path } => {
            set(&mut cfg.netlist.width, width);
            if path.is_some() {
                cfg.netlist.path = path;
            }
            Action::Netlist
        }
    };
    Ok((action, cfg))
}

/// Runs one resolved action and returns its text report.
pub fn execute(action: Action, cfg: &RunConfig) -> Result<String, CliError> {
    std::fs::create_dir_all(&cfg.output.dir).map_err(|e| CliError::io(&cfg.output.dir, e))?;
    match action {
        Action::Design => commands::cmd_design(cfg),
        Action::Simulate => commands::cmd_simulate(cfg),
        Action::Response => commands::cmd_response(cfg),
        Action::Chain => commands::cmd_chain(cfg),
        Action::Snr => commands::cmd_snr(cfg),
        Action::AdderVerify => commands::cmd_adder_verify(cfg),
        Action::Netlist => commands::cmd_netlist(cfg),
    }
}

pub fn run(cli: Cli) -> Result<String, CliError> {
    let (action, cfg) = resolve(cli)?;
    execute(action, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> (Action, RunConfig) {
        let mut full = vec!["cicsim"];
        full.extend_from_slice(args);
        resolve(Cli::try_parse_from(full).unwrap()).unwrap()
    }

    #[test]
    fn flags_override_defaults() {
        let (a, c) = parse(&[
            "design",
            "--stages",
            "3",
            "--decimation",
            "8",
            "--seed",
            "4",
        ]);
        assert_eq!(a, Action::Design);
        assert_eq!((c.cic.stages, c.cic.decimation, c.seed), (3, 8, 4));
        let (_, c) = parse(&["simulate", "--pipelined", "--input", "x.bin"]);
        assert!(c.cic.pipelined);
        assert_eq!(c.source.kind, SourceKind::File);
        let (_, c) = parse(&["adder-verify", "--width", "25", "--random", "10"]);
        assert_eq!(
            (c.adder.width, c.adder.mode, c.adder.count),
            (25, AdderMode::Random, 10)
        );
        let (_, c) = parse(&[
            "simulate",
            "--integrator-widths",
            "25,22,20,18,16",
            "--comb-widths",
            "16,16,16,16,16",
        ]);
        assert_eq!(c.cic.integrator_widths, Some(vec![25, 22, 20, 18, 16]));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "seed = 9\n[cic]\nstages = 2\ndecimation = 4\n").unwrap();
        let (_, c) = parse(&["design", "--config", p.to_str().unwrap(), "--stages", "3"]);
        assert_eq!((c.seed, c.cic.stages, c.cic.decimation), (9, 3, 4));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), EXIT_CONFIG);
        assert_eq!(
            CliError::Core(cicsim::Error::Contract("x".into())).exit_code(),
            EXIT_CONFIG
        );
        assert_eq!(
            CliError::io(Path::new("p"), std::io::Error::other("x")).exit_code(),
            EXIT_IO
        );
        assert_eq!(
            CliError::Verification(String::new()).exit_code(),
            EXIT_VERIFY
        );
    }
}
