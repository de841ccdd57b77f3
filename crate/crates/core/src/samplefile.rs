//! Binary sample streams.
//!
//! Layout, all little-endian: a 16-byte header (`b"CICS"`, `u16` version,
//! `u8` word width, one reserved byte, `u64` sample rate in Hz) followed by
//! one `i32` per sample.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fixed_point::FixedWord;

pub const MAGIC: [u8; 4] = *b"CICS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
/// Samples are stored as `i32`.
pub const MAX_SAMPLE_WIDTH: u32 = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleFile {
    pub width: u32,
    /// Sample rate in Hz.
    pub fs: u64,
    pub samples: Vec<FixedWord>,
}

impl SampleFile {
    pub fn new(width: u32, fs: u64, samples: Vec<FixedWord>) -> Result<Self> {
        if !(1..=MAX_SAMPLE_WIDTH).contains(&width) {
            return Err(Error::Config(format!(
                "sample files hold words of 1..={MAX_SAMPLE_WIDTH} bits (got {width})"
            )));
        }
        if let Some(w) = samples.iter().find(|w| w.width() != width) {
            return Err(Error::WidthMismatch {
                expected: width,
                found: w.width(),
            });
        }
        Ok(SampleFile { width, fs, samples })
    }

    pub fn encode(&self, out: &mut impl Write) -> io::Result<()> {
        let mut header = [0u8; HEADER_LEN];
        header[..4].copy_from_slice(&MAGIC);
        header[4..6].copy_from_slice(&VERSION.to_le_bytes());
        header[6] = self.width as u8;
        header[8..].copy_from_slice(&self.fs.to_le_bytes());
        out.write_all(&header)?;
        for s in &self.samples {
            out.write_all(&(s.value() as i32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn decode(input: &mut impl Read) -> io::Result<Self> {
        let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
        let mut header = [0u8; HEADER_LEN];
        input.read_exact(&mut header)?;
        if header[..4] != MAGIC {
            return Err(bad("not a sample file (bad magic)".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != VERSION {
            return Err(bad(format!("unsupported sample file version {version}")));
        }
        let width = header[6] as u32;
        if !(1..=MAX_SAMPLE_WIDTH).contains(&width) {
            return Err(bad(format!("invalid sample width {width}")));
        }
        let fs = u64::from_le_bytes(header[8..].try_into().expect("8 bytes"));
        let mut body = Vec::new();
        input.read_to_end(&mut body)?;
        if body.len() % 4 != 0 {
            return Err(bad(format!(
                "{} trailing bytes after last sample",
                body.len() % 4
            )));
        }
        let samples = body
            .chunks_exact(4)
            .map(|c| {
                let v = i32::from_le_bytes(c.try_into().expect("4 bytes")) as i64;
                FixedWord::new(v, width)
                    .map_err(|_| bad(format!("sample {v} does not fit {width} bits")))
            })
            .collect::<io::Result<_>>()?;
        Ok(SampleFile { width, fs, samples })
    }
}

pub fn write_samples(path: &Path, file: &SampleFile) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(f);
    file.encode(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_samples(path: &Path) -> Result<SampleFile> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    SampleFile::decode(&mut BufReader::new(f)).map_err(|e| Error::io(path, e))
}
