//! Two's-complement words of an explicit bit width.
//!
//! Every sample inside the CIC datapath is a [`FixedWord`]: a plain signed
//! integer count of LSBs plus the register width it lives in. Arithmetic
//! wraps modulo `2^width`, which is what makes integrator overflow harmless
//! as long as the final output fits its register.

use std::fmt;

use crate::error::{Error, Result};

pub const MAX_WIDTH: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedWord {
    value: i64,
    width: u32,
}

fn check_width(width: u32) -> Result<()> {
    if (1..=MAX_WIDTH).contains(&width) {
        Ok(())
    } else {
        Err(Error::InvalidWidth(width))
    }
}

/// Reduces `v` into the `width`-bit two's-complement range.
pub fn wrap(v: i128, width: u32) -> Result<FixedWord> {
    check_width(width)?;
    Ok(wrap_unchecked(v, width))
}

#[inline]
fn wrap_unchecked(v: i128, width: u32) -> FixedWord {
    let shift = 128 - width;
    FixedWord {
        value: ((v << shift) >> shift) as i64,
        width,
    }
}

impl FixedWord {
    /// Builds a word from a value that must already be in range.
    pub fn new(value: i64, width: u32) -> Result<Self> {
        check_width(width)?;
        let w = wrap_unchecked(value as i128, width);
        if w.value != value {
            return Err(Error::Contract(format!(
                "value {value} does not fit in {width} bits"
            )));
        }
        Ok(w)
    }

    pub fn zero(width: u32) -> Result<Self> {
        check_width(width)?;
        Ok(FixedWord { value: 0, width })
    }

    /// Interprets the low `width` bits of `bits` as a two's-complement word.
    pub fn from_bits(bits: u64, width: u32) -> Result<Self> {
        check_width(width)?;
        Ok(wrap_unchecked(bits as i128, width))
    }

    #[inline]
    pub fn value(self) -> i64 {
        self.value
    }

    #[inline]
    pub fn width(self) -> u32 {
        self.width
    }

    /// Raw bit pattern, zero above `width`.
    #[inline]
    pub fn to_bits(self) -> u64 {
        (self.value as u64) & mask(self.width)
    }

    pub fn min_value(width: u32) -> i64 {
        -(1i128 << (width - 1)) as i64
    }

    pub fn max_value(width: u32) -> i64 {
        ((1i128 << (width - 1)) - 1) as i64
    }
}

/// Bitwise complement within the word.
impl std::ops::Not for FixedWord {
    type Output = FixedWord;

    fn not(self) -> FixedWord {
        FixedWord {
            value: !self.value,
            width: self.width,
        }
    }
}

impl fmt::Display for FixedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.value, self.width)
    }
}

#[inline]
pub(crate) fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn same_width(a: FixedWord, b: FixedWord) -> Result<()> {
    if a.width == b.width {
        Ok(())
    } else {
        Err(Error::WidthMismatch {
            expected: a.width,
            found: b.width,
        })
    }
}

pub fn add_wrap(a: FixedWord, b: FixedWord) -> Result<FixedWord> {
    same_width(a, b)?;
    Ok(wrap_unchecked(a.value as i128 + b.value as i128, a.width))
}

/// Drops `a.width - new_width` LSBs by arithmetic shift (rounds toward
/// negative infinity, so the discarded part is always non-negative).
pub fn truncate_lsb(a: FixedWord, new_width: u32) -> Result<FixedWord> {
    if new_width == 0 || new_width > a.width {
        return Err(Error::Contract(format!(
            "cannot truncate a {}-bit word to {} bits",
            a.width, new_width
        )));
    }
    Ok(FixedWord {
        value: a.value >> (a.width - new_width),
        width: new_width,
    })
}

/// Sign-extends into a wider register.
pub fn resize_extend(a: FixedWord, new_width: u32) -> Result<FixedWord> {
    check_width(new_width)?;
    if new_width < a.width {
        return Err(Error::Contract(format!(
            "cannot extend a {}-bit word to {} bits; use truncate_lsb to narrow",
            a.width, new_width
        )));
    }
    Ok(FixedWord {
        value: a.value,
        width: new_width,
    })
}
