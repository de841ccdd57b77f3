//! Gate-level model of the modified carry look-ahead adder (MCLA).
//!
//! The adder is built from 4-bit look-ahead blocks. Each block derives its
//! internal carries from per-bit propagate/generate signals in two-level
//! AND-OR form, and exposes a group propagate/generate pair. Blocks are
//! chained LSB first: the carry out of block `k` is the carry in of block
//! `k + 1`.
//!
//! Per-bit signals are `g = a & b` and `p = a ^ b`, so the sum bit is simply
//! `p ^ c`.

use crate::error::{Error, Result};
use crate::fixed_point::{mask, FixedWord};

pub use crate::netlist::emit_netlist;

/// Operand bits, index 0 = LSB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitVector(Vec<bool>);

impl BitVector {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() || bits.len() > 64 {
            return Err(Error::InvalidWidth(bits.len() as u32));
        }
        Ok(BitVector(bits))
    }

    pub fn from_word(w: FixedWord) -> Self {
        let bits = w.to_bits();
        BitVector((0..w.width()).map(|i| (bits >> i) & 1 == 1).collect())
    }

    pub fn to_word(&self) -> FixedWord {
        let raw = self
            .0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i));
        FixedWord::from_bits(raw, self.width()).expect("width checked at construction")
    }

    pub fn width(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PgPair {
    pub p: bool,
    pub g: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GroupPg {
    pub propagate: bool,
    pub generate: bool,
}

#[inline]
pub fn bit_pg(a: bool, b: bool) -> PgPair {
    PgPair { p: a ^ b, g: a & b }
}

/// Group propagate and generate of one 4-bit block (`pg[0]` is the LSB).
#[inline]
pub fn group_pg(pg: &[PgPair; 4]) -> GroupPg {
    let [b0, b1, b2, b3] = *pg;
    GroupPg {
        propagate: b3.p & b2.p & b1.p & b0.p,
        generate: b3.g | (b3.p & b2.g) | (b3.p & b2.p & b1.g) | (b3.p & b2.p & b1.p & b0.g),
    }
}

/// Carries `c1..=c4` of a 4-bit block, each in flat sum-of-products form.
#[inline]
pub fn block_carries(pg: &[PgPair; 4], c0: bool) -> [bool; 4] {
    let [b0, b1, b2, b3] = *pg;
    let (p0, p1, p2, p3) = (b0.p, b1.p, b2.p, b3.p);
    let (g0, g1, g2, g3) = (b0.g, b1.g, b2.g, b3.g);
    let c1 = g0 | (p0 & c0);
    let c2 = g1 | (p1 & g0) | (p1 & p0 & c0);
    let c3 = g2 | (p2 & g1) | (p2 & p1 & g0) | (p2 & p1 & p0 & c0);
    let c4 = g3 | (p3 & g2) | (p3 & p2 & g1) | (p3 & p2 & p1 & g0) | (p3 & p2 & p1 & p0 & c0);
    [c1, c2, c3, c4]
}

/// Result of an MCLA addition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AddResult {
    pub sum: FixedWord,
    /// Carry out of the operand MSB, taken on the raw bit patterns.
    pub carry_out: bool,
}

/// Adds two same-width words plus a carry-in through the block-chained
/// look-ahead structure.
///
/// Widths that are not a multiple of 4 are sign-extended to the next
/// multiple internally and the sum is cut back to the operand width.
pub fn mcla_add(a: FixedWord, b: FixedWord, c0: bool) -> Result<AddResult> {
    if a.width() != b.width() {
        return Err(Error::WidthMismatch {
            expected: a.width(),
            found: b.width(),
        });
    }
    let width = a.width();
    let padded = width.div_ceil(4) * 4;
    // sign extension into the padding
    let pm = mask(padded);
    let ab = (a.value() as u64) & pm;
    let bb = (b.value() as u64) & pm;

    let mut sum = 0u64;
    let mut carry = c0;
    let mut carry_out = false;
    for block in 0..padded / 4 {
        let base = block * 4;
        let mut pg = [PgPair::default(); 4];
        for (i, slot) in pg.iter_mut().enumerate() {
            let bit = base + i as u32;
            *slot = bit_pg((ab >> bit) & 1 == 1, (bb >> bit) & 1 == 1);
        }
        let c = block_carries(&pg, carry);
        let carries_in = [carry, c[0], c[1], c[2]];
        for i in 0..4 {
            let bit = base + i as u32;
            if pg[i].p ^ carries_in[i] {
                sum |= 1 << bit;
            }
            if bit + 1 == width {
                carry_out = c[i];
            }
        }
        carry = c[3];
    }
    Ok(AddResult {
        sum: FixedWord::from_bits(sum, width)?,
        carry_out,
    })
}
