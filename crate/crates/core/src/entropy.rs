//! Integer range coder driven by caller-supplied [`CdfTable`]s.
//!
//! The coder keeps a 56-bit window: `low` carries one extra bit for carry
//! detection, `range` is renormalized byte-wise whenever it drops below
//! 2^48, and pending `0xFF` bytes are resolved by explicit carry
//! propagation. Every table has total mass 2^16, so an interval shrinks by
//! `c_s / 2^16` up to a truncation of at most 2^-32 relative.
//!
//! The coder holds no statistics of its own; context adaptivity comes from
//! the model choosing a table per symbol. A decoder given the wrong table
//! sequence produces garbage without noticing; the container CRC catches it.
//!
//! Stream layout: the first byte of the classic carry-cache scheme is always
//! zero and is omitted. `finish` flushes the full 56-bit `low`, so a decoder
//! reads exactly as many bytes as the encoder wrote.

use crate::error::{Error, Result};
use crate::mixture::{CdfTable, CDF_BITS};

const WINDOW_BITS: u32 = 56;
const TOP: u64 = 1 << WINDOW_BITS;
const RENORM: u64 = 1 << (WINDOW_BITS - 8);
const SHIFT: u32 = WINDOW_BITS - 8;
const INIT_BYTES: usize = (WINDOW_BITS / 8) as usize;

/// Encoder state.
#[derive(Debug, Clone)]
pub struct RangeEncoder {
    low: u64,
    range: u64,
    cache: u8,
    pending: u64,
    out: Vec<u8>,
    symbols: usize,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: TOP - 1,
            cache: 0,
            pending: 1,
            out: Vec::new(),
            symbols: 0,
        }
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    /// Narrows the interval to `[c_s, c_{s+1}) / 2^16` of the current range.
    pub fn encode(&mut self, symbol: usize, table: &CdfTable) -> Result<()> {
        if symbol >= table.alphabet() {
            return Err(Error::SymbolOutOfRange {
                symbol: symbol as u32,
                alphabet: table.alphabet(),
            });
        }
        let (lo, hi) = table.interval(symbol);
        let r = self.range >> CDF_BITS;
        self.low += r * lo as u64;
        self.range = r * (hi - lo) as u64;
        while self.range < RENORM {
            self.range <<= 8;
            self.shift_low();
        }
        self.symbols += 1;
        Ok(())
    }

    fn shift_low(&mut self) {
        if self.low < (0xFF << SHIFT) || self.low >= TOP {
            let carry = (self.low >> WINDOW_BITS) as u8;
            let mut byte = self.cache;
            while self.pending > 0 {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.pending -= 1;
            }
            self.cache = ((self.low >> SHIFT) & 0xFF) as u8;
        }
        self.pending += 1;
        self.low = (self.low & (RENORM - 1)) << 8;
    }

    /// Flushes the final interval and returns the stream.
    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..=INIT_BYTES {
            self.shift_low();
        }
        // leading byte of the cache scheme is always zero
        debug_assert_eq!(self.out.first(), Some(&0));
        self.out.remove(0);
        self.out
    }
}

/// Decoder state over a borrowed segment.
#[derive(Debug, Clone)]
pub struct RangeDecoder<'a> {
    code: u64,
    range: u64,
    input: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self> {
        if input.len() < INIT_BYTES {
            return Err(Error::Corrupt(format!(
                "coded segment of {} bytes is shorter than the {INIT_BYTES}-byte flush",
                input.len()
            )));
        }
        let code = input[..INIT_BYTES]
            .iter()
            .fold(0u64, |acc, &b| (acc << 8) | b as u64);
        Ok(RangeDecoder {
            code,
            range: TOP - 1,
            input,
            pos: INIT_BYTES,
        })
    }

    /// Bytes consumed so far.
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.input.len() - self.pos
    }

    pub fn decode(&mut self, table: &CdfTable) -> Result<usize> {
        let r = self.range >> CDF_BITS;
        let total = table.cumulative()[table.alphabet()] as u64;
        let value = (self.code / r).min(total - 1) as u32;
        let symbol = table.find(value);
        let (lo, hi) = table.interval(symbol);
        self.code -= r * lo as u64;
        self.range = r * (hi - lo) as u64;
        if self.code >= self.range {
            return Err(Error::Corrupt("range coder state out of interval".into()));
        }
        while self.range < RENORM {
            let byte = *self.input.get(self.pos).ok_or_else(|| {
                Error::Corrupt("coded segment exhausted before all symbols were decoded".into())
            })?;
            self.pos += 1;
            self.code = ((self.code << 8) | byte as u64) & (TOP - 1);
            self.range <<= 8;
        }
        Ok(symbol)
    }
}
