use std::fmt;

use crate::error::{Error, Result};

pub const DESCRIPTOR_BITS: usize = 512;
pub const CASCADE_COUNT: usize = 4;
pub const CASCADE_BITS: usize = DESCRIPTOR_BITS / CASCADE_COUNT;

const WORDS: usize = DESCRIPTOR_BITS / 64;
const WORDS_PER_CASCADE: usize = CASCADE_BITS / 64;

/// A 512-bit FREAK descriptor.
///
/// Bit `j` is the outcome of descriptor pair `j`. It lives in word `j / 64`
/// at position `63 - j % 64`, so the hex form reads pair 0 as the most
/// significant bit.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FreakDescriptor {
    words: [u64; WORDS],
}

impl FreakDescriptor {
    pub const fn zero() -> Self {
        Self { words: [0; WORDS] }
    }

    pub fn from_words(words: [u64; WORDS]) -> Self {
        Self { words }
    }

    pub fn words(&self) -> &[u64; WORDS] {
        &self.words
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        if bits.len() != DESCRIPTOR_BITS {
            return Err(Error::contract(format!(
                "descriptor needs {DESCRIPTOR_BITS} bits, got {}",
                bits.len()
            )));
        }
        let mut d = Self::zero();
        for (j, &b) in bits.iter().enumerate() {
            d.set(j, b);
        }
        Ok(d)
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        (self.words[j / 64] >> (63 - j % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize, value: bool) {
        let mask = 1u64 << (63 - j % 64);
        if value {
            self.words[j / 64] |= mask;
        } else {
            self.words[j / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn complement(&self) -> Self {
        Self {
            words: self.words.map(|w| !w),
        }
    }

    /// Words holding cascade `k` (0-based, coarse first).
    pub fn cascade(&self, k: usize) -> &[u64] {
        &self.words[k * WORDS_PER_CASCADE..(k + 1) * WORDS_PER_CASCADE]
    }

    pub fn to_hex(&self) -> String {
        self.words.iter().map(|w| format!("{w:016x}")).collect()
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        if s.len() != DESCRIPTOR_BITS / 4 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::contract(format!(
                "descriptor hex must be {} hex digits",
                DESCRIPTOR_BITS / 4
            )));
        }
        let mut words = [0u64; WORDS];
        for (i, w) in words.iter_mut().enumerate() {
            *w = u64::from_str_radix(&s[i * 16..(i + 1) * 16], 16).map_err(|e| Error::contract(e.to_string()))?;
        }
        Ok(Self { words })
    }
}

impl fmt::Debug for FreakDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FreakDescriptor({})", self.to_hex())
    }
}
