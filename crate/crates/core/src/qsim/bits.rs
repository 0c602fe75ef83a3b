use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::QsimError;

/// Upper bound on bitstring length; registers and GF(2) vectors share this limit.
pub const MAX_BITS: usize = 63;

/// A fixed-length string of bits.
///
/// Position 0 is the leftmost character and corresponds to qubit 0, which is
/// also the most significant bit of [`BitString::value`]. The value therefore
/// doubles as the index of the matching computational basis state.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    value: u64,
    len: u8,
}

impl BitString {
    pub fn new(value: u64, len: usize) -> Result<Self, QsimError> {
        if len > MAX_BITS {
            return Err(QsimError::TooManyQubits {
                requested: len,
                max: MAX_BITS,
            });
        }
        if len < 64 && value >> len != 0 {
            return Err(QsimError::LengthMismatch {
                expected: len,
                got: 64 - value.leading_zeros() as usize,
            });
        }
        Ok(Self {
            value,
            len: len as u8,
        })
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_BITS, "bitstring too long");
        Self {
            value: 0,
            len: len as u8,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self, QsimError> {
        let value = bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        Self::new(value, bits.len())
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    /// Bit held by position `i` (0 = leftmost).
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len(), "bit index {i} out of range");
        (self.value >> (self.len() - 1 - i)) & 1 == 1
    }

    pub fn with_bit(mut self, i: usize, b: bool) -> Self {
        assert!(i < self.len(), "bit index {i} out of range");
        let mask = 1u64 << (self.len() - 1 - i);
        if b {
            self.value |= mask;
        } else {
            self.value &= !mask;
        }
        self
    }

    /// GF(2) inner product.
    pub fn dot(&self, other: &BitString) -> bool {
        (self.value & other.value).count_ones() % 2 == 1
    }

    pub fn xor(&self, other: &BitString) -> BitString {
        debug_assert_eq!(self.len, other.len);
        BitString {
            value: self.value ^ other.value,
            len: self.len,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |i| self.bit(i))
    }

    /// Every bitstring of length `len`, in increasing numeric order.
    pub fn all(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len <= 30, "refusing to enumerate 2^{len} strings");
        (0..1u64 << len).map(move |value| BitString {
            value,
            len: len as u8,
        })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = QsimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(QsimError::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_bools(&bits)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One of the two conjugate single-qubit bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// `|0>`, `|1>`
    Computational,
    /// `|+>`, `|->`; outcome 0 is `|+>`.
    Diagonal,
}

impl Basis {
    /// Amplitudes of the basis state labelled by `bit`.
    pub fn encode(self, bit: bool) -> [Complex64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match (self, bit) {
            (Basis::Computational, false) => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            (Basis::Computational, true) => [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            (Basis::Diagonal, false) => [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
            (Basis::Diagonal, true) => [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)],
        }
    }

    pub fn conjugate(self) -> Basis {
        match self {
            Basis::Computational => Basis::Diagonal,
            Basis::Diagonal => Basis::Computational,
        }
    }

    pub fn uniform(n: usize, basis: Basis) -> Vec<Basis> {
        vec![basis; n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_read_left_to_right() {
        let b: BitString = "0110".parse().unwrap();
        assert_eq!(b.value(), 0b0110);
        assert!(!b.bit(0));
        assert!(b.bit(1));
        assert_eq!(b.to_string(), "0110");
        assert_eq!(b.with_bit(0, true).to_string(), "1110");
    }

    #[test]
    fn rejects_overlong_values() {
        assert!(BitString::new(0b100, 2).is_err());
        assert!("01a".parse::<BitString>().is_err());
    }

    #[test]
    fn dot_is_parity_of_overlap() {
        let a: BitString = "1101".parse().unwrap();
        let b: BitString = "1011".parse().unwrap();
        assert!(!a.dot(&b));
        assert!(a.dot(&"1000".parse().unwrap()));
    }

    #[test]
    fn serde_uses_bit_characters() {
        let b: BitString = "101".parse().unwrap();
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, "\"101\"");
        let back: BitString = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
    }
}
