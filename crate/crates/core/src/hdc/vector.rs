use std::fmt;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Error, Result};

/// How [`BinaryHypervector::cosine`] interprets the zero bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CosineMode {
    /// Compute on the raw `{0, 1}` values.
    Binary,
    /// Map `0 -> -1` first.
    Bipolar,
}

/// A `D`-dimensional bit vector packed into 64-bit words.
///
/// Bits past `dims` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryHypervector {
    dims: usize,
    words: Vec<u64>,
}

fn word_count(dims: usize) -> usize {
    dims.div_ceil(64)
}

fn tail_mask(dims: usize) -> u64 {
    match dims % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

impl BinaryHypervector {
    pub fn zeros(dims: usize) -> Self {
        Self {
            dims,
            words: vec![0; word_count(dims)],
        }
    }

    /// Draws every bit independently with `P(1) = 0.5` from a ChaCha8 stream seeded by `seed`.
    pub fn generate(dims: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random(dims, &mut rng)
    }

    /// Draws from an existing generator; consumes `ceil(dims / 64)` words.
    pub fn random<R: RngCore>(dims: usize, rng: &mut R) -> Result<Self> {
        if dims == 0 {
            return Err(Error::Validation(
                "hypervector dimension must be >= 1".into(),
            ));
        }
        let mut words: Vec<u64> = (0..word_count(dims)).map(|_| rng.next_u64()).collect();
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(dims);
        }
        Ok(Self { dims, words })
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut v = Self::zeros(0);
        for b in bits {
            if v.dims.is_multiple_of(64) {
                v.words.push(0);
            }
            if b {
                v.words[v.dims / 64] |= 1 << (v.dims % 64);
            }
            v.dims += 1;
        }
        v
    }

    /// Parses a string of `'0'`/`'1'` characters, ignoring whitespace.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let mut bits = Vec::new();
        for ch in s.chars().filter(|c| !c.is_whitespace()) {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(Error::Validation(format!(
                        "invalid bit character {other:?}"
                    )))
                }
            }
        }
        Ok(Self::from_bits(bits))
    }

    pub(crate) fn from_words(dims: usize, mut words: Vec<u64>) -> Result<Self> {
        if words.len() != word_count(dims) {
            return Err(shape_err(format!("{} words for {dims} dims", words.len())));
        }
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(dims);
        }
        Ok(Self { dims, words })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.dims, "bit {i} out of range for {} dims", self.dims);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.dims, "bit {i} out of range for {} dims", self.dims);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.dims).map(move |i| self.bit(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(self.dims);
        }
        Self {
            dims: self.dims,
            words,
        }
    }

    /// In-place bitwise OR; used for spike accumulation.
    pub fn or_assign(&mut self, other: &Self) -> Result<()> {
        self.check_dims(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(shape_err(format!(
                "hypervector dims differ: {} vs {}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// Number of mismatching dimensions (XOR + popcount).
    pub fn hamming(&self, other: &Self) -> Result<usize> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    pub fn normalized_hamming(&self, other: &Self) -> Result<f64> {
        Ok(self.hamming(other)? as f64 / self.dims as f64)
    }

    pub fn cosine(&self, other: &Self, mode: CosineMode) -> Result<f64> {
        self.check_dims(other)?;
        match mode {
            CosineMode::Binary => {
                let dot: usize = self
                    .words
                    .iter()
                    .zip(&other.words)
                    .map(|(a, b)| (a & b).count_ones() as usize)
                    .sum();
                let (na, nb) = (self.count_ones(), other.count_ones());
                if na == 0 || nb == 0 {
                    return Err(Error::Math(
                        "binary cosine of an all-zero hypervector is undefined".into(),
                    ));
                }
                Ok(dot as f64 / ((na as f64).sqrt() * (nb as f64).sqrt()))
            }
            CosineMode::Bipolar => {
                // every ±1 vector has norm sqrt(D); dot = matches - mismatches
                let d = self.dims as f64;
                let mismatches = self.hamming(other)? as f64;
                Ok((d - 2.0 * mismatches) / d)
            }
        }
    }

    /// Lower-case hex of the packed words, least significant word first.
    pub fn to_hex(&self) -> String {
        self.words.iter().map(|w| format!("{w:016x}")).collect()
    }
}

impl fmt::Debug for BinaryHypervector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryHypervector({}; ", self.dims)?;
        if self.dims <= 64 {
            for b in self.iter() {
                write!(f, "{}", b as u8)?;
            }
        } else {
            write!(f, "{}", self.to_hex())?;
        }
        write!(f, ")")
    }
}

/// The bits as a `0`/`1` string, dimension 0 first.
impl fmt::Display for BinaryHypervector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = BinaryHypervector::generate(1000, 7).unwrap();
        let b = BinaryHypervector::generate(1000, 7).unwrap();
        let c = BinaryHypervector::generate(1000, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.words().last().unwrap() >> (1000 % 64), 0);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(matches!(
            BinaryHypervector::generate(0, 1),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn complement_is_full_mismatch() {
        let a = BinaryHypervector::generate(130, 3).unwrap();
        assert_eq!(a.hamming(&a.complement()).unwrap(), 130);
        assert_eq!(a.hamming(&a).unwrap(), 0);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let a = BinaryHypervector::zeros(10);
        let b = BinaryHypervector::zeros(11);
        assert!(matches!(a.hamming(&b), Err(Error::Shape(_))));
        assert!(matches!(
            a.cosine(&b, CosineMode::Bipolar),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn binary_cosine_of_zero_vector_is_math_error() {
        let a = BinaryHypervector::zeros(10);
        let b = BinaryHypervector::generate(10, 1).unwrap();
        assert!(matches!(
            a.cosine(&b, CosineMode::Binary),
            Err(Error::Math(_))
        ));
        // bipolar is always defined
        assert!(a.cosine(&b, CosineMode::Bipolar).is_ok());
    }

    #[test]
    fn bit_string_round_trip() {
        let v = BinaryHypervector::from_bit_str("0110 1011 00").unwrap();
        assert_eq!(v.dims(), 10);
        assert_eq!(v.count_ones(), 5);
        assert!(v.bit(1) && !v.bit(0));
        assert!(BinaryHypervector::from_bit_str("012").is_err());
        assert_eq!(v.to_string(), "0110101100");
    }
}
