use std::fs;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::BinaryHypervector;
use crate::error::{shape_err, Error, Result};

const MAGIC: &[u8; 4] = b"HDCB";
const VERSION: u32 = 1;

/// Random class hypervectors, one per class index `0..len`, drawn before training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCodebook {
    dims: usize,
    seed: u64,
    classes: Vec<BinaryHypervector>,
}

impl ClassCodebook {
    /// Draws `classes` vectors in index order from one ChaCha8 stream.
    pub fn generate(classes: usize, dims: usize, seed: u64) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Validation(
                "codebook needs at least one class".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = (0..classes)
            .map(|_| BinaryHypervector::random(dims, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dims,
            seed,
            classes,
        })
    }

    pub fn from_vectors(classes: Vec<BinaryHypervector>, seed: u64) -> Result<Self> {
        let dims = classes
            .first()
            .ok_or_else(|| Error::Validation("codebook needs at least one class".into()))?
            .dims();
        if let Some(bad) = classes.iter().find(|c| c.dims() != dims) {
            return Err(shape_err(format!(
                "codebook vectors differ in dims: {dims} vs {}",
                bad.dims()
            )));
        }
        Ok(Self {
            dims,
            seed,
            classes,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class(&self, index: usize) -> &BinaryHypervector {
        &self.classes[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BinaryHypervector)> {
        self.classes.iter().enumerate()
    }

    /// Keeps only the listed classes, re-indexed in the given order.
    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        let classes = keep
            .iter()
            .map(|&i| {
                self.classes
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Validation(format!("class {i} not in codebook")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_vectors(classes, self.seed)
    }

    /// Normalized Hamming distance from `h` to every class.
    pub fn distances(&self, h: &BinaryHypervector) -> Result<Vec<f64>> {
        self.classes
            .iter()
            .map(|c| h.normalized_hamming(c))
            .collect()
    }

    /// Binary form: `"HDCB" | u32 version | u32 dims | u32 classes | u64 seed | rows`,
    /// each row `ceil(dims / 64)` little-endian u64 words.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        out.extend_from_slice(&(self.classes.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for c in &self.classes {
            for w in c.words() {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing HDCB header".into()));
        }
        let read_u32 = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = read_u32(4);
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported codebook version {version}"
            )));
        }
        let dims = read_u32(8) as usize;
        let n = read_u32(12) as usize;
        let seed = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let words = dims.div_ceil(64);
        let body = &bytes[24..];
        if dims == 0 || n == 0 || body.len() != n * words * 8 {
            return Err(Error::Format(format!(
                "codebook body of {} bytes does not hold {n} x {dims} bits",
                body.len()
            )));
        }
        let classes = body
            .chunks_exact(words * 8)
            .map(|row| {
                let ws = row
                    .chunks_exact(8)
                    .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
                    .collect();
                BinaryHypervector::from_words(dims, ws)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dims,
            seed,
            classes,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// One line per class: `index<TAB>hex`, preceded by a `# dims classes seed` comment.
    pub fn to_hex(&self) -> String {
        let mut s = format!(
            "# dims={} classes={} seed={}\n",
            self.dims,
            self.classes.len(),
            self.seed
        );
        for (i, c) in self.iter() {
            s.push_str(&format!("{i}\t{}\n", c.to_hex()));
        }
        s
    }
}
