use super::{Embedding, EmbeddingProvider, TextRole};
use crate::{Error, Result};

pub const DEFAULT_HASH_DIM: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Signed feature hashing of character 2-, 3- and 4-grams of the lowercased
/// text. Stand-in for a transformer encoder when none is available.
#[derive(Debug, Clone)]
pub struct HashingEncoder {
    dim: usize,
}

impl HashingEncoder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        HashingEncoder { dim }
    }

    pub fn hash_encode(&self, text: &str) -> Result<Embedding> {
        if text.is_empty() {
            return Err(Error::invalid("cannot encode empty text"));
        }
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        let mut acc = vec![0f64; self.dim];
        let mut buf = String::new();
        let mut add = |gram: &[char], acc: &mut [f64]| {
            buf.clear();
            buf.extend(gram);
            let h = fnv1a64(buf.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            acc[(h % self.dim as u64) as usize] += sign;
        };
        for n in 2..=4 {
            for gram in chars.windows(n) {
                add(gram, &mut acc);
            }
        }
        if let Some(e) = Embedding::normalized(&acc) {
            return Ok(e);
        }
        // shorter than one bigram, or every bucket cancelled out
        acc.iter_mut().for_each(|v| *v = 0.0);
        add(&chars, &mut acc);
        Ok(Embedding::normalized(&acc).expect("single hashed feature is non-zero"))
    }
}

impl Default for HashingEncoder {
    fn default() -> Self {
        HashingEncoder::new(DEFAULT_HASH_DIM)
    }
}

impl EmbeddingProvider for HashingEncoder {
    fn name(&self) -> &str {
        "hashing"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str, _role: TextRole) -> Result<Embedding> {
        self.hash_encode(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::dot;
    use proptest::prelude::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(HashingEncoder::default().hash_encode("").is_err());
    }

    #[test]
    fn single_char_still_encodes() {
        let e = HashingEncoder::default().hash_encode("я").unwrap();
        assert!((e.norm() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn near_duplicate_beats_unrelated() {
        let enc = HashingEncoder::default();
        let a = enc.hash_encode("село Рантамак").unwrap();
        let b = enc.hash_encode("село Рантамак!").unwrap();
        let c = enc.hash_encode("озеро Кабан").unwrap();
        let close = dot(&a.values, &b.values);
        let far = dot(&a.values, &c.values);
        assert!(close > far, "{close} <= {far}");
        assert!(close > 0.9, "{close}");
    }

    #[test]
    fn case_insensitive() {
        let enc = HashingEncoder::default();
        assert_eq!(enc.hash_encode("КАБАН").unwrap(), enc.hash_encode("кабан").unwrap());
    }

    proptest! {
        #[test]
        fn deterministic_and_unit_norm(text in "\\PC{1,60}") {
            let enc = HashingEncoder::new(128);
            let a = enc.hash_encode(&text).unwrap();
            let b = enc.hash_encode(&text).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!((a.norm() - 1.0).abs() < 1e-5);
        }
    }
}
