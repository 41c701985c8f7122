//! Feature-hashed bag-of-words embeddings.
//!
//! Each case-folded whitespace token is hashed with 64-bit FNV-1a over its
//! UTF-8 bytes (offset basis `0xcbf29ce484222325`, prime `0x100000001b3`);
//! the hash modulo the dimension selects a bucket that is incremented by
//! one. The count vector is then scaled to unit length. Text without tokens
//! gives the zero vector.

use rmcontrast::metrics::word_tokenize;

pub const DEFAULT_DIM: usize = 64;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

pub fn hash_embed(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for token in word_tokenize(text) {
        v[(fnv1a64(token.as_bytes()) % dim as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn unit_length_and_bag_of_words() {
        let a = hash_embed("the cat sat", DEFAULT_DIM);
        let b = hash_embed("sat THE cat", DEFAULT_DIM);
        assert_eq!(a, b);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(hash_embed("", DEFAULT_DIM).iter().all(|x| *x == 0.0));
    }
}
