//! Stable 64-bit hashing shared with the embedding exporter.
//!
//! Text keys are FNV-1a over the UTF-8 bytes of the space-joined normalized
//! tokens. Never change these constants: persisted embedding and candidate
//! tables are keyed by them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Text key of a token sequence.
pub fn text_key<S: AsRef<str>>(tokens: &[S]) -> u64 {
    let mut h = FNV_OFFSET;
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            h = (h ^ u64::from(b' ')).wrapping_mul(FNV_PRIME);
        }
        for &b in tok.as_ref().as_bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// splitmix64 finalizer; used to mix seed components.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent seed from a base seed and a list of labelled parts.
pub fn derive_seed(base: u64, parts: &[&[u8]]) -> u64 {
    parts
        .iter()
        .fold(mix(base), |acc, part| mix(acc ^ fnv1a64(part)))
}

/// A ChaCha stream keyed by `(base, parts...)`.
pub fn stream(base: u64, parts: &[&[u8]]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn text_key_hashes_joined_string() {
        let toks = ["the", "earth", "is", "flat"];
        assert_eq!(text_key(&toks), fnv1a64(b"the earth is flat"));
        assert_eq!(text_key::<&str>(&[]), fnv1a64(b""));
    }

    #[test]
    fn derived_seeds_differ_by_part() {
        let a = derive_seed(7, &[b"t1", &1u32.to_le_bytes()]);
        let b = derive_seed(7, &[b"t1", &2u32.to_le_bytes()]);
        let c = derive_seed(8, &[b"t1", &1u32.to_le_bytes()]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, &[b"t1", &1u32.to_le_bytes()]));
    }
}
