//! Named seed derivation.
//!
//! Every random stream in a run is derived from one root seed and a tag, so
//! that adding a new consumer never shifts the values seen by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `root`, a tag and an index.
pub fn derive(root: u64, tag: &str, index: u64) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &root.to_le_bytes());
    h = fnv1a(h, tag.as_bytes());
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, &index.to_le_bytes());
    splitmix64(h)
}

/// Derives a child seed keyed by a string id (e.g. a segment id) and an index.
pub fn derive_keyed(root: u64, tag: &str, key: &str, index: u64) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &root.to_le_bytes());
    h = fnv1a(h, tag.as_bytes());
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, key.as_bytes());
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, &index.to_le_bytes());
    splitmix64(h)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
