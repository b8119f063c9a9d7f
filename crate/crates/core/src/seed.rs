//! Seed derivation for named RNG substreams.
//!
//! Every run owns a single root seed. Components (splitting, encoder init,
//! dropout, batch shuffling, k-means, evaluation) draw from independently
//! derived streams, so perturbing one component's randomness leaves the
//! others bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive a substream seed from the root seed and a stream label.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    // FNV-1a over the label, mixed into the root with splitmix rounds.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(root ^ splitmix64(h))
}

/// A seeded generator for the named substream.
pub fn stream_rng(root: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label))
}
