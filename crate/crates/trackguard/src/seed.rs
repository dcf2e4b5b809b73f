//! Deterministic seed derivation.
//!
//! Every random decision in the toolkit (record noise, weight init, epoch
//! shuffles, split assignment) is seeded from a single global seed through
//! this module, so one `u64` reproduces an entire pipeline run.

/// Derives an independent child seed from `base` and a stream label.
///
/// Uses FNV-1a over the label followed by a splitmix64 finalizer; the same
/// `(base, label)` pair always yields the same child seed.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(base ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
