//! Deterministic per-item seed derivation.
//!
//! Augmentation and synthetic decoding seed a fresh RNG per utterance from
//! (base seed, utt_id) so results do not depend on processing order.

/// SplitMix64 mixing step.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a 64-bit seed from a base seed and a string tag (usually an utt_id).
pub fn derive(base: u64, tag: &str) -> u64 {
    let mut state = mix(base);
    for &b in tag.as_bytes() {
        state = mix(state ^ u64::from(b));
    }
    state
}
