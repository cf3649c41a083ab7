//! Deterministic seed derivation.
//!
//! Every randomized stage gets its own seed derived from a master seed and a
//! stable label path, so results never depend on execution order or worker
//! count.

/// One round of splitmix64, the usual seed-stretching permutation.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derive a child seed from `master` and a label path.
///
/// The same (master, parts) always yields the same seed; distinct label paths
/// yield independent-looking seeds.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &part in parts {
        state = splitmix64(state ^ splitmix64(part));
    }
    state
}
