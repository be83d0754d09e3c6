//! Per-sample seed derivation.

/// What a derived seed is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Salt {
    Train = 1,
    Eval = 2,
    Noise = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of `s`.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// A seed that depends only on the run seed, a name, an index and the use.
pub fn derive_seed(base: u64, name: &str, index: usize, salt: Salt) -> u64 {
    let mut h = splitmix64(base);
    h = splitmix64(h ^ fnv1a(name));
    h = splitmix64(h ^ index as u64);
    splitmix64(h ^ salt as u64)
}
