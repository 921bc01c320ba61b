//! Order-independent per-sample seed derivation.

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the length-prefixed bytes of `s`.
fn digest_str(s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in (s.len() as u64).to_le_bytes().iter().chain(s.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Seed for one sample of one corrupted set. Fields are folded in a fixed
/// order, so the result depends only on the four inputs.
///
/// `corruption_id` is the criterion label, e.g. `"WHN-L1"`.
pub fn derive_seed(global_seed: u64, dataset_id: &str, corruption_id: &str, sample_index: u64) -> u64 {
    let mut h = splitmix64(global_seed);
    h = splitmix64(h ^ digest_str(dataset_id));
    h = splitmix64(h ^ digest_str(corruption_id));
    splitmix64(h ^ sample_index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_field_sensitive() {
        let a = derive_seed(2025, "RS", "WHN-L1", 0);
        assert_eq!(a, derive_seed(2025, "RS", "WHN-L1", 0));
        assert_ne!(a, derive_seed(2025, "RS", "WHN-L1", 1));
        assert_ne!(a, derive_seed(123456, "RS", "WHN-L1", 0));
        assert_ne!(a, derive_seed(2025, "SC2", "WHN-L1", 0));
        assert_ne!(a, derive_seed(2025, "RS", "WHN-L2", 0));
        // Length prefixing keeps field boundaries distinct.
        assert_ne!(digest_str("ab"), digest_str("a"));
    }

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference SplitMix64 generator seeded with 0:
        // the generator adds the golden gamma before mixing, as here.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }
}
