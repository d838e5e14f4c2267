//! Seed derivation. Every random stream in a run descends from one root
//! seed: `derive_seed(root, tag, index)` mixes the root with a subsystem tag
//! and an item index, so changing one subsystem never shifts another's draws.

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the tag bytes.
pub fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01B3))
}

/// `splitmix64(splitmix64(root ^ fnv1a(tag)) ^ index)`
pub fn derive_seed(root: u64, tag: &str, index: u64) -> u64 {
    splitmix64(splitmix64(root ^ tag_hash(tag)) ^ index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference generator seeded with 0
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn tags_and_indices_separate_streams() {
        assert_ne!(derive_seed(1, "world", 0), derive_seed(1, "task", 0));
        assert_ne!(derive_seed(1, "world", 0), derive_seed(1, "world", 1));
        assert_ne!(derive_seed(1, "world", 0), derive_seed(2, "world", 0));
        assert_eq!(derive_seed(9, "noise", 4), derive_seed(9, "noise", 4));
    }
}
