//! Deterministic seed expansion.
//!
//! Every seeded component derives its randomness from one master seed through
//! `splitmix64`, so a whole run is reproducible from a single number.

/// One round of the splitmix64 mixing function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a labelled child seed from a master seed.
pub fn child_seed(master: u64, domain: u64) -> u64 {
    splitmix64(master ^ splitmix64(domain))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_is_stable() {
        // First output of the published splitmix64 stream for seed 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(1), splitmix64(1));
    }

    #[test]
    fn child_seeds_differ_by_domain() {
        let a = child_seed(42, 0);
        let b = child_seed(42, 1);
        assert_ne!(a, b);
        assert_eq!(a, child_seed(42, 0));
    }
}
