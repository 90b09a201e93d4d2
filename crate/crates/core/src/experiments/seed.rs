//! Stable seed derivation so that parallel jobs stay reproducible.

/// One step of the SplitMix64 generator, used as a seed mixer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed for the job identified by `id` under `master`.
pub fn derive_seed(master: u64, id: &str) -> u64 {
    splitmix64(master ^ splitmix64(fnv1a(id.as_bytes())))
}

/// Seed for the `index`-th repetition inside a job.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(1)))
}
