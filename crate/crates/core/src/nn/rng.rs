use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Seeded generator used everywhere randomness is needed.
pub type Rng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Mixes a base seed with stream coordinates (epoch, batch, sample, ...) into
/// an independent seed, so parallel work stays reproducible.
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    let mut s = splitmix(base);
    for &k in stream {
        s = splitmix(s ^ splitmix(k.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    s
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
