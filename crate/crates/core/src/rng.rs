use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout. ChaCha output is stable across platforms and
/// crate versions, which the reproducibility contract depends on.
pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Independent stream for unit of work `index` derived from a base seed.
pub fn split(seed: u64, index: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed.wrapping_add(index))
}
