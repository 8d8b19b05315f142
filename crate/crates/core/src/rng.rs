use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream `stream` of the master `seed`. Streams never overlap,
/// so work split across threads draws the same numbers as a serial run.
pub(crate) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
