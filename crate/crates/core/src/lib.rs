//! Recursive peeling approximations for linear arrangement and hierarchical
//! clustering on dissimilarity metrics, with exact oracles, baselines and
//! instance generators.

pub mod bench;
pub mod format;
pub mod hc_dense;
pub mod hc_peeling;
pub mod instances;
pub mod la_dense;
pub mod la_peeling;
pub mod metric;
pub mod objectives;
pub mod oracles;
pub mod partition;
pub mod search;
pub mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for `(seed, stream)`; distinct streams are independent.
pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
