//! Deterministic RNG stream assignment for replicated experiments.
//!
//! Every replica owns two independent ChaCha streams derived from the master
//! seed and the replica index alone, never from worker scheduling: an even
//! stream for stochastic-gradient draws and an odd stream for the Langevin
//! noise. Keeping the noise stream separate means SGLD/SGD/ULA/PGD runs with
//! equal seeds consume identical `zeta` sequences, which is what the
//! variance-contrast experiments pair on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Paired gradient/noise streams for one replica.
pub struct ReplicaRng {
    pub grad: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

/// Streams for replica `replica` of the experiment seeded by `master_seed`.
pub fn replica_streams(master_seed: u64, replica: u64) -> ReplicaRng {
    let mut grad = ChaCha8Rng::seed_from_u64(master_seed);
    grad.set_stream(2 * replica);
    let mut noise = ChaCha8Rng::seed_from_u64(master_seed);
    noise.set_stream(2 * replica + 1);
    ReplicaRng { grad, noise }
}

/// A single auxiliary stream (constant estimation, instance generation, ...)
/// kept clear of the replica streams by a high tag bit.
pub fn aux_stream(master_seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((1 << 63) | tag);
    rng
}
