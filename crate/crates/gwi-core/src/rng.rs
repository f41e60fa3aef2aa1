//! Reproducible random streams.
//!
//! Every stochastic routine takes an explicit stream derived from a
//! `(master seed, domain, replicate index)` triple, mapped injectively onto
//! the 64-bit stream space of ChaCha8. Replicates can therefore run in any
//! order, on any number of threads, and still produce identical output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The generator handed to simulation routines.
pub type RngStream = ChaCha8Rng;

/// Number of low bits of the stream id reserved for the replicate index.
const INDEX_BITS: u32 = 48;
const INDEX_MASK: u64 = (1 << INDEX_BITS) - 1;

/// Purpose tags for stream derivation, so that e.g. limit-path references
/// never share a stream with branching replicates under the same master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamDomain {
    /// Branching-process path replicates.
    Path,
    /// Limit-diffusion path replicates.
    Limit,
    /// Auxiliary draws (shuffles, subsampling).
    Aux,
}

impl StreamDomain {
    fn tag(self) -> u64 {
        match self {
            StreamDomain::Path => 0,
            StreamDomain::Limit => 1,
            StreamDomain::Aux => 2,
        }
    }
}

/// Address of one random stream: master seed plus a (domain, index) pair.
///
/// The mapping `(seed, domain, index) -> stream` is injective as long as
/// `index < 2^48`, which the constructor enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub domain: StreamDomain,
    pub index: u64,
}

impl StreamKey {
    pub fn new(seed: u64, domain: StreamDomain, index: u64) -> StreamKey {
        assert!(index <= INDEX_MASK, "replicate index exceeds 2^48");
        StreamKey { seed, domain, index }
    }

    /// Instantiate the generator for this key.
    pub fn stream(&self) -> RngStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.domain.tag() << INDEX_BITS) | self.index);
        rng
    }
}

/// Stream descriptors for `count` replicates under one master seed.
///
/// Same inputs always yield the same descriptors, and distinct indices yield
/// distinct streams.
pub fn seed_plan(master_seed: u64, count: usize) -> Vec<StreamKey> {
    (0..count as u64)
        .map(|i| StreamKey::new(master_seed, StreamDomain::Path, i))
        .collect()
}
