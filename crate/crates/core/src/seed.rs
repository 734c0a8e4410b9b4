//! Seed derivation for reproducible, mutually independent random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed. The stream
//! id packs the role, the stream kind and the `(run, sample)` indices, so
//! distinct tuples never share a keystream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const INDEX_BITS: u32 = 26;
const INDEX_LIMIT: u64 = 1 << INDEX_BITS;

/// What a random stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Initial particle positions.
    Init = 1,
    /// Brownian increments.
    Noise = 2,
    /// Mini-batch selection for the consensus point.
    Batch = 3,
    /// Realizations of the random vector for sample averages.
    Samples = 4,
    /// Subsampling used to couple ensembles of different sizes.
    Subsample = 5,
}

/// Separates finite-size runs from the large reference ensembles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Role {
    #[default]
    Primary = 0,
    Reference = 1,
}

/// Identifies one replication: `(master, run, sample)` plus the role of the
/// run. Identical seeds give bit-identical streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RunSeed {
    pub master: u64,
    pub run: u64,
    pub sample: u64,
    pub role: Role,
}

impl RunSeed {
    /// # Panics
    /// If `run` or `sample` is 2^26 or larger.
    pub fn new(master: u64, run: u64, sample: u64) -> Self {
        assert!(
            run < INDEX_LIMIT && sample < INDEX_LIMIT,
            "replication indices must be below 2^{INDEX_BITS}"
        );
        Self {
            master,
            run,
            sample,
            role: Role::Primary,
        }
    }

    pub fn with_role(self, role: Role) -> Self {
        Self { role, ..self }
    }

    pub fn stream_id(&self, stream: Stream) -> u64 {
        let tag = ((self.role as u64) << 4) | stream as u64;
        (tag << (2 * INDEX_BITS)) | (self.run << INDEX_BITS) | self.sample
    }

    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream_id(stream));
        rng
    }
}
