//! Seeded random streams.
//!
//! One root seed fans out into named, independent ChaCha streams so that a
//! change in one consumer (say, the sampler drawing more normals) never
//! perturbs another (the context sequence).

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Environment construction (θ*, dataset shuffles).
    EnvSetup,
    EnvContext,
    EnvNoise,
    Policy,
    Sampler,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::EnvSetup => 1,
            Stream::EnvContext => 2,
            Stream::EnvNoise => 3,
            Stream::Policy => 4,
            Stream::Sampler => 5,
        }
    }
}

pub fn stream_rng(root_seed: u64, stream: Stream) -> SimRng {
    let mut rng = SimRng::seed_from_u64(root_seed);
    rng.set_stream(stream.id());
    rng
}

/// Per-seed bundle of every stream a run consumes.
#[derive(Debug, Clone)]
pub struct RunStreams {
    pub env_setup: SimRng,
    pub env_context: SimRng,
    pub env_noise: SimRng,
    pub policy: SimRng,
    pub sampler: SimRng,
}

impl RunStreams {
    pub fn new(root_seed: u64) -> Self {
        Self {
            env_setup: stream_rng(root_seed, Stream::EnvSetup),
            env_context: stream_rng(root_seed, Stream::EnvContext),
            env_noise: stream_rng(root_seed, Stream::EnvNoise),
            policy: stream_rng(root_seed, Stream::Policy),
            sampler: stream_rng(root_seed, Stream::Sampler),
        }
    }
}
