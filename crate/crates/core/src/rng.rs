//! Counter-style random streams.
//!
//! Every trajectory, cloud sample and bootstrap loop draws from its own
//! ChaCha8 stream selected by `(seed, stream)`, so results do not depend on
//! how work is split across threads.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Stream namespaces keep unrelated consumers of one seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Trajectory { cloud: u32, index: u32 },
    CloudSample(u32),
    Shots(u32),
    Bootstrap(u32),
    Fit(u32),
}

impl Stream {
    pub fn id(self) -> u64 {
        match self {
            Stream::Trajectory { cloud, index } => ((cloud as u64) << 32) | index as u64,
            Stream::CloudSample(i) => (1u64 << 63) | i as u64,
            Stream::Shots(i) => (1u64 << 62) | i as u64,
            Stream::Bootstrap(i) => (1u64 << 61) | i as u64,
            Stream::Fit(i) => (1u64 << 60) | i as u64,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
