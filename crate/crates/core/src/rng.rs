//! Named, independent random streams derived from one run seed.
//!
//! Every consumer of randomness in a run draws from its own ChaCha stream,
//! so changing how often one consumer draws never shifts another's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Uplink = 1,
    Feedback = 2,
    RelayUplink = 3,
    RelayDownlink = 4,
    RelayFeedback = 5,
    PolicyCoding = 6,
    RelayCoding = 7,
    Payload = 8,
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
