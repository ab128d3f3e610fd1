use crate::seed;
use rand::RngCore;
use serde::{Deserialize, Serialize};

/// Payload byte distribution of a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyLevel {
    /// All-zero bytes, 0 bits/byte.
    Zero,
    /// Natural-language text, about 4.5 bits/byte.
    Text,
    /// Uniform pseudorandom bytes, close to 8 bits/byte.
    Encrypted,
}

impl EntropyLevel {
    pub fn target_bits(self) -> f64 {
        match self {
            EntropyLevel::Zero => 0.0,
            EntropyLevel::Text => 4.5,
            EntropyLevel::Encrypted => 7.9,
        }
    }
}

const CORPUS: &str = "The quick thermostat woke before dawn and asked the cloud for the time. \
Every sensor in the house sends a small report when it starts, then settles into a quiet rhythm of heartbeats. \
A camera resolves the name of its vendor server, opens a secure session and uploads a short greeting. \
Lamps, plugs and speakers behave in the same way, although each one has its own habits, sizes and pauses. \
Nothing here is secret; it is only ordinary text used to give payloads a familiar shape. \
Query: GET /api/v2/status?id=4471&fw=1.8.3 HTTP/1.1, Host: update.example.net, Accept: */*. ";

/// Endless payload stream for one flow direction.
pub struct ByteSource {
    level: EntropyLevel,
    rng: seed::Rng,
    pos: usize,
}

impl ByteSource {
    pub fn new(level: EntropyLevel, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let pos = (rng.next_u64() % CORPUS.len() as u64) as usize;
        Self { level, rng, pos }
    }

    pub fn fill(&mut self, out: &mut [u8]) {
        match self.level {
            EntropyLevel::Zero => out.fill(0),
            EntropyLevel::Encrypted => self.rng.fill_bytes(out),
            EntropyLevel::Text => {
                let text = CORPUS.as_bytes();
                for b in out {
                    *b = text[self.pos];
                    self.pos = (self.pos + 1) % text.len();
                }
            }
        }
    }

    pub fn take(&mut self, n: usize) -> Vec<u8> {
        let mut v = vec![0; n];
        self.fill(&mut v);
        v
    }
}
