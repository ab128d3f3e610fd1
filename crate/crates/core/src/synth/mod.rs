//! Labelled synthetic device-startup captures with controllable
//! separability.

mod bytes;
mod generate;
mod profile;
mod shaped;

pub use bytes::{ByteSource, EntropyLevel};
pub use generate::{generate_corpus, generate_session, session_id, SynthSession, NOISE_HORIZON_S};
pub use profile::{
    builtin_profiles, parse_profiles, render_profiles, DeviceProfile, Dist, FlowTemplate, Noise, Phase, ProfileSet,
    Transport,
};
pub use shaped::{paper_shaped_matrix, TABLE1_REMOVED};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("profile: {0}")]
    Profile(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
