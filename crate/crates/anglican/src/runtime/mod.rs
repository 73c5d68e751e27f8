//! Deterministic runtime support: seeded RNG streams, distributions with
//! samplers and log densities, random processes, and the immutable state
//! threaded through every compiled program.

pub mod dist;
pub mod primitives;
pub mod process;
pub mod rng;
pub mod state;

pub use dist::Distribution;
pub use process::RandomProcess;
pub use rng::Rng;
pub use state::State;

#[derive(Clone, Debug, thiserror::Error)]
#[error("{0}")]
pub struct RuntimeError(pub String);

impl RuntimeError {
    pub fn new(msg: impl Into<String>) -> Self {
        RuntimeError(msg.into())
    }
}

macro_rules! runtime_bail {
    ($($arg:tt)*) => {
        return Err($crate::runtime::RuntimeError::new(format!($($arg)*)))
    };
}
pub(crate) use runtime_bail;
