//! Subcommand bodies. Each returns a table and a JSON summary.

mod potential;
mod se;
mod simulate;
mod threshold;

pub use potential::potential;
pub use se::se;
pub use simulate::simulate;
pub use threshold::threshold;

use crate::config::ConfigError;

/// Library errors about settings become configuration errors; the rest
/// stay runtime failures.
pub(crate) fn lib_err(e: scoamp::Error) -> anyhow::Error {
    match e {
        scoamp::Error::Config(msg) => ConfigError(msg).into(),
        other => other.into(),
    }
}
