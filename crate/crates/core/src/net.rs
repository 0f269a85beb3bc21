//! Shared blocking HTTP client setup.

use std::time::Duration;

use ureq::Agent;

/// An agent that reports HTTP error statuses as ordinary responses so
/// callers can classify them.
pub(crate) fn agent(timeout: Duration) -> Agent {
    Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(timeout))
        .build()
        .into()
}

/// Upper bound on response bodies read into memory.
pub(crate) const MAX_BODY_BYTES: u64 = 64 * 1024 * 1024;
