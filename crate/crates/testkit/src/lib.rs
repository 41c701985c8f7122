//! Deterministic stand-ins for the reward, chat and embedding services.
//!
//! * [`toy::toy_reward`] scores responses by length and lexicon hits.
//! * [`embed::hash_embed`] embeds text as a hashed bag of words.
//! * [`canned::CannedPerturbationSpec`] answers chat prompts that carry
//!   fixture markers.
//!
//! [`service::MockServices`] bundles the three behind the gateway's wire
//! protocol, either in-process (it implements the gateway `Transport`) or
//! over HTTP via [`server::MockServer`].

pub mod canned;
pub mod embed;
pub mod fixtures;
pub mod server;
pub mod service;
pub mod toy;

use std::sync::Arc;

use rmcontrast::gateway::{Gateway, ResponseCache};

pub use canned::CannedPerturbationSpec;
pub use embed::{fnv1a64, hash_embed};
pub use server::MockServer;
pub use service::MockServices;
pub use toy::{toy_reward, ToyRewardSpec};

/// A gateway answering from `services` without any socket.
pub fn in_process_gateway(services: Arc<MockServices>, cache: ResponseCache) -> Gateway {
    Gateway::new(services, cache)
}
