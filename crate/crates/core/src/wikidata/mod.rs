//! Entity knowledge from the Wikidata REST API.

mod cache;
mod client;
mod fixture;
mod record;

pub use cache::{EntityCache, Lookup};
pub use client::{
    FetchLogEntry, WikidataClient, WikidataError, DEFAULT_BASE_URL, DEFAULT_RATE_PER_SEC,
};
pub use fixture::FixtureTransport;
pub use record::{entity_summary, EntityRecord, MissingEnglishLabel, NO_TARGET_LABEL};
