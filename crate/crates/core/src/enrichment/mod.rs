//! Target acquisition from an internet index and country/ASN lookups.
//!
//! Nothing here touches the network unless a live provider or resolver is
//! explicitly configured.

mod index;
mod whois;

pub use index::{
    query_index, IndexProvider, IndexQuery, MockIndexProvider, ProviderError, ShodanProvider,
    API_KEY_VAR, DEFAULT_BASE_URL,
};
pub use whois::{
    lookup_batch, lookup_whois, parse_cymru_reply, CymruWhois, EnrichmentRecord, FixtureError,
    FixtureWhois, WhoisLookup, UNKNOWN_COUNTRY,
};
