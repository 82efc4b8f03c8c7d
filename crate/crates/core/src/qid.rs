use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A Wikidata item identifier: `Q` followed by one or more ASCII digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Qid(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed Wikidata id `{0}` (expected Q followed by digits)")]
pub struct InvalidQid(pub String);

impl Qid {
    pub fn new(raw: &str) -> Result<Self, InvalidQid> {
        let digits = raw
            .strip_prefix('Q')
            .ok_or_else(|| InvalidQid(raw.to_string()))?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(InvalidQid(raw.to_string()));
        }
        Ok(Qid(raw.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Qid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Qid {
    type Err = InvalidQid;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Qid::new(s)
    }
}

impl Serialize for Qid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Qid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Qid::new(&raw).map_err(serde::de::Error::custom)
    }
}
