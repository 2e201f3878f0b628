//! Byte strings serialize as plain text when they are UTF-8 and as
//! `{"base64": ...}` otherwise.

use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr {
    Text(String),
    Binary { base64: String },
}

fn to_repr(bytes: &[u8]) -> Repr {
    match std::str::from_utf8(bytes) {
        Ok(s) => Repr::Text(s.to_string()),
        Err(_) => Repr::Binary {
            base64: base64::engine::general_purpose::STANDARD.encode(bytes),
        },
    }
}

fn from_repr<E: serde::de::Error>(repr: Repr) -> Result<Vec<u8>, E> {
    match repr {
        Repr::Text(s) => Ok(s.into_bytes()),
        Repr::Binary { base64 } => base64::engine::general_purpose::STANDARD
            .decode(base64)
            .map_err(E::custom),
    }
}

pub mod many {
    use super::*;

    pub fn serialize<S: Serializer>(items: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        items
            .iter()
            .map(|b| to_repr(b))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(from_repr)
            .collect()
    }
}

pub mod der {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        base64::engine::general_purpose::STANDARD
            .encode(bytes)
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        base64::engine::general_purpose::STANDARD
            .decode(String::deserialize(d)?)
            .map_err(serde::de::Error::custom)
    }
}
