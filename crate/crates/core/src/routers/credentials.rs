use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::identify::Vendor;

const BUNDLED: &str = include_str!("../../data/default_credentials.toml");
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Credential {
    pub username: String,
    pub password: String,
}

impl Credential {
    pub fn new(username: &str, password: &str) -> Self {
        Self {
            username: username.to_string(),
            password: password.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CredentialFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad credential file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported credential file version {0}")]
    Version(u32),
}

#[derive(Deserialize)]
struct File {
    version: u32,
    #[serde(default)]
    credential: Vec<Entry>,
}

#[derive(Deserialize)]
struct Entry {
    family: String,
    username: String,
    password: String,
}

/// Per-family factory credential lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CredentialBook {
    entries: Vec<(String, Credential)>,
}

impl CredentialBook {
    /// The list shipped with the tool.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled credential file is valid")
    }

    pub fn parse(text: &str) -> Result<Self, CredentialFileError> {
        let file: File = toml::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(CredentialFileError::Version(file.version));
        }
        Ok(Self {
            entries: file
                .credential
                .into_iter()
                .map(|e| (e.family, Credential::new(&e.username, &e.password)))
                .collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CredentialFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| CredentialFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, vendor: Vendor, credential: Credential) {
        self.entries.push((vendor.family().to_string(), credential));
    }

    pub fn for_vendor(&self, vendor: Vendor) -> Vec<Credential> {
        self.entries
            .iter()
            .filter(|(f, _)| f == vendor.family())
            .map(|(_, c)| c.clone())
            .collect()
    }
}
