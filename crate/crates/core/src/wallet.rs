//! Holder wallet: one holder secret, its credentials, free-text labels and
//! issuance requests awaiting completion. Stored as unencrypted JSON with
//! owner-only permissions.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abc::{Credential, HolderIssuanceState, HolderSecret, Nonce};

pub const WALLET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WalletError {
    #[error("wallet I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("wallet format: {0}")]
    Format(String),
    #[error("credential id {0:?} already in wallet")]
    DuplicateCredential(String),
    #[error("wallet already holds a secret key")]
    SecretExists,
    #[error("wallet has no secret key")]
    NoSecret,
    #[error("no pending issuance for nonce {0}")]
    NoPending(Nonce),
}

impl WalletError {
    pub fn code(&self) -> &'static str {
        match self {
            WalletError::Io(_) => "IoError",
            WalletError::Format(_) => "FormatError",
            WalletError::DuplicateCredential(_) => "DuplicateCredential",
            WalletError::SecretExists => "SecretExists",
            WalletError::NoSecret => "NoSecret",
            WalletError::NoPending(_) => "NoPendingIssuance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wallet {
    pub version: u32,
    pub holder_secret: Option<HolderSecret>,
    pub credentials: Vec<Credential>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    #[serde(default)]
    pub pending: Vec<HolderIssuanceState>,
}

impl Default for Wallet {
    fn default() -> Self {
        Wallet {
            version: WALLET_VERSION,
            holder_secret: None,
            credentials: Vec::new(),
            labels: BTreeMap::new(),
            pending: Vec::new(),
        }
    }
}

impl Wallet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_secret(&mut self, secret: HolderSecret) -> Result<(), WalletError> {
        if self.holder_secret.is_some() {
            return Err(WalletError::SecretExists);
        }
        self.holder_secret = Some(secret);
        Ok(())
    }

    pub fn secret(&self) -> Result<&HolderSecret, WalletError> {
        self.holder_secret.as_ref().ok_or(WalletError::NoSecret)
    }

    pub fn credential(&self, id: &str) -> Option<&Credential> {
        self.credentials.iter().find(|c| c.id() == id)
    }

    pub fn add_credential(&mut self, cred: Credential, label: Option<String>) -> Result<(), WalletError> {
        let id = cred.id().to_owned();
        if self.credential(&id).is_some() {
            return Err(WalletError::DuplicateCredential(id));
        }
        if let Some(label) = label {
            self.labels.insert(id, label);
        }
        self.credentials.push(cred);
        Ok(())
    }

    pub fn take_pending(&mut self, nonce: &Nonce) -> Result<HolderIssuanceState, WalletError> {
        let pos = self
            .pending
            .iter()
            .position(|p| &p.nonce == nonce)
            .ok_or(WalletError::NoPending(*nonce))?;
        Ok(self.pending.remove(pos))
    }

    fn validate(&self) -> Result<(), WalletError> {
        if self.version != WALLET_VERSION {
            return Err(WalletError::Format(format!("unsupported wallet version {}", self.version)));
        }
        let mut ids = BTreeSet::new();
        for c in &self.credentials {
            if !ids.insert(c.id()) {
                return Err(WalletError::DuplicateCredential(c.id().to_owned()));
            }
        }
        Ok(())
    }
}

pub fn wallet_save(wallet: &Wallet, path: &Path) -> Result<(), WalletError> {
    let json = serde_json::to_string_pretty(wallet).map_err(|e| WalletError::Format(e.to_string()))?;
    let mut options = fs::OpenOptions::new();
    options.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    let mut file = options.open(path)?;
    file.write_all(json.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn wallet_load(path: &Path) -> Result<Wallet, WalletError> {
    let text = fs::read_to_string(path)?;
    let wallet: Wallet =
        serde_json::from_str(&text).map_err(|e| WalletError::Format(e.to_string()))?;
    wallet.validate()?;
    Ok(wallet)
}
