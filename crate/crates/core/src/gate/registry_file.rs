//! On-disk registry: domains, trusted issuer key digests and policy file
//! references. Relative paths resolve against the registry file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DomainSpec, GateError, KeyRing, PolicyStore, Registry};
use crate::abc::IssuerPublicKey;
use crate::policy::parse_policy;

pub const REGISTRY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuerEntry {
    pub issuer_id: String,
    /// Hex SHA-256 digest of the issuer public key.
    pub key_digest: String,
    pub key_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub policy_id: String,
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryFile {
    pub version: u32,
    pub domains: Vec<DomainSpec>,
    pub issuers: Vec<IssuerEntry>,
    pub policies: Vec<PolicyEntry>,
}

pub fn save_registry(path: &Path, file: &RegistryFile) -> Result<(), GateError> {
    let json = serde_json::to_string_pretty(file).map_err(|e| GateError::Format(e.to_string()))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

/// Loads the registry with every referenced key and policy, checking key
/// digests and that each policy id is unique.
pub fn load_registry(path: &Path) -> Result<(Registry, KeyRing, PolicyStore), GateError> {
    let text = fs::read_to_string(path)?;
    let file: RegistryFile =
        serde_json::from_str(&text).map_err(|e| GateError::Format(e.to_string()))?;
    if file.version != REGISTRY_VERSION {
        return Err(GateError::Format(format!("unsupported registry version {}", file.version)));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            base.join(p)
        }
    };

    let mut keys = KeyRing::new();
    for entry in &file.issuers {
        let key_text = fs::read_to_string(resolve(&entry.key_file))?;
        let pk: IssuerPublicKey =
            serde_json::from_str(&key_text).map_err(|e| GateError::Format(e.to_string()))?;
        pk.check().map_err(|e| GateError::Format(e.to_string()))?;
        if pk.issuer_id != entry.issuer_id || pk.digest_hex() != entry.key_digest {
            return Err(GateError::Format(format!(
                "key file for issuer {:?} does not match its digest",
                entry.issuer_id
            )));
        }
        if keys.insert(entry.issuer_id.clone(), pk).is_some() {
            return Err(GateError::Format(format!("issuer {:?} listed twice", entry.issuer_id)));
        }
    }

    let mut policies = PolicyStore::new();
    for entry in &file.policies {
        let text = fs::read_to_string(resolve(&entry.file))?;
        let policy = parse_policy(&text)
            .map_err(|e| GateError::Format(format!("{}: {e}", entry.file.display())))?;
        if policies.insert(entry.policy_id.clone(), policy).is_some() {
            return Err(GateError::Format(format!("policy {:?} listed twice", entry.policy_id)));
        }
    }

    let mut registry = Registry::new();
    for spec in file.domains {
        registry.register_domain(spec)?;
    }
    Ok((registry, keys, policies))
}
