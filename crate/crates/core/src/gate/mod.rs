//! Domain registry and access decisions.
//!
//! `access` verifies every presentation against a trusted issuer key for the
//! served nonce and request context, pools the disclosed claims, and
//! evaluates the domain's policies over them.

mod fixture;
mod registry_file;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abc::{verify_presentation, IssuerPublicKey, Nonce, Presentation};
use crate::model::{is_token, Attribute, Claim};
use crate::policy::{evaluate, AccessRequest, Decision, Outcome, Policy, Reason};

pub use fixture::{attribute_name, paper_fixture, Fixture, ATTRIBUTE_MAP, GRANTING_CREDENTIAL_SETS, POLICIES};
pub use registry_file::{load_registry, save_registry, IssuerEntry, PolicyEntry, RegistryFile, REGISTRY_VERSION};

#[derive(Debug, Error)]
pub enum GateError {
    #[error("domain {0:?} is already registered")]
    DuplicateDomain(String),
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("request is for domain {request:?}, not {domain:?}")]
    DomainMismatch { domain: String, request: String },
    #[error("domain {domain:?} references unknown policy {policy:?}")]
    UnknownPolicy { domain: String, policy: String },
    #[error("policy {policy:?} belongs to domain {actual:?}, not {domain:?}")]
    PolicyDomainMismatch { domain: String, policy: String, actual: String },
    #[error("invalid domain spec: {0}")]
    InvalidSpec(String),
    #[error("registry file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GateError {
    pub fn code(&self) -> &'static str {
        match self {
            GateError::DuplicateDomain(_) => "DuplicateDomain",
            GateError::UnknownDomain(_) => "UnknownDomain",
            GateError::DomainMismatch { .. } => "DomainMismatch",
            GateError::UnknownPolicy { .. } => "UnknownPolicy",
            GateError::PolicyDomainMismatch { .. } => "PolicyDomainMismatch",
            GateError::InvalidSpec(_) => "InvalidSpec",
            GateError::Format(_) => "FormatError",
            GateError::Io(_) => "IoError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub domain_id: String,
    /// Attribute names a holder needs; used for credential selection only.
    pub required_attrs: BTreeSet<String>,
    pub policy_ids: Vec<String>,
    pub trusted_issuers: BTreeSet<String>,
}

impl DomainSpec {
    fn validate(&self) -> Result<(), GateError> {
        let bad = |what: String| Err(GateError::InvalidSpec(what));
        if !is_token(&self.domain_id) {
            return bad(format!("domain id {:?}", self.domain_id));
        }
        if self.trusted_issuers.is_empty() {
            return bad(format!("domain {:?} trusts no issuer", self.domain_id));
        }
        if let Some(t) = self
            .trusted_issuers
            .iter()
            .chain(&self.required_attrs)
            .chain(&self.policy_ids)
            .find(|t| !is_token(t))
        {
            return bad(format!("token {t:?} in domain {:?}", self.domain_id));
        }
        Ok(())
    }
}

/// Domains by id. Mutation is single-writer; lookups and `access` only read.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    domains: BTreeMap<String, DomainSpec>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_domain(&mut self, spec: DomainSpec) -> Result<(), GateError> {
        spec.validate()?;
        if self.domains.contains_key(&spec.domain_id) {
            return Err(GateError::DuplicateDomain(spec.domain_id));
        }
        self.domains.insert(spec.domain_id.clone(), spec);
        Ok(())
    }

    pub fn lookup(&self, domain_id: &str) -> Option<&DomainSpec> {
        self.domains.get(domain_id)
    }

    pub fn domains(&self) -> impl Iterator<Item = &DomainSpec> {
        self.domains.values()
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }
}

/// Issuer public keys by issuer id.
pub type KeyRing = BTreeMap<String, IssuerPublicKey>;

/// Policies by policy id.
pub type PolicyStore = BTreeMap<String, Policy>;

fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '%' => out.push_str("%25"),
            '|' => out.push_str("%7C"),
            c => out.push(c),
        }
    }
    out
}

/// Context string a presentation must be bound to for `req`:
/// `domain|resource_type|resource_name|action`, with `%` and `|` in each
/// field percent-escaped.
pub fn context_string(req: &AccessRequest) -> String {
    [&req.domain_id, &req.resource_type, &req.resource_name, &req.action]
        .map(|f| escape_field(f))
        .join("|")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationFailure {
    /// Position in the submitted presentation list.
    pub index: usize,
    pub issuer_id: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessOutcome {
    pub decision: Decision,
    pub matched_policy_id: Option<String>,
    pub verified: BTreeSet<Claim>,
    pub presentation_errors: Vec<PresentationFailure>,
}

pub fn access(
    registry: &Registry,
    keys: &KeyRing,
    policies: &PolicyStore,
    domain_id: &str,
    req: &AccessRequest,
    presentations: &[Presentation],
    nonce: &Nonce,
) -> Result<AccessOutcome, GateError> {
    let domain = registry
        .lookup(domain_id)
        .ok_or_else(|| GateError::UnknownDomain(domain_id.to_owned()))?;
    if req.domain_id != domain_id {
        return Err(GateError::DomainMismatch {
            domain: domain_id.to_owned(),
            request: req.domain_id.clone(),
        });
    }
    let mut domain_policies = Vec::with_capacity(domain.policy_ids.len());
    for id in &domain.policy_ids {
        let policy = policies.get(id).ok_or_else(|| GateError::UnknownPolicy {
            domain: domain_id.to_owned(),
            policy: id.clone(),
        })?;
        if policy.domain_id() != domain_id {
            return Err(GateError::PolicyDomainMismatch {
                domain: domain_id.to_owned(),
                policy: id.clone(),
                actual: policy.domain_id().to_owned(),
            });
        }
        domain_policies.push(policy.clone());
    }

    let context = context_string(req);
    let mut verified = BTreeSet::new();
    let mut presentation_errors = Vec::new();
    for (index, pres) in presentations.iter().enumerate() {
        let fail = |code: &str| PresentationFailure {
            index,
            issuer_id: pres.issuer_id.clone(),
            code: code.to_owned(),
        };
        if !domain.trusted_issuers.contains(&pres.issuer_id) {
            presentation_errors.push(fail("UntrustedIssuer"));
            continue;
        }
        let Some(pk) = keys.get(&pres.issuer_id) else {
            presentation_errors.push(fail("UnknownIssuerKey"));
            continue;
        };
        match verify_presentation(pk, pres, nonce, &context) {
            Ok(claims) => verified.extend(claims.claims.into_values()),
            Err(e) => presentation_errors.push(fail(e.code())),
        }
    }

    let attrs: BTreeSet<Attribute> = verified.iter().map(|c| c.attribute().clone()).collect();
    let mut decision = evaluate(&domain_policies, &attrs, req);
    if !presentation_errors.is_empty() {
        let mut reasons = vec![Reason::PresentationInvalid];
        if decision.outcome == Outcome::Deny {
            reasons.extend(decision.reasons.iter().cloned());
        }
        decision = Decision::deny(reasons, decision.nearest_miss.or(decision.matched_policy));
    }
    let matched_policy_id = decision.matched_policy.map(|i| domain.policy_ids[i].clone());
    Ok(AccessOutcome {
        decision,
        matched_policy_id,
        verified,
        presentation_errors,
    })
}
