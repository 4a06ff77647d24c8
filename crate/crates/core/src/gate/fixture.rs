//! The demonstration world: seven attributes, five credentials, four
//! domains.
//!
//! | domain           | requires | credentials granting access |
//! |------------------|----------|-----------------------------|
//! | `medical_files`  | a5, a6   | c1, c5                      |
//! | `students_marks` | a3       | c3                          |
//! | `library`        | a6, a7   | c2, c5                      |
//! | `staff_bus`      | a4, a6   | c4, c5                      |
//!
//! c1 = {a5}, c2 = {a6, a7}, c3 = {a3}, c4 = {a4}, c5 = {a6}. Single-attribute
//! credentials come from `trust_authority`, the two-attribute library card
//! from `school_board`.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rand::RngCore;

use super::{DomainSpec, KeyRing, PolicyStore, Registry};
use crate::abc::{
    begin_issuance, complete_credential, holder_keygen, issue, present, setup_issuer, AbcError,
    Credential, CredentialMetadata, HolderSecret, IssuerSecretKey, Nonce, Presentation,
};
use crate::gate::context_string;
use crate::model::{Attribute, Claim, CredentialSummary};
use crate::policy::{parse_policy, AccessRequest};

/// Attribute labels and the attribute names they stand for.
pub const ATTRIBUTE_MAP: [(&str, &str); 7] = [
    ("a1", "student"),
    ("a2", "over_18"),
    ("a3", "teacher"),
    ("a4", "staff_member"),
    ("a5", "medical_practitioner"),
    ("a6", "school_member"),
    ("a7", "library_subscriber"),
];

/// Credential sets listed as granting access to each domain.
pub const GRANTING_CREDENTIAL_SETS: [(&str, &[&str]); 4] = [
    ("medical_files", &["c1", "c5"]),
    ("students_marks", &["c3"]),
    ("library", &["c2", "c5"]),
    ("staff_bus", &["c4", "c5"]),
];

const DOMAIN_REQUIREMENTS: [(&str, &[&str]); 4] = [
    ("medical_files", &["a5", "a6"]),
    ("students_marks", &["a3"]),
    ("library", &["a6", "a7"]),
    ("staff_bus", &["a4", "a6"]),
];

const CREDENTIALS: [(&str, &str, &[&str]); 5] = [
    ("c1", "trust_authority", &["a5"]),
    ("c2", "school_board", &["a6", "a7"]),
    ("c3", "trust_authority", &["a3"]),
    ("c4", "trust_authority", &["a4"]),
    ("c5", "trust_authority", &["a6"]),
];

/// `(policy id, domain, policy text)`, in each domain's evaluation order.
pub const POLICIES: [(&str, &str, &str); 5] = [
    (
        "medical_files_write",
        "medical_files",
        "permit subjects with medical_practitioner, school_member may write on resources of type patient_file in domain medical_files",
    ),
    (
        "students_marks_write",
        "students_marks",
        "permit subjects with teacher may write on resources of type mark in domain students_marks",
    ),
    (
        "library_audio",
        "library",
        "permit subjects with student, school_member, library_subscriber may read on resources of type audio when time between 08:00 and 18:00 and day in [mon,tue,wed,thu,fri] in domain library",
    ),
    (
        "library_books",
        "library",
        "permit subjects with school_member, library_subscriber may read on resources of type book in domain library",
    ),
    (
        "staff_bus_board",
        "staff_bus",
        "permit subjects with staff_member, school_member may board on resources of type bus in domain staff_bus",
    ),
];

pub fn attribute_name(label: &str) -> Option<&'static str> {
    ATTRIBUTE_MAP.iter().find(|(l, _)| *l == label).map(|(_, n)| *n)
}

fn schema_for(issuer: &str) -> &'static str {
    if issuer == "school_board" {
        "library_card"
    } else {
        "single_attribute"
    }
}

pub struct Fixture {
    pub registry: Registry,
    pub keys: KeyRing,
    pub issuer_secrets: BTreeMap<String, IssuerSecretKey>,
    pub policies: PolicyStore,
    pub holder: HolderSecret,
    /// c1..c5 in order.
    pub credentials: Vec<Credential>,
}

impl Fixture {
    pub fn credential(&self, id: &str) -> Option<&Credential> {
        self.credentials.iter().find(|c| c.id() == id)
    }

    pub fn wallet_summaries(&self) -> Vec<CredentialSummary> {
        self.credentials
            .iter()
            .map(|c| CredentialSummary::new(c.id(), c.claims.iter().map(|cl| cl.name())))
            .collect()
    }

    /// Presents credential `id` for `req`, disclosing only the claims named
    /// by the domain's policies.
    pub fn present_for<R: RngCore + ?Sized>(
        &self,
        id: &str,
        req: &AccessRequest,
        nonce: Nonce,
        rng: &mut R,
    ) -> Result<Presentation, AbcError> {
        let cred = self
            .credential(id)
            .ok_or_else(|| AbcError::Index(format!("no credential {id:?}")))?;
        let pk = &self.keys[&cred.metadata.issuer_id];
        let wanted: BTreeSet<&str> = self
            .registry
            .lookup(&req.domain_id)
            .into_iter()
            .flat_map(|d| d.policy_ids.iter())
            .filter_map(|pid| self.policies.get(pid))
            .flat_map(|p| p.subject_attrs().iter().map(|t| t.name.as_str()))
            .collect();
        let disclose = cred
            .claims
            .iter()
            .enumerate()
            .filter(|(_, c)| wanted.contains(c.name()))
            .map(|(i, _)| i + 1)
            .collect();
        present(pk, cred, &self.holder, &disclose, nonce, &context_string(req), rng)
    }
}

/// Builds the fixture: issuer keys of `modulus_bits`, one holder, its five
/// credentials, the four domains and their policies.
pub fn paper_fixture<R: RngCore + ?Sized>(modulus_bits: usize, rng: &mut R) -> Result<Fixture, AbcError> {
    let mut keys = KeyRing::new();
    let mut issuer_secrets = BTreeMap::new();
    for (issuer, count) in [("trust_authority", 1), ("school_board", 2)] {
        let (pk, sk) = setup_issuer(issuer, count, modulus_bits, rng)?;
        keys.insert(issuer.to_owned(), pk);
        issuer_secrets.insert(issuer.to_owned(), sk);
    }

    let holder = holder_keygen(&keys["trust_authority"].params, rng);
    let issued_at = NaiveDate::from_ymd_opt(2024, 9, 1).expect("valid date");
    let mut credentials = Vec::new();
    for (id, issuer, labels) in CREDENTIALS {
        let pk = &keys[issuer];
        let sk = &issuer_secrets[issuer];
        let schema = schema_for(issuer);
        let claims = labels
            .iter()
            .map(|l| {
                let name = attribute_name(l).expect("fixture labels are mapped");
                Attribute::new(name, "true")
                    .and_then(|a| Claim::new(a, issuer, schema))
                    .map_err(|e| AbcError::Encoding(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let metadata = CredentialMetadata {
            issuer_id: issuer.to_owned(),
            schema_id: schema.to_owned(),
            issued_at,
            expires_at: None,
            credential_id: id.to_owned(),
        };
        let nonce = Nonce::random(rng);
        let (req, state) = begin_issuance(pk, &holder, nonce, rng);
        let pre = issue(sk, pk, &req, &nonce, claims, metadata, rng)?;
        credentials.push(complete_credential(pk, pre, &state, &holder)?);
    }

    let mut policies = PolicyStore::new();
    for (id, _, text) in POLICIES {
        let policy = parse_policy(text).expect("fixture policies parse");
        policies.insert(id.to_owned(), policy);
    }

    let mut registry = Registry::new();
    for (domain, labels) in DOMAIN_REQUIREMENTS {
        let spec = DomainSpec {
            domain_id: domain.to_owned(),
            required_attrs: labels
                .iter()
                .map(|l| attribute_name(l).expect("mapped").to_owned())
                .collect(),
            policy_ids: POLICIES
                .iter()
                .filter(|(_, d, _)| *d == domain)
                .map(|(id, _, _)| id.to_string())
                .collect(),
            trusted_issuers: keys.keys().cloned().collect(),
        };
        registry.register_domain(spec).expect("fixture domains are distinct");
    }

    Ok(Fixture {
        registry,
        keys,
        issuer_secrets,
        policies,
        holder,
        credentials,
    })
}
