//! Identity data model: attributes, claims, partial and digital identities,
//! and credential selection against a domain's attribute requirements.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum length of a token (attribute name, issuer id, domain id, ...).
pub const MAX_TOKEN_LEN: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid token {0:?}: expected [a-z][a-z0-9_]* of at most 64 bytes")]
    InvalidToken(String),
    #[error("claim has an empty issuer id")]
    MissingIssuer,
    #[error("duplicate credential id {0:?} in wallet")]
    DuplicateCredentialId(String),
    #[error("required attributes not covered by the wallet: {missing:?}")]
    Unsatisfiable { missing: BTreeSet<String> },
}

/// `true` when `s` matches `[a-z][a-z0-9_]*` and is at most 64 bytes long.
pub fn is_token(s: &str) -> bool {
    let mut bytes = s.bytes();
    match bytes.next() {
        Some(b'a'..=b'z') => {}
        _ => return false,
    }
    s.len() <= MAX_TOKEN_LEN && bytes.all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_'))
}

pub fn check_token(s: &str) -> Result<(), ModelError> {
    if is_token(s) {
        Ok(())
    } else {
        Err(ModelError::InvalidToken(s.to_owned()))
    }
}

/// A `name:value` characteristic of an entity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawAttribute")]
pub struct Attribute {
    name: String,
    value: String,
}

#[derive(Deserialize)]
struct RawAttribute {
    name: String,
    value: String,
}

impl TryFrom<RawAttribute> for Attribute {
    type Error = ModelError;

    fn try_from(raw: RawAttribute) -> Result<Self, Self::Error> {
        Attribute::new(raw.name, raw.value)
    }
}

impl Attribute {
    pub fn new(name: impl Into<String>, value: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        check_token(&name)?;
        Ok(Attribute {
            name,
            value: value.into(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &str {
        &self.value
    }
}

/// An attribute certified by an issuer.
///
/// Two claims are the same claim when `(name, value, issuer_id)` agree; the
/// schema under which it was certified does not take part in comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawClaim")]
pub struct Claim {
    #[serde(flatten)]
    attribute: Attribute,
    issuer_id: String,
    schema_id: String,
}

#[derive(Deserialize)]
struct RawClaim {
    name: String,
    value: String,
    issuer_id: String,
    schema_id: String,
}

impl TryFrom<RawClaim> for Claim {
    type Error = ModelError;

    fn try_from(raw: RawClaim) -> Result<Self, Self::Error> {
        Claim::new(Attribute::new(raw.name, raw.value)?, raw.issuer_id, raw.schema_id)
    }
}

impl std::fmt::Display for Claim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={:?} ({})", self.name(), self.attribute.value(), self.issuer_id)
    }
}

impl Claim {
    pub fn new(
        attribute: Attribute,
        issuer_id: impl Into<String>,
        schema_id: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let issuer_id = issuer_id.into();
        let schema_id = schema_id.into();
        if issuer_id.is_empty() {
            return Err(ModelError::MissingIssuer);
        }
        check_token(&issuer_id)?;
        check_token(&schema_id)?;
        Ok(Claim {
            attribute,
            issuer_id,
            schema_id,
        })
    }

    pub fn attribute(&self) -> &Attribute {
        &self.attribute
    }

    pub fn name(&self) -> &str {
        self.attribute.name()
    }

    pub fn value(&self) -> &str {
        self.attribute.value()
    }

    pub fn issuer_id(&self) -> &str {
        &self.issuer_id
    }

    pub fn schema_id(&self) -> &str {
        &self.schema_id
    }

    fn identity(&self) -> (&str, &str, &str) {
        (self.name(), self.value(), &self.issuer_id)
    }

    /// Canonical byte form used for hashing: each of name, value and
    /// issuer id as a 4-byte big-endian length followed by its UTF-8 bytes,
    /// separated by 0x1F.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let fields = [self.name(), self.value(), self.issuer_id.as_str()];
        let mut out = Vec::with_capacity(fields.iter().map(|f| f.len() + 5).sum());
        for (i, field) in fields.iter().enumerate() {
            if i > 0 {
                out.push(0x1f);
            }
            out.extend_from_slice(&(field.len() as u32).to_be_bytes());
            out.extend_from_slice(field.as_bytes());
        }
        out
    }
}

impl PartialEq for Claim {
    fn eq(&self, other: &Self) -> bool {
        self.identity() == other.identity()
    }
}

impl Eq for Claim {}

impl Hash for Claim {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.identity().hash(state);
    }
}

impl PartialOrd for Claim {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Claim {
    fn cmp(&self, other: &Self) -> Ordering {
        self.identity().cmp(&other.identity())
    }
}

/// Local wallet label for the entity holding the credentials. Never leaves
/// the wallet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub entity_id: String,
}

/// The claims one domain gets to see.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartialIdentity {
    pub domain_id: String,
    pub claims: BTreeSet<Claim>,
}

impl PartialIdentity {
    pub fn new(domain_id: impl Into<String>, claims: impl IntoIterator<Item = Claim>) -> Self {
        PartialIdentity {
            domain_id: domain_id.into(),
            claims: claims.into_iter().collect(),
        }
    }

    pub fn empty(domain_id: impl Into<String>) -> Self {
        Self::new(domain_id, [])
    }
}

/// The union of an entity's partial identities. Partials may overlap.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitalIdentity {
    pub partials: BTreeSet<PartialIdentity>,
}

impl DigitalIdentity {
    /// Every claim of every partial identity, deduplicated.
    pub fn claim_union(&self) -> BTreeSet<Claim> {
        self.partials
            .iter()
            .flat_map(|p| p.claims.iter().cloned())
            .collect()
    }
}

pub fn union_partial_identities(
    partials: impl IntoIterator<Item = PartialIdentity>,
) -> DigitalIdentity {
    DigitalIdentity {
        partials: partials.into_iter().collect(),
    }
}

/// The partial identity registered for `domain_id`, or an empty one.
///
/// Several partials registered under the same domain are merged.
pub fn project_partial_identity(di: &DigitalIdentity, domain_id: &str) -> PartialIdentity {
    let claims = di
        .partials
        .iter()
        .filter(|p| p.domain_id == domain_id)
        .flat_map(|p| p.claims.iter().cloned());
    PartialIdentity::new(domain_id, claims)
}

/// What credential selection needs to know about a wallet entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialSummary {
    pub id: String,
    pub attributes: BTreeSet<String>,
}

impl CredentialSummary {
    pub fn new<I, S>(id: impl Into<String>, attributes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CredentialSummary {
            id: id.into(),
            attributes: attributes.into_iter().map(Into::into).collect(),
        }
    }
}

/// Greedy set cover of `required` by wallet credentials.
///
/// Each round picks the credential covering the most still-uncovered
/// required attributes. Ties go to the credential carrying the fewest
/// attributes outside `required`, then to the smallest id. The returned ids
/// are in selection order.
pub fn select_credentials(
    required: &BTreeSet<String>,
    wallet: &[CredentialSummary],
) -> Result<Vec<String>, ModelError> {
    let mut seen = BTreeSet::new();
    for c in wallet {
        if !seen.insert(c.id.as_str()) {
            return Err(ModelError::DuplicateCredentialId(c.id.clone()));
        }
    }

    let extra: BTreeMap<&str, usize> = wallet
        .iter()
        .map(|c| (c.id.as_str(), c.attributes.difference(required).count()))
        .collect();

    let mut uncovered: BTreeSet<&String> = required.iter().collect();
    let mut chosen: Vec<String> = Vec::new();
    while !uncovered.is_empty() {
        let best = wallet
            .iter()
            .filter(|c| !chosen.contains(&c.id))
            .map(|c| {
                let gain = c.attributes.iter().filter(|a| uncovered.contains(a)).count();
                (c, gain)
            })
            .filter(|(_, gain)| *gain > 0)
            .min_by(|(a, ga), (b, gb)| {
                gb.cmp(ga)
                    .then(extra[a.id.as_str()].cmp(&extra[b.id.as_str()]))
                    .then(a.id.cmp(&b.id))
            });
        match best {
            Some((c, _)) => {
                uncovered.retain(|a| !c.attributes.contains(*a));
                chosen.push(c.id.clone());
            }
            None => {
                return Err(ModelError::Unsatisfiable {
                    missing: uncovered.into_iter().cloned().collect(),
                })
            }
        }
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn claim(name: &str, value: &str, issuer: &str) -> Claim {
        Claim::new(Attribute::new(name, value).unwrap(), issuer, "basic").unwrap()
    }

    fn names(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    /// Every subset of the wallet, smallest first, that covers `required`.
    fn brute_force_min_cover(
        required: &BTreeSet<String>,
        wallet: &[CredentialSummary],
    ) -> Option<usize> {
        (0u32..(1 << wallet.len()))
            .filter(|mask| {
                let covered: BTreeSet<&String> = wallet
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .flat_map(|(_, c)| c.attributes.iter())
                    .collect();
                required.iter().all(|r| covered.contains(r))
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
    }

    #[test]
    fn token_rules() {
        assert!(is_token("a"));
        assert!(is_token("library_subscriber"));
        assert!(is_token("a9_"));
        assert!(!is_token(""));
        assert!(!is_token("9a"));
        assert!(!is_token("Abc"));
        assert!(!is_token("a-b"));
        assert!(is_token(&"a".repeat(64)));
        assert!(!is_token(&"a".repeat(65)));
    }

    #[test]
    fn attribute_value_may_be_empty() {
        let a = Attribute::new("over_18", "").unwrap();
        assert_eq!(a.value(), "");
        assert!(Attribute::new("", "x").is_err());
    }

    #[test]
    fn claim_requires_issuer() {
        let a = Attribute::new("student", "true").unwrap();
        assert_eq!(Claim::new(a, "", "s"), Err(ModelError::MissingIssuer));
    }

    #[test]
    fn claim_identity_ignores_schema() {
        let a = Attribute::new("student", "true").unwrap();
        let c1 = Claim::new(a.clone(), "uni", "schema_a").unwrap();
        let c2 = Claim::new(a, "uni", "schema_b").unwrap();
        assert_eq!(c1, c2);
        assert_eq!(BTreeSet::from([c1, c2]).len(), 1);
    }

    #[test]
    fn canonical_bytes_layout() {
        let c = claim("ab", "x", "iss");
        let expected: Vec<u8> = [
            &[0, 0, 0, 2][..],
            b"ab",
            &[0x1f],
            &[0, 0, 0, 1],
            b"x",
            &[0x1f],
            &[0, 0, 0, 3],
            b"iss",
        ]
        .concat();
        assert_eq!(c.canonical_bytes(), expected);
    }

    #[test]
    fn claim_json_rejects_bad_name() {
        let bad = r#"{"name":"Bad","value":"1","issuer_id":"i","schema_id":"s"}"#;
        assert!(serde_json::from_str::<Claim>(bad).is_err());
        let good = r#"{"name":"ok","value":"1","issuer_id":"i","schema_id":"s"}"#;
        assert_eq!(serde_json::from_str::<Claim>(good).unwrap(), claim("ok", "1", "i"));
    }

    #[test]
    fn union_of_nothing_is_empty() {
        let di = union_partial_identities([]);
        assert!(di.claim_union().is_empty());
    }

    #[test]
    fn union_of_one() {
        let p1 = PartialIdentity::new("d1", [claim("a3", "1", "i"), claim("a6", "1", "i")]);
        let di = union_partial_identities([p1.clone()]);
        assert_eq!(di.claim_union(), p1.claims);
    }

    #[test]
    fn union_counts_overlap_once() {
        let (a3, a6, a7) = (claim("a3", "1", "i"), claim("a6", "1", "i"), claim("a7", "1", "i"));
        let p1 = PartialIdentity::new("d2", [a3.clone(), a6.clone()]);
        let p2 = PartialIdentity::new("d3", [a6.clone(), a7.clone()]);
        let di = union_partial_identities([p1, p2]);
        assert_eq!(di.claim_union(), BTreeSet::from([a3, a6, a7]));
        assert_eq!(di.partials.len(), 2);
    }

    #[test]
    fn projection_hits_misses_and_does_not_union() {
        let (a3, a6, a7) = (claim("a3", "1", "i"), claim("a6", "1", "i"), claim("a7", "1", "i"));
        let p_library = PartialIdentity::new("library", [a6.clone(), a7.clone()]);
        let p_marks = PartialIdentity::new("students_marks", [a3, a6]);
        let di = union_partial_identities([p_library.clone(), p_marks]);
        assert_eq!(project_partial_identity(&di, "library"), p_library);
        assert_eq!(
            project_partial_identity(&di, "unknown_domain"),
            PartialIdentity::empty("unknown_domain")
        );
    }

    #[test]
    fn select_medical_pair() {
        let wallet = vec![
            CredentialSummary::new("c1", ["a5"]),
            CredentialSummary::new("c5", ["a6"]),
            CredentialSummary::new("c3", ["a3"]),
        ];
        assert_eq!(select_credentials(&names(&["a5", "a6"]), &wallet).unwrap(), ["c1", "c5"]);
        assert!(select_credentials(&BTreeSet::new(), &wallet).unwrap().is_empty());
    }

    #[test]
    fn select_tie_break_prefers_narrow_credentials() {
        let wallet = vec![
            CredentialSummary::new("c4", ["a4"]),
            CredentialSummary::new("c5", ["a6"]),
            CredentialSummary::new("c2", ["a6", "a7"]),
        ];
        let required = names(&["a4", "a6"]);
        let picked = select_credentials(&required, &wallet).unwrap();
        assert_eq!(picked, ["c4", "c5"]);
        assert_eq!(brute_force_min_cover(&required, &wallet), Some(picked.len()));
    }

    #[test]
    fn select_unsatisfiable_names_missing() {
        let wallet = vec![CredentialSummary::new("c1", ["a5"])];
        assert_eq!(
            select_credentials(&names(&["a5", "a9"]), &wallet),
            Err(ModelError::Unsatisfiable { missing: names(&["a9"]) })
        );
    }

    #[test]
    fn select_rejects_duplicate_ids() {
        let wallet = vec![
            CredentialSummary::new("c1", ["a5"]),
            CredentialSummary::new("c1", ["a6"]),
        ];
        assert!(matches!(
            select_credentials(&names(&["a5"]), &wallet),
            Err(ModelError::DuplicateCredentialId(_))
        ));
    }

    fn arb_claim() -> impl Strategy<Value = Claim> {
        ("[a-e]", "[0-2]", "i[12]").prop_map(|(n, v, i)| claim(&n, &v, &i))
    }

    fn arb_wallet() -> impl Strategy<Value = Vec<CredentialSummary>> {
        prop::collection::vec(prop::collection::btree_set("a[0-7]", 1..4), 0..=10).prop_map(
            |sets| {
                sets.into_iter()
                    .enumerate()
                    .map(|(i, attrs)| CredentialSummary::new(format!("c{i}"), attrs))
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn union_equals_set_union(
            parts in prop::collection::vec(
                ("d[0-3]", prop::collection::btree_set(arb_claim(), 0..6)), 0..5)
        ) {
            let partials: Vec<PartialIdentity> = parts
                .iter()
                .map(|(d, cs)| PartialIdentity::new(d.clone(), cs.iter().cloned()))
                .collect();
            let mut expected = BTreeSet::new();
            for p in &partials {
                for c in &p.claims {
                    expected.insert(c.clone());
                }
            }
            let di = union_partial_identities(partials.clone());
            prop_assert_eq!(di.claim_union(), expected);
            for d in ["d0", "d1", "d2", "d3", "dx"] {
                let projected = project_partial_identity(&di, d);
                prop_assert_eq!(&projected.domain_id, d);
                for c in &projected.claims {
                    prop_assert!(partials.iter().any(|p| p.domain_id == d && p.claims.contains(c)));
                }
            }
        }

        #[test]
        fn selection_covers_and_is_locally_minimal(
            wallet in arb_wallet(),
            required in prop::collection::btree_set("a[0-7]", 0..5),
        ) {
            let oracle = brute_force_min_cover(&required, &wallet);
            match select_credentials(&required, &wallet) {
                Ok(ids) => {
                    let covered = |ids: &[String]| -> bool {
                        let attrs: BTreeSet<&String> = wallet
                            .iter()
                            .filter(|c| ids.contains(&c.id))
                            .flat_map(|c| c.attributes.iter())
                            .collect();
                        required.iter().all(|r| attrs.contains(r))
                    };
                    prop_assert!(covered(&ids));
                    if let Some((_, rest)) = ids.split_last() {
                        prop_assert!(!covered(rest));
                    }
                    let min = oracle.expect("greedy found a cover, so one exists");
                    prop_assert!(ids.len() >= min);
                    prop_assert_eq!(select_credentials(&required, &wallet).unwrap(), ids);
                }
                Err(ModelError::Unsatisfiable { .. }) => prop_assert!(oracle.is_none()),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
