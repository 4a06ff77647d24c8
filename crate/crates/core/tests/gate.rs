mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;

use abcid::abc::Presentation;
use abcid::gate::{
    access, attribute_name, context_string, load_registry, save_registry, GateError, IssuerEntry,
    PolicyEntry, RegistryFile, GRANTING_CREDENTIAL_SETS, POLICIES, REGISTRY_VERSION,
};
use abcid::model::{select_credentials, Claim};
use abcid::policy::{AccessRequest, Outcome, Reason};
use abcid::wallet::{wallet_load, wallet_save, Wallet};
use common::{fixture, nonce, utc};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn request_for(domain: &str) -> AccessRequest {
    // Monday morning, inside every fixture time window.
    let at = utc(2024, 9, 2, 10, 0);
    let (action, rtype) = match domain {
        "medical_files" => ("write", "patient_file"),
        "students_marks" => ("write", "mark"),
        "library" => ("read", "book"),
        "staff_bus" => ("board", "bus"),
        other => panic!("no request for {other}"),
    };
    AccessRequest::new(action, rtype, "item_1", domain, at).unwrap()
}

fn shows(ids: &[&str], req: &AccessRequest, seed: u64) -> Vec<Presentation> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    ids.iter()
        .map(|id| fixture().present_for(id, req, nonce(seed as u8), &mut rng).unwrap())
        .collect()
}

fn decide(domain: &str, pres: &[Presentation], seed: u64) -> abcid::gate::AccessOutcome {
    let fx = fixture();
    access(&fx.registry, &fx.keys, &fx.policies, domain, &request_for(domain), pres, &nonce(seed as u8))
        .unwrap()
}

#[test]
fn fixture_domains_and_requirements() {
    let fx = fixture();
    let expect = [
        ("medical_files", vec!["medical_practitioner", "school_member"]),
        ("students_marks", vec!["teacher"]),
        ("library", vec!["library_subscriber", "school_member"]),
        ("staff_bus", vec!["school_member", "staff_member"]),
    ];
    assert_eq!(fx.registry.len(), 4);
    for (domain, attrs) in expect {
        let spec = fx.registry.lookup(domain).unwrap();
        let want: BTreeSet<String> = attrs.into_iter().map(String::from).collect();
        assert_eq!(spec.required_attrs, want, "{domain}");
    }
    assert_eq!(attribute_name("a1"), Some("student"));
    assert_eq!(attribute_name("a8"), None);
    for cred in &fx.credentials {
        assert!(cred.satisfies_equation(&fx.keys[&cred.metadata.issuer_id], &fx.holder));
    }
}

#[test]
fn duplicate_domain_rejected() {
    let mut reg = fixture().registry.clone();
    let spec = reg.lookup("library").unwrap().clone();
    assert!(matches!(reg.register_domain(spec), Err(GateError::DuplicateDomain(_))));
}

#[test]
fn selection_per_domain() {
    let fx = fixture();
    let wallet = fx.wallet_summaries();
    let pick = |d: &str| select_credentials(&fx.registry.lookup(d).unwrap().required_attrs, &wallet).unwrap();
    assert_eq!(pick("medical_files"), ["c1", "c5"]);
    assert_eq!(pick("students_marks"), ["c3"]);
    assert_eq!(pick("library"), ["c2"]);
    assert_eq!(pick("staff_bus"), ["c4", "c5"]);
}

#[test]
fn listed_credential_sets_cover_their_domains() {
    let fx = fixture();
    for (domain, ids) in GRANTING_CREDENTIAL_SETS {
        let covered: BTreeSet<String> = ids
            .iter()
            .flat_map(|id| fx.credential(id).unwrap().claims.iter().map(|c| c.name().to_owned()))
            .collect();
        let required = &fx.registry.lookup(domain).unwrap().required_attrs;
        assert!(covered.is_superset(required), "{domain}");
    }
}

#[test]
fn medical_files_permit_with_c1_c5() {
    let req = request_for("medical_files");
    let out = decide("medical_files", &shows(&["c1", "c5"], &req, 1), 1);
    assert_eq!(out.decision.outcome, Outcome::Permit);
    assert_eq!(out.matched_policy_id.as_deref(), Some("medical_files_write"));
    assert!(out.presentation_errors.is_empty());
}

#[test]
fn every_domain_permits_its_selected_set() {
    let fx = fixture();
    let wallet = fx.wallet_summaries();
    for (i, domain) in ["medical_files", "students_marks", "library", "staff_bus"].iter().enumerate() {
        let ids = select_credentials(&fx.registry.lookup(domain).unwrap().required_attrs, &wallet).unwrap();
        let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
        let out = decide(domain, &shows(&ids, &request_for(domain), 10 + i as u64), 10 + i as u64);
        assert!(out.decision.is_permit(), "{domain}: {:?}", out.decision);
    }
}

#[test]
fn staff_bus_denied_with_only_c4() {
    let req = request_for("staff_bus");
    let out = decide("staff_bus", &shows(&["c4"], &req, 2), 2);
    assert_eq!(out.decision.outcome, Outcome::Deny);
    assert_eq!(out.decision.reasons, [Reason::AttributeMissing("school_member".into())]);
    assert!(out.presentation_errors.is_empty());
}

#[test]
fn mutated_presentation_forces_deny() {
    let req = request_for("medical_files");
    let mut pres = shows(&["c1", "c5"], &req, 3);
    pres[1].proof.s_v += 1;
    let out = decide("medical_files", &pres, 3);
    assert_eq!(out.decision.outcome, Outcome::Deny);
    assert_eq!(out.decision.reasons.first(), Some(&Reason::PresentationInvalid));
    assert_eq!(out.presentation_errors.len(), 1);
    assert_eq!(out.presentation_errors[0].index, 1);
    assert_eq!(out.presentation_errors[0].code, "ProofInvalid");
    assert_eq!(out.verified.len(), 1);
}

#[test]
fn empty_presentations_deny_everywhere() {
    for domain in ["medical_files", "students_marks", "library", "staff_bus"] {
        let out = decide(domain, &[], 4);
        assert_eq!(out.decision.outcome, Outcome::Deny, "{domain}");
        assert!(out.verified.is_empty());
    }
}

#[test]
fn pooled_claims_are_the_union_of_disclosures() {
    let req = request_for("library");
    let pres = shows(&["c2", "c5"], &req, 5);
    let out = decide("library", &pres, 5);
    let union: BTreeSet<Claim> = pres
        .iter()
        .flat_map(|p| p.disclosed.iter().map(|d| d.claim.clone()))
        .collect();
    assert_eq!(out.verified, union);
    assert_eq!(out.verified.len(), 3);
}

#[test]
fn replay_under_another_nonce_or_context_fails() {
    let req = request_for("medical_files");
    let pres = shows(&["c1", "c5"], &req, 6);
    let out = decide("medical_files", &pres, 7);
    assert!(out.presentation_errors.iter().all(|f| f.code == "NonceMismatch"));
    assert_eq!(out.presentation_errors.len(), 2);

    let fx = fixture();
    let mut other = req.clone();
    other.resource_name = "item_2".into();
    assert_ne!(context_string(&other), context_string(&req));
    let out = access(&fx.registry, &fx.keys, &fx.policies, "medical_files", &other, &pres, &nonce(6)).unwrap();
    assert!(!out.decision.is_permit());
    assert!(out.presentation_errors.iter().all(|f| f.code == "ContextMismatch"));
}

#[test]
fn untrusted_issuer_and_unknown_domain() {
    let fx = fixture();
    let mut registry = abcid::gate::Registry::new();
    let mut spec = fx.registry.lookup("medical_files").unwrap().clone();
    spec.trusted_issuers = ["school_board".to_string()].into();
    registry.register_domain(spec).unwrap();
    let req = request_for("medical_files");
    let pres = shows(&["c1", "c5"], &req, 8);
    let out = access(&registry, &fx.keys, &fx.policies, "medical_files", &req, &pres, &nonce(8)).unwrap();
    assert!(!out.decision.is_permit());
    assert_eq!(out.presentation_errors.len(), 2);
    assert!(out.presentation_errors.iter().all(|f| f.code == "UntrustedIssuer"));

    let err = access(&registry, &fx.keys, &fx.policies, "library", &req, &pres, &nonce(8)).unwrap_err();
    assert!(matches!(err, GateError::UnknownDomain(_)));
}

#[test]
fn registry_file_round_trip() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("keys")).unwrap();
    let mut issuers = Vec::new();
    for (id, pk) in &fx.keys {
        let rel = PathBuf::from(format!("keys/{id}.json"));
        std::fs::write(dir.path().join(&rel), serde_json::to_string(pk).unwrap()).unwrap();
        issuers.push(IssuerEntry {
            issuer_id: id.clone(),
            key_digest: pk.digest_hex(),
            key_file: rel,
        });
    }
    let mut policies = Vec::new();
    for (id, _, text) in POLICIES {
        let rel = PathBuf::from(format!("{id}.pol"));
        std::fs::write(dir.path().join(&rel), text).unwrap();
        policies.push(PolicyEntry {
            policy_id: id.into(),
            file: rel,
        });
    }
    let file = RegistryFile {
        version: REGISTRY_VERSION,
        domains: fx.registry.domains().cloned().collect(),
        issuers: issuers.clone(),
        policies,
    };
    let path = dir.path().join("registry.json");
    save_registry(&path, &file).unwrap();
    let (registry, keys, policies) = load_registry(&path).unwrap();
    assert_eq!(registry, fx.registry);
    assert_eq!(keys, fx.keys);
    assert_eq!(policies, fx.policies);

    let mut tampered = file.clone();
    tampered.issuers[0].key_digest = "00".repeat(32);
    save_registry(&path, &tampered).unwrap();
    assert!(matches!(load_registry(&path), Err(GateError::Format(_))));
}

#[test]
fn wallet_with_fixture_credentials_round_trips() {
    let fx = fixture();
    let mut w = Wallet::new();
    w.set_secret(fx.holder.clone()).unwrap();
    for c in &fx.credentials {
        w.add_credential(c.clone(), Some(format!("label for {}", c.id()))).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wallet.json");
    wallet_save(&w, &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let loaded = wallet_load(&path).unwrap();
    assert_eq!(loaded, w);
    wallet_save(&loaded, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    assert!(w.add_credential(fx.credentials[0].clone(), None).is_err());
}
