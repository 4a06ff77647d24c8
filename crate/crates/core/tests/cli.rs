mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

use abcid::abc::{leaked_secrets, Presentation};
use abcid::gate::AccessOutcome;
use abcid::wallet::wallet_load;
use common::{cli, end_to_end_script, SHOW_NONCE};

const WORKED_POLICY: &str = "permit subjects with student, school_member, library_subscriber may read on resources of type audio when time between 08:00 and 18:00 and day in [mon,tue,wed,thu,fri] in domain library\n";

#[test]
fn scripted_round_trip_permits() {
    let dir = tempfile::tempdir().unwrap();
    let runs = end_to_end_script(dir.path(), 11);
    let last = runs.last().unwrap();
    assert!(last.stdout.starts_with("decision: Permit\n"), "{}", last.stdout);
    assert!(last.stdout.contains("matched_policy: medical_files_write"));
    let outcome: AccessOutcome =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("outcome.json")).unwrap()).unwrap();
    assert!(outcome.decision.is_permit());
    assert_eq!(outcome.verified.len(), 2);
}

#[test]
fn no_output_reveals_holder_or_signature_secrets() {
    let dir = tempfile::tempdir().unwrap();
    let runs = end_to_end_script(dir.path(), 12);
    let wallet = wallet_load(&dir.path().join("wallet.json")).unwrap();
    let k = wallet.secret().unwrap().value().clone();
    let mut secrets = vec![k];
    for c in &wallet.credentials {
        secrets.extend([c.a.clone(), c.e.clone(), c.v.clone()]);
    }
    for run in &runs {
        for text in [&run.stdout, &run.stderr] {
            for s in &secrets {
                assert!(!text.contains(&s.to_str_radix(16)));
                assert!(!text.contains(&s.to_string()));
            }
        }
    }
    for (file, cred) in [("staff.pres.json", "staff"), ("med.pres.json", "med"), ("member.pres.json", "member")] {
        let bytes = std::fs::read(dir.path().join(file)).unwrap();
        let pres: Presentation = serde_json::from_slice(&bytes).unwrap();
        let disclosed: BTreeSet<usize> = pres.disclosed.iter().map(|d| d.index).collect();
        let cred = wallet.credential(cred).unwrap();
        let leaks = leaked_secrets(&bytes, cred, wallet.secret().unwrap(), &disclosed, 256);
        assert!(leaks.is_empty(), "{file}: {leaks:?}");
    }
}

#[test]
fn policy_lint_prints_components() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("library.pol");
    std::fs::write(&path, WORKED_POLICY).unwrap();
    let run = cli(&["policy", "lint", path.to_str().unwrap()]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let lines: Vec<&str> = run.stdout.lines().collect();
    assert_eq!(
        lines,
        [
            "subjects: library_subscriber, school_member, student",
            "objects: those of type audio",
            "action: read",
            "context: time between 08:00 and 18:00; day in [mon,tue,wed,thu,fri]",
            "domain: library",
        ]
    );
}

#[test]
fn policy_lint_reports_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.pol");
    std::fs::write(&path, "permit subjects with may read in domain x").unwrap();
    let run = cli(&["policy", "lint", path.to_str().unwrap()]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.starts_with("error[ParseError]: 1:22:"), "{}", run.stderr);
    assert!(run.stdout.is_empty());
}

fn prepared_presentation(dir: &Path) -> (String, String) {
    let p = |rel: &str| dir.join(rel).to_string_lossy().into_owned();
    assert_eq!(cli(&["--seed", "3", "fixture", "emit", "--out", &p("fx"), "--bits", "512"]).code, 0);
    let run = cli(&[
        "--seed", "3", "holder", "present", "--wallet", &p("fx/wallet.json"), "--issuer-pub",
        &p("fx/keys/school_board.pub.json"), "--credential", "c2", "--disclose", "school_member",
        "--nonce", SHOW_NONCE, "--context", "ctx", "--out", &p("pres.json"),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    (p("fx/keys/school_board.pub.json"), p("pres.json"))
}

#[test]
fn verify_rejects_mutated_presentation() {
    let dir = tempfile::tempdir().unwrap();
    let (pk, pres_path) = prepared_presentation(dir.path());
    let verify = |nonce: &str, ctx: &str| cli(&["verifier", "verify", "--issuer-pub", &pk, "--in", &pres_path, "--nonce", nonce, "--context", ctx]);

    let ok = verify(SHOW_NONCE, "ctx");
    assert_eq!(ok.code, 0, "{}", ok.stderr);
    assert!(ok.stdout.contains("[1] school_member=\"true\" (school_board)"));
    assert!(!ok.stdout.contains("library_subscriber"));

    let mut pres: Presentation = serde_json::from_str(&std::fs::read_to_string(&pres_path).unwrap()).unwrap();
    pres.proof.s_e += 1;
    std::fs::write(&pres_path, serde_json::to_string(&pres).unwrap()).unwrap();
    let bad = verify(SHOW_NONCE, "ctx");
    assert_eq!(bad.code, 1);
    assert!(bad.stderr.starts_with("error[ProofInvalid]"), "{}", bad.stderr);

    let wrong_ctx = verify(SHOW_NONCE, "other");
    assert_eq!(wrong_ctx.code, 1);
    assert!(wrong_ctx.stderr.starts_with("error[ContextMismatch]"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cli(&["holder"]).code, 2);
    assert_eq!(cli(&["nonsense"]).code, 2);
    let bad_nonce = cli(&["verifier", "verify", "--issuer-pub", "x", "--in", "y", "--nonce", "abc", "--context", "c"]);
    assert_eq!(bad_nonce.code, 2);
    let missing = cli(&["verifier", "verify", "--issuer-pub", "/nonexistent/pk.json", "--in", "y", "--nonce", SHOW_NONCE, "--context", "c"]);
    assert_eq!(missing.code, 2);
    assert!(missing.stderr.starts_with("error[IoError]"));
    let help = cli(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("fixture"));
    assert!(!help.stdout.contains("--seed"));
}

#[test]
fn keygen_refuses_to_overwrite_wallet() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json").to_string_lossy().into_owned();
    assert_eq!(cli(&["holder", "keygen", "--wallet", &w]).code, 0);
    let again = cli(&["holder", "keygen", "--wallet", &w]);
    assert_eq!(again.code, 2);
    assert!(again.stderr.starts_with("error[SecretExists]"));
}

#[test]
fn gate_eval_denies_without_presentations() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    assert_eq!(cli(&["--seed", "5", "fixture", "emit", "--out", fx.to_str().unwrap(), "--bits", "512"]).code, 0);
    let reg = fx.join("registry.json");
    let run = cli(&[
        "gate", "eval", "--registry", reg.to_str().unwrap(), "--domain", "staff_bus", "--action", "board",
        "--resource-type", "bus", "--resource-name", "route_9", "--at", "2024-09-02T07:30:00Z", "--nonce", SHOW_NONCE,
    ]);
    assert_eq!(run.code, 1);
    assert!(run.stdout.starts_with("decision: Deny\n"));
    assert!(run.stdout.contains("AttributeMissing(staff_member)"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_abcid");
    let out = Command::new(bin).arg("--version").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = Command::new(bin).args(["policy", "lint", "/nonexistent.pol"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[IoError]"));
}
