#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use abcid::abc::Nonce;
use abcid::gate::{paper_fixture, Fixture};
use chrono::{DateTime, TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| paper_fixture(512, &mut ChaCha20Rng::seed_from_u64(2024)).unwrap())
}

pub fn utc(y: i32, mo: u32, d: u32, h: u32, mi: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, mo, d, h, mi, 0).unwrap()
}

pub fn nonce(byte: u8) -> Nonce {
    Nonce([byte; 16])
}

pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli<S: AsRef<str>>(args: &[S]) -> CliRun {
    let argv: Vec<String> = std::iter::once("abcid".to_owned())
        .chain(args.iter().map(|a| a.as_ref().to_owned()))
        .collect();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = abcid::cli::run(argv, &mut out, &mut err);
    CliRun {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

const ISSUE_NONCE_1: &str = "00112233445566778899aabbccddeeff";
const ISSUE_NONCE_2: &str = "102132435465768798a9bacbdcedfe0f";
const ISSUE_NONCE_3: &str = "f0e1d2c3b4a5968778695a4b3c2d1e0f";
pub const SHOW_NONCE: &str = "0123456789abcdef0123456789abcdef";

/// Runs the scripted exchange in `dir`: fixture emit, a fresh issuer's
/// init/issue/present/verify, then a fresh holder obtaining medical and
/// school credentials from the fixture issuer and entering `medical_files`.
/// Panics on any unexpected exit code; returns every command's output.
pub fn end_to_end_script(dir: &Path, seed: u64) -> Vec<CliRun> {
    let p = |rel: &str| dir.join(rel).to_string_lossy().into_owned();
    let seed = seed.to_string();
    let mut runs = Vec::new();
    let mut step = |expect: i32, args: Vec<String>| {
        let mut full = vec!["--seed".to_owned(), seed.clone()];
        full.extend(args);
        let run = cli(&full);
        assert_eq!(run.code, expect, "{full:?}\nstdout: {}\nstderr: {}", run.stdout, run.stderr);
        let stdout = run.stdout.clone();
        runs.push(run);
        stdout
    };
    let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();

    step(0, s(&["fixture", "emit", "--out", &p("fx"), "--bits", "512"]));
    step(
        0,
        s(&["issuer", "init", "--id", "clinic", "--attributes", "2", "--bits", "512", "--key", &p("clinic.key.json"), "--out", &p("clinic.pub.json")]),
    );
    step(0, s(&["holder", "keygen", "--wallet", &p("wallet.json")]));

    let ta_pub = p("fx/keys/trust_authority.pub.json");
    let ta_key = p("fx/keys/trust_authority.key.json");
    let issuances = [
        (ISSUE_NONCE_1, p("clinic.pub.json"), p("clinic.key.json"), "staff", vec!["role=nurse", "ward=east"], "clinic_card"),
        (ISSUE_NONCE_2, ta_pub.clone(), ta_key.clone(), "med", vec!["medical_practitioner=true"], "single_attribute"),
        (ISSUE_NONCE_3, ta_pub.clone(), ta_key.clone(), "member", vec!["school_member=true"], "single_attribute"),
    ];
    for (n, pubf, keyf, id, claims, schema) in &issuances {
        let req = p(&format!("{id}.req.json"));
        let pre = p(&format!("{id}.pre.json"));
        step(0, s(&["holder", "request", "--wallet", &p("wallet.json"), "--issuer-pub", pubf, "--nonce", n, "--out", &req]));
        let mut issue = s(&["issuer", "issue", "--key", keyf, "--issuer-pub", pubf, "--in", &req, "--nonce", n, "--schema", schema, "--credential-id", id, "--at", "2024-09-01T12:00:00Z", "--out", &pre]);
        for c in claims {
            issue.push("--claim".into());
            issue.push(c.to_string());
        }
        step(0, issue);
        step(0, s(&["holder", "complete", "--wallet", &p("wallet.json"), "--issuer-pub", pubf, "--in", &pre, "--nonce", n, "--label", id]));
    }
    step(0, s(&["holder", "list", "--wallet", &p("wallet.json")]));

    step(0, s(&["holder", "present", "--wallet", &p("wallet.json"), "--issuer-pub", &p("clinic.pub.json"), "--credential", "staff", "--disclose", "role", "--nonce", SHOW_NONCE, "--context", "shift_desk", "--out", &p("staff.pres.json")]));
    step(0, s(&["verifier", "verify", "--issuer-pub", &p("clinic.pub.json"), "--in", &p("staff.pres.json"), "--nonce", SHOW_NONCE, "--context", "shift_desk"]));

    let request = s(&["--domain", "medical_files", "--action", "write", "--resource-type", "patient_file", "--resource-name", "file_42"]);
    let mut ctx = s(&["gate", "context"]);
    ctx.extend(request.clone());
    let context = step(0, ctx).trim().to_owned();
    for id in ["med", "member"] {
        let name = if id == "med" { "medical_practitioner" } else { "school_member" };
        step(0, s(&["holder", "present", "--wallet", &p("wallet.json"), "--issuer-pub", &ta_pub, "--credential", id, "--disclose", name, "--nonce", SHOW_NONCE, "--context", &context, "--out", &p(&format!("{id}.pres.json"))]));
        step(0, s(&["verifier", "verify", "--issuer-pub", &ta_pub, "--in", &p(&format!("{id}.pres.json")), "--nonce", SHOW_NONCE, "--context", &context]));
    }
    let mut eval = s(&["gate", "eval", "--registry", &p("fx/registry.json"), "--at", "2024-09-02T10:00:00Z", "--nonce", SHOW_NONCE, "--in", &p("med.pres.json"), "--in", &p("member.pres.json"), "--out", &p("outcome.json")]);
    eval.extend(request);
    step(0, eval);
    runs
}

/// Every regular file under `dir`, keyed by relative path.
pub fn tree_contents(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
