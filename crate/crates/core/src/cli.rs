//! The `abcid` command line. Every exchange between issuer, holder, verifier
//! and gate goes through JSON files.
//!
//! Exit codes: 0 success, Permit or valid; 1 Deny or invalid proof; 2 usage,
//! parse or file errors. Errors go to stderr as `error[Code]: message`.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::abc::{
    begin_issuance, complete_credential, holder_keygen, issue, present, setup_issuer,
    verify_presentation, AbcError, CredentialMetadata, IssuanceRequest, IssuerPublicKey,
    IssuerSecretKey, Nonce, PreCredential, Presentation, SystemParams,
};
use crate::gate::{
    access, context_string, load_registry, paper_fixture, save_registry, GateError, IssuerEntry,
    PolicyEntry, RegistryFile, ATTRIBUTE_MAP, POLICIES, REGISTRY_VERSION,
};
use crate::model::{Attribute, Claim, ModelError};
use crate::policy::{decompose_policy, parse_policy, AccessRequest, ParseError, PolicyError};
use crate::wallet::{wallet_load, wallet_save, Wallet, WalletError};

#[derive(Parser)]
#[command(name = "abcid", version, about = "Attribute-based credentials and access policies")]
struct Cli {
    /// Seed for the randomness source; makes every command deterministic.
    #[arg(long, global = true, hide = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    #[command(subcommand)]
    Issuer(IssuerCmd),
    #[command(subcommand)]
    Holder(HolderCmd),
    #[command(subcommand)]
    Verifier(VerifierCmd),
    #[command(subcommand)]
    Policy(PolicyCmd),
    #[command(subcommand)]
    Gate(GateCmd),
    #[command(subcommand)]
    Fixture(FixtureCmd),
}

#[derive(Subcommand)]
enum IssuerCmd {
    /// Generate an issuer key pair.
    Init {
        #[arg(long)]
        id: String,
        /// Number of attributes per credential.
        #[arg(long)]
        attributes: usize,
        #[arg(long, default_value_t = 2048)]
        bits: usize,
        /// Secret key output.
        #[arg(long)]
        key: PathBuf,
        /// Public key output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer an issuance request with a pre-credential.
    Issue {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        issuer_pub: PathBuf,
        /// Issuance request file.
        #[arg(long = "in")]
        input: PathBuf,
        /// Nonce this issuer handed to the holder.
        #[arg(long)]
        nonce: Nonce,
        /// `name=value`, once per attribute, in key order.
        #[arg(long = "claim", required = true)]
        claims: Vec<String>,
        #[arg(long)]
        schema: String,
        #[arg(long)]
        credential_id: String,
        /// Issuance time; defaults to now.
        #[arg(long, value_parser = parse_at)]
        at: Option<DateTime<Utc>>,
        #[arg(long)]
        expires: Option<NaiveDate>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum HolderCmd {
    /// Create a wallet holding a fresh secret key.
    Keygen {
        #[arg(long)]
        wallet: PathBuf,
    },
    /// Start issuance with an issuer.
    Request {
        #[arg(long)]
        wallet: PathBuf,
        #[arg(long)]
        issuer_pub: PathBuf,
        #[arg(long)]
        nonce: Nonce,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a pre-credential into a credential in the wallet.
    Complete {
        #[arg(long)]
        wallet: PathBuf,
        #[arg(long)]
        issuer_pub: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Nonce of the matching request.
        #[arg(long)]
        nonce: Nonce,
        #[arg(long)]
        label: Option<String>,
    },
    /// List wallet credentials and their claims.
    List {
        #[arg(long)]
        wallet: PathBuf,
    },
    /// Show a credential, disclosing only the named claims.
    Present {
        #[arg(long)]
        wallet: PathBuf,
        #[arg(long)]
        issuer_pub: PathBuf,
        #[arg(long)]
        credential: String,
        /// Claim names or 1-based claim positions.
        #[arg(long, value_delimiter = ',')]
        disclose: Vec<String>,
        #[arg(long)]
        nonce: Nonce,
        #[arg(long)]
        context: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum VerifierCmd {
    /// Check a presentation and print its disclosed claims.
    Verify {
        #[arg(long)]
        issuer_pub: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        nonce: Nonce,
        #[arg(long)]
        context: String,
    },
}

#[derive(Subcommand)]
enum PolicyCmd {
    /// Parse a policy file and print its components.
    Lint { file: PathBuf },
}

#[derive(Args)]
struct RequestArgs {
    #[arg(long)]
    domain: String,
    #[arg(long)]
    action: String,
    #[arg(long)]
    resource_type: String,
    #[arg(long)]
    resource_name: String,
}

#[derive(Subcommand)]
enum GateCmd {
    /// Print the context string presentations must be bound to.
    Context {
        #[command(flatten)]
        request: RequestArgs,
    },
    /// Decide an access request from presentation files.
    Eval {
        #[arg(long)]
        registry: PathBuf,
        #[command(flatten)]
        request: RequestArgs,
        #[arg(long, value_parser = parse_at)]
        at: DateTime<Utc>,
        #[arg(long)]
        nonce: Nonce,
        /// Presentation file; repeat for several.
        #[arg(long = "in")]
        inputs: Vec<PathBuf>,
        /// Also write the full outcome as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FixtureCmd {
    /// Write the demonstration registry, keys, policies and wallet.
    Emit {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2048)]
        bits: usize,
    },
}

fn parse_at(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("expected an RFC 3339 timestamp: {e}"))
}

#[derive(Debug)]
struct Failure {
    code: &'static str,
    message: String,
    exit: i32,
}

impl Failure {
    fn usage(code: &'static str, message: impl Display) -> Self {
        Failure {
            code,
            message: message.to_string(),
            exit: 2,
        }
    }
}

impl From<AbcError> for Failure {
    fn from(e: AbcError) -> Self {
        let exit = match e {
            AbcError::ProofInvalid
            | AbcError::SignatureInvalid
            | AbcError::NonceMismatch
            | AbcError::ContextMismatch
            | AbcError::LengthCheckFailed(_) => 1,
            _ => 2,
        };
        Failure {
            code: e.code(),
            message: e.to_string(),
            exit,
        }
    }
}

impl From<WalletError> for Failure {
    fn from(e: WalletError) -> Self {
        Failure::usage(e.code(), e)
    }
}

impl From<GateError> for Failure {
    fn from(e: GateError) -> Self {
        Failure::usage(e.code(), e)
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::usage("InvalidClaim", e)
    }
}

impl From<PolicyError> for Failure {
    fn from(e: PolicyError) -> Self {
        Failure::usage("InvalidRequest", e)
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::usage("ParseError", e)
    }
}

type CmdResult = Result<i32, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::usage("IoError", format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| Failure::usage("FormatError", format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8], private: bool) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    let mut options = fs::OpenOptions::new();
    options.write(true).create(true).truncate(true);
    #[cfg(unix)]
    if private {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    #[cfg(not(unix))]
    let _ = private;
    options
        .open(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| io_failure(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T, private: bool) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Failure::usage("FormatError", e))?;
    write_file(path, (json + "\n").as_bytes(), private)
}

fn load_public_key(path: &Path) -> Result<IssuerPublicKey, Failure> {
    let pk: IssuerPublicKey = read_json(path)?;
    pk.check()?;
    Ok(pk)
}

fn load_wallet(path: &Path) -> Result<Wallet, Failure> {
    Ok(wallet_load(path)?)
}

fn save_wallet(wallet: &Wallet, path: &Path) -> Result<(), Failure> {
    Ok(wallet_save(wallet, path)?)
}

/// Runs one command. `argv[0]` is the program name.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    let mut rng = match cli.seed {
        Some(seed) => ChaCha20Rng::seed_from_u64(seed),
        None => ChaCha20Rng::from_entropy(),
    };
    let result = match cli.command {
        Command::Issuer(cmd) => issuer(cmd, &mut rng, out),
        Command::Holder(cmd) => holder(cmd, &mut rng, out),
        Command::Verifier(cmd) => verifier(cmd, out),
        Command::Policy(cmd) => policy(cmd, out),
        Command::Gate(cmd) => gate(cmd, out),
        Command::Fixture(cmd) => fixture(cmd, &mut rng, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error[{}]: {}", f.code, f.message);
            f.exit
        }
    }
}

fn parse_claim(spec: &str, issuer: &str, schema: &str) -> Result<Claim, Failure> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| Failure::usage("InvalidClaim", format!("expected name=value, got {spec:?}")))?;
    Ok(Claim::new(Attribute::new(name, value)?, issuer, schema)?)
}

fn issuer(cmd: IssuerCmd, rng: &mut ChaCha20Rng, out: &mut dyn Write) -> CmdResult {
    match cmd {
        IssuerCmd::Init {
            id,
            attributes,
            bits,
            key,
            out: pub_path,
        } => {
            if !crate::model::is_token(&id) {
                return Err(Failure::usage("InvalidToken", format!("issuer id {id:?}")));
            }
            let (pk, sk) = setup_issuer(&id, attributes, bits, rng)?;
            write_json(&key, &sk, true)?;
            write_json(&pub_path, &pk, false)?;
            let _ = writeln!(out, "issuer {id}: key {}", pk.digest_hex());
            Ok(0)
        }
        IssuerCmd::Issue {
            key,
            issuer_pub,
            input,
            nonce,
            claims,
            schema,
            credential_id,
            at,
            expires,
            out: pre_path,
        } => {
            let pk = load_public_key(&issuer_pub)?;
            let sk: IssuerSecretKey = read_json(&key)?;
            sk.matches(&pk)?;
            let req: IssuanceRequest = read_json(&input)?;
            let claims = claims
                .iter()
                .map(|c| parse_claim(c, &pk.issuer_id, &schema))
                .collect::<Result<Vec<_>, _>>()?;
            let metadata = CredentialMetadata {
                issuer_id: pk.issuer_id.clone(),
                schema_id: schema,
                issued_at: at.unwrap_or_else(Utc::now).date_naive(),
                expires_at: expires,
                credential_id,
            };
            let pre = issue(&sk, &pk, &req, &nonce, claims, metadata, rng)?;
            write_json(&pre_path, &pre, false)?;
            let _ = writeln!(out, "issued {}", pre.metadata.credential_id);
            Ok(0)
        }
    }
}

fn resolve_disclosure(names: &[String], claims: &[Claim]) -> Result<BTreeSet<usize>, Failure> {
    let mut set = BTreeSet::new();
    for item in names.iter().filter(|s| !s.is_empty()) {
        let index = match item.parse::<usize>() {
            Ok(i) => i,
            Err(_) => claims
                .iter()
                .position(|c| c.name() == item)
                .map(|p| p + 1)
                .ok_or_else(|| AbcError::Index(format!("credential has no claim {item:?}")))?,
        };
        set.insert(index);
    }
    Ok(set)
}

fn holder(cmd: HolderCmd, rng: &mut ChaCha20Rng, out: &mut dyn Write) -> CmdResult {
    match cmd {
        HolderCmd::Keygen { wallet } => {
            if wallet.exists() {
                return Err(WalletError::SecretExists.into());
            }
            let mut w = Wallet::new();
            w.set_secret(holder_keygen(&SystemParams::default(), rng))?;
            save_wallet(&w, &wallet)?;
            let _ = writeln!(out, "wallet created at {}", wallet.display());
            Ok(0)
        }
        HolderCmd::Request {
            wallet,
            issuer_pub,
            nonce,
            out: req_path,
        } => {
            let pk = load_public_key(&issuer_pub)?;
            let mut w = load_wallet(&wallet)?;
            let (req, state) = begin_issuance(&pk, w.secret()?, nonce, rng);
            w.pending.retain(|p| p.nonce != nonce);
            w.pending.push(state);
            write_json(&req_path, &req, false)?;
            save_wallet(&w, &wallet)?;
            let _ = writeln!(out, "request for {} written", pk.issuer_id);
            Ok(0)
        }
        HolderCmd::Complete {
            wallet,
            issuer_pub,
            input,
            nonce,
            label,
        } => {
            let pk = load_public_key(&issuer_pub)?;
            let pre: PreCredential = read_json(&input)?;
            let mut w = load_wallet(&wallet)?;
            let state = w.take_pending(&nonce)?;
            let cred = complete_credential(&pk, pre, &state, w.secret()?)?;
            let id = cred.id().to_owned();
            w.add_credential(cred, label)?;
            save_wallet(&w, &wallet)?;
            let _ = writeln!(out, "stored {id}");
            Ok(0)
        }
        HolderCmd::List { wallet } => {
            let w = load_wallet(&wallet)?;
            for c in &w.credentials {
                let claims: Vec<String> = c.claims.iter().map(|cl| cl.to_string()).collect();
                let _ = write!(
                    out,
                    "{}\tissuer={}\tschema={}\tissued={}",
                    c.id(),
                    c.metadata.issuer_id,
                    c.metadata.schema_id,
                    c.metadata.issued_at
                );
                if let Some(label) = w.labels.get(c.id()) {
                    let _ = write!(out, "\tlabel={label:?}");
                }
                let _ = writeln!(out, "\n\t{}", claims.join(", "));
            }
            Ok(0)
        }
        HolderCmd::Present {
            wallet,
            issuer_pub,
            credential,
            disclose,
            nonce,
            context,
            out: pres_path,
        } => {
            let pk = load_public_key(&issuer_pub)?;
            let w = load_wallet(&wallet)?;
            let cred = w
                .credential(&credential)
                .ok_or_else(|| AbcError::Index(format!("no credential {credential:?} in wallet")))?;
            let indices = resolve_disclosure(&disclose, &cred.claims)?;
            let pres = present(&pk, cred, w.secret()?, &indices, nonce, &context, rng)?;
            write_json(&pres_path, &pres, false)?;
            let _ = writeln!(out, "presentation of {credential} disclosing {} claim(s)", indices.len());
            Ok(0)
        }
    }
}

fn verifier(cmd: VerifierCmd, out: &mut dyn Write) -> CmdResult {
    let VerifierCmd::Verify {
        issuer_pub,
        input,
        nonce,
        context,
    } = cmd;
    let pk = load_public_key(&issuer_pub)?;
    let pres: Presentation = read_json(&input)?;
    let verified = verify_presentation(&pk, &pres, &nonce, &context)?;
    let _ = writeln!(out, "valid: issuer={} schema={}", verified.issuer_id, verified.schema_id);
    for (index, claim) in &verified.claims {
        let _ = writeln!(out, "  [{index}] {claim}");
    }
    Ok(0)
}

fn policy(cmd: PolicyCmd, out: &mut dyn Write) -> CmdResult {
    let PolicyCmd::Lint { file } = cmd;
    let p = parse_policy(&read_text(&file)?)?;
    let _ = writeln!(out, "{}", decompose_policy(&p));
    Ok(0)
}

fn access_request(args: &RequestArgs, at: DateTime<Utc>) -> Result<AccessRequest, Failure> {
    Ok(AccessRequest::new(
        &args.action,
        &args.resource_type,
        &args.resource_name,
        &args.domain,
        at,
    )?)
}

fn gate(cmd: GateCmd, out: &mut dyn Write) -> CmdResult {
    match cmd {
        GateCmd::Context { request } => {
            // The context string does not depend on the time.
            let req = access_request(&request, DateTime::<Utc>::UNIX_EPOCH)?;
            let _ = writeln!(out, "{}", context_string(&req));
            Ok(0)
        }
        GateCmd::Eval {
            registry,
            request,
            at,
            nonce,
            inputs,
            out: outcome_path,
        } => {
            let (reg, keys, policies) = load_registry(&registry)?;
            let req = access_request(&request, at)?;
            let presentations = inputs
                .iter()
                .map(|p| read_json::<Presentation>(p))
                .collect::<Result<Vec<_>, _>>()?;
            let outcome = access(&reg, &keys, &policies, &request.domain, &req, &presentations, &nonce)?;
            if let Some(path) = outcome_path {
                write_json(&path, &outcome, false)?;
            }
            let d = &outcome.decision;
            let _ = writeln!(out, "decision: {:?}", d.outcome);
            if let Some(id) = &outcome.matched_policy_id {
                let _ = writeln!(out, "matched_policy: {id}");
            }
            let reasons: Vec<String> = d.reasons.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "reasons: {}", reasons.join(", "));
            for c in &outcome.verified {
                let _ = writeln!(out, "verified: {c}");
            }
            for f in &outcome.presentation_errors {
                let _ = writeln!(out, "presentation {} ({}): {}", f.index, f.issuer_id, f.code);
            }
            Ok(if d.is_permit() { 0 } else { 1 })
        }
    }
}

fn fixture(cmd: FixtureCmd, rng: &mut ChaCha20Rng, out: &mut dyn Write) -> CmdResult {
    let FixtureCmd::Emit { out: dir, bits } = cmd;
    let fx = paper_fixture(bits, rng)?;

    let mut issuers = Vec::new();
    for (id, pk) in &fx.keys {
        let pub_file = PathBuf::from(format!("keys/{id}.pub.json"));
        write_json(&dir.join(&pub_file), pk, false)?;
        write_json(&dir.join(format!("keys/{id}.key.json")), &fx.issuer_secrets[id], true)?;
        issuers.push(IssuerEntry {
            issuer_id: id.clone(),
            key_digest: pk.digest_hex(),
            key_file: pub_file,
        });
    }

    let mut policies = Vec::new();
    for (id, _, text) in POLICIES {
        let file = PathBuf::from(format!("policies/{id}.pol"));
        write_file(&dir.join(&file), format!("{text}\n").as_bytes(), false)?;
        policies.push(PolicyEntry {
            policy_id: id.to_owned(),
            file,
        });
    }

    let file = RegistryFile {
        version: REGISTRY_VERSION,
        domains: fx.registry.domains().cloned().collect(),
        issuers,
        policies,
    };
    save_registry(&dir.join("registry.json"), &file)?;

    let mut wallet = Wallet::new();
    wallet.set_secret(fx.holder.clone())?;
    for cred in &fx.credentials {
        let names: Vec<&str> = cred.claims.iter().map(|c| c.name()).collect();
        wallet.add_credential(cred.clone(), Some(names.join(", ")))?;
    }
    save_wallet(&wallet, &dir.join("wallet.json"))?;

    let attributes: std::collections::BTreeMap<&str, &str> = ATTRIBUTE_MAP.into_iter().collect();
    write_json(&dir.join("attributes.json"), &attributes, false)?;

    let _ = writeln!(
        out,
        "fixture written to {}: {} domains, {} credentials",
        dir.display(),
        fx.registry.len(),
        fx.credentials.len()
    );
    Ok(0)
}
