//! `qtl`: issue, verify and attack quantum tickets from the command line.
//!
//! Exit codes: 0 accept (or success), 1 reject, 2 usage, 3 protocol or I/O.

mod cv_demo;
mod report;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qtickets::attacks::PairCloneStrategy;
use qtickets::cv::{
    cv_issue, CvAccount, CvLayout, CvToken, CvVerifier, HolderSession, QuestionPolicy, SessionOutcome,
};
use qtickets::qticket::{multicopy_issue, QticketError, QticketRecord, QticketVerifier};
use qtickets::quantum::{NoiseModel, QubitChannel};
use qtickets::store::{CvRecord, Store, StoreError, StoreRecord, TokenFile};
use qtickets::sweep::{sweep_double_accept, tolerance_grid, write_csv, SweepConfig};
use qtickets::{RngStream, Tolerance};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "qtl", version, about = "Noise-tolerant quantum ticket simulator")]
struct Cli {
    /// RNG seed; defaults to fresh entropy.
    #[arg(long, env = "QTL_SEED", global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Issue a ticket: record the secret in the store and write the token file(s).
    Issue(IssueArgs),
    /// Redeem a token file against the store.
    Verify(VerifyArgs),
    /// Double-acceptance sweep of a cloning attack, as CSV.
    Sweep(SweepArgs),
    /// Table of analytic bounds and thresholds.
    Bounds(BoundsArgs),
    /// Selective values of the cv pair games.
    Games,
    /// Run the cv challenge-response protocol over TCP.
    CvDemo(cv_demo::CvDemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Qticket,
    Cv,
}

#[derive(Debug, Args)]
struct IssueArgs {
    #[arg(long, default_value = "qtl-store.json")]
    store: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Qticket)]
    kind: Kind,
    /// Qubits per qticket.
    #[arg(long = "N", default_value_t = 100)]
    big_n: usize,
    /// cv blocks.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// cv pairs per block.
    #[arg(long, default_value_t = 2)]
    r: usize,
    #[arg(long, default_value = "9/10")]
    ftol: Tolerance,
    #[arg(long, default_value_t = 1)]
    copies: usize,
    /// Hide cv pair labels behind random per-qubit Clifford frames.
    #[arg(long)]
    frames: bool,
    /// Token file; with several copies an index is inserted before the extension.
    #[arg(long, default_value = "token.json")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value = "qtl-store.json")]
    store: PathBuf,
    #[arg(long)]
    token: PathBuf,
    /// Depolarize every qubit to this average fidelity before verification.
    #[arg(long)]
    fidelity: Option<f64>,
    /// Question policy for cv tickets.
    #[arg(long, default_value = "random")]
    policy: QuestionPolicy,
    /// Leave the token file in place (it is consumed by default).
    #[arg(long)]
    keep: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value = "universal-cloner")]
    strategy: String,
    /// Token lengths; repeatable.
    #[arg(long = "N", default_values_t = [50usize, 200, 1000])]
    big_n: Vec<usize>,
    /// Tolerances; repeatable. Defaults to 0.70..=0.95 in steps of 0.01.
    #[arg(long)]
    ftol: Vec<Tolerance>,
    /// Monte Carlo trials per N; 0 leaves the MC columns empty.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub(crate) struct BoundsArgs {
    #[arg(long = "N", default_value_t = 1000)]
    pub big_n: u64,
    /// Tolerances; repeatable.
    #[arg(long, default_values = ["4/5", "5/6", "9/10"])]
    pub ftol: Vec<Tolerance>,
    /// Expected honest fidelity.
    #[arg(long, default_value_t = 0.95)]
    pub fexp: f64,
    /// Verification attempts.
    #[arg(long, default_value_t = 10)]
    pub v: u64,
    #[arg(long, default_value_t = 10)]
    pub n: u64,
    #[arg(long, default_value_t = 100)]
    pub r: u64,
    /// Issued copies; repeatable.
    #[arg(long, default_values_t = [1u64, 2, 3])]
    pub copies: Vec<u64>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub(crate) enum Failure {
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::DuplicateSerial(_) | StoreError::Invalid(_) => Failure::Usage(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// `Ok(true)` exits 0, `Ok(false)` exits 1.
pub(crate) type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed.unwrap_or_else(entropy_seed);
    let result = match cli.command {
        Command::Issue(a) => issue(a, seed),
        Command::Verify(a) => verify(a, seed),
        Command::Sweep(a) => sweep(a, seed),
        Command::Bounds(a) => report::bounds(&a),
        Command::Games => report::games(),
        Command::CvDemo(a) => cv_demo::run(a, seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            let (Failure::Usage(m) | Failure::Io(m)) = &f;
            eprintln!("qtl: {m}");
            ExitCode::from(f.code())
        }
    }
}

fn entropy_seed() -> u64 {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos() as u64).unwrap_or(0);
    nanos ^ (u64::from(std::process::id())).rotate_left(32)
}

/// `token.json` -> `token.2.json` for copy index 2.
fn copy_path(base: &Path, i: usize) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.{i}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{i}"),
    };
    base.with_file_name(name)
}

fn issue(a: IssueArgs, seed: u64) -> Outcome {
    let mut rng = RngStream::new(seed);
    let mut store = Store::load(&a.store)?;
    if a.copies == 0 {
        return Err(Failure::Usage("--copies must be at least 1".into()));
    }
    let (serial, files) = match a.kind {
        Kind::Qticket => {
            let (secret, tokens) =
                multicopy_issue(a.big_n, a.copies, &mut rng).map_err(|e| Failure::Usage(e.to_string()))?;
            let serial = secret.serial;
            store.add(StoreRecord::Qticket(QticketRecord::new(secret, a.ftol, a.copies as u64)))?;
            let files = tokens.into_iter().map(TokenFile::from_qticket).collect::<Result<Vec<_>, _>>()?;
            (serial, files)
        }
        Kind::Cv => {
            if a.copies != 1 {
                return Err(Failure::Usage("cv tickets are issued one copy at a time".into()));
            }
            let layout = CvLayout::new(a.n, a.r, a.ftol).map_err(|e| Failure::Usage(e.to_string()))?;
            let (secret, token) = cv_issue(layout, a.frames, &mut rng);
            store.add(StoreRecord::Cv(CvRecord::from_secret(&secret)))?;
            (secret.serial, vec![TokenFile::from_cv(&token)])
        }
    };
    let paths: Vec<PathBuf> = if files.len() == 1 {
        vec![a.out.clone()]
    } else {
        (1..=files.len()).map(|i| copy_path(&a.out, i)).collect()
    };
    for (f, p) in files.iter().zip(&paths) {
        f.save(p)?;
    }
    store.save(&a.store)?;
    println!("{serial}");
    for p in &paths {
        eprintln!("token written to {}", p.display());
    }
    Ok(true)
}

fn noise_for(fidelity: Option<f64>, qubits: usize) -> Result<Option<NoiseModel>, Failure> {
    fidelity
        .map(|f| {
            QubitChannel::depolarizing_with_fidelity(f)
                .map(|ch| NoiseModel::uniform(ch, qubits))
                .map_err(|e| Failure::Usage(e.to_string()))
        })
        .transpose()
}

fn print_verdict(serial: impl std::fmt::Display, accepted: bool, reason: &str) {
    println!("{}", json!({ "serial": serial.to_string(), "accepted": accepted, "reason": reason }));
}

fn verify(a: VerifyArgs, seed: u64) -> Outcome {
    let mut rng = RngStream::new(seed);
    let mut store = Store::load(&a.store)?;
    let file = TokenFile::load(&a.token)?;
    let serial = file.serial();
    let accepted = match (file, store.find(serial).cloned()) {
        (_, None) => {
            print_verdict(serial, false, "unknown-serial");
            false
        }
        (f @ TokenFile::Qticket { .. }, Some(StoreRecord::Qticket(record))) => {
            let mut token = f.into_qticket()?;
            if let Some(noise) = noise_for(a.fidelity, token.len())? {
                token = token.degrade(&noise).map_err(|e| Failure::Usage(e.to_string()))?;
            }
            let bank = QticketVerifier::from_records([record]).map_err(|e| Failure::Usage(e.to_string()))?;
            let (accepted, reason) = match bank.redeem(token, &mut rng) {
                Ok(o) if o.accepted => (true, "accepted"),
                Ok(_) => (false, "rejected"),
                Err(QticketError::SerialExhausted(_)) => (false, "serial-exhausted"),
                Err(e) => return Err(Failure::Usage(e.to_string())),
            };
            let updated = bank.record(serial).expect("record was inserted");
            store.update(StoreRecord::Qticket(updated))?;
            print_verdict(serial, accepted, reason);
            accepted
        }
        (f @ TokenFile::Cv { .. }, Some(StoreRecord::Cv(record))) => {
            let token = f.into_cv()?;
            let noise = noise_for(a.fidelity, token.qubits().len())?;
            let account = record.to_account()?;
            let (outcome, account) = redeem_cv_locally(token, noise, account, a.policy, &mut rng);
            store.update(StoreRecord::Cv(CvRecord::from_account(&account)))?;
            let reason = outcome.reason.map(|r| r.as_str()).unwrap_or("protocol-error");
            print_verdict(serial, outcome.accepted, reason);
            outcome.accepted
        }
        _ => return Err(Failure::Usage(format!("token kind does not match the stored record for {serial}"))),
    };
    store.save(&a.store)?;
    if !a.keep {
        fs::remove_file(&a.token)?;
    }
    Ok(accepted)
}

/// One in-process challenge-response exchange with an honest holder.
fn redeem_cv_locally(
    token: CvToken,
    noise: Option<NoiseModel>,
    account: CvAccount,
    policy: QuestionPolicy,
    rng: &mut RngStream,
) -> (SessionOutcome, CvAccount) {
    let serial = account.secret.serial;
    let verifier = CvVerifier::new(policy, None, rng.substream(1));
    verifier.insert(account);
    let mut holder = HolderSession::honest(token, noise, rng.substream(2));
    let mut session = verifier.session();
    let mut msg = holder.hello();
    while !session.is_done() {
        let reply = session.handle(msg);
        match holder.handle(reply) {
            Some(m) => msg = m,
            None => break,
        }
    }
    let outcome = session.outcome().cloned().expect("session ends after a verdict");
    (outcome, verifier.account(serial).expect("account was inserted"))
}

fn sweep(a: SweepArgs, seed: u64) -> Outcome {
    let strategy = PairCloneStrategy::by_name(&a.strategy).map_err(|e| Failure::Usage(e.to_string()))?;
    let tolerances = if a.ftol.is_empty() { tolerance_grid(70, 95, 1, 100) } else { a.ftol };
    if a.big_n.contains(&0) {
        return Err(Failure::Usage("--N must be positive".into()));
    }
    let config = SweepConfig { strategy, lengths: a.big_n, tolerances, trials: a.trials, seed };
    let rows = sweep_double_accept(&config).map_err(|e| Failure::Usage(e.to_string()))?;
    let out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    write_csv(&rows, out).map_err(|e| Failure::Io(e.to_string()))?;
    eprintln!("seed {seed}");
    Ok(true)
}
