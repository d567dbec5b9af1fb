//! Networked cv challenge-response demo over TCP.

use std::fs;
use std::io::{self, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::time::Duration;

use clap::{ArgGroup, Args};
use qtickets::cv::{
    run_holder, run_verifier, AnswerSheet, CvError, CvVerifier, HolderSession, Message, QuestionPolicy, Responder,
    SessionOutcome,
};
use qtickets::store::{CvRecord, Store, StoreRecord, TokenFile};
use qtickets::{RngStream, Serial};
use serde_json::json;

use crate::{noise_for, Failure, Outcome};

const IO_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Args)]
#[group(skip)]
#[command(group(ArgGroup::new("role").required(true).args(["listen", "connect"])))]
pub(crate) struct CvDemoArgs {
    /// Act as verifier on this address (port 0 picks a free port).
    #[arg(long)]
    listen: Option<String>,
    /// Act as holder and connect to this verifier.
    #[arg(long)]
    connect: Option<String>,
    #[arg(long, default_value = "qtl-store.json")]
    store: PathBuf,
    #[arg(long, default_value = "random")]
    policy: QuestionPolicy,
    /// Connections served before the verifier exits.
    #[arg(long, default_value_t = 1)]
    sessions: usize,
    /// Attempt budget per serial.
    #[arg(long)]
    max_attempts: Option<u64>,
    /// Holder token file.
    #[arg(long)]
    token: Option<PathBuf>,
    /// Depolarize the holder's qubits to this average fidelity.
    #[arg(long)]
    fidelity: Option<f64>,
    /// Save the holder's answer for a later replay.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Resend a recorded answer instead of measuring a token.
    #[arg(long, conflicts_with = "token")]
    replay: Option<PathBuf>,
    /// Keep the token file after an honest run.
    #[arg(long)]
    keep: bool,
    /// Transcript destination (JSON lines); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub(crate) fn run(a: CvDemoArgs, seed: u64) -> Outcome {
    let mut log: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout()),
    };
    match (&a.listen, &a.connect) {
        (Some(addr), None) => serve(&a, addr, seed, &mut *log),
        (None, Some(addr)) => connect(&a, addr, seed, &mut *log),
        _ => Err(Failure::Usage("exactly one of --listen or --connect is required".into())),
    }
}

fn protocol(e: CvError) -> Failure {
    Failure::Io(e.to_string())
}

fn finish(outcome: &SessionOutcome) -> Outcome {
    match &outcome.error {
        Some(e) => Err(Failure::Io(e.clone())),
        None => Ok(outcome.accepted),
    }
}

fn serve(a: &CvDemoArgs, addr: &str, seed: u64, log: &mut dyn Write) -> Outcome {
    let mut store = Store::load(&a.store)?;
    let verifier = CvVerifier::new(a.policy, a.max_attempts, RngStream::new(seed));
    for r in &store.serials {
        if let StoreRecord::Cv(c) = r {
            verifier.insert(c.to_account()?);
        }
    }
    let listener = TcpListener::bind(addr)?;
    eprintln!("listening on {}", listener.local_addr()?);
    let mut all_accepted = true;
    for _ in 0..a.sessions {
        let (stream, _) = listener.accept()?;
        stream.set_read_timeout(Some(IO_TIMEOUT))?;
        let reader = BufReader::new(stream.try_clone()?);
        let outcome = run_verifier(&verifier, reader, &stream, Some(&mut *log)).map_err(protocol)?;
        if let Some(serial) = outcome.serial {
            if let Some(acc) = verifier.account(serial) {
                store.update(StoreRecord::Cv(CvRecord::from_account(&acc)))?;
                store.save(&a.store)?;
            }
        }
        all_accepted &= finish(&outcome)?;
    }
    Ok(all_accepted)
}

fn load_replay(path: &PathBuf) -> Result<(Serial, AnswerSheet), Failure> {
    let bad = |m: String| Failure::Usage(format!("replay file {}: {m}", path.display()));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| bad(e.to_string()))?;
    let serial: Serial = serde_json::from_value(v["serial"].clone()).map_err(|e| bad(e.to_string()))?;
    match serde_json::from_value(v["answer"].clone()).map_err(|e| bad(e.to_string()))? {
        Message::Answer { question_id, outcomes } => Ok((serial, AnswerSheet::from_wire(question_id, &outcomes))),
        m => Err(bad(format!("expected an answer message, found {}", m.kind()))),
    }
}

fn connect(a: &CvDemoArgs, addr: &str, seed: u64, log: &mut dyn Write) -> Outcome {
    let rng = RngStream::new(seed);
    let mut session = match (&a.token, &a.replay) {
        (Some(path), None) => {
            let token = TokenFile::load(path)?.into_cv()?;
            let noise = noise_for(a.fidelity, token.qubits().len())?;
            HolderSession::honest(token, noise, rng)
        }
        (None, Some(path)) => {
            let (serial, answer) = load_replay(path)?;
            HolderSession::new(Responder::Replay { serial, answer }, rng)
        }
        _ => return Err(Failure::Usage("the holder needs --token or --replay".into())),
    };
    let stream = TcpStream::connect(addr)?;
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    let reader = BufReader::new(stream.try_clone()?);
    let outcome = run_holder(&mut session, reader, &stream, Some(log)).map_err(protocol)?;
    if let (Some(path), Some(answer)) = (&a.record, session.last_answer()) {
        let saved = json!({ "serial": session.serial(), "answer": Message::from(answer) });
        fs::write(path, saved.to_string() + "\n")?;
    }
    if let (Some(path), false) = (&a.token, a.keep) {
        fs::remove_file(path)?;
    }
    let verdict = finish(&outcome)?;
    eprintln!("{}", if verdict { "ACCEPT" } else { "REJECT" });
    Ok(verdict)
}
