//! Verifier and holder state machines and their line-oriented transport.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::wire::Message;
use super::{honest_answer, score_answer, AnswerSheet, ChallengeQuestion, CvError, CvSecret, CvToken, ScoreCard};
use crate::quantum::NoiseModel;
use crate::rng::RngStream;
use crate::serial::Serial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    Accepted,
    Rejected,
    UnknownSerial,
    AlreadyRedeemed,
    AttemptsExhausted,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Accepted => "accepted",
            Reason::Rejected => "rejected",
            Reason::UnknownSerial => "unknown-serial",
            Reason::AlreadyRedeemed => "already-redeemed",
            Reason::AttemptsExhausted => "attempts-exhausted",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a verifier picks the question for each attempt on a serial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionPolicy {
    /// Fresh uniform question per attempt.
    Random,
    /// One question per serial, drawn once and repeated.
    Fixed,
    /// Each attempt asks the block-wise complement of the previous one.
    Complementary,
}

impl FromStr for QuestionPolicy {
    type Err = CvError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Self::Random),
            "fixed" => Ok(Self::Fixed),
            "complementary" => Ok(Self::Complementary),
            other => Err(CvError::Protocol(format!("unknown policy {other:?}"))),
        }
    }
}

/// Verifier-side accounting for one serial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvAccount {
    pub secret: CvSecret,
    pub attempts: u64,
    pub accepted_count: u64,
    pub fixed_question: Option<ChallengeQuestion>,
    pub last_question: Option<ChallengeQuestion>,
}

impl CvAccount {
    pub fn new(secret: CvSecret) -> Self {
        Self { secret, attempts: 0, accepted_count: 0, fixed_question: None, last_question: None }
    }
}

/// Serves many sessions; each serial's account is updated under its own lock.
#[derive(Debug)]
pub struct CvVerifier {
    policy: QuestionPolicy,
    max_attempts: Option<u64>,
    accounts: RwLock<HashMap<Serial, Mutex<CvAccount>>>,
    next_question: AtomicU64,
    rng: Mutex<RngStream>,
}

impl CvVerifier {
    pub fn new(policy: QuestionPolicy, max_attempts: Option<u64>, rng: RngStream) -> Self {
        Self {
            policy,
            max_attempts,
            accounts: RwLock::new(HashMap::new()),
            next_question: AtomicU64::new(1),
            rng: Mutex::new(rng),
        }
    }

    pub fn policy(&self) -> QuestionPolicy {
        self.policy
    }

    pub fn insert(&self, account: CvAccount) -> bool {
        let mut map = self.accounts.write().unwrap();
        if map.contains_key(&account.secret.serial) {
            return false;
        }
        let id = account.fixed_question.iter().chain(&account.last_question).map(|q| q.question_id).max().unwrap_or(0);
        self.next_question.fetch_max(id + 1, Ordering::Relaxed);
        map.insert(account.secret.serial, Mutex::new(account));
        true
    }

    pub fn account(&self, serial: Serial) -> Option<CvAccount> {
        self.accounts.read().unwrap().get(&serial).map(|m| m.lock().unwrap().clone())
    }

    /// Snapshot sorted by serial.
    pub fn accounts(&self) -> Vec<CvAccount> {
        let mut out: Vec<_> = self.accounts.read().unwrap().values().map(|m| m.lock().unwrap().clone()).collect();
        out.sort_by_key(|a| a.secret.serial);
        out
    }

    pub fn session(&self) -> VerifierSession<'_> {
        VerifierSession { verifier: self, state: VState::AwaitHello }
    }

    fn fresh_question(&self, n: usize) -> ChallengeQuestion {
        let id = self.next_question.fetch_add(1, Ordering::Relaxed);
        ChallengeQuestion::random(id, n, &mut self.rng.lock().unwrap())
    }

    /// Opens an attempt, or returns the reason it is refused.
    fn open(&self, serial: Serial) -> Result<ChallengeQuestion, Reason> {
        let map = self.accounts.read().unwrap();
        let mut acc = map.get(&serial).ok_or(Reason::UnknownSerial)?.lock().unwrap();
        if acc.accepted_count > 0 {
            return Err(Reason::AlreadyRedeemed);
        }
        if self.max_attempts.is_some_and(|m| acc.attempts >= m) {
            return Err(Reason::AttemptsExhausted);
        }
        acc.attempts += 1;
        let n = acc.secret.layout.n;
        let q = match self.policy {
            QuestionPolicy::Random => self.fresh_question(n),
            QuestionPolicy::Fixed => acc.fixed_question.get_or_insert_with(|| self.fresh_question(n)).clone(),
            QuestionPolicy::Complementary => match &acc.last_question {
                Some(prev) => prev.complement(self.next_question.fetch_add(1, Ordering::Relaxed)),
                None => self.fresh_question(n),
            },
        };
        acc.last_question = Some(q.clone());
        Ok(q)
    }

    /// Scores `answer` and records an acceptance unless one already exists.
    fn close(
        &self,
        serial: Serial,
        question: &ChallengeQuestion,
        answer: &AnswerSheet,
    ) -> Result<(ScoreCard, Reason), CvError> {
        let map = self.accounts.read().unwrap();
        let mut acc = map.get(&serial).ok_or_else(|| CvError::Protocol("account vanished".into()))?.lock().unwrap();
        let card = score_answer(&acc.secret, question, answer)?;
        let reason = if !card.accepted {
            Reason::Rejected
        } else if acc.accepted_count > 0 {
            Reason::AlreadyRedeemed
        } else {
            acc.accepted_count += 1;
            Reason::Accepted
        };
        Ok((card, reason))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub serial: Option<Serial>,
    pub accepted: bool,
    pub reason: Option<Reason>,
    /// Verifier-side only; never sent to the holder.
    pub score: Option<ScoreCard>,
    pub error: Option<String>,
}

impl SessionOutcome {
    fn verdict(serial: Serial, reason: Reason, score: Option<ScoreCard>) -> Self {
        Self { serial: Some(serial), accepted: reason == Reason::Accepted, reason: Some(reason), score, error: None }
    }

    fn failed(serial: Option<Serial>, error: String) -> Self {
        Self { serial, accepted: false, reason: None, score: None, error: Some(error) }
    }
}

#[derive(Debug)]
enum VState {
    AwaitHello,
    AwaitAnswer { serial: Serial, question: ChallengeQuestion },
    Done(SessionOutcome),
}

/// `AwaitHello -> AwaitAnswer -> Done`. Any unexpected message yields an
/// error reply and ends the session.
#[derive(Debug)]
pub struct VerifierSession<'a> {
    verifier: &'a CvVerifier,
    state: VState,
}

impl VerifierSession<'_> {
    pub fn outcome(&self) -> Option<&SessionOutcome> {
        match &self.state {
            VState::Done(o) => Some(o),
            _ => None,
        }
    }

    pub fn is_done(&self) -> bool {
        matches!(self.state, VState::Done(_))
    }

    fn abort(&mut self, serial: Option<Serial>, error: String) -> Message {
        self.state = VState::Done(SessionOutcome::failed(serial, error.clone()));
        Message::Error { message: error }
    }

    /// Reply to one incoming message.
    pub fn handle(&mut self, msg: Message) -> Message {
        match (std::mem::replace(&mut self.state, VState::AwaitHello), msg) {
            (VState::AwaitHello, Message::Hello { serial }) => match self.verifier.open(serial) {
                Ok(question) => {
                    let reply = Message::from(&question);
                    self.state = VState::AwaitAnswer { serial, question };
                    reply
                }
                Err(reason) => {
                    self.state = VState::Done(SessionOutcome::verdict(serial, reason, None));
                    Message::Verdict { accepted: false, reason }
                }
            },
            (VState::AwaitAnswer { serial, question }, Message::Answer { question_id, outcomes }) => {
                let sheet = AnswerSheet::from_wire(question_id, &outcomes);
                match self.verifier.close(serial, &question, &sheet) {
                    Ok((card, reason)) => {
                        self.state = VState::Done(SessionOutcome::verdict(serial, reason, Some(card)));
                        Message::Verdict { accepted: reason == Reason::Accepted, reason }
                    }
                    Err(e) => self.abort(Some(serial), e.to_string()),
                }
            }
            (VState::Done(o), m) => {
                self.state = VState::Done(o);
                Message::Error { message: format!("session finished; unexpected {}", m.kind()) }
            }
            (state, m) => {
                let serial = match state {
                    VState::AwaitAnswer { serial, .. } => Some(serial),
                    _ => None,
                };
                self.abort(serial, format!("unexpected {} message", m.kind()))
            }
        }
    }
}

/// How the holder produces answers.
#[derive(Debug, Clone)]
pub enum Responder {
    /// Measure the token along the asked axes.
    Honest { token: CvToken, noise: Option<NoiseModel> },
    /// Resend previously recorded outcomes under the new question id.
    Replay { serial: Serial, answer: AnswerSheet },
}

#[derive(Debug)]
pub struct HolderSession {
    responder: Responder,
    rng: RngStream,
    outcome: Option<SessionOutcome>,
    last_answer: Option<AnswerSheet>,
}

impl HolderSession {
    pub fn new(responder: Responder, rng: RngStream) -> Self {
        Self { responder, rng, outcome: None, last_answer: None }
    }

    pub fn honest(token: CvToken, noise: Option<NoiseModel>, rng: RngStream) -> Self {
        Self::new(Responder::Honest { token, noise }, rng)
    }

    pub fn serial(&self) -> Serial {
        match &self.responder {
            Responder::Honest { token, .. } => token.serial(),
            Responder::Replay { serial, .. } => *serial,
        }
    }

    pub fn hello(&self) -> Message {
        Message::Hello { serial: self.serial() }
    }

    pub fn outcome(&self) -> Option<&SessionOutcome> {
        self.outcome.as_ref()
    }

    /// The sheet most recently sent, for later replay.
    pub fn last_answer(&self) -> Option<&AnswerSheet> {
        self.last_answer.as_ref()
    }

    /// Reply to one incoming message; `None` once the session has ended.
    pub fn handle(&mut self, msg: Message) -> Option<Message> {
        let serial = Some(self.serial());
        match msg {
            Message::Challenge { question_id, axes } => {
                let answer = match (ChallengeQuestion::new(question_id, axes), &self.responder) {
                    (Ok(q), Responder::Honest { token, noise }) => honest_answer(token, &q, noise.as_ref(), &mut self.rng),
                    (Ok(q), Responder::Replay { answer, .. }) => Ok(AnswerSheet::new(q.question_id, answer.outcomes.clone())),
                    (Err(e), _) => Err(e),
                };
                match answer {
                    Ok(sheet) => {
                        let reply = Message::from(&sheet);
                        self.last_answer = Some(sheet);
                        Some(reply)
                    }
                    Err(e) => {
                        self.outcome = Some(SessionOutcome::failed(serial, e.to_string()));
                        Some(Message::Error { message: e.to_string() })
                    }
                }
            }
            Message::Verdict { reason, .. } => {
                self.outcome = Some(SessionOutcome::verdict(self.serial(), reason, None));
                None
            }
            Message::Error { message } => {
                self.outcome = Some(SessionOutcome::failed(serial, message));
                None
            }
            other => {
                let e = format!("unexpected {} message", other.kind());
                self.outcome = Some(SessionOutcome::failed(serial, e.clone()));
                Some(Message::Error { message: e })
            }
        }
    }
}

fn log_line(log: &mut Option<&mut dyn Write>, from: &str, line: &str) -> Result<(), CvError> {
    if let Some(w) = log {
        // valid JSON is embedded verbatim so the transcript keeps wire bytes
        if serde_json::from_str::<serde_json::Value>(line).is_ok() {
            writeln!(w, r#"{{"from":"{from}","message":{line}}}"#)?;
        } else {
            writeln!(w, "{}", serde_json::json!({ "from": from, "message": line }))?;
        }
    }
    Ok(())
}

fn send(w: &mut impl Write, msg: &Message, log: &mut Option<&mut dyn Write>, from: &str) -> Result<(), CvError> {
    let line = msg.to_line();
    log_line(log, from, &line)?;
    writeln!(w, "{line}")?;
    w.flush()?;
    Ok(())
}

fn recv(r: &mut impl BufRead, log: &mut Option<&mut dyn Write>, from: &str) -> Result<Option<String>, CvError> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    log_line(log, from, line.trim_end())?;
    Ok(Some(line))
}

/// Runs one verifier session over a byte stream. Malformed input gets an
/// error reply and ends the session with `error` set.
pub fn run_verifier(
    verifier: &CvVerifier,
    mut reader: impl BufRead,
    mut writer: impl Write,
    mut log: Option<&mut dyn Write>,
) -> Result<SessionOutcome, CvError> {
    let mut session = verifier.session();
    while !session.is_done() {
        let Some(line) = recv(&mut reader, &mut log, "holder")? else {
            return Err(CvError::Protocol("holder closed the stream mid-session".into()));
        };
        let reply = match Message::parse(&line) {
            Ok(msg) => session.handle(msg),
            Err(e) => {
                let m = session.abort(None, e.to_string());
                send(&mut writer, &m, &mut log, "verifier")?;
                break;
            }
        };
        send(&mut writer, &reply, &mut log, "verifier")?;
    }
    Ok(session.outcome().cloned().expect("loop exits only when done"))
}

/// Runs the holder side: sends hello, answers, and waits for the verdict.
pub fn run_holder(
    session: &mut HolderSession,
    mut reader: impl BufRead,
    mut writer: impl Write,
    mut log: Option<&mut dyn Write>,
) -> Result<SessionOutcome, CvError> {
    send(&mut writer, &session.hello(), &mut log, "holder")?;
    while session.outcome().is_none() {
        let Some(line) = recv(&mut reader, &mut log, "verifier")? else {
            return Err(CvError::Protocol("verifier closed the stream mid-session".into()));
        };
        let msg = match Message::parse(&line) {
            Ok(m) => m,
            Err(e) => {
                let m = Message::Error { message: e.to_string() };
                send(&mut writer, &m, &mut log, "holder")?;
                return Ok(SessionOutcome::failed(Some(session.serial()), e.to_string()));
            }
        };
        if let Some(reply) = session.handle(msg) {
            send(&mut writer, &reply, &mut log, "holder")?;
        }
    }
    Ok(session.outcome().cloned().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cv::{cv_issue, CvLayout};
    use crate::tolerance::Tolerance;

    fn setup(policy: QuestionPolicy, max: Option<u64>) -> (CvVerifier, CvToken) {
        let layout = CvLayout::new(5, 4, Tolerance::new(3, 4).unwrap()).unwrap();
        let mut rng = RngStream::new(1);
        let (secret, token) = cv_issue(layout, false, &mut rng);
        let v = CvVerifier::new(policy, max, RngStream::new(2));
        assert!(v.insert(CvAccount::new(secret)));
        (v, token)
    }

    fn exchange(v: &CvVerifier, holder: &mut HolderSession) -> SessionOutcome {
        let mut s = v.session();
        let mut msg = holder.hello();
        loop {
            let reply = s.handle(msg);
            match holder.handle(reply) {
                Some(m) => msg = m,
                None => break,
            }
            if s.is_done() {
                break;
            }
        }
        s.outcome().cloned().unwrap()
    }

    #[test]
    fn honest_holder_accepted_under_every_policy() {
        for policy in [QuestionPolicy::Random, QuestionPolicy::Fixed, QuestionPolicy::Complementary] {
            let (v, token) = setup(policy, None);
            let mut h = HolderSession::honest(token, None, RngStream::new(3));
            let out = exchange(&v, &mut h);
            assert!(out.accepted, "{policy:?}");
            assert_eq!(h.outcome().unwrap().reason, Some(Reason::Accepted));
        }
    }

    #[test]
    fn second_redemption_is_refused() {
        let (v, token) = setup(QuestionPolicy::Fixed, None);
        assert!(exchange(&v, &mut HolderSession::honest(token.clone(), None, RngStream::new(3))).accepted);
        for _ in 0..3 {
            let out = exchange(&v, &mut HolderSession::honest(token.clone(), None, RngStream::new(4)));
            assert_eq!(out.reason, Some(Reason::AlreadyRedeemed));
        }
    }

    #[test]
    fn attempt_budget_and_unknown_serial() {
        let (v, token) = setup(QuestionPolicy::Random, Some(2));
        let junk = AnswerSheet::new(0, vec![vec![[1, 1]; 4]; 5]);
        for _ in 0..2 {
            let mut h = HolderSession::new(Responder::Replay { serial: token.serial(), answer: junk.clone() }, RngStream::new(5));
            // all-ones answers fail at 3/4 unless every scored label is negative
            let out = exchange(&v, &mut h);
            assert!(out.reason == Some(Reason::Rejected) || out.reason == Some(Reason::Accepted));
        }
        let out = exchange(&v, &mut HolderSession::honest(token, None, RngStream::new(6)));
        assert!(matches!(out.reason, Some(Reason::AttemptsExhausted | Reason::AlreadyRedeemed)));
        let mut stranger = HolderSession::new(Responder::Replay { serial: Serial(5), answer: junk }, RngStream::new(7));
        assert_eq!(exchange(&v, &mut stranger).reason, Some(Reason::UnknownSerial));
    }

    #[test]
    fn complementary_policy_alternates() {
        let (v, token) = setup(QuestionPolicy::Complementary, None);
        let serial = token.serial();
        let junk = AnswerSheet::new(0, vec![vec![[0, 0]; 4]; 5]);
        let mut seen = Vec::new();
        for _ in 0..3 {
            let mut h = HolderSession::new(Responder::Replay { serial, answer: junk.clone() }, RngStream::new(1));
            let out = exchange(&v, &mut h);
            if out.accepted {
                return;
            }
            seen.push(v.account(serial).unwrap().last_question.unwrap());
        }
        assert_eq!(seen[1].axes, seen[0].complement(0).axes);
        assert_eq!(seen[2].axes, seen[0].axes);
    }

    #[test]
    fn unexpected_messages_abort() {
        let (v, token) = setup(QuestionPolicy::Random, None);
        let mut s = v.session();
        let reply = s.handle(Message::Answer { question_id: 1, outcomes: vec![] });
        assert!(matches!(reply, Message::Error { .. }));
        assert!(s.outcome().unwrap().error.is_some());

        let mut s = v.session();
        let Message::Challenge { question_id, .. } = s.handle(Message::Hello { serial: token.serial() }) else {
            panic!("expected a challenge");
        };
        let reply = s.handle(Message::Answer { question_id, outcomes: vec![] });
        assert!(matches!(reply, Message::Error { .. }));
        assert!(!s.outcome().unwrap().accepted);
    }

    #[test]
    fn pipe_transport_round_trip() {
        let (v, token) = setup(QuestionPolicy::Random, None);
        let (hr, vw) = std::io::pipe().unwrap();
        let (vr, hw) = std::io::pipe().unwrap();
        let mut holder = HolderSession::honest(token, None, RngStream::new(9));
        let mut transcript = Vec::new();
        let (vo, ho) = std::thread::scope(|s| {
            let vt = s.spawn(|| run_verifier(&v, std::io::BufReader::new(vr), vw, Some(&mut transcript)).unwrap());
            let ho = run_holder(&mut holder, std::io::BufReader::new(hr), hw, None).unwrap();
            (vt.join().unwrap(), ho)
        });
        assert!(vo.accepted && ho.accepted);
        let lines: Vec<_> = String::from_utf8(transcript).unwrap().lines().map(String::from).collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with(r#"{"from":"holder","message":{"type":"hello","serial":""#));
        assert!(lines[3].starts_with(r#"{"from":"verifier","message":{"type":"verdict""#));
    }

    #[test]
    fn malformed_line_gets_error_reply() {
        let (v, _) = setup(QuestionPolicy::Random, None);
        let mut out = Vec::new();
        let res = run_verifier(&v, &b"{nonsense\n"[..], &mut out, None).unwrap();
        assert!(res.error.is_some() && !res.accepted);
        let reply = Message::parse(std::str::from_utf8(&out).unwrap().lines().next().unwrap()).unwrap();
        assert!(matches!(reply, Message::Error { .. }));
    }
}
