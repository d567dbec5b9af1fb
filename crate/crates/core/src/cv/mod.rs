//! Classically verified tickets: `n` blocks of `r` qubit pairs, each pair
//! holding one Z eigenstate and one X eigenstate, checked by per-block
//! X/Z challenges.

mod session;
mod wire;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::{measure_axis, CvAttacker};
use crate::bounds::{cv_complementary_bound, cv_threshold, relative_entropy};
use crate::quantum::{Axis, Frame, NoiseModel, Qubit, QuantumError, StateLabel};
use crate::rng::RngStream;
use crate::serial::Serial;
use crate::tolerance::Tolerance;

pub use session::{
    run_holder, run_verifier, CvAccount, CvVerifier, HolderSession, QuestionPolicy, Reason, Responder, SessionOutcome,
    VerifierSession,
};
pub use wire::{Bit, Message};

#[derive(Debug, Error)]
pub enum CvError {
    #[error("layout needs n >= 1 and r >= 1 (got n={n}, r={r})")]
    InvalidLayout { n: usize, r: usize },
    #[error("answer is for question {got}, expected {expected}")]
    QuestionMismatch { expected: u64, got: u64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("axis {0} is not a cv challenge axis")]
    UnsupportedAxis(Axis),
    #[error("pair ({0}, {1}) is not one Z and one X eigenstate")]
    InvalidPair(StateLabel, StateLabel),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvLayout {
    pub n: usize,
    pub r: usize,
    pub f_tol: Tolerance,
}

impl CvLayout {
    pub fn new(n: usize, r: usize, f_tol: Tolerance) -> Result<Self, CvError> {
        if n == 0 || r == 0 {
            return Err(CvError::InvalidLayout { n, r });
        }
        Ok(Self { n, r, f_tol })
    }

    pub fn pairs(&self) -> usize {
        self.n * self.r
    }

    pub fn qubits(&self) -> usize {
        self.n * self.r * 2
    }

    /// Correct scored reports needed in every block.
    pub fn min_correct_per_block(&self) -> usize {
        self.f_tol.min_correct(self.r)
    }

    fn index(&self, block: usize, pair: usize, member: usize) -> usize {
        (block * self.r + pair) * 2 + member
    }
}

/// One of the eight product states `|z,x>` or `|x,z>` with `z` a Z
/// eigenstate and `x` an X eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairLabel(u8);

impl PairLabel {
    pub const ALL: [PairLabel; 8] = [
        PairLabel(0),
        PairLabel(1),
        PairLabel(2),
        PairLabel(3),
        PairLabel(4),
        PairLabel(5),
        PairLabel(6),
        PairLabel(7),
    ];

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Order: `|0,+>, |0,->, |1,+>, |1,->, |+,0>, |-,0>, |+,1>, |-,1>`.
    pub fn labels(self) -> [StateLabel; 2] {
        let z = StateLabel::new(Axis::Z, self.0 & 2 != 0);
        let x = StateLabel::new(Axis::X, self.0 & 1 != 0);
        if self.0 < 4 {
            [z, x]
        } else {
            [x, z]
        }
    }

    pub fn from_labels(labels: [StateLabel; 2]) -> Result<Self, CvError> {
        Self::ALL.into_iter().find(|p| p.labels() == labels).ok_or(CvError::InvalidPair(labels[0], labels[1]))
    }

    /// Pair member prepared in an eigenstate of `axis`.
    pub fn position(self, axis: Axis) -> Result<usize, CvError> {
        let [a, b] = self.labels();
        match axis {
            Axis::Y => Err(CvError::UnsupportedAxis(axis)),
            _ if a.axis() == axis => Ok(0),
            _ => {
                debug_assert_eq!(b.axis(), axis);
                Ok(1)
            }
        }
    }

    pub fn random(rng: &mut RngStream) -> Self {
        PairLabel(rng.below(8) as u8)
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b] = self.labels();
        write!(f, "({a},{b})")
    }
}

/// Issuer-side record: the pair grid and, if axis remapping is on, the
/// Clifford frame of every qubit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvSecret {
    pub serial: Serial,
    pub layout: CvLayout,
    pub pairs: Vec<Vec<PairLabel>>,
    pub frames: Option<Vec<Frame>>,
}

impl CvSecret {
    pub fn pair(&self, block: usize, pair: usize) -> PairLabel {
        self.pairs[block][pair]
    }

    /// The noiseless holder token.
    pub fn prepare(&self) -> CvToken {
        let mut qubits = Vec::with_capacity(self.layout.qubits());
        for block in &self.pairs {
            for p in block {
                for l in p.labels() {
                    let idx = qubits.len();
                    let physical = match &self.frames {
                        Some(f) => f[idx].apply(l),
                        None => l,
                    };
                    qubits.push(physical.density());
                }
            }
        }
        CvToken { serial: self.serial, layout: self.layout, qubits, frames: self.frames.clone() }
    }
}

/// Holder-side token. Frames, when present, are public: they tell the
/// holder which physical basis realizes each requested axis.
#[derive(Debug, Clone)]
pub struct CvToken {
    serial: Serial,
    layout: CvLayout,
    qubits: Vec<Qubit>,
    frames: Option<Vec<Frame>>,
}

impl CvToken {
    /// Rebuilds a token from stored parts; lengths must match the layout.
    pub fn from_parts(
        serial: Serial,
        layout: CvLayout,
        qubits: Vec<Qubit>,
        frames: Option<Vec<Frame>>,
    ) -> Result<Self, CvError> {
        let want = layout.qubits();
        if qubits.len() != want || frames.as_ref().is_some_and(|f| f.len() != want) {
            return Err(CvError::ShapeMismatch(format!("token needs {want} qubits and frames")));
        }
        Ok(Self { serial, layout, qubits, frames })
    }

    pub fn frames(&self) -> Option<&[Frame]> {
        self.frames.as_deref()
    }

    pub fn serial(&self) -> Serial {
        self.serial
    }

    pub fn layout(&self) -> &CvLayout {
        &self.layout
    }

    pub fn qubits(&self) -> &[Qubit] {
        &self.qubits
    }

    pub fn qubit(&self, block: usize, pair: usize, member: usize) -> &Qubit {
        &self.qubits[self.layout.index(block, pair, member)]
    }

    /// Physical projector realizing the `+` outcome of `axis` on a qubit.
    fn plus_label(&self, idx: usize, axis: Axis) -> StateLabel {
        let l = StateLabel::new(axis, false);
        match &self.frames {
            Some(f) => f[idx].apply(l),
            None => l,
        }
    }

    pub fn degrade(&self, model: &NoiseModel) -> Result<Self, CvError> {
        model.check_len(self.qubits.len())?;
        let qubits = self.qubits.iter().zip(model.channels()).map(|(q, ch)| ch.apply(q)).collect();
        Ok(Self { qubits, ..self.clone() })
    }
}

/// Draws `n x r` pairs uniformly from the eight states; with `remap_axes`
/// every qubit also gets a uniformly random Clifford frame.
pub fn cv_issue(layout: CvLayout, remap_axes: bool, rng: &mut RngStream) -> (CvSecret, CvToken) {
    let serial = Serial::random(rng);
    let pairs = (0..layout.n).map(|_| (0..layout.r).map(|_| PairLabel::random(rng)).collect()).collect();
    let frames = remap_axes.then(|| (0..layout.qubits()).map(|_| Frame::random(rng)).collect());
    let secret = CvSecret { serial, layout, pairs, frames };
    let token = secret.prepare();
    (secret, token)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeQuestion {
    pub question_id: u64,
    pub axes: Vec<Axis>,
}

impl ChallengeQuestion {
    pub fn new(question_id: u64, axes: Vec<Axis>) -> Result<Self, CvError> {
        if let Some(a) = axes.iter().find(|a| **a == Axis::Y) {
            return Err(CvError::UnsupportedAxis(*a));
        }
        Ok(Self { question_id, axes })
    }

    /// Uniform X/Z per block, independent of any secret.
    pub fn random(question_id: u64, n: usize, rng: &mut RngStream) -> Self {
        let axes = (0..n).map(|_| if rng.below(2) == 0 { Axis::Z } else { Axis::X }).collect();
        Self { question_id, axes }
    }

    /// The other axis on every block.
    pub fn complement(&self, question_id: u64) -> Self {
        let axes = self.axes.iter().map(|a| if *a == Axis::Z { Axis::X } else { Axis::Z }).collect();
        Self { question_id, axes }
    }
}

/// Reported bits, `outcomes[block][pair][member]`; X reports use `+ -> 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSheet {
    pub question_id: u64,
    pub outcomes: Vec<Vec<[u8; 2]>>,
}

impl AnswerSheet {
    pub fn new(question_id: u64, outcomes: Vec<Vec<[u8; 2]>>) -> Self {
        Self { question_id, outcomes }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub per_block_correct: Vec<usize>,
    pub accepted: bool,
}

/// Scores only the pair member prepared in an eigenstate of the block's
/// axis; the other member's report is required but ignored.
pub fn score_answer(
    secret: &CvSecret,
    question: &ChallengeQuestion,
    answer: &AnswerSheet,
) -> Result<ScoreCard, CvError> {
    let layout = secret.layout;
    if answer.question_id != question.question_id {
        return Err(CvError::QuestionMismatch { expected: question.question_id, got: answer.question_id });
    }
    if question.axes.len() != layout.n {
        return Err(CvError::ShapeMismatch(format!("question has {} blocks, expected {}", question.axes.len(), layout.n)));
    }
    check_shape(&layout, answer)?;
    let mut per_block_correct = Vec::with_capacity(layout.n);
    for (b, (axis, block)) in question.axes.iter().zip(&answer.outcomes).enumerate() {
        let mut correct = 0;
        for (p, bits) in block.iter().enumerate() {
            let label = secret.pair(b, p);
            let pos = label.position(*axis)?;
            correct += usize::from(bits[pos] == label.labels()[pos].bit());
        }
        per_block_correct.push(correct);
    }
    let k = layout.min_correct_per_block();
    let accepted = per_block_correct.iter().all(|&c| c >= k);
    Ok(ScoreCard { per_block_correct, accepted })
}

fn check_shape(layout: &CvLayout, answer: &AnswerSheet) -> Result<(), CvError> {
    if answer.outcomes.len() != layout.n || answer.outcomes.iter().any(|b| b.len() != layout.r) {
        return Err(CvError::ShapeMismatch(format!("answer grid must be {} x {} x 2", layout.n, layout.r)));
    }
    if answer.outcomes.iter().flatten().flatten().any(|b| *b > 1) {
        return Err(CvError::ShapeMismatch("bits must be 0 or 1".into()));
    }
    Ok(())
}

/// Measures every qubit (optionally degraded first) along its block's axis.
pub fn honest_answer(
    token: &CvToken,
    question: &ChallengeQuestion,
    noise: Option<&NoiseModel>,
    rng: &mut RngStream,
) -> Result<AnswerSheet, CvError> {
    let layout = token.layout;
    if question.axes.len() != layout.n {
        return Err(CvError::ShapeMismatch(format!("question has {} blocks, expected {}", question.axes.len(), layout.n)));
    }
    let degraded;
    let token = match noise {
        Some(m) => {
            degraded = token.degrade(m)?;
            &degraded
        }
        None => token,
    };
    let mut outcomes = vec![vec![[0u8; 2]; layout.r]; layout.n];
    for (b, axis) in question.axes.iter().enumerate() {
        if *axis == Axis::Y {
            return Err(CvError::UnsupportedAxis(*axis));
        }
        for p in 0..layout.r {
            for k in 0..2 {
                let idx = layout.index(b, p, k);
                let plus = token.plus_label(idx, *axis);
                // measure_axis reports 0 for the + outcome of the given axis
                let bit = if plus.is_negative() {
                    1 - measure_axis(token.qubits[idx].operator(), plus.axis(), rng)
                } else {
                    measure_axis(token.qubits[idx].operator(), plus.axis(), rng)
                };
                outcomes[b][p][k] = bit;
            }
        }
    }
    Ok(AnswerSheet::new(question.question_id, outcomes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Both verifiers draw questions independently.
    Independent,
    /// The second verifier asks the other axis on every block.
    Complementary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubleSpendReport {
    pub trials: usize,
    pub joint_accepts: usize,
    pub rate: f64,
    /// Analytic ceiling for `rate` matching the pairing.
    pub bound: f64,
    /// Mean over pairs with complementary block questions of the averaged
    /// correctness of the two scored members.
    pub pair_utility: f64,
    pub pair_utility_stderr: f64,
    /// Fraction of scored reports that were correct, over both sheets.
    pub scored_success: f64,
}

/// Ceiling on the joint acceptance rate for the given pairing. Returns 1
/// where the tolerance is at or below the cv threshold.
pub fn double_spend_bound(layout: &CvLayout, pairing: Pairing) -> f64 {
    let f_tol = layout.f_tol.as_f64();
    let delta = cv_threshold();
    if f_tol <= delta {
        return 1.0;
    }
    match pairing {
        Pairing::Independent => {
            let d = relative_entropy(f_tol, delta).unwrap_or(0.0);
            (0.5 + (-(layout.r as f64) * d).exp()).powi(layout.n as i32).min(1.0)
        }
        Pairing::Complementary => {
            cv_complementary_bound(layout.n as u64, layout.r as u64, f_tol).map(|b| b.clamped).unwrap_or(1.0)
        }
    }
}

/// One fresh ticket per trial; the attacker answers two verifiers whose
/// questions follow `pairing`. Trial `i` uses substream `i`.
pub fn double_spend_experiment(
    layout: CvLayout,
    attacker: CvAttacker,
    pairing: Pairing,
    trials: usize,
    rng: &RngStream,
) -> DoubleSpendReport {
    let mut joint = 0usize;
    let (mut util_sum, mut util_sq, mut util_n) = (0.0f64, 0.0f64, 0usize);
    let (mut scored_ok, mut scored) = (0usize, 0usize);
    for t in 0..trials {
        let mut rng = rng.substream(t as u64);
        let (secret, token) = cv_issue(layout, false, &mut rng);
        let q1 = ChallengeQuestion::random(1, layout.n, &mut rng);
        let q2 = match pairing {
            Pairing::Independent => ChallengeQuestion::random(2, layout.n, &mut rng),
            Pairing::Complementary => q1.complement(2),
        };
        let (a1, a2) = attacker.answer_pair(&token, &q1, &q2, &mut rng);
        let s1 = score_answer(&secret, &q1, &a1).expect("attacker sheets have the layout's shape");
        let s2 = score_answer(&secret, &q2, &a2).expect("attacker sheets have the layout's shape");
        joint += usize::from(s1.accepted && s2.accepted);
        scored_ok += s1.per_block_correct.iter().chain(&s2.per_block_correct).sum::<usize>();
        scored += 2 * layout.pairs();
        for b in 0..layout.n {
            if q1.axes[b] == q2.axes[b] {
                continue;
            }
            for p in 0..layout.r {
                let label = secret.pair(b, p);
                let ok = |q: &ChallengeQuestion, a: &AnswerSheet| {
                    let pos = label.position(q.axes[b]).unwrap();
                    f64::from(u8::from(a.outcomes[b][p][pos] == label.labels()[pos].bit()))
                };
                let u = 0.5 * (ok(&q1, &a1) + ok(&q2, &a2));
                util_sum += u;
                util_sq += u * u;
                util_n += 1;
            }
        }
    }
    let (pair_utility, pair_utility_stderr) = if util_n > 0 {
        let m = util_sum / util_n as f64;
        let var = (util_sq / util_n as f64 - m * m).max(0.0);
        (m, (var / util_n as f64).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    DoubleSpendReport {
        trials,
        joint_accepts: joint,
        rate: joint as f64 / trials.max(1) as f64,
        bound: double_spend_bound(&layout, pairing),
        pair_utility,
        pair_utility_stderr,
        scored_success: scored_ok as f64 / scored.max(1) as f64,
    }
}
