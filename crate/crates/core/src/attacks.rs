//! Reference adversaries: product cloning maps, the intermediate-basis
//! measurement and adaptive multi-submission drivers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cv::{AnswerSheet, ChallengeQuestion, CvToken, PairLabel};
use crate::linalg::{partial_trace, project_first, symmetric_projector, tensor, Factor, Op2, Op4, C64};
use crate::qticket::{QticketError, QticketSecret, TokenInstance, VerificationOutcome, VerifierPolicy};
use crate::quantum::{Axis, Qubit, QubitPair, StateLabel};
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("invalid outcome distribution ({p11}, {p10}, {p01}, {p00})")]
    InvalidDistribution { p11: f64, p10: f64, p01: f64, p00: f64 },
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("attempt count must be at least 1")]
    NoAttempts,
}

/// Joint correctness of two counterfeit qubits measured against the original
/// label. `p10` is "first correct, second wrong".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairOutcomeDist {
    pub p11: f64,
    pub p10: f64,
    pub p01: f64,
    pub p00: f64,
}

impl PairOutcomeDist {
    pub fn new(p11: f64, p10: f64, p01: f64, p00: f64) -> Result<Self, AttackError> {
        let all = [p11, p10, p01, p00];
        let ok = all.iter().all(|p| p.is_finite() && *p >= 0.0) && (all.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(AttackError::InvalidDistribution { p11, p10, p01, p00 });
        }
        Ok(Self { p11, p10, p01, p00 })
    }

    pub fn first_marginal(&self) -> f64 {
        self.p11 + self.p10
    }

    pub fn second_marginal(&self) -> f64 {
        self.p11 + self.p01
    }
}

/// A one-to-two qubit map applied independently to every qubit.
#[derive(Clone, Copy)]
pub struct PairCloneStrategy {
    name: &'static str,
    map: fn(&Op2) -> Op4,
}

impl fmt::Debug for PairCloneStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PairCloneStrategy").field("name", &self.name).finish()
    }
}

impl PairCloneStrategy {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn apply(&self, rho: &Qubit) -> QubitPair {
        QubitPair::from_trusted((self.map)(rho.operator()))
    }

    pub(crate) fn apply_operator(&self, rho: &Op2) -> Op4 {
        (self.map)(rho)
    }

    pub fn by_name(name: &str) -> Result<Self, AttackError> {
        match name {
            "universal-cloner" => Ok(universal_cloner()),
            "measure-reprepare-z" => Ok(measure_reprepare_z()),
            other => Err(AttackError::UnknownStrategy(other.to_string())),
        }
    }

    pub fn shipped() -> [Self; 2] {
        [universal_cloner(), measure_reprepare_z()]
    }
}

fn universal_clone_map(rho: &Op2) -> Op4 {
    // (2/3) S (rho ⊗ 1) S: linear, equal to rho⊗rho/3 + rho⊗1/6 + 1⊗rho/6 on pure inputs
    tensor(rho, &Op2::identity()).conjugate_by(&symmetric_projector()).scale(2.0 / 3.0)
}

fn measure_reprepare_z_map(rho: &Op2) -> Op4 {
    [StateLabel::ZPlus, StateLabel::ZMinus].iter().fold(Op4::zero(), |acc, l| {
        let p = l.projector();
        acc + tensor(&p, &p).scale(p.trace_product(rho).re)
    })
}

/// Symmetric optimal universal 1→2 qubit cloner.
pub fn universal_cloner() -> PairCloneStrategy {
    PairCloneStrategy { name: "universal-cloner", map: universal_clone_map }
}

/// Measures in Z and emits two copies of the outcome.
pub fn measure_reprepare_z() -> PairCloneStrategy {
    PairCloneStrategy { name: "measure-reprepare-z", map: measure_reprepare_z_map }
}

/// Joint Born statistics of measuring both outputs of `strategy` against
/// the projector of `label`.
pub fn pair_outcome_distribution(strategy: &PairCloneStrategy, label: StateLabel) -> PairOutcomeDist {
    let out = strategy.apply_operator(&label.projector());
    let p = label.projector();
    let q = label.orthogonal().projector();
    let prob = |a: &Op2, b: &Op2| tensor(a, b).trace_product(&out).re.max(0.0);
    let (p11, p10, p01, p00) = (prob(&p, &p), prob(&p, &q), prob(&q, &p), prob(&q, &q));
    let total = p11 + p10 + p01 + p00;
    PairOutcomeDist { p11: p11 / total, p10: p10 / total, p01: p01 / total, p00: p00 / total }
}

/// Applies `strategy` to every qubit. Both outputs keep the serial and stay
/// correlated until one of them is verified.
pub fn counterfeit(
    token: TokenInstance,
    strategy: &PairCloneStrategy,
) -> Result<(TokenInstance, TokenInstance), QticketError> {
    let (serial, qubits) = token.into_product()?;
    let joint = qubits.iter().map(|q| strategy.apply_operator(q.operator())).collect();
    Ok(TokenInstance::correlated_pair(serial, joint))
}

/// Projector onto the `+1` eigenvector of `(X + Z)/sqrt 2`.
pub fn intermediate_basis_projector() -> Op2 {
    let (s, c) = (std::f64::consts::FRAC_PI_8).sin_cos();
    Op2::outer(&[C64::new(c, 0.0), C64::new(s, 0.0)])
}

/// Reported bit from one intermediate-basis measurement; `+1 -> 0`.
/// The same bit serves as the Z report (`0`) and the X report (`+`).
pub fn intermediate_basis_bit(rho: &Op2, rng: &mut RngStream) -> u8 {
    u8::from(!rng.bernoulli(intermediate_basis_projector().trace_product(rho).re.clamp(0.0, 1.0)))
}

/// Answers to both possible block questions for one pair, from a single
/// intermediate-basis measurement per qubit. Returns `(x_answer, z_answer)`.
pub fn intermediate_basis_answers(pair: PairLabel, rng: &mut RngStream) -> ([u8; 2], [u8; 2]) {
    let [a, b] = pair.labels();
    let bits = [intermediate_basis_bit(&a.projector(), rng), intermediate_basis_bit(&b.projector(), rng)];
    (bits, bits)
}

/// Honest measurement of a qubit along `axis`; returns the reported bit.
pub(crate) fn measure_axis(rho: &Op2, axis: Axis, rng: &mut RngStream) -> u8 {
    let plus = StateLabel::new(axis, false).projector();
    u8::from(!rng.bernoulli(plus.trace_product(rho).re.clamp(0.0, 1.0)))
}

/// Adversaries against two cv verifiers that ask `first` and then `second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvAttacker {
    /// One intermediate-basis measurement per qubit, same bits for both.
    IntermediateBasis,
    /// Honest answer to the first question; reuse on matching blocks,
    /// uniform guesses elsewhere.
    HonestCopy,
    /// Clone every qubit, answer each verifier honestly from one copy.
    UniversalCloner,
}

impl CvAttacker {
    pub const ALL: [CvAttacker; 3] = [CvAttacker::IntermediateBasis, CvAttacker::HonestCopy, CvAttacker::UniversalCloner];

    pub fn as_str(self) -> &'static str {
        match self {
            CvAttacker::IntermediateBasis => "intermediate-basis",
            CvAttacker::HonestCopy => "honest-copy",
            CvAttacker::UniversalCloner => "universal-cloner",
        }
    }

    /// Answers for both verifiers. The first sheet never depends on `second`.
    pub fn answer_pair(
        self,
        token: &CvToken,
        first: &ChallengeQuestion,
        second: &ChallengeQuestion,
        rng: &mut RngStream,
    ) -> (AnswerSheet, AnswerSheet) {
        let (n, r) = (token.layout().n, token.layout().r);
        let mut a1 = vec![vec![[0u8; 2]; r]; n];
        let mut a2 = a1.clone();
        for b in 0..n {
            for p in 0..r {
                for k in 0..2 {
                    let rho = token.qubit(b, p, k).operator();
                    let (x, y) = match self {
                        CvAttacker::IntermediateBasis => {
                            let bit = intermediate_basis_bit(rho, rng);
                            (bit, bit)
                        }
                        CvAttacker::HonestCopy => {
                            let bit = measure_axis(rho, first.axes[b], rng);
                            let other = if second.axes[b] == first.axes[b] { bit } else { rng.below(2) as u8 };
                            (bit, other)
                        }
                        CvAttacker::UniversalCloner => {
                            let joint = universal_clone_map(rho);
                            let plus = StateLabel::new(first.axes[b], false).projector();
                            let hit = project_first(&joint, &plus);
                            let p = hit.trace().re.clamp(0.0, 1.0);
                            let bit = u8::from(!rng.bernoulli(p));
                            let rest = if bit == 0 {
                                hit.scale(1.0 / p)
                            } else if p < 1.0 {
                                project_first(&joint, &(Op2::identity() - plus)).scale(1.0 / (1.0 - p))
                            } else {
                                partial_trace(&joint, Factor::First)
                            };
                            (bit, measure_axis(&rest, second.axes[b], rng))
                        }
                    };
                    a1[b][p][k] = x;
                    a2[b][p][k] = y;
                }
            }
        }
        (AnswerSheet::new(first.question_id, a1), AnswerSheet::new(second.question_id, a2))
    }
}

impl fmt::Display for CvAttacker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CvAttacker {
    type Err = AttackError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| AttackError::UnknownStrategy(s.to_string()))
    }
}

/// Adaptive strategies for submitting one genuine ticket `v` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Driver {
    /// Submit the genuine ticket, then fresh random guesses.
    HonestOnceThenNoise,
    /// Clone once and submit both copies, then fresh random guesses.
    CloneBoth,
    /// Clone the kept copy before every submission while rejected; after an
    /// acceptance submit the kept copy without cloning it again.
    CloneThenAdapt,
}

/// One per-qubit action in a sequential attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    /// Clone the held qubit, submit the first output, keep the second.
    CloneSubmit,
    /// Submit the held qubit itself.
    Submit,
    /// Submit a uniformly random six-state guess per qubit.
    Guess,
}

impl Driver {
    fn next_step(self, history: &[bool], remaining: usize, holding: bool) -> Step {
        if !holding {
            return Step::Guess;
        }
        match self {
            Driver::HonestOnceThenNoise => Step::Submit,
            Driver::CloneBoth => {
                if history.is_empty() {
                    Step::CloneSubmit
                } else {
                    Step::Submit
                }
            }
            Driver::CloneThenAdapt => {
                if remaining == 1 || history.last() == Some(&true) {
                    Step::Submit
                } else {
                    Step::CloneSubmit
                }
            }
        }
    }
}

impl FromStr for Driver {
    type Err = AttackError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "honest-once-then-noise" => Ok(Driver::HonestOnceThenNoise),
            "clone-both" => Ok(Driver::CloneBoth),
            "clone-then-adapt" => Ok(Driver::CloneThenAdapt),
            other => Err(AttackError::UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Transition {
    p_hit: f64,
    hit: usize,
    miss: usize,
}

/// Interned single-qubit trajectories. Every held qubit is a product-state
/// factor whose state depends only on its label and its own outcome
/// history, so states and transitions are memoized across qubits and trials.
#[derive(Debug)]
pub struct TrajectoryCache {
    strategy: PairCloneStrategy,
    states: Vec<(StateLabel, Op2)>,
    clone_steps: Vec<Option<Transition>>,
    submit_p: Vec<Option<f64>>,
}

impl TrajectoryCache {
    pub fn new(strategy: PairCloneStrategy) -> Self {
        let mut cache = Self { strategy, states: Vec::new(), clone_steps: Vec::new(), submit_p: Vec::new() };
        for l in StateLabel::ALL {
            cache.push(l, l.projector());
        }
        cache
    }

    fn push(&mut self, label: StateLabel, rho: Op2) -> usize {
        self.states.push((label, rho));
        self.clone_steps.push(None);
        self.submit_p.push(None);
        self.states.len() - 1
    }

    fn root(label: StateLabel) -> usize {
        StateLabel::ALL.iter().position(|l| *l == label).unwrap()
    }

    fn submit(&mut self, id: usize) -> f64 {
        if let Some(p) = self.submit_p[id] {
            return p;
        }
        let (label, rho) = self.states[id];
        let p = label.projector().trace_product(&rho).re.clamp(0.0, 1.0);
        self.submit_p[id] = Some(p);
        p
    }

    fn clone_submit(&mut self, id: usize) -> Transition {
        if let Some(t) = self.clone_steps[id] {
            return t;
        }
        let (label, rho) = self.states[id];
        let joint = self.strategy.apply_operator(&rho);
        let p = label.projector();
        let hit = project_first(&joint, &p);
        let p_hit = hit.trace().re.clamp(0.0, 1.0);
        let miss = project_first(&joint, &label.orthogonal().projector());
        let reduced = partial_trace(&joint, Factor::First);
        let hit = if p_hit > 0.0 { hit.scale(1.0 / p_hit) } else { reduced };
        let miss = if p_hit < 1.0 { miss.scale(1.0 / (1.0 - p_hit)) } else { reduced };
        let t = Transition { p_hit, hit: self.push(label, hit), miss: self.push(label, miss) };
        self.clone_steps[id] = Some(t);
        t
    }
}

/// Runs `v` verification attempts of `driver` against `secret`, starting
/// from the genuine noiseless ticket. Returns the full transcript.
pub fn sequential_attack(
    driver: Driver,
    secret: &QticketSecret,
    v: usize,
    policy: &VerifierPolicy,
    cache: &mut TrajectoryCache,
    rng: &mut RngStream,
) -> Result<Vec<VerificationOutcome>, AttackError> {
    if v == 0 {
        return Err(AttackError::NoAttempts);
    }
    let k = policy.min_correct();
    let mut held: Vec<usize> = secret.labels.iter().map(|l| TrajectoryCache::root(*l)).collect();
    let mut holding = true;
    let mut history = Vec::with_capacity(v);
    let mut transcript = Vec::with_capacity(v);
    for round in 0..v {
        let step = driver.next_step(&history, v - round, holding);
        let mut count = 0usize;
        match step {
            Step::Guess => {
                for label in &secret.labels {
                    let guess = StateLabel::ALL[rng.below(6)];
                    count += usize::from(rng.bernoulli(guess.projector().trace_product(&label.projector()).re));
                }
            }
            Step::Submit => {
                for id in &held {
                    count += usize::from(rng.bernoulli(cache.submit(*id)));
                }
                holding = false;
            }
            Step::CloneSubmit => {
                for id in held.iter_mut() {
                    let t = cache.clone_submit(*id);
                    let hit = rng.bernoulli(t.p_hit);
                    count += usize::from(hit);
                    *id = if hit { t.hit } else { t.miss };
                }
            }
        }
        let accepted = count >= k;
        history.push(accepted);
        transcript.push(VerificationOutcome { accepted, correct_count: count, serial: secret.serial });
    }
    Ok(transcript)
}
