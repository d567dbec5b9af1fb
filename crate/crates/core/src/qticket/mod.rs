//! Qubit tickets: issuance, noisy storage, verification and exact oracles.

mod bank;
mod oracle;
mod token;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{QuantumError, StateLabel};
use crate::rng::RngStream;
use crate::serial::Serial;
use crate::tolerance::Tolerance;

pub use bank::{QticketRecord, QticketVerifier};
pub use oracle::{double_acceptance_exact, exact_honest_acceptance};
pub use token::{degrade, Side, TokenInstance};

#[derive(Debug, Error)]
pub enum QticketError {
    #[error("token length must be at least 1")]
    ZeroLength,
    #[error("copy count must be at least 1")]
    ZeroCopies,
    #[error("unknown-serial: {0}")]
    UnknownSerial(Serial),
    #[error("duplicate serial {0}")]
    DuplicateSerial(Serial),
    #[error("serial-exhausted: {0}")]
    SerialExhausted(Serial),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("token is entangled with an unmeasured twin")]
    CorrelatedToken,
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Issuer-side record of a ticket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QticketSecret {
    pub serial: Serial,
    pub labels: Vec<StateLabel>,
}

impl QticketSecret {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The noiseless token matching this secret.
    pub fn prepare(&self) -> TokenInstance {
        TokenInstance::new(self.serial, self.labels.iter().map(|l| l.density()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifierPolicy {
    pub f_tol: Tolerance,
    pub n: usize,
}

impl VerifierPolicy {
    pub fn new(f_tol: Tolerance, n: usize) -> Self {
        Self { f_tol, n }
    }

    pub fn min_correct(&self) -> usize {
        self.f_tol.min_correct(self.n)
    }
}

/// Only the boolean is meant for the holder; the count is verifier-side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub accepted: bool,
    pub correct_count: usize,
    pub serial: Serial,
}

fn random_labels(n: usize, rng: &mut RngStream) -> Vec<StateLabel> {
    (0..n).map(|_| StateLabel::ALL[rng.below(6)]).collect()
}

/// Draws `n` labels uniformly from the six axis eigenstates and a fresh serial.
pub fn issue(n: usize, rng: &mut RngStream) -> Result<(QticketSecret, TokenInstance), QticketError> {
    if n == 0 {
        return Err(QticketError::ZeroLength);
    }
    let serial = Serial::random(rng);
    let secret = QticketSecret { serial, labels: random_labels(n, rng) };
    let token = secret.prepare();
    Ok((secret, token))
}

/// `c` identical tokens under one serial.
pub fn multicopy_issue(
    n: usize,
    copies: usize,
    rng: &mut RngStream,
) -> Result<(QticketSecret, Vec<TokenInstance>), QticketError> {
    if copies == 0 {
        return Err(QticketError::ZeroCopies);
    }
    let (secret, first) = issue(n, rng)?;
    let mut tokens = vec![first];
    tokens.extend((1..copies).map(|_| secret.prepare()));
    Ok((secret, tokens))
}

/// Measures every qubit of `token` against `secret`. The token is consumed.
pub fn verify(
    secret: &QticketSecret,
    token: TokenInstance,
    policy: &VerifierPolicy,
    rng: &mut RngStream,
) -> Result<VerificationOutcome, QticketError> {
    if token.serial() != secret.serial {
        return Err(QticketError::UnknownSerial(token.serial()));
    }
    if secret.len() != policy.n {
        return Err(QticketError::LengthMismatch { expected: policy.n, got: secret.len() });
    }
    if token.len() != policy.n {
        return Err(QticketError::LengthMismatch { expected: policy.n, got: token.len() });
    }
    let serial = token.serial();
    let correct_count = token.measure(&secret.labels, rng).into_iter().filter(|&b| b).count();
    Ok(VerificationOutcome { accepted: correct_count >= policy.min_correct(), correct_count, serial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{NoiseModel, QubitChannel};
    use crate::tails::binomial_upper_tail;

    fn t(p: u64, q: u64) -> Tolerance {
        Tolerance::new(p, q).unwrap()
    }

    #[test]
    fn labels_are_uniform() {
        let mut rng = RngStream::new(7);
        let mut counts = [0usize; 6];
        for _ in 0..60_000 {
            let (s, _) = issue(1, &mut rng).unwrap();
            counts[StateLabel::ALL.iter().position(|l| *l == s.labels[0]).unwrap()] += 1;
        }
        let sigma = (60_000.0f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn issuance_is_noiseless_and_deterministic() {
        let (s, tok) = issue(4, &mut RngStream::new(1)).unwrap();
        for (q, l) in tok.qubit_states().iter().zip(&s.labels) {
            assert_eq!(q.operator().max_abs_diff(&l.projector()), 0.0);
        }
        let (s2, _) = issue(4, &mut RngStream::new(1)).unwrap();
        assert_eq!(s, s2);
        assert!(matches!(issue(0, &mut RngStream::new(1)), Err(QticketError::ZeroLength)));
    }

    #[test]
    fn degrade_examples() {
        let mut rng = RngStream::new(3);
        let (s, tok) = issue(5, &mut rng).unwrap();
        let same = degrade(tok, &NoiseModel::noiseless(5)).unwrap();
        for (q, l) in same.qubit_states().iter().zip(&s.labels) {
            assert!(q.operator().max_abs_diff(&l.projector()) < 1e-15);
        }
        let mixed = degrade(s.prepare(), &NoiseModel::uniform(QubitChannel::depolarizing(1.0).unwrap(), 5)).unwrap();
        for q in mixed.qubit_states() {
            assert!(q.operator().max_abs_diff(&crate::linalg::Op2::identity().scale(0.5)) < 1e-15);
        }
        let noisy =
            degrade(s.prepare(), &NoiseModel::uniform(QubitChannel::depolarizing_with_fidelity(0.95).unwrap(), 5)).unwrap();
        for (q, l) in noisy.qubit_states().iter().zip(&s.labels) {
            assert!((q.probability(&l.projector()) - 0.95).abs() < 1e-14);
        }
        assert!(matches!(degrade(s.prepare(), &NoiseModel::noiseless(4)), Err(QticketError::LengthMismatch { .. })));
    }

    #[test]
    fn undegraded_token_always_accepted() {
        let mut rng = RngStream::new(11);
        for n in [1, 10, 57] {
            let (s, tok) = issue(n, &mut rng).unwrap();
            let out = verify(&s, tok, &VerifierPolicy::new(t(1, 1), n), &mut rng).unwrap();
            assert!(out.accepted);
            assert_eq!(out.correct_count, n);
        }
    }

    #[test]
    fn depolarized_token_matches_binomial_tail() {
        let mut rng = RngStream::new(5);
        let policy = VerifierPolicy::new(t(1, 2), 20);
        let (s, _) = issue(20, &mut rng).unwrap();
        let model = NoiseModel::uniform(QubitChannel::depolarizing(1.0).unwrap(), 20);
        let trials = 20_000;
        let hits = (0..trials)
            .filter(|_| verify(&s, degrade(s.prepare(), &model).unwrap(), &policy, &mut rng).unwrap().accepted)
            .count();
        let p = binomial_upper_tail(20, 0.5, 10);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - p).abs() < 4.0 * se);
        assert!((binomial_upper_tail(100, 0.5, 75) - 2.818e-7).abs() < 1e-9);
    }

    #[test]
    fn verify_rejects_mismatches() {
        let mut rng = RngStream::new(2);
        let (s, _) = issue(3, &mut rng).unwrap();
        let (other, tok) = issue(3, &mut rng).unwrap();
        assert!(matches!(
            verify(&s, tok, &VerifierPolicy::new(t(1, 2), 3), &mut rng),
            Err(QticketError::UnknownSerial(x)) if x == other.serial
        ));
        assert!(matches!(
            verify(&s, s.prepare(), &VerifierPolicy::new(t(1, 2), 4), &mut rng),
            Err(QticketError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn multicopy_tokens_are_identical() {
        let mut rng = RngStream::new(9);
        let (s, toks) = multicopy_issue(2, 3, &mut rng).unwrap();
        assert_eq!(toks.len(), 3);
        for tok in &toks {
            assert_eq!(tok.serial(), s.serial);
            for (a, b) in tok.qubit_states().iter().zip(toks[0].qubit_states()) {
                assert_eq!(a.operator().max_abs_diff(b.operator()), 0.0);
            }
        }
        let (single, _) = multicopy_issue(2, 1, &mut RngStream::new(4)).unwrap();
        let (plain, _) = issue(2, &mut RngStream::new(4)).unwrap();
        assert_eq!(single, plain);
    }
}
