use std::sync::{Arc, Mutex};

use super::QticketError;
use crate::linalg::{partial_trace, project_first, project_second, tensor, Factor, Op2, Op4};
use crate::quantum::{NoiseModel, Qubit, QubitChannel, StateLabel};
use crate::rng::RngStream;
use crate::serial::Serial;

/// Which of two correlated counterfeit tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

impl Side {
    fn other(self) -> Self {
        match self {
            Side::First => Side::Second,
            Side::Second => Side::First,
        }
    }
}

/// Per-qubit joint state of two counterfeit tokens. Measuring one side
/// collapses the other to its conditional states.
#[derive(Debug)]
enum Correlation {
    Joint(Vec<Op4>),
    Remaining(Vec<Op2>),
}

#[derive(Debug)]
enum Qubits {
    Product(Vec<Qubit>),
    Correlated { shared: Arc<Mutex<Correlation>>, side: Side, len: usize },
}

/// The holder-side physical token: a serial and `N` qubits.
///
/// Tokens produced by a cloning attack share a joint state with their twin so
/// that measuring both against the same secret reproduces the correct joint
/// statistics. Verification consumes the token.
#[derive(Debug)]
pub struct TokenInstance {
    serial: Serial,
    qubits: Qubits,
}

fn reduce(sigma: &Op4, keep: Side) -> Op2 {
    match keep {
        Side::First => partial_trace(sigma, Factor::Second),
        Side::Second => partial_trace(sigma, Factor::First),
    }
}

/// Unnormalized state of `other` after projecting `measured` onto `p`.
fn project(sigma: &Op4, measured: Side, p: &Op2) -> Op2 {
    match measured {
        Side::First => project_first(sigma, p),
        Side::Second => project_second(sigma, p),
    }
}

impl TokenInstance {
    pub fn new(serial: Serial, qubits: Vec<Qubit>) -> Self {
        Self { serial, qubits: Qubits::Product(qubits) }
    }

    /// Two tokens sharing the per-qubit joint states `joint`; the first
    /// tensor factor belongs to the first token.
    pub(crate) fn correlated_pair(serial: Serial, joint: Vec<Op4>) -> (Self, Self) {
        let len = joint.len();
        let shared = Arc::new(Mutex::new(Correlation::Joint(joint)));
        (
            Self { serial, qubits: Qubits::Correlated { shared: shared.clone(), side: Side::First, len } },
            Self { serial, qubits: Qubits::Correlated { shared, side: Side::Second, len } },
        )
    }

    pub fn serial(&self) -> Serial {
        self.serial
    }

    pub fn len(&self) -> usize {
        match &self.qubits {
            Qubits::Product(q) => q.len(),
            Qubits::Correlated { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether this token is still entangled with an outstanding twin.
    pub fn is_correlated(&self) -> bool {
        match &self.qubits {
            Qubits::Product(_) => false,
            Qubits::Correlated { shared, .. } => {
                Arc::strong_count(shared) > 1 && matches!(*shared.lock().unwrap(), Correlation::Joint(_))
            }
        }
    }

    /// Reduced single-qubit states of this token.
    pub fn qubit_states(&self) -> Vec<Qubit> {
        match &self.qubits {
            Qubits::Product(q) => q.clone(),
            Qubits::Correlated { shared, side, .. } => match &*shared.lock().unwrap() {
                Correlation::Joint(j) => j.iter().map(|s| Qubit::from_trusted(reduce(s, *side))).collect(),
                Correlation::Remaining(states) => states.iter().map(|s| Qubit::from_trusted(*s)).collect(),
            },
        }
    }

    /// Converts to an uncorrelated token. Fails while a twin that has not been
    /// measured is still held, since the joint state cannot be split.
    pub fn into_product(self) -> Result<(Serial, Vec<Qubit>), QticketError> {
        if self.is_correlated() {
            return Err(QticketError::CorrelatedToken);
        }
        let states = self.qubit_states();
        Ok((self.serial, states))
    }

    /// Applies `model` qubit by qubit.
    pub fn degrade(self, model: &NoiseModel) -> Result<Self, QticketError> {
        model.check_len(self.len()).map_err(|_| QticketError::LengthMismatch { expected: self.len(), got: model.len() })?;
        let serial = self.serial;
        match self.qubits {
            Qubits::Product(q) => {
                Ok(Self::new(serial, q.iter().zip(model.channels()).map(|(rho, ch)| ch.apply(rho)).collect()))
            }
            Qubits::Correlated { shared, side, len } => {
                {
                    let mut guard = shared.lock().unwrap();
                    match &mut *guard {
                        Correlation::Joint(joint) => {
                            for (sigma, ch) in joint.iter_mut().zip(model.channels()) {
                                *sigma = apply_to_side(ch, sigma, side);
                            }
                        }
                        Correlation::Remaining(states) => {
                            for (rho, ch) in states.iter_mut().zip(model.channels()) {
                                *rho = ch.apply_operator(rho);
                            }
                        }
                    }
                }
                Ok(Self { serial, qubits: Qubits::Correlated { shared, side, len } })
            }
        }
    }

    /// Measures every qubit against the corresponding label. Returns the
    /// per-qubit outcomes (`true` = found in the labelled state).
    pub(crate) fn measure(self, labels: &[StateLabel], rng: &mut RngStream) -> Vec<bool> {
        debug_assert_eq!(labels.len(), self.len());
        match self.qubits {
            Qubits::Product(q) => {
                q.iter().zip(labels).map(|(rho, l)| rng.bernoulli(rho.probability(&l.projector()))).collect()
            }
            Qubits::Correlated { shared, side, .. } => {
                let twin_alive = Arc::strong_count(&shared) > 1;
                let mut guard = shared.lock().unwrap();
                match &mut *guard {
                    Correlation::Joint(joint) if twin_alive => {
                        let mut outcomes = Vec::with_capacity(joint.len());
                        let mut rest = Vec::with_capacity(joint.len());
                        for (sigma, l) in joint.iter().zip(labels) {
                            let p = l.projector();
                            let hit_state = project(sigma, side, &p);
                            let p_hit = hit_state.trace().re.clamp(0.0, 1.0);
                            let hit = rng.bernoulli(p_hit);
                            let cond = if hit {
                                hit_state.scale(1.0 / p_hit)
                            } else {
                                let miss = project(sigma, side, &(Op2::identity() - p));
                                let p_miss = 1.0 - p_hit;
                                if p_miss > 0.0 {
                                    miss.scale(1.0 / p_miss)
                                } else {
                                    reduce(sigma, side.other())
                                }
                            };
                            outcomes.push(hit);
                            rest.push(cond);
                        }
                        *guard = Correlation::Remaining(rest);
                        outcomes
                    }
                    Correlation::Joint(joint) => joint
                        .iter()
                        .zip(labels)
                        .map(|(sigma, l)| rng.bernoulli(l.projector().trace_product(&reduce(sigma, side)).re.clamp(0.0, 1.0)))
                        .collect(),
                    Correlation::Remaining(states) => states
                        .iter()
                        .zip(labels)
                        .map(|(rho, l)| rng.bernoulli(l.projector().trace_product(rho).re.clamp(0.0, 1.0)))
                        .collect(),
                }
            }
        }
    }
}

fn apply_to_side(ch: &QubitChannel, sigma: &Op4, side: Side) -> Op4 {
    ch.kraus_operators().iter().fold(Op4::zero(), |acc, k| {
        let lifted = match side {
            Side::First => tensor(k, &Op2::identity()),
            Side::Second => tensor(&Op2::identity(), k),
        };
        acc + sigma.conjugate_by(&lifted)
    })
}

/// Applies `model` to every qubit of `token`.
pub fn degrade(token: TokenInstance, model: &NoiseModel) -> Result<TokenInstance, QticketError> {
    token.degrade(model)
}
