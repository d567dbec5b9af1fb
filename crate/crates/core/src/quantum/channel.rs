use super::state::{Axis, Qubit, StateLabel};
use super::QuantumError;
use crate::linalg::{pauli_x, pauli_y, pauli_z, Op2};

const COMPLETENESS_TOL: f64 = 1e-10;

/// Single-qubit CPTP map in Kraus form.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitChannel {
    kraus: Vec<Op2>,
}

impl QubitChannel {
    pub fn new(kraus: Vec<Op2>) -> Result<Self, QuantumError> {
        if kraus.is_empty() {
            return Err(QuantumError::NotTracePreserving(1.0));
        }
        let sum = kraus.iter().fold(Op2::zero(), |acc, k| acc + k.adjoint().matmul(k));
        let err = sum.max_abs_diff(&Op2::identity());
        if err > COMPLETENESS_TOL {
            return Err(QuantumError::NotTracePreserving(err));
        }
        Ok(Self { kraus })
    }

    pub fn kraus_operators(&self) -> &[Op2] {
        &self.kraus
    }

    pub fn identity() -> Self {
        Self { kraus: vec![Op2::identity()] }
    }

    /// `rho -> (1 - lambda) rho + lambda 𝟙/2`, valid for `lambda ∈ [0, 4/3]`.
    pub fn depolarizing(lambda: f64) -> Result<Self, QuantumError> {
        if !(0.0..=4.0 / 3.0).contains(&lambda) {
            return Err(QuantumError::BadParameter { name: "lambda", value: lambda });
        }
        let w0 = (1.0 - 0.75 * lambda).max(0.0).sqrt();
        let w = (0.25 * lambda).sqrt();
        Self::new(vec![Op2::identity().scale(w0), pauli_x().scale(w), pauli_y().scale(w), pauli_z().scale(w)])
    }

    /// Depolarizing channel whose average fidelity is `fidelity`
    /// (`lambda = 2 (1 - F)`).
    pub fn depolarizing_with_fidelity(fidelity: f64) -> Result<Self, QuantumError> {
        if !(1.0 / 3.0..=1.0).contains(&fidelity) {
            return Err(QuantumError::BadParameter { name: "fidelity", value: fidelity });
        }
        Self::depolarizing(2.0 * (1.0 - fidelity))
    }

    /// Shrinks the Bloch components orthogonal to `axis` by `1 - lambda`.
    pub fn dephasing(lambda: f64, axis: Axis) -> Result<Self, QuantumError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(QuantumError::BadParameter { name: "lambda", value: lambda });
        }
        let pauli = match axis {
            Axis::X => pauli_x(),
            Axis::Y => pauli_y(),
            Axis::Z => pauli_z(),
        };
        Self::new(vec![Op2::identity().scale((1.0 - 0.5 * lambda).sqrt()), pauli.scale((0.5 * lambda).sqrt())])
    }

    pub fn amplitude_damping(gamma: f64) -> Result<Self, QuantumError> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(QuantumError::BadParameter { name: "gamma", value: gamma });
        }
        let k0 = Op2::from_real([[1.0, 0.0], [0.0, (1.0 - gamma).sqrt()]]);
        let k1 = Op2::from_real([[0.0, gamma.sqrt()], [0.0, 0.0]]);
        Self::new(vec![k0, k1])
    }

    /// Conjugation by a fixed unitary.
    pub fn unitary(u: Op2) -> Result<Self, QuantumError> {
        Self::new(vec![u])
    }

    pub fn apply(&self, rho: &Qubit) -> Qubit {
        Qubit::from_trusted(self.apply_operator(rho.operator()))
    }

    pub(crate) fn apply_operator(&self, rho: &Op2) -> Op2 {
        self.kraus.iter().fold(Op2::zero(), |acc, k| acc + rho.conjugate_by(k))
    }

    /// Average fidelity over pure inputs, evaluated exactly as the uniform
    /// average over the six polarization eigenstates.
    pub fn average_fidelity(&self) -> f64 {
        let total: f64 = StateLabel::ALL
            .iter()
            .map(|l| {
                let p = l.projector();
                p.trace_product(&self.apply_operator(&p)).re
            })
            .sum();
        (total / 6.0).clamp(0.0, 1.0)
    }

    /// `Tr[rho M(rho)]` for a specific pure input.
    pub fn fidelity_for(&self, rho: &Qubit) -> f64 {
        rho.operator().trace_product(&self.apply_operator(rho.operator())).re
    }
}

/// `Σ K ρ K†`.
pub fn apply_channel(ch: &QubitChannel, rho: &Qubit) -> Qubit {
    ch.apply(rho)
}

pub fn average_fidelity(ch: &QubitChannel) -> f64 {
    ch.average_fidelity()
}

/// One channel per token qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    channels: Vec<QubitChannel>,
}

impl NoiseModel {
    pub fn new(channels: Vec<QubitChannel>) -> Self {
        Self { channels }
    }

    pub fn uniform(channel: QubitChannel, qubits: usize) -> Self {
        Self { channels: vec![channel; qubits] }
    }

    pub fn noiseless(qubits: usize) -> Self {
        Self::uniform(QubitChannel::identity(), qubits)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[QubitChannel] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &QubitChannel {
        &self.channels[i]
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.channels.iter().map(QubitChannel::average_fidelity).collect()
    }

    /// Mean of the per-qubit average fidelities.
    pub fn expected_fidelity(&self) -> f64 {
        if self.channels.is_empty() {
            return 1.0;
        }
        self.fidelities().iter().sum::<f64>() / self.channels.len() as f64
    }

    pub fn check_len(&self, qubits: usize) -> Result<(), QuantumError> {
        if self.channels.len() != qubits {
            return Err(QuantumError::LengthMismatch { expected: qubits, got: self.channels.len() });
        }
        Ok(())
    }
}
