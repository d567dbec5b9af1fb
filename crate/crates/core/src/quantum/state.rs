use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::QuantumError;
use crate::linalg::{Op2, Operator, C64, I, ONE, ZERO};
use crate::rng::RngStream;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = QuantumError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "X" => Ok(Axis::X),
            "Y" => Ok(Axis::Y),
            "Z" => Ok(Axis::Z),
            other => Err(QuantumError::UnknownLabel(other.to_string())),
        }
    }
}

/// One of the six polarization eigenstates `{|0>, |1>, |+>, |->, |+i>, |-i>}`.
///
/// Drawn uniformly, these six states reproduce the Haar moments up to third
/// order, which is why average channel fidelities can be computed as a
/// finite average over them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateLabel {
    #[serde(rename = "Z+")]
    ZPlus,
    #[serde(rename = "Z-")]
    ZMinus,
    #[serde(rename = "X+")]
    XPlus,
    #[serde(rename = "X-")]
    XMinus,
    #[serde(rename = "Y+")]
    YPlus,
    #[serde(rename = "Y-")]
    YMinus,
}

impl StateLabel {
    pub const ALL: [StateLabel; 6] = [
        StateLabel::ZPlus,
        StateLabel::ZMinus,
        StateLabel::XPlus,
        StateLabel::XMinus,
        StateLabel::YPlus,
        StateLabel::YMinus,
    ];

    pub fn new(axis: Axis, negative: bool) -> Self {
        match (axis, negative) {
            (Axis::Z, false) => StateLabel::ZPlus,
            (Axis::Z, true) => StateLabel::ZMinus,
            (Axis::X, false) => StateLabel::XPlus,
            (Axis::X, true) => StateLabel::XMinus,
            (Axis::Y, false) => StateLabel::YPlus,
            (Axis::Y, true) => StateLabel::YMinus,
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            StateLabel::ZPlus | StateLabel::ZMinus => Axis::Z,
            StateLabel::XPlus | StateLabel::XMinus => Axis::X,
            StateLabel::YPlus | StateLabel::YMinus => Axis::Y,
        }
    }

    /// `true` for the `-1` eigenstate. Doubles as the reported bit:
    /// `Z+ -> 0`, `Z- -> 1`, `X+ -> 0`, `X- -> 1`.
    pub fn is_negative(self) -> bool {
        matches!(self, StateLabel::ZMinus | StateLabel::XMinus | StateLabel::YMinus)
    }

    pub fn bit(self) -> u8 {
        self.is_negative() as u8
    }

    pub fn orthogonal(self) -> Self {
        StateLabel::new(self.axis(), !self.is_negative())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StateLabel::ZPlus => "Z+",
            StateLabel::ZMinus => "Z-",
            StateLabel::XPlus => "X+",
            StateLabel::XMinus => "X-",
            StateLabel::YPlus => "Y+",
            StateLabel::YMinus => "Y-",
        }
    }

    pub fn ket(self) -> [C64; 2] {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            StateLabel::ZPlus => [ONE, ZERO],
            StateLabel::ZMinus => [ZERO, ONE],
            StateLabel::XPlus => [h, h],
            StateLabel::XMinus => [h, -h],
            StateLabel::YPlus => [h, I * FRAC_1_SQRT_2],
            StateLabel::YMinus => [h, -I * FRAC_1_SQRT_2],
        }
    }

    /// Exact rank-1 projector (entries built from halves, not from the ket,
    /// so `X+` is exactly `[[1/2, 1/2], [1/2, 1/2]]`).
    pub fn projector(self) -> Op2 {
        let half = C64::new(0.5, 0.0);
        let ihalf = C64::new(0.0, 0.5);
        let m = match self {
            StateLabel::ZPlus => [[ONE, ZERO], [ZERO, ZERO]],
            StateLabel::ZMinus => [[ZERO, ZERO], [ZERO, ONE]],
            StateLabel::XPlus => [[half, half], [half, half]],
            StateLabel::XMinus => [[half, -half], [-half, half]],
            StateLabel::YPlus => [[half, -ihalf], [ihalf, half]],
            StateLabel::YMinus => [[half, ihalf], [-ihalf, half]],
        };
        Op2::from_rows(m)
    }

    pub fn density(self) -> Qubit {
        DensityMatrix::from_trusted(self.projector())
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateLabel {
    type Err = QuantumError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StateLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| QuantumError::UnknownLabel(s.to_string()))
    }
}

/// Rank-1 projector for the named polarization eigenstate.
pub fn projector_of(label: StateLabel) -> Qubit {
    label.density()
}

/// A validated density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix<const D: usize> {
    op: Operator<D>,
}

pub type Qubit = DensityMatrix<2>;
pub type QubitPair = DensityMatrix<4>;

pub const HERMITIAN_EPS: f64 = 1e-12;
pub const TRACE_EPS: f64 = 1e-12;
pub const NEGATIVITY_EPS: f64 = 1e-10;

impl<const D: usize> DensityMatrix<D> {
    pub fn new(op: Operator<D>) -> Result<Self, QuantumError> {
        let herm = op.hermiticity_error();
        if herm > HERMITIAN_EPS {
            return Err(QuantumError::NotHermitian(herm));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_EPS || tr.im.abs() > TRACE_EPS {
            return Err(QuantumError::BadTrace(tr.re));
        }
        let min = op.hermitian_eigen()?.min_value();
        if min < -NEGATIVITY_EPS {
            return Err(QuantumError::NotPositive(min));
        }
        Ok(Self { op })
    }

    /// Wraps an operator produced by a trace-preserving, positivity-preserving
    /// computation on valid inputs.
    pub(crate) fn from_trusted(op: Operator<D>) -> Self {
        Self { op }
    }

    pub fn maximally_mixed() -> Self {
        Self { op: Operator::identity().scale(1.0 / D as f64) }
    }

    pub fn from_ket(v: &[C64; D]) -> Result<Self, QuantumError> {
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(QuantumError::BadTrace(0.0));
        }
        Ok(Self { op: Operator::outer(v).scale(1.0 / norm) })
    }

    pub fn operator(&self) -> &Operator<D> {
        &self.op
    }

    pub fn into_operator(self) -> Operator<D> {
        self.op
    }

    pub fn dim(&self) -> usize {
        D
    }

    /// `Tr[P ρ]` clamped to [0, 1].
    pub fn probability(&self, effect: &Operator<D>) -> f64 {
        effect.trace_product(&self.op).re.clamp(0.0, 1.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.op.hermitian_eigen().map(|e| e.min_value()).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Haar-random pure state.
pub fn random_pure_state<const D: usize>(rng: &mut RngStream) -> DensityMatrix<D> {
    let mut v = [ZERO; D];
    loop {
        for z in v.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *z = C64::new(re, im);
        }
        if let Ok(d) = DensityMatrix::from_ket(&v) {
            return d;
        }
    }
}

/// Random full-rank mixed state: a Haar pure state mixed with a random
/// amount of white noise.
pub fn random_mixed_state<const D: usize>(rng: &mut RngStream) -> DensityMatrix<D> {
    let pure = random_pure_state::<D>(rng);
    let w = rng.uniform();
    DensityMatrix::from_trusted(pure.op.scale(w) + Operator::identity().scale((1.0 - w) / D as f64))
}

/// Born-rule outcome of measuring `rho` in the basis containing `target`:
/// `true` with probability `Tr[P_target rho]`.
pub fn measure_against(rho: &Qubit, target: StateLabel, rng: &mut RngStream) -> bool {
    rng.bernoulli(rho.probability(&target.projector()))
}
