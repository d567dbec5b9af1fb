//! Weighted quantum retrieval games on one or two qubits.
//!
//! A game pairs an indexed ensemble `ϱ(s) = p_s ρ_s` with a utility
//! `σ(s, a) ∈ [0, 1]`. The selective value is `max_a ||O(a)||` where
//! `O(a) = Σ_s σ(s, a) ρ^{-1/2} ϱ(s) ρ^{-1/2}` and `ρ = Σ_s ϱ(s)`.

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::bounds::{relative_entropy, BoundsError};
use crate::linalg::{partial_trace, tensor, Factor, LinalgError, Op2, Op4, Operator, C64};
use crate::quantum::{random_mixed_state, DensityMatrix, QubitPair, StateLabel};
use crate::rng::RngStream;

/// Smallest eigenvalue of `ρ` accepted before inverting its square root.
pub const RANK_FLOOR: f64 = 1e-9;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("ensemble weights must lie in (0, 1] and sum to 1")]
    InvalidWeights,
    #[error("reduced state is rank deficient (min eigenvalue {0:.3e})")]
    RankDeficient(f64),
    #[error("utility table must be {rows} x {cols} with entries in [0, 1]")]
    InvalidUtility { rows: usize, cols: usize },
    #[error("projection operator {0} is not positive semidefinite")]
    NotPsd(usize),
    #[error("projection operators do not sum to the identity (deviation {0:.3e})")]
    NotComplete(f64),
    #[error("projection has {got} operators, game has {expected} answers")]
    AnswerCount { expected: usize, got: usize },
    #[error("projection assigns zero total probability")]
    ZeroMass,
    #[error("threshold {gamma} is below the mean block value {delta}")]
    BelowMean { gamma: f64, delta: f64 },
    #[error("measurement is not a projective two-outcome measurement")]
    NotProjective,
    #[error("no block values given")]
    Empty,
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone)]
pub struct IndexedEnsemble<const D: usize> {
    weights: Vec<f64>,
    states: Vec<DensityMatrix<D>>,
    reduced: Operator<D>,
    reduced_inv_sqrt: Operator<D>,
}

impl<const D: usize> IndexedEnsemble<D> {
    pub fn new(entries: Vec<(f64, DensityMatrix<D>)>) -> Result<Self, GameError> {
        if entries.is_empty() || entries.iter().any(|(p, _)| !(*p > 0.0 && *p <= 1.0)) {
            return Err(GameError::InvalidWeights);
        }
        if (entries.iter().map(|(p, _)| p).sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(GameError::InvalidWeights);
        }
        let reduced = entries.iter().fold(Operator::zero(), |acc, (p, s)| acc + s.operator().scale(*p));
        let min = reduced.hermitian_eigen()?.min_value();
        if min <= RANK_FLOOR {
            return Err(GameError::RankDeficient(min));
        }
        let reduced_inv_sqrt = reduced.inverse_sqrt(RANK_FLOOR)?;
        let (weights, states) = entries.into_iter().unzip();
        Ok(Self { weights, states, reduced, reduced_inv_sqrt })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, s: usize) -> f64 {
        self.weights[s]
    }

    pub fn state(&self, s: usize) -> &DensityMatrix<D> {
        &self.states[s]
    }

    /// `ϱ(s) = p_s ρ_s`.
    pub fn sub_state(&self, s: usize) -> Operator<D> {
        self.states[s].operator().scale(self.weights[s])
    }

    /// `ρ = Σ_s ϱ(s)`.
    pub fn reduced(&self) -> &Operator<D> {
        &self.reduced
    }
}

/// Dense utility table `σ[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityFunction {
    answers: Vec<String>,
    table: Vec<Vec<f64>>,
}

impl UtilityFunction {
    pub fn new(answers: Vec<String>, table: Vec<Vec<f64>>) -> Result<Self, GameError> {
        let cols = answers.len();
        let bad = cols == 0
            || table.iter().any(|row| row.len() != cols || row.iter().any(|v| !(0.0..=1.0).contains(v)));
        if bad {
            return Err(GameError::InvalidUtility { rows: table.len(), cols });
        }
        Ok(Self { answers, table })
    }

    pub fn answers(&self) -> &[String] {
        &self.answers
    }

    pub fn value(&self, s: usize, a: usize) -> f64 {
        self.table[s][a]
    }

    pub fn indices(&self) -> usize {
        self.table.len()
    }
}

#[derive(Debug, Clone)]
pub struct Wqrg<const D: usize> {
    ensemble: IndexedEnsemble<D>,
    utility: UtilityFunction,
}

/// Answer-indexed positive operators. Physical projections also sum to `𝟙`.
#[derive(Debug, Clone)]
pub struct SelectiveProjection<const D: usize> {
    operators: Vec<Operator<D>>,
}

impl<const D: usize> SelectiveProjection<D> {
    pub fn new(operators: Vec<Operator<D>>) -> Result<Self, GameError> {
        for (i, op) in operators.iter().enumerate() {
            if !op.is_hermitian(PSD_TOL) || op.hermitian_eigen()?.min_value() < -PSD_TOL {
                return Err(GameError::NotPsd(i));
            }
        }
        Ok(Self { operators })
    }

    pub fn physical(operators: Vec<Operator<D>>) -> Result<Self, GameError> {
        let p = Self::new(operators)?;
        let dev = p.completeness_error();
        if dev > PSD_TOL {
            return Err(GameError::NotComplete(dev));
        }
        Ok(p)
    }

    pub fn operators(&self) -> &[Operator<D>] {
        &self.operators
    }

    pub fn completeness_error(&self) -> f64 {
        self.operators.iter().fold(Operator::zero(), |acc, p| acc + *p).max_abs_diff(&Operator::identity())
    }
}

/// Selective value with the maximizing answer and a witness projection
/// attaining it.
#[derive(Debug, Clone)]
pub struct SelectiveValue<const D: usize> {
    pub value: f64,
    pub answer: usize,
    /// Projector onto the top eigenspace of `O(answer)`.
    pub top_projector: Operator<D>,
    pub witness: SelectiveProjection<D>,
}

impl<const D: usize> Wqrg<D> {
    pub fn new(ensemble: IndexedEnsemble<D>, utility: UtilityFunction) -> Result<Self, GameError> {
        if utility.indices() != ensemble.len() {
            return Err(GameError::InvalidUtility { rows: utility.indices(), cols: utility.answers.len() });
        }
        Ok(Self { ensemble, utility })
    }

    pub fn ensemble(&self) -> &IndexedEnsemble<D> {
        &self.ensemble
    }

    pub fn utility(&self) -> &UtilityFunction {
        &self.utility
    }

    pub fn answers(&self) -> usize {
        self.utility.answers.len()
    }

    /// `O(a) = Σ_s σ(s, a) ρ^{-1/2} ϱ(s) ρ^{-1/2}`.
    pub fn o_operator(&self, a: usize) -> Operator<D> {
        let w = &self.ensemble.reduced_inv_sqrt;
        (0..self.ensemble.len()).fold(Operator::zero(), |acc, s| {
            let u = self.utility.value(s, a);
            if u == 0.0 {
                acc
            } else {
                acc + self.ensemble.sub_state(s).conjugate_by(w).scale(u)
            }
        })
    }

    pub fn selective_value(&self) -> Result<SelectiveValue<D>, GameError> {
        let mut best: Option<(f64, usize, Operator<D>)> = None;
        for a in 0..self.answers() {
            let eig = self.o_operator(a).hermitian_eigen()?;
            let top = eig.max_value();
            if best.as_ref().is_none_or(|(v, _, _)| top > *v + 1e-14) {
                best = Some((top, a, eig.top_eigenspace_projector(1e-9)));
            }
        }
        let (value, answer, top_projector) = best.expect("at least one answer");
        let w = &self.ensemble.reduced_inv_sqrt;
        let mut ops = vec![Operator::zero(); self.answers()];
        ops[answer] = top_projector.conjugate_by(w).hermitian_part();
        Ok(SelectiveValue { value, answer, top_projector, witness: SelectiveProjection { operators: ops } })
    }

    /// Joint distribution `p(s, a) ∝ Tr[P(a) ϱ(s)]`, normalized.
    pub fn induced_distribution(&self, p: &SelectiveProjection<D>) -> Result<Vec<Vec<f64>>, GameError> {
        if p.operators.len() != self.answers() {
            return Err(GameError::AnswerCount { expected: self.answers(), got: p.operators.len() });
        }
        let mut dist: Vec<Vec<f64>> = (0..self.ensemble.len())
            .map(|s| {
                let rho = self.ensemble.sub_state(s);
                p.operators.iter().map(|op| op.trace_product(&rho).re.max(0.0)).collect()
            })
            .collect();
        let z: f64 = dist.iter().flatten().sum();
        if z <= 1e-15 {
            return Err(GameError::ZeroMass);
        }
        dist.iter_mut().flatten().for_each(|v| *v /= z);
        Ok(dist)
    }

    /// Expected utility under the distribution induced by `p`.
    pub fn value_wrt_projection(&self, p: &SelectiveProjection<D>) -> Result<f64, GameError> {
        let dist = self.induced_distribution(p)?;
        Ok(dist
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().enumerate().map(move |(a, v)| (s, a, *v)))
            .map(|(s, a, v)| v * self.utility.value(s, a))
            .sum())
    }
}

/// Anything with a computable selective value.
pub trait Game: Send + Sync {
    fn selective_value(&self) -> Result<f64, GameError>;
}

impl<const D: usize> Game for Wqrg<D> {
    fn selective_value(&self) -> Result<f64, GameError> {
        Wqrg::selective_value(self).map(|v| v.value)
    }
}

/// Tensor product of games, valued without materializing the product space.
pub struct ProductGame {
    factors: Vec<Box<dyn Game>>,
}

impl ProductGame {
    pub fn factors(&self) -> usize {
        self.factors.len()
    }
}

impl Game for ProductGame {
    fn selective_value(&self) -> Result<f64, GameError> {
        self.factors.iter().try_fold(1.0, |acc, g| Ok(acc * g.selective_value()?))
    }
}

pub fn tensor_product(g1: impl Game + 'static, g2: impl Game + 'static) -> ProductGame {
    ProductGame { factors: vec![Box::new(g1), Box::new(g2)] }
}

/// Materialized two-qubit product game. Index `s = s1 |S2| + s2`, answer
/// `a = a1 |A2| + a2`.
pub fn tensor_product_materialized(g1: &Wqrg<2>, g2: &Wqrg<2>) -> Result<Wqrg<4>, GameError> {
    let (e1, e2) = (&g1.ensemble, &g2.ensemble);
    let mut entries = Vec::with_capacity(e1.len() * e2.len());
    let mut table = Vec::with_capacity(e1.len() * e2.len());
    for s1 in 0..e1.len() {
        for s2 in 0..e2.len() {
            let st = tensor(e1.state(s1).operator(), e2.state(s2).operator());
            entries.push((e1.weight(s1) * e2.weight(s2), QubitPair::new(st).map_err(|_| GameError::InvalidWeights)?));
            let mut row = Vec::with_capacity(g1.answers() * g2.answers());
            for a1 in 0..g1.answers() {
                for a2 in 0..g2.answers() {
                    row.push(g1.utility.value(s1, a1) * g2.utility.value(s2, a2));
                }
            }
            table.push(row);
        }
    }
    let answers = g1
        .utility
        .answers
        .iter()
        .flat_map(|a1| g2.utility.answers.iter().map(move |a2| format!("{a1}{a2}")))
        .collect();
    Wqrg::new(IndexedEnsemble::new(entries)?, UtilityFunction::new(answers, table)?)
}

/// Restriction to the first factor: `P|1(a1) = Σ_{a2} Tr_2[P(a1, a2)(𝟙 ⊗ ρ2)]`
/// with `ρ2` the reduced state of the second game.
pub fn restriction(p: &SelectiveProjection<4>, g2: &Wqrg<2>) -> Result<SelectiveProjection<2>, GameError> {
    let k = g2.answers();
    if !p.operators.len().is_multiple_of(k) {
        return Err(GameError::AnswerCount { expected: k, got: p.operators.len() });
    }
    let lift = tensor(&Op2::identity(), g2.ensemble.reduced());
    let ops = p
        .operators
        .chunks(k)
        .map(|chunk| {
            chunk
                .iter()
                .fold(Op2::zero(), |acc, op| acc + partial_trace(&op.matmul(&lift), Factor::Second))
                .hermitian_part()
        })
        .collect();
    SelectiveProjection::new(ops)
}

/// `2 exp(-n D(γ || δ))` with `δ` the mean block value.
pub fn threshold_game_bound(block_values: &[f64], gamma: f64) -> Result<f64, GameError> {
    if block_values.is_empty() {
        return Err(GameError::Empty);
    }
    let n = block_values.len() as f64;
    let delta = block_values.iter().sum::<f64>() / n;
    if gamma < delta {
        return Err(GameError::BelowMean { gamma, delta });
    }
    Ok(2.0 * (-n * relative_entropy(gamma, delta)?).exp())
}

/// The four two-qubit building-block games.
#[derive(Debug, Clone)]
pub struct CvPairGames {
    pub x: Wqrg<4>,
    pub z: Wqrg<4>,
    pub and: Wqrg<4>,
    pub avg: Wqrg<4>,
}

impl CvPairGames {
    /// Same question twice (value `Sel(G_Z)`) or complementary questions
    /// (value `Sel(G_avg)`), each with probability 1/2.
    pub fn mixed_average(&self) -> Result<f64, GameError> {
        Ok(0.5 * Game::selective_value(&self.z)? + 0.5 * Game::selective_value(&self.avg)?)
    }
}

fn bit_answers(x_style: bool) -> Vec<String> {
    let sym = |b: usize| match (x_style, b) {
        (true, 0) => '+',
        (true, _) => '-',
        (false, 0) => '0',
        (false, _) => '1',
    };
    (0..4).map(|a| format!("{}{}", sym(a >> 1), sym(a & 1))).collect()
}

/// Games over the eight pair states, each with weight 1/8. Plain answers are
/// two bits (one per qubit); `G_∧` and `G_avg` answers are an X answer
/// followed by a Z answer, such as `"++00"`.
pub fn build_cv_pair_games() -> Result<CvPairGames, GameError> {
    use crate::cv::PairLabel;
    use crate::quantum::Axis;

    let ensemble = IndexedEnsemble::new(
        PairLabel::ALL
            .iter()
            .map(|p| {
                let [a, b] = p.labels();
                (1.0 / 8.0, QubitPair::new(tensor(&a.projector(), &b.projector())).expect("product of projectors"))
            })
            .collect(),
    )?;
    // correctness of a two-bit answer on the member prepared along `axis`
    let correct = |p: PairLabel, axis: Axis, ans: usize| -> f64 {
        let pos = p.position(axis).expect("X or Z");
        let bit = if pos == 0 { ans >> 1 } else { ans & 1 };
        f64::from(u8::from(bit as u8 == p.labels()[pos].bit()))
    };
    let single = |axis: Axis| -> Vec<Vec<f64>> {
        PairLabel::ALL.iter().map(|p| (0..4).map(|a| correct(*p, axis, a)).collect()).collect()
    };
    let combined = |f: fn(f64, f64) -> f64| -> Vec<Vec<f64>> {
        PairLabel::ALL
            .iter()
            .map(|p| (0..16).map(|a| f(correct(*p, Axis::X, a >> 2), correct(*p, Axis::Z, a & 3))).collect())
            .collect()
    };
    let pair_answers: Vec<String> = bit_answers(true)
        .iter()
        .flat_map(|x| bit_answers(false).into_iter().map(move |z| format!("{x}{z}")))
        .collect();
    let game = |answers: Vec<String>, table| Wqrg::new(ensemble.clone(), UtilityFunction::new(answers, table)?);
    Ok(CvPairGames {
        x: game(bit_answers(true), single(Axis::X))?,
        z: game(bit_answers(false), single(Axis::Z))?,
        and: game(pair_answers.clone(), combined(|x, z| x * z))?,
        avg: game(pair_answers, combined(|x, z| 0.5 * (x + z)))?,
    })
}

/// Physical projection measuring both qubits along `axis`; answer index
/// `2 b1 + b2` for reported bits `b1, b2`.
pub fn product_basis_measurement(axis: crate::quantum::Axis) -> SelectiveProjection<4> {
    let plus = StateLabel::new(axis, false);
    let labels = [plus, plus.orthogonal()];
    let ops = (0..4).map(|a| tensor(&labels[a >> 1].projector(), &labels[a & 1].projector())).collect();
    SelectiveProjection { operators: ops }
}

fn gaussian_matrix<const D: usize>(rng: &mut RngStream) -> Operator<D> {
    let mut m = Operator::<D>::zero();
    for r in 0..D {
        for c in 0..D {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            m[(r, c)] = C64::new(re, im);
        }
    }
    m
}

fn random_psd<const D: usize>(rng: &mut RngStream) -> Operator<D> {
    let m = gaussian_matrix::<D>(rng);
    m.matmul(&m.adjoint()).hermitian_part()
}

/// Random complete measurement: `S^{-1/2} G_a S^{-1/2}` with `S = Σ G_a`.
pub fn random_physical_projection<const D: usize>(
    answers: usize,
    rng: &mut RngStream,
) -> Result<SelectiveProjection<D>, GameError> {
    let gs: Vec<Operator<D>> = (0..answers).map(|_| random_psd(rng)).collect();
    let s = gs.iter().fold(Operator::zero(), |acc, g| acc + *g);
    let w = s.inverse_sqrt(RANK_FLOOR)?;
    SelectiveProjection::physical(gs.iter().map(|g| g.conjugate_by(&w).hermitian_part()).collect())
}

/// Random positive operators with no completeness constraint; some answers
/// are switched off so that post-selection is exercised.
pub fn random_selective_projection<const D: usize>(
    answers: usize,
    rng: &mut RngStream,
) -> Result<SelectiveProjection<D>, GameError> {
    let keep = rng.below(answers);
    let ops = (0..answers)
        .map(|a| if a == keep || rng.bernoulli(0.5) { random_psd(rng) } else { Operator::zero() })
        .collect();
    SelectiveProjection::new(ops)
}

/// Random game with full-rank mixed states and a random utility table.
pub fn random_game<const D: usize>(
    indices: usize,
    answers: usize,
    rng: &mut RngStream,
) -> Result<Wqrg<D>, GameError> {
    loop {
        let raw: Vec<f64> = (0..indices).map(|_| 0.05 + rng.uniform()).collect();
        let total: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let head: f64 = weights[..indices - 1].iter().sum();
        weights[indices - 1] = 1.0 - head;
        let entries = weights.into_iter().map(|w| (w, random_mixed_state::<D>(rng))).collect();
        let table = (0..indices).map(|_| (0..answers).map(|_| rng.uniform()).collect()).collect();
        let names = (0..answers).map(|a| a.to_string()).collect();
        match IndexedEnsemble::new(entries) {
            Ok(e) => return Wqrg::new(e, UtilityFunction::new(names, table)?),
            Err(GameError::RankDeficient(_) | GameError::InvalidWeights) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Result of checking that two nearly perfect extractions compose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplexReport {
    pub epsilon: f64,
    pub min_joint_success: f64,
    pub bound: f64,
    pub holds: bool,
}

fn check_projective(p: &[Op4; 2]) -> Result<(), GameError> {
    let sum = p[0] + p[1];
    let ok = sum.max_abs_diff(&Op4::identity()) <= PSD_TOL
        && p.iter().all(|q| q.is_hermitian(PSD_TOL) && q.matmul(q).max_abs_diff(q) <= 1e-9);
    if ok {
        Ok(())
    } else {
        Err(GameError::NotProjective)
    }
}

/// `states[α][β]` is the state encoding bits `α` and `β`; `pa[α]` extracts `α`
/// and `pb[β]` extracts `β`. `ε` is the largest extraction shortfall over all
/// cells and both measurements; the check is
/// `min Tr[P^a_α P^b_β P^a_α ρ_{αβ}] >= 1 - 2ε - 2 sqrt ε`.
pub fn multiplex_sequential_check(
    states: &[[QubitPair; 2]; 2],
    pa: &[Op4; 2],
    pb: &[Op4; 2],
) -> Result<MultiplexReport, GameError> {
    check_projective(pa)?;
    check_projective(pb)?;
    let mut epsilon = 0.0f64;
    let mut min_joint = f64::INFINITY;
    for (alpha, row) in states.iter().enumerate() {
        for (beta, rho) in row.iter().enumerate() {
            let rho = rho.operator();
            epsilon = epsilon.max(1.0 - pa[alpha].trace_product(rho).re);
            epsilon = epsilon.max(1.0 - pb[beta].trace_product(rho).re);
            let seq = pa[alpha].matmul(&pb[beta]).matmul(&pa[alpha]);
            min_joint = min_joint.min(seq.trace_product(rho).re);
        }
    }
    let epsilon = epsilon.max(0.0);
    let bound = 1.0 - 2.0 * epsilon - 2.0 * epsilon.sqrt();
    Ok(MultiplexReport { epsilon, min_joint_success: min_joint, bound, holds: min_joint >= bound - 1e-12 })
}

pub type MultiplexInstance = ([[QubitPair; 2]; 2], [Op4; 2], [Op4; 2]);

/// `ρ_{αβ} = |α><α| ⊗ |β><β|` with the factor measurements: `ε = 0`.
pub fn commuting_instance() -> MultiplexInstance {
    let z = [StateLabel::ZPlus.projector(), StateLabel::ZMinus.projector()];
    let one = Op2::identity();
    let states = [0, 1].map(|a| [0, 1].map(|b| QubitPair::new(tensor(&z[a], &z[b])).expect("product state")));
    (states, [tensor(&z[0], &one), tensor(&z[1], &one)], [tensor(&one, &z[0]), tensor(&one, &z[1])])
}

/// `exp(i t H)` for Hermitian `H`.
pub fn unitary_from_hermitian<const D: usize>(h: &Operator<D>, t: f64) -> Result<Operator<D>, GameError> {
    let eig = h.hermitian_eigen()?;
    let mut u = Operator::<D>::zero();
    for k in 0..D {
        let v = eig.vector(k);
        let phase = C64::from_polar(1.0, t * eig.values[k]);
        u += Operator::outer(&v).scale_complex(phase);
    }
    Ok(u)
}

/// The commuting instance with the states and both measurements rotated by
/// independent unitaries `exp(i t H)`, `H` random Hermitian, `t <= t_max`.
pub fn near_commuting_instance(t_max: f64, rng: &mut RngStream) -> Result<MultiplexInstance, GameError> {
    let (states, pa, pb) = commuting_instance();
    let rot = |rng: &mut RngStream| -> Result<Op4, GameError> {
        let h = gaussian_matrix::<4>(rng).hermitian_part();
        unitary_from_hermitian(&h, t_max * rng.uniform())
    };
    let us = rot(rng)?;
    let ua = rot(rng)?;
    let ub = rot(rng)?;
    let states = states.map(|row| row.map(|s| QubitPair::new(s.operator().conjugate_by(&us).hermitian_part()).unwrap()));
    Ok((states, pa.map(|p| p.conjugate_by(&ua).hermitian_part()), pb.map(|p| p.conjugate_by(&ub).hermitian_part())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::Axis;

    fn closed_avg() -> f64 {
        0.5 + 1.0 / 8f64.sqrt()
    }

    #[test]
    fn pair_game_constants() {
        let g = build_cv_pair_games().unwrap();
        for game in [&g.x, &g.z, &g.and, &g.avg] {
            assert!(game.ensemble().reduced().max_abs_diff(&Op4::identity().scale(0.25)) < 1e-12);
            for s in 0..8 {
                assert!((game.ensemble().sub_state(s).trace().re - 0.125).abs() < 1e-15);
            }
        }
        let v = |w: &Wqrg<4>| w.selective_value().unwrap();
        assert!((v(&g.z).value - 1.0).abs() < 1e-9);
        assert!((v(&g.x).value - 1.0).abs() < 1e-9);
        assert!((v(&g.and).value - 0.75).abs() < 1e-9);
        assert!((v(&g.avg).value - closed_avg()).abs() < 1e-9);
        assert_eq!(g.z.utility().answers()[v(&g.z).answer].len(), 2);
        assert!((g.mixed_average().unwrap() - (0.75 + 2f64.sqrt() / 8.0)).abs() < 1e-9);
    }

    #[test]
    fn physical_values_of_single_question_games() {
        let g = build_cv_pair_games().unwrap();
        assert!((g.z.value_wrt_projection(&product_basis_measurement(Axis::Z)).unwrap() - 1.0).abs() < 1e-12);
        assert!((g.x.value_wrt_projection(&product_basis_measurement(Axis::X)).unwrap() - 1.0).abs() < 1e-12);
        let uniform = SelectiveProjection::physical(vec![Op4::identity().scale(0.25); 4]).unwrap();
        assert!((g.z.value_wrt_projection(&uniform).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn witness_attains_selective_value() {
        let g = build_cv_pair_games().unwrap();
        for game in [&g.x, &g.z, &g.and, &g.avg] {
            let sv = game.selective_value().unwrap();
            assert!((game.value_wrt_projection(&sv.witness).unwrap() - sv.value).abs() < 1e-9);
        }
    }

    #[test]
    fn product_values_multiply() {
        let g = build_cv_pair_games().unwrap();
        let zz = tensor_product(g.z.clone(), g.z.clone());
        assert!((Game::selective_value(&zz).unwrap() - 1.0).abs() < 1e-12);
        let aa = tensor_product(g.avg.clone(), g.avg.clone());
        assert!((Game::selective_value(&aa).unwrap() - closed_avg().powi(2)).abs() < 1e-9);
    }

    #[test]
    fn threshold_bound_examples() {
        assert!((threshold_game_bound(&[0.6, 0.6], 0.6).unwrap() - 2.0).abs() < 1e-15);
        assert!((threshold_game_bound(&[0.5], 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(threshold_game_bound(&[0.7], 0.6).is_err());
        assert!(threshold_game_bound(&[], 0.6).is_err());
    }

    #[test]
    fn rank_deficient_ensemble_is_rejected() {
        let e = IndexedEnsemble::new(vec![(1.0, StateLabel::ZPlus.density())]);
        assert!(matches!(e, Err(GameError::RankDeficient(_))));
        let w = IndexedEnsemble::new(vec![(0.7, StateLabel::ZPlus.density()), (0.7, StateLabel::ZMinus.density())]);
        assert!(matches!(w, Err(GameError::InvalidWeights)));
    }

    #[test]
    fn multiplex_commuting_case_saturates() {
        let (s, pa, pb) = commuting_instance();
        let r = multiplex_sequential_check(&s, &pa, &pb).unwrap();
        assert!(r.epsilon.abs() < 1e-12);
        assert!((r.min_joint_success - 1.0).abs() < 1e-12);
        assert!((r.bound - 1.0).abs() < 1e-12);
        assert!(r.holds);
        let bad = [Op4::identity().scale(0.5), Op4::identity().scale(0.5)];
        assert!(matches!(multiplex_sequential_check(&s, &bad, &pb), Err(GameError::NotProjective)));
    }

    #[test]
    fn unitary_is_unitary() {
        let mut rng = RngStream::new(1);
        let h = gaussian_matrix::<4>(&mut rng).hermitian_part();
        let u = unitary_from_hermitian(&h, 0.7).unwrap();
        assert!(u.matmul(&u.adjoint()).max_abs_diff(&Op4::identity()) < 1e-12);
    }
}
