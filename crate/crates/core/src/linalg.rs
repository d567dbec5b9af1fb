//! Small dense complex matrices.
//!
//! Everything in the simulator lives on one or two qubits, so operators are
//! stack-allocated `D x D` arrays with the dimension fixed at compile time.
//! Hermitian eigenproblems use a closed form for `D = 2` and cyclic complex
//! Jacobi rotations otherwise.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default tolerance for Hermiticity checks on operator inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is singular or not positive definite (min eigenvalue {0:.3e})")]
    Singular(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A `D x D` complex matrix in row-major order.
#[derive(Clone, Copy, PartialEq)]
pub struct Operator<const D: usize> {
    m: [[C64; D]; D],
}

pub type Op2 = Operator<2>;
pub type Op4 = Operator<4>;

impl<const D: usize> Default for Operator<D> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<const D: usize> fmt::Debug for Operator<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator<{D}> [")?;
        for row in &self.m {
            write!(f, "  ")?;
            for z in row {
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<const D: usize> Index<(usize, usize)> for Operator<D> {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.m[r][c]
    }
}

impl<const D: usize> IndexMut<(usize, usize)> for Operator<D> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.m[r][c]
    }
}

impl<const D: usize> Operator<D> {
    pub const DIM: usize = D;

    pub fn zero() -> Self {
        Self { m: [[ZERO; D]; D] }
    }

    pub fn identity() -> Self {
        let mut out = Self::zero();
        for i in 0..D {
            out.m[i][i] = ONE;
        }
        out
    }

    pub fn from_rows(m: [[C64; D]; D]) -> Self {
        Self { m }
    }

    pub fn from_real(m: [[f64; D]; D]) -> Self {
        let mut out = Self::zero();
        for r in 0..D {
            for c in 0..D {
                out.m[r][c] = C64::new(m[r][c], 0.0);
            }
        }
        out
    }

    /// Builds an operator from a row-major slice of `D * D` entries.
    pub fn from_slice(entries: &[C64]) -> Result<Self, LinalgError> {
        if entries.len() != D * D {
            return Err(LinalgError::DimensionMismatch { expected: D * D, got: entries.len() });
        }
        let mut out = Self::zero();
        for (k, z) in entries.iter().enumerate() {
            out.m[k / D][k % D] = *z;
        }
        Ok(out)
    }

    pub fn diagonal(values: [f64; D]) -> Self {
        let mut out = Self::zero();
        for i in 0..D {
            out.m[i][i] = C64::new(values[i], 0.0);
        }
        out
    }

    /// `|v><v|` for a (not necessarily normalized) vector.
    pub fn outer(v: &[C64; D]) -> Self {
        let mut out = Self::zero();
        for r in 0..D {
            for c in 0..D {
                out.m[r][c] = v[r] * v[c].conj();
            }
        }
        out
    }

    pub fn rows(&self) -> &[[C64; D]; D] {
        &self.m
    }

    pub fn to_vec(&self) -> Vec<C64> {
        self.m.iter().flatten().copied().collect()
    }

    pub fn trace(&self) -> C64 {
        (0..D).map(|i| self.m[i][i]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for r in 0..D {
            for c in 0..D {
                out.m[c][r] = self.m[r][c].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for z in row.iter_mut() {
                *z *= s;
            }
        }
        out
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for z in row.iter_mut() {
                *z *= s;
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let mut out = Self::zero();
        for r in 0..D {
            for k in 0..D {
                let a = self.m[r][k];
                if a == ZERO {
                    continue;
                }
                for c in 0..D {
                    out.m[r][c] += a * rhs.m[k][c];
                }
            }
        }
        out
    }

    /// `A B A†`.
    pub fn conjugate_by(&self, a: &Self) -> Self {
        a.matmul(self).matmul(&a.adjoint())
    }

    /// `Tr[A B]` without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> C64 {
        let mut acc = ZERO;
        for r in 0..D {
            for k in 0..D {
                acc += self.m[r][k] * rhs.m[k][r];
            }
        }
        acc
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..D {
            for c in 0..D {
                worst = worst.max((self.m[r][c] - rhs.m[r][c]).norm());
            }
        }
        worst
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale(0.5)
    }

    pub fn apply(&self, v: &[C64; D]) -> [C64; D] {
        let mut out = [ZERO; D];
        for r in 0..D {
            for c in 0..D {
                out[r] += self.m[r][c] * v[c];
            }
        }
        out
    }

    /// `<v|A|v>` (real part, meaningful for Hermitian `A`).
    pub fn expectation(&self, v: &[C64; D]) -> f64 {
        let av = self.apply(v);
        (0..D).map(|i| v[i].conj() * av[i]).sum::<C64>().re
    }

    /// Eigen-decomposition of a Hermitian operator.
    pub fn hermitian_eigen(&self) -> Result<HermitianEigen<D>, LinalgError> {
        let err = self.hermiticity_error();
        if err > HERMITIAN_TOL {
            return Err(LinalgError::NotHermitian(err));
        }
        let h = self.hermitian_part();
        Ok(if D == 2 { eigen_closed_form(&h) } else { eigen_jacobi(&h) })
    }

    /// Operator norm (largest eigenvalue magnitude) of a Hermitian operator.
    pub fn hermitian_opnorm(&self) -> Result<f64, LinalgError> {
        let eig = self.hermitian_eigen()?;
        Ok(eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    /// `A^{-1/2}` for a positive definite Hermitian operator; eigenvalues
    /// below `floor` are rejected.
    pub fn inverse_sqrt(&self, floor: f64) -> Result<Self, LinalgError> {
        let eig = self.hermitian_eigen()?;
        let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < floor {
            return Err(LinalgError::Singular(min));
        }
        Ok(eig.map_values(|x| x.powf(-0.5)))
    }

    /// `A^{1/2}` for a positive semidefinite Hermitian operator.
    pub fn sqrt_psd(&self) -> Result<Self, LinalgError> {
        let eig = self.hermitian_eigen()?;
        Ok(eig.map_values(|x| x.max(0.0).sqrt()))
    }
}

impl<const D: usize> Add for Operator<D> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const D: usize> AddAssign for Operator<D> {
    fn add_assign(&mut self, rhs: Self) {
        for r in 0..D {
            for c in 0..D {
                self.m[r][c] += rhs.m[r][c];
            }
        }
    }
}

impl<const D: usize> Sub for Operator<D> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for r in 0..D {
            for c in 0..D {
                self.m[r][c] -= rhs.m[r][c];
            }
        }
        self
    }
}

impl<const D: usize> Neg for Operator<D> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const D: usize> Mul for Operator<D> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.matmul(&rhs)
    }
}

impl<const D: usize> Mul<f64> for Operator<D> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

/// Eigenvalues (ascending) and the unitary whose columns are the eigenvectors.
#[derive(Debug, Clone, Copy)]
pub struct HermitianEigen<const D: usize> {
    pub values: [f64; D],
    pub vectors: Operator<D>,
}

impl<const D: usize> HermitianEigen<D> {
    pub fn vector(&self, k: usize) -> [C64; D] {
        let mut v = [ZERO; D];
        for (r, slot) in v.iter_mut().enumerate() {
            *slot = self.vectors[(r, k)];
        }
        v
    }

    pub fn max_value(&self) -> f64 {
        self.values[D - 1]
    }

    pub fn min_value(&self) -> f64 {
        self.values[0]
    }

    /// `V f(Λ) V†`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Operator<D> {
        let mut out = Operator::zero();
        for k in 0..D {
            let w = f(self.values[k]);
            if w == 0.0 {
                continue;
            }
            for r in 0..D {
                let vr = self.vectors[(r, k)] * w;
                for c in 0..D {
                    out[(r, c)] += vr * self.vectors[(c, k)].conj();
                }
            }
        }
        out
    }

    /// Projector onto the span of eigenvectors whose eigenvalue is within
    /// `tol` of the largest one.
    pub fn top_eigenspace_projector(&self, tol: f64) -> Operator<D> {
        let top = self.max_value();
        self.map_values(|x| if top - x <= tol { 1.0 } else { 0.0 })
    }
}

fn eigen_closed_form<const D: usize>(h: &Operator<D>) -> HermitianEigen<D> {
    debug_assert_eq!(D, 2);
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let b = h[(0, 1)];
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let radius = (half * half + b.norm_sqr()).sqrt();
    let mut values = [0.0; D];
    values[0] = mean - radius;
    values[1] = mean + radius;

    let mut vectors = Operator::<D>::zero();
    if b.norm() <= 1e-300 {
        // already diagonal; order ascending
        if a <= d {
            vectors[(0, 0)] = ONE;
            vectors[(1, 1)] = ONE;
        } else {
            vectors[(1, 0)] = ONE;
            vectors[(0, 1)] = ONE;
        }
        return HermitianEigen { values, vectors };
    }
    // (H - λ) v = 0 with v = (b, λ - a) or (λ - d, conj b), whichever is better conditioned
    for (k, lambda) in values.clone().into_iter().enumerate() {
        let v1 = [b, C64::new(lambda - a, 0.0)];
        let v2 = [C64::new(lambda - d, 0.0), b.conj()];
        let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
        let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
        let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
        let n = n.sqrt();
        vectors[(0, k)] = v[0] / n;
        vectors[(1, k)] = v[1] / n;
    }
    HermitianEigen { values, vectors }
}

fn off_diagonal_norm<const D: usize>(a: &Operator<D>) -> f64 {
    let mut s = 0.0;
    for p in 0..D {
        for q in (p + 1)..D {
            s += a[(p, q)].norm_sqr();
        }
    }
    s.sqrt()
}

fn frobenius<const D: usize>(a: &Operator<D>) -> f64 {
    a.rows().iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn eigen_jacobi<const D: usize>(h: &Operator<D>) -> HermitianEigen<D> {
    let mut a = *h;
    let mut v = Operator::<D>::identity();
    let scale = frobenius(h).max(1e-300);

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOL * scale * 1e-3 {
            break;
        }
        for p in 0..D {
            for q in (p + 1)..D {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = 0.5 * (2.0 * mag).atan2(app - aqq);
                let (s, c) = theta.sin_cos();
                // J = diag(1, e^{-i phi}) R(theta), columns (c, s e^{-i phi}) and (-s, c e^{-i phi})
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(-s, 0.0);
                let jqp = phase.conj() * s;
                let jqq = phase.conj() * c;
                // A <- A J (columns p, q)
                for r in 0..D {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = arp * jpp + arq * jqp;
                    a[(r, q)] = arp * jpq + arq * jqq;
                }
                // A <- J† A (rows p, q)
                for col in 0..D {
                    let apc = a[(p, col)];
                    let aqc = a[(q, col)];
                    a[(p, col)] = jpp.conj() * apc + jqp.conj() * aqc;
                    a[(q, col)] = jpq.conj() * apc + jqq.conj() * aqc;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                for r in 0..D {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp * jpp + vrq * jqp;
                    v[(r, q)] = vrp * jpq + vrq * jqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..D).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let mut values = [0.0; D];
    let mut vectors = Operator::<D>::zero();
    for (k, &src) in order.iter().enumerate() {
        values[k] = a[(src, src)].re;
        for r in 0..D {
            vectors[(r, k)] = v[(r, src)];
        }
    }
    HermitianEigen { values, vectors }
}

/// Kronecker product of two single-qubit operators.
pub fn tensor(a: &Op2, b: &Op2) -> Op4 {
    let mut out = Op4::zero();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Which tensor factor of a two-qubit operator to trace out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Partial trace of a two-qubit operator over the given factor.
pub fn partial_trace(a: &Op4, traced: Factor) -> Op2 {
    let mut out = Op2::zero();
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = match traced {
                Factor::Second => a[(2 * i, 2 * j)] + a[(2 * i + 1, 2 * j + 1)],
                Factor::First => a[(i, j)] + a[(2 + i, 2 + j)],
            };
        }
    }
    out
}

/// `Tr_1[(P ⊗ 𝟙) A]`: the unnormalized state left on the second qubit after
/// the first one is projected onto `P`.
pub fn project_first(a: &Op4, p: &Op2) -> Op2 {
    let mut out = Op2::zero();
    for k in 0..2 {
        for l in 0..2 {
            let mut acc = ZERO;
            for i in 0..2 {
                for j in 0..2 {
                    acc += p[(j, i)] * a[(2 * i + k, 2 * j + l)];
                }
            }
            out[(k, l)] = acc;
        }
    }
    out
}

/// `Tr_2[(𝟙 ⊗ P) A]`: the unnormalized state left on the first qubit.
pub fn project_second(a: &Op4, p: &Op2) -> Op2 {
    let mut out = Op2::zero();
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = ZERO;
            for k in 0..2 {
                for l in 0..2 {
                    acc += p[(l, k)] * a[(2 * i + k, 2 * j + l)];
                }
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Pauli matrices.
pub fn pauli_x() -> Op2 {
    Op2::from_real([[0.0, 1.0], [1.0, 0.0]])
}

pub fn pauli_y() -> Op2 {
    Op2::from_rows([[ZERO, -I], [I, ZERO]])
}

pub fn pauli_z() -> Op2 {
    Op2::from_real([[1.0, 0.0], [0.0, -1.0]])
}

/// Exchanges the two qubit factors.
pub fn swap() -> Op4 {
    let mut swap = Op4::zero();
    for i in 0..2 {
        for j in 0..2 {
            swap[(2 * i + j, 2 * j + i)] = ONE;
        }
    }
    swap
}

/// Projector onto the symmetric subspace of two qubits, `(𝟙 + SWAP)/2`.
pub fn symmetric_projector() -> Op4 {
    (Op4::identity() + swap()).scale(0.5)
}
