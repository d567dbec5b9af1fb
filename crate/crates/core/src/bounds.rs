//! Closed-form tail bounds for qtickets and cv-qtickets.
//!
//! Every bound is returned as a [`BoundReport`] carrying the raw formula value
//! (which may exceed 1) next to its clamp to [0, 1]. Relative entropies are
//! always taken as `D(threshold || true parameter)`, the orientation for which
//! the Chernoff inequality holds.

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("tail orientation violated: need {lower} <= {upper}")]
    Orientation { lower: f64, upper: f64 },
    #[error("insecure-parameters: F_tol = {f_tol} is not above the threshold {threshold}")]
    InsecureParameters { f_tol: f64, threshold: f64 },
    #[error("unsound parameters: F_tol = {f_tol} must be below F_exp = {f_exp}")]
    Unsound { f_tol: f64, f_exp: f64 },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

impl BoundsError {
    pub fn is_insecure(&self) -> bool {
        matches!(self, BoundsError::InsecureParameters { .. })
    }
}

/// Parameters a bound was evaluated at.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qubits: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs_per_block: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_exp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub copies: Option<u64>,
}

/// A bound value together with the pieces of the formula that produced it.
///
/// `exponent` is the relative entropy in the exponent, `scale` the count that
/// multiplies it and `prefactor` the combinatorial factor in front.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub exponent: f64,
    pub scale: f64,
    pub prefactor: f64,
    pub raw: f64,
    pub clamped: f64,
    pub params: BoundParams,
}

impl BoundReport {
    fn new(exponent: f64, scale: f64, prefactor: f64, raw: f64, params: BoundParams) -> Self {
        Self { exponent, scale, prefactor, raw, clamped: raw.clamp(0.0, 1.0), params }
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), BoundsError> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(BoundsError::OutOfRange { name, value });
    }
    Ok(())
}

/// `exp(-scale * d)` with `0 * inf = 0`.
fn decay(scale: f64, d: f64) -> f64 {
    if scale == 0.0 {
        1.0
    } else {
        (-scale * d).exp()
    }
}

/// Binary relative entropy `D(p || q)` in nats.
///
/// Uses `0 ln(0/x) = 0`; returns `+inf` when `q` puts zero mass where `p`
/// does not.
pub fn relative_entropy(p: f64, q: f64) -> Result<f64, BoundsError> {
    check_unit("p", p)?;
    check_unit("q", q)?;
    if p == q {
        return Ok(0.0);
    }
    let mut d = 0.0;
    if p > 0.0 {
        if q == 0.0 {
            return Ok(f64::INFINITY);
        }
        d += p * (p / q).ln();
    }
    if p < 1.0 {
        if q == 1.0 {
            return Ok(f64::INFINITY);
        }
        d += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    }
    Ok(d.max(0.0))
}

/// `C(v, 2)` as a float.
pub fn pairs(v: u64) -> f64 {
    if v < 2 {
        0.0
    } else {
        (v as f64) * (v as f64 - 1.0) / 2.0
    }
}

/// Minimum tolerance fidelity for single-copy qticket security.
pub fn qticket_threshold() -> Ratio<u64> {
    Ratio::new(5, 6)
}

/// Minimum tolerance fidelity for cv-qticket security, `(1 + 1/sqrt 2)/2`.
pub fn cv_threshold() -> f64 {
    0.5 * (1.0 + std::f64::consts::FRAC_1_SQRT_2)
}

/// Upper tail `P[X >= gamma n] <= exp(-n D(gamma || delta))` for `delta <= gamma`.
pub fn chernoff_tail(n: u64, gamma: f64, delta: f64) -> Result<BoundReport, BoundsError> {
    check_unit("gamma", gamma)?;
    check_unit("delta", delta)?;
    if gamma < delta {
        return Err(BoundsError::Orientation { lower: delta, upper: gamma });
    }
    let d = relative_entropy(gamma, delta)?;
    let raw = decay(n as f64, d);
    Ok(BoundReport::new(d, n as f64, 1.0, raw, BoundParams { qubits: Some(n), ..Default::default() }))
}

/// Lower tail `P[X <= gamma n] <= exp(-n D(gamma || delta))` for `gamma <= delta`.
pub fn chernoff_lower_tail(n: u64, gamma: f64, delta: f64) -> Result<BoundReport, BoundsError> {
    check_unit("gamma", gamma)?;
    check_unit("delta", delta)?;
    if gamma > delta {
        return Err(BoundsError::Orientation { lower: gamma, upper: delta });
    }
    let d = relative_entropy(gamma, delta)?;
    let raw = decay(n as f64, d);
    Ok(BoundReport::new(d, n as f64, 1.0, raw, BoundParams { qubits: Some(n), ..Default::default() }))
}

/// Chernoff-Hoeffding bound for dependent `[0,1]`-valued variables whose
/// products have bounded expectation: `2 exp(-n D(gamma || delta))`.
pub fn real_valued_chernoff_tail(n: u64, gamma: f64, delta: f64) -> Result<BoundReport, BoundsError> {
    let mut r = chernoff_tail(n, gamma, delta)?;
    r.prefactor = 2.0;
    r.raw *= 2.0;
    r.clamped = r.raw.clamp(0.0, 1.0);
    Ok(r)
}

/// Lower bound on the probability that an honest holder with average qubit
/// fidelity `f_exp` is accepted: `1 - exp(-N D(F_tol || F_exp))`.
pub fn soundness_bound(n: u64, f_exp: f64, f_tol: f64) -> Result<BoundReport, BoundsError> {
    check_unit("f_exp", f_exp)?;
    check_unit("f_tol", f_tol)?;
    if f_tol >= f_exp {
        return Err(BoundsError::Unsound { f_tol, f_exp });
    }
    let d = relative_entropy(f_tol, f_exp)?;
    let raw = 1.0 - decay(n as f64, d);
    Ok(BoundReport::new(
        d,
        n as f64,
        1.0,
        raw,
        BoundParams { qubits: Some(n), f_tol: Some(f_tol), f_exp: Some(f_exp), ..Default::default() },
    ))
}

fn check_secure(f_tol: f64, threshold: f64) -> Result<(), BoundsError> {
    check_unit("f_tol", f_tol)?;
    if f_tol <= threshold {
        return Err(BoundsError::InsecureParameters { f_tol, threshold });
    }
    Ok(())
}

/// Upper bound on the probability that both outputs of any counterfeiting
/// map are accepted: `exp(-N D(2 F_tol - 1 || 2/3))`.
pub fn security_bound(n: u64, f_tol: f64) -> Result<BoundReport, BoundsError> {
    check_secure(f_tol, 5.0 / 6.0)?;
    let d = relative_entropy(2.0 * f_tol - 1.0, 2.0 / 3.0)?;
    Ok(BoundReport::new(
        d,
        n as f64,
        1.0,
        decay(n as f64, d),
        BoundParams { qubits: Some(n), f_tol: Some(f_tol), ..Default::default() },
    ))
}

/// Security with `v` adaptive verification attempts: `C(v,2)` times
/// [`security_bound`].
pub fn learning_bound(n: u64, f_tol: f64, v: u64) -> Result<BoundReport, BoundsError> {
    let base = security_bound(n, f_tol)?;
    let prefactor = pairs(v);
    let mut params = base.params.clone();
    params.attempts = Some(v);
    Ok(BoundReport::new(base.exponent, base.scale, prefactor, prefactor * base.raw, params))
}

/// Honest acceptance of a cv-qticket: `(1 - exp(-r D(F_tol || F_exp)))^n`.
pub fn cv_soundness_bound(blocks: u64, pairs_per_block: u64, f_exp: f64, f_tol: f64) -> Result<BoundReport, BoundsError> {
    check_unit("f_exp", f_exp)?;
    check_unit("f_tol", f_tol)?;
    if f_tol >= f_exp {
        return Err(BoundsError::Unsound { f_tol, f_exp });
    }
    let d = relative_entropy(f_tol, f_exp)?;
    let per_block = 1.0 - decay(pairs_per_block as f64, d);
    let raw = per_block.powf(blocks as f64);
    Ok(BoundReport::new(
        d,
        pairs_per_block as f64,
        1.0,
        raw,
        BoundParams {
            blocks: Some(blocks),
            pairs_per_block: Some(pairs_per_block),
            f_tol: Some(f_tol),
            f_exp: Some(f_exp),
            ..Default::default()
        },
    ))
}

/// Per-block double-answer factor `1/2 + exp(-r D(F_tol || (1+1/sqrt 2)/2))`,
/// without any threshold check (equals 3/2 at the threshold).
pub fn cv_block_factor(pairs_per_block: u64, f_tol: f64) -> Result<f64, BoundsError> {
    check_unit("f_tol", f_tol)?;
    let d = relative_entropy(f_tol, cv_threshold())?;
    Ok(0.5 + decay(pairs_per_block as f64, d))
}

/// Probability of two accepted cv answers within `v` attempts:
/// `C(v,2)^2 (1/2 + exp(-r D(F_tol || (1+1/sqrt 2)/2)))^n`.
pub fn cv_security_bound(blocks: u64, pairs_per_block: u64, f_tol: f64, v: u64) -> Result<BoundReport, BoundsError> {
    check_secure(f_tol, cv_threshold())?;
    let d = relative_entropy(f_tol, cv_threshold())?;
    let block = 0.5 + decay(pairs_per_block as f64, d);
    let prefactor = pairs(v).powi(2);
    let raw = prefactor * block.powf(blocks as f64);
    Ok(BoundReport::new(
        d,
        pairs_per_block as f64,
        prefactor,
        raw,
        BoundParams {
            blocks: Some(blocks),
            pairs_per_block: Some(pairs_per_block),
            f_tol: Some(f_tol),
            attempts: Some(v),
            ..Default::default()
        },
    ))
}

/// Two verifiers asking complementary questions on every block: each block
/// is a threshold game over the averaged pair game, so the joint acceptance
/// is at most `(2 exp(-r D(F_tol || 1/2 + 1/sqrt 8)))^n`.
pub fn cv_complementary_bound(blocks: u64, pairs_per_block: u64, f_tol: f64) -> Result<BoundReport, BoundsError> {
    check_secure(f_tol, cv_threshold())?;
    let d = relative_entropy(f_tol, cv_threshold())?;
    let block = 2.0 * decay(pairs_per_block as f64, d);
    Ok(BoundReport::new(
        d,
        pairs_per_block as f64,
        2.0,
        block.powf(blocks as f64),
        BoundParams {
            blocks: Some(blocks),
            pairs_per_block: Some(pairs_per_block),
            f_tol: Some(f_tol),
            ..Default::default()
        },
    ))
}

/// Probability that a single copy from the optimal cloner is rejected when
/// `F_tol < 5/6`: `(1/2) exp(-2 N (5/6 - F_tol)^2)`.
pub fn hoeffding_rejection(n: u64, f_tol: f64) -> Result<BoundReport, BoundsError> {
    check_unit("f_tol", f_tol)?;
    if f_tol >= 5.0 / 6.0 {
        return Err(BoundsError::InvalidParameter { name: "f_tol", value: f_tol });
    }
    let gap = 5.0 / 6.0 - f_tol;
    let e = 2.0 * gap * gap;
    Ok(BoundReport::new(
        e,
        n as f64,
        0.5,
        0.5 * decay(n as f64, e),
        BoundParams { qubits: Some(n), f_tol: Some(f_tol), ..Default::default() },
    ))
}

/// Tolerance needed when `c` identical copies are issued:
/// `1 - 1/((c+1)(c+2))`.
pub fn multicopy_threshold(c: u64) -> Result<Ratio<u64>, BoundsError> {
    if c < 1 {
        return Err(BoundsError::InvalidParameter { name: "c", value: c as f64 });
    }
    let den = (c + 1) * (c + 2);
    Ok(Ratio::new(den - 1, den))
}

/// Exponent `D((c+1) F_tol - c || (c+1)/(c+2))` of the `c -> c+1` bound,
/// with no threshold check.
pub fn multicopy_exponent(f_tol: f64, c: u64) -> Result<f64, BoundsError> {
    if c < 1 {
        return Err(BoundsError::InvalidParameter { name: "c", value: c as f64 });
    }
    let cf = c as f64;
    let p = ((cf + 1.0) * f_tol - cf).clamp(0.0, 1.0);
    relative_entropy(p, (cf + 1.0) / (cf + 2.0))
}

/// Probability of producing `c + 1` accepted tokens from `c` copies.
pub fn multicopy_security_bound(n: u64, f_tol: f64, c: u64) -> Result<BoundReport, BoundsError> {
    let threshold = multicopy_threshold(c)?;
    check_secure(f_tol, *threshold.numer() as f64 / *threshold.denom() as f64)?;
    let d = multicopy_exponent(f_tol, c)?;
    Ok(BoundReport::new(
        d,
        n as f64,
        1.0,
        decay(n as f64, d),
        BoundParams { qubits: Some(n), f_tol: Some(f_tol), copies: Some(c), ..Default::default() },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: `D(p||q) = ∫_q^p (p - t) / (t (1 - t)) dt`, by
    /// composite Simpson quadrature.
    fn relative_entropy_quadrature(p: f64, q: f64) -> f64 {
        let steps = 20_000;
        let h = (p - q) / steps as f64;
        let f = |t: f64| (p - t) / (t * (1.0 - t));
        let mut s = f(q) + f(p);
        for k in 1..steps {
            let t = q + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(t);
        }
        s * h / 3.0
    }

    #[test]
    fn relative_entropy_examples() {
        assert_eq!(relative_entropy(0.3, 0.3).unwrap(), 0.0);
        assert_eq!(relative_entropy(2.0 / 3.0, 2.0 / 3.0).unwrap(), 0.0);
        let d = relative_entropy(0.9, 0.95).unwrap();
        assert!((d - relative_entropy_quadrature(0.9, 0.95)).abs() < 1e-12);
        assert!((d - 0.020_654_218_912_746).abs() < 1e-12);
        assert_eq!(relative_entropy(0.5, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(relative_entropy(0.5, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(relative_entropy(0.0, 0.5).unwrap(), 2f64.ln());
        assert!(relative_entropy(1.2, 0.5).is_err());
        assert!(relative_entropy(0.5, -0.1).is_err());
    }

    #[test]
    fn quadrature_agrees_on_grid() {
        for p in [0.05, 0.3, 0.8, 0.92] {
            for q in [0.1, 0.5, 0.85] {
                let a = relative_entropy(p, q).unwrap();
                assert!((a - relative_entropy_quadrature(p, q)).abs() < 1e-10, "{p} {q}");
            }
        }
    }

    #[test]
    fn chernoff_examples() {
        assert_eq!(chernoff_tail(100, 0.4, 0.4).unwrap().raw, 1.0);
        for n in [1u64, 7, 30] {
            let r = chernoff_tail(n, 1.0, 0.5).unwrap();
            assert!((r.raw - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
        let low = chernoff_lower_tail(500, 0.9, 0.95).unwrap();
        assert!((low.raw - 3.273_356_819_253e-5).abs() < 1e-15);
        assert!(chernoff_tail(10, 0.3, 0.5).is_err());

        assert_eq!(real_valued_chernoff_tail(10, 0.7, 0.7).unwrap().raw, 2.0);
        assert_eq!(real_valued_chernoff_tail(10, 0.7, 0.7).unwrap().clamped, 1.0);
        assert!((real_valued_chernoff_tail(1, 1.0, 0.5).unwrap().raw - 1.0).abs() < 1e-15);
        let d = relative_entropy(0.9, 0.5 + 0.125f64.sqrt()).unwrap();
        let r = real_valued_chernoff_tail(100, 0.9, 0.5 + 0.125f64.sqrt()).unwrap();
        assert!((r.raw - 2.0 * (-100.0 * d).exp()).abs() < 1e-15);
    }

    #[test]
    fn soundness_examples() {
        assert_eq!(soundness_bound(500, 1.0, 0.9).unwrap().raw, 1.0);
        let s = soundness_bound(500, 0.95, 0.9).unwrap();
        assert!((s.raw - (1.0 - 3.273_356_819_253e-5)).abs() < 1e-14);
        assert!(soundness_bound(500, 0.9, 0.9 - 1e-9).unwrap().raw < 1e-6);
        assert!(matches!(soundness_bound(10, 0.9, 0.9), Err(BoundsError::Unsound { .. })));
    }

    #[test]
    fn security_examples() {
        assert!(security_bound(1000, 5.0 / 6.0 + 1e-9).unwrap().raw > 0.999_999);
        let s = security_bound(1000, 0.9).unwrap();
        let d = relative_entropy_quadrature(0.8, 2.0 / 3.0);
        assert!((s.exponent - d).abs() < 1e-12);
        assert!((s.raw / (-1000.0 * d).exp() - 1.0).abs() < 1e-9);
        assert!((s.raw - 1.058_651_665_682_7e-19).abs() < 1e-30);
        assert_eq!(security_bound(0, 0.9).unwrap().raw, 1.0);
        assert!(security_bound(10, 5.0 / 6.0).unwrap_err().is_insecure());
        assert!(security_bound(10, 0.8).unwrap_err().is_insecure());
    }

    #[test]
    fn learning_examples() {
        assert_eq!(learning_bound(1000, 0.9, 2).unwrap().raw, security_bound(1000, 0.9).unwrap().raw);
        let l = learning_bound(1000, 0.9, 10).unwrap();
        assert!((l.raw - 45.0 * security_bound(1000, 0.9).unwrap().raw).abs() < 1e-30);
        assert_eq!(learning_bound(1000, 0.9, 1).unwrap().raw, 0.0);
    }

    #[test]
    fn cv_examples() {
        let one = cv_soundness_bound(1, 200, 0.95, 0.9).unwrap();
        assert!((one.raw - soundness_bound(200, 0.95, 0.9).unwrap().raw).abs() < 1e-15);
        let s = cv_soundness_bound(10, 100, 0.95, 0.9).unwrap();
        let d = relative_entropy_quadrature(0.9, 0.95);
        assert!((s.raw - (1.0 - (-100.0 * d).exp()).powi(10)).abs() < 1e-10);
        assert!((s.raw - 0.257_817_472_079).abs() < 1e-9);
        assert_eq!(cv_soundness_bound(3, 5, 1.0, 0.9).unwrap().raw, 1.0);

        assert!((cv_block_factor(50, cv_threshold()).unwrap() - 1.5).abs() < 1e-15);
        assert!(cv_security_bound(20, 200, cv_threshold(), 2).unwrap_err().is_insecure());
        let b = cv_security_bound(20, 200, 0.92, 2).unwrap();
        let d = relative_entropy_quadrature(0.92, cv_threshold());
        assert!((b.raw - (0.5 + (-200.0 * d).exp()).powi(20)).abs() < 1e-15);
        let b4 = cv_security_bound(20, 200, 0.92, 4).unwrap();
        assert!((b4.raw - 36.0 * b.raw).abs() < 1e-15);
        let small: Vec<f64> = [1u64, 10, 40, 160].iter().map(|n| cv_security_bound(*n, 400, 0.95, 2).unwrap().raw).collect();
        assert!(small.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn hoeffding_examples() {
        let h = hoeffding_rejection(1000, 0.8).unwrap();
        assert!((h.raw - 0.5 * (-2000.0f64 * (5.0 / 6.0 - 0.8f64).powi(2)).exp()).abs() < 1e-15);
        assert!((h.raw - 0.054_184).abs() < 1e-6);
        assert_eq!(hoeffding_rejection(0, 0.8).unwrap().raw, 0.5);
        assert!(hoeffding_rejection(1_000_000, 5.0 / 6.0 - 0.01).unwrap().raw < 1e-40);
        assert!(hoeffding_rejection(10, 5.0 / 6.0).is_err());
    }

    #[test]
    fn multicopy_examples() {
        assert_eq!(multicopy_threshold(1).unwrap(), Ratio::new(5, 6));
        assert_eq!(multicopy_threshold(2).unwrap(), Ratio::new(11, 12));
        assert_eq!(multicopy_threshold(3).unwrap(), Ratio::new(19, 20));
        assert!(multicopy_threshold(0).is_err());
        let ts: Vec<_> = (1..20).map(|c| multicopy_threshold(c).unwrap()).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));

        for f in [0.85, 0.9, 0.97] {
            assert_eq!(multicopy_security_bound(300, f, 1).unwrap().raw, security_bound(300, f).unwrap().raw);
        }
        for c in 1..5 {
            let t = multicopy_threshold(c).unwrap();
            let tf = *t.numer() as f64 / *t.denom() as f64;
            assert!(multicopy_exponent(tf, c).unwrap() < 1e-12);
            assert!(multicopy_security_bound(100, tf, c).unwrap_err().is_insecure());
        }
        let m = multicopy_security_bound(500, 0.95, 2).unwrap();
        let d = relative_entropy_quadrature(0.85, 0.75);
        assert!((m.raw / (-500.0 * d).exp() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn monotone_directions() {
        let ns = [10u64, 50, 200, 1000];
        for f in [0.84, 0.9, 0.97] {
            let v: Vec<f64> = ns.iter().map(|n| security_bound(*n, f).unwrap().raw).collect();
            assert!(v.windows(2).all(|w| w[1] <= w[0]));
        }
        let v: Vec<f64> = [0.84, 0.87, 0.9, 0.95, 1.0].iter().map(|f| security_bound(300, *f).unwrap().raw).collect();
        assert!(v.windows(2).all(|w| w[1] <= w[0]));
        let v: Vec<f64> = ns.iter().map(|n| soundness_bound(*n, 0.95, 0.9).unwrap().raw).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
        let v: Vec<f64> = [0.91, 0.93, 0.95, 0.99].iter().map(|e| soundness_bound(200, *e, 0.9).unwrap().raw).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
    }
}
