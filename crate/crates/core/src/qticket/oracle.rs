use super::QticketError;
use crate::attacks::PairOutcomeDist;
use crate::tails::{binomial_pmf_with, compensated_sum, ln_factorials, poisson_binomial_pmf};
use crate::tolerance::Tolerance;

/// Exact probability that an honest token with per-qubit success
/// probabilities `fidelities` reaches the acceptance threshold.
pub fn exact_honest_acceptance(fidelities: &[f64], f_tol: Tolerance) -> Result<f64, QticketError> {
    if let Some(bad) = fidelities.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(QticketError::InvalidProbability(*bad));
    }
    let k = f_tol.min_correct(fidelities.len());
    let pmf = poisson_binomial_pmf(fidelities);
    Ok(compensated_sum(pmf[k..].iter().rev().copied()).clamp(0.0, 1.0))
}

/// Exact probability that two correlated tokens are both accepted when each
/// qubit position independently yields the joint outcome distribution
/// `dist` (first index: first token correct, second index: second token).
///
/// The lattice is walked as: `a = #11 ~ Bin(N, p11)`, then among the other
/// `N - a` positions `b = #10 ~ Bin(N - a, p10/(1 - p11))`, then
/// `c = #01 ~ Bin(N - a - b, p01/(p01 + p00))`. Both tokens pass iff
/// `b >= k - a` and `c >= k - a`. A table of binomial upper tails for the
/// last stage keeps the whole computation at O(N^2).
pub fn double_acceptance_exact(n: usize, f_tol: Tolerance, dist: PairOutcomeDist) -> Result<f64, QticketError> {
    let k = f_tol.min_correct(n);
    let lnf = ln_factorials(n);
    let PairOutcomeDist { p11, p10, p01, p00 } = dist;

    let rest = p10 + p01 + p00;
    let q10 = if rest > 0.0 { p10 / rest } else { 0.0 };
    let tail01 = upper_tail_table(n, if p01 + p00 > 0.0 { p01 / (p01 + p00) } else { 0.0 });

    let pmf_a = binomial_pmf_with(n, p11, &lnf);
    let mut terms = Vec::with_capacity(n + 1);
    for a in 0..=n {
        let wa = pmf_a[a];
        if wa == 0.0 {
            continue;
        }
        let m = n - a;
        let need = k.saturating_sub(a);
        if 2 * need > m {
            continue;
        }
        let pmf_b = binomial_pmf_with(m, q10, &lnf);
        let inner = compensated_sum((need..=m - need).map(|b| pmf_b[b] * tail01.get(m - b, need)));
        terms.push(wa * inner);
    }
    Ok(compensated_sum(terms).clamp(0.0, 1.0))
}

/// `T[s][x] = P[Bin(s, q) >= x]` for `0 <= x <= s <= n`.
struct TailTable {
    rows: Vec<Vec<f64>>,
}

impl TailTable {
    fn get(&self, s: usize, x: usize) -> f64 {
        if x == 0 {
            1.0
        } else if x > s {
            0.0
        } else {
            self.rows[s][x]
        }
    }
}

fn upper_tail_table(n: usize, q: f64) -> TailTable {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    rows.push(vec![1.0]);
    for s in 1..=n {
        let prev = &rows[s - 1];
        let get_prev = |x: usize| if x == 0 { 1.0 } else if x > s - 1 { 0.0 } else { prev[x] };
        let mut row = vec![0.0; s + 1];
        row[0] = 1.0;
        for x in 1..=s {
            // first trial succeeds and x-1 more follow, or it fails and x more follow
            row[x] = q * get_prev(x - 1) + (1.0 - q) * get_prev(x);
        }
        rows.push(row);
    }
    TailTable { rows }
}
