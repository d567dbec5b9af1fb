//! Exact binomial-family distributions used as oracles for the bounds.

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `ln k!` for `k = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `ln P[Bin(n, p) = k]` for every `k`, using a precomputed factorial table
/// of length at least `n + 1`.
pub fn ln_binomial_pmf_with(n: usize, p: f64, lnf: &[f64]) -> Vec<f64> {
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    (0..=n)
        .map(|k| {
            let mut v = lnf[n] - lnf[k] - lnf[n - k];
            if k > 0 {
                v += k as f64 * lp;
            }
            if k < n {
                v += (n - k) as f64 * lq;
            }
            v
        })
        .collect()
}

pub fn binomial_pmf_with(n: usize, p: f64, lnf: &[f64]) -> Vec<f64> {
    if p <= 0.0 {
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; n + 1];
        v[n] = 1.0;
        return v;
    }
    ln_binomial_pmf_with(n, p, lnf).into_iter().map(f64::exp).collect()
}

pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    binomial_pmf_with(n, p, &ln_factorials(n))
}

/// `P[Bin(n, p) >= k]`.
pub fn binomial_upper_tail(n: usize, p: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let pmf = binomial_pmf(n, p);
    compensated_sum(pmf[k..].iter().rev().copied()).clamp(0.0, 1.0)
}

/// `P[Bin(n, p) <= k]`.
pub fn binomial_lower_tail(n: usize, p: f64, k: usize) -> f64 {
    if k >= n {
        return 1.0;
    }
    let pmf = binomial_pmf(n, p);
    compensated_sum(pmf[..=k].iter().copied()).clamp(0.0, 1.0)
}

/// `ln P[Bin(n, p) >= k]`, accurate far below the double-precision
/// underflow threshold.
pub fn ln_binomial_upper_tail(n: usize, p: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k > n || p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let terms = ln_binomial_pmf_with(n, p, &ln_factorials(n));
    log_sum_exp(&terms[k..])
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + compensated_sum(terms.iter().map(|t| (t - max).exp())).ln()
}

/// Distribution of the number of successes among independent Bernoulli
/// trials with the given success probabilities (O(N^2) convolution).
pub fn poisson_binomial_pmf(probs: &[f64]) -> Vec<f64> {
    let mut dp = vec![0.0f64; probs.len() + 1];
    dp[0] = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        let q = 1.0 - p;
        for j in (1..=i + 1).rev() {
            dp[j] = dp[j] * q + dp[j - 1] * p;
        }
        dp[0] *= q;
    }
    dp
}
