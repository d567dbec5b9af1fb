//! Double-acceptance sweeps over `(f_tol, N)` for a cloning strategy.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::attacks::{counterfeit, pair_outcome_distribution, PairCloneStrategy, PairOutcomeDist};
use crate::qticket::{double_acceptance_exact, issue, verify, QticketError, VerifierPolicy};
use crate::quantum::StateLabel;
use crate::rng::RngStream;
use crate::tolerance::Tolerance;

pub const CSV_HEADER: [&str; 5] = ["f_tol", "N", "exact_prob", "mc_prob", "mc_stderr"];

const BATCH: usize = 256;

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub strategy: PairCloneStrategy,
    pub lengths: Vec<usize>,
    pub tolerances: Vec<Tolerance>,
    /// Zero skips the Monte Carlo columns.
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub f_tol: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub exact_prob: f64,
    pub mc_prob: f64,
    pub mc_stderr: f64,
}

/// `start, start + step, ...` up to and including `end`, all over `denom`.
pub fn tolerance_grid(start: u64, end: u64, step: u64, denom: u64) -> Vec<Tolerance> {
    assert!(step > 0, "grid step must be positive");
    (start..=end).step_by(step as usize).map(|p| Tolerance::new(p, denom).expect("grid inside [0, 1]")).collect()
}

/// Per-qubit outcome law averaged over the uniformly drawn secret label.
pub fn mixed_pair_distribution(strategy: &PairCloneStrategy) -> PairOutcomeDist {
    let mut acc = [0.0; 4];
    for l in StateLabel::ALL {
        let d = pair_outcome_distribution(strategy, l);
        for (a, p) in acc.iter_mut().zip([d.p11, d.p10, d.p01, d.p00]) {
            *a += p / 6.0;
        }
    }
    PairOutcomeDist { p11: acc[0], p10: acc[1], p01: acc[2], p00: acc[3] }
}

/// Correct counts of both counterfeits for `trials` independent tickets.
fn sample_counts(
    strategy: &PairCloneStrategy,
    n: usize,
    trials: usize,
    rng: &RngStream,
) -> Result<Vec<(usize, usize)>, QticketError> {
    // every qubit is scored; thresholds are applied afterwards
    let policy = VerifierPolicy::new(Tolerance::new(0, 1).expect("zero tolerance"), n);
    let batches = trials.div_ceil(BATCH);
    let chunks: Vec<Vec<(usize, usize)>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng.substream(b as u64);
            let size = BATCH.min(trials - b * BATCH);
            (0..size)
                .map(|_| {
                    let (secret, token) = issue(n, &mut rng)?;
                    let (t1, t2) = counterfeit(token, strategy)?;
                    let c1 = verify(&secret, t1, &policy, &mut rng)?.correct_count;
                    let c2 = verify(&secret, t2, &policy, &mut rng)?.correct_count;
                    Ok((c1, c2))
                })
                .collect()
        })
        .collect::<Result<_, QticketError>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Rows ordered by `N`, then by tolerance. Samples are shared across the
/// tolerance grid for each `N`.
pub fn sweep_double_accept(config: &SweepConfig) -> Result<Vec<SweepRow>, QticketError> {
    let dist = mixed_pair_distribution(&config.strategy);
    let root = RngStream::new(config.seed);
    let mut rows = Vec::with_capacity(config.lengths.len() * config.tolerances.len());
    for (i, &n) in config.lengths.iter().enumerate() {
        let counts = if config.trials > 0 {
            sample_counts(&config.strategy, n, config.trials, &root.substream(i as u64))?
        } else {
            Vec::new()
        };
        let exact: Vec<f64> = config
            .tolerances
            .par_iter()
            .map(|&t| double_acceptance_exact(n, t, dist))
            .collect::<Result<_, _>>()?;
        for (&t, exact_prob) in config.tolerances.iter().zip(exact) {
            let (mc_prob, mc_stderr) = if counts.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                let k = t.min_correct(n);
                let hits = counts.iter().filter(|&&(a, b)| a >= k && b >= k).count();
                let p = hits as f64 / counts.len() as f64;
                (p, (p * (1.0 - p) / counts.len() as f64).sqrt())
            };
            rows.push(SweepRow { f_tol: t.as_f64(), n, exact_prob, mc_prob, mc_stderr });
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{measure_reprepare_z, universal_cloner};

    #[test]
    fn grid_endpoints() {
        let g = tolerance_grid(70, 95, 1, 100);
        assert_eq!(g.len(), 26);
        assert_eq!(g[0].to_string(), "7/10");
        assert_eq!(g[25].to_string(), "19/20");
    }

    #[test]
    fn mixed_distribution_of_reprepare() {
        // Z labels survive both copies; X and Y labels give independent coins
        let d = mixed_pair_distribution(&measure_reprepare_z());
        assert!((d.p11 - (2.0 + 4.0 * 0.25) / 6.0).abs() < 1e-12);
        assert!((d.p10 - d.p01).abs() < 1e-12);
        let u = mixed_pair_distribution(&universal_cloner());
        assert!((u.first_marginal() - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn csv_header_and_mc_agreement() {
        let config = SweepConfig {
            strategy: universal_cloner(),
            lengths: vec![20],
            tolerances: tolerance_grid(70, 90, 10, 100),
            trials: 2000,
            seed: 7,
        };
        let rows = sweep_double_accept(&config).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            let sigma = r.mc_stderr.max(1e-3);
            assert!((r.mc_prob - r.exact_prob).abs() < 4.0 * sigma, "{r:?}");
        }
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(sweep_double_accept(&config).unwrap(), rows);
    }
}
