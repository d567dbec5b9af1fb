//! Aligned-text reports: bound tables and pair-game values.

use qtickets::bounds::{
    cv_complementary_bound, cv_security_bound, cv_soundness_bound, cv_threshold, hoeffding_rejection, learning_bound,
    multicopy_security_bound, multicopy_threshold, qticket_threshold, relative_entropy, security_bound, soundness_bound,
    BoundReport, BoundsError,
};
use qtickets::games::{build_cv_pair_games, Game};

use crate::{BoundsArgs, Failure, Outcome};

struct Table {
    rows: Vec<[String; 5]>,
}

impl Table {
    fn new() -> Self {
        let header = ["quantity", "parameters", "exponent", "raw", "clamped"].map(String::from);
        Self { rows: vec![header] }
    }

    fn value(&mut self, name: &str, params: String, value: String) {
        self.rows.push([name.into(), params, "-".into(), value.clone(), value]);
    }

    fn bound(&mut self, name: &str, params: String, r: Result<BoundReport, BoundsError>) {
        let row = match r {
            Ok(b) => [name.into(), params, fmt(b.exponent), fmt(b.raw), fmt(b.clamped)],
            Err(e) if e.is_insecure() => [name.into(), params, "-".into(), "insecure-parameters".into(), "-".into()],
            Err(BoundsError::InvalidParameter { .. }) => [name.into(), params, "-".into(), "not-applicable".into(), "-".into()],
            Err(e) => [name.into(), params, "-".into(), e.to_string(), "-".into()],
        };
        self.rows.push(row);
    }

    fn print(&self) {
        let widths: Vec<usize> = (0..5).map(|c| self.rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        for r in &self.rows {
            let line: Vec<String> = r.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
            println!("{}", line.join("  ").trim_end());
        }
    }
}

fn fmt(x: f64) -> String {
    if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x:.10}")
    } else {
        format!("{x:.6e}")
    }
}

pub(crate) fn bounds(a: &BoundsArgs) -> Outcome {
    if a.copies.contains(&0) {
        return Err(Failure::Usage("--copies must be at least 1".into()));
    }
    let mut t = Table::new();
    let q = qticket_threshold();
    t.value("qticket threshold", format!("{}/{}", q.numer(), q.denom()), fmt(*q.numer() as f64 / *q.denom() as f64));
    t.value("cv threshold", "(1+1/sqrt2)/2".into(), fmt(cv_threshold()));
    for &c in &a.copies {
        let m = multicopy_threshold(c).map_err(|e| Failure::Usage(e.to_string()))?;
        t.value("multicopy threshold", format!("c={c} {}/{}", m.numer(), m.denom()), fmt(*m.numer() as f64 / *m.denom() as f64));
    }
    for tol in &a.ftol {
        let f = tol.as_f64();
        let (n, big_n) = (a.n, a.big_n);
        // 2 F_tol - 1 in exact arithmetic so the threshold gives exactly zero
        let clone_rate = (2 * tol.numer()).saturating_sub(tol.denom()) as f64 / tol.denom() as f64;
        let exponent = relative_entropy(clone_rate, 2.0 / 3.0).map_err(|e| Failure::Usage(e.to_string()))?;
        t.value("security exponent", format!("F_tol={tol}"), fmt(exponent));
        t.bound("soundness", format!("N={big_n} F_exp={} F_tol={tol}", a.fexp), soundness_bound(big_n, a.fexp, f));
        t.bound("security", format!("N={big_n} F_tol={tol}"), security_bound(big_n, f));
        t.bound("learning", format!("N={big_n} F_tol={tol} v={}", a.v), learning_bound(big_n, f, a.v));
        t.bound("hoeffding rejection", format!("N={big_n} F_tol={tol}"), hoeffding_rejection(big_n, f));
        for &c in &a.copies {
            t.bound("multicopy security", format!("N={big_n} F_tol={tol} c={c}"), multicopy_security_bound(big_n, f, c));
        }
        let cv = format!("n={n} r={}", a.r);
        t.bound("cv soundness", format!("{cv} F_exp={} F_tol={tol}", a.fexp), cv_soundness_bound(n, a.r, a.fexp, f));
        t.bound("cv security", format!("{cv} F_tol={tol} v={}", a.v), cv_security_bound(n, a.r, f, a.v));
        t.bound("cv complementary", format!("{cv} F_tol={tol}"), cv_complementary_bound(n, a.r, f));
    }
    t.print();
    Ok(true)
}

pub(crate) fn games() -> Outcome {
    let g = build_cv_pair_games().map_err(|e| Failure::Io(e.to_string()))?;
    let sel = |game: &dyn Game| game.selective_value().map_err(|e| Failure::Io(e.to_string()));
    let mut rows = Vec::new();
    for (name, game) in [("G_Z", &g.z), ("G_X", &g.x), ("G_and", &g.and), ("G_avg", &g.avg)] {
        rows.push((format!("Sel({name})"), sel(game)?));
    }
    rows.push(("mixed average".into(), g.mixed_average().map_err(|e| Failure::Io(e.to_string()))?));
    let w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    for (name, v) in rows {
        println!("{name:<w$}  {v:.10}");
    }
    Ok(true)
}
